//! Reduced words in a free group of finite rank.
//!
//! Generators are numbered from 1. A [`Letter`] is a generator or its
//! inverse; a [`Word`] is always stored freely reduced.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// A generator `x_i` (positive) or its inverse (negative).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct Letter(i32);

impl Letter {
    pub fn new(generator: usize, inverse: bool) -> Self {
        assert!(generator >= 1, "generators are numbered from 1");
        let g = generator as i32;
        Letter(if inverse { -g } else { g })
    }

    pub fn generator(self) -> usize {
        self.0.unsigned_abs() as usize
    }

    pub fn is_inverse(self) -> bool {
        self.0 < 0
    }

    pub fn inverse(self) -> Self {
        Letter(-self.0)
    }

    fn key(self) -> (u32, bool) {
        (self.0.unsigned_abs(), self.0 < 0)
    }
}

impl Ord for Letter {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

impl PartialOrd for Letter {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A freely reduced word. Ordered by length, then lexicographically on
/// `(generator, sign)` with a generator before its inverse.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct Word(Vec<Letter>);

impl Word {
    pub fn identity() -> Self {
        Word(Vec::new())
    }

    pub fn generator(i: usize) -> Self {
        Word(vec![Letter::new(i, false)])
    }

    pub fn letter(l: Letter) -> Self {
        Word(vec![l])
    }

    /// Freely reduces an arbitrary letter sequence.
    pub fn from_letters<I: IntoIterator<Item = Letter>>(letters: I) -> Self {
        let mut out: Vec<Letter> = Vec::new();
        for l in letters {
            push_reduced(&mut out, l);
        }
        Word(out)
    }

    /// Reduces `raw`, rejecting letters whose generator exceeds `rank`.
    pub fn reduce(raw: &[Letter], rank: usize) -> Result<Self> {
        if let Some(bad) = raw.iter().find(|l| l.generator() > rank) {
            return Err(Error::MalformedWord(format!(
                "generator {} out of range 1..={}",
                bad.generator(),
                rank
            )));
        }
        Ok(Word::from_letters(raw.iter().copied()))
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_empty()
    }

    /// Largest generator index occurring in the word (0 for the identity).
    pub fn max_generator(&self) -> usize {
        self.0.iter().map(|l| l.generator()).max().unwrap_or(0)
    }

    pub fn inverse(&self) -> Self {
        Word(self.0.iter().rev().map(|l| l.inverse()).collect())
    }

    pub fn mul(&self, other: &Word) -> Word {
        let mut out = Vec::with_capacity(self.len() + other.len());
        out.extend_from_slice(&self.0);
        for &l in &other.0 {
            push_reduced(&mut out, l);
        }
        Word(out)
    }

    pub fn mul_letter(&self, l: Letter) -> Word {
        let mut out = self.0.clone();
        push_reduced(&mut out, l);
        Word(out)
    }

    pub fn pow(&self, k: i64) -> Word {
        let base = if k < 0 { self.inverse() } else { self.clone() };
        let mut out = Word::identity();
        for _ in 0..k.unsigned_abs() {
            out = out.mul(&base);
        }
        out
    }

    pub fn commutes_with(&self, other: &Word) -> bool {
        self.mul(other) == other.mul(self)
    }

    pub fn display(&self) -> WordDisplay<'_> {
        WordDisplay {
            word: self,
            names: None,
        }
    }
}

fn push_reduced(out: &mut Vec<Letter>, l: Letter) {
    if out.last() == Some(&l.inverse()) {
        out.pop();
    } else {
        out.push(l);
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.display().fmt(f)
    }
}

impl Serialize for Word {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

pub struct WordDisplay<'a> {
    word: &'a Word,
    names: Option<&'a NameTable>,
}

impl fmt::Display for WordDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.word.is_identity() {
            return f.write_str("e");
        }
        for (i, l) in self.word.letters().iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            match self.names {
                Some(t) => f.write_str(t.name(l.generator()))?,
                None => write!(f, "x{}", l.generator())?,
            }
            if l.is_inverse() {
                f.write_str("^-1")?;
            }
        }
        Ok(())
    }
}

/// Maps user-facing generator names to indices `1..=rank`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NameTable {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl NameTable {
    /// Names `x1 .. xn`.
    pub fn standard(rank: usize) -> Self {
        Self::from_names((1..=rank).map(|i| format!("x{i}")).collect())
            .expect("standard names are distinct")
    }

    pub fn from_names(names: Vec<String>) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, n) in names.iter().enumerate() {
            if n == "e" || n.is_empty() || n.contains(char::is_whitespace) {
                return Err(Error::MalformedWord(format!("invalid generator name `{n}`")));
            }
            if index.insert(n.clone(), i + 1).is_some() {
                return Err(Error::MalformedWord(format!("duplicate generator `{n}`")));
            }
        }
        Ok(NameTable { names, index })
    }

    pub fn rank(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i - 1]
    }

    pub fn lookup(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn parse_letter(&self, token: &str) -> Result<Letter> {
        let (base, inverse) = match token.strip_suffix("^-1") {
            Some(b) => (b, true),
            None => (token, false),
        };
        let g = self
            .lookup(base)
            .ok_or_else(|| Error::MalformedWord(format!("unknown generator `{base}`")))?;
        Ok(Letter::new(g, inverse))
    }

    /// Parses the token syntax `x1 x2^-1`; `e` is the identity.
    pub fn parse_word(&self, text: &str) -> Result<Word> {
        self.parse_tokens(text.split_whitespace())
    }

    pub fn parse_tokens<'a, I: IntoIterator<Item = &'a str>>(&self, tokens: I) -> Result<Word> {
        let mut letters = Vec::new();
        for t in tokens {
            if t == "e" {
                continue;
            }
            letters.push(self.parse_letter(t)?);
        }
        Ok(Word::from_letters(letters))
    }

    pub fn format<'a>(&'a self, w: &'a Word) -> WordDisplay<'a> {
        WordDisplay {
            word: w,
            names: Some(self),
        }
    }
}

/// Checked product for words of a fixed rank.
pub fn multiply(rank: usize, a: &Word, b: &Word) -> Result<Word> {
    for w in [a, b] {
        if w.max_generator() > rank {
            return Err(Error::RankMismatch {
                expected: rank,
                found: w.max_generator(),
            });
        }
    }
    Ok(a.mul(b))
}

/// All letters of rank `n` in canonical order.
pub fn alphabet(rank: usize) -> Vec<Letter> {
    (1..=rank)
        .flat_map(|g| [Letter::new(g, false), Letter::new(g, true)])
        .collect()
}

/// Reduced words of length at most `radius`, in canonical order.
pub fn ball_enumerate(rank: usize, radius: usize) -> BallIter {
    BallIter {
        alphabet: alphabet(rank),
        radius,
        level: vec![Word::identity()],
        length: 0,
        pos: 0,
    }
}

pub struct BallIter {
    alphabet: Vec<Letter>,
    radius: usize,
    level: Vec<Word>,
    length: usize,
    pos: usize,
}

impl Iterator for BallIter {
    type Item = Word;

    fn next(&mut self) -> Option<Word> {
        loop {
            if self.pos < self.level.len() {
                self.pos += 1;
                return Some(self.level[self.pos - 1].clone());
            }
            if self.length >= self.radius || self.level.is_empty() {
                return None;
            }
            // Extending a sorted level letter by letter keeps lexicographic order.
            let mut next = Vec::new();
            for w in &self.level {
                let last = w.letters().last().copied();
                for &l in &self.alphabet {
                    if Some(l.inverse()) != last {
                        let mut v = w.letters().to_vec();
                        v.push(l);
                        next.push(Word(v));
                    }
                }
            }
            self.level = next;
            self.length += 1;
            self.pos = 0;
        }
    }
}

/// Number of reduced words of length at most `r` in rank `n`.
pub fn ball_size(rank: usize, radius: usize) -> u128 {
    let n = rank as u128;
    let mut total = 1u128;
    let mut sphere = 0u128;
    for k in 1..=radius {
        sphere = if k == 1 { 2 * n } else { sphere * (2 * n - 1) };
        total += sphere;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Word {
        NameTable::standard(3).parse_word(s).unwrap()
    }

    #[test]
    fn reduce_examples() {
        assert_eq!(w("x1 x1^-1"), Word::identity());
        assert_eq!(w("x1 x2 x2^-1 x3"), w("x1 x3"));
        assert_eq!(w("x2^-1 x2 x1 x2^-1 x2"), w("x1"));
        let raw = [Letter::new(4, false)];
        assert!(matches!(Word::reduce(&raw, 3), Err(Error::MalformedWord(_))));
    }

    #[test]
    fn multiply_examples() {
        assert_eq!(w("x1 x2").mul(&w("x2^-1 x3")), w("x1 x3"));
        assert_eq!(w("x1 x2").mul(&Word::identity()), w("x1 x2"));
        assert!(w("x1 x2").mul(&w("x2^-1 x1^-1")).is_identity());
        assert!(multiply(2, &w("x3"), &w("x1")).is_err());
    }

    #[test]
    fn ball_counts() {
        let b: Vec<Word> = ball_enumerate(2, 1).collect();
        assert_eq!(b, vec![Word::identity(), w("x1"), w("x1^-1"), w("x2"), w("x2^-1")]);
        assert_eq!(ball_enumerate(2, 0).count(), 1);
        assert_eq!(ball_enumerate(2, 2).count(), 17);
        for n in 1..4 {
            for r in 0..5 {
                assert_eq!(ball_enumerate(n, r).count() as u128, ball_size(n, r));
            }
        }
        let b: Vec<Word> = ball_enumerate(2, 3).collect();
        assert!(b.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn display_round_trip() {
        let t = NameTable::standard(3);
        let x = w("x1 x2^-1 x3");
        assert_eq!(x.to_string(), "x1 x2^-1 x3");
        assert_eq!(t.parse_word(&x.to_string()).unwrap(), x);
        assert_eq!(Word::identity().to_string(), "e");
        assert_eq!(t.parse_word("e").unwrap(), Word::identity());
    }
}
