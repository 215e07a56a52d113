//! Group rings over `ℤ = ⟨t⟩`, free groups and free-by-cyclic groups.
//!
//! Elements of `𝔽 ⋊_Φ ⟨t⟩` are kept in the normal form `w·tᵐ`. The defining
//! relation `t⁻¹xt = Φ(x)` gives `x·t = t·Φ(x)` and `t·w = Φ⁻¹(w)·t`, so
//!
//! ```text
//! (w₁tᵐ¹)(w₂tᵐ²) = w₁·Φ^{-m₁}(w₂)·t^{m₁+m₂}
//! (w tᵐ)⁻¹       = Φ^{m}(w⁻¹)·t^{-m}
//! ```

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rustc_hash::{FxHashMap, FxHashSet};
use serde::Serialize;

use crate::endo::FreeEndomorphism;
use crate::error::{Error, Result};
use crate::word::{NameTable, Word};

pub type Rational = BigRational;

/// Coefficient field: exact rationals, or `f64` behind an explicit opt-in.
pub trait Scalar: Clone + PartialEq + fmt::Debug + Send + Sync + 'static {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn abs(&self) -> Self;
    fn add_assign_mul(&mut self, a: &Self, b: &Self);
    fn from_rational(r: &Rational) -> Self;
    fn to_f64(&self) -> f64;
    fn is_exact() -> bool;
}

impl Scalar for Rational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn abs(&self) -> Self {
        Signed::abs(self)
    }
    fn add_assign_mul(&mut self, a: &Self, b: &Self) {
        *self += a * b;
    }
    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }
    fn to_f64(&self) -> f64 {
        rational_to_f64(self)
    }
    fn is_exact() -> bool {
        true
    }
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn add_assign_mul(&mut self, a: &Self, b: &Self) {
        *self += a * b;
    }
    fn from_rational(r: &Rational) -> Self {
        rational_to_f64(r)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn is_exact() -> bool {
        false
    }
}

/// Integer coefficients, used after denominators have been cleared.
impl Scalar for BigInt {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn abs(&self) -> Self {
        Signed::abs(self)
    }
    fn add_assign_mul(&mut self, a: &Self, b: &Self) {
        *self += a * b;
    }
    /// Panics on a non-integral value.
    fn from_rational(r: &Rational) -> Self {
        assert!(r.is_integer(), "non-integral coefficient");
        r.numer().clone()
    }
    fn to_f64(&self) -> f64 {
        ratio_to_f64(self, &One::one())
    }
    fn is_exact() -> bool {
        true
    }
}

/// Correctly scaled conversion that survives huge numerators and denominators.
pub fn rational_to_f64(r: &Rational) -> f64 {
    ratio_to_f64(r.numer(), r.denom())
}

/// `n/d` as `f64`, keeping only the leading bits of each operand.
pub fn ratio_to_f64(n: &BigInt, d: &BigInt) -> f64 {
    let (nm, ne) = split_f64(n);
    let (dm, de) = split_f64(d);
    let e = ne - de;
    let q = nm / dm;
    // powi saturates cleanly for out-of-range exponents.
    if e.abs() > 2000 {
        return if e > 0 { q * f64::INFINITY } else { q * 0.0 };
    }
    q * 2f64.powi(e as i32)
}

fn split_f64(x: &BigInt) -> (f64, i64) {
    let shift = (x.bits() as i64 - 62).max(0);
    let top = if shift > 0 { x >> (shift as usize) } else { x.clone() };
    (ToPrimitive::to_f64(&top).unwrap_or(0.0), shift)
}

pub fn rational_string(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn parse_rational(s: &str) -> Option<Rational> {
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.parse().ok()?, d.parse().ok()?),
        None => (s.parse().ok()?, One::one()),
    };
    if Zero::is_zero(&d) {
        None
    } else {
        Some(Rational::new(n, d))
    }
}

/// A group element `w·tᵐ` (`w = ε` in the `ℤ` context, `m = 0` in free contexts).
#[derive(Clone, PartialEq, Eq, Hash, Debug, PartialOrd, Ord, Default)]
pub struct GroupElem {
    pub shift: i64,
    pub word: Word,
}

impl GroupElem {
    pub fn identity() -> Self {
        GroupElem::default()
    }

    pub fn word(w: Word) -> Self {
        GroupElem { shift: 0, word: w }
    }

    pub fn t(m: i64) -> Self {
        GroupElem {
            shift: m,
            word: Word::identity(),
        }
    }

    pub fn new(word: Word, shift: i64) -> Self {
        GroupElem { shift, word }
    }

    pub fn is_identity(&self) -> bool {
        self.shift == 0 && self.word.is_identity()
    }

    /// Canonical ordering key: word order first, then `t`-exponent.
    pub fn sort_key(&self) -> (&Word, i64) {
        (&self.word, self.shift)
    }

    pub fn display<'a>(&'a self, names: Option<&'a NameTable>) -> impl fmt::Display + 'a {
        ElemDisplay { e: self, names }
    }
}

struct ElemDisplay<'a> {
    e: &'a GroupElem,
    names: Option<&'a NameTable>,
}

impl fmt::Display for ElemDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w = &self.e.word;
        match (w.is_identity(), self.e.shift) {
            (true, 0) => f.write_str("e"),
            (false, 0) => write_word(f, w, self.names),
            (true, m) => write!(f, "t^{m}"),
            (false, m) => {
                write_word(f, w, self.names)?;
                write!(f, " t^{m}")
            }
        }
    }
}

fn write_word(f: &mut fmt::Formatter<'_>, w: &Word, names: Option<&NameTable>) -> fmt::Result {
    match names {
        Some(t) => write!(f, "{}", t.format(w)),
        None => write!(f, "{w}"),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GroupContext {
    /// `⟨t⟩ ≅ ℤ`.
    Integers,
    Free { rank: usize },
    /// `𝔽 ⋊_Φ ⟨t⟩` with `t⁻¹xt = Φ(x)`.
    FreeByCyclic { phi: FreeEndomorphism },
}

/// Precomputed twists `Φ^{-m}(w)` for one product.
pub struct TwistTable(FxHashMap<(i64, Word), Word>);

impl GroupContext {
    pub fn free_by_cyclic(phi: FreeEndomorphism) -> Self {
        GroupContext::FreeByCyclic { phi }
    }

    pub fn rank(&self) -> usize {
        match self {
            GroupContext::Integers => 0,
            GroupContext::Free { rank } => *rank,
            GroupContext::FreeByCyclic { phi } => phi.rank(),
        }
    }

    pub fn has_t(&self) -> bool {
        !matches!(self, GroupContext::Free { .. })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            GroupContext::Integers => "z",
            GroupContext::Free { .. } => "free",
            GroupContext::FreeByCyclic { .. } => "fbc",
        }
    }

    pub fn validate(&self, g: &GroupElem) -> Result<()> {
        let ok = match self {
            GroupContext::Integers => g.word.is_identity(),
            GroupContext::Free { rank } => g.shift == 0 && g.word.max_generator() <= *rank,
            GroupContext::FreeByCyclic { phi } => g.word.max_generator() <= phi.rank(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::MalformedWord(format!(
                "{} is not an element of this {} context",
                g.display(None),
                self.kind()
            )))
        }
    }

    /// `Φ^{-m}(w)`, the twist needed to move `tᵐ` past `w`.
    pub fn twist(&self, m: i64, w: &Word) -> Result<Word> {
        match self {
            GroupContext::FreeByCyclic { phi } if m != 0 && !w.is_identity() => {
                phi.apply_power(-m, w)
            }
            _ => Ok(w.clone()),
        }
    }

    pub fn twist_table<'a>(
        &self,
        left_shifts: impl IntoIterator<Item = i64>,
        right_words: impl IntoIterator<Item = &'a Word>,
    ) -> Result<TwistTable> {
        let mut table = FxHashMap::default();
        if let GroupContext::FreeByCyclic { phi } = self {
            let shifts: FxHashSet<i64> = left_shifts.into_iter().filter(|&m| m != 0).collect();
            let mut shifts: Vec<i64> = shifts.into_iter().collect();
            shifts.sort_unstable();
            let words: FxHashSet<&Word> = right_words.into_iter().filter(|w| !w.is_identity()).collect();
            let mut words: Vec<&Word> = words.into_iter().collect();
            words.sort();
            for w in words {
                // Walk outward from 0 so each power reuses the previous one.
                let mut pos = w.clone();
                let mut neg = w.clone();
                let max_pos = shifts.iter().copied().filter(|&m| m < 0).map(|m| -m).max().unwrap_or(0);
                let max_neg = shifts.iter().copied().filter(|&m| m > 0).max().unwrap_or(0);
                for j in 1..=max_pos {
                    pos = phi.apply(&pos);
                    if shifts.contains(&-j) {
                        table.insert((-j, w.clone()), pos.clone());
                    }
                }
                for j in 1..=max_neg {
                    neg = phi.apply_inverse(&neg)?;
                    if shifts.contains(&j) {
                        table.insert((j, w.clone()), neg.clone());
                    }
                }
            }
        }
        Ok(TwistTable(table))
    }

    pub fn mul_with(&self, table: &TwistTable, a: &GroupElem, b: &GroupElem) -> GroupElem {
        match self {
            GroupContext::Integers => GroupElem::t(a.shift + b.shift),
            GroupContext::Free { .. } => GroupElem::word(a.word.mul(&b.word)),
            GroupContext::FreeByCyclic { .. } => {
                let w2 = if a.shift == 0 || b.word.is_identity() {
                    a.word.mul(&b.word)
                } else {
                    let tw = table
                        .0
                        .get(&(a.shift, b.word.clone()))
                        .expect("twist table covers every product");
                    a.word.mul(tw)
                };
                GroupElem::new(w2, a.shift + b.shift)
            }
        }
    }

    pub fn mul(&self, a: &GroupElem, b: &GroupElem) -> Result<GroupElem> {
        let word = match self {
            GroupContext::FreeByCyclic { .. } => a.word.mul(&self.twist(a.shift, &b.word)?),
            GroupContext::Free { .. } => a.word.mul(&b.word),
            GroupContext::Integers => Word::identity(),
        };
        Ok(GroupElem::new(word, a.shift + b.shift))
    }

    pub fn inverse(&self, a: &GroupElem) -> Result<GroupElem> {
        match self {
            GroupContext::FreeByCyclic { phi } => Ok(GroupElem::new(
                phi.apply_power(a.shift, &a.word.inverse())?,
                -a.shift,
            )),
            _ => Ok(GroupElem::new(a.word.inverse(), -a.shift)),
        }
    }
}

/// A finitely supported element of the group ring.
#[derive(Clone, Debug, PartialEq)]
pub struct RingElement<S: Scalar = Rational> {
    terms: FxHashMap<GroupElem, S>,
}

impl<S: Scalar> RingElement<S> {
    pub fn zero() -> Self {
        RingElement {
            terms: FxHashMap::default(),
        }
    }

    pub fn one() -> Self {
        Self::monomial(GroupElem::identity(), S::one())
    }

    pub fn monomial(g: GroupElem, c: S) -> Self {
        let mut r = Self::zero();
        r.add_term(g, c);
        r
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (GroupElem, S)>) -> Self {
        let mut r = Self::zero();
        for (g, c) in terms {
            r.add_term(g, c);
        }
        r
    }

    pub fn add_term(&mut self, g: GroupElem, c: S) {
        if c.is_zero() {
            return;
        }
        use std::collections::hash_map::Entry;
        match self.terms.entry(g) {
            Entry::Occupied(mut o) => {
                let v = o.get().add(&c);
                if v.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = v;
                }
            }
            Entry::Vacant(v) => {
                v.insert(c);
            }
        }
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, g: &GroupElem) -> S {
        self.terms.get(g).cloned().unwrap_or_else(S::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&GroupElem, &S)> {
        self.terms.iter()
    }

    /// Terms in canonical order.
    pub fn sorted_terms(&self) -> Vec<(&GroupElem, &S)> {
        let mut v: Vec<_> = self.terms.iter().collect();
        v.sort_by(|a, b| a.0.sort_key().cmp(&b.0.sort_key()));
        v
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut r = self.clone();
        for (g, c) in &o.terms {
            r.add_term(g.clone(), c.clone());
        }
        r
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> Self {
        self.scale(&S::one().neg())
    }

    pub fn scale(&self, s: &S) -> Self {
        if s.is_zero() {
            return Self::zero();
        }
        RingElement {
            terms: self.terms.iter().map(|(g, c)| (g.clone(), c.mul(s))).collect(),
        }
    }

    pub fn mul(&self, ctx: &GroupContext, o: &Self) -> Result<Self> {
        let table = ctx.twist_table(
            self.terms.keys().map(|g| g.shift),
            o.terms.keys().map(|g| &g.word),
        )?;
        let mut acc = Accumulator::default();
        acc.add_product(ctx, &table, self, o);
        Ok(acc.finish())
    }

    /// The involution `Σ c_g g ↦ Σ c_g g⁻¹`.
    pub fn adjoint(&self, ctx: &GroupContext) -> Result<Self> {
        let mut r = Self::zero();
        for (g, c) in &self.terms {
            r.add_term(ctx.inverse(g)?, c.clone());
        }
        Ok(r)
    }

    /// Coefficient of the identity.
    pub fn trace(&self) -> S {
        self.coeff(&GroupElem::identity())
    }

    pub fn l1_mass(&self) -> S {
        self.terms
            .values()
            .fold(S::zero(), |acc, c| acc.add(&c.abs()))
    }

    /// `Σ_g a_g b_g`, i.e. `tr(a·b*)`.
    pub fn inner(&self, o: &Self) -> S {
        let (small, large) = if self.len() <= o.len() {
            (self, o)
        } else {
            (o, self)
        };
        let mut keys: Vec<&GroupElem> = small.terms.keys().collect();
        keys.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        let mut acc = S::zero();
        for g in keys {
            if let Some(d) = large.terms.get(g) {
                acc.add_assign_mul(&small.terms[g], d);
            }
        }
        acc
    }

    pub fn map_scalars<T: Scalar>(&self, f: impl Fn(&S) -> T) -> RingElement<T> {
        RingElement::from_terms(self.terms.iter().map(|(g, c)| (g.clone(), f(c))))
    }

    /// Left multiplication of every group element by `g`.
    pub fn left_translate(&self, ctx: &GroupContext, g: &GroupElem) -> Result<Self> {
        let mut r = Self::zero();
        for (h, c) in &self.terms {
            r.add_term(ctx.mul(g, h)?, c.clone());
        }
        Ok(r)
    }

    pub fn display<'a>(&'a self, names: Option<&'a NameTable>) -> String {
        if self.is_zero() {
            return "0".into();
        }
        self.sorted_terms()
            .into_iter()
            .map(|(g, c)| format!("{:?}·{}", c, g.display(names)))
            .collect::<Vec<_>>()
            .join(" + ")
    }
}

impl RingElement<Rational> {
    pub fn to_f64(&self) -> RingElement<f64> {
        self.map_scalars(rational_to_f64)
    }

    /// Readable form such as `1 + x1 - 2 x2^-1 t^1`.
    pub fn pretty(&self, names: Option<&NameTable>) -> String {
        if self.is_zero() {
            return "0".into();
        }
        let mut out = String::new();
        for (i, (g, c)) in self.sorted_terms().into_iter().enumerate() {
            let neg = c.is_negative();
            let a = Signed::abs(c);
            if i == 0 {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            let body = g.display(names).to_string();
            if g.is_identity() {
                out.push_str(&rational_string(&a));
            } else if a.is_one() {
                out.push_str(&body);
            } else {
                out.push_str(&format!("{} {}", rational_string(&a), body));
            }
        }
        out
    }
}

struct Accumulator<S: Scalar> {
    terms: FxHashMap<GroupElem, S>,
}

impl<S: Scalar> Default for Accumulator<S> {
    fn default() -> Self {
        Accumulator {
            terms: FxHashMap::default(),
        }
    }
}

impl<S: Scalar> Accumulator<S> {
    fn add_product(&mut self, ctx: &GroupContext, table: &TwistTable, a: &RingElement<S>, b: &RingElement<S>) {
        for (ga, ca) in &a.terms {
            for (gb, cb) in &b.terms {
                let g = ctx.mul_with(table, ga, gb);
                self.terms
                    .entry(g)
                    .or_insert_with(S::zero)
                    .add_assign_mul(ca, cb);
            }
        }
    }

    fn finish(mut self) -> RingElement<S> {
        // In place: the support here can run to millions of terms.
        self.terms.retain(|_, c| !c.is_zero());
        RingElement { terms: self.terms }
    }
}

/// A matrix over the group ring of a shared context.
#[derive(Clone, Debug)]
pub struct RingMatrix<S: Scalar = Rational> {
    ctx: Arc<GroupContext>,
    rows: usize,
    cols: usize,
    entries: Vec<RingElement<S>>,
}

impl<S: Scalar> PartialEq for RingMatrix<S> {
    fn eq(&self, o: &Self) -> bool {
        self.rows == o.rows && self.cols == o.cols && self.entries == o.entries
    }
}

impl<S: Scalar> RingMatrix<S> {
    pub fn zero(ctx: Arc<GroupContext>, rows: usize, cols: usize) -> Self {
        RingMatrix {
            ctx,
            rows,
            cols,
            entries: vec![RingElement::zero(); rows * cols],
        }
    }

    pub fn identity(ctx: Arc<GroupContext>, n: usize) -> Self {
        let mut m = Self::zero(ctx, n, n);
        for i in 0..n {
            m.set(i, i, RingElement::one());
        }
        m
    }

    pub fn from_rows(ctx: Arc<GroupContext>, rows: Vec<Vec<RingElement<S>>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        if rows.iter().any(|x| x.len() != c) {
            return Err(Error::Shape("ragged rows".into()));
        }
        for e in rows.iter().flatten() {
            for (g, _) in e.iter() {
                ctx.validate(g)?;
            }
        }
        Ok(RingMatrix {
            ctx,
            rows: r,
            cols: c,
            entries: rows.into_iter().flatten().collect(),
        })
    }

    pub fn context(&self) -> &Arc<GroupContext> {
        &self.ctx
    }

    /// Same entries read in another context (no validation of the twist law).
    pub fn with_context(&self, ctx: Arc<GroupContext>) -> Result<Self> {
        for e in &self.entries {
            for (g, _) in e.iter() {
                ctx.validate(g)?;
            }
        }
        Ok(RingMatrix {
            ctx,
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.clone(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &RingElement<S> {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, e: RingElement<S>) {
        self.entries[i * self.cols + j] = e;
    }

    pub fn entries(&self) -> &[RingElement<S>] {
        &self.entries
    }

    /// Total number of stored terms.
    pub fn support(&self) -> usize {
        self.entries.iter().map(|e| e.len()).sum()
    }

    fn same_ctx(&self, o: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.ctx, &o.ctx) || *self.ctx == *o.ctx {
            Ok(())
        } else {
            Err(Error::ContextMismatch)
        }
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        self.same_ctx(o)?;
        if (self.rows, self.cols) != (o.rows, o.cols) {
            return Err(Error::Shape("sum of differently shaped matrices".into()));
        }
        Ok(RingMatrix {
            ctx: self.ctx.clone(),
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .zip(&o.entries)
                .map(|(a, b)| a.add(b))
                .collect(),
        })
    }

    pub fn sub(&self, o: &Self) -> Result<Self> {
        self.add(&o.scale(&S::one().neg()))
    }

    pub fn scale(&self, s: &S) -> Self {
        RingMatrix {
            ctx: self.ctx.clone(),
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|e| e.scale(s)).collect(),
        }
    }

    /// Matrix product; output entries are computed in parallel.
    pub fn mul(&self, o: &Self) -> Result<Self> {
        self.same_ctx(o)?;
        if self.cols != o.rows {
            return Err(Error::Shape(format!(
                "{}×{} times {}×{}",
                self.rows, self.cols, o.rows, o.cols
            )));
        }
        let table = self.ctx.twist_table(
            self.entries.iter().flat_map(|e| e.iter().map(|(g, _)| g.shift)),
            o.entries.iter().flat_map(|e| e.iter().map(|(g, _)| &g.word)),
        )?;
        let ctx = &*self.ctx;
        let (n, m, p) = (self.rows, self.cols, o.cols);
        let entry = |idx: usize| {
            let (i, j) = (idx / p, idx % p);
            let mut acc = Accumulator::default();
            for k in 0..m {
                acc.add_product(ctx, &table, self.get(i, k), o.get(k, j));
            }
            acc.finish()
        };
        let entries = crate::par::map_indices(n * p, entry);
        Ok(RingMatrix {
            ctx: self.ctx.clone(),
            rows: n,
            cols: p,
            entries,
        })
    }

    pub fn pow(&self, k: u32) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::Shape("power of a non-square matrix".into()));
        }
        let mut out = Self::identity(self.ctx.clone(), self.rows);
        for _ in 0..k {
            out = out.mul(self)?;
        }
        Ok(out)
    }

    /// Transpose with the involution applied entrywise.
    pub fn adjoint(&self) -> Result<Self> {
        let mut out = Self::zero(self.ctx.clone(), self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j).adjoint(&self.ctx)?);
            }
        }
        Ok(out)
    }

    /// Sum of the identity coefficients on the diagonal.
    pub fn trace(&self) -> Result<S> {
        if !self.is_square() {
            return Err(Error::Shape("trace of a non-square matrix".into()));
        }
        Ok((0..self.rows).fold(S::zero(), |acc, i| acc.add(&self.get(i, i).trace())))
    }

    /// `tr(A·B*) = Σ_{i,j} Σ_g A_ij(g)·B_ij(g)`.
    pub fn trace_against(&self, o: &Self) -> Result<S> {
        if (self.rows, self.cols) != (o.rows, o.cols) {
            return Err(Error::Shape("trace pairing of differently shaped matrices".into()));
        }
        Ok(self
            .entries
            .iter()
            .zip(&o.entries)
            .fold(S::zero(), |acc, (a, b)| acc.add(&a.inner(b))))
    }

    /// Maximal row and column `ℓ¹` masses.
    pub fn l1_masses(&self) -> (S, S)
    where
        S: PartialOrd,
    {
        let max = |v: Vec<S>| {
            v.into_iter()
                .fold(S::zero(), |m, x| if x > m { x } else { m })
        };
        let rows = (0..self.rows)
            .map(|i| (0..self.cols).fold(S::zero(), |a, j| a.add(&self.get(i, j).l1_mass())))
            .collect();
        let cols = (0..self.cols)
            .map(|j| (0..self.rows).fold(S::zero(), |a, i| a.add(&self.get(i, j).l1_mass())))
            .collect();
        (max(rows), max(cols))
    }

    pub fn map_scalars<T: Scalar>(&self, f: impl Fn(&S) -> T + Copy) -> RingMatrix<T> {
        RingMatrix {
            ctx: self.ctx.clone(),
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|e| e.map_scalars(f)).collect(),
        }
    }
}

impl RingMatrix<Rational> {
    /// Squared pivot `K² = R·C` with `R`, `C` the maximal row and column
    /// `ℓ¹` masses; `K` bounds the operator norm by the Schur test.
    pub fn norm_bound_sq(&self) -> Rational {
        let (r, c) = self.l1_masses();
        r * c
    }

    pub fn norm_upper_bound(&self) -> f64 {
        rational_to_f64(&self.norm_bound_sq()).sqrt()
    }

    pub fn to_f64(&self) -> RingMatrix<f64> {
        self.map_scalars(rational_to_f64)
    }

    /// `(N, E)` with `self = N/E`, `N` integral and `E > 0` the lcm of all
    /// coefficient denominators.
    pub fn clear_denominators(&self) -> (RingMatrix<BigInt>, BigInt) {
        let mut e = <BigInt as One>::one();
        for x in &self.entries {
            for (_, c) in x.iter() {
                e = e.lcm(c.denom());
            }
        }
        let scale = Rational::from_integer(e.clone());
        (self.map_scalars(|c| (c * &scale).to_integer()), e)
    }

    pub fn pretty_rows(&self, names: Option<&NameTable>) -> Vec<Vec<String>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j).pretty(names)).collect())
            .collect()
    }
}

/// Exact moments `tr(Mᵏ)`, `k = 0..=kmax`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentSequence {
    #[serde(serialize_with = "ser_rationals")]
    pub moments: Vec<Rational>,
}

fn ser_rationals<S: serde::Serializer>(v: &[Rational], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for r in v {
        seq.serialize_element(&rational_string(r))?;
    }
    seq.end()
}

pub fn moments(m: &RingMatrix<Rational>, kmax: usize) -> Result<MomentSequence> {
    if !m.is_square() {
        return Err(Error::Shape("moments of a non-square matrix".into()));
    }
    let mut p = RingMatrix::identity(m.context().clone(), m.rows());
    let mut out = vec![p.trace()?];
    for _ in 0..kmax {
        p = p.mul(m)?;
        out.push(p.trace()?);
    }
    Ok(MomentSequence { moments: out })
}

/// Parses a ring element written as `+`/`-` separated monomials, e.g.
/// `1 - 2 x1 x2^-1 t^3 + 1/2 t^-1`.
pub fn parse_element(text: &str, names: &NameTable) -> Result<RingElement<Rational>> {
    let mut r = RingElement::zero();
    let mut sign = 1i64;
    let mut coeff: Option<Rational> = None;
    let mut letters: Vec<&str> = Vec::new();
    let mut shift = 0i64;
    let mut seen = false;
    let flush = |r: &mut RingElement<Rational>,
                 sign: i64,
                 coeff: &mut Option<Rational>,
                 letters: &mut Vec<&str>,
                 shift: &mut i64|
     -> Result<()> {
        let c = coeff.take().unwrap_or_else(One::one) * Rational::from_integer(sign.into());
        let w = names.parse_tokens(letters.drain(..))?;
        r.add_term(GroupElem::new(w, *shift), c);
        *shift = 0;
        Ok(())
    };
    for tok in text.split_whitespace() {
        match tok {
            "+" | "-" => {
                if seen {
                    flush(&mut r, sign, &mut coeff, &mut letters, &mut shift)?;
                }
                sign = if tok == "-" { -1 } else { 1 };
                seen = false;
            }
            _ => {
                seen = true;
                if let Some(m) = tok.strip_prefix("t^") {
                    shift += m
                        .parse::<i64>()
                        .map_err(|_| Error::MalformedWord(format!("bad t-exponent `{tok}`")))?;
                } else if tok == "t" {
                    shift += 1;
                } else if coeff.is_none() && letters.is_empty() && shift == 0 {
                    match parse_rational(tok) {
                        Some(c) => coeff = Some(c),
                        None => letters.push(tok),
                    }
                } else {
                    letters.push(tok);
                }
            }
        }
    }
    if seen {
        flush(&mut r, sign, &mut coeff, &mut letters, &mut shift)?;
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names() -> NameTable {
        NameTable::standard(3)
    }

    fn w(s: &str) -> Word {
        names().parse_word(s).unwrap()
    }

    fn phi() -> FreeEndomorphism {
        FreeEndomorphism::new(3, vec![w("x2"), w("x3"), w("x1 x2")])
            .unwrap()
            .with_inverse(vec![w("x3 x1^-1"), w("x1"), w("x2")])
            .unwrap()
    }

    fn el(s: &str) -> RingElement {
        parse_element(s, &names()).unwrap()
    }

    #[test]
    fn defining_relation() {
        let ctx = GroupContext::free_by_cyclic(phi());
        for i in 1..=3 {
            let x = GroupElem::word(Word::generator(i));
            let g = ctx
                .mul(&ctx.mul(&GroupElem::t(-1), &x).unwrap(), &GroupElem::t(1))
                .unwrap();
            assert_eq!(g, GroupElem::word(phi().images()[i - 1].clone()));
        }
    }

    #[test]
    fn twisted_square() {
        let ctx = GroupContext::free_by_cyclic(phi());
        let a = el("x1 t^1");
        assert_eq!(a.mul(&ctx, &a).unwrap(), el("x1 x3 x1^-1 t^2"));
    }

    #[test]
    fn adjoint_normal_form() {
        let ctx = Arc::new(GroupContext::free_by_cyclic(phi()));
        let tx = el("t").mul(&ctx, &el("x1")).unwrap();
        assert_eq!(tx, el("x3 x1^-1 t^1"));
        assert_eq!(tx.adjoint(&ctx).unwrap(), el("x1^-1 t^-1"));
        let m = RingMatrix::from_rows(ctx.clone(), vec![vec![tx.clone(), el("2 x2")], vec![el("0"), el("1 - t")]])
            .unwrap();
        assert_eq!(m.adjoint().unwrap().adjoint().unwrap(), m);
        let id = RingMatrix::<Rational>::identity(ctx, 2);
        assert_eq!(id.adjoint().unwrap(), id);
    }

    #[test]
    fn trace_examples() {
        let ctx = Arc::new(GroupContext::Free { rank: 3 });
        let m = RingMatrix::from_rows(ctx, vec![vec![el("1 + 2 x1"), el("0")], vec![el("0"), el("3")]]).unwrap();
        assert_eq!(m.trace().unwrap(), Rational::from_integer(4.into()));
        let z = Arc::new(GroupContext::Integers);
        let m = RingMatrix::from_rows(z, vec![vec![el("t + t^-1")]]).unwrap();
        let mo = moments(&m, 2).unwrap();
        assert_eq!(mo.moments[2], Rational::from_integer(2.into()));
        assert_eq!(mo.moments[1], <Rational as Zero>::zero());
    }

    #[test]
    fn norm_bounds() {
        let ctx = Arc::new(GroupContext::Free { rank: 1 });
        let m = RingMatrix::from_rows(ctx.clone(), vec![vec![el("2")]]).unwrap();
        assert_eq!(m.norm_upper_bound(), 2.0);
        assert_eq!(RingMatrix::<Rational>::zero(ctx, 2, 2).norm_upper_bound(), 0.0);
    }

    #[test]
    fn parse_and_pretty() {
        let e = el("1 - 2 x1 x2^-1 t^3 + 1/2 t^-1");
        assert_eq!(e.len(), 3);
        assert_eq!(parse_element(&e.pretty(Some(&names())), &names()).unwrap(), e);
        assert!(el("x1 - x1").is_zero());
    }

    #[test]
    fn huge_rational_to_float() {
        let big = num_bigint::BigInt::from(3u8).pow(2000);
        let r = Rational::new(big.clone() * 2, big);
        assert_eq!(rational_to_f64(&r), 2.0);
    }
}
