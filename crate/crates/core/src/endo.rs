use crate::error::{Error, Result};
use crate::word::{Letter, Word};

/// An endomorphism of the free group of rank `rank`, given by generator
/// images. Inverse images are optional and are never computed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FreeEndomorphism {
    rank: usize,
    images: Vec<Word>,
    inverse_images: Option<Vec<Word>>,
}

impl FreeEndomorphism {
    pub fn new(rank: usize, images: Vec<Word>) -> Result<Self> {
        check_images(rank, &images)?;
        Ok(FreeEndomorphism {
            rank,
            images,
            inverse_images: None,
        })
    }

    pub fn identity(rank: usize) -> Self {
        FreeEndomorphism {
            rank,
            images: (1..=rank).map(Word::generator).collect(),
            inverse_images: Some((1..=rank).map(Word::generator).collect()),
        }
    }

    /// Attaches inverse images after checking both composites fix every generator.
    pub fn with_inverse(mut self, inverse_images: Vec<Word>) -> Result<Self> {
        check_images(self.rank, &inverse_images)?;
        for i in 1..=self.rank {
            let x = Word::generator(i);
            if substitute(&self.images, &inverse_images[i - 1]) != x {
                return Err(Error::BadInverseImages(format!("Φ(Φ⁻¹(x{i})) ≠ x{i}")));
            }
            if substitute(&inverse_images, &self.images[i - 1]) != x {
                return Err(Error::BadInverseImages(format!("Φ⁻¹(Φ(x{i})) ≠ x{i}")));
            }
        }
        self.inverse_images = Some(inverse_images);
        Ok(self)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn images(&self) -> &[Word] {
        &self.images
    }

    pub fn inverse_images(&self) -> Option<&[Word]> {
        self.inverse_images.as_deref()
    }

    pub fn has_inverse(&self) -> bool {
        self.inverse_images.is_some()
    }

    pub fn apply(&self, w: &Word) -> Word {
        substitute(&self.images, w)
    }

    pub fn apply_checked(&self, w: &Word) -> Result<Word> {
        if w.max_generator() > self.rank {
            return Err(Error::RankMismatch {
                expected: self.rank,
                found: w.max_generator(),
            });
        }
        Ok(self.apply(w))
    }

    pub fn apply_inverse(&self, w: &Word) -> Result<Word> {
        let inv = self
            .inverse_images
            .as_ref()
            .ok_or(Error::MissingInverseImages)?;
        Ok(substitute(inv, w))
    }

    /// Applies Φ^k for any integer k (negative powers need inverse images).
    pub fn apply_power(&self, k: i64, w: &Word) -> Result<Word> {
        let mut out = w.clone();
        if k >= 0 {
            for _ in 0..k {
                out = self.apply(&out);
            }
        } else {
            for _ in 0..k.unsigned_abs() {
                out = self.apply_inverse(&out)?;
            }
        }
        Ok(out)
    }

    pub fn inverse(&self) -> Result<Self> {
        let inv = self
            .inverse_images
            .clone()
            .ok_or(Error::MissingInverseImages)?;
        Ok(FreeEndomorphism {
            rank: self.rank,
            images: inv,
            inverse_images: Some(self.images.clone()),
        })
    }

    /// `self ∘ other`, i.e. `x ↦ self(other(x))`.
    pub fn compose(&self, other: &FreeEndomorphism) -> Result<Self> {
        if self.rank != other.rank {
            return Err(Error::RankMismatch {
                expected: self.rank,
                found: other.rank,
            });
        }
        let images = other.images.iter().map(|w| self.apply(w)).collect();
        let inverse_images = match (&self.inverse_images, &other.inverse_images) {
            (Some(a), Some(b)) => Some(a.iter().map(|w| substitute(b, w)).collect()),
            _ => None,
        };
        Ok(FreeEndomorphism {
            rank: self.rank,
            images,
            inverse_images,
        })
    }

    pub fn power(&self, k: u32) -> Self {
        let mut out = FreeEndomorphism::identity(self.rank);
        if !self.has_inverse() {
            out.inverse_images = None;
        }
        for _ in 0..k {
            out = self.compose(&out).expect("same rank");
        }
        out
    }

    pub fn is_identity(&self) -> bool {
        self.images
            .iter()
            .enumerate()
            .all(|(i, w)| *w == Word::generator(i + 1))
    }
}

fn check_images(rank: usize, images: &[Word]) -> Result<()> {
    if images.len() != rank {
        return Err(Error::RankMismatch {
            expected: rank,
            found: images.len(),
        });
    }
    if let Some(w) = images.iter().find(|w| w.max_generator() > rank) {
        return Err(Error::RankMismatch {
            expected: rank,
            found: w.max_generator(),
        });
    }
    Ok(())
}

fn substitute(images: &[Word], w: &Word) -> Word {
    let mut letters: Vec<Letter> = Vec::new();
    for l in w.letters() {
        let img = &images[l.generator() - 1];
        if l.is_inverse() {
            letters.extend(img.letters().iter().rev().map(|m| m.inverse()));
        } else {
            letters.extend_from_slice(img.letters());
        }
    }
    Word::from_letters(letters)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::word::NameTable;

    fn w(s: &str) -> Word {
        NameTable::standard(3).parse_word(s).unwrap()
    }

    fn phi() -> FreeEndomorphism {
        FreeEndomorphism::new(3, vec![w("x2"), w("x3"), w("x1 x2")])
            .unwrap()
            .with_inverse(vec![w("x3 x1^-1"), w("x1"), w("x2")])
            .unwrap()
    }

    #[test]
    fn apply_examples() {
        let p = phi();
        assert_eq!(p.apply(&w("x3 x1")), w("x1 x2 x2"));
        assert_eq!(p.apply(&Word::identity()), Word::identity());
        for i in 1..=3 {
            let x = Word::generator(i);
            assert_eq!(p.apply_inverse(&p.apply(&x)).unwrap(), x);
        }
    }

    #[test]
    fn bad_inverse_rejected() {
        let r = FreeEndomorphism::new(3, vec![w("x2"), w("x3"), w("x1 x2")])
            .unwrap()
            .with_inverse(vec![w("x3"), w("x1"), w("x2")]);
        assert!(matches!(r, Err(Error::BadInverseImages(_))));
    }

    #[test]
    fn missing_inverse() {
        let p = FreeEndomorphism::new(1, vec![w("x1")]).unwrap();
        assert_eq!(p.apply_inverse(&w("x1")), Err(Error::MissingInverseImages));
    }

    #[test]
    fn powers_compose() {
        let p = phi();
        let p3 = p.power(3);
        let x = w("x1 x3^-1 x2");
        assert_eq!(p3.apply(&x), p.apply(&p.apply(&p.apply(&x))));
        assert_eq!(p3.apply_inverse(&p3.apply(&x)).unwrap(), x);
        assert_eq!(p.apply_power(-2, &p.apply_power(2, &x).unwrap()).unwrap(), x);
    }
}
