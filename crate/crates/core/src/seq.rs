//! Nucleotide symbols and sequences.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};

/// One of the four DNA bases. The discriminant is the base's token id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum Base {
    A = 0,
    C = 1,
    G = 2,
    T = 3,
}

impl Base {
    /// All bases in tie-breaking order.
    pub const ALL: [Base; 4] = [Base::A, Base::C, Base::G, Base::T];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    #[inline]
    pub fn from_index(i: usize) -> Base {
        Base::ALL[i & 3]
    }

    pub fn from_char(c: char) -> Result<Base> {
        match c {
            'A' => Ok(Base::A),
            'C' => Ok(Base::C),
            'G' => Ok(Base::G),
            'T' => Ok(Base::T),
            other => Err(Error::InvalidBase(other)),
        }
    }

    #[inline]
    pub fn to_char(self) -> char {
        match self {
            Base::A => 'A',
            Base::C => 'C',
            Base::G => 'G',
            Base::T => 'T',
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Base {
        Base::from_index(rng.gen_range(0..4))
    }

    /// Uniform over the three bases different from `self`.
    pub fn random_other<R: Rng + ?Sized>(self, rng: &mut R) -> Base {
        let offset = rng.gen_range(1..4);
        Base::from_index(self.index() + offset)
    }
}

impl fmt::Display for Base {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_char())
    }
}

/// A string over {A, C, G, T}.
///
/// Ground-truth sequences are non-empty by construction through [`DnaSequence::random`];
/// traces may be empty.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DnaSequence(Vec<Base>);

/// A noisy read of a stored sequence.
pub type Trace = DnaSequence;

impl DnaSequence {
    pub fn new(bases: Vec<Base>) -> Self {
        DnaSequence(bases)
    }

    /// Uniformly random sequence of length `len`.
    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Result<Self> {
        if len == 0 {
            return Err(Error::EmptySequence);
        }
        Ok(DnaSequence((0..len).map(|_| Base::random(rng)).collect()))
    }

    pub fn as_slice(&self) -> &[Base] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<Base> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Base> {
        self.0.iter()
    }

    /// Pads with `A` or truncates at the end so the result has exactly `len` symbols.
    pub fn fit_to_length(mut self, len: usize) -> Self {
        self.0.resize(len, Base::A);
        self
    }
}

impl FromStr for DnaSequence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars().map(Base::from_char).collect::<Result<Vec<_>>>().map(DnaSequence)
    }
}

impl fmt::Display for DnaSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.0.iter().map(|b| b.to_char()).collect();
        f.write_str(&s)
    }
}

impl From<Vec<Base>> for DnaSequence {
    fn from(bases: Vec<Base>) -> Self {
        DnaSequence(bases)
    }
}

impl AsRef<[Base]> for DnaSequence {
    fn as_ref(&self) -> &[Base] {
        &self.0
    }
}

impl std::ops::Deref for DnaSequence {
    type Target = [Base];

    fn deref(&self) -> &[Base] {
        &self.0
    }
}

impl FromIterator<Base> for DnaSequence {
    fn from_iter<I: IntoIterator<Item = Base>>(iter: I) -> Self {
        DnaSequence(iter.into_iter().collect())
    }
}

/// Parses a sequence literal, panicking on invalid input. Test and example helper.
pub fn dna(s: &str) -> DnaSequence {
    s.parse().expect("valid DNA literal")
}
