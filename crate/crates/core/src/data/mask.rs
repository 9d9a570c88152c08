use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::SpsmError;

/// Missingness pattern over the original (pre-encoding) features.
///
/// Bit `j` is set when feature `j` is missing. Ordering is lexicographic on
/// the bits with observed < missing, which is also the order of the
/// bit-string rendering (`"0010"`).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PatternMask(Vec<bool>);

impl PatternMask {
    pub fn new(bits: Vec<bool>) -> Self {
        PatternMask(bits)
    }

    /// Mask with every feature observed.
    pub fn complete(len: usize) -> Self {
        PatternMask(vec![false; len])
    }

    pub fn from_missing(len: usize, missing: &[usize]) -> Self {
        let mut bits = vec![false; len];
        for &j in missing {
            bits[j] = true;
        }
        PatternMask(bits)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn is_missing(&self, j: usize) -> bool {
        self.0[j]
    }

    pub fn n_missing(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn missing_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&j| self.0[j]).collect()
    }

    pub fn observed_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&j| !self.0[j]).collect()
    }

    /// True when every feature missing in `other` is also missing in `self`.
    pub fn covers(&self, other: &PatternMask) -> bool {
        self.len() == other.len() && self.0.iter().zip(&other.0).all(|(&a, &b)| a || !b)
    }

    /// Number of positions where the two masks differ.
    pub fn hamming(&self, other: &PatternMask) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }
}

impl fmt::Display for PatternMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for PatternMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PatternMask({self})")
    }
}

impl FromStr for PatternMask {
    type Err = SpsmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(SpsmError::Validation(format!(
                    "invalid character {other:?} in mask {s:?}"
                ))),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(PatternMask)
    }
}

impl Serialize for PatternMask {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PatternMask {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
