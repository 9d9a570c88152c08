//! Registry of training missingness patterns and test-time resolution.
//!
//! A test mask that never occurred in training is mapped to the training
//! pattern whose missing set is the smallest superset of the test's missing
//! set: observed variables are dropped until a trained submodel applies.

use serde::{Deserialize, Serialize};

use crate::data::PatternMask;
use crate::error::{Result, SpsmError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FallbackPolicy {
    Error,
    /// Predict with the main model on zero-imputed inputs.
    #[default]
    MainModelZeroImpute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternEntry {
    pub mask: PatternMask,
    pub id: usize,
    pub count: usize,
    /// False when `count < min_pattern_n`; such patterns get no Δ or α.
    pub specialized: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternRegistry {
    entries: Vec<PatternEntry>,
    pub min_pattern_n: usize,
    pub fallback: FallbackPolicy,
}

/// Outcome of resolving a test mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resolution {
    /// A training pattern; `exact` is false when observed variables had to be
    /// dropped to reach it.
    Pattern { id: usize, exact: bool },
    /// No covering pattern: use the main model with zero imputation.
    MainModel,
}

impl Resolution {
    pub fn pattern_id(&self) -> Option<usize> {
        match *self {
            Resolution::Pattern { id, .. } => Some(id),
            Resolution::MainModel => None,
        }
    }

    pub fn is_fallback(&self) -> bool {
        !matches!(self, Resolution::Pattern { exact: true, .. })
    }
}

impl PatternRegistry {
    pub fn build(
        patterns: &[(PatternMask, usize)],
        min_pattern_n: usize,
        fallback: FallbackPolicy,
    ) -> Result<Self> {
        let mut sorted: Vec<&(PatternMask, usize)> = patterns.iter().collect();
        sorted.sort_by(|a, b| a.0.cmp(&b.0));
        if let Some(w) = sorted.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(SpsmError::Internal(format!("duplicate pattern {}", w[0].0)));
        }
        if let Some((m, _)) = sorted.iter().find(|(_, n)| *n == 0) {
            return Err(SpsmError::Internal(format!("pattern {m} has zero samples")));
        }
        if let Some(first) = sorted.first() {
            if sorted.iter().any(|(m, _)| m.len() != first.0.len()) {
                return Err(SpsmError::Internal("patterns differ in length".into()));
            }
        }
        let entries = sorted
            .into_iter()
            .enumerate()
            .map(|(id, (mask, count))| PatternEntry {
                mask: mask.clone(),
                id,
                count: *count,
                specialized: *count >= min_pattern_n,
            })
            .collect();
        Ok(PatternRegistry {
            entries,
            min_pattern_n,
            fallback,
        })
    }

    pub fn entries(&self) -> &[PatternEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, id: usize) -> &PatternEntry {
        &self.entries[id]
    }

    pub fn mask_len(&self) -> Option<usize> {
        self.entries.first().map(|e| e.mask.len())
    }

    pub fn id_of(&self, mask: &PatternMask) -> Option<usize> {
        self.entries
            .binary_search_by(|e| e.mask.cmp(mask))
            .ok()
    }

    pub fn with_fallback(mut self, fallback: FallbackPolicy) -> Self {
        self.fallback = fallback;
        self
    }

    /// Resolve a test mask to a trained pattern.
    ///
    /// Among training masks covering the test's missing set, picks the one
    /// with the fewest additional missing variables; ties go to the
    /// lexicographically smallest mask, which is the first in id order.
    pub fn resolve(&self, mask: &PatternMask) -> Result<Resolution> {
        if let Some(len) = self.mask_len() {
            if len != mask.len() {
                return Err(SpsmError::Validation(format!(
                    "mask {mask} has {} bits, registry expects {len}",
                    mask.len()
                )));
            }
        }
        if let Some(id) = self.id_of(mask) {
            return Ok(Resolution::Pattern { id, exact: true });
        }
        let best = self
            .entries
            .iter()
            .filter(|e| e.mask.covers(mask))
            .min_by_key(|e| (e.mask.hamming(mask), e.id));
        match (best, self.fallback) {
            (Some(e), _) => Ok(Resolution::Pattern {
                id: e.id,
                exact: false,
            }),
            (None, FallbackPolicy::MainModelZeroImpute) => Ok(Resolution::MainModel),
            (None, FallbackPolicy::Error) => Err(SpsmError::Resolution {
                mask: mask.to_string(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(s: &str) -> PatternMask {
        s.parse().unwrap()
    }

    fn registry(masks: &[&str], fallback: FallbackPolicy) -> PatternRegistry {
        let pats: Vec<_> = masks.iter().map(|s| (m(s), 3)).collect();
        PatternRegistry::build(&pats, 0, fallback).unwrap()
    }

    #[test]
    fn threshold_flags_small_patterns() {
        let pats = [(m("00"), 5), (m("01"), 1)];
        let r0 = PatternRegistry::build(&pats, 0, FallbackPolicy::default()).unwrap();
        assert!(r0.entries().iter().all(|e| e.specialized));
        let r2 = PatternRegistry::build(&pats, 2, FallbackPolicy::default()).unwrap();
        assert!(r2.entry(0).specialized);
        assert!(!r2.entry(1).specialized);
    }

    #[test]
    fn ids_follow_lexicographic_order() {
        let pats = [(m("11"), 1), (m("00"), 2), (m("01"), 4)];
        let r = PatternRegistry::build(&pats, 0, FallbackPolicy::Error).unwrap();
        let order: Vec<String> = r.entries().iter().map(|e| e.mask.to_string()).collect();
        assert_eq!(order, ["00", "01", "11"]);
        assert_eq!(r.entries().iter().map(|e| e.id).collect::<Vec<_>>(), [0, 1, 2]);
    }

    #[test]
    fn duplicate_masks_rejected() {
        let pats = [(m("01"), 1), (m("01"), 2)];
        assert!(matches!(
            PatternRegistry::build(&pats, 0, FallbackPolicy::Error),
            Err(SpsmError::Internal(_))
        ));
    }

    #[test]
    fn exact_match() {
        let r = registry(&["00", "01", "11"], FallbackPolicy::Error);
        assert_eq!(
            r.resolve(&m("01")).unwrap(),
            Resolution::Pattern { id: 1, exact: true }
        );
    }

    #[test]
    fn superset_with_minimal_extra_missingness() {
        let r = registry(&["00", "01", "11"], FallbackPolicy::Error);
        assert_eq!(
            r.resolve(&m("10")).unwrap(),
            Resolution::Pattern { id: 2, exact: false }
        );
    }

    #[test]
    fn ties_go_to_smallest_mask() {
        let r = registry(&["011", "101", "111"], FallbackPolicy::Error);
        // 001 is covered by 011 and 101 at distance 1
        assert_eq!(
            r.resolve(&m("001")).unwrap(),
            Resolution::Pattern { id: 0, exact: false }
        );
    }

    #[test]
    fn no_superset_uses_policy() {
        let r = registry(&["01"], FallbackPolicy::Error);
        assert!(matches!(
            r.resolve(&m("10")),
            Err(SpsmError::Resolution { mask }) if mask == "10"
        ));
        let r = r.with_fallback(FallbackPolicy::MainModelZeroImpute);
        assert_eq!(r.resolve(&m("10")).unwrap(), Resolution::MainModel);
    }

    proptest! {
        #[test]
        fn resolution_properties(
            train in prop::collection::btree_set(prop::collection::vec(any::<bool>(), 5), 1..12),
            test in prop::collection::vec(any::<bool>(), 5),
        ) {
            let pats: Vec<_> = train.iter().map(|b| (PatternMask::new(b.clone()), 1)).collect();
            let r = PatternRegistry::build(&pats, 0, FallbackPolicy::MainModelZeroImpute).unwrap();
            for e in r.entries() {
                prop_assert_eq!(r.resolve(&e.mask).unwrap(), Resolution::Pattern { id: e.id, exact: true });
            }
            let test = PatternMask::new(test);
            let first = r.resolve(&test).unwrap();
            prop_assert_eq!(first, r.resolve(&test).unwrap());
            match first {
                Resolution::Pattern { id, .. } => {
                    let chosen = &r.entry(id).mask;
                    prop_assert!(chosen.covers(&test));
                    for e in r.entries() {
                        if e.mask.covers(&test) {
                            prop_assert!(e.mask.hamming(&test) >= chosen.hamming(&test));
                        }
                    }
                }
                Resolution::MainModel => {
                    prop_assert!(r.entries().iter().all(|e| !e.mask.covers(&test)));
                }
            }
        }
    }
}
