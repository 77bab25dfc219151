//! Deterministic dataset splitting.
//!
//! The test pool is partitioned once into a holdout subset (80%) that
//! will carry weak supervision and an untouched test subset (20%); the
//! holdout is then partitioned again 80/20 into strong-model training
//! and validation subsets. Subset sizes use round-half-up on `0.8 * n`,
//! shuffles come from the pinned counter-based generator, and the
//! stored index lists are sorted ascending, so plans are identical
//! across platforms for a given seed.

use serde::{Deserialize, Serialize};

use crate::io::DataError;
use crate::rng::{Stream, SubRng};

/// The two-stage partition of a test pool of `n` indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    /// Stage 1: 80% of the test pool; carries weak supervision.
    pub hold: Vec<usize>,
    /// Stage 1: the untouched 20% of the test pool.
    pub test_prime: Vec<usize>,
    /// Stage 2: 80% of `hold`, used to fit the strong head.
    pub strong_train: Vec<usize>,
    /// Stage 2: 20% of `hold`, used for best-model selection.
    pub strong_val: Vec<usize>,
}

/// `round(0.8 * n)` with round-half-up.
pub fn eighty_percent(n: usize) -> usize {
    (8 * n + 5) / 10
}

/// Stage 1: shuffle `0..n_test` and split into holdout / untouched
/// subsets. Requires at least 5 samples so both parts are non-empty.
pub fn split_test_set(n_test: usize, seed: u64) -> Result<SplitPlan, DataError> {
    if n_test < 5 {
        return Err(DataError::SplitTooSmall { n: n_test });
    }
    let mut indices: Vec<usize> = (0..n_test).collect();
    let mut rng = SubRng::new(seed, Stream::SplitTest, 0);
    rng.shuffle(&mut indices);
    let cut = eighty_percent(n_test);
    let mut hold = indices[..cut].to_vec();
    let mut test_prime = indices[cut..].to_vec();
    hold.sort_unstable();
    test_prime.sort_unstable();
    Ok(SplitPlan {
        seed,
        hold,
        test_prime,
        strong_train: Vec::new(),
        strong_val: Vec::new(),
    })
}

/// Stage 2: split the holdout 80/20 into strong-model train and
/// validation subsets. Errors if stage 1 has not run.
pub fn split_holdout(mut plan: SplitPlan, seed: u64) -> Result<SplitPlan, DataError> {
    if plan.hold.is_empty() {
        return Err(DataError::PlanIncomplete {
            reason: "holdout is empty; run the test-pool split first".into(),
        });
    }
    let mut shuffled = plan.hold.clone();
    let mut rng = SubRng::new(seed, Stream::SplitHold, 0);
    rng.shuffle(&mut shuffled);
    let cut = eighty_percent(shuffled.len());
    let mut strong_train = shuffled[..cut].to_vec();
    let mut strong_val = shuffled[cut..].to_vec();
    strong_train.sort_unstable();
    strong_val.sort_unstable();
    plan.strong_train = strong_train;
    plan.strong_val = strong_val;
    Ok(plan)
}

impl SplitPlan {
    /// Audit-format JSON document.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, DataError> {
        serde_json::from_str(s).map_err(|e| DataError::BadPlan {
            reason: e.to_string(),
        })
    }
}
