use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{binom_half_cdf, chi2_survival};

/// Below this many discordant pairs the exact binomial test is used.
pub const EXACT_BELOW: u64 = 25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McNemar {
    /// Model right, baseline wrong.
    pub b: u64,
    /// Model wrong, baseline right.
    pub c: u64,
    pub exact: bool,
    pub p: f64,
}

/// McNemar test on the discordant counts: exact two-sided binomial below
/// [`EXACT_BELOW`] pairs, otherwise chi-square with continuity correction.
pub fn mcnemar_test(b: u64, c: u64) -> McNemar {
    let n = b + c;
    if n == 0 {
        return McNemar { b, c, exact: true, p: 1.0 };
    }
    if n < EXACT_BELOW {
        let p = (2.0 * binom_half_cdf(b.min(c), n)).min(1.0);
        return McNemar { b, c, exact: true, p };
    }
    let d = (b as f64 - c as f64).abs() - 1.0;
    let stat = d.max(0.0).powi(2) / n as f64;
    McNemar {
        b,
        c,
        exact: false,
        p: chi2_survival(stat, 1.0),
    }
}

/// Pairs each item's correctness with a seeded uniform three-class guesser.
/// The guesser is right on an item with probability 1/3.
pub fn mcnemar_vs_chance(model_correct: &[bool], seed: u64) -> Result<McNemar> {
    if model_correct.is_empty() {
        return Err(Error::InsufficientData("McNemar test needs at least one item".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let baseline: Vec<bool> = model_correct.iter().map(|_| rng.random_range(0..3u8) == 0).collect();
    Ok(mcnemar_paired(model_correct, &baseline))
}

pub fn mcnemar_paired(model_correct: &[bool], baseline_correct: &[bool]) -> McNemar {
    let (mut b, mut c) = (0, 0);
    for (&m, &r) in model_correct.iter().zip(baseline_correct) {
        match (m, r) {
            (true, false) => b += 1,
            (false, true) => c += 1,
            _ => {}
        }
    }
    mcnemar_test(b, c)
}
