use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::anova::one_way_anova;

/// Upper 5% points of the studentized range `q(k, df)` for `k = 2..=10`
/// groups, one row per within-group df.
const Q_CRIT_05: [(f64, [f64; 9]); 26] = [
    (1.0, [17.9693, 26.9755, 32.8187, 37.0815, 40.4076, 43.1186, 45.3973, 47.3566, 49.0710]),
    (2.0, [6.0849, 8.3308, 9.7980, 10.8811, 11.7343, 12.4349, 13.0273, 13.5390, 13.9885]),
    (3.0, [4.5007, 5.9096, 6.8245, 7.5017, 8.0371, 8.4783, 8.8525, 9.1766, 9.4620]),
    (4.0, [3.9265, 5.0402, 5.7571, 6.2870, 6.7064, 7.0526, 7.3465, 7.6015, 7.8263]),
    (5.0, [3.6354, 4.6017, 5.2183, 5.6731, 6.0329, 6.3299, 6.5823, 6.8014, 6.9947]),
    (6.0, [3.4605, 4.3392, 4.8956, 5.3049, 5.6284, 5.8953, 6.1222, 6.3192, 6.4931]),
    (7.0, [3.3441, 4.1649, 4.6813, 5.0601, 5.3591, 5.6057, 5.8153, 5.9973, 6.1579]),
    (8.0, [3.2612, 4.0410, 4.5288, 4.8858, 5.1672, 5.3991, 5.5962, 5.7673, 5.9183]),
    (9.0, [3.1992, 3.9485, 4.4149, 4.7554, 5.0235, 5.2444, 5.4319, 5.5947, 5.7384]),
    (10.0, [3.1511, 3.8768, 4.3266, 4.6543, 4.9120, 5.1242, 5.3042, 5.4605, 5.5984]),
    (11.0, [3.1127, 3.8196, 4.2561, 4.5736, 4.8230, 5.0281, 5.2021, 5.3531, 5.4863]),
    (12.0, [3.0813, 3.7729, 4.1987, 4.5077, 4.7502, 4.9496, 5.1187, 5.2653, 5.3946]),
    (13.0, [3.0552, 3.7341, 4.1509, 4.4529, 4.6897, 4.8842, 5.0491, 5.1921, 5.3181]),
    (14.0, [3.0332, 3.7014, 4.1105, 4.4066, 4.6385, 4.8290, 4.9903, 5.1301, 5.2534]),
    (15.0, [3.0143, 3.6734, 4.0760, 4.3670, 4.5947, 4.7816, 4.9399, 5.0770, 5.1979]),
    (16.0, [2.9980, 3.6491, 4.0461, 4.3327, 4.5568, 4.7406, 4.8962, 5.0310, 5.1498]),
    (17.0, [2.9837, 3.6280, 4.0200, 4.3027, 4.5237, 4.7048, 4.8580, 4.9907, 5.1077]),
    (18.0, [2.9712, 3.6093, 3.9970, 4.2763, 4.4944, 4.6731, 4.8243, 4.9552, 5.0705]),
    (19.0, [2.9600, 3.5927, 3.9766, 4.2528, 4.4685, 4.6450, 4.7944, 4.9236, 5.0375]),
    (20.0, [2.9500, 3.5779, 3.9583, 4.2319, 4.4452, 4.6199, 4.7676, 4.8954, 5.0079]),
    (24.0, [2.9188, 3.5317, 3.9013, 4.1663, 4.3727, 4.5413, 4.6838, 4.8069, 4.9152]),
    (30.0, [2.8882, 3.4864, 3.8454, 4.1021, 4.3015, 4.4642, 4.6014, 4.7199, 4.8241]),
    (40.0, [2.8582, 3.4421, 3.7907, 4.0391, 4.2316, 4.3885, 4.5205, 4.6345, 4.7345]),
    (60.0, [2.8288, 3.3987, 3.7371, 3.9774, 4.1632, 4.3141, 4.4411, 4.5504, 4.6463]),
    (120.0, [2.8000, 3.3561, 3.6846, 3.9169, 4.0960, 4.2412, 4.3630, 4.4678, 4.5595]),
    (f64::INFINITY, [2.7718, 3.3145, 3.6332, 3.8577, 4.0301, 4.1696, 4.2863, 4.3865, 4.4741]),
];

pub const MAX_GROUPS: usize = 10;

/// Critical value `q(0.05; k, df)`. Between tabulated rows the value is
/// interpolated linearly in `df`; past the last finite row, linearly in
/// `1 / df` towards the asymptotic row.
pub fn studentized_range_critical(k: usize, df: f64) -> Result<f64> {
    if !(2..=MAX_GROUPS).contains(&k) {
        return Err(Error::Domain(format!(
            "studentized range table covers 2..={MAX_GROUPS} groups, got {k}"
        )));
    }
    if !(df >= 1.0) {
        return Err(Error::Domain(format!("within-group df must be >= 1, got {df}")));
    }
    let col = k - 2;
    let last_finite = Q_CRIT_05.len() - 2;
    for w in Q_CRIT_05[..=last_finite].windows(2) {
        let ((d0, r0), (d1, r1)) = (w[0], w[1]);
        if df == d0 {
            return Ok(r0[col]);
        }
        if df < d1 {
            let t = (df - d0) / (d1 - d0);
            return Ok(r0[col] + t * (r1[col] - r0[col]));
        }
    }
    let (d_last, r_last) = Q_CRIT_05[last_finite];
    let r_inf = Q_CRIT_05[last_finite + 1].1;
    let t = 1.0 - d_last / df;
    Ok(r_last[col] + t * (r_inf[col] - r_last[col]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TukeyPair {
    pub group_a: usize,
    pub group_b: usize,
    /// `mean_a - mean_b`.
    pub mean_diff: f64,
    pub q: f64,
    /// Smallest absolute mean difference that would be significant.
    pub min_significant_diff: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TukeyResult {
    pub q_critical: f64,
    pub df_within: usize,
    /// Each unordered pair once, `group_a < group_b`.
    pub pairs: Vec<TukeyPair>,
}

impl TukeyResult {
    pub fn significant_pairs(&self) -> impl Iterator<Item = &TukeyPair> {
        self.pairs.iter().filter(|p| p.significant)
    }
}

/// Tukey-Kramer post-hoc comparison at alpha = 0.05 with the unequal-n
/// standard error `sqrt(MSW / 2 * (1/n_a + 1/n_b))`.
pub fn tukey_kramer<G: AsRef<[f64]>>(groups: &[G]) -> Result<TukeyResult> {
    let anova = one_way_anova(groups)?;
    let k = groups.len();
    let q_critical = studentized_range_critical(k, anova.df_within as f64)?;
    let msw = anova.ms_within();
    let mut pairs = Vec::with_capacity(k * (k - 1) / 2);
    for a in 0..k {
        for b in a + 1..k {
            let diff = anova.group_means[a] - anova.group_means[b];
            let se = (msw / 2.0 * (1.0 / anova.group_sizes[a] as f64 + 1.0 / anova.group_sizes[b] as f64)).sqrt();
            let q = if se > 0.0 {
                diff.abs() / se
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            pairs.push(TukeyPair {
                group_a: a,
                group_b: b,
                mean_diff: diff,
                q,
                min_significant_diff: q_critical * se,
                significant: q > q_critical,
            });
        }
    }
    Ok(TukeyResult {
        q_critical,
        df_within: anova.df_within,
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_lookup_and_interpolation() {
        assert_eq!(studentized_range_critical(3, 20.0).unwrap(), 3.5779);
        assert_eq!(studentized_range_critical(2, 1.0).unwrap(), 17.9693);
        let mid = studentized_range_critical(3, 22.0).unwrap();
        assert!((mid - (3.5779 + 3.5317) / 2.0).abs() < 1e-12);
        let big = studentized_range_critical(3, 1e9).unwrap();
        assert!((big - 3.3145).abs() < 1e-6);
        let q379 = studentized_range_critical(3, 379.0).unwrap();
        assert!(q379 < 3.3561 && q379 > 3.3145);
        assert!(studentized_range_critical(11, 30.0).is_err());
        assert!(studentized_range_critical(3, 0.5).is_err());
    }

    #[test]
    fn identical_groups_have_no_significant_pair() {
        let g = vec![vec![1.0, 2.0, 3.0, 4.0]; 3];
        let t = tukey_kramer(&g).unwrap();
        assert_eq!(t.pairs.len(), 3);
        assert_eq!(t.significant_pairs().count(), 0);
    }

    #[test]
    fn outlying_group_yields_two_pairs() {
        // Groups 0 and 1 differ by 0.1 with pooled sd 1; group 2 sits 10 sd away.
        let base = [-1.5, -0.5, 0.5, 1.5, -1.0, 1.0];
        let g: Vec<Vec<f64>> = [0.0, 0.1, 10.0]
            .iter()
            .map(|shift| base.iter().map(|v| v + shift).collect())
            .collect();
        let t = tukey_kramer(&g).unwrap();
        // df_within = 15, q(0.05; 3, 15) = 3.6734
        assert_eq!(t.q_critical, 3.6734);
        let sig: Vec<(usize, usize)> = t.significant_pairs().map(|p| (p.group_a, p.group_b)).collect();
        assert_eq!(sig, vec![(0, 2), (1, 2)]);
        for p in &t.pairs {
            assert_eq!(p.significant, p.mean_diff.abs() > p.min_significant_diff);
        }
    }
}
