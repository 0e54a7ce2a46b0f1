use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::special::f_survival;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub df_between: usize,
    pub df_within: usize,
    pub f: f64,
    pub p: f64,
    pub ss_between: f64,
    pub ss_within: f64,
    pub group_means: Vec<f64>,
    pub group_sizes: Vec<usize>,
}

impl AnovaResult {
    /// Within-group mean square (pooled variance).
    pub fn ms_within(&self) -> f64 {
        self.ss_within / self.df_within as f64
    }
}

pub(crate) fn check_groups<G: AsRef<[f64]>>(groups: &[G]) -> Result<()> {
    if groups.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 groups, got {}",
            groups.len()
        )));
    }
    for (i, g) in groups.iter().enumerate() {
        let g = g.as_ref();
        if g.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "group {i} has {} value(s); at least 2 required",
                g.len()
            )));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("group {i} contains a non-finite value")));
        }
    }
    Ok(())
}

/// One-way ANOVA with the p-value from the F survival function.
pub fn one_way_anova<G: AsRef<[f64]>>(groups: &[G]) -> Result<AnovaResult> {
    check_groups(groups)?;
    let k = groups.len();
    let sizes: Vec<usize> = groups.iter().map(|g| g.as_ref().len()).collect();
    let n: usize = sizes.iter().sum();
    let means: Vec<f64> = groups
        .iter()
        .map(|g| {
            let g = g.as_ref();
            g.iter().sum::<f64>() / g.len() as f64
        })
        .collect();
    let grand = groups.iter().flat_map(|g| g.as_ref().iter()).sum::<f64>() / n as f64;
    let ss_between: f64 = means
        .iter()
        .zip(&sizes)
        .map(|(m, &s)| s as f64 * (m - grand).powi(2))
        .sum();
    let ss_within: f64 = groups
        .iter()
        .zip(&means)
        .map(|(g, m)| g.as_ref().iter().map(|v| (v - m).powi(2)).sum::<f64>())
        .sum();
    let df_between = k - 1;
    let df_within = n - k;
    let (f, p) = if ss_within == 0.0 {
        if ss_between == 0.0 {
            log::warn!("ANOVA on constant data: F defined as 0");
            (0.0, 1.0)
        } else {
            (f64::INFINITY, 0.0)
        }
    } else {
        let f = (ss_between / df_between as f64) / (ss_within / df_within as f64);
        (f, f_survival(f, df_between as f64, df_within as f64))
    };
    Ok(AnovaResult {
        df_between,
        df_within,
        f,
        p,
        ss_between,
        ss_within,
        group_means: means,
        group_sizes: sizes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_groups() {
        let g = vec![vec![1.0, 2.0, 3.0]; 3];
        let r = one_way_anova(&g).unwrap();
        assert_eq!(r.f, 0.0);
        assert_eq!(r.p, 1.0);
        assert_eq!((r.df_between, r.df_within), (2, 6));
    }

    #[test]
    fn separated_groups() {
        let g = vec![
            vec![0.0, 1e-9, 0.0, -1e-9],
            vec![10.0, 10.0 + 1e-9, 10.0, 10.0 - 1e-9],
        ];
        let r = one_way_anova(&g).unwrap();
        assert!(r.p < 1e-6, "p = {}", r.p);
    }

    #[test]
    fn constant_data_is_zero_f() {
        let r = one_way_anova(&[vec![4.0, 4.0], vec![4.0, 4.0]]).unwrap();
        assert_eq!((r.f, r.p), (0.0, 1.0));
        let r = one_way_anova(&[vec![4.0, 4.0], vec![5.0, 5.0]]).unwrap();
        assert_eq!((r.f, r.p), (f64::INFINITY, 0.0));
    }

    #[test]
    fn preconditions() {
        assert!(one_way_anova(&[vec![1.0, 2.0]]).is_err());
        assert!(one_way_anova(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }

    #[test]
    fn textbook_example() {
        // SSB = 10, SSW = 30, so F(2, 12) = 2 and p = (1 + 2F/12)^-6.
        let g = vec![
            vec![1.0, 2.0, 3.0, 4.0, 5.0],
            vec![2.0, 3.0, 4.0, 5.0, 6.0],
            vec![3.0, 4.0, 5.0, 6.0, 7.0],
        ];
        let r = one_way_anova(&g).unwrap();
        assert!((r.f - 2.0).abs() < 1e-12);
        assert!((r.p - 0.75f64.powi(6)).abs() < 1e-12, "{}", r.p);
    }

    proptest! {
        #[test]
        fn f_is_shift_and_scale_invariant(
            g in proptest::collection::vec(proptest::collection::vec(-10.0..10.0f64, 2..8), 2..5),
            shift in -100.0..100.0f64, scale in 0.1..10.0f64,
        ) {
            let a = one_way_anova(&g).unwrap();
            let t: Vec<Vec<f64>> = g.iter().map(|v| v.iter().map(|x| x * scale + shift).collect()).collect();
            let b = one_way_anova(&t).unwrap();
            prop_assume!(a.ss_within > 1e-6);
            prop_assert!((a.f - b.f).abs() <= 1e-6 * a.f.max(1.0));
        }

        #[test]
        fn p_decreases_with_f(d1 in 1usize..10, d2 in 1usize..200, f1 in 0.0..20.0f64, df in 0.0..5.0f64) {
            let p1 = f_survival(f1, d1 as f64, d2 as f64);
            let p2 = f_survival(f1 + df, d1 as f64, d2 as f64);
            prop_assert!(p2 <= p1 + 1e-12);
            prop_assert!((0.0..=1.0).contains(&p1));
        }
    }
}
