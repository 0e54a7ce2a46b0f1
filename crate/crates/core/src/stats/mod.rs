//! One-way ANOVA, Tukey-Kramer post-hoc comparisons and grouped summaries.

pub mod anova;
pub mod special;
pub mod summary;
pub mod tukey;

pub use anova::{one_way_anova, AnovaResult};
pub use summary::{grouped_summary, BoxPlot, GroupBy, GroupStats, GroupedSummary};
pub use tukey::{studentized_range_critical, tukey_kramer, TukeyPair, TukeyResult};
pub use special::{binom_half_cdf, chi2_survival, f_survival, ln_gamma, reg_inc_beta, t_cdf, t_quantile};
