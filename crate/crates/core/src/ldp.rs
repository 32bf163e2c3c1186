//! Laplace mechanism and per-feature local-DP release of a table.
//!
//! Each column is noised independently with scale `(max - min) / epsilon`
//! over its observed values, then snapped back into the column's domain:
//! clipped to `[min, max]` for continuous columns, moved to the nearest
//! observed value for discrete and categorical ones.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::seed::{derive_seed, rng_from_seed};
use crate::tabular::{column_stats, ColumnKind, ColumnStats, Dataset};
use crate::{Error, Result};

/// Privacy budget epsilon. `Infinite` releases the data without noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrivacyBudget {
    Finite(f64),
    Infinite,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64) -> Result<Self> {
        if epsilon == f64::INFINITY {
            Ok(PrivacyBudget::Infinite)
        } else if epsilon > 0.0 && epsilon.is_finite() {
            Ok(PrivacyBudget::Finite(epsilon))
        } else {
            Err(Error::Config(format!("epsilon must be positive, got {epsilon}")))
        }
    }

    pub fn epsilon(self) -> f64 {
        match self {
            PrivacyBudget::Finite(e) => e,
            PrivacyBudget::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, PrivacyBudget::Infinite)
    }
}

impl fmt::Display for PrivacyBudget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PrivacyBudget::Finite(e) => write!(f, "{e}"),
            PrivacyBudget::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for PrivacyBudget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "Inf" | "INF" | "infinity" => Ok(PrivacyBudget::Infinite),
            other => {
                let e: f64 = other
                    .parse()
                    .map_err(|_| Error::Config(format!("invalid epsilon `{other}`")))?;
                PrivacyBudget::new(e)
            }
        }
    }
}

impl Serialize for PrivacyBudget {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PrivacyBudget::Finite(e) => s.serialize_f64(*e),
            PrivacyBudget::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for PrivacyBudget {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        let parsed = match Repr::deserialize(d)? {
            Repr::Num(e) => PrivacyBudget::new(e),
            Repr::Text(t) => t.parse(),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

/// Laplace noise parameters for one column. The location is always 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LaplaceParams {
    pub mu: f64,
    pub scale: f64,
    pub sensitivity: f64,
}

impl LaplaceParams {
    pub fn new(sensitivity: f64, budget: PrivacyBudget) -> Self {
        let scale = match budget {
            _ if sensitivity == 0.0 => 0.0,
            PrivacyBudget::Infinite => 0.0,
            PrivacyBudget::Finite(e) => sensitivity / e,
        };
        LaplaceParams {
            mu: 0.0,
            scale,
            sensitivity,
        }
    }

    /// Sensitivity is the empirical range of the column.
    pub fn for_column(stats: &ColumnStats, budget: PrivacyBudget) -> Self {
        LaplaceParams::new(stats.range(), budget)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if self.scale == 0.0 {
            return if x == self.mu { f64::INFINITY } else { 0.0 };
        }
        (-(x - self.mu).abs() / self.scale).exp() / (2.0 * self.scale)
    }
}

/// One draw from Laplace(0, scale) by inverting the CDF at a uniform draw
/// `u` in (-1/2, 1/2): `x = -scale * sgn(u) * ln(1 - 2|u|)`.
pub fn laplace_sample<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    debug_assert!(scale >= 0.0);
    if scale == 0.0 {
        return 0.0;
    }
    loop {
        let u: f64 = rng.random::<f64>() - 0.5;
        let tail = 1.0 - 2.0 * u.abs();
        if tail > 0.0 {
            return -scale * u.signum() * tail.ln();
        }
    }
}

/// Moves a noised value back into the column's domain. Discrete and
/// categorical columns take the nearest observed value (ties go to the
/// smaller one); continuous columns are clipped to the observed range.
pub fn snap(value: f64, stats: &ColumnStats, kind: ColumnKind) -> f64 {
    match kind {
        ColumnKind::Continuous => value.clamp(stats.min, stats.max),
        ColumnKind::Discrete | ColumnKind::Categorical => nearest(&stats.distinct_values, value),
    }
}

fn nearest(sorted: &[f64], value: f64) -> f64 {
    let idx = sorted.partition_point(|&v| v < value);
    if idx == 0 {
        return sorted[0];
    }
    if idx == sorted.len() {
        return sorted[sorted.len() - 1];
    }
    let (lo, hi) = (sorted[idx - 1], sorted[idx]);
    if hi - value < value - lo {
        hi
    } else {
        lo
    }
}

/// Releases a locally differentially private copy of `d`.
///
/// Every noised column draws from its own generator derived from `seed` and
/// the column index, so columns are processed in parallel without changing
/// the result. Missing cells stay missing. The label column is copied
/// through unless `noise_label` is set.
pub fn privatize(d: &Dataset, budget: PrivacyBudget, noise_label: bool, seed: u64) -> Result<Dataset> {
    let label = d.label_index();
    let targets: Vec<usize> = (0..d.n_cols()).filter(|&j| noise_label || j != label).collect();

    let noised: Vec<(usize, Vec<Option<f64>>)> = targets
        .par_iter()
        .map(|&j| {
            let stats = column_stats(d, j)?;
            let params = LaplaceParams::for_column(&stats, budget);
            let kind = d.schema()[j].kind;
            let mut rng = rng_from_seed(derive_seed(seed, "ldp-column", &[j as u64]));
            let column = d
                .column(j)
                .map(|cell| {
                    cell.map(|x| {
                        if params.scale == 0.0 {
                            x
                        } else {
                            snap(x + laplace_sample(params.scale, &mut rng), &stats, kind)
                        }
                    })
                })
                .collect();
            Ok((j, column))
        })
        .collect::<Result<_>>()?;

    let mut rows = d.rows().to_vec();
    for (j, column) in noised {
        for (row, cell) in rows.iter_mut().zip(column) {
            row[j] = cell;
        }
    }
    Ok(d.with_rows(rows)
        .with_provenance(format!("{}+ldp(eps={budget})", d.provenance())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use crate::tabular::{make_synthetic, ColumnSchema, SyntheticSpec};

    fn stats(values: &[f64]) -> ColumnStats {
        ColumnStats::from_values(values, 0).unwrap()
    }

    #[test]
    fn zero_scale_is_exactly_zero() {
        let mut rng = rng_from_seed(1);
        assert_eq!(laplace_sample(0.0, &mut rng), 0.0);
    }

    #[test]
    fn sample_mean_abs_and_median() {
        // E|X| = b for Laplace(0, b); the median is 0.
        let mut rng = rng_from_seed(2);
        let b = 2.0;
        let mut draws: Vec<f64> = (0..100_000).map(|_| laplace_sample(b, &mut rng)).collect();
        let mean_abs = draws.iter().map(|x| x.abs()).sum::<f64>() / draws.len() as f64;
        assert!((mean_abs - b).abs() / b < 0.02, "{mean_abs}");
        draws.sort_by(f64::total_cmp);
        let median = draws[draws.len() / 2];
        assert!(median.abs() < 0.05 * b, "{median}");
    }

    #[test]
    fn pdf_matches_closed_form() {
        let p = LaplaceParams::new(4.0, PrivacyBudget::Finite(2.0));
        assert_eq!(p.scale, 2.0);
        assert!((p.pdf(0.0) - 0.25).abs() < 1e-15);
        assert!((p.pdf(-2.0) - 0.25 * (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(LaplaceParams::new(0.0, PrivacyBudget::Finite(0.1)).scale, 0.0);
        assert_eq!(LaplaceParams::new(3.0, PrivacyBudget::Infinite).scale, 0.0);
    }

    #[test]
    fn snap_rules() {
        let s = stats(&[0.0, 5.0, 10.0]);
        assert_eq!(snap(7.3, &s, ColumnKind::Discrete), 5.0);
        assert_eq!(snap(-40.0, &s, ColumnKind::Discrete), 0.0);
        assert_eq!(snap(12.0, &s, ColumnKind::Categorical), 10.0);
        let s = stats(&[0.0, 100.0]);
        assert_eq!(snap(-4.0, &s, ColumnKind::Continuous), 0.0);
        assert_eq!(snap(42.5, &s, ColumnKind::Continuous), 42.5);
        let s = stats(&[0.0, 5.0]);
        assert_eq!(snap(2.5, &s, ColumnKind::Discrete), 0.0);
    }

    #[test]
    fn budget_parsing_and_serde() {
        assert_eq!("inf".parse::<PrivacyBudget>().unwrap(), PrivacyBudget::Infinite);
        assert_eq!("0.1".parse::<PrivacyBudget>().unwrap(), PrivacyBudget::Finite(0.1));
        assert!("0".parse::<PrivacyBudget>().is_err());
        assert!("-1".parse::<PrivacyBudget>().is_err());
        let grid: Vec<PrivacyBudget> = serde_json::from_str(r#"[0.1, 1, "inf"]"#).unwrap();
        assert_eq!(serde_json::to_string(&grid).unwrap(), r#"[0.1,1.0,"inf"]"#);
        assert_eq!(PrivacyBudget::Finite(1000.0).to_string(), "1000");
    }

    fn sample_data() -> Dataset {
        make_synthetic(
            &SyntheticSpec {
                rows: 300,
                ..Default::default()
            },
            9,
        )
        .unwrap()
    }

    #[test]
    fn infinite_budget_is_identity() {
        let d = sample_data();
        let out = privatize(&d, PrivacyBudget::Infinite, true, 1).unwrap();
        assert_eq!(out.rows(), d.rows());
    }

    #[test]
    fn constant_column_unchanged_and_label_untouched() {
        let schema = vec![
            ColumnSchema::numeric("c", ColumnKind::Continuous),
            ColumnSchema::numeric("x", ColumnKind::Continuous),
            ColumnSchema::numeric("y", ColumnKind::Discrete).label(),
        ];
        let rows = (0..50)
            .map(|i| vec![Some(7.0), Some(i as f64), Some((i % 2) as f64)])
            .collect();
        let d = Dataset::new(schema, rows, "t").unwrap();
        let out = privatize(&d, PrivacyBudget::Finite(0.1), false, 3).unwrap();
        assert!(out.column(0).all(|c| c == Some(7.0)));
        assert!(out.column(2).eq(d.column(2)));
        assert!(out.column(1).ne(d.column(1)));
    }

    #[test]
    fn missing_cells_stay_missing() {
        let d = sample_data();
        let out = privatize(&d, PrivacyBudget::Finite(1.0), false, 4).unwrap();
        for (a, b) in d.rows().iter().zip(out.rows()) {
            for (x, y) in a.iter().zip(b) {
                assert_eq!(x.is_none(), y.is_none());
            }
        }
    }

    #[test]
    fn binary_flip_rate_at_small_epsilon() {
        // With s = 1 and eps = 0.1, b = 10 and a cell moves to the other value
        // when the noise carries it past 0.5 in the right direction:
        // P = 0.5 * exp(-0.5 / 10).
        let schema = vec![
            ColumnSchema::numeric("bit", ColumnKind::Discrete),
            ColumnSchema::numeric("y", ColumnKind::Discrete).label(),
        ];
        let rows = (0..20_000).map(|i| vec![Some((i % 2) as f64), Some(0.0)]).collect();
        let d = Dataset::new(schema, rows, "t").unwrap();
        let out = privatize(&d, PrivacyBudget::Finite(0.1), false, 5).unwrap();
        let flips = d.column(0).zip(out.column(0)).filter(|(a, b)| a != b).count();
        let rate = flips as f64 / 20_000.0;
        let expected = 0.5 * (-0.05f64).exp();
        assert!((expected - 0.4756).abs() < 1e-4);
        assert!((rate - expected).abs() < 0.015, "{rate}");
    }

    #[test]
    fn outputs_stay_in_domain() {
        let d = sample_data();
        for eps in [0.1, 1.0, 10.0] {
            let out = privatize(&d, PrivacyBudget::Finite(eps), true, 6).unwrap();
            for j in 0..d.n_cols() {
                let s = column_stats(&d, j).unwrap();
                for v in out.column(j).flatten() {
                    assert!(v >= s.min && v <= s.max);
                    if d.schema()[j].kind != ColumnKind::Continuous {
                        assert!(s.distinct_values.contains(&v));
                    }
                }
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let d = sample_data();
        let a = privatize(&d, PrivacyBudget::Finite(1.0), false, 8).unwrap();
        let b = privatize(&d, PrivacyBudget::Finite(1.0), false, 8).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noise_shrinks_with_epsilon() {
        let mut last = f64::INFINITY;
        for eps in [0.1, 1.0, 10.0, 100.0] {
            let p = LaplaceParams::new(5.0, PrivacyBudget::Finite(eps));
            let mut rng = rng_from_seed(10);
            let mean = (0..20_000)
                .map(|_| laplace_sample(p.scale, &mut rng).abs())
                .sum::<f64>()
                / 20_000.0;
            assert!(mean <= last);
            last = mean;
        }
    }
}
