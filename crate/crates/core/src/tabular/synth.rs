use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Cell, ColumnKind, ColumnSchema, Dataset};
use crate::seed::{derive_seed, rng_from_seed};
use crate::{Error, Result};

/// Parameters of the synthetic classification table used in place of real
/// data. Features are Gaussian per class with heterogeneous offsets and
/// scales, so that standardization changes what a model learns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub rows: usize,
    pub features: usize,
    pub classes: usize,
    /// Euclidean distance between class means, in within-class standard
    /// deviations.
    pub separation: f64,
    /// Ratio of the largest to the smallest class size.
    pub imbalance: f64,
    pub duplicate_fraction: f64,
    pub outlier_fraction: f64,
    /// Fraction of feature cells left missing.
    pub missing_fraction: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            rows: 2000,
            features: 8,
            classes: 2,
            separation: 2.5,
            imbalance: 4.0,
            duplicate_fraction: 0.05,
            outlier_fraction: 0.02,
            missing_fraction: 0.01,
        }
    }
}

impl SyntheticSpec {
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    fn validate(&self) -> Result<()> {
        let fractions = [
            ("duplicate_fraction", self.duplicate_fraction),
            ("outlier_fraction", self.outlier_fraction),
            ("missing_fraction", self.missing_fraction),
        ];
        for (name, f) in fractions {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Spec(format!("{name} must lie in [0, 1], got {f}")));
            }
        }
        if fractions.iter().map(|(_, f)| f).sum::<f64>() > 1.0 {
            return Err(Error::Spec("fractions sum to more than 1".into()));
        }
        if self.features == 0 {
            return Err(Error::Spec("need at least one feature".into()));
        }
        if self.classes < 2 {
            return Err(Error::Spec("need at least two classes".into()));
        }
        if !(self.imbalance >= 1.0) {
            return Err(Error::Spec(format!("imbalance must be >= 1, got {}", self.imbalance)));
        }
        if !(self.separation >= 0.0) || !self.separation.is_finite() {
            return Err(Error::Spec(format!("separation must be >= 0, got {}", self.separation)));
        }
        if self.rows < self.classes || self.base_rows() < self.classes {
            return Err(Error::Spec(format!(
                "{} rows cannot hold {} classes",
                self.rows, self.classes
            )));
        }
        Ok(())
    }

    fn duplicate_rows(&self) -> usize {
        (self.rows as f64 * self.duplicate_fraction).round() as usize
    }

    fn base_rows(&self) -> usize {
        self.rows - self.duplicate_rows().min(self.rows)
    }

    /// Class sizes following a geometric profile from the majority down to
    /// `majority / imbalance`, every class non-empty.
    fn class_counts(&self) -> Vec<usize> {
        let n = self.base_rows();
        let k = self.classes;
        let weights: Vec<f64> = (0..k)
            .map(|c| self.imbalance.powf(-(c as f64) / (k - 1) as f64))
            .collect();
        let total: f64 = weights.iter().sum();
        let exact: Vec<f64> = weights.iter().map(|w| n as f64 * w / total).collect();
        let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())));
        let mut left = n - counts.iter().sum::<usize>();
        for &c in order.iter().cycle() {
            if left == 0 {
                break;
            }
            counts[c] += 1;
            left -= 1;
        }
        for c in 0..k {
            if counts[c] == 0 {
                counts[c] = 1;
                let donor = (0..k).max_by_key(|&i| counts[i]).unwrap();
                counts[donor] -= 1;
            }
        }
        counts
    }
}

fn unit_vector(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

pub fn make_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Dataset> {
    draw_synthetic(spec, seed, derive_seed(seed, "synthetic-rows", &[]))
}

/// Rows drawn from the distribution that `make_synthetic` uses for `seed`,
/// with the row sampling driven by `sample_seed`. Two calls with the same
/// `seed` and different `sample_seed`s give independent samples of one
/// population.
pub fn draw_synthetic(spec: &SyntheticSpec, seed: u64, sample_seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = rng_from_seed(seed);
    let d = spec.features;
    let k = spec.classes;

    let offsets: Vec<f64> = (0..d).map(|_| rng.random_range(-20.0..20.0)).collect();
    let scales: Vec<f64> = (0..d)
        .map(|_| rng.random_range(0.5f64.ln()..20f64.ln()).exp())
        .collect();

    let mut directions: Vec<Vec<f64>> = Vec::with_capacity(k);
    directions.push(unit_vector(&mut rng, d));
    for c in 1..k {
        if k == 2 {
            directions.push(directions[0].iter().map(|x| -x).collect());
        } else {
            let _ = c;
            directions.push(unit_vector(&mut rng, d));
        }
    }
    let means: Vec<Vec<f64>> = directions
        .iter()
        .map(|v| v.iter().map(|x| 0.5 * spec.separation * x).collect())
        .collect();

    let mut labels: Vec<usize> = spec
        .class_counts()
        .iter()
        .enumerate()
        .flat_map(|(c, &n)| std::iter::repeat_n(c, n))
        .collect();
    labels.shuffle(&mut rng);

    let mut rows: Vec<Vec<Cell>> = labels
        .iter()
        .map(|&c| {
            let mut row: Vec<Cell> = (0..d)
                .map(|j| {
                    let z: f64 = rng.sample(StandardNormal);
                    Some(offsets[j] + scales[j] * (means[c][j] + z))
                })
                .collect();
            row.push(Some(c as f64));
            row
        })
        .collect();
    let n_base = rows.len();

    let n_outliers = ((spec.rows as f64 * spec.outlier_fraction).round() as usize).min(n_base);
    if n_outliers > 0 {
        let col_stats: Vec<(f64, f64)> = (0..d)
            .map(|j| {
                let vals: Vec<f64> = rows.iter().map(|r| r[j].unwrap()).collect();
                let m = vals.iter().sum::<f64>() / vals.len() as f64;
                let sd = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / vals.len() as f64).sqrt();
                (m, sd)
            })
            .collect();
        for i in index::sample(&mut rng, n_base, n_outliers) {
            let j = rng.random_range(0..d);
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let (m, sd) = col_stats[j];
            rows[i][j] = Some(m + sign * sd * rng.random_range(6.0..10.0));
        }
    }

    let cells = n_base * d;
    let n_missing = ((cells as f64 * spec.missing_fraction).round() as usize).min(cells);
    for cell in index::sample(&mut rng, cells, n_missing) {
        rows[cell / d][cell % d] = None;
    }

    for _ in 0..spec.duplicate_rows() {
        let src = rng.random_range(0..n_base);
        rows.push(rows[src].clone());
    }

    let mut schema: Vec<ColumnSchema> = (0..d)
        .map(|j| ColumnSchema::numeric(format!("f{j}"), ColumnKind::Continuous))
        .collect();
    schema.push(ColumnSchema::numeric("label", ColumnKind::Discrete).label());
    Dataset::new(schema, rows, format!("synthetic(seed={seed},sample={sample_seed})"))
}
