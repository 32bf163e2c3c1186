use rand::seq::{index, SliceRandom};

use super::Dataset;
use crate::seed::rng_from_seed;
use crate::{Error, Result};

/// Random row partition into `(train, rest)`. The train side gets
/// `round(n * train_fraction)` rows, kept to at least one row on each side.
/// Both parts keep the original relative row order.
pub fn split(d: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = d.n_rows();
    if n < 2 {
        return Err(Error::Size(format!("cannot split {n} rows")));
    }
    let n_train = ((n as f64 * train_fraction).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let (train, test) = order.split_at_mut(n_train);
    train.sort_unstable();
    test.sort_unstable();
    Ok((d.select(train), d.select(test)))
}

/// Uniform sample of `n` rows without replacement, in sampled order.
pub fn sample_rows(d: &Dataset, n: usize, seed: u64) -> Result<Dataset> {
    if n > d.n_rows() {
        return Err(Error::Size(format!("cannot sample {n} rows from {}", d.n_rows())));
    }
    let picked = index::sample(&mut rng_from_seed(seed), d.n_rows(), n).into_vec();
    Ok(d.select(&picked))
}
