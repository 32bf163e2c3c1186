use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{check_input, Background, ExplainerKind, Explanation};
use crate::linalg::solve_symmetric;
use crate::models::{argmax, Predictor};
use crate::seed::rng_from_seed;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimeConfig {
    pub num_samples: usize,
    /// Kernel width on the σ-scaled distance; `None` means `0.75·√M`.
    pub kernel_width: Option<f64>,
    pub ridge_strength: f64,
    /// Multiplier on each feature's background σ for the sampling spread.
    pub perturbation_scale: f64,
    pub seed: u64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        LimeConfig {
            num_samples: 2000,
            kernel_width: None,
            ridge_strength: 1e-3,
            perturbation_scale: 1.0,
            seed: 0,
        }
    }
}

impl LimeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kernel_width.is_some_and(|w| !(w.is_finite() && w > 0.0)) {
            return Err(Error::Config("kernel_width must be positive".into()));
        }
        if !(self.ridge_strength.is_finite() && self.ridge_strength >= 0.0) {
            return Err(Error::Config("ridge_strength must be non-negative".into()));
        }
        if !(self.perturbation_scale.is_finite() && self.perturbation_scale > 0.0) {
            return Err(Error::Config("perturbation_scale must be positive".into()));
        }
        Ok(())
    }
}

/// Fits `g(z) = b + c·z` to the model's probability for its predicted class
/// on Gaussian perturbations around `x`.
///
/// Sampling, distances and the ridge penalty live in the σ-scaled space
/// `u_j = (z_j − x_j)/σ_j`; the returned coefficients and intercept are
/// converted back to raw feature units. Features with `σ_j = 0` are not
/// perturbed and get a zero coefficient.
pub fn lime_explain<P: Predictor + ?Sized>(
    m: &P,
    x: &[f64],
    cfg: &LimeConfig,
    background: &Background,
) -> Result<Explanation> {
    cfg.validate()?;
    check_input(m, x, background)?;
    let d = x.len();
    if cfg.num_samples < d + 2 {
        return Err(Error::Config(format!(
            "num_samples {} is below feature count + 2 = {}",
            cfg.num_samples,
            d + 2
        )));
    }
    let sigma = background.stddev();
    let width = cfg.kernel_width.unwrap_or(0.75 * (d as f64).sqrt());
    let mut ridge = cfg.ridge_strength;
    if sigma.contains(&0.0) {
        ridge = ridge.max(1e-8);
    }

    let mut dist = vec![0.0; m.n_classes()];
    m.predict_distribution_into(x, &mut dist);
    let class = argmax(&dist);

    let mut rng = rng_from_seed(cfg.seed);
    let mut u = vec![0.0; cfg.num_samples * d];
    let mut y = vec![0.0; cfg.num_samples];
    let mut w = vec![0.0; cfg.num_samples];
    let mut z = vec![0.0; d];
    y[0] = dist[class];
    w[0] = 1.0;
    for i in 1..cfg.num_samples {
        let ui = &mut u[i * d..(i + 1) * d];
        for j in 0..d {
            let e: f64 = StandardNormal.sample(&mut rng);
            ui[j] = if sigma[j] > 0.0 {
                cfg.perturbation_scale * e
            } else {
                0.0
            };
            z[j] = x[j] + ui[j] * sigma[j];
        }
        m.predict_distribution_into(&z, &mut dist);
        y[i] = dist[class];
        let d2: f64 = ui.iter().map(|v| v * v).sum();
        w[i] = (-d2 / (width * width)).exp();
    }

    // Weighted ridge with an unpenalized intercept: center on weighted means,
    // solve for the slopes, then recover the intercept.
    let sw: f64 = w.iter().sum();
    let mut ubar = vec![0.0; d];
    let mut ybar = 0.0;
    for i in 0..cfg.num_samples {
        for j in 0..d {
            ubar[j] += w[i] * u[i * d + j];
        }
        ybar += w[i] * y[i];
    }
    ubar.iter_mut().for_each(|v| *v /= sw);
    ybar /= sw;
    let mut a = vec![0.0; d * d];
    let mut b = vec![0.0; d];
    let mut uc = vec![0.0; d];
    for i in 0..cfg.num_samples {
        for j in 0..d {
            uc[j] = u[i * d + j] - ubar[j];
        }
        let yc = y[i] - ybar;
        for j in 0..d {
            let wu = w[i] * uc[j];
            b[j] += wu * yc;
            for k in j..d {
                a[j * d + k] += wu * uc[k];
            }
        }
    }
    for j in 0..d {
        a[j * d + j] += ridge;
        for k in 0..j {
            a[j * d + k] = a[k * d + j];
        }
    }
    let c = solve_symmetric(d, &a, &b).ok_or_else(|| Error::Training("LIME normal equations are singular".into()))?;
    let intercept_scaled = ybar - c.iter().zip(&ubar).map(|(c, u)| c * u).sum::<f64>();
    let attributions: Vec<f64> = c
        .iter()
        .zip(sigma)
        .map(|(&c, &s)| if s > 0.0 { c / s } else { 0.0 })
        .collect();
    let intercept = intercept_scaled - attributions.iter().zip(x).map(|(c, x)| c * x).sum::<f64>();
    Ok(Explanation {
        attributions,
        intercept_or_base: intercept,
        explained_class: class,
        explainer: ExplainerKind::Lime,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::testing::Prob;
    use rand::Rng;

    fn background(d: usize, spread: f64, seed: u64) -> Background {
        let mut rng = rng_from_seed(seed);
        Background::new(
            (0..200)
                .map(|_| (0..d).map(|_| rng.random_range(-spread..spread)).collect())
                .collect(),
        )
        .unwrap()
    }

    fn linear(x: &[f64]) -> f64 {
        (0.6 + 0.1 * x[0] - 0.05 * x[1]).clamp(0.0, 1.0)
    }

    #[test]
    fn recovers_linear_probability_in_unclipped_region() {
        let cfg = LimeConfig {
            ridge_strength: 1e-6,
            ..Default::default()
        };
        let bg = background(2, 0.5, 1);
        let e = lime_explain(&Prob(2, linear), &[0.3, -0.2], &cfg, &bg).unwrap();
        assert_eq!(e.explained_class, 0);
        assert!((e.attributions[0] - 0.1).abs() < 1e-2, "{:?}", e.attributions);
        assert!((e.attributions[1] + 0.05).abs() < 1e-2);
        assert!((e.intercept_or_base - 0.6).abs() < 1e-2);
    }

    #[test]
    fn location_consistent_on_linear_box() {
        let cfg = LimeConfig::default();
        let bg = background(2, 0.5, 2);
        let a = lime_explain(&Prob(2, linear), &[0.0, 0.0], &cfg, &bg).unwrap();
        let b = lime_explain(&Prob(2, linear), &[0.4, 0.3], &cfg, &bg).unwrap();
        for (p, q) in a.attributions.iter().zip(&b.attributions) {
            assert!((p - q).abs() < 1e-2);
        }
    }

    #[test]
    fn constant_box_gives_zero_attributions() {
        let bg = background(3, 2.0, 3);
        let e = lime_explain(&Prob(3, |_: &[f64]| 0.7), &[1.0, 2.0, 3.0], &LimeConfig::default(), &bg).unwrap();
        assert!(e.attributions.iter().all(|c| c.abs() < 1e-9));
        assert!((e.intercept_or_base - 0.7).abs() < 1e-9);
    }

    #[test]
    fn zero_variance_feature_is_regularized() {
        let bg = Background::new(vec![vec![0.0, 1.0], vec![1.0, 1.0], vec![2.0, 1.0]]).unwrap();
        let cfg = LimeConfig {
            ridge_strength: 0.0,
            ..Default::default()
        };
        let e = lime_explain(&Prob(2, |x: &[f64]| 0.5 + 0.1 * x[0]), &[1.0, 1.0], &cfg, &bg).unwrap();
        assert_eq!(e.attributions[1], 0.0);
        assert!((e.attributions[0] - 0.1).abs() < 1e-6);
    }

    #[test]
    fn deterministic_and_validated() {
        let bg = background(2, 1.0, 4);
        let f = Prob(2, |x: &[f64]| 1.0 / (1.0 + (-x[0] * x[1]).exp()));
        let cfg = LimeConfig {
            seed: 11,
            ..Default::default()
        };
        assert_eq!(
            lime_explain(&f, &[0.5, 0.5], &cfg, &bg).unwrap(),
            lime_explain(&f, &[0.5, 0.5], &cfg, &bg).unwrap()
        );
        let small = LimeConfig {
            num_samples: 3,
            ..Default::default()
        };
        assert!(matches!(
            lime_explain(&f, &[0.5, 0.5], &small, &bg),
            Err(Error::Config(_))
        ));
        assert!(matches!(lime_explain(&f, &[0.5], &cfg, &bg), Err(Error::Contract(_))));
    }
}
