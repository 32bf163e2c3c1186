use std::fmt;

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{check_input, Background, ExplainerKind, Explanation};
use crate::linalg::solve_symmetric;
use crate::models::{argmax, Predictor};
use crate::seed::rng_from_seed;
use crate::{Error, Result};

/// Largest feature count for which every coalition is enumerated.
pub const EXACT_MAX_FEATURES: usize = 16;
/// Largest feature count accepted by [`exact_shapley`].
pub const ORACLE_MAX_FEATURES: usize = 10;

/// How many coalitions Kernel SHAP evaluates. `Sampled(n)` still enumerates
/// when all `2^M − 2` proper coalitions fit in `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BudgetRepr", into = "BudgetRepr")]
pub enum CoalitionBudget {
    Exact,
    Sampled(usize),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum BudgetRepr {
    Count(usize),
    Word(String),
}

impl TryFrom<BudgetRepr> for CoalitionBudget {
    type Error = String;

    fn try_from(r: BudgetRepr) -> std::result::Result<Self, String> {
        match r {
            BudgetRepr::Count(0) => Err("coalition budget must be positive".into()),
            BudgetRepr::Count(n) => Ok(CoalitionBudget::Sampled(n)),
            BudgetRepr::Word(w) if w == "exact" => Ok(CoalitionBudget::Exact),
            BudgetRepr::Word(w) => Err(format!("expected a count or \"exact\", got `{w}`")),
        }
    }
}

impl From<CoalitionBudget> for BudgetRepr {
    fn from(b: CoalitionBudget) -> Self {
        match b {
            CoalitionBudget::Exact => BudgetRepr::Word("exact".into()),
            CoalitionBudget::Sampled(n) => BudgetRepr::Count(n),
        }
    }
}

impl fmt::Display for CoalitionBudget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoalitionBudget::Exact => f.write_str("exact"),
            CoalitionBudget::Sampled(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapConfig {
    pub coalition_budget: CoalitionBudget,
    pub seed: u64,
}

impl Default for ShapConfig {
    fn default() -> Self {
        ShapConfig {
            coalition_budget: CoalitionBudget::Sampled(2048),
            seed: 0,
        }
    }
}

impl ShapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.coalition_budget == CoalitionBudget::Sampled(0) {
            return Err(Error::Config("coalition budget must be positive".into()));
        }
        Ok(())
    }
}

/// Mean probability of `class` over the background with the features in
/// `mask` taken from `x`.
fn coalition_value<P: Predictor + ?Sized>(
    m: &P,
    x: &[f64],
    mask: &[bool],
    background: &Background,
    class: usize,
    z: &mut [f64],
    out: &mut [f64],
) -> f64 {
    let mut total = 0.0;
    for b in background.rows() {
        for j in 0..x.len() {
            z[j] = if mask[j] { x[j] } else { b[j] };
        }
        m.predict_distribution_into(z, out);
        total += out[class];
    }
    total / background.rows().len() as f64
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Kernel SHAP for the probability of the predicted class.
///
/// Solves the Shapley-kernel weighted least squares over coalitions with the
/// efficiency constraint `Σφ = f(x) − f0` imposed exactly by eliminating the
/// last attribution.
pub fn shap_explain<P: Predictor + ?Sized>(
    m: &P,
    x: &[f64],
    cfg: &ShapConfig,
    background: &Background,
) -> Result<Explanation> {
    cfg.validate()?;
    check_input(m, x, background)?;
    let d = x.len();
    let mut out = vec![0.0; m.n_classes()];
    m.predict_distribution_into(x, &mut out);
    let class = argmax(&out);
    let fx = out[class];
    let mut z = vec![0.0; d];
    let f0 = coalition_value(m, x, &vec![false; d], background, class, &mut z, &mut out);
    let delta = fx - f0;
    let explanation = |attributions| Explanation {
        attributions,
        intercept_or_base: f0,
        explained_class: class,
        explainer: ExplainerKind::Shap,
    };
    if d <= 1 {
        return Ok(explanation(vec![delta; d]));
    }

    let proper = if d < 63 { (1u64 << d) - 2 } else { u64::MAX };
    let enumerate = match cfg.coalition_budget {
        CoalitionBudget::Exact if d > EXACT_MAX_FEATURES => {
            return Err(Error::Size(format!(
                "exact Kernel SHAP supports at most {EXACT_MAX_FEATURES} features, got {d}"
            )))
        }
        CoalitionBudget::Exact => true,
        CoalitionBudget::Sampled(n) => proper <= n as u64,
    };

    // (mask, kernel weight)
    let coalitions: Vec<(Vec<bool>, f64)> = if enumerate {
        (1..=proper)
            .map(|bits| {
                let mask: Vec<bool> = (0..d).map(|j| bits >> j & 1 == 1).collect();
                let s = bits.count_ones() as usize;
                let w = (d - 1) as f64 / (binomial(d, s) * s as f64 * (d - s) as f64);
                (mask, w)
            })
            .collect()
    } else {
        let CoalitionBudget::Sampled(n) = cfg.coalition_budget else {
            unreachable!()
        };
        // Sizes are drawn in proportion to their total kernel mass, members
        // uniformly, so every draw carries the same weight.
        let size_mass: Vec<f64> = (1..d).map(|s| (d - 1) as f64 / (s * (d - s)) as f64).collect();
        let total: f64 = size_mass.iter().sum();
        let mut rng = rng_from_seed(cfg.seed);
        (0..n)
            .map(|_| {
                let mut r = rng.random::<f64>() * total;
                let mut s = d - 1;
                for (i, mass) in size_mass.iter().enumerate() {
                    if r < *mass {
                        s = i + 1;
                        break;
                    }
                    r -= mass;
                }
                let mut mask = vec![false; d];
                for j in index::sample(&mut rng, d, s) {
                    mask[j] = true;
                }
                (mask, 1.0)
            })
            .collect()
    };

    let k = d - 1;
    let mut a = vec![0.0; k * k];
    let mut b = vec![0.0; k];
    let mut row = vec![0.0; k];
    for (mask, w) in &coalitions {
        let v = coalition_value(m, x, mask, background, class, &mut z, &mut out);
        let last = f64::from(u8::from(mask[k]));
        let t = v - f0 - last * delta;
        for i in 0..k {
            row[i] = f64::from(u8::from(mask[i])) - last;
        }
        for i in 0..k {
            if row[i] == 0.0 {
                continue;
            }
            b[i] += w * row[i] * t;
            for j in 0..k {
                a[i * k + j] += w * row[i] * row[j];
            }
        }
    }
    let mut phi = solve_symmetric(k, &a, &b)
        .ok_or_else(|| Error::Training("Kernel SHAP normal equations are singular".into()))?;
    let rest = delta - phi.iter().sum::<f64>();
    phi.push(rest);
    Ok(explanation(phi))
}

/// Shapley values of the background-marginalized game for the predicted
/// class, summed directly over all coalitions. Exponential in the feature
/// count; meant as a reference for [`shap_explain`].
pub fn exact_shapley<P: Predictor + ?Sized>(m: &P, x: &[f64], background: &Background) -> Result<Vec<f64>> {
    check_input(m, x, background)?;
    let d = x.len();
    if d > ORACLE_MAX_FEATURES {
        return Err(Error::Size(format!(
            "exact Shapley supports at most {ORACLE_MAX_FEATURES} features, got {d}"
        )));
    }
    let class = m.predict(x);
    let n = background.rows().len() as f64;
    let values: Vec<f64> = (0..1usize << d)
        .map(|s| {
            background
                .rows()
                .iter()
                .map(|b| {
                    let z: Vec<f64> = (0..d).map(|j| if s >> j & 1 == 1 { x[j] } else { b[j] }).collect();
                    m.predict_distribution(&z)[class]
                })
                .sum::<f64>()
                / n
        })
        .collect();
    let fact = |n: usize| (1..=n).map(|i| i as f64).product::<f64>();
    let weight: Vec<f64> = (0..d).map(|s| fact(s) * fact(d - s - 1) / fact(d)).collect();
    Ok((0..d)
        .map(|i| {
            (0..1usize << d)
                .filter(|s| s >> i & 1 == 0)
                .map(|s| weight[s.count_ones() as usize] * (values[s | 1 << i] - values[s]))
                .sum()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::testing::Prob;

    fn background(d: usize, n: usize, seed: u64) -> Background {
        let mut rng = rng_from_seed(seed);
        Background::new(
            (0..n)
                .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect(),
        )
        .unwrap()
    }

    fn exact() -> ShapConfig {
        ShapConfig {
            coalition_budget: CoalitionBudget::Exact,
            seed: 0,
        }
    }

    fn smooth(x: &[f64]) -> f64 {
        let s: f64 = x.iter().enumerate().map(|(i, v)| (i as f64 - 1.5) * v).sum();
        let inter = x[0] * x.get(1).copied().unwrap_or(0.0);
        0.5 + 0.4 * (0.3 * s + inter).tanh()
    }

    #[test]
    fn linear_game_matches_closed_form() {
        let w = [0.05, -0.02, 0.03, 0.01];
        let f = Prob(4, move |x: &[f64]| {
            0.6 + x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()
        });
        let bg = background(4, 30, 1);
        let x = [0.5, -0.3, 0.9, 0.1];
        let e = shap_explain(&f, &x, &exact(), &bg).unwrap();
        for j in 0..4 {
            let expect = w[j] * (x[j] - bg.mean()[j]);
            assert!((e.attributions[j] - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn kernel_matches_oracle_and_is_additive() {
        for d in 1..=6 {
            let bg = background(d, 8, d as u64);
            let f = Prob(d, smooth);
            let x: Vec<f64> = (0..d).map(|j| 0.7 - 0.3 * j as f64).collect();
            let e = shap_explain(&f, &x, &exact(), &bg).unwrap();
            let oracle = exact_shapley(&f, &x, &bg).unwrap();
            for (a, b) in e.attributions.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-9, "d={d}: {a} vs {b}");
            }
            let total: f64 = e.attributions.iter().sum();
            let fx = f.predict_distribution(&x)[e.explained_class];
            assert!((total - (fx - e.intercept_or_base)).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetry_and_null_player() {
        let f = Prob(3, |x: &[f64]| 0.5 + 0.2 * (x[0] + x[1]).sin());
        let rows = background(3, 10, 5)
            .rows()
            .iter()
            .map(|r| vec![r[0], r[0], r[2]])
            .collect();
        let bg = Background::new(rows).unwrap();
        let x = [0.4, 0.4, -0.9];
        for phi in [
            exact_shapley(&f, &x, &bg).unwrap(),
            shap_explain(&f, &x, &exact(), &bg).unwrap().attributions,
        ] {
            assert!((phi[0] - phi[1]).abs() < 1e-9);
            assert!(phi[2].abs() < 1e-9);
        }
    }

    #[test]
    fn constant_model_and_sampled_additivity() {
        let bg = background(20, 5, 2);
        let x = vec![0.2; 20];
        let e = shap_explain(&Prob(20, |_: &[f64]| 0.3), &x, &ShapConfig::default(), &bg).unwrap();
        assert!(e.attributions.iter().all(|p| p.abs() < 1e-12));
        let f = Prob(20, smooth);
        let cfg = ShapConfig {
            coalition_budget: CoalitionBudget::Sampled(300),
            seed: 4,
        };
        let e = shap_explain(&f, &x, &cfg, &bg).unwrap();
        let fx = f.predict_distribution(&x)[e.explained_class];
        assert!((e.attributions.iter().sum::<f64>() - (fx - e.intercept_or_base)).abs() < 1e-9);
        assert_eq!(e, shap_explain(&f, &x, &cfg, &bg).unwrap());
    }

    #[test]
    fn size_limits() {
        let bg = background(17, 2, 3);
        let x = vec![0.0; 17];
        assert!(matches!(
            shap_explain(&Prob(17, smooth), &x, &exact(), &bg),
            Err(Error::Size(_))
        ));
        let bg = background(11, 2, 3);
        assert!(matches!(
            exact_shapley(&Prob(11, smooth), &[0.0; 11], &bg),
            Err(Error::Size(_))
        ));
    }

    #[test]
    fn budget_serde() {
        let c: ShapConfig = serde_json::from_str(r#"{"coalition_budget":"exact"}"#).unwrap();
        assert_eq!(c.coalition_budget, CoalitionBudget::Exact);
        let c: ShapConfig = serde_json::from_str(r#"{"coalition_budget":64}"#).unwrap();
        assert_eq!(c.coalition_budget, CoalitionBudget::Sampled(64));
        assert!(serde_json::from_str::<ShapConfig>(r#"{"coalition_budget":0}"#).is_err());
        assert!(serde_json::from_str::<ShapConfig>(r#"{"coalition_budget":"all"}"#).is_err());
        assert_eq!(serde_json::to_string(&CoalitionBudget::Exact).unwrap(), "\"exact\"");
    }
}
