use std::fmt;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ExperimentConfig;
use crate::ldp::PrivacyBudget;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ml,
    Threshold,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Ml => "ml",
            Method::Threshold => "threshold",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub epsilon: PrivacyBudget,
    pub trial: usize,
    pub method: Method,
    pub accuracy: Option<f64>,
    pub attack_power: Option<f64>,
    /// `ok`, or `failed: <reason>`.
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRuntime {
    pub trial: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    /// Ordered by ε (grid order), trial, then method.
    pub rows: Vec<ResultRow>,
    pub runtimes: Vec<TrialRuntime>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub epsilon: PrivacyBudget,
    pub method: Method,
    /// Trials that produced an accuracy.
    pub trials: usize,
    pub accuracy_mean: Option<f64>,
    pub accuracy_sd: Option<f64>,
    pub attack_power_mean: Option<f64>,
    pub attack_power_sd: Option<f64>,
}

/// Mean and sample standard deviation (0 for a single value).
fn mean_sd(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (Some(mean), Some(sd))
}

impl ExperimentReport {
    /// One row per (ε, method) in first-appearance order.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut keys: Vec<(PrivacyBudget, Method)> = Vec::new();
        for r in &self.rows {
            if !keys.contains(&(r.epsilon, r.method)) {
                keys.push((r.epsilon, r.method));
            }
        }
        keys.into_iter()
            .map(|(epsilon, method)| {
                let rows: Vec<&ResultRow> = self
                    .rows
                    .iter()
                    .filter(|r| r.epsilon == epsilon && r.method == method)
                    .collect();
                let acc: Vec<f64> = rows.iter().filter_map(|r| r.accuracy).collect();
                let power: Vec<f64> = rows.iter().filter_map(|r| r.attack_power).collect();
                let (accuracy_mean, accuracy_sd) = mean_sd(&acc);
                let (attack_power_mean, attack_power_sd) = mean_sd(&power);
                SummaryRow {
                    epsilon,
                    method,
                    trials: acc.len(),
                    accuracy_mean,
                    accuracy_sd,
                    attack_power_mean,
                    attack_power_sd,
                }
            })
            .collect()
    }

    pub fn mean_accuracy(&self, epsilon: PrivacyBudget, method: Method) -> Option<f64> {
        self.summary()
            .into_iter()
            .find(|s| s.epsilon == epsilon && s.method == method)
            .and_then(|s| s.accuracy_mean)
    }

    pub fn mean_attack_power(&self, epsilon: PrivacyBudget) -> Option<f64> {
        self.summary()
            .into_iter()
            .find(|s| s.epsilon == epsilon)
            .and_then(|s| s.attack_power_mean)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

pub fn results_csv(r: &ExperimentReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["epsilon", "trial", "method", "accuracy", "attack_power", "status"])?;
    for row in &r.rows {
        w.write_record([
            row.epsilon.to_string(),
            row.trial.to_string(),
            row.method.to_string(),
            opt(row.accuracy),
            opt(row.attack_power),
            row.status.clone(),
        ])?;
    }
    w.into_inner().map_err(|e| Error::io("results.csv", e.into_error()))
}

pub fn summary_csv(summary: &[SummaryRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "epsilon",
        "method",
        "trials",
        "accuracy_mean",
        "accuracy_sd",
        "attack_power_mean",
        "attack_power_sd",
    ])?;
    for s in summary {
        w.write_record([
            s.epsilon.to_string(),
            s.method.to_string(),
            s.trials.to_string(),
            opt(s.accuracy_mean),
            opt(s.accuracy_sd),
            opt(s.attack_power_mean),
            opt(s.attack_power_sd),
        ])?;
    }
    w.into_inner().map_err(|e| Error::io("summary.csv", e.into_error()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Accuracy,
    AttackPower,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 130.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Legend name and per-ε `(mean, sd)` of one chart line.
type Series = (String, Vec<Option<(f64, f64)>>);

/// Line chart of a summary metric over the ε grid, as standalone SVG.
/// The ε axis is categorical in grid order; whiskers show ±1 sd.
pub fn render_chart(summary: &[SummaryRow], metric: Metric) -> String {
    let mut eps: Vec<PrivacyBudget> = Vec::new();
    for s in summary {
        if !eps.contains(&s.epsilon) {
            eps.push(s.epsilon);
        }
    }
    let series: Vec<Series> = match metric {
        Metric::Accuracy => [Method::Ml, Method::Threshold]
            .into_iter()
            .map(|m| {
                let points = eps
                    .iter()
                    .map(|e| {
                        summary
                            .iter()
                            .find(|s| s.epsilon == *e && s.method == m)
                            .and_then(|s| Some((s.accuracy_mean?, s.accuracy_sd.unwrap_or(0.0))))
                    })
                    .collect();
                (m.to_string(), points)
            })
            .collect(),
        Metric::AttackPower => {
            let points = eps
                .iter()
                .map(|e| {
                    summary
                        .iter()
                        .find(|s| s.epsilon == *e)
                        .and_then(|s| Some((s.attack_power_mean?, s.attack_power_sd.unwrap_or(0.0))))
                })
                .collect();
            vec![("attack".to_string(), points)]
        }
    };
    let (title, ylabel) = match metric {
        Metric::Accuracy => ("Verification accuracy", "accuracy"),
        Metric::AttackPower => ("Membership inference power", "power"),
    };
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x_at = |i: usize| {
        if eps.len() <= 1 {
            LEFT + plot_w / 2.0
        } else {
            LEFT + plot_w * i as f64 / (eps.len() - 1) as f64
        }
    };
    let y_at = |v: f64| TOP + plot_h * (1.0 - v.clamp(0.0, 1.0));
    let colors = ["#1f77b4", "#d62728"];

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{title}</text>"#,
        LEFT + plot_w / 2.0
    );
    for k in 0..=5 {
        let v = k as f64 / 5.0;
        let y = y_at(v);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##,
            LEFT + plot_w
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.1}</text>"#,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="black"/>"#
    );
    for (i, e) in eps.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            x_at(i),
            TOP + plot_h + 18.0,
            escape(&e.to_string())
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">epsilon</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{ylabel}</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );
    for (k, (name, points)) in series.iter().enumerate() {
        let color = colors[k % colors.len()];
        let coords: Vec<String> = points
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.map(|(m, _)| format!("{:.2},{:.2}", x_at(i), y_at(m))))
            .collect();
        if coords.len() > 1 {
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                coords.join(" ")
            );
        }
        for (i, p) in points.iter().enumerate() {
            let Some((m, sd)) = p else { continue };
            let x = x_at(i);
            if *sd > 0.0 {
                let _ = writeln!(
                    s,
                    r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{color}"/>"#,
                    y_at(m - sd),
                    y_at(m + sd)
                );
            }
            let _ = writeln!(
                s,
                r#"<circle cx="{x:.2}" cy="{:.2}" r="3.5" fill="{color}"/>"#,
                y_at(*m)
            );
        }
        let ly = TOP + 10.0 + 20.0 * k as f64;
        let lx = LEFT + plot_w + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 26.0,
            ly + 4.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes `results.csv`, `summary.csv` and `report.json` (config echo and
/// runtimes) into `dir`, plus the two charts unless the report is empty.
pub fn emit_report(r: &ExperimentReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let summary = r.summary();
    write(dir, "results.csv", &results_csv(r)?)?;
    write(dir, "summary.csv", &summary_csv(&summary)?)?;
    write(dir, "report.json", serde_json::to_string_pretty(r)?.as_bytes())?;
    if !summary.is_empty() {
        write(
            dir,
            "accuracy_vs_epsilon.svg",
            render_chart(&summary, Metric::Accuracy).as_bytes(),
        )?;
        write(
            dir,
            "attack_power_vs_epsilon.svg",
            render_chart(&summary, Metric::AttackPower).as_bytes(),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(n_eps: usize, trials: usize) -> ExperimentReport {
        let mut rows = Vec::new();
        for e in 0..n_eps {
            for t in 0..trials {
                for method in [Method::Ml, Method::Threshold] {
                    rows.push(ResultRow {
                        epsilon: if e + 1 == n_eps {
                            PrivacyBudget::Infinite
                        } else {
                            PrivacyBudget::Finite(10f64.powi(e as i32 - 1))
                        },
                        trial: t,
                        method,
                        accuracy: Some(0.1 * (e + t) as f64),
                        attack_power: Some(0.5),
                        status: "ok".into(),
                    });
                }
            }
        }
        ExperimentReport {
            config: ExperimentConfig::default(),
            rows,
            runtimes: Vec::new(),
        }
    }

    #[test]
    fn summary_statistics() {
        let s = report(5, 5).summary();
        assert_eq!(s.len(), 10);
        assert_eq!(s[0].trials, 5);
        assert!((s[0].accuracy_mean.unwrap() - 0.2).abs() < 1e-12);
        let sd = (0.01f64 * 10.0 / 4.0).sqrt();
        assert!((s[0].accuracy_sd.unwrap() - sd).abs() < 1e-12);
    }

    #[test]
    fn emitted_files() {
        let dir = tempfile::tempdir().unwrap();
        let r = report(5, 5);
        emit_report(&r, dir.path()).unwrap();
        let results = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
        assert_eq!(results.lines().count(), 51);
        assert!(results.lines().nth(41).unwrap().starts_with("inf,"));
        let first = std::fs::read(dir.path().join("accuracy_vs_epsilon.svg")).unwrap();
        emit_report(&r, dir.path()).unwrap();
        assert_eq!(
            first,
            std::fs::read(dir.path().join("accuracy_vs_epsilon.svg")).unwrap()
        );
        assert!(String::from_utf8(first).unwrap().contains("<polyline"));

        let empty = tempfile::tempdir().unwrap();
        emit_report(&report(0, 0), empty.path()).unwrap();
        let results = std::fs::read_to_string(empty.path().join("results.csv")).unwrap();
        assert_eq!(results, "epsilon,trial,method,accuracy,attack_power,status\n");
        assert_eq!(
            std::fs::read_to_string(empty.path().join("summary.csv"))
                .unwrap()
                .lines()
                .count(),
            1
        );
        assert!(!empty.path().join("accuracy_vs_epsilon.svg").exists());
    }
}
