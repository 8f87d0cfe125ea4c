use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::SweepConfig;
use crate::error::{Error, Result};

/// One (measure, fraction, K, repetition) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub measure: String,
    pub fraction: f64,
    pub k: usize,
    pub rep: usize,
    /// `NaN` when the cell failed.
    pub mae: f64,
    pub coverage: f64,
    pub wall_time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

/// Mean over repetitions of one (measure, fraction, K).
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub measure: String,
    pub fraction: f64,
    pub k: usize,
    pub mae: f64,
    pub coverage: f64,
    pub repetitions: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub config: SweepConfig,
    /// Set when PMD values came from truncated preferences or the entropic solver.
    pub approximate: bool,
    pub rows: Vec<EvalRow>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

impl EvalReport {
    fn cells<'a>(&'a self, measure: &'a str, fraction: f64, k: usize) -> impl Iterator<Item = &'a EvalRow> {
        self.rows
            .iter()
            .filter(move |r| r.measure == measure && r.fraction == fraction && r.k == k)
    }

    /// Mean MAE over repetitions; `NaN` if any repetition failed.
    pub fn mean_mae(&self, measure: &str, fraction: f64, k: usize) -> Option<f64> {
        let mut rows = self.cells(measure, fraction, k).peekable();
        rows.peek()?;
        Some(mean(rows.map(|r| r.mae)))
    }

    pub fn mean_coverage(&self, measure: &str, fraction: f64, k: usize) -> Option<f64> {
        let mut rows = self.cells(measure, fraction, k).peekable();
        rows.peek()?;
        Some(mean(rows.map(|r| r.coverage)))
    }

    fn measure_keys(&self) -> Vec<String> {
        let mut keys: Vec<String> = Vec::new();
        for r in &self.rows {
            if !keys.contains(&r.measure) {
                keys.push(r.measure.clone());
            }
        }
        keys
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut out = Vec::new();
        for measure in self.measure_keys() {
            for &fraction in &self.config.fractions {
                for &k in &self.config.ks {
                    let reps = self.cells(&measure, fraction, k).count();
                    if reps == 0 {
                        continue;
                    }
                    out.push(SummaryRow {
                        measure: measure.clone(),
                        fraction,
                        k,
                        mae: self.mean_mae(&measure, fraction, k).unwrap_or(f64::NAN),
                        coverage: self.mean_coverage(&measure, fraction, k).unwrap_or(f64::NAN),
                        repetitions: reps,
                    });
                }
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("measure,fraction,k,rep,mae,coverage,wall_time_s\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{:.6}",
                r.measure, r.fraction, r.k, r.rep, r.mae, r.coverage, r.wall_time_s
            );
        }
        out
    }

    /// Rows nested by measure, with the configuration echoed.
    pub fn to_json(&self) -> serde_json::Value {
        let mut by_measure: BTreeMap<String, Vec<serde_json::Value>> = BTreeMap::new();
        for r in &self.rows {
            let mut cell = json!({
                "fraction": r.fraction,
                "k": r.k,
                "rep": r.rep,
                "mae": r.mae,
                "coverage": r.coverage,
                "wall_time_s": r.wall_time_s,
            });
            if let Some(e) = &r.error {
                cell["error"] = json!(e);
            }
            by_measure.entry(r.measure.clone()).or_default().push(cell);
        }
        json!({
            "seed": self.config.seed,
            "approximate": self.approximate,
            "config": self.config,
            "measures": by_measure,
        })
    }

    /// The K used for the sparsity plot: 40 when swept, else the first.
    fn plot_k(&self) -> usize {
        if self.config.ks.contains(&40) {
            40
        } else {
            self.config.ks[0]
        }
    }

    /// The fraction used for the K plot: 0.8 when swept, else the first.
    fn plot_fraction(&self) -> f64 {
        if self.config.fractions.contains(&0.8) {
            0.8
        } else {
            self.config.fractions[0]
        }
    }

    fn wide_csv(&self, x_name: &str, xs: Vec<(String, f64, usize)>) -> String {
        let keys = self.measure_keys();
        let mut out = String::from(x_name);
        for k in &keys {
            out.push(',');
            out.push_str(k);
        }
        out.push('\n');
        for (label, fraction, k) in xs {
            out.push_str(&label);
            for key in &keys {
                out.push(',');
                if let Some(m) = self.mean_mae(key, fraction, k) {
                    let _ = write!(out, "{m}");
                }
            }
            out.push('\n');
        }
        out
    }

    /// Mean MAE against train fraction at a fixed K, one column per measure.
    pub fn sparsity_csv(&self) -> String {
        let k = self.plot_k();
        let xs = self
            .config
            .fractions
            .iter()
            .map(|&f| (f.to_string(), f, k))
            .collect();
        self.wide_csv("fraction", xs)
    }

    /// Mean MAE against K at a fixed train fraction, one column per measure.
    pub fn ksweep_csv(&self) -> String {
        let f = self.plot_fraction();
        let xs = self.config.ks.iter().map(|&k| (k.to_string(), f, k)).collect();
        self.wide_csv("k", xs)
    }

    pub fn render_summary(&self) -> String {
        let mut out = String::new();
        if self.approximate {
            out.push_str("(approximate: truncated preferences or entropic solver)\n");
        }
        let _ = writeln!(
            out,
            "{:<10} {:>8} {:>4} {:>8} {:>9} {:>5}",
            "measure", "fraction", "k", "mae", "coverage", "reps"
        );
        for s in self.summary() {
            let _ = writeln!(
                out,
                "{:<10} {:>8} {:>4} {:>8.4} {:>9.4} {:>5}",
                s.measure, s.fraction, s.k, s.mae, s.coverage, s.repetitions
            );
        }
        for r in self.rows.iter().filter(|r| r.error.is_some()) {
            let _ = writeln!(
                out,
                "failed: {} fraction {} k {} rep {}: {}",
                r.measure,
                r.fraction,
                r.k,
                r.rep,
                r.error.as_deref().unwrap_or_default()
            );
        }
        out
    }

    /// Writes `report.csv`, `report.json`, `fig-sparsity.csv` and `fig-ksweep.csv`.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let json = serde_json::to_string_pretty(&self.to_json())
            .map_err(|e| Error::Config(format!("cannot serialize report: {e}")))?;
        let files = [
            ("report.csv", self.to_csv()),
            ("report.json", json),
            ("fig-sparsity.csv", self.sparsity_csv()),
            ("fig-ksweep.csv", self.ksweep_csv()),
        ];
        let mut written = Vec::new();
        for (name, body) in files {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(measure: &str, fraction: f64, k: usize, rep: usize, mae: f64) -> EvalRow {
        EvalRow {
            measure: measure.into(),
            fraction,
            k,
            rep,
            mae,
            coverage: 1.0,
            wall_time_s: 0.0,
            error: None,
        }
    }

    #[test]
    fn plots_average_repetitions() {
        let config = SweepConfig {
            measures: vec!["pmd".into(), "cos".into()],
            fractions: vec![0.8, 0.1],
            ks: vec![5, 40],
            repetitions: 2,
            ..SweepConfig::default()
        };
        let mut rows = Vec::new();
        for m in ["pmd", "cos"] {
            for f in [0.8, 0.1] {
                for k in [5, 40] {
                    for rep in 0..2 {
                        rows.push(row(m, f, k, rep, f + k as f64 + rep as f64));
                    }
                }
            }
        }
        let report = EvalReport {
            config,
            approximate: false,
            rows,
        };
        assert_eq!(report.mean_mae("pmd", 0.1, 40), Some(40.6));
        let sparsity = report.sparsity_csv();
        assert_eq!(sparsity.lines().next(), Some("fraction,pmd,cos"));
        assert_eq!(sparsity.lines().count(), 3);
        assert!(report.ksweep_csv().starts_with("k,pmd,cos\n5,"));
        assert_eq!(report.summary().len(), 8);
        assert_eq!(report.to_csv().lines().count(), 17);
        let json = report.to_json();
        assert_eq!(json["measures"]["cos"].as_array().unwrap().len(), 8);
    }
}
