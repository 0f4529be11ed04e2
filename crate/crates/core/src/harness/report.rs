use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One distance measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Row {
    #[serde(rename = "N")]
    pub n: usize,
    pub eps: f64,
    pub seed: u64,
    pub t: f64,
    pub d1: f64,
}

/// Seed statistics of one (N, ε) cell; `d1` values are per-seed sups over sample times
/// unless `t` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub label: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub eps: f64,
    pub t: Option<f64>,
    pub zeta: Option<f64>,
    pub kernel_l1_diff: Option<f64>,
    pub mean: f64,
    pub stderr: f64,
    pub d1: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        }
    }
}

/// Rows, summaries and verdicts of one experiment.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RateReport {
    pub experiment: String,
    pub config_hash: String,
    pub rows: Vec<Row>,
    pub groups: Vec<Group>,
    pub slopes: BTreeMap<String, f64>,
    /// Reported quantities that do not gate the verdict.
    pub diagnostics: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    /// Increment-stream digest per seed, shared by every run of that seed.
    pub checksums: BTreeMap<u64, Vec<String>>,
}

/// JSON form of the summary: everything but the rows.
#[derive(Serialize)]
struct Summary<'a> {
    experiment: &'a str,
    config_hash: &'a str,
    passed: bool,
    groups: &'a [Group],
    slopes: &'a BTreeMap<String, f64>,
    diagnostics: &'a BTreeMap<String, f64>,
    checks: &'a [Check],
    checksums: &'a BTreeMap<u64, Vec<String>>,
}

impl RateReport {
    pub fn new(experiment: &str, config_hash: String) -> Self {
        RateReport {
            experiment: experiment.to_string(),
            config_hash,
            ..Default::default()
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["N", "eps", "seed", "t", "d1"])?;
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                r.eps.to_string(),
                r.seed.to_string(),
                r.t.to_string(),
                r.d1.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        let s = Summary {
            experiment: &self.experiment,
            config_hash: &self.config_hash,
            passed: self.passed(),
            groups: &self.groups,
            slopes: &self.slopes,
            diagnostics: &self.diagnostics,
            checks: &self.checks,
            checksums: &self.checksums,
        };
        serde_json::to_writer_pretty(&mut w, &s)?;
        writeln!(w)?;
        Ok(())
    }

    /// Write `<experiment>.csv` and `<experiment>.json` into `dir`.
    pub fn emit(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let csv_path = dir.join(format!("{}.csv", self.experiment));
        let json_path = dir.join(format!("{}.json", self.experiment));
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(&csv_path)?))?;
        self.write_json(std::io::BufWriter::new(std::fs::File::create(&json_path)?))?;
        Ok((csv_path, json_path))
    }

    /// One line per check.
    pub fn verdict_lines(&self) -> Vec<String> {
        self.checks
            .iter()
            .map(|c| {
                format!(
                    "{} {}: {} ({})",
                    self.experiment,
                    c.name,
                    if c.passed { "PASS" } else { "FAIL" },
                    c.detail
                )
            })
            .collect()
    }
}
