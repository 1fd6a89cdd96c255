//! Checks, the key-value report and file output.

use std::fmt::Display;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};

/// One invariant check aggregated over stages.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub total: usize,
    pub failed: Vec<String>,
}

impl Check {
    pub fn new(name: &str) -> Self {
        Check {
            name: name.to_string(),
            total: 0,
            failed: Vec::new(),
        }
    }

    pub fn record(&mut self, pass: bool, what: impl FnOnce() -> String) {
        self.total += 1;
        if !pass {
            self.failed.push(what());
        }
    }

    pub fn pass(&self) -> bool {
        self.failed.is_empty()
    }
}

/// Flat `key = value` report.
#[derive(Clone, Debug, Default)]
pub struct Report {
    lines: Vec<(String, String)>,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn put(&mut self, key: impl Into<String>, value: impl Display) {
        self.lines.push((key.into(), value.to_string()));
    }

    pub fn check(&mut self, c: Check) {
        if c.total > 0 {
            self.checks.push(c);
        }
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(Check::pass)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.lines
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.lines {
            s.push_str(&format!("{k} = {v}\n"));
        }
        for c in &self.checks {
            let status = if c.pass() { "PASS" } else { "FAIL" };
            s.push_str(&format!(
                "check.{} = {status} ({}/{})\n",
                c.name,
                c.total - c.failed.len(),
                c.total
            ));
            for (i, f) in c.failed.iter().enumerate().take(20) {
                s.push_str(&format!("check.{}.failure.{i} = {f}\n", c.name));
            }
        }
        s.push_str(&format!(
            "result = {}\n",
            if self.pass() { "PASS" } else { "FAIL" }
        ));
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_file(dir, "report.txt", &self.render())
    }
}

pub fn write_file(dir: &Path, name: &str, content: &str) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, content).with_context(|| format!("writing {}", path.display()))
}

/// CSV text from a header and rows of already formatted cells.
pub fn csv_text(header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    Ok(String::from_utf8(
        w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?,
    )?)
}

/// Shortest round-trip form, `-0` printed as `0`; empty for missing values.
pub fn cell(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| (v + 0.0).to_string())
}
