//! Consolidated run ledger: one entry per registry certificate, in registry order.

use serde::{Deserialize, Serialize};

use crate::certificate::{Cert, CertificateReport, Check, Location};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub name: String,
    pub anchor: String,
    pub pass: bool,
    #[serde(with = "crate::certificate::lossless_f64")]
    pub worst_margin: f64,
    pub location: Option<Location>,
    pub runtime_s: f64,
    pub checks: Vec<Check>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CertificateLedger {
    pub stage: String,
    pub pass: bool,
    pub entries: Vec<LedgerEntry>,
    pub warnings: Vec<String>,
}

impl CertificateLedger {
    pub fn new(stage: &str) -> Self {
        CertificateLedger { stage: stage.to_string(), pass: true, entries: Vec::new(), warnings: Vec::new() }
    }

    /// Merge a report into the entry of the same name, appending its checks.
    pub fn add(&mut self, rep: CertificateReport) {
        match self.entries.iter_mut().find(|e| e.name == rep.name) {
            Some(e) => {
                e.checks.extend(rep.checks);
                e.runtime_s += rep.runtime_s;
            }
            None => self.entries.push(LedgerEntry {
                name: rep.name,
                anchor: rep.anchor,
                pass: true,
                worst_margin: f64::INFINITY,
                location: None,
                runtime_s: rep.runtime_s,
                checks: rep.checks,
            }),
        }
        self.refresh();
    }

    pub fn add_all(&mut self, reps: impl IntoIterator<Item = CertificateReport>) {
        for r in reps {
            self.add(r);
        }
    }

    /// Spread a stage's wall time evenly over the reports it produced.
    pub fn add_timed(&mut self, mut reps: Vec<CertificateReport>, seconds: f64) {
        let n = reps.len().max(1) as f64;
        for r in &mut reps {
            r.runtime_s = seconds / n;
        }
        self.add_all(reps);
    }

    fn refresh(&mut self) {
        let order = |name: &str| Cert::ALL.iter().position(|c| c.name() == name).unwrap_or(usize::MAX);
        self.entries.sort_by_key(|e| order(&e.name));
        for e in &mut self.entries {
            let fails: Vec<&Check> = e.checks.iter().filter(|c| c.gating && !c.pass).collect();
            e.pass = fails.is_empty();
            let decisive = fails.first().copied().or_else(|| e.checks.iter().filter(|c| c.gating).min_by(|a, b| a.worst_margin.total_cmp(&b.worst_margin)));
            e.worst_margin = decisive.map_or(f64::INFINITY, |c| c.worst_margin);
            e.location = decisive.and_then(|c| c.location.clone());
        }
        self.pass = self.entries.iter().all(|e| e.pass);
    }

    pub fn load(path: &std::path::Path) -> crate::error::Result<Self> {
        if !path.exists() {
            return Err(crate::error::Error::MissingArtifacts(vec![path.display().to_string()]));
        }
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn entry(&self, name: &str) -> Option<&LedgerEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Registry entries with no report in this ledger.
    pub fn missing(&self) -> Vec<&'static str> {
        Cert::ALL.iter().map(|c| c.name()).filter(|n| self.entry(n).is_none()).collect()
    }

    pub fn summary_table(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        for e in &self.entries {
            let worst = if e.worst_margin.is_finite() { format!("{:+.3e}", e.worst_margin + 0.0) } else { "-".to_string() };
            writeln!(s, "{:<5} {:<32} {:<11} {:>11} {:>8.2}s", if e.pass { "PASS" } else { "FAIL" }, e.name, e.anchor, worst, e.runtime_s).unwrap();
            for c in e.checks.iter().filter(|c| c.gating && !c.pass) {
                writeln!(s, "      failed: {} (margin {:e}{})", c.name, c.worst_margin, c.location.as_ref().map_or(String::new(), |l| format!(", at {l:?}"))).unwrap();
            }
        }
        for w in &self.warnings {
            writeln!(s, "warning: {w}").unwrap();
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merges_by_name_and_orders_by_registry() {
        let mut l = CertificateLedger::new("test");
        let mut a = CertificateReport::new(Cert::MetricDecay);
        a.push(Check::margin("x", 1.0, None));
        let mut b = CertificateReport::new(Cert::ProfileProperties);
        b.push(Check::margin("y", 0.5, None));
        let mut c = CertificateReport::new(Cert::MetricDecay);
        c.push(Check::margin("z", -1.0, None));
        l.add_all([a, b, c]);
        assert_eq!(l.entries.len(), 2);
        assert_eq!(l.entries[0].name, "profile.properties");
        assert!(!l.pass);
        assert_eq!(l.entries[1].worst_margin, -1.0);
        assert_eq!(l.missing().len(), Cert::ALL.len() - 2);
    }
}
