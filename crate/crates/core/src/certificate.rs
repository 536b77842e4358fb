//! Pass/fail records for every inequality the pipeline asserts.
//!
//! A [`CertificateReport`] groups the individual checks behind one registry
//! entry. Each registry entry carries the equation tag it certifies. Margins
//! are signed so that `margin >= 0` means the inequality holds.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Location {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
}

impl Location {
    pub fn r(r: f64) -> Self {
        Location { r: Some(r), ..Default::default() }
    }
    pub fn ry(r: f64, y: f64) -> Self {
        Location { r: Some(r), y: Some(y), t: None }
    }
    pub fn y(y: f64) -> Self {
        Location { y: Some(y), ..Default::default() }
    }
}

/// JSON has no infinities or NaN; write them as strings so ledgers round-trip.
pub mod lossless_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&v.to_string())
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    /// Informational checks are reported but do not decide the report.
    pub gating: bool,
    #[serde(with = "lossless_f64")]
    pub worst_margin: f64,
    pub location: Option<Location>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    /// Gating check that passes iff `margin >= 0`.
    pub fn margin(name: impl Into<String>, margin: f64, location: Option<Location>) -> Self {
        Check {
            name: name.into(),
            pass: margin >= 0.0,
            gating: true,
            worst_margin: margin,
            location,
            note: None,
        }
    }

    /// Gating check with strict inequality (`margin > 0`).
    pub fn strict(name: impl Into<String>, margin: f64, location: Option<Location>) -> Self {
        let mut c = Check::margin(name, margin, location);
        c.pass = margin > 0.0;
        c
    }

    pub fn info(name: impl Into<String>, value: f64, location: Option<Location>) -> Self {
        Check {
            name: name.into(),
            pass: value.is_finite(),
            gating: false,
            worst_margin: value,
            location,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn non_gating(mut self) -> Self {
        self.gating = false;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub name: String,
    pub anchor: String,
    pub checks: Vec<Check>,
    pub runtime_s: f64,
}

impl CertificateReport {
    pub fn new(cert: Cert) -> Self {
        CertificateReport {
            name: cert.name().to_string(),
            anchor: cert.anchor().to_string(),
            checks: Vec::new(),
            runtime_s: 0.0,
        }
    }

    pub fn push(&mut self, check: Check) -> &mut Self {
        self.checks.push(check);
        self
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass || !c.gating)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| c.gating && !c.pass).collect()
    }

    /// The check that decides the summary line: first failure, else smallest margin.
    pub fn decisive(&self) -> Option<&Check> {
        self.failures().into_iter().next().or_else(|| {
            self.checks
                .iter()
                .filter(|c| c.gating)
                .min_by(|a, b| a.worst_margin.total_cmp(&b.worst_margin))
        })
    }
}

/// Running minimum of a margin together with where it occurred.
#[derive(Clone, Debug)]
pub struct Worst {
    pub margin: f64,
    pub location: Option<Location>,
}

impl Default for Worst {
    fn default() -> Self {
        Worst { margin: f64::INFINITY, location: None }
    }
}

impl Worst {
    pub fn update(&mut self, margin: f64, location: impl FnOnce() -> Location) {
        // NaN margins must surface as failures.
        if margin < self.margin || (margin.is_nan() && !self.margin.is_nan()) {
            self.margin = margin;
            self.location = Some(location());
        }
    }

    pub fn merge(mut self, other: Worst) -> Worst {
        if other.margin < self.margin || (other.margin.is_nan() && !self.margin.is_nan()) {
            self.margin = other.margin;
            self.location = other.location;
        }
        self
    }

    pub fn check(self, name: &str) -> Check {
        Check::margin(name, self.margin, self.location)
    }

    pub fn strict(self, name: &str) -> Check {
        Check::strict(name, self.margin, self.location)
    }
}

macro_rules! registry {
    ($($variant:ident => $name:literal, $tag:literal;)*) => {
        /// Fixed registry of certificates produced by a full run.
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
        pub enum Cert { $($variant),* }

        impl Cert {
            pub const ALL: &'static [Cert] = &[$(Cert::$variant),*];
            pub fn name(self) -> &'static str {
                match self { $(Cert::$variant => $name),* }
            }
            pub fn anchor(self) -> &'static str {
                match self { $(Cert::$variant => $tag),* }
            }
        }
    };
}

registry! {
    ProfileProperties => "profile.properties", "vph-props";
    ProfileTildeProperties => "profile_tilde.properties", "b";
    ProfileAsymptotics => "profile.asymptotics", "vph-props";
    ProfileRescaling => "profile.rescaling", "vtau-r";
    SupersolutionIdentity => "profile.supersolution_identity", "vph-super";
    Ordering => "profile.ordering", "pwr-a";
    GapBeta => "gap.h_beta", "h-beta";
    GapComparison => "gap.comparison", "h-comp";
    BarrierSupersolution => "barrier.supersolution", "super-ve";
    BarrierIngredients => "barrier.residual_bound", "Mv-bd";
    BarrierMonotonicity => "barrier.monotonicity", "mon-v";
    BarrierGap => "barrier.gap", "ved-bd";
    ProofConstants => "barrier.proof_constants", "Mv-bd";
    SolverOrdering => "solver.ordering", "ut-bds";
    SolverExcess => "solver.excess_bound", "ut-r-bd";
    SolverRatio => "solver.ratio", "ratio";
    SolverConditions => "solver.conditions", "uted-conds";
    C2Closeness => "solver.c2_closeness", "c2-close";
    DerivativeDecay => "solver.derivative_decay", "deriv-est";
    GlueLimit => "glue.limit", "props-u10";
    GlueProperties => "glue.properties", "props-u";
    GlueExtension => "glue.extension", "ext-u";
    MetricNonDegeneracy => "metric.non_degeneracy", "non-deg";
    MetricSeams => "metric.seams", "g-f";
    MetricMinimality => "metric.minimality", "f-area";
    MetricDecay => "metric.decay", "bds-df";
}

impl Cert {
    pub fn from_name(name: &str) -> Option<Cert> {
        Cert::ALL.iter().copied().find(|c| c.name() == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_names_unique() {
        let mut names: Vec<_> = Cert::ALL.iter().map(|c| c.name()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), Cert::ALL.len());
        for c in Cert::ALL {
            assert_eq!(Cert::from_name(c.name()), Some(*c));
        }
    }

    #[test]
    fn non_finite_margins_round_trip() {
        for v in [f64::INFINITY, f64::NEG_INFINITY, 1.5] {
            let c = Check::info("x", v, None);
            let back: Check = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
            assert_eq!(back, c);
        }
        let c = Check::info("x", f64::NAN, None);
        let back: Check = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert!(back.worst_margin.is_nan());
    }

    #[test]
    fn info_checks_do_not_gate() {
        let mut rep = CertificateReport::new(Cert::GapBeta);
        rep.push(Check::margin("a", 0.5, None));
        rep.push(Check::margin("b", -1.0, None).non_gating());
        assert!(rep.pass());
        rep.push(Check::strict("c", 0.0, None));
        assert!(!rep.pass());
        assert_eq!(rep.decisive().unwrap().name, "c");
    }

    #[test]
    fn worst_keeps_nan() {
        let mut w = Worst::default();
        w.update(1.0, || Location::r(1.0));
        w.update(f64::NAN, || Location::r(2.0));
        w.update(-5.0, || Location::r(3.0));
        assert!(w.margin.is_nan());
        assert!(!w.check("x").pass);
    }
}
