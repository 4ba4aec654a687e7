//! Check outcome records and their line-oriented text form.
//!
//! Margins are signed: the worst observed value of (lhs - rhs) for an
//! inequality claim lhs <= rhs, so margin <= tolerance means pass. The
//! format is one line per check, stable for CI diffing:
//! `check=<name> passed=<bool> margin=<float> witness=<...> seed=<int>`

use std::fmt;

/// Location where a check's margin is worst. Rendered without spaces.
#[derive(Debug, Clone, PartialEq)]
pub enum Witness {
    None,
    Node(usize),
    Edge { src: usize, input: usize, dst: usize },
    Sample { x: Vec<f64>, u: Vec<f64> },
    /// Check was vacuous; the payload says which assumption failed.
    Precondition(String),
}

fn join(vals: &[f64]) -> String {
    vals.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Witness::None => write!(f, "none"),
            Witness::Node(n) => write!(f, "node:{n}"),
            Witness::Edge { src, input, dst } => write!(f, "edge:{src}-{input}-{dst}"),
            Witness::Sample { x, u } => {
                if u.is_empty() {
                    write!(f, "sample:{}", join(x))
                } else {
                    write!(f, "sample:{};{}", join(x), join(u))
                }
            }
            Witness::Precondition(why) => write!(f, "precondition:{why}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: &'static str,
    pub passed: bool,
    pub margin: f64,
    pub tolerance: f64,
    pub witness: Witness,
    pub seed: u64,
}

impl CheckReport {
    /// passed is derived, never set independently of the margin.
    pub fn from_margin(name: &'static str, margin: f64, tolerance: f64, witness: Witness) -> Self {
        // signed zero would leak "-0" into rendered reports
        let margin = if margin == 0.0 { 0.0 } else { margin };
        CheckReport {
            name,
            passed: margin <= tolerance,
            margin,
            tolerance,
            witness,
            seed: 0,
        }
    }

    /// Vacuously passing report for an unmet assumption.
    pub fn vacuous(name: &'static str, tolerance: f64, why: impl Into<String>) -> Self {
        CheckReport {
            name,
            passed: true,
            margin: 0.0,
            tolerance,
            witness: Witness::Precondition(why.into()),
            seed: 0,
        }
    }

    /// Failing report for a broken assumption that is itself a violation.
    pub fn broken(name: &'static str, tolerance: f64, witness: Witness) -> Self {
        CheckReport {
            name,
            passed: false,
            margin: f64::INFINITY,
            tolerance,
            witness,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "check={} passed={} margin={} witness={} seed={}",
            self.name, self.passed, self.margin, self.witness, self.seed
        )
    }
}

pub fn render_reports(reports: &[CheckReport]) -> String {
    let mut s = String::new();
    for r in reports {
        s.push_str(&r.to_string());
        s.push('\n');
    }
    s
}
