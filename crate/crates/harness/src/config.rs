//! Run configuration: one flat JSON document, unknown keys rejected.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use iwatsuka::Coupling;

use crate::error::HarnessError;

/// Experiments the harness knows how to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Simulate,
    Effective,
    Converge,
    Identity,
    Polarized,
    Normequiv,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Effective => "effective",
            Experiment::Converge => "converge",
            Experiment::Identity => "identity",
            Experiment::Polarized => "polarized",
            Experiment::Normequiv => "normequiv",
        }
    }
}

/// `λ` as written in the config: a number or an expression string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaSpec {
    Number(f64),
    Expr(String),
}

impl LambdaSpec {
    pub fn coupling(&self) -> Result<Coupling, HarnessError> {
        match self {
            LambdaSpec::Number(v) if v.is_finite() => Ok(Coupling::Constant(*v)),
            LambdaSpec::Number(v) => {
                Err(HarnessError::Config(format!("lambda is not finite: {v}")))
            }
            LambdaSpec::Expr(src) => Coupling::parse(src)
                .map_err(|e| HarnessError::Config(format!("lambda {src:?}: {e}"))),
        }
    }
}

/// Named initial data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Initial {
    /// `2^{-1/2}(χ₀ + χ₁)(x) · π^{-1/4}e^{-y²/2}`.
    Standard,
    /// `π^{-1/4}e^{-y²/2} χₙ(x)`.
    Polarized(usize),
    /// A seeded random field.
    Random(u64),
}

impl FromStr for Initial {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s == "standard" {
            return Ok(Initial::Standard);
        }
        let arg = |prefix: &str| {
            s.strip_prefix(prefix)
                .and_then(|r| r.strip_prefix('('))
                .and_then(|r| r.strip_suffix(')'))
                .map(str::trim)
        };
        if let Some(n) = arg("polarized") {
            return n
                .parse()
                .map(Initial::Polarized)
                .map_err(|_| format!("bad mode index in {s:?}"));
        }
        if let Some(seed) = arg("random") {
            return seed
                .parse()
                .map(Initial::Random)
                .map_err(|_| format!("bad seed in {s:?}"));
        }
        Err(format!(
            "unknown initial data {s:?}; expected standard, polarized(n) or random(seed)"
        ))
    }
}

impl fmt::Display for Initial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Initial::Standard => write!(f, "standard"),
            Initial::Polarized(n) => write!(f, "polarized({n})"),
            Initial::Random(seed) => write!(f, "random({seed})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// If set, must agree with the subcommand.
    pub experiment: Option<Experiment>,
    pub b: f64,
    pub sigma: u32,
    pub lambda: LambdaSpec,
    /// Single `ε` for `simulate`.
    pub epsilon: f64,
    /// `ε` sweep for `converge` and `identity`.
    pub epsilons: Vec<f64>,
    pub n_h: usize,
    pub n_y: usize,
    pub l_y: f64,
    pub t_final: f64,
    /// Full-model step; defaults to `min(10⁻³, ε²·(2π/b)/64)` per `ε`.
    pub dt: Option<f64>,
    pub dt_effective: f64,
    /// Time between recorded samples.
    pub out_interval: f64,
    pub initial: String,
    /// `θ` nodes for the average; defaults to the smallest exact power of two.
    pub n_theta: Option<usize>,
    /// Ensemble size for `normequiv`.
    pub ensemble: usize,
    pub seed: u64,
    /// Upper end of the `ε` search in `normequiv`.
    pub epsilon_max: f64,
    pub output_dir: Option<String>,
    pub snapshots: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            experiment: None,
            b: 1.0,
            sigma: 1,
            lambda: LambdaSpec::Expr("1".into()),
            epsilon: 0.1,
            epsilons: vec![0.2, 0.1, 0.05, 0.025],
            n_h: 32,
            n_y: 64,
            l_y: 16.0,
            t_final: 0.5,
            dt: None,
            dt_effective: 1e-3,
            out_interval: 0.01,
            initial: "standard".into(),
            n_theta: None,
            ensemble: 32,
            seed: 0,
            epsilon_max: 1.0,
            output_dir: None,
            snapshots: false,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        RunConfig::from_json(&text)
    }

    pub fn initial_data(&self) -> Result<Initial, HarnessError> {
        self.initial.parse().map_err(HarnessError::Config)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(HarnessError::Config(format!(
                    "{name} must be positive, got {v}"
                )))
            }
        };
        positive("b", self.b)?;
        positive("epsilon", self.epsilon)?;
        positive("l_y", self.l_y)?;
        positive("t_final", self.t_final)?;
        positive("dt_effective", self.dt_effective)?;
        positive("out_interval", self.out_interval)?;
        positive("epsilon_max", self.epsilon_max)?;
        if let Some(dt) = self.dt {
            positive("dt", dt)?;
        }
        if self.sigma < 1 {
            return bad(format!(
                "sigma must be a positive integer, got {}",
                self.sigma
            ));
        }
        if self.n_h < 2 {
            return bad(format!("n_h must be at least 2, got {}", self.n_h));
        }
        if self.n_y < 4 || !self.n_y.is_multiple_of(2) {
            return bad(format!("n_y must be even and at least 4, got {}", self.n_y));
        }
        for &e in &self.epsilons {
            positive("every entry of epsilons", e)?;
        }
        let outputs = self.t_final / self.out_interval;
        if (outputs - outputs.round()).abs() > 1e-9 * outputs.max(1.0) {
            return bad(format!(
                "t_final {} must be a whole multiple of out_interval {}",
                self.t_final, self.out_interval
            ));
        }
        if let Some(n) = self.n_theta {
            let required = iwatsuka::ThetaRule::min_nodes(self.n_h, self.sigma);
            if n < required {
                return bad(format!("n_theta {n} is below the exact minimum {required}"));
            }
        }
        if self.ensemble == 0 {
            return bad("ensemble must be positive".into());
        }
        if let Initial::Polarized(n) = self.initial_data()? {
            if n >= self.n_h {
                return bad(format!("polarized mode {n} needs n_h > {n}"));
            }
        }
        self.lambda.coupling()?;
        Ok(())
    }

    /// Checks the experiment-specific requirements.
    pub fn validate_for(&self, exp: Experiment) -> Result<(), HarnessError> {
        self.validate()?;
        if let Some(e) = self.experiment {
            if e != exp {
                return Err(HarnessError::Config(format!(
                    "config is for {}, not {}",
                    e.name(),
                    exp.name()
                )));
            }
        }
        match exp {
            Experiment::Converge if self.epsilons.len() < 3 => Err(HarnessError::Config(
                "converge needs at least 3 epsilons".into(),
            )),
            Experiment::Identity if self.epsilons.len() < 2 => Err(HarnessError::Config(
                "identity needs at least 2 epsilons".into(),
            )),
            Experiment::Polarized if !matches!(self.initial_data()?, Initial::Polarized(_)) => Err(
                HarnessError::Config("polarized needs initial = \"polarized(n)\"".into()),
            ),
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_standard_problem() {
        let cfg = RunConfig::from_json("{}").unwrap();
        assert_eq!(
            (cfg.n_h, cfg.n_y, cfg.l_y, cfg.t_final),
            (32, 64, 16.0, 0.5)
        );
        assert_eq!(cfg.initial_data().unwrap(), Initial::Standard);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(RunConfig::from_json(r#"{"bogus": 1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"n_y": 63}"#).is_err());
        assert!(RunConfig::from_json(r#"{"lambda": "x +"}"#).is_err());
        assert!(RunConfig::from_json(r#"{"initial": "polarized(40)"}"#).is_err());
        assert!(RunConfig::from_json(r#"{"out_interval": 0.3}"#).is_err());
        let cfg = RunConfig::from_json(r#"{"epsilons": [0.1, 0.2]}"#).unwrap();
        assert!(cfg.validate_for(Experiment::Converge).is_err());
        let cfg = RunConfig::from_json(r#"{"experiment": "identity"}"#).unwrap();
        assert!(cfg.validate_for(Experiment::Simulate).is_err());
    }

    #[test]
    fn lambda_forms() {
        let cfg = RunConfig::from_json(r#"{"lambda": 2.5}"#).unwrap();
        assert_eq!(cfg.lambda.coupling().unwrap(), Coupling::Constant(2.5));
        let cfg = RunConfig::from_json(r#"{"lambda": "tanh(y) + 2"}"#).unwrap();
        assert!((cfg.lambda.coupling().unwrap().eval(0.0, 0.0).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn initial_forms() {
        assert_eq!(
            "polarized( 3 )".parse::<Initial>().unwrap(),
            Initial::Polarized(3)
        );
        assert_eq!(
            "random(42)".parse::<Initial>().unwrap(),
            Initial::Random(42)
        );
        assert!("gaussian".parse::<Initial>().is_err());
        for s in ["standard", "polarized(1)", "random(7)"] {
            assert_eq!(s.parse::<Initial>().unwrap().to_string(), s);
        }
    }
}
