use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use iph_dd::{Domain, PartitionStrategy};

use crate::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentId {
    Eigc,
    TwoSubdomainScaling,
    FourSubdomain,
    OsmVsPcg,
    ConvergenceOrder,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 5] = [
        ExperimentId::Eigc,
        ExperimentId::TwoSubdomainScaling,
        ExperimentId::FourSubdomain,
        ExperimentId::OsmVsPcg,
        ExperimentId::ConvergenceOrder,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::Eigc => "eigc",
            ExperimentId::TwoSubdomainScaling => "two-subdomain-scaling",
            ExperimentId::FourSubdomain => "four-subdomain",
            ExperimentId::OsmVsPcg => "osm-vs-pcg",
            ExperimentId::ConvergenceOrder => "convergence-order",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self, BenchError> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s.trim())
            .ok_or_else(|| BenchError::Config(format!("unknown experiment '{s}'")))
    }
}

/// How `p̂` is chosen on each level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhatPolicy {
    /// `(1 - (h/α)^γ) / (1 + (h/α)^γ)` with the given `γ`
    Ansatz(f64),
    Fixed(f64),
}

impl fmt::Display for PhatPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhatPolicy::Ansatz(g) => write!(f, "ansatz({g})"),
            PhatPolicy::Fixed(v) => write!(f, "fixed({v})"),
        }
    }
}

impl FromStr for PhatPolicy {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self, BenchError> {
        let s = s.trim();
        let bad = || BenchError::Config(format!("bad p_hat policy '{s}'"));
        let inner = |prefix: &str| {
            s.strip_prefix(prefix)
                .and_then(|r| r.strip_prefix('('))
                .and_then(|r| r.strip_suffix(')'))
                .map(str::trim)
        };
        if s == "ansatz" {
            Ok(PhatPolicy::Ansatz(0.5))
        } else if let Some(g) = inner("ansatz") {
            Ok(PhatPolicy::Ansatz(g.parse().map_err(|_| bad())?))
        } else if let Some(v) = inner("fixed") {
            Ok(PhatPolicy::Fixed(v.parse().map_err(|_| bad())?))
        } else {
            Ok(PhatPolicy::Fixed(s.parse().map_err(|_| bad())?))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub domain: Domain,
    /// Cells per side of each structured mesh, coarse to fine.
    pub levels: Vec<usize>,
    /// `α = 6c`
    pub alpha_c: f64,
    pub eta: f64,
    pub phat: PhatPolicy,
    /// Schwarz tolerance on `‖u⁽ⁿ⁾ - u_h‖₀ / ‖f‖₀`.
    pub tol: f64,
    /// Krylov tolerance on the relative preconditioned residual.
    pub krylov_tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Relative vertex perturbation; 0 keeps the structured meshes.
    pub perturb: f64,
    pub partition: PartitionStrategy,
    pub out: PathBuf,
    /// Overrides of the acceptance ranges, keyed by gate name.
    pub gates: BTreeMap<String, (f64, f64)>,
}

impl ExperimentConfig {
    pub fn defaults(experiment: ExperimentId) -> Self {
        let (levels, partition) = match experiment {
            ExperimentId::Eigc => (vec![8, 16, 32, 64, 128], PartitionStrategy::TwoNonstraight),
            ExperimentId::TwoSubdomainScaling => (vec![8, 16, 32, 64], PartitionStrategy::TwoNonstraight),
            ExperimentId::FourSubdomain => (vec![8, 16, 32, 64], PartitionStrategy::Boxes(2)),
            ExperimentId::OsmVsPcg => (vec![16, 32, 64, 128], PartitionStrategy::Boxes(4)),
            ExperimentId::ConvergenceOrder => (vec![8, 16, 32, 64], PartitionStrategy::TwoStraight),
        };
        Self {
            experiment,
            domain: Domain::UnitSquare,
            levels,
            alpha_c: 2.0,
            eta: 1.0,
            phat: PhatPolicy::Ansatz(0.5),
            tol: 1e-10,
            krylov_tol: 1e-6,
            max_iter: 20_000,
            seed: 1,
            perturb: 0.0,
            partition,
            out: PathBuf::from("results"),
            gates: BTreeMap::new(),
        }
    }

    pub fn alpha(&self) -> f64 {
        6.0 * self.alpha_c
    }

    /// Parses `key = value` lines; `#` starts a comment. The experiment
    /// is taken from the file unless `experiment` is given.
    pub fn parse(text: &str, experiment: Option<ExperimentId>) -> Result<Self, BenchError> {
        let mut pairs = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                BenchError::Config(format!("line {}: expected 'key = value', got '{raw}'", lineno + 1))
            })?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let from_file = pairs
            .iter()
            .find(|(k, _)| k == "experiment")
            .map(|(_, v)| v.parse::<ExperimentId>())
            .transpose()?;
        let id = experiment
            .or(from_file)
            .ok_or_else(|| BenchError::Config("no experiment given".into()))?;
        let mut cfg = Self::defaults(id);
        for (k, v) in &pairs {
            cfg.set(k, v)?;
        }
        cfg.experiment = id;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), BenchError> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T, BenchError> {
            v.trim()
                .parse()
                .map_err(|_| BenchError::Config(format!("bad value '{v}' for {key}")))
        }
        let cfgerr = |e: iph_dd::Error| BenchError::Config(format!("{key}: {e}"));
        match key {
            "experiment" => self.experiment = value.parse()?,
            "domain" => self.domain = value.parse().map_err(cfgerr)?,
            "levels" => self.levels = parse_levels(value)?,
            "alpha_c" => self.alpha_c = num(key, value)?,
            "eta" => self.eta = num(key, value)?,
            "p_hat" | "phat" => self.phat = value.parse()?,
            "tol" => self.tol = num(key, value)?,
            "krylov_tol" => self.krylov_tol = num(key, value)?,
            "max_iter" => self.max_iter = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "perturb" => self.perturb = num(key, value)?,
            "partition" => self.partition = value.parse().map_err(cfgerr)?,
            "out" => self.out = PathBuf::from(value),
            _ => {
                if let Some(name) = key.strip_prefix("gate.") {
                    let (lo, hi) = value
                        .split_once(',')
                        .ok_or_else(|| BenchError::Config(format!("gate {name} needs 'lo, hi'")))?;
                    self.gates.insert(name.to_string(), (num(key, lo)?, num(key, hi)?));
                } else {
                    return Err(BenchError::Config(format!("unknown key '{key}'")));
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Config(m));
        if self.levels.len() < 3 {
            return bad(format!(
                "{} needs at least 3 mesh levels for a slope, got {}",
                self.experiment,
                self.levels.len()
            ));
        }
        if self.levels.windows(2).any(|w| w[1] <= w[0]) {
            return bad("mesh levels must be strictly increasing".into());
        }
        if !(self.alpha_c > 0.0) {
            return bad(format!("alpha_c must be positive, got {}", self.alpha_c));
        }
        if !(self.eta >= 0.0) {
            return bad(format!("eta must be nonnegative, got {}", self.eta));
        }
        if !(self.tol > 0.0 && self.krylov_tol > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if !(0.0..iph_dd::mesh::MAX_PERTURBATION).contains(&self.perturb) {
            return bad(format!("perturb must lie in [0, 0.3), got {}", self.perturb));
        }
        match self.phat {
            PhatPolicy::Ansatz(g) if !(g > 0.0) => return bad(format!("ansatz exponent must be positive, got {g}")),
            PhatPolicy::Fixed(p) if !(0.0..1.0).contains(&p) => return bad(format!("p_hat must lie in [0, 1), got {p}")),
            _ => {}
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive".into());
        }
        Ok(())
    }
}

pub fn parse_levels(s: &str) -> Result<Vec<usize>, BenchError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| BenchError::Config(format!("bad mesh level '{t}'")))
        })
        .collect()
}
