use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use iph_dd::dg_space::TraceLayout;
use iph_dd::krylov::{gmres, pcg, AdditiveSchwarz, KrylovConfig};
use iph_dd::mesh::{generate_structured, partition_mesh, perturb_quasi_uniform, Point};
use iph_dd::schur::spectrum_c;
use iph_dd::schwarz::{
    build_augmented, classical_schwarz, multi_schwarz, optimized_schwarz, phat_default, InitialGuess,
    SchwarzConfig, TwoSubdomainOperators,
};
use iph_dd::{
    assemble_hybrid, assemble_primal, BlockSystem, BrokenP1Space, Partition, PenaltyField, SolveReport,
    TraceSpace, TriangleMesh,
};

use crate::config::{ExperimentConfig, ExperimentId, PhatPolicy};
use crate::fit::{fit_scaling, ScalingFit};
use crate::BenchError;

/// A named acceptance range checked when gating is enabled.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub name: String,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
    /// Open interval `(lo, hi)` instead of `[lo, hi]`.
    pub open: bool,
}

impl Gate {
    pub fn passed(&self) -> bool {
        if self.open {
            self.value > self.lo && self.value < self.hi
        } else {
            self.value >= self.lo && self.value <= self.hi
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    pub csv_header: String,
    pub rows: Vec<String>,
    pub fits: Vec<(String, ScalingFit)>,
    pub gates: Vec<Gate>,
    pub provenance: Vec<(String, String)>,
}

impl ExperimentOutput {
    pub fn csv_body(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{}", self.csv_header).unwrap();
        for r in &self.rows {
            writeln!(s, "{r}").unwrap();
        }
        s
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.provenance {
            writeln!(s, "{k} = {v}").unwrap();
        }
        for (name, f) in &self.fits {
            writeln!(s, "fit {name}: slope = {:.4}, log residual = {:.3e}", f.slope, f.residual).unwrap();
        }
        for g in &self.gates {
            let (l, r) = if g.open { ('(', ')') } else { ('[', ']') };
            writeln!(
                s,
                "gate {}: {:.6} in {l}{}, {}{r}: {}",
                g.name,
                g.value,
                g.lo,
                g.hi,
                if g.passed() { "pass" } else { "FAIL" }
            )
            .unwrap();
        }
        s
    }

    pub fn fit(&self, name: &str) -> Option<&ScalingFit> {
        self.fits.iter().find(|(n, _)| n == name).map(|(_, f)| f)
    }

    pub fn failed_gates(&self) -> Vec<&Gate> {
        self.gates.iter().filter(|g| !g.passed()).collect()
    }

    fn gate(&mut self, cfg: &ExperimentConfig, name: &str, value: f64, lo: f64, hi: f64, open: bool) {
        let (lo, hi) = cfg.gates.get(name).copied().unwrap_or((lo, hi));
        self.gates.push(Gate {
            name: name.to_string(),
            value,
            lo,
            hi,
            open,
        });
    }
}

/// Smooth source used by the iteration experiments.
pub fn manufactured_solution(p: Point) -> f64 {
    (PI * p[0]).sin() * (PI * p[1]).sin()
}

/// One refinement level: the mesh (perturbed if asked) and its partition.
pub struct Level {
    pub n: usize,
    pub h: f64,
    pub mesh: Arc<TriangleMesh>,
    pub partition: Arc<Partition>,
}

pub fn build_level(cfg: &ExperimentConfig, index: usize) -> Result<Level, BenchError> {
    let n = cfg.levels[index];
    let mesh = Arc::new(generate_structured(n, cfg.domain)?);
    let mut partition = partition_mesh(mesh.clone(), cfg.partition)?;
    let mesh = if cfg.perturb > 0.0 {
        let pinned = partition.interface_vertices();
        let seed = cfg.seed.wrapping_mul(1_000_003).wrapping_add(n as u64);
        let m = Arc::new(perturb_quasi_uniform(&mesh, cfg.perturb, seed, &pinned)?);
        partition = partition.transfer(m.clone())?;
        m
    } else {
        mesh
    };
    Ok(Level {
        n,
        h: mesh.h_max(),
        mesh,
        partition: Arc::new(partition),
    })
}

pub fn block_system(cfg: &ExperimentConfig, level: &Level, layout: TraceLayout) -> Result<BlockSystem, BenchError> {
    let trace = TraceSpace::new(level.partition.clone(), layout);
    let pen = PenaltyField::from_constant(&level.mesh, cfg.alpha_c)?;
    let eta = cfg.eta;
    let f = move |p: Point| (eta + 2.0 * PI * PI) * manufactured_solution(p);
    Ok(assemble_hybrid(level.partition.clone(), trace, eta, pen, &f)?)
}

pub fn p_hat(cfg: &ExperimentConfig, h: f64) -> Result<f64, BenchError> {
    match cfg.phat {
        PhatPolicy::Ansatz(gamma) => Ok(phat_default(h, cfg.alpha(), gamma)?),
        PhatPolicy::Fixed(p) => Ok(p),
    }
}

fn schwarz_config(cfg: &ExperimentConfig, base: SchwarzConfig) -> SchwarzConfig {
    SchwarzConfig {
        tol: cfg.tol,
        max_iter: cfg.max_iter,
        initial: InitialGuess::Random(cfg.seed),
        ..base
    }
}

fn fmt_rho(r: &SolveReport) -> String {
    r.rho().map_or("nan".into(), |v| format!("{v:.10}"))
}

fn require_converged(r: &SolveReport, what: &str, n: usize) -> Result<(), BenchError> {
    if r.converged {
        Ok(())
    } else {
        Err(BenchError::Solver(iph_dd::Error::NoConvergence {
            what: format!("{what} on level n = {n}"),
            iterations: r.iterations,
        }))
    }
}

fn base_provenance(cfg: &ExperimentConfig) -> Vec<(String, String)> {
    let levels: Vec<String> = cfg.levels.iter().map(|n| n.to_string()).collect();
    vec![
        ("experiment".into(), cfg.experiment.to_string()),
        ("domain".into(), cfg.domain.to_string()),
        ("levels".into(), levels.join(",")),
        ("partition".into(), format!("{:?}", cfg.partition)),
        ("alpha".into(), format!("{}", cfg.alpha())),
        ("eta".into(), format!("{}", cfg.eta)),
        ("p_hat_policy".into(), cfg.phat.to_string()),
        ("tol".into(), format!("{:e}", cfg.tol)),
        ("krylov_tol".into(), format!("{:e}", cfg.krylov_tol)),
        ("seed".into(), cfg.seed.to_string()),
        ("perturb".into(), cfg.perturb.to_string()),
    ]
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput, BenchError> {
    cfg.validate()?;
    let mut out = match cfg.experiment {
        ExperimentId::Eigc => eigc(cfg)?,
        ExperimentId::TwoSubdomainScaling => two_subdomain_scaling(cfg)?,
        ExperimentId::FourSubdomain => four_subdomain(cfg)?,
        ExperimentId::OsmVsPcg => osm_vs_pcg(cfg)?,
        ExperimentId::ConvergenceOrder => convergence_order_output(cfg)?,
    };
    let mut prov = base_provenance(cfg);
    prov.append(&mut out.provenance);
    out.provenance = prov;
    Ok(out)
}

pub const EIGC_HEADER: &str = "level,n,h,n_gamma,sigma_min,sigma_max,half_minus_sigma_max";

fn eigc(cfg: &ExperimentConfig) -> Result<ExperimentOutput, BenchError> {
    let mut out = ExperimentOutput {
        csv_header: EIGC_HEADER.into(),
        ..Default::default()
    };
    let (mut hs, mut mins, mut gaps) = (vec![], vec![], vec![]);
    let mut lowest = f64::INFINITY;
    let mut highest = f64::NEG_INFINITY;
    for k in 0..cfg.levels.len() {
        let level = build_level(cfg, k)?;
        let bs = block_system(cfg, &level, TraceLayout::SingleCopy)?;
        let (mut smin, mut smax) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..bs.n_subdomains() {
            let s = spectrum_c(&bs, i)?;
            smin = smin.min(s[0]);
            smax = smax.max(s[s.len() - 1]);
        }
        lowest = lowest.min(smin);
        highest = highest.max(smax);
        out.rows.push(format!(
            "{k},{},{:.10e},{},{:.10},{:.10},{:.10e}",
            level.n,
            level.h,
            bs.n_gamma(),
            smin,
            smax,
            0.5 - smax
        ));
        hs.push(level.h);
        mins.push(smin);
        gaps.push(0.5 - smax);
    }
    out.gate(cfg, "sigma_min_lowest", lowest, 0.0, 0.5, true);
    out.gate(cfg, "sigma_max_highest", highest, 0.0, 0.5, true);
    let tail = &mins[mins.len() - 3..];
    let spread = tail.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)) - tail.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    out.gate(cfg, "sigma_min_spread", spread, 0.0, 0.01, false);
    if gaps.iter().all(|&g| g > 0.0) {
        let fit = fit_scaling(&hs, &gaps)?;
        out.gate(cfg, "gap_order", -fit.slope, 0.75, 1.25, false);
        out.fits.push(("half_minus_sigma_max".into(), fit));
    } else {
        out.gate(cfg, "gap_order", f64::NAN, 0.75, 1.25, false);
    }
    Ok(out)
}

pub const TWO_SUBDOMAIN_HEADER: &str =
    "level,n,h,p_hat,classical_iterations,optimized_iterations,classical_rho,optimized_rho";

fn two_subdomain_scaling(cfg: &ExperimentConfig) -> Result<ExperimentOutput, BenchError> {
    let mut out = ExperimentOutput {
        csv_header: TWO_SUBDOMAIN_HEADER.into(),
        ..Default::default()
    };
    let (mut hs, mut ci, mut oi) = (vec![], vec![], vec![]);
    for k in 0..cfg.levels.len() {
        let level = build_level(cfg, k)?;
        let bs = block_system(cfg, &level, TraceLayout::SingleCopy)?;
        let ops = TwoSubdomainOperators::new(&bs)?;
        let p = p_hat(cfg, level.h)?;
        let c = classical_schwarz(&bs, &ops, &schwarz_config(cfg, SchwarzConfig::classical()))?;
        require_converged(&c, "classical Schwarz", level.n)?;
        let o = optimized_schwarz(&bs, &ops, &schwarz_config(cfg, SchwarzConfig::optimized(p)))?;
        require_converged(&o, "optimized Schwarz", level.n)?;
        out.rows.push(format!(
            "{k},{},{:.10e},{p:.10},{},{},{},{}",
            level.n,
            level.h,
            c.iterations,
            o.iterations,
            fmt_rho(&c),
            fmt_rho(&o)
        ));
        hs.push(level.h);
        ci.push(c.iterations as f64);
        oi.push(o.iterations as f64);
    }
    let fc = fit_scaling(&hs, &ci)?;
    let fo = fit_scaling(&hs, &oi)?;
    out.gate(cfg, "classical_slope", fc.slope, 0.75, 1.25, false);
    out.gate(cfg, "optimized_slope", fo.slope, 0.35, 0.65, false);
    out.fits.push(("classical_iterations".into(), fc));
    out.fits.push(("optimized_iterations".into(), fo));
    Ok(out)
}

pub const FOUR_SUBDOMAIN_HEADER: &str = "level,n,h,p_hat,n_subdomains,iterations,ratio,rho";

fn four_subdomain(cfg: &ExperimentConfig) -> Result<ExperimentOutput, BenchError> {
    let mut out = ExperimentOutput {
        csv_header: FOUR_SUBDOMAIN_HEADER.into(),
        ..Default::default()
    };
    let (mut hs, mut its) = (vec![], vec![]);
    for k in 0..cfg.levels.len() {
        let level = build_level(cfg, k)?;
        let bs = block_system(cfg, &level, TraceLayout::PerSubdomain)?;
        let p = p_hat(cfg, level.h)?;
        let r = multi_schwarz(&bs, &schwarz_config(cfg, SchwarzConfig::multi(p)))?;
        require_converged(&r, "multi-subdomain Schwarz", level.n)?;
        let ratio = its.last().map_or(String::new(), |&prev: &f64| {
            format!("{:.6}", r.iterations as f64 / prev)
        });
        out.rows.push(format!(
            "{k},{},{:.10e},{p:.10},{},{},{ratio},{}",
            level.n,
            level.h,
            bs.n_subdomains(),
            r.iterations,
            fmt_rho(&r)
        ));
        hs.push(level.h);
        its.push(r.iterations as f64);
    }
    let m = its.len();
    for (j, k) in (m.saturating_sub(3).max(1)..m).enumerate() {
        out.gate(cfg, &format!("ratio_{}", j + 1), its[k] / its[k - 1], 1.25, 1.6, false);
    }
    out.fits.push(("iterations".into(), fit_scaling(&hs, &its)?));
    Ok(out)
}

pub const OSM_VS_PCG_HEADER: &str = "level,n,h,p_hat,n_u,n_ell,gmres_iterations,pcg_iterations";

fn osm_vs_pcg(cfg: &ExperimentConfig) -> Result<ExperimentOutput, BenchError> {
    let mut out = ExperimentOutput {
        csv_header: OSM_VS_PCG_HEADER.into(),
        ..Default::default()
    };
    let kcfg = KrylovConfig {
        tol: cfg.krylov_tol,
        max_iter: cfg.max_iter,
        restart: None,
    };
    let (mut hs, mut gi, mut pi) = (vec![], vec![], vec![]);
    for k in 0..cfg.levels.len() {
        let level = build_level(cfg, k)?;
        let bs = block_system(cfg, &level, TraceLayout::PerSubdomain)?;
        let p = p_hat(cfg, level.h)?;
        let aug = build_augmented(&bs, p)?;
        // Both methods start from the same random iterate so that every
        // error frequency is present initially.
        let w0 = aug.initial_w(&bs, InitialGuess::Random(cfg.seed));
        let (_, g) = gmres(&aug, &aug, &aug.g, &w0, &kcfg)?;
        require_converged(&g, "OSM-GMRES", level.n)?;
        let asm = AdditiveSchwarz::from_block_system(&bs)?;
        let (_, c) = pcg(&bs.primal.matrix, &asm, &bs.primal.load, &aug.primal_u(&w0), &kcfg)?;
        require_converged(&c, "additive Schwarz PCG", level.n)?;
        out.rows.push(format!(
            "{k},{},{:.10e},{p:.10},{},{},{},{}",
            level.n,
            level.h,
            aug.n_u(),
            aug.n_ell(),
            g.iterations,
            c.iterations
        ));
        hs.push(level.h);
        gi.push(g.iterations as f64);
        pi.push(c.iterations as f64);
    }
    let fg = fit_scaling(&hs, &gi)?;
    let fp = fit_scaling(&hs, &pi)?;
    out.gate(cfg, "gmres_slope", fg.slope, 0.15, 0.35, false);
    out.gate(cfg, "pcg_slope", fp.slope, 0.35, 0.65, false);
    let last = gi.len() - 1;
    out.gate(cfg, "finest_gmres_over_pcg", gi[last] / pi[last], 0.0, 1.0, true);
    out.fits.push(("gmres_iterations".into(), fg));
    out.fits.push(("pcg_iterations".into(), fp));
    Ok(out)
}

pub const CONVERGENCE_ORDER_HEADER: &str = "level,n,h,l2_error";

/// L2 errors against `u = sin(πx) sin(πy)` and their fitted order.
pub fn convergence_order(cfg: &ExperimentConfig) -> Result<(Vec<f64>, Vec<f64>, ScalingFit), BenchError> {
    cfg.validate()?;
    let (mut hs, mut errs) = (vec![], vec![]);
    for k in 0..cfg.levels.len() {
        let level = build_level(cfg, k)?;
        let space = BrokenP1Space::new(level.mesh.clone(), 1)?;
        let pen = PenaltyField::from_constant(&level.mesh, cfg.alpha_c)?;
        let eta = cfg.eta;
        let f = move |p: Point| (eta + 2.0 * PI * PI) * manufactured_solution(p);
        let sys = assemble_primal(&space, eta, &pen, &f)?;
        let u = sys.solve();
        hs.push(level.h);
        errs.push(space.l2_error_sq(&u, manufactured_solution)?.sqrt());
    }
    let fit = fit_scaling(&hs, &errs)?;
    Ok((hs, errs, fit))
}

fn convergence_order_output(cfg: &ExperimentConfig) -> Result<ExperimentOutput, BenchError> {
    let (hs, errs, fit) = convergence_order(cfg)?;
    let mut out = ExperimentOutput {
        csv_header: CONVERGENCE_ORDER_HEADER.into(),
        ..Default::default()
    };
    for (k, (h, e)) in hs.iter().zip(&errs).enumerate() {
        out.rows.push(format!("{k},{},{h:.10e},{e:.10e}", cfg.levels[k]));
    }
    let (lo, hi) = if cfg.perturb > 0.0 { (1.8, 2.2) } else { (1.9, 2.1) };
    out.gate(cfg, "order", -fit.slope, lo, hi, false);
    out.fits.push(("l2_error".into(), fit));
    Ok(out)
}
