//! Command-line driver: configuration, experiment orchestration and output files.

pub mod config;
pub mod output;

use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};

use crate::bea::BlockEncoding;
use crate::cost::{self, CostParams, ScalingParams};
use crate::electronic::{ElectronicSpec, GroundStateSettings};
use crate::error::{Error, Result};
use crate::linalg::c;
use crate::liouvillian::{self, Engine};
use crate::oracle;
use crate::phasespace::{self, GaussianAxis, KvNState, PhaseSpaceSpec, Variable};
use crate::qsvt::{self, Mode};
use crate::thermo::{self, AlchemicalPair, Estimation, System, ThermoConfig};

pub use config::Config;
use output::{fmt_f64, Csv, ResultFile};

/// Default configuration shipped with the crate.
pub const DEFAULT_CONFIG: &str = include_str!("../../configs/default.conf");

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Evolve,
    Thermo,
    Verify,
    Cost,
    Poly,
    Dump,
    GridScan,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Faithful,
    Semantic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EngineArg {
    Qsvt,
    Angleless,
}

/// Emulated Liouvillian dynamics and alchemical free-energy estimation.
#[derive(Clone, Debug, Parser)]
#[command(name = "liouv", version)]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// Configuration file; the built-in default when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "liouv-out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "faithful")]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value = "qsvt")]
    pub engine: EngineArg,
}

impl Args {
    fn qsvt_mode(&self) -> Mode {
        match self.mode {
            ModeArg::Faithful => Mode::Faithful,
            ModeArg::Semantic => Mode::Semantic,
        }
    }

    fn engine(&self) -> Engine {
        match self.engine {
            EngineArg::Qsvt => Engine::Qsvt,
            EngineArg::Angleless => Engine::Angleless,
        }
    }

    fn config(&self) -> Result<Config> {
        match &self.config {
            Some(p) => Config::from_file(p),
            None => Config::parse(DEFAULT_CONFIG),
        }
    }
}

/// Files written by one command and whether every check passed.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub passed: bool,
}

/// Parse arguments from the process environment, run, and map the outcome to an exit code.
pub fn main_from_env() -> i32 {
    let args = Args::parse();
    match run(&args) {
        Ok(r) => {
            for f in &r.files {
                println!("wrote {}", f.display());
            }
            if r.passed {
                0
            } else {
                eprintln!("one or more checks failed");
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

/// Execute one command.
pub fn run(args: &Args) -> Result<Report> {
    let cfg = args.config()?;
    std::fs::create_dir_all(&args.out)?;
    match args.command {
        Command::Evolve => run_evolve(&cfg, args),
        Command::Thermo => run_thermo(&cfg, args),
        Command::Verify => run_verify(&cfg, args),
        Command::Cost => run_cost(&cfg, &args.out),
        Command::Poly => run_poly(&cfg, &args.out),
        Command::Dump => run_dump(&cfg, args),
        Command::GridScan => run_grid_scan(&cfg, &args.out),
    }
}

/// Column name of a phase-space register.
pub fn axis_name(v: Variable) -> String {
    match v {
        Variable::X { n, j } => format!("x{n}_{j}"),
        Variable::P { n, j } => format!("p{n}_{j}"),
        Variable::S => "s".into(),
        Variable::Ps => "ps".into(),
    }
}

fn ground_settings(cfg: &Config, args: &Args) -> Result<GroundStateSettings> {
    let g = cfg.group("electronic");
    let d = GroundStateSettings::default();
    Ok(GroundStateSettings {
        eps_prep: g.get_or("eps_prep", d.eps_prep)?,
        delta: g.get_or("delta", d.delta)?,
        seed: args.seed,
        qsvt_mode: args.qsvt_mode(),
    })
}

fn system(cfg: &Config) -> Result<(PhaseSpaceSpec, Option<ElectronicSpec>)> {
    let spec = cfg.phase_space()?;
    let e = cfg.electronic(spec.spatial_dim)?;
    Ok((spec, e))
}

/// Gaussian initial state from `[evolve] center/width`, defaulting to the grid
/// middle with a width of two grid steps on every register.
fn initial_state(cfg: &Config, spec: &PhaseSpaceSpec) -> Result<KvNState> {
    let layout = spec.layout();
    let g = cfg.group("evolve");
    let mut centers = Vec::new();
    let mut widths = Vec::new();
    for &v in &layout.axes {
        let grid = spec.grid(v)?;
        let vals = grid.values();
        centers.push(vals[grid.g / 2]);
        widths.push(2.0 * grid.h);
    }
    let centers = g.list_or("center", centers)?;
    let widths = g.list_or("width", widths)?;
    if centers.len() != layout.axes.len() || widths.len() != layout.axes.len() {
        return Err(Error::Config(format!(
            "[evolve] center and width need {} entries (one per register)",
            layout.axes.len()
        )));
    }
    let axes: Vec<GaussianAxis> = centers
        .into_iter()
        .zip(widths)
        .map(|(center, width)| GaussianAxis { center, width })
        .collect();
    KvNState::gaussian(spec, &axes)
}

fn expectations(state: &KvNState, spec: &PhaseSpaceSpec) -> Result<Vec<f64>> {
    (0..state.layout.axes.len())
        .map(|a| state.expectation(spec, a))
        .collect()
}

fn run_evolve(cfg: &Config, args: &Args) -> Result<Report> {
    let (spec, espec) = system(cfg)?;
    let g = cfg.group("evolve");
    let t: f64 = g.get_or("t", 1.0)?;
    let samples: usize = g.get_or("samples", 4)?;
    let eps: f64 = g.get_or("eps", 1e-3)?;
    if samples == 0 {
        return Err(Error::Config("[evolve] samples must be at least 1".into()));
    }
    let prepared = thermo::prepare_system(
        &System {
            phase_space: spec.clone(),
            electronic: espec,
        },
        &ground_settings(cfg, args)?,
    )?;
    let l = &prepared.liouvillian.be;
    let rho0 = initial_state(cfg, &spec)?;
    let names: Vec<String> = spec.layout().axes.iter().map(|&v| axis_name(v)).collect();
    let mut header = vec!["t".to_string()];
    header.extend(names.iter().map(|n| format!("mean_{n}")));
    header.extend(["norm".to_string(), "success_probability".to_string()]);
    let mut csv = Csv::new(&header);
    let mut row = |time: f64, st: &KvNState, norm: f64, success: f64| -> Result<()> {
        let mut r = vec![time];
        r.extend(expectations(st, &spec)?);
        r.extend([norm, success]);
        csv.push(&r);
        Ok(())
    };
    row(0.0, &rho0, 1.0, 1.0)?;
    let mut queries = 0usize;
    let mut segments = 0usize;
    if t != 0.0 {
        let dt = t / samples as f64;
        let de = eps / samples as f64;
        let mut state = rho0.clone();
        let mut norm = 1.0;
        let mut success = 1.0;
        for k in 1..=samples {
            let ev = liouvillian::evolve(l, &state, dt, de, args.engine(), args.qsvt_mode())?;
            norm *= ev.norm;
            success *= ev.success_probability;
            queries += ev.queries;
            segments += ev.segments;
            state = KvNState::new(&ev.state.amplitudes / c(ev.norm), ev.state.layout.clone())?;
            row(k as f64 * dt, &state, norm, success)?;
        }
    }
    let csv_path = args.out.join("trajectory.csv");
    csv.write(&csv_path)?;
    let mut res = ResultFile::default();
    res.num("t", t);
    res.num("eps", eps);
    res.int("samples", samples as u64);
    res.num("alpha_l", l.alpha);
    res.int("queries", queries as u64);
    res.int("segments", segments as u64);
    res.text("engine", &format!("{:?}", args.engine()).to_lowercase());
    res.text("mode", &format!("{:?}", args.qsvt_mode()).to_lowercase());
    let res_path = args.out.join("evolve.txt");
    res.write(&res_path)?;
    Ok(Report {
        files: vec![csv_path, res_path],
        passed: true,
    })
}

/// Alchemical pair from `[system_a.*]` and `[system_b.*]` layered over the base groups.
pub fn alchemical_pair(cfg: &Config) -> Result<AlchemicalPair> {
    let mut systems = Vec::new();
    for name in ["system_a", "system_b"] {
        let ps = cfg.system_phase_space(name)?;
        let e = cfg.system_electronic(name, ps.spatial_dim)?;
        systems.push(System {
            phase_space: ps,
            electronic: e,
        });
    }
    let b = systems.pop().expect("two systems");
    let a = systems.pop().expect("two systems");
    AlchemicalPair::new(a, b)
}

/// Thermodynamic-integration settings from `[alchemy]` plus command-line flags.
pub fn thermo_config(cfg: &Config, args: &Args) -> Result<(ThermoConfig, f64)> {
    let g = cfg.group("alchemy");
    let d = ThermoConfig::default();
    let tc = ThermoConfig {
        n_lambda: g.get_or("n_lambda", d.n_lambda)?,
        t_eq: g.get_or("t_eq", d.t_eq)?,
        eps: g.get_or("eps", d.eps)?,
        xi: g.get_or("xi", d.xi)?,
        qae_ancillas: g.get("qae_ancillas")?,
        estimation: g.get_or::<Estimation>("estimation", d.estimation)?,
        engine: args.engine(),
        mode: args.qsvt_mode(),
        cancel_shared_terms: g.bool_or("cancel_shared_terms", d.cancel_shared_terms)?,
        reference: g.bool_or("reference", d.reference)?,
        seed: args.seed,
    };
    tc.validate()?;
    Ok((tc, g.get_or("initial_lambda", 0.5)?))
}

fn run_thermo(cfg: &Config, args: &Args) -> Result<Report> {
    let pair = alchemical_pair(cfg)?;
    let (tc, lambda0) = thermo_config(cfg, args)?;
    let prepared = pair.prepare(&thermo::ground_state_settings(&pair, tc.eps, tc.seed))?;
    let rho0 = thermo::canonical_state(&prepared, lambda0)?;
    let r = thermo::run_prepared(&prepared, &tc, &rho0)?;
    let mut res = ResultFile::default();
    res.num("delta_f", r.delta_f);
    res.num("p_hat", r.p_hat);
    res.int("n_lambda", r.n_lambda as u64);
    res.num("t_eq", r.t_eq);
    res.num("eps", tc.eps);
    res.num("xi", tc.xi);
    res.num("ledger.eps_L", r.ledger.eps_l);
    res.num("ledger.evolution", r.ledger.evolution);
    res.num("ledger.eps_delta", r.ledger.eps_delta);
    res.num("ledger.eps_disc", r.ledger.eps_disc);
    res.num("ledger.eps_qae", r.ledger.eps_qae);
    res.num("ledger.total", r.ledger.total());
    let dg = &r.diagnostics;
    res.num("diagnostics.drift", dg.drift);
    if let Some(b) = dg.discretization_bound {
        res.num("diagnostics.discretization_bound", b);
    }
    res.num("diagnostics.imaginary_part", dg.imaginary_part);
    res.num("diagnostics.trace_vs_measure", dg.trace_vs_measure);
    res.num("diagnostics.p_exact", dg.p_exact);
    res.num("diagnostics.alpha_delta", dg.alpha_delta);
    res.num("diagnostics.alpha_l", dg.alpha_l);
    res.int("diagnostics.segments", dg.segments as u64);
    res.int("diagnostics.degree", dg.degree as u64);
    res.int("diagnostics.queries", dg.queries as u64);
    res.num("diagnostics.success_probability", dg.success_probability);
    res.int("diagnostics.qae_ancillas", dg.qae_ancillas as u64);
    res.int("diagnostics.qae_repetitions", dg.qae_repetitions as u64);
    res.int("diagnostics.qae_accesses", dg.qae_accesses as u64);
    for (i, w) in dg.warnings.iter().enumerate() {
        res.text(&format!("diagnostics.warnings.{i}"), w);
    }
    let mut csv = Csv::new(&["lambda", "expectation", "block_fidelity", "block_error"]);
    for rec in &r.per_lambda {
        csv.push(&[
            rec.lambda,
            rec.expectation,
            rec.block_fidelity.unwrap_or(f64::NAN),
            rec.block_error.unwrap_or(f64::NAN),
        ]);
    }
    let res_path = args.out.join("thermo.txt");
    let csv_path = args.out.join("lambdas.csv");
    res.write(&res_path)?;
    csv.write(&csv_path)?;
    Ok(Report {
        files: vec![res_path, csv_path],
        passed: true,
    })
}

struct Checks {
    res: ResultFile,
    passed: bool,
}

impl Checks {
    fn record(&mut self, name: &str, value: f64, tolerance: f64) {
        let ok = value.is_finite() && value <= tolerance;
        self.passed &= ok;
        self.res.num(&format!("{name}.value"), value);
        self.res.num(&format!("{name}.tolerance"), tolerance);
        self.res
            .text(&format!("{name}.status"), if ok { "pass" } else { "fail" });
    }
}

fn run_verify(cfg: &Config, args: &Args) -> Result<Report> {
    let (spec, espec) = system(cfg)?;
    let g = cfg.group("verify");
    let t: f64 = g.get_or("t", 0.5)?;
    let eps: f64 = g.get_or("eps", 1e-6)?;
    let mut ch = Checks {
        res: ResultFile::default(),
        passed: true,
    };
    let prepared = thermo::prepare_system(
        &System {
            phase_space: spec.clone(),
            electronic: espec.clone(),
        },
        &ground_settings(cfg, args)?,
    )?;
    let full = &prepared.liouvillian;
    let classical_oracle = oracle::classical_liouvillian(&spec)?;
    let cl = (full.classical.block() - &classical_oracle).norm();
    ch.record(
        "classical_liouvillian.contract",
        cl,
        full.classical.epsilon + 1e-9,
    );
    let dense = full.be.block();
    let scale = classical_oracle.norm().max(1.0);
    ch.record(
        "full_liouvillian.hermiticity",
        (&dense - dense.adjoint()).norm(),
        full.be.epsilon + 1e-9 * scale,
    );
    let full_oracle = oracle::full_liouvillian(espec.as_ref(), &spec)?;
    ch.record(
        "full_liouvillian.oracle",
        (&dense - &full_oracle).norm() / scale,
        full.be.epsilon + 1e-6,
    );
    let rho0 = initial_state(cfg, &spec)?;
    let ev = liouvillian::evolve(&full.be, &rho0, t, eps, args.engine(), args.qsvt_mode())?;
    let reference = oracle::expm_evolve(&full_oracle, &rho0.amplitudes, t)?;
    ch.record(
        "evolve.oracle_distance",
        (&ev.state.amplitudes - &reference).norm(),
        eps + 1e-6 * t.abs().max(1.0),
    );
    ch.record("evolve.norm", (ev.norm - 1.0).abs(), eps + 1e-10);
    ch.res.int("evolve.queries", ev.queries as u64);
    ch.res.int("evolve.segments", ev.segments as u64);
    let c207 = cost::hamsim_cost(2.0, 5.0, 1e-6)?;
    let c716 = cost::angleless_hamsim_cost(1.0, 1.0, 0.01)?;
    ch.record("cost.hamsim_regression", (c207 as f64 - 207.0).abs(), 0.0);
    ch.record(
        "cost.angleless_regression",
        (c716 as f64 - 716.0).abs(),
        0.0,
    );
    let bound = match args.engine() {
        Engine::Qsvt => cost::hamsim_cost(full.be.alpha, t, eps)?,
        Engine::Angleless => cost::angleless_hamsim_cost(full.be.alpha, t, eps)?,
    };
    if ev.segments == 1 {
        ch.record(
            "cost.measured_queries_excess",
            ev.queries as f64 - bound as f64,
            0.0,
        );
    }
    let worst = (1..=3)
        .map(|d| phasespace::stencil(d).map(|s| s.exactness_defect()))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    ch.record("stencil.exactness", worst, 1e-9);
    ch.res
        .text("status", if ch.passed { "pass" } else { "fail" });
    let path = args.out.join("verify.txt");
    ch.res.write(&path)?;
    Ok(Report {
        files: vec![path],
        passed: ch.passed,
    })
}

fn run_cost(cfg: &Config, out: &Path) -> Result<Report> {
    let g = cfg.group("cost");
    let d = CostParams::default();
    let alphas: Vec<f64> = g.list_or("alpha", vec![1.0, 2.0])?;
    let times: Vec<f64> = g.list_or("t", vec![1.0, 5.0])?;
    let epss: Vec<f64> = g.list_or("eps", vec![1e-2, 1e-6])?;
    let sd = ScalingParams::default();
    let scaling = ScalingParams {
        n_nuclei: g.get_or("n_nuclei", sd.n_nuclei)?,
        n_electrons: g.get_or("n_electrons", sd.n_electrons)?,
        t: times.iter().cloned().fold(0.0, f64::max),
        delta: g.get_or("delta", d.delta)?,
        gamma: g.get_or("gamma", d.gamma)?,
        eps: epss.iter().cloned().fold(1.0, f64::min),
        xi: g.get_or("xi", sd.xi)?,
        eta: g.get_or("eta", sd.eta)?,
    };
    let lambda: f64 = g.get_or("lambda", d.lambda)?;
    let eps_prep: f64 = g.get_or("eps_prep", d.eps_prep)?;
    let mut csv = Csv::new(&["alpha", "t", "eps", "hamsim", "angleless", "ratio"]);
    let mut md = String::from(
        "| alpha | t | eps | hamsim | angleless | ratio |\n|---|---|---|---|---|---|\n",
    );
    for &a in &alphas {
        for &t in &times {
            for &e in &epss {
                let h = cost::hamsim_cost(a, t, e)?;
                let q = cost::angleless_hamsim_cost(a, t, e)?;
                let ratio = q as f64 / h as f64;
                csv.push(&[a, t, e, h as f64, q as f64, ratio]);
                md.push_str(&format!("| {a} | {t} | {e:e} | {h} | {q} | {ratio:.4} |\n"));
            }
        }
    }
    let gsp = cost::gsp_cost(lambda, scaling.delta, scaling.gamma, eps_prep)?;
    let table = cost::table1_compare(&scaling)?;
    md.push_str("\n| figure | expression | value | scaling_only |\n|---|---|---|---|\n");
    for f in [&gsp.u_h, &gsp.u_i].into_iter().chain(table.figures()) {
        md.push_str(&format!(
            "| {} ({}) | `{}` | {} | {} |\n",
            f.label,
            f.anchor,
            f.expression,
            fmt_f64(f.value),
            f.scaling_only
        ));
    }
    md.push_str(&format!("\nNote: {}. {}.\n", table.note, gsp.caveat));
    let csv_path = out.join("cost.csv");
    let md_path = out.join("cost.md");
    csv.write(&csv_path)?;
    std::fs::write(&md_path, md)?;
    Ok(Report {
        files: vec![csv_path, md_path],
        passed: true,
    })
}

fn run_poly(cfg: &Config, out: &Path) -> Result<Report> {
    let g = cfg.group("poly");
    let function: String = g.get_or("function", "exp".to_string())?;
    let samples: usize = g.get_or("samples", 201)?;
    if samples < 2 {
        return Err(Error::Config("[poly] samples must be at least 2".into()));
    }
    let xs: Vec<f64> = (0..samples)
        .map(|k| -1.0 + 2.0 * k as f64 / (samples - 1) as f64)
        .collect();
    let mut csv = Csv::new(&["x", "target_re", "target_im", "poly_re", "poly_im"]);
    match function.as_str() {
        "exp" => {
            let tau: f64 = g.get_or("alpha_t", 5.0)?;
            let eps: f64 = g.get_or("eps", 1e-6)?;
            let ap = qsvt::approx_exp(tau, eps)?;
            for &x in &xs {
                let p = ap.eval(x);
                csv.push(&[x, (tau * x).cos(), -(tau * x).sin(), p.re, p.im]);
            }
        }
        "sign" => {
            let gamma: f64 = g.get_or("gamma", 0.1)?;
            let xi: f64 = g.get_or("xi", 0.01)?;
            let p = qsvt::approx_sign(gamma, xi)?;
            for &x in &xs {
                let target = if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                csv.push(&[x, target, 0.0, p.eval(x), 0.0]);
            }
        }
        other => {
            return Err(Error::Config(format!(
                "[poly] unknown function '{other}' (exp or sign)"
            )))
        }
    }
    let path = out.join("poly.csv");
    csv.write(&path)?;
    Ok(Report {
        files: vec![path],
        passed: true,
    })
}

fn run_dump(cfg: &Config, args: &Args) -> Result<Report> {
    let (spec, espec) = system(cfg)?;
    let operator: String = cfg.group("dump").get_or("operator", "full".to_string())?;
    let be: BlockEncoding = match operator.as_str() {
        "classical" => phasespace::classical_liouvillian(&spec)?,
        "kinetic" => phasespace::kinetic_hamiltonian(&spec)?,
        "potential" => phasespace::potential_hamiltonian(&spec)?,
        "full" | "electronic" => {
            let p = thermo::prepare_system(
                &System {
                    phase_space: spec.clone(),
                    electronic: espec,
                },
                &ground_settings(cfg, args)?,
            )?;
            if operator == "full" {
                p.liouvillian.be
            } else {
                p.liouvillian.electronic
            }
        }
        other => {
            return Err(Error::Config(format!(
            "[dump] unknown operator '{other}' (classical, electronic, full, kinetic, potential)"
        )))
        }
    };
    let block = be.block();
    let mut csv = Csv::new(&["row", "col", "re", "im"]);
    for i in 0..block.nrows() {
        for j in 0..block.ncols() {
            let v = block[(i, j)];
            csv.push(&[i as f64, j as f64, v.re, v.im]);
        }
    }
    let mut res = ResultFile::default();
    res.text("operator", &operator);
    res.num("alpha", be.alpha);
    res.num("epsilon", be.epsilon);
    res.int("ancilla_dim", be.ancilla_dim as u64);
    res.int("ancilla_qubits", be.ancilla_qubits as u64);
    res.int("target_dim", be.target_dim as u64);
    res.int("queries", be.queries as u64);
    let csv_path = args.out.join("dump.csv");
    let res_path = args.out.join("dump.txt");
    csv.write(&csv_path)?;
    res.write(&res_path)?;
    Ok(Report {
        files: vec![csv_path, res_path],
        passed: true,
    })
}

fn run_grid_scan(cfg: &Config, out: &Path) -> Result<Report> {
    let g = cfg.group("grid_scan");
    let points: Vec<usize> = g.list_or("grid_points", vec![16, 32, 64, 128])?;
    let orders: Vec<usize> = g.list_or("orders", vec![1, 2, 3])?;
    let k: usize = g.get_or("frequency", 1)?;
    let rows = phasespace::derivative_scan(&points, &orders, k)?;
    let mut csv = Csv::new(&["g", "h", "d", "error", "model", "ratio"]);
    for r in &rows {
        csv.push(&[
            r.g as f64,
            r.h,
            r.d as f64,
            r.error,
            r.model,
            r.error / r.model,
        ]);
    }
    let mut res = ResultFile::default();
    for &gp in &points {
        if let Some((slope, model)) = phasespace::order_slope(&rows, gp, k) {
            res.num(&format!("g{gp}.order_slope"), slope);
            res.num(&format!("g{gp}.model_slope"), model);
            res.num(
                &format!("g{gp}.relative_deviation"),
                ((slope - model) / model).abs(),
            );
        }
    }
    for &d in &orders {
        if let Some(s) = phasespace::step_slope(&rows, d) {
            res.num(&format!("d{d}.step_exponent"), s);
            res.num(&format!("d{d}.model_exponent"), 2.0 * d as f64);
        }
        let sel: Vec<f64> = rows
            .iter()
            .filter(|r| r.d == d)
            .map(|r| (r.error / r.model).ln())
            .collect();
        if !sel.is_empty() {
            res.num(
                &format!("d{d}.fitted_constant"),
                (sel.iter().sum::<f64>() / sel.len() as f64).exp(),
            );
        }
    }
    let csv_path = out.join("grid_scan.csv");
    let res_path = out.join("grid_scan.txt");
    csv.write(&csv_path)?;
    res.write(&res_path)?;
    Ok(Report {
        files: vec![csv_path, res_path],
        passed: true,
    })
}
