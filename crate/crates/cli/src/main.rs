//! `gsfr`: command-line front end for correction-function design, von
//! Neumann analysis and the 1D studies.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};
use gsfr_core::experiments::{self, SearchGrid, SearchOptions, DEFAULT_ELEMENT_COUNTS};
use gsfr_core::fr::{linear_advection_rhs, rk_advance, MeshState, NodeKind, RkScheme, SchemeOperators};
use gsfr_core::gsfr::{
    bound_rules, esfr3_membership, osfr_iota_from_hl, recover_iota, solve_correction, sufficient_bounds,
    CorrectionDoc, CorrectionPair, CorrectionParams, MEMBERSHIP_TOL,
};
use gsfr_core::spectral::{self, cfl_limit};
use gsfr_core::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "gsfr", version, about = "Generalised Sobolev stable flux reconstruction workbench")]
struct Cli {
    /// Worker threads for sweeps and studies (default: all cores).
    #[arg(long, global = true, env = "GSFR_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Correction functions.
    #[command(subcommand)]
    Corr(CorrCommand),
    /// Von Neumann analysis.
    #[command(subcommand)]
    Vn(VnCommand),
    /// Time-domain runs.
    #[command(subcommand)]
    Run(RunCommand),
    /// Parameter searches.
    #[command(subcommand)]
    Search(SearchCommand),
}

#[derive(Subcommand, Debug)]
enum CorrCommand {
    /// Solve for h_l, h_r and their gradients (JSON).
    Solve(CorrArgs),
    /// Check I_p against the sufficient stability bounds (JSON).
    Bounds(CorrArgs),
    /// Test OSFR / ESFR membership and recover I_p from h_l (JSON).
    Identify(IdentifyArgs),
}

#[derive(Subcommand, Debug)]
enum VnCommand {
    /// Dispersion and dissipation of every mode. CSV columns: k_hat,
    /// re_omega_phys, im_omega_phys, then re_/im_omega_mode_i per mode.
    Dispersion(DispersionArgs),
    /// Largest stable RK time step (JSON).
    Cfl(CflArgs),
    /// CFL limit over a grid or random sample of I_p. CSV columns:
    /// iota_1..iota_p, tau_max.
    Sweep(SweepArgs),
}

#[derive(Subcommand, Debug)]
enum RunCommand {
    /// Linear advection of cos(k x) on [0, 2π]. CSV columns: x, u.
    Advect(AdvectArgs),
    /// Heterogeneous advection energy study. CSV columns: t, energy.
    Hetero(HeteroArgs),
    /// Order-of-accuracy study (JSON).
    Ooa(OoaArgs),
}

#[derive(Subcommand, Debug)]
enum SearchCommand {
    /// Order-preserving peak CFL search (JSON).
    Cfl(SearchArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
struct SchemeArgs {
    /// Polynomial order.
    #[arg(long, default_value_t = 3)]
    p: usize,
    /// Sobolev weights ι₀..ι_p, comma separated; decimals and a/b fractions
    /// are read exactly. Defaults to DG, [1, 0, …, 0].
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    iota: Option<Vec<String>>,
}

impl SchemeArgs {
    fn params(&self) -> Result<CorrectionParams> {
        match &self.iota {
            None => CorrectionParams::dg(self.p),
            Some(v) => CorrectionParams::parse(self.p, &v.iter().map(String::as_str).collect::<Vec<_>>()),
        }
    }

    fn pair(&self) -> Result<(CorrectionParams, CorrectionPair)> {
        let params = self.params()?;
        let pair = solve_correction(&params)?;
        Ok((params, pair))
    }
}

#[derive(Args, Debug, Clone, Serialize)]
struct OutArgs {
    /// Output file; `.csv` where a CSV form exists, JSON otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
struct CorrArgs {
    #[command(flatten)]
    scheme: SchemeArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
struct IdentifyArgs {
    #[command(flatten)]
    scheme: SchemeArgs,
    /// Identify the h_l stored in a `corr solve` JSON file instead.
    #[arg(long)]
    input: Option<PathBuf>,
    #[command(flatten)]
    out: OutArgs,
}

fn parse_alpha(s: &str) -> std::result::Result<f64, String> {
    let a: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.5..=1.0).contains(&a) {
        Ok(a)
    } else {
        Err("alpha must lie in [0.5, 1]".into())
    }
}

#[derive(Args, Debug, Clone, Serialize)]
struct FluxArgs {
    /// Interface upwinding: 1 = upwind, 0.5 = central.
    #[arg(long, default_value_t = 1.0, value_parser = parse_alpha)]
    alpha: f64,
    /// Solution points: gauss or lobatto.
    #[arg(long, default_value = "gauss")]
    nodes: String,
}

impl FluxArgs {
    fn node_kind(&self) -> Result<NodeKind> {
        self.nodes.parse()
    }
}

#[derive(Args, Debug, Clone, Serialize)]
struct DispersionArgs {
    #[command(flatten)]
    scheme: SchemeArgs,
    #[command(flatten)]
    flux: FluxArgs,
    /// Number of k̂ samples on (0, π].
    #[arg(long, default_value_t = 256)]
    k_samples: usize,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
struct CflArgs {
    #[command(flatten)]
    scheme: SchemeArgs,
    #[command(flatten)]
    flux: FluxArgs,
    /// rk33, rk44 (alias rk44_ls) or rk55.
    #[arg(long, default_value = "rk44")]
    rk: String,
    #[arg(long, default_value_t = 256)]
    k_samples: usize,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
struct SweepArgs {
    #[arg(long, default_value_t = 3)]
    p: usize,
    #[arg(long, default_value = "rk44")]
    rk: String,
    #[command(flatten)]
    flux: FluxArgs,
    /// Candidate values for each of ι₁..ι_p (default 0, ±1e-5 … ±1e-1).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    values: Option<Vec<f64>>,
    /// Sample this many random points inside the sufficient bounds instead
    /// of the full grid.
    #[arg(long)]
    random_points: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 256)]
    k_samples: usize,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
struct AdvectArgs {
    #[command(flatten)]
    scheme: SchemeArgs,
    #[command(flatten)]
    flux: FluxArgs,
    #[arg(long, default_value = "rk44")]
    rk: String,
    #[arg(long, default_value_t = 20)]
    n_elements: usize,
    /// Final time (default one period, 2π).
    #[arg(long, default_value_t = 2.0 * PI)]
    t_end: f64,
    /// Time step as a fraction of the element width.
    #[arg(long, default_value_t = 0.05)]
    cfl: f64,
    /// Integer wavenumber of the initial cos(k x).
    #[arg(long, default_value_t = 1)]
    wavenumber: u32,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
struct HeteroArgs {
    #[command(flatten)]
    scheme: SchemeArgs,
    #[arg(long, default_value_t = 1.0, value_parser = parse_alpha)]
    alpha: f64,
    #[arg(long, default_value_t = 32)]
    n_elements: usize,
    #[arg(long, default_value_t = 15)]
    periods: usize,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
struct OoaArgs {
    #[command(flatten)]
    scheme: SchemeArgs,
    #[arg(long, default_value_t = 1.0, value_parser = parse_alpha)]
    alpha: f64,
    /// Mesh sizes (at least four).
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_ELEMENT_COUNTS)]
    elements: Vec<usize>,
    #[arg(long, default_value_t = PI)]
    t_end: f64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
struct SearchArgs {
    #[arg(long, default_value_t = 3)]
    p: usize,
    #[arg(long, default_value = "rk44")]
    rk: String,
    /// Candidate values for each of ι₁..ι_p (default 0, ±1e-5 … ±1e-1).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    values: Option<Vec<f64>>,
    /// Minimum fitted order (default p + 0.8).
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, default_value_t = 128)]
    k_samples: usize,
    #[arg(long, default_value_t = PI)]
    t_end: f64,
    #[command(flatten)]
    out: OutArgs,
}

fn parse_rk(s: &str) -> Result<RkScheme> {
    s.parse()
}

fn grid(values: &Option<Vec<f64>>) -> Result<SearchGrid> {
    match values {
        None => Ok(SearchGrid::default()),
        Some(v) if v.is_empty() || v.iter().any(|x| !x.is_finite()) => {
            Err(Error::invalid("values", "need at least one finite value"))
        }
        Some(v) => Ok(SearchGrid { values: v.clone() }),
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Writes `{"config": …, "result": …}`.
fn write_json(out: &OutArgs, config: &impl Serialize, result: &impl Serialize) -> Result<()> {
    if let Some(path) = &out.out {
        let mut w = create(path)?;
        let doc = json!({ "config": config, "result": result });
        serde_json::to_writer_pretty(&mut w, &doc).map_err(|e| Error::Io(e.to_string()))?;
        writeln!(w)?;
        w.flush()?;
    }
    Ok(())
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn corr_solve(a: &CorrArgs) -> Result<()> {
    let (params, pair) = a.scheme.pair()?;
    let doc = CorrectionDoc::new(params.iota_f64(), &pair);
    write_json(&a.out, a, &doc)?;
    println!("corr solve: p = {}, h_l = {}", params.p(), fmt_vec(&pair.h_l.coeffs));
    Ok(())
}

fn corr_bounds(a: &CorrArgs) -> Result<()> {
    let params = a.scheme.params()?;
    bound_rules(params.p())?;
    let b = sufficient_bounds(&params)?;
    write_json(&a.out, a, &b)?;
    println!(
        "corr bounds: satisfied = {}, positive definite = {}, lower = {}",
        b.satisfied,
        b.positive_definite,
        fmt_vec(&b.lower)
    );
    Ok(())
}

fn corr_identify(a: &IdentifyArgs) -> Result<()> {
    let pair = match &a.input {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            let value: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| Error::invalid("input", e.to_string()))?;
            let body = value.get("result").cloned().unwrap_or(value);
            let doc: CorrectionDoc = serde_json::from_value(body).map_err(|e| Error::invalid("input", e.to_string()))?;
            doc.to_pair()?
        }
        None => a.scheme.pair()?.1,
    };
    let p = pair.p;
    let osfr = osfr_iota_from_hl(p, &pair.h_l, MEMBERSHIP_TOL)?;
    let esfr = if p == 3 { Some(esfr3_membership(&pair.g_l, MEMBERSHIP_TOL)?) } else { None };
    let recovered = recover_iota(p, &pair.h_l);
    let result = json!({
        "p": p,
        "osfr": osfr,
        "esfr": esfr,
        "recovered_iota": recovered.as_ref().ok(),
        "recovery_error": recovered.as_ref().err().map(|e| e.to_string()),
    });
    write_json(&a.out, a, &result)?;
    println!(
        "corr identify: OSFR member = {}, ESFR member = {}, recovered I_p = {}",
        osfr.is_member(),
        esfr.as_ref().map_or("n/a".to_string(), |m| m.is_member().to_string()),
        recovered.as_ref().map_or_else(|e| e.to_string(), |v| fmt_vec(v))
    );
    Ok(())
}

fn vn_dispersion(a: &DispersionArgs) -> Result<()> {
    if a.k_samples == 0 {
        return Err(Error::invalid("k_samples", "must be positive"));
    }
    let (_, pair) = a.scheme.pair()?;
    let ops = SchemeOperators::from_correction(&pair, a.flux.node_kind()?, a.flux.alpha, 1.0)?;
    let curve = spectral::dispersion_curve(&ops, &spectral::k_hat_grid(a.k_samples))?;
    if let Some(path) = &a.out.out {
        if is_csv(path) {
            let mut w = create(path)?;
            spectral::write_dispersion_csv(&curve, &mut w)?;
            w.flush()?;
        } else {
            write_json(&a.out, a, &curve)?;
        }
    }
    let worst = curve
        .iter()
        .map(|r| r.omega_im[r.physical_mode_index])
        .fold(f64::NEG_INFINITY, f64::max);
    println!("vn dispersion: {} samples, max physical Im(ω̂) = {worst:.3e}", curve.len());
    Ok(())
}

fn vn_cfl(a: &CflArgs) -> Result<()> {
    let rk = parse_rk(&a.rk)?;
    if a.k_samples == 0 {
        return Err(Error::invalid("k_samples", "must be positive"));
    }
    let (_, pair) = a.scheme.pair()?;
    let ops = SchemeOperators::from_correction(&pair, a.flux.node_kind()?, a.flux.alpha, 1.0)?;
    let r = cfl_limit(&ops, rk, a.k_samples)?;
    write_json(&a.out, a, &r)?;
    println!(
        "vn cfl: {} tau_max = {:.6} (J = 1), tau/dx = {:.6}, worst k_hat = {:.4}",
        rk.name(),
        r.tau_max,
        r.cfl,
        r.worst_k
    );
    Ok(())
}

fn random_admissible(p: usize, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let rules = bound_rules(p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let mut iota = vec![1.0; p + 1];
            for rule in rules.iter().skip(1) {
                let lo = rule.lower_f64(&iota);
                iota[rule.index] = lo + 10f64.powf(rng.gen_range(-5.0..-1.0));
            }
            iota
        })
        .collect())
}

fn vn_sweep(a: &SweepArgs) -> Result<()> {
    let rk = parse_rk(&a.rk)?;
    let node_kind = a.flux.node_kind()?;
    CorrectionParams::dg(a.p)?;
    let points = match a.random_points {
        Some(n) => random_admissible(a.p, n, a.seed)?,
        None => grid(&a.values)?.points(a.p),
    };
    let rows: Vec<(Vec<f64>, Option<f64>)> = points
        .into_par_iter()
        .map(|iota| {
            let tau = CorrectionParams::from_f64(a.p, &iota)
                .and_then(|params| solve_correction(&params))
                .and_then(|pair| SchemeOperators::from_correction(&pair, node_kind, a.flux.alpha, 1.0))
                .and_then(|ops| cfl_limit(&ops, rk, a.k_samples))
                .map(|r| r.tau_max)
                .ok();
            (iota, tau)
        })
        .collect();
    if let Some(path) = &a.out.out {
        if is_csv(path) {
            let mut w = create(path)?;
            let header: Vec<String> = (1..=a.p).map(|i| format!("iota_{i}")).chain(["tau_max".into()]).collect();
            writeln!(w, "{}", header.join(","))?;
            for (iota, tau) in &rows {
                let mut cells: Vec<String> = iota[1..].iter().map(|x| format!("{x:.16e}")).collect();
                cells.push(tau.map_or("nan".into(), |t| format!("{t:.16e}")));
                writeln!(w, "{}", cells.join(","))?;
            }
            w.flush()?;
        } else {
            let result: Vec<_> = rows.iter().map(|(i, t)| json!({ "iota": i, "tau_max": t })).collect();
            write_json(&a.out, a, &result)?;
        }
    }
    let best = rows
        .iter()
        .filter_map(|(i, t)| t.map(|t| (i, t)))
        .max_by(|x, y| x.1.total_cmp(&y.1));
    match best {
        Some((iota, tau)) => println!("vn sweep: {} points, best tau_max = {tau:.6} at {}", rows.len(), fmt_vec(iota)),
        None => println!("vn sweep: {} points, none solvable", rows.len()),
    }
    Ok(())
}

fn run_advect(a: &AdvectArgs) -> Result<()> {
    let rk = parse_rk(&a.rk)?;
    if !(a.cfl > 0.0 && a.cfl.is_finite()) {
        return Err(Error::invalid("cfl", "must be positive"));
    }
    if !(a.t_end >= 0.0 && a.t_end.is_finite()) {
        return Err(Error::invalid("t_end", "must be non-negative"));
    }
    if a.n_elements == 0 {
        return Err(Error::invalid("n_elements", "must be positive"));
    }
    let (_, pair) = a.scheme.pair()?;
    let length = 2.0 * PI;
    let dx = length / a.n_elements as f64;
    let ops = SchemeOperators::from_correction(&pair, a.flux.node_kind()?, a.flux.alpha, 0.5 * dx)?;
    let k = a.wavenumber as f64;
    let mut state = MeshState::from_fn(&ops.element, a.n_elements, 0.0, length, |x| (k * x).cos())?;
    let steps = (a.t_end / (a.cfl * dx)).ceil() as usize;
    let tau = if steps == 0 { 0.0 } else { a.t_end / steps as f64 };
    for step in 0..steps {
        state = rk_advance(|s| linear_advection_rhs(&ops, s), &state, tau, rk);
        if state.u.iter().any(|u| !u.is_finite() || u.abs() > 1e3) {
            return Err(Error::UnstableRun {
                time: (step + 1) as f64 * tau,
                detail: "solution exceeded 1e3".into(),
            });
        }
    }
    let x = state.node_positions(&ops.element);
    let err = x.iter().zip(&state.u).map(|(x, u)| (u - (k * (x - a.t_end)).cos()).abs()).sum::<f64>() / x.len() as f64;
    let energy = state.energy(&ops.element);
    if let Some(path) = &a.out.out {
        if is_csv(path) {
            let mut w = create(path)?;
            state.write_csv(&ops.element, &mut w)?;
            w.flush()?;
        } else {
            let result = json!({ "x": x, "u": state.u, "error": err, "energy": energy, "steps": steps, "tau": tau });
            write_json(&a.out, a, &result)?;
        }
    }
    println!("run advect: {steps} steps of {tau:.4e}, mean |error| = {err:.3e}, energy = {energy:.12}");
    Ok(())
}

fn run_hetero(a: &HeteroArgs) -> Result<()> {
    let params = a.scheme.params()?;
    if a.n_elements == 0 {
        return Err(Error::invalid("n_elements", "must be positive"));
    }
    let r = experiments::hetero_energy_study(&params, a.alpha, a.n_elements, a.periods)?;
    if let Some(path) = &a.out.out {
        if is_csv(path) {
            let mut w = create(path)?;
            writeln!(w, "t,energy")?;
            for (t, e) in r.times.iter().zip(&r.energy) {
                writeln!(w, "{t:.16e},{e:.16e}")?;
            }
            w.flush()?;
        } else {
            write_json(&a.out, a, &r)?;
        }
    }
    if let Some(t) = r.blowup_time {
        return Err(Error::UnstableRun {
            time: t,
            detail: format!("energy blow-up after {:.2} periods", t / experiments::hetero_period()),
        });
    }
    println!(
        "run hetero: survived {} periods, |E(nT) - 1| = {}",
        a.periods,
        fmt_vec(&r.error_at_periods)
    );
    Ok(())
}

fn run_ooa(a: &OoaArgs) -> Result<()> {
    let params = a.scheme.params()?;
    let r = experiments::ooa_study(&params, a.alpha, &a.elements, a.t_end)?;
    write_json(&a.out, a, &r)?;
    println!("run ooa: fitted order = {:.4} (R² = {:.6})", r.fitted_order, r.r_squared);
    Ok(())
}

fn search_cfl(a: &SearchArgs) -> Result<()> {
    let rk = parse_rk(&a.rk)?;
    CorrectionParams::dg(a.p)?;
    let g = grid(&a.values)?;
    let threshold = a.threshold.unwrap_or(a.p as f64 + 0.8);
    let r = experiments::cfl_search(
        a.p,
        rk,
        &g,
        threshold,
        SearchOptions {
            k_samples: a.k_samples,
            t_end: a.t_end,
        },
    )?;
    write_json(&a.out, a, &r)?;
    println!(
        "search cfl: best tau = {:.6} at {} (OOA {:.3})",
        r.best_tau,
        fmt_vec(&r.best_iota),
        r.ooa_at_best
    );
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Corr(CorrCommand::Solve(a)) => corr_solve(a),
        Command::Corr(CorrCommand::Bounds(a)) => corr_bounds(a),
        Command::Corr(CorrCommand::Identify(a)) => corr_identify(a),
        Command::Vn(VnCommand::Dispersion(a)) => vn_dispersion(a),
        Command::Vn(VnCommand::Cfl(a)) => vn_cfl(a),
        Command::Vn(VnCommand::Sweep(a)) => vn_sweep(a),
        Command::Run(RunCommand::Advect(a)) => run_advect(a),
        Command::Run(RunCommand::Hetero(a)) => run_hetero(a),
        Command::Run(RunCommand::Ooa(a)) => run_ooa(a),
        Command::Search(SearchCommand::Cfl(a)) => search_cfl(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            if code != 0 && !e.render().to_string().contains("Usage") {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            return ExitCode::from(code);
        }
    };
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be positive\n\n{}", Cli::command().render_usage());
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is_numerical() => {
            eprintln!("numerical failure: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}\n\n{}", Cli::command().render_usage());
            ExitCode::from(1)
        }
    }
}
