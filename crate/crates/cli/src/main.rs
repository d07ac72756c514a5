use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ngsim::gateset::Decomposition;
use ngsim::haar::{self, DiagonalSpectrum};
use ngsim::harness::{self, SweepConfig, SweepPoint};
use ngsim::mapcircuits::{self, collected_gate_count, MapConfig, MapKind};
use ngsim::noise::NoiseConfig;
use ngsim::oracle;
use ngsim::theory;

const SUBCOMMANDS: [&str; 7] = ["simulate", "sweep", "theory", "haar", "verify", "forward-backward", "dump"];

/// Noisy-gate simulation of quantized kicked maps.
///
/// Every subcommand accepts `--config FILE` with `key = value` lines using
/// the long flag names; flags on the command line take precedence.
#[derive(Parser, Debug)]
#[command(name = "ngsim", version, args_override_self = true)]
struct Cli {
    /// Worker threads for realization-level parallelism (default: all cores).
    #[arg(long, global = true, env = "NGSIM_THREADS")]
    threads: Option<usize>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one (n_q, ε) cell and write per-step ensemble statistics as CSV.
    Simulate(SimulateArgs),
    /// Run a grid of (n_q, ε) cells and write one CSV.
    Sweep(SweepArgs),
    /// Print closed-form predictions using the compiled circuit's gate counts.
    Theory(TheoryArgs),
    /// Compare Monte Carlo Haar averages with their closed forms.
    Haar(HaarArgs),
    /// Run the dense-matrix and Haar oracle suites; nonzero exit on failure.
    Verify(VerifyArgs),
    /// Estimate mean fidelity by running a prefix forward and its adjoint back.
    ForwardBackward(ForwardBackwardArgs),
    /// Print the compiled step circuit, one gate per line.
    Dump(DumpArgs),
}

#[derive(Args, Debug, Clone)]
struct MapArgs {
    /// Map family: sawtooth or double-well.
    #[arg(long, default_value = "sawtooth")]
    map: MapKind,
    /// Number of cells L of the classical torus.
    #[arg(long = "cells", alias = "L", default_value_t = MapConfig::DEFAULT_CELLS, value_parser = clap::value_parser!(u32).range(1..))]
    cells: u32,
    /// Kick strength K.
    #[arg(long = "k", alias = "K", default_value_t = MapConfig::DEFAULT_K, value_parser = finite)]
    k: f64,
    /// Double-well minimum position a, in grid units.
    #[arg(long, default_value_t = MapConfig::DEFAULT_A, value_parser = finite)]
    a: f64,
    /// Lowering of multi-controlled phases: ancilla-eager or ancilla-min.
    #[arg(long, default_value = "ancilla-eager")]
    decomposition: Decomposition,
    /// Plain-text defaults file (`key = value` per line).
    #[arg(long)]
    config: Option<PathBuf>,
}

impl MapArgs {
    fn map_config(&self, n_q: usize) -> MapConfig {
        MapConfig {
            cells: self.cells,
            k: self.k,
            a: self.a,
            ..MapConfig::new(self.map, n_q)
        }
    }
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// Map iterations to simulate.
    #[arg(long, default_value_t = 30, value_parser = clap::value_parser!(u64).range(1..))]
    steps: u64,
    /// Noise realizations per cell (default 500 sawtooth, 200 double-well).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    realizations: Option<u64>,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Phase quantum δ in radians for the atomic-phase variant.
    #[arg(long, value_parser = positive)]
    atomic_phase: Option<f64>,
    /// Output file (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    map: MapArgs,
    /// Number of system qubits.
    #[arg(long, value_parser = parse_nq)]
    nq: usize,
    /// Error intensity ε in radians; error angles are uniform on [−ε/2, ε/2].
    #[arg(long, value_parser = parse_epsilon)]
    epsilon: f64,
    #[command(flatten)]
    run: RunArgs,
    /// Also write every realization's trace (realization,step,f) here.
    #[arg(long)]
    traces: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    map: MapArgs,
    /// Qubit counts: `6`, `4..7` (inclusive) or `3,5,8`.
    #[arg(long, value_parser = parse_nq_list)]
    nq: NqList,
    /// Comma-separated error intensities ε in radians.
    #[arg(long, value_parser = parse_epsilon_list)]
    epsilon: EpsList,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args, Debug)]
struct TheoryArgs {
    #[command(flatten)]
    map: MapArgs,
    /// Number of system qubits.
    #[arg(long, value_parser = parse_nq)]
    nq: usize,
    /// Error intensity ε in radians.
    #[arg(long, value_parser = parse_epsilon)]
    epsilon: f64,
    /// Map iterations for the fidelity predictions.
    #[arg(long, default_value_t = 20)]
    steps: u64,
}

#[derive(Args, Debug)]
struct HaarArgs {
    /// Hilbert-space dimension N (even, at least 4 for the two-qubit spectrum).
    #[arg(long = "N", alias = "dim", default_value_t = 8, value_parser = clap::value_parser!(u64).range(2..))]
    dim: u64,
    /// Monte Carlo samples per estimate.
    #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(100..))]
    samples: u64,
    /// Error angle ξ in radians used for the test spectra.
    #[arg(long, default_value_t = 0.5, value_parser = finite)]
    xi: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Largest qubit count checked by the dense oracles.
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(3..=7))]
    nq: u64,
    /// Random β per (n_q, p) in the gate-collection check.
    #[arg(long, default_value_t = 20)]
    betas: u64,
    /// Samples per Haar check.
    #[arg(long, default_value_t = 20_000, value_parser = clap::value_parser!(u64).range(100..))]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ForwardBackwardArgs {
    #[command(flatten)]
    map: MapArgs,
    /// Number of system qubits.
    #[arg(long, value_parser = parse_nq)]
    nq: usize,
    /// Error intensity ε in radians.
    #[arg(long, value_parser = parse_epsilon)]
    epsilon: f64,
    /// Map iterations in the forward prefix; the full run has twice the gates.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    steps: u64,
    #[arg(long, default_value_t = 500, value_parser = clap::value_parser!(u64).range(2..))]
    realizations: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct DumpArgs {
    #[command(flatten)]
    map: MapArgs,
    /// Number of system qubits.
    #[arg(long, value_parser = parse_nq)]
    nq: usize,
    /// Output file (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Debug)]
struct NqList(Vec<usize>);

#[derive(Clone, Debug)]
struct EpsList(Vec<f64>);

fn finite(s: &str) -> Result<f64, String> {
    let x: f64 = s.trim().parse().map_err(|e| format!("{e}"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err("must be finite".into())
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let x = finite(s)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err("must be positive".into())
    }
}

fn parse_epsilon(s: &str) -> Result<f64, String> {
    let x = finite(s)?;
    if x >= 0.0 {
        Ok(x)
    } else {
        Err("ε must be non-negative".into())
    }
}

fn parse_epsilon_list(s: &str) -> Result<EpsList, String> {
    let v = s.split(',').map(parse_epsilon).collect::<Result<Vec<_>, _>>()?;
    Ok(EpsList(v))
}

fn parse_nq(s: &str) -> Result<usize, String> {
    let n: usize = s.trim().parse().map_err(|e| format!("{e}"))?;
    if (2..ngsim::statevector::MAX_QUBITS).contains(&n) {
        Ok(n)
    } else {
        Err(format!("n_q must lie in 2..{}", ngsim::statevector::MAX_QUBITS - 1))
    }
}

fn parse_nq_list(s: &str) -> Result<NqList, String> {
    let mut out = Vec::new();
    for part in s.split(',') {
        if let Some((lo, hi)) = part.split_once("..") {
            let (lo, hi) = (parse_nq(lo)?, parse_nq(hi.trim_start_matches('='))?);
            if lo > hi {
                return Err(format!("empty range {part}"));
            }
            out.extend(lo..=hi);
        } else {
            out.push(parse_nq(part)?);
        }
    }
    Ok(NqList(out))
}

/// Parses `key = value` lines; `#` starts a comment.
fn read_config(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut args = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("{}:{}: expected key = value", path.display(), i + 1);
        };
        args.push(format!("--{}", k.trim()));
        args.push(v.trim().to_string());
    }
    Ok(args)
}

/// Splices config-file flags in right after the subcommand, so explicit
/// flags (which come later) override them.
fn expand_config(argv: Vec<String>) -> Result<Vec<String>> {
    let path = argv.iter().enumerate().find_map(|(i, a)| {
        if a == "--config" {
            argv.get(i + 1).cloned()
        } else {
            a.strip_prefix("--config=").map(str::to_string)
        }
    });
    let Some(path) = path else {
        return Ok(argv);
    };
    let Some(pos) = argv.iter().position(|a| SUBCOMMANDS.contains(&a.as_str())) else {
        return Ok(argv);
    };
    let extra = read_config(Path::new(&path))?;
    let mut out = argv[..=pos].to_vec();
    out.extend(extra);
    out.extend_from_slice(&argv[pos + 1..]);
    Ok(out)
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn sweep_config(map: &MapArgs, run: &RunArgs) -> SweepConfig {
    let base = map.map_config(2);
    SweepConfig {
        map: base,
        decomposition: map.decomposition,
        steps: run.steps as usize,
        realizations: run
            .realizations
            .map_or(harness::default_realizations(map.map), |r| r as usize),
        seed: run.seed,
        atomic_phase: run.atomic_phase,
    }
}

fn summarize(p: &SweepPoint) {
    if let Some(e) = &p.error {
        eprintln!("{} n_q={} eps={}: failed: {e}", p.map_kind, p.n_q, p.epsilon);
        return;
    }
    eprintln!(
        "{} n_q={} eps={} n_g={} ({}+{}) gamma={:.5e}±{:.1e} gamma_th={:.5e} ratio={:.4} wrong_meas={} bound_violations={}",
        p.map_kind,
        p.n_q,
        p.epsilon,
        p.n_gates(),
        p.n1,
        p.n2,
        p.gamma_fit(),
        p.gamma_std_error,
        p.gamma_th,
        p.gamma_ratio(),
        p.wrong_measurements,
        p.bound_violations
    );
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let cfg = sweep_config(&a.map, &a.run);
    let run = harness::run_cell(&cfg, a.nq, a.epsilon)?;
    summarize(&run.point);
    let mut out = output(&a.run.out)?;
    harness::write_csv(&mut out, std::slice::from_ref(&run.point))?;
    out.flush()?;
    if let Some(path) = &a.traces {
        let mut w = output(&Some(path.clone()))?;
        writeln!(w, "realization,step,f")?;
        for tr in &run.traces {
            for (t, f) in &tr.steps {
                writeln!(w, "{},{t},{f:.16e}", tr.realization_id)?;
            }
        }
        w.flush()?;
    }
    Ok(())
}

fn sweep(a: &SweepArgs) -> Result<()> {
    let cfg = sweep_config(&a.map, &a.run);
    let grid: Vec<(usize, f64)> = a
        .nq
        .0
        .iter()
        .flat_map(|&n| a.epsilon.0.iter().map(move |&e| (n, e)))
        .collect();
    info!("sweep over {} cells", grid.len());
    let points = harness::run_sweep(&grid, &cfg);
    points.iter().for_each(summarize);
    let mut out = output(&a.run.out)?;
    harness::write_csv(&mut out, &points)?;
    out.flush()?;
    if points.iter().any(|p| p.error.is_some()) {
        bail!("some sweep cells failed");
    }
    Ok(())
}

fn theory_cmd(a: &TheoryArgs) -> Result<()> {
    let cfg = a.map.map_config(a.nq);
    let c = mapcircuits::map_step_circuit(&cfg, a.map.decomposition)?;
    let pred = theory::predict(c.n1, c.n2, a.epsilon, a.nq as u32)?;
    let n_g = c.n_gates() as u64;
    let total = n_g * a.steps;
    let mut o = io::stdout().lock();
    writeln!(o, "{}", mapcircuits::describe(&cfg, a.map.decomposition))?;
    writeln!(o, "epsilon            {:e} rad", a.epsilon)?;
    writeln!(o, "n1 n2 n_g          {} {} {}", c.n1, c.n2, n_g)?;
    writeln!(o, "ancilla resets     {}", c.measurement_count())?;
    writeln!(o, "sigma*^2           {:.10e}", pred.sigma_star_sq)?;
    writeln!(o, "A = N/(1+N)        {:.10}", pred.a)?;
    writeln!(o, "gamma_th           {:.10e} per step", pred.gamma_th)?;
    writeln!(o, "varsigma*          {:.10e}", pred.varsigma_star)?;
    writeln!(o, "std ratio          {:.10e}", theory::fidelity_std_ratio(a.nq as u32))?;
    writeln!(o, "after {} steps ({} gates):", a.steps, total)?;
    writeln!(o, "  mean fidelity    {:.10}", theory::mean_fidelity(total, pred.sigma_star_sq, a.nq as u32))?;
    writeln!(o, "  bound 1-f        {:.10e}", theory::fidelity_bound(total, a.epsilon))?;
    writeln!(o, "  incoherent 1-f   {:.10e}", theory::incoherent_estimate(total, a.epsilon))?;
    Ok(())
}

fn test_spectra(xi: f64, dim: usize) -> Vec<(&'static str, Result<DiagonalSpectrum, haar::HaarError>)> {
    vec![
        ("{+xi/2,-xi/2}", DiagonalSpectrum::embedded(&[xi / 2.0, -xi / 2.0], dim)),
        ("{0,0,0,xi}", DiagonalSpectrum::embedded(&[0.0, 0.0, 0.0, xi], dim)),
    ]
}

fn haar_cmd(a: &HaarArgs) -> Result<()> {
    let dim = a.dim as usize;
    let n = a.samples as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut o = io::stdout().lock();
    writeln!(o, "N={dim} samples={n} xi={}", a.xi)?;
    writeln!(o, "{:<16} {:>4} {:>16} {:>16} {:>12} {:>8}", "spectrum", "qty", "mc", "analytic", "s.e.", "z")?;
    for (name, s) in test_spectra(a.xi, dim) {
        let Ok(s) = s else {
            writeln!(o, "{name:<16} skipped: does not embed in N={dim}")?;
            continue;
        };
        for (qty, est, exact) in [
            ("I2", haar::mc_i2(&s, n, &mut rng)?, haar::analytic_i2(&s)),
            ("J2", haar::mc_j2(&s, n, &mut rng)?, haar::analytic_j2(&s)),
        ] {
            writeln!(
                o,
                "{name:<16} {qty:>4} {:>16.10e} {:>16.10e} {:>12.3e} {:>8.3}",
                est.mean,
                exact,
                est.std_error,
                est.z_score(exact)
            )?;
        }
    }
    let c = haar::concentration_check(dim, n, &mut rng)?;
    let target = haar::concentration_variance(dim);
    writeln!(
        o,
        "concentration  <p>={:.6} (z={:.3}) var={:.6e} expected={:.6e} z={:.3}",
        c.mean.mean,
        c.mean.z_score(0.5),
        c.variance,
        target,
        c.variance_z_score(target)
    )?;
    Ok(())
}

fn verify(a: &VerifyArgs) -> Result<()> {
    const Z_MAX: f64 = 4.0;
    let max_n = a.nq as usize;
    let mut failures = 0;
    let mut report = |ok: bool, line: String| {
        println!("{} {line}", if ok { "ok  " } else { "FAIL" });
        if !ok {
            failures += 1;
        }
    };
    for kind in [MapKind::Sawtooth, MapKind::DoubleWell] {
        for n in 3..=max_n {
            for strategy in [Decomposition::AncillaEager, Decomposition::AncillaMin] {
                let dev = oracle::floquet_deviation(&MapConfig::new(kind, n), strategy)?;
                report(dev < 1e-9, format!("floquet {kind} n_q={n} {}: {dev:.2e}", strategy.name()));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    for n in 1..=max_n.min(5) {
        for p in 1..=4 {
            let mut worst: f64 = 0.0;
            for _ in 0..a.betas {
                let num = rand::Rng::random_range(&mut rng, -(1i64 << 40)..(1i64 << 40));
                worst = worst.max(oracle::collection_deviation(n, p, num, 41, Decomposition::AncillaEager)?);
            }
            let count = collected_gate_count(n, p);
            let built = mapcircuits::exponentiation_circuit(
                ngsim::FixedPointPhase::ZERO,
                p,
                &(0..n).collect::<Vec<_>>(),
            )
            .len();
            report(
                worst < 1e-10 && count == built,
                format!(
                    "collection n_q={n} p={p}: dev {worst:.2e}, {built} gates (plain {})",
                    oracle::plain_gate_count(n, p)
                ),
            );
        }
    }
    let n = a.samples as usize;
    for dim in [2usize, 4, 8, 16] {
        for (name, s) in test_spectra(0.5, dim) {
            let Ok(s) = s else { continue };
            let i2 = haar::mc_i2(&s, n, &mut rng)?;
            let j2 = haar::mc_j2(&s, n, &mut rng)?;
            let zi = i2.z_score(haar::analytic_i2(&s));
            let zj = j2.z_score(haar::analytic_j2(&s));
            report(
                zi.abs() < Z_MAX && zj.abs() < Z_MAX,
                format!("haar N={dim} {name}: z(I2)={zi:.2} z(J2)={zj:.2}"),
            );
        }
        let c = haar::concentration_check(dim, n, &mut rng)?;
        let z = c.variance_z_score(haar::concentration_variance(dim));
        let zm = c.mean.z_score(0.5);
        report(
            z.abs() < Z_MAX && zm.abs() < Z_MAX,
            format!("concentration N={dim}: z(mean)={zm:.2} z(var)={z:.2}"),
        );
    }
    if failures > 0 {
        bail!("{failures} verification checks failed");
    }
    println!("all checks passed");
    Ok(())
}

fn forward_backward(a: &ForwardBackwardArgs) -> Result<()> {
    let cfg = a.map.map_config(a.nq);
    let step = mapcircuits::map_step_circuit(&cfg, a.map.decomposition)?;
    let prefix = step.repeated(a.steps as usize);
    let noise = NoiseConfig::new(a.epsilon, a.seed)?;
    let (mean, se) = harness::forward_backward_probability(&prefix, &noise, a.realizations as usize)?;
    let pred = theory::predict(step.n1, step.n2, a.epsilon, a.nq as u32)?;
    let n_g = 2 * prefix.n_gates() as u64;
    println!("prefix gates       {}", prefix.n_gates());
    println!("total gates        {n_g}");
    println!("return probability {mean:.10} ± {se:.2e}");
    println!(
        "predicted <f>      {:.10}",
        theory::mean_fidelity(n_g, pred.sigma_star_sq, prefix.n_wires() as u32)
    );
    Ok(())
}

fn dump(a: &DumpArgs) -> Result<()> {
    let cfg = a.map.map_config(a.nq);
    let c = mapcircuits::map_step_circuit(&cfg, a.map.decomposition)?;
    let mut out = output(&a.out)?;
    out.write_all(c.dump(&mapcircuits::describe(&cfg, a.map.decomposition)).as_bytes())?;
    out.flush()?;
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::Theory(a) => theory_cmd(a),
        Command::Haar(a) => haar_cmd(a),
        Command::Verify(a) => verify(a),
        Command::ForwardBackward(a) => forward_backward(a),
        Command::Dump(a) => dump(a),
    }
}

fn main() -> ExitCode {
    let argv = match expand_config(std::env::args().collect()) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let matches = Cli::command().try_get_matches_from(argv);
    let cli = match matches.and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
