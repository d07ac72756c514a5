//! Monte Carlo experiments: ideal and noisy evolution with exact fidelity,
//! the forward-backward protocol, decay-rate fits, fluctuation statistics
//! and sweep aggregation into CSV.

use std::io::Write;

use log::{debug, info};
use rayon::prelude::*;
use thiserror::Error;

use crate::gateset::{Decomposition, Gate};
use crate::mapcircuits::{initial_state, map_step_circuit, CompiledCircuit, MapConfig, MapError, MapKind};
use crate::noise::{apply_ideal, apply_noisy_fused, NoiseConfig, NoiseError, NoiseStream};
use crate::statevector::{inner_unchecked, QubitIndex, StateError, StateVector};
use crate::theory::{self, TheoryError};

/// Maximum tolerated `|‖ψ‖² − 1|` at a step boundary.
pub const NORM_DRIFT_LIMIT: f64 = 1e-8;
/// Fits use the leading steps with `⟨f⟩` at or above this value.
pub const FIT_THRESHOLD: f64 = 0.9;
/// Minimum number of in-window points with `t > 0`.
pub const MIN_FIT_POINTS: usize = 5;
/// Slack on the quadratic bound.
pub const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("norm drift {drift:e} at step {step} of realization {realization}")]
    Integrity { realization: u64, step: usize, drift: f64 },
    #[error("fit needs at least {MIN_FIT_POINTS} points with <f> >= {FIT_THRESHOLD}, found {0}")]
    InsufficientData(usize),
    #[error("fluctuation ratio undefined: 1 - <f> = {0:e}")]
    RatioUndefined(f64),
    #[error("need at least 2 traces, got {0}")]
    TooFewTraces(usize),
    #[error("step {0} is beyond the recorded traces")]
    StepOutOfRange(usize),
    #[error("the forward-backward protocol needs a circuit without measurements")]
    UnsupportedMeasurement,
    #[error("t_max and realization count must be at least 1")]
    Empty,
}

/// Applies a circuit noiselessly; resets are skipped (the ideal ancilla is
/// exactly `|0⟩` at every reset).
pub fn apply_circuit_ideal(state: &mut StateVector, gates: &[Gate]) {
    for g in gates {
        apply_ideal(state, g, None);
    }
}

/// Ideal states after each of `0..=t_max` steps.
pub fn ideal_trajectory(circuit: &CompiledCircuit, initial: &StateVector, t_max: usize) -> Vec<StateVector> {
    let mut out = Vec::with_capacity(t_max + 1);
    let mut s = initial.clone();
    out.push(s.clone());
    for _ in 0..t_max {
        apply_circuit_ideal(&mut s, &circuit.gates);
        out.push(s.clone());
    }
    out
}

/// One realization's fidelity record.
#[derive(Clone, Debug, PartialEq)]
pub struct FidelityTrace {
    pub realization_id: u64,
    /// `(t, f)` for `t = 0..=t_max`.
    pub steps: Vec<(usize, f64)>,
    /// `(t, gate index within the step)` of every reset that read 1.
    pub wrong_measurements: Vec<(usize, usize)>,
    /// Steps where `1 − f` exceeded `min(1, (N_g ε/8)²)`.
    pub bound_violations: usize,
}

impl FidelityTrace {
    pub fn fidelity(&self, t: usize) -> Option<f64> {
        self.steps.get(t).map(|s| s.1)
    }

    pub fn is_monotone(&self) -> bool {
        self.steps.windows(2).all(|w| w[1].1 <= w[0].1)
    }

    /// Whether `f` fell below `threshold` at the step of the first wrong
    /// measurement or the step after. `None` without wrong measurements.
    pub fn drops_after_wrong_measurement(&self, threshold: f64) -> Option<bool> {
        let (t, _) = *self.wrong_measurements.first()?;
        let at = |k: usize| self.fidelity(k).is_some_and(|f| f < threshold);
        Some(at(t) || at(t + 1))
    }
}

/// One realization of `t_max` steps from `initial`.
pub fn run_realization(
    circuit: &CompiledCircuit,
    initial: &StateVector,
    noise: &NoiseConfig,
    realization: u64,
    t_max: usize,
) -> Result<FidelityTrace, HarnessError> {
    if t_max == 0 {
        return Err(HarnessError::Empty);
    }
    run_realization_with_ideal(circuit, &ideal_trajectory(circuit, initial, t_max), noise, realization)
}

/// Noisy evolution of one realization against a precomputed ideal
/// trajectory. Draw `k` of step `t` (1-based) uses gate index
/// `(t − 1)·len + k`.
pub fn run_realization_with_ideal(
    circuit: &CompiledCircuit,
    ideal: &[StateVector],
    noise: &NoiseConfig,
    realization: u64,
) -> Result<FidelityTrace, HarnessError> {
    let t_max = ideal.len().checked_sub(1).ok_or(HarnessError::Empty)?;
    let mut stream = NoiseStream::new(noise, realization);
    let mut state = ideal[0].clone();
    let len = circuit.gates.len() as u64;
    let check_bound = circuit.is_unitary();
    let mut steps = Vec::with_capacity(t_max + 1);
    steps.push((0, 1.0));
    let mut wrong = Vec::new();
    let mut violations = 0;
    for (t, ideal_t) in ideal.iter().enumerate().skip(1) {
        let base = (t as u64 - 1) * len;
        for (k, g) in circuit.gates.iter().enumerate() {
            let d = stream.draw(base + k as u64);
            match *g {
                Gate::AncillaMeasureReset(q) => {
                    if state.reset_qubit_to_zero(QubitIndex(q), d.u)? {
                        wrong.push((t, k));
                    }
                }
                _ => apply_noisy_fused(&mut state, g, &d, noise),
            }
        }
        let drift = (state.norm_sqr() - 1.0).abs();
        if drift > NORM_DRIFT_LIMIT {
            return Err(HarnessError::Integrity { realization, step: t, drift });
        }
        let f = inner_unchecked(ideal_t.amplitudes(), state.amplitudes()).norm_sqr().min(1.0);
        if check_bound {
            let bound = theory::fidelity_bound((circuit.n_gates() * t) as u64, noise.epsilon());
            if 1.0 - f > bound + BOUND_SLACK {
                violations += 1;
            }
        }
        steps.push((t, f));
    }
    Ok(FidelityTrace {
        realization_id: realization,
        steps,
        wrong_measurements: wrong,
        bound_violations: violations,
    })
}

/// `realizations` independent traces, computed in parallel and returned in
/// realization order.
pub fn run_ensemble(
    circuit: &CompiledCircuit,
    initial: &StateVector,
    noise: &NoiseConfig,
    t_max: usize,
    realizations: usize,
) -> Result<Vec<FidelityTrace>, HarnessError> {
    if t_max == 0 || realizations == 0 {
        return Err(HarnessError::Empty);
    }
    let ideal = ideal_trajectory(circuit, initial, t_max);
    (0..realizations as u64)
        .into_par_iter()
        .map(|r| run_realization_with_ideal(circuit, &ideal, noise, r))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub gamma: f64,
    /// Number of leading steps (including `t = 0`) used.
    pub fit_window: usize,
    /// RMS residual of `1 − ⟨f⟩ − Γt` over the window.
    pub residual: f64,
}

fn fit_window(mean_trace: &[(usize, f64)]) -> usize {
    mean_trace.iter().take_while(|(_, f)| *f >= FIT_THRESHOLD).count()
}

fn slope_through_origin(points: &[(usize, f64)]) -> f64 {
    let (num, den) = points.iter().fold((0.0, 0.0), |(n, d), &(t, f)| {
        let t = t as f64;
        (n + t * (1.0 - f), d + t * t)
    });
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Least-squares slope of `1 − ⟨f⟩` against `t` through the origin, over
/// the leading steps with `⟨f⟩ ≥ 0.9`.
pub fn fit_gamma(mean_trace: &[(usize, f64)]) -> Result<FitResult, HarnessError> {
    let w = fit_window(mean_trace);
    let pts = &mean_trace[..w];
    let usable = pts.iter().filter(|(t, _)| *t > 0).count();
    if usable < MIN_FIT_POINTS {
        return Err(HarnessError::InsufficientData(usable));
    }
    let gamma = slope_through_origin(pts);
    let residual = (pts
        .iter()
        .map(|&(t, f)| (1.0 - f - gamma * t as f64).powi(2))
        .sum::<f64>()
        / w as f64)
        .sqrt();
    Ok(FitResult {
        gamma,
        fit_window: w,
        residual,
    })
}

/// Standard error of `Γ` from the spread of per-realization slopes over the
/// same window. The mean of those slopes is exactly the ensemble fit.
pub fn gamma_std_error(traces: &[FidelityTrace], fit: &FitResult) -> f64 {
    let n = traces.len();
    if n < 2 {
        return f64::NAN;
    }
    let slopes: Vec<f64> = traces
        .iter()
        .map(|tr| slope_through_origin(&tr.steps[..fit.fit_window]))
        .collect();
    let mean = slopes.iter().sum::<f64>() / n as f64;
    let var = slopes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

/// Ensemble mean of `f` at every step.
pub fn mean_trace(traces: &[FidelityTrace]) -> Vec<(usize, f64)> {
    let Some(first) = traces.first() else {
        return Vec::new();
    };
    let n = traces.len() as f64;
    (0..first.steps.len())
        .map(|k| (first.steps[k].0, traces.iter().map(|tr| tr.steps[k].1).sum::<f64>() / n))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluctuationStats {
    pub mean_f: f64,
    /// Sample standard deviation.
    pub std_f: f64,
    /// `σ(f)/(1 − ⟨f⟩)`.
    pub ratio: f64,
    /// Jackknife standard error of `ratio`.
    pub ratio_std_error: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn fluctuation_stats(traces: &[FidelityTrace], t: usize) -> Result<FluctuationStats, HarnessError> {
    if traces.len() < 2 {
        return Err(HarnessError::TooFewTraces(traces.len()));
    }
    let fs: Vec<f64> = traces
        .iter()
        .map(|tr| tr.fidelity(t).ok_or(HarnessError::StepOutOfRange(t)))
        .collect::<Result<_, _>>()?;
    let (mean, std) = mean_std(&fs);
    if 1.0 - mean < 1e-12 {
        return Err(HarnessError::RatioUndefined(1.0 - mean));
    }
    let ratio = std / (1.0 - mean);
    let n = fs.len();
    let ratio_std_error = if n < 3 {
        f64::NAN
    } else {
        // leave-one-out from running sums of deviations about the full mean
        let s1: f64 = fs.iter().map(|f| f - mean).sum();
        let s2: f64 = fs.iter().map(|f| (f - mean).powi(2)).sum();
        let m = (n - 1) as f64;
        let loo: Vec<f64> = fs
            .iter()
            .map(|&f| {
                let d = f - mean;
                let a1 = s1 - d;
                let a2 = s2 - d * d;
                let mu = a1 / m;
                let var = (a2 - m * mu * mu) / (m - 1.0);
                var.max(0.0).sqrt() / (1.0 - (mean + mu))
            })
            .collect();
        let avg = loo.iter().sum::<f64>() / n as f64;
        let jk = loo.iter().map(|r| (r - avg).powi(2)).sum::<f64>() * m / n as f64;
        jk.sqrt()
    };
    Ok(FluctuationStats {
        mean_f: mean,
        std_f: std,
        ratio,
        ratio_std_error,
    })
}

/// Return probability to `|0…0⟩` after the noisy prefix and its noisy
/// adjoint, for each realization. Backward draws use indices after the
/// forward ones, so they are independent.
pub fn forward_backward_samples(
    prefix: &CompiledCircuit,
    noise: &NoiseConfig,
    n_realizations: usize,
) -> Result<Vec<f64>, HarnessError> {
    let backward = prefix.adjoint().ok_or(HarnessError::UnsupportedMeasurement)?;
    if n_realizations == 0 {
        return Err(HarnessError::Empty);
    }
    let len = prefix.gates.len() as u64;
    let n_wires = prefix.n_wires();
    (0..n_realizations as u64)
        .into_par_iter()
        .map(|r| {
            let mut stream = NoiseStream::new(noise, r);
            let mut s = StateVector::new_basis_state(n_wires, 0)?;
            for (k, g) in prefix.gates.iter().enumerate() {
                apply_noisy_fused(&mut s, g, &stream.draw(k as u64), noise);
            }
            for (k, g) in backward.gates.iter().enumerate() {
                apply_noisy_fused(&mut s, g, &stream.draw(len + k as u64), noise);
            }
            Ok(s.amplitudes()[0].norm_sqr())
        })
        .collect()
}

/// Mean return probability and its standard error.
pub fn forward_backward_probability(
    prefix: &CompiledCircuit,
    noise: &NoiseConfig,
    n_realizations: usize,
) -> Result<(f64, f64), HarnessError> {
    let p = forward_backward_samples(prefix, noise, n_realizations)?;
    if p.len() < 2 {
        return Ok((p[0], f64::NAN));
    }
    let (mean, std) = mean_std(&p);
    Ok((mean, std / (p.len() as f64).sqrt()))
}

/// Template for one sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepConfig {
    pub map: MapConfig,
    pub decomposition: Decomposition,
    pub steps: usize,
    pub realizations: usize,
    pub seed: u64,
    pub atomic_phase: Option<f64>,
}

impl SweepConfig {
    pub fn new(kind: MapKind) -> Self {
        Self {
            map: MapConfig::new(kind, 2),
            decomposition: Decomposition::default(),
            steps: 30,
            realizations: default_realizations(kind),
            seed: 0,
            atomic_phase: None,
        }
    }
}

/// 500 realizations for the sawtooth map, 200 for the double-well map.
pub fn default_realizations(kind: MapKind) -> usize {
    match kind {
        MapKind::Sawtooth => 500,
        MapKind::DoubleWell => 200,
    }
}

/// Seed of one grid cell, independent of the grid's order.
pub fn cell_seed(master: u64, n_q: usize, epsilon: f64) -> u64 {
    let mut z = master ^ (n_q as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ epsilon.to_bits().rotate_left(17);
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-step ensemble statistics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepStats {
    pub step: usize,
    pub mean_f: f64,
    pub std_f: f64,
    pub ratio: f64,
}

/// Results for one `(n_q, ε)` cell.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub map_kind: MapKind,
    pub n_q: usize,
    pub epsilon: f64,
    pub decomposition: Decomposition,
    pub seed: u64,
    pub n_realizations: usize,
    pub n1: usize,
    pub n2: usize,
    pub steps: Vec<StepStats>,
    pub fit: Option<FitResult>,
    pub gamma_std_error: f64,
    pub gamma_th: f64,
    pub wrong_measurements: usize,
    /// Traces with at least one wrong measurement.
    pub anomalous_traces: usize,
    /// Anomalous traces whose fidelity fell below 1/2 within one step.
    pub anomalous_drops: usize,
    pub bound_violations: usize,
    /// Traces whose fidelity is not monotone non-increasing.
    pub non_monotone_traces: usize,
    pub error: Option<String>,
}

impl SweepPoint {
    pub fn n_gates(&self) -> usize {
        self.n1 + self.n2
    }

    pub fn gamma_fit(&self) -> f64 {
        self.fit.as_ref().map_or(f64::NAN, |f| f.gamma)
    }

    pub fn gamma_ratio(&self) -> f64 {
        self.gamma_fit() / self.gamma_th
    }

    /// Standard error of `Γ/Γ_th`.
    pub fn gamma_ratio_std_error(&self) -> f64 {
        self.gamma_std_error / self.gamma_th
    }

    pub fn ratio_at(&self, t: usize) -> f64 {
        self.steps.get(t).map_or(f64::NAN, |s| s.ratio)
    }

    fn failed(cfg: &SweepConfig, n_q: usize, epsilon: f64, err: String) -> Self {
        Self {
            map_kind: cfg.map.kind,
            n_q,
            epsilon,
            decomposition: cfg.decomposition,
            seed: cfg.seed,
            n_realizations: cfg.realizations,
            n1: 0,
            n2: 0,
            steps: Vec::new(),
            fit: None,
            gamma_std_error: f64::NAN,
            gamma_th: f64::NAN,
            wrong_measurements: 0,
            anomalous_traces: 0,
            anomalous_drops: 0,
            bound_violations: 0,
            non_monotone_traces: 0,
            error: Some(err),
        }
    }
}

/// Summary of an ensemble plus the traces themselves.
#[derive(Clone, Debug)]
pub struct CellRun {
    pub point: SweepPoint,
    pub traces: Vec<FidelityTrace>,
}

/// Builds the circuit for one cell, runs it and summarizes.
pub fn run_cell(cfg: &SweepConfig, n_q: usize, epsilon: f64) -> Result<CellRun, HarnessError> {
    let mut map = cfg.map;
    map.n_q = n_q;
    let circuit = map_step_circuit(&map, cfg.decomposition)?;
    let mut noise = NoiseConfig::new(epsilon, cell_seed(cfg.seed, n_q, epsilon))?;
    if let Some(delta) = cfg.atomic_phase {
        noise = noise.with_atomic_phase(delta)?;
    }
    let init = initial_state(&map)?;
    info!(
        "{} n_q={n_q} eps={epsilon}: {} gates/step ({} + {}), {} realizations x {} steps",
        map.kind,
        circuit.n_gates(),
        circuit.n1,
        circuit.n2,
        cfg.realizations,
        cfg.steps
    );
    let traces = run_ensemble(&circuit, &init, &noise, cfg.steps, cfg.realizations)?;
    let point = summarize(cfg, &circuit, n_q, epsilon, &traces)?;
    Ok(CellRun { point, traces })
}

fn summarize(
    cfg: &SweepConfig,
    circuit: &CompiledCircuit,
    n_q: usize,
    epsilon: f64,
    traces: &[FidelityTrace],
) -> Result<SweepPoint, HarnessError> {
    let steps: Vec<StepStats> = (0..=cfg.steps)
        .map(|t| {
            let fs: Vec<f64> = traces.iter().map(|tr| tr.steps[t].1).collect();
            let (mean_f, std_f) = if fs.len() > 1 { mean_std(&fs) } else { (fs[0], f64::NAN) };
            let ratio = if 1.0 - mean_f > 1e-12 { std_f / (1.0 - mean_f) } else { f64::NAN };
            StepStats { step: t, mean_f, std_f, ratio }
        })
        .collect();
    let mt: Vec<(usize, f64)> = steps.iter().map(|s| (s.step, s.mean_f)).collect();
    let fit = match fit_gamma(&mt) {
        Ok(f) => Some(f),
        Err(e) => {
            debug!("n_q={n_q} eps={epsilon}: {e}");
            None
        }
    };
    let gamma_std_error = fit.as_ref().map_or(f64::NAN, |f| gamma_std_error(traces, f));
    let gamma_th = theory::gamma_th(circuit, epsilon, n_q as u32)?;
    let anomalous: Vec<bool> = traces.iter().filter_map(|tr| tr.drops_after_wrong_measurement(0.5)).collect();
    Ok(SweepPoint {
        map_kind: cfg.map.kind,
        n_q,
        epsilon,
        decomposition: cfg.decomposition,
        seed: cfg.seed,
        n_realizations: traces.len(),
        n1: circuit.n1,
        n2: circuit.n2,
        steps,
        fit,
        gamma_std_error,
        gamma_th,
        wrong_measurements: traces.iter().map(|tr| tr.wrong_measurements.len()).sum(),
        anomalous_traces: anomalous.len(),
        anomalous_drops: anomalous.iter().filter(|&&d| d).count(),
        bound_violations: traces.iter().map(|tr| tr.bound_violations).sum(),
        non_monotone_traces: traces.iter().filter(|tr| !tr.is_monotone()).count(),
        error: None,
    })
}

/// Runs every grid cell in order. A failing cell is recorded in its row and
/// the sweep continues.
pub fn run_sweep(grid: &[(usize, f64)], cfg: &SweepConfig) -> Vec<SweepPoint> {
    grid.iter()
        .map(|&(n_q, eps)| match run_cell(cfg, n_q, eps) {
            Ok(run) => run.point,
            Err(e) => SweepPoint::failed(cfg, n_q, eps, e.to_string()),
        })
        .collect()
}

pub const CSV_HEADER: &str =
    "map,n_q,epsilon,decomposition,seed,realizations,step,mean_f,std_f,ratio,gamma_fit,gamma_th,gamma_ratio,n1,n2,n_g,wrong_meas_count";

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// One header row, then one row per `(point, step)`. A failed cell gets a
/// single row with undefined values.
pub fn write_csv<W: Write>(out: &mut W, points: &[SweepPoint]) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for p in points {
        let prefix = format!(
            "{},{},{},{},{},{}",
            p.map_kind,
            p.n_q,
            num(p.epsilon),
            p.decomposition.name(),
            p.seed,
            p.n_realizations
        );
        let suffix = format!(
            "{},{},{},{},{},{},{}",
            num(p.gamma_fit()),
            num(p.gamma_th),
            num(p.gamma_ratio()),
            p.n1,
            p.n2,
            p.n_gates(),
            p.wrong_measurements
        );
        if p.steps.is_empty() {
            writeln!(out, "{prefix},NaN,NaN,NaN,NaN,{suffix}")?;
        }
        for s in &p.steps {
            writeln!(
                out,
                "{prefix},{},{},{},{},{suffix}",
                s.step,
                num(s.mean_f),
                num(s.std_f),
                num(s.ratio)
            )?;
        }
    }
    Ok(())
}

pub fn csv_string(points: &[SweepPoint]) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, points).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV is ASCII")
}

/// Least-squares fit of `log y = log a − b log x`; returns `(a, b)`.
pub fn fit_power_law(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let (sx, sy, sxx, sxy) = points.iter().fold((0.0, 0.0, 0.0, 0.0), |(sx, sy, sxx, sxy), &(x, y)| {
        let (lx, ly) = (x.ln(), y.ln());
        (sx + lx, sy + ly, sxx + lx * lx, sxy + lx * ly)
    });
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    (intercept.exp(), -slope)
}
