//! Haar-random states and Monte Carlo checks of uniform-measure averages.
//!
//! For a unitary `R` with eigenphases `λ_j` on an `N`-dimensional space:
//!
//! * `I₂(R)  = ⟨|⟨ψ|R|ψ⟩|²⟩ = 1 − A(1 − |tr R|²/N²)`, `A = N/(1+N)`
//! * `J₂(R)  = ⟨|⟨ψ|R|φ⟩|²⟩ = (1 − I₂(R))/(N − 1)`, with `φ` uniform in
//!   the complement of `ψ`
//! * the weight `p` of a fixed half-dimensional subspace has mean `1/2` and
//!   variance `1/(4(1+N))`.

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::statevector::{StateVector, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HaarError {
    #[error("dimension must be at least {min}, got {got}")]
    Dimension { min: usize, got: usize },
    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("spectrum of length {base} cannot be embedded in dimension {dim}")]
    Embedding { base: usize, dim: usize },
    #[error("dimension {0} must be even")]
    OddDimension(usize),
}

/// Mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HaarEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

impl HaarEstimate {
    /// `|mean − target|` in units of the standard error (infinite if the
    /// error is zero and the values differ).
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.mean - target).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.std_error
        }
    }
}

/// Streaming mean and variance; accumulators merge associatively.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * (self.n as f64 * other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn estimate(&self) -> HaarEstimate {
        HaarEstimate {
            mean: self.mean,
            std_error: (self.variance() / self.n as f64).sqrt(),
            n_samples: self.n,
        }
    }
}

/// Eigenphases of a diagonal unitary, one per dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalSpectrum {
    phases: Vec<f64>,
}

impl DiagonalSpectrum {
    pub fn new(phases: Vec<f64>) -> Result<Self, HaarError> {
        if phases.is_empty() {
            return Err(HaarError::Dimension { min: 1, got: 0 });
        }
        Ok(Self { phases })
    }

    pub fn identity(dim: usize) -> Result<Self, HaarError> {
        Self::new(vec![0.0; dim])
    }

    /// `base ⊗ I`: each base phase repeated `dim/base.len()` times.
    pub fn embedded(base: &[f64], dim: usize) -> Result<Self, HaarError> {
        if base.is_empty() || !dim.is_multiple_of(base.len()) || dim < base.len() {
            return Err(HaarError::Embedding { base: base.len(), dim });
        }
        let reps = dim / base.len();
        Self::new(base.iter().flat_map(|&l| std::iter::repeat_n(l, reps)).collect())
    }

    pub fn dim(&self) -> usize {
        self.phases.len()
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn diagonal(&self) -> Vec<C64> {
        self.phases.iter().map(|&l| C64::from_polar(1.0, l)).collect()
    }

    pub fn trace(&self) -> C64 {
        self.diagonal().iter().sum()
    }

    /// Population variance of the phases.
    pub fn phase_variance(&self) -> f64 {
        let n = self.dim() as f64;
        let mean = self.phases.iter().sum::<f64>() / n;
        self.phases.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n
    }
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn normalize(v: &mut [C64]) {
    let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in v.iter_mut() {
        *a /= norm;
    }
}

/// Uniform unit vector of dimension `dim`, as raw amplitudes.
pub fn sample_haar_amplitudes<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<C64> {
    let mut v: Vec<C64> = (0..dim).map(|_| complex_gaussian(rng)).collect();
    normalize(&mut v);
    v
}

/// Uniform state on `n_qubits` qubits.
pub fn sample_haar_state<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> StateVector {
    StateVector::from_raw(sample_haar_amplitudes(1 << n_qubits, rng)).expect("dimension is a power of two")
}

/// Haar unitary from Gram-Schmidt on a complex Gaussian matrix. Columns
/// are the output vectors, stored row-major.
pub fn sample_haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<Vec<C64>> {
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(dim);
    while cols.len() < dim {
        let mut v: Vec<C64> = (0..dim).map(|_| complex_gaussian(rng)).collect();
        for c in &cols {
            let proj: C64 = c.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (x, y) in v.iter_mut().zip(c) {
                *x -= proj * y;
            }
        }
        if v.iter().map(|a| a.norm_sqr()).sum::<f64>() > 1e-20 {
            normalize(&mut v);
            cols.push(v);
        }
    }
    (0..dim).map(|i| (0..dim).map(|j| cols[j][i]).collect()).collect()
}

fn matvec(m: &[Vec<C64>], v: &[C64]) -> Vec<C64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// `1 − A(1 − |tr R|²/N²)`.
pub fn analytic_i2(s: &DiagonalSpectrum) -> f64 {
    let n = s.dim() as f64;
    let a = n / (1.0 + n);
    1.0 - a * (1.0 - s.trace().norm_sqr() / (n * n))
}

/// `(1 − I₂)/(N − 1)`; zero for `N = 1`.
pub fn analytic_j2(s: &DiagonalSpectrum) -> f64 {
    let n = s.dim();
    if n < 2 {
        return 0.0;
    }
    (1.0 - analytic_i2(s)) / (n - 1) as f64
}

/// `(tr R₁ tr R₂ + tr(R₁R₂))/(N² + N)` for dense operators.
pub fn trace_formula_i2(r1: &[Vec<C64>], r2: &[Vec<C64>]) -> C64 {
    let n = r1.len();
    let tr = |m: &[Vec<C64>]| (0..n).map(|i| m[i][i]).sum::<C64>();
    let mut tr12 = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            tr12 += r1[i][k] * r2[k][i];
        }
    }
    (tr(r1) * tr(r2) + tr12) / (n * n + n) as f64
}

fn check_samples(n_samples: usize) -> Result<(), HaarError> {
    if n_samples < 100 {
        return Err(HaarError::TooFewSamples { min: 100, got: n_samples });
    }
    Ok(())
}

/// `|⟨0|ψ⟩|²` over Haar samples; the mean is `1/N`.
pub fn mc_first_component<R: Rng + ?Sized>(dim: usize, n_samples: usize, rng: &mut R) -> HaarEstimate {
    let mut m = Moments::default();
    for _ in 0..n_samples {
        let v = sample_haar_amplitudes(dim, rng);
        m.push(v[0].norm_sqr());
    }
    m.estimate()
}

/// Monte Carlo `⟨|⟨ψ|R|ψ⟩|²⟩`.
pub fn mc_i2<R: Rng + ?Sized>(s: &DiagonalSpectrum, n_samples: usize, rng: &mut R) -> Result<HaarEstimate, HaarError> {
    mc_i2_rotated(s, None, n_samples, rng)
}

/// As [`mc_i2`], with every sample first mapped through `u` when given.
pub fn mc_i2_rotated<R: Rng + ?Sized>(
    s: &DiagonalSpectrum,
    u: Option<&[Vec<C64>]>,
    n_samples: usize,
    rng: &mut R,
) -> Result<HaarEstimate, HaarError> {
    check_samples(n_samples)?;
    let d = s.diagonal();
    let mut m = Moments::default();
    for _ in 0..n_samples {
        let mut psi = sample_haar_amplitudes(s.dim(), rng);
        if let Some(u) = u {
            psi = matvec(u, &psi);
        }
        let e: C64 = psi.iter().zip(&d).map(|(a, r)| a.norm_sqr() * r).sum();
        m.push(e.norm_sqr());
    }
    Ok(m.estimate())
}

/// Monte Carlo `⟨|⟨ψ|R|φ⟩|²⟩`, `φ` uniform in the complement of `ψ`.
pub fn mc_j2<R: Rng + ?Sized>(s: &DiagonalSpectrum, n_samples: usize, rng: &mut R) -> Result<HaarEstimate, HaarError> {
    mc_j2_rotated(s, None, n_samples, rng)
}

pub fn mc_j2_rotated<R: Rng + ?Sized>(
    s: &DiagonalSpectrum,
    u: Option<&[Vec<C64>]>,
    n_samples: usize,
    rng: &mut R,
) -> Result<HaarEstimate, HaarError> {
    check_samples(n_samples)?;
    if s.dim() < 2 {
        return Err(HaarError::Dimension { min: 2, got: s.dim() });
    }
    let d = s.diagonal();
    let mut m = Moments::default();
    for _ in 0..n_samples {
        let mut psi = sample_haar_amplitudes(s.dim(), rng);
        let phi = loop {
            let mut chi: Vec<C64> = (0..s.dim()).map(|_| complex_gaussian(rng)).collect();
            let overlap: C64 = psi.iter().zip(&chi).map(|(a, b)| a.conj() * b).sum();
            for (c, p) in chi.iter_mut().zip(&psi) {
                *c -= overlap * p;
            }
            if chi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt() >= 1e-12 {
                normalize(&mut chi);
                break chi;
            }
        };
        let phi = match u {
            Some(u) => {
                psi = matvec(u, &psi);
                matvec(u, &phi)
            }
            None => phi,
        };
        let e: C64 = psi.iter().zip(&d).zip(&phi).map(|((a, r), b)| a.conj() * r * b).sum();
        m.push(e.norm_sqr());
    }
    Ok(m.estimate())
}

/// Sample mean and variance of the weight on the first `N/2` components,
/// each with a standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Concentration {
    pub mean: HaarEstimate,
    pub variance: f64,
    pub variance_std_error: f64,
}

impl Concentration {
    pub fn variance_z_score(&self, target: f64) -> f64 {
        (self.variance - target).abs() / self.variance_std_error
    }
}

/// Theoretical `σ_p² = 1/(4(1+N))`.
pub fn concentration_variance(dim: usize) -> f64 {
    1.0 / (4.0 * (1.0 + dim as f64))
}

pub fn concentration_check<R: Rng + ?Sized>(dim: usize, n_samples: usize, rng: &mut R) -> Result<Concentration, HaarError> {
    if !dim.is_multiple_of(2) {
        return Err(HaarError::OddDimension(dim));
    }
    check_samples(n_samples)?;
    let ps: Vec<f64> = (0..n_samples)
        .map(|_| {
            let v = sample_haar_amplitudes(dim, rng);
            v[..dim / 2].iter().map(|a| a.norm_sqr()).sum()
        })
        .collect();
    let n = n_samples as f64;
    let mut m = Moments::default();
    ps.iter().for_each(|&p| m.push(p));
    let mean = m.mean();
    let var = m.variance();
    let m4 = ps.iter().map(|p| (p - mean).powi(4)).sum::<f64>() / n;
    // large-sample standard error of the sample variance
    let var_se = ((m4 - var * var * (n - 3.0) / (n - 1.0)) / n).max(0.0).sqrt();
    Ok(Concentration {
        mean: m.estimate(),
        variance: var,
        variance_std_error: var_se,
    })
}
