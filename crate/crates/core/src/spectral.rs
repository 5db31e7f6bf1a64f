//! Spectrum of the contraction matrix, closed-form gap bounds and Monte-Carlo
//! gap estimators.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{gg_lambda_r_min, AlphaKernel, LambdaR};
use crate::measures::{sample_microcanonical, MicrocanonicalSpec};
use crate::numeric::{mean_stderr, weighted_line_fit, LineFit};
use crate::rng::{derive_seed, par_replicas, replica_rng};
use crate::simulator::{simulate_coupled, time_grid, CtProcess, Model, Observable};
use crate::state_space::{exchange_in_place, EnergyState};

/// Symmetric `m x m` matrix with 2 on the diagonal and -1 two places off it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContractionMatrix {
    size: usize,
}

impl ContractionMatrix {
    /// Matrix acting on the `N - 1` u-coordinates of an `N`-site chain.
    pub fn for_sites(n_sites: usize) -> Result<Self> {
        if n_sites < 2 {
            return Err(Error::TooFewSites(n_sites));
        }
        Ok(Self { size: n_sites - 1 })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match i.abs_diff(j) {
            0 => 2.0,
            2 => -1.0,
            _ => 0.0,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.size).map(|i| (0..self.size).map(|j| self.entry(i, j)).collect()).collect()
    }
}

/// Eigenvalues of the contraction matrix for `n_sites`, ascending.
pub fn eigenvalues_closed_form(n_sites: usize) -> Result<Vec<f64>> {
    if n_sites < 2 {
        return Err(Error::TooFewSites(n_sites));
    }
    let n = n_sites as f64;
    let f = |k: usize, denom: f64| 4.0 * (PI * k as f64 / denom).sin().powi(2);
    let mut ev: Vec<f64> = if n_sites % 2 == 1 {
        (1..=(n_sites - 1) / 2).flat_map(|k| [f(k, n + 1.0); 2]).collect()
    } else {
        (1..n_sites / 2).map(|k| f(k, n)).chain((1..=n_sites / 2).map(|k| f(k, n + 2.0))).collect()
    };
    ev.sort_by(|a, b| a.total_cmp(b));
    Ok(ev)
}

/// Smallest eigenvalue of the contraction matrix.
pub fn smallest_eigenvalue(n_sites: usize) -> Result<f64> {
    Ok(eigenvalues_closed_form(n_sites)?[0])
}

/// Number of eigenvalues of the tridiagonal matrix (diag, off) below `x`.
fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..diag.len() {
        let e2 = if i == 0 { 0.0 } else { off[i - 1] * off[i - 1] };
        q = diag[i] - x - if i == 0 { 0.0 } else { e2 / q };
        if q == 0.0 {
            q = -f64::EPSILON * (x.abs() + 1.0);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// All eigenvalues of a symmetric tridiagonal matrix by Sturm bisection.
pub fn tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Vec<f64> {
    let m = diag.len();
    if m == 0 {
        return Vec::new();
    }
    let radius = |i: usize| {
        let l = if i > 0 { off[i - 1].abs() } else { 0.0 };
        let r = if i + 1 < m { off[i].abs() } else { 0.0 };
        l + r
    };
    let lo0 = (0..m).map(|i| diag[i] - radius(i)).fold(f64::INFINITY, f64::min);
    let hi0 = (0..m).map(|i| diag[i] + radius(i)).fold(f64::NEG_INFINITY, f64::max);
    (0..m)
        .map(|k| {
            let (mut lo, mut hi) = (lo0, hi0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if sturm_count(diag, off, mid) > k {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

/// Eigenvalues computed from the matrix entries.
///
/// Odd- and even-indexed coordinates never couple, so the matrix splits into
/// two tridiagonal blocks, each solved by Sturm bisection.
pub fn eigenvalues_numeric(m: &ContractionMatrix) -> Vec<f64> {
    let size = m.size();
    let mut ev = Vec::with_capacity(size);
    for parity in 0..2 {
        let idx: Vec<usize> = (parity..size).step_by(2).collect();
        debug_assert!(idx.iter().all(|&i| (0..size).filter(|j| j % 2 != parity).all(|j| m.entry(i, j) == 0.0)));
        let diag: Vec<f64> = idx.iter().map(|&i| m.entry(i, i)).collect();
        let off: Vec<f64> = idx.windows(2).map(|w| m.entry(w[0], w[1])).collect();
        ev.extend(tridiagonal_eigenvalues(&diag, &off));
    }
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

fn check_sigma_sq(sigma_sq: f64) -> Result<()> {
    if !(0.0..=0.25).contains(&sigma_sq) {
        return Err(Error::InvalidParameter(format!("kernel variance must lie in [0, 1/4], got {sigma_sq}")));
    }
    Ok(())
}

/// Exponential rate `(1/2) lambda (1 - 4 sigma^2) sin^2(pi / (N + 2))` of
/// Wasserstein-2 contraction; the same value bounds the L2 spectral gap of
/// a reversible reference model from below. The mean squared coupling
/// distance decays at twice this rate. Zero when `sigma_sq = 1/4`.
pub fn contraction_rate_bound(lambda: f64, sigma_sq: f64, n_sites: usize) -> Result<f64> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be > 0, got {lambda}")));
    }
    check_sigma_sq(sigma_sq)?;
    if n_sites < 2 {
        return Err(Error::TooFewSites(n_sites));
    }
    Ok(0.5 * lambda * (1.0 - 4.0 * sigma_sq) * (PI / (n_sites as f64 + 2.0)).sin().powi(2))
}

/// Decay rate bound for `E[d^2]` under the synchronous coupling.
pub fn mean_d2_rate_bound(lambda: f64, sigma_sq: f64, n_sites: usize) -> Result<f64> {
    contraction_rate_bound(lambda, sigma_sq, n_sites).map(|r| 2.0 * r)
}

/// Constants of the comparison with a reference model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonInputs {
    /// Minorization constant of the kernel against the reference kernel.
    pub b_min: f64,
    pub c_minus: f64,
    pub c_plus: f64,
    /// Uniform lower bound of the rate.
    pub lambda_star: f64,
    /// Variance of the reference kernel.
    pub sigma_star_sq: f64,
}

impl ComparisonInputs {
    /// Billiard-lattice kernel with rate floor `lambda_min * sqrt(pi)/3`
    /// compared against the Beta(3/2, 3/2) reference with the same stationary law.
    pub fn gaspard_gilbert(sum_rate_floor: f64) -> Self {
        Self {
            b_min: PI / 4.0,
            c_minus: 1.0,
            c_plus: 1.0,
            lambda_star: sum_rate_floor * gg_lambda_r_min(),
            sigma_star_sq: 1.0 / 16.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.b_min > 0.0
            && self.b_min <= 1.0
            && self.c_minus > 0.0
            && self.c_minus <= self.c_plus
            && self.c_plus.is_finite()
            && self.lambda_star > 0.0
            && self.lambda_star.is_finite()
            && (0.0..0.25).contains(&self.sigma_star_sq);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid comparison inputs {self:?}")))
        }
    }
}

/// `b_min (C-/C+) Lambda* (1/2)(1 - 4 sigma*^2) sin^2(pi / (N + 2))`.
pub fn composite_gap_bound(inputs: &ComparisonInputs, n_sites: usize) -> Result<f64> {
    inputs.validate()?;
    let reference = contraction_rate_bound(inputs.lambda_star, inputs.sigma_star_sq, n_sites)?;
    Ok(inputs.b_min * (inputs.c_minus / inputs.c_plus) * reference)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapMethod {
    Autocorrelation,
    CouplingDecay,
    RayleighUpper,
    ClosedFormLower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapFlag {
    /// The observable has no variance (e.g. the total energy).
    Degenerate,
    /// Fewer than three autocorrelation points inside the fit window.
    TooFewPoints,
    /// Bootstrap standard error exceeds the estimate.
    Noisy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapEstimate {
    pub value: f64,
    pub stderr: f64,
    pub method: GapMethod,
    pub model: String,
    pub n_sites: usize,
    pub flag: Option<GapFlag>,
}

/// Closed-form lower bound on the gap when the model is covered by one.
///
/// Reference models use their own kernel variance; billiard-lattice models
/// with a rate floor go through the comparison bound.
pub fn closed_form_lower_bound(model: &Model, n_sites: usize) -> Option<GapEstimate> {
    let value = if let Some(lambda) = model.rate.constant_value().filter(|_| model.kernel.state_independent()) {
        let var = model.kernel.variance().ok()?.value;
        contraction_rate_bound(lambda, var, n_sites).ok()?
    } else if matches!(model.kernel, AlphaKernel::GaspardGilbert) && model.rate.lambda_r == LambdaR::GaspardGilbert {
        let floor = model.rate.floor()? / gg_lambda_r_min();
        composite_gap_bound(&ComparisonInputs::gaspard_gilbert(floor), n_sites).ok()?
    } else {
        return None;
    };
    Some(GapEstimate {
        value,
        stderr: 0.0,
        method: GapMethod::ClosedFormLower,
        model: model.describe(),
        n_sites,
        flag: None,
    })
}

/// Dimension parameter of the product measure the model is reversible for.
pub fn stationary_dim(model: &Model) -> Option<f64> {
    match (&model.kernel, model.rate.lambda_r) {
        (AlphaKernel::Uniform, LambdaR::Constant) => Some(2.0),
        (AlphaKernel::SymmetricBeta(b), LambdaR::Constant) => Some(b.d()),
        (AlphaKernel::GaspardGilbert, LambdaR::GaspardGilbert) => Some(3.0),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AutocorrConfig {
    pub horizon: f64,
    pub n_points: usize,
    pub n_replicas: usize,
    /// Normalized autocorrelation values kept for the log-linear fit.
    pub window: (f64, f64),
    pub bootstrap: usize,
}

impl AutocorrConfig {
    pub fn new(horizon: f64, n_points: usize, n_replicas: usize) -> Self {
        Self { horizon, n_points, n_replicas, window: (0.05, 0.8), bootstrap: 200 }
    }
}

/// Normalized autocorrelation `corr(A(0), A(t_j))` over replicas, restricted
/// to the replicas listed in `rows` (with multiplicity).
fn autocorrelation(data: &[Vec<f64>], rows: &[usize]) -> Option<Vec<f64>> {
    let t = data[0].len();
    let n = rows.len() as f64;
    let mut mean = vec![0.0; t];
    for &r in rows {
        for (m, v) in mean.iter_mut().zip(&data[r]) {
            *m += v / n;
        }
    }
    let mut cov = vec![0.0; t];
    let mut var = vec![0.0; t];
    for &r in rows {
        let a0 = data[r][0] - mean[0];
        for j in 0..t {
            let aj = data[r][j] - mean[j];
            cov[j] += a0 * aj;
            var[j] += aj * aj;
        }
    }
    let scale = mean[0].abs().max(var[0].sqrt()).max(1e-300);
    if var[0].sqrt() <= 1e-12 * scale * n.sqrt() {
        return None;
    }
    Some((0..t).map(|j| cov[j] / (var[0] * var[j]).sqrt()).collect())
}

/// Log-linear fit over the leading run of points with `rho` inside `window`.
fn fit_decay(times: &[f64], rho: &[f64], window: (f64, f64)) -> Option<f64> {
    let (mut x, mut y, mut w) = (Vec::new(), Vec::new(), Vec::new());
    for (j, (&t, &r)) in times.iter().zip(rho).enumerate().skip(1) {
        if !(r >= window.0) {
            if j > 1 && !x.is_empty() {
                break;
            }
            continue;
        }
        if r <= window.1 {
            x.push(t);
            y.push(r.ln());
            w.push(r * r);
        }
    }
    if x.len() < 3 {
        return None;
    }
    weighted_line_fit(&x, &y, &w).map(|f| -f.slope)
}

fn bootstrap_stderr<F>(n_rows: usize, resamples: usize, seed: u64, stat: F) -> f64
where
    F: Fn(&[usize]) -> Option<f64> + Sync,
{
    let values: Vec<f64> = (0..resamples)
        .into_par_iter()
        .filter_map(|b| {
            let mut rng = replica_rng(seed, b as u64);
            let rows: Vec<usize> = (0..n_rows).map(|_| rng.random_range(0..n_rows)).collect();
            stat(&rows)
        })
        .collect();
    if values.len() < 2 {
        return f64::NAN;
    }
    mean_stderr(&values).1 * (values.len() as f64).sqrt()
}

/// Gap estimate from the decay of the stationary autocorrelation of `observable`.
pub fn estimate_gap_autocorr(
    model: &Model,
    spec: &MicrocanonicalSpec,
    observable: &Observable,
    config: &AutocorrConfig,
    seed: u64,
) -> Result<GapEstimate> {
    if config.n_points < 4 || config.n_replicas < 10 || !(config.horizon > 0.0) {
        return Err(Error::InvalidParameter(format!("bad autocorrelation config {config:?}")));
    }
    let times = time_grid(config.horizon, config.n_points);
    let data: Vec<Vec<f64>> = par_replicas(config.n_replicas, seed, |_, rng| {
        let x0 = sample_microcanonical(spec, rng);
        let mut p = CtProcess::new(model, &x0);
        times
            .iter()
            .map(|&t| {
                p.advance_to(t, rng, None);
                observable.eval(p.energies())
            })
            .collect()
    });
    let mut est = GapEstimate {
        value: f64::NAN,
        stderr: f64::NAN,
        method: GapMethod::Autocorrelation,
        model: model.describe(),
        n_sites: spec.n_sites,
        flag: None,
    };
    let all: Vec<usize> = (0..data.len()).collect();
    let Some(rho) = autocorrelation(&data, &all) else {
        est.flag = Some(GapFlag::Degenerate);
        return Ok(est);
    };
    let Some(value) = fit_decay(&times, &rho, config.window) else {
        est.flag = Some(GapFlag::TooFewPoints);
        return Ok(est);
    };
    est.value = value;
    est.stderr = bootstrap_stderr(data.len(), config.bootstrap, derive_seed(seed, 0xb007), |rows| {
        autocorrelation(&data, rows).and_then(|r| fit_decay(&times, &r, config.window))
    });
    if !(est.stderr <= est.value) {
        est.flag = Some(GapFlag::Noisy);
    }
    Ok(est)
}

/// Monte-Carlo Rayleigh quotient `D(A) / Var(A)` under the stationary law,
/// an upper bound on the gap up to sampling error.
pub fn rayleigh_quotient_upper(
    model: &Model,
    spec: &MicrocanonicalSpec,
    observable: &Observable,
    n_samples: usize,
    inner_alpha_draws: usize,
    seed: u64,
) -> Result<GapEstimate> {
    if n_samples < 10 || inner_alpha_draws == 0 {
        return Err(Error::InvalidParameter("need >= 10 samples and >= 1 inner draw".into()));
    }
    let n = spec.n_sites;
    let linear = observable.linear_coefficients(n);
    let per_sample: Vec<(f64, f64)> = par_replicas(n_samples, seed, |_, rng| {
        let x = sample_microcanonical(spec, rng);
        let e = x.energies();
        let a = observable.eval(e);
        let mut form = 0.0;
        let mut scratch = e.to_vec();
        for i in 0..n - 1 {
            let rate = model.rate.rate_unchecked(e[i], e[i + 1]);
            let s = e[i] + e[i + 1];
            let beta = if s > 0.0 { e[i] / s } else { 0.5 };
            let mut acc = 0.0;
            for _ in 0..inner_alpha_draws {
                let alpha = model.kernel.sample(beta, rng);
                let diff = match &linear {
                    Some(c) => (c[i] - c[i + 1]) * (alpha * s - e[i]),
                    None => {
                        exchange_in_place(&mut scratch, i, alpha, x.quantum());
                        let d = observable.eval(&scratch) - a;
                        scratch[i] = e[i];
                        scratch[i + 1] = e[i + 1];
                        d
                    }
                };
                acc += diff * diff;
            }
            form += rate * acc / inner_alpha_draws as f64;
        }
        (a, 0.5 * form)
    });
    let m = per_sample.len() as f64;
    let mean_a = per_sample.iter().map(|p| p.0).sum::<f64>() / m;
    let centered: Vec<f64> = per_sample.iter().map(|p| (p.0 - mean_a).powi(2)).collect();
    let (var, var_se) = mean_stderr(&centered);
    if !(var > 3.0 * var_se) || var <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let dirichlet = per_sample.iter().map(|p| p.1).sum::<f64>() / m;
    let ratio = dirichlet / var;
    let linearized: Vec<f64> = per_sample.iter().zip(&centered).map(|(p, c)| p.1 - ratio * c).collect();
    let (_, lin_se) = mean_stderr(&linearized);
    Ok(GapEstimate {
        value: ratio,
        stderr: lin_se / var,
        method: GapMethod::RayleighUpper,
        model: model.describe(),
        n_sites: n,
        flag: None,
    })
}

/// Mean squared coupling distance over replicas and its fitted decay rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingDecay {
    pub times: Vec<f64>,
    pub mean_d2: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Fitted exponential decay rate of `E[d^2]`.
    pub rate: f64,
    pub rate_stderr: f64,
    /// `lambda (1 - 4 sigma^2) sin^2(pi/(N+2))`.
    pub rate_bound: f64,
}

fn fit_log_mean(times: &[f64], mean: &[f64]) -> Option<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) =
        times.iter().zip(mean).filter(|(_, m)| **m > 0.0).map(|(t, m)| (*t, m.ln())).unzip();
    weighted_line_fit(&x, &y, &vec![1.0; x.len()]).map(|f: LineFit| -f.slope)
}

pub fn coupling_decay(
    model: &Model,
    x0: &EnergyState,
    y0: &EnergyState,
    horizon: f64,
    n_points: usize,
    n_replicas: usize,
    seed: u64,
) -> Result<CouplingDecay> {
    let lambda = model.rate.constant_value().ok_or(Error::NotReferenceModel)?;
    let sigma_sq = model.kernel.variance()?.value;
    let times = time_grid(horizon, n_points);
    let runs: Vec<Result<Vec<f64>>> = par_replicas(n_replicas, seed, |_, rng| {
        simulate_coupled(x0, y0, model, horizon, &times, rng).map(|v| v.into_iter().map(|p| p.1).collect())
    });
    let data: Vec<Vec<f64>> = runs.into_iter().collect::<Result<_>>()?;
    let column_stats = |rows: &[usize]| -> Vec<f64> {
        let n = rows.len() as f64;
        (0..times.len()).map(|j| rows.iter().map(|&r| data[r][j]).sum::<f64>() / n).collect()
    };
    let mut mean_d2 = Vec::with_capacity(times.len());
    let mut stderr = Vec::with_capacity(times.len());
    for j in 0..times.len() {
        let col: Vec<f64> = data.iter().map(|r| r[j]).collect();
        let (m, se) = mean_stderr(&col);
        mean_d2.push(m);
        stderr.push(se);
    }
    let rate = fit_log_mean(&times, &mean_d2).unwrap_or(f64::NAN);
    let rate_stderr =
        bootstrap_stderr(data.len(), 200, derive_seed(seed, 0xc0de), |rows| fit_log_mean(&times, &column_stats(rows)));
    Ok(CouplingDecay {
        times,
        mean_d2,
        stderr,
        rate,
        rate_stderr,
        rate_bound: mean_d2_rate_bound(lambda, sigma_sq, x0.n_sites())?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapScanConfig {
    pub epsilon: f64,
    /// Horizon of the autocorrelation runs is `horizon_per_n2 * N^2`.
    pub horizon_per_n2: f64,
    pub n_points: usize,
    pub n_replicas: usize,
    pub rayleigh_samples: usize,
    pub inner_alpha_draws: usize,
    pub fourier_mode: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapScanRow {
    pub n_sites: usize,
    pub bound_lower: Option<f64>,
    pub gap_est: f64,
    pub gap_stderr: f64,
    pub bound_upper: f64,
    pub upper_stderr: f64,
    pub flag: Option<GapFlag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapScan {
    pub rows: Vec<GapScanRow>,
    /// Weighted log-log slope of the estimate against N.
    pub slope: f64,
    pub slope_stderr: f64,
    /// 95% confidence interval of the slope.
    pub slope_ci: (f64, f64),
}

impl GapScan {
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "N,bound_lower,gap_est,gap_stderr,bound_upper")?;
        for r in &self.rows {
            let lower = r.bound_lower.map(|v| v.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{},{},{}", r.n_sites, lower, r.gap_est, r.gap_stderr, r.bound_upper)?;
        }
        Ok(())
    }
}

/// Gap estimates and bounds across system sizes, plus the scaling slope.
pub fn gap_scan(model: &Model, n_list: &[usize], config: &GapScanConfig, seed: u64) -> Result<GapScan> {
    if n_list.len() < 3 {
        return Err(Error::InvalidParameter("gap scan needs at least 3 system sizes".into()));
    }
    let dim = stationary_dim(model)
        .ok_or_else(|| Error::InvalidParameter(format!("no stationary product law known for {}", model.describe())))?;
    let observable = Observable::Fourier(config.fourier_mode);
    let mut rows = Vec::with_capacity(n_list.len());
    for (k, &n) in n_list.iter().enumerate() {
        let spec = MicrocanonicalSpec::new(dim, config.epsilon, n)?;
        let ac = AutocorrConfig::new(config.horizon_per_n2 * (n * n) as f64, config.n_points, config.n_replicas);
        let est = estimate_gap_autocorr(model, &spec, &observable, &ac, derive_seed(seed, 2 * k as u64))?;
        let upper = rayleigh_quotient_upper(
            model,
            &spec,
            &observable,
            config.rayleigh_samples,
            config.inner_alpha_draws,
            derive_seed(seed, 2 * k as u64 + 1),
        )?;
        rows.push(GapScanRow {
            n_sites: n,
            bound_lower: closed_form_lower_bound(model, n).map(|b| b.value),
            gap_est: est.value,
            gap_stderr: est.stderr,
            bound_upper: upper.value,
            upper_stderr: upper.stderr,
            flag: est.flag,
        });
    }
    let usable: Vec<&GapScanRow> = rows.iter().filter(|r| r.gap_est > 0.0 && r.gap_stderr > 0.0).collect();
    let x: Vec<f64> = usable.iter().map(|r| (r.n_sites as f64).ln()).collect();
    let y: Vec<f64> = usable.iter().map(|r| r.gap_est.ln()).collect();
    let w: Vec<f64> = usable.iter().map(|r| (r.gap_est / r.gap_stderr).powi(2)).collect();
    let (slope, slope_stderr) = match weighted_line_fit(&x, &y, &w) {
        Some(f) => (f.slope, f.slope_stderr),
        None => (f64::NAN, f64::NAN),
    };
    Ok(GapScan { rows, slope, slope_stderr, slope_ci: (slope - 1.96 * slope_stderr, slope + 1.96 * slope_stderr) })
}
