//! Splitting kernels `P(beta, d alpha)` and bond rates `Lambda_s(sum) * Lambda_r(ratio)`.
//!
//! `beta` is always the left share of the bond energy before a jump and
//! `alpha` the left share afterwards.

use std::f64::consts::PI;
use std::fmt::Debug;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;

use crate::error::{Error, Result};

/// Upper envelope of the Gaspard–Gilbert density (numerator <= 1, denominator >= 1).
pub const GG_ENVELOPE: f64 = 1.5;

/// `sqrt(pi) / 3`, the minimum of the Gaspard–Gilbert ratio rate (at beta = 1/2).
pub fn gg_lambda_r_min() -> f64 {
    PI.sqrt() / 3.0
}

/// `sqrt(2 pi) / 4`, the maximum of the Gaspard–Gilbert ratio rate (at beta in {0, 1}).
pub fn gg_lambda_r_max() -> f64 {
    (2.0 * PI).sqrt() / 4.0
}

fn check_unit(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::UnitIntervalArgument { name, value })
    }
}

/// Density of the three-dimensional billiard-lattice splitting kernel.
pub fn gg_density(beta: f64, alpha: f64) -> Result<f64> {
    check_unit("beta", beta)?;
    check_unit("alpha", alpha)?;
    Ok(gg_density_unchecked(beta, alpha))
}

#[inline]
pub(crate) fn gg_density_unchecked(beta: f64, alpha: f64) -> f64 {
    let b_min = beta.min(1.0 - beta);
    let b_max = beta.max(1.0 - beta);
    let a_min = alpha.min(1.0 - alpha);
    // at beta in {0, 1} the min-term takes its limit value 1
    let shape = if b_min > 0.0 { (a_min / b_min).sqrt().min(1.0) } else { 1.0 };
    1.5 * shape / (0.5 + b_max)
}

/// Ratio part of the billiard-lattice rate.
pub fn gg_lambda_r(beta: f64) -> Result<f64> {
    check_unit("beta", beta)?;
    Ok(gg_lambda_r_unchecked(beta))
}

#[inline]
pub(crate) fn gg_lambda_r_unchecked(beta: f64) -> f64 {
    let b_max = beta.max(1.0 - beta);
    (2.0 * PI).sqrt() / 6.0 * (0.5 + b_max) / b_max.sqrt()
}

/// Density of the symmetric reference law `nu_r` for dimension 3, `(8/pi) sqrt(a(1-a))`.
pub fn nu_r_density_d3(alpha: f64) -> f64 {
    8.0 / PI * (alpha * (1.0 - alpha)).max(0.0).sqrt()
}

/// Plug-in point for kernels not built into the crate.
pub trait CustomKernel: Send + Sync + Debug {
    fn sample(&self, beta: f64, rng: &mut dyn RngCore) -> f64;

    fn density(&self, _beta: f64, _alpha: f64) -> Option<f64> {
        None
    }

    fn state_independent(&self) -> bool;
}

#[derive(Debug, Clone)]
pub struct SymmetricBeta {
    d: f64,
    gamma: Gamma<f64>,
    ln_norm: f64,
}

impl SymmetricBeta {
    pub fn new(d: f64) -> Result<Self> {
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::InvalidParameter(format!("beta kernel needs d > 0, got {d}")));
        }
        let gamma =
            Gamma::new(0.5 * d, 1.0).map_err(|e| Error::InvalidParameter(format!("gamma shape {}: {e}", 0.5 * d)))?;
        Ok(Self { d, gamma, ln_norm: ln_beta(0.5 * d, 0.5 * d) })
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let g1 = self.gamma.sample(rng);
            let g2 = self.gamma.sample(rng);
            let s = g1 + g2;
            if s > 0.0 {
                return g1 / s;
            }
        }
    }

    fn density(&self, alpha: f64) -> f64 {
        let a = 0.5 * self.d;
        if alpha <= 0.0 || alpha >= 1.0 {
            return match a.partial_cmp(&1.0) {
                Some(std::cmp::Ordering::Less) => f64::INFINITY,
                Some(std::cmp::Ordering::Equal) => 1.0,
                _ => 0.0,
            };
        }
        ((a - 1.0) * (alpha.ln() + (1.0 - alpha).ln()) - self.ln_norm).exp()
    }
}

/// Law of the new left share given the old one.
#[derive(Debug, Clone)]
pub enum AlphaKernel {
    Uniform,
    /// `Beta(d/2, d/2)`, independent of the pre-jump ratio.
    SymmetricBeta(SymmetricBeta),
    /// Always splits evenly.
    PointMassHalf,
    /// Three-dimensional billiard-lattice kernel (state dependent).
    GaspardGilbert,
    Custom(Arc<dyn CustomKernel>),
}

impl AlphaKernel {
    pub fn symmetric_beta(d: f64) -> Result<Self> {
        SymmetricBeta::new(d).map(Self::SymmetricBeta)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::SymmetricBeta(_) => "beta",
            Self::PointMassHalf => "point_half",
            Self::GaspardGilbert => "gg",
            Self::Custom(_) => "custom",
        }
    }

    pub fn state_independent(&self) -> bool {
        match self {
            Self::GaspardGilbert => false,
            Self::Custom(k) => k.state_independent(),
            _ => true,
        }
    }

    pub fn sample<R: Rng>(&self, beta: f64, rng: &mut R) -> f64 {
        match self {
            Self::Uniform => rng.random::<f64>(),
            Self::SymmetricBeta(b) => b.sample(rng),
            Self::PointMassHalf => 0.5,
            Self::GaspardGilbert => loop {
                let alpha = rng.random::<f64>();
                let v = GG_ENVELOPE * rng.random::<f64>();
                if v <= gg_density_unchecked(beta, alpha) {
                    break alpha;
                }
            },
            Self::Custom(k) => k.sample(beta, rng),
        }
    }

    /// `P(beta, d alpha) / d alpha`; `None` for atomic kernels.
    pub fn density(&self, beta: f64, alpha: f64) -> Option<f64> {
        match self {
            Self::Uniform => Some(1.0),
            Self::SymmetricBeta(b) => Some(b.density(alpha)),
            Self::PointMassHalf => None,
            Self::GaspardGilbert => Some(gg_density_unchecked(beta, alpha)),
            Self::Custom(k) => k.density(beta, alpha),
        }
    }

    pub fn has_density(&self) -> bool {
        self.density(0.5, 0.5).is_some()
    }

    /// Variance of a state-independent kernel: exact for the built-in
    /// families, Monte-Carlo (with its standard error) for custom kernels.
    pub fn variance(&self) -> Result<KernelVariance> {
        if !self.state_independent() {
            return Err(Error::StateDependentKernel);
        }
        let exact = |value| Ok(KernelVariance { value, stderr: 0.0 });
        match self {
            Self::Uniform => exact(1.0 / 12.0),
            Self::SymmetricBeta(b) => exact(1.0 / (4.0 * (b.d + 1.0))),
            Self::PointMassHalf => exact(0.0),
            Self::GaspardGilbert => unreachable!("state dependent"),
            Self::Custom(k) => {
                const DRAWS: usize = 1_000_000;
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x6b65_726e_656c);
                let (mut sum, mut sum_sq, mut sum_4) = (0.0, 0.0, 0.0);
                let draws: Vec<f64> = (0..DRAWS).map(|_| k.sample(0.5, &mut rng)).collect();
                for &a in &draws {
                    sum += a;
                }
                let mean = sum / DRAWS as f64;
                for &a in &draws {
                    let c = (a - mean).powi(2);
                    sum_sq += c;
                    sum_4 += c * c;
                }
                let n = DRAWS as f64;
                let var = sum_sq / (n - 1.0);
                let m4 = sum_4 / n;
                Ok(KernelVariance { value: var, stderr: ((m4 - var * var) / n).max(0.0).sqrt() })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelVariance {
    pub value: f64,
    pub stderr: f64,
}

/// Minimum over a `(beta, alpha)` grid of `density(beta, alpha) / nu_r(alpha)`,
/// where `nu_r` is the dimension-3 reference law.
///
/// Grid nodes are `j / grid_size` for `j = 0..=grid_size`; the nodes where
/// `nu_r` vanishes (`alpha` in {0, 1}) carry an infinite ratio and are skipped.
pub fn minorization_ratio(kernel: &AlphaKernel, grid_size: usize) -> Result<f64> {
    if !kernel.has_density() {
        return Err(Error::NoDensity);
    }
    if grid_size < 100 {
        return Err(Error::InvalidParameter(format!("grid_size must be >= 100, got {grid_size}")));
    }
    let h = 1.0 / grid_size as f64;
    let mut best = f64::INFINITY;
    for j in 0..=grid_size {
        let beta = j as f64 * h;
        for k in 1..grid_size {
            let alpha = k as f64 * h;
            let ratio = kernel.density(beta, alpha).ok_or(Error::NoDensity)? / nu_r_density_d3(alpha);
            best = best.min(ratio);
        }
    }
    Ok(best)
}

/// Dependence of the rate on the pair sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaS {
    Constant(f64),
    /// `max(sqrt(s), lambda_min)`
    SqrtWithCutoff {
        lambda_min: f64,
    },
    /// `sqrt(s)` with no floor; only meaningful for exploratory gap scans.
    Sqrt,
}

/// Dependence of the rate on the pair ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaR {
    Constant,
    GaspardGilbert,
}

impl LambdaR {
    /// Value at left share `beta`.
    pub fn eval(&self, beta: f64) -> f64 {
        match self {
            Self::Constant => 1.0,
            Self::GaspardGilbert => gg_lambda_r_unchecked(beta),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSpec {
    pub lambda_s: LambdaS,
    pub lambda_r: LambdaR,
}

impl RateSpec {
    pub fn constant(lambda: f64) -> Self {
        Self { lambda_s: LambdaS::Constant(lambda), lambda_r: LambdaR::Constant }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::InvalidParameter(format!("{what} must be > 0, got {v}")));
        match self.lambda_s {
            LambdaS::Constant(l) if !(l.is_finite() && l > 0.0) => bad("lambda", l),
            LambdaS::SqrtWithCutoff { lambda_min } if !(lambda_min.is_finite() && lambda_min > 0.0) => {
                bad("lambda_min", lambda_min)
            }
            _ => Ok(()),
        }
    }

    /// `Some(lambda)` when the rate does not depend on the state at all.
    pub fn constant_value(&self) -> Option<f64> {
        match (self.lambda_s, self.lambda_r) {
            (LambdaS::Constant(l), LambdaR::Constant) => Some(l),
            _ => None,
        }
    }

    /// Uniform lower bound over all states, if there is one.
    pub fn floor(&self) -> Option<f64> {
        let r_min = match self.lambda_r {
            LambdaR::Constant => 1.0,
            LambdaR::GaspardGilbert => gg_lambda_r_min(),
        };
        match self.lambda_s {
            LambdaS::Constant(l) => Some(l * r_min),
            LambdaS::SqrtWithCutoff { lambda_min } => Some(lambda_min * r_min),
            LambdaS::Sqrt => None,
        }
    }

    pub fn rate(&self, e_left: f64, e_right: f64) -> Result<f64> {
        for e in [e_left, e_right] {
            if !(e >= 0.0) {
                return Err(Error::NegativeEnergy(e));
            }
        }
        Ok(self.rate_unchecked(e_left, e_right))
    }

    #[inline]
    pub(crate) fn rate_unchecked(&self, e_left: f64, e_right: f64) -> f64 {
        let s = e_left + e_right;
        let sum_part = match self.lambda_s {
            LambdaS::Constant(l) => l,
            LambdaS::SqrtWithCutoff { lambda_min } => s.sqrt().max(lambda_min),
            LambdaS::Sqrt => s.sqrt(),
        };
        // the ratio is undefined at the origin; use the value at 1/2
        let beta = if s > 0.0 { e_left / s } else { 0.5 };
        sum_part * self.lambda_r.eval(beta)
    }
}

/// Kernel as written in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    // empty braces so unknown fields are rejected on every variant
    Gg {},
    Uniform {},
    Beta { d: f64 },
    PointHalf {},
}

impl KernelConfig {
    pub fn build(&self) -> Result<AlphaKernel> {
        match self {
            Self::Gg {} => Ok(AlphaKernel::GaspardGilbert),
            Self::Uniform {} => Ok(AlphaKernel::Uniform),
            Self::Beta { d } => AlphaKernel::symmetric_beta(*d),
            Self::PointHalf {} => Ok(AlphaKernel::PointMassHalf),
        }
    }
}

/// Sum part of the rate as written in experiment configs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateConfig {
    Constant { lambda: f64 },
    SqrtCutoff { lambda_min: f64 },
    Sqrt {},
}

impl RateConfig {
    /// The ratio part follows the kernel: billiard-lattice kernels come with
    /// their own ratio rate, every other kernel with a constant one.
    pub fn build(&self, kernel: &KernelConfig) -> Result<RateSpec> {
        let lambda_s = match *self {
            Self::Constant { lambda } => LambdaS::Constant(lambda),
            Self::SqrtCutoff { lambda_min } => LambdaS::SqrtWithCutoff { lambda_min },
            Self::Sqrt {} => LambdaS::Sqrt,
        };
        let lambda_r = match kernel {
            KernelConfig::Gg {} => LambdaR::GaspardGilbert,
            _ => LambdaR::Constant,
        };
        let spec = RateSpec { lambda_s, lambda_r };
        spec.validate()?;
        Ok(spec)
    }
}

/// Stable, human-readable list of the kernel and rate families a config may name.
pub fn list_models() -> String {
    [
        "kernels:",
        "  gg          Gaspard-Gilbert 3-D billiard kernel (state dependent; implies the gg ratio rate)",
        "  uniform     alpha ~ U[0,1]",
        "  beta        alpha ~ Beta(d/2, d/2); params: d > 0",
        "  point_half  alpha = 1/2 always",
        "rates:",
        "  constant    Lambda_s(s) = lambda; params: lambda > 0",
        "  sqrt_cutoff Lambda_s(s) = max(sqrt(s), lambda_min); params: lambda_min > 0",
        "  sqrt        Lambda_s(s) = sqrt(s) (no floor; gap_scan only)",
        "",
    ]
    .join("\n")
}
