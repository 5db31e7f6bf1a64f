//! Reversible Gamma-product measures, the micro-canonical (Dirichlet) laws
//! they induce on a simplex, and statistical checks of stationarity and
//! detailed balance.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};
use statrs::function::beta::ln_beta;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::kernels::{AlphaKernel, LambdaR};
use crate::numeric::{exact_sum, integrate, ks_critical_1pct, ks_statistic};
use crate::rng::par_replicas;
use crate::simulator::{CtProcess, Model};
use crate::state_space::{energy_quantum, snap, EnergyState};

/// Product of `Gamma(dim_d / 2, scale_eps)` single-site laws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaProductSpec {
    pub dim_d: f64,
    pub scale_eps: f64,
}

impl GammaProductSpec {
    pub fn new(dim_d: f64, scale_eps: f64) -> Result<Self> {
        positive("dim_d", dim_d)?;
        positive("scale_eps", scale_eps)?;
        Ok(Self { dim_d, scale_eps })
    }

    fn site_law(&self) -> Gamma<f64> {
        Gamma::new(0.5 * self.dim_d, self.scale_eps).expect("validated parameters")
    }

    /// Single-site density `(1/eps) (x/eps)^{d/2-1} e^{-x/eps} / Gamma(d/2)`.
    pub fn site_density(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let a = 0.5 * self.dim_d;
        let y = x / self.scale_eps;
        ((a - 1.0) * y.ln() - y - ln_gamma(a)).exp() / self.scale_eps
    }
}

/// The Gamma-product law conditioned on total energy `n_sites * epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MicrocanonicalSpec {
    pub dim_d: f64,
    /// Mean energy per site.
    pub epsilon: f64,
    pub n_sites: usize,
}

impl MicrocanonicalSpec {
    pub fn new(dim_d: f64, epsilon: f64, n_sites: usize) -> Result<Self> {
        positive("dim_d", dim_d)?;
        positive("epsilon", epsilon)?;
        if n_sites < 2 {
            return Err(Error::TooFewSites(n_sites));
        }
        Ok(Self { dim_d, epsilon, n_sites })
    }

    pub fn total(&self) -> f64 {
        self.n_sites as f64 * self.epsilon
    }

    /// Law of `x_1 / total`: `Beta(d/2, (N-1) d/2)`.
    pub fn site_fraction_law(&self) -> Beta {
        let a = 0.5 * self.dim_d;
        Beta::new(a, (self.n_sites - 1) as f64 * a).expect("validated parameters")
    }

    /// Law of the bond ratio `x_1 / (x_1 + x_2)`: `Beta(d/2, d/2)`.
    pub fn ratio_law(&self) -> Beta {
        let a = 0.5 * self.dim_d;
        Beta::new(a, a).expect("validated parameters")
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")))
    }
}

pub fn sample_gamma_product<R: Rng>(spec: &GammaProductSpec, n_sites: usize, rng: &mut R) -> Result<EnergyState> {
    if n_sites < 2 {
        return Err(Error::TooFewSites(n_sites));
    }
    let law = spec.site_law();
    loop {
        let x: Vec<f64> = (0..n_sites).map(|_| law.sample(rng)).collect();
        if let Ok(s) = EnergyState::new(x) {
            return Ok(s);
        }
    }
}

/// Exact draw from the conditioned law: normalized Gamma variables scaled to
/// the simplex total. The result sums (correctly rounded) to `N * epsilon`.
pub fn sample_microcanonical<R: Rng>(spec: &MicrocanonicalSpec, rng: &mut R) -> EnergyState {
    let law = Gamma::new(0.5 * spec.dim_d, 1.0).expect("validated parameters");
    let target = spec.total();
    let mut x: Vec<f64> = loop {
        let g: Vec<f64> = (0..spec.n_sites).map(|_| law.sample(rng)).collect();
        let s = exact_sum(&g);
        if s > 0.0 {
            break g.into_iter().map(|v| v / s * target).collect();
        }
    };
    // snap to the energy grid of the target, then move the (exact) residue
    // into the largest entry
    let quantum = energy_quantum(target);
    for v in x.iter_mut() {
        *v = snap(*v, quantum);
    }
    let largest = (0..x.len()).max_by(|&a, &b| x[a].total_cmp(&x[b])).unwrap_or(0);
    x[largest] += target - exact_sum(&x);
    debug_assert_eq!(exact_sum(&x), target);
    EnergyState::from_parts(x, quantum)
}

/// Sum law `nu_s`, ratio law `nu_r` and the rate-tilted ratio law `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioLaw {
    pub dim_d: f64,
    pub scale_eps: f64,
    pub lambda_r: LambdaR,
    /// Normalizer of `p`: `integral nu_r(b) Lambda_r(b) db`.
    pub z: f64,
}

impl RatioLaw {
    pub fn new(dim_d: f64, scale_eps: f64, lambda_r: LambdaR) -> Result<Self> {
        positive("dim_d", dim_d)?;
        positive("scale_eps", scale_eps)?;
        let mut law = Self { dim_d, scale_eps, lambda_r, z: 1.0 };
        if lambda_r != LambdaR::Constant {
            if dim_d < 1.0 {
                return Err(Error::InvalidParameter("tilted ratio law needs dim_d >= 1".into()));
            }
            // beta = sin^2(theta) removes the endpoint singularities of nu_r
            law.z = integrate(
                |t| {
                    let b = t.sin().powi(2);
                    law.nu_r(b) * lambda_r.eval(b) * (2.0 * t).sin()
                },
                0.0,
                0.5 * PI,
                1e-13,
            );
        }
        Ok(law)
    }

    /// Density of the pair sum, `Gamma(dim_d, scale_eps)`.
    pub fn nu_s(&self, sigma: f64) -> f64 {
        GammaProductSpec { dim_d: 2.0 * self.dim_d, scale_eps: self.scale_eps }.site_density(sigma)
    }

    /// Density of the ratio, `Beta(d/2, d/2)`.
    pub fn nu_r(&self, beta: f64) -> f64 {
        if beta <= 0.0 || beta >= 1.0 {
            return 0.0;
        }
        let a = 0.5 * self.dim_d;
        ((a - 1.0) * (beta.ln() + (1.0 - beta).ln()) - ln_beta(a, a)).exp()
    }

    /// Ratio law of the embedded two-site chain, `nu_r * Lambda_r / Z`.
    pub fn p(&self, beta: f64) -> f64 {
        self.nu_r(beta) * self.lambda_r.eval(beta) / self.z
    }
}

/// Max over a grid of `|F(b, a) - F(a, b)|` with flux
/// `F(b, a) = sqrt(b (1 - b)) Lambda_r(b) P(b, a)`.
///
/// The weight `sqrt(b (1 - b))` is the dimension-3 ratio law up to a constant,
/// so a zero residual is detailed balance of the ratio chain against it.
pub fn detailed_balance_residual(kernel: &AlphaKernel, lambda_r: LambdaR, grid_size: usize) -> Result<f64> {
    if !kernel.has_density() {
        return Err(Error::NoDensity);
    }
    if grid_size < 2 {
        return Err(Error::InvalidParameter("grid_size must be >= 2".into()));
    }
    let nodes: Vec<f64> = (0..=grid_size).map(|j| j as f64 / grid_size as f64).collect();
    let flux = |b: f64, a: f64| -> f64 {
        (b * (1.0 - b)).sqrt() * lambda_r.eval(b) * kernel.density(b, a).unwrap_or(f64::NAN)
    };
    let mut worst: f64 = 0.0;
    for (j, &b) in nodes.iter().enumerate() {
        for &a in &nodes[j + 1..] {
            let r = (flux(b, a) - flux(a, b)).abs();
            worst = if r.is_nan() { f64::INFINITY } else { worst.max(r) };
        }
    }
    Ok(worst)
}

/// One line of a statistical test report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub test: String,
    pub n: usize,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub horizon: f64,
    pub n_replicas: usize,
    pub tests: Vec<TestReport>,
    pub pass: bool,
}

/// `|z|` of the first four raw moments plus a KS statistic of `sample` against `law`.
pub fn compare_with_law(label: &str, sample: &mut [f64], law: &Beta) -> Vec<TestReport> {
    let n = sample.len();
    let mut out = Vec::with_capacity(5);
    let (a, b) = (law.shape_a(), law.shape_b());
    for k in 1..=4 {
        // E[Y^k] = prod_{j<k} (a + j) / (a + b + j)
        let exact: f64 = (0..k).map(|j| (a + j as f64) / (a + b + j as f64)).product();
        let powers: Vec<f64> = sample.iter().map(|v| v.powi(k)).collect();
        let (m, se) = crate::numeric::mean_stderr(&powers);
        let z = (m - exact).abs() / se;
        out.push(TestReport { test: format!("{label}_moment_{k}"), n, statistic: z, threshold: 3.0, pass: z <= 3.0 });
    }
    let d = ks_statistic(sample, |v| law.cdf(v));
    let crit = ks_critical_1pct(n);
    out.push(TestReport { test: format!("{label}_ks"), n, statistic: d, threshold: crit, pass: d <= crit });
    out
}

/// Starts replicas from the claimed stationary law, runs them to `horizon`
/// and checks that the site-1 share and the bond-1 ratio still follow it.
pub fn stationarity_test(
    model: &Model,
    spec: &MicrocanonicalSpec,
    horizon: f64,
    n_replicas: usize,
    seed: u64,
) -> Result<StationarityReport> {
    if !(horizon.is_finite() && horizon >= 0.0) || n_replicas < 2 {
        return Err(Error::InvalidParameter("need horizon >= 0 and at least 2 replicas".into()));
    }
    let total = spec.total();
    let finals: Vec<(f64, f64)> = par_replicas(n_replicas, seed, |_, rng| {
        let x0 = sample_microcanonical(spec, rng);
        let mut p = CtProcess::new(model, &x0);
        p.advance_to(horizon, rng, None);
        let x = p.energies();
        let pair = x[0] + x[1];
        (x[0] / total, if pair > 0.0 { x[0] / pair } else { 0.5 })
    });
    let (mut share, mut ratio): (Vec<f64>, Vec<f64>) = finals.into_iter().unzip();
    let mut tests = compare_with_law("site_share", &mut share, &spec.site_fraction_law());
    tests.extend(compare_with_law("bond_ratio", &mut ratio, &spec.ratio_law()));
    let pass = tests.iter().all(|t| t.pass);
    Ok(StationarityReport { horizon, n_replicas, tests, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::gg_lambda_r_unchecked;
    use crate::numeric::mean_stderr;
    use crate::rng::replica_rng;

    #[test]
    fn gamma_product_moments() {
        let spec = GammaProductSpec::new(3.0, 1.0).unwrap();
        let mut rng = replica_rng(4, 0);
        let draws: Vec<f64> =
            (0..500_000).flat_map(|_| sample_gamma_product(&spec, 2, &mut rng).unwrap().energies().to_vec()).collect();
        let n = draws.len() as f64;
        let (mean, se) = mean_stderr(&draws);
        assert!((mean - 1.5).abs() < 3.0 * se, "{mean}");
        let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        // Gamma(3/2,1): fourth central moment = 3a(a+2) = 15.75
        assert!((var - 1.5).abs() < 3.0 * ((15.75 - 2.25) / n).sqrt(), "{var}");

        let exp_spec = GammaProductSpec::new(2.0, 0.7).unwrap();
        let mut e: Vec<f64> = (0..500_000)
            .flat_map(|_| sample_gamma_product(&exp_spec, 2, &mut rng).unwrap().energies().to_vec())
            .collect();
        e.sort_by(|a, b| a.total_cmp(b));
        let median = 0.5 * (e[e.len() / 2 - 1] + e[e.len() / 2]);
        // sd of the sample median: 1 / (2 f(m) sqrt(n)), f(m) = 1 / (2 * 0.7)
        let sd = 0.7 / (e.len() as f64).sqrt();
        assert!((median - 0.7 * 2f64.ln()).abs() < 3.0 * sd, "{median}");
    }

    #[test]
    fn gamma_sum_and_ratio_are_uncorrelated() {
        let spec = GammaProductSpec::new(3.0, 1.0).unwrap();
        let mut rng = replica_rng(8, 0);
        let n = 1_000_000;
        let pairs: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let x = sample_gamma_product(&spec, 2, &mut rng).unwrap();
                let e = x.energies();
                (e[0] + e[1], e[0] / (e[0] + e[1]))
            })
            .collect();
        let (ms, mr) = pairs.iter().fold((0.0, 0.0), |(a, b), (s, r)| (a + s / n as f64, b + r / n as f64));
        let (mut cov, mut vs, mut vr) = (0.0, 0.0, 0.0);
        for (s, r) in &pairs {
            cov += (s - ms) * (r - mr);
            vs += (s - ms).powi(2);
            vr += (r - mr).powi(2);
        }
        let corr = cov / (vs * vr).sqrt();
        assert!(corr.abs() < 3.0 / (n as f64).sqrt(), "{corr}");
    }

    #[test]
    fn microcanonical_sums_exactly() {
        let mut rng = replica_rng(1, 0);
        for &(n, eps, d) in &[(2usize, 1.0, 3.0), (7, 0.3, 1.0), (64, 2.7, 3.0), (13, 1e-3, 0.5)] {
            let spec = MicrocanonicalSpec::new(d, eps, n).unwrap();
            for _ in 0..2000 {
                let x = sample_microcanonical(&spec, &mut rng);
                assert_eq!(x.total(), spec.total());
                assert!(x.energies().iter().all(|&v| v >= 0.0));
            }
        }
    }

    #[test]
    fn microcanonical_marginals() {
        let spec = MicrocanonicalSpec::new(3.0, 1.3, 2).unwrap();
        let mut rng = replica_rng(2, 0);
        let mut ratio: Vec<f64> = Vec::new();
        let mut first: Vec<f64> = Vec::new();
        for _ in 0..100_000 {
            let x = sample_microcanonical(&spec, &mut rng);
            ratio.push(x.energies()[0] / x.total());
            first.push(x.energies()[0]);
        }
        let (m, se) = mean_stderr(&first);
        assert!((m - 1.3).abs() < 3.0 * se);
        let law = Beta::new(1.5, 1.5).unwrap();
        let d = ks_statistic(&mut ratio, |v| law.cdf(v));
        assert!(d < ks_critical_1pct(ratio.len()), "{d}");
    }

    #[test]
    fn microcanonical_matches_rejection_conditioning() {
        // brute-force oracle: iid Gamma sites kept only when the total lands in a thin band
        let (n, eps, d) = (3usize, 1.0, 3.0);
        let spec = MicrocanonicalSpec::new(d, eps, n).unwrap();
        let gp = GammaProductSpec::new(d, eps / (0.5 * d)).unwrap();
        let band = 0.01 * spec.total();
        let mut rng = replica_rng(3, 0);
        let mut kept = Vec::new();
        while kept.len() < 40_000 {
            let x = sample_gamma_product(&gp, n, &mut rng).unwrap();
            if (x.total() - spec.total()).abs() < band {
                kept.push(x.energies()[0]);
            }
        }
        let direct: Vec<f64> = (0..40_000).map(|_| sample_microcanonical(&spec, &mut rng).energies()[0]).collect();
        for k in 1..=2 {
            let a: Vec<f64> = kept.iter().map(|v| v.powi(k)).collect();
            let b: Vec<f64> = direct.iter().map(|v| v.powi(k)).collect();
            let (ma, sa) = mean_stderr(&a);
            let (mb, sb) = mean_stderr(&b);
            assert!((ma - mb).abs() < 3.0 * (sa * sa + sb * sb).sqrt(), "moment {k}: {ma} vs {mb}");
        }
    }

    #[test]
    fn ratio_law_densities() {
        let law = RatioLaw::new(3.0, 1.0, LambdaR::GaspardGilbert).unwrap();
        assert!((law.nu_r(0.5) - 4.0 / PI).abs() < 1e-14);
        for &b in &[0.1, 0.37, 0.5, 0.93] {
            assert!((law.nu_r(b) - 8.0 / PI * (b * (1.0 - b)).sqrt()).abs() < 1e-13);
            let p = 8.0 / PI * (b * (1.0 - b)).sqrt() * gg_lambda_r_unchecked(b) / law.z;
            assert!((law.p(b) - p).abs() < 1e-13);
        }
        // closed form of the normalizer for d = 3
        let z_exact = 16.0 / (15.0 * PI.sqrt());
        assert!((law.z - z_exact).abs() < 1e-9, "{} vs {z_exact}", law.z);

        let unit = |f: &dyn Fn(f64) -> f64| integrate(|t| f(t.sin().powi(2)) * (2.0 * t).sin(), 0.0, 0.5 * PI, 1e-12);
        assert!((unit(&|b| law.nu_r(b)) - 1.0).abs() < 1e-9);
        assert!((unit(&|b| law.p(b)) - 1.0).abs() < 1e-9);
        let mass_s = integrate(|s| law.nu_s(s), 0.0, 60.0, 1e-12);
        assert!((mass_s - 1.0).abs() < 1e-6, "{mass_s}");
        // d = 3 sum law: (s/eps)^2 e^{-s/eps} / (2 eps)
        assert!((law.nu_s(2.0) - 4.0 * (-2.0f64).exp() / 2.0).abs() < 1e-14);
    }

    #[test]
    fn detailed_balance_examples() {
        let gg = detailed_balance_residual(&AlphaKernel::GaspardGilbert, LambdaR::GaspardGilbert, 200).unwrap();
        assert!(gg <= 1e-12, "{gg}");
        // state-independent Beta(1/2, 1/2) kernel is not balanced against the d = 3 weight
        let k1 = AlphaKernel::symmetric_beta(1.0).unwrap();
        assert!(detailed_balance_residual(&k1, LambdaR::Constant, 200).unwrap() > 0.1);
        let f = |b: f64, a: f64| (b * (1.0 - b)).sqrt() * k1.density(b, a).unwrap();
        assert!((f(0.5, 0.1) - f(0.1, 0.5)).abs() > 0.1);
        // on the diagonal the flux difference vanishes identically
        assert_eq!(f(0.3, 0.3) - f(0.3, 0.3), 0.0);
        assert_eq!(
            detailed_balance_residual(&AlphaKernel::PointMassHalf, LambdaR::Constant, 10),
            Err(Error::NoDensity)
        );
    }

    #[test]
    fn stationarity_detects_wrong_law() {
        let model = Model::reference(1.0, AlphaKernel::symmetric_beta(3.0).unwrap()).unwrap();
        let good = MicrocanonicalSpec::new(3.0, 1.0, 4).unwrap();
        let bad = MicrocanonicalSpec::new(1.0, 1.0, 4).unwrap();
        let r = stationarity_test(&model, &good, 10.0, 4000, 11).unwrap();
        assert!(r.pass, "{r:?}");
        let r = stationarity_test(&model, &bad, 10.0, 4000, 11).unwrap();
        assert!(!r.pass);
        let json = serde_json::to_value(&r.tests[0]).unwrap();
        for key in ["test", "n", "statistic", "threshold", "pass"] {
            assert!(json.get(key).is_some());
        }
    }
}
