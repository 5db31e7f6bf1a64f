//! Event-driven simulation of the exchange process, its embedded jump chain
//! and the synchronous coupling of two copies.

use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::kernels::{AlphaKernel, RateSpec};
use crate::rng::{replica_rng, SimRng};
use crate::state_space::{exchange_in_place, metric_sq, metric_sq_unchecked, EnergyState};

/// Kernel plus rate: everything needed to run the dynamics.
#[derive(Debug, Clone)]
pub struct Model {
    pub kernel: AlphaKernel,
    pub rate: RateSpec,
}

impl Model {
    pub fn new(kernel: AlphaKernel, rate: RateSpec) -> Result<Self> {
        rate.validate()?;
        Ok(Self { kernel, rate })
    }

    /// Constant rate `lambda` with a state-independent kernel.
    pub fn reference(lambda: f64, kernel: AlphaKernel) -> Result<Self> {
        if !kernel.state_independent() {
            return Err(Error::StateDependentKernel);
        }
        Self::new(kernel, RateSpec::constant(lambda))
    }

    pub fn is_reference(&self) -> bool {
        self.rate.constant_value().is_some() && self.kernel.state_independent()
    }

    pub fn describe(&self) -> String {
        format!("kernel={} rate={:?}", self.kernel.name(), self.rate)
    }

    #[inline]
    fn draw_alpha<R: Rng>(&self, left: f64, right: f64, rng: &mut R) -> f64 {
        let s = left + right;
        let beta = if s > 0.0 { left / s } else { 0.5 };
        self.kernel.sample(beta, rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    /// 1-based bond index `i` of the pair `(i, i+1)`.
    pub bond: usize,
    pub alpha: f64,
}

/// Binary partial-sum tree over bond rates.
///
/// Internal nodes are recomputed from their children on every update, so the
/// total never accumulates drift.
#[derive(Debug, Clone)]
struct RateTree {
    leaves: usize,
    nodes: Vec<f64>,
}

impl RateTree {
    fn new(rates: &[f64]) -> Self {
        let leaves = rates.len().next_power_of_two();
        let mut nodes = vec![0.0; 2 * leaves];
        nodes[leaves..leaves + rates.len()].copy_from_slice(rates);
        for i in (1..leaves).rev() {
            nodes[i] = nodes[2 * i] + nodes[2 * i + 1];
        }
        Self { leaves, nodes }
    }

    fn total(&self) -> f64 {
        self.nodes[1]
    }

    fn set(&mut self, bond: usize, rate: f64) {
        let mut i = self.leaves + bond;
        self.nodes[i] = rate;
        while i > 1 {
            i /= 2;
            self.nodes[i] = self.nodes[2 * i] + self.nodes[2 * i + 1];
        }
    }

    /// Leaf whose cumulative interval contains `target` in `[0, total)`.
    fn find(&self, mut target: f64) -> usize {
        let mut i = 1;
        while i < self.leaves {
            let left = self.nodes[2 * i];
            if target < left || self.nodes[2 * i + 1] <= 0.0 {
                i *= 2;
            } else {
                target -= left;
                i = 2 * i + 1;
            }
        }
        i - self.leaves
    }
}

enum Clock {
    /// All bonds fire at the same rate.
    Uniform(f64),
    Tree(RateTree),
}

/// Mutable state of one continuous-time replica.
pub struct CtProcess<'m> {
    model: &'m Model,
    x: Vec<f64>,
    quantum: f64,
    time: f64,
    clock: Clock,
    n_events: u64,
}

impl<'m> CtProcess<'m> {
    pub fn new(model: &'m Model, x0: &EnergyState) -> Self {
        let x = x0.energies().to_vec();
        let clock = match model.rate.constant_value() {
            Some(l) => Clock::Uniform(l),
            None => {
                let rates: Vec<f64> = x.windows(2).map(|w| model.rate.rate_unchecked(w[0], w[1])).collect();
                Clock::Tree(RateTree::new(&rates))
            }
        };
        Self { model, x, quantum: x0.quantum(), time: 0.0, clock, n_events: 0 }
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn energies(&self) -> &[f64] {
        &self.x
    }

    pub fn n_events(&self) -> u64 {
        self.n_events
    }

    pub fn state(&self) -> EnergyState {
        EnergyState::from_parts(self.x.clone(), self.quantum)
    }

    pub fn total_rate(&self) -> f64 {
        match &self.clock {
            Clock::Uniform(l) => l * (self.x.len() - 1) as f64,
            Clock::Tree(t) => t.total(),
        }
    }

    fn pick_bond<R: Rng>(&self, rng: &mut R) -> usize {
        match &self.clock {
            Clock::Uniform(_) => rng.random_range(0..self.x.len() - 1),
            Clock::Tree(t) => t.find(rng.random::<f64>() * t.total()),
        }
    }

    fn fire<R: Rng>(&mut self, left: usize, rng: &mut R) -> f64 {
        let alpha = self.model.draw_alpha(self.x[left], self.x[left + 1], rng);
        exchange_in_place(&mut self.x, left, alpha, self.quantum);
        if let Clock::Tree(tree) = &mut self.clock {
            let lo = left.saturating_sub(1);
            let hi = (left + 1).min(self.x.len() - 2);
            for b in lo..=hi {
                tree.set(b, self.model.rate.rate_unchecked(self.x[b], self.x[b + 1]));
            }
        }
        self.n_events += 1;
        alpha
    }

    /// Fires exactly one event. `None` if every bond rate is zero.
    pub fn step_event<R: Rng>(&mut self, rng: &mut R) -> Option<JumpEvent> {
        let total = self.total_rate();
        if !(total > 0.0) {
            return None;
        }
        let wait: f64 = Exp1.sample(rng);
        self.time += wait / total;
        let left = self.pick_bond(rng);
        let alpha = self.fire(left, rng);
        Some(JumpEvent { time: self.time, bond: left + 1, alpha })
    }

    /// Runs until `until`, optionally logging events.
    ///
    /// The clock is memoryless, so a pending event that would land past
    /// `until` is discarded rather than stored.
    pub fn advance_to<R: Rng>(&mut self, until: f64, rng: &mut R, mut log: Option<&mut Vec<JumpEvent>>) -> Advance {
        while self.time < until {
            let total = self.total_rate();
            if !(total > 0.0) {
                return Advance::Absorbed(self.time);
            }
            let wait: f64 = Exp1.sample(rng);
            let t = self.time + wait / total;
            if t > until {
                break;
            }
            self.time = t;
            let left = self.pick_bond(rng);
            let alpha = self.fire(left, rng);
            if let Some(log) = log.as_deref_mut() {
                log.push(JumpEvent { time: t, bond: left + 1, alpha });
            }
        }
        self.time = self.time.max(until);
        Advance::Reached
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Advance {
    Reached,
    /// Total rate hit zero at this time; the state is frozen from then on.
    Absorbed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub time: f64,
    pub state: EnergyState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub initial: EnergyState,
    /// Present only when event logging was requested.
    pub events: Option<Vec<JumpEvent>>,
    pub samples: Vec<Sample>,
    pub n_events: u64,
    pub absorbed_at: Option<f64>,
    pub seed: Option<u64>,
}

impl Trajectory {
    /// Re-applies the logged events to `initial` and returns the states at
    /// the recorded sample times.
    pub fn replay(&self) -> Result<Vec<Sample>> {
        let events =
            self.events.as_ref().ok_or_else(|| Error::InvalidParameter("trajectory has no event log".into()))?;
        let mut x = self.initial.energies().to_vec();
        let quantum = self.initial.quantum();
        let mut next = 0;
        let mut out = Vec::with_capacity(self.samples.len());
        for s in &self.samples {
            while next < events.len() && events[next].time <= s.time {
                exchange_in_place(&mut x, events[next].bond - 1, events[next].alpha, quantum);
                next += 1;
            }
            out.push(Sample { time: s.time, state: EnergyState::from_parts(x.clone(), quantum) });
        }
        Ok(out)
    }

    pub fn write_event_log<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "time,bond,alpha")?;
        for e in self.events.iter().flatten() {
            writeln!(w, "{},{},{}", e.time, e.bond, e.alpha)?;
        }
        Ok(())
    }
}

fn check_sample_times(horizon: f64, sample_times: &[f64]) -> Result<()> {
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::InvalidParameter(format!("horizon must be >= 0, got {horizon}")));
    }
    let mut prev = 0.0;
    for &t in sample_times {
        if !(t >= prev && t <= horizon) {
            return Err(Error::InvalidParameter(format!(
                "sample times must be ascending within [0, {horizon}], got {t}"
            )));
        }
        prev = t;
    }
    Ok(())
}

/// Evenly spaced grid `0, T/(n-1), ..., T`.
pub fn time_grid(horizon: f64, n_points: usize) -> Vec<f64> {
    if n_points < 2 {
        return vec![horizon];
    }
    (0..n_points).map(|k| horizon * k as f64 / (n_points - 1) as f64).collect()
}

/// Continuous-time simulation up to `horizon`, with states recorded at `sample_times`.
pub fn simulate_ct<R: Rng>(
    x0: &EnergyState,
    model: &Model,
    horizon: f64,
    sample_times: &[f64],
    log_events: bool,
    rng: &mut R,
) -> Result<Trajectory> {
    check_sample_times(horizon, sample_times)?;
    let mut process = CtProcess::new(model, x0);
    let mut log = log_events.then(Vec::new);
    let mut samples = Vec::with_capacity(sample_times.len());
    let mut absorbed_at = None;
    for &t in sample_times.iter().chain(std::iter::once(&horizon)) {
        if absorbed_at.is_none() {
            if let Advance::Absorbed(at) = process.advance_to(t, rng, log.as_mut()) {
                absorbed_at = Some(at);
            }
        }
        if samples.len() < sample_times.len() {
            samples.push(Sample { time: t, state: process.state() });
        }
    }
    Ok(Trajectory { initial: x0.clone(), events: log, samples, n_events: process.n_events(), absorbed_at, seed: None })
}

/// [`simulate_ct`] on stream 0 of `seed`, recording the seed in the trajectory.
pub fn simulate_ct_seeded(
    x0: &EnergyState,
    model: &Model,
    horizon: f64,
    sample_times: &[f64],
    log_events: bool,
    seed: u64,
) -> Result<Trajectory> {
    let mut rng: SimRng = replica_rng(seed, 0);
    let mut traj = simulate_ct(x0, model, horizon, sample_times, log_events, &mut rng)?;
    traj.seed = Some(seed);
    Ok(traj)
}

/// One step of the embedded chain: uniform bond, kernel draw, exchange.
pub fn step_embedded<R: Rng>(x: &EnergyState, model: &Model, rng: &mut R) -> Result<EnergyState> {
    if model.rate.constant_value().is_none() {
        return Err(Error::NotReferenceModel);
    }
    let mut e = x.energies().to_vec();
    let left = rng.random_range(0..e.len() - 1);
    let alpha = model.draw_alpha(e[left], e[left + 1], rng);
    exchange_in_place(&mut e, left, alpha, x.quantum());
    Ok(EnergyState::from_parts(e, x.quantum()))
}

/// Runs two copies driven by the same bond and the same `alpha` at every
/// event and returns `(t, d(X_t, Y_t)^2)` at each sample time.
pub fn simulate_coupled<R: Rng>(
    x0: &EnergyState,
    y0: &EnergyState,
    model: &Model,
    horizon: f64,
    sample_times: &[f64],
    rng: &mut R,
) -> Result<Vec<(f64, f64)>> {
    let lambda = model.rate.constant_value().ok_or(Error::NotReferenceModel)?;
    if !model.kernel.state_independent() {
        return Err(Error::NotReferenceModel);
    }
    metric_sq(x0, y0)?;
    check_sample_times(horizon, sample_times)?;

    let mut x = x0.energies().to_vec();
    let mut y = y0.energies().to_vec();
    let bonds = x.len() - 1;
    let total = lambda * bonds as f64;
    let mut time = 0.0;
    let mut out = Vec::with_capacity(sample_times.len());
    for &t in sample_times {
        loop {
            let wait: f64 = Exp1.sample(rng);
            if time + wait / total > t {
                time = t;
                break;
            }
            time += wait / total;
            let left = rng.random_range(0..bonds);
            let alpha = model.kernel.sample(0.5, rng);
            exchange_in_place(&mut x, left, alpha, x0.quantum());
            exchange_in_place(&mut y, left, alpha, y0.quantum());
        }
        out.push((t, metric_sq_unchecked(&x, &y)));
    }
    Ok(out)
}

/// User-supplied observable on the energy vector.
pub type ObservableFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Scalar function of a configuration recorded along trajectories.
#[derive(Clone)]
pub enum Observable {
    Total,
    /// Energy at 1-based site `i`.
    Site(usize),
    /// Partial-sum coordinate `u_i`.
    U(usize),
    /// Cosine mode `A_k(x) = sum_i cos(pi k (i - 1/2) / N) x_i`.
    Fourier(usize),
    Custom(String, ObservableFn),
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl Observable {
    pub fn name(&self) -> String {
        match self {
            Self::Total => "total".into(),
            Self::Site(i) => format!("x{i}"),
            Self::U(i) => format!("u{i}"),
            Self::Fourier(k) => format!("fourier_{k}"),
            Self::Custom(name, _) => name.clone(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let n = x.len();
        match self {
            Self::Total => crate::numeric::exact_sum(x),
            Self::Site(i) => x[*i - 1],
            Self::U(i) => {
                let eps = crate::numeric::exact_sum(x) / n as f64;
                x[..*i].iter().sum::<f64>() - *i as f64 * eps
            }
            Self::Fourier(k) => fourier_coefficients(*k, n).iter().zip(x).map(|(c, e)| c * e).sum(),
            Self::Custom(_, f) => f(x),
        }
    }

    /// Coefficients when the observable is linear in the energies.
    pub fn linear_coefficients(&self, n_sites: usize) -> Option<Vec<f64>> {
        match self {
            Self::Total => Some(vec![1.0; n_sites]),
            Self::Site(i) => Some((1..=n_sites).map(|j| if j == *i { 1.0 } else { 0.0 }).collect()),
            Self::Fourier(k) => Some(fourier_coefficients(*k, n_sites)),
            Self::U(_) | Self::Custom(..) => None,
        }
    }
}

impl FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("unknown observable {s:?}"));
        let index = |t: &str| t.parse::<usize>().ok().filter(|&i| i >= 1).ok_or_else(bad);
        if s == "total" {
            Ok(Self::Total)
        } else if let Some(k) = s.strip_prefix("fourier_") {
            index(k).map(Self::Fourier)
        } else if let Some(i) = s.strip_prefix('u') {
            index(i).map(Self::U)
        } else if let Some(i) = s.strip_prefix('x') {
            index(i).map(Self::Site)
        } else {
            Err(bad())
        }
    }
}

pub fn fourier_coefficients(k: usize, n_sites: usize) -> Vec<f64> {
    let n = n_sites as f64;
    (1..=n_sites).map(|i| (PI * k as f64 * (i as f64 - 0.5) / n).cos()).collect()
}

/// Observable values at sample times, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableMatrix {
    pub names: Vec<String>,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl ObservableMatrix {
    /// Long-format CSV rows `time,replica,observable,value` (no header).
    pub fn write_csv_rows<W: Write>(&self, replica: usize, w: &mut W) -> io::Result<()> {
        for (t, row) in self.times.iter().zip(&self.values) {
            for (name, v) in self.names.iter().zip(row) {
                writeln!(w, "{t},{replica},{name},{v}")?;
            }
        }
        Ok(())
    }
}

pub const SAMPLES_CSV_HEADER: &str = "time,replica,observable,value";

pub fn record_observables(trajectory: &Trajectory, observables: &[Observable]) -> ObservableMatrix {
    ObservableMatrix {
        names: observables.iter().map(Observable::name).collect(),
        times: trajectory.samples.iter().map(|s| s.time).collect(),
        values: trajectory
            .samples
            .iter()
            .map(|s| observables.iter().map(|o| o.eval(s.state.energies())).collect())
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{LambdaR, LambdaS};
    use crate::numeric::mean_stderr;

    fn st(v: &[f64]) -> EnergyState {
        EnergyState::new(v.to_vec()).unwrap()
    }

    fn uniform_model(lambda: f64) -> Model {
        Model::reference(lambda, AlphaKernel::Uniform).unwrap()
    }

    fn gg_model() -> Model {
        Model::new(
            AlphaKernel::GaspardGilbert,
            RateSpec { lambda_s: LambdaS::SqrtWithCutoff { lambda_min: 0.1 }, lambda_r: LambdaR::GaspardGilbert },
        )
        .unwrap()
    }

    #[test]
    fn rate_tree_sampling_matches_weights() {
        let rates = [0.5, 0.0, 2.0, 1.5, 0.0];
        let mut tree = RateTree::new(&rates);
        assert_eq!(tree.total(), 4.0);
        assert_eq!(tree.find(0.0), 0);
        assert_eq!(tree.find(0.49), 0);
        assert_eq!(tree.find(0.5), 2);
        assert_eq!(tree.find(2.6), 3);
        assert_eq!(tree.find(3.999_999), 3);
        tree.set(1, 1.0);
        assert_eq!(tree.total(), 5.0);
        assert_eq!(tree.find(0.7), 1);
    }

    #[test]
    fn embedded_step_examples() {
        let mut rng = replica_rng(3, 0);
        let half = Model::reference(1.0, AlphaKernel::PointMassHalf).unwrap();
        let y = step_embedded(&st(&[0.25, 5.25]), &half, &mut rng).unwrap();
        assert_eq!(y.energies(), &[2.75, 2.75]);
        // an odd number of grid steps splits as evenly as the grid allows
        let x = st(&[0.3, 5.1]);
        let y = step_embedded(&x, &half, &mut rng).unwrap();
        let (a, b) = (y.energies()[0], y.energies()[1]);
        assert_eq!(a + b, x.energies()[0] + x.energies()[1]);
        assert!((a - b).abs() <= x.quantum());
        assert_eq!(step_embedded(&st(&[1.0, 2.0]), &gg_model(), &mut rng).unwrap_err(), Error::NotReferenceModel);

        // constant-rate gg kernel is allowed (state-dependent kernel, constant rate)
        let gg_const = Model::new(AlphaKernel::GaspardGilbert, RateSpec::constant(1.0)).unwrap();
        assert!(step_embedded(&st(&[1.0, 2.0]), &gg_const, &mut rng).is_ok());
    }

    #[test]
    fn embedded_bond_choice_is_uniform() {
        let model = uniform_model(1.0);
        let mut rng = replica_rng(5, 0);
        let mut counts = [0usize; 10];
        let x = EnergyState::uniform(11, 1.0).unwrap();
        let steps = 1_000_000;
        let mut e = x.clone();
        for _ in 0..steps {
            let before = e.energies().to_vec();
            e = step_embedded(&e, &model, &mut rng).unwrap();
            // left site of the fired bond, or its right site when the left share is unchanged
            if let Some(i) = (0..11).find(|&i| before[i] != e.energies()[i]) {
                counts[i.min(9)] += 1;
            }
        }
        // a uniform draw almost never leaves the pair bitwise unchanged
        assert!(counts.iter().sum::<usize>() > steps - 10);
        let p = 0.1;
        let sd = (steps as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - steps as f64 * p).abs() < 3.0 * sd, "{counts:?}");
        }
    }

    #[test]
    fn n2_step_ratio_follows_the_kernel() {
        // after one step the ratio is exactly the kernel draw with the same rng
        let model = Model::new(AlphaKernel::GaspardGilbert, RateSpec::constant(1.0)).unwrap();
        let x = st(&[1.0, 3.0]);
        let mut a = replica_rng(9, 0);
        let mut b = replica_rng(9, 0);
        let y = step_embedded(&x, &model, &mut b).unwrap();
        let _bond: usize = a.random_range(0..1);
        let alpha = AlphaKernel::GaspardGilbert.sample(0.25, &mut a);
        assert!((y.energies()[0] / 4.0 - alpha).abs() < 1e-15);
    }

    #[test]
    fn event_counts_are_poisson() {
        for &(lambda, n, horizon) in &[(1.0, 2usize, 1000.0), (2.0, 5, 500.0)] {
            let model = uniform_model(lambda);
            let x0 = EnergyState::uniform(n, 1.0).unwrap();
            let traj = simulate_ct_seeded(&x0, &model, horizon, &[horizon], false, 17).unwrap();
            let mean = lambda * (n - 1) as f64 * horizon;
            assert!((traj.n_events as f64 - mean).abs() < 3.0 * mean.sqrt(), "{} vs {mean}", traj.n_events);
        }
    }

    #[test]
    fn ct_conserves_energy_and_is_deterministic() {
        let model = gg_model();
        let x0 = st(&[0.1, 3.2, 0.0, 1.7, 2.2, 0.9]);
        let grid = time_grid(50.0, 26);
        let a = simulate_ct_seeded(&x0, &model, 50.0, &grid, true, 42).unwrap();
        let b = simulate_ct_seeded(&x0, &model, 50.0, &grid, true, 42).unwrap();
        assert_eq!(a, b);
        let total = x0.total();
        assert!(a.samples.iter().all(|s| s.state.total() == total));
        assert_eq!(a.replay().unwrap(), a.samples);
        let events = a.events.as_ref().unwrap();
        assert!(events.windows(2).all(|w| w[0].time < w[1].time));
        assert_eq!(events.len() as u64, a.n_events);

        let m = record_observables(&a, &[Observable::Total, Observable::U(1)]);
        assert!(m.values.iter().all(|row| row[0] == total));

        let c = simulate_ct_seeded(&x0, &model, 50.0, &grid, true, 43).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn ct_rejects_bad_grids() {
        let model = uniform_model(1.0);
        let x0 = EnergyState::uniform(3, 1.0).unwrap();
        let mut rng = replica_rng(0, 0);
        assert!(simulate_ct(&x0, &model, 1.0, &[0.5, 0.2], false, &mut rng).is_err());
        assert!(simulate_ct(&x0, &model, 1.0, &[2.0], false, &mut rng).is_err());
        assert!(simulate_ct(&x0, &model, -1.0, &[], false, &mut rng).is_err());
    }

    #[test]
    fn zero_rate_state_is_flagged_absorbing() {
        let model = Model::new(
            AlphaKernel::GaspardGilbert,
            RateSpec { lambda_s: LambdaS::Sqrt, lambda_r: LambdaR::GaspardGilbert },
        )
        .unwrap();
        let origin = EnergyState::from_parts(vec![0.0, 0.0, 0.0], 1.0);
        let mut rng = replica_rng(0, 0);
        let traj = simulate_ct(&origin, &model, 5.0, &[1.0, 5.0], false, &mut rng).unwrap();
        assert_eq!(traj.absorbed_at, Some(0.0));
        assert_eq!(traj.n_events, 0);
        assert_eq!(traj.samples.len(), 2);
    }

    #[test]
    fn coupled_examples() {
        let model = uniform_model(1.0);
        let x0 = st(&[3.0, 0.5, 1.5, 1.0]);
        let mut rng = replica_rng(1, 0);
        let grid = time_grid(20.0, 11);
        let same = simulate_coupled(&x0, &x0, &model, 20.0, &grid, &mut rng).unwrap();
        assert!(same.iter().all(|&(_, d2)| d2 == 0.0));

        let y0 = st(&[1.0, 1.0, 1.0, 3.0]);
        let d = simulate_coupled(&x0, &y0, &model, 20.0, &grid, &mut rng).unwrap();
        assert_eq!(d[0].1, metric_sq(&x0, &y0).unwrap());

        assert_eq!(simulate_coupled(&x0, &y0, &gg_model(), 1.0, &[1.0], &mut rng), Err(Error::NotReferenceModel));
        assert!(simulate_coupled(&x0, &st(&[1.0, 1.0, 1.0, 1.0]), &model, 1.0, &[1.0], &mut rng).is_err());
    }

    #[test]
    fn n2_coupling_collapses_on_first_event() {
        let model = Model::reference(1.0, AlphaKernel::symmetric_beta(3.0).unwrap()).unwrap();
        // dyadic entries so both states have bitwise the same total
        let x0 = st(&[0.125, 0.75]);
        let y0 = st(&[0.375, 0.5]);
        let mut rng = replica_rng(2, 0);
        // horizon long enough that an event has happened with overwhelming probability
        let d = simulate_coupled(&x0, &y0, &model, 50.0, &[0.0, 50.0], &mut rng).unwrap();
        assert!(d[0].1 > 0.0);
        assert_eq!(d[1].1, 0.0);
    }

    #[test]
    fn fourier_observable_example() {
        let v = Observable::Fourier(1).eval(&[2.0, 1.0, 3.0]);
        assert!((v + 3f64.sqrt() / 2.0).abs() < 1e-12, "{v}");
        assert!((v + 0.86603).abs() < 1e-5);
        assert_eq!(Observable::U(1).eval(&[1.0, 1.0, 1.0]), 0.0);
        assert_eq!("fourier_2".parse::<Observable>().unwrap().name(), "fourier_2");
        assert_eq!("u3".parse::<Observable>().unwrap().name(), "u3");
        assert_eq!("x1".parse::<Observable>().unwrap().name(), "x1");
        assert!("u0".parse::<Observable>().is_err());
        assert!("energy".parse::<Observable>().is_err());
    }

    #[test]
    fn embedded_chain_matches_ct_jump_chain() {
        // constant rates: the CT process observed at its k-th event is the embedded chain after k steps
        let model = Model::reference(1.5, AlphaKernel::Uniform).unwrap();
        let x0 = st(&[4.0, 0.0, 1.0, 0.0, 0.0]);
        let k = 5;
        let replicas = 100_000;
        let ct: Vec<f64> = crate::rng::par_replicas(replicas, 100, |_, rng| {
            let mut p = CtProcess::new(&model, &x0);
            for _ in 0..k {
                p.step_event(rng).unwrap();
            }
            p.energies()[0]
        });
        let emb: Vec<f64> = crate::rng::par_replicas(replicas, 200, |_, rng| {
            let mut x = x0.clone();
            for _ in 0..k {
                x = step_embedded(&x, &model, rng).unwrap();
            }
            x.energies()[0]
        });
        for power in 1..=2 {
            let a: Vec<f64> = ct.iter().map(|v| v.powi(power)).collect();
            let b: Vec<f64> = emb.iter().map(|v| v.powi(power)).collect();
            let (ma, sa) = mean_stderr(&a);
            let (mb, sb) = mean_stderr(&b);
            assert!((ma - mb).abs() < 3.0 * (sa * sa + sb * sb).sqrt(), "moment {power}: {ma} vs {mb}");
        }
    }

    #[test]
    fn samples_csv_format() {
        let model = uniform_model(1.0);
        let x0 = st(&[1.0, 1.0]);
        let traj = simulate_ct_seeded(&x0, &model, 1.0, &[0.0], false, 0).unwrap();
        let m = record_observables(&traj, &[Observable::Total]);
        let mut buf = Vec::new();
        m.write_csv_rows(7, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "0,7,total,2\n");
    }
}
