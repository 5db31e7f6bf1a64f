//! Energy configurations on an open chain, the pair-exchange map, the
//! partial-sum (u) coordinates and the metric in which contraction is measured.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::exact_sum;

/// Relative tolerance on total energy when deciding whether two states share a simplex.
pub const SIMPLEX_RTOL: f64 = 1e-12;

/// Per-site energies `x_1, ..., x_N` of an open chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EnergyState {
    energies: Vec<f64>,
    quantum: f64,
}

impl EnergyState {
    /// Validates and stores `energies`, rounding each entry to the nearest
    /// multiple of [`EnergyState::quantum`] (a relative change of at most
    /// `2^-53` of the total).
    pub fn new(energies: Vec<f64>) -> Result<Self> {
        if energies.len() < 2 {
            return Err(Error::TooFewSites(energies.len()));
        }
        if let Some((site, &value)) = energies.iter().enumerate().find(|(_, e)| !(e.is_finite() && **e >= 0.0)) {
            return Err(Error::InvalidEnergy { site: site + 1, value });
        }
        let total = exact_sum(&energies);
        if !(total.is_finite() && total >= MIN_TOTAL) {
            return Err(Error::DegenerateTotal(total));
        }
        Ok(Self::on_grid(energies, total))
    }

    /// Rounds to the grid of `total` until the grid of the rounded total agrees.
    fn on_grid(mut energies: Vec<f64>, total: f64) -> Self {
        let mut quantum = energy_quantum(total);
        for _ in 0..4 {
            for e in energies.iter_mut() {
                *e = snap(*e, quantum);
            }
            let q = energy_quantum(exact_sum(&energies));
            if q <= quantum {
                // a finer grid contains the current one
                quantum = q;
                break;
            }
            quantum = q;
        }
        Self { energies, quantum }
    }

    /// Every site at energy `epsilon`.
    pub fn uniform(n_sites: usize, epsilon: f64) -> Result<Self> {
        Self::new(vec![epsilon; n_sites])
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Grid spacing of the stored energies: the unit in the last place of the
    /// total. Every entry and every partial sum is an exact multiple of it,
    /// so sums are computed without rounding in any order.
    pub fn quantum(&self) -> f64 {
        self.quantum
    }

    pub fn n_sites(&self) -> usize {
        self.energies.len()
    }

    /// Correctly rounded total energy; invariant under every exchange.
    pub fn total(&self) -> f64 {
        exact_sum(&self.energies)
    }

    pub fn mean_energy(&self) -> f64 {
        self.total() / self.energies.len() as f64
    }

    pub fn apply_exchange(&self, m: ExchangeMove) -> Result<Self> {
        m.check(self.n_sites())?;
        let mut energies = self.energies.clone();
        exchange_in_place(&mut energies, m.bond - 1, m.alpha, self.quantum);
        Ok(Self { energies, quantum: self.quantum })
    }

    pub fn to_u(&self) -> UCoords {
        let n = self.n_sites();
        let epsilon = self.mean_energy();
        let mut u = Vec::with_capacity(n - 1);
        let mut prefix = 0.0;
        for (i, &x) in self.energies[..n - 1].iter().enumerate() {
            prefix += x;
            u.push(prefix - (i + 1) as f64 * epsilon);
        }
        UCoords { u, epsilon, n_sites: n }
    }

    pub fn from_u(u: &UCoords) -> Result<Self> {
        u.to_state()
    }

    pub fn to_csv_row(&self) -> String {
        let parts: Vec<String> = self.energies.iter().map(f64::to_string).collect();
        parts.join(",")
    }

    pub fn from_csv_row(row: &str) -> Result<Self> {
        let energies = row
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| Error::InvalidParameter(format!("bad energy {t:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(energies)
    }

    /// Wraps energies that already lie on the grid `quantum`.
    pub(crate) fn from_parts(energies: Vec<f64>, quantum: f64) -> Self {
        debug_assert!(energies.len() >= 2);
        debug_assert!(energies.iter().all(|e| snap(*e, quantum) == *e));
        Self { energies, quantum }
    }
}

impl TryFrom<Vec<f64>> for EnergyState {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<EnergyState> for Vec<f64> {
    fn from(s: EnergyState) -> Self {
        s.energies
    }
}

/// Exchange on bond `(i, i+1)` in 1-based terms, `alpha` the left share.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExchangeMove {
    pub bond: usize,
    pub alpha: f64,
}

impl ExchangeMove {
    pub fn new(bond: usize, alpha: f64) -> Self {
        Self { bond, alpha }
    }

    fn check(&self, n_sites: usize) -> Result<()> {
        if self.bond < 1 || self.bond > n_sites - 1 {
            return Err(Error::BondOutOfRange { bond: self.bond, max: n_sites - 1 });
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::AlphaOutOfRange(self.alpha));
        }
        Ok(())
    }
}

/// Smallest total energy accepted; keeps the grid spacing a normal number.
pub const MIN_TOTAL: f64 = 1e-280;

/// Unit in the last place of `total`.
pub(crate) fn energy_quantum(total: f64) -> f64 {
    let biased = (total.to_bits() >> 52) & 0x7ff;
    debug_assert!(biased > 52 && biased < 0x7ff);
    f64::from_bits((biased - 52) << 52)
}

#[inline]
pub(crate) fn snap(x: f64, quantum: f64) -> f64 {
    (x / quantum).round_ties_even() * quantum
}

/// Splits the pair `(x[left], x[left+1])` into `alpha` and `1 - alpha` shares.
///
/// All entries are multiples of `quantum` and their total stays below
/// `2^53 quantum`, so the pair sum is exact; the larger share is snapped to
/// the grid and the smaller one is the exact remainder.
#[inline]
pub(crate) fn exchange_in_place(x: &mut [f64], left: usize, alpha: f64, quantum: f64) {
    let s = x[left] + x[left + 1];
    if alpha >= 0.5 {
        let a = snap(alpha * s, quantum);
        x[left] = a;
        x[left + 1] = s - a;
    } else {
        let b = snap((1.0 - alpha) * s, quantum);
        x[left + 1] = b;
        x[left] = s - b;
    }
}

/// Partial-sum representation `u_i = sum_{k<=i} (x_k - epsilon)`, `i = 1..N-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct UCoords {
    pub u: Vec<f64>,
    pub epsilon: f64,
    pub n_sites: usize,
}

impl UCoords {
    pub fn new(u: Vec<f64>, epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
        }
        let n_sites = u.len() + 1;
        if n_sites < 2 {
            return Err(Error::TooFewSites(n_sites));
        }
        Ok(Self { u, epsilon, n_sites })
    }

    /// `u_i` with the boundary convention `u_0 = u_N = 0`.
    pub fn get(&self, i: usize) -> f64 {
        if i == 0 || i == self.n_sites {
            0.0
        } else {
            self.u[i - 1]
        }
    }

    pub fn to_state(&self) -> Result<EnergyState> {
        let n = self.n_sites;
        let eps = self.epsilon;
        // rounding slack for states on the simplex boundary
        let slack = 1e-12 * eps * n as f64;
        let mut energies = Vec::with_capacity(n);
        for site in 1..=n {
            let x = eps + self.get(site) - self.get(site - 1);
            if x < -slack || !x.is_finite() {
                return Err(Error::OutsideSimplex { site, energy: x });
            }
            energies.push(x.max(0.0));
        }
        EnergyState::new(energies)
    }

    pub fn distance(&self, other: &UCoords) -> Result<f64> {
        if self.n_sites != other.n_sites {
            return Err(Error::SiteCountMismatch(self.n_sites, other.n_sites));
        }
        Ok(self.u.iter().zip(&other.u).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
    }
}

fn same_simplex(x: &EnergyState, y: &EnergyState) -> Result<()> {
    if x.n_sites() != y.n_sites() {
        return Err(Error::SiteCountMismatch(x.n_sites(), y.n_sites()));
    }
    let (tx, ty) = (x.total(), y.total());
    if (tx - ty).abs() > SIMPLEX_RTOL * tx.max(ty) {
        return Err(Error::SimplexMismatch(tx, ty));
    }
    Ok(())
}

/// Squared metric `sum_i (sum_{k<=i} (x_k - y_k))^2`.
pub fn metric_sq(x: &EnergyState, y: &EnergyState) -> Result<f64> {
    same_simplex(x, y)?;
    Ok(metric_sq_unchecked(x.energies(), y.energies()))
}

pub(crate) fn metric_sq_unchecked(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let mut diff = 0.0;
    let mut acc = 0.0;
    for k in 0..n - 1 {
        diff += x[k] - y[k];
        acc += diff * diff;
    }
    acc
}

pub fn metric(x: &EnergyState, y: &EnergyState) -> Result<f64> {
    metric_sq(x, y).map(f64::sqrt)
}

/// Upper bound `epsilon * N * sqrt(N - 1)` on the metric diameter of a simplex.
pub fn diameter_bound(epsilon: f64, n_sites: usize) -> f64 {
    epsilon * n_sites as f64 * ((n_sites - 1) as f64).sqrt()
}
