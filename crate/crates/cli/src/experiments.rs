use std::f64::consts::PI;
use std::fmt::Write as _;

use exchange_lattice_core::kernels::minorization_ratio;
use exchange_lattice_core::measures::{detailed_balance_residual, stationarity_test, MicrocanonicalSpec};
use exchange_lattice_core::spectral::{
    coupling_decay, eigenvalues_closed_form, eigenvalues_numeric, gap_scan, mean_d2_rate_bound, stationary_dim,
    ContractionMatrix, GapScanConfig,
};
use exchange_lattice_core::state_space::EnergyState;
use exchange_lattice_core::Result;
use serde_json::json;

use crate::config::{ExperimentSpec, Validated};

/// Detailed-balance residual regarded as exact.
const BALANCE_TOL: f64 = 1e-12;

/// One output file, held in memory until the run is complete.
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

fn csv_artifact(name: &str, v: &Validated, header: &str, body: &str) -> Artifact {
    let mut text = format!("# config_sha256={} seed={}\n{header}\n", v.hash, v.config.seed);
    text.push_str(body);
    Artifact { name: format!("{name}.csv"), bytes: text.into_bytes() }
}

fn json_artifact(name: &str, v: &Validated, mut value: serde_json::Value) -> Artifact {
    value["config_sha256"] = json!(v.hash);
    value["seed"] = json!(v.config.seed);
    let mut bytes = serde_json::to_vec_pretty(&value).expect("serializable report");
    bytes.push(b'\n');
    Artifact { name: format!("{name}.json"), bytes }
}

pub fn run(v: &Validated) -> Result<Vec<Artifact>> {
    let n = v.config.model.n_sites;
    let eps = v.config.model.epsilon;
    let seed = v.config.seed;
    let model = &v.model;
    let out = match &v.config.experiment {
        ExperimentSpec::Eigen {} => {
            let closed = eigenvalues_closed_form(n)?;
            let numeric = eigenvalues_numeric(&ContractionMatrix::for_sites(n)?);
            let mut body = String::new();
            for (i, (c, m)) in closed.iter().zip(&numeric).enumerate() {
                writeln!(body, "{},{c},{m},{}", i + 1, (c - m).abs() / c.abs()).unwrap();
            }
            vec![csv_artifact("eigen", v, "index,closed_form,numeric,rel_err", &body)]
        }
        ExperimentSpec::Contraction { horizon, replicas, n_points } => {
            let lambda = model.rate.constant_value().expect("validated");
            let sigma_sq = model.kernel.variance()?.value;
            let bound = mean_d2_rate_bound(lambda, sigma_sq, n)?;
            let horizon = horizon.unwrap_or(100f64.ln() / bound);
            let total = n as f64 * eps;
            let mut left = vec![0.0; n];
            left[0] = total;
            let mut right = vec![0.0; n];
            right[n - 1] = total;
            let (x0, y0) = (EnergyState::new(left)?, EnergyState::new(right)?);
            let c = coupling_decay(model, &x0, &y0, horizon, *n_points, *replicas, seed)?;
            let mut body = String::new();
            for ((t, m), se) in c.times.iter().zip(&c.mean_d2).zip(&c.stderr) {
                writeln!(body, "{t},{m},{se}").unwrap();
            }
            vec![
                csv_artifact("contraction", v, "time,mean_d2,stderr", &body),
                json_artifact(
                    "contraction_summary",
                    v,
                    json!({
                        "horizon": horizon,
                        "replicas": replicas,
                        "rate": c.rate,
                        "rate_stderr": c.rate_stderr,
                        "rate_bound": c.rate_bound,
                        "pass": c.rate >= c.rate_bound - 3.0 * c.rate_stderr,
                    }),
                ),
            ]
        }
        ExperimentSpec::GapScan {
            n_list,
            replicas,
            horizon_per_n2,
            n_points,
            rayleigh_samples,
            inner_alpha_draws,
            fourier_mode,
        } => {
            let cfg = GapScanConfig {
                epsilon: eps,
                horizon_per_n2: *horizon_per_n2,
                n_points: *n_points,
                n_replicas: *replicas,
                rayleigh_samples: *rayleigh_samples,
                inner_alpha_draws: *inner_alpha_draws,
                fourier_mode: *fourier_mode,
            };
            let scan = gap_scan(model, n_list, &cfg, seed)?;
            let mut table = Vec::new();
            scan.write_csv(&mut table).expect("in-memory write");
            let table = String::from_utf8(table).expect("ascii csv");
            let (header, body) = table.split_once('\n').expect("header line");
            vec![
                csv_artifact("gap_scan", v, header, body),
                json_artifact("gap_scan_summary", v, serde_json::to_value(&scan).expect("serializable")),
            ]
        }
        ExperimentSpec::Stationarity { horizon, replicas, dim_d } => {
            let dim = dim_d.or_else(|| stationary_dim(model)).expect("validated");
            let spec = MicrocanonicalSpec::new(dim, eps, n)?;
            let report = stationarity_test(model, &spec, *horizon, *replicas, seed)?;
            let mut value = serde_json::to_value(&report).expect("serializable");
            value["dim_d"] = json!(dim);
            vec![json_artifact("stationarity", v, value)]
        }
        ExperimentSpec::Reversibility { grid_size } => {
            let residual = detailed_balance_residual(&v.kernel, model.rate.lambda_r, *grid_size)?;
            vec![json_artifact(
                "reversibility",
                v,
                json!({
                    "test": "detailed_balance",
                    "n": (grid_size + 1) * (grid_size + 1),
                    "statistic": residual,
                    "threshold": BALANCE_TOL,
                    "pass": residual <= BALANCE_TOL,
                }),
            )]
        }
        ExperimentSpec::Minorization { grid_size } => {
            let min_ratio = minorization_ratio(&v.kernel, *grid_size)?;
            vec![json_artifact(
                "minorization",
                v,
                json!({
                    "grid_size": grid_size,
                    "min_ratio": min_ratio,
                    "reference": PI / 4.0,
                    "pass": min_ratio >= PI / 4.0 - 1e-9,
                }),
            )]
        }
    };
    Ok(out)
}
