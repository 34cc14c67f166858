//! Experiment harness: coupled-convergence measurements, exponential-rate
//! fitting, equilibrium checks, replica orchestration, and CSV/JSON
//! persistence.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{KcmError, Result};
use crate::family::{UpdateFamily, Vec2};
use crate::harris::{
    evolve, evolve_coupled, sample_bernoulli_config, sample_clock_log, Boundary, Geometry,
    SpinConfig,
};
use crate::rng::{self, Purpose};
use crate::stats;

fn default_length() -> i64 {
    64
}

fn default_replicas() -> u64 {
    1000
}

fn default_boundary() -> Boundary {
    Boundary::Torus
}

/// Configuration of a measurement run. The coupled pair evolves one copy
/// started from Bernoulli(`q_prime` zeros) and one from Bernoulli(`q`
/// zeros) under shared rate-`q` clocks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Path to the update family JSON (ignored when the family is passed
    /// directly).
    #[serde(default)]
    pub family_file: Option<String>,
    #[serde(default = "default_length")]
    pub length: i64,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
    pub q: f64,
    pub q_prime: f64,
    pub horizon: f64,
    /// Observation site (defaults to the origin).
    #[serde(default)]
    pub site: [i64; 2],
    /// Optional list of observation sites; when present the disagreement
    /// counts are pooled over all of them (variance reduction on a torus,
    /// where every site is statistically equivalent).
    #[serde(default)]
    pub sites: Option<Vec<[i64; 2]>>,
    /// Observation times.
    pub times: Vec<f64>,
    #[serde(default = "default_replicas")]
    pub replicas: u64,
    #[serde(default)]
    pub seed: u64,
    /// Draw both initial configurations from one stream, making them equal
    /// whenever q = q_prime. Default samples them independently.
    #[serde(default)]
    pub shared_init_stream: bool,
    #[serde(default)]
    pub output: Option<String>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.q) {
            return Err(KcmError::InvalidRate(self.q));
        }
        if !(0.0..=1.0).contains(&self.q_prime) {
            return Err(KcmError::InvalidRate(self.q_prime));
        }
        if self.horizon <= 0.0 {
            return Err(KcmError::InvalidConfig(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if self.replicas == 0 {
            return Err(KcmError::InvalidConfig("need at least one replica".into()));
        }
        if self.times.is_empty() {
            return Err(KcmError::InvalidConfig("no observation times".into()));
        }
        if self
            .times
            .iter()
            .any(|&t| t < 0.0 || t > self.horizon)
        {
            return Err(KcmError::InvalidConfig(
                "observation times must lie in [0, horizon]".into(),
            ));
        }
        Ok(())
    }

    pub fn geometry(&self, family: &UpdateFamily) -> Geometry {
        if family.dimension() == 1 {
            Geometry {
                dimension: 1,
                lo: Vec2::new(0, 0),
                hi: Vec2::new(self.length - 1, 0),
                boundary: self.boundary,
            }
        } else {
            Geometry {
                dimension: 2,
                lo: Vec2::new(0, 0),
                hi: Vec2::new(self.length - 1, self.length - 1),
                boundary: self.boundary,
            }
        }
    }

    pub fn observation_site(&self) -> Vec2 {
        Vec2::new(self.site[0], self.site[1])
    }

    pub fn observation_sites(&self) -> Vec<Vec2> {
        match &self.sites {
            Some(list) if !list.is_empty() => {
                list.iter().map(|s| Vec2::new(s[0], s[1])).collect()
            }
            _ => vec![self.observation_site()],
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: ExperimentConfig = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }
}

/// One point of an estimated time series.
#[derive(Debug, Clone, Serialize)]
pub struct SeriesPoint {
    pub t: f64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_replicas: u64,
}

/// Runs `count` independent replicas with derived seeds and returns the
/// per-replica results in replica order (deterministic regardless of
/// scheduling).
pub fn run_replicas<T, F>(count: u64, master_seed: u64, task: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, u64) -> T + Sync,
{
    (0..count)
        .into_par_iter()
        .map(|rep| task(rep, rng::replica_seed(master_seed, rep)))
        .collect()
}

fn sample_initials(
    config: &ExperimentConfig,
    geometry: &Geometry,
    replica: u64,
) -> (SpinConfig, SpinConfig) {
    let purpose_b = if config.shared_init_stream {
        Purpose::InitialConfigA
    } else {
        Purpose::InitialConfigB
    };
    let a = sample_bernoulli_config(geometry, config.q_prime, config.seed, replica, Purpose::InitialConfigA)
        .expect("validated rate");
    let b = sample_bernoulli_config(geometry, config.q, config.seed, replica, purpose_b)
        .expect("validated rate");
    (a, b)
}

/// Empirical disagreement probability at the observation site for each
/// observation time, with Wilson 95% intervals.
pub fn run_disagreement_experiment(
    family: &UpdateFamily,
    config: &ExperimentConfig,
) -> Result<Vec<SeriesPoint>> {
    config.validate()?;
    let geometry = config.geometry(family);
    let mut site_indices = Vec::new();
    for site in config.observation_sites() {
        match geometry.resolve(site) {
            crate::harris::Resolved::Index(i) => site_indices.push(i),
            crate::harris::Resolved::Frozen(_) => return Err(KcmError::OutOfGeometry(site)),
        }
    }
    let times = config.times.clone();
    let per_replica: Vec<Vec<u64>> = run_replicas(config.replicas, config.seed, |rep, _| {
        let (ia, ib) = sample_initials(config, &geometry, rep);
        let log = sample_clock_log(geometry, config.q, config.horizon, config.seed, rep)
            .expect("validated parameters");
        let coupled = evolve_coupled(family, &geometry, &ia, &ib, log);
        times
            .iter()
            .map(|&t| {
                site_indices
                    .iter()
                    .filter(|&&i| {
                        coupled.a.value_at_index(i, t) != coupled.b.value_at_index(i, t)
                    })
                    .count() as u64
            })
            .collect()
    });
    let trials = config.replicas * site_indices.len() as u64;
    Ok(times
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let hits: u64 = per_replica.iter().map(|row| row[j]).sum();
            let (ci_low, ci_high) = stats::wilson_interval(hits, trials);
            SeriesPoint {
                t,
                estimate: hits as f64 / trials as f64,
                ci_low,
                ci_high,
                n_replicas: config.replicas,
            }
        })
        .collect())
}

/// Parameters of a fitted exponential `C e^{-c t}`.
#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    pub rate: f64,
    pub rate_ci_low: f64,
    pub rate_ci_high: f64,
    pub amplitude: f64,
    pub r_squared: f64,
    pub points_used: usize,
    pub zeros_dropped: usize,
}

/// Result of an exponential fit attempt.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum FitOutcome {
    Fit(DecayFit),
    /// More than half the window had zero estimates: the decay is below the
    /// measurement floor and a log fit would be meaningless.
    BelowFloor { zeros: usize, total: usize },
}

/// Least squares on (t, log estimate) over the positive points; zero
/// estimates are dropped and reported.
pub fn fit_exponential(series: &[(f64, f64)]) -> Result<FitOutcome> {
    let total = series.len();
    let positive: Vec<(f64, f64)> = series.iter().copied().filter(|&(_, p)| p > 0.0).collect();
    let zeros = total - positive.len();
    if zeros * 2 > total {
        return Ok(FitOutcome::BelowFloor { zeros, total });
    }
    if positive.len() < 3 {
        return Err(KcmError::TooFewPoints(positive.len()));
    }
    let xs: Vec<f64> = positive.iter().map(|&(t, _)| t).collect();
    let ys: Vec<f64> = positive.iter().map(|&(_, p)| p.ln()).collect();
    let (intercept, slope, se, r2) = stats::linear_fit(&xs, &ys);
    let tcrit = stats::t_crit_975(xs.len().saturating_sub(2));
    Ok(FitOutcome::Fit(DecayFit {
        rate: -slope,
        rate_ci_low: -slope - tcrit * se,
        rate_ci_high: -slope + tcrit * se,
        amplitude: intercept.exp(),
        r_squared: r2,
        points_used: xs.len(),
        zeros_dropped: zeros,
    }))
}

/// A local function given by its support and a truth table indexed by the
/// bitmask of one-values over the support (bit i = value at `sites[i]`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalFunction {
    pub sites: Vec<[i64; 2]>,
    pub table: Vec<f64>,
}

impl LocalFunction {
    pub fn validate(&self) -> Result<()> {
        if self.sites.len() > 16 {
            return Err(KcmError::StateSpaceTooLarge {
                sites: self.sites.len(),
            });
        }
        if self.table.len() != 1 << self.sites.len() {
            return Err(KcmError::InvalidConfig(format!(
                "truth table needs {} entries, got {}",
                1usize << self.sites.len(),
                self.table.len()
            )));
        }
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let f: LocalFunction = serde_json::from_str(&text)?;
        f.validate()?;
        Ok(f)
    }

    fn eval(&self, geometry: &Geometry, traj_value: impl Fn(Vec2) -> u8) -> f64 {
        let _ = geometry;
        let mut mask = 0usize;
        for (i, s) in self.sites.iter().enumerate() {
            if traj_value(Vec2::new(s[0], s[1])) == 1 {
                mask |= 1 << i;
            }
        }
        self.table[mask]
    }

    /// Expectation under the product measure with P(site = 1) = 1 - q.
    pub fn equilibrium_mean(&self, q: f64) -> f64 {
        let n = self.sites.len();
        (0..(1usize << n))
            .map(|mask| {
                let ones = mask.count_ones() as i32;
                let weight = (1.0 - q).powi(ones) * q.powi(n as i32 - ones);
                weight * self.table[mask]
            })
            .sum()
    }
}

/// One point of the observable-vs-equilibrium series.
#[derive(Debug, Clone, Serialize)]
pub struct ObservablePoint {
    pub t: f64,
    pub estimate: f64,
    pub equilibrium: f64,
    pub abs_difference: f64,
    /// 1.96 standard errors of the estimate.
    pub half_width: f64,
    pub n_replicas: u64,
}

/// Estimates E f(η_t) starting from Bernoulli(q_prime zeros) under rate-q
/// dynamics and compares against the closed-form equilibrium mean.
pub fn run_theorem_experiment(
    family: &UpdateFamily,
    config: &ExperimentConfig,
    f: &LocalFunction,
) -> Result<Vec<ObservablePoint>> {
    config.validate()?;
    f.validate()?;
    let geometry = config.geometry(family);
    let times = config.times.clone();
    let per_replica: Vec<Vec<f64>> = run_replicas(config.replicas, config.seed, |rep, _| {
        let init =
            sample_bernoulli_config(&geometry, config.q_prime, config.seed, rep, Purpose::InitialConfigA)
                .expect("validated rate");
        let log = sample_clock_log(geometry, config.q, config.horizon, config.seed, rep)
            .expect("validated parameters");
        let traj = evolve(family, &geometry, &init, &log);
        times
            .iter()
            .map(|&t| {
                f.eval(&geometry, |s| match geometry.resolve(s) {
                    crate::harris::Resolved::Index(i) => traj.value_at_index(i, t),
                    crate::harris::Resolved::Frozen(v) => v,
                })
            })
            .collect()
    });
    let target = f.equilibrium_mean(config.q);
    let n = config.replicas as f64;
    Ok(times
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let values: Vec<f64> = per_replica.iter().map(|row| row[j]).collect();
            let mean = stats::mean(&values);
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / (n - 1.0).max(1.0);
            ObservablePoint {
                t,
                estimate: mean,
                equilibrium: target,
                abs_difference: (mean - target).abs(),
                half_width: 1.96 * (var / n).sqrt(),
                n_replicas: config.replicas,
            }
        })
        .collect())
}

/// One grid point of a stationarity check.
#[derive(Debug, Clone, Serialize)]
pub struct StationarityPoint {
    pub t: f64,
    pub zero_density: f64,
    pub standard_error: f64,
    pub pass: bool,
}

/// Report of a stationarity check: started from the equilibrium product
/// measure, the zero-density at the observation site must stay within 4
/// standard errors of q at every grid time.
#[derive(Debug, Clone, Serialize)]
pub struct StationarityReport {
    pub q: f64,
    pub points: Vec<StationarityPoint>,
    pub all_pass: bool,
}

pub fn run_stationarity_check(
    family: &UpdateFamily,
    config: &ExperimentConfig,
) -> Result<StationarityReport> {
    config.validate()?;
    let geometry = config.geometry(family);
    let site = config.observation_site();
    let site_idx = geometry.index_of(site)?;
    let times = config.times.clone();
    let per_replica: Vec<Vec<bool>> = run_replicas(config.replicas, config.seed, |rep, _| {
        let init =
            sample_bernoulli_config(&geometry, config.q, config.seed, rep, Purpose::InitialConfigA)
                .expect("validated rate");
        let log = sample_clock_log(geometry, config.q, config.horizon, config.seed, rep)
            .expect("validated parameters");
        let traj = evolve(family, &geometry, &init, &log);
        times
            .iter()
            .map(|&t| traj.value_at_index(site_idx, t) == 0)
            .collect()
    });
    let n = config.replicas as f64;
    let points: Vec<StationarityPoint> = times
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let hits = per_replica.iter().filter(|row| row[j]).count() as u64;
            let density = hits as f64 / n;
            // binomial standard error at the target rate
            let se = (config.q * (1.0 - config.q) / n).sqrt();
            let pass = if se == 0.0 {
                density == config.q
            } else {
                (density - config.q).abs() <= 4.0 * se
            };
            StationarityPoint {
                t,
                zero_density: density,
                standard_error: se,
                pass,
            }
        })
        .collect();
    let all_pass = points.iter().all(|p| p.pass);
    Ok(StationarityReport {
        q: config.q,
        points,
        all_pass,
    })
}

/// Writes a series as CSV with the fixed header.
pub fn write_series_csv<W: Write>(out: &mut W, series: &[SeriesPoint]) -> Result<()> {
    writeln!(out, "t,estimate,ci_low,ci_high,n_replicas")?;
    for p in series {
        writeln!(
            out,
            "{},{},{},{},{}",
            p.t, p.estimate, p.ci_low, p.ci_high, p.n_replicas
        )?;
    }
    Ok(())
}

pub fn series_csv_string(series: &[SeriesPoint]) -> String {
    let mut buf = Vec::new();
    write_series_csv(&mut buf, series).expect("writing to memory");
    String::from_utf8(buf).expect("ASCII output")
}
