//! Auxiliary oriented percolation over a clock log: bond construction from
//! a spread certificate, the occupation recurrence with death time and
//! survivor set, the rate threshold q_K, transfer-of-zeroes verification,
//! and Monte Carlo estimators for bond-closure and extinction
//! probabilities.

use rayon::prelude::*;
use serde::Serialize;

use crate::bootstrap::SpreadCertificate;
use crate::dual::Coding;
use crate::error::{KcmError, Result};
use crate::family::Vec2;
use crate::harris::{sample_clock_log, Boundary, ClockLog, Geometry, Resolved, Trajectory};

/// Parameters shared by the auxiliary-process operations.
#[derive(Debug, Clone)]
pub struct AuxParams {
    pub certificate: SpreadCertificate,
    /// Time block K.
    pub k_block: f64,
    /// Total time t; lattices run over intervals partitioning (t - ⌊t/K⌋K, t].
    pub t: f64,
    pub q: f64,
    pub q_prime: f64,
}

impl AuxParams {
    pub fn new(certificate: SpreadCertificate, k_block: f64, t: f64, q: f64, q_prime: f64) -> Result<Self> {
        if k_block <= 0.0 {
            return Err(KcmError::InvalidConfig(format!(
                "time block must be positive, got {k_block}"
            )));
        }
        if t < k_block {
            return Err(KcmError::InvalidConfig(format!(
                "total time {t} must be at least the time block {k_block}"
            )));
        }
        if !(0.0..=1.0).contains(&q) {
            return Err(KcmError::InvalidRate(q));
        }
        if !(0.0..=1.0).contains(&q_prime) {
            return Err(KcmError::InvalidRate(q_prime));
        }
        Ok(AuxParams {
            certificate,
            k_block,
            t,
            q,
            q_prime,
        })
    }

    /// ⌊t/K⌋.
    pub fn levels(&self) -> usize {
        (self.t / self.k_block).floor() as usize
    }

    /// Depth n^{y,k} = ⌊t/K⌋ - k of the lattice anchored at level k.
    pub fn depth(&self, k: usize) -> usize {
        self.levels() - k
    }

    /// The time t - ⌊t/K⌋K at which transfer preconditions are read.
    pub fn base_time(&self) -> f64 {
        self.t - self.levels() as f64 * self.k_block
    }
}

/// The rate threshold q_K = 1 + ln(1 - e^{-K}) / (3 K |R|).
pub fn q_threshold(k_block: f64, rectangle_size: usize) -> f64 {
    1.0 + (1.0 - (-k_block).exp()).ln() / (3.0 * k_block * rectangle_size as f64)
}

/// Bond states of one anchored lattice. Level n holds n+1 slots indexed by
/// j = (r+n)/2 for r ∈ {-n, -n+2, …, n}; each slot stores the pair of bonds
/// into (r, n): `.0` from (r-1, n-1) (rectangle holds its zeroes), `.1` from
/// (r+1, n-1) (zeroes advance one offset, needing the sequence rings).
#[derive(Debug, Clone)]
pub struct OPLattice {
    pub anchor: Vec2,
    pub level: usize,
    pub depth: usize,
    pub bonds: Vec<Vec<(bool, bool)>>,
}

/// Outcome of running the occupation recurrence.
#[derive(Debug, Clone)]
pub struct ZetaRun {
    /// occupation[n][j] for level n, j = (r+n)/2.
    pub occupation: Vec<Vec<u8>>,
    /// First level with all-zero occupation; `None` means survival to the
    /// final level.
    pub tau: Option<usize>,
    /// Survivor set: r in [-⌊depth/2⌋, ⌊depth/2⌋] occupied at the final level.
    pub survivors: Vec<i64>,
}

fn resolve_or_err(geometry: &Geometry, site: Vec2) -> Result<usize> {
    match geometry.resolve(site) {
        Resolved::Index(i) => Ok(i),
        Resolved::Frozen(_) => Err(KcmError::OutOfGeometry(site)),
    }
}

fn no_one_ring(log: &ClockLog, sites: &[Vec2], lo: f64, hi: f64) -> Result<bool> {
    for &s in sites {
        let i = resolve_or_err(&log.geometry, s)?;
        if log
            .rings_at(i)
            .iter()
            .any(|r| r.label == 1 && r.time > lo && r.time <= hi)
        {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Greedy earliest-match test for 0-rings at `sites` in order at strictly
/// increasing times within `(lo, hi]`.
fn successive_zero_rings(log: &ClockLog, sites: &[Vec2], lo: f64, hi: f64) -> Result<bool> {
    let mut cursor = lo;
    for &s in sites {
        let i = resolve_or_err(&log.geometry, s)?;
        match log
            .rings_at(i)
            .iter()
            .find(|r| r.label == 0 && r.time > cursor && r.time <= hi)
        {
            Some(r) => cursor = r.time,
            None => return Ok(false),
        }
    }
    Ok(true)
}

fn shifted(base: Vec2, offset: Vec2, multiplier: i64, sites: &[Vec2]) -> Vec<Vec2> {
    sites
        .iter()
        .map(|&s| base.add(offset.scale(multiplier)).add(s))
        .collect()
}

/// Evaluates the pair of bonds into (r, n) for the lattice anchored at
/// (y, k): rectangle offset multiplier (r-n)/2, ring window
/// (t-(k+n)K, t-(k+n-1)K].
pub fn bond_pair(
    log: &ClockLog,
    params: &AuxParams,
    y: Vec2,
    k: usize,
    r: i64,
    n: usize,
) -> Result<(bool, bool)> {
    let cert = &params.certificate;
    let m = (r - n as i64) / 2;
    let rect = shifted(y, cert.a1_offset, m, &cert.rectangle);
    let seq = shifted(y, cert.a1_offset, m, &cert.sequence);
    let hi = params.t - (k + n - 1) as f64 * params.k_block;
    let lo = hi - params.k_block;
    let vertical = no_one_ring(log, &rect, lo, hi)?;
    let diagonal = vertical
        && no_one_ring(log, &seq, lo, hi)?
        && successive_zero_rings(log, &seq, lo, hi)?;
    Ok((vertical, diagonal))
}

/// Builds every bond of the lattice anchored at `(y, k)`.
pub fn build_bonds(log: &ClockLog, params: &AuxParams, y: Vec2, k: usize) -> Result<OPLattice> {
    let depth = params.depth(k);
    let mut bonds = Vec::with_capacity(depth);
    for n in 1..=depth {
        let mut level = Vec::with_capacity(n + 1);
        for j in 0..=n {
            let r = 2 * j as i64 - n as i64;
            level.push(bond_pair(log, params, y, k, r, n)?);
        }
        bonds.push(level);
    }
    Ok(OPLattice {
        anchor: y,
        level: k,
        depth,
        bonds,
    })
}

/// Iterates the occupation recurrence from ζ_0(r) = 1{r=0}.
pub fn run_zeta(lattice: &OPLattice) -> ZetaRun {
    let mut occupation: Vec<Vec<u8>> = vec![vec![1u8]];
    let mut tau = None;
    for n in 1..=lattice.depth {
        let prev = &occupation[n - 1];
        let mut level = vec![0u8; n + 1];
        for (j, slot) in level.iter_mut().enumerate() {
            let (vertical, diagonal) = lattice.bonds[n - 1][j];
            let from_left = j >= 1 && prev[j - 1] == 1 && vertical;
            let from_right = j < n && prev[j] == 1 && diagonal;
            if from_left || from_right {
                *slot = 1;
            }
        }
        if tau.is_none() && level.iter().all(|&v| v == 0) {
            tau = Some(n);
        }
        occupation.push(level);
    }
    let half = (lattice.depth / 2) as i64;
    let survivors = occupation[lattice.depth]
        .iter()
        .enumerate()
        .filter(|&(_, &v)| v == 1)
        .map(|(j, _)| 2 * j as i64 - lattice.depth as i64)
        .filter(|r| r.abs() <= half)
        .collect();
    ZetaRun {
        occupation,
        tau,
        survivors,
    }
}

fn trajectory_value(traj: &Trajectory, site: Vec2, time: f64) -> u8 {
    match traj.geometry.resolve(site) {
        Resolved::Index(i) => traj.value_at_index(i, time),
        Resolved::Frozen(v) => v,
    }
}

fn rectangle_all_zero(traj: &Trajectory, sites: &[Vec2], time: f64) -> bool {
    sites.iter().all(|&s| trajectory_value(traj, s, time) == 0)
}

/// Outcome of a transfer-of-zeroes check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransferOutcome {
    Holds,
    Violated,
    /// One of the preconditions (occupied survivor, base rectangle at zero)
    /// failed, so the implication says nothing.
    NotApplicable,
}

/// Checks the transfer of zeroes: if ζ_{depth}(r0) = 1 and the rectangle at
/// offset (r0-depth)/2 is all-zero at the base time, then y+R must be
/// all-zero at time t - kK.
pub fn check_transfer(
    traj: &Trajectory,
    log: &ClockLog,
    params: &AuxParams,
    y: Vec2,
    k: usize,
    r0: i64,
) -> Result<TransferOutcome> {
    let depth = params.depth(k);
    if (r0 + depth as i64) % 2 != 0 || r0.abs() > depth as i64 {
        return Ok(TransferOutcome::NotApplicable);
    }
    let lattice = build_bonds(log, params, y, k)?;
    let run = run_zeta(&lattice);
    let j = ((r0 + depth as i64) / 2) as usize;
    if run.occupation[depth][j] != 1 {
        return Ok(TransferOutcome::NotApplicable);
    }
    let cert = &params.certificate;
    let m = (r0 - depth as i64) / 2;
    let base_rect = shifted(y, cert.a1_offset, m, &cert.rectangle);
    if !rectangle_all_zero(traj, &base_rect, params.base_time()) {
        return Ok(TransferOutcome::NotApplicable);
    }
    let target = shifted(y, cert.a1_offset, 0, &cert.rectangle);
    let time = params.t - k as f64 * params.k_block;
    Ok(if rectangle_all_zero(traj, &target, time) {
        TransferOutcome::Holds
    } else {
        TransferOutcome::Violated
    })
}

/// The rectangle-all-zero event at the base time for survivor slot `r` of
/// the lattice anchored at `(y, k)`.
pub fn event_w(traj: &Trajectory, params: &AuxParams, y: Vec2, k: usize, r: i64) -> Result<bool> {
    let depth = params.depth(k);
    if r.abs() > (depth / 2) as i64 {
        return Err(KcmError::InvalidConfig(format!(
            "survivor slot {r} outside [-{0}, {0}]",
            depth / 2
        )));
    }
    let cert = &params.certificate;
    let m = (r - depth as i64) / 2;
    let rect = shifted(y, cert.a1_offset, m, &cert.rectangle);
    Ok(rectangle_all_zero(traj, &rect, params.base_time()))
}

/// Smallest k whose lattice anchored at the coding's k-th site survives to
/// its final level, with that site.
pub fn find_k_gamma(
    coding: &Coding,
    log: &ClockLog,
    params: &AuxParams,
) -> Result<Option<(usize, Vec2)>> {
    for (k, &y) in coding.sites.iter().enumerate() {
        let lattice = build_bonds(log, params, y, k)?;
        if run_zeta(&lattice).tau.is_none() {
            return Ok(Some((k, y)));
        }
    }
    Ok(None)
}

/// Minimal box (relative bounds) containing every rectangle and sequence
/// site touched by the lattice anchored at `(y, k)`.
pub fn required_box(params: &AuxParams, y: Vec2, k: usize) -> (Vec2, Vec2) {
    let cert = &params.certificate;
    let depth = params.depth(k) as i64;
    let mut lo = Vec2::new(i64::MAX, i64::MAX);
    let mut hi = Vec2::new(i64::MIN, i64::MIN);
    for m in -depth..=0 {
        for s in cert.rectangle.iter().chain(cert.sequence.iter()) {
            let p = y.add(cert.a1_offset.scale(m)).add(*s);
            lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
    }
    (lo, hi)
}

/// Geometry (frozen-zero boundary) sized for the lattice anchored at `(y, k)`.
pub fn required_geometry(params: &AuxParams, y: Vec2, k: usize, dimension: usize) -> Geometry {
    let (lo, hi) = required_box(params, y, k);
    Geometry {
        dimension,
        lo,
        hi,
        boundary: Boundary::FrozenZero,
    }
}

/// Verdict of an estimate against a reference bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Satisfied,
    Violated,
    /// The bound is ≥ 1 and says nothing.
    Vacuous,
}

/// A Monte Carlo estimate with its Wilson 95% interval and, when a
/// reference bound applies, the comparison verdict.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub hits: u64,
    pub replicas: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub bound: Option<f64>,
    pub verdict: Option<Verdict>,
}

fn report(hits: u64, replicas: u64, bound: Option<f64>) -> EstimateReport {
    let (ci_low, ci_high) = crate::stats::wilson_interval(hits, replicas);
    let verdict = bound.map(|b| {
        if b >= 1.0 {
            Verdict::Vacuous
        } else if ci_high <= b {
            Verdict::Satisfied
        } else {
            Verdict::Violated
        }
    });
    EstimateReport {
        hits,
        replicas,
        estimate: hits as f64 / replicas as f64,
        ci_low,
        ci_high,
        bound,
        verdict,
    }
}

fn count_hits<F: Fn(u64) -> bool + Sync>(replicas: u64, hit: F) -> u64 {
    (0..replicas)
        .into_par_iter()
        .filter(|&rep| hit(rep))
        .count() as u64
}

/// Monte Carlo probability that the advancing bond into (1,1) is closed,
/// reported against e^{-K/4}.
pub fn estimate_bond_closed_prob(
    params: &AuxParams,
    dimension: usize,
    replicas: u64,
    seed: u64,
) -> Result<EstimateReport> {
    // a single-level instance: t = K, k = 0, bond into (r, n) = (1, 1)
    let single = AuxParams {
        certificate: params.certificate.clone(),
        k_block: params.k_block,
        t: params.k_block,
        q: params.q,
        q_prime: params.q_prime,
    };
    let geometry = required_geometry(&single, Vec2::new(0, 0), 0, dimension);
    let hits = count_hits(replicas, |rep| {
        let log = sample_clock_log(geometry, single.q, single.k_block, seed, rep)
            .expect("valid sampling parameters");
        let (_, diagonal) = bond_pair(&log, &single, Vec2::new(0, 0), 0, 1, 1)
            .expect("geometry sized for the bond");
        !diagonal
    });
    Ok(report(hits, replicas, Some((-params.k_block / 4.0).exp())))
}

/// Monte Carlo estimate of P(n ≤ τ < ∞) for the lattice anchored at
/// (0, 0), reported against 2·3^{2n}·e^{-Kn/24}.
pub fn estimate_extinction_tail(
    params: &AuxParams,
    dimension: usize,
    n: usize,
    replicas: u64,
    seed: u64,
) -> Result<EstimateReport> {
    let geometry = required_geometry(params, Vec2::new(0, 0), 0, dimension);
    let hits = count_hits(replicas, |rep| {
        let log = sample_clock_log(geometry, params.q, params.t, seed, rep)
            .expect("valid sampling parameters");
        let lattice =
            build_bonds(&log, params, Vec2::new(0, 0), 0).expect("geometry sized for lattice");
        matches!(run_zeta(&lattice).tau, Some(tau) if tau >= n)
    });
    let bound = 2.0 * 3f64.powi(2 * n as i32) * (-params.k_block * n as f64 / 24.0).exp();
    Ok(report(hits, replicas, Some(bound)))
}

/// Monte Carlo estimate of P(τ = ∞ and |X| ≤ (α/2)·depth); no computable
/// bound, only the decay across depths is meaningful.
pub fn estimate_survival_small_x(
    params: &AuxParams,
    dimension: usize,
    alpha: f64,
    replicas: u64,
    seed: u64,
) -> Result<EstimateReport> {
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(KcmError::InvalidProbability(alpha));
    }
    let depth = params.depth(0);
    let geometry = required_geometry(params, Vec2::new(0, 0), 0, dimension);
    let hits = count_hits(replicas, |rep| {
        let log = sample_clock_log(geometry, params.q, params.t, seed, rep)
            .expect("valid sampling parameters");
        let lattice =
            build_bonds(&log, params, Vec2::new(0, 0), 0).expect("geometry sized for lattice");
        let run = run_zeta(&lattice);
        run.tau.is_none() && (run.survivors.len() as f64) <= alpha / 2.0 * depth as f64
    });
    Ok(report(hits, replicas, None))
}
