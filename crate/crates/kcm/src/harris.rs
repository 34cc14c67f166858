//! Harris graphical construction: labelled Poisson clock rings, trajectory
//! evolution under the kinetic constraint, shared-clock coupling, and exact
//! generator / detailed-balance checks on tiny systems.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{KcmError, Result};
use crate::family::{UpdateFamily, Vec2};
use crate::rng::{self, Purpose};

/// Boundary handling for the finite box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Rule offsets wrap around the box.
    Torus,
    /// Out-of-box sites read as constant 0 (always satisfying constraints).
    FrozenZero,
    /// Out-of-box sites read as constant 1.
    FrozenOne,
}

/// Finite box `[lo, hi]` of `Z^d` with a boundary mode. For dimension 1 the
/// second coordinate range is the single value 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Geometry {
    pub dimension: usize,
    pub lo: Vec2,
    pub hi: Vec2,
    pub boundary: Boundary,
}

/// What a rule offset resolves to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resolved {
    Index(usize),
    Frozen(u8),
}

impl Geometry {
    pub fn line(len: i64, boundary: Boundary) -> Self {
        Geometry {
            dimension: 1,
            lo: Vec2::new(0, 0),
            hi: Vec2::new(len - 1, 0),
            boundary,
        }
    }

    pub fn square(len: i64, boundary: Boundary) -> Self {
        Geometry {
            dimension: 2,
            lo: Vec2::new(0, 0),
            hi: Vec2::new(len - 1, len - 1),
            boundary,
        }
    }

    pub fn box_2d(lo: Vec2, hi: Vec2, boundary: Boundary) -> Self {
        Geometry {
            dimension: 2,
            lo,
            hi,
            boundary,
        }
    }

    pub fn side_x(&self) -> i64 {
        self.hi.x - self.lo.x + 1
    }

    pub fn side_y(&self) -> i64 {
        self.hi.y - self.lo.y + 1
    }

    pub fn site_count(&self) -> usize {
        (self.side_x() * self.side_y()) as usize
    }

    pub fn in_box(&self, s: Vec2) -> bool {
        s.x >= self.lo.x && s.x <= self.hi.x && s.y >= self.lo.y && s.y <= self.hi.y
    }

    /// Index of an in-box site (row-major).
    pub fn index_of(&self, s: Vec2) -> Result<usize> {
        if !self.in_box(s) {
            return Err(KcmError::OutOfGeometry(s));
        }
        Ok(((s.y - self.lo.y) * self.side_x() + (s.x - self.lo.x)) as usize)
    }

    pub fn site_at(&self, index: usize) -> Vec2 {
        let i = index as i64;
        Vec2::new(self.lo.x + i % self.side_x(), self.lo.y + i / self.side_x())
    }

    /// Resolves an arbitrary lattice point according to the boundary mode.
    pub fn resolve(&self, s: Vec2) -> Resolved {
        if self.in_box(s) {
            return Resolved::Index(self.index_of(s).unwrap());
        }
        match self.boundary {
            Boundary::Torus => {
                let w = Vec2::new(
                    (s.x - self.lo.x).rem_euclid(self.side_x()) + self.lo.x,
                    (s.y - self.lo.y).rem_euclid(self.side_y()) + self.lo.y,
                );
                Resolved::Index(self.index_of(w).unwrap())
            }
            Boundary::FrozenZero => Resolved::Frozen(0),
            Boundary::FrozenOne => Resolved::Frozen(1),
        }
    }
}

/// One clock ring: a time in (0, horizon] with a 0/1 label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ring {
    pub time: f64,
    pub label: u8,
}

/// Per-site time-sorted labelled clock rings: the shared randomness of the
/// Harris construction. Label-0 rings realize rate `q`, label-1 rings rate
/// `1-q`; the union per site is a rate-1 Poisson process.
#[derive(Debug, Clone)]
pub struct ClockLog {
    pub geometry: Geometry,
    pub horizon: f64,
    pub q: f64,
    rings: Vec<Vec<Ring>>,
}

impl ClockLog {
    /// Assembles a log from explicit per-site time-sorted rings.
    pub fn from_parts(geometry: Geometry, horizon: f64, q: f64, rings: Vec<Vec<Ring>>) -> Self {
        assert_eq!(rings.len(), geometry.site_count());
        ClockLog {
            geometry,
            horizon,
            q,
            rings,
        }
    }

    pub fn rings_at(&self, index: usize) -> &[Ring] {
        &self.rings[index]
    }

    pub fn total_rings(&self) -> usize {
        self.rings.iter().map(|r| r.len()).sum()
    }

    /// All rings in global (time, site index) order.
    pub fn global_order(&self) -> Vec<(f64, usize, u8)> {
        let mut all: Vec<(f64, usize, u8)> = Vec::with_capacity(self.total_rings());
        for (i, rs) in self.rings.iter().enumerate() {
            for r in rs {
                all.push((r.time, i, r.label));
            }
        }
        all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        all
    }

    /// Copy containing only rings with time in the half-open window
    /// `(from, to]`.
    pub fn censored(&self, from: f64, to: f64) -> ClockLog {
        ClockLog {
            geometry: self.geometry,
            horizon: self.horizon,
            q: self.q,
            rings: self
                .rings
                .iter()
                .map(|rs| {
                    rs.iter()
                        .filter(|r| r.time > from && r.time <= to)
                        .copied()
                        .collect()
                })
                .collect(),
        }
    }
}

/// Samples the labelled Poisson clock log: per site, rate-1 arrivals with
/// i.i.d. Bernoulli(q) 0-labels, each site on its own keyed stream.
pub fn sample_clock_log(
    geometry: Geometry,
    q: f64,
    horizon: f64,
    master_seed: u64,
    replica: u64,
) -> Result<ClockLog> {
    if !(0.0..=1.0).contains(&q) {
        return Err(KcmError::InvalidRate(q));
    }
    if horizon < 0.0 {
        return Err(KcmError::NegativeHorizon(horizon));
    }
    let n = geometry.site_count();
    let mut rings = Vec::with_capacity(n);
    for site in 0..n {
        let mut rng = rng::stream(master_seed, Purpose::ClockRings, &[replica, site as u64]);
        let mut t = 0.0f64;
        let mut site_rings = Vec::new();
        loop {
            let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            t += -u.ln();
            if t > horizon {
                break;
            }
            let label = if rng.gen_range(0.0..1.0) < q { 0 } else { 1 };
            site_rings.push(Ring { time: t, label });
        }
        rings.push(site_rings);
    }
    Ok(ClockLog {
        geometry,
        horizon,
        q,
        rings,
    })
}

/// A spin configuration over the box.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpinConfig {
    pub values: Vec<u8>,
}

impl SpinConfig {
    pub fn constant(geometry: &Geometry, v: u8) -> Self {
        SpinConfig {
            values: vec![v; geometry.site_count()],
        }
    }
}

/// I.i.d. Bernoulli configuration with `P(site = 0) = p0`.
pub fn sample_bernoulli_config(
    geometry: &Geometry,
    p0: f64,
    master_seed: u64,
    replica: u64,
    purpose: Purpose,
) -> Result<SpinConfig> {
    if !(0.0..=1.0).contains(&p0) {
        return Err(KcmError::InvalidProbability(p0));
    }
    let n = geometry.site_count();
    let mut values = Vec::with_capacity(n);
    for site in 0..n {
        let mut rng = rng::stream(master_seed, purpose, &[replica, site as u64]);
        let u: f64 = rng.gen_range(0.0..1.0);
        values.push(if u < p0 { 0 } else { 1 });
    }
    Ok(SpinConfig { values })
}

/// Deterministic trajectory of the KCM under a clock log: per-site sequence
/// of accepted value changes, queryable at any time up to the horizon with
/// the right-continuous convention.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub geometry: Geometry,
    pub horizon: f64,
    pub initial: SpinConfig,
    /// Per-site accepted flips (time, new value), time-sorted.
    flips: Vec<Vec<(f64, u8)>>,
}

impl Trajectory {
    pub fn flips_at(&self, index: usize) -> &[(f64, u8)] {
        &self.flips[index]
    }

    /// Value at (site index, time), right-continuous.
    pub fn value_at_index(&self, index: usize, t: f64) -> u8 {
        let fl = &self.flips[index];
        match fl.partition_point(|&(ft, _)| ft <= t) {
            0 => self.initial.values[index],
            k => fl[k - 1].1,
        }
    }

    /// Left limit at (site index, time).
    pub fn value_before_index(&self, index: usize, t: f64) -> u8 {
        let fl = &self.flips[index];
        match fl.partition_point(|&(ft, _)| ft < t) {
            0 => self.initial.values[index],
            k => fl[k - 1].1,
        }
    }

    pub fn final_config(&self) -> SpinConfig {
        let mut values = self.initial.values.clone();
        for (i, fl) in self.flips.iter().enumerate() {
            if let Some(&(_, v)) = fl.last() {
                values[i] = v;
            }
        }
        SpinConfig { values }
    }
}

/// Value of `eta_t(x)` with range checks (right-continuous convention).
pub fn state_at(traj: &Trajectory, x: Vec2, t: f64) -> Result<u8> {
    if t < 0.0 || t > traj.horizon {
        return Err(KcmError::TimeOutOfRange {
            t,
            horizon: traj.horizon,
        });
    }
    let idx = match traj.geometry.resolve(x) {
        Resolved::Index(i) => i,
        Resolved::Frozen(v) => return Ok(v),
    };
    Ok(traj.value_at_index(idx, t))
}

fn constraint_satisfied(
    family: &UpdateFamily,
    geometry: &Geometry,
    values: &[u8],
    site: Vec2,
) -> bool {
    family.rules().iter().any(|rule| {
        rule.iter().all(|x| match geometry.resolve(site.add(*x)) {
            Resolved::Index(i) => values[i] == 0,
            Resolved::Frozen(v) => v == 0,
        })
    })
}

/// Evolves any number of initial configurations under one shared clock log,
/// processing rings in global (time, site) order. At a label-e ring at
/// (x, t), the state updates to e iff some rule translate is fully at zero
/// at t^- in that copy.
pub fn evolve_many(
    family: &UpdateFamily,
    geometry: &Geometry,
    initials: &[SpinConfig],
    log: &ClockLog,
) -> Vec<Trajectory> {
    let n = geometry.site_count();
    let mut states: Vec<Vec<u8>> = initials.iter().map(|c| c.values.clone()).collect();
    let mut flips: Vec<Vec<Vec<(f64, u8)>>> = vec![vec![Vec::new(); n]; initials.len()];
    for (t, site_idx, label) in log.global_order() {
        let site = geometry.site_at(site_idx);
        for (copy, state) in states.iter_mut().enumerate() {
            if constraint_satisfied(family, geometry, state, site) && state[site_idx] != label {
                state[site_idx] = label;
                flips[copy][site_idx].push((t, label));
            }
        }
    }
    initials
        .iter()
        .zip(flips)
        .map(|(init, fl)| Trajectory {
            geometry: *geometry,
            horizon: log.horizon,
            initial: init.clone(),
            flips: fl,
        })
        .collect()
}

pub fn evolve(
    family: &UpdateFamily,
    geometry: &Geometry,
    initial: &SpinConfig,
    log: &ClockLog,
) -> Trajectory {
    evolve_many(family, geometry, std::slice::from_ref(initial), log)
        .pop()
        .unwrap()
}

/// Two trajectories driven by the same clock rings from different initial
/// configurations.
#[derive(Debug, Clone)]
pub struct CoupledTrajectory {
    pub log: ClockLog,
    pub a: Trajectory,
    pub b: Trajectory,
}

pub fn evolve_coupled(
    family: &UpdateFamily,
    geometry: &Geometry,
    init_a: &SpinConfig,
    init_b: &SpinConfig,
    log: ClockLog,
) -> CoupledTrajectory {
    let mut trajs = evolve_many(family, geometry, &[init_a.clone(), init_b.clone()], &log);
    let b = trajs.pop().unwrap();
    let a = trajs.pop().unwrap();
    CoupledTrajectory { log, a, b }
}

/// Audit record for the exported ring ledger.
#[derive(Debug, Clone, Serialize)]
pub struct RingRecord {
    pub site: Vec2,
    pub time: f64,
    pub label: u8,
    pub accepted: bool,
}

/// Replays a trajectory's log and reports, ring by ring, whether the update
/// was accepted. Also serves as an independent legality check: every
/// recorded flip must coincide with an accepted ring.
pub fn audit_rings(family: &UpdateFamily, traj: &Trajectory, log: &ClockLog) -> Vec<RingRecord> {
    let geometry = &traj.geometry;
    let mut state = traj.initial.values.clone();
    let mut out = Vec::with_capacity(log.total_rings());
    for (t, site_idx, label) in log.global_order() {
        let site = geometry.site_at(site_idx);
        let accepted = constraint_satisfied(family, geometry, &state, site);
        if accepted {
            state[site_idx] = label;
        }
        out.push(RingRecord {
            site,
            time: t,
            label,
            accepted,
        });
    }
    out
}

/// Exact generator of the finite-volume dynamics as a dense rate matrix
/// over `{0,1}^box`, states indexed by bitmask (bit i = site i at one).
pub fn build_generator(
    family: &UpdateFamily,
    geometry: &Geometry,
    q: f64,
) -> Result<Vec<Vec<f64>>> {
    let n = geometry.site_count();
    if n > 16 {
        return Err(KcmError::StateSpaceTooLarge { sites: n });
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(KcmError::InvalidRate(q));
    }
    let size = 1usize << n;
    let mut matrix = vec![vec![0.0f64; size]; size];
    #[allow(clippy::needless_range_loop)]
    for eta in 0..size {
        let values: Vec<u8> = (0..n).map(|i| ((eta >> i) & 1) as u8).collect();
        for i in 0..n {
            let site = geometry.site_at(i);
            if !constraint_satisfied(family, geometry, &values, site) {
                continue;
            }
            let target = eta ^ (1 << i);
            // flipping to 0 happens at rate q, to 1 at rate 1-q
            let rate = if (eta >> i) & 1 == 1 { q } else { 1.0 - q };
            matrix[eta][target] += rate;
            matrix[eta][eta] -= rate;
        }
    }
    Ok(matrix)
}

/// Maximum detailed-balance violation of the generator with respect to the
/// product Bernoulli(1-q) measure (weight q^{#zeros} (1-q)^{#ones}).
pub fn check_detailed_balance(matrix: &[Vec<f64>], q: f64) -> f64 {
    let size = matrix.len();
    let n = size.trailing_zeros() as usize;
    let weight = |eta: usize| -> f64 {
        let ones = (eta as u64).count_ones() as i32;
        let zeros = n as i32 - ones;
        q.powi(zeros) * (1.0 - q).powi(ones)
    };
    let mut max = 0.0f64;
    #[allow(clippy::needless_range_loop)]
    for a in 0..size {
        for b in (a + 1)..size {
            let v = (weight(a) * matrix[a][b] - weight(b) * matrix[b][a]).abs();
            if v > max {
                max = v;
            }
        }
    }
    max
}
