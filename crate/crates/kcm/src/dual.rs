//! Backward dual paths over a clock log, disagreement-path construction for
//! coupled trajectories, activation events, codings of paths and the
//! reasonable-coding set, maximal jump counts, and the composition-count
//! identities used to bound codings.

use std::collections::HashSet;

use num_bigint::BigUint;
use serde_json::json;

use crate::error::{KcmError, Result};
use crate::family::Vec2;
use crate::harris::{ClockLog, CoupledTrajectory, Resolved, Trajectory};

/// A backward path started at `(start_site, start_time)`, of duration
/// `length` in backward time. `times` holds `s_0 = 0 < s_1 < … < s_n =
/// length`; `sites[k]` is the occupied site on `[s_k, s_{k+1})`, and the
/// path ends where it last jumped (`sites[n-1]` at `s_n`).
#[derive(Debug, Clone, PartialEq)]
pub struct DualPath {
    pub start_site: Vec2,
    pub start_time: f64,
    pub length: f64,
    pub times: Vec<f64>,
    pub sites: Vec<Vec2>,
}

impl DualPath {
    pub fn constant(x: Vec2, t: f64, length: f64) -> Self {
        DualPath {
            start_site: x,
            start_time: t,
            length,
            times: vec![0.0, length],
            sites: vec![x],
        }
    }

    /// Number of jumps (n - 1 segment boundaries interior to the path).
    pub fn jump_count(&self) -> usize {
        self.sites.len() - 1
    }

    /// Site occupied at backward time `s ∈ [0, length]` (right-continuous
    /// step function in backward time).
    pub fn site_at(&self, s: f64) -> Vec2 {
        if s >= self.length {
            return *self.sites.last().unwrap();
        }
        // segment k with s in [times[k], times[k+1])
        let k = match self.times.partition_point(|&v| v <= s) {
            0 => 0,
            p => p - 1,
        };
        self.sites[k.min(self.sites.len() - 1)]
    }

    /// JSON shape: list of [backward-time, site] pairs, last entry repeats
    /// the final site at s = length.
    pub fn to_json(&self) -> serde_json::Value {
        let mut entries: Vec<serde_json::Value> = self
            .sites
            .iter()
            .enumerate()
            .map(|(k, y)| json!([self.times[k], y]))
            .collect();
        entries.push(json!([self.length, self.sites.last().unwrap()]));
        json!({
            "start_site": self.start_site,
            "start_time": self.start_time,
            "length": self.length,
            "path": entries,
        })
    }
}

fn has_ring_at(log: &ClockLog, site: Vec2, time: f64) -> bool {
    match log.geometry.resolve(site) {
        Resolved::Index(i) => log.rings_at(i).iter().any(|r| r.time == time),
        Resolved::Frozen(_) => false,
    }
}

/// Checks the structural and jump conditions: monotone boundary times, jumps
/// only at clock rings of the occupied site, jump distance at most `rho`.
pub fn validate_dual_path(path: &DualPath, log: &ClockLog, rho: i64) -> bool {
    let t = path.start_time;
    if !(path.length >= 0.0 && path.length <= t && t <= log.horizon) {
        return false;
    }
    let n = path.sites.len();
    if n == 0 || path.times.len() != n + 1 {
        return false;
    }
    if path.times[0] != 0.0 || path.times[n] != path.length || path.sites[0] != path.start_site {
        return false;
    }
    for k in 0..n {
        let strict = path.times[k] < path.times[k + 1];
        let degenerate_ok = n == 1 && path.length == 0.0;
        if !strict && !degenerate_ok {
            return false;
        }
    }
    for k in 0..n.saturating_sub(1) {
        if path.sites[k + 1].sub(path.sites[k]).norm_inf() > rho {
            return false;
        }
        if !has_ring_at(log, path.sites[k], t - path.times[k + 1]) {
            return false;
        }
    }
    true
}

fn value_at(traj: &Trajectory, site: Vec2, time: f64) -> u8 {
    match traj.geometry.resolve(site) {
        Resolved::Index(i) => traj.value_at_index(i, time),
        Resolved::Frozen(v) => v,
    }
}

fn value_before(traj: &Trajectory, site: Vec2, time: f64) -> u8 {
    match traj.geometry.resolve(site) {
        Resolved::Index(i) => traj.value_before_index(i, time),
        Resolved::Frozen(v) => v,
    }
}

fn flip_times_at(traj: &Trajectory, site: Vec2) -> Vec<f64> {
    match traj.geometry.resolve(site) {
        Resolved::Index(i) => traj.flips_at(i).iter().map(|&(t, _)| t).collect(),
        Resolved::Frozen(_) => Vec::new(),
    }
}

/// Builds a dual path along which the two coupled processes disagree, or
/// returns `None` when they already agree at `(x, t)`. Walking backward at
/// the current site, the path stays until the update that created the
/// disagreement; at that ring exactly one process satisfied its constraint,
/// so some rule translate is all-zero in one process only, which supplies a
/// disagreeing site within range to jump to.
pub fn construct_disagreement_path(
    coupled: &CoupledTrajectory,
    family: &crate::family::UpdateFamily,
    x: Vec2,
    t: f64,
    t_prime: f64,
) -> Result<Option<DualPath>> {
    if !(0.0 <= t_prime && t_prime <= t && t <= coupled.log.horizon) {
        return Err(KcmError::TimeOutOfRange {
            t,
            horizon: coupled.log.horizon,
        });
    }
    let (a, b) = (&coupled.a, &coupled.b);
    if value_at(a, x, t) == value_at(b, x, t) {
        return Ok(None);
    }
    let floor_time = t - t_prime;
    let mut times = vec![0.0f64];
    let mut sites = vec![x];
    let mut cur = x;
    let mut cur_time = t; // original time; disagreement holds at (cur, cur_time)
    loop {
        // merged flip times at the current site, in (floor_time, cur_time],
        // descending
        let mut flips: Vec<f64> = flip_times_at(a, cur)
            .into_iter()
            .chain(flip_times_at(b, cur))
            .filter(|&u| u > floor_time && u <= cur_time)
            .collect();
        flips.sort_by(|p, q| q.partial_cmp(p).unwrap());
        flips.dedup();
        let mut birth: Option<f64> = None;
        for u in flips {
            if value_before(a, cur, u) == value_before(b, cur, u) {
                birth = Some(u);
                break;
            }
            // disagreement persists through u^-: keep scanning backward
        }
        let Some(u) = birth else {
            // disagreement holds at the current site back to floor_time
            break;
        };
        // at u^- the processes agree at cur, so the update at u was accepted
        // in exactly one process: find a rule all-zero in one only
        let mut jump_to: Option<Vec2> = None;
        for rule in family.rules() {
            let zero_a = rule.iter().all(|o| value_before(a, cur.add(*o), u) == 0);
            let zero_b = rule.iter().all(|o| value_before(b, cur.add(*o), u) == 0);
            if zero_a != zero_b {
                jump_to = rule
                    .iter()
                    .map(|o| cur.add(*o))
                    .find(|&z| value_before(a, z, u) != value_before(b, z, u));
                break;
            }
        }
        let Some(z) = jump_to else {
            return Err(KcmError::PathConstruction(format!(
                "no disagreeing site in any rule translate at site {:?}, time {}",
                cur, u
            )));
        };
        times.push(t - u);
        sites.push(z);
        cur = z;
        cur_time = u;
    }
    times.push(t_prime);
    Ok(Some(DualPath {
        start_site: x,
        start_time: t,
        length: t_prime,
        times,
        sites,
    }))
}

/// True iff both processes are at zero at some point of the path. Since
/// trajectories are piecewise constant, it suffices to check each segment at
/// its entry time, at every flip time of the occupied site inside the
/// segment, and just after the segment's far boundary.
pub fn is_activated(path: &DualPath, coupled: &CoupledTrajectory) -> bool {
    let t = path.start_time;
    let both_zero =
        |y: Vec2, u: f64| value_at(&coupled.a, y, u) == 0 && value_at(&coupled.b, y, u) == 0;
    let n = path.sites.len();
    for k in 0..n {
        let y = path.sites[k];
        // segment covers backward times [times[k], times[k+1]) (closed at
        // the far end for the last segment), i.e. original times in
        // (t - times[k+1], t - times[k]], plus t - length itself at the end
        let hi = t - path.times[k];
        let lo = t - path.times[k + 1];
        if both_zero(y, hi) {
            return true;
        }
        // value just after lo covers s just below times[k+1]
        if both_zero(y, lo) && (k + 1 < n || true) {
            // for interior segments this is the value at backward time
            // s -> times[k+1]^-, for the last segment it is s = length
            return true;
        }
        let mut candidates: Vec<f64> = flip_times_at(&coupled.a, y)
            .into_iter()
            .chain(flip_times_at(&coupled.b, y))
            .filter(|&u| u > lo && u < hi)
            .collect();
        candidates.sort_by(|p, q| p.partial_cmp(q).unwrap());
        candidates.dedup();
        if candidates.into_iter().any(|u| both_zero(y, u)) {
            return true;
        }
    }
    false
}

/// A coding: the path positions sampled every `K` units of backward time.
#[derive(Debug, Clone, PartialEq)]
pub struct Coding {
    pub sites: Vec<Vec2>,
    pub k_block: f64,
    pub t: f64,
}

/// Number of coding entries minus one: `⌊t/K²⌋`.
pub fn coding_top_index(t: f64, k_block: f64) -> usize {
    (t / (k_block * k_block)).floor() as usize
}

/// Samples the path at backward times `0, K, 2K, …, ⌊t/K²⌋·K`.
pub fn coding_of(path: &DualPath, k_block: f64) -> Result<Coding> {
    let t = path.start_time;
    let top = coding_top_index(t, k_block);
    let required = top as f64 * k_block;
    if path.length < required {
        return Err(KcmError::PathTooShort {
            len: path.length,
            required,
        });
    }
    let sites = (0..=top)
        .map(|k| path.site_at(k as f64 * k_block))
        .collect();
    Ok(Coding {
        sites,
        k_block,
        t,
    })
}

/// The activation event over a coding: some entry sits on a site where both
/// processes are at zero at the matching time.
pub fn event_g(coding: &Coding, coupled: &CoupledTrajectory) -> bool {
    coding.sites.iter().enumerate().any(|(k, &y)| {
        let u = coding.t - k as f64 * coding.k_block;
        value_at(&coupled.a, y, u) == 0 && value_at(&coupled.b, y, u) == 0
    })
}

fn leg_cost(step: Vec2, rho: i64) -> u64 {
    let d = step.norm_inf();
    ((d + rho - 1) / rho).max(0) as u64
}

/// Membership in the reasonable-coding set: the coding must be realizable by
/// a site chain from `x` of at most `N·t/K` steps of `ℓ∞`-size at most
/// `rho`. Equivalent to the minimal chain lengths of the legs summing to at
/// most `N·t/K` (chains concatenate; spare steps can repeat a site).
pub fn is_reasonable_coding(
    coding: &Coding,
    x: Vec2,
    t: f64,
    k_block: f64,
    n_param: f64,
    rho: i64,
) -> bool {
    if coding.sites.len() != coding_top_index(t, k_block) + 1 {
        return false;
    }
    if coding.sites[0] != x {
        return false;
    }
    let total: u64 = coding
        .sites
        .windows(2)
        .map(|w| leg_cost(w[1].sub(w[0]), rho))
        .sum();
    total as f64 <= n_param * t / k_block
}

const COUNT_GUARD: u64 = 100_000_000;

fn enumerate_legs(
    remaining_legs: usize,
    budget: u64,
    rho: i64,
    d: usize,
    count: &mut u64,
) -> Result<()> {
    if remaining_legs == 0 {
        *count += 1;
        if *count > COUNT_GUARD {
            return Err(KcmError::GuardExceeded { guard: COUNT_GUARD });
        }
        return Ok(());
    }
    let reach = budget as i64 * rho;
    let ys: Vec<i64> = if d == 2 { (-reach..=reach).collect() } else { vec![0] };
    for dx in -reach..=reach {
        for &dy in &ys {
            let step = Vec2::new(dx, dy);
            let c = leg_cost(step, rho);
            if c <= budget {
                enumerate_legs(remaining_legs - 1, budget - c, rho, d, count)?;
            }
        }
    }
    Ok(())
}

/// Exact size of the reasonable-coding set by exhaustive enumeration of the
/// leg displacements admitted by `is_reasonable_coding`. Guarded at 10^8.
pub fn count_reasonable_codings(
    t: f64,
    k_block: f64,
    n_param: f64,
    rho: i64,
    d: usize,
) -> Result<u64> {
    let legs = coding_top_index(t, k_block);
    let budget = (n_param * t / k_block).floor() as u64;
    let mut count = 0u64;
    enumerate_legs(legs, budget, rho, d, &mut count)?;
    Ok(count)
}

/// Independent brute-force enumerator: materializes every chain of
/// `⌊N·t/K⌋` steps and every admissible index split, collecting the distinct
/// codings. Exponential; only for small cross-check instances.
pub fn count_reasonable_codings_bruteforce(
    x: Vec2,
    t: f64,
    k_block: f64,
    n_param: f64,
    rho: i64,
    d: usize,
) -> Result<u64> {
    let legs = coding_top_index(t, k_block);
    let i_max = (n_param * t / k_block).floor() as usize;
    let mut steps = Vec::new();
    let ys: Vec<i64> = if d == 2 { (-rho..=rho).collect() } else { vec![0] };
    for dx in -rho..=rho {
        for &dy in &ys {
            steps.push(Vec2::new(dx, dy));
        }
    }
    let mut codings: HashSet<Vec<Vec2>> = HashSet::new();
    let mut chain = vec![x];
    let mut guard = 0u64;
    build_chains(
        &mut chain, i_max, &steps, legs, &mut codings, &mut guard,
    )?;
    Ok(codings.len() as u64)
}

fn build_chains(
    chain: &mut Vec<Vec2>,
    i_max: usize,
    steps: &[Vec2],
    legs: usize,
    codings: &mut HashSet<Vec<Vec2>>,
    guard: &mut u64,
) -> Result<()> {
    if chain.len() == i_max + 1 {
        let mut indices = vec![0usize; legs];
        collect_splits(chain, legs, 0, 0, &mut indices, codings, guard)?;
        return Ok(());
    }
    let last = *chain.last().unwrap();
    for s in steps {
        chain.push(last.add(*s));
        build_chains(chain, i_max, steps, legs, codings, guard)?;
        chain.pop();
    }
    Ok(())
}

fn collect_splits(
    chain: &[Vec2],
    legs: usize,
    depth: usize,
    position: usize,
    indices: &mut Vec<usize>,
    codings: &mut HashSet<Vec<Vec2>>,
    guard: &mut u64,
) -> Result<()> {
    *guard += 1;
    if *guard > COUNT_GUARD {
        return Err(KcmError::GuardExceeded { guard: COUNT_GUARD });
    }
    if depth == legs {
        let mut coding = Vec::with_capacity(legs + 1);
        coding.push(chain[0]);
        let mut pos = 0usize;
        for &j in indices.iter() {
            pos += j;
            coding.push(chain[pos]);
        }
        codings.insert(coding);
        return Ok(());
    }
    for j in 0..=(chain.len() - 1 - position) {
        indices[depth] = j;
        collect_splits(chain, legs, depth + 1, position + j, indices, codings, guard)?;
    }
    Ok(())
}

/// Maximum number of jumps over all dual paths of length `t_prime` started
/// at `(x, t)`, by dynamic programming backward over the time-sorted rings:
/// a ring at the occupied site lets the path jump anywhere within `rho`.
pub fn max_dual_jumps(log: &ClockLog, x: Vec2, t: f64, t_prime: f64, rho: i64) -> u64 {
    let geometry = &log.geometry;
    let start = match geometry.resolve(x) {
        Resolved::Index(i) => i,
        Resolved::Frozen(_) => return 0,
    };
    let lo = t - t_prime;
    let mut rings: Vec<(f64, usize)> = Vec::new();
    for i in 0..geometry.site_count() {
        for r in log.rings_at(i) {
            if r.time > lo && r.time < t {
                rings.push((r.time, i));
            }
        }
    }
    // latest ring first: paths consume rings in decreasing original time
    rings.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(b.1.cmp(&a.1)));
    let mut best: Vec<Option<u64>> = vec![None; geometry.site_count()];
    best[start] = Some(0);
    let mut overall = 0u64;
    for (_, z) in rings {
        let Some(j) = best[z] else { continue };
        let site = geometry.site_at(z);
        let reached = j + 1;
        if reached > overall {
            overall = reached;
        }
        for dx in -rho..=rho {
            for dy in -rho..=rho {
                if geometry.dimension == 1 && dy != 0 {
                    continue;
                }
                if let Resolved::Index(w) = geometry.resolve(site.add(Vec2::new(dx, dy))) {
                    if best[w].is_none_or(|b| b < reached) {
                        best[w] = Some(reached);
                    }
                }
            }
        }
    }
    overall
}

fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::from(0u32);
    }
    let mut result = BigUint::from(1u32);
    for i in 0..k.min(n - k) {
        result = result * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    result
}

/// Number of weak compositions of `total` into `parts` parts:
/// C(parts + total - 1, parts - 1).
pub fn compositions_count(parts: u64, total: u64) -> BigUint {
    assert!(parts >= 1, "compositions need at least one part");
    binomial(parts + total - 1, parts - 1)
}

/// The hockey-stick sum Σ_{j=0}^{J} C(I+j, I) = C(I+J+1, I+1).
pub fn hockey_stick(i: u64, j: u64) -> BigUint {
    binomial(i + j + 1, i + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::builtin::*;
    use crate::harris::{
        evolve_coupled, sample_bernoulli_config, sample_clock_log, Boundary, Geometry, SpinConfig,
    };
    use crate::rng::Purpose;

    fn empty_log(g: Geometry, horizon: f64) -> ClockLog {
        sample_clock_log(g, 0.5, 0.0, 0, 0)
            .map(|mut l| {
                l.horizon = horizon;
                l
            })
            .unwrap()
    }

    #[test]
    fn constant_path_validates() {
        let g = Geometry::line(8, Boundary::Torus);
        let log = empty_log(g, 10.0);
        let p = DualPath::constant(Vec2::new(3, 0), 8.0, 5.0);
        assert!(validate_dual_path(&p, &log, 1));
    }

    #[test]
    fn jump_at_non_ring_time_invalid() {
        let g = Geometry::line(8, Boundary::Torus);
        let log = empty_log(g, 10.0);
        let p = DualPath {
            start_site: Vec2::new(3, 0),
            start_time: 8.0,
            length: 5.0,
            times: vec![0.0, 2.0, 5.0],
            sites: vec![Vec2::new(3, 0), Vec2::new(4, 0)],
        };
        assert!(!validate_dual_path(&p, &log, 1));
    }

    #[test]
    fn jump_too_far_invalid() {
        let g = Geometry::line(32, Boundary::Torus);
        let log = sample_clock_log(g, 0.5, 10.0, 17, 0).unwrap();
        // locate a genuine ring at some site and jump rho+1 away
        let rho = 1i64;
        let mut found = None;
        for i in 0..g.site_count() {
            if let Some(r) = log.rings_at(i).iter().find(|r| r.time > 2.0 && r.time < 9.0) {
                found = Some((g.site_at(i), r.time));
                break;
            }
        }
        let (y, u) = found.expect("log should contain rings");
        let t = 9.0;
        let p = DualPath {
            start_site: y,
            start_time: t,
            length: t - 1.0,
            times: vec![0.0, t - u, t - 1.0],
            sites: vec![y, y.add(Vec2::new(rho + 1, 0))],
        };
        assert!(!validate_dual_path(&p, &log, rho));
        // same jump within range is fine
        let p2 = DualPath {
            sites: vec![y, y.add(Vec2::new(rho, 0))],
            ..p
        };
        assert!(validate_dual_path(&p2, &log, rho));
    }

    #[test]
    fn construct_none_when_agreeing() {
        let f = fa1f_1d();
        let g = Geometry::line(8, Boundary::Torus);
        let init = SpinConfig::constant(&g, 1);
        let log = sample_clock_log(g, 0.5, 5.0, 2, 0).unwrap();
        let c = evolve_coupled(&f, &g, &init, &init, log);
        let r = construct_disagreement_path(&c, &f, Vec2::new(0, 0), 5.0, 3.0).unwrap();
        assert!(r.is_none());
    }

    #[test]
    fn construct_constant_when_no_rings() {
        let f = fa1f_1d();
        let g = Geometry::line(8, Boundary::Torus);
        let a = SpinConfig::constant(&g, 0);
        let b = SpinConfig::constant(&g, 1);
        let log = empty_log(g, 6.0);
        let c = evolve_coupled(&f, &g, &a, &b, log);
        let x = Vec2::new(2, 0);
        let p = construct_disagreement_path(&c, &f, x, 6.0, 4.0)
            .unwrap()
            .expect("states disagree");
        assert_eq!(p.sites, vec![x]);
        assert!(validate_dual_path(&p, &c.log, 1));
        assert!(!is_activated(&p, &c));
    }

    #[test]
    fn constructed_paths_valid_never_activated() {
        let f = fa1f_1d();
        let g = Geometry::line(32, Boundary::Torus);
        let (t, t_prime) = (12.0, 6.0);
        let mut checked = 0;
        for seed in 0..200u64 {
            let ia = sample_bernoulli_config(&g, 0.3, seed, 0, Purpose::InitialConfigA).unwrap();
            let ib = sample_bernoulli_config(&g, 0.8, seed, 0, Purpose::InitialConfigB).unwrap();
            let log = sample_clock_log(g, 0.8, t, seed, 0).unwrap();
            let c = evolve_coupled(&f, &g, &ia, &ib, log);
            // condition on disagreement anywhere at time t
            for x in (0..g.site_count() as i64).map(|i| Vec2::new(i, 0)) {
                let Some(p) = construct_disagreement_path(&c, &f, x, t, t_prime).unwrap() else {
                    continue;
                };
                assert!(validate_dual_path(&p, &c.log, 1), "seed {seed}");
                assert!(!is_activated(&p, &c), "seed {seed}");
                // disagreement along the whole path at all event times
                for k in 0..p.sites.len() {
                    for &s in &[p.times[k], p.times[k + 1]] {
                        let y = p.site_at(s.min(p.length));
                        let u = t - s;
                        assert_ne!(
                            value_at(&c.a, y, u),
                            value_at(&c.b, y, u),
                            "seed {seed} s {s}"
                        );
                    }
                }
                checked += 1;
            }
        }
        assert!(checked > 20, "too few disagreeing runs: {checked}");
    }

    #[test]
    fn activation_basic_cases() {
        let f = fa1f_1d();
        let g = Geometry::line(8, Boundary::Torus);
        let zero = SpinConfig::constant(&g, 0);
        let one = SpinConfig::constant(&g, 1);
        let log = empty_log(g, 6.0);
        let c0 = evolve_coupled(&f, &g, &zero, &zero, log.clone());
        let p = DualPath::constant(Vec2::new(1, 0), 6.0, 6.0);
        assert!(is_activated(&p, &c0));
        let c1 = evolve_coupled(&f, &g, &zero, &one, log);
        assert!(!is_activated(&p, &c1));
    }

    #[test]
    fn event_g_implies_activated() {
        let f = fa1f_1d();
        let g = Geometry::line(32, Boundary::Torus);
        let t = 16.0;
        let k_block = 2.0;
        for seed in 200..260u64 {
            let ia = sample_bernoulli_config(&g, 0.5, seed, 0, Purpose::InitialConfigA).unwrap();
            let ib = sample_bernoulli_config(&g, 0.5, seed, 0, Purpose::InitialConfigB).unwrap();
            let log = sample_clock_log(g, 0.6, t, seed, 0).unwrap();
            let c = evolve_coupled(&f, &g, &ia, &ib, log);
            if let Some(p) =
                construct_disagreement_path(&c, &f, Vec2::new(5, 0), t, t / k_block).unwrap()
            {
                let coding = coding_of(&p, k_block).unwrap();
                if event_g(&coding, &c) {
                    assert!(is_activated(&p, &c), "seed {seed}");
                }
            }
        }
    }

    #[test]
    fn coding_shapes() {
        let x = Vec2::new(2, 0);
        let p = DualPath::constant(x, 4.0, 2.0);
        let coding = coding_of(&p, 2.0).unwrap();
        assert_eq!(coding.sites, vec![x, x]); // length ⌊4/4⌋+1 = 2
        let p8 = DualPath::constant(x, 8.0, 4.0);
        assert_eq!(coding_of(&p8, 2.0).unwrap().sites.len(), 3);
        // too short a path errors
        let short = DualPath::constant(x, 8.0, 3.0);
        assert!(matches!(
            coding_of(&short, 2.0),
            Err(KcmError::PathTooShort { .. })
        ));
    }

    #[test]
    fn reasonable_coding_membership() {
        let x = Vec2::new(0, 0);
        let constant = Coding {
            sites: vec![x, x],
            k_block: 2.0,
            t: 4.0,
        };
        assert!(is_reasonable_coding(&constant, x, 4.0, 2.0, 0.5, 1));
        // a 5-step leg exceeds the N t / K = 2 step budget
        let far = Coding {
            sites: vec![x, Vec2::new(5, 0)],
            k_block: 2.0,
            t: 4.0,
        };
        assert!(!is_reasonable_coding(&far, x, 4.0, 2.0, 1.0, 1));
        // wrong starting site
        let off = Coding {
            sites: vec![Vec2::new(1, 0), x],
            k_block: 2.0,
            t: 4.0,
        };
        assert!(!is_reasonable_coding(&off, x, 4.0, 2.0, 1.0, 1));
    }

    #[test]
    fn counts_match_bruteforce() {
        let x = Vec2::new(0, 0);
        // t=4: codings (x,y), |y| <= 2 -> 5
        assert_eq!(count_reasonable_codings(4.0, 2.0, 1.0, 1, 1).unwrap(), 5);
        // t=8: codings (x,y,z) with |y| + |z-y| <= 4 -> 41
        assert_eq!(count_reasonable_codings(8.0, 2.0, 1.0, 1, 1).unwrap(), 41);
        for (t, k, n, rho, d) in [
            (4.0, 2.0, 1.0, 1i64, 1usize),
            (8.0, 2.0, 1.0, 1, 1),
            (4.0, 2.0, 1.0, 2, 1),
            (4.0, 2.0, 1.0, 1, 2),
            (3.0, 2.0, 0.0, 1, 1), // top index 0 -> single coding
        ] {
            let fast = count_reasonable_codings(t, k, n, rho, d).unwrap();
            let slow = count_reasonable_codings_bruteforce(x, t, k, n, rho, d).unwrap();
            assert_eq!(fast, slow, "t={t} k={k} n={n} rho={rho} d={d}");
        }
    }

    #[test]
    fn trivial_coding_count_one() {
        assert_eq!(count_reasonable_codings(3.0, 2.0, 1.0, 1, 1).unwrap(), 1);
    }

    #[test]
    fn max_jumps_empty_log() {
        let g = Geometry::line(8, Boundary::Torus);
        let log = empty_log(g, 10.0);
        assert_eq!(max_dual_jumps(&log, Vec2::new(0, 0), 8.0, 5.0, 1), 0);
    }

    #[test]
    fn max_jumps_single_ring() {
        use crate::harris::Ring;
        let g = Geometry::line(8, Boundary::Torus);
        let mut log = empty_log(g, 10.0);
        let _ = &mut log;
        // rebuild with one hand-placed ring at site 2, time 5
        let log = {
            let mut rings = vec![Vec::new(); g.site_count()];
            rings[2] = vec![Ring {
                time: 5.0,
                label: 0,
            }];
            ClockLog::from_parts(g, 10.0, 0.5, rings)
        };
        assert_eq!(max_dual_jumps(&log, Vec2::new(2, 0), 8.0, 5.0, 1), 1);
        // ring outside the window is unusable
        assert_eq!(max_dual_jumps(&log, Vec2::new(2, 0), 4.0, 2.0, 1), 0);
        // ring at another site out of reach
        assert_eq!(max_dual_jumps(&log, Vec2::new(6, 0), 8.0, 5.0, 1), 0);
    }

    #[test]
    fn max_jumps_bounds_constructed_paths() {
        let f = fa1f_1d();
        let g = Geometry::line(32, Boundary::Torus);
        let t = 12.0;
        for seed in 300..340u64 {
            let ia = sample_bernoulli_config(&g, 0.3, seed, 0, Purpose::InitialConfigA).unwrap();
            let ib = sample_bernoulli_config(&g, 0.8, seed, 0, Purpose::InitialConfigB).unwrap();
            let log = sample_clock_log(g, 0.7, t, seed, 0).unwrap();
            let c = evolve_coupled(&f, &g, &ia, &ib, log);
            if let Some(p) =
                construct_disagreement_path(&c, &f, Vec2::new(0, 0), t, 6.0).unwrap()
            {
                let bound = max_dual_jumps(&c.log, Vec2::new(0, 0), t, 6.0, 1);
                assert!(p.jump_count() as u64 <= bound, "seed {seed}");
            }
        }
    }

    #[test]
    fn composition_identities() {
        assert_eq!(compositions_count(1, 7), BigUint::from(1u32));
        assert_eq!(compositions_count(3, 2), BigUint::from(6u32));
        for i in 0..=12u64 {
            for j in 0..=12u64 {
                let lhs: BigUint = (0..=j).map(|jj| binomial(i + jj, i)).sum();
                assert_eq!(lhs, hockey_stick(i, j));
            }
        }
    }
}
