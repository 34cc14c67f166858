//! Deterministic bootstrap percolation closure and the constructive search
//! for local-spread certificates.
//!
//! A certificate is the data `(u, R, a1·u, x_1..x_m)`: starting from the
//! rectangle `R` fully infected, sequentially infecting `x_1, ..., x_m`
//! (each witnessed by a rule already fully infected) leaves `a1·u + R`
//! fully infected, using only sites of `R ∪ (a1u+R) ∪ (2a1u+R)`.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{KcmError, Result};
use crate::family::{dot, Classification, ExactDirection, UpdateFamily, Vec2};

/// Finite truncation of `Z^d`: an explicit site set with a bounding box.
#[derive(Debug, Clone)]
pub struct Region {
    sites: HashSet<Vec2>,
    lo: Vec2,
    hi: Vec2,
}

impl Region {
    pub fn from_box(lo: Vec2, hi: Vec2) -> Self {
        let mut sites = HashSet::new();
        for x in lo.x..=hi.x {
            for y in lo.y..=hi.y {
                sites.insert(Vec2::new(x, y));
            }
        }
        Region { sites, lo, hi }
    }

    pub fn from_sites<I: IntoIterator<Item = Vec2>>(iter: I) -> Self {
        let sites: HashSet<Vec2> = iter.into_iter().collect();
        let lo = Vec2::new(
            sites.iter().map(|s| s.x).min().unwrap_or(0),
            sites.iter().map(|s| s.y).min().unwrap_or(0),
        );
        let hi = Vec2::new(
            sites.iter().map(|s| s.x).max().unwrap_or(-1),
            sites.iter().map(|s| s.y).max().unwrap_or(-1),
        );
        Region { sites, lo, hi }
    }

    pub fn contains(&self, s: Vec2) -> bool {
        self.sites.contains(&s)
    }

    pub fn sites(&self) -> impl Iterator<Item = &Vec2> {
        self.sites.iter()
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn bounds(&self) -> (Vec2, Vec2) {
        (self.lo, self.hi)
    }
}

/// Infected set with per-site infection rounds (round 0 = initially
/// infected).
#[derive(Debug, Clone)]
pub struct InfectionState {
    pub region: Region,
    rounds: HashMap<Vec2, u32>,
    round: u32,
}

impl InfectionState {
    pub fn new<I: IntoIterator<Item = Vec2>>(region: Region, initial: I) -> Self {
        let rounds = initial
            .into_iter()
            .filter(|s| region.contains(*s))
            .map(|s| (s, 0))
            .collect();
        InfectionState {
            region,
            rounds,
            round: 0,
        }
    }

    pub fn is_infected(&self, s: Vec2) -> bool {
        self.rounds.contains_key(&s)
    }

    pub fn round_of(&self, s: Vec2) -> Option<u32> {
        self.rounds.get(&s).copied()
    }

    pub fn infected(&self) -> impl Iterator<Item = (&Vec2, &u32)> {
        self.rounds.iter()
    }

    pub fn infected_count(&self) -> usize {
        self.rounds.len()
    }
}

fn rule_satisfied(rule: &[Vec2], at: Vec2, infected: &HashMap<Vec2, u32>) -> bool {
    rule.iter().all(|x| infected.contains_key(&at.add(*x)))
}

/// One synchronous bootstrap round. Rule elements falling outside the
/// region are treated as not infected.
pub fn step(family: &UpdateFamily, state: &InfectionState) -> InfectionState {
    let mut next = state.clone();
    next.round = state.round + 1;
    for site in state.region.sites() {
        if state.is_infected(*site) {
            continue;
        }
        if family
            .rules()
            .iter()
            .any(|rule| rule_satisfied(rule, *site, &state.rounds))
        {
            next.rounds.insert(*site, next.round);
        }
    }
    next
}

/// Least fixed point of the bootstrap dynamics containing the initial set.
pub fn closure(family: &UpdateFamily, initial: &InfectionState) -> InfectionState {
    let mut cur = initial.clone();
    loop {
        let next = step(family, &cur);
        if next.infected_count() == cur.infected_count() {
            return cur;
        }
        cur = next;
    }
}

/// Local-spread certificate: replaying the infection sequence from `R`
/// infected yields `a1_offset + R` infected.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpreadCertificate {
    pub u: ExactDirection,
    /// The integer vector `a1·u`.
    pub a1_offset: Vec2,
    /// Width parameter along `u^perp` in dimension 2 (the integer `b` with
    /// `a2 = b / |u_normal|`); absent in dimension 1.
    pub a2: Option<i64>,
    pub rectangle: Vec<Vec2>,
    pub sequence: Vec<Vec2>,
}

impl SpreadCertificate {
    pub fn rectangle_size(&self) -> usize {
        self.rectangle.len()
    }
}

/// Search limits for the certificate search.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SearchBudget {
    pub max_a1: i64,
    pub max_a2: i64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            max_a1: 30,
            max_a2: 30,
        }
    }
}

/// Outcome of a certificate replay check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CertificateViolation {
    SequenceSiteOutsideStrip { index: usize, site: Vec2 },
    NoWitnessingRule { index: usize, site: Vec2 },
    TargetNotCovered { missing: Vec2 },
}

/// Replays the certificate and reports the first failure, if any.
pub fn validate_certificate_detailed(
    family: &UpdateFamily,
    cert: &SpreadCertificate,
) -> std::result::Result<(), CertificateViolation> {
    let strip: HashSet<Vec2> = cert
        .rectangle
        .iter()
        .flat_map(|s| {
            [
                s.add(cert.a1_offset),
                s.add(cert.a1_offset.scale(2)),
            ]
        })
        .collect();
    let mut infected: HashMap<Vec2, u32> =
        cert.rectangle.iter().map(|s| (*s, 0)).collect();
    for (i, x) in cert.sequence.iter().enumerate() {
        if !strip.contains(x) {
            return Err(CertificateViolation::SequenceSiteOutsideStrip { index: i, site: *x });
        }
        if !family
            .rules()
            .iter()
            .any(|rule| rule_satisfied(rule, *x, &infected))
        {
            return Err(CertificateViolation::NoWitnessingRule { index: i, site: *x });
        }
        infected.insert(*x, i as u32 + 1);
    }
    for s in &cert.rectangle {
        let target = s.add(cert.a1_offset);
        if !infected.contains_key(&target) {
            return Err(CertificateViolation::TargetNotCovered { missing: target });
        }
    }
    Ok(())
}

pub fn validate_certificate(family: &UpdateFamily, cert: &SpreadCertificate) -> bool {
    validate_certificate_detailed(family, cert).is_ok()
}

/// Tries one rectangle candidate: closure of `R` inside the three-rectangle
/// strip, accepted iff it covers `a1u + R`. The infection sequence is the
/// newly infected sites in (round, lexicographic) order, truncated once the
/// target rectangle is covered.
fn try_candidate(
    family: &UpdateFamily,
    u: ExactDirection,
    offset: Vec2,
    a2: Option<i64>,
    rectangle: &[Vec2],
) -> Option<SpreadCertificate> {
    let strip: Vec<Vec2> = rectangle
        .iter()
        .flat_map(|s| [*s, s.add(offset), s.add(offset.scale(2))])
        .collect();
    let region = Region::from_sites(strip);
    let initial = InfectionState::new(region, rectangle.iter().copied());
    let closed = closure(family, &initial);

    let target: HashSet<Vec2> = rectangle.iter().map(|s| s.add(offset)).collect();
    if !target.iter().all(|s| closed.is_infected(*s)) {
        return None;
    }

    let mut new_sites: Vec<(u32, Vec2)> = closed
        .infected()
        .filter(|(_, r)| **r > 0)
        .map(|(s, r)| (*r, *s))
        .collect();
    new_sites.sort();
    let mut sequence = Vec::new();
    let mut remaining = target.len();
    for (_, s) in new_sites {
        sequence.push(s);
        if target.contains(&s) {
            remaining -= 1;
            if remaining == 0 {
                break;
            }
        }
    }
    let cert = SpreadCertificate {
        u,
        a1_offset: offset,
        a2,
        rectangle: rectangle.to_vec(),
        sequence,
    };
    debug_assert!(validate_certificate(family, &cert));
    Some(cert)
}

fn rectangle_sites(p: Vec2, c: i64, b: i64) -> Vec<Vec2> {
    let pp = dot(p, p);
    let pperp = p.rot90();
    let m = (c * (pp as i64) + b).max(1);
    let mut sites = Vec::new();
    for x in -m..=m {
        for y in -m..=m {
            let z = Vec2::new(x, y);
            let along = dot(z, p);
            let across = dot(z, pperp);
            if along >= 0 && along < c as i128 * pp && across >= 0 && across <= b as i128 {
                sites.push(z);
            }
        }
    }
    sites.sort();
    sites
}

/// Interior rational directions of the witness semicircle, primary midpoint
/// first, then a mediant sweep towards each endpoint.
fn direction_sweep(
    midpoint: ExactDirection,
    semicircle: Option<(ExactDirection, ExactDirection)>,
) -> Vec<ExactDirection> {
    let mut dirs = vec![midpoint];
    if let Some((a, b)) = semicircle {
        let mut lo = a;
        let mut hi = b;
        for _ in 0..3 {
            let l = ExactDirection::new(lo.normal().add(midpoint.normal())).unwrap();
            let h = ExactDirection::new(midpoint.normal().add(hi.normal())).unwrap();
            if !dirs.contains(&l) {
                dirs.push(l);
            }
            if !dirs.contains(&h) {
                dirs.push(h);
            }
            lo = l;
            hi = h;
        }
    }
    dirs
}

/// Searches rectangle sizes up to the budget for a valid spread certificate.
pub fn find_spread_certificate(
    family: &UpdateFamily,
    budget: SearchBudget,
) -> Result<SpreadCertificate> {
    let class = family.classify()?;
    let (midpoint, semicircle) = match class {
        Classification::Supercritical {
            midpoint,
            semicircle,
        } => (midpoint, semicircle),
        _ => return Err(KcmError::NotSupercritical),
    };

    if family.dimension() == 1 {
        let e = midpoint.normal(); // (+-1, 0)
        for ell in 0..budget.max_a1 {
            let rectangle: Vec<Vec2> = (0..=ell).map(|i| e.scale(i)).collect();
            let offset = e.scale(ell + 1);
            if let Some(cert) = try_candidate(family, midpoint, offset, None, &rectangle) {
                return Ok(cert);
            }
        }
        return Err(KcmError::BudgetExhausted {
            max_a1: budget.max_a1,
            max_a2: budget.max_a2,
        });
    }

    for p_dir in direction_sweep(midpoint, semicircle) {
        let p = p_dir.normal();
        let pp = dot(p, p) as i64;
        // candidates ordered by a1 + a2 (scaled by |p|), then a1
        let mut candidates: Vec<(i64, i64, i64, i64)> = Vec::new();
        let mut c = 1;
        while c * pp <= budget.max_a1 {
            for b in 0..=budget.max_a2 {
                candidates.push((c * pp + b, c * pp, c, b));
            }
            c += 1;
        }
        candidates.sort();
        for (_, _, c, b) in candidates {
            let rectangle = rectangle_sites(p, c, b);
            let offset = p.scale(c);
            if let Some(cert) = try_candidate(family, p_dir, offset, Some(b), &rectangle) {
                return Ok(cert);
            }
        }
    }
    Err(KcmError::BudgetExhausted {
        max_a1: budget.max_a1,
        max_a2: budget.max_a2,
    })
}
