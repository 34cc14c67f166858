//! Exact algebra of update families: range, stable directions, the stable
//! set as rational arcs on the circle, and the supercritical / critical /
//! subcritical classification.
//!
//! Directions are stored as reduced integer normals and all predicates are
//! decided with integer cross and dot products; there is no trigonometry in
//! this module.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{KcmError, Result};

/// A site of `Z^d` relative to the origin. For dimension 1 the `y`
/// coordinate is always zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "[i64; 2]", from = "[i64; 2]")]
pub struct Vec2 {
    pub x: i64,
    pub y: i64,
}

// value-semantics helpers are more convenient here than operator traits
#[allow(clippy::should_implement_trait)]
impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0, y: 0 };

    pub fn new(x: i64, y: i64) -> Self {
        Vec2 { x, y }
    }

    pub fn norm_inf(self) -> i64 {
        self.x.abs().max(self.y.abs())
    }

    pub fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }

    pub fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }

    pub fn scale(self, k: i64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }

    pub fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }

    /// Rotation by +90 degrees (counterclockwise).
    pub fn rot90(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    /// Rotation by -90 degrees (clockwise).
    pub fn rot270(self) -> Vec2 {
        Vec2::new(self.y, -self.x)
    }
}

impl From<[i64; 2]> for Vec2 {
    fn from(a: [i64; 2]) -> Self {
        Vec2::new(a[0], a[1])
    }
}

impl From<Vec2> for [i64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

pub fn dot(a: Vec2, b: Vec2) -> i128 {
    a.x as i128 * b.x as i128 + a.y as i128 * b.y as i128
}

pub fn cross(a: Vec2, b: Vec2) -> i128 {
    a.x as i128 * b.y as i128 - a.y as i128 * b.x as i128
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// A direction of `S^{d-1}` represented by a reduced nonzero integer normal.
/// Two normals represent the same direction iff they are equal after
/// reduction, so equality here is exact direction equality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExactDirection {
    normal: Vec2,
}

impl ExactDirection {
    pub fn new(normal: Vec2) -> Result<Self> {
        if normal == Vec2::ZERO {
            return Err(KcmError::ZeroDirection);
        }
        let g = gcd(normal.x, normal.y);
        Ok(ExactDirection {
            normal: Vec2::new(normal.x / g, normal.y / g),
        })
    }

    pub fn normal(&self) -> Vec2 {
        self.normal
    }

    pub fn antipode(&self) -> ExactDirection {
        ExactDirection {
            normal: self.normal.neg(),
        }
    }

    /// Positive-x axis sits at angle zero; angles increase counterclockwise.
    fn angle_half(&self) -> u8 {
        let v = self.normal;
        if v.y > 0 || (v.y == 0 && v.x > 0) {
            0
        } else {
            1
        }
    }

    /// Total order by angle in [0, 2pi), decided exactly.
    pub fn cmp_angle(&self, other: &ExactDirection) -> Ordering {
        match self.angle_half().cmp(&other.angle_half()) {
            Ordering::Equal => {
                let c = cross(self.normal, other.normal);
                if c > 0 {
                    Ordering::Less
                } else if c < 0 {
                    Ordering::Greater
                } else {
                    Ordering::Equal
                }
            }
            o => o,
        }
    }
}

/// Position class of `u` in the counterclockwise sweep starting at `origin`:
/// 0 at the origin direction, 1 strictly inside the first open half turn,
/// 2 at the antipode, 3 strictly inside the second open half turn.
fn sweep_class(origin: ExactDirection, u: ExactDirection) -> u8 {
    let c = cross(origin.normal, u.normal);
    if c > 0 {
        1
    } else if c < 0 {
        3
    } else if dot(origin.normal, u.normal) > 0 {
        0
    } else {
        2
    }
}

/// Compare `u` and `v` by counterclockwise angle measured from `origin`.
fn cmp_from(origin: ExactDirection, u: ExactDirection, v: ExactDirection) -> Ordering {
    let (cu, cv) = (sweep_class(origin, u), sweep_class(origin, v));
    match cu.cmp(&cv) {
        Ordering::Equal => {
            if cu == 0 || cu == 2 {
                Ordering::Equal
            } else {
                let c = cross(u.normal, v.normal);
                if c > 0 {
                    Ordering::Less
                } else if c < 0 {
                    Ordering::Greater
                } else {
                    Ordering::Equal
                }
            }
        }
        o => o,
    }
}

/// A closed circular arc from `start` to `end` going counterclockwise.
/// `start == end` denotes a single direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClosedArc {
    pub start: ExactDirection,
    pub end: ExactDirection,
}

impl ClosedArc {
    pub fn is_point(&self) -> bool {
        self.start == self.end
    }

    pub fn contains(&self, u: ExactDirection) -> bool {
        if self.is_point() {
            u == self.start
        } else {
            cmp_from(self.start, u, self.end) != Ordering::Greater
        }
    }

    /// Whether this arc is contained in the closed arc `[a, b]` (ccw).
    fn contained_in(&self, a: ExactDirection, b: ExactDirection) -> bool {
        // [s, e] lies in [a, b] iff, sweeping ccw from a, s comes no later
        // than e and e comes no later than b; a wrap of [s, e] past a flips
        // the first comparison and fails the test.
        cmp_from(a, self.start, self.end) != Ordering::Greater
            && cmp_from(a, self.end, b) != Ordering::Greater
    }
}

/// The set of stable directions of a two-dimensional family: a finite union
/// of pairwise disjoint closed arcs (possibly single points), the whole
/// circle, or empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArcSet {
    pub full_circle: bool,
    /// Disjoint arcs sorted by start angle; empty when `full_circle` or the
    /// set is empty.
    pub arcs: Vec<ClosedArc>,
}

impl ArcSet {
    pub fn is_empty(&self) -> bool {
        !self.full_circle && self.arcs.is_empty()
    }

    pub fn contains(&self, u: ExactDirection) -> bool {
        self.full_circle || self.arcs.iter().any(|a| a.contains(u))
    }

    /// True iff the whole set fits inside the closed semicircle that starts
    /// at `p` and ends at its antipode (ccw).
    fn fits_in_semicircle_from(&self, p: ExactDirection) -> bool {
        if self.full_circle {
            return false;
        }
        let b = p.antipode();
        self.arcs.iter().all(|a| a.contained_in(p, b))
    }
}

/// Universality classification of an update family.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Supercritical {
        /// Rational midpoint of a witness open semicircle disjoint from the
        /// stable set (d = 2), or the unstable direction itself (d = 1).
        midpoint: ExactDirection,
        /// Endpoints (ccw start, end) of the witness open semicircle; absent
        /// in dimension 1.
        semicircle: Option<(ExactDirection, ExactDirection)>,
    },
    Critical,
    Subcritical,
}

impl Classification {
    pub fn is_supercritical(&self) -> bool {
        matches!(self, Classification::Supercritical { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Classification::Supercritical { .. } => "Supercritical",
            Classification::Critical => "Critical",
            Classification::Subcritical => "Subcritical",
        }
    }
}

/// Serialized form of a family definition file.
#[derive(Debug, Serialize, Deserialize)]
struct FamilyFile {
    dimension: usize,
    rules: Vec<Vec<Vec<i64>>>,
}

/// An update family `U = {X_1, ..., X_m}`: a nonempty list of update rules,
/// each a nonempty finite set of nonzero lattice vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpdateFamily {
    dimension: usize,
    rules: Vec<Vec<Vec2>>,
    range: i64,
}

impl UpdateFamily {
    pub fn new(dimension: usize, rules: Vec<Vec<Vec2>>) -> Result<Self> {
        if dimension != 1 && dimension != 2 {
            return Err(KcmError::InvalidFamily(format!(
                "dimension must be 1 or 2, got {dimension}"
            )));
        }
        if rules.is_empty() {
            return Err(KcmError::InvalidFamily("no update rules".into()));
        }
        let mut clean = Vec::with_capacity(rules.len());
        for rule in rules {
            if rule.is_empty() {
                return Err(KcmError::InvalidFamily("empty update rule".into()));
            }
            let mut r = rule;
            r.sort();
            r.dedup();
            for v in &r {
                if *v == Vec2::ZERO {
                    return Err(KcmError::InvalidFamily("rule contains the origin".into()));
                }
                if dimension == 1 && v.y != 0 {
                    return Err(KcmError::InvalidFamily(
                        "dimension-1 rule element with nonzero second coordinate".into(),
                    ));
                }
            }
            clean.push(r);
        }
        let range = clean
            .iter()
            .flat_map(|r| r.iter())
            .map(|v| v.norm_inf())
            .max()
            .unwrap();
        Ok(UpdateFamily {
            dimension,
            rules: clean,
            range,
        })
    }

    /// Parse the JSON family definition format:
    /// `{"dimension": 2, "rules": [[[-1,0],[0,-1]], ...]}`.
    /// Dimension-1 rule elements may be written as `[-1]` or `[-1,0]`.
    pub fn from_json(text: &str) -> Result<Self> {
        let f: FamilyFile = serde_json::from_str(text)?;
        let mut rules = Vec::with_capacity(f.rules.len());
        for rule in f.rules {
            let mut r = Vec::with_capacity(rule.len());
            for el in rule {
                let v = match (f.dimension, el.len()) {
                    (1, 1) => Vec2::new(el[0], 0),
                    (1, 2) | (2, 2) => Vec2::new(el[0], el[1]),
                    _ => {
                        return Err(KcmError::InvalidFamily(format!(
                            "rule element {el:?} has wrong arity for dimension {}",
                            f.dimension
                        )))
                    }
                };
                r.push(v);
            }
            rules.push(r);
        }
        UpdateFamily::new(f.dimension, rules)
    }

    pub fn to_json(&self) -> String {
        let rules = self
            .rules
            .iter()
            .map(|r| {
                r.iter()
                    .map(|v| {
                        if self.dimension == 1 {
                            vec![v.x]
                        } else {
                            vec![v.x, v.y]
                        }
                    })
                    .collect()
            })
            .collect();
        serde_json::to_string_pretty(&FamilyFile {
            dimension: self.dimension,
            rules,
        })
        .expect("family serialization cannot fail")
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn rules(&self) -> &[Vec<Vec2>] {
        &self.rules
    }

    /// The range `rho`: maximum l-infinity norm over all rule elements.
    pub fn range(&self) -> i64 {
        self.range
    }

    /// `u` is stable iff no rule lies entirely in the open half-space
    /// `{x : <x,u> < 0}`. Scale-invariant in the integer normal.
    pub fn is_stable(&self, u: ExactDirection) -> bool {
        !self
            .rules
            .iter()
            .any(|rule| rule.iter().all(|x| dot(*x, u.normal()) < 0))
    }

    /// The stable set of a two-dimensional family, exactly.
    ///
    /// Candidate boundary directions are the perpendiculars of rule elements
    /// (the only places stability can change), padded with the eight
    /// semiaxis/diagonal directions so that consecutive candidates are less
    /// than a quarter turn apart; the stability of each candidate point and
    /// each open gap between consecutive candidates is then decided exactly,
    /// and stable stretches are merged into maximal closed arcs.
    pub fn stable_set_2d(&self) -> Result<ArcSet> {
        if self.dimension != 2 {
            return Err(KcmError::Dimension {
                expected: 2,
                got: self.dimension,
            });
        }
        let mut points: Vec<ExactDirection> = Vec::new();
        for rule in &self.rules {
            for x in rule {
                points.push(ExactDirection::new(x.rot90())?);
                points.push(ExactDirection::new(x.rot270())?);
            }
        }
        for v in [
            Vec2::new(1, 0),
            Vec2::new(1, 1),
            Vec2::new(0, 1),
            Vec2::new(-1, 1),
            Vec2::new(-1, 0),
            Vec2::new(-1, -1),
            Vec2::new(0, -1),
            Vec2::new(1, -1),
        ] {
            points.push(ExactDirection::new(v)?);
        }
        points.sort_by(|a, b| a.cmp_angle(b));
        points.dedup();
        let n = points.len();

        // items alternate point, gap, point, gap, ... cyclically
        let mut stable_item = Vec::with_capacity(2 * n);
        for i in 0..n {
            stable_item.push(self.is_stable(points[i]));
            let next = points[(i + 1) % n];
            // Consecutive candidates are less than a half turn apart, so the
            // normal sum is a nonzero interior direction of the gap.
            let witness = ExactDirection::new(points[i].normal().add(next.normal()))?;
            stable_item.push(self.is_stable(witness));
        }

        if stable_item.iter().all(|&s| s) {
            return Ok(ArcSet {
                full_circle: true,
                arcs: vec![],
            });
        }
        if stable_item.iter().all(|&s| !s) {
            return Ok(ArcSet {
                full_circle: false,
                arcs: vec![],
            });
        }

        // Start the cyclic walk just after an unstable item and collect
        // maximal stable runs. The stable set is closed, so every run starts
        // and ends on a point item.
        let m = 2 * n;
        let start = (0..m).find(|&i| !stable_item[i]).unwrap();
        let mut arcs = Vec::new();
        let mut i = (start + 1) % m;
        while i != start {
            if stable_item[i] {
                debug_assert!(i.is_multiple_of(2), "stable run must begin on a point item");
                let run_start = points[i / 2];
                let mut last_point = run_start;
                let mut j = i;
                while stable_item[j] {
                    if j.is_multiple_of(2) {
                        last_point = points[j / 2];
                    }
                    j = (j + 1) % m;
                    if j == start {
                        break;
                    }
                }
                debug_assert!(
                    ((j + m - 1) % m).is_multiple_of(2) || !stable_item[(j + m - 1) % m],
                    "stable run must end on a point item"
                );
                arcs.push(ClosedArc {
                    start: run_start,
                    end: last_point,
                });
                i = j;
                if i == start {
                    break;
                }
            } else {
                i = (i + 1) % m;
            }
        }
        arcs.sort_by(|a, b| a.start.cmp_angle(&b.start));
        Ok(ArcSet {
            full_circle: false,
            arcs,
        })
    }

    /// Universality classification.
    ///
    /// d = 1: the open hemisphere of `S^0` is a single direction, so the
    /// family is supercritical iff +1 or -1 is unstable and subcritical
    /// otherwise (no critical class in dimension 1).
    pub fn classify(&self) -> Result<Classification> {
        if self.dimension == 1 {
            let plus = ExactDirection::new(Vec2::new(1, 0))?;
            let minus = ExactDirection::new(Vec2::new(-1, 0))?;
            // Tie-break: prefer the +1 direction when both are unstable.
            for u in [plus, minus] {
                if !self.is_stable(u) {
                    return Ok(Classification::Supercritical {
                        midpoint: u,
                        semicircle: None,
                    });
                }
            }
            return Ok(Classification::Subcritical);
        }

        let s = self.stable_set_2d()?;
        if s.full_circle {
            return Ok(Classification::Subcritical);
        }

        // Supercritical: some open semicircle misses S, i.e. S fits in a
        // closed semicircle. If S is nonempty it suffices to try semicircles
        // starting at an arc start; the witness open semicircle is then the
        // complement, whose rational midpoint is the start rotated -90deg.
        let mut best: Option<(ExactDirection, (ExactDirection, ExactDirection))> = None;
        if s.is_empty() {
            let mid = ExactDirection::new(Vec2::new(0, 1))?;
            let p = mid.normal().rot90(); // semicircle start whose midpoint is `mid`
            let p = ExactDirection::new(p)?;
            best = Some((mid, (p.antipode(), p)));
        } else {
            for arc in &s.arcs {
                let p = arc.start;
                if s.fits_in_semicircle_from(p) {
                    let mid = ExactDirection::new(p.normal().rot270())?;
                    let cand = (mid, (p.antipode(), p));
                    best = match best {
                        None => Some(cand),
                        Some(cur) => {
                            let (cx, cy) = (cur.0.normal().x, cur.0.normal().y);
                            let (nx, ny) = (mid.normal().x, mid.normal().y);
                            if (nx, ny) < (cx, cy) {
                                Some(cand)
                            } else {
                                Some(cur)
                            }
                        }
                    };
                }
            }
        }
        if let Some((midpoint, (a, b))) = best {
            return Ok(Classification::Supercritical {
                midpoint,
                semicircle: Some((a, b)),
            });
        }

        // Critical: some closed semicircle meets S with empty interior,
        // i.e. the positive-length part of S fits in a closed semicircle.
        let positive: Vec<ClosedArc> = s.arcs.iter().filter(|a| !a.is_point()).cloned().collect();
        if positive.is_empty() {
            return Ok(Classification::Critical);
        }
        let plus = ArcSet {
            full_circle: false,
            arcs: positive.clone(),
        };
        for arc in &positive {
            if plus.fits_in_semicircle_from(arc.start) {
                return Ok(Classification::Critical);
            }
        }
        Ok(Classification::Subcritical)
    }

    /// Rational midpoint of a witness open semicircle disjoint from the
    /// stable set. Requires a supercritical two-dimensional family.
    pub fn unstable_semicircle_midpoint(&self) -> Result<ExactDirection> {
        if self.dimension != 2 {
            return Err(KcmError::Dimension {
                expected: 2,
                got: self.dimension,
            });
        }
        match self.classify()? {
            Classification::Supercritical { midpoint, .. } => Ok(midpoint),
            _ => Err(KcmError::NotSupercritical),
        }
    }
}

/// Built-in families used throughout the tests and experiments.
pub mod builtin {
    use super::{UpdateFamily, Vec2};

    /// FA-1f in dimension 1: rules {-1} and {+1}.
    pub fn fa1f_1d() -> UpdateFamily {
        UpdateFamily::new(1, vec![vec![Vec2::new(-1, 0)], vec![Vec2::new(1, 0)]]).unwrap()
    }

    /// East model: single rule {-1}.
    pub fn east() -> UpdateFamily {
        UpdateFamily::new(1, vec![vec![Vec2::new(-1, 0)]]).unwrap()
    }

    /// FA-1f in dimension 2: four singleton rules.
    pub fn fa1f_2d() -> UpdateFamily {
        UpdateFamily::new(
            2,
            vec![
                vec![Vec2::new(1, 0)],
                vec![Vec2::new(-1, 0)],
                vec![Vec2::new(0, 1)],
                vec![Vec2::new(0, -1)],
            ],
        )
        .unwrap()
    }

    /// Single rule {(-1,0)} in dimension 2.
    pub fn west_2d() -> UpdateFamily {
        UpdateFamily::new(2, vec![vec![Vec2::new(-1, 0)]]).unwrap()
    }

    /// 2-neighbour model: all 2-subsets of {+-e1, +-e2}.
    pub fn two_neighbour() -> UpdateFamily {
        let dirs = [
            Vec2::new(1, 0),
            Vec2::new(-1, 0),
            Vec2::new(0, 1),
            Vec2::new(0, -1),
        ];
        let mut rules = Vec::new();
        for i in 0..4 {
            for j in (i + 1)..4 {
                rules.push(vec![dirs[i], dirs[j]]);
            }
        }
        UpdateFamily::new(2, rules).unwrap()
    }

    /// Subcritical example: single rule {(1,0), (-1,0)}.
    pub fn east_west_pair() -> UpdateFamily {
        UpdateFamily::new(2, vec![vec![Vec2::new(1, 0), Vec2::new(-1, 0)]]).unwrap()
    }
}
