//! Crack measurements derived from the point fields: length, mouth opening,
//! pressures, tips and branch topology.

use crate::constitutive::Vec2;
use crate::grid::PointSet;
use crate::kinematics::FieldState;

/// Scalar diagnostics of one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrackSummary {
    pub length: f64,
    pub mouth_width: f64,
    /// Mean fracture pressure of the mouth points (Pa).
    pub mouth_pressure: f64,
    pub branches: usize,
    pub broken_bonds: usize,
}

/// Crack length: the initial length or the farthest fractured point from the
/// crack origin, measured to the far face of its cell.
pub fn crack_length(points: &PointSet, f: &FieldState, origin: Vec2, initial: f64) -> f64 {
    let mut best = initial;
    for i in 0..f.len() {
        if f.fractured[i] {
            let d = (points.positions[i] - origin).norm() + 0.5 * points.spacing;
            best = best.max(d);
        }
    }
    best
}

/// Opening across the crack at the mouth: mean displacement of the mouth
/// points on one side minus the other, along the crack normal.
pub fn mouth_width(points: &PointSet, f: &FieldState, mouth: &[usize], a: Vec2, b: Vec2) -> f64 {
    let t = (b - a).normalize();
    let n = Vec2::new(-t.y, t.x);
    let (mut up, mut nu, mut down, mut nd) = (Vec2::zeros(), 0, Vec2::zeros(), 0);
    for &k in mouth {
        if (points.positions[k] - a).dot(&n) >= 0.0 {
            up += f.u[k];
            nu += 1;
        } else {
            down += f.u[k];
            nd += 1;
        }
    }
    if nu == 0 || nd == 0 {
        return 0.0;
    }
    (up / nu as f64 - down / nd as f64).dot(&n)
}

/// Mean fracture pressure over `set` (Pa).
pub fn mean_pressure(f: &FieldState, set: &[usize]) -> f64 {
    if set.is_empty() {
        return 0.0;
    }
    set.iter().map(|&k| f.pf[k]).sum::<f64>() / set.len() as f64
}

/// Fracture pressure of the fractured point farthest from `origin` (Pa).
pub fn tip_pressure(points: &PointSet, f: &FieldState, origin: Vec2) -> f64 {
    let mut best: Option<(f64, usize)> = None;
    for i in 0..f.len() {
        if f.fractured[i] {
            let d = (points.positions[i] - origin).norm();
            if best.is_none_or(|(b, _)| d > b) {
                best = Some((d, i));
            }
        }
    }
    best.map(|(_, i)| f.pf[i]).unwrap_or(0.0)
}

/// Largest distance (m) from the line through `a`–`b` of any point with
/// damage at least `d_cr`.
pub fn path_deviation(points: &PointSet, f: &FieldState, d_cr: f64, a: Vec2, b: Vec2) -> f64 {
    let t = (b - a).normalize();
    let n = Vec2::new(-t.y, t.x);
    (0..f.len())
        .filter(|&i| f.damage[i] >= d_cr)
        .map(|i| (points.positions[i] - a).dot(&n).abs())
        .fold(0.0, f64::max)
}

/// Binary image on the lattice, row-major with `nx` columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub nx: usize,
    pub ny: usize,
    pub on: Vec<bool>,
}

const RING: [(i64, i64); 8] = [
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
];

/// 8-connectivity number of a pixel from its ring (1 for a simple point).
fn connectivity(p: &[bool; 8]) -> usize {
    let x = |q: usize| !p[q % 8] as usize;
    [0, 2, 4, 6]
        .iter()
        .map(|&q| x(q) - x(q) * x(q + 1) * x(q + 2))
        .sum()
}

impl Mask {
    pub fn from_damage(points: &PointSet, f: &FieldState, d_cr: f64) -> Self {
        Self {
            nx: points.nx,
            ny: points.ny,
            on: f.damage.iter().map(|&d| d >= d_cr).collect(),
        }
    }

    fn get(&self, i: i64, j: i64) -> bool {
        i >= 0
            && j >= 0
            && (i as usize) < self.nx
            && (j as usize) < self.ny
            && self.on[j as usize * self.nx + i as usize]
    }

    /// Neighbours p2..p9 clockwise from north.
    fn ring(&self, k: usize) -> [bool; 8] {
        let (i, j) = ((k % self.nx) as i64, (k / self.nx) as i64);
        RING.map(|(di, dj)| self.get(i + di, j + dj))
    }

    fn degree(&self, k: usize) -> usize {
        self.ring(k).iter().filter(|&&b| b).count()
    }

    /// Sequential thinning in place: border pixels are peeled one direction at
    /// a time and removed immediately when they are simple and not end points,
    /// so 8-connectivity is never broken.
    pub fn thin(&mut self) {
        loop {
            let mut changed = false;
            // N, E, S, W border in ring order
            for side in [0, 2, 4, 6] {
                for k in 0..self.on.len() {
                    if !self.on[k] {
                        continue;
                    }
                    let p = self.ring(k);
                    if p[side] || p.iter().filter(|&&x| x).count() <= 1 {
                        continue;
                    }
                    if connectivity(&p) == 1 {
                        self.on[k] = false;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
    }

    fn neighbours(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        let (i, j) = ((k % self.nx) as i64, (k / self.nx) as i64);
        RING.iter().filter_map(move |&(di, dj)| {
            let (a, b) = (i + di, j + dj);
            self.get(a, b).then(|| b as usize * self.nx + a as usize)
        })
    }

    /// Removes end spurs shorter than `min_len` pixels, once.
    pub fn prune(&mut self, min_len: usize) {
        let ends: Vec<usize> = (0..self.on.len())
            .filter(|&k| self.on[k] && self.degree(k) == 1)
            .collect();
        let mut clear = Vec::new();
        for e in ends {
            let mut path = vec![e];
            let mut prev = usize::MAX;
            let mut cur = e;
            loop {
                let next: Vec<usize> = self.neighbours(cur).filter(|&n| n != prev).collect();
                if next.len() != 1 || path.len() > min_len {
                    break;
                }
                // stop before a junction
                if self.degree(next[0]) > 2 {
                    if path.len() < min_len {
                        clear.extend(path.iter().copied());
                    }
                    break;
                }
                prev = cur;
                cur = next[0];
                path.push(cur);
            }
        }
        for k in clear {
            self.on[k] = false;
        }
    }

    /// Connected components (8-connectivity) as index lists.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.on.len()];
        let mut out = Vec::new();
        for s in 0..self.on.len() {
            if !self.on[s] || seen[s] {
                continue;
            }
            let mut comp = Vec::new();
            let mut stack = vec![s];
            seen[s] = true;
            while let Some(k) = stack.pop() {
                comp.push(k);
                for n in self.neighbours(k) {
                    if !seen[n] {
                        seen[n] = true;
                        stack.push(n);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Pixels with exactly one neighbour, plus isolated pixels.
    pub fn endpoints(&self, comp: &[usize]) -> Vec<usize> {
        let ends: Vec<usize> = comp.iter().copied().filter(|&k| self.degree(k) == 1).collect();
        if ends.is_empty() && comp.len() == 1 {
            return comp.to_vec();
        }
        ends
    }
}

/// Branch topology of the damaged region.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    /// Number of crack arms beyond a straight crack (0 for a single crack,
    /// 2 after one bifurcation).
    pub branches: usize,
    /// Skeleton end points other than the crack origin.
    pub tips: Vec<Vec2>,
}

/// Skeletonises the damage ≥ `d_cr` region, prunes spurs shorter than
/// `min_spur` pixels and counts end points per component.
///
/// A component with `t ≥ 3` end points contributes `t − 1` branches. Only
/// components with at least `min_spur` pixels count.
pub fn topology(points: &PointSet, f: &FieldState, d_cr: f64, min_spur: usize, origin: Vec2) -> Topology {
    let mut m = Mask::from_damage(points, f, d_cr);
    m.thin();
    m.prune(min_spur);
    let mut branches = 0;
    let mut tips = Vec::new();
    for comp in m.components() {
        if comp.len() < min_spur {
            continue;
        }
        let ends = m.endpoints(&comp);
        if ends.len() >= 3 {
            branches += ends.len() - 1;
        }
        // the end closest to the origin is the crack mouth
        let near = ends
            .iter()
            .copied()
            .min_by(|&a, &b| {
                let da = (points.positions[a] - origin).norm();
                let db = (points.positions[b] - origin).norm();
                da.total_cmp(&db).then(a.cmp(&b))
            });
        for e in ends {
            if Some(e) != near {
                tips.push(points.positions[e]);
            }
        }
    }
    tips.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    Topology { branches, tips }
}

/// Default spur length used by [`topology`]: one horizon plus one pixel.
pub fn default_spur(horizon: f64, spacing: f64) -> usize {
    (horizon / spacing).round() as usize + 1
}
