//! Uniform material-point lattice, boundary-layer tags and horizon neighbor lists.
//!
//! Points sit at cell centers of an `nx × ny` lattice whose lower-left corner
//! is the origin. Boundary layers are bands of points inside the lattice whose
//! centers lie within a given distance of a domain side.

use bitflags::bitflags;
use nalgebra::Vector2;

use crate::error::{ConfigError, Result};
use crate::fracture::BondLedger;

pub type Vec2 = Vector2<f64>;

bitflags! {
    /// Domain sides, combinable for corner points.
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
    pub struct Sides: u8 {
        const LEFT = 1;
        const RIGHT = 2;
        const BOTTOM = 4;
        const TOP = 8;
    }
}

/// Region tag of a point. Every point carries exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Interior,
    /// Boundary layer; the set lists every side whose band contains the point.
    Layer(Sides),
}

impl Region {
    pub fn sides(self) -> Sides {
        match self {
            Region::Interior => Sides::empty(),
            Region::Layer(s) => s,
        }
    }
}

/// A boundary-layer band along one side of the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerSpec {
    pub side: Sides,
    pub thickness: f64,
}

/// Rectangle `[0, width] × [0, height]` in metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extent {
    pub width: f64,
    pub height: f64,
}

/// Straight initial crack from `a` to `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrackSegment {
    pub a: Vec2,
    pub b: Vec2,
}

impl CrackSegment {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self {
            a: Vec2::new(x0, y0),
            b: Vec2::new(x1, y1),
        }
    }

    pub fn length(&self) -> f64 {
        (self.b - self.a).norm()
    }

    /// True when the segment `p → q` crosses this crack.
    ///
    /// The bond must straddle the crack line, a point lying on the line
    /// belonging to its left side; touching a crack tip counts as crossing.
    pub fn cut_by(&self, p: Vec2, q: Vec2) -> bool {
        let scale = (q - p).norm() * (self.b - self.a).norm();
        let eps = 1e-12 * scale;
        let snap = |v: f64| if v.abs() <= eps { 0.0 } else { v };
        let orient = |o: Vec2, s: Vec2, t: Vec2| snap((s - o).perp(&(t - o)));
        let o1 = orient(self.a, self.b, p);
        let o2 = orient(self.a, self.b, q);
        let o3 = orient(p, q, self.a);
        let o4 = orient(p, q, self.b);
        (o1 >= 0.0) != (o2 >= 0.0) && o3 * o4 <= 0.0
    }
}

/// The material points of a planar run.
#[derive(Debug, Clone)]
pub struct PointSet {
    pub nx: usize,
    pub ny: usize,
    /// Lattice spacing Δx (m).
    pub spacing: f64,
    /// Out-of-plane thickness (m).
    pub thickness: f64,
    pub positions: Vec<Vec2>,
    /// Cell volume Δx² × thickness (m³).
    pub volumes: Vec<f64>,
    pub regions: Vec<Region>,
    /// Endpoint of at least one bond cut by an initial crack.
    pub crack_face: Vec<bool>,
}

impl PointSet {
    /// Lattice with `nx × ny` cells of size `spacing`.
    pub fn from_counts(
        nx: usize,
        ny: usize,
        spacing: f64,
        thickness: f64,
        layers: &[LayerSpec],
    ) -> Result<Self> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(ConfigError::NonPositiveSpacing(spacing));
        }
        if !(thickness > 0.0) {
            return Err(ConfigError::Invalid(vec![format!(
                "thickness_m must be positive, got {thickness}"
            )]));
        }
        let n = nx * ny;
        let width = nx as f64 * spacing;
        let height = ny as f64 * spacing;
        let mut positions = Vec::with_capacity(n);
        let mut regions = Vec::with_capacity(n);
        for j in 0..ny {
            for i in 0..nx {
                let x = (i as f64 + 0.5) * spacing;
                let y = (j as f64 + 0.5) * spacing;
                let mut sides = Sides::empty();
                for l in layers {
                    let inside = if l.side.contains(Sides::LEFT) {
                        x < l.thickness
                    } else if l.side.contains(Sides::RIGHT) {
                        x > width - l.thickness
                    } else if l.side.contains(Sides::BOTTOM) {
                        y < l.thickness
                    } else {
                        y > height - l.thickness
                    };
                    if inside {
                        sides |= l.side;
                    }
                }
                positions.push(Vec2::new(x, y));
                regions.push(if sides.is_empty() {
                    Region::Interior
                } else {
                    Region::Layer(sides)
                });
            }
        }
        Ok(Self {
            nx,
            ny,
            spacing,
            thickness,
            positions,
            volumes: vec![spacing * spacing * thickness; n],
            regions,
            crack_face: vec![false; n],
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn lattice(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    pub fn extent(&self) -> Extent {
        Extent {
            width: self.nx as f64 * self.spacing,
            height: self.ny as f64 * self.spacing,
        }
    }

    pub fn in_layer(&self, k: usize, side: Sides) -> bool {
        self.regions[k].sides().intersects(side)
    }
}

fn cell_count(length: f64, spacing: f64) -> Result<usize> {
    let n = length / spacing;
    let r = n.round();
    if r < 1.0 || (n - r).abs() > 1e-6 * n.max(1.0) {
        return Err(ConfigError::Incommensurate {
            extent: length,
            spacing,
        });
    }
    Ok(r as usize)
}

/// Builds the lattice covering `extent` with cell-centered points.
pub fn build_uniform_grid(
    extent: Extent,
    spacing: f64,
    thickness: f64,
    layers: &[LayerSpec],
) -> Result<PointSet> {
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(ConfigError::NonPositiveSpacing(spacing));
    }
    let nx = cell_count(extent.width, spacing)?;
    let ny = cell_count(extent.height, spacing)?;
    PointSet::from_counts(nx, ny, spacing, thickness, layers)
}

/// Lattice offsets `(di, dj)` with `0 < |ξ| ≤ horizon`, row-major order.
pub fn stencil(spacing: f64, horizon: f64) -> Vec<(i64, i64)> {
    let reach = (horizon / spacing).floor() as i64 + 1;
    let limit = horizon * horizon * (1.0 + 1e-10);
    let mut out = Vec::new();
    for dj in -reach..=reach {
        for di in -reach..=reach {
            if di == 0 && dj == 0 {
                continue;
            }
            let (x, y) = (di as f64 * spacing, dj as f64 * spacing);
            if x * x + y * y <= limit {
                out.push((di, dj));
            }
        }
    }
    out
}

/// Compressed per-point bond lists.
///
/// Directed entry `e` in `offsets[i]..offsets[i+1]` is the bond `i → neighbors[e]`.
/// Each undirected bond has one id in `bond`, shared by both directions.
#[derive(Debug, Clone)]
pub struct NeighborTable {
    pub horizon: f64,
    pub offsets: Vec<usize>,
    pub neighbors: Vec<u32>,
    /// Reference bond vector ξ = x′ − x.
    pub xi: Vec<Vec2>,
    pub length: Vec<f64>,
    /// Neighbor volume V′.
    pub volume: Vec<f64>,
    pub bond: Vec<u32>,
    /// Directed index of the reverse entry.
    pub reverse: Vec<u32>,
    /// Endpoints `(i, j)` with `i < j` per undirected bond.
    pub ends: Vec<(u32, u32)>,
    /// Directed index `i → j` (with `i < j`) per undirected bond.
    pub forward: Vec<u32>,
    pub ledger: BondLedger,
}

impl NeighborTable {
    pub fn range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn bond_count(&self) -> usize {
        self.ends.len()
    }

    pub fn intact(&self, e: usize) -> bool {
        self.ledger.intact[self.bond[e] as usize]
    }
}

/// Finds all pairs within `horizon` and seeds broken bonds across `cracks`.
///
/// Endpoints of cut bonds are tagged in `points.crack_face`.
pub fn build_neighbor_lists(
    points: &mut PointSet,
    horizon: f64,
    cracks: &[CrackSegment],
) -> NeighborTable {
    let n = points.len();
    let sten = stencil(points.spacing, horizon);
    let (nx, ny) = (points.nx as i64, points.ny as i64);
    let mut offsets = Vec::with_capacity(n + 1);
    let mut neighbors = Vec::with_capacity(n * sten.len());
    offsets.push(0);
    for k in 0..n {
        let (i, j) = points.lattice(k);
        for &(di, dj) in &sten {
            let (a, b) = (i as i64 + di, j as i64 + dj);
            if a >= 0 && a < nx && b >= 0 && b < ny {
                neighbors.push((b * nx + a) as u32);
            }
        }
        offsets.push(neighbors.len());
    }
    let m = neighbors.len();
    let mut xi = Vec::with_capacity(m);
    let mut length = Vec::with_capacity(m);
    let mut volume = Vec::with_capacity(m);
    let mut reverse = vec![0u32; m];
    let mut bond = vec![u32::MAX; m];
    let mut ends = Vec::with_capacity(m / 2);
    let mut forward = Vec::with_capacity(m / 2);
    for k in 0..n {
        for e in offsets[k]..offsets[k + 1] {
            let j = neighbors[e] as usize;
            let v = points.positions[j] - points.positions[k];
            xi.push(v);
            length.push(v.norm());
            volume.push(points.volumes[j]);
            let list = &neighbors[offsets[j]..offsets[j + 1]];
            let pos = list
                .binary_search(&(k as u32))
                .expect("neighbor lists are symmetric");
            let r = offsets[j] + pos;
            reverse[e] = r as u32;
            if k < j {
                let id = ends.len() as u32;
                bond[e] = id;
                bond[r] = id;
                ends.push((k as u32, j as u32));
                forward.push(e as u32);
            }
        }
    }
    let mut ledger = BondLedger::new(ends.len());
    for (id, &(a, b)) in ends.iter().enumerate() {
        let (pa, pb) = (points.positions[a as usize], points.positions[b as usize]);
        if cracks.iter().any(|c| c.cut_by(pa, pb)) {
            ledger.intact[id] = false;
            points.crack_face[a as usize] = true;
            points.crack_face[b as usize] = true;
        }
    }
    NeighborTable {
        horizon,
        offsets,
        neighbors,
        xi,
        length,
        volume,
        bond,
        reverse,
        ends,
        forward,
        ledger,
    }
}
