//! Hexagonal micro-cell layout with wrap-around.
//!
//! The reference layout has 19 base stations (clusters), each carrying a
//! three-sector antenna that serves three pointy-top hexagonal cells. Cells are
//! numbered 1..=57 cluster by cluster; cell `3k+1`, `3k+2`, `3k+3`
//! belong to cluster `k` and are served by sectors pointing at 30°, 150° and
//! 270° respectively. The sector index doubles as the frequency (reuse 3).
//!
//! Geometry lives in a world frame whose origin is the base station of the
//! central cluster (cells 1, 2, 3). Hexagons have circumradius `R = ISD / 3`.
//! The wrap-around torus is generated by two lattice translations of length
//! `sqrt(19) * ISD`, rotated 60° from each other. The fundamental domain is the
//! union of the 57 hexagons itself, so points inside the drawn grid are never
//! moved by [`Grid::wrap`].

use std::f64::consts::{FRAC_PI_3, FRAC_PI_6, PI};
use std::fmt;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec2::Vec2;

pub const NUM_CELLS: usize = 57;
pub const NUM_CLUSTERS: usize = 19;
pub const CELLS_PER_CLUSTER: usize = 3;

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Relative tolerance (in units of the cell radius) for "on the boundary".
const TIE_TOL: f64 = 1e-9;

/// Cell identifier as printed on the layout drawing (1..=57).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CellId(pub u16);

impl CellId {
    pub fn from_index(idx: usize) -> Self {
        CellId(idx as u16 + 1)
    }

    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Axial coordinates of a pointy-top hexagon in the infinite tiling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Hex {
    pub q: i64,
    pub r: i64,
}

impl Hex {
    pub const fn new(q: i64, r: i64) -> Self {
        Hex { q, r }
    }

    fn offset(self, d: Hex) -> Hex {
        Hex::new(self.q + d.q, self.r + d.r)
    }

    /// Residue class modulo the wrap-around lattice. The lattice is spanned
    /// by (7, 1) and (-1, 8) in axial coordinates, both annihilated by
    /// `8q + r (mod 57)`; the quotient group is cyclic of order 57.
    fn coset(self) -> usize {
        (8 * self.q + self.r).rem_euclid(NUM_CELLS as i64) as usize
    }
}

/// Neighbor offsets, indexed by edge. Edge `k` has outward normal at `60°·k`.
const NEIGHBORS: [Hex; 6] = [
    Hex::new(1, 0),
    Hex::new(0, 1),
    Hex::new(-1, 1),
    Hex::new(-1, 0),
    Hex::new(0, -1),
    Hex::new(1, -1),
];

/// Wrap-around lattice generators in axial coordinates.
const LATTICE_AXIAL: [Hex; 2] = [Hex::new(7, 1), Hex::new(-1, 8)];

/// Layout drawing: rows from top to bottom as (row y in half-radius units,
/// [(column x in half-width units, printed id)]).
const LAYOUT: &[(i64, &[(i64, u16)])] = &[
    (0, &[(-1, 44), (1, 43)]),
    (-3, &[(-4, 29), (-2, 28), (0, 45), (2, 26), (4, 25)]),
    (
        -6,
        &[
            (-7, 47),
            (-5, 46),
            (-3, 30),
            (-1, 8),
            (1, 7),
            (3, 27),
            (5, 41),
            (7, 40),
        ],
    ),
    (
        -9,
        &[
            (-6, 48),
            (-4, 11),
            (-2, 10),
            (0, 9),
            (2, 5),
            (4, 4),
            (6, 42),
        ],
    ),
    (
        -12,
        &[
            (-7, 32),
            (-5, 31),
            (-3, 12),
            (-1, 2),
            (1, 1),
            (3, 6),
            (5, 23),
            (7, 22),
        ],
    ),
    (
        -15,
        &[
            (-6, 33),
            (-4, 14),
            (-2, 13),
            (0, 3),
            (2, 20),
            (4, 19),
            (6, 24),
        ],
    ),
    (
        -18,
        &[
            (-7, 50),
            (-5, 49),
            (-3, 15),
            (-1, 17),
            (1, 16),
            (3, 21),
            (5, 56),
            (7, 55),
        ],
    ),
    (
        -21,
        &[
            (-6, 51),
            (-4, 35),
            (-2, 34),
            (0, 18),
            (2, 38),
            (4, 37),
            (6, 57),
        ],
    ),
    (-24, &[(-3, 36), (-1, 53), (1, 52), (3, 39)]),
    (-27, &[(0, 54)]),
];

/// Sector boresights (radians) for the first, second and third cell of a cluster.
pub const SECTOR_BORESIGHTS: [f64; 3] = [FRAC_PI_6, 5.0 * FRAC_PI_6, 3.0 * PI / 2.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellGeom {
    pub id: CellId,
    pub cluster_id: usize,
    pub bs_position: Vec2,
    pub sector_boresight: f64,
    /// 1, 2 or 3.
    pub frequency: u8,
    pub center: Vec2,
    pub cochannel_neighbors: [CellId; 6],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cluster {
    pub bs_position: Vec2,
    pub cells: [CellId; 3],
}

/// Where a straight ray leaves a cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    /// Distance along the (unit) direction to the boundary.
    pub distance: f64,
    /// Edge index, `0..6`.
    pub edge: usize,
}

#[derive(Debug, Clone)]
pub struct Grid {
    isd: f64,
    radius: f64,
    cells: Vec<CellGeom>,
    clusters: Vec<Cluster>,
    coset_to_cell: [usize; NUM_CELLS],
    hexes: [Hex; NUM_CELLS],
    lattice: [Vec2; 2],
}

impl Grid {
    /// Builds the 57-cell reference layout for inter-station distance `isd` (m).
    pub fn new(isd: f64) -> Result<Self> {
        if !(isd.is_finite() && isd > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "inter-station distance must be positive, got {isd}"
            )));
        }
        let radius = isd / 3.0;
        let mut hexes = [Hex::new(0, 0); NUM_CELLS];
        for &(row, cols) in LAYOUT {
            debug_assert_eq!((row + 12).rem_euclid(3), 0);
            let r = (row + 12) / 3;
            for &(col, id) in cols {
                debug_assert_eq!((col - 1 - r).rem_euclid(2), 0);
                let q = (col - 1 - r) / 2;
                hexes[id as usize - 1] = Hex::new(q, r);
            }
        }

        let mut coset_to_cell = [usize::MAX; NUM_CELLS];
        for (idx, h) in hexes.iter().enumerate() {
            let c = h.coset();
            assert_eq!(
                coset_to_cell[c],
                usize::MAX,
                "layout is not a fundamental domain"
            );
            coset_to_cell[c] = idx;
        }

        let lattice = LATTICE_AXIAL.map(|h| axial_to_vec(h, radius));

        let mut cells: Vec<CellGeom> = (0..NUM_CELLS)
            .map(|idx| {
                let sector = idx % CELLS_PER_CLUSTER;
                let boresight = SECTOR_BORESIGHTS[sector];
                let center = hex_center(hexes[idx], radius);
                CellGeom {
                    id: CellId::from_index(idx),
                    cluster_id: idx / CELLS_PER_CLUSTER,
                    bs_position: center - Vec2::from_angle(boresight) * radius,
                    sector_boresight: boresight,
                    frequency: sector as u8 + 1,
                    center,
                    cochannel_neighbors: [CellId(0); 6],
                }
            })
            .collect();

        let clusters: Vec<Cluster> = (0..NUM_CLUSTERS)
            .map(|k| {
                let first = &cells[k * CELLS_PER_CLUSTER];
                Cluster {
                    bs_position: first.bs_position,
                    cells: [0, 1, 2].map(|s| CellId::from_index(k * CELLS_PER_CLUSTER + s)),
                }
            })
            .collect();

        let mut grid = Grid {
            isd,
            radius,
            cells: Vec::new(),
            clusters,
            coset_to_cell,
            hexes,
            lattice,
        };
        // Same sector of the six adjacent clusters: one station spacing away,
        // in the six directions of the station lattice.
        for cell in cells.iter_mut() {
            for (k, slot) in cell.cochannel_neighbors.iter_mut().enumerate() {
                let dir = Vec2::from_angle(FRAC_PI_6 + FRAC_PI_3 * k as f64);
                *slot = grid.locate_cell(grid.wrap(cell.center + dir * isd));
            }
        }
        grid.cells = cells;
        Ok(grid)
    }

    pub fn isd(&self) -> f64 {
        self.isd
    }

    /// Hexagon circumradius (m).
    pub fn cell_radius(&self) -> f64 {
        self.radius
    }

    pub fn cell_area(&self) -> f64 {
        1.5 * SQRT3 * self.radius * self.radius
    }

    /// Area of the wrap-around torus.
    pub fn domain_area(&self) -> f64 {
        let [a, b] = self.lattice;
        (a.x * b.y - a.y * b.x).abs()
    }

    pub fn lattice_vectors(&self) -> [Vec2; 2] {
        self.lattice
    }

    pub fn cells(&self) -> &[CellGeom] {
        &self.cells
    }

    pub fn cell(&self, id: CellId) -> &CellGeom {
        &self.cells[id.index()]
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    /// Vertices of a cell polygon, counter-clockwise starting at 30°.
    pub fn cell_polygon(&self, id: CellId) -> [Vec2; 6] {
        let c = self.cell(id).center;
        std::array::from_fn(|k| {
            c + Vec2::from_angle(FRAC_PI_6 + FRAC_PI_3 * k as f64) * self.radius
        })
    }

    fn cell_of_hex(&self, h: Hex) -> usize {
        self.coset_to_cell[h.coset()]
    }

    /// Infinite-tiling hexagon containing `p`, with equidistant candidates
    /// resolved toward the lowest cell id.
    fn resolve(&self, p: Vec2) -> (Hex, usize) {
        let h0 = hex_round(p, self.radius);
        let mut best = (h0, self.cell_of_hex(h0));
        let mut best_d = (p - hex_center(h0, self.radius)).norm();
        let tol = TIE_TOL * self.radius;
        for n in NEIGHBORS {
            let h = h0.offset(n);
            let d = (p - hex_center(h, self.radius)).norm();
            let idx = self.cell_of_hex(h);
            if d < best_d - tol || (d <= best_d + tol && idx < best.1) {
                best = (h, idx);
                best_d = best_d.min(d);
            }
        }
        best
    }

    /// Maps any point of the plane into the fundamental domain.
    pub fn wrap(&self, p: Vec2) -> Vec2 {
        let (h, idx) = self.resolve(p);
        let canonical = self.hexes[idx];
        if h == canonical {
            p
        } else {
            p - hex_center(h, self.radius) + hex_center(canonical, self.radius)
        }
    }

    /// Cell containing `p` (any point of the plane; wrap-around applied).
    pub fn locate_cell(&self, p: Vec2) -> CellId {
        CellId::from_index(self.resolve(p).1)
    }

    /// Whether `p` lies in the closed hexagon of `id` (canonical placement).
    pub fn contains(&self, id: CellId, p: Vec2) -> bool {
        let d = p - self.cell(id).center;
        let apothem = 0.5 * SQRT3 * self.radius;
        let tol = 1e-7 * self.radius;
        (0..6).all(|k| d.dot(edge_normal(k)) <= apothem + tol)
    }

    /// Shortest representative of `b - a` over all lattice translations.
    pub fn wrapped_displacement(&self, a: Vec2, b: Vec2) -> Vec2 {
        let d = b - a;
        let [t1, t2] = self.lattice;
        let det = t1.x * t2.y - t1.y * t2.x;
        let k1 = ((d.x * t2.y - d.y * t2.x) / det).round();
        let k2 = ((t1.x * d.y - t1.y * d.x) / det).round();
        let mut best = d;
        let mut best_n = f64::INFINITY;
        for i in -1..=1 {
            for j in -1..=1 {
                let cand = d - t1 * (k1 + i as f64) - t2 * (k2 + j as f64);
                let n = cand.norm_sq();
                if n < best_n {
                    best_n = n;
                    best = cand;
                }
            }
        }
        best
    }

    /// Uniform random point inside a cell.
    pub fn sample_in_cell<R: Rng + ?Sized>(&self, id: CellId, rng: &mut R) -> Vec2 {
        let c = self.cell(id).center;
        let half_w = 0.5 * SQRT3 * self.radius;
        loop {
            let p = c + Vec2::new(
                rng.random_range(-half_w..half_w),
                rng.random_range(-self.radius..self.radius),
            );
            if self.contains(id, p) {
                return p;
            }
        }
    }

    /// Where a ray from `p` (inside `id`) along unit `dir` exits the cell.
    pub fn crossing(&self, id: CellId, p: Vec2, dir: Vec2) -> Crossing {
        let d = p - self.cell(id).center;
        let apothem = 0.5 * SQRT3 * self.radius;
        let mut out = Crossing {
            distance: f64::INFINITY,
            edge: 0,
        };
        for k in 0..6 {
            let n = edge_normal(k);
            let closing = n.dot(dir);
            if closing > 1e-15 {
                let s = ((apothem - n.dot(d)) / closing).max(0.0);
                if s < out.distance {
                    out = Crossing {
                        distance: s,
                        edge: k,
                    };
                }
            }
        }
        out
    }

    /// Cell entered when leaving `id` through `edge` at point `p`, and `p`
    /// re-expressed in the entered cell's canonical placement.
    pub fn cross_edge(&self, id: CellId, edge: usize, p: Vec2) -> (CellId, Vec2) {
        let from = self.hexes[id.index()];
        let to = from.offset(NEIGHBORS[edge]);
        let idx = self.cell_of_hex(to);
        let canonical = self.hexes[idx];
        let shifted = p - hex_center(to, self.radius) + hex_center(canonical, self.radius);
        (CellId::from_index(idx), shifted)
    }

    /// Writes the frequency plan as CSV:
    /// `cell_id,cluster_id,bs_x,bs_y,boresight_rad,freq`.
    pub fn write_plan_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record([
            "cell_id",
            "cluster_id",
            "bs_x",
            "bs_y",
            "boresight_rad",
            "freq",
        ])?;
        for c in &self.cells {
            w.write_record([
                c.id.to_string(),
                (c.cluster_id + 1).to_string(),
                c.bs_position.x.to_string(),
                c.bs_position.y.to_string(),
                c.sector_boresight.to_string(),
                c.frequency.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv sink>", e))?;
        Ok(())
    }

    /// Writes cell polygons as CSV: `cell_id,vertex,x,y`.
    pub fn write_polygons_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["cell_id", "vertex", "x", "y"])?;
        for c in &self.cells {
            for (k, v) in self.cell_polygon(c.id).iter().enumerate() {
                w.write_record([
                    c.id.to_string(),
                    k.to_string(),
                    v.x.to_string(),
                    v.y.to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io("<csv sink>", e))?;
        Ok(())
    }
}

fn edge_normal(k: usize) -> Vec2 {
    Vec2::from_angle(FRAC_PI_3 * k as f64)
}

fn axial_to_vec(h: Hex, radius: f64) -> Vec2 {
    Vec2::new(
        radius * SQRT3 * (h.q as f64 + 0.5 * h.r as f64),
        radius * 1.5 * h.r as f64,
    )
}

/// Center of hexagon `h`; hex (0, 0) is cell 1, whose station sits at the origin.
fn hex_center(h: Hex, radius: f64) -> Vec2 {
    Vec2::new(0.5 * SQRT3 * radius, 0.5 * radius) + axial_to_vec(h, radius)
}

fn hex_round(p: Vec2, radius: f64) -> Hex {
    let rel = p - Vec2::new(0.5 * SQRT3 * radius, 0.5 * radius);
    let rf = rel.y / (1.5 * radius);
    let qf = rel.x / (SQRT3 * radius) - 0.5 * rf;
    let sf = -qf - rf;
    let (mut q, mut r, s) = (qf.round(), rf.round(), sf.round());
    let (dq, dr, ds) = ((q - qf).abs(), (r - rf).abs(), (s - sf).abs());
    if dq > dr && dq > ds {
        q = -r - s;
    } else if dr > ds {
        r = -q - s;
    }
    Hex::new(q as i64, r as i64)
}
