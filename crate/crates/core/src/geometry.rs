//! Node placement, cluster grids and the coordinate frames used by the
//! correlation analysis.

use std::io::{Read, Write};

use rand::Rng;

use crate::config::NetworkConfig;
use crate::error::{Error, Result};
use crate::rng::{substream, StreamRng};

/// A point in the plane, in wavelength units.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn sub(&self, other: &Point2) -> Point2 {
        Point2::new(self.x - other.x, self.y - other.y)
    }

    pub fn dot(&self, other: &Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// Axis-aligned rectangle `[x0, x0 + width] x [y0, y0 + height]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub width: f64,
    pub height: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, width: f64, height: f64) -> Result<Self> {
        let r = Self { x0, y0, width, height };
        r.check()?;
        Ok(r)
    }

    /// Square `[0, side]^2`.
    pub fn square(side: f64) -> Result<Self> {
        Self::new(0.0, 0.0, side, side)
    }

    fn check(&self) -> Result<()> {
        if !(self.width > 0.0 && self.height > 0.0) || !self.width.is_finite() || !self.height.is_finite() {
            return Err(Error::InvalidDomain(format!(
                "rectangle sides must be positive, got {} x {}",
                self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn center(&self) -> Point2 {
        Point2::new(self.x0 + 0.5 * self.width, self.y0 + 0.5 * self.height)
    }

    pub fn contains(&self, p: &Point2) -> bool {
        p.x >= self.x0 && p.x <= self.x0 + self.width && p.y >= self.y0 && p.y <= self.y0 + self.height
    }

    /// Uniform point inside the rectangle.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point2 {
        Point2::new(
            self.x0 + self.width * rng.random::<f64>(),
            self.y0 + self.height * rng.random::<f64>(),
        )
    }
}

/// Transmit and receive squares of area `a_c` with facing edges `d` apart:
/// transmit spans `[-sqrt(a_c), 0]`, receive spans `[d, d + sqrt(a_c)]`.
pub fn facing_clusters(a_c: f64, d: f64) -> Result<(Rect, Rect)> {
    if !(a_c > 0.0 && d > 0.0) {
        return Err(Error::InvalidParameter(format!("need a_c > 0 and d > 0, got a_c={a_c}, d={d}")));
    }
    let s = a_c.sqrt();
    Ok((Rect::new(-s, 0.0, s, s)?, Rect::new(d, 0.0, s, s)?))
}

/// Realized node coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct NodePlacement {
    pub positions: Vec<Point2>,
    pub domain: Rect,
}

impl NodePlacement {
    pub fn new(positions: Vec<Point2>, domain: Rect) -> Result<Self> {
        if let Some(p) = positions.iter().find(|p| !domain.contains(p)) {
            return Err(Error::InvalidInput(format!("point ({}, {}) outside domain", p.x, p.y)));
        }
        Ok(Self { positions, domain })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn distance(&self, i: usize, k: usize) -> f64 {
        self.positions[i].distance(&self.positions[k])
    }

    /// Placement restricted to the given node indices.
    pub fn subset(&self, indices: &[usize], domain: Rect) -> Result<NodePlacement> {
        NodePlacement::new(indices.iter().map(|&i| self.positions[i]).collect(), domain)
    }

    /// Writes `node_id,x,y` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["node_id", "x", "y"])?;
        for (i, p) in self.positions.iter().enumerate() {
            w.write_record([i.to_string(), format!("{:.16e}", p.x), format!("{:.16e}", p.y)])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a `node_id,x,y` file; node ids must be `0..n` in order.
    pub fn read_csv<R: Read>(input: R, domain: Rect) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["node_id", "x", "y"] {
            return Err(Error::InvalidInput(format!("bad placement header {headers:?}")));
        }
        let mut positions = Vec::new();
        for (expected, rec) in r.records().enumerate() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec[i].trim().parse::<f64>().map_err(|_| Error::InvalidInput(format!("bad number `{}`", &rec[i])))
            };
            let id: usize = rec[0].trim().parse().map_err(|_| Error::InvalidInput(format!("bad node id `{}`", &rec[0])))?;
            if id != expected {
                return Err(Error::InvalidInput(format!("node ids out of order at {id}")));
            }
            positions.push(Point2::new(parse(1)?, parse(2)?));
        }
        Self::new(positions, domain)
    }
}

/// Draws `n` i.i.d. uniform points in `domain`.
pub fn place_uniform(n: usize, domain: Rect, rng: &mut StreamRng) -> Result<NodePlacement> {
    domain.check()?;
    let positions = (0..n).map(|_| domain.sample(rng)).collect();
    Ok(NodePlacement { positions, domain })
}

/// Places `config.n` nodes uniformly in `domain`, deterministically in `config.seed`.
pub fn place_nodes(config: &NetworkConfig, domain: Rect) -> Result<NodePlacement> {
    let mut rng = substream(config.seed, "placement");
    place_uniform(config.n, domain, &mut rng)
}

/// Square clusters over a placement's domain.
#[derive(Debug, Clone)]
pub struct ClusterGrid {
    pub cluster_area: f64,
    pub side: f64,
    pub cols: usize,
    pub rows: usize,
    pub domain: Rect,
    /// Node index to linear cluster index (`row * cols + col`).
    pub membership: Vec<usize>,
    /// Nodes of each cluster, ascending.
    pub members: Vec<Vec<usize>>,
}

pub type ClusterIndex = (usize, usize);

impl ClusterGrid {
    pub fn len(&self) -> usize {
        self.cols * self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, (col, row): ClusterIndex) -> usize {
        row * self.cols + col
    }

    pub fn coords(&self, linear: usize) -> ClusterIndex {
        (linear % self.cols, linear / self.cols)
    }

    /// Cell of a point by floor division; points on the far edge go to the
    /// last cell.
    pub fn cell_of(&self, p: &Point2) -> ClusterIndex {
        let col = (((p.x - self.domain.x0) / self.side).floor().max(0.0) as usize).min(self.cols - 1);
        let row = (((p.y - self.domain.y0) / self.side).floor().max(0.0) as usize).min(self.rows - 1);
        (col, row)
    }

    /// Actual rectangle of a cluster; boundary cells may be partial.
    pub fn cell_rect(&self, (col, row): ClusterIndex) -> Rect {
        let x0 = self.domain.x0 + col as f64 * self.side;
        let y0 = self.domain.y0 + row as f64 * self.side;
        let x1 = (x0 + self.side).min(self.domain.x0 + self.domain.width);
        let y1 = (y0 + self.side).min(self.domain.y0 + self.domain.height);
        Rect { x0, y0, width: x1 - x0, height: y1 - y0 }
    }

    pub fn occupancy(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }

    /// Grid (Chebyshev) distance between two clusters.
    pub fn grid_distance(&self, i: usize, j: usize) -> usize {
        let (ci, ri) = self.coords(i);
        let (cj, rj) = self.coords(j);
        ci.abs_diff(cj).max(ri.abs_diff(rj))
    }
}

/// Partitions a placement into square cells of area `cluster_area`.
pub fn partition_clusters(placement: &NodePlacement, cluster_area: f64) -> Result<ClusterGrid> {
    if !(cluster_area > 0.0) || !cluster_area.is_finite() {
        return Err(Error::InvalidParameter(format!("cluster area must be positive, got {cluster_area}")));
    }
    let domain = placement.domain;
    if cluster_area > domain.area() * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "cluster area {cluster_area} exceeds network area {}",
            domain.area()
        )));
    }
    let side = cluster_area.sqrt();
    // Tolerate round-off so an exact tiling does not gain an empty sliver row.
    let count = |len: f64| ((len / side) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let cols = count(domain.width);
    let rows = count(domain.height);
    let mut grid = ClusterGrid {
        cluster_area,
        side,
        cols,
        rows,
        domain,
        membership: Vec::with_capacity(placement.len()),
        members: vec![Vec::new(); cols * rows],
    };
    for (i, p) in placement.positions.iter().enumerate() {
        let c = grid.index(grid.cell_of(p));
        grid.membership.push(c);
        grid.members[c].push(i);
    }
    Ok(grid)
}

/// Separation between two clusters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Separation {
    /// Gap between facing edges along the dominant axis of the line of centers.
    pub edge_gap: f64,
    /// Euclidean distance between cell centers.
    pub center_distance: f64,
}

/// Facing-edge gap and center distance of clusters `i` and `j`.
///
/// For pairs that are not axis aligned the edge gap is taken along the axis
/// with the larger gap; both measures are always returned.
pub fn cluster_separation(grid: &ClusterGrid, i: ClusterIndex, j: ClusterIndex) -> Result<Separation> {
    if i == j {
        return Err(Error::SameCluster(i, j));
    }
    let a = grid.cell_rect(i);
    let b = grid.cell_rect(j);
    let gap = |a0: f64, a1: f64, b0: f64, b1: f64| (b0 - a1).max(a0 - b1).max(0.0);
    let gx = gap(a.x0, a.x0 + a.width, b.x0, b.x0 + b.width);
    let gy = gap(a.y0, a.y0 + a.height, b.y0, b.y0 + b.height);
    Ok(Separation { edge_gap: gx.max(gy), center_distance: a.center().distance(&b.center()) })
}

/// Orthonormal frame with its first axis along `x_a - x_b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltedFrame {
    pub origin: Point2,
    pub e1: Point2,
    pub e2: Point2,
}

impl TiltedFrame {
    pub fn new(origin: Point2, x_a: Point2, x_b: Point2) -> Result<Self> {
        let v = x_a.sub(&x_b);
        let len = v.norm();
        if !(len > 0.0) {
            return Err(Error::InvalidInput("tilted frame needs x_a != x_b".into()));
        }
        let e1 = Point2::new(v.x / len, v.y / len);
        let e2 = Point2::new(-e1.y, e1.x);
        Ok(Self { origin, e1, e2 })
    }

    pub fn to_local(&self, p: &Point2) -> Point2 {
        let r = p.sub(&self.origin);
        Point2::new(r.dot(&self.e1), r.dot(&self.e2))
    }

    pub fn to_global(&self, q: &Point2) -> Point2 {
        Point2::new(
            self.origin.x + q.x * self.e1.x + q.y * self.e2.x,
            self.origin.y + q.x * self.e1.y + q.y * self.e2.y,
        )
    }

    /// Largest deviation from orthonormality.
    pub fn orthonormality_error(&self) -> f64 {
        (self.e1.dot(&self.e1) - 1.0)
            .abs()
            .max((self.e2.dot(&self.e2) - 1.0).abs())
            .max(self.e1.dot(&self.e2).abs())
    }
}
