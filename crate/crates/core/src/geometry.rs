//! Straight thin-wire dipole discretization.
//!
//! The wire lies on the z-axis, centered at the origin, cut into uniform
//! segments. Nodes sit at segment junctions and at both wire ends. Current on
//! segment `s` flows from node `s` to node `s + 1`.

use faer::Mat;

use crate::{Error, Result};

pub type Point3 = [f64; 3];

/// A straight segment between two points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: Point3,
    pub end: Point3,
}

impl Segment {
    pub fn new(start: Point3, end: Point3) -> Self {
        Self { start, end }
    }

    pub fn length(&self) -> f64 {
        distance(&self.start, &self.end)
    }

    pub fn center(&self) -> Point3 {
        lerp(&self.start, &self.end, 0.5)
    }

    /// Unit tangent pointing from `start` to `end`.
    pub fn tangent(&self) -> Point3 {
        let l = self.length();
        [
            (self.end[0] - self.start[0]) / l,
            (self.end[1] - self.start[1]) / l,
            (self.end[2] - self.start[2]) / l,
        ]
    }

    /// Point at parameter `t ∈ [0, 1]`.
    pub fn point_at(&self, t: f64) -> Point3 {
        lerp(&self.start, &self.end, t)
    }
}

pub(crate) fn lerp(a: &Point3, b: &Point3, t: f64) -> Point3 {
    [
        a[0] + t * (b[0] - a[0]),
        a[1] + t * (b[1] - a[1]),
        a[2] + t * (b[2] - a[2]),
    ]
}

pub(crate) fn distance(a: &Point3, b: &Point3) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

pub(crate) fn dot(a: &Point3, b: &Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Discretized dipole geometry and material.
#[derive(Debug, Clone, PartialEq)]
pub struct WireModel {
    /// Total antenna length (m).
    pub length: f64,
    /// Wire radius (m).
    pub radius: f64,
    /// Material resistivity (Ω·m).
    pub resistivity: f64,
    pub segments: Vec<Segment>,
    pub nodes: Vec<Point3>,
    /// Segment carrying the delta-gap source.
    pub feed_segment: usize,
}

impl WireModel {
    pub fn n_segments(&self) -> usize {
        self.segments.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Total number of unknowns `N_s + N_n`.
    pub fn n_unknowns(&self) -> usize {
        self.n_segments() + self.n_nodes()
    }

    pub fn segment_length(&self, s: usize) -> f64 {
        self.segments[s].length()
    }

    pub fn min_segment_length(&self) -> f64 {
        self.segments
            .iter()
            .map(Segment::length)
            .fold(f64::INFINITY, f64::min)
    }

    /// Whether `radius < 0.1 × min segment length` holds.
    ///
    /// Models outside this range are still assembled; the self terms use the
    /// exact reduced-kernel integrals, which stay positive for any aspect ratio.
    pub fn is_thin_wire(&self) -> bool {
        self.radius < 0.1 * self.min_segment_length()
    }

    /// Charge cell of node `n`: the half-segments adjacent to it.
    pub fn charge_cell(&self, n: usize) -> Vec<Segment> {
        let mut pieces = Vec::with_capacity(2);
        if n > 0 {
            let seg = &self.segments[n - 1];
            pieces.push(Segment::new(seg.center(), seg.end));
        }
        if n < self.segments.len() {
            let seg = &self.segments[n];
            pieces.push(Segment::new(seg.start, seg.center()));
        }
        pieces
    }

    pub fn charge_cell_length(&self, n: usize) -> f64 {
        self.charge_cell(n).iter().map(Segment::length).sum()
    }

    pub fn incidence(&self) -> Incidence {
        incidence_matrix(self)
    }
}

/// Builds a uniformly segmented straight dipole along the z-axis.
pub fn discretize_dipole(
    length: f64,
    radius: f64,
    resistivity: f64,
    n_segments: usize,
) -> Result<WireModel> {
    if !(length.is_finite() && length > 0.0) {
        return Err(Error::Geometry(format!(
            "length must be positive, got {length}"
        )));
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::Geometry(format!(
            "radius must be positive, got {radius}"
        )));
    }
    if !(resistivity.is_finite() && resistivity >= 0.0) {
        return Err(Error::Geometry(format!(
            "resistivity must be non-negative, got {resistivity}"
        )));
    }
    if n_segments < 3 {
        return Err(Error::Geometry(format!(
            "need at least 3 segments, got {n_segments}"
        )));
    }

    let z0 = -0.5 * length;
    let nodes: Vec<Point3> = (0..=n_segments)
        .map(|i| [0.0, 0.0, z0 + length * i as f64 / n_segments as f64])
        .collect();
    let segments = nodes.windows(2).map(|w| Segment::new(w[0], w[1])).collect();

    Ok(WireModel {
        length,
        radius,
        resistivity,
        segments,
        nodes,
        feed_segment: n_segments / 2,
    })
}

/// Node–segment incidence (discrete divergence) of an open wire.
///
/// Entry `(n, s)` is `+1` when segment `s` carries current into node `n` and
/// `−1` when it carries current out of it. Stored as one `(from, to)` node
/// pair per segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Incidence {
    n_nodes: usize,
    edges: Vec<(usize, usize)>,
}

impl Incidence {
    pub fn n_rows(&self) -> usize {
        self.n_nodes
    }

    pub fn n_cols(&self) -> usize {
        self.edges.len()
    }

    /// `(from_node, to_node)` of segment `s`.
    pub fn edge(&self, s: usize) -> (usize, usize) {
        self.edges[s]
    }

    pub fn entry(&self, n: usize, s: usize) -> i8 {
        let (from, to) = self.edges[s];
        if n == to {
            1
        } else if n == from {
            -1
        } else {
            0
        }
    }

    pub fn nnz(&self) -> usize {
        2 * self.edges.len()
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.n_nodes, self.edges.len());
        for (s, &(from, to)) in self.edges.iter().enumerate() {
            m[(from, s)] = -1.0;
            m[(to, s)] = 1.0;
        }
        m
    }

    /// `S · j`: net current flowing into each node.
    pub fn apply<T>(&self, j: &[T]) -> Vec<T>
    where
        T: Copy + Default + std::ops::AddAssign + std::ops::SubAssign,
    {
        assert_eq!(j.len(), self.edges.len());
        let mut out = vec![T::default(); self.n_nodes];
        for (&(from, to), &js) in self.edges.iter().zip(j) {
            out[to] += js;
            out[from] -= js;
        }
        out
    }

    /// `Sᵀ · φ`: potential rise along each segment.
    pub fn apply_transpose<T>(&self, phi: &[T]) -> Vec<T>
    where
        T: Copy + std::ops::Sub<Output = T>,
    {
        assert_eq!(phi.len(), self.n_nodes);
        self.edges
            .iter()
            .map(|&(from, to)| phi[to] - phi[from])
            .collect()
    }
}

pub fn incidence_matrix(model: &WireModel) -> Incidence {
    Incidence {
        n_nodes: model.n_nodes(),
        edges: (0..model.n_segments()).map(|s| (s, s + 1)).collect(),
    }
}
