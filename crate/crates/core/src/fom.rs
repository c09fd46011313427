//! Full-order model: partial elements and the block system
//!
//! ```text
//! A(ω) = [ R + iωL   Sᵀ  ]      b = [ e_ext ]
//!        [ P·S     −iω·1 ]          [   0   ]
//! ```
//!
//! `L` and `P` use the quasi-static thin-wire reduced kernel
//! `1/√(|r − r'|² + a²)` (source on the wire axis, observer on its surface).
//! Self terms use the closed form of that double integral; mutual terms use
//! tensor Gauss–Legendre quadrature.

use std::f64::consts::PI;

use faer::{Mat, MatRef};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::geometry::{distance, dot, Incidence, Segment, WireModel};
use crate::numerics::{lu_solve, norm2};
use crate::quadrature::GaussLegendre;
use crate::{Error, Result, EPS0, MU0};

/// Gauss–Legendre points per segment per dimension for mutual terms.
pub const DEFAULT_QUADRATURE_ORDER: usize = 8;

/// Center distance below which two distinct elements are considered coincident.
const DEGENERATE_DISTANCE: f64 = 1e-15;

/// `∫₀ˡ∫₀ˡ dz dz' / √((z − z')² + a²)`.
pub fn self_kernel_integral(len: f64, radius: f64) -> f64 {
    2.0 * (len * (len / radius).asinh() - len.hypot(radius) + radius)
}

/// Exact reduced-kernel self inductance of a straight segment.
pub fn segment_self_inductance(len: f64, radius: f64) -> f64 {
    MU0 / (4.0 * PI) * self_kernel_integral(len, radius)
}

/// Thin-wire asymptote `(μ₀ℓ/2π)(ln(2ℓ/a) − 1)`, valid for `ℓ ≫ a`.
pub fn thin_wire_self_inductance(len: f64, radius: f64) -> f64 {
    MU0 * len / (2.0 * PI) * ((2.0 * len / radius).ln() - 1.0)
}

/// Exact reduced-kernel self potential coefficient of a straight uniformly
/// charged cell of length `len`.
pub fn cell_self_potential(len: f64, radius: f64) -> f64 {
    self_kernel_integral(len, radius) / (4.0 * PI * EPS0 * len * len)
}

/// `∬ (t̂_a·t̂_b) / √(|r − r'|² + a²) dl dl'` by tensor Gauss–Legendre.
fn pair_integral(a: &Segment, b: &Segment, radius: f64, quad: &GaussLegendre) -> f64 {
    let la = a.length();
    let lb = b.length();
    let a2 = radius * radius;
    let mut acc = 0.0;
    for (u, wu) in quad.iter() {
        let p = a.point_at(u);
        let mut inner = 0.0;
        for (v, wv) in quad.iter() {
            let q = b.point_at(v);
            let dx = p[0] - q[0];
            let dy = p[1] - q[1];
            let dz = p[2] - q[2];
            inner += wv / (dx * dx + dy * dy + dz * dz + a2).sqrt();
        }
        acc += wu * inner;
    }
    acc * la * lb
}

/// Mutual partial inductance of two segments.
pub fn mutual_inductance(a: &Segment, b: &Segment, radius: f64, quad: &GaussLegendre) -> f64 {
    let cos = dot(&a.tangent(), &b.tangent());
    if cos == 0.0 {
        return 0.0;
    }
    MU0 / (4.0 * PI) * cos * pair_integral(a, b, radius, quad)
}

/// Mutual potential coefficient of two charge cells, each a union of pieces
/// carrying a uniform line charge normalized to unit total charge.
pub fn mutual_potential(
    cell_a: &[Segment],
    cell_b: &[Segment],
    radius: f64,
    quad: &GaussLegendre,
) -> f64 {
    let la: f64 = cell_a.iter().map(Segment::length).sum();
    let lb: f64 = cell_b.iter().map(Segment::length).sum();
    let mut acc = 0.0;
    for pa in cell_a {
        for pb in cell_b {
            // charge integral ignores orientation
            let oriented = if dot(&pa.tangent(), &pb.tangent()) < 0.0 {
                Segment::new(pb.end, pb.start)
            } else {
                *pb
            };
            acc += pair_integral(pa, &oriented, radius, quad);
        }
    }
    acc / (4.0 * PI * EPS0 * la * lb)
}

fn cell_center(cell: &[Segment]) -> [f64; 3] {
    let total: f64 = cell.iter().map(Segment::length).sum();
    let mut c = [0.0; 3];
    for piece in cell {
        let w = piece.length() / total;
        let m = piece.center();
        for k in 0..3 {
            c[k] += w * m[k];
        }
    }
    c
}

/// Diagonal of `R`: `ρ ℓ_s / (π a²)` per segment.
pub fn assemble_resistance(model: &WireModel) -> Vec<f64> {
    let area = PI * model.radius * model.radius;
    model
        .segments
        .iter()
        .map(|s| model.resistivity * s.length() / area)
        .collect()
}

pub fn assemble_inductance(model: &WireModel) -> Result<Mat<f64>> {
    assemble_inductance_with_order(model, DEFAULT_QUADRATURE_ORDER)
}

pub fn assemble_inductance_with_order(model: &WireModel, order: usize) -> Result<Mat<f64>> {
    let quad = GaussLegendre::new(order);
    let segs = &model.segments;
    let centers: Vec<_> = segs.iter().map(Segment::center).collect();
    symmetric_from_upper(segs.len(), |m, n| {
        if m == n {
            return Ok(segment_self_inductance(segs[m].length(), model.radius));
        }
        let d = distance(&centers[m], &centers[n]);
        if d < DEGENERATE_DISTANCE {
            return Err(Error::DegeneratePair(m, n, d));
        }
        Ok(mutual_inductance(&segs[m], &segs[n], model.radius, &quad))
    })
}

pub fn assemble_potential(model: &WireModel) -> Result<Mat<f64>> {
    assemble_potential_with_order(model, DEFAULT_QUADRATURE_ORDER)
}

pub fn assemble_potential_with_order(model: &WireModel, order: usize) -> Result<Mat<f64>> {
    let quad = GaussLegendre::new(order);
    let cells: Vec<Vec<Segment>> = (0..model.n_nodes()).map(|n| model.charge_cell(n)).collect();
    let centers: Vec<_> = cells.iter().map(|c| cell_center(c)).collect();
    symmetric_from_upper(cells.len(), |m, n| {
        if m == n {
            let len: f64 = cells[m].iter().map(Segment::length).sum();
            return Ok(cell_self_potential(len, model.radius));
        }
        let d = distance(&centers[m], &centers[n]);
        if d < DEGENERATE_DISTANCE {
            return Err(Error::DegeneratePair(m, n, d));
        }
        Ok(mutual_potential(&cells[m], &cells[n], model.radius, &quad))
    })
}

/// Fills the upper triangle row-parallel and mirrors it, so the result is
/// exactly symmetric.
fn symmetric_from_upper<F>(n: usize, entry: F) -> Result<Mat<f64>>
where
    F: Fn(usize, usize) -> Result<f64> + Sync,
{
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|m| (m..n).map(|k| entry(m, k)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let mut out = Mat::zeros(n, n);
    for (m, row) in rows.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            out[(m, m + off)] = v;
            out[(m + off, m)] = v;
        }
    }
    Ok(out)
}

/// Frequency-independent partial elements of the full-order model.
#[derive(Debug, Clone)]
pub struct FomMatrices {
    r: Vec<f64>,
    l: Mat<f64>,
    p: Mat<f64>,
    s: Incidence,
    /// Dense `P·S`, cached for operator application.
    ps: Mat<f64>,
    l_c: Mat<Complex64>,
    ps_c: Mat<Complex64>,
}

impl FomMatrices {
    pub fn new(r: Vec<f64>, l: Mat<f64>, p: Mat<f64>, s: Incidence) -> Result<Self> {
        let ns = s.n_cols();
        let nn = s.n_rows();
        for (dim, expected) in [
            (r.len(), ns),
            (l.nrows(), ns),
            (l.ncols(), ns),
            (p.nrows(), nn),
            (p.ncols(), nn),
        ] {
            if dim != expected {
                return Err(Error::DimensionMismatch {
                    expected,
                    found: dim,
                });
            }
        }
        let ps = &p * s.to_dense();
        let l_c = Mat::from_fn(ns, ns, |i, k| Complex64::new(l[(i, k)], 0.0));
        let ps_c = Mat::from_fn(nn, ns, |i, k| Complex64::new(ps[(i, k)], 0.0));
        Ok(Self {
            r,
            l,
            p,
            s,
            ps,
            l_c,
            ps_c,
        })
    }

    pub fn n_currents(&self) -> usize {
        self.s.n_cols()
    }

    pub fn n_potentials(&self) -> usize {
        self.s.n_rows()
    }

    pub fn dim(&self) -> usize {
        self.n_currents() + self.n_potentials()
    }

    /// Diagonal of the resistance matrix (Ω).
    pub fn r(&self) -> &[f64] {
        &self.r
    }

    /// Partial inductances (H).
    pub fn l(&self) -> &Mat<f64> {
        &self.l
    }

    /// Potential coefficients (1/F).
    pub fn p(&self) -> &Mat<f64> {
        &self.p
    }

    pub fn s(&self) -> &Incidence {
        &self.s
    }

    pub(crate) fn l_complex(&self) -> &Mat<Complex64> {
        &self.l_c
    }

    pub(crate) fn ps_complex(&self) -> &Mat<Complex64> {
        &self.ps_c
    }

    pub fn ps(&self) -> &Mat<f64> {
        &self.ps
    }

    /// Right-hand side with `v_gap` on the feed segment.
    pub fn excitation(&self, feed: usize, v_gap: f64) -> Vec<Complex64> {
        let mut b = vec![Complex64::new(0.0, 0.0); self.dim()];
        b[feed] = Complex64::new(v_gap, 0.0);
        b
    }

    /// `A(ω) x` without forming `A(ω)`.
    pub fn apply(&self, omega: f64, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.dim());
        let ns = self.n_currents();
        let iw = Complex64::new(0.0, omega);
        let (j, phi) = x.split_at(ns);
        let lj = real_matvec(&self.l, j);
        let psj = real_matvec(&self.ps, j);
        let st_phi = self.s.apply_transpose(phi);
        let mut y = Vec::with_capacity(self.dim());
        for s in 0..ns {
            y.push(self.r[s] * j[s] + iw * lj[s] + st_phi[s]);
        }
        for (n, &ph) in phi.iter().enumerate() {
            y.push(psj[n] - iw * ph);
        }
        y
    }

    /// Splits `A(ω) = A₀ + iω·A₁` and applies both parts to the columns of `x`:
    /// `A₀ = [R, Sᵀ; P·S, 0]`, `A₁ = [L, 0; 0, −1]`.
    pub fn apply_affine_parts(&self, x: MatRef<'_, Complex64>) -> (Mat<Complex64>, Mat<Complex64>) {
        assert_eq!(x.nrows(), self.dim());
        let ns = self.n_currents();
        let nn = self.n_potentials();
        let m = x.ncols();
        let j = x.subrows(0, ns);
        let phi = x.subrows(ns, nn);
        let lj = &self.l_c * j;
        let psj = &self.ps_c * j;
        let mut a0 = Mat::<Complex64>::zeros(ns + nn, m);
        let mut a1 = Mat::<Complex64>::zeros(ns + nn, m);
        for c in 0..m {
            for s in 0..ns {
                let (from, to) = self.s.edge(s);
                a0[(s, c)] = self.r[s] * j[(s, c)] + phi[(to, c)] - phi[(from, c)];
                a1[(s, c)] = lj[(s, c)];
            }
            for n in 0..nn {
                a0[(ns + n, c)] = psj[(n, c)];
                a1[(ns + n, c)] = -phi[(n, c)];
            }
        }
        (a0, a1)
    }

    /// `‖A(ω) x − b‖₂ / ‖b‖₂`.
    pub fn relative_residual(&self, omega: f64, x: &[Complex64], b: &[Complex64]) -> f64 {
        let ax = self.apply(omega, x);
        let r: Vec<Complex64> = ax.iter().zip(b).map(|(a, bi)| a - bi).collect();
        norm2(&r) / norm2(b)
    }

    /// Relative residual with the continuity rows divided by `ω`, so both
    /// blocks are measured in volts: `‖[r_j; r_φ/ω]‖₂ / ‖b‖₂`.
    ///
    /// Falls back to [`relative_residual`](Self::relative_residual) at `ω = 0`.
    pub fn scaled_relative_residual(&self, omega: f64, x: &[Complex64], b: &[Complex64]) -> f64 {
        if omega == 0.0 {
            return self.relative_residual(omega, x, b);
        }
        let ns = self.n_currents();
        let ax = self.apply(omega, x);
        let r: Vec<Complex64> = ax
            .iter()
            .zip(b)
            .enumerate()
            .map(|(i, (a, bi))| if i < ns { a - bi } else { (a - bi) / omega })
            .collect();
        norm2(&r) / norm2(b)
    }
}

pub(crate) fn real_matvec(m: &Mat<f64>, x: &[Complex64]) -> Vec<Complex64> {
    assert_eq!(m.ncols(), x.len());
    let mut y = vec![Complex64::new(0.0, 0.0); m.nrows()];
    for (c, &xc) in x.iter().enumerate() {
        let col = m.col(c);
        for (r, yr) in y.iter_mut().enumerate() {
            *yr += xc * col[r];
        }
    }
    y
}

/// Assembles `R`, `L`, `P` and `S` for a wire model.
pub fn assemble(model: &WireModel) -> Result<FomMatrices> {
    let r = assemble_resistance(model);
    let l = assemble_inductance(model)?;
    let p = assemble_potential(model)?;
    FomMatrices::new(r, l, p, model.incidence())
}

/// The full-order system at one angular frequency.
#[derive(Debug, Clone)]
pub struct SystemInstance {
    pub a: Mat<Complex64>,
    pub b: Vec<Complex64>,
    pub omega: f64,
}

pub fn assemble_system(fom: &FomMatrices, omega: f64, feed: usize, v_gap: f64) -> SystemInstance {
    let ns = fom.n_currents();
    let nn = fom.n_potentials();
    let n = ns + nn;
    let iw = Complex64::new(0.0, omega);
    let mut a = Mat::<Complex64>::zeros(n, n);
    for c in 0..ns {
        for r in 0..ns {
            a[(r, c)] = iw * fom.l[(r, c)];
        }
        a[(c, c)] += fom.r[c];
        for r in 0..nn {
            a[(ns + r, c)] = Complex64::new(fom.ps[(r, c)], 0.0);
        }
        // Sᵀ: row c has −1 at its start node, +1 at its end node
        let (from, to) = fom.s.edge(c);
        a[(c, ns + from)] = Complex64::new(-1.0, 0.0);
        a[(c, ns + to)] = Complex64::new(1.0, 0.0);
    }
    for k in 0..nn {
        a[(ns + k, ns + k)] = -iw;
    }
    SystemInstance {
        a,
        b: fom.excitation(feed, v_gap),
        omega,
    }
}

/// Direct solve of one full-order system; returns `x = [j; φ]`.
pub fn solve_fom(instance: &SystemInstance) -> Result<Vec<Complex64>> {
    if norm2(&instance.b) == 0.0 {
        return Ok(vec![Complex64::new(0.0, 0.0); instance.b.len()]);
    }
    lu_solve(instance.a.as_ref(), &instance.b).map_err(|e| Error::SolveFailed {
        omega: instance.omega,
        source: Box::new(e),
    })
}
