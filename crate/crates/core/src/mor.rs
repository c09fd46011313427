//! Greedy reduced-basis construction with monolithic or block-structure-preserving
//! Galerkin projection.
//!
//! Both strategies project with the conjugate transpose. The monolithic
//! strategy keeps one basis `V` for the stacked state `[j; φ]`. The block
//! strategy keeps `V₁` for currents and `V₂` for potentials and projects each
//! block of the full-order operator separately, so the reduced matrix keeps
//! the 2×2 partition of the full one:
//!
//! ```text
//! [ V₁ᴴRV₁ + iωV₁ᴴLV₁   V₁ᴴSᵀV₂   ]
//! [ V₂ᴴPSV₁            −iωV₂ᴴV₂  ]
//! ```

use std::fmt;

use faer::Mat;
use log::{debug, info};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::analysis::FrequencyGrid;
use crate::fom::{assemble_system, solve_fom, FomMatrices};
use crate::numerics::{lu_solve, norm2, OrthoBasis, DEFAULT_DROP_TOL};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Monolithic,
    Block,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Monolithic => "monolithic",
            Strategy::Block => "block",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How the full-order residual of a reconstructed solution is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResidualNorm {
    /// `‖A(ω)x − b‖₂ / ‖b‖₂` exactly as the system is written.
    Literal,
    /// Same, with the continuity rows divided by `ω` so that both blocks
    /// carry volts. The literal form has a rounding floor of roughly
    /// `ε‖P·S‖‖j‖`, which near resonance exceeds practical tolerances even
    /// for the direct solution.
    #[default]
    PotentialScaled,
}

impl ResidualNorm {
    pub fn evaluate(&self, fom: &FomMatrices, omega: f64, x: &[Complex64], b: &[Complex64]) -> f64 {
        match self {
            ResidualNorm::Literal => fom.relative_residual(omega, x, b),
            ResidualNorm::PotentialScaled => fom.scaled_relative_residual(omega, x, b),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GreedyConfig {
    /// Relative-residual acceptance threshold.
    pub tolerance: f64,
    /// Cap on full-order solves.
    pub max_snapshots: usize,
    pub strategy: Strategy,
    /// Grid index of the first snapshot.
    pub initial_index: usize,
    /// Gram–Schmidt drop threshold.
    pub drop_tol: f64,
    pub residual_norm: ResidualNorm,
}

impl GreedyConfig {
    pub fn new(strategy: Strategy, tolerance: f64) -> Self {
        Self {
            tolerance,
            max_snapshots: 100,
            strategy,
            initial_index: 0,
            drop_tol: DEFAULT_DROP_TOL,
            residual_norm: ResidualNorm::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance >= 0.0 && self.tolerance < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerance must lie in [0, 1), got {}",
                self.tolerance
            )));
        }
        if self.max_snapshots == 0 {
            return Err(Error::InvalidArgument(
                "max_snapshots must be at least 1".into(),
            ));
        }
        if !(self.drop_tol > 0.0 && self.drop_tol < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "drop_tol must lie in (0, 1), got {}",
                self.drop_tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum BasisMode {
    Monolithic(OrthoBasis),
    Block {
        currents: OrthoBasis,
        potentials: OrthoBasis,
    },
}

/// Projection bases plus the grid indices whose snapshots built them.
#[derive(Debug, Clone)]
pub struct ProjectionBasis {
    pub mode: BasisMode,
    pub snapshot_indices: Vec<usize>,
    n_currents: usize,
    n_potentials: usize,
}

impl ProjectionBasis {
    pub fn new(strategy: Strategy, n_currents: usize, n_potentials: usize) -> Self {
        let mode = match strategy {
            Strategy::Monolithic => {
                BasisMode::Monolithic(OrthoBasis::empty(n_currents + n_potentials))
            }
            Strategy::Block => BasisMode::Block {
                currents: OrthoBasis::empty(n_currents),
                potentials: OrthoBasis::empty(n_potentials),
            },
        };
        Self {
            mode,
            snapshot_indices: Vec::new(),
            n_currents,
            n_potentials,
        }
    }

    /// Identity bases: the projection reproduces the full-order model.
    pub fn identity(strategy: Strategy, n_currents: usize, n_potentials: usize) -> Self {
        let mode = match strategy {
            Strategy::Monolithic => {
                BasisMode::Monolithic(OrthoBasis::identity(n_currents + n_potentials))
            }
            Strategy::Block => BasisMode::Block {
                currents: OrthoBasis::identity(n_currents),
                potentials: OrthoBasis::identity(n_potentials),
            },
        };
        Self {
            mode,
            snapshot_indices: Vec::new(),
            n_currents,
            n_potentials,
        }
    }

    pub fn strategy(&self) -> Strategy {
        match self.mode {
            BasisMode::Monolithic(_) => Strategy::Monolithic,
            BasisMode::Block { .. } => Strategy::Block,
        }
    }

    pub fn n_currents(&self) -> usize {
        self.n_currents
    }

    pub fn n_potentials(&self) -> usize {
        self.n_potentials
    }

    /// `(k₁, k₂)` for the block mode, `(k, 0)` for the monolithic one.
    pub fn sizes(&self) -> (usize, usize) {
        match &self.mode {
            BasisMode::Monolithic(v) => (v.len(), 0),
            BasisMode::Block {
                currents,
                potentials,
            } => (currents.len(), potentials.len()),
        }
    }

    /// Dimension of the reduced system.
    pub fn size_total(&self) -> usize {
        let (a, b) = self.sizes();
        a + b
    }

    pub fn drop_count(&self) -> usize {
        match &self.mode {
            BasisMode::Monolithic(v) => v.drop_count,
            BasisMode::Block {
                currents,
                potentials,
            } => currents.drop_count + potentials.drop_count,
        }
    }

    /// Adds the full-order solution at grid index `index` to the basis.
    pub fn add_snapshot(&mut self, index: usize, x: &[Complex64], drop_tol: f64) -> Result<()> {
        self.add_snapshots(&[x.to_vec()], drop_tol)?;
        self.snapshot_indices.push(index);
        Ok(())
    }

    fn add_snapshots(&mut self, xs: &[Vec<Complex64>], drop_tol: f64) -> Result<()> {
        let (ns, nn) = (self.n_currents, self.n_potentials);
        match &mut self.mode {
            BasisMode::Monolithic(v) => {
                *v = v.extend(xs, drop_tol)?;
            }
            BasisMode::Block {
                currents,
                potentials,
            } => {
                let mut js = Vec::with_capacity(xs.len());
                let mut phis = Vec::with_capacity(xs.len());
                for x in xs {
                    let (j, phi) = split_snapshot(x, ns, nn)?;
                    js.push(j);
                    phis.push(phi);
                }
                *currents = currents.extend(&js, drop_tol)?;
                *potentials = potentials.extend(&phis, drop_tol)?;
            }
        }
        Ok(())
    }

    /// Seeds a basis from a set of full-order solutions at once.
    pub fn from_snapshots(
        strategy: Strategy,
        n_currents: usize,
        n_potentials: usize,
        snapshots: &[(usize, Vec<Complex64>)],
        drop_tol: f64,
    ) -> Result<Self> {
        let mut basis = Self::new(strategy, n_currents, n_potentials);
        for (index, x) in snapshots {
            basis.add_snapshot(*index, x, drop_tol)?;
        }
        Ok(basis)
    }
}

/// Splits a full state into currents (first `n_currents`) and potentials.
pub fn split_snapshot(
    x: &[Complex64],
    n_currents: usize,
    n_potentials: usize,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    if x.len() != n_currents + n_potentials {
        return Err(Error::DimensionMismatch {
            expected: n_currents + n_potentials,
            found: x.len(),
        });
    }
    let (j, phi) = x.split_at(n_currents);
    Ok((j.to_vec(), phi.to_vec()))
}

/// Full-order solution used as a snapshot.
pub fn collect_snapshot(
    fom: &FomMatrices,
    omega: f64,
    feed: usize,
    v_gap: f64,
) -> Result<Vec<Complex64>> {
    solve_fom(&assemble_system(fom, omega, feed, v_gap))
}

/// A projected system at one frequency.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub a: Mat<Complex64>,
    pub b: Vec<Complex64>,
    pub omega: f64,
    pub strategy: Strategy,
    /// `(k₁, k₂)` block partition; `(k, 0)` for the monolithic strategy.
    pub partition: (usize, usize),
}

impl ReducedSystem {
    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn solve(&self) -> Result<Vec<Complex64>> {
        if norm2(&self.b) == 0.0 {
            return Ok(vec![Complex64::new(0.0, 0.0); self.dim()]);
        }
        lu_solve(self.a.as_ref(), &self.b)
    }
}

/// Frequency-independent reduced blocks, built once per basis and evaluated
/// at any `ω` in `O(k²)`.
#[derive(Debug, Clone)]
pub enum ReducedOperator {
    /// `Ã(ω) = Vᴴ A₀ V + iω Vᴴ A₁ V`.
    Monolithic {
        a0: Mat<Complex64>,
        a1: Mat<Complex64>,
        /// `Vᴴ e_feed`
        be: Vec<Complex64>,
    },
    Block {
        /// `V₁ᴴ R V₁`
        rr: Mat<Complex64>,
        /// `V₁ᴴ L V₁`
        ll: Mat<Complex64>,
        /// `V₁ᴴ Sᵀ V₂`
        st: Mat<Complex64>,
        /// `V₂ᴴ P S V₁`
        ps: Mat<Complex64>,
        /// `V₂ᴴ V₂`
        gram: Mat<Complex64>,
        /// `V₁ᴴ e_feed`
        be: Vec<Complex64>,
    },
}

impl ReducedOperator {
    pub fn new(fom: &FomMatrices, basis: &ProjectionBasis, feed: usize) -> Result<Self> {
        if basis.n_currents() != fom.n_currents() || basis.n_potentials() != fom.n_potentials() {
            return Err(Error::DimensionMismatch {
                expected: fom.dim(),
                found: basis.n_currents() + basis.n_potentials(),
            });
        }
        let ns = fom.n_currents();
        match &basis.mode {
            BasisMode::Monolithic(v) => {
                if v.is_empty() {
                    return Err(Error::InvalidArgument("empty monolithic basis".into()));
                }
                let vm = &v.columns;
                let (a0v, a1v) = fom.apply_affine_parts(vm.as_ref());
                let a0 = vm.adjoint() * &a0v;
                let a1 = vm.adjoint() * &a1v;
                let be = (0..v.len()).map(|k| vm[(feed, k)].conj()).collect();
                Ok(Self::Monolithic { a0, a1, be })
            }
            BasisMode::Block {
                currents,
                potentials,
            } => {
                if currents.is_empty() || potentials.is_empty() {
                    return Err(Error::InvalidArgument("empty block basis".into()));
                }
                let v1 = &currents.columns;
                let v2 = &potentials.columns;
                let k1 = v1.ncols();
                let k2 = v2.ncols();

                let rv1 = Mat::from_fn(ns, k1, |i, c| v1[(i, c)] * fom.r()[i]);
                let s = fom.s();
                let stv2 = Mat::from_fn(ns, k2, |i, c| {
                    let (from, to) = s.edge(i);
                    v2[(to, c)] - v2[(from, c)]
                });

                let rr = v1.adjoint() * &rv1;
                let ll = v1.adjoint() * (fom.l_complex() * v1);
                let st = v1.adjoint() * &stv2;
                let ps = v2.adjoint() * (fom.ps_complex() * v1);
                let gram = v2.adjoint() * v2;
                let be = (0..k1).map(|k| v1[(feed, k)].conj()).collect();
                Ok(Self::Block {
                    rr,
                    ll,
                    st,
                    ps,
                    gram,
                    be,
                })
            }
        }
    }

    pub fn strategy(&self) -> Strategy {
        match self {
            Self::Monolithic { .. } => Strategy::Monolithic,
            Self::Block { .. } => Strategy::Block,
        }
    }

    pub fn partition(&self) -> (usize, usize) {
        match self {
            Self::Monolithic { a0, .. } => (a0.nrows(), 0),
            Self::Block { rr, gram, .. } => (rr.nrows(), gram.nrows()),
        }
    }

    pub fn at(&self, omega: f64, v_gap: f64) -> ReducedSystem {
        let iw = Complex64::new(0.0, omega);
        let zero = Complex64::new(0.0, 0.0);
        match self {
            Self::Monolithic { a0, a1, be } => {
                let k = a0.nrows();
                ReducedSystem {
                    a: Mat::from_fn(k, k, |i, j| a0[(i, j)] + iw * a1[(i, j)]),
                    b: be.iter().map(|z| z * v_gap).collect(),
                    omega,
                    strategy: Strategy::Monolithic,
                    partition: (k, 0),
                }
            }
            Self::Block {
                rr,
                ll,
                st,
                ps,
                gram,
                be,
            } => {
                let k1 = rr.nrows();
                let k2 = gram.nrows();
                let a = Mat::from_fn(k1 + k2, k1 + k2, |i, j| match (i < k1, j < k1) {
                    (true, true) => rr[(i, j)] + iw * ll[(i, j)],
                    (true, false) => st[(i, j - k1)],
                    (false, true) => ps[(i - k1, j)],
                    (false, false) => -iw * gram[(i - k1, j - k1)],
                });
                let mut b: Vec<Complex64> = be.iter().map(|z| z * v_gap).collect();
                b.resize(k1 + k2, zero);
                ReducedSystem {
                    a,
                    b,
                    omega,
                    strategy: Strategy::Block,
                    partition: (k1, k2),
                }
            }
        }
    }
}

/// `Ã = Vᴴ A(ω) V`, `b̃ = Vᴴ b` for a monolithic basis.
pub fn project_monolithic(
    fom: &FomMatrices,
    basis: &ProjectionBasis,
    omega: f64,
    feed: usize,
    v_gap: f64,
) -> Result<ReducedSystem> {
    if basis.strategy() != Strategy::Monolithic {
        return Err(Error::InvalidArgument(
            "project_monolithic needs a monolithic basis".into(),
        ));
    }
    Ok(ReducedOperator::new(fom, basis, feed)?.at(omega, v_gap))
}

/// Block-wise projection with separate current and potential bases.
pub fn project_block(
    fom: &FomMatrices,
    basis: &ProjectionBasis,
    omega: f64,
    feed: usize,
    v_gap: f64,
) -> Result<ReducedSystem> {
    if basis.strategy() != Strategy::Block {
        return Err(Error::InvalidArgument(
            "project_block needs a block basis".into(),
        ));
    }
    Ok(ReducedOperator::new(fom, basis, feed)?.at(omega, v_gap))
}

/// Lifts reduced coordinates back to a full state: `x = V x̃`, or
/// `[V₁ x̃_j; V₂ x̃_φ]` for the block mode.
pub fn reconstruct(basis: &ProjectionBasis, x_tilde: &[Complex64]) -> Result<Vec<Complex64>> {
    if x_tilde.len() != basis.size_total() {
        return Err(Error::DimensionMismatch {
            expected: basis.size_total(),
            found: x_tilde.len(),
        });
    }
    match &basis.mode {
        BasisMode::Monolithic(v) => v.expand(x_tilde),
        BasisMode::Block {
            currents,
            potentials,
        } => {
            let (xj, xphi) = x_tilde.split_at(currents.len());
            let mut x = currents.expand(xj)?;
            x.extend(potentials.expand(xphi)?);
            Ok(x)
        }
    }
}

/// `‖A(ω) x − b‖₂ / ‖b‖₂` with the exact full-order operator.
pub fn residual(
    fom: &FomMatrices,
    x_rec: &[Complex64],
    omega: f64,
    feed: usize,
    v_gap: f64,
) -> Result<f64> {
    if x_rec.len() != fom.dim() {
        return Err(Error::DimensionMismatch {
            expected: fom.dim(),
            found: x_rec.len(),
        });
    }
    let b = fom.excitation(feed, v_gap);
    Ok(fom.relative_residual(omega, x_rec, &b))
}

/// Reduced solution, reconstruction and residual for every grid frequency.
#[derive(Debug, Clone)]
pub struct RomEvaluation {
    pub solutions: Vec<Vec<Complex64>>,
    /// Relative full-order residuals; `∞` where the reduced system was singular.
    pub residuals: Vec<f64>,
}

impl RomEvaluation {
    /// Largest residual and its grid index, ties resolved toward the lower index.
    pub fn max_residual(&self) -> (usize, f64) {
        self.max_residual_excluding(&[]).unwrap_or((0, f64::NAN))
    }

    /// Largest residual over grid points not in `sampled`.
    pub fn max_unsampled_residual(&self, sampled: &[usize]) -> Option<(usize, f64)> {
        self.max_residual_excluding(sampled)
    }

    fn max_residual_excluding(&self, skip: &[usize]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &r) in self.residuals.iter().enumerate() {
            if skip.contains(&i) {
                continue;
            }
            let r = if r.is_nan() { f64::INFINITY } else { r };
            if best.is_none_or(|(_, b)| r > b) {
                best = Some((i, r));
            }
        }
        best
    }
}

/// Evaluates the ROM at every grid frequency.
pub fn evaluate_rom(
    fom: &FomMatrices,
    basis: &ProjectionBasis,
    grid: &FrequencyGrid,
    feed: usize,
    v_gap: f64,
    norm: ResidualNorm,
) -> Result<RomEvaluation> {
    let op = ReducedOperator::new(fom, basis, feed)?;
    let n = fom.dim();
    let m = grid.len();

    let reduced: Vec<Option<Vec<Complex64>>> = (0..m)
        .into_par_iter()
        .map(|i| op.at(grid.omega(i), v_gap).solve().ok())
        .collect();

    let mut x = Mat::<Complex64>::zeros(n, m);
    for (c, xt) in reduced.iter().enumerate() {
        if let Some(xt) = xt {
            let full = reconstruct(basis, xt)?;
            for (r, v) in full.into_iter().enumerate() {
                x[(r, c)] = v;
            }
        }
    }

    let (a0x, a1x) = fom.apply_affine_parts(x.as_ref());
    let b_norm = v_gap.abs();
    let ns = fom.n_currents();
    let mut solutions = Vec::with_capacity(m);
    let mut residuals = Vec::with_capacity(m);
    for c in 0..m {
        let omega = grid.omega(c);
        let iw = Complex64::new(0.0, omega);
        let row_scale = match norm {
            ResidualNorm::PotentialScaled if omega > 0.0 => 1.0 / omega,
            _ => 1.0,
        };
        let col: Vec<Complex64> = (0..n).map(|r| x[(r, c)]).collect();
        match reduced[c] {
            Some(_) => {
                let r: Vec<Complex64> = (0..n)
                    .map(|r| {
                        let mut v = a0x[(r, c)] + iw * a1x[(r, c)];
                        if r == feed {
                            v -= v_gap;
                        }
                        if r >= ns {
                            v *= row_scale;
                        }
                        v
                    })
                    .collect();
                residuals.push(if b_norm > 0.0 {
                    norm2(&r) / b_norm
                } else {
                    norm2(&r)
                });
            }
            None => residuals.push(f64::INFINITY),
        }
        solutions.push(col);
    }
    Ok(RomEvaluation {
        solutions,
        residuals,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GreedyStatus {
    Converged,
    /// `max_snapshots` full-order solves were spent without reaching the tolerance.
    MaxSnapshots,
    /// Every grid frequency has been sampled without reaching the tolerance.
    Stagnated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub sampled_index: usize,
    pub sampled_frequency_hz: f64,
    pub basis_sizes: (usize, usize),
    pub basis_size_total: usize,
    pub max_residual: f64,
    pub argmax_index: usize,
}

#[derive(Debug, Clone)]
pub struct GreedyTrace {
    pub strategy: Strategy,
    pub entries: Vec<TraceEntry>,
    pub status: GreedyStatus,
}

impl GreedyTrace {
    pub fn converged(&self) -> bool {
        self.status == GreedyStatus::Converged
    }

    /// Number of full-order solves performed.
    pub fn snapshots(&self) -> usize {
        self.entries.len()
    }

    pub fn final_max_residual(&self) -> f64 {
        self.entries
            .last()
            .map_or(f64::INFINITY, |e| e.max_residual)
    }
}

/// Greedy reduced-basis build over a frequency grid.
///
/// Each iteration solves the full-order model at the current sample, extends
/// the basis, evaluates the ROM residual over the whole grid and samples the
/// worst frequency next.
pub fn greedy_build(
    fom: &FomMatrices,
    grid: &FrequencyGrid,
    config: &GreedyConfig,
    feed: usize,
    v_gap: f64,
) -> Result<(ProjectionBasis, GreedyTrace)> {
    config.validate()?;
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty frequency grid".into()));
    }
    if config.initial_index >= grid.len() {
        return Err(Error::InvalidArgument(format!(
            "initial_index {} outside grid of {} points",
            config.initial_index,
            grid.len()
        )));
    }

    let mut basis = ProjectionBasis::new(config.strategy, fom.n_currents(), fom.n_potentials());
    let mut entries = Vec::new();
    let mut index = config.initial_index;

    let status = loop {
        let omega = grid.omega(index);
        let x = collect_snapshot(fom, omega, feed, v_gap)?;
        basis.add_snapshot(index, &x, config.drop_tol)?;

        let eval = evaluate_rom(fom, &basis, grid, feed, v_gap, config.residual_norm)?;
        let (argmax, max_res) = eval.max_residual();
        let entry = TraceEntry {
            iteration: entries.len() + 1,
            sampled_index: index,
            sampled_frequency_hz: grid.frequency(index),
            basis_sizes: basis.sizes(),
            basis_size_total: basis.size_total(),
            max_residual: max_res,
            argmax_index: argmax,
        };
        debug!(
            "{} greedy iteration {}: sampled f = {:.6e} Hz, basis {:?}, max residual {:.3e} at f = {:.6e} Hz",
            config.strategy,
            entry.iteration,
            entry.sampled_frequency_hz,
            entry.basis_sizes,
            max_res,
            grid.frequency(argmax)
        );
        entries.push(entry);

        if max_res <= config.tolerance {
            break GreedyStatus::Converged;
        }
        if entries.len() >= config.max_snapshots {
            break GreedyStatus::MaxSnapshots;
        }
        // A sampled frequency can stay above tolerance when the reduced solve
        // loses accuracy; move on to the worst frequency not yet sampled.
        index = if basis.snapshot_indices.contains(&argmax) {
            match eval.max_unsampled_residual(&basis.snapshot_indices) {
                Some((i, _)) => i,
                None => break GreedyStatus::Stagnated,
            }
        } else {
            argmax
        };
    };

    info!(
        "{} greedy finished: {:?} after {} full-order solves, reduced size {}, max residual {:.3e}",
        config.strategy,
        status,
        entries.len(),
        basis.size_total(),
        entries.last().map_or(f64::NAN, |e| e.max_residual)
    );

    Ok((
        basis,
        GreedyTrace {
            strategy: config.strategy,
            entries,
            status,
        },
    ))
}
