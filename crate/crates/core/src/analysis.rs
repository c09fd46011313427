//! Impedance, error metrics and FOM/ROM sweep comparison.

use std::f64::consts::PI;

use log::{info, warn};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::fom::{self, FomMatrices};
use crate::geometry::WireModel;
use crate::mor::{self, GreedyConfig, GreedyTrace, ProjectionBasis, ResidualNorm, Strategy};
use crate::numerics::{diff_norm2, norm2};
use crate::{Error, Result};

/// Strictly increasing list of positive frequencies (Hz).
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    frequencies: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(frequencies: Vec<f64>) -> Result<Self> {
        if frequencies.iter().any(|&f| !(f.is_finite() && f > 0.0)) {
            return Err(Error::InvalidArgument(
                "grid frequencies must be positive".into(),
            ));
        }
        if frequencies.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "grid must be strictly increasing".into(),
            ));
        }
        Ok(Self { frequencies })
    }

    /// `n` logarithmically spaced points from `f_min` to `f_max` inclusive.
    pub fn logarithmic(f_min: f64, f_max: f64, n: usize) -> Result<Self> {
        check_range(f_min, f_max, n)?;
        let (a, b) = (f_min.log10(), f_max.log10());
        let step = (b - a) / (n - 1) as f64;
        let mut f: Vec<f64> = (0..n).map(|i| 10f64.powf(a + step * i as f64)).collect();
        f[0] = f_min;
        f[n - 1] = f_max;
        Self::new(f)
    }

    /// `n` equally spaced points from `f_min` to `f_max` inclusive.
    pub fn linear(f_min: f64, f_max: f64, n: usize) -> Result<Self> {
        check_range(f_min, f_max, n)?;
        let step = (f_max - f_min) / (n - 1) as f64;
        let mut f: Vec<f64> = (0..n).map(|i| f_min + step * i as f64).collect();
        f[n - 1] = f_max;
        Self::new(f)
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn frequency(&self, i: usize) -> f64 {
        self.frequencies[i]
    }

    /// `2π f_i`.
    pub fn omega(&self, i: usize) -> f64 {
        2.0 * PI * self.frequencies[i]
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }
}

fn check_range(f_min: f64, f_max: f64, n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 points, got {n}"
        )));
    }
    if !(f_min > 0.0 && f_min < f_max && f_max.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < f_min < f_max, got {f_min} and {f_max}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Fom,
    MonolithicRom,
    BlockRom,
}

impl From<Strategy> for Source {
    fn from(s: Strategy) -> Self {
        match s {
            Strategy::Monolithic => Source::MonolithicRom,
            Strategy::Block => Source::BlockRom,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepRecord {
    pub f: f64,
    pub z: Complex64,
    pub solution: Vec<Complex64>,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub source: Source,
    /// One record per grid frequency, in grid order.
    pub per_frequency: Vec<SweepRecord>,
    /// Full-order solves spent building the ROM (0 for the FOM sweep).
    pub snapshots_used: usize,
    pub converged: bool,
}

impl SweepResult {
    pub fn impedances(&self) -> Vec<Complex64> {
        self.per_frequency.iter().map(|r| r.z).collect()
    }
}

/// `Z = v_gap / j_feed`.
pub fn impedance(solution: &[Complex64], feed: usize, v_gap: f64) -> Result<Complex64> {
    let j = *solution.get(feed).ok_or(Error::DimensionMismatch {
        expected: feed + 1,
        found: solution.len(),
    })?;
    if j.norm() == 0.0 {
        return Err(Error::ZeroFeedCurrent);
    }
    Ok(Complex64::new(v_gap, 0.0) / j)
}

/// `|Z_rom − Z_fom| / |Z_fom|`.
pub fn err_z(z_rom: Complex64, z_fom: Complex64) -> Result<f64> {
    let denom = z_fom.norm();
    if denom == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok((z_rom - z_fom).norm() / denom)
}

/// Continuity residual `d = P·S·j − iω·φ` of a full state.
pub fn solenoidality_deviation(
    fom: &FomMatrices,
    solution: &[Complex64],
    omega: f64,
) -> Vec<Complex64> {
    assert_eq!(solution.len(), fom.dim());
    let (j, phi) = solution.split_at(fom.n_currents());
    let psj = fom::real_matvec(fom.ps(), j);
    let iw = Complex64::new(0.0, omega);
    psj.iter().zip(phi).map(|(a, p)| a - iw * p).collect()
}

/// `‖P·S·j‖ + ω‖φ‖`, the scale against which `‖d‖` is small for a good solution.
pub fn solenoidality_scale(fom: &FomMatrices, solution: &[Complex64], omega: f64) -> f64 {
    let (j, phi) = solution.split_at(fom.n_currents());
    norm2(&fom::real_matvec(fom.ps(), j)) + omega * norm2(phi)
}

/// Relative deviation metric; falls back to the absolute `‖d_rom‖` when the
/// reference deviation is exactly zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrD {
    Relative(f64),
    Absolute(f64),
}

impl ErrD {
    pub fn value(&self) -> f64 {
        match *self {
            ErrD::Relative(v) | ErrD::Absolute(v) => v,
        }
    }

    pub fn is_absolute(&self) -> bool {
        matches!(self, ErrD::Absolute(_))
    }
}

/// `‖d_rom − d_fom‖ / ‖d_fom‖`.
pub fn err_d(d_rom: &[Complex64], d_fom: &[Complex64]) -> ErrD {
    let denom = norm2(d_fom);
    if denom == 0.0 {
        return ErrD::Absolute(norm2(d_rom));
    }
    ErrD::Relative(diff_norm2(d_rom, d_fom) / denom)
}

/// Direct full-order solve at every grid frequency.
pub fn fom_sweep(
    fom: &FomMatrices,
    grid: &FrequencyGrid,
    feed: usize,
    v_gap: f64,
    norm: ResidualNorm,
) -> Result<SweepResult> {
    let b = fom.excitation(feed, v_gap);
    let per_frequency = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let omega = grid.omega(i);
            let x = fom::solve_fom(&fom::assemble_system(fom, omega, feed, v_gap))?;
            Ok(SweepRecord {
                f: grid.frequency(i),
                z: impedance(&x, feed, v_gap)?,
                residual: norm.evaluate(fom, omega, &x, &b),
                solution: x,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        source: Source::Fom,
        per_frequency,
        snapshots_used: 0,
        converged: true,
    })
}

/// Evaluates a built ROM over the grid.
pub fn rom_sweep(
    fom: &FomMatrices,
    basis: &ProjectionBasis,
    trace: &GreedyTrace,
    grid: &FrequencyGrid,
    feed: usize,
    v_gap: f64,
    norm: ResidualNorm,
) -> Result<SweepResult> {
    let eval = mor::evaluate_rom(fom, basis, grid, feed, v_gap, norm)?;
    let per_frequency = eval
        .solutions
        .into_iter()
        .zip(eval.residuals)
        .enumerate()
        .map(|(i, (x, residual))| SweepRecord {
            f: grid.frequency(i),
            z: impedance(&x, feed, v_gap).unwrap_or(Complex64::new(f64::INFINITY, 0.0)),
            solution: x,
            residual,
        })
        .collect();
    Ok(SweepResult {
        source: basis.strategy().into(),
        per_frequency,
        snapshots_used: trace.snapshots(),
        converged: trace.converged(),
    })
}

/// Per-frequency comparison metrics of one ROM against the FOM.
#[derive(Debug, Clone)]
pub struct RomMetrics {
    pub err_z: Vec<f64>,
    pub err_d: Vec<ErrD>,
}

impl RomMetrics {
    pub fn compute(
        fom: &FomMatrices,
        grid: &FrequencyGrid,
        reference: &SweepResult,
        rom: &SweepResult,
    ) -> Self {
        let (err_z, err_d) = reference
            .per_frequency
            .par_iter()
            .zip(&rom.per_frequency)
            .enumerate()
            .map(|(i, (f, r))| {
                let omega = grid.omega(i);
                let ez = err_z(r.z, f.z).unwrap_or(f64::INFINITY);
                let d_fom = solenoidality_deviation(fom, &f.solution, omega);
                let d_rom = solenoidality_deviation(fom, &r.solution, omega);
                (ez, err_d(&d_rom, &d_fom))
            })
            .unzip();
        Self { err_z, err_d }
    }

    pub fn max_err_z(&self) -> f64 {
        self.err_z.iter().copied().fold(0.0, f64::max)
    }
}

/// Inputs for [`run_comparison`] besides geometry and grid.
#[derive(Debug, Clone)]
pub struct ComparisonConfig {
    pub tolerance: f64,
    pub max_snapshots: usize,
    pub strategies: Vec<Strategy>,
    pub v_gap: f64,
    pub residual_norm: ResidualNorm,
}

impl ComparisonConfig {
    pub fn new(tolerance: f64) -> Self {
        Self {
            tolerance,
            max_snapshots: 100,
            strategies: vec![Strategy::Monolithic, Strategy::Block],
            v_gap: crate::DEFAULT_V_GAP,
            residual_norm: ResidualNorm::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RomRun {
    pub strategy: Strategy,
    pub basis: ProjectionBasis,
    pub trace: GreedyTrace,
    pub sweep: SweepResult,
    pub metrics: RomMetrics,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub grid: FrequencyGrid,
    pub fom_matrices: FomMatrices,
    pub feed: usize,
    pub fom: SweepResult,
    pub roms: Vec<RomRun>,
}

impl Comparison {
    pub fn rom(&self, strategy: Strategy) -> Option<&RomRun> {
        self.roms.iter().find(|r| r.strategy == strategy)
    }
}

/// Full-order sweep, then a greedy build and ROM sweep per strategy.
pub fn run_comparison(
    model: &WireModel,
    grid: &FrequencyGrid,
    config: &ComparisonConfig,
) -> Result<Comparison> {
    if !model.is_thin_wire() {
        warn!(
            "radius {:.3e} m is not below 0.1 x segment length {:.3e} m",
            model.radius,
            model.min_segment_length()
        );
    }
    let fom_matrices = fom::assemble(model)?;
    compare_with(fom_matrices, model.feed_segment, grid, config)
}

/// [`run_comparison`] for already assembled matrices.
pub fn compare_with(
    fom_matrices: FomMatrices,
    feed: usize,
    grid: &FrequencyGrid,
    config: &ComparisonConfig,
) -> Result<Comparison> {
    info!(
        "full-order sweep: {} unknowns, {} frequencies",
        fom_matrices.dim(),
        grid.len()
    );
    let fom_result = fom_sweep(
        &fom_matrices,
        grid,
        feed,
        config.v_gap,
        config.residual_norm,
    )?;

    let mut roms = Vec::new();
    for &strategy in &config.strategies {
        let mut gc = GreedyConfig::new(strategy, config.tolerance);
        gc.max_snapshots = config.max_snapshots;
        gc.residual_norm = config.residual_norm;
        let (basis, trace) = mor::greedy_build(&fom_matrices, grid, &gc, feed, config.v_gap)?;
        if !trace.converged() {
            warn!(
                "{strategy} greedy did not reach tolerance {:.1e} ({:?}, max residual {:.3e})",
                config.tolerance,
                trace.status,
                trace.final_max_residual()
            );
        }
        let sweep = rom_sweep(
            &fom_matrices,
            &basis,
            &trace,
            grid,
            feed,
            config.v_gap,
            config.residual_norm,
        )?;
        let metrics = RomMetrics::compute(&fom_matrices, grid, &fom_result, &sweep);
        roms.push(RomRun {
            strategy,
            basis,
            trace,
            sweep,
            metrics,
        });
    }
    Ok(Comparison {
        grid: grid.clone(),
        fom_matrices,
        feed,
        fom: fom_result,
        roms,
    })
}


#[cfg(test)]
mod proptests {
    use super::{err_d, err_z, norm2, Complex64};
    use proptest::prelude::*;

    fn cvec(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
        proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), n)
            .prop_map(|v| v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect())
    }

    proptest! {
        #[test]
        fn metrics_are_scale_invariant(
            a in cvec(6),
            b in cvec(6),
            sr in -10.0f64..10.0,
            si in -10.0f64..10.0,
        ) {
            let s = Complex64::new(sr, si);
            prop_assume!(s.norm() > 1e-3);
            prop_assume!(norm2(&b) > 1e-3 && b[0].norm() > 1e-3);
            let sa: Vec<_> = a.iter().map(|z| z * s).collect();
            let sb: Vec<_> = b.iter().map(|z| z * s).collect();
            let d0 = err_d(&a, &b).value();
            let d1 = err_d(&sa, &sb).value();
            prop_assert!((d0 - d1).abs() <= 1e-12 * d0.max(1.0));
            let z0 = err_z(a[0], b[0]).unwrap();
            let z1 = err_z(sa[0], sb[0]).unwrap();
            prop_assert!((z0 - z1).abs() <= 1e-12 * z0.max(1.0));
        }
    }
}
