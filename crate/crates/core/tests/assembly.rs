use std::f64::consts::PI;

use aefie_mor::analysis::{impedance, solenoidality_deviation, solenoidality_scale, FrequencyGrid};
use aefie_mor::fom::{
    assemble, assemble_inductance, assemble_inductance_with_order, assemble_potential,
    assemble_potential_with_order, assemble_system, mutual_inductance, mutual_potential,
    segment_self_inductance, solve_fom, thin_wire_self_inductance,
};
use aefie_mor::geometry::{discretize_dipole, Segment, WireModel};
use aefie_mor::numerics::norm2;
use aefie_mor::quadrature::GaussLegendre;
use aefie_mor::{Complex64, EPS0, MU0};
use faer::{Mat, Side};

const COPPER: f64 = 1.68e-8;

fn default_model() -> WireModel {
    discretize_dipole(1.0, 1e-3, COPPER, 499).unwrap()
}

/// Composite Simpson rule with `n` (even) panels.
fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

#[test]
fn self_inductance_matches_numerical_double_integral() {
    let (len, a) = (0.1, 1e-3);
    let n = 2000;
    let double = simpson(
        |z| simpson(|zp| 1.0 / ((z - zp).powi(2) + a * a).sqrt(), 0.0, len, n),
        0.0,
        len,
        n,
    );
    let numeric = MU0 / (4.0 * PI) * double;

    let closed = thin_wire_self_inductance(len, a);
    assert!((closed - 8.598e-8).abs() / 8.598e-8 < 5e-4, "{closed:e}");
    assert!(
        (closed - numeric).abs() / numeric < 0.01,
        "{closed:e} vs {numeric:e}"
    );

    let exact = segment_self_inductance(len, a);
    assert!(
        (exact - numeric).abs() / numeric < 1e-6,
        "{exact:e} vs {numeric:e}"
    );
}

#[test]
fn far_collinear_mutual_inductance_is_point_dipole() {
    let quad = GaussLegendre::new(8);
    let len = 0.01;
    for d in [0.5, 1.0, 3.0] {
        let a = Segment::new([0.0, 0.0, -len / 2.0], [0.0, 0.0, len / 2.0]);
        let b = Segment::new([0.0, 0.0, d - len / 2.0], [0.0, 0.0, d + len / 2.0]);
        let m = mutual_inductance(&a, &b, 1e-3, &quad);
        let limit = MU0 / (4.0 * PI) * len * len / d;
        assert!(
            (m - limit).abs() / limit < 0.01,
            "d={d}: {m:e} vs {limit:e}"
        );
    }
}

#[test]
fn far_parallel_mutual_inductance_is_point_dipole() {
    let quad = GaussLegendre::new(8);
    let len = 0.01;
    let d = 1.0;
    let a = Segment::new([0.0, 0.0, 0.0], [0.0, 0.0, len]);
    let b = Segment::new([d, 0.0, 0.0], [d, 0.0, len]);
    let m = mutual_inductance(&a, &b, 1e-3, &quad);
    let limit = MU0 / (4.0 * PI) * len * len / d;
    assert!((m - limit).abs() / limit < 0.01);
}

#[test]
fn far_potential_coefficient_is_point_charge() {
    let quad = GaussLegendre::new(8);
    let len = 0.01;
    for d in [0.5, 1.0, 3.0] {
        let a = [Segment::new([0.0, 0.0, -len / 2.0], [0.0, 0.0, len / 2.0])];
        let b = [
            Segment::new([0.0, 0.0, d - len / 2.0], [0.0, 0.0, d]),
            Segment::new([0.0, 0.0, d], [0.0, 0.0, d + len / 2.0]),
        ];
        let p = mutual_potential(&a, &b, 1e-3, &quad);
        let limit = 1.0 / (4.0 * PI * EPS0 * d);
        assert!(
            (p - limit).abs() / limit < 0.01,
            "d={d}: {p:e} vs {limit:e}"
        );
    }
}

#[test]
fn assembled_far_entries_follow_point_limits() {
    let model = default_model();
    let l = assemble_inductance(&model).unwrap();
    let p = assemble_potential(&model).unwrap();
    let ns = model.n_segments();
    let nn = model.n_nodes();

    let ls = model.segment_length(0);
    let d = (model.segments[ns - 1].center()[2] - model.segments[0].center()[2]).abs();
    let limit = MU0 / (4.0 * PI) * ls * ls / d;
    assert!((l[(0, ns - 1)] - limit).abs() / limit < 0.01);

    // node 1 and node nn-2 have full-length interior cells
    let d = (model.nodes[nn - 2][2] - model.nodes[1][2]).abs();
    let limit = 1.0 / (4.0 * PI * EPS0 * d);
    assert!((p[(1, nn - 2)] - limit).abs() / limit < 0.01);
}

fn max_relative_change(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            if i != j {
                worst = worst.max((a[(i, j)] - b[(i, j)]).abs() / a[(i, j)].abs());
            }
        }
    }
    worst
}

#[test]
fn quadrature_order_converged_on_default_model() {
    let model = default_model();
    let l8 = assemble_inductance_with_order(&model, 8).unwrap();
    let l16 = assemble_inductance_with_order(&model, 16).unwrap();
    let dl = max_relative_change(&l16, &l8);
    assert!(dl < 1e-3, "L changed by {dl:e}");

    let p8 = assemble_potential_with_order(&model, 8).unwrap();
    let p16 = assemble_potential_with_order(&model, 16).unwrap();
    let dp = max_relative_change(&p16, &p8);
    assert!(dp < 1e-3, "P changed by {dp:e}");
}

#[test]
fn l_and_p_are_symmetric_positive_definite() {
    for ns in [5, 10, 25, 50] {
        let model = discretize_dipole(1.0, 1e-3, COPPER, ns).unwrap();
        for (name, m) in [
            ("L", assemble_inductance(&model).unwrap()),
            ("P", assemble_potential(&model).unwrap()),
        ] {
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    assert_eq!(m[(i, j)], m[(j, i)]);
                }
            }
            let eig = m.self_adjoint_eigenvalues(Side::Lower).unwrap();
            assert!(
                eig[0] > 0.0,
                "{name} for {ns} segments: λ_min = {:e}",
                eig[0]
            );
        }
    }
}

/// Backward-stable solves leave a residual of order `ε‖A‖‖x‖`; the continuity
/// rows dominate through `‖P·S‖`.
fn rounding_floor(fom: &aefie_mor::fom::FomMatrices, omega: f64, x: &[Complex64]) -> f64 {
    let ps = fom.ps();
    let mut ps_norm: f64 = 0.0;
    for i in 0..ps.nrows() {
        ps_norm = ps_norm.max((0..ps.ncols()).map(|j| ps[(i, j)].abs()).sum());
    }
    let (j, phi) = x.split_at(fom.n_currents());
    f64::EPSILON * (ps_norm * norm2(j) + omega * norm2(phi) + 1.0) * (fom.dim() as f64).sqrt()
}

#[test]
fn fom_residual_at_one_megahertz() {
    let model = default_model();
    let fom = assemble(&model).unwrap();
    let omega = 2.0 * PI * 1e6;
    let inst = assemble_system(&fom, omega, model.feed_segment, 1.0);
    let x = solve_fom(&inst).unwrap();
    let scaled = fom.scaled_relative_residual(omega, &x, &inst.b);
    assert!(scaled <= 1e-10, "{scaled:e}");
    let literal = fom.relative_residual(omega, &x, &inst.b);
    assert!(literal <= rounding_floor(&fom, omega, &x), "{literal:e}");
}

#[test]
fn fom_residual_and_continuity_across_band() {
    let model = default_model();
    let fom = assemble(&model).unwrap();
    let grid = FrequencyGrid::logarithmic(0.1, 1e9, 25).unwrap();
    for i in 0..grid.len() {
        let omega = grid.omega(i);
        let inst = assemble_system(&fom, omega, model.feed_segment, 1.0);
        let x = solve_fom(&inst).unwrap();
        let scaled = fom.scaled_relative_residual(omega, &x, &inst.b);
        assert!(scaled <= 1e-10, "f={:e}: {scaled:e}", grid.frequency(i));
        let literal = fom.relative_residual(omega, &x, &inst.b);
        assert!(
            literal <= rounding_floor(&fom, omega, &x),
            "f={:e}: {literal:e}",
            grid.frequency(i)
        );
        if grid.frequency(i) < 1.0 {
            assert!(literal <= 1e-10);
        }

        let d = solenoidality_deviation(&fom, &x, omega);
        let scale = solenoidality_scale(&fom, &x, omega);
        assert!(norm2(&d) <= 1e-9 * scale, "f={:e}", grid.frequency(i));
    }
}

#[test]
fn low_frequency_impedance_is_capacitive() {
    let model = default_model();
    let fom = assemble(&model).unwrap();
    let omega = 2.0 * PI * 0.1;
    let x = solve_fom(&assemble_system(&fom, omega, model.feed_segment, 1.0)).unwrap();
    let z = impedance(&x, model.feed_segment, 1.0).unwrap();
    let arg = z.arg().to_degrees();
    assert!(arg > -91.0 && arg < -89.0, "arg Z = {arg}");
}

#[test]
fn solution_is_linear_in_gap_voltage() {
    let model = discretize_dipole(1.0, 1e-3, COPPER, 40).unwrap();
    let fom = assemble(&model).unwrap();
    let omega = 2.0 * PI * 3e7;
    let x1 = solve_fom(&assemble_system(&fom, omega, model.feed_segment, 1.0)).unwrap();
    let x2 = solve_fom(&assemble_system(&fom, omega, model.feed_segment, 2.0)).unwrap();
    let diff: Vec<Complex64> = x1.iter().zip(&x2).map(|(a, b)| 2.0 * a - b).collect();
    assert!(norm2(&diff) <= 1e-12 * norm2(&x2));
    let zero = solve_fom(&assemble_system(&fom, omega, model.feed_segment, 0.0)).unwrap();
    assert!(zero.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
}
