mod common;

use common::{dense_airy, laplacian_energy, random_field, rel_err, Padded};

use std::f64::consts::PI;

use nalgebra::DMatrix;
use plate_interpen::grid::{BcKind, BoundaryCondition, Field, Grid, SymTensorField, VecField};
use plate_interpen::grid_ops::{biharmonic, div, div_tensor, laplacian, sym_grad, trace, vk_bracket};
use plate_interpen::vonkarman::{evk_operator, solve_airy, AiryOperator, EvkMode};
use proptest::prelude::*;

fn interior_values(g: &Grid, f: &Field) -> Vec<f64> {
    g.interior().map(|k| f.as_slice()[k]).collect()
}

#[test]
fn biharmonic_matches_thirteen_point_oracle() {
    let g = Grid::new(5, 6, 1.0, 1.3).unwrap();
    let data = |x: f64, y: f64| 0.3 + x * x - 0.5 * y + 0.2 * x * y * y;
    let cases: [(BcKind, &dyn Fn(f64, f64) -> f64); 2] = [(BcKind::Clamped, &data), (BcKind::SimplySupported, &|_, _| 0.7)];
    for (seed, (kind, u0)) in cases.into_iter().enumerate() {
        let bc = BoundaryCondition::from_data(kind, g, u0);
        let mut u = random_field(g, seed as u64 + 11, false);
        for j in 0..g.my() {
            for i in 0..g.mx() {
                if !g.is_interior(i, j) {
                    u.set(i, j, u0(g.x(i), g.y(j)));
                }
            }
        }
        let got = biharmonic(&u, &bc).unwrap();
        let pad = Padded::new(&g, &u, kind, u0);
        let want: Vec<f64> = g.interior().map(|k| {
            let (i, j) = g.ij(k);
            pad.bih13(&g, i, j)
        }).collect();
        assert!(rel_err(&interior_values(&g, &got), &want) <= 1e-12, "{kind:?}");
    }
}

#[test]
fn biharmonic_polynomial_exactness() {
    let g = Grid::new(8, 7, 1.0, 0.9).unwrap();
    let cubic = |x: f64, y: f64| 1.0 + x - 2.0 * y + x * x * y - 0.5 * y * y * y + 0.3 * x * x * x;
    let bc = BoundaryCondition::from_data(BcKind::Clamped, g, cubic);
    let b = biharmonic(&Field::from_fn(g, cubic), &bc).unwrap();
    assert!(b.interior_max_abs() <= 1e-8, "{}", b.interior_max_abs());

    let quartic = |x: f64, _y: f64| x.powi(4);
    let hom = BoundaryCondition::homogeneous(BcKind::Clamped, g);
    let b = biharmonic(&Field::from_fn(g, quartic), &hom).unwrap();
    for j in 3..=g.ny - 2 {
        for i in 3..=g.nx - 2 {
            assert!((b.at(i, j) - 24.0).abs() <= 1e-8, "({i},{j}) {}", b.at(i, j));
        }
    }
    // with its own data as the clamped extension the stencil is exact up to the edge
    let bc = BoundaryCondition::from_data(BcKind::Clamped, g, quartic);
    let b = biharmonic(&Field::from_fn(g, quartic), &bc).unwrap();
    assert!(g.interior().all(|k| (b.as_slice()[k] - 24.0).abs() <= 1e-7));
}

#[test]
fn eigenfunction_orders() {
    let mut errs = Vec::new();
    for n in [7usize, 15, 31] {
        let g = Grid::new(n, n, 1.0, 1.5).unwrap();
        let f = Field::from_fn(g, |x, y| (PI * x / g.lx).sin() * (PI * y / g.ly).sin());
        let lam = PI * PI * (1.0 / (g.lx * g.lx) + 1.0 / (g.ly * g.ly));
        let bc = BoundaryCondition::homogeneous(BcKind::SimplySupported, g);
        let l = laplacian(&f, &bc).unwrap();
        let b = biharmonic(&f, &bc).unwrap();
        let el = g.interior().map(|k| (l.as_slice()[k] + lam * f.as_slice()[k]).abs()).fold(0.0, f64::max);
        let eb = g.interior().map(|k| (b.as_slice()[k] - lam * lam * f.as_slice()[k]).abs()).fold(0.0, f64::max);
        errs.push((el, eb));
    }
    for w in errs.windows(2) {
        let (rl, rb) = (w[0].0 / w[1].0, w[0].1 / w[1].1);
        assert!((3.5..4.5).contains(&rl), "laplacian ratio {rl}");
        assert!((3.5..4.5).contains(&rb), "biharmonic ratio {rb}");
    }
}

/// Dense matrix of `f ↦ Δ_h² f` over interior unknowns with homogeneous data.
fn dense_biharmonic(g: &Grid, kind: BcKind) -> DMatrix<f64> {
    let ids: Vec<usize> = g.interior().collect();
    let bc = BoundaryCondition::homogeneous(kind, *g);
    let mut m = DMatrix::zeros(ids.len(), ids.len());
    for (c, &k) in ids.iter().enumerate() {
        let mut e = Field::zeros(*g);
        e.as_mut_slice()[k] = 1.0;
        let col = biharmonic(&e, &bc).unwrap();
        for (r, &kr) in ids.iter().enumerate() {
            m[(r, c)] = col.as_slice()[kr];
        }
    }
    m
}

#[test]
fn assembled_operators_are_symmetric_and_clamped_is_definite() {
    let g = Grid::new(6, 5, 1.0, 0.8).unwrap();
    for kind in [BcKind::Clamped, BcKind::SimplySupported] {
        let m = dense_biharmonic(&g, kind);
        let scale = m.amax();
        assert!((&m - m.transpose()).amax() <= 1e-12 * scale, "{kind:?}");
    }
    let m = dense_biharmonic(&g, BcKind::Clamped);
    assert!(m.clone().cholesky().is_some());
    let op = AiryOperator::new(g).unwrap();
    assert!((op.matrix().to_dense() - &m).amax() <= 1e-12 * m.amax());
}

#[test]
fn bracket_examples() {
    let g = Grid::new(6, 7, 1.2, 1.0).unwrap();
    let x2 = Field::from_fn(g, |x, _| x * x);
    let y2 = Field::from_fn(g, |_, y| y * y);
    let xy = Field::from_fn(g, |x, y| x * y);
    let a = vk_bracket(&x2, &y2).unwrap();
    let b = vk_bracket(&xy, &xy).unwrap();
    assert!(g.interior().all(|k| (a.as_slice()[k] - 4.0).abs() <= 1e-10));
    assert!(g.interior().all(|k| (b.as_slice()[k] + 2.0).abs() <= 1e-10));
}

#[test]
fn vector_operator_examples() {
    let g = Grid::new(5, 6, 1.0, 1.1).unwrap();
    let id = sym_grad(&VecField::new(Field::from_fn(g, |x, _| x), Field::from_fn(g, |_, y| y)).unwrap());
    let tr = trace(&id);
    let shear = sym_grad(&VecField::new(Field::from_fn(g, |_, y| y), Field::zeros(g)).unwrap());
    let ones = SymTensorField::new(Field::constant(g, 1.0), Field::constant(g, 1.0), Field::zeros(g)).unwrap();
    let dv = div_tensor(&ones);
    let d = div(&VecField::new(Field::from_fn(g, |x, _| 3.0 * x), Field::from_fn(g, |_, y| -y)).unwrap());
    for j in 0..g.my() {
        for i in 0..g.mx() {
            assert!((id.c11.at(i, j) - 1.0).abs() <= 1e-12 && (id.c22.at(i, j) - 1.0).abs() <= 1e-12);
            assert!(id.c12.at(i, j).abs() <= 1e-12);
            assert!((tr.at(i, j) - 2.0).abs() <= 1e-12);
            assert!(shear.c11.at(i, j).abs() <= 1e-12 && shear.c22.at(i, j).abs() <= 1e-12);
            assert!((shear.c12.at(i, j) - 0.5).abs() <= 1e-12);
            assert!(dv.c[0].at(i, j).abs() <= 1e-12 && dv.c[1].at(i, j).abs() <= 1e-12);
            assert!((d.at(i, j) - 2.0).abs() <= 1e-12);
        }
    }
}

#[test]
fn airy_matches_dense_solve_on_nine_by_nine() {
    let g = Grid::unit_square(9).unwrap();
    let op = AiryOperator::new(g).unwrap();
    for seed in 0..4 {
        let u = random_field(g, 100 + seed, false);
        let v = random_field(g, 200 + seed, false);
        let phi = solve_airy(&op, &u, &v).unwrap();
        let want = dense_airy(&g, &vk_bracket(&u, &v).unwrap());
        let err = rel_err(phi.as_slice(), want.as_slice());
        assert!(err <= 1e-10, "relative error {err}");
        let swapped = solve_airy(&op, &v, &u).unwrap();
        assert!(rel_err(swapped.as_slice(), phi.as_slice()) <= 1e-12);
    }
}

#[test]
fn airy_of_linear_field_vanishes() {
    let g = Grid::new(7, 6, 1.0, 0.7).unwrap();
    let op = AiryOperator::new(g).unwrap();
    let u = Field::from_fn(g, |x, y| 0.4 - x + 3.0 * y);
    let phi = solve_airy(&op, &u, &random_field(g, 5, false)).unwrap();
    assert!(phi.interior_max_abs() <= 1e-9);
}

#[test]
fn coupling_energy_identity() {
    let g = Grid::new(9, 8, 1.0, 0.9).unwrap();
    let op = AiryOperator::new(g).unwrap();
    let e0 = 1.7;
    for seed in 0..5 {
        let u = random_field(g, 300 + seed, true);
        let udot = random_field(g, 400 + seed, true);
        let force = evk_operator(&u, &udot, e0, 0.0, &op, EvkMode::ShortMemory).unwrap();
        let lhs = force.interior_dot(&u);
        let phi = solve_airy(&op, &u, &u).unwrap();
        let rhs = e0 * laplacian_energy(&g, &phi);
        assert!(rhs > 0.0);
        assert!((lhs - rhs).abs() <= 1e-8 * rhs, "{lhs} vs {rhs}");
        // with no velocity the viscous part drops out
        let still = evk_operator(&u, &Field::zeros(g), e0, 0.9, &op, EvkMode::ShortMemory).unwrap();
        assert!(rel_err(still.as_slice(), force.as_slice()) <= 1e-13);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bracket_is_symmetric(seed in any::<u64>()) {
        let g = Grid::new(6, 5, 1.0, 0.8).unwrap();
        let (u, v) = (random_field(g, seed, false), random_field(g, seed ^ 0xabc, false));
        let (uv, vu) = (vk_bracket(&u, &v).unwrap(), vk_bracket(&v, &u).unwrap());
        prop_assert_eq!(uv.as_slice(), vu.as_slice());
    }

    #[test]
    fn laplacian_is_self_adjoint(seed in any::<u64>()) {
        let g = Grid::new(7, 6, 1.0, 1.3).unwrap();
        let (f, h) = (random_field(g, seed, true), random_field(g, seed ^ 0x5f, true));
        for kind in [BcKind::Clamped, BcKind::SimplySupported] {
            let bc = BoundaryCondition::homogeneous(kind, g);
            let a = laplacian(&f, &bc).unwrap().interior_dot(&h);
            let b = f.interior_dot(&laplacian(&h, &bc).unwrap());
            prop_assert!((a - b).abs() <= 1e-12 * (a.abs() + b.abs() + 1.0));
        }
    }

    #[test]
    fn airy_is_bilinear_and_homogeneous(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let g = Grid::unit_square(7).unwrap();
        let op = AiryOperator::new(g).unwrap();
        let (u1, u2, v) = (random_field(g, seed, false), random_field(g, seed ^ 1, false), random_field(g, seed ^ 2, false));
        let combo = Field::from_vec(g, u1.as_slice().iter().zip(u2.as_slice()).map(|(x, y)| a * x + b * y).collect()).unwrap();
        let lhs = solve_airy(&op, &combo, &v).unwrap();
        let p1 = solve_airy(&op, &u1, &v).unwrap();
        let p2 = solve_airy(&op, &u2, &v).unwrap();
        let rhs: Vec<f64> = p1.as_slice().iter().zip(p2.as_slice()).map(|(x, y)| a * x + b * y).collect();
        let scale = a.abs() * p1.interior_max_abs() + b.abs() * p2.interior_max_abs() + 1e-300;
        let diff = lhs.as_slice().iter().zip(&rhs).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        prop_assert!(diff <= 1e-12 * scale);
        // the H2-type seminorm is homogeneous of degree one in each argument
        let n1 = op.energy_norm_sq(p1.as_slice()).sqrt();
        let scaled = Field::from_vec(g, u1.as_slice().iter().map(|x| 2.5 * x).collect()).unwrap();
        let ns = op.energy_norm_sq(solve_airy(&op, &scaled, &v).unwrap().as_slice()).sqrt();
        prop_assert!((ns - 2.5 * n1).abs() <= 1e-12 * ns);
    }
}
