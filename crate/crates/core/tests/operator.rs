use std::f64::consts::PI;

use holodof::em_kernel::FREE_SPACE_IMPEDANCE;
use holodof::spectrum::{coupling_spectrum_via_gram, gram_eigenvalues};
use holodof::*;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn anchor(n: usize) -> (QuadratureGrid, QuadratureGrid, WaveConfig) {
    let wave = WaveConfig::new(0.01).unwrap();
    let tx = PlanarSurface::broadside(Vec3::zeros(), 0.5, 0.5).unwrap();
    let rx = PlanarSurface::broadside(Vec3::new(0.0, 0.0, 10.0), 0.5, 0.5).unwrap();
    (
        discretize(&tx, n, n, QuadratureRule::Midpoint).unwrap(),
        discretize(&rx, n, n, QuadratureRule::Midpoint).unwrap(),
        wave,
    )
}

// Written out from the scalar Green function so it does not share code with
// the library kernel.
fn reference_kernel(r: &Vec3, t: &Vec3, lambda: f64) -> Complex64 {
    let d = (r - t).norm();
    let k0 = 2.0 * PI / lambda;
    let phase = Complex64::new((k0 * d).cos(), -(k0 * d).sin());
    Complex64::new(0.0, FREE_SPACE_IMPEDANCE) * phase / (2.0 * lambda * d)
}

fn reference_matrix(tx: &QuadratureGrid, rx: &QuadratureGrid, lambda: f64) -> DMatrix<Complex64> {
    DMatrix::from_fn(rx.len(), tx.len(), |m, n| {
        reference_kernel(&rx.points()[m], &tx.points()[n], lambda) * (rx.weights()[m] * tx.weights()[n]).sqrt()
    })
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

#[test]
fn entries_match_weighted_green_function() {
    let (tx, rx, wave) = anchor(6);
    let op = assemble_operator(&tx, &rx, &wave).unwrap();
    let oracle = reference_matrix(&tx, &rx, 0.01);
    for m in 0..rx.len() {
        for n in 0..tx.len() {
            let a = op.matrix()[(m, n)];
            assert!((a - oracle[(m, n)]).norm() <= 1e-12 * oracle[(m, n)].norm());
        }
    }
}

#[test]
fn adjoint_identity_on_random_pairs() {
    let (tx, rx, wave) = anchor(10);
    let op = assemble_operator(&tx, &rx, &wave).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let f = random_vec(&mut rng, op.n_tx());
        let g = random_vec(&mut rng, op.n_rx());
        let scale = holodof::em_kernel::norm(&op.apply(&f).unwrap()) * holodof::em_kernel::norm(&g);
        assert!(op.adjoint_identity_residual(&f, &g).unwrap() <= 1e-12 * scale);
    }
}

#[test]
fn singular_values_match_independent_svd() {
    let (tx, rx, wave) = anchor(9);
    let op = assemble_operator(&tx, &rx, &wave).unwrap();
    let spec = coupling_spectrum(&op).unwrap();
    let mut oracle: Vec<f64> = reference_matrix(&tx, &rx, 0.01)
        .singular_values()
        .iter()
        .map(|s| s * s)
        .collect();
    oracle.sort_by(|a, b| b.total_cmp(a));
    let top = oracle[0];
    assert_eq!(spec.len(), oracle.len());
    for (a, b) in spec.values().iter().zip(&oracle) {
        assert!((a - b).abs() <= 1e-10 * top, "{a} vs {b}");
    }
}

#[test]
fn gram_and_svd_routes_agree() {
    let (tx, rx, wave) = anchor(8);
    let op = assemble_operator(&tx, &rx, &wave).unwrap();
    let svd = coupling_spectrum(&op).unwrap();
    let gram = coupling_spectrum_via_gram(&op).unwrap();
    let rx_side = gram_eigenvalues(&op, Side::Rx).unwrap();
    let top = svd.op_norm();
    for ((a, b), c) in svd.values().iter().zip(gram.values()).zip(&rx_side) {
        assert!((a - b).abs() <= 1e-10 * top);
        assert!((a - c).abs() <= 1e-10 * top);
    }
}

#[test]
fn hilbert_schmidt_norm_is_spectrum_sum() {
    let (tx, rx, wave) = anchor(8);
    let op = assemble_operator(&tx, &rx, &wave).unwrap();
    let spec = coupling_spectrum(&op).unwrap();
    let hs = op.hilbert_schmidt_norm_sq();
    assert!((hs - spec.total()).abs() <= 1e-10 * hs);

    // Every entry has modulus η/(2λd)·√(w w'), so near broadside the total is
    // close to (η/(2λd))² A_tx A_rx.
    let paraxial = (FREE_SPACE_IMPEDANCE / (2.0 * 0.01 * 10.0)).powi(2) * 0.25 * 0.25;
    assert!((hs - paraxial).abs() / paraxial < 0.01);
}

#[test]
fn rank_is_bounded_by_smaller_grid() {
    let wave = WaveConfig::new(0.01).unwrap();
    let tx = PlanarSurface::broadside(Vec3::zeros(), 0.5, 0.5).unwrap();
    let rx = PlanarSurface::broadside(Vec3::new(0.0, 0.0, 10.0), 0.5, 0.5).unwrap();
    let tg = discretize(&tx, 3, 4, QuadratureRule::Midpoint).unwrap();
    let rg = discretize(&rx, 5, 5, QuadratureRule::GaussLegendre).unwrap();
    let op = assemble_operator(&tg, &rg, &wave).unwrap();
    assert_eq!((op.n_rx(), op.n_tx()), (25, 12));
    assert_eq!(coupling_spectrum(&op).unwrap().len(), 12);
}

#[test]
fn physical_field_of_point_source() {
    let wave = WaveConfig::new(0.01).unwrap();
    let tx = PlanarSurface::broadside(Vec3::zeros(), 0.01, 0.01).unwrap();
    let rx = PlanarSurface::broadside(Vec3::new(0.3, -0.2, 5.0), 0.2, 0.2).unwrap();
    let tg = discretize(&tx, 1, 1, QuadratureRule::Midpoint).unwrap();
    let rg = discretize(&rx, 3, 3, QuadratureRule::Midpoint).unwrap();
    let op = assemble_operator(&tg, &rg, &wave).unwrap();
    let e = op.apply_physical(&[Complex64::new(2.0, 0.0)]).unwrap();
    for (field, q) in e.iter().zip(rg.points()) {
        let expected = reference_kernel(q, &Vec3::zeros(), 0.01) * 1e-4 * 2.0;
        assert!((field - expected).norm() <= 1e-12 * expected.norm());
    }
}

#[test]
fn too_close_is_singular() {
    let wave = WaveConfig::new(0.01).unwrap();
    let tx = PlanarSurface::broadside(Vec3::zeros(), 0.5, 0.5).unwrap();
    let rx = PlanarSurface::broadside(Vec3::new(0.0, 0.0, 5e-4), 0.5, 0.5).unwrap();
    let tg = discretize(&tx, 4, 4, QuadratureRule::Midpoint).unwrap();
    let rg = discretize(&rx, 4, 4, QuadratureRule::Midpoint).unwrap();
    assert!(matches!(assemble_operator(&tg, &rg, &wave), Err(Error::SingularKernel { .. })));
}
