use holodof::spectrum::{weighted_inner, weighted_norm};
use holodof::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn link(n_tx: usize, n_rx: usize, rule: QuadratureRule) -> DiscreteOperator {
    let wave = WaveConfig::new(0.01).unwrap();
    let tx = PlanarSurface::broadside(Vec3::zeros(), 0.5, 0.5).unwrap();
    let rx = PlanarSurface::broadside(Vec3::new(0.1, 0.0, 4.0), 0.5, 0.5).unwrap();
    assemble_operator(
        &discretize(&tx, n_tx, n_tx, rule).unwrap(),
        &discretize(&rx, n_rx, n_rx, rule).unwrap(),
        &wave,
    )
    .unwrap()
}

#[test]
fn modes_map_onto_each_other() {
    let op = link(12, 12, QuadratureRule::Midpoint);
    let basis = extract_modes(&op, 10).unwrap();
    let s0 = basis.couplings()[0];
    let rx_w = basis.weights(Side::Rx);
    for n in 0..10 {
        let image = op.apply_physical(&basis.mode(Side::Tx, n)).unwrap();
        let psi = basis.mode(Side::Rx, n);
        let residual: Vec<Complex64> = image.iter().zip(&psi).map(|(e, p)| e - p * basis.couplings()[n]).collect();
        assert!(weighted_norm(&residual, rx_w) <= 1e-8 * s0);
        for m in 0..10 {
            if m != n {
                assert!(weighted_inner(&image, &basis.mode(Side::Rx, m), rx_w).norm() <= 1e-8 * s0);
            }
        }
    }
}

#[test]
fn modes_are_orthonormal_and_phase_fixed() {
    let op = link(10, 11, QuadratureRule::GaussLegendre);
    let basis = extract_modes(&op, 15).unwrap();
    for side in [Side::Tx, Side::Rx] {
        let g = basis.gram(side);
        for i in 0..basis.len() {
            for j in 0..basis.len() {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - Complex64::new(expected, 0.0)).norm() < 1e-10);
            }
        }
    }
    for n in 0..basis.len() {
        let phi = basis.mode(Side::Tx, n);
        let largest = phi.iter().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap();
        assert!(largest.im.abs() < 1e-12 * largest.norm() && largest.re > 0.0);
    }
    let spec = coupling_spectrum(&op).unwrap();
    for (s, v) in basis.couplings().iter().zip(spec.values()) {
        assert!((s * s - v).abs() <= 1e-10 * spec.op_norm());
    }
}

#[test]
fn full_basis_reconstructs_any_field() {
    let op = link(7, 7, QuadratureRule::Midpoint);
    let basis = extract_modes(&op, 49).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for side in [Side::Tx, Side::Rx] {
        let field: Vec<Complex64> = (0..49)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let coeffs = expand_field(&field, &basis, side).unwrap();
        let back = basis.synthesize(&coeffs, side).unwrap();
        let diff: Vec<Complex64> = field.iter().zip(&back).map(|(a, b)| a - b).collect();
        let w = basis.weights(side);
        assert!(weighted_norm(&diff, w) <= 1e-9 * weighted_norm(&field, w));
    }
}

#[test]
fn truncated_expansion_error_is_the_tail_energy() {
    let op = link(8, 8, QuadratureRule::Midpoint);
    let full = extract_modes(&op, 64).unwrap();
    let field = full.synthesize(&vec![Complex64::new(1.0, 0.0); 64], Side::Rx).unwrap();
    let head = extract_modes(&op, 10).unwrap();
    let approx = head.synthesize(&expand_field(&field, &head, Side::Rx).unwrap(), Side::Rx).unwrap();
    let diff: Vec<Complex64> = field.iter().zip(&approx).map(|(a, b)| a - b).collect();
    let err = weighted_norm(&diff, head.weights(Side::Rx));
    assert!((err * err - 54.0).abs() < 1e-8);
}

#[test]
fn kolmogorov_widths_follow_the_spectrum() {
    let op = link(8, 8, QuadratureRule::Midpoint);
    let spec = coupling_spectrum(&op).unwrap();
    let mut last = f64::INFINITY;
    for n in 0..spec.len() {
        let d = kolmogorov_width(&spec, n);
        assert!((d * d - spec.values()[n]).abs() <= 1e-12 * spec.op_norm());
        assert!(d <= last);
        last = d;
    }
    assert_eq!(kolmogorov_width(&spec, spec.len()), 0.0);
}

#[test]
fn leading_values_settle_under_refinement() {
    let coarse = coupling_spectrum(&link(16, 16, QuadratureRule::Midpoint)).unwrap();
    let fine = coupling_spectrum(&link(24, 24, QuadratureRule::Midpoint)).unwrap();
    let gauss = coupling_spectrum(&link(16, 16, QuadratureRule::GaussLegendre)).unwrap();
    for i in 0..10 {
        let f = fine.values()[i];
        assert!((coarse.values()[i] - f).abs() / f < 0.01);
        assert!((gauss.values()[i] - f).abs() / f < 0.01);
    }
}

#[test]
fn counts_shrink_as_threshold_rises() {
    let spec = coupling_spectrum(&link(10, 10, QuadratureRule::Midpoint)).unwrap();
    let mut last = usize::MAX;
    for g in [0.0, 1e-6, 0.01, 0.1, 0.5, 0.9, 1.0] {
        let n = count_edof(&spec, Threshold::relative(g)).unwrap().n_edof as usize;
        assert!(n <= last);
        last = n;
    }
    assert_eq!(last, 0);
    assert_eq!(count_edof(&spec, Threshold::absolute(0.0)).unwrap().n_edof as usize,
        spec.values().iter().filter(|v| **v > 0.0).count());
}
