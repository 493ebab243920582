//! Randomized invariants of the tensor algebra, penalties, losses and file format.

mod common;

use approx::assert_relative_eq;
use common::{rel_tensor_diff, rng};
use lowrank_tensor::config::{parse_config, ExperimentConfig};
use lowrank_tensor::io::{decode_tensor, encode_tensor};
use lowrank_tensor::loss::{CompletionLoss, SmoothLoss};
use lowrank_tensor::penalty::{prox_s1, PenaltyKind, PenaltyParams};
use lowrank_tensor::synth::{gaussian_tensor, make_mask, synth_low_multirank};
use lowrank_tensor::tensor::{apply_transform, fro_norm, inner, inverse_transform, project_box};
use lowrank_tensor::transform::{
    data_driven_transform, dct_transform, identity_transform, OrthogonalTransform,
};
use lowrank_tensor::tsvd::{multi_rank, spectral_norm_u, t_svd, ttnn};
use lowrank_tensor::Tensor3;
use proptest::prelude::*;

type Shape = (usize, usize, usize);

fn shape() -> impl Strategy<Value = Shape> {
    (1usize..=6, 1usize..=5, 1usize..=4)
}

fn tensor(dims: Shape, seed: u64) -> Tensor3 {
    gaussian_tensor(dims, &mut rng(seed))
}

fn transform_for(which: u8, x: &Tensor3) -> OrthogonalTransform {
    match which % 3 {
        0 => identity_transform(x.n3()),
        1 => dct_transform(x.n3()),
        _ => data_driven_transform(x).unwrap(),
    }
}

fn penalty(kind: u8, lambda: f64, gamma: f64) -> PenaltyParams {
    match kind % 4 {
        0 => PenaltyParams::new(PenaltyKind::Mcp, lambda, gamma).unwrap(),
        1 => PenaltyParams::new(PenaltyKind::Scad, lambda, gamma + 1.0).unwrap(),
        2 => PenaltyParams::new(PenaltyKind::Log, lambda, gamma).unwrap(),
        _ => PenaltyParams::convex(lambda).unwrap(),
    }
}

fn sum(a: &Tensor3, b: &Tensor3) -> Tensor3 {
    let mut out = a.clone();
    out.axpy(1.0, b).unwrap();
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transforms_are_isometries(dims in shape(), seed in any::<u64>(), which in any::<u8>()) {
        let x = tensor(dims, seed);
        let u = transform_for(which, &tensor(dims, seed ^ 1));
        let xh = apply_transform(&x, &u).unwrap();
        assert_relative_eq!(fro_norm(&xh), fro_norm(&x), max_relative = 1e-12);
        prop_assert!(rel_tensor_diff(&inverse_transform(&xh, &u).unwrap(), &x) < 1e-12);
    }

    #[test]
    fn tsvd_reconstructs(dims in shape(), seed in any::<u64>(), which in any::<u8>()) {
        let x = tensor(dims, seed);
        let u = transform_for(which, &x);
        let f = t_svd(&x, &u).unwrap();
        prop_assert!(rel_tensor_diff(&f.reconstruct().unwrap(), &x) < 1e-10);
        for s in &f.sigma {
            prop_assert!(s.windows(2).all(|w| w[0] >= w[1]));
            prop_assert!(s.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn ttnn_is_a_norm(dims in shape(), seed in any::<u64>(), which in any::<u8>(), c in -5.0f64..5.0) {
        let (x, y) = (tensor(dims, seed), tensor(dims, seed ^ 7));
        let u = transform_for(which, &x);
        let (nx, ny) = (ttnn(&x, &u).unwrap(), ttnn(&y, &u).unwrap());
        prop_assert!(ttnn(&sum(&x, &y), &u).unwrap() <= nx + ny + 1e-10);
        assert_relative_eq!(ttnn(&x.scale(c), &u).unwrap(), c.abs() * nx, max_relative = 1e-10, epsilon = 1e-12);
        // The nuclear norm dominates the Frobenius norm, which dominates the spectral norm.
        let s = spectral_norm_u(&x, &u).unwrap();
        prop_assert!(s <= fro_norm(&x) + 1e-10 && fro_norm(&x) <= nx + 1e-10);
    }

    #[test]
    fn holder_pairing(dims in shape(), seed in any::<u64>(), which in any::<u8>()) {
        let (x, y) = (tensor(dims, seed), tensor(dims, seed ^ 3));
        let u = transform_for(which, &x);
        let bound = ttnn(&x, &u).unwrap() * spectral_norm_u(&y, &u).unwrap();
        prop_assert!(inner(&x, &y).unwrap().abs() <= bound * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn prox_is_nonexpansive(dims in shape(), seed in any::<u64>(), which in any::<u8>(), theta in 0.05f64..3.0) {
        let (a, b) = (tensor(dims, seed), tensor(dims, seed ^ 5));
        let u = transform_for(which, &a);
        let p = PenaltyParams::convex(1.0).unwrap();
        let pa = prox_s1(&a, theta, &u, &p).unwrap();
        let pb = prox_s1(&b, theta, &u, &p).unwrap();
        let mut d = pa.clone();
        d.axpy(-1.0, &pb).unwrap();
        let mut e = a.clone();
        e.axpy(-1.0, &b).unwrap();
        prop_assert!(fro_norm(&d) <= fro_norm(&e) * (1.0 + 1e-12) + 1e-12);
        // Shrinkage never increases the norm and lowers every multi-rank entry.
        prop_assert!(ttnn(&pa, &u).unwrap() <= ttnn(&a, &u).unwrap() + 1e-10);
        let (ra, rp) = (multi_rank(&a, &u, 1e-10).unwrap(), multi_rank(&pa, &u, 1e-10).unwrap());
        prop_assert!(rp.ranks.iter().zip(&ra.ranks).all(|(p, a)| p <= a));
    }

    #[test]
    fn scalar_penalty_structure(
        kind in any::<u8>(),
        lambda in 0.1f64..3.0,
        gamma in 1.1f64..5.0,
        x in 0.0f64..20.0,
        y in 0.0f64..20.0,
    ) {
        let p = penalty(kind, lambda, gamma);
        let (k0, mu) = (p.k0(), p.mu());
        let g = |t: f64| p.g(t).unwrap();
        // DC split.
        assert_relative_eq!(g(x), p.s1(x).unwrap() - p.s2(x).unwrap(), epsilon = 1e-10, max_relative = 1e-12);
        // Slope bounds and nuclear-norm lower bound.
        let d = p.g_derivative(x).unwrap();
        prop_assert!(d >= -1e-12 && d <= lambda * k0 + 1e-12);
        prop_assert!(lambda * k0 * x <= g(x) + 0.5 * mu * x * x + 1e-9);
        // Weak convexity: g + (mu/2) x^2 is midpoint convex.
        let w = |t: f64| g(t) + 0.5 * mu * t * t;
        prop_assert!(w(0.5 * (x + y)) <= 0.5 * (w(x) + w(y)) + 1e-9);
        // s2' is monotone and mu-Lipschitz.
        let (dx, dy) = (p.s2_derivative(x).unwrap(), p.s2_derivative(y).unwrap());
        prop_assert!((dx - dy) * (x - y) >= -1e-12);
        prop_assert!((dx - dy).abs() <= mu * (x - y).abs() + 1e-12);
    }

    #[test]
    fn box_projection(dims in shape(), seed in any::<u64>(), c in 0.01f64..3.0) {
        let x = tensor(dims, seed).scale(3.0);
        let p = project_box(&x, c).unwrap();
        prop_assert!(p.inf_norm() <= c);
        prop_assert_eq!(project_box(&p, c).unwrap(), p);
    }

    #[test]
    fn completion_loss_at_truth(dims in shape(), seed in any::<u64>(), sr in 0.05f64..1.0) {
        prop_assume!((sr * (dims.0 * dims.1 * dims.2) as f64).round() >= 1.0);
        let y = tensor(dims, seed);
        let mask = make_mask(dims, sr, seed).unwrap();
        let loss = CompletionLoss::new(&y, mask.clone()).unwrap();
        prop_assert_eq!(loss.value(&y).unwrap(), 0.0);
        prop_assert!(fro_norm(&loss.grad(&y).unwrap()) == 0.0);
        prop_assert_eq!(mask.apply(&mask.apply(&y).unwrap()).unwrap(), mask.apply(&y).unwrap());
    }

    #[test]
    fn format_round_trip_is_byte_exact(dims in shape(), seed in any::<u64>()) {
        let x = tensor(dims, seed);
        let mut bytes = Vec::new();
        encode_tensor(&x, &mut bytes).unwrap();
        prop_assert_eq!(bytes.len(), 16 + 8 * x.len());
        let (back, end) = decode_tensor(&bytes, 0).unwrap();
        prop_assert_eq!(end, bytes.len());
        let mut again = Vec::new();
        encode_tensor(&back, &mut again).unwrap();
        prop_assert_eq!(again, bytes);
        prop_assert_eq!(back, x);
    }

    #[test]
    fn synthetic_truth_is_seeded_and_low_rank(n1 in 2usize..8, n2 in 2usize..8, n3 in 1usize..5, seed in any::<u64>()) {
        let u = dct_transform(n3);
        let r = 1 + (seed as usize) % n1.min(n2);
        let a = synth_low_multirank((n1, n2, n3), r, &u, seed).unwrap();
        prop_assert_eq!(&a, &synth_low_multirank((n1, n2, n3), r, &u, seed).unwrap());
        prop_assert!(multi_rank(&a, &u, 1e-8).unwrap().ranks.iter().all(|&k| k <= r));
    }
}

#[test]
fn config_survives_json_round_trip() {
    let cfg = ExperimentConfig {
        lambda_grid: Some(vec![1.0, 2.0]),
        rho: Some(3.0),
        ..ExperimentConfig::default()
    };
    let text = serde_json::to_string(&cfg).unwrap();
    assert_eq!(parse_config(&text).unwrap(), cfg);
}
