//! Property-based invariants of the core grid operations, stencils,
//! solver coefficients, and metrics.

use divflow_core::divflow::pixel_coefficients;
use divflow_core::field::{FlowField, GridSpec, ScalarSlice, VectorSlice};
use divflow_core::metrics::{divergence_metric, magnitude_mse, mse};
use divflow_core::reconstruct::{linear_midpoint, warp_average};
use divflow_core::stencils::{derive, DerivKind};
use proptest::prelude::*;

fn finite_val() -> impl Strategy<Value = f64> {
    -100.0..100.0f64
}

fn small_grid() -> impl Strategy<Value = GridSpec> {
    (3usize..8, 3usize..8, 0.1..2.0f64, 0.1..2.0f64)
        .prop_map(|(nx, ny, dx, dy)| GridSpec::new(nx, ny, dx, dy).unwrap())
}

fn slice_for(grid: GridSpec) -> impl Strategy<Value = ScalarSlice> {
    proptest::collection::vec(finite_val(), grid.len())
        .prop_map(move |v| ScalarSlice::new(grid, v).unwrap())
}

fn grid_and_slices(n: usize) -> impl Strategy<Value = Vec<ScalarSlice>> {
    small_grid().prop_flat_map(move |g| proptest::collection::vec(slice_for(g), n))
}

proptest! {
    #[test]
    fn bilinear_exact_on_affine_functions(
        g in small_grid(),
        a in -5.0..5.0f64,
        b in -5.0..5.0f64,
        c in -5.0..5.0f64,
        fx in 0.0..1.0f64,
        fy in 0.0..1.0f64,
    ) {
        let s = ScalarSlice::from_fn(g, |x, y| a * x as f64 + b * y as f64 + c).unwrap();
        // a strictly in-range sample point
        let px = fx * (g.nx - 1) as f64;
        let py = fy * (g.ny - 1) as f64;
        let want = a * px + b * py + c;
        prop_assert!((s.bilinear_sample(px, py) - want).abs() < 1e-9);
    }

    #[test]
    fn pad_then_crop_is_identity(
        slices in grid_and_slices(1),
        extra_w in 0usize..6,
        extra_h in 0usize..6,
        fill in finite_val(),
    ) {
        let s = &slices[0];
        let g = s.grid();
        let padded = s.pad_to(g.nx + extra_w, g.ny + extra_h, fill).unwrap();
        let back = padded.crop_center(g.nx, g.ny).unwrap();
        prop_assert_eq!(back.values(), s.values());
    }

    #[test]
    fn stencils_are_linear(
        slices in grid_and_slices(2),
        a in -3.0..3.0f64,
        b in -3.0..3.0f64,
    ) {
        let (f, h) = (&slices[0], &slices[1]);
        let g = f.grid();
        let combo = ScalarSlice::new(
            g,
            f.values().iter().zip(h.values()).map(|(&x, &y)| a * x + b * y).collect(),
        ).unwrap();
        for kind in [DerivKind::Dx, DerivKind::Dy, DerivKind::Dxx, DerivKind::Dyy, DerivKind::Dxy] {
            let lhs = derive(&combo, kind).unwrap();
            let df = derive(f, kind).unwrap();
            let dh = derive(h, kind).unwrap();
            for i in 0..g.len() {
                let rhs = a * df.values()[i] + b * dh.values()[i];
                prop_assert!((lhs.values()[i] - rhs).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn mse_is_symmetric_nonnegative_and_zero_on_self(slices in grid_and_slices(6)) {
        let va = VectorSlice::new(slices[0].clone(), slices[1].clone(), slices[2].clone()).unwrap();
        let vb = VectorSlice::new(slices[3].clone(), slices[4].clone(), slices[5].clone()).unwrap();
        let g = va.grid();
        let region = g.nx.min(g.ny);
        let ab = mse(&va, &vb, region).unwrap();
        let ba = mse(&vb, &va, region).unwrap();
        prop_assert_eq!(ab.to_bits(), ba.to_bits());
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(mse(&va, &va, region).unwrap(), 0.0);
        // reverse triangle inequality per pixel
        prop_assert!(magnitude_mse(&va, &vb, region).unwrap() <= ab + 1e-9);
    }

    #[test]
    fn divergence_metric_rms_dominates_mean_abs(slices in grid_and_slices(1)) {
        let s = &slices[0];
        let g = s.grid();
        let r = divergence_metric(s, g.nx.min(g.ny)).unwrap();
        prop_assert!(r.l2 >= r.mean_abs - 1e-12);
        prop_assert!(r.mean_abs >= 0.0);
    }

    #[test]
    fn warp_average_is_bounded_by_input_range(slices in grid_and_slices(4)) {
        let g = slices[0].grid();
        let zeros = ScalarSlice::zeros(g);
        let lower = VectorSlice::new(slices[0].clone(), zeros.clone(), zeros.clone()).unwrap();
        let upper = VectorSlice::new(slices[1].clone(), zeros.clone(), zeros.clone()).unwrap();
        let flow = FlowField::new(
            slices[2].map(|v| v * 0.05).unwrap(),
            slices[3].map(|v| v * 0.05).unwrap(),
        ).unwrap();
        let lo = slices[0].values().iter().chain(slices[1].values())
            .fold(f64::INFINITY, |m, &v| m.min(v));
        let hi = slices[0].values().iter().chain(slices[1].values())
            .fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let out = warp_average(&lower, &upper, &flow).unwrap();
        for &v in out.vx().values() {
            prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
        }
        // zero flow reduces exactly to the linear midpoint
        let mid = warp_average(&lower, &upper, &FlowField::zeros(g)).unwrap();
        let lin = linear_midpoint(&lower, &upper).unwrap();
        prop_assert_eq!(mid.vx().values(), lin.vx().values());
    }

    #[test]
    fn coefficient_identities_and_denominator_bound(
        hx in finite_val(), hy in finite_val(), hz in finite_val(),
        dx in finite_val(), dy in finite_val(), dz in finite_val(),
        gamma in 0.0..200.0f64,
        lambda in 0.05..10.0f64,
    ) {
        let k = pixel_coefficients(hx, hy, hz, dx, dy, dz, gamma, lambda);
        prop_assert_eq!(k.a2.to_bits(), k.b1.to_bits());
        prop_assert_eq!(k.d3.to_bits(), k.d1.to_bits());
        prop_assert_eq!(k.d4.to_bits(), k.d2.to_bits());
        let l2 = lambda * lambda;
        let g2 = gamma * gamma;
        prop_assert!(g2 * k.d1 + l2 * k.d2 >= l2 * l2);
        prop_assert!(k.d1 >= 0.0);
        // symmetry of the energy in (x, alpha) <-> (y, beta): exchanging
        // hx<->hy and dx<->dy exchanges the two update rows (up to rounding;
        // the cross term is evaluated in the opposite order)
        let swapped = pixel_coefficients(hy, hx, hz, dy, dx, dz, gamma, lambda);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
        prop_assert!(close(swapped.a1, k.b2));
        prop_assert!(close(swapped.b2, k.a1));
        prop_assert!(close(swapped.c1, k.c3));
        prop_assert!(close(swapped.c2, k.c4));
    }
}
