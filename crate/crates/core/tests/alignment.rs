use proptest::prelude::*;
use vedit_core::align::*;
use vedit_core::{DepthMap, Mask};

fn ramp(w: usize, h: usize, seed: u64) -> DepthMap {
    DepthMap::from_fn(w, h, |x, y| {
        let k = (x * 31 + y * 17 + seed as usize * 7) % 97;
        Some(1.0 + x as f64 * 0.05 + y as f64 * 0.02 + k as f64 * 0.01)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn affine_pairs_are_recovered(s0 in 0.1f64..10.0, t0 in -5.0f64..5.0, seed in 0u64..1000) {
        let d = ramp(24, 16, seed);
        let d_hat = DepthMap::from_fn(24, 16, |x, y| d.get(x, y).map(|v| (v - t0) / s0));
        let mask = Mask::rect(24, 16, 5, 5, 10, 10);
        let a = solve_alignment(&d_hat, &d, &unedited_region(&mask, 0)).unwrap();
        prop_assert!((a.scale - s0).abs() <= 1e-9 * s0);
        prop_assert!((a.shift - t0).abs() <= 1e-9 * t0.abs().max(1.0));
        prop_assert!(a.residual_rmse < 1e-9);
    }

    #[test]
    fn solution_is_a_minimum(seed in 0u64..1000, noise in 0.001f64..0.5) {
        let d = ramp(20, 12, seed);
        let d_hat = DepthMap::from_fn(20, 12, |x, y| {
            let wobble = (((x * 13 + y * 29 + seed as usize) % 11) as f64 - 5.0) * noise / 5.0;
            d.get(x, y).map(|v| 0.5 * v - 0.2 + wobble)
        });
        let keep = unedited_region(&Mask::rect(20, 12, 2, 2, 6, 6), 1);
        let a = solve_alignment(&d_hat, &d, &keep).unwrap();
        let e = alignment_energy(&d_hat, &d, &keep, a.scale, a.shift).unwrap();
        let delta = 1e-4;
        for (ds, dt) in [(delta, 0.0), (-delta, 0.0), (0.0, delta), (0.0, -delta)] {
            let e2 = alignment_energy(&d_hat, &d, &keep, a.scale + ds, a.shift + dt).unwrap();
            prop_assert!(e2 >= e, "E({ds},{dt}) = {e2} < {e}");
        }
    }

    #[test]
    fn merge_takes_one_branch_per_pixel(bits in proptest::collection::vec(any::<bool>(), 48), s in 0.5f64..3.0, t in -1.0f64..1.0) {
        let d_ori = ramp(8, 6, 3);
        let d_hat = ramp(8, 6, 9);
        let mask = Mask::from_bits(8, 6, bits);
        let a = manual_alignment(&d_hat, &d_ori, &unedited_region(&mask, 0), s, t).unwrap();
        let merged = merge_depth(&d_ori, &d_hat, &a, &mask).unwrap();
        for i in 0..48 {
            let want = if mask.get_index(i) {
                d_hat.get_index(i).unwrap() * s + t
            } else {
                d_ori.get_index(i).unwrap()
            };
            prop_assert_eq!(merged.get_index(i), Some(want));
        }
    }
}

#[test]
fn identical_depths_align_to_identity() {
    let d = ramp(16, 16, 1);
    let a = solve_alignment(&d, &d, &Mask::filled(16, 16, true)).unwrap();
    assert!((a.scale - 1.0).abs() < 1e-12 && a.shift.abs() < 1e-12);
}

#[test]
fn constant_relative_depth_is_degenerate() {
    let d = ramp(8, 8, 0);
    let flat = DepthMap::constant(8, 8, 0.5);
    assert!(matches!(
        solve_alignment(&flat, &d, &Mask::filled(8, 8, true)),
        Err(vedit_core::Error::DegenerateAlignment { .. })
    ));
}
