use proptest::prelude::*;
use rfa_core::autodiff::Graph;
use rfa_core::layers::{shared_weight_audit, Ctx, Mode, ParamStore, RfaConvLayer};
use rfa_core::ops::unfold::rf_unrearrange_tensor;
use rfa_core::ops::{rf_extract_groupconv, rf_rearrange, selector_weights, softmax_axis, unfold, ConvParams};
use rfa_core::tensor::ReduceOp;
use rfa_core::{SeededRng, Tensor};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn selector_extraction_is_unfold(
        k in 1usize..6, stride in 1usize..3, pad_sel in 0usize..3,
        c in 1usize..4, h in 5usize..10, w in 5usize..10, seed in any::<u64>(),
    ) {
        let padding = [0, k / 2, k - 1][pad_sel];
        let x = Tensor::randn(&[2, c, h, w], 1.0, &mut SeededRng::new(seed));
        let a = unfold(&x, k, stride, padding).unwrap();
        let p = ConvParams { weight: selector_weights(c, k), bias: None, stride, padding, groups: c };
        let b = rf_extract_groupconv(&x, &p).unwrap();
        prop_assert_eq!(a.as_tensor(), b.as_tensor());
    }

    #[test]
    fn rearrange_is_a_bijection(k in 1usize..5, c in 1usize..4, h in 1usize..5, w in 1usize..5, seed in any::<u64>()) {
        let f = Tensor::randn(&[2, c * k * k, h, w], 1.0, &mut SeededRng::new(seed));
        let feat = rfa_core::ops::RfFeature::from_tensor(f.clone(), c, k).unwrap();
        let big = rf_rearrange(&feat).unwrap();
        prop_assert_eq!(big.shape(), &[2, c, h * k, w * k]);
        prop_assert_eq!(rf_unrearrange_tensor(&big, k).unwrap(), f);
    }

    #[test]
    fn attention_sums_to_one(c in 1usize..5, k in 1usize..6, stride in 1usize..3, seed in any::<u64>()) {
        let mut s = ParamStore::new();
        let mut rng = SeededRng::new(seed);
        let l = RfaConvLayer::new(&mut s, &mut rng, "rfa", c, 2, k, stride);
        let mut g = Graph::new();
        let x = g.input(Tensor::randn(&[2, c, 7, 6], 2.0, &mut rng));
        let a = l.attention(&mut g, &Ctx::new(&s, Mode::Eval), x).unwrap();
        let shape = g.shape(a).to_vec();
        let grouped = g.value(a).reshape(&[2 * c, k * k, shape[2], shape[3]]).unwrap();
        let sums = grouped.reduce(&[1], ReduceOp::Sum).unwrap();
        prop_assert!(sums.data().iter().all(|v| (v - 1.0).abs() <= 1e-12));
    }

    #[test]
    fn overlapping_windows_share_pixel_attention(k in 2usize..5, h in 5usize..9, seed in any::<u64>()) {
        let a = Tensor::uniform(&[1, 1, h, h], 0.0, 1.0, &mut SeededRng::new(seed));
        let r = shared_weight_audit(&a, k).unwrap();
        prop_assert!(r.passed());
        prop_assert!(r.shared_pairs > 0);
        prop_assert!(r.window_dof > r.pixel_dof);
    }
}

#[test]
fn window_logits_are_independent() {
    // perturbing one window's logits moves only that window's attention column
    let mut rng = SeededRng::new(3);
    let (c, kk, h, w) = (2, 9, 4, 5);
    let logits = Tensor::randn(&[c, kk, h, w], 1.0, &mut rng);
    let base = softmax_axis(&logits, 1).unwrap();
    let mut bumped = logits.clone();
    for j in 0..kk {
        let i = bumped.index4(1, j, 2, 3);
        bumped.data_mut()[i] += 0.3 * j as f64;
    }
    let moved = softmax_axis(&bumped, 1).unwrap();
    for ch in 0..c {
        for j in 0..kk {
            for y in 0..h {
                for x in 0..w {
                    let same = base.at4(ch, j, y, x) == moved.at4(ch, j, y, x);
                    if !(ch == 1 && y == 2 && x == 3) {
                        assert!(same);
                    }
                }
            }
        }
    }
    let col_changed = (0..kk).any(|j| base.at4(1, j, 2, 3) != moved.at4(1, j, 2, 3));
    assert!(col_changed);
}
