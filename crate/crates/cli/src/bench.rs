//! RFAConv forward timing with unfold versus grouped-convolution feature
//! extraction. Medians only; ratios are reported, never asserted.

use std::fmt::Write;
use std::time::Instant;

use rfa_core::autodiff::Graph;
use rfa_core::layers::{Ctx, FeatureOverride, Mode, ParamStore, RfaConvLayer};
use rfa_core::ops::selector_weights;
use rfa_core::{SeededRng, Tensor};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub const REFERENCE_HEADER: &str =
    "# reference training hours (YOLOv5n on VisDrone, 300 epochs): baseline 6.81, unfold 10.42, groupconv 7.37";
pub const GATE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub path: &'static str,
    pub shape: Shape,
    pub median_ns: u128,
    /// This path's median over the grouped-convolution median.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Largest `|unfold − groupconv|` seen by the equivalence gate.
    pub gate_max_diff: f64,
}

pub fn grid(cfg: &RunConfig) -> Vec<Shape> {
    let mut v = Vec::new();
    for &c in &cfg.channels {
        for &hw in &cfg.bench_hw {
            v.push(Shape {
                n: cfg.bench_n,
                c,
                h: hw,
                w: hw,
                k: cfg.k,
            });
        }
    }
    v
}

/// The two paths share all weights; the grouped path uses selector weights.
fn layers(s: Shape, stride: usize, seed: u64) -> (ParamStore, RfaConvLayer, RfaConvLayer) {
    let mut store = ParamStore::new();
    let mut rng = SeededRng::new(seed);
    let grouped = RfaConvLayer::new(&mut store, &mut rng, "rfa", s.c, s.c, s.k, stride);
    store
        .set(grouped.feature.conv.weight, selector_weights(s.c, s.k))
        .expect("selector shape");
    let mut unfolded = grouped.clone();
    unfolded.feature.source = FeatureOverride::Unfold;
    (store, unfolded, grouped)
}

fn forward(layer: &RfaConvLayer, store: &ParamStore, x: &Tensor) -> Result<Tensor> {
    let mut g = Graph::new();
    let xv = g.input(x.clone());
    let y = layer.forward(&mut g, &Ctx::new(store, Mode::Eval), xv)?;
    Ok(g.value(y).clone())
}

fn median_ns(mut f: impl FnMut() -> Result<()>, warmup: usize, iters: usize) -> Result<u128> {
    for _ in 0..warmup {
        f()?;
    }
    let mut times = Vec::with_capacity(iters.max(1));
    for _ in 0..iters.max(1) {
        let t = Instant::now();
        f()?;
        times.push(t.elapsed().as_nanos());
    }
    times.sort_unstable();
    let m = times.len() / 2;
    Ok(if times.len() % 2 == 1 {
        times[m]
    } else {
        (times[m - 1] + times[m]) / 2
    })
}

/// Runs the equivalence gate and then the timing loops for every shape.
pub fn run(cfg: &RunConfig) -> Result<BenchReport> {
    let mut rows = Vec::new();
    let mut gate_max_diff: f64 = 0.0;
    for (i, s) in grid(cfg).into_iter().enumerate() {
        let seed = cfg.seed.wrapping_add(i as u64);
        let (store, unfolded, grouped) = layers(s, cfg.stride, seed);
        let x = Tensor::randn(&[s.n, s.c, s.h, s.w], 1.0, &mut SeededRng::new(seed ^ 0xbe7c));
        let a = forward(&unfolded, &store, &x)?;
        let b = forward(&grouped, &store, &x)?;
        let diff = a.max_abs_diff(&b)?;
        gate_max_diff = gate_max_diff.max(diff);
        if !(diff <= GATE_TOL) {
            return Err(CliError::Usage(format!(
                "equivalence gate failed for {s:?}: max |unfold - groupconv| = {diff:e}"
            )));
        }
        let t_unfold = median_ns(|| forward(&unfolded, &store, &x).map(drop), cfg.bench_warmup, cfg.bench_iters)?;
        let t_group = median_ns(|| forward(&grouped, &store, &x).map(drop), cfg.bench_warmup, cfg.bench_iters)?;
        let base = t_group.max(1) as f64;
        rows.push(BenchRow {
            path: "unfold",
            shape: s,
            median_ns: t_unfold,
            ratio: t_unfold as f64 / base,
        });
        rows.push(BenchRow {
            path: "groupconv",
            shape: s,
            median_ns: t_group,
            ratio: 1.0,
        });
    }
    Ok(BenchReport { rows, gate_max_diff })
}

impl BenchReport {
    pub fn to_csv(&self, cfg: &RunConfig) -> String {
        let mut s = String::new();
        s.push_str("# rfa bench-extract: RFAConv forward, unfold vs grouped-convolution feature extraction\n");
        s.push_str(REFERENCE_HEADER);
        s.push('\n');
        let _ = writeln!(
            s,
            "# timings are machine-dependent and not deterministic; warmup {}, timed {}, stride {}",
            cfg.bench_warmup, cfg.bench_iters, cfg.stride
        );
        let _ = writeln!(
            s,
            "# equivalence gate passed: max |unfold - groupconv| = {:e}; ratio = median_ns / groupconv median_ns",
            self.gate_max_diff
        );
        s.push_str("path,N,C,H,W,k,median_ns,ratio\n");
        for r in &self.rows {
            let sh = r.shape;
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{:.4}",
                r.path, sh.n, sh.c, sh.h, sh.w, sh.k, r.median_ns, r.ratio
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_odd_and_even() {
        let mut i = 0u64;
        let m = median_ns(
            || {
                i += 1;
                Ok(())
            },
            0,
            5,
        )
        .unwrap();
        assert!(m < 1_000_000);
        assert_eq!(i, 5);
    }

    #[test]
    fn grid_shape() {
        let cfg = RunConfig::default();
        let g = grid(&cfg);
        assert_eq!(g.len(), 4);
        assert!(g.iter().all(|s| s.n == 8 && s.k == 3));
    }
}
