//! One function per CLI verb. Each returns its exit code and standard
//! output; files go under the run's output directory.

use std::fmt::Write;
use std::path::{Path, PathBuf};

use rfa_core::autodiff::{gradcheck as check, primitive_cases, Fault, GradCheckReport, Graph};
use rfa_core::layers::{layer_cases, shared_weight_audit, Ctx, Mode, NaiveSpatialAttnConv, ParamStore, RfaConvLayer};
use rfa_core::ops::{conv2d_raw, rf_extract_groupconv, selector_weights, unfold, ConvParams};
use rfa_core::zoo::{
    count_cost, evaluate, grad_cam, train, ConvFactory, Dataset, ModelSpec, Network, TrainConfig, TrainLog,
};
use rfa_core::{SeededRng, Tensor};

use crate::config::RunConfig;
use crate::error::{read_file, write_file, CliError, Result};
use crate::pgm::Pgm;
use crate::synthetic::{self, BarSet};
use crate::{bench, checkpoint, idx};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
}

impl Outcome {
    fn new(ok: bool, stdout: String) -> Self {
        Outcome {
            code: if ok { 0 } else { 1 },
            stdout,
        }
    }
}

/// Seeds used for the layer checks: three consecutive values after `seed`.
pub fn layer_seeds(seed: u64) -> [u64; 3] {
    [seed + 1, seed + 2, seed + 3]
}

/// Primitive checks on `seed`, layer checks on [`layer_seeds`], with the
/// worst result per layer reported.
pub fn gradcheck_reports(cfg: &RunConfig, fault: Option<Fault>) -> Result<Vec<GradCheckReport>> {
    let mut out = Vec::new();
    for mut case in primitive_cases(cfg.seed) {
        if let Some(t) = cfg.tol {
            case.tol = t;
        }
        out.push(check(&case, cfg.seed, fault)?);
    }
    let mut layers: Vec<GradCheckReport> = Vec::new();
    for seed in layer_seeds(cfg.seed) {
        for mut case in layer_cases(seed) {
            if let Some(t) = cfg.tol {
                case.tol = t;
            }
            let r = check(&case, seed, fault)?;
            match layers.iter_mut().find(|l| l.op == r.op) {
                Some(l) => {
                    l.pass &= r.pass;
                    if r.max_rel_err > l.max_rel_err {
                        l.max_rel_err = r.max_rel_err;
                        l.per_param = r.per_param;
                    }
                    if l.failure.is_none() {
                        l.failure = r.failure;
                    }
                }
                None => layers.push(r),
            }
        }
    }
    out.extend(layers);
    Ok(out)
}

pub fn gradcheck(cfg: &RunConfig, out_dir: &Path, fault: Option<Fault>) -> Result<Outcome> {
    let reports = gradcheck_reports(cfg, fault)?;
    let mut csv = String::from("op,max_rel_err,pass\n");
    for r in &reports {
        csv.push_str(&r.csv_row());
        csv.push('\n');
    }
    write_file(&out_dir.join("gradcheck.csv"), csv.as_bytes())?;
    Ok(Outcome::new(reports.iter().all(|r| r.pass), csv))
}

/// First index where two tensors differ, with both values.
fn first_difference(a: &Tensor, b: &Tensor) -> Option<(usize, f64, f64)> {
    if a.shape() != b.shape() {
        return Some((0, f64::NAN, f64::NAN));
    }
    a.data()
        .iter()
        .zip(b.data())
        .position(|(x, y)| x.to_bits() != y.to_bits())
        .map(|i| (i, a.data()[i], b.data()[i]))
}

pub const EQUIVALENCE_KS: [usize; 4] = [1, 2, 3, 5];

/// Largest `|k²·RFAConv − conv2d|` over a random input in reduction mode.
pub fn reduction_error(k: usize, seed: u64) -> Result<f64> {
    let mut store = ParamStore::new();
    let mut rng = SeededRng::new(seed);
    let mut layer = RfaConvLayer::new(&mut store, &mut rng, "rfa", 3, 4, k, 1);
    layer.set_reduction_mode();
    let bias = layer.mix.bias.expect("mix conv has a bias");
    store.set(bias, Tensor::randn(&[4], 1.0, &mut rng))?;
    let x = Tensor::randn(&[2, 3, 9, 8], 1.0, &mut rng);
    let mut g = Graph::new();
    let xv = g.input(x.clone());
    let y = layer.forward(&mut g, &Ctx::new(&store, Mode::Eval), xv)?;
    let kk = (k * k) as f64;
    let want = conv2d_raw(&x, store.get(layer.mix.weight), Some(&store.get(bias).scale(kk)), 1, k / 2, 1)?;
    Ok(g.value(y).scale(kk).max_abs_diff(&want)?)
}

pub fn equivalence(cfg: &RunConfig, out_dir: &Path) -> Result<Outcome> {
    let mut ok = true;
    let mut s = String::new();
    let mut rng = SeededRng::new(cfg.seed);

    let mut checked = 0;
    'sweep: for k in EQUIVALENCE_KS {
        for stride in [1, 2] {
            for padding in [0, k / 2, k - 1] {
                let x = Tensor::randn(&[2, 3, 9, 10], 1.0, &mut rng);
                let a = unfold(&x, k, stride, padding)?;
                let p = ConvParams {
                    weight: selector_weights(3, k),
                    bias: None,
                    stride,
                    padding,
                    groups: 3,
                };
                let b = rf_extract_groupconv(&x, &p)?;
                checked += 1;
                if let Some((i, va, vb)) = first_difference(a.as_tensor(), b.as_tensor()) {
                    ok = false;
                    let _ = writeln!(
                        s,
                        "unfold_vs_groupconv FAIL k={k} stride={stride} padding={padding}: index {i}: unfold {va} groupconv {vb}"
                    );
                    break 'sweep;
                }
            }
        }
    }
    if ok {
        let _ = writeln!(s, "unfold_vs_groupconv PASS {checked} configurations bit-identical (k in {EQUIVALENCE_KS:?})");
    }

    for k in [1, 3] {
        let e = reduction_error(k, cfg.seed + k as u64)?;
        let pass = e <= 1e-10;
        ok &= pass;
        let _ = writeln!(s, "uniform_reduction k={k} max_abs_err={e:.3e} {}", if pass { "PASS" } else { "FAIL" });
    }

    let mut store = ParamStore::new();
    let naive = NaiveSpatialAttnConv::new(&mut store, &mut rng, "sa", 3, 3, 3, 1);
    let mut g = Graph::new();
    let xv = g.input(Tensor::randn(&[1, 3, 8, 8], 1.0, &mut rng));
    let a = naive.attention_map(&mut g, &Ctx::new(&store, Mode::Eval), xv)?;
    let map = g.value(a).clone();
    let mut ks = vec![1, cfg.k];
    ks.dedup();
    for k in ks {
        let r = shared_weight_audit(&map, k)?;
        let expect_shared = k >= 2;
        let pass = r.passed() && (r.shared_pairs > 0) == expect_shared;
        ok &= pass;
        let _ = writeln!(
            s,
            "naive_audit k={k} map=8x8 shared_pairs={} violations={} pixel_dof={} window_dof={} {}",
            r.shared_pairs,
            r.violations,
            r.pixel_dof,
            r.window_dof,
            if pass { "PASS" } else { "FAIL" }
        );
    }
    write_file(&out_dir.join("equivalence.txt"), s.as_bytes())?;
    Ok(Outcome::new(ok, s))
}

pub fn bench_extract(cfg: &RunConfig, out_dir: &Path) -> Result<Outcome> {
    let report = bench::run(cfg)?;
    let csv = report.to_csv(cfg);
    write_file(&out_dir.join("bench_extract.csv"), csv.as_bytes())?;
    Ok(Outcome::new(true, csv))
}

/// Train and test sets: IDX files when configured, the synthetic bars otherwise.
pub fn datasets(cfg: &RunConfig) -> Result<(Dataset, Dataset, Option<BarSet>)> {
    match (&cfg.train_images, &cfg.train_labels) {
        (Some(ti), Some(tl)) => {
            let train = idx::load(ti, tl, None)?;
            let classes = Some(train.num_classes.max(cfg.classes));
            let test = match (&cfg.test_images, &cfg.test_labels) {
                (Some(ei), Some(el)) => idx::load(ei, el, classes)?,
                _ => return Err(CliError::Usage("test_images and test_labels must be set with train_images".into())),
            };
            let train = Dataset::new(train.images, train.labels, test.num_classes)?;
            Ok((train, test, None))
        }
        (None, None) => {
            let (tr, te) = synthetic::split(cfg.train_size, cfg.test_size, cfg.image_size, cfg.seed)?;
            Ok((tr.data, te.data.clone(), Some(te)))
        }
        _ => Err(CliError::Usage("train_images and train_labels must be set together".into())),
    }
}

pub fn model_spec(cfg: &RunConfig, classes: usize, in_channels: usize) -> ModelSpec {
    let mut spec = ModelSpec::tiny(cfg.factory, classes);
    spec.in_channels = in_channels;
    spec.k = cfg.k;
    spec
}

pub fn train_config(cfg: &RunConfig) -> TrainConfig {
    TrainConfig {
        epochs: cfg.epochs,
        batch: cfg.batch,
        lr0: cfg.lr0,
        momentum: cfg.momentum,
        weight_decay: cfg.weight_decay,
        milestones: cfg.milestones.clone(),
        gamma: cfg.gamma,
        seed: cfg.seed,
    }
}

/// Builds and trains the desk-scale network described by `cfg`.
pub fn train_network(cfg: &RunConfig, train_set: &Dataset, test_set: &Dataset) -> Result<(Network, TrainLog)> {
    let mut net = Network::build(model_spec(cfg, test_set.num_classes, train_set.sample_shape()[0]), cfg.seed)?;
    let log = train(&mut net, train_set, Some(test_set), &train_config(cfg))?;
    Ok((net, log))
}

pub fn train_cmd(cfg: &RunConfig, out_dir: &Path) -> Result<Outcome> {
    let (tr, te, _) = datasets(cfg)?;
    let (net, log) = train_network(cfg, &tr, &te)?;
    write_file(&out_dir.join("run.cfg"), cfg.resolved().as_bytes())?;
    checkpoint::save(&net.store, &out_dir.join("model.ckpt"))?;
    let csv = log.to_csv();
    write_file(&out_dir.join("train_log.csv"), csv.as_bytes())?;
    Ok(Outcome::new(true, csv))
}

/// Rebuilds the configured network and loads `ckpt` into it.
pub fn load_network(cfg: &RunConfig, classes: usize, in_channels: usize, ckpt: &Path) -> Result<Network> {
    let mut net = Network::build(model_spec(cfg, classes, in_channels), cfg.seed)?;
    checkpoint::load(&mut net.store, ckpt)?;
    Ok(net)
}

pub fn eval_cmd(cfg: &RunConfig, ckpt: &Path) -> Result<Outcome> {
    let (_, te, _) = datasets(cfg)?;
    let net = load_network(cfg, te.num_classes, te.sample_shape()[0], ckpt)?;
    let m = evaluate(&net, &te, cfg.batch)?;
    let s = format!(
        "samples,loss,top1,top5\n{},{:.6},{:.4},{:.4}\n",
        te.len(),
        m.loss,
        m.top1,
        m.top5
    );
    Ok(Outcome::new(true, s))
}

pub fn count_cmd(cfg: &RunConfig) -> Result<Outcome> {
    let spec = |f: ConvFactory| match cfg.model.as_str() {
        "resnet34" => ModelSpec::resnet34(f, 1000),
        "tiny" => ModelSpec::tiny(f, 10),
        _ => ModelSpec::resnet18(f, 1000),
    };
    let size = cfg.input_size;
    let base = count_cost(&Network::build(spec(ConvFactory::Standard), 0)?, 1, size, size)?;
    let mut s = String::from("model,factory,input,params,macs,mparams,gmacs,param_ratio,mac_ratio\n");
    let mut factories = vec![ConvFactory::Standard];
    if cfg.factory != ConvFactory::Standard {
        factories.push(cfg.factory);
    }
    for f in factories {
        let c = count_cost(&Network::build(spec(f), 0)?, 1, size, size)?;
        let _ = writeln!(
            s,
            "{},{f},{size},{},{},{:.3},{:.3},{:.5},{:.5}",
            cfg.model,
            c.params,
            c.macs,
            c.mparams(),
            c.gmacs(),
            c.params as f64 / base.params as f64,
            c.macs as f64 / base.macs as f64
        );
    }
    Ok(Outcome::new(true, s))
}

/// Where the Grad-CAM input comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum CamInput {
    Image(PathBuf),
    /// Index into the configured test set.
    Index(usize),
}

/// Fraction of the first `count` samples of `set` whose mean heat over bar
/// pixels exceeds the mean over background pixels, using the true class.
pub fn bar_localization(net: &Network, set: &BarSet, count: usize) -> Result<f64> {
    let n = count.min(set.data.len());
    let mut hits = 0;
    for i in 0..n {
        let cam = grad_cam(net, &set.data.image(i), set.data.labels[i])?;
        let (mut on, mut off, mut n_on, mut n_off) = (0.0, 0.0, 0usize, 0usize);
        for (&v, &m) in cam.data().iter().zip(&set.masks[i]) {
            if m {
                on += v;
                n_on += 1;
            } else {
                off += v;
                n_off += 1;
            }
        }
        if on / n_on.max(1) as f64 > off / n_off.max(1) as f64 {
            hits += 1;
        }
    }
    Ok(hits as f64 / n.max(1) as f64)
}

pub fn gradcam_cmd(
    cfg: &RunConfig,
    ckpt: &Path,
    input: &CamInput,
    class: Option<usize>,
    out_dir: &Path,
) -> Result<Outcome> {
    let (image, label, classes) = match input {
        CamInput::Image(p) => {
            let img = Pgm::decode(&read_file(p)?)?.to_tensor();
            (img, None, cfg.classes)
        }
        CamInput::Index(i) => {
            let (_, te, _) = datasets(cfg)?;
            if *i >= te.len() {
                return Err(CliError::Usage(format!("index {i} out of range for {} test samples", te.len())));
            }
            (te.image(*i), Some(te.labels[*i]), te.num_classes)
        }
    };
    let net = load_network(cfg, classes, image.shape()[1], ckpt)?;
    let class = match class.or(label) {
        Some(c) => c,
        None => {
            let mut g = Graph::new();
            let xv = g.input(image.clone());
            let out = net.forward(&mut g, Mode::Eval, xv)?;
            let logits = g.value(out.logits).data();
            (0..logits.len()).fold(0, |best, j| if logits[j] > logits[best] { j } else { best })
        }
    };
    let cam = grad_cam(&net, &image, class)?;
    let pgm = Pgm::from_unit(&cam)?;
    let path = out_dir.join("gradcam.pgm");
    write_file(&path, &pgm.encode())?;
    let mean = cam.data().iter().sum::<f64>() / cam.len().max(1) as f64;
    let s = format!(
        "class {class}: {}x{} heatmap, mean {mean:.4}, written to {}\n",
        pgm.width,
        pgm.height,
        path.display()
    );
    Ok(Outcome::new(true, s))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn difference_reports_first_index() {
        let a = Tensor::new(&[3], vec![1.0, 2.0, 3.0]).unwrap();
        let b = Tensor::new(&[3], vec![1.0, 2.5, 4.0]).unwrap();
        assert_eq!(first_difference(&a, &b), Some((1, 2.0, 2.5)));
        assert_eq!(first_difference(&a, &a), None);
        // signed zeros count as different bits
        let z = Tensor::new(&[1], vec![0.0]).unwrap();
        let nz = Tensor::new(&[1], vec![-0.0]).unwrap();
        assert!(first_difference(&z, &nz).is_some());
    }

    #[test]
    fn reduction_holds() {
        for k in [1, 3] {
            assert!(reduction_error(k, 4).unwrap() <= 1e-10);
        }
    }
}
