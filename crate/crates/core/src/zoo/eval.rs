use alloc::vec::Vec;

use super::data::Dataset;
use super::model::Network;
use crate::autodiff::Graph;
use crate::layers::Mode;
use crate::{Result, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub loss: f64,
    /// Fractions in `[0, 1]`.
    pub top1: f64,
    pub top5: f64,
}

/// Rows of `(N, K)` logits whose label ranks among the `k` largest.
/// Ties are broken towards the lower class index.
pub fn topk_correct(logits: &Tensor, labels: &[usize], k: usize) -> usize {
    let classes = logits.shape()[1];
    logits
        .data()
        .chunks_exact(classes)
        .zip(labels)
        .filter(|(row, &label)| {
            let target = row[label];
            let rank = row
                .iter()
                .enumerate()
                .filter(|&(j, &v)| v > target || (v == target && j < label))
                .count();
            rank < k
        })
        .count()
}

/// Eval-mode loss and top-1 / top-5 accuracy.
pub fn evaluate(net: &Network, data: &Dataset, batch: usize) -> Result<Metrics> {
    let mut loss = 0.0;
    let (mut c1, mut c5) = (0, 0);
    let idx: Vec<usize> = (0..data.len()).collect();
    for chunk in idx.chunks(batch.max(1)) {
        let (x, labels) = data.batch(chunk);
        let mut g = Graph::new();
        let xv = g.input(x);
        let out = net.forward(&mut g, Mode::Eval, xv)?;
        let l = g.cross_entropy(out.logits, &labels)?;
        loss += g.value(l).item() * chunk.len() as f64;
        c1 += topk_correct(g.value(out.logits), &labels, 1);
        c5 += topk_correct(g.value(out.logits), &labels, 5);
    }
    let n = data.len().max(1) as f64;
    Ok(Metrics {
        loss: loss / n,
        top1: c1 as f64 / n,
        top5: c5 as f64 / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::SeededRng;

    #[test]
    fn one_hot_logits_are_perfect() {
        let labels = [3usize, 0, 9, 4];
        let mut t = Tensor::zeros(&[4, 10]);
        for (r, &l) in labels.iter().enumerate() {
            t.data_mut()[r * 10 + l] = 1.0;
        }
        assert_eq!(topk_correct(&t, &labels, 1), 4);
        assert_eq!(topk_correct(&t, &labels, 5), 4);
    }

    #[test]
    fn ties_favour_lower_index() {
        let t = Tensor::zeros(&[2, 3]);
        assert_eq!(topk_correct(&t, &[0, 2], 1), 1);
        assert_eq!(topk_correct(&t, &[0, 2], 3), 2);
    }

    #[test]
    fn random_predictor_rates() {
        let mut rng = SeededRng::new(11);
        let n = 10_000;
        let logits = Tensor::uniform(&[n, 10], 0.0, 1.0, &mut rng);
        let labels: Vec<usize> = (0..n).map(|i| i % 10).collect();
        let t1 = topk_correct(&logits, &labels, 1) as f64 / n as f64;
        let t5 = topk_correct(&logits, &labels, 5) as f64 / n as f64;
        assert!((t1 - 0.1).abs() <= 0.03, "{t1}");
        assert!((t5 - 0.5).abs() <= 0.03, "{t5}");
    }
}
