//! Seeded two-class oriented-bar images.
//!
//! Each `size × size` image is uniform background noise in `[0, 0.3)` with
//! one bright bar (`[0.7, 1.0)`), 3 pixels thick and between half and three
//! quarters of the image long, placed uniformly at random. Label 0 is a
//! horizontal bar, label 1 a vertical one. The bar mask of every image is
//! kept for localization checks.

use rfa_core::zoo::Dataset;
use rfa_core::{SeededRng, Tensor};

use crate::error::Result;

pub const THICKNESS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct BarSet {
    pub data: Dataset,
    /// Row-major `size × size` bar masks, one per image.
    pub masks: Vec<Vec<bool>>,
}

pub fn generate(n: usize, size: usize, seed: u64) -> Result<BarSet> {
    let mut rng = SeededRng::new(seed);
    let p = size * size;
    let mut pixels = Vec::with_capacity(n * p);
    let mut labels = Vec::with_capacity(n);
    let mut masks = Vec::with_capacity(n);
    let (min_len, max_len) = (size / 2, size * 3 / 4);
    for _ in 0..n {
        let label = rng.below(2);
        let len = min_len + rng.below(max_len - min_len + 1);
        let along = rng.below(size - len + 1);
        let across = rng.below(size - THICKNESS + 1);
        let mut img: Vec<f64> = (0..p).map(|_| rng.uniform_range(0.0, 0.3)).collect();
        let mut mask = vec![false; p];
        for a in along..along + len {
            for t in across..across + THICKNESS {
                let (r, c) = if label == 0 { (t, a) } else { (a, t) };
                img[r * size + c] = rng.uniform_range(0.7, 1.0);
                mask[r * size + c] = true;
            }
        }
        pixels.extend(img);
        labels.push(label);
        masks.push(mask);
    }
    let images = Tensor::new(&[n, 1, size, size], pixels)?;
    Ok(BarSet {
        data: Dataset::new(images, labels, 2)?,
        masks,
    })
}

/// Train and test sets drawn from independent streams of `seed`.
pub fn split(train: usize, test: usize, size: usize, seed: u64) -> Result<(BarSet, BarSet)> {
    Ok((generate(train, size, seed)?, generate(test, size, seed ^ 0x9e37_79b9_7f4a_7c15)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_balanced() {
        let a = generate(400, 28, 5).unwrap();
        assert_eq!(a, generate(400, 28, 5).unwrap());
        let ones = a.data.labels.iter().filter(|&&l| l == 1).count();
        assert!((150..250).contains(&ones));
    }

    #[test]
    fn bars_match_masks() {
        let s = generate(20, 16, 1).unwrap();
        for (i, mask) in s.masks.iter().enumerate() {
            let img = &s.data.images.data()[i * 256..(i + 1) * 256];
            for (&v, &m) in img.iter().zip(mask) {
                assert_eq!(v >= 0.7, m);
            }
            let count = mask.iter().filter(|&&m| m).count();
            assert!(count >= 8 * THICKNESS && count <= 12 * THICKNESS);
        }
    }
}
