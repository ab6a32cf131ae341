use alloc::vec::Vec;

use crate::{Error, Result, Tensor};

/// Images `(N, C, H, W)` with integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub images: Tensor,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn new(images: Tensor, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        let [n, _, _, _] = images.dims4()?;
        if n != labels.len() {
            return Err(Error::shape("dataset", images.shape(), &[labels.len()]));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::invalid("dataset", alloc::format!("label {l} ≥ {num_classes} classes")));
        }
        Ok(Dataset { images, labels, num_classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `[C, H, W]` of one sample.
    pub fn sample_shape(&self) -> [usize; 3] {
        let s = self.images.shape();
        [s[1], s[2], s[3]]
    }

    pub fn image(&self, i: usize) -> Tensor {
        self.batch(&[i]).0
    }

    /// Gathers the samples at `idx` in order.
    pub fn batch(&self, idx: &[usize]) -> (Tensor, Vec<usize>) {
        let [c, h, w] = self.sample_shape();
        let per = c * h * w;
        let mut data = Vec::with_capacity(idx.len() * per);
        for &i in idx {
            data.extend_from_slice(&self.images.data()[i * per..(i + 1) * per]);
        }
        let labels = idx.iter().map(|&i| self.labels[i]).collect();
        (Tensor::new(&[idx.len(), c, h, w], data).expect("gathered batch"), labels)
    }

    /// First `n` samples.
    pub fn take(&self, n: usize) -> Dataset {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        let (images, labels) = self.batch(&idx);
        Dataset {
            images,
            labels,
            num_classes: self.num_classes,
        }
    }
}
