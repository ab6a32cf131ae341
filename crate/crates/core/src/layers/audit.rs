use alloc::vec::Vec;

use crate::ops::unfold::{unfold, window_sources};
use crate::{Error, Result, Tensor};

/// Result of checking which window entries of an unfolded pixel-level map
/// are forced equal because they read the same source pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub k: usize,
    /// Window entries inspected: `k²·H'·W'` per sample.
    pub entries: usize,
    /// Pairs of distinct window entries reading the same source pixel.
    pub shared_pairs: usize,
    /// Shared pairs whose values differ (always zero for a pixel-level map).
    pub violations: usize,
    /// Free values of the pixel-level map per sample: `H·W`.
    pub pixel_dof: usize,
    /// Free values of a per-window attention over the same grid: `k²·H'·W'`.
    pub window_dof: usize,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Unfolds `a: (N, 1, H, W)` with `(k, stride 1, padding 0)` and compares
/// every pair of window entries that reference the same pixel.
pub fn shared_weight_audit(a: &Tensor, k: usize) -> Result<AuditReport> {
    let [n, c, h, w] = a.dims4()?;
    if c != 1 {
        return Err(Error::invalid("shared_weight_audit", "attention map must have one channel"));
    }
    if k == 0 || h < k || w < k {
        return Err(Error::invalid("shared_weight_audit", "window larger than map"));
    }
    let f = unfold(a, k, 1, 0)?;
    let (ho, wo) = (h - k + 1, w - k + 1);
    let sources = window_sources(h, w, k);
    // bucket entries by source pixel
    let mut buckets: Vec<Vec<(usize, usize, usize)>> = alloc::vec![Vec::new(); h * w];
    for &(oh, ow, j, sh, sw) in &sources {
        buckets[sh * w + sw].push((oh, ow, j));
    }
    let mut shared_pairs = 0;
    let mut violations = 0;
    for s in 0..n {
        for bucket in &buckets {
            for (i, &(oh0, ow0, j0)) in bucket.iter().enumerate() {
                for &(oh1, ow1, j1) in &bucket[i + 1..] {
                    shared_pairs += 1;
                    if f.get(s, 0, j0, oh0, ow0) != f.get(s, 0, j1, oh1, ow1) {
                        violations += 1;
                    }
                }
            }
        }
    }
    Ok(AuditReport {
        k,
        entries: n * sources.len(),
        shared_pairs,
        violations,
        pixel_dof: h * w,
        window_dof: k * k * ho * wo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::SeededRng;

    #[test]
    fn adjacent_windows_share_entries() {
        let a = Tensor::uniform(&[1, 1, 4, 4], 0.0, 1.0, &mut SeededRng::new(0));
        let f = unfold(&a, 3, 1, 0).unwrap();
        for h in 0..2 {
            // tap (0, 1) of a window is tap (0, 0) of its right neighbour
            assert_eq!(f.get(0, 0, 1, h, 0), f.get(0, 0, 0, h, 1));
            assert_eq!(f.get(0, 0, 2, h, 0), f.get(0, 0, 1, h, 1));
        }
        let r = shared_weight_audit(&a, 3).unwrap();
        assert!(r.passed());
        assert!(r.shared_pairs > 0);
        assert_eq!(r.pixel_dof, 16);
        assert_eq!(r.window_dof, 36);
    }

    #[test]
    fn single_tap_has_no_overlap() {
        let a = Tensor::uniform(&[2, 1, 5, 5], 0.0, 1.0, &mut SeededRng::new(1));
        let r = shared_weight_audit(&a, 1).unwrap();
        assert_eq!(r.shared_pairs, 0);
        assert_eq!(r.window_dof, r.pixel_dof);
    }

    #[test]
    fn pair_count_closed_form() {
        // 3×3 map, k = 2: the centre pixel is read by 4 windows, edges by 2.
        let a = Tensor::zeros(&[1, 1, 3, 3]);
        let r = shared_weight_audit(&a, 2).unwrap();
        assert_eq!(r.shared_pairs, 6 + 4);
        assert_eq!(r.entries, 16);
    }
}
