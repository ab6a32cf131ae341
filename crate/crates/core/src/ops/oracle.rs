//! Naive loop references used only by unit tests.

use crate::Tensor;

pub fn conv2d(
    x: &Tensor,
    w: &Tensor,
    b: Option<&Tensor>,
    stride: usize,
    padding: usize,
    groups: usize,
) -> Tensor {
    let [n, c, h, wd] = x.dims4().unwrap();
    let [co, cg, k, _] = w.dims4().unwrap();
    let ho = (h + 2 * padding - k) / stride + 1;
    let wo = (wd + 2 * padding - k) / stride + 1;
    let cout_g = co / groups;
    let _ = c;
    let mut y = Tensor::zeros(&[n, co, ho, wo]);
    for s in 0..n {
        for o in 0..co {
            let g = o / cout_g;
            for oh in 0..ho {
                for ow in 0..wo {
                    let mut acc = b.map_or(0.0, |b| b.data()[o]);
                    for ci in 0..cg {
                        for u in 0..k {
                            for v in 0..k {
                                let ih = (oh * stride + u) as isize - padding as isize;
                                let iw = (ow * stride + v) as isize - padding as isize;
                                if ih < 0 || iw < 0 || ih >= h as isize || iw >= wd as isize {
                                    continue;
                                }
                                acc += x.at4(s, g * cg + ci, ih as usize, iw as usize)
                                    * w.at4(o, ci, u, v);
                            }
                        }
                    }
                    let i = y.index4(s, o, oh, ow);
                    y.data_mut()[i] = acc;
                }
            }
        }
    }
    y
}

pub fn avgpool2d(x: &Tensor, k: usize, stride: usize, padding: usize) -> Tensor {
    let [n, c, h, w] = x.dims4().unwrap();
    let ho = (h + 2 * padding - k) / stride + 1;
    let wo = (w + 2 * padding - k) / stride + 1;
    let mut y = Tensor::zeros(&[n, c, ho, wo]);
    for s in 0..n {
        for ch in 0..c {
            for oh in 0..ho {
                for ow in 0..wo {
                    let mut acc = 0.0;
                    for u in 0..k {
                        for v in 0..k {
                            let ih = (oh * stride + u) as isize - padding as isize;
                            let iw = (ow * stride + v) as isize - padding as isize;
                            if ih >= 0 && iw >= 0 && ih < h as isize && iw < w as isize {
                                acc += x.at4(s, ch, ih as usize, iw as usize);
                            }
                        }
                    }
                    let i = y.index4(s, ch, oh, ow);
                    y.data_mut()[i] = acc / (k * k) as f64;
                }
            }
        }
    }
    y
}
