use crate::{Error, Result, Tensor};

/// `(N, F_in) × W(F_out, F_in)ᵀ + b → (N, F_out)`.
pub fn linear(x: &Tensor, weight: &Tensor, bias: Option<&Tensor>) -> Result<Tensor> {
    let (n, f_in) = match *x.shape() {
        [n, f] => (n, f),
        _ => return Err(Error::invalid("linear", alloc::format!("input must be (N, F), got {:?}", x.shape()))),
    };
    let (f_out, f_w) = match *weight.shape() {
        [o, i] => (o, i),
        _ => return Err(Error::invalid("linear", "weight must be (F_out, F_in)")),
    };
    if f_w != f_in {
        return Err(Error::shape("linear", x.shape(), weight.shape()));
    }
    if let Some(b) = bias {
        if b.shape() != [f_out] {
            return Err(Error::shape("linear bias", b.shape(), &[f_out]));
        }
    }
    let mut y = Tensor::zeros(&[n, f_out]);
    for r in 0..n {
        let xr = &x.data()[r * f_in..(r + 1) * f_in];
        for o in 0..f_out {
            let wr = &weight.data()[o * f_in..(o + 1) * f_in];
            let mut acc = bias.map_or(0.0, |b| b.data()[o]);
            for (a, b) in xr.iter().zip(wr) {
                acc += a * b;
            }
            y.data_mut()[r * f_out + o] = acc;
        }
    }
    Ok(y)
}

/// `(grad_x, grad_w)` for [`linear`].
pub(crate) fn linear_backward(g: &Tensor, x: &Tensor, weight: &Tensor) -> (Tensor, Tensor) {
    let (n, f_in) = (x.shape()[0], x.shape()[1]);
    let f_out = weight.shape()[0];
    let mut gx = Tensor::zeros(x.shape());
    let mut gw = Tensor::zeros(weight.shape());
    for r in 0..n {
        for o in 0..f_out {
            let gv = g.data()[r * f_out + o];
            for i in 0..f_in {
                gx.data_mut()[r * f_in + i] += gv * weight.data()[o * f_in + i];
                gw.data_mut()[o * f_in + i] += gv * x.data()[r * f_in + i];
            }
        }
    }
    (gx, gw)
}
