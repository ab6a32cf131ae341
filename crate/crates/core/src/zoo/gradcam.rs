use super::model::Network;
use crate::autodiff::Graph;
use crate::layers::Mode;
use crate::{Error, Result, Tensor};

/// Grad-CAM on the last stage's activation `A` for `class`.
///
/// `α_c` is the spatial mean of `∂logit/∂A_c`; the map `relu(Σ_c α_c·A_c)`
/// is min-max scaled to `[0, 1]` (a constant map becomes all zeros) and
/// upsampled by nearest neighbour. Returns `(H, W)` for an input
/// `(1, C, H, W)`.
pub fn grad_cam(net: &Network, image: &Tensor, class: usize) -> Result<Tensor> {
    let [n, _, h, w] = image.dims4()?;
    if n != 1 {
        return Err(Error::invalid("grad_cam", "expected a single image"));
    }
    if class >= net.spec.num_classes {
        return Err(Error::invalid(
            "grad_cam",
            alloc::format!("class {class} out of range for {} classes", net.spec.num_classes),
        ));
    }
    let mut g = Graph::new();
    let x = g.input(image.clone());
    let out = net.forward(&mut g, Mode::Eval, x)?;
    let mut seed = Tensor::zeros(g.shape(out.logits));
    seed.data_mut()[class] = 1.0;
    let grads = g.backward(out.logits, &seed)?;
    let a = g.value(out.features);
    let [_, c, fh, fw] = a.dims4()?;
    let da = grads.get_or_zeros(out.features, a.shape());
    let p = fh * fw;
    let mut heat = alloc::vec![0.0; p];
    for ch in 0..c {
        let gs = &da.data()[ch * p..(ch + 1) * p];
        let alpha = gs.iter().sum::<f64>() / p as f64;
        for (hv, &av) in heat.iter_mut().zip(&a.data()[ch * p..(ch + 1) * p]) {
            *hv += alpha * av;
        }
    }
    for v in &mut heat {
        *v = v.max(0.0);
    }
    let lo = heat.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = heat.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    for v in &mut heat {
        *v = if range > 1e-12 { (*v - lo) / range } else { 0.0 };
    }
    let mut up = Tensor::zeros(&[h, w]);
    for y in 0..h {
        let sy = y * fh / h;
        for xx in 0..w {
            up.data_mut()[y * w + xx] = heat[sy * fw + xx * fw / w];
        }
    }
    Ok(up)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::{ConvFactory, ModelSpec};
    use crate::SeededRng;

    #[test]
    fn normalized_and_sized() {
        let net = Network::build(ModelSpec::tiny(ConvFactory::Standard, 2), 0).unwrap();
        let img = Tensor::uniform(&[1, 1, 28, 28], 0.0, 1.0, &mut SeededRng::new(1));
        let cam = grad_cam(&net, &img, 1).unwrap();
        assert_eq!(cam.shape(), &[28, 28]);
        assert!(cam.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert!(grad_cam(&net, &img, 2).is_err());
    }

    #[test]
    fn zero_image_gives_zero_map() {
        let net = Network::build(ModelSpec::tiny(ConvFactory::Rfa, 2), 0).unwrap();
        let cam = grad_cam(&net, &Tensor::zeros(&[1, 1, 16, 16]), 0).unwrap();
        assert!(cam.data().iter().all(|&v| v == 0.0));
    }
}
