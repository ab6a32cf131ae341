use rfa_core::autodiff::Graph;
use rfa_core::layers::Mode;
use rfa_core::zoo::{count_cost, ConvFactory, ModelSpec, Network, NewConv};
use rfa_core::Tensor;

#[test]
fn resnet18_standard_matches_published_counts() {
    let net = Network::build(ModelSpec::resnet18(ConvFactory::Standard, 1000), 0).unwrap();
    let c = count_cost(&net, 1, 224, 224).unwrap();
    assert_eq!(c.params, 11_689_512);
    assert!((c.gmacs() - 1.82).abs() / 1.82 <= 0.02, "{}", c.gmacs());
}

#[test]
fn resnet34_parameter_count() {
    let net = Network::build(ModelSpec::resnet34(ConvFactory::Standard, 1000), 0).unwrap();
    assert_eq!(net.num_parameters(), 21_797_672);
}

#[test]
fn rfa_increment_closed_form() {
    let std_net = Network::build(ModelSpec::resnet18(ConvFactory::Standard, 1000), 0).unwrap();
    let rfa_net = Network::build(ModelSpec::resnet18(ConvFactory::Rfa, 1000), 0).unwrap();
    let k2 = 9u64;
    let mut formula = 0u64;
    for b in &rfa_net.blocks {
        let NewConv::Rfa(l) = &b.conv1 else { panic!("factory not applied") };
        let (c, o) = (l.c_in as u64, l.c_out as u64);
        // weight branch, feature branch, its normalization, and the mix bias
        formula += c * k2 + c * k2 * k2 + 2 * c * k2 + o;
    }
    let diff = rfa_net.num_parameters() - std_net.num_parameters();
    assert_eq!(diff, formula);
    assert!((11_800_000..=11_920_000).contains(&rfa_net.num_parameters()));
    let ratio = rfa_net.num_parameters() as f64 / std_net.num_parameters() as f64;
    assert!((1.010..=1.016).contains(&ratio));
}

#[test]
fn rfa_mac_ratio() {
    let s = count_cost(&Network::build(ModelSpec::resnet18(ConvFactory::Standard, 1000), 0).unwrap(), 1, 224, 224).unwrap();
    let r = count_cost(&Network::build(ModelSpec::resnet18(ConvFactory::Rfa, 1000), 0).unwrap(), 1, 224, 224).unwrap();
    let ratio = r.macs as f64 / s.macs as f64;
    assert!((1.03..=1.07).contains(&ratio), "{ratio}");
}

#[test]
fn every_factory_keeps_resnet_geometry() {
    for f in ConvFactory::ALL {
        let net = Network::build(ModelSpec::resnet18(f, 1000), 1).unwrap();
        let mut g = Graph::new();
        let x = g.input(Tensor::full(&[1, 3, 64, 64], 0.5));
        let out = net.forward(&mut g, Mode::Eval, x).unwrap();
        assert_eq!(g.shape(out.logits), &[1, 1000], "{f}");
        assert_eq!(g.shape(out.features), &[1, 512, 2, 2], "{f}");
    }
}

#[test]
fn parameters_equal_enumeration() {
    for f in ConvFactory::ALL {
        let net = Network::build(ModelSpec::tiny(f, 10), 0).unwrap();
        let enumerated: u64 = net
            .store
            .iter()
            .filter(|e| e.kind == rfa_core::layers::ParamKind::Trainable)
            .map(|e| e.value.shape().iter().product::<usize>() as u64)
            .sum();
        assert_eq!(count_cost(&net, 1, 28, 28).unwrap().params, enumerated);
    }
}
