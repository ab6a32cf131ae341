use rfa_core::autodiff::Graph;
use rfa_core::layers::Mode;
use rfa_core::zoo::{train, train_step, ConvFactory, Dataset, ModelSpec, Network, Sgd, TrainConfig};
use rfa_core::{SeededRng, Tensor};

fn random_set(n: usize, classes: usize, size: usize, seed: u64) -> Dataset {
    let mut rng = SeededRng::new(seed);
    let images = Tensor::uniform(&[n, 1, size, size], 0.0, 1.0, &mut rng);
    let labels = (0..n).map(|_| rng.below(classes)).collect();
    Dataset::new(images, labels, classes).unwrap()
}

fn small_config(seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: 2,
        batch: 8,
        lr0: 0.05,
        milestones: vec![1],
        seed,
        ..TrainConfig::default()
    }
}

#[test]
fn zero_learning_rate_leaves_weights_untouched() {
    let data = random_set(24, 10, 12, 1);
    let mut net = Network::build(ModelSpec::tiny(ConvFactory::Rfa, 10), 2).unwrap();
    let before: Vec<Tensor> = net.store.trainable_ids().map(|id| net.store.get(id).clone()).collect();
    let cfg = TrainConfig {
        lr0: 0.0,
        epochs: 1,
        ..small_config(3)
    };
    train(&mut net, &data, None, &cfg).unwrap();
    for (id, b) in net.store.trainable_ids().zip(&before) {
        let a = net.store.get(id);
        assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

#[test]
fn same_seed_same_log_and_weights() {
    let data = random_set(32, 10, 12, 4);
    let run = || {
        let mut net = Network::build(ModelSpec::tiny(ConvFactory::Rfcbam, 10), 5).unwrap();
        let log = train(&mut net, &data, Some(&data), &small_config(6)).unwrap();
        (log, net.store)
    };
    let (la, sa) = run();
    let (lb, sb) = run();
    assert_eq!(la, lb);
    assert_eq!(sa, sb);
    assert_eq!(la.epochs[1].lr, 0.05 * 0.1);
    assert!(la.to_csv().starts_with("epoch,lr,loss,top1,top5\n"));
}

#[test]
fn overfits_one_batch() {
    let data = random_set(16, 10, 16, 7);
    let (x, labels) = data.batch(&(0..16).collect::<Vec<_>>());
    let mut net = Network::build(ModelSpec::tiny(ConvFactory::Standard, 10), 8).unwrap();
    let mut opt = Sgd::new(0.9, 0.0);
    let mut loss = f64::INFINITY;
    for _ in 0..200 {
        loss = train_step(&mut net, x.clone(), &labels).unwrap().0;
        if loss <= 0.01 {
            break;
        }
        opt.step(&mut net.store, 0.05);
    }
    assert!(loss <= 0.01, "loss {loss}");
}

#[test]
fn non_finite_loss_names_a_layer() {
    let data = random_set(8, 10, 12, 9);
    let mut net = Network::build(ModelSpec::tiny(ConvFactory::Standard, 10), 10).unwrap();
    let id = net.store.find("layer2.0.conv2.weight").unwrap();
    net.store.get_mut(id).data_mut()[0] = f64::NAN;
    let err = train(&mut net, &data, None, &small_config(0)).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("layer2.0"), "{msg}");
}

#[test]
fn running_statistics_follow_training() {
    let data = random_set(16, 10, 12, 11);
    let mut net = Network::build(ModelSpec::tiny(ConvFactory::Rfca, 10), 12).unwrap();
    let id = net.store.find("bn1.running_mean").unwrap();
    assert!(net.store.get(id).data().iter().all(|&v| v == 0.0));
    train(&mut net, &data, None, &small_config(1)).unwrap();
    assert!(net.store.get(id).data().iter().any(|&v| v != 0.0));
    // eval forward depends only on stored state
    let mut g = Graph::new();
    let x = g.input(data.image(0));
    let a = net.forward(&mut g, Mode::Eval, x).unwrap();
    let b = net.forward(&mut g, Mode::Eval, x).unwrap();
    assert_eq!(g.value(a.logits), g.value(b.logits));
}
