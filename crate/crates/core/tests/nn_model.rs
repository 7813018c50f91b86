use floodcast::nn::{
    lstm_step, mlp_forward, sequence_loss, Dense, ModelConfig, Network, SequenceInput,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tiny(window: usize, dropout_p: f64) -> Network {
    Network::new(ModelConfig {
        hidden_size: 4,
        dropout_p,
        embed_layers: [6, 5, 3],
        window,
        horizon: 2,
        n_dynamic: 3,
        n_static: 5,
    })
    .unwrap()
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

fn loss(net: &Network, p: &[f64], input: &SequenceInput<'_>, mask: Option<&[f64]>, target: &[Option<f64>]) -> f64 {
    let y = net.forward(p, input, mask).unwrap();
    let mut d = vec![0.0; y.len()];
    sequence_loss(&y, target, 0.7, 0.1, &mut d).0
}

#[test]
fn forward_matches_composed_building_blocks() {
    let net = tiny(6, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let p = net.init_params(&mut rng);
    let dynamic = random_vec(&mut rng, 6 * 3, 1.5);
    let statics = random_vec(&mut rng, 5, 1.5);
    let out = net.forward(&p, &SequenceInput { dynamic: &dynamic, statics: &statics }, None).unwrap();

    let dyn_layers: [Dense<'_>; 3] = net.dynamic_embedding(&p);
    let st_layers = net.static_embedding(&p);
    let s = mlp_forward(&statics, &st_layers).unwrap();
    let (head_w, head_b) = net.head(&p);
    let (mut h, mut c) = (vec![0.0; 4], vec![0.0; 4]);
    let mut expected = Vec::new();
    for t in 0..6 {
        let mut x = mlp_forward(&dynamic[t * 3..(t + 1) * 3], &dyn_layers).unwrap();
        x.extend_from_slice(&s);
        (h, c) = lstm_step(&x, &h, &c, net.lstm_weights(&p)).unwrap();
        if t >= 4 {
            expected.push(head_b + h.iter().zip(head_w).map(|(a, b)| a * b).sum::<f64>());
        }
    }
    for (a, b) in out.iter().zip(&expected) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn eval_mode_and_duplicates_are_deterministic() {
    let net = tiny(6, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let p = net.init_params(&mut rng);
    let dynamic = random_vec(&mut rng, 18, 1.0);
    let statics = random_vec(&mut rng, 5, 1.0);
    let input = SequenceInput { dynamic: &dynamic, statics: &statics };
    assert_eq!(net.forward(&p, &input, None).unwrap(), net.forward(&p, &input, None).unwrap());
    assert!(net.sample_mask(&mut rng).is_none());
    let bad = vec![f64::NAN; 18];
    assert!(net.forward(&p, &SequenceInput { dynamic: &bad, statics: &statics }, None).is_err());
    assert!(net.forward(&p, &SequenceInput { dynamic: &dynamic[..15], statics: &statics }, None).is_err());
}

#[test]
fn gradients_match_central_differences() {
    let net = tiny(8, 0.4);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut p = net.init_params(&mut rng);
    // Move every parameter off its initial scale so no gradient is structurally tiny.
    for v in p.iter_mut() {
        *v += rng.random_range(-0.3..0.3);
    }
    let dynamic = random_vec(&mut rng, 8 * 3, 1.0);
    let statics = random_vec(&mut rng, 5, 1.0);
    let input = SequenceInput { dynamic: &dynamic, statics: &statics };
    let mask = net.sample_mask(&mut rng);
    let target = vec![Some(0.8), Some(-0.4)];

    let trace = net.forward_trace(&p, &input, mask.as_deref()).unwrap();
    let mut d = vec![0.0; 2];
    sequence_loss(&trace.outputs, &target, 0.7, 0.1, &mut d);
    let mut grad = vec![0.0; p.len()];
    net.backward(&p, &input, &trace, &d, &mut grad);

    let h = 1e-5;
    let mut worst = (0.0f64, 0usize);
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + h;
        let up = loss(&net, &p, &input, mask.as_deref(), &target);
        p[i] = orig - h;
        let down = loss(&net, &p, &input, mask.as_deref(), &target);
        p[i] = orig;
        let fd = (up - down) / (2.0 * h);
        let rel = (grad[i] - fd).abs() / (grad[i].abs() + 1e-8);
        if rel > worst.0 {
            worst = (rel, i);
        }
    }
    let i = worst.1;
    assert!(worst.0 < 1e-4, "worst relative error {} at {} ({}), grad {}", worst.0, i, net.layout.tensor_of(i), grad[i]);
}

#[test]
fn gradient_is_linear_in_loss_scale() {
    let net = tiny(8, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = net.init_params(&mut rng);
    let dynamic = random_vec(&mut rng, 24, 1.0);
    let statics = random_vec(&mut rng, 5, 1.0);
    let input = SequenceInput { dynamic: &dynamic, statics: &statics };
    let trace = net.forward_trace(&p, &input, None).unwrap();
    let mut g1 = vec![0.0; p.len()];
    let mut g2 = vec![0.0; p.len()];
    net.backward(&p, &input, &trace, &[0.3, -1.1], &mut g1);
    net.backward(&p, &input, &trace, &[0.6, -2.2], &mut g2);
    assert!(g1.iter().zip(&g2).all(|(a, b)| *b == 2.0 * a));
    let mut z = vec![0.0; p.len()];
    net.backward(&p, &input, &trace, &[0.0, 0.0], &mut z);
    assert!(z.iter().all(|v| *v == 0.0));
}
