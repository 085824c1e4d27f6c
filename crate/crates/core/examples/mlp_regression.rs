//! Fits the network to sin(x) with Adam and MSE, then round-trips it
//! through a JSON checkpoint.

use qdgate::nn::{init_mlp, mse_loss, Adam, AdamConfig, Checkpoint};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let xs: Vec<f64> = (0..64).map(|k| -3.0 + 6.0 * k as f64 / 63.0).collect();
    let mut net = init_mlp(1, 1, 42)?;
    let mut adam = Adam::new(
        AdamConfig {
            lr: 3e-3,
            ..AdamConfig::default().without_decay()
        },
        net.params().len(),
    );

    for epoch in 0..=2000 {
        let mut grad = vec![0.0; net.params().len()];
        let mut loss = 0.0;
        for &x in &xs {
            let (y, cache) = net.forward(&[x])?;
            let (l, dl) = mse_loss(&y, &[x.sin()])?;
            loss += l / xs.len() as f64;
            let g = net.backward(&cache, &dl)?;
            for (a, b) in grad.iter_mut().zip(&g.params) {
                *a += b / xs.len() as f64;
            }
        }
        adam.step(net.params_mut(), &grad)?;
        if epoch % 250 == 0 {
            println!("epoch {epoch:4}  mse {loss:.3e}");
        }
    }

    let json = Checkpoint::new().with_network("fit", &net).to_json();
    let restored = Checkpoint::from_json(&json)?;
    assert_eq!(restored.network("fit")?, &net);
    println!(
        "checkpoint: {} bytes, restored network identical",
        json.len()
    );
    for x in [-2.0, 0.0, 1.0] {
        println!(
            "  f({x:+.1}) = {:+.4}  sin = {:+.4}",
            net.predict(&[x])?[0],
            f64::sin(x)
        );
    }
    Ok(())
}
