//! Trains a ReLU surrogate of the pendulum flow map and saves it as JSON.

use hjnet::flow::IntegratorConfig;
use hjnet::hamiltonians::HamiltonianSpec;
use hjnet::neural::{
    generate_dataset, surrogate_rmse, surrogate_sup_error, train_flow_net, AdamConfig,
    TrainConfig,
};

fn main() -> hjnet::Result<()> {
    let spec = HamiltonianSpec::pendulum();
    let cfg = IntegratorConfig::new(1e-2, 0.0);
    let train = generate_dataset(&spec, 0.3, 3000, 1.0, 0, &cfg)?;
    let test = generate_dataset(&spec, 0.3, 500, 1.0, 1, &cfg)?;
    let tcfg = TrainConfig {
        epochs: 150,
        adam: AdamConfig {
            step_size: 1e-2,
            ..AdamConfig::default()
        },
        step_decay: 0.98,
        ..TrainConfig::default()
    };
    let (model, history) = train_flow_net(&train, &[3, 48, 48, 4], &tcfg)?;
    for rec in history.iter().step_by(25) {
        println!("{rec:?}");
    }
    let (inputs, targets): (Vec<_>, Vec<_>) = test.samples.into_iter().unzip();
    println!(
        "size {} depth {}: held-out sup error {:.3e}, rmse {:.3e}",
        model.size(),
        model.depth(),
        surrogate_sup_error(&model, &inputs, &targets)?,
        surrogate_rmse(&model, &inputs, &targets)?
    );
    let path = std::env::temp_dir().join("pendulum_flow.json");
    model.save(&path)?;
    println!("saved {}", path.display());
    Ok(())
}
