//! Compares the pipeline with a direct operator-regression network of
//! matched parameter count on a random family of initial data.

use hjnet::bench::{baseline_direct, BaselineConfig, ProblemConfig};

fn main() -> hjnet::Result<()> {
    let mut cfg = BaselineConfig {
        n_train: 128,
        widths: vec![0, 16, 32],
        ..BaselineConfig::default()
    };
    cfg.direct_train.epochs = 150;
    let report = baseline_direct(&ProblemConfig::default(), &cfg, 0)?;
    println!("width  hjnet_params  hjnet_error  direct_params  direct_error  status");
    for row in &report.rows {
        println!(
            "{:5}  {:12}  {:>11}  {:13}  {:12.3e}  {}",
            row.hjnet_width,
            row.hjnet_parameters,
            row.hjnet_error.map_or("-".into(), |e| format!("{e:.3e}")),
            row.baseline_parameters,
            row.baseline_error,
            match &row.status {
                Ok(()) => "ok",
                Err(e) => e,
            }
        );
    }
    Ok(())
}
