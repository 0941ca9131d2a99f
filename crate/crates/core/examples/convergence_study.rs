//! Pipeline error against grid resolution for r = 2, 3, 4 with the fitted
//! log-log slope.

use hjnet::bench::{convergence_study, ConvergenceConfig, ProblemConfig};

fn main() -> hjnet::Result<()> {
    let problem = ProblemConfig::default();
    for r in [2, 3, 4] {
        let cfg = ConvergenceConfig {
            r: Some(r),
            ..ConvergenceConfig::default()
        };
        let report = convergence_study(&problem, &cfg)?;
        println!("r = {r}");
        for row in &report.rows {
            println!("  N = {:4}  h = {:.4}  sup error {:.3e}", row.n, row.h, row.sup_error);
        }
        match report.fitted_slope {
            Some(s) => println!("  slope {s:.3}"),
            None => println!("  slope undefined"),
        }
    }
    Ok(())
}
