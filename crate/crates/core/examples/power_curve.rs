//! A small power curve under the log-normal setting.

use otrank::simulation::{power_curve, ScenarioSpec, Setting};

fn main() -> otrank::Result<()> {
    let mut spec = ScenarioSpec::new(Setting::A4, 2, 7);
    spec.m = 100;
    spec.n = 100;
    spec.thetas = vec![-0.3, -0.2, -0.1, 0.0];
    spec.replications = 100;
    let curve = power_curve(&spec)?;
    print!("{}", curve.to_csv());
    eprintln!("{:.1}s", curve.runtime_secs);
    Ok(())
}
