//! Sample-size matching: the uniform-ERD rank test at n against Hotelling
//! at 0.864 n on Epanechnikov data.

use otrank::simulation::{hl_sample_size_match, HlSpec, Setting};

fn main() -> otrank::Result<()> {
    let mut spec = HlSpec::new(Setting::H1, 1)?;
    spec.ns = vec![100, 300, 500];
    spec.replications = 100;
    let report = hl_sample_size_match(&spec)?;
    print!("{}", report.to_csv());
    println!("max gap = {:.3}, min gaussian advantage = {:+.3}", report.max_gap, report.min_gaussian_advantage);
    Ok(())
}
