//! Rank Hotelling against Hotelling on heavy-tailed shifted data.

use otrank::calibration::{run_two_sample, TestOptions};
use otrank::reference::{GridSpec, NuTag, ScoreKind};
use otrank::rng::substream;
use otrank::simulation::{sample_family, Family};
use otrank::statistics::{TestKind, TwoSampleInput};

fn main() -> otrank::Result<()> {
    let mut rng = substream(11, 0);
    let x = sample_family(&Family::LogNormal, 0.0, 150, 2, &mut rng)?;
    let y = sample_family(&Family::LogNormal, -0.3, 150, 2, &mut rng)?;
    let opts = TestOptions::asymptotic(0.05);

    for (label, nu) in [("uniform ERD", NuTag::UniformCube), ("gaussian ERD", NuTag::Gaussian)] {
        let input = TwoSampleInput::new(x.clone(), y.clone(), GridSpec::new(nu), ScoreKind::Identity)?;
        let r = run_two_sample(TestKind::RankHotelling, &input, &opts)?;
        println!("rank hotelling, {label:<13} T = {:8.3}  p = {:.4}", r.statistic, r.p_value);
    }
    let input = TwoSampleInput::new(x, y, GridSpec::new(NuTag::Gaussian), ScoreKind::Identity)?;
    let r = run_two_sample(TestKind::Hotelling, &input, &opts)?;
    println!("hotelling                    T = {:8.3}  p = {:.4}", r.statistic, r.p_value);
    Ok(())
}
