//! Independence tests under a Konijn alternative with log-normal blocks.

use otrank::calibration::{run_independence, TestOptions};
use otrank::reference::{GridSpec, NuTag, ScoreKind};
use otrank::rng::substream;
use otrank::simulation::{konijn_mix, rectangular_identity, sample_family, Family};
use otrank::statistics::{IndependenceInput, TestKind};

fn main() -> otrank::Result<()> {
    let n = 300;
    let mut rng = substream(5, 0);
    let x0 = sample_family(&Family::LogNormal, 0.0, n, 2, &mut rng)?;
    let y0 = sample_family(&Family::LogNormal, 0.0, n, 2, &mut rng)?;
    let (x, y) = konijn_mix(&x0, &y0, &rectangular_identity(2, 2), 1.5)?;
    let input = IndependenceInput::symmetric(x, y, GridSpec::new(NuTag::Gaussian), ScoreKind::Identity)?;

    let asym = TestOptions::asymptotic(0.05);
    let perm = TestOptions::permutation(0.05, 500, 9);
    for (kind, opts) in [
        (TestKind::RankSpearman, &asym),
        (TestKind::Wilks, &asym),
        (TestKind::RankDcov, &perm),
    ] {
        let r = run_independence(kind, &input, opts)?;
        println!("{:<14} stat = {:9.4}  p = {:.4}  reject = {}", kind, r.statistic, r.p_value, r.decision);
    }
    Ok(())
}
