//! Universal null tables: the same table serves every data set with the
//! same sizes, grid and score, and is cached on disk.

use otrank::calibration::{permutation_null, NullProblem, NullRoute};
use otrank::reference::{GridSpec, NuTag, ScoreKind};
use otrank::rng::substream;
use otrank::simulation::{sample_family, Family};
use otrank::special::chi2_quantile;
use otrank::statistics::TwoSampleInput;

fn main() -> otrank::Result<()> {
    let mut rng = substream(1, 0);
    let x = sample_family(&Family::Gaussian, 0.0, 40, 2, &mut rng)?;
    let y = sample_family(&Family::Gaussian, 0.0, 40, 2, &mut rng)?;
    let input = TwoSampleInput::new(x, y, GridSpec::new(NuTag::Gaussian), ScoreKind::Identity)?;
    let problem = NullProblem::two_sample(&input, input.build_grid()?)?;

    let dir = tempfile::tempdir()?;
    for route in [NullRoute::LabelPermutation, NullRoute::FreshGaussian] {
        let t = std::time::Instant::now();
        let table = permutation_null(&problem, 2000, 42, route, Some(dir.path()))?;
        println!(
            "{:<18} 95% quantile = {:.3}  cutoff(0.05) = {:.3}  ({:.2}s)",
            route.as_str(),
            table.quantile(0.95),
            table.cutoff(0.05),
            t.elapsed().as_secs_f64()
        );
    }
    let t = std::time::Instant::now();
    permutation_null(&problem, 2000, 42, NullRoute::FreshGaussian, Some(dir.path()))?;
    println!("cache hit in {:.4}s", t.elapsed().as_secs_f64());
    println!("chi2_2 95% quantile = {:.3}", chi2_quantile(2, 0.95)?);
    Ok(())
}
