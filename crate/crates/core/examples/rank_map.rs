//! Empirical rank maps: solve the assignment problem between a sample and
//! a grid and watch the ranks approach the population rank map.

use otrank::lap::empirical_rank_map;
use otrank::reference::{GridSpec, NuTag};
use otrank::rng::substream;
use otrank::simulation::{sample_family, Family};
use otrank::transport::{rank_convergence_error, PopulationMap};
use nalgebra::DMatrix;

fn main() -> otrank::Result<()> {
    let map = PopulationMap::gaussian(vec![0.0, 0.0], &DMatrix::identity(2, 2))?;
    for n in [100, 400, 1600] {
        let mut rng = substream(1, n as u64);
        let x = sample_family(&Family::Gaussian, 0.0, n, 2, &mut rng)?;
        let grid = GridSpec::new(NuTag::Gaussian).build(n, 2)?;
        let t = std::time::Instant::now();
        let ranked = empirical_rank_map(&x, &grid)?;
        let err = rank_convergence_error(&x, &grid, &map)?;
        println!(
            "N = {n:5}  cost = {:10.3}  L2 rank error = {err:.4}  ({:.3}s)",
            ranked.assignment.total_cost,
            t.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
