//! Builds the three reference grids and prints their moment summaries.

use otrank::reference::{GridSpec, NuTag, ReferenceGrid};

fn main() -> otrank::Result<()> {
    for nu in [NuTag::UniformCube, NuTag::Gaussian, NuTag::SphericalUniform] {
        let grid = GridSpec::new(nu).build(500, 2)?;
        let (mean, sq) = grid.moment_summary();
        println!("{nu:<18} mean = ({:+.4}, {:+.4})  E|h|^2 = {sq:.4}", mean[0], mean[1]);
    }

    let grid = GridSpec::new(NuTag::Gaussian).build(8, 2)?;
    let csv = grid.to_csv();
    let back = ReferenceGrid::from_csv(&csv)?;
    assert_eq!(back.points(), grid.points());
    print!("\n{csv}");
    Ok(())
}
