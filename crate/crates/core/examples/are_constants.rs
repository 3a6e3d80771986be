//! Efficiency constants and the κ_d table.

use otrank::are::{
    are_gaussian_uniform_erd, are_table, are_table_csv, elliptical_bound, hodges_lehmann_bound,
    kappa_d,
};

fn main() -> otrank::Result<()> {
    println!("3/pi            = {:.7}", are_gaussian_uniform_erd());
    println!("108/125         = {}", hodges_lehmann_bound());
    println!("elliptical(1e6) = {:.6}", elliptical_bound(1_000_000)?);
    let k1 = kappa_d(1)?;
    println!(
        "kappa_1: closed form {:.6}, quadrature {:.6}",
        k1.closed_form.unwrap_or(f64::NAN),
        k1.value()
    );
    print!("\n{}", are_table_csv(&are_table(10)?));
    Ok(())
}
