//! Chi-square quantiles and the hypergeometric constant behind κ_d.

use otrank::special::{chi2_quantile, chi2_sf, hyp2f1_at_minus_one};

fn main() -> otrank::Result<()> {
    for df in [1, 2, 4, 9] {
        let q = chi2_quantile(df, 0.95)?;
        println!("chi2_{df}: q95 = {q:.6}  sf(q95) = {:.6}", chi2_sf(df, q)?);
    }
    for d in 2..=5 {
        let k = d as f64;
        println!("2F1(d-1/2, d/2-1/2; d/2+1/2; -1) at d = {d}: {:.10}", hyp2f1_at_minus_one(k - 0.5, 0.5 * k - 0.5, 0.5 * k + 0.5)?);
    }
    Ok(())
}
