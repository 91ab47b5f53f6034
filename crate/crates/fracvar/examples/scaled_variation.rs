//! Convergence of scaled quadratic variation toward t.
//!
//! For fBm with Hurst index H the only non-trivial scaling exponent is
//! 1 - 2H, and the scaled quadratic variation at that exponent converges to
//! the identity. The table below shows the full-horizon value and the
//! worst deviation over the grid for a few observation levels.

use fracvar::{sample_fbm, scaled_qv, subsample, FbmSampleRequest, HurstIndex};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for hurst in [0.35, 0.5, 0.7] {
        let path = sample_fbm(&FbmSampleRequest {
            hurst: HurstIndex::new(hurst)?,
            num_components: 1,
            fine_level: 14,
            horizon: 1.0,
            seed: 7,
        })?;
        let exponent = 1.0 - 2.0 * hurst;
        println!("H = {hurst}, exponent = {exponent}");
        println!("{:>5} {:>12} {:>12}", "n", "qv(T)", "sup |qv - t|");
        for level in [4, 6, 8, 10, 12, 14] {
            let observed = subsample(&path, level)?;
            let curve = scaled_qv(&observed, exponent)?;
            let sup = curve
                .values()
                .iter()
                .enumerate()
                .map(|(i, v)| (v - curve.time(i)).abs())
                .fold(0.0, f64::max);
            println!("{level:>5} {:>12.6} {sup:>12.6}", curve.final_value());
        }
        println!();
    }
    Ok(())
}
