//! Hurst-index estimation from a single trajectory of the 2d linear system,
//! across observation levels. The estimate uses only the ratio of plain
//! quadratic variations at levels n and n + 1.

use fracvar::estimators::estimate_hurst;
use fracvar::harness::builtin_example;
use fracvar::{sample_fbm, FbmSampleRequest, HurstIndex};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let example = builtin_example("linear2d")?;
    for hurst in [0.35, 0.5, 0.7] {
        let driver = sample_fbm(&FbmSampleRequest {
            hurst: HurstIndex::new(hurst)?,
            num_components: example.num_noise_components(),
            fine_level: 14,
            horizon: 1.0,
            seed: 2,
        })?;
        let trajectory = example.trajectory(&driver)?;
        println!("true H = {hurst}");
        println!("{:>5} {:>12} {:>12}", "n", "estimate", "|error|");
        for level in [4, 6, 8, 10, 12] {
            let estimate = estimate_hurst(&trajectory, level)?;
            let flag = if estimate.in_standard_range() { "" } else { "  (outside (0,1))" };
            println!(
                "{level:>5} {:>12.6} {:>12.6}{flag}",
                estimate.value,
                (estimate.value - hurst).abs()
            );
        }
        println!();
    }
    Ok(())
}
