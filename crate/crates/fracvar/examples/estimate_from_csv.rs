//! Single-trajectory estimation from a path CSV, in-process (the library
//! counterpart of `fracvar estimate`): simulate or load a path, then recover
//! the Hurst index and the noise coefficients at one observation level.

use fracvar::estimators::EstimateRecord;
use fracvar::harness::builtin_example;
use fracvar::{
    estimate_theta_known_hurst, estimate_theta_unknown_hurst, sample_fbm, subsample,
    FbmSampleRequest, HurstIndex, SampledPath,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let example = builtin_example("nonlinear1d")?;
    let hurst = 0.5;
    let level = 10;

    let driver = sample_fbm(&FbmSampleRequest {
        hurst: HurstIndex::new(hurst)?,
        num_components: example.num_noise_components(),
        fine_level: 14,
        horizon: 1.0,
        seed: 99,
    })?;
    let trajectory = example.trajectory(&driver)?;

    // Round-trip through the CSV interchange format, as an external caller
    // would: dump the observed path, then estimate from the file contents.
    let mut buffer = Vec::new();
    trajectory.write_csv(&mut buffer)?;
    let loaded = SampledPath::read_csv(buffer.as_slice())?;

    let known = estimate_theta_known_hurst(
        &subsample(&loaded, level)?,
        &example.fields,
        &example.test_functions,
        hurst,
    )?;
    let unknown =
        estimate_theta_unknown_hurst(&loaded, &example.fields, &example.test_functions, level)?;

    println!("known-H estimate:");
    println!("{}", serde_json::to_string_pretty(&EstimateRecord::from(&known))?);
    println!("unknown-H estimate:");
    println!("{}", serde_json::to_string_pretty(&EstimateRecord::from(&unknown))?);
    Ok(())
}
