//! Samples a two-component fractional Brownian path and prints it as CSV.
//!
//! Usage: sample_fbm [HURST] [LEVEL] [SEED]
//!
//! Redirect stdout to keep the path, e.g.
//! `cargo run --release --example sample_fbm -- 0.7 12 42 > path.csv`.
//! The output can be fed back through `fracvar estimate --input path.csv`.

use std::io::{self, Write};

use fracvar::{sample_fbm, FbmSampleRequest, HurstIndex};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let hurst: f64 = args.first().map_or(Ok(0.7), |s| s.parse())?;
    let level: u32 = args.get(1).map_or(Ok(10), |s| s.parse())?;
    let seed: u64 = args.get(2).map_or(Ok(42), |s| s.parse())?;

    let path = sample_fbm(&FbmSampleRequest {
        hurst: HurstIndex::new(hurst)?,
        num_components: 2,
        fine_level: level,
        horizon: 1.0,
        seed,
    })?;

    let stdout = io::stdout();
    let mut out = stdout.lock();
    path.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}
