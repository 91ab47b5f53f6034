//! Solves dy = 0.5 sin(y) dB^1 + 0.8 cos(y) dB^2, y_0 = 1 with the
//! third-order Heun scheme on a fine dyadic grid and prints the solution as
//! CSV (same layout as the fBm dump).
//!
//! Usage: rde_solver [HURST] [LEVEL] [SEED]

use std::io::{self, Write};

use fracvar::harness::builtin_example;
use fracvar::{sample_fbm, FbmSampleRequest, HurstIndex};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let hurst: f64 = args.first().map_or(Ok(0.5), |s| s.parse())?;
    let level: u32 = args.get(1).map_or(Ok(12), |s| s.parse())?;
    let seed: u64 = args.get(2).map_or(Ok(1), |s| s.parse())?;

    let example = builtin_example("nonlinear1d")?;
    let driver = sample_fbm(&FbmSampleRequest {
        hurst: HurstIndex::new(hurst)?,
        num_components: example.num_noise_components(),
        fine_level: level,
        horizon: 1.0,
        seed,
    })?;
    let solution = example.trajectory(&driver)?;

    let stdout = io::stdout();
    let mut out = stdout.lock();
    solution.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}
