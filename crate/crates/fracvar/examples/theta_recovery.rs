//! Noise-coefficient recovery from single trajectories: median absolute
//! errors over many realizations, with known and with estimated Hurst index.
//!
//! This prints the raw (un-normalized) medians per (H, n) cell, which is the
//! handy view for picking thresholds, e.g.
//!
//! cargo run --release --example theta_recovery -- --realizations 1000

use clap::Parser;
use rayon::prelude::*;

use fracvar::estimators::{estimate_hurst, estimate_theta_known_hurst, estimate_theta_unknown_hurst};
use fracvar::harness::{builtin_example, derive_seed};
use fracvar::{sample_fbm, subsample, FbmSampleRequest, HurstIndex};

#[derive(Parser)]
struct Options {
    #[arg(long, default_value = "linear2d")]
    example: String,
    #[arg(long, value_delimiter = ',', default_values_t = [0.35, 0.5, 0.7])]
    hurst: Vec<f64>,
    #[arg(long, default_value_t = 14)]
    fine_level: u32,
    #[arg(long, value_delimiter = ',', default_values_t = [4, 6, 8, 10, 12])]
    levels: Vec<u32>,
    #[arg(long, default_value_t = 100)]
    realizations: usize,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let opts = Options::parse();
    let example = builtin_example(&opts.example)?;
    let l2 = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    };

    println!(
        "{:>6} {:>4} {:>14} {:>14} {:>14} {:>10}",
        "H", "n", "med |H-Hn|", "med known", "med unknown", "ratio"
    );
    for (h_idx, &hurst) in opts.hurst.iter().enumerate() {
        let results: Vec<Vec<[f64; 3]>> = (0..opts.realizations)
            .into_par_iter()
            .map(|r| {
                let seed = derive_seed(opts.seed, ((h_idx as u64) << 32) | r as u64);
                let driver = sample_fbm(&FbmSampleRequest {
                    hurst: HurstIndex::new(hurst).expect("hurst in (0,1)"),
                    num_components: example.num_noise_components(),
                    fine_level: opts.fine_level,
                    horizon: 1.0,
                    seed,
                })
                .expect("sampling succeeds");
                let trajectory = example.trajectory(&driver).expect("trajectory stays finite");
                opts.levels
                    .iter()
                    .map(|&n| {
                        let h_err =
                            (estimate_hurst(&trajectory, n).unwrap().value - hurst).abs();
                        let observed = subsample(&trajectory, n).unwrap();
                        let known = estimate_theta_known_hurst(
                            &observed,
                            &example.fields,
                            &example.test_functions,
                            hurst,
                        )
                        .unwrap();
                        let unknown = estimate_theta_unknown_hurst(
                            &trajectory,
                            &example.fields,
                            &example.test_functions,
                            n,
                        )
                        .unwrap();
                        [
                            h_err,
                            l2(&known.theta, &example.true_theta),
                            l2(&unknown.theta, &example.true_theta),
                        ]
                    })
                    .collect()
            })
            .collect();

        for (n_idx, &n) in opts.levels.iter().enumerate() {
            let mut columns = [Vec::new(), Vec::new(), Vec::new()];
            for realization in &results {
                for (c, column) in columns.iter_mut().enumerate() {
                    column.push(realization[n_idx][c]);
                }
            }
            let h_med = median(&mut columns[0]);
            let known_med = median(&mut columns[1]);
            let unknown_med = median(&mut columns[2]);
            println!(
                "{hurst:>6} {n:>4} {h_med:>14.8} {known_med:>14.8} {unknown_med:>14.8} {:>10.3}",
                unknown_med / known_med
            );
        }
    }
    Ok(())
}
