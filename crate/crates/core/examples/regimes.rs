//! Trains the full model, its alpha = 0 ablation and a fixed-filter baseline
//! on the three synthetic homophily regimes and prints test AUROC per seed.
//!
//! `cargo run --release -p rho-core --example regimes -- [epochs] [seeds] ['{"n": 2000, ...}'] ['{"activation": "tanh", ...}']`
//!
//! The optional JSON objects override generator fields on top of each preset
//! and model config fields respectively.

use std::time::Instant;

use rho_core::cli::{train_pipeline, RunConfig};
use rho_core::data::{synth_dataset, SynthSpec};

fn main() -> rho_core::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let epochs: usize = args.first().and_then(|s| s.parse().ok()).unwrap_or(60);
    let seeds: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let overrides: serde_json::Value = match args.get(2) {
        Some(text) => serde_json::from_str(text)?,
        None => serde_json::json!({}),
    };
    let model_overrides: serde_json::Value = match args.get(3) {
        Some(text) => serde_json::from_str(text)?,
        None => serde_json::json!({}),
    };

    for preset in ["80-20", "50-50", "20-80"] {
        let mut sums = [0.0; 3];
        for seed in 0..seeds {
            let mut value = serde_json::to_value(SynthSpec::preset(preset)?)?;
            value["n"] = 2000.into();
            value["seed"] = seed.into();
            for (k, v) in overrides.as_object().into_iter().flatten() {
                value[k] = v.clone();
            }
            let spec: SynthSpec = serde_json::from_value(value)?;
            let data = synth_dataset(&spec)?.dataset;

            let mut cfg = RunConfig {
                seed,
                ..RunConfig::default()
            };
            cfg.train.epochs = epochs;
            let mut model = serde_json::to_value(&cfg.model)?;
            for (k, v) in model_overrides.as_object().into_iter().flatten() {
                model[k] = v.clone();
            }
            cfg.model = serde_json::from_value(model)?;
            let t = Instant::now();
            let out = train_pipeline(&data, &cfg)?;
            let elapsed = t.elapsed().as_secs_f64();

            let mut ablated = cfg.clone();
            ablated.model.alpha = 0.0;
            let mut fixed = ablated.clone();
            fixed.model.filter_init = 1.0;
            fixed.train.freeze_filters = true;
            let row = [
                out.metrics.auroc,
                train_pipeline(&data, &ablated)?.metrics.auroc,
                train_pipeline(&data, &fixed)?.metrics.auroc,
            ];
            println!(
                "{preset} seed {seed}: full {:.4} alpha0 {:.4} fixed {:.4} | k {:.2?} K {:.2} ({elapsed:.1}s)",
                row[0],
                row[1],
                row[2],
                out.params.ccr_k.to_vec(),
                out.params.cwr_k.mean().unwrap_or(0.0)
            );
            for (s, r) in sums.iter_mut().zip(row) {
                *s += r;
            }
        }
        let k = seeds as f64;
        println!(
            "{preset} mean: full {:.4} alpha0 {:.4} fixed {:.4}",
            sums[0] / k,
            sums[1] / k,
            sums[2] / k
        );
    }
    Ok(())
}
