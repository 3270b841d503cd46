use std::fs::File;
use std::io::BufWriter;

use anyhow::Context;
use npmix_core::datasets::generate_seeded;
use npmix_core::io::write_sample_csv;

use crate::config::RunConfig;
use crate::{usage, Outcome};

pub fn run(cfg: &RunConfig) -> Outcome {
    let spec = cfg.data.dataset.as_ref().ok_or_else(|| usage("generate needs --dataset"))?;
    spec.validate().map_err(|e| usage(e.to_string()))?;
    let n = cfg.data.n.ok_or_else(|| usage("generate needs --n"))?;
    let out = cfg.output.file.as_ref().ok_or_else(|| usage("generate needs --output"))?;
    let seed = cfg.seed.unwrap_or(spec.seed);

    let sample = generate_seeded(spec, n, seed)?;
    let file = File::create(out).with_context(|| format!("creating {}", out.display()))?;
    write_sample_csv(&sample, BufWriter::new(file))?;

    let k = spec.k()?;
    let mut counts = vec![0usize; k];
    for &l in sample.labels().expect("generated samples are labeled") {
        counts[l] += 1;
    }
    println!("wrote {} rows to {}", sample.len(), out.display());
    for (label, c) in counts.iter().enumerate() {
        println!("  label {:>2}: {c}", label + 1);
    }
    Ok(())
}
