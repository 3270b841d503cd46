use std::collections::BTreeMap;
use std::fmt::Write as _;

use anyhow::Context;
use npmix_core::em::{EmConfig, FitResult};
use npmix_core::evaluation::ari;
use npmix_core::io::read_sample_csv;
use npmix_core::mixture::LabeledSample;
use npmix_core::npmix::{default_l, npmix, NpmixConfig};
use npmix_core::partition::{partition_grid, PartitionModel};
use serde::{Deserialize, Serialize};

use crate::artifacts::{sha256_hex, Artifacts};
use crate::config::RunConfig;
use crate::{usage, Outcome};

pub const DEFAULT_GRID_RES: usize = 200;

/// Contents of `model.json`: the fitted mixture with its fit metadata, plus
/// the grouped partition model under `partition`.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(flatten)]
    pub fit: FitResult,
    pub partition: PartitionModel,
}

pub fn run(cfg: &RunConfig) -> Outcome {
    let input = cfg.data.input.as_ref().ok_or_else(|| usage("cluster needs --input"))?;
    let k = cfg.model.k.ok_or_else(|| usage("cluster needs --k"))?;
    if k == 0 {
        return Err(usage("--k must be at least 1"));
    }
    if let Some(l) = cfg.model.l {
        if k > l {
            return Err(usage(format!("K = {k} exceeds L = {l}")));
        }
    }
    let dir = cfg.output.dir.as_ref().ok_or_else(|| usage("cluster needs --output-dir"))?;

    let bytes = std::fs::read(input).with_context(|| format!("reading {}", input.display()))?;
    let data = read_sample_csv(bytes.as_slice()).with_context(|| format!("parsing {}", input.display()))?;
    let l = cfg.model.l.unwrap_or_else(|| default_l(k, data.len()));
    if data.len() < l {
        return Err(usage(format!("L = {l} exceeds the sample size {}", data.len())));
    }

    let npcfg = NpmixConfig {
        k,
        em: em_config(cfg, l),
        linkage: Default::default(),
    };
    npcfg.em.validate().map_err(|e| usage(e.to_string()))?;
    let result = npmix(&data.without_labels(), &npcfg)?;

    let mut out = Artifacts::create(dir)?;
    out.write_json(
        "model.json",
        &ModelFile {
            fit: result.fit.clone(),
            partition: result.model.clone(),
        },
    )?;
    let mut buf = Vec::new();
    result.distances.write_csv(&mut buf)?;
    out.write("distmat.csv", &buf)?;
    buf.clear();
    result.dendrogram.write_csv(&mut buf)?;
    out.write("dendrogram.csv", &buf)?;
    out.write_json("assignment.json", &result.assignment)?;

    let mut labels = String::from("row,label,margin\n");
    for (i, c) in result.classifications.iter().enumerate() {
        writeln!(labels, "{},{},{}", i + 1, c.label + 1, c.margin)?;
    }
    out.write("labels.csv", labels.as_bytes())?;

    if data.dim() <= 2 {
        let bounds = match &cfg.grid.bounds {
            Some(b) => b.iter().map(|&[lo, hi]| (lo, hi)).collect(),
            None => padded_bounds(&data),
        };
        let res = cfg.grid.resolution.unwrap_or(DEFAULT_GRID_RES);
        let grid = partition_grid(&result.model, &bounds, res).map_err(|e| usage(e.to_string()))?;
        buf.clear();
        grid.write_csv(&mut buf)?;
        out.write("grid.csv", &buf)?;
        buf.clear();
        grid.write_svg(&mut buf)?;
        out.write("grid.svg", &buf)?;
    }

    let inputs = BTreeMap::from([(input.display().to_string(), sha256_hex(&bytes))]);
    out.finish("cluster", cfg, inputs)?;

    let fit = &result.fit;
    println!(
        "fit: L = {l}, log-likelihood {:.6}, {} iterations, converged {}, restart {}",
        fit.log_likelihood, fit.iterations, fit.converged, fit.restart_index
    );
    let mut sizes = vec![0usize; k];
    for c in &result.classifications {
        sizes[c.label] += 1;
    }
    println!("clusters: K = {k}, sizes {sizes:?}");
    if let Some(truth) = data.labels() {
        println!("ARI vs input labels: {:.6}", ari(truth, &result.labels())?);
    }
    println!("artifacts written to {}", dir.display());
    Ok(())
}

fn em_config(cfg: &RunConfig, l: usize) -> EmConfig {
    let mut em = EmConfig::new(l, cfg.seed.unwrap_or(0));
    let e = &cfg.em;
    if let Some(v) = e.max_iters {
        em.max_iters = v;
    }
    if let Some(v) = e.tol {
        em.tol = v;
    }
    if let Some(v) = e.restarts {
        em.restarts = v;
    }
    em.cov_ridge = e.cov_ridge;
    em.weight_floor = e.weight_floor;
    em
}

/// Bounding box of the data, widened by 10% of its extent on each side.
fn padded_bounds(data: &LabeledSample) -> Vec<(f64, f64)> {
    (0..data.dim())
        .map(|a| {
            let (lo, hi) = data
                .points()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x[a]), hi.max(x[a])));
            let pad = if hi > lo { 0.1 * (hi - lo) } else { 1.0 };
            (lo - pad, hi + pad)
        })
        .collect()
}
