use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, Context};
use npmix_core::datasets::DatasetSpec;
use npmix_core::linkage::{cut, group, single_linkage, threshold_check, Assignment, ThresholdCheck};
use npmix_core::metrics::{align_assignment, distance_matrix, eta, EtaOptions, SeparationReport};
use npmix_core::mixture::{GaussianMixture, MixingMeasure};
use npmix_core::quadrature::QuadratureSpec;
use npmix_core::transport::wasserstein;
use serde::Serialize;

use crate::artifacts::Artifacts;
use crate::cluster::ModelFile;
use crate::config::RunConfig;
use crate::{usage, Failure, Outcome};

#[derive(Debug, Serialize)]
struct PairSummary {
    count: usize,
    /// Largest within-group or smallest between-group distance.
    extreme: Option<f64>,
    bound: f64,
    holds: bool,
}

#[derive(Debug, Serialize)]
struct Dichotomy {
    eta: f64,
    within: PairSummary,
    between: PairSummary,
    check: ThresholdCheck,
}

#[derive(Debug, Serialize)]
struct Report {
    generator: String,
    k: usize,
    l: usize,
    dim: usize,
    /// `population` when the generator's own components are diagnosed.
    source: String,
    separation: Option<SeparationReport>,
    vacuous: bool,
    threshold: Option<Dichotomy>,
    r_wasserstein: f64,
    wasserstein: Option<f64>,
    errors: Vec<String>,
}

pub fn run(cfg: &RunConfig) -> Outcome {
    let (name, lambda) = load_generator(cfg)?;
    let quad = cfg.quadrature.unwrap_or_default();
    let r = cfg.diagnose.r_wasserstein.unwrap_or(1.0);
    if !(r >= 1.0 && r.is_finite()) {
        return Err(usage("--r-wasserstein must be a finite value >= 1"));
    }

    let (fitted, alpha, source) = match &cfg.diagnose.model {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let model: ModelFile =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            let fitted = model.fit.mixture;
            if fitted.dim() != lambda.dim() {
                return Err(usage(format!(
                    "model has dimension {}, generator has {}",
                    fitted.dim(),
                    lambda.dim()
                )));
            }
            let alpha = match &cfg.diagnose.assignment {
                Some(p) => read_assignment(p)?,
                None => {
                    let k = lambda.len().min(fitted.len());
                    cut(&single_linkage(&distance_matrix(&fitted)?), k)?
                }
            };
            if alpha.len() != fitted.len() {
                return Err(usage(format!(
                    "assignment covers {} components, model has {}",
                    alpha.len(),
                    fitted.len()
                )));
            }
            let alpha = align_assignment(&lambda, &fitted, &alpha)?;
            (fitted, alpha, path.display().to_string())
        }
        None => {
            let (fitted, alpha) = lambda.flatten();
            (fitted, alpha, "population".to_string())
        }
    };

    let opts = EtaOptions {
        n_dirichlet: cfg.diagnose.n_dirichlet.unwrap_or(EtaOptions::default().n_dirichlet),
        seed: cfg.seed.unwrap_or(0),
        quad,
    };
    let mut report = Report {
        generator: name,
        k: lambda.len(),
        l: fitted.len(),
        dim: lambda.dim(),
        source,
        separation: None,
        vacuous: lambda.len() == 1,
        threshold: None,
        r_wasserstein: r,
        wasserstein: None,
        errors: Vec::new(),
    };
    if alpha.k() != lambda.len() {
        report.errors.push(format!(
            "assignment has {} groups, generator has {} atoms",
            alpha.k(),
            lambda.len()
        ));
    } else {
        match eta(&lambda, &fitted, &alpha, &opts) {
            Ok(sep) => {
                match dichotomy(&fitted, &alpha, sep.eta) {
                    Ok(d) => report.threshold = Some(d),
                    Err(e) => report.errors.push(format!("threshold check: {e}")),
                }
                report.separation = Some(sep);
            }
            Err(e) => report.errors.push(format!("separation: {e}")),
        }
    }
    match grouped_wasserstein(&fitted, &alpha, &lambda, r, &quad) {
        Ok(w) => report.wasserstein = Some(w),
        Err(e) => report.errors.push(format!("wasserstein: {e}")),
    }

    let text = render(&report);
    print!("{text}");
    if let Some(dir) = &cfg.output.dir {
        let mut out = Artifacts::create(dir)?;
        out.write_json("diagnose.json", &report)?;
        out.write("diagnose.txt", text.as_bytes())?;
        out.finish("diagnose", cfg, Default::default())?;
    }
    if report.errors.is_empty() {
        Ok(())
    } else {
        Err(Failure::Runtime(anyhow!("diagnostics incomplete: {}", report.errors.join("; "))))
    }
}

fn load_generator(cfg: &RunConfig) -> Result<(String, MixingMeasure), Failure> {
    if let Some(path) = &cfg.diagnose.generator {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if value.get("name").is_some() {
            let spec: DatasetSpec = serde_json::from_value(value).map_err(|e| usage(e.to_string()))?;
            return from_spec(&spec);
        }
        let m: MixingMeasure = serde_json::from_value(value)
            .map_err(|e| usage(format!("{} is neither a dataset spec nor a mixing measure: {e}", path.display())))?;
        return Ok((path.display().to_string(), m));
    }
    match &cfg.data.dataset {
        Some(spec) => from_spec(spec),
        None => Err(usage("diagnose needs --generator or --dataset")),
    }
}

fn from_spec(spec: &DatasetSpec) -> Result<(String, MixingMeasure), Failure> {
    let m = spec.mixing_measure().map_err(|e| usage(e.to_string()))?;
    let m = m.ok_or_else(|| usage(format!("{} is not a mixture of Gaussian mixtures", spec.name)))?;
    Ok((spec.name.to_string(), m))
}

fn read_assignment(path: &Path) -> Result<Assignment, Failure> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("parsing {}: {e}", path.display())))
}

fn dichotomy(fitted: &GaussianMixture, alpha: &Assignment, eta: f64) -> npmix_core::Result<Dichotomy> {
    let dm = distance_matrix(fitted)?;
    let (mut within, mut between) = (Vec::new(), Vec::new());
    for i in 0..dm.len() {
        for j in (i + 1)..dm.len() {
            if alpha.group_of(i) == alpha.group_of(j) {
                within.push(dm.get(i, j));
            } else {
                between.push(dm.get(i, j));
            }
        }
    }
    let max_within = within.iter().copied().reduce(f64::max);
    let min_between = between.iter().copied().reduce(f64::min);
    Ok(Dichotomy {
        eta,
        within: PairSummary {
            count: within.len(),
            extreme: max_within,
            bound: eta,
            holds: max_within.is_none_or(|v| v <= eta),
        },
        between: PairSummary {
            count: between.len(),
            extreme: min_between,
            bound: 2.0 * eta,
            holds: min_between.is_none_or(|v| v >= 2.0 * eta),
        },
        check: threshold_check(&dm, alpha, eta)?,
    })
}

fn grouped_wasserstein(
    fitted: &GaussianMixture,
    alpha: &Assignment,
    lambda: &MixingMeasure,
    r: f64,
    quad: &QuadratureSpec,
) -> npmix_core::Result<f64> {
    wasserstein(&group(fitted, alpha)?, lambda, r, quad)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.6}"))
}

fn render(r: &Report) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "generator: {} (K = {}, d = {})", r.generator, r.k, r.dim);
    let _ = writeln!(s, "fitted components: {} ({})", r.l, r.source);
    if let Some(sep) = &r.separation {
        let _ = writeln!(s, "separation");
        let _ = writeln!(
            s,
            "  eta                 {:.6} (diameter {:.6}, approximation {:.6})",
            sep.eta, sep.diameter_term, sep.approximation_term
        );
        let _ = writeln!(s, "  4 * eta             {:.6}", 4.0 * sep.eta);
        let finite = |v: f64| if v.is_finite() { format!("{v:.6}") } else { "-".to_string() };
        let _ = writeln!(s, "  min between-group   {}", finite(sep.min_between));
        let _ = writeln!(s, "  max within-group    {:.6}", sep.max_within);
        let _ = writeln!(s, "  xi margin           {}", finite(sep.xi_margin));
        if r.vacuous {
            let _ = writeln!(s, "  satisfied: true (vacuous: K = 1 has no between-group pairs)");
        } else {
            let _ = writeln!(s, "  satisfied: {}", sep.satisfied);
        }
    }
    if let Some(t) = &r.threshold {
        let yes = |b: bool| if b { "yes" } else { "no" };
        let _ = writeln!(s, "threshold dichotomy (within <= eta, between >= 2 eta)");
        let _ = writeln!(s, "  {:<8} {:>6} {:>10} {:>12} {:>6}", "pairs", "count", "extreme", "bound", "holds");
        let _ = writeln!(
            s,
            "  {:<8} {:>6} {:>10} {:>12} {:>6}",
            "within",
            t.within.count,
            fmt_opt(t.within.extreme),
            format!("<= {:.6}", t.within.bound),
            yes(t.within.holds)
        );
        let _ = writeln!(
            s,
            "  {:<8} {:>6} {:>10} {:>12} {:>6}",
            "between",
            t.between.count,
            fmt_opt(t.between.extreme),
            format!(">= {:.6}", t.between.bound),
            yes(t.between.holds)
        );
        let _ = writeln!(s, "  violations: {}", t.check.violations.len());
    }
    let _ = writeln!(s, "W_{} (grouped fit, generator): {}", r.r_wasserstein, fmt_opt(r.wasserstein));
    for e in &r.errors {
        let _ = writeln!(s, "error: {e}");
    }
    s
}
