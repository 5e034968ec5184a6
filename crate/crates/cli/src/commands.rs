use std::path::{Path, PathBuf};

use finmix::bayes::{posterior_over_g, run_gibbs, summarize_h, EvidenceConfig, Functional, GibbsConfig, ParamSet};
use finmix::compound::compositions;
use finmix::dp::{cluster_count_pmf, crp_cluster_histogram, expected_cluster_count};
use finmix::em::{run_em, run_hard_em, Init};
use finmix::model::{count_modes, covering_interval};
use finmix::sampling::{sample_hmm, sample_mixture};
use finmix::{
    BetaBinomial, Component, ConjugatePrior, Dataset, DirichletMultinomial, EmConfig, Family, MixtureModel,
    NegativeBinomial, Obs,
};
use serde_json::{json, Value};

use crate::args::{
    CompoundArgs, CompoundFamily, CrpArgs, DensityArgs, FitArgs, Grid, InitArg, Method, ModesArgs, SelectGArgs,
    SimulateArgs,
};
use crate::document::{self, Document};
use crate::error::CliError;
use crate::io::{emit, fmt_f64, read_dataset, read_text, write_atomic, Run, Table};

/// Grid used for modes when none is given.
const MODE_GRID_POINTS: usize = 10_000;
/// Standard deviations beyond the extreme atoms covered by default grids.
const MODE_PAD_SIGMAS: f64 = 12.0;
const DENSITY_PAD_SIGMAS: f64 = 8.0;
const DENSITY_GRID_POINTS: usize = 1001;
const PREDICTIVE_GRID_POINTS: usize = 200;

fn load_document(path: &Path) -> Result<Document, CliError> {
    document::parse(&read_text(path)?).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn load_mixture(path: &Path) -> Result<MixtureModel, CliError> {
    match load_document(path)? {
        Document::Mixture(m) => Ok(MixtureModel::new(m)),
        d => Err(CliError::BadArgs(format!(
            "{}: expected a mixture document, found kind `{}`",
            path.display(),
            d.kind()
        ))),
    }
}

/// Writes the primary output and, when it goes to a file, the manifest.
fn finish(mut run: Run, out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    emit(out, bytes)?;
    if let Some(p) = out {
        run.outputs.insert(0, p.to_path_buf());
        run.finish(p)?;
    }
    Ok(())
}

fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2).zip(ys.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

fn poisson_upper(model: &MixtureModel) -> u64 {
    let lmax = model
        .measure()
        .components()
        .iter()
        .map(|c| c.params()[0])
        .fold(0.0, f64::max);
    (lmax + 20.0 * lmax.sqrt() + 20.0).ceil() as u64
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let mut run = Run::new("simulate", Some(args.common.seed), args);
    run.inputs.push(args.spec.clone());
    let (data, z, family, k) = match load_document(&args.spec)? {
        Document::Mixture(m) => {
            let family = m.family();
            let k = m.len();
            let s = sample_mixture(&MixtureModel::new(m), args.n, args.common.seed);
            (s.data, s.z, family, k)
        }
        Document::Hmm(h) => {
            let family = h.emissions()[0].family();
            let k = h.num_states();
            if args.n == 0 {
                (Dataset::empty(family), Vec::new(), family, k)
            } else {
                let (z, data) = sample_hmm(&h, args.n, args.common.seed)?;
                (data, z, family, k)
            }
        }
        d => {
            return Err(CliError::BadArgs(format!(
                "{}: simulate needs a mixture or hmm document, found kind `{}`",
                args.spec.display(),
                d.kind()
            )))
        }
    };
    let header: &[&str] = if family == Family::BivariateNormal { &["y1", "y2", "z"] } else { &["y", "z"] };
    let mut table = Table::new(header);
    for (y, &zi) in data.iter().zip(&z) {
        let label = (zi + 1).to_string();
        match y {
            Obs::Real(v) => table.row([fmt_f64(v), label]),
            Obs::Pair([a, b]) => table.row([fmt_f64(a), fmt_f64(b), label]),
            Obs::Count(c) => table.row([c.to_string(), label]),
        }
    }
    let mut counts = vec![0usize; k];
    for &zi in &z {
        counts[zi] += 1;
    }
    run.metric("rows", args.n);
    run.metric("label_counts", counts);
    finish(run, args.common.out.as_deref(), &table.into_bytes())
}

pub fn density(args: &DensityArgs) -> Result<(), CliError> {
    let mut run = Run::new("density", None, args);
    run.inputs.push(args.spec.clone());
    let model = load_mixture(&args.spec)?;
    let table = match model.family() {
        Family::Normal => {
            let grid = match args.grid {
                Some(g) => g,
                None => {
                    let (lo, hi) = covering_interval(&model, DENSITY_PAD_SIGMAS)?;
                    Grid { lo, hi, points: DENSITY_GRID_POINTS }
                }
            };
            let xs = grid.values();
            let fs = xs
                .iter()
                .map(|&y| model.density(Obs::Real(y)))
                .collect::<finmix::Result<Vec<_>>>()?;
            let mut t = Table::new(&["y", "density"]);
            for (x, f) in xs.iter().zip(&fs) {
                t.row([fmt_f64(*x), fmt_f64(*f)]);
            }
            run.metric("grid", grid);
            run.metric("trapezoid_integral", trapezoid(&xs, &fs));
            t
        }
        Family::Poisson => {
            let (lo, hi) = match args.grid {
                Some(g) => (g.lo.max(0.0).ceil() as u64, g.hi.floor() as u64),
                None => (0, poisson_upper(&model)),
            };
            let mut t = Table::new(&["y", "pmf"]);
            let mut total = 0.0;
            for y in lo..=hi {
                let p = model.density(Obs::Count(y))?;
                total += p;
                t.row([y.to_string(), fmt_f64(p)]);
            }
            run.metric("support", [lo, hi]);
            run.metric("pmf_sum", total);
            t
        }
        Family::BivariateNormal => {
            let grid = args.grid.ok_or_else(|| {
                CliError::BadArgs("bivariate densities need --grid (applied to both coordinates)".into())
            })?;
            let xs = grid.values();
            let mut t = Table::new(&["y1", "y2", "density"]);
            let mut rows = Vec::with_capacity(xs.len());
            for &a in &xs {
                let mut row = Vec::with_capacity(xs.len());
                for &b in &xs {
                    let f = model.density(Obs::Pair([a, b]))?;
                    t.row([fmt_f64(a), fmt_f64(b), fmt_f64(f)]);
                    row.push(f);
                }
                rows.push(trapezoid(&xs, &row));
            }
            run.metric("grid", grid);
            run.metric("trapezoid_integral", trapezoid(&xs, &rows));
            t
        }
    };
    finish(run, args.common.out.as_deref(), &table.into_bytes())
}

fn quantile_json(q: &finmix::bayes::Quantiles<f64>, mean: f64) -> Value {
    json!({"mean": mean, "q025": q.q025, "q50": q.q50, "q975": q.q975})
}

pub fn fit(args: &FitArgs) -> Result<(), CliError> {
    let mut run = Run::new("fit", Some(args.common.seed), args);
    run.inputs.push(args.data.clone());
    let data = read_dataset(&args.data, args.family.map(Into::into))?;
    if args.g == 0 || data.len() < args.g {
        return Err(CliError::BadArgs(format!(
            "G = {} needs 1 <= G <= n, and the data have n = {}",
            args.g,
            data.len()
        )));
    }
    let report = match args.method {
        Method::Em | Method::HardEm => {
            let config = EmConfig {
                max_iter: args.max_iter,
                tol: args.tol,
                init: match args.init {
                    InitArg::Kpoint => Init::KPointSeeding,
                    InitArg::Random => Init::RandomResponsibilities,
                },
                variance_floor: args.variance_floor,
                restarts: args.restarts,
                seed: args.common.seed,
            };
            let family = data.family();
            let state = if args.method == Method::Em {
                run_em(&data, args.g, family, &config)?
            } else {
                run_hard_em(&data, args.g, family, &config)?
            };
            let canonical = state.model.measure().canonicalize()?;
            let trace = &state.loglik_trace;
            let monotone = trace.windows(2).all(|w| w[1] >= w[0] - 1e-9);
            run.metric("final_log_likelihood", state.final_log_likelihood());
            run.metric("iterations", state.iterations);
            run.metric("converged", state.converged);
            run.metric("trace_non_decreasing", monotone);
            json!({
                "method": args.method,
                "G": args.g,
                "n": data.len(),
                "family": family,
                "seed": args.common.seed,
                "converged": state.converged,
                "iterations": state.iterations,
                "best_restart": state.restart,
                "final_log_likelihood": state.final_log_likelihood(),
                "loglik_trace": trace,
                "model": document::mixture_json(&canonical),
            })
        }
        Method::Gibbs => {
            let Dataset::Real(ys) = &data else {
                return Err(CliError::BadArgs("Gibbs sampling supports univariate Normal data only".into()));
            };
            let prior = match &args.prior {
                Some(p) => {
                    run.inputs.push(p.clone());
                    match load_document(p)? {
                        Document::Prior(prior) => prior,
                        d => {
                            return Err(CliError::BadArgs(format!(
                                "{}: expected a prior document, found kind `{}`",
                                p.display(),
                                d.kind()
                            )))
                        }
                    }
                }
                None => ConjugatePrior::default_for(ys, args.g)?,
            };
            let config = GibbsConfig {
                burn_in: args.burn_in,
                n_samples: args.samples,
                thin: args.thin,
                seed: args.common.seed,
            };
            let sample = run_gibbs(&data, args.g, &prior, config)?;
            let grid = match args.grid {
                Some(g) => g,
                None => {
                    let lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let pad = 0.1 * (hi - lo).max(1.0);
                    Grid { lo: lo - pad, hi: hi + pad, points: PREDICTIVE_GRID_POINTS }
                }
            };
            let xs = grid.values();
            let pred = summarize_h(&sample, &Functional::PredictiveDensityAt(xs.clone()))?;
            let atoms = summarize_h(&sample, &Functional::AtomCountInSet(ParamSet::whole()))?;
            let heavy = summarize_h(&sample, &Functional::WeightOfLargestVarianceComponent)?;
            let mut t = Table::new(&["y", "mean", "q025", "q50", "q975"]);
            for (k, x) in xs.iter().enumerate() {
                let q = &pred.quantiles[k];
                t.row([x, &pred.mean[k], &q.q025, &q.q50, &q.q975].map(|v| fmt_f64(*v)));
            }
            let predictive_path = args.predictive.clone().or_else(|| {
                args.common.out.as_deref().map(|o| sibling(o, ".predictive.csv"))
            });
            if let Some(p) = &predictive_path {
                write_atomic(p, &t.into_bytes())?;
                run.outputs.push(p.clone());
            }
            if let Some(p) = &args.chain {
                let mut lines = String::new();
                for s in &sample.snapshots {
                    let atoms: Vec<Value> = s
                        .measure
                        .atoms()
                        .iter()
                        .map(|a| match a.component {
                            Component::Normal { mu, sigma } => json!({"weight": a.weight, "mu": mu, "sigma": sigma}),
                            _ => unreachable!("Gibbs chains are univariate Normal"),
                        })
                        .collect();
                    lines.push_str(&json!({"iteration": s.iteration, "atoms": atoms}).to_string());
                    lines.push('\n');
                }
                write_atomic(p, lines.as_bytes())?;
                run.outputs.push(p.clone());
            }
            run.metric("snapshots", sample.snapshots.len());
            json!({
                "method": args.method,
                "G": args.g,
                "n": data.len(),
                "family": Family::Normal,
                "seed": args.common.seed,
                "burn_in": args.burn_in,
                "samples": args.samples,
                "thin": args.thin,
                "prior": Document::Prior(prior).to_json(),
                "summaries": {
                    "distinct_atoms": quantile_json(&atoms.quantiles[0], atoms.mean[0]),
                    "weight_of_largest_variance_component": quantile_json(&heavy.quantiles[0], heavy.mean[0]),
                },
                "predictive": {
                    "path": predictive_path.map(|p| p.display().to_string()),
                    "grid": grid,
                },
            })
        }
    };
    let mut bytes = serde_json::to_vec_pretty(&report).expect("report serializes");
    bytes.push(b'\n');
    finish(run, args.common.out.as_deref(), &bytes)
}

pub fn select_g(args: &SelectGArgs) -> Result<(), CliError> {
    let mut run = Run::new("select-g", Some(args.common.seed), args);
    run.inputs.push(args.data.clone());
    if args.g_min == 0 || args.g_min > args.g_max {
        return Err(CliError::BadArgs(format!(
            "need 1 <= g-min <= g-max, got {}..{}",
            args.g_min, args.g_max
        )));
    }
    let data = read_dataset(&args.data, Some(Family::Normal))?;
    let Dataset::Real(ys) = &data else { unreachable!("read as Normal") };
    let build = |g: usize| {
        let d = ConjugatePrior::default_for(ys, g)?;
        ConjugatePrior::new(
            vec![args.dirichlet; g],
            args.mean_loc.unwrap_or(d.mean_loc),
            args.mean_scale.unwrap_or(d.mean_scale),
            args.ig_shape,
            args.ig_scale.unwrap_or(d.ig_scale),
        )
    };
    let gs: Vec<usize> = (args.g_min..=args.g_max).collect();
    let uniform = vec![1.0 / gs.len() as f64; gs.len()];
    let config = EvidenceConfig {
        n_prior_draws: args.prior_draws,
        seed: args.common.seed,
    };
    let post = posterior_over_g(&data, &gs, build, &uniform, config)?;
    let mut t = Table::new(&["G", "log_evidence", "posterior"]);
    for ((g, e), p) in gs.iter().zip(&post.evidence).zip(&post.posterior) {
        t.row([g.to_string(), fmt_f64(e.log_estimate), fmt_f64(*p)]);
    }
    run.metric("std_errors", post.evidence.iter().map(|e| e.std_error).collect::<Vec<_>>());
    run.metric("underflow", post.evidence.iter().map(|e| e.underflow).collect::<Vec<_>>());
    run.metric("posterior_sum", post.posterior.iter().sum::<f64>());
    run.metric("mode", post.mode());
    finish(run, args.common.out.as_deref(), &t.into_bytes())
}

fn need<T: Copy>(v: Option<T>, flag: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::BadArgs(format!("missing --{flag}")))
}

pub fn compound(args: &CompoundArgs) -> Result<(), CliError> {
    let mut run = Run::new("compound", None, args);
    let doc = match (&args.spec, args.family) {
        (Some(p), _) => {
            run.inputs.push(p.clone());
            load_document(p)?
        }
        (None, Some(CompoundFamily::BetaBinomial)) => Document::BetaBinomial(BetaBinomial::new(
            need(args.trials, "trials")?,
            need(args.alpha, "alpha")?,
            need(args.beta, "beta")?,
        )?),
        (None, Some(CompoundFamily::NegativeBinomial)) => {
            Document::NegativeBinomial(NegativeBinomial::new(need(args.alpha, "alpha")?, need(args.beta, "beta")?)?)
        }
        (None, Some(CompoundFamily::DirichletMultinomial)) => {
            let c = args.concentration.clone().ok_or_else(|| CliError::BadArgs("missing --concentration".into()))?;
            Document::DirichletMultinomial(DirichletMultinomial::new(need(args.trials, "trials")?, c)?)
        }
        (None, None) => return Err(CliError::BadArgs("give --spec or --family".into())),
    };
    let (table, total) = match &doc {
        Document::BetaBinomial(d) => {
            let mut t = Table::new(&["y", "pmf"]);
            let mut total = 0.0;
            for (y, p) in d.table() {
                total += p;
                t.row([y.to_string(), fmt_f64(p)]);
            }
            run.metric("mean", d.mean());
            run.metric("variance", d.variance());
            run.metric("over_dispersion_ratio", d.over_dispersion_ratio());
            (t, total)
        }
        Document::NegativeBinomial(d) => {
            let top = args.max_y.unwrap_or_else(|| d.default_support_max());
            let mut t = Table::new(&["y", "pmf"]);
            let mut total = 0.0;
            for (y, p) in d.table(top) {
                total += p;
                t.row([y.to_string(), fmt_f64(p)]);
            }
            run.metric("p", d.p());
            run.metric("mean", d.mean());
            run.metric("variance", d.variance());
            run.metric("over_dispersion_ratio", d.over_dispersion_ratio());
            (t, total)
        }
        Document::DirichletMultinomial(d) => {
            let k = d.concentration.len();
            let names: Vec<String> = (1..=k).map(|j| format!("c{j}")).chain(["pmf".to_string()]).collect();
            let mut t = Table::new(&names.iter().map(String::as_str).collect::<Vec<_>>());
            let mut total = 0.0;
            for c in compositions(d.trials, k) {
                let p = d.pmf(&c)?;
                total += p;
                t.row(c.iter().map(u64::to_string).chain([fmt_f64(p)]));
            }
            (t, total)
        }
        d => {
            return Err(CliError::BadArgs(format!(
                "compound needs a beta_binomial, negative_binomial or dirichlet_multinomial document, found `{}`",
                d.kind()
            )))
        }
    };
    run.metric("kind", doc.kind());
    run.metric("pmf_sum", total);
    finish(run, args.common.out.as_deref(), &table.into_bytes())
}

pub fn modes(args: &ModesArgs) -> Result<usize, CliError> {
    let mut run = Run::new("modes", None, args);
    run.inputs.push(args.spec.clone());
    let model = load_mixture(&args.spec)?;
    if model.family() != Family::Normal {
        return Err(CliError::BadArgs("mode counting needs a univariate Normal mixture".into()));
    }
    let grid = match args.grid {
        Some(g) => g,
        None => {
            let (lo, hi) = covering_interval(&model, MODE_PAD_SIGMAS)?;
            Grid { lo, hi, points: MODE_GRID_POINTS }
        }
    };
    let report = count_modes(&model, grid.lo, grid.hi, grid.points)?;
    let mut t = Table::new(&["mode", "location"]);
    for (k, x) in report.locations.iter().enumerate() {
        t.row([(k + 1).to_string(), fmt_f64(*x)]);
    }
    run.metric("count", report.count());
    run.metric("grid", grid);
    finish(run, args.common.out.as_deref(), &t.into_bytes())?;
    Ok(report.count())
}

/// Returns the empirical mean and the exact expectation.
pub fn crp(args: &CrpArgs) -> Result<(f64, f64), CliError> {
    let mut run = Run::new("crp", Some(args.common.seed), args);
    if args.runs == 0 {
        return Err(CliError::BadArgs("--runs must be at least 1".into()));
    }
    let hist = crp_cluster_histogram(args.alpha, args.n, args.runs, args.common.seed)?;
    let law = cluster_count_pmf(args.alpha, args.n)?;
    let expected: f64 = expected_cluster_count(args.alpha, args.n)?;
    let runs = args.runs as f64;
    let mean = hist.iter().enumerate().map(|(k, &c)| (k + 1) as f64 * c as f64).sum::<f64>() / runs;
    let var = hist
        .iter()
        .enumerate()
        .map(|(k, &c)| ((k + 1) as f64 - mean).powi(2) * c as f64)
        .sum::<f64>()
        / (runs - 1.0).max(1.0);
    let se = (var / runs).sqrt();
    let mut t = Table::new(&["clusters", "count", "frequency", "probability"]);
    for (k, (&c, &p)) in hist.iter().zip(&law).enumerate() {
        t.row([(k + 1).to_string(), c.to_string(), fmt_f64(c as f64 / runs), fmt_f64(p)]);
    }
    run.metric("expected_clusters", expected);
    run.metric("empirical_mean", mean);
    run.metric("std_error", se);
    finish(run, args.common.out.as_deref(), &t.into_bytes())?;
    Ok((mean, expected))
}
