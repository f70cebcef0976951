use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use critlab_core::criteria::classify_model;
use critlab_core::engine::run_path;
use critlab_core::montecarlo::{run_ensemble, write_sweep_csv, EnsembleConfig, SweepRow};
use critlab_core::spectral::{check_ratio, perron_frobenius, TOL_CRIT, TOL_EIG};
use critlab_core::{assert_critical, noise_probe, NonNegativeMatrix, ProcessModel, RandomStream, SpectralData};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::{hex, Config, ModelKind};
use crate::{CliError, RunArgs};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

const SWEEP_PARAMS: &[&str] = &["beta", "r_mate", "q", "drift_coeff", "drift_exp", "sigma_coeff", "sigma_exp"];

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).map_err(|e| CliError::runtime(format!("cannot create {}: {e}", path.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn threads(args: &RunArgs) -> usize {
    args.threads.filter(|t| *t > 0).unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Loads the config and folds `--seed` / `--traj` into it.
fn load(args: &RunArgs) -> Result<Config, CliError> {
    let mut cfg = Config::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.set("master_seed", seed);
    }
    if let Some(n) = args.traj {
        cfg.set("n_traj", n);
    }
    Ok(cfg)
}

struct Provenance {
    hash: String,
    master_seed: u64,
}

impl Provenance {
    fn of(cfg: &Config) -> Result<Self, CliError> {
        Ok(Self { hash: cfg.hash()?, master_seed: cfg.get_or("master_seed", 0)? })
    }

    fn write_header(&self, out: &mut dyn Write) -> io::Result<()> {
        writeln!(out, "# critlab {VERSION}")?;
        writeln!(out, "# config_sha256 {}", self.hash)?;
        writeln!(out, "# master_seed {}", self.master_seed)
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

pub fn spectral(matrix_file: &Path, rescale: bool, out: Option<&Path>) -> Result<(), CliError> {
    let bytes = std::fs::read(matrix_file)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", matrix_file.display())))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| CliError::config("matrix file is not UTF-8"))?;
    let m = NonNegativeMatrix::parse(&text)?;
    let mut s = perron_frobenius(&m, TOL_EIG)?;
    let original_lambda = s.lambda1();
    if rescale {
        s = s.rescaled_to_critical();
    }
    let critical = assert_critical(&s, TOL_CRIT);
    let mut w = sink(out)?;
    writeln!(w, "# critlab {VERSION}")?;
    writeln!(w, "# matrix_sha256 {}", hex(&Sha256::digest(&bytes)))?;
    writeln!(w, "dim = {}", s.dim())?;
    writeln!(w, "lambda1 = {}", s.lambda1())?;
    if rescale {
        writeln!(w, "rescaled_from = {original_lambda}")?;
    }
    writeln!(w, "left = {}", join(s.left()))?;
    writeln!(w, "right = {}", join(s.right()))?;
    writeln!(w, "primitivity_power = {}", s.primitivity_power())?;
    writeln!(w, "critical = {}", critical.is_ok())?;
    w.flush()?;
    Ok(critical?)
}

/// Boundary quantities in closed form where the model family has them.
fn reference(cfg: &Config, kind: ModelKind, s: &SpectralData) -> Result<serde_json::Value, CliError> {
    Ok(match kind {
        ModelKind::Bisexual => {
            let m = cfg.bisexual()?;
            json!({ "alpha": m.alpha(), "beta_threshold": m.threshold().ok() })
        }
        ModelKind::Multitype => {
            let m = s.matrix().mul_vec(s.right());
            let sigma_bar2: f64 = s.left().iter().zip(&m).map(|(l, v)| l * l * v).sum();
            let q: f64 = cfg.get_or("q", 1.0)?;
            if q == 1.0 {
                json!({ "sigma_bar2": sigma_bar2, "beta_threshold": sigma_bar2 / 2.0 })
            } else {
                json!({ "sigma_bar2": sigma_bar2 })
            }
        }
        ModelKind::Synthetic => json!({}),
    })
}

pub fn classify(args: &RunArgs) -> Result<(), CliError> {
    let cfg = load(args)?;
    let prov = Provenance::of(&cfg)?;
    let kind = cfg.model_kind()?;
    let model = cfg.model()?;
    let criterion = cfg.criterion()?;
    let samples: usize = cfg.get_or("moment_samples", 2_000)?;
    let verdict = classify_model(&model, &criterion, samples, prov.master_seed)?;

    #[derive(Serialize)]
    struct Report<'a> {
        critlab_version: &'a str,
        config_sha256: &'a str,
        master_seed: u64,
        model: String,
        reference: serde_json::Value,
        verdict: &'a str,
        result: &'a critlab_core::criteria::CriterionVerdict,
    }
    let report = Report {
        critlab_version: VERSION,
        config_sha256: &prov.hash,
        master_seed: prov.master_seed,
        model: format!("{kind:?}").to_lowercase(),
        reference: reference(&cfg, kind, model.spectral())?,
        verdict: verdict.verdict.as_str(),
        result: &verdict,
    };
    let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::runtime(e.to_string()))?;
    let mut stdout = io::stdout().lock();
    writeln!(stdout, "{text}")?;
    for path in [args.out.clone(), cfg.report_path()].into_iter().flatten() {
        std::fs::write(&path, format!("{text}\n"))
            .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

pub fn simulate(args: &RunArgs) -> Result<(), CliError> {
    let cfg = load(args)?;
    let prov = Provenance::of(&cfg)?;
    let model = cfg.model()?;
    let s = model.spectral();
    let x0 = cfg.x0(s)?;
    let stop = cfg.stop_rule(&x0, s)?;
    let n_traj: u64 = cfg.get_or("n_traj", 1)?;
    if n_traj < 1 {
        return Err(CliError::config("key `n_traj`: must be at least 1"));
    }
    let mut w = sink(args.out.as_deref())?;
    prov.write_header(&mut w)?;
    let coords: Vec<String> = (1..=s.dim()).map(|k| format!("x_{k}")).collect();
    writeln!(w, "trajectory_id,step,{},ell_x,check_ratio,stop_reason", coords.join(","))?;
    for id in 0..n_traj {
        let mut rng = RandomStream::new(prov.master_seed, id);
        let mut rows = Vec::new();
        let summary = run_path(&model, &x0, &stop, &mut rng, |x| {
            rows.push(format!("{id},{},{},{},{}", rows.len(), join(x), s.ell_dot(x), check_ratio(x, s)));
        })?;
        let last = rows.len() - 1;
        for (i, row) in rows.iter().enumerate() {
            let reason = if i == last { summary.stop_reason.as_str() } else { "" };
            writeln!(w, "{row},{reason}")?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn sweep(args: &RunArgs) -> Result<(), CliError> {
    let cfg = load(args)?;
    let prov = Provenance::of(&cfg)?;
    let param: String = cfg.require("sweep_param")?;
    if !SWEEP_PARAMS.contains(&param.as_str()) {
        return Err(CliError::config(format!("key `sweep_param`: `{param}` is not one of {}", SWEEP_PARAMS.join(", "))));
    }
    let values = cfg.list("sweep_values")?.ok_or_else(|| CliError::config("missing required key `sweep_values`"))?;
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(CliError::config(format!("key `sweep_values`: {v} is not finite")));
    }
    let mut rows = Vec::with_capacity(values.len());
    for &v in &values {
        let mut c = cfg.clone();
        c.set(&param, v);
        let model = c.model()?;
        let s = model.spectral();
        let x0 = c.x0(s)?;
        let mut ens = EnsembleConfig::new(c.get_or("n_traj", 100)?, prov.master_seed, c.stop_rule(&x0, s)?, x0);
        ens.estimate_gamma = false;
        rows.push(SweepRow { param_value: v, report: run_ensemble(&model, &ens, threads(args))? });
    }
    let mut w = sink(args.out.as_deref())?;
    prov.write_header(&mut w)?;
    writeln!(w, "# sweep_param {param}")?;
    write_sweep_csv(&mut w, &rows)?;
    w.flush()?;
    Ok(())
}

/// `probe_x` lists states separated by `;`, components by `,`.
fn probe_states(cfg: &Config, s: &SpectralData) -> Result<Vec<Vec<f64>>, CliError> {
    let raw = cfg.str("probe_x").ok_or_else(|| CliError::config("missing required key `probe_x`"))?;
    raw.split(';')
        .map(|state| {
            let x = state
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::config(format!("key `probe_x`: cannot parse `{}`: {e}", state.trim())))?;
            if x.len() != s.dim() {
                return Err(CliError::config(format!("key `probe_x`: expected {} components in `{}`", s.dim(), state.trim())));
            }
            Ok(x)
        })
        .collect()
}

pub fn probe(args: &RunArgs) -> Result<(), CliError> {
    let cfg = load(args)?;
    let prov = Provenance::of(&cfg)?;
    let model = cfg.model()?;
    let s = model.spectral();
    let states = probe_states(&cfg, s)?;
    let n: usize = cfg.get_or("probe_samples", 10_000)?;
    let p: f64 = cfg.get_or("probe_p", 2.0 + cfg.criterion()?.delta)?;
    let mut w = sink(args.out.as_deref())?;
    prov.write_header(&mut w)?;
    let coords: Vec<String> = (1..=s.dim()).map(|k| format!("x_{k}")).collect();
    writeln!(
        w,
        "{},ell_x,sigma2,n_samples,mean_ell_xi,mean_ell_xi_se,z_mean,second_moment,second_moment_se,z_second,p,abs_p_moment,abs_p_moment_se,p_moment_over_sigma_p",
        coords.join(",")
    )?;
    for (i, x) in states.iter().enumerate() {
        let est = noise_probe(&model, x, n, p, prov.master_seed.wrapping_add(i as u64))?;
        let sigma2 = model.sigma2(x);
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            join(x),
            s.ell_dot(x),
            sigma2,
            est.n_samples,
            est.mean_ell_xi.value,
            est.mean_ell_xi.se,
            est.mean_ell_xi.z_score(0.0),
            est.var_of_ell_xi.value,
            est.var_of_ell_xi.se,
            est.var_of_ell_xi.z_score(sigma2),
            p,
            est.abs_p_moment_of_norm.value,
            est.abs_p_moment_of_norm.se,
            est.abs_p_moment_of_norm.value / sigma2.powf(p / 2.0),
        )?;
    }
    w.flush()?;
    Ok(())
}
