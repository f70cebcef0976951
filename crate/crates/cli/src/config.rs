//! Flat `key = value` experiment configs.
//!
//! Blank lines and `#` comments are ignored. Keys may appear once. Relative
//! `matrix_file` paths are resolved against the config file's directory.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use critlab_core::criteria::CriterionConfig;
use critlab_core::spectral::{perron_frobenius, TOL_CRIT, TOL_EIG};
use critlab_core::{
    assert_critical, BisexualModel, MultitypeModel, NoiseLaw, NonNegativeMatrix, OffspringFamily, ProcessModel,
    SpectralData, StopRule, SyntheticModel,
};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const KNOWN_KEYS: &[&str] = &[
    "model",
    // bisexual
    "r_mate",
    "beta",
    "family",
    "rho",
    "tau",
    // multitype and synthetic
    "matrix_file",
    "rescale",
    "q",
    "drift_coeff",
    "drift_exp",
    "sigma_coeff",
    "sigma_exp",
    "noise",
    // criteria
    "epsilon",
    "region_a",
    "region_b",
    "delta",
    "top",
    "band",
    "sigma_cap",
    "offsets",
    "moment_samples",
    // ensembles
    "n_traj",
    "master_seed",
    "x0",
    "horizon",
    "upper_level",
    "sweep_param",
    "sweep_values",
    // probe
    "probe_x",
    "probe_samples",
    "probe_p",
    // output
    "report",
];

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Debug, Clone)]
pub struct Config {
    entries: BTreeMap<String, Entry>,
    base_dir: PathBuf,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base_dir)
    }

    pub fn parse(text: &str, base_dir: PathBuf) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(CliError::config(format!("line {line}: expected `key = value`, got `{content}`")));
            };
            let key = key.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(CliError::config(format!("line {line}: unknown key `{key}`")));
            }
            let entry = Entry { value: value.trim().to_string(), line };
            if let Some(prev) = entries.insert(key.to_string(), entry) {
                return Err(CliError::config(format!("line {line}: key `{key}` already set on line {}", prev.line)));
            }
        }
        Ok(Self { entries, base_dir })
    }

    /// Command-line overrides replace file values.
    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.insert(key.to_string(), Entry { value: value.to_string(), line: 0 });
    }

    fn raw(&self, key: &str) -> Option<&Entry> {
        self.entries.get(key)
    }

    fn bad(&self, key: &str, what: impl Display) -> CliError {
        match self.raw(key) {
            Some(e) if e.line > 0 => CliError::config(format!("line {}: key `{key}`: {what}", e.line)),
            _ => CliError::config(format!("key `{key}`: {what}")),
        }
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(e) => e.value.parse().map(Some).map_err(|err| self.bad(key, format!("cannot parse `{}`: {err}", e.value))),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        self.get(key)?.ok_or_else(|| CliError::config(format!("missing required key `{key}`")))
    }

    pub fn str(&self, key: &str) -> Option<&str> {
        self.raw(key).map(|e| e.value.as_str())
    }

    /// Comma-separated list of reals.
    pub fn list(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        let Some(e) = self.raw(key) else { return Ok(None) };
        if e.value.is_empty() {
            return Ok(Some(Vec::new()));
        }
        e.value
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|err| self.bad(key, format!("cannot parse `{}`: {err}", v.trim()))))
            .collect::<Result<_, _>>()
            .map(Some)
    }

    /// Hex SHA-256 of the effective configuration: sorted `key=value` lines,
    /// with the matrix file replaced by a digest of its contents.
    pub fn hash(&self) -> Result<String, CliError> {
        let mut h = Sha256::new();
        for (k, e) in &self.entries {
            if k == "matrix_file" {
                let bytes = std::fs::read(self.base_dir.join(&e.value))
                    .map_err(|err| self.bad(k, format!("cannot read `{}`: {err}", e.value)))?;
                h.update(format!("{k}={}\n", hex(&Sha256::digest(&bytes))));
            } else {
                h.update(format!("{k}={}\n", e.value));
            }
        }
        Ok(hex(&h.finalize()))
    }

    pub fn matrix_path(&self) -> Option<PathBuf> {
        self.str("matrix_file").map(|f| self.base_dir.join(f))
    }

    pub fn criterion(&self) -> Result<CriterionConfig, CliError> {
        let d = CriterionConfig::default();
        let band = match self.list("band")? {
            None => d.band,
            Some(v) if v.len() == 2 => (v[0], v[1]),
            Some(_) => return Err(self.bad("band", "expected two values `u, v`")),
        };
        let cfg = CriterionConfig {
            epsilon: self.get_or("epsilon", d.epsilon)?,
            region_a: self.get_or("region_a", d.region_a)?,
            region_b: self.get_or("region_b", d.region_b)?,
            delta: self.get_or("delta", d.delta)?,
            top: self.get_or("top", d.top)?,
            band,
            sigma_cap: self.get_or("sigma_cap", d.sigma_cap)?,
            offsets: self.list("offsets")?.unwrap_or(d.offsets),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Spectral data of `matrix_file`, or the 1×1 identity when absent.
    pub fn spectral(&self) -> Result<SpectralData, CliError> {
        let Some(path) = self.matrix_path() else {
            return Ok(SpectralData::univariate());
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| self.bad("matrix_file", format!("cannot read {}: {e}", path.display())))?;
        let m = NonNegativeMatrix::parse(&text)?;
        let s = perron_frobenius(&m, TOL_EIG)?;
        if self.get_or("rescale", false)? {
            return Ok(s.rescaled_to_critical());
        }
        assert_critical(&s, TOL_CRIT)?;
        Ok(s)
    }

    pub fn model_kind(&self) -> Result<ModelKind, CliError> {
        match self.str("model") {
            None => Err(CliError::config("missing required key `model`")),
            Some("bisexual") => Ok(ModelKind::Bisexual),
            Some("multitype") => Ok(ModelKind::Multitype),
            Some("synthetic") => Ok(ModelKind::Synthetic),
            Some(other) => Err(self.bad("model", format!("unknown model `{other}` (bisexual, multitype, synthetic)"))),
        }
    }

    pub fn model(&self) -> Result<Box<dyn ProcessModel>, CliError> {
        Ok(match self.model_kind()? {
            ModelKind::Bisexual => Box::new(self.bisexual()?),
            ModelKind::Multitype => {
                Box::new(MultitypeModel::new(self.spectral()?, self.get_or("beta", 0.0)?, self.get_or("q", 1.0)?)?)
            }
            ModelKind::Synthetic => {
                let noise = match self.str("noise").unwrap_or("gaussian") {
                    "gaussian" => NoiseLaw::Gaussian,
                    "rademacher" => NoiseLaw::Rademacher,
                    "zero" => NoiseLaw::Zero,
                    other => return Err(self.bad("noise", format!("unknown noise law `{other}`"))),
                };
                Box::new(SyntheticModel::power_law(
                    self.spectral()?,
                    self.get_or("drift_coeff", 0.0)?,
                    self.get_or("drift_exp", 0.0)?,
                    self.get_or("sigma_coeff", 1.0)?,
                    self.get_or("sigma_exp", 1.0)?,
                    noise,
                )?)
            }
        })
    }

    pub fn bisexual(&self) -> Result<BisexualModel, CliError> {
        if self.raw("matrix_file").is_some() {
            return Err(self.bad("matrix_file", "not used by the bisexual model"));
        }
        let family = match self.str("family").unwrap_or("equidispersed") {
            "equidispersed" => OffspringFamily::Equidispersed,
            "bernoulli" => OffspringFamily::Bernoulli,
            "degenerate" => OffspringFamily::Degenerate { rho: self.require("rho")?, tau: self.require("tau")? },
            other => return Err(self.bad("family", format!("unknown family `{other}`"))),
        };
        Ok(BisexualModel::new(self.get_or("r_mate", 1)?, self.get_or("beta", 0.0)?, family)?)
    }

    pub fn x0(&self, s: &SpectralData) -> Result<Vec<f64>, CliError> {
        let x0 = self.list("x0")?.ok_or_else(|| CliError::config("missing required key `x0`"))?;
        if x0.len() != s.dim() {
            return Err(self.bad("x0", format!("expected {} components, got {}", s.dim(), x0.len())));
        }
        Ok(x0)
    }

    pub fn stop_rule(&self, x0: &[f64], s: &SpectralData) -> Result<StopRule, CliError> {
        let default = StopRule::default_for(x0, s);
        let horizon: f64 = self.get_or("horizon", default.horizon as f64)?;
        if !(horizon >= 1.0 && horizon.fract() == 0.0 && horizon <= u64::MAX as f64) {
            return Err(self.bad("horizon", "must be a positive integer"));
        }
        Ok(StopRule::new(horizon as u64, self.get_or("upper_level", default.upper_level)?)?)
    }

    pub fn report_path(&self) -> Option<PathBuf> {
        self.str("report").map(PathBuf::from)
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Bisexual,
    Multitype,
    Synthetic,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_lists() {
        let c = Config::parse("# header\nmodel = bisexual  # trailing\n\nband = 2, 50\n", PathBuf::new()).unwrap();
        assert_eq!(c.str("model"), Some("bisexual"));
        assert_eq!(c.criterion().unwrap().band, (2.0, 50.0));
    }

    #[test]
    fn rejects_unknown_duplicate_and_malformed() {
        let e = Config::parse("model = bisexual\nbetta = 1\n", PathBuf::new()).unwrap_err();
        assert!(e.message.contains("line 2") && e.message.contains("betta"), "{}", e.message);
        let e = Config::parse("beta = 1\nbeta = 2\n", PathBuf::new()).unwrap_err();
        assert!(e.message.contains("line 2"));
        let e = Config::parse("beta 1\n", PathBuf::new()).unwrap_err();
        assert!(e.message.contains("line 1"));
        let c = Config::parse("\nbeta = abc\n", PathBuf::new()).unwrap();
        let e = c.get::<f64>("beta").unwrap_err();
        assert!(e.message.contains("line 2") && e.message.contains("beta"));
        assert_eq!(e.code, 4);
    }

    #[test]
    fn hash_tracks_effective_values() {
        let mut a = Config::parse("model = bisexual\nbeta = 0.2\n", PathBuf::new()).unwrap();
        let b = Config::parse("beta = 0.2\nmodel = bisexual # same\n", PathBuf::new()).unwrap();
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        a.set("master_seed", 3);
        assert_ne!(a.hash().unwrap(), b.hash().unwrap());
    }
}
