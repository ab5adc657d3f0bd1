//! Run configuration file (TOML). Every section and field is optional and
//! falls back to the model defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tstm::eval::{DEFAULT_PERIODS, DEFAULT_SMOOTH_WINDOW};
use tstm::observation::Mniw;
use tstm::{ArWord, Hyperparameters};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Unsupervised,
    Supervised,
    FixedTopics,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub hyper: HyperConfig,
    pub gibbs: GibbsSection,
    pub preprocess: Preprocess,
    pub paths: Paths,
    pub simulate: SimulateConfig,
    pub evaluate: EvaluateConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperConfig {
    pub gamma: f64,
    pub eta: f64,
    pub alpha_g: f64,
    pub alpha_l: f64,
    pub kappa: f64,
    pub rho: f64,
    pub n_words: usize,
    pub n_topics: usize,
    pub ar_order: usize,
    pub mniw: Option<MniwConfig>,
    /// Scale the default MNIW prior to the (preprocessed) corpus.
    pub data_scaled_prior: bool,
}

impl Default for HyperConfig {
    fn default() -> Self {
        let h = Hyperparameters::default();
        Self {
            gamma: h.gamma,
            eta: h.eta,
            alpha_g: h.alpha_g,
            alpha_l: h.alpha_l,
            kappa: h.kappa,
            rho: h.rho,
            n_words: h.n_words,
            n_topics: h.n_topics,
            ar_order: h.ar_order,
            mniw: None,
            data_scaled_prior: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MniwConfig {
    pub mean: Vec<Vec<f64>>,
    pub col_precision: Vec<Vec<f64>>,
    pub scale: Vec<Vec<f64>>,
    pub dof: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GibbsSection {
    pub n_iter: u64,
    pub burn_in: u64,
    pub thin: u64,
    pub n_chains: u64,
    pub seed: u64,
    pub checkpoint_every: u64,
    pub sequential: bool,
}

impl Default for GibbsSection {
    fn default() -> Self {
        Self {
            n_iter: 2000,
            burn_in: 1000,
            thin: 1,
            n_chains: 1,
            seed: 0,
            checkpoint_every: 50,
            sequential: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Preprocess {
    /// Moving-average window in samples; 0 disables basal removal.
    pub basal_window: usize,
}

impl Default for Preprocess {
    fn default() -> Self {
        Self {
            basal_window: tstm::data_io::DEFAULT_BASAL_WINDOW,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub metadata: Option<PathBuf>,
    /// Checkpoint whose topics are frozen by `infer`.
    pub topics: Option<PathBuf>,
    /// Sample archives read by `evaluate`; defaults to the chains in `out`.
    pub archives: Vec<PathBuf>,
    pub out: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            corpus: None,
            metadata: None,
            topics: None,
            archives: Vec::new(),
            out: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub n_series: usize,
    pub length: usize,
    pub dim: usize,
    pub words: Option<Vec<WordConfig>>,
    pub phi: Option<Vec<Vec<f64>>>,
    pub pi_g: Option<Vec<Vec<f64>>>,
    pub grades: Option<Vec<i64>>,
    /// Writes the set of visited topics as each series' label mask.
    pub emit_labels: bool,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            n_series: 20,
            length: 500,
            dim: 1,
            words: None,
            phi: None,
            pi_g: None,
            grades: None,
            emit_labels: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WordConfig {
    pub coef: Vec<Vec<f64>>,
    pub noise_cov: Vec<Vec<f64>>,
    pub continuation: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub healthy_topic: usize,
    pub smooth_window: usize,
    pub periods: Vec<usize>,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            healthy_topic: 0,
            smooth_window: DEFAULT_SMOOTH_WINDOW,
            periods: DEFAULT_PERIODS.to_vec(),
        }
    }
}

pub fn matrix(field: &str, rows: &[Vec<f64>]) -> anyhow::Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        bail!("{field}: rows have different lengths");
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

impl HyperConfig {
    pub fn to_hyper(&self) -> anyhow::Result<Hyperparameters> {
        if self.data_scaled_prior && self.mniw.is_some() {
            bail!("hyper.mniw and hyper.data_scaled_prior cannot both be set");
        }
        let mniw_prior = match &self.mniw {
            None => None,
            Some(m) => Some(Mniw {
                mean: matrix("hyper.mniw.mean", &m.mean)?,
                col_precision: matrix("hyper.mniw.col_precision", &m.col_precision)?,
                scale: matrix("hyper.mniw.scale", &m.scale)?,
                dof: m.dof,
            }),
        };
        let h = Hyperparameters {
            gamma: self.gamma,
            eta: self.eta,
            alpha_g: self.alpha_g,
            alpha_l: self.alpha_l,
            kappa: self.kappa,
            rho: self.rho,
            n_words: self.n_words,
            n_topics: self.n_topics,
            ar_order: self.ar_order,
            mniw_prior,
        };
        h.validate().context("hyper")?;
        Ok(h)
    }
}

impl WordConfig {
    pub fn to_word(&self, i: usize) -> anyhow::Result<ArWord> {
        Ok(ArWord {
            coef: matrix(&format!("simulate.words[{i}].coef"), &self.coef)?,
            noise_cov: matrix(&format!("simulate.words[{i}].noise_cov"), &self.noise_cov)?,
            continuation: self.continuation,
        })
    }
}

impl RunConfig {
    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.paths.corpus.iter_mut().for_each(fix);
        cfg.paths.metadata.iter_mut().for_each(fix);
        cfg.paths.topics.iter_mut().for_each(fix);
        cfg.paths.archives.iter_mut().for_each(fix);
        fix(&mut cfg.paths.out);
        Ok(cfg)
    }

    /// SHA-256 of the effective configuration, leaving out the output
    /// directory so relocated reruns carry the same hash.
    pub fn hash(&self) -> String {
        let mut cfg = self.clone();
        cfg.paths.out = PathBuf::new();
        let text = toml::to_string(&cfg).unwrap_or_default();
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn validate_gibbs(&self) -> anyhow::Result<()> {
        let g = &self.gibbs;
        if g.n_iter == 0 {
            bail!("gibbs.n_iter must be positive");
        }
        if g.thin == 0 {
            bail!("gibbs.thin must be positive");
        }
        if g.n_chains == 0 {
            bail!("gibbs.n_chains must be positive");
        }
        if g.checkpoint_every == 0 {
            bail!("gibbs.checkpoint_every must be positive");
        }
        if g.burn_in >= g.n_iter {
            bail!(
                "gibbs.burn_in ({}) must be below gibbs.n_iter ({})",
                g.burn_in,
                g.n_iter
            );
        }
        Ok(())
    }

    pub fn require(field: &str, p: &Option<PathBuf>) -> anyhow::Result<PathBuf> {
        match p {
            None => bail!("{field} is required in this mode"),
            Some(p) if !p.exists() => bail!("{field}: {} does not exist", p.display()),
            Some(p) => Ok(p.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg: RunConfig = toml::from_str("").unwrap();
        assert_eq!(cfg.mode, Mode::Unsupervised);
        assert_eq!(cfg.hyper.n_words, 15);
        assert_eq!(cfg.hyper.kappa, 25.0);
        assert_eq!(cfg.preprocess.basal_window, 40);
        assert_eq!(cfg.evaluate.smooth_window, 120);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(toml::from_str::<RunConfig>("[gibbs]\nn_iters = 3\n").is_err());
    }

    #[test]
    fn mode_spelling() {
        let cfg: RunConfig = toml::from_str("mode = \"fixed-topics\"").unwrap();
        assert_eq!(cfg.mode, Mode::FixedTopics);
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = RunConfig::default();
        assert_eq!(a.hash(), b.hash());
        b.paths.out = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.gibbs.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }
}
