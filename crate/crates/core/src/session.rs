//! Driver for long fits: a sample archive, periodic checkpoints and a
//! progress log per chain, with resumption from the last checkpoint.
//!
//! Files written for chain `k` inside the output directory:
//! `chain{k}.samples`, `chain{k}.ckpt` and `chain{k}.progress`.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::data_io::{
    load_checkpoint, save_checkpoint, ArchiveHeader, ArchiveWriter, Checkpoint, RunInfo,
};
use crate::error::{Error, Result};
use crate::gibbs::{GibbsConfig, Sampler};
use crate::model::{Corpus, Hyperparameters};
use crate::par;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionOptions {
    /// Sweeps between checkpoints; a final checkpoint is always written.
    pub checkpoint_every: u64,
    pub resume: bool,
    /// Stops after this many completed sweeps without a final checkpoint,
    /// as if the process had been killed.
    pub stop_after: Option<u64>,
}

impl Default for SessionOptions {
    fn default() -> Self {
        Self {
            checkpoint_every: 50,
            resume: false,
            stop_after: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainFiles {
    pub archive: PathBuf,
    pub checkpoint: PathBuf,
    pub progress: PathBuf,
}

impl ChainFiles {
    pub fn new(dir: &Path, chain: u64) -> Self {
        Self {
            archive: dir.join(format!("chain{chain}.samples")),
            checkpoint: dir.join(format!("chain{chain}.ckpt")),
            progress: dir.join(format!("chain{chain}.progress")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainReport {
    pub chain: u64,
    /// Sweeps completed when the driver returned.
    pub iteration: u64,
    pub resumed_from: Option<u64>,
    pub finished: bool,
}

fn archive_header(corpus: &Corpus, sampler: &Sampler) -> ArchiveHeader {
    let h = sampler.hyper();
    ArchiveHeader {
        n_topics: h.n_topics,
        n_words: h.n_words,
        dim: corpus.dim().unwrap_or(1),
        ar_order: h.ar_order,
        ids: corpus.ids.clone(),
        lengths: sampler.lengths(),
    }
}

fn now_millis() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

/// Runs (or resumes) one chain, writing its files into `dir`.
pub fn fit_chain(
    corpus: &Corpus,
    hyper: &Hyperparameters,
    config: &GibbsConfig,
    chain: u64,
    dir: &Path,
    opts: &SessionOptions,
) -> Result<ChainReport> {
    if opts.checkpoint_every == 0 {
        return Err(Error::InvalidParameter(
            "checkpoint interval must be positive".into(),
        ));
    }
    let sampler = Sampler::new(corpus, hyper, config)?;
    let header = archive_header(corpus, &sampler);
    let files = ChainFiles::new(dir, chain);
    let run = RunInfo::from(config);

    let (mut state, mut archive, resumed_from) = if opts.resume && files.checkpoint.exists() {
        let ckpt = load_checkpoint(&files.checkpoint)?;
        if &ckpt.hyper != hyper || ckpt.run != run || ckpt.chain.chain != chain {
            return Err(Error::InvalidParameter(format!(
                "checkpoint {} was written by a run with different settings",
                files.checkpoint.display()
            )));
        }
        let archive = ArchiveWriter::resume(&files.archive, &header, ckpt.archive_len)?;
        let from = ckpt.chain.iteration;
        (ckpt.chain, archive, Some(from))
    } else {
        let archive = ArchiveWriter::create(&files.archive, &header)?;
        (sampler.init(chain)?, archive, None)
    };

    let mut progress = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&files.progress)?;
    if let Some(k) = resumed_from {
        writeln!(progress, "# resumed at iteration {k}")?;
    } else {
        writeln!(progress, "# iteration log_joint unix_ms")?;
    }

    let checkpoint =
        |state: &crate::gibbs::ChainState, archive: &mut ArchiveWriter| -> Result<()> {
            let archive_len = archive.flush()?;
            save_checkpoint(
                &Checkpoint {
                    hyper: hyper.clone(),
                    run: run.clone(),
                    chain: state.clone(),
                    archive_len,
                },
                &files.checkpoint,
            )
        };

    while state.iteration < config.n_iter {
        if opts.stop_after.is_some_and(|k| state.iteration >= k) {
            archive.flush()?;
            return Ok(ChainReport {
                chain,
                iteration: state.iteration,
                resumed_from,
                finished: false,
            });
        }
        sampler.step(&mut state)?;
        if config.emits(state.iteration) {
            archive.append(&state)?;
        }
        writeln!(
            progress,
            "{} {} {}",
            state.iteration,
            state.log_joint,
            now_millis()
        )?;
        if state.iteration % opts.checkpoint_every == 0 || state.iteration == config.n_iter {
            checkpoint(&state, &mut archive)?;
        }
    }
    archive.flush()?;
    Ok(ChainReport {
        chain,
        iteration: state.iteration,
        resumed_from,
        finished: true,
    })
}

/// Runs every chain of `config`, in parallel when the execution mode allows.
pub fn fit(
    corpus: &Corpus,
    hyper: &Hyperparameters,
    config: &GibbsConfig,
    dir: &Path,
    opts: &SessionOptions,
) -> Result<Vec<ChainReport>> {
    std::fs::create_dir_all(dir)?;
    let chains: Vec<u64> = (0..config.n_chains).collect();
    par::map_indexed(&chains, config.execution, |_, &c| {
        fit_chain(corpus, hyper, config, c, dir, opts).map_err(|e| Error::Chain {
            chain: c,
            inner: Box::new(e),
        })
    })
    .into_iter()
    .collect()
}
