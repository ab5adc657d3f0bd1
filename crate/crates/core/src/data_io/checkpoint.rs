//! Chain checkpoints: everything needed to continue a chain bit-identically.

use std::path::Path;

use crate::data_io::codec::{Decoder, Encoder};
use crate::data_io::container::{self, Section};
use crate::error::{Error, Result};
use crate::gibbs::{ChainState, GibbsConfig};
use crate::model::Hyperparameters;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"TSTMCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Settings a resumed run must share with the run that wrote the checkpoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunInfo {
    pub seed: u64,
    pub n_iter: u64,
    pub burn_in: u64,
    pub thin: u64,
    pub supervised: bool,
    pub fixed_topics: bool,
}

impl From<&GibbsConfig> for RunInfo {
    fn from(c: &GibbsConfig) -> Self {
        Self {
            seed: c.seed,
            n_iter: c.n_iter,
            burn_in: c.burn_in,
            thin: c.thin,
            supervised: c.supervised,
            fixed_topics: c.fixed_topics.is_some(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub hyper: Hyperparameters,
    pub run: RunInfo,
    pub chain: ChainState,
    /// Byte length of the sample archive when the checkpoint was taken.
    pub archive_len: u64,
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Vec<u8> {
    let section = |tag: &[u8; 4], f: &dyn Fn(&mut Encoder)| {
        let mut e = Encoder::new();
        f(&mut e);
        Section {
            tag: *tag,
            payload: e.buf,
        }
    };
    let c = &ckpt.chain;
    let r = &ckpt.run;
    let sections = [
        section(b"HYPR", &|e| e.hyper(&ckpt.hyper)),
        section(b"CONF", &|e| {
            for v in [r.seed, r.n_iter, r.burn_in, r.thin] {
                e.u64(v);
            }
            e.u8(u8::from(r.supervised));
            e.u8(u8::from(r.fixed_topics));
        }),
        section(b"ITER", &|e| {
            e.u64(c.chain);
            e.u64(c.iteration);
            e.f64(c.log_joint);
            e.u64(ckpt.archive_len);
        }),
        section(b"RNGS", &|e| e.rng(&c.rng)),
        section(b"PARM", &|e| e.params(&c.params)),
        section(b"SERS", &|e| e.states(&c.states)),
        section(b"STAT", &|e| e.stats(&c.stats)),
    ];
    container::encode(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, &sections)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let what = "checkpoint";
    let sections = container::decode(bytes, CHECKPOINT_MAGIC, CHECKPOINT_VERSION, what)?;
    let get = |tag: &[u8; 4]| container::find(&sections, tag, what).map(Decoder::new);
    let hyper = get(b"HYPR")?.hyper()?;
    let mut d = get(b"CONF")?;
    let run = RunInfo {
        seed: d.u64()?,
        n_iter: d.u64()?,
        burn_in: d.u64()?,
        thin: d.u64()?,
        supervised: d.u8()? == 1,
        fixed_topics: d.u8()? == 1,
    };
    let mut d = get(b"ITER")?;
    let chain = d.u64()?;
    let iteration = d.u64()?;
    let log_joint = d.f64()?;
    let archive_len = d.u64()?;
    let rng = get(b"RNGS")?.rng()?;
    let params = get(b"PARM")?.params()?;
    let states = get(b"SERS")?.states()?;
    let stats = get(b"STAT")?.stats()?;
    if states.len() != stats.trans_counts.len() {
        return Err(Error::Corrupt(
            "checkpoint: state and count tables disagree".into(),
        ));
    }
    Ok(Checkpoint {
        hyper,
        run,
        chain: ChainState {
            chain,
            iteration,
            params,
            states,
            stats,
            log_joint,
            rng,
        },
        archive_len,
    })
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    container::write_atomic(path, &encode_checkpoint(ckpt))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode_checkpoint(&std::fs::read(path)?)
}
