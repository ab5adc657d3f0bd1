//! Little-endian primitives shared by the checkpoint and archive containers.

use byteorder::{ByteOrder, LittleEndian as LE};
use nalgebra::DMatrix;

use crate::dist::Stream;
use crate::error::{Error, Result};
use crate::gibbs::SuffStats;
use crate::model::{ArWord, Hyperparameters, ModelParams, SeriesState, Transitions};
use crate::observation::Mniw;

#[derive(Debug, Default)]
pub struct Encoder {
    pub buf: Vec<u8>,
}

impl Encoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_bits().to_le_bytes());
    }

    pub fn bytes(&mut self, v: &[u8]) {
        self.buf.extend_from_slice(v);
    }

    pub fn str(&mut self, v: &str) {
        self.u64(v.len() as u64);
        self.bytes(v.as_bytes());
    }

    pub fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        v.iter().for_each(|&x| self.f64(x));
    }

    pub fn u64s(&mut self, v: &[u64]) {
        self.u64(v.len() as u64);
        v.iter().for_each(|&x| self.u64(x));
    }

    pub fn indices(&mut self, v: &[usize]) {
        self.u64(v.len() as u64);
        v.iter().for_each(|&x| self.u64(x as u64));
    }

    pub fn bools(&mut self, v: &[bool]) {
        self.u64(v.len() as u64);
        v.iter().for_each(|&x| self.u8(u8::from(x)));
    }

    pub fn matrix(&mut self, m: &DMatrix<f64>) {
        self.u64(m.nrows() as u64);
        self.u64(m.ncols() as u64);
        m.iter().for_each(|&x| self.f64(x));
    }

    pub fn mniw(&mut self, m: &Mniw) {
        self.matrix(&m.mean);
        self.matrix(&m.col_precision);
        self.matrix(&m.scale);
        self.f64(m.dof);
    }

    pub fn hyper(&mut self, h: &Hyperparameters) {
        for v in [h.gamma, h.eta, h.alpha_g, h.alpha_l, h.kappa, h.rho] {
            self.f64(v);
        }
        for v in [h.n_words, h.n_topics, h.ar_order] {
            self.u64(v as u64);
        }
        match &h.mniw_prior {
            Some(p) => {
                self.u8(1);
                self.mniw(p);
            }
            None => self.u8(0),
        }
    }

    pub fn transitions(&mut self, t: &Transitions) {
        self.u64(t.n_topics() as u64);
        t.rows().for_each(|r| r.iter().for_each(|&x| self.f64(x)));
    }

    pub fn params(&mut self, p: &ModelParams) {
        self.f64s(&p.beta);
        self.u64(p.phi.len() as u64);
        p.phi.iter().for_each(|r| self.f64s(r));
        self.u64(p.words.len() as u64);
        for w in &p.words {
            self.matrix(&w.coef);
            self.matrix(&w.noise_cov);
            self.f64(w.continuation);
        }
        self.transitions(&p.pi_g);
    }

    pub fn series_state(&mut self, s: &SeriesState) {
        self.indices(&s.d);
        self.indices(&s.z);
        self.bools(&s.o);
        self.transitions(&s.pi_n);
        match &s.labels {
            Some(l) => {
                self.u8(1);
                self.bools(l);
            }
            None => self.u8(0),
        }
    }

    pub fn states(&mut self, states: &[SeriesState]) {
        self.u64(states.len() as u64);
        states.iter().for_each(|s| self.series_state(s));
    }

    pub fn stats(&mut self, s: &SuffStats) {
        self.u64(s.n_topics as u64);
        self.u64(s.n_words as u64);
        self.u64s(&s.m_dl);
        let flat: Vec<u64> = s.c_bar.iter().flat_map(|c| c.iter().copied()).collect();
        self.u64s(&flat);
        self.u64(s.trans_counts.len() as u64);
        s.trans_counts.iter().for_each(|c| self.u64s(c));
        self.u64s(&s.trans_totals);
    }

    pub fn rng(&mut self, r: &Stream) {
        self.bytes(&r.get_seed());
        self.u64(r.get_stream());
        let pos = r.get_word_pos();
        self.u64(pos as u64);
        self.u64((pos >> 64) as u64);
    }
}

pub struct Decoder<'a> {
    data: &'a [u8],
    pos: usize,
}

fn corrupt(what: &str) -> Error {
    Error::Corrupt(format!("truncated or malformed {what}"))
}

impl<'a> Decoder<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(corrupt("field"));
        }
        let out = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(LE::read_u32(self.take(4)?))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(LE::read_u64(self.take(8)?))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }

    fn count(&mut self, elem_size: usize) -> Result<usize> {
        let n = self.u64()? as usize;
        if n.checked_mul(elem_size)
            .is_none_or(|b| b > self.remaining())
        {
            return Err(corrupt("length prefix"));
        }
        Ok(n)
    }

    pub fn str(&mut self) -> Result<String> {
        let n = self.count(1)?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| corrupt("string"))
    }

    pub fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.count(8)?;
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn u64s(&mut self) -> Result<Vec<u64>> {
        let n = self.count(8)?;
        (0..n).map(|_| self.u64()).collect()
    }

    pub fn indices(&mut self) -> Result<Vec<usize>> {
        Ok(self.u64s()?.into_iter().map(|v| v as usize).collect())
    }

    pub fn bools(&mut self) -> Result<Vec<bool>> {
        let n = self.count(1)?;
        (0..n)
            .map(|_| match self.u8()? {
                0 => Ok(false),
                1 => Ok(true),
                _ => Err(corrupt("boolean")),
            })
            .collect()
    }

    fn flag(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(corrupt("option flag")),
        }
    }

    pub fn matrix(&mut self) -> Result<DMatrix<f64>> {
        let r = self.u64()? as usize;
        let c = self.u64()? as usize;
        let n = r.checked_mul(c).ok_or_else(|| corrupt("matrix shape"))?;
        if n.checked_mul(8).is_none_or(|b| b > self.remaining()) {
            return Err(corrupt("matrix"));
        }
        let v = (0..n).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        Ok(DMatrix::from_vec(r, c, v))
    }

    pub fn mniw(&mut self) -> Result<Mniw> {
        Ok(Mniw {
            mean: self.matrix()?,
            col_precision: self.matrix()?,
            scale: self.matrix()?,
            dof: self.f64()?,
        })
    }

    pub fn hyper(&mut self) -> Result<Hyperparameters> {
        let mut f = [0.0; 6];
        for v in &mut f {
            *v = self.f64()?;
        }
        let n_words = self.u64()? as usize;
        let n_topics = self.u64()? as usize;
        let ar_order = self.u64()? as usize;
        let mniw_prior = if self.flag()? {
            Some(self.mniw()?)
        } else {
            None
        };
        Ok(Hyperparameters {
            gamma: f[0],
            eta: f[1],
            alpha_g: f[2],
            alpha_l: f[3],
            kappa: f[4],
            rho: f[5],
            n_words,
            n_topics,
            ar_order,
            mniw_prior,
        })
    }

    pub fn transitions(&mut self) -> Result<Transitions> {
        let d = self.u64()? as usize;
        if d == 0 || (d + 1).saturating_mul(d).saturating_mul(8) > self.remaining() {
            return Err(corrupt("transition matrix"));
        }
        let rows = (0..=d)
            .map(|_| (0..d).map(|_| self.f64()).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Transitions::from_rows(rows).map_err(|e| Error::Corrupt(e.to_string()))
    }

    pub fn params(&mut self) -> Result<ModelParams> {
        let beta = self.f64s()?;
        let n_topics = self.count(8)?;
        let phi = (0..n_topics)
            .map(|_| self.f64s())
            .collect::<Result<Vec<_>>>()?;
        let n_words = self.count(8)?;
        let words = (0..n_words)
            .map(|_| {
                Ok(ArWord {
                    coef: self.matrix()?,
                    noise_cov: self.matrix()?,
                    continuation: self.f64()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let pi_g = self.transitions()?;
        Ok(ModelParams {
            beta,
            phi,
            words,
            pi_g,
        })
    }

    pub fn series_state(&mut self) -> Result<SeriesState> {
        let d = self.indices()?;
        let z = self.indices()?;
        let o = self.bools()?;
        let pi_n = self.transitions()?;
        let labels = if self.flag()? {
            Some(self.bools()?)
        } else {
            None
        };
        Ok(SeriesState {
            d,
            z,
            o,
            pi_n,
            labels,
        })
    }

    pub fn states(&mut self) -> Result<Vec<SeriesState>> {
        let n = self.count(1)?;
        (0..n).map(|_| self.series_state()).collect()
    }

    pub fn stats(&mut self) -> Result<SuffStats> {
        let n_topics = self.u64()? as usize;
        let n_words = self.u64()? as usize;
        let m_dl = self.u64s()?;
        let flat = self.u64s()?;
        if flat.len() % 2 != 0 {
            return Err(corrupt("word switch counts"));
        }
        let c_bar = flat.chunks(2).map(|c| [c[0], c[1]]).collect();
        let n = self.count(8)?;
        let trans_counts = (0..n).map(|_| self.u64s()).collect::<Result<Vec<_>>>()?;
        let trans_totals = self.u64s()?;
        Ok(SuffStats {
            n_topics,
            n_words,
            m_dl,
            c_bar,
            trans_counts,
            trans_totals,
        })
    }

    pub fn rng(&mut self) -> Result<Stream> {
        use rand::SeedableRng;
        let mut seed = [0u8; 32];
        seed.copy_from_slice(self.take(32)?);
        let stream = self.u64()?;
        let lo = self.u64()? as u128;
        let hi = self.u64()? as u128;
        let mut rng = Stream::from_seed(seed);
        rng.set_stream(stream);
        rng.set_word_pos(lo | (hi << 64));
        Ok(rng)
    }
}
