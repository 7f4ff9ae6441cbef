//! Binary checkpoint: magic `GAITNET1`, a JSON config echo, parameter
//! tensors, Adam state, and the training RNG position. Integers and reals
//! are little-endian.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use super::network::Model;
use crate::error::{Error, Result};
use crate::nn::Adam;

pub const MAGIC: &[u8; 8] = b"GAITNET1";

#[derive(Debug)]
pub struct Checkpoint {
    pub model: Model,
    pub adam: Adam,
    pub rng: ChaCha8Rng,
}

fn put_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_reals(buf: &mut Vec<u8>, values: &[f64]) {
    put_u64(buf, values.len() as u64);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode(model: &Model, adam: &Adam, rng: &ChaCha8Rng) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    let config = serde_json::to_vec(model.config())?;
    put_u64(&mut buf, config.len() as u64);
    buf.extend_from_slice(&config);

    let params = model.params();
    put_u64(&mut buf, params.len() as u64);
    for p in params {
        put_reals(&mut buf, &p.value);
    }

    for v in [adam.lr, adam.beta1, adam.beta2, adam.eps] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    put_u64(&mut buf, adam.t);
    put_u64(&mut buf, adam.m.len() as u64);
    for (m, v) in adam.m.iter().zip(&adam.v) {
        put_reals(&mut buf, m);
        put_reals(&mut buf, v);
    }

    buf.extend_from_slice(&rng.get_seed());
    put_u64(&mut buf, rng.get_stream());
    buf.extend_from_slice(&rng.get_word_pos().to_le_bytes());
    Ok(buf)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn len(&mut self) -> Result<usize> {
        let n = self.u64()?;
        usize::try_from(n)
            .ok()
            .filter(|&n| n <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint(format!("implausible length {n}")))
    }

    fn reals(&mut self) -> Result<Vec<f64>> {
        let n = self.len()?;
        (0..n).map(|_| self.f64()).collect()
    }
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(Error::Checkpoint("bad magic header".into()));
    }
    let n = r.len()?;
    let config: ModelConfig = serde_json::from_slice(r.take(n)?)?;
    let mut model = Model::new(&config, 0)?;

    let count = r.len()?;
    let mut params = model.params_mut();
    if count != params.len() {
        return Err(Error::Checkpoint(format!(
            "{count} parameter tensors, model has {}",
            params.len()
        )));
    }
    for p in params.iter_mut() {
        let values = r.reals()?;
        if values.len() != p.len() {
            return Err(Error::Checkpoint("parameter length mismatch".into()));
        }
        p.value = values;
    }

    let mut adam = Adam::new(r.f64()?);
    adam.beta1 = r.f64()?;
    adam.beta2 = r.f64()?;
    adam.eps = r.f64()?;
    adam.t = r.u64()?;
    let buffers = r.len()?;
    for _ in 0..buffers {
        adam.m.push(r.reals()?);
        adam.v.push(r.reals()?);
    }

    let seed: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
    let stream = r.u64()?;
    let word_pos = u128::from_le_bytes(r.take(16)?.try_into().expect("16 bytes"));
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(stream);
    rng.set_word_pos(word_pos);

    if r.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    Ok(Checkpoint { model, adam, rng })
}

pub fn save(path: &Path, model: &Model, adam: &Adam, rng: &ChaCha8Rng) -> Result<()> {
    fs::write(path, encode(model, adam, rng)?).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    decode(&fs::read(path).map_err(|e| Error::io(path, e))?)
}
