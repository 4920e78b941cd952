//! Binary model checkpoints, little-endian throughout.
//!
//! ```text
//! header   "SFCK" | version u32 | layer count u32
//! block    inputs u32 | outputs u32 | spiking u32 (0 = readout)
//!          [leak f64 | threshold f64 | surrogate slope f64 | reset u32]   when spiking
//!          weights f64 x (outputs * inputs), row-major | bias f64 x outputs
//! ```
//!
//! Hidden layers come first; the final block is the readout.

use super::lif::{LifConfig, ResetMode};
use super::model::{Dense, Model, SpikingLayer};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SFCK";
pub const FORMAT_VERSION: u32 = 1;

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_dense(buf: &mut Vec<u8>, d: &Dense) {
    d.weights.iter().chain(&d.bias).for_each(|&v| put_f64(buf, v));
}

pub fn encode(model: &Model) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    put_u32(&mut buf, FORMAT_VERSION);
    put_u32(&mut buf, model.hidden.len() as u32 + 1);
    for layer in &model.hidden {
        put_u32(&mut buf, layer.dense.inputs as u32);
        put_u32(&mut buf, layer.dense.outputs as u32);
        put_u32(&mut buf, 1);
        put_f64(&mut buf, layer.lif.leak);
        put_f64(&mut buf, layer.lif.threshold);
        put_f64(&mut buf, layer.lif.surrogate_slope);
        put_u32(&mut buf, match layer.lif.reset {
            ResetMode::Zero => 0,
            ResetMode::Subtract => 1,
        });
        put_dense(&mut buf, &layer.dense);
    }
    put_u32(&mut buf, model.readout.inputs as u32);
    put_u32(&mut buf, model.readout.outputs as u32);
    put_u32(&mut buf, 0);
    put_dense(&mut buf, &model.readout);
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos + n;
        let out = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn dense(&mut self, inputs: usize, outputs: usize) -> Result<Dense> {
        let weights = (0..inputs * outputs).map(|_| self.f64()).collect::<Result<_>>()?;
        let bias = (0..outputs).map(|_| self.f64()).collect::<Result<_>>()?;
        Ok(Dense {
            inputs,
            outputs,
            weights,
            bias,
        })
    }
}

pub fn decode(bytes: &[u8]) -> Result<Model> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let count = r.u32()? as usize;
    if count == 0 {
        return Err(Error::Checkpoint("no layers".into()));
    }
    let mut hidden = Vec::with_capacity(count - 1);
    let mut readout = None;
    for i in 0..count {
        let inputs = r.u32()? as usize;
        let outputs = r.u32()? as usize;
        let spiking = r.u32()?;
        let last = i + 1 == count;
        if (spiking == 0) != last {
            return Err(Error::Checkpoint(format!("layer {i}: only the final block may be the readout")));
        }
        if spiking == 0 {
            readout = Some(r.dense(inputs, outputs)?);
        } else {
            let lif = LifConfig {
                leak: r.f64()?,
                threshold: r.f64()?,
                surrogate_slope: r.f64()?,
                reset: match r.u32()? {
                    0 => ResetMode::Zero,
                    1 => ResetMode::Subtract,
                    m => return Err(Error::Checkpoint(format!("layer {i}: unknown reset mode {m}"))),
                },
            };
            lif.validate()?;
            hidden.push(SpikingLayer {
                dense: r.dense(inputs, outputs)?,
                lif,
            });
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let readout = readout.expect("final block is the readout");
    let mut prev = hidden.first().map(|l| l.dense.inputs).unwrap_or(readout.inputs);
    for d in hidden.iter().map(|l| &l.dense).chain(std::iter::once(&readout)) {
        if d.inputs != prev {
            return Err(Error::Checkpoint("adjacent layer sizes do not compose".into()));
        }
        prev = d.outputs;
    }
    Ok(Model { hidden, readout })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn header_layout() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let model = Model::new(&[3, 2, 2], LifConfig::default(), &mut rng).unwrap();
        let bytes = encode(&model);
        assert_eq!(&bytes[..4], b"SFCK");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2);
        assert_eq!(decode(&bytes).unwrap(), model);
    }

    #[test]
    fn rejects_corruption() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let model = Model::new(&[3, 2, 2], LifConfig::default(), &mut rng).unwrap();
        let bytes = encode(&model);
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        let mut long = bytes;
        long.push(0);
        assert!(decode(&long).is_err());
    }
}
