use rand::Rng;

use crate::error::{Error, Result};

/// Binary activity over `timesteps` steps for `width` units, stored row-major
/// (`[t * width + i]`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpikeTrain {
    data: Vec<u8>,
    timesteps: usize,
    width: usize,
}

impl SpikeTrain {
    pub fn zeros(timesteps: usize, width: usize) -> Result<Self> {
        if timesteps == 0 {
            return Err(Error::Domain("spike train needs at least one timestep".into()));
        }
        if width == 0 {
            return Err(Error::Domain("spike train needs at least one unit".into()));
        }
        Ok(Self {
            data: vec![0; timesteps * width],
            timesteps,
            width,
        })
    }

    /// Builds a train from `timesteps` rows of 0/1 values.
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let width = rows.first().map(Vec::len).unwrap_or(0);
        let mut train = Self::zeros(rows.len(), width)?;
        for (t, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::dim("spike train row", width, row.len()));
            }
            for (i, &v) in row.iter().enumerate() {
                if v > 1 {
                    return Err(Error::Domain(format!("spike value {v} at [{t},{i}] is not binary")));
                }
                train.data[t * width + i] = v;
            }
        }
        Ok(train)
    }

    pub fn timesteps(&self) -> usize {
        self.timesteps
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn step(&self, t: usize) -> &[u8] {
        &self.data[t * self.width..(t + 1) * self.width]
    }

    pub fn get(&self, t: usize, i: usize) -> u8 {
        self.data[t * self.width + i]
    }

    pub fn set(&mut self, t: usize, i: usize, spike: bool) {
        self.data[t * self.width + i] = spike as u8;
    }

    pub fn count(&self) -> usize {
        self.data.iter().map(|&s| s as usize).sum()
    }

    /// The first `timesteps` steps; errors if more are requested than exist.
    pub fn truncate(&self, timesteps: usize) -> Result<Self> {
        if timesteps == 0 || timesteps > self.timesteps {
            return Err(Error::Domain(format!(
                "cannot truncate a {}-step train to {timesteps} steps",
                self.timesteps
            )));
        }
        Ok(Self {
            data: self.data[..timesteps * self.width].to_vec(),
            timesteps,
            width: self.width,
        })
    }
}

/// Converts analog intensities into a spike train. The encoder is a
/// replaceable stage in front of the network.
pub trait Encoder {
    fn encode<R: Rng + ?Sized>(&self, x: &[f64], timesteps: usize, rng: &mut R) -> Result<SpikeTrain>;
}

/// Bernoulli rate coding: unit `i` fires at each step with probability `x[i]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct RateEncoder;

impl Encoder for RateEncoder {
    fn encode<R: Rng + ?Sized>(&self, x: &[f64], timesteps: usize, rng: &mut R) -> Result<SpikeTrain> {
        rate_encode(x, timesteps, rng)
    }
}

pub fn rate_encode<R: Rng + ?Sized>(x: &[f64], timesteps: usize, rng: &mut R) -> Result<SpikeTrain> {
    if let Some(i) = x.iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Domain(format!(
            "intensity {} at index {i} is outside [0, 1]",
            x[i]
        )));
    }
    let mut train = SpikeTrain::zeros(timesteps, x.len())?;
    for t in 0..timesteps {
        for (i, &p) in x.iter().enumerate() {
            // random::<f64>() is in [0, 1), so p = 0 never fires and p = 1 always does.
            let fire = rng.random::<f64>() < p;
            train.set(t, i, fire);
        }
    }
    Ok(train)
}
