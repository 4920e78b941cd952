use rand::Rng;
use serde::{Deserialize, Serialize};

use super::lif::{surrogate_grad, LifConfig};
use super::spike::SpikeTrain;
use crate::error::{Error, Result};

/// Fully connected weights, row-major `[outputs x inputs]`, plus a bias per output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    /// Uniform in `±1/sqrt(fan_in)` for weights and biases.
    pub fn init<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let mut draw = || rng.random_range(-bound..=bound);
        let weights = (0..inputs * outputs).map(|_| draw()).collect();
        let bias = (0..outputs).map(|_| draw()).collect();
        Self {
            inputs,
            outputs,
            weights,
            bias,
        }
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (o, (row, b)) in out
            .iter_mut()
            .zip(self.weights.chunks_exact(self.inputs).zip(&self.bias))
        {
            // Spike inputs are mostly zero; skipping them is exact.
            let mut acc = *b;
            for (w, &xi) in row.iter().zip(x) {
                if xi != 0.0 {
                    acc += w * xi;
                }
            }
            *o = acc;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikingLayer {
    pub dense: Dense,
    pub lif: LifConfig,
}

/// Stack of spiking dense layers followed by a non-spiking readout that
/// produces one logit vector per timestep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub hidden: Vec<SpikingLayer>,
    pub readout: Dense,
}

/// How the spike nonlinearity is evaluated in the forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpikeMode {
    /// Heaviside step; activity is binary.
    #[default]
    Hard,
    /// Sigmoid surrogate in the forward pass too, making the whole network
    /// smooth. Used for gradient checking.
    Proxy,
}

/// Per-timestep logits, row-major `[timesteps x classes]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Logits {
    pub data: Vec<f64>,
    pub timesteps: usize,
    pub classes: usize,
}

impl Logits {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let classes = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || classes == 0 {
            return Err(Error::Domain("logits need at least one timestep and class".into()));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != classes) {
            return Err(Error::dim("logit row", classes, bad.len()));
        }
        Ok(Self {
            data: rows.concat(),
            timesteps: rows.len(),
            classes,
        })
    }

    pub fn step(&self, t: usize) -> &[f64] {
        &self.data[t * self.classes..(t + 1) * self.classes]
    }

    /// Time-averaged logits.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.classes];
        for t in 0..self.timesteps {
            for (a, v) in m.iter_mut().zip(self.step(t)) {
                *a += v;
            }
        }
        let n = self.timesteps as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }

    /// Arg-max of the time-averaged logits; ties go to the lowest class index.
    pub fn predict(&self) -> usize {
        let m = self.mean();
        let mut best = 0;
        for (k, &v) in m.iter().enumerate().skip(1) {
            if v > m[best] {
                best = k;
            }
        }
        best
    }
}

/// Inference-time interventions applied inside the forward pass.
pub(crate) trait ForwardHooks {
    /// Applied to each membrane value right after integration.
    fn membrane(&mut self, _cfg: &LifConfig, u: f64) -> f64 {
        u
    }
    /// Whether a spike emitted by the previous stage is delivered.
    fn deliver(&mut self) -> bool {
        true
    }
}

pub(crate) struct NoHooks;
impl ForwardHooks for NoHooks {}

/// Activations recorded during a forward pass, enough for backpropagation.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    timesteps: usize,
    /// Per hidden layer: inputs `[T x in]`, pre-reset membrane `[T x out]`, spikes `[T x out]`.
    layers: Vec<LayerTrace>,
    readout_inputs: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
struct LayerTrace {
    inputs: Vec<f64>,
    membrane: Vec<f64>,
    spikes: Vec<f64>,
}

impl Trace {
    /// Hidden-layer activity of layer `l`, row-major `[T x units]`.
    pub fn hidden_spikes(&self, l: usize) -> &[f64] {
        &self.layers[l].spikes
    }
}

/// Parameter gradients with the same layout as the model (hidden layers then readout).
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn zeros_like(model: &Model) -> Self {
        let layers = model
            .layers()
            .map(|d| Dense::zeros(d.inputs, d.outputs))
            .collect();
        Self { layers }
    }

    pub fn flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|d| d.weights.iter().chain(&d.bias).copied())
            .collect()
    }

    pub fn scale(&mut self, k: f64) {
        for d in &mut self.layers {
            d.weights.iter_mut().chain(d.bias.iter_mut()).for_each(|g| *g *= k);
        }
    }
}

impl Model {
    /// `sizes = [input, hidden..., classes]`, all layers sharing one LIF configuration.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], lif: LifConfig, rng: &mut R) -> Result<Self> {
        lif.validate()?;
        if sizes.len() < 2 {
            return Err(Error::Domain("a model needs input and output sizes".into()));
        }
        if let Some(i) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::Domain(format!("layer size {i} is zero")));
        }
        let n = sizes.len();
        let hidden = sizes[..n - 1]
            .windows(2)
            .map(|w| SpikingLayer {
                dense: Dense::init(w[0], w[1], rng),
                lif,
            })
            .collect();
        let readout = Dense::init(sizes[n - 2], sizes[n - 1], rng);
        Ok(Self { hidden, readout })
    }

    pub fn input_width(&self) -> usize {
        self.hidden
            .first()
            .map(|l| l.dense.inputs)
            .unwrap_or(self.readout.inputs)
    }

    pub fn classes(&self) -> usize {
        self.readout.outputs
    }

    /// Layer sizes `[input, hidden..., classes]`.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_width()];
        s.extend(self.layers().map(|d| d.outputs));
        s
    }

    /// All dense blocks, hidden first then readout.
    pub fn layers(&self) -> impl Iterator<Item = &Dense> {
        self.hidden.iter().map(|l| &l.dense).chain(std::iter::once(&self.readout))
    }

    pub fn layers_mut(&mut self) -> impl Iterator<Item = &mut Dense> {
        self.hidden
            .iter_mut()
            .map(|l| &mut l.dense)
            .chain(std::iter::once(&mut self.readout))
    }

    pub fn param_count(&self) -> usize {
        self.layers().map(|d| d.weights.len() + d.bias.len()).sum()
    }

    /// Flat view, in the order of [`Gradients::flat`].
    pub fn flat_params(&self) -> Vec<f64> {
        self.layers()
            .flat_map(|d| d.weights.iter().chain(&d.bias).copied())
            .collect()
    }

    pub fn param_mut(&mut self, mut index: usize) -> &mut f64 {
        for d in self.layers_mut() {
            let nw = d.weights.len();
            if index < nw {
                return &mut d.weights[index];
            }
            index -= nw;
            if index < d.bias.len() {
                return &mut d.bias[index];
            }
            index -= d.bias.len();
        }
        panic!("parameter index out of range");
    }

    fn check_input(&self, input: &SpikeTrain) -> Result<()> {
        if input.width() != self.input_width() {
            return Err(Error::dim("model input", self.input_width(), input.width()));
        }
        Ok(())
    }

    pub fn forward(&self, input: &SpikeTrain) -> Result<Logits> {
        self.check_input(input)?;
        Ok(self.run(input, SpikeMode::Hard, &mut NoHooks, None))
    }

    pub fn forward_traced(&self, input: &SpikeTrain, mode: SpikeMode) -> Result<(Logits, Trace)> {
        self.check_input(input)?;
        let mut trace = Trace::default();
        let logits = self.run(input, mode, &mut NoHooks, Some(&mut trace));
        Ok((logits, trace))
    }

    /// Binary activity of every hidden layer.
    pub fn hidden_activity(&self, input: &SpikeTrain) -> Result<Vec<SpikeTrain>> {
        let (_, trace) = self.forward_traced(input, SpikeMode::Hard)?;
        trace
            .layers
            .iter()
            .zip(&self.hidden)
            .map(|(lt, layer)| {
                let mut st = SpikeTrain::zeros(trace.timesteps, layer.dense.outputs)?;
                for (k, &s) in lt.spikes.iter().enumerate() {
                    st.set(k / layer.dense.outputs, k % layer.dense.outputs, s != 0.0);
                }
                Ok(st)
            })
            .collect()
    }

    pub(crate) fn run<H: ForwardHooks>(
        &self,
        input: &SpikeTrain,
        mode: SpikeMode,
        hooks: &mut H,
        mut trace: Option<&mut Trace>,
    ) -> Logits {
        let steps = input.timesteps();
        let classes = self.classes();
        let mut membranes: Vec<Vec<f64>> = self.hidden.iter().map(|l| vec![0.0; l.dense.outputs]).collect();
        let mut logits = vec![0.0; steps * classes];
        if let Some(tr) = trace.as_deref_mut() {
            tr.timesteps = steps;
            tr.layers = self
                .hidden
                .iter()
                .map(|l| LayerTrace {
                    inputs: Vec::with_capacity(steps * l.dense.inputs),
                    membrane: Vec::with_capacity(steps * l.dense.outputs),
                    spikes: Vec::with_capacity(steps * l.dense.outputs),
                })
                .collect();
            tr.readout_inputs = Vec::with_capacity(steps * self.readout.inputs);
        }

        let mut current: Vec<f64> = Vec::new();
        let mut drive: Vec<f64> = Vec::new();
        for t in 0..steps {
            current.clear();
            current.extend(
                input
                    .step(t)
                    .iter()
                    .map(|&s| if s != 0 && hooks.deliver() { 1.0 } else { 0.0 }),
            );
            for (l, layer) in self.hidden.iter().enumerate() {
                let cfg = &layer.lif;
                drive.resize(layer.dense.outputs, 0.0);
                layer.dense.apply(&current, &mut drive);
                if let Some(tr) = trace.as_deref_mut() {
                    tr.layers[l].inputs.extend_from_slice(&current);
                }
                let mem = &mut membranes[l];
                let mut spikes = vec![0.0; layer.dense.outputs];
                for ((u, &i), s) in mem.iter_mut().zip(&drive).zip(spikes.iter_mut()) {
                    let pre = hooks.membrane(cfg, cfg.leak * *u + i);
                    *s = match mode {
                        SpikeMode::Hard => (pre >= cfg.threshold) as u8 as f64,
                        SpikeMode::Proxy => cfg.soft_spike(pre),
                    };
                    if let Some(tr) = trace.as_deref_mut() {
                        tr.layers[l].membrane.push(pre);
                    }
                    *u = cfg.reset_value(pre, *s);
                }
                if let Some(tr) = trace.as_deref_mut() {
                    tr.layers[l].spikes.extend_from_slice(&spikes);
                }
                current.clear();
                current.extend(spikes.iter().map(|&s| match mode {
                    SpikeMode::Hard if s != 0.0 && !hooks.deliver() => 0.0,
                    _ => s,
                }));
            }
            if let Some(tr) = trace.as_deref_mut() {
                tr.readout_inputs.extend_from_slice(&current);
            }
            self.readout
                .apply(&current, &mut logits[t * classes..(t + 1) * classes]);
        }
        Logits {
            data: logits,
            timesteps: steps,
            classes,
        }
    }

    /// Backpropagation through time. `dlogits` is `dL/dlogits`, row-major
    /// `[T x classes]`; gradients are accumulated into `grads`.
    pub fn backward(&self, trace: &Trace, dlogits: &[f64], grads: &mut Gradients) {
        let steps = trace.timesteps;
        let nl = self.hidden.len();
        let ro = &self.readout;
        debug_assert_eq!(dlogits.len(), steps * ro.outputs);

        // dL/d(spikes of the last hidden layer), [T x units]
        let mut upstream = vec![0.0; steps * ro.inputs];
        {
            let g = &mut grads.layers[nl];
            for t in 0..steps {
                let x = &trace.readout_inputs[t * ro.inputs..(t + 1) * ro.inputs];
                let up = &mut upstream[t * ro.inputs..(t + 1) * ro.inputs];
                for (k, &dl) in dlogits[t * ro.outputs..(t + 1) * ro.outputs].iter().enumerate() {
                    if dl == 0.0 {
                        continue;
                    }
                    g.bias[k] += dl;
                    let row = k * ro.inputs;
                    for (j, &xj) in x.iter().enumerate() {
                        g.weights[row + j] += dl * xj;
                        up[j] += dl * ro.weights[row + j];
                    }
                }
            }
        }

        for l in (0..nl).rev() {
            let layer = &self.hidden[l];
            let cfg = &layer.lif;
            let d = &layer.dense;
            let lt = &trace.layers[l];
            let g = &mut grads.layers[l];
            let mut below = vec![0.0; steps * d.inputs];
            // dL/du_post carried back from the next timestep
            let mut carry = vec![0.0; d.outputs];
            for t in (0..steps).rev() {
                let x = &lt.inputs[t * d.inputs..(t + 1) * d.inputs];
                for k in 0..d.outputs {
                    let idx = t * d.outputs + k;
                    let u = lt.membrane[idx];
                    let s = lt.spikes[idx];
                    let ds = surrogate_grad(u, cfg);
                    let du = upstream[idx] * ds + carry[k] * cfg.reset_derivative(u, s, ds);
                    carry[k] = du * cfg.leak;
                    if du == 0.0 {
                        continue;
                    }
                    g.bias[k] += du;
                    let row = k * d.inputs;
                    let down = &mut below[t * d.inputs..(t + 1) * d.inputs];
                    for (j, &xj) in x.iter().enumerate() {
                        g.weights[row + j] += du * xj;
                        down[j] += du * d.weights[row + j];
                    }
                }
            }
            upstream = below;
        }
    }
}
