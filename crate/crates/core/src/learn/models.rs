use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tape::{Tape, Tensor, Var};
use super::window::{JointScale, SequenceWindow};
use crate::kinematics::JointConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Fnn,
    Tcn,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Fnn => "fnn",
            ModelKind::Tcn => "tcn",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "fnn" => Ok(ModelKind::Fnn),
            "tcn" => Ok(ModelKind::Tcn),
            other => Err(format!("unknown model kind {other:?} (expected fnn or tcn)")),
        }
    }
}

/// Smallest block count whose receptive field covers a window of `len`:
/// `⌈log_d((len − 1)(d − 1)/(2k − 2) + 1)⌉`, evaluated in integers.
pub fn tcn_num_blocks(len: usize, kernel: usize, base: usize) -> usize {
    assert!(len >= 1 && kernel >= 2 && base >= 2, "invalid TCN sizing");
    let lhs = (len - 1) * (base - 1) + (2 * kernel - 2);
    let mut blocks = 0;
    let mut pow = 1usize;
    while pow * (2 * kernel - 2) < lhs {
        pow *= base;
        blocks += 1;
    }
    blocks
}

/// Inputs that can reach the last output of a `blocks`-deep TCN.
pub fn tcn_receptive_field(blocks: usize, kernel: usize, base: usize) -> usize {
    1 + 2 * (kernel - 1) * (base.pow(blocks as u32) - 1) / (base - 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// window length L
    pub window: usize,
    pub kernel: usize,
    pub dilation_base: usize,
    /// TCN width; 5 means no input or output projection
    pub channels: usize,
    /// FNN hidden layer widths
    pub hidden: Vec<usize>,
    pub scale: JointScale,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::tcn(80)
    }
}

impl ModelConfig {
    pub fn tcn(window: usize) -> Self {
        Self {
            kind: ModelKind::Tcn,
            window,
            kernel: 3,
            dilation_base: 2,
            channels: 5,
            hidden: vec![128, 128],
            scale: JointScale::from_spec(&crate::kinematics::ManipulatorSpec::default()),
        }
    }

    pub fn fnn(window: usize) -> Self {
        Self { kind: ModelKind::Fnn, ..Self::tcn(window) }
    }

    pub fn of_kind(kind: ModelKind, window: usize) -> Self {
        match kind {
            ModelKind::Fnn => Self::fnn(window),
            ModelKind::Tcn => Self::tcn(window),
        }
    }

    pub fn num_blocks(&self) -> usize {
        tcn_num_blocks(self.window, self.kernel, self.dilation_base)
    }

    fn projected(&self) -> bool {
        self.channels != 5
    }

    /// Shapes of every parameter tensor, in storage order.
    pub fn param_shapes(&self) -> Vec<[usize; 3]> {
        let mut shapes = Vec::new();
        match self.kind {
            ModelKind::Tcn => {
                let c = self.channels;
                if self.projected() {
                    shapes.push([1, 5, c]);
                    shapes.push([1, 1, c]);
                }
                for _ in 0..self.num_blocks() {
                    for _ in 0..2 {
                        shapes.push([self.kernel, c, c]);
                        shapes.push([1, 1, c]);
                    }
                }
                if self.projected() {
                    shapes.push([1, c, 5]);
                    shapes.push([1, 1, 5]);
                }
            }
            ModelKind::Fnn => {
                let mut width = 5 * self.window;
                for &h in self.hidden.iter().chain(std::iter::once(&5)) {
                    shapes.push([1, width, h]);
                    shapes.push([1, 1, h]);
                    width = h;
                }
            }
        }
        shapes
    }

    pub fn num_params(&self) -> usize {
        self.param_shapes().iter().map(|s| s.iter().product::<usize>()).sum()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.window < 2 {
            return Err("window length must be ≥ 2".into());
        }
        if self.kernel < 2 || self.dilation_base < 2 || self.channels == 0 {
            return Err("kernel and dilation base must be ≥ 2, channels ≥ 1".into());
        }
        if self.kind == ModelKind::Fnn && self.hidden.contains(&0) {
            return Err("hidden widths must be ≥ 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: Vec<Tensor>,
}

impl Model {
    /// Uniform initialization in `±1/√fan_in` for weights and biases.
    pub fn new<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Self {
        let shapes = config.param_shapes();
        let mut params = Vec::with_capacity(shapes.len());
        for pair in shapes.chunks(2) {
            let [k, fan, _] = pair[0];
            let bound = 1.0 / ((k * fan) as f64).sqrt();
            for shape in pair {
                let n = shape.iter().product();
                params.push(Tensor::from_vec(*shape, (0..n).map(|_| rng.random_range(-bound..bound)).collect()));
            }
        }
        Self { config, params }
    }

    pub fn zeros(config: ModelConfig) -> Self {
        let params = config.param_shapes().into_iter().map(Tensor::zeros).collect();
        Self { config, params }
    }

    pub fn num_params(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.params.iter().flat_map(|p| p.data.iter().copied()).collect()
    }

    pub fn from_flat(config: ModelConfig, flat: &[f64]) -> Result<Self, String> {
        let shapes = config.param_shapes();
        let need: usize = shapes.iter().map(|s| s.iter().product::<usize>()).sum();
        if need != flat.len() {
            return Err(format!("expected {need} weights, got {}", flat.len()));
        }
        let mut off = 0;
        let params = shapes
            .into_iter()
            .map(|s| {
                let n: usize = s.iter().product();
                let t = Tensor::from_vec(s, flat[off..off + n].to_vec());
                off += n;
                t
            })
            .collect();
        Ok(Self { config, params })
    }

    /// Records the network on `tape`; `x` is `[batch, L, 5]` in normalized
    /// units, the result is `[batch, 1, 5]`.
    pub fn forward(&self, tape: &mut Tape<'_>, x: Var) -> Var {
        let mut p = 0..self.params.len();
        let mut next = |tape: &mut Tape<'_>| tape.param(p.next().expect("parameter layout"));
        match self.config.kind {
            ModelKind::Tcn => {
                let mut h = x;
                if self.config.projected() {
                    let (w, b) = (next(tape), next(tape));
                    h = tape.affine(h, w, b);
                }
                for block in 0..self.config.num_blocks() {
                    let dilation = self.config.dilation_base.pow(block as u32);
                    let (w1, b1, w2, b2) = (next(tape), next(tape), next(tape), next(tape));
                    let c1 = tape.conv1d(h, w1, b1, dilation);
                    let a = tape.relu(c1);
                    let c2 = tape.conv1d(a, w2, b2, dilation);
                    h = tape.add(h, c2);
                }
                let mut z = tape.last_row(h);
                if self.config.projected() {
                    let (w, b) = (next(tape), next(tape));
                    z = tape.affine(z, w, b);
                }
                z
            }
            ModelKind::Fnn => {
                let mut h = tape.flatten(x);
                let layers = self.config.hidden.len() + 1;
                for layer in 0..layers {
                    let (w, b) = (next(tape), next(tape));
                    h = tape.affine(h, w, b);
                    if layer + 1 < layers {
                        h = tape.relu(h);
                    }
                }
                h
            }
        }
    }

    /// Normalized batch in, normalized `[batch × 5]` out.
    pub fn predict_normalized(&self, inputs: Tensor) -> Vec<f64> {
        let mut tape = Tape::new(&self.params);
        let x = tape.input(inputs);
        let y = self.forward(&mut tape, x);
        tape.value(y).data.clone()
    }

    pub fn predict_batch(&self, windows: &[SequenceWindow]) -> Vec<JointConfig> {
        if windows.is_empty() {
            return Vec::new();
        }
        let len = self.config.window;
        let scale = &self.config.scale;
        let mut data = Vec::with_capacity(windows.len() * len * 5);
        for w in windows {
            assert_eq!(w.len(), len, "window length must match the model");
            for row in &w.rows {
                data.extend(scale.normalize(row));
            }
        }
        let out = self.predict_normalized(Tensor::from_vec([windows.len(), len, 5], data));
        out.chunks(5).map(|c| scale.denormalize(c)).collect()
    }

    /// Estimate in degrees for one window.
    pub fn predict(&self, window: &SequenceWindow) -> JointConfig {
        self.predict_batch(std::slice::from_ref(window))[0]
    }
}
