//! Delayed-input masking.
//!
//! Each timestep's drive vector mixes the present input and the input `d`
//! steps in the past through two fixed random masks:
//!
//! ```text
//! J(n) = β₁·M₁·u(n) + β₂·M₂·u(n−d) + J₀·𝟙
//! ```
//!
//! Masks are `N × C` and constant in time. Inputs before the start of the
//! sequence are taken as zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::reservoir::DriveSequence;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskDistribution {
    /// Uniform on [0, 1].
    #[default]
    Uniform01,
    /// Uniform on [−1, 1].
    UniformSym,
}

impl MaskDistribution {
    fn range(self) -> std::ops::RangeInclusive<f64> {
        match self {
            MaskDistribution::Uniform01 => 0.0..=1.0,
            MaskDistribution::UniformSym => -1.0..=1.0,
        }
    }

    pub fn contains(self, v: f64) -> bool {
        self.range().contains(&v)
    }
}

/// The present-input mask `m1` and delayed-input mask `m2`, both `N × C`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskPair {
    pub m1: Matrix,
    pub m2: Matrix,
    pub seed: u64,
    pub distribution: MaskDistribution,
}

impl MaskPair {
    /// Builds a pair from explicit matrices (useful for tests and imports).
    pub fn from_matrices(m1: Matrix, m2: Matrix) -> Result<Self> {
        if m1.rows() != m2.rows() || m1.cols() != m2.cols() {
            return Err(Error::DimensionMismatch {
                context: "mask pair shapes",
                expected: m1.rows() * m1.cols(),
                got: m2.rows() * m2.cols(),
            });
        }
        if m1.rows() == 0 || m1.cols() == 0 {
            return Err(Error::EmptyInput("mask"));
        }
        Ok(Self {
            m1,
            m2,
            seed: 0,
            distribution: MaskDistribution::Uniform01,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.m1.rows()
    }

    pub fn channels(&self) -> usize {
        self.m1.cols()
    }
}

/// Draws a deterministic mask pair. `m1` and `m2` come from separate
/// ChaCha streams of the same seed.
pub fn generate_masks(
    n_nodes: usize,
    channels: usize,
    seed: u64,
    distribution: MaskDistribution,
) -> Result<MaskPair> {
    if n_nodes == 0 || channels == 0 {
        return Err(Error::InvalidParameter(format!(
            "mask dimensions must be positive, got {n_nodes}x{channels}"
        )));
    }
    let draw = |stream: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let data = (0..n_nodes * channels)
            .map(|_| rng.random_range(distribution.range()))
            .collect();
        Matrix::from_row_major(n_nodes, channels, data)
    };
    Ok(MaskPair {
        m1: draw(1)?,
        m2: draw(2)?,
        seed,
        distribution,
    })
}

/// `K × C` input signal. All entries finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Matrix", into = "Matrix")]
pub struct InputSequence(Matrix);

impl InputSequence {
    pub fn new(data: Matrix) -> Result<Self> {
        if !data.is_finite() {
            return Err(Error::InvalidParameter("input sequence contains non-finite values".into()));
        }
        if data.cols() == 0 {
            return Err(Error::EmptyInput("input channels"));
        }
        Ok(Self(data))
    }

    pub fn scalar(values: &[f64]) -> Result<Self> {
        Self::new(Matrix::column(values))
    }

    pub fn timesteps(&self) -> usize {
        self.0.rows()
    }

    pub fn channels(&self) -> usize {
        self.0.cols()
    }

    pub fn at(&self, n: usize) -> &[f64] {
        self.0.row(n)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }
}

impl TryFrom<Matrix> for InputSequence {
    type Error = Error;

    fn try_from(m: Matrix) -> Result<Self> {
        Self::new(m)
    }
}

impl From<InputSequence> for Matrix {
    fn from(s: InputSequence) -> Matrix {
        s.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayedInputSpec {
    pub beta1: f64,
    pub beta2: f64,
    pub delay: usize,
    pub bias_j0: f64,
    pub masks: MaskPair,
}

impl DelayedInputSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !self.bias_j0.is_finite() {
            return Err(Error::InvalidParameter("bias_j0 must be finite".into()));
        }
        Ok(())
    }
}

/// `out[i] += scale · (mask · u)[i]`
#[inline]
fn add_masked(out: &mut [f64], mask: &Matrix, u: &[f64], scale: f64) {
    for (i, o) in out.iter_mut().enumerate() {
        let dot: f64 = mask.row(i).iter().zip(u).map(|(m, x)| m * x).sum();
        *o += scale * dot;
    }
}

/// One drive vector per input timestep.
pub fn build_drive(input: &InputSequence, spec: &DelayedInputSpec) -> Result<DriveSequence> {
    spec.validate()?;
    let masks = &spec.masks;
    if input.channels() != masks.channels() {
        return Err(Error::DimensionMismatch {
            context: "input channels vs mask columns",
            expected: masks.channels(),
            got: input.channels(),
        });
    }
    let n = masks.n_nodes();
    let k = input.timesteps();
    let mut data = vec![spec.bias_j0; k * n];
    for (t, out) in data.chunks_exact_mut(n).enumerate() {
        add_masked(out, &masks.m1, input.at(t), spec.beta1);
        if spec.beta2 != 0.0 && t >= spec.delay {
            add_masked(out, &masks.m2, input.at(t - spec.delay), spec.beta2);
        }
    }
    DriveSequence::new(n, data)
}

/// Chooses `β₁ > 0` and `J₀` so that, with `β₂ = 0`, the drive spans exactly
/// `[target_lo, target_hi]` over all timesteps and nodes.
pub fn calibrate_input_range(
    input: &InputSequence,
    masks: &MaskPair,
    target_lo: f64,
    target_hi: f64,
) -> Result<(f64, f64)> {
    if !(target_lo < target_hi) {
        return Err(Error::InvalidParameter(format!(
            "calibration target range [{target_lo}, {target_hi}] is empty"
        )));
    }
    if input.channels() != masks.channels() {
        return Err(Error::DimensionMismatch {
            context: "input channels vs mask columns",
            expected: masks.channels(),
            got: input.channels(),
        });
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut buf = vec![0.0; masks.n_nodes()];
    for t in 0..input.timesteps() {
        buf.fill(0.0);
        add_masked(&mut buf, &masks.m1, input.at(t), 1.0);
        for &v in &buf {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let spread = hi - lo;
    if !(spread > 0.0) {
        return Err(Error::ZeroSpread);
    }
    let beta1 = (target_hi - target_lo) / spread;
    Ok((beta1, target_lo - beta1 * lo))
}
