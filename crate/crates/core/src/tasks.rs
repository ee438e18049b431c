//! Benchmark series: NARMA10 and Mackey-Glass forecasting, plus the
//! washout/train/washout/test split protocol.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::masking::InputSequence;
use crate::{Error, Result};

/// Four consecutive windows over a series: washout, train, washout, test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub washout1: usize,
    pub train_len: usize,
    pub washout2: usize,
    pub test_len: usize,
}

impl Default for SplitSpec {
    /// 500 / 10000 / 500 / 10000, for a series of 21000 points.
    fn default() -> Self {
        Self {
            washout1: 500,
            train_len: 10_000,
            washout2: 500,
            test_len: 10_000,
        }
    }
}

impl SplitSpec {
    pub fn new(washout1: usize, train_len: usize, washout2: usize, test_len: usize) -> Self {
        Self {
            washout1,
            train_len,
            washout2,
            test_len,
        }
    }

    pub fn total(&self) -> usize {
        self.washout1 + self.train_len + self.washout2 + self.test_len
    }

    /// The default 1:20:1:20 proportions stretched to `len` points; the
    /// test window takes the rounding remainder.
    pub fn scaled(len: usize) -> Self {
        let washout = len / 42;
        let train_len = (len - 2 * washout) / 2;
        Self::new(washout, train_len, washout, len - 2 * washout - train_len)
    }

    /// Index ranges of the train and test windows for a series of `len` points.
    pub fn ranges(&self, len: usize) -> Result<SplitRanges> {
        if self.total() != len {
            return Err(Error::InvalidParameter(format!(
                "split {}+{}+{}+{} = {} does not match series length {len}",
                self.washout1,
                self.train_len,
                self.washout2,
                self.test_len,
                self.total()
            )));
        }
        if self.train_len == 0 || self.test_len == 0 {
            return Err(Error::InvalidParameter("train and test windows must be non-empty".into()));
        }
        let train_start = self.washout1;
        let test_start = train_start + self.train_len + self.washout2;
        Ok(SplitRanges {
            train: train_start..train_start + self.train_len,
            test: test_start..test_start + self.test_len,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitRanges {
    pub train: Range<usize>,
    pub test: Range<usize>,
}

/// A scalar series with per-timestep targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesTask {
    pub input: InputSequence,
    pub target: Vec<f64>,
    pub split: SplitSpec,
}

impl SeriesTask {
    pub fn new(input: InputSequence, target: Vec<f64>, split: SplitSpec) -> Result<Self> {
        if input.timesteps() != target.len() {
            return Err(Error::DimensionMismatch {
                context: "series target length",
                expected: input.timesteps(),
                got: target.len(),
            });
        }
        split.ranges(target.len())?;
        Ok(Self { input, target, split })
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }
}

pub fn apply_split(task: &SeriesTask) -> Result<SplitRanges> {
    task.split.ranges(task.len())
}

/// Which lagged term feeds the NARMA10 sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NarmaSummand {
    /// Σᵢ q(n−i), i = 0..9 (the usual order-10 process).
    #[default]
    Lagged,
    /// Σᵢ q(n−1), i = 0..9, i.e. 10·q(n−1).
    RepeatedFirstLag,
}

pub const NARMA_DIVERGENCE_THRESHOLD: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Narma10Params {
    pub length: usize,
    pub input_seed: u64,
    pub input_lo: f64,
    pub input_hi: f64,
    /// `target(n) = q(n + target_offset)`.
    pub target_offset: usize,
    pub summand: NarmaSummand,
    pub split: SplitSpec,
}

impl Default for Narma10Params {
    fn default() -> Self {
        Self {
            length: 21_000,
            input_seed: 1,
            input_lo: 0.0,
            input_hi: 0.5,
            target_offset: 1,
            summand: NarmaSummand::Lagged,
            split: SplitSpec::default(),
        }
    }
}

impl Narma10Params {
    pub fn validate(&self) -> Result<()> {
        if self.length <= 10 {
            return Err(Error::InvalidParameter(format!(
                "NARMA10 length must exceed 10, got {}",
                self.length
            )));
        }
        if !(self.input_lo < self.input_hi) || !self.input_lo.is_finite() || !self.input_hi.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "NARMA10 input range [{}, {}] is invalid",
                self.input_lo, self.input_hi
            )));
        }
        self.split.ranges(self.length).map(|_| ())
    }
}

/// Raw NARMA10 input and output sequences (`q.len() == u.len()`), with
/// `q(0) = 0` and zero history before `n = 0`.
pub fn narma10_sequences(
    u: &[f64],
    summand: NarmaSummand,
    seed: u64,
) -> Result<Vec<f64>> {
    let k = u.len();
    let mut q = vec![0.0; k];
    for n in 0..k.saturating_sub(1) {
        let sum = match summand {
            NarmaSummand::Lagged => (0..10).filter(|&i| i <= n).map(|i| q[n - i]).sum::<f64>(),
            NarmaSummand::RepeatedFirstLag => 10.0 * if n >= 1 { q[n - 1] } else { 0.0 },
        };
        let u_lag = if n >= 9 { u[n - 9] } else { 0.0 };
        let next = 0.3 * q[n] + 0.05 * q[n] * sum + 1.5 * u_lag * u[n] + 0.1;
        if !(next.abs() <= NARMA_DIVERGENCE_THRESHOLD) {
            return Err(Error::NarmaDiverged {
                seed,
                step: n + 1,
                threshold: NARMA_DIVERGENCE_THRESHOLD,
            });
        }
        q[n + 1] = next;
    }
    Ok(q)
}

/// NARMA10 task: input `u(n)`, target `q(n + target_offset)`.
pub fn generate_narma10(params: &Narma10Params) -> Result<SeriesTask> {
    params.validate()?;
    let total = params.length + params.target_offset;
    let mut rng = ChaCha8Rng::seed_from_u64(params.input_seed);
    let u: Vec<f64> = (0..total)
        .map(|_| rng.random_range(params.input_lo..params.input_hi))
        .collect();
    let q = narma10_sequences(&u, params.summand, params.input_seed)?;
    let target = q[params.target_offset..].to_vec();
    SeriesTask::new(
        InputSequence::scalar(&u[..params.length])?,
        target,
        params.split,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MackeyGlassParams {
    pub mg_beta: f64,
    pub mg_tau: f64,
    pub mg_exponent: f64,
    pub mg_gamma: f64,
    pub sample_dt: f64,
    /// Integration steps per output sample.
    pub substeps: usize,
    /// Constant value of x(t) for t ≤ 0.
    pub history_value: f64,
    pub transient_samples: usize,
    pub length: usize,
    /// Forecast horizon in samples.
    pub horizon: usize,
    pub interpolation: DelayInterpolation,
    pub split: SplitSpec,
}

/// How the delayed term x(t − τ) is read between stored grid points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DelayInterpolation {
    /// Straight line between grid values (second order).
    Linear,
    /// Cubic Hermite through grid values and stored derivatives (fourth
    /// order, matching the RK4 step).
    #[default]
    CubicHermite,
}

impl Default for MackeyGlassParams {
    fn default() -> Self {
        Self {
            mg_beta: 0.2,
            mg_tau: 17.0,
            mg_exponent: 10.0,
            mg_gamma: 0.1,
            sample_dt: 1.0,
            substeps: 10,
            history_value: 1.2,
            transient_samples: 1000,
            length: 21_000,
            horizon: 10,
            interpolation: DelayInterpolation::CubicHermite,
            split: SplitSpec::default(),
        }
    }
}

impl MackeyGlassParams {
    fn step_size(&self) -> f64 {
        self.sample_dt / self.substeps as f64
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mg_beta", self.mg_beta),
            ("mg_tau", self.mg_tau),
            ("mg_exponent", self.mg_exponent),
            ("mg_gamma", self.mg_gamma),
            ("sample_dt", self.sample_dt),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.substeps == 0 {
            return Err(Error::InvalidParameter("substeps must be at least 1".into()));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be at least 1".into()));
        }
        if self.mg_tau < self.step_size() {
            return Err(Error::InvalidParameter(format!(
                "mg_tau ({}) must be at least one integration step ({})",
                self.mg_tau,
                self.step_size()
            )));
        }
        if !self.history_value.is_finite() {
            return Err(Error::InvalidParameter("history_value must be finite".into()));
        }
        self.split.ranges(self.length).map(|_| ())
    }
}

/// Fixed-step RK4 integration of the Mackey-Glass equation from constant
/// history. Returns `n_samples` values `x(n·sample_dt)`, n = 0.., including
/// `x(0) = history_value`.
pub fn integrate_mackey_glass(params: &MackeyGlassParams, n_samples: usize) -> Result<Vec<f64>> {
    let h = params.step_size();
    let fine_steps = n_samples.saturating_sub(1) * params.substeps;
    let mut x = Vec::with_capacity(fine_steps + 1);
    // dx/dt at each stored grid point
    let mut dx = Vec::with_capacity(fine_steps + 1);
    x.push(params.history_value);

    let delay_steps = params.mg_tau / h;
    let hist = params.history_value;
    let hermite = params.interpolation == DelayInterpolation::CubicHermite;
    // x at fractional grid position `pos` (in units of h); only reads
    // points strictly before the step being taken
    let delayed = |x: &[f64], dx: &[f64], pos: f64| -> f64 {
        if pos <= 0.0 {
            return hist;
        }
        let k = pos.floor() as usize;
        let s = pos - k as f64;
        if s == 0.0 {
            return x[k];
        }
        let (x0, x1) = (x[k], x[k + 1]);
        if !hermite {
            return x0 + s * (x1 - x0);
        }
        let (m0, m1) = (h * dx[k], h * dx[k + 1]);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * x0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * x1 + (s3 - s2) * m1
    };
    let rhs = |xt: f64, xd: f64| {
        params.mg_beta * xd / (1.0 + xd.abs().powf(params.mg_exponent)) - params.mg_gamma * xt
    };

    for k in 0..fine_steps {
        let xk = x[k];
        let base = k as f64 - delay_steps;
        let d0 = delayed(&x, &dx, base);
        let k1 = rhs(xk, d0);
        dx.push(k1);
        let dh = delayed(&x, &dx, base + 0.5);
        let d1 = delayed(&x, &dx, base + 1.0);
        let k2 = rhs(xk + 0.5 * h * k1, dh);
        let k3 = rhs(xk + 0.5 * h * k2, dh);
        let k4 = rhs(xk + h * k3, d1);
        let next = xk + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !next.is_finite() {
            return Err(Error::IntegrationFailure {
                time: (k + 1) as f64 * h,
            });
        }
        x.push(next);
    }
    Ok(x.into_iter().step_by(params.substeps).collect())
}

/// Mackey-Glass forecasting task: input `x(n)`, target `x(n + horizon)`,
/// both after discarding `transient_samples`.
pub fn generate_mackey_glass(params: &MackeyGlassParams) -> Result<SeriesTask> {
    params.validate()?;
    let start = params.transient_samples;
    let samples = integrate_mackey_glass(params, start + params.length + params.horizon)?;
    let input = &samples[start..start + params.length];
    let target = samples[start + params.horizon..start + params.horizon + params.length].to_vec();
    SeriesTask::new(InputSequence::scalar(input)?, target, params.split)
}
