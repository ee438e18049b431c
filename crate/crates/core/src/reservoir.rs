//! Ring-topology delay reservoir in discrete time.
//!
//! Node `i > 0` is driven by its left neighbour at the same delay period,
//! node 0 by the last node one period earlier:
//!
//! ```text
//! x_0(n+1) = f(α·x_{N−1}(n−1) + J_0(n+1))
//! x_i(n+1) = f(α·x_{i−1}(n)   + J_i(n+1))     i = 1..N−1
//! ```
//!
//! States are collected one row per timestep (timesteps × N).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::{Error, Result};

/// Node activation function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Nonlinearity {
    /// `sin(v)`: the intensity response of a Mach-Zehnder modulator with
    /// its constant offset filtered out.
    #[default]
    Sine,
    Tanh,
    Identity,
}

impl Nonlinearity {
    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Nonlinearity::Sine => v.sin(),
            Nonlinearity::Tanh => v.tanh(),
            Nonlinearity::Identity => v,
        }
    }
}

/// How the state (and the one-period-old state) is initialised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialState {
    #[default]
    Zeros,
    /// Uniform on [−1, 1], for echo-state testing.
    SeededUniform(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservoirParams {
    pub n_nodes: usize,
    pub feedback_alpha: f64,
    pub nonlinearity: Nonlinearity,
    pub initial_state: InitialState,
}

impl ReservoirParams {
    /// Sine reservoir starting from zeros.
    pub fn new(n_nodes: usize, feedback_alpha: f64) -> Result<Self> {
        let params = Self {
            n_nodes,
            feedback_alpha,
            nonlinearity: Nonlinearity::Sine,
            initial_state: InitialState::Zeros,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_nonlinearity(mut self, f: Nonlinearity) -> Self {
        self.nonlinearity = f;
        self
    }

    pub fn with_initial_state(mut self, init: InitialState) -> Self {
        self.initial_state = init;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_nodes == 0 {
            return Err(Error::InvalidParameter("n_nodes must be at least 1".into()));
        }
        if !(self.feedback_alpha >= 0.0) || !self.feedback_alpha.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "feedback_alpha must be finite and >= 0, got {}",
                self.feedback_alpha
            )));
        }
        if self.feedback_alpha > 1.0 {
            log::warn!(
                "feedback_alpha = {} > 1: reservoir is not guaranteed to be contractive",
                self.feedback_alpha
            );
        }
        Ok(())
    }

    /// With a 1-Lipschitz activation, `α < 1` makes the state map a contraction.
    pub fn is_contractive(&self) -> bool {
        self.feedback_alpha < 1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirState {
    pub current: Vec<f64>,
    /// State one period earlier; node 0 reads its last entry.
    pub previous: Vec<f64>,
    pub step_index: usize,
}

impl ReservoirState {
    pub fn zeros(n: usize) -> Self {
        Self {
            current: vec![0.0; n],
            previous: vec![0.0; n],
            step_index: 0,
        }
    }

    pub fn initial(params: &ReservoirParams) -> Self {
        let n = params.n_nodes;
        match params.initial_state {
            InitialState::Zeros => Self::zeros(n),
            InitialState::SeededUniform(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut draw = || (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
                let current = draw();
                let previous = draw();
                Self {
                    current,
                    previous,
                    step_index: 0,
                }
            }
        }
    }

    fn check(&self, n: usize) -> Result<()> {
        for (got, context) in [
            (self.current.len(), "reservoir state length"),
            (self.previous.len(), "previous reservoir state length"),
        ] {
            if got != n {
                return Err(Error::DimensionMismatch {
                    context,
                    expected: n,
                    got,
                });
            }
        }
        Ok(())
    }
}

/// Writes the next state into `next` given the current and previous states.
#[inline]
fn advance(current: &[f64], previous: &[f64], drive: &[f64], alpha: f64, f: Nonlinearity, next: &mut [f64]) {
    let n = current.len();
    next[0] = f.apply(alpha * previous[n - 1] + drive[0]);
    for i in 1..n {
        next[i] = f.apply(alpha * current[i - 1] + drive[i]);
    }
}

/// One update of the ring recursion.
pub fn step(state: &ReservoirState, drive: &[f64], params: &ReservoirParams) -> Result<ReservoirState> {
    let n = params.n_nodes;
    state.check(n)?;
    if drive.len() != n {
        return Err(Error::DimensionMismatch {
            context: "drive vector length",
            expected: n,
            got: drive.len(),
        });
    }
    let mut next = vec![0.0; n];
    advance(
        &state.current,
        &state.previous,
        drive,
        params.feedback_alpha,
        params.nonlinearity,
        &mut next,
    );
    Ok(ReservoirState {
        current: next,
        previous: state.current.clone(),
        step_index: state.step_index + 1,
    })
}

/// Per-timestep drive vectors, stored row-major (timesteps × N).
#[derive(Debug, Clone, PartialEq)]
pub struct DriveSequence {
    n_nodes: usize,
    data: Vec<f64>,
}

impl DriveSequence {
    pub fn new(n_nodes: usize, data: Vec<f64>) -> Result<Self> {
        if n_nodes == 0 || !data.len().is_multiple_of(n_nodes) {
            return Err(Error::DimensionMismatch {
                context: "drive sequence length (multiple of N)",
                expected: n_nodes,
                got: data.len(),
            });
        }
        Ok(Self { n_nodes, data })
    }

    pub fn from_vectors<R: AsRef<[f64]>>(vectors: &[R]) -> Result<Self> {
        let n = vectors.first().map_or(0, |v| v.as_ref().len());
        if n == 0 {
            return Err(Error::EmptyInput("drive sequence"));
        }
        let mut data = Vec::with_capacity(n * vectors.len());
        for v in vectors {
            let v = v.as_ref();
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "drive vector length",
                    expected: n,
                    got: v.len(),
                });
            }
            data.extend_from_slice(v);
        }
        Ok(Self { n_nodes: n, data })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.n_nodes
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, n: usize) -> &[f64] {
        &self.data[n * self.n_nodes..(n + 1) * self.n_nodes]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.n_nodes)
    }
}

/// Collected reservoir states, one row per retained timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix {
    states: Matrix,
    /// Index in the driving sequence of the first retained row.
    pub timestep_offset: usize,
}

impl StateMatrix {
    pub fn rows(&self) -> usize {
        self.states.rows()
    }

    pub fn cols(&self) -> usize {
        self.states.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.states.row(i)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.states
    }

    pub fn into_matrix(self) -> Matrix {
        self.states
    }
}

/// Drives the reservoir from its configured initial state and keeps every
/// state after the first `washout`.
pub fn run(drive: &DriveSequence, params: &ReservoirParams, washout: usize) -> Result<StateMatrix> {
    params.validate()?;
    let n = params.n_nodes;
    if drive.is_empty() {
        return Err(Error::EmptyInput("drive sequence"));
    }
    if drive.n_nodes() != n {
        return Err(Error::DimensionMismatch {
            context: "drive vector length",
            expected: n,
            got: drive.n_nodes(),
        });
    }
    let len = drive.len();
    if washout >= len {
        return Err(Error::WashoutTooLong { washout, len });
    }

    let init = ReservoirState::initial(params);
    let (mut current, mut previous) = (init.current, init.previous);
    let mut next = vec![0.0; n];
    let mut out = Vec::with_capacity((len - washout) * n);
    for (t, j) in drive.iter().enumerate() {
        advance(&current, &previous, j, params.feedback_alpha, params.nonlinearity, &mut next);
        // rotate buffers: previous <- current <- next
        std::mem::swap(&mut previous, &mut current);
        std::mem::swap(&mut current, &mut next);
        if t >= washout {
            out.extend_from_slice(&current);
        }
    }
    Ok(StateMatrix {
        states: Matrix::from_row_major(len - washout, n, out)?,
        timestep_offset: washout,
    })
}
