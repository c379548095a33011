//! Stateful orchestration: a `Session` ties the network, the dataset, and
//! one of the two update engines together, and records an event history.
//! Sessions are immutable values — every mutation returns a new session — so
//! snapshots and round-trip tests are plain clones.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grow_ldl::LdlState;
use crate::grow_q::QState;
use crate::matrix::Matrix;
use crate::model::{mse, Dataset, ElmModel, NodeBlock};
use crate::shrink::RemovalPlan;
use crate::solve::{build_gram, direct_weights, invert_to_q, InverseLdl};
use crate::model::Activation;

/// Which update engine a session runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Maintain the dense inverse of the regularized Gram matrix.
    Q,
    /// Maintain its inverse-LDL factors.
    Ldl,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "q" => Ok(Variant::Q),
            "ldl" => Ok(Variant::Ldl),
            other => Err(Error::InvalidArgument(format!(
                "unknown variant '{}' (expected q or ldl)",
                other
            ))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Q => "q",
            Variant::Ldl => "ldl",
        })
    }
}

/// The engine state of a session, matching its variant.
#[derive(Debug, Clone)]
pub enum EngineState {
    Q(QState),
    Ldl(LdlState),
}

impl EngineState {
    pub fn node_count(&self) -> usize {
        match self {
            EngineState::Q(s) => s.node_count(),
            EngineState::Ldl(s) => s.node_count(),
        }
    }

    pub fn sample_count(&self) -> usize {
        match self {
            EngineState::Q(s) => s.sample_count(),
            EngineState::Ldl(s) => s.sample_count(),
        }
    }

    pub fn hidden(&self) -> &Matrix {
        match self {
            EngineState::Q(s) => s.hidden(),
            EngineState::Ldl(s) => s.hidden(),
        }
    }

    pub fn targets(&self) -> &Matrix {
        match self {
            EngineState::Q(s) => s.targets(),
            EngineState::Ldl(s) => s.targets(),
        }
    }

    pub fn ridge(&self) -> f64 {
        match self {
            EngineState::Q(s) => s.ridge(),
            EngineState::Ldl(s) => s.ridge(),
        }
    }

    pub fn weights(&self) -> &Matrix {
        match self {
            EngineState::Q(s) => s.weights(),
            EngineState::Ldl(s) => s.weights(),
        }
    }

    /// Dense gram inverse: stored directly or multiplied out of the factors.
    pub fn gram_inverse_dense(&self) -> Matrix {
        match self {
            EngineState::Q(s) => s.gram_inv().clone(),
            EngineState::Ldl(s) => s.factors().product(),
        }
    }

    pub fn variant(&self) -> Variant {
        match self {
            EngineState::Q(_) => Variant::Q,
            EngineState::Ldl(_) => Variant::Ldl,
        }
    }
}

/// Configuration for starting a session from scratch.
#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub initial_nodes: usize,
    pub ridge: f64,
    pub variant: Variant,
    pub seed: u64,
    pub activation: Activation,
    /// A zero ridge is usually a mistake (the Gram matrix may be singular);
    /// it must be opted into.
    pub allow_zero_ridge: bool,
}

/// What happened at each step of a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionEvent {
    Init,
    Grow { added: usize },
    Prune { removed: usize },
    Refresh,
}

#[derive(Debug, Clone, Serialize)]
pub struct HistoryRecord {
    pub event: SessionEvent,
    pub node_count: usize,
    pub mse: f64,
}

/// Deviations of the maintained state from the direct solver, plus the
/// current error; produced by [`Session::verify`].
#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub weight_deviation: f64,
    pub gram_deviation: f64,
    pub mse: f64,
    pub node_count: usize,
    pub sample_count: usize,
    pub variant: Variant,
}

/// A model, its training data, and a live update engine.
#[derive(Debug, Clone)]
pub struct Session {
    model: ElmModel,
    data: Dataset,
    engine: EngineState,
    history: Vec<HistoryRecord>,
}

/// Incremental state loaded from a model file.
#[derive(Debug, Clone)]
pub enum StoredState {
    GramInverse(Matrix),
    Factors { triangular: Matrix, diagonal: Vec<f64> },
}

impl Session {
    /// Draws the initial nodes and solves for their weights directly.
    pub fn init(data: Dataset, config: &SessionConfig) -> Result<Session> {
        if config.initial_nodes == 0 {
            return Err(Error::InvalidArgument(
                "a session needs at least one hidden node".into(),
            ));
        }
        if config.ridge == 0.0 && !config.allow_zero_ridge {
            return Err(Error::InvalidArgument(
                "zero regularization must be explicitly allowed".into(),
            ));
        }
        let mut model = ElmModel::random(
            config.initial_nodes,
            data.x.rows(),
            config.seed,
            config.activation,
        )?;
        let hidden = model.compute_hidden(&data.x)?;
        let engine = match config.variant {
            Variant::Q => EngineState::Q(QState::new(hidden, data.y.clone(), config.ridge)?),
            Variant::Ldl => EngineState::Ldl(LdlState::new(hidden, data.y.clone(), config.ridge)?),
        };
        model.output_weights = Some(engine.weights().clone());
        let history = vec![record(SessionEvent::Init, &engine)?];
        Ok(Session {
            model,
            data,
            engine,
            history,
        })
    }

    /// Rebuilds a session around a previously trained model and its stored
    /// incremental state; the hidden matrix is recomputed from the data.
    pub fn resume(model: ElmModel, data: Dataset, ridge: f64, stored: StoredState) -> Result<Session> {
        let weights = model
            .output_weights
            .clone()
            .ok_or_else(|| Error::State("model has no trained output weights".into()))?;
        let hidden = model.compute_hidden(&data.x)?;
        let engine = match stored {
            StoredState::GramInverse(q) => {
                EngineState::Q(QState::from_parts(hidden, data.y.clone(), ridge, q, weights)?)
            }
            StoredState::Factors {
                triangular,
                diagonal,
            } => EngineState::Ldl(LdlState::from_parts(
                hidden,
                data.y.clone(),
                ridge,
                InverseLdl::new(triangular, diagonal)?,
                weights,
            )?),
        };
        let history = vec![record(SessionEvent::Init, &engine)?];
        Ok(Session {
            model,
            data,
            engine,
            history,
        })
    }

    pub fn model(&self) -> &ElmModel {
        &self.model
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn engine(&self) -> &EngineState {
        &self.engine
    }

    pub fn history(&self) -> &[HistoryRecord] {
        &self.history
    }

    pub fn node_count(&self) -> usize {
        self.engine.node_count()
    }

    pub fn variant(&self) -> Variant {
        self.engine.variant()
    }

    pub fn ridge(&self) -> f64 {
        self.engine.ridge()
    }

    pub fn current_mse(&self) -> f64 {
        self.history.last().map(|r| r.mse).unwrap_or(f64::NAN)
    }

    /// Adds `count` freshly drawn nodes in one block. Node `j` of the block
    /// is drawn from the generator seeded with `seed + j`, so one call with
    /// `count = n` matches `n` single-node calls with consecutive seeds.
    pub fn add_nodes(&self, count: usize, seed: u64) -> Result<Session> {
        let block = NodeBlock::random(count, seed, self.model.activation, &self.data.x)?;
        let engine = match &self.engine {
            EngineState::Q(s) => EngineState::Q(s.grow_block(&block)?),
            EngineState::Ldl(s) => EngineState::Ldl(s.grow_block(&block)?),
        };
        let mut model = self.model.clone();
        model.input_weights = model.input_weights.vstack(&block.input_weights)?;
        model.biases.extend_from_slice(&block.biases);
        model.output_weights = Some(engine.weights().clone());

        let mut history = self.history.clone();
        history.push(record(SessionEvent::Grow { added: count }, &engine)?);
        Ok(Session {
            model,
            data: self.data.clone(),
            engine,
            history,
        })
    }

    /// Removes the nodes at `indices` (0-based, any order).
    pub fn remove_nodes(&self, indices: &[usize]) -> Result<Session> {
        let plan = RemovalPlan::new(self.node_count(), indices)?;
        let engine = match &self.engine {
            EngineState::Q(s) => EngineState::Q(s.shrink(&plan)?),
            EngineState::Ldl(s) => EngineState::Ldl(s.shrink(&plan)?),
        };
        let mut model = self.model.clone();
        let kept = plan.kept_count();
        let perm = plan.permutation();
        model.input_weights = model
            .input_weights
            .permute_rows(perm)?
            .submatrix(0, kept, 0, model.input_weights.cols());
        model.biases = perm.map()[..kept]
            .iter()
            .map(|&old| self.model.biases[old])
            .collect();
        model.output_weights = Some(engine.weights().clone());

        let mut history = self.history.clone();
        history.push(record(
            SessionEvent::Prune {
                removed: plan.removed_count(),
            },
            &engine,
        )?);
        Ok(Session {
            model,
            data: self.data.clone(),
            engine,
            history,
        })
    }

    /// Rebuilds the engine state from the direct solver on the current
    /// hidden matrix, discarding accumulated drift. Never applied
    /// automatically.
    pub fn refresh(&self) -> Result<Session> {
        let hidden = self.engine.hidden().clone();
        let targets = self.engine.targets().clone();
        let ridge = self.engine.ridge();
        let engine = match self.engine.variant() {
            Variant::Q => EngineState::Q(QState::new(hidden, targets, ridge)?),
            Variant::Ldl => EngineState::Ldl(LdlState::new(hidden, targets, ridge)?),
        };
        let mut model = self.model.clone();
        model.output_weights = Some(engine.weights().clone());
        let mut history = self.history.clone();
        history.push(record(SessionEvent::Refresh, &engine)?);
        Ok(Session {
            model,
            data: self.data.clone(),
            engine,
            history,
        })
    }

    /// Compares the maintained state against the direct solver. Read-only.
    pub fn verify(&self) -> Result<VerifyReport> {
        let hidden = self.engine.hidden();
        let targets = self.engine.targets();
        let ridge = self.engine.ridge();
        let w_oracle = direct_weights(hidden, targets, ridge)?;
        let q_oracle = invert_to_q(&build_gram(hidden, ridge)?)?;
        let z = self.engine.weights().matmul(hidden)?;
        Ok(VerifyReport {
            weight_deviation: self.engine.weights().relative_deviation(&w_oracle),
            gram_deviation: self.engine.gram_inverse_dense().relative_deviation(&q_oracle),
            mse: mse(targets, &z)?,
            node_count: self.node_count(),
            sample_count: self.engine.sample_count(),
            variant: self.variant(),
        })
    }
}

fn record(event: SessionEvent, engine: &EngineState) -> Result<HistoryRecord> {
    let z = engine.weights().matmul(engine.hidden())?;
    Ok(HistoryRecord {
        event,
        node_count: engine.node_count(),
        mse: mse(engine.targets(), &z)?,
    })
}
