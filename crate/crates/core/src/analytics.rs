//! Traffic equations and steady-state mean metrics.
//!
//! The contribution matrix is `alpha = (I - R')^-1`: entry `alpha[i][j]` scales
//! exogenous arrivals at queue `j` into total arrival rate at queue `i`, so
//! `lambda = alpha * rho`. Everything is solved by dense LU; Neumann series
//! only appear in tests as an oracle.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{Lu, Matrix, SingularPivot};
use crate::model::{NetworkModel, QueueId};

impl From<SingularPivot> for Error {
    fn from(p: SingularPivot) -> Self {
        Error::SingularSystem {
            step: p.step,
            magnitude: p.magnitude,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContributionMatrix {
    alpha: Matrix,
}

impl ContributionMatrix {
    pub fn from_matrix(alpha: Matrix) -> Self {
        assert!(alpha.is_square());
        Self { alpha }
    }

    pub fn num_queues(&self) -> usize {
        self.alpha.rows()
    }

    /// Weight of exogenous arrivals at `receiver` in the total arrival rate at `target`.
    pub fn weight(&self, target: QueueId, receiver: QueueId) -> f64 {
        self.alpha[(target.index(), receiver.index())]
    }

    pub fn row(&self, target: QueueId) -> &[f64] {
        self.alpha.row(target.index())
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.alpha
    }

    /// Copy with roundoff negatives clamped to zero; for output only.
    pub fn clamped(&self) -> Matrix {
        let n = self.num_queues();
        Matrix::from_fn(n, n, |i, j| self.alpha[(i, j)].max(0.0))
    }

    /// `max |(I - R') alpha - I|`.
    pub fn residual(&self, model: &NetworkModel) -> f64 {
        let n = model.num_queues();
        transposed_system(model)
            .matmul(&self.alpha)
            .sub(&Matrix::identity(n))
            .max_abs()
    }
}

/// `I - R'`, the coefficient matrix of the traffic equations.
pub fn transposed_system(model: &NetworkModel) -> Matrix {
    model.routing().as_matrix().transpose().identity_minus()
}

/// LU factorization of `I - R'`, shared by the solve routines.
pub fn factor_traffic(model: &NetworkModel) -> Result<Lu> {
    Ok(Lu::factor(&transposed_system(model))?)
}

pub fn contribution_matrix(model: &NetworkModel) -> Result<ContributionMatrix> {
    let lu = factor_traffic(model)?;
    Ok(ContributionMatrix { alpha: lu.inverse() })
}

/// Total arrival rates `lambda` solving `lambda = R' lambda + rho`.
pub fn solve_traffic(model: &NetworkModel) -> Result<Vec<f64>> {
    Ok(factor_traffic(model)?.solve(model.exo_rates()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stability {
    pub stable: bool,
    /// `mu_i - lambda_i` for every queue.
    pub margins: Vec<f64>,
}

impl Stability {
    pub fn unstable_queues(&self) -> Vec<QueueId> {
        self.margins
            .iter()
            .enumerate()
            .filter(|(_, &m)| !(m > 0.0))
            .map(|(i, _)| QueueId(i))
            .collect()
    }
}

/// Stability is strict: a queue with `lambda == mu` is unstable.
pub fn check_stability(model: &NetworkModel, lambda: &[f64]) -> Stability {
    let margins: Vec<f64> = model
        .service_rates()
        .iter()
        .zip(lambda)
        .map(|(mu, l)| mu - l)
        .collect();
    let stable = margins.iter().all(|&m| m > 0.0);
    Stability { stable, margins }
}

/// Mean number waiting (excluding the job in service) at an M/M/1 queue.
pub fn mm1_queue_length(lambda: f64, mu: f64) -> f64 {
    lambda * lambda / (mu * mu - mu * lambda)
}

/// Mean time at the queue, waiting plus service.
pub fn mm1_sojourn(lambda: f64, mu: f64) -> f64 {
    1.0 / (mu - lambda)
}

/// Mean time waiting for service.
pub fn mm1_delay(lambda: f64, mu: f64) -> f64 {
    1.0 / (mu - lambda) - 1.0 / mu
}

/// Per-queue steady-state means. `queue_lengths` counts jobs waiting, not the
/// one in service; `stay_times[i]` is the total network time of a job that
/// enters at queue `i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteadyState {
    pub arrival_rates: Vec<f64>,
    pub queue_lengths: Vec<f64>,
    pub sojourn_times: Vec<f64>,
    pub delays: Vec<f64>,
    pub stay_times: Vec<f64>,
    pub utilizations: Vec<f64>,
}

pub fn steady_state(model: &NetworkModel) -> Result<SteadyState> {
    let lambda = solve_traffic(model)?;
    steady_state_from_rates(model, lambda)
}

/// Steady state for known total arrival rates (which must come from `model`'s
/// traffic equations, possibly with modified exogenous rates).
pub fn steady_state_from_rates(model: &NetworkModel, lambda: Vec<f64>) -> Result<SteadyState> {
    let stability = check_stability(model, &lambda);
    if !stability.stable {
        return Err(Error::Unstable {
            queues: stability.unstable_queues(),
        });
    }
    let mu = model.service_rates();
    let pairs = || lambda.iter().zip(mu);
    let queue_lengths = pairs().map(|(&l, &m)| mm1_queue_length(l, m)).collect();
    let sojourn_times: Vec<f64> = pairs().map(|(&l, &m)| mm1_sojourn(l, m)).collect();
    let delays = pairs().map(|(&l, &m)| mm1_delay(l, m)).collect();
    let utilizations = pairs().map(|(&l, &m)| l / m).collect();
    let stay_times = stay_times(model, &sojourn_times)?;
    Ok(SteadyState {
        arrival_rates: lambda,
        queue_lengths,
        sojourn_times,
        delays,
        stay_times,
        utilizations,
    })
}

/// Solves `(I - R) T = W` for the per-entry-queue stay times.
pub fn stay_times(model: &NetworkModel, sojourn_times: &[f64]) -> Result<Vec<f64>> {
    let lu = Lu::factor(&model.routing().as_matrix().identity_minus())?;
    Ok(lu.solve(sojourn_times))
}
