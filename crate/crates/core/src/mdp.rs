//! Exact tabular quantities for a policy-marginalized MDP.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

const ROW_SUM_TOL: f64 = 1e-12;
const VALUE_RESIDUAL_TOL: f64 = 1e-10;
const SR_INVERSE_TOL: f64 = 1e-8;

/// Per-policy environment: transition matrix `P`, reward vector `r`, discount
/// and reward bound.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    transition: Matrix,
    reward: Vector,
    discount: f64,
    r_max: f64,
}

impl TabularMdp {
    pub fn new(transition: Matrix, reward: Vector, discount: f64, r_max: f64) -> Result<Self> {
        let s = transition.nrows();
        if s == 0 || !transition.is_square() {
            return Err(Error::InvalidArgument(format!(
                "transition matrix must be square and non-empty, got {:?}",
                transition.shape()
            )));
        }
        if reward.len() != s {
            return Err(Error::InvalidArgument(format!(
                "reward has length {} for {s} states",
                reward.len()
            )));
        }
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::InvalidArgument(format!(
                "discount must lie in [0, 1), got {discount}"
            )));
        }
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(Error::InvalidArgument(format!("r_max must be positive, got {r_max}")));
        }
        validate_stochastic(&transition)?;
        if let Some(bad) = reward.iter().position(|x| !x.is_finite() || x.abs() > r_max) {
            return Err(Error::InvalidArgument(format!(
                "reward[{bad}] = {} exceeds r_max = {r_max}",
                reward[bad]
            )));
        }
        Ok(Self {
            transition,
            reward,
            discount,
            r_max,
        })
    }

    /// Same dynamics with a different reward vector.
    pub fn with_reward(&self, reward: Vector, r_max: f64) -> Result<Self> {
        Self::new(self.transition.clone(), reward, self.discount, r_max)
    }

    pub fn num_states(&self) -> usize {
        self.transition.nrows()
    }

    pub fn transition(&self) -> &Matrix {
        &self.transition
    }

    pub fn reward(&self) -> &Vector {
        &self.reward
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn v_max(&self) -> f64 {
        self.r_max / (1.0 - self.discount)
    }

    /// `I - gamma P`.
    fn resolvent_operator(&self) -> Matrix {
        let s = self.num_states();
        Matrix::identity(s, s) - self.transition.scale(self.discount)
    }
}

/// Checks nonnegativity and unit row sums.
pub fn validate_stochastic(p: &Matrix) -> Result<()> {
    for (i, row) in p.row_iter().enumerate() {
        if let Some(j) = row.iter().position(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "transition[{i}][{j}] = {} is not a probability",
                row[j]
            )));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::InvalidArgument(format!(
                "transition row {i} sums to {sum}, not 1"
            )));
        }
    }
    Ok(())
}

/// Value function together with its a-priori bound `V_max = R_max / (1 - gamma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueVector {
    pub values: Vector,
    pub v_max: f64,
}

impl ValueVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Successor representation `Psi = (I - gamma P)^{-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuccessorMatrix {
    pub psi: Matrix,
}

/// Solves `(I - gamma P) v = r` by LU factorization.
pub fn value_function(mdp: &TabularMdp) -> Result<ValueVector> {
    let a = mdp.resolvent_operator();
    let r = mdp.reward();
    let values = a
        .clone()
        .lu()
        .solve(r)
        .ok_or_else(|| Error::Numerical("I - gamma P is singular".into()))?;
    let residual = (&a * &values - r).norm();
    if residual > VALUE_RESIDUAL_TOL * r.norm() {
        return Err(Error::Numerical(format!(
            "value solve residual {residual:e} exceeds tolerance"
        )));
    }
    Ok(ValueVector {
        values,
        v_max: mdp.v_max(),
    })
}

pub fn successor_representation(mdp: &TabularMdp) -> Result<SuccessorMatrix> {
    let a = mdp.resolvent_operator();
    let psi = a
        .clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("I - gamma P is singular".into()))?;
    let s = mdp.num_states();
    let defect = (&a * &psi - Matrix::identity(s, s)).norm();
    if defect > SR_INVERSE_TOL {
        return Err(Error::Numerical(format!(
            "successor inverse defect {defect:e} exceeds tolerance"
        )));
    }
    Ok(SuccessorMatrix { psi })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnStatistics {
    pub v_max: f64,
    /// Default sub-Gaussian noise parameter, `V_max / 2`.
    pub sigma_bound: f64,
}

pub fn return_statistics(mdp: &TabularMdp) -> ReturnStatistics {
    return_statistics_for(mdp.r_max(), mdp.discount())
}

pub fn return_statistics_for(r_max: f64, discount: f64) -> ReturnStatistics {
    let v_max = r_max / (1.0 - discount);
    ReturnStatistics {
        v_max,
        sigma_bound: v_max / 2.0,
    }
}
