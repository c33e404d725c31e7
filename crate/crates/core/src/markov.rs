//! Finite discrete-time Markov chains: validation, stationary distribution
//! by direct linear solve, and a power-iteration oracle.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row sums must equal one within this tolerance.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;
/// Maximum accepted `‖πP − π‖∞` for a stationary solution.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

/// A square row-stochastic matrix; entry `(i, j)` is the probability of
/// moving from state `i` to state `j` in one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl StochasticMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::NotStochastic("matrix is not square".into()));
        }
        Self::from_fn(n, |i, j| rows[i][j])
    }

    /// Builds an `n × n` matrix from an entry function and validates it.
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::NotStochastic("matrix has no states".into()));
        }
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(f(i, j));
            }
        }
        let m = Self { n, entries };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        for i in 0..self.n {
            let row = self.row(i);
            if let Some((j, v)) = row
                .iter()
                .enumerate()
                .find(|(_, v)| !(0.0..=1.0).contains(*v))
            {
                return Err(Error::NotStochastic(format!("entry ({i}, {j}) = {v} outside [0, 1]")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::NotStochastic(format!("row {i} sums to {sum}")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks(self.n)
    }

    /// Row vector times matrix, `xP`.
    pub fn left_multiply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "vector length must match state count");
        let mut out = vec![0.0; self.n];
        for (xi, row) in x.iter().zip(self.rows()) {
            if *xi == 0.0 {
                continue;
            }
            for (o, p) in out.iter_mut().zip(row) {
                *o += xi * p;
            }
        }
        out
    }

    /// `‖xP − x‖∞`.
    pub fn stationarity_residual(&self, x: &[f64]) -> f64 {
        self.left_multiply(x)
            .iter()
            .zip(x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Largest absolute entrywise difference to another matrix of equal size.
    pub fn max_abs_diff(&self, other: &StochasticMatrix) -> f64 {
        assert_eq!(self.n, other.n, "matrix sizes differ");
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `reach[s][t]` is true when `t` can be reached from `s` in zero or more
    /// steps over strictly positive entries.
    fn reachability(&self) -> Vec<Vec<bool>> {
        (0..self.n)
            .map(|start| {
                let mut seen = vec![false; self.n];
                let mut stack = vec![start];
                seen[start] = true;
                while let Some(s) = stack.pop() {
                    for (t, p) in self.row(s).iter().enumerate() {
                        if *p > 0.0 && !seen[t] {
                            seen[t] = true;
                            stack.push(t);
                        }
                    }
                }
                seen
            })
            .collect()
    }

    /// Number of closed communicating classes. A unique stationary
    /// distribution exists iff this is one; transient states are allowed.
    pub fn closed_class_count(&self) -> usize {
        let reach = self.reachability();
        let recurrent: Vec<usize> = (0..self.n)
            .filter(|&s| (0..self.n).all(|t| !reach[s][t] || reach[t][s]))
            .collect();
        let mut class_of = vec![usize::MAX; self.n];
        let mut classes = 0;
        for &s in &recurrent {
            if class_of[s] != usize::MAX {
                continue;
            }
            for &t in &recurrent {
                if reach[s][t] {
                    class_of[t] = classes;
                }
            }
            classes += 1;
        }
        classes
    }
}

/// A probability vector over the states of a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryDistribution {
    pub probs: Vec<f64>,
}

impl StationaryDistribution {
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn max_abs_diff(&self, other: &StationaryDistribution) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<usize> for StationaryDistribution {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.probs[i]
    }
}

/// Solves `πP = π, π·1 = 1` directly.
///
/// The system `(Pᵀ − I)π = 0` has rank `n − 1` for a chain with a single
/// closed class, and its rows sum to zero, so any one row may be swapped
/// for the normalization row without losing information. The swapped
/// system is solved by LU with partial pivoting.
pub fn stationary(m: &StochasticMatrix) -> Result<StationaryDistribution> {
    let closed = m.closed_class_count();
    if closed != 1 {
        return Err(Error::NotIrreducible { closed_classes: closed });
    }
    let n = m.len();
    let last = n - 1;
    let a = DMatrix::from_fn(n, n, |r, c| {
        if r == last {
            1.0
        } else if r == c {
            m.get(c, r) - 1.0
        } else {
            m.get(c, r)
        }
    });
    let mut b = DVector::zeros(n);
    b[last] = 1.0;
    let x = a.lu().solve(&b).ok_or(Error::NumericalFailure {
        residual: f64::INFINITY,
        tolerance: RESIDUAL_TOLERANCE,
    })?;

    // Transient states come back as ±1e-17 noise; clamp and renormalize.
    let mut probs: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);

    let residual = m.stationarity_residual(&probs);
    if !(residual < RESIDUAL_TOLERANCE) {
        return Err(Error::NumericalFailure {
            residual,
            tolerance: RESIDUAL_TOLERANCE,
        });
    }
    Ok(StationaryDistribution { probs })
}

/// Repeatedly left-multiplies a start distribution by `m` until two
/// successive iterates differ by less than `tol` in the sup norm.
///
/// The start weights state `i` proportionally to `i + 1`. A uniform start
/// is a fixed point of every doubly stochastic matrix, which would hide
/// periodicity; with the skewed start periodic chains oscillate and fail.
pub fn stationary_power_iteration(
    m: &StochasticMatrix,
    steps: usize,
    tol: f64,
) -> Result<StationaryDistribution> {
    let n = m.len();
    let norm = (n * (n + 1)) as f64 / 2.0;
    let mut x: Vec<f64> = (0..n).map(|i| (i + 1) as f64 / norm).collect();
    let mut last_change = f64::INFINITY;
    for _ in 0..steps {
        let next = m.left_multiply(&x);
        last_change = next
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        x = next;
        if last_change < tol {
            let total: f64 = x.iter().sum();
            x.iter_mut().for_each(|p| *p /= total);
            return Ok(StationaryDistribution { probs: x });
        }
    }
    Err(Error::NonConvergence { steps, last_change })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rejects_bad_matrices() {
        assert!(matches!(
            StochasticMatrix::from_rows(vec![vec![0.5, 0.6], vec![0.5, 0.5]]),
            Err(Error::NotStochastic(_))
        ));
        assert!(matches!(
            StochasticMatrix::from_rows(vec![vec![1.5, -0.5], vec![0.5, 0.5]]),
            Err(Error::NotStochastic(_))
        ));
        assert!(StochasticMatrix::from_rows(vec![vec![1.0, 0.0]]).is_err());
        assert!(StochasticMatrix::from_rows(vec![]).is_err());
    }

    #[test]
    fn symmetric_two_state() {
        let m = StochasticMatrix::from_rows(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let pi = stationary(&m).unwrap();
        assert_abs_diff_eq!(pi[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(pi[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn hand_solved_two_state() {
        let m = StochasticMatrix::from_rows(vec![vec![0.9, 0.1], vec![0.5, 0.5]]).unwrap();
        let direct = stationary(&m).unwrap();
        let power = stationary_power_iteration(&m, 10_000, 1e-15).unwrap();
        for pi in [direct, power] {
            assert_abs_diff_eq!(pi[0], 5.0 / 6.0, epsilon = 1e-12);
            assert_abs_diff_eq!(pi[1], 1.0 / 6.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn periodic_chains_do_not_converge() {
        let flip = StochasticMatrix::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(matches!(
            stationary_power_iteration(&flip, 10_000, 1e-12),
            Err(Error::NonConvergence { .. })
        ));
        // the direct solver does not care about periodicity
        let pi = stationary(&flip).unwrap();
        assert_abs_diff_eq!(pi[0], 0.5, epsilon = 1e-15);

        let cycle = StochasticMatrix::from_rows(vec![
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
        ])
        .unwrap();
        assert!(stationary_power_iteration(&cycle, 10_000, 1e-12).is_err());
    }

    #[test]
    fn transient_states_get_zero_mass() {
        let m = StochasticMatrix::from_rows(vec![
            vec![1.0, 0.0, 0.0],
            vec![0.8, 0.0, 0.2],
            vec![0.8, 0.0, 0.2],
        ])
        .unwrap();
        assert_eq!(m.closed_class_count(), 1);
        let pi = stationary(&m).unwrap();
        assert_eq!(pi.probs, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn reducible_chain_is_rejected() {
        let m = StochasticMatrix::from_rows(vec![
            vec![1.0, 0.0, 0.0],
            vec![0.3, 0.4, 0.3],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        assert_eq!(stationary(&m), Err(Error::NotIrreducible { closed_classes: 2 }));
    }
}
