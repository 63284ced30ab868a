use serde::{Deserialize, Serialize};
use std::ops::{Deref, Index};

/// Action-value table `Q[x][u]`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn new(n_states: usize, n_actions: usize, fill: f64) -> Self {
        QTable {
            n_states,
            n_actions,
            values: vec![fill; n_states * n_actions],
        }
    }

    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self::new(n_states, n_actions, 0.0)
    }

    /// Panics if rows have unequal lengths.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let n_states = rows.len();
        let n_actions = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == n_actions), "ragged Q rows");
        QTable {
            n_states,
            n_actions,
            values: rows.into_iter().flatten().collect(),
        }
    }

    /// Panics if the buffer length does not match the dimensions.
    pub fn from_flat(n_states: usize, n_actions: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), n_states * n_actions, "Q buffer length mismatch");
        QTable {
            n_states,
            n_actions,
            values,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn get(&self, x: usize, u: usize) -> f64 {
        self.values[x * self.n_actions + u]
    }

    #[inline]
    pub fn set(&mut self, x: usize, u: usize, value: f64) {
        self.values[x * self.n_actions + u] = value;
    }

    #[inline]
    pub fn row(&self, x: usize) -> &[f64] {
        &self.values[x * self.n_actions..(x + 1) * self.n_actions]
    }

    pub fn row_mut(&mut self, x: usize) -> &mut [f64] {
        &mut self.values[x * self.n_actions..(x + 1) * self.n_actions]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    /// Arg-max and max of row `x` restricted to `actions`, lowest index on
    /// ties. `actions` must be sorted ascending and non-empty.
    #[inline]
    pub fn best_among(&self, x: usize, actions: &[usize]) -> (usize, f64) {
        let row = self.row(x);
        let mut best = actions[0];
        let mut best_value = row[best];
        for &u in &actions[1..] {
            if row[u] > best_value {
                best = u;
                best_value = row[u];
            }
        }
        (best, best_value)
    }

    /// Arg-max and max over the full row, lowest index on ties.
    pub fn best(&self, x: usize) -> (usize, f64) {
        let row = self.row(x);
        let mut best = 0;
        for (u, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = u;
            }
        }
        (best, row[best])
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `max |self - other|` over all cells.
    pub fn sup_distance(&self, other: &QTable) -> f64 {
        assert_eq!(self.values.len(), other.values.len(), "Q dimension mismatch");
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

/// Per-state values `V[x]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValueVector(pub Vec<f64>);

impl ValueVector {
    pub fn sup_distance(&self, other: &ValueVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }
}

impl Deref for ValueVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl Index<usize> for QTable {
    type Output = [f64];

    fn index(&self, x: usize) -> &[f64] {
        self.row(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn best_breaks_ties_low() {
        let q = QTable::from_rows(vec![vec![1.0, 3.0, 2.0], vec![5.0, 5.0, 5.0], vec![0.0, 7.0, 7.0]]);
        assert_eq!(q.best(0), (1, 3.0));
        assert_eq!(q.best(1).0, 0);
        assert_eq!(q.best(2).0, 1);
        assert_eq!(q.best_among(2, &[0, 2]), (2, 7.0));
        assert_eq!(q.best_among(1, &[1, 2]).0, 1);
    }

    #[test]
    fn sup_distance() {
        let a = QTable::from_rows(vec![vec![1.0, -2.0]]);
        let b = QTable::from_rows(vec![vec![1.5, 1.0]]);
        assert_eq!(a.sup_distance(&b), 3.0);
        assert_eq!(a.sup_norm(), 2.0);
    }
}
