//! SINR and achievable rates under adaptive successive interference cancellation.
//!
//! Users are indexed by decoding position: user `0` is decoded first.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::channel::CVec;
use crate::CoreError;

/// Binary upper-triangular matrix with unit diagonal; entry `(k, i)` set means
/// user `i` decodes the signal of user `k` before its own.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DecodingIndicatorMatrix {
    k: usize,
    bits: Vec<bool>,
}

impl DecodingIndicatorMatrix {
    pub fn identity(k: usize) -> Self {
        let mut bits = vec![false; k * k];
        for d in 0..k {
            bits[d * k + d] = true;
        }
        DecodingIndicatorMatrix { k, bits }
    }

    /// All-ones upper triangle (full SIC).
    pub fn full(k: usize) -> Self {
        let mut m = Self::identity(k);
        for r in 0..k {
            for c in r + 1..k {
                m.bits[r * k + c] = true;
            }
        }
        m
    }

    /// Builds a matrix from rows, validating the structure.
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self, CoreError> {
        let k = rows.len();
        let mut bits = vec![false; k * k];
        for (r, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(CoreError::InvalidArgument("indicator matrix must be square".into()));
            }
            for (c, &v) in row.iter().enumerate() {
                if v > 1 {
                    return Err(CoreError::InvalidArgument(format!(
                        "indicator entry ({r}, {c}) is not binary"
                    )));
                }
                bits[r * k + c] = v == 1;
            }
        }
        let m = DecodingIndicatorMatrix { k, bits };
        m.validate()?;
        Ok(m)
    }

    pub fn size(&self) -> usize {
        self.k
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.bits[r * self.k + c]
    }

    /// Sets a strict-upper-triangle entry.
    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        assert!(r < c, "only strict upper-triangle entries are free");
        self.bits[r * self.k + c] = v;
    }

    /// Overwrites any entry without checking the structure.
    pub fn set_unchecked(&mut self, r: usize, c: usize, v: bool) {
        self.bits[r * self.k + c] = v;
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        for r in 0..self.k {
            if !self.get(r, r) {
                return Err(CoreError::InvalidIndicator(format!("diagonal entry ({r}, {r}) is zero")));
            }
            for c in 0..r {
                if self.get(r, c) {
                    return Err(CoreError::InvalidIndicator(format!(
                        "lower-triangle entry ({r}, {c}) is set"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Pairs `(k, i)` with `i >= k` and entry set; user `i` must decode user `k`.
    pub fn active_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for k in 0..self.k {
            for i in k..self.k {
                if self.get(k, i) {
                    out.push((k, i));
                }
            }
        }
        out
    }

    pub fn rows(&self) -> Vec<Vec<u8>> {
        (0..self.k)
            .map(|r| (0..self.k).map(|c| self.get(r, c) as u8).collect())
            .collect()
    }
}

/// Permutation of users; `order[k]` is the original index of the user decoded `k`-th.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodingOrder {
    pub order: Vec<usize>,
}

impl DecodingOrder {
    pub fn new(order: Vec<usize>) -> Result<Self, CoreError> {
        let mut seen = vec![false; order.len()];
        for &z in &order {
            if z >= order.len() || seen[z] {
                return Err(CoreError::InvalidArgument(format!("{order:?} is not a permutation")));
            }
            seen[z] = true;
        }
        Ok(DecodingOrder { order })
    }

    pub fn identity(k: usize) -> Self {
        DecodingOrder {
            order: (0..k).collect(),
        }
    }
}

/// `table[(j, i)] = |h_i^H w_j|^2`.
pub fn gain_table(h: &[CVec], w: &[CVec]) -> DMatrix<f64> {
    DMatrix::from_fn(w.len(), h.len(), |j, i| h[i].dotc(&w[j]).norm_sqr())
}

/// Interference-plus-noise seen by user `i` while decoding user `k`'s message.
pub fn upsilon_from_table(
    table: &DMatrix<f64>,
    pi: &DecodingIndicatorMatrix,
    noise: &[f64],
    k: usize,
    i: usize,
) -> f64 {
    let kk = table.nrows();
    let mut total = noise[i];
    for j in 0..kk {
        if !(j <= k && pi.get(j, i)) {
            total += table[(j, i)];
        }
    }
    total
}

/// SINR of user `i` decoding user `k` (`k == i` is the own-signal SINR).
pub fn sinr_from_table(
    table: &DMatrix<f64>,
    pi: &DecodingIndicatorMatrix,
    noise: &[f64],
    k: usize,
    i: usize,
) -> f64 {
    let num = table[(k, i)];
    if num <= 0.0 {
        return 0.0;
    }
    num / upsilon_from_table(table, pi, noise, k, i)
}

pub fn rate_from_table(table: &DMatrix<f64>, pi: &DecodingIndicatorMatrix, noise: &[f64], k: usize) -> f64 {
    let mut best = f64::INFINITY;
    for i in k..pi.size() {
        if pi.get(k, i) {
            best = best.min((1.0 + sinr_from_table(table, pi, noise, k, i)).log2());
        }
    }
    best
}

pub fn rates_from_table(table: &DMatrix<f64>, pi: &DecodingIndicatorMatrix, noise: &[f64]) -> Vec<f64> {
    (0..pi.size()).map(|k| rate_from_table(table, pi, noise, k)).collect()
}

pub fn sinr_own(h: &[CVec], w: &[CVec], pi: &DecodingIndicatorMatrix, noise: &[f64], k: usize) -> f64 {
    sinr_from_table(&gain_table(h, w), pi, noise, k, k)
}

pub fn sinr_cross(
    h: &[CVec],
    w: &[CVec],
    pi: &DecodingIndicatorMatrix,
    noise: &[f64],
    k: usize,
    i: usize,
) -> Result<f64, CoreError> {
    if k >= i {
        return Err(CoreError::InvalidArgument(format!(
            "cross SINR needs k < i, got k = {k}, i = {i}"
        )));
    }
    if !pi.get(k, i) {
        return Err(CoreError::InvalidArgument(format!(
            "user {i} does not decode user {k}"
        )));
    }
    Ok(sinr_from_table(&gain_table(h, w), pi, noise, k, i))
}

pub fn achievable_rate(h: &[CVec], w: &[CVec], pi: &DecodingIndicatorMatrix, noise: &[f64], k: usize) -> f64 {
    rate_from_table(&gain_table(h, w), pi, noise, k)
}

pub fn sum_rate(h: &[CVec], w: &[CVec], pi: &DecodingIndicatorMatrix, noise: &[f64]) -> f64 {
    rates_from_table(&gain_table(h, w), pi, noise).iter().sum()
}
