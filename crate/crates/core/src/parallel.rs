//! Deterministic parallel map-reduce over path indices.
//!
//! Results are collected into a vector indexed by path, then folded
//! sequentially in index order. The fold therefore sees the same operand
//! sequence for any worker count, which makes every aggregate bit-identical
//! across thread pools. All cross-path estimators in this crate go through
//! these helpers.

use rayon::prelude::*;

/// Map `f` over `0..n` in parallel, returning results in index order.
pub fn par_map<T: Send, F: Fn(u64) -> T + Sync + Send>(n: u64, f: F) -> Vec<T> {
    (0..n).into_par_iter().map(f).collect()
}

/// Map in parallel, then fold sequentially in index order.
pub fn par_map_fold<T, A, F, G>(n: u64, f: F, init: A, fold: G) -> A
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
    G: FnMut(A, T) -> A,
{
    par_map(n, f).into_iter().fold(init, fold)
}

/// Neumaier compensated summation; deterministic given operand order.
#[derive(Debug, Clone, Copy, Default)]
pub struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub fn new() -> Self {
        Kahan::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}
