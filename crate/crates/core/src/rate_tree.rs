//! Binary indexed (Fenwick) tree over non-negative rates with prefix-sum
//! search, used to pick the next flipping vertex in `O(log n)`.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Clone, Debug, PartialEq)]
pub struct RateTree {
    /// 1-based Fenwick storage; `tree[0]` is unused.
    tree: Vec<f64>,
    top: usize,
}

#[inline]
fn lsb(i: usize) -> usize {
    i & i.wrapping_neg()
}

impl RateTree {
    pub fn new(len: usize) -> Self {
        let top = if len == 0 { 0 } else { 1 << (usize::BITS - 1 - len.leading_zeros()) };
        Self { tree: vec![0.0; len + 1], top }
    }

    pub fn from_rates(rates: &[f64]) -> Self {
        let mut t = Self::new(rates.len());
        t.rebuild(rates);
        t
    }

    pub fn len(&self) -> usize {
        self.tree.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Rebuilds from scratch in `O(n)`.
    pub fn rebuild(&mut self, rates: &[f64]) {
        debug_assert_eq!(rates.len(), self.len());
        let n = self.len();
        self.tree[1..].copy_from_slice(rates);
        for i in 1..=n {
            let parent = i + lsb(i);
            if parent <= n {
                self.tree[parent] += self.tree[i];
            }
        }
    }

    pub fn add(&mut self, index: usize, delta: f64) {
        let mut i = index + 1;
        while i < self.tree.len() {
            self.tree[i] += delta;
            i += lsb(i);
        }
    }

    /// Sum of the first `count` rates.
    pub fn prefix(&self, count: usize) -> f64 {
        let mut i = count;
        let mut sum = 0.0;
        while i > 0 {
            sum += self.tree[i];
            i -= lsb(i);
        }
        sum
    }

    pub fn total(&self) -> f64 {
        self.prefix(self.len())
    }

    /// Smallest index `i` with `prefix(i + 1) ≥ target`, for `target` in
    /// `(0, total]`. A draw landing exactly on the boundary between two
    /// entries maps to the lower index; zero-rate entries are never
    /// returned for positive targets. Rounding past the end yields `len()`,
    /// which callers must clamp.
    pub fn search(&self, target: f64) -> usize {
        let n = self.len();
        let mut pos = 0;
        let mut rem = target;
        let mut step = self.top;
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] < rem {
                pos = next;
                rem -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }
}
