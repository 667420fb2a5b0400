//! Table factors over discrete variables.
//!
//! Tables are row-major over the scope: the first variable varies slowest,
//! which is the same layout as CPT rows followed by the node's own states.

use serde::{Deserialize, Serialize};

/// Factor over internal variable ids, the working type of inference.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Potential {
    pub scope: Vec<usize>,
    pub cards: Vec<usize>,
    pub table: Vec<f64>,
}

fn strides(cards: &[usize]) -> Vec<usize> {
    let mut s = vec![1; cards.len()];
    for i in (0..cards.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * cards[i + 1];
    }
    s
}

impl Potential {
    pub fn new(scope: Vec<usize>, cards: Vec<usize>, table: Vec<f64>) -> Self {
        debug_assert_eq!(scope.len(), cards.len());
        debug_assert_eq!(table.len(), cards.iter().product::<usize>());
        Potential { scope, cards, table }
    }

    pub fn scalar(value: f64) -> Self {
        Potential {
            scope: Vec::new(),
            cards: Vec::new(),
            table: vec![value],
        }
    }

    pub fn contains(&self, var: usize) -> bool {
        self.scope.contains(&var)
    }

    /// Pointwise product; result scope is `self.scope` followed by the new
    /// variables of `other` in their order.
    pub fn product(&self, other: &Potential) -> Potential {
        let mut scope = self.scope.clone();
        let mut cards = self.cards.clone();
        for (&v, &c) in other.scope.iter().zip(&other.cards) {
            if !scope.contains(&v) {
                scope.push(v);
                cards.push(c);
            }
        }
        let size: usize = cards.iter().product();
        // stride of each result axis inside the two operands (0 when absent)
        let sa = strides(&self.cards);
        let sb = strides(&other.cards);
        let axis_a: Vec<usize> = scope
            .iter()
            .map(|v| self.scope.iter().position(|x| x == v).map_or(0, |k| sa[k]))
            .collect();
        let axis_b: Vec<usize> = scope
            .iter()
            .map(|v| other.scope.iter().position(|x| x == v).map_or(0, |k| sb[k]))
            .collect();
        let mut table = Vec::with_capacity(size);
        let mut assign = vec![0usize; scope.len()];
        let (mut ia, mut ib) = (0usize, 0usize);
        for _ in 0..size {
            table.push(self.table[ia] * other.table[ib]);
            // odometer increment, last axis fastest
            for k in (0..scope.len()).rev() {
                assign[k] += 1;
                ia += axis_a[k];
                ib += axis_b[k];
                if assign[k] < cards[k] {
                    break;
                }
                ia -= axis_a[k] * cards[k];
                ib -= axis_b[k] * cards[k];
                assign[k] = 0;
            }
        }
        Potential { scope, cards, table }
    }

    /// Sums `var` out of the factor.
    pub fn sum_out(&self, var: usize) -> Potential {
        let Some(k) = self.scope.iter().position(|&v| v == var) else {
            return self.clone();
        };
        let outer: usize = self.cards[..k].iter().product();
        let card = self.cards[k];
        let inner: usize = self.cards[k + 1..].iter().product();
        let mut table = vec![0.0; outer * inner];
        for o in 0..outer {
            for s in 0..card {
                let base = (o * card + s) * inner;
                let dst = &mut table[o * inner..(o + 1) * inner];
                for (d, &x) in dst.iter_mut().zip(&self.table[base..base + inner]) {
                    *d += x;
                }
            }
        }
        let mut scope = self.scope.clone();
        let mut cards = self.cards.clone();
        scope.remove(k);
        cards.remove(k);
        Potential { scope, cards, table }
    }

    /// Fixes `var` to `state` and drops it from the scope.
    pub fn reduce(&self, var: usize, state: usize) -> Potential {
        let Some(k) = self.scope.iter().position(|&v| v == var) else {
            return self.clone();
        };
        let outer: usize = self.cards[..k].iter().product();
        let card = self.cards[k];
        let inner: usize = self.cards[k + 1..].iter().product();
        let mut table = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            let base = (o * card + state) * inner;
            table.extend_from_slice(&self.table[base..base + inner]);
        }
        let mut scope = self.scope.clone();
        let mut cards = self.cards.clone();
        scope.remove(k);
        cards.remove(k);
        Potential { scope, cards, table }
    }

    /// Reorders the axes so the scope equals `order` (a permutation).
    pub fn permute(&self, order: &[usize]) -> Potential {
        if order == self.scope.as_slice() {
            return self.clone();
        }
        let src = strides(&self.cards);
        let cards: Vec<usize> = order
            .iter()
            .map(|v| self.cards[self.scope.iter().position(|x| x == v).expect("permutation")])
            .collect();
        let axis: Vec<usize> = order
            .iter()
            .map(|v| src[self.scope.iter().position(|x| x == v).expect("permutation")])
            .collect();
        let size = self.table.len();
        let mut table = Vec::with_capacity(size);
        let mut assign = vec![0usize; order.len()];
        let mut idx = 0usize;
        for _ in 0..size {
            table.push(self.table[idx]);
            for k in (0..order.len()).rev() {
                assign[k] += 1;
                idx += axis[k];
                if assign[k] < cards[k] {
                    break;
                }
                idx -= axis[k] * cards[k];
                assign[k] = 0;
            }
        }
        Potential {
            scope: order.to_vec(),
            cards,
            table,
        }
    }

    pub fn total(&self) -> f64 {
        self.table.iter().sum()
    }

    /// Divides by the total when it is positive; returns the total.
    pub fn normalize(&mut self) -> f64 {
        let t = self.total();
        if t > 0.0 {
            self.table.iter_mut().for_each(|x| *x /= t);
        }
        t
    }
}

/// Factor with a named scope, as returned to callers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub scope: Vec<String>,
    pub cards: Vec<usize>,
    pub table: Vec<f64>,
}

impl Factor {
    pub fn total(&self) -> f64 {
        self.table.iter().sum()
    }

    pub fn normalized(&self) -> Factor {
        let t = self.total();
        Factor {
            scope: self.scope.clone(),
            cards: self.cards.clone(),
            table: self.table.iter().map(|x| x / t).collect(),
        }
    }

    /// Marginal table over one scope variable (not normalized).
    pub fn marginal(&self, var: &str) -> Option<Vec<f64>> {
        let k = self.scope.iter().position(|v| v == var)?;
        let card = self.cards[k];
        let inner: usize = self.cards[k + 1..].iter().product();
        let mut out = vec![0.0; card];
        for (i, &x) in self.table.iter().enumerate() {
            out[(i / inner) % card] += x;
        }
        Some(out)
    }

    /// Joint table over two scope variables, `a` slowest (not normalized).
    pub fn pair_marginal(&self, a: &str, b: &str) -> Option<Vec<f64>> {
        let ka = self.scope.iter().position(|v| v == a)?;
        let kb = self.scope.iter().position(|v| v == b)?;
        let st = strides(&self.cards);
        let (ca, cb) = (self.cards[ka], self.cards[kb]);
        let mut out = vec![0.0; ca * cb];
        for (i, &x) in self.table.iter().enumerate() {
            let sa = (i / st[ka]) % ca;
            let sb = (i / st[kb]) % cb;
            out[sa * cb + sb] += x;
        }
        Some(out)
    }
}
