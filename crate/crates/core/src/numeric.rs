//! Numerically stable accumulation primitives used throughout the crate.

use alloc::vec::Vec;

/// log(exp(a) + exp(b)) without overflow.
#[inline]
pub fn logsumexp2(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY && b == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if a > b {
        a + libm::log1p(libm::exp(b - a))
    } else {
        b + libm::log1p(libm::exp(a - b))
    }
}

/// Streaming log-sum-exp accumulator.
///
/// Terms may span hundreds of nats; the accumulator rescales its running sum
/// whenever a new maximum arrives. The result depends on insertion order only
/// through rounding, so callers that need bit-stable output must feed terms in
/// a deterministic order.
#[derive(Debug, Clone)]
pub struct LogSumExp {
    max: f64,
    sum: f64,
    count: u64,
}

impl LogSumExp {
    pub fn new() -> Self {
        LogSumExp {
            max: f64::NEG_INFINITY,
            sum: 0.0,
            count: 0,
        }
    }

    pub fn add(&mut self, term: f64) {
        self.count += 1;
        if term == f64::NEG_INFINITY {
            return;
        }
        if term <= self.max {
            self.sum += libm::exp(term - self.max);
        } else {
            self.sum = self.sum * libm::exp(self.max - term) + 1.0;
            self.max = term;
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// ln Σ exp(term_i); −∞ when nothing finite was added.
    pub fn value(&self) -> f64 {
        if self.sum == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + libm::log(self.sum)
        }
    }
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self::new()
    }
}

/// Shannon entropy −Σ p ln p in nats, with 0·ln 0 = 0.
pub fn shannon_entropy(probs: &[f64]) -> f64 {
    let mut h = 0.0;
    for &p in probs {
        if p > 0.0 {
            h -= p * libm::log(p);
        }
    }
    h
}

/// Table of ln k! for k = 0..=n, built by cumulative summation.
#[derive(Debug, Clone)]
pub struct LnFactorials {
    table: Vec<f64>,
}

impl LnFactorials {
    pub fn new(n: usize) -> Self {
        let mut table = Vec::with_capacity(n + 1);
        table.push(0.0);
        let mut acc = 0.0;
        for k in 1..=n {
            acc += libm::log(k as f64);
            table.push(acc);
        }
        LnFactorials { table }
    }

    #[inline]
    pub fn ln_factorial(&self, k: usize) -> f64 {
        self.table[k]
    }

    /// ln( n! / Π counts_j! ) for a composition of n.
    pub fn ln_multinomial(&self, counts: &[usize]) -> f64 {
        let n: usize = counts.iter().sum();
        let mut v = self.ln_factorial(n);
        for &c in counts {
            v -= self.ln_factorial(c);
        }
        v
    }
}

/// Number of compositions of `n` into `k` nonnegative parts, C(n+k−1, k−1),
/// saturating at `u128::MAX`.
pub fn composition_count(n: usize, k: usize) -> u128 {
    if k == 0 {
        return if n == 0 { 1 } else { 0 };
    }
    binomial_u128(n as u128 + k as u128 - 1, k as u128 - 1)
}

fn binomial_u128(n: u128, mut k: u128) -> u128 {
    if k > n {
        return 0;
    }
    if k > n - k {
        k = n - k;
    }
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Iterator over all compositions of `n` into `k` nonnegative parts.
///
/// Order is deterministic: starts at (n, 0, …, 0) and repeatedly moves one
/// unit from the rightmost positive non-final slot, so results stream with
/// constant memory per step.
pub struct Compositions {
    state: Option<Vec<usize>>,
    parts: usize,
}

pub fn compositions(n: usize, parts: usize) -> Compositions {
    let state = if parts == 0 {
        None
    } else {
        let mut v = alloc::vec![0usize; parts];
        v[0] = n;
        Some(v)
    };
    Compositions { state, parts }
}

impl Iterator for Compositions {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let state = self.state.as_mut()?;
        let out = state.clone();
        // advance: find rightmost index < parts-1 with a positive count
        let mut i = self.parts - 1;
        loop {
            if i == 0 {
                if state[0] == 0 {
                    self.state = None;
                    return Some(out);
                }
                break;
            }
            i -= 1;
            if state[i] > 0 {
                break;
            }
        }
        if self.parts == 1 {
            self.state = None;
            return Some(out);
        }
        let tail = state[self.parts - 1];
        state[self.parts - 1] = 0;
        state[i] -= 1;
        state[i + 1] = tail + 1;
        Some(out)
    }
}

/// Cache key for a vector of reals, quantized to 12 decimal digits so that
/// types sharing (numerically identical) moments reuse one fit.
pub(crate) fn quantized_key(values: &[f64]) -> Vec<i128> {
    values
        .iter()
        .map(|&v| libm::round(v * 1e12) as i128)
        .collect()
}
