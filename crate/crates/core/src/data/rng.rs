//! Counter-based normal variates for the synthetic generators.
//!
//! Variate number `i` of stream `s` under seed `k` is computed without any
//! sequential state:
//!
//! ```text
//! key = splitmix64(k ^ splitmix64(s))
//! a   = splitmix64(key + 2i)          (wrapping)
//! b   = splitmix64(key + 2i + 1)      (wrapping)
//! u1  = ((a >> 11) + 1) · 2⁻⁵³        in (0, 1]
//! u2  =  (b >> 11)      · 2⁻⁵³        in [0, 1)
//! z   = sqrt(−2 ln u1) · cos(2π u2)   (Box–Muller)
//! ```
//!
//! Generated data can therefore be produced in any order, or in parallel,
//! and still be bitwise identical.

use crate::seeds::splitmix64;

const TWO_POW_M53: f64 = 1.0 / (1u64 << 53) as f64;

#[derive(Debug, Clone, Copy)]
pub struct CounterNormal {
    key: u64,
}

impl CounterNormal {
    pub fn new(seed: u64, stream: u64) -> Self {
        CounterNormal {
            key: splitmix64(seed ^ splitmix64(stream)),
        }
    }

    /// Uniform in [0, 1) for counter `i`.
    pub fn uniform(&self, i: u64) -> f64 {
        (splitmix64(self.key.wrapping_add(i)) >> 11) as f64 * TWO_POW_M53
    }

    pub fn normal(&self, i: u64) -> f64 {
        let a = splitmix64(self.key.wrapping_add(i.wrapping_mul(2)));
        let b = splitmix64(self.key.wrapping_add(i.wrapping_mul(2)).wrapping_add(1));
        let u1 = ((a >> 11) + 1) as f64 * TWO_POW_M53;
        let u2 = (b >> 11) as f64 * TWO_POW_M53;
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
