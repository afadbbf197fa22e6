//! The smooth partition of unity built from
//! `f(x) = int_{1/2}^x exp(-(2u-1)^{-2} (u-1)^{-2}) du`:
//! `phi = f / f(1)` on `[1/2, 1]`, `phi(x) = 1 - phi(x/2)` on `[1, 2]`,
//! zero elsewhere, and `Phi(x) = sum_{j >= 0} phi(x / 2^j)`.

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::numeric::{adaptive, gauss_legendre};

/// Number of equal cells of `[1/2, 1]` at whose edges `f` is tabulated.
const CELLS: usize = 256;

/// Precomputed bump pair; cheap to clone and shareable across threads.
#[derive(Clone, Debug)]
pub struct BumpPair {
    /// `f` at the cell edges `1/2 + j/(2 CELLS)`, unnormalised.
    cumulative: Vec<f64>,
}

fn density(u: f64) -> f64 {
    if u <= 0.5 || u >= 1.0 {
        return 0.0;
    }
    let a = 2.0 * u - 1.0;
    let b = u - 1.0;
    (-1.0 / (a * a * b * b)).exp()
}

impl BumpPair {
    /// Builds the tables by adaptive quadrature of the density on each cell.
    pub fn new() -> Self {
        let mut cumulative = Vec::with_capacity(CELLS + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for j in 0..CELLS {
            let lo = 0.5 + j as f64 / (2 * CELLS) as f64;
            let hi = 0.5 + (j + 1) as f64 / (2 * CELLS) as f64;
            let q = adaptive(lo, hi, 0.0, 1e-15, 4096, |u| Complex64::new(density(u), 0.0));
            acc += q.value.re;
            cumulative.push(acc);
        }
        Self { cumulative }
    }

    /// Shared instance.
    pub fn shared() -> &'static BumpPair {
        static BUMP: OnceLock<BumpPair> = OnceLock::new();
        BUMP.get_or_init(BumpPair::new)
    }

    /// The normalisation `f(1)`.
    pub fn f_one(&self) -> f64 {
        self.cumulative[CELLS]
    }

    /// `f(x)` for `x` in `[1/2, 1]`.
    fn f(&self, x: f64) -> f64 {
        if x <= 0.5 {
            return 0.0;
        }
        if x >= 1.0 {
            return self.f_one();
        }
        let pos = (x - 0.5) * (2 * CELLS) as f64;
        let j = (pos.floor() as usize).min(CELLS - 1);
        let lo = 0.5 + j as f64 / (2 * CELLS) as f64;
        let half = 0.5 * (x - lo);
        let mid = lo + half;
        let part: f64 = gauss_legendre(20).iter().map(|&(t, w)| w * density(mid + half * t)).sum::<f64>() * half;
        self.cumulative[j] + part
    }

    /// `phi(x)`, supported on `[1/2, 2]`.
    pub fn phi(&self, x: f64) -> f64 {
        if x <= 0.5 || x >= 2.0 {
            0.0
        } else if x <= 1.0 {
            self.f(x) / self.f_one()
        } else {
            1.0 - self.f(0.5 * x) / self.f_one()
        }
    }

    /// `Phi(x) = sum_{j >= 0} phi(x / 2^j)`; zero below `1/2`, one from `1` on.
    pub fn big_phi(&self, x: f64) -> f64 {
        let mut total = 0.0;
        let mut y = x;
        while y > 0.5 {
            total += self.phi(y);
            y *= 0.5;
        }
        total
    }

    /// `Phi(x)` read as the exact step-to-one for `x >= 1`.
    pub fn big_phi_fast(&self, x: f64) -> f64 {
        if x >= 1.0 {
            1.0
        } else {
            self.phi(x)
        }
    }
}

impl Default for BumpPair {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_examples() {
        let b = BumpPair::shared();
        assert_eq!(b.phi(0.5), 0.0);
        assert!((b.big_phi(1.7) - 1.0).abs() < 1e-12);
        assert!((b.phi(1.2) + b.phi(0.6) - 1.0).abs() < 1e-12);
        assert!((b.phi(1.0) - 1.0).abs() < 1e-15);
        assert!((b.phi(0.75) - 0.5).abs() < 1e-12, "symmetry about 3/4");
    }
}
