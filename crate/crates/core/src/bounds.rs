//! Acceptance thresholds for the weight and cost statements.
//!
//! Each bound is an integer at the scale of the quantity it limits:
//!
//! | bound         | limits                                   | scale |
//! |---------------|------------------------------------------|-------|
//! | `eps_mu`      | `|sum of a column|`                      | d     |
//! | `eps_sigma`   | `|sum of squares - n * 10^(2d)|`         | 2d    |
//! | `eps_inverse` | entries of `X^T X Z - I`                 | 2d    |
//! | `theta_z`     | `(k+1) * max |Z_ij|`                     | d     |
//! | `theta_xty`   | `max |(X^T Y)_j|`                        | 2d    |
//! | `eps_w`       | `|w - round(Z X^T Y)|` per entry          | d     |
//! | `eps_w_noisy` | `|w' - round(Z X^T Y) - q|` per entry     | d     |

use serde::{Deserialize, Serialize};

use crate::field::{fp_encode, pow10, CodecError, COMPARATOR_BITS};

/// Default real-valued residual tolerance for the approximate inverse.
pub const DEFAULT_EPS_INVERSE: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundSet {
    pub eps_mu: u128,
    pub eps_sigma: u128,
    pub eps_inverse: u128,
    pub theta_z: u128,
    pub theta_xty: u128,
    pub eps_w: u128,
    pub eps_w_noisy: u128,
}

impl BoundSet {
    /// Defaults for `n` samples of `k` features at `d` decimals.
    ///
    /// The weight tolerance covers the gap between the floating-point
    /// weights and the weights recomputed from the rounded inverse: each of
    /// the `k+1` terms of `Z X^T Y` carries at most half a unit of `Z`
    /// times `|X^T Y| <= n` for z-scored data, plus one unit of rounding.
    pub fn defaults(k: usize, n: usize, d: u32) -> Self {
        let m = (k + 1) as u128;
        let n = n as u128;
        let eps_w = (m * n).div_ceil(2) + m;
        let eps_inverse = fp_encode(DEFAULT_EPS_INVERSE, 2 * d)
            .expect("default tolerance encodes")
            .mag();
        BoundSet {
            eps_mu: n,
            eps_sigma: 10 * n * pow10(d),
            eps_inverse,
            theta_z: 10 * pow10(d) * m,
            theta_xty: 2 * n * pow10(2 * d),
            eps_w,
            eps_w_noisy: eps_w,
        }
    }

    pub fn with_overrides(mut self, o: &BoundOverrides, d: u32) -> Result<Self, CodecError> {
        let enc = |v: f64, scale: u32| fp_encode(v.abs(), scale).map(|s| s.mag());
        if let Some(v) = o.eps_mu {
            self.eps_mu = enc(v, d)?;
        }
        if let Some(v) = o.eps_sigma {
            self.eps_sigma = enc(v, 2 * d)?;
        }
        if let Some(v) = o.eps_inverse {
            self.eps_inverse = enc(v, 2 * d)?;
        }
        if let Some(v) = o.theta_z {
            self.theta_z = enc(v, d)?;
        }
        if let Some(v) = o.theta_xty {
            self.theta_xty = enc(v, 2 * d)?;
        }
        if let Some(v) = o.eps_w {
            self.eps_w = enc(v, d)?;
        }
        if let Some(v) = o.eps_w_noisy {
            self.eps_w_noisy = enc(v, d)?;
        }
        Ok(self)
    }

    /// True when every bound fits the comparator width.
    pub fn fits_comparators(&self) -> bool {
        let limit = 1u128 << COMPARATOR_BITS;
        [
            self.eps_mu,
            self.eps_sigma,
            self.eps_inverse,
            self.theta_z,
            self.theta_xty,
            self.eps_w,
            self.eps_w_noisy,
        ]
        .iter()
        .all(|&b| b < limit)
    }

    pub fn zero() -> Self {
        BoundSet {
            eps_mu: 0,
            eps_sigma: 0,
            eps_inverse: 0,
            theta_z: 0,
            theta_xty: 0,
            eps_w: 0,
            eps_w_noisy: 0,
        }
    }
}

/// Optional replacements, in real units.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundOverrides {
    pub eps_mu: Option<f64>,
    pub eps_sigma: Option<f64>,
    pub eps_inverse: Option<f64>,
    pub theta_z: Option<f64>,
    pub theta_xty: Option<f64>,
    pub eps_w: Option<f64>,
    pub eps_w_noisy: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_at_five_decimals() {
        let b = BoundSet::defaults(2, 30, 5);
        assert_eq!(b.eps_mu, 30);
        assert_eq!(b.eps_sigma, 10 * 30 * 100_000);
        assert_eq!(b.eps_inverse, 10_000_000);
        assert_eq!(b.theta_z, 3_000_000);
        assert_eq!(b.theta_xty, 60 * 10u128.pow(10));
        assert_eq!(b.eps_w, 45 + 3);
        assert_eq!(b.eps_w_noisy, b.eps_w);
        assert!(b.fits_comparators());
    }

    #[test]
    fn overrides_use_real_units() {
        let o = BoundOverrides {
            eps_inverse: Some(0.01),
            eps_w: Some(0.5),
            ..Default::default()
        };
        let b = BoundSet::defaults(1, 20, 3).with_overrides(&o, 3).unwrap();
        assert_eq!(b.eps_inverse, 10_000);
        assert_eq!(b.eps_w, 500);
        assert_eq!(b.eps_mu, 20);
    }
}
