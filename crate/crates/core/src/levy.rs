//! Limit objects: the generalized arcsine law, the truncated depth law
//! `σ_ε^M`, the truncated Lévy measure of the clock limit and its Laplace
//! exponent, and range-avoidance probabilities of the compound-Poisson
//! subordinator.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_lr};

use crate::error::{Error, Result};
use crate::parallel::map_blocks;
use crate::quad::integrate;
use crate::special::beta_reg_with;
use crate::stats::Proportion;

/// Generalized arcsine distribution function
/// `Asl_α(z) = sin(απ)/π ∫_0^z u^{α-1}(1-u)^{-α} du = I_z(α, 1-α)`.
pub fn asl(alpha: f64, z: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!(
            "asl needs alpha in (0,1), got {alpha}"
        )));
    }
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::Parameter(format!("asl needs z in [0,1], got {z}")));
    }
    // B(α, 1-α) = π / sin(απ)
    Ok(beta_reg_with(
        alpha,
        1.0 - alpha,
        z,
        (PI / (alpha * PI).sin()).ln(),
    ))
}

/// Aging-function target `Asl_α(1/(1+θ))`.
pub fn aging_target(alpha: f64, theta: f64) -> Result<f64> {
    asl(alpha, 1.0 / (1.0 + theta))
}

/// `Γ(1+α)Γ(1-α) λ^α`, the Laplace exponent of the stable subordinator with
/// Lévy density `α Γ(1+α) v^{-1-α}`.
pub fn stable_exponent(alpha: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    // reflection: Γ(1+α)Γ(1-α) = απ / sin(απ)
    alpha * PI / (alpha * PI).sin() * lambda.powf(alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevyParams {
    pub alpha: f64,
    pub eps: f64,
    pub big_m: f64,
}

impl LevyParams {
    pub fn new(alpha: f64, eps: f64, big_m: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Parameter(format!(
                "alpha must be in (0,1), got {alpha}"
            )));
        }
        if !(eps > 0.0 && big_m > eps && big_m.is_finite()) {
            return Err(Error::Parameter(format!(
                "need 0 < eps < M, got ({eps}, {big_m})"
            )));
        }
        Ok(Self { alpha, eps, big_m })
    }

    /// `p_ε^M = ε^{-α} - M^{-α}`, the total mass of the truncated Lévy measure.
    pub fn mass(&self) -> f64 {
        self.eps.powf(-self.alpha) - self.big_m.powf(-self.alpha)
    }

    /// `P[σ_ε^M <= u]`.
    pub fn sigma_cdf(&self, u: f64) -> f64 {
        if u <= self.eps {
            0.0
        } else if u >= self.big_m {
            1.0
        } else {
            (self.eps.powf(-self.alpha) - u.powf(-self.alpha)) / self.mass()
        }
    }

    pub fn sample_sigma<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        (self.eps.powf(-self.alpha) - u * self.mass())
            .powf(-1.0 / self.alpha)
            .clamp(self.eps, self.big_m)
    }

    /// `s_∞ = ê σ_ε^M` with an independent mean-one exponential `ê`.
    pub fn sample_s_infinity<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let e: f64 = Exp1.sample(rng);
        e * self.sample_sigma(rng)
    }

    /// `E[σ_ε^M] = E[s_∞]`.
    pub fn mean_sigma(&self) -> f64 {
        let a = self.alpha;
        a / (self.mass() * (1.0 - a)) * (self.big_m.powf(1.0 - a) - self.eps.powf(1.0 - a))
    }

    /// Density of the truncated Lévy measure,
    /// `∫_ε^M α z^{-α-2} e^{-v/z} dz`, in closed form through the
    /// regularized lower incomplete gamma function.
    pub fn levy_density(&self, v: f64) -> f64 {
        let a = self.alpha;
        if v <= 0.0 {
            return f64::NAN;
        }
        // substitute w = v/z: ∫ α v^{-α-1} w^α e^{-w} dw over [v/M, v/ε]
        a * v.powf(-a - 1.0)
            * gamma(a + 1.0)
            * (gamma_lr(a + 1.0, v / self.eps) - gamma_lr(a + 1.0, v / self.big_m))
    }

    /// Density of `s_∞`, i.e. the Lévy density divided by `p_ε^M`.
    pub fn s_infinity_density(&self, v: f64) -> f64 {
        self.levy_density(v) / self.mass()
    }

    /// `ψ_ε^M(λ) = ∫ (1 - e^{-λv}) ν_ε^M(dv)`.
    ///
    /// The `v`-integral is done in closed form, leaving
    /// `∫_ε^M α λ z^{-α} / (1 + λ z) dz`, integrated adaptively in `log z`.
    pub fn laplace_exponent(&self, lambda: f64) -> f64 {
        assert!(lambda >= 0.0, "laplace exponent needs lambda >= 0");
        if lambda == 0.0 {
            return 0.0;
        }
        let a = self.alpha;
        let integrand = |y: f64| {
            let z = y.exp();
            a * lambda * z.powf(1.0 - a) / (1.0 + lambda * z)
        };
        let lo = self.eps.ln();
        let hi = self.big_m.ln();
        // split at the bend z = 1/λ when it falls inside
        let bend = (-lambda.ln()).clamp(lo, hi);
        let (v1, _) = integrate(integrand, lo, bend, 0.0, 1e-13);
        let (v2, _) = integrate(integrand, bend, hi, 0.0, 1e-13);
        v1 + v2
    }

    /// `E[exp(-λ Y(u))] = exp(-u ψ_ε^M(λ))` for the compound-Poisson
    /// subordinator at time `u`.
    pub fn laplace_transform(&self, lambda: f64, u: f64) -> f64 {
        (-u * self.laplace_exponent(lambda)).exp()
    }

    /// Fraction of `reps` compound-Poisson paths (jump law `s_∞`) whose range
    /// misses `[a, b]`.
    ///
    /// The range is the set of partial sums, which does not depend on the
    /// Poisson jump epochs, so each path is generated jump by jump until the
    /// first partial sum reaches `a`.
    pub fn range_avoidance(&self, a: f64, b: f64, reps: u64, key: u64) -> Result<Proportion> {
        if !(a > 0.0 && b >= a) {
            return Err(Error::Parameter(format!(
                "range avoidance needs 0 < a <= b, got [{a}, {b}]"
            )));
        }
        let blocks = map_blocks(key, reps, |rng, range| {
            let mut hits = 0u64;
            for _ in range {
                let mut y = 0.0;
                loop {
                    y += self.sample_s_infinity(rng);
                    if y >= a {
                        if y > b {
                            hits += 1;
                        }
                        break;
                    }
                }
            }
            hits
        });
        Ok(Proportion::new(blocks.into_iter().sum(), reps))
    }
}
