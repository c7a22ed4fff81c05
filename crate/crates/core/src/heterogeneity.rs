//! Heterogeneity index for two environment types and the associated
//! false-acceptance bounds. These are diagnostics: the finite-`E` bound is
//! loose and frequently vacuous.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subset::Subset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeterogeneityInput {
    /// Coefficients in type-1 environments, indexed by covariate.
    pub beta1: Vec<f64>,
    /// Coefficients in type-2 environments.
    pub beta2: Vec<f64>,
    /// Covariate standard deviations in type-1 environments.
    pub sigma_v: Vec<f64>,
    /// Covariate standard deviations in type-2 environments.
    pub sigma_w: Vec<f64>,
    /// Target noise standard deviation.
    pub sigma_y: f64,
    /// Omitted parents `U = S* \ S`.
    pub omitted: Subset,
}

/// `min(ρ₁/ρ₂, ρ₂/ρ₁)` with `ρᵢ = Σ_{u∈U} (βⁱ_u σⁱ_u)² + σ_Y²`.
pub fn heterogeneity_index(input: &HeterogeneityInput) -> Result<f64> {
    if !(input.sigma_y.is_finite() && input.sigma_y > 0.0) {
        return Err(Error::invalid(format!(
            "target noise std must be positive, got {}",
            input.sigma_y
        )));
    }
    let d = input.beta1.len();
    if input.beta2.len() != d || input.sigma_v.len() != d || input.sigma_w.len() != d {
        return Err(Error::shape("coefficient and std vectors must share a length"));
    }
    if input.omitted.span() > d {
        return Err(Error::invalid("omitted set references unknown covariates"));
    }
    if input
        .sigma_v
        .iter()
        .chain(&input.sigma_w)
        .any(|s| !(s.is_finite() && *s > 0.0))
    {
        return Err(Error::invalid("covariate standard deviations must be positive"));
    }
    let noise = input.sigma_y * input.sigma_y;
    let rho = |beta: &[f64], sigma: &[f64]| -> f64 {
        input
            .omitted
            .iter()
            .map(|u| (beta[u] * sigma[u]).powi(2))
            .sum::<f64>()
            + noise
    };
    let rho1 = rho(&input.beta1, &input.sigma_v);
    let rho2 = rho(&input.beta2, &input.sigma_w);
    Ok((rho1 / rho2).min(rho2 / rho1))
}

fn check_index(i_s: f64) -> Result<()> {
    if i_s.is_finite() && i_s > 0.0 && i_s <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("heterogeneity index must lie in (0, 1], got {i_s}")))
    }
}

/// `(4E/α)·[(c⁻¹e^{1−c⁻¹})^{k/2} + (c e^{1−c})^{k/2}]` with `c = I_S^{1/4}`,
/// clamped to 1. Returns 1 for `I_S = 1`, where the bound is vacuous.
pub fn power_bound(i_s: f64, k: usize, num_envs: usize, alpha: f64) -> Result<f64> {
    check_index(i_s)?;
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
    }
    if i_s == 1.0 {
        return Ok(1.0);
    }
    let c = i_s.powf(0.25);
    let half_k = k as f64 / 2.0;
    // ln(x e^{1−x}) = ln x + 1 − x, evaluated in log space to avoid underflow.
    let log_term = |x: f64| half_k * (x.ln() + 1.0 - x);
    let sum = log_term(1.0 / c).exp() + log_term(c).exp();
    Ok((4.0 * num_envs as f64 / alpha * sum).min(1.0))
}

/// Bounds on the limiting false-acceptance probability as `E → ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitBounds {
    pub lower: f64,
    pub upper: f64,
}

/// Upper bound `(1/α)·2q/(2q+1)` and, when `α < q/(q+1)`, lower bound
/// `(q/(q+1) − α)/(1 − α)`, where `q = I_S^{k/2}`.
pub fn infinite_env_limit(i_s: f64, k: usize, alpha: f64) -> Result<LimitBounds> {
    check_index(i_s)?;
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let q = i_s.powf(k as f64 / 2.0);
    let upper = 2.0 * q / (2.0 * q + 1.0) / alpha;
    let threshold = q / (q + 1.0);
    let lower = if alpha < threshold {
        (threshold - alpha) / (1.0 - alpha)
    } else {
        0.0
    };
    Ok(LimitBounds { lower, upper })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn input(beta1: f64, beta2: f64, sv: f64, sw: f64, omitted: &[usize]) -> HeterogeneityInput {
        HeterogeneityInput {
            beta1: vec![beta1, 0.5],
            beta2: vec![beta2, 0.5],
            sigma_v: vec![sv, 1.0],
            sigma_w: vec![sw, 1.0],
            sigma_y: 1.0,
            omitted: omitted.iter().copied().collect(),
        }
    }

    #[test]
    fn index_examples() {
        assert_eq!(heterogeneity_index(&input(2.0, 2.0, 3.0, 3.0, &[0, 1])).unwrap(), 1.0);
        assert_eq!(heterogeneity_index(&input(2.0, -2.0, 3.0, 3.0, &[0])).unwrap(), 1.0);
        assert_eq!(heterogeneity_index(&input(7.0, 1.0, 3.0, 1.0, &[])).unwrap(), 1.0);
        // (2²+1)/(1²+1) = 5/2, so the index is 2/5.
        assert_relative_eq!(heterogeneity_index(&input(2.0, 1.0, 1.0, 1.0, &[0])).unwrap(), 0.4);
        let mut bad = input(1.0, 1.0, 1.0, 1.0, &[0]);
        bad.sigma_y = 0.0;
        assert!(heterogeneity_index(&bad).is_err());
    }

    #[test]
    fn power_bound_limits_and_monotonicity() {
        assert_eq!(power_bound(1.0, 10, 30, 0.1).unwrap(), 1.0);
        assert_eq!(power_bound(0.999_999, 10, 2, 0.1).unwrap(), 1.0);
        let mut prev = f64::INFINITY;
        for k in 1..400 {
            let b = power_bound(0.05, k, 2, 0.1).unwrap();
            assert!(b <= prev);
            prev = b;
        }
        assert!(prev < 1e-10);
        assert!(power_bound(0.0, 1, 1, 0.1).is_err());
        assert!(power_bound(0.5, 0, 1, 0.1).is_err());
    }

    #[test]
    fn power_bound_matches_high_precision_value() {
        // 50-digit evaluation of the closed form at I=0.4, k=48:
        // t₁ + t₂ = 1.06381216208029260684..., so with E=30, α=0.1 the
        // prefactor 1200 gives 1276.57... and the bound clamps to 1.
        assert_eq!(power_bound(0.4, 48, 30, 0.1).unwrap(), 1.0);
        // E=1, α=8 makes the prefactor 1/2.
        assert_relative_eq!(
            power_bound(0.4, 48, 1, 8.0).unwrap(),
            0.531_906_081_040_146_303_4,
            max_relative = 1e-12
        );
        // I = 2/101, E = 2, α = 0.1: 0.388614020280727808... at k = 30 and
        // 0.0110183521242292601... at k = 50.
        let i = 2.0 / 101.0;
        assert_relative_eq!(power_bound(i, 30, 2, 0.1).unwrap(), 0.388_614_020_280_727_8, max_relative = 1e-10);
        assert_relative_eq!(power_bound(i, 50, 2, 0.1).unwrap(), 0.011_018_352_124_229_26, max_relative = 1e-10);
    }

    #[test]
    fn infinite_env_examples() {
        let b = infinite_env_limit(1.0, 7, 0.1).unwrap();
        assert_relative_eq!(b.upper, (2.0 / 3.0) / 0.1);
        assert_relative_eq!(b.lower, (0.5 - 0.1) / 0.9);
        let far = infinite_env_limit(0.5, 400, 0.1).unwrap();
        assert!(far.upper < 1e-30);
        assert_eq!(far.lower, 0.0);
    }

    #[test]
    fn infinite_env_matches_high_precision_value() {
        // I=0.25, k=8: q = 2^-8, q/(q+1) = 1/257 < α = 0.01, so only the
        // upper bound 100·(2/256)/(2/256 + 1) = 0.77519379844961240310... applies.
        let b = infinite_env_limit(0.25, 8, 0.01).unwrap();
        assert_relative_eq!(b.upper, 0.775_193_798_449_612_4, max_relative = 1e-14);
        assert_eq!(b.lower, 0.0);
        let b = infinite_env_limit(0.25, 8, 0.001).unwrap();
        assert_relative_eq!(b.lower, 0.002_893_944_528_185_773, max_relative = 1e-12);
    }
}
