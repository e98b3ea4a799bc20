//! Closed-form quantities for supercritical `G(n, λ/n)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bisection stops once the bracket is narrower than this.
const BISECTION_WIDTH: f64 = 1e-14;
const NEWTON_STEPS: usize = 5;

/// The experiment triple `(n, λ, p)` with `p = λ / n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub n: usize,
    pub lambda: f64,
    pub p: f64,
}

impl Params {
    /// Supercritical parameters, `p = λ / n`.
    pub fn new(n: usize, lambda: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain(format!("n must be at least 2, got {n}")));
        }
        check_supercritical(lambda)?;
        let p = lambda / n as f64;
        if p > 1.0 {
            return Err(Error::domain(format!(
                "lambda = {lambda} exceeds n = {n}, so p = lambda/n > 1"
            )));
        }
        Ok(Params { n, lambda, p })
    }

    /// Parameters with an explicit edge probability.
    ///
    /// Unlike [`Params::new`] this accepts any `p` in `[0, 1]`, including the
    /// degenerate `p = 0` and `p = 1`; `lambda` is set to `n p`. Theory values
    /// are only available when the result is supercritical.
    pub fn with_p(n: usize, p: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::domain("n must be positive"));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain(format!("p must lie in [0, 1], got {p}")));
        }
        Ok(Params {
            n,
            lambda: n as f64 * p,
            p,
        })
    }

    /// `ε = λ - 1`.
    pub fn epsilon(&self) -> f64 {
        self.lambda - 1.0
    }
}

fn check_supercritical(lambda: f64) -> Result<()> {
    if !lambda.is_finite() {
        return Err(Error::domain(format!("lambda must be finite, got {lambda}")));
    }
    if lambda <= 1.0 {
        return Err(Error::domain(format!(
            "lambda must exceed 1 (supercritical regime), got {lambda}"
        )));
    }
    Ok(())
}

/// `g(ρ) = 1 - ρ - e^{-λρ}`, evaluated without cancellation near `ρ = 0`.
fn survival_residual(lambda: f64, rho: f64) -> f64 {
    -rho - (-lambda * rho).exp_m1()
}

/// Survival probability of a Poisson(λ) Galton–Watson process: the unique
/// root of `1 - ρ = e^{-λρ}` in `(0, 1]`.
///
/// Bisection narrows the bracket to `1e-14`, then a few guarded Newton steps
/// polish the last bits. For very large `λ` the root is within one ulp of 1
/// and may be returned as exactly `1.0`.
pub fn solve_rho(lambda: f64) -> Result<f64> {
    check_supercritical(lambda)?;

    // g > 0 just above zero (g'(0) = λ - 1 > 0) and g(1) = -e^{-λ} <= 0.
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    while hi - lo > BISECTION_WIDTH {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if survival_residual(lambda, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let mut rho = 0.5 * (lo + hi);
    if rho == 0.0 {
        rho = hi;
    }
    let mut best = survival_residual(lambda, rho).abs();
    for _ in 0..NEWTON_STEPS {
        let slope = -1.0 + lambda * (-lambda * rho).exp();
        if slope == 0.0 || !slope.is_finite() {
            break;
        }
        let next = rho - survival_residual(lambda, rho) / slope;
        if !(next > 0.0 && next <= 1.0) {
            break;
        }
        let r = survival_residual(lambda, next).abs();
        if r >= best {
            break;
        }
        rho = next;
        best = r;
    }
    Ok(rho)
}

/// Dual parameter `λ* = λ (1 - ρ)`, which satisfies `λ* e^{-λ*} = λ e^{-λ}`.
pub fn dual_lambda(lambda: f64, rho: f64) -> Result<f64> {
    check_supercritical(lambda)?;
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::domain(format!("rho must lie in (0, 1], got {rho}")));
    }
    Ok(lambda * (1.0 - rho))
}

/// Limiting variance of the giant component, `ρ(1-ρ) n / (1-λ*)²`.
pub fn sigma2(lambda: f64, n: usize) -> Result<f64> {
    let rho = solve_rho(lambda)?;
    let lambda_star = dual_lambda(lambda, rho)?;
    Ok(variance_formula(rho, lambda_star, n))
}

fn variance_formula(rho: f64, lambda_star: f64, n: usize) -> f64 {
    rho * (1.0 - rho) * n as f64 / ((1.0 - lambda_star) * (1.0 - lambda_star))
}

/// Derived constants for one parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryValues {
    pub rho: f64,
    pub lambda_star: f64,
    pub sigma2: f64,
    /// Zero of the idealized trajectory, `ρ n`. Kept real-valued.
    pub t1: f64,
    /// Slope magnitude at the crossing, `a = 1 - λ*`.
    pub a: f64,
}

impl TheoryValues {
    pub fn new(params: &Params) -> Result<Self> {
        let rho = solve_rho(params.lambda)?;
        let lambda_star = dual_lambda(params.lambda, rho)?;
        Ok(TheoryValues {
            rho,
            lambda_star,
            sigma2: variance_formula(rho, lambda_star, params.n),
            t1: rho * params.n as f64,
            a: 1.0 - lambda_star,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    /// Limit of the summed conditional variances of the rescaled increments
    /// up to `t₁`, `n ρ / (1 - ρ)`.
    pub fn condvar_limit(&self, n: usize) -> f64 {
        n as f64 * self.rho / (1.0 - self.rho)
    }
}

/// Round a real time to a step index, ties to even.
pub fn step_index(t: f64) -> usize {
    let r = t.round_ties_even();
    if r <= 0.0 {
        0
    } else {
        r as usize
    }
}

/// Concrete choices for the localization diagnostics.
///
/// `ω = (ε³ n)^{1/7}` grows without bound while `ω⁶ = o(ε³ n)`;
/// `σ₀ = √(ε n)` and `t₀ = ω σ₀ / ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticWindow {
    pub epsilon: f64,
    pub omega: f64,
    pub sigma0: f64,
    /// `t₀` rounded to a step index and clamped to `n`.
    pub t0: usize,
    /// `t₁ = ρ n` rounded to a step index and clamped to `n`.
    pub t1: usize,
}

impl DiagnosticWindow {
    pub fn new(params: &Params, theory: &TheoryValues) -> Self {
        let n = params.n as f64;
        let epsilon = params.epsilon();
        let omega = (epsilon.powi(3) * n).powf(1.0 / 7.0);
        let sigma0 = (epsilon * n).sqrt();
        let t0 = step_index(omega * sigma0 / epsilon).min(params.n);
        let t1 = step_index(theory.t1).min(params.n);
        DiagnosticWindow {
            epsilon,
            omega,
            sigma0,
            t0,
            t1,
        }
    }

    /// Threshold `σ₀ / ω` on the number of components finished by `t₀`.
    pub fn z_bound(&self) -> f64 {
        self.sigma0 / self.omega
    }
}

/// Idealized trajectory `f(t) = n - t - n e^{-pt}` and its derivative
/// `f'(t) = -1 + n p e^{-pt}`.
pub fn trajectory_f(params: &Params, t: f64) -> Result<(f64, f64)> {
    let n = params.n as f64;
    if !(0.0..=n).contains(&t) {
        return Err(Error::domain(format!("t = {t} outside [0, {n}]")));
    }
    let decay = (-params.p * t).exp();
    Ok((n - t - n * decay, -1.0 + n * params.p * decay))
}

/// Discrete trajectory `x_t = n - t - n (1-p)^t`.
pub fn trajectory_x(params: &Params, t: usize) -> Result<f64> {
    if t > params.n {
        return Err(Error::domain(format!("t = {t} exceeds n = {}", params.n)));
    }
    let n = params.n as f64;
    Ok(n - t as f64 - n * (1.0 - params.p).powf(t as f64))
}
