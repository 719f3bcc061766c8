//! Closed-form bounds on the gain of oracle policies over uniform allocation.
//!
//! Notation: `r0(t) = sigma^2 Q / (sigma0^2 Lambda_bar(t))`, `r+ = sigma^2 Q / (Delta^2 Lambda)`,
//! `q+ = (1 + G) r+`, `e(pi0, G) = sqrt(G pi0 / (1 - pi0)) - 1` and
//! `D = sqrt(pi0) + sqrt(G (1 - pi0))`. Expressions of the form `(sqrt(1 + 4x) - 1) / (2r)` are
//! evaluated as `2x / (r (sqrt(1 + 4x) + 1))` to avoid cancellation at small `x`.

use serde::{Deserialize, Serialize};

use crate::model::ModelParams;
use crate::{Error, Real, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs<T> {
    pub p0: T,
    pub num_cells: usize,
    pub noise_var: T,
    pub prior_var: T,
    pub walk_var: T,
    pub stay_prob: T,
    pub neighbor_count: usize,
    /// Constant per-stage budget `Lambda`.
    pub budget: T,
    pub gamma: Vec<T>,
}

impl<T: Real> BoundInputs<T> {
    pub fn from_params(params: &ModelParams<T>) -> Self {
        Self {
            p0: params.prior_prob,
            num_cells: params.num_cells,
            noise_var: params.noise_var,
            prior_var: params.prior_var(),
            walk_var: params.walk_var(),
            stay_prob: params.stay_prob,
            neighbor_count: params.neighbor_count,
            budget: params.budgets[0],
            gamma: params.stage_weights.clone(),
        }
    }

    pub fn horizon(&self) -> usize {
        self.gamma.len()
    }

    fn q(&self) -> T {
        T::from_usize_lossy(self.num_cells)
    }

    fn g(&self) -> T {
        T::from_usize_lossy(self.neighbor_count)
    }

    /// `Lambda_bar(t) = Lambda t`.
    pub fn cumulative_budget(&self, t: usize) -> T {
        self.budget * T::from_usize_lossy(t)
    }

    pub fn r0(&self, t: usize) -> T {
        self.noise_var * self.q() / (self.prior_var * self.cumulative_budget(t))
    }

    pub fn r_plus(&self) -> T {
        self.noise_var * self.q() / (self.walk_var * self.budget)
    }

    pub fn q_plus(&self) -> T {
        (T::one() + self.g()) * self.r_plus()
    }

    /// `e(pi0, G)`; infinite at `pi0 = 1`.
    pub fn e(&self) -> T {
        if self.stay_prob >= T::one() {
            return T::infinity();
        }
        let e = (self.g() * self.stay_prob / (T::one() - self.stay_prob)).sqrt() - T::one();
        // Snap rounding noise at the equality case pi0 = (1 - pi0) / G.
        if e.abs() <= T::epsilon() * T::lit(16.0) {
            T::zero()
        } else {
            e
        }
    }

    /// `c_crit = Lambda / (|Psi(1)| e)`.
    pub fn c_crit(&self, num_targets: usize) -> T {
        let e = self.e();
        if e.is_infinite() {
            return T::zero();
        }
        self.budget / (T::from_usize_lossy(num_targets) * e)
    }

    /// `pi0 >= (1 - pi0) / G`.
    pub fn stay_assumption_holds(&self) -> bool {
        self.e() >= T::zero()
    }

    /// `sqrt(pi0) + sqrt(G (1 - pi0))`.
    pub fn spread_factor(&self) -> T {
        self.stay_prob.sqrt() + (self.g() * (T::one() - self.stay_prob)).sqrt()
    }

    /// `1 / (p0 + (1 - p0) / Q)`.
    pub fn sparsity_gain(&self) -> T {
        T::one() / (self.p0 + (T::one() - self.p0) / self.q())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gain<T> {
    pub ratio: T,
    pub db: T,
}

/// `Gamma = J_uniform / J_policy`.
pub fn gain<T: Real>(policy_cost: T, uniform_cost: T) -> Result<Gain<T>> {
    if !(policy_cost > T::zero()) || !(uniform_cost > T::zero()) {
        return Err(Error::Numeric("gain needs positive costs".into()));
    }
    let ratio = uniform_cost / policy_cost;
    Ok(Gain {
        ratio,
        db: T::lit(10.0) * ratio.log10(),
    })
}

/// `sum_{i in Psi} 1/(c_i + lambda_i)` for the uniform policy with static targets:
/// `Q |Psi| / (Q sigma^2 / sigma0^2 + Lambda_bar(t))`, averaged over `|Psi| ~ Bin(Q, p0)`.
pub fn uniform_static_cost<T: Real>(inputs: &BoundInputs<T>, t: usize) -> T {
    let q = inputs.q();
    inputs.p0 * q * q / (q * inputs.noise_var / inputs.prior_var + inputs.cumulative_budget(t))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmniscientStatic<T> {
    pub value: T,
    pub limit: T,
}

/// Static-target bound on the omniscient gain.
pub fn bound_omniscient_static<T: Real>(inputs: &BoundInputs<T>) -> OmniscientStatic<T> {
    let one = T::one();
    let (p0, q) = (inputs.p0, inputs.q());
    let mut num = T::zero();
    let mut den = T::zero();
    for (k, g) in inputs.gamma.iter().enumerate() {
        if *g == T::zero() {
            continue;
        }
        let t = k + 1;
        let w = *g / inputs.cumulative_budget(t);
        let r = inputs.r0(t);
        let a = one + p0 * r;
        num += w / (one + r);
        den += w
            * (p0 / a + (one - p0) / q / a.powi(3)
                - (one - p0) * (one - p0 - p0) / (q * q) * r / a.powi(4));
    }
    OmniscientStatic {
        value: num / den,
        limit: inputs.sparsity_gain(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Low,
    High,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CbarTrace<T> {
    /// `c_bar(1..=t_max)`.
    pub values: Vec<T>,
    /// Regime used to produce `values[k + 1]` from `values[k]`.
    pub regimes: Vec<Regime>,
    pub c_crit: T,
    /// False when `pi0 < (1 - pi0) / G`; values are still computed.
    pub stay_assumption_holds: bool,
}

/// Upper bound on the expected semi-omniscient precision in the vicinity of targets.
///
/// Low regime: `k ((1 + G) c + Lambda/n)` with
/// `k = (pi0^{3/2} + (1 - pi0)^{3/2} / sqrt(G)) / D`. High regime: `c + pi0 Lambda / n` when
/// `Delta^2 = 0`, otherwise the saturating form with `a = sigma^2 / Delta^2`.
pub fn cbar_recursion<T: Real>(inputs: &BoundInputs<T>, num_targets: usize, t_max: usize) -> Result<CbarTrace<T>> {
    if num_targets == 0 {
        return Err(Error::Contract("c_bar needs at least one target".into()));
    }
    let one = T::one();
    let pi0 = inputs.stay_prob;
    let g = inputs.g();
    let per_target = inputs.budget / T::from_usize_lossy(num_targets);
    let low_coef = (pi0.powf(T::lit(1.5)) + (one - pi0).powf(T::lit(1.5)) / g.sqrt()) / inputs.spread_factor();
    let c_crit = inputs.c_crit(num_targets);
    let a = inputs.noise_var / inputs.walk_var;

    let mut values = Vec::with_capacity(t_max);
    let mut regimes = Vec::with_capacity(t_max.saturating_sub(1));
    if t_max == 0 {
        return Ok(CbarTrace { values, regimes, c_crit, stay_assumption_holds: inputs.stay_assumption_holds() });
    }
    let mut c = inputs.noise_var / inputs.prior_var;
    values.push(c);
    for _ in 1..t_max {
        if c < c_crit {
            regimes.push(Regime::Low);
            c = low_coef * ((one + g) * c + per_target);
        } else {
            regimes.push(Regime::High);
            c = if inputs.walk_var > T::zero() {
                pi0 * a * (c + per_target) / (a + c + per_target) + (one - pi0) * a * c / (a + c)
            } else {
                c + pi0 * per_target
            };
        }
        values.push(c);
    }
    Ok(CbarTrace {
        values,
        regimes,
        c_crit,
        stay_assumption_holds: inputs.stay_assumption_holds(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemiStatic<T> {
    /// Leading term of the per-stage cost lower bound `p0 Q (p0 Q + 1 - p0) / (pi0 Lambda t)`.
    pub cost_lower_bound: T,
    /// `pi0 / (p0 + (1 - p0) / Q)`.
    pub asymptotic_gain: T,
}

pub fn bound_semi_static<T: Real>(inputs: &BoundInputs<T>, t: usize) -> SemiStatic<T> {
    let pq = inputs.p0 * inputs.q();
    SemiStatic {
        cost_lower_bound: pq * (pq + T::one() - inputs.p0) / (inputs.stay_prob * inputs.cumulative_budget(t)),
        asymptotic_gain: inputs.stay_prob * inputs.sparsity_gain(),
    }
}

/// Fixed point of `v -> sigma^2 v / (sigma^2 + lambda v) + Delta^2`:
/// `Delta^2 / 2 (1 + sqrt(1 + 4 sigma^2 / (Delta^2 lambda)))`.
pub fn steady_state_variance<T: Real>(walk_var: T, noise_var: T, lambda: T) -> Result<T> {
    if !(lambda > T::zero()) {
        return Err(Error::Numeric("steady-state variance is unbounded without effort".into()));
    }
    if !(walk_var > T::zero()) {
        return Err(Error::Contract("steady-state variance needs a positive walk variance".into()));
    }
    let half = T::lit(0.5);
    let four = T::lit(4.0);
    Ok(half * walk_var * (T::one() + (T::one() + four * noise_var / (walk_var * lambda)).sqrt()))
}

/// `(sqrt(1 + 4x) - 1) / 2`, cancellation-free.
fn half_root_excess<T: Real>(x: T) -> T {
    let two = T::lit(2.0);
    two * x / ((T::one() + T::lit(4.0) * x).sqrt() + T::one())
}

/// Uniform-policy steady-state per-stage cost `(Delta^2 p0 Q / 2 sigma^2)(sqrt(1 + 4 r+) - 1)`.
pub fn uniform_steady_cost<T: Real>(inputs: &BoundInputs<T>) -> T {
    inputs.walk_var * inputs.p0 * inputs.q() / inputs.noise_var * half_root_excess(inputs.r_plus())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmniscientDynamic<T> {
    pub value: T,
    /// `r+ -> 0` limit, `1 / (p0 + (1 - p0) / Q)`.
    pub small_r_limit: T,
}

/// Steady-state bound on the omniscient gain with drifting amplitudes.
pub fn bound_omniscient_dynamic<T: Real>(inputs: &BoundInputs<T>) -> OmniscientDynamic<T> {
    let one = T::one();
    let (p0, q, r) = (inputs.p0, inputs.q(), inputs.r_plus());
    let four = T::lit(4.0);
    let b = one + four * p0 * r;
    let num = half_root_excess(r) / r;
    let den = half_root_excess(p0 * r) / r + (one - p0) / q * (one + T::lit(3.0) * p0 * r) / b.powf(T::lit(1.5))
        - (one - p0) * (one - p0 - p0) / (q * q) * r * (one + T::lit(2.0) * p0 * r) / b.powf(T::lit(2.5));
    OmniscientDynamic {
        value: num / den,
        small_r_limit: inputs.sparsity_gain(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemiDynamic<T> {
    pub value: T,
    /// `r+ (e + 1) <= 1`.
    pub condition_satisfied: bool,
    /// `D^{-2}`.
    pub degradation_factor: T,
}

pub fn bound_semi_dynamic<T: Real>(inputs: &BoundInputs<T>) -> SemiDynamic<T> {
    let one = T::one();
    let (p0, q, r, qp) = (inputs.p0, inputs.q(), inputs.r_plus(), inputs.q_plus());
    let d2 = inputs.spread_factor().powi(2);
    let a = one + p0 * qp;
    let num = half_root_excess(r) / (r * d2);
    let den = p0 / a + (one - p0) / q / a.powi(3) - qp * (one - p0) * (one - p0 - p0) / (q * q) / a.powi(4);
    let e = inputs.e();
    SemiDynamic {
        value: num / den,
        condition_satisfied: if e.is_infinite() { r == T::zero() } else { r * (e + one) <= one },
        degradation_factor: one / d2,
    }
}

/// Positive root `x = 1 / c_bar_ss` of `pi0 x^3 - a1 (a1 + a2) x - a1^2 a2 = 0`,
/// `a1 = Delta^2 / sigma^2`, `a2 = |Psi(1)| / Lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicRoot<T> {
    pub bisection: T,
    pub trigonometric: T,
    /// `|f(x)| / (pi0 x^3 + a1 (a1 + a2) x + a1^2 a2)` at the bisection root.
    pub relative_residual: T,
    /// Discriminant of the cubic in `x`.
    pub discriminant: T,
}

pub fn cbar_steady_state_root<T: Real>(inputs: &BoundInputs<T>, num_targets: T) -> Result<CubicRoot<T>> {
    let pi0 = inputs.stay_prob;
    if !(pi0 > T::zero()) || !(inputs.walk_var > T::zero()) || !(num_targets > T::zero()) {
        return Err(Error::Contract("cubic needs pi0 > 0, Delta^2 > 0 and targets".into()));
    }
    let a1 = inputs.walk_var / inputs.noise_var;
    let a2 = num_targets / inputs.budget;
    let b = a1 * (a1 + a2);
    let c = a1 * a1 * a2;
    let f = |x: T| pi0 * x * x * x - b * x - c;

    let mut hi = T::one();
    while f(hi) <= T::zero() {
        hi = hi + hi;
    }
    let mut lo = T::zero();
    for _ in 0..400 {
        let mid = (lo + hi) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > T::zero() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let x = if f(lo).abs() <= f(hi).abs() { lo } else { hi };

    let three = T::lit(3.0);
    let arg = (three * (three * pi0).sqrt() / T::lit(2.0)) * (a2 / (a1 + a2)) * (a1 / (a1 + a2)).sqrt();
    let trig = T::lit(2.0) * (b / (three * pi0)).sqrt() * (arg.min(T::one()).acos() / three).cos();

    let scale = pi0 * x * x * x + b * x + c;
    let four = T::lit(4.0);
    let discriminant = pi0
        * a1.powi(3)
        * (four * a1.powi(3) + T::lit(12.0) * a1 * a1 * a2 + (T::lit(12.0) - T::lit(27.0) * pi0) * a1 * a2 * a2
            + four * a2.powi(3));
    Ok(CubicRoot {
        bisection: x,
        trigonometric: trig,
        relative_residual: f(x).abs() / scale,
        discriminant,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemiSmall<T> {
    /// `sqrt(pi0 / p0)`.
    pub value: T,
    /// `sqrt(pi0 sigma^2 / (Delta^2 Lambda)) e >= 1`.
    pub condition_satisfied: bool,
    /// `sqrt(Delta^2 Lambda / sigma^2)`, assumed small.
    pub small_parameter: T,
    /// Steady-state root at the expected target count `p0 Q`.
    pub root: Option<CubicRoot<T>>,
}

pub fn bound_semi_small<T: Real>(inputs: &BoundInputs<T>) -> SemiSmall<T> {
    let pi0 = inputs.stay_prob;
    let ratio = inputs.noise_var / (inputs.walk_var * inputs.budget);
    let e = inputs.e();
    let lhs = (pi0 * ratio).sqrt() * e;
    SemiSmall {
        value: (pi0 / inputs.p0).sqrt(),
        condition_satisfied: lhs >= T::one(),
        small_parameter: (inputs.walk_var * inputs.budget / inputs.noise_var).sqrt(),
        root: cbar_steady_state_root(inputs, inputs.p0 * inputs.q()).ok(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Combined<T> {
    pub value: T,
    pub omniscient: T,
    pub semi: T,
    /// Sufficient condition of the semi-omniscient large-`r+` bound.
    pub semi_condition: bool,
    /// Sufficient condition of the semi-omniscient small-`r+` bound.
    pub semi_small_condition: bool,
}

/// `min(omniscient dynamic, semi-omniscient dynamic)`.
pub fn combined_bound<T: Real>(inputs: &BoundInputs<T>) -> Combined<T> {
    let o = bound_omniscient_dynamic(inputs).value;
    let s = bound_semi_dynamic(inputs);
    Combined {
        value: o.min(s.value),
        omniscient: o,
        semi: s.value,
        semi_condition: s.condition_satisfied,
        semi_small_condition: bound_semi_small(inputs).condition_satisfied,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_one() -> BoundInputs<f64> {
        BoundInputs::from_params(&ModelParams::table_one(20, 10_000.0))
    }

    #[test]
    fn gain_examples() {
        assert_eq!(gain(1.0, 1.0).unwrap().ratio, 1.0);
        let g = gain(1.0f64, 2.0).unwrap();
        assert!((g.db - 3.0103).abs() < 1e-4);
        assert_eq!(gain(0.5, 5.0).unwrap().ratio, 10.0);
        assert!(gain(0.0, 1.0).is_err());
    }

    #[test]
    fn sparsity_limits() {
        let b = table_one();
        assert!((bound_omniscient_static(&b).limit - 1.0 / 0.01099).abs() < 1e-9);
        assert!((bound_semi_static(&b, 5).asymptotic_gain - 30.3306).abs() < 1e-3);
    }

    #[test]
    fn equality_case_low_coefficient() {
        let mut b = table_one();
        b.walk_var = 0.0;
        let tr = cbar_recursion(&b, 10, 5).unwrap();
        assert!(tr.c_crit.is_infinite() && tr.stay_assumption_holds);
        for w in tr.values.windows(2) {
            assert!((w[1] - w[0] - b.budget / 30.0).abs() < 1e-9 * w[1], "{:?} {:?}", tr, b.e());
        }
    }

    #[test]
    fn steady_state_table_value() {
        let v = steady_state_variance(1.0 / 400.0, 1.0, 10.0).unwrap();
        assert!((v - 0.00125 * (1.0 + 161f64.sqrt())).abs() < 1e-15);
        assert!(steady_state_variance(1.0 / 400.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn small_prop_value() {
        let b = table_one();
        assert!((bound_semi_small(&b).value - (100.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }
}
