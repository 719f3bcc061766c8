//! Per-stage effort allocators.
//!
//! The myopic allocator minimises `sum_i p_i / (c_i + lambda_i)` subject to
//! `sum_i lambda_i = Lambda`, `lambda >= 0`. Its solution is a water-filling over `sqrt(p_i)`:
//! with cells sorted by `sqrt(p_i) sigma_i^2` and
//!
//! ```text
//! g(k) = c_{k+1} / sqrt(p_{k+1}) * sum_{i<=k} sqrt(p_i) - sum_{i<=k} c_i,
//! ```
//!
//! the support is the first `k*` cells where `Lambda` lies in `(g(k*-1), g(k*)]`.

use crate::belief::BeliefState;
use crate::model::SceneState;
use crate::scalar::{compensated_sum, CompensatedSum};
use crate::{Error, Real, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Allocation<T> {
    pub stage: usize,
    pub lambda: Vec<T>,
    pub budget: T,
    pub support_size: usize,
}

impl<T: Real> Allocation<T> {
    /// Wraps an effort vector; the budget is its sum.
    pub fn from_lambda(stage: usize, lambda: Vec<T>) -> Self {
        let budget = compensated_sum(lambda.iter().copied());
        let support_size = lambda.iter().filter(|l| **l > T::zero()).count();
        Self {
            stage,
            lambda,
            budget,
            support_size,
        }
    }
}

/// Water-filling order `chi`: decreasing `sqrt(p) sigma^2`, ties by lower index.
pub fn water_filling_order<T: Real>(belief: &BeliefState<T>) -> Vec<usize> {
    let keys: Vec<T> = belief
        .probs
        .iter()
        .zip(&belief.vars)
        .map(|(p, v)| p.sqrt() * *v)
        .collect();
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[b].partial_cmp(&keys[a]).expect("finite keys").then(a.cmp(&b)));
    order
}

/// `g(0..=Q)` in water-filling order; `g(Q)` is `+inf`.
pub fn g_sequence<T: Real>(belief: &BeliefState<T>, noise_var: T) -> Vec<T> {
    let order = water_filling_order(belief);
    let q = order.len();
    let mut g = Vec::with_capacity(q + 1);
    g.push(T::zero());
    let mut s = CompensatedSum::new();
    let mut c = CompensatedSum::new();
    for k in 1..=q {
        let i = order[k - 1];
        s.add(belief.probs[i].sqrt());
        c.add(noise_var / belief.vars[i]);
        if k == q {
            g.push(T::infinity());
        } else {
            let next = order[k];
            let sp = belief.probs[next].sqrt();
            if sp > T::zero() {
                let ratio = noise_var / belief.vars[next] / sp;
                g.push(ratio * s.value() - c.value());
            } else {
                g.push(T::infinity());
            }
        }
    }
    g
}

fn check_belief<T: Real>(belief: &BeliefState<T>, budget: T) -> Result<()> {
    if !belief.is_finite() || belief.vars.iter().any(|v| !(*v > T::zero())) {
        return Err(Error::Contract("belief must be finite with positive variances".into()));
    }
    if !(budget > T::zero()) || !budget.is_finite() {
        return Err(Error::Contract("budget must be positive and finite".into()));
    }
    Ok(())
}

pub fn myopic_allocate<T: Real>(belief: &BeliefState<T>, budget: T, noise_var: T) -> Result<Allocation<T>> {
    check_belief(belief, budget)?;
    let order = water_filling_order(belief);
    let q = order.len();
    let sqrt_p: Vec<T> = order.iter().map(|&i| belief.probs[i].sqrt()).collect();
    let c: Vec<T> = order.iter().map(|&i| noise_var / belief.vars[i]).collect();

    let mut s = CompensatedSum::new();
    let mut cs = CompensatedSum::new();
    let mut k_star = q;
    for k in 1..=q {
        s.add(sqrt_p[k - 1]);
        cs.add(c[k - 1]);
        if k == q {
            break;
        }
        let g_k = if sqrt_p[k] > T::zero() {
            c[k] / sqrt_p[k] * s.value() - cs.value()
        } else {
            T::infinity()
        };
        if budget <= g_k {
            k_star = k;
            break;
        }
    }
    let (s_k, c_k) = (s.value(), cs.value());
    let level = (budget + c_k) / s_k;

    let mut lambda = vec![T::zero(); q];
    for k in 0..k_star {
        lambda[order[k]] = (level * sqrt_p[k] - c[k]).max(T::zero());
    }
    let support_size = lambda.iter().filter(|l| **l > T::zero()).count();
    Ok(Allocation {
        stage: belief.stage,
        lambda,
        budget,
        support_size,
    })
}

pub fn uniform_allocate<T: Real>(stage: usize, num_cells: usize, budget: T) -> Allocation<T> {
    Allocation {
        stage,
        lambda: vec![budget / T::from_usize_lossy(num_cells); num_cells],
        budget,
        support_size: num_cells,
    }
}

/// `kappa * Lambda / Q + (1 - kappa) * lambda_myopic`.
pub fn darap_allocate<T: Real>(belief: &BeliefState<T>, budget: T, kappa: T, noise_var: T) -> Result<Allocation<T>> {
    if !(kappa >= T::zero() && kappa <= T::one()) {
        return Err(Error::Contract(format!("kappa {kappa} outside [0, 1]")));
    }
    let myopic = myopic_allocate(belief, budget, noise_var)?;
    let u = budget / T::from_usize_lossy(belief.num_cells());
    let rest = T::one() - kappa;
    let lambda: Vec<T> = myopic.lambda.iter().map(|m| kappa * u + rest * *m).collect();
    let support_size = lambda.iter().filter(|l| **l > T::zero()).count();
    Ok(Allocation {
        stage: belief.stage,
        lambda,
        budget,
        support_size,
    })
}

/// Splits the budget evenly over the true targets; an empty scene falls back to uniform.
pub fn omniscient_allocate<T: Real>(scene: &SceneState<T>, budget: T) -> Allocation<T> {
    if scene.is_empty() {
        return uniform_allocate(scene.stage, scene.num_cells, budget);
    }
    let share = budget / T::from_usize_lossy(scene.len());
    let mut lambda = vec![T::zero(); scene.num_cells];
    for t in &scene.targets {
        lambda[t.cell] = share;
    }
    Allocation {
        stage: scene.stage,
        lambda,
        budget,
        support_size: scene.len(),
    }
}

/// Myopic rule applied to the semi-omniscient oracle belief.
pub fn semi_omniscient_allocate<T: Real>(
    oracle_belief: &BeliefState<T>,
    budget: T,
    noise_var: T,
) -> Result<Allocation<T>> {
    myopic_allocate(oracle_belief, budget, noise_var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::Flavor;

    pub(crate) fn belief(p: &[f64], c: &[f64]) -> BeliefState<f64> {
        BeliefState {
            stage: 1,
            probs: p.to_vec(),
            means: vec![1.0; p.len()],
            vars: c.iter().map(|c| 1.0 / c).collect(),
            flavor: Flavor::Predicted,
        }
    }

    #[test]
    fn symmetric_split() {
        let a = myopic_allocate(&belief(&[0.25, 0.25], &[2.0, 2.0]), 4.0, 1.0).unwrap();
        assert_eq!(a.lambda, vec![2.0, 2.0]);
    }

    #[test]
    fn support_grows_past_threshold() {
        let b = belief(&[0.64, 0.04], &[1.0, 1.0]);
        let g = g_sequence(&b, 1.0);
        assert!((g[1] - 3.0).abs() < 1e-14);
        let a = myopic_allocate(&b, 2.0, 1.0).unwrap();
        assert_eq!((a.lambda[0], a.lambda[1], a.support_size), (2.0, 0.0, 1));
        let a = myopic_allocate(&b, 3.0, 1.0).unwrap();
        assert_eq!(a.support_size, 1);
        let a = myopic_allocate(&b, 6.0, 1.0).unwrap();
        assert!((a.lambda[0] - 5.4).abs() < 1e-12 && (a.lambda[1] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn blend_endpoints() {
        let b = belief(&[0.64, 0.04, 0.3], &[1.0, 2.0, 0.5]);
        let m = myopic_allocate(&b, 2.0, 1.0).unwrap();
        assert_eq!(darap_allocate(&b, 2.0, 0.0, 1.0).unwrap().lambda, m.lambda);
        assert_eq!(darap_allocate(&b, 2.0, 1.0, 1.0).unwrap().lambda, uniform_allocate(1, 3, 2.0).lambda);
        assert!(darap_allocate(&b, 2.0, 1.5, 1.0).is_err());
    }

    #[test]
    fn blend_by_hand() {
        let b = belief(&[0.64, 0.04], &[1.0, 1.0]);
        let d = darap_allocate(&b, 2.0, 0.5, 1.0).unwrap();
        assert_eq!(d.lambda, vec![1.5, 0.5]);
    }

    #[test]
    fn uniform_cases() {
        let a = uniform_allocate(1, 1000, 10000.0);
        assert!(a.lambda.iter().all(|l| *l == 10.0));
        assert_eq!(uniform_allocate(1, 1, 3.0).lambda, vec![3.0]);
    }

    #[test]
    fn omniscient_cases() {
        use crate::model::Target;
        let mut s = SceneState::<f64>::empty(10, 1);
        assert!(omniscient_allocate(&s, 10.0).lambda.iter().all(|l| *l == 1.0));
        s.targets = vec![Target { cell: 2, amplitude: 1.0 }, Target { cell: 6, amplitude: 1.0 }];
        let a = omniscient_allocate(&s, 10.0);
        assert_eq!((a.lambda[2], a.lambda[6], a.support_size), (5.0, 5.0, 2));
        s.targets.pop();
        assert_eq!(omniscient_allocate(&s, 10.0).lambda[2], 10.0);
    }

    #[test]
    fn rejects_non_finite() {
        let mut b = belief(&[0.5, 0.5], &[1.0, 1.0]);
        b.means[0] = f64::NAN;
        assert!(myopic_allocate(&b, 1.0, 1.0).is_err());
    }
}
