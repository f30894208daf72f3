//! Second-stage game: best responses, the closed-form Nash equilibrium, an
//! independent fixed-point oracle, and utility/profit/welfare evaluation.

use crate::error::{Error, Result};
use crate::linalg::{self, vec_max_norm, vec_sub};
use crate::net::{validate_assumption_1, CostProfile, ModelInstance};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Non-negative consumption profile.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsumptionProfile {
    x: Vec<f64>,
}

impl ConsumptionProfile {
    pub fn new(x: Vec<f64>) -> Self {
        assert!(x.iter().all(|v| *v >= 0.0), "consumption must be non-negative");
        Self { x }
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn mean(&self) -> f64 {
        self.x.iter().sum::<f64>() / self.x.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.x.iter().fold(0.0, |m, v| m.max(*v))
    }

    pub fn total(&self) -> f64 {
        self.x.iter().sum()
    }
}

/// Prices, consumption, and the induced utilities, profit, and welfare.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumOutcome {
    pub prices: Vec<f64>,
    pub consumption: ConsumptionProfile,
    pub user_utilities: Vec<f64>,
    pub profit: f64,
    pub welfare: f64,
}

impl EquilibriumOutcome {
    pub fn evaluate(
        instance: &ModelInstance,
        prices: Vec<f64>,
        consumption: ConsumptionProfile,
    ) -> Self {
        let utilities: Vec<f64> = (0..instance.n())
            .map(|i| user_utility(i, &consumption, prices[i], instance))
            .collect();
        let profit = entity_profit(&consumption, &prices, instance.cost());
        let welfare = social_welfare(&consumption, instance);
        Self {
            prices,
            consumption,
            user_utilities: utilities,
            profit,
            welfare,
        }
    }
}

fn check_assumption(instance: &ModelInstance, prices: &[f64]) -> Result<()> {
    let pop = instance.population();
    for i in 0..instance.n() {
        if pop.a()[i] <= prices[i] || pop.b()[i] <= pop.gamma()[i] {
            return Err(Error::AssumptionViolated { user: i });
        }
    }
    Ok(())
}

/// Utility-maximizing response of user `i` given everyone else's consumption.
pub fn best_response(
    i: usize,
    others: &ConsumptionProfile,
    price: f64,
    instance: &ModelInstance,
) -> Result<f64> {
    let pop = instance.population();
    if pop.a()[i] <= price || pop.b()[i] <= pop.gamma()[i] {
        return Err(Error::AssumptionViolated { user: i });
    }
    let peer_sum = linalg::dot(instance.network().weights().row(i), others.x());
    Ok((pop.a()[i] - price + pop.gamma()[i] * peer_sum) / (2.0 * (pop.b()[i] + pop.gamma()[i])))
}

/// Unique Nash equilibrium x* = A^{-1}(a - p).
pub fn nash_closed_form(instance: &ModelInstance, prices: &[f64]) -> Result<ConsumptionProfile> {
    check_assumption(instance, prices)?;
    let rhs: Vec<f64> = instance
        .population()
        .a()
        .iter()
        .zip(prices)
        .map(|(a, p)| a - p)
        .collect();
    let x = linalg::solve_linear(&instance.system_matrix(), &rhs)?;
    assert!(
        x.iter().all(|v| *v > 0.0),
        "equilibrium must be interior under the stated assumptions"
    );
    Ok(ConsumptionProfile::new(x))
}

/// Fixed-point oracle: simultaneous (Jacobi) best-response sweeps from zero.
pub fn nash_fixed_point(
    instance: &ModelInstance,
    prices: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<ConsumptionProfile> {
    check_assumption(instance, prices)?;
    nash_fixed_point_from(instance, prices, &vec![0.0; instance.n()], tol, max_iter)
}

/// Fixed-point iteration from an arbitrary non-negative starting profile.
pub fn nash_fixed_point_from(
    instance: &ModelInstance,
    prices: &[f64],
    start: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<ConsumptionProfile> {
    check_assumption(instance, prices)?;
    assert!(tol > 0.0, "tolerance must be positive");
    let mut x = ConsumptionProfile::new(start.to_vec());
    for _ in 0..max_iter {
        let next: Result<Vec<f64>> = (0..instance.n())
            .map(|i| best_response(i, &x, prices[i], instance))
            .collect();
        let next = ConsumptionProfile::new(next?);
        let delta = vec_max_norm(&vec_sub(next.x(), x.x()));
        x = next;
        if delta < tol {
            return Ok(x);
        }
    }
    Err(Error::NoConvergence { max_iter })
}

/// u_i = a_i x_i - b_i x_i^2 - p_i x_i + gamma_i x_i (sum_j w_ij x_j - x_i).
pub fn user_utility(i: usize, x: &ConsumptionProfile, price: f64, instance: &ModelInstance) -> f64 {
    let pop = instance.population();
    let xi = x.x()[i];
    let peer_sum = linalg::dot(instance.network().weights().row(i), x.x());
    pop.a()[i] * xi - pop.b()[i] * xi * xi - price * xi + pop.gamma()[i] * xi * (peer_sum - xi)
}

/// Entity profit: sum_i p_i x_i - c_i x_i^2.
pub fn entity_profit(x: &ConsumptionProfile, prices: &[f64], cost: &CostProfile) -> f64 {
    x.x()
        .iter()
        .zip(prices)
        .zip(cost.c())
        .map(|((xi, pi), ci)| pi * xi - ci * xi * xi)
        .sum()
}

/// Social welfare: user utilities plus profit; prices cancel as transfers.
pub fn social_welfare(x: &ConsumptionProfile, instance: &ModelInstance) -> f64 {
    let pop = instance.population();
    let c = instance.cost().c();
    (0..instance.n())
        .map(|i| {
            let xi = x.x()[i];
            let peer_sum = linalg::dot(instance.network().weights().row(i), x.x());
            pop.a()[i] * xi - (pop.b()[i] + c[i]) * xi * xi
                + pop.gamma()[i] * xi * (peer_sum - xi)
        })
        .sum()
}

/// Requires Assumption 1 at the given prices, as an `Err` instead of a bool.
pub fn require_assumption_1(instance: &ModelInstance, prices: &[f64]) -> Result<()> {
    if !validate_assumption_1(instance, prices) {
        check_assumption(instance, prices)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{build_topology, CostProfile, Topology, UserPopulation};

    fn i2_instance() -> ModelInstance {
        let net = build_topology(Topology::FullyConnected, 2).unwrap();
        let pop = UserPopulation::new(vec![10.0, 10.0], vec![1.0, 1.0], vec![0.5, 0.5]).unwrap();
        let cost = CostProfile::uniform(2.0, 2).unwrap();
        ModelInstance::new(net, pop, cost).unwrap()
    }

    fn no_peer_instance() -> ModelInstance {
        let net = build_topology(Topology::FullyConnected, 2).unwrap();
        let pop = UserPopulation::new(vec![10.0, 10.0], vec![1.0, 1.0], vec![0.0, 0.0]).unwrap();
        let cost = CostProfile::uniform(2.0, 2).unwrap();
        ModelInstance::new(net, pop, cost).unwrap()
    }

    #[test]
    fn best_response_no_peer() {
        let x = ConsumptionProfile::new(vec![0.0, 3.0]);
        let r = best_response(0, &x, 2.0, &no_peer_instance()).unwrap();
        assert!((r - 4.0).abs() <= 1e-12);
    }

    #[test]
    fn best_response_fixed_point_value() {
        let x = ConsumptionProfile::new(vec![0.0, 3.2]);
        let r = best_response(0, &x, 2.0, &i2_instance()).unwrap();
        assert!((r - 3.2).abs() <= 1e-12);
    }

    #[test]
    fn best_response_zero_others() {
        let x = ConsumptionProfile::new(vec![0.0, 0.0]);
        let r = best_response(0, &x, 2.0, &i2_instance()).unwrap();
        assert!((r - 8.0 / 3.0).abs() <= 1e-12);
    }

    #[test]
    fn best_response_assumption_violated() {
        let x = ConsumptionProfile::new(vec![0.0, 0.0]);
        assert!(matches!(
            best_response(0, &x, 10.0, &i2_instance()),
            Err(Error::AssumptionViolated { user: 0 })
        ));
    }

    #[test]
    fn closed_form_gamma_zero_componentwise() {
        let x = nash_closed_form(&no_peer_instance(), &[2.0, 4.0]).unwrap();
        assert!((x.x()[0] - 4.0).abs() <= 1e-12);
        assert!((x.x()[1] - 3.0).abs() <= 1e-12);
    }

    #[test]
    fn closed_form_identical_users_collapses() {
        for (kind, n) in [
            (Topology::FullyConnected, 6),
            (Topology::Star, 5),
            (Topology::Ring, 7),
        ] {
            let net = build_topology(kind, n).unwrap();
            let pop =
                UserPopulation::new(vec![10.0; n], vec![1.0; n], vec![0.5; n]).unwrap();
            let cost = CostProfile::uniform(2.0, n).unwrap();
            let instance = ModelInstance::new(net, pop, cost).unwrap();
            let x = nash_closed_form(&instance, &vec![2.0; n]).unwrap();
            for xi in x.x() {
                assert!((xi - 3.2).abs() <= 1e-10, "{kind:?}: {xi}");
            }
        }
    }

    #[test]
    fn fixed_point_matches_closed_form() {
        let instance = i2_instance();
        let x = nash_fixed_point(&instance, &[2.0, 2.0], 1e-10, DEFAULT_MAX_ITER).unwrap();
        assert!((x.x()[0] - 3.2).abs() <= 1e-9);
        assert!((x.x()[1] - 3.2).abs() <= 1e-9);
    }

    #[test]
    fn fixed_point_gamma_zero_one_sweep() {
        let x = nash_fixed_point(&no_peer_instance(), &[2.0, 2.0], 1e-10, 2).unwrap();
        assert!((x.x()[0] - 4.0).abs() <= 1e-12);
    }

    #[test]
    fn fixed_point_zero_iterations() {
        assert!(matches!(
            nash_fixed_point(&i2_instance(), &[2.0, 2.0], 1e-10, 0),
            Err(Error::NoConvergence { .. })
        ));
    }

    #[test]
    fn utility_values() {
        let instance = i2_instance();
        let zero = ConsumptionProfile::new(vec![0.0, 1.0]);
        assert_eq!(user_utility(0, &zero, 2.0, &instance), 0.0);
        let x = ConsumptionProfile::new(vec![3.2, 3.2]);
        let u = user_utility(0, &x, 2.0, &instance);
        assert!((u - 15.36).abs() <= 1e-12);
    }

    #[test]
    fn utility_peer_term_vanishes_at_neighbor_average() {
        // consuming exactly the neighbor average kills the peer term for any gamma
        let net = build_topology(Topology::FullyConnected, 3).unwrap();
        for gamma in [0.1, 0.5, 0.9] {
            let pop =
                UserPopulation::new(vec![10.0; 3], vec![1.0; 3], vec![gamma; 3]).unwrap();
            let cost = CostProfile::uniform(2.0, 3).unwrap();
            let instance = ModelInstance::new(net.clone(), pop, cost).unwrap();
            let x = ConsumptionProfile::new(vec![2.5, 2.0, 3.0]);
            let base = 10.0 * 2.5 - 1.0 * 2.5 * 2.5 - 2.0 * 2.5;
            assert!((user_utility(0, &x, 2.0, &instance) - base).abs() <= 1e-12);
        }
    }

    #[test]
    fn profit_values() {
        let cost = CostProfile::uniform(2.0, 2).unwrap();
        let zero = ConsumptionProfile::new(vec![0.0, 0.0]);
        assert_eq!(entity_profit(&zero, &[7.5, 7.5], &cost), 0.0);
        let x = ConsumptionProfile::new(vec![1.25, 1.25]);
        assert!((entity_profit(&x, &[7.5, 7.5], &cost) - 12.5).abs() <= 1e-12);
        let x = ConsumptionProfile::new(vec![10.0 / 9.0, 10.0 / 9.0]);
        let p = 65.0 / 9.0;
        assert!((entity_profit(&x, &[p, p], &cost) - 100.0 / 9.0).abs() <= 1e-12);
    }

    #[test]
    fn welfare_values() {
        let instance = i2_instance();
        let zero = ConsumptionProfile::new(vec![0.0, 0.0]);
        assert_eq!(social_welfare(&zero, &instance), 0.0);
        let opt = ConsumptionProfile::new(vec![5.0 / 3.0, 5.0 / 3.0]);
        assert!((social_welfare(&opt, &instance) - 50.0 / 3.0).abs() <= 1e-12);
        let ppd = ConsumptionProfile::new(vec![10.0 / 9.0, 10.0 / 9.0]);
        let w = social_welfare(&ppd, &instance);
        assert!((w - 1200.0 / 81.0).abs() <= 1e-10);
        assert!(w < 50.0 / 3.0);
    }

    #[test]
    fn outcome_profit_recomputable() {
        let instance = i2_instance();
        let prices = vec![2.0, 2.0];
        let x = nash_closed_form(&instance, &prices).unwrap();
        let outcome = EquilibriumOutcome::evaluate(&instance, prices.clone(), x);
        let recomputed = entity_profit(&outcome.consumption, &prices, instance.cost());
        assert!((outcome.profit - recomputed).abs() <= 1e-9);
    }
}
