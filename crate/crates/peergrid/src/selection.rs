//! Subset selection of users to expose to the peer comparison at a fixed
//! uniform price: exhaustive exact optimization, the deviation-ranking
//! heuristic, and the captured-improvement metric.

use itertools::Itertools;

use crate::equilibrium::{entity_profit, ConsumptionProfile};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::net::ModelInstance;

/// Default cap on the number of enumerated candidate assignments.
pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;
const MAX_SELECTION_N: usize = 25;
const TIE_RTOL: f64 = 1e-12;

/// A binary treatment assignment: `flags[i]` is true when user `i` sees the
/// peer comparison.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreatmentAssignment {
    flags: Vec<bool>,
}

impl TreatmentAssignment {
    pub fn new(flags: Vec<bool>) -> Self {
        TreatmentAssignment { flags }
    }

    pub fn empty(n: usize) -> Self {
        TreatmentAssignment { flags: vec![false; n] }
    }

    pub fn from_treated(n: usize, treated: &[usize]) -> Self {
        let mut flags = vec![false; n];
        for &i in treated {
            flags[i] = true;
        }
        TreatmentAssignment { flags }
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn m(&self) -> usize {
        self.flags.iter().filter(|f| **f).count()
    }

    pub fn treated(&self) -> Vec<usize> {
        self.flags
            .iter()
            .enumerate()
            .filter(|(_, f)| **f)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Result of an exact or heuristic selection run.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionOutcome {
    pub assignment: TreatmentAssignment,
    pub consumption: ConsumptionProfile,
    pub profit: f64,
    /// Realized profit of the same instance with nobody treated.
    pub baseline_profit: f64,
}

/// Equilibrium consumption when only the treated users internalize the peer
/// effect: x = (B + 2*Delta*Gamma - Delta*Gamma*W)^(-1) (a - p*1).
pub fn consumption_under_treatment(
    instance: &ModelInstance,
    price: f64,
    assignment: &TreatmentAssignment,
) -> Result<ConsumptionProfile> {
    let n = instance.n();
    let pop = instance.population();
    for i in 0..n {
        if pop.a()[i] <= price || pop.b()[i] <= pop.gamma()[i] {
            return Err(Error::AssumptionViolated { user: i });
        }
    }
    let w = instance.network().weights();
    let mut system = Matrix::zeros(n, n);
    for i in 0..n {
        let g = if assignment.flags()[i] { pop.gamma()[i] } else { 0.0 };
        system.set(i, i, 2.0 * pop.b()[i] + 2.0 * g);
        for j in 0..n {
            if j != i {
                system.set(i, j, -g * w.get(i, j));
            }
        }
    }
    let rhs: Vec<f64> = pop.a().iter().map(|a| a - price).collect();
    let x = linalg::solve_linear(&system, &rhs)?;
    Ok(ConsumptionProfile::new(x))
}

fn evaluate(
    instance: &ModelInstance,
    price: f64,
    assignment: TreatmentAssignment,
    baseline_profit: f64,
) -> Result<SelectionOutcome> {
    let consumption = consumption_under_treatment(instance, price, &assignment)?;
    let prices = vec![price; instance.n()];
    let profit = entity_profit(&consumption, &prices, instance.cost());
    Ok(SelectionOutcome {
        assignment,
        consumption,
        profit,
        baseline_profit,
    })
}

fn baseline_profit(instance: &ModelInstance, price: f64) -> Result<f64> {
    let empty = TreatmentAssignment::empty(instance.n());
    let consumption = consumption_under_treatment(instance, price, &empty)?;
    let prices = vec![price; instance.n()];
    Ok(entity_profit(&consumption, &prices, instance.cost()))
}

fn binomial(n: usize, m: usize) -> u64 {
    let m = m.min(n - m);
    let mut out: u64 = 1;
    for k in 0..m {
        out = out * (n - k) as u64 / (k + 1) as u64;
    }
    out
}

/// Enumerates every size-`m` assignment and returns the profit maximizer.
/// Ties go to the earliest treated-index combination.
pub fn exact_selection(instance: &ModelInstance, price: f64, m: usize) -> Result<SelectionOutcome> {
    exact_selection_capped(instance, price, m, DEFAULT_ENUMERATION_CAP)
}

/// [`exact_selection`] with an explicit candidate cap.
pub fn exact_selection_capped(
    instance: &ModelInstance,
    price: f64,
    m: usize,
    cap: u64,
) -> Result<SelectionOutcome> {
    let n = instance.n();
    if m > n {
        return Err(Error::InvalidSize {
            kind: "treatment size".into(),
            n: m,
        });
    }
    if n > MAX_SELECTION_N {
        return Err(Error::InvalidSize {
            kind: "selection instance".into(),
            n,
        });
    }
    let candidates = binomial(n, m);
    if candidates > cap {
        return Err(Error::TooLarge {
            candidates: candidates.into(),
            cap: cap.into(),
        });
    }
    let base = baseline_profit(instance, price)?;
    let mut best: Option<SelectionOutcome> = None;
    for combo in (0..n).combinations(m) {
        let assignment = TreatmentAssignment::from_treated(n, &combo);
        let outcome = evaluate(instance, price, assignment, base)?;
        let improves = match &best {
            None => true,
            Some(b) => outcome.profit > b.profit + TIE_RTOL * (1.0 + b.profit.abs()),
        };
        if improves {
            best = Some(outcome);
        }
    }
    Ok(best.expect("at least one candidate"))
}

/// Treats the `m` users whose no-peer consumption deviates most from the
/// expected consumption; ties go to the lowest index.
pub fn heuristic_selection(
    instance: &ModelInstance,
    price: f64,
    m: usize,
    expected_consumption: f64,
) -> Result<SelectionOutcome> {
    let n = instance.n();
    if m > n {
        return Err(Error::InvalidSize {
            kind: "treatment size".into(),
            n: m,
        });
    }
    let pop = instance.population();
    for i in 0..n {
        if pop.a()[i] <= price || pop.b()[i] <= pop.gamma()[i] {
            return Err(Error::AssumptionViolated { user: i });
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let deviation = |i: usize| {
        let x_tilde = (pop.a()[i] - price) / (2.0 * pop.b()[i]);
        (expected_consumption - x_tilde).abs()
    };
    order.sort_by(|&i, &j| {
        deviation(j)
            .partial_cmp(&deviation(i))
            .unwrap()
            .then(i.cmp(&j))
    });
    let assignment = TreatmentAssignment::from_treated(n, &order[..m]);
    let base = baseline_profit(instance, price)?;
    evaluate(instance, price, assignment, base)
}

/// S_m = 100 * (heuristic - baseline) / (exact - baseline), in percent.
pub fn performance_metric(
    heuristic_profit: f64,
    exact_profit: f64,
    baseline_profit: f64,
) -> Result<f64> {
    let denom = exact_profit - baseline_profit;
    if denom.abs() < 1e-12 {
        return Err(Error::UndefinedMetric);
    }
    Ok(100.0 * (heuristic_profit - baseline_profit) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::nash_closed_form;
    use crate::net::{build_topology, CostProfile, Topology, UserPopulation};

    fn swap_instance() -> ModelInstance {
        let net = build_topology(Topology::FullyConnected, 2).unwrap();
        let pop = UserPopulation::new(vec![10.0, 10.0], vec![1.0, 1.0], vec![0.5, 0.5]).unwrap();
        let cost = CostProfile::uniform(2.0, 2).unwrap();
        ModelInstance::new(net, pop, cost).unwrap()
    }

    #[test]
    fn untreated_profile_is_no_peer_response() {
        let instance = swap_instance();
        let x = consumption_under_treatment(
            &instance,
            7.5,
            &TreatmentAssignment::empty(2),
        )
        .unwrap();
        assert!((x.x()[0] - 1.25).abs() <= 1e-12);
        assert!((x.x()[1] - 1.25).abs() <= 1e-12);
    }

    #[test]
    fn fully_treated_matches_nash() {
        let instance = swap_instance();
        let x = consumption_under_treatment(
            &instance,
            7.5,
            &TreatmentAssignment::new(vec![true, true]),
        )
        .unwrap();
        let nash = nash_closed_form(&instance, &[7.5, 7.5]).unwrap();
        for (u, v) in x.x().iter().zip(nash.x()) {
            assert!((u - v).abs() <= 1e-12);
        }
    }

    #[test]
    fn swap_single_treatment_profile() {
        let instance = swap_instance();
        let x = consumption_under_treatment(
            &instance,
            7.5,
            &TreatmentAssignment::new(vec![true, false]),
        )
        .unwrap();
        assert!((x.x()[0] - 25.0 / 24.0).abs() <= 1e-12);
        assert!((x.x()[1] - 1.25).abs() <= 1e-12);
    }

    #[test]
    fn exact_selection_m0_baseline() {
        let instance = swap_instance();
        let out = exact_selection(&instance, 7.5, 0).unwrap();
        assert!((out.profit - 12.5).abs() <= 1e-12);
        assert!((out.baseline_profit - 12.5).abs() <= 1e-12);
        assert_eq!(out.assignment.m(), 0);
    }

    #[test]
    fn exact_selection_tie_picks_first_user() {
        let instance = swap_instance();
        let out = exact_selection(&instance, 7.5, 1).unwrap();
        assert_eq!(out.assignment.treated(), vec![0]);
        let expected = 7.5 * (25.0 / 24.0 + 1.25)
            - 2.0 * ((25.0f64 / 24.0).powi(2) + 1.25f64.powi(2));
        assert!((out.profit - expected).abs() <= 1e-12);
        assert!((out.profit - 11.8924).abs() <= 1e-4);
    }

    #[test]
    fn exact_selection_m_equals_n() {
        let instance = swap_instance();
        let out = exact_selection(&instance, 7.5, 2).unwrap();
        let nash = nash_closed_form(&instance, &[7.5, 7.5]).unwrap();
        let expected = entity_profit(&nash, &[7.5, 7.5], instance.cost());
        assert!((out.profit - expected).abs() <= 1e-12);
    }

    #[test]
    fn exact_selection_respects_cap() {
        let net = build_topology(Topology::Ring, 6).unwrap();
        let pop = UserPopulation::new(vec![10.0; 6], vec![1.0; 6], vec![0.5; 6]).unwrap();
        let cost = CostProfile::uniform(2.0, 6).unwrap();
        let instance = ModelInstance::new(net, pop, cost).unwrap();
        assert!(matches!(
            exact_selection_capped(&instance, 7.5, 3, 10),
            Err(Error::TooLarge { candidates: 20, cap: 10 })
        ));
    }

    #[test]
    fn heuristic_ranks_by_deviation() {
        // x_tilde = (2.25, 1.25, 0.25) at p = 7.5 via a = (12, 10, 8), b = 1
        let net = build_topology(Topology::FullyConnected, 3).unwrap();
        let pop =
            UserPopulation::new(vec![12.0, 10.0, 8.0], vec![1.0; 3], vec![0.01; 3]).unwrap();
        let cost = CostProfile::uniform(2.0, 3).unwrap();
        let instance = ModelInstance::new(net, pop, cost).unwrap();
        let out = heuristic_selection(&instance, 7.5, 2, 1.25).unwrap();
        assert_eq!(out.assignment.treated(), vec![0, 2]);
        let out = heuristic_selection(&instance, 7.5, 1, 1.25).unwrap();
        assert_eq!(out.assignment.treated(), vec![0]);
        let out = heuristic_selection(&instance, 7.5, 0, 1.25).unwrap();
        assert_eq!(out.assignment.m(), 0);
        assert!((out.profit - out.baseline_profit).abs() <= 1e-12);
    }

    #[test]
    fn exact_dominates_heuristic() {
        let net = build_topology(Topology::Star, 5).unwrap();
        let pop = UserPopulation::new(
            vec![11.0, 9.0, 10.5, 8.5, 12.0],
            vec![0.8, 1.2, 1.0, 0.9, 1.1],
            vec![0.3; 5],
        )
        .unwrap();
        let cost = CostProfile::uniform(2.0, 5).unwrap();
        let instance = ModelInstance::new(net, pop, cost).unwrap();
        for m in 0..=5 {
            let exact = exact_selection(&instance, 7.5, m).unwrap();
            let heur = heuristic_selection(&instance, 7.5, m, 1.25).unwrap();
            assert!(exact.profit >= heur.profit - 1e-12);
        }
    }

    #[test]
    fn treating_identical_users_reduces_total() {
        let net = build_topology(Topology::Ring, 6).unwrap();
        let pop = UserPopulation::new(vec![10.0; 6], vec![1.0; 6], vec![0.5; 6]).unwrap();
        let cost = CostProfile::uniform(2.0, 6).unwrap();
        let instance = ModelInstance::new(net, pop, cost).unwrap();
        let base = consumption_under_treatment(&instance, 7.5, &TreatmentAssignment::empty(6))
            .unwrap()
            .total();
        for m in 1..=6 {
            let out = exact_selection(&instance, 7.5, m).unwrap();
            assert!(out.consumption.total() <= base + 1e-12);
        }
    }

    #[test]
    fn performance_metric_examples() {
        assert!((performance_metric(13.0, 13.0, 12.5).unwrap() - 100.0).abs() <= 1e-12);
        assert!((performance_metric(12.5, 13.0, 12.5).unwrap()).abs() <= 1e-12);
        assert!((performance_metric(12.875, 13.0, 12.5).unwrap() - 75.0).abs() <= 1e-12);
        assert!(matches!(
            performance_metric(12.5, 12.5, 12.5),
            Err(Error::UndefinedMetric)
        ));
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(10, 5), 252);
        assert_eq!(binomial(6, 3), 20);
        assert_eq!(binomial(25, 12), 5_200_300);
    }
}
