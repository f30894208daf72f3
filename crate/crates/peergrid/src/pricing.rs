//! First-stage game: the four pricing schemes, the social optimum, and
//! Pigouvian subsidies.

use crate::equilibrium::ConsumptionProfile;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::net::{ModelInstance, Network};

const SYMMETRY_TOL: f64 = 1e-9;

/// Uniform supports for the user parameters `a` and `b`. Degenerate
/// (point-mass) supports are allowed for reduction checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributionSpec {
    pub a_low: f64,
    pub a_high: f64,
    pub b_low: f64,
    pub b_high: f64,
}

impl DistributionSpec {
    pub fn new(a_low: f64, a_high: f64, b_low: f64, b_high: f64) -> Result<Self> {
        if !(a_low <= a_high) {
            return Err(Error::ConfigInvalid {
                key: "a_low/a_high".into(),
                reason: format!("need a_low <= a_high, got [{a_low}, {a_high}]"),
            });
        }
        if !(0.0 < b_low && b_low <= b_high) {
            return Err(Error::ConfigInvalid {
                key: "b_low/b_high".into(),
                reason: format!("need 0 < b_low <= b_high, got [{b_low}, {b_high}]"),
            });
        }
        Ok(Self {
            a_low,
            a_high,
            b_low,
            b_high,
        })
    }

    /// The reference simulation setting: a ~ unif[8,12], b ~ unif[0.75,1.25].
    pub fn study_default() -> Self {
        Self {
            a_low: 8.0,
            a_high: 12.0,
            b_low: 0.75,
            b_high: 1.25,
        }
    }

    pub fn mean_a(&self) -> f64 {
        0.5 * (self.a_low + self.a_high)
    }

    pub fn mean_b(&self) -> f64 {
        0.5 * (self.b_low + self.b_high)
    }

    pub fn var_a(&self) -> f64 {
        let d = self.a_high - self.a_low;
        d * d / 12.0
    }

    /// E[1/b] for b ~ unif[b_low, b_high].
    pub fn mean_inv_b(&self) -> f64 {
        if self.b_high == self.b_low {
            1.0 / self.b_low
        } else {
            (self.b_high / self.b_low).ln() / (self.b_high - self.b_low)
        }
    }

    /// E[1/b^2] for b ~ unif[b_low, b_high].
    pub fn mean_inv_b_sq(&self) -> f64 {
        1.0 / (self.b_low * self.b_high)
    }
}

/// Prices under perfect price discrimination, with the four-term
/// decomposition (constant, cost, influence incentive, influenced surcharge).
#[derive(Debug, Clone, PartialEq)]
pub struct PpdPrices {
    pub prices: Vec<f64>,
    pub constant: Vec<f64>,
    pub cost_term: Vec<f64>,
    pub influence_incentive: Vec<f64>,
    pub influenced_surcharge: Vec<f64>,
}

fn half_peer_coupled_matrix(instance: &ModelInstance) -> Matrix {
    // C + B + 2*Gamma - W^T*Gamma/2 - Gamma*W/2
    let b = instance.population().curvature_matrix();
    let g = instance.population().sensitivity_matrix();
    let c = instance.cost().matrix();
    let w = instance.network().weights();
    let gw = g.matmul(w);
    let wtg = gw.transpose(); // (Gamma W)^T = W^T Gamma since Gamma is diagonal
    c.add(&b)
        .add(&g.scale(2.0))
        .sub(&wtg.scale(0.5))
        .sub(&gw.scale(0.5))
}

/// Profit-maximizing individual prices (perfect price discrimination).
pub fn ppd_prices(instance: &ModelInstance) -> Result<PpdPrices> {
    let n = instance.n();
    let a = instance.population().a();
    let z_matrix = half_peer_coupled_matrix(instance);
    let za = linalg::solve_linear(&z_matrix, a)?;
    let g = instance.population().sensitivity_matrix();
    let w = instance.network().weights();
    let gw = g.matmul(w);
    let wtg = gw.transpose();
    let cost = instance.cost().c();

    let constant: Vec<f64> = a.iter().map(|ai| ai / 2.0).collect();
    let cost_term: Vec<f64> = cost.iter().zip(&za).map(|(ci, z)| ci * z / 2.0).collect();
    let influence_incentive: Vec<f64> = wtg.matvec(&za).iter().map(|v| -v / 4.0).collect();
    let influenced_surcharge: Vec<f64> = gw.matvec(&za).iter().map(|v| v / 4.0).collect();

    let prices: Vec<f64> = (0..n)
        .map(|i| constant[i] + cost_term[i] + influence_incentive[i] + influenced_surcharge[i])
        .collect();
    for (i, p) in prices.iter().enumerate() {
        if *p < 0.0 {
            return Err(Error::NegativePrice { user: i, price: *p });
        }
    }
    Ok(PpdPrices {
        prices,
        constant,
        cost_term,
        influence_incentive,
        influenced_surcharge,
    })
}

/// Equilibrium consumption under the PPD prices.
pub fn ppd_consumption(instance: &ModelInstance) -> Result<ConsumptionProfile> {
    let half_a: Vec<f64> = instance.population().a().iter().map(|a| a / 2.0).collect();
    let x = linalg::solve_linear(&half_peer_coupled_matrix(instance), &half_a)?;
    Ok(ConsumptionProfile::new(x))
}

/// Closed-form PPD profit for symmetric networks:
/// (1/4) a^T (C + B + 2*Gamma - Gamma*W)^{-1} a.
pub fn ppd_profit_symmetric(instance: &ModelInstance) -> Result<f64> {
    require_symmetric(instance.network())?;
    let a = instance.population().a();
    let m = instance
        .cost()
        .matrix()
        .add(&instance.system_matrix());
    let inv_a = linalg::solve_linear(&m, a)?;
    Ok(0.25 * linalg::dot(a, &inv_a))
}

fn require_symmetric(network: &Network) -> Result<()> {
    if !network.is_symmetric(SYMMETRY_TOL) {
        let asymmetry = network
            .weights()
            .sub(&network.weights().transpose())
            .max_norm();
        return Err(Error::NotSymmetric { asymmetry });
    }
    Ok(())
}

/// Profit-maximizing single price under complete information.
pub fn uniform_price_complete(instance: &ModelInstance) -> Result<f64> {
    let n = instance.n();
    let a_mat = instance.system_matrix();
    let ones = vec![1.0; n];
    let u = linalg::solve_linear(&a_mat, &ones)?; // A^{-1} 1
    let y = linalg::solve_linear(&a_mat.transpose(), &ones)?; // A^{-T} 1
    let cu: Vec<f64> = instance
        .cost()
        .c()
        .iter()
        .zip(&u)
        .map(|(c, ui)| c * ui)
        .collect();
    let quad = linalg::dot(&ones, &u); // 1^T A^{-1} 1
    let quad_cost = linalg::dot(&y, &cu); // 1^T A^{-1} C A^{-1} 1
    let a_bar = instance.population().a().iter().sum::<f64>() / n as f64;
    Ok((1.0 - quad / (2.0 * (quad + quad_cost))) * a_bar)
}

/// Equilibrium consumption at the complete-information single price.
pub fn uniform_consumption_complete(instance: &ModelInstance) -> Result<ConsumptionProfile> {
    let price = uniform_price_complete(instance)?;
    let a = instance.population().a();
    if let Some(i) = a.iter().position(|ai| price >= *ai) {
        return Err(Error::AssumptionViolated { user: i });
    }
    let rhs: Vec<f64> = a.iter().map(|ai| ai - price).collect();
    let x = linalg::solve_linear(&instance.system_matrix(), &rhs)?;
    Ok(ConsumptionProfile::new(x))
}

/// Lower bound on the single price under incomplete information
/// (symmetric W, scalar cost).
pub fn incomplete_price_lower_bound(
    dist: &DistributionSpec,
    network: &Network,
    gamma: &[f64],
    c_scalar: f64,
) -> Result<f64> {
    require_symmetric(network)?;
    if c_scalar < 0.0 {
        return Err(Error::ConfigInvalid {
            key: "c".into(),
            reason: format!("cost must be >= 0, got {c_scalar}"),
        });
    }
    let n = network.n();
    let m = incomplete_bound_matrix(network, gamma, 2.0 * dist.mean_b() + c_scalar);
    let ones = vec![1.0; n];
    let s = linalg::dot(&ones, &linalg::solve_linear(&m, &ones)?);
    Ok(dist.mean_a() / 2.0 * (1.0 + c_scalar / n as f64 * s))
}

/// Expected-consumption bound companion to the incomplete-information price.
pub fn incomplete_consumption_lower_bound(
    dist: &DistributionSpec,
    network: &Network,
    gamma: &[f64],
    price_lb: f64,
) -> Result<f64> {
    require_symmetric(network)?;
    if price_lb > dist.mean_a() {
        return Err(Error::NegativeBound {
            price_lb,
            mean_a: dist.mean_a(),
        });
    }
    let n = network.n();
    let m = incomplete_bound_matrix(network, gamma, 2.0 * dist.mean_b());
    let ones = vec![1.0; n];
    let s = linalg::dot(&ones, &linalg::solve_linear(&m, &ones)?);
    Ok((dist.mean_a() - price_lb) / n as f64 * s)
}

/// 2*Gamma + shift*I - Gamma*W.
fn incomplete_bound_matrix(network: &Network, gamma: &[f64], shift: f64) -> Matrix {
    let n = network.n();
    let w = network.weights();
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                m.set(i, i, 2.0 * gamma[i] + shift);
            } else {
                m.set(i, j, -gamma[i] * w.get(i, j));
            }
        }
    }
    m
}

/// Profit-maximizing single price without peer effects (incomplete info).
pub fn baseline_price_no_peer(dist: &DistributionSpec, c_scalar: f64) -> f64 {
    (dist.mean_b() + c_scalar) / (2.0 * dist.mean_b() + c_scalar) * dist.mean_a()
}

/// Expected per-user consumption at the no-peer baseline price.
pub fn baseline_expected_consumption(dist: &DistributionSpec, c_scalar: f64) -> f64 {
    dist.mean_a() / (2.0 * (2.0 * dist.mean_b() + c_scalar))
}

/// Expected entity profit with no peer effects at exogenous price `p`:
/// n * E[p x - c x^2] with x = (a - p) / (2b), a and b independent uniform.
pub fn expected_baseline_profit(dist: &DistributionSpec, c_scalar: f64, price: f64, n: usize) -> f64 {
    let e_gap = dist.mean_a() - price;
    let e_gap_sq = dist.var_a() + e_gap * e_gap;
    let linear = price * e_gap * dist.mean_inv_b() / 2.0;
    let quadratic = c_scalar * e_gap_sq * dist.mean_inv_b_sq() / 4.0;
    n as f64 * (linear - quadratic)
}

/// Welfare-maximizing consumption profile.
pub fn social_optimum(instance: &ModelInstance) -> Result<ConsumptionProfile> {
    // C + B/2 + Gamma - W^T*Gamma/2 - Gamma*W/2
    let b = instance.population().curvature_matrix();
    let g = instance.population().sensitivity_matrix();
    let c = instance.cost().matrix();
    let gw = g.matmul(instance.network().weights());
    let wtg = gw.transpose();
    let m = c
        .add(&b.scale(0.5))
        .add(&g)
        .sub(&wtg.scale(0.5))
        .sub(&gw.scale(0.5));
    let half_a: Vec<f64> = instance.population().a().iter().map(|a| a / 2.0).collect();
    let x = linalg::solve_linear(&m, &half_a)?;
    Ok(ConsumptionProfile::new(x))
}

/// Per-user Pigouvian subsidies s_i = (b_i + gamma_i) x_i^2 / 2.
pub fn pigouvian_subsidies(instance: &ModelInstance, x: &ConsumptionProfile) -> Vec<f64> {
    let pop = instance.population();
    (0..instance.n())
        .map(|i| (pop.b()[i] + pop.gamma()[i]) * x.x()[i] * x.x()[i] / 2.0)
        .collect()
}

/// First-stage optimum of the subsidized game (halved curvature and halved
/// self-term in each user's utility). Coincides with the social optimum.
pub fn subsidized_equilibrium(instance: &ModelInstance) -> Result<ConsumptionProfile> {
    // subsidized second stage: x = (B/2 + Gamma - Gamma*W)^{-1} (a - p);
    // profit-maximizing prices give x = (2C + M + M^T)^{-1} a with M that system
    let b = instance.population().curvature_matrix();
    let g = instance.population().sensitivity_matrix();
    let gw = g.matmul(instance.network().weights());
    let m = b.scale(0.5).add(&g).sub(&gw);
    let system = instance
        .cost()
        .matrix()
        .scale(2.0)
        .add(&m)
        .add(&m.transpose());
    let x = linalg::solve_linear(&system, instance.population().a())?;
    Ok(ConsumptionProfile::new(x))
}
