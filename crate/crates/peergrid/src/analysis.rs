//! Diagnostics around the comparative-statics and uncertainty results:
//! monotonicity in gamma, boomerang gradients, high-consumer classification,
//! targeted-pair reduction conditions, and the network-mismatch profit bound.

use crate::equilibrium::nash_closed_form;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::net::{ModelInstance, Network};

const EQUAL_ALPHA_TOL: f64 = 1e-9;

/// Consumption gradient with respect to a common gamma, evaluated at gamma = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct BoomerangReport {
    /// dx/dgamma at gamma = 0, per user.
    pub gradient: Vec<f64>,
    /// Users whose consumption initially increases in gamma.
    pub increasing_users: Vec<usize>,
    /// The identified high consumer, when classification ran.
    pub high_consumer: Option<usize>,
}

/// Profit-ratio bound under a misestimated interaction matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MismatchReport {
    /// Spectral-norm gap between the true and estimated matrices.
    pub norm_gap: f64,
    /// Lower bound on the profit ratio.
    pub bound: f64,
    /// Realized ratio of mismatched-price profit to full-knowledge profit.
    pub realized_ratio: f64,
}

/// Per-user consumption across a gamma grid (common gamma for all users).
#[derive(Debug, Clone, PartialEq)]
pub struct GammaSweep {
    pub gamma_grid: Vec<f64>,
    /// `consumption[k][i]` is user `i`'s equilibrium consumption at grid point `k`.
    pub consumption: Vec<Vec<f64>>,
    /// Users whose consumption is not strictly decreasing across the grid.
    pub non_monotone_users: Vec<usize>,
}

/// Equilibrium consumption at each gamma on the grid, with Gamma = gamma*I.
pub fn gamma_sweep(
    instance: &ModelInstance,
    prices: &[f64],
    gamma_grid: &[f64],
) -> Result<GammaSweep> {
    if gamma_grid.is_empty() {
        return Err(Error::ConfigInvalid {
            key: "gamma_grid".into(),
            reason: "grid must be nonempty".into(),
        });
    }
    let min_b = instance
        .population()
        .b()
        .iter()
        .fold(f64::INFINITY, |m, b| m.min(*b));
    let mut consumption = Vec::with_capacity(gamma_grid.len());
    for &gamma in gamma_grid {
        if gamma >= min_b || gamma < 0.0 {
            return Err(Error::AssumptionViolated {
                user: instance
                    .population()
                    .b()
                    .iter()
                    .position(|b| *b <= gamma)
                    .unwrap_or(0),
            });
        }
        let pop = instance.population().with_scalar_gamma(gamma)?;
        let swept = instance.with_population(pop)?;
        consumption.push(nash_closed_form(&swept, prices)?.x().to_vec());
    }
    let mut non_monotone_users = Vec::new();
    for i in 0..instance.n() {
        let monotone = consumption
            .windows(2)
            .all(|pair| pair[1][i] < pair[0][i]);
        if !monotone && gamma_grid.len() > 1 {
            non_monotone_users.push(i);
        }
    }
    Ok(GammaSweep {
        gamma_grid: gamma_grid.to_vec(),
        consumption,
        non_monotone_users,
    })
}

/// dx/dgamma at gamma = 0 under the common-gamma parameterization:
/// -(1/4) (2I - W) (a - p).
pub fn boomerang_gradient(instance: &ModelInstance, prices: &[f64]) -> Result<BoomerangReport> {
    let pop = instance.population();
    for i in 0..instance.n() {
        if pop.a()[i] <= prices[i] || pop.b()[i] <= pop.gamma()[i] {
            return Err(Error::AssumptionViolated { user: i });
        }
    }
    let alpha: Vec<f64> = pop.a().iter().zip(prices).map(|(a, p)| a - p).collect();
    let l = Matrix::identity(instance.n())
        .scale(2.0)
        .sub(instance.network().weights());
    let gradient: Vec<f64> = l.matvec(&alpha).iter().map(|v| -v / 4.0).collect();
    let increasing_users = gradient
        .iter()
        .enumerate()
        .filter(|(_, g)| **g > 0.0)
        .map(|(i, _)| i)
        .collect();
    Ok(BoomerangReport {
        gradient,
        increasing_users,
        high_consumer: None,
    })
}

/// Identifies the single high consumer in a one-high-many-equal population,
/// checks the premise alpha_high > n * alpha, and verifies the neighbor-count
/// prediction (neighbors with m_i <= k - 1 increase, where alpha_high = k*alpha)
/// against the gradient signs.
pub fn classify_high_consumer(
    instance: &ModelInstance,
    prices: &[f64],
) -> Result<BoomerangReport> {
    let n = instance.n();
    let pop = instance.population();
    let b0 = pop.b()[0];
    let g0 = pop.gamma()[0];
    if !pop.b().iter().all(|b| (b - b0).abs() <= EQUAL_ALPHA_TOL)
        || !pop.gamma().iter().all(|g| (g - g0).abs() <= EQUAL_ALPHA_TOL)
    {
        return Err(Error::PremiseNotMet(
            "b and gamma must be common across users".into(),
        ));
    }
    let w = instance.network().weights();
    for i in 0..n {
        let positives: Vec<f64> = w.row(i).iter().copied().filter(|v| *v > 0.0).collect();
        let first = positives[0];
        if !positives.iter().all(|v| (v - first).abs() <= EQUAL_ALPHA_TOL) {
            return Err(Error::PremiseNotMet(format!(
                "row {i} does not have equal-weight connections"
            )));
        }
    }
    let alpha: Vec<f64> = pop.a().iter().zip(prices).map(|(a, p)| a - p).collect();
    let (high, &alpha_high) = alpha
        .iter()
        .enumerate()
        .max_by(|(_, x), (_, y)| x.partial_cmp(y).unwrap())
        .unwrap();
    let rest: Vec<f64> = alpha
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != high)
        .map(|(_, v)| *v)
        .collect();
    let alpha_low = rest[0];
    if !rest
        .iter()
        .all(|v| (v - alpha_low).abs() <= EQUAL_ALPHA_TOL)
    {
        return Err(Error::PremiseNotMet(
            "all non-high users must share the same a - p".into(),
        ));
    }
    if (alpha_high - alpha_low).abs() <= EQUAL_ALPHA_TOL {
        return Err(Error::PremiseNotMet("no distinct high consumer".into()));
    }
    if alpha_high <= n as f64 * alpha_low {
        return Err(Error::PremiseNotMet(format!(
            "need alpha_high > n * alpha ({alpha_high} vs {})",
            n as f64 * alpha_low
        )));
    }

    let report = boomerang_gradient(instance, prices)?;
    let k = alpha_high / alpha_low;
    for i in 0..n {
        if i == high {
            assert!(report.gradient[i] < 0.0, "high consumer must decrease");
            continue;
        }
        if w.get(i, high) > 0.0 {
            // neighbor of the high consumer
            let m_i = instance.network().neighbor_count(i) as f64;
            let predicted_increase = m_i <= k - 1.0;
            if predicted_increase {
                assert!(
                    report.gradient[i] > -EQUAL_ALPHA_TOL,
                    "neighbor {i} predicted to increase, gradient {}",
                    report.gradient[i]
                );
            } else {
                assert!(
                    report.gradient[i] < EQUAL_ALPHA_TOL,
                    "neighbor {i} predicted to decrease, gradient {}",
                    report.gradient[i]
                );
            }
        }
    }
    Ok(BoomerangReport {
        high_consumer: Some(high),
        ..report
    })
}

/// Outcome of exposing exactly one connected pair to the peer effect at a
/// common exogenous price.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetedPairReport {
    /// Whether the reduction condition holds for each treated user.
    pub holds: (bool, bool),
    /// Right-hand sides of the two curvature conditions.
    pub rhs: (f64, f64),
    /// Sum of the pair's consumption with the treatment active.
    pub treated_sum: f64,
    /// Sum of the pair's consumption without any peer effect.
    pub untreated_sum: f64,
}

/// Evaluates the pairwise reduction conditions and the realized treated
/// 2x2 subsystem for users `(i, j)`, all others consuming (a_k - p)/(2b_k).
pub fn targeted_pair_conditions(
    instance: &ModelInstance,
    price: f64,
    pair: (usize, usize),
) -> Result<TargetedPairReport> {
    let (i, j) = pair;
    let n = instance.n();
    let w = instance.network().weights();
    if w.get(i, j) <= 0.0 && w.get(j, i) <= 0.0 {
        return Err(Error::NotConnected { i, j });
    }
    let pop = instance.population();
    let gamma = pop.scalar_gamma().ok_or(Error::GammaNotScalar)?;
    for k in 0..n {
        if pop.a()[k] <= price || pop.b()[k] <= pop.gamma()[k] {
            return Err(Error::AssumptionViolated { user: k });
        }
    }
    let bystander = |k: usize| (pop.a()[k] - price) / (2.0 * pop.b()[k]);
    let peer_sum = |row: usize| -> f64 {
        (0..n)
            .filter(|k| *k != i && *k != j)
            .map(|k| w.get(row, k) * bystander(k))
            .sum()
    };
    let s_i = peer_sum(i);
    let s_j = peer_sum(j);
    let (a_i, a_j) = (pop.a()[i] - price, pop.a()[j] - price);
    let (b_i, b_j) = (pop.b()[i], pop.b()[j]);
    let (w_ij, w_ji) = (w.get(i, j), w.get(j, i));

    let rhs_i = a_i * (4.0 * (b_j + gamma) - gamma * w_ij * w_ji)
        / (4.0 * (b_j + gamma) * s_i + 2.0 * w_ij * (a_j + gamma * s_j));
    let rhs_j = a_j * (4.0 * (b_i + gamma) - gamma * w_ij * w_ji)
        / (4.0 * (b_i + gamma) * s_j + 2.0 * w_ji * (a_i + gamma * s_i));

    // treated 2x2 subsystem
    let det = 4.0 * (b_i + gamma) * (b_j + gamma) - gamma * gamma * w_ij * w_ji;
    let rhs1 = a_i + gamma * s_i;
    let rhs2 = a_j + gamma * s_j;
    let x_i = (2.0 * (b_j + gamma) * rhs1 + gamma * w_ij * rhs2) / det;
    let x_j = (2.0 * (b_i + gamma) * rhs2 + gamma * w_ji * rhs1) / det;

    Ok(TargetedPairReport {
        holds: (b_i <= rhs_i, b_j <= rhs_j),
        rhs: (rhs_i, rhs_j),
        treated_sum: x_i + x_j,
        untreated_sum: bystander(i) + bystander(j),
    })
}

/// Profit-ratio bound and realized ratio when pricing against an estimated
/// interaction matrix, symmetric case with a common gamma.
pub fn uncertainty_bound(instance: &ModelInstance, estimate: &Network) -> Result<MismatchReport> {
    let gamma = instance
        .population()
        .scalar_gamma()
        .ok_or(Error::GammaNotScalar)?;
    uncertainty_bound_matrices(
        instance.network().weights(),
        estimate.weights(),
        instance.population().a(),
        instance.population().b(),
        instance.cost().c(),
        gamma,
    )
}

/// Matrix-level variant of [`uncertainty_bound`]; accepts weight matrices
/// that are not row-stochastic (e.g. subnetworks embedded among isolated
/// users, as in the mismatch study).
pub fn uncertainty_bound_matrices(
    w: &Matrix,
    w_est: &Matrix,
    a: &[f64],
    b: &[f64],
    c: &[f64],
    gamma: f64,
) -> Result<MismatchReport> {
    let n = w.rows();
    for m in [w, w_est] {
        let asymmetry = m.sub(&m.transpose()).max_norm();
        if asymmetry > 1e-9 {
            return Err(Error::NotSymmetric { asymmetry });
        }
    }
    let system = |weights: &Matrix| -> Matrix {
        // B + 2*gamma*I - gamma*W
        let mut m = weights.scale(-gamma);
        for i in 0..n {
            m.set(i, i, 2.0 * b[i] + 2.0 * gamma);
        }
        m
    };
    let f_true = system(w);
    let f_est = system(w_est);
    let cf_true = Matrix::diag(c).add(&f_true);
    let cf_est = Matrix::diag(c).add(&f_est);

    let eig = linalg::sym_eigenvalues(&cf_true)?;
    let (lambda_min, lambda_max) = (eig[0], *eig.last().unwrap());
    let norm_gap = linalg::spectral_norm(&w.sub(w_est))?;
    let bound = lambda_min / (lambda_max + gamma * norm_gap);

    // realized profit at the mismatched prices, consumption under the true W
    let half_a: Vec<f64> = a.iter().map(|ai| ai / 2.0).collect();
    let v = linalg::solve_linear(&cf_est, &half_a)?;
    let fv = f_est.matvec(&v);
    let prices: Vec<f64> = a.iter().zip(&fv).map(|(ai, f)| ai - f).collect();
    let x = linalg::solve_linear(&f_true, &fv)?;
    let realized_profit: f64 = x
        .iter()
        .zip(&prices)
        .zip(c)
        .map(|((xi, pi), ci)| pi * xi - ci * xi * xi)
        .sum();
    let full_profit = 0.25 * linalg::dot(a, &linalg::solve_linear(&cf_true, a)?);
    Ok(MismatchReport {
        norm_gap,
        bound,
        realized_ratio: realized_profit / full_profit,
    })
}
