//! Consumer network, user parameters, canonical topologies, and
//! Katz-Bonacich centrality.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

const ROW_SUM_TOL: f64 = 1e-12;
const ROW_SUM_RENORM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    FullyConnected,
    Star,
    Ring,
    Custom,
}

impl Topology {
    pub fn name(self) -> &'static str {
        match self {
            Topology::FullyConnected => "fully_connected",
            Topology::Star => "star",
            Topology::Ring => "ring",
            Topology::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Option<Topology> {
        match s {
            "fully_connected" => Some(Topology::FullyConnected),
            "star" => Some(Topology::Star),
            "ring" => Some(Topology::Ring),
            "custom" => Some(Topology::Custom),
            _ => None,
        }
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Row-stochastic interaction matrix with zero diagonal. `w_ij` is the
/// influence of user `j` on user `i`; the adjacency matrix is `W^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    weights: Matrix,
    topology: Topology,
    /// Rows whose sum is zero (isolated users); allowed only with gamma = 0.
    zero_rows: Vec<usize>,
}

impl Network {
    /// Validates and wraps a weight matrix. Rows deviating from sum 1 by more
    /// than 1e-9 are re-normalized; zero rows are recorded and checked against
    /// the population at instance construction.
    pub fn from_weights(weights: Matrix, topology: Topology) -> Result<Self> {
        if !weights.is_square() {
            return Err(Error::InvalidNetwork(format!(
                "weight matrix must be square, got {}x{}",
                weights.rows(),
                weights.cols()
            )));
        }
        let n = weights.rows();
        if n < 2 {
            return Err(Error::InvalidSize {
                kind: topology.name(),
                n,
            });
        }
        let mut w = weights;
        let mut zero_rows = Vec::new();
        for i in 0..n {
            if w.get(i, i).abs() > 0.0 {
                return Err(Error::InvalidNetwork(format!(
                    "diagonal entry w[{i}][{i}] must be zero"
                )));
            }
            for j in 0..n {
                let e = w.get(i, j);
                if !(0.0..=1.0).contains(&e) {
                    return Err(Error::InvalidNetwork(format!(
                        "w[{i}][{j}] = {e} outside [0, 1]"
                    )));
                }
            }
            let sum: f64 = w.row(i).iter().sum();
            if sum == 0.0 {
                zero_rows.push(i);
            } else if (sum - 1.0).abs() > ROW_SUM_RENORM_TOL {
                for j in 0..n {
                    w.set(i, j, w.get(i, j) / sum);
                }
            } else if (sum - 1.0).abs() > ROW_SUM_TOL {
                for j in 0..n {
                    w.set(i, j, w.get(i, j) / sum);
                }
            }
        }
        Ok(Self {
            weights: w,
            topology,
            zero_rows,
        })
    }

    pub fn n(&self) -> usize {
        self.weights.rows()
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn zero_rows(&self) -> &[usize] {
        &self.zero_rows
    }

    /// Adjacency matrix G = W^T.
    pub fn adjacency(&self) -> Matrix {
        self.weights.transpose()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.weights.sub(&self.weights.transpose()).max_norm() <= tol
    }

    /// Neighbor count of user `i` (out-edges in W, i.e. users who influence `i`).
    pub fn neighbor_count(&self, i: usize) -> usize {
        self.weights.row(i).iter().filter(|&&w| w > 0.0).count()
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for i in 0..self.n() {
            let row: Vec<String> = self
                .weights
                .row(i)
                .iter()
                .map(|v| crate::experiments::format_sig(*v))
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row: Result<Vec<f64>> = line
                .split(',')
                .map(|tok| {
                    tok.trim().parse::<f64>().map_err(|_| {
                        Error::InvalidNetwork(format!("unparseable value on line {}", lineno + 1))
                    })
                })
                .collect();
            rows.push(row?);
        }
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidNetwork(format!(
                "expected an {n}x{n} matrix"
            )));
        }
        let entries: Vec<f64> = rows.into_iter().flatten().collect();
        Network::from_weights(Matrix::new(n, n, entries)?, Topology::Custom)
    }
}

/// Builds one of the canonical topologies with equal-weight row normalization.
/// The star hub is user 0.
pub fn build_topology(kind: Topology, n: usize) -> Result<Network> {
    let min = match kind {
        Topology::FullyConnected => 2,
        Topology::Star | Topology::Ring => 3,
        Topology::Custom => {
            return Err(Error::InvalidNetwork(
                "custom topology must be loaded from a weight matrix".into(),
            ))
        }
    };
    if n < min {
        return Err(Error::InvalidSize {
            kind: kind.name(),
            n,
        });
    }
    let mut w = Matrix::zeros(n, n);
    match kind {
        Topology::FullyConnected => {
            let weight = 1.0 / (n as f64 - 1.0);
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        w.set(i, j, weight);
                    }
                }
            }
        }
        Topology::Star => {
            let weight = 1.0 / (n as f64 - 1.0);
            for j in 1..n {
                w.set(0, j, weight);
                w.set(j, 0, 1.0);
            }
        }
        Topology::Ring => {
            for i in 0..n {
                w.set(i, (i + 1) % n, 0.5);
                w.set(i, (i + n - 1) % n, 0.5);
            }
        }
        Topology::Custom => unreachable!(),
    }
    Network::from_weights(w, kind)
}

/// Per-user intercepts `a`, curvatures `b`, and peer sensitivities `gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct UserPopulation {
    a: Vec<f64>,
    b: Vec<f64>,
    gamma: Vec<f64>,
}

impl UserPopulation {
    pub fn new(a: Vec<f64>, b: Vec<f64>, gamma: Vec<f64>) -> Result<Self> {
        let n = a.len();
        if b.len() != n || gamma.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: b.len().max(gamma.len()),
            });
        }
        for i in 0..n {
            if !(a[i].is_finite() && b[i].is_finite() && gamma[i].is_finite()) {
                return Err(Error::NonFiniteEntry);
            }
            if a[i] <= 0.0 {
                return Err(Error::InvalidPopulation(format!("a[{i}] = {} must be > 0", a[i])));
            }
            if b[i] <= 0.0 {
                return Err(Error::InvalidPopulation(format!("b[{i}] = {} must be > 0", b[i])));
            }
            if gamma[i] < 0.0 {
                return Err(Error::InvalidPopulation(format!(
                    "gamma[{i}] = {} must be >= 0",
                    gamma[i]
                )));
            }
        }
        Ok(Self { a, b, gamma })
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    /// B = diag(2 b_1, ..., 2 b_n).
    pub fn curvature_matrix(&self) -> Matrix {
        Matrix::diag(&self.b.iter().map(|b| 2.0 * b).collect::<Vec<_>>())
    }

    /// Gamma = diag(gamma_1, ..., gamma_n).
    pub fn sensitivity_matrix(&self) -> Matrix {
        Matrix::diag(&self.gamma)
    }

    /// Common scalar gamma, if all sensitivities agree to 1e-12.
    pub fn scalar_gamma(&self) -> Option<f64> {
        let g0 = self.gamma[0];
        if self.gamma.iter().all(|g| (g - g0).abs() <= 1e-12) {
            Some(g0)
        } else {
            None
        }
    }

    pub fn with_scalar_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), vec![gamma; self.n()])
    }
}

/// Marginal-cost slopes `c_i` (cost is `c_i x_i^2`).
#[derive(Debug, Clone, PartialEq)]
pub struct CostProfile {
    c: Vec<f64>,
}

impl CostProfile {
    pub fn new(c: Vec<f64>) -> Result<Self> {
        for (i, v) in c.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteEntry);
            }
            if *v < 0.0 {
                return Err(Error::InvalidPopulation(format!("c[{i}] = {v} must be >= 0")));
            }
        }
        Ok(Self { c })
    }

    pub fn uniform(c: f64, n: usize) -> Result<Self> {
        Self::new(vec![c; n])
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    /// C = diag(c_1, ..., c_n).
    pub fn matrix(&self) -> Matrix {
        Matrix::diag(&self.c)
    }

    pub fn scalar(&self) -> Option<f64> {
        let c0 = self.c[0];
        if self.c.iter().all(|c| (c - c0).abs() <= 1e-12) {
            Some(c0)
        } else {
            None
        }
    }
}

/// Network plus user and cost parameters; the home of the system matrix
/// A = B + 2*Gamma - Gamma*W.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInstance {
    network: Network,
    population: UserPopulation,
    cost: CostProfile,
}

impl ModelInstance {
    pub fn new(network: Network, population: UserPopulation, cost: CostProfile) -> Result<Self> {
        let n = network.n();
        if population.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: population.n(),
            });
        }
        if cost.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: cost.n(),
            });
        }
        for &i in network.zero_rows() {
            if population.gamma()[i] > 0.0 {
                return Err(Error::InvalidNetwork(format!(
                    "user {i} is isolated but has gamma > 0"
                )));
            }
        }
        let instance = Self {
            network,
            population,
            cost,
        };
        // guaranteed by b_i > 0, gamma_i >= 0; asserted at construction
        assert!(
            linalg::is_strictly_diag_dominant(&instance.system_matrix()),
            "system matrix must be strictly diagonally dominant"
        );
        Ok(instance)
    }

    pub fn n(&self) -> usize {
        self.network.n()
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn population(&self) -> &UserPopulation {
        &self.population
    }

    pub fn cost(&self) -> &CostProfile {
        &self.cost
    }

    /// A = B + 2*Gamma - Gamma*W: diagonal 2b_i + 2gamma_i, off-diagonal
    /// -gamma_i * w_ij.
    pub fn system_matrix(&self) -> Matrix {
        let n = self.n();
        let b = self.population.b();
        let gamma = self.population.gamma();
        let w = self.network.weights();
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    a.set(i, i, 2.0 * b[i] + 2.0 * gamma[i]);
                } else {
                    a.set(i, j, -gamma[i] * w.get(i, j));
                }
            }
        }
        a
    }

    pub fn with_population(&self, population: UserPopulation) -> Result<Self> {
        Self::new(self.network.clone(), population, self.cost.clone())
    }
}

/// True iff a_i > p_i and b_i > gamma_i for every user.
pub fn validate_assumption_1(instance: &ModelInstance, prices: &[f64]) -> bool {
    let pop = instance.population();
    prices.len() == instance.n()
        && pop
            .a()
            .iter()
            .zip(prices)
            .all(|(a, p)| a > p)
        && pop.b().iter().zip(pop.gamma()).all(|(b, g)| b > g)
}

/// Weighted Katz-Bonacich centrality (I - alpha*G)^{-1} w over the network's
/// adjacency G = W^T.
pub fn katz_bonacich(network: &Network, alpha: f64, weight_vec: &[f64]) -> Result<Vec<f64>> {
    katz_bonacich_matrix(&network.adjacency(), alpha, weight_vec)
}

/// Katz-Bonacich centrality over an explicit adjacency-like matrix. The
/// damping precondition uses the spectral norm, which upper-bounds the
/// spectral radius (exact for the symmetric canonical topologies).
pub fn katz_bonacich_matrix(g: &Matrix, alpha: f64, weight_vec: &[f64]) -> Result<Vec<f64>> {
    if alpha < 0.0 {
        return Err(Error::AlphaOutOfRange {
            alpha,
            limit: f64::INFINITY,
        });
    }
    let rho = linalg::spectral_norm(g)?;
    let limit = if rho > 0.0 { 1.0 / rho } else { f64::INFINITY };
    if alpha >= limit {
        return Err(Error::AlphaOutOfRange { alpha, limit });
    }
    let system = Matrix::identity(g.rows()).sub(&g.scale(alpha));
    linalg::solve_linear(&system, weight_vec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn swap_network() -> Network {
        build_topology(Topology::FullyConnected, 2).unwrap()
    }

    pub fn i2_instance() -> ModelInstance {
        let pop = UserPopulation::new(vec![10.0, 10.0], vec![1.0, 1.0], vec![0.5, 0.5]).unwrap();
        let cost = CostProfile::uniform(2.0, 2).unwrap();
        ModelInstance::new(swap_network(), pop, cost).unwrap()
    }

    #[test]
    fn topology_fully_connected_2() {
        let net = swap_network();
        assert_eq!(net.weights().entries(), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn topology_ring_4() {
        let net = build_topology(Topology::Ring, 4).unwrap();
        assert_eq!(net.weights().row(0), &[0.0, 0.5, 0.0, 0.5]);
        assert_eq!(net.weights().row(2), &[0.0, 0.5, 0.0, 0.5]);
        for i in 0..4 {
            let sum: f64 = net.weights().row(i).iter().sum();
            assert!((sum - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn topology_star_4() {
        let net = build_topology(Topology::Star, 4).unwrap();
        let third = 1.0 / 3.0;
        assert_eq!(net.weights().row(0), &[0.0, third, third, third]);
        assert_eq!(net.weights().row(1), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(net.weights().row(3), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn topology_invalid_sizes() {
        assert!(matches!(
            build_topology(Topology::Star, 2),
            Err(Error::InvalidSize { .. })
        ));
        assert!(matches!(
            build_topology(Topology::Ring, 2),
            Err(Error::InvalidSize { .. })
        ));
    }

    #[test]
    fn row_stochastic_and_zero_diagonal() {
        for (kind, n) in [
            (Topology::FullyConnected, 7),
            (Topology::Star, 6),
            (Topology::Ring, 9),
        ] {
            let net = build_topology(kind, n).unwrap();
            for i in 0..n {
                assert_eq!(net.weights().get(i, i), 0.0);
                let sum: f64 = net.weights().row(i).iter().sum();
                assert!((sum - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn assumption_1_cases() {
        let instance = i2_instance();
        assert!(validate_assumption_1(&instance, &[2.0, 2.0]));
        assert!(!validate_assumption_1(&instance, &[10.0, 2.0]));
        let pop = UserPopulation::new(vec![10.0, 10.0], vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
        let inst = instance.with_population(pop).unwrap();
        assert!(!validate_assumption_1(&inst, &[2.0, 2.0]));
    }

    #[test]
    fn katz_alpha_zero_is_identity() {
        let net = build_topology(Topology::Ring, 5).unwrap();
        let w = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let k = katz_bonacich(&net, 0.0, &w).unwrap();
        for (x, y) in k.iter().zip(&w) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn katz_swap_geometric_series() {
        let net = swap_network();
        let k = katz_bonacich(&net, 0.5, &[1.0, 1.0]).unwrap();
        assert!((k[0] - 2.0).abs() <= 1e-12);
        assert!((k[1] - 2.0).abs() <= 1e-12);
    }

    #[test]
    fn katz_alpha_at_radius_rejected() {
        let net = swap_network();
        assert!(matches!(
            katz_bonacich(&net, 1.0, &[1.0, 1.0]),
            Err(Error::AlphaOutOfRange { .. })
        ));
    }

    #[test]
    fn katz_fixed_point_identity() {
        let net = build_topology(Topology::Star, 6).unwrap();
        let w: Vec<f64> = (0..6).map(|i| 1.0 + i as f64).collect();
        let alpha = 0.3;
        let k = katz_bonacich(&net, alpha, &w).unwrap();
        let gk = net.adjacency().matvec(&k);
        for i in 0..6 {
            assert!((k[i] - (w[i] + alpha * gk[i])).abs() <= 1e-9);
        }
    }

    #[test]
    fn system_matrix_values() {
        let instance = i2_instance();
        let a = instance.system_matrix();
        assert_eq!(a.entries(), &[3.0, -0.5, -0.5, 3.0]);
        assert!(linalg::is_strictly_diag_dominant(&a));
        // gamma = 0 collapses to diag(2b)
        let pop = UserPopulation::new(vec![10.0, 10.0], vec![1.0, 1.5], vec![0.0, 0.0]).unwrap();
        let inst = instance.with_population(pop).unwrap();
        assert_eq!(inst.system_matrix().entries(), &[2.0, 0.0, 0.0, 3.0]);
    }

    #[test]
    fn isolated_user_requires_zero_gamma() {
        let w = Matrix::from_rows(&[&[0.0, 1.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0]]);
        let net = Network::from_weights(w, Topology::Custom).unwrap();
        assert_eq!(net.zero_rows(), &[2]);
        let pop = UserPopulation::new(vec![10.0; 3], vec![1.0; 3], vec![0.5, 0.5, 0.5]).unwrap();
        let cost = CostProfile::uniform(2.0, 3).unwrap();
        assert!(ModelInstance::new(net.clone(), pop, cost.clone()).is_err());
        let pop = UserPopulation::new(vec![10.0; 3], vec![1.0; 3], vec![0.5, 0.5, 0.0]).unwrap();
        assert!(ModelInstance::new(net, pop, cost).is_ok());
    }

    #[test]
    fn csv_round_trip() {
        let dir = std::env::temp_dir().join("peergrid-net-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("ring5.csv");
        let net = build_topology(Topology::Ring, 5).unwrap();
        net.save_csv(&path).unwrap();
        let reloaded = Network::load_csv(&path).unwrap();
        assert_eq!(reloaded.weights(), net.weights());
    }

    #[test]
    fn katz_reformulation_matches_direct_solve_on_symmetric_networks() {
        // x* = (B + 2gI)^{-1} K_{a-p}(W^T (B + 2gI)^{-1}, g) on symmetric W
        for (kind, n) in [(Topology::FullyConnected, 6), (Topology::Ring, 8)] {
            let net = build_topology(kind, n).unwrap();
            let a: Vec<f64> = (0..n).map(|i| 9.0 + 0.3 * i as f64).collect();
            let b: Vec<f64> = (0..n).map(|i| 1.0 + 0.05 * i as f64).collect();
            let gamma = 0.4;
            let pop = UserPopulation::new(a.clone(), b.clone(), vec![gamma; n]).unwrap();
            let cost = CostProfile::uniform(2.0, n).unwrap();
            let instance = ModelInstance::new(net.clone(), pop, cost).unwrap();
            let p = vec![2.0; n];

            let rhs: Vec<f64> = a.iter().zip(&p).map(|(ai, pi)| ai - pi).collect();
            let direct = linalg::solve_linear(&instance.system_matrix(), &rhs).unwrap();

            let inv_b2g = Matrix::diag(
                &b.iter()
                    .map(|bi| 1.0 / (2.0 * bi + 2.0 * gamma))
                    .collect::<Vec<_>>(),
            );
            let modified = net.adjacency().matmul(&inv_b2g);
            let k = katz_bonacich_matrix(&modified, gamma, &rhs).unwrap();
            let via_katz = inv_b2g.matvec(&k);
            for i in 0..n {
                assert!(
                    (direct[i] - via_katz[i]).abs() <= 1e-8,
                    "{kind:?} user {i}: {} vs {}",
                    direct[i],
                    via_katz[i]
                );
            }
        }
    }
}
