//! Full-scale simulation acceptance checks. Each test runs one study at its
//! default configuration and prints a single PASS/FAIL line.

use peergrid::experiments::{
    run_mismatch_study, run_pricing_comparison, run_selection_study, sample_population, trial_rng,
    ExperimentConfig, Study,
};
use peergrid::linalg::{sym_eigenvalues, Matrix};
use peergrid::net::Topology;

fn finish(label: &str, failures: Vec<String>) {
    if failures.is_empty() {
        println!("ACCEPTANCE {label}: PASS");
    } else {
        println!("ACCEPTANCE {label}: FAIL");
        panic!("{label} failed:\n{}", failures.join("\n"));
    }
}

#[test]
fn criterion_1_pricing_comparison() {
    let config = ExperimentConfig::defaults(Study::Pricing);
    let table = run_pricing_comparison(&config).expect("pricing study");
    let mut failures = Vec::new();

    for row in &table.rows {
        if !(row.profit_ppd >= row.profit_uniform && row.profit_uniform >= row.profit_incomplete) {
            failures.push(format!(
                "gamma {}: profit ordering violated ({} / {} / {})",
                row.gamma, row.profit_ppd, row.profit_uniform, row.profit_incomplete
            ));
        }
        let gap = (row.price_uniform - row.price_incomplete) / row.price_uniform;
        if !(gap < 0.01) {
            failures.push(format!(
                "gamma {}: price gap {:.4}% not under 1%",
                row.gamma,
                100.0 * gap
            ));
        }
    }

    let mean = |f: fn(&peergrid::experiments::PricingRow) -> f64| {
        table.rows.iter().map(f).sum::<f64>() / table.rows.len() as f64
    };
    let peak_ppd = mean(|r| r.max_x_ppd);
    for (name, peak_single) in [
        ("uniform", mean(|r| r.max_x_uniform)),
        ("incomplete", mean(|r| r.max_x_incomplete)),
    ] {
        let reduction = 1.0 - peak_ppd / peak_single;
        if !(0.25..=0.35).contains(&reduction) {
            failures.push(format!(
                "peak reduction vs {name} price is {:.1}%, outside 25-35%",
                100.0 * reduction
            ));
        }
    }

    finish("1 (pricing comparison)", failures);
}

#[test]
fn criterion_2_selection_study() {
    let mut failures = Vec::new();
    for (topology, s_m_floor) in [
        (Topology::Ring, 70.0),
        (Topology::Star, 77.0),
        (Topology::FullyConnected, 85.0),
    ] {
        let mut config = ExperimentConfig::defaults(Study::Selection);
        config.topology = topology;
        let table = run_selection_study(&config).expect("selection study");
        let name = format!("{topology:?}");
        let baseline = table.rows[0].mean_profit_exact;

        for row in &table.rows {
            if matches!(row.m, 2..=4) {
                let lift = 100.0 * (row.mean_profit_exact - baseline) / baseline;
                if !(0.5..=1.5).contains(&lift) {
                    failures.push(format!(
                        "{name}: m={} exact profit lift {:.2}% outside 0.5-1.5%",
                        row.m, lift
                    ));
                }
            }
            if let Some(s_m) = row.s_m {
                if s_m < s_m_floor {
                    failures.push(format!(
                        "{name}: S_m at m={} is {:.1}%, below floor {s_m_floor}%",
                        row.m, s_m
                    ));
                }
            }
            if row.pct_optimal <= 22.0 {
                failures.push(format!(
                    "{name}: heuristic optimal rate at m={} is {:.1}%, not above 22%",
                    row.m, row.pct_optimal
                ));
            }
        }

        let best = table
            .rows
            .iter()
            .max_by(|a, b| a.mean_profit_exact.total_cmp(&b.mean_profit_exact))
            .unwrap();
        let peak_drop = 100.0 * (1.0 - best.mean_max_x_exact / table.rows[0].mean_max_x_exact);
        if !(3.0..=5.0).contains(&peak_drop) {
            failures.push(format!(
                "{name}: peak consumption drop at optimal m={} is {:.2}%, outside 3-5%",
                best.m, peak_drop
            ));
        }
    }
    finish("2 (selection study)", failures);
}

#[test]
fn criterion_3_mismatch_study() {
    let config = ExperimentConfig::defaults(Study::Mismatch);
    let table = run_mismatch_study(&config).expect("mismatch study");
    let mut failures = Vec::new();

    // independent eigenvalue check of the perfect-estimate stratum: rebuild
    // the seeded population and the true coupling matrix
    let mut setup_rng = trial_rng(config.seed, 0);
    let mut subset: Vec<usize> = rand::seq::index::sample(&mut setup_rng, config.n, config.subnet_size)
        .iter()
        .collect();
    subset.sort_unstable();
    assert_eq!(subset, table.true_subset);
    let pop = sample_population(&mut setup_rng, &config.dist, config.n, config.gamma);
    let mut m = Matrix::zeros(config.n, config.n);
    let weight = 1.0 / (config.subnet_size - 1) as f64;
    for i in 0..config.n {
        m.set(i, i, config.c_scalar + 2.0 * pop.b()[i] + 2.0 * config.gamma);
    }
    for &i in &subset {
        for &j in &subset {
            if i != j {
                m.set(i, j, -config.gamma * weight);
            }
        }
    }
    let eigs = sym_eigenvalues(&m).expect("eigenvalues");
    let (lo, hi) = (eigs[0], eigs[eigs.len() - 1]);

    let last = table.rows.last().unwrap();
    if last.mean_norm_gap != 0.0 {
        failures.push(format!("k=12 norm gap {} is not exactly 0", last.mean_norm_gap));
    }
    if (last.mean_bound - lo / hi).abs() > 1e-9 {
        failures.push(format!(
            "k=12 bound {} differs from eigenvalue ratio {}",
            last.mean_bound,
            lo / hi
        ));
    }

    // permutation symmetry makes every k=0 estimate the same distance from
    // the truth as every k=1 estimate's complement, so the mean gap is flat
    // (exactly 1.0) at k=0; strict monotonicity starts at k=1
    if table.rows[0].mean_norm_gap != 1.0 {
        failures.push(format!(
            "k=0 mean gap {} is not the disjoint-support value 1.0",
            table.rows[0].mean_norm_gap
        ));
    }
    for pair in table.rows[1..].windows(2) {
        if !(pair[1].mean_norm_gap < pair[0].mean_norm_gap) {
            failures.push(format!(
                "mean gap not strictly decreasing at k={}",
                pair[1].correct_count
            ));
        }
        if !(pair[1].mean_bound > pair[0].mean_bound) {
            failures.push(format!(
                "mean bound not strictly increasing at k={}",
                pair[1].correct_count
            ));
        }
    }

    finish("3 (network mismatch)", failures);
}
