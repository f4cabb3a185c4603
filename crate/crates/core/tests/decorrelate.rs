mod common;

use common::*;
use fairbayes::decorrelate::{
    accuracy_term, budget_vector, correlation_term, evaluate_transfer, fairness_violation, lagrangian,
    solve_decorrelation_aware, solve_decorrelation_unaware, DecorrelationConfig, Transfer,
    TransformMatrix,
};
use fairbayes::fairlp::{fair_solution, Awareness, FairnessBudget, NeighborMatrix, ScoreVector};
use fairbayes::quantizer::{views, DiscreteJoint, ProbabilityViews};
use fairbayes::synthetic::SyntheticJoint;
use rand::Rng;

fn views_of(t: &Table) -> ProbabilityViews {
    views(&DiscreteJoint::new(t.clone()).unwrap()).unwrap()
}

fn rows_of(t: &TransformMatrix) -> Vec<Vec<f64>> {
    t.to_rows()
}

/// `J'[k][g][y] = Σ_j T_g[k][j] J[j][g][y]`.
fn transformed(t: &Table, transfer: &Transfer) -> Table {
    let mats: Vec<Vec<Vec<f64>>> = transfer.matrices().into_iter().map(rows_of).collect();
    let rows = mats[0].len();
    let mut out: Table = vec![[[0.0; 2]; 2]; rows];
    for g in 0..2 {
        let m = &mats[g.min(mats.len() - 1)];
        for y in 0..2 {
            let col: Vec<f64> = t.iter().map(|c| c[g][y]).collect();
            for (k, v) in mat_vec(m, &col).into_iter().enumerate() {
                out[k][g][y] = v;
            }
        }
    }
    out
}

fn group_profile(t: &Table, g: usize) -> Vec<f64> {
    let m = group_mass(t, g);
    t.iter().map(|c| (c[g][0] + c[g][1]) / m).collect()
}

/// Oracle constraint values `[DP, EOp, PE, EA, IF...]` on the target domain.
fn oracle_values(t: &Table, transfer: &Transfer, s: &[f64], w: &NeighborMatrix) -> Vec<f64> {
    let target = transformed(t, transfer);
    let mut v = vec![dp(&target, s), eop(&target, s), pe(&target, s), ea(&target, s)];
    let mats: Vec<Vec<Vec<f64>>> = transfer.matrices().into_iter().map(rows_of).collect();
    for p in &w.pairs {
        let value = match transfer {
            Transfer::Unaware { .. } => {
                let u = vec_mat(s, &mats[0]);
                p.weight * (u[p.i] - u[p.j])
            }
            Transfer::Aware { .. } => (0..2)
                .map(|g| {
                    let u = vec_mat(s, &mats[g]);
                    let pg = group_profile(t, g);
                    p.weight * (pg[p.i] * u[p.i] - pg[p.j] * u[p.j])
                })
                .sum(),
        };
        v.push(value);
    }
    v
}

fn random_transfer(awareness: Awareness, n: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Transfer {
    let mut mat = |rows| TransformMatrix::from_rows(&random_stochastic(rows, n, rng)).unwrap();
    match awareness {
        Awareness::Unaware => Transfer::Unaware { t: mat(n) },
        Awareness::Aware => Transfer::Aware {
            t_a: mat(2 * n),
            t_b: mat(2 * n),
        },
    }
}

fn random_scores(awareness: Awareness, n: usize, rng: &mut rand_chacha::ChaCha8Rng) -> ScoreVector {
    let values = (0..awareness.score_len(n)).map(|_| rng.random()).collect();
    ScoreVector::new(awareness, values).unwrap()
}

fn neighbors(n: usize) -> NeighborMatrix {
    let pairs: Vec<_> = (1..n).map(|j| (j - 1, j, 0.1 * j as f64)).collect();
    NeighborMatrix::from_pairs(n, 1.0, &pairs).unwrap()
}

#[test]
fn terms_match_transformed_joint() {
    let mut rng = rng(11);
    for awareness in [Awareness::Unaware, Awareness::Aware] {
        for _ in 0..100 {
            let n = rng.random_range(2..=6);
            let t = random_table(n, &mut rng);
            let v = views_of(&t);
            let w = neighbors(n);
            let transfer = random_transfer(awareness, n, &mut rng);
            let s = random_scores(awareness, n, &mut rng);
            let target = transformed(&t, &transfer);

            let acc = accuracy_term(&transfer, &s, &v).unwrap();
            assert!((acc - accuracy(&target, &s.values)).abs() < 1e-12);
            assert!((0.0..=1.0).contains(&acc));

            let corr = correlation_term(&transfer, &v).unwrap();
            let diff: Vec<f64> = group_profile(&target, 0)
                .iter()
                .zip(group_profile(&target, 1))
                .map(|(a, b)| a - b)
                .collect();
            assert!((corr - l1(&diff)).abs() < 1e-12);
            assert!((0.0..=2.0 + 1e-12).contains(&corr));

            let expected = oracle_values(&t, &transfer, &s.values, &w);
            let zero = vec![0.0; 4 + w.rows()];
            let g = fairness_violation(&transfer, &s, &v, &w, &zero).unwrap();
            let m = expected.len();
            assert_eq!(g.len(), 2 * m);
            for (r, e) in expected.iter().enumerate() {
                assert!((g[r] - (-e).max(0.0)).abs() < 1e-9, "row {r}");
                assert!((g[m + r] - e.max(0.0)).abs() < 1e-9, "row {r}");
            }
        }
    }
}

#[test]
fn identity_and_collapse_examples() {
    let t: Table = vec![[[0.1, 0.2], [0.05, 0.15]], [[0.2, 0.1], [0.1, 0.1]]];
    let v = views_of(&t);
    let s = ScoreVector::new(Awareness::Unaware, vec![1.0, 0.0]).unwrap();
    let id = Transfer::identity(Awareness::Unaware, 2);
    assert!((accuracy_term(&id, &s, &v).unwrap() - accuracy(&t, &s.values)).abs() < 1e-12);
    let baseline: f64 = l1(&group_profile(&t, 0)
        .iter()
        .zip(group_profile(&t, 1))
        .map(|(a, b)| a - b)
        .collect::<Vec<_>>());
    assert!((correlation_term(&id, &v).unwrap() - baseline).abs() < 1e-12);

    // every column sends its mass to cell 0, where s = 1
    let collapse = Transfer::Unaware {
        t: TransformMatrix::constant_columns(&[1.0, 0.0], 2).unwrap(),
    };
    let p1 = group_label_mass(&t, 0, 1) + group_label_mass(&t, 1, 1);
    assert!((accuracy_term(&collapse, &s, &v).unwrap() - p1).abs() < 1e-12);
    assert_eq!(correlation_term(&collapse, &v).unwrap(), 0.0);

    let w = NeighborMatrix::empty(2);
    let f = budget_vector(&FairnessBudget::inactive().with_dp(0.0), 0);
    let r = evaluate_transfer(&id, &s, &v, &w, &f).unwrap();
    assert_eq!((r.correlation_reduction, r.acc_reduction), (0.0, 0.0));
    let r = evaluate_transfer(&collapse, &s, &v, &w, &f).unwrap();
    assert!((r.correlation_reduction - r.baseline_correlation).abs() < 1e-12);
}

#[test]
fn disjoint_groups_have_maximal_correlation() {
    let t: Table = vec![[[0.3, 0.2], [0.0, 0.0]], [[0.0, 0.0], [0.1, 0.4]]];
    let v = views_of(&t);
    let unaware = Transfer::identity(Awareness::Unaware, 2);
    assert!((correlation_term(&unaware, &v).unwrap() - 2.0).abs() < 1e-12);
    // the per-group representation is disjoint for any joint
    let t = random_table(2, &mut rng(3));
    let aware = Transfer::identity(Awareness::Aware, 2);
    assert!((correlation_term(&aware, &views_of(&t)).unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn inherited_and_slack_budgets_give_zero_violation() {
    let mut rng = rng(12);
    for awareness in [Awareness::Unaware, Awareness::Aware] {
        let n = 5;
        let t = random_table(n, &mut rng);
        let v = views_of(&t);
        let w = neighbors(n);
        let s = random_scores(awareness, n, &mut rng);
        let id = Transfer::identity(awareness, n);
        let attained: Vec<f64> = oracle_values(&t, &id, &s.values, &w).iter().map(|x| x.abs()).collect();
        let g = fairness_violation(&id, &s, &v, &w, &attained).unwrap();
        assert!(g.iter().all(|x| *x <= 1e-15), "{g:?}");
        let any = random_transfer(awareness, n, &mut rng);
        let g = fairness_violation(&any, &s, &v, &w, &vec![10.0; 4 + w.rows()]).unwrap();
        assert!(g.iter().all(|x| *x == 0.0));
    }
}

#[test]
fn lagrangian_penalty_behaviour() {
    let mut rng = rng(13);
    let n = 4;
    let t = random_table(n, &mut rng);
    let v = views_of(&t);
    let w = NeighborMatrix::empty(n);
    let s = random_scores(Awareness::Unaware, n, &mut rng);
    let transfer = random_transfer(Awareness::Unaware, n, &mut rng);
    let loose = DecorrelationConfig {
        budget: FairnessBudget::inactive().with_dp(10.0).with_ea(10.0),
        tau: 1e-12,
        ..DecorrelationConfig::default()
    };
    let rho = vec![0.0; 8];
    let plain = -loose.lambda * accuracy_term(&transfer, &s, &v).unwrap()
        + loose.beta * correlation_term(&transfer, &v).unwrap();
    let l = lagrangian(&transfer, &rho, &loose, &s, &v, &w).unwrap();
    assert!((l - plain).abs() < 1e-12);

    let rho = vec![1.0; 8];
    let tight = DecorrelationConfig {
        budget: FairnessBudget::inactive().with_dp(0.0).with_ea(0.0),
        ..DecorrelationConfig::default()
    };
    let loose = DecorrelationConfig { tau: 10.0, ..loose };
    let lt = lagrangian(&transfer, &rho, &tight, &s, &v, &w).unwrap();
    let ll = lagrangian(&transfer, &rho, &loose, &s, &v, &w).unwrap();
    assert!(lt > ll);
    assert!(lagrangian(&transfer, &[0.0; 3], &tight, &s, &v, &w).is_err());
}

fn assert_stochastic(out: &Transfer) {
    for m in out.matrices() {
        m.check_stochastic(1e-9).unwrap();
    }
}

#[test]
fn unaware_identical_groups_keep_accuracy() {
    let cell = |p1: f64, p0: f64| [[p0, p1], [p0, p1]];
    let t: Table = vec![cell(0.1, 0.05), cell(0.05, 0.1), cell(0.12, 0.08)];
    let v = views_of(&t);
    let w = NeighborMatrix::empty(3);
    let budget = FairnessBudget::inactive().with_dp(0.0);
    let fair = fair_solution(&v, &budget, Awareness::Unaware, &w).unwrap();
    let config = DecorrelationConfig {
        budget,
        ..DecorrelationConfig::default()
    };
    let out = solve_decorrelation_unaware(&fair.s_fair, &v, &w, &config).unwrap();
    assert_stochastic(&out.transfer);
    assert!(out.report.baseline_correlation.abs() < 1e-12);
    assert!(out.report.final_correlation < 1e-9);
    assert!((out.report.acc_after - fair.acc_fair).abs() < 1e-3);
}

#[test]
fn heavy_correlation_weight_collapses_columns() {
    let joint = SyntheticJoint::new(6, 0.7, 21).build().unwrap();
    let v = views(&joint).unwrap();
    let w = NeighborMatrix::empty(6);
    let fair = fair_solution(&v, &FairnessBudget::inactive(), Awareness::Unaware, &w).unwrap();
    let config = DecorrelationConfig {
        lambda: 1.0,
        beta: 100.0,
        budget: FairnessBudget::inactive().with_dp(10.0).with_ea(10.0),
        ..DecorrelationConfig::default()
    };
    let out = solve_decorrelation_unaware(&fair.s_fair, &v, &w, &config).unwrap();
    assert!(out.report.final_correlation <= 1e-2, "{:?}", out.report);
}

#[test]
fn unaware_dp_budget_is_kept() {
    let joint = SyntheticJoint::new(8, 0.6, 22).build().unwrap();
    let t = joint.probabilities.clone();
    let v = views(&joint).unwrap();
    let w = NeighborMatrix::empty(8);
    let budget = FairnessBudget::inactive().with_dp(0.05);
    let fair = fair_solution(&v, &budget, Awareness::Unaware, &w).unwrap();
    let config = DecorrelationConfig {
        budget,
        ..DecorrelationConfig::default()
    };
    let out = solve_decorrelation_unaware(&fair.s_fair, &v, &w, &config).unwrap();
    assert_stochastic(&out.transfer);
    let r = &out.report;
    assert!(r.max_violation <= 1e-3, "{r:?}");
    assert!(r.final_correlation < r.baseline_correlation);
    assert!((r.correlation_reduction - (r.baseline_correlation - r.final_correlation)).abs() < 1e-15);
    assert!(out.multipliers.rho.iter().all(|x| *x >= 0.0));
    let target = transformed(&t, &out.transfer);
    assert!(dp(&target, &fair.s_fair.values).abs() <= 0.05 + 1e-3);
}

#[test]
fn aware_identical_groups_share_one_block() {
    let cell = |p1: f64, p0: f64| [[p0, p1], [p0, p1]];
    let t: Table = vec![cell(0.1, 0.05), cell(0.05, 0.1), cell(0.12, 0.08)];
    let v = views_of(&t);
    let shared = Transfer::Aware {
        t_a: TransformMatrix::stacked_identity(6, 3, 0),
        t_b: TransformMatrix::stacked_identity(6, 3, 0),
    };
    assert_eq!(correlation_term(&shared, &v).unwrap(), 0.0);

    let w = NeighborMatrix::empty(3);
    let budget = FairnessBudget::inactive().with_dp(0.0);
    let fair = fair_solution(&v, &budget, Awareness::Aware, &w).unwrap();
    let config = DecorrelationConfig {
        budget,
        ..DecorrelationConfig::default()
    };
    let out = solve_decorrelation_aware(&fair.s_fair, &v, &w, &config).unwrap();
    assert_stochastic(&out.transfer);
    assert!((out.report.baseline_correlation - 2.0).abs() < 1e-12);
    assert!(out.report.final_correlation < 1e-2, "{:?}", out.report);
    assert!(out.report.max_violation <= 1e-3);
}

#[test]
fn aware_disjoint_supports_decorrelate() {
    let t: Table = vec![
        [[0.1, 0.15], [0.0, 0.0]],
        [[0.15, 0.1], [0.0, 0.0]],
        [[0.0, 0.0], [0.2, 0.05]],
        [[0.0, 0.0], [0.05, 0.2]],
    ];
    let v = views_of(&t);
    let w = NeighborMatrix::empty(4);
    let fair = fair_solution(&v, &FairnessBudget::inactive(), Awareness::Aware, &w).unwrap();
    let config = DecorrelationConfig {
        budget: FairnessBudget::inactive().with_dp(10.0).with_ea(10.0),
        ..DecorrelationConfig::default()
    };
    let out = solve_decorrelation_aware(&fair.s_fair, &v, &w, &config).unwrap();
    assert_stochastic(&out.transfer);
    assert!(out.report.final_correlation < 1e-2, "{:?}", out.report);
}

#[test]
fn transfer_documents_round_trip() {
    let out = Transfer::identity(Awareness::Aware, 3);
    let json = serde_json::to_string(&out).unwrap();
    assert!(json.contains("\"awareness\":\"aware\""));
    let back: Transfer = serde_json::from_str(&json).unwrap();
    assert_eq!(back, out);
}
