use osp_sdp::{
    build_instance, search_max_feasible_n, solve, KktMode, SolveOutcome, SolverConfig, Status,
};

// Optimal margins of the full system, computed independently.
const K2: [f64; 11] = [
    0.5,
    0.1111111111,
    0.0575499103,
    0.0262294145,
    0.0053475058,
    -0.0096305559,
    -0.0209159918,
    -0.0297309045,
    -0.0368092524,
    -0.0426195074,
    -0.0474751185,
];
const K3: [f64; 19] = [
    0.5,
    0.1111111111,
    0.0732233047,
    0.04,
    0.0297721325,
    0.0204081633,
    0.0162432208,
    0.0123456790,
    0.0102508563,
    0.0082644628,
    0.0070648082,
    0.0059171598,
    0.0051668122,
    0.0044444444,
    0.0039441428,
    0.0034602076,
    0.0031100440,
    0.0027700831,
    0.0025154849,
];

fn run(k: usize, n: usize, cfg: &SolverConfig) -> SolveOutcome {
    solve(&build_instance(k, n).unwrap(), cfg).unwrap()
}

fn assert_margin(k: usize, n: usize, want: f64) {
    let out = run(k, n, &SolverConfig::default());
    assert!(
        (out.margin - want).abs() <= 1e-6,
        "S({k},{n}): margin {} vs {want}",
        out.margin
    );
    let expected = if want > 0.0 {
        Status::Feasible
    } else {
        Status::Infeasible
    };
    assert_eq!(out.status, expected, "S({k},{n})");
}

#[test]
fn margins_k2() {
    for (i, &m) in K2.iter().enumerate() {
        assert_margin(2, i + 2, m);
    }
}

#[test]
fn margins_k3() {
    for (i, &m) in K3.iter().enumerate() {
        assert_margin(3, i + 2, m);
    }
    assert_margin(3, 30, 0.0011141629);
}

#[test]
fn margins_k4() {
    for (n, m) in [(3, 0.1111111), (6, 0.0297721), (9, 0.0123457)] {
        assert_margin(4, n, m);
    }
}

#[test]
fn margin_decreases_through_the_k2_frontier() {
    let cfg = SolverConfig::default();
    let m: Vec<f64> = (3..=8).map(|n| run(2, n, &cfg).margin).collect();
    assert!(m.windows(2).all(|w| w[1] <= w[0]), "{m:?}");
    assert!(m[3] >= cfg.tol_margin && m[4] <= -cfg.tol_margin);
}

#[test]
fn runs_are_deterministic() {
    for mode in [KktMode::Sparse, KktMode::Dense] {
        let cfg = SolverConfig {
            kkt_mode: mode,
            ..SolverConfig::default()
        };
        let (a, b) = (run(3, 14, &cfg), run(3, 14, &cfg));
        assert_eq!(a.iterations, b.iterations);
        assert_eq!(a.status, b.status);
        assert_eq!(a.margin.to_bits(), b.margin.to_bits());
        assert_eq!(a.blocks, b.blocks);
    }
}

#[test]
fn parallel_and_sequential_agree() {
    let par = SolverConfig::default();
    let seq = SolverConfig {
        parallel: false,
        ..par.clone()
    };
    for (k, n) in [(3, 12), (4, 8)] {
        let (a, b) = (run(k, n, &par), run(k, n, &seq));
        assert_eq!(a.iterations, b.iterations);
        assert_eq!(a.margin.to_bits(), b.margin.to_bits());
    }
}

#[test]
fn dropping_midpoint_rows_relaxes_even_instances() {
    let cfg = SolverConfig {
        midpoint_rows: false,
        ..SolverConfig::default()
    };
    for (k, n) in [(3, 6), (3, 8)] {
        let full = run(k, n, &SolverConfig::default());
        let relaxed = run(k, n, &cfg);
        assert!(relaxed.margin >= full.margin - 1e-7, "S({k},{n})");
    }
    // Odd N has no midpoint rows.
    let (a, b) = (run(3, 7, &SolverConfig::default()), run(3, 7, &cfg));
    assert_eq!(a.margin.to_bits(), b.margin.to_bits());
}

#[test]
fn iteration_limit_is_indeterminate() {
    let cfg = SolverConfig {
        max_iter: 2,
        ..SolverConfig::default()
    };
    let out = run(3, 10, &cfg);
    assert_eq!(out.status, Status::Indeterminate);
    assert!(out.message.contains("iteration limit"), "{}", out.message);
    assert!(out.blocks.is_empty());
}

#[test]
fn search_k2() {
    let cfg = SolverConfig::default();
    for speculative in [false, true] {
        let r = search_max_feasible_n(2, 2, 16, &cfg, speculative).unwrap();
        assert_eq!(r.largest_feasible, Some(6));
        assert!(r.aborted_at.is_none());
        assert!(r
            .probes
            .iter()
            .any(|p| p.n == 7 && p.status == Status::Infeasible));
    }
    let r = search_max_feasible_n(2, 8, 12, &cfg, false).unwrap();
    assert_eq!(r.largest_feasible, None);
    assert!(search_max_feasible_n(2, 9, 3, &cfg, false).is_err());
}

#[test]
#[ignore = "slow: several solves near N = 56"]
fn search_k3() {
    let r = search_max_feasible_n(3, 2, 64, &SolverConfig::default(), false).unwrap();
    assert_eq!(r.largest_feasible, Some(56));
}
