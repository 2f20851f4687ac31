use dfcnls::problems::{corpus, Family};
use dfcnls::solver::TransitionKind;
use dfcnls::{solve, DirectionMode, HessianMode, SolverConfig};
use proptest::prelude::*;

fn configs() -> Vec<SolverConfig> {
    let mut out = Vec::new();
    for jacobian in [
        DirectionMode::Coordinate,
        DirectionMode::OssFresh,
        DirectionMode::OssPool,
    ] {
        for hessian in [HessianMode::Sr1, HessianMode::Bfgs, HessianMode::Zero] {
            out.push(SolverConfig {
                jacobian,
                hessian,
                seed: 5,
                ..Default::default()
            });
        }
    }
    out
}

#[test]
fn inner_steps_respect_their_bounds() {
    let cfg_min = SolverConfig::default().lambda_min;
    let mut steps = 0;
    for entry in corpus() {
        for cfg in configs() {
            let res = solve(&entry.problem, &cfg).unwrap();
            for s in &res.inner_log {
                steps += 1;
                assert!(s.lambda >= cfg_min && s.lambda_next >= cfg_min);
                assert!(
                    s.d_norm <= (1.0 + 1e-8) / s.lambda,
                    "{}: |d| = {} > 1/λ",
                    entry.problem.name,
                    s.d_norm
                );
                if !s.accepted {
                    assert_eq!(s.lambda_next, 4.0 * s.lambda);
                }
                assert!(s.gamma > 0.0 && s.delta > 0.0);
            }
        }
    }
    assert!(steps > 100, "only {steps} inner steps exercised");
}

#[test]
fn outer_bookkeeping_invariants() {
    for entry in corpus() {
        let res = solve(&entry.problem, &SolverConfig::default()).unwrap();
        assert!(res.max_saddle_asymmetry <= 1e-14);
        let budget = 500 * (entry.problem.n as u64 + 1);
        assert!(res.fevals <= budget);
        let mut eps_prev: Option<f64> = None;
        for t in &res.transitions {
            assert!(t.delta >= 1e-6);
            assert!(t.rho >= 0.0);
            if t.kind != TransitionKind::InnerExhausted {
                assert!(t.satisfies_decrease());
            }
            if let Some(e) = eps_prev {
                assert!(t.eps <= 0.99 * e * (1.0 + 1e-12) && t.eps >= 0.9 * e * (1.0 - 1e-12));
            }
            eps_prev = Some(t.eps);
        }
        if entry.family == Family::Unconstrained {
            assert_eq!(res.y.len(), 0);
        }
    }
}

#[test]
fn fevals_match_the_trace() {
    let p = dfcnls::lookup("hs42").unwrap();
    let res = solve(&p, &SolverConfig::default()).unwrap();
    assert_eq!(res.trace.rows().last().unwrap().fevals, res.fevals);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn any_seed_is_reproducible(seed in 0u64..10_000, pool in any::<bool>()) {
        let p = dfcnls::lookup("hs27").unwrap();
        let cfg = SolverConfig {
            jacobian: if pool { DirectionMode::OssPool } else { DirectionMode::OssFresh },
            seed,
            ..Default::default()
        };
        let a = solve(&p, &cfg).unwrap();
        let b = solve(&p, &cfg).unwrap();
        prop_assert_eq!(a.trace.to_csv_string(), b.trace.to_csv_string());
        prop_assert!(a.fevals <= 2000);
    }
}
