use bhedge::accounting::{CostSpec, Exercise, Payoff};
use bhedge::engine::{evaluate_out_of_sample, solve, solve_node, solve_surface, NodeState};
use bhedge::grid::{parse_policy, write_policy};
use bhedge::model::{build_variance_tree, simulate_paths, MarketState, Purpose, StreamId};
use bhedge::risk::RiskSpec;
use bhedge::Config;

fn small(risk: RiskSpec<f64>, exercise: Exercise, rate: f64, n: usize) -> Config {
    let mut c = Config::reference(rate, risk, exercise, n, 400);
    c.n_sim_steps = 8;
    c.m_quantile = 4000;
    c.m_out_of_sample = 4000;
    c.n_s = 5;
    c
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn linear_payoff_is_replicated() {
    for n in [2, 4] {
        let mut c = small(RiskSpec::Mse, Exercise::European, 0.0, n);
        c.option.payoff = Payoff::Spot;
        let out = solve(&c).unwrap();
        let s0 = c.params.s0;
        assert!((out.price - s0).abs() <= 1e-3 * s0, "price {}", out.price);
        let var = out.diagnostics.out_of_sample.std_dev.powi(2);
        assert!(var < 1e-10 * s0 * s0, "residual variance {var}");
        assert!((out.initial_deltas[0] - 1.0).abs() < 1e-6);
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let mut costly = small(RiskSpec::Cvar { tail_fraction: 0.05 }, Exercise::American, 0.1, 2);
    costly.cost = CostSpec::uniform(0.01);
    costly.m_backward = 200;
    for cfg in [small(RiskSpec::Mse, Exercise::European, 0.0, 4), costly] {
        let a = in_pool(1, || solve(&cfg).unwrap());
        let b = in_pool(4, || solve(&cfg).unwrap());
        assert_eq!(a.price.to_bits(), b.price.to_bits());
        assert_eq!(write_policy(&a.policy), write_policy(&b.policy));
    }
}

#[test]
fn policy_file_reprices_identically() {
    let cfg = small(RiskSpec::Cvar { tail_fraction: 0.05 }, Exercise::American, 0.1, 2);
    let out = solve(&cfg).unwrap();
    let text = write_policy(&out.policy);
    let back = parse_policy::<f64>(&text).unwrap();
    assert_eq!(back, out.policy);
    let again = evaluate_out_of_sample(&back, &cfg, cfg.m_out_of_sample).unwrap();
    assert_eq!(again.price.to_bits(), out.price.to_bits());
}

#[test]
fn costs_raise_the_price() {
    for risk in [RiskSpec::Mse, RiskSpec::Cvar { tail_fraction: 0.05 }] {
        let free = small(risk, Exercise::European, 0.0, 2);
        let mut costly = free.clone();
        costly.cost = CostSpec::uniform(0.01);
        let a = solve(&free).unwrap();
        let b = solve(&costly).unwrap();
        assert!(b.price > a.price, "{risk:?}: {} vs {}", b.price, a.price);
    }
}

#[test]
fn american_put_is_worth_at_least_european() {
    let eu = solve(&small(RiskSpec::Mse, Exercise::European, 0.1, 4)).unwrap();
    let am = solve(&small(RiskSpec::Mse, Exercise::American, 0.1, 4)).unwrap();
    assert!(am.price > eu.price);
    let t = am.diagnostics.mean_exercise_time.unwrap();
    assert!(t > 0.0 && t <= 1.0);
    assert!(eu.diagnostics.mean_exercise_time.is_none());
}

#[test]
fn last_date_node_hedges_a_linear_payoff() {
    let mut cfg = small(RiskSpec::Mse, Exercise::European, 0.0, 2);
    cfg.option.payoff = Payoff::Spot;
    let tree = build_variance_tree(&cfg.params, cfg.n_sim_steps).unwrap();
    let state = MarketState { step_index: 1, s: 95.0, i: 0.02, v: 0.04 };
    let bundle = simulate_paths(&cfg.params, &tree, &state, 2, 500, StreamId::new(3, Purpose::Test, 1, 0)).unwrap();
    let node = NodeState {
        step: 1,
        s: 95.0,
        i: 0.02,
        v_node: tree.find(4, 0.04).unwrap(),
        prevs: Vec::new(),
    };
    let sol = solve_node(&cfg, &[], &node, &bundle, [0.0, 0.0]).unwrap();
    assert_eq!(sol.len(), 1);
    assert!((sol[0].delta[0] - 1.0).abs() < 1e-6 && sol[0].delta[1].abs() < 1e-4);
}

#[test]
fn surface_slice_needs_costs_and_an_inner_date() {
    let cfg = small(RiskSpec::Cvar { tail_fraction: 0.05 }, Exercise::American, 0.0, 2);
    let prior = solve(&cfg).unwrap();
    assert!(solve_surface(&cfg, &prior, 1, (100.0, 0.02, 0.04)).is_err());
    let mut costly = cfg.clone();
    costly.cost = CostSpec::uniform(0.01);
    costly.m_backward = 200;
    assert!(solve_surface(&costly, &prior, 0, (100.0, 0.0, 0.04)).is_err());
    let (_, s) = solve_surface(&costly, &prior, 1, (100.0, 0.02, 0.04)).unwrap();
    assert_eq!((s.prev1.len(), s.prev2.len()), (3, 3));
    assert!(s.delta1.iter().flatten().all(|x| x.is_finite()));
}
