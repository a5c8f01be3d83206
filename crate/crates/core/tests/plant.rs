use resilience_core::analyze::{
    self, almost_sure_reach, brute_force_optimum, cost_bounded_reach, expected_total_reward, induce_chain, mp_values,
    until_probability, verify_resilient, SimulationConfig,
};
use resilience_core::components::build_weights;
use resilience_core::mdp::MrScheduler;
use resilience_core::model::fixtures::plant_model;
use resilience_core::rational::{int, rat};
use resilience_core::synth::{self, goal_scheduler, FiniteMemoryScheduler, Memory};
use resilience_core::transform::TState;
use resilience_core::{Rational, TransformedMdp};

fn always(mt: &TransformedMdp, label: &str) -> MrScheduler {
    let mut s = MrScheduler::empty(mt.len());
    for i in 0..mt.len() {
        s.set_dirac(i, mt.mdp().choice_by_label(i, label).unwrap_or(0));
    }
    s
}

#[test]
fn beta_always_chain() {
    let mt = TransformedMdp::new(&plant_model(), 2);
    let beta = always(&mt, "beta");
    let chain = induce_chain(mt.mdp(), &beta, mt.initial()).unwrap();
    assert_eq!(chain.len(), 9);
    assert!(!chain.contains(mt.index_of_id("op1").unwrap()));

    let e = chain.index_of(mt.index_of_id("error").unwrap()).unwrap();
    let err = mt.base().index_of("error").unwrap();
    let stay = chain.mask(|h| mt.is_repair_copy(h) && !mt.is_op(h));
    let target = chain.mask(|h| mt.is_op_of(h, err));
    let until = until_probability(&chain, &stay, &target);
    let one_step: Rational = chain.rows[e].iter().map(|(t, p)| p * &until[*t]).sum();
    assert_eq!(one_step, rat(3, 4));

    let op = chain.mask(|h| mt.is_op(h));
    assert!(almost_sure_reach(&chain, &op)[e]);

    let mp = mp_values(&chain, &build_weights(&mt, &rat(4, 5)));
    assert!(mp.values().all(|v| *v == int(0)));
    let payoff: Vec<Rational> = (0..mt.len()).map(|s| int(mt.payoff(s) as i64)).collect();
    assert_eq!(analyze::availability(&chain, &payoff), int(1));
}

#[test]
fn verification_examples() {
    let mt = TransformedMdp::new(&plant_model(), 2);
    let beta = verify_resilient(&mt, &always(&mt, "beta"), &rat(4, 5)).unwrap();
    assert!(!beta.ok);
    assert_eq!(beta.errors[0].res_probability, rat(3, 4));
    assert!(beta.errors[0].as_rep_ok);

    let alpha = verify_resilient(&mt, &always(&mt, "alpha"), &int(1)).unwrap();
    assert!(alpha.ok);
    assert_eq!(alpha.availability, int(0));

    let partial = MrScheduler::empty(mt.len());
    assert!(verify_resilient(&mt, &partial, &int(1)).is_err());
}

#[test]
fn beta_always_family() {
    for r in 1..=4u64 {
        let mt = TransformedMdp::new(&plant_model(), r);
        let edge = int(1) - rat(1, 1 << r);
        let beta = always(&mt, "beta");
        assert!(verify_resilient(&mt, &beta, &edge).unwrap().ok, "R={r}");
        assert!(
            !verify_resilient(&mt, &beta, &(edge + rat(1, 100))).unwrap().ok,
            "R={r}"
        );
    }
}

#[test]
fn optimum_scheduler_details() {
    let s = synth::synthesize(&plant_model(), &rat(4, 5), 2).unwrap();
    let sched = s.scheduler().unwrap();
    let report = s.report.as_ref().unwrap();
    assert!(report.ok);
    assert_eq!(report.errors[0].res_probability, rat(4, 5));
    assert_eq!(report.availability, rat(9, 10));

    // independent bounded-reach computation on the original model
    let m = plant_model();
    let err = m.index_of("error").unwrap();
    let p = cost_bounded_reach(&m, &sched.rendered, (err, Memory::Idle), 2).unwrap();
    assert_eq!(p, rat(4, 5));

    // total reward in the goal MDP under the LP scheduler
    let rn = goal_scheduler(&s.goal, &s.program, &s.solution);
    assert_eq!(expected_total_reward(&s.goal, &rn, 0).unwrap(), rat(9, 10));
    assert_eq!(expected_total_reward(&s.goal, &rn, s.goal.goal).unwrap(), int(0));
    for (k, &g) in s.goal.goal_of.iter().enumerate() {
        assert_eq!(
            expected_total_reward(&s.goal, &rn, g).unwrap(),
            s.components.triples[k].availability
        );
    }
}

#[test]
fn memory_levels() {
    let s = synth::synthesize(&plant_model(), &rat(4, 5), 2).unwrap();
    let r = &s.scheduler().unwrap().rendered;
    let m = plant_model();
    let err = m.index_of("error").unwrap();
    let levels: Vec<u64> = r
        .repair_memories()
        .into_iter()
        .map(|mem| match mem {
            Memory::Repair { error, cost } => {
                assert_eq!(error, err);
                cost
            }
            Memory::Idle => unreachable!(),
        })
        .collect();
    assert_eq!(levels, vec![0, 1, 2]);
    let rep = m.index_of("rep").unwrap();
    let beta = m.mdp().choice_by_label(rep, "beta").unwrap();
    let d = r.decide(rep, Memory::Repair { error: err, cost: 1 }).unwrap();
    assert_eq!(d.iter().find(|(a, _)| *a == beta).unwrap().1, rat(4, 5));
}

#[test]
fn oracle_values() {
    let mt = TransformedMdp::new(&plant_model(), 2);
    assert_eq!(brute_force_optimum(&mt, &int(1), 1).unwrap().best, Some(rat(1, 2)));
    assert_eq!(brute_force_optimum(&mt, &rat(3, 4), 1).unwrap().best, Some(int(1)));
    let grid = brute_force_optimum(&mt, &rat(4, 5), 20).unwrap();
    assert_eq!(grid.best, Some(rat(9, 10)));
}

#[test]
fn oracle_matches_synthesis_on_grid() {
    for (p, r) in [(rat(4, 5), 2), (rat(1, 2), 1), (rat(2, 3), 2), (int(1), 1)] {
        let mt = TransformedMdp::new(&plant_model(), r);
        let best = brute_force_optimum(&mt, &p, 5).unwrap().best;
        let s = synth::synthesize(&plant_model(), &p, r).unwrap();
        let got = s.availability().cloned();
        // the grid can only find values at most the true optimum
        match (best, got) {
            (Some(b), Some(g)) => assert!(g >= b, "p={p} r={r}: {g} < {b}"),
            (None, _) => {}
            (Some(b), None) => panic!("oracle found {b} but synthesis found nothing"),
        }
    }
}

#[test]
fn rendering_round_trip() {
    let mt = TransformedMdp::new(&plant_model(), 2);
    let beta = always(&mt, "beta");
    let fm = FiniteMemoryScheduler::from_memoryless(&mt, &beta);
    assert_eq!(fm.to_memoryless(&mt), beta);
    for i in 0..mt.len() {
        let (s, mem) = Memory::of(mt.state(i));
        assert_eq!(Memory::to_state(s, mem), mt.state(i));
    }
    assert_eq!(Memory::of(TState::Base(3)), (3, Memory::Idle));
}

#[test]
fn simulation_is_reproducible() {
    let s = synth::synthesize(&plant_model(), &rat(4, 5), 2).unwrap();
    let m = plant_model();
    let cfg = SimulationConfig {
        steps: 2_000,
        trials: 8,
        seed: 7,
        trace: 5,
    };
    let a = analyze::simulate(&m, &s.scheduler().unwrap().rendered, &cfg).unwrap();
    let b = analyze::simulate(&m, &s.scheduler().unwrap().rendered, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.trials[0].trace.len(), 5);
    assert_eq!(a.trials[0].trace[0], (m.initial(), Memory::Idle));
    let empty = analyze::simulate(
        &m,
        &s.scheduler().unwrap().rendered,
        &SimulationConfig { trials: 0, ..cfg },
    )
    .unwrap();
    assert!(empty.trials.is_empty());
    assert_eq!(empty.mean_availability, None);
}

#[test]
fn simulation_converges() {
    // Every trial settles in op1 (payoff 0) or op2 (payoff 1), so per-trial
    // means are close to Bernoulli(9/10) draws; many trials are needed.
    let s = synth::synthesize(&plant_model(), &rat(4, 5), 2).unwrap();
    let m = plant_model();
    let cfg = SimulationConfig {
        steps: 2_000,
        trials: 4_000,
        seed: 2024,
        trace: 0,
    };
    let stats = analyze::simulate(&m, &s.scheduler().unwrap().rendered, &cfg).unwrap();
    let mean = stats.mean_availability.unwrap();
    assert!((mean - 0.9).abs() < 0.02, "{mean}");
    let rate = stats.repair_success_rate.unwrap();
    assert!((rate - 0.8).abs() < 0.03, "{rate}");
}
