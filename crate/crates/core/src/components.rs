//! End components with locally optimal average-resilient schedulers.
//!
//! [`compute_e`] repeatedly solves a multi-mean-payoff LP on a shrinking
//! sub-MDP, extracts the bottom components of the recurrent support, and
//! prunes them until nothing is left.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::{One, Zero};

use crate::analyze::chain::{induce_chain, long_run_average_from};
use crate::graph;
use crate::lp::{self, LinearProgram, LpError, LpSolution, LpStatus, Objective, Relation};
pub use crate::mdp::MrScheduler;
use crate::mdp::{Mdp, SubMdp};
use crate::rational::{int, Rational};
use crate::transform::{TState, TransformedMdp};

/// Per-error weight vectors over the states of the transformed model, keyed
/// by the index of the error state.
pub type Weights = BTreeMap<usize, Vec<Rational>>;

pub fn build_weights(mt: &TransformedMdp, threshold: &Rational) -> Weights {
    let base = mt.base();
    let bound = mt.cost_bound();
    let mut out = Weights::new();
    for e in mt.errors() {
        let be = mt.base_state(e);
        let mut w = vec![Rational::zero(); mt.len()];
        if base.cost(be) > bound {
            // no tracked repair can start: every visit is a failed repair
            w[e] = -threshold.clone();
        }
        for (i, wi) in w.iter_mut().enumerate() {
            if let TState::Repair { error, state, cost } = mt.state(i) {
                if error != be {
                    continue;
                }
                if base.is_op(state) {
                    *wi = Rational::one() - threshold;
                } else if cost + base.cost(state) > bound {
                    *wi = -threshold.clone();
                }
            }
        }
        out.insert(e, w);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EndComponent {
    pub states: Vec<usize>,
    /// Enabled choice indices per state, all staying inside.
    pub actions: BTreeMap<usize, Vec<usize>>,
}

impl EndComponent {
    pub fn contains(&self, s: usize) -> bool {
        self.states.binary_search(&s).is_ok()
    }
}

/// Maximal end components of `q`, ordered by smallest state.
pub fn mec_decomposition(host: &Mdp, q: &SubMdp) -> Vec<EndComponent> {
    let n = host.len();
    let mut alive = q.alive.clone();
    let mut enabled = q.enabled.clone();
    for s in 0..n {
        for a in 0..enabled[s].len() {
            if enabled[s][a] && (!alive[s] || host.choices[s][a].targets().any(|t| !alive[t])) {
                enabled[s][a] = false;
            }
        }
    }
    loop {
        let adj = adjacency(host, &alive, &enabled);
        let comps = graph::sccs(&adj, &alive);
        let mut comp_of = vec![usize::MAX; n];
        for (k, c) in comps.iter().enumerate() {
            for &s in c {
                comp_of[s] = k;
            }
        }
        let mut changed = false;
        for s in 0..n {
            if !alive[s] {
                continue;
            }
            for a in 0..enabled[s].len() {
                if enabled[s][a]
                    && host.choices[s][a]
                        .targets()
                        .any(|t| !alive[t] || comp_of[t] != comp_of[s])
                {
                    enabled[s][a] = false;
                    changed = true;
                }
            }
            if !enabled[s].iter().any(|&e| e) {
                alive[s] = false;
                changed = true;
            }
        }
        if !changed {
            let mut out: Vec<EndComponent> = comps
                .into_iter()
                .filter(|c| c.iter().all(|&s| alive[s]))
                .map(|mut c| {
                    c.sort_unstable();
                    let actions = c
                        .iter()
                        .map(|&s| (s, (0..enabled[s].len()).filter(|&a| enabled[s][a]).collect()))
                        .collect();
                    EndComponent { states: c, actions }
                })
                .collect();
            out.sort_by_key(|c| c.states[0]);
            return out;
        }
    }
}

fn adjacency(host: &Mdp, alive: &[bool], enabled: &[Vec<bool>]) -> Vec<Vec<usize>> {
    (0..host.len())
        .map(|s| {
            if !alive[s] {
                return Vec::new();
            }
            let mut t: Vec<usize> = (0..enabled[s].len())
                .filter(|&a| enabled[s][a])
                .flat_map(|a| host.choices[s][a].targets())
                .collect();
            t.sort_unstable();
            t.dedup();
            t
        })
        .collect()
}

/// The multi-mean-payoff program together with its variable layout.
#[derive(Debug, Clone)]
pub struct MultiMpLp {
    pub program: LinearProgram,
    pub init: usize,
    /// `y[s,a]`
    pub transient: BTreeMap<(usize, usize), usize>,
    /// `ys[s]`, only for states inside some MEC
    pub switch: BTreeMap<usize, usize>,
    /// `x[s,a]`, only for actions of some MEC
    pub recurrent: BTreeMap<(usize, usize), usize>,
    pub mecs: Vec<EndComponent>,
}

pub fn build_multi_mp_lp(mt: &TransformedMdp, q: &SubMdp, init: usize, weights: &Weights) -> MultiMpLp {
    let host = mt.mdp();
    let mecs = mec_decomposition(host, q);
    let mut program = LinearProgram::new(lp::Direction::Maximize);
    let mut transient = BTreeMap::new();
    let mut switch = BTreeMap::new();
    let mut recurrent = BTreeMap::new();
    let label = |s: usize, a: usize| -> String { host.choices[s][a].label.clone() };

    for s in q.states() {
        for a in q.enabled_choices(s) {
            let v = program.add_nonneg(lp::var_name("y", &[&mt.id(s), &label(s, a)]));
            transient.insert((s, a), v);
        }
    }
    for c in &mecs {
        for &s in &c.states {
            let v = program.add_nonneg(lp::var_name("ys", &[&mt.id(s)]));
            switch.insert(s, v);
        }
    }
    for c in &mecs {
        for (&s, acts) in &c.actions {
            for &a in acts {
                let v = program.add_nonneg(lp::var_name("x", &[&mt.id(s), &label(s, a)]));
                recurrent.insert((s, a), v);
            }
        }
    }

    // (a) transient flow
    let mut rows: BTreeMap<usize, Vec<(usize, Rational)>> = q.states().map(|s| (s, Vec::new())).collect();
    for (&(s, a), &v) in &transient {
        rows.get_mut(&s).unwrap().push((v, int(1)));
        for (t, p) in &host.choices[s][a].successors {
            rows.get_mut(t).unwrap().push((v, -p.clone()));
        }
    }
    for (&s, &v) in &switch {
        rows.get_mut(&s).unwrap().push((v, int(1)));
    }
    for (s, coeffs) in rows {
        let rhs = if s == init { int(1) } else { int(0) };
        program.add_constraint(lp::var_name("flow", &[&mt.id(s)]), coeffs, Relation::Eq, rhs);
    }

    // (b) all mass switches to recurrent behaviour
    program.add_constraint(
        "switch",
        switch.values().map(|&v| (v, int(1))).collect(),
        Relation::Eq,
        int(1),
    );

    // (c) recurrent flow
    let mut rec_rows: BTreeMap<usize, Vec<(usize, Rational)>> = switch.keys().map(|&s| (s, Vec::new())).collect();
    for (&(s, a), &v) in &recurrent {
        rec_rows.get_mut(&s).unwrap().push((v, int(1)));
        for (t, p) in &host.choices[s][a].successors {
            rec_rows.get_mut(t).unwrap().push((v, -p.clone()));
        }
    }
    for (s, coeffs) in rec_rows {
        program.add_constraint(lp::var_name("rec", &[&mt.id(s)]), coeffs, Relation::Eq, int(0));
    }

    // (d) per-MEC matching
    for c in &mecs {
        let mut coeffs = Vec::new();
        for (&s, acts) in &c.actions {
            for &a in acts {
                coeffs.push((recurrent[&(s, a)], int(1)));
            }
            coeffs.push((switch[&s], int(-1)));
        }
        program.add_constraint(
            lp::var_name("mec", &[&mt.id(c.states[0])]),
            coeffs,
            Relation::Eq,
            int(0),
        );
    }

    // (e) average resilience per error
    for (&e, w) in weights {
        let coeffs: Vec<(usize, Rational)> = recurrent
            .iter()
            .filter(|((s, _), _)| !w[*s].is_zero())
            .map(|(&(s, _), &v)| (v, w[s].clone()))
            .collect();
        if !coeffs.is_empty() {
            program.add_constraint(lp::var_name("mp", &[&mt.id(e)]), coeffs, Relation::Ge, int(0));
        }
    }

    program.set_objective(
        recurrent
            .iter()
            .filter(|((s, _), _)| mt.payoff(*s) > 0)
            .map(|(&(s, _), &v)| (v, Rational::from_integer(mt.payoff(s).into())))
            .collect(),
    );

    MultiMpLp {
        program,
        init,
        transient,
        switch,
        recurrent,
        mecs,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentTriple {
    /// Sorted state set `E`.
    pub states: Vec<usize>,
    /// Actions played with positive frequency, per state of `E`.
    pub actions: BTreeMap<usize, Vec<usize>>,
    /// Scheduler on `E`.
    pub scheduler: MrScheduler,
    pub availability: Rational,
    /// Sub-MDP current when the triple was produced.
    pub snapshot: SubMdp,
}

impl ComponentTriple {
    pub fn contains(&self, s: usize) -> bool {
        self.states.binary_search(&s).is_ok()
    }
}

/// One round of the component search.
#[derive(Debug, Clone)]
pub struct Round {
    pub init: usize,
    pub program: LinearProgram,
    pub status: LpStatus,
    /// Indices into [`ComponentSet::triples`] produced in this round.
    pub produced: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ComponentSet {
    pub triples: Vec<ComponentTriple>,
    pub rounds: Vec<Round>,
}

/// Bottom components of the recurrent support of `solution`, with their
/// schedulers and availabilities. Each one is certified against a re-solve
/// restricted to its own states.
pub fn extract_components(
    mt: &TransformedMdp,
    q: &SubMdp,
    program: &MultiMpLp,
    solution: &LpSolution,
    weights: &Weights,
) -> Result<Vec<ComponentTriple>, LpError> {
    let mut out = Vec::new();
    for triple in support_components(mt, q, program, solution) {
        out.push(certify(mt, q, triple, weights)?);
    }
    Ok(out)
}

fn support_components(
    mt: &TransformedMdp,
    q: &SubMdp,
    program: &MultiMpLp,
    solution: &LpSolution,
) -> Vec<ComponentTriple> {
    let host = mt.mdp();
    let n = host.len();
    let mut freq: BTreeMap<usize, Vec<(usize, Rational)>> = BTreeMap::new();
    for (&(s, a), &v) in &program.recurrent {
        let x = solution.value(v);
        if x > Rational::zero() {
            freq.entry(s).or_default().push((a, x));
        }
    }
    if freq.is_empty() {
        return Vec::new();
    }
    let mut active = vec![false; n];
    let mut adj = vec![Vec::new(); n];
    for (&s, acts) in &freq {
        active[s] = true;
        for (a, _) in acts {
            adj[s].extend(host.choices[s][*a].targets());
        }
        adj[s].sort_unstable();
        adj[s].dedup();
    }
    let mut bottoms = graph::bottom_sccs(&adj, &active);
    for b in &mut bottoms {
        b.sort_unstable();
    }
    bottoms.sort();

    let payoff = payoff_vector(mt);
    bottoms
        .into_iter()
        .map(|states| {
            let mut scheduler = MrScheduler::empty(n);
            let mut actions = BTreeMap::new();
            for &s in &states {
                let acts = &freq[&s];
                let total: Rational = acts.iter().map(|(_, x)| x.clone()).sum();
                scheduler.set(s, acts.iter().map(|(a, x)| (*a, x / &total)).collect());
                actions.insert(s, acts.iter().map(|(a, _)| *a).collect());
            }
            let availability = local_availability(host, &scheduler, states[0], &payoff);
            ComponentTriple {
                states,
                actions,
                scheduler,
                availability,
                snapshot: q.clone(),
            }
        })
        .collect()
}

fn certify(
    mt: &TransformedMdp,
    q: &SubMdp,
    triple: ComponentTriple,
    weights: &Weights,
) -> Result<ComponentTriple, LpError> {
    let restricted = q.restrict_closed(mt.mdp(), &triple.states);
    let init = triple.states[0];
    let program = build_multi_mp_lp(mt, &restricted, init, weights);
    let solution = lp::solve(&program.program)?;
    match solution.objective_value {
        Some(ref v) if *v > triple.availability => {
            let better = support_components(mt, &restricted, &program, &solution)
                .into_iter()
                .fold(None::<ComponentTriple>, |best, t| match best {
                    Some(b) if b.availability >= t.availability => Some(b),
                    _ => Some(t),
                });
            Ok(better
                .map(|mut b| {
                    b.snapshot = q.clone();
                    b
                })
                .unwrap_or(triple))
        }
        _ => Ok(triple),
    }
}

fn payoff_vector(mt: &TransformedMdp) -> Vec<Rational> {
    (0..mt.len())
        .map(|s| Rational::from_integer(mt.payoff(s).into()))
        .collect()
}

fn local_availability(host: &Mdp, sched: &MrScheduler, from: usize, payoff: &[Rational]) -> Rational {
    let chain = induce_chain(host, sched, from).expect("component scheduler is closed on its states");
    long_run_average_from(&chain, payoff, 0)
}

/// Largest sub-MDP of `q` avoiding `remove`.
pub fn prune(host: &Mdp, q: &SubMdp, remove: &[usize]) -> SubMdp {
    let mut out = q.clone();
    for &s in remove {
        out.alive[s] = false;
    }
    loop {
        let mut changed = false;
        for s in 0..host.len() {
            if !out.alive[s] {
                continue;
            }
            for a in 0..out.enabled[s].len() {
                if out.enabled[s][a] && host.choices[s][a].targets().any(|t| !out.alive[t]) {
                    out.enabled[s][a] = false;
                    changed = true;
                }
            }
            if !out.enabled[s].iter().any(|&e| e) {
                out.alive[s] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    for s in 0..host.len() {
        if !out.alive[s] {
            out.enabled[s].iter_mut().for_each(|e| *e = false);
        }
    }
    out
}

/// The component search loop over the whole transformed model.
pub fn compute_e(mt: &TransformedMdp, threshold: &Rational) -> Result<ComponentSet, LpError> {
    let host = mt.mdp();
    let weights = build_weights(mt, threshold);
    let mut q = host.full_view();
    let mut s = mt.initial();
    let mut triples = Vec::new();
    let mut rounds = Vec::new();
    while !q.is_empty() {
        let program = build_multi_mp_lp(mt, &q, s, &weights);
        // among optimal solutions prefer recurrence through operational states
        let op_time: Vec<(usize, Rational)> = program
            .recurrent
            .iter()
            .filter(|((t, _), _)| mt.is_op(*t))
            .map(|(_, &v)| (v, Rational::one()))
            .collect();
        let solution = lp::solve_lexicographic(&program.program, &Objective::maximize(op_time))?;
        let mut produced = Vec::new();
        let mut removed: Vec<usize> = Vec::new();
        if solution.is_optimal() {
            for t in extract_components(mt, &q, &program, &solution, &weights)? {
                removed.extend_from_slice(&t.states);
                produced.push(triples.len());
                triples.push(t);
            }
        }
        if removed.is_empty() {
            removed.push(s);
        }
        rounds.push(Round {
            init: s,
            program: program.program,
            status: solution.status,
            produced,
        });
        q = prune(host, &q, &removed);
        if !q.contains(s) {
            match q.states().next() {
                Some(next) => s = next,
                None => break,
            }
        }
    }
    Ok(ComponentSet { triples, rounds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::plant_model;
    use crate::model::{MdpWithRepair, RawModel};
    use crate::rational::rat;

    fn fig1() -> TransformedMdp {
        TransformedMdp::new(&plant_model(), 2)
    }

    fn idx(mt: &TransformedMdp, id: &str) -> usize {
        mt.index_of_id(id).unwrap()
    }

    #[test]
    fn plant_weights() {
        let mt = fig1();
        let w = build_weights(&mt, &rat(4, 5));
        let e = idx(&mt, "error");
        assert_eq!(w.len(), 1);
        assert_eq!(w[&e][idx(&mt, "error#op2#1")], rat(1, 5));
        assert_eq!(w[&e][idx(&mt, "error#rep#2")], rat(-4, 5));
        assert_eq!(w[&e][idx(&mt, "error#rep#0")], int(0));
        assert_eq!(w[&e][idx(&mt, "s_init")], int(0));
    }

    #[test]
    fn plant_mecs() {
        let mt = fig1();
        let mecs = mec_decomposition(mt.mdp(), &mt.mdp().full_view());
        let sets: Vec<Vec<usize>> = mecs.iter().map(|c| c.states.clone()).collect();
        let mut expected = vec![vec![idx(&mt, "op1")], vec![idx(&mt, "op2")]];
        expected.sort();
        assert_eq!(sets, expected);
        for c in &mecs {
            assert_eq!(c.actions.values().next().unwrap(), &vec![0]);
        }
    }

    fn raw_mdp(rows: &[&[&[usize]]]) -> Mdp {
        use crate::mdp::Choice;
        Mdp {
            choices: rows
                .iter()
                .map(|acts| {
                    acts.iter()
                        .enumerate()
                        .map(|(a, ts)| {
                            let p = rat(1, ts.len() as i64);
                            Choice::new(alloc::format!("a{a}"), ts.iter().map(|&t| (t, p.clone())).collect())
                        })
                        .collect()
                })
                .collect(),
        }
    }

    #[test]
    fn small_mecs() {
        let one = raw_mdp(&[&[&[0]]]);
        let m = mec_decomposition(&one, &one.full_view());
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].states, vec![0]);

        let swap = raw_mdp(&[&[&[1]], &[&[0]]]);
        let m = mec_decomposition(&swap, &swap.full_view());
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].states, vec![0, 1]);

        // 0 can leave to an absorbing 2 or bounce with 1
        let mixed = raw_mdp(&[&[&[1], &[2]], &[&[0]], &[&[2]]]);
        let m = mec_decomposition(&mixed, &mixed.full_view());
        assert_eq!(m.len(), 2);
        assert_eq!(m[0].states, vec![0, 1]);
        assert_eq!(m[0].actions[&0], vec![0]);
        assert_eq!(m[1].states, vec![2]);
    }

    #[test]
    fn plant_first_round() {
        let mt = fig1();
        let w = build_weights(&mt, &rat(4, 5));
        let q = mt.mdp().full_view();
        let program = build_multi_mp_lp(&mt, &q, mt.initial(), &w);
        let sol = lp::solve(&program.program).unwrap();
        assert_eq!(sol.objective_value, Some(int(1)));
        let triples = extract_components(&mt, &q, &program, &sol, &w).unwrap();
        assert_eq!(triples.len(), 1);
        assert_eq!(triples[0].states, vec![idx(&mt, "op2")]);
        assert_eq!(triples[0].availability, int(1));
    }

    #[test]
    fn plant_prune_op2() {
        let mt = fig1();
        let host = mt.mdp();
        let q = prune(host, &host.full_view(), &[idx(&mt, "op2")]);
        assert_eq!(q.state_count(), 9);
        for id in ["error#op2#1", "error#op2#2", "op2"] {
            assert!(!q.contains(idx(&mt, id)), "{id}");
        }
        for id in ["error#rep#0", "error#rep#1", "error#rep#2", "rep"] {
            let s = idx(&mt, id);
            let beta = host.choice_by_label(s, "beta").unwrap();
            assert!(!q.enabled[s][beta], "{id}");
            assert_eq!(q.enabled_choices(s).count(), 1);
        }
        assert_eq!(prune(host, &q, &[]), q);
    }

    #[test]
    fn prune_cascades() {
        let m = raw_mdp(&[&[&[1]], &[&[1]]]);
        assert!(prune(&m, &m.full_view(), &[1]).is_empty());
    }

    #[test]
    fn plant_component_set() {
        let mt = fig1();
        let set = compute_e(&mt, &rat(4, 5)).unwrap();
        let summary: Vec<(Vec<usize>, Rational)> = set
            .triples
            .iter()
            .map(|t| (t.states.clone(), t.availability.clone()))
            .collect();
        assert_eq!(
            summary,
            vec![(vec![idx(&mt, "op2")], int(1)), (vec![idx(&mt, "op1")], int(0))]
        );
        for t in &set.triples {
            let s = t.states[0];
            assert_eq!(t.scheduler.get(s), Some(&[(0usize, int(1))][..]));
        }
        assert_eq!(set.triples[1].snapshot.state_count(), 9);
    }

    fn model(raw: RawModel, bound: u64) -> TransformedMdp {
        TransformedMdp::new(&MdpWithRepair::validated(&raw).unwrap(), bound)
    }

    #[test]
    fn single_payoff_state() {
        let mt = model(RawModel::new("p").op("p", 5).step("p", "a", "p"), 0);
        let w = build_weights(&mt, &int(1));
        let program = build_multi_mp_lp(&mt, &mt.mdp().full_view(), 0, &w);
        assert_eq!(lp::solve(&program.program).unwrap().objective_value, Some(int(5)));

        let sink = model(
            RawModel::new("s")
                .op("s", 0)
                .op("t", 3)
                .step("s", "a", "t")
                .step("t", "a", "t"),
            1,
        );
        let set = compute_e(&sink, &rat(1, 2)).unwrap();
        assert_eq!(set.triples.len(), 1);
        assert_eq!(set.triples[0].availability, int(3));
    }

    #[test]
    fn failing_repairs_make_lp_infeasible() {
        // an error whose repair always overruns the budget
        let mt = model(
            RawModel::new("s")
                .op("s", 0)
                .err("e", 1)
                .rep("r", 1)
                .step("s", "a", "e")
                .step("e", "a", "r")
                .step("r", "a", "s"),
            1,
        );
        let w = build_weights(&mt, &rat(1, 2));
        let program = build_multi_mp_lp(&mt, &mt.mdp().full_view(), 0, &w);
        assert_eq!(lp::solve(&program.program).unwrap().status, LpStatus::Infeasible);
        assert!(compute_e(&mt, &rat(1, 2)).unwrap().triples.is_empty());
    }

    #[test]
    fn no_component_when_every_cycle_fails() {
        let mt = model(
            RawModel::new("s")
                .op("s", 1)
                .err("e", 0)
                .rep("r", 1)
                .step("s", "a", "e")
                .step("e", "a", "r")
                .step("r", "a", "s"),
            0,
        );
        assert_eq!(mt.len(), 3);
        let set = compute_e(&mt, &rat(1, 2)).unwrap();
        assert!(set.triples.is_empty());
        assert!(set.rounds.iter().all(|r| r.status == LpStatus::Infeasible));
    }

    #[test]
    fn two_symmetric_sinks_split() {
        // x may be split across both sinks; every produced set is disjoint
        let mt = model(
            RawModel::new("s")
                .op("s", 0)
                .op("l", 1)
                .op("r", 1)
                .transition("s", "a", &[("l", rat(1, 2)), ("r", rat(1, 2))])
                .step("l", "a", "l")
                .step("r", "a", "r"),
            0,
        );
        let set = compute_e(&mt, &int(1)).unwrap();
        assert_eq!(set.triples.len(), 2);
        assert_ne!(set.triples[0].states, set.triples[1].states);
    }

    #[test]
    fn error_beyond_budget_is_penalized() {
        let mt = model(
            RawModel::new("s")
                .op("s", 1)
                .err("e", 3)
                .step("s", "a", "e")
                .step("e", "a", "s"),
            2,
        );
        let w = build_weights(&mt, &rat(1, 2));
        let e = mt.index_of_id("e").unwrap();
        assert_eq!(w[&e][e], rat(-1, 2));
    }
}
