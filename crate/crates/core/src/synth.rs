//! Goal MDP, resiliency LP and the composed optimal resilient scheduler.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::analyze::{self, AnalysisError, VerificationReport};
use crate::components::{compute_e, ComponentSet};
use crate::lp::{self, LinearProgram, LpError, LpSolution, Objective, Relation};
use crate::mdp::{Choice, Mdp, MrScheduler};
use crate::model::{validate_repair_assumption, MdpWithRepair, ValidationReport};
use crate::rational::{int, Rational};
use crate::transform::{TState, TransformedMdp};

pub const TAU: &str = "tau";

/// The transformed model extended by one absorbing goal state per component
/// and a final `goal` sink.
#[derive(Debug, Clone)]
pub struct GoalMdp {
    pub mdp: Mdp,
    /// Number of states taken over from the transformed model.
    pub base_len: usize,
    /// `goal_E` state of every component, in component order.
    pub goal_of: Vec<usize>,
    pub goal: usize,
    /// Index of the `tau` choice, where enabled.
    pub tau: Vec<Option<usize>>,
    pub reward: Vec<Rational>,
}

impl GoalMdp {
    pub fn len(&self) -> usize {
        self.mdp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mdp.is_empty()
    }

    pub fn is_goal_state(&self, s: usize) -> bool {
        s >= self.base_len
    }

    pub fn id(&self, mt: &TransformedMdp, s: usize) -> String {
        if s < self.base_len {
            mt.id(s)
        } else if s == self.goal {
            "goal".into()
        } else {
            format!("goal_{}", s - self.base_len)
        }
    }
}

/// Goal MDP over `comps`. `tau` is enabled at the operational states of
/// every component and, for components of base states without operational
/// states, at all of their states unless the component is in `banned`.
pub fn build_goal_mdp(mt: &TransformedMdp, comps: &ComponentSet, banned: &BTreeSet<usize>) -> GoalMdp {
    let n = mt.len();
    let k = comps.triples.len();
    let goal = n + k;
    let mut choices = mt.mdp().choices.clone();
    let mut tau = vec![None; n + k + 1];
    let mut reward = vec![Rational::zero(); n + k + 1];
    let mut goal_of = Vec::with_capacity(k);
    for (i, t) in comps.triples.iter().enumerate() {
        let g = n + i;
        goal_of.push(g);
        let exit_anywhere = !banned.contains(&i) && t.states.iter().all(|&s| !mt.is_op(s) && !mt.is_repair_copy(s));
        for &s in &t.states {
            if (mt.is_op(s) || exit_anywhere) && tau[s].is_none() {
                tau[s] = Some(choices[s].len());
                choices[s].push(Choice::new(TAU, vec![(g, Rational::one())]));
            }
        }
        reward[g] = t.availability.clone();
    }
    for slot in &mut tau[n..=goal] {
        *slot = Some(0);
        choices.push(vec![Choice::new(TAU, vec![(goal, Rational::one())])]);
    }
    GoalMdp {
        mdp: Mdp { choices },
        base_len: n,
        goal_of,
        goal,
        tau,
        reward,
    }
}

/// Chosen components without operational states that some reachable error
/// enters before any operational state.
fn stuck_components(mt: &TransformedMdp, sched: &ComposedScheduler) -> Result<BTreeSet<usize>, AnalysisError> {
    let chain = analyze::induce_chain(mt.mdp(), &sched.memoryless, mt.initial())?;
    let mut owner = BTreeMap::new();
    for part in &sched.components {
        if part.states.iter().all(|&s| !mt.is_op(s)) {
            for &s in &part.states {
                owner.insert(s, part.triple);
            }
        }
    }
    let mut out = BTreeSet::new();
    for (k, &host) in chain.states.iter().enumerate() {
        if !mt.is_error(host) {
            continue;
        }
        let mut seen = vec![false; chain.len()];
        let mut stack = vec![k];
        seen[k] = true;
        while let Some(i) = stack.pop() {
            if let Some(&t) = owner.get(&chain.states[i]) {
                out.insert(t);
            }
            for (j, _) in &chain.rows[i] {
                if !seen[*j] && !mt.is_op(chain.states[*j]) {
                    seen[*j] = true;
                    stack.push(*j);
                }
            }
        }
    }
    Ok(out)
}

/// Resiliency LP with its variable layout: `vars[(t, a)]` is the expected
/// number of times choice `a` is taken in `t`.
#[derive(Debug, Clone)]
pub struct ResiliencyLp {
    pub program: LinearProgram,
    pub vars: BTreeMap<(usize, usize), usize>,
}

impl ResiliencyLp {
    /// Expected visits of `s` in a solution.
    pub fn visits(&self, solution: &LpSolution, s: usize) -> Rational {
        self.vars
            .range((s, 0)..(s + 1, 0))
            .map(|(_, &v)| solution.value(v))
            .sum()
    }
}

pub fn build_resiliency_lp(mt: &TransformedMdp, n: &GoalMdp, threshold: &Rational) -> ResiliencyLp {
    let mut program = LinearProgram::new(lp::Direction::Maximize);
    let mut vars = BTreeMap::new();
    for t in 0..n.len() {
        if t == n.goal {
            continue;
        }
        for (a, c) in n.mdp.choices[t].iter().enumerate() {
            let v = program.add_nonneg(lp::var_name("y", &[&n.id(mt, t), &c.label]));
            vars.insert((t, a), v);
        }
    }

    let mut rows: Vec<Vec<(usize, Rational)>> = vec![Vec::new(); n.len()];
    for (&(t, a), &v) in &vars {
        rows[t].push((v, int(1)));
        for (s, p) in &n.mdp.choices[t][a].successors {
            rows[*s].push((v, -p.clone()));
        }
    }
    let goal_row = core::mem::take(&mut rows[n.goal]);
    for (s, coeffs) in rows.into_iter().enumerate() {
        if s == n.goal {
            continue;
        }
        let rhs = if s == mt.initial() { int(1) } else { int(0) };
        program.add_constraint(lp::var_name("flow", &[&n.id(mt, s)]), coeffs, Relation::Eq, rhs);
    }
    // inflow into goal; the row holds negated coefficients
    program.add_constraint(
        "reach_goal",
        goal_row.into_iter().map(|(v, c)| (v, -c)).collect(),
        Relation::Ge,
        int(1),
    );

    for e in mt.errors() {
        let be = mt.base_state(e);
        let mut coeffs = Vec::new();
        for s in 0..mt.len() {
            if mt.is_op_of(s, be) {
                coeffs.extend(vars.range((s, 0)..(s + 1, 0)).map(|(_, &v)| (v, int(1))));
            }
        }
        coeffs.extend(vars.range((e, 0)..(e + 1, 0)).map(|(_, &v)| (v, -threshold.clone())));
        program.add_constraint(lp::var_name("res", &[&mt.id(e)]), coeffs, Relation::Ge, int(0));
    }

    // Runs inside an unfinished repair must not enter a component without
    // operational states.
    for (&(t, a), &v) in &vars {
        let dirty = t < n.base_len && (mt.is_error(t) || (mt.is_repair_copy(t) && !mt.is_op(t)));
        if dirty
            && n.mdp.choices[t][a]
                .targets()
                .any(|u| u < n.base_len && !mt.is_op(u) && n.tau[u].is_some())
        {
            let name = lp::var_name("no_stuck_repair", &[&n.id(mt, t), &n.mdp.choices[t][a].label]);
            program.add_constraint(name, vec![(v, int(1))], Relation::Eq, int(0));
        }
    }

    program.set_objective(
        n.goal_of
            .iter()
            .filter(|&&g| !n.reward[g].is_zero())
            .map(|&g| (vars[&(g, 0)], n.reward[g].clone()))
            .collect(),
    );
    ResiliencyLp { program, vars }
}

/// Memory of the rendered scheduler: idle, or inside the repair of an error
/// with the cost accumulated so far.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Memory {
    Idle,
    Repair { error: usize, cost: u64 },
}

impl Memory {
    pub fn of(state: TState) -> (usize, Memory) {
        match state {
            TState::Base(s) => (s, Memory::Idle),
            TState::Repair { error, state, cost } => (state, Memory::Repair { error, cost }),
        }
    }

    pub fn to_state(base: usize, memory: Memory) -> TState {
        match memory {
            Memory::Idle => TState::Base(base),
            Memory::Repair { error, cost } => TState::Repair {
                error,
                state: base,
                cost,
            },
        }
    }
}

/// Finite-memory scheduler on the original model. Decisions are keyed by
/// `(state, memory)`; `updates[(s, m, s')]` is the memory after moving from
/// `s` to `s'` with memory `m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteMemoryScheduler {
    pub cost_bound: u64,
    pub initial: (usize, Memory),
    pub rules: BTreeMap<(usize, Memory), Vec<(usize, Rational)>>,
    pub updates: BTreeMap<(usize, Memory, usize), Memory>,
}

impl FiniteMemoryScheduler {
    /// Rendering of a memoryless scheduler on the transformed model.
    pub fn from_memoryless(mt: &TransformedMdp, sched: &MrScheduler) -> Self {
        let mut rules = BTreeMap::new();
        let mut updates = BTreeMap::new();
        for i in 0..mt.len() {
            let key = Memory::of(mt.state(i));
            if let Some(d) = sched.get(i) {
                rules.insert(key, d.to_vec());
            }
            for c in mt.mdp().choices(i) {
                for t in c.targets() {
                    let (next, mem) = Memory::of(mt.state(t));
                    updates.insert((key.0, key.1, next), mem);
                }
            }
        }
        FiniteMemoryScheduler {
            cost_bound: mt.cost_bound(),
            initial: Memory::of(mt.state(mt.initial())),
            rules,
            updates,
        }
    }

    /// Memoryless scheduler on the transformed model. States whose
    /// `(state, memory)` pair has no rule stay outside the domain.
    pub fn to_memoryless(&self, mt: &TransformedMdp) -> MrScheduler {
        let mut out = MrScheduler::empty(mt.len());
        for i in 0..mt.len() {
            if let Some(d) = self.rules.get(&Memory::of(mt.state(i))) {
                out.set(i, d.clone());
            }
        }
        out
    }

    pub fn decide(&self, state: usize, memory: Memory) -> Option<&[(usize, Rational)]> {
        self.rules.get(&(state, memory)).map(|d| d.as_slice())
    }

    pub fn next_memory(&self, state: usize, memory: Memory, next: usize) -> Option<Memory> {
        self.updates.get(&(state, memory, next)).copied()
    }

    /// Non-idle memory values used by the rules.
    pub fn repair_memories(&self) -> BTreeSet<Memory> {
        self.rules
            .keys()
            .map(|(_, m)| *m)
            .filter(|m| *m != Memory::Idle)
            .collect()
    }
}

/// The update rule itself, independent of any table.
pub fn memory_rule(m: &MdpWithRepair, bound: u64, state: usize, memory: Memory) -> Memory {
    match memory {
        Memory::Idle if m.is_err(state) && m.cost(state) <= bound => Memory::Repair {
            error: state,
            cost: m.cost(state),
        },
        Memory::Idle => Memory::Idle,
        Memory::Repair { error, cost } => {
            let next = cost + m.cost(state);
            if m.is_op(state) || next > bound {
                Memory::Idle
            } else {
                Memory::Repair { error, cost: next }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentPart {
    /// Index into the component set.
    pub triple: usize,
    pub states: Vec<usize>,
    pub scheduler: MrScheduler,
    pub availability: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComposedScheduler {
    /// Decisions on the states outside the chosen components.
    pub transient: MrScheduler,
    pub components: Vec<ComponentPart>,
    /// Combined memoryless scheduler on the transformed model.
    pub memoryless: MrScheduler,
    pub rendered: FiniteMemoryScheduler,
}

/// Scheduler on the goal MDP read off an LP solution: `y[t,a] / y[t]`,
/// uniform where `t` is never visited.
pub fn goal_scheduler(n: &GoalMdp, program: &ResiliencyLp, solution: &LpSolution) -> MrScheduler {
    let mut out = MrScheduler::empty(n.len());
    for t in 0..n.len() {
        if t == n.goal {
            out.set_dirac(t, 0);
            continue;
        }
        let k = n.mdp.choices[t].len();
        let ys = program.visits(solution, t);
        if ys.is_zero() {
            out.set(t, uniform(k));
        } else {
            out.set(
                t,
                (0..k)
                    .map(|a| (a, solution.value(program.vars[&(t, a)]) / &ys))
                    .collect(),
            );
        }
    }
    out
}

fn uniform(k: usize) -> Vec<(usize, Rational)> {
    (0..k)
        .map(|a| (a, Rational::new(1.into(), (k as i64).into())))
        .collect()
}

pub fn extract_scheduler(
    mt: &TransformedMdp,
    n: &GoalMdp,
    comps: &ComponentSet,
    program: &ResiliencyLp,
    solution: &LpSolution,
) -> Result<ComposedScheduler, SynthError> {
    let size = mt.len();
    let mut owner = vec![None; size];
    let mut components = Vec::new();
    for (i, t) in comps.triples.iter().enumerate() {
        let g = n.goal_of[i];
        if solution.value(program.vars[&(g, 0)]).is_zero() {
            continue;
        }
        for &s in &t.states {
            owner[s] = Some(components.len());
        }
        components.push(ComponentPart {
            triple: i,
            states: t.states.clone(),
            scheduler: t.scheduler.clone(),
            availability: t.availability.clone(),
        });
    }

    let mut transient = MrScheduler::empty(size);
    let mut memoryless = MrScheduler::empty(size);
    for (s, &own) in owner.iter().enumerate() {
        if let Some(c) = own {
            let d = components[c]
                .scheduler
                .get(s)
                .expect("component scheduler covers its states");
            memoryless.set(s, d.to_vec());
            continue;
        }
        let k = mt.mdp().choices(s).len();
        let flows: Vec<(usize, Rational)> = (0..k).map(|a| (a, solution.value(program.vars[&(s, a)]))).collect();
        let total: Rational = flows.iter().map(|(_, y)| y.clone()).sum();
        if let Some(tau) = n.tau[s] {
            if !solution.value(program.vars[&(s, tau)]).is_zero() {
                return Err(SynthError::Inconsistent(format!(
                    "tau taken outside chosen components at {}",
                    mt.id(s)
                )));
            }
        }
        let dist = if total.is_zero() {
            uniform(k)
        } else {
            flows.into_iter().map(|(a, y)| (a, y / &total)).collect()
        };
        transient.set(s, dist.clone());
        memoryless.set(s, dist);
    }
    let rendered = FiniteMemoryScheduler::from_memoryless(mt, &memoryless);
    Ok(ComposedScheduler {
        transient,
        components,
        memoryless,
        rendered,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SynthesisOutcome {
    NoResilientScheduler,
    Resilient {
        scheduler: ComposedScheduler,
        availability: Rational,
    },
}

/// Everything computed along the way, kept for inspection and dumps.
#[derive(Debug, Clone)]
pub struct Synthesis {
    pub threshold: Rational,
    pub transformed: TransformedMdp,
    pub components: ComponentSet,
    pub goal: GoalMdp,
    pub program: ResiliencyLp,
    pub solution: LpSolution,
    pub outcome: SynthesisOutcome,
    pub report: Option<VerificationReport>,
}

impl Synthesis {
    pub fn availability(&self) -> Option<&Rational> {
        match &self.outcome {
            SynthesisOutcome::Resilient { availability, .. } => Some(availability),
            SynthesisOutcome::NoResilientScheduler => None,
        }
    }

    pub fn scheduler(&self) -> Option<&ComposedScheduler> {
        match &self.outcome {
            SynthesisOutcome::Resilient { scheduler, .. } => Some(scheduler),
            SynthesisOutcome::NoResilientScheduler => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthError {
    #[error("invalid model:\n{0}")]
    InvalidModel(ValidationReport),
    #[error("threshold {0} is outside (0, 1]")]
    InvalidThreshold(Rational),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("inconsistent LP solution: {0}")]
    Inconsistent(String),
    #[error("synthesized scheduler failed verification:\n{0}")]
    VerificationFailed(Box<VerificationReport>),
    #[error("LP value {lp} differs from the scheduler's availability {analysis}")]
    ValueMismatch { lp: Rational, analysis: Rational },
}

pub fn synthesize(m: &MdpWithRepair, threshold: &Rational, cost_bound: u64) -> Result<Synthesis, SynthError> {
    if *threshold <= Rational::zero() || *threshold > Rational::one() {
        return Err(SynthError::InvalidThreshold(threshold.clone()));
    }
    let assumption = validate_repair_assumption(m);
    if !assumption.ok() {
        return Err(SynthError::InvalidModel(assumption));
    }
    let mt = TransformedMdp::new(m, cost_bound);
    let components = compute_e(&mt, threshold)?;
    // Components without operational states are admitted as run endings
    // until a solution enters one of them during a repair.
    let mut banned = BTreeSet::new();
    loop {
        let goal = build_goal_mdp(&mt, &components, &banned);
        let program = build_resiliency_lp(&mt, &goal, threshold);
        let all: Vec<(usize, Rational)> = program.vars.values().map(|&v| (v, int(1))).collect();
        let solution = lp::solve_lexicographic(&program.program, &Objective::minimize(all))?;

        if !solution.is_optimal() {
            return Ok(Synthesis {
                threshold: threshold.clone(),
                transformed: mt,
                components,
                goal,
                program,
                solution,
                outcome: SynthesisOutcome::NoResilientScheduler,
                report: None,
            });
        }

        let lp_value = program.program.objective_at(solution.assignment.as_ref().unwrap());
        let scheduler = extract_scheduler(&mt, &goal, &components, &program, &solution)?;
        let report = analyze::verify_resilient(&mt, &scheduler.memoryless, threshold)?;
        if !report.ok {
            let stuck = stuck_components(&mt, &scheduler)?;
            if stuck.is_subset(&banned) {
                return Err(SynthError::VerificationFailed(Box::new(report)));
            }
            banned.extend(stuck);
            continue;
        }
        if report.availability != lp_value {
            return Err(SynthError::ValueMismatch {
                lp: lp_value,
                analysis: report.availability.clone(),
            });
        }
        return Ok(Synthesis {
            threshold: threshold.clone(),
            transformed: mt,
            components,
            goal,
            program,
            solution,
            outcome: SynthesisOutcome::Resilient {
                scheduler,
                availability: lp_value,
            },
            report: Some(report),
        });
    }
}
