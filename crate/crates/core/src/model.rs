//! MDPs with repair: operational, error and repair states over exact
//! rational transition probabilities, plus structural validation.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_traits::{One, Signed, Zero};

use crate::mdp::{Choice, Mdp};
use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StateKind {
    Operational,
    Error,
    Repair,
}

impl StateKind {
    pub fn short_name(self) -> &'static str {
        match self {
            StateKind::Operational => "op",
            StateKind::Error => "err",
            StateKind::Repair => "rep",
        }
    }

    pub fn from_short_name(s: &str) -> Option<Self> {
        match s {
            "op" => Some(StateKind::Operational),
            "err" => Some(StateKind::Error),
            "rep" => Some(StateKind::Repair),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawState {
    pub id: String,
    pub kind: StateKind,
    pub reward: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTransition {
    pub from: String,
    pub action: String,
    pub to: Vec<(String, Rational)>,
}

/// Unchecked model as read from a document. Turned into an
/// [`MdpWithRepair`] by [`MdpWithRepair::from_raw`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RawModel {
    pub states: Vec<RawState>,
    pub transitions: Vec<RawTransition>,
    pub initial: String,
}

impl RawModel {
    pub fn new(initial: impl Into<String>) -> Self {
        RawModel {
            initial: initial.into(),
            ..Default::default()
        }
    }

    pub fn state(mut self, id: impl Into<String>, kind: StateKind, reward: i64) -> Self {
        self.states.push(RawState {
            id: id.into(),
            kind,
            reward,
        });
        self
    }

    pub fn op(self, id: &str, payoff: i64) -> Self {
        self.state(id, StateKind::Operational, payoff)
    }

    pub fn err(self, id: &str, cost: i64) -> Self {
        self.state(id, StateKind::Error, cost)
    }

    pub fn rep(self, id: &str, cost: i64) -> Self {
        self.state(id, StateKind::Repair, cost)
    }

    pub fn transition(mut self, from: &str, action: &str, to: &[(&str, Rational)]) -> Self {
        self.transitions.push(RawTransition {
            from: from.into(),
            action: action.into(),
            to: to.iter().map(|(t, p)| ((*t).into(), p.clone())).collect(),
        });
        self
    }

    /// Deterministic move `from --action--> to`.
    pub fn step(self, from: &str, action: &str, to: &str) -> Self {
        self.transition(from, action, &[(to, Rational::one())])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub rule: &'static str,
    pub subjects: Vec<String>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.rule, self.message)?;
        if !self.subjects.is_empty() {
            write!(f, " ({})", self.subjects.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, rule: &'static str, subjects: &[&str], message: String) {
        self.violations.push(Violation {
            rule,
            subjects: subjects.iter().map(|s| s.to_string()).collect(),
            message,
        });
    }

    pub fn has_rule(&self, rule: &str) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok() {
            return writeln!(f, "ok");
        }
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateInfo {
    pub id: String,
    pub kind: StateKind,
    pub reward: u64,
}

/// Validated MDP with repair. States are indexed densely in input order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MdpWithRepair {
    states: Vec<StateInfo>,
    mdp: Mdp,
    initial: usize,
    index: BTreeMap<String, usize>,
}

/// Reports malformed distributions, trap states, negative rewards, duplicate
/// ids and dangling references.
pub fn validate_structure(raw: &RawModel) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut ids = BTreeSet::new();
    for st in &raw.states {
        if !ids.insert(st.id.as_str()) {
            report.push("duplicate-state", &[&st.id], format!("state {} declared twice", st.id));
        }
        if st.reward < 0 {
            report.push(
                "negative-reward",
                &[&st.id],
                format!("reward {} of state {} is negative", st.reward, st.id),
            );
        }
    }
    if !ids.contains(raw.initial.as_str()) {
        report.push(
            "dangling-initial",
            &[&raw.initial],
            format!("initial state {} is not declared", raw.initial),
        );
    }
    let mut seen_actions = BTreeSet::new();
    let mut has_action = BTreeSet::new();
    for tr in &raw.transitions {
        if !ids.contains(tr.from.as_str()) {
            report.push(
                "dangling-source",
                &[&tr.from, &tr.action],
                format!("transition source {} is not declared", tr.from),
            );
            continue;
        }
        if !seen_actions.insert((tr.from.as_str(), tr.action.as_str())) {
            report.push(
                "duplicate-action",
                &[&tr.from, &tr.action],
                format!("action {} of state {} declared twice", tr.action, tr.from),
            );
        }
        has_action.insert(tr.from.as_str());
        let mut total = Rational::zero();
        for (target, p) in &tr.to {
            if !ids.contains(target.as_str()) {
                report.push(
                    "dangling-target",
                    &[&tr.from, &tr.action, target],
                    format!("target {target} of action {} at {} is not declared", tr.action, tr.from),
                );
            }
            if p.is_negative() || *p > Rational::one() {
                report.push(
                    "probability-range",
                    &[&tr.from, &tr.action, target],
                    format!("probability {p} is outside [0,1]"),
                );
            }
            total += p;
        }
        if !total.is_one() {
            report.push(
                "distribution-sum",
                &[&tr.from, &tr.action],
                format!("distribution of action {} at {} sums to {total}", tr.action, tr.from),
            );
        }
    }
    for st in &raw.states {
        if !has_action.contains(st.id.as_str()) {
            report.push(
                "trap-state",
                &[&st.id],
                format!("trap state {} has no enabled action", st.id),
            );
        }
    }
    report
}

impl MdpWithRepair {
    /// Builds the model if [`validate_structure`] passes. The repair
    /// assumption is checked separately by [`validate_repair_assumption`].
    pub fn from_raw(raw: &RawModel) -> Result<Self, ValidationReport> {
        let report = validate_structure(raw);
        if !report.ok() {
            return Err(report);
        }
        let index: BTreeMap<String, usize> = raw.states.iter().enumerate().map(|(i, s)| (s.id.clone(), i)).collect();
        let states: Vec<StateInfo> = raw
            .states
            .iter()
            .map(|s| StateInfo {
                id: s.id.clone(),
                kind: s.kind,
                reward: s.reward as u64,
            })
            .collect();
        let mut choices = vec![Vec::new(); states.len()];
        for tr in &raw.transitions {
            let mut merged: BTreeMap<usize, Rational> = BTreeMap::new();
            for (target, p) in &tr.to {
                if !p.is_zero() {
                    *merged.entry(index[target]).or_insert_with(Rational::zero) += p;
                }
            }
            choices[index[&tr.from]].push(Choice::new(tr.action.clone(), merged.into_iter().collect()));
        }
        Ok(MdpWithRepair {
            initial: index[&raw.initial],
            states,
            mdp: Mdp { choices },
            index,
        })
    }

    /// Structure and repair assumption together.
    pub fn validated(raw: &RawModel) -> Result<Self, ValidationReport> {
        let m = Self::from_raw(raw)?;
        let report = validate_repair_assumption(&m);
        if report.ok() {
            Ok(m)
        } else {
            Err(report)
        }
    }

    pub fn to_raw(&self) -> RawModel {
        let mut raw = RawModel::new(self.states[self.initial].id.clone());
        for st in &self.states {
            raw.states.push(RawState {
                id: st.id.clone(),
                kind: st.kind,
                reward: st.reward as i64,
            });
        }
        for (s, choices) in self.mdp.choices.iter().enumerate() {
            for c in choices {
                raw.transitions.push(RawTransition {
                    from: self.states[s].id.clone(),
                    action: c.label.clone(),
                    to: c
                        .successors
                        .iter()
                        .map(|(t, p)| (self.states[*t].id.clone(), p.clone()))
                        .collect(),
                });
            }
        }
        raw
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn mdp(&self) -> &Mdp {
        &self.mdp
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn state(&self, s: usize) -> &StateInfo {
        &self.states[s]
    }

    pub fn id(&self, s: usize) -> &str {
        &self.states[s].id
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn kind(&self, s: usize) -> StateKind {
        self.states[s].kind
    }

    pub fn is_op(&self, s: usize) -> bool {
        self.kind(s) == StateKind::Operational
    }

    pub fn is_err(&self, s: usize) -> bool {
        self.kind(s) == StateKind::Error
    }

    pub fn cost(&self, s: usize) -> u64 {
        if self.is_op(s) {
            0
        } else {
            self.states[s].reward
        }
    }

    pub fn payoff(&self, s: usize) -> u64 {
        if self.is_op(s) {
            self.states[s].reward
        } else {
            0
        }
    }

    pub fn errors(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&s| self.is_err(s))
    }
}

/// Checks that no error state can reach another error state before an
/// operational one. Computes the least set `V` containing all errors and
/// every non-operational state with an action that may move into `V`, then
/// reports each error transition entering `V`.
pub fn validate_repair_assumption(m: &MdpWithRepair) -> ValidationReport {
    let n = m.len();
    let mut bad: Vec<bool> = (0..n).map(|s| m.is_err(s)).collect();
    loop {
        let mut changed = false;
        for s in 0..n {
            if bad[s] || m.is_op(s) {
                continue;
            }
            if m.mdp.choices[s].iter().any(|c| c.targets().any(|t| bad[t])) {
                bad[s] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut report = ValidationReport::default();
    for e in m.errors() {
        for c in &m.mdp.choices[e] {
            for t in c.targets().filter(|&t| bad[t]) {
                report.push(
                    "repair-assumption",
                    &[m.id(e), &c.label, m.id(t)],
                    format!(
                        "after error {} action {} may reach {} which can enter an error before an operational state",
                        m.id(e),
                        c.label,
                        m.id(t)
                    ),
                );
            }
        }
    }
    report
}

/// Small reference models.
pub mod fixtures {
    use super::*;
    use crate::rational::rat;

    /// Availability example: one error, one repair state with a safe action
    /// `alpha` to a worthless operational state and a risky action `beta`.
    pub fn plant() -> RawModel {
        RawModel::new("s_init")
            .op("s_init", 0)
            .err("error", 0)
            .rep("rep", 1)
            .op("op1", 0)
            .op("op2", 1)
            .step("s_init", "a", "error")
            .step("error", "a", "rep")
            .step("rep", "alpha", "op1")
            .transition("rep", "beta", &[("rep", rat(1, 2)), ("op2", rat(1, 2))])
            .step("op1", "a", "op1")
            .step("op2", "a", "op2")
    }

    pub fn plant_model() -> MdpWithRepair {
        MdpWithRepair::validated(&plant()).unwrap()
    }

    /// Random valid model with `2..=max_states` states, at most two actions
    /// per state, at most two successors per action and rewards in `0..=3`.
    /// State `s0` is operational and initial. Deterministic in `seed`.
    pub fn random_model(seed: u64, max_states: usize) -> MdpWithRepair {
        use rand_chacha::ChaCha8Rng;
        use rand_core::SeedableRng;

        let splits = [rat(1, 2), rat(1, 3), rat(2, 3), rat(1, 4), rat(3, 4)];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        loop {
            let n = 2 + below(&mut rng, max_states.max(2) - 1);
            let ids: Vec<String> = (0..n).map(|i| alloc::format!("s{i}")).collect();
            let kinds: Vec<StateKind> = (0..n)
                .map(|i| match i {
                    0 => StateKind::Operational,
                    1 => StateKind::Error,
                    _ => [
                        StateKind::Operational,
                        StateKind::Error,
                        StateKind::Repair,
                        StateKind::Repair,
                    ][below(&mut rng, 4)],
                })
                .collect();
            let mut raw = RawModel::new("s0");
            for (id, &kind) in ids.iter().zip(&kinds) {
                raw = raw.state(id.clone(), kind, below(&mut rng, 4) as i64);
            }
            let non_errors: Vec<usize> = (0..n).filter(|&i| kinds[i] != StateKind::Error).collect();
            for (i, id) in ids.iter().enumerate() {
                // errors and repairs mostly avoid errors; the rest is checked below
                let pool: &[usize] = if kinds[i] != StateKind::Operational && below(&mut rng, 8) != 0 {
                    &non_errors
                } else {
                    &[]
                };
                for (k, action) in ["a", "b"].iter().take(1 + below(&mut rng, 2)).enumerate() {
                    let t1 = target(&mut rng, k == 0, i, n, pool);
                    let t2 = target(&mut rng, false, i, n, pool);
                    raw = if t1 == t2 || below(&mut rng, 2) == 0 {
                        raw.step(id, action, &ids[t1])
                    } else {
                        let p = splits[below(&mut rng, splits.len())].clone();
                        let q = Rational::one() - &p;
                        raw.transition(id, action, &[(&ids[t1], p), (&ids[t2], q)])
                    };
                }
            }
            if let Ok(m) = MdpWithRepair::validated(&raw) {
                return m;
            }
        }
    }

    fn below(rng: &mut rand_chacha::ChaCha8Rng, k: usize) -> usize {
        use rand_core::RngCore;
        (rng.next_u32() as usize) % k
    }

    fn target(rng: &mut rand_chacha::ChaCha8Rng, first: bool, i: usize, n: usize, pool: &[usize]) -> usize {
        let next = (i + 1) % n;
        if first && below(rng, 2) == 0 && (pool.is_empty() || pool.contains(&next)) {
            next
        } else if pool.is_empty() {
            below(rng, n)
        } else {
            pool[below(rng, pool.len())]
        }
    }
}
