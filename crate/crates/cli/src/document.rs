//! JSON documents for models and schedulers.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use resilience_core::components::ComponentSet;
use resilience_core::mdp::MrScheduler;
use resilience_core::model::{MdpWithRepair, RawModel, RawState, RawTransition, StateKind};
use resilience_core::rational::{parse_rational, ParseRationalError};
use resilience_core::synth::{memory_rule, ComposedScheduler, FiniteMemoryScheduler, Memory};
use resilience_core::{Rational, TransformedMdp};

pub const MODEL_VERSION: u32 = 1;
pub const SCHEDULER_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DocumentError {
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported document version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error("unknown state kind {0:?}")]
    Kind(String),
    #[error(transparent)]
    Probability(#[from] ParseRationalError),
}

/// Errors of a scheduler document that parses but does not fit the model.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum BindError {
    #[error("unknown state {0:?}")]
    UnknownState(String),
    #[error("state {state:?} has no action {action:?}")]
    UnknownAction { state: String, action: String },
    #[error("distribution at {0:?} does not sum to 1")]
    NotADistribution(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub version: u32,
    pub initial: String,
    pub states: Vec<StateDoc>,
    pub transitions: Vec<TransitionDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDoc {
    pub id: String,
    pub kind: String,
    pub reward: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionDoc {
    pub from: String,
    pub action: String,
    pub to: Vec<TargetDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetDoc {
    pub target: String,
    pub prob: String,
}

impl ModelDocument {
    pub fn parse(text: &str) -> Result<Self, DocumentError> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        if doc.version != MODEL_VERSION {
            return Err(DocumentError::Version {
                found: doc.version,
                expected: MODEL_VERSION,
            });
        }
        Ok(doc)
    }

    pub fn to_raw(&self) -> Result<RawModel, DocumentError> {
        let mut states = Vec::with_capacity(self.states.len());
        for s in &self.states {
            let kind = StateKind::from_short_name(&s.kind).ok_or_else(|| DocumentError::Kind(s.kind.clone()))?;
            states.push(RawState {
                id: s.id.clone(),
                kind,
                reward: s.reward,
            });
        }
        let mut transitions = Vec::with_capacity(self.transitions.len());
        for t in &self.transitions {
            let mut to = Vec::with_capacity(t.to.len());
            for x in &t.to {
                to.push((x.target.clone(), parse_rational(&x.prob)?));
            }
            transitions.push(RawTransition {
                from: t.from.clone(),
                action: t.action.clone(),
                to,
            });
        }
        Ok(RawModel {
            states,
            transitions,
            initial: self.initial.clone(),
        })
    }

    pub fn from_raw(raw: &RawModel) -> Self {
        ModelDocument {
            version: MODEL_VERSION,
            initial: raw.initial.clone(),
            states: raw
                .states
                .iter()
                .map(|s| StateDoc {
                    id: s.id.clone(),
                    kind: s.kind.short_name().into(),
                    reward: s.reward,
                })
                .collect(),
            transitions: raw
                .transitions
                .iter()
                .map(|t| TransitionDoc {
                    from: t.from.clone(),
                    action: t.action.clone(),
                    to: t
                        .to
                        .iter()
                        .map(|(target, p)| TargetDoc {
                            target: target.clone(),
                            prob: p.to_string(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model documents always serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulerDocument {
    pub version: u32,
    pub threshold: String,
    pub cost_bound: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub availability: Option<String>,
    /// Decisions outside the chosen components, keyed by transformed state id.
    #[serde(default)]
    pub transient: Vec<DecisionDoc>,
    #[serde(default)]
    pub components: Vec<ComponentDoc>,
    pub rendered: RenderedDoc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionDoc {
    pub state: String,
    pub distribution: Vec<ActionProb>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionProb {
    pub action: String,
    pub prob: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentDoc {
    pub states: Vec<String>,
    pub availability: String,
    pub decisions: Vec<DecisionDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemoryDoc {
    pub error: String,
    pub cost: u64,
}

/// Finite-memory form on the original model. A rule without `memory`
/// applies to every memory value that has no rule of its own.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderedDoc {
    pub rules: Vec<RuleDoc>,
    #[serde(default)]
    pub updates: Vec<UpdateDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleDoc {
    pub state: String,
    #[serde(default, skip_serializing_if = "MemorySpec::is_any")]
    pub memory: MemorySpec,
    pub distribution: Vec<ActionProb>,
}

/// `"any"` (or absent), `"idle"`, or a repair memory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(untagged)]
pub enum MemorySpec {
    #[default]
    #[serde(skip)]
    Any,
    Named(String),
    Repair(MemoryDoc),
}

impl MemorySpec {
    fn is_any(&self) -> bool {
        matches!(self, MemorySpec::Any)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpdateDoc {
    pub state: String,
    pub memory: MemorySpec,
    pub next: String,
    pub after: MemorySpec,
}

impl SchedulerDocument {
    pub fn parse(text: &str) -> Result<Self, DocumentError> {
        let doc: SchedulerDocument = serde_json::from_str(text)?;
        if doc.version != SCHEDULER_VERSION {
            return Err(DocumentError::Version {
                found: doc.version,
                expected: SCHEDULER_VERSION,
            });
        }
        parse_rational(&doc.threshold)?;
        if let Some(a) = &doc.availability {
            parse_rational(a)?;
        }
        for d in doc.all_distributions() {
            for p in d {
                parse_rational(&p.prob)?;
            }
        }
        Ok(doc)
    }

    fn all_distributions(&self) -> impl Iterator<Item = &Vec<ActionProb>> {
        self.transient
            .iter()
            .map(|d| &d.distribution)
            .chain(
                self.components
                    .iter()
                    .flat_map(|c| c.decisions.iter().map(|d| &d.distribution)),
            )
            .chain(self.rendered.rules.iter().map(|r| &r.distribution))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scheduler documents always serialize")
    }

    pub fn threshold(&self) -> Rational {
        parse_rational(&self.threshold).expect("checked when parsed")
    }

    /// Document for a synthesized scheduler.
    pub fn from_composed(
        mt: &TransformedMdp,
        comps: &ComponentSet,
        sched: &ComposedScheduler,
        threshold: &Rational,
        availability: &Rational,
    ) -> Self {
        let m = mt.base();
        let transient = (0..mt.len())
            .filter(|&s| sched.transient.in_domain(s))
            .map(|s| DecisionDoc {
                state: mt.id(s),
                distribution: distribution_doc(mt, s, sched.transient.get(s).unwrap()),
            })
            .collect();
        let components = sched
            .components
            .iter()
            .map(|part| ComponentDoc {
                states: part.states.iter().map(|&s| mt.id(s)).collect(),
                availability: comps.triples[part.triple].availability.to_string(),
                decisions: part
                    .states
                    .iter()
                    .map(|&s| DecisionDoc {
                        state: mt.id(s),
                        distribution: distribution_doc(mt, s, part.scheduler.get(s).unwrap()),
                    })
                    .collect(),
            })
            .collect();
        let r = &sched.rendered;
        let rules = r
            .rules
            .iter()
            .map(|(&(s, mem), d)| RuleDoc {
                state: m.id(s).into(),
                memory: memory_doc(m, mem),
                distribution: d
                    .iter()
                    .map(|(a, p)| ActionProb {
                        action: m.mdp().choices(s)[*a].label.clone(),
                        prob: p.to_string(),
                    })
                    .collect(),
            })
            .collect();
        let updates = r
            .updates
            .iter()
            .map(|(&(s, mem, next), &after)| UpdateDoc {
                state: m.id(s).into(),
                memory: memory_doc(m, mem),
                next: m.id(next).into(),
                after: memory_doc(m, after),
            })
            .collect();
        SchedulerDocument {
            version: SCHEDULER_VERSION,
            threshold: threshold.to_string(),
            cost_bound: mt.cost_bound(),
            availability: Some(availability.to_string()),
            transient,
            components,
            rendered: RenderedDoc { rules, updates },
        }
    }

    /// Finite-memory scheduler on `m`. Wildcard rules are expanded over the
    /// memory values of the transformed model; a missing update table is
    /// filled from the standard update rule.
    pub fn bind(&self, mt: &TransformedMdp) -> Result<FiniteMemoryScheduler, BindError> {
        let m = mt.base();
        let mut specific = BTreeMap::new();
        let mut any = BTreeMap::new();
        for rule in &self.rules_in_order() {
            let s = state_index(m, &rule.state)?;
            let dist = bind_distribution(m, s, &rule.distribution, &rule.state)?;
            match &rule.memory {
                MemorySpec::Any => {
                    any.insert(s, dist);
                }
                MemorySpec::Named(n) if n == "any" => {
                    any.insert(s, dist);
                }
                spec => {
                    specific.insert((s, bind_memory(m, spec)?), dist);
                }
            }
        }
        let mut rules = specific;
        for i in 0..mt.len() {
            let key = Memory::of(mt.state(i));
            if let (std::collections::btree_map::Entry::Vacant(slot), Some(d)) = (rules.entry(key), any.get(&key.0)) {
                slot.insert(d.clone());
            }
        }
        let mut updates = BTreeMap::new();
        if self.rendered.updates.is_empty() {
            for i in 0..mt.len() {
                let (s, mem) = Memory::of(mt.state(i));
                let after = memory_rule(m, mt.cost_bound(), s, mem);
                for c in m.mdp().choices(s) {
                    for t in c.targets() {
                        updates.insert((s, mem, t), after);
                    }
                }
            }
        } else {
            for u in &self.rendered.updates {
                let s = state_index(m, &u.state)?;
                let next = state_index(m, &u.next)?;
                updates.insert((s, bind_memory(m, &u.memory)?, next), bind_memory(m, &u.after)?);
            }
        }
        Ok(FiniteMemoryScheduler {
            cost_bound: mt.cost_bound(),
            initial: Memory::of(mt.state(mt.initial())),
            rules,
            updates,
        })
    }

    fn rules_in_order(&self) -> Vec<&RuleDoc> {
        self.rendered.rules.iter().collect()
    }

    /// Memoryless scheduler on the transformed model.
    pub fn bind_memoryless(&self, mt: &TransformedMdp) -> Result<MrScheduler, BindError> {
        Ok(self.bind(mt)?.to_memoryless(mt))
    }
}

fn state_index(m: &MdpWithRepair, id: &str) -> Result<usize, BindError> {
    m.index_of(id).ok_or_else(|| BindError::UnknownState(id.into()))
}

fn bind_memory(m: &MdpWithRepair, spec: &MemorySpec) -> Result<Memory, BindError> {
    match spec {
        MemorySpec::Any => Ok(Memory::Idle),
        MemorySpec::Named(n) if n == "idle" => Ok(Memory::Idle),
        MemorySpec::Named(n) => Err(BindError::UnknownState(n.clone())),
        MemorySpec::Repair(r) => Ok(Memory::Repair {
            error: state_index(m, &r.error)?,
            cost: r.cost,
        }),
    }
}

fn memory_doc(m: &MdpWithRepair, mem: Memory) -> MemorySpec {
    match mem {
        Memory::Idle => MemorySpec::Named("idle".into()),
        Memory::Repair { error, cost } => MemorySpec::Repair(MemoryDoc {
            error: m.id(error).into(),
            cost,
        }),
    }
}

fn bind_distribution(
    m: &MdpWithRepair,
    s: usize,
    dist: &[ActionProb],
    where_: &str,
) -> Result<Vec<(usize, Rational)>, BindError> {
    let mut out = Vec::with_capacity(dist.len());
    let mut total = Rational::from_integer(0.into());
    for ap in dist {
        let a = m
            .mdp()
            .choice_by_label(s, &ap.action)
            .ok_or_else(|| BindError::UnknownAction {
                state: where_.into(),
                action: ap.action.clone(),
            })?;
        let p = parse_rational(&ap.prob).map_err(|_| BindError::NotADistribution(where_.into()))?;
        if p < Rational::from_integer(0.into()) {
            return Err(BindError::NotADistribution(where_.into()));
        }
        total += &p;
        out.push((a, p));
    }
    if total != Rational::from_integer(1.into()) {
        return Err(BindError::NotADistribution(where_.into()));
    }
    Ok(out)
}

fn distribution_doc(mt: &TransformedMdp, s: usize, d: &[(usize, Rational)]) -> Vec<ActionProb> {
    d.iter()
        .map(|(a, p)| ActionProb {
            action: mt.mdp().choices(s)[*a].label.clone(),
            prob: p.to_string(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use resilience_core::model::fixtures::plant;
    use resilience_core::rational::rat;

    #[test]
    fn model_round_trip() {
        let raw = plant();
        let doc = ModelDocument::from_raw(&raw);
        let parsed = ModelDocument::parse(&doc.to_json()).unwrap();
        assert_eq!(parsed, doc);
        assert_eq!(parsed.to_raw().unwrap(), raw);
    }

    #[test]
    fn rejects_bad_documents() {
        let mut doc = ModelDocument::from_raw(&plant());
        doc.transitions[0].to[0].prob = "1/0".into();
        let err = ModelDocument::parse(&doc.to_json()).unwrap().to_raw().unwrap_err();
        assert!(matches!(err, DocumentError::Probability(_)));
        doc.version = 9;
        assert!(matches!(
            ModelDocument::parse(&doc.to_json()),
            Err(DocumentError::Version { .. })
        ));
        assert!(ModelDocument::parse("{").is_err());
        doc.version = 1;
        doc.states[0].kind = "broken".into();
        assert!(matches!(
            ModelDocument::parse(&doc.to_json()).unwrap().to_raw(),
            Err(DocumentError::Kind(_))
        ));
    }

    #[test]
    fn wildcard_rules() {
        let m = MdpWithRepair::validated(&plant()).unwrap();
        let mt = TransformedMdp::new(&m, 2);
        let json = r#"{
            "version": 1, "threshold": "4/5", "cost_bound": 2,
            "rendered": { "rules": [
                {"state": "s_init", "distribution": [{"action": "a", "prob": "1"}]},
                {"state": "error", "distribution": [{"action": "a", "prob": "1"}]},
                {"state": "rep", "distribution": [{"action": "beta", "prob": "1"}]},
                {"state": "rep", "memory": {"error": "error", "cost": 1},
                 "distribution": [{"action": "beta", "prob": "0.8"}, {"action": "alpha", "prob": "1/5"}]},
                {"state": "op1", "distribution": [{"action": "a", "prob": "1"}]},
                {"state": "op2", "distribution": [{"action": "a", "prob": "1"}]}
            ] }
        }"#;
        let doc = SchedulerDocument::parse(json).unwrap();
        let s = doc.bind_memoryless(&mt).unwrap();
        let r1 = mt.index_of_id("error#rep#1").unwrap();
        let r0 = mt.index_of_id("error#rep#0").unwrap();
        let beta = mt.mdp().choice_by_label(r1, "beta").unwrap();
        assert_eq!(s.probability(r1, beta), rat(4, 5));
        assert_eq!(s.probability(r0, beta), rat(1, 1));
        assert!((0..mt.len()).all(|i| s.in_domain(i)));
    }

    #[test]
    fn bind_errors() {
        let m = MdpWithRepair::validated(&plant()).unwrap();
        let mt = TransformedMdp::new(&m, 2);
        let bad_state = r#"{"version":1,"threshold":"1","cost_bound":2,"rendered":{"rules":[
            {"state":"nowhere","distribution":[{"action":"a","prob":"1"}]}]}}"#;
        assert!(matches!(
            SchedulerDocument::parse(bad_state).unwrap().bind(&mt),
            Err(BindError::UnknownState(_))
        ));
        let bad_sum = r#"{"version":1,"threshold":"1","cost_bound":2,"rendered":{"rules":[
            {"state":"rep","distribution":[{"action":"beta","prob":"1/2"}]}]}}"#;
        assert!(matches!(
            SchedulerDocument::parse(bad_sum).unwrap().bind(&mt),
            Err(BindError::NotADistribution(_))
        ));
    }
}
