use alloc::vec::Vec;

use core::fmt;

use num_traits::Zero;

use super::chain::{
    almost_sure_reach, availability, induce_chain, long_run_average_from, until_probability, InducedChain,
};
use super::AnalysisError;
use crate::components::{build_weights, Weights};
use crate::mdp::MrScheduler;
use crate::rational::{to_f64, Rational};
use crate::transform::{TState, TransformedMdp};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorCheck {
    /// Index of the error state in the transformed model.
    pub error: usize,
    pub res_probability: Rational,
    pub res_ok: bool,
    pub as_rep_ok: bool,
    pub mp: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationReport {
    pub threshold: Rational,
    /// One entry per error reachable under the scheduler.
    pub errors: Vec<ErrorCheck>,
    pub ok: bool,
    pub availability: Rational,
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "resilient: {}", self.ok)?;
        writeln!(
            f,
            "availability: {} ({:.6})",
            self.availability,
            to_f64(&self.availability)
        )?;
        for c in &self.errors {
            writeln!(
                f,
                "error {}: res {} ({:.6}) {} threshold {}, almost-sure repair {}, mp {}",
                c.error,
                c.res_probability,
                to_f64(&c.res_probability),
                if c.res_ok { ">=" } else { "<" },
                self.threshold,
                c.as_rep_ok,
                c.mp
            )?;
        }
        Ok(())
    }
}

/// Checks both resilience conditions for every reachable error of a
/// memoryless scheduler on the transformed model.
pub fn verify_resilient(
    mt: &TransformedMdp,
    sched: &MrScheduler,
    threshold: &Rational,
) -> Result<VerificationReport, AnalysisError> {
    verify_resilient_from(mt, sched, threshold, mt.initial())
}

/// Same check with `init` as the initial state.
pub fn verify_resilient_from(
    mt: &TransformedMdp,
    sched: &MrScheduler,
    threshold: &Rational,
    init: usize,
) -> Result<VerificationReport, AnalysisError> {
    let chain = induce_chain(mt.mdp(), sched, init)?;
    let weights = build_weights(mt, threshold);
    let errors = error_checks(mt, &chain, threshold, Some(&weights));
    Ok(VerificationReport {
        threshold: threshold.clone(),
        ok: errors.iter().all(|c| c.res_ok && c.as_rep_ok),
        errors,
        availability: availability(&chain, &payoff_vector(mt)),
    })
}

/// Resilience check without mean-payoff values; availability is only
/// computed for resilient schedulers.
pub(crate) fn quick_check(
    mt: &TransformedMdp,
    sched: &MrScheduler,
    threshold: &Rational,
) -> Result<Option<Rational>, AnalysisError> {
    let chain = induce_chain(mt.mdp(), sched, mt.initial())?;
    let errors = error_checks(mt, &chain, threshold, None);
    if errors.iter().all(|c| c.res_ok && c.as_rep_ok) {
        Ok(Some(availability(&chain, &payoff_vector(mt))))
    } else {
        Ok(None)
    }
}

fn payoff_vector(mt: &TransformedMdp) -> Vec<Rational> {
    (0..mt.len())
        .map(|s| Rational::from_integer(mt.payoff(s).into()))
        .collect()
}

fn error_checks(
    mt: &TransformedMdp,
    chain: &InducedChain,
    threshold: &Rational,
    weights: Option<&Weights>,
) -> Vec<ErrorCheck> {
    let op = chain.mask(|h| mt.is_op(h));
    let sure = almost_sure_reach(chain, &op);
    let mut errors = Vec::new();
    for (k, &host) in chain.states.iter().enumerate() {
        if !mt.is_error(host) {
            continue;
        }
        let e = mt.base_state(host);
        let stay = chain.mask(|h| matches!(mt.state(h), TState::Repair { error, .. } if error == e) && !mt.is_op(h));
        let target = chain.mask(|h| mt.is_op_of(h, e));
        let until = until_probability(chain, &stay, &target);
        let res_probability: Rational = chain.rows[k].iter().map(|(t, p)| p * &until[*t]).sum();
        let res_ok = res_probability >= *threshold;
        let mp = match weights {
            Some(w) => long_run_average_from(chain, &w[&host], 0),
            None => Rational::zero(),
        };
        errors.push(ErrorCheck {
            error: host,
            res_ok,
            res_probability,
            as_rep_ok: sure[k],
            mp,
        });
        if weights.is_none() && !(res_ok && sure[k]) {
            break;
        }
    }
    errors.sort_by_key(|c| c.error);
    errors
}
