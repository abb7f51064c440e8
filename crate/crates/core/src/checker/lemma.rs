use super::search::Explorer;
use super::CheckError;
use crate::context::VerificationContext;
use crate::deduce::saturate;
use crate::funcs::{geq_fhat, InterpFn};
use crate::roles::RoleSpec;
use crate::term::Term;
use crate::traces::Trace;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LemmaBounds {
    pub samples: usize,
    pub max_sessions: usize,
    pub max_depth: usize,
    pub max_steps: usize,
    pub seed: u64,
}

impl Default for LemmaBounds {
    fn default() -> Self {
        LemmaBounds {
            samples: 200,
            max_sessions: 3,
            max_depth: 2,
            max_steps: 16,
            seed: 0,
        }
    }
}

/// An honest send `e` after a trace `ρ` where `e⁺ ⊒_F̂ ρ⁻` fails.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LemmaViolation {
    pub prefix: Trace,
    pub sent: Term,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LemmaReport {
    pub traces: usize,
    pub steps_checked: usize,
    pub violations: Vec<LemmaViolation>,
}

/// Samples valid traces by random scheduling and checks, at every honest
/// send `e` following a prefix `ρ`, that `{e} ⊒_F̂ Use(ρ)`.
pub fn check_lemma_growth(
    ctx: &VerificationContext,
    spec: &RoleSpec,
    f: &(impl InterpFn + ?Sized),
    bounds: LemmaBounds,
) -> Result<LemmaReport, CheckError> {
    let ex = Explorer::new(spec, bounds.max_depth);
    let mut rng = ChaCha8Rng::seed_from_u64(bounds.seed);
    let mut report = LemmaReport {
        traces: 0,
        steps_checked: 0,
        violations: Vec::new(),
    };
    if ex.roles.is_empty() {
        return Ok(report);
    }
    for _ in 0..bounds.samples {
        let n = rng.gen_range(1..=bounds.max_sessions.max(1));
        let roles: Vec<usize> = (0..n).map(|_| rng.gen_range(0..ex.roles.len())).collect();
        let mut st = ex.start(&roles);
        while st.trace.size() < bounds.max_steps {
            let closure = saturate(ctx, &st.def);
            let mut actions = Vec::new();
            for i in 0..st.sessions.len() {
                if ex.can_send(&st, i) {
                    actions.push((i, None));
                } else if ex.can_receive(&st, i) {
                    let opts = ex.receive_options(&st, &closure, i);
                    if !opts.is_empty() {
                        actions.push((i, Some(opts)));
                    }
                }
            }
            if actions.is_empty() {
                break;
            }
            let (i, opts) = actions.swap_remove(rng.gen_range(0..actions.len()));
            match opts {
                None => {
                    let used: Vec<Term> = st.trace.use_of().into_iter().collect();
                    let prefix = st.trace.clone();
                    ex.send(&mut st, i);
                    let sent = st.def.last().expect("send records its payload").clone();
                    report.steps_checked += 1;
                    if !geq_fhat(ctx, f, std::slice::from_ref(&sent), &used)? {
                        report.violations.push(LemmaViolation { prefix, sent });
                    }
                }
                Some(mut opts) => {
                    let (msg, sigma) = opts.swap_remove(rng.gen_range(0..opts.len()));
                    ex.receive(&mut st, i, msg, sigma);
                }
            }
        }
        report.traces += 1;
    }
    Ok(report)
}
