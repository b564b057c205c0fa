//! Exact search: every beam vector, optimal UE matching per vector.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::instance::{weighted_sum_rate, Instance, Selection};
use crate::matching::optimal_ue_assignment;
use crate::mcmc::BeamSpace;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExhaustiveParams {
    /// Maximum number of beam vectors to enumerate.
    pub cap: usize,
    /// Include a "silent" option per AP. Without it, every AP interferes and
    /// selections that switch an AP off can be missed.
    pub allow_silent: bool,
}

impl Default for ExhaustiveParams {
    fn default() -> Self {
        Self {
            cap: 1_000_000,
            allow_silent: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExhaustiveOutcome {
    pub selection: Selection,
    pub beams: Vec<Option<usize>>,
    /// Weighted sum rate of `selection`.
    pub rate: f64,
}

/// Global optimum over the beam space. Ties go to the lexicographically
/// smallest beam vector (beams before silent).
pub fn exhaustive_select(instance: &Instance, params: &ExhaustiveParams) -> Result<ExhaustiveOutcome> {
    let space = BeamSpace::of(instance, params.allow_silent);
    let n = space.checked_size(params.cap)?;
    let (_, best) = (0..n)
        .into_par_iter()
        .map(|i| (optimal_ue_assignment(instance, &space.decode(i)).rate, i))
        .reduce(
            || (f64::NEG_INFINITY, usize::MAX),
            |x, y| {
                if y.0 > x.0 || (y.0 == x.0 && y.1 < x.1) {
                    y
                } else {
                    x
                }
            },
        );
    let beams = space.decode(best);
    let selection = optimal_ue_assignment(instance, &beams).selection(&beams);
    let rate = weighted_sum_rate(instance, &selection)?;
    Ok(ExhaustiveOutcome { selection, beams, rate })
}
