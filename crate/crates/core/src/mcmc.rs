//! Metropolis search over beam vectors.
//!
//! The state is a beam vector `b` (one option per AP); its score `R_b` is
//! the optimal UE matching for `b`. A proposal redraws the option of one
//! uniformly chosen AP uniformly (possibly the current one). Uphill moves are
//! always accepted, downhill moves with probability `exp(alpha * ΔR)`.
//!
//! With `allow_silent` each AP has one extra option, "silent", so the search
//! covers selections where switching an AP off beats its interference.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::anneal::{softmax, Schedule};
use crate::instance::{weighted_sum_rate, Instance, Selection};
use crate::matching::optimal_ue_assignment;
use crate::{Error, Result};

/// Default cap on the state count for dense diagnostics.
pub const DEFAULT_MATRIX_CAP: usize = 4096;

/// The set of beam vectors: `options^n_aps` states, each AP choosing a beam
/// or, when `allow_silent`, staying silent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BeamSpace {
    pub n_aps: usize,
    pub n_beams: usize,
    pub allow_silent: bool,
}

impl BeamSpace {
    pub fn of(instance: &Instance, allow_silent: bool) -> Self {
        Self {
            n_aps: instance.n_aps(),
            n_beams: instance.n_beams(),
            allow_silent,
        }
    }

    /// Options per AP.
    pub fn options(&self) -> usize {
        self.n_beams + usize::from(self.allow_silent)
    }

    /// Number of states, or `None` on overflow.
    pub fn size(&self) -> Option<u128> {
        (self.options() as u128).checked_pow(u32::try_from(self.n_aps).ok()?)
    }

    /// Option index `k` as a beam: `k < n_beams` is a beam, `n_beams` is silent.
    pub fn option(&self, k: usize) -> Option<usize> {
        (k < self.n_beams).then_some(k)
    }

    /// State `index` in mixed radix, AP 0 most significant so that index
    /// order is lexicographic order with silent after every beam.
    pub fn decode(&self, mut index: usize) -> Vec<Option<usize>> {
        let k = self.options();
        let mut out = vec![None; self.n_aps];
        for a in (0..self.n_aps).rev() {
            out[a] = self.option(index % k);
            index /= k;
        }
        out
    }

    pub fn encode(&self, beams: &[Option<usize>]) -> usize {
        let k = self.options();
        beams
            .iter()
            .fold(0, |acc, b| acc * k + b.unwrap_or(self.n_beams))
    }

    pub(crate) fn checked_size(&self, cap: usize) -> Result<usize> {
        match self.size() {
            Some(s) if s <= cap as u128 => Ok(s as usize),
            s => Err(Error::CapExceeded {
                what: "beam space",
                size: s.unwrap_or(u128::MAX),
                cap: cap as u128,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcParams {
    pub schedule: Schedule,
    pub max_iters: usize,
    pub seed: u64,
    pub allow_silent: bool,
    pub record_trace: bool,
}

impl Default for McmcParams {
    fn default() -> Self {
        Self {
            schedule: Schedule::log(1.0),
            max_iters: 5000,
            seed: 0,
            allow_silent: true,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub iteration: usize,
    pub beams: Vec<Option<usize>>,
    /// `R_b` of the state after this step.
    pub rate: f64,
    pub accepted: bool,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct McmcTrace {
    pub steps: Vec<TraceStep>,
}

impl McmcTrace {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,rate,accepted,alpha\n");
        for t in &self.steps {
            let _ = writeln!(s, "{},{},{},{}", t.iteration, t.rate, u8::from(t.accepted), t.alpha);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McmcOutcome {
    pub selection: Selection,
    /// Final beam vector `b^{I0}`.
    pub beams: Vec<Option<usize>>,
    /// `R_b` of the final beam vector.
    pub score: f64,
    /// Weighted sum rate of `selection`; at least `score`, since APs the
    /// matcher leaves unmatched stop interfering.
    pub rate: f64,
    pub trace: McmcTrace,
}

/// Runs the Metropolis search.
pub fn mcmc_select(instance: &Instance, params: &McmcParams) -> Result<McmcOutcome> {
    params.schedule.validate()?;
    if params.max_iters == 0 {
        return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
    }
    let space = BeamSpace::of(instance, params.allow_silent);
    let k = space.options();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut cache: HashMap<Vec<Option<usize>>, f64> = HashMap::new();
    let mut score = |b: &Vec<Option<usize>>| -> f64 {
        if let Some(&r) = cache.get(b) {
            return r;
        }
        let r = optimal_ue_assignment(instance, b).rate;
        cache.insert(b.clone(), r);
        r
    };

    let mut cur: Vec<Option<usize>> = (0..space.n_aps)
        .map(|_| space.option(rng.random_range(0..k)))
        .collect();
    let mut cur_r = score(&cur);
    let mut trace = McmcTrace::default();

    for i in 1..=params.max_iters {
        let alpha = params.schedule.at(i);
        let pos = rng.random_range(0..space.n_aps);
        let opt = space.option(rng.random_range(0..k));
        let mut prop = cur.clone();
        prop[pos] = opt;
        let prop_r = score(&prop);
        let accepted = if prop_r > cur_r {
            true
        } else {
            let p = (alpha * (prop_r - cur_r)).exp();
            assert!((0.0..=1.0).contains(&p), "acceptance probability {p} out of range");
            rng.random::<f64>() < p
        };
        if accepted {
            cur = prop;
            cur_r = prop_r;
        }
        if params.record_trace {
            trace.steps.push(TraceStep {
                iteration: i,
                beams: cur.clone(),
                rate: cur_r,
                accepted,
                alpha,
            });
        }
    }

    let assignment = optimal_ue_assignment(instance, &cur);
    debug_assert_eq!(assignment.rate, cur_r);
    let selection = assignment.selection(&cur);
    let rate = weighted_sum_rate(instance, &selection)?;
    Ok(McmcOutcome {
        selection,
        beams: cur,
        score: cur_r,
        rate,
        trace,
    })
}

/// `R_b` for every state of `space`, in index order.
pub fn state_scores(instance: &Instance, space: &BeamSpace, cap: usize) -> Result<Vec<f64>> {
    let n = space.checked_size(cap)?;
    Ok((0..n)
        .map(|i| optimal_ue_assignment(instance, &space.decode(i)).rate)
        .collect())
}

/// Dense one-step transition matrix of the chain at fixed `alpha`.
///
/// A state that differs from `b` in exactly one AP is proposed with
/// probability `1 / (K · N_A)` (K options per AP) and accepted with
/// `min(1, exp(alpha ΔR))`. The self-loop takes the remaining mass.
pub fn transition_matrix(
    instance: &Instance,
    space: &BeamSpace,
    alpha: f64,
    cap: usize,
) -> Result<Vec<Vec<f64>>> {
    let scores = state_scores(instance, space, cap)?;
    let n = scores.len();
    let k = space.options();
    let q = 1.0 / (k * space.n_aps) as f64;
    let mut p = vec![vec![0.0; n]; n];
    for (i, row) in p.iter_mut().enumerate() {
        let b = space.decode(i);
        let mut off = 0.0;
        for a in 0..space.n_aps {
            for o in 0..k {
                let opt = space.option(o);
                if opt == b[a] {
                    continue;
                }
                let mut nb = b.clone();
                nb[a] = opt;
                let j = space.encode(&nb);
                let acc = if scores[j] > scores[i] {
                    1.0
                } else {
                    (alpha * (scores[j] - scores[i])).exp()
                };
                row[j] = q * acc;
                off += q * acc;
            }
        }
        row[i] = 1.0 - off;
    }
    Ok(p)
}

/// Gibbs distribution `exp(alpha R_b) / Σ exp(alpha R_b')` over `space`.
pub fn stationary_distribution(
    instance: &Instance,
    space: &BeamSpace,
    alpha: f64,
    cap: usize,
) -> Result<Vec<f64>> {
    let scores = state_scores(instance, space, cap)?;
    Ok(softmax(&scores, alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exhaustive::{exhaustive_select, ExhaustiveParams};
    use crate::instance::random_instance;
    use crate::RssTensor;

    fn inst(seed: u64, na: usize, nu: usize, nb: usize) -> Instance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_instance(&mut rng, na, nu, nb, 0.0, 40.0).unwrap()
    }

    #[test]
    fn space_encoding_round_trips() {
        let s = BeamSpace { n_aps: 3, n_beams: 2, allow_silent: true };
        assert_eq!(s.size(), Some(27));
        for i in 0..27 {
            assert_eq!(s.encode(&s.decode(i)), i);
        }
        assert_eq!(s.decode(0), vec![Some(0); 3]);
        assert_eq!(s.decode(26), vec![None; 3]);
        assert!(s.checked_size(10).is_err());
    }

    #[test]
    fn single_beam_gives_all_zero_beam_vector() {
        let i = inst(1, 3, 4, 1);
        let params = McmcParams { allow_silent: false, max_iters: 100, ..Default::default() };
        let out = mcmc_select(&i, &params).unwrap();
        assert_eq!(out.beams, vec![Some(0); 3]);
        let oracle = optimal_ue_assignment(&i, &out.beams);
        assert_eq!(out.selection, oracle.selection(&out.beams));
    }

    #[test]
    fn rejects_bad_params() {
        let i = inst(1, 2, 2, 2);
        assert!(mcmc_select(&i, &McmcParams { max_iters: 0, ..Default::default() }).is_err());
        let neg = McmcParams { schedule: Schedule::log(-1.0), ..Default::default() };
        assert!(mcmc_select(&i, &neg).is_err());
    }

    #[test]
    fn trace_is_consistent() {
        let i = inst(2, 2, 3, 2);
        let params = McmcParams { max_iters: 300, record_trace: true, seed: 4, ..Default::default() };
        let out = mcmc_select(&i, &params).unwrap();
        assert_eq!(out.trace.steps.len(), 300);
        for t in &out.trace.steps {
            assert_eq!(t.rate, optimal_ue_assignment(&i, &t.beams).rate);
        }
        assert!(out.rate >= out.score - 1e-12);
        assert!(out.trace.to_csv().starts_with("iteration,rate,accepted,alpha\n"));
        // Deterministic for a fixed seed.
        assert_eq!(mcmc_select(&i, &params).unwrap().trace, out.trace);
    }

    #[test]
    fn annealed_chain_never_beats_optimum_and_usually_finds_it() {
        let mut hits = 0;
        for seed in 0..100 {
            let i = inst(1000 + seed, 2, 2, 2);
            let best = exhaustive_select(&i, &ExhaustiveParams::default()).unwrap().rate;
            let params = McmcParams {
                max_iters: 2000,
                seed,
                ..Default::default()
            };
            let out = mcmc_select(&i, &params).unwrap();
            assert!(out.rate <= best + 1e-9);
            if (out.rate - best).abs() <= 1e-9 {
                hits += 1;
            }
        }
        // Trapping behind multi-bit barriers is expected on some draws.
        assert!(hits >= 60, "hits = {hits}");
    }

    #[test]
    fn zero_alpha_is_uniform_walk() {
        let i = inst(3, 2, 3, 2);
        let space = BeamSpace::of(&i, true);
        let n = space.size().unwrap() as usize;
        let params = McmcParams {
            schedule: Schedule::constant(0.0),
            max_iters: 10_000,
            record_trace: true,
            seed: 77,
            ..Default::default()
        };
        let out = mcmc_select(&i, &params).unwrap();
        assert!(out.trace.steps.iter().all(|t| t.accepted));
        let mut counts = vec![0.0; n];
        for t in &out.trace.steps {
            counts[space.encode(&t.beams)] += 1.0;
        }
        let e = 10_000.0 / n as f64;
        let chi2: f64 = counts.iter().map(|c| (c - e) * (c - e) / e).sum();
        // df = 8; the walk is autocorrelated, so allow a loose bound.
        assert!(chi2 < 60.0, "chi2 = {chi2}");
    }

    #[test]
    fn transition_matrix_properties() {
        for seed in 0..5 {
            let i = inst(10 + seed, 2, 3, 2);
            for allow_silent in [false, true] {
                let space = BeamSpace::of(&i, allow_silent);
                for alpha in [0.0, 1.0, 5.0] {
                    let p = transition_matrix(&i, &space, alpha, DEFAULT_MATRIX_CAP).unwrap();
                    let pi = stationary_distribution(&i, &space, alpha, DEFAULT_MATRIX_CAP).unwrap();
                    for (r, row) in p.iter().enumerate() {
                        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                        assert!(row.iter().all(|x| *x >= 0.0));
                        for (c, x) in row.iter().enumerate() {
                            assert!((pi[r] * x - pi[c] * p[c][r]).abs() <= 1e-9);
                        }
                    }
                    for c in 0..pi.len() {
                        let v: f64 = (0..pi.len()).map(|r| pi[r] * p[r][c]).sum();
                        assert!((v - pi[c]).abs() <= 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn empirical_distribution_matches_stationary() {
        let i = inst(21, 2, 3, 2);
        let space = BeamSpace::of(&i, false);
        let alpha = 2.0;
        let pi = stationary_distribution(&i, &space, alpha, DEFAULT_MATRIX_CAP).unwrap();
        let params = McmcParams {
            schedule: Schedule::constant(alpha),
            max_iters: 100_000,
            record_trace: true,
            seed: 5,
            allow_silent: false,
        };
        let out = mcmc_select(&i, &params).unwrap();
        let mut freq = vec![0.0; pi.len()];
        for t in &out.trace.steps {
            freq[space.encode(&t.beams)] += 1.0 / 100_000.0;
        }
        let tv: f64 = 0.5 * freq.iter().zip(&pi).map(|(f, p)| (f - p).abs()).sum::<f64>();
        assert!(tv <= 0.05, "tv = {tv}");
    }

    #[test]
    fn stationary_limits() {
        let i = inst(31, 2, 3, 2);
        let space = BeamSpace::of(&i, true);
        let u = stationary_distribution(&i, &space, 0.0, DEFAULT_MATRIX_CAP).unwrap();
        assert!(u.iter().all(|p| (p - 1.0 / 9.0).abs() < 1e-15));

        let scores = state_scores(&i, &space, DEFAULT_MATRIX_CAP).unwrap();
        let best = scores.iter().cloned().fold(f64::MIN, f64::max);
        let second = scores.iter().cloned().filter(|s| *s < best).fold(f64::MIN, f64::max);
        assert!(best - second > 0.2);
        let pi = stationary_distribution(&i, &space, 100.0, DEFAULT_MATRIX_CAP).unwrap();
        let argmax = scores.iter().position(|s| *s == best).unwrap();
        assert!(pi[argmax] >= 1.0 - 1e-6);

        // Two APs, two UEs, one beam, mirror-symmetric: both UE vectors share
        // the optimum, and so do the two single-AP states.
        let rss = RssTensor::new(2, 2, 1, vec![8.0, 8.0, 8.0, 8.0]).unwrap();
        let sym = Instance::normalized(rss);
        let space = BeamSpace::of(&sym, true);
        let pi = stationary_distribution(&sym, &space, 200.0, DEFAULT_MATRIX_CAP).unwrap();
        // States: (0,0), (0,off), (off,0), (off,off). log2(9) > 2 log2(1+8/9).
        assert!((pi[1] - 0.5).abs() < 1e-9 && (pi[2] - 0.5).abs() < 1e-9);
    }
}
