//! Greedy UE and beam selection.
//!
//! Both heuristics fix each AP's beam to the best beam for its UE.
//!
//! - NGUB1 assigns (AP, UE) pairs one at a time. Each step takes the pair
//!   with the highest rate given the interference of the pairs already
//!   assigned. Round-robin passes then swap an AP's UE for a free one
//!   whenever that strictly raises the total.
//! - NGUB2 repeats the assignment `J` times, each time visiting the APs in a
//!   random order and giving each AP its best free UE. It keeps the best of
//!   the `J` passes.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::instance::{weighted_sum_rate_unchecked, Instance, Link, Selection};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreedyParams {
    /// NGUB1 improvement rounds; `None` means `3 N_A`.
    pub improvement_rounds: Option<usize>,
    /// NGUB1 stops early when a full round gains less than this.
    pub min_round_gain: Option<f64>,
    /// NGUB2 passes; `None` means `max(10, N_A²)`.
    pub j_runs: Option<usize>,
    pub seed: u64,
}

impl GreedyParams {
    pub fn rounds(&self, instance: &Instance) -> usize {
        self.improvement_rounds.unwrap_or(3 * instance.n_aps())
    }

    pub fn passes(&self, instance: &Instance) -> usize {
        self.j_runs.unwrap_or((instance.n_aps() * instance.n_aps()).max(10))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ngub1Outcome {
    pub selection: Selection,
    pub rate: f64,
    /// APs in the order the initial selection assigned them.
    pub ap_order: Vec<usize>,
    pub initial_rate: f64,
    /// Total rate after each improvement round.
    pub round_rates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ngub2Outcome {
    pub selection: Selection,
    pub rate: f64,
    /// Rate of every pass, in order.
    pub pass_rates: Vec<f64>,
}

/// Best-beam table and eligibility shared by both heuristics.
struct Links<'a> {
    instance: &'a Instance,
    best: Vec<usize>,
}

impl<'a> Links<'a> {
    fn new(instance: &'a Instance) -> Self {
        let (na, nu) = (instance.n_aps(), instance.n_ues());
        let mut best = vec![0; na * nu];
        for a in 0..na {
            for u in 0..nu {
                best[a * nu + u] = instance.rss().best_beam(a, u);
            }
        }
        Self { instance, best }
    }

    fn beam(&self, a: usize, u: usize) -> usize {
        self.best[a * self.instance.n_ues() + u]
    }

    fn signal(&self, a: usize, u: usize) -> f64 {
        self.instance.rss().get(self.beam(a, u), u, a)
    }

    fn eligible(&self, a: usize, u: usize) -> bool {
        self.signal(a, u) >= self.instance.rss_threshold()
    }

    fn link(&self, a: usize, u: usize) -> Link {
        Link { beam: self.beam(a, u), ue: u }
    }

    /// Rate of (a, u) against the accumulated interference at `u`.
    fn rate(&self, a: usize, u: usize, interference: &[f64]) -> f64 {
        self.instance.weighted_link_rate(u, self.signal(a, u), interference[u])
    }

    /// Adds the interference of (a, u) on its best beam to every UE.
    fn commit(&self, a: usize, u: usize, interference: &mut [f64]) {
        let beam = self.beam(a, u);
        for (v, i) in interference.iter_mut().enumerate() {
            *i += self.instance.rss().get(beam, v, a);
        }
    }
}

/// NGUB1 with its intermediate results.
pub fn ngub1_traced(instance: &Instance, params: &GreedyParams) -> Result<Ngub1Outcome> {
    if let Some(g) = params.min_round_gain {
        if !(g.is_finite() && g >= 0.0) {
            return Err(Error::InvalidParameter(format!("min_round_gain must be >= 0, got {g}")));
        }
    }
    let links = Links::new(instance);
    let (na, nu) = (instance.n_aps(), instance.n_ues());
    let mut entries: Vec<Option<Link>> = vec![None; na];
    let mut ue_used = vec![false; nu];
    let mut interference = vec![0.0; nu];
    let mut ap_order = Vec::new();

    for _ in 0..na.min(nu) {
        let mut pick: Option<(f64, usize, usize)> = None;
        for a in (0..na).filter(|&a| entries[a].is_none()) {
            for u in (0..nu).filter(|&u| !ue_used[u] && links.eligible(a, u)) {
                let r = links.rate(a, u, &interference);
                if r > 0.0 && pick.is_none_or(|(best, _, _)| r > best) {
                    pick = Some((r, a, u));
                }
            }
        }
        let Some((_, a, u)) = pick else { break };
        entries[a] = Some(links.link(a, u));
        ue_used[u] = true;
        links.commit(a, u, &mut interference);
        ap_order.push(a);
    }

    let initial_rate = weighted_sum_rate_unchecked(instance, &entries);
    let mut rate = initial_rate;
    let mut round_rates = Vec::new();
    for _ in 0..params.rounds(instance) {
        let start = rate;
        for a in 0..na {
            let current = entries[a];
            let mut best: Option<(f64, Link)> = None;
            for u in 0..nu {
                if current.is_some_and(|c| c.ue == u) || !links.eligible(a, u) {
                    continue;
                }
                if entries.iter().enumerate().any(|(a2, e)| a2 != a && e.is_some_and(|l| l.ue == u)) {
                    continue;
                }
                entries[a] = Some(links.link(a, u));
                let r = weighted_sum_rate_unchecked(instance, &entries);
                if r > rate && best.is_none_or(|(b, _)| r > b) {
                    best = Some((r, links.link(a, u)));
                }
            }
            match best {
                Some((r, link)) => {
                    entries[a] = Some(link);
                    rate = r;
                }
                None => entries[a] = current,
            }
        }
        round_rates.push(rate);
        if params.min_round_gain.is_some_and(|g| rate - start < g) {
            break;
        }
    }

    Ok(Ngub1Outcome {
        selection: Selection::from_entries(entries),
        rate,
        ap_order,
        initial_rate,
        round_rates,
    })
}

pub fn ngub1(instance: &Instance, params: &GreedyParams) -> Result<Selection> {
    Ok(ngub1_traced(instance, params)?.selection)
}

/// One NGUB2 pass: visit `ap_order`, giving each AP the free UE with the
/// highest rate against the interference of earlier assignments.
pub fn modified_initial_selection(instance: &Instance, ap_order: &[usize]) -> Result<Selection> {
    let (na, nu) = (instance.n_aps(), instance.n_ues());
    let links = Links::new(instance);
    let mut entries: Vec<Option<Link>> = vec![None; na];
    let mut ue_used = vec![false; nu];
    let mut interference = vec![0.0; nu];
    let mut seen = vec![false; na];
    for &a in ap_order {
        if a >= na {
            return Err(Error::OutOfRange { what: "ap", index: a, bound: na });
        }
        if std::mem::replace(&mut seen[a], true) {
            return Err(Error::InvalidParameter(format!("ap {a} repeated in order")));
        }
        let mut pick: Option<(f64, usize)> = None;
        for u in (0..nu).filter(|&u| !ue_used[u] && links.eligible(a, u)) {
            let r = links.rate(a, u, &interference);
            if r > 0.0 && pick.is_none_or(|(best, _)| r > best) {
                pick = Some((r, u));
            }
        }
        if let Some((_, u)) = pick {
            entries[a] = Some(links.link(a, u));
            ue_used[u] = true;
            links.commit(a, u, &mut interference);
        }
        if ue_used.iter().all(|&x| x) {
            break;
        }
    }
    Ok(Selection::from_entries(entries))
}

/// NGUB2 with the rate of every pass.
pub fn ngub2_traced(instance: &Instance, params: &GreedyParams) -> Result<Ngub2Outcome> {
    let passes = params.passes(instance);
    if passes == 0 {
        return Err(Error::InvalidParameter("j_runs must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut order: Vec<usize> = (0..instance.n_aps()).collect();
    let mut best: Option<(f64, Selection)> = None;
    let mut pass_rates = Vec::with_capacity(passes);
    for _ in 0..passes {
        order.shuffle(&mut rng);
        let sel = modified_initial_selection(instance, &order)?;
        let r = weighted_sum_rate_unchecked(instance, sel.entries());
        pass_rates.push(r);
        if best.as_ref().is_none_or(|(b, _)| r > *b) {
            best = Some((r, sel));
        }
    }
    let (rate, selection) = best.expect("at least one pass");
    Ok(Ngub2Outcome { selection, rate, pass_rates })
}

pub fn ngub2(instance: &Instance, params: &GreedyParams) -> Result<Selection> {
    Ok(ngub2_traced(instance, params)?.selection)
}
