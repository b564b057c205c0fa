//! Local interaction game for UE and beam selection, solved by log-linear
//! learning.
//!
//! Every (AP, UE) pair whose best-beam RSS reaches `s_t` is a player. A
//! player's strategy is `0` (off) or `i >= 1` (on, using beam `i - 1`).
//!
//! Several APs may have more than one active player at once. A player's
//! utility `V_l` is therefore its rate averaged over every way of picking one
//! active player at each interacting AP, normalized by the active-player
//! counts at its own AP and at those APs. The potential `Ψ = Σ V_l` equals
//! the weighted sum rate on feasible profiles. A player's payoff `Y_l` sums
//! `V` over `l` and every player whose utility depends on `z_l`, so a
//! unilateral change moves `Y_l` and `Ψ` by exactly the same amount.
//!
//! Neighbor sets for player `l`:
//!
//! - `N^a`, `N^u`: other players on the same AP, or for the same UE.
//! - `N^g`: players at other APs (not in `N^a ∪ N^u`) whose best beam
//!   reaches `l`'s UE above `i_th`. `N^c` is the converse relation.
//! - Interaction APs: the APs hosting `N^g ∪ N^u`. They are the APs whose
//!   active players enter `l`'s utility; `N^u` is included so that serving
//!   the same UE twice zeroes the utility.
//! - `N^ut`: every other player at `l`'s AP or an interaction AP, i.e. the
//!   players that `V_l` depends on.
//! - Affected set: players whose `N^ut` contains `l`. It covers
//!   `N^a ∪ N^u ∪ N^c`, plus the AP-mates of players that interfere with
//!   `l`'s neighbors.
//! - `N^p`: every player the payoff `Y_l` depends on.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anneal::{sample_index, softmax, Schedule};
use crate::instance::{weighted_sum_rate, Instance, Link, Selection};
use crate::{Error, Result};

/// Strategy per player: `0` = off, `i >= 1` = on with beam `i - 1`.
pub type StrategyProfile = Vec<usize>;

pub const DEFAULT_UTILITY_CAP: usize = 100_000;
pub const DEFAULT_STATE_CAP: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Player {
    pub id: usize,
    pub ap: usize,
    pub ue: usize,
    pub best_beam: usize,
}

#[derive(Debug, Clone)]
pub struct Game<'a> {
    instance: &'a Instance,
    s_t: f64,
    i_th: f64,
    utility_cap: usize,
    players: Vec<Player>,
    by_ap: Vec<Vec<usize>>,
    same_ap: Vec<Vec<usize>>,
    same_ue: Vec<Vec<usize>>,
    interferers: Vec<Vec<usize>>,
    interfered: Vec<Vec<usize>>,
    interaction_aps: Vec<Vec<usize>>,
    utility_deps: Vec<Vec<usize>>,
    affected: Vec<Vec<usize>>,
    payoff_deps: Vec<Vec<usize>>,
}

/// Builds the game: players sorted by (AP, UE).
pub fn build_game(instance: &Instance, s_t: f64, i_th: f64) -> Result<Game<'_>> {
    if !(s_t.is_finite() && s_t >= 0.0 && i_th.is_finite() && i_th >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "thresholds must be finite and non-negative (s_t={s_t}, i_th={i_th})"
        )));
    }
    let rss = instance.rss();
    let (na, nu) = (instance.n_aps(), instance.n_ues());
    let mut players = Vec::new();
    for ap in 0..na {
        for ue in 0..nu {
            let best_beam = rss.best_beam(ap, ue);
            if rss.get(best_beam, ue, ap) >= s_t {
                players.push(Player { id: players.len(), ap, ue, best_beam });
            }
        }
    }
    let n = players.len();
    let mut by_ap = vec![Vec::new(); na];
    for p in &players {
        by_ap[p.ap].push(p.id);
    }
    // Interference the best beam of `from` creates at `to`'s UE.
    let created = |from: &Player, to: &Player| rss.get(from.best_beam, to.ue, from.ap);

    let mut same_ap = vec![Vec::new(); n];
    let mut same_ue = vec![Vec::new(); n];
    let mut interferers = vec![Vec::new(); n];
    let mut interfered = vec![Vec::new(); n];
    for l in &players {
        for m in &players {
            if l.id == m.id {
                continue;
            }
            if m.ap == l.ap {
                same_ap[l.id].push(m.id);
            } else if m.ue == l.ue {
                same_ue[l.id].push(m.id);
            } else {
                if created(m, l) > i_th {
                    interferers[l.id].push(m.id);
                }
                if created(l, m) > i_th {
                    interfered[l.id].push(m.id);
                }
            }
        }
    }

    let mut interaction_aps = vec![Vec::new(); n];
    let mut utility_deps = vec![Vec::new(); n];
    for l in &players {
        let mut aps: Vec<usize> = interferers[l.id]
            .iter()
            .chain(&same_ue[l.id])
            .map(|&m| players[m].ap)
            .collect();
        aps.sort_unstable();
        aps.dedup();
        let mut deps: Vec<usize> = std::iter::once(l.ap)
            .chain(aps.iter().copied())
            .flat_map(|a| by_ap[a].iter().copied())
            .filter(|&m| m != l.id)
            .collect();
        deps.sort_unstable();
        interaction_aps[l.id] = aps;
        utility_deps[l.id] = deps;
    }

    let mut affected = vec![Vec::new(); n];
    for l in 0..n {
        for &m in &utility_deps[l] {
            affected[m].push(l);
        }
    }

    let mut payoff_deps = vec![Vec::new(); n];
    let mut mark = vec![usize::MAX; n];
    for l in 0..n {
        let mut deps = Vec::new();
        let mut add = |m: usize, deps: &mut Vec<usize>| {
            if m != l && mark[m] != l {
                mark[m] = l;
                deps.push(m);
            }
        };
        for &m in &affected[l] {
            add(m, &mut deps);
        }
        for &k in std::iter::once(&l).chain(&affected[l]) {
            for &m in &utility_deps[k] {
                add(m, &mut deps);
            }
        }
        deps.sort_unstable();
        payoff_deps[l] = deps;
    }

    Ok(Game {
        instance,
        s_t,
        i_th,
        utility_cap: DEFAULT_UTILITY_CAP,
        players,
        by_ap,
        same_ap,
        same_ue,
        interferers,
        interfered,
        interaction_aps,
        utility_deps,
        affected,
        payoff_deps,
    })
}

impl<'a> Game<'a> {
    /// Sets the largest number of terms a utility may average over.
    pub fn with_utility_cap(mut self, cap: usize) -> Self {
        self.utility_cap = cap.max(1);
        self
    }

    pub fn instance(&self) -> &'a Instance {
        self.instance
    }

    pub fn s_t(&self) -> f64 {
        self.s_t
    }

    pub fn i_th(&self) -> f64 {
        self.i_th
    }

    pub fn players(&self) -> &[Player] {
        &self.players
    }

    pub fn n_players(&self) -> usize {
        self.players.len()
    }

    /// `N_B + 1`.
    pub fn n_strategies(&self) -> usize {
        self.instance.n_beams() + 1
    }

    pub fn same_ap(&self, l: usize) -> &[usize] {
        &self.same_ap[l]
    }

    pub fn same_ue(&self, l: usize) -> &[usize] {
        &self.same_ue[l]
    }

    /// `N^g`: players that interfere with `l`.
    pub fn interferers(&self, l: usize) -> &[usize] {
        &self.interferers[l]
    }

    /// `N^c`: players that `l` interferes with.
    pub fn interfered(&self, l: usize) -> &[usize] {
        &self.interfered[l]
    }

    pub fn interaction_aps(&self, l: usize) -> &[usize] {
        &self.interaction_aps[l]
    }

    /// `N^ut`: players the utility of `l` depends on.
    pub fn utility_deps(&self, l: usize) -> &[usize] {
        &self.utility_deps[l]
    }

    /// Players whose utility depends on `z_l`.
    pub fn affected(&self, l: usize) -> &[usize] {
        &self.affected[l]
    }

    /// `N^p`: players the payoff of `l` depends on.
    pub fn payoff_deps(&self, l: usize) -> &[usize] {
        &self.payoff_deps[l]
    }

    pub fn all_off(&self) -> StrategyProfile {
        vec![0; self.players.len()]
    }

    pub fn validate_profile(&self, z: &[usize]) -> Result<()> {
        if z.len() != self.players.len() {
            return Err(Error::Dimension {
                what: "strategy profile",
                expected: self.players.len(),
                got: z.len(),
            });
        }
        if let Some(&s) = z.iter().find(|&&s| s >= self.n_strategies()) {
            return Err(Error::OutOfRange {
                what: "strategy",
                index: s,
                bound: self.n_strategies(),
            });
        }
        Ok(())
    }

    fn active_by_ap(&self, z: &[usize]) -> Vec<Vec<usize>> {
        self.by_ap
            .iter()
            .map(|ps| ps.iter().copied().filter(|&p| z[p] > 0).collect())
            .collect()
    }

    /// `V_l`, with the active set of AP `pin.0` optionally replaced by the
    /// single player `pin.1` (that AP then counts one active player).
    fn utility_in(
        &self,
        l: usize,
        z: &[usize],
        active: &[Vec<usize>],
        pin: Option<(usize, usize)>,
    ) -> Result<f64> {
        if z[l] == 0 {
            return Ok(0.0);
        }
        let me = self.players[l];
        let pinned = [pin.map_or(0, |p| p.1)];
        let mut sets: Vec<&[usize]> = Vec::with_capacity(self.interaction_aps[l].len());
        for &ap in &self.interaction_aps[l] {
            match pin {
                Some((pa, _)) if pa == ap => sets.push(&pinned),
                _ if !active[ap].is_empty() => sets.push(&active[ap]),
                _ => {}
            }
        }
        let mut count: usize = 1;
        for s in &sets {
            count = count.saturating_mul(s.len());
        }
        if count > self.utility_cap {
            return Err(Error::CapExceeded {
                what: "utility enumeration",
                size: count as u128,
                cap: self.utility_cap as u128,
            });
        }
        let own = if pin.is_some_and(|p| p.0 == me.ap) { 1 } else { active[me.ap].len() };
        debug_assert!(own >= 1);

        let rss = self.instance.rss();
        let signal = rss.get(z[l] - 1, me.ue, me.ap);
        let mut idx = vec![0usize; sets.len()];
        let mut sum = 0.0;
        loop {
            let mut interference = 0.0;
            let mut clash = false;
            for (k, s) in sets.iter().enumerate() {
                let p = self.players[s[idx[k]]];
                if p.ue == me.ue {
                    clash = true;
                    break;
                }
                interference += rss.get(z[p.id] - 1, me.ue, p.ap);
            }
            if !clash {
                sum += self.instance.weighted_link_rate(me.ue, signal, interference);
            }
            let mut k = 0;
            while k < sets.len() {
                idx[k] += 1;
                if idx[k] < sets[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == sets.len() {
                break;
            }
        }
        Ok(sum / (own * count) as f64)
    }

    /// Utility `V_l(z)`.
    pub fn utility(&self, l: usize, z: &[usize]) -> Result<f64> {
        self.validate_profile(z)?;
        self.utility_in(l, z, &self.active_by_ap(z), None)
    }

    fn payoff_in(&self, l: usize, z: &[usize], active: &[Vec<usize>]) -> Result<f64> {
        let mut y = self.utility_in(l, z, active, None)?;
        for &m in &self.affected[l] {
            y += self.utility_in(m, z, active, None)?;
        }
        Ok(y)
    }

    /// Payoff `Y_l(z)`.
    pub fn payoff(&self, l: usize, z: &[usize]) -> Result<f64> {
        self.validate_profile(z)?;
        self.payoff_in(l, z, &self.active_by_ap(z))
    }

    /// `Y_l(s, z_{-l})` for every strategy `s`.
    pub fn payoffs_all_strategies(&self, l: usize, z: &[usize]) -> Result<Vec<f64>> {
        self.validate_profile(z)?;
        let mut z = z.to_vec();
        let mut active = self.active_by_ap(&z);
        let ap = self.players[l].ap;
        let mut out = Vec::with_capacity(self.n_strategies());
        for s in 0..self.n_strategies() {
            z[l] = s;
            let slot = &mut active[ap];
            match (s > 0, slot.binary_search(&l)) {
                (true, Err(pos)) => slot.insert(pos, l),
                (false, Ok(pos)) => {
                    slot.remove(pos);
                }
                _ => {}
            }
            out.push(self.payoff_in(l, &z, &active)?);
        }
        Ok(out)
    }

    /// Potential `Ψ(z) = Σ_l V_l(z)`.
    pub fn potential(&self, z: &[usize]) -> Result<f64> {
        self.validate_profile(z)?;
        let active = self.active_by_ap(z);
        let mut psi = 0.0;
        for l in 0..self.players.len() {
            psi += self.utility_in(l, z, &active, None)?;
        }
        Ok(psi)
    }

    /// Log-linear choice probabilities `∝ exp(β Y_l(s, z_{-l}))`.
    pub fn gibbs_distribution(&self, l: usize, z: &[usize], beta: f64) -> Result<Vec<f64>> {
        Ok(softmax(&self.payoffs_all_strategies(l, z)?, beta))
    }

    /// Resamples the strategy of `l`.
    pub fn gibbs_update<R: Rng + ?Sized>(
        &self,
        l: usize,
        z: &[usize],
        beta: f64,
        rng: &mut R,
    ) -> Result<usize> {
        let probs = self.gibbs_distribution(l, z, beta)?;
        Ok(sample_index(&probs, rng.random::<f64>()))
    }

    /// Best response of `l`; keeps the current strategy when it is among the
    /// maximizers, otherwise takes the lowest maximizing strategy.
    pub fn best_response(&self, l: usize, z: &[usize]) -> Result<usize> {
        let y = self.payoffs_all_strategies(l, z)?;
        let max = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if y[z[l]] == max {
            return Ok(z[l]);
        }
        Ok(y.iter().position(|v| *v == max).unwrap_or(0))
    }

    /// Players whose closed payoff neighborhoods `{l} ∪ N^p_l` are pairwise
    /// disjoint, built greedily over a random permutation.
    pub fn sample_independent_player_set<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.players.len()).collect();
        order.shuffle(rng);
        let mut claimed = vec![false; self.players.len()];
        let mut set = Vec::new();
        for l in order {
            let closed = || std::iter::once(&l).chain(&self.payoff_deps[l]);
            if closed().any(|&m| claimed[m]) {
                continue;
            }
            for &m in closed() {
                claimed[m] = true;
            }
            set.push(l);
        }
        debug_assert!(self.is_independent(&set));
        set
    }

    pub fn is_independent(&self, set: &[usize]) -> bool {
        let mut owner = vec![usize::MAX; self.players.len()];
        for (k, &l) in set.iter().enumerate() {
            for &m in std::iter::once(&l).chain(&self.payoff_deps[l]) {
                if owner[m] != usize::MAX && owner[m] != k {
                    return false;
                }
                owner[m] = k;
            }
        }
        true
    }

    /// No AP and no UE has more than one active player.
    pub fn is_feasible(&self, z: &[usize]) -> bool {
        let mut ap = vec![false; self.instance.n_aps()];
        let mut ue = vec![false; self.instance.n_ues()];
        self.players.iter().filter(|p| z[p.id] > 0).all(|p| {
            !std::mem::replace(&mut ap[p.ap], true) && !std::mem::replace(&mut ue[p.ue], true)
        })
    }

    /// Selection induced by a feasible profile.
    pub fn to_selection(&self, z: &[usize]) -> Result<Selection> {
        self.validate_profile(z)?;
        if !self.is_feasible(z) {
            return Err(Error::Infeasible("profile has AP or UE conflicts".into()));
        }
        let mut sel = Selection::empty(self.instance.n_aps());
        for p in self.players.iter().filter(|p| z[p.id] > 0) {
            sel.set(p.ap, Some(Link { beam: z[p.id] - 1, ue: p.ue }));
        }
        Ok(sel)
    }

    /// Makes a profile feasible.
    ///
    /// AP conflicts first, lowest AP first. At a conflicted AP, each active
    /// player `l` is scored by the total utility it would support if it were
    /// the AP's only active player: its own utility times the AP's active
    /// count, plus every dependent player's utility with the AP pinned to
    /// `l`. The lowest-scoring player is switched off, which never decreases
    /// `Ψ`. Remaining UE conflicts switch off the lowest player id.
    pub fn feasibility_repair(&self, z: &[usize]) -> Result<RepairOutcome> {
        self.validate_profile(z)?;
        let mut z = z.to_vec();
        let mut steps = Vec::new();
        let mut psi = self.potential(&z)?;
        loop {
            let active = self.active_by_ap(&z);
            let Some(ap) = active.iter().position(|ps| ps.len() >= 2) else { break };
            let k = active[ap].len() as f64;
            let dependents: Vec<usize> = (0..self.players.len())
                .filter(|&m| {
                    z[m] > 0
                        && self.players[m].ap != ap
                        && self.interaction_aps[m].binary_search(&ap).is_ok()
                })
                .collect();
            let mut worst = (f64::INFINITY, usize::MAX);
            for &l in &active[ap] {
                let mut st = k * self.utility_in(l, &z, &active, None)?;
                for &m in &dependents {
                    st += self.utility_in(m, &z, &active, Some((ap, l)))?;
                }
                if st < worst.0 {
                    worst = (st, l);
                }
            }
            z[worst.1] = 0;
            let after = self.potential(&z)?;
            assert!(
                after >= psi - 1e-9 * psi.abs().max(1.0),
                "repair decreased the potential: {psi} -> {after}"
            );
            steps.push(RepairStep { player: worst.1, reason: Conflict::Ap(ap), psi_before: psi, psi_after: after });
            psi = after;
        }
        loop {
            let mut first = vec![usize::MAX; self.instance.n_ues()];
            let mut victim = None;
            for p in self.players.iter().filter(|p| z[p.id] > 0) {
                if first[p.ue] == usize::MAX {
                    first[p.ue] = p.id;
                } else {
                    let c = (p.ue, first[p.ue].min(p.id));
                    victim = Some(victim.map_or(c, |v: (usize, usize)| v.min(c)));
                }
            }
            let Some((ue, l)) = victim else { break };
            z[l] = 0;
            let after = self.potential(&z)?;
            steps.push(RepairStep { player: l, reason: Conflict::Ue(ue), psi_before: psi, psi_after: after });
            psi = after;
        }
        debug_assert!(self.is_feasible(&z));
        Ok(RepairOutcome { profile: z, steps })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conflict {
    Ap(usize),
    Ue(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepairStep {
    pub player: usize,
    pub reason: Conflict,
    pub psi_before: f64,
    pub psi_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepairOutcome {
    pub profile: StrategyProfile,
    pub steps: Vec<RepairStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LigParams {
    pub schedule: Schedule,
    pub max_iters: usize,
    pub seed: u64,
    /// Stop once every player's most likely strategy has probability at
    /// least `1 - eps`.
    pub stop_epsilon: Option<f64>,
    /// Replace log-linear sampling by best responses. Converges to some
    /// equilibrium, not necessarily an optimal one.
    pub best_response: bool,
    pub record_trace: bool,
}

impl Default for LigParams {
    fn default() -> Self {
        Self {
            schedule: Schedule::log(2.0),
            max_iters: 5000,
            seed: 0,
            stop_epsilon: None,
            best_response: false,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LigTraceRow {
    pub iteration: usize,
    pub potential: f64,
    pub n_active: usize,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LigTrace {
    pub rows: Vec<LigTraceRow>,
}

impl LigTrace {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,potential,n_active,feasible\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{}", r.iteration, r.potential, r.n_active, u8::from(r.feasible));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LigOutcome {
    /// Profile after the last iteration, before repair.
    pub raw_profile: StrategyProfile,
    /// Feasible profile after repair.
    pub profile: StrategyProfile,
    pub selection: Selection,
    /// `Ψ` of the repaired profile.
    pub potential: f64,
    /// Weighted sum rate of `selection`.
    pub rate: f64,
    pub iterations: usize,
    pub repair: Vec<RepairStep>,
    pub trace: LigTrace,
}

/// Runs log-linear learning from the all-off profile, then repairs the final
/// profile to feasibility.
pub fn lig_select(game: &Game<'_>, params: &LigParams) -> Result<LigOutcome> {
    params.schedule.validate()?;
    if params.max_iters == 0 {
        return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
    }
    if let Some(eps) = params.stop_epsilon {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParameter(format!("stop_epsilon must be in (0, 1), got {eps}")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut z = game.all_off();
    let mut trace = LigTrace::default();
    let mut iterations = 0;
    if game.n_players() > 0 {
        for i in 1..=params.max_iters {
            iterations = i;
            let beta = params.schedule.at(i);
            let set = game.sample_independent_player_set(&mut rng);
            let draws: Vec<f64> = set.iter().map(|_| rng.random::<f64>()).collect();
            let update = |(&l, &u): (&usize, &f64)| -> Result<(usize, usize)> {
                let s = if params.best_response {
                    game.best_response(l, &z)?
                } else {
                    sample_index(&game.gibbs_distribution(l, &z, beta)?, u)
                };
                Ok((l, s))
            };
            // Members have disjoint payoff neighborhoods, so updating them
            // from the same snapshot equals updating them one by one.
            let updates: Vec<(usize, usize)> = if set.len() >= 4 {
                set.par_iter().zip(&draws).map(update).collect::<Result<_>>()?
            } else {
                set.iter().zip(&draws).map(update).collect::<Result<_>>()?
            };
            for (l, s) in updates {
                z[l] = s;
            }
            if params.record_trace {
                trace.rows.push(LigTraceRow {
                    iteration: i,
                    potential: game.potential(&z)?,
                    n_active: z.iter().filter(|s| **s > 0).count(),
                    feasible: game.is_feasible(&z),
                });
            }
            if let Some(eps) = params.stop_epsilon {
                if concentrated(game, &z, beta, eps)? {
                    break;
                }
            }
        }
    }
    let repaired = game.feasibility_repair(&z)?;
    let selection = game.to_selection(&repaired.profile)?;
    Ok(LigOutcome {
        potential: game.potential(&repaired.profile)?,
        rate: weighted_sum_rate(game.instance(), &selection)?,
        raw_profile: z,
        profile: repaired.profile,
        selection,
        iterations,
        repair: repaired.steps,
        trace,
    })
}

fn concentrated(game: &Game<'_>, z: &[usize], beta: f64, eps: f64) -> Result<bool> {
    for l in 0..game.n_players() {
        let p = game.gibbs_distribution(l, z, beta)?;
        if p.iter().cloned().fold(0.0, f64::max) < 1.0 - eps {
            return Ok(false);
        }
    }
    Ok(true)
}

/// All profiles of a small game, in mixed radix (player 0 most significant).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StrategySpace {
    pub n_players: usize,
    pub n_strategies: usize,
}

impl StrategySpace {
    pub fn of(game: &Game<'_>) -> Self {
        Self { n_players: game.n_players(), n_strategies: game.n_strategies() }
    }

    pub fn checked_size(&self, cap: usize) -> Result<usize> {
        let size = u32::try_from(self.n_players)
            .ok()
            .and_then(|n| (self.n_strategies as u128).checked_pow(n));
        match size {
            Some(s) if s <= cap as u128 => Ok(s as usize),
            s => Err(Error::CapExceeded {
                what: "strategy space",
                size: s.unwrap_or(u128::MAX),
                cap: cap as u128,
            }),
        }
    }

    pub fn decode(&self, mut index: usize) -> StrategyProfile {
        let mut z = vec![0; self.n_players];
        for l in (0..self.n_players).rev() {
            z[l] = index % self.n_strategies;
            index /= self.n_strategies;
        }
        z
    }

    pub fn encode(&self, z: &[usize]) -> usize {
        z.iter().fold(0, |acc, &s| acc * self.n_strategies + s)
    }
}

/// Convergence diagnostics for the single-player-update chain, where each
/// iteration picks one player uniformly and resamples its strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationBound {
    /// Smallest log-linear choice probability over all profiles, players and
    /// strategies.
    pub eta: f64,
    /// `eta / L`: smallest probability of any specific single-player move,
    /// including the uniform choice of the player.
    pub eta_step: f64,
    /// Largest number of single-player moves from any profile to the
    /// nearest potential-maximizing profile.
    pub d: usize,
    /// 1 iff the all-off start is potential-maximizing.
    pub nu0: f64,
    /// `D (1 - ν0) / eta_step^D`.
    pub bound: f64,
    /// Flags for the potential-maximizing profiles, by state index.
    pub optimal: Vec<bool>,
}

/// Exact `η`, `D` and the expected-iteration bound.
pub fn eta_and_bound(game: &Game<'_>, beta: f64, cap: usize) -> Result<IterationBound> {
    let space = StrategySpace::of(game);
    let n = space.checked_size(cap)?;
    let nl = game.n_players();
    let mut psi = Vec::with_capacity(n);
    let mut eta = 1.0f64;
    for i in 0..n {
        let z = space.decode(i);
        psi.push(game.potential(&z)?);
        for l in 0..nl {
            let p = game.gibbs_distribution(l, &z, beta)?;
            eta = p.iter().cloned().fold(eta, f64::min);
        }
    }
    let max = psi.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-9 * max.abs().max(1.0);
    let optimal: Vec<bool> = psi.iter().map(|v| *v >= max - tol).collect();

    // Multi-source BFS from the optimal profiles over single-player moves.
    let mut dist = vec![usize::MAX; n];
    let mut queue = std::collections::VecDeque::new();
    for i in (0..n).filter(|&i| optimal[i]) {
        dist[i] = 0;
        queue.push_back(i);
    }
    while let Some(i) = queue.pop_front() {
        let z = space.decode(i);
        for l in 0..nl {
            for s in 0..space.n_strategies {
                if s == z[l] {
                    continue;
                }
                let mut w = z.clone();
                w[l] = s;
                let j = space.encode(&w);
                if dist[j] == usize::MAX {
                    dist[j] = dist[i] + 1;
                    queue.push_back(j);
                }
            }
        }
    }
    let d = dist.iter().copied().max().unwrap_or(0);
    let nu0 = if optimal[0] { 1.0 } else { 0.0 };
    let eta_step = if nl == 0 { eta } else { eta / nl as f64 };
    let bound = if nu0 == 1.0 || d == 0 {
        0.0
    } else {
        d as f64 * (1.0 - nu0) / eta_step.powi(d as i32)
    };
    Ok(IterationBound { eta, eta_step, d, nu0, bound, optimal })
}

/// Dense transition matrix of the single-player-update chain at fixed `beta`.
pub fn single_update_transition_matrix(game: &Game<'_>, beta: f64, cap: usize) -> Result<Vec<Vec<f64>>> {
    let space = StrategySpace::of(game);
    let n = space.checked_size(cap)?;
    let nl = game.n_players();
    let mut p = vec![vec![0.0; n]; n];
    for (i, row) in p.iter_mut().enumerate() {
        let z = space.decode(i);
        for l in 0..nl {
            let probs = game.gibbs_distribution(l, &z, beta)?;
            for (s, q) in probs.into_iter().enumerate() {
                let mut w = z.clone();
                w[l] = s;
                row[space.encode(&w)] += q / nl as f64;
            }
        }
    }
    Ok(p)
}

/// Iterations the single-player-update chain needs, starting all-off, to
/// reach a profile flagged in `optimal`. `None` if not reached in `max_iters`.
pub fn first_hitting_iteration<R: Rng + ?Sized>(
    game: &Game<'_>,
    beta: f64,
    optimal: &[bool],
    rng: &mut R,
    max_iters: usize,
) -> Result<Option<usize>> {
    let space = StrategySpace::of(game);
    let mut z = game.all_off();
    if optimal[space.encode(&z)] {
        return Ok(Some(0));
    }
    if game.n_players() == 0 {
        return Ok(None);
    }
    for i in 1..=max_iters {
        let l = rng.random_range(0..game.n_players());
        z[l] = game.gibbs_update(l, &z, beta, rng)?;
        if optimal[space.encode(&z)] {
            return Ok(Some(i));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exhaustive::{exhaustive_select, ExhaustiveParams};
    use crate::instance::random_instance;
    use crate::RssTensor;
    use proptest::prelude::*;
    use rand::Rng;

    fn rand_inst(seed: u64, na: usize, nu: usize, nb: usize) -> Instance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_instance(&mut rng, na, nu, nb, 0.0, 40.0).unwrap()
    }

    fn random_profile(game: &Game<'_>, rng: &mut impl Rng) -> StrategyProfile {
        (0..game.n_players()).map(|_| rng.random_range(0..game.n_strategies())).collect()
    }

    #[test]
    fn threshold_above_max_rss_gives_empty_game() {
        let inst = rand_inst(1, 2, 3, 2);
        let g = build_game(&inst, 1e9, 0.0).unwrap();
        assert_eq!(g.n_players(), 0);
        let out = lig_select(&g, &LigParams { max_iters: 10, ..Default::default() }).unwrap();
        assert_eq!(out.selection, Selection::empty(2));
        assert!(build_game(&inst, -1.0, 0.0).is_err());
    }

    #[test]
    fn isolated_links_have_no_interference_neighbors() {
        let rss = RssTensor::new(2, 2, 1, vec![10.0, 1e-6, 1e-6, 10.0]).unwrap();
        let inst = Instance::normalized(rss);
        let g = build_game(&inst, 1.0, 1e-3).unwrap();
        assert_eq!(g.n_players(), 2);
        for l in 0..2 {
            assert!(g.interferers(l).is_empty() && g.interfered(l).is_empty());
        }
    }

    #[test]
    fn dense_two_by_two_neighbor_sets() {
        let inst = Instance::normalized(RssTensor::new(2, 2, 1, vec![5.0; 4]).unwrap());
        let g = build_game(&inst, 1.0, 0.1).unwrap();
        // Players: 0=(a0,u0) 1=(a0,u1) 2=(a1,u0) 3=(a1,u1).
        assert_eq!(g.same_ap(0), &[1]);
        assert_eq!(g.same_ue(0), &[2]);
        assert_eq!(g.interferers(0), &[3]);
        assert_eq!(g.interfered(0), &[3]);
        for l in 0..4 {
            assert_eq!(g.same_ap(l).len(), 1);
            assert_eq!(g.same_ue(l).len(), 1);
        }
    }

    #[test]
    fn duality_and_dependency_sets() {
        for seed in 0..20 {
            let inst = rand_inst(seed, 3, 4, 2);
            let g = build_game(&inst, 3.0, 5.0).unwrap();
            for l in 0..g.n_players() {
                for &m in g.interferers(l) {
                    assert!(g.interfered(m).contains(&l));
                }
                for &m in g.interfered(l) {
                    assert!(g.interferers(m).contains(&l));
                }
                // The affected set covers the classical payoff neighborhood.
                for &m in g.same_ap(l).iter().chain(g.same_ue(l)).chain(g.interfered(l)) {
                    assert!(g.affected(l).contains(&m));
                }
            }
        }
    }

    #[test]
    fn single_active_per_ap_utility_is_link_rate() {
        for seed in 0..50 {
            let inst = rand_inst(100 + seed, 3, 4, 2);
            let g = build_game(&inst, 0.0, 0.0).unwrap();
            // AP a serves UE a on beam a % 2.
            let mut z = g.all_off();
            let mut sel = Selection::empty(3);
            for p in g.players() {
                if p.ue == p.ap {
                    z[p.id] = 1 + p.ap % 2;
                    sel.set(p.ap, Some(Link { beam: p.ap % 2, ue: p.ue }));
                }
            }
            let rss = inst.rss();
            for p in g.players().iter().filter(|p| z[p.id] > 0) {
                let i: f64 = (0..3).filter(|&a| a != p.ap).map(|a| rss.get(a % 2, p.ue, a)).sum();
                let r = (1.0 + rss.get(p.ap % 2, p.ue, p.ap) / (1.0 + i)).log2();
                assert!((g.utility(p.id, &z).unwrap() - r).abs() < 1e-9);
            }
            let wsr = weighted_sum_rate(&inst, &sel).unwrap();
            assert!((g.potential(&z).unwrap() - wsr).abs() < 1e-9);
        }
    }

    #[test]
    fn worked_averaging_example() {
        // Nine players: AP0 serves UEs 0-1, AP1 UEs 2-4, AP2 UEs 5-8. Only
        // own UEs are eligible; every AP leaks weakly to every UE, and the
        // leak depends on the beam, so each combination differs.
        let own = |u: usize, a: usize| matches!((a, u), (0, 0..=1) | (1, 2..=4) | (2, 5..=8));
        let rss = RssTensor::from_fn(3, 9, 3, |b, u, a| {
            if own(u, a) {
                50.0 + (u + b) as f64
            } else {
                0.3 + 0.1 * (u + a) as f64 + 0.7 * b as f64
            }
        })
        .unwrap();
        let inst = Instance::normalized(rss);
        let g = build_game(&inst, 10.0, 0.01).unwrap();
        assert_eq!(g.n_players(), 9);
        let z = vec![1, 3, 2, 1, 3, 2, 1, 2, 3];
        let p8 = g.players()[7];
        assert_eq!((p8.ap, p8.ue), (2, 7));
        let r = inst.rss();
        let mut sum = 0.0;
        for i in 0..2 {
            for j in 2..5 {
                let interference = r.get(z[i] - 1, 7, 0) + r.get(z[j] - 1, 7, 1);
                sum += (1.0 + r.get(z[7] - 1, 7, 2) / (1.0 + interference)).log2();
            }
        }
        assert!((g.utility(7, &z).unwrap() - sum / 24.0).abs() < 1e-12);
        assert_eq!(g.utility(7, &g.all_off()).unwrap(), 0.0);
    }

    #[test]
    fn payoff_examples() {
        let rss = RssTensor::new(2, 2, 1, vec![10.0, 1e-9, 1e-9, 10.0]).unwrap();
        let inst = Instance::normalized(rss);
        let g = build_game(&inst, 1.0, 1e-3).unwrap();
        assert_eq!(g.n_players(), 2);
        let z = vec![1, 1];
        assert_eq!(g.payoff(0, &z).unwrap(), g.utility(0, &z).unwrap());

        let dense = Instance::normalized(RssTensor::new(2, 2, 1, vec![10.0, 3.0, 3.0, 10.0]).unwrap());
        let g = build_game(&dense, 5.0, 1.0).unwrap();
        assert_eq!(g.n_players(), 2);
        let y = g.payoff(0, &z).unwrap();
        let v = g.utility(0, &z).unwrap() + g.utility(1, &z).unwrap();
        assert!((y - v).abs() < 1e-12);
        assert!((v - 2.0 * (1.0f64 + 10.0 / 4.0).log2()).abs() < 1e-12);
    }

    #[test]
    fn same_ue_players_get_zero_utility() {
        let inst = rand_inst(5, 2, 2, 2);
        let g = build_game(&inst, 0.0, 0.0).unwrap();
        // Players 0=(a0,u0) and 2=(a1,u0) both on.
        let z = vec![1, 0, 2, 0];
        assert_eq!(g.utility(0, &z).unwrap(), 0.0);
        assert_eq!(g.utility(2, &z).unwrap(), 0.0);
        assert_eq!(g.potential(&z).unwrap(), 0.0);
        assert_eq!(g.potential(&g.all_off()).unwrap(), 0.0);
    }

    #[test]
    fn utility_cap_is_enforced() {
        let inst = rand_inst(6, 3, 6, 1);
        let g = build_game(&inst, 0.0, 0.0).unwrap().with_utility_cap(10);
        let z = vec![1; g.n_players()];
        assert!(matches!(g.utility(0, &z), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn independent_sets() {
        let inst = rand_inst(7, 3, 4, 2);
        let g = build_game(&inst, 0.0, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(g.sample_independent_player_set(&mut rng).len(), 1);
        }
        // Two far-apart cells: one player each, no interaction.
        let rss = RssTensor::new(2, 2, 1, vec![10.0, 0.0, 0.0, 10.0]).unwrap();
        let inst = Instance::normalized(rss);
        let g = build_game(&inst, 1.0, 0.0).unwrap();
        let set = g.sample_independent_player_set(&mut rng);
        assert_eq!(set.len(), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for seed in 0..10 {
            let inst = rand_inst(seed, 4, 5, 2);
            let g = build_game(&inst, 10.0, 300.0).unwrap();
            for _ in 0..100 {
                assert!(g.is_independent(&g.sample_independent_player_set(&mut rng)));
            }
        }
    }

    #[test]
    fn gibbs_limits() {
        let inst = rand_inst(8, 2, 2, 3);
        let g = build_game(&inst, 0.0, 0.0).unwrap();
        let z = g.all_off();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut counts = [0.0; 4];
        for _ in 0..10_000 {
            counts[g.gibbs_update(0, &z, 0.0, &mut rng).unwrap()] += 1.0;
        }
        let chi2: f64 = counts.iter().map(|c| (c - 2500.0) * (c - 2500.0) / 2500.0).sum();
        assert!(chi2 < 16.27, "chi2 = {chi2}"); // df = 3, p = 0.001

        let y = g.payoffs_all_strategies(0, &z).unwrap();
        let best = (0..4).max_by(|&a, &b| y[a].total_cmp(&y[b])).unwrap();
        let hits = (0..10_000).filter(|_| g.gibbs_update(0, &z, 1e3, &mut rng).unwrap() == best).count();
        assert!(hits >= 9990);

        // One beam duplicated: two tied best strategies.
        let rss = RssTensor::new(1, 1, 2, vec![4.0, 4.0]).unwrap();
        let inst = Instance::normalized(rss);
        let g = build_game(&inst, 0.0, 0.0).unwrap();
        let p = g.gibbs_distribution(0, &[0], 1e3).unwrap();
        assert!((p[1] - 0.5).abs() < 1e-12 && (p[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_player_converges_to_best_beam() {
        let rss = RssTensor::new(1, 1, 3, vec![2.0, 9.0, 4.0]).unwrap();
        let inst = Instance::normalized(rss);
        let g = build_game(&inst, 0.0, 0.0).unwrap();
        let out = lig_select(&g, &LigParams { max_iters: 500, ..Default::default() }).unwrap();
        assert_eq!(out.profile, vec![2]);
        let br = lig_select(&g, &LigParams { best_response: true, max_iters: 5, ..Default::default() }).unwrap();
        assert_eq!(br.profile, vec![2]);
    }

    #[test]
    fn ruinous_interference_leaves_one_link() {
        let rss = RssTensor::from_fn(3, 3, 1, |_, u, a| if u == a { 100.0 } else { 1000.0 }).unwrap();
        let inst = Instance::normalized(rss);
        let g = build_game(&inst, 50.0, 0.0).unwrap();
        let out = lig_select(&g, &LigParams { seed: 1, ..Default::default() }).unwrap();
        assert_eq!(out.selection.num_active(), 1);
        let best = exhaustive_select(&inst, &ExhaustiveParams::default()).unwrap();
        assert!((out.rate - best.rate).abs() < 1e-9);
    }

    #[test]
    fn annealed_game_never_beats_optimum_and_usually_finds_it() {
        let mut hits = 0;
        for seed in 0..100 {
            let inst = rand_inst(2000 + seed, 2, 2, 2);
            let best = exhaustive_select(&inst, &ExhaustiveParams::default()).unwrap().rate;
            let g = build_game(&inst, 0.0, 0.0).unwrap();
            let out = lig_select(&g, &LigParams { seed, max_iters: 2000, ..Default::default() }).unwrap();
            assert!(out.rate <= best + 1e-9);
            assert!((out.potential - out.rate).abs() < 1e-9);
            if (out.potential - best).abs() <= 1e-9 {
                hits += 1;
            }
        }
        // Trapping behind multi-bit barriers is expected on some draws.
        assert!(hits >= 60, "hits = {hits}");
    }

    #[test]
    fn repair_examples() {
        let inst = rand_inst(9, 2, 3, 2);
        let g = build_game(&inst, 0.0, 0.0).unwrap();
        // Players (a0,u0..2)=0..2, (a1,u0..2)=3..5.
        let feasible = vec![1, 0, 0, 0, 2, 0];
        assert_eq!(g.feasibility_repair(&feasible).unwrap().profile, feasible);

        let two_on_ap = vec![1, 2, 0, 0, 0, 0];
        let out = g.feasibility_repair(&two_on_ap).unwrap();
        assert_eq!(out.steps.len(), 1);
        assert_eq!(out.profile.iter().filter(|s| **s > 0).count(), 1);
        assert!(out.steps[0].psi_after >= out.steps[0].psi_before);

        let two_on_ue = vec![1, 0, 0, 2, 0, 0];
        let out = g.feasibility_repair(&two_on_ue).unwrap();
        assert_eq!(out.profile, vec![0, 0, 0, 2, 0, 0]);
        assert_eq!(out.steps[0].reason, Conflict::Ue(0));
        assert_eq!(out.steps[0].psi_before, 0.0);
    }

    #[test]
    fn eta_bound_single_player() {
        let rss = RssTensor::new(1, 1, 1, vec![3.0]).unwrap();
        let inst = Instance::normalized(rss);
        let g = build_game(&inst, 0.0, 0.0).unwrap();
        let beta = 0.7;
        let b = eta_and_bound(&g, beta, DEFAULT_STATE_CAP).unwrap();
        // Payoffs 0 (off) and 2 (on); η is the smaller softmax probability.
        let eta = 1.0 / (1.0 + (beta * 2.0f64).exp());
        assert!((b.eta - eta).abs() < 1e-15);
        assert_eq!(b.d, 1);
        assert_eq!(b.nu0, 0.0);
        assert!((b.bound - 1.0 / eta).abs() < 1e-9);

        let b0 = eta_and_bound(&g, 0.0, DEFAULT_STATE_CAP).unwrap();
        assert_eq!(b0.eta, 0.5);

        // All-off optimal: zero weight makes every profile score 0.
        let inst = Instance::new(RssTensor::new(1, 1, 1, vec![3.0]).unwrap(), vec![0.0], 1.0, 1.0, 0.0).unwrap();
        let g = build_game(&inst, 0.0, 0.0).unwrap();
        let b = eta_and_bound(&g, 1.0, DEFAULT_STATE_CAP).unwrap();
        assert_eq!((b.nu0, b.bound), (1.0, 0.0));
    }

    #[test]
    fn single_update_chain_detailed_balance() {
        for seed in 0..5 {
            let rss_seed = 300 + seed;
            let inst = rand_inst(rss_seed, 2, 2, 1);
            let g = build_game(&inst, 0.0, 0.0).unwrap();
            assert_eq!(g.n_players(), 4);
            assert!(single_update_transition_matrix(&g, 1.0, 15).is_err());
            for beta in [0.0, 0.5, 3.0] {
                let p = single_update_transition_matrix(&g, beta, DEFAULT_STATE_CAP).unwrap();
                let space = StrategySpace::of(&g);
                let psi: Vec<f64> = (0..p.len()).map(|i| g.potential(&space.decode(i)).unwrap()).collect();
                let pi = softmax(&psi, beta);
                for r in 0..p.len() {
                    assert!((p[r].iter().sum::<f64>() - 1.0).abs() < 1e-12);
                    for c in 0..p.len() {
                        assert!((pi[r] * p[r][c] - pi[c] * p[c][r]).abs() < 1e-9);
                    }
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn potential_identity(seed in any::<u64>(), na in 1usize..4, nu in 1usize..4, nb in 1usize..3, sparse in any::<bool>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let inst = random_instance(&mut rng, na, nu, nb, -10.0, 30.0).unwrap();
            let (s_t, i_th) = if sparse { (1.0, 2.0) } else { (0.0, 0.0) };
            let g = build_game(&inst, s_t, i_th).unwrap();
            prop_assume!(g.n_players() > 0);
            let z = random_profile(&g, &mut rng);
            let l = rng.random_range(0..g.n_players());
            let s = rng.random_range(0..g.n_strategies());
            let mut w = z.clone();
            w[l] = s;
            let dy = g.payoff(l, &w).unwrap() - g.payoff(l, &z).unwrap();
            let dpsi = g.potential(&w).unwrap() - g.potential(&z).unwrap();
            prop_assert!((dy - dpsi).abs() <= 1e-9, "{} vs {}", dy, dpsi);
        }

        #[test]
        fn repair_is_feasible_and_monotone(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let inst = random_instance(&mut rng, 3, 3, 2, -10.0, 30.0).unwrap();
            let g = build_game(&inst, 0.0, 0.0).unwrap();
            let z = random_profile(&g, &mut rng);
            let out = g.feasibility_repair(&z).unwrap();
            prop_assert!(g.is_feasible(&out.profile));
            for st in &out.steps {
                prop_assert!(st.psi_after >= st.psi_before - 1e-9);
            }
            let sel = g.to_selection(&out.profile).unwrap();
            let psi = g.potential(&out.profile).unwrap();
            prop_assert!((psi - weighted_sum_rate(&inst, &sel).unwrap()).abs() <= 1e-9);
        }
    }
}
