//! Scheduling instance data model and the weighted-sum-rate objective.
//!
//! Powers are linear watts internally. Instance files store them in dBm;
//! a zero-watt entry is written as JSON `null`.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Received signal strengths `S[b][u][a]` in watts.
#[derive(Debug, Clone, PartialEq)]
pub struct RssTensor {
    n_aps: usize,
    n_ues: usize,
    n_beams: usize,
    data: Vec<f64>,
}

impl RssTensor {
    /// `data` is row-major over (beam, ue, ap): index `(b * n_ues + u) * n_aps + a`.
    pub fn new(n_aps: usize, n_ues: usize, n_beams: usize, data: Vec<f64>) -> Result<Self> {
        if n_aps == 0 || n_ues == 0 || n_beams == 0 {
            return Err(Error::InvalidInstance(format!(
                "dimensions must be positive (n_aps={n_aps}, n_ues={n_ues}, n_beams={n_beams})"
            )));
        }
        let expected = n_aps * n_ues * n_beams;
        if data.len() != expected {
            return Err(Error::Dimension {
                what: "rss tensor",
                expected,
                got: data.len(),
            });
        }
        if let Some(bad) = data.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::InvalidInstance(format!(
                "rss entries must be finite and non-negative, found {bad}"
            )));
        }
        Ok(Self {
            n_aps,
            n_ues,
            n_beams,
            data,
        })
    }

    pub fn from_fn(
        n_aps: usize,
        n_ues: usize,
        n_beams: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(n_aps * n_ues * n_beams);
        for b in 0..n_beams {
            for u in 0..n_ues {
                for a in 0..n_aps {
                    data.push(f(b, u, a));
                }
            }
        }
        Self::new(n_aps, n_ues, n_beams, data)
    }

    pub fn n_aps(&self) -> usize {
        self.n_aps
    }

    pub fn n_ues(&self) -> usize {
        self.n_ues
    }

    pub fn n_beams(&self) -> usize {
        self.n_beams
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, beam: usize, ue: usize, ap: usize) -> f64 {
        debug_assert!(beam < self.n_beams && ue < self.n_ues && ap < self.n_aps);
        self.data[(beam * self.n_ues + ue) * self.n_aps + ap]
    }

    pub fn set(&mut self, beam: usize, ue: usize, ap: usize, watts: f64) -> Result<()> {
        if !(watts.is_finite() && watts >= 0.0) {
            return Err(Error::InvalidInstance(format!("bad rss value {watts}")));
        }
        let i = (beam * self.n_ues + ue) * self.n_aps + ap;
        self.data[i] = watts;
        Ok(())
    }

    /// Beam of `ap` with the largest RSS at `ue`; lowest index on ties.
    pub fn best_beam(&self, ap: usize, ue: usize) -> usize {
        let mut best = 0;
        for b in 1..self.n_beams {
            if self.get(b, ue, ap) > self.get(best, ue, ap) {
                best = b;
            }
        }
        best
    }
}

/// One scheduling problem: RSS, per-UE weights, noise, bandwidth and the
/// minimum usable RSS.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    rss: RssTensor,
    weights: Vec<f64>,
    noise_power: f64,
    bandwidth: f64,
    rss_threshold: f64,
}

impl Instance {
    pub fn new(
        rss: RssTensor,
        weights: Vec<f64>,
        noise_power: f64,
        bandwidth: f64,
        rss_threshold: f64,
    ) -> Result<Self> {
        if weights.len() != rss.n_ues() {
            return Err(Error::Dimension {
                what: "weights",
                expected: rss.n_ues(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidInstance(
                "weights must be finite and non-negative".into(),
            ));
        }
        if !(noise_power.is_finite() && noise_power > 0.0) {
            return Err(Error::InvalidInstance(format!(
                "noise power must be positive, got {noise_power}"
            )));
        }
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::InvalidInstance(format!(
                "bandwidth must be positive, got {bandwidth}"
            )));
        }
        if !(rss_threshold.is_finite() && rss_threshold >= 0.0) {
            return Err(Error::InvalidInstance(format!(
                "rss threshold must be non-negative, got {rss_threshold}"
            )));
        }
        Ok(Self {
            rss,
            weights,
            noise_power,
            bandwidth,
            rss_threshold,
        })
    }

    /// Unit weights, `N0 = 1`, `B = 1` and no RSS threshold. Rates are then
    /// spectral efficiencies in bits/s/Hz.
    pub fn normalized(rss: RssTensor) -> Self {
        let n = rss.n_ues();
        Self::new(rss, vec![1.0; n], 1.0, 1.0, 0.0).expect("normalized instance is valid")
    }

    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Self::new(
            self.rss.clone(),
            weights,
            self.noise_power,
            self.bandwidth,
            self.rss_threshold,
        )
    }

    pub fn with_rss_threshold(&self, rss_threshold: f64) -> Result<Self> {
        Self::new(
            self.rss.clone(),
            self.weights.clone(),
            self.noise_power,
            self.bandwidth,
            rss_threshold,
        )
    }

    pub fn rss(&self) -> &RssTensor {
        &self.rss
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn rss_threshold(&self) -> f64 {
        self.rss_threshold
    }

    pub fn n_aps(&self) -> usize {
        self.rss.n_aps
    }

    pub fn n_ues(&self) -> usize {
        self.rss.n_ues
    }

    pub fn n_beams(&self) -> usize {
        self.rss.n_beams
    }

    /// Unweighted rate `B log2(1 + S / (N0 + I))`.
    #[inline]
    pub fn link_rate(&self, signal: f64, interference: f64) -> f64 {
        self.bandwidth * (signal / (self.noise_power + interference)).ln_1p() / std::f64::consts::LN_2
    }

    /// Weighted rate of `ue` for the given signal and interference.
    #[inline]
    pub fn weighted_link_rate(&self, ue: usize, signal: f64, interference: f64) -> f64 {
        let w = self.weights[ue];
        if w == 0.0 {
            return 0.0;
        }
        w * self.link_rate(signal, interference)
    }
}

/// A served link: which beam an AP uses and which UE it serves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Link {
    pub beam: usize,
    pub ue: usize,
}

/// Per-AP optional link assignment.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Selection {
    entries: Vec<Option<Link>>,
}

impl Selection {
    pub fn empty(n_aps: usize) -> Self {
        Self {
            entries: vec![None; n_aps],
        }
    }

    pub fn from_entries(entries: Vec<Option<Link>>) -> Self {
        Self { entries }
    }

    /// Selection induced by full beam and UE vectors (every AP active).
    pub fn from_vectors(beams: &[usize], ues: &[usize]) -> Result<Self> {
        if beams.len() != ues.len() {
            return Err(Error::Dimension {
                what: "ue vector",
                expected: beams.len(),
                got: ues.len(),
            });
        }
        Ok(Self {
            entries: beams
                .iter()
                .zip(ues)
                .map(|(&beam, &ue)| Some(Link { beam, ue }))
                .collect(),
        })
    }

    pub fn entries(&self) -> &[Option<Link>] {
        &self.entries
    }

    pub fn n_aps(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, ap: usize) -> Option<Link> {
        self.entries[ap]
    }

    pub fn set(&mut self, ap: usize, link: Option<Link>) {
        self.entries[ap] = link;
    }

    /// `(ap, link)` for every active AP, in AP order.
    pub fn active(&self) -> impl Iterator<Item = (usize, Link)> + '_ {
        self.entries
            .iter()
            .enumerate()
            .filter_map(|(a, e)| e.map(|l| (a, l)))
    }

    pub fn num_active(&self) -> usize {
        self.entries.iter().filter(|e| e.is_some()).count()
    }

    pub fn validate(&self, instance: &Instance) -> Result<()> {
        if self.entries.len() != instance.n_aps() {
            return Err(Error::Dimension {
                what: "selection",
                expected: instance.n_aps(),
                got: self.entries.len(),
            });
        }
        let mut seen = vec![false; instance.n_ues()];
        for (_, link) in self.active() {
            if link.beam >= instance.n_beams() {
                return Err(Error::OutOfRange {
                    what: "beam",
                    index: link.beam,
                    bound: instance.n_beams(),
                });
            }
            if link.ue >= instance.n_ues() {
                return Err(Error::OutOfRange {
                    what: "ue",
                    index: link.ue,
                    bound: instance.n_ues(),
                });
            }
            if std::mem::replace(&mut seen[link.ue], true) {
                return Err(Error::Infeasible(format!("ue {} served twice", link.ue)));
            }
        }
        Ok(())
    }
}

/// Weighted sum rate of a selection. Empty entries neither contribute nor
/// interfere.
pub fn weighted_sum_rate(instance: &Instance, selection: &Selection) -> Result<f64> {
    selection.validate(instance)?;
    Ok(weighted_sum_rate_unchecked(instance, selection.entries()))
}

/// [`weighted_sum_rate`] without validation. Callers guarantee in-range,
/// UE-disjoint entries.
pub(crate) fn weighted_sum_rate_unchecked(instance: &Instance, entries: &[Option<Link>]) -> f64 {
    let rss = instance.rss();
    let mut total = 0.0;
    for (a, e) in entries.iter().enumerate() {
        let Some(link) = e else { continue };
        let interference: f64 = entries
            .iter()
            .enumerate()
            .filter(|&(a2, _)| a2 != a)
            .filter_map(|(a2, e2)| e2.map(|l2| rss.get(l2.beam, link.ue, a2)))
            .sum();
        total += instance.weighted_link_rate(link.ue, rss.get(link.beam, link.ue, a), interference);
    }
    total
}

/// Unweighted per-UE rates of a selection (zero for unserved UEs).
pub fn per_ue_rates(instance: &Instance, selection: &Selection) -> Result<Vec<f64>> {
    selection.validate(instance)?;
    let rss = instance.rss();
    let mut rates = vec![0.0; instance.n_ues()];
    for (a, link) in selection.active() {
        let interference: f64 = selection
            .active()
            .filter(|&(a2, _)| a2 != a)
            .map(|(a2, l2)| rss.get(l2.beam, link.ue, a2))
            .sum();
        rates[link.ue] = instance.link_rate(rss.get(link.beam, link.ue, a), interference);
    }
    Ok(rates)
}

/// Weighted sum rate with every AP active, serving `ues[a]` on `beams[a]`.
pub fn rate_given_vectors(instance: &Instance, beams: &[usize], ues: &[usize]) -> Result<f64> {
    if beams.len() != instance.n_aps() {
        return Err(Error::Dimension {
            what: "beam vector",
            expected: instance.n_aps(),
            got: beams.len(),
        });
    }
    if instance.n_ues() < instance.n_aps() {
        return Err(Error::Infeasible(format!(
            "full ue vector needs n_ues >= n_aps ({} < {})",
            instance.n_ues(),
            instance.n_aps()
        )));
    }
    weighted_sum_rate(instance, &Selection::from_vectors(beams, ues)?)
}

/// Jain's fairness index `(Σx)^2 / (n Σx^2)`.
pub fn jain_fairness_index(throughputs: &[f64]) -> Result<f64> {
    if throughputs.is_empty() {
        return Err(Error::InvalidParameter("empty throughput vector".into()));
    }
    if throughputs.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::InvalidParameter(
            "throughputs must be finite and non-negative".into(),
        ));
    }
    let sum: f64 = throughputs.iter().sum();
    let sum_sq: f64 = throughputs.iter().map(|x| x * x).sum();
    if sum_sq == 0.0 {
        return Err(Error::UndefinedFairness);
    }
    Ok((sum * sum / (throughputs.len() as f64 * sum_sq)).min(1.0))
}

/// Synthetic instance with every RSS drawn i.i.d. uniformly in dB over
/// `[min_snr_db, max_snr_db]` relative to unit noise. Unit weights and
/// bandwidth, no RSS threshold.
pub fn random_instance<R: Rng + ?Sized>(
    rng: &mut R,
    n_aps: usize,
    n_ues: usize,
    n_beams: usize,
    min_snr_db: f64,
    max_snr_db: f64,
) -> Result<Instance> {
    if !(min_snr_db <= max_snr_db) {
        return Err(Error::InvalidParameter(format!(
            "empty SNR range [{min_snr_db}, {max_snr_db}]"
        )));
    }
    let rss = RssTensor::from_fn(n_aps, n_ues, n_beams, |_, _, _| {
        10f64.powf(rng.random_range(min_snr_db..=max_snr_db) / 10.0)
    })?;
    Ok(Instance::normalized(rss))
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// On-disk representation. `rss_dbm` is row-major over (beam, ue, ap);
/// `null` encodes zero power.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub n_aps: usize,
    pub n_ues: usize,
    pub n_beams: usize,
    pub noise_dbm: f64,
    pub bandwidth_hz: f64,
    pub weights: Vec<f64>,
    #[serde(default)]
    pub rss_threshold_dbm: Option<f64>,
    pub rss_dbm: Vec<Option<f64>>,
}

impl From<&Instance> for InstanceFile {
    fn from(inst: &Instance) -> Self {
        let to_dbm = |w: f64| (w > 0.0).then(|| watts_to_dbm(w));
        Self {
            n_aps: inst.n_aps(),
            n_ues: inst.n_ues(),
            n_beams: inst.n_beams(),
            noise_dbm: watts_to_dbm(inst.noise_power),
            bandwidth_hz: inst.bandwidth,
            weights: inst.weights.clone(),
            rss_threshold_dbm: to_dbm(inst.rss_threshold),
            rss_dbm: inst.rss.data.iter().map(|&w| to_dbm(w)).collect(),
        }
    }
}

impl TryFrom<InstanceFile> for Instance {
    type Error = Error;

    fn try_from(f: InstanceFile) -> Result<Self> {
        let from_dbm = |d: Option<f64>| d.map_or(0.0, dbm_to_watts);
        let data = f.rss_dbm.into_iter().map(from_dbm).collect();
        let rss = RssTensor::new(f.n_aps, f.n_ues, f.n_beams, data)?;
        Instance::new(
            rss,
            f.weights,
            dbm_to_watts(f.noise_dbm),
            f.bandwidth_hz,
            from_dbm(f.rss_threshold_dbm),
        )
    }
}

impl Instance {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&InstanceFile::from(self)).expect("instance serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: InstanceFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        file.try_into()
    }
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance> {
    Instance::from_json(&std::fs::read_to_string(path)?)
}

pub fn save_instance(instance: &Instance, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, instance.to_json())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single(s: f64) -> Instance {
        Instance::normalized(RssTensor::new(1, 1, 1, vec![s]).unwrap())
    }

    #[test]
    fn single_link_at_unit_snr() {
        let inst = single(1.0);
        let sel = Selection::from_vectors(&[0], &[0]).unwrap();
        assert_eq!(weighted_sum_rate(&inst, &sel).unwrap(), 1.0);
        assert_eq!(weighted_sum_rate(&inst, &Selection::empty(1)).unwrap(), 0.0);
    }

    #[test]
    fn symmetric_cross_interference() {
        let rss = RssTensor::new(2, 2, 1, vec![3.0; 4]).unwrap();
        let inst = Instance::normalized(rss);
        let sel = Selection::from_vectors(&[0, 0], &[0, 1]).unwrap();
        let expected = 2.0 * (1.0f64 + 3.0 / (1.0 + 3.0)).log2();
        assert!((weighted_sum_rate(&inst, &sel).unwrap() - expected).abs() < 1e-12);
        assert!((expected / 2.0 - 1.75f64.log2()).abs() < 1e-15);
        assert_eq!(
            rate_given_vectors(&inst, &[0, 0], &[1, 0]).unwrap(),
            rate_given_vectors(&inst, &[0, 0], &[0, 1]).unwrap()
        );
    }

    #[test]
    fn validation_errors() {
        let inst = Instance::normalized(RssTensor::new(2, 2, 2, vec![1.0; 8]).unwrap());
        let dup = Selection::from_vectors(&[0, 1], &[1, 1]).unwrap();
        assert!(matches!(weighted_sum_rate(&inst, &dup), Err(Error::Infeasible(_))));
        let oob = Selection::from_vectors(&[0, 2], &[0, 1]).unwrap();
        assert!(matches!(weighted_sum_rate(&inst, &oob), Err(Error::OutOfRange { .. })));
        assert!(rate_given_vectors(&inst, &[0, 0], &[0, 0]).is_err());
        let wide = Instance::normalized(RssTensor::new(3, 2, 1, vec![1.0; 6]).unwrap());
        assert!(rate_given_vectors(&wide, &[0, 0, 0], &[0, 1, 0]).is_err());
        assert!(RssTensor::new(1, 1, 1, vec![-1.0]).is_err());
        assert!(RssTensor::new(0, 1, 1, vec![]).is_err());
        let rss = RssTensor::new(1, 1, 1, vec![1.0]).unwrap();
        assert!(Instance::new(rss.clone(), vec![1.0], 0.0, 1.0, 0.0).is_err());
        assert!(Instance::new(rss, vec![-1.0], 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn zero_weight_contributes_nothing() {
        let rss = RssTensor::new(1, 2, 1, vec![5.0, 5.0]).unwrap();
        let inst = Instance::new(rss, vec![0.0, 2.0], 1.0, 1.0, 0.0).unwrap();
        let sel = Selection::from_vectors(&[0], &[0]).unwrap();
        assert_eq!(weighted_sum_rate(&inst, &sel).unwrap(), 0.0);
    }

    /// Direct transcription of the objective over an explicit triplet list.
    fn brute_rate(inst: &Instance, triplets: &[(usize, usize, usize)]) -> f64 {
        let mut total = 0.0;
        for &(b, u, a) in triplets {
            let mut den = inst.noise_power();
            for &(b2, _, a2) in triplets {
                if a2 != a {
                    den += inst.rss().get(b2, u, a2);
                }
            }
            total += inst.weights()[u] * inst.bandwidth() * (1.0 + inst.rss().get(b, u, a) / den).log2();
        }
        total
    }

    #[test]
    fn two_ap_matches_direct_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let inst = random_instance(&mut rng, 2, 3, 2, -10.0, 30.0).unwrap();
            for b0 in 0..2 {
                for b1 in 0..2 {
                    for u0 in 0..3 {
                        for u1 in 0..3 {
                            if u0 == u1 {
                                continue;
                            }
                            let r = rate_given_vectors(&inst, &[b0, b1], &[u0, u1]).unwrap();
                            let e = brute_rate(&inst, &[(b0, u0, 0), (b1, u1, 1)]);
                            assert!((r - e).abs() <= 1e-12 * e.max(1.0));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn jfi_examples() {
        assert_eq!(jain_fairness_index(&[1.0; 4]).unwrap(), 1.0);
        assert_eq!(jain_fairness_index(&[1.0, 0.0, 0.0, 0.0]).unwrap(), 0.25);
        assert!((jain_fairness_index(&[2.0, 1.0, 1.0]).unwrap() - 16.0 / 18.0).abs() < 1e-15);
        assert!(matches!(
            jain_fairness_index(&[0.0, 0.0]),
            Err(Error::UndefinedFairness)
        ));
        assert!(jain_fairness_index(&[]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut inst = random_instance(&mut rng, 3, 4, 5, -20.0, 40.0).unwrap();
        let mut rss = inst.rss().clone();
        rss.set(0, 0, 0, 0.0).unwrap();
        inst = Instance::new(rss, vec![0.5, 1.0, 2.0, 0.0], 1e-9, 1e8, 1e-10).unwrap();
        let back = Instance::from_json(&inst.to_json()).unwrap();
        assert_eq!(back.rss().get(0, 0, 0), 0.0);
        for (x, y) in inst.rss().as_slice().iter().zip(back.rss().as_slice()) {
            assert!((x - y).abs() <= 1e-12 * x.abs());
        }
        assert!((back.noise_power() - 1e-9).abs() <= 1e-12 * 1e-9);
        assert!((back.rss_threshold() - 1e-10).abs() <= 1e-12 * 1e-10);
        assert_eq!(back.weights(), inst.weights());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inst.json");
        save_instance(&inst, &path).unwrap();
        assert_eq!(load_instance(&path).unwrap().n_beams(), 5);
    }

    #[test]
    fn json_validation() {
        let base = r#"{"n_aps":1,"n_ues":1,"n_beams":NB,"noise_dbm":0.0,"bandwidth_hz":1.0,"weights":[1.0],"rss_dbm":RSS}"#;
        let neg = base.replace("NB", "-1").replace("RSS", "[0.0]");
        assert!(matches!(Instance::from_json(&neg), Err(Error::Parse(_))));
        let short = base.replace("NB", "2").replace("RSS", "[0.0]");
        assert!(matches!(
            Instance::from_json(&short),
            Err(Error::Dimension { expected: 2, got: 1, .. })
        ));
        let ok = base.replace("NB", "1").replace("RSS", "[30.0]");
        let inst = Instance::from_json(&ok).unwrap();
        assert!((inst.rss().get(0, 0, 0) - 1.0).abs() < 1e-15);
        assert!(Instance::from_json("{not json").is_err());
    }

    fn arb_instance() -> impl Strategy<Value = (Instance, Vec<usize>, Vec<usize>)> {
        (1usize..4, 0usize..3, 1usize..4, any::<u64>()).prop_map(|(na, extra, nb, seed)| {
            let nu = na + extra;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let inst = random_instance(&mut rng, na, nu, nb, -10.0, 30.0).unwrap();
            let beams = (0..na).map(|_| rng.random_range(0..nb)).collect();
            let mut ues: Vec<usize> = (0..nu).collect();
            rand::seq::SliceRandom::shuffle(ues.as_mut_slice(), &mut rng);
            ues.truncate(na);
            (inst, beams, ues)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn vectors_agree_with_selection((inst, beams, ues) in arb_instance()) {
            let sel = Selection::from_vectors(&beams, &ues).unwrap();
            prop_assert_eq!(
                rate_given_vectors(&inst, &beams, &ues).unwrap(),
                weighted_sum_rate(&inst, &sel).unwrap()
            );
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn monotone_in_serving_rss((inst, beams, ues) in arb_instance(), ap in 0usize..4, boost in 0.0f64..100.0) {
            let ap = ap % inst.n_aps();
            let sel = Selection::from_vectors(&beams, &ues).unwrap();
            let before = weighted_sum_rate(&inst, &sel).unwrap();
            let mut rss = inst.rss().clone();
            let old = rss.get(beams[ap], ues[ap], ap);
            rss.set(beams[ap], ues[ap], ap, old + boost).unwrap();
            let boosted = Instance::normalized(rss);
            prop_assert!(weighted_sum_rate(&boosted, &sel).unwrap() >= before - 1e-12);
        }

        #[test]
        fn removing_an_entry_only_removes_its_interference((inst, beams, ues) in arb_instance(), ap in 0usize..4) {
            let ap = ap % inst.n_aps();
            let mut sel = Selection::from_vectors(&beams, &ues).unwrap();
            sel.set(ap, None);
            let rss = inst.rss();
            let mut expected = 0.0;
            for a in (0..inst.n_aps()).filter(|&a| a != ap) {
                let den: f64 = 1.0 + (0..inst.n_aps())
                    .filter(|&a2| a2 != a && a2 != ap)
                    .map(|a2| rss.get(beams[a2], ues[a], a2))
                    .sum::<f64>();
                expected += (1.0 + rss.get(beams[a], ues[a], a) / den).log2();
            }
            let got = weighted_sum_rate(&inst, &sel).unwrap();
            prop_assert!((got - expected).abs() <= 1e-12 * expected.max(1.0));
        }

        #[test]
        fn jfi_bounds(xs in proptest::collection::vec(0.0f64..1e3, 1..20)) {
            match jain_fairness_index(&xs) {
                Ok(j) => {
                    prop_assert!((0.0..=1.0).contains(&j));
                    let all_equal = xs.iter().all(|x| (x - xs[0]).abs() <= 1e-12 * xs[0].abs().max(1.0));
                    prop_assert_eq!((j - 1.0).abs() < 1e-12, all_equal);
                }
                Err(Error::UndefinedFairness) => prop_assert!(xs.iter().all(|x| *x == 0.0)),
                Err(e) => prop_assert!(false, "unexpected error {e}"),
            }
        }
    }
}
