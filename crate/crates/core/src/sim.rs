//! Slot/schedule simulation: channel → selection algorithm → throughput.
//!
//! Each run places APs on the scenario grid and UEs uniformly, then for every
//! slot moves the UEs one random-walk step and redraws the RSS tensor. Every
//! schedule of the slot sets the UE weights, runs the configured algorithm
//! and credits each served UE with its rate. Rates are spectral efficiencies
//! (bit/s/Hz); one schedule is the unit of time.
//!
//! Runs are independent and run in parallel. Run `r` draws its channel from
//! ChaCha stream `2r` and its algorithm seeds from stream `2r + 1` of the
//! configured seed, so results do not depend on thread scheduling.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    generate_rss, random_walk_step, thermal_noise_watts, Codebook, MobilityState, Scenario, ScenarioKind, Topology,
};
use crate::exhaustive::{exhaustive_select, ExhaustiveParams};
use crate::greedy::{ngub1, ngub2, GreedyParams};
use crate::instance::{jain_fairness_index, per_ue_rates, Instance, Selection};
use crate::lig::{build_game, lig_select, LigParams};
use crate::mcmc::{mcmc_select, McmcParams};
use crate::{Error, Result};

/// Version tag written in every CSV row.
pub const CSV_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Exhaustive,
    Mcmc,
    Lig,
    Ngub1,
    Ngub2,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Exhaustive,
        Algorithm::Mcmc,
        Algorithm::Lig,
        Algorithm::Ngub1,
        Algorithm::Ngub2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Exhaustive => "exhaustive",
            Algorithm::Mcmc => "mcmc",
            Algorithm::Lig => "lig",
            Algorithm::Ngub1 => "ngub1",
            Algorithm::Ngub2 => "ngub2",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Parse(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightPolicy {
    Uniform,
    /// `w_u ∝ 1 / (1 + cumulative throughput of u)`, rescaled to mean one.
    InverseThroughput,
}

/// Algorithm knobs shared by the simulator, the CLI and benchmarks. Seeds
/// inside the per-algorithm parameters are replaced per schedule.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub mcmc: McmcParams,
    pub lig: LigParams,
    /// Player RSS threshold; defaults to the noise power.
    pub lig_s_t: Option<f64>,
    /// Interaction threshold; defaults to a tenth of the noise power.
    pub lig_i_th: Option<f64>,
    pub greedy: GreedyParams,
    pub exhaustive: ExhaustiveParams,
}

impl SolverConfig {
    /// Runs `algorithm` on `instance` with the given seed.
    pub fn solve(&self, algorithm: Algorithm, instance: &Instance, seed: u64) -> Result<Selection> {
        match algorithm {
            Algorithm::Exhaustive => Ok(exhaustive_select(instance, &self.exhaustive)?.selection),
            Algorithm::Mcmc => {
                let params = McmcParams { seed, ..self.mcmc.clone() };
                Ok(mcmc_select(instance, &params)?.selection)
            }
            Algorithm::Lig => {
                let n0 = instance.noise_power();
                let game = build_game(instance, self.lig_s_t.unwrap_or(n0), self.lig_i_th.unwrap_or(n0 / 10.0))?;
                let params = LigParams { seed, ..self.lig.clone() };
                Ok(lig_select(&game, &params)?.selection)
            }
            Algorithm::Ngub1 => ngub1(instance, &self.greedy),
            Algorithm::Ngub2 => ngub2(instance, &GreedyParams { seed, ..self.greedy }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub scenario: ScenarioKind,
    /// Overrides the preset carrier frequency.
    pub carrier_ghz: Option<f64>,
    pub n_aps: usize,
    pub n_ues: usize,
    pub codebook: Codebook,
    pub algorithm: Algorithm,
    pub slots: usize,
    pub schedules_per_slot: usize,
    pub runs: usize,
    pub weight_policy: WeightPolicy,
    pub seed: u64,
    pub ue_speed_m_per_slot: f64,
    /// System bandwidth; only sets the thermal noise floor.
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
    pub solver: SolverConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioKind::UMi,
            carrier_ghz: None,
            n_aps: 4,
            n_ues: 10,
            codebook: Codebook::default(),
            algorithm: Algorithm::Ngub1,
            slots: 2000,
            schedules_per_slot: 1,
            runs: 20,
            weight_policy: WeightPolicy::Uniform,
            seed: 0,
            ue_speed_m_per_slot: 1.0,
            bandwidth_hz: 1e9,
            noise_figure_db: 7.0,
            solver: SolverConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn scenario(&self) -> Scenario {
        let mut s = Scenario::preset(self.scenario);
        if let Some(f) = self.carrier_ghz {
            s.carrier_ghz = f;
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        for (what, v) in [
            ("n_aps", self.n_aps),
            ("n_ues", self.n_ues),
            ("slots", self.slots),
            ("schedules_per_slot", self.schedules_per_slot),
            ("runs", self.runs),
        ] {
            if v == 0 {
                return Err(Error::InvalidParameter(format!("{what} must be positive")));
            }
        }
        if !(self.ue_speed_m_per_slot.is_finite() && self.ue_speed_m_per_slot >= 0.0) {
            return Err(Error::InvalidParameter("ue speed must be finite and non-negative".into()));
        }
        if !(self.bandwidth_hz.is_finite() && self.bandwidth_hz > 0.0 && self.noise_figure_db.is_finite()) {
            return Err(Error::InvalidParameter("invalid bandwidth or noise figure".into()));
        }
        self.scenario().validate()?;
        self.codebook.validate()?;
        self.solver.mcmc.schedule.validate()?;
        self.solver.lig.schedule.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Result of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run: usize,
    /// Per-UE throughput `τ_i^u`, averaged over all schedules.
    pub ue_throughput: Vec<f64>,
    /// Per-user throughput `τ_i`.
    pub per_user_throughput: f64,
    /// Unweighted sum rate of every schedule, slot-major.
    pub schedule_rates: Vec<f64>,
    #[serde(skip)]
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub algorithm: Algorithm,
    pub runs: Vec<RunResult>,
    /// Mean over runs of each UE's throughput.
    pub mu_u: Vec<f64>,
    /// Population SD over runs of each UE's throughput.
    pub sigma_u: Vec<f64>,
    pub mu: f64,
    pub sigma: f64,
    /// Jain's index of `mu_u`; `None` if nobody was ever served.
    pub jfi: Option<f64>,
    #[serde(skip)]
    pub elapsed_s: f64,
}

fn mean_sd(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per-schedule weights under `policy`, given cumulative throughputs.
pub fn schedule_weights(policy: WeightPolicy, cumulative: &[f64]) -> Vec<f64> {
    match policy {
        WeightPolicy::Uniform => vec![1.0; cumulative.len()],
        WeightPolicy::InverseThroughput => {
            let raw: Vec<f64> = cumulative.iter().map(|c| 1.0 / (1.0 + c)).collect();
            let mean = raw.iter().sum::<f64>() / raw.len() as f64;
            raw.into_iter().map(|w| w / mean).collect()
        }
    }
}

fn run_once(config: &SimConfig, run: usize) -> Result<RunResult> {
    let start = Instant::now();
    let scenario = config.scenario();
    let mut chan_rng = ChaCha8Rng::seed_from_u64(config.seed);
    chan_rng.set_stream(2 * run as u64);
    let mut alg_rng = ChaCha8Rng::seed_from_u64(config.seed);
    alg_rng.set_stream(2 * run as u64 + 1);

    let topo = Topology::random(&scenario, config.codebook.clone(), config.n_aps, config.n_ues, &mut chan_rng)?;
    let mut topo_now = topo.clone();
    let mut mobility = MobilityState {
        positions: topo.ue_positions.clone(),
        speed_m_per_slot: config.ue_speed_m_per_slot,
    };
    let noise = thermal_noise_watts(config.bandwidth_hz, config.noise_figure_db);
    let k = config.schedules_per_slot;
    let mut cumulative = vec![0.0; config.n_ues];
    let mut schedule_rates = Vec::with_capacity(config.slots * k);

    for slot in 0..config.slots {
        mobility = random_walk_step(&mobility, topo.arena_edge_m, &mut chan_rng);
        topo_now.ue_positions.clone_from(&mobility.positions);
        let rss = generate_rss(&scenario, &topo_now, &mut chan_rng)?;
        let base = Instance::new(rss, vec![1.0; config.n_ues], noise, 1.0, 0.0)?;
        for sched in 0..k {
            let instance = base.with_weights(schedule_weights(config.weight_policy, &cumulative))?;
            let seed: u64 = alg_rng.random();
            let selection = config.solver.solve(config.algorithm, &instance, seed).map_err(|e| {
                Error::InvalidParameter(format!("run {run}, slot {slot}, schedule {sched}: {e}"))
            })?;
            let rates = per_ue_rates(&instance, &selection)?;
            for (c, r) in cumulative.iter_mut().zip(&rates) {
                *c += r;
            }
            schedule_rates.push(rates.iter().sum());
        }
    }

    let total = (k * config.slots) as f64;
    let ue_throughput: Vec<f64> = cumulative.iter().map(|c| c / total).collect();
    let per_user_throughput = ue_throughput.iter().sum::<f64>() / config.n_ues as f64;
    Ok(RunResult {
        run,
        ue_throughput,
        per_user_throughput,
        schedule_rates,
        elapsed_s: start.elapsed().as_secs_f64(),
    })
}

pub fn run_simulation(config: &SimConfig) -> Result<SimReport> {
    config.validate()?;
    let start = Instant::now();
    let runs = (0..config.runs)
        .into_par_iter()
        .map(|r| run_once(config, r))
        .collect::<Result<Vec<_>>>()?;

    let (mu_u, sigma_u): (Vec<f64>, Vec<f64>) = (0..config.n_ues)
        .map(|u| mean_sd(runs.iter().map(move |r| r.ue_throughput[u])))
        .unzip();
    let (mu, sigma) = mean_sd(runs.iter().map(|r| r.per_user_throughput));
    let jfi = match jain_fairness_index(&mu_u) {
        Ok(j) => Some(j),
        Err(Error::UndefinedFairness) => None,
        Err(e) => return Err(e),
    };
    Ok(SimReport {
        algorithm: config.algorithm,
        runs,
        mu_u,
        sigma_u,
        mu,
        sigma,
        jfi,
        elapsed_s: start.elapsed().as_secs_f64(),
    })
}

impl SimReport {
    /// One row per run.
    pub fn summary_csv(&self) -> String {
        let mut s = String::from("schema_version,algorithm,run,per_user_throughput,mean_schedule_rate\n");
        for r in &self.runs {
            let mean_rate = r.schedule_rates.iter().sum::<f64>() / r.schedule_rates.len() as f64;
            let _ = writeln!(
                s,
                "{CSV_SCHEMA_VERSION},{},{},{},{}",
                self.algorithm, r.run, r.per_user_throughput, mean_rate
            );
        }
        s
    }

    /// One row per UE.
    pub fn per_ue_csv(&self) -> String {
        let mut s = String::from("schema_version,algorithm,ue,mu,sigma\n");
        for (u, (m, sd)) in self.mu_u.iter().zip(&self.sigma_u).enumerate() {
            let _ = writeln!(s, "{CSV_SCHEMA_VERSION},{},{u},{m},{sd}", self.algorithm);
        }
        s
    }

    /// Sum rate of every schedule of every run.
    pub fn schedules_csv(&self) -> String {
        let mut s = String::from("schema_version,algorithm,run,schedule,sum_rate\n");
        for r in &self.runs {
            for (i, rate) in r.schedule_rates.iter().enumerate() {
                let _ = writeln!(s, "{CSV_SCHEMA_VERSION},{},{},{i},{rate}", self.algorithm, r.run);
            }
        }
        s
    }

    /// Aggregates as JSON (no timings, so it is reproducible).
    pub fn aggregate_json(&self) -> String {
        serde_json::json!({
            "schema_version": CSV_SCHEMA_VERSION,
            "algorithm": self.algorithm,
            "runs": self.runs.len(),
            "mu": self.mu,
            "sigma": self.sigma,
            "jfi": self.jfi,
        })
        .to_string()
    }

    /// Writes `summary.csv`, `per_ue.csv`, `schedules.csv` and
    /// `aggregate.json` into `dir`, creating it if needed.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("summary.csv"), self.summary_csv())?;
        std::fs::write(dir.join("per_ue.csv"), self.per_ue_csv())?;
        std::fs::write(dir.join("schedules.csv"), self.schedules_csv())?;
        std::fs::write(dir.join("aggregate.json"), self.aggregate_json() + "\n")?;
        Ok(())
    }
}
