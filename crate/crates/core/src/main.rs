use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use beamsel::channel::{random_channel_instance, Codebook, Scenario, ScenarioKind};
use beamsel::instance::{load_instance, per_ue_rates, save_instance, weighted_sum_rate};
use beamsel::reduction::{self, check_reduction, Gadget, Graph};
use beamsel::sim::{run_simulation, Algorithm, SimConfig, SolverConfig};
use beamsel::{Error, Instance, Selection};

/// Joint UE and beam selection for multi-AP mmWave networks.
#[derive(Parser)]
#[command(name = "beamsel", version)]
struct Cli {
    /// Print errors as JSON on stdout.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance file and print the selection as JSON.
    Solve(SolveArgs),
    /// Run the slot simulator and write CSV reports.
    Simulate(SimulateArgs),
    /// Check the independent-set reduction on a graph or a graph corpus.
    VerifyReduction(VerifyArgs),
    /// Time every algorithm on random channel instances.
    Bench(BenchArgs),
    /// Write a random channel-model instance file.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Instance JSON file.
    instance: PathBuf,
    #[arg(long, default_value = "ngub1")]
    algorithm: Algorithm,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Solver settings JSON (defaults used for missing fields).
    #[arg(long)]
    solver: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Simulation config JSON; defaults are used for missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config's).
    #[arg(long)]
    seed: u64,
    /// Output directory for the CSV reports.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    algorithm: Option<Algorithm>,
    #[arg(long)]
    slots: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Edge-list file ("u v" per line). Without it, checks the built-in corpus.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long, default_value_t = reduction::DEFAULT_N)]
    n: f64,
    #[arg(long, default_value_t = reduction::DEFAULT_EPSILON)]
    epsilon: f64,
    /// Corpus: every connected subcubic graph up to this many nodes.
    #[arg(long, default_value_t = 7)]
    max_nodes: usize,
    /// Corpus: number of extra random subcubic graphs.
    #[arg(long, default_value_t = 200)]
    random: usize,
    /// Corpus: node bound for the random graphs.
    #[arg(long, default_value_t = 14)]
    random_max_nodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "umi")]
    scenario: ScenarioKind,
    #[arg(long, default_value_t = 16)]
    n_aps: usize,
    #[arg(long, default_value_t = 40)]
    n_ues: usize,
    /// Beams per AP; 36 uses the default codebook, other values azimuth sectors.
    #[arg(long, default_value_t = 36)]
    n_beams: usize,
    #[arg(long, value_delimiter = ',', default_value = "ngub1,ngub2")]
    algorithms: Vec<Algorithm>,
    #[arg(long, default_value_t = 5)]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value = "umi")]
    scenario: ScenarioKind,
    #[arg(long, default_value_t = 4)]
    n_aps: usize,
    #[arg(long, default_value_t = 10)]
    n_ues: usize,
    /// Beams per AP; 36 uses the default codebook, other values azimuth sectors.
    #[arg(long, default_value_t = 36)]
    n_beams: usize,
    #[arg(long, default_value_t = 1e9)]
    bandwidth_hz: f64,
    #[arg(long, default_value_t = 7.0)]
    noise_figure_db: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn codebook_for(n_beams: usize) -> Codebook {
    if n_beams == Codebook::default().n_beams() {
        Codebook::default()
    } else {
        Codebook::sectors(n_beams)
    }
}

fn selection_json(instance: &Instance, selection: &Selection) -> beamsel::Result<serde_json::Value> {
    let entries: Vec<_> = selection
        .entries()
        .iter()
        .map(|e| e.map(|l| json!({ "beam": l.beam, "ue": l.ue })))
        .collect();
    Ok(json!({
        "weighted_sum_rate": weighted_sum_rate(instance, selection)?,
        "ue_rates": per_ue_rates(instance, selection)?,
        "selection": entries,
    }))
}

fn read_json_file<T: serde::de::DeserializeOwned>(path: &PathBuf) -> beamsel::Result<T> {
    serde_json::from_str(&std::fs::read_to_string(path)?).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn solve(args: SolveArgs) -> beamsel::Result<()> {
    let instance = load_instance(&args.instance)?;
    let solver: SolverConfig = match &args.solver {
        Some(p) => read_json_file(p)?,
        None => SolverConfig::default(),
    };
    let selection = solver.solve(args.algorithm, &instance, args.seed)?;
    let mut out = selection_json(&instance, &selection)?;
    out["algorithm"] = json!(args.algorithm);
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn simulate(args: SimulateArgs) -> beamsel::Result<()> {
    let mut config = match &args.config {
        Some(p) => SimConfig::from_json(&std::fs::read_to_string(p)?)?,
        None => SimConfig::default(),
    };
    config.seed = args.seed;
    if let Some(a) = args.algorithm {
        config.algorithm = a;
    }
    if let Some(s) = args.slots {
        config.slots = s;
    }
    if let Some(r) = args.runs {
        config.runs = r;
    }
    let report = run_simulation(&config)?;
    report.write_dir(&args.out)?;
    std::fs::write(args.out.join("config.json"), config.to_json() + "\n")?;
    eprintln!("simulation took {:.3} s", report.elapsed_s);
    println!("{}", report.aggregate_json());
    Ok(())
}

fn verify_reduction(args: VerifyArgs) -> beamsel::Result<bool> {
    if let Some(path) = &args.graph {
        let graph = Graph::parse_edge_list(&std::fs::read_to_string(path)?)?;
        let check = check_reduction(&Gadget::new(graph, args.n, args.epsilon)?)?;
        let out = json!({
            "holds": check.holds,
            "mis_size": check.mis_size,
            "best_rate": check.best_rate,
            "mis": check.mis,
            "argmax": check.argmax,
        });
        println!("{}", serde_json::to_string_pretty(&out)?);
        return Ok(check.holds);
    }
    let mut graphs = Vec::new();
    for n in 1..=args.max_nodes {
        graphs.extend(reduction::connected_subcubic_graphs(n)?);
    }
    let n_exhaustive = graphs.len();
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    for i in 0..args.random {
        let n = 1 + i % args.random_max_nodes.max(1);
        graphs.push(reduction::random_subcubic_graph(n, 0.5, &mut rng));
    }
    let failing = reduction::failing_graphs(&graphs, args.n, args.epsilon)?;
    let out = json!({
        "holds": failing.is_empty(),
        "exhaustive_graphs": n_exhaustive,
        "random_graphs": args.random,
        "failing": failing.iter().map(|&i| graphs[i].edges()).collect::<Vec<_>>(),
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(failing.is_empty())
}

fn bench(args: BenchArgs) -> beamsel::Result<()> {
    let scenario = Scenario::preset(args.scenario);
    let solver = SolverConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let instances = (0..args.instances)
        .map(|_| {
            random_channel_instance(&scenario, codebook_for(args.n_beams), args.n_aps, args.n_ues, 1e9, 7.0, &mut rng)
        })
        .collect::<beamsel::Result<Vec<_>>>()?;
    println!("algorithm,instance,weighted_sum_rate");
    eprintln!("{:<12} {:>12} {:>12}", "algorithm", "mean_ms", "max_ms");
    for &alg in &args.algorithms {
        let mut times = Vec::new();
        for (i, inst) in instances.iter().enumerate() {
            let t = Instant::now();
            let sel = solver.solve(alg, inst, args.seed + i as u64)?;
            times.push(t.elapsed().as_secs_f64() * 1e3);
            println!("{alg},{i},{}", weighted_sum_rate(inst, &sel)?);
        }
        let mean = times.iter().sum::<f64>() / times.len().max(1) as f64;
        let max = times.iter().copied().fold(0.0, f64::max);
        eprintln!("{:<12} {:>12.3} {:>12.3}", alg.name(), mean, max);
    }
    Ok(())
}

fn generate(args: GenerateArgs) -> beamsel::Result<()> {
    let scenario = Scenario::preset(args.scenario);
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let inst = random_channel_instance(
        &scenario,
        codebook_for(args.n_beams),
        args.n_aps,
        args.n_ues,
        args.bandwidth_hz,
        args.noise_figure_db,
        &mut rng,
    )?;
    match &args.out {
        Some(p) => save_instance(&inst, p)?,
        None => println!("{}", inst.to_json()),
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => 3,
        Error::Parse(_) | Error::Json(_) => 4,
        Error::CapExceeded { .. } => 5,
        _ => 6,
    }
}

fn configure_threads() -> Result<(), Error> {
    if let Ok(v) = std::env::var("BEAMSEL_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("BEAMSEL_THREADS must be a number, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Solve(a) => solve(a).map(|()| true),
        Command::Simulate(a) => simulate(a).map(|()| true),
        Command::VerifyReduction(a) => verify_reduction(a),
        Command::Bench(a) => bench(a).map(|()| true),
        Command::Generate(a) => generate(a).map(|()| true),
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            if cli.json {
                let out = json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
                println!("{out}");
                let _ = std::io::stdout().flush();
            } else {
                eprintln!("error: {e}");
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
