//! The `relrec` command line: ingestion, synthetic data, candidate
//! generation, Memboost, training, tuning, offline eval, the loop
//! simulator, and the root/leaf servers.

use crate::corpus::{self, EngagementLog, PinCorpus, Signature, UserStore};
use crate::eval::simulate::SyntheticUserModel;
use crate::graph::{GraphConfig, WalkConfig};
use crate::memboost::{self, MemboostParams};
use crate::ranking::{
    self, train_model, FeatureSchema, FeaturizeContext, HpSpace, TrainConfig,
};
use crate::serve::{
    parse_range, serve_leaf, serve_root, EngineState, LeafHandle, LeafNode, RootNode, ServeConfig,
    ShardMap,
};
use crate::supplemental::BlendPolicy;
use crate::synth::{self, SynthConfig};
use crate::util;
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "relrec", about = "Related-item recommender engine", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate and snapshot pins, boards, events (and optional users).
    Ingest(IngestArgs),
    /// Generate a synthetic corpus and bootstrap engagement log.
    Synth(SynthArgs),
    /// Run one candidate source for a query.
    Candidates(CandidatesArgs),
    /// Session-embedding commands.
    #[command(subcommand)]
    Pin2vec(Pin2VecCmd),
    /// Engagement memorization commands.
    #[command(subcommand)]
    Memboost(MemboostCmd),
    /// Train a ranking model.
    Train(TrainArgs),
    /// Random-search hyperparameter tuning.
    Tune(TuneArgs),
    /// Offline evaluation of a model against holdout sessions.
    Eval(EvalArgs),
    /// Closed-loop feedback simulation.
    Simloop(SimloopArgs),
    /// Write a uniform shard map.
    Shardmap(ShardmapArgs),
    /// Serving processes.
    #[command(subcommand)]
    Serve(ServeCmd),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    pins: PathBuf,
    #[arg(long)]
    boards: PathBuf,
    #[arg(long)]
    events: PathBuf,
    #[arg(long)]
    users: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// JSON file overriding the default generator config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = util::SEED_ENV, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct CandidatesArgs {
    /// walk | cooc | pin2vec | search | visual | segmented
    #[arg(long)]
    source: String,
    #[arg(long)]
    query: String,
    /// Ingested data directory (pins/boards/events jsonl).
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    steps: u64,
    #[arg(long, default_value_t = 0.5)]
    reset: f64,
    #[arg(long, env = util::SEED_ENV, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    budget: usize,
    /// Embedding table for --source pin2vec.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Locale for --source segmented.
    #[arg(long)]
    locale: Option<String>,
}

#[derive(Subcommand)]
enum Pin2VecCmd {
    /// Train the session embedding and write the table.
    Train(Pin2VecTrainArgs),
}

#[derive(Args)]
struct Pin2VecTrainArgs {
    #[arg(long)]
    events: PathBuf,
    #[arg(long)]
    pins: PathBuf,
    /// Vocabulary size (head pins).
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    /// Embedding dimension.
    #[arg(long, default_value_t = 64)]
    d: usize,
    #[arg(long, default_value_t = 1800)]
    window: i64,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, env = util::SEED_ENV, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum MemboostCmd {
    /// Compute priors, accumulate stats, write the store.
    Build(MemboostBuildArgs),
    /// Score one (query, result) pair from a store.
    Score(MemboostScoreArgs),
}

#[derive(Args)]
struct MemboostBuildArgs {
    #[arg(long)]
    events: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MemboostScoreArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    query: String,
    #[arg(long)]
    result: String,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
}

#[derive(Args)]
struct TrainArgs {
    /// JSON TrainConfig: {"kind": "v4_session_logistic", ...}.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    events: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    store: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TuneArgs {
    /// JSON HpSpace.
    #[arg(long)]
    space: PathBuf,
    #[arg(long, default_value_t = 16)]
    trials: usize,
    #[arg(long, default_value_t = 4)]
    parallel: usize,
    #[arg(long)]
    events: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, env = util::SEED_ENV, default_value_t = 0)]
    seed: u64,
    /// Where to write the winning GbdtParams JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    holdout: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    store: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimloopArgs {
    /// JSON: {"synth": SynthConfig, "loop": LoopConfig}.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ShardmapArgs {
    #[arg(long)]
    leaves: usize,
    /// Base port for leaf addresses (leaf i gets port + i).
    #[arg(long)]
    base_port: Option<u16>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum ServeCmd {
    /// The scatter-gather root.
    Root(ServeRootArgs),
    /// One leaf scorer.
    Leaf(ServeLeafArgs),
}

#[derive(Args)]
struct ServeRootArgs {
    #[arg(long)]
    shards: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    port: u16,
    #[arg(long)]
    store: Option<PathBuf>,
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Serve log sink (events.jsonl format).
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, default_value_t = false)]
    insertion: bool,
    #[arg(long, default_value_t = 0.0)]
    unbiased_fraction: f64,
    #[arg(long, default_value_t = 400)]
    budget: usize,
    #[arg(long, default_value_t = 25)]
    top_k: usize,
    #[arg(long, default_value_t = 100)]
    deadline_ms: u64,
    #[arg(long, env = util::SEED_ENV, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ServeLeafArgs {
    /// Inclusive hash range START:END in hex.
    #[arg(long)]
    range: String,
    /// Pin data directory (pins.jsonl inside).
    #[arg(long)]
    pins: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    port: u16,
    #[arg(long, default_value = "leaf")]
    id: String,
}

pub fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Ingest(args) => ingest(args),
        Command::Synth(args) => synth_cmd(args),
        Command::Candidates(args) => candidates(args),
        Command::Pin2vec(Pin2VecCmd::Train(args)) => pin2vec_train(args),
        Command::Memboost(MemboostCmd::Build(args)) => memboost_build(args),
        Command::Memboost(MemboostCmd::Score(args)) => memboost_score(args),
        Command::Train(args) => train(args),
        Command::Tune(args) => tune_cmd(args),
        Command::Eval(args) => eval_cmd(args),
        Command::Simloop(args) => simloop(args),
        Command::Shardmap(args) => shardmap(args),
        Command::Serve(ServeCmd::Root(args)) => serve_root_cmd(args),
        Command::Serve(ServeCmd::Leaf(args)) => serve_leaf_cmd(args),
    }
}

/// Load an ingested data directory (pins/boards/events/users jsonl).
struct DataDir {
    pins: PinCorpus,
    boards: corpus::BoardCorpus,
    users: UserStore,
}

fn load_data_dir(dir: &Path) -> Result<DataDir> {
    let pins = corpus::load_pins(&dir.join("pins.jsonl"))
        .with_context(|| format!("loading {}/pins.jsonl", dir.display()))?;
    let boards = corpus::load_boards(&dir.join("boards.jsonl"), &pins)
        .with_context(|| format!("loading {}/boards.jsonl", dir.display()))?;
    let events_path = dir.join("events.jsonl");
    let log = if events_path.exists() {
        corpus::load_engagement(&events_path)?
    } else {
        EngagementLog::default()
    };
    let users_path = dir.join("users.jsonl");
    let profiles = if users_path.exists() {
        Some(corpus::load_users(&users_path)?)
    } else {
        None
    };
    let users = UserStore::build(&log, &pins, profiles.as_ref());
    Ok(DataDir {
        pins,
        boards,
        users,
    })
}

fn ingest(args: IngestArgs) -> Result<()> {
    std::fs::create_dir_all(&args.out)?;
    let pins = corpus::load_pins(&args.pins)?;
    let boards = corpus::load_boards(&args.boards, &pins)?;
    let log = corpus::load_engagement(&args.events)?;
    corpus::snapshot_pins(&pins, &args.out.join("pins.jsonl"))?;
    corpus::snapshot_boards(&boards, &args.out.join("boards.jsonl"))?;
    corpus::snapshot_engagement(&log, &args.out.join("events.jsonl"))?;
    let mut report = serde_json::json!({
        "pins": pins.report,
        "boards": boards.report,
        "events": log.report,
        "shared_board_memberships": boards.shared_membership_count(),
        "sessions": log.sessions.len(),
    });
    if let Some(users_path) = &args.users {
        let users = corpus::load_users(users_path)?;
        corpus::snapshot_users(&users, &args.out.join("users.jsonl"))?;
        report["users"] = serde_json::to_value(&users.report)?;
    }
    std::fs::write(
        args.out.join("report.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn synth_cmd(args: SynthArgs) -> Result<()> {
    let mut cfg: SynthConfig = match &args.config {
        Some(path) => serde_json::from_slice(&std::fs::read(path)?)?,
        None => SynthConfig::default(),
    };
    if args.config.is_none() || std::env::var(util::SEED_ENV).is_ok() {
        cfg.seed = args.seed;
    }
    let world = synth::generate(&cfg, &SyntheticUserModel::default())?;
    synth::write_world(&world, &args.out)?;
    println!(
        "wrote {} pins, {} boards, {} users, {} events to {}",
        world.pins.len(),
        world.boards.len(),
        world.users.len(),
        world.log.events.len(),
        args.out.display()
    );
    Ok(())
}

fn candidates(args: CandidatesArgs) -> Result<()> {
    let data = load_data_dir(&args.data)?;
    let graph_cfg = GraphConfig {
        seed: args.seed,
        ..GraphConfig::default()
    };
    let graph = crate::graph::build_graph(&data.boards, &data.pins, &graph_cfg)?;
    let query = Signature(args.query.clone());
    let set = match args.source.as_str() {
        "cooc" => crate::graph::board_cooccurrence(&graph, &data.pins, &query, args.budget, args.seed),
        "walk" => {
            let cfg = WalkConfig {
                total_steps: args.steps,
                reset_probability: args.reset,
                seed: args.seed,
                max_results: args.budget,
            };
            crate::graph::random_walk(&graph, &query, &cfg)?
        }
        "pin2vec" => {
            let table_path = args
                .table
                .as_ref()
                .context("--table is required for --source pin2vec")?;
            let table = crate::pin2vec::read_table(table_path)?;
            crate::pin2vec::neighbors(&table, &query, args.budget)
        }
        "search" => {
            let record = data
                .pins
                .get(&query)
                .context("query signature not in corpus")?;
            let index = crate::supplemental::AnnotationIndex::build(&data.pins);
            crate::supplemental::search_candidates(&index, record, args.budget)
        }
        "visual" => {
            let record = data
                .pins
                .get(&query)
                .context("query signature not in corpus")?;
            crate::supplemental::visual_candidates(
                &data.pins,
                record,
                args.budget,
                crate::supplemental::DEFAULT_DUP_THRESHOLD,
                |_| Vec::new(),
            )
        }
        "segmented" => {
            let locale = args
                .locale
                .as_deref()
                .context("--locale is required for --source segmented")?;
            crate::supplemental::segmented_candidates(
                &data.boards,
                &data.pins,
                locale,
                &query,
                args.budget,
                &graph_cfg,
                args.seed,
            )?
        }
        other => bail!("unknown source {other:?}"),
    };
    if let Some(flag) = &set.flag {
        eprintln!("flag: {flag:?}");
    }
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for candidate in &set.entries {
        use std::io::Write;
        writeln!(
            out,
            "{}",
            serde_json::json!({
                "sig": candidate.signature,
                "source": candidate.source.tag(),
                "score": candidate.generator_score,
            })
        )?;
    }
    Ok(())
}

fn pin2vec_train(args: Pin2VecTrainArgs) -> Result<()> {
    let pins = corpus::load_pins(&args.pins)?;
    let log = corpus::load_engagement(&args.events)?;
    let cfg = crate::pin2vec::Pin2VecConfig {
        vocab_size: args.n,
        dim: args.d,
        window_seconds: args.window,
        epochs: args.epochs,
        seed: args.seed,
        ..crate::pin2vec::Pin2VecConfig::default()
    };
    let vocab = crate::pin2vec::Vocab::head(&pins, cfg.vocab_size);
    let pairs = crate::pin2vec::extract_session_pairs(&log, &vocab, cfg.window_seconds);
    let run = crate::pin2vec::train(&pairs, &vocab, &cfg)?;
    crate::pin2vec::write_table(&run.table, &args.out)?;
    println!(
        "trained {} vectors (d={}) from {} pairs; epoch loss {:?}",
        run.table.len(),
        args.d,
        pairs.len(),
        run.epoch_loss
    );
    Ok(())
}

fn memboost_build(args: MemboostBuildArgs) -> Result<()> {
    let log = corpus::load_engagement(&args.events)?;
    let priors = memboost::compute_priors(&log);
    let store = memboost::accumulate(&log, &priors);
    memboost::write_store(&store, &args.out)?;
    println!(
        "stored {} (query, result) pairs from {} events",
        store.len(),
        log.events.len()
    );
    Ok(())
}

fn memboost_score(args: MemboostScoreArgs) -> Result<()> {
    let store = memboost::read_store(&args.store)?;
    let params = MemboostParams {
        alpha: args.alpha,
        ..MemboostParams::default()
    };
    let query = Signature(args.query);
    let result = Signature(args.result);
    match store.get(&query, &result) {
        Some(stats) => {
            let mb = memboost::mb_score(stats, &params)?;
            println!(
                "{}",
                serde_json::json!({ "stats": stats, "mb": mb })
            );
        }
        None => println!("{}", serde_json::json!({ "stats": null, "mb": 0.0 })),
    }
    Ok(())
}

fn featurize_parts<'a>(
    data: &'a DataDir,
    store: &'a memboost::MemboostStore,
    params: &'a MemboostParams,
    schema: &'a FeatureSchema,
) -> FeaturizeContext<'a> {
    FeaturizeContext {
        pins: &data.pins,
        users: &data.users,
        store,
        params,
        schema,
    }
}

fn train(args: TrainArgs) -> Result<()> {
    let cfg: TrainConfig = serde_json::from_slice(&std::fs::read(&args.config)?)?;
    let data = load_data_dir(&args.data)?;
    let log = corpus::load_engagement(&args.events)?;
    let store = match &args.store {
        Some(path) => memboost::read_store(path)?,
        None => {
            let priors = memboost::compute_priors(&log);
            memboost::accumulate(&log, &priors)
        }
    };
    let params = MemboostParams::default();
    let schema = FeatureSchema::build(&data.users.countries());
    let ctx = featurize_parts(&data, &store, &params, &schema);
    let model = train_model(&cfg, &log, &ctx)?;
    ranking::write_model(&model, &schema, &args.out)?;
    println!(
        "trained {} (fingerprint {:#018x}) from {} sessions",
        cfg.kind.tag(),
        model.fingerprint,
        log.sessions.len()
    );
    Ok(())
}

fn tune_cmd(args: TuneArgs) -> Result<()> {
    let space: HpSpace = serde_json::from_slice(&std::fs::read(&args.space)?)?;
    let data = load_data_dir(&args.data)?;
    let log = corpus::load_engagement(&args.events)?;
    if log.sessions.is_empty() {
        bail!("no sessions in the events file");
    }
    // Time split: train on the earlier 80% of sessions, validate on the
    // rest.
    let mut ts: Vec<i64> = log.sessions.iter().map(|s| s.start_ts).collect();
    ts.sort_unstable();
    let split_ts = ts[(ts.len() * 4 / 5).min(ts.len() - 1)];
    let train_events: Vec<_> = log
        .events
        .iter()
        .filter(|e| e.timestamp <= split_ts)
        .cloned()
        .collect();
    let valid_events: Vec<_> = log
        .events
        .iter()
        .filter(|e| e.timestamp > split_ts)
        .cloned()
        .collect();
    let train_log = crate::eval::log_from_events(train_events);
    let valid_log = crate::eval::log_from_events(valid_events);
    if valid_log.sessions.is_empty() {
        bail!("time split left no validation sessions");
    }

    let priors = memboost::compute_priors(&train_log);
    let store = memboost::accumulate(&train_log, &priors);
    let params = MemboostParams::default();
    let schema = FeatureSchema::build(&data.users.countries());
    let ctx = featurize_parts(&data, &store, &params, &schema);
    let collected = ranking::collect_session_data(&train_log, ranking::CollectMode::Pointwise);
    let train_data = ranking::featurize_session_rows(&collected, &ctx)?;

    let result = ranking::tune(&space, args.trials, args.parallel, args.seed, |hp, seed| {
        let model = ranking::train_gbdt(&train_data, hp, seed)?;
        let report = crate::eval::offline_eval(&model, &valid_log, &ctx)?;
        Ok(report.mean_pr_auc_step)
    })?;
    println!(
        "best trial {} pr_auc {:.4}: {}",
        result.best_trial,
        result.best_score,
        serde_json::to_string(&result.best)?
    );
    if let Some(out) = &args.out {
        std::fs::write(out, serde_json::to_string_pretty(&result.best)?)?;
    }
    Ok(())
}

fn eval_cmd(args: EvalArgs) -> Result<()> {
    let data = load_data_dir(&args.data)?;
    let holdout = corpus::load_engagement(&args.holdout)?;
    let (model, schema) = ranking::read_model(&args.model)?;
    let store = match &args.store {
        Some(path) => memboost::read_store(path)?,
        None => memboost::MemboostStore::default(),
    };
    let params = MemboostParams::default();
    let ctx = featurize_parts(&data, &store, &params, &schema);
    let report = crate::eval::offline_eval(&model, &holdout, &ctx)?;
    let json = serde_json::to_string_pretty(&report)?;
    std::fs::write(&args.out, &json)?;
    println!("{json}");
    Ok(())
}

#[derive(serde::Deserialize)]
struct SimloopSpec {
    synth: SynthConfig,
    #[serde(rename = "loop")]
    loop_cfg: crate::eval::LoopConfig,
    #[serde(default)]
    policy: Option<BlendPolicy>,
    #[serde(default = "default_budget")]
    candidate_budget: usize,
}

fn default_budget() -> usize {
    60
}

fn simloop(args: SimloopArgs) -> Result<()> {
    let spec: SimloopSpec = serde_json::from_slice(&std::fs::read(&args.config)?)?;
    let user_model = SyntheticUserModel::default();
    let world_data = synth::generate(&spec.synth, &user_model)?;
    let users = UserStore::build(&world_data.log, &world_data.pins, Some(&world_data.users));
    let policy = spec.policy.unwrap_or_else(BlendPolicy::uniform);
    let world = crate::eval::SimWorld::build(
        world_data.pins.clone(),
        world_data.boards.clone(),
        users,
        None,
        user_model,
        policy,
        spec.candidate_budget,
        spec.loop_cfg.seed,
    )?;
    let plan = world_data.session_plan(
        spec.loop_cfg.sessions_per_generation,
        util::derive_seed(spec.loop_cfg.seed, "plan"),
    );
    let stats = crate::eval::run_regime_comparison(&world, &plan, &spec.loop_cfg)?;
    let mut csv = String::from("generation,regime,save_propensity,mean_rank_shown\n");
    for row in &stats {
        csv.push_str(&format!(
            "{},{},{:.6},{:.4}\n",
            row.generation, row.regime, row.save_propensity, row.mean_rank_shown
        ));
    }
    std::fs::write(&args.out, &csv)?;
    print!("{csv}");
    Ok(())
}

fn shardmap(args: ShardmapArgs) -> Result<()> {
    let mut map = ShardMap::uniform(args.leaves);
    if let Some(base) = args.base_port {
        let ranges: Vec<_> = map
            .ranges()
            .iter()
            .enumerate()
            .map(|(i, r)| crate::serve::ShardRange {
                addr: Some(format!("http://127.0.0.1:{}", base + i as u16)),
                ..r.clone()
            })
            .collect();
        map = ShardMap::new(ranges)?;
    }
    std::fs::write(&args.out, map.to_json())?;
    println!("wrote {} leaf ranges to {}", args.leaves, args.out.display());
    Ok(())
}

fn engine_state_from(args: &ServeRootArgs) -> Result<EngineState> {
    let data = load_data_dir(&args.data)?;
    let (model, schema) = ranking::read_model(&args.model)?;
    let store = match &args.store {
        Some(path) => memboost::read_store(path)?,
        None => memboost::MemboostStore::default(),
    };
    let table = match &args.table {
        Some(path) => Some(crate::pin2vec::read_table(path)?),
        None => None,
    };
    let policy = match &args.policy {
        Some(path) => BlendPolicy::from_json(&std::fs::read(path)?)?,
        None => BlendPolicy::uniform(),
    };
    let graph_cfg = GraphConfig {
        seed: args.seed,
        ..GraphConfig::default()
    };
    let graph = crate::graph::build_graph(&data.boards, &data.pins, &graph_cfg)?;
    let index = crate::supplemental::AnnotationIndex::build(&data.pins);
    Ok(EngineState {
        pins: data.pins,
        boards: data.boards,
        users: data.users,
        graph,
        index,
        table,
        store,
        mb_params: MemboostParams::default(),
        policy,
        graph_cfg,
        walk: WalkConfig {
            seed: args.seed,
            ..WalkConfig::default()
        },
        model,
        schema,
        cfg: ServeConfig {
            top_k: args.top_k,
            candidate_budget: args.budget,
            deadline_ms: args.deadline_ms,
            memboost_insertion: args.insertion,
            local_swap: true,
            unbiased_fraction: args.unbiased_fraction,
            seed: args.seed,
        },
    })
}

fn serve_root_cmd(args: ServeRootArgs) -> Result<()> {
    let shard = ShardMap::from_json(&std::fs::read(&args.shards)?)?;
    let state = engine_state_from(&args)?;
    let leaves: Vec<LeafHandle> = shard
        .ranges()
        .iter()
        .map(|r| {
            let addr = r
                .addr
                .clone()
                .with_context(|| format!("leaf {} has no addr in the shard map", r.leaf_id))?;
            Ok(LeafHandle::http(addr))
        })
        .collect::<Result<_>>()?;
    let log = match &args.log {
        Some(path) => {
            let file = std::fs::File::create(path)?;
            Some(crate::serve::ServeLog::new(Box::new(
                std::io::BufWriter::new(file),
            )))
        }
        None => None,
    };
    let root = RootNode::new(state, shard, leaves, log)?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(serve_root(
        std::sync::Arc::new(root),
        std::net::SocketAddr::from(([127, 0, 0, 1], args.port)),
    ))?;
    Ok(())
}

fn serve_leaf_cmd(args: ServeLeafArgs) -> Result<()> {
    let range = parse_range(&args.range)?;
    let pins = corpus::load_pins(&args.pins.join("pins.jsonl"))?;
    let (model, schema) = ranking::read_model(&args.model)?;
    let leaf = LeafNode::new(args.id.clone(), range, &pins, model, schema)?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(serve_leaf(
        std::sync::Arc::new(leaf),
        std::net::SocketAddr::from(([127, 0, 0, 1], args.port)),
    ))?;
    Ok(())
}
