use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde_json::json;
use sha2::{Digest, Sha256};

use steinerwl::data::{self, Netlist, PinDistribution, SynthConfig, TrainingSample};
use steinerwl::eval::{self, EvalOptions, InferenceOptions, Method, SweepPoint, WlReport};
use steinerwl::model::{AdamConfig, Checkpoint, ModelConfig};
use steinerwl::train::{self, metrics_csv, TrainConfig, TrainOutcome};
use steinerwl::{ExactBudget, Length, Net};

use crate::args::{self, Cli, Command};

pub fn run(cli: &Cli, argv: &[String]) -> Result<()> {
    match &cli.command {
        Command::GenData(a) => gen_data(cli, argv, a),
        Command::Label(a) => label(cli, argv, a),
        Command::Train(a) => train_cmd(cli, argv, a),
        Command::FineTune(a) => fine_tune_cmd(cli, argv, a),
        Command::Predict(a) => predict(cli, argv, a),
        Command::Eval(a) => eval_cmd(cli, argv, a),
        Command::Bench(a) => bench(cli, argv, a),
        Command::Report(a) => report(cli, argv, a),
    }
}

fn require_out(cli: &Cli) -> Result<&Path> {
    cli.out.as_deref().context("this command needs --out")
}

/// `dir/name.ext` -> `dir/name.<suffix>`.
fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.{suffix}"))
}

fn command_name(cli: &Cli) -> &'static str {
    match cli.command {
        Command::GenData(_) => "gen-data",
        Command::Label(_) => "label",
        Command::Train(_) => "train",
        Command::FineTune(_) => "fine-tune",
        Command::Predict(_) => "predict",
        Command::Eval(_) => "eval",
        Command::Bench(_) => "bench",
        Command::Report(_) => "report",
    }
}

/// Writes `<out>.manifest.json`. `argv` already includes any config-file
/// flags, so the recorded command line reproduces the run on its own.
fn write_manifest(cli: &Cli, argv: &[String], out: &Path, outputs: &[PathBuf]) -> Result<()> {
    let config_bytes = match &cli.config {
        Some(p) => std::fs::read(p).with_context(|| format!("reading {}", p.display()))?,
        None => Vec::new(),
    };
    let hash: String = Sha256::digest(&config_bytes).iter().map(|b| format!("{b:02x}")).collect();
    let manifest = json!({
        "command": command_name(cli),
        "argv": argv,
        "seed": cli.seed,
        "threads": cli.threads,
        "config_file": cli.config,
        "config_sha256": hash,
        "versions": {
            "steinerwl": env!("CARGO_PKG_VERSION"),
            "dataset_schema": data::SCHEMA_VERSION,
            "checkpoint_magic": String::from_utf8_lossy(steinerwl::model::checkpoint::MAGIC),
        },
        "outputs": outputs,
    });
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    let path = PathBuf::from(name);
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn budget(o: &args::OracleArgs) -> ExactBudget {
    ExactBudget { max_degree: o.exact_max_degree }
}

fn load_netlists(input: &args::NetInput) -> Result<Vec<Netlist>> {
    let mut out = Vec::new();
    for arg in &input.nets {
        let paths: Vec<PathBuf> = arg.split(',').map(PathBuf::from).collect();
        let nl = data::parse_netlist_filtered(&paths, &input.degree_filter)?;
        eprintln!(
            "{}: {} nets kept, {} excluded (degree outside {}..{})",
            nl.name,
            nl.nets.len(),
            nl.excluded.len(),
            input.degree_filter.start(),
            input.degree_filter.end()
        );
        out.push(nl);
    }
    Ok(out)
}

fn gen_data(cli: &Cli, argv: &[String], a: &args::GenData) -> Result<()> {
    let out = require_out(cli)?;
    let distribution = match a.clustered {
        Some((clusters, spread)) => PinDistribution::Clustered { clusters, spread },
        None => PinDistribution::Uniform,
    };
    let cfg = SynthConfig { degrees: a.degrees.clone(), extent: a.extent, distribution };
    let s = data::generate_dataset(out, &cfg, a.count, cli.seed, budget(&a.oracle))?;
    eprintln!(
        "wrote {} nets ({} exact, {} heuristic labels; {} of {} candidates positive) to {}",
        s.count,
        s.exact,
        s.heuristic,
        s.positives,
        s.candidates,
        out.display()
    );
    write_manifest(cli, argv, out, &[out.to_path_buf()])
}

fn label(cli: &Cli, argv: &[String], a: &args::Label) -> Result<()> {
    let out = require_out(cli)?;
    let netlists = load_netlists(&a.input)?;
    let nets: Vec<Net> = netlists.into_iter().flat_map(|nl| nl.nets).collect();
    let records = data::label_nets(&nets, budget(&a.oracle), cli.seed)?;
    let comment = format!(
        "steinerwl dataset schema={} count={} source=netlist exact_max_degree={}",
        data::SCHEMA_VERSION,
        records.len(),
        a.oracle.exact_max_degree
    );
    data::save_dataset(out, &comment, &records)?;
    eprintln!("labeled {} nets into {}", records.len(), out.display());
    write_manifest(cli, argv, out, &[out.to_path_buf()])
}

fn model_config(m: &args::ModelArgs, seed: u64) -> ModelConfig {
    ModelConfig {
        layers: m.layers,
        hidden: m.hidden,
        heads: 1,
        mlp_hidden: m.mlp_hidden,
        use_layernorm: !m.no_layernorm,
        gine_neighbor_variant: m.neighbor_messages,
        seed,
    }
}

fn loop_config(r: &args::LoopArgs, lr: f64, seed: u64, model: ModelConfig) -> TrainConfig {
    TrainConfig {
        model,
        adam: AdamConfig { lr, weight_decay: r.weight_decay, ..Default::default() },
        steps: r.steps,
        batch_size: r.batch_size,
        shard_size: r.shard_size,
        pos_weight: r.pos_weight,
        val_every: r.val_every,
        log_every: r.log_every,
        threshold: r.threshold,
        cosine_decay: r.cosine,
        seed,
        ..Default::default()
    }
}

fn load_split(r: &args::LoopArgs) -> Result<(Vec<TrainingSample>, Vec<TrainingSample>)> {
    let mut samples = data::read_training_samples(&r.data)?;
    let val = match &r.val_data {
        Some(p) => data::read_training_samples(p)?,
        None => {
            if r.val_count >= samples.len() && !samples.is_empty() {
                bail!("--val-count {} leaves no training nets out of {}", r.val_count, samples.len());
            }
            samples.split_off(samples.len() - r.val_count.min(samples.len()))
        }
    };
    eprintln!("{} training nets, {} validation nets", samples.len(), val.len());
    Ok((samples, val))
}

fn finish_training(cli: &Cli, argv: &[String], out: &Path, o: &TrainOutcome) -> Result<()> {
    o.best.save(out)?;
    let metrics = sibling(out, "metrics.csv");
    std::fs::write(&metrics, metrics_csv(&o.metrics, true)).with_context(|| format!("writing {}", metrics.display()))?;
    if let Some(v) = o.metrics.iter().rev().find_map(|r| r.validation) {
        eprintln!(
            "last validation: precision {:.4} recall {:.4} WL error {:.4}%; best checkpoint from step {}",
            v.precision, v.recall, v.wl_error_pct, o.best_step
        );
    }
    write_manifest(cli, argv, out, &[out.to_path_buf(), metrics])
}

fn train_cmd(cli: &Cli, argv: &[String], a: &args::Train) -> Result<()> {
    let out = require_out(cli)?;
    let (samples, val) = load_split(&a.run)?;
    let cfg = loop_config(&a.run, a.lr, cli.seed, model_config(&a.model, cli.seed));
    let o = train::train(&cfg, &samples, &val)?;
    finish_training(cli, argv, out, &o)
}

fn parse_arch(s: &str, seed: u64) -> Result<ModelConfig> {
    let mut m = ModelConfig { seed, ..Default::default() };
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = part.split_once('=').with_context(|| format!("bad architecture entry {part:?}"))?;
        let v = v.trim();
        match k.trim() {
            "layers" => m.layers = v.parse()?,
            "hidden" => m.hidden = v.parse()?,
            "mlp_hidden" => m.mlp_hidden = v.parse()?,
            "layernorm" => m.use_layernorm = v.parse()?,
            "neighbor_messages" => m.gine_neighbor_variant = v.parse()?,
            other => bail!("unknown architecture key {other:?}"),
        }
    }
    Ok(m)
}

fn fine_tune_cmd(cli: &Cli, argv: &[String], a: &args::FineTune) -> Result<()> {
    let out = require_out(cli)?;
    let base = Checkpoint::load(&a.checkpoint)?;
    let expected = a.expect_arch.as_deref().map(|s| parse_arch(s, cli.seed)).transpose()?;
    if let Some(want) = &expected {
        // Fail before reading the dataset.
        train::fine_tune(&base, Some(want), &TrainConfig { steps: 0, ..Default::default() }, &[], &[])?;
    }
    let (samples, val) = load_split(&a.run)?;
    let cfg = loop_config(&a.run, a.lr, cli.seed, base.config().clone());
    let o = train::fine_tune(&base, expected.as_ref(), &cfg, &samples, &val)?;
    finish_training(cli, argv, out, &o)
}

fn inference(i: &args::InferenceArgs) -> InferenceOptions {
    InferenceOptions { threshold: i.threshold, batch_size: i.batch_size, groups: i.groups }
}

fn predict(cli: &Cli, argv: &[String], a: &args::Predict) -> Result<()> {
    let ck = Checkpoint::load(&a.checkpoint)?;
    let netlists = load_netlists(&a.input)?;
    let mut text = String::from("netlist\tnet\tdegree\twl\tsteiner_points\n");
    for nl in &netlists {
        let nets: Vec<&Net> = nl.nets.iter().collect();
        for (n, e) in nets.iter().zip(eval::model_estimates(&ck.params, &nets, &inference(&a.inference))?) {
            let pts: Vec<String> = e.estimate.steiner_points(n).iter().map(|p| format!("{},{}", p.x, p.y)).collect();
            let _ = writeln!(text, "{}\t{}\t{}\t{}\t{}", nl.name, n.id, n.degree(), e.estimate.wl, pts.join(";"));
        }
    }
    match &cli.out {
        Some(out) => {
            std::fs::write(out, &text).with_context(|| format!("writing {}", out.display()))?;
            write_manifest(cli, argv, out, std::slice::from_ref(out))
        }
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn summary_table(r: &WlReport) -> String {
    let mut s = format!("{:<8} {:<14} {:<6} {:>7} {:>12} {:>12} {:>12}\n", "scope", "group", "method", "nets", "mean_err_%", "max_err_%", "mean_us");
    let f = |v: Option<f64>, p: usize| v.map_or_else(|| "-".to_string(), |v| format!("{v:.p$}"));
    for a in r.aggregates() {
        if a.nets == 0 && a.scope == "degree" {
            continue;
        }
        let _ = writeln!(
            s,
            "{:<8} {:<14} {:<6} {:>7} {:>12} {:>12} {:>12}",
            a.scope,
            a.group,
            a.method.name(),
            a.nets,
            f(a.mean_error_pct, 3),
            f(a.max_error_pct, 3),
            f(a.mean_runtime_us, 1)
        );
    }
    s
}

fn eval_cmd(cli: &Cli, argv: &[String], a: &args::Eval) -> Result<()> {
    let methods = Method::parse_list(&a.methods)?;
    let ck = a.checkpoint.as_deref().map(Checkpoint::load).transpose()?;
    let netlists = load_netlists(&a.input)?;
    let opts = EvalOptions { methods, budget: budget(&a.oracle), inference: inference(&a.inference) };
    let r = eval::evaluate(&netlists, ck.as_ref().map(|c| &c.params), &opts)?;
    eprint!("{}", summary_table(&r));
    match &cli.out {
        Some(out) => {
            let (summary, timing) = (sibling(out, "summary.csv"), sibling(out, "timing.csv"));
            for (p, body) in [(out, r.nets_csv()), (&summary, r.summary_csv()), (&timing, r.timing_csv())] {
                std::fs::write(p, body).with_context(|| format!("writing {}", p.display()))?;
            }
            write_manifest(cli, argv, out, &[out.clone(), summary, timing])
        }
        None => {
            std::io::stdout().write_all(r.nets_csv().as_bytes())?;
            Ok(())
        }
    }
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| anyhow::anyhow!("bad {what} {t:?}")))
        .collect()
}

fn bench(cli: &Cli, argv: &[String], a: &args::Bench) -> Result<()> {
    let paths: Vec<PathBuf> = parse_list(&a.checkpoints, "checkpoint path")?;
    let thresholds: Vec<f32> = parse_list(&a.thresholds, "threshold")?;
    let batch_sizes: Vec<usize> = parse_list(&a.batch_sizes, "batch size")?;
    let cks: Vec<Checkpoint> = paths.iter().map(|p| Checkpoint::load(p)).collect::<steinerwl::Result<_>>()?;
    let netlists = load_netlists(&a.input)?;
    let refs = eval::evaluate(&netlists, None, &EvalOptions { methods: vec![Method::Mst], budget: budget(&a.oracle), ..Default::default() })?;
    let wl_ref: Vec<Length> = refs.rows.iter().map(|r| r.wl_ref).collect();
    let nets: Vec<&Net> = netlists.iter().flat_map(|nl| nl.nets.iter()).collect();
    let mut points = Vec::new();
    for (p, ck) in paths.iter().zip(&cks) {
        for &threshold in &thresholds {
            for &batch_size in &batch_sizes {
                points.push(SweepPoint {
                    label: p.display().to_string(),
                    params: &ck.params,
                    inference: InferenceOptions { threshold, batch_size, groups: a.groups },
                });
            }
        }
    }
    let csv = eval::sweep_csv(&eval::sweep(&points, &nets, &wl_ref)?);
    match &cli.out {
        Some(out) => {
            std::fs::write(out, &csv).with_context(|| format!("writing {}", out.display()))?;
            write_manifest(cli, argv, out, std::slice::from_ref(out))
        }
        None => {
            std::io::stdout().write_all(csv.as_bytes())?;
            Ok(())
        }
    }
}

fn report(cli: &Cli, argv: &[String], a: &args::Report) -> Result<()> {
    let text = std::fs::read_to_string(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let r = WlReport::from_nets_csv(&text)?;
    print!("{}", summary_table(&r));
    if let Some(out) = &cli.out {
        std::fs::write(out, r.summary_csv()).with_context(|| format!("writing {}", out.display()))?;
        write_manifest(cli, argv, out, std::slice::from_ref(out))?;
    }
    Ok(())
}
