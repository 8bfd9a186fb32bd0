//! `maxnml`: maximum-entropy model selection by NML codelength.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use maxnml::report::{self, VERSION};
use maxnml::{
    build_classifier, evaluate, load_matrix, preprocess, quantization_sweep, rank_genes,
    CompChoice, PipelineConfig, PipelineError, PreprocessConfig, QuantizeMethod, Split,
    SynthConfig,
};
use maxnml_core::{
    build_moment_features, empirical_moments, fit_maxent, nml_codelength, select_by_minimax,
    select_by_nml, Alphabet, CandidateSet, Caps, CompMethod, MomentVector, Sample,
};

#[derive(Parser)]
#[command(
    name = "maxnml",
    version,
    about = "MDL/NML model selection for maximum-entropy models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a maximum-entropy distribution under moment constraints.
    Fit(FitArgs),
    /// ERR, COMP and NML codelengths for a sample.
    Nml(NmlArgs),
    /// Select among moment models by NML or minimax entropy.
    Select(SelectArgs),
    /// Gene-selection pipeline over an expression matrix.
    #[command(subcommand)]
    Genes(GenesCommand),
}

#[derive(Args)]
struct FitArgs {
    /// Comma-separated alphabet symbol values (default: inferred).
    #[arg(long)]
    alphabet: Option<String>,
    /// Comma-separated target moments (x, x², …).
    #[arg(long)]
    mean: Option<String>,
    /// Sample file (whitespace-separated symbol values).
    #[arg(long)]
    sample: Option<PathBuf>,
    /// Number of moment constraints when fitting from a sample.
    #[arg(long, default_value_t = 1)]
    m: usize,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct NmlArgs {
    /// Sample file (whitespace-separated symbol values).
    #[arg(long)]
    sample: PathBuf,
    #[arg(long)]
    alphabet: Option<String>,
    /// Number of moment constraints.
    #[arg(long)]
    m: usize,
    /// COMP method: types | exact | mc.
    #[arg(long, default_value = "types")]
    method: String,
    #[arg(long, default_value_t = 100_000)]
    draws: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Display codelengths in bits instead of nats.
    #[arg(long)]
    bits: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    sample: PathBuf,
    #[arg(long)]
    alphabet: Option<String>,
    /// Comma-separated moment counts to compare, e.g. 0,1,2.
    #[arg(long, default_value = "0,1,2")]
    m_set: String,
    /// nml | minimax.
    #[arg(long, default_value = "nml")]
    criterion: String,
    #[arg(long, default_value = "types")]
    method: String,
    #[arg(long, default_value_t = 100_000)]
    draws: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum GenesCommand {
    /// Rank genes by minimum conditional NML over the m sweep.
    Rank(GenesArgs),
    /// Rank, build the classifier from the top genes, evaluate.
    Classify(GenesArgs),
    /// Sweep quantization levels; emits accuracy and mean NML per level.
    Sweep(GenesArgs),
    /// Generate a synthetic expression matrix and labels file.
    Synth(SynthArgs),
}

#[derive(Args)]
struct GenesArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// Output directory for CSV/JSON artifacts.
    #[arg(long)]
    out: PathBuf,
    /// Quantization levels K.
    #[arg(long, default_value_t = 5)]
    levels: usize,
    #[arg(long, default_value_t = 1)]
    m_min: usize,
    #[arg(long, default_value_t = 7)]
    m_max: usize,
    /// COMP method: types | exact | mc.
    #[arg(long, default_value = "types")]
    method: String,
    #[arg(long, default_value_t = 100_000)]
    draws: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Quantization: quantile | equal-width.
    #[arg(long, default_value = "quantile")]
    quantize: String,
    /// Genes used by the classifier and sweep summaries.
    #[arg(long, default_value_t = 25)]
    top_g: usize,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Skip preprocessing (clamp/filter/log10).
    #[arg(long)]
    no_preprocess: bool,
    /// Drop the per-class intercept from the conditional features.
    #[arg(long)]
    no_intercept: bool,
    /// Sweep range for `genes sweep`, e.g. 2..8.
    #[arg(long, default_value = "2..8")]
    levels_range: String,
    /// Print a machine-readable summary to stdout.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 60)]
    genes: usize,
    #[arg(long, default_value_t = 38)]
    train: usize,
    #[arg(long, default_value_t = 34)]
    test: usize,
    #[arg(long, default_value_t = 6)]
    block: usize,
    #[arg(long, default_value_t = 0.9)]
    delta: f64,
    #[arg(long, default_value_t = 0.2)]
    sigma: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Nml(args) => cmd_nml(args),
        Command::Select(args) => cmd_select(args),
        Command::Genes(cmd) => match cmd {
            GenesCommand::Rank(args) => cmd_genes(args, Mode::Rank),
            GenesCommand::Classify(args) => cmd_genes(args, Mode::Classify),
            GenesCommand::Sweep(args) => cmd_genes(args, Mode::Sweep),
            GenesCommand::Synth(args) => cmd_synth(args),
        },
    }
}

fn parse_floats(text: &str, what: &str) -> Result<Vec<f64>, PipelineError> {
    text.split(',')
        .map(|cell| {
            cell.trim()
                .parse::<f64>()
                .map_err(|_| PipelineError::InvalidData(format!("bad {what} entry {cell:?}")))
        })
        .collect()
}

/// Reads a whitespace/newline-separated sample of symbol values; maps values
/// onto the alphabet (inferred from the distinct values when not given).
fn read_sample(
    path: &PathBuf,
    alphabet_spec: &Option<String>,
) -> Result<(Alphabet, Sample), PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.clone(),
        source,
    })?;
    let mut values = Vec::new();
    for token in text.split_whitespace() {
        let v: f64 = token.parse().map_err(|_| {
            PipelineError::InvalidData(format!("sample entry {token:?} is not a number"))
        })?;
        values.push(v);
    }
    if values.is_empty() {
        return Err(PipelineError::InvalidData("sample file is empty".into()));
    }
    let symbols = match alphabet_spec {
        Some(spec) => parse_floats(spec, "alphabet")?,
        None => {
            let mut distinct = values.clone();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            if distinct.len() < 2 {
                vec![distinct[0], distinct[0] + 1.0]
            } else {
                distinct
            }
        }
    };
    let alphabet = Alphabet::new(symbols)?;
    let indices: Vec<usize> = values
        .iter()
        .map(|v| {
            alphabet
                .symbols()
                .iter()
                .position(|s| (s - v).abs() < 1e-12)
                .ok_or_else(|| {
                    PipelineError::InvalidData(format!("value {v} is not an alphabet symbol"))
                })
        })
        .collect::<Result<_, _>>()?;
    let sample = Sample::new(indices, alphabet.len())?;
    Ok((alphabet, sample))
}

fn comp_method(method: &str, draws: u64, seed: u64) -> Result<CompMethod, PipelineError> {
    match method {
        "types" => Ok(CompMethod::TypeClasses),
        "exact" => Ok(CompMethod::ExactEnum),
        "mc" => Ok(CompMethod::MonteCarlo { draws, seed }),
        other => Err(PipelineError::InvalidData(format!(
            "unknown method {other:?}; use types, exact or mc"
        ))),
    }
}

fn cmd_fit(args: FitArgs) -> Result<(), PipelineError> {
    let (alphabet, moments, config_echo) = match (&args.mean, &args.sample) {
        (Some(mean), _) => {
            let alphabet_spec = args
                .alphabet
                .as_ref()
                .ok_or_else(|| PipelineError::InvalidData("--mean requires --alphabet".into()))?;
            let alphabet = Alphabet::new(parse_floats(alphabet_spec, "alphabet")?)?;
            let means = parse_floats(mean, "mean")?;
            let echo = json!({"alphabet": alphabet.symbols(), "mean": means});
            (alphabet, MomentVector::new(means), echo)
        }
        (None, Some(path)) => {
            let (alphabet, sample) = read_sample(path, &args.alphabet)?;
            let table = build_moment_features(&alphabet, args.m)?;
            let moments = empirical_moments(&sample, &table)?;
            let echo = json!({
                "alphabet": alphabet.symbols(),
                "sample": path.display().to_string(),
                "m": args.m,
            });
            (alphabet, moments, echo)
        }
        (None, None) => {
            return Err(PipelineError::InvalidData(
                "fit needs either --mean or --sample".into(),
            ))
        }
    };
    let table = build_moment_features(&alphabet, moments.len())?;
    let dist = fit_maxent(&table, &moments)?;

    if args.json {
        let out = json!({
            "version": VERSION,
            "config": config_echo,
            "probs": dist.probs(),
            "lambdas": dist.lambdas(),
            "support": dist.support(),
            "entropy_nats": dist.entropy_nats(),
        });
        println!("{}", serde_json::to_string_pretty(&out).unwrap());
    } else {
        println!("symbols:  {:?}", alphabet.symbols());
        println!("probs:    {:?}", dist.probs());
        println!("lambdas:  {:?}", dist.lambdas());
        println!("entropy:  {:.6} nats", dist.entropy_nats());
    }
    Ok(())
}

fn cmd_nml(args: NmlArgs) -> Result<(), PipelineError> {
    let (alphabet, sample) = read_sample(&args.sample, &args.alphabet)?;
    let table = build_moment_features(&alphabet, args.m)?;
    let method = comp_method(&args.method, args.draws, args.seed)?;
    let caps = Caps::default();
    let report = nml_codelength(&table, &alphabet, &sample, method, &caps)?;
    let digest = report::input_digest(&[args.sample.as_path()])?;
    let unit = if args.bits { "bits" } else { "nats" };
    let scale = if args.bits {
        1.0 / std::f64::consts::LN_2
    } else {
        1.0
    };

    if args.json {
        let out = json!({
            "version": VERSION,
            "config": {
                "sample": args.sample.display().to_string(),
                "alphabet": alphabet.symbols(),
                "m": args.m,
                "method": args.method,
                "draws": args.draws,
                "seed": args.seed,
                "unit": unit,
            },
            "input_digest": digest,
            "n": sample.len(),
            "err": report.err_nats * scale,
            "comp": report.comp_nats * scale,
            "nml": report.nml_nats * scale,
            "method": report.method.as_str(),
            "mc_stderr": report.mc_stderr_nats.map(|s| s * scale),
        });
        println!("{}", serde_json::to_string_pretty(&out).unwrap());
    } else {
        println!("n:    {}", sample.len());
        println!("ERR:  {:.6} {unit}", report.err_nats * scale);
        println!("COMP: {:.6} {unit}", report.comp_nats * scale);
        println!(
            "NML:  {:.6} {unit}  [{}]",
            report.nml_nats * scale,
            report.method.as_str()
        );
        if let Some(se) = report.mc_stderr_nats {
            println!("mc stderr: {:.6} {unit}", se * scale);
        }
    }
    Ok(())
}

fn cmd_select(args: SelectArgs) -> Result<(), PipelineError> {
    let (alphabet, sample) = read_sample(&args.sample, &args.alphabet)?;
    let ms: Vec<usize> = args
        .m_set
        .split(',')
        .map(|c| {
            c.trim()
                .parse::<usize>()
                .map_err(|_| PipelineError::InvalidData(format!("bad m entry {c:?} in --m-set")))
        })
        .collect::<Result<_, _>>()?;
    let candidates = ms
        .iter()
        .map(|&m| Ok((format!("m{m}"), build_moment_features(&alphabet, m)?)))
        .collect::<Result<Vec<_>, PipelineError>>()?;
    let set = CandidateSet::new(alphabet, candidates)?;
    let caps = Caps::default();
    let result = match args.criterion.as_str() {
        "nml" => {
            let method = comp_method(&args.method, args.draws, args.seed)?;
            select_by_nml(&set, &sample, method, &caps)?
        }
        "minimax" => select_by_minimax(&set, &sample)?,
        other => {
            return Err(PipelineError::InvalidData(format!(
                "unknown criterion {other:?}; use nml or minimax"
            )))
        }
    };

    if args.json {
        let table: Vec<_> = result
            .per_candidate
            .iter()
            .map(|c| {
                json!({
                    "id": c.id,
                    "num_features": c.num_features,
                    "entropy_nats": c.entropy_nats,
                    "err_nats": c.report.as_ref().map(|r| r.err_nats),
                    "comp_nats": c.report.as_ref().map(|r| r.comp_nats),
                    "nml_nats": c.report.as_ref().map(|r| r.nml_nats),
                    "error": c.error,
                })
            })
            .collect();
        let out = json!({
            "version": VERSION,
            "config": {
                "sample": args.sample.display().to_string(),
                "m_set": ms,
                "criterion": args.criterion,
                "method": args.method,
            },
            "chosen_id": result.chosen_id,
            "candidates": table,
        });
        println!("{}", serde_json::to_string_pretty(&out).unwrap());
    } else {
        println!("criterion: {}", args.criterion);
        for c in &result.per_candidate {
            match (&c.report, &c.entropy_nats, &c.error) {
                (Some(r), _, _) => println!(
                    "  {}: ERR {:.6}  COMP {:.6}  NML {:.6}",
                    c.id, r.err_nats, r.comp_nats, r.nml_nats
                ),
                (None, Some(h), _) => println!("  {}: entropy {h:.6}", c.id),
                (None, None, Some(e)) => println!("  {}: failed ({e})", c.id),
                _ => {}
            }
        }
        println!("chosen: {}", result.chosen_id);
    }
    Ok(())
}

enum Mode {
    Rank,
    Classify,
    Sweep,
}

fn parse_range(spec: &str) -> Result<(usize, usize), PipelineError> {
    let parts: Vec<&str> = spec.split("..").collect();
    if parts.len() != 2 {
        return Err(PipelineError::InvalidData(format!(
            "range must look like 2..8, got {spec:?}"
        )));
    }
    let lo = parts[0]
        .trim()
        .parse()
        .map_err(|_| PipelineError::InvalidData(format!("bad range start {:?}", parts[0])))?;
    let hi = parts[1]
        .trim()
        .parse()
        .map_err(|_| PipelineError::InvalidData(format!("bad range end {:?}", parts[1])))?;
    if lo < 2 || hi < lo {
        return Err(PipelineError::InvalidData(format!(
            "invalid range {spec:?}"
        )));
    }
    Ok((lo, hi))
}

fn pipeline_config(args: &GenesArgs) -> Result<PipelineConfig, PipelineError> {
    let comp = match args.method.as_str() {
        "types" => CompChoice::Types,
        "exact" => CompChoice::Exact,
        "mc" => CompChoice::Mc,
        other => {
            return Err(PipelineError::InvalidData(format!(
                "unknown method {other:?}; use types, exact or mc"
            )))
        }
    };
    let quantize = match args.quantize.as_str() {
        "quantile" => QuantizeMethod::Quantile,
        "equal-width" => QuantizeMethod::EqualWidth,
        other => {
            return Err(PipelineError::InvalidData(format!(
                "unknown quantization {other:?}; use quantile or equal-width"
            )))
        }
    };
    Ok(PipelineConfig {
        levels: args.levels,
        m_min: args.m_min,
        m_max: args.m_max,
        quantize,
        comp,
        mc_draws: args.draws,
        seed: args.seed,
        intercept: !args.no_intercept,
        preprocess: PreprocessConfig {
            enabled: !args.no_preprocess,
            ..PreprocessConfig::default()
        },
        top_g: args.top_g,
        threads: args.threads,
        smoothing_eps: 1e-6,
    })
}

fn in_pool<T: Send>(
    threads: usize,
    f: impl FnOnce() -> Result<T, PipelineError> + Send,
) -> Result<T, PipelineError> {
    if threads == 0 {
        return f();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| PipelineError::InvalidData(format!("thread pool: {e}")))?;
    pool.install(f)
}

fn cmd_genes(args: GenesArgs, mode: Mode) -> Result<(), PipelineError> {
    let config = pipeline_config(&args)?;
    let config_json = serde_json::to_string(&config).unwrap();
    let digest = report::input_digest(&[args.matrix.as_path(), args.labels.as_path()])?;

    let raw = load_matrix(&args.matrix, &args.labels)?;
    let (matrix, _dropped) = preprocess(&raw, &config.preprocess)?;

    match mode {
        Mode::Rank => {
            let ranked = in_pool(config.threads, || rank_genes(&matrix, &config))?;
            let ranking =
                report::ranking_csv(&ranked, (config.m_min, config.m_max), &config_json, &digest);
            let curves = report::curves_csv(&ranked, &config_json, &digest);
            report::write_file(&args.out.join("ranking.csv"), &ranking)?;
            report::write_file(&args.out.join("curves.csv"), &curves)?;
            if args.json {
                let summary = json!({
                    "version": VERSION,
                    "config": serde_json::to_value(&config).unwrap(),
                    "input_digest": digest,
                    "genes_ranked": ranked.len(),
                    "outputs": ["ranking.csv", "curves.csv"],
                });
                println!("{}", serde_json::to_string_pretty(&summary).unwrap());
            } else {
                println!("ranked {} genes -> {}", ranked.len(), args.out.display());
            }
        }
        Mode::Classify => {
            let ranked = in_pool(config.threads, || rank_genes(&matrix, &config))?;
            let used = config.top_g.min(ranked.len());
            let classifier =
                build_classifier(&matrix, &ranked, used, config.levels, config.smoothing_eps)?;
            let train_eval = evaluate(&classifier, &matrix, Some(Split::Train))?;
            let test_eval = if matrix.test_columns().is_empty() {
                None
            } else {
                Some(evaluate(&classifier, &matrix, Some(Split::Test))?)
            };
            let eval_report = report::EvaluationReport {
                version: VERSION,
                config: serde_json::to_value(&config).unwrap(),
                input_digest: &digest,
                seed: config.seed,
                classes: &matrix.class_names,
                top_genes: ranked
                    .iter()
                    .take(used)
                    .enumerate()
                    .map(|(i, s)| report::TopGene {
                        rank: i + 1,
                        gene_id: &s.gene_id,
                        chosen_m: s.chosen_m,
                        min_nml_nats: s.min_nml_nats,
                    })
                    .collect(),
                train: &train_eval,
                test: test_eval.as_ref(),
            };
            let ranking =
                report::ranking_csv(&ranked, (config.m_min, config.m_max), &config_json, &digest);
            report::write_file(&args.out.join("ranking.csv"), &ranking)?;
            report::write_file(
                &args.out.join("evaluation.json"),
                &format!("{}\n", serde_json::to_string_pretty(&eval_report).unwrap()),
            )?;
            if args.json {
                let summary = json!({
                    "version": VERSION,
                    "input_digest": digest,
                    "train_accuracy": train_eval.accuracy,
                    "test_accuracy": test_eval.as_ref().map(|e| e.accuracy),
                    "outputs": ["ranking.csv", "evaluation.json"],
                });
                println!("{}", serde_json::to_string_pretty(&summary).unwrap());
            } else {
                println!(
                    "train accuracy {:.4}{} -> {}",
                    train_eval.accuracy,
                    test_eval
                        .as_ref()
                        .map(|e| format!(", test accuracy {:.4}", e.accuracy))
                        .unwrap_or_default(),
                    args.out.display()
                );
            }
        }
        Mode::Sweep => {
            let range = parse_range(&args.levels_range)?;
            let points = in_pool(config.threads, || {
                quantization_sweep(&matrix, &config, range, config.top_g)
            })?;
            let rows: Vec<(usize, f64, f64)> = points
                .iter()
                .map(|p| (p.levels, p.accuracy, p.mean_min_nml_nats))
                .collect();
            let mut sweep_config: serde_json::Value = serde_json::to_value(&config).unwrap();
            sweep_config["ranking_recomputed_per_level"] = json!(true);
            let csv = report::sweep_csv(&rows, &sweep_config.to_string(), &digest);
            report::write_file(&args.out.join("sweep.csv"), &csv)?;
            if args.json {
                let summary = json!({
                    "version": VERSION,
                    "input_digest": digest,
                    "points": points,
                    "outputs": ["sweep.csv"],
                });
                println!("{}", serde_json::to_string_pretty(&summary).unwrap());
            } else {
                println!(
                    "swept levels {}..={} -> {}",
                    range.0,
                    range.1,
                    args.out.display()
                );
            }
        }
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<(), PipelineError> {
    let config = SynthConfig {
        genes: args.genes,
        train_samples: args.train,
        test_samples: args.test,
        block: args.block,
        delta: args.delta,
        sigma: args.sigma,
        seed: args.seed,
        ..SynthConfig::default()
    };
    let matrix = maxnml::generate(&config);

    let mut matrix_csv = String::from("gene");
    for id in &matrix.sample_ids {
        matrix_csv.push(',');
        matrix_csv.push_str(id);
    }
    matrix_csv.push('\n');
    for g in 0..matrix.num_genes() {
        matrix_csv.push_str(&matrix.gene_ids[g]);
        for &v in matrix.row(g) {
            matrix_csv.push_str(&format!(",{v:.4}"));
        }
        matrix_csv.push('\n');
    }
    let mut labels_csv = String::new();
    for (i, id) in matrix.sample_ids.iter().enumerate() {
        let split = if matrix.split[i] == Split::Train {
            "train"
        } else {
            "test"
        };
        labels_csv.push_str(&format!(
            "{id},{},{split}\n",
            matrix.class_names[matrix.labels[i]]
        ));
    }
    report::write_file(&args.out.join("matrix.csv"), &matrix_csv)?;
    report::write_file(&args.out.join("labels.csv"), &labels_csv)?;
    println!(
        "wrote {} genes x {} samples -> {}",
        matrix.num_genes(),
        matrix.num_samples(),
        args.out.display()
    );
    Ok(())
}
