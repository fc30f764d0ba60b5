use std::ffi::OsString;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use translaw_core::corpus::{ingest_path, stats};
use translaw_core::document::LanguageRegistry;
use translaw_core::eval::{parse_scores_csv, render_report, render_weighted, report_to_csv, system_reports, AcsPreset, ScoreRow, WeightVector};
use translaw_core::gateway::{accrue_cost, render_cost_report, ComparisonInputs, TokenScheme, UsageRecord};
use translaw_core::memory::PnsConfig;
use translaw_core::pipeline::{export_json, export_txt, FieldError, PipelineLimits};
use translaw_core::{
    segment_paragraphs, Credentials, Direction, Gateway, Glossary, JobConfig, JobState, Memory, Pipeline,
    PipelineError, ProviderRegistry, Role,
};
use translaw_server::ServerConfig;

use crate::{human, runtime, usage, CliError, CostArgs, ServeArgs, TranslateArgs};

const CLI_GLOSSARY: &str = "cli";

fn flag_for(field: &str) -> String {
    match field {
        "role_bindings.translator" => "--translator".into(),
        "role_bindings.annotator" => "--annotator".into(),
        "role_bindings.proofreader" => "--proofreader".into(),
        "rounds" => "--rounds".into(),
        "pns.radius" => "--pns".into(),
        "direction.source" => "--source".into(),
        "direction.target" => "--target".into(),
        "glossary_ref" => "--glossary".into(),
        other => other.into(),
    }
}

fn config_errors(fields: &[FieldError]) -> CliError {
    usage(fields.iter().map(|f| format!("{}: {}", flag_for(&f.field), f.message)).collect::<Vec<_>>().join("\n"))
}

fn direction(source: &str, target: &str) -> Result<Direction, CliError> {
    let languages = LanguageRegistry::default();
    Ok(Direction {
        source: languages.parse(source).map_err(|e| usage(format!("--source: {e}")))?,
        target: languages.parse(target).map_err(|e| usage(format!("--target: {e}")))?,
    })
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = OsString::from(prefix.as_os_str());
    name.push(suffix);
    PathBuf::from(name)
}

pub fn translate(args: TranslateArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.input)
        .map_err(|e| usage(format!("cannot read {}: {e}", args.input.display())))?;
    let config = match &args.config {
        Some(path) => ServerConfig::load(path).map_err(usage)?,
        None => ServerConfig::default(),
    };
    let registry = match args.providers.as_ref().or(config.providers.as_ref()) {
        Some(path) => ProviderRegistry::load(path).map_err(|e| usage(format!("--providers: {e}")))?,
        None => ProviderRegistry::seeded(),
    };
    let memory = match args.data_dir.as_ref().or(config.data_dir.as_ref()) {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| runtime(format!("cannot create {}: {e}", dir.display())))?;
            Memory::open(dir).map_err(runtime)?
        }
        None => Memory::in_memory(),
    };
    let mut pipeline = Pipeline::new(Arc::new(Gateway::new(registry).map_err(usage)?), Arc::new(Mutex::new(memory)))
        .map_err(runtime)?
        .with_limits(PipelineLimits {
            max_rounds: config.max_rounds,
            max_pns_radius: config.max_pns_radius,
            workers: config.workers,
        })
        .map_err(runtime)?;
    for (name, path) in &config.glossaries {
        pipeline = pipeline.with_glossary(name.clone(), Glossary::load_path(path).map_err(usage)?);
    }

    let mut job_config = JobConfig {
        role_bindings: [(Role::Translator, args.translator), (Role::Annotator, args.annotator), (Role::Proofreader, args.proofreader)]
            .into_iter()
            .collect(),
        direction: direction(&args.source, &args.target)?,
        rounds: args.rounds,
        few_shot: args.few_shot,
        human_annotation: args.human,
        ..JobConfig::default()
    };
    if let Some(radius) = args.pns {
        job_config.pns = PnsConfig { radius };
    }
    if let Some(path) = &args.glossary {
        let glossary = Glossary::load_path(path).map_err(|e| usage(format!("--glossary: {e}")))?;
        pipeline = pipeline.with_glossary(CLI_GLOSSARY, glossary);
        job_config.glossary_ref = Some(CLI_GLOSSARY.into());
    }

    let doc_id = args.input.file_stem().map_or("doc".into(), |s| s.to_string_lossy().into_owned());
    let doc = segment_paragraphs(&text, &job_config.direction).map_err(usage)?.with_doc_id(doc_id);
    let mut job = pipeline.create_job("cli", job_config, doc).map_err(|e| match e {
        PipelineError::InvalidConfig(fields) => config_errors(&fields),
        other => usage(other),
    })?;

    let credentials = Credentials::default();
    let stdin = std::io::stdin();
    loop {
        pipeline.advance(&mut job, &credentials, &mut |_| {}).map_err(runtime)?;
        if job.state != JobState::AwaitingHumanAnnotation {
            break;
        }
        human::annotate_round(&pipeline, &mut job, &mut stdin.lock(), &mut std::io::stderr())?;
    }
    for warning in job.warnings() {
        eprintln!("warning: {}", serde_json::to_string(warning).map_err(runtime)?);
    }
    if job.state != JobState::Complete {
        return Err(runtime(format!("job failed: {}", job.failure.as_deref().unwrap_or("unknown cause"))));
    }

    let prefix = args.out.unwrap_or_else(|| args.input.with_extension("translaw"));
    let (json_path, txt_path) = (with_suffix(&prefix, ".json"), with_suffix(&prefix, ".txt"));
    let json = export_json(&job, pipeline.gateway().registry()).map_err(runtime)?;
    std::fs::write(&json_path, json).map_err(|e| runtime(format!("cannot write {}: {e}", json_path.display())))?;
    std::fs::write(&txt_path, export_txt(&job).map_err(runtime)?)
        .map_err(|e| runtime(format!("cannot write {}: {e}", txt_path.display())))?;
    println!("{}\n{}", json_path.display(), txt_path.display());
    Ok(())
}

fn read_scores(path: &Path) -> Result<Vec<ScoreRow>, CliError> {
    let file = File::open(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    parse_scores_csv(file).map_err(usage)
}

fn parse_weights(raw: &str) -> Result<WeightVector<f64>, CliError> {
    if !raw.contains(',') {
        let preset: AcsPreset = raw.parse().map_err(|e| usage(format!("--weights: {e}")))?;
        return Ok(WeightVector::preset(preset));
    }
    let parts = raw
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| usage(format!("--weights: `{p}`: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let [a, b, c] = parts[..] else {
        return Err(usage(format!("--weights: expected three values, got {}", parts.len())));
    };
    WeightVector::new(a, b, c).map_err(|e| usage(format!("--weights: {e}")))
}

pub fn eval_acs(weights: &str, scores: &Path) -> Result<(), CliError> {
    let weights = parse_weights(weights)?;
    print!("{}", render_weighted(&read_scores(scores)?, &weights).map_err(usage)?);
    Ok(())
}

pub fn eval_report(baseline: Option<&str>, csv: bool, scores: &Path) -> Result<(), CliError> {
    let reports = system_reports(&read_scores(scores)?, baseline).map_err(usage)?;
    if csv {
        print!("{}", report_to_csv(&reports).map_err(runtime)?);
    } else {
        print!("{}", render_report(&reports));
    }
    Ok(())
}

pub fn cost(args: CostArgs) -> Result<(), CliError> {
    let registry = ProviderRegistry::load(&args.prices).map_err(|e| usage(format!("--prices: {e}")))?;
    let content = std::fs::read_to_string(&args.usage)
        .map_err(|e| usage(format!("cannot read {}: {e}", args.usage.display())))?;
    let usages = content
        .lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str::<UsageRecord>(line).map_err(|e| usage(format!("{}:{}: {e}", args.usage.display(), i + 1)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let report = accrue_cost(&usages, &registry).map_err(usage)?;
    let cmp = ComparisonInputs { words: args.words, human_rate: args.human_rate, baseline: args.baseline };
    print!("{}", render_cost_report(&report, cmp).map_err(usage)?);
    Ok(())
}

pub fn corpus_stats(source: &str, target: &str, path: &Path) -> Result<(), CliError> {
    let corpus = ingest_path(path, &direction(source, target)?).map_err(usage)?;
    println!("{}", serde_json::to_string_pretty(&stats(&corpus, TokenScheme::Heuristic)).map_err(runtime)?);
    Ok(())
}

pub fn serve(args: ServeArgs) -> Result<(), CliError> {
    let mut config = match &args.config {
        Some(path) => ServerConfig::load(path).map_err(usage)?,
        None => ServerConfig::default(),
    };
    if let Some(bind) = args.bind {
        config.bind = bind;
    }
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(runtime)?;
    rt.block_on(translaw_server::serve(config)).map_err(runtime)
}
