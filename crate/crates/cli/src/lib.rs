//! The `varsel` command line.
//!
//! Exit codes: 0 on success, 1 when no technique can be recommended or every
//! candidate of a chain failed, 2 on input errors.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;
use varsel_core::kb::{BASELINES_JSON, CASE_STUDY_REPORT_JSON, SKLEARN_FM};
use varsel_core::{
    as_configuration, compare_baselines, export_dot, load_knowledge_base, new_session, parse_model, recommend,
    reselect, self_check, submit_metrics, AdaptationReport, Configuration, Decision, FeatureModel, MetricsReport,
    ModelingAssumptions, NoRecommendation, ParseDiagnostic, Prediction, Ranking, Recommendation,
    RecommendationChain, TraceEntry, Valuation, WorkingCriterion,
};

pub const EXIT_OK: u8 = 0;
pub const EXIT_NEGATIVE: u8 = 1;
pub const EXIT_INPUT: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "varsel", version, about = "Feature-model based selection of machine-learning techniques")]
struct Cli {
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and validate a model file; without a file, self-check the built-in knowledge base
    Validate { file: Option<PathBuf> },
    /// Write the knowledge base as sklearn.fm into a directory
    ExportKb {
        dir: PathBuf,
        /// Also write the baseline and case-study metric reports
        #[arg(long)]
        fixtures: bool,
    },
    /// Print a model as graphviz dot; without a file, the built-in knowledge base
    Dot {
        file: Option<PathBuf>,
        /// Configuration JSON to highlight
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Recommend a chain of techniques for the given assumptions
    Recommend(RecommendArgs),
    /// Feed metric reports into an evaluation session over a chain
    Evaluate {
        /// Output of `recommend --format json`
        #[arg(long)]
        chain: PathBuf,
        /// Working criterion as metric:threshold, e.g. f1:0.77
        #[arg(long)]
        criterion: WorkingCriterion,
        /// Metric report JSON; repeat to replay several in order
        #[arg(long, required = true)]
        report: Vec<PathBuf>,
        /// JSON list of reports to rank the last submitted report against
        #[arg(long)]
        baselines: Option<PathBuf>,
    },
    /// Re-run the selection after a change of assumptions
    Adapt {
        #[arg(long)]
        assumptions: PathBuf,
        #[arg(long)]
        delta: PathBuf,
    },
}

#[derive(Debug, Args)]
struct RecommendArgs {
    #[arg(long)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    features: u64,
    #[arg(long)]
    predict: Prediction,
    #[arg(long)]
    labeled: bool,
    #[arg(long)]
    text: bool,
    #[arg(long, action = clap::ArgAction::Set)]
    known_categories: Option<bool>,
    #[arg(long)]
    few_features: bool,
    /// Print the configuration of this technique instead of the chain
    #[arg(long, value_name = "TECHNIQUE")]
    configure: Option<String>,
}

impl RecommendArgs {
    fn assumptions(&self) -> ModelingAssumptions {
        ModelingAssumptions {
            sample_size: self.samples,
            num_features: self.features,
            prediction: self.predict,
            labeled: self.labeled,
            text_data: self.text,
            known_categories: self.known_categories,
            few_features: self.few_features,
        }
    }
}

/// Selected feature names plus attribute values; the `dot --config` input.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub selected: Vec<String>,
    #[serde(default)]
    pub attributes: Valuation,
}

impl ConfigFile {
    pub fn of(model: &FeatureModel, config: &Configuration) -> Self {
        ConfigFile {
            selected: config.names(model).into_iter().map(String::from).collect(),
            attributes: config.attributes.clone(),
        }
    }
}

/// Everything that is not a regular outcome ends as exit code 2.
#[derive(Debug)]
enum Failure {
    Input(anyhow::Error),
    Diagnostics(String, Vec<ParseDiagnostic>),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Input(e)
    }
}

type Outcome = Result<u8, Failure>;

/// Runs the command line given by `args` (program name first).
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_INPUT
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    match dispatch(&cli, out) {
        Ok(code) => code,
        Err(Failure::Input(e)) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_INPUT
        }
        Err(Failure::Diagnostics(file, diags)) => {
            for d in diags {
                let _ = writeln!(err, "{file}:{d}");
            }
            EXIT_INPUT
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Outcome {
    let f = cli.format;
    match &cli.command {
        Command::Validate { file } => validate(file.as_deref(), f, out),
        Command::ExportKb { dir, fixtures } => export_kb(dir, *fixtures, f, out),
        Command::Dot { file, config } => dot(file.as_deref(), config.as_deref(), out),
        Command::Recommend(args) => recommend_cmd(args, f, out),
        Command::Evaluate { chain, criterion, report, baselines } => {
            evaluate(chain, *criterion, report, baselines.as_deref(), f, out)
        }
        Command::Adapt { assumptions, delta } => adapt(assumptions, delta, f, out),
    }
}

fn io_err(e: std::io::Error) -> Failure {
    Failure::Input(anyhow!("cannot write output: {e}"))
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<T> {
    serde_json::from_str(&read(path)?).with_context(|| format!("{} is not valid", path.display()))
}

fn print_json(out: &mut dyn Write, value: &impl Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("output types serialize");
    writeln!(out, "{text}").map_err(io_err)
}

fn load_model(file: Option<&Path>) -> Result<FeatureModel, Failure> {
    let (name, text) = match file {
        Some(p) => (p.display().to_string(), read(p)?),
        None => ("sklearn.fm".to_string(), SKLEARN_FM.to_string()),
    };
    parse_model(&text).map_err(|d| Failure::Diagnostics(name, d))
}

fn validate(file: Option<&Path>, f: Format, out: &mut dyn Write) -> Outcome {
    let model = load_model(file)?;
    let report = match file {
        Some(_) => None,
        None => Some(self_check(&load_knowledge_base().map_err(anyhow::Error::from)?)),
    };
    let passed = report.as_ref().is_none_or(|r| r.passed());
    match f {
        Format::Json => print_json(
            out,
            &json!({
                "model": model.name(),
                "features": model.len(),
                "constraints": model.constraints().len(),
                "self_check": report,
            }),
        )?,
        Format::Text => {
            writeln!(
                out,
                "ok: model {} ({} features, {} constraints)",
                model.name(),
                model.len(),
                model.constraints().len()
            )
            .map_err(io_err)?;
            if let Some(r) = &report {
                write!(out, "{r}").map_err(io_err)?;
            }
        }
    }
    if passed {
        Ok(EXIT_OK)
    } else {
        Err(anyhow!("knowledge-base self-check failed").into())
    }
}

fn export_kb(dir: &Path, fixtures: bool, f: Format, out: &mut dyn Write) -> Outcome {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut files = vec![("sklearn.fm", SKLEARN_FM)];
    if fixtures {
        files.push(("baselines.json", BASELINES_JSON));
        files.push(("linearsvc_report.json", CASE_STUDY_REPORT_JSON));
    }
    let mut written = Vec::new();
    for (name, text) in files {
        let path = dir.join(name);
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        written.push(name);
    }
    match f {
        Format::Json => print_json(out, &json!({ "written": written }))?,
        Format::Text => {
            for name in written {
                writeln!(out, "wrote {name}").map_err(io_err)?;
            }
        }
    }
    Ok(EXIT_OK)
}

fn dot(file: Option<&Path>, config: Option<&Path>, out: &mut dyn Write) -> Outcome {
    let model = load_model(file)?;
    let highlight = match config {
        Some(p) => {
            let c: ConfigFile = read_json(p)?;
            Some(Configuration::from_names(&model, &c.selected, c.attributes).map_err(anyhow::Error::from)?)
        }
        None => None,
    };
    let text = export_dot(&model, highlight.as_ref()).map_err(anyhow::Error::from)?;
    write!(out, "{text}").map_err(io_err)?;
    Ok(EXIT_OK)
}

fn write_trace(out: &mut dyn Write, trace: &[TraceEntry]) -> Result<(), Failure> {
    writeln!(out, "trace:").map_err(io_err)?;
    for t in trace {
        writeln!(out, "  {:<5} {:<5} {}", t.label, t.value, t.formula).map_err(io_err)?;
    }
    Ok(())
}

fn write_no_recommendation(out: &mut dyn Write, n: &NoRecommendation) -> Result<(), Failure> {
    writeln!(out, "{}", n.reason).map_err(io_err)?;
    writeln!(out, "  {}", n.detail).map_err(io_err)?;
    let mut labels: Vec<&str> = n.trace.iter().map(|t| t.label.as_str()).collect();
    labels.dedup();
    writeln!(out, "labels: {}", labels.join(", ")).map_err(io_err)?;
    write_trace(out, &n.trace)
}

fn recommend_cmd(args: &RecommendArgs, f: Format, out: &mut dyn Write) -> Outcome {
    let kb = load_knowledge_base().map_err(anyhow::Error::from)?;
    let a = args.assumptions();
    if let Some(technique) = &args.configure {
        let id = kb.model().id(technique).ok_or_else(|| anyhow!("unknown technique {technique}"))?;
        return match as_configuration(&kb, &a, id) {
            Ok(config) => {
                let file = ConfigFile::of(kb.model(), &config);
                match f {
                    Format::Json => print_json(out, &file)?,
                    Format::Text => {
                        writeln!(out, "{}", file.selected.join(" ")).map_err(io_err)?;
                    }
                }
                Ok(EXIT_OK)
            }
            Err(e) => Err(anyhow::Error::from(e).into()),
        };
    }
    let result = recommend(&kb, &a);
    let code = if result.is_ok() { EXIT_OK } else { EXIT_NEGATIVE };
    match f {
        Format::Json => print_json(out, &Recommendation::from(result))?,
        Format::Text => match &result {
            Ok(chain) => {
                writeln!(out, "{}: {}", chain.category, chain.render()).map_err(io_err)?;
                writeln!(out, "labels: {}", chain.fired_labels().join(", ")).map_err(io_err)?;
                write_trace(out, &chain.trace)?;
            }
            Err(n) => write_no_recommendation(out, n)?,
        },
    }
    Ok(code)
}

/// Accepts either `recommend --format json` output or a bare chain.
fn read_chain(path: &Path) -> anyhow::Result<RecommendationChain> {
    let text = read(path)?;
    if let Ok(r) = serde_json::from_str::<Recommendation>(&text) {
        return match r {
            Recommendation::Chain(c) => Ok(c),
            Recommendation::NoRecommendation(n) => Err(anyhow!("{} holds no chain: {n}", path.display())),
        };
    }
    serde_json::from_str(&text).with_context(|| format!("{} is not a chain", path.display()))
}

#[derive(Serialize)]
struct EvaluationOutput<'a> {
    criterion: String,
    decisions: &'a [Decision],
    outcome: Option<&'a Decision>,
    candidates: Vec<String>,
    ranking: Option<&'a Ranking>,
}

fn evaluate(
    chain: &Path,
    criterion: WorkingCriterion,
    reports: &[PathBuf],
    baselines: Option<&Path>,
    f: Format,
    out: &mut dyn Write,
) -> Outcome {
    let chain = read_chain(chain)?;
    let labels = chain.fired_labels().join(", ");
    let mut session = new_session(chain, criterion).map_err(anyhow::Error::from)?;
    let mut decisions = Vec::new();
    let mut last = None;
    for path in reports {
        let report: MetricsReport = read_json(path)?;
        let d = submit_metrics(&mut session, report.clone())
            .with_context(|| format!("report {} rejected", path.display()))?;
        decisions.push(d);
        last = Some(report);
    }
    let baselines: Option<Vec<MetricsReport>> = baselines.map(read_json).transpose()?;
    let ranking = match (&last, &baselines) {
        (Some(r), Some(b)) => Some(compare_baselines(r, b)),
        _ => None,
    };
    let exhausted = matches!(session.outcome(), Some(Decision::Exhausted { .. }));
    match f {
        Format::Json => print_json(
            out,
            &EvaluationOutput {
                criterion: criterion.to_string(),
                decisions: &decisions,
                outcome: session.outcome(),
                candidates: session.candidates(),
                ranking: ranking.as_ref(),
            },
        )?,
        Format::Text => {
            for (i, d) in decisions.iter().enumerate() {
                match &ranking {
                    Some(r) if i + 1 == decisions.len() => {
                        writeln!(out, "{d}; rank {} of {}", r.submitted_rank(), r.entries.len())
                    }
                    _ => writeln!(out, "{d}"),
                }
                .map_err(io_err)?;
            }
            if exhausted {
                writeln!(out, "every candidate failed {criterion}").map_err(io_err)?;
                writeln!(out, "labels: {labels}").map_err(io_err)?;
            }
            if let Some(r) = &ranking {
                for e in &r.entries {
                    let delta = if e.submitted { String::new() } else { format!("  delta_f1={:+.3}", e.delta_f1) };
                    writeln!(
                        out,
                        "{:>3} {:<22} f1={:.3} mcc={:.3} bacc={:.3}{delta}",
                        e.rank, e.technique, e.f1, e.mcc, e.bacc
                    )
                    .map_err(io_err)?;
                }
            }
        }
    }
    Ok(if exhausted { EXIT_NEGATIVE } else { EXIT_OK })
}

fn write_recommendation(out: &mut dyn Write, tag: &str, r: &Recommendation) -> Result<(), Failure> {
    match r {
        Recommendation::Chain(c) => writeln!(out, "{tag}: {}: {}", c.category, c.render()),
        Recommendation::NoRecommendation(n) => writeln!(out, "{tag}: {}: {}", n.reason, n.detail),
    }
    .map_err(io_err)
}

fn adapt(assumptions: &Path, delta: &Path, f: Format, out: &mut dyn Write) -> Outcome {
    let kb = load_knowledge_base().map_err(anyhow::Error::from)?;
    let a: ModelingAssumptions = read_json(assumptions)?;
    a.validate().with_context(|| format!("{} is not valid", assumptions.display()))?;
    let d = read_json(delta)?;
    let report: AdaptationReport = reselect(&kb, &a, &d).map_err(anyhow::Error::from)?;
    match f {
        Format::Json => print_json(out, &report)?,
        Format::Text => {
            write_recommendation(out, "old", &report.old)?;
            write_recommendation(out, "new", &report.new)?;
            for c in &report.assumption_diff {
                writeln!(out, "changed {}: {} -> {}", c.field, c.old, c.new).map_err(io_err)?;
            }
            let changed = report.changed_constraints.join(", ");
            writeln!(out, "labels: {}", if changed.is_empty() { "none" } else { &changed }).map_err(io_err)?;
            for s in &report.feature_diff.selected {
                writeln!(out, "+ {s}").map_err(io_err)?;
            }
            for s in &report.feature_diff.deselected {
                writeln!(out, "- {s}").map_err(io_err)?;
            }
            if report.chains_identical() {
                writeln!(out, "chain unchanged").map_err(io_err)?;
            }
        }
    }
    Ok(if report.new.chain().is_some() { EXIT_OK } else { EXIT_NEGATIVE })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (u8, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(std::iter::once("varsel").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(call(&[]).0, EXIT_INPUT);
        let (code, _, err) = call(&["recommend", "--samples", "10", "--predict", "numbers"]);
        assert_eq!(code, EXIT_INPUT);
        assert!(err.contains("numbers"));
        assert_eq!(call(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn case_study_chain() {
        let (code, out, _) = call(&["recommend", "--samples", "299", "--features", "13", "--predict", "category", "--labeled"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.starts_with("Classification: LinearSVC -> KNeighborsClassifier -> SVC|EnsembleClassifiers\n"));
        assert!(out.contains("labels: C2.2, C5.1, C5.3, C5.4"));
    }

    #[test]
    fn too_few_samples() {
        let (code, out, _) = call(&["recommend", "--samples", "40", "--predict", "category", "--labeled"]);
        assert_eq!(code, EXIT_NEGATIVE);
        assert!(out.starts_with("more data needed\n"));
        assert!(out.contains("labels: C2.1, C2.2, C2.3, C2.4"));
    }

    #[test]
    fn builtin_kb_validates() {
        let (code, out, _) = call(&["validate"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("ok   acyclic"));
    }

    #[test]
    fn configuration_round_trips_into_dot() {
        let (code, out, _) = call(&[
            "recommend", "--samples", "299", "--predict", "category", "--labeled", "--configure", "LinearSVC", "--format", "json",
        ]);
        assert_eq!(code, EXIT_OK);
        let file: ConfigFile = serde_json::from_str(&out).unwrap();
        assert!(file.selected.iter().any(|s| s == "LinearSVC"));
        assert!(!file.selected.iter().any(|s| s == "NotWorking"));
    }
}
