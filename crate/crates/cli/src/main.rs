use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use consentry_core::policy::Severity;
use consentry_core::repository::{load_repository, save_repository, RepoFileError};
use consentry_core::rules::ruleset_warnings;
use consentry_core::{
    base_schema, check_coupling, evaluate, generate_form, parse_data_request, parse_policy,
    parse_ruleset, preset, render_policy_english, validate_policy, Action, DataSchema, ParseError,
    Preset, PrivacyPolicy, Repository, RuleSet, ValidationIssue,
};
use consentry_proxy::Config;

#[derive(Parser)]
#[command(name = "consentry", version, about = "Privacy disclosure checking agent")]
struct Cli {
    /// Extra data schema (PDS) to load; repeatable.
    #[arg(long = "schema", global = true, value_name = "PDS")]
    schemas: Vec<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a policy, ruleset or data request.
    Validate { file: PathBuf },
    /// Print a policy in plain English.
    Render { file: PathBuf },
    /// Evaluate a policy against a ruleset.
    Eval {
        #[arg(long)]
        policy: PathBuf,
        /// APR file or `preset:NAME`.
        #[arg(long)]
        ruleset: String,
        /// Exit with status 2 when the decision is block.
        #[arg(long)]
        fail_on_block: bool,
    },
    /// Manage the personal data repository.
    Repo {
        #[arg(long, value_name = "PRF")]
        repo: PathBuf,
        #[command(subcommand)]
        op: RepoOp,
    },
    /// Check a data request against a policy, or build the annotated form.
    Form {
        #[command(subcommand)]
        op: FormOp,
    },
    /// Canned rulesets.
    Preset {
        #[command(subcommand)]
        op: PresetOp,
    },
    /// Run the proxy and control API until interrupted.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum RepoOp {
    Set { path: String, value: String },
    Get { path: String },
    List,
    Delete { path: String },
}

#[derive(Subcommand)]
enum FormOp {
    Check {
        #[arg(long)]
        request: PathBuf,
        #[arg(long)]
        policy: PathBuf,
    },
    Fill {
        #[arg(long)]
        request: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, value_name = "PRF")]
        repo: Option<PathBuf>,
        /// Origin recorded in the form; defaults to the policy's entity URI.
        #[arg(long)]
        site: Option<String>,
    },
}

#[derive(Subcommand)]
enum PresetOp {
    Export {
        name: String,
        /// Write here instead of standard output.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    List,
}

/// A failure and its exit status.
enum Failure {
    /// Bad document: exit 1.
    Invalid(String),
    /// Unreadable file, bad configuration: exit 3.
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Invalid(m) | Failure::Io(m) => m,
        }
    }
}

type Result<T> = std::result::Result<T, Failure>;

fn name(path: &Path) -> String {
    if path == Path::new("-") {
        "<stdin>".into()
    } else {
        path.display().to_string()
    }
}

fn read(path: &Path) -> Result<String> {
    let mut text = String::new();
    let res = if path == Path::new("-") {
        std::io::stdin().read_to_string(&mut text).map(|_| ())
    } else {
        std::fs::read_to_string(path).map(|t| text = t)
    };
    res.map_err(|e| Failure::Io(format!("{}: {e}", name(path))))?;
    Ok(text)
}

fn parse_failed(path: &Path, e: ParseError) -> Failure {
    Failure::Invalid(format!("{}:{}:{}: {}", name(path), e.line, e.column, e.message))
}

fn load_schema(extra: &[PathBuf]) -> Result<DataSchema> {
    let mut schema = base_schema();
    for path in extra {
        schema = schema
            .load_extension(&read(path)?)
            .map_err(|e| Failure::Invalid(format!("{}: {e}", name(path))))?;
    }
    Ok(schema)
}

fn load_policy(path: &Path, schema: &DataSchema) -> Result<PrivacyPolicy> {
    parse_policy(&read(path)?, schema).map_err(|e| parse_failed(path, e))
}

fn load_rules(source: &str) -> Result<RuleSet> {
    if let Some(n) = source.strip_prefix("preset:") {
        return preset(n).map_err(|e| Failure::Io(e.to_string()));
    }
    let path = Path::new(source);
    parse_ruleset(&read(path)?).map_err(|e| parse_failed(path, e))
}

fn open_repo(path: &Path, schema: &DataSchema) -> Result<Repository> {
    if !path.exists() {
        return Ok(Repository::new());
    }
    load_repository(path, schema).map_err(|e| match e {
        RepoFileError::Io { .. } => Failure::Io(e.to_string()),
        RepoFileError::Parse { path, source } => {
            Failure::Invalid(format!("{path}:{}:{}: {}", source.line, source.column, source.message))
        }
    })
}

fn print_issues(issues: &[ValidationIssue]) -> Result<()> {
    for i in issues {
        println!("{i}");
    }
    let errors = issues.iter().filter(|i| i.severity == Severity::Error).count();
    if errors > 0 {
        return Err(Failure::Invalid(format!("{errors} validation error(s)")));
    }
    Ok(())
}

/// First word of the document, for inputs without a telling extension.
fn sniff(text: &str) -> Option<&str> {
    text.lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))?
        .split(|c: char| c.is_whitespace() || c == '{')
        .next()
}

fn validate(file: &Path, schema: &DataSchema) -> Result<()> {
    let text = read(file)?;
    let kind = match file.extension().and_then(|e| e.to_str()) {
        Some(ext @ ("ppf" | "apr" | "pdr")) => ext,
        _ => match sniff(&text) {
            Some("policy") => "ppf",
            Some("ruleset") => "apr",
            Some("data-request") => "pdr",
            _ => {
                return Err(Failure::Invalid(format!(
                    "{}: not a policy, ruleset or data request",
                    name(file)
                )))
            }
        },
    };
    match kind {
        "ppf" => {
            let policy = parse_policy(&text, schema).map_err(|e| parse_failed(file, e))?;
            print_issues(&validate_policy(&policy, schema))?;
        }
        "apr" => {
            let rules = parse_ruleset(&text).map_err(|e| parse_failed(file, e))?;
            print_issues(&ruleset_warnings(&rules, schema))?;
        }
        _ => {
            parse_data_request(&text, schema).map_err(|e| parse_failed(file, e))?;
        }
    }
    println!("ok");
    Ok(())
}

fn repo(path: &Path, op: RepoOp, schema: &DataSchema) -> Result<()> {
    let mut repo = open_repo(path, schema)?;
    let invalid = |e: consentry_core::repository::RepoError| Failure::Invalid(e.to_string());
    let save = |repo: &Repository| save_repository(repo, path).map_err(|e| Failure::Io(e.to_string()));
    match op {
        RepoOp::Set { path: p, value } => {
            repo.set(schema, &p, &value).map_err(invalid)?;
            save(&repo)?;
        }
        RepoOp::Get { path: p } => match repo.get(schema, &p).map_err(invalid)? {
            Some(v) => println!("{v}"),
            None => return Err(Failure::Invalid(format!("{p}: no value stored"))),
        },
        RepoOp::List => print!("{}", repo.to_text()),
        RepoOp::Delete { path: p } => {
            if repo.delete(schema, &p).map_err(invalid)?.is_none() {
                return Err(Failure::Invalid(format!("{p}: no value stored")));
            }
            save(&repo)?;
        }
    }
    Ok(())
}

fn form(op: FormOp, schema: &DataSchema) -> Result<()> {
    match op {
        FormOp::Check { request, policy } => {
            let req = parse_data_request(&read(&request)?, schema).map_err(|e| parse_failed(&request, e))?;
            let pol = load_policy(&policy, schema)?;
            print!("{}", check_coupling(&req, &pol, schema).to_text());
        }
        FormOp::Fill { request, policy, repo, site } => {
            let req = parse_data_request(&read(&request)?, schema).map_err(|e| parse_failed(&request, e))?;
            let pol = load_policy(&policy, schema)?;
            let repo = match repo {
                Some(p) => open_repo(&p, schema)?,
                None => Repository::new(),
            };
            let site = site.unwrap_or_else(|| pol.entity_uri.clone());
            let form = generate_form(&req, &pol, &repo, schema, &site)
                .map_err(|e| Failure::Invalid(e.to_string()))?;
            print!("{}", form.to_text());
        }
    }
    Ok(())
}

fn serve(config: Option<PathBuf>, schemas: Vec<PathBuf>) -> Result<()> {
    let mut config = match config {
        Some(p) => Config::load(&p).map_err(|e| Failure::Io(e.to_string()))?,
        None => Config::default(),
    };
    config.schemas.extend(schemas);
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::Io(e.to_string()))?;
    rt.block_on(consentry_proxy::run(config))
        .map_err(|e| Failure::Io(e.to_string()))
}

fn run(cli: Cli) -> Result<u8> {
    if let Command::Serve { config } = cli.command {
        serve(config, cli.schemas)?;
        return Ok(0);
    }
    let schema = load_schema(&cli.schemas)?;
    match cli.command {
        Command::Validate { file } => validate(&file, &schema)?,
        Command::Render { file } => print!("{}", render_policy_english(&load_policy(&file, &schema)?)),
        Command::Eval { policy, ruleset, fail_on_block } => {
            let policy = load_policy(&policy, &schema)?;
            let decision = evaluate(&policy, &load_rules(&ruleset)?, &schema);
            print!("{}", decision.to_text());
            if fail_on_block && decision.action == Action::Block {
                return Ok(2);
            }
        }
        Command::Repo { repo: path, op } => repo(&path, op, &schema)?,
        Command::Form { op } => form(op, &schema)?,
        Command::Preset { op: PresetOp::List } => {
            for p in Preset::ALL {
                println!("{}", p.name());
            }
        }
        Command::Preset { op: PresetOp::Export { name, output } } => {
            let p: Preset = name.parse().map_err(|e: consentry_core::rules::UnknownPreset| Failure::Io(e.to_string()))?;
            match output {
                Some(path) => std::fs::write(&path, p.source())
                    .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?,
                None => print!("{}", p.source()),
            }
        }
        Command::Serve { .. } => unreachable!("handled above"),
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("consentry: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
