use clap::{Parser, Subcommand, ValueEnum};
use monotony_core::funcs::by_name;
use monotony_core::pipeline::{run_check, run_reliability, CheckConfig};
use monotony_core::report::{AttackDoc, ReliabilityDoc, RolesDoc};
use monotony_core::{
    parse_protocol, role_spec, search_disclosure, AttackStatus, CheckError, InterpFn, Protocol,
    SearchBounds, Verdict,
};
use serde::Serialize;
use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_ERROR: u8 = 2;

#[derive(Parser)]
#[command(name = "monotony", version, about = "Symbolic secrecy checking by monotonic interpretation functions")]
struct Cli {
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
    /// Worker threads for the parallel checks.
    #[arg(long, env = "MONOTONY_WORKERS", global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(clap::Args)]
struct SearchArgs {
    /// Maximum number of role instances.
    #[arg(long, default_value_t = 2)]
    sessions: usize,
    /// Depth of intruder-built terms.
    #[arg(long, default_value_t = 3)]
    search_depth: usize,
    /// Longest trace explored.
    #[arg(long, default_value_t = 16)]
    max_steps: usize,
}

impl SearchArgs {
    fn bounds(&self) -> SearchBounds {
        SearchBounds {
            max_sessions: self.sessions,
            max_depth: self.search_depth,
            max_steps: self.max_steps,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print the generalized roles of a protocol.
    Roles { file: PathBuf },
    /// Full secrecy check: reliability, increasing check and attack search.
    Check {
        file: PathBuf,
        #[arg(long, default_value = "dek")]
        function: String,
        /// Depth of the substitution universe.
        #[arg(long, default_value_t = 2)]
        depth: usize,
        #[command(flatten)]
        search: SearchArgs,
        /// Skip the attack search.
        #[arg(long)]
        no_search: bool,
        /// Secrets to search for (default: fresh atoms the intruder is not entitled to).
        #[arg(long = "secret")]
        secrets: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Bounded search for a trace disclosing a secret.
    Attack {
        file: PathBuf,
        #[arg(long)]
        secret: String,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Well-formedness and full invariance of an interpretation function.
    Reliability {
        file: PathBuf,
        #[arg(long, default_value = "dek")]
        function: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug)]
enum Failure {
    Io(PathBuf, std::io::Error),
    Parse(PathBuf, monotony_core::ParseError),
    UnknownFunction(String),
    Check(CheckError),
}

impl Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Io(p, e) => write!(f, "{}: {e}", p.display()),
            Failure::Parse(p, e) => write!(f, "{}:{e}", p.display()),
            Failure::UnknownFunction(n) => write!(f, "unknown function `{n}` (expected dek or dek-hat)"),
            Failure::Check(e) => write!(f, "{e}"),
        }
    }
}

impl From<CheckError> for Failure {
    fn from(e: CheckError) -> Self {
        Failure::Check(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Check(CheckError::Contradiction(_)) => 3,
            _ => EXIT_ERROR,
        }
    }
}

fn load(path: &Path) -> Result<Protocol, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Io(path.to_path_buf(), e))?;
    parse_protocol(&text).map_err(|e| Failure::Parse(path.to_path_buf(), e))
}

fn function(name: &str) -> Result<Box<dyn InterpFn>, Failure> {
    by_name(name).ok_or_else(|| Failure::UnknownFunction(name.to_string()))
}

fn secret(p: &Protocol, name: &str) -> Result<monotony_core::Atom, Failure> {
    p.atom(name)
        .ok_or_else(|| CheckError::UnknownSecret(name.to_string()).into())
}

fn emit<T: Serialize + Display>(format: Format, doc: &T) {
    let text = match format {
        Format::Text => doc.to_string(),
        Format::Json => serde_json::to_string_pretty(doc).expect("serializable report") + "\n",
    };
    // A closed pipe on stdout is not an error for us.
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    match &cli.command {
        Command::Roles { file } => {
            let p = load(file)?;
            emit(cli.format, &RolesDoc::from(&role_spec(&p)));
            Ok(0)
        }
        Command::Check {
            file,
            function: name,
            depth,
            search,
            no_search,
            secrets,
            seed,
        } => {
            let f = function(name)?;
            let p = load(file)?;
            let secrets = if secrets.is_empty() {
                None
            } else {
                Some(secrets.iter().map(|s| secret(&p, s)).collect::<Result<_, _>>()?)
            };
            let cfg = CheckConfig {
                depth: *depth,
                search: (!no_search).then(|| search.bounds()),
                secrets,
                seed: *seed,
            };
            let out = run_check(&p, &*f, &cfg)?;
            emit(cli.format, &out.doc());
            Ok(match out.verdict {
                Verdict::CertifiedAtBound => 0,
                Verdict::Inconclusive | Verdict::Disclosure => 1,
            })
        }
        Command::Attack {
            file,
            secret: name,
            search,
        } => {
            let p = load(file)?;
            let s = secret(&p, name)?;
            let r = search_disclosure(&p.context, &role_spec(&p), &s, search.bounds())?;
            emit(cli.format, &AttackDoc::from(&r));
            Ok(match r.status {
                AttackStatus::NoAttackAtBound => 0,
                AttackStatus::Disclosure => 4,
            })
        }
        Command::Reliability {
            file,
            function: name,
            seed,
        } => {
            let f = function(name)?;
            let p = load(file)?;
            let r = run_reliability(&p, &*f, *seed)?;
            emit(cli.format, &ReliabilityDoc::from(&r));
            Ok(if r.passed() { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers.filter(|&n| n > 0) {
        // Only fails if a global pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
