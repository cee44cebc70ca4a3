use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use surriga::problems::{flags_field, run_study, study_matrices};
use surriga::Error;

mod config;

use config::{parse_assignment, parse_text, resolve, ConfigError, Location, RunConfig, Setting, THREADS_ENV};

const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "surriga", version, about = "Standard and surrogate isogeometric assembly studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the study described by a config file and write its CSV tables.
    Run(StudyArgs),
    /// Write the standard and surrogate matrices of every ladder level as MatrixMarket files.
    Assemble(StudyArgs),
    /// Merge the CSV tables found below a directory.
    Report {
        dir: PathBuf,
        /// Output directory of the merged tables (defaults to `dir/report`).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct StudyArgs {
    /// Config file with `key = value` lines; `-` for none.
    config: PathBuf,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    geometry: Option<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    q: Option<String>,
    #[arg(long)]
    mode: Option<String>,
    /// Fixed sampling distance.
    #[arg(long = "M", short = 'M')]
    m: Option<String>,
    /// Comma separated spans per direction.
    #[arg(long)]
    ladder: Option<String>,
    #[arg(long)]
    threads: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(short, long)]
    output: Option<String>,
    /// Any config key, as `key=value`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

enum Failure {
    Config(ConfigError),
    Run(Error),
    Other(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Other(format!("{}: {e}", path.display()))
}

impl StudyArgs {
    fn settings(&self) -> Result<Vec<Setting>, Failure> {
        let mut out = if self.config.as_os_str() == "-" {
            Vec::new()
        } else {
            let text = fs::read_to_string(&self.config).map_err(io(&self.config))?;
            parse_text(&text, &self.config.display().to_string())?
        };
        let flags = [
            ("problem", &self.problem),
            ("geometry", &self.geometry),
            ("p", &self.p),
            ("q", &self.q),
            ("mode", &self.mode),
            ("M", &self.m),
            ("ladder", &self.ladder),
            ("threads", &self.threads),
            ("seed", &self.seed),
            ("output", &self.output),
        ];
        for (key, v) in flags {
            if let Some(v) = v {
                out.push(Setting { key: key.into(), value: v.clone(), location: Location::Flag(format!("--{key}")) });
            }
        }
        for s in &self.set {
            out.push(parse_assignment(s, Location::Flag(format!("--set {s}")))?);
        }
        Ok(out)
    }

    fn resolve(&self) -> Result<RunConfig, Failure> {
        let env = std::env::var(THREADS_ENV).ok();
        Ok(resolve(&self.settings()?, env.as_deref())?)
    }
}

fn prepare_output(cfg: &RunConfig) -> Result<(), Failure> {
    fs::create_dir_all(&cfg.output).map_err(io(&cfg.output))?;
    let echo = cfg.output.join("config.txt");
    fs::write(&echo, cfg.to_text()).map_err(io(&echo))?;
    Ok(())
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T, Failure> + Send) -> Result<T, Failure> {
    match threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Failure::Other(format!("thread pool: {e}")))?
            .install(f),
        None => f(),
    }
}

fn cmd_run(args: &StudyArgs) -> Result<(), Failure> {
    let cfg = args.resolve()?;
    prepare_output(&cfg)?;
    let out = with_threads(cfg.study.threads, || Ok(run_study(&cfg.study)?))?;
    for t in &out.tables {
        let path = t.write_to(&cfg.output)?;
        println!("{} ({} rows)", path.display(), t.lines.len());
    }
    for r in out.rows.iter().filter(|r| !r.flags.is_empty()) {
        eprintln!("N = {}: {}", r.n_dofs, r.flags.join(", "));
    }
    Ok(())
}

fn cmd_assemble(args: &StudyArgs) -> Result<(), Failure> {
    let cfg = args.resolve()?;
    prepare_output(&cfg)?;
    let mut summary = String::from("level,matrix,");
    summary.push_str(surriga::surrogate::AssemblyReport::CSV_HEADER);
    summary.push_str(",flags\n");
    for &spans in &cfg.study.ladder {
        let mats = with_threads(cfg.study.threads, || Ok(study_matrices(&cfg.study, spans)?))?;
        for m in mats {
            let path = cfg.output.join(format!("s{spans}_{}.mtx", m.name));
            let mut buf = Vec::new();
            m.matrix.write_matrix_market(&mut buf, m.matrix.is_symmetric_exact())?;
            fs::write(&path, buf).map_err(io(&path))?;
            summary.push_str(&format!("{spans},{},{},{}\n", m.name, m.report.csv_row(), flags_field(&m.report.flags)));
            println!("{}", path.display());
        }
    }
    let path = cfg.output.join("assembly.csv");
    fs::write(&path, summary).map_err(io(&path))?;
    Ok(())
}

fn csv_files(dir: &Path, skip: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<Result<_, _>>()?;
    entries.sort_by_key(|e| e.path());
    for e in entries {
        let path = e.path();
        if path.is_dir() {
            csv_files(&path, skip, out)?;
        } else if path.extension().is_some_and(|x| x == "csv") && path.parent() != Some(skip) {
            out.push(path);
        }
    }
    Ok(())
}

/// Concatenate tables of the same name, prefixing every row with the
/// directory it came from.
fn cmd_report(dir: &Path, output: Option<&Path>) -> Result<(), Failure> {
    let target = output.map_or_else(|| dir.join("report"), Path::to_path_buf);
    let mut files = Vec::new();
    csv_files(dir, &target, &mut files).map_err(io(dir))?;
    if files.is_empty() {
        return Err(Failure::Config(ConfigError { location: None, msg: format!("no CSV files below {}", dir.display()) }));
    }
    let mut merged: BTreeMap<String, (String, String)> = BTreeMap::new();
    for f in &files {
        let text = fs::read_to_string(f).map_err(io(f))?;
        let mut lines = text.lines();
        let Some(header) = lines.next() else { continue };
        let name = f.file_name().expect("file").to_string_lossy().into_owned();
        let source = f.parent().and_then(|p| p.strip_prefix(dir).ok()).map(|p| p.display().to_string()).unwrap_or_default();
        let source = if source.is_empty() { ".".to_string() } else { source };
        let entry = merged.entry(name.clone()).or_insert_with(|| (header.to_string(), format!("source,{header}\n")));
        if entry.0 != header {
            return Err(Failure::Config(ConfigError {
                location: None,
                msg: format!("{}: header differs from other `{name}` tables", f.display()),
            }));
        }
        for l in lines.filter(|l| !l.is_empty()) {
            entry.1.push_str(&format!("{source},{l}\n"));
        }
    }
    fs::create_dir_all(&target).map_err(io(&target))?;
    for (name, (_, body)) in merged {
        let path = target.join(&name);
        fs::write(&path, body).map_err(io(&path))?;
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Assemble(a) => cmd_assemble(a),
        Command::Report { dir, output } => cmd_report(dir, output.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            match e {
                Error::Io(_) => ExitCode::FAILURE,
                Error::SingularJacobian { .. } => ExitCode::from(EXIT_NUMERICAL),
                e if e.is_validation() => ExitCode::from(EXIT_VALIDATION),
                _ => ExitCode::from(EXIT_NUMERICAL),
            }
        }
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
