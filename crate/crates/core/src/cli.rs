//! Command-line front end: `solve`, `convergence` and `compare`.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 blow-up,
//! 4 acceptance band failure. A study in which some runs blew up still
//! writes its CSV and exits with 3.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::experiments::reference::write_snapshot;
use crate::experiments::{
    presets, run_study, self_test_study, summarize, write_csv, Problem, RunOptions, SnapshotMeta,
    StudyOutcome, StudySpec,
};
use crate::integrators::{evolve, initial_field, Scheme, SchemeConfig, DEFAULT_FS_OVERSAMPLE};
use crate::spectral::{idft, PeriodicGrid};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BLOW_UP: i32 = 3;
pub const EXIT_BAND_FAILURE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "ewi-nls", version, about = "Exponential wave integrators for the periodic 1D NLSE")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evolve one problem with one scheme and write the final field.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run a convergence study and check its order bands.
    Convergence(StudyArgs),
    /// Run several schemes on one study and compare them.
    Compare(StudyArgs),
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[arg(long, conflicts_with_all = ["preset", "self_test"])]
    pub config: Option<PathBuf>,
    #[arg(long, conflicts_with = "self_test")]
    pub preset: Option<String>,
    /// Fit synthetic geometric data instead of running a study.
    #[arg(long)]
    pub self_test: bool,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads, or `auto` for one per core.
    #[arg(long, default_value = "auto")]
    pub threads: Threads,
    /// Directory for cached reference solutions.
    #[arg(long)]
    pub cache: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Threads {
    Auto,
    Count(usize),
}

impl FromStr for Threads {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "auto" {
            return Ok(Threads::Auto);
        }
        match s.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Threads::Count(n)),
            _ => Err(format!("expected a positive integer or `auto`, got `{s}`")),
        }
    }
}

/// Configuration of the `solve` command.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub scheme: Scheme,
    pub tau: f64,
    /// Number of grid points; give this or `h`.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default = "default_oversample")]
    pub fs_oversample: usize,
    pub problem: Problem,
}

fn default_oversample() -> usize {
    DEFAULT_FS_OVERSAMPLE
}

impl SolveConfig {
    pub fn scheme_config(&self) -> Result<SchemeConfig> {
        let p = &self.problem;
        let grid = match (self.n, self.h) {
            (Some(n), None) => PeriodicGrid::new(p.a, p.b, n)?,
            (None, Some(h)) => PeriodicGrid::with_mesh_size(p.a, p.b, h)?,
            _ => return Err(Error::Config("give exactly one of `n` or `h`".into())),
        };
        p.potential.validate(p.a, p.b)?;
        p.nonlinearity.validate()?;
        let cfg = SchemeConfig::new(self.scheme, grid, self.tau, p.t_final)
            .with_potential(p.potential.clone())
            .with_nonlinearity(p.nonlinearity)
            .with_fs_oversample(self.fs_oversample);
        cfg.steps()?;
        Ok(cfg)
    }
}

fn read_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Domain(_) | Error::NotImplemented(_) => EXIT_CONFIG,
        Error::BlowUp { .. } => EXIT_BLOW_UP,
        _ => EXIT_IO,
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Solve { config, out } => cmd_solve(&config, &out),
        Command::Convergence(args) => cmd_studies(&args, false),
        Command::Compare(args) => cmd_studies(&args, true),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            match &e {
                Error::BlowUp { step } => eprintln!("error: solution blew up at step {step}"),
                other => eprintln!("error: {other}"),
            }
            exit_code(&e)
        }
    }
}

pub fn cmd_solve(config: &Path, out: &Path) -> Result<i32> {
    let sc: SolveConfig = read_config(config)?;
    let cfg = sc.scheme_config()?;
    let p = &sc.problem;
    let psi0 = initial_field(cfg.scheme, &cfg.grid, |x| p.datum.eval(x, p.a, p.b), cfg.fs_oversample)?;
    let mass0 = idft(&psi0).mass();
    let state = evolve(&cfg, &psi0)?;
    let nodal = idft(&state.field);
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let stem = cfg.scheme.name();
    let snapshot = out.join(format!("{stem}.ref"));
    write_snapshot(
        &snapshot,
        &state.field,
        &SnapshotMeta {
            t_final: cfg.t_final,
            scheme: cfg.scheme,
            tau: cfg.tau,
        },
    )?;
    let csv_path = out.join(format!("{stem}_nodal.csv"));
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(["x", "re", "im", "abs2"])?;
    for (j, v) in nodal.values().iter().enumerate() {
        w.write_record([
            format!("{:e}", cfg.grid.node(j)),
            format!("{:e}", v.re),
            format!("{:e}", v.im),
            format!("{:e}", v.norm_sqr()),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;
    println!("mass t=0: {mass0:.16e}");
    println!("mass t={}: {:.16e}", cfg.t_final, nodal.mass());
    println!("wrote {} and {}", snapshot.display(), csv_path.display());
    Ok(EXIT_OK)
}

fn load_studies(args: &StudyArgs) -> Result<Vec<StudySpec>> {
    match (&args.config, &args.preset) {
        (Some(path), None) => Ok(vec![read_config(path)?]),
        (None, Some(name)) => presets::preset(name),
        _ => Err(Error::Config("give one of --config, --preset or --self-test".into())),
    }
}

fn compare_table(outcome: &StudyOutcome, spec: &StudySpec) -> String {
    let mut out = String::new();
    for &norm in &spec.norms {
        out.push_str(&format!("  {norm}:"));
        for &scheme in &spec.schemes {
            if let Some(f) = outcome.fit(scheme, norm) {
                let order = f.fit.as_ref().map_or("-".to_string(), |x| format!("{:.3}", x.slope));
                out.push_str(&format!("  {} order {} finest {:.3e} ({})", scheme, order, f.finest_error, f.status));
            }
        }
        out.push('\n');
    }
    out
}

fn cmd_studies(args: &StudyArgs, compare: bool) -> Result<i32> {
    if args.self_test {
        let (spec, records) = self_test_study();
        let (fits, bands) = summarize(&spec, &records);
        let csv_path = args.out.join(format!("{}.csv", spec.label));
        write_csv(&csv_path, &spec, &records)?;
        let outcome = StudyOutcome {
            label: spec.label.clone(),
            records,
            fits,
            bands,
            csv_path: Some(csv_path),
        };
        print!("{}", outcome.summary());
        return Ok(if outcome.all_bands_pass() { EXIT_OK } else { EXIT_BAND_FAILURE });
    }
    let studies = load_studies(args)?;
    for spec in &studies {
        spec.validate()?;
        if compare && spec.schemes.len() < 2 {
            return Err(Error::Config(format!(
                "compare needs at least two schemes, study `{}` has {}",
                spec.label,
                spec.schemes.len()
            )));
        }
    }
    let opts = RunOptions {
        out_dir: Some(args.out.clone()),
        cache_dir: args.cache.clone(),
        threads: match args.threads {
            Threads::Auto => None,
            Threads::Count(n) => Some(n),
        },
        verify_reference: None,
    };
    let mut all_pass = true;
    let mut blown_up = false;
    for spec in &studies {
        let outcome = run_study(spec, &opts)?;
        print!("{}", outcome.summary());
        if compare {
            print!("{}", compare_table(&outcome, spec));
        }
        for r in outcome.records.iter().filter(|r| r.blown_up.is_some() && r.norm == spec.norms[0]) {
            blown_up = true;
            eprintln!(
                "error: {} {} at tau={:e} h={:e} blew up at step {}",
                spec.label,
                r.scheme,
                r.tau,
                r.h,
                r.blown_up.unwrap_or_default()
            );
        }
        all_pass &= outcome.all_bands_pass();
    }
    Ok(if blown_up {
        EXIT_BLOW_UP
    } else if all_pass {
        EXIT_OK
    } else {
        EXIT_BAND_FAILURE
    })
}
