use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cfwalker::claims::{self, ClaimReport, RunOptions, Transform};
use cfwalker::config::Config;
use cfwalker::Error;

#[derive(Parser)]
#[command(
    name = "cfwalker",
    version,
    about = "Curvature, holonomy and Killing checks for Walker metrics"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Pointwise curvature checks for one family (families 1-4 by default).
    Verify(Common),
    /// Curvature span and holonomy label of one family.
    Holonomy(Common),
    /// Run registered claims and print a report.
    Claims {
        #[command(flatten)]
        common: Common,
        /// Comma-separated claim ids; an empty list runs nothing.
        #[arg(long)]
        claims: Option<String>,
        #[arg(long)]
        timings: bool,
        /// List claim ids and exit.
        #[arg(long)]
        list: bool,
    },
    /// Coordinate transform checks: gt, gauge or rotation.
    Transform {
        kind: String,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    family: Option<String>,
    /// Comma-separated fiber dimensions.
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Also write the JSON-lines report to this file.
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
}

const VERIFY_CLAIMS: [&str; 8] = [
    "closed_forms",
    "frame_formulas",
    "lemma1",
    "ricci_f1",
    "ricci_f2",
    "scalar_f2",
    "scalar_f34",
    "weyl_zero",
];

impl Common {
    fn config(&self) -> Result<Config, Error> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
                    line: 0,
                    msg: format!("{}: {e}", path.display()),
                })?;
                Config::parse(&text)?
            }
            None => Config::default(),
        };
        // command-line flags win over the file
        let flags = [
            ("family", self.family.clone()),
            ("n", self.n.clone()),
            ("seed", self.seed.map(|v| v.to_string())),
            ("samples", self.samples.map(|v| v.to_string())),
            ("order", self.order.map(|v| v.to_string())),
            ("tol", self.tol.map(|v| v.to_string())),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(0, key, &v)?;
            }
        }
        Ok(cfg)
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|e| Error::Config {
        line: 0,
        msg: format!("{}: {e}", path.display()),
    })
}

fn emit(report: &ClaimReport, json: Option<&Path>) -> Result<(), Error> {
    print!("{}", report.table());
    if let Some(path) = json {
        write_file(path, &report.to_json_lines())?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.cmd {
        Cmd::Verify(common) => {
            let mut cfg = common.config()?;
            if cfg.claims.is_none() {
                cfg.claims = Some(VERIFY_CLAIMS.iter().map(|s| s.to_string()).collect());
            }
            let report = claims::run_claims(&cfg, RunOptions::default())?;
            emit(&report, common.json.as_deref())?;
            Ok(report.exit_code() as u8)
        }
        Cmd::Holonomy(common) => {
            let cfg = common.config()?;
            let s = claims::holonomy_summary(&cfg)?;
            println!("family              {} (n = {})", s.family, s.n);
            println!("span / closed dim   {} / {}", s.span_dim, s.closed_dim);
            println!("null line           {}", s.preserves_null_line);
            println!("nondegenerate split {}", s.preserves_nondeg_subspace);
            println!("fiber rotations     {}", s.fiber_rotation_dim);
            println!("holonomy            {}", s.label);
            if let Some(path) = &common.json {
                let line = serde_json::to_string(&s).expect("plain struct serializes");
                write_file(path, &(line + "\n"))?;
            }
            Ok(0)
        }
        Cmd::Claims {
            common,
            claims: selection,
            timings,
            list,
        } => {
            if list {
                for id in claims::claim_ids() {
                    println!("{id}");
                }
                return Ok(0);
            }
            let mut cfg = common.config()?;
            if let Some(sel) = selection {
                cfg.set(0, "claims", &sel)?;
            }
            let report = claims::run_claims(&cfg, RunOptions { timings })?;
            emit(&report, common.json.as_deref())?;
            Ok(report.exit_code() as u8)
        }
        Cmd::Transform { kind, common } => {
            let kind: Transform = kind.parse()?;
            let cfg = common.config()?;
            let r = claims::transform_check(kind, &cfg)?;
            let report = ClaimReport {
                seed: cfg.seed,
                results: vec![r],
                skipped: vec![],
            };
            emit(&report, common.json.as_deref())?;
            Ok(report.exit_code() as u8)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(
            e @ (Error::Config { .. }
            | Error::InvalidParameter(_)
            | Error::FamilyConstraint(_)
            | Error::NotWalker(_)
            | Error::NonzeroLambda(_)
            | Error::FiberDependsOnU(_)
            | Error::GaugeDependsOnV),
        ) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
