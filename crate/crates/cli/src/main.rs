use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gkm_cli::config::{parse_characters, Command, Format, RunConfig};
use gkm_cli::golden::{self, Status, Tier};
use gkm_cli::{configure_workers, output, sheaf_file, CliError, EXIT_FAILURE};
use gkm_core::pipeline::{table_row, CSelector};

#[derive(Parser)]
#[command(name = "gkm", version, about = "Equivariant cohomology of GKM sheaves and representation varieties")]
struct Cli {
    /// Worker threads (GKM_WORKERS overrides)
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute one table row
    Compute {
        #[arg(long)]
        group: String,
        #[arg(long, default_value_t = 1)]
        g: usize,
        /// `regular` or a central element label such as `identity`
        #[arg(long, default_value = "regular")]
        c: String,
        /// `reps`, `all`, or signs such as `1,-1`
        #[arg(long, default_value = "reps")]
        chars: String,
        #[arg(long)]
        truncation: Option<u32>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare computed rows against a golden table file
    Verify {
        golden: PathBuf,
        /// Tiers to run; extended rows are skipped unless listed
        #[arg(long, value_enum, default_values_t = vec![Tier::Mandatory])]
        tier: Vec<Tier>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Global sections of a sheaf described in JSON
    Sheaf {
        descriptor: PathBuf,
        #[arg(long)]
        truncation: Option<u32>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

fn compute(cfg: RunConfig) -> Result<(), CliError> {
    cfg.validate()?;
    let row = table_row(&cfg.request()).map_err(|e| CliError::failure(e.to_string()))?;
    let text = match cfg.format {
        Format::Json => output::to_json(&row)?,
        Format::Text => row.render_text(),
    };
    output::emit(&text, cfg.output.as_deref())
}

fn verify(path: PathBuf, tiers: Vec<Tier>, format: Format) -> Result<(), CliError> {
    let file = golden::load(&path)?;
    let reports = golden::verify(&file, &tiers)?;
    let text = match format {
        Format::Json => output::to_json(&reports)?,
        Format::Text => golden::render(&reports),
    };
    output::emit(&text, None)?;
    let bad = reports.iter().filter(|r| r.status == Status::Mismatch).count();
    if bad > 0 {
        return Err(CliError::failure(format!("{bad} row(s) mismatched")));
    }
    Ok(())
}

fn sheaf(path: PathBuf, truncation: Option<u32>, format: Format) -> Result<(), CliError> {
    let desc = sheaf_file::load(&path)?;
    let report = sheaf_file::run(&desc, truncation)?;
    let text = match format {
        Format::Json => output::to_json(&report)?,
        Format::Text => format!(
            "numerator: {}  (D {}, stable {})\ngenerator degrees: {:?}\nverdict: {}\n",
            gkm_core::series::int::render(&report.numerator.coefficients),
            report.numerator.truncation,
            report.numerator.stable,
            report.generator_degrees,
            if report.certificate.is_free() {
                "free"
            } else if report.certificate.is_not_free() {
                "not free"
            } else {
                "inconclusive"
            }
        ),
    };
    output::emit(&text, None)
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_workers(cli.workers)?;
    match cli.command {
        Cmd::Compute { group, g, c, chars, truncation, format, output } => compute(RunConfig {
            command: Command::Compute,
            group,
            g,
            c: CSelector::parse(&c),
            characters: parse_characters(&chars)?,
            truncation,
            workers: cli.workers,
            format,
            output,
        }),
        Cmd::Verify { golden, tier, format } => verify(golden, tier, format),
        Cmd::Sheaf { descriptor, truncation, format } => sheaf(descriptor, truncation, format),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gkm: {e}");
            ExitCode::from(if e.code == 0 { EXIT_FAILURE } else { e.code })
        }
    }
}
