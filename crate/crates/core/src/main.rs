use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use comove::data::io::{panel_to_json, write_daily, write_ticks};
use comove::pipeline::{self, Estimator, MissingPolicy, Mode, PipelineConfig, Session};
use comove::synth::{
    business_days, simulate_daily_closes, simulate_planted_panel, simulate_trading_days,
    synthetic_grid, DiffusionSpec,
};
use comove::{Error, Result};

#[derive(Parser)]
#[command(name = "comove", version, about = "Stock co-movement analytics on tick and daily data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a pipeline and write its artifacts.
    Run(RunArgs),
    /// Generate synthetic input data.
    #[command(subcommand)]
    Synth(SynthCommand),
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// intraday-ticks, intraday-binned or daily.
    #[arg(long)]
    mode: Option<String>,
    /// Bin width in seconds.
    #[arg(long)]
    bin_width: Option<u32>,
    /// Bin width in seconds for the map stage.
    #[arg(long)]
    map_bin_width: Option<u32>,
    /// Session as HH:MM-HH:MM (UTC).
    #[arg(long)]
    session: Option<String>,
    /// Window width in trading days.
    #[arg(long)]
    window: Option<usize>,
    /// Days between window starts.
    #[arg(long)]
    step: Option<usize>,
    /// hayashi-yoshida, realized, pearson-binned or pearson.
    #[arg(long)]
    estimator: Option<String>,
    /// Clip noise eigenvalues before building distances.
    #[arg(long)]
    clean: bool,
    /// Skip windows with missing data instead of dropping symbols.
    #[arg(long)]
    skip_window: bool,
    #[arg(long)]
    penalty: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Input files (tick CSV, panel JSON or daily CSV).
    inputs: Vec<PathBuf>,
}

#[derive(Subcommand)]
enum SynthCommand {
    /// Equicorrelated diffusions observed at Poisson times, as tick CSV.
    Ticks {
        #[arg(long, default_value_t = 10)]
        symbols: usize,
        #[arg(long, default_value_t = 5)]
        days: usize,
        #[arg(long, default_value_t = 0.3)]
        rho: f64,
        /// Trades per second per symbol.
        #[arg(long, default_value_t = 0.05)]
        rate: f64,
        #[arg(long, default_value = "10:00-16:00")]
        session: String,
        #[arg(long, default_value = "2011-03-01")]
        start_date: NaiveDate,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// One-factor daily closes, optionally switching correlation mid-sample.
    Daily {
        #[arg(long, default_value_t = 20)]
        symbols: usize,
        #[arg(long, default_value_t = 500)]
        days: usize,
        #[arg(long, default_value_t = 0.2)]
        rho: f64,
        /// Correlation after the switch day.
        #[arg(long)]
        rho_after: Option<f64>,
        /// Return index at which `rho_after` takes over (default: midpoint).
        #[arg(long)]
        switch_at: Option<usize>,
        #[arg(long, default_value_t = 0.01)]
        vol: f64,
        #[arg(long, default_value = "2007-01-01")]
        start_date: NaiveDate,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Planted one-factor binned panel (JSON) with correlation rising
    /// linearly across bins.
    Panel {
        #[arg(long, default_value_t = 40)]
        symbols: usize,
        #[arg(long, default_value_t = 12)]
        bins: usize,
        #[arg(long, default_value_t = 50)]
        days: usize,
        #[arg(long, default_value_t = 0.1)]
        rho_first: f64,
        #[arg(long, default_value_t = 0.7)]
        rho_last: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn build_config(args: RunArgs) -> Result<PipelineConfig> {
    let mut config = match (&args.config, &args.mode) {
        (Some(path), _) => PipelineConfig::from_file(path)?,
        (None, Some(mode)) => PipelineConfig::new(mode.parse()?),
        (None, None) => return Err(Error::Invalid("give --config or --mode".into())),
    };
    if let Some(mode) = &args.mode {
        config.mode = mode.parse::<Mode>()?;
    }
    if !args.inputs.is_empty() {
        config.inputs = args.inputs;
    }
    if let Some(s) = &args.session {
        config.session = Some(s.parse::<Session>()?);
    }
    config.bin_width = args.bin_width.or(config.bin_width);
    config.map_bin_width = args.map_bin_width.or(config.map_bin_width);
    config.window = args.window.or(config.window);
    config.step = args.step.or(config.step);
    if let Some(e) = &args.estimator {
        config.estimator = Some(e.parse::<Estimator>()?);
    }
    config.clean |= args.clean;
    if args.skip_window {
        config.missing = MissingPolicy::SkipWindow;
    }
    config.penalty_weight = args.penalty.or(config.penalty_weight);
    config.seed = args.seed.unwrap_or(config.seed);
    config.out = args.out.or(config.out);
    config.validate()?;
    Ok(config)
}

fn create(path: &PathBuf) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })
}

fn synth(cmd: SynthCommand) -> Result<()> {
    match cmd {
        SynthCommand::Ticks {
            symbols,
            days,
            rho,
            rate,
            session,
            start_date,
            seed,
            out,
        } => {
            let session: Session = session.parse()?;
            let length = (session.end - session.start).num_seconds() as f64;
            let spec = DiffusionSpec::equicorrelated(symbols, rho, rate, length, seed);
            let dates: Vec<NaiveDate> = (0..days).map(|d| start_date + chrono::Days::new(d as u64)).collect();
            let series = simulate_trading_days(&spec, &dates, session.start)?;
            write_ticks(create(&out)?, &series)
        }
        SynthCommand::Daily {
            symbols,
            days,
            rho,
            rho_after,
            switch_at,
            vol,
            start_date,
            seed,
            out,
        } => {
            if days < 2 {
                return Err(Error::Invalid("need at least 2 days".into()));
            }
            let dates = business_days(start_date, days);
            let switch = switch_at.unwrap_or((days - 1) / 2);
            let rhos: Vec<f64> = (0..days - 1)
                .map(|d| match rho_after {
                    Some(r) if d >= switch => r,
                    _ => rho,
                })
                .collect();
            let closes = simulate_daily_closes(symbols, &dates, &rhos, vol, seed)?;
            write_daily(create(&out)?, &closes)
        }
        SynthCommand::Panel {
            symbols,
            bins,
            days,
            rho_first,
            rho_last,
            seed,
            out,
        } => {
            let grid = synthetic_grid(bins, days)?;
            let rhos: Vec<f64> = (0..bins)
                .map(|k| {
                    let f = if bins > 1 { k as f64 / (bins - 1) as f64 } else { 0.0 };
                    rho_first + f * (rho_last - rho_first)
                })
                .collect();
            let panel = simulate_planted_panel(symbols, &grid, &rhos, seed)?;
            std::fs::write(&out, panel_to_json(&panel)?).map_err(|e| Error::Io { path: out, source: e })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run(args) => build_config(args).and_then(|c| {
            let artifacts = pipeline::run(&c)?;
            for note in artifacts.notes() {
                eprintln!("note: {note}");
            }
            Ok(())
        }),
        Command::Synth(cmd) => synth(cmd),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
