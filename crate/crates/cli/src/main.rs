use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand, ValueEnum};
use qfso::correlation::{
    coincidence_histogram, fit_gaussian, g2_normalize, subtract_accidentals, G2Histogram,
    DEFAULT_BIN_WIDTH_PS, DEFAULT_FAR_FROM_PS, DEFAULT_TAU_RANGE_PS,
};
use qfso::harness::{files, regenerate_report, run_scenario, HarnessError, ScenarioConfig};
use qfso::photonics::{
    calibrate_temp_offset, tuning_curve, DispersionModel, PhaseMatchParams, PhotonEventStream,
    DEGENERACY_SET_TEMP_C,
};

#[derive(Parser)]
#[command(name = "qfso", version, about = "Free-space quantum link simulator and analysis tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario end to end and write its artifacts.
    Simulate {
        /// Scenario TOML file, or builtin:paper-default / builtin:fast-ci.
        config: String,
        /// Output directory (overrides the scenario and QFSO_OUTPUT_ROOT).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Coincidence histogram and g² of two timestamp files (.bin or .csv).
    G2 {
        signal: PathBuf,
        idler: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BIN_WIDTH_PS)]
        bin_ps: u64,
        #[arg(long, default_value_t = DEFAULT_TAU_RANGE_PS)]
        range_ps: u64,
        /// Bins with |τ| above this form the accidental floor.
        #[arg(long, default_value_t = DEFAULT_FAR_FROM_PS)]
        far_ps: u64,
        /// Acquisition time; binary files do not record it. Defaults to the
        /// last timestamp of either stream.
        #[arg(long)]
        duration_s: Option<f64>,
        /// Write the histogram CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gaussian fit of one column of a histogram CSV.
    Fit {
        histogram: PathBuf,
        #[arg(long, value_enum, default_value_t = Column::Auto)]
        column: Column,
    },
    /// Phase-matched wavelengths over a temperature range, as CSV.
    Phasematch {
        #[arg(long)]
        tmin: f64,
        #[arg(long)]
        tmax: f64,
        #[arg(long)]
        step: f64,
        #[arg(long, value_enum, default_value_t = Dispersion::Fradkin)]
        dispersion: Dispersion,
    },
    /// Recompute a run's report from its persisted artifacts.
    Report { run_dir: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Column {
    /// g2_subtracted if present, else g2, else counts.
    Auto,
    Counts,
    G2,
    G2Subtracted,
}

#[derive(Clone, Copy, ValueEnum)]
enum Dispersion {
    Fradkin,
    Kato,
}

enum Failure {
    /// Bad input: exit 1.
    Invalid(String),
    /// Failure while running: exit 2.
    Runtime(String),
}

fn invalid(e: impl std::fmt::Display) -> Failure {
    Failure::Invalid(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        if e.is_validation() {
            invalid(e)
        } else {
            runtime(e)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            if !e.use_stderr() {
                return ExitCode::SUCCESS;
            }
            // value errors come without usage text
            if !e.to_string().contains("Usage:") {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            return ExitCode::from(1);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Simulate { config, out } => simulate(&config, out.as_deref()),
        Command::G2 {
            signal,
            idler,
            bin_ps,
            range_ps,
            far_ps,
            duration_s,
            out,
        } => g2(&signal, &idler, bin_ps, range_ps, far_ps, duration_s, out.as_deref()),
        Command::Fit { histogram, column } => fit(&histogram, column),
        Command::Phasematch {
            tmin,
            tmax,
            step,
            dispersion,
        } => phasematch(tmin, tmax, step, dispersion),
        Command::Report { run_dir } => report(&run_dir),
    }
}

fn simulate(config: &str, out: Option<&Path>) -> Result<(), Failure> {
    let cfg = ScenarioConfig::load(config)?;
    let (report, dir) = run_scenario(&cfg, out)?;
    println!("run directory: {}", dir.display());
    println!(
        "beam FWHM: uncorrected {:.1} um, corrected {:.1} um (ratio {:.1})",
        report.beam.uncorrected_fwhm_um, report.beam.corrected_fwhm_um, report.beam.suppression_ratio
    );
    println!(
        "coupling: mean {:.3}, std {:.3}",
        report.coupling.mean_eta, report.coupling.std_eta
    );
    println!("receiver signal rate: {:.0} /s", report.photons.receiver_signal_rate);
    println!(
        "g2 peak: raw {:.2}, subtracted {:.2} (floor {:.3})",
        report.g2.peak_raw, report.g2.peak_subtracted, report.g2.floor
    );
    println!("wall clock: {:.2} s", report.wall_clock_s);
    Ok(())
}

fn read_stream(path: &Path, duration_s: Option<f64>) -> Result<PhotonEventStream, Failure> {
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let stream = if is_csv {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        let mut s = PhotonEventStream::read_csv(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        if let Some(d) = duration_s {
            s.duration_s = d;
            s.validate().map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        }
        s
    } else {
        let f = File::open(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        PhotonEventStream::read_binary(BufReader::new(f), duration_s)
            .map_err(|e| invalid(format!("{}: {e}", path.display())))?
    };
    Ok(stream)
}

fn g2(
    signal: &Path,
    idler: &Path,
    bin_ps: u64,
    range_ps: u64,
    far_ps: u64,
    duration_s: Option<f64>,
    out: Option<&Path>,
) -> Result<(), Failure> {
    if let Some(d) = duration_s {
        if !(d.is_finite() && d > 0.0) {
            return Err(invalid("--duration-s must be > 0"));
        }
    }
    let mut s = read_stream(signal, duration_s)?;
    let mut i = read_stream(idler, duration_s)?;
    if duration_s.is_none() {
        let d = s.duration_s.max(i.duration_s);
        s.duration_s = d;
        i.duration_s = d;
    }
    let hist = coincidence_histogram(&s, &i, bin_ps, range_ps).map_err(invalid)?;
    let hist = g2_normalize(&hist).map_err(invalid)?;
    let hist = subtract_accidentals(&hist, far_ps).map_err(invalid)?;
    match out {
        Some(path) => {
            let f = File::create(path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
            let mut w = BufWriter::new(f);
            hist.write_csv(&mut w)
                .and_then(|_| w.flush())
                .map_err(|e| runtime(format!("{}: {e}", path.display())))
        }
        None => io::stdout().write_all(hist.to_csv_string().as_bytes()).map_err(runtime),
    }
}

fn fit(path: &Path, column: Column) -> Result<(), Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let hist = G2Histogram::read_csv(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let counts: Vec<f64> = hist.counts.iter().map(|&c| c as f64).collect();
    let (name, values) = match column {
        Column::Counts => ("counts", Some(counts)),
        Column::G2 => ("g2", hist.g2.clone()),
        Column::G2Subtracted => ("g2_subtracted", hist.g2_subtracted.clone()),
        Column::Auto => hist
            .g2_subtracted
            .clone()
            .map(|v| ("g2_subtracted", v))
            .or(hist.g2.clone().map(|v| ("g2", v)))
            .map_or(("counts", Some(counts)), |(n, v)| (n, Some(v))),
    };
    let values = values.ok_or_else(|| invalid(format!("histogram has no {name} column values")))?;
    let taus: Vec<f64> = hist.taus_ps().iter().map(|&t| t as f64).collect();
    let fit = fit_gaussian(&taus, &values).map_err(runtime)?;
    println!("column = \"{name}\"");
    println!("amplitude = {}", fit.amplitude);
    println!("center_ps = {}", fit.center);
    println!("sigma_ps = {}", fit.sigma);
    println!("offset = {}", fit.offset);
    println!("fwhm_ps = {}", fit.fwhm);
    println!("residual_norm = {}", fit.residual_norm);
    println!("iterations = {}", fit.iterations);
    Ok(())
}

fn phasematch(tmin: f64, tmax: f64, step: f64, dispersion: Dispersion) -> Result<(), Failure> {
    let mut params = PhaseMatchParams {
        dispersion: match dispersion {
            Dispersion::Fradkin => DispersionModel::Fradkin,
            Dispersion::Kato => DispersionModel::Kato,
        },
        ..PhaseMatchParams::default()
    };
    // each index model gets its own offset so degeneracy stays at the set point
    params.temp_offset_c = calibrate_temp_offset(DEGENERACY_SET_TEMP_C, &params).map_err(runtime)?;
    let curve = tuning_curve(tmin, tmax, step, &params).map_err(invalid)?;
    let mut out = String::from("temp_c,signal_nm,idler_nm\n");
    for p in curve {
        out.push_str(&format!("{},{:.6},{:.6}\n", p.temp_c, p.signal_nm, p.idler_nm));
    }
    io::stdout().write_all(out.as_bytes()).map_err(runtime)
}

fn report(dir: &Path) -> Result<(), Failure> {
    if !dir.join(files::CONFIG).is_file() {
        return Err(invalid(format!("{} is not a run directory", dir.display())));
    }
    let regenerated = regenerate_report(dir)?;
    let json = regenerated.to_json();
    io::stdout().write_all(json.as_bytes()).map_err(runtime)?;
    if let Ok(stored) = std::fs::read_to_string(dir.join(files::REPORT)) {
        if stored != json {
            return Err(runtime(format!(
                "regenerated report differs from {}",
                dir.join(files::REPORT).display()
            )));
        }
    }
    Ok(())
}
