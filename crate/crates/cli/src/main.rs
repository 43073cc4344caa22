//! `topsing`: vortex detection, energy scans and flat distances from the command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 domain or
//! admissibility error, 3 numerical failure.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use topsing_core::config::{parse_measure, parse_real, ScanConfig, ScanMode};
use topsing_core::gamma::{run_compactness_scan, run_dirichlet_scan, run_limsup_scan, write_scan_csv, write_scan_json, ScanReport};
use topsing_core::geometry::{Domain, Rect};
use topsing_core::grid_field::{make_recovery_field, read_field, Grid, S1Field};
use topsing_core::measures::{flat_distance_atomic, read_atoms_csv, write_atoms_csv, AtomicMeasure};
use topsing_core::singularities::detect;
use topsing_core::Error;

#[derive(Parser, Debug)]
#[command(name = "topsing", version, about = "Vortex detection and Γ-convergence scans for S¹-valued fields with jumps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Detect the atomic measure of a field dump or of a generated recovery field.
    Detect {
        /// Field dump (`s1field 1` format); without it a recovery field is generated.
        #[arg(long)]
        field: Option<PathBuf>,
        /// Atoms of the generated field, e.g. `1@(0,0);-1@(0.25,0)`.
        #[arg(long, default_value = "")]
        mu: String,
        /// Core scale; accepts `2^-8`.
        #[arg(long)]
        eps: String,
        /// Grid cells per eps for the generated field.
        #[arg(long, default_value_t = 8)]
        grid: usize,
        /// Outer radius of the generated field's annuli.
        #[arg(long, default_value_t = 0.125)]
        r_outer: f64,
        /// Outer rectangle `x0,y0,x1,y1` of the generated field.
        #[arg(long, default_value = "-0.5,-0.5,0.5,0.5", allow_hyphen_values = true)]
        domain: String,
        #[arg(long, default_value_t = 0.125)]
        margin: f64,
        /// Directory receiving `atoms.csv` and `diagnostics.json`.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run the ε-scan described by a config file.
    GammaScan {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Directory receiving `scan.csv` and `scan.json`.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Flat distance between two atom lists (`x,y,weight` CSV).
    Flatnorm {
        first: PathBuf,
        second: PathBuf,
        /// Rectangle `x0,y0,x1,y1` carrying the flat norm.
        #[arg(long, default_value = "0,0,1,1", allow_hyphen_values = true)]
        domain: String,
        /// Witness CSV path.
        #[arg(long, default_value = "witness.csv")]
        out: PathBuf,
    },
}

fn parse_rect(s: &str) -> Result<Rect> {
    let v: Vec<f64> = s
        .split([',', ' '])
        .filter(|t| !t.is_empty())
        .map(|t| parse_real(t).with_context(|| format!("cannot parse `{t}` in rectangle `{s}`")))
        .collect::<Result<_>>()?;
    if v.len() != 4 {
        bail!("rectangle `{s}` needs x0,y0,x1,y1");
    }
    Ok(Rect::new(v[0], v[1], v[2], v[3])?)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("cannot open {}", path.display()))?))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?))
}

#[allow(clippy::too_many_arguments)]
fn cmd_detect(field: Option<&Path>, mu: &str, eps: &str, grid: usize, r_outer: f64, domain: &str, margin: f64, out: &Path) -> Result<()> {
    let eps = parse_real(eps).with_context(|| format!("cannot parse eps `{eps}`"))?;
    let u: S1Field = match field {
        Some(path) => read_field(open(path)?)?,
        None => {
            let mu = parse_measure(mu).with_context(|| format!("cannot parse measure `{mu}`"))?;
            if grid == 0 {
                bail!("--grid must be positive");
            }
            let outer = parse_rect(domain)?;
            let g = Grid::covering(&outer, eps / grid as f64)?;
            make_recovery_field(&mu, eps, r_outer, g, Domain::with_margin(outer, margin)?)?
        }
    };
    let d = detect(&u, eps)?;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let mut w = create(&out.join("atoms.csv"))?;
    write_atoms_csv(&d.mu_hat, &mut w)?;
    w.flush()?;
    fs::write(out.join("diagnostics.json"), d.diagnostics_json()?)?;
    println!("atoms={} mass={} variation={}", d.mu_hat.len(), d.mu_hat.total_mass(), d.mu_hat.total_variation());
    for a in &d.mu_hat.atoms {
        println!("{},{},{}", a.point.x1, a.point.x2, a.weight);
    }
    Ok(())
}

fn summary(r: &ScanReport) -> String {
    let Some(last) = r.rows.last() else {
        return "rows=0".into();
    };
    let show = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| x.to_string());
    format!(
        "rows={} final_eps={} ratio={} flat_mu={} flat_muhat={}",
        r.rows.len(),
        last.eps,
        last.ratio,
        show(last.flat_mu),
        show(last.flat_muhat)
    )
}

fn cmd_gamma_scan(config: &Path, seed: Option<u64>, out: &Path) -> Result<()> {
    let mut cfg = ScanConfig::read(open(config)?)?;
    if seed.is_some() {
        cfg.seed = seed;
    }
    let report = match cfg.mode {
        ScanMode::Recovery => run_limsup_scan(&cfg)?,
        ScanMode::Compactness => run_compactness_scan(&cfg)?,
        ScanMode::Dirichlet => run_dirichlet_scan(&cfg)?,
    };
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let mut w = create(&out.join("scan.csv"))?;
    write_scan_csv(&report, &mut w)?;
    w.flush()?;
    let mut w = create(&out.join("scan.json"))?;
    write_scan_json(&report, &mut w)?;
    w.flush()?;
    println!("{}", summary(&report));
    Ok(())
}

fn cmd_flatnorm(first: &Path, second: &Path, domain: &str, out: &Path) -> Result<()> {
    let omega = parse_rect(domain)?;
    let a: AtomicMeasure = read_atoms_csv(open(first)?)?;
    let b: AtomicMeasure = read_atoms_csv(open(second)?)?;
    let r = flat_distance_atomic(&a, &b, &omega)?;
    let mut w = create(out)?;
    r.write_witness_csv(&mut w)?;
    w.flush()?;
    println!("{}", r.value);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Detect {
            field,
            mu,
            eps,
            grid,
            r_outer,
            domain,
            margin,
            out,
        } => cmd_detect(field.as_deref(), &mu, &eps, grid, r_outer, &domain, margin, &out),
        Command::GammaScan { config, seed, out } => cmd_gamma_scan(&config, seed, &out),
        Command::Flatnorm {
            first,
            second,
            domain,
            out,
        } => cmd_flatnorm(&first, &second, &domain, &out),
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.chain().find_map(|c| c.downcast_ref::<Error>()) {
        Some(Error::Admissibility(_)) => 2,
        Some(Error::Numerical(_)) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
