//! ε-scans of energies, detected measures and flat distances.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{ScanConfig, ScanMode};
use crate::energy::f_eps;
use crate::error::{Error, Result};
use crate::geometry::{Point2, Rect};
use crate::grid_field::{make_dirichlet_field, make_noisy_recovery_field, Dipole, Grid, S1Field};
use crate::measures::{flat_distance_field, Atom, AtomicMeasure};
use crate::singularities::detect;

pub const CSV_HEADER: &str = "eps,abs_log_eps,h,dirichlet,jump,f_eps,ratio,flat_mu,flat_muhat,muhat_mass,muhat_tv,muhat";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanRow {
    pub eps: f64,
    pub abs_log_eps: f64,
    pub h: f64,
    pub dirichlet: f64,
    pub jump: f64,
    pub f_eps: f64,
    /// `F_ε / |log ε|`.
    pub ratio: f64,
    pub flat_mu: Option<f64>,
    pub flat_muhat: Option<f64>,
    pub muhat: Option<AtomicMeasure>,
    pub noise: Vec<Dipole>,
}

impl ScanRow {
    pub fn muhat_mass(&self) -> Option<f64> {
        self.muhat.as_ref().map(AtomicMeasure::total_mass)
    }

    pub fn muhat_tv(&self) -> Option<f64> {
        self.muhat.as_ref().map(AtomicMeasure::total_variation)
    }
}

/// Trend checks evaluated on the rows; `None` when the scan lacks the data.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanChecks {
    /// `F_ε/|log ε|` strictly decreasing over the last four rows.
    pub ratio_tail_decreasing: Option<bool>,
    /// `|ratio − π|μ|(Ω)| / (π|μ|(Ω))` at the last row.
    pub final_ratio_error: Option<f64>,
    /// Last flat distance to `πμ` below the first.
    pub flat_mu_decreased: Option<bool>,
    /// Last flat distance to `πμ̂` below the first.
    pub flat_muhat_decreased: Option<bool>,
    /// Detected atoms match the generator, per row.
    pub weights_match: Vec<bool>,
    /// `|μ̂|(Ω)/|log ε|` nonincreasing over the last three rows.
    pub muhat_ratio_tail_nonincreasing: Option<bool>,
    /// `ratio ≥ π|μ|(Ω)(1 − slack)` on every row whose detection matches.
    pub liminf_holds: Option<bool>,
    /// Detected total mass equals the boundary degree on every row.
    pub degree_conserved: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanReport {
    pub config: ScanConfig,
    pub target_variation: f64,
    pub rows: Vec<ScanRow>,
    pub checks: ScanChecks,
}

/// Liminf slack: 15% at `ε = 2⁻⁸`, scaled by `1/|log ε|`.
pub fn liminf_slack(eps: f64) -> f64 {
    0.15 * (8.0 * 2f64.ln()) / eps.ln().abs()
}

/// Same weights as `target`, each detected atom within `radius` of a
/// distinct generator atom.
pub fn detection_matches(detected: &AtomicMeasure, target: &AtomicMeasure, radius: f64) -> bool {
    if detected.len() != target.len() {
        return false;
    }
    let mut used = vec![false; target.len()];
    for a in &detected.atoms {
        let hit = target
            .atoms
            .iter()
            .enumerate()
            .filter(|(k, t)| !used[*k] && t.weight == a.weight && t.point.dist(a.point) <= radius)
            .min_by(|x, y| x.1.point.dist(a.point).total_cmp(&y.1.point.dist(a.point)));
        match hit {
            Some((k, _)) => used[k] = true,
            None => return false,
        }
    }
    true
}

fn snap_to_cell_centre(x: f64, origin: f64, h: f64) -> f64 {
    origin + ((x - origin) / h).round() * h
}

/// Up to `count` zero-degree dipoles with cores on cell centres, less than
/// `ε` apart, kept `6ε` away from the atoms and from each other inside `Ω′`
/// shrunk by `3ε`; coarse `ε` may fit fewer.
pub fn noise_dipoles(rng: &mut ChaCha8Rng, mu: &AtomicMeasure, count: usize, eps: f64, h: f64, inner: &Rect, outer: &Rect) -> Vec<Dipole> {
    let mut out: Vec<Dipole> = Vec::with_capacity(count);
    let (lo, hi) = (inner.min, inner.max);
    let pad = 3.0 * eps;
    if hi.x1 - lo.x1 <= 2.0 * pad || hi.x2 - lo.x2 <= 2.0 * pad {
        return out;
    }
    for _ in 0..10_000 {
        if out.len() == count {
            break;
        }
        let plus = Point2::new(
            snap_to_cell_centre(rng.gen_range(lo.x1 + pad..hi.x1 - pad), outer.min.x1, h),
            snap_to_cell_centre(rng.gen_range(lo.x2 + pad..hi.x2 - pad), outer.min.x2, h),
        );
        let dx = f64::from(rng.gen_range(1..=5) * if rng.gen_bool(0.5) { 1 } else { -1 }) * h;
        let dy = f64::from(rng.gen_range(-4..=4)) * h;
        let minus = Point2::new(plus.x1 + dx, plus.x2 + dy);
        let far = |p: Point2| {
            inner.dist_to_boundary(p) >= pad
                && mu.atoms.iter().all(|a| a.point.dist(p) >= 6.0 * eps)
                && out.iter().all(|d| d.plus.dist(p) >= 6.0 * eps && d.minus.dist(p) >= 6.0 * eps)
        };
        if far(plus) && far(minus) {
            out.push(Dipole { plus, minus });
        }
    }
    out
}

/// `n` unit-weight atoms of random sign on a `1/64` lattice inside `Ω′`,
/// at least `2R` from its boundary and `4R` apart.
pub fn random_unit_atoms(rng: &mut ChaCha8Rng, n: usize, r_outer: f64, inner: &Rect) -> Result<AtomicMeasure> {
    let step = 1.0 / 64.0;
    let mut atoms: Vec<Atom> = Vec::with_capacity(n);
    let mut tries = 0;
    let (lo, hi) = (inner.min, inner.max);
    let pad = 2.0 * r_outer + 1e-9;
    if hi.x1 - lo.x1 <= 2.0 * pad || hi.x2 - lo.x2 <= 2.0 * pad {
        return Err(Error::InvalidInput("inner rectangle too small for the atoms".into()));
    }
    while atoms.len() < n {
        tries += 1;
        if tries > 10_000 {
            return Err(Error::InvalidInput(format!("could not place {n} atoms")));
        }
        let x = ((rng.gen_range(lo.x1 + pad..hi.x1 - pad)) / step).round() * step;
        let y = ((rng.gen_range(lo.x2 + pad..hi.x2 - pad)) / step).round() * step;
        let p = Point2::new(x, y);
        if inner.dist_to_boundary(p) < pad || atoms.iter().any(|a| a.point.dist(p) < 4.0 * r_outer + 1e-9) {
            continue;
        }
        let w = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        atoms.push(Atom::new(p, w));
    }
    Ok(AtomicMeasure::new(atoms))
}

fn row_seed(seed: u64, k: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k as u64)
}

fn build_field(cfg: &ScanConfig, k: usize, eps: f64) -> Result<(S1Field, Vec<Dipole>, Rect)> {
    let h = cfg.h(eps);
    match cfg.mode {
        ScanMode::Recovery | ScanMode::Compactness => {
            let domain = cfg.domain()?;
            let grid = Grid::covering(&domain.outer, h)?;
            let noise = if cfg.mode == ScanMode::Compactness && cfg.dipoles > 0 {
                let mut rng = ChaCha8Rng::seed_from_u64(row_seed(cfg.seed.unwrap_or(0), k));
                noise_dipoles(&mut rng, &cfg.mu, cfg.dipoles, eps, h, &domain.inner, &domain.outer)
            } else {
                Vec::new()
            };
            let u = make_noisy_recovery_field(&cfg.mu, &noise, eps, cfg.r_outer, grid, domain)?;
            Ok((u, noise, domain.outer))
        }
        ScanMode::Dirichlet => {
            let dd = cfg.dirichlet_domain()?;
            let u = make_dirichlet_field(&cfg.mu, eps, cfg.r_outer, &cfg.boundary, &dd, h)?;
            Ok((u, Vec::new(), dd.hull))
        }
    }
}

fn scan_row(cfg: &ScanConfig, k: usize, eps: f64) -> Result<ScanRow> {
    let (u, noise, omega) = build_field(cfg, k, eps)?;
    let e = f_eps(&u, eps, None)?;
    let abs_log_eps = eps.ln().abs();
    let muhat = if cfg.detect { Some(detect(&u, eps)?.mu_hat) } else { None };
    let (flat_mu, flat_muhat) = if cfg.flat_lattice > 0 {
        let lattice = Grid::lattice(&omega, cfg.flat_lattice)?;
        let fm = flat_distance_field(&u, &cfg.mu.scaled(PI), &omega, &lattice)?.value;
        let fh = match &muhat {
            Some(m) => Some(flat_distance_field(&u, &m.scaled(PI), &omega, &lattice)?.value),
            None => None,
        };
        (Some(fm), fh)
    } else {
        (None, None)
    };
    Ok(ScanRow {
        eps,
        abs_log_eps,
        h: cfg.h(eps),
        dirichlet: e.dirichlet,
        jump: e.jump,
        f_eps: e.total,
        ratio: e.total / abs_log_eps,
        flat_mu,
        flat_muhat,
        muhat,
        noise,
    })
}

fn evaluate(cfg: &ScanConfig, rows: &[ScanRow]) -> ScanChecks {
    let target = PI * cfg.mu.total_variation();
    let n = rows.len();
    let tail = |m: usize| &rows[n.saturating_sub(m)..];
    let ratio_tail_decreasing = (n >= 4).then(|| tail(4).windows(2).all(|w| w[1].ratio < w[0].ratio));
    let final_ratio_error = (target > 0.0).then(|| (rows[n - 1].ratio - target).abs() / target);
    let decreased = |get: fn(&ScanRow) -> Option<f64>| match (rows.first().and_then(get), rows.last().and_then(get)) {
        (Some(a), Some(b)) if n >= 2 => Some(b < a),
        _ => None,
    };
    let match_radius = cfg.r_outer;
    let weights_match: Vec<bool> = rows
        .iter()
        .map(|r| r.muhat.as_ref().is_some_and(|m| detection_matches(m, &cfg.mu, match_radius)))
        .collect();
    let detected = rows.iter().all(|r| r.muhat.is_some());
    let muhat_ratio_tail_nonincreasing = (detected && n >= 3).then(|| {
        tail(3)
            .windows(2)
            .all(|w| w[1].muhat_tv().unwrap_or(0.0) / w[1].abs_log_eps <= w[0].muhat_tv().unwrap_or(0.0) / w[0].abs_log_eps)
    });
    let liminf_holds = detected.then(|| {
        rows.iter()
            .zip(&weights_match)
            .filter(|(_, &m)| m)
            .all(|(r, _)| r.ratio >= target * (1.0 - liminf_slack(r.eps)))
    });
    let degree_conserved = (detected && cfg.mode == ScanMode::Dirichlet)
        .then(|| rows.iter().all(|r| r.muhat_mass() == Some(f64::from(cfg.boundary.degree()))));
    ScanChecks {
        ratio_tail_decreasing,
        final_ratio_error,
        flat_mu_decreased: decreased(|r| r.flat_mu),
        flat_muhat_decreased: decreased(|r| r.flat_muhat),
        weights_match,
        muhat_ratio_tail_nonincreasing,
        liminf_holds,
        degree_conserved,
    }
}

/// Runs the configured scan, one row per ε in order.
pub fn run_scan(cfg: &ScanConfig) -> Result<ScanReport> {
    cfg.validate()?;
    let rows = cfg
        .eps
        .iter()
        .enumerate()
        .map(|(k, &eps)| scan_row(cfg, k, eps))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScanReport {
        checks: evaluate(cfg, &rows),
        target_variation: cfg.mu.total_variation(),
        config: cfg.clone(),
        rows,
    })
}

fn with_mode(cfg: &ScanConfig, mode: ScanMode) -> ScanConfig {
    ScanConfig { mode, ..cfg.clone() }
}

/// Recovery fields for unit-weight atoms: energies against `π|μ|(Ω)|log ε|`.
pub fn run_limsup_scan(cfg: &ScanConfig) -> Result<ScanReport> {
    if cfg.mu.atoms.iter().any(|a| a.weight.abs() != 1.0) {
        return Err(Error::InvalidInput("limsup scans need unit-weight atoms".into()));
    }
    run_scan(&with_mode(cfg, ScanMode::Recovery))
}

/// Recovery fields with dipole noise, passed through `detect`.
pub fn run_compactness_scan(cfg: &ScanConfig) -> Result<ScanReport> {
    let cfg = ScanConfig {
        detect: true,
        ..with_mode(cfg, ScanMode::Compactness)
    };
    run_scan(&cfg)
}

/// Fields matched to the boundary datum outside `Ω′`; the total weight of
/// `μ` must equal its degree.
pub fn run_dirichlet_scan(cfg: &ScanConfig) -> Result<ScanReport> {
    let total = cfg.mu.total_mass();
    if total != f64::from(cfg.boundary.degree()) {
        return Err(Error::InvalidInput(format!(
            "total weight {total} differs from the boundary degree {}",
            cfg.boundary.degree()
        )));
    }
    let cfg = ScanConfig {
        detect: true,
        ..with_mode(cfg, ScanMode::Dirichlet)
    };
    run_scan(&cfg)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_scan_csv<W: Write>(report: &ScanReport, mut w: W) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in &report.rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.eps,
            r.abs_log_eps,
            r.h,
            r.dirichlet,
            r.jump,
            r.f_eps,
            r.ratio,
            opt(r.flat_mu),
            opt(r.flat_muhat),
            opt(r.muhat_mass()),
            opt(r.muhat_tv()),
            r.muhat.as_ref().map(AtomicMeasure::encode).unwrap_or_default()
        )?;
    }
    Ok(())
}

pub fn write_scan_json<W: Write>(report: &ScanReport, w: W) -> Result<()> {
    serde_json::to_writer_pretty(w, report)?;
    Ok(())
}
