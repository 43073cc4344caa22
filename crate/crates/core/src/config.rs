//! Scan configuration and its `key = value` text form.
//!
//! ```text
//! # comments and blank lines are skipped
//! mode = recovery            # recovery | compactness | dirichlet
//! domain = 0 0 1 1           # outer rectangle x0 y0 x1 y1
//! margin = 0.125             # Ω′ is the outer rectangle shrunk by this much
//! atom = 1@(0.5,0.5)         # repeated, weight@(x,y)
//! eps = 2^-4..2^-10          # or a list: 0.0625 2^-5 0.015625
//! grid_ratio = 8             # h = eps / grid_ratio
//! r_outer = 0.125
//! seed = 1
//! dipoles = 0                # zero-degree noise dipoles per field, as many as fit (compactness)
//! flat_lattice = 64          # lattice cells per side, 0 skips flat distances
//! detect = true
//! boundary = winding 1 0.5 0.5 0   # or `constant <phase>` (dirichlet)
//! ```
//! In dirichlet mode `Ω̂` is the outer rectangle and `Ω`, `Ω′`, `Ω̃` are it
//! shrunk by `margin/2`, `margin` and `2·margin`.

use std::io::BufRead;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{DirichletDomain, Domain, Point2, Rect};
use crate::grid_field::BoundaryField;
use crate::measures::{Atom, AtomicMeasure};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanMode {
    Recovery,
    Compactness,
    Dirichlet,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanConfig {
    pub mode: ScanMode,
    pub outer: Rect,
    pub margin: f64,
    pub mu: AtomicMeasure,
    pub eps: Vec<f64>,
    pub grid_ratio: usize,
    pub r_outer: f64,
    /// Required when noise dipoles are drawn.
    pub seed: Option<u64>,
    pub dipoles: usize,
    pub flat_lattice: usize,
    pub detect: bool,
    pub boundary: BoundaryField,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            mode: ScanMode::Recovery,
            outer: Rect::unit_square(),
            margin: 0.125,
            mu: AtomicMeasure::zero(),
            eps: dyadic_range(4, 10),
            grid_ratio: 8,
            r_outer: 0.125,
            seed: None,
            dipoles: 0,
            flat_lattice: 64,
            detect: true,
            boundary: BoundaryField::Constant { phase: 0.0 },
        }
    }
}

/// `2^{-a}, …, 2^{-b}`.
pub fn dyadic_range(a: i32, b: i32) -> Vec<f64> {
    (a..=b).map(|k| 0.5f64.powi(k)).collect()
}

fn shrink(r: &Rect, by: f64) -> Result<Rect> {
    Rect::new(r.min.x1 + by, r.min.x2 + by, r.max.x1 - by, r.max.x2 - by)
}

impl ScanConfig {
    pub fn h(&self, eps: f64) -> f64 {
        eps / self.grid_ratio as f64
    }

    pub fn domain(&self) -> Result<Domain> {
        Domain::with_margin(self.outer, self.margin)
    }

    pub fn dirichlet_domain(&self) -> Result<DirichletDomain> {
        DirichletDomain::new(
            shrink(&self.outer, 2.0 * self.margin)?,
            shrink(&self.outer, self.margin)?,
            shrink(&self.outer, 0.5 * self.margin)?,
            self.outer,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps.is_empty() {
            return Err(Error::InvalidInput("at least one eps is required".into()));
        }
        if self.eps.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return Err(Error::InvalidInput("eps values must lie in (0, 1)".into()));
        }
        if self.eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidInput("eps values must be strictly decreasing".into()));
        }
        if self.grid_ratio < 8 || !self.grid_ratio.is_multiple_of(4) {
            return Err(Error::InvalidInput(format!(
                "grid_ratio must be a multiple of 4 and at least 8, got {}",
                self.grid_ratio
            )));
        }
        if self.mode == ScanMode::Compactness && self.dipoles > 0 && self.seed.is_none() {
            return Err(Error::InvalidInput("a seed is required when noise dipoles are drawn".into()));
        }
        if !(self.r_outer > 0.0) {
            return Err(Error::InvalidInput("r_outer must be positive".into()));
        }
        match self.mode {
            ScanMode::Dirichlet => {
                self.dirichlet_domain()?;
            }
            _ => {
                self.domain()?;
            }
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut cfg = ScanConfig::default();
        let mut atoms = Vec::new();
        for (k, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = k + 1;
            let err = |msg: String| Error::Parse { line: lineno, msg };
            let text = line.split('#').next().unwrap_or("").trim();
            if text.is_empty() {
                continue;
            }
            let (key, value) = text
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{text}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let num = |s: &str| -> Result<f64> { parse_real(s).ok_or_else(|| err(format!("cannot parse `{s}`"))) };
            let int = |s: &str| -> Result<u64> { s.parse().map_err(|_| err(format!("cannot parse `{s}`"))) };
            match key {
                "mode" => {
                    cfg.mode = match value {
                        "recovery" => ScanMode::Recovery,
                        "compactness" => ScanMode::Compactness,
                        "dirichlet" => ScanMode::Dirichlet,
                        other => return Err(err(format!("unknown mode `{other}`"))),
                    }
                }
                "domain" => {
                    let v: Vec<f64> = value.split_whitespace().map(num).collect::<Result<_>>()?;
                    if v.len() != 4 {
                        return Err(err("domain needs x0 y0 x1 y1".into()));
                    }
                    cfg.outer = Rect::new(v[0], v[1], v[2], v[3]).map_err(|e| err(e.to_string()))?;
                }
                "margin" => cfg.margin = num(value)?,
                "atom" => atoms.push(parse_atom(value).ok_or_else(|| err(format!("expected weight@(x,y), got `{value}`")))?),
                "eps" => cfg.eps = parse_eps(value).ok_or_else(|| err(format!("cannot parse eps list `{value}`")))?,
                "grid_ratio" => cfg.grid_ratio = int(value)? as usize,
                "r_outer" => cfg.r_outer = num(value)?,
                "seed" => cfg.seed = Some(int(value)?),
                "dipoles" => cfg.dipoles = int(value)? as usize,
                "flat_lattice" => cfg.flat_lattice = int(value)? as usize,
                "detect" => {
                    cfg.detect = value
                        .parse()
                        .map_err(|_| err(format!("expected true or false, got `{value}`")))?
                }
                "boundary" => cfg.boundary = parse_boundary(value).ok_or_else(|| err(format!("cannot parse boundary `{value}`")))?,
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        cfg.mu = AtomicMeasure::new(atoms);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical text form; `read` of the output gives back the same config.
    pub fn to_text(&self) -> String {
        let mode = match self.mode {
            ScanMode::Recovery => "recovery",
            ScanMode::Compactness => "compactness",
            ScanMode::Dirichlet => "dirichlet",
        };
        let o = &self.outer;
        let mut s = format!("mode = {mode}\ndomain = {} {} {} {}\nmargin = {}\n", o.min.x1, o.min.x2, o.max.x1, o.max.x2, self.margin);
        for a in &self.mu.atoms {
            s += &format!("atom = {}@({},{})\n", a.weight, a.point.x1, a.point.x2);
        }
        let eps: Vec<String> = self.eps.iter().map(ToString::to_string).collect();
        s += &format!(
            "eps = {}\ngrid_ratio = {}\nr_outer = {}\ndipoles = {}\nflat_lattice = {}\ndetect = {}\n",
            eps.join(" "),
            self.grid_ratio,
            self.r_outer,
            self.dipoles,
            self.flat_lattice,
            self.detect
        );
        if let Some(seed) = self.seed {
            s += &format!("seed = {seed}\n");
        }
        s += &match self.boundary {
            BoundaryField::Constant { phase } => format!("boundary = constant {phase}\n"),
            BoundaryField::Winding { center, degree, phase } => {
                format!("boundary = winding {degree} {} {} {phase}\n", center.x1, center.x2)
            }
        };
        s
    }
}

/// A real number or `2^k`.
pub fn parse_real(s: &str) -> Option<f64> {
    let s = s.trim();
    let v = match s.strip_prefix("2^") {
        Some(k) => 2f64.powi(k.parse().ok()?),
        None => s.parse().ok()?,
    };
    v.is_finite().then_some(v)
}

/// `2^-a..2^-b` or a whitespace/comma separated list.
pub fn parse_eps(s: &str) -> Option<Vec<f64>> {
    if let Some((a, b)) = s.split_once("..") {
        let ka: i32 = a.trim().strip_prefix("2^")?.parse().ok()?;
        let kb: i32 = b.trim().strip_prefix("2^")?.parse().ok()?;
        if kb > ka {
            return None;
        }
        return Some(dyadic_range(-ka, -kb));
    }
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(parse_real)
        .collect()
}

/// `weight@(x,y)`.
pub fn parse_atom(s: &str) -> Option<Atom> {
    let (w, rest) = s.split_once('@')?;
    let inner = rest.trim().strip_prefix('(')?.strip_suffix(')')?;
    let (x, y) = inner.split_once(',')?;
    Some(Atom::new(Point2::new(parse_real(x)?, parse_real(y)?), parse_real(w)?))
}

/// Comma or semicolon separated `weight@(x,y)` entries.
pub fn parse_measure(s: &str) -> Option<AtomicMeasure> {
    let mut atoms = Vec::new();
    let mut rest = s.trim();
    while !rest.is_empty() {
        let close = rest.find(')')?;
        atoms.push(parse_atom(&rest[..=close])?);
        rest = rest[close + 1..].trim_start_matches([',', ';', ' ']);
    }
    Some(AtomicMeasure::new(atoms))
}

fn parse_boundary(s: &str) -> Option<BoundaryField> {
    let f: Vec<&str> = s.split_whitespace().collect();
    match f.as_slice() {
        ["constant"] => Some(BoundaryField::Constant { phase: 0.0 }),
        ["constant", p] => Some(BoundaryField::Constant { phase: parse_real(p)? }),
        ["winding", d, x, y, rest @ ..] if rest.len() <= 1 => Some(BoundaryField::Winding {
            degree: d.parse().ok()?,
            center: Point2::new(parse_real(x)?, parse_real(y)?),
            phase: rest.first().map_or(Some(0.0), |p| parse_real(p))?,
        }),
        _ => None,
    }
}
