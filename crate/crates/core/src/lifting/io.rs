//! Plain-text mesh and map format.
//!
//! ```text
//! pwaffine 1
//! dims <n> <m>
//! vertices <count>
//! <n coordinates>
//! simplices <count>
//! <n+1 vertex indices> <m offsets> <m·n linear coefficients, row-major>
//! jumps <count>
//! <minus simplex> <plus simplex>
//! ```
//! Each simplex carries `u(x) = offset + linear · x`. The jump table lists the
//! pairs of face-sharing simplices whose traces differ; it must agree with
//! the jumps implied by the coefficients. Blank lines and `#` comments are skipped.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use super::map::{AffineCoefficients, PwAffineMap, SimplexMesh};
use crate::error::{Error, Result};
use crate::text::Lines;

/// Mesh, coefficients and declared jump pairs as read from a file.
#[derive(Clone, Debug, PartialEq)]
pub struct MapFile {
    pub mesh: SimplexMesh,
    pub target_dim: usize,
    pub coefficients: Vec<AffineCoefficients>,
    pub jump_pairs: Vec<(usize, usize)>,
}

impl MapFile {
    /// Builds the map and checks the declared jump table against it.
    pub fn build(&self) -> Result<PwAffineMap> {
        let u = PwAffineMap::from_affine(&self.mesh, self.target_dim, &self.coefficients)?;
        let declared: BTreeSet<(usize, usize)> = self.jump_pairs.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
        let found = jump_pairs(&self.mesh, &u);
        if declared != found {
            return Err(Error::InvalidInput(format!(
                "jump table lists {} pairs but the coefficients imply {}",
                declared.len(),
                found.len()
            )));
        }
        Ok(u)
    }
}

/// Face-sharing simplex pairs of `mesh` that carry a jump of `u`.
fn jump_pairs(mesh: &SimplexMesh, u: &PwAffineMap) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    for face in u.jumps() {
        let owners: Vec<usize> = mesh
            .simplices
            .iter()
            .enumerate()
            .filter(|(_, simplex)| face.vertices.iter().all(|p| simplex.iter().any(|&v| &mesh.vertices[v] == p)))
            .map(|(s, _)| s)
            .collect();
        if owners.len() == 2 {
            out.insert((owners[0], owners[1]));
        }
    }
    out
}

pub fn read_map<R: BufRead>(r: R) -> Result<MapFile> {
    let mut lines = Lines::new(r);
    let head = lines.next_fields()?;
    if head != ["pwaffine", "1"] {
        return Err(lines.err("missing `pwaffine 1` header"));
    }
    let d = lines.tagged("dims", 2)?;
    let n: usize = lines.num(&d[0])?;
    let m: usize = lines.num(&d[1])?;
    let f = lines.tagged("vertices", 1)?;
    let nv: usize = lines.num(&f[0])?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let f = lines.next_fields()?;
        if f.len() != n {
            return Err(lines.err(format!("vertex rows need {n} coordinates")));
        }
        vertices.push(f.iter().map(|s| lines.num(s)).collect::<Result<Vec<f64>>>()?);
    }
    let f = lines.tagged("simplices", 1)?;
    let ns: usize = lines.num(&f[0])?;
    let mut simplices = Vec::with_capacity(ns);
    let mut coefficients = Vec::with_capacity(ns);
    for _ in 0..ns {
        let f = lines.next_fields()?;
        if f.len() != n + 1 + m + m * n {
            return Err(lines.err(format!("simplex rows need {} fields", n + 1 + m + m * n)));
        }
        simplices.push(f[..=n].iter().map(|s| lines.num(s)).collect::<Result<Vec<usize>>>()?);
        let c: Vec<f64> = f[n + 1..].iter().map(|s| lines.num(s)).collect::<Result<_>>()?;
        coefficients.push(AffineCoefficients {
            offset: c[..m].to_vec(),
            linear: c[m..].chunks(n).map(<[f64]>::to_vec).collect(),
        });
    }
    let f = lines.tagged("jumps", 1)?;
    let nj: usize = lines.num(&f[0])?;
    let mut jump_pairs = Vec::with_capacity(nj);
    for _ in 0..nj {
        let f = lines.next_fields()?;
        if f.len() != 2 {
            return Err(lines.err("jump rows need 2 simplex indices"));
        }
        jump_pairs.push((lines.num(&f[0])?, lines.num(&f[1])?));
    }
    let mesh = SimplexMesh::new(n, vertices, simplices)?;
    Ok(MapFile {
        mesh,
        target_dim: m,
        coefficients,
        jump_pairs,
    })
}

pub fn write_map<W: Write>(file: &MapFile, mut w: W) -> Result<()> {
    let mesh = &file.mesh;
    writeln!(w, "pwaffine 1")?;
    writeln!(w, "dims {} {}", mesh.dim, file.target_dim)?;
    writeln!(w, "vertices {}", mesh.vertices.len())?;
    for v in &mesh.vertices {
        writeln!(w, "{}", join(v))?;
    }
    writeln!(w, "simplices {}", mesh.simplices.len())?;
    for (s, c) in mesh.simplices.iter().zip(&file.coefficients) {
        let idx: Vec<String> = s.iter().map(ToString::to_string).collect();
        let lin: Vec<f64> = c.linear.iter().flatten().copied().collect();
        writeln!(w, "{} {} {}", idx.join(" "), join(&c.offset), join(&lin))?;
    }
    writeln!(w, "jumps {}", file.jump_pairs.len())?;
    for (a, b) in &file.jump_pairs {
        writeln!(w, "{a} {b}")?;
    }
    Ok(())
}

fn join(v: &[f64]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}
