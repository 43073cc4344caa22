//! Plain-text field dump.
//!
//! ```text
//! s1field 1
//! grid <origin_x1> <origin_x2> <h> <nx> <ny>
//! outer <x0> <y0> <x1> <y1>
//! inner <x0> <y0> <x1> <y1>
//! theta <nx*ny>
//! <one lifted angle per line, row-major: index = j*nx + i>
//! jumps <count>
//! <X|Y> <i> <j> <theta_minus> <theta_plus>
//! ```
//! Floats are written in shortest round-trip form, so a dump reloads bit-exactly.

use std::io::{BufRead, Write};

use super::{EdgeAxis, Grid, JumpEdge, S1Field};
use crate::error::Result;
use crate::text::Lines;
use crate::geometry::{Domain, Point2, Rect};

pub fn write_field<W: Write>(u: &S1Field, mut w: W) -> Result<()> {
    let g = u.grid();
    let d = u.domain();
    writeln!(w, "s1field 1")?;
    writeln!(w, "grid {} {} {} {} {}", g.origin.x1, g.origin.x2, g.h, g.nx, g.ny)?;
    for (tag, r) in [("outer", d.outer), ("inner", d.inner)] {
        writeln!(w, "{tag} {} {} {} {}", r.min.x1, r.min.x2, r.max.x1, r.max.x2)?;
    }
    writeln!(w, "theta {}", u.theta().len())?;
    for t in u.theta() {
        writeln!(w, "{t}")?;
    }
    writeln!(w, "jumps {}", u.jumps().len())?;
    for e in u.jumps() {
        let axis = match e.axis {
            EdgeAxis::X => "X",
            EdgeAxis::Y => "Y",
        };
        writeln!(w, "{axis} {} {} {} {}", e.i, e.j, e.theta_minus, e.theta_plus)?;
    }
    Ok(())
}

pub fn read_field<R: BufRead>(r: R) -> Result<S1Field> {
    let mut lines = Lines::new(r);
    let head = lines.next_fields()?;
    if head != ["s1field", "1"] {
        return Err(lines.err("missing `s1field 1` header"));
    }
    let g = lines.tagged("grid", 5)?;
    let grid = Grid::new(
        Point2::new(lines.num(&g[0])?, lines.num(&g[1])?),
        lines.num(&g[2])?,
        lines.num(&g[3])?,
        lines.num(&g[4])?,
    )?;
    let mut rects = Vec::new();
    for tag in ["outer", "inner"] {
        let v = lines.tagged(tag, 4)?;
        let c: Vec<f64> = v.iter().map(|s| lines.num(s)).collect::<Result<_>>()?;
        rects.push(Rect::new(c[0], c[1], c[2], c[3])?);
    }
    let domain = Domain::new(rects[0], rects[1])?;
    let f = lines.tagged("theta", 1)?;
    let n: usize = lines.num(&f[0])?;
    let mut theta = Vec::with_capacity(n);
    for _ in 0..n {
        let f = lines.next_fields()?;
        theta.push(lines.num(&f[0])?);
    }
    let f = lines.tagged("jumps", 1)?;
    let m: usize = lines.num(&f[0])?;
    let mut jumps = Vec::with_capacity(m);
    for _ in 0..m {
        let f = lines.next_fields()?;
        if f.len() != 5 {
            return Err(lines.err("jump rows need 5 fields"));
        }
        let axis = match f[0].as_str() {
            "X" => EdgeAxis::X,
            "Y" => EdgeAxis::Y,
            other => return Err(lines.err(format!("unknown edge axis `{other}`"))),
        };
        jumps.push(JumpEdge {
            axis,
            i: lines.num(&f[1])?,
            j: lines.num(&f[2])?,
            theta_minus: lines.num(&f[3])?,
            theta_plus: lines.num(&f[4])?,
        });
    }
    S1Field::new(grid, domain, theta, jumps)
}
