use std::f64::consts::{PI, TAU};

use proptest::prelude::*;
use topsing_core::geometry::{Domain, Point2, Rect};
use topsing_core::grid_field::{
    make_noisy_recovery_field, make_recovery_field, make_smooth_field, make_winding_field,
    read_field, write_field, Dipole, EdgeAxis, Grid, JumpEdge, S1Field,
};
use topsing_core::jacobian::degree_on_circle;
use topsing_core::measures::{Atom, AtomicMeasure};
use topsing_core::Error;

fn unit_domain() -> Domain {
    Domain::with_margin(Rect::unit_square(), 0.125).unwrap()
}

fn grid(h: f64) -> Grid {
    Grid::covering(&Rect::unit_square(), h).unwrap()
}

fn off_node_centre() -> Point2 {
    Point2::new(0.5 + 1.0 / 512.0, 0.5 - 1.0 / 1024.0)
}

fn frobenius(m: &[[f64; 2]; 2]) -> f64 {
    m.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

/// Winding of the sampled nodal angles on a circle, from wrapped increments.
fn wrapped_sum_degree(u: &S1Field, c: Point2, r: f64) -> i32 {
    let n = 4096;
    let mut total = 0.0;
    let mut prev: Option<f64> = None;
    for k in 0..=n {
        let t = TAU * k as f64 / n as f64;
        let p = c + Point2::new(t.cos(), t.sin()) * r;
        let v = u.sample(p).unwrap();
        let a = v[1].atan2(v[0]);
        if let Some(q) = prev {
            let mut d = a - q;
            while d > PI {
                d -= TAU;
            }
            while d <= -PI {
                d += TAU;
            }
            total += d;
        }
        prev = Some(a);
    }
    (total / TAU).round() as i32
}

#[test]
fn winding_zero_is_constant_without_jumps() {
    let u = make_winding_field(off_node_centre(), 0, grid(1.0 / 64.0), unit_domain()).unwrap();
    assert!(u.jumps().is_empty());
    assert!(u.theta().iter().all(|t| *t == 0.0));
}

#[test]
fn winding_degrees() {
    let c = off_node_centre();
    let u = make_winding_field(c, 1, grid(1.0 / 64.0), unit_domain()).unwrap();
    assert_eq!(degree_on_circle(&u, c, 0.25).unwrap(), 1);
    let u = make_winding_field(c, -2, grid(1.0 / 64.0), unit_domain()).unwrap();
    assert_eq!(wrapped_sum_degree(&u, c, 0.25), -2);
    assert_eq!(degree_on_circle(&u, c, 0.25).unwrap(), -2);
}

#[test]
fn winding_centre_on_node_is_rejected() {
    let g = grid(1.0 / 64.0);
    let err = make_winding_field(g.node(20, 30), 1, g, unit_domain()).unwrap_err();
    assert!(matches!(err, Error::InvalidInput(_)));
}

#[test]
fn recovery_jump_length_single_atom() {
    let mu = AtomicMeasure::dirac(Point2::new(0.5, 0.5));
    let u = make_recovery_field(&mu, 1.0 / 32.0, 0.2, grid(1.0 / 256.0), unit_domain()).unwrap();
    assert_eq!(u.jump_length(), 1.0 / 64.0);
}

#[test]
fn recovery_of_zero_measure_is_constant() {
    let u = make_recovery_field(&AtomicMeasure::zero(), 1.0 / 32.0, 0.2, grid(1.0 / 256.0), unit_domain())
        .unwrap();
    assert!(u.jumps().is_empty());
    assert_eq!(u.jump_length(), 0.0);
    assert!(u.gradient().iter().all(|m| frobenius(m) == 0.0));
}

fn three_atoms() -> Vec<Point2> {
    vec![
        Point2::new(0.3125, 0.3125),
        Point2::new(0.6875, 0.3125),
        Point2::new(0.5, 0.6875),
    ]
}

#[test]
fn recovery_jump_length_is_half_eps_per_atom() {
    let eps = 1.0 / 64.0;
    for count in 1..=3 {
        let atoms: Vec<Atom> = three_atoms()[..count]
            .iter()
            .enumerate()
            .map(|(k, p)| Atom::new(*p, if k == 1 { -1.0 } else { 1.0 }))
            .collect();
        let mu = AtomicMeasure::new(atoms);
        let u = make_recovery_field(&mu, eps, 1.0 / 16.0, grid(1.0 / 512.0), unit_domain()).unwrap();
        assert_eq!(u.jump_length(), count as f64 * eps / 2.0);
    }
}

#[test]
fn edges_sharing_an_endpoint_add_up() {
    let g = grid(1.0 / 32.0);
    let theta = vec![0.0; g.n_nodes()];
    let edge = |j| JumpEdge {
        axis: EdgeAxis::X,
        i: 15,
        j,
        theta_minus: 0.0,
        theta_plus: 1.0,
    };
    let u = S1Field::new(g, unit_domain(), theta, vec![edge(15), edge(16)]).unwrap();
    let (_, top) = u.jumps()[0].segment(&g);
    let (bottom, _) = u.jumps()[1].segment(&g);
    assert_eq!(top, bottom);
    assert_eq!(u.jump_length(), 2.0 * g.h);
}

#[test]
fn jump_outside_inner_rectangle_is_inadmissible() {
    let g = grid(1.0 / 32.0);
    let theta = vec![0.0; g.n_nodes()];
    let edge = JumpEdge {
        axis: EdgeAxis::X,
        i: 1,
        j: 16,
        theta_minus: 0.0,
        theta_plus: 1.0,
    };
    let err = S1Field::new(g, unit_domain(), theta, vec![edge]).unwrap_err();
    assert!(matches!(err, Error::Admissibility(_)));
}

#[test]
fn constant_field_gradient_vanishes() {
    let u = make_smooth_field(grid(1.0 / 32.0), unit_domain(), |_| 1.3).unwrap();
    assert!(u.gradient().iter().all(|m| frobenius(m) == 0.0));
}

#[test]
fn winding_gradient_is_inverse_distance() {
    let h = 1.0 / 256.0;
    let c = off_node_centre();
    let u = make_winding_field(c, 1, grid(h), unit_domain()).unwrap();
    let g = *u.grid();
    let grads = u.gradient();
    let r_outer = 0.4;
    let mut checked = 0;
    for cj in 0..g.ny - 1 {
        for ci in 0..g.nx - 1 {
            let r = g.cell_center(ci, cj).dist(c);
            if (10.0 * h..=r_outer / 2.0).contains(&r) {
                let got = frobenius(&grads[cj * (g.nx - 1) + ci]);
                assert!((got * r - 1.0).abs() < 0.05, "r = {r}: {got}");
                checked += 1;
            }
        }
    }
    assert!(checked > 1000);
}

#[test]
fn recovery_gradient_in_core_scales_like_inverse_eps() {
    let x0 = Point2::new(0.5, 0.5);
    let mut scaled = Vec::new();
    for eps in [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0] {
        let u = make_recovery_field(&AtomicMeasure::dirac(x0), eps, 0.2, grid(eps / 16.0), unit_domain()).unwrap();
        let g = *u.grid();
        let grads = u.gradient();
        let mut worst: f64 = 0.0;
        for cj in 0..g.ny - 1 {
            for ci in 0..g.nx - 1 {
                if g.cell_center(ci, cj).dist(x0) < eps {
                    worst = worst.max(frobenius(&grads[cj * (g.nx - 1) + ci]));
                }
            }
        }
        scaled.push(worst * eps);
    }
    // |∇u| ≤ C/ε with one C for all ε
    let c = scaled.iter().cloned().fold(0.0, f64::max);
    assert!(c < 20.0, "{scaled:?}");
    assert!(scaled.iter().all(|s| *s > 0.8 * c), "{scaled:?}");
}

#[test]
fn gradient_is_traversal_order_independent() {
    let mu = AtomicMeasure::new(vec![
        Atom::new(Point2::new(0.3125, 0.5), 1.0),
        Atom::new(Point2::new(0.6875, 0.5), -1.0),
    ]);
    let u = make_recovery_field(&mu, 1.0 / 32.0, 1.0 / 16.0, grid(1.0 / 256.0), unit_domain()).unwrap();
    let g = *u.grid();
    let row = u.gradient();
    let mut col = vec![[[f64::NAN; 2]; 2]; g.n_cells()];
    u.for_each_cell_column_major(|i, j, m| col[j * (g.nx - 1) + i] = m.mean_grad());
    assert!(row.iter().zip(&col).all(|(a, b)| a == b));
}

#[test]
fn dump_round_trip_is_exact() {
    let mu = AtomicMeasure::dirac(Point2::new(0.5, 0.5));
    let u = make_recovery_field(&mu, 1.0 / 16.0, 0.2, grid(1.0 / 128.0), unit_domain()).unwrap();
    let mut buf = Vec::new();
    write_field(&u, &mut buf).unwrap();
    let v = read_field(&buf[..]).unwrap();
    assert_eq!(u.theta(), v.theta());
    assert_eq!(u.jumps(), v.jumps());
    assert_eq!(u.grid(), v.grid());
    assert!(read_field(&b"s1field 2\n"[..]).is_err());
}

fn arb_layout() -> impl Strategy<Value = (Vec<(u8, u8, bool)>, u8)> {
    (
        prop::collection::vec((0u8..3, 0u8..3, any::<bool>()), 0..4),
        0u8..2,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Every constructed field keeps its jump set inside the closed inner rectangle.
    #[test]
    fn constructed_jumps_stay_in_inner_rectangle((slots, noise) in arb_layout()) {
        let mut atoms: Vec<Atom> = Vec::new();
        for (a, b, sign) in slots {
            let p = Point2::new(0.25 + 0.25 * f64::from(a), 0.25 + 0.25 * f64::from(b));
            if atoms.iter().all(|x| x.point != p) {
                atoms.push(Atom::new(p, if sign { 1.0 } else { -1.0 }));
            }
        }
        let mu = AtomicMeasure::new(atoms);
        let eps = 1.0 / 64.0;
        let dipoles: Vec<Dipole> = (0..noise)
            .map(|k| Dipole {
                plus: Point2::new(0.375 + 1.0 / 512.0 * f64::from(k), 0.125 + 0.0625),
                minus: Point2::new(0.375 + 5.0 / 512.0 + 1.0 / 512.0 * f64::from(k), 0.125 + 0.0625),
            })
            .collect();
        let domain = Domain::with_margin(Rect::unit_square(), 0.0625).unwrap();
        let u = make_noisy_recovery_field(&mu, &dipoles[..usize::from(noise)], eps, 1.0 / 16.0, grid(1.0 / 512.0), domain);
        let u = u.unwrap();
        for e in u.jumps() {
            let (a, b) = e.segment(u.grid());
            prop_assert!(domain.inner.contains(a) && domain.inner.contains(b));
        }
    }
}
