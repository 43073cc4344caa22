mod common;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use topsing_core::lifting::{
    boundary_apply, check_property_p, flat_bound_boundary, graded_power_map, lambda_mass, lifted_abs_mass,
    minimal_lifting_pairing, minor_apply, nu_pairing, read_map, variation, write_map, AffineCoefficients, MapFile,
    MultiIndexPair, PwAffineMap, SimplexMesh,
};
use topsing_core::Error;

use common::{centroid, duffy_integral, one_jump_map, piece_gradient, rect_mesh, unit_square_affine};

#[test]
fn smooth_map_with_spatial_test_reduces_to_gradient_integral() {
    let u = unit_square_affine([[2.0, -1.0], [0.5, 3.0]], [0.1, -0.2]);
    // ∫ (1 + x + y²) over the unit square = 1 + 1/2 + 1/3
    let phi = |x: &[f64], _: &[f64]| 1.0 + x[0] + x[1] * x[1];
    let got = minimal_lifting_pairing(&u, &phi, 0, 1).unwrap();
    assert_abs_diff_eq!(got, -(1.0 + 0.5 + 1.0 / 3.0), epsilon = 1e-12);
    let got = minimal_lifting_pairing(&u, &phi, 1, 0).unwrap();
    assert_abs_diff_eq!(got, 0.5 * (1.0 + 0.5 + 1.0 / 3.0), epsilon = 1e-12);
}

#[test]
fn zero_test_function_pairs_to_zero() {
    let u = one_jump_map(&[1.0, -2.0], &[3.0, 0.5]);
    assert_eq!(minimal_lifting_pairing(&u, &|_, _| 0.0, 0, 0).unwrap(), 0.0);
}

#[test]
fn one_jump_pairings_match_hand_integration() {
    let (a, b) = ([1.0, -2.0, 0.25], [3.0, 0.5, -1.5]);
    let u = one_jump_map(&a, &b);
    assert_eq!(u.jumps().len(), 2);
    // ψ = 1 + x₂ + x₁x₂² restricted to {x₁ = 0} integrates to 2 over x₂ ∈ (−1, 1)
    let psi = |x: &[f64]| 1.0 + x[1] + x[0] * x[1] * x[1];
    for i in 0..3 {
        for h in 0..3 {
            let expected = 2.0 * 0.5 * (a[h] + b[h]) * (b[i] - a[i]);
            let nu = nu_pairing(&u, &psi, i, h, 0).unwrap();
            assert!((nu - expected).abs() < 1e-10, "i={i} h={h}: {nu} vs {expected}");
            let lifted = minimal_lifting_pairing(&u, &|x, y| psi(x) * y[h], i, 0).unwrap();
            assert!((lifted - expected).abs() < 1e-10);
            // ψ ≡ 1: (a^h + b^h)/2 (b^i − a^i) ν₁ H¹(S_u), with H¹(S_u) = 2
            let flat = nu_pairing(&u, &|_| 1.0, i, h, 0).unwrap();
            assert!((flat - expected).abs() < 1e-10);
            // the jump is normal to e₁, so D₂ u vanishes
            assert_eq!(nu_pairing(&u, &psi, i, h, 1).unwrap(), 0.0);
        }
    }
    // quadratic in y: ∫₀¹ (θb + (1−θ)a)² dθ = (a² + ab + b²)/3
    let expected = 2.0 * (a[1] * a[1] + a[1] * b[1] + b[1] * b[1]) / 3.0 * (b[0] - a[0]);
    let got = minimal_lifting_pairing(&u, &|x, y| psi(x) * y[1] * y[1], 0, 0).unwrap();
    assert!((got - expected).abs() < 1e-10);
}

#[test]
fn constant_map_has_zero_nu() {
    let u = one_jump_map(&[0.7, -0.3], &[0.7, -0.3]);
    assert!(u.jumps().is_empty());
    assert_eq!(nu_pairing(&u, &|x| x[0].exp(), 0, 1, 0).unwrap(), 0.0);
    assert_eq!(variation(&u, 0, 0).unwrap(), 0.0);
}

#[test]
fn continuous_map_nu_matches_dense_quadrature() {
    let mesh = SimplexMesh::kuhn_cube(2, 4, 0.0, 1.0).unwrap();
    let nodal: Vec<Vec<f64>> = mesh
        .vertices
        .iter()
        .map(|x| vec![(x[0] * x[1]).sin() + x[0] * x[0], (2.0 * x[1]).cos() - x[0]])
        .collect();
    let u = PwAffineMap::continuous(&mesh, 2, &nodal).unwrap();
    assert!(u.jumps().is_empty());
    let psi = |x: &[f64]| (x[0] - 0.3).exp() * (1.0 + x[1]);
    for (i, h, j) in [(0, 1, 0), (1, 0, 1), (0, 0, 1)] {
        let mut oracle = 0.0;
        for s in &mesh.simplices {
            let pts: Vec<Vec<f64>> = s.iter().map(|&v| mesh.vertices[v].clone()).collect();
            let vals: Vec<Vec<f64>> = s.iter().map(|&v| nodal[v].clone()).collect();
            let g = piece_gradient(&pts, &vals, i)[j];
            let gh = piece_gradient(&pts, &vals, h);
            let uh = |x: &[f64]| vals[0][h] + gh[0] * (x[0] - pts[0][0]) + gh[1] * (x[1] - pts[0][1]);
            oracle += g * duffy_integral(&pts, &|x| psi(x) * uh(x));
        }
        let got = nu_pairing(&u, &psi, i, h, j).unwrap();
        assert!((got - oracle).abs() < 1e-10, "{got} vs {oracle}");
    }
}

fn arb_jump_map() -> impl Strategy<Value = PwAffineMap> {
    (any::<u64>(), 2usize..4).prop_map(|(seed, m)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mesh = SimplexMesh::kuhn_cube(2, 2, -1.0, 1.0).unwrap();
        let coefficients: Vec<AffineCoefficients> = (0..mesh.simplices.len())
            .map(|_| AffineCoefficients {
                offset: (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                linear: (0..m).map(|_| (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect(),
            })
            .collect();
        PwAffineMap::from_affine(&mesh, m, &coefficients).unwrap()
    })
}

/// Sampled `sup |φ| + Lip φ` on a fine lattice of `[lo, hi]²`.
fn sampled_c01_norm(phi: &dyn Fn(&[f64]) -> f64, grad: &dyn Fn(&[f64]) -> Vec<f64>, lo: f64, hi: f64) -> f64 {
    let n = 200;
    let (mut sup, mut lip): (f64, f64) = (0.0, 0.0);
    for a in 0..=n {
        for b in 0..=n {
            let x = [lo + (hi - lo) * a as f64 / n as f64, lo + (hi - lo) * b as f64 / n as f64];
            sup = sup.max(phi(&x).abs());
            let g = grad(&x);
            lip = lip.max((g[0] * g[0] + g[1] * g[1]).sqrt());
        }
    }
    sup + lip
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// ν pairing equals the lifting paired with ψ(x) y^h.
    #[test]
    fn nu_is_lifting_against_linear_y(u in arb_jump_map(), h in 0usize..2, i in 0usize..2, j in 0usize..2) {
        let psi = |x: &[f64]| 1.0 + x[0] - 0.5 * x[1] * x[0] + x[1] * x[1];
        let nu = nu_pairing(&u, &psi, i, h, j).unwrap();
        let lifted = minimal_lifting_pairing(&u, &|x, y| psi(x) * y[h], i, j).unwrap();
        prop_assert!((nu - lifted).abs() <= 1e-10 * (1.0 + nu.abs()), "{} vs {}", nu, lifted);
    }

    /// The lifting pairing is linear in φ and bounded by ‖φ‖_∞ |D_j u^i|(Ω).
    #[test]
    fn lifting_is_linear_and_bounded(u in arb_jump_map(), c in -3.0f64..3.0) {
        let f = |x: &[f64], y: &[f64]| (x[0] + y[0]).sin();
        let g = |x: &[f64], y: &[f64]| (x[1] * y[1]).cos();
        let lhs = minimal_lifting_pairing(&u, &|x, y| f(x, y) + c * g(x, y), 0, 1).unwrap();
        let rhs = minimal_lifting_pairing(&u, &f, 0, 1).unwrap() + c * minimal_lifting_pairing(&u, &g, 0, 1).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        let bound = variation(&u, 0, 1).unwrap();
        prop_assert!(minimal_lifting_pairing(&u, &f, 0, 1).unwrap().abs() <= bound * (1.0 + 1e-12));
    }

    /// Every sampled minor stays within the flat bound times the C^{0,1} norm.
    #[test]
    fn minor_within_flat_bound(u in arb_jump_map(), cx in -0.5f64..0.5, cy in -0.5f64..0.5, k in 1.0f64..4.0) {
        let pair = MultiIndexPair::new([0, 1], [0, 1], u.target_dim(), 2).unwrap();
        let phi = |x: &[f64]| (1.0 - x[0] * x[0]) * (1.0 - x[1] * x[1]) * (k * (x[0] - cx) + x[1] * cy).sin();
        let grad = |x: &[f64]| {
            let (bx, by) = (1.0 - x[0] * x[0], 1.0 - x[1] * x[1]);
            let arg = k * (x[0] - cx) + x[1] * cy;
            vec![
                -2.0 * x[0] * by * arg.sin() + bx * by * k * arg.cos(),
                -2.0 * x[1] * bx * arg.sin() + bx * by * cy * arg.cos(),
            ]
        };
        let value = minor_apply(&u, &pair, &grad).unwrap();
        let bound = flat_bound_boundary(&u, &pair).unwrap();
        prop_assert!(value.abs() <= bound * sampled_c01_norm(&phi, &grad, -1.0, 1.0) + 1e-12, "{} vs {}", value, bound);
    }
}

#[test]
fn truncation_above_sup_is_identity() {
    let u = one_jump_map(&[3.0, -1.0], &[-2.0, 0.5]);
    assert_eq!(u.sup_norm(), 3.0);
    assert_eq!(u.truncate(5.0).unwrap(), u);
    assert!(matches!(u.truncate(0.0), Err(Error::InvalidInput(_))));
}

#[test]
fn truncated_ramp_is_clamped_at_half() {
    // u¹ = 2x₁, u² = x₂ on the unit square
    let u = unit_square_affine([[2.0, 0.0], [0.0, 1.0]], [0.0, 0.0]);
    let t = u.truncate(1.0).unwrap();
    assert!(t.jumps().is_empty());
    for p in t.pieces() {
        let slope = p.gradient()[0][0];
        if slope.abs() > 1e-12 {
            assert_abs_diff_eq!(slope, 2.0, epsilon = 1e-12);
            assert!(p.vertices.iter().all(|v| v[0] <= 0.5 + 1e-15));
        } else {
            assert!(p.values.iter().all(|v| v[0] == 1.0));
        }
    }
    assert_abs_diff_eq!(variation(&t, 0, 0).unwrap(), 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(variation(&t, 1, 1).unwrap(), 1.0, epsilon = 1e-12);
}

/// Ring-0 contribution `∫|u^h| |∂_j u^i|` of the graded map, from its nodal values.
fn ring_mass(u: &PwAffineMap, h: usize, i: usize, j: usize) -> f64 {
    u.pieces()
        .iter()
        .filter(|p| p.vertices.iter().all(|v| v[0].abs().max(v[1].abs()) >= 0.5 - 1e-15))
        .map(|p| {
            let area = 0.5
                * ((p.vertices[1][0] - p.vertices[0][0]) * (p.vertices[2][1] - p.vertices[0][1])
                    - (p.vertices[2][0] - p.vertices[0][0]) * (p.vertices[1][1] - p.vertices[0][1]))
                    .abs();
            let mean = p.values.iter().map(|v| v[h]).sum::<f64>() / 3.0;
            area * mean.abs() * piece_gradient(&p.vertices, &p.values, i)[j].abs()
        })
        .sum()
}

#[test]
fn truncation_masses_increase_to_the_unbounded_limit() {
    let beta = 0.25;
    let u = graded_power_map(beta, 60).unwrap();
    assert!(u.sup_norm() >= 2f64.powf(60.0 * beta) * (1.0 - 1e-12));
    let (h, i, j) = (0, 1, 0);
    // self-similar rings: ring k carries 2^{−k(1−2β)} times ring 0
    let ratio = 2f64.powf(-(1.0 - 2.0 * beta));
    let limit = ring_mass(&u, h, i, j) / (1.0 - ratio);
    let mut previous = 0.0;
    let mut last = 0.0;
    for k in 0..=64 {
        let level = 2f64.powf(0.25 * k as f64);
        let mass = lifted_abs_mass(&u.truncate(level).unwrap(), h, i, j).unwrap();
        assert!(mass >= previous - 1e-12, "level {level}: {mass} < {previous}");
        previous = mass;
        last = mass;
    }
    assert!((last - limit).abs() < 1e-6, "{last} vs {limit}");
    let direct = lifted_abs_mass(&u, h, i, j).unwrap();
    assert!((direct - limit).abs() < 1e-6);
}

#[test]
fn property_p_on_graded_maps() {
    let pair = MultiIndexPair::new([0, 1], [0, 1], 2, 2).unwrap();
    let values: Vec<f64> = [10, 20, 40]
        .iter()
        .map(|&k| check_property_p(&graded_power_map(0.25, k).unwrap(), &pair).unwrap())
        .map(|p| {
            assert!(p.holds);
            p.value
        })
        .collect();
    // converging series for β < 1/2
    assert!((values[2] - values[1]).abs() < 0.05 * (values[1] - values[0]).abs());
    // β > 1/2: the masses grow geometrically with depth
    let shallow = check_property_p(&graded_power_map(0.75, 10).unwrap(), &pair).unwrap().value;
    let deep = check_property_p(&graded_power_map(0.75, 30).unwrap(), &pair).unwrap().value;
    assert!(deep > 10.0 * shallow);
}

#[test]
fn property_p_on_bounded_map_is_bounded_by_sup_times_variation() {
    let u = one_jump_map(&[1.0, -2.0], &[3.0, 0.5]);
    let pair = MultiIndexPair::new([0, 1], [0, 1], 2, 2).unwrap();
    let p = check_property_p(&u, &pair).unwrap();
    assert!(p.holds);
    let cap = u.sup_norm() * (0..2).map(|j| variation(&u, 0, j).unwrap() + variation(&u, 1, j).unwrap()).sum::<f64>();
    assert!(p.value <= cap);
    // closed form: ∫₀¹|(ū^θ)^h| dθ |[u^i]| H¹, both traces of each component one-signed or not
    let seg = |a: f64, b: f64| if a * b >= 0.0 { 0.5 * (a + b).abs() } else { 0.5 * (a * a + b * b) / (b - a).abs() };
    let expected = 2.0 * (seg(1.0, 3.0) * 2.5 + seg(-2.0, 0.5) * 2.0);
    assert_abs_diff_eq!(p.value, expected, epsilon = 1e-12);
}

#[test]
fn identity_minor_is_the_integral() {
    let u = unit_square_affine([[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0]);
    let pair = MultiIndexPair::new([0, 1], [0, 1], 2, 2).unwrap();
    // φ = x(1−x)(1+x) y(1−y), ∫ φ = 1/4 · 1/6
    let grad = |x: &[f64]| {
        let (px, py) = (x[0] * (1.0 - x[0]) * (1.0 + x[0]), x[1] * (1.0 - x[1]));
        vec![(1.0 - 3.0 * x[0] * x[0]) * py, px * (1.0 - 2.0 * x[1])]
    };
    assert_abs_diff_eq!(minor_apply(&u, &pair, &grad).unwrap(), 1.0 / 24.0, epsilon = 1e-12);
    let scaled = unit_square_affine([[2.0, 0.0], [0.0, 3.0]], [0.5, -1.0]);
    assert_abs_diff_eq!(minor_apply(&scaled, &pair, &grad).unwrap(), 6.0 / 24.0, epsilon = 1e-12);
    // flat bound |λ₁| + |λ₂| = 1/4 + 1/4 for the identity
    assert_abs_diff_eq!(flat_bound_boundary(&u, &pair).unwrap(), 0.5, epsilon = 1e-12);
}

#[test]
fn identity_flat_bound_dominates_sampled_integrals() {
    let u = unit_square_affine([[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0]);
    let pair = MultiIndexPair::new([0, 1], [0, 1], 2, 2).unwrap();
    let bound = flat_bound_boundary(&u, &pair).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let pi = std::f64::consts::PI;
    for _ in 0..20 {
        let (a, b) = (rng.gen_range(1..4) as f64, rng.gen_range(1..4) as f64);
        let amp: f64 = rng.gen_range(-1.0..1.0);
        let raw = |x: &[f64]| amp * (a * pi * x[0]).sin() * (b * pi * x[1]).sin();
        let raw_grad = |x: &[f64]| {
            vec![
                amp * a * pi * (a * pi * x[0]).cos() * (b * pi * x[1]).sin(),
                amp * b * pi * (a * pi * x[0]).sin() * (b * pi * x[1]).cos(),
            ]
        };
        let norm = sampled_c01_norm(&raw, &raw_grad, 0.0, 1.0);
        let grad = |x: &[f64]| raw_grad(x).into_iter().map(|g| g / norm).collect();
        let minor = minor_apply(&u, &pair, &grad).unwrap();
        // ∫ φ over the unit square for the unit-norm φ
        let integral = amp / norm * (1.0 - (a * pi).cos()) / (a * pi) * (1.0 - (b * pi).cos()) / (b * pi);
        assert!((minor - integral).abs() < 1e-9, "{minor} vs {integral}");
        assert!(integral.abs() <= bound);
    }
}

#[test]
fn three_dimensional_minor_matches_subdeterminant_quadrature() {
    let mesh = SimplexMesh::kuhn_cube(3, 2, 0.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let nodal: Vec<Vec<f64>> = mesh
        .vertices
        .iter()
        .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let u = PwAffineMap::continuous(&mesh, 3, &nodal).unwrap();
    let phi = |x: &[f64]| x.iter().map(|t| t * (1.0 - t)).product::<f64>() * (1.0 + x[0] - x[2]);
    let grad = |x: &[f64]| {
        let b: Vec<f64> = x.iter().map(|t| t * (1.0 - t)).collect();
        let db: Vec<f64> = x.iter().map(|t| 1.0 - 2.0 * t).collect();
        let lin = 1.0 + x[0] - x[2];
        vec![
            db[0] * b[1] * b[2] * lin + b[0] * b[1] * b[2],
            b[0] * db[1] * b[2] * lin,
            b[0] * b[1] * db[2] * lin - b[0] * b[1] * b[2],
        ]
    };
    let pair = MultiIndexPair::new([0, 2], [1, 2], 3, 3).unwrap();
    assert_eq!(pair.sign(), -1.0);
    let mut oracle = 0.0;
    for s in &mesh.simplices {
        let pts: Vec<Vec<f64>> = s.iter().map(|&v| mesh.vertices[v].clone()).collect();
        let vals: Vec<Vec<f64>> = s.iter().map(|&v| nodal[v].clone()).collect();
        let (gi, gk) = (piece_gradient(&pts, &vals, 0), piece_gradient(&pts, &vals, 2));
        let det = gi[1] * gk[2] - gi[2] * gk[1];
        oracle += det * duffy_integral(&pts, &phi);
    }
    let minor = minor_apply(&u, &pair, &grad).unwrap();
    assert!((minor - oracle).abs() < 1e-10, "{minor} vs {oracle}");
    assert_abs_diff_eq!(boundary_apply(&u, &pair, &grad).unwrap(), -minor, epsilon = 0.0);
    // swapping the row order flips both the minor and σ
    let swapped = MultiIndexPair::new([2, 0], [1, 2], 3, 3).unwrap();
    assert_eq!(swapped.sign(), 1.0);
    assert!((minor_apply(&u, &swapped, &grad).unwrap() + minor).abs() < 1e-12);
}

#[test]
fn pure_jump_flat_bound_has_closed_form() {
    let (a, b) = ([1.0, -2.0], [3.0, 0.5]);
    let u = one_jump_map(&a, &b);
    let pair = MultiIndexPair::new([0, 1], [0, 1], 2, 2).unwrap();
    // ½|ū^i [u^k] − ū^k [u^i]| over a unit normal along x₂ ∈ (−1, 1)
    let density = 0.5 * (a[0] * b[1] - b[0] * a[1]).abs();
    assert_abs_diff_eq!(lambda_mass(&u, [0, 1], 0).unwrap(), 2.0 * density, epsilon = 1e-12);
    assert_eq!(lambda_mass(&u, [0, 1], 1).unwrap(), 0.0);
    assert_abs_diff_eq!(flat_bound_boundary(&u, &pair).unwrap(), 2.0 * density, epsilon = 1e-12);
    let constant = one_jump_map(&a, &a);
    assert_eq!(flat_bound_boundary(&constant, &pair).unwrap(), 0.0);
}

#[test]
fn quadratic_jump_density_mass_is_resolved() {
    // traces changing sign along the face: ½|u⁻^1 u⁺^2 − u⁺^1 u⁻^2| = ½|x₂| · |x₂ − 0.3|
    let mesh = rect_mesh(&[-1.0, 0.0, 1.0], &[-1.0, 0.0, 1.0]);
    let values = (0..mesh.simplices.len())
        .map(|s| {
            let left = centroid(&mesh, s)[0] < 0.0;
            mesh.simplices[s]
                .iter()
                .map(|&v| {
                    let y = mesh.vertices[v][1];
                    if left {
                        vec![y, 0.0]
                    } else {
                        vec![0.0, y - 0.3]
                    }
                })
                .collect()
        })
        .collect();
    let u = PwAffineMap::from_mesh(&mesh, 2, values).unwrap();
    let got = lambda_mass(&u, [0, 1], 0).unwrap();
    // ∫_{−1}^{1} ½|y (y − 0.3)| dy, split at 0 and 0.3
    let f = |y: f64| y * y * y / 3.0 - 0.15 * y * y;
    let exact = 0.5 * ((f(0.0) - f(-1.0)) - (f(0.3) - f(0.0)) + (f(1.0) - f(0.3)));
    assert!((got - exact).abs() < 1e-9, "{got} vs {exact}");
}

#[test]
fn mollified_ramps_converge_to_the_jump_value() {
    let (a, b) = ([1.0, -0.5], [-0.5, 2.0]);
    let psi = |x: &[f64]| (0.7 * x[0]).exp() * (1.5 * x[1]).cos();
    let jump = one_jump_map(&a, &b);
    let target = nu_pairing(&jump, &psi, 1, 0, 0).unwrap();
    let total = variation(&jump, 1, 0).unwrap();
    let ys: Vec<f64> = (0..=8).map(|k| -1.0 + 0.25 * k as f64).collect();
    let mut errors = Vec::new();
    for k in 1..=6 {
        let delta = 0.5f64.powi(k);
        let mesh = rect_mesh(&[-1.0, -delta / 2.0, delta / 2.0, 1.0], &ys);
        let nodal: Vec<Vec<f64>> = mesh
            .vertices
            .iter()
            .map(|x| {
                let t = ((x[0] + delta / 2.0) / delta).clamp(0.0, 1.0);
                (0..2).map(|c| a[c] + t * (b[c] - a[c])).collect()
            })
            .collect();
        let v = PwAffineMap::continuous(&mesh, 2, &nodal).unwrap();
        // strict convergence: same total variation
        assert_abs_diff_eq!(variation(&v, 1, 0).unwrap(), total, epsilon = 1e-12);
        errors.push((nu_pairing(&v, &psi, 1, 0, 0).unwrap() - target).abs());
    }
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    assert!(errors[errors.len() - 1] < errors[0] / 10.0, "{errors:?}");
}

#[test]
fn multi_index_signs() {
    assert_eq!(MultiIndexPair::new([0, 1], [0, 1], 2, 2).unwrap().sign(), 1.0);
    assert_eq!(MultiIndexPair::new([1, 0], [0, 1], 2, 2).unwrap().sign(), -1.0);
    assert_eq!(MultiIndexPair::new([0, 2], [0, 1], 3, 2).unwrap().sign(), -1.0);
    assert!(MultiIndexPair::new([1, 1], [0, 1], 2, 2).is_err());
    assert!(MultiIndexPair::new([0, 1], [0, 2], 2, 2).is_err());
}

#[test]
fn degenerate_and_non_manifold_meshes_are_rejected() {
    let flat = SimplexMesh::new(2, vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0]], vec![vec![0, 1, 2]]);
    assert!(matches!(flat, Err(Error::InvalidInput(_))));
    let fan = SimplexMesh::new(
        2,
        vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0], vec![1.0, 1.0]],
        vec![vec![0, 1, 2], vec![0, 1, 3], vec![0, 1, 4]],
    )
    .unwrap();
    let vals = vec![vec![vec![0.0, 0.0]; 3], vec![vec![1.0, 0.0]; 3], vec![vec![2.0, 0.0]; 3]];
    assert!(matches!(PwAffineMap::from_mesh(&fan, 2, vals), Err(Error::InvalidInput(_))));
}

#[test]
fn map_file_round_trip_and_jump_table_check() {
    let mesh = rect_mesh(&[-1.0, 0.0, 1.0], &[0.0, 1.0]);
    let coefficients: Vec<AffineCoefficients> = (0..mesh.simplices.len())
        .map(|s| AffineCoefficients {
            offset: if centroid(&mesh, s)[0] < 0.0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] },
            linear: vec![vec![0.5, 0.0], vec![0.0, -0.25]],
        })
        .collect();
    // simplex 0 (left, lower) meets simplex 3 (right, upper) along x₁ = 0
    let file = MapFile {
        mesh,
        target_dim: 2,
        coefficients,
        jump_pairs: vec![(3, 0)],
    };
    let u = file.build().unwrap();
    assert_eq!(u.jumps().len(), 1);
    let mut buf = Vec::new();
    write_map(&file, &mut buf).unwrap();
    let back = read_map(&buf[..]).unwrap();
    assert_eq!(back, file);
    assert_eq!(back.build().unwrap(), u);
    let mut wrong = file.clone();
    wrong.jump_pairs.clear();
    assert!(matches!(wrong.build(), Err(Error::InvalidInput(_))));
    let text = String::from_utf8(buf).unwrap().replace("dims 2 2", "dims 2 x");
    assert!(matches!(read_map(text.as_bytes()), Err(Error::Parse { .. })));
}
