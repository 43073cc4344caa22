use std::f64::consts::{LN_2, PI};

use topsing_core::config::{dyadic_range, parse_eps, parse_measure, parse_real, ScanConfig, ScanMode};
use topsing_core::energy::f_eps;
use topsing_core::gamma::{
    run_compactness_scan, run_dirichlet_scan, run_limsup_scan, run_scan, write_scan_csv, CSV_HEADER,
};
use topsing_core::geometry::{Domain, Rect};
use topsing_core::grid_field::{make_recovery_field, BoundaryField, Grid};
use topsing_core::Error;

fn read(text: &str) -> topsing_core::Result<ScanConfig> {
    ScanConfig::read(text.as_bytes())
}

#[test]
fn config_text_round_trips() {
    let cfg = read(
        "# pair\nmode = compactness\ndomain = 0 0 1 1\nmargin = 2^-3\natom = 1@(0.3125,0.5)\n\
         atom = -1@(0.6875, 0.5)\neps = 2^-4..2^-6\ngrid_ratio = 12\nr_outer = 0.09375\n\
         seed = 9\ndipoles = 3\nflat_lattice = 32\ndetect = false\n",
    )
    .unwrap();
    assert_eq!(cfg.mode, ScanMode::Compactness);
    assert_eq!(cfg.eps, vec![0.0625, 0.03125, 0.015625]);
    assert_eq!(cfg.mu.len(), 2);
    assert_eq!(cfg.seed, Some(9));
    assert_eq!(cfg.grid_ratio, 12);
    assert!(!cfg.detect);
    assert_eq!(read(&cfg.to_text()).unwrap(), cfg);

    let d = read("mode = dirichlet\natom = 1@(0.5,0.5)\nboundary = winding 1 0.5 0.5 0.25\n").unwrap();
    assert_eq!(d.boundary.degree(), 1);
    assert_eq!(read(&d.to_text()).unwrap(), d);
}

#[test]
fn config_defaults() {
    let cfg = read("").unwrap();
    assert_eq!(cfg.mode, ScanMode::Recovery);
    assert_eq!(cfg.eps, dyadic_range(4, 10));
    assert_eq!(cfg.h(0.0625), 0.0625 / 8.0);
    assert_eq!(cfg.seed, None);
    assert!(cfg.mu.is_empty());
}

#[test]
fn config_errors_carry_line_numbers() {
    let line = |text: &str| match read(text) {
        Err(Error::Parse { line, .. }) => line,
        other => panic!("expected a parse error, got {other:?}"),
    };
    assert_eq!(line("mode = recovery\n\nflavour = 3\n"), 3);
    assert_eq!(line("mode = sideways\n"), 1);
    assert_eq!(line("# c\natom = 1@0.5,0.5\n"), 2);
    assert_eq!(line("eps = 2^-6..2^-4\n"), 1);
    assert_eq!(line("detect = maybe\n"), 1);
    assert_eq!(line("just words\n"), 1);
    assert_eq!(line("domain = 0 0 1\n"), 1);
}

#[test]
fn config_validation() {
    let invalid = |text: &str| matches!(read(text), Err(Error::InvalidInput(_)));
    assert!(invalid("eps = 0.01 0.02\n"));
    assert!(invalid("eps = 1.5\n"));
    assert!(invalid("grid_ratio = 6\n"));
    assert!(invalid("grid_ratio = 10\n"));
    assert!(invalid("mode = compactness\ndipoles = 2\n"));
    assert!(!invalid("mode = compactness\ndipoles = 2\nseed = 0\n"));
    assert!(invalid("r_outer = 0\n"));
    assert!(read("margin = 0.6\n").is_err());
}

#[test]
fn real_and_measure_parsing() {
    assert_eq!(parse_real("2^-3"), Some(0.125));
    assert_eq!(parse_real(" 0.5 "), Some(0.5));
    assert_eq!(parse_real("inf"), None);
    assert_eq!(parse_eps("2^-4..2^-10").unwrap().len(), 7);
    assert_eq!(parse_eps("0.1, 2^-5 0.01").unwrap(), vec![0.1, 0.03125, 0.01]);
    let mu = parse_measure("1@(0,0); -1@(0.25,2^-2)").unwrap();
    assert_eq!(mu.total_mass(), 0.0);
    assert_eq!(mu.atoms[1].point.x2, 0.25);
    assert!(parse_measure("1@(0,0").is_none());
    assert!(parse_measure("").unwrap().is_empty());
}

#[test]
fn zero_measure_scan_has_no_energy() {
    let cfg = read("eps = 2^-4..2^-6\nflat_lattice = 16\n").unwrap();
    let r = run_limsup_scan(&cfg).unwrap();
    assert_eq!(r.rows.len(), 3);
    for row in &r.rows {
        assert_eq!(row.f_eps, 0.0);
        assert_eq!(row.jump, 0.0);
        assert_eq!(row.flat_mu, Some(0.0));
        assert!(row.muhat.as_ref().unwrap().is_empty());
    }
    assert_eq!(r.checks.final_ratio_error, None);
}

#[test]
fn limsup_rejects_non_unit_weights() {
    let cfg = read("atom = 2@(0.5,0.5)\neps = 2^-4\n").unwrap();
    assert!(matches!(run_limsup_scan(&cfg), Err(Error::InvalidInput(_))));
}

#[test]
fn jump_length_is_half_eps_per_atom() {
    let outer = Rect::unit_square();
    let layouts = ["1@(0.5,0.5)", "1@(0.25,0.5);-1@(0.75,0.5)", "1@(0.25,0.5);-1@(0.5,0.5);1@(0.75,0.5)"];
    for (k, m) in layouts.iter().enumerate() {
        let mu = parse_measure(m).unwrap();
        for eps in dyadic_range(5, 8) {
            let g = Grid::covering(&outer, eps / 8.0).unwrap();
            let u = make_recovery_field(&mu, eps, 0.0625, g, Domain::with_margin(outer, 0.125).unwrap()).unwrap();
            let count = (k + 1) as f64;
            assert_eq!(u.jump_length(), count * eps / 2.0);
            assert_eq!(f_eps(&u, eps, None).unwrap().jump, count / 2.0);
        }
    }
}

/// `½∫_{ε<|x|<R} |∇ϑ|² = π log(R/ε)`: each halving of ε adds `π ln 2` per atom.
#[test]
fn dirichlet_energy_grows_by_pi_ln2_per_atom() {
    for (m, r_outer, atoms) in [("1@(0.5,0.5)", 0.125, 1.0), ("1@(0.3125,0.5)\natom = -1@(0.6875,0.5)", 0.09375, 2.0)] {
        let cfg = read(&format!("atom = {m}\nr_outer = {r_outer}\neps = 2^-5..2^-8\nflat_lattice = 0\ndetect = false\n")).unwrap();
        let r = run_limsup_scan(&cfg).unwrap();
        for w in r.rows.windows(2).skip(1) {
            let step = w[1].dirichlet - w[0].dirichlet;
            let exact = atoms * PI * LN_2;
            assert!((step - exact).abs() <= 0.02 * exact, "{m}: step {step} vs {exact}");
        }
        assert_eq!(r.checks.ratio_tail_decreasing, Some(true));
    }
}

#[test]
fn vortex_pair_ratio_trends_to_two_pi() {
    let cfg = read(
        "atom = 1@(0.3125,0.5)\natom = -1@(0.6875,0.5)\nr_outer = 0.09375\neps = 2^-4..2^-8\nflat_lattice = 32\n",
    )
    .unwrap();
    let r = run_limsup_scan(&cfg).unwrap();
    assert_eq!(r.target_variation, 2.0);
    let gaps: Vec<f64> = r.rows.iter().map(|row| row.ratio - 2.0 * PI).collect();
    assert!(gaps.iter().all(|&g| g > 0.0));
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    assert!(r.checks.weights_match.iter().all(|&m| m));
    assert_eq!(r.checks.liminf_holds, Some(true));
    assert_eq!(r.checks.flat_mu_decreased, Some(true));
}

#[test]
fn compactness_scan_recovers_the_vortex() {
    let cfg = read(
        "mode = compactness\natom = 1@(0.5,0.5)\neps = 2^-4..2^-7\nseed = 3\ndipoles = 2\nflat_lattice = 64\n",
    )
    .unwrap();
    let r = run_compactness_scan(&cfg).unwrap();
    assert!(r.rows.iter().any(|row| !row.noise.is_empty()));
    assert!(r.checks.weights_match.iter().all(|&m| m));
    assert_eq!(r.checks.flat_muhat_decreased, Some(true));
    assert_eq!(r.checks.flat_mu_decreased, Some(true));
    assert_eq!(r.checks.liminf_holds, Some(true));
    for row in &r.rows {
        assert_eq!(row.muhat_mass(), Some(1.0));
    }
}

#[test]
fn compactness_rows_are_reproducible() {
    let cfg = read("mode = compactness\natom = 1@(0.5,0.5)\neps = 2^-4..2^-5\nseed = 5\ndipoles = 2\nflat_lattice = 16\n").unwrap();
    let csv = |cfg: &ScanConfig| {
        let mut buf = Vec::new();
        write_scan_csv(&run_scan(cfg).unwrap(), &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    };
    let a = csv(&cfg);
    assert_eq!(a, csv(&cfg));
    assert_eq!(a.lines().next(), Some(CSV_HEADER));
    let other = ScanConfig { seed: Some(6), ..cfg };
    assert_ne!(a, csv(&other));
}

#[test]
fn dirichlet_scans_conserve_degree() {
    let cases = [
        ("", "constant 0.5", 0.125),
        ("atom = 1@(0.5,0.5)\n", "winding 1 0.5 0.5 0", 0.125),
        ("atom = 1@(0.3125,0.5)\natom = 1@(0.6875,0.5)\n", "winding 2 0.5 0.5 0", 0.09375),
    ];
    for (atoms, boundary, r_outer) in cases {
        let cfg = read(&format!(
            "mode = dirichlet\nmargin = 0.0625\n{atoms}boundary = {boundary}\nr_outer = {r_outer}\neps = 2^-4..2^-7\nflat_lattice = 0\n"
        ))
        .unwrap();
        let r = run_dirichlet_scan(&cfg).unwrap();
        assert_eq!(r.checks.degree_conserved, Some(true), "{boundary}");
        assert_eq!(r.rows.len(), 4);
    }
}

#[test]
fn dirichlet_scan_needs_matching_degree() {
    let mut cfg = read("mode = dirichlet\nmargin = 0.0625\natom = 1@(0.5,0.5)\nboundary = constant 0\n").unwrap();
    assert!(matches!(run_dirichlet_scan(&cfg), Err(Error::InvalidInput(_))));
    cfg.boundary = BoundaryField::Constant { phase: 0.0 };
    cfg.mu = parse_measure("").unwrap();
    assert!(run_dirichlet_scan(&ScanConfig { eps: vec![0.0625], ..cfg }).is_ok());
}
