use std::collections::BTreeMap;

use ginibre_flow::config::{Experiment, ExperimentConfig};
use ginibre_flow::experiments::{
    derive_seed, determinant_grid, execute, initial_determinant_forms, petermann_bin_theory,
};
use ginibre_flow::output::{fmt, Table};
use proptest::prelude::*;

fn config(e: Experiment, pairs: &[(&str, &str)]) -> ExperimentConfig {
    let raw: BTreeMap<String, String> = pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    ExperimentConfig::from_pairs(e, raw).unwrap()
}

fn header(t: &Table) -> String {
    let b = t.to_bytes().unwrap();
    String::from_utf8(b).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn table_schemas() {
    let cases = [
        (Experiment::Petermann, vec![("n", "12"), ("num_samples", "10")], "petermann.csv", "tau,abs_z,bin_lo,bin_hi,value,std_error,count,theory,excluded_samples"),
        (Experiment::Petermann, vec![("n", "12"), ("num_samples", "10")], "petermann_theory.csv", "tau,abs_z,value"),
        (Experiment::Greens, vec![("n", "12"), ("num_samples", "10")], "greens.csv", "tau,abs_z,re,im,std_error_re,std_error_im,theory_re,theory_im,exact_re,exact_im"),
        (Experiment::Edge, vec![("n", "50"), ("eta_points", "5")], "edge_tau_1.csv", "eta,value,reference_value,value_renormalized,exact_finite_n"),
        (Experiment::Density, vec![("n", "12"), ("num_samples", "10")], "density_tau_1.csv", "bin_lo,bin_hi,value,std_error,count,exact_finite_n"),
        (Experiment::Characteristics, vec![], "shock.csv", "tau,r"),
    ];
    for (e, pairs, file, want) in cases {
        let out = execute(&config(e, &pairs)).unwrap();
        let t = &out.tables.iter().find(|(n, _)| n == file).unwrap().1;
        assert_eq!(header(t), want, "{file}");
        assert!(!t.is_empty(), "{file}");
    }
}

#[test]
fn petermann_rows_cover_every_tau_and_radius() {
    let c = config(Experiment::Petermann, &[("n", "10"), ("num_samples", "8"), ("tau_grid", "0.5,1,2"), ("scale_abs_z", "true")]);
    let out = execute(&c).unwrap();
    let t = &out.tables[0].1;
    assert_eq!(t.len(), 9);
    assert_eq!(out.lineage.len(), 3);
    let seeds: Vec<u64> = out.lineage.iter().map(|l| l.stream_seed).collect();
    assert_eq!(seeds, vec![derive_seed(1, 0), derive_seed(1, 1), derive_seed(1, 2)]);
    assert_ne!(seeds[0], seeds[1]);
}

#[test]
fn bin_theory_is_the_annulus_average() {
    // <|z|^2> over the annulus [lo, hi) is (lo^2 + hi^2) / 2
    let (lo, hi, tau) = (0.3f64, 0.5f64, 1.0);
    let n = 100_000;
    let mut acc = 0.0;
    for k in 0..n {
        let s = lo * lo + (hi * hi - lo * lo) * (k as f64 + 0.5) / n as f64;
        acc += 1.0 - s / tau;
    }
    assert!((petermann_bin_theory(lo, hi, tau) - acc / n as f64).abs() < 1e-12);
    assert!(petermann_bin_theory(0.9, 1.1, 1.0).is_nan());
}

#[test]
fn initial_forms_on_the_grid() {
    let grid = determinant_grid();
    assert_eq!(grid.len(), 20);
    // at N = 2 the forms are s^2 and s^2 + |w|^2
    let p = &grid[0];
    let (d0, d1) = initial_determinant_forms(p, 2);
    let s = p.z.norm_sqr() + p.r * p.r;
    assert!((d0 - 2.0 * s.ln()).abs() < 1e-14);
    assert!((d1.exp() - (s * s + p.r * p.r)).abs() < 1e-12 * d1.exp());
}

#[test]
fn embedded_checks_pass_on_small_runs() {
    for (e, pairs) in [
        (Experiment::Characteristics, vec![]),
        (Experiment::VerifyBurgers, vec![]),
        (Experiment::DeterminantCheck, vec![("n", "8"), ("num_samples", "4000")]),
        (Experiment::Density, vec![("n", "20"), ("num_samples", "200")]),
        (Experiment::Greens, vec![("n", "20"), ("num_samples", "200")]),
    ] {
        let out = execute(&config(e, &pairs)).unwrap();
        assert!(!out.checks.is_empty());
        for c in &out.checks {
            assert!(c.passed, "{e}: {} = {} (tol {})", c.name, c.measured, c.tolerance);
        }
    }
}

proptest! {
    #[test]
    fn floats_round_trip_through_csv(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let back: f64 = fmt(x).parse().unwrap();
        prop_assert_eq!(back.to_bits(), x.to_bits());
    }

    #[test]
    fn tau_grid_override_parses(ts in proptest::collection::vec(0.01f64..10.0, 1..6)) {
        let list: Vec<String> = ts.iter().map(|t| fmt(*t)).collect();
        let c = config(Experiment::Density, &[("tau_grid", &list.join(","))]);
        prop_assert_eq!(c.tau_grid, ts);
    }

    #[test]
    fn derived_seeds_are_distinct(master in any::<u64>(), k in 1usize..1000) {
        prop_assert_ne!(derive_seed(master, 0), derive_seed(master, k));
        prop_assert_eq!(derive_seed(master, 0), master);
    }
}
