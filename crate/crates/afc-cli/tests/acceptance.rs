//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with the measured numbers (run with --nocapture to see them).
//!
//! Criteria 2 and 9 drive the installed binary end to end through the
//! shipped configs; the rest exercise the library directly.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use afc_core::afc::{
    count_statistics, efficiency_analytic, optimal_depth, propagate, square_comb, AfcSpec, Pulse,
};
use afc_core::commensurate::{mismatch, mismatch_map};
use afc_core::material::{baseline_spectrum, hole_pattern, zeeman_splittings, Profile};
use afc_core::pumping::{hole_decay, simulate_pumping, PulseTrain, PumpTarget, Window};
use afc_core::seqcompile::{compile, coverage, HardwareLimits};
use afc_core::{FieldConfig, Grid, IonClass};

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .unwrap()
}

fn config_path(name: &str) -> PathBuf {
    workspace_root().join("configs").join(name)
}

fn run_cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_afc"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn criterion_1_eq1_oracle_equivalence() {
    let started = Instant::now();
    let mut worst = (0.0_f64, String::new());
    let finesses = [2.0, 3.0, 4.5, 6.0, 10.0];
    let depths = [1.0, 2.0, 4.0, 8.0, 12.0, 15.0];
    let backgrounds = [0.0, 0.4];
    for &finesse in &finesses {
        for &depth in &depths {
            for &background in &backgrounds {
                let afc = AfcSpec::single(3.0, finesse, depth, background, 60.0);
                let grid = Grid::symmetric(100.0, 0.01).unwrap();
                let spec = square_comb(&afc, grid).unwrap();
                let trace = propagate(&spec, &Pulse::new(80.0, 0.0), Some(3.0)).unwrap();
                let eta = trace.echoes[0].efficiency;
                let analytic = efficiency_analytic(depth, finesse, background);
                let rel = (eta - analytic).abs() / analytic;
                assert!(
                    rel <= 0.05,
                    "F {finesse} d {depth} d0 {background}: propagated {eta:.5} vs analytic {analytic:.5} ({:.1}% off)",
                    100.0 * rel
                );
                if rel > worst.0 {
                    worst = (rel, format!("F {finesse} d {depth} d0 {background}"));
                }
            }
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "oracle grid took {elapsed:.1} s");
    println!(
        "PASS criterion 1: 60-point FFT-vs-analytic grid within 5% (worst {:.2}% at {}), {:.1} s",
        100.0 * worst.0,
        worst.1,
        elapsed
    );
}

#[test]
fn criterion_2_efficient_storage() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_cli(&[
        "store",
        "--config",
        config_path("fig2_efficient.json").to_str().unwrap(),
        "--out",
        dir.path().join("run").to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("run/store_report.json")).unwrap(),
    )
    .unwrap();
    let eta = report["efficiency"].as_f64().unwrap();
    let storage_ns = report["storage_time_ns"].as_f64().unwrap();
    assert!(
        (0.26..=0.31).contains(&eta),
        "pipeline efficiency {eta:.4} outside [0.26, 0.31]"
    );
    assert!(
        (storage_ns - 1000.0 / 6.0).abs() <= 2.0,
        "echo at {storage_ns:.1} ns, expected 166.7 +- 2"
    );
    // Direct closed-form evaluation at the quoted operating point; the
    // reported 30.4% analytic estimate is not reproducible from it.
    let eq1 = efficiency_analytic(12.0, 4.5, 0.4);
    assert!((eq1 - 0.2808).abs() < 5e-4);
    println!(
        "PASS criterion 2: pipeline eta {eta:.4} in [0.26, 0.31] (reference 28.5 +- 0.2%, closed form {:.4}; \
         the reported 30.4% estimate is a known discrepancy), echo at {storage_ns:.1} ns",
        eq1
    );
}

#[test]
fn criterion_3_intrinsic_optimum() {
    // Brute-force argmax over depth of the analytic efficiency at F = 2.
    let mut best = (0.0_f64, 0.0_f64);
    let mut d = 0.001;
    while d <= 20.0 {
        let eta = efficiency_analytic(d, 2.0, 0.0);
        if eta > best.1 {
            best = (d, eta);
        }
        d += 0.001;
    }
    assert!(
        (best.0 - 4.0).abs() <= 0.01,
        "argmax depth {} not 4.00 +- 0.01",
        best.0
    );
    assert_eq!(optimal_depth(2.0, 0.0), 4.0);
    println!(
        "PASS criterion 3: argmax_d eta(F=2, d0=0) = {:.3} (tailored tooth depth {:.3})",
        best.0,
        best.0 / 2.0
    );
}

#[test]
fn criterion_4_commensurate_zeros() {
    let ion = IonClass::tm_yag();
    // 333.333... G is 1000/3 G; the distances vanish to rounding error.
    let m = mismatch(1000.0 / 3.0, 1.0, &ion).unwrap();
    assert!(m <= 1e-12, "mismatch at 1000/3 G is {m:.3e}");

    // Brute-force congruence scan: zeros exactly where the excited
    // splitting is an even-but-not-multiple-of-four number of comb spacings
    // (3*n1 = 2 mod 4 for the 4.75 ratio).
    for n in 1..=40u32 {
        let b = n as f64 / ion.mu_e_mhz_per_g;
        let m = mismatch(b, 1.0, &ion).unwrap();
        if n % 4 == 2 {
            assert!(m < 1e-9, "n1 = {n}: expected zero, got {m:.3e}");
        } else {
            assert!(m > 0.01, "n1 = {n}: expected nonzero, got {m:.3e}");
        }
    }

    let started = Instant::now();
    let map = mismatch_map((50.0, 700.0, 1.0), (50.0, 1000.0, 5.0), &ion).unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "map took {elapsed:.2} s");
    assert_eq!(
        map.values.len(),
        map.b_axis_gauss.len() * map.storage_axis_ns.len()
    );
    println!(
        "PASS criterion 4: exact zero at 1000/3 G ({m:.1e}), zeros at n1 = 2 mod 4 over [1, 40], \
         {}x{} map in {elapsed:.2} s",
        map.b_axis_gauss.len(),
        map.storage_axis_ns.len()
    );
}

#[test]
fn criterion_5_reference_point_audit() {
    let ion = IonClass::tm_yag();
    let points = [(630.0, 4.0, 96.5), (158.0, 1.0, 96.0), (647.5, 1.0, 98.8)];
    let mut lines = Vec::new();
    for (b, spacing, reported_pct) in points {
        let m = mismatch(b, spacing, &ion).unwrap();
        assert!((0.0..=1.0).contains(&m));
        lines.push(format!(
            "{b} G @ {spacing} MHz: oracle match {:.2}% (reported {reported_pct}%)",
            100.0 * (1.0 - m)
        ));
    }

    // The audit is also a CLI deliverable.
    let dir = tempfile::tempdir().unwrap();
    let out = run_cli(&[
        "commensurate",
        "--config",
        config_path("fig5_commensurate.json").to_str().unwrap(),
        "--out",
        dir.path().join("run").to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("run/search.json")).unwrap(),
    )
    .unwrap();
    let audit = report["audit"].as_array().unwrap();
    assert_eq!(audit.len(), 3);
    for entry in audit {
        assert!(entry["mismatch_oracle"].is_f64());
        assert!(entry["reported_match_percent"].is_f64());
    }
    println!(
        "PASS criterion 5: audit emitted; agreement not required: {}",
        lines.join("; ")
    );
}

#[test]
fn criterion_6_broadband_compile_and_intrinsic_comb() {
    // 630 MHz target: 3 RF tones -> 7 optical tones spaced 90 MHz, 35 lines.
    let target = PumpTarget {
        comb_spacing_mhz: 18.0,
        tooth_width_mhz: 9.0,
        windows: (-3..=3)
            .map(|k| Window::new(k as f64 * 90.0, 90.0))
            .collect(),
        wait_time_ms: 5.0,
    };
    let train = PulseTrain {
        t0_ms: 0.1,
        n_l: 300,
        delta_p_mhz: 8.2,
        ..PulseTrain::default()
    };
    let limits = HardwareLimits::default();
    let schedule = compile(&target, &train, &limits).unwrap();
    assert_eq!(schedule.eom_tones.len(), 3);
    let optical = schedule.optical_tones();
    assert_eq!(optical.len(), 7);
    for pair in optical.windows(2) {
        assert!((pair[1] - pair[0] - 90.0).abs() < 1e-9);
    }
    let report = coverage(&schedule, &target, &limits).unwrap();
    assert_eq!(report.comb_lines, 35);
    assert!((report.covered_bandwidth_mhz - 630.0).abs() < 1e-9);

    // The measured 5.0 +- 0.3% broadband efficiency is ground-lifetime
    // limited and not reproducible at desk scale; the substitute check is
    // the simulated intrinsic comb shape and echo timing.
    let ion = IonClass::tm_yag();
    let grid = Grid::symmetric(80.0, 0.1).unwrap();
    let spec = baseline_spectrum(2.2, 1, grid, Profile::Flat, &ion).unwrap();
    let (de, dg) = zeeman_splittings(&ion, &FieldConfig { b_gauss: 370.0 });
    let pattern = hole_pattern(de, dg, &ion).unwrap();
    let one_window = PumpTarget {
        comb_spacing_mhz: 18.0,
        tooth_width_mhz: 9.0,
        windows: vec![Window::new(0.0, 90.0)],
        wait_time_ms: 5.0,
    };
    let intrinsic_train = PulseTrain {
        t0_ms: 0.1,
        n_l: 300,
        delta_p_mhz: 8.2,
        peak_rate_per_ms: 8.0,
        ..PulseTrain::default()
    };
    let result = simulate_pumping(&spec, &one_window, &intrinsic_train, &pattern, &ion).unwrap();
    let metrics = afc_core::afc::comb_metrics(&result.spectrum, 0.0, 18.0).unwrap();
    assert!(
        (metrics.finesse - 2.0).abs() <= 0.2,
        "intrinsic finesse {:.3} not 2.0 +- 0.2",
        metrics.finesse
    );
    let trace = propagate(&result.spectrum, &Pulse::new(25.0, 0.0), Some(18.0)).unwrap();
    let storage = trace.echoes[0].storage_time_ns;
    assert!(
        (storage - 1000.0 / 18.0).abs() <= 2.0,
        "intrinsic echo at {storage:.2} ns, expected 55.6 +- 2"
    );
    println!(
        "PASS criterion 6: 35 lines / 630 MHz / 7 tones at 90 MHz exactly; intrinsic comb finesse \
         {:.2}, echo at {storage:.2} ns (the measured 5.0 +- 0.3% broadband efficiency is \
         ground-lifetime-limited and intentionally not reproduced)",
        metrics.finesse
    );
}

#[test]
fn criterion_7_population_conservation() {
    let ion = IonClass::tm_yag();

    // Tailoring run at 4500 G.
    let grid = Grid::symmetric(175.0, 0.1).unwrap();
    let spec = baseline_spectrum(2.0, 6, grid, Profile::Flat, &ion).unwrap();
    let (de, dg) = zeeman_splittings(&ion, &FieldConfig { b_gauss: 4500.0 });
    let pattern = hole_pattern(de, dg, &ion).unwrap();
    let target = PumpTarget {
        comb_spacing_mhz: 6.0,
        tooth_width_mhz: 1.8,
        windows: vec![Window::new(0.0, 30.0)],
        wait_time_ms: 5.0,
    };
    let train = PulseTrain {
        n_l: 150,
        peak_rate_per_ms: 64.0,
        ..PulseTrain::default()
    };
    let before = spec.total_population();
    let result = simulate_pumping(&spec, &target, &train, &pattern, &ion).unwrap();
    let drift_a = ((result.spectrum.total_population() - before) / before).abs();
    assert!(drift_a < 1e-6, "population drift {drift_a:.2e}");

    // Intrinsic run at 370 G.
    let grid = Grid::symmetric(60.0, 0.1).unwrap();
    let spec = baseline_spectrum(2.2, 1, grid, Profile::Flat, &ion).unwrap();
    let (de, dg) = zeeman_splittings(&ion, &FieldConfig { b_gauss: 370.0 });
    let pattern = hole_pattern(de, dg, &ion).unwrap();
    let target = PumpTarget {
        comb_spacing_mhz: 18.0,
        tooth_width_mhz: 9.0,
        windows: vec![Window::new(0.0, 36.0)],
        wait_time_ms: 5.0,
    };
    let before = spec.total_population();
    let result = simulate_pumping(&spec, &target, &train, &pattern, &ion).unwrap();
    let drift_b = ((result.spectrum.total_population() - before) / before).abs();
    assert!(drift_b < 1e-6, "population drift {drift_b:.2e}");

    // Double-exponential hole decay with the 10/170 ms constants.
    let t0 = hole_decay(0.3, 0.45, 0.0, &ion).unwrap();
    assert_eq!(t0, 0.75);
    let mid = hole_decay(0.5, 0.5, 10.0, &ion).unwrap();
    assert!((mid - (0.5 * (-1.0_f64).exp() + 0.5 * (-10.0_f64 / 170.0).exp())).abs() < 1e-15);
    println!(
        "PASS criterion 7: population conserved to {drift_a:.1e} / {drift_b:.1e}; \
         hole_decay(0) exact and double-exponential with 10/170 ms"
    );
}

#[test]
fn criterion_8_counting_statistics() {
    let stats = count_statistics(0.285, 1.0, 1_000_000, 1.055e-3, 100.0, 7).unwrap();
    let expected = 0.285 / 1.055e-3;
    let rel = (stats.snr - expected).abs() / expected;
    assert!(
        rel <= 0.10,
        "sampled SNR {:.1} not within 10% of {expected:.1}",
        stats.snr
    );
    let again = count_statistics(0.285, 1.0, 1_000_000, 1.055e-3, 100.0, 7).unwrap();
    assert_eq!(stats, again, "same seed must reproduce identical counts");
    println!(
        "PASS criterion 8: sampled SNR {:.1} within 10% of {expected:.1}, deterministic per seed",
        stats.snr
    );
}

#[test]
fn criterion_9_cli_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&str, &str); 2] = [
        ("store", "fig2_efficient.json"),
        ("commensurate", "fig5_commensurate.json"),
    ];
    for (cmd, cfg) in cases {
        let out_a = dir.path().join(format!("{cmd}_a"));
        let out_b = dir.path().join(format!("{cmd}_b"));
        for out in [&out_a, &out_b] {
            let status = run_cli(&[
                cmd,
                "--config",
                config_path(cfg).to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--seed",
                "42",
            ]);
            assert!(status.status.success());
        }
        let mut names: Vec<String> = std::fs::read_dir(&out_a)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        assert!(!names.is_empty());
        for name in &names {
            let a = std::fs::read(out_a.join(name)).unwrap();
            let b = std::fs::read(out_b.join(name)).unwrap();
            assert_eq!(a, b, "{cmd}/{name} differs between identical runs");
        }
    }
    println!("PASS criterion 9: byte-identical outputs for repeated seeded runs (store, commensurate)");
}
