use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use afc_core::afc::{propagate, square_comb, AfcSpec, Pulse};
use afc_core::commensurate::mismatch_map;
use afc_core::material::{baseline_spectrum, hole_pattern, zeeman_splittings, Profile};
use afc_core::pumping::{simulate_pumping, PulseTrain, PumpTarget, Window};
use afc_core::{FieldConfig, Grid, IonClass};

fn bench_propagate(c: &mut Criterion) {
    let afc = AfcSpec::single(6.0, 4.5, 12.0, 0.4, 30.0);
    let grid = Grid::symmetric(100.0, 0.02).unwrap();
    let spec = square_comb(&afc, grid).unwrap();
    c.bench_function("propagate 80ns through 10k-channel comb", |b| {
        b.iter(|| propagate(&spec, &Pulse::new(80.0, 0.0), Some(6.0)).unwrap())
    });
}

fn bench_pumping(c: &mut Criterion) {
    let ion = IonClass::tm_yag();
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
        n_l: 100,
        peak_rate_per_ms: 64.0,
        ..PulseTrain::default()
    };
    c.bench_function("simulate_pumping 100 reps x 5 teeth", |b| {
        b.iter_batched(
            || spec.clone(),
            |s| simulate_pumping(&s, &target, &train, &pattern, &ion).unwrap(),
            BatchSize::LargeInput,
        )
    });
}

fn bench_mismatch_map(c: &mut Criterion) {
    let ion = IonClass::tm_yag();
    c.bench_function("mismatch_map 651x191", |b| {
        b.iter(|| mismatch_map((50.0, 700.0, 1.0), (50.0, 1000.0, 5.0), &ion).unwrap())
    });
}

criterion_group!(benches, bench_propagate, bench_pumping, bench_mismatch_map);
criterion_main!(benches);
