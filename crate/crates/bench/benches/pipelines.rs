//! Benchmarks for the hot pipeline stages: trajectory integration, per-line
//! expansion functionals, the fixed-point solve and filtered backprojection.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use emscat_core::asymptotics::{Line, LineWorkspace};
use emscat_core::dynamics::{self, Controls};
use emscat_core::fields::Field;
use emscat_core::picard;
use emscat_core::vec3;
use emscat_core::xray::{invert_fbp, Apodization, GridSpec, LineTarget, Sinogram};

fn field_a() -> Field {
    Field::gaussian(2, 1.0, 1.0)
}

fn bench_trajectory(c: &mut Criterion) {
    let f = field_a();
    let controls = Controls::default();
    c.bench_function("trajectory_s32", |b| {
        b.iter(|| {
            let d = dynamics::scattering_datum(
                &f,
                black_box([32.0, 0.0, 0.0]),
                black_box([0.0, 1.0, 0.0]),
                &controls,
            )
            .unwrap();
            black_box(d.a_sc)
        })
    });
}

fn bench_line_terms(c: &mut Criterion) {
    let f = field_a();
    let line = Line::plane(0.7, 1.0);
    c.bench_function("line_terms_4097", |b| {
        b.iter(|| {
            let ws = LineWorkspace::new(&f, black_box(line), 4097).unwrap();
            black_box(ws.all_terms())
        })
    });
}

fn bench_fixed_point(c: &mut Criterion) {
    let f = field_a();
    c.bench_function("fixed_point_s32", |b| {
        b.iter(|| {
            let fp = picard::solve_fixed_point(
                &f,
                black_box([32.0, 0.0, 0.0]),
                black_box([0.0, 1.0, 0.0]),
                1e-10,
                2048,
            )
            .unwrap();
            black_box(fp.iterations)
        })
    });
}

fn bench_fbp(c: &mut Criterion) {
    let target = LineTarget::scalar(8.5, 2.0, |x| (-vec3::dot(x, x)).exp());
    let sino: Sinogram = emscat_core::xray::build_sinogram(&target, 128, 128, 6.0).unwrap();
    let spec = GridSpec {
        half_width: 3.0,
        res: 64,
    };
    c.bench_function("fbp_128x128_to_64", |b| {
        b.iter(|| black_box(invert_fbp(black_box(&sino), spec, Apodization::Hann).unwrap()))
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench_trajectory, bench_line_terms, bench_fixed_point, bench_fbp
}
criterion_main!(benches);
