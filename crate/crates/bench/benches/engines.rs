use criterion::{black_box, criterion_group, criterion_main, Criterion};
use smforge_bench::{coarse, design_bounds, emulator, grid, nominal_aux, region};
use smforge_core::circuit::{DesignVector, EmulatorTruth};
use smforge_core::explicit::{extract_mapping, star_base_set};
use smforge_core::rrsm::{calibrate_aux, coarse_optimum};
use smforge_core::{
    minimize, Bounds, Channel, ChannelSelector, DesignModel, DesignSpec, OptimizerSettings, Response, RrsmSettings,
    WithAux,
};

fn model_evaluation(c: &mut Criterion) {
    let g = grid();
    let model = coarse();
    let aux = nominal_aux();
    let x = DesignVector::reference().as_slice().to_vec();
    let cm = WithAux::new(&model, &aux);
    c.bench_function("coarse_eval_17pt", |b| {
        b.iter(|| cm.evaluate(black_box(&x), &g).unwrap())
    });
    let fine = emulator(EmulatorTruth::default());
    c.bench_function("emulator_eval_17pt", |b| {
        b.iter(|| fine.evaluate(black_box(&x), &g).unwrap())
    });
}

fn optimizers(c: &mut Criterion) {
    let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
    let settings = OptimizerSettings::default();
    c.bench_function("bfgs_rosenbrock", |b| {
        b.iter(|| minimize(&rosen, black_box(&[-1.2, 1.0]), &Bounds::unbounded(2), &settings).unwrap())
    });

    let g = grid();
    let model = coarse();
    let p0 = nominal_aux();
    let spec = DesignSpec::bandpass_template(&g);
    let x0 = DesignVector::reference().as_slice().to_vec();
    let mut group = c.benchmark_group("filter");
    group.sample_size(10);
    group.bench_function("coarse_optimum", |b| {
        b.iter(|| coarse_optimum(&model, &p0, &spec, &g, &x0, &design_bounds(), &settings).unwrap())
    });

    let fine = emulator(EmulatorTruth::default());
    let fine_r = fine.evaluate(&x0, &g).unwrap();
    let rrsm = RrsmSettings::default();
    let aux_bounds = rrsm.resolved_aux_bounds(&p0).unwrap();
    group.bench_function("calibrate_aux", |b| {
        b.iter(|| {
            calibrate_aux(
                &x0,
                &fine_r,
                &model,
                &p0,
                &aux_bounds,
                &rrsm.calibration_channels,
                &settings,
            )
            .unwrap()
        })
    });

    let base = star_base_set(&region(), false);
    let responses: Vec<Response> = base.points.iter().map(|x| fine.evaluate(x, &g).unwrap()).collect();
    let cm = WithAux::new(&model, &p0);
    let sel = ChannelSelector::db(Channel::S12);
    let reg = OptimizerSettings {
        regularization_weight: 1e-3,
        ..settings
    };
    group.bench_function("extract_mapping_star", |b| {
        b.iter(|| extract_mapping(&base, &responses, &cm, sel, &reg).unwrap())
    });
    group.finish();
}

criterion_group!(benches, model_evaluation, optimizers);
criterion_main!(benches);
