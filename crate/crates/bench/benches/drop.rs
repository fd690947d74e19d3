use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use pilotfwd_core::channel::build_rg;
use pilotfwd_core::estimation::{lmmse_estimate, ls_estimate, proposed_estimate, PilotObservation};
use pilotfwd_core::forwarding::synthetic_forward;
use pilotfwd_core::harness::Experiment;
use pilotfwd_core::linalg::complex_normal_matrix;
use pilotfwd_core::phy::build_pilot_pattern;
use pilotfwd_core::receiver::{mmse_irc_detect, DetectorInput};
use pilotfwd_core::{seed, CVector, CfrGrid, ScenarioConfig, TdlProfile};

fn drops(c: &mut Criterion) {
    let mut g = c.benchmark_group("drop");
    g.sample_size(20);
    for (name, text) in [
        ("physical_nse_only", "sweep = sinr\nsweep_values = 0\ndetection = false\nworkers = 1\ndrops = 1\nseed = 1"),
        ("physical_ber_11pt", "sweep = sinr\nsweep_values = -10:2:10\nworkers = 1\ndrops = 1\nseed = 1"),
        ("synthetic_6pt", "sweep = relative_noise\nsweep_values = -10:2:0\ndetection = false\nworkers = 1\ndrops = 1\nseed = 1"),
    ] {
        let exp = Experiment::new(ScenarioConfig::parse(text).unwrap()).unwrap();
        let mut i = 0;
        g.bench_function(name, |b| {
            b.iter(|| {
                i += 1;
                exp.simulate_drop(i).unwrap()
            })
        });
    }
    g.finish();
}

fn estimators(c: &mut Criterion) {
    let profile = TdlProfile::builtin("tdl-c", 300e-9).unwrap();
    let pattern = build_pilot_pattern(1, 144, 4, 1).unwrap();
    let rg = build_rg(&profile, &pattern.subcarriers, 30e3)
        .unwrap()
        .scaled(50.0);
    let mut rng = seed::rng(2);
    let records = synthetic_forward(&pattern, -5.0, 1.0, &mut rng).unwrap();
    let z = complex_normal_matrix(&mut rng, pattern.pilots_per_stream(), 8, 50.0);
    let obs = PilotObservation::from_records(z, &records, 1.0).unwrap();
    let mut g = c.benchmark_group("estimate_36x8");
    g.bench_function("ls", |b| b.iter(|| ls_estimate(&obs).unwrap()));
    g.bench_function("lmmse", |b| b.iter(|| lmmse_estimate(&obs, &rg).unwrap()));
    g.bench_function("proposed", |b| {
        b.iter(|| proposed_estimate(&obs, &rg).unwrap())
    });
    g.finish();
}

fn detection(c: &mut Criterion) {
    let mut rng = seed::rng(3);
    let grid = |rng: &mut _, cols| {
        CfrGrid::from_slices(
            (0..144)
                .map(|_| complex_normal_matrix(rng, 8, cols, 1.0))
                .collect(),
        )
        .unwrap()
    };
    let h_ut = grid(&mut rng, 4);
    let h_cli = grid(&mut rng, 4);
    let y: Vec<CVector> = (0..144)
        .map(|_| {
            complex_normal_matrix(&mut rng, 8, 1, 1.0)
                .column(0)
                .into_owned()
        })
        .collect();
    let input = DetectorInput {
        h_ut_hat: &h_ut,
        h_cli_hat: Some(&h_cli),
        sigma_n2: 1.0,
    };
    c.bench_function("mmse_irc_144sc_8x4", |b| {
        b.iter_batched(
            || y.clone(),
            |y| mmse_irc_detect(&y, &input).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, drops, estimators, detection);
criterion_main!(benches);
