//! Acceptance suite: one pass/fail line per criterion.

mod common;

use std::f64::consts::TAU;
use std::time::{Duration, Instant};

use qkernel::circuit::{enumerate_block_space, Axis, Binding, BlockSpec, CircuitLayout};
use qkernel::data::{apply_selector, mrmr_select, stratified_split, TabularDataset};
use qkernel::kernel::{fit, gram, pearson, rbf_gram, GramMatrix};
use qkernel::pipeline::{
    diagnose_kv, evaluate_kernel, run_full_search, tek_layout, train_tek, RunDir, SearchConfig,
    SelectorKind, Stage,
};
use qkernel::predictor::init_model;
use qkernel::qsim::{run_layout, NoiseSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn within(limit: Duration, started: Instant) -> Result<(), String> {
    let took = started.elapsed();
    if took < limit {
        Ok(())
    } else {
        Err(format!("took {took:.1?}, limit {limit:?}"))
    }
}

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// 50/50 split of a two-class Gaussian toy set reduced to four angles.
fn toy_split() -> Result<(TabularDataset, TabularDataset), String> {
    let data = common::blobs(100, 6, 3, 1.5, 7);
    let (train, test) = stratified_split(&data, 0.5, 0).map_err(err)?;
    let sel = mrmr_select(&train, 4, 8).map_err(err)?;
    Ok((apply_selector(&sel, &train).map_err(err)?, apply_selector(&sel, &test).map_err(err)?))
}

fn toy_search_config(seed: u64) -> SearchConfig {
    SearchConfig {
        n: 4,
        p: 4,
        m_pool: 36,
        exhaustive: true,
        k: 5,
        num_theta_trials: 5,
        seed,
        ..SearchConfig::default()
    }
}

fn simulator_oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let n = rng.gen_range(1..=3);
        let p = rng.gen_range(1..=3);
        let (layout, theta) = if case % 4 == 3 && n > 1 {
            let l = tek_layout(n, 2, p).map_err(err)?;
            let theta = (0..l.num_params()).map(|_| rng.gen_range(0.0..TAU)).collect();
            (l, theta)
        } else {
            (common::random_layout(&mut rng, n, 4, p, 2), vec![rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU)])
        };
        let x: Vec<f64> = (0..p).map(|_| rng.gen_range(0.0..TAU)).collect();
        let got = run_layout(&layout, &x, &theta).map_err(err)?;
        let gates = layout.resolve(&x, &theta).map_err(err)?;
        let expect = common::dense::dense_state(n, &gates);
        for (a, b) in got.amplitudes().iter().zip(&expect) {
            worst = worst.max((a - b).norm());
        }
    }
    ensure(worst < 1e-10, format!("max amplitude error {worst:.3e}"))?;
    within(Duration::from_secs(10), started)?;
    Ok(format!("100 layouts, max amplitude error {worst:.2e}"))
}

fn single_qubit_law() -> Outcome {
    let layout = CircuitLayout::new(
        1,
        1,
        1,
        vec![BlockSpec { even_axis: Axis::X, odd_axis: Axis::X, mask: vec![] }],
        false,
        &[Binding::Feature(0)],
    )
    .map_err(err)?;
    let x: Vec<Vec<f64>> = (0..50).map(|i| vec![TAU * i as f64 / 50.0]).collect();
    let q = gram(&layout, &[], &x, None, None).map_err(err)?;
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        for j in 0..50 {
            let expect = ((x[i][0] - x[j][0]) / 2.0).cos().powi(2);
            worst = worst.max((q.get(i, j) - expect).abs());
        }
    }
    ensure(worst < 1e-12, format!("max error {worst:.3e}"))?;
    Ok(format!("50-point grid, max error {worst:.2e}"))
}

fn search_space_count() -> Outcome {
    let count = enumerate_block_space(4, 1, 4).map_err(err)?.len();
    ensure(count == 72, format!("{count} layouts"))?;
    Ok("72 layouts".into())
}

fn predictor_parameter_identity() -> Outcome {
    for l in [1usize, 4, 8, 16, 40] {
        let got = init_model(l, 0).map_err(err)?.num_params();
        ensure(got == 1280 * l + 257, format!("L={l}: {got} parameters"))?;
    }
    Ok("L in {1, 4, 8, 16, 40}".into())
}

fn gradient_checks() -> Outcome {
    let started = Instant::now();
    let mlp = (0..20).map(common::mlp_gradient_error).fold(0.0, f64::max);
    let shift = (0..20).map(common::shift_gradient_error).fold(0.0, f64::max);
    ensure(mlp < 1e-4, format!("backprop relative error {mlp:.3e}"))?;
    ensure(shift < 1e-6, format!("parameter-shift abs error {shift:.3e}"))?;
    within(Duration::from_secs(120), started)?;
    Ok(format!("backprop rel {mlp:.2e}, parameter-shift abs {shift:.2e}"))
}

fn kta_surrogate() -> Outcome {
    let started = Instant::now();
    let (train, test) = toy_split()?;
    let mut ktas = Vec::new();
    let mut accs = Vec::new();
    for layout in enumerate_block_space(4, 1, 4).map_err(err)? {
        let e = evaluate_kernel(&layout, &[], &train, &test, 1e-3, None).map_err(err)?;
        ensure(e.max_residual < 1e-8, format!("residual {:.3e}", e.max_residual))?;
        ktas.push(e.kta_train);
        accs.push(e.train_accuracy);
    }
    let r = pearson(&ktas, &accs).map_err(err)?;
    ensure(r > 0.3, format!("PCC {r:.3}"))?;
    within(Duration::from_secs(15 * 60), started)?;
    Ok(format!("PCC(KTA, train accuracy) = {r:.3} over 72 kernels"))
}

fn vanishing_similarity() -> Outcome {
    let started = Instant::now();
    let (mut low, mut high) = (0.0, 0.0);
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let rows: Vec<Vec<f64>> = (0..100).map(|_| (0..40).map(|_| rng.gen::<f64>()).collect()).collect();
        let labels = (0..100).map(|i| i % 2).collect();
        let data = TabularDataset::new(rows, labels, Some(2)).map_err(err)?;
        let kv = diagnose_kv(&data, 8, &[5], &[8, 40], 5, seed, SelectorKind::Pca).map_err(err)?;
        low += kv[0].mean_kv / 5.0;
        high += kv[1].mean_kv / 5.0;
    }
    ensure(low > high, format!("KV p=8 {low:.3e} vs p=40 {high:.3e}"))?;
    within(Duration::from_secs(20 * 60), started)?;
    Ok(format!("mean KV p=8 {low:.3e} > p=40 {high:.3e}"))
}

fn stage_improvement() -> Outcome {
    let started = Instant::now();
    let data = common::blobs(100, 6, 3, 1.5, 7);
    let dir = tempfile::tempdir().map_err(err)?;
    let out = run_full_search(&RunDir::new(dir.path()), &toy_search_config(0), &data, false).map_err(err)?;
    let best = |stage: Stage| {
        out.records
            .iter()
            .filter(|r| r.stage == stage)
            .map(|r| r.kta_train)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let (pool, cand, fine) = (best(Stage::TrainingPool), best(Stage::Candidate), best(Stage::Finetuned));
    ensure(pool <= cand && cand <= fine, format!("best KTA {pool:.4} -> {cand:.4} -> {fine:.4}"))?;
    within(Duration::from_secs(30 * 60), started)?;
    Ok(format!("best train KTA {pool:.4} <= {cand:.4} <= {fine:.4}"))
}

fn noise_limits() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let full = NoiseSpec::new(1.0, 1.0).map_err(err)?;
    let zero = NoiseSpec::new(0.0, 0.0).map_err(err)?;
    let mut worst_full: f64 = 0.0;
    let mut worst_zero: f64 = 0.0;
    for n in [2usize, 3] {
        for _ in 0..5 {
            let layout = common::random_layout(&mut rng, n, 3, 2, 0);
            let x: Vec<Vec<f64>> = (0..6).map(|_| vec![rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU)]).collect();
            let mixed = gram(&layout, &[], &x, None, Some(&full)).map_err(err)?;
            let target = 0.5f64.powi(n as i32);
            worst_full = mixed.entries().iter().fold(worst_full, |w, v| w.max((v - target).abs()));
            let a = gram(&layout, &[], &x, None, Some(&zero)).map_err(err)?;
            let b = gram(&layout, &[], &x, None, None).map_err(err)?;
            worst_zero = a.entries().iter().zip(b.entries()).fold(worst_zero, |w, (u, v)| w.max((u - v).abs()));
        }
    }
    ensure(worst_full < 1e-9, format!("p=1 deviation {worst_full:.3e}"))?;
    ensure(worst_zero < 1e-9, format!("p=0 deviation {worst_zero:.3e}"))?;
    Ok(format!("p=1 max dev {worst_full:.2e}, p=0 max dev {worst_zero:.2e}"))
}

fn baselines() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let x: Vec<Vec<f64>> = (0..12).map(|_| (0..5).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
    let y: Vec<Vec<f64>> = (0..7).map(|_| (0..5).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
    let gamma = 0.37;
    let k = rbf_gram(&x, Some(&y), gamma).map_err(err)?;
    let mut worst: f64 = 0.0;
    for (i, a) in x.iter().enumerate() {
        for (j, b) in y.iter().enumerate() {
            let d2: f64 = a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum();
            worst = worst.max((k.get(i, j) - (-gamma * d2).exp()).abs());
        }
    }
    ensure(worst < 1e-12, format!("RBF error {worst:.3e}"))?;
    let data = common::angles(10, 3, 2, 5);
    let frozen = train_tek(&data, 3, 2, 5, 0.0, 1, None).map_err(err)?;
    ensure(frozen.gamma == frozen.initial_gamma, "lr=0 moved the trainable angles")?;
    let trained = train_tek(&data, 3, 2, 15, 0.2, 1, None).map_err(err)?;
    ensure(
        trained.kta >= trained.initial_kta - 1e-9,
        format!("TEK KTA fell {:.4} -> {:.4}", trained.initial_kta, trained.kta),
    )?;
    Ok(format!(
        "RBF max error {worst:.2e}; TEK lr=0 frozen; TEK KTA {:.4} -> {:.4}",
        trained.initial_kta, trained.kta
    ))
}

fn determinism() -> Outcome {
    let data = common::blobs(100, 6, 3, 1.5, 7);
    let mut reports = Vec::new();
    let mut chosen = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(err)?;
        let run = RunDir::new(dir.path());
        let out = run_full_search(&run, &toy_search_config(3), &data, false).map_err(err)?;
        reports.push(std::fs::read(run.path("report.csv")).map_err(err)?);
        chosen.push(out.chosen.layout.hash());
    }
    ensure(reports[0] == reports[1], "report.csv differs")?;
    ensure(chosen[0] == chosen[1], "chosen layouts differ")?;
    Ok(format!("identical report.csv, chosen {}", &chosen[0][..12]))
}

fn kernel_machine_contract() -> Outcome {
    let (train, _) = toy_split()?;
    let mut worst: f64 = 0.0;
    for layout in enumerate_block_space(4, 1, 4).map_err(err)?.iter().step_by(7) {
        let q = gram(layout, &[], train.features(), None, None).map_err(err)?;
        let m = fit(&q, train.labels(), 2, 1e-3).map_err(err)?;
        worst = m.residuals.iter().fold(worst, |w, r| w.max(*r));
    }
    ensure(worst < 1e-8, format!("residual {worst:.3e}"))?;
    let q = GramMatrix::identity(train.len());
    let m = fit(&q, train.labels(), 2, 1e-9).map_err(err)?;
    let acc = qkernel::kernel::accuracy(&m.predict(&q).map_err(err)?, train.labels()).map_err(err)?;
    ensure(acc == 1.0, format!("identity-kernel train accuracy {acc}"))?;
    Ok(format!("max residual {worst:.2e}; Q=I train accuracy 100%"))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("simulator matches dense products", simulator_oracle),
        ("single-qubit fidelity law", single_qubit_law),
        ("search-space count", search_space_count),
        ("predictor parameter identity", predictor_parameter_identity),
        ("gradient checks", gradient_checks),
        ("KTA tracks train accuracy", kta_surrogate),
        ("vanishing similarity trend", vanishing_similarity),
        ("stage improvement", stage_improvement),
        ("noise limits", noise_limits),
        ("baseline correctness", baselines),
        ("determinism", determinism),
        ("kernel-machine contract", kernel_machine_contract),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} ({secs:.2}s)", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why} ({secs:.2}s)", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
