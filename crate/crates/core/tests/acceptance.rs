//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Tolerances and budgets are fixed here.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal, Uniform};

use stein_features::bench::{
    approx_error, approx_inputs, render_report, rstar, run_kernel_approx, run_regression, synthetic_dataset, DatasetSource,
    DatasetSpec, Experiment, ExperimentConfig, ReportFormat, RowStatus, SyntheticSpec, TrainingSettings,
};
use stein_features::exact_gp::{exact_gram, gp_nll, gp_predict, DenseGp, GpKernel};
use stein_features::msrfr::{
    component_score, mixture_moments, msrfr_predict, train_msrfr, FrequencyPrior, MixtureModel, MsrfrConfig,
};
use stein_features::optim::Optimizer;
use stein_features::rng::{seeded, Rng};
use stein_features::ssgp::{ssgp_nll, ssgp_nll_grad, ssgp_predict, SsgpModel};
use stein_features::{FrequencyMatrix, Prediction};

const GRAD_RTOL: f64 = 1e-5;
const WOODBURY_TOL: f64 = 1e-8;
const IDENTITY_TOL: f64 = 1e-12;
const RANDOM_INSTANCES: usize = 50;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn randn(rng: &mut Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

/// Random small SSGP problem: `(model, x, y)`.
fn instance(rng: &mut Rng) -> (SsgpModel, DMatrix<f64>, DVector<f64>) {
    let n = Uniform::new_inclusive(2, 15).unwrap().sample(rng);
    let r = Uniform::new_inclusive(1, 4).unwrap().sample(rng);
    let d = Uniform::new_inclusive(1, 3).unwrap().sample(rng);
    let noise = Uniform::new(0.1, 1.0).unwrap().sample(rng);
    let x = randn(rng, d, n);
    let y = randn(rng, n, 1).column(0).into_owned();
    let omega = FrequencyMatrix::new(randn(rng, r, d)).unwrap();
    (SsgpModel::new(omega, noise).unwrap(), x, y)
}

fn fd_matrix(omega: &DMatrix<f64>, f: impl Fn(&DMatrix<f64>) -> f64) -> DMatrix<f64> {
    let h = 1e-5;
    DMatrix::from_fn(omega.nrows(), omega.ncols(), |i, j| {
        let mut plus = omega.clone();
        let mut minus = omega.clone();
        plus[(i, j)] += h;
        minus[(i, j)] -= h;
        (f(&plus) - f(&minus)) / (2.0 * h)
    })
}

fn criterion_1() -> Outcome {
    let mut rng = seeded(101);
    let mut worst_nll = 0.0f64;
    let mut worst_noise = 0.0f64;
    let mut worst_score = 0.0f64;
    for _ in 0..RANDOM_INSTANCES {
        let (model, x, y) = instance(&mut rng);
        let omega = model.frequencies().as_matrix().clone();
        let noise = model.noise_variance();
        let nll_at = |o: &DMatrix<f64>, s2: f64| {
            ssgp_nll(&SsgpModel::new(FrequencyMatrix::new(o.clone()).unwrap(), s2).unwrap(), &x, &y).unwrap()
        };
        let g = ssgp_nll_grad(&model, &x, &y).unwrap();
        worst_nll = worst_nll.max(rel_err(&g.frequencies, &fd_matrix(&omega, |o| nll_at(o, noise))));
        let h: f64 = 1e-5;
        let fd_noise = (nll_at(&omega, noise * h.exp()) - nll_at(&omega, noise * (-h).exp())) / (2.0 * h);
        worst_noise = worst_noise.max((g.log_noise - fd_noise).abs() / fd_noise.abs().max(1e-300));

        // Joint log-density score of one mixture component.
        let m = Uniform::new_inclusive(1, 3).unwrap().sample(&mut rng);
        let (r, d) = omega.shape();
        let comps = (0..m)
            .map(|_| FrequencyMatrix::new(randn(&mut rng, r, d)).unwrap())
            .collect();
        let prior = FrequencyPrior::gaussian(Uniform::new(0.5, 5.0).unwrap().sample(&mut rng)).unwrap();
        let mix = MixtureModel::new(comps, noise, 1.0, prior).unwrap();
        let k = Uniform::new(0, m).unwrap().sample(&mut rng);
        let score = component_score(&mix, k, &x, &y).unwrap();
        let base = mix.components()[k].as_matrix().clone();
        let fd = fd_matrix(&base, |o| -nll_at(o, noise) + prior.log_density(o));
        worst_score = worst_score.max(rel_err(&score, &fd));
    }
    let pass = worst_nll <= GRAD_RTOL && worst_noise <= GRAD_RTOL && worst_score <= GRAD_RTOL;
    outcome(
        pass,
        format!(
            "max rel err: dNLL/dOmega {worst_nll:.2e}, dNLL/dlog(noise) {worst_noise:.2e}, joint score {worst_score:.2e} (tol {GRAD_RTOL:.0e})"
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = seeded(202);
    let mut worst = 0.0f64;
    for _ in 0..RANDOM_INSTANCES {
        let (model, x, y) = instance(&mut rng);
        let xs = randn(&mut rng, x.nrows(), 4);
        let dense = DenseGp::new(
            GpKernel::Features(model.frequencies().clone()),
            model.noise_variance(),
            x.clone(),
            y.clone(),
        )
        .unwrap();
        let a = ssgp_predict(&model, &x, &y, &xs).unwrap();
        let b = gp_predict(&dense, &xs).unwrap();
        let na = ssgp_nll(&model, &x, &y).unwrap();
        let nb = gp_nll(&dense).unwrap();
        let scale = |v: f64| v.abs().max(1.0);
        worst = worst
            .max((a.mean - &b.mean).amax() / b.mean.amax().max(1.0))
            .max((a.covariance - &b.covariance).amax() / b.covariance.amax().max(1.0))
            .max((na - nb).abs() / scale(nb));
    }
    outcome(worst <= WOODBURY_TOL, format!("max discrepancy {worst:.2e} (tol {WOODBURY_TOL:.0e})"))
}

const SVGD_STEPS: usize = 200;
const SVGD_STEP: f64 = 0.05;

fn sampler_errors(sampler: &str, r: usize, seeds: u64, d: usize) -> Vec<f64> {
    (0..seeds)
        .map(|seed| {
            let x = approx_inputs(200, d, seed);
            let exact = exact_gram(&x, &vec![1.0; d]).unwrap();
            approx_error(sampler, &x, &exact, 1.0, r, seed, (SVGD_STEPS, SVGD_STEP)).unwrap()
        })
        .collect()
}

fn criterion_3() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for r in [64, 256] {
        let mc = median(sampler_errors("mc", r, 10, 2));
        let qmc = median(sampler_errors("qmc", r, 10, 2));
        let svgd = median(sampler_errors("svgd", r, 10, 2));
        pass &= svgd <= mc && qmc <= mc;
        parts.push(format!("R={r}: mc {mc:.4} qmc {qmc:.4} svgd {svgd:.4}"));
    }
    outcome(pass, format!("median rel Frobenius error over 10 seeds; {}", parts.join("; ")))
}

fn criterion_4() -> Outcome {
    const SEEDS: u64 = 20;
    let counts = [64, 128, 256, 512];
    let med: Vec<f64> = counts
        .iter()
        .map(|&r| median(sampler_errors("mc", r, SEEDS, 2).into_iter().map(|e| e * e).collect()))
        .collect();
    let ratios: Vec<f64> = med.windows(2).map(|w| w[0] / w[1]).collect();
    let pass = ratios.iter().all(|q| (1.5..=3.0).contains(q));
    outcome(
        pass,
        format!(
            "median squared error ratio per doubling {:?} (each in [1.5, 3], {SEEDS} seeds)",
            ratios.iter().map(|q| format!("{q:.3}")).collect::<Vec<_>>()
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = seeded(505);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (model, x, y) = instance(&mut rng);
        let xs = randn(&mut rng, x.nrows(), 5);
        let mix = MixtureModel::new(
            vec![model.frequencies().clone()],
            model.noise_variance(),
            1.0,
            FrequencyPrior::default(),
        )
        .unwrap();
        let a = msrfr_predict(&mix, &x, &y, &xs).unwrap();
        let b = ssgp_predict(&model, &x, &y, &xs).unwrap();
        worst = worst.max((a.mean - b.mean).amax()).max((a.covariance - b.covariance).amax());
    }
    let p = |m: f64| Prediction {
        mean: DVector::from_element(1, m),
        covariance: DMatrix::from_element(1, 1, 1.0),
    };
    let two = mixture_moments(&[p(0.0), p(2.0)]).unwrap();
    let exact = two.mean[0] == 1.0 && two.covariance[(0, 0)] == 2.0;
    outcome(
        worst <= IDENTITY_TOL && exact,
        format!(
            "M=1 vs SSGP max diff {worst:.2e} (tol {IDENTITY_TOL:.0e}); two-component mu={} Sigma={}",
            two.mean[0],
            two.covariance[(0, 0)]
        ),
    )
}

fn min_pairwise_distance(model: &MixtureModel) -> f64 {
    let c = model.components();
    let mut best = f64::INFINITY;
    for i in 0..c.len() {
        for j in (i + 1)..c.len() {
            best = best.min((c[i].as_matrix() - c[j].as_matrix()).norm());
        }
    }
    best
}

fn criterion_6() -> Outcome {
    let data = synthetic_dataset("diversity", SyntheticSpec::new(200, 2), 606).unwrap();
    let config = MsrfrConfig {
        step_size: 0.05,
        iterations: 100,
        optimizer: Optimizer::Adagrad,
        learn_noise: true,
        ..MsrfrConfig::default()
    };
    let mut with = Vec::new();
    let mut without = Vec::new();
    for seed in 0..5 {
        let init =
            MixtureModel::initial(&data.x, &data.y, 10, 4, 1.0, 1.0, FrequencyPrior::default(), seed).unwrap();
        let a = train_msrfr(&data.x, &data.y, &init, &config).unwrap();
        let b = train_msrfr(&data.x, &data.y, &init.with_alpha(0.0).unwrap(), &config).unwrap();
        with.push(min_pairwise_distance(&a));
        without.push(min_pairwise_distance(&b));
    }
    let (mw, mo) = (median(with), median(without));
    outcome(
        mw > mo,
        format!("median min inter-component distance: alpha=1 {mw:.4}, alpha=0 {mo:.4} (M=4, R=10, N=200, 5 seeds)"),
    )
}

fn synthetic(name: &str, points: usize, dims: usize, fraction: f64) -> DatasetSpec {
    DatasetSpec {
        name: name.into(),
        source: DatasetSource::Synthetic {
            points,
            dims,
            seed: 7,
            generator_frequencies: None,
            relative_lengthscale: None,
            noise_std: None,
        },
        train_fraction: Some(fraction),
    }
}

fn regression_config(
    methods: &[&str],
    seeds: Vec<u64>,
    frequencies: usize,
    components: usize,
    datasets: Vec<DatasetSpec>,
    training: TrainingSettings,
) -> ExperimentConfig {
    let mut config = ExperimentConfig::from_toml(
        "experiment = \"regression\"\nseeds = [0]\n[[datasets]]\nname = \"placeholder\"\npoints = 10\ndims = 1\n",
    )
    .unwrap();
    config.methods = methods.iter().map(|m| m.to_string()).collect();
    config.seeds = seeds;
    config.frequencies = frequencies;
    config.components = components;
    config.datasets = datasets;
    config.training = training;
    config.validate().unwrap();
    config
}

fn criterion_7() -> Outcome {
    let config = regression_config(
        &["ssgp", "ssgp-Rstar", "msrfr"],
        (0..10).collect(),
        50,
        6,
        vec![
            synthetic("airfoil-shaped", 1503, 5, 0.9),
            synthetic("concrete-shaped", 1030, 8, 0.8),
            synthetic("energy-shaped", 768, 16, 0.8),
        ],
        TrainingSettings::default(),
    );
    let rows = match run_regression(&config) {
        Ok(rows) => rows,
        Err(e) => return outcome(false, format!("run failed: {e}")),
    };
    let mean_rmse = |dataset: &str, method: &str| {
        let v: Vec<f64> = rows
            .iter()
            .filter(|r| r.dataset == dataset && r.method == method && r.status == RowStatus::Ok)
            .map(|r| r.rmse)
            .collect();
        if v.len() == 10 {
            v.iter().sum::<f64>() / 10.0
        } else {
            f64::NAN
        }
    };
    let mut beats_ssgp = 0;
    let mut beats_rstar = 0;
    let mut parts = Vec::new();
    for ds in &config.datasets {
        let (m, s, r) = (
            mean_rmse(&ds.name, "msrfr"),
            mean_rmse(&ds.name, "ssgp"),
            mean_rmse(&ds.name, "ssgp-Rstar"),
        );
        beats_ssgp += usize::from(m <= s);
        beats_rstar += usize::from(m <= r);
        parts.push(format!("{}: msrfr {m:.4} ssgp {s:.4} ssgp-Rstar {r:.4}", ds.name));
    }
    let n = config.datasets.len();
    let pass = beats_ssgp == n && 2 * beats_rstar >= n;
    outcome(
        pass,
        format!(
            "mean test RMSE over 10 seeds (R=50, M=6, R*={}); msrfr<=ssgp on {beats_ssgp}/{n}, <=ssgp-Rstar on {beats_rstar}/{n}; {}",
            rstar(50, 6),
            parts.join("; ")
        ),
    )
}

fn criterion_8() -> Outcome {
    let training = TrainingSettings {
        iterations: 20,
        ..TrainingSettings::default()
    };
    let reg = regression_config(
        &["ssgp-rbf", "ssgp", "ssgp-Rstar", "ssgp-svgd", "msrfr"],
        vec![3, 4],
        8,
        3,
        vec![synthetic("small", 150, 3, 0.8)],
        training,
    );
    let mut ka = ExperimentConfig::from_toml(
        "experiment = \"kernel-approx\"\nseeds = [0, 1]\nfrequency_counts = [16, 64]\ndims = [2, 3]\nsvgd_steps = 50",
    )
    .unwrap();
    ka.experiment = Experiment::KernelApprox;
    let render = || -> Vec<String> {
        let r = run_regression(&reg).unwrap();
        let k = run_kernel_approx(&ka).unwrap();
        vec![
            render_report(&r, ReportFormat::Csv).unwrap(),
            render_report(&r, ReportFormat::Json).unwrap(),
            render_report(&k, ReportFormat::Csv).unwrap(),
            render_report(&k, ReportFormat::Json).unwrap(),
        ]
    };
    let first = render();
    let second = render();
    let bytes: usize = first.iter().map(String::len).sum();
    outcome(
        first == second,
        format!("two runs of regression + kernel-approx reports, csv and json, {bytes} bytes each"),
    )
}

fn criterion_9() -> Outcome {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let mut rng = seeded(909);
    let (r, n, d) = (100, 1000, 3);
    let x = randn(&mut rng, d, n);
    let y = randn(&mut rng, n, 1).column(0).into_owned();
    let xs = randn(&mut rng, d, 100);
    let times: Vec<f64> = [1usize, 2, 4, 8]
        .iter()
        .map(|&m| {
            let comps = (0..m)
                .map(|_| FrequencyMatrix::new(randn(&mut rng, r, d)).unwrap())
                .collect();
            let mix = MixtureModel::new(comps, 0.1, 1.0, FrequencyPrior::default()).unwrap();
            let runs: Vec<f64> = (0..5)
                .map(|_| {
                    pool.install(|| {
                        let start = Instant::now();
                        std::hint::black_box(msrfr_predict(&mix, &x, &y, &xs).unwrap());
                        start.elapsed().as_secs_f64()
                    })
                })
                .collect();
            median(runs)
        })
        .collect();
    let ratios: Vec<f64> = [1.0, 2.0, 4.0, 8.0]
        .iter()
        .zip(&times)
        .map(|(m, t)| t / (m * times[0]))
        .collect();
    let pass = ratios.iter().all(|q| (0.5..=2.0).contains(q));
    outcome(
        pass,
        format!(
            "t(M)/(M t(1)) for M=1,2,4,8: {:?} (each in [0.5, 2]); t(1)={:.1}ms",
            ratios.iter().map(|q| format!("{q:.3}")).collect::<Vec<_>>(),
            times[0] * 1e3
        ),
    )
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 gradient correctness", Duration::from_secs(60), criterion_1),
        ("2 woodbury oracle equivalence", Duration::from_secs(60), criterion_2),
        ("3 svgd sampler quality", Duration::from_secs(300), criterion_3),
        ("4 mc rate", Duration::from_secs(300), criterion_4),
        ("5 mixture prediction identities", Duration::from_secs(60), criterion_5),
        ("6 diversity", Duration::from_secs(300), criterion_6),
        ("7 regression ordering", Duration::from_secs(1800), criterion_7),
        ("8 determinism", Duration::from_secs(300), criterion_8),
        ("9 complexity scaling", Duration::from_secs(300), criterion_9),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for (name, budget, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let in_budget = elapsed <= budget;
        let pass = result.pass && in_budget;
        failures += usize::from(!pass);
        println!(
            "{} criterion {name}: {} [{:.1}s of {}s budget{}]",
            if pass { "PASS" } else { "FAIL" },
            result.detail,
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if in_budget { "" } else { ", over budget" }
        );
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
