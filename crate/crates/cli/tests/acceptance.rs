//! Acceptance criteria, one line each. Runs as a plain binary so the lines
//! are always printed; exits non-zero when any criterion fails.

use std::fmt::Write as _;
use std::fs;
use std::process::Command;
use std::time::{Duration, Instant};

use pooled_wear::density::cauchy_with_grad;
use pooled_wear::diagnostics::{summarize, summarize_one};
use pooled_wear::experiment::{run_experiment, ExperimentConfig};
use pooled_wear::io::{generate_fleet, read_dataset, write_dataset_csv, GeneratorConfig};
use pooled_wear::model::{grad_log_posterior, log_posterior};
use pooled_wear::predictive::{BandConfig, Comparison};
use pooled_wear::sampler::{SampleMeta, Target};
use pooled_wear::{
    fit, sample, GroupedDataset, HyperConfig, Layout, ModelKind, ParameterVector, Posterior, PosteriorSamples,
    SamplerConfig, XScaling,
};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, Distribution};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(limit: Duration, took: Duration) -> bool {
    took <= limit
}

fn sampler(seed: u64) -> SamplerConfig {
    SamplerConfig {
        rng_seed: seed,
        max_threads: std::thread::available_parallelism().map_or(1, |n| n.get()).min(4),
        ..SamplerConfig::default()
    }
}

// 1 ------------------------------------------------------------------------

/// Fourth-order central difference of `f` along coordinate `i`.
fn central_difference(f: &dyn Fn(&[f64]) -> f64, x: &[f64], i: usize) -> f64 {
    let h = 1e-4 * x[i].abs().max(1.0);
    let at = |d: f64| {
        let mut y = x.to_vec();
        y[i] += d;
        f(&y)
    };
    (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h)
}

fn gradient_oracle() -> Outcome {
    let start = Instant::now();
    let (data, _) = generate_fleet(&GeneratorConfig::default()).unwrap();
    let cfg = HyperConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for kind in [ModelKind::Independent, ModelKind::Hierarchical] {
        let layout = Layout::new(kind, data.n_groups());
        let f = |v: &[f64]| log_posterior(&ParameterVector::new(layout, v.to_vec()).unwrap(), &data, &cfg).unwrap();
        for _ in 0..100 {
            let values: Vec<f64> = (0..layout.len()).map(|_| rng.random_range(-2.0..2.0)).collect();
            let theta = ParameterVector::new(layout, values).unwrap();
            let g = grad_log_posterior(&theta, &data, &cfg).unwrap();
            for (i, &gi) in g.iter().enumerate() {
                let fd = central_difference(&f, &theta.values, i);
                let tol = (1e-4 * fd.abs()).max(1e-7);
                worst = worst.max((gi - fd).abs() / tol);
                failures += usize::from((gi - fd).abs() > tol);
                checked += 1;
            }
        }
    }
    let took = start.elapsed();
    outcome(
        failures == 0 && within(Duration::from_secs(10), took),
        format!("{checked} components, {failures} outside tolerance, worst error/tolerance {worst:.3}, {took:.1?} (limit 10 s)"),
    )
}

// 2 ------------------------------------------------------------------------

/// Single-group line with Cauchy(0, 1) priors on slope and intercept and a
/// known noise scale.
struct FixedScaleLine {
    x: Vec<f64>,
    y: Vec<f64>,
    gamma: f64,
}

impl FixedScaleLine {
    fn log_density(&self, m: f64, c: f64) -> f64 {
        let mut lp = cauchy_with_grad(m, 0.0, 1.0).value + cauchy_with_grad(c, 0.0, 1.0).value;
        for (x, y) in self.x.iter().zip(&self.y) {
            lp += cauchy_with_grad(*y, m * x + c, self.gamma).value;
        }
        lp
    }

    /// Posterior means of (m, c) by the midpoint rule on `n × n` cells over
    /// `[-half, half]²`.
    fn quadrature_means(&self, n: usize, half: f64) -> (f64, f64) {
        let h = 2.0 * half / n as f64;
        let nodes: Vec<f64> = (0..n).map(|i| -half + (i as f64 + 0.5) * h).collect();
        let mut lps = Vec::with_capacity(n * n);
        for &m in &nodes {
            for &c in &nodes {
                lps.push(self.log_density(m, c));
            }
        }
        let max = lps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (mut z, mut sm, mut sc) = (0.0, 0.0, 0.0);
        for (i, &m) in nodes.iter().enumerate() {
            for (j, &c) in nodes.iter().enumerate() {
                let w = (lps[i * n + j] - max).exp();
                z += w;
                sm += w * m;
                sc += w * c;
            }
        }
        (sm / z, sc / z)
    }
}

impl Target for FixedScaleLine {
    fn dim(&self) -> usize {
        2
    }

    fn log_density_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let (m, c) = (theta[0], theta[1]);
        let pm = cauchy_with_grad(m, 0.0, 1.0);
        let pc = cauchy_with_grad(c, 0.0, 1.0);
        let mut lp = pm.value + pc.value;
        grad[0] = pm.d_x;
        grad[1] = pc.d_x;
        for (x, y) in self.x.iter().zip(&self.y) {
            let t = cauchy_with_grad(*y, m * x + c, self.gamma);
            lp += t.value;
            grad[0] += t.d_loc * x;
            grad[1] += t.d_loc;
        }
        lp
    }

    fn param_names(&self) -> Vec<String> {
        vec!["m".into(), "c".into()]
    }
}

fn quadrature_oracle() -> Outcome {
    let start = Instant::now();
    let (m_true, c_true, gamma) = (0.6, 0.3, 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let noise = Cauchy::new(0.0, gamma).unwrap();
    let x: Vec<f64> = (0..10).map(|i| i as f64 / 9.0).collect();
    let y = x.iter().map(|x| m_true * x + c_true + noise.sample(&mut rng)).collect();
    let target = FixedScaleLine { x, y, gamma };

    let samples = sample(&target, &sampler(5)).unwrap();
    let fine = target.quadrature_means(400, 6.0);
    let coarse = target.quadrature_means(200, 6.0);
    let mut pass = within(Duration::from_secs(60), start.elapsed());
    let mut detail = String::new();
    for (p, (q, q_coarse)) in [(0, (fine.0, coarse.0)), (1, (fine.1, coarse.1))] {
        let s = summarize_one(&samples.names[p], &samples.chain_column(p));
        let quad_err = (q - q_coarse).abs();
        let se = (s.mcse_mean.powi(2) + quad_err.powi(2)).sqrt();
        let diff = (s.mean - q).abs();
        pass &= diff < 3.0 * se && diff < 0.05;
        let _ = write!(
            detail,
            "{}: HMC {:.4} vs grid {:.4} (|diff| {:.4}, 3 SE {:.4}); ",
            s.name,
            s.mean,
            q,
            diff,
            3.0 * se
        );
    }
    let _ = write!(detail, "{:.1?} (limit 60 s)", start.elapsed());
    outcome(pass, detail)
}

// 3 ------------------------------------------------------------------------

fn convergence() -> Outcome {
    let start = Instant::now();
    let (data, _) = generate_fleet(&GeneratorConfig::default()).unwrap();
    let s = fit(ModelKind::Hierarchical, &data, &HyperConfig::default(), &sampler(1)).unwrap();
    let took = start.elapsed();
    let summary = summarize(&s);
    let worst_rhat = summary.iter().max_by(|a, b| a.rhat_value().total_cmp(&b.rhat_value())).unwrap();
    let ess = |p: &pooled_wear::diagnostics::ParameterSummary| p.ess_bulk.map_or(0.0, |d| d.value);
    let worst_ess = summary.iter().min_by(|a, b| ess(a).total_cmp(&ess(b))).unwrap();
    let pass = summary.len() == 26
        && summary.iter().all(|p| p.rhat_value() < 1.05 && ess(p) > 100.0)
        && within(Duration::from_secs(300), took);
    outcome(
        pass,
        format!(
            "{} parameters; max R-hat {:.4} ({}), min bulk ESS {:.0} ({}); {took:.1?} (limit 5 min)",
            summary.len(),
            worst_rhat.rhat_value(),
            worst_rhat.name,
            ess(worst_ess),
            worst_ess.name
        ),
    )
}

// 4, 5 ---------------------------------------------------------------------

struct SeedRun {
    seed: u64,
    width: (f64, f64),
    nlpd: (f64, f64),
    shrunk: bool,
}

fn sparse_pooled(cmp: &Comparison, pick: impl Fn(&pooled_wear::predictive::ComparisonRow) -> (f64, f64, usize)) -> (f64, f64) {
    let (mut a, mut b, mut n) = (0.0, 0.0, 0.0);
    for row in cmp.rows.iter().filter(|r| r.sparse) {
        let (ai, bi, w) = pick(row);
        a += w as f64 * ai;
        b += w as f64 * bi;
        n += w as f64;
    }
    (a / n, b / n)
}

fn experiment_runs() -> Vec<SeedRun> {
    (1..=10u64)
        .map(|seed| {
            let (data, _) = generate_fleet(&GeneratorConfig { seed, ..GeneratorConfig::default() }).unwrap();
            let cfg = ExperimentConfig {
                sampler: sampler(seed),
                bands: BandConfig { seed, ..BandConfig::default() },
                ..ExperimentConfig::for_dataset(&data)
            };
            let r = run_experiment(&data, &cfg).unwrap();
            let width = sparse_pooled(&r.comparison, |row| {
                (row.independent.mean_width95, row.hierarchical.mean_width95, 1)
            });
            let nlpd = sparse_pooled(&r.comparison, |row| {
                (row.independent.nlpd.unwrap(), row.hierarchical.nlpd.unwrap(), row.n_holdout)
            });
            let mu_m = r.hierarchical.samples.mean_of("mu_m").unwrap();
            let shrunk = cfg.sparse.iter().all(|tool| {
                let name = format!("m[{tool}]");
                let hier = r.hierarchical.samples.mean_of(&name).unwrap();
                let ind = r.independent.samples.mean_of(&name).unwrap();
                (hier - mu_m).abs() < (ind - mu_m).abs()
            });
            SeedRun { seed, width, nlpd, shrunk }
        })
        .collect()
}

fn sparse_experiment(runs: &[SeedRun]) -> Outcome {
    let narrower = runs.iter().filter(|r| r.width.1 < r.width.0).count();
    let better = runs.iter().filter(|r| r.nlpd.1 < r.nlpd.0).count();
    let mut detail = format!("narrower bands in {narrower}/10 (need 9), lower NLPD in {better}/10 (need 8); per seed width ind/hier, NLPD ind/hier:");
    for r in runs {
        let _ = write!(
            detail,
            " [{}: {:.3}/{:.3}, {:.3}/{:.3}]",
            r.seed, r.width.0, r.width.1, r.nlpd.0, r.nlpd.1
        );
    }
    outcome(narrower >= 9 && better >= 8, detail)
}

fn shrinkage(runs: &[SeedRun]) -> Outcome {
    let shrunk: Vec<u64> = runs.iter().filter(|r| r.shrunk).map(|r| r.seed).collect();
    outcome(
        shrunk.len() >= 8,
        format!("both sparse slopes closer to mu_m in {}/10 seeds (need 8): {shrunk:?}", shrunk.len()),
    )
}

// 6 ------------------------------------------------------------------------

fn calibration() -> Outcome {
    let (mut inside, mut total) = (0.0, 0usize);
    for seed in 101..=108u64 {
        let (data, _) = generate_fleet(&GeneratorConfig { seed, ..GeneratorConfig::default() }).unwrap();
        let cfg = ExperimentConfig {
            sampler: sampler(seed),
            bands: BandConfig { seed, ..BandConfig::default() },
            ..ExperimentConfig::for_dataset(&data)
        };
        let r = run_experiment(&data, &cfg).unwrap();
        let agg = &r.hierarchical.report.aggregate;
        inside += agg.coverage95.unwrap() * agg.n_holdout as f64;
        total += agg.n_holdout;
    }
    let coverage = inside / total as f64;
    outcome(
        total >= 200 && (0.88..=1.0).contains(&coverage),
        format!("hierarchical 95% coverage {coverage:.4} over {total} held-out points from 8 fleets (need [0.88, 1.00])"),
    )
}

// 7 ------------------------------------------------------------------------

/// The hierarchical model with the Cauchy likelihood swapped for a normal
/// one of scale `gamma_k`.
struct GaussianHierarchical {
    prior: Posterior,
    data: GroupedDataset,
}

impl GaussianHierarchical {
    fn new(data: &GroupedDataset) -> Self {
        GaussianHierarchical {
            prior: Posterior::new(ModelKind::Hierarchical, &data.emptied(), &HyperConfig::default()).unwrap(),
            data: data.clone(),
        }
    }
}

impl Target for GaussianHierarchical {
    fn dim(&self) -> usize {
        self.prior.dim()
    }

    fn log_density_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let layout = self.prior.layout();
        let mut lp = self.prior.log_density_grad(theta, grad);
        for (k, g) in self.data.groups.iter().enumerate() {
            let (m, c, log_gamma) = (theta[layout.slope(k)], theta[layout.intercept(k)], theta[layout.log_gamma(k)]);
            let inv_var = (-2.0 * log_gamma).exp();
            for o in &g.obs {
                let r = o.y - (m * o.x + c);
                lp += -0.5 * (2.0 * std::f64::consts::PI).ln() - log_gamma - 0.5 * r * r * inv_var;
                grad[layout.slope(k)] += r * o.x * inv_var;
                grad[layout.intercept(k)] += r * inv_var;
                grad[layout.log_gamma(k)] += -1.0 + r * r * inv_var;
            }
        }
        lp
    }

    fn param_names(&self) -> Vec<String> {
        self.prior.param_names()
    }

    fn constrain(&self, theta: &[f64], out: &mut Vec<f64>) {
        self.prior.constrain(theta, out)
    }

    fn meta(&self) -> SampleMeta {
        SampleMeta { scaling: self.data.scaling, ..self.prior.meta() }
    }
}

fn with_outliers(data: &GroupedDataset, tool: usize, rate: f64, seed: u64) -> GroupedDataset {
    let mut out = data.clone();
    let obs = &mut out.groups[tool].obs;
    let n_out = (rate * obs.len() as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in index::sample(&mut rng, obs.len(), n_out) {
        obs[i].y += 10.0;
    }
    out
}

fn slope_stats(s: &PosteriorSamples, name: &str) -> (f64, f64) {
    let col = s.column_by_name(name).unwrap();
    let mean = col.iter().sum::<f64>() / col.len() as f64;
    let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (col.len() - 1) as f64;
    (mean, var.sqrt())
}

fn robustness() -> Outcome {
    let mut within_3sd = 0;
    let mut gaussian_worse = 0;
    let mut detail = String::new();
    for seed in 1..=10u64 {
        let (clean, _) = generate_fleet(&GeneratorConfig { seed, ..GeneratorConfig::default() }).unwrap();
        let dirty = with_outliers(&clean, 0, 0.10, 1000 + seed);
        let name = format!("m[{}]", clean.groups[0].label);
        let cfg = sampler(seed);
        let hyper = HyperConfig::default();
        let (cauchy_clean, cauchy_sd) = slope_stats(&fit(ModelKind::Hierarchical, &clean, &hyper, &cfg).unwrap(), &name);
        let (cauchy_dirty, _) = slope_stats(&fit(ModelKind::Hierarchical, &dirty, &hyper, &cfg).unwrap(), &name);
        let (gauss_clean, _) = slope_stats(&sample(&GaussianHierarchical::new(&clean), &cfg).unwrap(), &name);
        let (gauss_dirty, _) = slope_stats(&sample(&GaussianHierarchical::new(&dirty), &cfg).unwrap(), &name);
        let shift_c = (cauchy_dirty - cauchy_clean).abs();
        let shift_g = (gauss_dirty - gauss_clean).abs();
        within_3sd += usize::from(shift_c < 3.0 * cauchy_sd);
        gaussian_worse += usize::from(shift_g > shift_c);
        let _ = write!(detail, " [{seed}: {shift_c:.4} vs 3sd {:.4}; gauss {shift_g:.4}]", 3.0 * cauchy_sd);
    }
    outcome(
        within_3sd == 10 && gaussian_worse >= 8,
        format!(
            "Cauchy slope shift < 3 posterior sd in {within_3sd}/10 seeds (need 10); Gaussian shifts more in {gaussian_worse}/10 (need 8):{detail}"
        ),
    )
}

// 8 ------------------------------------------------------------------------

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = |args: &[&str]| {
        let o = Command::new(env!("CARGO_BIN_EXE_pooled-wear"))
            .current_dir(dir.path())
            .args(args)
            .output()
            .expect("binary runs");
        o.status.code().unwrap_or(-1)
    };
    let first = run(&["fit", "--model", "hierarchical", "--generate", "--out", "a"]);
    let second = run(&["fit", "--manifest", "a/manifest.json", "--out", "b"]);
    let third = run(&["fit", "--manifest", "a/manifest.json", "--out", "c"]);
    let read = |d: &str| fs::read(dir.path().join(d).join("draws.csv")).unwrap_or_default();
    let (a, b, c) = (read("a"), read("b"), read("c"));
    let identical = !a.is_empty() && a == b && b == c;
    outcome(
        identical && [first, second, third].iter().all(|&c| c == 0),
        format!(
            "exit codes {first}/{second}/{third}; draws.csv {} bytes, reruns from the manifest byte-identical: {identical}",
            a.len()
        ),
    )
}

// 9 ------------------------------------------------------------------------

fn random_csv(rng: &mut ChaCha8Rng, rows: usize) -> String {
    let mut s = String::from("tool_id,sliding_distance,roughness_ra\n");
    let labels = ["1", "2", "T-07", "insert_a", "\"tool, 9\"", "é"];
    for i in 0..rows {
        let label = labels[rng.random_range(0..labels.len())];
        let x: f64 = match i {
            0 => 0.0,
            1 => 150.0,
            _ => rng.random_range(0.0..150.0),
        };
        let y: f64 = rng.random_range(0.0..2.0) * 10f64.powi(rng.random_range(-3..3));
        let fx = match rng.random_range(0..3) {
            0 => format!("{x}"),
            1 => format!("{x:.3}"),
            _ => format!("{x:e}"),
        };
        let _ = writeln!(s, "{label},{fx},{y}");
    }
    s
}

fn round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut ok = 0;
    let files = 20;
    for _ in 0..files {
        let text = random_csv(&mut rng, 1000);
        let first = read_dataset(text.as_bytes(), "random").unwrap();
        let mut out = Vec::new();
        write_dataset_csv(&first, &mut out).unwrap();
        let second = read_dataset(out.as_slice(), "serialized").unwrap();
        ok += usize::from(first == second && first.n_obs() == 1000 && second.scaling != XScaling::identity());
    }
    outcome(ok == files, format!("{ok}/{files} random 1000-row files equal after load, serialize, load"))
}

fn main() {
    let mut failed = 0;
    let mut report = |id: u32, name: &str, o: Outcome| {
        println!("[{}] {id}. {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    };
    report(1, "gradient oracle", gradient_oracle());
    report(2, "quadrature oracle", quadrature_oracle());
    report(3, "convergence on the default fleet", convergence());
    let runs = experiment_runs();
    report(4, "sparse-tool bands and NLPD", sparse_experiment(&runs));
    report(5, "shrinkage of sparse slopes", shrinkage(&runs));
    report(6, "predictive calibration", calibration());
    report(7, "robustness to outliers", robustness());
    report(8, "fit determinism from manifest", determinism());
    report(9, "dataset CSV round trip", round_trip());
    println!("{} of 9 acceptance criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
