use pooled_wear::diagnostics::{split_rhat, summarize};
use pooled_wear::io::{generate_fleet, GeneratorConfig};
use pooled_wear::{fit, GroupData, GroupedDataset, HyperConfig, ModelKind, Observation, SamplerConfig, XScaling};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, Distribution};

fn line_data(m: f64, c: f64, gamma: f64, n: usize, seed: u64) -> GroupedDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Cauchy::new(0.0, gamma).unwrap();
    let obs = (0..n)
        .map(|i| {
            let x = i as f64 / (n - 1) as f64;
            Observation { x, y: m * x + c + noise.sample(&mut rng), raw_x: x }
        })
        .collect();
    GroupedDataset::new(vec![GroupData { label: "a".into(), obs }], XScaling::identity()).unwrap()
}

#[test]
fn narrow_line_is_recovered() {
    let d = line_data(0.7, 0.3, 0.005, 200, 3);
    let s = fit(ModelKind::Independent, &d, &HyperConfig::default(), &SamplerConfig::default()).unwrap();
    let m = s.mean_of("m[a]").unwrap();
    let c = s.mean_of("c[a]").unwrap();
    let g = s.mean_of("gamma[a]").unwrap();
    assert!((m - 0.7).abs() < 0.005, "m {m}");
    assert!((c - 0.3).abs() < 0.005, "c {c}");
    assert!((g / 0.005 - 1.0).abs() < 0.3, "gamma {g}");
}

#[test]
fn runs_with_different_seeds_agree() {
    let d = line_data(0.5, 0.35, 0.1, 10, 11);
    let runs: Vec<_> = [5u64, 77]
        .iter()
        .map(|&rng_seed| {
            let cfg = SamplerConfig { rng_seed, ..SamplerConfig::default() };
            fit(ModelKind::Independent, &d, &HyperConfig::default(), &cfg).unwrap()
        })
        .collect();
    for p in 0..runs[0].names.len() {
        let chains: Vec<Vec<f64>> = runs.iter().flat_map(|r| r.chain_column(p)).collect();
        let r = split_rhat(&chains).unwrap().value;
        assert!(r < 1.01, "{}: {r}", runs[0].names[p]);
    }
}

#[test]
fn scale_draws_are_strictly_positive() {
    let (d, _) = generate_fleet(&GeneratorConfig::default()).unwrap();
    let cfg = SamplerConfig { n_warmup: 300, n_samples: 300, ..SamplerConfig::default() };
    let s = fit(ModelKind::Hierarchical, &d, &HyperConfig::default(), &cfg).unwrap();
    for (p, name) in s.names.iter().enumerate() {
        if name.starts_with("gamma") || name.starts_with("sigma") {
            assert!(s.column(p).iter().all(|&v| v > 0.0), "{name}");
        }
    }
    assert_eq!(summarize(&s).len(), 26);
    assert!(!s.divergence_flagged());
}
