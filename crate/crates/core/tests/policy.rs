use dbo_core::acquisition::{acquisition_value, AcquisitionSpec, Incumbent};
use dbo_core::kernel::{KernelFamily, KernelSpec};
use dbo_core::policy::{boltzmann_sample, greedy_argmax, lattice_values, thompson_select, LatticeSampler, MhConfig};
use dbo_core::rng::derive_seed;
use dbo_core::space::Domain;
use dbo_core::surrogate::{fit_hyperparameters, Dataset, FitConfig, GpModel, Hyperparameters, ModelOptions, ObservationRecord};

fn model_1d(points: &[(f64, f64)]) -> (GpModel<f64>, Incumbent<f64>) {
    let records = points.iter().enumerate().map(|(i, &(x, y))| ObservationRecord::new(0, i as u64, vec![x], y));
    let data = Dataset::from_records(Domain::unit(1), records).unwrap();
    let hyper = if data.len() >= 2 {
        fit_hyperparameters(&data, KernelFamily::Matern52, &FitConfig { seed: 1, ..Default::default() }).unwrap().hyper
    } else {
        Hyperparameters { kernel: KernelSpec::isotropic(KernelFamily::Matern52, 1, 0.2, 1.0).unwrap(), noise_variance: 0.0 }
    };
    let model = GpModel::new(hyper, &data, ModelOptions::default()).unwrap();
    let inc = Incumbent::from_dataset(&data).unwrap();
    (model, inc)
}

fn five_point_model() -> (GpModel<f64>, Incumbent<f64>) {
    let f = |x: f64| (6.0 * x).sin() + x;
    model_1d(&[0.1, 0.3, 0.5, 0.7, 0.9].map(|x| (x, f(x))))
}

fn exact(values: &[f64], beta: f64) -> Vec<f64> {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = values.iter().map(|v| (beta * (v - m)).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|v| v / z).collect()
}

fn tv(samples: &[usize], p: &[f64]) -> f64 {
    let mut h = vec![0.0; p.len()];
    for &s in samples {
        h[s] += 1.0 / samples.len() as f64;
    }
    0.5 * h.iter().zip(p).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[test]
fn zero_beta_is_uniform_by_ks() {
    let (model, inc) = five_point_model();
    let domain = Domain::unit(1);
    let mh = MhConfig::default();
    let mut xs: Vec<f64> = (0..10_000u64)
        .map(|s| boltzmann_sample(&model, &AcquisitionSpec::ei(), &inc, 0.0, &domain, &mh, s).unwrap().point[0])
        .collect();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).abs().max(((i + 1) as f64 / n - x).abs()))
        .fold(0.0, f64::max);
    // asymptotic critical value at the 0.01 level
    assert!(d < 1.628 / n.sqrt(), "KS statistic {d}");
}

#[test]
fn exact_argmax_mass_grows_with_beta() {
    let (model, inc) = five_point_model();
    let (_, values) = lattice_values(&model, &AcquisitionSpec::ei(), &inc, &Domain::unit(1), 101).unwrap();
    let top = (0..values.len()).max_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    let second = (0..values.len()).filter(|&i| i != top).map(|i| values[i]).fold(f64::NEG_INFINITY, f64::max);
    let gap = values[top] - second;
    assert!(gap > 0.0);
    // sweep beta * gap from 1e-3 up to 1e3
    let mut last = 0.0;
    for k in 0..=60 {
        let beta = if k == 0 { 0.0 } else { 10f64.powf(-3.0 + k as f64 * 0.1) / gap };
        let mass = exact(&values, beta)[top];
        assert!(mass >= last, "beta {beta}");
        last = mass;
    }
    assert!(last > 0.99);
}

#[test]
fn longer_chains_get_closer() {
    let (model, inc) = five_point_model();
    let spec = AcquisitionSpec::ei();
    let (_, values) = lattice_values(&model, &spec, &inc, &Domain::unit(1), 101).unwrap();
    let range = values.iter().copied().fold(f64::NEG_INFINITY, f64::max) - values.iter().copied().fold(f64::INFINITY, f64::min);
    let beta = 3.0 / range;
    let mh = MhConfig::default();
    let sampler = LatticeSampler::new(&values, beta, &mh).unwrap();
    let p = exact(&values, beta);
    let short = tv(&sampler.trajectory(1_000 + mh.burn_in, 11).unwrap(), &p);
    let long = tv(&sampler.trajectory(100_000 + mh.burn_in, 11).unwrap(), &p);
    assert!(long < short, "{long} vs {short}");
    assert!(long < 0.05);
}

#[test]
fn greedy_matches_dense_grid() {
    let (model, inc) = model_1d(&[(0.37, 0.5)]);
    let spec = AcquisitionSpec::ei();
    let domain = Domain::unit(1);
    let grid: Vec<f64> = (0..100_000).map(|i| i as f64 / 99_999.0).collect();
    let vals: Vec<f64> = grid.iter().map(|x| acquisition_value(&model, &spec, &inc, &[*x]).unwrap()).collect();
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let x = greedy_argmax(&model, &spec, &inc, &domain, 8, 3).unwrap();
    let got = acquisition_value(&model, &spec, &inc, &x).unwrap();
    assert!(got >= hi - 1e-6 * (hi - lo), "{got} vs {hi}");
}

fn prior_2d() -> GpModel<f64> {
    let hyper = Hyperparameters { kernel: KernelSpec::isotropic(KernelFamily::Matern52, 2, 0.2, 1.0).unwrap(), noise_variance: 0.0 };
    GpModel::prior(hyper, Domain::unit(2)).unwrap()
}

fn grid_index(domain: &Domain<f64>, size: usize, seed: u64, x: &[f64]) -> usize {
    let grid = domain.low_discrepancy_grid(size, derive_seed(seed, &[0])).unwrap();
    grid.iter().position(|g| g.as_slice() == x).unwrap()
}

#[test]
fn thompson_is_exchangeable_under_the_prior() {
    let model = prior_2d();
    let domain = Domain::unit(2);
    let mut counts = [0usize; 64];
    let n = 10_000;
    for seed in 0..n {
        let x = thompson_select(&model, &domain, 64, seed).unwrap();
        counts[grid_index(&domain, 64, seed, &x)] += 1;
    }
    for c in counts {
        assert!((c as f64 / n as f64 - 1.0 / 64.0).abs() <= 0.01, "{counts:?}");
    }
}

#[test]
fn thompson_finds_a_dominant_observation() {
    let domain = Domain::unit(2);
    let hyper = Hyperparameters { kernel: KernelSpec::isotropic(KernelFamily::Matern52, 2, 0.2, 1.0).unwrap(), noise_variance: 0.0 };
    let n = 500;
    let mut hits = 0;
    for seed in 0..n {
        let grid = domain.low_discrepancy_grid(64, derive_seed(seed, &[0])).unwrap();
        let records = [(7, -10.0), (20, 0.0), (40, 0.5)]
            .iter()
            .enumerate()
            .map(|(i, &(g, y))| ObservationRecord::new(0, i as u64, grid[g].clone(), y));
        let data = Dataset::from_records(domain.clone(), records).unwrap();
        let model = GpModel::new(hyper.clone(), &data, ModelOptions::raw()).unwrap();
        hits += (thompson_select(&model, &domain, 64, seed).unwrap() == grid[7]) as usize;
    }
    assert!(hits as f64 / n as f64 > 0.95, "{hits}/{n}");
}

#[test]
fn thompson_grid_of_one() {
    let domain = Domain::unit(2);
    let x = thompson_select(&prior_2d(), &domain, 1, 5).unwrap();
    assert_eq!(x, domain.low_discrepancy_grid(1, derive_seed(5, &[0])).unwrap()[0]);
}

#[test]
fn every_policy_is_deterministic() {
    let (model, inc) = five_point_model();
    let domain = Domain::unit(1);
    let spec = AcquisitionSpec::ei();
    let mh = MhConfig::default();
    for seed in [0, 1, 99] {
        assert_eq!(
            boltzmann_sample(&model, &spec, &inc, 2.0, &domain, &mh, seed).unwrap(),
            boltzmann_sample(&model, &spec, &inc, 2.0, &domain, &mh, seed).unwrap()
        );
        assert_eq!(
            greedy_argmax(&model, &spec, &inc, &domain, 4, seed).unwrap(),
            greedy_argmax(&model, &spec, &inc, &domain, 4, seed).unwrap()
        );
        assert_eq!(thompson_select(&model, &domain, 32, seed).unwrap(), thompson_select(&model, &domain, 32, seed).unwrap());
    }
}
