use proptest::prelude::*;

use spikeslab::bgl_ss::run_bgl_ss;
use spikeslab::dists::RngStream;
use spikeslab::geweke::batch_means_se;
use spikeslab::io::read_design;
use spikeslab::model::{Pi0Prior, Standardizer};
use spikeslab::sim::{
    coefficient_table, data_stream, evaluate_method, median_mse, run_benchmark, BenchmarkConfig, ExampleSpec, Method,
};
use spikeslab::{make_design, SamplerConfig};

fn quick_config() -> SamplerConfig {
    SamplerConfig { n_iter: 1_500, n_burn: 500, em_rounds: 4, em_inner_iters: 200, ..SamplerConfig::default() }
}

#[test]
fn spike_frequency_rises_with_fixed_prior_weight() {
    let spec = ExampleSpec::new(1).unwrap();
    let data = spec.generate(&mut RngStream::new(5, 0)).unwrap();
    let train = Standardizer::fit(&data.train).transform(&data.train).unwrap();
    let mut config = SamplerConfig { n_iter: 6_000, n_burn: 1_000, ..SamplerConfig::default() };
    let sizes = train.group_sizes().to_vec();
    let mut per_setting = Vec::new();
    for (k, pi0) in [0.2, 0.5, 0.8].into_iter().enumerate() {
        config.bgl.pi0 = Pi0Prior::Fixed { value: pi0 };
        let draws = run_bgl_ss(&train, &config, 3.0, &mut RngStream::new(11, k as u64)).unwrap();
        let stats: Vec<(f64, f64)> = (0..sizes.len())
            .map(|g| {
                let start: usize = sizes[..g].iter().sum();
                let trace: Vec<f64> = (0..draws.n_draws())
                    .map(|d| {
                        let zero = draws.draw(d)[start..start + sizes[g]].iter().all(|&b| b == 0.0);
                        f64::from(u8::from(zero))
                    })
                    .collect();
                let mean = trace.iter().sum::<f64>() / trace.len() as f64;
                (mean, batch_means_se(&trace))
            })
            .collect();
        per_setting.push(stats);
    }
    for pair in per_setting.windows(2) {
        for (g, (lo, hi)) in pair[0].iter().zip(&pair[1]).enumerate() {
            let slack = 2.0 * (lo.1 * lo.1 + hi.1 * hi.1).sqrt();
            assert!(hi.0 >= lo.0 - slack, "group {g}: {lo:?} then {hi:?}");
        }
    }
}

#[test]
fn replication_is_reconstructible_from_seed_and_indices() {
    let mut config = BenchmarkConfig::new(vec![3], vec![Method::BglSs, Method::GroupLasso], 3, quick_config());
    config.boot_reps = 100;
    let report = run_benchmark(&config).unwrap();
    let spec = ExampleSpec::new(3).unwrap();
    for rec in &report.replications {
        let data = spec
            .generate(&mut RngStream::new(config.seed, data_stream(3, rec.replication)))
            .unwrap();
        let again = evaluate_method(&data, 3, rec.replication, rec.method, &config.sampler, config.seed);
        assert_eq!(&again, rec);
    }
}

#[test]
fn within_group_sparsity_under_high_signal() {
    // σ = 1 variant of the first example; β₃ is a true zero inside an active group
    let spec = ExampleSpec::new(1).unwrap().with_sigma(1.0);
    let config = SamplerConfig::default();
    let (mut bsgs_zero, mut bgl_zero, mut full_pattern) = (0, 0, 0);
    for k in 0..10 {
        let table = coefficient_table(&spec, &config, 20_150_101 + k).unwrap();
        let bsgs = &table.columns["bsgs-ss median"];
        let bgl = &table.columns["bgl-ss median"];
        assert!(bsgs[1] != 0.0 && bgl[1] != 0.0, "the strongest coefficient must survive");
        bsgs_zero += usize::from(bsgs[2] == 0.0);
        bgl_zero += usize::from(bgl[2] == 0.0);
        full_pattern += usize::from(bsgs[2] == 0.0 && bsgs[0] != 0.0 && bsgs[3] != 0.0);
    }
    assert_eq!(bgl_zero, 0, "group-level prior cannot zero one coefficient of an active group");
    assert!(bsgs_zero >= 3, "bsgs zeroed the null coefficient in {bsgs_zero}/10 data sets");
    assert!(full_pattern >= 1);
}

fn csv_text(y: &[f64], x: &[Vec<f64>]) -> String {
    let p = x[0].len();
    let mut s = String::from("y");
    for j in 0..p {
        s.push_str(&format!(",x{j}"));
    }
    s.push('\n');
    for (yi, row) in y.iter().zip(x) {
        s.push_str(&yi.to_string());
        for v in row {
            s.push_str(&format!(",{v}"));
        }
        s.push('\n');
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn csv_round_trip(
        sizes in prop::collection::vec(1usize..4, 1..4),
        n in 1usize..6,
        seed in any::<u64>(),
    ) {
        use rand::Rng;
        let p: usize = sizes.iter().sum();
        let mut rng = RngStream::new(seed, 0);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1e3..1e3)).collect();
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.random_range(-1e3..1e3)).collect()).collect();
        let read = read_design(csv_text(&y, &x).as_bytes(), sizes.clone()).unwrap();
        let direct = make_design(&y, &x, &sizes).unwrap();
        prop_assert_eq!(read.y(), direct.y());
        prop_assert_eq!(read.x(), direct.x());
        prop_assert_eq!(read.group_sizes(), &sizes[..]);
    }

    #[test]
    fn median_mse_lies_within_sample_range(
        values in prop::collection::vec(0.0f64..100.0, 2..40),
        seed in any::<u64>(),
    ) {
        let (m, se) = median_mse(&values, 200, &mut RngStream::new(seed, 1)).unwrap();
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo <= m && m <= hi);
        prop_assert!(se >= 0.0 && se <= hi - lo);
    }
}
