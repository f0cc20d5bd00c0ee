use argap::mixture_em::{
    e_step, empirical_mspe, fit_em, least_squares_ar, log_likelihood, m_step, EmConfig, MixtureARModel, TimeSeries,
};
use argap::sampler::{estimate_configuration_volumes, sample_uniform_stable_filters};
use argap::simgen::{generate_tvar, ScenarioTruth, SwitchingSpec};
use argap::Filter;
use proptest::prelude::*;

fn mixture_series(filters: Vec<Filter>, switching: SwitchingSpec, sigma2: f64, n: usize, seed: u64) -> TimeSeries {
    let truth =
        ScenarioTruth { true_m: filters.len(), lag: filters[0].lag(), filters, switching, sigma2, n, burn_in: 100 };
    generate_tvar(&truth, seed).unwrap().series
}

fn random_series(lag: usize, modes: usize, n: usize, seed: u64) -> TimeSeries {
    let weights = estimate_configuration_volumes(lag, 20_000, 1).unwrap();
    let filters = sample_uniform_stable_filters(&weights, modes, seed).unwrap();
    // Independent switching between stable filters can diverge; segments cannot.
    mixture_series(filters, SwitchingSpec::Segmented { n_segments: modes }, 1.0, n, seed ^ 0x55)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn log_likelihood_never_decreases(lag in 1usize..=3, true_m in 1usize..=3, m in 1usize..=4, seed in any::<u64>()) {
        let series = random_series(lag, true_m, 300, seed);
        let fit = fit_em(&series, m, &EmConfig { max_iter: 200, tol: 1e-8, n_restarts: 2 }, seed).unwrap();
        for pair in fit.history.windows(2) {
            prop_assert!(pair[1] >= pair[0] - 1e-8, "{} -> {}", pair[0], pair[1]);
        }
        prop_assert!((fit.history.last().unwrap() - fit.log_likelihood).abs() < 1e-9 * (1.0 + fit.log_likelihood.abs()));
    }

    #[test]
    fn responsibilities_and_weights_stay_on_the_simplex(lag in 1usize..=3, m in 1usize..=4, seed in any::<u64>()) {
        let series = random_series(lag, 2, 200, seed);
        let fit = fit_em(&series, m, &EmConfig { max_iter: 5, tol: 1e-8, n_restarts: 1 }, seed).unwrap();
        let resp = e_step(&fit.model, &series).unwrap();
        for i in 0..resp.len() {
            let row = resp.row(i);
            prop_assert!(row.iter().all(|w| (0.0..=1.0).contains(w)));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let next = m_step(&resp, &series).unwrap();
        prop_assert!(next.weights.iter().all(|w| *w >= 0.0));
        prop_assert!((next.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(next.sigma2 > 0.0);
    }

    #[test]
    fn adding_a_mode_never_raises_the_min_over_modes_error(lag in 1usize..=3, seed in any::<u64>(), extra in prop::collection::vec(-0.5f64..0.5, 3)) {
        let series = random_series(lag, 2, 200, seed);
        let fit = fit_em(&series, 2, &EmConfig { max_iter: 50, tol: 1e-6, n_restarts: 1 }, seed).unwrap();
        let before = empirical_mspe(&fit.model, &series).unwrap();
        let mut modes = fit.model.modes.clone();
        modes.push(Filter::new(extra[..lag].to_vec()).unwrap());
        let mut weights: Vec<f64> = fit.model.weights.iter().map(|w| w * 0.9).collect();
        weights.push(0.1);
        let bigger = MixtureARModel::new(weights, modes, fit.model.sigma2).unwrap();
        prop_assert!(empirical_mspe(&bigger, &series).unwrap() <= before);
    }

    #[test]
    fn single_mode_fit_is_least_squares(lag in 1usize..=4, seed in any::<u64>()) {
        let series = random_series(lag, 2, 250, seed);
        let fit = fit_em(&series, 1, &EmConfig { max_iter: 50, tol: 1e-10, n_restarts: 3 }, seed).unwrap();
        let ls = least_squares_ar(&series).unwrap();
        for (a, b) in fit.model.modes[0].coefficients().iter().zip(ls.coefficients()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn well_separated_modes_are_recovered() {
    let truth = [vec![1.2, -0.5], vec![-0.6, -0.3]];
    let filters: Vec<Filter> = truth.iter().map(|c| Filter::new(c.clone()).unwrap()).collect();
    assert!(filters.iter().all(Filter::is_stable));
    let series =
        mixture_series(filters, SwitchingSpec::IidMultinomial { mode_probabilities: vec![0.5, 0.5] }, 0.01, 1000, 77);
    let fit = fit_em(&series, 2, &EmConfig { n_restarts: 10, ..EmConfig::default() }, 3).unwrap();
    let est: Vec<&[f64]> = fit.model.modes.iter().map(|f| f.coefficients()).collect();
    let err = |perm: [usize; 2]| {
        (0..2)
            .map(|m| truth[m].iter().zip(est[perm[m]]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    };
    let best = err([0, 1]).min(err([1, 0]));
    assert!(best < 0.05, "max coefficient error {best}, estimate {est:?}");
    assert!((fit.model.sigma2 - 0.01).abs() < 0.003);
}

#[test]
fn fits_are_reproducible() {
    let series = random_series(2, 3, 400, 5);
    let config = EmConfig { max_iter: 100, tol: 1e-6, n_restarts: 4 };
    assert_eq!(fit_em(&series, 3, &config, 8).unwrap(), fit_em(&series, 3, &config, 8).unwrap());
}

#[test]
fn likelihood_of_reported_model_matches_fit() {
    let series = random_series(2, 2, 300, 6);
    let fit = fit_em(&series, 2, &EmConfig { max_iter: 100, tol: 1e-8, n_restarts: 3 }, 1).unwrap();
    let ll = log_likelihood(&fit.model, &series).unwrap();
    assert!((ll - fit.log_likelihood).abs() < 1e-9 * ll.abs());
}
