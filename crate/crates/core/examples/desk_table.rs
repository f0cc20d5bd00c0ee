//! Desk-scale benchmark: reference curve plus scenario replications.
//!
//! `cargo run --release -p argap-core --example desk_table -- <scenario> <replications> <em-restarts> [measure]`

use std::time::Instant;

use argap::gapstat::{reference_curve, EmpiricalMeasure, ReferenceConfig};
use argap::mixture_em::EmConfig;
use argap::sampler::{default_volume_samples, estimate_configuration_volumes, DEFAULT_VOLUME_SEED};
use argap::simgen::{run_experiment, scenario_spec, ExperimentConfig, Method};

fn main() -> argap::Result<()> {
    let raw: Vec<String> = std::env::args().skip(1).collect();
    let args: Vec<u64> = raw.iter().take(3).map(|a| a.parse().expect("integer argument")).collect();
    let measure: EmpiricalMeasure = raw.get(3).map_or(Ok(EmpiricalMeasure::default()), |m| m.parse())?;
    let id = args.first().copied().unwrap_or(3) as u8;
    let replications = args.get(1).copied().unwrap_or(20) as usize;
    let restarts = args.get(2).copied().unwrap_or(10) as usize;
    let spec = scenario_spec(id)?;
    let m_max = if spec.true_m >= 6 { 8 } else { 6 };

    let t = Instant::now();
    let weights = estimate_configuration_volumes(spec.lag, default_volume_samples(spec.lag), DEFAULT_VOLUME_SEED)?;
    let config = ReferenceConfig { lag: spec.lag, m_max, n_filters: 500, n_instances: 5, kmedoids_restarts: 4 };
    let reference = reference_curve(&config, &weights, 11)?;
    println!("reference {:?} ({:.1?})", reference.values, t.elapsed());

    let t = Instant::now();
    let em = EmConfig { n_restarts: restarts, ..EmConfig::default() };
    let table =
        run_experiment(id, &ExperimentConfig { n_replications: replications, em, measure }, &reference, &weights, 7)?;
    for method in Method::ALL {
        println!(
            "{:>3}: {:?} accuracy {:.2} mode {}",
            method.name(),
            table.counts[&method],
            table.accuracy(method),
            table.modal_selection(method)
        );
    }
    println!("({:.1?})", t.elapsed());
    Ok(())
}
