//! The phi^2 tail in five dimensions, end to end: evolve at +-eps and
//! +-eps/2, keep the odd part, remove the linear response, and fit.
//! Takes about half a minute on one core.

use wavetails::evolver::{evolve, evolve_free, order_isolate, GridConfig, Parity};
use wavetails::predictions::predict_tail;
use wavetails::tailfit::{compare, local_slope, FitOptions};
use wavetails::wavedata::{DimensionIndex, GeneratingFunction, NonlinearityTerm, SimulationConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dim = DimensionIndex::new(1)?;
    let a = GeneratingFunction::reference_asymmetric(1, 0.2);
    let term = NonlinearityTerm::power(2);
    let (r_obs, t_max) = (2.0, 200.0);
    let cfg = SimulationConfig {
        dimension: dim,
        terms: vec![term],
        generating: a.clone(),
        epsilons: vec![0.05, 0.025],
        grid: GridConfig::new(1.0 / 64.0, r_obs + t_max + a.radius() + 1.0, t_max),
        observers: vec![r_obs],
    };
    let free = &evolve_free(&cfg)?[0];
    let tail = |eps: f64| -> Result<_, Box<dyn std::error::Error>> {
        let plus = &evolve(&cfg, eps)?[0];
        let minus = &evolve(&cfg, -eps)?[0];
        Ok(order_isolate(plus, minus, Parity::Odd)?.subtract_scaled(free, eps)?)
    };
    let main = tail(0.05)?;
    let half = tail(0.025)?;

    let opts = FitOptions {
        window: Some((20.0, 160.0)),
        ..FitOptions::default()
    };
    let profile = local_slope(&main, (20.0, 160.0), &opts)?;
    for s in profile.samples.iter().step_by(80) {
        println!("t = {:>6.1}: local exponent {:.3}", s.t, s.gamma);
    }
    let prediction = predict_tail(dim, &term, &a)?;
    let fit = compare(&prediction, &main, Some(&half), a.radius(), &opts)?;
    println!(
        "gamma {:.4}, amplitude {:+.4e} (predicted {:+.4e}), eps order {:.3}: {}",
        fit.gamma_hat,
        fit.amplitude_hat.unwrap_or(f64::NAN),
        fit.expected_amplitude.unwrap_or(f64::NAN),
        fit.eps_order_hat.unwrap_or(f64::NAN),
        fit.verdict
    );
    Ok(())
}
