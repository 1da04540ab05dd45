//! Free evolution against the exact free wave: error at three resolutions,
//! the observed convergence order, and energy conservation.

use wavetails::evolver::{evolve, evolve_detailed, GridConfig};
use wavetails::freewave::{eval_phi0, Part};
use wavetails::wavedata::{DimensionIndex, GeneratingFunction, SimulationConfig};

fn config(a: GeneratingFunction, dr: f64, t_max: f64, r_obs: f64) -> Result<SimulationConfig, Box<dyn std::error::Error>> {
    let r_out = r_obs + t_max + a.radius() + 1.0;
    Ok(SimulationConfig {
        dimension: DimensionIndex::new(1)?,
        terms: Vec::new(),
        generating: a,
        epsilons: vec![1.0],
        grid: GridConfig::new(dr, r_out, t_max),
        observers: vec![r_obs],
    })
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut prev: Option<f64> = None;
    for dr in [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0] {
        let cfg = config(GeneratingFunction::reference_asymmetric(1, 1.0), dr, 6.0, 1.5)?;
        let s = &evolve(&cfg, 1.0)?[0];
        let err = s
            .t
            .iter()
            .zip(&s.phi)
            .map(|(&t, &v)| (v - eval_phi0(&cfg.generating, cfg.dimension, t, s.r_obs, Part::Both)).abs())
            .fold(0.0, f64::max);
        match prev {
            Some(p) => println!("dr = 1/{:<3} max error {err:.3e}  order {:.2}", 1.0 / dr, (p / err).log2()),
            None => println!("dr = 1/{:<3} max error {err:.3e}", 1.0 / dr),
        }
        prev = Some(err);
    }

    let smooth = GeneratingFunction::single(1.0, 0.0, 8.0, 12)?;
    let cfg = config(smooth, 1.0 / 64.0, 30.0, 1.0)?;
    let run = evolve_detailed(&cfg, 1.0, true)?;
    let e0 = run.energy[0].energy;
    let drift = run.energy.iter().map(|e| ((e.energy - e0) / e0).abs()).fold(0.0, f64::max);
    println!("energy {e0:.6e}, max relative drift {drift:.2e} over {} steps", run.steps);
    Ok(())
}
