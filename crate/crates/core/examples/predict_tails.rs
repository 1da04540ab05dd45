//! Closed-form tail predictions for a handful of right-hand sides in five
//! dimensions (l = 1), using the asymmetric two-bump profile.

use wavetails::predictions::predict_tail;
use wavetails::wavedata::{DimensionIndex, GeneratingFunction, NonlinearityTerm};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dim = DimensionIndex::new(1)?;
    let a = GeneratingFunction::reference_asymmetric(1, 1.0);
    let cases = [
        ("phi^2", NonlinearityTerm::power(2)),
        ("phi^3", NonlinearityTerm::power(3)),
        ("phi phi_t", NonlinearityTerm::derivative(1, 1, 1.0, 0.0)),
        ("(phi_t)^2", NonlinearityTerm::derivative(0, 2, 1.0, 0.0)),
        ("(phi_t - phi_r)^2", NonlinearityTerm::derivative(0, 2, 1.0, -1.0)),
    ];
    for (name, term) in cases {
        let pred = predict_tail(dim, &term, &a)?;
        println!("{name}:");
        for t in &pred.terms {
            println!(
                "  {:<18} eps^{} t^-{}  A = {:+.6e}{}",
                t.case_label.as_str(),
                t.eps_order,
                t.gamma,
                t.amplitude,
                if t.degenerate { "  (degenerate)" } else { "" }
            );
        }
        if let Some(d) = pred.dominant_at(0.05, 100.0) {
            println!("  dominant at eps = 0.05, t = 100: {}", d.case_label.as_str());
        }
    }
    Ok(())
}
