//! First Duhamel iterate at r = 2 for phi^3 (l = 1): t^5 phi_2 settles onto
//! the predicted amplitude like 1/t. The quadratic iterate, by contrast, is
//! zero to rounding inside the light cone.

use wavetails::duhamel::first_order_iterate;
use wavetails::predictions::predict_tail;
use wavetails::wavedata::{DimensionIndex, GeneratingFunction, NonlinearityTerm};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dim = DimensionIndex::new(1)?;
    let a = GeneratingFunction::reference_asymmetric(1, 1.0);
    let cubic = NonlinearityTerm::power(3);
    let target = predict_tail(dim, &cubic, &a)?.terms[0].amplitude;
    println!("predicted t^5 phi_2 -> {target:.6}");
    for t in [25.0, 50.0, 100.0, 200.0, 400.0] {
        let it = first_order_iterate(&a, dim, &cubic, t, 2.0)?;
        let scaled = it.value * t.powi(5);
        println!("  t = {t:>5}: {scaled:.6}  ratio {:.5}", scaled / target);
    }

    let quad = NonlinearityTerm::power(2);
    for t in [10.0, 50.0] {
        let it = first_order_iterate(&a, dim, &quad, t, 2.0)?;
        println!("phi^2 iterate at t = {t}: {:.2e} of scale {:.2e}", it.value, it.scale);
    }
    Ok(())
}
