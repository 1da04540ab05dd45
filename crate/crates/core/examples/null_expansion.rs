//! Reads the (v-u)^-3 coefficient of the quadratic first iterate (l = 1) off a
//! fit along outgoing null rays and compares it with h(u).

use wavetails::duhamel::phi1_null_expansion_check;
use wavetails::wavedata::{DimensionIndex, GeneratingFunction};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dim = DimensionIndex::new(1)?;
    let a = GeneratingFunction::reference_asymmetric(1, 1.0);
    let v = [200.0, 400.0, 800.0];
    for u in [-0.6, -0.3, 0.0, 0.5] {
        let c = phi1_null_expansion_check(&a, dim, u, &v)?;
        println!("u = {u:+.2}: extracted {:+.6e}  h(u) {:+.6e}  rel err {:.1e}", c.extracted, c.h, c.rel_err);
    }
    Ok(())
}
