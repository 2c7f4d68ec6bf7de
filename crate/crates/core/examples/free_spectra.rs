//! Density of states, velocity density and the crossing integral of the
//! free Laplacian in d = 2.

use anderson_lab::spectra::{crossing_integral, DispersionTable};
use num_complex::Complex64 as C64;

fn main() -> anderson_lab::Result<()> {
    let table = DispersionTable::with_defaults(2)?;
    println!("grid {}^2, bin width {}", table.resolution(), table.bin_width());
    println!("{:>6} {:>10} {:>10}  confidence", "E", "rho", "nu");
    for e in [0.25, 0.5, 1.0, 2.0, 3.0, 3.75] {
        let rho = table.density_of_states(e);
        let nu = table.velocity_density(e);
        println!("{e:>6.2} {:>10.5} {:>10.5}  {}", rho.value, nu.value, rho.confidence.label());
    }

    for eta in [0.5, 0.25, 0.125, 0.0625] {
        let i4 = crossing_integral(2, C64::new(1.0, eta), 512)?;
        println!("eta {eta:<7} I4 {i4:.4}  I4*eta {:.4}", i4 * eta);
    }
    Ok(())
}
