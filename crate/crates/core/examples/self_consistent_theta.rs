//! Solves the self-consistent equation for theta and prints the transport
//! coefficients along lambda with eta = lambda^2.

use anderson_lab::lattice::{SpectralParam, TorusLattice};
use anderson_lab::sce::{build_kernel, solve_theta, transport_coefficients};
use anderson_lab::spectra::DispersionTable;

fn main() -> anderson_lab::Result<()> {
    let table = DispersionTable::with_defaults(2)?;
    let lattice = TorusLattice::new(2, 256)?;
    println!("{:>6} {:>24} {:>5} {:>8} {:>8} {:>9}", "lambda", "theta", "iter", "m", "1/rho", "diffusion");
    for lambda in [0.6f64, 0.5, 0.4, 0.3] {
        let param = SpectralParam::new(1.0, lambda * lambda, lambda)?;
        let sol = solve_theta(&lattice, &param)?;
        let c = transport_coefficients(&build_kernel(&sol), &table)?;
        println!(
            "{lambda:>6} {:>11.6}{:+.6}i {:>5} {:>8.4} {:>8.4} {:>9.5}{}",
            sol.theta.re,
            sol.theta.im,
            sol.iterations,
            c.mass,
            c.mass_prediction,
            c.diffusion,
            if c.lattice_too_small { "  (lattice too small)" } else { "" }
        );
    }
    Ok(())
}
