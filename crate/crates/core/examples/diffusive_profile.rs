//! Lattice profile (Id - lambda^2 K)^{-1} K a against its truncated Neumann
//! series and against the continuum prediction.

use anderson_lab::ensemble::profile_predictions;
use anderson_lab::lattice::{SpectralParam, TorusLattice};
use anderson_lab::sce::{build_kernel, neumann_tail_bound, profile_apply, profile_neumann, solve_theta, transport_coefficients, RadialBump};
use anderson_lab::spectra::DispersionTable;

fn main() -> anderson_lab::Result<()> {
    let lambda: f64 = 0.4;
    let eta = lambda.powf(2.05);
    let lattice = TorusLattice::new(2, 128)?;
    let kernel = build_kernel(&solve_theta(&lattice, &SpectralParam::new(1.0, eta, lambda)?)?);
    let coeffs = transport_coefficients(&kernel, &DispersionTable::with_defaults(2)?)?;

    let a = RadialBump::new(4.0, 1.0)?.sample(&lattice);
    let exact = profile_apply(&kernel, &a)?;
    let sup = exact.lp_norm(f64::INFINITY);
    for terms in [4, 8, 16, 32] {
        let approx = profile_neumann(&kernel, &a, terms);
        let err = exact.values().iter().zip(approx.values()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        println!("{terms:>3} terms: relative error {:.3e}, tail bound {:.3e}", err / sup, neumann_tail_bound(&kernel, terms + 1));
    }

    let diffusive = 1.0 / (lambda * eta.sqrt());
    println!("diffusive length {diffusive:.2}");
    for f in [0.3, 0.6, 1.2] {
        let (lat, cont) = profile_predictions(&kernel, &coeffs, f * diffusive)?;
        println!("scale {f:.1}: lattice {lat:.5}  continuum {cont:.5}");
    }
    Ok(())
}
