//! Rescaled weighted sum lambda^-2 ell^-2 sum f0(x/ell)|R_0x|^2 in d = 3
//! against its limit candidate.

use anderson_lab::ensemble::{scaling_report, EnsembleSpec};
use anderson_lab::lattice::{SpectralParam, TorusLattice};
use anderson_lab::sce::{build_kernel, solve_theta, transport_coefficients};
use anderson_lab::spectra::DispersionTable;

fn main() -> anderson_lab::Result<()> {
    let table = DispersionTable::with_defaults(3)?;
    let side = 64;
    for lambda in [0.8f64, 0.7, 0.6] {
        let eta = lambda.powi(3);
        let lattice = TorusLattice::new(3, side)?;
        let kernel = build_kernel(&solve_theta(&lattice, &SpectralParam::new(1.0, eta, lambda)?)?);
        let coeffs = transport_coefficients(&kernel, &table)?;
        let spec = EnsembleSpec::new(3, side, 1.0, eta, lambda, 4, 21);
        let r = scaling_report(&spec, &coeffs, 0.2)?;
        println!("lambda {lambda}: ell {:.2}, observable {:.4} +- {:.4}, limit {:.4}", r.scale, r.observable, r.std_error, r.limit);
    }
    Ok(())
}
