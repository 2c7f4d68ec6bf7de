//! Continuum radial profile phi(r) in d = 2 and d = 3.

use anderson_lab::sce::radial_profile_phi_limit;
use anderson_lab::spectra::DispersionTable;

fn main() -> anderson_lab::Result<()> {
    for d in [2, 3] {
        let table = DispersionTable::with_defaults(d)?;
        let rho = table.spectral_weight(1.0).value;
        let nu = table.velocity_density(1.0).value;
        println!("d = {d}: rho~ {rho:.5}, nu {nu:.5}");
        for r in [0.25, 0.5, 1.0, 2.0, 4.0] {
            println!("  phi({r}) = {:.6}", radial_profile_phi_limit(d, rho, nu, r)?);
        }
    }
    Ok(())
}
