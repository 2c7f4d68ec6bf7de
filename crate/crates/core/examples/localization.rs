//! Exact diagonalisation on a 16 x 16 torus: localized fraction against
//! coupling, and the localization counting bound.

use anderson_lab::disorder::sample_disorder;
use anderson_lab::lattice::TorusLattice;
use anderson_lab::spectral::{dense_eig, localization_count_bound_check, localized_set};

fn main() -> anderson_lab::Result<()> {
    let lattice = TorusLattice::new(2, 16)?;
    let r = 4.0;
    for lambda in [0.0, 1.0, 5.0, 20.0, 50.0] {
        let eig = dense_eig(&sample_disorder(&lattice, 3, 0), lambda)?;
        let set = localized_set(&eig, r, None, None)?;
        let median = 0.5 * (eig.values[127] + eig.values[128]);
        let bound = localization_count_bound_check(&eig, median, 0.5, r, 0)?;
        println!(
            "lambda {lambda:>4}: {:>3}/256 localized, residual {:.1e}, count {} vs bracket {:.3e}",
            set.localized_count(),
            eig.residual,
            bound.count,
            bound.bracket
        );
    }
    Ok(())
}
