//! Damped Plancherel identity and spreading of e^{-itH} delta_0.

use anderson_lab::disorder::sample_disorder;
use anderson_lab::lattice::{LatticeField, TorusLattice};
use anderson_lab::spectral::{dense_eig, plancherel_identity_check, propagator_moments};

fn main() -> anderson_lab::Result<()> {
    let lattice = TorusLattice::new(2, 12)?;
    let psi = LatticeField::delta(lattice, 0);
    for lambda in [0.0, 0.5, 3.0] {
        let eig = dense_eig(&sample_disorder(&lattice, 1, 0), lambda)?;
        let p = plancherel_identity_check(&eig, &psi, 0.3, 0)?;
        println!("lambda {lambda}: Plancherel {:.10} vs {:.10}", p.lhs, p.rhs);
        for t in [1.0, 4.0, 16.0] {
            let m = propagator_moments(&eig, t, 0, 3.0)?;
            println!("  t {t:>4}: <|x|^2> {:>8.3}, mass beyond r=3 {:.4}", m.second_moment, m.tail_mass);
        }
    }
    Ok(())
}
