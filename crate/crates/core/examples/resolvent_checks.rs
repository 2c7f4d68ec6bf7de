//! Finite-difference derivative in one disorder value, and agreement of
//! the resolvent on L and 2L tori at large eta.

use anderson_lab::disorder::{derivative_check, sample_disorder, torus_doubling_check, SolveOptions, SolverChoice};
use anderson_lab::lattice::{SpectralParam, TorusLattice};

fn main() -> anderson_lab::Result<()> {
    let lattice = TorusLattice::new(2, 16)?;
    let param = SpectralParam::new(1.0, 0.3, 0.5)?;
    let realization = sample_disorder(&lattice, 5, 0);
    let dense = SolveOptions { choice: SolverChoice::Dense, ..Default::default() };
    let w = lattice.index(&[1, 0]);
    for step in [1e-3, 5e-4, 1e-4, 1e-5] {
        let r = derivative_check(&realization, &param, 0, 0, w, step, dense)?;
        println!("step {step:.0e}: relative error {:.3e}", r.relative_error);
    }

    let wide = SpectralParam::new(1.0, 1.25, 0.0)?;
    let sources = vec![vec![0, 0], vec![3, -2]];
    let r = torus_doubling_check(2, 64, 5, 0, &wide, &sources, SolveOptions::default())?;
    println!("L = {} vs {}: discrepancy {:.2e} over {} entries", r.side, 2 * r.side, r.discrepancy, r.entries_compared);
    Ok(())
}
