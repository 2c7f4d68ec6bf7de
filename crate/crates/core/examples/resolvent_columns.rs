//! Resolvent columns of one realization: solver diagnostics, the 1 -> 4
//! norm estimate and Combes-Thomas decay.

use anderson_lab::disorder::{combes_thomas_check, one_to_q_norm, sample_disorder, ResolventSolver, SolveOptions, SolveReport};
use anderson_lab::lattice::{SpectralParam, TorusLattice};

fn main() -> anderson_lab::Result<()> {
    let lattice = TorusLattice::new(2, 96)?;
    let param = SpectralParam::new(1.0, 0.25, 0.5)?;
    let realization = sample_disorder(&lattice, 2024, 0);
    let options = SolveOptions::default();
    let solver = ResolventSolver::new(&realization, &param, options)?;

    let sites: Vec<usize> = (0..8).map(|k| k * 1151 % lattice.site_count()).collect();
    let columns = solver.columns(&sites)?;
    for c in &columns {
        println!("source {:>5}: R_xx {:.6}, {:?} in {} iterations, Ward error {:.1e}", c.source, c.get(c.source), c.method, c.iterations, c.ward_error);
    }
    let report = SolveReport::from_columns(&columns, options.tolerance);
    println!("worst residual {:.1e}, {} matvecs, failed: {}", report.worst_residual, report.total_matvecs, report.failed);

    let norm = one_to_q_norm(&solver, 4.0, 32, 7)?;
    println!("||R||_1->4 >= {:.5} (over {} columns)", norm.value, norm.columns);

    let decay = combes_thomas_check(&solver, 0)?;
    println!("log|R_0x| slope {:.4} over |x| in [{}, {}]", decay.rate, decay.k_min, decay.k_max);
    Ok(())
}
