use anderson_lab::cli::{CommandKind, RunConfig};
use anderson_lab::disorder::{sample_disorder, ResolventSolver, SolveOptions, SolverChoice};
use anderson_lab::lattice::{apply_laplacian, dispersion, Fourier, LatticeField, SpectralParam, TorusLattice};
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn field(l: TorusLattice, raw: &[(f64, f64)]) -> LatticeField {
    LatticeField::from_values(l, raw.iter().map(|&(a, b)| C64::new(a, b)).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn index_and_coords_round_trip(d in 2usize..4, half in 1usize..5, site in 0usize..10_000) {
        let l = TorusLattice::new(d, 2 * half).unwrap();
        let i = site % l.site_count();
        prop_assert_eq!(l.index(&l.coords(i)), i);
        prop_assert_eq!(l.reflect(l.reflect(i)), i);
        let shift: Vec<i64> = (0..d as i64).map(|k| k - 1).collect();
        let back: Vec<i64> = shift.iter().map(|s| -s).collect();
        prop_assert_eq!(l.translate(l.translate(i, &shift), &back), i);
    }

    #[test]
    fn fourier_inverts_and_diagonalises_laplacian(raw in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 64)) {
        let l = TorusLattice::new(2, 8).unwrap();
        let f = field(l, &raw);
        let fourier = Fourier::new(&l);

        let mut data = f.values().to_vec();
        fourier.forward(&mut data);
        fourier.inverse(&mut data);
        for (a, b) in data.iter().zip(f.values()) {
            prop_assert!((a - b).norm() < 1e-13);
        }

        let mut lap = apply_laplacian(&f).into_values();
        let mut hat = f.values().to_vec();
        fourier.forward(&mut lap);
        fourier.forward(&mut hat);
        for k in 0..l.site_count() {
            let want = hat[k] * dispersion(&l.dual_point(k));
            prop_assert!((lap[k] - want).norm() < 1e-12);
        }
    }

    #[test]
    fn ward_identity_for_any_realization(seed in any::<u64>(), energy in -3.0f64..3.0, eta in 0.05f64..1.0, lambda in 0.0f64..2.0) {
        let l = TorusLattice::new(2, 8).unwrap();
        let p = SpectralParam::new(energy, eta, lambda).unwrap();
        let s = ResolventSolver::new(&sample_disorder(&l, seed, 0), &p, SolveOptions { choice: SolverChoice::Dense, ..Default::default() }).unwrap();
        let col = s.column(0).unwrap();
        let lhs = eta * col.values.norm_sqr();
        let rhs = col.get(0).im;
        prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs());
    }

    #[test]
    fn config_survives_toml(side in 1usize..40, seed in any::<u64>(), eta in 0.001f64..2.0, etas in prop::collection::vec(0.01f64..1.0, 0..4)) {
        let mut cfg = RunConfig::for_command(CommandKind::Resolve);
        cfg.side = 2 * side;
        cfg.seed = seed;
        cfg.eta = eta;
        cfg.etas = etas;
        let back = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
