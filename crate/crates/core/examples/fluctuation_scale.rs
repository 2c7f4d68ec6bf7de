//! Fluctuation of R_00 against the median 1 -> 4 norm.

use anderson_lab::ensemble::{fluctuation_report, EnsembleSpec};

fn main() -> anderson_lab::Result<()> {
    for lambda in [0.6f64, 0.5, 0.4] {
        let spec = EnsembleSpec::new(2, 32, 1.0, lambda * lambda, lambda, 30, 9);
        let r = fluctuation_report(&spec)?;
        println!("lambda {lambda}: std {:.4}, median norm {:.4}, ratio {:.4}", r.std_dev, r.norm_median, r.ratio);
    }
    Ok(())
}
