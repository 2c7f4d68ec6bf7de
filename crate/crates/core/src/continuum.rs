//! Radial solver for `(-a Delta + b) u = g` on `R^d` with radial `g` of
//! compact support, by variation of parameters with modified Bessel functions.
//!
//! With `mu = sqrt(b/a)` and `nu = d/2 - 1`, the homogeneous solutions are
//! `y1(r) = r^{-nu} I_nu(mu r)` and `y2(r) = r^{-nu} K_nu(mu r)`, whose
//! Wronskian is `-r^{1-d}`, so
//!
//! `u(r) = y2(r) int_0^r y1 F + y1(r) int_r^inf y2 F`,   `F(s) = g(s) s^{d-1} / a`.
//!
//! Exponentially scaled Bessel functions keep every product bounded.

use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::util::gauss_legendre;

/// `e^{-x} I_nu(x)` for `nu` a non-negative integer or half-integer.
pub fn bessel_i_scaled(nu: f64, x: f64) -> f64 {
    if x == 0.0 {
        return if nu == 0.0 { 1.0 } else { 0.0 };
    }
    if x <= 30.0 {
        let q = 0.25 * x * x;
        let mut term = (0.5 * x).powf(nu) / gamma_half_integer(nu + 1.0) * (-x).exp();
        let mut sum = term;
        let mut k = 0.0;
        loop {
            k += 1.0;
            term *= q / (k * (k + nu));
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        sum
    } else {
        // Hankel expansion, far inside its useful range for x > 30
        let mu4 = 4.0 * nu * nu;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..40 {
            let kf = k as f64;
            term *= -(mu4 - (2.0 * kf - 1.0).powi(2)) / (kf * 8.0 * x);
            sum += term;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        sum / (2.0 * PI * x).sqrt()
    }
}

/// `e^{x} K_nu(x)` for `nu` a non-negative integer or half-integer, `x > 0`.
pub fn bessel_k_scaled(nu: f64, x: f64) -> f64 {
    let twice = (2.0 * nu).round() as i64;
    let (mut k_prev, mut k_cur, mut order) = if twice % 2 == 0 {
        (k_integral(0.0, x), k_integral(1.0, x), 1.0)
    } else {
        let k_half = (PI / (2.0 * x)).sqrt();
        (k_half, k_half * (1.0 + 1.0 / x), 1.5)
    };
    if nu < order - 0.5 {
        return k_prev;
    }
    while order < nu - 0.25 {
        let next = k_prev + 2.0 * order / x * k_cur;
        k_prev = k_cur;
        k_cur = next;
        order += 1.0;
    }
    k_cur
}

/// `e^x K_nu(x) = int_0^inf e^{-x (cosh t - 1)} cosh(nu t) dt` by the
/// trapezoidal rule, which converges geometrically for this integrand.
fn k_integral(nu: f64, x: f64) -> f64 {
    let t_max = (1.0 + 45.0 / x).acosh() + 1.0;
    let h = (0.3 / x.sqrt()).min(0.02);
    let n = (t_max / h).ceil() as usize;
    let mut sum = 0.5;
    for j in 1..=n {
        let t = j as f64 * h;
        sum += (-x * (t.cosh() - 1.0)).exp() * (nu * t).cosh();
    }
    sum * h
}

fn gamma_half_integer(a: f64) -> f64 {
    // a in {1/2, 1, 3/2, 2, ...}
    let mut g = if (a - a.floor()).abs() > 0.25 { PI.sqrt() } else { 1.0 };
    let mut v = if (a - a.floor()).abs() > 0.25 { 0.5 } else { 1.0 };
    while v < a - 0.25 {
        g *= v;
        v += 1.0;
    }
    g
}

/// `-a Delta_{R^d} + b` restricted to radial functions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialElliptic {
    d: usize,
    a: f64,
    b: f64,
}

/// Quadrature settings; `refine = 2` doubles the number of panels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialQuadrature {
    pub order: usize,
    pub refine: usize,
}

impl Default for RadialQuadrature {
    fn default() -> Self {
        Self { order: 16, refine: 1 }
    }
}

impl RadialElliptic {
    pub fn new(d: usize, a: f64, b: f64) -> Result<Self> {
        if d < 2 {
            return Err(invalid("radial elliptic solver needs d >= 2"));
        }
        if !(a > 0.0) || !(b > 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(invalid(format!("elliptic coefficients must be positive, got a={a}, b={b}")));
        }
        Ok(Self { d, a, b })
    }

    pub fn mu(&self) -> f64 {
        (self.b / self.a).sqrt()
    }

    fn nu(&self) -> f64 {
        0.5 * self.d as f64 - 1.0
    }

    /// `u(r)` for the radial source `g`, supported in `[0, support]`, smooth
    /// between consecutive entries of `breaks`.
    pub fn solve_at(
        &self,
        g: &dyn Fn(f64) -> f64,
        support: f64,
        breaks: &[f64],
        r: f64,
        quad: RadialQuadrature,
    ) -> f64 {
        let mu = self.mu();
        let nu = self.nu();
        let dm1 = self.d as i32 - 1;
        let a = self.a;
        let f = |s: f64| g(s) * s.powi(dm1) / a;

        let mut points: Vec<f64> = breaks.iter().copied().filter(|&b| b > 0.0 && b < support).collect();
        points.push(support);
        if r > 0.0 && r < support {
            points.push(r);
        }
        points.sort_by(|x, y| x.total_cmp(y));
        points.dedup_by(|x, y| (*x - *y).abs() <= 1e-15 * support);
        let panels = self.panels(&points, quad);
        let (nodes, weights) = gauss_legendre(quad.order);

        // inner: int_0^min(r,R) Ihat(mu s) s^{-nu} e^{-mu (r - s)} F(s) ds
        // outer: int_r^R Khat(mu s) s^{-nu} e^{-mu (s - r)} F(s) ds
        let mut inner = 0.0;
        let mut outer = 0.0;
        for &(lo, hi) in &panels {
            let h = 0.5 * (hi - lo);
            let c = 0.5 * (hi + lo);
            let is_inner = hi <= r;
            for (x, w) in nodes.iter().zip(&weights) {
                let s = c + h * x;
                let fs = f(s);
                if fs == 0.0 {
                    continue;
                }
                let pw = s.powf(-nu);
                if is_inner {
                    inner += w * h * bessel_i_scaled(nu, mu * s) * pw * (-mu * (r - s)).exp() * fs;
                } else {
                    outer += w * h * bessel_k_scaled(nu, mu * s) * pw * (-mu * (s - r)).exp() * fs;
                }
            }
        }
        if r == 0.0 {
            // y1(0) = (mu/2)^nu / Gamma(nu + 1); the inner term vanishes
            return (0.5 * mu).powf(nu) / gamma_half_integer(nu + 1.0) * outer;
        }
        let pr = r.powf(-nu);
        bessel_k_scaled(nu, mu * r) * pr * inner + bessel_i_scaled(nu, mu * r) * pr * outer
    }

    fn panels(&self, points: &[f64], quad: RadialQuadrature) -> Vec<(f64, f64)> {
        let mu = self.mu();
        let mut out = Vec::new();
        let mut lo = 0.0;
        for (idx, &hi) in points.iter().enumerate() {
            if idx == 0 {
                // geometric grading towards the origin, where F y2 has
                // s log s (d = 2) behaviour
                let levels = 30 * quad.refine;
                let ratio = 0.5f64.powf(1.0 / quad.refine as f64);
                let mut edges = vec![hi];
                let mut e = hi;
                for _ in 0..levels {
                    e *= ratio;
                    edges.push(e);
                }
                edges.push(0.0);
                edges.reverse();
                for w in edges.windows(2) {
                    self.push_subdivided(&mut out, w[0], w[1], mu, quad.refine);
                }
            } else {
                self.push_subdivided(&mut out, lo, hi, mu, quad.refine);
            }
            lo = hi;
        }
        out
    }

    fn push_subdivided(&self, out: &mut Vec<(f64, f64)>, lo: f64, hi: f64, mu: f64, refine: usize) {
        let width = hi - lo;
        if width <= 0.0 {
            return;
        }
        let n = ((width * mu).ceil() as usize).max(1) * refine;
        let step = width / n as f64;
        for k in 0..n {
            let a = lo + k as f64 * step;
            let b = if k + 1 == n { hi } else { a + step };
            out.push((a, b));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::smooth_bump;

    #[test]
    fn half_integer_bessel_closed_forms() {
        for &x in &[0.01, 0.5, 3.0, 25.0, 80.0] {
            let i_half = (2.0 / (PI * x)).sqrt() * x.sinh() * (-x).exp();
            assert!((bessel_i_scaled(0.5, x) - i_half).abs() <= 1e-13 * i_half, "x={x}");
            let k_half = (PI / (2.0 * x)).sqrt();
            assert!((bessel_k_scaled(0.5, x) - k_half).abs() <= 1e-14 * k_half);
        }
    }

    #[test]
    fn integer_bessel_reference_values() {
        // I_0(1), K_0(1), I_1(2), K_1(2)
        let e1 = 1f64.exp();
        assert!((bessel_i_scaled(0.0, 1.0) * e1 - 1.266_065_877_752_008_4).abs() < 1e-14);
        assert!((bessel_k_scaled(0.0, 1.0) / e1 - 0.421_024_438_240_708_3).abs() < 1e-13);
        let e2 = 2f64.exp();
        assert!((bessel_i_scaled(1.0, 2.0) * e2 - 1.590_636_854_637_329).abs() < 1e-13);
        assert!((bessel_k_scaled(1.0, 2.0) / e2 - 0.139_865_881_816_522_4).abs() < 1e-13);
    }

    #[test]
    fn series_and_asymptotic_agree_at_the_switch() {
        for nu in [0.0, 1.0, 0.5, 1.5] {
            let lo = bessel_i_scaled(nu, 30.0 - 1e-12);
            let hi = bessel_i_scaled(nu, 30.0 + 1e-12);
            // the slope of e^{-x} I_nu is about 1e-3 here
            assert!((lo - hi).abs() < 1e-14, "nu={nu} {lo} {hi}");
        }
    }

    #[test]
    fn wronskian() {
        for nu in [0.0, 0.5, 1.0, 1.5, 2.0] {
            for &x in &[0.1, 1.0, 7.0, 40.0] {
                let h = 1e-5 * x;
                let i = |t: f64| bessel_i_scaled(nu, t) * t.exp();
                let k = |t: f64| bessel_k_scaled(nu, t) * (-t).exp();
                let w = i(x) * (k(x + h) - k(x - h)) / (2.0 * h) - k(x) * (i(x + h) - i(x - h)) / (2.0 * h);
                assert!((w * x + 1.0).abs() < 1e-6, "nu={nu} x={x} w={w}");
            }
        }
    }

    #[test]
    fn total_mass_of_the_green_function() {
        // for g = 1 on a huge ball the solution at the centre tends to 1/b
        for d in [2, 3, 4] {
            let op = RadialElliptic::new(d, 0.7, 1.3).unwrap();
            let g = |s: f64| smooth_bump(s / 30.0);
            let u0 = op.solve_at(&g, 60.0, &[30.0], 0.0, RadialQuadrature::default());
            assert!((u0 - 1.0 / 1.3).abs() < 1e-10, "d={d} u0={u0}");
        }
    }

    #[test]
    fn matches_closed_form_in_three_dimensions() {
        // G(x) = e^{-mu|x|} / (4 pi a |x|); u(0) = int G g
        let (a, b): (f64, f64) = (0.5, 2.0);
        let mu = (b / a).sqrt();
        let op = RadialElliptic::new(3, a, b).unwrap();
        let g = |s: f64| smooth_bump(s);
        let u0 = op.solve_at(&g, 2.0, &[1.0], 0.0, RadialQuadrature::default());
        let direct = crate::util::integrate_panels(&[0.0, 0.5, 1.0, 1.5, 2.0], 30, |s| {
            4.0 * PI * s * s * (-mu * s).exp() / (4.0 * PI * a * s) * g(s)
        });
        assert!((u0 - direct).abs() < 1e-12 * direct);
    }

    #[test]
    fn satisfies_the_ode_away_from_the_origin() {
        let (a, b) = (1.1, 0.4);
        for d in [2, 3] {
            let op = RadialElliptic::new(d, a, b).unwrap();
            let g = |s: f64| smooth_bump(s);
            let q = RadialQuadrature::default();
            let u = |r: f64| op.solve_at(&g, 2.0, &[1.0], r, q);
            let (r, h) = (0.6, 1e-3);
            let lap = (u(r + h) - 2.0 * u(r) + u(r - h)) / (h * h)
                + (d as f64 - 1.0) / r * (u(r + h) - u(r - h)) / (2.0 * h);
            let res = -a * lap + b * u(r) - g(r);
            assert!(res.abs() < 1e-5, "d={d} res={res}");
        }
    }

    #[test]
    fn rejects_bad_coefficients() {
        assert!(RadialElliptic::new(2, 0.0, 1.0).is_err());
        assert!(RadialElliptic::new(2, 1.0, -1.0).is_err());
        assert!(RadialElliptic::new(1, 1.0, 1.0).is_err());
    }
}
