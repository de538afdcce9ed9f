//! Nonlinear conjugate gradients for objectives that are quartic polynomials
//! along every line, with an exact line search.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::sparse::{dot, norm};
use crate::{Error, Result, C64};

/// Real-valued objective of complex unknowns whose restriction to any line
/// `t -> u + t d` is a polynomial of degree at most four.
pub trait QuarticObjective {
    fn dim(&self) -> usize;

    /// Energy at `u`; writes the gradient `g` with `dE = Re <g, du>`.
    fn energy_gradient(&self, u: &[C64], g: &mut [C64]) -> f64;

    /// Coefficients `[c0, .., c4]` of `t -> E(u + t d)`, given the already
    /// known `c0 = E(u)` and `c1 = Re <g, d>`.
    fn line_polynomial(&self, u: &[C64], d: &[C64], c0: f64, c1: f64) -> [f64; 5];

    /// Stopping measure for a gradient; Euclidean norm by default.
    fn residual(&self, g: &[C64]) -> f64 {
        norm(g)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NcgOptions {
    pub max_iter: usize,
    /// Stop once `residual(g)` falls below this.
    pub grad_tol: f64,
    /// Stop once the energy decrease over `stall_window` iterations is below
    /// `energy_tol * max(|E|, energy_floor)`.
    pub energy_tol: f64,
    pub energy_floor: f64,
    pub stall_window: usize,
    /// Force a steepest-descent step every this many iterations.
    pub restart_every: usize,
    /// Keep the accepted energies in the report.
    pub record_history: bool,
}

impl Default for NcgOptions {
    fn default() -> Self {
        NcgOptions {
            max_iter: 5000,
            grad_tol: 1e-6,
            energy_tol: 0.0,
            energy_floor: 1.0,
            stall_window: 20,
            restart_every: 200,
            record_history: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NcgReport {
    pub energy: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Accepted energies, starting with the initial one.
    pub history: Vec<f64>,
}

/// Minimize in place from the given starting point.
///
/// Every accepted step is checked against a fresh energy evaluation; an
/// increase beyond rounding is reported as [`Error::LineSearch`].
pub fn minimize<O: QuarticObjective + ?Sized>(
    obj: &O,
    u: &mut [C64],
    opts: &NcgOptions,
) -> Result<NcgReport> {
    let n = obj.dim();
    if u.len() != n {
        return Err(Error::ShapeMismatch {
            expected: n,
            found: u.len(),
        });
    }
    let zero = C64::new(0.0, 0.0);
    let mut g = vec![zero; n];
    let mut g_old = vec![zero; n];
    let mut d = vec![zero; n];
    let mut energy = obj.energy_gradient(u, &mut g);
    let mut history = Vec::new();
    if opts.record_history {
        history.push(energy);
    }
    let mut window: Vec<f64> = vec![energy];
    let mut residual = obj.residual(&g);
    for (di, gi) in d.iter_mut().zip(&g) {
        *di = -gi;
    }
    let mut since_restart = 0usize;
    for iter in 0..opts.max_iter {
        if residual <= opts.grad_tol {
            return Ok(report(energy, residual, iter, true, history));
        }
        let mut slope = dot(&g, &d).re;
        if slope >= 0.0 || since_restart >= opts.restart_every {
            for (di, gi) in d.iter_mut().zip(&g) {
                *di = -gi;
            }
            slope = -dot(&g, &g).re;
            since_restart = 0;
        }
        let coeffs = obj.line_polynomial(u, &d, energy, slope);
        let t = match quartic_line_min(&coeffs) {
            Some(t) if t > 0.0 => t,
            _ if since_restart > 0 => {
                // retry along steepest descent
                since_restart = usize::MAX / 2;
                continue;
            }
            _ => return Ok(report(energy, residual, iter, false, history)),
        };
        let predicted = poly_eval(&coeffs, t);
        if !(predicted < coeffs[0]) {
            // no representable decrease left along the steepest direction
            let stalled = since_restart == 0;
            if stalled {
                return Ok(report(energy, residual, iter, residual <= opts.grad_tol, history));
            }
            since_restart = usize::MAX / 2;
            continue;
        }
        debug_assert!(predicted <= coeffs[0] + 1e-4 * t * slope.min(0.0) + 1e-12 * coeffs[0].abs());
        for (ui, di) in u.iter_mut().zip(&d) {
            *ui += di * t;
        }
        core::mem::swap(&mut g, &mut g_old);
        let new_energy = obj.energy_gradient(u, &mut g);
        let slack = 1e-10 * energy.abs().max(1e-300) + 1e-14;
        if new_energy > energy + slack {
            return Err(Error::LineSearch {
                before: energy,
                after: new_energy,
            });
        }
        energy = new_energy;
        residual = obj.residual(&g);
        if opts.record_history {
            history.push(energy);
        }
        window.push(energy);
        if window.len() > opts.stall_window + 1 {
            window.remove(0);
            let drop = window[0] - energy;
            if opts.energy_tol > 0.0 && drop <= opts.energy_tol * energy.abs().max(opts.energy_floor) {
                return Ok(report(energy, residual, iter + 1, true, history));
            }
        }
        // Polak-Ribiere+
        let num: f64 = g
            .iter()
            .zip(&g_old)
            .map(|(a, b)| a.re * (a.re - b.re) + a.im * (a.im - b.im))
            .sum();
        let den = dot(&g_old, &g_old).re;
        let beta = if den > 0.0 { (num / den).max(0.0) } else { 0.0 };
        for (di, gi) in d.iter_mut().zip(&g) {
            *di = -gi + *di * beta;
        }
        since_restart += 1;
    }
    Ok(report(energy, residual, opts.max_iter, residual <= opts.grad_tol, history))
}

fn report(energy: f64, residual: f64, iterations: usize, converged: bool, history: Vec<f64>) -> NcgReport {
    NcgReport {
        energy,
        residual,
        iterations,
        converged,
        history,
    }
}

pub fn poly_eval(c: &[f64; 5], t: f64) -> f64 {
    (((c[4] * t + c[3]) * t + c[2]) * t + c[1]) * t + c[0]
}

/// Global minimizer over `t >= 0` of a quartic with nonnegative leading
/// coefficient, or `None` if it is unbounded below or the minimum is at 0.
pub fn quartic_line_min(c: &[f64; 5]) -> Option<f64> {
    let scale = c.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }
    let tiny = 1e-14 * scale;
    if c[4] < -tiny || (c[4].abs() <= tiny && c[3].abs() <= tiny && c[2] <= 0.0) {
        return None;
    }
    // roots of the derivative
    let roots = cubic_roots(4.0 * c[4], 3.0 * c[3], 2.0 * c[2], c[1]);
    let mut best: Option<(f64, f64)> = None;
    for t in roots.into_iter().flatten() {
        if !(t > 0.0) || !t.is_finite() {
            continue;
        }
        let t = newton_polish(c, t);
        let v = poly_eval(c, t);
        if best.map_or(true, |(_, bv)| v < bv) {
            best = Some((t, v));
        }
    }
    match best {
        Some((t, v)) if v < c[0] => Some(t),
        _ => None,
    }
}

fn newton_polish(c: &[f64; 5], mut t: f64) -> f64 {
    for _ in 0..3 {
        let d1 = ((4.0 * c[4] * t + 3.0 * c[3]) * t + 2.0 * c[2]) * t + c[1];
        let d2 = (12.0 * c[4] * t + 6.0 * c[3]) * t + 2.0 * c[2];
        if d2 <= 0.0 {
            break;
        }
        let next = t - d1 / d2;
        if !(next > 0.0) {
            break;
        }
        t = next;
    }
    t
}

/// Real roots of `a t^3 + b t^2 + c t + d`, degrading to lower degree when
/// leading coefficients vanish.
pub fn cubic_roots(a: f64, b: f64, c: f64, d: f64) -> [Option<f64>; 3] {
    let scale = a.abs().max(b.abs()).max(c.abs()).max(d.abs());
    if scale == 0.0 {
        return [None; 3];
    }
    if a.abs() <= 1e-14 * scale {
        return quadratic_roots(b, c, d, scale);
    }
    let (b, c, d) = (b / a, c / a, d / a);
    // depressed cubic t = s - b/3
    let shift = b / 3.0;
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let disc = (q / 2.0) * (q / 2.0) + (p / 3.0) * (p / 3.0) * (p / 3.0);
    if disc > 0.0 {
        let sq = disc.sqrt();
        let u = (-q / 2.0 + sq).cbrt();
        let v = (-q / 2.0 - sq).cbrt();
        [Some(u + v - shift), None, None]
    } else if p == 0.0 {
        [Some(-shift), None, None]
    } else {
        let r = (-p / 3.0).sqrt();
        let arg = (-q / (2.0 * r * r * r)).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        let two_pi_3 = 2.0 * core::f64::consts::PI / 3.0;
        [
            Some(2.0 * r * phi.cos() - shift),
            Some(2.0 * r * (phi - two_pi_3).cos() - shift),
            Some(2.0 * r * (phi + two_pi_3).cos() - shift),
        ]
    }
}

fn quadratic_roots(a: f64, b: f64, c: f64, scale: f64) -> [Option<f64>; 3] {
    if a.abs() <= 1e-14 * scale {
        if b == 0.0 {
            return [None; 3];
        }
        return [Some(-c / b), None, None];
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return [None; 3];
    }
    let sq = disc.sqrt();
    let q = -0.5 * (b + b.signum() * sq);
    let r1 = q / a;
    let r2 = if q != 0.0 { c / q } else { r1 };
    [Some(r1), Some(r2), None]
}
