//! Lowest eigenvalue `zeta(nu)` of the half-space magnetic Laplacian with a
//! constant unit field making the angle `nu` with the boundary plane.
//!
//! The potential `A = (0, 0, x1 cos nu + x2 sin nu)` does not depend on `x3`, so
//! the operator splits into Bloch fibres `e^{i xi x3} u(x1, x2)`. Each fibre is
//! a 2D problem on the half-plane `x1 > 0` discretized with the same
//! gauge-covariant link stencil as the 3D reduced Ginzburg-Landau energy: the
//! `x3` link phase `e^{i h3 a}` contributes the on-site term
//! `(2 - 2 cos(h3 (a - xi))) / h3^2`. `zeta` is the fibre minimum over `xi`.
//!
//! The physical edge `x1 = 0` carries the natural (Neumann) condition.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

use num_traits::Float;

use crate::eigen::{lowest_eigenpair, EigenResult, LanczosOptions};
use crate::interp::MonotoneCubic;
use crate::sparse::{CsrMatrix, HermitianOperator, TripletBuilder};
use crate::{Error, Result, C64};

/// Minimizer of the de Gennes model `-d^2 + (t - xi)^2` on `t > 0`; used as
/// the centre of the Bloch momentum search.
pub const DE_GENNES_XI: f64 = 0.7677;

/// Finest spacing allowed by the resolution floor (unit magnetic length).
pub const MAX_SPACING: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeCondition {
    Dirichlet,
    Neumann,
}

/// Truncated half-plane fibre problem.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfPlaneProblem {
    pub nu: f64,
    /// Truncation length in `x1` (the physical edge is `x1 = 0`).
    pub domain_r1: f64,
    /// Half-width in `x2`.
    pub domain_r2: f64,
    pub n1: usize,
    pub n2: usize,
    /// Condition on `x1 = domain_r1`.
    pub far_edge: EdgeCondition,
    /// Condition on `x2 = +-domain_r2`.
    pub lateral_edges: EdgeCondition,
    /// Bloch momentum along `x3`.
    pub xi: f64,
    /// Lattice spacing along `x3`; `None` uses the `x1` spacing.
    pub x3_spacing: Option<f64>,
}

impl HalfPlaneProblem {
    /// Problem on the given grid with the default edge conditions for `nu`.
    pub fn new(nu: f64, grid: &HalfPlaneGrid) -> Self {
        HalfPlaneProblem {
            nu,
            domain_r1: grid.domain_r1,
            domain_r2: grid.domain_r2,
            n1: grid.n1,
            n2: grid.n2,
            far_edge: EdgeCondition::Neumann,
            lateral_edges: default_lateral_edges(nu),
            xi: centred_xi(nu),
            x3_spacing: None,
        }
    }

    pub fn h1(&self) -> f64 {
        self.domain_r1 / self.n1 as f64
    }

    pub fn h2(&self) -> f64 {
        2.0 * self.domain_r2 / self.n2 as f64
    }

    pub fn h3(&self) -> f64 {
        self.x3_spacing.unwrap_or_else(|| self.h1())
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=FRAC_PI_2).contains(&self.nu) {
            return Err(Error::invalid("nu", "angle must lie in [0, pi/2]"));
        }
        if !(self.domain_r1 > 0.0 && self.domain_r2 > 0.0) {
            return Err(Error::invalid("domain", "truncation lengths must be positive"));
        }
        if self.n1 < 16 || self.n2 < 16 {
            return Err(Error::invalid("grid", "need at least 16 points per axis"));
        }
        if self.h1() > MAX_SPACING || self.h2() > MAX_SPACING {
            return Err(Error::invalid(
                "grid",
                alloc::format!(
                    "spacing ({:.3}, {:.3}) exceeds the resolution floor {MAX_SPACING}",
                    self.h1(),
                    self.h2()
                ),
            ));
        }
        if let Some(h3) = self.x3_spacing {
            if !(h3 > 0.0 && h3 <= MAX_SPACING) {
                return Err(Error::invalid("x3_spacing", "must lie in (0, 0.25]"));
            }
        }
        if !self.xi.is_finite() {
            return Err(Error::invalid("xi", "must be finite"));
        }
        Ok(())
    }
}

/// At `nu = 0` the fibre is translation invariant in `x2` and Neumann lateral
/// edges are exact. For `nu > 0` a shift in `x2` is equivalent to a shift in
/// `xi`, so the ground state can be centred and the lateral edges pushed out
/// with Dirichlet conditions, which only raise truncation artefacts.
pub fn default_lateral_edges(nu: f64) -> EdgeCondition {
    if nu == 0.0 {
        EdgeCondition::Neumann
    } else {
        EdgeCondition::Dirichlet
    }
}

/// Bloch momentum that centres the ground state at `x2 = 0`.
pub fn centred_xi(nu: f64) -> f64 {
    DE_GENNES_XI * nu.cos().max(0.0).sqrt()
}

/// Width of the ground state along `x2` for small `nu` (harmonic
/// approximation of the de Gennes band around its minimum).
pub fn lateral_width(nu: f64) -> f64 {
    1.3 / nu.sin().max(1e-12).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPlaneGrid {
    pub domain_r1: f64,
    pub domain_r2: f64,
    pub n1: usize,
    pub n2: usize,
}

impl Default for HalfPlaneGrid {
    fn default() -> Self {
        HalfPlaneGrid {
            domain_r1: 12.0,
            domain_r2: 12.0,
            n1: 120,
            n2: 240,
        }
    }
}

impl HalfPlaneGrid {
    pub fn spacing(&self) -> f64 {
        self.domain_r1 / self.n1 as f64
    }

    /// Same spacing, both truncation lengths doubled.
    pub fn doubled_domain(&self) -> Self {
        HalfPlaneGrid {
            domain_r1: 2.0 * self.domain_r1,
            domain_r2: 2.0 * self.domain_r2,
            n1: 2 * self.n1,
            n2: 2 * self.n2,
        }
    }

    /// Widen the lateral extent to `6 * lateral_width(nu)` (at most `max_r2`),
    /// coarsening the `x2` spacing up to the resolution floor before adding points.
    pub fn adapted(&self, nu: f64, max_r2: f64) -> Self {
        if nu == 0.0 {
            return *self;
        }
        let r2 = (6.0 * lateral_width(nu)).min(max_r2);
        if r2 <= self.domain_r2 {
            return *self;
        }
        let h2 = (2.0 * self.domain_r2 / self.n2 as f64).max(2.0 * r2 / self.n2 as f64);
        let h2 = h2.min(MAX_SPACING);
        HalfPlaneGrid {
            domain_r2: r2,
            n2: (2.0 * r2 / h2).ceil() as usize,
            ..*self
        }
    }

    /// Same domain, spacing halved.
    pub fn refined(&self) -> Self {
        HalfPlaneGrid {
            n1: 2 * self.n1,
            n2: 2 * self.n2,
            ..*self
        }
    }
}

/// Assembled fibre operator `M^{-1/2} Q M^{-1/2}` where `Q` is the discrete
/// quadratic form and `M` the diagonal trapezoid mass.
#[derive(Debug, Clone)]
pub struct HalfPlaneOperator {
    pub matrix: CsrMatrix,
    /// Trapezoid weight of each unknown.
    pub mass: Vec<f64>,
    /// Grid indices `(i, j)` of each unknown.
    pub nodes: Vec<(usize, usize)>,
}

impl HermitianOperator for HalfPlaneOperator {
    fn dim(&self) -> usize {
        self.matrix.dim()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.matrix.apply(x, y)
    }
}

pub fn assemble_halfplane_operator(p: &HalfPlaneProblem) -> Result<HalfPlaneOperator> {
    assemble_gauged(p, None)
}

/// Assemble with extra link phases `chi(b) - chi(a)` from a node gauge function
/// `chi` laid out as `chi[j * (n1 + 1) + i]`. Gauge-equivalent operators are
/// unitarily similar, so their spectra coincide.
pub fn assemble_gauged(p: &HalfPlaneProblem, chi: Option<&[f64]>) -> Result<HalfPlaneOperator> {
    p.validate()?;
    let (n1, n2) = (p.n1, p.n2);
    if let Some(chi) = chi {
        let expected = (n1 + 1) * (n2 + 1);
        if chi.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                found: chi.len(),
            });
        }
    }
    let (h1, h2, h3) = (p.h1(), p.h2(), p.h3());
    let (cos_nu, sin_nu) = (p.nu.cos(), p.nu.sin());

    let i_active = |i: usize| i < n1 || p.far_edge == EdgeCondition::Neumann;
    let j_active = |j: usize| (j > 0 && j < n2) || p.lateral_edges == EdgeCondition::Neumann;
    let w1 = |i: usize| if i == 0 || i == n1 { 0.5 } else { 1.0 };
    let w2 = |j: usize| if j == 0 || j == n2 { 0.5 } else { 1.0 };

    let mut index = vec![usize::MAX; (n1 + 1) * (n2 + 1)];
    let mut nodes = Vec::new();
    let mut mass = Vec::new();
    for j in 0..=n2 {
        for i in 0..=n1 {
            if i_active(i) && j_active(j) {
                index[j * (n1 + 1) + i] = nodes.len();
                nodes.push((i, j));
                mass.push(w1(i) * w2(j));
            }
        }
    }
    let n = nodes.len();
    let mut b = TripletBuilder::new(n);
    let phase_of = |a: usize, bb: usize| -> C64 {
        match chi {
            Some(chi) => C64::from_polar(1.0, chi[bb] - chi[a]),
            None => C64::new(1.0, 0.0),
        }
    };
    for (k, &(i, j)) in nodes.iter().enumerate() {
        let x1 = i as f64 * h1;
        let x2 = -p.domain_r2 + j as f64 * h2;
        let a = x1 * cos_nu + x2 * sin_nu;
        let pot = (2.0 - 2.0 * (h3 * (a - p.xi)).cos()) / (h3 * h3);
        b.push(k, k, C64::new(mass[k] * pot, 0.0));
        let g = j * (n1 + 1) + i;
        // x1 links (i, i+1); a Dirichlet neighbour contributes only the diagonal
        if i < n1 {
            let c = w2(j) / (h1 * h1);
            let g2 = g + 1;
            match index[g2] {
                usize::MAX => b.push(k, k, C64::new(c, 0.0)),
                k2 => b.push_link(k, k2, c, phase_of(g, g2)),
            }
        }
        // x2 links (j, j+1)
        if j < n2 {
            let c = w1(i) / (h2 * h2);
            let g2 = g + n1 + 1;
            match index[g2] {
                usize::MAX => b.push(k, k, C64::new(c, 0.0)),
                k2 => b.push_link(k, k2, c, phase_of(g, g2)),
            }
        }
        // link from a Dirichlet node below in x2 (j = 1 when the lateral edge is Dirichlet)
        if j == 1 && p.lateral_edges == EdgeCondition::Dirichlet {
            b.push(k, k, C64::new(w1(i) / (h2 * h2), 0.0));
        }
    }
    let mut matrix = b.build();
    let inv_sqrt: Vec<f64> = mass.iter().map(|m| 1.0 / m.sqrt()).collect();
    matrix.scale_symmetric(&inv_sqrt);
    Ok(HalfPlaneOperator {
        matrix,
        mass,
        nodes,
    })
}

/// `<v, A v> / <v, v>`; the imaginary part measures the Hermiticity defect.
pub fn rayleigh_quotient<A: HermitianOperator + ?Sized>(op: &A, v: &[C64]) -> C64 {
    let mut av = vec![C64::new(0.0, 0.0); v.len()];
    op.apply(v, &mut av);
    let num = crate::sparse::dot(v, &av);
    let den = crate::sparse::dot(v, v).re;
    num / den
}

/// Lowest eigenpair of a single fibre.
pub fn fibre_eigenpair(
    p: &HalfPlaneProblem,
    start: Option<&[C64]>,
    lanczos: &LanczosOptions,
) -> Result<EigenResult> {
    let op = assemble_halfplane_operator(p)?;
    lowest_eigenpair(&op, start, lanczos)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Refinement {
    None,
    /// Combine spacings `h` and `h/2` assuming a second-order error.
    Richardson,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum XiSearch {
    /// Golden search at `nu = 0`, the centred momentum otherwise.
    Auto { half_width: f64, tol: f64 },
    /// Golden-section search over `[centre - half_width, centre + half_width]`.
    Golden { half_width: f64, tol: f64 },
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct ZetaOptions {
    pub grid: HalfPlaneGrid,
    /// Eigen-residual target; also the truncation-shift tolerance.
    pub tol: f64,
    pub refine: Refinement,
    pub xi_search: XiSearch,
    /// Recompute on the doubled domain to estimate the truncation error.
    pub check_truncation: bool,
    /// Cap on the adapted lateral half-width.
    pub max_r2: f64,
    pub lanczos: LanczosOptions,
}

impl Default for ZetaOptions {
    fn default() -> Self {
        ZetaOptions {
            grid: HalfPlaneGrid::default(),
            tol: 1e-3,
            refine: Refinement::None,
            xi_search: XiSearch::Auto {
                half_width: 0.6,
                tol: 2e-3,
            },
            max_r2: 160.0,
            check_truncation: false,
            lanczos: LanczosOptions {
                tol: 1e-7,
                ..LanczosOptions::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZetaValue {
    pub nu: f64,
    pub zeta: f64,
    /// Eigen residual of the accepted fibre.
    pub residual: f64,
    /// Bloch momentum of the minimizing fibre.
    pub xi: f64,
    /// Shift under domain doubling (`NaN` if not computed).
    pub truncation_err: f64,
    /// Truncation shift above tolerance, or value outside the sanity window.
    pub flagged: bool,
    pub matvecs: usize,
}

/// `zeta(nu)` with default grid and options.
pub fn zeta(nu: f64, tol: f64, refine: Refinement) -> Result<f64> {
    let opts = ZetaOptions {
        tol,
        refine,
        ..ZetaOptions::default()
    };
    zeta_with(nu, &opts).map(|z| z.zeta)
}

pub fn zeta_with(nu: f64, opts: &ZetaOptions) -> Result<ZetaValue> {
    if !(opts.tol > 0.0) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    let base = zeta_on_grid(nu, &opts.grid, opts, None)?;
    let mut out = base.clone();
    if opts.refine == Refinement::Richardson {
        let fine = zeta_on_grid(nu, &opts.grid.refined(), opts, Some(base.xi))?;
        out.zeta = (4.0 * fine.zeta - base.zeta) / 3.0;
        out.residual = fine.residual.max(base.residual);
        out.matvecs += fine.matvecs;
    }
    if opts.check_truncation {
        let big = zeta_on_grid(nu, &opts.grid.doubled_domain(), opts, Some(base.xi))?;
        out.truncation_err = (big.zeta - base.zeta).abs();
        out.matvecs += big.matvecs;
    }
    out.flagged = out.truncation_err > opts.tol || !(0.5..=1.1).contains(&out.zeta);
    Ok(out)
}

fn zeta_on_grid(
    nu: f64,
    grid: &HalfPlaneGrid,
    opts: &ZetaOptions,
    xi_hint: Option<f64>,
) -> Result<ZetaValue> {
    let grid = grid.adapted(nu, opts.max_r2);
    let mut p = HalfPlaneProblem::new(nu, &grid);
    p.validate()?;
    let default_centre = p.xi;
    let mut warm: Option<Vec<C64>> = None;
    let mut matvecs = 0usize;
    let mut eval = |xi: f64, warm: &mut Option<Vec<C64>>| -> Result<(f64, f64)> {
        p.xi = xi;
        let r = fibre_eigenpair(&p, warm.as_deref(), &opts.lanczos)?;
        matvecs += r.iterations;
        let out = (r.eigenvalue, r.residual_norm);
        *warm = Some(r.eigenvector);
        Ok(out)
    };
    let search = match opts.xi_search {
        XiSearch::Auto { .. } if nu > 0.0 => XiSearch::Fixed(default_centre),
        XiSearch::Auto { half_width, tol } => XiSearch::Golden { half_width, tol },
        other => other,
    };
    let (xi, (lam, res)) = match (search, xi_hint) {
        (XiSearch::Fixed(xi), _) => (xi, eval(xi, &mut warm)?),
        (XiSearch::Auto { .. }, _) => unreachable!(),
        (XiSearch::Golden { half_width, tol }, hint) => {
            let centre = hint.unwrap_or(default_centre);
            let width = if hint.is_some() { half_width * 0.25 } else { half_width };
            golden_min(centre - width, centre + width, tol, |xi| eval(xi, &mut warm))?
        }
    };
    Ok(ZetaValue {
        nu,
        zeta: lam,
        residual: res,
        xi,
        truncation_err: f64::NAN,
        flagged: false,
        matvecs,
    })
}

/// Golden-section minimization of `f(x).0`; returns the best point evaluated.
fn golden_min<F>(mut a: f64, mut b: f64, tol: f64, mut f: F) -> Result<(f64, (f64, f64))>
where
    F: FnMut(f64) -> Result<(f64, f64)>,
{
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut best = if fc.0 <= fd.0 { (c, fc) } else { (d, fd) };
    while (b - a).abs() > tol {
        if fc.0 <= fd.0 {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
            if fc.0 < best.1 .0 {
                best = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
            if fd.0 < best.1 .0 {
                best = (d, fd);
            }
        }
    }
    Ok(best)
}

/// Chebyshev-Lobatto nodes on `[0, pi/2]`.
pub fn chebyshev_nodes(count: usize) -> Vec<f64> {
    assert!(count >= 2);
    (0..count)
        .map(|k| {
            let t = core::f64::consts::PI * k as f64 / (count - 1) as f64;
            core::f64::consts::FRAC_PI_4 * (1.0 - t.cos())
        })
        .collect()
}

/// Tabulated `zeta` with monotone cubic interpolation between nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ZetaTable {
    pub entries: Vec<ZetaValue>,
    interp: MonotoneCubic,
}

impl ZetaTable {
    pub fn from_entries(entries: Vec<ZetaValue>) -> Result<Self> {
        let xs = entries.iter().map(|e| e.nu).collect();
        let ys = entries.iter().map(|e| e.zeta).collect();
        let interp = MonotoneCubic::new(xs, ys)?;
        Ok(ZetaTable { entries, interp })
    }

    /// Compute the table sequentially on `count` Chebyshev nodes.
    pub fn compute(count: usize, opts: &ZetaOptions) -> Result<Self> {
        let entries = chebyshev_nodes(count)
            .into_iter()
            .map(|nu| zeta_with(nu, opts))
            .collect::<Result<Vec<_>>>()?;
        Self::from_entries(entries)
    }

    pub fn eval(&self, nu: f64) -> f64 {
        self.interp.eval(nu)
    }

    pub fn theta0(&self) -> f64 {
        self.entries[0].zeta
    }

    pub fn zeta_max(&self) -> f64 {
        self.entries.last().unwrap().zeta
    }

    /// Largest drop between consecutive nodes (0 for a monotone table).
    pub fn max_inversion(&self) -> f64 {
        self.entries
            .windows(2)
            .map(|w| (w[0].zeta - w[1].zeta).max(0.0))
            .fold(0.0, f64::max)
    }

    /// Bisection inverse of the interpolant.
    pub fn inverse(&self, s: f64, tol: f64) -> Result<f64> {
        let (lo, hi) = (self.theta0(), self.zeta_max());
        if !(s >= lo && s <= hi) {
            return Err(Error::OutOfRange { value: s, lo, hi });
        }
        bisect(0.0, FRAC_PI_2, tol, |nu| Ok(self.eval(nu) - s))
    }

    /// Largest deviation between the interpolant and direct evaluation at the
    /// midpoints of consecutive nodes.
    pub fn midpoint_check(&self, opts: &ZetaOptions) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for w in self.entries.windows(2) {
            let mid = 0.5 * (w[0].nu + w[1].nu);
            let direct = zeta_with(mid, opts)?.zeta;
            worst = worst.max((direct - self.eval(mid)).abs());
        }
        Ok(worst)
    }
}

/// `nu` with `zeta(nu) = s`, by bisection on direct evaluations.
pub fn zeta_inverse(s: f64, opts: &ZetaOptions) -> Result<f64> {
    let lo = zeta_with(0.0, opts)?.zeta;
    let hi = zeta_with(FRAC_PI_2, opts)?.zeta;
    if !(s >= lo && s <= hi) {
        return Err(Error::OutOfRange { value: s, lo, hi });
    }
    let angle_tol = 1e-4;
    bisect(0.0, FRAC_PI_2, angle_tol, |nu| Ok(zeta_with(nu, opts)?.zeta - s))
}

fn bisect<F: FnMut(f64) -> Result<f64>>(mut a: f64, mut b: f64, tol: f64, mut f: F) -> Result<f64> {
    let mut fa = f(a)?;
    if fa >= 0.0 {
        return Ok(a);
    }
    if f(b)? <= 0.0 {
        return Ok(b);
    }
    while b - a > tol {
        let m = 0.5 * (a + b);
        let fm = f(m)?;
        if fm < 0.0 {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    let _ = fa;
    Ok(0.5 * (a + b))
}
