//! Coupled Landau-de Gennes descent on 3D lattices.
//!
//! Unknowns live on the nodes of a uniform grid covering either a box or a
//! voxelized ball (the union of cells whose centre lies inside the sphere).
//! The order parameter `psi` is discretized with covariant link phases
//! `exp(i q h (n_a + n_b)_k / 2)` and lumped node weights; the Oseen-Frank
//! part evaluates `n` and its centred differences at cell centres.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng as _;

use crate::geom::{director_at, DirectorRotation, Vec3};
use crate::ncg::{self, NcgOptions, QuarticObjective};
use crate::{Error, Result, C64};

/// Tolerance on `|n| = 1` accepted by the energy.
pub const UNIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    /// `[0, L1] x [0, L2] x [0, L3]`.
    Box([f64; 3]),
    /// Ball of the given radius centred at the origin.
    Ball(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdGGrid {
    pub domain: Domain,
    pub cells: [usize; 3],
    pub h: f64,
    pub origin: Vec3,
    /// Base node of every active cell.
    active_cells: Vec<usize>,
    pub active: Vec<bool>,
    pub boundary: Vec<bool>,
    node_w: Vec<f64>,
    link_w: Vec<[f64; 3]>,
}

impl LdGGrid {
    /// Box with spacing `h`; every side must be a multiple of `h`.
    pub fn cuboid(lengths: [f64; 3], h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::invalid("h", "spacing must be positive"));
        }
        let mut cells = [0usize; 3];
        for k in 0..3 {
            let l = lengths[k];
            if !(l > 0.0) || !l.is_finite() {
                return Err(Error::invalid("lengths", "box sides must be positive"));
            }
            let c = (l / h).round();
            if c < 2.0 || (c * h - l).abs() > 1e-9 * l {
                return Err(Error::invalid("h", "must divide every box side at least twice"));
            }
            cells[k] = c as usize;
        }
        Ok(Self::build(Domain::Box(lengths), cells, h, Vec3::ZERO, |_| true))
    }

    /// Voxelized ball on a `cells^3` lattice over `[-R, R]^3`.
    pub fn ball(radius: f64, cells: usize) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::invalid("radius", "must be positive"));
        }
        if cells < 4 {
            return Err(Error::invalid("cells", "need at least 4 cells per axis"));
        }
        let h = 2.0 * radius / cells as f64;
        let origin = Vec3::new(-radius, -radius, -radius);
        Ok(Self::build(Domain::Ball(radius), [cells; 3], h, origin, |c| {
            c.norm() < radius
        }))
    }

    fn build(domain: Domain, cells: [usize; 3], h: f64, origin: Vec3, inside: impl Fn(Vec3) -> bool) -> Self {
        let dims = [cells[0] + 1, cells[1] + 1, cells[2] + 1];
        let nn = dims[0] * dims[1] * dims[2];
        let idx = |i: usize, j: usize, k: usize| i + dims[0] * (j + dims[1] * k);
        let mut cell_on = vec![false; cells[0] * cells[1] * cells[2]];
        let mut active_cells = Vec::new();
        let mut node_w = vec![0.0; nn];
        let mut link_w = vec![[0.0; 3]; nn];
        let h3 = h * h * h;
        for k in 0..cells[2] {
            for j in 0..cells[1] {
                for i in 0..cells[0] {
                    let c = origin
                        + Vec3::new((i as f64 + 0.5) * h, (j as f64 + 0.5) * h, (k as f64 + 0.5) * h);
                    if !inside(c) {
                        continue;
                    }
                    cell_on[i + cells[0] * (j + cells[1] * k)] = true;
                    let base = idx(i, j, k);
                    active_cells.push(base);
                    for b in 0..8 {
                        let (di, dj, dk) = (b & 1, (b >> 1) & 1, (b >> 2) & 1);
                        let v = idx(i + di, j + dj, k + dk);
                        node_w[v] += h3 / 8.0;
                    }
                    // each cell holds four edges per direction
                    for a in 0..2 {
                        for bb in 0..2 {
                            link_w[idx(i, j + a, k + bb)][0] += h / 4.0;
                            link_w[idx(i + a, j, k + bb)][1] += h / 4.0;
                            link_w[idx(i + a, j + bb, k)][2] += h / 4.0;
                        }
                    }
                }
            }
        }
        let active: Vec<bool> = node_w.iter().map(|&w| w > 0.0).collect();
        let mut boundary = vec![false; nn];
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let v = idx(i, j, k);
                    if !active[v] {
                        continue;
                    }
                    let mut full = true;
                    for b in 0..8 {
                        let (ci, cj, ck) = (
                            i as isize - (b & 1) as isize,
                            j as isize - ((b >> 1) & 1) as isize,
                            k as isize - ((b >> 2) & 1) as isize,
                        );
                        let inside_range = ci >= 0
                            && cj >= 0
                            && ck >= 0
                            && (ci as usize) < cells[0]
                            && (cj as usize) < cells[1]
                            && (ck as usize) < cells[2];
                        if !inside_range
                            || !cell_on[ci as usize + cells[0] * (cj as usize + cells[1] * ck as usize)]
                        {
                            full = false;
                            break;
                        }
                    }
                    boundary[v] = !full;
                }
            }
        }
        LdGGrid {
            domain,
            cells,
            h,
            origin,
            active_cells,
            active,
            boundary,
            node_w,
            link_w,
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.cells[0] + 1, self.cells[1] + 1, self.cells[2] + 1]
    }

    pub fn node_count(&self) -> usize {
        self.active.len()
    }

    pub fn active_cell_count(&self) -> usize {
        self.active_cells.len()
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        let d = self.dims();
        i + d[0] * (j + d[1] * k)
    }

    pub fn position(&self, v: usize) -> Vec3 {
        let d = self.dims();
        let i = v % d[0];
        let j = (v / d[0]) % d[1];
        let k = v / (d[0] * d[1]);
        self.origin + Vec3::new(i as f64 * self.h, j as f64 * self.h, k as f64 * self.h)
    }

    /// Discrete volume, the sum of the active cell volumes.
    pub fn volume(&self) -> f64 {
        self.active_cells.len() as f64 * self.h.powi(3)
    }

    /// Lumped quadrature weight of a node.
    pub fn node_weight(&self, v: usize) -> f64 {
        self.node_w[v]
    }

    /// Distance to the boundary of the continuous domain.
    pub fn boundary_distance(&self, x: Vec3) -> f64 {
        match self.domain {
            Domain::Box(l) => (0..3).map(|k| x.0[k].min(l[k] - x.0[k])).fold(f64::INFINITY, f64::min),
            Domain::Ball(r) => r - x.norm(),
        }
    }

    /// Radius of the largest inscribed ball.
    pub fn inradius(&self) -> f64 {
        match self.domain {
            Domain::Box(l) => 0.5 * l[0].min(l[1]).min(l[2]),
            Domain::Ball(r) => r,
        }
    }

    fn neighbour(&self, v: usize, k: usize) -> usize {
        let d = self.dims();
        v + [1, d[0], d[0] * d[1]][k]
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.node_count() {
            return Err(Error::ShapeMismatch {
                expected: self.node_count(),
                found: len,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdGParams {
    pub kappa: f64,
    pub q: f64,
    pub tau: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    /// Use 0 instead of `K2 + K4` as the null-Lagrangian coefficient.
    pub drop_null_lagrangian: bool,
}

impl LdGParams {
    /// Parameters with `q = b kappa^2 / tau`.
    pub fn from_b(kappa: f64, b: f64, tau: f64, k: [f64; 4]) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::invalid("tau", "must be positive"));
        }
        let p = LdGParams {
            kappa,
            q: b * kappa * kappa / tau,
            tau,
            k1: k[0],
            k2: k[1],
            k3: k[2],
            k4: k[3],
            drop_null_lagrangian: false,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn b(&self) -> f64 {
        self.q * self.tau / (self.kappa * self.kappa)
    }

    /// Large-elasticity regime label: `b > 1` and `min(K1, K2, K3) >= c e(kappa)`
    /// with `e(kappa) = kappa^3 ln(kappa)^2 ln(1 + ln kappa)`. At finite `kappa`
    /// this is a naming convention only.
    pub fn regime_a(&self, c: f64) -> bool {
        self.b() > 1.0 && self.k1.min(self.k2).min(self.k3) >= c * e_kappa(self.kappa)
    }

    pub fn null_coefficient(&self) -> f64 {
        if self.drop_null_lagrangian {
            0.0
        } else {
            self.k2 + self.k4
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("kappa", self.kappa), ("q", self.q), ("tau", self.tau)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(name, "must be positive and finite"));
            }
        }
        for (name, v) in [("K1", self.k1), ("K2", self.k2), ("K3", self.k3)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(name, "elastic constants must be nonnegative"));
            }
        }
        if !self.k4.is_finite() {
            return Err(Error::invalid("K4", "must be finite"));
        }
        Ok(())
    }
}

/// Elasticity growth `kappa^3 ln(kappa)^2 ln(1 + ln kappa)`; zero for `kappa <= 1`.
pub fn e_kappa(kappa: f64) -> f64 {
    let l = kappa.ln().max(0.0);
    kappa.powi(3) * l * l * (1.0 + l).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdGState {
    pub psi: Vec<C64>,
    pub n: Vec<Vec3>,
    pub boundary_director: DirectorRotation,
}

impl LdGState {
    /// Seeded noise `psi` of the given amplitude on active nodes and the
    /// boundary director extended to every node.
    pub fn initial(grid: &LdGGrid, director: DirectorRotation, amplitude: f64, seed: u64) -> Self {
        let mut rng = crate::rng_from_seed(seed);
        let psi = grid
            .active
            .iter()
            .map(|&on| {
                let z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * amplitude;
                if on {
                    z
                } else {
                    C64::new(0.0, 0.0)
                }
            })
            .collect();
        LdGState {
            psi,
            n: director_field(grid, &director),
            boundary_director: director,
        }
    }

    pub fn validate(&self, grid: &LdGGrid) -> Result<()> {
        grid.check_len(self.psi.len())?;
        grid.check_len(self.n.len())?;
        check_unit(grid, &self.n)?;
        for v in 0..grid.node_count() {
            if grid.boundary[v] {
                let want = director_at(&self.boundary_director, grid.position(v));
                if (self.n[v] - want).norm() > UNIT_TOL {
                    return Err(Error::BoundaryMismatch { node: v });
                }
            }
        }
        Ok(())
    }
}

/// `director_at(r, x)` at every node.
pub fn director_field(grid: &LdGGrid, r: &DirectorRotation) -> Vec<Vec3> {
    (0..grid.node_count()).map(|v| director_at(r, grid.position(v))).collect()
}

fn check_unit(grid: &LdGGrid, n: &[Vec3]) -> Result<()> {
    for (v, x) in n.iter().enumerate() {
        if grid.active[v] {
            let norm = x.norm();
            if !((norm - 1.0).abs() <= UNIT_TOL) {
                return Err(Error::NonUnit { norm });
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdGEnergy {
    pub g: f64,
    pub f_plus: f64,
    /// `int tr(Dn)^2 - (div n)^2`, without the `K2 + K4` factor.
    pub l_null: f64,
    pub total: f64,
}

pub fn ldg_energy(grid: &LdGGrid, s: &LdGState, p: &LdGParams) -> Result<LdGEnergy> {
    p.validate()?;
    grid.check_len(s.psi.len())?;
    grid.check_len(s.n.len())?;
    check_unit(grid, &s.n)?;
    let g = gl_terms(grid, &s.psi, &s.n, p, None, None);
    let (f_plus, l_null) = director_terms(grid, &s.n, p, None);
    Ok(LdGEnergy {
        g,
        f_plus,
        l_null,
        total: g + f_plus + p.null_coefficient() * l_null,
    })
}

/// Ginzburg-Landau part alone; `n` need not be unit (used for gauge checks).
pub fn gl_energy(grid: &LdGGrid, psi: &[C64], n: &[Vec3], p: &LdGParams) -> Result<f64> {
    grid.check_len(psi.len())?;
    grid.check_len(n.len())?;
    Ok(gl_terms(grid, psi, n, p, None, None))
}

/// Gradients of the total energy: `dE = Re <g_psi, dpsi> + sum g_n . dn`.
pub fn ldg_gradient(grid: &LdGGrid, s: &LdGState, p: &LdGParams) -> Result<(f64, Vec<C64>, Vec<Vec3>)> {
    grid.check_len(s.psi.len())?;
    grid.check_len(s.n.len())?;
    let mut gp = vec![C64::new(0.0, 0.0); grid.node_count()];
    let mut gn = vec![Vec3::ZERO; grid.node_count()];
    let e_gl = gl_terms(grid, &s.psi, &s.n, p, Some(&mut gp), Some(&mut gn));
    let (f, l) = director_terms(grid, &s.n, p, Some(&mut gn));
    Ok((e_gl + f + p.null_coefficient() * l, gp, gn))
}

fn link_phase(p: &LdGParams, h: f64, na: Vec3, nb: Vec3, k: usize) -> f64 {
    0.5 * p.q * h * (na.0[k] + nb.0[k])
}

fn gl_terms(
    grid: &LdGGrid,
    psi: &[C64],
    n: &[Vec3],
    p: &LdGParams,
    mut g_psi: Option<&mut [C64]>,
    mut g_n: Option<&mut [Vec3]>,
) -> f64 {
    let k2 = p.kappa * p.kappa;
    let mut e = 0.0;
    for v in 0..grid.node_count() {
        let w = grid.node_w[v];
        if w == 0.0 {
            continue;
        }
        let z = psi[v];
        let m = z.norm_sqr();
        e += w * k2 * (-m + 0.5 * m * m);
        if let Some(g) = g_psi.as_deref_mut() {
            g[v] += z * (2.0 * w * k2 * (m - 1.0));
        }
        for k in 0..3 {
            let lw = grid.link_w[v][k];
            if lw == 0.0 {
                continue;
            }
            let b = grid.neighbour(v, k);
            let theta = link_phase(p, grid.h, n[v], n[b], k);
            let ph = C64::from_polar(1.0, theta);
            let r = psi[b] - ph * z;
            e += lw * r.norm_sqr();
            if let Some(g) = g_psi.as_deref_mut() {
                g[b] += r * (2.0 * lw);
                g[v] -= ph.conj() * r * (2.0 * lw);
            }
            if let Some(g) = g_n.as_deref_mut() {
                let de_dtheta = 2.0 * lw * (r.conj() * ph * z).im;
                let c = de_dtheta * 0.5 * p.q * grid.h;
                g[v].0[k] += c;
                g[b].0[k] += c;
            }
        }
    }
    e
}

/// Trilinear shape values and gradients (in units of `1/h`) at the cell
/// centre, the single quadrature point of the director terms.
struct Q1 {
    val: [f64; 8],
    der: [[f64; 3]; 8],
}

impl Q1 {
    fn new() -> Self {
        let mut der = [[0.0; 3]; 8];
        for (c, d) in der.iter_mut().enumerate() {
            for a in 0..3 {
                d[a] = if (c >> a) & 1 == 1 { 0.25 } else { -0.25 };
            }
        }
        Q1 { val: [0.125; 8], der }
    }
}

fn cell_corners(grid: &LdGGrid, base: usize) -> [usize; 8] {
    let d = grid.dims();
    core::array::from_fn(|c| base + (c & 1) + d[0] * ((c >> 1) & 1) + d[0] * d[1] * ((c >> 2) & 1))
}

/// Cell-centre `n` and `D[j][k] = d n_j / d x_k`.
fn centre_eval(q1: &Q1, corners: &[Vec3; 8], inv_h: f64) -> ([f64; 3], [[f64; 3]; 3]) {
    let mut nv = [0.0; 3];
    let mut d = [[0.0; 3]; 3];
    for c in 0..8 {
        let v = q1.val[c];
        let dr = q1.der[c];
        for j in 0..3 {
            let x = corners[c].0[j];
            nv[j] += v * x;
            for k in 0..3 {
                d[j][k] += dr[k] * x * inv_h;
            }
        }
    }
    (nv, d)
}

fn curl_of(d: &[[f64; 3]; 3]) -> [f64; 3] {
    [d[2][1] - d[1][2], d[0][2] - d[2][0], d[1][0] - d[0][1]]
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// `(F_plus, L)`; the gradient written is that of `F_plus + c L` with the
/// run's null coefficient `c`.
fn director_terms(grid: &LdGGrid, n: &[Vec3], p: &LdGParams, mut g_n: Option<&mut [Vec3]>) -> (f64, f64) {
    let q1 = Q1::new();
    let inv_h = 1.0 / grid.h;
    let w = grid.h.powi(3);
    let cl = p.null_coefficient();
    let mut f_plus = 0.0;
    let mut l_null = 0.0;
    for &base in &grid.active_cells {
        let idx = cell_corners(grid, base);
        let corners: [Vec3; 8] = core::array::from_fn(|c| n[idx[c]]);
        {
            let (nv, d) = centre_eval(&q1, &corners, inv_h);
            let div = d[0][0] + d[1][1] + d[2][2];
            let curl = curl_of(&d);
            let twist = dot3(curl, nv) + p.tau;
            let bend = cross3(curl, nv);
            let bend2 = dot3(bend, bend);
            let mut tr = 0.0;
            for j in 0..3 {
                for k in 0..3 {
                    tr += d[j][k] * d[k][j];
                }
            }
            f_plus += w * (p.k1 * div * div + p.k2 * twist * twist + p.k3 * bend2);
            l_null += w * (tr - div * div);
            let Some(g) = g_n.as_deref_mut() else { continue };
            // derivatives with respect to n, curl n and D at the Gauss point
            let cn = dot3(curl, nv);
            let nn = dot3(nv, nv);
            let cc = dot3(curl, curl);
            let mut gn = [0.0; 3];
            let mut gc = [0.0; 3];
            for a in 0..3 {
                gn[a] = 2.0 * p.k2 * twist * curl[a] + p.k3 * (2.0 * cc * nv[a] - 2.0 * cn * curl[a]);
                gc[a] = 2.0 * p.k2 * twist * nv[a] + p.k3 * (2.0 * nn * curl[a] - 2.0 * cn * nv[a]);
            }
            let mut gd = [[0.0; 3]; 3];
            for j in 0..3 {
                gd[j][j] += 2.0 * p.k1 * div - 2.0 * cl * div;
                for k in 0..3 {
                    gd[j][k] += 2.0 * cl * d[k][j];
                }
            }
            gd[2][1] += gc[0];
            gd[1][2] -= gc[0];
            gd[0][2] += gc[1];
            gd[2][0] -= gc[1];
            gd[1][0] += gc[2];
            gd[0][1] -= gc[2];
            for c in 0..8 {
                let v = q1.val[c];
                let dr = q1.der[c];
                let out = &mut g[idx[c]].0;
                for j in 0..3 {
                    out[j] += w * (v * gn[j] + inv_h * (dr[0] * gd[j][0] + dr[1] * gd[j][1] + dr[2] * gd[j][2]));
                }
            }
        }
    }
    (f_plus, l_null)
}

/// `(||div n||_2, ||curl n + tau n||_2)` by cell-centre quadrature.
pub fn director_residuals(grid: &LdGGrid, n: &[Vec3], tau: f64) -> Result<(f64, f64)> {
    grid.check_len(n.len())?;
    let q1 = Q1::new();
    let inv_h = 1.0 / grid.h;
    let w = grid.h.powi(3);
    let (mut sd, mut sc) = (0.0, 0.0);
    for &base in &grid.active_cells {
        let idx = cell_corners(grid, base);
        let corners: [Vec3; 8] = core::array::from_fn(|c| n[idx[c]]);
        {
            let (nv, d) = centre_eval(&q1, &corners, inv_h);
            let div = d[0][0] + d[1][1] + d[2][2];
            let curl = curl_of(&d);
            let r: [f64; 3] = core::array::from_fn(|a| curl[a] + tau * nv[a]);
            sd += w * div * div;
            sc += w * dot3(r, r);
        }
    }
    Ok((sd.sqrt(), sc.sqrt()))
}

/// `|L(n1) - L(n2)|` for unit fields sharing their boundary values.
pub fn null_lagrangian_check(grid: &LdGGrid, n1: &[Vec3], n2: &[Vec3]) -> Result<f64> {
    grid.check_len(n1.len())?;
    grid.check_len(n2.len())?;
    check_unit(grid, n1)?;
    check_unit(grid, n2)?;
    for v in 0..grid.node_count() {
        if grid.boundary[v] && (n1[v] - n2[v]).norm() > 1e-12 {
            return Err(Error::BoundaryMismatch { node: v });
        }
    }
    let p = LdGParams {
        kappa: 1.0,
        q: 1.0,
        tau: 1.0,
        k1: 0.0,
        k2: 0.0,
        k3: 0.0,
        k4: 0.0,
        drop_null_lagrangian: true,
    };
    let (_, l1) = director_terms(grid, n1, &p, None);
    let (_, l2) = director_terms(grid, n2, &p, None);
    Ok((l1 - l2).abs())
}

/// `int_{dist < t} |psi|^4 / int |psi|^4`; `None` when there is no mass.
pub fn boundary_concentration(grid: &LdGGrid, psi: &[C64], t: f64) -> Result<Option<f64>> {
    grid.check_len(psi.len())?;
    if !(t > 0.0 && t < grid.inradius()) {
        return Err(Error::invalid("t", "layer thickness must lie in (0, inradius)"));
    }
    let (mut inner, mut total) = (0.0, 0.0);
    for v in 0..grid.node_count() {
        let w = grid.node_w[v];
        if w == 0.0 {
            continue;
        }
        let m = psi[v].norm_sqr();
        let m4 = w * m * m;
        total += m4;
        if grid.boundary_distance(grid.position(v)) < t {
            inner += m4;
        }
    }
    Ok(if total > 0.0 { Some(inner / total) } else { None })
}

/// `int |psi|^4` with the lumped weights.
pub fn psi4_mass(grid: &LdGGrid, psi: &[C64]) -> f64 {
    psi.iter()
        .zip(&grid.node_w)
        .map(|(z, w)| {
            let m = z.norm_sqr();
            w * m * m
        })
        .sum()
}

/// `(int |(grad - i A) u|^2, |B| int |u|^2)` for `A = B x (x - c) / 2`
/// about the centre `c` of the domain, with exact link phases.
pub fn spectral_floor_check(grid: &LdGGrid, u: &[C64], b_field: Vec3) -> Result<(f64, f64)> {
    grid.check_len(u.len())?;
    let centre = match grid.domain {
        Domain::Box(l) => Vec3::new(l[0] / 2.0, l[1] / 2.0, l[2] / 2.0),
        Domain::Ball(_) => Vec3::ZERO,
    };
    let mut kin = 0.0;
    let mut mass = 0.0;
    for v in 0..grid.node_count() {
        mass += grid.node_w[v] * u[v].norm_sqr();
        for k in 0..3 {
            let lw = grid.link_w[v][k];
            if lw == 0.0 {
                continue;
            }
            let b = grid.neighbour(v, k);
            let mid = (grid.position(v) + grid.position(b)) * 0.5 - centre;
            let a = b_field.cross(mid) * 0.5;
            let ph = C64::from_polar(1.0, a.0[k] * grid.h);
            kin += lw * (u[b] - ph * u[v]).norm_sqr();
        }
    }
    Ok((kin, b_field.norm() * mass))
}

/// `psi`-part of the energy at fixed `n`.
struct PsiObjective<'a> {
    grid: &'a LdGGrid,
    n: &'a [Vec3],
    p: &'a LdGParams,
}

impl QuarticObjective for PsiObjective<'_> {
    fn dim(&self) -> usize {
        self.grid.node_count()
    }

    fn energy_gradient(&self, u: &[C64], g: &mut [C64]) -> f64 {
        g.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        gl_terms(self.grid, u, self.n, self.p, Some(g), None)
    }

    fn line_polynomial(&self, u: &[C64], d: &[C64], c0: f64, c1: f64) -> [f64; 5] {
        let grid = self.grid;
        let k2 = self.p.kappa * self.p.kappa;
        let (mut c2, mut c3, mut c4) = (0.0, 0.0, 0.0);
        for v in 0..grid.node_count() {
            let w = grid.node_w[v];
            if w == 0.0 {
                continue;
            }
            let a = u[v].norm_sqr();
            let b = (u[v].conj() * d[v]).re;
            let c = d[v].norm_sqr();
            c2 += w * k2 * (-c + 0.5 * (4.0 * b * b + 2.0 * a * c));
            c3 += w * k2 * 2.0 * b * c;
            c4 += w * k2 * 0.5 * c * c;
            for k in 0..3 {
                let lw = grid.link_w[v][k];
                if lw == 0.0 {
                    continue;
                }
                let nb = grid.neighbour(v, k);
                let ph = C64::from_polar(1.0, link_phase(self.p, grid.h, self.n[v], self.n[nb], k));
                c2 += lw * (d[nb] - ph * d[v]).norm_sqr();
            }
        }
        [c0, c1, c2, c3, c4]
    }
}

/// Step-size state carried between flow steps.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowControl {
    /// Conjugate-gradient iterations on `psi` per step.
    pub psi_iters: usize,
    /// Current director step (L2-gradient units).
    pub dt_n: f64,
    pub dt_floor: f64,
    pub armijo: f64,
}

impl FlowControl {
    /// Director step starting at `0.5 h^2 / max K`.
    pub fn new(grid: &LdGGrid, p: &LdGParams) -> Self {
        let k = p.k1.max(p.k2).max(p.k3).max(p.null_coefficient().abs()).max(1e-12);
        FlowControl {
            psi_iters: 10,
            dt_n: 0.5 * grid.h * grid.h / k,
            dt_floor: 1e-14 * grid.h * grid.h / k,
            armijo: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub energy_before: f64,
    pub energy_after: f64,
    /// Breakdown at the end of the step.
    pub energy: LdGEnergy,
    pub psi_accepted: bool,
    pub n_accepted: bool,
    pub dt_n: f64,
}

impl StepReport {
    pub fn delta(&self) -> f64 {
        self.energy_after - self.energy_before
    }
}

fn breakdown(grid: &LdGGrid, psi: &[C64], n: &[Vec3], p: &LdGParams) -> LdGEnergy {
    let g = gl_terms(grid, psi, n, p, None, None);
    let (f_plus, l_null) = director_terms(grid, n, p, None);
    LdGEnergy {
        g,
        f_plus,
        l_null,
        total: g + f_plus + p.null_coefficient() * l_null,
    }
}

/// One `psi` descent step followed by one projected director step on the
/// interior nodes; each part is kept only if it lowers the total energy.
pub fn flow_step(grid: &LdGGrid, s: &mut LdGState, p: &LdGParams, ctl: &mut FlowControl) -> Result<StepReport> {
    grid.check_len(s.psi.len())?;
    grid.check_len(s.n.len())?;
    let before = breakdown(grid, &s.psi, &s.n, p);
    let e0 = before.total;

    // psi: a few conjugate-gradient iterations with exact line search
    let obj = PsiObjective { grid, n: &s.n, p };
    let mut psi = s.psi.clone();
    let opts = NcgOptions {
        max_iter: ctl.psi_iters,
        grad_tol: 0.0,
        ..NcgOptions::default()
    };
    let rep = ncg::minimize(&obj, &mut psi, &opts)?;
    // projecting onto the unit disk lowers both the potential and every link term
    let mut g_psi = rep.energy;
    let mut clamped = false;
    for z in psi.iter_mut() {
        let m = z.norm();
        if m > 1.0 {
            *z /= m;
            clamped = true;
        }
    }
    if clamped {
        g_psi = gl_terms(grid, &psi, &s.n, p, None, None);
    }
    let psi_accepted = g_psi < before.g && rep.iterations > 0;
    let mut after = before;
    if psi_accepted {
        s.psi = psi;
        after.g = g_psi;
        after.total = g_psi + before.f_plus + p.null_coefficient() * before.l_null;
    }
    let e1 = after.total;

    // director: projected L2 gradient with Armijo backtracking
    let (_, _, gn) = ldg_gradient(grid, s, p)?;
    let mut dir = vec![Vec3::ZERO; grid.node_count()];
    let mut slope = 0.0;
    for v in 0..grid.node_count() {
        if !grid.active[v] || grid.boundary[v] {
            continue;
        }
        let w = grid.node_w[v];
        let g = gn[v] * (1.0 / w);
        let nv = s.n[v];
        let t = g - nv * g.dot(nv);
        dir[v] = -t;
        slope += w * t.dot(t);
    }
    let mut n_accepted = false;
    if slope > 0.0 {
        let mut dt = ctl.dt_n;
        while dt >= ctl.dt_floor {
            let trial: Vec<Vec3> = s
                .n
                .iter()
                .zip(&dir)
                .map(|(&nv, &d)| if d == Vec3::ZERO { nv } else { (nv + d * dt).normalized() })
                .collect();
            let e = breakdown(grid, &s.psi, &trial, p);
            if e.total <= e1 - ctl.armijo * dt * slope {
                s.n = trial;
                after = e;
                n_accepted = true;
                ctl.dt_n = dt * 1.5;
                break;
            }
            dt *= 0.5;
        }
        if !n_accepted {
            ctl.dt_n = dt.max(ctl.dt_floor);
        }
    }
    Ok(StepReport {
        energy_before: e0,
        energy_after: after.total,
        energy: after,
        psi_accepted,
        n_accepted,
        dt_n: ctl.dt_n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    /// Stop when the energy drop over `window` steps is below
    /// `rel_tol * max(|E|, abs_floor)`.
    pub rel_tol: f64,
    pub abs_floor: f64,
    pub window: usize,
    pub max_steps: usize,
    /// Layer thickness of the boundary-concentration diagnostic.
    pub layer: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub total: f64,
    pub g: f64,
    pub f_plus: f64,
    pub l_null: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdGDiagnostics {
    pub energy: LdGEnergy,
    pub div_l2: f64,
    pub curl_l2: f64,
    /// `||div n||_2 + ||curl n + tau n||_2`
    pub director_residual: f64,
    pub max_psi: f64,
    pub psi4: f64,
    pub boundary_fraction: Option<f64>,
    pub steps: usize,
    pub converged: bool,
    /// Both step kinds failed before the energy criterion was met.
    pub stuck: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdGRun {
    pub state: LdGState,
    pub trace: Vec<TraceRow>,
    pub steps: Vec<StepReport>,
    pub diagnostics: LdGDiagnostics,
}

pub fn run_to_convergence(grid: &LdGGrid, s0: LdGState, p: &LdGParams, stop: &StopRule) -> Result<LdGRun> {
    p.validate()?;
    s0.validate(grid)?;
    if stop.window == 0 {
        return Err(Error::invalid("window", "must be positive"));
    }
    let mut s = s0;
    let mut ctl = FlowControl::new(grid, p);
    let mut trace = Vec::new();
    let mut steps = Vec::new();
    let row = |step: usize, e: &LdGEnergy| TraceRow {
        step,
        total: e.total,
        g: e.g,
        f_plus: e.f_plus,
        l_null: e.l_null,
    };
    trace.push(row(0, &ldg_energy(grid, &s, p)?));
    let mut converged = false;
    let mut stuck = false;
    for it in 0..stop.max_steps {
        let rep = flow_step(grid, &mut s, p, &mut ctl)?;
        steps.push(rep);
        trace.push(row(it + 1, &rep.energy));
        if !rep.psi_accepted && !rep.n_accepted {
            stuck = true;
            break;
        }
        let m = trace.len();
        if m > stop.window {
            let drop = trace[m - 1 - stop.window].total - trace[m - 1].total;
            let e = trace[m - 1].total;
            if drop <= stop.rel_tol * e.abs().max(stop.abs_floor) {
                converged = true;
                break;
            }
        }
    }
    let energy = ldg_energy(grid, &s, p)?;
    let (div_l2, curl_l2) = director_residuals(grid, &s.n, p.tau)?;
    let max_psi = s.psi.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let diagnostics = LdGDiagnostics {
        energy,
        div_l2,
        curl_l2,
        director_residual: div_l2 + curl_l2,
        max_psi,
        psi4: psi4_mass(grid, &s.psi),
        boundary_fraction: boundary_concentration(grid, &s.psi, stop.layer)?,
        steps: steps.len(),
        converged,
        stuck,
    };
    Ok(LdGRun {
        state: s,
        trace,
        steps,
        diagnostics,
    })
}
