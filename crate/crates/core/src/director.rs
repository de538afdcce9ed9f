//! Boundary functional over rotated helical director fields: evaluation,
//! minimization over SO(3), smectic region and concentration density.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::geom::{angle_nu_unchecked, director_at, DirectorRotation, Quat, Vec3};
use crate::halfplane::ZetaTable;
use crate::halfspace::SurfaceEnergy;
use crate::interp::MonotoneCubic;
use crate::mesh::SurfaceMesh;
use crate::{Error, Result};

/// Tabulated `nu -> E(b_frak, nu)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ETable {
    pub b_frak: f64,
    pub nu_nodes: Vec<f64>,
    pub e_values: Vec<f64>,
    pub err_bars: Vec<f64>,
    interp: MonotoneCubic,
}

impl ETable {
    /// Nodes must be increasing and span `[0, pi/2]`; values must be `<= 0`.
    pub fn new(b_frak: f64, nu_nodes: Vec<f64>, e_values: Vec<f64>, err_bars: Vec<f64>) -> Result<Self> {
        if err_bars.len() != nu_nodes.len() {
            return Err(Error::ShapeMismatch {
                expected: nu_nodes.len(),
                found: err_bars.len(),
            });
        }
        let first = nu_nodes.first().copied().unwrap_or(f64::NAN);
        let last = nu_nodes.last().copied().unwrap_or(f64::NAN);
        if !(first.abs() < 1e-12 && (last - core::f64::consts::FRAC_PI_2).abs() < 1e-9) {
            return Err(Error::invalid("nu_nodes", "table must cover [0, pi/2]"));
        }
        if let Some(v) = e_values.iter().find(|v| !(**v <= 0.0)) {
            return Err(Error::invalid("e_values", alloc::format!("positive or non-finite value {v}")));
        }
        let interp = MonotoneCubic::new(nu_nodes.clone(), e_values.clone())?;
        Ok(ETable {
            b_frak,
            nu_nodes,
            e_values,
            err_bars,
            interp,
        })
    }

    /// `E = 0` everywhere.
    pub fn zero(b_frak: f64) -> Self {
        ETable::new(b_frak, vec![0.0, core::f64::consts::FRAC_PI_2], vec![0.0; 2], vec![0.0; 2]).unwrap()
    }

    pub fn from_surface_energies(b_frak: f64, rows: &[SurfaceEnergy]) -> Result<Self> {
        let mut rows: Vec<&SurfaceEnergy> = rows.iter().collect();
        rows.sort_by(|a, b| a.nu.total_cmp(&b.nu));
        ETable::new(
            b_frak,
            rows.iter().map(|r| r.nu).collect(),
            rows.iter().map(|r| r.estimate.min(0.0)).collect(),
            rows.iter().map(|r| r.err_bar).collect(),
        )
    }

    pub fn eval(&self, nu: f64) -> f64 {
        self.interp.eval(nu).min(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.e_values.iter().all(|v| *v == 0.0)
    }

    pub fn max_err_bar(&self) -> f64 {
        self.err_bars.iter().copied().fold(0.0, f64::max)
    }
}

/// Contact angle of `n0` at every face centroid.
pub fn face_angles(mesh: &SurfaceMesh, r: &DirectorRotation) -> Vec<f64> {
    mesh.face_centroids
        .iter()
        .zip(&mesh.face_normals)
        .map(|(c, n)| angle_nu_unchecked(director_at(r, *c), *n))
        .collect()
}

pub fn tilde_e(table: &ETable, mesh: &SurfaceMesh, r: &DirectorRotation) -> f64 {
    if table.is_zero() {
        return 0.0;
    }
    face_angles(mesh, r)
        .iter()
        .zip(&mesh.face_areas)
        .map(|(nu, a)| table.eval(*nu) * a)
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectorOptimum {
    pub quat_star: Quat,
    pub e0_value: f64,
    /// Every evaluated `(rotation, value)` pair, covering first.
    pub landscape_samples: Vec<(Quat, f64)>,
    pub degenerate_flag: bool,
    pub evaluations: usize,
}

impl DirectorOptimum {
    /// Samples within `rel` of the minimum, `value <= e0 + rel |e0|`.
    pub fn near_minimal(&self, rel: f64) -> Vec<(Quat, f64)> {
        let cut = self.e0_value + rel * self.e0_value.abs();
        self.landscape_samples.iter().copied().filter(|(_, v)| *v <= cut).collect()
    }
}

/// Super-Fibonacci spiral of `n` unit quaternions, canonicalized to `w >= 0`.
pub fn super_fibonacci(n: usize) -> Vec<Quat> {
    const PHI: f64 = core::f64::consts::SQRT_2;
    const PSI: f64 = 1.533_751_168_755_204_3;
    let two_pi = 2.0 * core::f64::consts::PI;
    (0..n)
        .map(|i| {
            let s = i as f64 + 0.5;
            let t = s / n as f64;
            let r = t.sqrt();
            let big_r = (1.0 - t).sqrt();
            let alpha = two_pi * s / PHI;
            let beta = two_pi * s / PSI;
            Quat::new(big_r * beta.cos(), r * alpha.sin(), r * alpha.cos(), big_r * beta.sin()).canonical()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct So3Search {
    /// Total evaluation budget; half goes to the covering.
    pub budget: usize,
    /// Number of covering minima refined by Nelder-Mead.
    pub seeds: usize,
    /// Relative spread below which the landscape counts as flat.
    pub flat_tol: f64,
}

impl So3Search {
    pub fn new(budget: usize) -> Result<Self> {
        if budget < 100 {
            return Err(Error::invalid("budget", "need at least 100 evaluations"));
        }
        Ok(So3Search {
            budget,
            seeds: 5,
            flat_tol: 1e-2,
        })
    }
}

/// Covering plus Nelder-Mead refinement of a function on SO(3). `eval_batch`
/// receives the covering in one call and refinement points one at a time.
pub fn optimize_rotation<F>(search: &So3Search, mut eval_batch: F) -> DirectorOptimum
where
    F: FnMut(&[Quat]) -> Vec<f64>,
{
    let n_cover = search.budget / 2;
    let cover = super_fibonacci(n_cover);
    let values = eval_batch(&cover);
    let mut samples: Vec<(Quat, f64)> = cover.iter().copied().zip(values.iter().copied()).collect();
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let degenerate = if lo == 0.0 && hi == 0.0 {
        true
    } else {
        (hi - lo) / lo.abs().max(1e-300) < search.flat_tol
    };
    if lo == 0.0 && hi == 0.0 {
        return DirectorOptimum {
            quat_star: cover[0],
            e0_value: 0.0,
            evaluations: samples.len(),
            landscape_samples: samples,
            degenerate_flag: true,
        };
    }
    let mut order: Vec<usize> = (0..cover.len()).collect();
    order.sort_by(|a, b| values[*a].total_cmp(&values[*b]));
    let seeds = search.seeds.min(order.len());
    let per_seed = (search.budget - n_cover) / seeds.max(1);
    // covering spacing on SO(3), about (8 pi^2 / n)^(1/3)
    let step = (8.0 * core::f64::consts::PI * core::f64::consts::PI / n_cover as f64).cbrt();
    for &seed in order.iter().take(seeds) {
        let q0 = cover[seed];
        let chart = |v: [f64; 3]| (q0 * Quat::from_rotation_vector(Vec3(v))).normalized().canonical();
        let mut local = |v: [f64; 3]| -> f64 {
            let q = chart(v);
            let val = eval_batch(core::slice::from_ref(&q))[0];
            samples.push((q, val));
            val
        };
        nelder_mead(&mut local, [0.0; 3], step, per_seed, values[seed]);
    }
    let (quat_star, e0_value) = samples
        .iter()
        .copied()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    DirectorOptimum {
        quat_star,
        e0_value,
        evaluations: samples.len(),
        landscape_samples: samples,
        degenerate_flag: degenerate,
    }
}

/// Nelder-Mead on `R^3` with at most `budget` evaluations; `f0` is `f(x0)`.
fn nelder_mead<F: FnMut([f64; 3]) -> f64>(f: &mut F, x0: [f64; 3], step: f64, budget: usize, f0: f64) -> ([f64; 3], f64) {
    let mut simplex: Vec<([f64; 3], f64)> = vec![(x0, f0)];
    let mut used = 0usize;
    for k in 0..3 {
        if used >= budget {
            break;
        }
        let mut x = x0;
        x[k] += step;
        simplex.push((x, f(x)));
        used += 1;
    }
    if simplex.len() < 4 {
        return simplex.into_iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    }
    let lerp = |a: [f64; 3], b: [f64; 3], t: f64| -> [f64; 3] {
        [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])]
    };
    while used < budget {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let size = simplex[1..]
            .iter()
            .map(|(x, _)| (0..3).map(|i| (x[i] - simplex[0].0[i]).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if size < 1e-7 {
            break;
        }
        let mut centroid = [0.0; 3];
        for (x, _) in &simplex[..3] {
            for i in 0..3 {
                centroid[i] += x[i] / 3.0;
            }
        }
        let worst = simplex[3];
        let xr = lerp(centroid, worst.0, -1.0);
        let fr = f(xr);
        used += 1;
        if fr < simplex[0].1 {
            if used < budget {
                let xe = lerp(centroid, worst.0, -2.0);
                let fe = f(xe);
                used += 1;
                simplex[3] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else {
                simplex[3] = (xr, fr);
            }
            continue;
        }
        if fr < simplex[2].1 {
            simplex[3] = (xr, fr);
            continue;
        }
        if used >= budget {
            break;
        }
        let (xc, fc) = if fr < worst.1 {
            let x = lerp(centroid, xr, 0.5);
            (x, f(x))
        } else {
            let x = lerp(centroid, worst.0, 0.5);
            (x, f(x))
        };
        used += 1;
        if fc < worst.1.min(fr) {
            simplex[3] = (xc, fc);
            continue;
        }
        // shrink toward the best vertex
        let best = simplex[0].0;
        for v in simplex.iter_mut().skip(1) {
            if used >= budget {
                break;
            }
            let x = lerp(best, v.0, 0.5);
            *v = (x, f(x));
            used += 1;
        }
    }
    simplex.into_iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap()
}

pub fn minimize_over_so3(table: &ETable, mesh: &SurfaceMesh, tau: f64, search: &So3Search) -> Result<DirectorOptimum> {
    if !(tau >= 0.0) {
        return Err(Error::invalid("tau", "must be nonnegative"));
    }
    Ok(optimize_rotation(search, |qs| {
        qs.iter()
            .map(|q| tilde_e(table, mesh, &DirectorRotation { quat: *q, tau }))
            .collect()
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmecticRegion {
    pub faces: Vec<usize>,
    pub area: f64,
    pub fraction: f64,
}

fn check_b(b: f64) -> Result<()> {
    if !(b > 1.0) || !b.is_finite() {
        return Err(Error::invalid("b", "must be greater than 1"));
    }
    Ok(())
}

/// Faces with `zeta(nu) < 1 / b`.
pub fn smectic_region(mesh: &SurfaceMesh, r: &DirectorRotation, b: f64, zeta: &ZetaTable) -> Result<SmecticRegion> {
    check_b(b)?;
    let threshold = 1.0 / b;
    let faces: Vec<usize> = face_angles(mesh, r)
        .iter()
        .enumerate()
        .filter(|(_, nu)| zeta.eval(**nu) < threshold)
        .map(|(f, _)| f)
        .collect();
    let area: f64 = faces.iter().map(|f| mesh.face_areas[*f]).sum();
    Ok(SmecticRegion {
        fraction: area / mesh.area(),
        faces,
        area,
    })
}

/// `-2 sqrt(b) E(1/b, nu)` per face, from a table built at `b_frak = 1/b`.
pub fn concentration_density(mesh: &SurfaceMesh, r: &DirectorRotation, b: f64, table: &ETable) -> Result<Vec<f64>> {
    check_b(b)?;
    check_table(table, b)?;
    let s = b.sqrt();
    Ok(face_angles(mesh, r).iter().map(|nu| (-2.0 * s * table.eval(*nu)).max(0.0)).collect())
}

fn check_table(table: &ETable, b: f64) -> Result<()> {
    if (table.b_frak - 1.0 / b).abs() > 1e-9 {
        return Err(Error::invalid(
            "table",
            alloc::format!("table is for b_frak = {}, expected 1/b = {}", table.b_frak, 1.0 / b),
        ));
    }
    Ok(())
}

/// Leading-order ground-state energy `sqrt(b) kappa e0`.
pub fn ground_state_prediction(kappa: f64, b: f64, e0: f64) -> Result<f64> {
    check_b(b)?;
    if !(kappa > 0.0) {
        return Err(Error::invalid("kappa", "must be positive"));
    }
    Ok(b.sqrt() * kappa * e0)
}

/// Local version `sqrt(b) kappa sum_{f in faces} E(1/b, nu_f) area_f`.
pub fn local_ground_state_prediction(
    kappa: f64,
    b: f64,
    table: &ETable,
    mesh: &SurfaceMesh,
    r: &DirectorRotation,
    faces: &[usize],
) -> Result<f64> {
    check_b(b)?;
    check_table(table, b)?;
    if !(kappa > 0.0) {
        return Err(Error::invalid("kappa", "must be positive"));
    }
    let angles = face_angles(mesh, r);
    let mut s = 0.0;
    for &f in faces {
        if f >= mesh.face_count() {
            return Err(Error::invalid("faces", "face index out of range"));
        }
        s += table.eval(angles[f]) * mesh.face_areas[f];
    }
    Ok(b.sqrt() * kappa * s)
}
