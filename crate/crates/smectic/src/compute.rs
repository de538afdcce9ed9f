//! Cached, parallel builders for the zeta and E tables and the SO(3) search.
//!
//! Cache granularity is one parameter point, so tables of different sizes
//! share their common nodes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use smectic_core::director::{optimize_rotation, tilde_e, DirectorOptimum, ETable, So3Search};
use smectic_core::geom::{DirectorRotation, Quat};
use smectic_core::halfplane::{zeta_with, ZetaOptions, ZetaTable, ZetaValue};
use smectic_core::halfspace::{surface_energy_e, surface_energy_e_near, EllPolicy, SurfaceEnergy};
use smectic_core::mesh::SurfaceMesh;

use crate::cache::{Cache, Lookup};
use crate::error::{Error, Result};
use crate::tables::{ERecord, ZetaRecord};

#[derive(Debug, Clone)]
pub struct Ctx {
    pub cache: Cache,
    /// Fail on a cache miss instead of computing.
    pub cache_only: bool,
}

impl Ctx {
    pub fn new(cache: Cache) -> Self {
        Ctx {
            cache,
            cache_only: false,
        }
    }

    fn cached<T, D, F>(&self, kind: &str, desc: &D, tol: serde_json::Value, f: F) -> Result<T>
    where
        T: Serialize + serde::de::DeserializeOwned,
        D: Serialize,
        F: FnOnce() -> Result<T>,
    {
        if self.cache_only {
            return match self.cache.get(kind, desc)? {
                (Some(v), _) => Ok(v),
                _ => Err(Error::Cache(format!(
                    "no cached `{kind}` entry for {}",
                    crate::cache::canonical(desc)?
                ))),
            };
        }
        let (v, lookup) = self.cache.get_or_compute(kind, desc, tol, f)?;
        if lookup == Lookup::Hit {
            tracing::debug!(kind, "cache hit");
        }
        Ok(v)
    }
}

pub fn zeta_point(ctx: &Ctx, nu: f64, opts: &ZetaOptions) -> Result<ZetaValue> {
    let desc = json!({ "nu": nu, "options": format!("{opts:?}") });
    let rec: ZetaRecord = ctx.cached("zeta", &desc, json!({ "tol": opts.tol }), || {
        let t = std::time::Instant::now();
        let v = zeta_with(nu, opts)?;
        tracing::info!(nu, zeta = v.zeta, secs = t.elapsed().as_secs_f64(), "zeta");
        Ok(ZetaRecord::from(&v))
    })?;
    Ok(ZetaValue::from(&rec))
}

pub fn zeta_points(ctx: &Ctx, nus: &[f64], opts: &ZetaOptions) -> Result<Vec<ZetaValue>> {
    nus.par_iter().map(|&nu| zeta_point(ctx, nu, opts)).collect()
}

pub fn zeta_table(ctx: &Ctx, nus: &[f64], opts: &ZetaOptions) -> Result<ZetaTable> {
    Ok(ZetaTable::from_entries(zeta_points(ctx, nus, opts)?)?)
}

/// `zeta_nu` selects the near-threshold tightening of
/// [`surface_energy_e_near`]; `None` uses the plain policy.
pub fn e_point(ctx: &Ctx, b_frak: f64, nu: f64, zeta_nu: Option<f64>, policy: &EllPolicy) -> Result<SurfaceEnergy> {
    let desc = json!({
        "b_frak": b_frak,
        "nu": nu,
        "zeta_nu": zeta_nu,
        "policy": format!("{policy:?}"),
    });
    let tol = json!({ "grad_tol": policy.grad_tol, "energy_tol": policy.energy_tol });
    let rec: ERecord = ctx.cached("e", &desc, tol, || {
        let t = std::time::Instant::now();
        let e = match zeta_nu {
            Some(z) => surface_energy_e_near(b_frak, nu, z, policy)?,
            None => surface_energy_e(b_frak, nu, policy)?,
        };
        tracing::info!(
            b_frak,
            nu,
            estimate = e.estimate,
            err_bar = e.err_bar,
            secs = t.elapsed().as_secs_f64(),
            "surface energy"
        );
        Ok(ERecord::from(&e))
    })?;
    Ok(SurfaceEnergy::from(&rec))
}

/// All `(b_frak, nu)` points, row-major in `b_frak`. With `zetas` (one per
/// `nu`) the near-threshold policy is used.
pub fn e_points(
    ctx: &Ctx,
    b_fraks: &[f64],
    nus: &[f64],
    zetas: Option<&[f64]>,
    policy: &EllPolicy,
) -> Result<Vec<SurfaceEnergy>> {
    let pts: Vec<(f64, usize)> = b_fraks
        .iter()
        .flat_map(|&b| (0..nus.len()).map(move |i| (b, i)))
        .collect();
    pts.par_iter()
        .map(|&(b, i)| e_point(ctx, b, nus[i], zetas.map(|z| z[i]), policy))
        .collect()
}

pub fn e_table(
    ctx: &Ctx,
    b_frak: f64,
    nus: &[f64],
    zetas: Option<&[f64]>,
    policy: &EllPolicy,
) -> Result<ETable> {
    let rows = e_points(ctx, &[b_frak], nus, zetas, policy)?;
    Ok(ETable::from_surface_energies(b_frak, &rows)?)
}

pub fn mesh_fingerprint(mesh: &SurfaceMesh) -> String {
    let mut h = Sha256::new();
    for v in &mesh.vertices {
        for x in v.0 {
            h.update(x.to_le_bytes());
        }
    }
    for t in &mesh.triangles {
        for i in t {
            h.update((*i as u64).to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimumRecord {
    pub quat_star: [f64; 4],
    pub e0: f64,
    pub degenerate_flag: bool,
    pub evaluations: usize,
    /// `[w, x, y, z, value]` per evaluated rotation.
    pub samples: Vec<[f64; 5]>,
}

impl From<&DirectorOptimum> for OptimumRecord {
    fn from(o: &DirectorOptimum) -> Self {
        OptimumRecord {
            quat_star: o.quat_star.to_array(),
            e0: o.e0_value,
            degenerate_flag: o.degenerate_flag,
            evaluations: o.evaluations,
            samples: o
                .landscape_samples
                .iter()
                .map(|(q, v)| {
                    let a = q.to_array();
                    [a[0], a[1], a[2], a[3], *v]
                })
                .collect(),
        }
    }
}

/// `tilde_e` evaluated in parallel over each batch of rotations.
pub fn optimize_director(
    ctx: &Ctx,
    table: &ETable,
    mesh: &SurfaceMesh,
    tau: f64,
    search: &So3Search,
) -> Result<OptimumRecord> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::Core(smectic_core::Error::InvalidParameter {
            name: "tau",
            reason: "must be nonnegative".into(),
        }));
    }
    let desc = json!({
        "mesh": mesh_fingerprint(mesh),
        "b_frak": table.b_frak,
        "nu": table.nu_nodes,
        "e": table.e_values,
        "tau": tau,
        "search": format!("{search:?}"),
    });
    ctx.cached("director", &desc, json!({ "flat_tol": search.flat_tol }), || {
        let opt = optimize_rotation(search, |qs: &[Quat]| {
            qs.par_iter()
                .map(|q| tilde_e(table, mesh, &DirectorRotation { quat: *q, tau }))
                .collect()
        });
        tracing::info!(e0 = opt.e0_value, evaluations = opt.evaluations, "director optimum");
        Ok(OptimumRecord::from(&opt))
    })
}
