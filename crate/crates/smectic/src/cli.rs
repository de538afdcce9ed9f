//! Command-line interface. Every subcommand computes first and publishes its
//! artifacts with an atomic rename at the end, so a failed run leaves no
//! partial output.

use std::f64::consts::FRAC_PI_2;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use smectic_core::director::{concentration_density, face_angles, ground_state_prediction, ETable, So3Search};
use smectic_core::geom::{DirectorRotation, Quat};
use smectic_core::halfplane::{chebyshev_nodes, HalfPlaneGrid, Refinement, ZetaOptions};
use smectic_core::halfspace::EllPolicy;
use smectic_core::ldg::{run_to_convergence, LdGState};

use crate::cache::Cache;
use crate::compute::{self, Ctx};
use crate::config::LdGConfig;
use crate::fields::FieldFile;
use crate::meshio::load_mesh;
use crate::tables::{self, ERecord, ZetaRow};
use crate::write_atomic;

pub const DEFAULT_CACHE_DIR: &str = ".smectic-cache";

#[derive(Debug, Parser)]
#[command(name = "smectic", version, about = "Surface-smectic tables, director optimization and LdG flows")]
pub struct Cli {
    /// Result cache directory.
    #[arg(long, env = "SMECTIC_CACHE_DIR", global = true)]
    pub cache_dir: Option<PathBuf>,
    /// Neither read nor write the cache.
    #[arg(long, global = true)]
    pub no_cache: bool,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Csv, global = true)]
    pub format: Format,
    /// Structured JSON log lines on stderr.
    #[arg(long, global = true)]
    pub json_logs: bool,
    /// Seed for every randomized step (overrides a config file seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate zeta(nu) on Chebyshev nodes of [0, pi/2].
    ZetaTable(ZetaTableArgs),
    /// Tabulate the surface energy density E(b_frak, nu).
    ETable(ETableArgs),
    /// Face count, area, volume and Euler characteristic of a mesh.
    MeshInfo(MeshInfoArgs),
    /// Minimize the boundary functional over rotated helical directors.
    OptimizeDirector(OptimizeArgs),
    /// Per-face contact angle, zeta, smectic-region membership and density.
    SmecticMap(SmecticMapArgs),
    /// Leading-order ground-state energy sqrt(b) kappa e0.
    Predict(PredictArgs),
    /// Coupled Landau-de Gennes descent flow from a TOML config.
    LdgFlow(LdgFlowArgs),
}

#[derive(Debug, Args)]
pub struct ZetaArgs {
    /// Eigen-residual and truncation tolerance.
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    /// Half-plane grid spacing.
    #[arg(long, default_value_t = 0.1)]
    pub zeta_h: f64,
    /// Half-plane box half-width.
    #[arg(long, default_value_t = 12.0)]
    pub zeta_r: f64,
    /// Richardson extrapolation over (h, h/2).
    #[arg(long)]
    pub richardson: bool,
}

impl ZetaArgs {
    pub fn options(&self) -> anyhow::Result<ZetaOptions> {
        if !(self.zeta_h > 0.0) || !(self.zeta_r > 2.0 * self.zeta_h) {
            bail!("`--zeta-h` and `--zeta-r` must be positive with r > 2h");
        }
        if !(self.tol > 0.0) {
            bail!("`--tol` must be positive");
        }
        let n = (self.zeta_r / self.zeta_h).round() as usize;
        Ok(ZetaOptions {
            grid: HalfPlaneGrid {
                domain_r1: self.zeta_r,
                domain_r2: self.zeta_r,
                n1: n,
                n2: 2 * n,
            },
            tol: self.tol,
            refine: if self.richardson {
                Refinement::Richardson
            } else {
                Refinement::None
            },
            ..ZetaOptions::default()
        })
    }
}

#[derive(Debug, Args)]
pub struct ZetaTableArgs {
    /// Nodes of the zeta table.
    #[arg(long, default_value_t = 33)]
    pub nu_count: usize,
    #[command(flatten)]
    pub zeta: ZetaArgs,
    /// Explicit angles instead of Chebyshev nodes (radians; `deg` suffix for degrees).
    #[arg(long, value_delimiter = ',', value_parser = parse_angle)]
    pub nu: Option<Vec<f64>>,
    /// Also estimate the truncation error by domain doubling.
    #[arg(long)]
    pub check_truncation: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EArgs {
    /// Box half-widths for the large-box sequence.
    #[arg(long, value_delimiter = ',', default_value = "6,9,12")]
    pub ell: Vec<f64>,
    /// Reduced-GL grid spacing.
    #[arg(long, default_value_t = 0.25)]
    pub gl_h: f64,
    /// Depth of the reduced-GL box.
    #[arg(long, default_value_t = 10.0)]
    pub depth: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub grad_tol: f64,
    #[arg(long, default_value_t = 20000)]
    pub max_iter: usize,
    /// Random starts per box.
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    /// Skip the tightened tolerances near zeta(nu) = b_frak.
    #[arg(long)]
    pub no_threshold_refine: bool,
}

impl EArgs {
    pub fn policy(&self, seed: u64) -> EllPolicy {
        EllPolicy {
            ells: self.ell.clone(),
            depth_r: self.depth,
            h: self.gl_h,
            grad_tol: self.grad_tol,
            max_iter: self.max_iter,
            restarts: self.restarts,
            seed,
            ..EllPolicy::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct ETableArgs {
    /// Field strengths b_frak in (0, 1].
    #[arg(long, value_delimiter = ',', required = true)]
    pub b_frak: Vec<f64>,
    #[arg(long, default_value_t = 9)]
    pub nu_count: usize,
    /// Explicit angles instead of Chebyshev nodes (radians; `deg` suffix for degrees).
    #[arg(long, value_delimiter = ',', value_parser = parse_angle)]
    pub nu: Option<Vec<f64>>,
    #[command(flatten)]
    pub e: EArgs,
    #[command(flatten)]
    pub zeta: ZetaArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MeshInfoArgs {
    /// `.obj`/`.stl` file, `sphere[:L]` or `ellipsoid:a,b,c`.
    #[arg(long = "in")]
    pub input: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Source of the E table used by the director commands.
#[derive(Debug, Args)]
pub struct ETableSource {
    /// Precomputed e-table CSV (must contain the needed b_frak).
    #[arg(long)]
    pub e_table: Option<PathBuf>,
    /// Nodes of a computed E table.
    #[arg(long, default_value_t = 9)]
    pub e_nu_count: usize,
    #[command(flatten)]
    pub e: EArgs,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub mesh: String,
    #[arg(long)]
    pub b_frak: f64,
    /// Chirality of the helical director family.
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    /// Evaluations of the boundary functional.
    #[arg(long, default_value_t = 2000)]
    pub budget: usize,
    #[command(flatten)]
    pub source: ETableSource,
    #[command(flatten)]
    pub zeta: ZetaArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SmecticMapArgs {
    #[arg(long)]
    pub mesh: String,
    /// Reduced field b > 1.
    #[arg(long)]
    pub b: f64,
    /// Rotation quaternion `w,x,y,z` (normalized on use).
    #[arg(long, default_value = "1,0,0,0", value_parser = parse_quat, allow_hyphen_values = true)]
    pub quat: [f64; 4],
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    /// Nodes of the zeta table.
    #[arg(long, default_value_t = 33)]
    pub nu_count: usize,
    /// Leave the density column empty instead of building E(1/b, .).
    #[arg(long)]
    pub no_density: bool,
    #[command(flatten)]
    pub source: ETableSource,
    #[command(flatten)]
    pub zeta: ZetaArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub kappa: f64,
    /// Reduced field b > 1.
    #[arg(long)]
    pub b: f64,
    #[arg(long)]
    pub mesh: String,
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 2000)]
    pub budget: usize,
    /// Use cached results only; fail instead of solving.
    #[arg(long)]
    pub cached: bool,
    #[command(flatten)]
    pub source: ETableSource,
    #[command(flatten)]
    pub zeta: ZetaArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LdgFlowArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory for energy_trace.csv, diagnostics.json and fields.bin.
    #[arg(long)]
    pub out: PathBuf,
}

/// Angle in radians; a `deg` or `°` suffix means degrees, `rad` is optional.
pub fn parse_angle(s: &str) -> Result<f64, String> {
    let t = s.trim();
    let (num, scale) = if let Some(d) = t.strip_suffix("deg").or_else(|| t.strip_suffix('°')) {
        (d, std::f64::consts::PI / 180.0)
    } else {
        (t.strip_suffix("rad").unwrap_or(t), 1.0)
    };
    let v: f64 = num.trim().parse().map_err(|_| format!("bad angle `{s}`"))?;
    let v = v * scale;
    if !(0.0..=FRAC_PI_2 + 1e-12).contains(&v) {
        return Err(format!("angle `{s}` outside [0, pi/2]"));
    }
    Ok(v.min(FRAC_PI_2))
}

/// Quaternion `w,x,y,z`.
pub fn parse_quat(s: &str) -> Result<[f64; 4], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| format!("bad quaternion `{s}`"))?;
    <[f64; 4]>::try_from(v).map_err(|_| format!("quaternion `{s}` needs four components w,x,y,z"))
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> anyhow::Result<()> {
    match out {
        Some(p) => write_atomic(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            use std::io::Write;
            let mut so = std::io::stdout().lock();
            so.write_all(bytes)?;
            so.flush()?;
            Ok(())
        }
    }
}

fn json_bytes<T: Serialize>(v: &T) -> anyhow::Result<Vec<u8>> {
    let mut b = serde_json::to_vec_pretty(v)?;
    b.push(b'\n');
    Ok(b)
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(w.into_inner().map_err(|e| anyhow::anyhow!(e.to_string()))?)
}

fn rows_bytes<T: Serialize>(format: Format, rows: &[T]) -> anyhow::Result<Vec<u8>> {
    match format {
        Format::Csv => csv_bytes(rows),
        Format::Json => json_bytes(&rows),
    }
}

fn check_b_frak(b: f64) -> anyhow::Result<()> {
    if !(b > 0.0 && b <= 1.0) {
        bail!("`b_frak` must lie in (0, 1], got {b}");
    }
    Ok(())
}

fn check_b(b: f64) -> anyhow::Result<()> {
    if !(b > 1.0) || !b.is_finite() {
        bail!("`--b` must be greater than 1, got {b}");
    }
    Ok(())
}

fn check_count(name: &str, n: usize) -> anyhow::Result<()> {
    if n < 2 {
        bail!("`{name}` needs at least 2 nodes");
    }
    Ok(())
}

pub struct Runner {
    pub ctx: Ctx,
    pub format: Format,
    pub seed: Option<u64>,
}

impl Runner {
    pub fn from_cli(cli: &Cli) -> Self {
        let cache = if cli.no_cache {
            Cache::disabled()
        } else {
            Cache::new(cli.cache_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR)))
        };
        Runner {
            ctx: Ctx::new(cache),
            format: cli.format,
            seed: cli.seed,
        }
    }

    pub fn dispatch(&self, cmd: &Command) -> anyhow::Result<()> {
        match cmd {
            Command::ZetaTable(a) => self.zeta_table(a),
            Command::ETable(a) => self.e_table(a),
            Command::MeshInfo(a) => self.mesh_info(a),
            Command::OptimizeDirector(a) => self.optimize(a),
            Command::SmecticMap(a) => self.smectic_map(a),
            Command::Predict(a) => self.predict(a),
            Command::LdgFlow(a) => self.ldg_flow(a),
        }
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn zeta_table(&self, a: &ZetaTableArgs) -> anyhow::Result<()> {
        let mut opts = a.zeta.options()?;
        opts.check_truncation = a.check_truncation;
        opts.lanczos.seed = self.seed();
        let nus = match &a.nu {
            Some(v) => v.clone(),
            None => {
                check_count("--nu-count", a.nu_count)?;
                chebyshev_nodes(a.nu_count)
            }
        };
        let values = compute::zeta_points(&self.ctx, &nus, &opts)?;
        let rows: Vec<ZetaRow> = values.iter().map(ZetaRow::from).collect();
        emit(a.out.as_deref(), &rows_bytes(self.format, &rows)?)
    }

    fn zeta_for(&self, z: &ZetaArgs, nus: &[f64]) -> anyhow::Result<Vec<f64>> {
        let mut opts = z.options()?;
        opts.lanczos.seed = self.seed();
        Ok(compute::zeta_points(&self.ctx, nus, &opts)?.iter().map(|v| v.zeta).collect())
    }

    fn e_table(&self, a: &ETableArgs) -> anyhow::Result<()> {
        for &b in &a.b_frak {
            check_b_frak(b)?;
        }
        let nus = match &a.nu {
            Some(v) => v.clone(),
            None => {
                check_count("--nu-count", a.nu_count)?;
                chebyshev_nodes(a.nu_count)
            }
        };
        let zetas = if a.e.no_threshold_refine {
            None
        } else {
            Some(self.zeta_for(&a.zeta, &nus)?)
        };
        let policy = a.e.policy(self.seed());
        let pts = compute::e_points(&self.ctx, &a.b_frak, &nus, zetas.as_deref(), &policy)?;
        let recs: Vec<ERecord> = pts.iter().map(ERecord::from).collect();
        emit(a.out.as_deref(), &rows_bytes(self.format, &tables::e_rows(&recs))?)
    }

    fn mesh_info(&self, a: &MeshInfoArgs) -> anyhow::Result<()> {
        let m = load_mesh(&a.input)?;
        #[derive(Serialize)]
        struct Info {
            faces: usize,
            vertices: usize,
            area: f64,
            volume: f64,
            euler_characteristic: i64,
        }
        let info = Info {
            faces: m.face_count(),
            vertices: m.vertices.len(),
            area: m.area(),
            volume: m.volume(),
            euler_characteristic: m.euler_characteristic(),
        };
        let bytes = match self.format {
            Format::Csv => csv_bytes(&[info])?,
            Format::Json => json_bytes(&info)?,
        };
        emit(a.out.as_deref(), &bytes)
    }

    /// E table at `b_frak`, read from a CSV or built (cached) on Chebyshev nodes.
    fn load_e_table(&self, src: &ETableSource, z: &ZetaArgs, b_frak: f64) -> anyhow::Result<ETable> {
        if let Some(path) = &src.e_table {
            let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let rows = tables::read_e_csv(file).with_context(|| format!("reading {}", path.display()))?;
            let found = tables::e_tables(&rows)?;
            return found
                .into_iter()
                .find(|t| (t.b_frak - b_frak).abs() <= 1e-9)
                .with_context(|| format!("{} has no rows for b_frak = {b_frak}", path.display()));
        }
        check_count("--e-nu-count", src.e_nu_count)?;
        let nus = chebyshev_nodes(src.e_nu_count);
        let zetas = if src.e.no_threshold_refine {
            None
        } else {
            Some(self.zeta_for(z, &nus)?)
        };
        Ok(compute::e_table(&self.ctx, b_frak, &nus, zetas.as_deref(), &src.e.policy(self.seed()))?)
    }

    fn optimize(&self, a: &OptimizeArgs) -> anyhow::Result<()> {
        check_b_frak(a.b_frak)?;
        let mesh = load_mesh(&a.mesh)?;
        let table = self.load_e_table(&a.source, &a.zeta, a.b_frak)?;
        let search = So3Search::new(a.budget)?;
        let opt = compute::optimize_director(&self.ctx, &table, &mesh, a.tau, &search)?;
        let bytes = match self.format {
            Format::Json => json_bytes(&opt)?,
            Format::Csv => {
                #[derive(Serialize)]
                struct Sample {
                    w: f64,
                    x: f64,
                    y: f64,
                    z: f64,
                    value: f64,
                }
                let rows: Vec<Sample> = opt
                    .samples
                    .iter()
                    .map(|s| Sample {
                        w: s[0],
                        x: s[1],
                        y: s[2],
                        z: s[3],
                        value: s[4],
                    })
                    .collect();
                csv_bytes(&rows)?
            }
        };
        emit(a.out.as_deref(), &bytes)
    }

    fn smectic_map(&self, a: &SmecticMapArgs) -> anyhow::Result<()> {
        check_b(a.b)?;
        let mesh = load_mesh(&a.mesh)?;
        let q = Quat::from_array(a.quat);
        let r = DirectorRotation::new(q, a.tau).context("`--quat`/`--tau`")?;
        check_count("--nu-count", a.nu_count)?;
        let nus = chebyshev_nodes(a.nu_count);
        let mut opts = a.zeta.options()?;
        opts.lanczos.seed = self.seed();
        let zt = compute::zeta_table(&self.ctx, &nus, &opts)?;
        let density = if a.no_density {
            None
        } else {
            let table = self.load_e_table(&a.source, &a.zeta, 1.0 / a.b)?;
            Some(concentration_density(&mesh, &r, a.b, &table)?)
        };
        #[derive(Serialize)]
        struct FaceRow {
            face_id: usize,
            nu: f64,
            zeta: f64,
            in_region: bool,
            density: Option<f64>,
        }
        let rows: Vec<FaceRow> = face_angles(&mesh, &r)
            .into_iter()
            .enumerate()
            .map(|(f, nu)| {
                let z = zt.eval(nu);
                FaceRow {
                    face_id: f,
                    nu,
                    zeta: z,
                    in_region: z < 1.0 / a.b,
                    density: density.as_ref().map(|d| d[f]),
                }
            })
            .collect();
        emit(a.out.as_deref(), &rows_bytes(self.format, &rows)?)
    }

    fn predict(&self, a: &PredictArgs) -> anyhow::Result<()> {
        check_b(a.b)?;
        if !(a.kappa > 0.0) {
            bail!("`--kappa` must be positive");
        }
        let mesh = load_mesh(&a.mesh)?;
        let runner = Runner {
            ctx: Ctx {
                cache: self.ctx.cache.clone(),
                cache_only: a.cached,
            },
            format: self.format,
            seed: self.seed,
        };
        if a.cached && runner.ctx.cache.dir().is_none() {
            bail!("`--cached` needs the cache (drop `--no-cache`)");
        }
        let b_frak = 1.0 / a.b;
        let table = runner.load_e_table(&a.source, &a.zeta, b_frak)?;
        let search = So3Search::new(a.budget)?;
        let opt = compute::optimize_director(&runner.ctx, &table, &mesh, a.tau, &search)?;
        let energy = ground_state_prediction(a.kappa, a.b, opt.e0)?;
        #[derive(Serialize)]
        struct Prediction {
            kappa: f64,
            b: f64,
            b_frak: f64,
            e0: f64,
            energy: f64,
            degenerate_flag: bool,
            quat_w: f64,
            quat_x: f64,
            quat_y: f64,
            quat_z: f64,
        }
        let p = Prediction {
            kappa: a.kappa,
            b: a.b,
            b_frak,
            e0: opt.e0,
            energy,
            degenerate_flag: opt.degenerate_flag,
            quat_w: opt.quat_star[0],
            quat_x: opt.quat_star[1],
            quat_y: opt.quat_star[2],
            quat_z: opt.quat_star[3],
        };
        let bytes = match self.format {
            Format::Csv => csv_bytes(&[p])?,
            Format::Json => json_bytes(&p)?,
        };
        emit(a.out.as_deref(), &bytes)
    }

    fn ldg_flow(&self, a: &LdgFlowArgs) -> anyhow::Result<()> {
        let text = std::fs::read_to_string(&a.config).with_context(|| format!("reading {}", a.config.display()))?;
        let mut cfg = LdGConfig::from_toml(&text).with_context(|| format!("in {}", a.config.display()))?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        let setup = cfg.setup().with_context(|| format!("in {}", a.config.display()))?;
        tracing::info!(
            nodes = setup.grid.node_count(),
            h = setup.grid.h,
            b = setup.params.b(),
            kappa = setup.params.kappa,
            "ldg flow"
        );
        let s0 = LdGState::initial(&setup.grid, setup.director, setup.amplitude, setup.seed);
        let run = run_to_convergence(&setup.grid, s0, &setup.params, &setup.stop)?;
        let d = &run.diagnostics;
        tracing::info!(energy = d.energy.total, steps = d.steps, converged = d.converged, "done");

        let trace = csv_bytes(
            &run.trace
                .iter()
                .map(|t| TraceCsv {
                    step: t.step,
                    total: t.total,
                    g: t.g,
                    f_plus: t.f_plus,
                    l_null: t.l_null,
                })
                .collect::<Vec<_>>(),
        )?;
        let accepted_increase = run.steps.iter().any(|s| s.delta() > 0.0);
        let diagnostics = json!({
            "energy": {
                "total": d.energy.total,
                "g": d.energy.g,
                "f_plus": d.energy.f_plus,
                "l_null": d.energy.l_null,
            },
            "div_l2": d.div_l2,
            "curl_l2": d.curl_l2,
            "director_residual": d.director_residual,
            "max_psi": d.max_psi,
            "psi4": d.psi4,
            "boundary_fraction": d.boundary_fraction,
            "layer": setup.stop.layer,
            "steps": d.steps,
            "converged": d.converged,
            "stuck": d.stuck,
            "monotone": !accepted_increase,
            "h": setup.grid.h,
            "volume": setup.grid.volume(),
            "b": setup.params.b(),
            "q": setup.params.q,
            "seed": setup.seed,
            "regime": if setup.params.regime_a(1.0) { "A" } else { "desk" },
        });
        let fields = FieldFile::from_state(&setup.grid, &run.state).to_bytes();
        std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
        emit(Some(&a.out.join("energy_trace.csv")), &trace)?;
        emit(Some(&a.out.join("diagnostics.json")), &json_bytes(&diagnostics)?)?;
        emit(Some(&a.out.join("fields.bin")), &fields)?;
        Ok(())
    }
}

#[derive(Serialize)]
struct TraceCsv {
    step: usize,
    total: f64,
    g: f64,
    f_plus: f64,
    l_null: f64,
}

pub fn init_logging(json_logs: bool, verbose: u8) {
    let level = match verbose {
        0 => tracing::Level::WARN,
        1 => tracing::Level::INFO,
        _ => tracing::Level::DEBUG,
    };
    let b = tracing_subscriber::fmt().with_writer(std::io::stderr).with_max_level(level);
    let _ = if json_logs { b.json().try_init() } else { b.try_init() };
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    init_logging(cli.json_logs, cli.verbose);
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("`--threads` must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().ok();
    }
    Runner::from_cli(&cli).dispatch(&cli.command)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles() {
        assert_eq!(parse_angle("0.5").unwrap(), 0.5);
        assert_eq!(parse_angle("0.5rad").unwrap(), 0.5);
        assert!((parse_angle("45deg").unwrap() - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        assert_eq!(parse_angle("90°").unwrap(), FRAC_PI_2);
        assert!(parse_angle("91deg").is_err());
        assert!(parse_angle("-0.1").is_err());
        assert!(parse_angle("x").is_err());
    }

    #[test]
    fn parses_commands() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
        let c = Cli::try_parse_from(["smectic", "e-table", "--b-frak", "0.6,0.8", "--ell", "4,6", "--format", "json"]).unwrap();
        match c.command {
            Command::ETable(a) => {
                assert_eq!(a.b_frak, vec![0.6, 0.8]);
                assert_eq!(a.e.ell, vec![4.0, 6.0]);
            }
            _ => panic!(),
        }
        let c = Cli::try_parse_from(["smectic", "smectic-map", "--mesh", "sphere", "--b", "1.2", "--quat", "0.5,-0.5,0.5,0.5"]).unwrap();
        match c.command {
            Command::SmecticMap(a) => assert_eq!(a.quat, [0.5, -0.5, 0.5, 0.5]),
            _ => panic!(),
        }
    }
}
