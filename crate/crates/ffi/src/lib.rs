//! C ABI for the homogenization engine.
//!
//! Objects are exposed as opaque handles created by `softhom_*_new`-style
//! constructors and released with the matching `*_free`. Every fallible call
//! returns a [`SofthomStatus`]; on failure the message is available from
//! [`softhom_last_error_message`] on the same thread.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use softhom::config::ExperimentConfig;
use softhom::experiments;
use softhom::geometry::UnitCellGeometry;
use softhom::homogenize::{
    compute_correctors, homogenized_tensor, CorrectorSet, HomogenizedTensor,
};
use softhom::tensor::ElasticityTensorField;
use softhom::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SofthomStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidGeometry = 3,
    InvalidTensor = 4,
    EllipticityLost = 5,
    NotConverged = 6,
    SolverFailure = 7,
    Config = 8,
    Io = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

/// Unit-cell microstructure.
pub struct SofthomGeometry(UnitCellGeometry);
/// Periodic elasticity coefficient field.
pub struct SofthomTensorField(ElasticityTensorField);
/// The `d²` cell correctors for one `δ`.
pub struct SofthomCorrectors(CorrectorSet);
/// Constant homogenized tensor.
pub struct SofthomHomogenized(HomogenizedTensor);

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(msg: &str) {
    LAST_ERROR.with(|e| {
        let mut e = e.borrow_mut();
        e.clear();
        e.extend(msg.bytes().filter(|&b| b != 0));
    });
}

fn status_of(err: &Error) -> SofthomStatus {
    match err {
        Error::InvalidGeometry(_) | Error::DegenerateGeometry(_) => SofthomStatus::InvalidGeometry,
        Error::InvalidTensor(_) => SofthomStatus::InvalidTensor,
        Error::EllipticityLost(_) => SofthomStatus::EllipticityLost,
        Error::NotConverged { .. } => SofthomStatus::NotConverged,
        Error::Corrector { source, .. } => status_of(source),
        Error::Assembly(_) | Error::IncompatibleLoad(_) | Error::DegenerateWeight => {
            SofthomStatus::SolverFailure
        }
        Error::Config { .. } => SofthomStatus::Config,
        Error::Io(_) | Error::Csv(_) | Error::Report(_) => SofthomStatus::Io,
        _ => SofthomStatus::InvalidArgument,
    }
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), SofthomStatus>) -> SofthomStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SofthomStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside softhom");
            SofthomStatus::Panic
        }
    }
}

fn fail(err: Error) -> SofthomStatus {
    set_error(&err.to_string());
    status_of(&err)
}

fn null(what: &str) -> SofthomStatus {
    set_error(&format!("{what} is null"));
    SofthomStatus::NullPointer
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, SofthomStatus> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), SofthomStatus> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn path_arg<'a>(p: *const c_char, what: &str) -> Result<&'a Path, SofthomStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map(Path::new).map_err(|_| {
        set_error(&format!("{what} is not valid UTF-8"));
        SofthomStatus::InvalidArgument
    })
}

unsafe fn free_box<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Copies the last error message of this thread into `buf` (NUL-terminated, truncated
/// to `len`). Returns the full message length in bytes, excluding the terminator.
#[no_mangle]
pub unsafe extern "C" fn softhom_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = e.len().min(len - 1);
            std::ptr::copy_nonoverlapping(e.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        e.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn softhom_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Disk (d = 2) or ball (d = 3) inclusion of the given radius centred in the cell.
#[no_mangle]
pub unsafe extern "C" fn softhom_geometry_disk(
    dim: usize,
    radius: f64,
    out: *mut *mut SofthomGeometry,
) -> SofthomStatus {
    guard(|| {
        let g = UnitCellGeometry::disk(dim, radius).map_err(fail)?;
        write_out(out, Box::into_raw(Box::new(SofthomGeometry(g))), "out")
    })
}

/// Cell without inclusions.
#[no_mangle]
pub unsafe extern "C" fn softhom_geometry_homogeneous(
    dim: usize,
    out: *mut *mut SofthomGeometry,
) -> SofthomStatus {
    guard(|| {
        let g = UnitCellGeometry::homogeneous(dim).map_err(fail)?;
        write_out(out, Box::into_raw(Box::new(SofthomGeometry(g))), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn softhom_geometry_free(g: *mut SofthomGeometry) {
    free_box(g);
}

/// Distance between neighbouring inclusions.
#[no_mangle]
pub unsafe extern "C" fn softhom_geometry_gap(
    g: *const SofthomGeometry,
    out: *mut f64,
) -> SofthomStatus {
    guard(|| {
        let g = deref(g, "geometry")?;
        let gap = g.0.gap().map_err(fail)?;
        write_out(out, gap, "out")
    })
}

/// Matrix volume fraction by midpoint quadrature with `resolution` points per side.
#[no_mangle]
pub unsafe extern "C" fn softhom_geometry_volume_fraction(
    g: *const SofthomGeometry,
    resolution: usize,
    out: *mut f64,
) -> SofthomStatus {
    guard(|| {
        let g = deref(g, "geometry")?;
        let v = g.0.volume_fraction(resolution).map_err(fail)?;
        write_out(out, v, "out")
    })
}

/// Weight `k_δ(x/ε)` at a point with `dim` coordinates.
#[no_mangle]
pub unsafe extern "C" fn softhom_geometry_weight(
    g: *const SofthomGeometry,
    delta: f64,
    point: *const f64,
    eps: f64,
    out: *mut f64,
) -> SofthomStatus {
    guard(|| {
        let g = deref(g, "geometry")?;
        if point.is_null() {
            return Err(null("point"));
        }
        if !(0.0..=1.0).contains(&delta) || !(eps > 0.0) {
            return Err(fail(Error::InvalidArgument(format!(
                "need delta in [0, 1] and eps > 0, got delta = {delta}, eps = {eps}"
            ))));
        }
        let x = std::slice::from_raw_parts(point, g.0.dim());
        write_out(out, g.0.kappa(delta, x, eps), "out")
    })
}

/// Constant isotropic tensor with Lamé parameters `lambda`, `mu`.
#[no_mangle]
pub unsafe extern "C" fn softhom_tensor_isotropic(
    lambda: f64,
    mu: f64,
    dim: usize,
    out: *mut *mut SofthomTensorField,
) -> SofthomStatus {
    guard(|| {
        let t = ElasticityTensorField::isotropic(lambda, mu, dim).map_err(fail)?;
        write_out(out, Box::into_raw(Box::new(SofthomTensorField(t))), "out")
    })
}

/// Isotropic tensor scaled by `1 + amplitude · Π sin(2π y_i)`.
#[no_mangle]
pub unsafe extern "C" fn softhom_tensor_modulated(
    lambda: f64,
    mu: f64,
    dim: usize,
    amplitude: f64,
    out: *mut *mut SofthomTensorField,
) -> SofthomStatus {
    guard(|| {
        let t = ElasticityTensorField::modulated(lambda, mu, dim, amplitude).map_err(fail)?;
        write_out(out, Box::into_raw(Box::new(SofthomTensorField(t))), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn softhom_tensor_free(t: *mut SofthomTensorField) {
    free_box(t);
}

/// Ellipticity bounds `(κ₁, κ₂)` of the field.
#[no_mangle]
pub unsafe extern "C" fn softhom_tensor_bounds(
    t: *const SofthomTensorField,
    kappa1: *mut f64,
    kappa2: *mut f64,
) -> SofthomStatus {
    guard(|| {
        let (k1, k2) = deref(t, "tensor")?.0.bounds();
        write_out(kappa1, k1, "kappa1")?;
        write_out(kappa2, k2, "kappa2")
    })
}

/// Solves the `d²` cell problems on an `n^d` periodic grid.
#[no_mangle]
pub unsafe extern "C" fn softhom_correctors_compute(
    g: *const SofthomGeometry,
    t: *const SofthomTensorField,
    delta: f64,
    n: usize,
    tol: f64,
    out: *mut *mut SofthomCorrectors,
) -> SofthomStatus {
    guard(|| {
        let g = deref(g, "geometry")?;
        let t = deref(t, "tensor")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let set = compute_correctors(&g.0, &t.0, delta, n, tol).map_err(fail)?;
        write_out(out, Box::into_raw(Box::new(SofthomCorrectors(set))), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn softhom_correctors_free(c: *mut SofthomCorrectors) {
    free_box(c);
}

/// `max_{j,β} (‖k χ‖ + ‖k ∇χ‖)` over the correctors.
#[no_mangle]
pub unsafe extern "C" fn softhom_correctors_weighted_bound(
    c: *const SofthomCorrectors,
    out: *mut f64,
) -> SofthomStatus {
    guard(|| {
        let c = deref(c, "correctors")?;
        write_out(out, c.0.weighted_bound(), "out")
    })
}

/// Homogenized tensor from a corrector set.
#[no_mangle]
pub unsafe extern "C" fn softhom_homogenize(
    c: *const SofthomCorrectors,
    out: *mut *mut SofthomHomogenized,
) -> SofthomStatus {
    guard(|| {
        let c = deref(c, "correctors")?;
        let hat = homogenized_tensor(&c.0);
        write_out(out, Box::into_raw(Box::new(SofthomHomogenized(hat))), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn softhom_homogenized_free(h: *mut SofthomHomogenized) {
    free_box(h);
}

#[no_mangle]
pub unsafe extern "C" fn softhom_homogenized_dim(
    h: *const SofthomHomogenized,
    out: *mut usize,
) -> SofthomStatus {
    guard(|| write_out(out, deref(h, "homogenized")?.0.dim(), "out"))
}

/// Copies the `d⁴` entries, index `((i·d + j)·d + α)·d + β` for `â_{ij}^{αβ}`.
/// Returns `BufferTooSmall` when `len < d⁴`.
#[no_mangle]
pub unsafe extern "C" fn softhom_homogenized_entries(
    h: *const SofthomHomogenized,
    buf: *mut f64,
    len: usize,
) -> SofthomStatus {
    guard(|| {
        let h = deref(h, "homogenized")?;
        let d = h.0.dim();
        let need = d.pow(4);
        if buf.is_null() {
            return Err(null("buf"));
        }
        if len < need {
            set_error(&format!("buffer holds {len} values, need {need}"));
            return Err(SofthomStatus::BufferTooSmall);
        }
        let out = std::slice::from_raw_parts_mut(buf, need);
        let t = h.0.tensor();
        for i in 0..d {
            for j in 0..d {
                for a in 0..d {
                    for b in 0..d {
                        out[((i * d + j) * d + a) * d + b] = t.get(i, j, a, b);
                    }
                }
            }
        }
        Ok(())
    })
}

/// Ellipticity bounds `(κ̃₁, κ̃₂)` on symmetric matrices.
#[no_mangle]
pub unsafe extern "C" fn softhom_homogenized_bounds(
    h: *const SofthomHomogenized,
    kappa1: *mut f64,
    kappa2: *mut f64,
) -> SofthomStatus {
    guard(|| {
        let (k1, k2) = deref(h, "homogenized")?.0.bounds();
        write_out(kappa1, k1, "kappa1")?;
        write_out(kappa2, k2, "kappa2")
    })
}

/// Runs one experiment (`cell`, `delta-sweep`, `rate-sweep` or `regularity`).
/// `config_path` may be null for the defaults; `out_dir` may be null for `[output] dir`.
/// `passed` receives 1 when every check passed, else 0.
#[no_mangle]
pub unsafe extern "C" fn softhom_run_experiment(
    name: *const c_char,
    config_path: *const c_char,
    out_dir: *const c_char,
    passed: *mut i32,
) -> SofthomStatus {
    guard(|| {
        if name.is_null() {
            return Err(null("name"));
        }
        let name = CStr::from_ptr(name).to_str().unwrap_or("");
        let cfg = if config_path.is_null() {
            ExperimentConfig::default()
        } else {
            ExperimentConfig::from_path(path_arg(config_path, "config_path")?).map_err(fail)?
        };
        let out = if out_dir.is_null() {
            cfg.output.dir.clone()
        } else {
            path_arg(out_dir, "out_dir")?.to_path_buf()
        };
        let outcome = match name {
            "cell" => experiments::run_cell(&cfg, &out),
            "delta-sweep" => experiments::run_delta_sweep(&cfg, &out),
            "rate-sweep" => experiments::run_rate_sweep(&cfg, &out),
            "regularity" => experiments::run_regularity(&cfg, &out),
            other => Err(Error::InvalidArgument(format!(
                "unknown experiment `{other}`"
            ))),
        }
        .map_err(fail)?;
        write_out(passed, i32::from(outcome.passed()), "passed")
    })
}
