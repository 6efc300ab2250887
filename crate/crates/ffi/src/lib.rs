//! C ABI over `topex`.
//!
//! Every object crosses the boundary as an opaque handle created by a
//! `tpx_*_new`/`tpx_*_generate`/`tpx_*_run` call and released by the matching
//! `tpx_*_free`. Every fallible call returns a [`TpxStatus`]; on failure the
//! message is kept per thread and read with [`tpx_last_error`]. Panics never
//! unwind across the boundary; they surface as `TPX_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use topex::config::{ConfigError, Scenario};
use topex::geometry::{build_hull, Vec3};
use topex::mission::{compute_metrics, run_mission_in, MissionError, MissionLog, MissionStatus};
use topex::world::{generate_world, read_world_file, write_world_file, GroundTruthWorld, WorldError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TpxStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    Io = 4,
    Geometry = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Terminal state of a mission.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TpxMissionStatus {
    Complete = 0,
    Budget = 1,
    Stuck = 2,
    Blocked = 3,
    Exhausted = 4,
}

impl From<MissionStatus> for TpxMissionStatus {
    fn from(s: MissionStatus) -> Self {
        match s {
            MissionStatus::Complete => Self::Complete,
            MissionStatus::Budget => Self::Budget,
            MissionStatus::Stuck => Self::Stuck,
            MissionStatus::Blocked => Self::Blocked,
            MissionStatus::Exhausted => Self::Exhausted,
        }
    }
}

/// Scalar results of a finished mission.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TpxSummary {
    pub status: TpxMissionStatus,
    pub ticks: u64,
    pub sim_time: f64,
    pub final_volume: f64,
    pub median_rate: f64,
    pub trajectory_length: f64,
    pub completion_fraction: f64,
}

/// Scenario under construction.
pub struct TpxConfig(Scenario);

pub struct TpxWorld(GroundTruthWorld);

pub struct TpxMission {
    log: MissionLog,
    summary: TpxSummary,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(status: TpxStatus, msg: impl Into<String>) -> TpxStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
    status
}

fn config_status(e: ConfigError) -> TpxStatus {
    match e {
        ConfigError::Io { .. } => fail(TpxStatus::Io, e.to_string()),
        ConfigError::Invalid(MissionError::World(w)) => world_status(w),
        _ => fail(TpxStatus::InvalidConfig, e.to_string()),
    }
}

fn world_status(e: WorldError) -> TpxStatus {
    match e {
        WorldError::Io(_) => fail(TpxStatus::Io, e.to_string()),
        _ => fail(TpxStatus::InvalidConfig, e.to_string()),
    }
}

fn mission_status(e: MissionError) -> TpxStatus {
    match e {
        MissionError::World(w) => world_status(w),
        MissionError::Config { .. } => fail(TpxStatus::InvalidConfig, e.to_string()),
    }
}

/// Runs `f`, converting a panic into `TPX_STATUS_PANIC`.
fn guard(f: impl FnOnce() -> TpxStatus) -> TpxStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(TpxStatus::Panic, msg)
        }
    }
}

/// # Safety
/// `s` must be null or a NUL-terminated string valid for reads.
unsafe fn str_arg<'a>(s: *const c_char) -> Result<&'a str, TpxStatus> {
    if s.is_null() {
        return Err(fail(TpxStatus::NullArgument, "null string argument"));
    }
    CStr::from_ptr(s).to_str().map_err(|e| fail(TpxStatus::InvalidUtf8, e.to_string()))
}

/// Copies `text` plus a NUL into `buf`. `needed` receives the full size
/// including the NUL, so a null `buf` with `cap` 0 queries the size.
/// `TPX_STATUS_BUFFER_TOO_SMALL` leaves the last error untouched.
///
/// # Safety
/// `buf` must be null or valid for `cap` bytes; `needed` null or writable.
unsafe fn copy_out(text: &str, buf: *mut c_char, cap: usize, needed: *mut usize) -> TpxStatus {
    let n = text.len() + 1;
    if !needed.is_null() {
        *needed = n;
    }
    if buf.is_null() || cap < n {
        return TpxStatus::BufferTooSmall;
    }
    ptr::copy_nonoverlapping(text.as_ptr(), buf.cast::<u8>(), text.len());
    *buf.add(text.len()) = 0;
    TpxStatus::Ok
}

/// Copies the calling thread's last error message.
///
/// # Safety
/// As for any copy-out call: `buf` null or valid for `cap` bytes, `needed`
/// null or writable.
#[no_mangle]
pub unsafe extern "C" fn tpx_last_error(buf: *mut c_char, cap: usize, needed: *mut usize) -> TpxStatus {
    let msg = LAST_ERROR.with(|e| e.borrow().clone());
    copy_out(&msg, buf, cap, needed)
}

/// New scenario with every key at its default.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tpx_config_new(out: *mut *mut TpxConfig) -> TpxStatus {
    if out.is_null() {
        return fail(TpxStatus::NullArgument, "out is null");
    }
    *out = Box::into_raw(Box::new(TpxConfig(Scenario::default())));
    TpxStatus::Ok
}

/// Scenario parsed from TOML text.
///
/// # Safety
/// `toml` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tpx_config_from_toml(toml: *const c_char, out: *mut *mut TpxConfig) -> TpxStatus {
    guard(|| {
        if out.is_null() {
            return fail(TpxStatus::NullArgument, "out is null");
        }
        let text = match str_arg(toml) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match Scenario::parse(text, "<string>") {
            Ok(s) => {
                *out = Box::into_raw(Box::new(TpxConfig(s)));
                TpxStatus::Ok
            }
            Err(e) => config_status(e),
        }
    })
}

/// Sets `section.key` to `value`, read as a TOML literal or a bare string.
///
/// # Safety
/// `cfg` a live handle; `key` and `value` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn tpx_config_set(cfg: *mut TpxConfig, key: *const c_char, value: *const c_char) -> TpxStatus {
    guard(|| {
        let Some(cfg) = cfg.as_mut() else { return fail(TpxStatus::NullArgument, "cfg is null") };
        let (k, v) = match (str_arg(key), str_arg(value)) {
            (Ok(k), Ok(v)) => (k, v),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        let mut next = cfg.0.clone();
        match next.apply_overrides(&[(k.to_string(), v.to_string())]) {
            Ok(()) => {
                cfg.0 = next;
                TpxStatus::Ok
            }
            Err(e) => config_status(e),
        }
    })
}

/// Copies the resolved scenario as TOML.
///
/// # Safety
/// `cfg` a live handle; buffer rules as for [`tpx_last_error`].
#[no_mangle]
pub unsafe extern "C" fn tpx_config_to_toml(
    cfg: *const TpxConfig,
    buf: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> TpxStatus {
    guard(|| {
        let Some(cfg) = cfg.as_ref() else { return fail(TpxStatus::NullArgument, "cfg is null") };
        match cfg.0.to_mission_config() {
            Ok(c) => copy_out(&Scenario::effective(&c).to_toml(), buf, cap, needed),
            Err(e) => config_status(e),
        }
    })
}

/// # Safety
/// `cfg` null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tpx_config_free(cfg: *mut TpxConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Generates the world described by the scenario's `[world]` table.
///
/// # Safety
/// `cfg` a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tpx_world_generate(cfg: *const TpxConfig, out: *mut *mut TpxWorld) -> TpxStatus {
    guard(|| {
        let (Some(cfg), false) = (cfg.as_ref(), out.is_null()) else {
            return fail(TpxStatus::NullArgument, "null argument");
        };
        let mc = match cfg.0.to_mission_config() {
            Ok(c) => c,
            Err(e) => return config_status(e),
        };
        match generate_world(&mc.world) {
            Ok(w) => {
                *out = Box::into_raw(Box::new(TpxWorld(w)));
                TpxStatus::Ok
            }
            Err(e) => world_status(e),
        }
    })
}

/// # Safety
/// `path` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tpx_world_load(path: *const c_char, out: *mut *mut TpxWorld) -> TpxStatus {
    guard(|| {
        if out.is_null() {
            return fail(TpxStatus::NullArgument, "out is null");
        }
        let p = match str_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match read_world_file(Path::new(p)) {
            Ok(w) => {
                *out = Box::into_raw(Box::new(TpxWorld(w)));
                TpxStatus::Ok
            }
            Err(e) => world_status(e),
        }
    })
}

/// # Safety
/// `world` a live handle; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn tpx_world_save(world: *const TpxWorld, path: *const c_char) -> TpxStatus {
    guard(|| {
        let Some(w) = world.as_ref() else { return fail(TpxStatus::NullArgument, "world is null") };
        let p = match str_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match write_world_file(&w.0, Path::new(p)) {
            Ok(()) => TpxStatus::Ok,
            Err(e) => world_status(e),
        }
    })
}

/// Voxel counts per axis and the free-voxel total.
///
/// # Safety
/// `world` a live handle; `dims` valid for 3 writes; `free` writable.
#[no_mangle]
pub unsafe extern "C" fn tpx_world_info(world: *const TpxWorld, dims: *mut usize, free: *mut usize) -> TpxStatus {
    let (Some(w), false, false) = (world.as_ref(), dims.is_null(), free.is_null()) else {
        return fail(TpxStatus::NullArgument, "null argument");
    };
    let d = w.0.lattice().dims;
    for (k, v) in d.iter().enumerate() {
        *dims.add(k) = *v;
    }
    *free = w.0.count_free();
    TpxStatus::Ok
}

/// # Safety
/// `world` null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tpx_world_free(world: *mut TpxWorld) {
    if !world.is_null() {
        drop(Box::from_raw(world));
    }
}

/// Runs a mission to completion in `world` with the scenario's parameters.
///
/// # Safety
/// `world` and `cfg` live handles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tpx_mission_run(
    world: *const TpxWorld,
    cfg: *const TpxConfig,
    out: *mut *mut TpxMission,
) -> TpxStatus {
    guard(|| {
        let (Some(w), Some(cfg), false) = (world.as_ref(), cfg.as_ref(), out.is_null()) else {
            return fail(TpxStatus::NullArgument, "null argument");
        };
        let mc = match cfg.0.to_mission_config() {
            Ok(c) => c,
            Err(e) => return config_status(e),
        };
        let outcome = match run_mission_in(&w.0, &mc) {
            Ok(o) => o,
            Err(e) => return mission_status(e),
        };
        let m = compute_metrics(&outcome.log, mc.metrics_window);
        let summary = TpxSummary {
            status: outcome.log.status.into(),
            ticks: outcome.log.ticks.len() as u64,
            sim_time: m.sim_time,
            final_volume: m.final_volume,
            median_rate: m.median_rate,
            trajectory_length: m.trajectory_length,
            completion_fraction: m.completion_fraction,
        };
        *out = Box::into_raw(Box::new(TpxMission { log: outcome.log, summary }));
        TpxStatus::Ok
    })
}

/// # Safety
/// `mission` a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tpx_mission_summary(mission: *const TpxMission, out: *mut TpxSummary) -> TpxStatus {
    let (Some(m), false) = (mission.as_ref(), out.is_null()) else {
        return fail(TpxStatus::NullArgument, "null argument");
    };
    *out = m.summary;
    TpxStatus::Ok
}

/// Copies the per-tick CSV log.
///
/// # Safety
/// `mission` a live handle; buffer rules as for [`tpx_last_error`].
#[no_mangle]
pub unsafe extern "C" fn tpx_mission_ticks_csv(
    mission: *const TpxMission,
    buf: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> TpxStatus {
    let Some(m) = mission.as_ref() else { return fail(TpxStatus::NullArgument, "mission is null") };
    copy_out(&m.log.ticks_csv(), buf, cap, needed)
}

/// # Safety
/// `mission` null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tpx_mission_free(mission: *mut TpxMission) {
    if !mission.is_null() {
        drop(Box::from_raw(mission));
    }
}

/// Convex hull volume and centroid of `n` points stored as xyz triples.
///
/// # Safety
/// `xyz` valid for `3 * n` reads; `volume` writable; `centroid` valid for 3
/// writes.
#[no_mangle]
pub unsafe extern "C" fn tpx_hull_volume(xyz: *const f64, n: usize, volume: *mut f64, centroid: *mut f64) -> TpxStatus {
    guard(|| {
        if xyz.is_null() || volume.is_null() || centroid.is_null() {
            return fail(TpxStatus::NullArgument, "null argument");
        }
        let raw = std::slice::from_raw_parts(xyz, 3 * n);
        let pts: Vec<Vec3> = raw.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect();
        match build_hull(&pts) {
            Ok(h) => {
                let (c, v) = h.centroid_and_volume();
                *volume = v;
                for (k, x) in c.to_array().into_iter().enumerate() {
                    *centroid.add(k) = x;
                }
                TpxStatus::Ok
            }
            Err(e) => fail(TpxStatus::Geometry, e.to_string()),
        }
    })
}
