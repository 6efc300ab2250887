use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use topex_ffi::*;

fn last_error() -> String {
    let mut needed = 0usize;
    unsafe { tpx_last_error(ptr::null_mut(), 0, &mut needed) };
    let mut buf = vec![0 as c_char; needed];
    assert_eq!(unsafe { tpx_last_error(buf.as_mut_ptr(), buf.len(), &mut needed) }, TpxStatus::Ok);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn set(cfg: *mut TpxConfig, k: &str, v: &str) -> TpxStatus {
    let (k, v) = (CString::new(k).unwrap(), CString::new(v).unwrap());
    unsafe { tpx_config_set(cfg, k.as_ptr(), v.as_ptr()) }
}

fn small_config() -> *mut TpxConfig {
    let toml = CString::new("[world]\nkind = \"empty-box\"\nsize = [8.0, 8.0, 4.0]\n").unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { tpx_config_from_toml(toml.as_ptr(), &mut cfg) }, TpxStatus::Ok);
    cfg
}

#[test]
fn mission_round_trip() {
    let cfg = small_config();
    assert_eq!(set(cfg, "mission.time_budget", "120"), TpxStatus::Ok);
    let mut world = ptr::null_mut();
    assert_eq!(unsafe { tpx_world_generate(cfg, &mut world) }, TpxStatus::Ok);
    let (mut dims, mut free) = ([0usize; 3], 0usize);
    assert_eq!(unsafe { tpx_world_info(world, dims.as_mut_ptr(), &mut free) }, TpxStatus::Ok);
    assert_eq!(dims, [32, 32, 16]);
    assert_eq!(free, 30 * 30 * 14);

    let mut mission = ptr::null_mut();
    assert_eq!(unsafe { tpx_mission_run(world, cfg, &mut mission) }, TpxStatus::Ok);
    let mut s = TpxSummary {
        status: TpxMissionStatus::Stuck,
        ticks: 0,
        sim_time: 0.0,
        final_volume: 0.0,
        median_rate: 0.0,
        trajectory_length: 0.0,
        completion_fraction: 0.0,
    };
    assert_eq!(unsafe { tpx_mission_summary(mission, &mut s) }, TpxStatus::Ok);
    assert_eq!(s.status, TpxMissionStatus::Complete);
    assert!(s.completion_fraction > 0.95, "{s:?}");

    let mut needed = 0usize;
    let st = unsafe { tpx_mission_ticks_csv(mission, ptr::null_mut(), 0, &mut needed) };
    assert_eq!(st, TpxStatus::BufferTooSmall);
    let mut buf = vec![0 as c_char; needed];
    assert_eq!(unsafe { tpx_mission_ticks_csv(mission, buf.as_mut_ptr(), needed, &mut needed) }, TpxStatus::Ok);
    let csv = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_string();
    assert!(csv.starts_with("tick,t,"));
    assert_eq!(csv.lines().count() as u64, s.ticks + 1);

    unsafe {
        tpx_mission_free(mission);
        tpx_world_free(world);
        tpx_config_free(cfg);
    }
}

#[test]
fn errors_are_reported() {
    let cfg = small_config();
    assert_eq!(set(cfg, "mission.nope", "1"), TpxStatus::InvalidConfig);
    let e = last_error();
    assert!(e.contains("nope"), "{e}");
    assert_eq!(set(cfg, "mission.tick_dt", "-1"), TpxStatus::Ok);
    let mut world = ptr::null_mut();
    assert_eq!(unsafe { tpx_world_generate(cfg, &mut world) }, TpxStatus::InvalidConfig);
    assert!(last_error().contains("mission.tick_dt"));
    assert!(world.is_null());

    let bad = CString::new("[world\n").unwrap();
    let mut other = ptr::null_mut();
    assert_eq!(unsafe { tpx_config_from_toml(bad.as_ptr(), &mut other) }, TpxStatus::InvalidConfig);
    assert!(last_error().contains("line 1"));
    assert_eq!(unsafe { tpx_config_new(ptr::null_mut()) }, TpxStatus::NullArgument);
    unsafe {
        tpx_config_free(cfg);
        tpx_config_free(ptr::null_mut());
    }
}

#[test]
fn hull_volume_of_cube() {
    let mut xyz = Vec::new();
    for k in 0..8 {
        xyz.extend([(k & 1) as f64, ((k >> 1) & 1) as f64, (k >> 2) as f64]);
    }
    let (mut v, mut c) = (0.0, [0.0; 3]);
    assert_eq!(unsafe { tpx_hull_volume(xyz.as_ptr(), 8, &mut v, c.as_mut_ptr()) }, TpxStatus::Ok);
    assert!((v - 1.0).abs() < 1e-12);
    assert!(c.iter().all(|x| (x - 0.5).abs() < 1e-12));
    assert_eq!(unsafe { tpx_hull_volume(xyz.as_ptr(), 3, &mut v, c.as_mut_ptr()) }, TpxStatus::Geometry);
}

#[test]
fn world_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("w.grid").to_str().unwrap()).unwrap();
    let cfg = small_config();
    let mut a = ptr::null_mut();
    let mut b = ptr::null_mut();
    unsafe {
        assert_eq!(tpx_world_generate(cfg, &mut a), TpxStatus::Ok);
        assert_eq!(tpx_world_save(a, path.as_ptr()), TpxStatus::Ok);
        assert_eq!(tpx_world_load(path.as_ptr(), &mut b), TpxStatus::Ok);
        let (mut da, mut db, mut fa, mut fb) = ([0usize; 3], [0usize; 3], 0, 0);
        tpx_world_info(a, da.as_mut_ptr(), &mut fa);
        tpx_world_info(b, db.as_mut_ptr(), &mut fb);
        assert_eq!((da, fa), (db, fb));
        let missing = CString::new(dir.path().join("none.grid").to_str().unwrap()).unwrap();
        let mut c = ptr::null_mut();
        assert_eq!(tpx_world_load(missing.as_ptr(), &mut c), TpxStatus::Io);
        tpx_world_free(a);
        tpx_world_free(b);
        tpx_config_free(cfg);
    }
}

/// The generated header compiles as C and declares the whole surface.
#[test]
fn header_is_valid_c() {
    let header = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/topex.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in [
        "tpx_last_error",
        "tpx_config_new",
        "tpx_config_from_toml",
        "tpx_config_set",
        "tpx_config_to_toml",
        "tpx_config_free",
        "tpx_world_generate",
        "tpx_world_load",
        "tpx_world_save",
        "tpx_world_info",
        "tpx_world_free",
        "tpx_mission_run",
        "tpx_mission_summary",
        "tpx_mission_ticks_csv",
        "tpx_mission_free",
        "tpx_hull_volume",
    ] {
        assert!(text.contains(&format!("{f}(")), "{f} missing from header");
    }
    let Ok(out) =
        Command::new("cc").arg("-fsyntax-only").arg("-Wall").arg("-Werror").arg("-x").arg("c").arg(&header).output()
    else {
        eprintln!("no C compiler; syntax check skipped");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
