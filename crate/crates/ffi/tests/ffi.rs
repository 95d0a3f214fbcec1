use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use cikf_ffi::*;

fn last_error() -> String {
    let p = cikf_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn desk_model() -> *mut CikfModel {
    let preset = CString::new("desk").unwrap();
    let mut model = ptr::null_mut();
    assert_eq!(cikf_model_generate(preset.as_ptr(), 3, &mut model), CikfStatus::Ok);
    model
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(cikf_version()) }.to_str().unwrap();
    assert_eq!(v, cikf::VERSION);
}

#[test]
fn filter_lifecycle_matches_library() {
    unsafe {
        let model = desk_model();
        let (mut m, mut n) = (0usize, 0usize);
        assert_eq!(cikf_model_dims(model, &mut m, &mut n), CikfStatus::Ok);
        assert_eq!((m, n), (10, 10));

        let mut sched = ptr::null_mut();
        assert_eq!(cikf_schedule_design(model, 5, &mut sched), CikfStatus::Ok);
        let mut h = 0usize;
        assert_eq!(cikf_schedule_horizon(sched, &mut h), CikfStatus::Ok);
        assert_eq!(h, 5);
        let mut mse = vec![0.0; 5];
        assert_eq!(cikf_schedule_theory_mse(sched, mse.as_mut_ptr(), 5), CikfStatus::Ok);
        assert!(mse.iter().all(|v| v.is_finite() && *v > 0.0));
        assert_eq!(cikf_schedule_theory_mse(sched, mse.as_mut_ptr(), 4), CikfStatus::BufferTooSmall);

        // Same run through the library directly.
        let spec = cikf::model::generate_paper_model(&cikf::model::ModelParams::desk(), 3).unwrap();
        let pm = cikf::pseudo::build_pseudo_model(&spec).unwrap();
        let (schedule, _) = cikf::covgain::precompute_schedule(&spec, 5).unwrap();
        let traj = cikf::filter::simulate_truth(&spec, 5, 9).unwrap();
        let ests = cikf::filter::cikf_run(&spec, &pm, &schedule, &traj).unwrap();

        let mut filter = ptr::null_mut();
        assert_eq!(cikf_filter_new(model, sched, &mut filter), CikfStatus::Ok);
        let mut buf = vec![0.0; m];
        assert_eq!(cikf_filter_estimate(filter, 0, buf.as_mut_ptr(), m), CikfStatus::Sequencing);
        for (i, zs) in traj.observations.iter().enumerate() {
            let flat: Vec<f64> = zs.iter().flat_map(|z| z.iter().copied()).collect();
            assert_eq!(cikf_filter_step(filter, flat.as_ptr(), flat.len()), CikfStatus::Ok);
            for agent in 0..n {
                assert_eq!(cikf_filter_prediction(filter, agent, buf.as_mut_ptr(), m), CikfStatus::Ok);
                assert_eq!(buf.as_slice(), ests[i + 1].x_pred[agent].as_slice());
                assert_eq!(cikf_filter_estimate(filter, agent, buf.as_mut_ptr(), m), CikfStatus::Ok);
                assert_eq!(buf.as_slice(), ests[i + 1].x_filt[agent].as_slice());
            }
        }
        let mut steps = 0usize;
        assert_eq!(cikf_filter_steps(filter, &mut steps), CikfStatus::Ok);
        assert_eq!(steps, 5);
        // The schedule is exhausted.
        let flat = vec![0.0; 2 * n];
        assert_eq!(cikf_filter_step(filter, flat.as_ptr(), flat.len()), CikfStatus::Config);
        assert!(last_error().contains("5 steps"));

        let (mut a, mut b) = (vec![0.0; 5], vec![0.0; 5]);
        assert_eq!(cikf_montecarlo(model, sched, 20, 5, 1, a.as_mut_ptr(), b.as_mut_ptr()), CikfStatus::Ok);
        assert!(a.iter().chain(&b).all(|v| *v > 0.0));

        cikf_filter_free(filter);
        cikf_schedule_free(sched);
        cikf_model_free(model);
    }
}

#[test]
fn errors_are_reported_not_raised() {
    unsafe {
        let mut model = ptr::null_mut();
        assert_eq!(cikf_model_generate(ptr::null(), 0, &mut model), CikfStatus::NullPointer);
        let bad = CString::new("huge").unwrap();
        assert_eq!(cikf_model_generate(bad.as_ptr(), 0, &mut model), CikfStatus::Parameter);
        assert!(last_error().contains("huge"));
        assert!(model.is_null());

        let missing = CString::new("/nonexistent/model.json").unwrap();
        assert_eq!(cikf_model_load(missing.as_ptr(), &mut model), CikfStatus::Io);

        let model = desk_model();
        let mut sched = ptr::null_mut();
        assert_eq!(cikf_schedule_design(model, 0, &mut sched), CikfStatus::Parameter);
        assert_eq!(cikf_schedule_design(model, 2, &mut sched), CikfStatus::Ok);
        let mut filter = ptr::null_mut();
        assert_eq!(cikf_filter_new(model, sched, &mut filter), CikfStatus::Ok);
        let short = [0.0; 3];
        assert_eq!(cikf_filter_step(filter, short.as_ptr(), 3), CikfStatus::Dimension);

        // A schedule for another model is refused.
        let other = {
            let preset = CString::new("desk").unwrap();
            let mut o = ptr::null_mut();
            assert_eq!(cikf_model_generate(preset.as_ptr(), 4, &mut o), CikfStatus::Ok);
            o
        };
        let mut f2 = ptr::null_mut();
        assert_eq!(cikf_filter_new(other, sched, &mut f2), CikfStatus::Config);

        let mut d = 0usize;
        assert_eq!(cikf_model_obs_dim(model, 99, &mut d), CikfStatus::Parameter);
        cikf_model_free(ptr::null_mut());
        cikf_filter_free(filter);
        cikf_schedule_free(sched);
        cikf_model_free(other);
        cikf_model_free(model);
    }
}

#[test]
fn files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mpath = CString::new(dir.path().join("m.json").to_str().unwrap()).unwrap();
    let spath = CString::new(dir.path().join("s.bin").to_str().unwrap()).unwrap();
    unsafe {
        let model = desk_model();
        assert_eq!(cikf_model_save(model, mpath.as_ptr()), CikfStatus::Ok);
        let mut sched = ptr::null_mut();
        assert_eq!(cikf_schedule_design(model, 3, &mut sched), CikfStatus::Ok);
        assert_eq!(cikf_schedule_save(sched, spath.as_ptr()), CikfStatus::Ok);
        let (mut m2, mut s2) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(cikf_model_load(mpath.as_ptr(), &mut m2), CikfStatus::Ok);
        assert_eq!(cikf_schedule_load(spath.as_ptr(), &mut s2), CikfStatus::Ok);
        let mut filter = ptr::null_mut();
        assert_eq!(cikf_filter_new(m2, s2, &mut filter), CikfStatus::Ok);
        cikf_filter_free(filter);
        for p in [sched, s2] {
            cikf_schedule_free(p);
        }
        for p in [model, m2] {
            cikf_model_free(p);
        }
    }
}

#[test]
fn header_declares_the_api_and_compiles() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/cikf.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "typedef struct CikfModel CikfModel",
        "CIKF_STATUS_OK = 0",
        "cikf_last_error",
        "cikf_model_generate",
        "cikf_schedule_design",
        "cikf_filter_step",
        "cikf_montecarlo",
    ] {
        assert!(text.contains(name), "header lacks `{name}`");
    }
    // Syntax-check with the system C compiler when one is available.
    if let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-x", "c"]).arg(&header).output() {
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
