use std::ffi::{c_char, CStr, CString};
use std::ptr;

use thermoformal_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { tf_last_error(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn preset(name: &str) -> *mut TfSystem {
    let name = CString::new(name).unwrap();
    let mut sys = ptr::null_mut();
    assert_eq!(unsafe { tf_system_new_preset(name.as_ptr(), &mut sys) }, TfStatus::Ok);
    assert!(!sys.is_null());
    sys
}

#[test]
fn linear_system_queries() {
    let sys = preset("linear");
    unsafe {
        assert_eq!(tf_system_dim(sys), 1);
        assert_eq!(tf_system_degree(sys), 2);
        assert_eq!(tf_system_lambda_s(sys), 0.25);
        tf_system_free(sys);
    }
}

#[test]
fn step_doubles_the_base() {
    let sys = preset("linear");
    let (mut b, mut re, mut im) = ([0.3f64], [0.0f64], [0.0f64]);
    unsafe {
        assert_eq!(tf_system_step(sys, 1, b.as_mut_ptr(), re.as_mut_ptr(), im.as_mut_ptr()), TfStatus::Ok);
        assert!((b[0] - 0.6).abs() < 1e-15);
        let mut wrong = [0.0f64; 2];
        let s = tf_system_step(sys, 2, wrong.as_mut_ptr(), re.as_mut_ptr(), im.as_mut_ptr());
        assert_eq!(s, TfStatus::InvalidArgument);
        assert!(last_error().contains("dim"));
        tf_system_free(sys);
    }
}

#[test]
fn operator_pressure_of_doubling() {
    let sys = preset("linear");
    let mut op = ptr::null_mut();
    unsafe {
        assert_eq!(tf_operator_new(sys, TfPotential::Zero, 256, 2, 1, &mut op), TfStatus::Ok);
        assert_eq!(tf_operator_cells(op), 256);
        assert!((tf_operator_pressure(op) - 2f64.ln()).abs() < 1e-10);
        assert!(tf_operator_spectral_gap(op) > 0.5);
        tf_operator_free(op);
        assert_eq!(tf_operator_new(sys, TfPotential::Geometric, 0, 2, 1, &mut op), TfStatus::InvalidArgument);
        tf_system_free(sys);
    }
}

#[test]
fn null_and_bad_inputs_are_reported() {
    let mut sys = ptr::null_mut();
    unsafe {
        assert_eq!(tf_system_new_preset(ptr::null(), &mut sys), TfStatus::NullPointer);
        let bogus = CString::new("bogus").unwrap();
        assert_eq!(tf_system_new_preset(bogus.as_ptr(), &mut sys), TfStatus::InvalidArgument);
        assert!(last_error().contains("bogus"));
        let bad = CString::new("[system]\nkind = linear\nfactors = x\n").unwrap();
        assert_eq!(tf_system_from_config(bad.as_ptr(), &mut sys), TfStatus::Config);
        assert!(last_error().contains("line 3"));
        assert_eq!(tf_system_dim(ptr::null()), 0);
        assert!(tf_operator_pressure(ptr::null()).is_nan());
        tf_system_free(ptr::null_mut());
        tf_operator_free(ptr::null_mut());
    }
}

#[test]
fn system_from_config_text() {
    let text = CString::new("[system]\nkind = pitchfork\n").unwrap();
    let mut sys = ptr::null_mut();
    unsafe {
        assert_eq!(tf_system_from_config(text.as_ptr(), &mut sys), TfStatus::Ok);
        assert_eq!(tf_system_dim(sys), 2);
        assert_eq!(tf_system_degree(sys), 6);
        tf_system_free(sys);
    }
}

#[test]
fn run_command_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = CString::new(dir.path().join("o").to_str().unwrap()).unwrap();
    let cfg = CString::new("[system]\nkind = linear\n[budgets]\nsegments = 5\n").unwrap();
    let cmd = CString::new("classify").unwrap();
    let mut code = -1;
    unsafe {
        assert_eq!(tf_run_command(cmd.as_ptr(), cfg.as_ptr(), out.as_ptr(), &mut code), TfStatus::Ok);
    }
    assert_eq!(code, 0);
    assert!(dir.path().join("o/report.json").exists());
    assert!(dir.path().join("o/segments.csv").exists());
    let nope = CString::new("plot").unwrap();
    unsafe {
        assert_eq!(tf_run_command(nope.as_ptr(), cfg.as_ptr(), out.as_ptr(), &mut code), TfStatus::InvalidArgument);
    }
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(tf_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/thermoformal.h");
    for f in [
        "tf_last_error",
        "tf_system_new_preset",
        "tf_system_from_config",
        "tf_system_free",
        "tf_system_dim",
        "tf_system_degree",
        "tf_system_lambda_s",
        "tf_system_step",
        "tf_operator_new",
        "tf_operator_free",
        "tf_operator_cells",
        "tf_operator_pressure",
        "tf_operator_spectral_gap",
        "tf_run_command",
        "tf_version",
        "TF_STATUS_NULL_POINTER",
        "typedef struct TfSystem TfSystem",
    ] {
        assert!(header.contains(f), "header lacks {f}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = std::env::var("CC").or_else(|_| which("cc")) else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"thermoformal.h\"\n\
         int main(void) {\n\
           TfSystem *s = 0;\n\
           if (tf_system_new_preset(\"linear\", &s) != TF_STATUS_OK) return 1;\n\
           double b[1] = {0.3}, re[1] = {0}, im[1] = {0};\n\
           tf_system_step(s, 1, b, re, im);\n\
           tf_system_free(s);\n\
           return 0;\n\
         }\n",
    )
    .unwrap();
    let include = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    let status = std::process::Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I", include])
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which(name: &str) -> Result<String, ()> {
    std::env::var_os("PATH")
        .and_then(|p| std::env::split_paths(&p).map(|d| d.join(name)).find(|c| c.is_file()))
        .map(|p| p.to_string_lossy().into_owned())
        .ok_or(())
}
