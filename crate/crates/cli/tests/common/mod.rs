#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dps_core::harness::synth::{synth_item, SyntheticVoiceSpec};
use dps_core::{save_wav, WavEncoding};

pub fn dps() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dps"))
}

pub fn run(args: &[&str]) -> Output {
    dps().args(args).output().expect("spawn dps")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Runs `dps` and panics with its stderr unless it exits 0.
pub fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "dps {args:?} failed: {}", stderr(&out));
    out
}

/// Writes a short synthetic voice item and returns its path.
pub fn write_voice(dir: &Path, name: &str, len: usize, index: usize) -> PathBuf {
    let spec = SyntheticVoiceSpec {
        n_items: index + 1,
        len,
        ..SyntheticVoiceSpec::default()
    };
    let (signal, _) = synth_item(&spec, 11, index).expect("synth");
    let path = dir.join(name);
    save_wav(&signal, &path, WavEncoding::Float32).expect("save");
    path
}

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}
