//! Shared CLI scenarios: a fixed pipeline of `tui` invocations whose
//! outputs are pinned as golden files.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use sha2::{Digest, Sha256};

pub struct Scenario {
    pub name: &'static str,
    pub args: &'static [&'static str],
    /// Files the invocation writes (relative to the work directory).
    pub outputs: &'static [&'static str],
}

pub const SCENARIOS: &[Scenario] = &[
    Scenario {
        name: "generate_toy",
        args: &["generate", "--J", "5", "--K", "2", "--family", "noisy-or", "--seed", "1", "--extra-row", "1,1", "--no-shuffle", "--out", "toy.json"],
        outputs: &["toy.json"],
    },
    Scenario {
        name: "generate_rbm",
        args: &["generate", "--J", "7", "--K", "3", "--V", "3", "--H", "2", "--family", "general-rbm", "--seed", "7", "--out", "rbm.json"],
        outputs: &["rbm.json"],
    },
    Scenario {
        name: "generate_all_effect",
        args: &["generate", "--J", "6", "--K", "2", "--family", "all-effect", "--link", "probit", "--seed", "3", "--out", "ae.json"],
        outputs: &["ae.json"],
    },
    Scenario {
        name: "tensor_csv",
        args: &["tensor", "--spec", "toy.json", "--out", "toy.ptensor.csv"],
        outputs: &["toy.ptensor.csv"],
    },
    Scenario {
        name: "tensor_binary",
        args: &["tensor", "--spec", "toy.json", "--out", "toy.ptensor.bin", "--format", "binary"],
        outputs: &["toy.ptensor.bin"],
    },
    Scenario {
        name: "recover_tensor",
        args: &["recover", "--tensor", "toy.ptensor.bin", "--H", "2", "--out", "rec_toy.json"],
        outputs: &["rec_toy.json"],
    },
    Scenario {
        name: "recover_marginal",
        args: &["recover", "--spec", "toy.json", "--marginal-order", "4", "--out", "rec_marginal.json"],
        outputs: &["rec_marginal.json"],
    },
    Scenario {
        name: "recover_rbm",
        args: &["recover", "--spec", "rbm.json", "--out", "rec_rbm.json"],
        outputs: &["rec_rbm.json"],
    },
    Scenario {
        name: "recover_all_effect",
        args: &["recover", "--spec", "ae.json", "--out", "rec_ae.json"],
        outputs: &["rec_ae.json"],
    },
    Scenario {
        name: "simulate_toy",
        args: &["simulate", "--spec", "toy.json", "--n", "200000", "--seed", "42", "--samples", "toy_samples.csv", "--out", "sim_toy.json"],
        outputs: &["toy_samples.csv", "toy_samples.csv.meta.json", "sim_toy.json"],
    },
    Scenario {
        name: "recover_samples",
        args: &["recover", "--samples", "toy_samples.csv", "--V", "2", "--H", "2", "--out", "rec_samples.json"],
        outputs: &["rec_samples.json"],
    },
];

/// Outputs above this size are pinned by their SHA-256 instead.
pub const INLINE_LIMIT: usize = 64 * 1024;

pub fn tui() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tui"))
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

/// Runs every scenario in `dir` with the given thread setting and returns
/// `artifact name -> bytes`, stdout included as `<scenario>.stdout`.
pub fn run_all(dir: &Path, threads: Option<&str>, via_env: bool) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    for s in SCENARIOS {
        let mut cmd = tui();
        cmd.current_dir(dir).env_remove("TUI_THREADS");
        match (threads, via_env) {
            (Some(t), true) => {
                cmd.env("TUI_THREADS", t);
            }
            (Some(t), false) => {
                cmd.args(["--threads", t]);
            }
            (None, _) => {}
        }
        let res = cmd.args(s.args).output().map_err(|e| format!("{}: {e}", s.name))?;
        if !res.status.success() {
            return Err(format!("{} exited with {:?}: {}", s.name, res.status.code(), String::from_utf8_lossy(&res.stderr)));
        }
        out.insert(format!("{}.stdout", s.name), res.stdout);
        for f in s.outputs {
            let bytes = std::fs::read(dir.join(f)).map_err(|e| format!("{}: {f}: {e}", s.name))?;
            out.insert((*f).to_string(), bytes);
        }
    }
    Ok(out)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Golden form of an artifact: the bytes themselves, or a `.sha256` file
/// for large outputs.
pub fn golden_entry(name: &str, bytes: &[u8]) -> (String, Vec<u8>) {
    if bytes.len() > INLINE_LIMIT {
        (format!("{name}.sha256"), format!("{}\n", sha256_hex(bytes)).into_bytes())
    } else {
        (name.to_string(), bytes.to_vec())
    }
}

/// Compares artifacts with the golden directory; `TUI_UPDATE_GOLDEN=1`
/// rewrites it instead.
pub fn check_golden(artifacts: &BTreeMap<String, Vec<u8>>) -> Result<(), String> {
    let dir = golden_dir();
    let update = std::env::var_os("TUI_UPDATE_GOLDEN").is_some();
    let mut mismatches = Vec::new();
    for (name, bytes) in artifacts {
        let (file, content) = golden_entry(name, bytes);
        let path = dir.join(&file);
        if update {
            std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
            std::fs::write(&path, &content).map_err(|e| e.to_string())?;
            continue;
        }
        match std::fs::read(&path) {
            Ok(expected) if expected == content => {}
            Ok(_) => mismatches.push(format!("{file} differs")),
            Err(e) => mismatches.push(format!("{file}: {e}")),
        }
    }
    if mismatches.is_empty() {
        Ok(())
    } else {
        Err(mismatches.join("; "))
    }
}
