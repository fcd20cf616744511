#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use canonlab_cli::config::RunConfig;
use serde_json::Value;

pub struct Workspace {
    pub dir: tempfile::TempDir,
}

impl Workspace {
    pub fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn out(&self) -> PathBuf {
        self.path("runs")
    }

    pub fn config(&self, name: &str, body: &str) -> PathBuf {
        let p = self.path(name);
        fs::write(&p, body).unwrap();
        p
    }

    pub fn run(&self, command: &str, config: &Path) -> Output {
        Command::new(env!("CARGO_BIN_EXE_canonlab"))
            .arg(command)
            .arg(config)
            .arg("--out")
            .arg(self.out())
            .env_remove("MOCHA_CANON_ENDPOINT")
            .output()
            .unwrap()
    }

    pub fn run_ok(&self, command: &str, config: &Path) -> PathBuf {
        let o = self.run(command, config);
        assert!(
            o.status.success(),
            "{command} failed: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        self.run_dir(command, config)
    }

    pub fn run_dir(&self, command: &str, config: &Path) -> PathBuf {
        let hash = RunConfig::load(config).unwrap().hash();
        self.out().join(command).join(hash)
    }
}

/// File contents of a run directory, with the manifest's wall clock removed.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let mut bytes = fs::read(&path).unwrap();
        if name == "manifest.json" {
            let mut v: Value = serde_json::from_slice(&bytes).unwrap();
            v.as_object_mut().unwrap().remove("wall_clock").expect("manifest has wall_clock");
            bytes = serde_json::to_vec(&v).unwrap();
        }
        files.insert(name, bytes);
    }
    files
}

pub const SYNTH: &str = r#"
schema_version = 1

[data.synth]
n_motions = 60
seed = 11
"#;

pub fn train_config(epochs: usize) -> String {
    format!("{SYNTH}\n[train]\nmode = \"baseline\"\nepochs = {epochs}\nbatch_size = 16\nseed = 3\n")
}

pub fn eval_config(checkpoint: &Path) -> String {
    format!(
        "{SYNTH}\n[eval]\ncheckpoint = {:?}\ntext_mode = \"original\"\n\n[eval.protocol]\nkind = \"dspair\"\n",
        checkpoint.to_str().unwrap()
    )
}

/// Runs synth, train and eval twice from scratch in the same workspace and
/// reports whether every output matched.
pub fn pipeline_is_deterministic() -> Result<(), String> {
    let ws = Workspace::new();
    let synth = ws.config("synth.toml", SYNTH);
    let train = ws.config("train.toml", &train_config(3));
    let ckpt = ws.run_dir("train", &train).join("checkpoint.json");
    let eval = ws.config("eval.toml", &eval_config(&ckpt));
    let steps = [("synth", &synth), ("train", &train), ("eval", &eval)];
    let mut first = Vec::new();
    for (cmd, cfg) in steps {
        first.push(snapshot(&ws.run_ok(cmd, cfg)));
    }
    fs::remove_dir_all(ws.out()).unwrap();
    for ((cmd, cfg), before) in steps.iter().zip(&first) {
        let after = snapshot(&ws.run_ok(cmd, cfg));
        if before.keys().ne(after.keys()) {
            return Err(format!("{cmd}: file sets differ"));
        }
        for (name, bytes) in before {
            if &after[name] != bytes {
                return Err(format!("{cmd}: {name} differs between runs"));
            }
        }
    }
    Ok(())
}
