//! Provenance record written next to every output.
//!
//! Format: one `key=value` per line. `arg=` lines hold the resolved
//! argument vector, one argument per line, so the run can be repeated
//! verbatim; `flag.<name>=` lines hold every resolved flag including
//! defaults.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use crate::commands::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, Default)]
pub struct RunManifest {
    pub subcommand: String,
    pub args: Vec<String>,
    pub flags: Vec<(String, String)>,
    pub seeds: Vec<(String, u64)>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub started: Option<SystemTime>,
    pub elapsed: Duration,
}

impl RunManifest {
    pub fn new(subcommand: &str) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            started: Some(SystemTime::now()),
            ..Self::default()
        }
    }

    pub fn flag(&mut self, name: &str, value: impl ToString) -> &mut Self {
        let value = value.to_string();
        self.flags.push((name.to_string(), value.clone()));
        self.args.push(format!("--{}", name.replace('_', "-")));
        self.args.push(value);
        self
    }

    /// A boolean switch: recorded as a flag, passed as a bare argument only
    /// when set.
    pub fn switch(&mut self, name: &str, on: bool) -> &mut Self {
        self.flags.push((name.to_string(), on.to_string()));
        if on {
            self.args.push(format!("--{}", name.replace('_', "-")));
        }
        self
    }

    pub fn seed(&mut self, name: &str, seed: u64) -> &mut Self {
        self.seeds.push((name.to_string(), seed));
        self
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: &str| {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        };
        line("tool", "pixmap");
        line("version", VERSION);
        line("subcommand", &self.subcommand);
        line("arg", &self.subcommand);
        for a in &self.args {
            line("arg", a);
        }
        for (k, v) in &self.flags {
            line(&format!("flag.{k}"), v);
        }
        for (k, v) in &self.seeds {
            line(&format!("seed.{k}"), &v.to_string());
        }
        for p in &self.inputs {
            line("input", &p.display().to_string());
        }
        for p in &self.outputs {
            line("output", &p.display().to_string());
        }
        let started = self
            .started
            .and_then(|t| t.duration_since(UNIX_EPOCH).ok())
            .map(|d| d.as_secs())
            .unwrap_or(0);
        line("started_unix", &started.to_string());
        line("wall_clock_seconds", &format!("{:.3}", self.elapsed.as_secs_f64()));
        out
    }

    /// Write `<file>.run` beside every output file, or `<dir>/pixmap.run`
    /// inside every output directory.
    pub fn write_all(&mut self) -> Result<(), CliError> {
        if let Some(t) = self.started {
            self.elapsed = t.elapsed().unwrap_or_default();
        }
        let text = self.render();
        for out in &self.outputs {
            write_atomic(&sidecar_path(out), text.as_bytes())?;
        }
        Ok(())
    }
}

pub fn sidecar_path(output: &Path) -> PathBuf {
    if output.is_dir() {
        output.join("pixmap.run")
    } else {
        let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".run");
        output.with_file_name(name)
    }
}

/// Write to a temporary file in the destination directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| CliError::new("invalid-argument", format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let io = |e: std::io::Error, p: &Path| CliError::new("io", format!("{}: {e}", p.display()));
    let mut f = fs::File::create(&tmp).map_err(|e| io(e, &tmp))?;
    f.write_all(bytes).map_err(|e| io(e, &tmp))?;
    f.sync_all().map_err(|e| io(e, &tmp))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| io(e, path))
}

/// The `arg=` lines of a manifest, in order.
#[cfg(test)]
pub fn parse_args(text: &str) -> Vec<String> {
    text.lines()
        .filter_map(|l| l.strip_prefix("arg="))
        .map(str::to_string)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_and_args() {
        let mut m = RunManifest::new("gen");
        m.flag("out", "data").flag("n", 4).switch("confound", true).switch("dry", false);
        m.seed("root", 9);
        m.outputs.push(PathBuf::from("data"));
        let text = m.render();
        assert!(text.starts_with("tool=pixmap\nversion="));
        assert!(text.contains("flag.n=4\n"));
        assert!(text.contains("flag.dry=false\n"));
        assert!(text.contains("seed.root=9\n"));
        assert_eq!(parse_args(&text), ["gen", "--out", "data", "--n", "4", "--confound"]);
    }

    #[test]
    fn sidecar_names() {
        assert_eq!(sidecar_path(Path::new("a/model.w1")), PathBuf::from("a/model.w1.run"));
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(sidecar_path(dir.path()), dir.path().join("pixmap.run"));
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
