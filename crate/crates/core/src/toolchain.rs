//! Thin wrappers around the system C compiler, assembler and process execution.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ToolError {
    #[error("could not launch `{tool}`: {reason}")]
    Missing { tool: String, reason: String },
    #[error("`{tool}` failed:\n{stderr}")]
    Failed { tool: String, stderr: String },
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for ToolError {
    fn from(e: std::io::Error) -> Self {
        ToolError::Io(e.to_string())
    }
}

#[derive(Clone, Debug)]
pub struct Toolchain {
    pub cc: String,
    pub assembler: String,
}

impl Default for Toolchain {
    fn default() -> Self {
        Toolchain {
            cc: std::env::var("LEGOC_CC").unwrap_or_else(|_| "gcc".into()),
            assembler: std::env::var("LEGOC_AS").unwrap_or_else(|_| "as".into()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExitState {
    Code(i32),
    Signal,
    TimedOut,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub state: ExitState,
    pub stdout: String,
    pub stderr: String,
}

fn invoke(tool: &str, cmd: &mut Command) -> Result<(), ToolError> {
    let out = cmd.stdin(Stdio::null()).output().map_err(|e| ToolError::Missing {
        tool: tool.to_string(),
        reason: e.to_string(),
    })?;
    if out.status.success() {
        Ok(())
    } else {
        let mut stderr = String::from_utf8_lossy(&out.stderr).into_owned();
        stderr.push_str(&String::from_utf8_lossy(&out.stdout));
        Err(ToolError::Failed {
            tool: tool.to_string(),
            stderr,
        })
    }
}

impl Toolchain {
    pub fn available(&self) -> bool {
        [&self.cc, &self.assembler].iter().all(|t| {
            Command::new(t.as_str())
                .arg("--version")
                .stdout(Stdio::null())
                .stderr(Stdio::null())
                .status()
                .map(|s| s.success())
                .unwrap_or(false)
        })
    }

    /// Compiles and links C source text into `dir/<stem>`.
    pub fn compile_c(&self, src: &str, dir: &Path, stem: &str, flags: &[&str]) -> Result<PathBuf, ToolError> {
        let c = dir.join(format!("{stem}.c"));
        std::fs::write(&c, src)?;
        let exe = dir.join(stem);
        invoke(
            &self.cc,
            Command::new(&self.cc).args(flags).arg(&c).arg("-o").arg(&exe).arg("-lm"),
        )?;
        Ok(exe)
    }

    /// Assembles `asm` into an object file; stderr carries the assembler diagnostics.
    pub fn assemble(&self, asm: &str, dir: &Path, stem: &str) -> Result<PathBuf, ToolError> {
        let s = dir.join(format!("{stem}.s"));
        std::fs::write(&s, asm)?;
        let obj = dir.join(format!("{stem}.o"));
        invoke(
            &self.assembler,
            Command::new(&self.assembler).arg("--64").arg(&s).arg("-o").arg(&obj),
        )?;
        Ok(obj)
    }

    /// Compiles C source text into `dir/<stem>.o` without linking.
    pub fn compile_object(&self, src: &str, dir: &Path, stem: &str, flags: &[&str]) -> Result<PathBuf, ToolError> {
        let c = dir.join(format!("{stem}.c"));
        std::fs::write(&c, src)?;
        let obj = dir.join(format!("{stem}.o"));
        invoke(
            &self.cc,
            Command::new(&self.cc).args(flags).arg("-c").arg(&c).arg("-o").arg(&obj),
        )?;
        Ok(obj)
    }

    /// Renames a symbol inside an object file in place.
    pub fn redefine_symbol(&self, obj: &Path, from: &str, to: &str) -> Result<(), ToolError> {
        let tool = std::env::var("LEGOC_OBJCOPY").unwrap_or_else(|_| "objcopy".into());
        invoke(
            &tool,
            Command::new(&tool).arg(format!("--redefine-sym={from}={to}")).arg(obj),
        )
    }

    /// Links objects and C sources into an executable.
    pub fn link(&self, inputs: &[PathBuf], out: &Path) -> Result<(), ToolError> {
        invoke(
            &self.cc,
            Command::new(&self.cc)
                .arg("-no-pie")
                .args(inputs)
                .arg("-o")
                .arg(out)
                .arg("-lm"),
        )
    }
}

/// Runs `exe` with a wall-clock timeout, killing it on expiry.
pub fn run_with_timeout(exe: &Path, args: &[String], timeout: Duration) -> Result<RunOutput, ToolError> {
    let mut child = Command::new(exe)
        .args(args)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()?;
    let mut out_pipe = child.stdout.take().expect("stdout");
    let mut err_pipe = child.stderr.take().expect("stderr");
    let out_reader = thread::spawn(move || {
        let mut v = Vec::new();
        let _ = out_pipe.read_to_end(&mut v);
        v
    });
    let err_reader = thread::spawn(move || {
        let mut v = Vec::new();
        let _ = err_pipe.read_to_end(&mut v);
        v
    });
    let start = Instant::now();
    let state = loop {
        if let Some(status) = child.try_wait()? {
            break match status.code() {
                Some(c) => ExitState::Code(c),
                None => ExitState::Signal,
            };
        }
        if start.elapsed() >= timeout {
            let _ = child.kill();
            let _ = child.wait();
            break ExitState::TimedOut;
        }
        thread::sleep(Duration::from_millis(2));
    };
    let stdout = String::from_utf8_lossy(&out_reader.join().unwrap_or_default()).into_owned();
    let stderr = String::from_utf8_lossy(&err_reader.join().unwrap_or_default()).into_owned();
    Ok(RunOutput { state, stdout, stderr })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assembler_reports_operand_mismatch() {
        let tc = Toolchain::default();
        let dir = tempfile::tempdir().unwrap();
        let err = tc.assemble("cmpl $1, $2\n", dir.path(), "bad").unwrap_err();
        match err {
            ToolError::Failed { stderr, .. } => {
                assert!(stderr.contains("operand type mismatch for `cmp'"), "{stderr}")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn timeout_kills_runaway_process() {
        let tc = Toolchain::default();
        let dir = tempfile::tempdir().unwrap();
        let exe = tc
            .compile_c("int main(void){ for(;;){} }", dir.path(), "spin", &[])
            .unwrap();
        let out = run_with_timeout(&exe, &[], Duration::from_millis(200)).unwrap();
        assert_eq!(out.state, ExitState::TimedOut);
    }
}
