//! User losses computed by an external program.
//!
//! The program is started once and kept alive. For every evaluation it
//! receives the `d x d` matrix on standard input as `d` comma-separated
//! lines and must answer with one line holding a single float. Calls are
//! serialized, so the loss is flagged as unsafe for concurrent polling.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use anyhow::Context;
use bloc_core::corrspace::CorrelationMatrix;
use bloc_core::objective::LossSpec;
use bloc_core::{Error, Result};

struct Pipe {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

pub struct ProcessLoss {
    command: String,
    dim: usize,
    pipe: Mutex<Pipe>,
}

impl std::fmt::Debug for ProcessLoss {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProcessLoss")
            .field("command", &self.command)
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

impl ProcessLoss {
    /// Runs `command` through `sh -c`.
    pub fn spawn(command: &str, dim: usize) -> anyhow::Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .with_context(|| format!("cannot start black-box command {command:?}"))?;
        let stdin = child.stdin.take().context("child stdin unavailable")?;
        let stdout = BufReader::new(child.stdout.take().context("child stdout unavailable")?);
        Ok(ProcessLoss {
            command: command.to_owned(),
            dim,
            pipe: Mutex::new(Pipe { child, stdin, stdout }),
        })
    }

    pub fn evaluate(&self, c: &CorrelationMatrix) -> Result<f64> {
        if c.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: c.dim(),
            });
        }
        let fail = |what: String| Error::Evaluation(format!("black-box command {:?}: {what}", self.command));
        let mut pipe = self.pipe.lock().map_err(|_| fail("poisoned lock".into()))?;
        let mut msg = String::new();
        for row in c.as_matrix().row_iter() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            msg.push_str(&line.join(","));
            msg.push('\n');
        }
        pipe.stdin
            .write_all(msg.as_bytes())
            .and_then(|()| pipe.stdin.flush())
            .map_err(|e| fail(format!("write failed: {e}")))?;
        let mut answer = String::new();
        let n = pipe
            .stdout
            .read_line(&mut answer)
            .map_err(|e| fail(format!("read failed: {e}")))?;
        if n == 0 {
            return Err(fail("exited without answering".into()));
        }
        answer
            .trim()
            .parse::<f64>()
            .map_err(|_| fail(format!("answer {:?} is not a number", answer.trim())))
    }

    pub fn into_loss(self) -> LossSpec {
        let dim = self.dim;
        LossSpec::black_box(dim, move |c: &CorrelationMatrix| self.evaluate(c), false)
    }
}

impl Drop for ProcessLoss {
    fn drop(&mut self) {
        if let Ok(pipe) = self.pipe.get_mut() {
            let _ = pipe.child.kill();
            let _ = pipe.child.wait();
        }
    }
}
