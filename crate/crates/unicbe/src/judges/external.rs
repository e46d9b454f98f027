//! Judge backed by an external command speaking a one-line JSON protocol.
//!
//! For every query the command is spawned, receives
//! `{"instruction": ..., "output_1": ..., "output_2": ...}` on stdin and must
//! print `{"winner": 1 | 2 | "tie"}` on stdout, then exit with status 0.

use std::io::{BufRead, BufReader, Write};
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::allocation::Tuple;

use super::{Judge, JudgeError};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug)]
struct Limiter {
    in_use: Mutex<usize>,
    freed: Condvar,
    max: usize,
}

struct Permit<'a>(&'a Limiter);

impl Limiter {
    fn acquire(&self) -> Permit<'_> {
        let mut n = self.in_use.lock().unwrap_or_else(|e| e.into_inner());
        while *n >= self.max {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.0.in_use.lock().unwrap_or_else(|e| e.into_inner());
        *n -= 1;
        self.0.freed.notify_one();
    }
}

/// Program, arguments, timeout and a concurrency cap shared by clones.
#[derive(Debug, Clone)]
pub struct CommandSpec {
    pub program: String,
    pub args: Vec<String>,
    pub timeout: Duration,
    limiter: Arc<Limiter>,
}

impl CommandSpec {
    /// Runs one query at a time with the default timeout.
    pub fn new(program: impl Into<String>, args: Vec<String>) -> Self {
        Self {
            program: program.into(),
            args,
            timeout: DEFAULT_TIMEOUT,
            limiter: Arc::new(Limiter {
                in_use: Mutex::new(0),
                freed: Condvar::new(),
                max: 1,
            }),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// Allows up to `n` concurrent processes across all clones of this spec.
    pub fn with_max_parallel(mut self, n: usize) -> Self {
        self.limiter = Arc::new(Limiter {
            in_use: Mutex::new(0),
            freed: Condvar::new(),
            max: n.max(1),
        });
        self
    }
}

#[derive(Serialize)]
struct Request<'a> {
    instruction: &'a str,
    output_1: &'a str,
    output_2: &'a str,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum WinnerField {
    Number(u8),
    Text(String),
}

#[derive(Deserialize)]
struct Response {
    winner: WinnerField,
}

fn parse_response(line: &str) -> Result<f64, JudgeError> {
    let resp: Response = serde_json::from_str(line.trim()).map_err(|e| JudgeError::Malformed(format!("{e}: {line:?}")))?;
    match resp.winner {
        WinnerField::Number(1) => Ok(1.0),
        WinnerField::Number(2) => Ok(0.0),
        WinnerField::Text(t) if t == "tie" => Ok(0.5),
        WinnerField::Text(t) if t == "1" => Ok(1.0),
        WinnerField::Text(t) if t == "2" => Ok(0.0),
        _ => Err(JudgeError::Malformed(format!("unexpected winner in {line:?}"))),
    }
}

/// Runs one query; `r` is the preference for `output_a`.
pub fn judge_external(
    cmd: &CommandSpec,
    instruction: &str,
    output_a: &str,
    output_b: &str,
) -> Result<f64, JudgeError> {
    let _permit = cmd.limiter.acquire();
    let mut child = Command::new(&cmd.program)
        .args(&cmd.args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| JudgeError::Io(format!("{}: {e}", cmd.program)))?;

    let request = serde_json::to_string(&Request {
        instruction,
        output_1: output_a,
        output_2: output_b,
    })
    .expect("request serializes");
    let mut stdin = child.stdin.take().expect("piped stdin");
    let stdout = child.stdout.take().expect("piped stdout");

    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        // A command that exits without reading stdin closes the pipe; the
        // response (or exit status) decides the outcome, so ignore it here.
        let _ = stdin.write_all(request.as_bytes());
        let _ = stdin.write_all(b"\n");
        drop(stdin);
        let mut line = String::new();
        let res = BufReader::new(stdout).read_line(&mut line).map(|_| line);
        let _ = tx.send(res);
    });

    let line = match rx.recv_timeout(cmd.timeout) {
        Ok(Ok(line)) => line,
        Ok(Err(e)) => {
            let _ = child.kill();
            let _ = child.wait();
            return Err(JudgeError::Io(e.to_string()));
        }
        Err(_) => {
            let _ = child.kill();
            let _ = child.wait();
            return Err(JudgeError::Timeout(cmd.timeout));
        }
    };
    let status = child.wait().map_err(|e| JudgeError::Io(e.to_string()))?;
    if !status.success() {
        return Err(JudgeError::Exit(status.to_string()));
    }
    parse_response(&line)
}

/// Pairwise judge over texts: one instruction per sample and one output per
/// (model, sample).
#[derive(Debug, Clone)]
pub struct ExternalJudge {
    pub command: CommandSpec,
    /// `[sample]`
    pub instructions: Vec<String>,
    /// `[model][sample]`
    pub outputs: Vec<Vec<String>>,
}

impl Judge for ExternalJudge {
    fn judge(&mut self, t: Tuple) -> Result<Option<f64>, JudgeError> {
        let instruction = self
            .instructions
            .get(t.sample.index())
            .ok_or(JudgeError::UnknownSample(t.sample))?;
        let text = |m: crate::session::ModelId| {
            self.outputs
                .get(m.index())
                .ok_or(JudgeError::UnknownModel(m))?
                .get(t.sample.index())
                .ok_or(JudgeError::UnknownSample(t.sample))
        };
        let (a, b) = (text(t.a)?, text(t.b)?);
        judge_external(&self.command, instruction, a, b).map(Some)
    }
}

#[cfg(all(test, unix))]
mod tests {
    use super::*;

    fn sh(script: &str) -> CommandSpec {
        CommandSpec::new("sh", vec!["-c".into(), script.into()])
    }

    #[test]
    fn winners_map_to_preferences() {
        let one = sh(r#"cat >/dev/null; echo '{"winner": 1}'"#);
        assert_eq!(judge_external(&one, "q", "a", "b").unwrap(), 1.0);
        let two = sh(r#"cat >/dev/null; echo '{"winner": 2}'"#);
        assert_eq!(judge_external(&two, "q", "a", "b").unwrap(), 0.0);
        let tie = sh(r#"cat >/dev/null; echo '{"winner": "tie"}'"#);
        assert_eq!(judge_external(&tie, "q", "a", "b").unwrap(), 0.5);
    }

    #[test]
    fn request_reaches_the_command() {
        // Picks output_2 whenever it mentions "better".
        let cmd = sh(r#"read line; case "$line" in *'"output_2":"better'*) echo '{"winner":2}';; *) echo '{"winner":1}';; esac"#);
        assert_eq!(judge_external(&cmd, "q", "worse", "better").unwrap(), 0.0);
        assert_eq!(judge_external(&cmd, "q", "better", "worse").unwrap(), 1.0);
    }

    #[test]
    fn failures_are_reported() {
        let garbage = sh("cat >/dev/null; echo hello");
        assert!(matches!(judge_external(&garbage, "q", "a", "b"), Err(JudgeError::Malformed(_))));
        let exit = sh(r#"cat >/dev/null; echo '{"winner": 1}'; exit 3"#);
        assert!(matches!(judge_external(&exit, "q", "a", "b"), Err(JudgeError::Exit(_))));
        let slow = sh("sleep 5").with_timeout(Duration::from_millis(200));
        assert!(matches!(judge_external(&slow, "q", "a", "b"), Err(JudgeError::Timeout(_))));
        let missing = CommandSpec::new("/nonexistent/judge", vec![]);
        let err = judge_external(&missing, "q", "a", "b").unwrap_err();
        assert!(err.is_judge_failure());
    }

    #[test]
    fn judge_trait_uses_texts() {
        let mut j = ExternalJudge {
            command: sh(r#"read line; case "$line" in *'"output_1":"good'*) echo '{"winner":1}';; *) echo '{"winner":2}';; esac"#),
            instructions: vec!["q0".into()],
            outputs: vec![vec!["good".into()], vec!["bad".into()]],
        };
        use crate::session::{ModelId, SampleId};
        let t = Tuple::new(ModelId(0), ModelId(1), SampleId(0));
        assert_eq!(j.judge(t).unwrap(), Some(1.0));
        assert_eq!(j.judge(Tuple::new(ModelId(1), ModelId(0), SampleId(0))).unwrap(), Some(0.0));
        assert!(j.judge(Tuple::new(ModelId(0), ModelId(2), SampleId(0))).is_err());
    }
}
