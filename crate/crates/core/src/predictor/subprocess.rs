use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use sha2::{Digest, Sha256};

use super::protocol::{Request, Response};
use super::{ClassId, Predictor};
use crate::error::{Error, Result};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
pub const DEFAULT_BATCH_SIZE: usize = 256;

struct Channel {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    next_id: u64,
}

impl Channel {
    fn exit_reason(&mut self) -> String {
        match self.child.try_wait() {
            Ok(Some(status)) => format!("child exited with {status}"),
            Ok(None) => "child closed its stdout".to_string(),
            Err(e) => format!("cannot query child status: {e}"),
        }
    }

    fn round_trip(&mut self, req: &Request, timeout: Duration) -> Result<Response> {
        let mut line = serde_json::to_vec(req)?;
        line.push(b'\n');
        if let Err(e) = self.stdin.write_all(&line).and_then(|_| self.stdin.flush()) {
            let reason = self.exit_reason();
            return Err(Error::ProcessExit(format!("{reason} ({e})")));
        }
        let text = match self.lines.recv_timeout(timeout) {
            Ok(Ok(text)) => text,
            Ok(Err(e)) => return Err(Error::ProcessExit(format!("reading child stdout: {e}"))),
            Err(RecvTimeoutError::Timeout) => return Err(Error::Timeout(timeout)),
            Err(RecvTimeoutError::Disconnected) => {
                // give the child a moment to be reaped so the status is informative
                thread::sleep(Duration::from_millis(10));
                return Err(Error::ProcessExit(self.exit_reason()));
            }
        };
        let resp: Response = serde_json::from_str(&text)
            .map_err(|e| Error::ProtocolViolation(format!("unparseable response {text:?}: {e}")))?;
        if resp.id != req.id {
            return Err(Error::ProtocolViolation(format!(
                "response id {} does not match request id {}",
                resp.id, req.id
            )));
        }
        Ok(resp)
    }
}

impl Drop for Channel {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Forwards predictions to a child process over stdin/stdout.
///
/// One batch is in flight at a time; concurrent callers queue on an internal
/// lock.
pub struct SubprocessPredictor {
    command: Vec<String>,
    classes: Vec<String>,
    timeout: Duration,
    batch_size: usize,
    channel: Mutex<Channel>,
}

impl SubprocessPredictor {
    pub fn spawn(command: &[String]) -> Result<Self> {
        Self::spawn_with(command, DEFAULT_TIMEOUT, DEFAULT_BATCH_SIZE)
    }

    pub fn spawn_with(command: &[String], timeout: Duration, batch_size: usize) -> Result<Self> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| Error::InvalidConfig("empty model command".into()))?;
        if batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be positive".into()));
        }
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::ProcessExit(format!("cannot start {program:?}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        let mut channel = Channel {
            child,
            stdin,
            lines: rx,
            next_id: 1,
        };
        let hello = channel.round_trip(&Request::hello(), timeout)?;
        let n = hello
            .n_classes
            .ok_or_else(|| Error::ProtocolViolation("handshake lacks n_classes".into()))?;
        if n == 0 {
            return Err(Error::ProtocolViolation("model reports zero classes".into()));
        }
        Ok(Self {
            command: command.to_vec(),
            classes: (0..n).map(|c| c.to_string()).collect(),
            timeout,
            batch_size,
            channel: Mutex::new(channel),
        })
    }

    pub fn command(&self) -> &[String] {
        &self.command
    }
}

pub fn subprocess_predictor(command: &[String]) -> Result<SubprocessPredictor> {
    SubprocessPredictor::spawn(command)
}

impl Predictor for SubprocessPredictor {
    fn predict(&self, batch: &[&[f64]]) -> Result<Vec<ClassId>> {
        let mut channel = self.channel.lock().unwrap_or_else(|p| p.into_inner());
        let mut out = Vec::with_capacity(batch.len());
        for chunk in batch.chunks(self.batch_size) {
            let id = channel.next_id;
            channel.next_id += 1;
            let req = Request::predict(id, chunk.iter().map(|x| x.to_vec()).collect());
            let resp = channel.round_trip(&req, self.timeout)?;
            if resp.classes.len() != chunk.len() {
                return Err(Error::ProtocolViolation(format!(
                    "{} classes returned for {} instances",
                    resp.classes.len(),
                    chunk.len()
                )));
            }
            for c in resp.classes {
                if c as usize >= self.classes.len() {
                    return Err(Error::ProtocolViolation(format!(
                        "class {c} outside the {} announced",
                        self.classes.len()
                    )));
                }
                out.push(ClassId(c));
            }
        }
        Ok(out)
    }

    fn classes(&self) -> &[String] {
        &self.classes
    }

    fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for part in &self.command {
            h.update(part.as_bytes());
            h.update([0]);
        }
        h.update((self.classes.len() as u64).to_le_bytes());
        format!("cmd:{}", hex::encode(h.finalize()))
    }
}
