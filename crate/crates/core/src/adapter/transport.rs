use std::collections::VecDeque;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use super::protocol::{decode_request, Op, Response};
use super::stub::RequestHandler;
use super::AdapterError;

/// Line-oriented channel to a backend. One request is in flight at a time.
pub trait Transport: Send {
    fn send(&mut self, line: &str) -> Result<(), AdapterError>;
    /// Next line without its terminator.
    fn recv(&mut self, timeout: Duration) -> Result<String, AdapterError>;
    /// Kills and restarts the backend (after a timeout).
    fn restart(&mut self) -> Result<(), AdapterError>;
    fn close(&mut self);
}

/// A child process speaking the protocol on stdin/stdout. Stderr is inherited.
pub struct ProcessTransport {
    argv: Vec<String>,
    env: Vec<(String, String)>,
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
}

impl ProcessTransport {
    pub fn spawn(argv: Vec<String>, env: Vec<(String, String)>) -> Result<Self, AdapterError> {
        let (child, stdin, lines) = launch(&argv, &env)?;
        Ok(Self {
            argv,
            env,
            child,
            stdin: Some(stdin),
            lines,
        })
    }

    fn exit_detail(&mut self) -> String {
        match self.child.try_wait() {
            Ok(Some(status)) => format!("adapter exited ({status})"),
            _ => "adapter closed its output".to_owned(),
        }
    }
}

type Launched = (Child, ChildStdin, Receiver<std::io::Result<String>>);

fn launch(argv: &[String], env: &[(String, String)]) -> Result<Launched, AdapterError> {
    let (program, args) = argv
        .split_first()
        .ok_or_else(|| AdapterError::SpawnFailure("empty adapter command".into()))?;
    let mut child = Command::new(program)
        .args(args)
        .envs(env.iter().map(|(k, v)| (k, v)))
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()
        .map_err(|e| AdapterError::SpawnFailure(format!("{program}: {e}")))?;
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
    Ok((child, stdin, rx))
}

impl Transport for ProcessTransport {
    fn send(&mut self, line: &str) -> Result<(), AdapterError> {
        let result = match self.stdin.as_mut() {
            Some(stdin) => stdin.write_all(line.as_bytes()).and_then(|_| stdin.flush()),
            None => Err(std::io::ErrorKind::BrokenPipe.into()),
        };
        result.map_err(|_| AdapterError::Exited(self.exit_detail()))
    }

    fn recv(&mut self, timeout: Duration) -> Result<String, AdapterError> {
        match self.lines.recv_timeout(timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(AdapterError::ProtocolError(format!("unreadable output: {e}"))),
            Err(RecvTimeoutError::Timeout) => Err(AdapterError::Timeout(timeout)),
            Err(RecvTimeoutError::Disconnected) => {
                // give the child a moment so the exit status is reportable
                let _ = wait_for_exit(&mut self.child, Duration::from_millis(200));
                Err(AdapterError::Exited(self.exit_detail()))
            }
        }
    }

    fn restart(&mut self) -> Result<(), AdapterError> {
        self.close();
        let (child, stdin, lines) = launch(&self.argv, &self.env)?;
        self.child = child;
        self.stdin = Some(stdin);
        self.lines = lines;
        Ok(())
    }

    fn close(&mut self) {
        self.stdin = None;
        if !wait_for_exit(&mut self.child, Duration::from_secs(2)) {
            let _ = self.child.kill();
            let _ = self.child.wait();
        }
    }
}

impl Drop for ProcessTransport {
    fn drop(&mut self) {
        if matches!(self.child.try_wait(), Ok(None)) {
            let _ = self.child.kill();
            let _ = self.child.wait();
        }
    }
}

fn wait_for_exit(child: &mut Child, limit: Duration) -> bool {
    let start = Instant::now();
    loop {
        match child.try_wait() {
            Ok(Some(_)) => return true,
            Ok(None) if start.elapsed() < limit => thread::sleep(Duration::from_millis(10)),
            _ => return false,
        }
    }
}

/// Runs a handler on the caller's thread, still going through the wire
/// encoding so the framing is exercised.
pub struct InProcessTransport {
    handler: Box<dyn RequestHandler + Send>,
    pending: VecDeque<String>,
    closed: bool,
}

impl InProcessTransport {
    pub fn new(handler: Box<dyn RequestHandler + Send>) -> Self {
        Self {
            handler,
            pending: VecDeque::new(),
            closed: false,
        }
    }
}

impl Transport for InProcessTransport {
    fn send(&mut self, line: &str) -> Result<(), AdapterError> {
        if self.closed {
            return Err(AdapterError::Exited("in-process backend shut down".into()));
        }
        let response = match decode_request(line.trim_end()) {
            Ok(req) => {
                self.closed = req.op == Op::Shutdown;
                self.handler.handle(&req)
            }
            Err(e) => Response::error("", e.to_string()),
        };
        self.pending.push_back(response.to_line().trim_end().to_owned());
        Ok(())
    }

    fn recv(&mut self, _timeout: Duration) -> Result<String, AdapterError> {
        self.pending
            .pop_front()
            .ok_or_else(|| AdapterError::Exited("no response pending".into()))
    }

    fn restart(&mut self) -> Result<(), AdapterError> {
        self.pending.clear();
        self.closed = false;
        Ok(())
    }

    fn close(&mut self) {
        self.closed = true;
    }
}
