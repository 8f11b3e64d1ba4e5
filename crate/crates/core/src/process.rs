//! One-shot JSON exchange with a child process.
//!
//! The child receives a single JSON line on stdin and must print a single JSON
//! line on stdout, then exit with status 0.

use std::io::{BufRead, BufReader, Write};
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::ProcessError;

/// A command either as an argv list or as a shell string run with `sh -c`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CommandSpec {
    Argv(Vec<String>),
    Shell(String),
}

impl CommandSpec {
    fn to_command(&self) -> Result<Command, ProcessError> {
        match self {
            CommandSpec::Argv(argv) => {
                let (program, args) = argv.split_first().ok_or(ProcessError::EmptyCommand)?;
                let mut cmd = Command::new(program);
                cmd.args(args);
                Ok(cmd)
            }
            CommandSpec::Shell(line) => {
                if line.trim().is_empty() {
                    return Err(ProcessError::EmptyCommand);
                }
                let mut cmd = Command::new("sh");
                cmd.arg("-c").arg(line);
                Ok(cmd)
            }
        }
    }

    pub fn display(&self) -> String {
        match self {
            CommandSpec::Argv(argv) => argv.join(" "),
            CommandSpec::Shell(line) => line.clone(),
        }
    }
}

pub fn exchange_json(
    command: &CommandSpec,
    request: &serde_json::Value,
    timeout: Duration,
) -> Result<serde_json::Value, ProcessError> {
    let mut child = command
        .to_command()?
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()
        .map_err(|source| ProcessError::Spawn {
            command: command.display(),
            source,
        })?;

    let mut line = serde_json::to_string(request).map_err(|e| ProcessError::Protocol(e.to_string()))?;
    line.push('\n');
    let mut stdin = child.stdin.take().expect("stdin is piped");
    let stdout = child.stdout.take().expect("stdout is piped");

    // stdin and stdout are serviced off-thread so a child that never reads or
    // never answers cannot block past the timeout
    let writer = thread::spawn(move || {
        // a child may exit without reading; a broken pipe is not our error
        let _ = stdin.write_all(line.as_bytes());
    });
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let mut reply = String::new();
        let res = BufReader::new(stdout).read_line(&mut reply).map(|_| reply);
        let _ = tx.send(res);
    });

    let reply = match rx.recv_timeout(timeout) {
        Ok(res) => res?,
        Err(_) => {
            let _ = child.kill();
            let _ = child.wait();
            return Err(ProcessError::Timeout(timeout));
        }
    };
    let _ = writer.join();
    let status = child.wait()?;
    if !status.success() {
        return Err(ProcessError::ExitStatus(status));
    }
    let reply = reply.trim();
    if reply.is_empty() {
        return Err(ProcessError::Protocol("no output".into()));
    }
    serde_json::from_str(reply).map_err(|e| ProcessError::Protocol(e.to_string()))
}
