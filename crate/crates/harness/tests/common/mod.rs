//! Shared helpers for the CLI-level integration tests.

// Each test target compiles its own copy; not every target uses every helper.
#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn harness_exe() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_benchwatch"))
}

pub struct CliResult {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn run_cli(cwd: &Path, args: &[&str]) -> CliResult {
    let Output { status, stdout, stderr } = Command::new(harness_exe())
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn benchwatch");
    CliResult {
        code: status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&stdout).into_owned(),
        stderr: String::from_utf8_lossy(&stderr).into_owned(),
    }
}

/// Serves `requests` HTTP requests with the given status, collecting the
/// request bodies.
pub fn http_server(
    status: u16,
    requests: usize,
) -> (String, std::thread::JoinHandle<Vec<String>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let handle = std::thread::spawn(move || {
        let mut bodies = Vec::new();
        for _ in 0..requests {
            let Ok((stream, _)) = listener.accept() else { break };
            let mut reader = BufReader::new(stream);
            let mut content_length = 0usize;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).is_err() || line.trim_end().is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    content_length = v.trim().parse().unwrap_or(0);
                }
            }
            let mut body = vec![0u8; content_length];
            let _ = reader.read_exact(&mut body);
            let mut stream = reader.into_inner();
            let response = format!("HTTP/1.1 {status} X\r\ncontent-length: 0\r\n\r\n");
            let _ = stream.write_all(response.as_bytes());
            bodies.push(String::from_utf8_lossy(&body).into_owned());
        }
        bodies
    });
    (format!("http://{addr}/issues"), handle)
}
