#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::time::{Duration, Instant};

use serde_json::Value;

pub const SECRET_VAR: &str = "PROVCUBE_TEST_SECRET";

pub fn graphs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../graphs")
}

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_provcube"))
}

pub fn provcube(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn provcube")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn copy_graph(name: &str, dir: &Path) -> PathBuf {
    let to = dir.join(name);
    std::fs::copy(graphs_dir().join(name), &to).unwrap();
    to
}

pub struct Server {
    pub child: Child,
    pub base: String,
    pub first_line: String,
}

impl Server {
    pub fn spawn(data_dir: &Path, extra: &[&str]) -> Result<Server, Output> {
        let mut child = bin()
            .args(["serve", "--port", "0", "--secret-env", SECRET_VAR])
            .args(extra)
            .env(SECRET_VAR, "serve-test-secret")
            .env("PROVCUBE_DATA_DIR", data_dir)
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .expect("spawn provcube serve");
        let mut stdout = BufReader::new(child.stdout.take().unwrap());
        let mut line = String::new();
        stdout.read_line(&mut line).unwrap();
        if !line.starts_with("listening on ") {
            let out = child.wait_with_output().unwrap();
            return Err(out);
        }
        // keep draining so the child never blocks on a full pipe
        std::thread::spawn(move || for _ in stdout.lines() {});
        let base = line.trim().trim_start_matches("listening on ").to_string();
        Ok(Server {
            child,
            base,
            first_line: line,
        })
    }

    pub fn port(&self) -> u16 {
        self.base.rsplit(':').next().unwrap().parse().unwrap()
    }

    /// Send SIGINT and wait for a clean exit.
    pub fn interrupt(mut self) -> i32 {
        let pid = self.child.id().to_string();
        Command::new("kill").args(["-INT", &pid]).status().unwrap();
        let deadline = Instant::now() + Duration::from_secs(10);
        loop {
            if let Some(status) = self.child.try_wait().unwrap() {
                return status.code().unwrap_or(-1);
            }
            assert!(Instant::now() < deadline, "server ignored SIGINT");
            std::thread::sleep(Duration::from_millis(20));
        }
    }

    pub fn submit(&self, client: &reqwest::blocking::Client, graph: &[u8]) -> String {
        let resp = client.post(format!("{}/jobs", self.base)).body(graph.to_vec()).send().unwrap();
        assert_eq!(resp.status(), 201);
        let id: Value = resp.json().unwrap();
        let id = id["id"].as_str().unwrap().to_string();
        let started = client.post(format!("{}/jobs/{id}/results", self.base)).send().unwrap();
        assert_eq!(started.status(), 202);
        id
    }

    pub fn wait(&self, client: &reqwest::blocking::Client, id: &str) -> Value {
        let deadline = Instant::now() + Duration::from_secs(20);
        loop {
            let job: Value = client.get(format!("{}/jobs/{id}", self.base)).send().unwrap().json().unwrap();
            if job["status"] == "finished" || job["status"] == "error" {
                return job;
            }
            assert!(Instant::now() < deadline, "job {id} never finished");
            std::thread::sleep(Duration::from_millis(10));
        }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
