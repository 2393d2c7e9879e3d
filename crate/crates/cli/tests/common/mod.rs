#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dnascape::dp::parse_dp;

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dnascape"))
}

pub fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

/// Runs and insists on exit status 0.
pub fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "dnascape {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn sample_log() -> PathBuf {
    repo_root().join("fixtures/logs/first_step_sample.log")
}

/// A log of random single-pair walks on a 12-base strand, with more than
/// `min_states` distinct structures.
pub fn walk_log(min_states: usize, seed: u64) -> String {
    let n = 12;
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = move |m: usize| {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 33) % m as u64) as usize
    };
    let mut seen = std::collections::HashSet::new();
    let mut out = String::from("GCGCATATGCGC\n");
    let mut traj = 0;
    while seen.len() < min_states {
        if traj > 0 {
            out.push('\n');
        }
        let mut table: Vec<Option<usize>> = vec![None; n];
        let mut t = 0.0;
        for _ in 0..60 {
            let dp: String = (0..n)
                .map(|i| match table[i] {
                    None => '.',
                    Some(j) if j > i => '(',
                    Some(_) => ')',
                })
                .collect();
            parse_dp(&dp, &[n]).unwrap();
            let pairs = table.iter().filter(|p| p.is_some()).count() / 2;
            out.push_str(&format!("[{traj}] {dp} | {t:.7} | {:.3}\n", -1.25 * pairs as f64 + 0.1 * (dp.len() % 3) as f64));
            seen.insert(dp);
            t += 0.01 * (1 + next(50)) as f64;
            let i = next(n);
            match table[i] {
                Some(j) => {
                    table[i] = None;
                    table[j] = None;
                }
                None => {
                    let j = next(n);
                    let (a, b) = (i.min(j), i.max(j));
                    if b > a + 3
                        && table[a].is_none()
                        && table[b].is_none()
                        && (a + 1..b).all(|m| table[m].map_or(true, |p| p > a && p < b))
                    {
                        table[a] = Some(b);
                        table[b] = Some(a);
                    }
                }
            }
        }
        traj += 1;
    }
    out
}
