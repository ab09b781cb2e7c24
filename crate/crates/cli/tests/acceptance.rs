// Copyright 2026 The jetcarnot Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Acceptance suite: runs every acceptance criterion at its stated size and
//! tolerance and prints one PASS/FAIL line per criterion. Criteria that
//! concern files (cover certification, extension artifacts, determinism,
//! refusal) drive the `jetcarnot` binary; the rest call the library.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode, Output};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use jetcarnot::cc::CcBudget;
use jetcarnot::cover::{BoxRegion, CoverParams, DomainSpec, WhitneyCover, ZSet};
use jetcarnot::engine::{
    build_extension, verify_lipschitz, EngineConfig, ExtensionProblem, LipschitzReport,
    VerifyConfig, ZSample,
};
use jetcarnot::poly::jet;
use jetcarnot::suite::{self, SuiteOutcome};

const SHAPES: [(usize, u32); 4] = [(1, 1), (1, 2), (2, 1), (2, 2)];

struct Verdict {
    pass: bool,
    summary: String,
}

fn verdict(pass: bool, summary: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        summary: summary.into(),
    }
}

fn suites_verdict(rows: &[SuiteOutcome]) -> Verdict {
    let cases: usize = rows.iter().map(|r| r.cases).sum();
    let failures: usize = rows.iter().map(|r| r.failures).sum();
    // chart Lipschitz estimates are reported separately, not as discrepancies
    let worst = rows
        .iter()
        .filter(|r| !r.name.starts_with("finite chart"))
        .map(|r| r.worst)
        .fold(0.0, f64::max);
    let mut s = format!("{cases} cases, {failures} failures, worst discrepancy {worst:.3e}");
    for r in rows.iter().filter(|r| !r.passed()) {
        s.push_str(&format!("; {} failed: {}", r.name, r.detail));
    }
    verdict(failures == 0 && rows.iter().all(SuiteOutcome::passed), s)
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_jetcarnot")
}

fn run_cli(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("jetcarnot runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn write_json<T: serde::Serialize>(path: &Path, v: &T) {
    fs::write(path, serde_json::to_string_pretty(v).expect("serializable"))
        .expect("writable temp dir");
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let rows: Vec<SuiteOutcome> = SHAPES
        .iter()
        .enumerate()
        .map(|(i, &(n, k))| suite::algebra_suite(n, k, 10_000, 100 + i as u64))
        .collect();
    let secs = start.elapsed().as_secs_f64();
    let v = suites_verdict(&rows);
    verdict(
        v.pass && secs < 60.0,
        format!("{}; {secs:.1} s (limit 60 s)", v.summary),
    )
}

fn criterion_2() -> Verdict {
    let rows: Vec<SuiteOutcome> = SHAPES
        .iter()
        .enumerate()
        .map(|(i, &(n, k))| suite::jet_calculus_suite(n, k, 1000, 200 + i as u64))
        .collect();
    suites_verdict(&rows)
}

fn criterion_3() -> Verdict {
    let rows: Vec<SuiteOutcome> = SHAPES
        .iter()
        .enumerate()
        .map(|(i, &(n, k))| suite::flow_suite(n, k, 1000, 1e-9, 300 + i as u64))
        .collect();
    suites_verdict(&rows)
}

fn criterion_4() -> Verdict {
    // 10³ pairs for (a) and 10² for (d) in total, spread over the four shapes
    let budget = CcBudget::default();
    let mut rows = Vec::new();
    for (i, &(n, k)) in SHAPES.iter().enumerate() {
        rows.extend(suite::cc_suite(n, k, 250, 100, 25, &budget, 400 + i as u64));
    }
    suites_verdict(&rows)
}

fn criterion_5(dir: &Path) -> (Verdict, Vec<Vec<u8>>) {
    let dom = DomainSpec {
        d: 1,
        bounds: BoxRegion {
            lo: vec![0.0],
            hi: vec![1.0],
        },
        z: ZSet::Points {
            points: vec![vec![0.0]],
        },
    };
    let dom_path = dir.join("domain.json");
    write_json(&dom_path, &dom);
    let cover_path = dir.join("cover.json");
    let out = run_cli(&[
        "cover",
        "--seed",
        "5",
        "--input",
        path_str(&dom_path),
        "--output",
        path_str(&cover_path),
    ]);
    if !out.status.success() {
        return (
            verdict(
                false,
                format!(
                    "cover build failed: {}",
                    String::from_utf8_lossy(&out.stdout)
                ),
            ),
            vec![],
        );
    }
    let bytes = fs::read(&cover_path).expect("cover written");
    let cover: WhitneyCover = serde_json::from_slice(&bytes).expect("cover parses");
    let c = &cover.certificate;
    let check = run_cli(&["cover", "--check-only", "--input", path_str(&cover_path)]);
    let pass = c.alpha <= 1.0
        && c.beta >= 0.25
        && c.mu == 2
        && c.coverage.exact
        && c.coverage.uncovered == 0
        && check.status.success();
    (
        verdict(
            pass,
            format!(
                "alpha {}, beta {}, mu {}, coverage {} with {} uncovered, re-certification {}",
                c.alpha,
                c.beta,
                c.mu,
                if c.coverage.exact { "exact" } else { "sampled" },
                c.coverage.uncovered,
                if check.status.success() {
                    "verified"
                } else {
                    "FAILED"
                }
            ),
        ),
        vec![bytes],
    )
}

fn criterion_6() -> (Verdict, Vec<u8>) {
    let mut rows = Vec::new();
    for (i, &(n, k)) in SHAPES.iter().enumerate() {
        match suite::simplex_map_suite(n, k, 100, 600 + i as u64) {
            Ok(r) => rows.extend(r),
            Err(e) => return (verdict(false, format!("(n={n}, k={k}): {e}")), vec![]),
        }
    }
    let rho: Vec<String> = rows
        .iter()
        .filter(|r| r.name.starts_with("finite chart"))
        .map(|r| format!("{:.3e}", r.worst))
        .collect();
    let mut v = suites_verdict(&rows);
    v.summary
        .push_str(&format!("; max ϱ per shape [{}]", rho.join(", ")));
    // timing is not part of the deterministic record
    let record: Vec<(String, usize, usize, f64)> = rows
        .iter()
        .map(|r| (r.name.clone(), r.cases, r.failures, r.worst))
        .collect();
    (v, serde_json::to_vec(&record).expect("serializable"))
}

/// 17 sorted points of `[0, 1]` with irregular gaps (at least 2^-10).
fn irregular_points(seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut p: Vec<f64> = (0..17).map(|_| rng.gen_range(0.0..1.0)).collect();
        p.sort_by(f64::total_cmp);
        if p.windows(2).all(|w| w[1] - w[0] >= 1.0 / 1024.0) {
            return p;
        }
    }
}

fn end_to_end_problem(k: u32, zs: &[f64], seed: u64) -> ExtensionProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = suite::random_float_poly(&mut rng, 1, k + 2);
    ExtensionProblem {
        domain: DomainSpec {
            d: 1,
            bounds: BoxRegion {
                lo: vec![0.0],
                hi: vec![1.0],
            },
            z: ZSet::Points {
                points: zs.iter().map(|z| vec![*z]).collect(),
            },
        },
        samples: zs
            .iter()
            .map(|z| ZSample {
                z: vec![*z],
                value: jet(&p, &[*z], k),
            })
            .collect(),
        lambda: None,
    }
}

fn end_to_end_instances() -> Vec<(String, ExtensionProblem)> {
    let sets: [(&str, Vec<f64>); 2] = [
        ("Z={0,1}", vec![0.0, 1.0]),
        ("Z=17 irregular", irregular_points(77)),
    ];
    let mut out = Vec::new();
    for k in [1u32, 2] {
        for (name, zs) in &sets {
            for i in 0..5u64 {
                let seed = 700 + 10 * u64::from(k) + i;
                out.push((
                    format!("k={k} {name} poly#{i}"),
                    end_to_end_problem(k, zs, seed),
                ));
            }
        }
    }
    out
}

fn criterion_7() -> (Verdict, Vec<u8>) {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut constants = Vec::new();
    let mut record = Vec::new();
    for (name, prob) in end_to_end_instances() {
        let t0 = Instant::now();
        let ext = match build_extension(&prob, &EngineConfig::default()) {
            Ok(e) => e,
            Err(e) => {
                failures.push(format!("{name}: build failed: {e}"));
                continue;
            }
        };
        for s in &prob.samples {
            match ext.evaluate(&s.z) {
                Ok(v) if v == s.value => {}
                Ok(v) => failures.push(format!("{name}: f̄({:?}) = {v:?} differs from f", s.z)),
                Err(e) => failures.push(format!("{name}: evaluation at {:?} failed: {e}", s.z)),
            }
        }
        let rep: LipschitzReport = match verify_lipschitz(&ext, &VerifyConfig::default()) {
            Ok(r) => r,
            Err(e) => {
                failures.push(format!("{name}: verification failed: {e}"));
                continue;
            }
        };
        if !rep.audits_pass() {
            let bad: Vec<&String> = rep
                .build_audit
                .checks
                .iter()
                .chain(&rep.query_audit.checks)
                .filter(|(_, c)| c.failed > 0)
                .map(|(n, _)| n)
                .collect();
            failures.push(format!("{name}: audits failed: {bad:?}"));
        }
        if rep.growth_detected {
            let tail: Vec<f64> = rep
                .per_scale
                .iter()
                .rev()
                .take(4)
                .map(|r| r.max_ratio)
                .collect();
            failures.push(format!(
                "{name}: ratio growth over the last scales {tail:?}"
            ));
        }
        let worst_q = rep
            .per_scale
            .iter()
            .max_by(|a, b| a.max_ratio.total_cmp(&b.max_ratio))
            .map_or(0, |r| r.q);
        println!(
            "    {name}: λ {:.4}, constant {:.4} (worst at q = {worst_q}), {:.1} s",
            rep.lambda,
            rep.constant,
            t0.elapsed().as_secs_f64()
        );
        constants.push(rep.constant);
        record.push(serde_json::to_string(&(&ext.artifact, &rep)).expect("serializable"));
    }
    let secs = start.elapsed().as_secs_f64();
    let worst = constants.iter().copied().fold(0.0, f64::max);
    let mut s = format!(
        "{} instances, Lipschitz constant (max ratio / λ) ≤ {worst:.3}, {secs:.1} s (limit 600 s)",
        constants.len()
    );
    for f in failures.iter().take(5) {
        s.push_str(&format!("; {f}"));
    }
    (
        verdict(
            failures.is_empty() && secs < 600.0 && constants.len() == 20,
            s,
        ),
        record.join("\n").into_bytes(),
    )
}

fn extend_and_verify(dir: &Path, problem: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let ext_dir = dir.join("ext");
    let out = run_cli(&[
        "extend",
        "--seed",
        "8",
        "--input",
        path_str(problem),
        "--output",
        path_str(&ext_dir),
    ]);
    if !out.status.success() {
        return Err(format!(
            "extend failed: {}",
            String::from_utf8_lossy(&out.stdout)
        ));
    }
    let artifact = ext_dir.join("artifact.json");
    let ver_dir = dir.join("verify");
    let out = run_cli(&[
        "verify",
        "--seed",
        "8",
        "--input",
        path_str(&artifact),
        "--output",
        path_str(&ver_dir),
    ]);
    if !out.status.success() {
        return Err(format!(
            "verify failed: {}",
            String::from_utf8_lossy(&out.stdout)
        ));
    }
    let mut files = Vec::new();
    for (d, f) in [
        (&ext_dir, "artifact.json"),
        (&ext_dir, "report.json"),
        (&ext_dir, "eval.csv"),
        (&ver_dir, "report.json"),
        (&ver_dir, "lipschitz.csv"),
    ] {
        files.push((
            format!("{}/{f}", d.file_name().unwrap().to_string_lossy()),
            fs::read(d.join(f)).map_err(|e| e.to_string())?,
        ));
    }
    Ok(files)
}

fn criterion_8(tmp: &Path, first: &[Vec<u8>]) -> Verdict {
    let mut mismatches = Vec::new();
    let mut compared = 0;
    // criterion 5 through the binary, again
    let again = tmp.join("c5-again");
    fs::create_dir_all(&again).unwrap();
    let (_, files) = criterion_5(&again);
    compared += 1;
    if files.first() != first.first() {
        mismatches.push("cover.json".to_string());
    }
    // criterion 6 twice in process
    let (_, a) = criterion_6();
    compared += 1;
    if Some(&a) != first.get(1) {
        mismatches.push("simplex-map record".to_string());
    }
    // criterion 7 through the binary for one instance per k, twice
    for (idx, (name, prob)) in end_to_end_instances()
        .into_iter()
        .enumerate()
        .filter(|(i, _)| [0, 15].contains(i))
    {
        let p = tmp.join(format!("problem{idx}.json"));
        write_json(&p, &prob);
        let runs: Vec<_> = (0..2)
            .map(|r| {
                let d = tmp.join(format!("run{idx}-{r}"));
                extend_and_verify(&d, &p)
            })
            .collect();
        match (&runs[0], &runs[1]) {
            (Ok(x), Ok(y)) => {
                for ((fname, bx), (_, by)) in x.iter().zip(y) {
                    compared += 1;
                    if bx != by {
                        mismatches.push(format!("{name}: {fname}"));
                    }
                }
            }
            (Err(e), _) | (_, Err(e)) => mismatches.push(format!("{name}: {e}")),
        }
    }
    // criterion 7 in process, again
    let (_, rec) = criterion_7();
    compared += 1;
    if Some(&rec) != first.get(2) {
        mismatches.push("end-to-end artifacts and reports".to_string());
    }
    verdict(
        mismatches.is_empty(),
        format!(
            "{compared} outputs compared, {} differ {mismatches:?}",
            mismatches.len()
        ),
    )
}

fn criterion_9(dir: &Path) -> Verdict {
    let prob = ExtensionProblem {
        domain: DomainSpec {
            d: 2,
            bounds: BoxRegion {
                lo: vec![0.0, 0.0],
                hi: vec![1.0, 1.0],
            },
            z: ZSet::Points {
                points: vec![vec![0.5, 0.5]],
            },
        },
        samples: vec![ZSample {
            z: vec![0.5, 0.5],
            value: jetcarnot::JetPoint::new(2, 1, vec![0.5, 0.5], vec![0.0; 3]).expect("shape"),
        }],
        lambda: Some(1.0),
    };
    let config = EngineConfig {
        cover: CoverParams {
            delta_min: 1.0 / 32.0,
            coverage_samples: 400,
            ..CoverParams::default()
        },
        ..EngineConfig::default()
    };
    let (p, c) = (dir.join("planar.json"), dir.join("planar-config.json"));
    write_json(&p, &prob);
    write_json(&c, &config);
    let out_dir = dir.join("planar-out");
    let out = run_cli(&[
        "extend",
        "--seed",
        "9",
        "--input",
        path_str(&p),
        "--params",
        path_str(&c),
        "--output",
        path_str(&out_dir),
    ]);
    let stdout = String::from_utf8_lossy(&out.stdout).to_string();
    let refused = out.status.code() == Some(1)
        && stdout.contains("REFUSED")
        && stdout.contains("multiplicity");
    let silent = out_dir.join("artifact.json").exists();
    verdict(
        refused && !silent,
        format!(
            "exit {:?}, no artifact written: {}, diagnostic: {}",
            out.status.code(),
            !silent,
            stdout.trim()
        ),
    )
}

/// Criterion numbers given on the command line select a subset; none runs
/// everything.
fn selected() -> Vec<usize> {
    let picked: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    if picked.is_empty() {
        (1..=9).collect()
    } else {
        picked
    }
}

fn main() -> ExitCode {
    let dir = tempfile::tempdir().expect("temp dir");
    let tmp: PathBuf = dir.path().to_path_buf();
    let want = selected();
    let mut results: Vec<(usize, bool)> = Vec::new();
    let mut report = |i: usize, v: Verdict, secs: f64| {
        println!(
            "criterion {i}: {} ({secs:.1} s) — {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.summary
        );
        results.push((i, v.pass));
    };
    // first-run outputs of criteria 5, 6 and 7 for the determinism check
    let mut first: Vec<Vec<u8>> = Vec::new();
    for i in 1..=9 {
        let needed_by_8 = want.contains(&8) && (5..=7).contains(&i);
        if !want.contains(&i) && !needed_by_8 {
            continue;
        }
        let start = Instant::now();
        let v = match i {
            1 => criterion_1(),
            2 => criterion_2(),
            3 => criterion_3(),
            4 => criterion_4(),
            5 => {
                let c5 = tmp.join("c5");
                fs::create_dir_all(&c5).expect("temp dir");
                let (v, files) = criterion_5(&c5);
                first.push(files.into_iter().next().unwrap_or_default());
                v
            }
            6 => {
                let (v, rec) = criterion_6();
                first.push(rec);
                v
            }
            7 => {
                let (v, rec) = criterion_7();
                first.push(rec);
                v
            }
            8 => criterion_8(&tmp, &first),
            _ => criterion_9(&tmp),
        };
        if want.contains(&i) {
            report(i, v, start.elapsed().as_secs_f64());
        }
    }
    let failed: Vec<usize> = results.iter().filter(|r| !r.1).map(|r| r.0).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria PASS", results.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAIL on criteria {failed:?}");
        ExitCode::FAILURE
    }
}
