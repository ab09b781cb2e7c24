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

//! `jetcarnot`: command-line front end for jet-space Carnot groups, the
//! Carnot–Carathéodory estimator and the Lipschitz-extension engine.
//!
//! Structured outputs are JSON; pairwise tables are CSV. Floats are written
//! in shortest round-trip form. Exit status: 0 on success, 1 when a check
//! or audit fails (the violating datum is printed), 2 on usage, I/O or
//! schema errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use jetcarnot::cc::{cc_lower_bound, cc_upper_bound, CcBudget};
use jetcarnot::cover::{build_cover, certify_cover, CoverParams, DomainSpec, WhitneyCover};
use jetcarnot::engine::{
    build_extension, verify_lipschitz, EngineConfig, Extension, ExtensionArtifact,
    ExtensionProblem, VerifyConfig,
};
use jetcarnot::poly::{jet, Polynomial};
use jetcarnot::suite::{self, SuiteOutcome};
use jetcarnot::{quasi_distance, JetPoint, Rational, Scalar};

#[derive(Parser, Debug)]
#[command(
    name = "jetcarnot",
    version,
    about = "Jet-space Carnot groups and Lipschitz extension"
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
    /// Input file (JSON).
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Output file or directory, depending on the verb.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Random seed; mandatory for randomized verbs.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Arithmetic profile.
    #[arg(long, global = true, value_enum)]
    profile: Option<Profile>,
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long, global = true)]
    k: Option<u32>,
    /// Control segments of the distance optimizer.
    #[arg(long, global = true)]
    segments: Option<usize>,
    /// Sample or case count (verb specific).
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Size of the dyadic grid for the cover's β.
    #[arg(long, global = true)]
    beta_grid: Option<u32>,
    /// Re-certify an existing file instead of building one.
    #[arg(long, global = true)]
    check_only: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Profile {
    Exact,
    Float,
}

#[derive(Subcommand, Debug)]
enum Verb {
    /// Product, inverse, dilation and quasi-distance of jets.
    Group {
        /// Dilation factor applied to `a`.
        #[arg(long)]
        factor: Option<f64>,
    },
    /// k-jet of a polynomial at a point.
    Jet,
    /// Lower and upper estimates of the Carnot–Carathéodory distance.
    Dist,
    /// Build and certify a Whitney-type cover, or re-certify one.
    Cover,
    /// Simplex-map checks on a procedural net.
    Charts,
    /// Build an extension from sampled jets.
    Extend {
        /// Engine configuration (JSON); defaults when absent.
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Empirical Lipschitz verification of an extension artifact.
    Verify {
        /// Finest scale exponent: pairs at distance 2^-q for q = 1..=q_max.
        #[arg(long, default_value_t = 12)]
        q_max: u32,
    },
    /// Run the invariant suites and print a pass/fail table.
    Selftest,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.verb {
        Verb::Group { factor } => group(cli, *factor),
        Verb::Jet => jet_verb(cli),
        Verb::Dist => dist(cli),
        Verb::Cover if cli.check_only => cover_check(cli),
        Verb::Cover => cover(cli),
        Verb::Charts => charts(cli),
        Verb::Extend { params } => extend(cli, params.as_deref()),
        Verb::Verify { q_max } => verify(cli, *q_max),
        Verb::Selftest => selftest(cli),
    }
}

fn seed(cli: &Cli) -> Result<u64> {
    cli.seed
        .ok_or_else(|| anyhow!("--seed is required for this verb"))
}

fn input_path(cli: &Cli) -> Result<&Path> {
    cli.input
        .as_deref()
        .ok_or_else(|| anyhow!("--input is required for this verb"))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Writes JSON to `--output`, or to stdout when absent.
fn emit<T: Serialize>(cli: &Cli, v: &T) -> Result<()> {
    let s = to_json(v)?;
    match &cli.output {
        Some(p) => write_file(p, &s),
        None => {
            print!("{s}");
            Ok(())
        }
    }
}

fn output_dir(cli: &Cli) -> Result<&Path> {
    let dir = cli
        .output
        .as_deref()
        .ok_or_else(|| anyhow!("--output <dir> is required for this verb"))?;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupInput {
    a: JetPoint<f64>,
    b: JetPoint<f64>,
}

#[derive(Serialize)]
struct ExactJet {
    x: Vec<String>,
    u: Vec<String>,
}

impl From<&JetPoint<Rational>> for ExactJet {
    fn from(a: &JetPoint<Rational>) -> Self {
        ExactJet {
            x: a.x.iter().map(|v| v.to_string()).collect(),
            u: a.u.iter().map(|v| v.to_string()).collect(),
        }
    }
}

#[derive(Serialize)]
struct GroupOutput {
    profile: &'static str,
    product: JetPoint<f64>,
    inverse_a: JetPoint<f64>,
    dilated_a: Option<JetPoint<f64>>,
    quasi_distance: f64,
    /// Exact rational coordinates (exact profile only).
    exact: Option<Vec<(String, ExactJet)>>,
}

fn group(cli: &Cli, factor: Option<f64>) -> Result<bool> {
    let inp: GroupInput = read_json(input_path(cli)?)?;
    let out = match cli.profile.unwrap_or(Profile::Exact) {
        Profile::Exact => {
            let (a, b) = (inp.a.to_rational(), inp.b.to_rational());
            let product = a.product(&b)?;
            let inverse = a.inverse();
            let dilated = factor.map(|f| a.dilate(&<Rational as Scalar>::from_f64(f)));
            let mut exact = vec![
                ("product".into(), ExactJet::from(&product)),
                ("inverse_a".into(), ExactJet::from(&inverse)),
            ];
            if let Some(d) = &dilated {
                exact.push(("dilated_a".into(), ExactJet::from(d)));
            }
            GroupOutput {
                profile: "exact",
                product: product.to_f64(),
                inverse_a: inverse.to_f64(),
                dilated_a: dilated.map(|d| d.to_f64()),
                quasi_distance: quasi_distance(&a, &b)?,
                exact: Some(exact),
            }
        }
        Profile::Float => GroupOutput {
            profile: "float",
            product: inp.a.product(&inp.b)?,
            inverse_a: inp.a.inverse(),
            dilated_a: factor.map(|f| inp.a.dilate(&f)),
            quasi_distance: quasi_distance(&inp.a, &inp.b)?,
            exact: None,
        },
    };
    emit(cli, &out)?;
    Ok(true)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JetInput {
    f: Polynomial<f64>,
    x: Vec<f64>,
}

fn jet_verb(cli: &Cli) -> Result<bool> {
    let inp: JetInput = read_json(input_path(cli)?)?;
    let k = cli.k.ok_or_else(|| anyhow!("--k is required for `jet`"))?;
    if inp.x.len() != inp.f.n() {
        bail!(
            "point has {} coordinates, polynomial has n = {}",
            inp.x.len(),
            inp.f.n()
        );
    }
    if k == 0 {
        bail!("--k must be at least 1");
    }
    emit(cli, &jet(&inp.f, &inp.x, k))?;
    Ok(true)
}

#[derive(Serialize)]
struct DistOutput {
    lower: f64,
    upper: f64,
    witness_length: f64,
    segments: usize,
    converged: bool,
    iterations: usize,
    witness: jetcarnot::cc::HorizontalControl,
}

fn dist(cli: &Cli) -> Result<bool> {
    let inp: GroupInput = read_json(input_path(cli)?)?;
    let mut budget = CcBudget::default();
    if let Some(m) = cli.segments {
        budget.segments = m;
    }
    let lower = cc_lower_bound(&inp.a, &inp.b)?;
    let est = cc_upper_bound(&inp.a, &inp.b, &budget, &[])?;
    println!(
        "lower {}  upper {}  witness length {}  segments {}",
        lower,
        est.upper,
        est.witness.length(),
        est.witness.len()
    );
    if let Some(p) = &cli.output {
        let out = DistOutput {
            lower,
            upper: est.upper,
            witness_length: est.witness.length(),
            segments: est.witness.len(),
            converged: est.converged,
            iterations: est.iterations,
            witness: est.witness,
        };
        write_file(p, &to_json(&out)?)?;
    }
    Ok(true)
}

fn print_certificate(c: &jetcarnot::cover::Certificate) {
    println!(
        "alpha {}  beta {}  mu {}  coverage {} ({} samples, {} uncovered)",
        c.alpha,
        c.beta,
        c.mu,
        if c.coverage.exact { "exact" } else { "sampled" },
        c.coverage.samples,
        c.coverage.uncovered
    );
}

fn cover(cli: &Cli) -> Result<bool> {
    let domain: DomainSpec = read_json(input_path(cli)?)?;
    let mut params = CoverParams {
        seed: seed(cli)?,
        ..CoverParams::default()
    };
    if let Some(g) = cli.beta_grid {
        params.beta_grid = g;
    }
    if let Some(s) = cli.samples {
        params.coverage_samples = s;
    }
    let c = build_cover(&domain, &params)?;
    println!("members {}", c.members.len());
    print_certificate(&c.certificate);
    emit_or_skip(cli, &c)?;
    Ok(c.certificate.coverage.uncovered == 0)
}

fn emit_or_skip<T: Serialize>(cli: &Cli, v: &T) -> Result<()> {
    if let Some(p) = &cli.output {
        write_file(p, &to_json(v)?)?;
    }
    Ok(())
}

fn cover_check(cli: &Cli) -> Result<bool> {
    let c: WhitneyCover = read_json(input_path(cli)?)?;
    c.domain.validate()?;
    let fresh = certify_cover(&c);
    print_certificate(&fresh);
    let mut ok = true;
    if fresh != c.certificate {
        println!(
            "FAIL stored certificate differs: stored (alpha {}, beta {}, mu {}), recomputed (alpha {}, beta {}, mu {})",
            c.certificate.alpha, c.certificate.beta, c.certificate.mu, fresh.alpha, fresh.beta, fresh.mu
        );
        ok = false;
    }
    if fresh.coverage.uncovered > 0 {
        println!(
            "FAIL {} sampled points are not covered",
            fresh.coverage.uncovered
        );
        ok = false;
    }
    if ok {
        println!("certificate verified");
    }
    Ok(ok)
}

fn print_table(rows: &[SuiteOutcome]) -> bool {
    println!(
        "{:<48} {:>8} {:>8} {:>12} {:>8}  status",
        "suite", "cases", "failed", "worst", "seconds"
    );
    let mut all = true;
    for r in rows {
        all &= r.passed();
        println!(
            "{:<48} {:>8} {:>8} {:>12.3e} {:>8.2}  {}",
            r.name,
            r.cases,
            r.failures,
            r.worst,
            r.seconds,
            if r.passed() { "PASS" } else { "FAIL" }
        );
        if !r.passed() && !r.detail.is_empty() {
            println!("    first violation: {}", r.detail);
        }
    }
    all
}

fn shapes(cli: &Cli) -> Vec<(usize, u32)> {
    match (cli.n, cli.k) {
        (Some(n), Some(k)) => vec![(n, k)],
        (Some(n), None) => vec![(n, 1), (n, 2)],
        (None, Some(k)) => vec![(1, k), (2, k)],
        (None, None) => vec![(1, 1), (1, 2), (2, 1), (2, 2)],
    }
}

fn charts(cli: &Cli) -> Result<bool> {
    let seed = seed(cli)?;
    let samples = cli.samples.unwrap_or(100);
    let mut rows = Vec::new();
    for (n, k) in shapes(cli) {
        rows.extend(suite::simplex_map_suite(n, k, samples, seed)?);
    }
    let ok = print_table(&rows);
    emit_or_skip(cli, &rows)?;
    Ok(ok)
}

#[derive(Serialize)]
struct ExtendReport {
    params: jetcarnot::engine::EngineParams,
    members: usize,
    nerve_dimension: usize,
    /// Largest componentwise relative difference between f̄ and f on Z.
    z_agreement: f64,
    rho_max: f64,
    build_audit: jetcarnot::engine::AuditLog,
    query_audit: jetcarnot::engine::AuditLog,
    evaluations: usize,
    failed_evaluations: Vec<String>,
}

fn grid(dom: &DomainSpec, samples: usize) -> Vec<Vec<f64>> {
    let d = dom.d;
    let per = ((samples.max(2) as f64).powf(1.0 / d as f64).ceil() as usize).max(2);
    let total = per.pow(d as u32);
    (0..total)
        .map(|mut idx| {
            (0..d)
                .map(|a| {
                    let i = idx % per;
                    idx /= per;
                    let t = i as f64 / (per - 1) as f64;
                    dom.bounds.lo[a] + t * (dom.bounds.hi[a] - dom.bounds.lo[a])
                })
                .collect()
        })
        .collect()
}

fn extend(cli: &Cli, params: Option<&Path>) -> Result<bool> {
    let problem: ExtensionProblem = read_json(input_path(cli)?)?;
    let mut config: EngineConfig = match params {
        Some(p) => read_json(p)?,
        None => EngineConfig::default(),
    };
    config.seed = seed(cli)?;
    if let Some(g) = cli.beta_grid {
        config.cover.beta_grid = g;
    }
    if let Some(m) = cli.segments {
        config.cc_budget.segments = m;
    }
    let dir = output_dir(cli)?;
    let start = Instant::now();
    let ext = match build_extension(&problem, &config) {
        Ok(e) => e,
        Err(e @ jetcarnot::Error::Refused(_)) => {
            println!("REFUSED {e}");
            write_file(&dir.join("refusal.txt"), &format!("{e}\n"))?;
            return Ok(false);
        }
        Err(e @ (jetcarnot::Error::Audit(_) | jetcarnot::Error::Certification(_))) => {
            println!("FAIL {e}");
            return Ok(false);
        }
        Err(e) => return Err(e.into()),
    };
    let p = ext.params();
    println!(
        "alpha {}  beta {}  mu {}  tau {}  r {}  eps' {}  eps {}  lambda {}  members {}  build {:.2}s",
        p.alpha,
        p.beta,
        p.mu,
        p.tau,
        p.r,
        p.eps_prime,
        p.eps,
        p.lambda,
        ext.artifact.cover.members.len(),
        start.elapsed().as_secs_f64()
    );
    let mut z_agreement: f64 = 0.0;
    for s in &problem.samples {
        z_agreement = z_agreement.max(ext.evaluate(&s.z)?.max_rel_diff(&s.value));
    }
    let mut wtr = csv::Writer::from_path(dir.join("eval.csv")).context("writing eval.csv")?;
    let n = problem.n();
    let k = problem.k();
    let mut header: Vec<String> = (0..problem.domain.d).map(|a| format!("x{a}")).collect();
    header.extend((0..n).map(|a| format!("fx{a}")));
    let l = jetcarnot::multiindex::layout(n, k);
    header.extend(l.indices.iter().map(|i| {
        format!("u{:?}", i.0)
            .replace([' ', '[', ']'], "")
            .replace(',', "_")
    }));
    wtr.write_record(&header)?;
    let pts = grid(&problem.domain, cli.samples.unwrap_or(257));
    let mut failed = Vec::new();
    for x in &pts {
        match ext.evaluate(x) {
            Ok(v) => {
                let row: Vec<f64> = x.iter().chain(&v.x).chain(&v.u).copied().collect();
                wtr.serialize(row)?;
            }
            Err(e) => failed.push(format!("{x:?}: {e}")),
        }
    }
    wtr.flush()?;
    let report = ExtendReport {
        params: p.clone(),
        members: ext.artifact.cover.members.len(),
        nerve_dimension: ext.artifact.nerve.max_dimension,
        z_agreement,
        rho_max: ext.rho_max()?,
        build_audit: ext.artifact.build_audit.clone(),
        query_audit: ext.query_audit(),
        evaluations: pts.len(),
        failed_evaluations: failed.clone(),
    };
    write_file(&dir.join("artifact.json"), &to_json(&ext.artifact)?)?;
    write_file(&dir.join("report.json"), &to_json(&report)?)?;
    let audits = report.build_audit.all_pass() && report.query_audit.all_pass();
    print_audits(&report.build_audit, &report.query_audit);
    println!("f̄ vs f on Z: {z_agreement}");
    for f in &failed {
        println!("FAIL evaluation {f}");
    }
    Ok(audits && failed.is_empty() && z_agreement == 0.0)
}

fn print_audits(build: &jetcarnot::engine::AuditLog, query: &jetcarnot::engine::AuditLog) {
    for (phase, log) in [("build", build), ("query", query)] {
        for (name, c) in &log.checks {
            println!(
                "{} audit {:<58} checked {:>7} failed {:>3} worst lhs/rhs {:.6}",
                phase, name, c.checked, c.failed, c.worst_ratio
            );
        }
    }
}

fn verify(cli: &Cli, q_max: u32) -> Result<bool> {
    let artifact: ExtensionArtifact = read_json(input_path(cli)?)?;
    let ext = Extension::from_artifact(artifact);
    let cfg = VerifyConfig {
        seed: seed(cli)?,
        pairs_per_scale: cli
            .samples
            .unwrap_or(VerifyConfig::default().pairs_per_scale),
        q_max,
    };
    let dir = output_dir(cli)?;
    let rep = verify_lipschitz(&ext, &cfg)?;
    let mut wtr =
        csv::Writer::from_path(dir.join("lipschitz.csv")).context("writing lipschitz.csv")?;
    for row in &rep.per_scale {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    write_file(&dir.join("report.json"), &to_json(&rep)?)?;
    for row in &rep.per_scale {
        println!(
            "q {:>2}  pairs {:>4}  max ratio {:.6}  mean ratio {:.6}",
            row.q, row.pairs, row.max_ratio, row.mean_ratio
        );
    }
    print_audits(&rep.build_audit, &rep.query_audit);
    println!(
        "lambda {}  max ratio {}  constant {}  rho_max {}  growth {}",
        rep.lambda, rep.max_ratio, rep.constant, rep.rho_max, rep.growth_detected
    );
    Ok(rep.audits_pass() && !rep.growth_detected)
}

fn selftest(cli: &Cli) -> Result<bool> {
    let seed = seed(cli)?;
    let profile = cli.profile;
    let mut rows = Vec::new();
    for (i, (n, k)) in shapes(cli).into_iter().enumerate() {
        let s = seed.wrapping_add(1000 * i as u64);
        if profile != Some(Profile::Float) {
            let cases = cli.samples.unwrap_or(1000);
            rows.push(suite::algebra_suite(n, k, cases, s));
            rows.push(suite::jet_calculus_suite(n, k, cases.min(1000), s + 1));
        }
        if profile != Some(Profile::Exact) {
            let cases = cli.samples.unwrap_or(200);
            let mut budget = CcBudget::default();
            if let Some(m) = cli.segments {
                budget.segments = m;
            }
            rows.push(suite::flow_suite(n, k, cases, 1e-9, s + 2));
            rows.extend(suite::cc_suite(
                n,
                k,
                cases.min(100),
                cases.min(100),
                cases.min(20),
                &budget,
                s + 3,
            ));
            rows.extend(suite::simplex_map_suite(n, k, cases.min(100), s + 4)?);
        }
    }
    let ok = print_table(&rows);
    emit_or_skip(cli, &rows)?;
    println!(
        "{}",
        if ok {
            "all suites passed"
        } else {
            "some suites FAILED"
        }
    );
    Ok(ok)
}
