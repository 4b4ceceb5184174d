//! Command implementations: thin wrappers that wire the core library to
//! files, CSV reports, and exit codes.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Subcommand;
use rayon::prelude::*;

use permch_core::cells::CellPartition;
use permch_core::channel::{brute_force_kernel, qncc_kernel, Dmc, QnccKernel};
use permch_core::compositions::Lattice;
use permch_core::idcode::{
    build_reliable_code, build_set_system, converse_tv_bound, deterministic_id_code,
    eval_id_errors, mc_eval_id_errors, stochastic_id_code,
};
use permch_core::lattice_dist::LatticeDist;
use permch_core::multinomial::{binomial_peak, binomial_successive_diff, Multinomial};
use permch_core::quantizer::{
    distortion_bound, quantize_binary, quantize_qary, quantize_with_params, QuantizerParams,
    DEFAULT_C4_PRIME,
};
use permch_core::rng;
use permch_core::verify::{
    check_distance_scaling, check_single_shift, check_weight_transfer, random_lattice_dist,
    resolvability_collision_demo,
};

use crate::channel_spec::{parse_dmc, parse_n_grid};
use crate::formats::{
    fmt_g12, read_json, write_json, CodeJson, DistJson, ErrorsJson, KernelJson, MTypeJson,
};
use crate::CommonOpts;

pub(crate) fn cmd_kernel(common: &CommonOpts, n: u32, out: &Path, oracle: bool) -> Result<()> {
    let dmc = parse_dmc(&common.u, common.q)?;
    let cap = common.kernel_cap();
    // Rows are independent; build them on the worker pool and assemble.
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.jobs)
        .build()
        .context("cannot build thread pool")?;
    let lattice = Lattice::new(common.q, n, cap)
        .map_err(|e| anyhow::anyhow!("kernel: {e}"))?;
    let inputs: Vec<_> = lattice.iter().collect();
    let rows = pool.install(|| {
        inputs
            .par_iter()
            .map(|t| permch_core::channel::kernel_row(&dmc, t, cap))
            .collect::<permch_core::Result<Vec<_>>>()
    });
    let rows = rows.map_err(|e| anyhow::anyhow!("kernel: {e}"))?;
    let kernel = QnccKernel::from_rows(lattice, rows)
        .map_err(|e| anyhow::anyhow!("kernel: {e}"))?;
    if oracle {
        let brute = brute_force_kernel(&dmc, n, 1_000_000)
            .map_err(|e| anyhow::anyhow!("oracle: {e}"))?;
        let mut max_abs = 0.0f64;
        for r in 0..kernel.num_rows() {
            for (a, b) in kernel.row(r).iter().zip(brute.row(r)) {
                max_abs = max_abs.max((a - b).abs());
            }
        }
        println!("oracle max-abs deviation: {}", fmt_g12(max_abs));
        if max_abs > 1e-12 {
            bail!("kernel disagrees with the brute-force oracle");
        }
    }
    let config = format!("kernel --q {} --n {n} --U {} --kernel-cap {cap}", common.q, common.u);
    write_json(out, &config, &KernelJson::from_kernel(&kernel))?;
    println!(
        "kernel: {} rows over {} compositions -> {}",
        kernel.num_rows(),
        kernel.num_rows(),
        out.display()
    );
    Ok(())
}

pub(crate) struct QuantizeOpts {
    pub q: usize,
    pub n: u32,
    pub m: Option<u64>,
    pub a: Option<u32>,
    pub c: Option<f64>,
    pub input: PathBuf,
    pub out: PathBuf,
    pub report: Option<PathBuf>,
    pub order_out: Option<PathBuf>,
    pub u: Option<String>,
    pub kernel_cap: u64,
}

enum QuantizeInput {
    Weights(Vec<f64>),
    Dist(LatticeDist),
}

fn read_quantize_input(path: &Path, q: usize, n: u32) -> Result<QuantizeInput> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("cannot parse {}", path.display()))?;
    if value.is_array() {
        if q != 2 {
            bail!("bare mass arrays are the binary (q = 2) weight form");
        }
        let masses: Vec<f64> = serde_json::from_value(value)?;
        if masses.len() > n as usize + 1 {
            bail!("mass array longer than n + 1");
        }
        let mut padded = masses;
        padded.resize(n as usize + 1, 0.0);
        return Ok(QuantizeInput::Weights(padded));
    }
    let dist: DistJson = serde_json::from_value(value)?;
    Ok(QuantizeInput::Dist(dist.to_dist(q)?))
}

fn weights_to_dist(weights: &[f64], n: u32) -> Result<LatticeDist> {
    LatticeDist::from_entries(
        2,
        weights
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > 0.0)
            .map(|(w, &m)| (vec![n - w as u32, w as u32], m)),
    )
    .map_err(|e| anyhow::anyhow!("invalid weight distribution: {e}"))
}

pub(crate) fn cmd_quantize(opts: QuantizeOpts) -> Result<()> {
    let input = read_quantize_input(&opts.input, opts.q, opts.n)?;
    let kernel = match &opts.u {
        Some(spec) => {
            let dmc = parse_dmc(spec, opts.q)?;
            Some(qncc_kernel(&dmc, opts.n, opts.kernel_cap).map_err(|e| anyhow::anyhow!("{e}"))?)
        }
        None => None,
    };
    let mut config = format!("quantize --q {} --n {}", opts.q, opts.n);
    if let Some(m) = opts.m {
        config += &format!(" --M {m}");
    }
    if let Some(a) = opts.a {
        config += &format!(" --a {a}");
    }
    if let Some(c) = opts.c {
        config += &format!(" --c {c}");
    }
    if let Some(u) = &opts.u {
        config += &format!(" --U {u}");
    }
    let lattice =
        Lattice::new(opts.q, opts.n, permch_core::DEFAULT_LATTICE_CAP).map_err(|e| anyhow::anyhow!("{e}"))?;

    let mut report_rows: Vec<(String, String)> = Vec::new();
    match (&input, opts.m, opts.c) {
        (QuantizeInput::Weights(weights), Some(m), None) if opts.a.is_none() => {
            // One-dimensional floor-and-carry over the weight axis.
            let numer =
                quantize_binary(weights, m).map_err(|e| anyhow::anyhow!("quantize: {e}"))?;
            let masses: Vec<f64> = numer.iter().map(|&k| k as f64 / m as f64).collect();
            #[derive(serde::Serialize)]
            struct BinaryOut {
                #[serde(rename = "M")]
                m: u64,
                masses: Vec<f64>,
                numerators: Vec<u64>,
            }
            write_json(
                &opts.out,
                &config,
                &BinaryOut {
                    m,
                    masses: masses.clone(),
                    numerators: numer.clone(),
                },
            )?;
            if opts.order_out.is_some() {
                bail!("--order-out applies to the two-stage scheme (--a or --c)");
            }
            report_rows.push(("algorithm".into(), "binary-carry".into()));
            report_rows.push(("M".into(), m.to_string()));
            if let Some(kernel) = &kernel {
                let in_dist = weights_to_dist(weights, opts.n)?;
                let out_dist = weights_to_dist(&masses, opts.n)?;
                let a = kernel.apply_dense(&in_dist).map_err(|e| anyhow::anyhow!("{e}"))?;
                let b = kernel.apply_dense(&out_dist).map_err(|e| anyhow::anyhow!("{e}"))?;
                let tv = permch_core::channel::tv_dense(&a, &b);
                report_rows.push(("measured_tv".into(), fmt_g12(tv)));
            }
            println!(
                "quantized to M-type: [{}]",
                masses
                    .iter()
                    .map(|&x| fmt_g12(x))
                    .collect::<Vec<_>>()
                    .join(", ")
            );
        }
        (_, m_opt, c_opt) => {
            let dist = match &input {
                QuantizeInput::Weights(w) => weights_to_dist(w, opts.n)?,
                QuantizeInput::Dist(d) => d.clone(),
            };
            let outcome = if let Some(c) = c_opt {
                if m_opt.is_some() || opts.a.is_some() {
                    bail!("--c replaces --M/--a; give one or the other");
                }
                quantize_qary(&dist, &lattice, c, kernel.as_ref(), DEFAULT_C4_PRIME)
                    .map_err(|e| anyhow::anyhow!("quantize: {e}"))?
            } else {
                let m = m_opt.context("need --M or --c")?;
                let side = opts.a.unwrap_or(opts.n + 1);
                let partition = CellPartition::new(opts.q, opts.n, side)
                    .map_err(|e| anyhow::anyhow!("{e}"))?;
                let params =
                    QuantizerParams::with_default_representatives(partition, &lattice, m)
                        .map_err(|e| anyhow::anyhow!("{e}"))?;
                let run = quantize_with_params(&dist, &params)
                    .map_err(|e| anyhow::anyhow!("quantize: {e}"))?;
                let (measured, stage1_measured) = match &kernel {
                    Some(k) => {
                        let a = k.apply_dense(&dist).map_err(|e| anyhow::anyhow!("{e}"))?;
                        let b = k
                            .apply_dense(&run.result.to_dist())
                            .map_err(|e| anyhow::anyhow!("{e}"))?;
                        let s1 = k.apply_dense(&run.stage1).map_err(|e| anyhow::anyhow!("{e}"))?;
                        (
                            Some(permch_core::channel::tv_dense(&a, &b)),
                            Some(permch_core::channel::tv_dense(&a, &s1)),
                        )
                    }
                    None => (None, None),
                };
                permch_core::quantizer::QaryQuantize {
                    run,
                    params,
                    report: permch_core::quantizer::DistortionReport {
                        side,
                        denom: m,
                        bound: distortion_bound(opts.q, opts.n, side, m, DEFAULT_C4_PRIME),
                        measured,
                        stage1_measured,
                    },
                }
            };
            report_rows.push(("algorithm".into(), "two-stage".into()));
            report_rows.push(("a".into(), outcome.report.side.to_string()));
            report_rows.push(("M".into(), outcome.report.denom.to_string()));
            report_rows.push(("bound".into(), fmt_g12(outcome.report.bound)));
            if let Some(tv) = outcome.report.measured {
                report_rows.push(("measured_tv".into(), fmt_g12(tv)));
            }
            if let Some(tv) = outcome.report.stage1_measured {
                report_rows.push(("stage1_tv".into(), fmt_g12(tv)));
            }
            if let Some(path) = &opts.order_out {
                let order: Vec<&[u32]> =
                    outcome.run.order.iter().map(|c| c.0.as_slice()).collect();
                write_json(path, &config, &serde_json::json!({ "cells": order }))?;
            }
            write_json(&opts.out, &config, &MTypeJson::from_mtype(&outcome.run.result))?;
            println!(
                "quantized to M-type with M = {}, a = {} -> {}",
                outcome.report.denom,
                outcome.report.side,
                opts.out.display()
            );
        }
    }
    if let Some(path) = &opts.report {
        let mut text = format!("# config: {config}\nmetric,value\n");
        for (k, v) in &report_rows {
            text.push_str(&format!("{k},{v}\n"));
        }
        fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

#[derive(Subcommand)]
pub(crate) enum IdcodeAction {
    /// Grid-spaced reliable code + bounded-intersection subsets.
    BuildStochastic {
        #[arg(long)]
        q: usize,
        #[arg(long)]
        n: u32,
        #[arg(long = "U", value_name = "SPEC")]
        u: String,
        /// Grid spacing of the reliable code's codewords.
        #[arg(long)]
        spacing: u32,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        lam: f64,
        /// Ask for at least this many subsets (default: the admissible
        /// target).
        #[arg(long)]
        min_subsets: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1_000_000)]
        max_tries: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        kernel_cap: Option<u64>,
    },
    /// Deterministic identification code from a grid-spaced reliable code.
    BuildDet {
        #[arg(long)]
        q: usize,
        #[arg(long)]
        n: u32,
        #[arg(long = "U", value_name = "SPEC")]
        u: String,
        #[arg(long)]
        spacing: u32,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        kernel_cap: Option<u64>,
    },
    /// Exact (and optionally Monte Carlo) error probabilities of a code.
    Eval {
        #[arg(long)]
        q: usize,
        #[arg(long)]
        n: u32,
        #[arg(long = "U", value_name = "SPEC")]
        u: String,
        #[arg(long)]
        code: PathBuf,
        /// Monte Carlo trials per message (omit for exact only).
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        kernel_cap: Option<u64>,
    },
    /// Exact errors plus the total-variation converse lower bound.
    Converse {
        #[arg(long)]
        q: usize,
        #[arg(long)]
        n: u32,
        #[arg(long = "U", value_name = "SPEC")]
        u: String,
        #[arg(long)]
        code: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        kernel_cap: Option<u64>,
    },
}

fn cap_or_default(cap: Option<u64>) -> u64 {
    cap.or_else(|| {
        std::env::var("PERMCH_KERNEL_CAP")
            .ok()
            .and_then(|v| v.parse().ok())
    })
    .unwrap_or(crate::DEFAULT_KERNEL_CAP)
}

fn kernel_for(u: &str, q: usize, n: u32, cap: Option<u64>) -> Result<(Dmc, QnccKernel)> {
    let dmc = parse_dmc(u, q)?;
    let kernel =
        qncc_kernel(&dmc, n, cap_or_default(cap)).map_err(|e| anyhow::anyhow!("kernel: {e}"))?;
    Ok((dmc, kernel))
}

pub(crate) fn cmd_idcode(action: IdcodeAction) -> Result<()> {
    match action {
        IdcodeAction::BuildStochastic {
            q,
            n,
            u,
            spacing,
            eps,
            lam,
            min_subsets,
            seed,
            max_tries,
            out,
            kernel_cap,
        } => {
            let dmc = parse_dmc(&u, q)?;
            let cap = cap_or_default(kernel_cap);
            let rel =
                build_reliable_code(&dmc, n, spacing, cap).map_err(|e| anyhow::anyhow!("{e}"))?;
            let mut stream = rng::stream(seed, 0);
            let system = build_set_system(rel.len(), eps, lam, min_subsets, &mut stream, max_tries)
                .map_err(|e| anyhow::anyhow!("set system: {e}"))?;
            let code = stochastic_id_code(&rel, &system).map_err(|e| anyhow::anyhow!("{e}"))?;
            let config = format!(
                "idcode build-stochastic --q {q} --n {n} --U {u} --spacing {spacing} --eps {eps} --lam {lam} --seed {seed}"
            );
            write_json(&out, &config, &CodeJson::from_code(&code))?;
            println!(
                "stochastic id code: {} messages over {} codewords (P_e {}), subsets of size {} -> {}",
                code.len(),
                rel.len(),
                rel.exact_max_error().map(fmt_g12).unwrap_or_else(|| "n/a".into()),
                system.subset_size(),
                out.display()
            );
            Ok(())
        }
        IdcodeAction::BuildDet {
            q,
            n,
            u,
            spacing,
            out,
            kernel_cap,
        } => {
            let dmc = parse_dmc(&u, q)?;
            let cap = cap_or_default(kernel_cap);
            let rel =
                build_reliable_code(&dmc, n, spacing, cap).map_err(|e| anyhow::anyhow!("{e}"))?;
            let code = deterministic_id_code(&rel).map_err(|e| anyhow::anyhow!("{e}"))?;
            let config =
                format!("idcode build-det --q {q} --n {n} --U {u} --spacing {spacing}");
            write_json(&out, &config, &CodeJson::from_code(&code))?;
            println!(
                "deterministic id code: {} messages (P_e {}) -> {}",
                code.len(),
                rel.exact_max_error().map(fmt_g12).unwrap_or_else(|| "n/a".into()),
                out.display()
            );
            Ok(())
        }
        IdcodeAction::Eval {
            q,
            n,
            u,
            code,
            trials,
            seed,
            out,
            kernel_cap,
        } => {
            let (dmc, kernel) = kernel_for(&u, q, n, kernel_cap)?;
            let code_json: CodeJson = read_json(&code)?;
            let id = code_json.to_code()?;
            let exact = eval_id_errors(&id, &kernel).map_err(|e| anyhow::anyhow!("{e}"))?;
            let (mc_lambda1, mc_lambda2) = match trials {
                Some(t) => {
                    let mut stream = rng::stream(seed, 1);
                    let mc = mc_eval_id_errors(&id, &dmc, t, &mut stream)
                        .map_err(|e| anyhow::anyhow!("{e}"))?;
                    (Some(mc.lambda1), Some(mc.lambda2))
                }
                None => (None, None),
            };
            let report = ErrorsJson {
                lambda1: exact.lambda1,
                lambda2: exact.lambda2,
                matrix: exact.matrix,
                mc_lambda1,
                mc_lambda2,
                converse_raw: None,
                converse_clamped: None,
            };
            emit_errors(&report, out.as_deref(), &format!("idcode eval --q {q} --n {n} --U {u}"))
        }
        IdcodeAction::Converse {
            q,
            n,
            u,
            code,
            out,
            kernel_cap,
        } => {
            let (_dmc, kernel) = kernel_for(&u, q, n, kernel_cap)?;
            let code_json: CodeJson = read_json(&code)?;
            let id = code_json.to_code()?;
            let exact = eval_id_errors(&id, &kernel).map_err(|e| anyhow::anyhow!("{e}"))?;
            let bound = converse_tv_bound(&id, &kernel).map_err(|e| anyhow::anyhow!("{e}"))?;
            let report = ErrorsJson {
                lambda1: exact.lambda1,
                lambda2: exact.lambda2,
                matrix: exact.matrix,
                mc_lambda1: None,
                mc_lambda2: None,
                converse_raw: Some(bound.raw),
                converse_clamped: Some(bound.clamped),
            };
            emit_errors(
                &report,
                out.as_deref(),
                &format!("idcode converse --q {q} --n {n} --U {u}"),
            )
        }
    }
}

fn emit_errors(report: &ErrorsJson, out: Option<&Path>, config: &str) -> Result<()> {
    match out {
        Some(path) => write_json(path, config, report)?,
        None => println!("{}", serde_json::to_string_pretty(report)?),
    }
    println!(
        "lambda1 = {}, lambda2 = {}{}",
        fmt_g12(report.lambda1),
        fmt_g12(report.lambda2),
        report
            .converse_clamped
            .map(|b| format!(", converse lower bound = {}", fmt_g12(b)))
            .unwrap_or_default()
    );
    Ok(())
}

#[derive(Debug, Clone)]
struct CsvRow {
    suite: &'static str,
    check: String,
    q: usize,
    n: u32,
    param: String,
    value: f64,
    bound: Option<f64>,
    pass: bool,
}

impl CsvRow {
    fn line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}\n",
            self.suite,
            self.check,
            self.q,
            self.n,
            self.param,
            fmt_g12(self.value),
            self.bound.map(fmt_g12).unwrap_or_default(),
            self.pass
        )
    }
}

const SUITES: &[&str] = &[
    "single-shift",
    "distance",
    "weight-transfer",
    "resolvability",
    "multinomial",
];

pub(crate) fn cmd_verify(
    common: &CommonOpts,
    n_spec: &str,
    suite: &str,
    seed: u64,
    trials: u64,
    knob: f64,
    out: Option<&Path>,
) -> Result<()> {
    let grid = parse_n_grid(n_spec)?;
    let dmc = parse_dmc(&common.u, common.q)?;
    let cap = common.kernel_cap();
    let suites: Vec<&str> = if suite == "all" {
        SUITES.to_vec()
    } else if SUITES.contains(&suite) {
        vec![suite]
    } else {
        bail!("unknown suite {suite}; expected all | {}", SUITES.join(" | "));
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.jobs)
        .build()
        .context("cannot build thread pool")?;
    let config = format!(
        "verify --suite {suite} --q {} --n {n_spec} --U {} --seed {seed} --trials {trials} --c {knob}",
        common.q, common.u
    );

    let mut rows: Vec<CsvRow> = Vec::new();
    let mut multinomial_rows: Vec<String> = Vec::new();
    for (si, s) in suites.iter().enumerate() {
        match *s {
            "single-shift" => {
                // Per-n maxima are independent; the non-explosion rule
                // compares the grid ends afterwards.
                let per_n: Vec<_> = pool.install(|| {
                    grid.par_iter()
                        .enumerate()
                        .map(|(gi, &n)| {
                            let mut stream = rng::stream(seed, (si * 1000 + gi) as u64);
                            check_single_shift(&dmc, &[n], trials as usize, &mut stream, cap)
                                .map(|r| r.points[0])
                        })
                        .collect::<Vec<_>>()
                });
                let mut points = Vec::new();
                for p in per_n {
                    points.push(p.map_err(|e| anyhow::anyhow!("single-shift: {e}"))?);
                }
                for p in &points {
                    rows.push(CsvRow {
                        suite: "single-shift",
                        check: "max-normalized-ratio".into(),
                        q: common.q,
                        n: p.n,
                        param: format!("samples={}", p.samples),
                        value: p.max_ratio,
                        bound: None,
                        pass: true,
                    });
                }
                let first = points.first().unwrap();
                let last = points.last().unwrap();
                rows.push(CsvRow {
                    suite: "single-shift",
                    check: "non-explosion".into(),
                    q: common.q,
                    n: last.n,
                    param: format!("baseline n={}", first.n),
                    value: last.max_ratio,
                    bound: Some(2.0 * first.max_ratio),
                    pass: last.max_ratio <= 2.0 * first.max_ratio + 1e-12,
                });
            }
            "distance" => {
                let reports: Vec<_> = pool.install(|| {
                    grid.par_iter()
                        .enumerate()
                        .map(|(gi, &n)| {
                            let mut stream = rng::stream(seed, (si * 1000 + gi) as u64);
                            check_distance_scaling(
                                &dmc,
                                n,
                                (trials as usize).saturating_mul(500),
                                &mut stream,
                                cap,
                            )
                        })
                        .collect::<Vec<_>>()
                });
                for r in reports {
                    let r = r.map_err(|e| anyhow::anyhow!("distance: {e}"))?;
                    rows.push(CsvRow {
                        suite: "distance",
                        check: "per-unit-vs-single-step".into(),
                        q: common.q,
                        n: r.n,
                        param: format!("pairs={}", r.pairs_checked),
                        value: r.pair_ratio_max,
                        bound: Some(r.step_tv_max),
                        pass: r.pass,
                    });
                }
            }
            "weight-transfer" => {
                let reports: Vec<_> = pool.install(|| {
                    grid.par_iter()
                        .enumerate()
                        .map(|(gi, &n)| -> permch_core::Result<_> {
                            let mut stream = rng::stream(seed, (si * 1000 + gi) as u64);
                            let scaling = check_distance_scaling(
                                &dmc,
                                n,
                                (trials as usize).saturating_mul(500),
                                &mut stream,
                                cap,
                            )?;
                            let lattice = Lattice::new(common.q, n, cap)?;
                            let base = random_lattice_dist(&lattice, 16, &mut stream)?;
                            let support: Vec<Vec<u32>> =
                                base.iter().map(|(p, _)| p.clone()).collect();
                            let mut shifts = Vec::new();
                            for i in 0..support.len().min(5) {
                                let from = support[i].clone();
                                let to = support[(i + 2) % support.len()].clone();
                                let mass = base.mass(&from) * 0.5;
                                shifts.push((from, to, mass));
                            }
                            check_weight_transfer(
                                &dmc,
                                n,
                                &base,
                                &shifts,
                                scaling.step_tv_max,
                                cap,
                            )
                            .map(|r| (n, r))
                        })
                        .collect::<Vec<_>>()
                });
                for r in reports {
                    let (n, r) = r.map_err(|e| anyhow::anyhow!("weight-transfer: {e}"))?;
                    rows.push(CsvRow {
                        suite: "weight-transfer",
                        check: "output-tv-vs-bound".into(),
                        q: common.q,
                        n,
                        param: format!("mass-distance={}", fmt_g12(r.mass_distance)),
                        value: r.measured_tv,
                        bound: Some(r.bound),
                        pass: r.pass,
                    });
                }
            }
            "resolvability" => {
                let reports: Vec<_> = pool.install(|| {
                    grid.par_iter()
                        .enumerate()
                        .map(|(gi, &n)| -> permch_core::Result<_> {
                            let mut stream = rng::stream(seed, (si * 1000 + gi) as u64);
                            let kernel = qncc_kernel(&dmc, n, cap)?;
                            let num = (trials.max(10) * 10) as usize;
                            resolvability_collision_demo(
                                &dmc,
                                &kernel,
                                knob,
                                num,
                                usize::MAX,
                                &mut stream,
                            )
                        })
                        .collect::<Vec<_>>()
                });
                for (&n, r) in grid.iter().zip(reports) {
                    let r = r.map_err(|e| anyhow::anyhow!("resolvability: {e}"))?;
                    let pigeonhole_forced =
                        (r.num_dists as f64).log2() > r.count_bound_log2;
                    rows.push(CsvRow {
                        suite: "resolvability",
                        check: "collision-tv-within-2delta".into(),
                        q: common.q,
                        n,
                        param: format!(
                            "M={} collisions={} forced={}",
                            r.denom,
                            r.collisions.len(),
                            pigeonhole_forced
                        ),
                        value: r.max_collision_tv,
                        bound: Some(2.0 * r.max_distortion),
                        pass: r.all_within_two_delta
                            && (!pigeonhole_forced || !r.collisions.is_empty()),
                    });
                }
            }
            "multinomial" => {
                let lines: Vec<_> = pool.install(|| {
                    grid.par_iter()
                        .enumerate()
                        .map(|(gi, &n)| {
                            let mut stream = rng::stream(seed, (si * 1000 + gi) as u64);
                            multinomial_sweep_rows(common.q, n, &mut stream, cap)
                        })
                        .collect::<Vec<_>>()
                });
                for l in lines {
                    multinomial_rows.extend(l.map_err(|e| anyhow::anyhow!("multinomial: {e}"))?);
                }
            }
            _ => unreachable!(),
        }
    }

    let mut failures = rows.iter().filter(|r| !r.pass).count();
    failures += multinomial_rows.iter().filter(|l| l.ends_with(",false")).count();

    if !rows.is_empty() {
        let mut text = format!("# config: {config}\nsuite,check,q,n,param,value,bound,pass\n");
        for row in &rows {
            text.push_str(&row.line());
        }
        match out {
            Some(path) => {
                fs::write(path, text)
                    .with_context(|| format!("cannot write {}", path.display()))?;
                println!("wrote {} rows -> {}", rows.len(), path.display());
            }
            None => print!("{text}"),
        }
    }
    if !multinomial_rows.is_empty() {
        let mut text = format!("# config: {config}\nn,q,u,check_name,max_ratio,pass\n");
        for line in &multinomial_rows {
            text.push_str(line);
            text.push('\n');
        }
        match out {
            Some(path) => {
                let side = path.with_extension("multinomial.csv");
                fs::write(&side, text)
                    .with_context(|| format!("cannot write {}", side.display()))?;
                println!(
                    "wrote {} multinomial rows -> {}",
                    multinomial_rows.len(),
                    side.display()
                );
            }
            None => print!("{text}"),
        }
    }
    // JSON summary next to the CSVs (or on stdout).
    let summary = serde_json::json!({
        "config": config,
        "suites": suites,
        "rows": rows.len() + multinomial_rows.len(),
        "failures": failures,
        "pass": failures == 0,
    });
    match out {
        Some(path) => {
            let side = path.with_extension("summary.json");
            fs::write(&side, serde_json::to_string_pretty(&summary)? + "\n")
                .with_context(|| format!("cannot write {}", side.display()))?;
        }
        None => println!("{}", serde_json::to_string_pretty(&summary)?),
    }
    if failures > 0 {
        bail!("{failures} verification rows failed");
    }
    println!("all verification rows passed");
    Ok(())
}

/// Bound-check rows for one lattice size: worst value/bound ratios for the
/// pointwise, peak, and tail bounds at a random full-support success
/// distribution, plus the successive-difference identities when q = 2.
/// The bounds are asymptotic, so rows below n = 10 report without asserting.
fn multinomial_sweep_rows(
    q: usize,
    n: u32,
    stream: &mut impl rng::RngCore,
    cap: u64,
) -> permch_core::Result<Vec<String>> {
    let raw = rng::flat_dirichlet(stream, q);
    let total: f64 = raw.iter().map(|x| x + 0.05).sum();
    let u: Vec<f64> = raw.into_iter().map(|x| (x + 0.05) / total).collect();
    let m = Multinomial::new(n, u.clone())?;
    let u_label = u
        .iter()
        .map(|&x| format!("{x:.4}"))
        .collect::<Vec<_>>()
        .join("|");
    let assertable = n >= 10;
    let lattice = Lattice::new(q, n, cap)?;
    let mut worst_kl = 0.0f64;
    for c in lattice.iter() {
        let check = m.check_kl_bound(c.counts());
        if check.bound > 0.0 {
            worst_kl = worst_kl.max(check.value / check.bound);
        }
    }
    let peak = m.check_peak(cap)?;
    let mut lines = vec![
        format!(
            "{n},{q},{u_label},kl_bound,{},{}",
            fmt_g12(worst_kl),
            !assertable || worst_kl <= 1.0 + 1e-9
        ),
        format!(
            "{n},{q},{u_label},peak_bound,{},{}",
            fmt_g12(peak.value / peak.bound),
            !assertable || peak.ok
        ),
    ];
    for k in [2.0, 3.0] {
        let tail = m.check_tail_bound(k, cap)?;
        let ratio = if tail.flagged == 0 {
            0.0
        } else {
            tail.worst_pmf / tail.bound
        };
        lines.push(format!(
            "{n},{q},{u_label},tail_bound_K{k},{},{}",
            fmt_g12(ratio),
            !assertable || tail.ok
        ));
    }
    if q == 2 {
        let p = u[1];
        let sd = binomial_successive_diff(n, p)?;
        let peak2 = 2.0 * binomial_peak(n, p)?;
        lines.push(format!(
            "{n},{q},{u_label},successive_diff_eq_2peak,{},{}",
            fmt_g12((sd - peak2).abs()),
            (sd - peak2).abs() <= 1e-12
        ));
        let envelope = 4.0 / ((n as f64).sqrt() * (p * (1.0 - p)).sqrt());
        lines.push(format!(
            "{n},{q},{u_label},successive_diff_envelope,{},{}",
            fmt_g12(sd / envelope),
            sd <= envelope * (1.0 + 1e-12)
        ));
    }
    Ok(lines)
}

