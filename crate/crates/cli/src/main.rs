//! `pcbpv`: typecheck, run, explore and interpret programs of the
//! probabilistic calculus; translate PCF; drive adequacy and separation
//! experiments.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use pcbpv_core::eval::{explore_with, sample, ExploreOpts, SampleResult, SplitMix64};
use pcbpv_core::harness::{
    adequacy, default_schedule, separate, sha256_hex, ExperimentReport, InputDigest,
    SeparationOpts,
};
use pcbpv_core::pcf;
use pcbpv_core::pcs::interpret::{interpret_closed, unit_value};
use pcbpv_core::pcs::web::{parse_point, TruncParams};
use pcbpv_core::rational::{decimal_string, parse_rat, Rat};
use pcbpv_core::stdlib;
use pcbpv_core::syntax::parse::{parse_gen_type, parse_term};
use pcbpv_core::syntax::term::Term;
use pcbpv_core::syntax::ty::{GenKind, PosKind};
use pcbpv_core::typecheck::infer_closed;
use rayon::prelude::*;
use serde_json::json;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(name = "pcbpv", version, about = "probabilistic call-by-push-value toolchain")]
struct Cli {
    /// Emit the report as JSON on stdout
    #[arg(long, global = true)]
    json: bool,
    /// Write the JSON report to a file
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Worker threads for sampling runs
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Include wall-clock timings in reports (makes output nondeterministic)
    #[arg(long, global = true)]
    timings: bool,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Typecheck a term and print its type
    Check { file: PathBuf },
    /// Sample trajectories of the reduction chain
    Run {
        file: PathBuf,
        #[arg(long, default_value_t = 1)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        max_steps: u64,
    },
    /// Exact exploration: the distribution over normal forms
    Prob {
        file: PathBuf,
        #[arg(long, default_value_t = 1000)]
        steps: u64,
        /// prune branches below this mass (exact rational, e.g. 1/1000000)
        #[arg(long, value_name = "A/B")]
        floor: Option<String>,
    },
    /// Interpret in the truncated coherence-space semantics
    Sem {
        file: PathBuf,
        #[arg(long, default_value_t = 8)]
        depth: u32,
        #[arg(long, default_value_t = 4)]
        degree: u32,
        #[arg(long, default_value_t = 32)]
        iters: u32,
        /// restrict the output to one column point
        #[arg(long, value_name = "POINT")]
        point: Option<String>,
    },
    /// Generate library terms
    #[command(subcommand)]
    Gen(GenCmd),
    /// Operational vs denotational convergence table
    Adequacy {
        file: PathBuf,
        /// stages `steps:depth:degree:iters`, comma separated
        #[arg(long, value_name = "SCHEDULE")]
        schedule: Option<String>,
        #[arg(long, value_name = "A/B", default_value = "1/1000000")]
        tol: String,
    },
    /// Search for an observable separation of two programs at a web point
    Separate {
        file1: PathBuf,
        file2: PathBuf,
        #[arg(long, value_name = "POINT")]
        point: String,
        #[arg(long, default_value_t = 4096)]
        budget: u64,
        #[arg(long, default_value_t = 4096)]
        steps: u64,
        #[arg(long, default_value_t = 5)]
        depth: u32,
        #[arg(long, default_value_t = 2)]
        degree: u32,
        #[arg(long, default_value_t = 16)]
        iters: u32,
    },
    /// PCF frontend
    #[command(subcommand)]
    Pcf(PcfCmd),
}

#[derive(Subcommand)]
enum GenCmd {
    /// Random natural: `pcbpv gen ran 1/4,3/4`
    Ran { probs: String },
    /// Restriction operator: `pcbpv gen restr 2 'rec z. unit + z'`
    Restr { n: u32, ty: String },
    /// Testing term: `pcbpv gen tester 'l.*' 'unit + unit' minus`
    Tester { point: String, ty: String, flavor: String },
}

#[derive(Subcommand)]
enum PcfCmd {
    Check { file: PathBuf },
    Compile {
        file: PathBuf,
        /// write the translated term to a .cbpv file
        #[arg(short = 'o', long = "emit-term", value_name = "OUT.cbpv")]
        emit_term: Option<PathBuf>,
    },
    Run {
        file: PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        fuel: u64,
    },
}

/// Core error types hold reference-counted terms and are not Send; convert
/// them to message-only errors at the CLI boundary.
trait ErrMsg<T> {
    fn err_msg(self) -> Result<T>;
}

impl<T, E: std::fmt::Display> ErrMsg<T> for std::result::Result<T, E> {
    fn err_msg(self) -> Result<T> {
        self.map_err(|e| anyhow!("{e}"))
    }
}

fn read_input(path: &Path) -> Result<(String, InputDigest)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let digest = InputDigest {
        path: path.display().to_string(),
        sha256: sha256_hex(text.as_bytes()),
    };
    Ok((text, digest))
}

fn load_term(path: &Path) -> Result<(Term, InputDigest)> {
    let (text, digest) = read_input(path)?;
    let term = parse_term(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?;
    Ok((term, digest))
}

fn frac_json(r: &Rat) -> serde_json::Value {
    json!({
        "num": r.numer().to_string(),
        "den": r.denom().to_string(),
        "decimal": decimal_string(r, 9),
    })
}

struct Emit {
    json: bool,
    out: Option<PathBuf>,
    timings: bool,
    started: Instant,
}

impl Emit {
    fn report<R: serde::Serialize>(
        &self,
        mut rep: ExperimentReport<R>,
        human: String,
    ) -> Result<()> {
        if self.timings {
            rep.wall_clock_ms = Some(self.started.elapsed().as_millis() as u64);
        }
        let rendered = rep.to_json();
        if let Some(path) = &self.out {
            std::fs::write(path, rendered.as_bytes())
                .with_context(|| format!("writing {}", path.display()))?;
        }
        if self.json {
            println!("{rendered}");
        } else {
            println!("{human}");
        }
        Ok(())
    }
}

fn main() {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().ok();
    }
    let emit = Emit {
        json: cli.json,
        out: cli.out.clone(),
        timings: cli.timings,
        started: Instant::now(),
    };
    let code = match dispatch(cli.command, &emit) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    };
    std::process::exit(code);
}

fn dispatch(cmd: Cmd, emit: &Emit) -> Result<i32> {
    match cmd {
        Cmd::Check { file } => {
            let (term, digest) = load_term(&file)?;
            match infer_closed(&term) {
                Ok(ty) => {
                    let mut rep =
                        ExperimentReport::new("check", json!({"type": ty.to_string()}));
                    rep.inputs = vec![digest];
                    emit.report(rep, ty.to_string())?;
                    Ok(0)
                }
                Err(e) => {
                    eprintln!("{}: {e}", file.display());
                    Ok(1)
                }
            }
        }
        Cmd::Run { file, samples, seed, max_steps } => {
            let (text, digest) = read_input(&file)?;
            let term = parse_term(&text).map_err(|e| anyhow!("{}: {e}", file.display()))?;
            infer_closed(&term).map_err(|e| anyhow!("{}: {e}", file.display()))?;
            drop(term);
            let mut root = SplitMix64::new(seed);
            let seeds: Vec<u64> = (0..samples).map(|_| root.split().next_u64()).collect();
            // terms are reference-counted and thread-local; each worker
            // re-parses once per chunk, and per-seed streams keep the
            // results independent of the scheduling
            let chunk = 1 + seeds.len() / rayon::current_num_threads().max(1);
            let outcome_strings: Vec<Option<String>> = seeds
                .par_chunks(chunk.max(1))
                .flat_map_iter(|chunk_seeds| {
                    let t = parse_term(&text)
                        .expect("already parsed once")
                        .erase_ascriptions();
                    chunk_seeds
                        .iter()
                        .map(|s| {
                            match sample(&t, *s, max_steps)
                                .expect("typed terms do not get stuck")
                            {
                                SampleResult::Normal(v) => Some(v.to_string()),
                                SampleResult::Timeout => None,
                            }
                        })
                        .collect::<Vec<_>>()
                })
                .collect();
            let mut counts: BTreeMap<String, u64> = BTreeMap::new();
            let mut timeouts = 0u64;
            for o in outcome_strings {
                match o {
                    Some(t) => *counts.entry(t).or_insert(0) += 1,
                    None => timeouts += 1,
                }
            }
            let results = json!({
                "samples": samples,
                "seed": seed,
                "max_steps": max_steps,
                "outcomes": counts
                    .iter()
                    .map(|(t, c)| json!({"term": t, "count": c}))
                    .collect::<Vec<_>>(),
                "timeouts": timeouts,
            });
            let mut human = String::new();
            for (t, c) in &counts {
                human.push_str(&format!("{c:>8}  {t}\n"));
            }
            human.push_str(&format!("{timeouts:>8}  (timeout)"));
            let mut rep = ExperimentReport::new("run", results);
            rep.inputs = vec![digest];
            rep.params = json!({"samples": samples, "seed": seed, "max_steps": max_steps});
            emit.report(rep, human)?;
            Ok(0)
        }
        Cmd::Prob { file, steps, floor } => {
            let (term, digest) = load_term(&file)?;
            infer_closed(&term).map_err(|e| anyhow!("{}: {e}", file.display()))?;
            let floor_rat = match &floor {
                Some(s) => parse_rat(s).map_err(|e| anyhow!("--floor: {e}"))?,
                None => pcbpv_core::rational::zero(),
            };
            let opts = ExploreOpts {
                max_steps: steps,
                mass_floor: floor_rat.clone(),
                max_states: None,
                retain_outcomes: true,
            };
            let summary = explore_with(&term.erase_ascriptions(), &opts).err_msg()?;
            let d = &summary.distribution;
            let outcomes: Vec<serde_json::Value> = d
                .entries
                .iter()
                .map(|(t, p)| {
                    json!({
                        "term": t.to_string(),
                        "prob_num": p.numer().to_string(),
                        "prob_den": p.denom().to_string(),
                    })
                })
                .collect();
            let results = json!({
                "outcomes": outcomes,
                "residual": frac_json(&d.residual),
                "divergent": frac_json(&summary.divergent),
            });
            let mut human = String::new();
            for (t, p) in &d.entries {
                human.push_str(&format!(
                    "{}/{} ({})  {t}\n",
                    p.numer(),
                    p.denom(),
                    decimal_string(p, 6)
                ));
            }
            human.push_str(&format!(
                "residual {}/{} ({})",
                d.residual.numer(),
                d.residual.denom(),
                decimal_string(&d.residual, 6)
            ));
            let mut rep = ExperimentReport::new("prob", results);
            rep.inputs = vec![digest];
            rep.params = json!({"steps": steps, "floor": floor});
            emit.report(rep, human)?;
            Ok(0)
        }
        Cmd::Sem { file, depth, degree, iters, point } => {
            let (term, digest) = load_term(&file)?;
            let ty = infer_closed(&term).map_err(|e| anyhow!("{}: {e}", file.display()))?;
            let tr = TruncParams::new(depth, degree, iters);
            let is_unit = matches!(
                ty.kind(),
                GenKind::Pos(p) if matches!(p.kind(), PosKind::Unit)
            );
            let wanted = match &point {
                Some(s) => Some(parse_point(s).map_err(|e| anyhow!("--point: {e}"))?),
                None => None,
            };
            let m = interpret_closed(&term, &tr).err_msg()?;
            let mut entries: Vec<serde_json::Value> = Vec::new();
            let mut human = String::new();
            for ((row, col), v) in m.iter() {
                if let Some(w) = &wanted {
                    if col != w {
                        continue;
                    }
                }
                entries.push(json!({
                    "row": row.to_string(),
                    "col": col.to_string(),
                    "num": v.numer().to_string(),
                    "den": v.denom().to_string(),
                }));
                human.push_str(&format!(
                    "{col}  =  {}/{} ({})\n",
                    v.numer(),
                    v.denom(),
                    decimal_string(v, 6)
                ));
            }
            if is_unit && point.is_none() {
                let v = unit_value(&term, &tr).err_msg()?;
                human = format!(
                    "star entry: {}/{} ({})",
                    v.numer(),
                    v.denom(),
                    decimal_string(&v, 6)
                );
            } else if human.is_empty() {
                human = "(no nonzero entries within the truncation)".into();
            }
            let results = json!({
                "type": ty.to_string(),
                "entries": entries,
                "trunc": tr,
            });
            let mut rep = ExperimentReport::new("sem", results);
            rep.inputs = vec![digest];
            rep.params =
                json!({"depth": depth, "degree": degree, "iters": iters, "point": point});
            emit.report(rep, human.trim_end().to_string())?;
            Ok(0)
        }
        Cmd::Gen(gen) => {
            let (name, term_text, extra) = match gen {
                GenCmd::Ran { probs } => {
                    let ps: Vec<Rat> = probs
                        .split(',')
                        .map(|s| parse_rat(s).map_err(|e| anyhow!("{e}")))
                        .collect::<Result<_>>()?;
                    let t = stdlib::ran(&ps).err_msg()?;
                    let ty = stdlib::nat_ty().general();
                    ("ran", format!("{}", Term::ascribe(t, ty)), serde_json::Value::Null)
                }
                GenCmd::Restr { n, ty } => {
                    let ty = parse_gen_type(&ty).map_err(|e| anyhow!("TYPE: {e}"))?;
                    let t = stdlib::restr(n, &ty);
                    ("restr", format!("{t}"), serde_json::Value::Null)
                }
                GenCmd::Tester { point, ty, flavor } => {
                    let p = parse_point(&point).map_err(|e| anyhow!("POINT: {e}"))?;
                    let ty = parse_gen_type(&ty).map_err(|e| anyhow!("TYPE: {e}"))?;
                    let flavor = match flavor.as_str() {
                        "value" => stdlib::TesterFlavor::Value,
                        "plus" => stdlib::TesterFlavor::Plus,
                        "minus" => stdlib::TesterFlavor::Minus,
                        other => bail!("unknown flavor `{other}` (value|plus|minus)"),
                    };
                    let bundle = stdlib::tester(&p, &ty, flavor).err_msg()?;
                    (
                        "tester",
                        format!("{}", bundle.term),
                        json!({"arity": bundle.arity, "coeff": bundle.coeff.to_string()}),
                    )
                }
            };
            let results = json!({"term": term_text, "info": extra});
            let human = match &extra {
                serde_json::Value::Null => term_text.clone(),
                info => format!("-- {info}\n{term_text}"),
            };
            let rep = ExperimentReport::new(format!("gen {name}"), results);
            emit.report(rep, human)?;
            Ok(0)
        }
        Cmd::Adequacy { file, schedule, tol } => {
            let (term, digest) = load_term(&file)?;
            let sched = match &schedule {
                None => default_schedule(),
                Some(s) => parse_schedule(s)?,
            };
            let tolerance = parse_rat(&tol).map_err(|e| anyhow!("--tol: {e}"))?;
            let results = adequacy(&term, &sched, &tolerance).err_msg()?;
            let mut human =
                String::from("steps  depth/degree/iters  operational      denotational\n");
            for st in &results.stages {
                human.push_str(&format!(
                    "{:>5}  {:>2}/{}/{}             {:<15}  {:<15}\n",
                    st.steps,
                    st.trunc.depth,
                    st.trunc.degree,
                    st.trunc.fix_iters,
                    decimal_string(&st.operational.0, 9),
                    decimal_string(&st.denotational.0, 9),
                ));
            }
            human.push_str(&format!(
                "monotone: operational {} denotational {}; converged within tolerance: {}",
                results.operational_monotone, results.denotational_monotone, results.converged
            ));
            let mut rep = ExperimentReport::new("adequacy", results);
            rep.inputs = vec![digest];
            rep.params = json!({"schedule": schedule, "tol": tol});
            emit.report(rep, human)?;
            Ok(0)
        }
        Cmd::Separate { file1, file2, point, budget, steps, depth, degree, iters } => {
            let (m1, d1) = load_term(&file1)?;
            let (m2, d2) = load_term(&file2)?;
            let p = parse_point(&point).map_err(|e| anyhow!("--point: {e}"))?;
            let opts = SeparationOpts {
                tr: TruncParams::new(depth, degree, iters),
                budget,
                steps,
            };
            let results = separate(&m1, &m2, &p, &opts).err_msg()?;
            let human = format!(
                "point {}: separated = {}\n  semantic entries: {} vs {}\n  {}",
                results.point,
                results.separated,
                decimal_string(&results.semantic_entry_left.0, 6),
                decimal_string(&results.semantic_entry_right.0, 6),
                results.note
            );
            let mut rep = ExperimentReport::new("separate", results);
            rep.inputs = vec![d1, d2];
            rep.params = json!({
                "point": point, "budget": budget, "steps": steps,
                "depth": depth, "degree": degree, "iters": iters,
            });
            emit.report(rep, human)?;
            Ok(0)
        }
        Cmd::Pcf(sub) => pcf_dispatch(sub, emit),
    }
}

fn pcf_dispatch(cmd: PcfCmd, emit: &Emit) -> Result<i32> {
    match cmd {
        PcfCmd::Check { file } => {
            let (text, digest) = read_input(&file)?;
            let term = pcf::parse_pcf(&text).map_err(|e| anyhow!("{}: {e}", file.display()))?;
            match pcf::infer_pcf_closed(&term) {
                Ok(ty) => {
                    let mut rep =
                        ExperimentReport::new("pcf check", json!({"type": ty.to_string()}));
                    rep.inputs = vec![digest];
                    emit.report(rep, ty.to_string())?;
                    Ok(0)
                }
                Err(e) => {
                    eprintln!("{}: {e}", file.display());
                    Ok(1)
                }
            }
        }
        PcfCmd::Compile { file, emit_term } => {
            let (text, digest) = read_input(&file)?;
            let term = pcf::parse_pcf(&text).map_err(|e| anyhow!("{}: {e}", file.display()))?;
            let (components, ty) = pcf::translate(&[], &term).err_msg()?;
            let comp_tys = pcf::ctype(&ty);
            let mut rendered = String::new();
            for (i, (c, t)) in components.iter().zip(&comp_tys).enumerate() {
                if components.len() > 1 {
                    rendered.push_str(&format!("-- component {} : {}\n", i + 1, t));
                }
                rendered.push_str(&format!("{c}\n"));
            }
            if components.len() > 1 && emit_term.is_some() {
                bail!(
                    "the program translates to {} components; -o writes a single term \
                     (ground and arrow types have one)",
                    components.len()
                );
            }
            if let Some(path) = emit_term {
                std::fs::write(&path, rendered.as_bytes())
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            let results = json!({
                "pcf_type": ty.to_string(),
                "components": components.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
                "component_types": comp_tys.iter().map(|t| t.to_string()).collect::<Vec<_>>(),
            });
            let mut rep = ExperimentReport::new("pcf compile", results);
            rep.inputs = vec![digest];
            emit.report(rep, rendered.trim_end().to_string())?;
            Ok(0)
        }
        PcfCmd::Run { file, fuel } => {
            let (text, digest) = read_input(&file)?;
            let term = pcf::parse_pcf(&text).map_err(|e| anyhow!("{}: {e}", file.display()))?;
            let ty = pcf::infer_pcf_closed(&term).err_msg()?;
            if ty != pcf::PcfType::Nat {
                bail!("pcf run expects a program of ground type nat, got {ty}");
            }
            let result = pcf::cbn_eval(&term, fuel);
            let (text_out, json_out) = match &result {
                pcf::CbnResult::Num(n) => (format!("{n}"), json!({"num": n})),
                pcf::CbnResult::NonNumeral => {
                    ("(non-numeral)".into(), json!({"non_numeral": true}))
                }
                pcf::CbnResult::Timeout => ("(timeout)".into(), json!({"timeout": true})),
            };
            let mut rep = ExperimentReport::new("pcf run", json_out);
            rep.inputs = vec![digest];
            rep.params = json!({"fuel": fuel});
            emit.report(rep, text_out)?;
            Ok(0)
        }
    }
}

fn parse_schedule(s: &str) -> Result<Vec<(u64, TruncParams)>> {
    let mut out = Vec::new();
    for stage in s.split(',') {
        let parts: Vec<&str> = stage.split(':').collect();
        if parts.len() != 4 {
            bail!("schedule stages are steps:depth:degree:iters, got `{stage}`");
        }
        let steps: u64 = parts[0].parse().context("steps")?;
        let depth: u32 = parts[1].parse().context("depth")?;
        let degree: u32 = parts[2].parse().context("degree")?;
        let iters: u32 = parts[3].parse().context("iters")?;
        out.push((steps, TruncParams::new(depth, degree, iters)));
    }
    if out.is_empty() {
        bail!("empty schedule");
    }
    Ok(out)
}
