use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};
use psdcopo::corpus::{self, matrix_form, parse_matrix, CorpusCase};
use psdcopo::{
    assemble_auxiliary, assemble_relaxation, build_problem_spec_with, export_sdpa, sample_generic_direction,
    test_copositivity, Backend, ExternalSolver, FormTag, Polynomial, SolverOptions, TestOptions, TestReport, VarSpace,
    Verdict,
};
use serde_json::json;

const EXIT_INPUT: u8 = 3;
const EXIT_FAILURE: u8 = 4;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "psdcopo", version, about = "Copositivity tests over the PSD cone and PSD x orthant")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide copositivity of one form.
    Test(TestArgs),
    /// Run a built-in suite of reference cases.
    Corpus(CorpusArgs),
    /// Write a relaxation (or the auxiliary program) in SDPA sparse format.
    Emit(EmitArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Polynomial text file, or a matrix file when --form is given.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    m: usize,
    /// Read --input as a matrix and expand the named form.
    #[arg(long, value_parser = parse_form)]
    form: Option<FormTag>,
    /// Accept forms mixing several degrees.
    #[arg(long)]
    allow_inhomogeneous: bool,
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    kmax: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// `internal` or `sdpa:COMMAND` with `{input}` and `{output}` placeholders.
    #[arg(long, default_value = "internal", value_parser = parse_backend)]
    backend: Backend,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct CorpusArgs {
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(suite_names()))]
    suite: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "internal", value_parser = parse_backend)]
    backend: Backend,
    #[arg(long)]
    json: Option<PathBuf>,
    /// Leave timings out of the JSON report.
    #[arg(long)]
    no_timings: bool,
    /// Number of cases run concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct EmitArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    order: u32,
    #[arg(long)]
    out: PathBuf,
    /// Emit the auxiliary program with this bound instead of the relaxation.
    #[arg(long, allow_hyphen_values = true)]
    aux: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

fn suite_names() -> Vec<&'static str> {
    corpus::SUITES.iter().copied().chain(["all"]).collect()
}

fn parse_form(s: &str) -> Result<FormTag, String> {
    s.parse().map_err(|e: psdcopo::CorpusError| e.to_string())
}

fn parse_backend(s: &str) -> Result<Backend, String> {
    match s {
        "internal" => Ok(Backend::Internal(SolverOptions::default())),
        _ => match s.strip_prefix("sdpa:") {
            Some(cmd) if !cmd.trim().is_empty() => Ok(Backend::External(ExternalSolver::new(cmd))),
            _ => Err("expected `internal` or `sdpa:COMMAND`".into()),
        },
    }
}

/// Error carrying the process exit code.
struct Failure {
    code: u8,
    message: String,
}

fn input_error(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_INPUT,
        message: e.to_string(),
    }
}

fn failure(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_FAILURE,
        message: e.to_string(),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn load(args: &InputArgs) -> Result<(Polynomial, VarSpace), Failure> {
    let space = VarSpace::new(args.n, args.m).map_err(input_error)?;
    let text = read(&args.input)?;
    let where_ = |e: &dyn std::fmt::Display| input_error(format!("{}: {e}", args.input.display()));
    let f = match args.form {
        Some(tag) => {
            let a = parse_matrix(&text).map_err(|e| where_(&e))?;
            matrix_form(tag, &a, space).map_err(|e| where_(&e))?
        }
        None => Polynomial::parse(&text, space).map_err(|e| where_(&e))?,
    };
    // reject non-homogeneous input before any solve, naming the offending terms
    build_problem_spec_with(&f, space, args.allow_inhomogeneous).map_err(|e| where_(&e))?;
    Ok((f, space))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| failure(format!("{}: {e}", path.display())))
}

fn fmt_vec(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
    format!("({})", items.join(", "))
}

fn print_report(report: &TestReport) {
    for o in &report.orders {
        let flat = o.flat_truncation.map_or(String::new(), |t| format!("  flat at t={t}"));
        println!(
            "k={}  bound={:+.6e}  status={:?}  {:.2}s{flat}",
            o.order, o.bound, o.relaxation.status, o.time_s
        );
    }
    match &report.verdict {
        Verdict::Copositive { order, bound, .. } => println!("Copositive at k={order} (bound {bound:+.4e})"),
        Verdict::NotCopositive {
            u, v, value, order, ..
        } => {
            println!("NotCopositive at k={order}: f(witness) = {value:+.6e}");
            println!("  u = {}", fmt_vec(u));
            if !v.is_empty() {
                println!("  v = {}", fmt_vec(v));
            }
        }
        Verdict::Inconclusive { k_max, best_bound } => {
            println!("Inconclusive up to k={k_max} (best bound {best_bound:+.4e})")
        }
        Verdict::SolverFailure {
            order, stage, detail, ..
        } => println!("SolverFailure at k={order} ({stage}): {detail}"),
    }
}

fn options(seed: Option<u64>, backend: Backend) -> TestOptions {
    let mut opts = TestOptions {
        backend,
        ..Default::default()
    };
    if let Some(s) = seed {
        opts.seed = s;
    }
    opts
}

fn cmd_test(args: TestArgs) -> Result<u8, Failure> {
    let (f, space) = load(&args.input)?;
    let mut opts = options(args.seed, args.backend);
    opts.k_max = args.kmax;
    opts.allow_inhomogeneous = args.input.allow_inhomogeneous;
    let report = test_copositivity(&f, space, &opts).map_err(failure)?;
    print_report(&report);
    if let Some(path) = &args.json {
        let text = serde_json::to_string_pretty(&report.to_json(true)).map_err(failure)?;
        write(path, &text)?;
    }
    Ok(match report.verdict {
        Verdict::Copositive { .. } => 0,
        Verdict::NotCopositive { .. } => 1,
        Verdict::Inconclusive { .. } => 2,
        Verdict::SolverFailure { .. } => EXIT_FAILURE,
    })
}

fn run_case(case: &CorpusCase, opts: &TestOptions) -> Result<TestReport, String> {
    let f = case.polynomial().map_err(|e| e.to_string())?;
    let opts = TestOptions {
        allow_inhomogeneous: case.allow_inhomogeneous,
        ..opts.clone()
    };
    test_copositivity(&f, case.space(), &opts).map_err(|e| e.to_string())
}

fn case_json(case: &CorpusCase, outcome: &Result<TestReport, String>, issues: &[String], timings: bool) -> serde_json::Value {
    let mut out = json!({ "name": case.name, "pass": issues.is_empty() });
    match outcome {
        Ok(r) => {
            let bounds: serde_json::Map<String, serde_json::Value> =
                r.orders.iter().map(|o| (o.order.to_string(), json!(o.bound))).collect();
            out["verdict"] = json!(r.verdict.label());
            out["order"] = json!(r.verdict.order());
            out["bounds_by_order"] = json!(bounds);
            if let Verdict::NotCopositive { u, v, value, .. } = &r.verdict {
                out["witness"] = json!({ "u": u, "v": v, "value": value });
            }
            if timings {
                out["time_s"] = json!(r.total_time.as_secs_f64());
            }
        }
        Err(e) => {
            out["verdict"] = json!("Error");
            out["error"] = json!(e);
        }
    }
    if !issues.is_empty() {
        out["issues"] = json!(issues);
    }
    out
}

fn cmd_corpus(args: CorpusArgs) -> Result<u8, Failure> {
    let cases = corpus::suite(&args.suite).map_err(input_error)?;
    let opts = options(args.seed, args.backend);
    let results: Vec<Mutex<Option<Result<TestReport, String>>>> = cases.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..args.jobs.clamp(1, cases.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(case) = cases.get(i) else { break };
                let r = run_case(case, &opts);
                *results[i].lock().expect("worker panicked") = Some(r);
            });
        }
    });

    println!(
        "{:<18} {:>3} {:>14} {:>14} {:>9}  {:<14} result",
        "case", "k", "bound(k=2)", "bound(last)", "time(s)", "verdict"
    );
    let mut rows = Vec::new();
    let mut all_pass = true;
    for (case, slot) in cases.iter().zip(results) {
        let outcome = slot.into_inner().expect("worker panicked").expect("every case ran");
        let issues = match &outcome {
            Ok(r) => case.check(r),
            Err(e) => vec![e.clone()],
        };
        all_pass &= issues.is_empty();
        let mark = if issues.is_empty() { "pass" } else { "FAIL" };
        match &outcome {
            Ok(r) => {
                let b2 = r.bound_at(2).map_or("-".into(), |b| format!("{b:+.4e}"));
                let bl = r.bound().map_or("-".into(), |b| format!("{b:+.4e}"));
                let k = r.verdict.order().map_or("-".into(), |k| k.to_string());
                println!(
                    "{:<18} {:>3} {:>14} {:>14} {:>9.2}  {:<14} {mark}",
                    case.name,
                    k,
                    b2,
                    bl,
                    r.total_time.as_secs_f64(),
                    r.verdict.label()
                );
            }
            Err(e) => println!("{:<18} error: {e}  {mark}", case.name),
        }
        for issue in &issues {
            println!("    {issue}");
        }
        rows.push(case_json(case, &outcome, &issues, !args.no_timings));
    }
    if let Some(path) = &args.json {
        let doc = json!({ "suite": args.suite, "cases": rows });
        write(path, &serde_json::to_string_pretty(&doc).map_err(failure)?)?;
    }
    Ok(if all_pass { 0 } else { 1 })
}

fn cmd_emit(args: EmitArgs) -> Result<u8, Failure> {
    let (f, space) = load(&args.input)?;
    let spec = build_problem_spec_with(&f, space, args.input.allow_inhomogeneous).map_err(input_error)?;
    let problem = match args.aux {
        Some(bound) => {
            let seed = args.seed.unwrap_or(TestOptions::default().seed);
            let xi = sample_generic_direction(space, spec.degree, seed);
            assemble_auxiliary(&spec, &xi, bound, args.order)
        }
        None => assemble_relaxation(&spec, args.order),
    }
    .map_err(input_error)?;
    write(&args.out, &export_sdpa(&problem))?;
    println!(
        "wrote {} (order {}, {} moments, blocks {:?})",
        args.out.display(),
        args.order,
        problem.nz,
        problem.block_sizes()
    );
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let outcome = match cli.command {
        Command::Test(a) => cmd_test(a),
        Command::Corpus(a) => cmd_corpus(a),
        Command::Emit(a) => cmd_emit(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
