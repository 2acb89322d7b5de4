//! Sparse SDPA (`.dat-s`) files and an external-process backend.
//!
//! SDPA's primal form is `min c'x  s.t.  sum_i F_i x_i - F_0 >= 0`, so the
//! constant part of every block is written with a flipped sign. Each
//! equality `a'z = b` becomes the pair `a'z - b >= 0`, `b - a'z >= 0` in one
//! trailing diagonal block; the objective constant is not representable and
//! is dropped.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use thiserror::Error;

use super::{ConicProblem, PsdBlock, Residuals, SolveResult, SolveStatus};
use crate::moment::{LinearFunctional, LinearMatrixMap};

#[derive(Debug, Error)]
pub enum SdpaError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unexpected end of input: {0}")]
    Truncated(&'static str),
    #[error("no solution vector found in solver output")]
    NoSolution,
    #[error("solver command `{command}` failed: {detail}")]
    Command { command: String, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn num(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:e}")
    }
}

/// Writes `problem` in sparse SDPA format.
pub fn export_sdpa(problem: &ConicProblem) -> String {
    let mut out = String::new();
    let meq = problem.eq_rows.len();
    let mut sizes: Vec<String> = problem.psd_blocks.iter().map(|b| b.map.dim().to_string()).collect();
    if meq > 0 {
        sizes.push(format!("-{}", 2 * meq));
    }
    let _ = writeln!(out, "* equality rows: {meq} (as paired inequalities in the last block)");
    let _ = writeln!(out, "{}", problem.nz);
    let _ = writeln!(out, "{}", sizes.len());
    let _ = writeln!(out, "{}", sizes.join(" "));
    let mut c = vec![0.0; problem.nz];
    for &(i, v) in problem.objective.terms() {
        c[i] += v;
    }
    let _ = writeln!(out, "{}", c.iter().map(|v| num(*v)).collect::<Vec<_>>().join(" "));

    // entries keyed by (matno, block, i, j) so the output is sorted
    let mut entries: BTreeMap<(usize, usize, usize, usize), f64> = BTreeMap::new();
    for (bi, blk) in problem.psd_blocks.iter().enumerate() {
        let map = &blk.map;
        let w = if map.is_symmetric() { 1.0 } else { 0.5 };
        for (r, col, f) in map.stored() {
            let (i, j) = if r <= col { (r, col) } else { (col, r) };
            let w = if i == j { 1.0 } else { w };
            if f.constant() != 0.0 {
                *entries.entry((0, bi + 1, i + 1, j + 1)).or_insert(0.0) -= w * f.constant();
            }
            for &(k, v) in f.terms() {
                *entries.entry((k + 1, bi + 1, i + 1, j + 1)).or_insert(0.0) += w * v;
            }
        }
    }
    let eb = problem.psd_blocks.len() + 1;
    for (r, (row, &b)) in problem.eq_rows.iter().zip(&problem.eq_rhs).enumerate() {
        let rhs = b - row.constant();
        let (p, q) = (2 * r + 1, 2 * r + 2);
        if rhs != 0.0 {
            entries.insert((0, eb, p, p), rhs);
            entries.insert((0, eb, q, q), -rhs);
        }
        for &(k, v) in row.terms() {
            entries.insert((k + 1, eb, p, p), v);
            entries.insert((k + 1, eb, q, q), -v);
        }
    }
    for ((m, b, i, j), v) in entries {
        if v != 0.0 {
            let _ = writeln!(out, "{m} {b} {i} {j} {}", num(v));
        }
    }
    out
}

fn tokens(text: &str) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let t = line.trim_start();
        if t.starts_with('*') || t.starts_with('"') {
            continue;
        }
        let cleaned: String = line
            .chars()
            .map(|c| if "{},()".contains(c) { ' ' } else { c })
            .collect();
        for tok in cleaned.split_whitespace() {
            out.push((ln + 1, tok.to_string()));
        }
    }
    out
}

struct Cursor {
    toks: Vec<(usize, String)>,
    pos: usize,
}

impl Cursor {
    fn next_str(&mut self, what: &'static str) -> Result<(usize, String), SdpaError> {
        let t = self.toks.get(self.pos).cloned().ok_or(SdpaError::Truncated(what))?;
        self.pos += 1;
        Ok(t)
    }

    fn int(&mut self, what: &'static str) -> Result<i64, SdpaError> {
        let (line, s) = self.next_str(what)?;
        let s = s.trim_end_matches('r');
        s.parse().map_err(|_| SdpaError::Syntax {
            line,
            msg: format!("expected integer for {what}, got `{s}`"),
        })
    }

    fn real(&mut self, what: &'static str) -> Result<f64, SdpaError> {
        let (line, s) = self.next_str(what)?;
        s.parse().map_err(|_| SdpaError::Syntax {
            line,
            msg: format!("expected number for {what}, got `{s}`"),
        })
    }
}

/// Reads a sparse SDPA file. Pairs of negated diagonal entries in a diagonal
/// block are read back as equality rows; the rest become PSD blocks.
pub fn parse_sdpa(text: &str) -> Result<ConicProblem, SdpaError> {
    let mut cur = Cursor { toks: tokens(text), pos: 0 };
    let m = cur.int("number of variables")? as usize;
    let nb = cur.int("number of blocks")? as usize;
    let mut sizes = Vec::with_capacity(nb);
    for _ in 0..nb {
        sizes.push(cur.int("block size")?);
    }
    let mut c = Vec::with_capacity(m);
    for _ in 0..m {
        c.push(cur.real("objective")?);
    }
    // per block: (i, j) -> (constant, terms)
    let mut blocks: Vec<BTreeMap<(usize, usize), (f64, Vec<(usize, f64)>)>> = vec![BTreeMap::new(); nb];
    while cur.pos < cur.toks.len() {
        let line = cur.toks[cur.pos].0;
        let mat = cur.int("matrix number")? as usize;
        let blk = cur.int("block number")? as usize;
        let i = cur.int("row")? as usize;
        let j = cur.int("column")? as usize;
        let v = cur.real("value")?;
        let bad = |msg: &str| SdpaError::Syntax { line, msg: msg.to_string() };
        if blk == 0 || blk > nb {
            return Err(bad("block number out of range"));
        }
        if mat > m {
            return Err(bad("matrix number out of range"));
        }
        let dim = sizes[blk - 1].unsigned_abs() as usize;
        if i == 0 || j == 0 || i > dim || j > dim {
            return Err(bad("entry index out of range"));
        }
        let key = (i.min(j) - 1, i.max(j) - 1);
        let e = blocks[blk - 1].entry(key).or_insert((0.0, Vec::new()));
        if mat == 0 {
            e.0 -= v;
        } else {
            e.1.push((mat - 1, v));
        }
    }

    let mut psd_blocks = Vec::new();
    let mut eq_rows = Vec::new();
    let mut eq_rhs = Vec::new();
    for (bi, (entries, &size)) in blocks.into_iter().zip(&sizes).enumerate() {
        let dim = size.unsigned_abs() as usize;
        let lf = |e: Option<&(f64, Vec<(usize, f64)>)>| match e {
            Some((k, t)) => LinearFunctional::from_terms(t.clone()).with_constant(*k),
            None => LinearFunctional::default(),
        };
        if size < 0 {
            let diag: Vec<LinearFunctional> = (0..dim).map(|i| lf(entries.get(&(i, i)))).collect();
            let mut i = 0;
            while i < dim {
                if i + 1 < dim && !diag[i].terms().is_empty() && diag[i + 1] == diag[i].scale(-1.0) {
                    eq_rows.push(LinearFunctional::from_terms(diag[i].terms().to_vec()));
                    eq_rhs.push(-diag[i].constant());
                    i += 2;
                } else {
                    let mut map = LinearMatrixMap::new_symmetric(1);
                    map.set(0, 0, diag[i].clone());
                    psd_blocks.push(PsdBlock { name: format!("b{}_{}", bi + 1, i + 1), map });
                    i += 1;
                }
            }
        } else {
            let mut map = LinearMatrixMap::new_symmetric(dim);
            for (&(r, col), e) in &entries {
                map.set(r, col, lf(Some(e)));
            }
            psd_blocks.push(PsdBlock { name: format!("b{}", bi + 1), map });
        }
    }
    Ok(ConicProblem {
        nz: m,
        objective: LinearFunctional::from_terms(c.into_iter().enumerate().collect()),
        eq_rows,
        eq_rhs,
        psd_blocks,
    })
}

/// Extracts the primal vector from a solver result file: SDPA's `xVec`
/// section, or else the first line of numbers (CSDP's solution format).
pub fn parse_solution(text: &str, nz: usize) -> Result<Vec<f64>, SdpaError> {
    let numbers = |s: &str| -> Vec<f64> {
        s.split(|c: char| c.is_whitespace() || "{},".contains(c))
            .filter(|t| !t.is_empty())
            .map_while(|t| t.parse::<f64>().ok())
            .collect()
    };
    if let Some(pos) = text.find("xVec") {
        let rest = &text[pos + 4..];
        let rest = rest.trim_start_matches(|c: char| c == '=' || c.is_whitespace());
        let v = numbers(rest);
        if v.len() >= nz {
            return Ok(v[..nz].to_vec());
        }
        return Err(SdpaError::NoSolution);
    }
    for line in text.lines() {
        let v = numbers(line);
        if v.len() == nz {
            return Ok(v);
        }
    }
    Err(SdpaError::NoSolution)
}

fn phase(text: &str) -> Option<SolveStatus> {
    let p = text.split("phase.value").nth(1)?;
    let word = p.trim_start_matches(|c: char| c == '=' || c.is_whitespace()).split_whitespace().next()?;
    Some(match word {
        "pdOPT" => SolveStatus::Optimal,
        "pINF" | "pINF_dFEAS" => SolveStatus::PrimalInfeasible,
        "dINF" | "pFEAS_dINF" => SolveStatus::DualInfeasible,
        _ => return None,
    })
}

/// Runs an external SDP solver on an exported file.
///
/// `command` is a shell command line containing `{input}` and `{output}`,
/// e.g. `sdpa {input} {output}` or `csdp {input} {output}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalSolver {
    pub command: String,
    pub workdir: Option<PathBuf>,
}

static RUN_COUNTER: AtomicUsize = AtomicUsize::new(0);

impl ExternalSolver {
    pub fn new(command: impl Into<String>) -> Self {
        Self {
            command: command.into(),
            workdir: None,
        }
    }

    fn paths(&self) -> (PathBuf, PathBuf) {
        let dir = self.workdir.clone().unwrap_or_else(std::env::temp_dir);
        let id = format!("psdcopo-{}-{}", std::process::id(), RUN_COUNTER.fetch_add(1, Ordering::Relaxed));
        (dir.join(format!("{id}.dat-s")), dir.join(format!("{id}.out")))
    }

    fn run_command(&self, input: &Path, output: &Path) -> Result<(), SdpaError> {
        let line = self
            .command
            .replace("{input}", &input.display().to_string())
            .replace("{output}", &output.display().to_string());
        let out = Command::new("sh").arg("-c").arg(&line).output()?;
        if !output.exists() {
            return Err(SdpaError::Command {
                command: line,
                detail: format!("exit {:?}, no output file; stderr: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)),
            });
        }
        Ok(())
    }

    /// Exports, runs the command and reads the primal vector back. Residuals
    /// are recomputed from the returned point; dual information is not read.
    pub fn solve(&self, problem: &ConicProblem) -> Result<SolveResult, SdpaError> {
        let start = Instant::now();
        let (input, output) = self.paths();
        std::fs::write(&input, export_sdpa(problem))?;
        let ran = self.run_command(&input, &output);
        let text = ran.and_then(|_| Ok(std::fs::read_to_string(&output)?));
        let _ = std::fs::remove_file(&input);
        let _ = std::fs::remove_file(&output);
        let text = text?;
        let reported = phase(&text);
        if let Some(s @ (SolveStatus::PrimalInfeasible | SolveStatus::DualInfeasible)) = reported {
            return Ok(SolveResult {
                status: s,
                z: vec![],
                y: vec![],
                dual_blocks: vec![],
                objective_value: if s == SolveStatus::PrimalInfeasible { f64::INFINITY } else { f64::NEG_INFINITY },
                dual_value: f64::NAN,
                residuals: Residuals::default(),
                iterations: 0,
                wall_time: start.elapsed(),
            });
        }
        let z = parse_solution(&text, problem.nz)?;
        let eq = problem.equality_violation(&z);
        let psd = (-problem.min_block_eigenvalue(&z)).max(0.0);
        let primal = eq.max(psd);
        let status = match reported {
            Some(SolveStatus::Optimal) => SolveStatus::Optimal,
            _ if primal <= 1e-6 => SolveStatus::NearOptimal,
            _ => SolveStatus::IllPosed,
        };
        Ok(SolveResult {
            status,
            objective_value: problem.objective_at(&z),
            z,
            y: vec![],
            dual_blocks: vec![],
            dual_value: f64::NAN,
            residuals: Residuals {
                primal,
                dual: f64::NAN,
                gap: f64::NAN,
            },
            iterations: 0,
            wall_time: start.elapsed(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trivial() -> ConicProblem {
        let mut map = LinearMatrixMap::new_symmetric(2);
        map.set(0, 0, LinearFunctional::from_terms(vec![(0, 1.0)]));
        map.set(1, 1, LinearFunctional::from_terms(vec![(0, 1.0)]));
        map.set(0, 1, LinearFunctional::default().with_constant(1.0));
        ConicProblem {
            nz: 1,
            objective: LinearFunctional::from_terms(vec![(0, 1.0)]),
            eq_rows: vec![],
            eq_rhs: vec![],
            psd_blocks: vec![PsdBlock { name: "a".into(), map }],
        }
    }

    #[test]
    fn trivial_file() {
        let text = export_sdpa(&trivial());
        let lines: Vec<&str> = text.lines().filter(|l| !l.starts_with('*')).collect();
        assert_eq!(lines[..4], ["1", "1", "2", "1"]);
        assert_eq!(lines[4..], ["0 1 1 2 -1", "1 1 1 1 1", "1 1 2 2 1"]);
    }

    #[test]
    fn round_trip() {
        let mut p = trivial();
        p.eq_rows.push(LinearFunctional::from_terms(vec![(0, 2.0)]));
        p.eq_rhs.push(3.0);
        let q = parse_sdpa(&export_sdpa(&p)).unwrap();
        assert_eq!(q.nz, 1);
        assert_eq!(q.eq_rows, p.eq_rows);
        assert_eq!(q.eq_rhs, p.eq_rhs);
        assert_eq!(q.psd_blocks[0].map, p.psd_blocks[0].map);
    }

    #[test]
    fn lp_only() {
        let p = ConicProblem {
            nz: 2,
            objective: LinearFunctional::from_terms(vec![(1, 1.0)]),
            eq_rows: vec![LinearFunctional::from_terms(vec![(0, 1.0), (1, 1.0)])],
            eq_rhs: vec![1.0],
            psd_blocks: vec![],
        };
        let text = export_sdpa(&p);
        let lines: Vec<&str> = text.lines().filter(|l| !l.starts_with('*')).collect();
        assert_eq!(lines[1], "1");
        assert_eq!(lines[2], "-2");
        let q = parse_sdpa(&text).unwrap();
        assert!(q.psd_blocks.is_empty());
        assert_eq!(q.eq_rows.len(), 1);
    }

    #[test]
    fn solution_files() {
        let sdpa_out = "phase.value = pdOPT\nobjValPrimal = 1\nxVec = \n{+1.000e+00,-2.5e-01}\nxMat =\n";
        assert_eq!(parse_solution(sdpa_out, 2).unwrap(), vec![1.0, -0.25]);
        assert_eq!(phase(sdpa_out), Some(SolveStatus::Optimal));
        let csdp = "1.0 2.0 3.0\n1 1 1 1 0.5\n";
        assert_eq!(parse_solution(csdp, 3).unwrap(), vec![1.0, 2.0, 3.0]);
        assert!(parse_solution("nothing", 2).is_err());
    }

    #[test]
    fn syntax_errors() {
        assert!(matches!(parse_sdpa("1\n1\n2\n"), Err(SdpaError::Truncated(_))));
        assert!(matches!(parse_sdpa("1\n1\n2\n1\n0 3 1 1 1\n"), Err(SdpaError::Syntax { .. })));
    }
}
