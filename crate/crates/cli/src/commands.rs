//! One-off commands: projective recovery, solve, verify, transform.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use choiforge::channel::{choi_to_kraus, KrausDocument};
use choiforge::datagen::{canonical_frame, classical_transform, default_sample_size, projective_sample, Rng};
use choiforge::fidelity::{build_q, build_s, fidelity_choi, fidelity_ratio, read_sample_jsonl, write_sample_jsonl, FidelityDocument};
use choiforge::lowrank::{self, LowRankConfig};
use choiforge::sdp::{
    self, build_projective_constraints, export_interchange, import_interchange, SdpProblem,
    SdpSolution, SdpStatus, SolverConfig, VerifyReport,
};
use choiforge::{ChoiMatrix64, ConstraintKind, DenominatorTensor64, FidelityTensor64, KrausSet64, MappingSample64, SymMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{exit, CliError, Result};
use crate::sweep::{SolverChoice, SDP_DIM_LIMIT};

/// Certification thresholds applied by `verify` and `solve`: scaled primal
/// residual, eigenvalue floor, relative gap.
pub const CERT_TOLS: (f64, f64, f64) = (1e-8, 1e-8, 1e-7);

/// Max-abs entry error allowed for a recovered projective operator.
pub const PROJECTIVE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Tp,
    Unit,
    /// Ratio fidelity with the projective constraint set; needs a sample.
    Projective,
}

impl ProblemKind {
    pub fn constraint_kind(self) -> ConstraintKind {
        match self {
            ProblemKind::Tp => ConstraintKind::TracePreserving,
            ProblemKind::Unit | ProblemKind::Projective => ConstraintKind::UnitPreserving,
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::usage(format!("cannot open {}: {e}", path.display())))
}

fn with_path<T>(path: &Path, r: choiforge::Result<T>) -> Result<T> {
    r.map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

pub fn read_sample(path: &Path) -> Result<MappingSample64> {
    with_path(path, read_sample_jsonl(open(path)?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Serializable copy of [`VerifyReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certification {
    pub max_primal_residual: f64,
    pub max_scaled_primal_residual: f64,
    pub min_eig_j: f64,
    pub min_eig_slack: f64,
    pub min_eig_slack_rel: f64,
    pub objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
    pub rel_gap: f64,
    pub passes: bool,
}

impl From<&VerifyReport> for Certification {
    fn from(r: &VerifyReport) -> Self {
        let (tp, te, tg) = CERT_TOLS;
        Self {
            max_primal_residual: r.max_primal_residual,
            max_scaled_primal_residual: r.max_scaled_primal_residual,
            min_eig_j: r.min_eig_j,
            min_eig_slack: r.min_eig_slack,
            min_eig_slack_rel: r.min_eig_slack_rel,
            objective: r.objective,
            dual_objective: r.dual_objective,
            gap: r.gap,
            rel_gap: r.rel_gap,
            passes: r.passes(tp, te, tg),
        }
    }
}

/// Dual data written next to an SDP Choi artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionDocument {
    pub kind: Option<ProblemKind>,
    pub status: String,
    pub iterations: usize,
    pub objective: f64,
    pub dual_y: Vec<f64>,
}

// ---------------------------------------------------------------- projective

#[derive(Debug, Clone)]
pub struct ProjectiveArgs {
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub m: Option<usize>,
    pub solver: SolverChoice,
    pub sdp: SolverConfig,
    pub lowrank: LowRankConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectiveSolverReport {
    pub solver: &'static str,
    pub status: String,
    pub rank_j: Option<usize>,
    /// `max |B − P|` after scaling `B` to `|B|² = D` and fixing its sign.
    pub max_abs_error: Option<f64>,
    pub ratio_fidelity: Option<f64>,
    pub check: &'static str,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectiveReport {
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub m: usize,
    pub results: Vec<ProjectiveSolverReport>,
}

impl ProjectiveReport {
    pub fn exit_code(&self, strict: bool) -> i32 {
        if self.results.iter().any(|r| !r.error.is_empty()) {
            exit::SOLVER
        } else if strict && self.results.iter().any(|r| r.check != "pass") {
            exit::STRICT
        } else {
            exit::SUCCESS
        }
    }
}

/// Scales `b` to `|b|² = D`, flips it towards `p`, and returns `max |b − p|`.
fn projective_error(b: &choiforge::Matrix64, p: &choiforge::Matrix64) -> (choiforge::Matrix64, f64) {
    let norm = b.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt();
    let dot: f64 = b.as_slice().iter().zip(p.as_slice()).map(|(x, y)| x * y).sum();
    let c = (p.rows() as f64).sqrt() / norm * dot.signum();
    let b = b.scale(c);
    let err = b.max_abs_diff(p);
    (b, err)
}

pub fn projective_problem(
    sample: &MappingSample64,
) -> choiforge::Result<(FidelityTensor64, DenominatorTensor64, SdpProblem<f64>)> {
    let s = build_s(sample)?;
    let q = build_q(sample)?;
    let cons = build_projective_constraints(s.n(), s.d(), &q, sample.total_nu())?;
    let p = SdpProblem::new(s.clone(), cons)?;
    Ok((s, q, p))
}

pub fn projective(args: &ProjectiveArgs) -> Result<ProjectiveReport> {
    let (n, d) = (args.n, args.d);
    if d == 0 || d > n {
        return Err(CliError::usage(format!("projective recovery needs 1 <= D <= n (n={n}, D={d})")));
    }
    let m = args.m.unwrap_or_else(|| default_sample_size(n, d));
    let mut rng = Rng::new(args.seed);
    let (sample, proj) = projective_sample::<f64>(n, d, m, &mut rng)?;
    let (s, q, problem) = projective_problem(&sample)?;
    let mut results = Vec::new();

    let finish = |solver: &'static str, status: String, r: choiforge::Result<(usize, KrausSet64)>| match r
        .and_then(|(rank, ks)| {
            let (b, err) = projective_error(&ks.operators()[0], &proj);
            let ratio = fidelity_ratio(&KrausSet64::single(b)?, &s, &q)?;
            Ok((rank, err, ratio))
        }) {
        Ok((rank, err, ratio)) => ProjectiveSolverReport {
            solver,
            status,
            rank_j: Some(rank),
            max_abs_error: Some(err),
            ratio_fidelity: Some(ratio),
            check: if rank == 1 && err <= PROJECTIVE_TOL { "pass" } else { "fail" },
            error: String::new(),
        },
        Err(e) => ProjectiveSolverReport {
            solver,
            status: "error".into(),
            rank_j: None,
            max_abs_error: None,
            ratio_fidelity: None,
            check: "fail",
            error: e.to_string(),
        },
    };

    if args.solver.uses_sdp() {
        let r = sdp::solve(&problem, &args.sdp);
        let status = r.as_ref().map(|sol| sol.status.as_str().to_string()).unwrap_or_default();
        results.push(finish(
            "sdp",
            status,
            r.and_then(|sol| Ok((sol.j.numerical_rank()?, choi_to_kraus(&sol.j, 1e-12)?))),
        ));
    }
    if args.solver.uses_lowrank() {
        let r = lowrank::run_ratio(&s, &q, 1, &LowRankConfig { seed: args.seed, ..args.lowrank });
        let status = r.as_ref().map(|res| res.status.as_str().to_string()).unwrap_or_default();
        results.push(finish(
            "lowrank",
            status,
            r.and_then(|res| Ok((res.choi().numerical_rank()?, res.kraus()))),
        ));
    }
    Ok(ProjectiveReport {
        n,
        d,
        seed: args.seed,
        m,
        results,
    })
}

// --------------------------------------------------------------------- solve

#[derive(Debug, Clone)]
pub enum ProblemSource {
    /// Fidelity tensor document.
    Tensor(PathBuf),
    /// JSON-lines mapping sample.
    Sample(PathBuf),
    /// SDPA sparse file with the channel dimensions.
    Interchange { path: PathBuf, n: usize, d: usize },
}

#[derive(Debug, Clone)]
pub struct SolveArgs {
    pub source: ProblemSource,
    pub kind: ProblemKind,
    pub solver: SolverChoice,
    pub n_s: Option<usize>,
    pub out: PathBuf,
    pub export_interchange: Option<PathBuf>,
    pub trace: bool,
    pub allow_large: bool,
    pub seed: u64,
    pub sdp: SolverConfig,
    pub lowrank: LowRankConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveSummary {
    pub solver: &'static str,
    pub status: String,
    pub fidelity: Option<f64>,
    pub rank_j: Option<usize>,
    pub certification: Option<Certification>,
    pub error: String,
}

/// Problem data for `solve`/`verify`: the SDP and, when known, the tensors.
pub struct LoadedProblem {
    pub problem: SdpProblem<f64>,
    pub q: Option<DenominatorTensor64>,
    pub sum_omega: Option<f64>,
}

pub fn load_problem(source: &ProblemSource, kind: ProblemKind) -> Result<LoadedProblem> {
    match source {
        ProblemSource::Tensor(path) => {
            if kind == ProblemKind::Projective {
                return Err(CliError::usage("--kind projective needs a sample, not a bare tensor"));
            }
            let s = with_path(path, FidelityDocument::read_json(path).and_then(|doc| doc.to_tensor()))?;
            Ok(LoadedProblem {
                problem: SdpProblem::with_kind(s, kind.constraint_kind())?,
                q: None,
                sum_omega: None,
            })
        }
        ProblemSource::Sample(path) => {
            let sample = read_sample(path)?;
            let sum_omega = Some(sample.total_omega());
            if kind == ProblemKind::Projective {
                let (_, q, problem) = projective_problem(&sample)?;
                Ok(LoadedProblem {
                    problem,
                    q: Some(q),
                    sum_omega,
                })
            } else {
                Ok(LoadedProblem {
                    problem: SdpProblem::with_kind(build_s(&sample)?, kind.constraint_kind())?,
                    q: None,
                    sum_omega,
                })
            }
        }
        ProblemSource::Interchange { path, n, d } => Ok(LoadedProblem {
            problem: with_path(path, import_interchange(open(path)?, *n, *d))?,
            q: None,
            sum_omega: None,
        }),
    }
}

fn certify(problem: &SdpProblem<f64>, j: &ChoiMatrix64, dual_y: &[f64]) -> choiforge::Result<Certification> {
    let sol = SdpSolution {
        j: j.clone(),
        dual_y: dual_y.to_vec(),
        dual_slack: SymMatrix::zeros(j.dim()),
        objective: problem.objective_value(j.matrix()),
        gap: 0.0,
        status: SdpStatus::Optimal,
        iterations: 0,
        trace: Vec::new(),
    };
    Ok(Certification::from(&sdp::verify(problem, &sol)?))
}

/// Writes `<solver>.choi.json` (and for the SDP `sdp.solution.json`,
/// `sdp.verify.json`; for the low-rank solver `lowrank.kraus.json`) under
/// `out`, plus `summary.json`. Returns the summary and exit code.
pub fn solve(args: &SolveArgs) -> Result<(Vec<SolveSummary>, i32)> {
    let loaded = load_problem(&args.source, args.kind)?;
    let p = &loaded.problem;
    if args.solver.uses_sdp() && p.dim() > SDP_DIM_LIMIT && !args.allow_large {
        return Err(CliError::usage(format!(
            "D·n = {} exceeds {SDP_DIM_LIMIT} for the SDP solver; pass --allow-large to run it anyway",
            p.dim()
        )));
    }
    std::fs::create_dir_all(&args.out)?;
    if let Some(path) = &args.export_interchange {
        export_interchange(p, path)?;
    }
    let s = p.objective();
    let mut summaries = Vec::new();

    if args.solver.uses_sdp() {
        let cfg = SolverConfig {
            trace: args.trace,
            ..args.sdp
        };
        summaries.push(match sdp::solve(p, &cfg) {
            Ok(sol) => {
                sol.j.write_json(args.out.join("sdp.choi.json"))?;
                write_json(
                    &args.out.join("sdp.solution.json"),
                    &SolutionDocument {
                        kind: Some(args.kind),
                        status: sol.status.as_str().into(),
                        iterations: sol.iterations,
                        objective: sol.objective,
                        dual_y: sol.dual_y.clone(),
                    },
                )?;
                let cert = Certification::from(&sdp::verify(p, &sol)?);
                write_json(&args.out.join("sdp.verify.json"), &cert)?;
                if args.trace {
                    sdp::write_trace_csv(&sol.trace, BufWriter::new(File::create(args.out.join("sdp.trace.csv"))?))?;
                }
                SolveSummary {
                    solver: "sdp",
                    status: sol.status.as_str().into(),
                    fidelity: Some(fidelity_choi(&sol.j, s)?),
                    rank_j: Some(sol.j.numerical_rank()?),
                    certification: Some(cert),
                    error: String::new(),
                }
            }
            Err(e) => failed("sdp", e),
        });
    }
    if args.solver.uses_lowrank() {
        let n_s = args.n_s.unwrap_or(s.dim());
        let cfg = LowRankConfig {
            seed: args.seed,
            trace: args.trace,
            ..args.lowrank
        };
        let res = match (&loaded.q, args.kind) {
            (Some(q), ProblemKind::Projective) => lowrank::run_ratio(s, q, n_s, &cfg),
            _ => lowrank::run(s, n_s, args.kind.constraint_kind(), &cfg),
        };
        summaries.push(match res {
            Ok(res) => {
                let j = res.choi();
                j.write_json(args.out.join("lowrank.choi.json"))?;
                write_json(&args.out.join("lowrank.kraus.json"), &KrausDocument::from(&res.kraus()))?;
                if args.trace {
                    lowrank::write_trace_csv(
                        &res.trace,
                        BufWriter::new(File::create(args.out.join("lowrank.trace.csv"))?),
                    )?;
                }
                SolveSummary {
                    solver: "lowrank",
                    status: res.status.as_str().into(),
                    fidelity: Some(fidelity_choi(&j, s)?),
                    rank_j: Some(j.numerical_rank()?),
                    certification: None,
                    error: String::new(),
                }
            }
            Err(e) => failed("lowrank", e),
        });
    }
    write_json(&args.out.join("summary.json"), &summaries)?;
    let code = if summaries.iter().any(|s| !s.error.is_empty()) {
        exit::SOLVER
    } else {
        exit::SUCCESS
    };
    Ok((summaries, code))
}

fn failed(solver: &'static str, e: choiforge::Error) -> SolveSummary {
    SolveSummary {
        solver,
        status: "error".into(),
        fidelity: None,
        rank_j: None,
        certification: None,
        error: e.to_string(),
    }
}

// -------------------------------------------------------------------- verify

#[derive(Debug, Clone)]
pub struct VerifyArgs {
    pub choi: PathBuf,
    pub source: ProblemSource,
    pub kind: ProblemKind,
    /// `sdp.solution.json` for a full certification with the dual.
    pub solution: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyOutput {
    pub n: usize,
    pub d: usize,
    pub rank_j: usize,
    pub fidelity: f64,
    pub sum_omega: Option<f64>,
    pub fidelity_over_sum_omega: Option<f64>,
    /// `max_c |Tr(J A_c) − β_c|` for the problem's constraints.
    pub constraint_residual: f64,
    pub min_eig_j: f64,
    pub certification: Option<Certification>,
}

impl VerifyOutput {
    pub fn passes(&self) -> bool {
        let (tp, te, _) = CERT_TOLS;
        match &self.certification {
            Some(c) => c.passes,
            None => self.constraint_residual <= tp && self.min_eig_j >= -te,
        }
    }
}

/// Recomputes rank, fidelity and feasibility of a stored Choi matrix from
/// the problem data alone.
pub fn verify(args: &VerifyArgs) -> Result<VerifyOutput> {
    let loaded = load_problem(&args.source, args.kind)?;
    let p = &loaded.problem;
    let j = with_path(&args.choi, ChoiMatrix64::read_json(&args.choi))?;
    if j.dim() != p.dim() || j.d_in() != p.n() {
        return Err(CliError::usage(format!(
            "Choi matrix is D={}, n={} but the problem is D={}, n={}",
            j.d_out(),
            j.d_in(),
            p.d(),
            p.n()
        )));
    }
    let fidelity = fidelity_choi(&j, p.objective())?;
    let certification = match &args.solution {
        Some(path) => {
            let doc: SolutionDocument = serde_json::from_reader(open(path)?)
                .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
            if doc.dual_y.len() != p.num_constraints() {
                return Err(CliError::usage(format!(
                    "{}: {} dual values for {} constraints",
                    path.display(),
                    doc.dual_y.len(),
                    p.num_constraints()
                )));
            }
            Some(certify(p, &j, &doc.dual_y)?)
        }
        None => None,
    };
    Ok(VerifyOutput {
        n: p.n(),
        d: p.d(),
        rank_j: j.numerical_rank()?,
        fidelity,
        sum_omega: loaded.sum_omega,
        fidelity_over_sum_omega: loaded.sum_omega.map(|w| fidelity / w),
        constraint_residual: p.max_primal_residual(j.matrix()),
        min_eig_j: j.eigenvalues()?.into_iter().fold(f64::INFINITY, f64::min),
        certification,
    })
}

// ----------------------------------------------------------------- transform

#[derive(Debug, Clone)]
pub struct TransformArgs {
    pub csv: PathBuf,
    pub out: PathBuf,
    /// Input columns; default every header starting with `x`.
    pub x_cols: Option<Vec<String>>,
    /// Output columns; default every header starting with `f`.
    pub f_cols: Option<Vec<String>>,
    pub canonical: bool,
}

fn column_indices(header: &csv::StringRecord, names: &Option<Vec<String>>, prefix: char) -> Result<Vec<usize>> {
    let idx: Vec<usize> = match names {
        Some(names) => names
            .iter()
            .map(|name| {
                header
                    .iter()
                    .position(|h| h.trim() == name)
                    .ok_or_else(|| CliError::usage(format!("column `{name}` not in header")))
            })
            .collect::<Result<_>>()?,
        None => header
            .iter()
            .enumerate()
            .filter(|(_, h)| h.trim().starts_with(prefix))
            .map(|(i, _)| i)
            .collect(),
    };
    if idx.is_empty() {
        return Err(CliError::usage(format!("no `{prefix}` columns in header")));
    }
    Ok(idx)
}

/// Reads raw classical vectors from CSV and writes the whitened sample as
/// JSON lines. Returns the record count.
pub fn transform(args: &TransformArgs) -> Result<usize> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(open(&args.csv)?);
    let header = rdr.headers()?.clone();
    let xi = column_indices(&header, &args.x_cols, 'x')?;
    let fi = column_indices(&header, &args.f_cols, 'f')?;
    let (mut xs, mut fs) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let parse = |cols: &[usize]| -> Result<Vec<f64>> {
            cols.iter()
                .map(|&c| {
                    let cell = rec.get(c).unwrap_or("");
                    cell.parse::<f64>().map_err(|_| {
                        CliError::usage(format!(
                            "{} line {line}: `{cell}` in column `{}` is not a number",
                            args.csv.display(),
                            &header[c]
                        ))
                    })
                })
                .collect()
        };
        xs.push(parse(&xi)?);
        fs.push(parse(&fi)?);
    }
    let mut sample = classical_transform(&xs, &fs)?;
    if args.canonical {
        sample = canonical_frame(&sample)?;
    }
    let mut w = BufWriter::new(File::create(&args.out)?);
    write_sample_jsonl(&sample, &mut w)?;
    w.flush()?;
    Ok(sample.len())
}

