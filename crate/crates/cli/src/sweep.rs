//! Sweep points: problem generation, solving, and one CSV row per solver.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use choiforge::channel::kraus_to_choi;
use choiforge::datagen::{
    channel_maxeig_sample, default_sample_size, random_pair_sample, random_rotation, random_s_matrix,
    random_tp_channel, unitary_dynamics_sample, Rng,
};
use choiforge::fidelity::{build_s, fidelity_choi, FidelityDocument};
use choiforge::lowrank::{self, LowRankConfig};
use choiforge::sdp::{self, SdpProblem, SolverConfig};
use choiforge::{ChoiMatrix64, ConstraintKind, FidelityTensor64, Matrix64};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CliError, Result};

/// First line of every sweep CSV.
pub const SCHEMA_LINE: &str = "# choiforge-sweep v1";

/// Largest `D·n` the SDP accepts without `--allow-large`.
pub const SDP_DIM_LIMIT: usize = 400;

/// Unitary and D=1 rows: `|F/Σω − 1|` allowed under `--strict`.
/// Default `tol_gap` where an operator is read back from the optimum. The
/// operator error scales like the square root of the objective error.
pub const RECOVERY_TOL_GAP: f64 = 1e-13;

pub const RATIO_TOL: f64 = 1e-6;
/// Channel rows: `F ≥ F_init − CHANNEL_TOL`.
pub const CHANNEL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Unitary,
    RandomSample,
    RandomMatrix,
    Channel,
}

impl SweepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepKind::Unitary => "unitary",
            SweepKind::RandomSample => "random-sample",
            SweepKind::RandomMatrix => "random-matrix",
            SweepKind::Channel => "channel",
        }
    }

    fn tag(self) -> u64 {
        match self {
            SweepKind::Unitary => 1,
            SweepKind::RandomSample => 2,
            SweepKind::RandomMatrix => 3,
            SweepKind::Channel => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SolverChoice {
    Sdp,
    Lowrank,
    Both,
}

impl SolverChoice {
    pub fn uses_sdp(self) -> bool {
        matches!(self, SolverChoice::Sdp | SolverChoice::Both)
    }

    pub fn uses_lowrank(self) -> bool {
        matches!(self, SolverChoice::Lowrank | SolverChoice::Both)
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub sweep: SweepKind,
    /// `(n, D)` in sweep order.
    pub points: Vec<(usize, usize)>,
    pub reps: usize,
    pub seed: u64,
    /// Sample size; `default_sample_size(n, D)` when absent.
    pub m: Option<usize>,
    /// Kraus rank for the low-rank solver; 1 for unitary sweeps, `D·n`
    /// otherwise.
    pub n_s: Option<usize>,
    pub kind: ConstraintKind,
    pub solver: SolverChoice,
    pub sdp: SolverConfig,
    pub lowrank: LowRankConfig,
    pub allow_large: bool,
    pub timing: bool,
    /// Write Choi and fidelity-tensor JSON for every row here.
    pub artifacts: Option<PathBuf>,
}

impl SweepConfig {
    pub fn new(sweep: SweepKind, points: Vec<(usize, usize)>, seed: u64) -> Self {
        let mut sdp = SolverConfig::default();
        if sweep == SweepKind::Unitary {
            sdp.tol_gap = RECOVERY_TOL_GAP;
        }
        Self {
            sweep,
            points,
            reps: 1,
            seed,
            m: None,
            n_s: None,
            kind: ConstraintKind::TracePreserving,
            solver: SolverChoice::Sdp,
            sdp,
            lowrank: LowRankConfig::default(),
            allow_large: false,
            timing: false,
            artifacts: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() || self.reps == 0 {
            return Err(CliError::usage("sweep has no points"));
        }
        for &(n, d) in &self.points {
            if n == 0 || d == 0 {
                return Err(CliError::usage(format!("dimensions must be positive (n={n}, D={d})")));
            }
            if self.sweep == SweepKind::Unitary && n != d {
                return Err(CliError::usage("unitary sweep needs D = n"));
            }
            if self.solver.uses_sdp() && d * n > SDP_DIM_LIMIT && !self.allow_large {
                return Err(CliError::usage(format!(
                    "D·n = {} exceeds {SDP_DIM_LIMIT} for the SDP solver; pass --allow-large to run it anyway",
                    d * n
                )));
            }
            if let Some(n_s) = self.n_s {
                if self.solver.uses_lowrank() && (n_s == 0 || n_s > d * n) {
                    return Err(CliError::usage(format!("--ns {n_s} out of range 1..={} at n={n}, D={d}", d * n)));
                }
            }
        }
        if self.m == Some(0) {
            return Err(CliError::usage("--m must be positive"));
        }
        self.sdp.validate()?;
        Ok(())
    }

    fn stream(&self, n: usize, d: usize, rep: usize) -> u64 {
        (self.sweep.tag() << 60) | ((n as u64) << 40) | ((d as u64) << 20) | rep as u64
    }
}

/// One CSV line. Optional fields are written as empty cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub d: usize,
    pub rep: usize,
    pub seed: u64,
    pub solver: &'static str,
    pub status: String,
    pub n_s_effective: Option<usize>,
    pub rank_j: Option<usize>,
    pub fidelity: Option<f64>,
    pub sum_omega: Option<f64>,
    pub fidelity_over_sum_omega: Option<f64>,
    pub f_init: Option<f64>,
    pub cross_rel_diff: Option<f64>,
    /// `pass`/`fail` for the sweep's assertion, empty when none applies.
    pub check: &'static str,
    pub wall_ms: Option<u64>,
    pub error: String,
}

impl SweepRow {
    pub fn passed(&self) -> bool {
        self.check != "fail"
    }

    pub fn hard_failure(&self) -> bool {
        !self.error.is_empty()
    }
}

/// Generated data at one point.
#[derive(Debug, Clone)]
pub struct PointProblem {
    pub s: FidelityTensor64,
    pub sum_omega: Option<f64>,
    pub f_init: Option<f64>,
    /// Generating orthogonal map of a unitary sweep.
    pub generator: Option<Matrix64>,
}

#[derive(Debug, Clone)]
pub struct PointOutcome {
    pub n: usize,
    pub d: usize,
    pub rep: usize,
    pub problem: Option<PointProblem>,
    pub rows: Vec<SweepRow>,
    /// Choi matrix per solved row, same order as `rows`.
    pub chois: Vec<Option<ChoiMatrix64>>,
}

fn generate(cfg: &SweepConfig, n: usize, d: usize, rng: &mut Rng) -> choiforge::Result<PointProblem> {
    let m = cfg.m.unwrap_or_else(|| default_sample_size(n, d));
    let from_sample = |sample: choiforge::MappingSample64| -> choiforge::Result<(FidelityTensor64, f64)> {
        Ok((build_s(&sample)?, sample.total_omega()))
    };
    Ok(match cfg.sweep {
        SweepKind::Unitary => {
            let u = random_rotation::<f64>(n, rng);
            let (s, w) = from_sample(unitary_dynamics_sample(&u, None, m, rng)?)?;
            PointProblem {
                s,
                sum_omega: Some(w),
                f_init: None,
                generator: Some(u),
            }
        }
        SweepKind::RandomSample => {
            let (s, w) = from_sample(random_pair_sample(n, d, m, rng)?)?;
            PointProblem {
                s,
                sum_omega: Some(w),
                f_init: None,
                generator: None,
            }
        }
        SweepKind::RandomMatrix => PointProblem {
            s: random_s_matrix(n, d, rng),
            sum_omega: None,
            f_init: None,
            generator: None,
        },
        SweepKind::Channel => {
            let ch = random_tp_channel::<f64>(n, d, d * n, rng)?;
            let (sample, f_init) = channel_maxeig_sample(&ch, m, rng)?;
            let (s, w) = from_sample(sample)?;
            PointProblem {
                s,
                sum_omega: Some(w),
                f_init: Some(f_init),
                generator: None,
            }
        }
    })
}

struct Solved {
    status: String,
    n_s: usize,
    choi: ChoiMatrix64,
}

fn solve_sdp(s: &FidelityTensor64, cfg: &SweepConfig) -> choiforge::Result<Solved> {
    let p = SdpProblem::with_kind(s.clone(), cfg.kind)?;
    let sol = sdp::solve(&p, &cfg.sdp)?;
    let rank = sol.j.numerical_rank()?;
    Ok(Solved {
        status: sol.status.as_str().to_string(),
        n_s: rank,
        choi: sol.j,
    })
}

fn solve_lowrank(s: &FidelityTensor64, cfg: &SweepConfig, seed: u64) -> choiforge::Result<Solved> {
    let n_s = cfg.n_s.unwrap_or(match cfg.sweep {
        SweepKind::Unitary => 1,
        _ => s.dim(),
    });
    let lcfg = LowRankConfig { seed, ..cfg.lowrank };
    let res = lowrank::run(s, n_s, cfg.kind, &lcfg)?;
    Ok(Solved {
        status: res.status.as_str().to_string(),
        n_s,
        choi: res.choi(),
    })
}

fn check(sweep: SweepKind, n: usize, d: usize, row: &SweepRow, f_init: Option<f64>) -> &'static str {
    let (Some(rank), Some(f)) = (row.rank_j, row.fidelity) else {
        return "fail";
    };
    let ratio_ok = |r: Option<f64>| r.is_some_and(|r| (r - 1.0).abs() <= RATIO_TOL);
    let ok = match sweep {
        SweepKind::Unitary => rank == 1 && ratio_ok(row.fidelity_over_sum_omega),
        SweepKind::RandomSample if d == 1 => rank == n && ratio_ok(row.fidelity_over_sum_omega),
        SweepKind::RandomSample | SweepKind::RandomMatrix => rank <= n.max(d),
        SweepKind::Channel => f_init.is_some_and(|fi| f >= fi - CHANNEL_TOL),
    };
    if ok {
        "pass"
    } else {
        "fail"
    }
}

/// Generates and solves one `(n, D, rep)` point. Errors end up in the rows.
pub fn run_point(cfg: &SweepConfig, n: usize, d: usize, rep: usize) -> PointOutcome {
    let mut rng = Rng::new(cfg.seed).substream(cfg.stream(n, d, rep));
    let mut out = PointOutcome {
        n,
        d,
        rep,
        problem: None,
        rows: Vec::new(),
        chois: Vec::new(),
    };
    let blank = |solver: &'static str| SweepRow {
        n,
        d,
        rep,
        seed: cfg.seed,
        solver,
        status: String::new(),
        n_s_effective: None,
        rank_j: None,
        fidelity: None,
        sum_omega: None,
        fidelity_over_sum_omega: None,
        f_init: None,
        cross_rel_diff: None,
        check: "",
        wall_ms: None,
        error: String::new(),
    };
    let problem = match generate(cfg, n, d, &mut rng) {
        Ok(p) => p,
        Err(e) => {
            let mut row = blank("none");
            row.status = "error".into();
            row.error = format!("data generation: {e}");
            out.rows.push(row);
            out.chois.push(None);
            return out;
        }
    };
    let lowrank_seed = rng.next_u64();

    let mut solvers: Vec<&'static str> = Vec::new();
    if cfg.solver.uses_sdp() {
        solvers.push("sdp");
    }
    if cfg.solver.uses_lowrank() {
        solvers.push("lowrank");
    }
    for solver in solvers {
        let mut row = blank(solver);
        row.sum_omega = problem.sum_omega;
        row.f_init = problem.f_init;
        let start = Instant::now();
        let res = match solver {
            "sdp" => solve_sdp(&problem.s, cfg),
            _ => solve_lowrank(&problem.s, cfg, lowrank_seed),
        };
        let elapsed = start.elapsed();
        if cfg.timing {
            row.wall_ms = Some(elapsed.as_millis() as u64);
        }
        let solved = res.and_then(|sv| {
            let rank = sv.choi.numerical_rank()?;
            let f = fidelity_choi(&sv.choi, &problem.s)?;
            Ok((sv, rank, f))
        });
        match solved {
            Ok((sv, rank, f)) => {
                row.status = sv.status;
                row.n_s_effective = Some(sv.n_s);
                row.rank_j = Some(rank);
                row.fidelity = Some(f);
                row.fidelity_over_sum_omega = problem.sum_omega.map(|w| f / w);
                row.check = check(cfg.sweep, n, d, &row, problem.f_init);
                out.chois.push(Some(sv.choi));
            }
            Err(e) => {
                log::warn!("{} n={n} d={d} rep={rep} {solver}: {e}", cfg.sweep.as_str());
                row.status = "error".into();
                row.error = e.to_string();
                row.check = "fail";
                out.chois.push(None);
            }
        }
        out.rows.push(row);
    }

    if let [a, b] = &mut out.rows[..] {
        if let (Some(fa), Some(fb)) = (a.fidelity, b.fidelity) {
            let rel = (fa - fb).abs() / fa.abs().max(fb.abs()).max(1.0);
            a.cross_rel_diff = Some(rel);
            b.cross_rel_diff = Some(rel);
        }
    }
    out.problem = Some(problem);
    out
}

/// Base name of a row's artifacts, without extension.
pub fn artifact_stem(sweep: SweepKind, n: usize, d: usize, rep: usize) -> String {
    format!("{}-n{n}-d{d}-r{rep}", sweep.as_str())
}

fn write_artifacts(cfg: &SweepConfig, dir: &std::path::Path, out: &PointOutcome) -> Result<()> {
    let stem = artifact_stem(cfg.sweep, out.n, out.d, out.rep);
    if let Some(p) = &out.problem {
        FidelityDocument::from(&p.s).write_json(dir.join(format!("{stem}.s.json")))?;
    }
    for (row, choi) in out.rows.iter().zip(&out.chois) {
        if let Some(j) = choi {
            j.write_json(dir.join(format!("{stem}-{}.choi.json", row.solver)))?;
        }
    }
    Ok(())
}

/// Runs every point in parallel; outcomes come back in sweep order.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<PointOutcome>> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize, usize)> = cfg
        .points
        .iter()
        .flat_map(|&(n, d)| (0..cfg.reps).map(move |r| (n, d, r)))
        .collect();
    let outcomes: Vec<PointOutcome> = jobs.par_iter().map(|&(n, d, r)| run_point(cfg, n, d, r)).collect();
    if let Some(dir) = &cfg.artifacts {
        std::fs::create_dir_all(dir)?;
        for o in &outcomes {
            write_artifacts(cfg, dir, o)?;
        }
    }
    Ok(outcomes)
}

/// Schema line, header, then one record per row.
pub fn write_csv<W: Write>(rows: &[SweepRow], mut w: W) -> Result<()> {
    writeln!(w, "{SCHEMA_LINE}")?;
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    if rows.is_empty() {
        wr.write_record(CSV_COLUMNS)?;
    }
    wr.flush()?;
    Ok(())
}

pub const CSV_COLUMNS: [&str; 16] = [
    "n",
    "d",
    "rep",
    "seed",
    "solver",
    "status",
    "n_s_effective",
    "rank_j",
    "fidelity",
    "sum_omega",
    "fidelity_over_sum_omega",
    "f_init",
    "cross_rel_diff",
    "check",
    "wall_ms",
    "error",
];

/// Exit code for a finished sweep.
pub fn exit_code(rows: &[SweepRow], strict: bool) -> i32 {
    use crate::error::exit;
    if rows.iter().any(SweepRow::hard_failure) {
        exit::SOLVER
    } else if strict && !rows.iter().all(SweepRow::passed) {
        exit::STRICT
    } else {
        exit::SUCCESS
    }
}

/// Recovered orthogonal operator from a rank-one Choi matrix, sign-aligned
/// with `reference`.
pub fn top_operator(choi: &ChoiMatrix64, reference: &Matrix64) -> Result<Matrix64> {
    let ks = choiforge::channel::choi_to_kraus(choi, 1e-12)?;
    let mut b = ks.operators()[0].clone();
    let dot: f64 = b.as_slice().iter().zip(reference.as_slice()).map(|(x, y)| x * y).sum();
    if dot < 0.0 {
        b = b.scale(-1.0);
    }
    Ok(b)
}

/// Choi matrix of a single orthogonal operator, for comparisons.
pub fn operator_choi(u: &Matrix64) -> ChoiMatrix64 {
    kraus_to_choi(&choiforge::KrausSet64::single(u.clone()).expect("non-empty"))
}
