//! Dispatch from parsed arguments to commands.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use choiforge::lowrank::LowRankConfig;
use choiforge::sdp::SolverConfig;
use choiforge::ConstraintKind;

use crate::args::{Cli, Command, GlobalOpts, KindArg, ProblemOpts, SweepOpts};
use crate::commands::{self, ProblemSource, ProjectiveArgs, SolveArgs, TransformArgs, VerifyArgs};
use crate::error::{exit, CliError, Result};
use crate::range::parse_list;
use crate::sweep::{self, SweepConfig, SweepKind};

/// Default `tol_gap` of the projective command.
pub const PROJECTIVE_TOL_GAP: f64 = sweep::RECOVERY_TOL_GAP;

fn sdp_config(g: &GlobalOpts, default_gap: f64) -> SolverConfig {
    let d = SolverConfig::default();
    SolverConfig {
        tol_gap: g.tol_gap.unwrap_or(default_gap),
        tol_feas: g.tol_feas.unwrap_or(d.tol_feas),
        max_iter: g.max_iter.unwrap_or(d.max_iter),
        ..d
    }
}

fn lowrank_config(g: &GlobalOpts) -> LowRankConfig {
    let d = LowRankConfig::default();
    LowRankConfig {
        max_iter: g.lr_max_iter.unwrap_or(d.max_iter),
        starts: g.lr_starts.max(1),
        ..d
    }
}

/// Writes to `path`, or stdout when absent.
fn with_output(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            f(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn write_json_out<T: serde::Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    with_output(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

pub fn sweep_config(kind: SweepKind, o: &SweepOpts, g: &GlobalOpts) -> Result<SweepConfig> {
    let ns = parse_list(&o.n)?;
    let points: Vec<(usize, usize)> = if kind == SweepKind::Unitary {
        if o.d.is_some() {
            return Err(CliError::usage("the unitary sweep sets D = n; drop --d"));
        }
        ns.iter().map(|&n| (n, n)).collect()
    } else if o.d_equals_n {
        ns.iter().map(|&n| (n, n)).collect()
    } else {
        let ds = match &o.d {
            Some(d) => parse_list(d)?,
            None => vec![1],
        };
        ns.iter().flat_map(|&n| ds.iter().map(move |&d| (n, d))).collect()
    };
    let mut cfg = SweepConfig::new(kind, points, g.seed);
    cfg.reps = o.reps;
    cfg.m = o.m;
    cfg.n_s = o.ns;
    cfg.kind = match o.kind {
        KindArg::Tp => ConstraintKind::TracePreserving,
        KindArg::Unit => ConstraintKind::UnitPreserving,
    };
    cfg.solver = o.solver;
    cfg.sdp = sdp_config(g, cfg.sdp.tol_gap);
    cfg.lowrank = lowrank_config(g);
    cfg.allow_large = o.allow_large;
    cfg.timing = o.timing;
    cfg.artifacts = o.artifacts.clone();
    cfg.validate()?;
    Ok(cfg)
}

fn problem_source(p: &ProblemOpts) -> Result<ProblemSource> {
    match (&p.s, &p.sample, &p.interchange) {
        (Some(s), None, None) => Ok(ProblemSource::Tensor(s.clone())),
        (None, Some(s), None) => Ok(ProblemSource::Sample(s.clone())),
        (None, None, Some(path)) => match (p.n, p.d) {
            (Some(n), Some(d)) => Ok(ProblemSource::Interchange { path: path.clone(), n, d }),
            _ => Err(CliError::usage("--interchange needs --n and --d")),
        },
        _ => Err(CliError::usage("give exactly one of --s, --sample, --interchange")),
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    let g = &cli.global;
    let sweep_kind = match &cli.command {
        Command::UnitarySweep(o) => Some((SweepKind::Unitary, o)),
        Command::RandomSampleSweep(o) => Some((SweepKind::RandomSample, o)),
        Command::RandomMatrixSweep(o) => Some((SweepKind::RandomMatrix, o)),
        Command::ChannelSweep(o) => Some((SweepKind::Channel, o)),
        _ => None,
    };
    if let Some((kind, o)) = sweep_kind {
        let cfg = sweep_config(kind, o, g)?;
        let outcomes = sweep::run_sweep(&cfg)?;
        let rows: Vec<_> = outcomes.into_iter().flat_map(|o| o.rows).collect();
        with_output(o.out.as_deref(), |w| sweep::write_csv(&rows, w))?;
        let failed = rows.iter().filter(|r| !r.passed()).count();
        if failed > 0 {
            log::warn!("{failed} of {} rows failed their check", rows.len());
        }
        return Ok(sweep::exit_code(&rows, g.strict));
    }

    match cli.command {
        Command::Projective(o) => {
            let report = commands::projective(&ProjectiveArgs {
                n: o.n,
                d: o.d,
                seed: g.seed,
                m: o.m,
                solver: o.solver,
                sdp: sdp_config(g, PROJECTIVE_TOL_GAP),
                lowrank: lowrank_config(g),
            })?;
            write_json_out(o.out.as_deref(), &report)?;
            Ok(report.exit_code(g.strict))
        }
        Command::Solve(o) => {
            let (summary, code) = commands::solve(&SolveArgs {
                source: problem_source(&o.problem)?,
                kind: o.problem.kind,
                solver: o.solver,
                n_s: o.ns,
                out: o.out,
                export_interchange: o.export_interchange,
                trace: o.trace,
                allow_large: o.allow_large,
                seed: g.seed,
                sdp: sdp_config(g, SolverConfig::default().tol_gap),
                lowrank: lowrank_config(g),
            })?;
            write_json_out(None, &summary)?;
            let cert_failed = summary
                .iter()
                .any(|s| s.certification.as_ref().is_some_and(|c| !c.passes));
            Ok(if code == exit::SUCCESS && g.strict && cert_failed {
                exit::STRICT
            } else {
                code
            })
        }
        Command::Verify(o) => {
            let out = commands::verify(&VerifyArgs {
                choi: o.choi,
                source: problem_source(&o.problem)?,
                kind: o.problem.kind,
                solution: o.solution,
            })?;
            write_json_out(o.out.as_deref(), &out)?;
            Ok(if g.strict && !out.passes() {
                exit::STRICT
            } else {
                exit::SUCCESS
            })
        }
        Command::Transform(o) => {
            let count = commands::transform(&TransformArgs {
                csv: o.csv,
                out: o.out,
                x_cols: o.x_cols,
                f_cols: o.f_cols,
                canonical: o.canonical,
            })?;
            log::info!("wrote {count} records");
            Ok(exit::SUCCESS)
        }
        _ => unreachable!("sweeps handled above"),
    }
}
