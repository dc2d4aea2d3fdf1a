//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands::ProblemKind;
use crate::sweep::SolverChoice;

#[derive(Debug, Parser)]
#[command(name = "choiforge", version, about = "Quantum channel reconstruction experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub global: GlobalOpts,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Base seed of every generator.
    #[arg(long, global = true, env = "CHOIFORGE_SEED", default_value_t = 0)]
    pub seed: u64,

    /// SDP relative duality-gap tolerance.
    #[arg(long, global = true)]
    pub tol_gap: Option<f64>,

    /// SDP primal/dual feasibility tolerance.
    #[arg(long, global = true)]
    pub tol_feas: Option<f64>,

    /// SDP iteration cap.
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,

    /// Low-rank iteration cap.
    #[arg(long, global = true)]
    pub lr_max_iter: Option<usize>,

    /// Low-rank runs per problem (first from the spectral start, the rest random).
    #[arg(long, global = true, default_value_t = 1)]
    pub lr_starts: usize,

    /// Exit with code 2 when any row fails its assertion.
    #[arg(long, global = true)]
    pub strict: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Orthogonal dynamics samples, D = n; expects rank-1 J and F/Σω = 1.
    UnitarySweep(SweepOpts),
    /// Random state pairs; rank(J) ≤ max(D, n), exact for D = 1.
    RandomSampleSweep(SweepOpts),
    /// Uniform random S; rank(J) ≤ max(D, n).
    RandomMatrixSweep(SweepOpts),
    /// Samples drawn from a random full-rank TP channel; F ≥ F_init.
    ChannelSweep(SweepOpts),
    /// Recover a projective operator through the ratio fidelity.
    Projective(ProjectiveOpts),
    /// Solve one problem from a file.
    Solve(SolveOpts),
    /// Recompute rank, fidelity and feasibility of a stored Choi matrix.
    Verify(VerifyOpts),
    /// Convert raw classical vectors (CSV) into a mapping sample (JSON lines).
    Transform(TransformOpts),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Tp,
    Unit,
}

#[derive(Debug, Args)]
pub struct SweepOpts {
    /// Input dimensions: `3`, `2,4`, `2..6`.
    #[arg(long)]
    pub n: String,

    /// Output dimensions; defaults to 1 (unitary sweep: D = n).
    #[arg(long, conflicts_with = "d_equals_n")]
    pub d: Option<String>,

    /// Sweep the diagonal D = n.
    #[arg(long)]
    pub d_equals_n: bool,

    /// Repetitions per point, each on its own random stream.
    #[arg(long, default_value_t = 1)]
    pub reps: usize,

    /// Sample size; default min(2n²D² + 1000, 20000).
    #[arg(long)]
    pub m: Option<usize>,

    /// Kraus rank for the low-rank solver; default 1 (unitary) or D·n.
    #[arg(long)]
    pub ns: Option<usize>,

    #[arg(long, value_enum, default_value = "tp")]
    pub kind: KindArg,

    #[arg(long, value_enum, default_value = "sdp")]
    pub solver: SolverChoice,

    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Allow the SDP above D·n = 400.
    #[arg(long)]
    pub allow_large: bool,

    /// Fill the wall_ms column (makes output run-dependent).
    #[arg(long)]
    pub timing: bool,

    /// Write each row's Choi matrix and fidelity tensor as JSON here.
    #[arg(long)]
    pub artifacts: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProjectiveOpts {
    #[arg(long)]
    pub n: usize,

    #[arg(long)]
    pub d: usize,

    #[arg(long)]
    pub m: Option<usize>,

    #[arg(long, value_enum, default_value = "sdp")]
    pub solver: SolverChoice,

    /// JSON report destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["s", "sample", "interchange"]))]
pub struct ProblemOpts {
    /// Fidelity tensor JSON: {"n", "d", "s"}.
    #[arg(long)]
    pub s: Option<PathBuf>,

    /// Mapping sample in JSON lines.
    #[arg(long)]
    pub sample: Option<PathBuf>,

    /// SDPA sparse problem; needs --n and --d.
    #[arg(long, requires_all = ["n", "d"])]
    pub interchange: Option<PathBuf>,

    #[arg(long)]
    pub n: Option<usize>,

    #[arg(long)]
    pub d: Option<usize>,

    #[arg(long, value_enum, default_value = "tp")]
    pub kind: ProblemKind,
}

#[derive(Debug, Args)]
pub struct SolveOpts {
    #[command(flatten)]
    pub problem: ProblemOpts,

    #[arg(long, value_enum, default_value = "sdp")]
    pub solver: SolverChoice,

    /// Kraus rank for the low-rank solver; default D·n.
    #[arg(long)]
    pub ns: Option<usize>,

    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,

    /// Also write the problem in SDPA sparse format.
    #[arg(long)]
    pub export_interchange: Option<PathBuf>,

    /// Write per-iteration solver traces as CSV.
    #[arg(long)]
    pub trace: bool,

    /// Allow the SDP above D·n = 400.
    #[arg(long)]
    pub allow_large: bool,
}

#[derive(Debug, Args)]
pub struct VerifyOpts {
    /// Choi matrix JSON.
    #[arg(long)]
    pub choi: PathBuf,

    #[command(flatten)]
    pub problem: ProblemOpts,

    /// Solution document with the dual variables, for a full certificate.
    #[arg(long)]
    pub solution: Option<PathBuf>,

    /// JSON report destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TransformOpts {
    #[arg(long)]
    pub csv: PathBuf,

    #[arg(long)]
    pub out: PathBuf,

    /// Comma-separated input columns; default every column named x*.
    #[arg(long, value_delimiter = ',')]
    pub x_cols: Option<Vec<String>>,

    /// Comma-separated output columns; default every column named f*.
    #[arg(long, value_delimiter = ',')]
    pub f_cols: Option<Vec<String>>,

    /// Re-express the whitened vectors in the record-ordered canonical frame.
    #[arg(long)]
    pub canonical: bool,
}
