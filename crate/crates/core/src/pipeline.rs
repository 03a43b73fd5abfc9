//! End-to-end steps shared by the command-line tool, the examples and the
//! acceptance suite.

use std::path::{Path, PathBuf};

use crate::analysis::{
    allowed_transitions, reduce_levels, u_scan, LevelScheme, UScan, DEFAULT_THRESHOLD,
};
use crate::basis::FockBasis;
use crate::checkpoint::{read_checkpoint, write_checkpoint, CheckpointHeader};
use crate::config::RunConfig;
use crate::dynamics::{
    propagate_interaction_picture, transition_matrix, CoefficientTrajectory, TransitionMatrix,
};
use crate::eigen::{lowest_eigenpairs_by_symmetry, EigenSolution, SolverOptions};
use crate::error::Result;
use crate::operators::{assemble_dipole_diagonal, assemble_h0, reflection, spin_swap, ChainSpec};
use crate::spectrum::{spectrum_of_trajectory, SpectrumResult};

/// Lowest `opts.k` states (capped at the space dimension), resolved by
/// reflection parity and spin-swap character.
pub fn solve(chain: &ChainSpec, opts: &SolverOptions) -> Result<EigenSolution> {
    let dim = FockBasis::half_filling(chain.sites)?.dim();
    let h = assemble_h0(chain)?;
    let p = reflection(chain)?;
    let s = spin_swap(chain)?;
    let opts = SolverOptions {
        k: opts.k.min(dim),
        ..*opts
    };
    lowest_eigenpairs_by_symmetry(&h, &[&p, &s], &opts)
}

/// Where the eigen-decomposition came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Checkpoint,
    Computed,
}

/// Loads the checkpoint for `cfg`, or diagonalizes and writes it.
///
/// An explicit `path` must already hold a matching checkpoint; otherwise
/// the default location inside the output directory is used as a cache.
pub fn load_or_diagonalize(
    cfg: &RunConfig,
    path: Option<&Path>,
) -> Result<(EigenSolution, PathBuf, Source)> {
    let key = cfg.checkpoint_key()?;
    if let Some(path) = path {
        let (_, sol) = read_checkpoint(path, &key)?;
        return Ok((sol, path.to_path_buf(), Source::Checkpoint));
    }
    let path = cfg.checkpoint_path()?;
    if path.exists() {
        let (_, sol) = read_checkpoint(&path, &key)?;
        return Ok((sol, path, Source::Checkpoint));
    }
    let sol = diagonalize_to(cfg, &path)?;
    Ok((sol, path, Source::Computed))
}

/// Diagonalizes and writes the checkpoint to `path`.
pub fn diagonalize_to(cfg: &RunConfig, path: &Path) -> Result<EigenSolution> {
    let chain = cfg.chain()?;
    let sol = solve(&chain, &cfg.solver())?;
    let header = CheckpointHeader {
        key: cfg.checkpoint_key()?,
        chain,
        k: sol.len(),
        seed: cfg.seed,
        tol: cfg.tol,
    };
    write_checkpoint(path, &header, &sol)?;
    Ok(sol)
}

pub fn transitions(chain: &ChainSpec, sol: &EigenSolution) -> Result<TransitionMatrix> {
    transition_matrix(sol, &assemble_dipole_diagonal(chain)?)
}

pub struct SpectrumRun {
    pub trajectory: CoefficientTrajectory,
    pub spectrum: SpectrumResult,
}

/// Propagates over the pulse of `cfg` and transforms `x(t)`.
pub fn run_spectrum(cfg: &RunConfig, tm: &TransitionMatrix) -> Result<SpectrumRun> {
    let pulse = cfg.pulse()?;
    let trajectory = propagate_interaction_picture(tm, &pulse, &cfg.propagation())?;
    let chain = cfg.chain()?;
    let spectrum = spectrum_of_trajectory(&trajectory.position, &pulse)?
        .with_metadata("N", chain.sites)
        .with_metadata("v", chain.v)
        .with_metadata("w", chain.w)
        .with_metadata("U", chain.u)
        .with_metadata("states", tm.len())
        .with_metadata("max_norm_drift", format!("{:e}", trajectory.max_norm_drift));
    Ok(SpectrumRun {
        trajectory,
        spectrum,
    })
}

/// `tm` limited to the lowest `states` and then to `keep`, as requested.
pub fn select_states(
    tm: &TransitionMatrix,
    states: Option<usize>,
    keep: Option<&[usize]>,
) -> Result<TransitionMatrix> {
    let tm = match states {
        Some(k) => tm.truncate(k)?,
        None => tm.clone(),
    };
    match keep {
        Some(keep) => reduce_levels(&tm, keep),
        None => Ok(tm),
    }
}

pub fn level_scheme(
    cfg: &RunConfig,
    sol: &EigenSolution,
    tm: &TransitionMatrix,
) -> Result<LevelScheme> {
    allowed_transitions(sol, tm, cfg.omega, DEFAULT_THRESHOLD)
}

/// Spectrum and level overlay for every `U`, caching each
/// eigen-decomposition in the output directory.
pub fn run_u_scan(cfg: &RunConfig, values: &[f64]) -> Result<UScan> {
    u_scan(values, |u| {
        let mut point = cfg.clone();
        point.u = u;
        let (sol, _, _) = load_or_diagonalize(&point, None)?;
        let chain = point.chain()?;
        let tm = transitions(&chain, &sol)?;
        let run = run_spectrum(&point, &tm)?;
        let overlay = level_scheme(&point, &sol, &tm)?.overlay(u);
        Ok((run.spectrum, overlay))
    })
}
