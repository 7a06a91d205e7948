//! Experiment driver behind the `avem` binary: problem selection, the
//! adaptive loop, and per-iteration reporting to CSV and VTK.

pub mod report;

use std::path::{Path, PathBuf};

use avem::{
    fichera_domain, fichera_problem, galerkin_loop, DataSampling, GalerkinConfig,
    IterationRecord, MeshForest, ProblemSpec,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Table {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error(transparent)]
    Solve(#[from] avem::Error),

    #[error("unknown problem {0:?}, expected one of: fichera")]
    UnknownProblem(String),

    #[error("{0}")]
    BadConfig(&'static str),
}

/// Everything one experiment needs: the problem, the loop parameters, and
/// where the results go.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub problem: String,
    /// Exponent of the benchmark solution, in (0, 1).
    pub alpha: f64,
    /// Hanging-node depth budget; 0 keeps every mesh conforming.
    pub lambda_max: u32,
    pub theta: f64,
    pub gamma: f64,
    /// Stop once the global estimate falls below this.
    pub tol: f64,
    pub max_dofs: usize,
    pub cg_tol: f64,
    pub csv: Option<PathBuf>,
    pub vtk_dir: Option<PathBuf>,
    /// Snapshot cadence in iterations; ignored without `vtk_dir`.
    pub vtk_every: usize,
}

impl RunConfig {
    fn validate(&self) -> Result<(), CliError> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(CliError::BadConfig("theta must lie in (0, 1]"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CliError::BadConfig("alpha must lie in (0, 1)"));
        }
        if self.gamma <= 0.0 {
            return Err(CliError::BadConfig("gamma must be positive"));
        }
        if self.tol < 0.0 {
            return Err(CliError::BadConfig("tol must be nonnegative"));
        }
        if self.cg_tol <= 0.0 {
            return Err(CliError::BadConfig("cg-tol must be positive"));
        }
        if self.max_dofs == 0 {
            return Err(CliError::BadConfig("max-dofs must be at least 1"));
        }
        if self.vtk_dir.is_some() && self.vtk_every == 0 {
            return Err(CliError::BadConfig("vtk-every must be at least 1"));
        }
        Ok(())
    }

    fn domain(&self) -> Result<MeshForest, CliError> {
        match self.problem.as_str() {
            "fichera" => Ok(fichera_domain()?),
            other => Err(CliError::UnknownProblem(other.to_string())),
        }
    }

    /// Builds the problem data once; the error gauge caches its reference
    /// norm here, so both arms of a comparison report against the same one.
    fn spec(&self) -> Result<ProblemSpec, CliError> {
        match self.problem.as_str() {
            "fichera" => Ok(fichera_problem(self.alpha)),
            other => Err(CliError::UnknownProblem(other.to_string())),
        }
    }

    fn loop_config(&self, lambda_max: u32) -> GalerkinConfig {
        GalerkinConfig {
            theta: self.theta,
            gamma: self.gamma,
            lambda_max,
            tol: self.tol,
            max_dofs: self.max_dofs,
            cg_tol: self.cg_tol,
            qo_iters: 0,
            sampling: DataSampling::Centroid,
        }
    }
}

fn method_name(lambda_max: u32) -> &'static str {
    if lambda_max == 0 {
        "afem"
    } else {
        "avem"
    }
}

/// Drive one adaptive loop, writing VTK snapshots on the configured cadence.
fn run_one(
    config: &RunConfig,
    problem: &ProblemSpec,
    lambda_max: u32,
) -> Result<Vec<IterationRecord>, CliError> {
    let mut mesh = config.domain()?;
    if let Some(dir) = &config.vtk_dir {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.clone(),
            source,
        })?;
    }
    let method = method_name(lambda_max);
    let mut vtk_err: Option<CliError> = None;
    let records = galerkin_loop(&mut mesh, problem, &config.loop_config(lambda_max), |snap| {
        let Some(dir) = &config.vtk_dir else { return };
        if snap.iter % config.vtk_every != 0 || vtk_err.is_some() {
            return;
        }
        let path = dir.join(format!("{method}_{:04}.vtk", snap.iter));
        let title = format!("{} {method} iteration {}", config.problem, snap.iter);
        if let Err(source) = report::write_vtk(&path, snap.mesh, snap.solution, snap.eta_sq, &title)
        {
            vtk_err = Some(CliError::Io { path, source });
        }
    })?;
    if let Some(e) = vtk_err {
        return Err(e);
    }
    summarize(method, &records);
    Ok(records)
}

fn summarize(method: &str, records: &[IterationRecord]) {
    let last = records.last().expect("the loop always emits a record");
    let err = match last.h1_err {
        Some(e) => format!(", h1 error {e:.4}"),
        None => String::new(),
    };
    println!(
        "{method}: {} iterations, {} dofs, {} cells, eta {:.4}{err}",
        records.len(),
        last.ndofs,
        last.ncells,
        last.eta,
    );
}

fn write_table(path: &Path, records: &[IterationRecord]) -> Result<(), CliError> {
    report::write_csv(path, records).map_err(|source| CliError::Table {
        path: path.to_path_buf(),
        source,
    })
}

/// Run one experiment and report it.
pub fn run_experiment(config: &RunConfig) -> Result<Vec<IterationRecord>, CliError> {
    config.validate()?;
    let problem = config.spec()?;
    let records = run_one(config, &problem, config.lambda_max)?;
    if let Some(path) = &config.csv {
        write_table(path, &records)?;
    }
    Ok(records)
}

/// Run the conforming and hanging-node variants back to back on the same
/// problem (sharing the cached error gauge) and write the joined table.
pub fn compare(config: &RunConfig) -> Result<(), CliError> {
    config.validate()?;
    if config.lambda_max == 0 {
        return Err(CliError::BadConfig(
            "compare needs a positive lambda-max for its hanging-node arm",
        ));
    }
    let problem = config.spec()?;
    let afem = run_one(config, &problem, 0)?;
    let avem = run_one(config, &problem, config.lambda_max)?;
    if let Some(path) = &config.csv {
        report::write_labeled_csv(path, &[("afem", &afem), ("avem", &avem)]).map_err(
            |source| CliError::Table {
                path: path.clone(),
                source,
            },
        )?;
    }
    Ok(())
}
