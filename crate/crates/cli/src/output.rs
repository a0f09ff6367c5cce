use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;
use solstab::fields::TorusGrid;
use solstab::groundstate::{default_r_max, solve_ground_state_with, GroundState, GroundStateOptions};
use solstab::ProblemParams;

use crate::{CliError, ProfileArgs};

/// `dir/stem.manifest.json` next to the primary output.
pub fn manifest_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
    out.with_file_name(format!("{stem}.manifest.json"))
}

/// A sibling of `out` with another extension, e.g. the JSON summary of a CSV sweep.
pub fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
    out.with_file_name(format!("{stem}{suffix}"))
}

pub fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

#[derive(Serialize)]
struct GridInfo {
    d: usize,
    n: usize,
    l: f64,
}

#[derive(Serialize)]
struct GroundStateInfo {
    d: usize,
    p: f64,
    tol: f64,
    r_max: f64,
    c_q: f64,
    cached: bool,
}

#[derive(Serialize)]
struct Manifest<'a> {
    format: &'static str,
    version: u32,
    tool: &'static str,
    tool_version: &'static str,
    command: &'static str,
    config: &'a Value,
    jobs: usize,
    grid: Option<GridInfo>,
    ground_state: Option<GroundStateInfo>,
    seeds: Vec<u64>,
    outputs: Vec<String>,
    status: Option<String>,
    wall_time_s: f64,
}

/// Bookkeeping for one run, flushed to the manifest at the end.
pub struct Run {
    command: &'static str,
    config: Value,
    start: Instant,
    cache_dir: Option<PathBuf>,
    grid: Option<GridInfo>,
    ground_state: Option<GroundStateInfo>,
    outputs: Vec<String>,
    status: Option<String>,
}

impl Run {
    pub fn new(command: &'static str, config: Value, cache_dir: Option<PathBuf>) -> Self {
        Self {
            command,
            config,
            start: Instant::now(),
            cache_dir,
            grid: None,
            ground_state: None,
            outputs: Vec::new(),
            status: None,
        }
    }

    pub fn grid(&mut self, g: TorusGrid) {
        self.grid = Some(GridInfo { d: g.d, n: g.n, l: g.l });
    }

    pub fn status(&mut self, s: impl Into<String>) {
        self.status = Some(s.into());
    }

    pub fn output(&mut self, path: &Path, contents: &str) -> Result<(), CliError> {
        write(path, contents)?;
        self.outputs.push(path.display().to_string());
        Ok(())
    }

    pub fn record_output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    /// Ground state for `profile`, read from the cache directory when present there.
    pub fn ground_state(&mut self, profile: &ProfileArgs) -> Result<GroundState, CliError> {
        self.ground_state_for(profile.d, profile.p, profile.tol, profile.r_max)
    }

    pub fn ground_state_for(&mut self, d: usize, p: f64, tol: f64, r_max: Option<f64>) -> Result<GroundState, CliError> {
        if !(tol > 0.0) {
            return Err(CliError::Usage("--tol must be positive".into()));
        }
        let params = ProblemParams::new(d, p)?;
        let r_max = r_max.unwrap_or_else(|| default_r_max(tol));
        let key = format!("gs_d{d}_p{p}_tol{tol:e}_rmax{r_max}.json");
        let cached = self.cache_dir.as_ref().map(|dir| dir.join(&key));
        let mut hit = false;
        let gs = match cached.as_ref().filter(|path| path.exists()) {
            Some(path) => {
                let gs = GroundState::from_json(&std::fs::read_to_string(path)?)?;
                if gs.params != params || gs.tol != tol || gs.r_max != r_max {
                    return Err(CliError::Usage(format!("cache entry {} does not match its key", path.display())));
                }
                hit = true;
                gs
            }
            None => {
                let opts = GroundStateOptions { r_max: Some(r_max), ..GroundStateOptions::new(tol) };
                let gs = solve_ground_state_with(params, opts)?;
                if let Some(path) = &cached {
                    write(path, &gs.to_json()?)?;
                }
                gs
            }
        };
        self.ground_state = Some(GroundStateInfo { d, p, tol, r_max, c_q: gs.c_q, cached: hit });
        Ok(gs)
    }

    /// Writes the manifest beside `primary`.
    pub fn finish(self, primary: &Path, jobs: usize) -> Result<(), CliError> {
        let manifest = Manifest {
            format: "solstab.manifest",
            version: 1,
            tool: "solstab",
            tool_version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            config: &self.config,
            jobs,
            grid: self.grid,
            ground_state: self.ground_state,
            seeds: Vec::new(),
            outputs: self.outputs,
            status: self.status,
            wall_time_s: self.start.elapsed().as_secs_f64(),
        };
        write(&manifest_path(primary), &serde_json::to_string_pretty(&manifest)?)
    }
}
