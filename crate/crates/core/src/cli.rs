//! Batch front end: `segment`, `reconstruct`, `synth` and `stats`.
//!
//! Exit codes: 0 success, 2 I/O failure, 3 parse failure, 4 invalid
//! parameters or incomplete inputs, 5 inconsistency between stored files.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::descent::DescentParams;
use crate::error::Error;
use crate::labels::{Connectivity, LabelMap};
use crate::pipeline::{segment_image, SegmentParams};
use crate::pnm::{label_color, load_pgm, load_ppm, save_label_ppm, save_pgm, save_pgm_bytes};
use crate::reconstruct::{export_stats, level_report, reconstruct_level};
use crate::registry::{export_registry, RegistryDoc};
use crate::synth::{generate_scene, SceneSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_INVALID: i32 = 4;
pub const EXIT_INCONSISTENT: i32 = 5;

/// A failed command: the exit status and a one-line diagnostic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self::new(EXIT_IO, format!("{}: {e}", path.display()))
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidParam(_) => EXIT_INVALID,
            Error::InvalidImage(_) => EXIT_PARSE,
            Error::Consistency(_) | Error::DimensionMismatch { .. } => EXIT_INCONSISTENT,
        };
        Self::new(code, e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Emit {
    #[default]
    All,
    Top,
    Base,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: PathBuf,
    pub outdir: PathBuf,
    pub params: SegmentParams,
    pub emit: Emit,
}

impl RunConfig {
    /// Defaults for everything except the paths.
    pub fn new(input: impl Into<PathBuf>, outdir: impl Into<PathBuf>) -> Self {
        Self {
            input: input.into(),
            outdir: outdir.into(),
            params: SegmentParams::default(),
            emit: Emit::All,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "pyrseg", version, about = "Coarse-to-fine pyramid segmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Segment a PGM image and write per-level outputs.
    Segment {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        outdir: PathBuf,
        #[arg(long, default_value_t = 256)]
        top_area: usize,
        #[arg(long, default_value_t = 12.0)]
        tolerance: f64,
        #[arg(long, default_value_t = 12.0)]
        epsilon: f64,
        #[arg(long, default_value_t = 10)]
        max_iters: usize,
        #[arg(long, default_value_t = 4)]
        connectivity: u32,
        #[arg(long, value_enum, default_value_t = Emit::All)]
        emit: Emit,
    },
    /// Rebuild one level's means image from registry.json and its label image.
    Reconstruct {
        #[arg(long)]
        registry: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        level: usize,
        #[arg(long)]
        output: PathBuf,
    },
    /// Render a synthetic scene and its ground truth into a directory.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the per-level table of a finished run.
    Stats {
        #[arg(long)]
        run: PathBuf,
    },
}

pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Segment {
            input,
            outdir,
            top_area,
            tolerance,
            epsilon,
            max_iters,
            connectivity,
            emit,
        } => Connectivity::from_count(connectivity)
            .ok_or_else(|| CliError::new(EXIT_INVALID, format!("connectivity must be 4 or 8, got {connectivity}")))
            .and_then(|connectivity| {
                cmd_segment(&RunConfig {
                    input,
                    outdir,
                    params: SegmentParams {
                        top_area,
                        tolerance,
                        descent: DescentParams {
                            epsilon,
                            max_iters,
                            connectivity,
                        },
                    },
                    emit,
                })
            }),
        Command::Reconstruct {
            registry,
            labels,
            level,
            output,
        } => cmd_reconstruct(&registry, &labels, level, &output),
        Command::Synth { spec, out } => cmd_synth(&spec, &out),
        Command::Stats { run } => cmd_stats(&run).map(|table| print!("{table}")),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("pyrseg: {}", e.message);
            e.code
        }
    }
}

fn read(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

/// Files destined for one directory, written all at once or not at all.
struct Staged {
    files: Vec<(String, Vec<u8>)>,
}

impl Staged {
    fn new() -> Self {
        Self { files: Vec::new() }
    }

    fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    /// Writes into a sibling staging directory, then moves the files into
    /// `dir`. On failure nothing new is left behind.
    fn commit(self, dir: &Path) -> CliResult<()> {
        let name = dir
            .file_name()
            .ok_or_else(|| CliError::new(EXIT_INVALID, format!("bad output directory {}", dir.display())))?;
        let parent = match dir.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        let mut staging_name = OsString::from(".");
        staging_name.push(name);
        staging_name.push(format!(".staging-{}", std::process::id()));
        let staging = parent.join(staging_name);

        let write_all = || -> CliResult<()> {
            fs::create_dir(&staging).map_err(|e| CliError::io(&staging, e))?;
            for (file, bytes) in &self.files {
                let p = staging.join(file);
                fs::write(&p, bytes).map_err(|e| CliError::io(&p, e))?;
            }
            Ok(())
        };
        if let Err(e) = write_all() {
            let _ = fs::remove_dir_all(&staging);
            return Err(e);
        }

        if !dir.exists() {
            return fs::rename(&staging, dir).map_err(|e| {
                let _ = fs::remove_dir_all(&staging);
                CliError::io(dir, e)
            });
        }
        if !dir.is_dir() {
            let _ = fs::remove_dir_all(&staging);
            return Err(CliError::new(EXIT_IO, format!("{} is not a directory", dir.display())));
        }
        let mut moved: Vec<PathBuf> = Vec::new();
        for (file, _) in &self.files {
            let target = dir.join(file);
            let fresh = !target.exists();
            if let Err(e) = fs::rename(staging.join(file), &target) {
                for p in &moved {
                    let _ = fs::remove_file(p);
                }
                let _ = fs::remove_dir_all(&staging);
                return Err(CliError::io(&target, e));
            }
            if fresh {
                moved.push(target);
            }
        }
        let _ = fs::remove_dir_all(&staging);
        Ok(())
    }
}

/// Segments `cfg.input` and writes the run into `cfg.outdir`.
pub fn cmd_segment(cfg: &RunConfig) -> CliResult<()> {
    if cfg.input.as_os_str().is_empty() || cfg.outdir.as_os_str().is_empty() {
        return Err(CliError::new(EXIT_INVALID, "input and output paths must be non-empty"));
    }
    cfg.params.validate()?;
    let bytes = read(&cfg.input)?;
    let img = load_pgm(&bytes).map_err(|e| CliError::new(EXIT_PARSE, format!("{}: {e}", cfg.input.display())))?;
    let (pyr, result) = segment_image(&img, &cfg.params)?;

    let registry = export_registry(&result);
    let stats = export_stats(&level_report(&result, &pyr)?);
    // Means images come from the stored descriptions, exactly as `reconstruct`
    // would rebuild them.
    let doc = RegistryDoc::parse(&registry)
        .map_err(|e| CliError::new(EXIT_INCONSISTENT, format!("registry round trip: {e}")))?;

    let top = pyr.top_index();
    let mut staged = Staged::new();
    for entry in &result.levels {
        let k = entry.level;
        let wanted = match cfg.emit {
            Emit::All => true,
            Emit::Top => k == top,
            Emit::Base => k == 0,
        };
        if !wanted {
            continue;
        }
        let records = doc
            .level(k)
            .ok_or_else(|| CliError::new(EXIT_INCONSISTENT, format!("level {k} missing after export")))?
            .records()?;
        staged.add(format!("L{k}_labels.ppm"), save_label_ppm(&entry.labels));
        staged.add(
            format!("L{k}_means.pgm"),
            save_pgm(&reconstruct_level(&entry.labels, &records)?),
        );
    }
    staged.add("registry.json", registry);
    staged.add("stats.json", stats);
    staged.commit(&cfg.outdir)
}

/// Rebuilds level `level` from `registry` and the colorized label image
/// alone, writing the means PGM to `output`.
pub fn cmd_reconstruct(registry: &Path, labels: &Path, level: usize, output: &Path) -> CliResult<()> {
    let doc = RegistryDoc::parse(&read(registry)?)
        .map_err(|e| CliError::new(EXIT_PARSE, format!("{}: {e}", registry.display())))?;
    let level_doc = doc
        .level(level)
        .ok_or_else(|| CliError::new(EXIT_INVALID, format!("level {level} not in registry")))?;
    let records = level_doc.records()?;
    let rgb = load_ppm(&read(labels)?).map_err(|e| CliError::new(EXIT_PARSE, format!("{}: {e}", labels.display())))?;
    if (rgb.width, rgb.height) != (level_doc.width, level_doc.height) {
        return Err(CliError::new(
            EXIT_INCONSISTENT,
            format!(
                "label image is {}x{}, registry level {level} is {}x{}",
                rgb.width, rgb.height, level_doc.width, level_doc.height
            ),
        ));
    }

    let mut by_color: HashMap<[u8; 3], u32> = HashMap::with_capacity(records.len());
    for r in &records {
        if let Some(prev) = by_color.insert(label_color(r.id), r.id) {
            return Err(CliError::new(
                EXIT_INCONSISTENT,
                format!("regions {prev} and {} share a color", r.id),
            ));
        }
    }
    let ids = rgb
        .data
        .iter()
        .map(|c| {
            by_color.get(c).copied().ok_or_else(|| {
                CliError::new(
                    EXIT_INCONSISTENT,
                    format!("color {c:?} matches no region of level {level}"),
                )
            })
        })
        .collect::<CliResult<Vec<u32>>>()?;
    let map = LabelMap::new(rgb.width, rgb.height, ids)?;

    let mut counts: HashMap<u32, u64> = HashMap::new();
    for &id in map.as_slice() {
        *counts.entry(id).or_default() += 1;
    }
    for r in &records {
        let found = counts.get(&r.id).copied().unwrap_or(0);
        if found != r.pixel_count {
            return Err(CliError::new(
                EXIT_INCONSISTENT,
                format!("region {} has {found} pixels, registry says {}", r.id, r.pixel_count),
            ));
        }
    }

    let out = save_pgm(&reconstruct_level(&map, &records)?);
    write_file_atomic(output, &out)
}

fn write_file_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp-{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        CliError::io(path, e)
    })?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        CliError::io(path, e)
    })
}

/// Renders the scene described by the JSON file `spec` into directory `out`:
/// `scene.pgm` plus `truth.pgm` (one 8-bit sample per id) when there are at
/// most 256 ids, else `truth.raw` (row-major big-endian u16 ids, same
/// dimensions as the scene).
pub fn cmd_synth(spec: &Path, out: &Path) -> CliResult<()> {
    let spec = SceneSpec::from_json(&read(spec)?)?;
    let scene = generate_scene(&spec)?;
    let mut staged = Staged::new();
    staged.add("scene.pgm", save_pgm(&scene.image));
    let truth = scene.truth.as_slice();
    if scene.truth.region_count() <= 256 {
        let samples: Vec<u8> = truth.iter().map(|&id| id as u8).collect();
        staged.add(
            "truth.pgm",
            save_pgm_bytes(scene.truth.width(), scene.truth.height(), &samples),
        );
    } else {
        staged.add(
            "truth.raw",
            truth.iter().flat_map(|&id| (id as u16).to_be_bytes()).collect(),
        );
    }
    staged.commit(out)
}

#[derive(Debug, Deserialize)]
struct StatsRow {
    level: usize,
    region_count: usize,
    rmse_vs_level_image: f64,
    uncertain_fraction: f64,
    iterations_used: usize,
}

/// Formats the per-level table of the run stored in `run`.
pub fn cmd_stats(run: &Path) -> CliResult<String> {
    let incomplete = |what: String| CliError::new(EXIT_INVALID, format!("incomplete run in {}: {what}", run.display()));
    let stats_path = run.join("stats.json");
    let registry_path = run.join("registry.json");
    let stats_bytes = fs::read(&stats_path).map_err(|e| incomplete(format!("stats.json: {e}")))?;
    let registry_bytes = fs::read(&registry_path).map_err(|e| incomplete(format!("registry.json: {e}")))?;
    let rows: Vec<StatsRow> =
        serde_json::from_slice(&stats_bytes).map_err(|e| incomplete(format!("stats.json: {e}")))?;
    let doc = RegistryDoc::parse(&registry_bytes).map_err(|e| incomplete(format!("registry.json: {e}")))?;
    if rows.len() != doc.levels.len() {
        return Err(incomplete(format!(
            "stats.json has {} levels, registry.json has {}",
            rows.len(),
            doc.levels.len()
        )));
    }

    let mut s = format!(
        "{:>5} {:>6} {:>6} {:>8} {:>10} {:>5} {:>12}\n",
        "level", "width", "height", "regions", "uncertain", "iters", "rmse"
    );
    for row in &rows {
        let lv = doc
            .level(row.level)
            .ok_or_else(|| incomplete(format!("level {} missing from registry.json", row.level)))?;
        let _ = writeln!(
            s,
            "{:>5} {:>6} {:>6} {:>8} {:>10.6} {:>5} {:>12.6}",
            row.level,
            lv.width,
            lv.height,
            row.region_count,
            row.uncertain_fraction,
            row.iterations_used,
            row.rmse_vs_level_image
        );
    }
    Ok(s)
}
