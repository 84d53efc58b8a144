//! Command-line interface: the only code that touches the file system.
//!
//! Subcommands:
//!
//! - `analyze <image>` — fit a junction field and write the field dump
//!   (JSON), the boundary map (16-bit PGM), the smoothed image (8-bit
//!   PGM/PPM), and the vertex detections (CSV) into `--out-dir`.
//! - `smooth <image>` — same pipeline, smoothed image only.
//! - `dataset gen` — write the synthetic benchmark images with their
//!   ground-truth JSON files.
//! - `eval boundaries|vertices` — score a prediction file against a
//!   ground-truth JSON file.
//! - `sweep` — run the noise-resilience experiment on synthetic junction
//!   scenes and emit a CSV of boundary F-score versus noise level.
//!
//! Every flag defaults to the corresponding [`Config`] default, runs are
//! byte-reproducible for a fixed seed, and the exit code is 0 exactly when
//! all requested outputs were written.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{ColorModel, Config};
use crate::error::{Error, Result};
use crate::eval::dataset::{self, GroundTruth};
use crate::eval::metrics;
use crate::image::ScalarField;
use crate::pipeline::{analyze_image, analyze_logged, Analysis, FieldDump};
use crate::pnm;

/// Boundary structure from images via per-patch junction fits.
#[derive(Parser)]
#[command(name = "foj", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit a junction field and write all outputs.
    Analyze(AnalyzeArgs),
    /// Fit a junction field and write only the smoothed image.
    Smooth(AnalyzeArgs),
    /// Synthetic benchmark dataset tools.
    Dataset {
        #[command(subcommand)]
        cmd: DatasetCmd,
    },
    /// Score predictions against ground truth.
    Eval {
        #[command(subcommand)]
        cmd: EvalCmd,
    },
    /// Noise-resilience experiment: boundary F-score versus noise level.
    Sweep(SweepArgs),
}

fn parse_color_model(s: &str) -> std::result::Result<ColorModel, String> {
    match s {
        "constant" => Ok(ColorModel::Constant),
        "linear" => Ok(ColorModel::Linear),
        other => Err(format!("unknown color model {other:?}; use constant|linear")),
    }
}

/// Pipeline tunables; defaults mirror [`Config::default`].
#[derive(Args)]
struct ConfigFlags {
    /// Patch side length R (odd, at least 3).
    #[arg(long, default_value_t = Config::default().patch_size)]
    patch_size: usize,
    /// Junction order M: wedge count, 3 or 4.
    #[arg(long = "m", default_value_t = Config::default().order)]
    m: usize,
    /// Patch grid stride.
    #[arg(long, default_value_t = Config::default().stride)]
    stride: usize,
    /// Wedge color model: constant|linear.
    #[arg(long, value_parser = parse_color_model, default_value = "constant")]
    color_model: ColorModel,
    /// Boundary-consensus weight.
    #[arg(long = "lambda-b", default_value_t = Config::default().lambda_boundary)]
    lambda_b: f64,
    /// Color-consensus weight.
    #[arg(long = "lambda-c", default_value_t = Config::default().lambda_color)]
    lambda_c: f64,
    /// Wedge-membership smoothing width, in patch half-widths.
    #[arg(long, default_value_t = Config::default().eta)]
    eta: f64,
    /// Boundary-map ridge width, in patch half-widths.
    #[arg(long, default_value_t = Config::default().delta)]
    delta: f64,
    /// Coordinate-descent rounds during initialization.
    #[arg(long, default_value_t = Config::default().n_init)]
    n_init: usize,
    /// Gradient-refinement iterations.
    #[arg(long, default_value_t = Config::default().n_iter)]
    n_iter: usize,
    /// Adam step size for vertex coordinates.
    #[arg(long, default_value_t = Config::default().lr_vertex)]
    lr_vertex: f64,
    /// Adam step size for angles.
    #[arg(long, default_value_t = Config::default().lr_angle)]
    lr_angle: f64,
    /// Candidate angles per coordinate-descent update.
    #[arg(long, default_value_t = Config::default().angle_samples)]
    angle_samples: usize,
    /// Candidate positions per vertex sweep.
    #[arg(long, default_value_t = Config::default().vertex_samples)]
    vertex_samples: usize,
    /// Offer an initializer restart every this many iterations (0 = never).
    #[arg(long, default_value_t = Config::default().reinit_every)]
    reinit_every: usize,
    /// Vertex-vote locality width: down-weights votes whose vertex sits far
    /// from its patch center [default: 2·patch-size].
    #[arg(long)]
    gamma: Option<f64>,
    /// Width of the Gaussian vote each junction casts [default:
    /// patch-size/2].
    #[arg(long)]
    nu_d: Option<f64>,
    /// Vertex-vote angle-degeneracy suppression exponent.
    #[arg(long, default_value_t = Config::default().nu_e)]
    nu_e: f64,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = Config::default().threads)]
    threads: usize,
    /// Seed for every random draw.
    #[arg(long, default_value_t = Config::default().seed)]
    seed: u64,
}

impl ConfigFlags {
    fn to_config(&self) -> Config {
        Config {
            patch_size: self.patch_size,
            order: self.m,
            stride: self.stride,
            color_model: self.color_model,
            lambda_boundary: self.lambda_b,
            lambda_color: self.lambda_c,
            eta: self.eta,
            delta: self.delta,
            n_init: self.n_init,
            n_iter: self.n_iter,
            lr_vertex: self.lr_vertex,
            lr_angle: self.lr_angle,
            angle_samples: self.angle_samples,
            vertex_samples: self.vertex_samples,
            reinit_every: self.reinit_every,
            gamma: self.gamma,
            nu_d: self.nu_d,
            nu_e: self.nu_e,
            threads: self.threads,
            seed: self.seed,
            ..Config::default()
        }
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Input image (PGM or PPM, any maxval up to 65535).
    input: PathBuf,
    #[command(flatten)]
    cfg: ConfigFlags,
    /// Directory receiving the output files.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Also write per-iteration refinement metrics to this CSV file.
    #[arg(long)]
    log_csv: Option<PathBuf>,
}

#[derive(Subcommand)]
enum DatasetCmd {
    /// Generate benchmark images (`img_NNN.pgm`) with ground truth
    /// (`gt_NNN.json`).
    Gen {
        /// Generator seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Number of images to write (indices 0..count).
        #[arg(long, default_value_t = dataset::DATASET_SIZE)]
        count: usize,
    },
}

#[derive(Subcommand)]
enum EvalCmd {
    /// Score a boundary map (PGM) against ground truth, sweeping the
    /// binarization threshold.
    Boundaries {
        /// Predicted boundary map.
        #[arg(long)]
        pred: PathBuf,
        /// Ground-truth JSON.
        #[arg(long)]
        gt: PathBuf,
        /// Matching tolerance in pixels.
        #[arg(long, default_value_t = 2.0)]
        match_dist: f64,
    },
    /// Score a vertex CSV against ground truth.
    Vertices {
        /// Predicted vertices (CSV: x,y,score,angles_deg).
        #[arg(long)]
        pred: PathBuf,
        /// Ground-truth JSON.
        #[arg(long)]
        gt: PathBuf,
        /// Matching tolerance in pixels.
        #[arg(long, default_value_t = 2.0)]
        match_dist: f64,
    },
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    cfg: ConfigFlags,
    /// Comma-separated noise standard deviations.
    #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3")]
    sigma_list: Vec<f64>,
    /// Synthetic junction scenes per noise level.
    #[arg(long, default_value_t = 10)]
    count: usize,
    /// Matching tolerance in pixels.
    #[arg(long, default_value_t = 2.0)]
    match_dist: f64,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `std::env::args` and runs the requested command, returning the
/// process exit code: 0 on success, 1 on any runtime failure, 2 on a
/// command-line usage error.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Analyze(a) => cmd_analyze(&a, false),
        Cmd::Smooth(a) => cmd_analyze(&a, true),
        Cmd::Dataset {
            cmd: DatasetCmd::Gen { seed, out, count },
        } => cmd_dataset_gen(seed, &out, count),
        Cmd::Eval { cmd } => match cmd {
            EvalCmd::Boundaries {
                pred,
                gt,
                match_dist,
            } => cmd_eval_boundaries(&pred, &gt, match_dist),
            EvalCmd::Vertices {
                pred,
                gt,
                match_dist,
            } => cmd_eval_vertices(&pred, &gt, match_dist),
        },
        Cmd::Sweep(s) => cmd_sweep(&s),
    }
}

fn run_analysis(args: &AnalyzeArgs) -> Result<Analysis> {
    let image = pnm::read(&args.input)?;
    let cfg = args.cfg.to_config();
    match &args.log_csv {
        Some(path) => {
            let mut log = Vec::new();
            let out = analyze_logged(&image, &cfg, &mut log)?;
            fs::write(path, log)?;
            Ok(out)
        }
        None => analyze_image(&image, &cfg),
    }
}

/// Formats the vertex detections as `x,y,score,angles_deg` CSV rows, the
/// angle set `;`-joined in degrees.
fn vertices_csv(analysis: &Analysis) -> String {
    let mut out = String::from("x,y,score,angles_deg\n");
    for d in &analysis.detections {
        let angles: Vec<String> = d
            .angles
            .iter()
            .map(|a| format!("{}", a.to_degrees()))
            .collect();
        out.push_str(&format!(
            "{},{},{},{}\n",
            d.point[0],
            d.point[1],
            d.score,
            angles.join(";")
        ));
    }
    out
}

fn cmd_analyze(args: &AnalyzeArgs, smooth_only: bool) -> Result<()> {
    let analysis = run_analysis(args)?;
    fs::create_dir_all(&args.out_dir)?;
    let smoothed_name = if analysis.smoothed.channels() == 3 {
        "smoothed.ppm"
    } else {
        "smoothed.pgm"
    };
    pnm::write(&args.out_dir.join(smoothed_name), &analysis.smoothed)?;
    if smooth_only {
        return Ok(());
    }
    pnm::write_gray16(&args.out_dir.join("boundary.pgm"), &analysis.boundary)?;
    let dump = FieldDump::from_field(&analysis.field);
    let json = serde_json::to_vec_pretty(&dump).expect("field dump serializes");
    fs::write(args.out_dir.join("field.json"), json)?;
    fs::write(args.out_dir.join("vertices.csv"), vertices_csv(&analysis))?;
    Ok(())
}

fn cmd_dataset_gen(seed: u64, out: &Path, count: usize) -> Result<()> {
    if count > dataset::DATASET_SIZE {
        return Err(Error::Config(format!(
            "count {count} exceeds the dataset size {}",
            dataset::DATASET_SIZE
        )));
    }
    dataset::write_dataset(out, seed, count)
}

fn load_ground_truth(path: &Path) -> Result<GroundTruth> {
    let bytes = fs::read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Codec {
        format: "json",
        reason: format!("{path:?}: {e}"),
    })
}

fn load_scalar_map(path: &Path) -> Result<ScalarField> {
    let image = pnm::read(path)?;
    if image.channels() != 1 {
        return Err(Error::Image(format!(
            "{path:?} is not a single-channel map"
        )));
    }
    let mut map = ScalarField::new(image.width(), image.height());
    for y in 0..image.height() {
        for x in 0..image.width() {
            map.set(x, y, image.sample(x, y, 0));
        }
    }
    Ok(map)
}

fn cmd_eval_boundaries(pred: &Path, gt: &Path, match_dist: f64) -> Result<()> {
    let map = load_scalar_map(pred)?;
    let truth = load_ground_truth(gt)?;
    if (map.width(), map.height()) != (truth.width, truth.height) {
        return Err(Error::Image(format!(
            "prediction is {}x{}, ground truth {}x{}",
            map.width(),
            map.height(),
            truth.width,
            truth.height
        )));
    }
    let (threshold, pr) = metrics::best_boundary_fscore(&map, &truth, match_dist);
    println!("threshold,precision,recall,f");
    println!("{},{},{},{}", threshold, pr.precision, pr.recall, pr.f);
    Ok(())
}

/// Parses a `x,y,score,angles_deg` CSV (as written by `analyze`) into
/// points and angle sets in radians.
fn read_vertex_csv(path: &Path) -> Result<(Vec<[f64; 2]>, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(path)?;
    let bad = |reason: String| Error::Codec {
        format: "csv",
        reason,
    };
    let mut points = Vec::new();
    let mut angle_sets = Vec::new();
    for (ln, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 4 {
            return Err(bad(format!("line {}: expected 4 columns", ln + 1)));
        }
        let num = |s: &str| -> Result<f64> {
            s.trim()
                .parse()
                .map_err(|_| bad(format!("line {}: bad number {s:?}", ln + 1)))
        };
        points.push([num(cells[0])?, num(cells[1])?]);
        let mut angles = Vec::new();
        for part in cells[3].split(';').filter(|p| !p.trim().is_empty()) {
            angles.push(num(part)?.to_radians());
        }
        angle_sets.push(angles);
    }
    Ok((points, angle_sets))
}

fn cmd_eval_vertices(pred: &Path, gt: &Path, match_dist: f64) -> Result<()> {
    let (points, angle_sets) = read_vertex_csv(pred)?;
    let truth = load_ground_truth(gt)?;
    let gt_points: Vec<[f64; 2]> = truth.vertices.iter().map(|v| v.point).collect();
    let pr = metrics::vertex_fscore(&points, &gt_points, match_dist);
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = metrics::match_points(&points, &gt_points, match_dist)
        .into_iter()
        .map(|(i, j)| (angle_sets[i].clone(), truth.vertices[j].angles_rad()))
        .collect();
    let angle_err = metrics::mean_angle_error_deg(&pairs);
    println!("precision,recall,f,angle_error_deg");
    println!("{},{},{},{}", pr.precision, pr.recall, pr.f, angle_err);
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let cfg = args.cfg.to_config();
    cfg.validate()?;
    let mut csv = String::from("sigma,boundary_f\n");
    for (si, &sigma) in args.sigma_list.iter().enumerate() {
        if sigma < 0.0 {
            return Err(Error::Config(format!("negative noise level {sigma}")));
        }
        let mut total = 0.0;
        for i in 0..args.count {
            let index = 200 + i % dataset::PER_TYPE;
            let (clean, gt) = dataset::generate_image(cfg.seed, index);
            let noise_seed = cfg
                .seed
                .wrapping_mul(1_000_003)
                .wrapping_add((si * args.count + i) as u64 + 1);
            let noisy = dataset::add_noise(&clean, sigma, noise_seed);
            let analysis = analyze_image(&noisy, &cfg)?;
            let (_, pr) = metrics::best_boundary_fscore(&analysis.boundary, &gt, args.match_dist);
            total += pr.f;
        }
        csv.push_str(&format!("{},{}\n", sigma, total / args.count as f64));
    }
    match &args.out {
        Some(path) => fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_well_formed() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flag_defaults_mirror_the_config_defaults() {
        let cli = Cli::try_parse_from(["foj", "analyze", "input.pgm"]).unwrap();
        match cli.cmd {
            Cmd::Analyze(a) => assert_eq!(a.cfg.to_config(), Config::default()),
            _ => unreachable!(),
        }
    }

    #[test]
    fn flags_reach_the_config() {
        let cli = Cli::try_parse_from([
            "foj",
            "analyze",
            "input.pgm",
            "--patch-size",
            "11",
            "--m",
            "4",
            "--color-model",
            "linear",
            "--lambda-b",
            "0.7",
            "--lambda-c",
            "0.2",
            "--stride",
            "3",
            "--gamma",
            "9.5",
            "--seed",
            "42",
        ])
        .unwrap();
        match cli.cmd {
            Cmd::Analyze(a) => {
                let cfg = a.cfg.to_config();
                assert_eq!(cfg.patch_size, 11);
                assert_eq!(cfg.order, 4);
                assert_eq!(cfg.color_model, ColorModel::Linear);
                assert_eq!(cfg.lambda_boundary, 0.7);
                assert_eq!(cfg.lambda_color, 0.2);
                assert_eq!(cfg.stride, 3);
                assert_eq!(cfg.gamma, Some(9.5));
                assert_eq!(cfg.nu_d, None);
                assert_eq!(cfg.seed, 42);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn unknown_color_model_is_a_usage_error() {
        let r = Cli::try_parse_from(["foj", "analyze", "x.pgm", "--color-model", "cubic"]);
        assert!(r.is_err());
    }

    #[test]
    fn sigma_list_parses_comma_separated() {
        let cli = Cli::try_parse_from(["foj", "sweep", "--sigma-list", "0,0.15,0.3"]).unwrap();
        match cli.cmd {
            Cmd::Sweep(s) => assert_eq!(s.sigma_list, vec![0.0, 0.15, 0.3]),
            _ => unreachable!(),
        }
    }

    #[test]
    fn vertex_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.csv");
        fs::write(
            &path,
            "x,y,score,angles_deg\n3.5,7.25,0.9,90;180;270\n10,11,0.5,\n",
        )
        .unwrap();
        let (points, angles) = read_vertex_csv(&path).unwrap();
        assert_eq!(points, vec![[3.5, 7.25], [10.0, 11.0]]);
        assert_eq!(angles[0].len(), 3);
        assert!((angles[0][0] - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!(angles[1].is_empty());
    }

    #[test]
    fn malformed_vertex_csv_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.csv");
        fs::write(&path, "x,y,score,angles_deg\n1,2,3\n").unwrap();
        assert!(read_vertex_csv(&path).is_err());
    }
}
