use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use heatrack::config::PipelineConfig;
use heatrack::evaluation::{evaluate_run, frame_samples, detection_points, track_points};
use heatrack::io::{
    frame_file_name, load_checkpoint, read_csv_file, save_checkpoint, write_csv_file, write_pgm, write_ppm,
    DetectionRow, FrameStore, TrackRow, TruthRow,
};
use heatrack::metrics::{detection_pr_curve, match_detections, ScoredPoint};
use heatrack::net::{train_observed, write_loss_csv, Model};
use heatrack::pipeline::run_tracking;
use heatrack::synth::{simulate, training_set, Scene};
use heatrack::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "heatrack", version, about = "Heat-map detection and tracking of small moving vehicles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// key = value configuration file
    #[arg(long, short)]
    config: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> heatrack::Result<PipelineConfig> {
        match &self.config {
            Some(p) => PipelineConfig::load(p),
            None => Ok(PipelineConfig::default()),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic sequence: frames plus truth.csv
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        /// Overrides scenario.seed
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides scenario.frames
        #[arg(long)]
        frames: Option<usize>,
    },
    /// Train a model on one or more simulated sequence directories
    Train {
        #[command(flatten)]
        common: Common,
        /// Directory with frame_*.pgm and truth.csv; repeatable
        #[arg(long, required = true)]
        data: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        loss_csv: Option<PathBuf>,
        /// Train without confidence reduction and center propagation
        #[arg(long)]
        no_rcr_rcp: bool,
    },
    /// Detect and track objects through a frame directory
    Track {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        tracks: PathBuf,
        /// Also write every decoded peak
        #[arg(long)]
        detections: Option<PathBuf>,
    },
    /// Score tracks (and optionally all peaks) against truth
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        tracks: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        detections: Option<PathBuf>,
        /// Matching distance in pixels; overrides eval.gate
        #[arg(long)]
        gate: Option<f64>,
        /// Second, tighter gate; overrides eval.tight_gate
        #[arg(long)]
        tight_gate: Option<f64>,
        /// Comma-separated track IoU thresholds; overrides eval.iou_thresholds
        #[arg(long, value_delimiter = ',')]
        iou: Option<Vec<f64>>,
        /// Class to score; overrides eval.class
        #[arg(long)]
        class: Option<usize>,
        /// Write the report here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the precision-recall sweep at the main gate
        #[arg(long)]
        pr_csv: Option<PathBuf>,
    },
    /// Draw tracks (and matching outcome against truth) onto the frames
    Overlay {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        tracks: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::InvalidInput(_) | Error::Shape(_) => EXIT_CONFIG,
        Error::Io(_) | Error::Csv { .. } | Error::Image { .. } | Error::Checkpoint(_) => EXIT_IO,
        Error::Diverged { .. } => EXIT_FAILURE,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn ensure_dir(dir: &Path) -> heatrack::Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", dir.display()))))
}

fn load_scene(dir: &Path) -> heatrack::Result<Scene> {
    let store = FrameStore::open(dir)?;
    let frames = store.iter().collect::<heatrack::Result<Vec<_>>>()?;
    let truth: Vec<TruthRow> = read_csv_file(&dir.join("truth.csv"))?;
    Scene::from_parts(frames, &truth)
}

fn run(command: Command) -> heatrack::Result<()> {
    match command {
        Command::Simulate {
            common,
            out,
            seed,
            frames,
        } => {
            let mut cfg = common.load()?.scenario;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(n) = frames {
                cfg.frame_count = n;
            }
            let scene = simulate(&cfg)?;
            ensure_dir(&out)?;
            for (i, f) in scene.frames.iter().enumerate() {
                write_pgm(&out.join(frame_file_name(i)), f)?;
            }
            write_csv_file(&out.join("truth.csv"), &scene.truth_rows())?;
            eprintln!("wrote {} frames and {} tracks to {}", scene.frames.len(), scene.tracks.len(), out.display());
        }
        Command::Train {
            common,
            data,
            out,
            loss_csv,
            no_rcr_rcp,
        } => {
            let cfg = common.load()?;
            let scenes = data.iter().map(|d| load_scene(d)).collect::<heatrack::Result<Vec<_>>>()?;
            let set = training_set(&scenes);
            let augment = if no_rcr_rcp {
                cfg.augment.without_rcr_rcp()
            } else {
                cfg.augment.clone()
            };
            eprintln!("training on {} frames", set.frames.len());
            let mut last_epoch = None;
            let outcome = train_observed(&set, &cfg.train, cfg.net, &augment, &cfg.render, |r| {
                if last_epoch != Some(r.epoch) {
                    eprintln!("epoch {} (step {}): loss {:.4}", r.epoch, r.step, r.total);
                    last_epoch = Some(r.epoch);
                }
            })?;
            if let Some(last) = outcome.history.last() {
                eprintln!("final step {}: loss {:.4}", last.step, last.total);
            }
            save_checkpoint(&out, &outcome.params)?;
            if let Some(path) = loss_csv {
                let file = std::fs::File::create(&path)
                    .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
                write_loss_csv(&outcome.history, std::io::BufWriter::new(file))?;
            }
        }
        Command::Track {
            common,
            frames,
            checkpoint,
            tracks,
            detections,
        } => {
            let cfg = common.load()?;
            let params = load_checkpoint(&checkpoint)?;
            if params.config.classes != cfg.classes {
                return Err(Error::Config {
                    location: checkpoint.display().to_string(),
                    message: format!(
                        "checkpoint has {} classes, configuration has {}",
                        params.config.classes, cfg.classes
                    ),
                });
            }
            let model = Model::new(params)?;
            let store = FrameStore::open(&frames)?;
            let run = run_tracking(store.iter(), &model, &cfg.tracking)?;
            write_csv_file(&tracks, &run.tracks)?;
            if let Some(path) = detections {
                write_csv_file(&path, &run.detections)?;
            }
            eprintln!("tracked {} frames: {} track points", store.len(), run.tracks.len());
        }
        Command::Eval {
            common,
            tracks,
            truth,
            detections,
            gate,
            tight_gate,
            iou,
            class,
            out,
            pr_csv,
        } => {
            let mut ev = common.load()?.eval;
            if let Some(g) = gate {
                ev.gate = g;
            }
            if let Some(g) = tight_gate {
                ev.tight_gate = g;
            }
            if let Some(t) = iou {
                ev.iou_thresholds = t;
            }
            if let Some(c) = class {
                ev.class = c;
            }
            let track_rows: Vec<TrackRow> = read_csv_file(&tracks)?;
            let truth_rows: Vec<TruthRow> = read_csv_file(&truth)?;
            let det_rows: Option<Vec<DetectionRow>> = detections.as_deref().map(read_csv_file).transpose()?;
            let report = evaluate_run(&track_rows, det_rows.as_deref(), &truth_rows, &ev)?;
            let text = report.to_text();
            match out {
                Some(path) => std::fs::write(&path, text)
                    .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?,
                None => print!("{text}"),
            }
            if let Some(path) = pr_csv {
                let samples = match &det_rows {
                    Some(d) => frame_samples(detection_points(d), &truth_rows, ev.class),
                    None => frame_samples(track_points(&track_rows), &truth_rows, ev.class),
                };
                let curve = detection_pr_curve(&samples, ev.gate)?;
                let mut s = String::from("threshold,recall,precision\n");
                for p in &curve.points {
                    s.push_str(&format!("{},{},{}\n", p.threshold, p.recall, p.precision));
                }
                std::fs::write(&path, s)
                    .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
            }
        }
        Command::Overlay {
            common,
            frames,
            tracks,
            truth,
            out,
        } => {
            let ev = common.load()?.eval;
            let store = FrameStore::open(&frames)?;
            let track_rows: Vec<TrackRow> = read_csv_file(&tracks)?;
            let truth_rows: Option<Vec<TruthRow>> = truth.as_deref().map(read_csv_file).transpose()?;
            ensure_dir(&out)?;
            for i in 0..store.len() {
                let frame = store.load(i)?;
                let rgb = overlay_frame(&frame, i, &track_rows, truth_rows.as_deref(), ev.class, ev.gate)?;
                let name = frame_file_name(i).replace(".pgm", ".ppm");
                write_ppm(&out.join(name), frame.width(), frame.height(), &rgb)?;
            }
            eprintln!("wrote {} overlays to {}", store.len(), out.display());
        }
    }
    Ok(())
}

const TRUE_POSITIVE: [u8; 3] = [255, 255, 0];
const FALSE_POSITIVE: [u8; 3] = [0, 255, 0];
const FALSE_NEGATIVE: [u8; 3] = [255, 0, 255];

/// Square outline of half-size 3 around `(x, y)`, clipped to the frame.
fn draw_box(rgb: &mut [u8], width: usize, height: usize, x: f64, y: f64, color: [u8; 3]) {
    let (cx, cy) = (x.round() as isize, y.round() as isize);
    for dy in -3..=3isize {
        for dx in -3..=3isize {
            if dx.abs() != 3 && dy.abs() != 3 {
                continue;
            }
            let (px, py) = (cx + dx, cy + dy);
            if px < 0 || py < 0 || px >= width as isize || py >= height as isize {
                continue;
            }
            let i = 3 * (py as usize * width + px as usize);
            rgb[i..i + 3].copy_from_slice(&color);
        }
    }
}

fn overlay_frame(
    frame: &heatrack::frame::GrayFrame,
    index: usize,
    tracks: &[TrackRow],
    truth: Option<&[TruthRow]>,
    class: usize,
    gate: f64,
) -> heatrack::Result<Vec<u8>> {
    let (w, h) = (frame.width(), frame.height());
    let mut rgb: Vec<u8> = frame.to_bytes().iter().flat_map(|&g| [g, g, g]).collect();
    let dets: Vec<&TrackRow> = tracks.iter().filter(|t| t.frame == index && t.class == class).collect();
    let Some(truth) = truth else {
        for d in dets {
            draw_box(&mut rgb, w, h, d.x, d.y, TRUE_POSITIVE);
        }
        return Ok(rgb);
    };
    let gt: Vec<&TruthRow> = truth.iter().filter(|t| t.frame == index && t.class == class).collect();
    let scored: Vec<ScoredPoint> = dets.iter().map(|d| ScoredPoint::new(d.x, d.y, d.confidence)).collect();
    let points: Vec<heatrack::grid::Point> = gt.iter().map(|t| heatrack::grid::Point::new(t.x, t.y)).collect();
    let m = match_detections(&scored, &points, gate)?;
    for &(i, _) in &m.matches {
        draw_box(&mut rgb, w, h, dets[i].x, dets[i].y, TRUE_POSITIVE);
    }
    for &i in &m.false_positives {
        draw_box(&mut rgb, w, h, dets[i].x, dets[i].y, FALSE_POSITIVE);
    }
    for &j in &m.false_negatives {
        draw_box(&mut rgb, w, h, gt[j].x, gt[j].y, FALSE_NEGATIVE);
    }
    Ok(rgb)
}
