use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use twotime::analysis::{
    coherence_length, find_peaks, find_peaks_1d, free_flight_position, fringe_spacing_profile, interior_extrema,
    two_surface_period, type1_fringe_prediction, type2_visibility, RecoilEnsemble,
};
use twotime::eigen::barrier_coefficients;
use twotime::field::{
    asynchronous_slice, conservation_map, joint_pdf, snapshot, two_time_snapshot, ConservationOptions, FdSteps,
    FieldGrid, Normalization,
};
use twotime::io::config::{OutputFormat, RunConfig, WavegroupConfig};
use twotime::io::format::{csv_string, fmt_e12, pgm_string, write_atomic};
use twotime::io::{load_config, preset};
use twotime::model::{Potential, VelocityPair};
use twotime::wavegroup::{barrier_wavegroup_state, well_wavegroup_state};
use twotime::{Error, ErrorCategory, LabPoint, TwoBodyState};

const EXIT_USAGE: u8 = 2;

/// Prints a line to stdout, ignoring a closed pipe.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

#[derive(Parser, Debug)]
#[command(
    name = "twotime",
    version,
    about = "Two-time wavefunctions of a particle and a moving well or barrier"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named preset instead of a configuration file.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Output path prefix.
    #[arg(long, global = true)]
    out: Option<String>,
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    #[arg(long, global = true, value_enum)]
    normalize: Option<NormalizeArg>,
    /// Worker threads for grid evaluation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Spatial finite-difference step for conservation checks.
    #[arg(long, global = true)]
    fd_step: Option<f64>,
    /// Peak threshold as a fraction of the grid maximum.
    #[arg(long, global = true)]
    peak_threshold: Option<f64>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Scattering coefficients over a sweep of relative energy.
    Coeffs,
    /// Synchronous PDF grids at the configured times.
    Snapshot,
    /// Asynchronous slices with the particle position and time fixed.
    Asynch,
    /// Local conservation residual maps.
    Conserve,
    /// Peaks, fringes, recoil and visibility report.
    Analyze,
    /// Snapshots, slices and analysis of a named scenario.
    Preset,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Coeffs => "coeffs",
            Command::Snapshot => "snapshot",
            Command::Asynch => "asynch",
            Command::Conserve => "conserve",
            Command::Analyze => "analyze",
            Command::Preset => "preset",
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum FormatArg {
    Csv,
    Pgm,
    Both,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum NormalizeArg {
    Raw,
    Max1,
}

fn exit_code(e: &Error) -> u8 {
    match e.category() {
        ErrorCategory::Config => 3,
        ErrorCategory::Physics => 4,
        ErrorCategory::Numerics => 5,
        ErrorCategory::Io => 6,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .expect("thread pool is configured once");
    }
    let cfg = match (&cli.config, &cli.preset) {
        (Some(path), None) => load_config(path),
        (None, Some(name)) => preset(name),
        _ => {
            eprintln!("error: exactly one of --config or --preset is required");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let result = cfg
        .and_then(|cfg| apply_overrides(cfg, &cli))
        .and_then(|cfg| run(cli.command, &cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn apply_overrides(mut cfg: RunConfig, cli: &Cli) -> Result<RunConfig, Error> {
    if let Some(out) = &cli.out {
        cfg.output.prefix = out.clone();
    }
    if let Some(f) = cli.format {
        cfg.output.format = match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Pgm => OutputFormat::Pgm,
            FormatArg::Both => OutputFormat::Both,
        };
    }
    if let Some(n) = cli.normalize {
        cfg.output.normalization = match n {
            NormalizeArg::Raw => Normalization::Raw,
            NormalizeArg::Max1 => Normalization::Max1,
        };
    }
    if let Some(h) = cli.fd_step {
        cfg.fd_step = Some(h);
    }
    if let Some(t) = cli.peak_threshold {
        cfg.analysis.peak_threshold = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

struct Run<'a> {
    cfg: &'a RunConfig,
    hash: String,
    artifacts: Vec<String>,
}

impl Run<'_> {
    fn path(&self, stem: &str, ext: &str) -> String {
        format!("{}-{stem}.{ext}", self.cfg.output.prefix)
    }

    fn write(&mut self, path: String, contents: &str) -> Result<(), Error> {
        write_atomic(path.as_ref(), contents.as_bytes())?;
        self.artifacts.push(path);
        Ok(())
    }

    fn write_grid(&mut self, stem: &str, grid: &FieldGrid) -> Result<(), Error> {
        let grid = grid.clone().normalized(self.cfg.output.normalization);
        if self.cfg.output.format.csv() {
            let text = csv_string(&grid, &self.hash);
            self.write(self.path(stem, "csv"), &text)?;
        }
        if self.cfg.output.format.pgm() {
            let text = pgm_string(&grid);
            self.write(self.path(stem, "pgm"), &text)?;
        }
        Ok(())
    }

    fn peaks(&self, grid: &FieldGrid) -> Value {
        let a = &self.cfg.analysis;
        json!(find_peaks(grid, a.peak_threshold, a.min_separation))
    }
}

fn build_state(cfg: &RunConfig) -> Result<TwoBodyState, Error> {
    let wg = match &cfg.wavegroup {
        WavegroupConfig::Scattering(b) => barrier_wavegroup_state(b, &cfg.system, cfg.phase)?,
        WavegroupConfig::Well(w) => well_wavegroup_state(w, &cfg.system)?,
    };
    if !wg.skipped.is_empty() {
        eprintln!("note: skipped {} co-moving velocity nodes", wg.skipped.len());
    }
    Ok(wg.state)
}

fn ensure_parent(prefix: &str) -> Result<(), Error> {
    let parent = std::path::Path::new(prefix).parent();
    if let Some(dir) = parent.filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    }
    Ok(())
}

fn run(command: Command, cfg: &RunConfig) -> Result<(), Error> {
    ensure_parent(&cfg.output.prefix)?;
    let mut run = Run {
        cfg,
        hash: cfg.hash(),
        artifacts: Vec::new(),
    };
    let mut results = serde_json::Map::new();
    match command {
        Command::Coeffs => {
            results.insert("coeffs".into(), coeffs(&mut run)?);
        }
        Command::Snapshot => {
            let state = build_state(cfg)?;
            results.insert("snapshots".into(), snapshots(&mut run, &state)?);
        }
        Command::Asynch => {
            if cfg.slices.is_empty() {
                return Err(Error::validation("slices", "asynch needs at least one slice"));
            }
            let state = build_state(cfg)?;
            results.insert("slices".into(), slices(&mut run, &state)?);
        }
        Command::Conserve => {
            let state = build_state(cfg)?;
            results.insert("conservation".into(), conserve(&mut run, &state)?);
        }
        Command::Analyze => {
            let state = build_state(cfg)?;
            results.insert("analysis".into(), analyze(&run, &state)?);
        }
        Command::Preset => {
            let state = build_state(cfg)?;
            results.insert("snapshots".into(), snapshots(&mut run, &state)?);
            results.insert("slices".into(), slices(&mut run, &state)?);
            results.insert("analysis".into(), analyze(&run, &state)?);
        }
    }
    let summary_path = run.path("summary", "json");
    let summary = json!({
        "command": command.name(),
        "preset": cfg.preset,
        "config_sha256": run.hash,
        "artifacts": run.artifacts,
        "results": results,
        "config": cfg,
    });
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    write_atomic(summary_path.as_ref(), text.as_bytes())?;
    say!("wrote {summary_path}");
    Ok(())
}

fn coeffs(run: &mut Run) -> Result<Value, Error> {
    let cfg = run.cfg;
    let Potential::Square { height } = cfg.system.potential else {
        return Err(Error::validation(
            "system.potential",
            "coefficients need a square potential",
        ));
    };
    let sweep = match (&cfg.coeffs, &cfg.wavegroup) {
        (Some(s), _) => *s,
        (None, WavegroupConfig::Scattering(b)) => {
            let ke = 0.5 * cfg.system.reduced_mass() * (b.v1_center - b.v2_center).powi(2);
            let scale = ke.max(height.abs());
            twotime::io::config::CoeffSweep {
                v2: b.v2_center,
                e_rel: twotime::field::Axis {
                    lo: 0.02 * scale,
                    hi: 3.0 * scale,
                    n: 61,
                },
            }
        }
        (None, WavegroupConfig::Well(_)) => unreachable!("validated: square potential implies scattering"),
    };
    let mu = cfg.system.reduced_mass();
    let mut csv = String::new();
    csv.push_str(&format!(
        "# coefficients v2 {}\n# config_sha256: {}\n",
        fmt_e12(sweep.v2),
        run.hash
    ));
    csv.push_str("# e_rel,v1,re_a,im_a,re_b,im_b,re_f,im_f,re_g,im_g,re_h,im_h,reflection,transmission,condition\n");
    say!(
        "{:>14} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12}",
        "e_rel",
        "|B|",
        "|F|",
        "|G|",
        "|H|",
        "R",
        "T"
    );
    let mut rows = Vec::new();
    for e in sweep.e_rel.values() {
        let v1 = sweep.v2 + (2.0 * e / mu).sqrt();
        let c = barrier_coefficients(VelocityPair::new(v1, sweep.v2), &cfg.system)?;
        let r = c.b.norm_sqr();
        let t = (c.k_after / c.k_before).re * c.h.norm_sqr();
        let fields = [
            e,
            v1,
            c.a.re,
            c.a.im,
            c.b.re,
            c.b.im,
            c.f.re,
            c.f.im,
            c.g.re,
            c.g.im,
            c.h.re,
            c.h.im,
            r,
            t,
            c.condition,
        ];
        let line: Vec<String> = fields.iter().map(|&v| fmt_e12(v)).collect();
        csv.push_str(&line.join(","));
        csv.push('\n');
        say!(
            "{e:>14.6e} {:>12.6} {:>12.6} {:>12.6} {:>12.6} {r:>12.6} {t:>12.6}",
            c.b.norm(),
            c.f.norm(),
            c.g.norm(),
            c.h.norm()
        );
        rows.push(json!({ "e_rel": e, "v1": v1, "reflection": r, "transmission": t, "condition": c.condition }));
    }
    let path = run.path("coeffs", "csv");
    run.write(path, &csv)?;
    Ok(json!({ "v2": sweep.v2, "rows": rows }))
}

fn snapshots(run: &mut Run, state: &TwoBodyState) -> Result<Value, Error> {
    let cfg = run.cfg;
    let mut out = Vec::new();
    for (i, &t) in cfg.times.iter().enumerate() {
        let grid = snapshot(state, &cfg.grid_at(t), t);
        run.write_grid(&format!("snapshot-{i}"), &grid)?;
        out.push(json!({ "t": t, "max": grid.max(), "peaks": run.peaks(&grid) }));
    }
    for (i, s) in cfg.two_time.iter().enumerate() {
        let grid = two_time_snapshot(state, &cfg.two_time_grid(s.t1, s.t2), s.t1, s.t2);
        run.write_grid(&format!("two-time-{i}"), &grid)?;
        out.push(json!({ "t1": s.t1, "t2": s.t2, "max": grid.max(), "peaks": run.peaks(&grid) }));
    }
    Ok(Value::Array(out))
}

/// Peaks along the last `t2` row of each slice.
fn slices(run: &mut Run, state: &TwoBodyState) -> Result<Value, Error> {
    let cfg = run.cfg;
    let mut out = Vec::new();
    for (i, s) in cfg.slices.iter().enumerate() {
        let grid = asynchronous_slice(state, s.x1, s.t1, &s.x2, &s.t2);
        run.write_grid(&format!("asynch-{i}"), &grid)?;
        let last = grid.nrows() - 1;
        let peaks = find_peaks_1d(
            &s.x2,
            grid.row(last),
            cfg.analysis.peak_threshold,
            cfg.analysis.min_separation,
        );
        out.push(json!({ "x1": s.x1, "t1": s.t1, "t2": s.t2.hi, "peaks": peaks }));
    }
    Ok(Value::Array(out))
}

fn conserve(run: &mut Run, state: &TwoBodyState) -> Result<Value, Error> {
    let cfg = run.cfg;
    if cfg.times.is_empty() {
        return Err(Error::validation("times", "conserve needs at least one snapshot time"));
    }
    let steps = match cfg.fd_step {
        Some(h) => FdSteps::with_spatial(state, h),
        None => FdSteps::auto(state, cfg.grid.x1.spacing().min(cfg.grid.x2.spacing())),
    };
    steps.check(state)?;
    let mut maps = Vec::new();
    let mut worst: f64 = 0.0;
    for (i, &t) in cfg.times.iter().enumerate() {
        let m = conservation_map(state, &cfg.grid_at(t), t, steps, ConservationOptions::default())?;
        run.write_grid(&format!("residual-{i}"), &m.grid)?;
        worst = worst.max(m.max_relative);
        maps.push(json!({
            "t": t,
            "max_relative": m.max_relative,
            "mean_relative": m.mean_relative,
            "significant_points": m.significant_points,
            "pdf_max": m.pdf_max,
        }));
        say!("t = {t}: max relative residual {:.3e}", m.max_relative);
    }
    Ok(json!({ "h": steps.h, "ht": steps.ht, "max_relative": worst, "times": maps }))
}

fn analyze(run: &Run, state: &TwoBodyState) -> Result<Value, Error> {
    let cfg = run.cfg;
    let mut out = serde_json::Map::new();
    let mut snaps = Vec::new();
    for &t in &cfg.times {
        let grid = snapshot(state, &cfg.grid_at(t), t);
        snaps.push(json!({ "t": t, "peaks": run.peaks(&grid) }));
    }
    out.insert("snapshot_peaks".into(), Value::Array(snaps));

    if let WavegroupConfig::Scattering(b) = &cfg.wavegroup {
        let ensemble = RecoilEnsemble::default();
        let mut recoil = Vec::new();
        for s in &cfg.slices {
            let t2 = s.t2.hi;
            let xs = s.x2.values();
            let row: Vec<f64> = xs
                .iter()
                .map(|&x2| joint_pdf(state, &LabPoint::new(s.x1, x2, s.t1, t2)))
                .collect();
            let peaks = find_peaks_1d(&s.x2, &row, cfg.analysis.peak_threshold, cfg.analysis.min_separation);
            recoil.push(json!({
                "x1": s.x1,
                "t1": s.t1,
                "t2": t2,
                "peaks": peaks,
                "free_flight_x2": free_flight_position(b, t2),
                "recoil_x2": ensemble.predicted_partner_position(b, &cfg.system, s.x1, s.t1, t2, &s.x2),
            }));
        }
        out.insert("recoil".into(), Value::Array(recoil));
        let center = b.center();
        let mut lc = serde_json::Map::new();
        let two_pi = 2.0 * std::f64::consts::PI * cfg.system.hbar;
        if center.v1 != 0.0 {
            let lambda = two_pi / (cfg.system.m1 * center.v1.abs());
            lc.insert(
                "particle".into(),
                json!(coherence_length(lambda, center.v1.abs(), b.v1_width)?),
            );
        }
        if center.v2 != 0.0 {
            let lambda = two_pi / (cfg.system.m2 * center.v2.abs());
            lc.insert(
                "partner".into(),
                json!(coherence_length(lambda, center.v2.abs(), b.v2_width)?),
            );
        }
        out.insert("coherence_length".into(), Value::Object(lc));
        if let Some(f) = &cfg.analysis.fringe {
            let xs = f.x1.values();
            let ys: Vec<f64> = xs
                .iter()
                .map(|&x1| joint_pdf(state, &LabPoint::synchronous(x1, f.x2, f.t)))
                .collect();
            let report = fringe_spacing_profile(&xs, &ys, (f.x1.lo, f.x1.hi))?;
            let prediction = type1_fringe_prediction(center, &cfg.system)?;
            out.insert("fringes".into(), json!({ "measured": report, "predicted": prediction }));
        }
        if let Some(t2) = &cfg.analysis.type2 {
            let ds = t2.half_width.values();
            let heights = type2_visibility(b, &cfg.system, &ds, t2.t)?;
            let extrema = interior_extrema(&heights);
            let model = two_surface_period(center, &cfg.system)?;
            out.insert(
                "type2".into(),
                json!({
                    "t": t2.t,
                    "heights": heights,
                    "maxima": extrema.maxima,
                    "minima": extrema.minima,
                    "measured_period": extrema.period(),
                    "model_period": model,
                }),
            );
        }
    }
    Ok(Value::Object(out))
}
