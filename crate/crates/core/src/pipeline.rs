//! Run orchestration shared by the command-line tool and the tests.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::beamformers::{beamform_image_with, BeamformedImage, ImageOptions, JcfParams, Method};
use crate::datapath::{AnalyticDataset, RfDataset};
use crate::display::{
    export_pgm, gamma_compress, image_metrics, match_contrast, profiles, write_report_csv, DisplayImage, MatchOptions,
    QualityReport, Region, REFERENCE_GAMMA,
};
use crate::error::{Error, Result};
use crate::geometry::{GridSpec, ImagingGrid, ReceiveAperture};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub methods: Vec<Method>,
    pub grid: GridSpec,
    pub reference_gamma: f64,
    /// Where images and reports go; `None` keeps everything in memory.
    pub out_dir: Option<PathBuf>,
    /// Region searched for the point-target peak; whole grid when `None`.
    pub peak_window: Option<Region>,
    /// Region averaged for `background_mean`; whole grid when `None`.
    pub background: Option<Region>,
    pub aperture: ReceiveAperture,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    /// When false, `elapsed_s` is written as 0 so reports are byte-stable.
    pub record_timings: bool,
}

impl RunConfig {
    pub fn new(methods: Vec<Method>, grid: GridSpec) -> Self {
        Self {
            methods,
            grid,
            reference_gamma: REFERENCE_GAMMA,
            out_dir: None,
            peak_window: None,
            background: None,
            aperture: ReceiveAperture::full(),
            threads: None,
            record_timings: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Parameter("at least one method is required".into()));
        }
        if !(self.reference_gamma > 0.0 && self.reference_gamma.is_finite()) {
            return Err(Error::Parameter(format!(
                "reference gamma must be > 0, got {}",
                self.reference_gamma
            )));
        }
        if self.threads == Some(0) {
            return Err(Error::Parameter("thread count must be >= 1".into()));
        }
        self.grid.validate()
    }

    /// Methods in run order: DAS first, duplicates (by label) dropped.
    pub fn ordered_methods(&self) -> Vec<Method> {
        let mut out = vec![Method::Das];
        for m in &self.methods {
            if !out.iter().any(|o| o.label() == m.label()) {
                out.push(*m);
            }
        }
        out
    }
}

/// Runs `f` on a pool with `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Parameter(format!("cannot start {n} worker threads: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

#[derive(Debug, Clone)]
pub struct MethodResult {
    pub label: String,
    pub image: BeamformedImage,
    pub display: DisplayImage,
    pub report: QualityReport,
    /// Beamforming wall time in seconds, always measured.
    pub elapsed: f64,
}

#[derive(Debug)]
pub struct MethodFailure {
    pub label: String,
    pub error: Error,
}

#[derive(Debug)]
pub struct CompareOutcome {
    pub reference_contrast: f64,
    pub results: Vec<MethodResult>,
    pub failures: Vec<MethodFailure>,
    pub files: Vec<PathBuf>,
}

impl CompareOutcome {
    pub fn result(&self, label: &str) -> Option<&MethodResult> {
        self.results.iter().find(|r| r.label == label)
    }

    pub fn reports(&self) -> Vec<QualityReport> {
        self.results.iter().map(|r| r.report.clone()).collect()
    }
}

/// Acquisition parameters echoed into run summaries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcquisitionSummary {
    pub transmits: usize,
    pub angle_min_deg: f64,
    pub angle_max_deg: f64,
    pub elements: usize,
    pub aperture_m: f64,
    pub samples_per_trace: usize,
    pub sample_rate_hz: f64,
    pub t0_s: f64,
    pub speed_of_sound_m_s: f64,
}

impl AcquisitionSummary {
    pub fn of(data: &AnalyticDataset) -> Self {
        Self::from_parts(
            data.dims(),
            data.sequence().angles(),
            data.probe().aperture_width(),
            data.sample_rate(),
            data.t0(),
            data.speed_of_sound(),
        )
    }

    pub fn of_rf(data: &RfDataset) -> Self {
        Self::from_parts(
            data.dims(),
            data.sequence().angles(),
            data.probe().aperture_width(),
            data.sample_rate(),
            data.t0(),
            data.speed_of_sound(),
        )
    }

    fn from_parts(
        (m, n, t): (usize, usize, usize),
        angles: &[f64],
        aperture: f64,
        sample_rate: f64,
        t0: f64,
        speed_of_sound: f64,
    ) -> Self {
        let deg = |f: fn(f64, f64) -> f64, init| angles.iter().copied().fold(init, f).to_degrees();
        Self {
            transmits: m,
            angle_min_deg: deg(f64::min, f64::INFINITY),
            angle_max_deg: deg(f64::max, f64::NEG_INFINITY),
            elements: n,
            aperture_m: aperture,
            samples_per_trace: t,
            sample_rate_hz: sample_rate,
            t0_s: t0,
            speed_of_sound_m_s: speed_of_sound,
        }
    }

    /// One-line description for report headers.
    pub fn header_line(&self) -> String {
        format!(
            "acquisition: {} plane waves from {:.2} to {:.2} deg, {} elements, {} samples at {} Hz",
            self.transmits,
            self.angle_min_deg,
            self.angle_max_deg,
            self.elements,
            self.samples_per_trace,
            self.sample_rate_hz
        )
    }
}

#[derive(Serialize)]
struct CompareSummary<'a> {
    acquisition: &'a AcquisitionSummary,
    grid: &'a GridSpec,
    reference_gamma: f64,
    reference_contrast: f64,
    methods: Vec<SummaryEntry>,
    failures: Vec<SummaryFailure>,
}

#[derive(Serialize)]
struct SummaryEntry {
    label: String,
    gamma: f64,
    contrast_k: f64,
    flagged_pixels: usize,
}

#[derive(Serialize)]
struct SummaryFailure {
    label: String,
    error: String,
}

/// Beamforms with DAS and every requested method, matches each display to
/// the DAS contrast at the reference gamma, and writes the outputs.
///
/// A method that fails is recorded in [`CompareOutcome::failures`]; only a
/// DAS failure aborts the run.
pub fn run_compare(config: &RunConfig, data: &RfDataset) -> Result<CompareOutcome> {
    config.validate()?;
    with_threads(config.threads, || compare_inner(config, data))?
}

fn compare_inner(config: &RunConfig, data: &RfDataset) -> Result<CompareOutcome> {
    let analytic = AnalyticDataset::from_rf(data)?;
    let grid = ImagingGrid::from_spec(&config.grid, data.speed_of_sound())?;
    let options = ImageOptions {
        aperture: config.aperture,
    };
    let peak_window = config.peak_window.unwrap_or_else(|| Region::whole(&grid));
    let background = config.background.unwrap_or_else(|| Region::whole(&grid));

    let mut results: Vec<MethodResult> = Vec::new();
    let mut failures = Vec::new();
    let mut reference_contrast = 0.0;

    for method in config.ordered_methods() {
        let label = method.label();
        let start = Instant::now();
        let image = beamform_image_with(&analytic, &grid, &method, &options);
        let elapsed = start.elapsed().as_secs_f64();
        let is_reference = matches!(method, Method::Das);

        let step = image.and_then(|image| {
            let display = if is_reference {
                let d = gamma_compress(&image, config.reference_gamma)?;
                reference_contrast = crate::display::contrast(&d)?;
                d
            } else {
                let opts = MatchOptions {
                    initial: Some(config.reference_gamma),
                    ..MatchOptions::default()
                };
                match_contrast(&image, reference_contrast, &opts)?.1
            };
            let mut report = image_metrics(&display, &grid, &peak_window, &background)?;
            report.algorithm = label.clone();
            report.elapsed = if config.record_timings { elapsed } else { 0.0 };
            Ok((image, display, report))
        });

        match step {
            Ok((image, display, report)) => results.push(MethodResult {
                label,
                image,
                display,
                report,
                elapsed,
            }),
            Err(error) if is_reference => return Err(error),
            Err(error) => failures.push(MethodFailure { label, error }),
        }
    }

    let mut outcome = CompareOutcome {
        reference_contrast,
        results,
        failures,
        files: Vec::new(),
    };
    if let Some(dir) = &config.out_dir {
        outcome.files = write_compare_outputs(dir, config, &analytic, &grid, &outcome)?;
    }
    Ok(outcome)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_compare_outputs(
    dir: &Path,
    config: &RunConfig,
    data: &AnalyticDataset,
    grid: &ImagingGrid,
    outcome: &CompareOutcome,
) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let mut files = Vec::new();

    for r in &outcome.results {
        let path = dir.join(format!("{}.pgm", r.label));
        export_pgm(&r.display, &path)?;
        files.push(path);
    }

    let report_path = dir.join("report.csv");
    let mut csv = Vec::new();
    write_report_csv(&mut csv, &outcome.reports()).expect("writing to memory");
    write_file(&report_path, &csv)?;
    files.push(report_path);

    // Line profiles through the DAS peak, for external plotting.
    if let Some(das) = outcome.results.first() {
        let iz = grid
            .z_coords()
            .iter()
            .position(|&z| z == das.report.peak_z)
            .unwrap_or(0);
        let ix = grid
            .x_coords()
            .iter()
            .position(|&x| x == das.report.peak_x)
            .unwrap_or(0);
        let mut out = Vec::new();
        writeln!(out, "algorithm,axis,position_m,value").expect("writing to memory");
        for r in &outcome.results {
            let p = profiles(&r.display, grid, iz, ix);
            for (axis, line) in [("x", &p.lateral), ("z", &p.axial)] {
                for (pos, v) in line {
                    writeln!(out, "{},{axis},{pos},{v}", r.label).expect("writing to memory");
                }
            }
        }
        let path = dir.join("profiles.csv");
        write_file(&path, &out)?;
        files.push(path);
    }

    let acquisition = AcquisitionSummary::of(data);
    let summary = CompareSummary {
        acquisition: &acquisition,
        grid: &config.grid,
        reference_gamma: config.reference_gamma,
        reference_contrast: outcome.reference_contrast,
        methods: outcome
            .results
            .iter()
            .map(|r| SummaryEntry {
                label: r.label.clone(),
                gamma: r.report.gamma,
                contrast_k: r.report.contrast_k,
                flagged_pixels: r.image.flagged.len(),
            })
            .collect(),
        failures: outcome
            .failures
            .iter()
            .map(|f| SummaryFailure {
                label: f.label.clone(),
                error: f.error.to_string(),
            })
            .collect(),
    };
    let path = dir.join("summary.json");
    let mut json = serde_json::to_vec_pretty(&summary).map_err(|source| Error::Json {
        context: path.display().to_string(),
        source,
    })?;
    json.push(b'\n');
    write_file(&path, &json)?;
    files.push(path);
    Ok(files)
}

/// Beamforms a single method and displays it at `gamma`.
pub fn run_beamform(
    data: &RfDataset,
    grid: &GridSpec,
    method: &Method,
    gamma: f64,
    aperture: ReceiveAperture,
    threads: Option<usize>,
) -> Result<(BeamformedImage, DisplayImage, f64)> {
    grid.validate()?;
    with_threads(threads, || {
        let analytic = AnalyticDataset::from_rf(data)?;
        let grid = ImagingGrid::from_spec(grid, data.speed_of_sound())?;
        let start = Instant::now();
        let image = beamform_image_with(&analytic, &grid, method, &ImageOptions { aperture })?;
        let elapsed = start.elapsed().as_secs_f64();
        let display = gamma_compress(&image, gamma)?;
        Ok((image, display, elapsed))
    })?
}

pub const MIN_BENCH_REPETITIONS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchEntry {
    pub label: String,
    pub times: Vec<f64>,
    pub median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    /// In run order; the first entry is the baseline for `ratio_to_das`.
    pub entries: Vec<BenchEntry>,
}

impl BenchReport {
    pub fn median(&self, label: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.label == label).map(|e| e.median)
    }

    /// Median of `label` over median of `baseline`.
    pub fn ratio(&self, label: &str, baseline: &str) -> Option<f64> {
        Some(self.median(label)? / self.median(baseline)?)
    }

    pub fn to_csv(&self) -> String {
        let base = self.entries.first().map_or(f64::NAN, |e| e.median);
        let mut out = String::from("algorithm,median_s,min_s,max_s,ratio_to_first\n");
        for e in &self.entries {
            let min = e.times.iter().copied().fold(f64::INFINITY, f64::min);
            let max = e.times.iter().copied().fold(0.0, f64::max);
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{:.3}\n",
                e.label,
                e.median,
                min,
                max,
                e.median / base
            ));
        }
        out
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// DAS, factorized JCF and direct JCF.
pub fn bench_methods(alpha: JcfParams) -> Vec<Method> {
    vec![Method::Das, Method::Jcf { alpha }, Method::JcfDirect { alpha }]
}

/// Times each method on the same grid. Repetitions are interleaved so slow
/// drift in machine load hits all methods alike.
pub fn run_bench(
    data: &AnalyticDataset,
    grid: &ImagingGrid,
    methods: &[Method],
    repetitions: usize,
) -> Result<BenchReport> {
    if repetitions < MIN_BENCH_REPETITIONS {
        return Err(Error::Parameter(format!(
            "benchmark needs at least {MIN_BENCH_REPETITIONS} repetitions, got {repetitions}"
        )));
    }
    if methods.is_empty() {
        return Err(Error::Parameter("benchmark needs at least one method".into()));
    }
    let options = ImageOptions::default();
    // One untimed pass warms caches and the thread pool.
    beamform_image_with(data, grid, &methods[0], &options)?;
    let mut times = vec![Vec::with_capacity(repetitions); methods.len()];
    for _ in 0..repetitions {
        for (i, m) in methods.iter().enumerate() {
            let start = Instant::now();
            let image = beamform_image_with(data, grid, m, &options)?;
            times[i].push(start.elapsed().as_secs_f64());
            std::hint::black_box(image);
        }
    }
    Ok(BenchReport {
        entries: methods
            .iter()
            .zip(times)
            .map(|(m, t)| BenchEntry {
                label: m.label(),
                median: median(&t),
                times: t,
            })
            .collect(),
    })
}
