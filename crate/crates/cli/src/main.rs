//! `cpwc`: simulate, beamform, compare and benchmark plane-wave datasets.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cpwc::beamformers::{JcfParams, Method, MethodDefaults};
use cpwc::datapath::AnalyticDataset;
use cpwc::display::{image_metrics, write_report_csv, Region, REFERENCE_GAMMA};
use cpwc::formats::{read_dataset, write_dataset, AcquisitionConfig, PhantomDocument};
use cpwc::geometry::{GridSpec, ImagingGrid, ReceiveAperture, DEFAULT_SPEED_OF_SOUND};
use cpwc::pipeline::{
    bench_methods, run_beamform, run_bench, run_compare, with_threads, AcquisitionSummary, RunConfig,
};
use cpwc::simulator::{simulate_rf, Phantom, Scatterer, SimulationConfig};
use cpwc::{Error, ErrorCategory, Result};

#[derive(Parser)]
#[command(name = "cpwc", version, about = "Coherent plane-wave compounding beamformers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesise a dataset from a phantom.
    Simulate(SimulateArgs),
    /// Beamform a dataset with one method.
    Beamform(BeamformArgs),
    /// Beamform with several methods and compare them at matched contrast.
    Compare(CompareArgs),
    /// Time DAS against factorized and direct JCF.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Acquisition config JSON (probe and transmit sequence).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Phantom JSON document.
    #[arg(long)]
    phantom: Option<PathBuf>,
    /// Extra point scatterer `x,z[,amplitude]` in metres (repeatable).
    #[arg(long = "point", value_name = "X,Z[,A]", allow_hyphen_values = true)]
    points: Vec<String>,
    /// Overrides the phantom's speckle seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Record padding beyond the last echo, seconds.
    #[arg(long, default_value_t = 2e-6)]
    margin: f64,
    /// Apply cosine element directivity.
    #[arg(long)]
    directivity: bool,
    /// Output stem; writes `<out>.json` and `<out>.bin`.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; all cores when omitted.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct MethodFlags {
    /// JCF smoothness exponent.
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    /// GCF low-frequency cutoff M0 (bins).
    #[arg(long = "gcf-m0", default_value_t = cpwc::beamformers::DEFAULT_GCF_CUTOFF)]
    gcf_m0: usize,
    /// PCF sensitivity gamma.
    #[arg(long = "pcf-gamma", default_value_t = cpwc::beamformers::DEFAULT_PCF_GAMMA)]
    pcf_gamma: f64,
    /// MinVar subarray length L (default N/4).
    #[arg(long = "mv-L")]
    mv_l: Option<usize>,
    /// MinVar axial half-window K.
    #[arg(long = "mv-K", default_value_t = cpwc::beamformers::DEFAULT_MV_AXIAL)]
    mv_k: usize,
    /// MinVar diagonal loading factor.
    #[arg(long = "mv-delta", default_value_t = cpwc::beamformers::DEFAULT_MV_LOADING)]
    mv_delta: f64,
    /// fDMAS maximum lag (default N-1).
    #[arg(long = "dmas-L")]
    dmas_l: Option<usize>,
}

impl MethodFlags {
    fn defaults(&self) -> MethodDefaults {
        MethodDefaults {
            alpha: self.alpha,
            gcf_cutoff: self.gcf_m0,
            pcf_gamma: self.pcf_gamma,
            mv_subarray: self.mv_l,
            mv_axial_half_window: self.mv_k,
            mv_loading: self.mv_delta,
            dmas_max_lag: self.dmas_l,
            ..MethodDefaults::default()
        }
    }
}

#[derive(Args)]
struct ImagingFlags {
    /// Input dataset stem (reads `<input>.json` and `<input>.bin`).
    #[arg(long)]
    input: PathBuf,
    /// Imaging grid `x0,x1,nx,z0,z1,nz` in metres.
    #[arg(long, allow_hyphen_values = true)]
    grid: GridSpec,
    /// Receive f-number; full aperture when omitted.
    #[arg(long = "f-number")]
    f_number: Option<f64>,
    /// Worker threads; all cores when omitted.
    #[arg(long)]
    threads: Option<usize>,
}

impl ImagingFlags {
    fn aperture(&self) -> Result<ReceiveAperture> {
        match self.f_number {
            Some(f) => ReceiveAperture::with_f_number(f),
            None => Ok(ReceiveAperture::full()),
        }
    }
}

#[derive(Args)]
struct BeamformArgs {
    #[command(flatten)]
    imaging: ImagingFlags,
    /// das, cf, gcf, pcf, ucf, fdmas, minvar, jcf, jcf-direct (`jcf:3` sets alpha inline).
    #[arg(long, default_value = "das")]
    method: String,
    #[command(flatten)]
    params: MethodFlags,
    /// Display gamma.
    #[arg(long = "gamma-ref", default_value_t = REFERENCE_GAMMA)]
    gamma_ref: f64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    imaging: ImagingFlags,
    /// Methods, comma separated or repeated; DAS is always included.
    #[arg(long = "method", value_delimiter = ',', default_value = "das,jcf")]
    methods: Vec<String>,
    #[command(flatten)]
    params: MethodFlags,
    /// Gamma of the DAS reference display.
    #[arg(long = "gamma-ref", default_value_t = REFERENCE_GAMMA)]
    gamma_ref: f64,
    /// Peak search window `x0,x1,z0,z1`; whole grid when omitted.
    #[arg(long = "peak-window", allow_hyphen_values = true)]
    peak_window: Option<String>,
    /// Background region `x0,x1,z0,z1`; whole grid when omitted.
    #[arg(long, allow_hyphen_values = true)]
    background: Option<String>,
    /// Write elapsed_s as 0 so report.csv is byte-reproducible.
    #[arg(long = "no-timings")]
    no_timings: bool,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    imaging: ImagingFlags,
    /// JCF smoothness exponent.
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    /// Timed repetitions per method (at least 3).
    #[arg(long, default_value_t = 3)]
    reps: usize,
    /// Skip the direct quadruple-sum kernel.
    #[arg(long = "no-direct")]
    no_direct: bool,
    /// Optional CSV output file.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code(category: ErrorCategory) -> u8 {
    match category {
        ErrorCategory::Invalid => 2,
        ErrorCategory::Io => 3,
        ErrorCategory::Numerical => 4,
    }
}

fn category_name(category: ErrorCategory) -> &'static str {
    match category {
        ErrorCategory::Invalid => "invalid",
        ErrorCategory::Io => "io",
        ErrorCategory::Numerical => "numerical",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Beamform(a) => beamform(a),
        Command::Compare(a) => compare(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let category = e.category();
            eprintln!("error[{}]: {e}", category_name(category));
            ExitCode::from(exit_code(category))
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_point(s: &str) -> Result<Scatterer> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parameter(format!("bad point {s:?}: {e}")))?;
    match parts[..] {
        [x, z] => Ok(Scatterer { x, z, amplitude: 1.0 }),
        [x, z, amplitude] => Ok(Scatterer { x, z, amplitude }),
        _ => Err(Error::Parameter(format!(
            "point must be x,z or x,z,amplitude, got {s:?}"
        ))),
    }
}

fn default_acquisition() -> AcquisitionConfig {
    AcquisitionConfig {
        name: "default".into(),
        elements: 128,
        pitch: 0.3e-3,
        center_frequency: 5e6,
        fractional_bandwidth: 0.6,
        angle_count: 15,
        angle_min_deg: -10.0,
        angle_max_deg: 10.0,
        sample_rate: None,
        speed_of_sound: DEFAULT_SPEED_OF_SOUND,
    }
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let acq = match &a.config {
        Some(p) => AcquisitionConfig::read(p)?,
        None => default_acquisition(),
    };
    let mut doc = match &a.phantom {
        Some(p) => {
            let bytes = fs::read(p).map_err(|source| Error::Io {
                path: p.clone(),
                source,
            })?;
            PhantomDocument::from_json_bytes(&bytes)?
        }
        None => PhantomDocument::default(),
    };
    for p in &a.points {
        doc.scatterers.push(parse_point(p)?);
    }
    if let Some(seed) = a.seed {
        doc.rng_seed = seed;
    }
    let phantom: Phantom = doc.build()?;
    if phantom.is_empty() {
        return Err(Error::Parameter(
            "phantom has no scatterers; give --phantom or --point".into(),
        ));
    }
    let probe = acq.probe()?;
    let seq = acq.sequence()?;
    let pulse = acq.pulse()?;
    let mut cfg = SimulationConfig::covering(
        &phantom,
        &probe,
        &seq,
        &pulse,
        acq.sample_rate(),
        acq.speed_of_sound,
        a.margin,
    )?;
    cfg.directivity = a.directivity;
    let data = with_threads(a.threads, || simulate_rf(&phantom, &probe, &seq, &pulse, &cfg))??;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_dataset(&data, &a.out)?;
    let (m, n, t) = data.dims();
    println!(
        "wrote {} ({} scatterers, {m} transmits x {n} elements x {t} samples)",
        a.out.display(),
        phantom.len()
    );
    Ok(())
}

fn beamform(a: BeamformArgs) -> Result<()> {
    let data = read_dataset(&a.imaging.input)?;
    let method = Method::parse(&a.method, &a.params.defaults())?;
    let (image, display, elapsed) = run_beamform(
        &data,
        &a.imaging.grid,
        &method,
        a.gamma_ref,
        a.imaging.aperture()?,
        a.imaging.threads,
    )?;
    create_dir(&a.out)?;
    let label = method.label();
    let pgm = a.out.join(format!("{label}.pgm"));
    cpwc::display::export_pgm(&display, &pgm)?;
    let whole = Region::whole(&image.grid);
    let mut report = image_metrics(&display, &image.grid, &whole, &whole)?;
    report.algorithm = label.clone();
    report.elapsed = elapsed;
    let mut csv = Vec::new();
    write_report_csv(&mut csv, std::slice::from_ref(&report)).expect("writing to memory");
    write_file(&a.out.join("report.csv"), &csv)?;
    println!("{label}: {elapsed:.3} s, wrote {}", pgm.display());
    if !image.flagged.is_empty() {
        println!("{label}: {} pixels fell back to the mean", image.flagged.len());
    }
    Ok(())
}

fn compare(a: CompareArgs) -> Result<()> {
    let data = read_dataset(&a.imaging.input)?;
    let defaults = a.params.defaults();
    let methods = a
        .methods
        .iter()
        .filter(|m| !m.trim().is_empty())
        .map(|m| Method::parse(m, &defaults))
        .collect::<Result<Vec<_>>>()?;
    let mut cfg = RunConfig::new(methods, a.imaging.grid);
    cfg.reference_gamma = a.gamma_ref;
    cfg.out_dir = Some(a.out.clone());
    cfg.peak_window = a.peak_window.as_deref().map(Region::parse).transpose()?;
    cfg.background = a.background.as_deref().map(Region::parse).transpose()?;
    cfg.aperture = a.imaging.aperture()?;
    cfg.threads = a.imaging.threads;
    cfg.record_timings = !a.no_timings;

    println!("{}", AcquisitionSummary::of_rf(&data).header_line());

    let outcome = run_compare(&cfg, &data)?;
    println!(
        "reference: das at gamma {} has K = {:.6}",
        cfg.reference_gamma, outcome.reference_contrast
    );
    for r in &outcome.results {
        println!(
            "{:>14}: {:8.3} s  gamma {:.5}  K {:.6}  background {:.4}",
            r.label, r.elapsed, r.report.gamma, r.report.contrast_k, r.report.background_mean
        );
    }
    for f in &outcome.failures {
        eprintln!("{:>14}: skipped: {}", f.label, f.error);
    }
    println!("wrote {} files to {}", outcome.files.len(), a.out.display());
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let data = read_dataset(&a.imaging.input)?;
    let alpha = JcfParams::new(a.alpha)?;
    let mut methods = bench_methods(alpha);
    if a.no_direct {
        methods.truncate(2);
    }
    let report = with_threads(a.imaging.threads, || -> Result<_> {
        let analytic = AnalyticDataset::from_rf(&data)?;
        let grid = ImagingGrid::from_spec(&a.imaging.grid, data.speed_of_sound())?;
        println!("{}", AcquisitionSummary::of(&analytic).header_line());
        run_bench(&analytic, &grid, &methods, a.reps)
    })??;
    let csv = report.to_csv();
    print!("{csv}");
    let jcf = methods[1].label();
    if let Some(r) = report.ratio(&jcf, "das") {
        println!("{jcf} / das = {r:.2}");
    }
    if let Some(direct) = methods.get(2) {
        if let Some(r) = report.ratio(&direct.label(), &jcf) {
            println!("{} / {jcf} = {r:.2}", direct.label());
        }
    }
    if let Some(path) = &a.out {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            create_dir(parent)?;
        }
        write_file(path, csv.as_bytes())?;
    }
    Ok(())
}
