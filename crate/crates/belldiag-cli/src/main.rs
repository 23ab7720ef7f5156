//! Command-line driver for the belldiag toolkit.
//!
//! Assets (witness stores, kernel stores) are explicit files and are never
//! regenerated implicitly: build them once with `gen-witnesses` and
//! `build-kernel`, then reuse them across `classify`/`volumes` runs. All
//! outputs embed seeds and asset fingerprints, and identical invocations
//! produce byte-identical files.

use std::io::{BufRead, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use belldiag::criteria::MubSet;
use belldiag::error::BellError;
use belldiag::pipeline::{self, Assets, ClassifyOptions, RunMeta};
use belldiag::sampling::{self, Region, SampleSpec};
use belldiag::separability::{self, CandidateMode, KernelExtensionConfig, KernelStore};
use belldiag::symmetry::SymmetryGroup;
use belldiag::weyl::SimplexCoords;
use belldiag::witness::{self, ValidationAssets};

const EXIT_CONFIG: u8 = 2;
const EXIT_MISSING_ASSET: u8 = 3;
const EXIT_VALIDATION: u8 = 4;

#[derive(Parser)]
#[command(name = "belldiag", version, about = "Classify Bell-diagonal qudit states")]
struct Cli {
    /// Worker threads (default: available parallelism)
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegionArg {
    Simplex,
    Enclosure,
    FamilyA,
}

impl From<RegionArg> for Region {
    fn from(r: RegionArg) -> Self {
        match r {
            RegionArg::Simplex => Region::Simplex,
            RegionArg::Enclosure => Region::Enclosure,
            RegionArg::FamilyA => Region::FamilyA,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Support,
    Haar,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an entanglement witness store
    GenWitnesses(GenWitnessesArgs),
    /// Build a kernel store of known separable vertices
    BuildKernel(BuildKernelArgs),
    /// Sample states and write their coordinates
    Sample(SampleArgs),
    /// Classify states from a file or a freshly sampled region
    Classify(ClassifyArgs),
    /// Sample, classify and report class volumes
    Volumes(VolumesArgs),
    /// Pairwise detector comparison over an existing results file
    Compare(CompareArgs),
    /// NPT frequency on lattices vs random samples
    LatticeStudy(LatticeStudyArgs),
    /// Print the entanglement-class-conserving symmetry group order
    Symmetries(SymmetriesArgs),
}

#[derive(Args)]
struct GenWitnessesArgs {
    #[arg(long, default_value_t = 3)]
    d: usize,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 50)]
    restarts: usize,
    #[arg(long)]
    seed: u64,
    /// Kernel store whose vertices the witnesses are validated against
    #[arg(long)]
    kernel: Option<PathBuf>,
    /// Twirled product states used to double-check bounds (0 disables)
    #[arg(long, default_value_t = 10_000)]
    validation_products: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BuildKernelArgs {
    #[arg(long, default_value_t = 3)]
    d: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Extension candidates beyond the line states
    #[arg(long, default_value_t = 0)]
    candidates: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Support)]
    mode: ModeArg,
    /// Skip candidates already inside the current hull
    #[arg(long)]
    prune: bool,
    #[arg(long, default_value_t = 6)]
    support_restarts: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    d: usize,
    #[arg(long, value_enum)]
    region: SampleRegionArg,
    /// Sample size (random regions; ignored for the lattice)
    #[arg(long, default_value_t = 0)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Grid steps per coordinate (lattice only)
    #[arg(long)]
    steps: Option<usize>,
    /// Upper end of the per-coordinate lattice range (default 1/d)
    #[arg(long)]
    range_top: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SampleRegionArg {
    Simplex,
    Enclosure,
    FamilyA,
    Lattice,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Coordinates file produced by `sample` (alternative to --region)
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, value_enum)]
    region: Option<RegionArg>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    witnesses: PathBuf,
    #[arg(long)]
    kernel: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Evaluate every criterion on PPT states (detector comparisons)
    #[arg(long)]
    evaluate_all: bool,
    /// Re-classify all orbit elements of a 1% subsample independently
    #[arg(long)]
    orbit_audit: bool,
    /// Disable orbit expansion (single-element classification)
    #[arg(long)]
    no_orbit: bool,
}

#[derive(Args)]
struct VolumesArgs {
    #[arg(long)]
    d: usize,
    #[arg(long, value_enum)]
    region: RegionArg,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    witnesses: PathBuf,
    #[arg(long)]
    kernel: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    evaluate_all: bool,
    #[arg(long)]
    orbit_audit: bool,
}

#[derive(Args)]
struct CompareArgs {
    /// Results file from a run with --evaluate-all
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LatticeStudyArgs {
    #[arg(long)]
    d: usize,
    /// Comma-separated step counts, e.g. 2,3,4,5
    #[arg(long, value_delimiter = ',')]
    steps: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Cap on enumerated lattice nodes
    #[arg(long)]
    cap: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SymmetriesArgs {
    #[arg(long)]
    d: usize,
    /// Also print each element's generator word
    #[arg(long)]
    table: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(workers) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
        {
            eprintln!("error: failed to configure {workers} workers: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<BellError>() {
                Some(BellError::MissingAsset(_)) => ExitCode::from(EXIT_MISSING_ASSET),
                Some(BellError::Validation(_)) => ExitCode::from(EXIT_VALIDATION),
                Some(BellError::Dimension(..))
                | Some(BellError::InvalidCoordinates(_))
                | Some(BellError::Parse(_))
                | Some(BellError::CapExceeded(_)) => ExitCode::from(EXIT_CONFIG),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn run(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::GenWitnesses(args) => cmd_gen_witnesses(args),
        Command::BuildKernel(args) => cmd_build_kernel(args),
        Command::Sample(args) => cmd_sample(args),
        Command::Classify(args) => cmd_classify(args),
        Command::Volumes(args) => cmd_volumes(args),
        Command::Compare(args) => cmd_compare(args),
        Command::LatticeStudy(args) => cmd_lattice_study(args),
        Command::Symmetries(args) => cmd_symmetries(args),
    }
}

fn load_group(d: usize) -> anyhow::Result<SymmetryGroup> {
    Ok(SymmetryGroup::generate(d)?)
}

fn cmd_gen_witnesses(args: GenWitnessesArgs) -> anyhow::Result<ExitCode> {
    let kernel = args.kernel.as_deref().map(KernelStore::load).transpose()?;
    if let Some(k) = &kernel {
        if k.d() != args.d {
            anyhow::bail!(BellError::Dimension(k.d(), "kernel dimension mismatch"));
        }
    }
    let group = load_group(args.d)?;
    let empty: Vec<Vec<f64>> = Vec::new();
    let validation = ValidationAssets {
        products: args.validation_products,
        group: Some(&group),
        kernel_vertices: kernel.as_ref().map(|k| k.vertices()).unwrap_or(&empty),
    };
    let outcome =
        witness::generate_witness_set(args.d, args.count, args.restarts, args.seed, Some(&validation))?;
    witness::save_witnesses(&args.out, &outcome.witnesses)?;

    let mean_width: f64 = outcome
        .witnesses
        .iter()
        .map(|w| w.upper - w.lower)
        .sum::<f64>()
        / outcome.witnesses.len().max(1) as f64;
    let kernel_violations = kernel
        .as_ref()
        .map(|k| {
            k.vertices()
                .iter()
                .map(|v| {
                    outcome
                        .witnesses
                        .iter()
                        .filter(|w| {
                            let value: f64 =
                                w.kappa.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
                            witness::interval_violation(w, value) > belldiag::criteria::EPS_DET
                        })
                        .count()
                })
                .sum::<usize>()
        })
        .unwrap_or(0);
    println!(
        "wrote {} witnesses to {} (restarts {}, seed {})",
        outcome.witnesses.len(),
        args.out.display(),
        args.restarts,
        args.seed
    );
    println!(
        "mean interval width {:.6}; widened by validation: {}; kernel-vertex violations: {}",
        mean_width, outcome.widened, kernel_violations
    );
    if kernel_violations > 0 {
        anyhow::bail!(BellError::Validation(format!(
            "{kernel_violations} kernel-vertex violations remain"
        )));
    }
    let failure_rate = outcome.failed as f64 / args.count as f64;
    if failure_rate > 0.05 {
        anyhow::bail!(BellError::Validation(format!(
            "optimizer failure rate {:.1}% exceeds 5%",
            100.0 * failure_rate
        )));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_build_kernel(args: BuildKernelArgs) -> anyhow::Result<ExitCode> {
    let group = load_group(args.d)?;
    let mubs = (args.d == 3).then(MubSet::qutrit);
    let base = KernelStore::from_line_states(args.d)?;
    let store = if args.candidates > 0 {
        let config = KernelExtensionConfig {
            candidates: args.candidates,
            seed: args.seed,
            mode: match args.mode {
                ModeArg::Support => CandidateMode::SupportPoint,
                ModeArg::Haar => CandidateMode::Haar,
            },
            prune: args.prune,
            support_restarts: args.support_restarts,
        };
        let out = separability::extend_kernel(&base, &config, &group, mubs.as_ref())?;
        println!(
            "extension: {} candidates added, {} inside hull, {} dropped by validation",
            out.added_candidates, out.skipped_inside, out.dropped_validation
        );
        out.store
    } else {
        base
    };
    store.validate(mubs.as_ref())?;
    store.save(&args.out)?;
    println!(
        "wrote kernel store: {} vertices, checksum {} -> {}",
        store.len(),
        store.checksum(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn write_sample_csv(path: &Path, d: usize, region: &str, seed: u64, states: &[SimplexCoords]) -> anyhow::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "# belldiag samples v1")?;
    writeln!(out, "# d={} region={} n={} seed={}", d, region, states.len(), seed)?;
    let header: Vec<String> = (0..d * d).map(|i| format!("c{}{}", i / d, i % d)).collect();
    writeln!(out, "{}", header.join(","))?;
    for c in states {
        let row: Vec<String> = c.as_slice().iter().map(|x| format!("{x}")).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

fn read_sample_csv(path: &Path) -> anyhow::Result<Vec<SimplexCoords>> {
    let file = std::fs::File::open(path)
        .map_err(|e| BellError::MissingAsset(format!("samples file {}: {e}", path.display())))?;
    let reader = std::io::BufReader::new(file);
    let mut states = Vec::new();
    let mut d = None;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if line.starts_with('c') {
            let cols = line.split(',').count();
            let dim = (cols as f64).sqrt().round() as usize;
            if dim * dim != cols {
                anyhow::bail!(BellError::Parse(format!(
                    "samples file has {cols} columns, not a square count"
                )));
            }
            d = Some(dim);
            continue;
        }
        let dim = d.ok_or_else(|| BellError::Parse("missing column header".into()))?;
        let coords: Vec<f64> = line
            .split(',')
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| BellError::Parse(format!("line {}: {e}", lineno + 1)))?;
        states.push(SimplexCoords::new(dim, coords)?);
    }
    Ok(states)
}

fn cmd_sample(args: SampleArgs) -> anyhow::Result<ExitCode> {
    let (spec, region_label) = match args.region {
        SampleRegionArg::Lattice => {
            let steps = args.steps.ok_or_else(|| {
                BellError::Parse("--steps is required for the lattice region".into())
            })?;
            (
                SampleSpec::lattice(args.d, steps, args.range_top),
                Region::Lattice.label(),
            )
        }
        other => {
            if args.n == 0 {
                anyhow::bail!(BellError::Parse("--n must be positive".into()));
            }
            let region: Region = match other {
                SampleRegionArg::Simplex => Region::Simplex,
                SampleRegionArg::Enclosure => Region::Enclosure,
                SampleRegionArg::FamilyA => Region::FamilyA,
                SampleRegionArg::Lattice => unreachable!(),
            };
            (
                SampleSpec::random(args.d, region, args.n, args.seed),
                region.label(),
            )
        }
    };
    let states = sampling::sample(&spec)?;
    write_sample_csv(&args.out, args.d, region_label, args.seed, &states)?;
    println!("wrote {} states to {}", states.len(), args.out.display());
    Ok(ExitCode::SUCCESS)
}

struct RunInputs {
    states: Vec<SimplexCoords>,
    d: usize,
    region: String,
    seed: u64,
}

fn classify_run(
    inputs: RunInputs,
    witnesses_path: &Path,
    kernel_path: &Path,
    out: &Path,
    evaluate_all: bool,
    orbit_audit: bool,
    use_orbit: bool,
) -> anyhow::Result<ExitCode> {
    let witnesses = witness::load_witnesses(witnesses_path)?;
    let kernel = KernelStore::load(kernel_path)?;
    if kernel.d() != inputs.d {
        anyhow::bail!(BellError::Dimension(kernel.d(), "kernel dimension mismatch"));
    }
    let group = load_group(inputs.d)?;
    let mubs = (inputs.d == 3).then(MubSet::qutrit);
    let assets = Assets::prepare(witnesses, kernel, mubs, &group)?;
    let opts = ClassifyOptions {
        evaluate_all,
        use_orbit,
    };
    let records = pipeline::classify_batch(&inputs.states, &assets, &group, opts)?;

    let mut counts = [0usize; 4];
    for r in &records {
        counts[match r.class {
            pipeline::StateClass::Sep => 0,
            pipeline::StateClass::Bound => 1,
            pipeline::StateClass::Free => 2,
            pipeline::StateClass::PptUnknown => 3,
        }] += 1;
    }
    let n = records.len();
    let meta = RunMeta {
        d: inputs.d,
        region: inputs.region.clone(),
        n,
        seed: inputs.seed,
        evaluate_all,
        witness_count: assets.witnesses.len(),
        witness_fingerprint: assets.witness_fingerprint.clone(),
        kernel_size: assets.kernel.len(),
        kernel_checksum: assets.kernel_checksum.clone(),
    };
    pipeline::write_results_csv(out, &records, &meta)?;
    let labels = ["SEP", "BOUND", "FREE", "PPT-UNKNOWN"];
    for (label, count) in labels.iter().zip(counts) {
        println!(
            "{label:<12} {count:>8}  {:6.2}%",
            100.0 * count as f64 / n.max(1) as f64
        );
    }
    println!("wrote {} records to {}", n, out.display());

    if orbit_audit {
        let subsample: Vec<SimplexCoords> = inputs
            .states
            .iter()
            .step_by(100)
            .cloned()
            .collect();
        let audit = pipeline::orbit_audit(&subsample, &assets, &group)?;
        println!(
            "orbit audit: {} states, {} elements, {} conflicts, {} PPT mismatches",
            audit.states_audited,
            audit.elements_classified,
            audit.class_conflicts,
            audit.e1_mismatches
        );
        if audit.class_conflicts > 0 || audit.e1_mismatches > 0 {
            anyhow::bail!(BellError::Validation("orbit audit found conflicts".into()));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_classify(args: ClassifyArgs) -> anyhow::Result<ExitCode> {
    let inputs = match (&args.input, args.region) {
        (Some(path), None) => {
            let states = read_sample_csv(path)?;
            let d = states
                .first()
                .map(|c| c.d())
                .ok_or_else(|| BellError::Parse("samples file is empty".into()))?;
            RunInputs {
                states,
                d,
                region: format!("file:{}", path.display()),
                seed: args.seed,
            }
        }
        (None, Some(region)) => {
            let d = args.d.ok_or_else(|| {
                BellError::Parse("--d is required when sampling inline".into())
            })?;
            let n = args.n.ok_or_else(|| {
                BellError::Parse("--n is required when sampling inline".into())
            })?;
            let region: Region = region.into();
            let spec = SampleSpec::random(d, region, n, args.seed);
            RunInputs {
                states: sampling::sample(&spec)?,
                d,
                region: region.label().to_string(),
                seed: args.seed,
            }
        }
        _ => anyhow::bail!(BellError::Parse(
            "provide exactly one of --input or --region".into()
        )),
    };
    classify_run(
        inputs,
        &args.witnesses,
        &args.kernel,
        &args.out,
        args.evaluate_all,
        args.orbit_audit,
        !args.no_orbit,
    )
}

fn cmd_volumes(args: VolumesArgs) -> anyhow::Result<ExitCode> {
    let witnesses = witness::load_witnesses(&args.witnesses)?;
    let kernel = KernelStore::load(&args.kernel)?;
    if kernel.d() != args.d {
        anyhow::bail!(BellError::Dimension(kernel.d(), "kernel dimension mismatch"));
    }
    let group = load_group(args.d)?;
    let mubs = (args.d == 3).then(MubSet::qutrit);
    let assets = Assets::prepare(witnesses, kernel, mubs, &group)?;
    let region: Region = args.region.into();
    let spec = SampleSpec::random(args.d, region, args.n, args.seed);
    let opts = ClassifyOptions {
        evaluate_all: args.evaluate_all,
        use_orbit: true,
    };
    let (records, report) = pipeline::estimate_volumes(&spec, &assets, &group, opts)?;
    pipeline::write_results_csv(&args.out, &records, &RunMeta::from_report(&report))?;

    let text = report.render_text();
    print!("{text}");
    let summary_txt = args.out.with_extension("summary.txt");
    std::fs::write(&summary_txt, &text)?;
    let summary_json = args.out.with_extension("summary.json");
    std::fs::write(&summary_json, serde_json::to_string_pretty(&report)?)?;
    println!(
        "wrote {}, {} and {}",
        args.out.display(),
        summary_txt.display(),
        summary_json.display()
    );

    if args.orbit_audit {
        let states = sampling::sample(&spec)?;
        let subsample: Vec<SimplexCoords> = states.iter().step_by(100).cloned().collect();
        let audit = pipeline::orbit_audit(&subsample, &assets, &group)?;
        println!(
            "orbit audit: {} states, {} elements, {} conflicts, {} PPT mismatches",
            audit.states_audited,
            audit.elements_classified,
            audit.class_conflicts,
            audit.e1_mismatches
        );
        if audit.class_conflicts > 0 || audit.e1_mismatches > 0 {
            anyhow::bail!(BellError::Validation("orbit audit found conflicts".into()));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_compare(args: CompareArgs) -> anyhow::Result<ExitCode> {
    let (records, headers) = pipeline::read_results_csv(&args.input)?;
    if !headers.iter().any(|h| h.contains("evaluate_all=true")) {
        eprintln!("warning: results were not produced with --evaluate-all; counts reflect early-exit evaluation");
    }
    let rows = pipeline::compare_criteria(&records);
    let table = pipeline::render_compare_table(&rows);
    print!("{table}");
    if let Some(out) = &args.out {
        std::fs::write(out, &table)?;
        println!("wrote {}", out.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_lattice_study(args: LatticeStudyArgs) -> anyhow::Result<ExitCode> {
    if args.steps.is_empty() {
        anyhow::bail!(BellError::Parse("--steps needs at least one value".into()));
    }
    let rows = pipeline::lattice_vs_random_study(args.d, &args.steps, args.seed, args.cap)?;
    let table = pipeline::render_lattice_study(&rows);
    print!("{table}");
    if let Some(out) = &args.out {
        std::fs::write(out, &table)?;
        println!("wrote {}", out.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_symmetries(args: SymmetriesArgs) -> anyhow::Result<ExitCode> {
    let group = load_group(args.d)?;
    println!("{}", group.order());
    if args.table {
        for e in group.elements() {
            let word: Vec<&str> = e.word.iter().map(|g| g.label()).collect();
            let word = if word.is_empty() {
                "id".to_string()
            } else {
                word.join("·")
            };
            let perm: Vec<String> = e.perm.iter().map(|p| p.to_string()).collect();
            println!("{}  [{}]", word, perm.join(" "));
        }
    }
    Ok(ExitCode::SUCCESS)
}
