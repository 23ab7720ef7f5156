//! Orchestration: orbit-aware classification, volume estimation, detector
//! comparison and the lattice-vs-random convergence study.
//!
//! Classification order is cheap-to-expensive: E1 (free entanglement) first,
//! then the separability checks S2, S1, then the bound-entanglement
//! detectors E2, E3, E4, E5. E2 and S2 are invariant under the symmetry
//! group, and S1 is orbit-invariant whenever the kernel store is
//! orbit-closed, so those run once per state; E3, E4 and E5 run across the
//! orbit.

use std::io::{BufRead, Write as _};
use std::path::Path;

use rayon::prelude::*;

use crate::criteria::{self, Criterion, CriterionVerdict, MubSet, EPS_DET};
use crate::error::BellError;
use crate::lp::LpWorkspace;
use crate::sampling::{self, Region, SampleSpec};
use crate::separability::{self, KernelStore};
use crate::symmetry::{self, SymmetryGroup};
use crate::weyl::SimplexCoords;
use crate::witness::Witness;
use crate::Result;

/// Final label of a classified state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StateClass {
    Sep,
    Bound,
    Free,
    PptUnknown,
}

impl StateClass {
    pub fn label(&self) -> &'static str {
        match self {
            StateClass::Sep => "SEP",
            StateClass::Bound => "BOUND",
            StateClass::Free => "FREE",
            StateClass::PptUnknown => "PPT-UNKNOWN",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s {
            "SEP" => Some(StateClass::Sep),
            "BOUND" => Some(StateClass::Bound),
            "FREE" => Some(StateClass::Free),
            "PPT-UNKNOWN" => Some(StateClass::PptUnknown),
            _ => None,
        }
    }

    /// Definite classes may never conflict across a symmetry orbit.
    pub fn is_definite(&self) -> bool {
        !matches!(self, StateClass::PptUnknown)
    }
}

/// Loaded classification assets plus derived metadata.
pub struct Assets {
    pub witnesses: Vec<Witness>,
    pub kernel: KernelStore,
    pub mubs: Option<MubSet>,
    /// Whether S1 may be evaluated once per orbit.
    kernel_orbit_closed: bool,
    pub witness_fingerprint: String,
    pub kernel_checksum: String,
    /// witness coefficients flattened witness-major, for the E5 scan
    kappa_flat: Vec<f64>,
    lowers: Vec<f64>,
    uppers: Vec<f64>,
}

impl Assets {
    /// Validates dimensions and precomputes orbit-closure of the kernel.
    /// For d=3 a MUB set is required; an absent asset is an error rather
    /// than a silently skipped criterion.
    pub fn prepare(
        witnesses: Vec<Witness>,
        kernel: KernelStore,
        mubs: Option<MubSet>,
        group: &SymmetryGroup,
    ) -> Result<Self> {
        let d = kernel.d();
        if group.d() != d {
            return Err(BellError::Dimension(group.d(), "group dimension mismatch"));
        }
        for w in &witnesses {
            if w.d != d {
                return Err(BellError::Dimension(w.d, "witness dimension mismatch"));
            }
            w.validate()?;
        }
        match (&mubs, d) {
            (None, 3) => {
                return Err(BellError::MissingAsset(
                    "d=3 classification requires a MUB set for E4".into(),
                ))
            }
            (Some(m), 3) if m.d() == 3 => {}
            (Some(_), _) => {
                return Err(BellError::Dimension(d, "MUB set only applies to d=3"));
            }
            (None, _) => {}
        }
        let kernel_orbit_closed = kernel.is_orbit_closed(group);
        let witness_fingerprint = witness_fingerprint(&witnesses);
        let kernel_checksum = kernel.checksum();
        let kappa_flat = witnesses.iter().flat_map(|w| w.kappa.iter().copied()).collect();
        let lowers = witnesses.iter().map(|w| w.lower).collect();
        let uppers = witnesses.iter().map(|w| w.upper).collect();
        Ok(Self {
            witnesses,
            kernel,
            mubs,
            kernel_orbit_closed,
            witness_fingerprint,
            kernel_checksum,
            kappa_flat,
            lowers,
            uppers,
        })
    }

    pub fn kernel_orbit_closed(&self) -> bool {
        self.kernel_orbit_closed
    }
}

/// Fingerprint of a witness list: FNV-1a over its line-delimited
/// serialization (identical to hashing the stored file).
pub fn witness_fingerprint(witnesses: &[Witness]) -> String {
    let mut body = String::new();
    for w in witnesses {
        body.push_str(&serde_json::to_string(w).expect("serializable witness"));
        body.push('\n');
    }
    format!("{:016x}", crate::rng::fnv1a64(body.as_bytes()))
}

/// Classification controls.
#[derive(Debug, Clone, Copy)]
pub struct ClassifyOptions {
    /// Evaluate every criterion on PPT states even after one has decided the
    /// class (needed for detector comparisons).
    pub evaluate_all: bool,
    /// Expand states into symmetry orbits before applying criteria.
    pub use_orbit: bool,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            evaluate_all: false,
            use_orbit: true,
        }
    }
}

/// Per-state classification outcome with the verdicts that were evaluated.
#[derive(Debug, Clone)]
pub struct ClassificationRecord {
    pub id: usize,
    pub coords: Vec<f64>,
    pub class: StateClass,
    pub e1: Option<CriterionVerdict>,
    pub e2: Option<CriterionVerdict>,
    pub e3: Option<CriterionVerdict>,
    pub e4: Option<CriterionVerdict>,
    pub e5: Option<CriterionVerdict>,
    pub s1: Option<CriterionVerdict>,
    pub s2: Option<CriterionVerdict>,
    pub detecting_witness: Option<usize>,
    pub orbit_size: usize,
}

impl ClassificationRecord {
    pub fn verdict(&self, criterion: Criterion) -> Option<&CriterionVerdict> {
        match criterion {
            Criterion::E1 => self.e1.as_ref(),
            Criterion::E2 => self.e2.as_ref(),
            Criterion::E3 => self.e3.as_ref(),
            Criterion::E4 => self.e4.as_ref(),
            Criterion::E5 => self.e5.as_ref(),
            Criterion::S1 => self.s1.as_ref(),
            Criterion::S2 => self.s2.as_ref(),
        }
    }

    pub fn detected(&self, criterion: Criterion) -> bool {
        self.verdict(criterion).map(|v| v.detected).unwrap_or(false)
    }
}

/// Classifies one state. `ws` is reusable LP scratch for batch runs.
pub fn classify_with(
    id: usize,
    coords: &SimplexCoords,
    assets: &Assets,
    group: &SymmetryGroup,
    opts: ClassifyOptions,
    ws: &mut LpWorkspace,
) -> Result<ClassificationRecord> {
    let d = coords.d();
    if d != assets.kernel.d() {
        return Err(BellError::Dimension(d, "state dimension does not match assets"));
    }
    let mut record = ClassificationRecord {
        id,
        coords: coords.as_slice().to_vec(),
        class: StateClass::PptUnknown,
        e1: None,
        e2: None,
        e3: None,
        e4: None,
        e5: None,
        s1: None,
        s2: None,
        detecting_witness: None,
        orbit_size: 1,
    };

    // E1 decides free entanglement on the representative alone (the PPT
    // spectrum is orbit-invariant).
    let e1 = criteria::e1_ppt(coords);
    record.e1 = Some(e1);
    if e1.detected {
        record.class = StateClass::Free;
        return Ok(record);
    }

    let orbit: Vec<SimplexCoords> = if opts.use_orbit {
        symmetry::orbit(coords, group)
    } else {
        vec![coords.clone()]
    };
    record.orbit_size = orbit.len();

    // separability phase: S2 (orbit-invariant), then S1
    let s2 = separability::s2_weyl_criterion(coords);
    record.s2 = Some(s2);
    let mut separable = s2.detected;
    if !separable || opts.evaluate_all {
        let s1 = if assets.kernel_orbit_closed {
            separability::s1_hull_membership_with(coords, &assets.kernel, ws)
        } else {
            let mut best = separability::s1_hull_membership_with(coords, &assets.kernel, ws);
            for element in orbit.iter().skip(1) {
                if best.verdict.detected {
                    break;
                }
                best = separability::s1_hull_membership_with(element, &assets.kernel, ws);
            }
            best
        };
        record.s1 = Some(s1.verdict);
        separable = separable || s1.verdict.detected;
    }
    if separable && !opts.evaluate_all {
        record.class = StateClass::Sep;
        return Ok(record);
    }

    // bound-entanglement phase: E2 (orbit-invariant), E3/E4/E5 across orbit
    let e2 = criteria::e2_realignment(coords);
    record.e2 = Some(e2);
    let mut bound = e2.detected;

    if !bound || opts.evaluate_all {
        let mut best = criteria::e3_quasipure(coords);
        for element in orbit.iter().skip(1) {
            if best.detected && !opts.evaluate_all {
                break;
            }
            let v = criteria::e3_quasipure(element);
            if v.score > best.score {
                best = v;
            }
        }
        record.e3 = Some(best);
        bound = bound || best.detected;
    }

    if d == 3 && (!bound || opts.evaluate_all) {
        let mubs = assets.mubs.as_ref().expect("validated in Assets::prepare");
        let mut best = criteria::e4_mub(coords, mubs)?;
        for element in orbit.iter().skip(1) {
            if best.detected && !opts.evaluate_all {
                break;
            }
            let v = criteria::e4_mub(element, mubs)?;
            if v.score > best.score {
                best = v;
            }
        }
        record.e4 = Some(best);
        bound = bound || best.detected;
    }

    if !bound || opts.evaluate_all {
        let dim = d * d;
        let mut best_violation = f64::NEG_INFINITY;
        let mut best_witness = None;
        'orbit: for element in &orbit {
            let c = element.as_slice();
            for (i, kappa) in assets.kappa_flat.chunks_exact(dim).enumerate() {
                let value: f64 = kappa.iter().zip(c).map(|(a, b)| a * b).sum();
                let violation = (assets.lowers[i] - value).max(value - assets.uppers[i]);
                if violation > best_violation {
                    best_violation = violation;
                    best_witness = Some(i);
                }
                if violation > EPS_DET && !opts.evaluate_all {
                    break 'orbit;
                }
            }
        }
        if assets.witnesses.is_empty() {
            best_violation = 0.0;
            best_witness = None;
        }
        let e5 = CriterionVerdict::thresholded(
            Criterion::E5,
            best_violation,
            best_violation - EPS_DET,
        );
        record.e5 = Some(e5);
        record.detecting_witness = if e5.detected { best_witness } else { None };
        bound = bound || e5.detected;
    }

    record.class = if separable {
        StateClass::Sep
    } else if bound {
        StateClass::Bound
    } else {
        StateClass::PptUnknown
    };
    Ok(record)
}

/// Classifies one state with fresh scratch space.
pub fn classify(
    coords: &SimplexCoords,
    assets: &Assets,
    group: &SymmetryGroup,
    opts: ClassifyOptions,
) -> Result<ClassificationRecord> {
    classify_with(0, coords, assets, group, opts, &mut LpWorkspace::default())
}

/// Classifies a batch in parallel; output order matches input order.
pub fn classify_batch(
    states: &[SimplexCoords],
    assets: &Assets,
    group: &SymmetryGroup,
    opts: ClassifyOptions,
) -> Result<Vec<ClassificationRecord>> {
    states
        .par_iter()
        .enumerate()
        .map_init(LpWorkspace::default, |ws, (id, coords)| {
            classify_with(id, coords, assets, group, opts, ws)
        })
        .collect()
}

/// Aggregate class counts with binomial errors and PPT-relative shares.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct VolumeReport {
    pub d: usize,
    pub region: String,
    pub n: usize,
    pub seed: u64,
    pub evaluate_all: bool,
    /// counts in order SEP, BOUND, FREE, PPT-UNKNOWN
    pub counts: [usize; 4],
    pub frequencies: [f64; 4],
    /// binomial standard errors √(p̂(1−p̂)/N)
    pub std_errors: [f64; 4],
    pub ppt_count: usize,
    /// SEP, BOUND, PPT-UNKNOWN shares relative to the PPT count
    pub ppt_relative: [f64; 3],
    pub witness_count: usize,
    pub witness_fingerprint: String,
    pub kernel_size: usize,
    pub kernel_checksum: String,
}

impl VolumeReport {
    pub fn count(&self, class: StateClass) -> usize {
        match class {
            StateClass::Sep => self.counts[0],
            StateClass::Bound => self.counts[1],
            StateClass::Free => self.counts[2],
            StateClass::PptUnknown => self.counts[3],
        }
    }

    pub fn frequency(&self, class: StateClass) -> f64 {
        match class {
            StateClass::Sep => self.frequencies[0],
            StateClass::Bound => self.frequencies[1],
            StateClass::Free => self.frequencies[2],
            StateClass::PptUnknown => self.frequencies[3],
        }
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "region {} d={} n={} seed={} (witnesses {} [{}], kernel {} [{}])\n",
            self.region,
            self.d,
            self.n,
            self.seed,
            self.witness_count,
            self.witness_fingerprint,
            self.kernel_size,
            self.kernel_checksum,
        ));
        let labels = ["SEP", "BOUND", "FREE", "PPT-UNKNOWN"];
        for (i, label) in labels.iter().enumerate() {
            out.push_str(&format!(
                "{:<12} {:>8}  {:6.2}% ± {:.2}%\n",
                label,
                self.counts[i],
                100.0 * self.frequencies[i],
                100.0 * self.std_errors[i],
            ));
        }
        out.push_str(&format!(
            "PPT states   {:>8}  of which SEP {:.1}%, BOUND {:.1}%, UNKNOWN {:.1}%\n",
            self.ppt_count,
            100.0 * self.ppt_relative[0],
            100.0 * self.ppt_relative[1],
            100.0 * self.ppt_relative[2],
        ));
        out
    }
}

fn aggregate(
    records: &[ClassificationRecord],
    spec: &SampleSpec,
    assets: &Assets,
    opts: ClassifyOptions,
) -> VolumeReport {
    let n = records.len();
    let mut counts = [0usize; 4];
    for r in records {
        let idx = match r.class {
            StateClass::Sep => 0,
            StateClass::Bound => 1,
            StateClass::Free => 2,
            StateClass::PptUnknown => 3,
        };
        counts[idx] += 1;
    }
    let mut frequencies = [0.0; 4];
    let mut std_errors = [0.0; 4];
    for i in 0..4 {
        let p = counts[i] as f64 / n.max(1) as f64;
        frequencies[i] = p;
        std_errors[i] = (p * (1.0 - p) / n.max(1) as f64).sqrt();
    }
    let ppt_count = n - counts[2];
    let ppt_relative = if ppt_count > 0 {
        [
            counts[0] as f64 / ppt_count as f64,
            counts[1] as f64 / ppt_count as f64,
            counts[3] as f64 / ppt_count as f64,
        ]
    } else {
        [0.0; 3]
    };
    VolumeReport {
        d: spec.d,
        region: spec.region.label().to_string(),
        n,
        seed: spec.seed,
        evaluate_all: opts.evaluate_all,
        counts,
        frequencies,
        std_errors,
        ppt_count,
        ppt_relative,
        witness_count: assets.witnesses.len(),
        witness_fingerprint: assets.witness_fingerprint.clone(),
        kernel_size: assets.kernel.len(),
        kernel_checksum: assets.kernel_checksum.clone(),
    }
}

/// Samples the spec'd region, classifies every state and aggregates.
pub fn estimate_volumes(
    spec: &SampleSpec,
    assets: &Assets,
    group: &SymmetryGroup,
    opts: ClassifyOptions,
) -> Result<(Vec<ClassificationRecord>, VolumeReport)> {
    let states = sampling::sample(spec)?;
    let records = classify_batch(&states, assets, group, opts)?;
    let report = aggregate(&records, spec, assets, opts);
    Ok((records, report))
}

/// One row of the pairwise detector comparison, restricted to BOUND states.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CompareRow {
    pub a: Criterion,
    pub detected_a: usize,
    pub b: Criterion,
    pub detected_b: usize,
    pub both: usize,
}

/// Detection counts for one criterion pair over the BOUND states of a run.
/// Supports a == b, in which case `both` equals the single count.
pub fn pair_counts(records: &[ClassificationRecord], a: Criterion, b: Criterion) -> CompareRow {
    let bound = records.iter().filter(|r| r.class == StateClass::Bound);
    let mut row = CompareRow {
        a,
        detected_a: 0,
        b,
        detected_b: 0,
        both: 0,
    };
    for r in bound {
        let da = r.detected(a);
        let db = r.detected(b);
        row.detected_a += da as usize;
        row.detected_b += db as usize;
        row.both += (da && db) as usize;
    }
    row
}

/// Counts detected-by-A / detected-by-B / detected-by-both over the BOUND
/// states of a run, for each pair of E2–E5.
pub fn compare_criteria(records: &[ClassificationRecord]) -> Vec<CompareRow> {
    let criteria = [Criterion::E2, Criterion::E3, Criterion::E4, Criterion::E5];
    let mut rows = Vec::new();
    for (i, &a) in criteria.iter().enumerate() {
        for &b in criteria.iter().skip(i + 1) {
            rows.push(pair_counts(records, a, b));
        }
    }
    rows
}

/// Renders comparison rows as an aligned text table.
pub fn render_compare_table(rows: &[CompareRow]) -> String {
    let mut out = String::from("criterion-A  #detected-A  criterion-B  #detected-B  #both\n");
    for r in rows {
        out.push_str(&format!(
            "{:<11}  {:>11}  {:<11}  {:>11}  {:>5}\n",
            r.a.label(),
            r.detected_a,
            r.b.label(),
            r.detected_b,
            r.both
        ));
    }
    out
}

/// One row of the lattice-vs-random convergence study.
#[derive(Debug, Clone, serde::Serialize)]
pub struct LatticeStudyRow {
    pub steps: usize,
    pub n: usize,
    pub lattice_free_freq: f64,
    pub random_free_freq: f64,
    /// binomial σ at the random-sample estimate
    pub binomial_sigma: f64,
}

/// NPT frequency on equidistant lattices versus random samples of equal
/// size. d=2 grids the full simplex; d=3 grids the enclosure polytope.
pub fn lattice_vs_random_study(
    d: usize,
    steps_list: &[usize],
    seed: u64,
    lattice_cap: Option<u64>,
) -> Result<Vec<LatticeStudyRow>> {
    if d != 2 && d != 3 {
        return Err(BellError::Dimension(d, "lattice study covers d=2 and d=3"));
    }
    let range_top = if d == 2 { 1.0 } else { 1.0 / d as f64 };
    let mut rows = Vec::new();
    for &steps in steps_list {
        let mut lattice_spec = SampleSpec::lattice(d, steps, Some(range_top));
        lattice_spec.lattice_cap = lattice_cap;
        let lattice = sampling::sample_lattice(&lattice_spec)?;
        let n = lattice.len();
        if n == 0 {
            continue;
        }
        let lattice_npt = count_npt(&lattice);
        let region = if d == 2 { Region::Simplex } else { Region::Enclosure };
        let mut random_spec = SampleSpec::random(d, region, n, seed);
        random_spec.seed = crate::rng::stream_seed(seed, &[steps as u64]);
        let random = sampling::sample(&random_spec)?;
        let random_npt = count_npt(&random);
        let p = random_npt as f64 / n as f64;
        rows.push(LatticeStudyRow {
            steps,
            n,
            lattice_free_freq: lattice_npt as f64 / n as f64,
            random_free_freq: p,
            binomial_sigma: (p * (1.0 - p) / n as f64).sqrt(),
        });
    }
    Ok(rows)
}

fn count_npt(states: &[SimplexCoords]) -> usize {
    states
        .par_iter()
        .filter(|c| criteria::e1_ppt(c).detected)
        .count()
}

/// Renders study rows as a columnar text table.
pub fn render_lattice_study(rows: &[LatticeStudyRow]) -> String {
    let mut out = String::from("steps  n  lattice_free_freq  random_free_freq  binomial_sigma\n");
    for r in rows {
        out.push_str(&format!(
            "{}  {}  {:.6}  {:.6}  {:.6}\n",
            r.steps, r.n, r.lattice_free_freq, r.random_free_freq, r.binomial_sigma
        ));
    }
    out
}

/// Outcome of the orbit audit.
#[derive(Debug, Clone, serde::Serialize)]
pub struct AuditReport {
    pub states_audited: usize,
    pub elements_classified: usize,
    /// Orbits whose elements received conflicting definite classes.
    pub class_conflicts: usize,
    /// Orbit elements whose PPT status differed from the representative's.
    pub e1_mismatches: usize,
}

/// Independently classifies every orbit element of the given states with
/// orbit expansion disabled, checking that no orbit mixes definite classes
/// and that PPT status is constant on orbits.
pub fn orbit_audit(
    states: &[SimplexCoords],
    assets: &Assets,
    group: &SymmetryGroup,
) -> Result<AuditReport> {
    let per_state: Vec<(usize, usize, usize)> = states
        .par_iter()
        .map_init(LpWorkspace::default, |ws, coords| {
            let orbit = symmetry::orbit(coords, group);
            let opts = ClassifyOptions {
                evaluate_all: false,
                use_orbit: false,
            };
            let mut classes = Vec::with_capacity(orbit.len());
            let mut e1_mismatch = 0usize;
            let representative_ppt = !criteria::e1_ppt(coords).detected;
            for element in &orbit {
                let rec = classify_with(0, element, assets, group, opts, ws)?;
                if (rec.class != StateClass::Free) != representative_ppt {
                    e1_mismatch += 1;
                }
                classes.push(rec.class);
            }
            let definite: Vec<StateClass> = classes
                .iter()
                .copied()
                .filter(StateClass::is_definite)
                .collect();
            let conflict = definite.windows(2).any(|w| w[0] != w[1]);
            Ok((orbit.len(), conflict as usize, e1_mismatch))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = AuditReport {
        states_audited: states.len(),
        elements_classified: 0,
        class_conflicts: 0,
        e1_mismatches: 0,
    };
    for (elements, conflict, mismatch) in per_state {
        report.elements_classified += elements;
        report.class_conflicts += conflict;
        report.e1_mismatches += mismatch;
    }
    Ok(report)
}

/// Metadata written into the results-file header.
#[derive(Debug, Clone)]
pub struct RunMeta {
    pub d: usize,
    pub region: String,
    pub n: usize,
    pub seed: u64,
    pub evaluate_all: bool,
    pub witness_count: usize,
    pub witness_fingerprint: String,
    pub kernel_size: usize,
    pub kernel_checksum: String,
}

impl RunMeta {
    pub fn from_report(report: &VolumeReport) -> Self {
        Self {
            d: report.d,
            region: report.region.clone(),
            n: report.n,
            seed: report.seed,
            evaluate_all: report.evaluate_all,
            witness_count: report.witness_count,
            witness_fingerprint: report.witness_fingerprint.clone(),
            kernel_size: report.kernel_size,
            kernel_checksum: report.kernel_checksum.clone(),
        }
    }
}

fn fmt_opt_verdict(v: &Option<CriterionVerdict>) -> (String, String) {
    match v {
        Some(v) => ((v.detected as u8).to_string(), format!("{}", v.score)),
        None => (String::new(), String::new()),
    }
}

/// Writes one record per state as comma-separated columns, preceded by `#`
/// header lines carrying seeds and asset fingerprints.
pub fn write_results_csv(path: &Path, records: &[ClassificationRecord], meta: &RunMeta) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "# belldiag results v1")?;
    writeln!(
        out,
        "# d={} region={} n={} seed={} evaluate_all={}",
        meta.d, meta.region, meta.n, meta.seed, meta.evaluate_all
    )?;
    writeln!(
        out,
        "# witnesses count={} fingerprint={}",
        meta.witness_count, meta.witness_fingerprint
    )?;
    writeln!(
        out,
        "# kernel vertices={} checksum={}",
        meta.kernel_size, meta.kernel_checksum
    )?;
    let d2 = meta.d * meta.d;
    let mut header = String::from("id");
    for i in 0..d2 {
        header.push_str(&format!(",c{}{}", i / meta.d, i % meta.d));
    }
    header.push_str(",class,orbit_size");
    for c in ["e1", "e2", "e3", "e4", "e5", "s1", "s2"] {
        header.push_str(&format!(",{c}_det,{c}_score"));
    }
    header.push_str(",e5_witness");
    writeln!(out, "{header}")?;
    for r in records {
        let mut line = r.id.to_string();
        for x in &r.coords {
            line.push(',');
            line.push_str(&format!("{x}"));
        }
        line.push(',');
        line.push_str(r.class.label());
        line.push(',');
        line.push_str(&r.orbit_size.to_string());
        for v in [&r.e1, &r.e2, &r.e3, &r.e4, &r.e5, &r.s1, &r.s2] {
            let (det, score) = fmt_opt_verdict(v);
            line.push(',');
            line.push_str(&det);
            line.push(',');
            line.push_str(&score);
        }
        line.push(',');
        if let Some(wid) = r.detecting_witness {
            line.push_str(&wid.to_string());
        }
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

fn parse_verdict(
    criterion: Criterion,
    det: &str,
    score: &str,
    lineno: usize,
) -> Result<Option<CriterionVerdict>> {
    if det.is_empty() {
        return Ok(None);
    }
    let detected = match det {
        "0" => false,
        "1" => true,
        other => {
            return Err(BellError::Parse(format!(
                "line {lineno}: bad detection flag {other:?}"
            )))
        }
    };
    let score: f64 = score
        .parse()
        .map_err(|e| BellError::Parse(format!("line {lineno}: bad score: {e}")))?;
    Ok(Some(CriterionVerdict {
        criterion,
        detected,
        score,
        margin: if detected { f64::EPSILON } else { -f64::EPSILON },
    }))
}

/// Reads a results file back (headers as key=value pairs plus records).
pub fn read_results_csv(path: &Path) -> Result<(Vec<ClassificationRecord>, Vec<String>)> {
    let file = std::fs::File::open(path)
        .map_err(|e| BellError::MissingAsset(format!("results file {}: {e}", path.display())))?;
    let reader = std::io::BufReader::new(file);
    let mut records = Vec::new();
    let mut headers = Vec::new();
    let mut column_header: Option<Vec<String>> = None;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        if line.starts_with('#') {
            headers.push(line);
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if column_header.is_none() {
            column_header = Some(line.split(',').map(str::to_string).collect());
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        let names = column_header.as_ref().unwrap();
        if cols.len() != names.len() {
            return Err(BellError::Parse(format!(
                "line {lineno}: expected {} columns, got {}",
                names.len(),
                cols.len()
            )));
        }
        let ncoords = names
            .iter()
            .filter(|n| {
                n.len() >= 2 && n.starts_with('c') && n[1..].chars().all(|ch| ch.is_ascii_digit())
            })
            .count();
        let id: usize = cols[0]
            .parse()
            .map_err(|e| BellError::Parse(format!("line {lineno}: bad id: {e}")))?;
        let coords: Vec<f64> = cols[1..1 + ncoords]
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| BellError::Parse(format!("line {lineno}: bad coordinate: {e}")))?;
        let class = StateClass::from_label(cols[1 + ncoords]).ok_or_else(|| {
            BellError::Parse(format!("line {lineno}: bad class {:?}", cols[1 + ncoords]))
        })?;
        let orbit_size: usize = cols[2 + ncoords]
            .parse()
            .map_err(|e| BellError::Parse(format!("line {lineno}: bad orbit size: {e}")))?;
        let base = 3 + ncoords;
        let cs = [
            Criterion::E1,
            Criterion::E2,
            Criterion::E3,
            Criterion::E4,
            Criterion::E5,
            Criterion::S1,
            Criterion::S2,
        ];
        let mut verdicts = [None; 7];
        for (i, &criterion) in cs.iter().enumerate() {
            verdicts[i] = parse_verdict(criterion, cols[base + 2 * i], cols[base + 2 * i + 1], lineno)?;
        }
        let wit_col = cols[base + 14];
        let detecting_witness = if wit_col.is_empty() {
            None
        } else {
            Some(wit_col.parse::<usize>().map_err(|e| {
                BellError::Parse(format!("line {lineno}: bad witness id: {e}"))
            })?)
        };
        records.push(ClassificationRecord {
            id,
            coords,
            class,
            e1: verdicts[0],
            e2: verdicts[1],
            e3: verdicts[2],
            e4: verdicts[3],
            e5: verdicts[4],
            s1: verdicts[5],
            s2: verdicts[6],
            detecting_witness,
            orbit_size,
        });
    }
    Ok((records, headers))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::separability::KernelStore;

    fn d3_assets(group: &SymmetryGroup) -> Assets {
        let kernel = KernelStore::from_line_states(3).unwrap();
        let gen = crate::witness::generate_witness_set(3, 8, 10, 12345, None).unwrap();
        Assets::prepare(gen.witnesses, kernel, Some(MubSet::qutrit()), group).unwrap()
    }

    #[test]
    fn classify_landmark_states() {
        let group = SymmetryGroup::generate(3).unwrap();
        let assets = d3_assets(&group);
        let opts = ClassifyOptions::default();

        let free = classify(&SimplexCoords::unit(3, 0, 0), &assets, &group, opts).unwrap();
        assert_eq!(free.class, StateClass::Free);
        assert!(free.e1.unwrap().detected);

        let sep = classify(&SimplexCoords::uniform(3), &assets, &group, opts).unwrap();
        assert_eq!(sep.class, StateClass::Sep);
    }

    #[test]
    fn missing_mubs_for_d3_is_a_hard_error() {
        let group = SymmetryGroup::generate(3).unwrap();
        let kernel = KernelStore::from_line_states(3).unwrap();
        assert!(matches!(
            Assets::prepare(Vec::new(), kernel, None, &group),
            Err(BellError::MissingAsset(_))
        ));
    }

    #[test]
    fn d2_assets_need_no_mubs() {
        let group = SymmetryGroup::generate(2).unwrap();
        let kernel = KernelStore::from_line_states(2).unwrap();
        let assets = Assets::prepare(Vec::new(), kernel, None, &group).unwrap();
        let opts = ClassifyOptions::default();
        let sep = classify(&SimplexCoords::uniform(2), &assets, &group, opts).unwrap();
        assert_eq!(sep.class, StateClass::Sep);
        let free = classify(&SimplexCoords::unit(2, 0, 0), &assets, &group, opts).unwrap();
        assert_eq!(free.class, StateClass::Free);
    }

    #[test]
    fn invariant_criteria_are_constant_on_orbits() {
        let group = SymmetryGroup::generate(3).unwrap();
        let mut rng = crate::rng::stream(91, &[0]);
        use rand::Rng;
        for _ in 0..5 {
            let mut c: Vec<f64> = (0..9).map(|_| -rng.random::<f64>().ln()).collect();
            let s: f64 = c.iter().sum();
            c.iter_mut().for_each(|x| *x /= s);
            let coords = SimplexCoords::new(3, c).unwrap();
            let e2_ref = criteria::e2_realignment(&coords).score;
            let s2_ref = separability::s2_score(&coords);
            let e3_ref = criteria::e3_quasipure(&coords).score;
            let e1_ref = criteria::e1_ppt(&coords).detected;
            for element in symmetry::orbit(&coords, &group) {
                assert!((criteria::e2_realignment(&element).score - e2_ref).abs() < 1e-10);
                assert!((separability::s2_score(&element) - s2_ref).abs() < 1e-10);
                assert!((criteria::e3_quasipure(&element).score - e3_ref).abs() < 1e-10);
                assert_eq!(criteria::e1_ppt(&element).detected, e1_ref);
            }
        }
    }

    #[test]
    fn volume_report_is_consistent_and_deterministic() {
        let group = SymmetryGroup::generate(2).unwrap();
        let kernel = KernelStore::from_line_states(2).unwrap();
        let assets = Assets::prepare(Vec::new(), kernel, None, &group).unwrap();
        let spec = SampleSpec::random(2, Region::Simplex, 400, 5);
        let opts = ClassifyOptions::default();
        let (records, report) = estimate_volumes(&spec, &assets, &group, opts).unwrap();
        assert_eq!(records.len(), 400);
        assert_eq!(report.counts.iter().sum::<usize>(), 400);
        assert!((report.frequencies.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // two qubits: every PPT state is separable via the line-state hull
        assert_eq!(report.counts[1], 0);
        assert_eq!(report.counts[3], 0);
        let (_, report2) = estimate_volumes(&spec, &assets, &group, opts).unwrap();
        assert_eq!(report.counts, report2.counts);
    }

    #[test]
    fn compare_rows_respect_count_bounds() {
        let group = SymmetryGroup::generate(3).unwrap();
        let assets = d3_assets(&group);
        let spec = SampleSpec::random(3, Region::Enclosure, 150, 7);
        let opts = ClassifyOptions {
            evaluate_all: true,
            use_orbit: true,
        };
        let (records, _) = estimate_volumes(&spec, &assets, &group, opts).unwrap();
        let rows = compare_criteria(&records);
        assert_eq!(rows.len(), 6);
        for row in &rows {
            assert!(row.both <= row.detected_a.min(row.detected_b));
        }
        // a criterion paired with itself intersects fully
        for c in [Criterion::E2, Criterion::E3, Criterion::E4, Criterion::E5] {
            let diag = pair_counts(&records, c, c);
            assert_eq!(diag.both, diag.detected_a);
            assert_eq!(diag.detected_a, diag.detected_b);
        }
    }

    #[test]
    fn results_csv_round_trips() {
        let group = SymmetryGroup::generate(3).unwrap();
        let assets = d3_assets(&group);
        let spec = SampleSpec::random(3, Region::Enclosure, 40, 3);
        let opts = ClassifyOptions {
            evaluate_all: true,
            use_orbit: true,
        };
        let (records, report) = estimate_volumes(&spec, &assets, &group, opts).unwrap();
        let dir = std::env::temp_dir().join("belldiag-pipeline-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("results.csv");
        write_results_csv(&path, &records, &RunMeta::from_report(&report)).unwrap();
        let (back, headers) = read_results_csv(&path).unwrap();
        assert_eq!(back.len(), records.len());
        assert!(headers.iter().any(|h| h.contains("fingerprint")));
        for (a, b) in back.iter().zip(&records) {
            assert_eq!(a.class, b.class);
            assert_eq!(a.detecting_witness, b.detecting_witness);
            assert_eq!(a.coords, b.coords);
            for c in [
                Criterion::E1,
                Criterion::E2,
                Criterion::E3,
                Criterion::E4,
                Criterion::E5,
                Criterion::S1,
                Criterion::S2,
            ] {
                assert_eq!(a.detected(c), b.detected(c));
            }
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn lattice_study_reproduces_even_odd_convergence() {
        let rows = lattice_vs_random_study(2, &[2, 3, 4, 5], 11, None).unwrap();
        assert_eq!(rows.len(), 4);
        // even steps approach 0.5 from below, odd from above
        assert!(rows[0].lattice_free_freq <= 0.5);
        assert!(rows[2].lattice_free_freq <= 0.5);
        assert!(rows[0].lattice_free_freq <= rows[2].lattice_free_freq);
        assert!(rows[1].lattice_free_freq >= 0.5);
        assert!(rows[3].lattice_free_freq >= 0.5);
        assert!(rows[1].lattice_free_freq >= rows[3].lattice_free_freq);
    }

    #[test]
    fn record_class_matches_verdict_pattern() {
        // FREE ⇔ E1 detected; BOUND ⇒ some E2–E5 detected and no S;
        // SEP ⇒ some S detected; PPT-UNKNOWN ⇒ nothing detected
        let group = SymmetryGroup::generate(3).unwrap();
        let assets = d3_assets(&group);
        let spec = SampleSpec::random(3, Region::Enclosure, 200, 77);
        let opts = ClassifyOptions {
            evaluate_all: true,
            use_orbit: true,
        };
        let (records, _) = estimate_volumes(&spec, &assets, &group, opts).unwrap();
        for r in &records {
            let e1 = r.detected(Criterion::E1);
            let s_any = r.detected(Criterion::S1) || r.detected(Criterion::S2);
            let e_rest = [Criterion::E2, Criterion::E3, Criterion::E4, Criterion::E5]
                .iter()
                .any(|&c| r.detected(c));
            match r.class {
                StateClass::Free => assert!(e1),
                StateClass::Sep => assert!(!e1 && s_any),
                StateClass::Bound => assert!(!e1 && e_rest && !s_any),
                StateClass::PptUnknown => assert!(!e1 && !s_any && !e_rest),
            }
            assert_eq!(r.class == StateClass::Free, e1);
        }
    }

    #[test]
    fn d3_lattice_estimates_are_significantly_biased() {
        // coarse enclosure lattices over-represent free entangled states far
        // beyond sampling noise
        let rows = lattice_vs_random_study(3, &[2, 3], 11, None).unwrap();
        for r in &rows {
            let deviation = (r.lattice_free_freq - r.random_free_freq).abs();
            assert!(
                deviation > 3.0 * r.binomial_sigma,
                "steps {}: lattice {} vs random {} within 3σ {}",
                r.steps,
                r.lattice_free_freq,
                r.random_free_freq,
                r.binomial_sigma
            );
        }
        // the random estimates themselves stay near the known share
        for r in &rows {
            assert!((r.random_free_freq - 0.40).abs() < 0.05);
        }
    }

    #[test]
    fn orbit_audit_passes_on_a_small_batch() {
        let group = SymmetryGroup::generate(3).unwrap();
        let assets = d3_assets(&group);
        let spec = SampleSpec::random(3, Region::Enclosure, 6, 19);
        let states = sampling::sample(&spec).unwrap();
        let report = orbit_audit(&states, &assets, &group).unwrap();
        assert_eq!(report.states_audited, 6);
        assert_eq!(report.class_conflicts, 0);
        assert_eq!(report.e1_mismatches, 0);
    }
}
