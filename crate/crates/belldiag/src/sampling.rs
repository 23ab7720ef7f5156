//! Samplers for Bell-diagonal state families.
//!
//! Uniform sampling on the coordinate simplex uses normalized unit-rate
//! exponential variates (the flat Dirichlet construction), the enclosure
//! polytope is sampled by rejection, and family A draws its three mixing
//! parameters uniformly from [−1,1]³ keeping only valid states. All samplers
//! draw from per-chunk RNG streams derived from the master seed, so output
//! is bit-identical for identical specs regardless of how chunks are
//! scheduled.

use rand::Rng;

use crate::error::BellError;
use crate::rng;
use crate::weyl::SimplexCoords;
use crate::Result;

/// State family to draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// The full coordinate simplex (all Bell-diagonal states).
    Simplex,
    /// The enclosure polytope: coordinates bounded by 1/d.
    Enclosure,
    /// Mixtures of three Bell projectors on a phase-space line with the
    /// maximally mixed state (d = 3 only).
    FamilyA,
    /// Deterministic equidistant grid over the coordinate box.
    Lattice,
}

impl Region {
    pub fn label(&self) -> &'static str {
        match self {
            Region::Simplex => "simplex",
            Region::Enclosure => "enclosure",
            Region::FamilyA => "family-a",
            Region::Lattice => "lattice",
        }
    }
}

/// Default cap on the number of lattice grid nodes.
pub const DEFAULT_LATTICE_CAP: u64 = 100_000_000;

const CHUNK: usize = 1024;
const TAG_SIMPLEX: u64 = 0x51;
const TAG_ENCLOSURE: u64 = 0x52;
const TAG_FAMILY_A: u64 = 0x53;

/// What to sample: family, size, seed, and lattice controls.
#[derive(Debug, Clone)]
pub struct SampleSpec {
    pub d: usize,
    pub region: Region,
    pub count: usize,
    pub seed: u64,
    /// Number of grid steps per coordinate (lattice only).
    pub steps: usize,
    /// Upper end of the per-coordinate lattice range; defaults to 1/d.
    pub range_top: Option<f64>,
    /// Cap on enumerated grid nodes; defaults to [`DEFAULT_LATTICE_CAP`].
    pub lattice_cap: Option<u64>,
}

impl SampleSpec {
    pub fn random(d: usize, region: Region, count: usize, seed: u64) -> Self {
        Self {
            d,
            region,
            count,
            seed,
            steps: 1,
            range_top: None,
            lattice_cap: None,
        }
    }

    pub fn lattice(d: usize, steps: usize, range_top: Option<f64>) -> Self {
        Self {
            d,
            region: Region::Lattice,
            count: 0,
            seed: 0,
            steps,
            range_top,
            lattice_cap: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.d < 2 || self.d > 5 {
            return Err(BellError::Dimension(self.d, "supported dimensions are 2..=5"));
        }
        if self.region == Region::FamilyA && self.d != 3 {
            return Err(BellError::Dimension(self.d, "family A is defined for d=3"));
        }
        if self.region == Region::Lattice && self.steps < 1 {
            return Err(BellError::InvalidCoordinates("lattice needs steps >= 1".into()));
        }
        Ok(())
    }
}

fn draw_simplex_point(d: usize, rng: &mut impl Rng) -> SimplexCoords {
    let n = d * d;
    let mut c = vec![0.0f64; n];
    let mut sum = 0.0;
    for x in c.iter_mut() {
        let u: f64 = rng.random();
        let e = -(1.0 - u).ln();
        *x = e;
        sum += e;
    }
    c.iter_mut().for_each(|x| *x /= sum);
    SimplexCoords::new(d, c).expect("normalized exponentials form valid coordinates")
}

/// Uniform sample on the (d²−1)-simplex.
pub fn sample_simplex(spec: &SampleSpec) -> Result<Vec<SimplexCoords>> {
    spec.validate()?;
    let mut out = Vec::with_capacity(spec.count);
    for chunk in 0..spec.count.div_ceil(CHUNK) {
        let mut rng = rng::stream(spec.seed, &[TAG_SIMPLEX, chunk as u64]);
        let len = CHUNK.min(spec.count - chunk * CHUNK);
        for _ in 0..len {
            out.push(draw_simplex_point(spec.d, &mut rng));
        }
    }
    Ok(out)
}

/// Uniform sample on the enclosure polytope, by rejection from the simplex.
pub fn sample_enclosure(spec: &SampleSpec) -> Result<Vec<SimplexCoords>> {
    sample_enclosure_counting(spec).map(|(v, _)| v)
}

/// As [`sample_enclosure`], also returning the total number of simplex draws
/// (for acceptance-rate diagnostics).
pub fn sample_enclosure_counting(spec: &SampleSpec) -> Result<(Vec<SimplexCoords>, u64)> {
    spec.validate()?;
    let bound = 1.0 / spec.d as f64 + 1e-12;
    let mut out = Vec::with_capacity(spec.count);
    let mut attempts = 0u64;
    for chunk in 0..spec.count.div_ceil(CHUNK) {
        let mut rng = rng::stream(spec.seed, &[TAG_ENCLOSURE, chunk as u64]);
        let len = CHUNK.min(spec.count - chunk * CHUNK);
        let mut accepted = 0;
        while accepted < len {
            attempts += 1;
            let c = draw_simplex_point(spec.d, &mut rng);
            if c.as_slice().iter().all(|&x| x <= bound) {
                out.push(c);
                accepted += 1;
            }
        }
    }
    Ok((out, attempts))
}

/// Coordinates of the family-A state α·P_00 + β·P_01 + γ·P_02 + rest·ρ_mm,
/// or None if any mixing probability is negative.
pub fn family_a_coords(alpha: f64, beta: f64, gamma: f64) -> Option<SimplexCoords> {
    let rest = (1.0 - alpha - beta - gamma) / 9.0;
    let mut c = vec![rest; 9];
    c[0] += alpha;
    c[1] += beta;
    c[2] += gamma;
    if c.iter().any(|&x| x < crate::weyl::COORD_NEG_TOL) {
        return None;
    }
    SimplexCoords::new(3, c).ok()
}

/// Uniform sample of family A: (α, β, γ) drawn from [−1,1]³ and filtered to
/// valid states.
pub fn sample_family_a(spec: &SampleSpec) -> Result<Vec<(f64, f64, f64, SimplexCoords)>> {
    spec.validate()?;
    let mut out = Vec::with_capacity(spec.count);
    for chunk in 0..spec.count.div_ceil(CHUNK) {
        let mut rng = rng::stream(spec.seed, &[TAG_FAMILY_A, chunk as u64]);
        let len = CHUNK.min(spec.count - chunk * CHUNK);
        let mut accepted = 0;
        while accepted < len {
            let a = 2.0 * rng.random::<f64>() - 1.0;
            let b = 2.0 * rng.random::<f64>() - 1.0;
            let g = 2.0 * rng.random::<f64>() - 1.0;
            if let Some(c) = family_a_coords(a, b, g) {
                out.push((a, b, g, c));
                accepted += 1;
            }
        }
    }
    Ok(out)
}

/// Number of grid nodes (s+1)^(d²−1) the lattice would enumerate, checked
/// against the cap.
fn lattice_node_count(spec: &SampleSpec) -> Result<u64> {
    let cap = spec.lattice_cap.unwrap_or(DEFAULT_LATTICE_CAP);
    let free = spec.d * spec.d - 1;
    let mut total: u64 = 1;
    for _ in 0..free {
        total = total
            .checked_mul(spec.steps as u64 + 1)
            .filter(|&t| t <= cap)
            .ok_or_else(|| {
                BellError::CapExceeded(format!(
                    "lattice with {} steps at d={} exceeds {} nodes",
                    spec.steps, spec.d, cap
                ))
            })?;
    }
    Ok(total)
}

/// Deterministic grid over the coordinate box.
///
/// The first d²−1 coordinates run over `steps`+1 equidistant values in
/// [0, range_top]; the last coordinate is fixed by normalization and the
/// point is kept only if that coordinate also lies in the range.
pub fn sample_lattice(spec: &SampleSpec) -> Result<Vec<SimplexCoords>> {
    spec.validate()?;
    lattice_node_count(spec)?;
    let d = spec.d;
    let free = d * d - 1;
    let top = spec.range_top.unwrap_or(1.0 / d as f64);
    let mut out = Vec::new();
    let mut idx = vec![0usize; free];
    loop {
        let mut c: Vec<f64> = idx
            .iter()
            .map(|&j| top * j as f64 / spec.steps as f64)
            .collect();
        let sum: f64 = c.iter().sum();
        let last = 1.0 - sum;
        if last >= -1e-12 && last <= top + 1e-12 {
            c.push(last.max(0.0));
            out.push(SimplexCoords::new(d, c).expect("grid point on the simplex"));
        }
        // mixed-radix increment
        let mut pos = 0;
        loop {
            if pos == free {
                return Ok(out);
            }
            idx[pos] += 1;
            if idx[pos] <= spec.steps {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// Dispatch on the spec's region. Family A callers that need the mixing
/// parameters should use [`sample_family_a`] directly.
pub fn sample(spec: &SampleSpec) -> Result<Vec<SimplexCoords>> {
    match spec.region {
        Region::Simplex => sample_simplex(spec),
        Region::Enclosure => sample_enclosure(spec),
        Region::FamilyA => Ok(sample_family_a(spec)?.into_iter().map(|t| t.3).collect()),
        Region::Lattice => sample_lattice(spec),
    }
}
