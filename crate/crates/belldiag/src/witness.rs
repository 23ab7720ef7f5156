//! Numerically generated entanglement witnesses (criterion E5).
//!
//! A witness is a coefficient vector κ ∈ [−1,1]^{d²} paired with bounds
//! [L, U] on c·κ over all separable states. Because the trace is linear it
//! suffices to optimize over pure product states |a⟩⊗|b⟩, parameterized by
//! 2(d−1) angles per factor (hyperspherical moduli plus relative phases,
//! anchored at |0⟩). The bounds come from multi-start BFGS over that chart;
//! a state violating the stored interval for any witness is certified
//! entangled.

use std::io::{BufRead, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::criteria::{Criterion, CriterionVerdict, EPS_DET};
use crate::error::BellError;
use crate::mat::CMat;
use crate::optim::{bfgs_minimize, BfgsOptions};
use crate::rng;
use crate::symmetry::SymmetryGroup;
use crate::weyl::SimplexCoords;
use crate::Result;

/// Outward margin applied to optimized bounds before storage. An
/// under-estimated bound would create false entanglement detections, so the
/// stored interval is widened on both sides.
pub const SAFETY_MARGIN: f64 = 1e-6;

/// Format version written into every witness record.
pub const GENERATOR_VERSION: u32 = 1;

const TAG_KAPPA: u64 = 0xE5_01;
const TAG_WSEED: u64 = 0xE5_02;
const TAG_RESTART: u64 = 0xE5_03;
const TAG_VALIDATION: u64 = 0xE5_04;

/// An entanglement witness with separable bounds and generation metadata.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Witness {
    pub d: usize,
    pub kappa: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
    pub restarts: usize,
    pub seed: u64,
    pub generator_version: u32,
}

impl Witness {
    pub fn validate(&self) -> Result<()> {
        if self.kappa.len() != self.d * self.d {
            return Err(BellError::Validation(format!(
                "witness coefficient count {} does not match d²={}",
                self.kappa.len(),
                self.d * self.d
            )));
        }
        if self.kappa.iter().any(|x| !x.is_finite() || x.abs() > 1.0 + 1e-12) {
            return Err(BellError::Validation("witness coefficients outside [-1,1]".into()));
        }
        if !self.lower.is_finite() || !self.upper.is_finite() || self.lower > self.upper {
            return Err(BellError::Validation(format!(
                "witness bounds invalid: [{}, {}]",
                self.lower, self.upper
            )));
        }
        Ok(())
    }
}

/// tr[ρ(c)·W(κ)] = c·κ.
pub fn witness_value(w: &Witness, coords: &SimplexCoords) -> f64 {
    coords.dot(&w.kappa)
}

/// Angles of a pure product state: for each factor, d−1 polar angles
/// followed by d−1 phases; factor A first.
#[derive(Debug, Clone)]
pub struct ProductStateParams {
    pub d: usize,
    pub angles: Vec<f64>,
}

impl ProductStateParams {
    pub fn new(d: usize, angles: Vec<f64>) -> Result<Self> {
        if angles.len() != 4 * (d - 1) {
            return Err(BellError::Validation(format!(
                "expected {} angles for d={d}, got {}",
                4 * (d - 1),
                angles.len()
            )));
        }
        Ok(Self { d, angles })
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            d,
            angles: vec![0.0; 4 * (d - 1)],
        }
    }

    fn split(&self) -> (&[f64], &[f64], &[f64], &[f64]) {
        let n = self.d - 1;
        (
            &self.angles[0..n],
            &self.angles[n..2 * n],
            &self.angles[2 * n..3 * n],
            &self.angles[3 * n..4 * n],
        )
    }
}

/// Amplitudes of the hyperspherical chart: a_0 = cos θ_0,
/// a_j = sin θ_0 ⋯ sin θ_{j−1} cos θ_j · e^{iφ_{j−1}}, with the final
/// component carrying the full sine product. Normalized for any real angles.
pub fn pure_state_amplitudes(d: usize, theta: &[f64], phi: &[f64]) -> Vec<Complex64> {
    let mut amps = vec![Complex64::new(0.0, 0.0); d];
    for j in 0..d {
        let mut r = 1.0;
        for t in theta.iter().take(j.min(d - 1)) {
            r *= t.sin();
        }
        if j < d - 1 {
            r *= theta[j].cos();
        }
        let phase = if j == 0 { 0.0 } else { phi[j - 1] };
        amps[j] = Complex64::from_polar(r, phase);
    }
    amps
}

/// Amplitudes together with derivatives with respect to each of the
/// 2(d−1) angles (polar angles first, then phases).
fn pure_state_jacobian(d: usize, theta: &[f64], phi: &[f64]) -> (Vec<Complex64>, Vec<Vec<Complex64>>) {
    let amps = pure_state_amplitudes(d, theta, phi);
    let n = d - 1;
    let mut jac = vec![vec![Complex64::new(0.0, 0.0); d]; 2 * n];
    for (p, jac_p) in jac.iter_mut().enumerate().take(n) {
        for j in 0..d {
            // radial derivative dr_j/dθ_p
            let sines_end = j.min(n);
            if p >= sines_end && !(j < d - 1 && p == j) {
                continue;
            }
            let mut dr = 1.0;
            for (i, t) in theta.iter().enumerate().take(sines_end) {
                dr *= if i == p { t.cos() } else { t.sin() };
            }
            if j < d - 1 {
                dr *= if p == j { -theta[j].sin() } else { theta[j].cos() };
            }
            let phase = if j == 0 { 0.0 } else { phi[j - 1] };
            jac_p[j] = Complex64::from_polar(1.0, phase) * dr;
        }
    }
    for q in 0..n {
        // d a_{q+1} / dφ_q = i·a_{q+1}
        jac[n + q][q + 1] = Complex64::new(0.0, 1.0) * amps[q + 1];
    }
    (amps, jac)
}

/// The rank-1 product density matrix |a⟩⟨a| ⊗ |b⟩⟨b| for the given angles.
pub fn product_state(params: &ProductStateParams) -> CMat {
    let d = params.d;
    let (ta, pa, tb, pb) = params.split();
    let a = pure_state_amplitudes(d, ta, pa);
    let b = pure_state_amplitudes(d, tb, pb);
    let mut ket = nalgebra::DVector::<Complex64>::zeros(d * d);
    for i in 0..d {
        for j in 0..d {
            ket[i * d + j] = a[i] * b[j];
        }
    }
    CMat::from_fn(d * d, d * d, |r, c| ket[r] * ket[c].conj())
}

/// Simplex coordinates of the twirled product state:
/// p_{k,l} = |⟨Ω_{k,l}| a ⊗ b⟩|². Always sums to 1.
pub fn product_twirl_coords(d: usize, a: &[Complex64], b: &[Complex64]) -> Vec<f64> {
    let w = 2.0 * std::f64::consts::PI / d as f64;
    let mut p = vec![0.0; d * d];
    for k in 0..d {
        for l in 0..d {
            let mut o = Complex64::new(0.0, 0.0);
            for m in 0..d {
                o += Complex64::from_polar(1.0, -w * ((m * k) % d) as f64) * a[m] * b[(m + l) % d];
            }
            p[k * d + l] = o.norm_sqr() / d as f64;
        }
    }
    p
}

/// Haar-random pure state of C^d: normalized complex Gaussian vector.
pub fn haar_state(d: usize, rng: &mut impl Rng) -> Vec<Complex64> {
    loop {
        let v: Vec<Complex64> = (0..d)
            .map(|_| {
                // Box-Muller
                let u1: f64 = rng.random::<f64>().max(1e-300);
                let u2: f64 = rng.random();
                let r = (-2.0 * u1.ln()).sqrt();
                Complex64::new(
                    r * (2.0 * std::f64::consts::PI * u2).cos(),
                    r * (2.0 * std::f64::consts::PI * u2).sin(),
                )
            })
            .collect();
        let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|z| z / norm).collect();
        }
    }
}

/// Coordinates of the twirl of a Haar-random pure product state.
pub fn random_twirled_product(d: usize, rng: &mut impl Rng) -> SimplexCoords {
    let a = haar_state(d, rng);
    let b = haar_state(d, rng);
    SimplexCoords::new(d, product_twirl_coords(d, &a, &b))
        .expect("twirled product coordinates are a probability vector")
}

/// Objective c_prod(θ)·κ over the product-state chart, with analytic
/// gradient. Reused by witness-bound optimization and by kernel extension.
pub(crate) struct LinearFormObjective<'a> {
    d: usize,
    coeffs: &'a [f64],
}

impl<'a> LinearFormObjective<'a> {
    pub(crate) fn new(d: usize, coeffs: &'a [f64]) -> Self {
        assert_eq!(coeffs.len(), d * d);
        Self { d, coeffs }
    }

    /// Objective value and gradient with respect to all 4(d−1) angles.
    pub(crate) fn value_grad(&self, angles: &[f64], grad: &mut [f64]) -> f64 {
        let d = self.d;
        let n = d - 1;
        let w = 2.0 * std::f64::consts::PI / d as f64;
        let (ta, pa) = (&angles[0..n], &angles[n..2 * n]);
        let (tb, pb) = (&angles[2 * n..3 * n], &angles[3 * n..4 * n]);
        let (a, da) = pure_state_jacobian(d, ta, pa);
        let (b, db) = pure_state_jacobian(d, tb, pb);
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut value = 0.0;
        for k in 0..d {
            for l in 0..d {
                let coeff = self.coeffs[k * d + l];
                let mut o = Complex64::new(0.0, 0.0);
                for m in 0..d {
                    o += Complex64::from_polar(1.0, -w * ((m * k) % d) as f64)
                        * a[m]
                        * b[(m + l) % d];
                }
                value += coeff * o.norm_sqr() / d as f64;
                if coeff == 0.0 {
                    continue;
                }
                let scale = 2.0 * coeff / d as f64;
                for p in 0..2 * n {
                    let mut doa = Complex64::new(0.0, 0.0);
                    let mut dob = Complex64::new(0.0, 0.0);
                    for m in 0..d {
                        let phase = Complex64::from_polar(1.0, -w * ((m * k) % d) as f64);
                        doa += phase * da[p][m] * b[(m + l) % d];
                        dob += phase * a[m] * db[p][(m + l) % d];
                    }
                    grad[p] += scale * (o.conj() * doa).re;
                    grad[2 * n + p] += scale * (o.conj() * dob).re;
                }
            }
        }
        value
    }

    #[cfg(test)]
    pub(crate) fn value(&self, angles: &[f64]) -> f64 {
        let d = self.d;
        let n = d - 1;
        let (ta, pa) = (&angles[0..n], &angles[n..2 * n]);
        let (tb, pb) = (&angles[2 * n..3 * n], &angles[3 * n..4 * n]);
        let a = pure_state_amplitudes(d, ta, pa);
        let b = pure_state_amplitudes(d, tb, pb);
        product_twirl_coords(d, &a, &b)
            .iter()
            .zip(self.coeffs)
            .map(|(p, c)| p * c)
            .sum()
    }

    /// Twirl coordinates of the product state at the given angles.
    pub(crate) fn twirl(&self, angles: &[f64]) -> Vec<f64> {
        let d = self.d;
        let n = d - 1;
        let a = pure_state_amplitudes(d, &angles[0..n], &angles[n..2 * n]);
        let b = pure_state_amplitudes(d, &angles[2 * n..3 * n], &angles[3 * n..4 * n]);
        product_twirl_coords(d, &a, &b)
    }
}

/// Result of optimizing a linear form over product states.
#[derive(Debug, Clone)]
pub struct BoundsOutcome {
    pub lower: f64,
    pub upper: f64,
    pub argmin: ProductStateParams,
    pub argmax: ProductStateParams,
    pub failed_restarts: usize,
}

fn random_start(d: usize, rng: &mut impl Rng) -> Vec<f64> {
    let n = d - 1;
    let mut angles = vec![0.0; 4 * n];
    for (i, a) in angles.iter_mut().enumerate() {
        let polar = (i % (2 * n)) < n;
        *a = if polar {
            rng.random::<f64>() * std::f64::consts::FRAC_PI_2
        } else {
            rng.random::<f64>() * 2.0 * std::f64::consts::PI
        };
    }
    angles
}

/// Min/max of c_prod·coeffs over pure product states via multi-start BFGS.
///
/// Restart k draws its starting point from a stream keyed by (seed, k), so
/// a run with more restarts extends a run with fewer: the interval can only
/// grow with the restart count.
pub fn optimize_bounds(d: usize, coeffs: &[f64], restarts: usize, seed: u64) -> Result<BoundsOutcome> {
    if coeffs.len() != d * d {
        return Err(BellError::Validation(format!(
            "coefficient count {} does not match d²={}",
            coeffs.len(),
            d * d
        )));
    }
    if restarts == 0 {
        return Err(BellError::OptimizationFailed("need at least one restart".into()));
    }
    let objective = LinearFormObjective::new(d, coeffs);
    let opts = BfgsOptions::default();
    let mut best: Option<(f64, Vec<f64>, f64, Vec<f64>)> = None;
    let mut failed = 0usize;
    for r in 0..restarts {
        let mut rstream = rng::stream(seed, &[TAG_RESTART, r as u64]);
        let start = random_start(d, &mut rstream);
        let min_out = bfgs_minimize(|x, g| objective.value_grad(x, g), &start, opts);
        let max_out = bfgs_minimize(
            |x, g| {
                let v = objective.value_grad(x, g);
                g.iter_mut().for_each(|gi| *gi = -*gi);
                -v
            },
            &start,
            opts,
        );
        if !min_out.f.is_finite() || !max_out.f.is_finite() {
            failed += 1;
            continue;
        }
        let (lo, lo_x, hi, hi_x) = (min_out.f, min_out.x, -max_out.f, max_out.x);
        best = Some(match best {
            None => (lo, lo_x, hi, hi_x),
            Some((bl, blx, bu, bux)) => {
                let (nl, nlx) = if lo < bl { (lo, lo_x) } else { (bl, blx) };
                let (nu, nux) = if hi > bu { (hi, hi_x) } else { (bu, bux) };
                (nl, nlx, nu, nux)
            }
        });
    }
    let (lower, lo_x, upper, hi_x) =
        best.ok_or_else(|| BellError::OptimizationFailed("all restarts failed".into()))?;
    Ok(BoundsOutcome {
        lower,
        upper,
        argmin: ProductStateParams::new(d, lo_x)?,
        argmax: ProductStateParams::new(d, hi_x)?,
        failed_restarts: failed,
    })
}

/// Separable reference states used to double-check optimized bounds.
pub struct ValidationAssets<'a> {
    /// Number of random twirled product states to test against.
    pub products: usize,
    /// Expand each validation state by this symmetry group.
    pub group: Option<&'a SymmetryGroup>,
    /// Known-separable vertices (e.g. a kernel store) to test against.
    pub kernel_vertices: &'a [Vec<f64>],
}

/// Output of witness-set generation.
#[derive(Debug)]
pub struct GenOutcome {
    pub witnesses: Vec<Witness>,
    /// Witnesses dropped because every restart failed.
    pub failed: usize,
    /// Witnesses whose interval had to be widened by validation states.
    pub widened: usize,
}

/// Generates `count` witnesses with κ uniform on [−1,1]^{d²} and bounds from
/// `restarts` optimizer starts each, then (optionally) widens any interval
/// that misses a validation state. Widening only ever grows intervals, so it
/// preserves soundness.
pub fn generate_witness_set(
    d: usize,
    count: usize,
    restarts: usize,
    seed: u64,
    validation: Option<&ValidationAssets>,
) -> Result<GenOutcome> {
    if count == 0 {
        return Err(BellError::Validation("witness count must be positive".into()));
    }
    let results: Vec<Result<Witness>> = (0..count)
        .into_par_iter()
        .map(|widx| {
            let mut kstream = rng::stream(seed, &[TAG_KAPPA, widx as u64]);
            let kappa: Vec<f64> = (0..d * d)
                .map(|_| 2.0 * kstream.random::<f64>() - 1.0)
                .collect();
            let wseed = rng::stream_seed(seed, &[TAG_WSEED, widx as u64]);
            let bounds = optimize_bounds(d, &kappa, restarts, wseed)?;
            Ok(Witness {
                d,
                kappa,
                lower: bounds.lower - SAFETY_MARGIN,
                upper: bounds.upper + SAFETY_MARGIN,
                restarts,
                seed: wseed,
                generator_version: GENERATOR_VERSION,
            })
        })
        .collect();

    let mut witnesses = Vec::with_capacity(count);
    let mut failed = 0;
    for r in results {
        match r {
            Ok(w) => witnesses.push(w),
            Err(_) => failed += 1,
        }
    }
    let widened = match validation {
        Some(v) => validate_and_widen(d, &mut witnesses, v, seed),
        None => 0,
    };
    Ok(GenOutcome {
        witnesses,
        failed,
        widened,
    })
}

/// Checks every witness against validation states (and their symmetry
/// orbits) and widens intervals that miss one. Returns the number of
/// witnesses adjusted.
fn validate_and_widen(
    d: usize,
    witnesses: &mut [Witness],
    validation: &ValidationAssets,
    seed: u64,
) -> usize {
    let mut states: Vec<Vec<f64>> = Vec::with_capacity(validation.products);
    let mut vstream = rng::stream(seed, &[TAG_VALIDATION]);
    for _ in 0..validation.products {
        states.push(random_twirled_product(d, &mut vstream).as_slice().to_vec());
    }
    witnesses
        .par_iter_mut()
        .map(|w| {
            // Kappa-orbit images are equivalent to state-orbit images:
            // κ·(g·c) = (g⁻¹·κ)·c, and the group is closed under inverses.
            let kappas: Vec<Vec<f64>> = match validation.group {
                Some(group) => group
                    .elements()
                    .iter()
                    .map(|e| {
                        let mut img = vec![0.0; d * d];
                        for (p, &q) in e.perm.iter().enumerate() {
                            img[q] = w.kappa[p];
                        }
                        img
                    })
                    .collect(),
                None => vec![w.kappa.clone()],
            };
            let mut lo = w.lower;
            let mut hi = w.upper;
            for kap in &kappas {
                for c in states.iter().chain(validation.kernel_vertices.iter()) {
                    let v: f64 = kap.iter().zip(c.iter()).map(|(a, b)| a * b).sum();
                    lo = lo.min(v - SAFETY_MARGIN);
                    hi = hi.max(v + SAFETY_MARGIN);
                }
            }
            let adjusted = lo < w.lower || hi > w.upper;
            w.lower = lo;
            w.upper = hi;
            adjusted as usize
        })
        .sum()
}

/// Violation of the witness interval by value `v`: positive outside [L, U].
#[inline]
pub fn interval_violation(w: &Witness, v: f64) -> f64 {
    (w.lower - v).max(v - w.upper)
}

/// E5 detection: the state is entangled if c·κ falls outside some stored
/// witness interval by more than the detection tolerance. Returns the
/// verdict and the index of the most-violated witness.
pub fn e5_detect(coords: &SimplexCoords, witnesses: &[Witness]) -> (CriterionVerdict, Option<usize>) {
    let mut best = f64::NEG_INFINITY;
    let mut best_idx = None;
    for (i, w) in witnesses.iter().enumerate() {
        let violation = interval_violation(w, witness_value(w, coords));
        if violation > best {
            best = violation;
            best_idx = Some(i);
        }
    }
    if witnesses.is_empty() {
        best = 0.0;
    }
    let verdict = CriterionVerdict::thresholded(Criterion::E5, best, best - EPS_DET);
    (verdict, if verdict.detected { best_idx } else { None })
}

/// Writes witnesses as line-delimited JSON records.
pub fn save_witnesses(path: &Path, witnesses: &[Witness]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for w in witnesses {
        let line = serde_json::to_string(w)
            .map_err(|e| BellError::Parse(format!("serializing witness: {e}")))?;
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Loads a line-delimited witness store and validates every record.
pub fn load_witnesses(path: &Path) -> Result<Vec<Witness>> {
    let file = std::fs::File::open(path)
        .map_err(|e| BellError::MissingAsset(format!("witness store {}: {e}", path.display())))?;
    let reader = std::io::BufReader::new(file);
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let w: Witness = serde_json::from_str(&line)
            .map_err(|e| BellError::Parse(format!("witness store line {}: {e}", lineno + 1)))?;
        w.validate()?;
        out.push(w);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat;
    use crate::optim::finite_difference_gradient;
    use crate::weyl;

    #[test]
    fn zero_angles_give_ground_product_state() {
        let rho = product_state(&ProductStateParams::zeros(3));
        assert!((rho[(0, 0)].re - 1.0).abs() < 1e-15);
        assert!(rho.iter().map(|z| z.norm()).sum::<f64>() - 1.0 < 1e-12);
    }

    #[test]
    fn product_states_are_pure_with_unit_trace() {
        let mut rng = crate::rng::stream(51, &[0]);
        for _ in 0..10 {
            let angles: Vec<f64> = (0..8).map(|_| rng.random::<f64>() * 6.0).collect();
            let params = ProductStateParams::new(3, angles).unwrap();
            let rho = product_state(&params);
            assert!((mat::trace(&rho).re - 1.0).abs() < 1e-12);
            let purity = mat::trace(&(&rho * &rho)).re;
            assert!((purity - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn product_vectors_have_schmidt_rank_one() {
        let mut rng = crate::rng::stream(52, &[0]);
        for _ in 0..5 {
            let angles: Vec<f64> = (0..8).map(|_| rng.random::<f64>() * 6.0).collect();
            let params = ProductStateParams::new(3, angles).unwrap();
            let (ta, pa, tb, pb) = params.split();
            let a = pure_state_amplitudes(3, ta, pa);
            let b = pure_state_amplitudes(3, tb, pb);
            // reshape the amplitude vector into a 3×3 matrix; rank-1 iff one
            // nonzero singular value
            let m = CMat::from_fn(3, 3, |i, j| a[i] * b[j]);
            let sv = m.singular_values();
            assert!((sv[0] - 1.0).abs() < 1e-12);
            assert!(sv[1].abs() < 1e-12);
            assert!(sv[2].abs() < 1e-12);
        }
    }

    #[test]
    fn chart_amplitudes_are_normalized_everywhere() {
        let mut rng = crate::rng::stream(53, &[0]);
        for d in [2usize, 3, 4, 5] {
            for _ in 0..10 {
                let theta: Vec<f64> = (0..d - 1).map(|_| rng.random::<f64>() * 10.0 - 5.0).collect();
                let phi: Vec<f64> = (0..d - 1).map(|_| rng.random::<f64>() * 10.0 - 5.0).collect();
                let a = pure_state_amplitudes(d, &theta, &phi);
                let norm: f64 = a.iter().map(|z| z.norm_sqr()).sum();
                assert!((norm - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn twirl_coords_match_matrix_twirl() {
        let mut rng = crate::rng::stream(54, &[0]);
        for _ in 0..5 {
            let angles: Vec<f64> = (0..8).map(|_| rng.random::<f64>() * 6.0).collect();
            let params = ProductStateParams::new(3, angles).unwrap();
            let (ta, pa, tb, pb) = params.split();
            let a = pure_state_amplitudes(3, ta, pa);
            let b = pure_state_amplitudes(3, tb, pb);
            let fast = product_twirl_coords(3, &a, &b);
            let via_matrix = weyl::twirl_to_simplex(&product_state(&params), 3).unwrap();
            for (x, y) in fast.iter().zip(via_matrix.as_slice()) {
                assert!((x - y).abs() < 1e-12);
            }
            assert!((fast.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let mut rng = crate::rng::stream(55, &[0]);
        for d in [2usize, 3] {
            let coeffs: Vec<f64> = (0..d * d).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
            let objective = LinearFormObjective::new(d, &coeffs);
            for _ in 0..8 {
                let angles: Vec<f64> =
                    (0..4 * (d - 1)).map(|_| rng.random::<f64>() * 6.0).collect();
                let mut grad = vec![0.0; angles.len()];
                objective.value_grad(&angles, &mut grad);
                let fd = finite_difference_gradient(|x| objective.value(x), &angles, 1e-5);
                for (g, f) in grad.iter().zip(&fd) {
                    let scale = 1.0f64.max(f.abs());
                    assert!(
                        (g - f).abs() / scale < 1e-6,
                        "gradient mismatch: analytic {g} vs fd {f}"
                    );
                }
            }
        }
    }

    #[test]
    fn bounds_for_single_projector_witness() {
        let mut kappa = vec![0.0; 9];
        kappa[0] = 1.0;
        let out = optimize_bounds(3, &kappa, 50, 7).unwrap();
        // max product overlap with a maximally entangled state is 1/d
        assert!((out.upper - 1.0 / 3.0).abs() < 1e-4, "upper = {}", out.upper);
        assert!(out.upper <= 1.0 / 3.0 + 1e-9);
        assert!(out.lower.abs() < 1e-6, "lower = {}", out.lower);

        // sign flip mirrors the interval
        let neg: Vec<f64> = kappa.iter().map(|x| -x).collect();
        let out_neg = optimize_bounds(3, &neg, 50, 7).unwrap();
        assert!((out_neg.lower + 1.0 / 3.0).abs() < 1e-4);
        assert!(out_neg.upper.abs() < 1e-6);
    }

    #[test]
    fn bounds_for_all_ones_witness_are_degenerate() {
        let kappa = vec![1.0; 9];
        let out = optimize_bounds(3, &kappa, 5, 3).unwrap();
        assert!((out.lower - 1.0).abs() < 1e-9);
        assert!((out.upper - 1.0).abs() < 1e-9);
    }

    #[test]
    fn more_restarts_never_shrink_the_interval() {
        let mut rng = crate::rng::stream(56, &[0]);
        for trial in 0..3 {
            let kappa: Vec<f64> = (0..9).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
            let few = optimize_bounds(3, &kappa, 5, 100 + trial).unwrap();
            let many = optimize_bounds(3, &kappa, 50, 100 + trial).unwrap();
            assert!(many.upper >= few.upper - 1e-8);
            assert!(many.lower <= few.lower + 1e-8);
        }
    }

    #[test]
    fn e5_detects_projector_against_its_witness() {
        let mut kappa = vec![0.0; 9];
        kappa[0] = 1.0;
        let out = optimize_bounds(3, &kappa, 50, 7).unwrap();
        let w = Witness {
            d: 3,
            kappa,
            lower: out.lower - SAFETY_MARGIN,
            upper: out.upper + SAFETY_MARGIN,
            restarts: 50,
            seed: 7,
            generator_version: GENERATOR_VERSION,
        };
        let (verdict, idx) = e5_detect(&SimplexCoords::unit(3, 0, 0), std::slice::from_ref(&w));
        assert!(verdict.detected);
        assert_eq!(idx, Some(0));
        assert!((verdict.score - 2.0 / 3.0).abs() < 1e-3);

        let (mm, _) = e5_detect(&SimplexCoords::uniform(3), std::slice::from_ref(&w));
        assert!(!mm.detected);
    }

    #[test]
    fn empty_witness_set_detects_nothing() {
        let (verdict, idx) = e5_detect(&SimplexCoords::unit(3, 0, 0), &[]);
        assert!(!verdict.detected);
        assert!(idx.is_none());
    }

    #[test]
    fn witness_store_round_trips_and_is_deterministic() {
        let dir = std::env::temp_dir().join("belldiag-witness-test");
        std::fs::create_dir_all(&dir).unwrap();
        let outcome = generate_witness_set(3, 4, 3, 99, None).unwrap();
        assert_eq!(outcome.witnesses.len(), 4);
        let p1 = dir.join("w1.jsonl");
        let p2 = dir.join("w2.jsonl");
        save_witnesses(&p1, &outcome.witnesses).unwrap();
        let again = generate_witness_set(3, 4, 3, 99, None).unwrap();
        save_witnesses(&p2, &again.witnesses).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        let loaded = load_witnesses(&p1).unwrap();
        assert_eq!(loaded.len(), 4);
        for (a, b) in loaded.iter().zip(&outcome.witnesses) {
            assert_eq!(a.kappa, b.kappa);
            assert_eq!(a.lower, b.lower);
            assert_eq!(a.upper, b.upper);
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn witness_value_matches_full_matrix_trace() {
        let mut rng = crate::rng::stream(57, &[0]);
        let kappa: Vec<f64> = (0..9).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
        let w = Witness {
            d: 3,
            kappa: kappa.clone(),
            lower: 0.0,
            upper: 0.0,
            restarts: 0,
            seed: 0,
            generator_version: GENERATOR_VERSION,
        };
        let mut c: Vec<f64> = (0..9).map(|_| -rng.random::<f64>().ln()).collect();
        let s: f64 = c.iter().sum();
        c.iter_mut().for_each(|x| *x /= s);
        let coords = SimplexCoords::new(3, c).unwrap();
        // build W = Σ κ_{kl} P_{kl} and take tr[Wρ] the long way
        let mut wmat = CMat::zeros(9, 9);
        for k in 0..3 {
            for l in 0..3 {
                wmat += weyl::bell_projector(weyl::WeylIndex::new(3, k, l))
                    * Complex64::new(kappa[(k as usize) * 3 + l as usize], 0.0);
            }
        }
        let rho = weyl::density_from_coords(&coords);
        let direct = mat::trace(&(&wmat * &rho)).re;
        assert!((witness_value(&w, &coords) - direct).abs() < 1e-12);
    }
}
