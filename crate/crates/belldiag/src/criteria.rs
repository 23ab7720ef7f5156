//! Sufficient entanglement criteria E1–E4 as pure predicates on simplex
//! coordinates.
//!
//! Thresholds are one-sided: a criterion only fires when its statistic lies
//! beyond the separable bound by more than a small detection tolerance, so
//! numerical noise can only produce "inconclusive", never a wrong label.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::BellError;
use crate::mat;
use crate::weyl::{self, SimplexCoords};
use crate::Result;

/// One-sided detection tolerance shared by score-vs-bound criteria.
pub const EPS_DET: f64 = 1e-9;
/// Eigenvalue tolerance for the PPT criterion.
pub const EPS_PPT: f64 = 1e-10;

/// Criterion identifiers as used in reports and result files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Criterion {
    E1,
    E2,
    E3,
    E4,
    E5,
    S1,
    S2,
}

impl Criterion {
    pub fn label(&self) -> &'static str {
        match self {
            Criterion::E1 => "E1",
            Criterion::E2 => "E2",
            Criterion::E3 => "E3",
            Criterion::E4 => "E4",
            Criterion::E5 => "E5",
            Criterion::S1 => "S1",
            Criterion::S2 => "S2",
        }
    }
}

/// Outcome of evaluating one criterion on one state. For E-criteria
/// `detected` means entanglement was certified; for S-criteria it means
/// separability was certified. `margin` is the distance past the decision
/// threshold and is positive exactly when `detected`.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct CriterionVerdict {
    pub criterion: Criterion,
    pub detected: bool,
    pub score: f64,
    pub margin: f64,
}

impl CriterionVerdict {
    pub(crate) fn thresholded(criterion: Criterion, score: f64, margin: f64) -> Self {
        Self {
            criterion,
            detected: margin > 0.0,
            score,
            margin,
        }
    }
}

/// E1, the positive partial transpose criterion. The state is free entangled
/// iff the partially transposed density matrix has an eigenvalue below
/// −1e-10. Score is the minimal eigenvalue.
pub fn e1_ppt(coords: &SimplexCoords) -> CriterionVerdict {
    let d = coords.d();
    let rho = weyl::density_from_coords(coords);
    let pt = mat::partial_transpose(&rho, d);
    let lambda_min = mat::hermitian_eigenvalues(&pt)[0];
    CriterionVerdict::thresholded(Criterion::E1, lambda_min, -EPS_PPT - lambda_min)
}

/// E2, the realignment criterion: entangled if the trace norm of the
/// realigned density matrix exceeds 1.
pub fn e2_realignment(coords: &SimplexCoords) -> CriterionVerdict {
    let d = coords.d();
    let rho = weyl::density_from_coords(coords);
    let score = mat::nuclear_norm(&mat::realign(&rho, d));
    CriterionVerdict::thresholded(Criterion::E2, score, score - (1.0 + EPS_DET))
}

/// E3, the quasi-pure approximation of the concurrence. With (n,m) the index
/// of the largest mixing probability (ties broken toward the lowest flat
/// index),
///   S_{k,l} = √( d/(2(d−1)) · c_{k,l} · [ (1−2/d)·c_{n,m}·δ_{k,n}δ_{l,m}
///             + c_{(2n−k) mod d, (2m−l) mod d}/d² ] )
/// and the state is entangled if C_qp = S_{n,m} − Σ_{(k,l)≠(n,m)} S_{k,l}
/// is positive.
pub fn e3_quasipure(coords: &SimplexCoords) -> CriterionVerdict {
    let score = quasipure_concurrence(coords);
    CriterionVerdict::thresholded(Criterion::E3, score, score - EPS_DET)
}

pub(crate) fn quasipure_concurrence(coords: &SimplexCoords) -> f64 {
    let d = coords.d();
    let df = d as f64;
    let (flat_max, c_nm) = coords.argmax();
    let (n, m) = (flat_max / d, flat_max % d);
    let prefactor = df / (2.0 * (df - 1.0));
    let mut s_max = 0.0;
    let mut s_rest = 0.0;
    for k in 0..d {
        for l in 0..d {
            let mirror_k = (2 * n + d - k) % d;
            let mirror_l = (2 * m + d - l) % d;
            let diag = if (k, l) == (n, m) {
                (1.0 - 2.0 / df) * c_nm
            } else {
                0.0
            };
            let inner = diag + coords.get(mirror_k, mirror_l) / (df * df);
            let s = (prefactor * coords.get(k, l) * inner).max(0.0).sqrt();
            if (k, l) == (n, m) {
                s_max = s;
            } else {
                s_rest += s;
            }
        }
    }
    (s_max - s_rest).max(0.0)
}

/// A set of mutually unbiased bases of C^d.
#[derive(Debug, Clone)]
pub struct MubSet {
    d: usize,
    bases: Vec<Vec<DVector<Complex64>>>,
    /// Index of the basis whose second-party partner vectors are cyclically
    /// shifted before conjugation.
    shifted_basis: usize,
    /// Amount of that shift.
    shift: usize,
    /// Precomputed weights: I(c) = Σ_{k,l} weights[(k,l)]·c_{k,l}.
    weights: Vec<f64>,
}

impl MubSet {
    /// The standard complete MUB family for d=3: the computational basis plus
    /// the three Fourier-type bases with quadratic phase twists,
    /// v_j^{(t)}[m] = w^{jm + t·m²}/√3. The shifted basis defaults to the
    /// computational one with shift 2.
    pub fn qutrit() -> Self {
        Self::qutrit_with_shift(0, 2).expect("default qutrit MUB configuration is valid")
    }

    /// As [`MubSet::qutrit`] with an explicit choice of which basis carries
    /// the index shift and by how much.
    pub fn qutrit_with_shift(shifted_basis: usize, shift: usize) -> Result<Self> {
        let d = 3usize;
        if shifted_basis > d {
            return Err(BellError::Validation(format!(
                "shifted basis index {shifted_basis} out of range (0..=3)"
            )));
        }
        let w = 2.0 * std::f64::consts::PI / d as f64;
        let mut bases = Vec::with_capacity(d + 1);
        let computational: Vec<DVector<Complex64>> = (0..d)
            .map(|i| {
                DVector::from_fn(d, |m, _| Complex64::new(if m == i { 1.0 } else { 0.0 }, 0.0))
            })
            .collect();
        bases.push(computational);
        let norm = 1.0 / (d as f64).sqrt();
        for t in 0..d {
            bases.push(
                (0..d)
                    .map(|j| {
                        DVector::from_fn(d, |m, _| {
                            Complex64::from_polar(norm, w * ((j * m + t * m * m) % d) as f64)
                        })
                    })
                    .collect(),
            );
        }
        let mut set = Self {
            d,
            bases,
            shifted_basis,
            shift: shift % d,
            weights: Vec::new(),
        };
        set.validate()?;
        set.weights = set.compute_weights();
        Ok(set)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn bases(&self) -> &[Vec<DVector<Complex64>>] {
        &self.bases
    }

    /// Checks orthonormality of each basis and pairwise unbiasedness
    /// |⟨i_k|j_l⟩|² = 1/d within 1e-12.
    pub fn validate(&self) -> Result<()> {
        let d = self.d as f64;
        for (bi, basis) in self.bases.iter().enumerate() {
            for (i, u) in basis.iter().enumerate() {
                for (j, v) in basis.iter().enumerate() {
                    let overlap = u.dotc(v).norm();
                    let expect = if i == j { 1.0 } else { 0.0 };
                    if (overlap - expect).abs() > 1e-12 {
                        return Err(BellError::Validation(format!(
                            "basis {bi} is not orthonormal"
                        )));
                    }
                }
            }
        }
        for a in 0..self.bases.len() {
            for b in (a + 1)..self.bases.len() {
                for u in &self.bases[a] {
                    for v in &self.bases[b] {
                        let overlap2 = u.dotc(v).norm_sqr();
                        if (overlap2 - 1.0 / d).abs() > 1e-12 {
                            return Err(BellError::Validation(format!(
                                "bases {a} and {b} are not mutually unbiased"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// The mutual-predictability sum is linear in the mixing probabilities:
    /// each product vector |u⟩⊗|v*⟩ contributes |⟨Ω_{k,l}|u ⊗ v*⟩|² per
    /// coordinate, so the whole sum collapses to one weight per (k,l).
    fn compute_weights(&self) -> Vec<f64> {
        let d = self.d;
        let mut weights = vec![0.0; d * d];
        for (bi, basis) in self.bases.iter().enumerate() {
            for i in 0..d {
                let u = &basis[i];
                let partner = if bi == self.shifted_basis {
                    &basis[(i + self.shift) % d]
                } else {
                    &basis[i]
                };
                let v = partner.map(|z| z.conj());
                for k in 0..d {
                    for l in 0..d {
                        weights[k * d + l] += bell_overlap_sqr(d, k, l, u, &v);
                    }
                }
            }
        }
        weights
    }

    /// Per-coordinate weights of the linear form I(c).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// I(c): the sum of mutual predictabilities over all bases.
    pub fn mutual_predictability(&self, coords: &SimplexCoords) -> f64 {
        coords.dot(&self.weights)
    }
}

/// |⟨Ω_{k,l}| u ⊗ v⟩|² = |(1/√d) Σ_m w^{−mk} u_m v_{(m+l) mod d}|².
pub(crate) fn bell_overlap_sqr(
    d: usize,
    k: usize,
    l: usize,
    u: &DVector<Complex64>,
    v: &DVector<Complex64>,
) -> f64 {
    let w = 2.0 * std::f64::consts::PI / d as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for m in 0..d {
        let phase = Complex64::from_polar(1.0, -w * ((m * k) % d) as f64);
        acc += phase * u[m] * v[(m + l) % d];
    }
    acc.norm_sqr() / d as f64
}

/// E4, the MUB criterion for d=3: with a complete set of four mutually
/// unbiased bases the mutual-predictability sum of any separable state is at
/// most 2; a larger value certifies entanglement.
pub fn e4_mub(coords: &SimplexCoords, mubs: &MubSet) -> Result<CriterionVerdict> {
    if coords.d() != 3 || mubs.d() != 3 {
        return Err(BellError::UnsupportedCriterion("E4", coords.d()));
    }
    let score = mubs.mutual_predictability(coords);
    Ok(CriterionVerdict::thresholded(
        Criterion::E4,
        score,
        score - (2.0 + EPS_DET),
    ))
}
