//! Weyl operators, Bell projectors and the Bell-diagonal state family.
//!
//! The Weyl operators W_{k,l} = Σ_j w^{j·k} |j⟩⟨j+l mod d| (w = e^{2πi/d})
//! displace the computational basis in discrete phase space. Applying them to
//! one half of the maximally entangled state |Ω_00⟩ = (1/√d) Σ|ii⟩ produces
//! the d² Bell states |Ω_{k,l}⟩; their projectors P_{k,l} span the
//! Bell-diagonal family. A state of that family is fully described by its
//! mixing probabilities c_{k,l}, stored row-major by (k,l) in
//! [`SimplexCoords`].

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::BellError;
use crate::mat::{self, CMat};
use crate::Result;

/// Coordinates below this are treated as invalid rather than float noise.
pub const COORD_NEG_TOL: f64 = -1e-12;
/// Allowed deviation of the coordinate sum from 1.
pub const COORD_SUM_TOL: f64 = 1e-10;

/// Phase-space index (k, l) of a Weyl operator, reduced modulo d.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeylIndex {
    pub d: usize,
    pub k: usize,
    pub l: usize,
}

impl WeylIndex {
    /// Builds an index, reducing arbitrary integers modulo d.
    pub fn new(d: usize, k: i64, l: i64) -> Self {
        let m = d as i64;
        Self {
            d,
            k: (k.rem_euclid(m)) as usize,
            l: (l.rem_euclid(m)) as usize,
        }
    }

    /// Flat position in row-major (k, l) order.
    pub fn flat(&self) -> usize {
        self.k * self.d + self.l
    }
}

/// The d-th roots of unity w^0 .. w^{d-1}.
fn roots_of_unity(d: usize) -> Vec<Complex64> {
    (0..d)
        .map(|t| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * t as f64 / d as f64))
        .collect()
}

fn root(roots: &[Complex64], t: i64) -> Complex64 {
    let d = roots.len() as i64;
    roots[t.rem_euclid(d) as usize]
}

/// The Weyl operator W_{k,l} as a d×d unitary.
pub fn weyl_operator(idx: WeylIndex) -> CMat {
    let d = idx.d;
    let roots = roots_of_unity(d);
    let mut m = CMat::zeros(d, d);
    for j in 0..d {
        m[(j, (j + idx.l) % d)] = root(&roots, (j * idx.k) as i64);
    }
    m
}

/// The Bell state |Ω_{k,l}⟩ = (W_{k,l} ⊗ 1)|Ω_00⟩ as a d²-vector.
///
/// Component (1/√d)·w^{m·k} sits at position m·d + (m+l mod d).
pub fn bell_state(idx: WeylIndex) -> DVector<Complex64> {
    let d = idx.d;
    let roots = roots_of_unity(d);
    let norm = 1.0 / (d as f64).sqrt();
    let mut v = DVector::zeros(d * d);
    for m in 0..d {
        v[m * d + (m + idx.l) % d] = root(&roots, (m * idx.k) as i64) * norm;
    }
    v
}

/// The rank-1 Bell projector P_{k,l} = |Ω_{k,l}⟩⟨Ω_{k,l}|.
pub fn bell_projector(idx: WeylIndex) -> CMat {
    let v = bell_state(idx);
    let n = v.len();
    CMat::from_fn(n, n, |r, c| v[r] * v[c].conj())
}

/// Mixing probabilities of a Bell-diagonal state: a point on the
/// (d²−1)-simplex, indexed row-major by (k, l).
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexCoords {
    d: usize,
    c: Vec<f64>,
}

impl SimplexCoords {
    /// Validates and normalizes raw coordinates. Entries in [−1e-12, 0) are
    /// clamped to 0; anything more negative is rejected, as is a coordinate
    /// sum off 1 by more than 1e-10.
    pub fn new(d: usize, mut c: Vec<f64>) -> Result<Self> {
        if !(2..=5).contains(&d) {
            return Err(BellError::Dimension(d, "supported dimensions are 2..=5"));
        }
        if c.len() != d * d {
            return Err(BellError::InvalidCoordinates(format!(
                "expected {} coordinates, got {}",
                d * d,
                c.len()
            )));
        }
        for x in c.iter_mut() {
            if !x.is_finite() {
                return Err(BellError::InvalidCoordinates("non-finite entry".into()));
            }
            if *x < 0.0 {
                if *x < COORD_NEG_TOL {
                    return Err(BellError::InvalidCoordinates(format!(
                        "coordinate {x:e} below tolerance"
                    )));
                }
                *x = 0.0;
            }
        }
        let sum: f64 = c.iter().sum();
        if (sum - 1.0).abs() > COORD_SUM_TOL {
            return Err(BellError::InvalidCoordinates(format!(
                "coordinate sum {sum} deviates from 1"
            )));
        }
        Ok(Self { d, c })
    }

    /// The unit vector e_{(k,l)}: the pure Bell state P_{k,l}.
    pub fn unit(d: usize, k: usize, l: usize) -> Self {
        let mut c = vec![0.0; d * d];
        c[k * d + l] = 1.0;
        Self { d, c }
    }

    /// Uniform coordinates: the maximally mixed state.
    pub fn uniform(d: usize) -> Self {
        Self {
            d,
            c: vec![1.0 / (d * d) as f64; d * d],
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.c
    }

    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.c[k * self.d + l]
    }

    /// Largest coordinate and its flat position (ties: lowest position).
    pub fn argmax(&self) -> (usize, f64) {
        let mut best = (0, self.c[0]);
        for (i, &x) in self.c.iter().enumerate().skip(1) {
            if x > best.1 {
                best = (i, x);
            }
        }
        best
    }

    /// Applies an index permutation: result[perm[p]] = self[p].
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut c = vec![0.0; self.c.len()];
        for (p, &q) in perm.iter().enumerate() {
            c[q] = self.c[p];
        }
        Self { d: self.d, c }
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        self.c.iter().zip(other).map(|(a, b)| a * b).sum()
    }
}

/// The Bell-diagonal density matrix ρ = Σ c_{k,l} P_{k,l}.
///
/// Entry layout follows from the Bell state structure:
/// ρ[(m·d + m+l, n·d + n+l)] += c_{k,l}·w^{(m−n)k}/d.
pub fn density_from_coords(coords: &SimplexCoords) -> CMat {
    let d = coords.d();
    let roots = roots_of_unity(d);
    let n2 = d * d;
    let mut rho = CMat::zeros(n2, n2);
    for k in 0..d {
        for l in 0..d {
            let c = coords.get(k, l);
            if c == 0.0 {
                continue;
            }
            let scale = c / d as f64;
            for m in 0..d {
                for n in 0..d {
                    let phase = root(&roots, (m as i64 - n as i64) * k as i64);
                    rho[(m * d + (m + l) % d, n * d + (n + l) % d)] += phase * scale;
                }
            }
        }
    }
    rho
}

/// Projects a density matrix onto the Bell-diagonal family:
/// c_{k,l} = tr[P_{k,l} ρ] = ⟨Ω_{k,l}|ρ|Ω_{k,l}⟩.
///
/// The projection equals the average of ρ over conjugation by the local
/// unitaries {W_{k,l} ⊗ conj(W_{k,l})}, so a separable input yields
/// coordinates of a separable Bell-diagonal state.
pub fn twirl_to_simplex(rho: &CMat, d: usize) -> Result<SimplexCoords> {
    let n2 = d * d;
    if rho.nrows() != n2 || rho.ncols() != n2 {
        return Err(BellError::Dimension(d, "matrix size does not match d²"));
    }
    mat::assert_hermitian(rho)?;
    let tr = mat::trace(rho);
    if (tr - Complex64::new(1.0, 0.0)).norm() > 1e-10 {
        return Err(BellError::TraceNotOne(tr));
    }
    let roots = roots_of_unity(d);
    let mut c = vec![0.0; n2];
    for k in 0..d {
        for l in 0..d {
            let mut acc = Complex64::new(0.0, 0.0);
            for m in 0..d {
                for n in 0..d {
                    let phase = root(&roots, (n as i64 - m as i64) * k as i64);
                    acc += phase * rho[(m * d + (m + l) % d, n * d + (n + l) % d)];
                }
            }
            c[k * d + l] = acc.re / d as f64;
        }
    }
    SimplexCoords::new(d, c)
}

/// Weyl representation coefficients of a bipartite (d·d)×(d·d) matrix:
/// s_{μ,ν} = tr[(W_{μ1,ν1} ⊗ W_{μ2,ν2})† ρ], flattened row-major as
/// (μ1·d + ν1)·d² + (μ2·d + ν2). The expansion reads
/// ρ = (1/d²) Σ s_{μ,ν} W_{μ1,ν1} ⊗ W_{μ2,ν2}.
pub fn weyl_coefficients(rho: &CMat, d: usize) -> Vec<Complex64> {
    let n2 = d * d;
    assert_eq!(rho.nrows(), n2);
    assert_eq!(rho.ncols(), n2);
    let roots = roots_of_unity(d);
    let mut s = vec![Complex64::new(0.0, 0.0); n2 * n2];
    for k1 in 0..d {
        for l1 in 0..d {
            for k2 in 0..d {
                for l2 in 0..d {
                    // W_{k,l} has entries w^{j·k} at (j, j+l); the adjoint of a
                    // Kronecker product picks up conjugated phases and
                    // transposed positions.
                    let mut acc = Complex64::new(0.0, 0.0);
                    for j in 0..d {
                        for m in 0..d {
                            let phase = root(&roots, -((j * k1 + m * k2) as i64));
                            acc += phase * rho[(j * d + m, ((j + l1) % d) * d + (m + l2) % d)];
                        }
                    }
                    s[(k1 * d + l1) * n2 + (k2 * d + l2)] = acc;
                }
            }
        }
    }
    s
}

/// Rebuilds ρ = (1/d²) Σ s_{μ,ν} W_{μ1,ν1} ⊗ W_{μ2,ν2} from Weyl
/// coefficients.
pub fn matrix_from_weyl_coefficients(s: &[Complex64], d: usize) -> CMat {
    let n2 = d * d;
    assert_eq!(s.len(), n2 * n2);
    let mut rho = CMat::zeros(n2, n2);
    let roots = roots_of_unity(d);
    let scale = 1.0 / n2 as f64;
    for k1 in 0..d {
        for l1 in 0..d {
            for k2 in 0..d {
                for l2 in 0..d {
                    let coeff = s[(k1 * d + l1) * n2 + (k2 * d + l2)] * scale;
                    if coeff.norm() == 0.0 {
                        continue;
                    }
                    for j in 0..d {
                        for m in 0..d {
                            let phase = root(&roots, (j * k1 + m * k2) as i64);
                            rho[(j * d + m, ((j + l1) % d) * d + (m + l2) % d)] += coeff * phase;
                        }
                    }
                }
            }
        }
    }
    rho
}
