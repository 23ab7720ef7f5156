//! Phase-1 simplex feasibility solver for convex-hull membership.
//!
//! Decides whether a target point is a convex combination of given vertices:
//! find λ ≥ 0 with V·λ = c and Σλ = 1. The solver minimizes the sum of
//! artificial variables on a dense tableau; the point is inside the hull iff
//! that sum can be driven to zero. Pivoting is Dantzig at first and falls
//! back to Bland's rule to rule out cycling. Callers must re-verify the
//! returned certificate: feasibility decisions are only trusted after an
//! independent residual check.

/// Outcome of a feasibility solve.
#[derive(Debug, Clone)]
pub enum LpResult {
    /// A candidate convex combination was found (re-check it!).
    Feasible { weights: Vec<f64> },
    /// The phase-1 optimum stayed positive: no convex combination exists.
    Infeasible { objective: f64 },
    /// Iteration cap reached before optimality.
    Inconclusive,
}

/// Reusable scratch buffers for repeated solves against stores of similar
/// size.
#[derive(Debug, Default, Clone)]
pub struct LpWorkspace {
    tableau: Vec<f64>,
    basis: Vec<usize>,
}

const PIVOT_TOL: f64 = 1e-10;
const REDUCED_COST_TOL: f64 = 1e-11;
/// Phase-1 objective below this counts as zero (feasible).
const FEASIBILITY_TOL: f64 = 1e-10;
/// Iterations of Dantzig pricing before switching to Bland's rule.
const DANTZIG_PHASE: usize = 200;

/// Solves the hull-membership feasibility problem.
///
/// `vertices` is vertex-major: vertex j occupies
/// `vertices[j*dim .. (j+1)*dim]`. `target` has length `dim`. The implied
/// constraint system has `dim`+1 rows (coordinates plus the Σλ = 1 row).
pub fn hull_feasibility(
    vertices: &[f64],
    dim: usize,
    target: &[f64],
    max_iters: usize,
    ws: &mut LpWorkspace,
) -> LpResult {
    assert_eq!(target.len(), dim);
    assert_eq!(vertices.len() % dim.max(1), 0);
    let n = vertices.len() / dim.max(1);
    let m = dim + 1;
    let width = n + m + 1; // structural vars, artificials, rhs
    ws.tableau.clear();
    ws.tableau.resize((m + 1) * width, 0.0);
    ws.basis.clear();
    ws.basis.resize(m, 0);
    let t = &mut ws.tableau;

    // constraint rows: coordinates then the normalization row
    for i in 0..dim {
        let row = &mut t[i * width..(i + 1) * width];
        for (j, slot) in row.iter_mut().enumerate().take(n) {
            *slot = vertices[j * dim + i];
        }
        row[n + i] = 1.0;
        row[width - 1] = target[i];
    }
    {
        let row = &mut t[dim * width..(dim + 1) * width];
        row[..n].fill(1.0);
        row[n + dim] = 1.0;
        row[width - 1] = 1.0;
    }
    for (i, b) in ws.basis.iter_mut().enumerate() {
        *b = n + i;
    }
    // objective row: reduced costs for minimizing the artificial sum with the
    // artificial basis, i.e. −(sum of constraint rows) for structural columns
    for j in 0..width {
        let mut acc = 0.0;
        for i in 0..m {
            acc += t[i * width + j];
        }
        t[m * width + j] = if (n..n + m).contains(&j) { 0.0 } else { -acc };
    }

    for iter in 0..max_iters {
        // entering column
        let obj_row = m * width;
        let mut entering = None;
        if iter < DANTZIG_PHASE {
            let mut best = -REDUCED_COST_TOL;
            for j in 0..n + m {
                let r = t[obj_row + j];
                if r < best {
                    best = r;
                    entering = Some(j);
                }
            }
        } else {
            for j in 0..n + m {
                if t[obj_row + j] < -REDUCED_COST_TOL {
                    entering = Some(j);
                    break;
                }
            }
        }
        let Some(e) = entering else {
            // optimal
            let objective = -t[obj_row + width - 1];
            if objective.abs() <= FEASIBILITY_TOL {
                let mut weights = vec![0.0; n];
                for (i, &b) in ws.basis.iter().enumerate() {
                    if b < n {
                        weights[b] = t[i * width + width - 1].max(0.0);
                    }
                }
                return LpResult::Feasible { weights };
            }
            return LpResult::Infeasible { objective };
        };

        // ratio test; Bland tie-break on the smallest basis variable
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let a = t[i * width + e];
            if a > PIVOT_TOL {
                let ratio = t[i * width + width - 1] / a;
                match leave {
                    None => leave = Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - 1e-12
                            || ((ratio - lr).abs() <= 1e-12 && ws.basis[i] < ws.basis[li])
                        {
                            leave = Some((i, ratio));
                        }
                    }
                }
            }
        }
        let Some((li, _)) = leave else {
            // unbounded phase-1 cannot happen with artificials; treat as
            // numerically stuck
            return LpResult::Inconclusive;
        };

        // pivot on (li, e)
        let pivot = t[li * width + e];
        let (pr_start, pr_end) = (li * width, (li + 1) * width);
        for v in &mut t[pr_start..pr_end] {
            *v /= pivot;
        }
        for r in 0..=m {
            if r == li {
                continue;
            }
            let factor = t[r * width + e];
            if factor == 0.0 {
                continue;
            }
            for j in 0..width {
                t[r * width + j] -= factor * t[pr_start + j];
            }
        }
        ws.basis[li] = e;
    }
    LpResult::Inconclusive
}

/// Convenience wrapper allocating a fresh workspace.
pub fn hull_feasibility_simple(vertices: &[f64], dim: usize, target: &[f64]) -> LpResult {
    let mut ws = LpWorkspace::default();
    hull_feasibility(vertices, dim, target, 20_000, &mut ws)
}

/// Residual of a certificate: (‖V·λ − c‖_∞ combined with |Σλ − 1|, min λ).
pub fn certificate_residual(vertices: &[f64], dim: usize, target: &[f64], weights: &[f64]) -> (f64, f64) {
    let n = weights.len();
    let mut recon = vec![0.0; dim];
    let mut wsum = 0.0;
    let mut wmin = f64::INFINITY;
    for j in 0..n {
        let w = weights[j];
        wsum += w;
        wmin = wmin.min(w);
        if w != 0.0 {
            for i in 0..dim {
                recon[i] += w * vertices[j * dim + i];
            }
        }
    }
    let mut res = (wsum - 1.0).abs();
    for i in 0..dim {
        res = res.max((recon[i] - target[i]).abs());
    }
    (res, wmin)
}
