//! Entanglement-class-conserving symmetries as permutations of the d²
//! phase-space indices.
//!
//! The generators act on (k, l) ∈ Z_d × Z_d as unit translations, momentum
//! inversion (k,l) → (−k,l), quarter rotation (k,l) → (−l,k) and vertical
//! shear (k,l) → (k+l,l). Breadth-first closure over composition yields the
//! full finite group: 24 elements for d=2 and 432 for d=3 (the semidirect
//! product of translations with GL(2, Z_d)).

use std::collections::{HashMap, VecDeque};

use crate::error::BellError;
use crate::weyl::SimplexCoords;
use crate::Result;

/// Default cap on the number of group elements.
pub const DEFAULT_ELEMENT_CAP: usize = 1_000_000;

/// Names of the elementary phase-space maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    TranslateK,
    TranslateL,
    MomentumInversion,
    QuarterRotation,
    VerticalShear,
}

impl Generator {
    pub const ALL: [Generator; 5] = [
        Generator::TranslateK,
        Generator::TranslateL,
        Generator::MomentumInversion,
        Generator::QuarterRotation,
        Generator::VerticalShear,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Generator::TranslateK => "tk",
            Generator::TranslateL => "tl",
            Generator::MomentumInversion => "inv",
            Generator::QuarterRotation => "rot",
            Generator::VerticalShear => "shear",
        }
    }

    fn map(&self, k: i64, l: i64) -> (i64, i64) {
        match self {
            Generator::TranslateK => (k + 1, l),
            Generator::TranslateL => (k, l + 1),
            Generator::MomentumInversion => (-k, l),
            Generator::QuarterRotation => (-l, k),
            Generator::VerticalShear => (k + l, l),
        }
    }
}

/// A group element: a permutation of the d² flat indices together with a
/// generator word recording how it was produced.
#[derive(Debug, Clone)]
pub struct SymmetryElement {
    pub perm: Vec<usize>,
    pub word: Vec<Generator>,
}

impl SymmetryElement {
    pub fn identity(d: usize) -> Self {
        Self {
            perm: (0..d * d).collect(),
            word: Vec::new(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.perm.iter().enumerate().all(|(i, &p)| i == p)
    }
}

fn generator_perm(d: usize, g: Generator) -> Vec<usize> {
    let m = d as i64;
    let mut perm = vec![0usize; d * d];
    for k in 0..d {
        for l in 0..d {
            let (nk, nl) = g.map(k as i64, l as i64);
            perm[k * d + l] = (nk.rem_euclid(m) as usize) * d + nl.rem_euclid(m) as usize;
        }
    }
    perm
}

/// The five generator permutations for dimension d.
pub fn generators(d: usize) -> Vec<SymmetryElement> {
    Generator::ALL
        .iter()
        .map(|&g| SymmetryElement {
            perm: generator_perm(d, g),
            word: vec![g],
        })
        .collect()
}

/// The closed group of index permutations generated by the elementary maps.
#[derive(Debug, Clone)]
pub struct SymmetryGroup {
    d: usize,
    elements: Vec<SymmetryElement>,
}

impl SymmetryGroup {
    /// Breadth-first closure starting from the identity. Errors if the
    /// element count exceeds `cap`.
    pub fn generate_capped(d: usize, cap: usize) -> Result<Self> {
        if !(2..=5).contains(&d) {
            return Err(BellError::Dimension(d, "supported dimensions are 2..=5"));
        }
        let gens = generators(d);
        let mut seen: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut elements = vec![SymmetryElement::identity(d)];
        seen.insert(elements[0].perm.clone(), 0);
        let mut queue: VecDeque<usize> = VecDeque::from([0]);
        while let Some(idx) = queue.pop_front() {
            for g in &gens {
                // apply g after the queued element
                let base = elements[idx].perm.clone();
                let composed: Vec<usize> = base.iter().map(|&p| g.perm[p]).collect();
                if !seen.contains_key(&composed) {
                    if elements.len() >= cap {
                        return Err(BellError::CapExceeded(format!(
                            "symmetry group for d={d} exceeds {cap} elements"
                        )));
                    }
                    let mut word = elements[idx].word.clone();
                    word.extend(&g.word);
                    seen.insert(composed.clone(), elements.len());
                    elements.push(SymmetryElement {
                        perm: composed,
                        word,
                    });
                    queue.push_back(elements.len() - 1);
                }
            }
        }
        Ok(Self { d, elements })
    }

    pub fn generate(d: usize) -> Result<Self> {
        Self::generate_capped(d, DEFAULT_ELEMENT_CAP)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[SymmetryElement] {
        &self.elements
    }

    pub fn contains_perm(&self, perm: &[usize]) -> bool {
        self.elements.iter().any(|e| e.perm == perm)
    }
}

/// All distinct images of `coords` under the group, including the input.
///
/// Images are exact entry permutations, so deduplication by coordinate
/// equality within 1e-12 per entry reduces to exact comparison here. Output
/// is sorted lexicographically for deterministic downstream iteration.
pub fn orbit(coords: &SimplexCoords, group: &SymmetryGroup) -> Vec<SimplexCoords> {
    let mut images: Vec<Vec<f64>> = group
        .elements()
        .iter()
        .map(|e| coords.permuted(&e.perm).as_slice().to_vec())
        .collect();
    images.sort_by(|a, b| a.partial_cmp(b).unwrap());
    images.dedup_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .all(|(x, y)| (*x - *y).abs() <= 1e-12)
    });
    images
        .into_iter()
        .map(|c| SimplexCoords::new(coords.d(), c).expect("permutation preserves validity"))
        .collect()
}
