//! State-space sets: axis-aligned boxes, conjunctive polyhedra and
//! disjunctions of polyhedra (for non-convex unsafe sets such as complements
//! of boxes).

use super::EncodeError;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Axis-aligned box with finite bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSet {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxSet {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, EncodeError> {
        if lower.len() != upper.len() {
            return Err(EncodeError::Dimension {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(EncodeError::BadBox(i));
            }
        }
        Ok(Self { lower, upper })
    }

    /// Symmetric box `[-r, r]^dim`.
    pub fn centered(dim: usize, r: f64) -> Result<Self, EncodeError> {
        Self::new(vec![-r; dim], vec![r; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| {
                if lo == hi {
                    *lo
                } else {
                    rng.gen_range(*lo..=*hi)
                }
            })
            .collect()
    }

    /// True if `other` fits inside `self` elementwise.
    pub fn contains_box(&self, other: &BoxSet) -> bool {
        self.dim() == other.dim()
            && self
                .lower
                .iter()
                .zip(&other.lower)
                .all(|(a, b)| *a <= *b)
            && self.upper.iter().zip(&other.upper).all(|(a, b)| *a >= *b)
    }
}

/// One linear inequality `coeffs . x <= rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearIneq {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

impl LinearIneq {
    pub fn new(coeffs: Vec<f64>, rhs: f64) -> Result<Self, EncodeError> {
        if coeffs.iter().any(|c| !c.is_finite()) || !rhs.is_finite() {
            return Err(EncodeError::NonFinite);
        }
        Ok(Self { coeffs, rhs })
    }

    pub fn satisfied(&self, x: &[f64]) -> bool {
        self.eval(x) <= self.rhs
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

/// Conjunction of linear inequalities.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PolyhedronSet {
    pub ineqs: Vec<LinearIneq>,
}

impl PolyhedronSet {
    pub fn new(ineqs: Vec<LinearIneq>) -> Self {
        Self { ineqs }
    }

    /// Polyhedron `{x : a . x >= b}` from a single lower bound.
    pub fn half_space_ge(coeffs: Vec<f64>, rhs: f64) -> Result<Self, EncodeError> {
        let flipped: Vec<f64> = coeffs.iter().map(|c| -c).collect();
        Ok(Self::new(vec![LinearIneq::new(flipped, -rhs)?]))
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.ineqs.iter().all(|c| c.satisfied(x))
    }
}

/// Union of conjunctive polyhedra. Membership queries are solved one
/// disjunct at a time, so each emitted MILP stays purely conjunctive.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DisjunctiveSet {
    pub disjuncts: Vec<PolyhedronSet>,
}

impl DisjunctiveSet {
    pub fn new(disjuncts: Vec<PolyhedronSet>) -> Self {
        Self { disjuncts }
    }

    /// The complement of `{x : |x|_inf < r}`: one half-space per face,
    /// `x_i >= r` and `x_i <= -r` for every dimension.
    pub fn outside_sup_ball(dim: usize, r: f64) -> Self {
        let mut disjuncts = Vec::with_capacity(2 * dim);
        for i in 0..dim {
            let mut up = vec![0.0; dim];
            up[i] = -1.0;
            disjuncts.push(PolyhedronSet::new(vec![LinearIneq {
                coeffs: up,
                rhs: -r,
            }])); // -x_i <= -r  <=>  x_i >= r
            let mut dn = vec![0.0; dim];
            dn[i] = 1.0;
            disjuncts.push(PolyhedronSet::new(vec![LinearIneq {
                coeffs: dn,
                rhs: -r,
            }])); // x_i <= -r
        }
        Self::new(disjuncts)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.disjuncts.iter().any(|d| d.contains(x))
    }

    pub fn is_empty(&self) -> bool {
        self.disjuncts.is_empty()
    }
}
