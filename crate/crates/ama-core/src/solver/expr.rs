//! Structurally convex expressions for subproblem constraints and concave
//! objectives.
//!
//! A constraint is a sum of an affine part, nonnegatively weighted squared
//! norms and norms of affine maps into R³, and nonnegatively weighted
//! single-variable exponentials. Every such sum is convex by construction,
//! so the solver never has to trust a user-supplied callable.

use nalgebra::{DMatrix, DVector};

/// Sparse linear functional: `Σ coeff · x[idx]`.
pub type SparseLin = Vec<(usize, f64)>;

pub(crate) fn eval_lin(lin: &SparseLin, x: &[f64]) -> f64 {
    lin.iter().map(|&(i, c)| c * x[i]).sum()
}

/// An affine map from the decision vector into R³: `m(x) = J x + offset`,
/// with each row of `J` stored sparsely.
#[derive(Debug, Clone, Default)]
pub struct AffineVec3 {
    pub rows: [SparseLin; 3],
    pub offset: [f64; 3],
}

impl AffineVec3 {
    /// `m(x) = x[block] - point`, where `block` names three coordinates.
    pub fn block_minus_point(block: [usize; 3], point: [f64; 3]) -> Self {
        AffineVec3 {
            rows: [
                vec![(block[0], 1.0)],
                vec![(block[1], 1.0)],
                vec![(block[2], 1.0)],
            ],
            offset: [-point[0], -point[1], -point[2]],
        }
    }

    /// `m(x) = x[a] - x[b]` between two coordinate blocks.
    pub fn block_difference(a: [usize; 3], b: [usize; 3]) -> Self {
        AffineVec3 {
            rows: [
                vec![(a[0], 1.0), (b[0], -1.0)],
                vec![(a[1], 1.0), (b[1], -1.0)],
                vec![(a[2], 1.0), (b[2], -1.0)],
            ],
            offset: [0.0; 3],
        }
    }

    pub fn eval(&self, x: &[f64]) -> [f64; 3] {
        [
            eval_lin(&self.rows[0], x) + self.offset[0],
            eval_lin(&self.rows[1], x) + self.offset[1],
            eval_lin(&self.rows[2], x) + self.offset[2],
        ]
    }

    /// `out += scale · Jᵀ v`.
    fn add_jt_v(&self, v: [f64; 3], scale: f64, out: &mut DVector<f64>) {
        for (row, vi) in self.rows.iter().zip(v) {
            for &(j, c) in row {
                out[j] += scale * c * vi;
            }
        }
    }

    /// `out += scale · JᵀJ`.
    fn add_jtj(&self, scale: f64, out: &mut DMatrix<f64>) {
        for row in &self.rows {
            for &(a, ca) in row {
                for &(b, cb) in row {
                    out[(a, b)] += scale * ca * cb;
                }
            }
        }
    }

    fn collect_support(&self, out: &mut Vec<usize>) {
        for row in &self.rows {
            out.extend(row.iter().map(|&(i, _)| i));
        }
    }

    fn offset_norm(&self) -> f64 {
        let [a, b, c] = self.offset;
        (a * a + b * b + c * c).sqrt()
    }

    fn max_index(&self) -> Option<usize> {
        self.rows.iter().flat_map(|r| r.iter().map(|&(i, _)| i)).max()
    }
}

/// `weight · ‖m(x)‖²`, `weight ≥ 0`.
#[derive(Debug, Clone)]
pub struct SqNormTerm {
    pub weight: f64,
    pub map: AffineVec3,
}

/// `weight · sqrt(‖m(x)‖² + eps²)`, `weight ≥ 0`.
///
/// The tiny smoothing constant keeps the gradient defined at `m(x) = 0`; it
/// is chosen relative to the map's offset so the perturbation stays far
/// below solver tolerances.
#[derive(Debug, Clone)]
pub struct NormTerm {
    pub weight: f64,
    pub map: AffineVec3,
    eps_sq: f64,
}

impl NormTerm {
    pub fn new(weight: f64, map: AffineVec3) -> Self {
        let eps = 1e-9 * (1.0 + map.offset_norm());
        NormTerm { weight, map, eps_sq: eps * eps }
    }
}

/// `coeff · e^{x[var]}`, `coeff ≥ 0`.
#[derive(Debug, Clone, Copy)]
pub struct ExpTerm {
    pub coeff: f64,
    pub var: usize,
}

/// A structurally convex expression
/// `g(x) = aᵀx + c + Σ wᵢ‖mᵢ(x)‖² + Σ wⱼ‖mⱼ(x)‖ + Σ cₖ e^{x[vₖ]}`.
#[derive(Debug, Clone, Default)]
pub struct ConvexExpr {
    pub lin: SparseLin,
    pub constant: f64,
    sq_norms: Vec<SqNormTerm>,
    norms: Vec<NormTerm>,
    exps: Vec<ExpTerm>,
}

impl ConvexExpr {
    pub fn affine(lin: SparseLin, constant: f64) -> Self {
        ConvexExpr { lin, constant, ..Default::default() }
    }

    pub fn push_sq_norm(&mut self, weight: f64, map: AffineVec3) {
        assert!(weight >= 0.0 && weight.is_finite(), "squared-norm weight must be >= 0");
        if weight > 0.0 {
            self.sq_norms.push(SqNormTerm { weight, map });
        }
    }

    pub fn push_norm(&mut self, weight: f64, map: AffineVec3) {
        assert!(weight >= 0.0 && weight.is_finite(), "norm weight must be >= 0");
        if weight > 0.0 {
            self.norms.push(NormTerm::new(weight, map));
        }
    }

    pub fn push_exp(&mut self, coeff: f64, var: usize) {
        assert!(coeff >= 0.0 && coeff.is_finite(), "exponential coefficient must be >= 0");
        if coeff > 0.0 {
            self.exps.push(ExpTerm { coeff, var });
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut v = eval_lin(&self.lin, x) + self.constant;
        for t in &self.sq_norms {
            let m = t.map.eval(x);
            v += t.weight * (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]);
        }
        for t in &self.norms {
            let m = t.map.eval(x);
            v += t.weight * (m[0] * m[0] + m[1] * m[1] + m[2] * m[2] + t.eps_sq).sqrt();
        }
        for t in &self.exps {
            v += t.coeff * x[t.var].exp();
        }
        v
    }

    /// `out += scale · ∇g(x)`.
    pub(crate) fn add_grad(&self, x: &[f64], scale: f64, out: &mut DVector<f64>) {
        for &(i, c) in &self.lin {
            out[i] += scale * c;
        }
        for t in &self.sq_norms {
            let m = t.map.eval(x);
            t.map.add_jt_v(m, 2.0 * scale * t.weight, out);
        }
        for t in &self.norms {
            let m = t.map.eval(x);
            let s = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2] + t.eps_sq).sqrt();
            t.map.add_jt_v(m, scale * t.weight / s, out);
        }
        for t in &self.exps {
            out[t.var] += scale * t.coeff * x[t.var].exp();
        }
    }

    /// `out += scale · ∇²g(x)`.
    pub(crate) fn add_hess(&self, x: &[f64], scale: f64, out: &mut DMatrix<f64>) {
        for t in &self.sq_norms {
            t.map.add_jtj(2.0 * scale * t.weight, out);
        }
        for t in &self.norms {
            let m = t.map.eval(x);
            let s2 = m[0] * m[0] + m[1] * m[1] + m[2] * m[2] + t.eps_sq;
            let s = s2.sqrt();
            // ∇²‖m‖ = (JᵀJ - Jᵀm mᵀJ / s²) / s
            t.map.add_jtj(scale * t.weight / s, out);
            let mut jtm = DVector::zeros(out.nrows());
            t.map.add_jt_v(m, 1.0, &mut jtm);
            let mut support = Vec::new();
            t.map.collect_support(&mut support);
            support.sort_unstable();
            support.dedup();
            let c = -scale * t.weight / (s * s2);
            for &a in &support {
                for &b in &support {
                    out[(a, b)] += c * jtm[a] * jtm[b];
                }
            }
        }
        for t in &self.exps {
            out[(t.var, t.var)] += scale * t.coeff * x[t.var].exp();
        }
    }

    /// Sorted, deduplicated list of decision indices the expression touches.
    pub(crate) fn support(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.lin.iter().map(|&(i, _)| i).collect();
        for t in &self.sq_norms {
            t.map.collect_support(&mut s);
        }
        for t in &self.norms {
            t.map.collect_support(&mut s);
        }
        s.extend(self.exps.iter().map(|t| t.var));
        s.sort_unstable();
        s.dedup();
        s
    }

    pub(crate) fn max_index(&self) -> Option<usize> {
        let mut m = self.lin.iter().map(|&(i, _)| i).max();
        for t in &self.sq_norms {
            m = m.max(t.map.max_index());
        }
        for t in &self.norms {
            m = m.max(t.map.max_index());
        }
        m = m.max(self.exps.iter().map(|t| t.var).max());
        m
    }
}

/// A concave objective `f(x) = aᵀx + c − Σ wᵢ‖mᵢ(x)‖²` to be maximized.
#[derive(Debug, Clone, Default)]
pub struct ConcaveObjective {
    pub lin: SparseLin,
    pub constant: f64,
    neg_sq_norms: Vec<SqNormTerm>,
}

impl ConcaveObjective {
    pub fn linear(lin: SparseLin, constant: f64) -> Self {
        ConcaveObjective { lin, constant, neg_sq_norms: Vec::new() }
    }

    /// Subtracts `weight · ‖m(x)‖²` from the objective (`weight ≥ 0`).
    pub fn push_neg_sq_norm(&mut self, weight: f64, map: AffineVec3) {
        assert!(weight >= 0.0 && weight.is_finite(), "concavity requires weight >= 0");
        if weight > 0.0 {
            self.neg_sq_norms.push(SqNormTerm { weight, map });
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut v = eval_lin(&self.lin, x) + self.constant;
        for t in &self.neg_sq_norms {
            let m = t.map.eval(x);
            v -= t.weight * (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]);
        }
        v
    }

    /// `out += scale · ∇f(x)`.
    pub(crate) fn add_grad(&self, x: &[f64], scale: f64, out: &mut DVector<f64>) {
        for &(i, c) in &self.lin {
            out[i] += scale * c;
        }
        for t in &self.neg_sq_norms {
            let m = t.map.eval(x);
            t.map.add_jt_v(m, -2.0 * scale * t.weight, out);
        }
    }

    /// `out += scale · (−∇²f)`, which is positive semidefinite.
    pub(crate) fn add_neg_hess(&self, scale: f64, out: &mut DMatrix<f64>) {
        for t in &self.neg_sq_norms {
            t.map.add_jtj(2.0 * scale * t.weight, out);
        }
    }

    pub(crate) fn max_index(&self) -> Option<usize> {
        let mut m = self.lin.iter().map(|&(i, _)| i).max();
        for t in &self.neg_sq_norms {
            m = m.max(t.map.max_index());
        }
        m
    }
}
