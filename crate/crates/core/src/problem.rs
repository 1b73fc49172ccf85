//! Time-varying local costs and constraints, their bound constants, the
//! consensus-penalised Lagrangian and its subgradients.

use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{sign_select, BoxSet, MEMBERSHIP_TOLERANCE};
use crate::graph::Graph;
use crate::linalg::l1_norm;
use crate::scalar::Real;

/// A convex, time-varying local cost `f_i(t, ·)`.
pub trait CostFunction<T: Real>: Debug + Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, t: T, y: &DVector<T>) -> T;
    fn gradient(&self, t: T, y: &DVector<T>) -> DVector<T>;
    fn hessian(&self, t: T, y: &DVector<T>) -> DMatrix<T>;
    /// Modulus `l` of strong convexity.
    fn strong_convexity(&self) -> T;
    /// `K_f ≥ sup |f(t, y)|` over all `t ≥ 0` and `y` in `set`.
    fn value_bound(&self, set: &BoxSet<T>) -> T;
    /// `K_∂f ≥ sup ‖∇f(t, y)‖` over all `t ≥ 0` and `y` in `set`.
    fn gradient_bound(&self, set: &BoxSet<T>) -> T;
}

/// A convex, time-varying local constraint `g_i(t, ·)` with values in `ℝ^q`.
pub trait ConstraintFunction<T: Real>: Debug + Send + Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn value(&self, t: T, y: &DVector<T>) -> DVector<T>;
    fn jacobian(&self, t: T, y: &DVector<T>) -> DMatrix<T>;
    /// `K_g ≥ sup ‖g(t, y)‖` over all `t ≥ 0` and `y` in `set`.
    fn value_bound(&self, set: &BoxSet<T>) -> T;
    /// `(J(t), g(t, 0))` when the constraint is affine in `y`.
    fn affine_parts(&self, _t: T) -> Option<(DMatrix<T>, DVector<T>)> {
        None
    }
}

/// `w (y_k - a cos(ω t) - b)²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticTerm<T: Real> {
    pub weight: T,
    pub amplitude: T,
    pub frequency: T,
    pub offset: T,
}

impl<T: Real> QuadraticTerm<T> {
    #[inline]
    pub fn center(&self, t: T) -> T {
        self.amplitude * (self.frequency * t).cos() + self.offset
    }

    fn max_deviation(&self, lo: T, hi: T) -> T {
        let (cmin, cmax) = (
            self.offset - self.amplitude.abs(),
            self.offset + self.amplitude.abs(),
        );
        [hi - cmin, cmax - lo, hi - cmax, cmin - lo]
            .into_iter()
            .map(|d| d.abs())
            .fold(T::zero(), |a, b| a.max(b))
    }
}

/// Separable sinusoidal quadratic cost, one term per output component.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCost<T: Real> {
    pub terms: Vec<QuadraticTerm<T>>,
}

impl<T: Real> QuadraticCost<T> {
    pub fn new(terms: Vec<QuadraticTerm<T>>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Structure("quadratic cost needs at least one term".into()));
        }
        if let Some(k) = terms.iter().position(|t| !(t.weight > T::zero())) {
            return Err(Error::Structure(format!(
                "quadratic cost weight {k} must be positive"
            )));
        }
        Ok(Self { terms })
    }
}

impl<T: Real> CostFunction<T> for QuadraticCost<T> {
    fn dim(&self) -> usize {
        self.terms.len()
    }

    fn value(&self, t: T, y: &DVector<T>) -> T {
        self.terms.iter().zip(y.iter()).fold(T::zero(), |acc, (term, &yk)| {
            let d = yk - term.center(t);
            acc + term.weight * d * d
        })
    }

    fn gradient(&self, t: T, y: &DVector<T>) -> DVector<T> {
        DVector::from_iterator(
            self.terms.len(),
            self.terms
                .iter()
                .zip(y.iter())
                .map(|(term, &yk)| T::lit(2.0) * term.weight * (yk - term.center(t))),
        )
    }

    fn hessian(&self, _t: T, _y: &DVector<T>) -> DMatrix<T> {
        DMatrix::from_diagonal(&DVector::from_iterator(
            self.terms.len(),
            self.terms.iter().map(|term| T::lit(2.0) * term.weight),
        ))
    }

    fn strong_convexity(&self) -> T {
        self.terms
            .iter()
            .map(|t| T::lit(2.0) * t.weight)
            .fold(T::infinity(), |a, b| a.min(b))
    }

    fn value_bound(&self, set: &BoxSet<T>) -> T {
        self.terms.iter().enumerate().fold(T::zero(), |acc, (k, term)| {
            let d = term.max_deviation(set.lower()[k], set.upper()[k]);
            acc + term.weight * d * d
        })
    }

    fn gradient_bound(&self, set: &BoxSet<T>) -> T {
        self.terms
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (k, term)| {
                let g = T::lit(2.0) * term.weight * term.max_deviation(set.lower()[k], set.upper()[k]);
                acc + g * g
            })
            .sqrt()
    }
}

/// Coefficient `gain + amplitude · sin(frequency · t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinusoidalCoefficient<T: Real> {
    pub gain: T,
    pub amplitude: T,
    pub frequency: T,
}

impl<T: Real> SinusoidalCoefficient<T> {
    pub fn constant(gain: T) -> Self {
        Self {
            gain,
            amplitude: T::zero(),
            frequency: T::zero(),
        }
    }

    #[inline]
    pub fn at(&self, t: T) -> T {
        self.gain + self.amplitude * (self.frequency * t).sin()
    }

    fn range(&self) -> (T, T) {
        (self.gain - self.amplitude.abs(), self.gain + self.amplitude.abs())
    }
}

/// One row `Σ_k c_k(t) y_k + d(t)` of an affine constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineRow<T: Real> {
    pub coefficients: Vec<SinusoidalCoefficient<T>>,
    pub offset: SinusoidalCoefficient<T>,
}

impl<T: Real> AffineRow<T> {
    /// Smallest and largest value of the row over all `t` and the box,
    /// treating the sinusoids as independent.
    fn value_range(&self, set: &BoxSet<T>) -> (T, T) {
        let (mut lo_sum, mut hi_sum) = {
            let (a, b) = self.offset.range();
            (a, b)
        };
        for (k, coef) in self.coefficients.iter().enumerate() {
            let (cl, ch) = coef.range();
            let (yl, yh) = (set.lower()[k], set.upper()[k]);
            let corners = [cl * yl, cl * yh, ch * yl, ch * yh];
            lo_sum += corners.iter().copied().fold(T::infinity(), |a, b| a.min(b));
            hi_sum += corners.iter().copied().fold(-T::infinity(), |a, b| a.max(b));
        }
        (lo_sum, hi_sum)
    }
}

/// Affine constraint with sinusoidally time-varying coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineConstraint<T: Real> {
    pub rows: Vec<AffineRow<T>>,
    dim: usize,
}

impl<T: Real> AffineConstraint<T> {
    pub fn new(rows: Vec<AffineRow<T>>) -> Result<Self> {
        let dim = rows
            .first()
            .map(|r| r.coefficients.len())
            .ok_or_else(|| Error::Structure("affine constraint needs at least one row".into()))?;
        for (j, r) in rows.iter().enumerate() {
            if r.coefficients.len() != dim {
                return Err(Error::dim(format!("constraint row {j}"), dim, r.coefficients.len()));
            }
        }
        Ok(Self { rows, dim })
    }

    pub fn jacobian_at(&self, t: T) -> DMatrix<T> {
        DMatrix::from_fn(self.rows.len(), self.dim, |j, k| self.rows[j].coefficients[k].at(t))
    }

    pub fn offset_at(&self, t: T) -> DVector<T> {
        DVector::from_iterator(self.rows.len(), self.rows.iter().map(|r| r.offset.at(t)))
    }
}

impl<T: Real> ConstraintFunction<T> for AffineConstraint<T> {
    fn input_dim(&self) -> usize {
        self.dim
    }

    fn output_dim(&self) -> usize {
        self.rows.len()
    }

    fn value(&self, t: T, y: &DVector<T>) -> DVector<T> {
        DVector::from_iterator(
            self.rows.len(),
            self.rows.iter().map(|r| {
                r.coefficients
                    .iter()
                    .zip(y.iter())
                    .fold(r.offset.at(t), |acc, (c, &yk)| acc + c.at(t) * yk)
            }),
        )
    }

    fn jacobian(&self, t: T, _y: &DVector<T>) -> DMatrix<T> {
        self.jacobian_at(t)
    }

    fn value_bound(&self, set: &BoxSet<T>) -> T {
        self.rows
            .iter()
            .fold(T::zero(), |acc, r| {
                let (lo, hi) = r.value_range(set);
                let b = lo.abs().max(hi.abs());
                acc + b * b
            })
            .sqrt()
    }

    fn affine_parts(&self, t: T) -> Option<(DMatrix<T>, DVector<T>)> {
        Some((self.jacobian_at(t), self.offset_at(t)))
    }
}

/// An agent's local cost, local constraint and output box.
#[derive(Debug, Clone)]
pub struct LocalProblem<T: Real> {
    pub cost: Arc<dyn CostFunction<T>>,
    pub constraint: Arc<dyn ConstraintFunction<T>>,
    pub output_set: BoxSet<T>,
}

impl<T: Real> LocalProblem<T> {
    pub fn new(
        cost: Arc<dyn CostFunction<T>>,
        constraint: Arc<dyn ConstraintFunction<T>>,
        output_set: BoxSet<T>,
    ) -> Result<Self> {
        let p = output_set.dim();
        if cost.dim() != p {
            return Err(Error::dim("cost dimension vs output set", p, cost.dim()));
        }
        if constraint.input_dim() != p {
            return Err(Error::dim("constraint input vs output set", p, constraint.input_dim()));
        }
        if !output_set.is_compact() {
            return Err(Error::Structure("output set must be compact".into()));
        }
        Ok(Self {
            cost,
            constraint,
            output_set,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.output_set.dim()
    }

    pub fn constraint_dim(&self) -> usize {
        self.constraint.output_dim()
    }

    fn check_member(&self, y: &DVector<T>) -> Result<()> {
        if y.len() != self.output_dim() {
            return Err(Error::dim("local output", self.output_dim(), y.len()));
        }
        if !self.output_set.contains(y, T::lit(MEMBERSHIP_TOLERANCE)) {
            return Err(Error::Precondition("output outside its local set".into()));
        }
        Ok(())
    }

    pub fn cost_eval(&self, t: T, y: &DVector<T>) -> Result<T> {
        self.check_member(y)?;
        Ok(self.cost.value(t, y))
    }

    pub fn cost_subgradient(&self, t: T, y: &DVector<T>) -> Result<DVector<T>> {
        self.check_member(y)?;
        Ok(self.cost.gradient(t, y))
    }

    pub fn constraint_eval(&self, t: T, y: &DVector<T>) -> Result<DVector<T>> {
        self.check_member(y)?;
        Ok(self.constraint.value(t, y))
    }

    pub fn constraint_jacobian(&self, t: T, y: &DVector<T>) -> Result<DMatrix<T>> {
        self.check_member(y)?;
        Ok(self.constraint.jacobian(t, y))
    }
}

/// Network-wide bound constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemConstants<T: Real> {
    pub k_f: T,
    pub k_g: T,
    pub k_df: T,
    pub strong_convexity: T,
}

impl<T: Real> ProblemConstants<T> {
    pub fn of(problems: &[LocalProblem<T>]) -> Self {
        let mut out = Self {
            k_f: T::zero(),
            k_g: T::zero(),
            k_df: T::zero(),
            strong_convexity: T::infinity(),
        };
        for p in problems {
            out.k_f = out.k_f.max(p.cost.value_bound(&p.output_set));
            out.k_g = out.k_g.max(p.constraint.value_bound(&p.output_set));
            out.k_df = out.k_df.max(p.cost.gradient_bound(&p.output_set));
            out.strong_convexity = out.strong_convexity.min(p.cost.strong_convexity());
        }
        out
    }
}

/// Step size and consensus gains shared by all agents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalParameters<T: Real> {
    pub epsilon: T,
    pub k_mu: T,
    /// Output-consensus gain, used by the identical-output controller only.
    pub k_y: Option<T>,
}

impl<T: Real> GlobalParameters<T> {
    pub fn new(epsilon: T, k_mu: T) -> Self {
        Self {
            epsilon,
            k_mu,
            k_y: None,
        }
    }
}

/// `½ Σ_i Σ_j a_ij ‖v_i - v_j‖₁`.
pub fn disagreement<T: Real>(values: &[DVector<T>], graph: &Graph) -> Result<T> {
    if values.len() != graph.len() {
        return Err(Error::dim("disagreement: blocks vs nodes", graph.len(), values.len()));
    }
    let mut total = T::zero();
    for (i, vi) in values.iter().enumerate() {
        for &j in graph.neighbors(i) {
            if values[j].len() != vi.len() {
                return Err(Error::dim("disagreement block", vi.len(), values[j].len()));
            }
            total += l1_norm(&(vi - &values[j]));
        }
    }
    Ok(total * T::lit(0.5))
}

fn check_nonnegative<T: Real>(mus: &[DVector<T>]) -> Result<()> {
    if mus.iter().any(|m| m.iter().any(|&v| v < T::zero())) {
        return Err(Error::Precondition("multipliers must be nonnegative".into()));
    }
    Ok(())
}

/// Multiplier disagreement `h(μ)`.
pub fn disagreement_h<T: Real>(mus: &[DVector<T>], graph: &Graph) -> Result<T> {
    check_nonnegative(mus)?;
    disagreement(mus, graph)
}

/// Output disagreement `χ(y)`.
pub fn disagreement_chi<T: Real>(ys: &[DVector<T>], graph: &Graph) -> Result<T> {
    disagreement(ys, graph)
}

/// `Σ f_i + Σ μ_iᵀ g_i - K_μ h(μ)`, plus `K_y χ(y)` when `params.k_y` is set.
pub fn lagrangian_value<T: Real>(
    t: T,
    ys: &[DVector<T>],
    mus: &[DVector<T>],
    problems: &[LocalProblem<T>],
    params: &GlobalParameters<T>,
    graph: &Graph,
) -> Result<T> {
    if ys.len() != problems.len() || mus.len() != problems.len() {
        return Err(Error::dim("lagrangian blocks", problems.len(), ys.len().min(mus.len())));
    }
    let mut total = T::zero();
    for ((p, y), mu) in problems.iter().zip(ys).zip(mus) {
        let g = p.constraint_eval(t, y)?;
        if mu.len() != g.len() {
            return Err(Error::dim("multiplier block", g.len(), mu.len()));
        }
        total += p.cost_eval(t, y)? + mu.dot(&g);
    }
    total -= params.k_mu * disagreement_h(mus, graph)?;
    if let Some(k_y) = params.k_y {
        total += k_y * disagreement_chi(ys, graph)?;
    }
    Ok(total)
}

/// Output-consensus contribution for the identical-output problem.
#[derive(Debug, Clone, Copy)]
pub struct ConsensusTerm<'a, T: Real> {
    pub k_y: T,
    pub neighbor_outputs: &'a [&'a DVector<T>],
}

pub(crate) fn primal_direction<T: Real>(
    t: T,
    y: &DVector<T>,
    mu: &DVector<T>,
    problem: &LocalProblem<T>,
    consensus: Option<ConsensusTerm<'_, T>>,
) -> DVector<T> {
    let mut d = problem.cost.gradient(t, y) + problem.constraint.jacobian(t, y).tr_mul(mu);
    if let Some(c) = consensus {
        for yj in c.neighbor_outputs {
            d += sign_select(&(y - *yj)) * c.k_y;
        }
    }
    d
}

/// `∇f_i(t, y_i) + J_iᵀ μ_i` (+ `K_y Σ_j a_ij sgn(y_i - y_j)`).
pub fn primal_subgradient<T: Real>(
    t: T,
    y: &DVector<T>,
    mu: &DVector<T>,
    problem: &LocalProblem<T>,
    consensus: Option<ConsensusTerm<'_, T>>,
) -> Result<DVector<T>> {
    problem.check_member(y)?;
    if mu.len() != problem.constraint_dim() {
        return Err(Error::dim("multiplier", problem.constraint_dim(), mu.len()));
    }
    if mu.iter().any(|&v| v < T::zero()) {
        return Err(Error::Precondition("multipliers must be nonnegative".into()));
    }
    if let Some(c) = &consensus {
        if let Some(bad) = c.neighbor_outputs.iter().find(|v| v.len() != y.len()) {
            return Err(Error::dim("neighbor output", y.len(), bad.len()));
        }
    }
    Ok(primal_direction(t, y, mu, problem, consensus))
}

pub(crate) fn consensus_penalty<T: Real>(mu: &DVector<T>, neighbor_mus: &[&DVector<T>]) -> DVector<T> {
    let mut s = DVector::zeros(mu.len());
    for mj in neighbor_mus {
        s += sign_select(&(mu - *mj));
    }
    s
}

/// `g_i(t, y_i) - K_μ Σ_j a_ij sgn(μ_i - μ_j)`.
pub fn dual_subgradient<T: Real>(
    t: T,
    y: &DVector<T>,
    mu: &DVector<T>,
    neighbor_mus: &[&DVector<T>],
    problem: &LocalProblem<T>,
    k_mu: T,
) -> Result<DVector<T>> {
    problem.check_member(y)?;
    let q = problem.constraint_dim();
    if mu.len() != q || neighbor_mus.iter().any(|m| m.len() != q) {
        return Err(Error::dim("multiplier", q, mu.len()));
    }
    if mu.iter().chain(neighbor_mus.iter().flat_map(|m| m.iter())).any(|&v| v < T::zero()) {
        return Err(Error::Precondition("multipliers must be nonnegative".into()));
    }
    Ok(problem.constraint.value(t, y) - consensus_penalty(mu, neighbor_mus) * k_mu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn f1() -> QuadraticCost<f64> {
        QuadraticCost::new(vec![
            QuadraticTerm { weight: 2.0, amplitude: 2.0, frequency: 1.0, offset: 1.0 },
            QuadraticTerm { weight: 2.0, amplitude: 1.0, frequency: 1.5, offset: 1.5 },
        ])
        .unwrap()
    }

    fn g1() -> AffineConstraint<f64> {
        AffineConstraint::new(vec![AffineRow {
            coefficients: vec![
                SinusoidalCoefficient { gain: 1.7, amplitude: 0.3, frequency: 15.0 },
                SinusoidalCoefficient { gain: 1.8, amplitude: 0.2, frequency: 10.0 },
            ],
            offset: SinusoidalCoefficient::constant(-1.0),
        }])
        .unwrap()
    }

    fn problem1() -> LocalProblem<f64> {
        LocalProblem::new(Arc::new(f1()), Arc::new(g1()), BoxSet::cube(2, -1.0, 6.0).unwrap()).unwrap()
    }

    #[test]
    fn cost_examples() {
        let p = problem1();
        assert_eq!(p.cost_eval(0.0, &dvector![3.0, 2.5]).unwrap(), 0.0);
        assert!((p.cost_eval(0.0, &dvector![0.0, 0.0]).unwrap() - 30.5).abs() < 1e-12);
        let g = p.cost_subgradient(0.0, &dvector![0.0, 2.5]).unwrap();
        assert!((g[0] + 12.0).abs() < 1e-12);
        assert_eq!(g[1], 0.0);
        assert!(p.cost_eval(0.0, &dvector![7.0, 0.0]).is_err());
    }

    #[test]
    fn constraint_examples() {
        let p = problem1();
        assert_eq!(p.constraint_eval(0.0, &dvector![0.0, 0.0]).unwrap(), dvector![-1.0]);
        let j0 = p.constraint_jacobian(0.3, &dvector![0.0, 0.0]).unwrap();
        let j1 = p.constraint_jacobian(0.3, &dvector![5.0, -1.0]).unwrap();
        assert_eq!(j0, j1);
    }

    #[test]
    fn bound_constants_closed_form() {
        let p = problem1();
        // Term 1: centre in [-1, 3], box [-1, 6] -> max deviation 7; term 2:
        // centre in [0.5, 2.5] -> max deviation 5.5.
        let expected = 2.0 * 49.0 + 2.0 * 30.25;
        assert!((p.cost.value_bound(&p.output_set) - expected).abs() < 1e-12);
        // 2*6 + 2*6 - 1 = 23 at the top, -2 - 2 - 1 = -5 at the bottom.
        assert!((p.constraint.value_bound(&p.output_set) - 23.0).abs() < 1e-12);
        assert_eq!(p.cost.strong_convexity(), 4.0);
    }

    #[test]
    fn disagreement_examples() {
        let g = Graph::ring(2).unwrap();
        let mus = vec![dvector![1.0, 0.0], dvector![0.0, 1.0]];
        assert_eq!(disagreement_h(&mus, &g).unwrap(), 2.0);
        let equal = vec![dvector![0.3, 0.2], dvector![0.3, 0.2]];
        assert_eq!(disagreement_h(&equal, &g).unwrap(), 0.0);
        let scaled: Vec<_> = mus.iter().map(|m| m * 3.0).collect();
        assert_eq!(disagreement_h(&scaled, &g).unwrap(), 6.0);
        assert!(disagreement_h(&[dvector![-1.0], dvector![0.0]], &g).is_err());
    }

    #[test]
    fn dual_subgradient_hand_case() {
        let p = LocalProblem::new(
            Arc::new(QuadraticCost::new(vec![QuadraticTerm { weight: 1.0, amplitude: 0.0, frequency: 0.0, offset: 0.0 }]).unwrap()),
            Arc::new(AffineConstraint::new(vec![AffineRow {
                coefficients: vec![SinusoidalCoefficient::constant(0.0)],
                offset: SinusoidalCoefficient::constant(-1.0),
            }]).unwrap()),
            BoxSet::cube(1, -1.0, 1.0).unwrap(),
        )
        .unwrap();
        let mu2 = dvector![0.0];
        let d = dual_subgradient(0.0, &dvector![0.0], &dvector![2.0], &[&mu2], &p, 3.0).unwrap();
        assert_eq!(d, dvector![-4.0]);
        let d = dual_subgradient(0.0, &dvector![0.0], &dvector![2.0], &[], &p, 3.0).unwrap();
        assert_eq!(d, dvector![-1.0]);
    }

    #[test]
    fn primal_subgradient_reduces_to_cost_gradient() {
        let p = problem1();
        let y = dvector![1.0, 2.0];
        let g = primal_subgradient(0.7, &y, &dvector![0.0], &p, None).unwrap();
        assert_eq!(g, p.cost.gradient(0.7, &y));
        let same = [&y];
        let c = ConsensusTerm { k_y: 5.0, neighbor_outputs: &same };
        let g2 = primal_subgradient(0.7, &y, &dvector![0.0], &p, Some(c)).unwrap();
        assert_eq!(g, g2);
    }

    #[test]
    fn lagrangian_special_cases() {
        let g = Graph::ring(2).unwrap();
        let problems = vec![problem1(), problem1()];
        let ys = vec![dvector![0.5, 0.5], dvector![1.0, 0.0]];
        let params = GlobalParameters::new(0.1, 10.0);
        let zero = vec![dvector![0.0], dvector![0.0]];
        let l0 = lagrangian_value(0.2, &ys, &zero, &problems, &params, &g).unwrap();
        let fsum: f64 = problems.iter().zip(&ys).map(|(p, y)| p.cost.value(0.2, y)).sum();
        assert!((l0 - fsum).abs() < 1e-12);
        let gamma = vec![dvector![0.7], dvector![0.7]];
        let l1 = lagrangian_value(0.2, &ys, &gamma, &problems, &params, &g).unwrap();
        let gsum: f64 = problems.iter().zip(&ys).map(|(p, y)| p.constraint.value(0.2, y)[0]).sum();
        assert!((l1 - (fsum + 0.7 * gsum)).abs() < 1e-12);
    }
}
