//! Coherent monetary utility functions on a finite space.
//!
//! Signs follow the utility convention: larger is better, `u(0) = 0`,
//! `u(x + c) = u(x) + c`, and `u` is superadditive. A distortion `ψ` acts on
//! the probability through the capacity `v = ψ ∘ P`; `ψ` convex makes `v` a
//! convex game, and then the Choquet integral equals the minimum of `E_Q`
//! over the core of `v`.

use std::collections::HashSet;
use std::fmt;

use itertools::Itertools;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::space::{mass_to_f64, ratio, Mass, OutcomeSpace, RandomVariable};

/// Default cap on the number of outcomes for permutation enumeration.
pub const DEFAULT_CORE_CAP: usize = 8;

const PROBE_POINTS: usize = 64;
const SHAPE_TOL: f64 = 1e-12;

/// Convex distortion `ψ: [0,1] → [0,1]` with `ψ(0) = 0`, `ψ(1) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub enum DistortionFunction {
    /// `ψ(p) = p`.
    Expectation,
    /// `ψ(p) = max(0, (p − (1 − α)) / α)`, `α ∈ (0, 1]`.
    ExpectedShortfall { alpha: Mass },
    /// `ψ(p) = p^{1+α}`, `α ∈ [0, 1]`.
    Power { alpha: f64 },
    /// Linear interpolation between increasing knots `(p, ψ(p))`.
    Piecewise { knots: Vec<(f64, f64)> },
}

impl DistortionFunction {
    pub fn es(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(Error::InvalidDistortion(
                "es level has zero denominator".into(),
            ));
        }
        let psi = Self::ExpectedShortfall {
            alpha: ratio(num, den),
        };
        psi.validate()?;
        Ok(psi)
    }

    pub fn power(alpha: f64) -> Result<Self> {
        let psi = Self::Power { alpha };
        psi.validate()?;
        Ok(psi)
    }

    pub fn piecewise(knots: Vec<(f64, f64)>) -> Result<Self> {
        let psi = Self::Piecewise { knots };
        psi.validate()?;
        Ok(psi)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Expectation => {}
            Self::ExpectedShortfall { alpha } => {
                if !alpha.is_positive() || alpha > &Mass::one() {
                    return Err(Error::InvalidDistortion(format!(
                        "es level {alpha} outside (0, 1]"
                    )));
                }
            }
            Self::Power { alpha } => {
                if !(0.0..=1.0).contains(alpha) {
                    return Err(Error::InvalidDistortion(format!(
                        "power exponent {alpha} outside [0, 1]"
                    )));
                }
            }
            Self::Piecewise { knots } => {
                if knots.len() < 2 {
                    return Err(Error::InvalidDistortion(
                        "piecewise needs at least two knots".into(),
                    ));
                }
                if knots.iter().any(|(p, v)| !p.is_finite() || !v.is_finite()) {
                    return Err(Error::InvalidDistortion("non-finite knot".into()));
                }
                if knots[0] != (0.0, 0.0) || knots[knots.len() - 1] != (1.0, 1.0) {
                    return Err(Error::InvalidDistortion(
                        "knots must start at (0,0) and end at (1,1)".into(),
                    ));
                }
                if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(Error::InvalidDistortion(
                        "knot abscissae must increase".into(),
                    ));
                }
            }
        }
        self.check_shape()
    }

    /// Probe-grid check of normalization, monotonicity and convexity.
    fn check_shape(&self) -> Result<()> {
        let pts: Vec<f64> = (0..=PROBE_POINTS)
            .map(|i| i as f64 / PROBE_POINTS as f64)
            .collect();
        let vals: Vec<f64> = pts.iter().map(|&p| self.eval(p)).collect();
        if vals[0].abs() > SHAPE_TOL || (vals[PROBE_POINTS] - 1.0).abs() > SHAPE_TOL {
            return Err(Error::InvalidDistortion(
                "ψ(0) must be 0 and ψ(1) must be 1".into(),
            ));
        }
        if vals.windows(2).any(|w| w[1] < w[0] - SHAPE_TOL) {
            return Err(Error::InvalidDistortion("ψ must be nondecreasing".into()));
        }
        if vals
            .windows(3)
            .any(|w| w[1] > 0.5 * (w[0] + w[2]) + SHAPE_TOL)
        {
            return Err(Error::InvalidDistortion("ψ must be convex".into()));
        }
        if let Self::Piecewise { knots } = self {
            let slopes: Vec<f64> = knots
                .windows(2)
                .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
                .collect();
            if slopes.iter().any(|&s| s < -SHAPE_TOL)
                || slopes.windows(2).any(|s| s[1] < s[0] - SHAPE_TOL)
            {
                return Err(Error::InvalidDistortion(
                    "piecewise slopes must be nonnegative and nondecreasing".into(),
                ));
            }
        }
        Ok(())
    }

    /// `ψ(p)`; arguments are clamped to `[0, 1]`.
    pub fn eval(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        match self {
            Self::Expectation => p,
            Self::ExpectedShortfall { alpha } => {
                let a = mass_to_f64(alpha);
                ((p - (1.0 - a)) / a).max(0.0)
            }
            Self::Power { alpha } => p.powf(1.0 + alpha),
            Self::Piecewise { knots } => {
                let j = knots.partition_point(|&(x, _)| x < p);
                if j == 0 {
                    return knots[0].1;
                }
                let (x0, y0) = knots[j - 1];
                let (x1, y1) = knots[j.min(knots.len() - 1)];
                if x1 == x0 {
                    y1
                } else {
                    y0 + (y1 - y0) * (p - x0) / (x1 - x0)
                }
            }
        }
    }

    /// Exact `ψ(p)` where the distortion is rational (expectation and es).
    pub fn eval_exact(&self, p: &Mass) -> Option<Mass> {
        match self {
            Self::Expectation => Some(p.clone()),
            Self::ExpectedShortfall { alpha } => {
                let v = (p - (Mass::one() - alpha)) / alpha;
                Some(if v.is_negative() { Mass::zero() } else { v })
            }
            _ => None,
        }
    }
}

impl fmt::Display for DistortionFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Expectation => write!(f, "expectation"),
            Self::ExpectedShortfall { alpha } => write!(f, "es({alpha})"),
            Self::Power { alpha } => write!(f, "power({alpha})"),
            Self::Piecewise { knots } => write!(f, "piecewise({} knots)", knots.len()),
        }
    }
}

/// Choquet integral of `values` against `ψ ∘ P` where `P` is given by
/// `probs` (assumed to sum to one). Values are visited in descending order,
/// ties in index order, and each group of equal values contributes
/// `x · (ψ(s_end) − ψ(s_start))`, so the result does not depend on how ties
/// are ordered.
pub fn choquet_integral(values: &[f64], probs: &[f64], psi: &DistortionFunction) -> f64 {
    debug_assert_eq!(values.len(), probs.len());
    let n = values.len();
    if n == 0 {
        return 0.0;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));

    let mut total = 0.0;
    let mut cumulative = 0.0;
    let mut psi_prev = 0.0;
    let mut k = 0;
    while k < n {
        let v = values[order[k]];
        while k < n && values[order[k]] == v {
            cumulative += probs[order[k]];
            k += 1;
        }
        let psi_now = if k == n { 1.0 } else { psi.eval(cumulative) };
        total += v * (psi_now - psi_prev);
        psi_prev = psi_now;
    }
    total
}

pub fn choquet_eval(x: &RandomVariable, psi: &DistortionFunction, space: &OutcomeSpace) -> f64 {
    choquet_integral(x.values(), space.probs(), psi)
}

/// Finite list of probability vectors: the vertices of a polyhedral dual set.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    measures: Vec<Vec<f64>>,
}

const SCENARIO_SUM_TOL: f64 = 1e-9;

impl ScenarioSet {
    pub fn new(measures: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = measures.first() else {
            return Err(Error::InvalidScenarioSet("empty scenario set".into()));
        };
        let dim = first.len();
        for (k, q) in measures.iter().enumerate() {
            if q.len() != dim {
                return Err(Error::InvalidScenarioSet(format!(
                    "measure {k} has {} entries, expected {dim}",
                    q.len()
                )));
            }
            if q.iter().any(|&v| !v.is_finite() || v < 0.0) {
                return Err(Error::InvalidScenarioSet(format!(
                    "measure {k} has a negative or non-finite entry"
                )));
            }
            let s: f64 = q.iter().sum();
            if (s - 1.0).abs() > SCENARIO_SUM_TOL {
                return Err(Error::InvalidScenarioSet(format!(
                    "measure {k} sums to {s}"
                )));
            }
        }
        Ok(Self { measures })
    }

    pub fn measures(&self) -> &[Vec<f64>] {
        &self.measures
    }

    pub fn len(&self) -> usize {
        self.measures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measures.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.measures[0].len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioValue {
    pub value: f64,
    pub argmin: usize,
}

/// `min_Q E_Q[x]` over the listed measures; ties go to the lowest index.
pub fn scenario_min_eval(x: &RandomVariable, s: &ScenarioSet) -> Result<ScenarioValue> {
    if x.len() != s.dim() {
        return Err(Error::DimensionMismatch {
            expected: s.dim(),
            got: x.len(),
        });
    }
    let mut best = ScenarioValue {
        value: f64::INFINITY,
        argmin: 0,
    };
    for (k, q) in s.measures.iter().enumerate() {
        let v: f64 = q.iter().zip(x.values()).map(|(a, b)| a * b).sum();
        if v < best.value {
            best = ScenarioValue {
                value: v,
                argmin: k,
            };
        }
    }
    Ok(best)
}

pub fn core_extreme_points(psi: &DistortionFunction, space: &OutcomeSpace) -> Result<ScenarioSet> {
    core_extreme_points_with_cap(psi, space.probs(), DEFAULT_CORE_CAP)
}

/// Marginal vectors of the convex game `ψ ∘ P`, one per permutation of the
/// outcomes in lexicographic order, with duplicates removed (first kept).
pub fn core_extreme_points_with_cap(
    psi: &DistortionFunction,
    probs: &[f64],
    cap: usize,
) -> Result<ScenarioSet> {
    let n = probs.len();
    if n > cap {
        return Err(Error::SpaceTooLarge { outcomes: n, cap });
    }
    let mut seen: HashSet<Vec<i64>> = HashSet::new();
    let mut measures = Vec::new();
    for perm in (0..n).permutations(n) {
        let mut q = vec![0.0; n];
        let mut cumulative = 0.0;
        let mut psi_prev = 0.0;
        for (pos, &i) in perm.iter().enumerate() {
            cumulative += probs[i];
            let psi_now = if pos + 1 == n {
                1.0
            } else {
                psi.eval(cumulative)
            };
            q[i] = psi_now - psi_prev;
            psi_prev = psi_now;
        }
        let key: Vec<i64> = q.iter().map(|v| (v * 1e12).round() as i64).collect();
        if seen.insert(key) {
            measures.push(q);
        }
    }
    ScenarioSet::new(measures)
}

/// Discretized product space `[0,1] × [0,1]`: `rows` values of `α`
/// (the `F1` coordinate) times `cols` values of the second coordinate,
/// outcome index `r * cols + c`, uniform masses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProductGrid {
    pub rows: usize,
    pub cols: usize,
}

impl ProductGrid {
    pub fn outcomes(&self) -> usize {
        self.rows * self.cols
    }

    /// Midpoint `α` of row `r`.
    pub fn alpha(&self, r: usize) -> f64 {
        (r as f64 + 0.5) / self.rows as f64
    }
}

/// `∫₀¹ dα ∫₀^∞ P[ξ(α,·) ≥ x]^{1+α} dx` by the midpoint rule in `α`; each row
/// is a Choquet integral with distortion `p^{1+α}` under the uniform row law.
pub fn product_example_eval(x: &RandomVariable, grid: ProductGrid) -> Result<f64> {
    if x.len() != grid.outcomes() || grid.rows == 0 {
        return Err(Error::DimensionMismatch {
            expected: grid.outcomes(),
            got: x.len(),
        });
    }
    if let Some(index) = x.values().iter().position(|&v| v < 0.0) {
        return Err(Error::NegativePayoff {
            index,
            value: x[index],
        });
    }
    let row_probs = vec![1.0 / grid.cols as f64; grid.cols];
    let total: f64 = x
        .values()
        .chunks(grid.cols)
        .enumerate()
        .map(|(r, row)| {
            choquet_integral(
                row,
                &row_probs,
                &DistortionFunction::Power {
                    alpha: grid.alpha(r),
                },
            )
        })
        .sum();
    Ok(total / grid.rows as f64)
}

/// A coherent utility together with its dual representation.
#[derive(Debug, Clone, PartialEq)]
pub enum CoherentUtility {
    Distortion(DistortionFunction),
    Scenario(ScenarioSet),
    ProductExample(ProductGrid),
}

impl CoherentUtility {
    pub fn expectation() -> Self {
        Self::Distortion(DistortionFunction::Expectation)
    }

    pub fn es(num: i64, den: i64) -> Result<Self> {
        Ok(Self::Distortion(DistortionFunction::es(num, den)?))
    }

    pub fn eval(&self, x: &RandomVariable, space: &OutcomeSpace) -> Result<f64> {
        if x.len() != space.len() {
            return Err(Error::DimensionMismatch {
                expected: space.len(),
                got: x.len(),
            });
        }
        match self {
            Self::Distortion(psi) => Ok(choquet_eval(x, psi, space)),
            Self::Scenario(s) => Ok(scenario_min_eval(x, s)?.value),
            Self::ProductExample(grid) => {
                if grid.outcomes() != space.len() || !space.is_uniform() {
                    return Err(Error::Schema(format!(
                        "product example needs a uniform space of {}×{} outcomes",
                        grid.rows, grid.cols
                    )));
                }
                product_example_eval(x, *grid)
            }
        }
    }

    /// Short identifier used in reports.
    pub fn name(&self) -> String {
        match self {
            Self::Distortion(psi) => psi.to_string(),
            Self::Scenario(s) => format!("scenario({} measures)", s.len()),
            Self::ProductExample(g) => format!("product({}x{})", g.rows, g.cols),
        }
    }
}

impl fmt::Display for CoherentUtility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommonotoneCheck {
    pub commonotone: bool,
    /// Outcomes `(i, j)`, `i < j`, with `(x_i − x_j)(y_i − y_j) < 0`.
    pub witness: Option<(usize, usize)>,
}

/// Pairwise criterion `(x(ω) − x(ω'))(y(ω) − y(ω')) ≥ 0`. Every outcome has
/// positive mass, so all pairs count. Sorting by `(x, y)` reduces the check
/// to adjacent pairs.
pub fn is_commonotone_pair(
    x: &RandomVariable,
    y: &RandomVariable,
    space: &OutcomeSpace,
) -> Result<CommonotoneCheck> {
    let n = space.len();
    for v in [x, y] {
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: v.len(),
            });
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        x[a].total_cmp(&x[b])
            .then(y[a].total_cmp(&y[b]))
            .then(a.cmp(&b))
    });
    for w in order.windows(2) {
        let (a, b) = (w[0], w[1]);
        if y[b] < y[a] {
            return Ok(CommonotoneCheck {
                commonotone: false,
                witness: Some((a.min(b), a.max(b))),
            });
        }
    }
    Ok(CommonotoneCheck {
        commonotone: true,
        witness: None,
    })
}

const RELEVANCE_TOL: f64 = 1e-12;

/// `u(−1_A) < 0` for every nonempty event `A`. By monotonicity
/// `u(−1_A) ≤ u(−1_{ω})` for each `ω ∈ A`, so singletons decide it.
pub fn relevance_check(u: &CoherentUtility, space: &OutcomeSpace) -> Result<bool> {
    Ok(relevance_witness(u, space)?.is_none())
}

/// The first outcome `ω` with `u(−1_{ω}) ≥ 0`, if any.
pub fn relevance_witness(u: &CoherentUtility, space: &OutcomeSpace) -> Result<Option<usize>> {
    let n = space.len();
    for i in 0..n {
        let mut values = vec![0.0; n];
        values[i] = -1.0;
        let v = match u {
            // defined for nonnegative payoffs: u(−1_A) = u(1 − 1_A) − 1
            CoherentUtility::ProductExample(_) => {
                u.eval(
                    &RandomVariable::new(values.iter().map(|v| v + 1.0).collect())?,
                    space,
                )? - 1.0
            }
            _ => u.eval(&RandomVariable::new(values)?, space)?,
        };
        if v >= -RELEVANCE_TOL {
            return Ok(Some(i));
        }
    }
    Ok(None)
}
