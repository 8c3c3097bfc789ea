//! Commonotone lifts of `F1`-measurable pairs.
//!
//! Given `f, g` with `m = max(‖f‖∞, ‖g‖∞)`, every point `p = (f, g)` lies in
//! `W = {x ≤ m, y ≥ −m}`. The diagonal through `p` meets the two halflines of
//! `V = {(x, −m): x ≤ m} ∪ {(m, y): y ≥ −m}` at `X` and `Y`, and
//! `p = λY + (1 − λ)X`. Choosing `B` with `u_{1,2}(1_B) = λ` and setting
//! `(ξ, η) = X + 1_B (Y − X)` gives a commonotone pair with values in `V`
//! and `u_{1,2}(ξ) = f`, `u_{1,2}(η) = g`.

use serde::{Deserialize, Serialize};

use crate::conditional::{conditional_eval, recompose, restricted_eval, ConditionalUtility};
use crate::error::{Error, Result};
use crate::space::{set_for_levels, EventSet, RandomVariable, UniformGrid};
use crate::utility::{is_commonotone_pair, CoherentUtility, DistortionFunction};

const EQUALITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryPoint {
    pub x: f64,
    pub y: f64,
}

impl GeometryPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn in_w(&self, m: f64) -> bool {
        self.x <= m && self.y >= -m
    }

    /// Membership in `V`, exact.
    pub fn in_v(&self, m: f64) -> bool {
        (self.y == -m && self.x <= m) || (self.x == m && self.y >= -m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometrySplit {
    /// Point on the horizontal halfline `{(x, −m): x ≤ m}`.
    pub x_point: GeometryPoint,
    /// Point on the vertical halfline `{(m, y): y ≥ −m}`.
    pub y_point: GeometryPoint,
    pub lambda: f64,
    /// Common coordinate gap `Y − X = (d, d)`.
    pub d: f64,
}

pub fn geometry_xyl(p: GeometryPoint, m: f64) -> Result<GeometrySplit> {
    if !p.x.is_finite() || !p.y.is_finite() || !m.is_finite() || m < 0.0 || !p.in_w(m) {
        return Err(Error::OutsideW { x: p.x, y: p.y, m });
    }
    let d = 2.0 * m + p.y - p.x;
    if d == 0.0 {
        return Ok(GeometrySplit {
            x_point: p,
            y_point: p,
            lambda: 0.0,
            d,
        });
    }
    Ok(GeometrySplit {
        x_point: GeometryPoint::new(p.x - p.y - m, -m),
        y_point: GeometryPoint::new(m, p.y + m - p.x),
        // p ∈ W puts λ in [0, 1]; clamp round-off
        lambda: ((p.y + m) / d).clamp(0.0, 1.0),
        d,
    })
}

fn distortion(cu: &ConditionalUtility) -> Result<&DistortionFunction> {
    match cu.base() {
        CoherentUtility::Distortion(psi) => Ok(psi),
        _ => Err(Error::NonDistortionBase),
    }
}

fn check_grid(cu: &ConditionalUtility, grid: &UniformGrid) -> Result<()> {
    let n = cu.space().len();
    if grid.ranks().len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: grid.ranks().len(),
        });
    }
    if grid.resolution() < 1 {
        return Err(Error::ResolutionUnavailable {
            resolution: 0,
            block: 0,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoundSet {
    pub event: EventSet,
    /// Grid level `k` per `F1` block; `B ∩ A_b = A_b ∩ {U ≤ k/n}`.
    pub levels: Vec<usize>,
    /// `ψ(k/n)` per block, as an `F1`-measurable variable.
    pub lambda_achieved: RandomVariable,
}

/// Picks, per block, the grid level whose conditional utility `ψ(k/n)` is
/// closest to `λ_target`; ties go to the smaller `k`.
pub fn find_b(
    cu: &ConditionalUtility,
    grid: &UniformGrid,
    lambda_target: &RandomVariable,
) -> Result<FoundSet> {
    let psi = distortion(cu)?;
    check_grid(cu, grid)?;
    let f1 = &cu.filtration().f1;
    f1.check_measurable(lambda_target)?;
    let n = grid.resolution();
    let curve: Vec<f64> = (0..=n).map(|k| psi.eval(k as f64 / n as f64)).collect();
    let mut levels = Vec::with_capacity(f1.num_blocks());
    let mut achieved = Vec::with_capacity(f1.num_blocks());
    for (b, &target) in f1.block_values(lambda_target).iter().enumerate() {
        if !(0.0..=1.0).contains(&target) {
            return Err(Error::OutOfRange {
                index: f1.block(b)[0],
                value: target,
                lo: 0.0,
                hi: 1.0,
            });
        }
        let mut best = 0;
        for k in 1..=n {
            if (curve[k] - target).abs() < (curve[best] - target).abs() {
                best = k;
            }
        }
        levels.push(best);
        achieved.push(curve[best]);
    }
    let event = set_for_levels(cu.filtration(), grid, &levels)?;
    let lambda_achieved = RandomVariable::from_blocks(f1, &achieved)?;
    Ok(FoundSet {
        event,
        levels,
        lambda_achieved,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommonotonePair {
    pub xi: RandomVariable,
    pub eta: RandomVariable,
    #[serde(serialize_with = "serialize_event")]
    pub b: EventSet,
    pub lambda_target: RandomVariable,
    pub lambda_achieved: RandomVariable,
    pub m: f64,
}

fn serialize_event<S: serde::Serializer>(
    e: &EventSet,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(e.members())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockGeometry {
    pub block: usize,
    pub x_point: GeometryPoint,
    pub y_point: GeometryPoint,
    pub d: f64,
    pub lambda_target: f64,
    pub lambda_achieved: f64,
    pub level: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftDiagnostics {
    /// `|u_{1,2}(ξ) − f|` per block.
    pub err_f: Vec<f64>,
    /// `|u_{1,2}(η) − g|` per block.
    pub err_g: Vec<f64>,
    /// `|u_{1,2}(ξ + η) − (f + g)|` per block.
    pub err_sum: Vec<f64>,
    /// `max_b |λ_target − λ_achieved|`.
    pub snap_error: f64,
    pub resolution_used: usize,
    pub geometry: Vec<BlockGeometry>,
}

impl LiftDiagnostics {
    /// `max_b d_b |λ_target − λ_achieved|`, the worst per-block shift the
    /// grid snap can cause in `u_{1,2}(ξ)` or `u_{1,2}(η)`.
    pub fn weighted_snap(&self) -> f64 {
        self.geometry
            .iter()
            .map(|g| g.d * (g.lambda_target - g.lambda_achieved).abs())
            .fold(0.0, f64::max)
    }
}

/// Builds `(ξ, η) = X + 1_B (Y − X)` blockwise. Values are assigned as the
/// exact points `X` or `Y`, so every pair lies in `V` without round-off.
pub fn lift_pair(
    cu: &ConditionalUtility,
    grid: &UniformGrid,
    f: &RandomVariable,
    g: &RandomVariable,
) -> Result<(CommonotonePair, LiftDiagnostics)> {
    distortion(cu)?;
    check_grid(cu, grid)?;
    let f1 = &cu.filtration().f1;
    let n = cu.space().len();
    for v in [f, g] {
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: v.len(),
            });
        }
        f1.check_measurable(v)?;
    }
    let fb = f1.block_values(f);
    let gb = f1.block_values(g);
    let m = f.max_abs().max(g.max_abs());
    let blocks = f1.num_blocks();

    if m == 0.0 {
        let zero = RandomVariable::zeros(n);
        let pair = CommonotonePair {
            xi: zero.clone(),
            eta: zero.clone(),
            b: EventSet::empty(n),
            lambda_target: zero.clone(),
            lambda_achieved: zero,
            m,
        };
        let geometry = (0..blocks)
            .map(|block| BlockGeometry {
                block,
                x_point: GeometryPoint::new(0.0, 0.0),
                y_point: GeometryPoint::new(0.0, 0.0),
                d: 0.0,
                lambda_target: 0.0,
                lambda_achieved: 0.0,
                level: 0,
            })
            .collect();
        let diag = LiftDiagnostics {
            err_f: vec![0.0; blocks],
            err_g: vec![0.0; blocks],
            err_sum: vec![0.0; blocks],
            snap_error: 0.0,
            resolution_used: grid.resolution(),
            geometry,
        };
        return Ok((pair, diag));
    }

    let splits: Vec<GeometrySplit> = (0..blocks)
        .map(|b| geometry_xyl(GeometryPoint::new(fb[b], gb[b]), m))
        .collect::<Result<_>>()?;
    let targets: Vec<f64> = splits.iter().map(|s| s.lambda).collect();
    let lambda_target = RandomVariable::from_blocks(f1, &targets)?;
    let found = find_b(cu, grid, &lambda_target)?;

    let mut xi = vec![0.0; n];
    let mut eta = vec![0.0; n];
    for i in 0..n {
        let s = &splits[f1.block_of(i)];
        let p = if found.event.contains(i) {
            s.y_point
        } else {
            s.x_point
        };
        xi[i] = p.x;
        eta[i] = p.y;
    }
    let xi = RandomVariable::new(xi)?;
    let eta = RandomVariable::new(eta)?;

    let u_xi = f1.block_values(&conditional_eval(cu, &xi)?);
    let u_eta = f1.block_values(&conditional_eval(cu, &eta)?);
    let u_sum = f1.block_values(&conditional_eval(cu, &(&xi + &eta))?);
    let achieved = f1.block_values(&found.lambda_achieved);

    let geometry: Vec<BlockGeometry> = (0..blocks)
        .map(|b| BlockGeometry {
            block: b,
            x_point: splits[b].x_point,
            y_point: splits[b].y_point,
            d: splits[b].d,
            lambda_target: targets[b],
            lambda_achieved: achieved[b],
            level: found.levels[b],
        })
        .collect();
    let diag = LiftDiagnostics {
        err_f: (0..blocks).map(|b| (u_xi[b] - fb[b]).abs()).collect(),
        err_g: (0..blocks).map(|b| (u_eta[b] - gb[b]).abs()).collect(),
        err_sum: (0..blocks)
            .map(|b| (u_sum[b] - fb[b] - gb[b]).abs())
            .collect(),
        snap_error: (0..blocks)
            .map(|b| (targets[b] - achieved[b]).abs())
            .fold(0.0, f64::max),
        resolution_used: grid.resolution(),
        geometry,
    };
    let pair = CommonotonePair {
        xi,
        eta,
        b: found.event,
        lambda_target,
        lambda_achieved: found.lambda_achieved,
        m,
    };
    Ok((pair, diag))
}

/// Per-block residuals of the identities that hold with the achieved `λ`:
/// `u_{1,2}(ξ) = X₁ + d λ`, `u_{1,2}(η) = X₂ + d λ`, and
/// `u_{1,2}(ξ + η) = u_{1,2}(ξ) + u_{1,2}(η)`. Returns the largest residual.
pub fn achieved_identity_residual(
    cu: &ConditionalUtility,
    pair: &CommonotonePair,
    diag: &LiftDiagnostics,
) -> Result<f64> {
    let f1 = &cu.filtration().f1;
    let u_xi = f1.block_values(&conditional_eval(cu, &pair.xi)?);
    let u_eta = f1.block_values(&conditional_eval(cu, &pair.eta)?);
    let u_sum = f1.block_values(&conditional_eval(cu, &(&pair.xi + &pair.eta))?);
    let mut worst: f64 = 0.0;
    for g in &diag.geometry {
        let b = g.block;
        worst = worst
            .max((u_xi[b] - g.x_point.x - g.d * g.lambda_achieved).abs())
            .max((u_eta[b] - g.x_point.y - g.d * g.lambda_achieved).abs())
            .max((u_sum[b] - u_xi[b] - u_eta[b]).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdditivityProbe {
    /// `û(ξ + η) − û(ξ) − û(η)` with `û = u_{0,1} ∘ u_{1,2}`.
    pub lifted_defect: f64,
    /// `u_{0,1}(f + g) − u_{0,1}(f) − u_{0,1}(g)`.
    pub f1_defect: f64,
    /// Bound on `|lifted_defect − f1_defect|` from the grid snap.
    pub snap_bound: f64,
    pub commonotone: bool,
    pub u_xi: f64,
    pub u_eta: f64,
    pub u_sum: f64,
    pub pair: CommonotonePair,
    pub diagnostics: LiftDiagnostics,
}

impl AdditivityProbe {
    /// A nonzero defect on a commonotone pair: the recomposed utility is not
    /// commonotone additive.
    pub fn certifies_non_additivity(&self, tolerance: f64) -> bool {
        self.commonotone && self.lifted_defect.abs() > tolerance
    }
}

pub fn additivity_probe(
    cu: &ConditionalUtility,
    grid: &UniformGrid,
    f: &RandomVariable,
    g: &RandomVariable,
) -> Result<AdditivityProbe> {
    let (pair, diagnostics) = lift_pair(cu, grid, f, g)?;
    let u_xi = recompose(cu, &pair.xi)?;
    let u_eta = recompose(cu, &pair.eta)?;
    let u_sum = recompose(cu, &(&pair.xi + &pair.eta))?;
    let f1_defect =
        restricted_eval(cu, &(f + g))? - restricted_eval(cu, f)? - restricted_eval(cu, g)?;
    let commonotone = is_commonotone_pair(&pair.xi, &pair.eta, cu.space())?.commonotone;
    Ok(AdditivityProbe {
        lifted_defect: u_sum - u_xi - u_eta,
        f1_defect,
        snap_bound: 4.0 * diagnostics.weighted_snap() + EQUALITY_TOL,
        commonotone,
        u_xi,
        u_eta,
        u_sum,
        pair,
        diagnostics,
    })
}
