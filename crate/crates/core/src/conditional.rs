//! Conditional utilities `u_{1,2}`, the recomposition `u_{0,1} ∘ u_{1,2}`,
//! and time-consistency audits.
//!
//! `u_{1,2}` is evaluated block by block: on each `F1` block the base utility
//! is applied to the restriction of the payoff under the conditional law.
//! `u_{0,1}` is the restriction of the base utility to `F1`-measurable
//! payoffs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{self, Feasibility};
use crate::space::{Filtration, Mass, OutcomeSpace, Partition, RandomVariable};
use crate::utility::{choquet_integral, core_extreme_points, is_commonotone_pair, CoherentUtility};

/// Absolute tolerance used by audits unless overridden.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalUtility {
    base: CoherentUtility,
    filtration: Filtration,
    space: OutcomeSpace,
}

impl ConditionalUtility {
    pub fn new(base: CoherentUtility, space: OutcomeSpace, filtration: Filtration) -> Result<Self> {
        if filtration.num_outcomes() != space.len() {
            return Err(Error::DimensionMismatch {
                expected: space.len(),
                got: filtration.num_outcomes(),
            });
        }
        match &base {
            CoherentUtility::ProductExample(_) => {
                return Err(Error::UnsupportedBase(
                    "product example is evaluated at the u_{0,2} level only",
                ))
            }
            CoherentUtility::Scenario(s) if s.dim() != space.len() => {
                return Err(Error::DimensionMismatch {
                    expected: space.len(),
                    got: s.dim(),
                })
            }
            _ => {}
        }
        Ok(Self {
            base,
            filtration,
            space,
        })
    }

    pub fn base(&self) -> &CoherentUtility {
        &self.base
    }

    pub fn filtration(&self) -> &Filtration {
        &self.filtration
    }

    pub fn space(&self) -> &OutcomeSpace {
        &self.space
    }

    /// `u_{0,2}(x)`.
    pub fn unconditional(&self, x: &RandomVariable) -> Result<f64> {
        self.base.eval(x, &self.space)
    }
}

/// Blockwise value plus the blocks where a scenario base had no measure
/// charging the block and fell back to the conditional law under `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalValue {
    pub value: RandomVariable,
    pub fallback_blocks: Vec<usize>,
}

/// Applies `base` on every block of `given` under the conditional law.
pub fn evaluate_given(
    base: &CoherentUtility,
    space: &OutcomeSpace,
    given: &Partition,
    x: &RandomVariable,
) -> Result<ConditionalValue> {
    if x.len() != space.len() || given.num_outcomes() != space.len() {
        return Err(Error::DimensionMismatch {
            expected: space.len(),
            got: x.len(),
        });
    }
    let probs = space.probs();
    let mut out = vec![0.0; x.len()];
    let mut fallback_blocks = Vec::new();
    for (b, block) in given.blocks().iter().enumerate() {
        let values: Vec<f64> = block.iter().map(|&i| x[i]).collect();
        let value = match base {
            CoherentUtility::Distortion(psi) => {
                let total: f64 = block.iter().map(|&i| probs[i]).sum();
                let weights: Vec<f64> = block.iter().map(|&i| probs[i] / total).collect();
                choquet_integral(&values, &weights, psi)
            }
            CoherentUtility::Scenario(s) => {
                let mut best: Option<f64> = None;
                for q in s.measures() {
                    let total: f64 = block.iter().map(|&i| q[i]).sum();
                    if total <= 0.0 {
                        continue;
                    }
                    let v = block.iter().map(|&i| q[i] * x[i]).sum::<f64>() / total;
                    best = Some(best.map_or(v, |m: f64| m.min(v)));
                }
                match best {
                    Some(v) => v,
                    None => {
                        fallback_blocks.push(b);
                        let total: f64 = block.iter().map(|&i| probs[i]).sum();
                        block.iter().map(|&i| probs[i] * x[i]).sum::<f64>() / total
                    }
                }
            }
            CoherentUtility::ProductExample(_) => {
                return Err(Error::UnsupportedBase(
                    "product example has no conditional evaluation",
                ))
            }
        };
        for &i in block {
            out[i] = value;
        }
    }
    Ok(ConditionalValue {
        value: RandomVariable::new(out)?,
        fallback_blocks,
    })
}

pub fn conditional_eval_detailed(
    cu: &ConditionalUtility,
    x: &RandomVariable,
) -> Result<ConditionalValue> {
    evaluate_given(&cu.base, &cu.space, &cu.filtration.f1, x)
}

/// `u_{1,2}(x)`, an `F1`-measurable variable.
pub fn conditional_eval(cu: &ConditionalUtility, x: &RandomVariable) -> Result<RandomVariable> {
    Ok(conditional_eval_detailed(cu, x)?.value)
}

/// `u_{0,1}(f)` for `F1`-measurable `f`.
pub fn restricted_eval(cu: &ConditionalUtility, f: &RandomVariable) -> Result<f64> {
    cu.filtration.f1.check_measurable(f)?;
    cu.base.eval(f, &cu.space)
}

/// `u_{0,1}(u_{1,2}(x))`.
pub fn recompose(cu: &ConditionalUtility, x: &RandomVariable) -> Result<f64> {
    let inner = conditional_eval(cu, x)?;
    cu.base.eval(&inner, &cu.space)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub id: usize,
    pub u02: f64,
    pub recomposed: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConeVerdict {
    pub id: usize,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeConsistencyReport {
    pub max_gap: f64,
    pub witness_id: usize,
    pub witness: RandomVariable,
    pub rows: Vec<GapRow>,
    pub cone_verdicts: Vec<ConeVerdict>,
}

impl TimeConsistencyReport {
    pub fn is_consistent(&self, tolerance: f64) -> bool {
        self.max_gap <= tolerance
    }
}

/// Per-probe gap `|u_{0,2}(x) − u_{0,1}(u_{1,2}(x))|`. The witness is the
/// first probe attaining the maximum.
pub fn tc_gap(cu: &ConditionalUtility, probes: &[RandomVariable]) -> Result<TimeConsistencyReport> {
    if probes.is_empty() {
        return Err(Error::Schema("tc_gap needs at least one probe".into()));
    }
    let mut rows = Vec::with_capacity(probes.len());
    let mut witness_id = 0;
    let mut max_gap = f64::NEG_INFINITY;
    for (id, x) in probes.iter().enumerate() {
        let u02 = cu.unconditional(x)?;
        let recomposed = recompose(cu, x)?;
        let gap = (u02 - recomposed).abs();
        if gap > max_gap {
            max_gap = gap;
            witness_id = id;
        }
        rows.push(GapRow {
            id,
            u02,
            recomposed,
            gap,
        });
    }
    Ok(TimeConsistencyReport {
        max_gap,
        witness_id,
        witness: probes[witness_id].clone(),
        rows,
        cone_verdicts: Vec::new(),
    })
}

/// Fills `report.cone_verdicts` by decomposing each probe after centering it
/// so that `u_{0,2}` vanishes.
pub fn attach_cone_verdicts(
    report: &mut TimeConsistencyReport,
    cu: &ConditionalUtility,
    probes: &[RandomVariable],
) -> Result<()> {
    let vertices = dual_vertices(cu)?;
    report.cone_verdicts = probes
        .iter()
        .enumerate()
        .map(|(id, x)| {
            let centered = x.shift(-cu.unconditional(x)?);
            Ok(ConeVerdict {
                id,
                feasible: cone_decompose_with(cu, &centered, &vertices)?.feasible,
            })
        })
        .collect::<Result<_>>()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeWitness {
    /// `F1`-measurable part with `u_{0,1}(η) ≥ 0`.
    pub eta: RandomVariable,
    /// Remainder with `u_{0,2}(ζ 1_A) ≥ 0` for every `F1` block `A`,
    /// rounded to nearest.
    pub zeta: RandomVariable,
    /// `x − η` in exact arithmetic. A generic `x` minus a blockwise constant
    /// is usually not a double, so exactness lives here.
    #[serde(with = "crate::space::mass_strings")]
    pub zeta_exact: Vec<Mass>,
}

/// Outcome of [`verify_cone_witness`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessCheck {
    pub u01_eta: f64,
    /// `min_A u_{0,2}(ζ 1_A)` over `F1` blocks.
    pub min_block_u02_zeta: f64,
    /// `η + ζ_exact = x` in rational arithmetic.
    pub exact_sum: bool,
    /// `max |η + ζ − x|` in floating point.
    pub float_residual: f64,
}

impl WitnessCheck {
    pub fn holds(&self, tolerance: f64) -> bool {
        self.u01_eta >= -tolerance && self.min_block_u02_zeta >= -tolerance && self.exact_sum
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeDecomposition {
    pub feasible: bool,
    pub witness: Option<ConeWitness>,
    /// Farkas multipliers over the constraint rows when infeasible.
    pub certificate: Option<Vec<f64>>,
    pub vertices: usize,
    pub constraints: usize,
}

/// Dual vertices of the base utility: the core extreme points of a
/// distortion, or the listed scenario measures.
pub fn dual_vertices(cu: &ConditionalUtility) -> Result<Vec<Vec<f64>>> {
    match &cu.base {
        CoherentUtility::Distortion(psi) => {
            Ok(core_extreme_points(psi, &cu.space)?.measures().to_vec())
        }
        CoherentUtility::Scenario(s) => Ok(s.measures().to_vec()),
        CoherentUtility::ProductExample(_) => {
            Err(Error::UnsupportedBase("product example has no vertex list"))
        }
    }
}

/// Linear system `A η ≤ b` over one free variable per `F1` block:
/// `Σ_b Q[A_b] η_b ≥ 0` for every vertex `Q` (so `u_{0,1}(η) ≥ 0`), and
/// `Q[A_b] η_b ≤ E_Q[x 1_{A_b}]` for every vertex charging `A_b`
/// (so `u_{0,2}((x − η) 1_{A_b}) ≥ 0`).
pub fn cone_system(
    cu: &ConditionalUtility,
    x: &RandomVariable,
    vertices: &[Vec<f64>],
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let f1 = &cu.filtration.f1;
    let nb = f1.num_blocks();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for q in vertices {
        let block_mass: Vec<f64> = f1
            .blocks()
            .iter()
            .map(|blk| blk.iter().map(|&i| q[i]).sum())
            .collect();
        a.push(block_mass.iter().map(|m| -m).collect());
        b.push(0.0);
        for (k, blk) in f1.blocks().iter().enumerate() {
            if block_mass[k] <= 0.0 {
                continue;
            }
            let mut row = vec![0.0; nb];
            row[k] = block_mass[k];
            a.push(row);
            b.push(blk.iter().map(|&i| q[i] * x[i]).sum());
        }
    }
    (a, b)
}

/// Decides whether `x = η + ζ` with `η ∈ A_{0,1}` and `ζ ∈ A_{1,2}`.
pub fn cone_decompose(cu: &ConditionalUtility, x: &RandomVariable) -> Result<ConeDecomposition> {
    cone_decompose_with(cu, x, &dual_vertices(cu)?)
}

/// [`cone_decompose`] with a precomputed vertex list.
pub fn cone_decompose_with(
    cu: &ConditionalUtility,
    x: &RandomVariable,
    vertices: &[Vec<f64>],
) -> Result<ConeDecomposition> {
    if x.len() != cu.space.len() {
        return Err(Error::DimensionMismatch {
            expected: cu.space.len(),
            got: x.len(),
        });
    }
    let u02 = cu.unconditional(x)?;
    if u02 < -DEFAULT_TOLERANCE {
        return Err(Error::NotAcceptable { value: u02 });
    }
    let (a, b) = cone_system(cu, x, vertices);
    let constraints = a.len();
    match lp::solve_feasibility_presolved(&a, &b) {
        Feasibility::Feasible(point) => {
            let eta = RandomVariable::from_blocks(&cu.filtration.f1, &point)?;
            let (zeta, zeta_exact) = remainder(x, &eta);
            Ok(ConeDecomposition {
                feasible: true,
                witness: Some(ConeWitness {
                    eta,
                    zeta,
                    zeta_exact,
                }),
                certificate: None,
                vertices: vertices.len(),
                constraints,
            })
        }
        Feasibility::Infeasible(w) => Ok(ConeDecomposition {
            feasible: false,
            witness: None,
            certificate: Some(w),
            vertices: vertices.len(),
            constraints,
        }),
    }
}

fn exact(v: f64) -> Mass {
    Mass::from_float(v).expect("finite")
}

/// `ζ = x − η`, exactly and rounded to nearest.
fn remainder(x: &RandomVariable, eta: &RandomVariable) -> (RandomVariable, Vec<Mass>) {
    let rounded = RandomVariable::new(
        x.values()
            .iter()
            .zip(eta.values())
            .map(|(a, b)| a - b)
            .collect(),
    )
    .expect("finite");
    let exact_part = x
        .values()
        .iter()
        .zip(eta.values())
        .map(|(&a, &b)| exact(a) - exact(b))
        .collect();
    (rounded, exact_part)
}

/// Re-checks a witness with the utility itself.
pub fn verify_cone_witness(
    cu: &ConditionalUtility,
    x: &RandomVariable,
    w: &ConeWitness,
) -> Result<WitnessCheck> {
    let u01_eta = restricted_eval(cu, &w.eta)?;
    let n = cu.space.len();
    let mut worst = f64::INFINITY;
    for block in cu.filtration.f1.blocks() {
        let mut vals = vec![0.0; n];
        for &i in block {
            vals[i] = w.zeta[i];
        }
        worst = worst.min(cu.unconditional(&RandomVariable::new(vals)?)?);
    }
    let exact_sum = w.zeta_exact.len() == n
        && (0..n).all(|i| exact(w.eta[i]) + &w.zeta_exact[i] == exact(x[i]));
    let float_residual = (&w.eta + &w.zeta).max_abs_diff(x);
    Ok(WitnessCheck {
        u01_eta,
        min_block_u02_zeta: worst,
        exact_sum,
        float_residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditivityCheck {
    pub additive: bool,
    /// `u_{1,2}(x+y) − u_{1,2}(x) − u_{1,2}(y)` per `F1` block.
    pub gaps: Vec<f64>,
}

/// Blockwise commonotone additivity of `u_{1,2}` on a commonotone pair.
pub fn conditional_commonotone_additivity_check(
    cu: &ConditionalUtility,
    x: &RandomVariable,
    y: &RandomVariable,
) -> Result<AdditivityCheck> {
    let check = is_commonotone_pair(x, y, &cu.space)?;
    if let Some((i, j)) = check.witness {
        return Err(Error::NotCommonotone(i, j));
    }
    let sum = conditional_eval(cu, &(x + y))?;
    let ux = conditional_eval(cu, x)?;
    let uy = conditional_eval(cu, y)?;
    let f1 = &cu.filtration.f1;
    let gaps: Vec<f64> = f1
        .blocks()
        .iter()
        .map(|block| {
            let i = block[0];
            sum[i] - ux[i] - uy[i]
        })
        .collect();
    let additive = gaps.iter().all(|g| g.abs() <= DEFAULT_TOLERANCE);
    Ok(AdditivityCheck { additive, gaps })
}

/// Checks that `levels` is a chain `G_1 ⊆ G_2 ⊆ …` of partitions of the
/// space, each refining the previous one.
pub fn check_chain(levels: &[Partition], n: usize) -> Result<()> {
    for (t, level) in levels.iter().enumerate() {
        if level.num_outcomes() != n {
            return Err(Error::InvalidChain(format!(
                "level {} covers {} outcomes, expected {n}",
                t + 1,
                level.num_outcomes()
            )));
        }
        if t > 0 && !level.refines(&levels[t - 1]) {
            return Err(Error::InvalidChain(format!(
                "level {} does not refine level {}",
                t + 1,
                t
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepGap {
    /// Intermediate time `t` (1-based), or 0 for the full backward recursion.
    pub step: usize,
    pub max_gap: f64,
    pub witness_id: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiPeriodReport {
    pub periods: usize,
    pub steps: Vec<StepGap>,
}

/// Recomposition gaps over a chain `F0 ⊆ G_1 ⊆ … ⊆ G_k ⊆ F_T` (singletons):
/// for each intermediate `t`, `|u_{0,T}(x) − u_{0,T}(u_{t,T}(x))|`, and for the
/// full backward recursion `u_{0,1} ∘ u_{1,2} ∘ … ∘ u_{k,T}`.
pub fn multiperiod_gaps(
    base: &CoherentUtility,
    space: &OutcomeSpace,
    levels: &[Partition],
    probes: &[RandomVariable],
) -> Result<MultiPeriodReport> {
    check_chain(levels, space.len())?;
    if probes.is_empty() {
        return Err(Error::Schema(
            "multiperiod audit needs at least one probe".into(),
        ));
    }
    let mut steps: Vec<StepGap> = (0..=levels.len())
        .map(|step| StepGap {
            step,
            max_gap: f64::NEG_INFINITY,
            witness_id: 0,
        })
        .collect();
    for (id, x) in probes.iter().enumerate() {
        let u0 = base.eval(x, space)?;
        let mut record = |step: usize, gap: f64| {
            if gap > steps[step].max_gap {
                steps[step].max_gap = gap;
                steps[step].witness_id = id;
            }
        };
        for (t, level) in levels.iter().enumerate() {
            let inner = evaluate_given(base, space, level, x)?.value;
            record(t + 1, (u0 - base.eval(&inner, space)?).abs());
        }
        let mut y = x.clone();
        for level in levels.iter().rev() {
            y = evaluate_given(base, space, level, &y)?.value;
        }
        record(0, (u0 - base.eval(&y, space)?).abs());
    }
    Ok(MultiPeriodReport {
        periods: levels.len() + 1,
        steps,
    })
}
