//! Finite filtered probability spaces.
//!
//! Outcomes carry exact rational masses. Sigma algebras are represented by
//! their atom partitions, and the two-period filtration is the chain
//! `F0 ⊆ F1 ⊆ F2` with `F0` trivial and `F2` the singletons.
//!
//! The constructions in this module (equal conditional-mass splits, the
//! uniform grid `U`, the sets `{U ≤ h}`) are done in exact arithmetic, so
//! conditional masses match their targets with zero tolerance.

use std::fmt;
use std::ops::{Add, Index, Mul, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact probability mass.
pub type Mass = BigRational;

pub(crate) fn mass_to_f64(m: &Mass) -> f64 {
    m.to_f64().unwrap_or(f64::NAN)
}

pub(crate) fn ratio(num: i64, den: i64) -> Mass {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// One problem found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    ZeroDenominator {
        index: usize,
    },
    NonPositiveMass {
        index: usize,
        mass: String,
    },
    MassSum {
        sum: String,
        denominator: String,
    },
    EmptyBlock {
        block: usize,
    },
    IndexOutOfRange {
        block: usize,
        index: usize,
    },
    Overlap {
        index: usize,
        first_block: usize,
        second_block: usize,
    },
    Uncovered {
        index: usize,
    },
    EmptySpace,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ZeroDenominator { index } => write!(f, "mass {index}: zero denominator"),
            Violation::NonPositiveMass { index, mass } => {
                write!(f, "mass {index}: {mass} is not positive")
            }
            Violation::MassSum { sum, denominator } => {
                write!(
                    f,
                    "mass sum {sum} (common denominator {denominator}), expected 1"
                )
            }
            Violation::EmptyBlock { block } => write!(f, "f1 block {block} is empty"),
            Violation::IndexOutOfRange { block, index } => {
                write!(f, "f1 block {block}: outcome index {index} out of range")
            }
            Violation::Overlap {
                index,
                first_block,
                second_block,
            } => write!(
                f,
                "outcome {index} appears in f1 blocks {first_block} and {second_block}"
            ),
            Violation::Uncovered { index } => write!(f, "outcome {index} is in no f1 block"),
            Violation::EmptySpace => write!(f, "space has no outcomes"),
        }
    }
}

/// Result of [`validate`]: every violated invariant, with indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub outcomes: usize,
    pub blocks: usize,
    pub valid: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(
                f,
                "valid ({} outcomes, {} f1 blocks)",
                self.outcomes, self.blocks
            );
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Checks raw masses `(numerator, denominator)` and `F1` blocks against the
/// space and filtration invariants. Problems are collected, never panicked on.
///
/// `F2` is the singleton partition, so refinement of `F1` by `F2` holds by
/// construction; `F1` refines the trivial `F0` as soon as it covers the space.
pub fn validate(masses: &[(i64, i64)], f1_blocks: &[Vec<usize>]) -> ValidationReport {
    let mut violations = Vec::new();
    let n = masses.len();
    if n == 0 {
        violations.push(Violation::EmptySpace);
    }

    let mut sum = Mass::zero();
    let mut common = BigInt::one();
    let mut sum_ok = true;
    for (index, &(num, den)) in masses.iter().enumerate() {
        if den == 0 {
            violations.push(Violation::ZeroDenominator { index });
            sum_ok = false;
            continue;
        }
        let m = ratio(num, den);
        if !m.is_positive() {
            violations.push(Violation::NonPositiveMass {
                index,
                mass: m.to_string(),
            });
        }
        common = common.lcm(m.denom());
        sum += m;
    }
    if sum_ok && n > 0 && !sum.is_one() {
        violations.push(Violation::MassSum {
            sum: sum.to_string(),
            denominator: common.to_string(),
        });
    }

    violations.extend(partition_violations(n, f1_blocks));
    ValidationReport {
        outcomes: n,
        blocks: f1_blocks.len(),
        valid: violations.is_empty(),
        violations,
    }
}

fn partition_violations(n: usize, blocks: &[Vec<usize>]) -> Vec<Violation> {
    let mut violations = Vec::new();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    for (b, block) in blocks.iter().enumerate() {
        if block.is_empty() {
            violations.push(Violation::EmptyBlock { block: b });
        }
        for &i in block {
            if i >= n {
                violations.push(Violation::IndexOutOfRange { block: b, index: i });
                continue;
            }
            match owner[i] {
                Some(first) => violations.push(Violation::Overlap {
                    index: i,
                    first_block: first,
                    second_block: b,
                }),
                None => owner[i] = Some(b),
            }
        }
    }
    for (i, o) in owner.iter().enumerate() {
        if o.is_none() {
            violations.push(Violation::Uncovered { index: i });
        }
    }
    violations
}

/// Finite sample space with strictly positive exact masses summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeSpace {
    labels: Vec<String>,
    masses: Vec<Mass>,
    probs: Vec<f64>,
}

impl OutcomeSpace {
    pub fn new(labels: Vec<String>, masses: Vec<Mass>) -> Result<Self> {
        if labels.len() != masses.len() {
            return Err(Error::DimensionMismatch {
                expected: masses.len(),
                got: labels.len(),
            });
        }
        let mut violations = Vec::new();
        if masses.is_empty() {
            violations.push(Violation::EmptySpace);
        }
        let mut sum = Mass::zero();
        let mut common = BigInt::one();
        for (index, m) in masses.iter().enumerate() {
            if !m.is_positive() {
                violations.push(Violation::NonPositiveMass {
                    index,
                    mass: m.to_string(),
                });
            }
            common = common.lcm(m.denom());
            sum += m;
        }
        if !masses.is_empty() && !sum.is_one() {
            violations.push(Violation::MassSum {
                sum: sum.to_string(),
                denominator: common.to_string(),
            });
        }
        if !violations.is_empty() {
            return Err(Error::InvalidSpace(ValidationReport {
                outcomes: masses.len(),
                blocks: 0,
                valid: false,
                violations,
            }));
        }
        let probs = masses.iter().map(mass_to_f64).collect();
        Ok(Self {
            labels,
            masses,
            probs,
        })
    }

    /// Space from `(numerator, denominator)` pairs, labelled `w0, w1, …`.
    pub fn from_fractions(masses: &[(i64, i64)]) -> Result<Self> {
        let report = validate(masses, &[(0..masses.len()).collect()]);
        if !report.is_valid() {
            return Err(Error::InvalidSpace(report));
        }
        let masses: Vec<Mass> = masses.iter().map(|&(n, d)| ratio(n, d)).collect();
        Self::new(default_labels(masses.len()), masses)
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Self::new(Vec::new(), Vec::new());
        }
        let m = ratio(1, n as i64);
        Self::new(default_labels(n), vec![m; n])
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn mass(&self, i: usize) -> &Mass {
        &self.masses[i]
    }

    pub fn masses(&self) -> &[Mass] {
        &self.masses
    }

    /// Masses as floating point, in outcome order.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn mass_of(&self, indices: &[usize]) -> Mass {
        indices
            .iter()
            .fold(Mass::zero(), |acc, &i| acc + &self.masses[i])
    }

    pub fn event_mass(&self, event: &EventSet) -> Mass {
        event
            .members()
            .fold(Mass::zero(), |acc, i| acc + &self.masses[i])
    }

    pub fn expectation(&self, x: &RandomVariable) -> f64 {
        x.values().iter().zip(&self.probs).map(|(v, p)| v * p).sum()
    }

    pub fn is_uniform(&self) -> bool {
        self.masses.windows(2).all(|w| w[0] == w[1])
    }
}

fn default_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("w{i}")).collect()
}

/// Disjoint nonempty blocks covering `0..n`. Block order and the order of
/// outcomes inside each block are kept as given.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
    block_of: Vec<usize>,
}

impl Partition {
    pub fn new(n: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let violations = partition_violations(n, &blocks);
        if !violations.is_empty() {
            return Err(Error::InvalidSpace(ValidationReport {
                outcomes: n,
                blocks: blocks.len(),
                valid: false,
                violations,
            }));
        }
        let mut block_of = vec![0; n];
        for (b, block) in blocks.iter().enumerate() {
            for &i in block {
                block_of[i] = b;
            }
        }
        Ok(Self { blocks, block_of })
    }

    pub fn trivial(n: usize) -> Self {
        Self {
            blocks: vec![(0..n).collect()],
            block_of: vec![0; n],
        }
    }

    pub fn singletons(n: usize) -> Self {
        Self {
            blocks: (0..n).map(|i| vec![i]).collect(),
            block_of: (0..n).collect(),
        }
    }

    /// `count` contiguous blocks of equal size; `n` must be a multiple of `count`.
    pub fn contiguous(n: usize, count: usize) -> Result<Self> {
        if count == 0 || !n.is_multiple_of(count) {
            return Err(Error::Schema(format!(
                "{n} outcomes cannot form {count} equal contiguous blocks"
            )));
        }
        let size = n / count;
        Self::new(
            n,
            (0..count)
                .map(|b| (b * size..(b + 1) * size).collect())
                .collect(),
        )
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block(&self, b: usize) -> &[usize] {
        &self.blocks[b]
    }

    pub fn block_of(&self, outcome: usize) -> usize {
        self.block_of[outcome]
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn num_outcomes(&self) -> usize {
        self.block_of.len()
    }

    /// True when every block of `self` lies inside one block of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        self.num_outcomes() == coarser.num_outcomes()
            && self.blocks.iter().all(|block| {
                let owner = coarser.block_of(block[0]);
                block.iter().all(|&i| coarser.block_of(i) == owner)
            })
    }

    /// Checks that `x` is constant on every block; returns the first offending block.
    pub fn check_measurable(&self, x: &RandomVariable) -> Result<()> {
        if x.len() != self.num_outcomes() {
            return Err(Error::DimensionMismatch {
                expected: self.num_outcomes(),
                got: x.len(),
            });
        }
        for (b, block) in self.blocks.iter().enumerate() {
            let first = x[block[0]];
            if block.iter().any(|&i| x[i] != first) {
                return Err(Error::NotMeasurable { block: b });
            }
        }
        Ok(())
    }

    pub fn is_measurable(&self, x: &RandomVariable) -> bool {
        self.check_measurable(x).is_ok()
    }

    /// Value of a measurable `x` on each block.
    pub fn block_values(&self, x: &RandomVariable) -> Vec<f64> {
        self.blocks.iter().map(|b| x[b[0]]).collect()
    }
}

/// The two-period filtration `F0 ⊆ F1 ⊆ F2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Filtration {
    pub f0: Partition,
    pub f1: Partition,
    pub f2: Partition,
}

impl Filtration {
    pub fn new(f1: Partition) -> Self {
        let n = f1.num_outcomes();
        Self {
            f0: Partition::trivial(n),
            f1,
            f2: Partition::singletons(n),
        }
    }

    pub fn from_blocks(n: usize, f1_blocks: Vec<Vec<usize>>) -> Result<Self> {
        Ok(Self::new(Partition::new(n, f1_blocks)?))
    }

    pub fn num_outcomes(&self) -> usize {
        self.f1.num_outcomes()
    }
}

/// Bounded payoff: one finite real per outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<f64>", try_from = "Vec<f64>")]
pub struct RandomVariable(Vec<f64>);

impl From<RandomVariable> for Vec<f64> {
    fn from(x: RandomVariable) -> Self {
        x.0
    }
}

impl TryFrom<Vec<f64>> for RandomVariable {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl RandomVariable {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self(values))
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self(vec![c; n])
    }

    pub fn zeros(n: usize) -> Self {
        Self::constant(n, 0.0)
    }

    pub fn indicator(event: &EventSet) -> Self {
        Self(event.0.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())
    }

    /// Variable taking `values[b]` on block `b` of `partition`.
    pub fn from_blocks(partition: &Partition, values: &[f64]) -> Result<Self> {
        if values.len() != partition.num_blocks() {
            return Err(Error::DimensionMismatch {
                expected: partition.num_blocks(),
                got: values.len(),
            });
        }
        let mut out = vec![0.0; partition.num_outcomes()];
        for (block, &v) in partition.blocks().iter().zip(values) {
            for &i in block {
                out[i] = v;
            }
        }
        Self::new(out)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, lambda: f64) -> Self {
        Self(self.0.iter().map(|v| v * lambda).collect())
    }

    pub fn shift(&self, c: f64) -> Self {
        Self(self.0.iter().map(|v| v + c).collect())
    }

    /// Pointwise product, e.g. `x · 1_A` or `λ · x` for a random `λ`.
    pub fn times(&self, other: &RandomVariable) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a * b).collect())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self(self.0.iter().map(|&v| f(v)).collect())
    }

    pub fn max_abs_diff(&self, other: &RandomVariable) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl Index<usize> for RandomVariable {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Add for &RandomVariable {
    type Output = RandomVariable;
    fn add(self, rhs: Self) -> RandomVariable {
        assert_eq!(self.len(), rhs.len(), "length mismatch");
        RandomVariable(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &RandomVariable {
    type Output = RandomVariable;
    fn sub(self, rhs: Self) -> RandomVariable {
        assert_eq!(self.len(), rhs.len(), "length mismatch");
        RandomVariable(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Mul<f64> for &RandomVariable {
    type Output = RandomVariable;
    fn mul(self, rhs: f64) -> RandomVariable {
        self.scale(rhs)
    }
}

/// Event as a membership mask over outcomes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct EventSet(Vec<bool>);

impl EventSet {
    pub fn new(member: Vec<bool>) -> Self {
        Self(member)
    }

    pub fn empty(n: usize) -> Self {
        Self(vec![false; n])
    }

    pub fn full(n: usize) -> Self {
        Self(vec![true; n])
    }

    pub fn from_indices(n: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut member = vec![false; n];
        for i in indices {
            member[i] = true;
        }
        Self(member)
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| i)
    }

    pub fn mask(&self) -> &[bool] {
        &self.0
    }

    pub fn is_subset(&self, other: &EventSet) -> bool {
        self.0.iter().zip(&other.0).all(|(&a, &b)| !a || b)
    }

    pub fn intersection(&self, other: &EventSet) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(&a, &b)| a && b).collect())
    }

    pub fn union(&self, other: &EventSet) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(&a, &b)| a || b).collect())
    }

    pub fn complement(&self) -> Self {
        Self(self.0.iter().map(|&a| !a).collect())
    }
}

/// `E[x | given]` computed block by block: `Σ mass·x / Σ mass`.
pub fn conditional_expectation(
    x: &RandomVariable,
    given: &Partition,
    space: &OutcomeSpace,
) -> RandomVariable {
    let probs = space.probs();
    let mut out = vec![0.0; x.len()];
    for block in given.blocks() {
        let total: f64 = block.iter().map(|&i| probs[i]).sum();
        let value = block.iter().map(|&i| probs[i] * x[i]).sum::<f64>() / total;
        for &i in block {
            out[i] = value;
        }
    }
    RandomVariable(out)
}

/// Exact conditional mass `E[1_B | given]`, one value per block of `given`.
pub fn conditional_mass(event: &EventSet, given: &Partition, space: &OutcomeSpace) -> Vec<Mass> {
    given
        .blocks()
        .iter()
        .map(|block| {
            let total = space.mass_of(block);
            let inside = block
                .iter()
                .filter(|&&i| event.contains(i))
                .fold(Mass::zero(), |acc, &i| acc + space.mass(i));
            inside / total
        })
        .collect()
}

/// Splits `block` into `groups` subsets of equal mass, assigning outcomes in
/// block order to the first group with room and backtracking when stuck.
/// Returns the group index of each outcome (in block order).
pub fn equal_split(space: &OutcomeSpace, block: &[usize], groups: usize) -> Option<Vec<usize>> {
    if groups == 0 || groups > block.len() {
        return None;
    }
    let capacity = space.mass_of(block) / Mass::from_integer(BigInt::from(groups));
    if block.iter().any(|&i| space.mass(i) > &capacity) {
        return None;
    }
    let mut remaining = vec![capacity.clone(); groups];
    let mut assignment = vec![0; block.len()];

    fn assign(
        pos: usize,
        block: &[usize],
        space: &OutcomeSpace,
        capacity: &Mass,
        remaining: &mut [Mass],
        assignment: &mut [usize],
    ) -> bool {
        if pos == block.len() {
            return remaining.iter().all(|r| r.is_zero());
        }
        let m = space.mass(block[pos]);
        let mut tried_empty = false;
        for g in 0..remaining.len() {
            if &remaining[g] < m {
                continue;
            }
            // untouched groups are interchangeable: try only the first one
            if &remaining[g] == capacity {
                if tried_empty {
                    continue;
                }
                tried_empty = true;
            }
            remaining[g] -= m;
            assignment[pos] = g;
            if assign(pos + 1, block, space, capacity, remaining, assignment) {
                return true;
            }
            remaining[g] += m;
        }
        false
    }

    if assign(0, block, space, &capacity, &mut remaining, &mut assignment) {
        Some(assignment)
    } else {
        None
    }
}

/// Largest `n ≥ 2` such that every `F1` block splits into `n` events of
/// conditional mass `1/n`; zero when no such `n` exists.
pub fn conditional_resolution(space: &OutcomeSpace, filtration: &Filtration) -> usize {
    let max_n = filtration
        .f1
        .blocks()
        .iter()
        .map(Vec::len)
        .min()
        .unwrap_or(0);
    (2..=max_n)
        .rev()
        .find(|&n| {
            filtration
                .f1
                .blocks()
                .iter()
                .all(|block| equal_split(space, block, n).is_some())
        })
        .unwrap_or(0)
}

/// Discrete uniform variable `U` on `{1/n, …, 1}` independent of `F1`,
/// together with its level sets `B_{k/n} = {U ≤ k/n}` for `k = 0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformGrid {
    resolution: usize,
    ranks: Vec<usize>,
    values: RandomVariable,
    level_sets: Vec<EventSet>,
}

impl UniformGrid {
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Rank `k ∈ 1..=n` with `U = k/n` at each outcome.
    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn values(&self) -> &RandomVariable {
        &self.values
    }

    /// `B_{k/n}`, for `k ∈ 0..=n`.
    pub fn level_set(&self, k: usize) -> &EventSet {
        &self.level_sets[k]
    }

    pub fn level_sets(&self) -> &[EventSet] {
        &self.level_sets
    }

    /// Atoms of `σ(U)`: the nonempty sets `{U = k/n}`.
    pub fn value_partition(&self) -> Partition {
        let blocks: Vec<Vec<usize>> = (1..=self.resolution)
            .map(|k| {
                (0..self.ranks.len())
                    .filter(|&i| self.ranks[i] == k)
                    .collect::<Vec<_>>()
            })
            .filter(|b| !b.is_empty())
            .collect();
        Partition::new(self.ranks.len(), blocks).expect("grid ranks cover every outcome")
    }
}

pub fn build_uniform_grid(
    space: &OutcomeSpace,
    filtration: &Filtration,
    n: usize,
) -> Result<UniformGrid> {
    let size = space.len();
    if filtration.num_outcomes() != size {
        return Err(Error::DimensionMismatch {
            expected: size,
            got: filtration.num_outcomes(),
        });
    }
    if n == 0 {
        return Err(Error::ResolutionUnavailable {
            resolution: 0,
            block: 0,
        });
    }
    let mut ranks = vec![0; size];
    for (b, block) in filtration.f1.blocks().iter().enumerate() {
        let groups = equal_split(space, block, n).ok_or(Error::ResolutionUnavailable {
            resolution: n,
            block: b,
        })?;
        for (&i, g) in block.iter().zip(groups) {
            ranks[i] = g + 1;
        }
    }
    let values = RandomVariable(ranks.iter().map(|&r| r as f64 / n as f64).collect());
    let level_sets = (0..=n)
        .map(|k| EventSet(ranks.iter().map(|&r| r <= k).collect()))
        .collect();
    Ok(UniformGrid {
        resolution: n,
        ranks,
        values,
        level_sets,
    })
}

/// `{U ≤ h}` together with the grid levels it used and the exact conditional
/// masses it achieves. `snapped` is set when some `h` value was off-grid and
/// was rounded down.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalSet {
    pub event: EventSet,
    pub levels: Vec<usize>,
    pub achieved: Vec<Mass>,
    pub snapped: bool,
}

const GRID_SNAP_TOL: f64 = 1e-9;

/// `{U ≤ k_b/n}` on each `F1` block `b`.
pub fn set_for_levels(
    filtration: &Filtration,
    grid: &UniformGrid,
    levels: &[usize],
) -> Result<EventSet> {
    let f1 = &filtration.f1;
    if levels.len() != f1.num_blocks() {
        return Err(Error::DimensionMismatch {
            expected: f1.num_blocks(),
            got: levels.len(),
        });
    }
    if grid.ranks.len() != f1.num_outcomes() {
        return Err(Error::DimensionMismatch {
            expected: f1.num_outcomes(),
            got: grid.ranks.len(),
        });
    }
    let mut member = vec![false; grid.ranks.len()];
    for (b, block) in f1.blocks().iter().enumerate() {
        let k = levels[b];
        if k > grid.resolution {
            return Err(Error::OutOfRange {
                index: b,
                value: k as f64,
                lo: 0.0,
                hi: grid.resolution as f64,
            });
        }
        for &i in block {
            member[i] = grid.ranks[i] <= k;
        }
    }
    Ok(EventSet(member))
}

/// `B_h = {U ≤ h}` for an `F1`-measurable `h` with values in `[0, 1]`.
/// Off-grid values snap down to the largest `k/n ≤ h`.
pub fn set_with_conditional_mass(
    space: &OutcomeSpace,
    filtration: &Filtration,
    grid: &UniformGrid,
    h: &RandomVariable,
) -> Result<ConditionalSet> {
    filtration.f1.check_measurable(h)?;
    let n = grid.resolution as f64;
    let mut snapped = false;
    let mut levels = Vec::with_capacity(filtration.f1.num_blocks());
    for (b, &v) in filtration.f1.block_values(h).iter().enumerate() {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::OutOfRange {
                index: filtration.f1.block(b)[0],
                value: v,
                lo: 0.0,
                hi: 1.0,
            });
        }
        let scaled = v * n;
        let nearest = scaled.round();
        let k = if (scaled - nearest).abs() <= GRID_SNAP_TOL {
            nearest
        } else {
            snapped = true;
            scaled.floor()
        };
        levels.push(k as usize);
    }
    let event = set_for_levels(filtration, grid, &levels)?;
    let achieved = conditional_mass(&event, &filtration.f1, space);
    Ok(ConditionalSet {
        event,
        levels,
        achieved,
        snapped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndependenceReport {
    pub independent: bool,
    #[serde(serialize_with = "serialize_mass")]
    pub max_deviation: Mass,
}

/// Serde helpers writing exact masses as `"p/q"` strings.
pub(crate) mod mass_strings {
    use std::str::FromStr;

    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    use super::Mass;

    pub fn serialize<S: Serializer>(v: &[Mass], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|m| m.to_string()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Mass>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|t| Mass::from_str(t).map_err(D::Error::custom))
            .collect()
    }
}

fn serialize_mass<S: serde::Serializer>(m: &Mass, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&m.to_string())
}

/// Exact check of `P[A∩B] = P[A]·P[B]` over all block pairs.
pub fn independence_check(
    a: &Partition,
    b: &Partition,
    space: &OutcomeSpace,
) -> IndependenceReport {
    let mut max_deviation = Mass::zero();
    for block_a in a.blocks() {
        let pa = space.mass_of(block_a);
        for block_b in b.blocks() {
            let pb = space.mass_of(block_b);
            let joint = block_a
                .iter()
                .filter(|&&i| b.block_of(i) == b.block_of(block_b[0]))
                .fold(Mass::zero(), |acc, &i| acc + space.mass(i));
            let dev = (joint - &pa * &pb).abs();
            if dev > max_deviation {
                max_deviation = dev;
            }
        }
    }
    IndependenceReport {
        independent: max_deviation.is_zero(),
        max_deviation,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four() -> (OutcomeSpace, Filtration) {
        let space = OutcomeSpace::uniform(4).unwrap();
        let filt = Filtration::from_blocks(4, vec![vec![0, 1], vec![2, 3]]).unwrap();
        (space, filt)
    }

    #[test]
    fn validate_accepts_canonical_space() {
        let report = validate(&[(1, 4); 4], &[vec![0, 1], vec![2, 3]]);
        assert!(report.is_valid(), "{report}");
    }

    #[test]
    fn validate_reports_mass_sum() {
        let report = validate(&[(1, 2); 3], &[vec![0, 1, 2]]);
        assert!(!report.is_valid());
        assert_eq!(
            report.violations,
            vec![Violation::MassSum {
                sum: "3/2".into(),
                denominator: "2".into()
            }]
        );
        assert!(report.to_string().contains("mass sum 3/2"));
    }

    #[test]
    fn validate_reports_structural_problems() {
        let report = validate(&[(0, 1), (1, 0), (1, 1)], &[vec![0, 0], vec![], vec![5]]);
        let v = &report.violations;
        assert!(v.contains(&Violation::NonPositiveMass {
            index: 0,
            mass: "0".into()
        }));
        assert!(v.contains(&Violation::ZeroDenominator { index: 1 }));
        assert!(v.contains(&Violation::Overlap {
            index: 0,
            first_block: 0,
            second_block: 0
        }));
        assert!(v.contains(&Violation::EmptyBlock { block: 1 }));
        assert!(v.contains(&Violation::IndexOutOfRange { block: 2, index: 5 }));
        assert!(v.contains(&Violation::Uncovered { index: 1 }));
    }

    #[test]
    fn filtration_refinement_holds() {
        let (_, filt) = four();
        assert!(filt.f2.refines(&filt.f1));
        assert!(filt.f1.refines(&filt.f0));
        assert!(!filt.f0.refines(&filt.f1));
        assert_eq!(filt.f0.num_blocks(), 1);
    }

    #[test]
    fn conditional_expectation_blockwise() {
        let (space, filt) = four();
        let x = RandomVariable::new(vec![0.0, 1.0, 2.0, 4.0]).unwrap();
        let e = conditional_expectation(&x, &filt.f1, &space);
        assert_eq!(e.values(), &[0.5, 0.5, 3.0, 3.0]);
        assert!(filt.f1.is_measurable(&e));
        let c = conditional_expectation(&RandomVariable::constant(4, 2.5), &filt.f1, &space);
        assert_eq!(c.values(), &[2.5; 4]);
        let t = conditional_expectation(&x, &filt.f0, &space);
        assert_eq!(t.values(), &[1.75; 4]);
    }

    #[test]
    fn resolution_examples() {
        let space = OutcomeSpace::uniform(8).unwrap();
        let filt = Filtration::from_blocks(8, vec![(0..4).collect(), (4..8).collect()]).unwrap();
        assert_eq!(conditional_resolution(&space, &filt), 4);

        let filt = Filtration::new(Partition::singletons(8));
        assert_eq!(conditional_resolution(&space, &filt), 0);

        let space =
            OutcomeSpace::from_fractions(&[(1, 6), (1, 6), (1, 6), (1, 6), (1, 3)]).unwrap();
        let filt = Filtration::from_blocks(5, vec![vec![0, 1, 2], vec![3, 4]]).unwrap();
        assert_eq!(conditional_resolution(&space, &filt), 0);
        // the first block alone splits three ways
        assert!(equal_split(&space, &[0, 1, 2], 3).is_some());
        assert!(equal_split(&space, &[3, 4], 2).is_none());
    }

    #[test]
    fn resolution_needs_backtracking() {
        // masses 2,1,2,3 (/8): plain first-fit strands the 3
        let space = OutcomeSpace::from_fractions(&[(2, 8), (1, 8), (2, 8), (3, 8)]).unwrap();
        assert_eq!(
            equal_split(&space, &[0, 1, 2, 3], 2),
            Some(vec![0, 1, 0, 1])
        );
        let filt = Filtration::from_blocks(4, vec![vec![0, 1, 2, 3]]).unwrap();
        assert_eq!(conditional_resolution(&space, &filt), 2);
    }

    #[test]
    fn grid_on_four_outcomes() {
        let (space, filt) = four();
        let grid = build_uniform_grid(&space, &filt, 2).unwrap();
        assert_eq!(grid.values().values(), &[0.5, 1.0, 0.5, 1.0]);
        assert_eq!(grid.level_set(1), &EventSet::from_indices(4, [0, 2]));
        assert_eq!(
            conditional_mass(grid.level_set(1), &filt.f1, &space),
            vec![ratio(1, 2); 2]
        );
        let report = independence_check(&grid.value_partition(), &filt.f1, &space);
        assert!(report.independent);
        assert!(report.max_deviation.is_zero());
    }

    #[test]
    fn grid_resolution_one() {
        let (space, filt) = four();
        let grid = build_uniform_grid(&space, &filt, 1).unwrap();
        assert_eq!(grid.values().values(), &[1.0; 4]);
        assert_eq!(grid.level_set(1), &EventSet::full(4));
        assert_eq!(grid.level_set(0), &EventSet::empty(4));
    }

    #[test]
    fn grid_unavailable_names_block() {
        let space =
            OutcomeSpace::from_fractions(&[(1, 4), (1, 4), (1, 4), (1, 8), (1, 8)]).unwrap();
        let filt = Filtration::from_blocks(5, vec![vec![0, 1], vec![2, 3, 4]]).unwrap();
        assert!(build_uniform_grid(&space, &filt, 2).is_ok());
        match build_uniform_grid(&space, &filt, 3) {
            Err(Error::ResolutionUnavailable {
                resolution: 3,
                block: 0,
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn set_with_mass_examples() {
        let (space, filt) = four();
        let grid = build_uniform_grid(&space, &filt, 2).unwrap();

        let half = RandomVariable::constant(4, 0.5);
        let set = set_with_conditional_mass(&space, &filt, &grid, &half).unwrap();
        assert_eq!(set.event, EventSet::from_indices(4, [0, 2]));
        assert_eq!(set.achieved, vec![ratio(1, 2); 2]);
        assert!(!set.snapped);

        let zero = RandomVariable::zeros(4);
        let set = set_with_conditional_mass(&space, &filt, &grid, &zero).unwrap();
        assert_eq!(set.event, EventSet::empty(4));

        let h = RandomVariable::new(vec![0.5, 0.5, 1.0, 1.0]).unwrap();
        let set = set_with_conditional_mass(&space, &filt, &grid, &h).unwrap();
        assert_eq!(set.event, EventSet::from_indices(4, [0, 2, 3]));
        assert_eq!(set.achieved, vec![ratio(1, 2), ratio(1, 1)]);
    }

    #[test]
    fn set_with_mass_snaps_down() {
        let (space, filt) = four();
        let grid = build_uniform_grid(&space, &filt, 2).unwrap();
        let h = RandomVariable::new(vec![0.7, 0.7, 0.3, 0.3]).unwrap();
        let set = set_with_conditional_mass(&space, &filt, &grid, &h).unwrap();
        assert!(set.snapped);
        assert_eq!(set.levels, vec![1, 0]);
        assert_eq!(set.achieved, vec![ratio(1, 2), ratio(0, 1)]);
    }

    #[test]
    fn set_with_mass_rejects_bad_h() {
        let (space, filt) = four();
        let grid = build_uniform_grid(&space, &filt, 2).unwrap();
        let h = RandomVariable::new(vec![0.5, 1.0, 0.5, 0.5]).unwrap();
        assert!(matches!(
            set_with_conditional_mass(&space, &filt, &grid, &h),
            Err(Error::NotMeasurable { block: 0 })
        ));
        let h = RandomVariable::constant(4, 1.5);
        assert!(matches!(
            set_with_conditional_mass(&space, &filt, &grid, &h),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn independence_examples() {
        let (space, filt) = four();
        let self_dep = independence_check(&filt.f1, &filt.f1, &space);
        assert!(!self_dep.independent);
        assert_eq!(self_dep.max_deviation, ratio(1, 4));
        assert!(independence_check(&filt.f0, &filt.f1, &space).independent);
        assert!(independence_check(&filt.f2, &filt.f0, &space).independent);
    }

    #[test]
    fn random_variable_rejects_nan() {
        assert!(matches!(
            RandomVariable::new(vec![0.0, f64::NAN]),
            Err(Error::NonFinite { index: 1 })
        ));
    }
}
