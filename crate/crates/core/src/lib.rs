//! Coherent utilities on finite filtered probability spaces: conditional
//! evaluation, commonotone lifts, and time-consistency audits.

pub mod conditional;
pub mod error;
pub mod lift;
pub mod lp;
pub mod probes;
pub mod schema;
pub mod space;
pub mod utility;

pub use conditional::{
    conditional_eval, cone_decompose, recompose, tc_gap, ConditionalUtility, ConeDecomposition,
    TimeConsistencyReport, DEFAULT_TOLERANCE,
};
pub use error::{Error, Result};
pub use lift::{
    additivity_probe, find_b, geometry_xyl, lift_pair, CommonotonePair, GeometryPoint,
    LiftDiagnostics,
};
pub use space::{
    build_uniform_grid, conditional_resolution, EventSet, Filtration, Mass, OutcomeSpace,
    Partition, RandomVariable, UniformGrid,
};
pub use utility::{
    choquet_eval, core_extreme_points, CoherentUtility, DistortionFunction, ScenarioSet,
};
