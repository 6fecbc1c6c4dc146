//! Blender laboratory: horseshoe bases, product models, cone fields,
//! covering and strip-intersection checks, the `F_μ` family and robustness sweeps.

pub mod bump;
pub mod cones;
pub mod fmu;
pub mod horseshoe;
pub mod model;
pub mod strips;
pub mod sweep;

pub use bump::{hamiltonian_bump_translation, BumpTranslation};
pub use cones::{verify_cone_invariance, Cone, ConeField, ConeKind, ConeReport, ConeWitness};
pub use fmu::{almost_minimality_experiment, build_f_mu, check_weak_power, desk_model, itinerary_search, AlmostMinimalityReport, Block, BlockGroup, BlockSchedule, ConjugateRotation, DeskModel, DeskParams, Direction, FMu, FiberRole, SampleOutcome};
pub use horseshoe::HorseshoeBase;
pub use model::{build_geometric_model, GeometricBlenderModel, Side};
pub use strips::{
    default_anchor, sample_strips, verify_covering_geometric, verify_double_blender, verify_strip_intersection, verify_strips,
    DoubleBlenderReport, GeometricCoveringReport, Route, SideCovering, Strip, StripBatch, StripKind, StripOutcome, StripReport,
};
pub use sweep::{robustness_sweep, SweepConfig, SweepRow, SweepTable, Verifier};
