//! Computable moduli-space geometry for real quadratic rational maps.
//!
//! The crate models the normalized family a(z + 1/z) + b with critical
//! points pinned at -1 and +1, parameterized by its critical values. On
//! top of that sit:
//!
//! - [`entropy`]: topological entropy of the induced interval maps by lap
//!   counting with rigorous upper bounds, plus a Markov spectral-radius
//!   route for postcritically finite maps;
//! - [`bones`]: critical-relation residuals, Newton location of
//!   postcritically finite parameters, transversality quotients, oriented
//!   tangents and predictor-corrector tracing of the postcritical curves
//!   ("bones") with arc/loop classification;
//! - [`atlas`]: entropy contour grids over the unimodal normal-form strip,
//!   band classification and isentrope connectivity reports, with CSV /
//!   SVG / JSON emitters;
//! - [`acceptance`]: the end-to-end verification battery behind
//!   `rqmap check`.

pub mod acceptance;
pub mod atlas;
pub mod bones;
pub mod entropy;
pub mod family;
pub mod num;
pub mod report;

pub use atlas::{EntropyGrid, GridSpec};
pub use bones::{Bone, BoneKind, BonesError, BoundarySide, PCFPoint, TangentFrame, VWindow};
pub use entropy::{
    EntropyError, EntropyEstimate, EntropyMethod, IntervalModel, LapOptions, MarkovSystem,
};
pub use family::{
    CirclePoint, CriticalPoint, CriticalValuePair, FamilyError, MobiusFrame, NormalFormParams,
    QuadraticMap, RegionClass, RegionTag, SigmaPoint,
};
