//! Exact algebra, co-flow dynamics and stability analysis for co-closed
//! G2-structures built from the 3-Sasakian coframe.

pub mod ansatz;
pub mod dynamics;
pub mod forms;
pub mod stability;
pub mod scalar;
pub mod sphere;
pub mod report;
pub mod verify;

pub use ansatz::{AnsatzError, G2Ansatz, TorsionData, TypeDecomposition};
pub use dynamics::{FlowConfig, Flavor, Sample, Termination, Trajectory};
pub use forms::{FormError, GeometryParams, Horizontal, InvariantForm, Monomial, Orientation};
pub use scalar::Scalar;
pub use sphere::{IndexBound, MultiplicityRecord};
pub use stability::{CriticalLabel, CriticalPoint, SpectralReport, Verdict, WindowVerdict};
pub use verify::{IdentityResult, VerifyReport};
