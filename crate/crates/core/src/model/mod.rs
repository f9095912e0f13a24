//! Branching and immigration mechanisms, model validation, and the roots that
//! organize the rest of the crate.

mod abscissa;
pub mod fixtures;
mod law;
mod roots;
mod spec;

pub use abscissa::Abscissa;
pub use law::{sibuya_pmf, sibuya_survival, ImmigrationLaw, OffspringLaw, PMF_SUM_TOL};
pub(crate) use roots::immigration_mean;
pub use roots::{
    classify, criticality, is_explosive, root_phi_q, root_varphi, root_varphi_qbar, Criticality,
    RegimeReport, ROOT_TOL, TANGENCY_EPS,
};
pub use spec::ModelSpec;
