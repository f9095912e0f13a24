//! Reference models used across tests, benches and the CLI self-checks.

use super::{ImmigrationLaw, ModelSpec, OffspringLaw};

/// Subcritical binary branching, `p0 = 3/4`, `p2 = 1/4`, `lambda = 1`, no immigration.
pub fn m1() -> ModelSpec {
    ModelSpec::new(OffspringLaw::tabular(vec![0.75, 0.0, 0.25]), 1.0, ImmigrationLaw::None, 0.0)
        .expect("valid")
}

/// Supercritical binary branching with culling: `p0 = 1/3`, `p2 = 2/3`,
/// `lambda = 3`, `r_{-1} = 1`, `mu = 1`.
pub fn m2() -> ModelSpec {
    ModelSpec::new(
        OffspringLaw::tabular(vec![1.0 / 3.0, 0.0, 2.0 / 3.0]),
        3.0,
        ImmigrationLaw::tabular(&[(-1, 1.0)]).expect("valid"),
        1.0,
    )
    .expect("valid")
}

/// `m2` with the culling switched off.
pub fn m2_pure() -> ModelSpec {
    ModelSpec::new(
        OffspringLaw::tabular(vec![1.0 / 3.0, 0.0, 2.0 / 3.0]),
        3.0,
        ImmigrationLaw::None,
        0.0,
    )
    .expect("valid")
}

/// `m1`'s offspring law at `lambda = 2` with single immigrants at rate one.
pub fn m3() -> ModelSpec {
    ModelSpec::new(
        OffspringLaw::tabular(vec![0.75, 0.0, 0.25]),
        2.0,
        ImmigrationLaw::tabular(&[(1, 1.0)]).expect("valid"),
        1.0,
    )
    .expect("valid")
}

/// Explosive Sibuya mixture `p̃(z) = 0.2 + 0.8 (1 - (1 - z)^(1/2))`, `lambda = 1`.
pub fn m4() -> ModelSpec {
    ModelSpec::new(
        OffspringLaw::SibuyaMix { p0: 0.2, alpha: 0.5 },
        1.0,
        ImmigrationLaw::None,
        0.0,
    )
    .expect("valid")
}

/// Critical binary branching with Sibuya(1/2) immigration at rate one.
pub fn m5() -> ModelSpec {
    ModelSpec::new(
        OffspringLaw::tabular(vec![0.5, 0.0, 0.5]),
        1.0,
        ImmigrationLaw::Sibuya { alpha: 0.5 },
        1.0,
    )
    .expect("valid")
}
