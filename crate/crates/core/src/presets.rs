//! Built-in noise models.
//!
//! The `melbourne` presets use single-qubit matrices measured with spectators
//! in 0 on four- and eight-qubit chains of a 16-qubit superconducting device,
//! plus the largest spectator shift and pair covariance seen on those chains.

use crate::error::{Error, Result};
use crate::geometry::RegisterGeometry;
use crate::model::{NoiseModel, NoiseModelSpec};

pub const PRESET_NAMES: [&str; 4] = ["identity", "symmetric", "melbourne-c4", "melbourne-c8"];

/// Chain order Q14, Q13, Q12, Q11.
pub const MELBOURNE_C4_BASE: [[[f64; 2]; 2]; 4] = [
    [[0.996, 0.099], [0.004, 0.901]],
    [[0.940, 0.125], [0.060, 0.875]],
    [[0.986, 0.051], [0.014, 0.949]],
    [[0.999, 0.063], [0.001, 0.937]],
];

/// Chain order Q14, Q13, Q12, Q11, Q10, Q9, Q8, Q7.
pub const MELBOURNE_C8_BASE: [[[f64; 2]; 2]; 8] = [
    [[0.998, 0.097], [0.002, 0.903]],
    [[0.940, 0.130], [0.060, 0.870]],
    [[0.988, 0.054], [0.012, 0.946]],
    [[0.999, 0.061], [0.001, 0.939]],
    [[0.970, 0.060], [0.030, 0.940]],
    [[0.987, 0.080], [0.013, 0.920]],
    [[0.692, 0.329], [0.308, 0.671]],
    [[0.997, 0.131], [0.003, 0.869]],
];

pub fn identity(n: usize) -> Result<NoiseModel> {
    NoiseModelSpec::product(RegisterGeometry::chain(n)?, vec![[[1.0, 0.0], [0.0, 1.0]]; n]).build()
}

pub fn symmetric(n: usize, eps: f64) -> Result<NoiseModel> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidArgument(format!("flip probability {eps} outside [0, 1]")));
    }
    NoiseModelSpec::product(
        RegisterGeometry::chain(n)?,
        vec![[[1.0 - eps, eps], [eps, 1.0 - eps]]; n],
    )
    .build()
}

/// Uncorrelated four-qubit chain.
pub fn melbourne_c4_product() -> Result<NoiseModel> {
    NoiseModelSpec::product(RegisterGeometry::chain(4)?, MELBOURNE_C4_BASE.to_vec()).build()
}

/// Four-qubit chain: qubit 3 reads 0 less often by 0.047 when qubit 0 is
/// prepared in 1, and qubits 1 and 2 carry a 2.0e-4 readout covariance.
pub fn melbourne_c4() -> Result<NoiseModel> {
    NoiseModelSpec::product(RegisterGeometry::chain(4)?, MELBOURNE_C4_BASE.to_vec())
        .with_shift(3, 0, 0.047)
        .with_pair_cov(1, 2, [[2.0e-4; 2]; 2])
        .with_ranges(Some(3), Some(3))
        .build()
}

pub fn melbourne_c8() -> Result<NoiseModel> {
    NoiseModelSpec::product(RegisterGeometry::chain(8)?, MELBOURNE_C8_BASE.to_vec())
        .with_shift(3, 0, 0.049)
        .with_pair_cov(2, 4, [[1.9e-4; 2]; 2])
        .with_ranges(Some(3), Some(3))
        .build()
}

/// Resolve a preset by name. `n` applies to `identity` and `symmetric`.
pub fn by_name(name: &str, n: Option<usize>, eps: Option<f64>) -> Result<NoiseModel> {
    match name {
        "identity" => identity(n.unwrap_or(4)),
        "symmetric" => symmetric(n.unwrap_or(4), eps.unwrap_or(0.01)),
        "melbourne-c4" => melbourne_c4(),
        "melbourne-c4-product" => melbourne_c4_product(),
        "melbourne-c8" => melbourne_c8(),
        other => Err(Error::InvalidArgument(format!(
            "unknown preset {other:?}; expected one of {PRESET_NAMES:?} or melbourne-c4-product"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for name in PRESET_NAMES {
            let m = by_name(name, None, None).unwrap();
            assert!(m.n() >= 4);
        }
        assert!(by_name("nope", None, None).is_err());
        assert!(symmetric(2, 1.5).is_err());
    }
}
