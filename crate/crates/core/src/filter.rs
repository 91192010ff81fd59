//! Qubit filters: zero the prepared bits outside a qubit's (or pair's) neighborhood.

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::geometry::Neighborhood;

/// Keep `x_l` for `l = i` and `l ∈ N_i`, zero elsewhere.
pub fn filter_single(x: BitString, nbhd: &Neighborhood) -> BitString {
    x.masked(nbhd.closure_mask())
}

/// Keep `x_l` on `{i, j} ∪ N_i ∪ N_j`, zero elsewhere.
pub fn filter_pair(x: BitString, nbhd_i: &Neighborhood, nbhd_j: &Neighborhood) -> Result<BitString> {
    if nbhd_i.center == nbhd_j.center {
        return Err(Error::IndexCollision(format!(
            "pair filter needs i != j, got i = j = {}",
            nbhd_i.center
        )));
    }
    Ok(x.masked(pair_mask(nbhd_i, nbhd_j)))
}

pub fn pair_mask(nbhd_i: &Neighborhood, nbhd_j: &Neighborhood) -> usize {
    nbhd_i.closure_mask() | nbhd_j.closure_mask()
}
