//! Register layout and Moore neighborhoods on 1D chains and 2D square lattices.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::bits::{BitString, MAX_QUBITS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GeometryRepr", into = "GeometryRepr")]
pub struct RegisterGeometry {
    dimension: usize,
    positions: Vec<Vec<i64>>,
}

#[derive(Serialize, Deserialize)]
struct GeometryRepr {
    dimension: usize,
    positions: Vec<Vec<i64>>,
}

impl TryFrom<GeometryRepr> for RegisterGeometry {
    type Error = Error;
    fn try_from(r: GeometryRepr) -> Result<Self> {
        RegisterGeometry::new(r.dimension, r.positions)
    }
}

impl From<RegisterGeometry> for GeometryRepr {
    fn from(g: RegisterGeometry) -> Self {
        GeometryRepr {
            dimension: g.dimension,
            positions: g.positions,
        }
    }
}

impl RegisterGeometry {
    pub fn new(dimension: usize, positions: Vec<Vec<i64>>) -> Result<Self> {
        if !(1..=2).contains(&dimension) {
            return Err(Error::UnsupportedGeometry(format!(
                "only 1D chains and 2D square lattices are supported, got D={dimension}"
            )));
        }
        if positions.is_empty() || positions.len() > MAX_QUBITS {
            return Err(Error::InvalidGeometry(format!(
                "register must hold 1..={MAX_QUBITS} qubits, got {}",
                positions.len()
            )));
        }
        for (q, p) in positions.iter().enumerate() {
            if p.len() != dimension {
                return Err(Error::InvalidGeometry(format!(
                    "qubit {q} has {} coordinates, expected {dimension}",
                    p.len()
                )));
            }
        }
        let distinct: BTreeSet<&Vec<i64>> = positions.iter().collect();
        if distinct.len() != positions.len() {
            return Err(Error::InvalidGeometry("qubit positions must be distinct".into()));
        }
        Ok(Self {
            dimension,
            positions,
        })
    }

    /// `n` qubits at sites `0, 1, ..., n-1`.
    pub fn chain(n: usize) -> Result<Self> {
        Self::new(1, (0..n as i64).map(|x| vec![x]).collect())
    }

    /// Row-major `rows x cols` square lattice.
    pub fn grid(rows: usize, cols: usize) -> Result<Self> {
        let positions = (0..rows as i64)
            .flat_map(|r| (0..cols as i64).map(move |c| vec![r, c]))
            .collect();
        Self::new(2, positions)
    }

    pub fn n(&self) -> usize {
        self.positions.len()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn position(&self, q: usize) -> &[i64] {
        &self.positions[q]
    }

    pub fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n() {
            Err(Error::UnknownQubit {
                index: q,
                n: self.n(),
            })
        } else {
            Ok(())
        }
    }

    pub fn chebyshev(&self, a: usize, b: usize) -> u64 {
        self.positions[a]
            .iter()
            .zip(&self.positions[b])
            .map(|(x, y)| x.abs_diff(*y))
            .max()
            .unwrap_or(0)
    }

    /// Smallest admissible size whose neighborhoods contain the whole register.
    pub fn covering_size(&self) -> usize {
        let n = self.n();
        let max_range = (0..n)
            .flat_map(|a| (0..n).map(move |b| (a, b)))
            .map(|(a, b)| self.chebyshev(a, b))
            .max()
            .unwrap_or(0);
        size_for_range(self.dimension, max_range as usize)
    }

    /// Admissible sizes up to and including the covering size.
    pub fn admissible_sizes(&self) -> Vec<usize> {
        let cover = self.covering_size();
        (0..)
            .map(|l| size_for_range(self.dimension, l))
            .take_while(|&k| k <= cover)
            .collect()
    }
}

pub fn size_for_range(dimension: usize, range: usize) -> usize {
    (2 * range + 1).pow(dimension as u32) - 1
}

/// Inverse of [`size_for_range`]; `None` when `k` is not a Moore size in this dimension.
pub fn range_for_size(dimension: usize, k: usize) -> Option<usize> {
    (0..)
        .map(|l| (l, size_for_range(dimension, l)))
        .take_while(|&(_, s)| s <= k)
        .find(|&(_, s)| s == k)
        .map(|(l, _)| l)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Neighborhood {
    pub center: usize,
    pub members: BTreeSet<usize>,
    pub k_bulk: usize,
    /// Index mask over `{center} ∪ members`.
    #[serde(skip)]
    mask: usize,
}

impl Neighborhood {
    fn new(n: usize, center: usize, members: BTreeSet<usize>, k_bulk: usize) -> Self {
        let mask = members
            .iter()
            .chain(std::iter::once(&center))
            .fold(0, |m, &q| m | BitString::mask_of(n, q));
        Self {
            center,
            members,
            k_bulk,
            mask,
        }
    }

    /// Mask selecting the center and every member.
    pub fn closure_mask(&self) -> usize {
        self.mask
    }

    pub fn contains(&self, q: usize) -> bool {
        q == self.center || self.members.contains(&q)
    }
}

/// Qubits within Chebyshev range `l` of `center`, where `k = (2l+1)^D - 1`.
/// Sites absent from a finite register are dropped, so boundary qubits get
/// fewer than `k` members.
pub fn moore_neighborhood(geometry: &RegisterGeometry, center: usize, k: usize) -> Result<Neighborhood> {
    geometry.check_qubit(center)?;
    let d = geometry.dimension();
    let range = range_for_size(d, k).ok_or_else(|| Error::InvalidNeighborhoodSize {
        k,
        dimension: d,
        admissible: (0..5).map(|l| size_for_range(d, l)).collect(),
    })? as u64;
    let members = (0..geometry.n())
        .filter(|&q| q != center && geometry.chebyshev(q, center) <= range)
        .collect();
    Ok(Neighborhood::new(geometry.n(), center, members, k))
}

/// One neighborhood per qubit, in qubit order.
pub fn all_neighborhoods(geometry: &RegisterGeometry, k: usize) -> Result<Vec<Neighborhood>> {
    (0..geometry.n())
        .map(|q| moore_neighborhood(geometry, q, k))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn members(n: &Neighborhood) -> Vec<usize> {
        n.members.iter().copied().collect()
    }

    #[test]
    fn chain_bulk_and_boundary() {
        let g = RegisterGeometry::chain(4).unwrap();
        // qubit "2" of the 1-based chain is index 1 here
        assert_eq!(members(&moore_neighborhood(&g, 1, 2).unwrap()), vec![0, 2]);
        assert_eq!(members(&moore_neighborhood(&g, 0, 2).unwrap()), vec![1]);
        assert!(moore_neighborhood(&g, 0, 0).unwrap().members.is_empty());
    }

    #[test]
    fn grid_center_has_eight_neighbors() {
        let g = RegisterGeometry::grid(5, 5).unwrap();
        let nb = moore_neighborhood(&g, 12, 8).unwrap();
        assert_eq!(members(&nb), vec![6, 7, 8, 11, 13, 16, 17, 18]);
        let corner = moore_neighborhood(&g, 0, 8).unwrap();
        assert_eq!(members(&corner), vec![1, 5, 6]);
        assert_eq!(moore_neighborhood(&g, 12, 24).unwrap().members.len(), 24);
    }

    #[test]
    fn invalid_sizes_and_indices() {
        let g = RegisterGeometry::chain(4).unwrap();
        match moore_neighborhood(&g, 0, 3) {
            Err(Error::InvalidNeighborhoodSize { admissible, .. }) => {
                assert_eq!(&admissible[..3], &[0, 2, 4])
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            moore_neighborhood(&g, 4, 2),
            Err(Error::UnknownQubit { .. })
        ));
        let grid = RegisterGeometry::grid(3, 3).unwrap();
        assert!(moore_neighborhood(&grid, 4, 2).is_err());
    }

    #[test]
    fn geometry_validation() {
        assert!(RegisterGeometry::new(3, vec![vec![0, 0, 0]]).is_err());
        assert!(RegisterGeometry::new(1, vec![vec![0], vec![0]]).is_err());
        assert!(RegisterGeometry::new(2, vec![vec![0]]).is_err());
    }

    #[test]
    fn covering_sizes() {
        assert_eq!(RegisterGeometry::chain(4).unwrap().covering_size(), 6);
        assert_eq!(RegisterGeometry::chain(8).unwrap().covering_size(), 14);
        assert_eq!(RegisterGeometry::grid(2, 2).unwrap().covering_size(), 8);
        assert_eq!(
            RegisterGeometry::chain(6).unwrap().admissible_sizes(),
            vec![0, 2, 4, 6, 8, 10]
        );
    }

    #[test]
    fn bulk_neighborhoods_have_exact_size() {
        // center of a large lattice behaves like the infinite embedding
        for k in [0, 2, 4, 6] {
            let g = RegisterGeometry::chain(15).unwrap();
            assert_eq!(moore_neighborhood(&g, 7, k).unwrap().members.len(), k);
        }
        for k in [0, 8, 24] {
            let g = RegisterGeometry::grid(5, 5).unwrap();
            assert_eq!(moore_neighborhood(&g, 12, k).unwrap().members.len(), k);
        }
        let g = RegisterGeometry::chain(6).unwrap();
        for q in 0..6 {
            assert!(moore_neighborhood(&g, q, 4).unwrap().members.len() <= 4);
        }
    }
}
