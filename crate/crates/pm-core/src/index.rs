//! Scalar/vector index translations on finite grids, checkerboard pattern
//! addressing and process neighborhood lookup.
//!
//! Cells, processes, patterns and compartments are all named by 1-based
//! scalar indices. A grid with per-axis extents `I = (I_1, ..., I_d)` numbers
//! its cells `1..=prod(I)` in axis order, the first axis varying fastest.

use arrayvec::ArrayVec;

use crate::error::{Error, Result};

/// Largest supported dimensionality of a grid.
pub const MAX_DIM: usize = 8;

/// Stack-allocated index vector, 1-based components.
pub type IndexVec = ArrayVec<u64, MAX_DIM>;

/// Per-axis extents of a finite grid, together with the cell total.
///
/// Extents of zero are allowed: a checkerboard pattern that does not fit a
/// thin grid has zero active processes and an empty index range.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridDims {
    dims: IndexVec,
    total: u64,
}

impl GridDims {
    pub fn new(dims: &[u64]) -> Result<Self> {
        if dims.is_empty() || dims.len() > MAX_DIM {
            return Err(Error::UnsupportedDimension {
                dim: dims.len(),
                max: MAX_DIM,
            });
        }
        let mut total: u64 = 1;
        for &e in dims {
            total = total.checked_mul(e).ok_or(Error::Overflow)?;
        }
        Ok(GridDims {
            dims: dims.iter().copied().collect(),
            total,
        })
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn extents(&self) -> &[u64] {
        &self.dims
    }

    /// Number of cells, the product of all extents.
    pub fn total(&self) -> u64 {
        self.total
    }

    /// The cube (3, ..., 3) of the same dimension, indexing the 3^d block of
    /// a cell and its adjacent cells.
    pub fn unit_block(dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::UnsupportedDimension { dim, max: MAX_DIM });
        }
        let mut dims = IndexVec::new();
        for _ in 0..dim {
            dims.push(3);
        }
        // 3^8 still fits comfortably in u64.
        let total = 3u64.pow(dim as u32);
        Ok(GridDims { dims, total })
    }
}

/// 3^d, the number of checkerboard patterns and of compartments per process.
pub fn block_size(dim: usize) -> Result<u64> {
    if dim == 0 || dim > MAX_DIM {
        return Err(Error::UnsupportedDimension { dim, max: MAX_DIM });
    }
    Ok(3u64.pow(dim as u32))
}

/// The compartment a cell's own particles live in: (3^d + 1) / 2, the
/// middle of the 3^d block (2 for d=1, 5 for d=2, 14 for d=3).
pub fn center_compartment(dim: usize) -> Result<u64> {
    Ok(block_size(dim)?.div_ceil(2))
}

/// Scalar index to vector index: component l of `to_vec(j)` is
/// `((j - 1) / (I_1 * ... * I_{l-1})) mod I_l + 1`, the last component
/// taken without the modulus. Inverse of [`to_scalar`].
pub fn to_vec(j: u64, dims: &GridDims) -> Result<IndexVec> {
    if j == 0 || j > dims.total() {
        return Err(Error::IndexOutOfRange {
            index: j,
            max: dims.total(),
        });
    }
    let mut v = IndexVec::new();
    let mut rest = j - 1;
    let d = dims.dim();
    for (axis, &extent) in dims.extents().iter().enumerate() {
        if axis + 1 == d {
            v.push(rest + 1);
        } else {
            // extent > 0 here: a zero extent forces total == 0 and no valid j.
            v.push(rest % extent + 1);
            rest /= extent;
        }
    }
    Ok(v)
}

/// Vector index to scalar index: `1 + sum_l (v_l - 1) * I_1 * ... * I_{l-1}`.
pub fn to_scalar(v: &[u64], dims: &GridDims) -> Result<u64> {
    if v.len() != dims.dim() {
        return Err(Error::DimensionMismatch {
            expected: dims.dim(),
            got: v.len(),
        });
    }
    let mut scalar: u64 = 1;
    let mut stride: u64 = 1;
    for (axis, (&c, &extent)) in v.iter().zip(dims.extents()).enumerate() {
        if c == 0 || c > extent {
            return Err(Error::ComponentOutOfRange {
                axis,
                value: c,
                max: extent,
            });
        }
        scalar = scalar
            .checked_add((c - 1).checked_mul(stride).ok_or(Error::Overflow)?)
            .ok_or(Error::Overflow)?;
        stride = stride.checked_mul(extent).ok_or(Error::Overflow)?;
    }
    Ok(scalar)
}

/// Extents of checkerboard pattern `k` on a grid: axis l has
/// `floor((I_l - kv_l + 3) / 3)` active cells, where `kv = to_vec(k)` over
/// the 3^d block. Returns the pattern extents and their product, the number
/// of processes active in that pattern. Either may be zero on thin grids.
pub fn checkerboard_dims(k: u64, dims: &GridDims) -> Result<(GridDims, u64)> {
    let block = GridDims::unit_block(dims.dim())?;
    let kv = to_vec(k, &block)?;
    let mut pattern = IndexVec::new();
    for (&extent, &kc) in dims.extents().iter().zip(&kv) {
        pattern.push((extent + 3 - kc) / 3);
    }
    let pattern = GridDims::new(&pattern)?;
    let count = pattern.total();
    Ok((pattern, count))
}

/// The j-th process active in checkerboard pattern `k`: componentwise
/// `to_vec(j) * 3 + to_vec(k) - 3` read back as a scalar cell index.
/// Every cell is active in exactly one pattern.
pub fn active_process(k: u64, j: u64, dims: &GridDims) -> Result<u64> {
    let block = GridDims::unit_block(dims.dim())?;
    let kv = to_vec(k, &block)?;
    let (pattern, _) = checkerboard_dims(k, dims)?;
    let jv = to_vec(j, &pattern)?;
    let mut v = IndexVec::new();
    for (&jc, &kc) in jv.iter().zip(&kv) {
        // jc >= 1 and kc >= 1, so jc * 3 + kc - 3 >= 1.
        v.push(jc * 3 + kc - 3);
    }
    to_scalar(&v, dims)
}

/// The process one block step from `t` in direction `l`: componentwise
/// `to_vec(t) + to_vec(l) - 2` over the grid, `None` where that leaves the
/// grid. Direction `l` indexes the 3^d block; its center maps `t` to itself.
pub fn neighbor_process(t: u64, l: u64, dims: &GridDims) -> Result<Option<u64>> {
    let tv = to_vec(t, dims)?;
    let block = GridDims::unit_block(dims.dim())?;
    let lv = to_vec(l, &block)?;
    let mut v = IndexVec::new();
    for ((&tc, &lc), &extent) in tv.iter().zip(&lv).zip(dims.extents()) {
        let c = tc + lc - 2; // tc, lc >= 1, no underflow
        if c == 0 || c > extent {
            return Ok(None);
        }
        v.push(c);
    }
    Ok(Some(to_scalar(&v, dims)?))
}

/// Enumerates the whole 3^d block around cell `t` in one pass: calls
/// `f(l, neighbor)` for every direction `l` in ascending order, where
/// `neighbor` is exactly what [`neighbor_process`] returns for `(t, l)`.
/// Decodes `t` once and steps the direction digits like an odometer, so
/// the per-direction cost is a few additions instead of a full decode.
pub fn for_each_neighbor(
    t: u64,
    dims: &GridDims,
    mut f: impl FnMut(u64, Option<u64>),
) -> Result<()> {
    let tv = to_vec(t, dims)?;
    let d = dims.dim();
    let extents = dims.extents();
    let block = block_size(d)?;
    let mut stride = IndexVec::new();
    let mut s = 1u64;
    for &e in extents {
        stride.push(s);
        s = s.wrapping_mul(e); // prefix products of a valid grid never wrap
    }
    // digit[a] in 1..=3 is the block offset on axis a, first axis varying
    // fastest; the neighbor component there is tv[a] + digit[a] - 2. Track
    // how many components sit off the grid and the scalar contribution of
    // the on-grid ones, updating both in place per odometer step.
    let mut digit = [1u64; MAX_DIM];
    let mut bad = 0usize;
    let mut partial = 0u64;
    for a in 0..d {
        if tv[a] == 1 {
            bad += 1;
        } else {
            partial += (tv[a] - 2) * stride[a];
        }
    }
    for l in 1..=block {
        f(l, if bad == 0 { Some(partial + 1) } else { None });
        if l == block {
            break;
        }
        for a in 0..d {
            let c = tv[a] + digit[a] - 2;
            if digit[a] < 3 {
                digit[a] += 1;
                if c == 0 {
                    // Entering the grid at component 1 contributes nothing.
                    bad -= 1;
                } else if c < extents[a] {
                    partial += stride[a];
                } else {
                    bad += 1;
                    partial -= (c - 1) * stride[a];
                }
                break;
            }
            // Carry: digit 3 wraps to 1, component tv[a]+1 to tv[a]-1.
            digit[a] = 1;
            if c <= extents[a] {
                partial -= (c - 1) * stride[a];
            } else {
                bad -= 1;
            }
            if tv[a] >= 2 {
                partial += (tv[a] - 2) * stride[a];
            } else {
                bad += 1;
            }
        }
    }
    Ok(())
}

/// The compartment that faces direction `l` from the other side:
/// componentwise `4 - to_vec(l)` over the 3^d block. A process reading its
/// neighbor in direction `l` finds the particles headed its way there.
pub fn mirror_compartment(l: u64, dim: usize) -> Result<u64> {
    let block = GridDims::unit_block(dim)?;
    let lv = to_vec(l, &block)?;
    let mut v = IndexVec::new();
    for &c in &lv {
        v.push(4 - c);
    }
    to_scalar(&v, &block)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims(d: &[u64]) -> GridDims {
        GridDims::new(d).unwrap()
    }

    #[test]
    fn vector_of_scalar_on_a_square() {
        let g = dims(&[3, 3]);
        assert_eq!(to_vec(1, &g).unwrap().as_slice(), &[1, 1]);
        assert_eq!(to_vec(5, &g).unwrap().as_slice(), &[2, 2]);
        assert_eq!(to_vec(9, &g).unwrap().as_slice(), &[3, 3]);
        assert_eq!(to_vec(4, &g).unwrap().as_slice(), &[1, 2]);
    }

    #[test]
    fn scalar_of_vector_on_a_square() {
        let g = dims(&[3, 3]);
        assert_eq!(to_scalar(&[1, 1], &g).unwrap(), 1);
        assert_eq!(to_scalar(&[2, 2], &g).unwrap(), 5);
        assert_eq!(to_scalar(&[3, 3], &g).unwrap(), 9);
        assert_eq!(to_scalar(&[1, 2], &g).unwrap(), 4);
    }

    #[test]
    fn scalar_range_is_enforced() {
        let g = dims(&[3, 3]);
        assert!(matches!(
            to_vec(0, &g),
            Err(Error::IndexOutOfRange { index: 0, max: 9 })
        ));
        assert!(matches!(
            to_vec(10, &g),
            Err(Error::IndexOutOfRange { index: 10, max: 9 })
        ));
    }

    #[test]
    fn component_range_is_enforced() {
        let g = dims(&[3, 3]);
        assert!(matches!(
            to_scalar(&[4, 1], &g),
            Err(Error::ComponentOutOfRange {
                axis: 0,
                value: 4,
                max: 3
            })
        ));
        assert!(matches!(
            to_scalar(&[1, 0], &g),
            Err(Error::ComponentOutOfRange {
                axis: 1,
                value: 0,
                max: 3
            })
        ));
        assert!(matches!(
            to_scalar(&[1], &g),
            Err(Error::DimensionMismatch {
                expected: 2,
                got: 1
            })
        ));
    }

    #[test]
    fn last_axis_is_not_wrapped() {
        // On a 2x2 grid the scalar 4 decomposes with the last component
        // taken by plain division, not by a modulus.
        let g = dims(&[2, 2]);
        assert_eq!(to_vec(4, &g).unwrap().as_slice(), &[2, 2]);
        // Against the literal per-component form with explicit strides.
        let g2 = dims(&[4, 2, 3]);
        for j in 1..=g2.total() {
            let got = to_vec(j, &g2).unwrap();
            let strides = [1u64, 4, 8];
            let extents = [4u64, 2, 3];
            for l in 0..3 {
                let mut want = (j - 1) / strides[l];
                if l < 2 {
                    want %= extents[l];
                }
                assert_eq!(got[l], want + 1, "j={j} axis={l}");
            }
        }
    }

    #[test]
    fn round_trip_both_ways_small() {
        for shape in [
            &[1u64][..],
            &[7],
            &[2, 5],
            &[3, 3],
            &[1, 1],
            &[4, 1, 6],
            &[2, 3, 2, 2],
        ] {
            let g = dims(shape);
            for j in 1..=g.total() {
                let v = to_vec(j, &g).unwrap();
                assert_eq!(to_scalar(&v, &g).unwrap(), j);
                assert_eq!(to_vec(to_scalar(&v, &g).unwrap(), &g).unwrap(), v);
            }
        }
    }

    #[test]
    fn pattern_extents_match_hand_counts() {
        let g = dims(&[9, 9]);
        let (p, n) = checkerboard_dims(1, &g).unwrap();
        assert_eq!(p.extents(), &[3, 3]);
        assert_eq!(n, 9);

        let g = dims(&[1, 1]);
        let (p, n) = checkerboard_dims(5, &g).unwrap();
        assert_eq!(p.extents(), &[0, 0]);
        assert_eq!(n, 0);

        let g = dims(&[3, 3]);
        let (p, n) = checkerboard_dims(1, &g).unwrap();
        assert_eq!(p.extents(), &[1, 1]);
        assert_eq!(n, 1);
    }

    #[test]
    fn patterns_partition_every_grid() {
        for shape in [&[1u64][..], &[5], &[9, 9], &[2, 5], &[4, 4, 4], &[5, 1, 2]] {
            let g = dims(shape);
            let mut seen = vec![false; g.total() as usize];
            let block = block_size(shape.len()).unwrap();
            for k in 1..=block {
                let (_, n) = checkerboard_dims(k, &g).unwrap();
                for j in 1..=n {
                    let w = active_process(k, j, &g).unwrap();
                    assert!(!seen[(w - 1) as usize], "cell {w} hit twice");
                    seen[(w - 1) as usize] = true;
                }
            }
            assert!(seen.iter().all(|&s| s), "patterns missed a cell on {shape:?}");
        }
    }

    #[test]
    fn active_process_examples() {
        let g = dims(&[9, 9]);
        assert_eq!(active_process(1, 1, &g).unwrap(), 1);
        assert_eq!(active_process(1, 2, &g).unwrap(), 4);
        let g = dims(&[3, 3]);
        assert_eq!(active_process(1, 1, &g).unwrap(), 1);
        assert!(matches!(
            active_process(1, 2, &g),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn neighbor_center_is_identity() {
        let g = dims(&[4, 7]);
        let center = center_compartment(2).unwrap();
        for t in 1..=g.total() {
            assert_eq!(neighbor_process(t, center, &g).unwrap(), Some(t));
        }
    }

    #[test]
    fn neighbor_examples() {
        let g = dims(&[3, 3]);
        assert_eq!(neighbor_process(1, 1, &g).unwrap(), None);
        assert_eq!(neighbor_process(5, 6, &g).unwrap(), Some(6));

        let line = dims(&[2]);
        assert_eq!(neighbor_process(1, 3, &line).unwrap(), Some(2));
        assert_eq!(neighbor_process(2, 1, &line).unwrap(), Some(1));
        assert_eq!(neighbor_process(1, 1, &line).unwrap(), None);
        assert_eq!(neighbor_process(2, 3, &line).unwrap(), None);
    }

    #[test]
    fn neighbor_walk_matches_pointwise_lookup() {
        let mut shapes: Vec<Vec<u64>> = (1..=100).map(|n| vec![n]).collect();
        for a in 1..=100u64 {
            for b in 1..=100 / a {
                shapes.push(vec![a, b]);
            }
        }
        for a in 1..=64u64 {
            for b in 1..=64 / a {
                for c in 1..=64 / (a * b) {
                    shapes.push(vec![a, b, c]);
                }
            }
        }
        shapes.push(vec![7, 9, 11]);
        shapes.push(vec![2, 3, 4, 5]);
        for extents in shapes {
            let g = dims(&extents);
            let block = block_size(g.dim()).unwrap();
            for t in 1..=g.total() {
                let mut walked = Vec::with_capacity(block as usize);
                for_each_neighbor(t, &g, |l, nb| walked.push((l, nb))).unwrap();
                assert_eq!(walked.len() as u64, block);
                for (i, (l, nb)) in walked.iter().enumerate() {
                    assert_eq!(*l, i as u64 + 1);
                    assert_eq!(
                        *nb,
                        neighbor_process(t, *l, &g).unwrap(),
                        "shape {extents:?}, cell {t}, direction {l}"
                    );
                }
            }
        }
    }

    #[test]
    fn neighbor_walk_rejects_off_grid_cells() {
        let g = dims(&[4, 4]);
        assert!(for_each_neighbor(0, &g, |_, _| {}).is_err());
        assert!(for_each_neighbor(17, &g, |_, _| {}).is_err());
    }

    #[test]
    fn mirror_pairs() {
        assert_eq!(mirror_compartment(1, 2).unwrap(), 9);
        assert_eq!(mirror_compartment(9, 2).unwrap(), 1);
        assert_eq!(mirror_compartment(5, 2).unwrap(), 5);
        assert_eq!(mirror_compartment(1, 1).unwrap(), 3);
        assert_eq!(mirror_compartment(2, 1).unwrap(), 2);
        for d in 1..=3usize {
            let n = block_size(d).unwrap();
            for l in 1..=n {
                let m = mirror_compartment(l, d).unwrap();
                assert_eq!(mirror_compartment(m, d).unwrap(), l);
            }
            let c = center_compartment(d).unwrap();
            assert_eq!(mirror_compartment(c, d).unwrap(), c);
        }
    }

    #[test]
    fn center_compartments() {
        assert_eq!(center_compartment(1).unwrap(), 2);
        assert_eq!(center_compartment(2).unwrap(), 5);
        assert_eq!(center_compartment(3).unwrap(), 14);
    }

    #[test]
    fn oversized_products_overflow_cleanly() {
        assert!(matches!(
            GridDims::new(&[u64::MAX, 2]),
            Err(Error::Overflow)
        ));
        assert!(matches!(
            GridDims::new(&[]),
            Err(Error::UnsupportedDimension { dim: 0, .. })
        ));
        assert!(matches!(
            GridDims::new(&[1; 9]),
            Err(Error::UnsupportedDimension { dim: 9, .. })
        ));
    }

    #[test]
    fn zero_extent_grids_have_no_valid_index() {
        let g = dims(&[0, 4]);
        assert_eq!(g.total(), 0);
        assert!(to_vec(1, &g).is_err());
    }
}
