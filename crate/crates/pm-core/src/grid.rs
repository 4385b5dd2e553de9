//! Cell grid over a rectangular domain. Cell side equals the interaction
//! cutoff, so any two particles within the cutoff sit in the same or in
//! axis-adjacent cells, and one process per cell sees every partner of its
//! particles among its immediate neighbors.

use serde::Serialize;

use crate::dist::DistributedState;
use crate::error::{Error, Result};
use crate::index::{self, GridDims};
use crate::model::{Domain, Instance};

#[derive(Clone, Debug, Serialize)]
pub struct CellGrid {
    domain: Domain,
    cutoff: f64,
    #[serde(serialize_with = "serialize_dims")]
    dims: GridDims,
}

fn serialize_dims<S: serde::Serializer>(dims: &GridDims, s: S) -> std::result::Result<S::Ok, S::Error> {
    dims.extents().serialize(s)
}

impl CellGrid {
    /// Builds the grid covering `domain` with cell side `cutoff`: axis l
    /// spans `floor((max_l - min_l) / cutoff + 1)` cells. The last cell of
    /// an axis may stick out past the domain and then simply stays empty.
    pub fn build(domain: &Domain, cutoff: f64) -> Result<Self> {
        domain.validate()?;
        if !cutoff.is_finite() || cutoff <= 0.0 {
            return Err(Error::InvalidCutoff(cutoff));
        }
        let mut extents = Vec::with_capacity(domain.dim());
        for (&lo, &hi) in domain.min.iter().zip(&domain.max) {
            let cells = ((hi - lo) / cutoff + 1.0).floor();
            if cells.is_nan() || cells < 1.0 || cells > u64::MAX as f64 {
                return Err(Error::InvalidDomain(format!(
                    "axis extent [{lo}, {hi}) with cutoff {cutoff} yields {cells} cells"
                )));
            }
            extents.push(cells as u64);
        }
        Ok(CellGrid {
            domain: domain.clone(),
            cutoff,
            dims: GridDims::new(&extents)?,
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn dims(&self) -> &GridDims {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.dim()
    }

    pub fn n_cells(&self) -> u64 {
        self.dims.total()
    }
}

/// The cell holding position `x`: componentwise
/// `floor((x - min) / cutoff) + 1`, read as a scalar cell index. Positions
/// within rounding distance of a cell face are taken exactly as the floor
/// computes them, with no epsilon adjustment.
pub fn cell_of(x: &[f64], grid: &CellGrid) -> Result<u64> {
    if !grid.domain.contains(x) {
        return Err(Error::OutOfDomain {
            id: u64::MAX,
            x: x.to_vec(),
        });
    }
    let mut v = index::IndexVec::new();
    for (axis, &c) in x.iter().enumerate() {
        let f = ((c - grid.domain.min[axis]) / grid.cutoff).floor();
        // In-domain positions always land inside the grid; the guard only
        // trips on pathological bounds and is exercised by edge fuzzing.
        let cell = f as u64 + 1;
        if f < 0.0 || cell > grid.dims.extents()[axis] {
            return Err(Error::OutOfDomain {
                id: u64::MAX,
                x: x.to_vec(),
            });
        }
        v.push(cell);
    }
    index::to_scalar(&v, &grid.dims)
}

/// The compartment of process `w` for a particle at `x`: the offset of the
/// particle's cell from `w`, shifted into the 3^d block. Errors when the
/// particle's cell is not `w` or one of its immediate neighbors, which means
/// something moved farther than one cell in one transition.
pub fn compartment_of(x: &[f64], w: u64, grid: &CellGrid) -> Result<u64> {
    let wv = index::to_vec(w, &grid.dims)?;
    let block = GridDims::unit_block(grid.dim())?;
    let mut v = index::IndexVec::new();
    for (axis, &c) in x.iter().enumerate() {
        let f = ((c - grid.domain.min[axis]) / grid.cutoff).floor();
        let offset = f as i64 - (wv[axis] as i64 - 1);
        if !f.is_finite() || offset.unsigned_abs() > 1 {
            return Err(Error::CompartmentEscape {
                process: w,
                id: u64::MAX,
                axis,
                offset,
            });
        }
        v.push((offset + 2) as u64);
    }
    index::to_scalar(&v, &block)
}

impl Error {
    pub(crate) fn with_particle(self, pid: u64) -> Error {
        match self {
            Error::CompartmentEscape {
                process,
                axis,
                offset,
                ..
            } => Error::CompartmentEscape {
                process,
                id: pid,
                axis,
                offset,
            },
            Error::OutOfDomain { x, .. } => Error::OutOfDomain { id: pid, x },
            other => other,
        }
    }
}

/// Places every particle of the initial state into the center compartment
/// of its cell's process and gives every process a copy of the global
/// variable. Within one cell the initial tuple order is preserved.
pub fn distribute_initial(instance: &Instance, grid: &CellGrid) -> Result<DistributedState> {
    instance.validate()?;
    let mut state = DistributedState::new(&instance.state.global, grid.n_cells(), grid.dim())?;
    for p in &instance.state.particles {
        let w = cell_of(&p.x, grid).map_err(|e| e.with_particle(p.id))?;
        state.process_mut(w).center_mut().push(p.clone());
    }
    Ok(state)
}
