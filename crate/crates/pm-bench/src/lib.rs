//! Instance builders shared by the benchmarks.

use pm_core::grid::{self, CellGrid};
use pm_core::methods::{self, MethodName, MethodParams};
use pm_core::{DistributedState, Domain, Instance};

/// A d-dimensional ExchangeDiffusion instance on `side` cells per axis
/// with about `per_cell` particles in each.
pub fn exchange_instance(side: u64, d: usize, per_cell: usize, seed: u64) -> (Instance, CellGrid) {
    let extent = side as f64 - 0.5;
    let domain = Domain::new(vec![0.0; d], vec![extent; d]).expect("dyadic box");
    let grid = CellGrid::build(&domain, 1.0).expect("grid fits");
    assert_eq!(grid.n_cells(), side.pow(d as u32));
    let params = MethodParams::new(MethodName::ExchangeDiffusion, 1.0, 10);
    let n = grid.n_cells() as usize * per_cell;
    let instance = methods::random_instance(&params, seed, &grid, n).expect("valid instance");
    (instance, grid)
}

/// The instance's initial state filed onto one process per cell.
pub fn distributed(instance: &Instance, grid: &CellGrid) -> DistributedState {
    grid::distribute_initial(instance, grid).expect("all particles in domain")
}
