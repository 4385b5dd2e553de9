//! Distributed-memory runtime over simulated processes, one per grid cell.
//! Each process owns a block of 3^d compartments: its own particles in the
//! center, ghost copies of neighbor particles around it. A transition runs
//! copy, step, redistribute, collect; neighbor reads are scheduled by
//! checkerboard pattern so that no two processes ever pull from the same
//! source in the same phase.
//!
//! Two execution modes produce bit-identical states and communication logs:
//! a sequential reference that plays the phases in index order, and a
//! concurrent mode that gives every process's storage to its own worker
//! task, exchanges immutable message batches, and barriers between phases.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{self, CellGrid};
use crate::index;
use crate::methods;
use crate::model::{dist2, AlgorithmSpec, GlobalVar, Instance, Particle};
use crate::seq;

/// One simulated process: a private copy of the global variable and the
/// 3^d particle compartments. No worker ever touches another's storage.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProcessStorage {
    pub global: GlobalVar,
    pub compartments: Vec<Vec<Particle>>,
}

impl ProcessStorage {
    fn new(global: GlobalVar, block: usize) -> Self {
        ProcessStorage {
            global,
            compartments: vec![Vec::new(); block],
        }
    }

    fn center_index(&self) -> usize {
        self.compartments.len().div_ceil(2) - 1
    }

    pub fn center(&self) -> &[Particle] {
        &self.compartments[self.center_index()]
    }

    pub fn center_mut(&mut self) -> &mut Vec<Particle> {
        let c = self.center_index();
        &mut self.compartments[c]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistributedState {
    processes: Vec<ProcessStorage>,
    dim: usize,
}

impl DistributedState {
    pub fn new(global: &GlobalVar, n_cells: u64, dim: usize) -> Result<Self> {
        let block = index::block_size(dim)? as usize;
        let n = usize::try_from(n_cells).map_err(|_| Error::Overflow)?;
        if n == 0 {
            return Err(Error::InvalidDomain("grid with zero cells".into()));
        }
        Ok(DistributedState {
            processes: (0..n)
                .map(|_| ProcessStorage::new(global.clone(), block))
                .collect(),
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_processes(&self) -> u64 {
        self.processes.len() as u64
    }

    pub fn processes(&self) -> &[ProcessStorage] {
        &self.processes
    }

    /// Process by its 1-based cell index.
    pub fn process(&self, w: u64) -> &ProcessStorage {
        &self.processes[(w - 1) as usize]
    }

    pub fn process_mut(&mut self, w: u64) -> &mut ProcessStorage {
        &mut self.processes[(w - 1) as usize]
    }

    /// The global variable as seen by process 1; after every transition all
    /// copies agree.
    pub fn global(&self) -> &GlobalVar {
        &self.processes[0].global
    }

    /// All center particles in process order. The result is a permutation
    /// of the particle tuple the sequential interpreter would hold.
    pub fn merged_particles(&self) -> Vec<Particle> {
        let mut out = Vec::new();
        for p in &self.processes {
            out.extend_from_slice(p.center());
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExecMode {
    /// Phases and processes iterated in index order on one thread.
    Reference,
    /// Per-process worker tasks with immutable message batches and a
    /// barrier between phases; output is bit-identical to `Reference`.
    Concurrent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommKind {
    Copy,
    Collect,
}

impl CommKind {
    fn as_str(self) -> &'static str {
        match self {
            CommKind::Copy => "copy",
            CommKind::Collect => "collect",
        }
    }
}

/// One cross-process read: `reader` pulled `payload` particles from
/// `target` during checkerboard pattern `k` of the numbered phase. Reads
/// of a process from itself are identities and are not logged.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CommEvent {
    pub phase: u64,
    pub k: u64,
    pub reader: u64,
    pub target: u64,
    pub kind: CommKind,
    pub payload: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CommLog {
    pub events: Vec<CommEvent>,
    phases: u64,
}

impl CommLog {
    fn begin_phase(&mut self) -> u64 {
        self.phases += 1;
        self.phases
    }

    pub fn phases(&self) -> u64 {
        self.phases
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("phase,k,reader,target,kind,payload_size\n");
        for e in &self.events {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                e.phase,
                e.k,
                e.reader,
                e.target,
                e.kind.as_str(),
                e.payload
            ));
        }
        out
    }
}

/// A planned pull: direction `l`, source process, and for collects the
/// source compartment to read.
struct PullPlan {
    l: u64,
    src: u64,
    src_compartment: usize,
}

/// A planned pull with its payload snapshotted at the read barrier.
type PlannedPayload = (PullPlan, Vec<Particle>);

/// For collects, the 0-based source compartment per direction: the mirror
/// of `l`. Copies always read the neighbor's center instead.
fn mirror_sources(dim: usize) -> Result<Vec<usize>> {
    let block = index::block_size(dim)?;
    let mut table = vec![0usize; block as usize + 1];
    for l in 1..=block {
        table[l as usize] = index::mirror_compartment(l, dim)? as usize - 1;
    }
    Ok(table)
}

/// Fills `plan` with the pulls of reader `w` in ascending direction order.
fn plan_pulls(
    w: u64,
    kind: CommKind,
    grid: &CellGrid,
    mirror: &[usize],
    plan: &mut Vec<PullPlan>,
) -> Result<()> {
    let center = index::center_compartment(grid.dim())?;
    plan.clear();
    index::for_each_neighbor(w, grid.dims(), |l, neighbor| {
        if l == center {
            // The center direction reads the process itself: an identity
            // for copies and a duplication for collects, so never a pull.
            return;
        }
        if let Some(src) = neighbor {
            let src_compartment = match kind {
                CommKind::Copy => center as usize - 1,
                CommKind::Collect => mirror[l as usize],
            };
            plan.push(PullPlan {
                l,
                src,
                src_compartment,
            });
        }
    })
}

fn apply_pull(storage: &mut ProcessStorage, kind: CommKind, l: u64, payload: Vec<Particle>) {
    match kind {
        // Ghost compartments are replaced wholesale, clearing stale data.
        CommKind::Copy => storage.compartments[(l - 1) as usize] = payload,
        CommKind::Collect => storage.center_mut().extend(payload),
    }
}

/// Runs the 3^d checkerboard phases of one exchange. For every phase the
/// active processes pull in ascending direction order; `Reference` plays
/// them one after another, `Concurrent` snapshots all payloads of a phase
/// into immutable batches and lets each reader apply its own.
fn exchange_all(
    state: &mut DistributedState,
    grid: &CellGrid,
    kind: CommKind,
    mode: ExecMode,
    mut log: Option<&mut CommLog>,
) -> Result<()> {
    let block = index::block_size(grid.dim())?;
    let mirror = mirror_sources(grid.dim())?;
    for k in 1..=block {
        let phase = log.as_deref_mut().map(|l| l.begin_phase());
        let (_, active) = index::checkerboard_dims(k, grid.dims())?;
        match mode {
            ExecMode::Reference => {
                let mut plan = Vec::new();
                for j in 1..=active {
                    let w = index::active_process(k, j, grid.dims())?;
                    plan_pulls(w, kind, grid, &mirror, &mut plan)?;
                    for pull in &plan {
                        let payload =
                            state.process(pull.src).compartments[pull.src_compartment].clone();
                        if let (Some(log), Some(phase)) = (log.as_deref_mut(), phase) {
                            log.events.push(CommEvent {
                                phase,
                                k,
                                reader: w,
                                target: pull.src,
                                kind,
                                payload: payload.len() as u64,
                            });
                        }
                        apply_pull(state.process_mut(w), kind, pull.l, payload);
                    }
                }
            }
            ExecMode::Concurrent => {
                // Read barrier: all payloads of the phase are snapshotted
                // against the phase-start state before any write happens.
                // Within a phase reads and writes never touch the same
                // compartment, so the snapshot equals what the reference
                // mode reads.
                let shared: &DistributedState = state;
                let mirror = &mirror;
                let batches: Vec<(u64, Vec<PlannedPayload>)> = (1..=active)
                    .into_par_iter()
                    .map(|j| -> Result<(u64, Vec<PlannedPayload>)> {
                        let w = index::active_process(k, j, grid.dims())?;
                        let mut plan = Vec::new();
                        plan_pulls(w, kind, grid, mirror, &mut plan)?;
                        let mut pulls = Vec::with_capacity(plan.len());
                        for pull in plan {
                            let payload =
                                shared.process(pull.src).compartments[pull.src_compartment].clone();
                            pulls.push((pull, payload));
                        }
                        Ok((w, pulls))
                    })
                    .collect::<Result<_>>()?;
                if let (Some(log), Some(phase)) = (log.as_deref_mut(), phase) {
                    for (w, pulls) in &batches {
                        for (pull, payload) in pulls {
                            log.events.push(CommEvent {
                                phase,
                                k,
                                reader: *w,
                                target: pull.src,
                                kind,
                                payload: payload.len() as u64,
                            });
                        }
                    }
                }
                // Write barrier: every reader now owns its batch and writes
                // only its own storage.
                let mut slots: Vec<Option<Vec<PlannedPayload>>> =
                    (0..state.processes.len()).map(|_| None).collect();
                for (w, pulls) in batches {
                    slots[(w - 1) as usize] = Some(pulls);
                }
                state
                    .processes
                    .par_iter_mut()
                    .zip(slots.into_par_iter())
                    .for_each(|(storage, slot)| {
                        if let Some(pulls) = slot {
                            for (pull, payload) in pulls {
                                apply_pull(storage, kind, pull.l, payload);
                            }
                        }
                    });
            }
        }
    }
    Ok(())
}

/// Refreshes every ghost compartment with the current center particles of
/// the corresponding neighbor process.
pub fn copy_all(
    state: &mut DistributedState,
    grid: &CellGrid,
    mode: ExecMode,
    log: Option<&mut CommLog>,
) -> Result<()> {
    exchange_all(state, grid, CommKind::Copy, mode, log)
}

/// Interacts the center particles of one process against the whole local
/// block, ghosts included, and returns the interacted center tuple. Ghost
/// compartments are read only; the storage itself is untouched.
pub fn local_interaction(storage: &ProcessStorage, spec: &AlgorithmSpec) -> Vec<Particle> {
    let mut local: Vec<Particle> = Vec::new();
    let center_idx = storage.center_index();
    let mut start = 0;
    for (i, comp) in storage.compartments.iter().enumerate() {
        if i < center_idx {
            start += comp.len();
        }
        local.extend_from_slice(comp);
    }
    let count = storage.compartments[center_idx].len();
    let local = seq::interact_tuple(&storage.global, local, start, count, spec);
    local[start..start + count].to_vec()
}

/// Interacts and evolves the center particles of every process under its
/// own global copy. Ghost compartments stay bit-unchanged. Errors when an
/// evolved particle leaves the domain or moves farther than the cutoff.
pub fn step_all(
    state: &mut DistributedState,
    spec: &AlgorithmSpec,
    grid: &CellGrid,
    mode: ExecMode,
) -> Result<()> {
    let step_one = |storage: &mut ProcessStorage| -> Result<()> {
        let interacted = local_interaction(storage, spec);
        let mut fresh = Vec::with_capacity(interacted.len());
        for parent in &interacted {
            for child in (spec.evolve)(&storage.global, parent) {
                if !grid.domain().contains(&child.x) {
                    return Err(Error::OutOfDomain {
                        id: child.id,
                        x: child.x,
                    });
                }
                let moved2 = dist2(&child.x, &parent.x);
                if moved2 > spec.cutoff * spec.cutoff {
                    return Err(Error::MovementExceedsCutoff {
                        id: child.id,
                        moved: moved2.sqrt(),
                        cutoff: spec.cutoff,
                    });
                }
                fresh.push(child);
            }
        }
        *storage.center_mut() = fresh;
        Ok(())
    };
    match mode {
        ExecMode::Reference => {
            for storage in &mut state.processes {
                step_one(storage)?;
            }
            Ok(())
        }
        ExecMode::Concurrent => state
            .processes
            .par_iter_mut()
            .map(step_one)
            .collect::<Vec<Result<()>>>()
            .into_iter()
            .collect(),
    }
}

/// Empties every compartment and re-files the former center particles by
/// the cell their new position belongs to: the compartment pointing at that
/// cell within the process's 3^d block.
pub fn dist_all(state: &mut DistributedState, grid: &CellGrid, mode: ExecMode) -> Result<()> {
    let dist_one = |w: u64, storage: &mut ProcessStorage| -> Result<()> {
        let former = std::mem::take(storage.center_mut());
        for comp in &mut storage.compartments {
            comp.clear();
        }
        for p in former {
            if !grid.domain().contains(&p.x) {
                return Err(Error::OutOfDomain { id: p.id, x: p.x });
            }
            let a = grid::compartment_of(&p.x, w, grid).map_err(|e| e.with_particle(p.id))?;
            storage.compartments[(a - 1) as usize].push(p);
        }
        Ok(())
    };
    match mode {
        ExecMode::Reference => {
            for (i, storage) in state.processes.iter_mut().enumerate() {
                dist_one(i as u64 + 1, storage)?;
            }
            Ok(())
        }
        ExecMode::Concurrent => state
            .processes
            .par_iter_mut()
            .enumerate()
            .map(|(i, storage)| dist_one(i as u64 + 1, storage))
            .collect::<Vec<Result<()>>>()
            .into_iter()
            .collect(),
    }
}

/// Gathers into every center the particles that moved toward it: for each
/// neighbor direction, the neighbor's mirror compartment holds exactly the
/// particles headed this way. After all phases every center holds exactly
/// the particles whose position maps to its cell.
pub fn collect_all(
    state: &mut DistributedState,
    grid: &CellGrid,
    mode: ExecMode,
    log: Option<&mut CommLog>,
) -> Result<()> {
    exchange_all(state, grid, CommKind::Collect, mode, log)
}

/// One distributed transition: copy ghosts, step every cell, redistribute,
/// collect, then advance every copy of the global variable.
pub fn parallel_step(
    state: &mut DistributedState,
    spec: &AlgorithmSpec,
    grid: &CellGrid,
    mode: ExecMode,
    mut log: Option<&mut CommLog>,
) -> Result<()> {
    if (spec.stop)(state.global()) {
        return Err(Error::AlreadyStopped);
    }
    copy_all(state, grid, mode, log.as_deref_mut())?;
    step_all(state, spec, grid, mode)?;
    dist_all(state, grid, mode)?;
    collect_all(state, grid, mode, log)?;
    match mode {
        ExecMode::Reference => {
            for storage in &mut state.processes {
                storage.global = (spec.evolve_global)(&storage.global);
            }
        }
        ExecMode::Concurrent => {
            state.processes.par_iter_mut().for_each(|storage| {
                storage.global = (spec.evolve_global)(&storage.global);
            });
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct ParallelOptions {
    pub max_transitions: u64,
    /// Refuse to simulate grids with more cells than this.
    pub max_cells: u64,
    /// Record every cross-process read into a communication log.
    pub audit: bool,
}

impl Default for ParallelOptions {
    fn default() -> Self {
        ParallelOptions {
            max_transitions: 1_000_000,
            max_cells: 1_000_000,
            audit: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ParallelOutcome {
    pub state: DistributedState,
    /// Number of states visited, the initial state included.
    pub states_visited: u64,
    pub grid: CellGrid,
    pub audit: Option<CommLog>,
}

/// Runs an instance to its stop condition on the distributed runtime.
pub fn parallel_run(
    instance: &Instance,
    mode: ExecMode,
    opts: &ParallelOptions,
) -> Result<ParallelOutcome> {
    instance.validate()?;
    methods::validate_instance(instance)?;
    let spec = methods::instantiate(&instance.method, &instance.domain)?;
    let grid = CellGrid::build(&instance.domain, spec.cutoff)?;
    if grid.n_cells() > opts.max_cells {
        return Err(Error::GridTooLarge {
            cells: grid.n_cells(),
            limit: opts.max_cells,
        });
    }
    let mut state = grid::distribute_initial(instance, &grid)?;
    let mut log = opts.audit.then(CommLog::default);
    let mut visited: u64 = 1;
    while !(spec.stop)(state.global()) {
        if visited > opts.max_transitions {
            return Err(Error::StepLimitExceeded {
                limit: opts.max_transitions,
            });
        }
        parallel_step(&mut state, &spec, &grid, mode, log.as_mut())?;
        visited += 1;
    }
    Ok(ParallelOutcome {
        state,
        states_visited: visited,
        grid,
        audit: log,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct AuditReport {
    pub phases: u64,
    pub events: u64,
    pub violations: Vec<String>,
    pub pass: bool,
}

/// Checks a communication log for schedule conflicts: within one phase no
/// two readers may pull from the same target and no reader may be another
/// reader's target. A clean pass means every phase's reads could run as
/// simultaneous exclusive pairs.
pub fn audit_communications(log: &CommLog) -> AuditReport {
    use std::collections::{HashMap, HashSet};
    let mut violations = Vec::new();
    let mut events = log.events.as_slice();
    let mut total: u64 = 0;
    while let Some(first) = events.first() {
        let phase = first.phase;
        let len = events.iter().take_while(|e| e.phase == phase).count();
        let (group, rest) = events.split_at(len);
        events = rest;
        total += len as u64;
        let readers: HashSet<u64> = group.iter().map(|e| e.reader).collect();
        let mut targets: HashMap<u64, u64> = HashMap::new();
        for e in group {
            if let Some(&other) = targets.get(&e.target) {
                if other != e.reader && violations.len() < 32 {
                    violations.push(format!(
                        "phase {phase} ({}): processes {other} and {} both pull from {}",
                        e.kind.as_str(),
                        e.reader,
                        e.target
                    ));
                }
            } else {
                targets.insert(e.target, e.reader);
            }
            if e.target != e.reader && readers.contains(&e.target) && violations.len() < 32 {
                violations.push(format!(
                    "phase {phase} ({}): process {} pulls from {} which is itself reading",
                    e.kind.as_str(),
                    e.reader,
                    e.target
                ));
            }
        }
    }
    AuditReport {
        phases: log.phases,
        events: total,
        pass: violations.is_empty(),
        violations,
    }
}
