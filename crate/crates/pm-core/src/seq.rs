//! Sequential reference interpreter: neighborhoods over the full particle
//! tuple, interaction folds in tuple order, evolution, and the run loop.
//! The distributed runtime must match this interpreter exactly on methods
//! whose interactions are order-independent.

use crate::error::{Error, Result};
use crate::methods;
use crate::model::{dist2, AlgorithmSpec, Domain, GlobalVar, Instance, Particle, State};

/// Indices (0-based, in tuple order) of the particles within the cutoff of
/// `particles[j]` that also satisfy the omega predicate. A particle is its
/// own neighbor whenever omega admits it: self-distance is zero.
pub fn neighborhood(state: &State, j: usize, spec: &AlgorithmSpec) -> Vec<usize> {
    neighborhood_in(&state.global, &state.particles, j, spec)
}

pub(crate) fn neighborhood_in(
    g: &GlobalVar,
    particles: &[Particle],
    j: usize,
    spec: &AlgorithmSpec,
) -> Vec<usize> {
    assert!(j < particles.len(), "neighborhood of index {j} out of range");
    let pj = &particles[j];
    let r2 = spec.cutoff * spec.cutoff;
    let mut out = Vec::new();
    for (k, pk) in particles.iter().enumerate() {
        if dist2(&pk.x, &pj.x) <= r2 && (spec.omega)(g, pk, pj) {
            out.push(k);
        }
    }
    out
}

/// Folds every particle, in tuple order, over its neighborhood evaluated on
/// the current tuple. Only the folded particle is replaced; partners are
/// read at the values they hold when the fold reaches them, which for a
/// conforming method equals their pre-interaction values.
pub fn interact_all(state: &State, spec: &AlgorithmSpec) -> Vec<Particle> {
    interact_tuple(&state.global, state.particles.clone(), 0, state.particles.len(), spec)
}

/// Shared fold kernel: interacts the particles at `start..start + count` of
/// `tuple` against neighborhoods drawn from the whole of `tuple`. Both
/// interpreters run this same code so that per-particle arithmetic is
/// bit-identical between them.
pub(crate) fn interact_tuple(
    g: &GlobalVar,
    mut tuple: Vec<Particle>,
    start: usize,
    count: usize,
    spec: &AlgorithmSpec,
) -> Vec<Particle> {
    for j in start..start + count {
        let neighbors = neighborhood_in(g, &tuple, j, spec);
        let mut folded = tuple[j].clone();
        for k in neighbors {
            // The partner is read from the tuple, so a self-pair reads the
            // pre-fold value rather than the accumulating one.
            folded = (spec.interact)(g, &folded, &tuple[k]);
        }
        tuple[j] = folded;
    }
    tuple
}

/// Applies the evolution map to every particle and concatenates the
/// returned tuples. Errors if any produced position leaves the domain.
pub fn evolve_all(
    g: &GlobalVar,
    particles: &[Particle],
    spec: &AlgorithmSpec,
    domain: &Domain,
) -> Result<Vec<Particle>> {
    let mut out = Vec::with_capacity(particles.len());
    for p in particles {
        for child in (spec.evolve)(g, p) {
            if !domain.contains(&child.x) {
                return Err(Error::OutOfDomain {
                    id: child.id,
                    x: child.x,
                });
            }
            out.push(child);
        }
    }
    Ok(out)
}

/// One state transition: interact, evolve the particles under the old
/// global variable, then evolve the global variable.
pub fn step(state: &State, spec: &AlgorithmSpec, domain: &Domain) -> Result<State> {
    if (spec.stop)(&state.global) {
        return Err(Error::AlreadyStopped);
    }
    let interacted = interact_tuple(
        &state.global,
        state.particles.clone(),
        0,
        state.particles.len(),
        spec,
    );
    let particles = evolve_all(&state.global, &interacted, spec, domain)?;
    let global = (spec.evolve_global)(&state.global);
    Ok(State { global, particles })
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    /// Hard cap on transitions before the run is declared non-terminating.
    pub max_transitions: u64,
    /// Record every visited state, the initial one included.
    pub record_trace: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            max_transitions: 1_000_000,
            record_trace: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub state: State,
    /// Number of states visited, the initial state included.
    pub states_visited: u64,
    pub trace: Option<Vec<State>>,
}

/// Runs an instance to its stop condition with the sequential interpreter.
pub fn run(instance: &Instance, opts: &RunOptions) -> Result<RunOutcome> {
    instance.validate()?;
    methods::validate_instance(instance)?;
    let spec = methods::instantiate(&instance.method, &instance.domain)?;
    let mut state = instance.state.clone();
    let mut trace = opts.record_trace.then(|| vec![state.clone()]);
    let mut visited: u64 = 1;
    while !(spec.stop)(&state.global) {
        if visited > opts.max_transitions {
            return Err(Error::StepLimitExceeded {
                limit: opts.max_transitions,
            });
        }
        state = step(&state, &spec, &instance.domain)?;
        visited += 1;
        if let Some(t) = trace.as_mut() {
            t.push(state.clone());
        }
    }
    Ok(RunOutcome {
        state,
        states_visited: visited,
        trace,
    })
}
