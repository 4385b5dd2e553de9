//! Executable checks for the claims the runtime is built on: that both
//! interpreters compute the same states, that the index maps are mutual
//! inverses, that the checkerboard schedule is free of read conflicts,
//! that ghost layers are complete, and that redistribution lands every
//! particle in the cell its position names. Each check brute-forces a
//! bounded family of grids or randomized instances and reports failures
//! as data instead of panicking.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dist::{self, DistributedState, ExecMode};
use crate::error::Result;
use crate::grid::{self, CellGrid};
use crate::index::{self, GridDims, IndexVec};
use crate::methods::{self, MethodName, MethodParams};
use crate::model::{dist2, AlgorithmSpec, Domain, GlobalVar, Instance, Particle, PropValue, State};

/// Comparison width for floating-point fields. Zero on both knobs means
/// values must be equal outright.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Tolerance {
    pub relative: f64,
    pub absolute: f64,
}

impl Tolerance {
    pub const EXACT: Tolerance = Tolerance { relative: 0.0, absolute: 0.0 };

    /// Interaction folds run in different orders on the two interpreters,
    /// so float methods compare loosely: 1e-9 relative with a 1e-12 floor.
    pub const FLOAT_DEFAULT: Tolerance = Tolerance { relative: 1e-9, absolute: 1e-12 };

    pub fn float_eq(&self, a: f64, b: f64) -> bool {
        if a == b {
            return true;
        }
        let diff = (a - b).abs();
        diff <= self.absolute || diff <= self.relative * a.abs().max(b.abs())
    }

    pub fn prop_eq(&self, a: &PropValue, b: &PropValue) -> bool {
        match (a, b) {
            (PropValue::Int(x), PropValue::Int(y)) => x == y,
            (PropValue::Float(x), PropValue::Float(y)) => self.float_eq(*x, *y),
            _ => false,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ParticleDiff {
    pub id: u64,
    pub field: String,
    pub seq: String,
    pub par: String,
}

/// Outcome of comparing a sequential final state against a distributed
/// one. `matches` holds exactly when the step counts, the global
/// variable, and every id-paired particle agree.
#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceReport {
    #[serde(rename = "match")]
    pub matches: bool,
    pub t_seq: u64,
    pub t_par: u64,
    pub global_match: bool,
    /// Whether all per-process copies of the global variable agree.
    pub globals_uniform: bool,
    pub seq_particles: usize,
    pub par_particles: usize,
    /// First differing fields, capped; empty when the states agree.
    pub particle_diffs: Vec<ParticleDiff>,
    pub tolerance: Tolerance,
}

const DIFF_CAP: usize = 32;

fn global_eq(a: &GlobalVar, b: &GlobalVar, tol: &Tolerance) -> bool {
    a.t == b.t
        && a.t_max == b.t_max
        && a.extras.len() == b.extras.len()
        && a.extras
            .iter()
            .zip(b.extras.iter())
            .all(|(va, vb)| tol.prop_eq(va, vb))
}

fn push_diff(diffs: &mut Vec<ParticleDiff>, id: u64, field: &str, seq: String, par: String) {
    if diffs.len() < DIFF_CAP {
        diffs.push(ParticleDiff { id, field: field.to_string(), seq, par });
    }
}

/// Compares two particle tuples as id-keyed multisets, order ignored.
pub fn states_equivalent(seq: &State, par: &State, tol: Tolerance) -> EquivalenceReport {
    let mut diffs = Vec::new();
    let index_by_id = |ps: &[Particle], label: &str, diffs: &mut Vec<ParticleDiff>| {
        let mut map: BTreeMap<u64, usize> = BTreeMap::new();
        for (i, p) in ps.iter().enumerate() {
            if map.insert(p.id, i).is_some() {
                push_diff(diffs, p.id, "id", format!("duplicate in {label}"), String::new());
            }
        }
        map
    };
    let seq_ids = index_by_id(&seq.particles, "sequential state", &mut diffs);
    let par_ids = index_by_id(&par.particles, "distributed state", &mut diffs);
    for (&id, &si) in &seq_ids {
        let Some(&pi) = par_ids.get(&id) else {
            push_diff(&mut diffs, id, "presence", "present".into(), "missing".into());
            continue;
        };
        let (a, b) = (&seq.particles[si], &par.particles[pi]);
        if a.x.len() != b.x.len() {
            push_diff(&mut diffs, id, "x", format!("{} axes", a.x.len()), format!("{} axes", b.x.len()));
            continue;
        }
        for (axis, (xa, xb)) in a.x.iter().zip(&b.x).enumerate() {
            if !tol.float_eq(*xa, *xb) {
                push_diff(&mut diffs, id, &format!("x[{axis}]"), format!("{xa:?}"), format!("{xb:?}"));
            }
        }
        if a.props.len() != b.props.len() {
            push_diff(&mut diffs, id, "props", format!("{} fields", a.props.len()), format!("{} fields", b.props.len()));
            continue;
        }
        for (slot, (pa, pb)) in a.props.iter().zip(&b.props).enumerate() {
            if !tol.prop_eq(pa, pb) {
                push_diff(&mut diffs, id, &format!("prop[{slot}]"), format!("{pa}"), format!("{pb}"));
            }
        }
    }
    for &id in par_ids.keys() {
        if !seq_ids.contains_key(&id) {
            push_diff(&mut diffs, id, "presence", "missing".into(), "present".into());
        }
    }
    let global_match = global_eq(&seq.global, &par.global, &tol);
    let t_seq = seq.global.t;
    let t_par = par.global.t;
    EquivalenceReport {
        matches: global_match
            && diffs.is_empty()
            && t_seq == t_par
            && seq.particles.len() == par.particles.len(),
        t_seq,
        t_par,
        global_match,
        globals_uniform: true,
        seq_particles: seq.particles.len(),
        par_particles: par.particles.len(),
        particle_diffs: diffs,
        tolerance: tol,
    }
}

/// Checks that a finished distributed run names the same state as the
/// sequential one: same global variable on every process, and the merged
/// centers a permutation of the sequential particle tuple.
pub fn equivalent_up_to_permutation(
    seq: &State,
    par: &DistributedState,
    tol: Tolerance,
) -> EquivalenceReport {
    let reference = par.global();
    let uniform = par
        .processes()
        .iter()
        .all(|p| global_eq(&p.global, reference, &Tolerance::EXACT));
    let merged = State {
        global: reference.clone(),
        particles: par.merged_particles(),
    };
    let mut report = states_equivalent(seq, &merged, tol);
    report.globals_uniform = uniform;
    report.matches = report.matches && uniform;
    report
}

#[derive(Clone, Debug, Serialize)]
pub struct LawReport {
    pub trials: u64,
    pub counterexamples: Vec<String>,
    pub pass: bool,
}

fn particle_diff_text(a: &Particle, b: &Particle, tol: &Tolerance) -> Option<String> {
    if a.id != b.id {
        return Some(format!("id {} vs {}", a.id, b.id));
    }
    if a.x != b.x {
        return Some(format!("position {:?} vs {:?}", a.x, b.x));
    }
    if a.props.len() != b.props.len() {
        return Some(format!("{} props vs {}", a.props.len(), b.props.len()));
    }
    for (slot, (pa, pb)) in a.props.iter().zip(&b.props).enumerate() {
        if !tol.prop_eq(pa, pb) {
            return Some(format!("prop[{slot}] {pa} vs {pb}"));
        }
    }
    None
}

/// Random-input sampler for the law checks: produces the global variable
/// and three distinct particles.
pub type LawSampler<'a> =
    dyn FnMut(&mut ChaCha8Rng) -> (GlobalVar, Particle, Particle, Particle) + 'a;

/// Hammers an interaction with random triples and checks the laws the
/// distributed fold depends on: what a partner donates must not depend on
/// the partner's own received interactions, two partners must commute,
/// and interacting must never move or re-identify the receiver.
pub fn check_interaction_laws_with(
    spec: &AlgorithmSpec,
    tol: Tolerance,
    seed: u64,
    trials: u64,
    sample: &mut LawSampler,
) -> LawReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counterexamples = Vec::new();
    let note = |trial: u64, law: &str, detail: String, out: &mut Vec<String>| {
        if out.len() < DIFF_CAP {
            out.push(format!("trial {trial}: {law}: {detail}"));
        }
    };
    for trial in 0..trials {
        let (g, pj, pk, pk2) = sample(&mut rng);
        let interact = &spec.interact;

        let fresh = interact(&g, &pj, &pk);
        let touched_partner = interact(&g, &pk, &pk2);
        let via_touched = interact(&g, &pj, &touched_partner);
        if let Some(d) = particle_diff_text(&fresh, &via_touched, &tol) {
            note(trial, "partner independence", d, &mut counterexamples);
        }

        let kj = interact(&g, &interact(&g, &pj, &pk), &pk2);
        let jk = interact(&g, &interact(&g, &pj, &pk2), &pk);
        if let Some(d) = particle_diff_text(&kj, &jk, &tol) {
            note(trial, "order independence", d, &mut counterexamples);
        }

        if fresh.id != pj.id || fresh.x != pj.x {
            note(
                trial,
                "receiver stays in place",
                format!("id {} at {:?} became id {} at {:?}", pj.id, pj.x, fresh.id, fresh.x),
                &mut counterexamples,
            );
        }
    }
    LawReport { trials, pass: counterexamples.is_empty(), counterexamples }
}

/// Runs the law checks for a built-in method with schema-matched random
/// inputs. Exact methods compare exactly, float methods loosely.
pub fn check_interaction_laws(
    params: &MethodParams,
    domain: &Domain,
    seed: u64,
    trials: u64,
) -> Result<LawReport> {
    let spec = methods::instantiate(params, domain)?;
    let info = methods::method_info(params.name);
    let tol = if info.exact { Tolerance::EXACT } else { Tolerance::FLOAT_DEFAULT };
    let fields: Vec<bool> = info.fields.iter().map(|f| f.float).collect();
    let domain = domain.clone();
    let mut next_id = 0u64;
    let mut sample = move |rng: &mut ChaCha8Rng| {
        let mut particle = |rng: &mut ChaCha8Rng| {
            let x = (0..domain.dim())
                .map(|a| rng.gen_range(domain.min[a]..domain.max[a]))
                .collect();
            let props = fields
                .iter()
                .map(|float| {
                    if *float {
                        PropValue::Float(rng.gen_range(0.1..10.0))
                    } else {
                        PropValue::Int(rng.gen_range(-100..=100))
                    }
                })
                .collect();
            next_id += 1;
            Particle { id: next_id, x, props }
        };
        let t = rng.gen_range(1..=5);
        let t_max = t + rng.gen_range(0..=5);
        let g = GlobalVar::new(t, t_max);
        (g, particle(rng), particle(rng), particle(rng))
    };
    Ok(check_interaction_laws_with(&spec, tol, seed, trials, &mut sample))
}

#[derive(Clone, Debug, Serialize)]
pub struct MotionReport {
    pub states: usize,
    pub violations: Vec<String>,
    pub pass: bool,
}

/// Scans a per-step trace for broken motion constraints: positions
/// outside the domain, or any particle displaced farther than the cutoff
/// in one step. Particles are matched across steps by id; fresh ids have
/// no displacement to check.
pub fn check_motion_constraints(trace: &[State], domain: &Domain, cutoff: f64) -> MotionReport {
    let mut violations = Vec::new();
    let flag = |v: String, out: &mut Vec<String>| {
        if out.len() < DIFF_CAP {
            out.push(v);
        }
    };
    for (step, state) in trace.iter().enumerate() {
        for p in &state.particles {
            if !domain.contains(&p.x) {
                flag(format!("step {step}: particle {} at {:?} is outside the domain", p.id, p.x), &mut violations);
            }
        }
    }
    for (step, pair) in trace.windows(2).enumerate() {
        let before: BTreeMap<u64, &Particle> = pair[0].particles.iter().map(|p| (p.id, p)).collect();
        for p in &pair[1].particles {
            if let Some(prev) = before.get(&p.id) {
                if p.x.len() == prev.x.len() {
                    let moved = dist2(&p.x, &prev.x).sqrt();
                    if moved > cutoff {
                        flag(
                            format!("step {}: particle {} moved {moved} > cutoff {cutoff}", step + 1, p.id),
                            &mut violations,
                        );
                    }
                }
            }
        }
    }
    MotionReport { states: trace.len(), pass: violations.is_empty(), violations }
}

/// Calls `f` for every grid shape with the given dimension whose cell
/// count stays within `max_product`, in lexicographic order.
pub fn for_each_shape(
    max_product: u64,
    dim: usize,
    f: &mut dyn FnMut(&GridDims) -> Result<()>,
) -> Result<()> {
    fn rec(
        prefix: &mut IndexVec,
        left: usize,
        budget: u64,
        f: &mut dyn FnMut(&GridDims) -> Result<()>,
    ) -> Result<()> {
        if left == 0 {
            let dims = GridDims::new(prefix)?;
            return f(&dims);
        }
        for extent in 1..=budget {
            prefix.push(extent);
            rec(prefix, left - 1, budget / extent, f)?;
            prefix.pop();
        }
        Ok(())
    }
    let mut prefix = IndexVec::new();
    rec(&mut prefix, dim, max_product, f)
}

#[derive(Clone, Debug, Serialize)]
pub struct RoundTripReport {
    pub shapes: u64,
    pub indices: u64,
    pub failures: Vec<String>,
    pub pass: bool,
}

/// Exhaustively verifies that the scalar and vector index maps are
/// mutual inverses on every grid shape with at most `max_product` cells
/// and at most `max_dim` axes. Vector indices are enumerated by odometer
/// so each direction of the round trip is checked against an
/// independently produced value.
pub fn index_roundtrip(max_product: u64, max_dim: usize) -> RoundTripReport {
    let mut shapes = 0u64;
    let mut indices = 0u64;
    let mut failures: Vec<String> = Vec::new();
    for dim in 1..=max_dim {
        let _ = for_each_shape(max_product, dim, &mut |dims| {
            shapes += 1;
            let extents = dims.extents();
            let mut v: IndexVec = extents.iter().map(|_| 1u64).collect();
            for j in 1..=dims.total() {
                indices += 1;
                let got_v = index::to_vec(j, dims);
                let got_j = index::to_scalar(&v, dims);
                let ok = matches!(&got_v, Ok(gv) if gv == &v) && matches!(got_j, Ok(gj) if gj == j);
                if !ok && failures.len() < 16 {
                    failures.push(format!(
                        "shape {:?}: index {j} maps to {:?} and back to {:?}, expected {:?}",
                        extents, got_v, got_j, v
                    ));
                }
                // Odometer increment in index order: first axis fastest.
                for (axis, slot) in v.iter_mut().enumerate() {
                    if *slot < extents[axis] {
                        *slot += 1;
                        break;
                    }
                    *slot = 1;
                }
            }
            Ok(())
        });
    }
    RoundTripReport { shapes, indices, pass: failures.is_empty(), failures }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub cases: u64,
    pub failures: Vec<String>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub checks: Vec<CheckResult>,
    pub pass: bool,
}

impl SuiteReport {
    fn push(&mut self, name: &str, cases: u64, failures: Vec<String>) {
        self.pass &= failures.is_empty();
        self.checks.push(CheckResult {
            name: name.to_string(),
            cases,
            pass: failures.is_empty(),
            failures,
        });
    }
}

/// Checks the conflict-freedom statement on one grid: within one
/// checkerboard pattern, no two reading processes may resolve a defined
/// neighbor in common, and no reader may be another reader's neighbor.
fn conflict_failures<G, B>(dims: &GridDims, gamma: &G, beta: &B, out: &mut Vec<String>)
where
    G: Fn(u64, u64, &GridDims) -> Result<u64> + ?Sized,
    B: Fn(u64, u64, &GridDims) -> Result<Option<u64>> + ?Sized,
{
    let dim = dims.dim();
    let block = match index::block_size(dim) {
        Ok(b) => b,
        Err(e) => {
            out.push(format!("shape {:?}: {e}", dims.extents()));
            return;
        }
    };
    let center = index::center_compartment(dim).unwrap_or(0);
    let cells = dims.total() as usize;
    // Stamp arrays instead of per-pattern sets: one slot per process.
    let mut target_reader: Vec<u64> = vec![0; cells + 1];
    let mut reader_stamp: Vec<u64> = vec![0; cells + 1];
    let mut stamp = 0u64;
    for k in 1..=block {
        stamp += 1;
        let active = match index::checkerboard_dims(k, dims) {
            Ok((_, n)) => n,
            Err(e) => {
                out.push(format!("shape {:?}: pattern {k}: {e}", dims.extents()));
                continue;
            }
        };
        let mut readers: Vec<u64> = Vec::with_capacity(active as usize);
        for j in 1..=active {
            match gamma(k, j, dims) {
                Ok(w) if (w as usize) < reader_stamp.len() && w > 0 => readers.push(w),
                Ok(w) => out.push(format!(
                    "shape {:?}: pattern {k} activates process {w} outside the grid",
                    dims.extents()
                )),
                Err(e) => out.push(format!("shape {:?}: {e}", dims.extents())),
            }
        }
        for &w in &readers {
            reader_stamp[w as usize] = stamp;
        }
        for &w in &readers {
            for l in 1..=block {
                if l == center {
                    continue;
                }
                let target = match beta(w, l, dims) {
                    Ok(Some(t)) => t,
                    Ok(None) => continue,
                    Err(e) => {
                        out.push(format!("shape {:?}: beta({w},{l}): {e}", dims.extents()));
                        continue;
                    }
                };
                let slot = target as usize;
                if slot >= target_reader.len() {
                    out.push(format!(
                        "shape {:?}: pattern {k}: process {w} resolves neighbor {target} outside the grid",
                        dims.extents()
                    ));
                    continue;
                }
                if reader_stamp[slot] == stamp && target != w {
                    out.push(format!(
                        "shape {:?}: pattern {k}: process {w} reads from {target}, which reads simultaneously",
                        dims.extents()
                    ));
                }
                if target_reader[slot] == stamp * (cells as u64 + 1) + w {
                    // Same reader resolving the same target twice is a
                    // duplicated direction; flag it as well.
                    out.push(format!(
                        "shape {:?}: pattern {k}: process {w} reads {target} twice",
                        dims.extents()
                    ));
                } else if target_reader[slot] / (cells as u64 + 1) == stamp {
                    let other = target_reader[slot] % (cells as u64 + 1);
                    out.push(format!(
                        "shape {:?}: pattern {k}: processes {other} and {w} both read from {target}",
                        dims.extents()
                    ));
                } else {
                    target_reader[slot] = stamp * (cells as u64 + 1) + w;
                }
                if out.len() >= DIFF_CAP {
                    return;
                }
            }
        }
    }
}

/// Checks that the checkerboard patterns of one grid enumerate every
/// process exactly once.
fn partition_failures<G>(dims: &GridDims, gamma: &G, out: &mut Vec<String>)
where
    G: Fn(u64, u64, &GridDims) -> Result<u64> + ?Sized,
{
    let Ok(block) = index::block_size(dims.dim()) else { return };
    let cells = dims.total();
    let mut seen = vec![false; cells as usize + 1];
    let mut count = 0u64;
    for k in 1..=block {
        let Ok((_, active)) = index::checkerboard_dims(k, dims) else { continue };
        for j in 1..=active {
            match gamma(k, j, dims) {
                Ok(w) if 1 <= w && w <= cells => {
                    if seen[w as usize] {
                        out.push(format!(
                            "shape {:?}: process {w} appears in two patterns",
                            dims.extents()
                        ));
                    }
                    seen[w as usize] = true;
                    count += 1;
                }
                Ok(w) => out.push(format!(
                    "shape {:?}: pattern {k} names process {w} outside 1..={cells}",
                    dims.extents()
                )),
                Err(e) => out.push(format!("shape {:?}: {e}", dims.extents())),
            }
            if out.len() >= DIFF_CAP {
                return;
            }
        }
    }
    if count != cells {
        out.push(format!(
            "shape {:?}: patterns cover {count} of {cells} processes",
            dims.extents()
        ));
    }
}

/// Builds a small movement-heavy instance on the unit-cutoff grid with
/// the given shape. Positions are biased toward cell boundaries so the
/// border cases of redistribution get exercised, and they sit on a
/// dyadic lattice so every coordinate operation is exact.
fn walk_instance(dims: &GridDims, seed: u64) -> Result<Instance> {
    let dim = dims.dim();
    let extents = dims.extents();
    let min = vec![0.0; dim];
    let max: Vec<f64> = extents.iter().map(|&e| e as f64 - 0.5).collect();
    let domain = Domain::new(min, max)?;
    let mut params = MethodParams::new(MethodName::LatticeWalk, 1.0, 3);
    params.walk_seed = seed;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (2 * dims.total()).min(128);
    let mut particles = Vec::with_capacity(n as usize);
    for id in 0..n {
        let x: Vec<f64> = (0..dim)
            .map(|a| {
                let hi = extents[a] as f64 - 0.5;
                let pick = rng.gen_range(0..4u32);
                let raw = match pick {
                    // On a cell boundary, a hair below, a hair above, or
                    // anywhere on the coarse lattice.
                    0 => rng.gen_range(0..extents[a]) as f64,
                    1 => rng.gen_range(1..=extents[a]) as f64 - 1.0 / 1024.0,
                    2 => rng.gen_range(0..extents[a]) as f64 + 1.0 / 1024.0,
                    _ => rng.gen_range(0..(extents[a] * 4)) as f64 / 4.0,
                };
                raw.min(hi - 1.0 / 1024.0).max(0.0)
            })
            .collect();
        particles.push(Particle { id, x, props: Vec::new() });
    }
    let global = GlobalVar::new(1, 3);
    Ok(Instance {
        method: params,
        domain,
        state: State { global, particles },
    })
}

/// After the ghost exchange, every particle within the cutoff of any
/// center particle of a process must be locally available there.
fn ghost_completeness_failures(
    state: &DistributedState,
    all: &[Particle],
    cutoff: f64,
    label: &str,
    out: &mut Vec<String>,
) {
    let r2 = cutoff * cutoff;
    // Ids are dense and small here, so a stamp slot per id beats a set.
    let slots = all.iter().map(|p| p.id as usize + 1).max().unwrap_or(0);
    let mut available: Vec<u64> = vec![0; slots];
    let mut round = 0u64;
    for w in 1..=state.n_processes() {
        let center = state.process(w).center();
        if center.is_empty() {
            continue;
        }
        round += 1;
        for p in state.process(w).compartments.iter().flatten() {
            if let Some(slot) = available.get_mut(p.id as usize) {
                *slot = round;
            }
        }
        for q in all {
            if available[q.id as usize] == round {
                continue;
            }
            if center.iter().any(|p| dist2(&q.x, &p.x) <= r2) {
                out.push(format!(
                    "{label}: process {w} is missing neighbor particle {}",
                    q.id
                ));
                if out.len() >= DIFF_CAP {
                    return;
                }
            }
        }
    }
}

/// The same completeness statement, evaluated against a neighbor-resolve
/// function instead of a runtime exchange: the particles visible to `w`
/// are its own plus the centers of every resolved neighbor.
#[cfg(test)]
fn planned_ghost_failures<B>(
    state: &DistributedState,
    all: &[Particle],
    cutoff: f64,
    dims: &GridDims,
    beta: &B,
    label: &str,
    out: &mut Vec<String>,
) where
    B: Fn(u64, u64, &GridDims) -> Result<Option<u64>> + ?Sized,
{
    let Ok(block) = index::block_size(dims.dim()) else { return };
    let r2 = cutoff * cutoff;
    for w in 1..=state.n_processes() {
        let center = state.process(w).center();
        if center.is_empty() {
            continue;
        }
        let mut available: std::collections::HashSet<u64> =
            center.iter().map(|p| p.id).collect();
        for l in 1..=block {
            if let Ok(Some(src)) = beta(w, l, dims) {
                available.extend(state.process(src).center().iter().map(|p| p.id));
            }
        }
        for q in all {
            if !available.contains(&q.id) && center.iter().any(|p| dist2(&q.x, &p.x) <= r2) {
                out.push(format!(
                    "{label}: process {w} would miss neighbor particle {}",
                    q.id
                ));
                if out.len() >= DIFF_CAP {
                    return;
                }
            }
        }
    }
}

/// Runs one distributed transition phase by phase on a randomized
/// instance and records which pipeline guarantees broke.
struct PipelineFailures {
    ghost: Vec<String>,
    compartment: Vec<String>,
    border: Vec<String>,
    placement: Vec<String>,
}

fn pipeline_failures(dims: &GridDims, seed: u64) -> Result<PipelineFailures> {
    let mut fails = PipelineFailures {
        ghost: Vec::new(),
        compartment: Vec::new(),
        border: Vec::new(),
        placement: Vec::new(),
    };
    let label = format!("shape {:?}", dims.extents());
    let instance = walk_instance(dims, seed)?;
    let spec = methods::instantiate(&instance.method, &instance.domain)?;
    let grid = CellGrid::build(&instance.domain, spec.cutoff)?;
    debug_assert_eq!(grid.dims().extents(), dims.extents());
    let mut state = grid::distribute_initial(&instance, &grid)?;

    dist::copy_all(&mut state, &grid, ExecMode::Reference, None)?;
    ghost_completeness_failures(
        &state,
        &instance.state.particles,
        spec.cutoff,
        &label,
        &mut fails.ghost,
    );

    dist::step_all(&mut state, &spec, &grid, ExecMode::Reference)?;
    // Everything the centers now hold goes through the compartment map;
    // an escape would surface as an error here.
    if let Err(e) = dist::dist_all(&mut state, &grid, ExecMode::Reference) {
        fails.compartment.push(format!("{label}: {e}"));
        return Ok(fails);
    }

    for w in 1..=state.n_processes() {
        let compartments = &state.process(w).compartments;
        index::for_each_neighbor(w, grid.dims(), |l, neighbor| {
            if neighbor.is_none() && !compartments[(l - 1) as usize].is_empty() {
                fails.border.push(format!(
                    "{label}: process {w} holds particles in off-grid direction {l}"
                ));
            }
        })?;
    }

    dist::collect_all(&mut state, &grid, ExecMode::Reference, None)?;
    let slots = instance.state.particles.iter().map(|p| p.id as usize + 1).max().unwrap_or(0);
    let mut seen: Vec<u64> = vec![0; slots];
    for w in 1..=state.n_processes() {
        for p in state.process(w).center() {
            match grid::cell_of(&p.x, &grid) {
                Ok(cell) if cell == w => {}
                Ok(cell) => fails.placement.push(format!(
                    "{label}: particle {} sits on process {w} but its position names cell {cell}",
                    p.id
                )),
                Err(e) => fails.placement.push(format!("{label}: particle {}: {e}", p.id)),
            }
            match seen.get_mut(p.id as usize) {
                Some(count) => *count += 1,
                None => fails.placement.push(format!(
                    "{label}: collection produced unknown particle {}",
                    p.id
                )),
            }
        }
    }
    for p in &instance.state.particles {
        if seen[p.id as usize] != 1 {
            fails.placement.push(format!(
                "{label}: particle {} appears {} times after collection",
                p.id,
                seen[p.id as usize]
            ));
        }
    }
    Ok(fails)
}

/// Brute-forces the index and scheduling guarantees plus the pipeline
/// guarantees over every grid shape of one, two, and three dimensions
/// with at most `max_cells` cells, using seeded randomized instances for
/// the runtime checks.
pub fn lemma_suite(max_cells: u64, seed: u64) -> SuiteReport {
    let mut report = SuiteReport { checks: Vec::new(), pass: true };

    let rt = index_roundtrip(max_cells, 3);
    report.push("index maps invert each other", rt.indices, rt.failures.clone());

    let mut partition = Vec::new();
    let mut conflicts = Vec::new();
    let mut ghost = Vec::new();
    let mut compartment = Vec::new();
    let mut border = Vec::new();
    let mut placement = Vec::new();
    let mut shapes = 0u64;
    let mut neighbors: Vec<Option<u64>> = Vec::new();
    for dim in 1..=3 {
        let walk = for_each_shape(max_cells, dim, &mut |dims| {
            shapes += 1;
            if partition.len() < DIFF_CAP {
                partition_failures(dims, &index::active_process, &mut partition);
            }
            if conflicts.len() < DIFF_CAP {
                // One neighbor walk per shape; the conflict check then reads
                // the tabulated directions, the same resolution the exchange
                // phases run on.
                let block = index::block_size(dims.dim())? as usize;
                neighbors.clear();
                neighbors.resize(dims.total() as usize * block, None);
                for w in 1..=dims.total() {
                    let base = (w as usize - 1) * block;
                    index::for_each_neighbor(w, dims, |l, nb| {
                        neighbors[base + l as usize - 1] = nb;
                    })?;
                }
                let table = &neighbors;
                conflict_failures(
                    dims,
                    &index::active_process,
                    &move |w: u64, l: u64, _: &GridDims| {
                        Ok(table[(w as usize - 1) * block + l as usize - 1])
                    },
                    &mut conflicts,
                );
            }
            let mut f = pipeline_failures(dims, seed ^ dims.total().rotate_left(17) ^ dim as u64)?;
            ghost.append(&mut f.ghost);
            compartment.append(&mut f.compartment);
            border.append(&mut f.border);
            placement.append(&mut f.placement);
            Ok(())
        });
        if let Err(e) = walk {
            report.push("pipeline sweep", shapes, vec![format!("dimension {dim}: {e}")]);
            return report;
        }
    }
    report.push("checkerboard patterns cover every process once", shapes, partition);
    report.push("no two simultaneous reads share a source", shapes, conflicts);
    report.push("ghost layers hold every interaction partner", shapes, ghost);
    report.push("bounded movement stays within the compartment map", shapes, compartment);
    report.push("off-grid directions stay empty", shapes, border);
    report.push("collection restores cell placement exactly", shapes, placement);
    report
}
