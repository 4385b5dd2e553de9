//! End-to-end acceptance gate. Each test prints one `[Ann] name: PASS|FAIL`
//! line for its criterion; run with `--nocapture` to see the lines of
//! passing tests too. Tolerances and sweep sizes are pinned here on
//! purpose: loosening them is a contract change, not a test fix.

use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use pm_core::complexity::{self, ComplexityParams, SpeedupModel};
use pm_core::methods::{self, MethodName};
use pm_core::verify::{self, Tolerance};
use pm_core::{
    audit_communications, index, parallel_run, run, CellGrid, CommLog, DistributedState, Domain,
    ExecMode, GlobalVar, Instance, MethodParams, ParallelOptions, RunOptions, State,
};

/// Comparison used for the float method; exact methods compare at zero.
const FLOAT_TOL: Tolerance = Tolerance {
    relative: 1e-9,
    absolute: 1e-12,
};

const SWEEP_SEED: u64 = 0x5eed_acce;
const INSTANCES_PER_DIM: usize = 50;
const MAX_CELLS_PER_AXIS: u64 = 5;
const MAX_PARTICLES: u64 = 200;
const MAX_TRANSITIONS: u64 = 20;

fn report(n: u32, name: &str, pass: bool, detail: &str) {
    println!("[A{n:02}] {name}: {}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "[A{n:02}] {name}: {detail}");
}

/// The shared randomized sweep: 50 instances per dimension with grids up
/// to 5^d cells, up to 200 particles, and at most 20 transitions.
fn sweep_instances(name: MethodName, d: usize) -> Vec<Instance> {
    let tag = match name {
        MethodName::ExchangeDiffusion => 1u64,
        MethodName::LatticeWalk => 2,
        MethodName::SphDensity => 3,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(SWEEP_SEED ^ ((d as u64) << 32) ^ tag);
    (0..INSTANCES_PER_DIM)
        .map(|_| {
            let max: Vec<f64> = (0..d)
                .map(|_| rng.gen_range(1..=MAX_CELLS_PER_AXIS) as f64 - 0.5)
                .collect();
            let domain = Domain::new(vec![0.0; d], max).unwrap();
            let grid = CellGrid::build(&domain, 1.0).unwrap();
            let mut params = MethodParams::new(name, 1.0, rng.gen_range(1..=MAX_TRANSITIONS));
            params.walk_seed = rng.gen();
            if name == MethodName::SphDensity {
                params.speed = 0.5;
            }
            let n = rng.gen_range(0..=MAX_PARTICLES) as usize;
            methods::random_instance(&params, rng.gen(), &grid, n).unwrap()
        })
        .collect()
}

fn equivalence_sweep(names: &[MethodName], tol: Tolerance) -> (bool, String, u64) {
    let mut detail = String::new();
    let mut pass = true;
    let mut cases = 0u64;
    for &name in names {
        for d in 1..=3usize {
            for (i, inst) in sweep_instances(name, d).iter().enumerate() {
                cases += 1;
                let s = run(inst, &RunOptions::default()).unwrap();
                let p = parallel_run(inst, ExecMode::Reference, &ParallelOptions::default())
                    .unwrap();
                let rep = verify::equivalent_up_to_permutation(&s.state, &p.state, tol);
                if !(rep.matches && s.states_visited == p.states_visited) && detail.len() < 2000 {
                    pass = false;
                    let _ = writeln!(
                        detail,
                        "{name} d={d} instance {i}: T {} vs {}, diffs {:?}",
                        s.states_visited, p.states_visited, rep.particle_diffs
                    );
                }
            }
        }
    }
    (pass, detail, cases)
}

#[test]
fn a01_exact_methods_agree_bit_for_bit() {
    let started = Instant::now();
    let (mut pass, mut detail, cases) = equivalence_sweep(
        &[MethodName::ExchangeDiffusion, MethodName::LatticeWalk],
        Tolerance::EXACT,
    );
    assert_eq!(cases, 300);
    let elapsed = started.elapsed();
    if elapsed.as_secs() >= 300 {
        pass = false;
        let _ = writeln!(detail, "sweep took {elapsed:?}, budget is 5 minutes");
    }
    report(
        1,
        "exact methods: distributed equals sequential bit for bit",
        pass,
        &detail,
    );
}

#[test]
fn a02_float_method_agrees_within_tolerance() {
    let (pass, detail, cases) = equivalence_sweep(&[MethodName::SphDensity], FLOAT_TOL);
    assert_eq!(cases, 150);
    report(
        2,
        "float method: distributed equals sequential within tolerance",
        pass,
        &detail,
    );
}

#[test]
fn a03_index_maps_invert_on_every_small_grid() {
    let r = verify::index_roundtrip(10_000, 4);
    let pass = r.pass && r.indices > 0;
    report(
        3,
        "index maps invert on every grid up to 10^4 cells",
        pass,
        &format!("{} shapes, {} indices, failures {:?}", r.shapes, r.indices, r.failures),
    );
}

#[test]
fn a04_communication_audit_is_conflict_free() {
    let mut detail = String::new();
    let mut pass = true;
    let mut shapes = 0u64;
    for dim in 1..=3usize {
        let block = index::block_size(dim).unwrap();
        let walked = verify::for_each_shape(729, dim, &mut |dims| {
            shapes += 1;
            let n = dims.total();
            let domain = Domain::new(
                vec![0.0; dim],
                dims.extents().iter().map(|&e| e as f64 - 0.5).collect(),
            )?;
            let grid = CellGrid::build(&domain, 1.0)?;
            assert_eq!(grid.dims().extents(), dims.extents());
            let mut state = DistributedState::new(&GlobalVar::new(1, 2), n, dim)?;
            let mut log = CommLog::default();
            pm_core::dist::copy_all(&mut state, &grid, ExecMode::Reference, Some(&mut log))?;
            pm_core::dist::collect_all(&mut state, &grid, ExecMode::Reference, Some(&mut log))?;
            let audit = audit_communications(&log);
            if !(audit.pass && log.phases() == 2 * block) && detail.len() < 2000 {
                pass = false;
                let _ = writeln!(
                    detail,
                    "shape {:?}: phases {}, violations {:?}",
                    dims.extents(),
                    log.phases(),
                    audit.violations
                );
            }
            Ok(())
        });
        walked.unwrap();
    }
    report(
        4,
        "checkerboard exchanges never overlap their pulls",
        pass,
        &format!("{shapes} shapes; {detail}"),
    );
}

#[test]
fn a05_structural_suite_over_the_grid_family() {
    let started = Instant::now();
    let suite = verify::lemma_suite(729, 0xacce55);
    let elapsed = started.elapsed();
    let mut detail = String::new();
    for check in &suite.checks {
        let _ = writeln!(
            detail,
            "{}: {} cases, {}",
            check.name,
            check.cases,
            if check.pass { "ok" } else { "FAILED" }
        );
        for f in check.failures.iter().take(5) {
            let _ = writeln!(detail, "  {f}");
        }
    }
    let in_budget = elapsed.as_secs() < 60;
    if !in_budget {
        let _ = writeln!(detail, "suite took {elapsed:?}, budget is 60 s");
    }
    report(
        5,
        "grid family structural suite",
        suite.pass && in_budget,
        &detail,
    );
}

#[test]
fn a06_schedule_reaches_every_process_exactly_once() {
    let mut detail = String::new();
    let mut pass = true;
    let mut shapes = 0u64;
    for dim in 1..=4usize {
        let block = index::block_size(dim).unwrap();
        verify::for_each_shape(729, dim, &mut |dims| {
            shapes += 1;
            let mut seen = vec![false; dims.total() as usize];
            for k in 1..=block {
                let (_, active) = index::checkerboard_dims(k, dims)?;
                for j in 1..=active {
                    let w = index::active_process(k, j, dims)?;
                    let slot = &mut seen[(w - 1) as usize];
                    if *slot {
                        pass = false;
                        let _ = writeln!(detail, "shape {:?}: process {w} twice", dims.extents());
                    }
                    *slot = true;
                }
            }
            if !seen.iter().all(|&s| s) {
                pass = false;
                let _ = writeln!(detail, "shape {:?}: uncovered process", dims.extents());
            }
            Ok(())
        })
        .unwrap();
    }
    report(
        6,
        "checkerboard schedule reaches every process exactly once",
        pass,
        &format!("{shapes} shapes; {detail}"),
    );
}

#[test]
fn a07_work_counts_saturate_beyond_one_processor_per_cell() {
    let mut detail = String::new();
    let mut pass = true;
    for n_cells in [9u64, 36, 900] {
        let p = ComplexityParams {
            n_cells,
            ..ComplexityParams::default()
        };
        for n in n_cells + 1..=2 * n_cells {
            let calc = complexity::xi_calc(n, &p).unwrap();
            let com = complexity::xi_com(n, &p).unwrap();
            if (calc, com) != (1, 9) && detail.len() < 1000 {
                pass = false;
                let _ = writeln!(detail, "cells {n_cells}, n {n}: calc {calc}, com {com}");
            }
        }
    }
    report(
        7,
        "work counts saturate once processors outnumber cells",
        pass,
        &detail,
    );
}

#[test]
fn a08_speedup_curves_have_the_right_shapes() {
    let p = ComplexityParams::default();
    let mut detail = String::new();
    let mut pass = true;

    let amdahl: Vec<f64> = (1..=1000)
        .map(|n| complexity::speedup(SpeedupModel::Amdahl, n, &p).unwrap())
        .collect();
    let non_decreasing = amdahl.windows(2).all(|w| w[1] >= w[0]);
    let has_plateau = amdahl.windows(2).any(|w| w[1] == w[0]);
    let has_rise = amdahl.windows(2).any(|w| w[1] > w[0]);
    let s900 = complexity::speedup(SpeedupModel::Amdahl, 900, &p).unwrap();
    let flat_after = [1000u64, 2000, 5000]
        .iter()
        .all(|&n| complexity::speedup(SpeedupModel::Amdahl, n, &p).unwrap() == s900);
    if !(non_decreasing && has_plateau && has_rise && flat_after) {
        pass = false;
        let _ = writeln!(
            detail,
            "amdahl: monotone {non_decreasing}, plateau {has_plateau}, rise {has_rise}, flat beyond the cell count {flat_after}"
        );
    }

    let gustafson: Vec<f64> = (1..=1000)
        .map(|n| complexity::speedup(SpeedupModel::Gustafson, n, &p).unwrap())
        .collect();
    let g_monotone = gustafson.windows(2).all(|w| w[1] >= w[0]);
    let g900 = gustafson[899];
    if !(g_monotone && g900 > 0.5 * 900.0 / 9.0) {
        pass = false;
        let _ = writeln!(detail, "gustafson: monotone {g_monotone}, value at 900 {g900}");
    }

    let s1 = complexity::speedup(SpeedupModel::Cell, 10_000, &p).unwrap();
    let s2 = complexity::speedup(SpeedupModel::Cell, 20_000, &p).unwrap();
    let ratio = s2 / s1;
    if !(1.8..=2.2).contains(&ratio) {
        pass = false;
        let _ = writeln!(detail, "cell speedup ratio at doubled load: {ratio}");
    }

    report(8, "speedup curves match their coarse shapes", pass, &detail);
}

fn state_digest(global: &GlobalVar, mut particles: Vec<pm_core::Particle>) -> [u8; 32] {
    particles.sort_by_key(|p| p.id);
    let canon = State {
        global: global.clone(),
        particles,
    };
    let bytes = serde_json::to_vec(&canon).unwrap();
    Sha256::digest(&bytes).into()
}

#[test]
fn a09_execution_modes_produce_identical_digests() {
    let mut detail = String::new();
    let mut pass = true;
    let mut reference = Sha256::new();
    let mut concurrent = Sha256::new();
    for name in [MethodName::ExchangeDiffusion, MethodName::LatticeWalk] {
        for d in 1..=3usize {
            for (i, inst) in sweep_instances(name, d).iter().enumerate() {
                let opts = ParallelOptions::default();
                let a = parallel_run(inst, ExecMode::Reference, &opts).unwrap();
                let b = parallel_run(inst, ExecMode::Concurrent, &opts).unwrap();
                let da = state_digest(a.state.global(), a.state.merged_particles());
                let db = state_digest(b.state.global(), b.state.merged_particles());
                reference.update(da);
                concurrent.update(db);
                if (da != db || a.state != b.state) && detail.len() < 1000 {
                    pass = false;
                    let _ = writeln!(detail, "{name} d={d} instance {i}: modes diverge");
                }
            }
        }
    }
    let (ra, rb) = (reference.finalize(), concurrent.finalize());
    if ra != rb {
        pass = false;
        let _ = writeln!(detail, "sweep digests {ra:x} vs {rb:x}");
    }
    report(
        9,
        "execution modes produce identical digests",
        pass,
        &detail,
    );
}

#[test]
fn a10_interaction_laws_hold_and_mutants_are_caught() {
    let mut detail = String::new();
    let mut pass = true;
    let domain = Domain::new(vec![0.0, 0.0], vec![4.0, 4.0]).unwrap();
    for info in methods::list_methods() {
        let mut params = MethodParams::new(info.name, 1.0, 5);
        if info.name == MethodName::SphDensity {
            params.speed = 0.5;
        }
        let rep = verify::check_interaction_laws(&params, &domain, 0xbead + info.name as u64, 10_000)
            .unwrap();
        if !rep.pass {
            pass = false;
            let _ = writeln!(detail, "{}: {:?}", info.name, rep.counterexamples);
        }
    }

    // A deliberately order-dependent interaction: it reads the partner's
    // accumulator, so what a partner donates depends on interactions the
    // partner received earlier. The checker must reject it.
    use pm_core::Particle;
    use pm_core::PropValue;
    use std::sync::Arc;
    let params = MethodParams::new(MethodName::ExchangeDiffusion, 1.0, 5);
    let mut mutant = methods::instantiate(&params, &domain).unwrap();
    mutant.interact = Arc::new(|_: &GlobalVar, pj: &Particle, pk: &Particle| {
        let mut q = pj.clone();
        q.props[1] = PropValue::Int(q.props[1].as_int() + pk.props[0].as_int() + pk.props[1].as_int());
        q.props[2] = PropValue::Int(q.props[2].as_int() + 1);
        q
    });
    let mut next_id = 0u64;
    let mut sample = |rng: &mut ChaCha8Rng| {
        let mut particle = |rng: &mut ChaCha8Rng| {
            next_id += 1;
            Particle::new(
                next_id,
                vec![rng.gen_range(0.0..4.0), rng.gen_range(0.0..4.0)],
                vec![
                    PropValue::Int(rng.gen_range(-100..=100)),
                    PropValue::Int(rng.gen_range(-100..=100)),
                    PropValue::Int(rng.gen_range(0..=3)),
                ],
            )
        };
        (
            GlobalVar::new(1, 5),
            particle(rng),
            particle(rng),
            particle(rng),
        )
    };
    let caught = !verify::check_interaction_laws_with(
        &mutant,
        Tolerance::EXACT,
        0xfeed,
        10_000,
        &mut sample,
    )
    .pass;
    if !caught {
        pass = false;
        let _ = writeln!(detail, "planted order-dependent interaction went unnoticed");
    }

    report(
        10,
        "interaction laws hold and a planted mutant is caught",
        pass,
        &detail,
    );
}
