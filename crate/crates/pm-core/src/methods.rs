//! Built-in methods. Each one instantiates an [`AlgorithmSpec`] whose
//! interaction is a pull that reads only the partner's carried fields and
//! accumulates into the folded particle's own accumulator fields, so fold
//! order never matters for the exact (integer) methods.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::CellGrid;
use crate::model::{
    dist2, AlgorithmSpec, Domain, GlobalVar, Instance, Particle, PropValue, State,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MethodName {
    ExchangeDiffusion,
    LatticeWalk,
    SphDensity,
}

impl fmt::Display for MethodName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MethodName::ExchangeDiffusion => "ExchangeDiffusion",
            MethodName::LatticeWalk => "LatticeWalk",
            MethodName::SphDensity => "SphDensity",
        };
        f.write_str(s)
    }
}

impl FromStr for MethodName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ExchangeDiffusion" => Ok(MethodName::ExchangeDiffusion),
            "LatticeWalk" => Ok(MethodName::LatticeWalk),
            "SphDensity" => Ok(MethodName::SphDensity),
            other => Err(Error::UnknownMethod(other.into())),
        }
    }
}

/// Everything needed to rebuild a built-in method's [`AlgorithmSpec`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodParams {
    pub name: MethodName,
    pub cutoff: f64,
    /// Stop bound copied into freshly generated instances.
    pub t_max: u64,
    /// Seed for the hash-derived movement of LatticeWalk and of the moving
    /// SphDensity variant.
    #[serde(default)]
    pub walk_seed: u64,
    /// Particle mass drawn for generated SphDensity instances.
    #[serde(default = "default_mass")]
    pub mass: f64,
    /// Drift factor in [0, 1] for SphDensity; 0 keeps particles stationary.
    #[serde(default)]
    pub speed: f64,
}

fn default_mass() -> f64 {
    1.0
}

impl MethodParams {
    pub fn new(name: MethodName, cutoff: f64, t_max: u64) -> Self {
        MethodParams {
            name,
            cutoff,
            t_max,
            walk_seed: 0,
            mass: 1.0,
            speed: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.cutoff.is_finite() || self.cutoff <= 0.0 {
            return Err(Error::InvalidCutoff(self.cutoff));
        }
        if self.t_max == 0 {
            return Err(Error::InvalidParams("t_max must be at least 1".into()));
        }
        if self.name == MethodName::SphDensity {
            if !self.mass.is_finite() || self.mass <= 0.0 {
                return Err(Error::InvalidParams(format!(
                    "mass {} must be finite and positive",
                    self.mass
                )));
            }
            if !self.speed.is_finite() || !(0.0..=1.0).contains(&self.speed) {
                return Err(Error::InvalidParams(format!(
                    "speed {} must lie in [0, 1]",
                    self.speed
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PropField {
    pub name: &'static str,
    pub float: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct MethodInfo {
    pub name: MethodName,
    /// Integer state, bit-reproducible under any interaction order.
    pub exact: bool,
    /// Whether the evolution map can move particles.
    pub moves: bool,
    pub fields: &'static [PropField],
    pub summary: &'static str,
}

const EXCHANGE_FIELDS: &[PropField] = &[
    PropField { name: "h", float: false },
    PropField { name: "a", float: false },
    PropField { name: "c", float: false },
];

const WALK_FIELDS: &[PropField] = &[];

const SPH_FIELDS: &[PropField] = &[
    PropField { name: "m", float: true },
    PropField { name: "rho", float: true },
    PropField { name: "rho_acc", float: true },
];

const METHODS: &[MethodInfo] = &[
    MethodInfo {
        name: MethodName::ExchangeDiffusion,
        exact: true,
        moves: false,
        fields: EXCHANGE_FIELDS,
        summary: "integer field exchange: neighbors accumulate into a, c; \
                  evolve applies h <- h + (a - c*h) in wrapping arithmetic",
    },
    MethodInfo {
        name: MethodName::LatticeWalk,
        exact: true,
        moves: true,
        fields: WALK_FIELDS,
        summary: "hash-driven walk on an eighth-cutoff lattice, clamped to \
                  the domain, never farther than one cutoff per transition",
    },
    MethodInfo {
        name: MethodName::SphDensity,
        exact: false,
        moves: true,
        fields: SPH_FIELDS,
        summary: "kernel density estimate: rho_acc += m * (1 - r/r_c)^2 \
                  over neighbors; evolve publishes rho and clears rho_acc",
    },
];

/// The built-in methods in a stable order.
pub fn list_methods() -> &'static [MethodInfo] {
    METHODS
}

pub fn method_info(name: MethodName) -> &'static MethodInfo {
    METHODS.iter().find(|m| m.name == name).unwrap()
}

// Property slots per method, in declared field order.
const EX_H: usize = 0;
const EX_A: usize = 1;
const EX_C: usize = 2;
const SPH_M: usize = 0;
const SPH_RHO: usize = 1;
const SPH_ACC: usize = 2;

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Movement code in -4..=4, a pure function of its inputs. Multiplied by an
/// eighth of the cutoff this keeps every axis within half a cutoff, so the
/// full displacement stays within the cutoff for up to four axes.
fn lattice_code(seed: u64, id: u64, t: u64, axis: usize) -> i64 {
    let h = mix64(mix64(mix64(mix64(seed) ^ id) ^ t) ^ axis as u64);
    (h % 9) as i64 - 4
}

/// Clamp one axis into [lo, hi), stepping back by `grain` from the open end.
/// `grain` is at most an eighth of the cutoff, so clamping never enlarges a
/// displacement beyond the per-axis half-cutoff bound.
fn clamp_axis(v: f64, lo: f64, hi: f64, grain: f64) -> f64 {
    if v < lo {
        lo
    } else if v >= hi {
        (hi - grain).max(lo)
    } else {
        v
    }
}

fn walk_position(
    x: &[f64],
    seed: u64,
    id: u64,
    t: u64,
    scale: f64,
    domain: &Domain,
    cutoff: f64,
) -> Vec<f64> {
    let grain = cutoff / 8.0;
    x.iter()
        .enumerate()
        .map(|(axis, &c)| {
            let code = lattice_code(seed, id, t, axis) as f64;
            clamp_axis(
                c + code * scale,
                domain.min[axis],
                domain.max[axis],
                grain,
            )
        })
        .collect()
}

fn tick(g: &GlobalVar) -> GlobalVar {
    GlobalVar {
        t: g.t + 1,
        t_max: g.t_max,
        extras: g.extras.clone(),
    }
}

/// Builds the algorithm for a built-in method over a fixed domain. The
/// domain is captured because the evolution maps clamp positions into it.
pub fn instantiate(params: &MethodParams, domain: &Domain) -> Result<AlgorithmSpec> {
    params.validate()?;
    domain.validate()?;
    let cutoff = params.cutoff;
    let omega: crate::model::OmegaFn = Arc::new(|_: &GlobalVar, pk: &Particle, pj: &Particle| {
        pk.id != pj.id
    });
    let stop: crate::model::StopFn = Arc::new(|g: &GlobalVar| g.t >= g.t_max);
    let evolve_global: crate::model::EvolveGlobalFn = Arc::new(tick);

    let spec = match params.name {
        MethodName::ExchangeDiffusion => {
            // Wrapping arithmetic keeps the exchange closed under any
            // neighbor count: the update diverges in dense cells, and the
            // wrapped ring stays commutative so fold order still cancels.
            let interact: crate::model::InteractFn =
                Arc::new(|_: &GlobalVar, pj: &Particle, pk: &Particle| {
                    let mut q = pj.clone();
                    q.props[EX_A] = PropValue::Int(
                        q.props[EX_A].as_int().wrapping_add(pk.props[EX_H].as_int()),
                    );
                    q.props[EX_C] = PropValue::Int(q.props[EX_C].as_int().wrapping_add(1));
                    q
                });
            let evolve: crate::model::EvolveFn = Arc::new(|_: &GlobalVar, p: &Particle| {
                let mut q = p.clone();
                let h = q.props[EX_H].as_int();
                let a = q.props[EX_A].as_int();
                let c = q.props[EX_C].as_int();
                q.props[EX_H] = PropValue::Int(h.wrapping_add(a.wrapping_sub(c.wrapping_mul(h))));
                q.props[EX_A] = PropValue::Int(0);
                q.props[EX_C] = PropValue::Int(0);
                vec![q]
            });
            AlgorithmSpec {
                cutoff,
                omega,
                stop,
                interact,
                evolve,
                evolve_global,
            }
        }
        MethodName::LatticeWalk => {
            let interact: crate::model::InteractFn =
                Arc::new(|_: &GlobalVar, pj: &Particle, _: &Particle| pj.clone());
            let seed = params.walk_seed;
            let dom = domain.clone();
            let evolve: crate::model::EvolveFn = Arc::new(move |g: &GlobalVar, p: &Particle| {
                let mut q = p.clone();
                q.x = walk_position(&p.x, seed, p.id, g.t, cutoff / 8.0, &dom, cutoff);
                vec![q]
            });
            AlgorithmSpec {
                cutoff,
                omega,
                stop,
                interact,
                evolve,
                evolve_global,
            }
        }
        MethodName::SphDensity => {
            let interact: crate::model::InteractFn =
                Arc::new(move |_: &GlobalVar, pj: &Particle, pk: &Particle| {
                    let mut q = pj.clone();
                    let r = dist2(&q.x, &pk.x).sqrt();
                    let w = 1.0 - r / cutoff;
                    q.props[SPH_ACC] =
                        PropValue::Float(q.props[SPH_ACC].as_float() + pk.props[SPH_M].as_float() * w * w);
                    q
                });
            let seed = params.walk_seed;
            let speed = params.speed;
            let dom = domain.clone();
            let evolve: crate::model::EvolveFn = Arc::new(move |g: &GlobalVar, p: &Particle| {
                let mut q = p.clone();
                q.props[SPH_RHO] = q.props[SPH_ACC];
                q.props[SPH_ACC] = PropValue::Float(0.0);
                if speed > 0.0 {
                    q.x = walk_position(
                        &p.x,
                        seed,
                        p.id,
                        g.t,
                        speed * (cutoff / 8.0),
                        &dom,
                        cutoff,
                    );
                }
                vec![q]
            });
            AlgorithmSpec {
                cutoff,
                omega,
                stop,
                interact,
                evolve,
                evolve_global,
            }
        }
    };
    Ok(spec)
}

/// True when `v` sits on the 2^-32 lattice with magnitude at most 2^20.
/// Sums and differences of such values stay exact in doubles, which the
/// exact methods rely on for reproducible cell assignment.
pub fn dyadic_aligned(v: f64) -> bool {
    const SCALE: f64 = 4_294_967_296.0; // 2^32
    const LIMIT: f64 = 1_048_576.0; // 2^20
    v.is_finite() && v.abs() <= LIMIT && (v * SCALE).fract() == 0.0
}

/// Method-aware instance checks: property schema, parameter ranges, lattice
/// alignment for exact methods, and the dimension cap for moving methods.
pub fn validate_instance(instance: &Instance) -> Result<()> {
    let params = &instance.method;
    params.validate()?;
    let info = method_info(params.name);
    let d = instance.dim();
    if info.moves || params.speed > 0.0 {
        // Per-axis displacements reach half a cutoff; beyond four axes the
        // combined displacement could exceed the cutoff.
        if d > 4 {
            return Err(Error::InvalidParams(format!(
                "{} moves particles and supports at most 4 dimensions, got {d}",
                params.name
            )));
        }
    }
    if info.exact {
        for (axis, (&lo, &hi)) in instance
            .domain
            .min
            .iter()
            .zip(&instance.domain.max)
            .enumerate()
        {
            if !dyadic_aligned(lo) || !dyadic_aligned(hi) {
                return Err(Error::InvalidInstance(format!(
                    "exact method {} needs domain bounds on the 2^-32 lattice, axis {axis} is [{lo}, {hi})",
                    params.name
                )));
            }
        }
        if !dyadic_aligned(params.cutoff) {
            return Err(Error::InvalidInstance(format!(
                "exact method {} needs a cutoff on the 2^-32 lattice, got {}",
                params.name, params.cutoff
            )));
        }
    }
    for p in &instance.state.particles {
        if p.props.len() != info.fields.len() {
            return Err(Error::InvalidInstance(format!(
                "particle {} carries {} properties, {} expects {}",
                p.id,
                p.props.len(),
                params.name,
                info.fields.len()
            )));
        }
        for (field, value) in info.fields.iter().zip(&p.props) {
            let ok = match value {
                PropValue::Int(_) => !field.float,
                PropValue::Float(_) => field.float,
            };
            if !ok {
                return Err(Error::InvalidInstance(format!(
                    "particle {} property '{}' has the wrong kind for {}",
                    p.id, field.name, params.name
                )));
            }
        }
        if info.exact {
            for &c in &p.x {
                if !dyadic_aligned(c) {
                    return Err(Error::InvalidInstance(format!(
                        "exact method {} needs positions on the 2^-32 lattice, particle {} is at {:?}",
                        params.name, p.id, p.x
                    )));
                }
            }
        }
    }
    Ok(())
}

fn sample_position(rng: &mut ChaCha8Rng, domain: &Domain) -> Vec<f64> {
    domain
        .min
        .iter()
        .zip(&domain.max)
        .map(|(&lo, &hi)| {
            // 16 fractional bits keep positions on a dyadic lattice whenever
            // the domain bounds are, and strictly below the open end.
            let k = rng.gen_range(0..1u32 << 16);
            lo + (k as f64 / 65536.0) * (hi - lo)
        })
        .collect()
}

pub fn initial_props(params: &MethodParams, rng: &mut ChaCha8Rng) -> Vec<PropValue> {
    match params.name {
        MethodName::ExchangeDiffusion => vec![
            PropValue::Int(rng.gen_range(0..=100)),
            PropValue::Int(0),
            PropValue::Int(0),
        ],
        MethodName::LatticeWalk => Vec::new(),
        MethodName::SphDensity => vec![
            PropValue::Float(rng.gen_range(1..=8) as f64 * 0.25 * params.mass),
            PropValue::Float(0.0),
            PropValue::Float(0.0),
        ],
    }
}

/// Deterministically generates an instance on the grid's domain: positions
/// on a 2^-16 sub-lattice of each axis, ids 0..n, clock at 1.
pub fn random_instance(
    params: &MethodParams,
    seed: u64,
    grid: &CellGrid,
    n_particles: usize,
) -> Result<Instance> {
    params.validate()?;
    if params.cutoff != grid.cutoff() {
        return Err(Error::InvalidParams(format!(
            "cutoff {} differs from the grid's {}",
            params.cutoff,
            grid.cutoff()
        )));
    }
    let domain = grid.domain().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let particles = (0..n_particles as u64)
        .map(|id| {
            let x = sample_position(&mut rng, &domain);
            let props = initial_props(params, &mut rng);
            Particle::new(id, x, props)
        })
        .collect();
    let instance = Instance {
        method: params.clone(),
        domain,
        state: State {
            global: GlobalVar::new(1, params.t_max),
            particles,
        },
    };
    instance.validate()?;
    validate_instance(&instance)?;
    Ok(instance)
}
