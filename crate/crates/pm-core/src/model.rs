//! State types shared by both interpreters, and the algorithm definition a
//! method instantiates: cutoff radius, neighborhood predicate, stop
//! condition, pairwise interaction and the two evolution maps.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::methods::MethodParams;

/// A named scalar carried by a particle or by the global variable. Exact
/// methods keep their state in `Int` so results are independent of the order
/// interactions fold in; `Float` state is compared under a tolerance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PropValue {
    Int(i64),
    Float(f64),
}

impl PropValue {
    pub fn as_int(self) -> i64 {
        match self {
            PropValue::Int(v) => v,
            PropValue::Float(v) => panic!("expected integer property, found float {v}"),
        }
    }

    pub fn as_float(self) -> f64 {
        match self {
            PropValue::Float(v) => v,
            PropValue::Int(v) => panic!("expected float property, found integer {v}"),
        }
    }

    /// Bit-level equality: integers compare by value, floats by bit pattern.
    pub fn bits_eq(self, other: PropValue) -> bool {
        match (self, other) {
            (PropValue::Int(a), PropValue::Int(b)) => a == b,
            (PropValue::Float(a), PropValue::Float(b)) => a.to_bits() == b.to_bits(),
            _ => false,
        }
    }
}

impl fmt::Display for PropValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropValue::Int(v) => write!(f, "{v}"),
            PropValue::Float(v) => write!(f, "{v:?}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub id: u64,
    /// Position, one component per axis.
    pub x: Vec<f64>,
    /// Method-defined properties in the method's declared field order.
    pub props: Vec<PropValue>,
}

impl Particle {
    pub fn new(id: u64, x: Vec<f64>, props: Vec<PropValue>) -> Self {
        Particle { id, x, props }
    }
}

/// The global variable of a state: a transition counter starting at 1, the
/// stop bound read by the built-in stop conditions, and method-defined
/// extras. Particle evolution cannot touch it; only the global evolution map
/// replaces it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalVar {
    pub t: u64,
    pub t_max: u64,
    #[serde(default)]
    pub extras: Vec<PropValue>,
}

impl GlobalVar {
    pub fn new(t: u64, t_max: u64) -> Self {
        GlobalVar {
            t,
            t_max,
            extras: Vec::new(),
        }
    }
}

/// One state of a computation: the global variable and the particle tuple.
/// Particle order is meaningful to the interpreters but never to results,
/// which are compared id-paired.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub global: GlobalVar,
    pub particles: Vec<Particle>,
}

/// Half-open axis-aligned box `[min, max)` containing every particle
/// position at every state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Domain {
    pub fn new(min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        let d = Domain { min, max };
        d.validate()?;
        Ok(d)
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.min.len() != self.max.len() {
            return Err(Error::InvalidDomain(format!(
                "min has {} components, max has {}",
                self.min.len(),
                self.max.len()
            )));
        }
        if self.min.is_empty() || self.min.len() > crate::index::MAX_DIM {
            return Err(Error::UnsupportedDimension {
                dim: self.min.len(),
                max: crate::index::MAX_DIM,
            });
        }
        for (axis, (&lo, &hi)) in self.min.iter().zip(&self.max).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(Error::InvalidDomain(format!(
                    "axis {axis}: bounds [{lo}, {hi}) are not a nonempty finite interval"
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.min.len()
            && x.iter()
                .zip(self.min.iter().zip(&self.max))
                .all(|(&c, (&lo, &hi))| c >= lo && c < hi)
    }
}

pub type OmegaFn = Arc<dyn Fn(&GlobalVar, &Particle, &Particle) -> bool + Send + Sync>;
pub type StopFn = Arc<dyn Fn(&GlobalVar) -> bool + Send + Sync>;
pub type InteractFn = Arc<dyn Fn(&GlobalVar, &Particle, &Particle) -> Particle + Send + Sync>;
pub type EvolveFn = Arc<dyn Fn(&GlobalVar, &Particle) -> Vec<Particle> + Send + Sync>;
pub type EvolveGlobalFn = Arc<dyn Fn(&GlobalVar) -> GlobalVar + Send + Sync>;

/// A fully instantiated method. Neighborhoods are always generated from the
/// cutoff radius and the `omega` predicate; methods never supply their own
/// neighborhood function. `interact(g, p, q)` returns the updated `p` only,
/// reading `q` but never changing it, which keeps every interaction a pull.
#[derive(Clone)]
pub struct AlgorithmSpec {
    pub cutoff: f64,
    pub omega: OmegaFn,
    pub stop: StopFn,
    pub interact: InteractFn,
    pub evolve: EvolveFn,
    pub evolve_global: EvolveGlobalFn,
}

impl fmt::Debug for AlgorithmSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AlgorithmSpec")
            .field("cutoff", &self.cutoff)
            .finish_non_exhaustive()
    }
}

/// A runnable problem: the method parameters (enough to rebuild the
/// [`AlgorithmSpec`]), the domain, and the initial state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub method: MethodParams,
    pub domain: Domain,
    pub state: State,
}

impl Instance {
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Structural checks independent of the method: domain shape, position
    /// arity, containment, positive clock, unique ids.
    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        if self.state.global.t == 0 {
            return Err(Error::InvalidInstance(
                "transition counter t must be at least 1".into(),
            ));
        }
        let mut ids: Vec<u64> = self.state.particles.iter().map(|p| p.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInstance("duplicate particle ids".into()));
        }
        for p in &self.state.particles {
            if p.x.len() != self.dim() {
                return Err(Error::InvalidInstance(format!(
                    "particle {} has {} position components in a {}-dimensional domain",
                    p.id,
                    p.x.len(),
                    self.dim()
                )));
            }
            if p.x.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidInstance(format!(
                    "particle {} has a non-finite position",
                    p.id
                )));
            }
            if !self.domain.contains(&p.x) {
                return Err(Error::InvalidInstance(format!(
                    "particle {} at {:?} lies outside the domain",
                    p.id, p.x
                )));
            }
        }
        Ok(())
    }
}

/// Squared Euclidean distance; both interpreters decide neighborhood
/// membership through this one function so their float rounding agrees.
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (&ac, &bc) in a.iter().zip(b) {
        let d = ac - bc;
        acc += d * d;
    }
    acc
}
