//! On-disk instance format: one JSON document carrying the method, the
//! domain and a full state. Particle properties are named objects checked
//! against the method's declared field schema. Dumps are canonical so they
//! can be hashed: particles sorted by id, object keys in a fixed order,
//! shortest round-trip float formatting. Loading a dump and dumping again
//! reproduces the bytes exactly.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Number, Value};

use pm_core::methods::{self, MethodInfo};
use pm_core::{Domain, GlobalVar, Instance, MethodParams, Particle, PropValue, State};

#[derive(Debug)]
pub enum LoadError {
    /// Malformed JSON or a document that does not describe an instance.
    Shape(String),
    /// Structurally sound JSON rejected by instance validation.
    Invalid(pm_core::Error),
}

impl std::fmt::Display for LoadError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LoadError::Shape(msg) => write!(f, "{msg}"),
            LoadError::Invalid(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for LoadError {}

impl From<pm_core::Error> for LoadError {
    fn from(e: pm_core::Error) -> Self {
        LoadError::Invalid(e)
    }
}

#[derive(Serialize, Deserialize)]
struct InstanceDoc {
    dimension: usize,
    domain: DomainDoc,
    cutoff: f64,
    method: MethodDoc,
    global: GlobalDoc,
    particles: Vec<ParticleDoc>,
}

#[derive(Serialize, Deserialize)]
struct DomainDoc {
    min: Vec<f64>,
    max: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MethodDoc {
    name: String,
    #[serde(default)]
    params: ParamsDoc,
}

#[derive(Serialize, Deserialize)]
struct ParamsDoc {
    #[serde(default)]
    walk_seed: u64,
    #[serde(default = "one")]
    mass: f64,
    #[serde(default)]
    speed: f64,
}

// Keeps a wholly absent params object consistent with a present-but-empty
// one: both take the per-field defaults.
impl Default for ParamsDoc {
    fn default() -> Self {
        ParamsDoc { walk_seed: 0, mass: one(), speed: 0.0 }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Serialize, Deserialize)]
struct GlobalDoc {
    t: u64,
    t_max: u64,
    #[serde(default)]
    extras: Vec<Number>,
}

#[derive(Serialize, Deserialize)]
struct ParticleDoc {
    id: u64,
    x: Vec<f64>,
    props: Map<String, Value>,
}

fn number_to_prop(n: &Number, float: bool, context: &str) -> Result<PropValue, LoadError> {
    if float {
        let v = n
            .as_f64()
            .ok_or_else(|| LoadError::Shape(format!("{context}: {n} is not a float")))?;
        Ok(PropValue::Float(v))
    } else if let Some(v) = n.as_i64() {
        Ok(PropValue::Int(v))
    } else {
        Err(LoadError::Shape(format!(
            "{context}: {n} is not a 64-bit integer"
        )))
    }
}

fn prop_to_value(p: &PropValue) -> Value {
    match *p {
        PropValue::Int(v) => Value::Number(v.into()),
        PropValue::Float(v) => {
            Value::Number(Number::from_f64(v).expect("finite property value"))
        }
    }
}

fn props_from_object(
    object: &Map<String, Value>,
    info: &MethodInfo,
    id: u64,
) -> Result<Vec<PropValue>, LoadError> {
    for key in object.keys() {
        if !info.fields.iter().any(|f| f.name == key) {
            return Err(LoadError::Shape(format!(
                "particle {id}: unknown property '{key}' for {}",
                info.name
            )));
        }
    }
    info.fields
        .iter()
        .map(|field| {
            let value = object.get(field.name).ok_or_else(|| {
                LoadError::Shape(format!(
                    "particle {id}: missing property '{}' for {}",
                    field.name, info.name
                ))
            })?;
            let number = value.as_number().ok_or_else(|| {
                LoadError::Shape(format!(
                    "particle {id}: property '{}' is not a number",
                    field.name
                ))
            })?;
            number_to_prop(
                number,
                field.float,
                &format!("particle {id}, property '{}'", field.name),
            )
        })
        .collect()
}

fn props_to_object(props: &[PropValue], info: &MethodInfo) -> Map<String, Value> {
    info.fields
        .iter()
        .zip(props)
        .map(|(field, value)| (field.name.to_string(), prop_to_value(value)))
        .collect()
}

fn extra_to_number(p: &PropValue) -> Number {
    match *p {
        PropValue::Int(v) => v.into(),
        PropValue::Float(v) => Number::from_f64(v).expect("finite extra value"),
    }
}

/// Parses and fully validates an instance document.
pub fn load_instance(text: &str) -> Result<Instance, LoadError> {
    let doc: InstanceDoc =
        serde_json::from_str(text).map_err(|e| LoadError::Shape(e.to_string()))?;
    let name = doc
        .method
        .name
        .parse::<methods::MethodName>()
        .map_err(LoadError::Invalid)?;
    let info = methods::method_info(name);
    let domain = Domain::new(doc.domain.min, doc.domain.max)?;
    if doc.dimension != domain.dim() {
        return Err(LoadError::Shape(format!(
            "dimension {} contradicts the {}-component domain bounds",
            doc.dimension,
            domain.dim()
        )));
    }
    let particles = doc
        .particles
        .iter()
        .map(|p| {
            Ok(Particle::new(
                p.id,
                p.x.clone(),
                props_from_object(&p.props, info, p.id)?,
            ))
        })
        .collect::<Result<Vec<_>, LoadError>>()?;
    let extras = doc
        .global
        .extras
        .iter()
        .enumerate()
        .map(|(i, n)| {
            if let Some(v) = n.as_i64() {
                Ok(PropValue::Int(v))
            } else {
                number_to_prop(n, true, &format!("global extra {i}"))
            }
        })
        .collect::<Result<Vec<_>, LoadError>>()?;
    let instance = Instance {
        method: MethodParams {
            name,
            cutoff: doc.cutoff,
            t_max: doc.global.t_max,
            walk_seed: doc.method.params.walk_seed,
            mass: doc.method.params.mass,
            speed: doc.method.params.speed,
        },
        domain,
        state: State {
            global: GlobalVar {
                t: doc.global.t,
                t_max: doc.global.t_max,
                extras,
            },
            particles,
        },
    };
    instance.validate()?;
    methods::validate_instance(&instance)?;
    Ok(instance)
}

/// Canonical dump of a state under an instance's method and domain. The
/// result reloads as an instance whose initial state is this state.
pub fn dump_state(instance: &Instance, state: &State) -> String {
    let info = methods::method_info(instance.method.name);
    let mut particles: Vec<&Particle> = state.particles.iter().collect();
    particles.sort_by_key(|p| p.id);
    let doc = InstanceDoc {
        dimension: instance.domain.dim(),
        domain: DomainDoc {
            min: instance.domain.min.clone(),
            max: instance.domain.max.clone(),
        },
        cutoff: instance.method.cutoff,
        method: MethodDoc {
            name: instance.method.name.to_string(),
            params: ParamsDoc {
                walk_seed: instance.method.walk_seed,
                mass: instance.method.mass,
                speed: instance.method.speed,
            },
        },
        global: GlobalDoc {
            t: state.global.t,
            t_max: state.global.t_max,
            extras: state.global.extras.iter().map(extra_to_number).collect(),
        },
        particles: particles
            .iter()
            .map(|p| ParticleDoc {
                id: p.id,
                x: p.x.clone(),
                props: props_to_object(&p.props, info),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("instance documents serialize");
    text.push('\n');
    text
}

#[derive(Serialize)]
struct StateDoc {
    global: GlobalDoc,
    particles: Vec<ParticleDoc>,
}

fn state_doc(state: &State, info: &MethodInfo) -> StateDoc {
    let mut particles: Vec<&Particle> = state.particles.iter().collect();
    particles.sort_by_key(|p| p.id);
    StateDoc {
        global: GlobalDoc {
            t: state.global.t,
            t_max: state.global.t_max,
            extras: state.global.extras.iter().map(extra_to_number).collect(),
        },
        particles: particles
            .iter()
            .map(|p| ParticleDoc {
                id: p.id,
                x: p.x.clone(),
                props: props_to_object(&p.props, info),
            })
            .collect(),
    }
}

/// Every visited state in order, particles id-sorted per state.
pub fn dump_trace(instance: &Instance, trace: &[State]) -> String {
    let info = methods::method_info(instance.method.name);
    let docs: Vec<StateDoc> = trace.iter().map(|s| state_doc(s, info)).collect();
    let mut text = serde_json::to_string_pretty(&docs).expect("trace serializes");
    text.push('\n');
    text
}

#[derive(Serialize)]
struct ProcessDoc {
    process: u64,
    global: GlobalDoc,
    compartments: Vec<Vec<ParticleDoc>>,
}

/// The distributed state as each process sees it: per-process global
/// variable and all 3^d compartments in filing order, ghosts included.
pub fn dump_processes(instance: &Instance, state: &pm_core::DistributedState) -> String {
    let info = methods::method_info(instance.method.name);
    let docs: Vec<ProcessDoc> = state
        .processes()
        .iter()
        .enumerate()
        .map(|(i, storage)| ProcessDoc {
            process: i as u64 + 1,
            global: GlobalDoc {
                t: storage.global.t,
                t_max: storage.global.t_max,
                extras: storage.global.extras.iter().map(extra_to_number).collect(),
            },
            compartments: storage
                .compartments
                .iter()
                .map(|c| {
                    c.iter()
                        .map(|p| ParticleDoc {
                            id: p.id,
                            x: p.x.clone(),
                            props: props_to_object(&p.props, info),
                        })
                        .collect()
                })
                .collect(),
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&docs).expect("process view serializes");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;
    use pm_core::methods::MethodName;

    fn swap_doc() -> String {
        r#"{
            "dimension": 1,
            "domain": {"min": [0.0], "max": [1.5]},
            "cutoff": 1.0,
            "method": {"name": "ExchangeDiffusion"},
            "global": {"t": 1, "t_max": 2},
            "particles": [
                {"id": 1, "x": [0.25], "props": {"h": 10, "a": 0, "c": 0}},
                {"id": 2, "x": [1.25], "props": {"h": 4, "a": 0, "c": 0}}
            ]
        }"#
        .to_string()
    }

    #[test]
    fn loads_a_minimal_document() {
        let inst = load_instance(&swap_doc()).unwrap();
        assert_eq!(inst.method.name, MethodName::ExchangeDiffusion);
        assert_eq!(inst.method.t_max, 2);
        assert_eq!(inst.state.particles.len(), 2);
        assert_eq!(inst.state.particles[0].props[0], PropValue::Int(10));
    }

    #[test]
    fn dump_load_dump_is_byte_identical() {
        let inst = load_instance(&swap_doc()).unwrap();
        let once = dump_state(&inst, &inst.state);
        let again = { let r = load_instance(&once).unwrap(); dump_state(&r, &r.state) };
        assert_eq!(once, again);
    }

    #[test]
    fn dumps_sort_particles_by_id() {
        let mut inst = load_instance(&swap_doc()).unwrap();
        inst.state.particles.reverse();
        let text = dump_state(&inst, &inst.state);
        let h = text.find("\"id\": 1").unwrap();
        let l = text.find("\"id\": 2").unwrap();
        assert!(h < l);
    }

    #[test]
    fn shape_faults_name_the_offender() {
        let missing = swap_doc().replace("\"h\": 10, ", "");
        let err = load_instance(&missing).unwrap_err();
        assert!(err.to_string().contains("missing property 'h'"));

        let unknown = swap_doc().replace("\"h\": 10", "\"hh\": 10");
        let err = load_instance(&unknown).unwrap_err();
        assert!(err.to_string().contains("unknown property 'hh'"));

        let wrong_dim = swap_doc().replace("\"dimension\": 1", "\"dimension\": 2");
        let err = load_instance(&wrong_dim).unwrap_err();
        assert!(err.to_string().contains("dimension 2"));

        let fractional = swap_doc().replace("\"h\": 10", "\"h\": 10.5");
        let err = load_instance(&fractional).unwrap_err();
        assert!(err.to_string().contains("not a 64-bit integer"));

        let truncated = &swap_doc()[..40];
        assert!(matches!(
            load_instance(truncated),
            Err(LoadError::Shape(_))
        ));
    }

    #[test]
    fn validation_faults_surface_as_invalid() {
        let outside = swap_doc().replace("[0.25]", "[9.0]");
        assert!(matches!(
            load_instance(&outside),
            Err(LoadError::Invalid(_))
        ));
    }
}
