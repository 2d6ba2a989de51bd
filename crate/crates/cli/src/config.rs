//! JSON run configuration: raw serde layer plus eager validation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use vortexlines::dynamics::{IntegratorOptions, Method};
use vortexlines::expr::{parse_expression, Expr, ParseError, SpaceSpec};
use vortexlines::exterior::Form;
use vortexlines::invariants::{parameter_space, Chain, InvariantError, DEFAULT_ORDER};
use vortexlines::systems::{hamiltonian_sigma, nambu_sigma, HamiltonianSpec, NambuSpec, SystemError};
use vortexlines::wellposed::{SampleRegion, SamplingSpec};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{pointer}: {message}")]
    Schema { pointer: String, message: String },
    #[error("{pointer}: {message}")]
    Invalid { pointer: String, message: String },
}

impl ConfigError {
    fn invalid(pointer: impl Into<String>, message: impl ToString) -> Self {
        ConfigError::Invalid {
            pointer: pointer.into(),
            message: message.to_string(),
        }
    }

    /// JSON pointer of the offending value (empty for the document root).
    pub fn pointer(&self) -> Option<&str> {
        match self {
            ConfigError::Io { .. } => None,
            ConfigError::Schema { pointer, .. } | ConfigError::Invalid { pointer, .. } => Some(pointer),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    space: Option<Vec<String>>,
    sigma: RawSigma,
    initial: Option<RawPoint>,
    #[serde(default)]
    time: RawTime,
    #[serde(default)]
    integrator: RawIntegrator,
    #[serde(default)]
    sampling: RawSampling,
    #[serde(default)]
    invariants: RawInvariants,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSigma {
    hamiltonian: Option<RawHamiltonian>,
    nambu: Option<RawNambu>,
    form: Option<RawForm>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHamiltonian {
    m: usize,
    #[serde(rename = "H")]
    h: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNambu {
    n: usize,
    hamiltonians: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawForm {
    terms: Vec<RawTerm>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTerm {
    indices: Vec<String>,
    coefficient: RawScalar,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawScalar {
    Number(f64),
    Text(String),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawPoint {
    List(Vec<f64>),
    Named(BTreeMap<String, f64>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTime {
    #[serde(default)]
    t0: f64,
    #[serde(default = "one")]
    t1: f64,
    samples: Option<usize>,
}

fn one() -> f64 {
    1.0
}

impl Default for RawTime {
    fn default() -> Self {
        Self {
            t0: 0.0,
            t1: 1.0,
            samples: None,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
enum RawMethod {
    #[default]
    Rkf45,
    Rk4,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntegrator {
    #[serde(default)]
    method: RawMethod,
    atol: Option<f64>,
    rtol: Option<f64>,
    step: Option<f64>,
    initial_step: Option<f64>,
    max_steps: Option<usize>,
    #[serde(default)]
    verify_constraint: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSampling {
    seed: Option<u64>,
    count: Option<usize>,
    lower: Option<Vec<f64>>,
    upper: Option<Vec<f64>>,
    times: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInvariants {
    quadrature_order: Option<usize>,
    #[serde(default)]
    relative: Vec<RawChainTask>,
    #[serde(default)]
    absolute: Vec<RawChainTask>,
    #[serde(default)]
    liouville: Vec<RawLiouville>,
    tolerance: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChainTask {
    chain: RawChain,
    #[serde(default)]
    k: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChain {
    dim: usize,
    coordinates: BTreeMap<String, String>,
    #[serde(default)]
    cycle: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLiouville {
    lower: Vec<f64>,
    upper: Vec<f64>,
    samples: Option<usize>,
}

/// Which builder produced sigma.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SigmaSource {
    Hamiltonian { m: usize },
    Nambu { n: usize },
    Form,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSpan {
    pub t0: f64,
    pub t1: f64,
    /// Number of evenly spaced output rows; `None` writes every step.
    pub samples: Option<usize>,
}

/// A chain whose spatial coordinates are expressions in `u1..u_dim`; it is
/// placed in the slice `t = t0` when the task runs.
#[derive(Debug, Clone)]
pub struct ChainTask {
    pub dim: usize,
    pub coordinates: Vec<Expr>,
    pub cycle: bool,
    pub k: usize,
}

impl ChainTask {
    pub fn chain(&self, space: &SpaceSpec, t0: f64) -> Result<Chain, InvariantError> {
        let mut coords = vec![Expr::constant(t0)];
        coords.extend(self.coordinates.iter().cloned());
        Chain::parametric(space, self.dim, coords, self.cycle)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiouvilleTask {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub samples: usize,
}

#[derive(Debug, Clone)]
pub struct InvariantTasks {
    pub order: usize,
    pub relative: Vec<ChainTask>,
    pub absolute: Vec<ChainTask>,
    pub liouville: Vec<LiouvilleTask>,
    /// Optional pass threshold applied to every drift.
    pub tolerance: Option<f64>,
}

impl InvariantTasks {
    pub fn is_empty(&self) -> bool {
        self.relative.is_empty() && self.absolute.is_empty() && self.liouville.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub space: SpaceSpec,
    pub sigma: Form,
    pub source: SigmaSource,
    pub initial: Option<Vec<f64>>,
    pub time: TimeSpan,
    pub integrator: IntegratorOptions,
    pub sampling: SamplingSpec,
    pub invariants: InvariantTasks,
}

/// Command-line overrides; `None` keeps the config value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub t0: Option<f64>,
    pub t1: Option<f64>,
}

/// Default number of Liouville sample points.
pub const LIOUVILLE_SAMPLES: usize = 16;

impl RunConfig {
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.sampling.seed = seed;
        }
        if let Some(k) = o.samples {
            self.sampling = self.sampling.clone().with_count(k);
            for task in &mut self.invariants.liouville {
                task.samples = k;
            }
        }
        if let Some(t0) = o.t0 {
            self.time.t0 = t0;
        }
        if let Some(t1) = o.t1 {
            self.time.t1 = t1;
        }
    }

    pub fn n(&self) -> usize {
        self.space.n()
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    out
}

/// Parse and validate a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Schema {
        pointer: json_pointer(e.path()),
        message: e.inner().to_string(),
    })?;
    validate(raw)
}

fn parse_at(text: &str, space: &SpaceSpec, pointer: &str) -> Result<Expr, ConfigError> {
    parse_expression(text, space).map_err(|e| describe_parse(e, text, pointer))
}

fn describe_parse(e: ParseError, text: &str, pointer: &str) -> ConfigError {
    ConfigError::invalid(pointer, format!("{e} in `{text}`"))
}

fn system_error(e: SystemError, pointer: &str) -> ConfigError {
    ConfigError::invalid(pointer, e)
}

fn explicit_space(names: &Option<Vec<String>>) -> Result<Option<SpaceSpec>, ConfigError> {
    names
        .as_ref()
        .map(|names| SpaceSpec::new(names).map_err(|e| ConfigError::invalid("/space", e)))
        .transpose()
}

fn build_sigma(raw: &RawConfig) -> Result<(SpaceSpec, Form, SigmaSource), ConfigError> {
    let sources = [
        raw.sigma.hamiltonian.is_some(),
        raw.sigma.nambu.is_some(),
        raw.sigma.form.is_some(),
    ];
    if sources.iter().filter(|&&s| s).count() != 1 {
        return Err(ConfigError::invalid(
            "/sigma",
            "exactly one sigma source is required (hamiltonian, nambu or form)",
        ));
    }
    let explicit = explicit_space(&raw.space)?;
    if let Some(h) = &raw.sigma.hamiltonian {
        let space = match explicit {
            Some(s) => s,
            None => {
                HamiltonianSpec::standard_space(h.m).map_err(|e| system_error(e, "/sigma/hamiltonian/m"))?
            }
        };
        if space.n() != 2 * h.m {
            return Err(ConfigError::invalid(
                "/space",
                format!(
                    "hamiltonian with m = {} needs {} coordinates, found {}",
                    h.m,
                    2 * h.m,
                    space.n()
                ),
            ));
        }
        let hamiltonian = parse_at(&h.h, &space, "/sigma/hamiltonian/H")?;
        let names = space.spatial_names();
        let spec = HamiltonianSpec::new(&names[..h.m], &names[h.m..], hamiltonian)
            .map_err(|e| system_error(e, "/sigma/hamiltonian"))?;
        let sigma = hamiltonian_sigma(&spec).map_err(|e| system_error(e, "/sigma/hamiltonian"))?;
        return Ok((space, sigma, SigmaSource::Hamiltonian { m: h.m }));
    }
    if let Some(nb) = &raw.sigma.nambu {
        let space = match explicit {
            Some(s) => s,
            None => NambuSpec::standard_space(nb.n).map_err(|e| system_error(e, "/sigma/nambu/n"))?,
        };
        if space.n() != nb.n {
            return Err(ConfigError::invalid(
                "/space",
                format!(
                    "nambu with n = {} needs {} coordinates, found {}",
                    nb.n,
                    nb.n,
                    space.n()
                ),
            ));
        }
        let hs = nb
            .hamiltonians
            .iter()
            .enumerate()
            .map(|(i, text)| parse_at(text, &space, &format!("/sigma/nambu/hamiltonians/{i}")))
            .collect::<Result<Vec<_>, _>>()?;
        let spec =
            NambuSpec::new(space.clone(), hs).map_err(|e| system_error(e, "/sigma/nambu/hamiltonians"))?;
        let sigma = nambu_sigma(&spec).map_err(|e| system_error(e, "/sigma/nambu"))?;
        return Ok((space, sigma, SigmaSource::Nambu { n: nb.n }));
    }
    let form = raw.sigma.form.as_ref().expect("one source is present");
    let space =
        explicit.ok_or_else(|| ConfigError::invalid("/space", "a raw form needs an explicit space"))?;
    let degree = form
        .terms
        .first()
        .map(|t| t.indices.len())
        .ok_or_else(|| ConfigError::invalid("/sigma/form/terms", "at least one term is required"))?;
    let mut sigma = Form::zero(&space, degree);
    for (i, term) in form.terms.iter().enumerate() {
        let at = format!("/sigma/form/terms/{i}");
        if term.indices.len() != degree {
            return Err(ConfigError::invalid(
                format!("{at}/indices"),
                format!(
                    "expected {degree} indices like the first term, found {}",
                    term.indices.len()
                ),
            ));
        }
        let indices = term
            .indices
            .iter()
            .enumerate()
            .map(|(j, name)| {
                space.index_of(name).ok_or_else(|| {
                    ConfigError::invalid(
                        format!("{at}/indices/{j}"),
                        format!("undeclared coordinate `{name}`"),
                    )
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let coeff = match &term.coefficient {
            RawScalar::Number(c) => Expr::constant(*c),
            RawScalar::Text(text) => parse_at(text, &space, &format!("{at}/coefficient"))?,
        };
        sigma
            .add_term(&indices, coeff)
            .map_err(|e| ConfigError::invalid(format!("{at}/indices"), e))?;
    }
    Ok((space, sigma, SigmaSource::Form))
}

fn point_from(raw: &RawPoint, space: &SpaceSpec, pointer: &str) -> Result<Vec<f64>, ConfigError> {
    let n = space.n();
    match raw {
        RawPoint::List(v) if v.len() == n => Ok(v.clone()),
        RawPoint::List(v) => Err(ConfigError::invalid(
            pointer,
            format!("expected {n} values, found {}", v.len()),
        )),
        RawPoint::Named(map) => {
            for name in map.keys() {
                if space.index_of(name).is_none_or(|i| i == 0) {
                    return Err(ConfigError::invalid(
                        format!("{pointer}/{name}"),
                        format!("undeclared coordinate `{name}`"),
                    ));
                }
            }
            space
                .spatial_names()
                .iter()
                .map(|name| {
                    map.get(name)
                        .copied()
                        .ok_or_else(|| ConfigError::invalid(pointer, format!("missing coordinate `{name}`")))
                })
                .collect()
        }
    }
}

fn integrator_from(raw: &RawIntegrator) -> Result<IntegratorOptions, ConfigError> {
    let mut opts = IntegratorOptions {
        verify_constraint: raw.verify_constraint,
        ..IntegratorOptions::default()
    };
    let positive = |v: Option<f64>, field: &str| -> Result<Option<f64>, ConfigError> {
        match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => Err(ConfigError::invalid(
                format!("/integrator/{field}"),
                format!("must be positive, got {x}"),
            )),
            other => Ok(other),
        }
    };
    if let Some(a) = positive(raw.atol, "atol")? {
        opts.atol = a;
    }
    if let Some(r) = positive(raw.rtol, "rtol")? {
        opts.rtol = r;
    }
    opts.initial_step = positive(raw.initial_step, "initial_step")?;
    if let Some(m) = raw.max_steps {
        opts.max_steps = m;
    }
    let step = positive(raw.step, "step")?;
    opts.method = match raw.method {
        RawMethod::Rkf45 => Method::Rkf45,
        RawMethod::Rk4 => Method::Rk4 {
            step: step.ok_or_else(|| ConfigError::invalid("/integrator/step", "rk4 needs a fixed step"))?,
        },
    };
    Ok(opts)
}

fn bounds(lower: &[f64], upper: &[f64], n: usize, pointer: &str) -> Result<(), ConfigError> {
    if lower.len() != n || upper.len() != n {
        return Err(ConfigError::invalid(
            pointer,
            format!("box bounds need {n} entries each"),
        ));
    }
    if lower.iter().zip(upper).any(|(a, b)| !(a <= b)) {
        return Err(ConfigError::invalid(pointer, "lower bound exceeds upper bound"));
    }
    Ok(())
}

fn sampling_from(raw: &RawSampling, n: usize) -> Result<SamplingSpec, ConfigError> {
    let mut spec = SamplingSpec::default_for(n).with_seed(raw.seed.unwrap_or(0));
    if let SampleRegion::Box {
        lower,
        upper,
        count,
        times,
    } = &mut spec.region
    {
        if let Some(l) = &raw.lower {
            *lower = l.clone();
        }
        if let Some(u) = &raw.upper {
            *upper = u.clone();
        }
        bounds(lower, upper, n, "/sampling")?;
        if let Some(c) = raw.count {
            if c == 0 {
                return Err(ConfigError::invalid("/sampling/count", "must be positive"));
            }
            *count = c;
        }
        if let Some(t) = &raw.times {
            *times = t.clone();
        }
    }
    Ok(spec)
}

fn chain_task(raw: &RawChainTask, space: &SpaceSpec, pointer: &str) -> Result<ChainTask, ConfigError> {
    let params = parameter_space(raw.chain.dim.max(1)).map_err(|e| ConfigError::invalid(pointer, e))?;
    if raw.chain.dim == 0 {
        return Err(ConfigError::invalid(
            format!("{pointer}/chain/dim"),
            "must be positive",
        ));
    }
    for name in raw.chain.coordinates.keys() {
        if space.index_of(name).is_none_or(|i| i == 0) {
            return Err(ConfigError::invalid(
                format!("{pointer}/chain/coordinates/{name}"),
                format!("undeclared coordinate `{name}`"),
            ));
        }
    }
    let coordinates = space
        .spatial_names()
        .iter()
        .map(|name| match raw.chain.coordinates.get(name) {
            Some(text) => parse_at(text, &params, &format!("{pointer}/chain/coordinates/{name}")),
            None => Ok(Expr::zero()),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let task = ChainTask {
        dim: raw.chain.dim,
        coordinates,
        cycle: raw.chain.cycle,
        k: raw.k,
    };
    // faces and parameter names are checked now, before any numerics
    task.chain(space, 0.0)
        .map_err(|e| ConfigError::invalid(format!("{pointer}/chain"), e))?;
    Ok(task)
}

fn invariants_from(raw: &RawInvariants, space: &SpaceSpec, p: usize) -> Result<InvariantTasks, ConfigError> {
    let n = space.n();
    let order = raw.quadrature_order.unwrap_or(DEFAULT_ORDER);
    if order == 0 {
        return Err(ConfigError::invalid(
            "/invariants/quadrature_order",
            "must be positive",
        ));
    }
    let mut relative = Vec::new();
    for (i, r) in raw.relative.iter().enumerate() {
        let at = format!("/invariants/relative/{i}");
        let task = chain_task(r, space, &at)?;
        if !task.cycle {
            return Err(ConfigError::invalid(
                format!("{at}/chain/cycle"),
                "relative invariants need a cycle",
            ));
        }
        let degree = p + task.k * (p + 1);
        if degree != task.dim {
            return Err(ConfigError::invalid(
                at,
                format!(
                    "sigma^(d sigma)^{} has degree {degree} but the cycle has dimension {}",
                    task.k, task.dim
                ),
            ));
        }
        relative.push(task);
    }
    let mut absolute = Vec::new();
    for (i, r) in raw.absolute.iter().enumerate() {
        let at = format!("/invariants/absolute/{i}");
        let task = chain_task(r, space, &at)?;
        let degree = (task.k + 1) * (p + 1);
        if degree != task.dim {
            return Err(ConfigError::invalid(
                at,
                format!(
                    "(d sigma)^{} has degree {degree} but the chain has dimension {}",
                    task.k + 1,
                    task.dim
                ),
            ));
        }
        absolute.push(task);
    }
    let mut liouville = Vec::new();
    for (i, l) in raw.liouville.iter().enumerate() {
        let at = format!("/invariants/liouville/{i}");
        bounds(&l.lower, &l.upper, n, &at)?;
        liouville.push(LiouvilleTask {
            lower: l.lower.clone(),
            upper: l.upper.clone(),
            samples: l.samples.unwrap_or(LIOUVILLE_SAMPLES),
        });
    }
    if let Some(tol) = raw.tolerance {
        if !(tol >= 0.0) {
            return Err(ConfigError::invalid(
                "/invariants/tolerance",
                "must be non-negative",
            ));
        }
    }
    Ok(InvariantTasks {
        order,
        relative,
        absolute,
        liouville,
        tolerance: raw.tolerance,
    })
}

fn validate(raw: RawConfig) -> Result<RunConfig, ConfigError> {
    let (space, sigma, source) = build_sigma(&raw)?;
    let n = space.n();
    let initial = raw
        .initial
        .as_ref()
        .map(|p| point_from(p, &space, "/initial"))
        .transpose()?;
    if !(raw.time.t0.is_finite() && raw.time.t1.is_finite()) {
        return Err(ConfigError::invalid("/time", "t0 and t1 must be finite"));
    }
    let time = TimeSpan {
        t0: raw.time.t0,
        t1: raw.time.t1,
        samples: raw.time.samples,
    };
    let integrator = integrator_from(&raw.integrator)?;
    let sampling = sampling_from(&raw.sampling, n)?;
    let invariants = invariants_from(&raw.invariants, &space, sigma.degree())?;
    Ok(RunConfig {
        space,
        sigma,
        source,
        initial,
        time,
        integrator,
        sampling,
        invariants,
    })
}
