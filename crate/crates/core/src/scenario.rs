//! Scenario files: TOML schema, dotted-key overrides and validation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::contact_law::{BoundaryLaw, ContactLaw, LawFamily, RegularizedLaw};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::grid::{BcKind, BoundaryCondition, Field, Grid};
use crate::memory::MemoryKernel;

/// A scalar field given as a constant or as an expression in `x1, x2, t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Const(f64),
    Expr(String),
}

impl Default for FieldSpec {
    fn default() -> Self {
        FieldSpec::Const(0.0)
    }
}

impl FieldSpec {
    pub fn compile(&self) -> Result<CompiledField> {
        match self {
            FieldSpec::Const(v) => Ok(CompiledField::Const(*v)),
            FieldSpec::Expr(s) => Ok(CompiledField::Expr(Expr::parse(s)?)),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, FieldSpec::Const(v) if *v == 0.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CompiledField {
    Const(f64),
    Expr(Expr),
}

impl CompiledField {
    pub fn depends_on_t(&self) -> bool {
        match self {
            CompiledField::Const(_) => false,
            CompiledField::Expr(e) => e.depends_on_t(),
        }
    }

    pub fn eval(&self, x1: f64, x2: f64, t: f64) -> f64 {
        match self {
            CompiledField::Const(v) => *v,
            CompiledField::Expr(e) => e.eval(x1, x2, t),
        }
    }

    pub fn sample(&self, grid: Grid, t: f64) -> Field {
        match self {
            CompiledField::Const(v) => Field::constant(grid, *v),
            CompiledField::Expr(e) => Field::from_fn(grid, |x, y| e.eval(x, y, t)),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, CompiledField::Const(v) if *v == 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Biharmonic,
    VonKarman,
    VonKarmanRotInertia,
    ReissnerMindlin,
    FullVonKarman,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Biharmonic => "biharmonic",
            ModelKind::VonKarman => "von_karman",
            ModelKind::VonKarmanRotInertia => "von_karman_rot_inertia",
            ModelKind::ReissnerMindlin => "reissner_mindlin",
            ModelKind::FullVonKarman => "full_von_karman",
        }
    }

    /// Unknowns per node.
    pub fn ncomp(self) -> usize {
        match self {
            ModelKind::ReissnerMindlin | ModelKind::FullVonKarman => 3,
            _ => 1,
        }
    }

    pub fn is_von_karman(self) -> bool {
        matches!(self, ModelKind::VonKarman | ModelKind::VonKarmanRotInertia)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    #[serde(default = "one")]
    pub lx: f64,
    #[serde(default = "one")]
    pub ly: f64,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        Grid::new(self.nx, self.ny, self.lx, self.ly)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub t_final: f64,
    pub dt: f64,
    /// Snapshot cadence in steps; 0 keeps only the initial and final states.
    #[serde(default)]
    pub snapshot_every: usize,
}

impl TimeSpec {
    pub fn steps(&self) -> usize {
        let n = self.t_final / self.dt;
        // tolerate representation error in T/dt
        let r = n.round();
        if (n - r).abs() <= 1e-9 * r.max(1.0) {
            r as usize
        } else {
            n.ceil() as usize
        }
    }
}

/// Material and structural constants of the selected plate model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub bc: BcKind,
    pub e0: f64,
    #[serde(default)]
    pub e1: f64,
    #[serde(default = "one")]
    pub b0: f64,
    /// Poisson ratio of the bending form; does not enter the discrete operator on a rectangle.
    #[serde(default = "default_nu")]
    pub nu: f64,
    #[serde(default = "default_nu")]
    pub nu0: f64,
    #[serde(default = "default_nu")]
    pub nu1: f64,
    #[serde(default)]
    pub g0: f64,
    #[serde(default)]
    pub a: f64,
    #[serde(default = "one")]
    pub b: f64,
    #[serde(default = "one")]
    pub c_tilde: f64,
    /// Multiplier of the von Kármán coupling force (1 = physical, 0 drops it).
    #[serde(default = "one")]
    pub coupling: f64,
    /// Present for singular memory, absent for short memory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory: Option<MemoryKernel>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MemoryMode<'a> {
    ShortMemory,
    SingularMemory(&'a MemoryKernel),
}

impl ModelConfig {
    pub fn memory_mode(&self) -> MemoryMode<'_> {
        match &self.memory {
            None => MemoryMode::ShortMemory,
            Some(k) => MemoryMode::SingularMemory(k),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.kind;
        if !(self.e0 > 0.0 && self.e0.is_finite()) {
            return Err(Error::invalid("e0 > 0", "elastic modulus e0 must be positive"));
        }
        if !(self.e1 >= 0.0 && self.e1.is_finite()) {
            return Err(Error::invalid("e1 >= 0", "viscous modulus e1 must be nonnegative"));
        }
        match k {
            ModelKind::Biharmonic | ModelKind::VonKarman | ModelKind::VonKarmanRotInertia => {
                if !(self.b0 > 0.0 && self.b0.is_finite()) {
                    return Err(Error::invalid("b0 > 0", "plate rigidity b0 must be positive"));
                }
                if !(self.nu > -0.5 && self.nu < 1.0) {
                    return Err(Error::invalid("-1/2 < nu < 1", format!("Poisson ratio nu = {} outside (-1/2, 1)", self.nu)));
                }
            }
            ModelKind::ReissnerMindlin | ModelKind::FullVonKarman => {
                for (name, v) in [("nu0", self.nu0), ("nu1", self.nu1)] {
                    if !(v > -1.0 && v < 0.5) {
                        return Err(Error::invalid("-1 < nu_i < 1/2", format!("Poisson ratio {name} = {v} outside (-1, 1/2)")));
                    }
                }
                if !(self.c_tilde > 0.0 && self.c_tilde.is_finite()) {
                    return Err(Error::invalid("c_tilde > 0", "tensor scale c_tilde must be positive"));
                }
            }
        }
        if k == ModelKind::VonKarmanRotInertia && !(self.g0 > 0.0 && self.g0.is_finite()) {
            return Err(Error::invalid("g0 > 0", "rotational inertia g0 must be positive"));
        }
        if k == ModelKind::FullVonKarman {
            if !(self.a > 0.0 && self.a.is_finite()) || !(self.b > 0.0 && self.b.is_finite()) {
                return Err(Error::invalid("a, b > 0", "full von Karman constants a, b must be positive"));
            }
            if self.bc == BcKind::Clamped {
                return Err(Error::invalid(
                    "full von Karman is simply supported",
                    "a clamped edge cannot take part in boundary contact; use bc = \"simply_supported\"",
                ));
            }
        }
        if k.is_von_karman() && !(self.coupling >= 0.0 && self.coupling.is_finite()) {
            return Err(Error::invalid("coupling >= 0", "coupling multiplier must be nonnegative"));
        }
        if let Some(kernel) = &self.memory {
            kernel.validate()?;
            if !kernel.is_singular() {
                return Err(Error::invalid("q > 0 near 0", "a singular memory kernel needs q0 > 0"));
            }
            kernel.smallness_check(self.e0, self.e1)?;
            if k == ModelKind::ReissnerMindlin && self.nu1 != self.nu0 {
                return Err(Error::invalid("nu1 = nu0 with singular memory", "singular memory shares one Poisson ratio: set nu1 = nu0"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactSpec {
    pub family: LawFamily,
    pub gamma: f64,
    #[serde(default = "one")]
    pub kappa: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta0: Option<f64>,
    #[serde(default)]
    pub k: u32,
    /// `(x, p)` samples for the tabulated family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<[f64; 2]>>,
}

impl ContactSpec {
    pub fn base_law(&self) -> Result<ContactLaw> {
        if !(self.gamma < 0.0) {
            return Err(Error::invalid("gamma < 0", format!("gamma must be negative, got {}", self.gamma)));
        }
        match self.family {
            LawFamily::RationalBarrier => ContactLaw::rational(self.gamma, self.kappa),
            LawFamily::LogBarrier => ContactLaw::log_barrier(self.gamma, self.kappa),
            LawFamily::Tabulated => {
                let t = self
                    .table
                    .as_ref()
                    .ok_or_else(|| Error::invalid("tabulated law needs samples", "family = \"tabulated\" requires a table"))?;
                let pts: Vec<(f64, f64)> = t.iter().map(|p| (p[0], p[1])).collect();
                ContactLaw::tabulated(self.gamma, &pts)
            }
        }
    }

    pub fn law(&self) -> Result<RegularizedLaw> {
        RegularizedLaw::new(self.base_law()?, self.k, self.delta0)
    }

    pub fn boundary_law(&self) -> Result<BoundaryLaw> {
        Ok(BoundaryLaw::new(self.law()?))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadSpec {
    #[serde(default)]
    pub f: FieldSpec,
    #[serde(default)]
    pub gap: FieldSpec,
    #[serde(default)]
    pub m1: FieldSpec,
    #[serde(default)]
    pub m2: FieldSpec,
    #[serde(default)]
    pub f1: FieldSpec,
    #[serde(default)]
    pub f2: FieldSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub u0: FieldSpec,
    #[serde(default)]
    pub u1: FieldSpec,
    #[serde(default)]
    pub phi0_1: FieldSpec,
    #[serde(default)]
    pub phi0_2: FieldSpec,
    #[serde(default)]
    pub phi1_1: FieldSpec,
    #[serde(default)]
    pub phi1_2: FieldSpec,
    #[serde(default)]
    pub uvec0_1: FieldSpec,
    #[serde(default)]
    pub uvec0_2: FieldSpec,
    #[serde(default)]
    pub uvec1_1: FieldSpec,
    #[serde(default)]
    pub uvec1_2: FieldSpec,
    /// Lower bound required of `u0`; defaults to any positive bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec { tol: default_tol(), max_iter: default_max_iter() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySpec {
    #[serde(default)]
    pub k_list: Vec<u32>,
    #[serde(default)]
    pub gamma_list: Vec<f64>,
    /// Cap index used for every row of the gamma study.
    #[serde(default = "default_gamma_k")]
    pub gamma_k: u32,
}

impl StudySpec {
    pub fn validate(&self) -> Result<()> {
        if self.k_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("k_list increasing", "k_list must be strictly increasing"));
        }
        if self.gamma_list.iter().any(|g| !(*g < 0.0)) {
            return Err(Error::invalid("gamma < 0", "every entry of gamma_list must be negative"));
        }
        if self.gamma_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("gamma_list increasing", "gamma_list must increase strictly toward 0"));
        }
        Ok(())
    }
}

/// Manufactured-solution sweep settings (linear Kirchhoff plate).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MmsSpec {
    /// Number of halvings in space and in time.
    #[serde(default = "default_halvings")]
    pub halvings: usize,
    /// Constant offset of the manufactured deflection (its boundary value).
    #[serde(default = "default_mms_offset")]
    pub offset: f64,
}

impl Default for MmsSpec {
    fn default() -> Self {
        MmsSpec { halvings: default_halvings(), offset: default_mms_offset() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub grid: GridSpec,
    pub time: TimeSpec,
    pub model: ModelConfig,
    pub contact: ContactSpec,
    #[serde(default)]
    pub loads: LoadSpec,
    pub initial: InitialSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub study: Option<StudySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mms: Option<MmsSpec>,
}

fn one() -> f64 {
    1.0
}
fn default_nu() -> f64 {
    0.3
}
fn default_tol() -> f64 {
    1e-10
}
fn default_max_iter() -> usize {
    40
}
fn default_gamma_k() -> u32 {
    10
}
fn default_halvings() -> usize {
    3
}
fn default_mms_offset() -> f64 {
    2.0
}

impl Scenario {
    /// Parses TOML text, applies `key=value` overrides, and validates.
    pub fn from_toml_str(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut value: toml::Value = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
        for (k, v) in overrides {
            apply_override(&mut value, k, v)?;
        }
        let s: Scenario = value.try_into().map_err(|e: toml::de::Error| Error::Parse { line: 0, column: 0, message: e.message().to_string() })?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Io(format!("cannot serialise scenario: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.grid.build()?;
        let t = &self.time;
        if !(t.dt > 0.0 && t.dt.is_finite()) {
            return Err(Error::invalid("dt > 0", "time step dt must be positive"));
        }
        if !(t.t_final >= t.dt) || !t.t_final.is_finite() {
            return Err(Error::invalid("T >= dt", "final time must be at least one step"));
        }
        self.model.validate()?;
        let law = self.contact.law()?;
        if !(self.solver.tol > 0.0) || self.solver.max_iter == 0 {
            return Err(Error::invalid("solver tol > 0, max_iter >= 1", "Newton tolerance must be positive and max_iter at least 1"));
        }
        if let Some(st) = &self.study {
            st.validate()?;
        }

        let times = [0.0, 0.5 * t.t_final, t.t_final];
        let finite = |name: &str, spec: &FieldSpec| -> Result<Field> {
            let c = spec.compile()?;
            let mut first = None;
            for &tt in &times {
                let f = c.sample(grid, tt);
                if !f.is_finite() {
                    return Err(Error::invalid("fields finite", format!("{name} is not finite on the grid at t = {tt}")));
                }
                first.get_or_insert(f);
            }
            Ok(first.expect("at least one sample"))
        };
        let gap = finite("gap", &self.loads.gap)?;
        for name_spec in [("f", &self.loads.f), ("m1", &self.loads.m1), ("m2", &self.loads.m2), ("f1", &self.loads.f1), ("f2", &self.loads.f2)] {
            finite(name_spec.0, name_spec.1)?;
        }
        if gap.as_slice().iter().any(|g| *g < 0.0) {
            return Err(Error::invalid("g >= 0", "gap function must be nonnegative"));
        }
        let i = &self.initial;
        let u0 = finite("u0", &i.u0)?;
        for (name, spec) in [
            ("u1", &i.u1),
            ("phi0_1", &i.phi0_1),
            ("phi0_2", &i.phi0_2),
            ("phi1_1", &i.phi1_1),
            ("phi1_2", &i.phi1_2),
            ("uvec0_1", &i.uvec0_1),
            ("uvec0_2", &i.uvec0_2),
            ("uvec1_1", &i.uvec1_1),
            ("uvec1_2", &i.uvec1_2),
        ] {
            finite(name, spec)?;
        }
        let min_u0 = u0.as_slice().iter().copied().fold(f64::INFINITY, f64::min);
        let c0 = i.c0.unwrap_or(f64::MIN_POSITIVE);
        if !(c0 > 0.0) {
            return Err(Error::invalid("c0 > 0", "lower bound c0 of u0 must be positive"));
        }
        if !(min_u0 >= c0) {
            return Err(Error::invalid(
                "u0 >= c0 > 0",
                format!("u0 must be bounded away from 0 (min u0 = {min_u0:e}, c0 = {c0:e})"),
            ));
        }
        let min_gap = u0.as_slice().iter().zip(gap.as_slice()).map(|(a, b)| a + b).fold(f64::INFINITY, f64::min);
        if !(min_gap > law.gamma()) {
            return Err(Error::invalid("u + g > gamma", "initial state already violates the penetration bound"));
        }
        if self.model.bc == BcKind::SimplySupported {
            let spec = i.u0.compile()?;
            let bc = BoundaryCondition::from_data(BcKind::SimplySupported, grid, |x, y| spec.eval(x, y, 0.0));
            if !bc.has_constant_trace(1e-12 * (1.0 + min_u0.abs())) {
                return Err(Error::invalid(
                    "simply supported needs constant boundary data",
                    "simply supported plates are restricted to constant u0 on the boundary",
                ));
            }
        }
        if self.model.kind == ModelKind::ReissnerMindlin && self.model.bc == BcKind::Clamped {
            for (name, spec) in [("phi0_1", &i.phi0_1), ("phi0_2", &i.phi0_2)] {
                let f = spec.compile()?.sample(grid, 0.0);
                let g = grid;
                let on_ring = (0..g.node_count()).filter(|&k| {
                    let (a, b) = g.ij(k);
                    !g.is_interior(a, b)
                });
                if on_ring.into_iter().any(|k| f.as_slice()[k] != 0.0) {
                    return Err(Error::invalid("phi = 0 on a clamped boundary", format!("{name} must vanish on the boundary of a clamped plate")));
                }
            }
        }
        Ok(())
    }
}

/// Reads and validates a scenario file.
pub fn parse_scenario(path: &Path, overrides: &[(String, String)]) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Scenario::from_toml_str(&text, overrides)
}

/// Splits `key=value`.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(Error::invalid("override is key=value", format!("malformed override '{s}'"))),
    }
}

fn apply_override(root: &mut toml::Value, key: &str, raw: &str) -> Result<()> {
    let value = parse_value(raw);
    let parts: Vec<&str> = key.split('.').collect();
    let mut cur = root;
    for (n, part) in parts.iter().enumerate() {
        let table = cur
            .as_table_mut()
            .ok_or_else(|| Error::invalid("override path names tables", format!("'{key}' descends into a non-table")))?;
        if n + 1 == parts.len() {
            table.insert(part.to_string(), value);
            return Ok(());
        }
        cur = table.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::map::Map::new()));
    }
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn toml_error(text: &str, e: &toml::de::Error) -> Error {
    let (line, column) = match e.span() {
        Some(span) => {
            let before = &text[..span.start.min(text.len())];
            let line = before.matches('\n').count() + 1;
            let column = before.rfind('\n').map_or(before.len(), |p| before.len() - p - 1) + 1;
            (line, column)
        }
        None => (0, 0),
    };
    Error::Parse { line, column, message: e.message().to_string() }
}
