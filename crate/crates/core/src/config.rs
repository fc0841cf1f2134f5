//! Run configuration: flat TOML with dotted keys.
//!
//! ```toml
//! scenario = "hvz"
//! statistics = "fermion"
//! particles = 2
//! space.sites = 8
//! space.box = 8.0
//! potential.kind = "well"
//! potential.depth = 3.0
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::Statistics;
use crate::onebody::Boundary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Exact,
    Hf,
    Rank,
    Pekar,
    Hvz,
    Scan,
    Escaping,
}

impl Scenario {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "exact" => Self::Exact,
            "hf" => Self::Hf,
            "rank" => Self::Rank,
            "pekar" => Self::Pekar,
            "hvz" => Self::Hvz,
            "scan" => Self::Scan,
            "escaping" => Self::Escaping,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpaceSpec {
    pub dim: usize,
    pub sites: usize,
    pub box_len: f64,
    pub boundary: Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    None,
    Well { depth: f64, radius: f64 },
    Harmonic { omega: f64 },
    SoftCoulomb { charge: f64, regularization: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InteractionSpec {
    None,
    SoftCoulomb { strength: f64, regularization: Option<f64> },
    Constant { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverSpec {
    pub restarts: usize,
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
    pub binding_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PekarSpec {
    pub alpha: f64,
    pub u: f64,
    pub alphas: Vec<f64>,
    pub regularization: Option<f64>,
    pub damping: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EscapingSpec {
    pub center_site: usize,
    pub width: f64,
    pub indices: Vec<usize>,
    pub window: (usize, usize),
    pub tests_per_sector: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub seed: u64,
    pub statistics: Statistics,
    pub particles: usize,
    pub rank: Option<usize>,
    pub space: SpaceSpec,
    pub potential: PotentialSpec,
    pub interaction: InteractionSpec,
    pub solver: SolverSpec,
    pub pekar: PekarSpec,
    pub escaping: EscapingSpec,
    pub output_dir: Option<PathBuf>,
}

const KNOWN_KEYS: &[&str] = &[
    "scenario",
    "seed",
    "statistics",
    "particles",
    "rank",
    "space.dim",
    "space.sites",
    "space.box",
    "space.boundary",
    "potential.kind",
    "potential.depth",
    "potential.radius",
    "potential.omega",
    "potential.charge",
    "potential.regularization",
    "interaction.kind",
    "interaction.strength",
    "interaction.regularization",
    "interaction.value",
    "solver.restarts",
    "solver.gradient_tolerance",
    "solver.max_iterations",
    "solver.binding_tolerance",
    "pekar.alpha",
    "pekar.u",
    "pekar.alphas",
    "pekar.regularization",
    "pekar.damping",
    "escaping.center_site",
    "escaping.width",
    "escaping.indices",
    "escaping.window",
    "escaping.tests_per_sector",
    "output.dir",
];

fn config_error(key: &str, message: impl Into<String>) -> Error {
    Error::Config { key: key.to_string(), message: message.into() }
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, toml::Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

struct Keys(BTreeMap<String, toml::Value>);

impl Keys {
    fn float(&self, key: &str, default: f64) -> Result<f64> {
        self.opt_float(key).map(|v| v.unwrap_or(default))
    }

    fn opt_float(&self, key: &str) -> Result<Option<f64>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(toml::Value::Float(f)) if f.is_finite() => Ok(Some(*f)),
            Some(toml::Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(_) => Err(config_error(key, "expected a finite number")),
        }
    }

    fn uint(&self, key: &str, default: usize) -> Result<usize> {
        self.opt_uint(key).map(|v| v.unwrap_or(default))
    }

    fn opt_uint(&self, key: &str) -> Result<Option<usize>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(toml::Value::Integer(i)) if *i >= 0 => Ok(Some(*i as usize)),
            Some(_) => Err(config_error(key, "expected a nonnegative integer")),
        }
    }

    fn string<'a>(&'a self, key: &str, default: &'a str) -> Result<&'a str> {
        match self.0.get(key) {
            None => Ok(default),
            Some(toml::Value::String(s)) => Ok(s),
            Some(_) => Err(config_error(key, "expected a string")),
        }
    }

    fn float_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.0.get(key) {
            None => Ok(default.to_vec()),
            Some(toml::Value::Array(a)) => a
                .iter()
                .map(|v| match v {
                    toml::Value::Float(f) if f.is_finite() => Ok(*f),
                    toml::Value::Integer(i) => Ok(*i as f64),
                    _ => Err(config_error(key, "expected an array of numbers")),
                })
                .collect(),
            Some(_) => Err(config_error(key, "expected an array of numbers")),
        }
    }

    fn uint_list(&self, key: &str, default: &[usize]) -> Result<Vec<usize>> {
        match self.0.get(key) {
            None => Ok(default.to_vec()),
            Some(toml::Value::Array(a)) => a
                .iter()
                .map(|v| match v {
                    toml::Value::Integer(i) if *i >= 0 => Ok(*i as usize),
                    _ => Err(config_error(key, "expected an array of nonnegative integers")),
                })
                .collect(),
            Some(_) => Err(config_error(key, "expected an array of nonnegative integers")),
        }
    }

    fn reject_unless(&self, present: &[&str], kind_key: &str, kind: &str) -> Result<()> {
        let prefix = kind_key.split('.').next().unwrap();
        for key in self.0.keys().filter(|k| k.starts_with(&format!("{prefix}.")) && *k != kind_key) {
            if !present.contains(&key.as_str()) {
                return Err(config_error(key, format!("not used by {kind_key} = \"{kind}\"")));
            }
        }
        Ok(())
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_file_as(path, None)
    }

    /// Reads a config file; a given `scenario` replaces the `scenario` key,
    /// which may then be absent.
    pub fn from_file_as(path: &Path, scenario: Option<Scenario>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_error("<file>", format!("{}: {e}", path.display())))?;
        Self::parse_as(&text, scenario)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_as(text, None)
    }

    pub fn parse_as(text: &str, scenario: Option<Scenario>) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            config_error("<syntax>", e.message().to_string())
        })?;
        let mut flat = BTreeMap::new();
        flatten("", &table, &mut flat);
        if let Some(unknown) = flat.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            return Err(config_error(unknown, "unknown key"));
        }
        let keys = Keys(flat);

        let scenario_name = keys.string("scenario", "")?;
        let named = Scenario::parse(scenario_name);
        let bad_scenario = || config_error("scenario", "expected one of exact, hf, rank, pekar, hvz, scan, escaping");
        if !scenario_name.is_empty() && named.is_none() {
            return Err(bad_scenario());
        }
        let scenario = scenario.or(named).ok_or_else(bad_scenario)?;
        let statistics = match keys.string("statistics", "fermion")? {
            "fermion" => Statistics::Fermion,
            "boson" => Statistics::Boson,
            _ => return Err(config_error("statistics", "expected \"fermion\" or \"boson\"")),
        };
        let boundary = match keys.string("space.boundary", "dirichlet")? {
            "dirichlet" => Boundary::Dirichlet,
            "periodic" => Boundary::Periodic,
            _ => return Err(config_error("space.boundary", "expected \"dirichlet\" or \"periodic\"")),
        };
        let sites = keys.uint("space.sites", 8)?;
        let space = SpaceSpec { dim: keys.uint("space.dim", 1)?, sites, box_len: keys.float("space.box", sites as f64)?, boundary };

        let kind = keys.string("potential.kind", "none")?;
        let potential = match kind {
            "none" => {
                keys.reject_unless(&[], "potential.kind", kind)?;
                PotentialSpec::None
            }
            "well" => {
                keys.reject_unless(&["potential.depth", "potential.radius"], "potential.kind", kind)?;
                PotentialSpec::Well { depth: keys.float("potential.depth", 1.0)?, radius: keys.float("potential.radius", 1.0)? }
            }
            "harmonic" => {
                keys.reject_unless(&["potential.omega"], "potential.kind", kind)?;
                PotentialSpec::Harmonic { omega: keys.float("potential.omega", 1.0)? }
            }
            "soft_coulomb" => {
                keys.reject_unless(&["potential.charge", "potential.regularization"], "potential.kind", kind)?;
                PotentialSpec::SoftCoulomb {
                    charge: keys.float("potential.charge", 1.0)?,
                    regularization: keys.float("potential.regularization", 1.0)?,
                }
            }
            _ => return Err(config_error("potential.kind", "expected none, well, harmonic or soft_coulomb")),
        };

        let kind = keys.string("interaction.kind", "none")?;
        let interaction = match kind {
            "none" => {
                keys.reject_unless(&[], "interaction.kind", kind)?;
                InteractionSpec::None
            }
            "soft_coulomb" => {
                keys.reject_unless(&["interaction.strength", "interaction.regularization"], "interaction.kind", kind)?;
                InteractionSpec::SoftCoulomb {
                    strength: keys.float("interaction.strength", 1.0)?,
                    regularization: keys.opt_float("interaction.regularization")?,
                }
            }
            "constant" => {
                keys.reject_unless(&["interaction.value"], "interaction.kind", kind)?;
                InteractionSpec::Constant { value: keys.float("interaction.value", 1.0)? }
            }
            _ => return Err(config_error("interaction.kind", "expected none, soft_coulomb or constant")),
        };

        let solver = SolverSpec {
            restarts: keys.uint("solver.restarts", 8)?,
            gradient_tolerance: keys.float("solver.gradient_tolerance", 1e-6)?,
            max_iterations: keys.uint("solver.max_iterations", 3_000)?,
            binding_tolerance: keys.float("solver.binding_tolerance", 1e-8)?,
        };
        let pekar = PekarSpec {
            alpha: keys.float("pekar.alpha", 1.0)?,
            u: keys.float("pekar.u", 1.0)?,
            alphas: keys.float_list("pekar.alphas", &[0.0, 1.0, 2.0, 3.0])?,
            regularization: keys.opt_float("pekar.regularization")?,
            damping: keys.float("pekar.damping", 0.5)?,
        };
        let window = keys.uint_list("escaping.window", &[4, 17])?;
        if window.len() != 2 {
            return Err(config_error("escaping.window", "expected [first, last] site indices"));
        }
        let escaping = EscapingSpec {
            center_site: keys.uint("escaping.center_site", 10)?,
            width: keys.float("escaping.width", 4.0)?,
            indices: keys.uint_list("escaping.indices", &[0, 4, 8, 16, 32])?,
            window: (window[0], window[1]),
            tests_per_sector: keys.uint("escaping.tests_per_sector", 3)?,
        };
        let output_dir = match keys.0.get("output.dir") {
            None => None,
            Some(toml::Value::String(s)) => Some(PathBuf::from(s)),
            Some(_) => return Err(config_error("output.dir", "expected a string")),
        };
        let config = Self {
            scenario,
            seed: keys.uint("seed", 0)? as u64,
            statistics,
            particles: keys.uint("particles", 2)?,
            rank: keys.opt_uint("rank")?,
            space,
            potential,
            interaction,
            solver,
            pekar,
            escaping,
            output_dir,
        };
        config.validate()?;
        Ok(config)
    }

    /// Checks the preconditions of the operations the scenario will call.
    pub fn validate(&self) -> Result<()> {
        let s = &self.space;
        if !(1..=3).contains(&s.dim) {
            return Err(config_error("space.dim", "must be 1, 2 or 3"));
        }
        if s.sites < 2 {
            return Err(config_error("space.sites", "need at least 2 sites per axis"));
        }
        if s.sites.pow(s.dim as u32) > crate::onebody::DEFAULT_MODE_CAP {
            return Err(config_error("space.sites", format!("more than {} modes", crate::onebody::DEFAULT_MODE_CAP)));
        }
        if s.box_len <= 0.0 {
            return Err(config_error("space.box", "must be positive"));
        }
        let modes = s.sites.pow(s.dim as u32);
        if self.particles == 0 && self.scenario != Scenario::Escaping {
            return Err(config_error("particles", "must be at least 1"));
        }
        if self.statistics == Statistics::Fermion && self.particles > modes {
            return Err(config_error("particles", format!("{} fermions do not fit in {modes} modes", self.particles)));
        }
        if let Some(r) = self.rank {
            let lo = if self.statistics == Statistics::Fermion { self.particles } else { 1 };
            if r < lo || r > modes {
                return Err(config_error("rank", format!("must lie in {lo}..={modes}")));
            }
        }
        if self.scenario == Scenario::Rank && self.rank.is_none() {
            return Err(config_error("rank", "required by scenario \"rank\""));
        }
        if self.scenario == Scenario::Hf && self.statistics != Statistics::Fermion {
            return Err(config_error("statistics", "Hartree-Fock needs fermions"));
        }
        if self.solver.restarts == 0 {
            return Err(config_error("solver.restarts", "must be at least 1"));
        }
        if self.solver.gradient_tolerance <= 0.0 {
            return Err(config_error("solver.gradient_tolerance", "must be positive"));
        }
        if self.pekar.alpha < 0.0 {
            return Err(config_error("pekar.alpha", "must be nonnegative"));
        }
        if self.pekar.alphas.is_empty() || self.pekar.alphas.windows(2).any(|w| w[1] <= w[0]) || self.pekar.alphas[0] < 0.0 {
            return Err(config_error("pekar.alphas", "must be a nonempty strictly ascending list of nonnegative values"));
        }
        if !(self.pekar.damping > 0.0 && self.pekar.damping <= 1.0) {
            return Err(config_error("pekar.damping", "must lie in (0, 1]"));
        }
        if self.pekar.regularization.is_some_and(|a| a <= 0.0) {
            return Err(config_error("pekar.regularization", "must be positive"));
        }
        if self.scenario == Scenario::Escaping {
            let e = &self.escaping;
            if s.dim != 1 {
                return Err(config_error("space.dim", "the escaping scenario runs on a line"));
            }
            if e.center_site >= s.sites {
                return Err(config_error("escaping.center_site", "outside the lattice"));
            }
            if e.window.0 > e.window.1 || e.window.1 >= s.sites {
                return Err(config_error("escaping.window", "must be an ordered pair of site indices inside the lattice"));
            }
            if e.indices.is_empty() {
                return Err(config_error("escaping.indices", "must not be empty"));
            }
            let h = s.box_len / s.sites as f64;
            let reach = e.center_site as f64 + e.width / h + *e.indices.iter().max().unwrap() as f64;
            if reach >= s.sites as f64 {
                return Err(config_error("escaping.indices", "the translated bump leaves the box"));
            }
        }
        Ok(())
    }

    /// Flat `key = value` listing for the run manifest.
    pub fn flat_listing(&self) -> BTreeMap<String, serde_json::Value> {
        let mut out = BTreeMap::new();
        if let serde_json::Value::Object(map) = serde_json::to_value(self).unwrap_or_default() {
            flatten_json("", &serde_json::Value::Object(map), &mut out);
        }
        out
    }
}

fn flatten_json(prefix: &str, v: &serde_json::Value, out: &mut BTreeMap<String, serde_json::Value>) {
    match v {
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten_json(&key, v, out);
            }
        }
        other => {
            out.insert(prefix.to_string(), other.clone());
        }
    }
}
