//! Run configuration: a TOML (or JSON) document with one table per concern,
//! plus `key=value` overrides addressed by dotted paths.

use std::path::{Path, PathBuf};

use andersen_core::geometry::SpaceSpec;
use andersen_core::harness::{
    CouplingSpec, DynamicsSpec, Experiment, ExperimentSpec, SweepAxis, SweepTarget,
};
use andersen_core::potentials::PotentialSpec;
use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub space: SpaceSpec,
    pub potential: PotentialSpec,
    pub dynamics: DynamicsSpec,
    /// Required by `couple` and `sweep`; `simulate` ignores it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingSpec>,
    pub experiment: ExperimentSpec,
    #[serde(default, skip_serializing_if = "OutputSpec::is_empty")]
    pub output: OutputSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// CSV destination; stdout when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// JSON sidecar; defaults to `<path>.meta.json` when `path` is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<PathBuf>,
}

impl OutputSpec {
    fn is_empty(&self) -> bool {
        self.path.is_none() && self.meta.is_none()
    }

    pub fn meta_path(&self) -> Option<PathBuf> {
        self.meta.clone().or_else(|| {
            self.path.as_ref().map(|p| {
                let mut s = p.clone().into_os_string();
                s.push(".meta.json");
                PathBuf::from(s)
            })
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    #[serde(flatten)]
    pub target: SweepTarget,
}

impl RunConfig {
    /// The experiment for a coupled run.
    pub fn coupled_experiment(&self) -> Result<Experiment> {
        let coupling = self
            .coupling
            .clone()
            .ok_or_else(|| anyhow!("missing [coupling] section"))?;
        Ok(Experiment {
            space: self.space.clone(),
            potential: self.potential.clone(),
            dynamics: self.dynamics.clone(),
            coupling,
            experiment: self.experiment.clone(),
        })
    }

    /// The same config with output paths stripped; this is what goes into
    /// the meta sidecar so that reruns are independent of where files went.
    pub fn without_output(&self) -> RunConfig {
        RunConfig {
            output: OutputSpec::default(),
            ..self.clone()
        }
    }
}

/// Reads a config file. A meta sidecar is accepted too: its `config` entry
/// is used.
pub fn load_tree(path: &Path) -> Result<Value> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let mut tree: Value = if is_json {
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
    } else {
        let table: toml::Table =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        serde_json::to_value(table)?
    };
    if tree.get("space").is_none() {
        if let Some(inner) = tree.get_mut("config") {
            tree = inner.take();
        }
    }
    if !tree.is_object() {
        bail!("{} does not hold a table", path.display());
    }
    Ok(tree)
}

/// Applies `section.key=value`. The value is read as a TOML value when it
/// parses as one and as a bare string otherwise.
pub fn apply_override(tree: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| anyhow!("override {assignment:?} is not of the form key=value"))?;
    let key = key.trim();
    let raw = raw.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        bail!("override {assignment:?} has an empty key");
    }
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => serde_json::to_value(t.remove("v").expect("key v was just parsed"))?,
        Err(_) => Value::String(raw.to_string()),
    };
    let mut node = tree;
    let mut parts = key.split('.').peekable();
    while let Some(part) = parts.next() {
        let map = node
            .as_object_mut()
            .ok_or_else(|| anyhow!("cannot set {key}: {part:?} is inside a non-table value"))?;
        if parts.peek().is_none() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
    }
    unreachable!("split always yields at least one part")
}

/// Fills `key` with `value` only when it is absent.
pub fn set_default(tree: &mut Value, section: &str, key: &str, value: Value) {
    if let Some(map) = tree.as_object_mut() {
        let table = map
            .entry(section.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
        if let Some(table) = table.as_object_mut() {
            table.entry(key.to_string()).or_insert(value);
        }
    }
}

pub fn parse(tree: Value) -> Result<RunConfig> {
    serde_json::from_value(tree).context("invalid configuration")
}
