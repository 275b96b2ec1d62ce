//! Strict `[group]` / `key = value` configuration files.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::electronic::{ElectronicMode, ElectronicSpec, GapData};
use crate::error::{Error, Result};
use crate::phasespace::{Bath, Ensemble, GridSpec, PhaseSpaceSpec};

const PHASE_SPACE_KEYS: &[&str] = &[
    "n_nuclei",
    "spatial_dim",
    "g_x",
    "h_x",
    "d_x",
    "x_origin",
    "g_p",
    "h_p",
    "d_p",
    "p_origin",
    "g_s",
    "h_s",
    "d_s",
    "s_origin",
    "g_ps",
    "h_ps",
    "d_ps",
    "ps_origin",
    "masses",
    "charges",
    "softening",
    "fixed_charges",
    "fixed_positions",
    "q",
    "temperature",
    "n_f",
    "s_min",
    "ensemble",
];

const ELECTRONIC_KEYS: &[&str] = &[
    "enabled",
    "n_electrons",
    "n_planewaves",
    "h_el",
    "mode",
    "fixed_charges",
    "fixed_positions",
    "gap_mu",
    "gap_gamma",
    "gap_delta",
    "eps_prep",
    "delta",
];

const EVOLVE_KEYS: &[&str] = &["t", "samples", "eps", "center", "width"];

const ALCHEMY_KEYS: &[&str] = &[
    "n_lambda",
    "t_eq",
    "eps",
    "xi",
    "estimation",
    "qae_ancillas",
    "cancel_shared_terms",
    "reference",
    "initial_lambda",
];

const POLY_KEYS: &[&str] = &["function", "alpha_t", "eps", "gamma", "xi", "samples"];

const DUMP_KEYS: &[&str] = &["operator"];

const GRID_SCAN_KEYS: &[&str] = &["grid_points", "orders", "frequency"];

const COST_KEYS: &[&str] = &[
    "alpha",
    "t",
    "eps",
    "lambda",
    "delta",
    "gamma",
    "eps_prep",
    "n_nuclei",
    "n_electrons",
    "xi",
    "eta",
];

const VERIFY_KEYS: &[&str] = &["t", "eps"];

fn schema(group: &str) -> Option<&'static [&'static str]> {
    match group {
        "phase_space" | "system_a.phase_space" | "system_b.phase_space" => Some(PHASE_SPACE_KEYS),
        "electronic" | "system_a.electronic" | "system_b.electronic" => Some(ELECTRONIC_KEYS),
        "evolve" => Some(EVOLVE_KEYS),
        "alchemy" => Some(ALCHEMY_KEYS),
        "poly" => Some(POLY_KEYS),
        "dump" => Some(DUMP_KEYS),
        "grid_scan" => Some(GRID_SCAN_KEYS),
        "cost" => Some(COST_KEYS),
        "verify" => Some(VERIFY_KEYS),
        _ => None,
    }
}

/// Parsed configuration: group name to key/value map.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    groups: BTreeMap<String, BTreeMap<String, String>>,
}

/// Read access to one group with typed conversion.
#[derive(Clone, Copy, Debug)]
pub struct Group<'a> {
    name: &'a str,
    layers: [Option<&'a BTreeMap<String, String>>; 2],
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let mut groups: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |msg: String| Error::Config(format!("line {}: {msg}", lineno + 1));
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| at(format!("malformed group header '{line}'")))?
                    .trim()
                    .to_string();
                if schema(&name).is_none() {
                    return Err(at(format!("unknown group [{name}]")));
                }
                if groups.contains_key(&name) {
                    return Err(at(format!("duplicate group [{name}]")));
                }
                groups.insert(name.clone(), BTreeMap::new());
                current = Some(name);
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at(format!("expected 'key = value', got '{line}'")))?;
            let key = key.trim().to_string();
            let group = current
                .as_ref()
                .ok_or_else(|| at(format!("key '{key}' appears before any group header")))?;
            let allowed = schema(group).unwrap_or(&[]);
            if !allowed.contains(&key.as_str()) {
                return Err(at(format!("unknown key '{key}' in [{group}]")));
            }
            let map = groups.get_mut(group).expect("group inserted at its header");
            if map.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(at(format!("duplicate key '{key}' in [{group}]")));
            }
        }
        Ok(Config { groups })
    }

    pub fn from_file(path: &std::path::Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Config::parse(&text)
    }

    pub fn has(&self, group: &str) -> bool {
        self.groups.contains_key(group)
    }

    pub fn group<'a>(&'a self, name: &'a str) -> Group<'a> {
        Group {
            name,
            layers: [self.groups.get(name), None],
        }
    }

    /// `base` values overridden by `over`.
    pub fn layered<'a>(&'a self, over: &'a str, base: &'a str) -> Group<'a> {
        Group {
            name: over,
            layers: [self.groups.get(over), self.groups.get(base)],
        }
    }

    /// Phase-space spec from `[phase_space]`.
    pub fn phase_space(&self) -> Result<PhaseSpaceSpec> {
        phase_space_from(self.group("phase_space"))
    }

    /// Electronic spec from `[electronic]`, `None` when the group is absent or disabled.
    pub fn electronic(&self, spatial_dim: usize) -> Result<Option<ElectronicSpec>> {
        electronic_from(self.group("electronic"), spatial_dim)
    }

    /// Phase-space spec for `system_a` or `system_b`, layered over `[phase_space]`.
    pub fn system_phase_space(&self, system: &str) -> Result<PhaseSpaceSpec> {
        let over = format!("{system}.phase_space");
        phase_space_from(self.layered(&over, "phase_space"))
    }

    pub fn system_electronic(
        &self,
        system: &str,
        spatial_dim: usize,
    ) -> Result<Option<ElectronicSpec>> {
        let over = format!("{system}.electronic");
        electronic_from(self.layered(&over, "electronic"), spatial_dim)
    }
}

impl<'a> Group<'a> {
    pub fn is_empty(&self) -> bool {
        self.layers.iter().all(|l| l.is_none_or(|m| m.is_empty()))
    }

    fn raw(&self, key: &str) -> Option<&'a str> {
        self.layers
            .iter()
            .flatten()
            .find_map(|m| m.get(key))
            .map(String::as_str)
    }

    fn bad(&self, key: &str, value: &str, what: &str) -> Error {
        Error::Config(format!(
            "[{}] {key} = '{value}': expected {what}",
            self.name
        ))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| self.bad(key, v, std::any::type_name::<T>())),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?
            .ok_or_else(|| Error::Config(format!("[{}] missing required key '{key}'", self.name)))
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key) {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(v) => Err(self.bad(key, v, "true or false")),
        }
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) if v.trim().is_empty() => Ok(Some(Vec::new())),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<T>()
                        .map_err(|_| self.bad(key, v, "a comma-separated list"))
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    pub fn list_or<T: FromStr>(&self, key: &str, default: Vec<T>) -> Result<Vec<T>> {
        Ok(self.list(key)?.unwrap_or(default))
    }
}

fn grid(g: Group, var: &str) -> Result<Option<GridSpec>> {
    let Some(n) = g.get::<usize>(&format!("g_{var}"))? else {
        return Ok(None);
    };
    let h: f64 = g.require(&format!("h_{var}"))?;
    let d: usize = g.get_or(&format!("d_{var}"), 1)?;
    let mut spec = GridSpec::centered(n, h, d);
    if let Some(o) = g.get::<f64>(&format!("{var}_origin"))? {
        spec.origin = o;
    }
    Ok(Some(spec))
}

fn positions(g: Group, key: &str, count: usize, dim: usize) -> Result<Vec<Vec<f64>>> {
    let flat: Vec<f64> = g.list_or(key, Vec::new())?;
    if flat.len() != count * dim {
        return Err(Error::Config(format!(
            "[{}] {key} needs {} values ({count} charges × {dim} coordinates), got {}",
            g.name,
            count * dim,
            flat.len()
        )));
    }
    Ok(flat.chunks(dim).map(<[f64]>::to_vec).collect())
}

fn phase_space_from(g: Group) -> Result<PhaseSpaceSpec> {
    if g.is_empty() {
        return Err(Error::Config(format!(
            "[{}] group is missing or empty",
            g.name
        )));
    }
    let n_nuclei: usize = g.require("n_nuclei")?;
    let spatial_dim: usize = g.get_or("spatial_dim", 1)?;
    let x = grid(g, "x")?.ok_or_else(|| Error::Config(format!("[{}] missing g_x", g.name)))?;
    let p = grid(g, "p")?.ok_or_else(|| Error::Config(format!("[{}] missing g_p", g.name)))?;
    let masses = g.list_or("masses", vec![1.0; n_nuclei])?;
    let charges = g.list_or("charges", vec![1.0; n_nuclei])?;
    let softening = g.get_or("softening", 1.0)?;
    let ensemble: Ensemble = g.get_or("ensemble", Ensemble::Nve)?;
    let mut spec = PhaseSpaceSpec::nve(n_nuclei, x, p, masses, charges, softening);
    spec.spatial_dim = spatial_dim;
    spec.ensemble = ensemble;
    spec.fixed_charges = g.list_or("fixed_charges", Vec::new())?;
    spec.fixed_positions = positions(g, "fixed_positions", spec.fixed_charges.len(), spatial_dim)?;
    let defaults = Bath {
        n_f: (n_nuclei * spatial_dim) as f64,
        ..Bath::default()
    };
    spec.bath = Bath {
        q: g.get_or("q", defaults.q)?,
        temperature: g.get_or("temperature", defaults.temperature)?,
        n_f: g.get_or("n_f", defaults.n_f)?,
        s_min: g.get_or("s_min", defaults.s_min)?,
    };
    spec.s = grid(g, "s")?;
    spec.ps = grid(g, "ps")?;
    if ensemble == Ensemble::Nve && (spec.s.is_some() || spec.ps.is_some()) {
        return Err(Error::Config(format!(
            "[{}] s/ps grids given for an NVE system",
            g.name
        )));
    }
    spec.validate()?;
    Ok(spec)
}

fn electronic_from(g: Group, spatial_dim: usize) -> Result<Option<ElectronicSpec>> {
    if g.is_empty() || !g.bool_or("enabled", true)? {
        return Ok(None);
    }
    let mut e = ElectronicSpec::new(
        g.require("n_electrons")?,
        g.require("n_planewaves")?,
        g.require("h_el")?,
    );
    e.spatial_dim = spatial_dim;
    e.mode = g.get_or("mode", ElectronicMode::Exact)?;
    e.fixed_charges = g.list_or("fixed_charges", Vec::new())?;
    e.fixed_positions = positions(g, "fixed_positions", e.fixed_charges.len(), spatial_dim)?;
    let gap = [
        g.get::<f64>("gap_mu")?,
        g.get::<f64>("gap_gamma")?,
        g.get::<f64>("gap_delta")?,
    ];
    e.gap = match gap {
        [Some(mu), Some(gamma), Some(delta)] => Some(GapData { mu, gamma, delta }),
        [None, None, None] => None,
        _ => {
            return Err(Error::Config(format!(
                "[{}] gap_mu, gap_gamma and gap_delta must be given together",
                g.name
            )))
        }
    };
    e.validate()?;
    Ok(Some(e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "
# comment
[phase_space]
n_nuclei = 1
g_x = 6
h_x = 0.3
d_x = 2
g_p = 6
h_p = 0.6
d_p = 2
charges = 1
softening = 1.5
fixed_charges = -1
fixed_positions = 0.0

[system_b.phase_space]
charges = 2
";

    #[test]
    fn parses_and_layers() {
        let c = Config::parse(SAMPLE).unwrap();
        let a = c.system_phase_space("system_a").unwrap();
        let b = c.system_phase_space("system_b").unwrap();
        assert_eq!(a.charges, vec![1.0]);
        assert_eq!(b.charges, vec![2.0]);
        assert_eq!(a.x, b.x);
        assert_eq!(a.fixed_positions, vec![vec![0.0]]);
        assert_eq!(a.x.origin, GridSpec::centered(6, 0.3, 2).origin);
        assert!(c.electronic(1).unwrap().is_none());
    }

    #[test]
    fn rejects_unknown_keys_and_groups() {
        assert!(Config::parse("[phase_space]\nbogus = 1\n").is_err());
        assert!(Config::parse("[nowhere]\n").is_err());
        assert!(Config::parse("n_nuclei = 1\n").is_err());
        assert!(Config::parse("[evolve]\nt = 1\nt = 2\n").is_err());
        assert!(Config::parse("[evolve]\n[evolve]\n").is_err());
        assert!(Config::parse("[evolve]\nt 1\n").is_err());
    }

    #[test]
    fn typed_access() {
        let c = Config::parse(
            "[evolve]\nt = 1e-1\nsamples = 3\ncenter = 0, 0.5\n[alchemy]\nreference = false\n",
        )
        .unwrap();
        let g = c.group("evolve");
        assert_eq!(g.require::<f64>("t").unwrap(), 0.1);
        assert_eq!(g.list::<f64>("center").unwrap().unwrap(), vec![0.0, 0.5]);
        assert!(g.require::<f64>("eps").is_err());
        assert!(g.get::<usize>("t").is_err());
        assert!(!c.group("alchemy").bool_or("reference", true).unwrap());
        let bad = Config::parse("[alchemy]\nreference = yes\n").unwrap();
        assert!(bad.group("alchemy").bool_or("reference", true).is_err());
    }

    #[test]
    fn electronic_group() {
        let text = "[electronic]\nn_electrons = 1\nn_planewaves = 3\nh_el = 1.0\nfixed_charges = -1\nfixed_positions = 0\n";
        let c = Config::parse(text).unwrap();
        let e = c.electronic(1).unwrap().unwrap();
        assert_eq!(e.n_planewaves, 3);
        assert_eq!(e.mode, ElectronicMode::Exact);
        let off = Config::parse(&format!("{text}enabled = false\n")).unwrap();
        assert!(off.electronic(1).unwrap().is_none());
        let partial = Config::parse(&format!("{text}gap_mu = 0.1\n")).unwrap();
        assert!(partial.electronic(1).is_err());
    }
}
