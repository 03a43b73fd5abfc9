//! Run configuration: sectioned `key = value` files plus `--key value`
//! overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{PropagationOptions, PulseSpec};
use crate::eigen::SolverOptions;
use crate::error::{Error, Result};
use crate::operators::ChainSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Topological,
    Trivial,
}

impl std::str::FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "topological" => Ok(Phase::Topological),
            "trivial" => Ok(Phase::Trivial),
            other => Err(Error::param(format!(
                "phase must be topological or trivial, got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub sites: usize,
    pub phase: Phase,
    /// Explicit hoppings; `None` takes the phase default.
    pub v: Option<f64>,
    pub w: Option<f64>,
    pub u: f64,
    pub omega: f64,
    pub e0_over_omega: f64,
    pub n_cyc: u32,
    pub k: usize,
    pub tol: f64,
    pub seed: u64,
    pub samples: usize,
    pub ode_tol: f64,
    pub directory: PathBuf,
    pub formats: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let solver = SolverOptions::default();
        let pulse = PulseSpec::default();
        Self {
            sites: 12,
            phase: Phase::Topological,
            v: None,
            w: None,
            u: 0.1,
            omega: pulse.omega,
            e0_over_omega: pulse.e0 / pulse.omega,
            n_cyc: pulse.n_cyc,
            k: solver.k,
            tol: solver.tol,
            seed: solver.seed,
            samples: PropagationOptions::default().samples,
            ode_tol: PropagationOptions::default().rtol,
            directory: PathBuf::from("out"),
            formats: vec!["csv".into(), "json".into()],
        }
    }
}

/// `(section, key)` of every recognised setting.
pub const KEYS: &[(&str, &str)] = &[
    ("chain", "N"),
    ("chain", "phase"),
    ("chain", "v"),
    ("chain", "w"),
    ("chain", "U"),
    ("pulse", "omega"),
    ("pulse", "E0_over_omega"),
    ("pulse", "n_cyc"),
    ("solver", "k"),
    ("solver", "tol"),
    ("solver", "seed"),
    ("propagation", "M"),
    ("propagation", "ode_tol"),
    ("output", "directory"),
    ("output", "formats"),
];

/// Canonical `section.key` for `key` or `section.key`.
pub fn canonical_key(name: &str) -> Result<String> {
    let found = KEYS.iter().find(|(section, key)| {
        name == *key || name.strip_prefix(section).and_then(|r| r.strip_prefix('.')) == Some(*key)
    });
    match found {
        Some((section, key)) => Ok(format!("{section}.{key}")),
        None => Err(Error::param(format!("unknown configuration key {name:?}"))),
    }
}

/// Parses the sectioned text into `section.key -> value`.
pub fn parse_sections(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let mut section: Option<String> = None;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |reason: &str| Error::Format {
            what: "configuration".into(),
            reason: format!("line {}: {reason}", n + 1),
        };
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| bad("unterminated section header"))?
                .trim();
            if !KEYS.iter().any(|(s, _)| *s == name) {
                return Err(bad(&format!("unknown section [{name}]")));
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad("expected key = value"))?;
        let section = section
            .as_ref()
            .ok_or_else(|| bad("key outside of a section"))?;
        let full = format!("{section}.{}", key.trim());
        if !KEYS.iter().any(|(s, k)| format!("{s}.{k}") == full) {
            return Err(bad(&format!("unknown key {full}")));
        }
        out.insert(full, value.trim().to_string());
    }
    Ok(out)
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::param(format!("cannot parse {key} = {value:?}")))
}

impl RunConfig {
    /// Defaults, then the file (if any), then the overrides in order.
    pub fn load(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)?;
            for (key, value) in parse_sections(&text)? {
                cfg.set(&key, &value)?;
            }
        }
        for (key, value) in overrides {
            cfg.set(&canonical_key(key)?, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match canonical_key(key)?.as_str() {
            "chain.N" => self.sites = parse_value(key, value)?,
            "chain.phase" => self.phase = value.parse()?,
            "chain.v" => self.v = Some(parse_value(key, value)?),
            "chain.w" => self.w = Some(parse_value(key, value)?),
            "chain.U" => self.u = parse_value(key, value)?,
            "pulse.omega" => self.omega = parse_value(key, value)?,
            "pulse.E0_over_omega" => self.e0_over_omega = parse_value(key, value)?,
            "pulse.n_cyc" => self.n_cyc = parse_value(key, value)?,
            "solver.k" => self.k = parse_value(key, value)?,
            "solver.tol" => self.tol = parse_value(key, value)?,
            "solver.seed" => self.seed = parse_value(key, value)?,
            "propagation.M" => self.samples = parse_value(key, value)?,
            "propagation.ode_tol" => self.ode_tol = parse_value(key, value)?,
            "output.directory" => self.directory = PathBuf::from(value.trim()),
            "output.formats" => {
                self.formats = value
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect()
            }
            _ => unreachable!("canonical_key only returns listed keys"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.chain()?;
        self.pulse()?;
        if self.k == 0 {
            return Err(Error::param("k must be at least 1"));
        }
        if !(self.tol > 0.0) || !(self.ode_tol > 0.0) {
            return Err(Error::param("tolerances must be positive"));
        }
        if self.samples < 3 {
            return Err(Error::param("M must be at least 3"));
        }
        Ok(())
    }

    pub fn chain(&self) -> Result<ChainSpec> {
        let base = match self.phase {
            Phase::Topological => ChainSpec::topological(self.sites, self.u),
            Phase::Trivial => ChainSpec::trivial(self.sites, self.u),
        };
        ChainSpec::new(
            self.sites,
            self.v.unwrap_or(base.v),
            self.w.unwrap_or(base.w),
            self.u,
        )
    }

    pub fn pulse(&self) -> Result<PulseSpec> {
        PulseSpec::new(self.omega, self.e0_over_omega * self.omega, self.n_cyc)
    }

    pub fn solver(&self) -> SolverOptions {
        SolverOptions {
            k: self.k,
            tol: self.tol,
            seed: self.seed,
            ..SolverOptions::default()
        }
    }

    pub fn propagation(&self) -> PropagationOptions {
        PropagationOptions {
            samples: self.samples,
            rtol: self.ode_tol,
            atol: self.ode_tol,
        }
    }

    /// Hash of everything the eigen-decomposition depends on.
    pub fn checkpoint_key(&self) -> Result<String> {
        let chain = self.chain()?;
        let canonical = format!(
            "N={};v={:e};w={:e};U={:e};k={};tol={:e};seed={}",
            chain.sites, chain.v, chain.w, chain.u, self.k, self.tol, self.seed
        );
        let digest = Sha256::digest(canonical.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    /// Default checkpoint location inside the output directory.
    pub fn checkpoint_path(&self) -> Result<PathBuf> {
        let key = self.checkpoint_key()?;
        Ok(self.directory.join(format!("ed_{}.bin", &key[..16])))
    }

    /// The effective settings in file syntax.
    pub fn to_text(&self) -> Result<String> {
        let chain = self.chain()?;
        let phase = match self.phase {
            Phase::Topological => "topological",
            Phase::Trivial => "trivial",
        };
        Ok(format!(
            "[chain]\nN = {}\nphase = {phase}\nv = {}\nw = {}\nU = {}\n\n\
             [pulse]\nomega = {}\nE0_over_omega = {}\nn_cyc = {}\n\n\
             [solver]\nk = {}\ntol = {:e}\nseed = {}\n\n\
             [propagation]\nM = {}\node_tol = {:e}\n\n\
             [output]\ndirectory = {}\nformats = {}\n",
            chain.sites,
            chain.v,
            chain.w,
            chain.u,
            self.omega,
            self.e0_over_omega,
            self.n_cyc,
            self.k,
            self.tol,
            self.seed,
            self.samples,
            self.ode_tol,
            self.directory.display(),
            self.formats.join(",")
        ))
    }
}
