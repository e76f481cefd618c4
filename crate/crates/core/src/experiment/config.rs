//! Flat `key = value` experiment files.
//!
//! ```text
//! # scene
//! T = 1000
//! sigma_in = 0.5
//! m_c = 0.3, 0.3
//!
//! [mmd-closest]
//! distance = MMD
//! variant = closest
//! ```
//!
//! Keys before the first `[name]` header form the base; each header opens an override
//! block applied on top of the base. Without blocks the file describes one experiment.

use std::path::Path;

use crate::error::{Error, Result};
use crate::solve::InitPolicy;
use crate::Point;

use super::ExperimentConfig;

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    line: usize,
    key: String,
    value: String,
}

/// A parsed file: the base experiment and its named override blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigFile {
    pub base: ExperimentConfig,
    pub blocks: Vec<(String, ExperimentConfig)>,
}

impl ConfigFile {
    /// The blocks, or the base alone when there are none.
    pub fn experiments(&self) -> Vec<(String, ExperimentConfig)> {
        if self.blocks.is_empty() {
            vec![("base".to_string(), self.base.clone())]
        } else {
            self.blocks.clone()
        }
    }
}

pub fn parse_config_file(path: &Path, defaults: &ExperimentConfig) -> Result<ConfigFile> {
    parse_config_over(&std::fs::read_to_string(path)?, defaults)
}

/// Parses on top of [`ExperimentConfig::default`].
pub fn parse_config(text: &str) -> Result<ConfigFile> {
    parse_config_over(text, &ExperimentConfig::default())
}

/// Parses on top of `defaults`.
pub fn parse_config_over(text: &str, defaults: &ExperimentConfig) -> Result<ConfigFile> {
    let mut base = Vec::new();
    let mut blocks: Vec<(String, Vec<Entry>)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| Error::Parse { line, message: "unterminated block header".into() })?
                .trim();
            if name.is_empty() {
                return Err(Error::Parse { line, message: "empty block name".into() });
            }
            blocks.push((name.to_string(), Vec::new()));
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| Error::Parse { line, message: format!("expected 'key = value', got '{content}'") })?;
        let entry = Entry { line, key: key.trim().to_string(), value: value.trim().to_string() };
        match blocks.last_mut() {
            Some((_, entries)) => entries.push(entry),
            None => base.push(entry),
        }
    }
    let base_config = apply(defaults, &base)?;
    let blocks = blocks
        .into_iter()
        .map(|(name, entries)| {
            let all: Vec<Entry> = base.iter().cloned().chain(entries).collect();
            Ok((name, apply(defaults, &all)?))
        })
        .collect::<Result<_>>()?;
    Ok(ConfigFile { base: base_config, blocks })
}

fn num<T: std::str::FromStr>(e: &Entry) -> Result<T> {
    e.value
        .parse()
        .map_err(|_| Error::Parse { line: e.line, message: format!("bad value '{}' for {}", e.value, e.key) })
}

fn vector(e: &Entry) -> Result<Point> {
    let parts: Vec<f64> = e
        .value
        .split(',')
        .map(|p| p.trim().parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Parse { line: e.line, message: format!("bad vector '{}' for {}", e.value, e.key) })?;
    Ok(Point::from_vec(parts))
}

/// Later entries win. `sigma_in` is resolved last: it fixes the cluster step so that
/// `sigma_c^2 + sigma_pc^2 = sigma_in^2` for whatever wiggle is in force.
fn apply(defaults: &ExperimentConfig, entries: &[Entry]) -> Result<ExperimentConfig> {
    let mut c = defaults.clone();
    let mut sigma_in: Option<(usize, f64)> = None;
    let mut sigma_c_line = None;
    for e in entries {
        let parse_err = |err: Error| match err {
            Error::Parse { .. } => err,
            other => Error::Parse { line: e.line, message: other.to_string() },
        };
        match e.key.as_str() {
            "d" | "dim" => c.sim.dim = num(e)?,
            "T" | "horizon" => c.sim.horizon = num(e)?,
            "N" | "n_clusters" => c.sim.n_clusters = num(e)?,
            "r" | "radius" => c.sim.radius = num(e)?,
            "b" | "arena" => c.sim.arena = num(e)?,
            "m_c" | "mu_in" | "cluster_drift" => c.sim.cluster_drift = vector(e)?,
            "sigma_c" | "cluster_sigma" => {
                c.sim.cluster_sigma = num(e)?;
                sigma_c_line = Some(e.line);
            }
            "sigma_pc" | "wiggle_sigma" => c.sim.wiggle_sigma = num(e)?,
            "sigma_in" => sigma_in = Some((e.line, num(e)?)),
            "m_out" | "mu_out" | "outside_drift" => c.sim.outside_drift = vector(e)?,
            "sigma_out" | "outside_sigma" => c.sim.outside_sigma = num(e)?,
            "R" | "radius_bound" => c.radius_bound = num(e)?,
            "k" => c.k = num(e)?,
            "distance" => c.distance = e.value.parse().map_err(parse_err)?,
            "variant" => c.variant = e.value.parse().map_err(parse_err)?,
            "beta_r" => c.beta_r = num(e)?,
            "beta_s" => c.beta_s = num(e)?,
            "runs" => c.runs = num(e)?,
            "trials" => c.trials = num(e)?,
            "seed" | "master_seed" => c.master_seed = num(e)?,
            "learning_rate" => c.solver.learning_rate = num(e)?,
            "iterations" => c.solver.iterations = num(e)?,
            "adam_beta1" => c.solver.adam_beta1 = num(e)?,
            "adam_beta2" => c.solver.adam_beta2 = num(e)?,
            "epsilon" => c.solver.epsilon = num(e)?,
            "init" | "init_value" => {
                c.solver.init = if e.value.eq_ignore_ascii_case("uniform") {
                    InitPolicy::Uniform { seed: 0 }
                } else {
                    InitPolicy::Constant(num(e)?)
                }
            }
            other => return Err(Error::Parse { line: e.line, message: format!("unknown key '{other}'") }),
        }
    }
    if let Some((line, s)) = sigma_in {
        if let Some(c_line) = sigma_c_line {
            return Err(Error::Parse {
                line: line.max(c_line),
                message: "give either sigma_in or sigma_c, not both".into(),
            });
        }
        if c.sim.wiggle_sigma > s {
            return Err(Error::Parse { line, message: format!("sigma_pc {} exceeds sigma_in {s}", c.sim.wiggle_sigma) });
        }
        c.sim.cluster_sigma = (s * s - c.sim.wiggle_sigma.powi(2)).sqrt();
    }
    Ok(c)
}
