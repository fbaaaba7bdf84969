//! Plain-text parameter checkpoints.
//!
//! ```text
//! axppo-params v1 obs_dim=4 hidden=64,64 action_count=2 activation=tanh count=4675
//! 0.123...
//! -0.0456...
//! ```
//!
//! One value per line, written with Rust's shortest round-trip float
//! formatting, so a save/load cycle reproduces every bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::network::{NetworkConfig, ParameterSet};

const MAGIC: &str = "axppo-params";
const VERSION: &str = "v1";

pub fn write_checkpoint<W: Write>(mut out: W, config: &NetworkConfig, params: &ParameterSet) -> Result<()> {
    let hidden: Vec<String> = config.hidden_sizes().iter().map(usize::to_string).collect();
    writeln!(
        out,
        "{MAGIC} {VERSION} obs_dim={} hidden={} action_count={} activation={} count={}",
        config.obs_dim(),
        hidden.join(","),
        config.action_count(),
        config.activation().name(),
        params.len()
    )?;
    for v in params.as_slice() {
        writeln!(out, "{v:?}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(input: R) -> Result<(NetworkConfig, ParameterSet)> {
    let mut lines = BufReader::new(input).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Checkpoint("empty file".into()))??;
    let config = parse_header(&header)?;

    let mut values = Vec::with_capacity(config.param_count());
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| Error::Checkpoint(format!("bad value on line {}: {line:?}", idx + 2)))?;
        values.push(v);
    }
    let params = ParameterSet::from_vec(&config, values).map_err(|e| Error::Checkpoint(e.to_string()))?;
    Ok((config, params))
}

fn parse_header(header: &str) -> Result<NetworkConfig> {
    let bad = |msg: &str| Error::Checkpoint(format!("{msg} in header {header:?}"));
    let mut tokens = header.split_whitespace();
    if tokens.next() != Some(MAGIC) {
        return Err(bad("missing magic"));
    }
    if tokens.next() != Some(VERSION) {
        return Err(bad("unsupported version"));
    }

    let (mut obs_dim, mut hidden, mut actions, mut count) = (None, None, None, None);
    for token in tokens {
        let (key, value) = token.split_once('=').ok_or_else(|| bad("malformed field"))?;
        let int = |s: &str| s.parse::<usize>().map_err(|_| bad("non-integer field"));
        match key {
            "obs_dim" => obs_dim = Some(int(value)?),
            "action_count" => actions = Some(int(value)?),
            "count" => count = Some(int(value)?),
            "hidden" => {
                let sizes = if value.is_empty() {
                    Vec::new()
                } else {
                    value.split(',').map(int).collect::<Result<Vec<_>>>()?
                };
                hidden = Some(sizes);
            }
            "activation" if value == "tanh" => {}
            "activation" => return Err(bad("unsupported activation")),
            _ => return Err(bad("unknown field")),
        }
    }
    let config = NetworkConfig::new(
        obs_dim.ok_or_else(|| bad("missing obs_dim"))?,
        hidden.ok_or_else(|| bad("missing hidden"))?,
        actions.ok_or_else(|| bad("missing action_count"))?,
    )
    .map_err(|e| Error::Checkpoint(e.to_string()))?;
    if let Some(count) = count {
        if count != config.param_count() {
            return Err(bad("count does not match layer sizes"));
        }
    }
    Ok(config)
}

pub fn save_checkpoint(path: &Path, config: &NetworkConfig, params: &ParameterSet) -> Result<()> {
    write_checkpoint(BufWriter::new(File::create(path)?), config, params)
}

pub fn load_checkpoint(path: &Path) -> Result<(NetworkConfig, ParameterSet)> {
    read_checkpoint(File::open(path)?)
}
