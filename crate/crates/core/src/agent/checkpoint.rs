//! Policy checkpoints: a plain-text header terminated by a `---` line,
//! followed by the parameters as little-endian `f64`s.

use std::path::Path;

use super::policy::{GaussianPolicy, PolicyArch};
use super::AgentError;

pub const FORMAT: &str = "mtbench-policy";
pub const VERSION: u32 = 1;

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}

pub fn encode(policy: &GaussianPolicy, config_hash: &str) -> Vec<u8> {
    let a = &policy.arch;
    let hidden = a.hidden.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(",");
    let header = format!(
        "{FORMAT} v{VERSION}\nobs_dim={}\nact_dim={}\nhidden={hidden}\nhidden_activation=relu\noutput_activation=tanh\n\
         center={}\nhalf_range={}\nconfig_hash={config_hash}\nparams={}\n---\n",
        a.obs_dim,
        a.act_dim,
        join(&policy.center),
        join(&policy.half_range),
        policy.params.len()
    );
    let mut out = header.into_bytes();
    for p in &policy.params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

fn bad(msg: impl Into<String>) -> AgentError {
    AgentError::Checkpoint(msg.into())
}

/// Decodes a checkpoint, returning the policy and its config hash.
pub fn decode(bytes: &[u8]) -> Result<(GaussianPolicy, String), AgentError> {
    const SEP: &[u8] = b"\n---\n";
    let split = bytes.windows(SEP.len()).position(|w| w == SEP).ok_or_else(|| bad("missing header terminator"))?;
    let header = std::str::from_utf8(&bytes[..split]).map_err(|_| bad("header is not UTF-8"))?;
    let blob = &bytes[split + SEP.len()..];

    let mut lines = header.lines();
    let magic = lines.next().unwrap_or_default();
    if magic != format!("{FORMAT} v{VERSION}") {
        return Err(bad(format!("unsupported checkpoint `{magic}`")));
    }
    let mut fields = std::collections::HashMap::new();
    for l in lines {
        let (k, v) = l.split_once('=').ok_or_else(|| bad(format!("bad header line `{l}`")))?;
        fields.insert(k, v);
    }
    let get = |k: &str| fields.get(k).copied().ok_or_else(|| bad(format!("missing `{k}`")));
    let int = |k: &str| get(k)?.parse::<usize>().map_err(|_| bad(format!("bad `{k}`")));
    let floats = |k: &str| -> Result<Vec<f64>, AgentError> {
        let s = get(k)?;
        if s.is_empty() {
            return Ok(vec![]);
        }
        s.split(',').map(|x| x.parse::<f64>().map_err(|_| bad(format!("bad `{k}`")))).collect()
    };
    let hidden: Vec<usize> = match get("hidden")? {
        "" => vec![],
        s => s.split(',').map(|x| x.parse().map_err(|_| bad("bad `hidden`"))).collect::<Result<_, _>>()?,
    };
    if get("hidden_activation")? != "relu" || get("output_activation")? != "tanh" {
        return Err(bad("unsupported activations"));
    }
    let arch = PolicyArch::new(int("obs_dim")?, int("act_dim")?, &hidden);
    let n = int("params")?;
    if n != arch.n_params() || blob.len() != 8 * n {
        return Err(bad(format!(
            "expected {} parameters, header says {n}, blob holds {} bytes",
            arch.n_params(),
            blob.len()
        )));
    }
    let params = blob.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    let center = floats("center")?;
    let half_range = floats("half_range")?;
    if center.len() != arch.act_dim || half_range.len() != arch.act_dim {
        return Err(bad("action bounds do not match act_dim"));
    }
    Ok((GaussianPolicy { arch, params, center, half_range }, get("config_hash")?.to_string()))
}

pub fn save(path: &Path, policy: &GaussianPolicy, config_hash: &str) -> Result<(), AgentError> {
    std::fs::write(path, encode(policy, config_hash))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(GaussianPolicy, String), AgentError> {
    decode(&std::fs::read(path)?)
}
