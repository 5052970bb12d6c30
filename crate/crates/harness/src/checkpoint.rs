//! Plain-text restart files holding `(q, q_prev, ψ)`.

use std::path::Path;

use ieqsim::integrators::Checkpoint;

use crate::error::{config_err, HarnessError, Result};
use crate::table::{fmt_f64, join};

pub fn write_checkpoint(path: &Path, cp: &Checkpoint) -> Result<()> {
    let psi = cp.psi.map_or_else(|| "none".to_string(), fmt_f64);
    let text = format!(
        "step = {}\ndt = {}\npsi = {}\nq = {}\nq_prev = {}\n",
        cp.step,
        fmt_f64(cp.dt),
        psi,
        join(&cp.q),
        join(&cp.q_prev)
    );
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path)?;
    parse_checkpoint(&text)
}

pub fn parse_checkpoint(text: &str) -> Result<Checkpoint> {
    let bad = |what: &str| HarnessError::Config(format!("checkpoint: bad {what}"));
    let floats = |v: &str| -> Result<Vec<f64>> {
        v.split(',').map(|x| x.trim().parse::<f64>().map_err(|_| bad("vector entry"))).collect()
    };
    let (mut step, mut dt, mut psi, mut q, mut q_prev) = (None, None, None, None, None);
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let (k, v) = line.split_once('=').ok_or_else(|| bad("line"))?;
        let v = v.trim();
        match k.trim() {
            "step" => step = Some(v.parse::<usize>().map_err(|_| bad("step"))?),
            "dt" => dt = Some(v.parse::<f64>().map_err(|_| bad("dt"))?),
            "psi" => psi = Some(if v == "none" { None } else { Some(v.parse::<f64>().map_err(|_| bad("psi"))?) }),
            "q" => q = Some(floats(v)?),
            "q_prev" => q_prev = Some(floats(v)?),
            other => return config_err(format!("checkpoint: unknown key `{other}`")),
        }
    }
    match (step, dt, psi, q, q_prev) {
        (Some(step), Some(dt), Some(psi), Some(q), Some(q_prev)) if q.len() == q_prev.len() => {
            Ok(Checkpoint { step, dt, q, q_prev, psi })
        }
        _ => config_err("checkpoint: missing or inconsistent fields"),
    }
}
