//! Line-oriented run configuration.
//!
//! ```text
//! # comments start with '#' or ';'
//! [method]
//! preset = rg-drho-dc-rp
//!
//! [schedule]
//! steps = 300
//! nu = 13
//!
//! [guidance]
//! rho_prime = 0.5
//!
//! [task]
//! task = declip
//! sdr = 5
//! ```
//!
//! Sections and keys:
//!
//! | section      | keys |
//! |--------------|------|
//! | `[method]`   | `preset` |
//! | `[schedule]` | `steps`, `nu`, `sigma_min`, `sigma_max`, `s_churn`, `s_noise`, `s_tmin`, `s_tmax` |
//! | `[guidance]` | `guidance`, `rho_prime`, `delta_rho`, `delta_rho_divisor`, `rho_time_convention`, `grad_norm_power` |
//! | `[sampler]`  | `dc`, `dc_order`, `order`, `seed` |
//! | `[repaint]`  | `rp`, `u`, `phi1`, `phi2` |
//! | `[task]`     | `task` (`declip`/`bwe`), `sdr`, `fc`, `sigma_y` |
//!
//! A preset supplies the starting sampler configuration; explicit keys
//! override it. Unknown sections or keys, duplicates and malformed values
//! are errors.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::presets::{Preset, Task};
use crate::error::{Error, Result};
use crate::sampler::SamplerConfig;
use crate::schedule::ScheduleParams;

const SECTIONS: &[(&str, &[&str])] = &[
    ("method", &["preset"]),
    (
        "schedule",
        &["steps", "nu", "sigma_min", "sigma_max", "s_churn", "s_noise", "s_tmin", "s_tmax"],
    ),
    (
        "guidance",
        &[
            "guidance",
            "rho_prime",
            "delta_rho",
            "delta_rho_divisor",
            "rho_time_convention",
            "grad_norm_power",
        ],
    ),
    ("sampler", &["dc", "dc_order", "order", "seed"]),
    ("repaint", &["rp", "u", "phi1", "phi2"]),
    ("task", &["task", "sdr", "fc", "sigma_y"]),
];

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    line: usize,
    key: String,
    value: String,
}

/// A parsed configuration file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub preset: Option<Preset>,
    pub task: Option<Task>,
    pub sigma_y: Option<f64>,
    pub schedule: ScheduleParams,
    sampler_keys: Vec<Entry>,
}

fn cfg_err(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

fn parse_value<T: FromStr>(e: &Entry) -> Result<T> {
    e.value
        .parse()
        .map_err(|_| cfg_err(e.line, format!("bad value `{}` for `{}`", e.value, e.key)))
}

fn parse_bool(e: &Entry) -> Result<bool> {
    match e.value.as_str() {
        "true" | "on" | "yes" => Ok(true),
        "false" | "off" | "no" => Ok(false),
        _ => Err(cfg_err(e.line, format!("`{}` expects true/false, got `{}`", e.key, e.value))),
    }
}

fn apply_sampler_key(cfg: &mut SamplerConfig, e: &Entry) -> Result<()> {
    match e.key.as_str() {
        "guidance" => cfg.guidance.kind = wrap_parse(e)?,
        "rho_prime" => cfg.guidance.rho_prime = parse_value(e)?,
        "delta_rho" => cfg.guidance.delta_rho = parse_bool(e)?,
        "delta_rho_divisor" => cfg.guidance.delta_rho_divisor = parse_value(e)?,
        "rho_time_convention" => cfg.guidance.rho_time_convention = wrap_parse(e)?,
        "grad_norm_power" => cfg.guidance.grad_norm_power = parse_value(e)?,
        "dc" => cfg.dc_enabled = parse_bool(e)?,
        "dc_order" => cfg.dc_order = wrap_parse(e)?,
        "order" => cfg.order = parse_value(e)?,
        "seed" => cfg.seed = parse_value(e)?,
        "rp" => cfg.rp.enabled = parse_bool(e)?,
        "u" => cfg.rp.u = parse_value(e)?,
        "phi1" => cfg.rp.phi1 = parse_value(e)?,
        "phi2" => cfg.rp.phi2 = parse_value(e)?,
        _ => unreachable!("key list checked by the parser"),
    }
    Ok(())
}

fn wrap_parse<T: FromStr<Err = Error>>(e: &Entry) -> Result<T> {
    e.value.parse().map_err(|err: Error| cfg_err(e.line, err.to_string()))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = RunConfig::default();
        let mut section: Option<&'static str> = None;
        let mut seen: Vec<(&'static str, String)> = Vec::new();
        let mut task_keys: Vec<Entry> = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split(['#', ';']).next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(name) = body.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| cfg_err(line, format!("malformed section header `{body}`")))?
                    .trim();
                section = Some(
                    SECTIONS
                        .iter()
                        .find(|(s, _)| *s == name)
                        .map(|(s, _)| *s)
                        .ok_or_else(|| cfg_err(line, format!("unknown section `[{name}]`")))?,
                );
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| cfg_err(line, format!("expected `key = value`, got `{body}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let sec = section.ok_or_else(|| cfg_err(line, format!("key `{key}` outside any section")))?;
            let allowed = SECTIONS.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k).unwrap_or(&[]);
            if !allowed.contains(&key) {
                return Err(cfg_err(line, format!("unknown key `{key}` in [{sec}]")));
            }
            if seen.iter().any(|(s, k)| *s == sec && k == key) {
                return Err(cfg_err(line, format!("duplicate key `{key}` in [{sec}]")));
            }
            seen.push((sec, key.to_string()));
            let e = Entry {
                line,
                key: key.to_string(),
                value: value.to_string(),
            };
            match sec {
                "method" => out.preset = Some(wrap_parse(&e)?),
                "schedule" => out.apply_schedule_key(&e)?,
                "task" => task_keys.push(e),
                _ => {
                    // type-check now so errors carry a line number
                    apply_sampler_key(&mut SamplerConfig::default(), &e)?;
                    out.sampler_keys.push(e);
                }
            }
        }
        out.finish_task(&task_keys)?;
        Ok(out)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    fn apply_schedule_key(&mut self, e: &Entry) -> Result<()> {
        let s = &mut self.schedule;
        match e.key.as_str() {
            "steps" => s.steps = parse_value(e)?,
            "nu" => s.nu = parse_value(e)?,
            "sigma_min" => s.sigma_min = parse_value(e)?,
            "sigma_max" => s.sigma_max = parse_value(e)?,
            "s_churn" => s.s_churn = parse_value(e)?,
            "s_noise" => s.s_noise = parse_value(e)?,
            "s_tmin" => s.s_tmin = parse_value(e)?,
            "s_tmax" => s.s_tmax = parse_value(e)?,
            _ => unreachable!("key list checked by the parser"),
        }
        Ok(())
    }

    fn finish_task(&mut self, keys: &[Entry]) -> Result<()> {
        let get = |k: &str| keys.iter().find(|e| e.key == k);
        if let Some(e) = get("sigma_y") {
            let v: f64 = parse_value(e)?;
            if !(v.is_finite() && v >= 0.0) {
                return Err(cfg_err(e.line, "sigma_y must be finite and non-negative"));
            }
            self.sigma_y = Some(v);
        }
        let (sdr, fc) = (get("sdr"), get("fc"));
        match get("task") {
            None => {
                if let Some(e) = sdr.or(fc) {
                    return Err(cfg_err(e.line, format!("`{}` given without `task`", e.key)));
                }
            }
            Some(t) => {
                let (name, sev) = match t.value.as_str() {
                    "declip" => ("declip", sdr),
                    "bwe" => ("bwe", fc),
                    other => return Err(cfg_err(t.line, format!("unknown task `{other}`"))),
                };
                let sev = sev.ok_or_else(|| {
                    let need = if name == "declip" { "sdr" } else { "fc" };
                    cfg_err(t.line, format!("task `{name}` needs `{need}`"))
                })?;
                self.task = Some(
                    format!("{name}:{}", sev.value)
                        .parse()
                        .map_err(|err: Error| cfg_err(sev.line, err.to_string()))?,
                );
            }
        }
        Ok(())
    }

    /// Sampler configuration for `task`: the preset (if any) followed by the
    /// explicit keys in file order.
    pub fn sampler(&self, task: &Task) -> Result<SamplerConfig> {
        let mut cfg = match self.preset {
            Some(p) => p.config(task, 0),
            None => SamplerConfig::default(),
        };
        for e in &self.sampler_keys {
            apply_sampler_key(&mut cfg, e)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Renders a fully explicit configuration that [`RunConfig::parse`] reads
/// back to the same values.
pub fn render(
    preset: Option<Preset>,
    task: Option<&Task>,
    sigma_y: f64,
    schedule: &ScheduleParams,
    sampler: &SamplerConfig,
) -> String {
    let mut s = String::new();
    if let Some(p) = preset {
        let _ = writeln!(s, "[method]\npreset = {p}\n");
    }
    let _ = writeln!(
        s,
        "[schedule]\nsteps = {}\nnu = {}\nsigma_min = {}\nsigma_max = {}\ns_churn = {}\ns_noise = {}\ns_tmin = {}\ns_tmax = {}\n",
        schedule.steps,
        schedule.nu,
        schedule.sigma_min,
        schedule.sigma_max,
        schedule.s_churn,
        schedule.s_noise,
        schedule.s_tmin,
        schedule.s_tmax
    );
    let g = &sampler.guidance;
    let _ = writeln!(
        s,
        "[guidance]\nguidance = {}\nrho_prime = {}\ndelta_rho = {}\ndelta_rho_divisor = {}\nrho_time_convention = {}\ngrad_norm_power = {}\n",
        g.kind, g.rho_prime, g.delta_rho, g.delta_rho_divisor, g.rho_time_convention, g.grad_norm_power
    );
    let _ = writeln!(
        s,
        "[sampler]\ndc = {}\ndc_order = {}\norder = {}\nseed = {}\n",
        sampler.dc_enabled, sampler.dc_order, sampler.order, sampler.seed
    );
    let rp = &sampler.rp;
    let _ = writeln!(
        s,
        "[repaint]\nrp = {}\nu = {}\nphi1 = {}\nphi2 = {}\n",
        rp.enabled, rp.u, rp.phi1, rp.phi2
    );
    s.push_str("[task]\n");
    match task {
        Some(Task::Declip { sdr_db }) => {
            let _ = writeln!(s, "task = declip\nsdr = {sdr_db}");
        }
        Some(Task::Bwe { fc_hz }) => {
            let _ = writeln!(s, "task = bwe\nfc = {fc_hz}");
        }
        None => {}
    }
    let _ = writeln!(s, "sigma_y = {sigma_y}");
    s
}
