//! Scenario configuration.
//!
//! Plain `key = value` lines; `#` starts a comment, blank lines are ignored.
//!
//! ```text
//! scenario     = 1 | 2 | 3 | 4 | 5 | custom
//! coordination = standalone | coordinated
//! v2g          = true | false
//! v2g_restriction = true | false      (default true: discharge only covers community load)
//! cs_location  = slack_only | free | bus:<id>
//! peak_tariff  = none_fixed | individual | collective
//! backend      = highs | clarabel      (default highs)
//! mip_gap      = <float>               (default 1e-4)
//! time_limit   = <seconds>
//! cone_tol     = <float>               (default 1e-6)
//! max_oa_iters = <int>                 (default 50)
//! case_dir     = <path>
//! seed         = <int>
//! ```
//!
//! Presets 1 to 5 pin `coordination`, `v2g`, `cs_location` and
//! `peak_tariff`; restating a pinned key with the same value is allowed, a
//! different value is an error. `custom` needs all four keys.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use fleetplan_engine::SolveOptions;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::GridFeeMode;
use crate::error::{CoreError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioId {
    Preset(u8),
    Custom,
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Preset(n) => write!(f, "{n}"),
            Self::Custom => f.write_str("custom"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coordination {
    /// Community dispatch first, then the provider on the residual capacity.
    Standalone,
    Coordinated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsLocation {
    SlackOnly,
    Free,
    /// Stations restricted to one given bus.
    Bus(usize),
}

impl CsLocation {
    pub fn allows(&self, bus: usize) -> bool {
        match self {
            Self::SlackOnly => bus == 0,
            Self::Free => true,
            Self::Bus(b) => *b == bus,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeakTariff {
    NoneFixed,
    Individual,
    Collective,
}

impl PeakTariff {
    pub fn fee_mode(self) -> GridFeeMode {
        match self {
            Self::NoneFixed => GridFeeMode::VolumetricFlat,
            Self::Individual | Self::Collective => GridFeeMode::CapacityBased,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub backend: String,
    pub mip_gap: f64,
    pub time_limit_s: Option<f64>,
    pub cone_tol: f64,
    pub max_oa_iters: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let d = SolveOptions::default();
        Self {
            backend: "highs".into(),
            mip_gap: d.mip_gap,
            time_limit_s: d.time_limit_s,
            cone_tol: d.cone_tol,
            max_oa_iters: d.max_oa_iters,
        }
    }
}

impl SolverSettings {
    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            mip_gap: self.mip_gap,
            time_limit_s: self.time_limit_s,
            cone_tol: self.cone_tol,
            max_oa_iters: self.max_oa_iters,
            ..SolveOptions::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: ScenarioId,
    pub coordination: Coordination,
    pub v2g_enabled: bool,
    pub v2g_restriction: bool,
    pub cs_location: CsLocation,
    pub peak_tariff: PeakTariff,
    pub solver: SolverSettings,
    pub case_dir: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl ScenarioConfig {
    /// Fully resolved preset with default solver settings.
    pub fn preset(id: u8) -> Result<Self> {
        let (coordination, v2g, cs, peak) = preset_flags(id)?;
        Ok(Self {
            scenario: ScenarioId::Preset(id),
            coordination,
            v2g_enabled: v2g,
            v2g_restriction: true,
            cs_location: cs,
            peak_tariff: peak,
            solver: SolverSettings::default(),
            case_dir: None,
            seed: None,
        })
    }

    pub fn custom(
        coordination: Coordination,
        v2g_enabled: bool,
        cs_location: CsLocation,
        peak_tariff: PeakTariff,
    ) -> Result<Self> {
        let cfg = Self {
            scenario: ScenarioId::Custom,
            coordination,
            v2g_enabled,
            v2g_restriction: true,
            cs_location,
            peak_tariff,
            solver: SolverSettings::default(),
            case_dir: None,
            seed: None,
        };
        cfg.check_consistency()?;
        Ok(cfg)
    }

    /// Short label used in file names and report headers.
    pub fn label(&self) -> String {
        match self.scenario {
            ScenarioId::Preset(n) => format!("s{n}"),
            ScenarioId::Custom => "custom".into(),
        }
    }

    fn check_consistency(&self) -> Result<()> {
        if self.coordination == Coordination::Standalone {
            if self.v2g_enabled {
                return Err(contradiction(
                    "stand-alone provider cannot discharge into the community (v2g=true)",
                ));
            }
            if self.peak_tariff != PeakTariff::NoneFixed {
                return Err(contradiction(
                    "peak tariffs apply to the coordinated problem only",
                ));
            }
            if self.cs_location != CsLocation::SlackOnly {
                return Err(contradiction(
                    "stand-alone provider stations sit at the slack bus",
                ));
            }
        }
        if !(self.solver.mip_gap >= 0.0) || !(self.solver.cone_tol > 0.0) {
            return Err(CoreError::Config("mip_gap >= 0 and cone_tol > 0 required".into()));
        }
        if let Some(t) = self.solver.time_limit_s {
            if !(t > 0.0) {
                return Err(CoreError::Config("time_limit must be positive".into()));
            }
        }
        Ok(())
    }

    /// Stable digest of everything that changes results.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::json!({
            "scenario": self.scenario,
            "coordination": self.coordination,
            "v2g": self.v2g_enabled,
            "v2g_restriction": self.v2g_restriction,
            "cs_location": self.cs_location,
            "peak_tariff": self.peak_tariff,
            "solver": self.solver,
        });
        let digest = Sha256::digest(canonical.to_string().as_bytes());
        hex::encode(&digest[..8])
    }
}

fn contradiction(msg: &str) -> CoreError {
    CoreError::Config(format!("contradictory flags: {msg}"))
}

fn preset_flags(id: u8) -> Result<(Coordination, bool, CsLocation, PeakTariff)> {
    use Coordination::*;
    use CsLocation::SlackOnly;
    use PeakTariff::*;
    Ok(match id {
        1 => (Standalone, false, SlackOnly, NoneFixed),
        2 => (Coordinated, false, SlackOnly, NoneFixed),
        3 => (Coordinated, true, SlackOnly, NoneFixed),
        4 => (Coordinated, true, SlackOnly, Individual),
        5 => (Coordinated, true, SlackOnly, Collective),
        other => return Err(CoreError::Config(format!("unknown scenario id {other}"))),
    })
}

/// Ordered `key -> (value, line)` map from the key-value grammar.
pub type ConfigPairs = BTreeMap<String, (String, usize)>;

pub fn parse_pairs(text: &str) -> Result<ConfigPairs> {
    let mut out = ConfigPairs::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CoreError::Config(format!("line {}: expected key = value", i + 1)));
        };
        let key = k.trim().to_ascii_lowercase();
        if out.insert(key.clone(), (v.trim().to_owned(), i + 1)).is_some() {
            return Err(CoreError::Config(format!("line {}: duplicate key {key}", i + 1)));
        }
    }
    Ok(out)
}

pub fn parse_scenario_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
    let cfg = resolve_config(parse_pairs(&text)?, &ConfigPairs::new())?;
    Ok(match cfg.case_dir {
        Some(ref d) if d.is_relative() => ScenarioConfig {
            case_dir: Some(path.parent().unwrap_or(Path::new(".")).join(d)),
            ..cfg
        },
        _ => cfg,
    })
}

/// Resolves file pairs with `overrides` (e.g. from command-line flags)
/// taking precedence.
pub fn resolve_config(mut pairs: ConfigPairs, overrides: &ConfigPairs) -> Result<ScenarioConfig> {
    for (k, v) in overrides {
        pairs.insert(k.clone(), v.clone());
    }
    let get = |k: &str| pairs.get(k).map(|(v, l)| (v.as_str(), *l));
    let err = |line: usize, msg: String| CoreError::Config(format!("line {line}: {msg}"));

    let scenario = match get("scenario") {
        None => return Err(CoreError::Config("missing key scenario".into())),
        Some(("custom", _)) => ScenarioId::Custom,
        Some((v, l)) => match v.parse::<u8>() {
            Ok(n) if (1..=5).contains(&n) => ScenarioId::Preset(n),
            _ => return Err(err(l, format!("unknown scenario id {v}"))),
        },
    };

    let coordination = get("coordination")
        .map(|(v, l)| match v {
            "standalone" | "stand_alone" => Ok(Coordination::Standalone),
            "coordinated" => Ok(Coordination::Coordinated),
            _ => Err(err(l, format!("coordination: unknown value {v}"))),
        })
        .transpose()?;
    let v2g = get("v2g").map(|(v, l)| parse_bool(v, l)).transpose()?;
    let cs_location = get("cs_location")
        .map(|(v, l)| match v {
            "slack_only" => Ok(CsLocation::SlackOnly),
            "free" => Ok(CsLocation::Free),
            _ => v
                .strip_prefix("bus:")
                .and_then(|b| b.trim().parse().ok())
                .map(CsLocation::Bus)
                .ok_or_else(|| err(l, format!("cs_location: unknown value {v}"))),
        })
        .transpose()?;
    let peak = get("peak_tariff")
        .or_else(|| get("peak_mode"))
        .map(|(v, l)| match v {
            "none_fixed" | "none" => Ok(PeakTariff::NoneFixed),
            "individual" => Ok(PeakTariff::Individual),
            "collective" => Ok(PeakTariff::Collective),
            _ => Err(err(l, format!("peak_tariff: unknown value {v}"))),
        })
        .transpose()?;

    let (coordination, v2g_enabled, cs_location, peak_tariff) = match scenario {
        ScenarioId::Preset(n) => {
            let (c, v, s, p) = preset_flags(n)?;
            if coordination.is_some_and(|x| x != c)
                || v2g.is_some_and(|x| x != v)
                || cs_location.is_some_and(|x| x != s)
                || peak.is_some_and(|x| x != p)
            {
                return Err(contradiction(&format!(
                    "scenario {n} pins coordination={c:?}, v2g={v}, cs_location={s:?}, peak_tariff={p:?}"
                )));
            }
            (c, v, s, p)
        }
        ScenarioId::Custom => {
            let missing: Vec<&str> = [
                ("coordination", coordination.is_none()),
                ("v2g", v2g.is_none()),
                ("cs_location", cs_location.is_none()),
                ("peak_tariff", peak.is_none()),
            ]
            .into_iter()
            .filter(|(_, m)| *m)
            .map(|(k, _)| k)
            .collect();
            if !missing.is_empty() {
                return Err(CoreError::Config(format!(
                    "custom scenario needs explicit {}",
                    missing.join(", ")
                )));
            }
            (
                coordination.unwrap_or(Coordination::Coordinated),
                v2g.unwrap_or(false),
                cs_location.unwrap_or(CsLocation::SlackOnly),
                peak.unwrap_or(PeakTariff::NoneFixed),
            )
        }
    };

    let mut solver = SolverSettings::default();
    if let Some((v, _)) = get("backend") {
        solver.backend = v.to_owned();
    }
    if let Some((v, l)) = get("mip_gap") {
        solver.mip_gap = parse_num(v, l)?;
    }
    if let Some((v, l)) = get("time_limit") {
        solver.time_limit_s = Some(parse_num(v, l)?);
    }
    if let Some((v, l)) = get("cone_tol") {
        solver.cone_tol = parse_num(v, l)?;
    }
    if let Some((v, l)) = get("max_oa_iters") {
        solver.max_oa_iters = parse_num(v, l)?;
    }
    let v2g_restriction = get("v2g_restriction")
        .map(|(v, l)| parse_bool(v, l))
        .transpose()?
        .unwrap_or(true);
    let seed = get("seed").map(|(v, l)| parse_num(v, l)).transpose()?;
    let case_dir = get("case_dir").map(|(v, _)| PathBuf::from(v));

    let known = [
        "scenario",
        "coordination",
        "v2g",
        "v2g_restriction",
        "cs_location",
        "peak_tariff",
        "peak_mode",
        "backend",
        "mip_gap",
        "time_limit",
        "cone_tol",
        "max_oa_iters",
        "case_dir",
        "seed",
    ];
    if let Some((k, (_, l))) = pairs.iter().find(|(k, _)| !known.contains(&k.as_str())) {
        return Err(err(*l, format!("unknown key {k}")));
    }

    let cfg = ScenarioConfig {
        scenario,
        coordination,
        v2g_enabled,
        v2g_restriction,
        cs_location,
        peak_tariff,
        solver,
        case_dir,
        seed,
    };
    cfg.check_consistency()?;
    Ok(cfg)
}

fn parse_bool(v: &str, line: usize) -> Result<bool> {
    match v {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(CoreError::Config(format!("line {line}: expected true/false, got {v}"))),
    }
}

fn parse_num<T: std::str::FromStr>(v: &str, line: usize) -> Result<T> {
    v.parse()
        .map_err(|_| CoreError::Config(format!("line {line}: not a number: {v}")))
}
