//! Scenario configuration and its flat `key = value` file format.
//!
//! Defaults reproduce the two-cell scenario: 3 GHz carrier, 144 subcarriers
//! at 30 kHz, pilot interval 4, 100 m cells 150 m apart, 8 antennas per BS and
//! 4 UTs per cell.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::channel::TdlProfile;
use crate::error::{Error, Result};
use crate::estimation::Estimator;
use crate::forwarding::NoiseMode;
use crate::geometry::{ForwardingStrategy, GeometryConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    /// Target SINR at the interfered BS, dB.
    Sinr(Vec<f64>),
    /// Relative power of the forwarded-pilot noise, dB (`-inf` allowed).
    RelativeNoise(Vec<f64>),
}

impl SweepAxis {
    pub fn values(&self) -> &[f64] {
        match self {
            SweepAxis::Sinr(v) | SweepAxis::RelativeNoise(v) => v,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Sinr(_) => "sinr",
            SweepAxis::RelativeNoise(_) => "relative_noise",
        }
    }
}

/// How the estimators learn the CLI subchannel correlation R_g.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrelationModel {
    /// Profile correlation weighted by the Gram of the DL precoder columns:
    /// the exact covariance of H·W given W.
    PrecoderAware,
    /// Profile correlation scaled by the average subchannel power.
    ProfileScaled,
}

impl FromStr for CorrelationModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "precoder_aware" => Ok(Self::PrecoderAware),
            "profile_scaled" => Ok(Self::ProfileScaled),
            other => Err(Error::InvalidConfig(format!("unknown rg_model '{other}'"))),
        }
    }
}

/// Source of the detector's UT channel knowledge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UtCsi {
    Genie,
    /// LS estimates from time-orthogonal uplink comb pilots.
    Ls,
}

impl FromStr for UtCsi {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "genie" => Ok(Self::Genie),
            "ls" => Ok(Self::Ls),
            other => Err(Error::InvalidConfig(format!("unknown ut_csi '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub carrier_ghz: f64,
    pub bandwidth_mhz: f64,
    pub subcarriers: usize,
    pub subcarrier_spacing_khz: f64,
    pub pilot_interval: usize,
    pub cell_radius_m: f64,
    pub bs_separation_m: f64,
    pub shadow_std_db: f64,
    pub interfering_bs_power_dbm: f64,
    pub ut_power_dbm: f64,
    pub dedicated_power_dbm: f64,
    pub interfering_bs_antennas: usize,
    pub interfered_bs_antennas: usize,
    pub interfering_cell_uts: usize,
    pub interfered_cell_uts: usize,
    pub noise_figure_db: f64,
    pub thermal_noise_dbm_hz: f64,
    /// Subcarriers the forwarding terminal spreads its power over.
    pub forwarding_subcarriers: usize,
    pub forwarding_offset: usize,
    pub profile: String,
    pub profile_file: Option<PathBuf>,
    pub delay_spread_ns: f64,
    pub rg_model: CorrelationModel,
    pub sweep: SweepAxis,
    /// Target SINR used when the sweep axis is the relative noise power.
    pub fixed_sinr_db: f64,
    pub noise_mode: NoiseMode,
    pub estimators: Vec<Estimator>,
    pub strategies: Vec<ForwardingStrategy>,
    pub detection: bool,
    pub ut_csi: UtCsi,
    pub drops: usize,
    pub seed: u64,
    /// Worker threads; 0 lets the thread pool decide.
    pub workers: usize,
    pub max_redraws: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            carrier_ghz: 3.0,
            bandwidth_mhz: 5.6,
            subcarriers: 144,
            subcarrier_spacing_khz: 30.0,
            pilot_interval: 4,
            cell_radius_m: 100.0,
            bs_separation_m: 150.0,
            shadow_std_db: 3.0,
            interfering_bs_power_dbm: 33.0,
            ut_power_dbm: 20.0,
            dedicated_power_dbm: 20.0,
            interfering_bs_antennas: 8,
            interfered_bs_antennas: 8,
            interfering_cell_uts: 4,
            interfered_cell_uts: 4,
            noise_figure_db: 7.0,
            thermal_noise_dbm_hz: -174.0,
            forwarding_subcarriers: 12,
            forwarding_offset: 0,
            profile: "tdl-c".into(),
            profile_file: None,
            delay_spread_ns: 300.0,
            rg_model: CorrelationModel::PrecoderAware,
            sweep: SweepAxis::Sinr((0..=10).map(|k| -10.0 + 2.0 * k as f64).collect()),
            fixed_sinr_db: 0.0,
            noise_mode: NoiseMode::Physical,
            estimators: Estimator::ALL.to_vec(),
            strategies: ForwardingStrategy::ALL.to_vec(),
            detection: true,
            ut_csi: UtCsi::Genie,
            drops: 1000,
            seed: 1,
            workers: 0,
            max_redraws: 100,
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    match v.trim() {
        "-inf" => Ok(f64::NEG_INFINITY),
        s => s
            .parse::<f64>()
            .map_err(|_| Error::InvalidConfig(format!("{key}: '{v}' is not a number"))),
    }
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("{key}: '{v}' is not a nonnegative integer")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::InvalidConfig(format!(
            "{key}: '{v}' is not a boolean"
        ))),
    }
}

/// `a:step:b` (inclusive) or a comma-separated list.
pub fn parse_sweep_values(key: &str, v: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = v.split(':').collect();
    if parts.len() == 3 {
        let (start, step, stop) = (
            parse_f64(key, parts[0])?,
            parse_f64(key, parts[1])?,
            parse_f64(key, parts[2])?,
        );
        if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || stop < start {
            return Err(Error::InvalidConfig(format!("{key}: bad range '{v}'")));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|k| start + step * k as f64).collect());
    }
    v.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_f64(key, s))
        .collect()
}

fn parse_list<T: FromStr<Err = Error>>(v: &str) -> Result<Vec<T>> {
    v.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse())
        .collect()
}

fn fmt_f64(x: f64) -> String {
    if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x}")
    }
}

fn join<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(", ")
}

impl ScenarioConfig {
    /// Parses `key = value` lines on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ScenarioConfig::default();
        let mut sweep_kind: Option<String> = None;
        let mut sweep_values: Option<Vec<f64>> = None;
        let mut noise_mode: Option<String> = None;
        let mut relative_noise_db: Option<f64> = None;

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| {
                    Error::InvalidConfig(format!("line {}: expected 'key = value'", lineno + 1))
                })?;
            match key {
                "carrier_ghz" => cfg.carrier_ghz = parse_f64(key, value)?,
                "bandwidth_mhz" => cfg.bandwidth_mhz = parse_f64(key, value)?,
                "subcarriers" => cfg.subcarriers = parse_usize(key, value)?,
                "subcarrier_spacing_khz" => cfg.subcarrier_spacing_khz = parse_f64(key, value)?,
                "pilot_interval" => cfg.pilot_interval = parse_usize(key, value)?,
                "cell_radius_m" => cfg.cell_radius_m = parse_f64(key, value)?,
                "bs_separation_m" => cfg.bs_separation_m = parse_f64(key, value)?,
                "shadow_std_db" => cfg.shadow_std_db = parse_f64(key, value)?,
                "interfering_bs_power_dbm" => cfg.interfering_bs_power_dbm = parse_f64(key, value)?,
                "ut_power_dbm" => cfg.ut_power_dbm = parse_f64(key, value)?,
                "dedicated_power_dbm" => cfg.dedicated_power_dbm = parse_f64(key, value)?,
                "interfering_bs_antennas" => cfg.interfering_bs_antennas = parse_usize(key, value)?,
                "interfered_bs_antennas" => cfg.interfered_bs_antennas = parse_usize(key, value)?,
                "interfering_cell_uts" => cfg.interfering_cell_uts = parse_usize(key, value)?,
                "interfered_cell_uts" => cfg.interfered_cell_uts = parse_usize(key, value)?,
                "noise_figure_db" => cfg.noise_figure_db = parse_f64(key, value)?,
                "thermal_noise_dbm_hz" => cfg.thermal_noise_dbm_hz = parse_f64(key, value)?,
                "forwarding_subcarriers" => cfg.forwarding_subcarriers = parse_usize(key, value)?,
                "forwarding_offset" => cfg.forwarding_offset = parse_usize(key, value)?,
                "profile" => cfg.profile = value.to_string(),
                "profile_file" => cfg.profile_file = Some(PathBuf::from(value)),
                "delay_spread_ns" => cfg.delay_spread_ns = parse_f64(key, value)?,
                "rg_model" => cfg.rg_model = value.parse()?,
                "sweep" => sweep_kind = Some(value.to_string()),
                "sweep_values" => sweep_values = Some(parse_sweep_values(key, value)?),
                "fixed_sinr_db" => cfg.fixed_sinr_db = parse_f64(key, value)?,
                "noise_mode" => noise_mode = Some(value.to_string()),
                "relative_noise_db" => relative_noise_db = Some(parse_f64(key, value)?),
                "estimators" => cfg.estimators = parse_list(value)?,
                "strategies" => cfg.strategies = parse_list(value)?,
                "detection" => cfg.detection = parse_bool(key, value)?,
                "ut_csi" => cfg.ut_csi = value.parse()?,
                "drops" => cfg.drops = parse_usize(key, value)?,
                "seed" => {
                    cfg.seed = value.parse().map_err(|_| {
                        Error::InvalidConfig(format!("seed: '{value}' is not an integer"))
                    })?
                }
                "workers" => cfg.workers = parse_usize(key, value)?,
                "max_redraws" => cfg.max_redraws = parse_usize(key, value)?,
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "line {}: unknown key '{other}'",
                        lineno + 1
                    )))
                }
            }
        }

        let values = sweep_values.unwrap_or_else(|| cfg.sweep.values().to_vec());
        let kind = sweep_kind.unwrap_or_else(|| cfg.sweep.name().to_string());
        cfg.sweep = match kind.as_str() {
            "sinr" => SweepAxis::Sinr(values),
            "relative_noise" => SweepAxis::RelativeNoise(values),
            other => return Err(Error::InvalidConfig(format!("unknown sweep '{other}'"))),
        };
        cfg.noise_mode = match (noise_mode.as_deref(), &cfg.sweep) {
            (None, SweepAxis::RelativeNoise(_))
            | (Some("synthetic"), SweepAxis::RelativeNoise(_)) => NoiseMode::Synthetic {
                relative_power_db: f64::NEG_INFINITY,
            },
            (None, SweepAxis::Sinr(_)) | (Some("physical"), SweepAxis::Sinr(_)) => {
                NoiseMode::Physical
            }
            (Some("synthetic"), SweepAxis::Sinr(_)) => NoiseMode::Synthetic {
                relative_power_db: relative_noise_db.ok_or_else(|| {
                    Error::InvalidConfig(
                        "synthetic noise on a SINR sweep needs relative_noise_db".into(),
                    )
                })?,
            },
            (Some("physical"), SweepAxis::RelativeNoise(_)) => {
                return Err(Error::InvalidConfig(
                    "a relative-noise sweep prescribes the noise and needs noise_mode = synthetic"
                        .into(),
                ))
            }
            (Some(other), _) => {
                return Err(Error::InvalidConfig(format!(
                    "unknown noise_mode '{other}'"
                )))
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::parse(&text)?;
        if let (Some(p), Some(dir)) = (&cfg.profile_file, path.parent()) {
            if p.is_relative() {
                cfg.profile_file = Some(dir.join(p));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let finite = [
            ("carrier_ghz", self.carrier_ghz),
            ("bandwidth_mhz", self.bandwidth_mhz),
            ("subcarrier_spacing_khz", self.subcarrier_spacing_khz),
            ("cell_radius_m", self.cell_radius_m),
            ("bs_separation_m", self.bs_separation_m),
            ("shadow_std_db", self.shadow_std_db),
            ("interfering_bs_power_dbm", self.interfering_bs_power_dbm),
            ("ut_power_dbm", self.ut_power_dbm),
            ("dedicated_power_dbm", self.dedicated_power_dbm),
            ("noise_figure_db", self.noise_figure_db),
            ("thermal_noise_dbm_hz", self.thermal_noise_dbm_hz),
            ("delay_spread_ns", self.delay_spread_ns),
            ("fixed_sinr_db", self.fixed_sinr_db),
        ];
        if let Some((k, _)) = finite.iter().find(|(_, v)| !v.is_finite()) {
            return bad(format!("{k} must be finite"));
        }
        if self.carrier_ghz <= 0.0 || self.subcarrier_spacing_khz <= 0.0 || self.shadow_std_db < 0.0
        {
            return bad("carrier, subcarrier spacing and shadowing std must be positive".into());
        }
        if self.drops == 0 {
            return bad("drops must be at least 1".into());
        }
        if self.pilot_interval == 0 || self.subcarriers < self.pilot_interval {
            return bad("subcarriers must be at least the pilot interval".into());
        }
        if self.subcarriers.div_ceil(self.pilot_interval) < 2 {
            return bad("at least two pilots per stream are needed for interpolation".into());
        }
        let occupied_mhz = self.subcarriers as f64 * self.subcarrier_spacing_khz * 1e-3;
        if occupied_mhz > self.bandwidth_mhz + 1e-9 {
            return bad(format!(
                "{occupied_mhz} MHz of subcarriers exceed the {} MHz bandwidth",
                self.bandwidth_mhz
            ));
        }
        if self.interfering_cell_uts == 0 || self.interfered_cell_uts == 0 {
            return bad("each cell needs at least one UT".into());
        }
        if self.interfering_cell_uts > self.interfering_bs_antennas {
            return bad("ZF precoding needs at least as many BS antennas as DL UTs".into());
        }
        if self.forwarding_subcarriers == 0
            || self.forwarding_offset + self.forwarding_subcarriers > self.subcarriers
        {
            return bad("forwarding subcarriers must lie inside the band".into());
        }
        if self.estimators.is_empty() {
            return bad("at least one estimator is required".into());
        }
        if self.noise_mode == NoiseMode::Physical && self.strategies.is_empty() {
            return bad("physical forwarding needs at least one strategy".into());
        }
        if self.sweep.values().is_empty() {
            return bad("sweep has no points".into());
        }
        match &self.sweep {
            SweepAxis::Sinr(v) if v.iter().any(|x| !x.is_finite()) => {
                bad("SINR values must be finite".into())
            }
            SweepAxis::RelativeNoise(v) if v.iter().any(|x| x.is_nan() || *x == f64::INFINITY) => {
                bad("relative noise values must be finite or -inf".into())
            }
            _ => Ok(()),
        }
    }

    pub fn subcarrier_spacing_hz(&self) -> f64 {
        self.subcarrier_spacing_khz * 1e3
    }

    pub fn noise_dbm_per_re(&self) -> f64 {
        self.thermal_noise_dbm_hz
            + 10.0 * self.subcarrier_spacing_hz().log10()
            + self.noise_figure_db
    }

    pub fn geometry(&self) -> GeometryConfig {
        GeometryConfig {
            cell_radius_m: self.cell_radius_m,
            bs_separation_m: self.bs_separation_m,
            ul_uts: self.interfered_cell_uts,
            dl_uts: self.interfering_cell_uts,
            bs_power_dbm: self.interfering_bs_power_dbm,
            ut_power_dbm: self.ut_power_dbm,
            dedicated_power_dbm: self.dedicated_power_dbm,
            place_dedicated: self
                .strategies
                .contains(&ForwardingStrategy::DedicatedMidpoint),
        }
    }

    pub fn load_profile(&self) -> Result<TdlProfile> {
        match &self.profile_file {
            Some(path) => TdlProfile::load(path),
            None => TdlProfile::builtin(&self.profile, self.delay_spread_ns * 1e-9),
        }
    }

    pub fn forwarding_band(&self) -> Vec<usize> {
        (self.forwarding_offset..self.forwarding_offset + self.forwarding_subcarriers).collect()
    }

    /// Renders the configuration in the format [`ScenarioConfig::parse`] reads.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("carrier_ghz", fmt_f64(self.carrier_ghz));
        kv("bandwidth_mhz", fmt_f64(self.bandwidth_mhz));
        kv("subcarriers", self.subcarriers.to_string());
        kv(
            "subcarrier_spacing_khz",
            fmt_f64(self.subcarrier_spacing_khz),
        );
        kv("pilot_interval", self.pilot_interval.to_string());
        kv("cell_radius_m", fmt_f64(self.cell_radius_m));
        kv("bs_separation_m", fmt_f64(self.bs_separation_m));
        kv("shadow_std_db", fmt_f64(self.shadow_std_db));
        kv(
            "interfering_bs_power_dbm",
            fmt_f64(self.interfering_bs_power_dbm),
        );
        kv("ut_power_dbm", fmt_f64(self.ut_power_dbm));
        kv("dedicated_power_dbm", fmt_f64(self.dedicated_power_dbm));
        kv(
            "interfering_bs_antennas",
            self.interfering_bs_antennas.to_string(),
        );
        kv(
            "interfered_bs_antennas",
            self.interfered_bs_antennas.to_string(),
        );
        kv(
            "interfering_cell_uts",
            self.interfering_cell_uts.to_string(),
        );
        kv("interfered_cell_uts", self.interfered_cell_uts.to_string());
        kv("noise_figure_db", fmt_f64(self.noise_figure_db));
        kv("thermal_noise_dbm_hz", fmt_f64(self.thermal_noise_dbm_hz));
        kv(
            "forwarding_subcarriers",
            self.forwarding_subcarriers.to_string(),
        );
        kv("forwarding_offset", self.forwarding_offset.to_string());
        kv("profile", self.profile.clone());
        if let Some(p) = &self.profile_file {
            kv("profile_file", p.display().to_string());
        }
        kv("delay_spread_ns", fmt_f64(self.delay_spread_ns));
        kv(
            "rg_model",
            match self.rg_model {
                CorrelationModel::PrecoderAware => "precoder_aware",
                CorrelationModel::ProfileScaled => "profile_scaled",
            }
            .into(),
        );
        kv("sweep", self.sweep.name().into());
        kv("sweep_values", join(self.sweep.values(), |v| fmt_f64(*v)));
        kv("fixed_sinr_db", fmt_f64(self.fixed_sinr_db));
        match self.noise_mode {
            NoiseMode::Physical => kv("noise_mode", "physical".into()),
            NoiseMode::Synthetic { relative_power_db } => {
                kv("noise_mode", "synthetic".into());
                if matches!(self.sweep, SweepAxis::Sinr(_)) {
                    kv("relative_noise_db", fmt_f64(relative_power_db));
                }
            }
        }
        kv("estimators", join(&self.estimators, |e| e.as_str().into()));
        kv("strategies", join(&self.strategies, |s| s.as_str().into()));
        kv("detection", self.detection.to_string());
        kv(
            "ut_csi",
            if self.ut_csi == UtCsi::Genie {
                "genie"
            } else {
                "ls"
            }
            .into(),
        );
        kv("drops", self.drops.to_string());
        kv("seed", self.seed.to_string());
        kv("workers", self.workers.to_string());
        kv("max_redraws", self.max_redraws.to_string());
        s
    }
}
