//! Line-oriented scenario configuration.
//!
//! ```text
//! # comment
//! section.key = value
//! ```
//!
//! Sections are `radar`, `scene`, `pipeline` and `output`. Every key except
//! `scene.preset` has a default; unknown and repeated keys are rejected.
//! [`ScenarioConfig::serialize`] writes every key in a fixed order, so
//! `serialize(parse(text))` is the normal form of `text`.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::path::PathBuf;

use thiserror::Error;

use crate::imaging::Window;
use crate::metrics::Algorithm;
use crate::mocomp::{CcrReference, MocompSettings};
use crate::params::{derive_params, RadarParams};
use crate::scene::{self, RangeMode, Scatterer, Scene, TrajectorySpec, Waypoint};
use crate::synth::SynthOptions;

/// The shipped U-turn configuration.
pub const DEFAULT_CONFIG: &str = include_str!("../configs/uturn-car.conf");

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigErrorKind {
    Syntax(String),
    UnknownKey,
    Duplicate { first_line: usize },
    TypeMismatch { expected: &'static str, got: String },
    MissingKey,
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ConfigError {
    /// 1-based line, absent for missing keys and cross-key checks.
    pub line: Option<usize>,
    pub key: String,
    pub kind: ConfigErrorKind,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config")?;
        if let Some(line) = self.line {
            write!(f, " line {line}")?;
        }
        if !self.key.is_empty() {
            write!(f, ", key `{}`", self.key)?;
        }
        match &self.kind {
            ConfigErrorKind::Syntax(s) => write!(f, ": {s}"),
            ConfigErrorKind::UnknownKey => write!(f, ": unknown key"),
            ConfigErrorKind::Duplicate { first_line } => write!(f, ": repeated, first set on line {first_line}"),
            ConfigErrorKind::TypeMismatch { expected, got } => write!(f, ": expected {expected}, got `{got}`"),
            ConfigErrorKind::MissingKey => write!(f, ": required key missing"),
            ConfigErrorKind::Invalid(s) => write!(f, ": {s}"),
        }
    }
}

/// A frame chosen by index, or by time into the trajectory (`8.1s`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FrameSpec {
    Index(u32),
    Time(f64),
}

impl FrameSpec {
    /// Frame whose start is nearest to the requested time.
    pub fn resolve(self, t_cpi_s: f64) -> u32 {
        match self {
            FrameSpec::Index(i) => i,
            FrameSpec::Time(t) => (t / t_cpi_s).round() as u32,
        }
    }

    pub fn parse(s: &str) -> Option<FrameSpec> {
        let s = s.trim();
        if let Some(t) = s.strip_suffix('s') {
            let t: f64 = t.trim().parse().ok()?;
            (t.is_finite() && t >= 0.0).then_some(FrameSpec::Time(t))
        } else {
            s.parse().ok().map(FrameSpec::Index)
        }
    }

    /// Comma-separated list, empty entries not allowed.
    pub fn parse_list(s: &str) -> Option<Vec<FrameSpec>> {
        let v: Option<Vec<_>> = s.split(',').map(FrameSpec::parse).collect();
        v.filter(|v| !v.is_empty())
    }
}

impl fmt::Display for FrameSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrameSpec::Index(i) => write!(f, "{i}"),
            FrameSpec::Time(t) => write!(f, "{t}s"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Pgm,
    Csv,
}

impl ImageFormat {
    pub fn id(self) -> &'static str {
        match self {
            ImageFormat::Pgm => "pgm",
            ImageFormat::Csv => "csv",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub preset: String,
    /// Overrides of the preset, when set.
    pub noise_power: Option<f64>,
    pub reflectivity_jitter: Option<f64>,
    pub clutter: bool,
    pub scatterers: Option<Vec<Scatterer>>,
    pub waypoints: Option<Vec<Waypoint>>,
    /// Only used by the `single-point` preset.
    pub point_range_m: f64,
    pub point_velocity_mps: f64,
    pub point_duration_s: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            preset: String::new(),
            noise_power: None,
            reflectivity_jitter: None,
            clutter: true,
            scatterers: None,
            waypoints: None,
            point_range_m: 10.0,
            point_velocity_mps: 1.0,
            point_duration_s: scene::UTURN_DURATION_S,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Fine algorithms to compare. The uncompensated baseline always runs.
    pub algorithms: Vec<Algorithm>,
    pub frames: Vec<FrameSpec>,
    /// Number of target-free frames used for the noise floor.
    pub blank_frames: u32,
    pub seed: u64,
    pub window: Window,
    pub synth: SynthOptions,
    pub mocomp: MocompSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            algorithms: vec![Algorithm::Em, Algorithm::Pga, Algorithm::Ccr],
            frames: [8.1, 8.4, 8.6, 8.7, 9.0].into_iter().map(FrameSpec::Time).collect(),
            blank_frames: 5,
            seed: 1,
            window: Window::None,
            synth: SynthOptions::default(),
            mocomp: MocompSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<ImageFormat>,
    pub write_cubes: bool,
    pub db_floor: f64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            formats: vec![ImageFormat::Pgm, ImageFormat::Csv],
            write_cubes: true,
            db_floor: -120.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub radar: RadarParams,
    pub scene: SceneConfig,
    pub pipeline: PipelineConfig,
    pub output: OutputConfig,
}

impl ScenarioConfig {
    /// Defaults for everything, with the given preset.
    pub fn with_preset(preset: &str) -> Self {
        ScenarioConfig {
            radar: RadarParams::awr1843_measurement(),
            scene: SceneConfig {
                preset: preset.into(),
                ..Default::default()
            },
            pipeline: PipelineConfig::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn default_uturn() -> Self {
        parse_config(DEFAULT_CONFIG).expect("shipped config parses")
    }

    /// Frame indices of the configured frame list, in order.
    pub fn frame_indices(&self) -> Vec<u32> {
        self.pipeline
            .frames
            .iter()
            .map(|f| f.resolve(self.radar.t_cpi_s))
            .collect()
    }

    /// Target scene with all overrides applied.
    pub fn build_scene(&self) -> crate::Result<Scene> {
        let s = &self.scene;
        let seed = self.pipeline.seed;
        let mut out = match s.preset.as_str() {
            "single-point" => scene::single_point(s.point_range_m, s.point_velocity_mps, s.point_duration_s, seed)?,
            name => scene::builtin_scenario(name, seed)?,
        };
        if let Some(n) = s.noise_power {
            out.noise_power = n;
        }
        if let Some(j) = s.reflectivity_jitter {
            out.reflectivity_jitter = j;
        }
        if !s.clutter {
            out.clutter.clear();
        }
        if let Some(sc) = &s.scatterers {
            out.scatterers = sc.clone();
            out.extent_m = None;
        }
        if let Some(w) = &s.waypoints {
            out.trajectory = TrajectorySpec::new(w.clone(), out.trajectory.rotation())?;
        }
        out.validate()?;
        Ok(out)
    }

    pub fn serialize(&self) -> String {
        let mut o = String::new();
        let r = &self.radar;
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(o, "{k} = {v}");
        };
        kv("radar.carrier_freq_hz", r.carrier_freq_hz.to_string());
        kv("radar.bandwidth_hz", r.bandwidth_hz.to_string());
        kv("radar.chirp_slope_hz_per_s", r.chirp_slope_hz_per_s.to_string());
        kv("radar.t_pri_s", r.t_pri_s.to_string());
        kv("radar.num_tx", r.num_tx.to_string());
        kv("radar.num_rx", r.num_rx.to_string());
        kv("radar.d_tx_m", r.d_tx_m.to_string());
        kv("radar.d_rx_m", r.d_rx_m.to_string());
        kv("radar.num_slow", r.num_slow.to_string());
        kv("radar.num_fast", r.num_fast.to_string());
        kv("radar.sample_rate_sps", r.sample_rate_sps.to_string());
        kv("radar.t_cpi_s", r.t_cpi_s.to_string());
        kv("radar.ref_range_m", r.ref_range_m.to_string());

        let s = &self.scene;
        kv("scene.preset", s.preset.clone());
        if let Some(n) = s.noise_power {
            kv("scene.noise_power", n.to_string());
        }
        if let Some(j) = s.reflectivity_jitter {
            kv("scene.reflectivity_jitter", j.to_string());
        }
        kv("scene.clutter", s.clutter.to_string());
        if let Some(sc) = &s.scatterers {
            let v: Vec<String> = sc
                .iter()
                .map(|b| format!("{}:{}:{}", b.x_m, b.y_m, b.reflectivity))
                .collect();
            kv("scene.scatterers", v.join("; "));
        }
        if let Some(w) = &s.waypoints {
            let v: Vec<String> = w.iter().map(|w| format!("{}:{}:{}", w.t_s, w.x_m, w.y_m)).collect();
            kv("scene.waypoints", v.join("; "));
        }
        kv("scene.point_range_m", s.point_range_m.to_string());
        kv("scene.point_velocity_mps", s.point_velocity_mps.to_string());
        kv("scene.point_duration_s", s.point_duration_s.to_string());

        let p = &self.pipeline;
        let algos: Vec<&str> = p.algorithms.iter().map(|a| a.id()).collect();
        kv("pipeline.algo", algos.join(","));
        let frames: Vec<String> = p.frames.iter().map(|f| f.to_string()).collect();
        kv("pipeline.frames", frames.join(","));
        kv("pipeline.blank_frames", p.blank_frames.to_string());
        kv("pipeline.seed", p.seed.to_string());
        kv("pipeline.window", window_id(p.window).into());
        kv("pipeline.tdm_offset", p.synth.tdm_offset.to_string());
        kv("pipeline.rvp", p.synth.residual_video_phase.to_string());
        kv("pipeline.range_mode", range_mode_id(p.synth.range_mode).into());
        let em = &p.mocomp.em;
        kv("pipeline.em_velocities", join_f64(&em.velocities_mps));
        kv("pipeline.em_accels", join_f64(&em.accels_mps2));
        kv("pipeline.em_range_walk", em.range_walk.to_string());
        kv("pipeline.ccr_max_iters", p.mocomp.ccr.max_iters.to_string());
        kv("pipeline.ccr_conv_tol", p.mocomp.ccr.conv_tol.to_string());
        kv(
            "pipeline.ccr_reference",
            ccr_reference_id(p.mocomp.ccr.reference).into(),
        );
        kv("pipeline.pga_max_iters", p.mocomp.pga.max_iters.to_string());
        kv("pipeline.pga_rms_tol_rad", p.mocomp.pga.rms_tol_rad.to_string());
        kv("pipeline.pga_top_k", p.mocomp.pga.top_k.to_string());

        let out = &self.output;
        kv("output.dir", out.dir.display().to_string());
        let formats: Vec<&str> = out.formats.iter().map(|f| f.id()).collect();
        kv("output.formats", formats.join(","));
        kv("output.write_cubes", out.write_cubes.to_string());
        kv("output.db_floor", out.db_floor.to_string());
        o
    }
}

fn join_f64(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn window_id(w: Window) -> &'static str {
    match w {
        Window::None => "none",
        Window::Hann => "hann",
    }
}

fn range_mode_id(m: RangeMode) -> &'static str {
    match m {
        RangeMode::Exact => "exact",
        RangeMode::Projected => "projected",
    }
}

fn ccr_reference_id(r: CcrReference) -> &'static str {
    match r {
        CcrReference::RunningMean => "running-mean",
        CcrReference::Adjacent => "adjacent",
    }
}

/// One `key = value` line being applied.
struct Entry<'a> {
    line: usize,
    key: &'a str,
    value: &'a str,
}

impl Entry<'_> {
    fn err(&self, kind: ConfigErrorKind) -> ConfigError {
        ConfigError {
            line: Some(self.line),
            key: self.key.to_string(),
            kind,
        }
    }

    fn mismatch(&self, expected: &'static str) -> ConfigError {
        self.err(ConfigErrorKind::TypeMismatch {
            expected,
            got: self.value.to_string(),
        })
    }

    fn f64(&self) -> Result<f64, ConfigError> {
        self.value
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.mismatch("a finite number"))
    }

    fn positive(&self) -> Result<f64, ConfigError> {
        let v = self.f64()?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(self.mismatch("a positive number"))
        }
    }

    fn non_negative(&self) -> Result<f64, ConfigError> {
        let v = self.f64()?;
        if v >= 0.0 {
            Ok(v)
        } else {
            Err(self.mismatch("a non-negative number"))
        }
    }

    fn count(&self) -> Result<usize, ConfigError> {
        match self.value.parse::<usize>() {
            Ok(v) if v >= 1 => Ok(v),
            _ => Err(self.mismatch("a positive integer")),
        }
    }

    fn u64(&self) -> Result<u64, ConfigError> {
        self.value.parse().map_err(|_| self.mismatch("an unsigned integer"))
    }

    fn u32(&self) -> Result<u32, ConfigError> {
        self.value.parse().map_err(|_| self.mismatch("an unsigned integer"))
    }

    fn bool(&self) -> Result<bool, ConfigError> {
        match self.value {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(self.mismatch("true or false")),
        }
    }

    fn f64_list(&self) -> Result<Vec<f64>, ConfigError> {
        let v: Option<Vec<f64>> = self
            .value
            .split(',')
            .map(|s| s.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect();
        match v {
            Some(v) if v.windows(2).all(|w| w[1] > w[0]) => Ok(v),
            _ => Err(self.mismatch("a strictly increasing comma-separated list of numbers")),
        }
    }

    /// `a:b:c; a:b:c; ...`
    fn triples(&self) -> Result<Vec<[f64; 3]>, ConfigError> {
        let parse = |item: &str| -> Option<[f64; 3]> {
            let v: Vec<f64> = item
                .split(':')
                .map(|s| s.trim().parse::<f64>().ok())
                .collect::<Option<_>>()?;
            (v.len() == 3 && v.iter().all(|x| x.is_finite())).then(|| [v[0], v[1], v[2]])
        };
        let v: Option<Vec<_>> = self.value.split(';').map(parse).collect();
        v.filter(|v| !v.is_empty())
            .ok_or_else(|| self.mismatch("`a:b:c` triples separated by `;`"))
    }
}

fn apply(cfg: &mut ScenarioConfig, e: &Entry) -> Result<(), ConfigError> {
    let r = &mut cfg.radar;
    let p = &mut cfg.pipeline;
    match e.key {
        "radar.carrier_freq_hz" => r.carrier_freq_hz = e.positive()?,
        "radar.bandwidth_hz" => r.bandwidth_hz = e.positive()?,
        "radar.chirp_slope_hz_per_s" => r.chirp_slope_hz_per_s = e.positive()?,
        "radar.t_pri_s" => r.t_pri_s = e.positive()?,
        "radar.num_tx" => r.num_tx = e.count()?,
        "radar.num_rx" => r.num_rx = e.count()?,
        "radar.d_tx_m" => r.d_tx_m = e.positive()?,
        "radar.d_rx_m" => r.d_rx_m = e.positive()?,
        "radar.num_slow" => r.num_slow = e.count()?,
        "radar.num_fast" => r.num_fast = e.count()?,
        "radar.sample_rate_sps" => r.sample_rate_sps = e.positive()?,
        "radar.t_cpi_s" => r.t_cpi_s = e.positive()?,
        "radar.ref_range_m" => r.ref_range_m = e.non_negative()?,

        "scene.preset" => {
            if !scene::PRESET_NAMES.contains(&e.value) {
                return Err(e.err(ConfigErrorKind::Invalid(format!(
                    "unknown preset `{}`, expected one of {}",
                    e.value,
                    scene::PRESET_NAMES.join(", ")
                ))));
            }
            cfg.scene.preset = e.value.to_string();
        }
        "scene.noise_power" => cfg.scene.noise_power = Some(e.non_negative()?),
        "scene.reflectivity_jitter" => cfg.scene.reflectivity_jitter = Some(e.non_negative()?),
        "scene.clutter" => cfg.scene.clutter = e.bool()?,
        "scene.scatterers" => {
            cfg.scene.scatterers = Some(
                e.triples()?
                    .into_iter()
                    .map(|[x, y, a]| Scatterer::new(x, y, a))
                    .collect(),
            )
        }
        "scene.waypoints" => {
            let w: Vec<Waypoint> = e
                .triples()?
                .into_iter()
                .map(|[t, x, y]| Waypoint::new(t, x, y))
                .collect();
            if w.len() < 2 || w.windows(2).any(|p| p[1].t_s <= p[0].t_s) {
                return Err(e.err(ConfigErrorKind::Invalid(
                    "need two or more waypoints with increasing times".into(),
                )));
            }
            cfg.scene.waypoints = Some(w);
        }
        "scene.point_range_m" => cfg.scene.point_range_m = e.positive()?,
        "scene.point_velocity_mps" => cfg.scene.point_velocity_mps = e.f64()?,
        "scene.point_duration_s" => cfg.scene.point_duration_s = e.positive()?,

        "pipeline.algo" => {
            let v: Option<Vec<Algorithm>> = if e.value == "all" {
                Some(vec![Algorithm::Em, Algorithm::Pga, Algorithm::Ccr])
            } else {
                e.value.split(',').map(|s| Algorithm::parse(s.trim())).collect()
            };
            let mut v = v.ok_or_else(|| e.mismatch("`all` or a list of none, em, pga, ccr"))?;
            v.retain(|a| *a != Algorithm::None);
            let mut seen = Vec::new();
            v.retain(|a| {
                let fresh = !seen.contains(a);
                seen.push(*a);
                fresh
            });
            p.algorithms = v;
        }
        "pipeline.frames" => {
            p.frames = FrameSpec::parse_list(e.value).ok_or_else(|| e.mismatch("frame indices or times like `8.1s`"))?
        }
        "pipeline.blank_frames" => {
            p.blank_frames = e.u32()?;
            if p.blank_frames == 0 {
                return Err(e.mismatch("a positive integer"));
            }
        }
        "pipeline.seed" => p.seed = e.u64()?,
        "pipeline.window" => {
            p.window = match e.value {
                "none" => Window::None,
                "hann" => Window::Hann,
                _ => return Err(e.mismatch("none or hann")),
            }
        }
        "pipeline.tdm_offset" => p.synth.tdm_offset = e.bool()?,
        "pipeline.rvp" => p.synth.residual_video_phase = e.bool()?,
        "pipeline.range_mode" => {
            p.synth.range_mode = match e.value {
                "exact" => RangeMode::Exact,
                "projected" => RangeMode::Projected,
                _ => return Err(e.mismatch("exact or projected")),
            }
        }
        "pipeline.em_velocities" => p.mocomp.em.velocities_mps = e.f64_list()?,
        "pipeline.em_accels" => p.mocomp.em.accels_mps2 = e.f64_list()?,
        "pipeline.em_range_walk" => p.mocomp.em.range_walk = e.bool()?,
        "pipeline.ccr_max_iters" => p.mocomp.ccr.max_iters = e.count()?,
        "pipeline.ccr_conv_tol" => p.mocomp.ccr.conv_tol = e.positive()?,
        "pipeline.ccr_reference" => {
            p.mocomp.ccr.reference = match e.value {
                "running-mean" => CcrReference::RunningMean,
                "adjacent" => CcrReference::Adjacent,
                _ => return Err(e.mismatch("running-mean or adjacent")),
            }
        }
        "pipeline.pga_max_iters" => p.mocomp.pga.max_iters = e.count()?,
        "pipeline.pga_rms_tol_rad" => p.mocomp.pga.rms_tol_rad = e.positive()?,
        "pipeline.pga_top_k" => p.mocomp.pga.top_k = e.count()?,

        "output.dir" => {
            if e.value.is_empty() {
                return Err(e.mismatch("a path"));
            }
            cfg.output.dir = PathBuf::from(e.value)
        }
        "output.formats" => {
            let v: Option<Vec<ImageFormat>> = e
                .value
                .split(',')
                .map(|s| match s.trim() {
                    "pgm" => Some(ImageFormat::Pgm),
                    "csv" => Some(ImageFormat::Csv),
                    _ => None,
                })
                .collect();
            cfg.output.formats = v.ok_or_else(|| e.mismatch("a list of pgm, csv"))?;
        }
        "output.write_cubes" => cfg.output.write_cubes = e.bool()?,
        "output.db_floor" => {
            let v = e.f64()?;
            if v >= 0.0 {
                return Err(e.mismatch("a negative number"));
            }
            cfg.output.db_floor = v;
        }
        _ => return Err(e.err(ConfigErrorKind::UnknownKey)),
    }
    Ok(())
}

fn whole(kind: ConfigErrorKind, key: &str) -> ConfigError {
    ConfigError {
        line: None,
        key: key.into(),
        kind,
    }
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = ScenarioConfig::with_preset("");
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError {
                line: Some(line),
                key: String::new(),
                kind: ConfigErrorKind::Syntax(format!("expected `section.key = value`, got `{content}`")),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        let e = Entry { line, key, value };
        if key.split('.').count() != 2 || key.split('.').any(str::is_empty) {
            return Err(e.err(ConfigErrorKind::Syntax("key must be `section.key`".into())));
        }
        if let Some(&first_line) = seen.get(key) {
            return Err(e.err(ConfigErrorKind::Duplicate { first_line }));
        }
        seen.insert(key, line);
        apply(&mut cfg, &e)?;
    }
    if cfg.scene.preset.is_empty() {
        return Err(whole(ConfigErrorKind::MissingKey, "scene.preset"));
    }
    derive_params(&cfg.radar).map_err(|err| whole(ConfigErrorKind::Invalid(err.to_string()), "radar"))?;
    if cfg.scene.preset == "single-point"
        && cfg.scene.point_range_m + cfg.scene.point_velocity_mps * cfg.scene.point_duration_s <= 0.0
    {
        return Err(whole(
            ConfigErrorKind::Invalid("point target would cross the radar".into()),
            "scene.point_velocity_mps",
        ));
    }
    Ok(cfg)
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig::default_uturn()
    }
}
