//! End-to-end run: synthesize, compensate each channel, image, integrate,
//! score, and write artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::ScenarioConfig;
use crate::cubefile;
use crate::error::{Error, Result};
use crate::export;
use crate::imaging::{
    axes_of, image_from_profiles, nci, profiles_to_fast_time, range_doppler, range_profiles, Axes, Channel, FrameStack,
    Profiles, RdImage, Window,
};
use crate::metrics::{comparison_table, Algorithm, ArrayConfig, ConfigResult, MetricsReport};
use crate::mocomp::{compensate, has_dominant_scatterer, MotionContext};
use crate::params::{validate_params, ParamExpectations};
use crate::synth::{synthesize_sequence, RawCube};

/// Blank frames draw noise from a seed decorrelated from the target frames.
const BLANK_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Compensated images of one frame for one algorithm.
#[derive(Debug, Clone)]
pub struct FrameImages {
    pub algorithm: Algorithm,
    pub frame_index: u32,
    pub blank: bool,
    pub siso: RdImage,
    pub mimo: RdImage,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub report: MetricsReport,
    pub images: Vec<FrameImages>,
    pub target_cubes: Vec<RawCube>,
    pub blank_cubes: Vec<RawCube>,
    /// Deterministic run log, one line per processed channel.
    pub log: String,
    pub files: Vec<PathBuf>,
}

/// Range profiles of every channel of one frame, in `(p, q)` order.
struct FrameProfiles {
    frame_index: u32,
    blank: bool,
    channels: Vec<((usize, usize), Profiles)>,
    axes: Axes,
}

fn frame_profiles(cube: &RawCube, blank: bool, cfg: &ScenarioConfig) -> Result<FrameProfiles> {
    let d = cube.dims();
    let pairs: Vec<(usize, usize)> = (0..d.num_tx).flat_map(|p| (0..d.num_rx).map(move |q| (p, q))).collect();
    let channels = pairs
        .par_iter()
        .map(|&(p, q)| range_profiles(cube, p, q, cfg.pipeline.window).map(|prof| ((p, q), prof)))
        .collect::<Result<Vec<_>>>()?;
    Ok(FrameProfiles {
        frame_index: cube.frame_index,
        blank,
        channels,
        axes: axes_of(cube)?,
    })
}

fn process_frame(
    frame: &FrameProfiles,
    algorithm: Algorithm,
    ctx: &MotionContext,
    cfg: &ScenarioConfig,
    log: &mut String,
) -> Result<FrameImages> {
    let results = frame
        .channels
        .par_iter()
        .map(|(pq, prof)| compensate(prof.clone(), algorithm, ctx, &cfg.pipeline.mocomp).map(|r| (*pq, r)))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("motion compensation"))?;

    let mut images = Vec::with_capacity(results.len());
    for ((p, q), r) in results {
        let d = &r.diagnostics;
        let _ = write!(
            log,
            "frame {} {} {} tx{p}-rx{q}: iterations {}",
            frame.frame_index,
            if frame.blank { "blank" } else { "target" },
            algorithm.id(),
            d.iterations
        );
        if let (Some(a), Some(b)) = (d.entropy_trace.first(), d.entropy_trace.last()) {
            let _ = write!(log, ", entropy {a:.6} -> {b:.6}");
        }
        if d.no_target {
            log.push_str(", no dominant scatterer, passed through");
        }
        for w in &d.warnings {
            let _ = write!(log, ", warning: {w}");
        }
        log.push('\n');
        images.push(image_from_profiles(
            &r.profiles,
            Channel::Siso { p, q },
            frame.frame_index,
            frame.axes,
        ));
    }
    let mimo = nci(&images).map_err(|e| e.in_stage("integration"))?;
    let _ = writeln!(
        log,
        "frame {} {} {}: integrated {} channels",
        frame.frame_index,
        if frame.blank { "blank" } else { "target" },
        algorithm.id(),
        images.len()
    );
    Ok(FrameImages {
        algorithm,
        frame_index: frame.frame_index,
        blank: frame.blank,
        siso: images.swap_remove(0),
        mimo,
    })
}

/// Compensates every channel of `cube` and returns the result in the
/// fast-time domain, ready to be written or imaged again.
pub fn compensate_cube(cube: &RawCube, algorithm: Algorithm, cfg: &ScenarioConfig) -> Result<(RawCube, String)> {
    let ctx = MotionContext::from_params(&cube.params)?;
    let frame = frame_profiles(cube, false, cfg).map_err(|e| e.in_stage("imaging"))?;
    let mut log = String::new();
    let mut out = cube.clone();
    let results = frame
        .channels
        .par_iter()
        .map(|(pq, prof)| compensate(prof.clone(), algorithm, &ctx, &cfg.pipeline.mocomp).map(|r| (*pq, r)))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("motion compensation"))?;
    for ((p, q), r) in results {
        let _ = writeln!(
            log,
            "frame {} {} tx{p}-rx{q}: iterations {}{}",
            cube.frame_index,
            algorithm.id(),
            r.diagnostics.iterations,
            if r.diagnostics.no_target {
                ", no dominant scatterer, passed through"
            } else {
                ""
            }
        );
        let samples = profiles_to_fast_time(&r.profiles);
        out.channel_mut(p, q)?.copy_from_slice(&samples);
    }
    Ok((out, log))
}

/// SISO image of channel (0, 0) and the integrated image over all channels.
pub fn image_cube(cube: &RawCube, window: Window) -> Result<(RdImage, RdImage)> {
    let d = cube.dims();
    let images = (0..d.num_tx)
        .flat_map(|p| (0..d.num_rx).map(move |q| (p, q)))
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&(p, q)| range_doppler(cube, p, q, window))
        .collect::<Result<Vec<_>>>()?;
    let mimo = nci(&images)?;
    Ok((images[0].clone(), mimo))
}

fn write_bytes(path: &Path, bytes: &[u8], files: &mut Vec<PathBuf>) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    files.push(path.to_path_buf());
    Ok(())
}

/// Runs the configured comparison. The uncompensated baseline is always
/// included. With `out_dir`, every artifact is written there; the contents
/// depend only on the configuration, not on thread count.
pub fn run_pipeline(cfg: &ScenarioConfig, out_dir: Option<&Path>) -> Result<PipelineOutput> {
    let mut log = String::new();
    let params = &cfg.radar;
    let warnings =
        validate_params(params, &ParamExpectations::measurement_table()).map_err(|e| e.in_stage("parameters"))?;
    for w in &warnings {
        let _ = writeln!(log, "parameter warning: {w}");
    }
    let ctx = MotionContext::from_params(params)?;

    let scene = cfg.build_scene().map_err(|e| e.in_stage("scene"))?;
    let mut blank_scene = scene.without_target();
    blank_scene.seed = scene.seed ^ BLANK_SEED_SALT;

    let target_idx = cfg.frame_indices();
    let blank_idx: Vec<u32> = (0..cfg.pipeline.blank_frames).collect();
    let synth = &cfg.pipeline.synth;
    let target_cubes = synthesize_sequence(&scene, params, &target_idx, synth).map_err(|e| e.in_stage("synthesis"))?;
    let blank_cubes =
        synthesize_sequence(&blank_scene, params, &blank_idx, synth).map_err(|e| e.in_stage("synthesis"))?;
    let _ = writeln!(
        log,
        "scene {}: {} target frames {:?}, {} blank frames, {} channels per frame",
        scene.name,
        target_idx.len(),
        target_idx,
        blank_idx.len(),
        params.num_channels()
    );

    let mut frames = Vec::with_capacity(target_cubes.len() + blank_cubes.len());
    for c in &target_cubes {
        frames.push(frame_profiles(c, false, cfg).map_err(|e| e.in_stage("imaging"))?);
    }
    for c in &blank_cubes {
        frames.push(frame_profiles(c, true, cfg).map_err(|e| e.in_stage("imaging"))?);
    }
    let degenerate = !frames
        .iter()
        .filter(|f| !f.blank)
        .any(|f| f.channels.iter().any(|(_, p)| has_dominant_scatterer(p)));
    if degenerate {
        let _ = writeln!(
            log,
            "no target frame shows a dominant scatterer; reporting noise-floor statistics only"
        );
    }

    let mut algorithms = vec![Algorithm::None];
    algorithms.extend(
        cfg.pipeline
            .algorithms
            .iter()
            .copied()
            .filter(|a| *a != Algorithm::None),
    );

    let mut images = Vec::new();
    let mut results = Vec::new();
    for &alg in &algorithms {
        let mut stacks = [
            (ArrayConfig::Siso, FrameStack::new(), FrameStack::new()),
            (ArrayConfig::Mimo, FrameStack::new(), FrameStack::new()),
        ];
        for frame in &frames {
            let fi = process_frame(frame, alg, &ctx, cfg, &mut log)?;
            for (array, blank, target) in stacks.iter_mut() {
                let img = match array {
                    ArrayConfig::Siso => fi.siso.clone(),
                    ArrayConfig::Mimo => fi.mimo.clone(),
                };
                if fi.blank {
                    blank.push(img)?
                } else {
                    target.push(img)?
                }
            }
            images.push(fi);
        }
        for (array, blank, frames) in stacks {
            results.push(ConfigResult {
                array,
                algorithm: alg,
                blank,
                frames,
            });
        }
    }
    let report = comparison_table(&results, degenerate).map_err(|e| e.in_stage("metrics"))?;

    let mut files = Vec::new();
    if let Some(dir) = out_dir {
        write_outputs(
            dir,
            cfg,
            &report,
            &images,
            &target_cubes,
            &blank_cubes,
            &log,
            &mut files,
        )
        .map_err(|e| e.in_stage("output"))?;
    }
    Ok(PipelineOutput {
        report,
        images,
        target_cubes,
        blank_cubes,
        log,
        files,
    })
}

#[allow(clippy::too_many_arguments)]
fn write_outputs(
    dir: &Path,
    cfg: &ScenarioConfig,
    report: &MetricsReport,
    images: &[FrameImages],
    target_cubes: &[RawCube],
    blank_cubes: &[RawCube],
    log: &str,
    files: &mut Vec<PathBuf>,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let img_dir = dir.join("images");
    std::fs::create_dir_all(&img_dir).map_err(|e| Error::io(format!("creating {}", img_dir.display()), e))?;
    for fi in images.iter().filter(|f| !f.blank) {
        for (tag, img) in [("siso", &fi.siso), ("mimo", &fi.mimo)] {
            let stem = format!("{}_{}_f{:04}", fi.algorithm.id(), tag, fi.frame_index);
            files.extend(export::write_image(
                &img_dir,
                &stem,
                img,
                &cfg.output.formats,
                cfg.output.db_floor,
            )?);
        }
    }
    if cfg.output.write_cubes {
        let cube_dir = dir.join("cubes");
        std::fs::create_dir_all(&cube_dir).map_err(|e| Error::io(format!("creating {}", cube_dir.display()), e))?;
        for (tag, cubes) in [("target", target_cubes), ("blank", blank_cubes)] {
            for c in cubes {
                let path = cube_dir.join(format!("{tag}_f{:04}.cube", c.frame_index));
                cubefile::write_cube(&path, c)?;
                files.push(path);
            }
        }
    }
    write_bytes(&dir.join("report.txt"), report.render_text().as_bytes(), files)?;
    write_bytes(&dir.join("report.csv"), report.render_csv().as_bytes(), files)?;
    write_bytes(&dir.join("config.conf"), cfg.serialize().as_bytes(), files)?;
    write_bytes(&dir.join("run.log"), log.as_bytes(), files)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{FrameSpec, ScenarioConfig};
    use crate::mocomp::EmSearch;

    /// Fast configuration: tiny arrays, one target frame, two blank frames.
    fn quick(preset: &str) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::with_preset(preset);
        cfg.radar.num_slow = 32;
        cfg.radar.num_fast = 64;
        cfg.radar.t_pri_s = cfg.radar.t_cpi_s / (32.0 * 3.0);
        cfg.pipeline.frames = vec![FrameSpec::Time(8.4)];
        cfg.pipeline.blank_frames = 2;
        cfg.pipeline.mocomp.em = EmSearch::grid(-0.5, 0.5, 0.5, 0.0, 0.0, 1.0).unwrap();
        cfg.pipeline.mocomp.ccr.max_iters = 5;
        cfg
    }

    #[test]
    fn logs_every_channel() {
        let out = run_pipeline(&quick("uturn-car"), None).unwrap();
        // 4 algorithms x 3 frames x 12 channels
        let lines = out.log.lines().filter(|l| l.contains(" tx")).count();
        assert_eq!(lines, 4 * 3 * 12);
        assert!(out.log.contains("integrated 12 channels"));
        assert_eq!(out.report.rows.len(), 8);
        assert!(!out.report.degenerate);
    }

    #[test]
    fn blank_preset_is_degenerate() {
        let out = run_pipeline(&quick("blank"), None).unwrap();
        assert!(out.report.degenerate);
        assert!(out.report.rows.iter().all(|r| r.entropy.is_empty()));
        assert!(out.report.rows.iter().all(|r| r.cov_conventional.value.is_finite()));
    }

    #[test]
    fn artifacts_are_reproducible() {
        let cfg = quick("uturn-car");
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ra = run_pipeline(&cfg, Some(a.path())).unwrap();
        run_pipeline(&cfg, Some(b.path())).unwrap();
        assert!(!ra.files.is_empty());
        for f in &ra.files {
            let rel = f.strip_prefix(a.path()).unwrap();
            assert_eq!(
                std::fs::read(f).unwrap(),
                std::fs::read(b.path().join(rel)).unwrap(),
                "{rel:?}"
            );
        }
    }

    #[test]
    fn compensated_cube_images_like_the_pipeline() {
        let cfg = quick("uturn-car");
        let out = run_pipeline(&cfg, None).unwrap();
        let cube = &out.target_cubes[0];
        let (comp, log) = compensate_cube(cube, Algorithm::Pga, &cfg).unwrap();
        assert_eq!(log.lines().count(), 12);
        let (siso, mimo) = image_cube(&comp, cfg.pipeline.window).unwrap();
        let reference = out
            .images
            .iter()
            .find(|f| f.algorithm == Algorithm::Pga && !f.blank)
            .unwrap();
        for (a, b) in [(&siso, &reference.siso), (&mimo, &reference.mimo)] {
            let scale = b.pixels.iter().cloned().fold(0.0, f64::max);
            for (x, y) in a.pixels.iter().zip(b.pixels.iter()) {
                assert!((x - y).abs() <= 1e-9 * scale);
            }
        }
        let (raw_siso, _) = image_cube(cube, Window::None).unwrap();
        assert_eq!(raw_siso.pixels.dim(), siso.pixels.dim());
    }

    #[test]
    fn stage_labels_on_failure() {
        let mut cfg = quick("uturn-car");
        cfg.pipeline.frames = vec![FrameSpec::Index(500)];
        let err = run_pipeline(&cfg, None).unwrap_err();
        assert!(err.to_string().starts_with("synthesis"), "{err}");
    }
}
