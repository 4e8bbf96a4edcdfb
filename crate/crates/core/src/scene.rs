//! Rigid extended targets made of point scatterers, their motion, and the
//! stationary clutter around them.
//!
//! The radar sits at the origin looking along +y. A target's center of
//! gravity follows a piecewise-cubic path through time-stamped waypoints; the
//! body rotates either by an explicit polynomial law or with its heading
//! tangent to the path. Body coordinates put `x` along the heading.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

/// Timestamps may exceed the trajectory domain by this much (seconds) to
/// absorb rounding in frame timing.
const TIME_SLACK_S: f64 = 1e-9;

/// A point scatterer. For target scatterers `x_m`/`y_m` are body-frame
/// offsets from the center of gravity; for clutter they are absolute ground
/// coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scatterer {
    pub x_m: f64,
    pub y_m: f64,
    pub reflectivity: f64,
}

impl Scatterer {
    pub fn new(x_m: f64, y_m: f64, reflectivity: f64) -> Self {
        Scatterer { x_m, y_m, reflectivity }
    }
}

/// `ψ(t) = ψ0 + α·t + β·t²`, with `t` measured from the first waypoint.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RotationLaw {
    pub psi0_rad: f64,
    pub alpha_rad_per_s: f64,
    pub beta_rad_per_s2: f64,
}

impl RotationLaw {
    pub fn angle_at(&self, dt: f64) -> f64 {
        self.psi0_rad + self.alpha_rad_per_s * dt + self.beta_rad_per_s2 * dt * dt
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rotation {
    Law(RotationLaw),
    /// Body heading equals the direction of travel.
    HeadingFollowsPath,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub t_s: f64,
    pub x_m: f64,
    pub y_m: f64,
}

impl Waypoint {
    pub fn new(t_s: f64, x_m: f64, y_m: f64) -> Self {
        Waypoint { t_s, x_m, y_m }
    }
}

/// How a scatterer's range is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RangeMode {
    /// Euclidean distance of the rigidly transformed scatterer.
    #[default]
    Exact,
    /// First-order projection `R + x·cos ψ − y·sin ψ` with ψ the body
    /// aspect relative to the line of sight.
    Projected,
}

/// Natural cubic spline through `(t_i, y_i)`.
#[derive(Debug, Clone, PartialEq)]
struct CubicSpline {
    t: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl CubicSpline {
    fn new(t: Vec<f64>, y: Vec<f64>) -> Self {
        let n = t.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior knots.
            let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut upper = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for i in 0..k {
                diag[i] = 2.0 * (h[i] + h[i + 1]);
                upper[i] = h[i + 1];
                rhs[i] = 6.0 * ((y[i + 2] - y[i + 1]) / h[i + 1] - (y[i + 1] - y[i]) / h[i]);
            }
            for i in 1..k {
                let w = h[i] / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
            }
        }
        CubicSpline { t, y, m }
    }

    fn segment(&self, t: f64) -> usize {
        match self.t.partition_point(|&ti| ti <= t) {
            0 => 0,
            i => (i - 1).min(self.t.len() - 2),
        }
    }

    /// Value and first derivative at `t`.
    fn eval(&self, t: f64) -> (f64, f64) {
        let i = self.segment(t);
        let h = self.t[i + 1] - self.t[i];
        let a = (self.t[i + 1] - t) / h;
        let b = (t - self.t[i]) / h;
        let (y0, y1, m0, m1) = (self.y[i], self.y[i + 1], self.m[i], self.m[i + 1]);
        let value = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let slope = (y1 - y0) / h + ((1.0 - 3.0 * a * a) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0;
        (value, slope)
    }
}

/// Center-of-gravity path plus body rotation.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySpec {
    waypoints: Vec<Waypoint>,
    rotation: Rotation,
    x: CubicSpline,
    y: CubicSpline,
}

impl TrajectorySpec {
    pub fn new(waypoints: Vec<Waypoint>, rotation: Rotation) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::InvalidTrajectory("at least 2 waypoints are required".into()));
        }
        if waypoints
            .iter()
            .any(|w| !(w.t_s.is_finite() && w.x_m.is_finite() && w.y_m.is_finite()))
        {
            return Err(Error::InvalidTrajectory("waypoints must be finite".into()));
        }
        if waypoints.windows(2).any(|w| w[1].t_s <= w[0].t_s) {
            return Err(Error::InvalidTrajectory(
                "waypoint timestamps must be strictly increasing".into(),
            ));
        }
        if let Rotation::Law(l) = rotation {
            if ![l.psi0_rad, l.alpha_rad_per_s, l.beta_rad_per_s2]
                .iter()
                .all(|v| v.is_finite())
            {
                return Err(Error::InvalidTrajectory("rotation law must be finite".into()));
            }
        }
        let t: Vec<f64> = waypoints.iter().map(|w| w.t_s).collect();
        let x = CubicSpline::new(t.clone(), waypoints.iter().map(|w| w.x_m).collect());
        let y = CubicSpline::new(t, waypoints.iter().map(|w| w.y_m).collect());
        Ok(TrajectorySpec {
            waypoints,
            rotation,
            x,
            y,
        })
    }

    pub fn waypoints(&self) -> &[Waypoint] {
        &self.waypoints
    }

    pub fn rotation(&self) -> Rotation {
        self.rotation
    }

    pub fn start_s(&self) -> f64 {
        self.waypoints[0].t_s
    }

    pub fn end_s(&self) -> f64 {
        self.waypoints[self.waypoints.len() - 1].t_s
    }

    pub fn duration_s(&self) -> f64 {
        self.end_s() - self.start_s()
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start_s() - TIME_SLACK_S && t <= self.end_s() + TIME_SLACK_S
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(Error::TimeOutOfRange {
                t,
                start: self.start_s(),
                end: self.end_s(),
            })
        }
    }

    /// Center-of-gravity position and body angle at `t`.
    pub fn pose_at(&self, t: f64) -> Result<Pose> {
        self.check_time(t)?;
        let (x, vx) = self.x.eval(t);
        let (y, vy) = self.y.eval(t);
        let psi_rad = match self.rotation {
            Rotation::Law(law) => law.angle_at(t - self.start_s()),
            Rotation::HeadingFollowsPath => vy.atan2(vx),
        };
        Ok(Pose {
            position: [x, y],
            psi_rad,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: [f64; 2],
    pub psi_rad: f64,
}

impl Pose {
    /// Distance from the radar to the center of gravity, `R(t)`.
    pub fn range(&self) -> f64 {
        self.position[0].hypot(self.position[1])
    }

    /// Absolute ground position of a body-frame offset.
    pub fn to_world(&self, x_local: f64, y_local: f64) -> [f64; 2] {
        let (s, c) = self.psi_rad.sin_cos();
        [
            self.position[0] + x_local * c - y_local * s,
            self.position[1] + x_local * s + y_local * c,
        ]
    }

    /// Body angle relative to the radar line of sight.
    pub fn aspect_rad(&self) -> f64 {
        self.psi_rad - self.position[1].atan2(self.position[0])
    }
}

/// `R + x·cos ψ − y·sin ψ`: range of a body point under the far-field
/// projection, with ψ the rotation away from the line of sight.
pub fn projected_range(center_range_m: f64, x_local: f64, y_local: f64, psi_rad: f64) -> f64 {
    let (s, c) = psi_rad.sin_cos();
    center_range_m + x_local * c - y_local * s
}

/// Azimuth of a ground point from the radar boresight (+y), positive towards +x.
pub fn azimuth_of(point: [f64; 2]) -> f64 {
    point[0].atan2(point[1])
}

fn range_azimuth(pose: &Pose, s: &Scatterer, mode: RangeMode) -> (f64, f64) {
    let world = pose.to_world(s.x_m, s.y_m);
    let range = match mode {
        RangeMode::Exact => world[0].hypot(world[1]),
        RangeMode::Projected => projected_range(pose.range(), s.x_m, s.y_m, pose.aspect_rad()),
    };
    (range, azimuth_of(world))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub name: String,
    pub scatterers: Vec<Scatterer>,
    pub trajectory: TrajectorySpec,
    /// Stationary scatterers at absolute ground positions.
    pub clutter: Vec<Scatterer>,
    /// Variance of the circular complex Gaussian receiver noise per sample.
    pub noise_power: f64,
    pub seed: u64,
    /// Relative standard deviation of the frame-to-frame reflectivity
    /// fluctuation. Zero keeps reflectivities constant.
    pub reflectivity_jitter: f64,
    /// Declared body extent (length along x, width along y), when known.
    pub extent_m: Option<(f64, f64)>,
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_power.is_finite() && self.noise_power >= 0.0) {
            return Err(Error::InvalidParam {
                name: "noise_power",
                reason: format!("must be finite and non-negative, got {}", self.noise_power),
            });
        }
        if !(self.reflectivity_jitter.is_finite() && self.reflectivity_jitter >= 0.0) {
            return Err(Error::InvalidParam {
                name: "reflectivity_jitter",
                reason: format!("must be finite and non-negative, got {}", self.reflectivity_jitter),
            });
        }
        for s in self.scatterers.iter().chain(&self.clutter) {
            if !(s.reflectivity.is_finite() && s.reflectivity >= 0.0) {
                return Err(Error::InvalidParam {
                    name: "reflectivity",
                    reason: format!("must be finite and non-negative, got {}", s.reflectivity),
                });
            }
            if !(s.x_m.is_finite() && s.y_m.is_finite()) {
                return Err(Error::InvalidParam {
                    name: "scatterer",
                    reason: "coordinates must be finite".into(),
                });
            }
        }
        if let Some((len, wid)) = self.extent_m {
            let tol = 1e-9;
            if let Some(s) = self
                .scatterers
                .iter()
                .find(|s| s.x_m.abs() > len / 2.0 + tol || s.y_m.abs() > wid / 2.0 + tol)
            {
                return Err(Error::InvalidParam {
                    name: "scatterer",
                    reason: format!("offset ({}, {}) lies outside the {len} x {wid} m body", s.x_m, s.y_m),
                });
            }
        }
        Ok(())
    }

    /// Same clutter, noise and trajectory domain, with the target removed.
    pub fn without_target(&self) -> Scene {
        Scene {
            name: format!("{}-blank", self.name),
            scatterers: Vec::new(),
            ..self.clone()
        }
    }

    pub fn pose_at(&self, t: f64) -> Result<Pose> {
        self.trajectory.pose_at(t)
    }

    /// Range and boresight azimuth of target scatterer `b` at `t`.
    pub fn scatterer_range_azimuth(&self, b: usize, t: f64) -> Result<(f64, f64)> {
        self.scatterer_range_azimuth_with(b, t, RangeMode::Exact)
    }

    pub fn scatterer_range_azimuth_with(&self, b: usize, t: f64, mode: RangeMode) -> Result<(f64, f64)> {
        let s = self.scatterers.get(b).ok_or(Error::IndexOutOfRange {
            index: b,
            len: self.scatterers.len(),
        })?;
        let pose = self.trajectory.pose_at(t)?;
        Ok(range_azimuth(&pose, s, mode))
    }

    /// Range and azimuth of every target scatterer at one pose.
    pub(crate) fn target_geometry(&self, pose: &Pose, mode: RangeMode) -> impl Iterator<Item = (f64, f64)> + '_ {
        let pose = *pose;
        self.scatterers.iter().map(move |s| range_azimuth(&pose, s, mode))
    }
}

pub const PRESET_NAMES: [&str; 3] = ["uturn-car", "blank", "single-point"];

/// Start and end of the U-turn manoeuvre.
pub const UTURN_START: [f64; 2] = [-14.3, 4.9];
pub const UTURN_END: [f64; 2] = [-14.0, 30.3];
pub const UTURN_DURATION_S: f64 = 15.0;

const DEFAULT_NOISE_POWER: f64 = 10.0;

fn uturn_trajectory() -> TrajectorySpec {
    TrajectorySpec::new(
        vec![
            Waypoint::new(0.0, UTURN_START[0], UTURN_START[1]),
            // apex of the turn, the closest point to the radar
            Waypoint::new(7.5, -3.0, 17.6),
            Waypoint::new(UTURN_DURATION_S, UTURN_END[0], UTURN_END[1]),
        ],
        Rotation::HeadingFollowsPath,
    )
    .expect("preset trajectory is valid")
}

/// 5 x 2 grid over a 3.6 m x 1.6 m compact car body. The front-right corner
/// is the strongest return.
pub fn car_scatterers() -> Vec<Scatterer> {
    let xs = [-1.8, -0.9, 0.0, 0.9, 1.8];
    let right = [0.7, 0.5, 0.4, 0.5, 1.0];
    let left = [0.6, 0.4, 0.3, 0.4, 0.8];
    let mut out = Vec::with_capacity(10);
    for (i, &x) in xs.iter().enumerate() {
        out.push(Scatterer::new(x, -0.8, right[i]));
        out.push(Scatterer::new(x, 0.8, left[i]));
    }
    out
}

/// Weak stationary returns scattered around the test area.
pub fn road_clutter() -> Vec<Scatterer> {
    vec![
        Scatterer::new(6.0, 12.0, 0.05),
        Scatterer::new(-9.0, 20.0, 0.05),
        Scatterer::new(2.5, 26.0, 0.05),
        Scatterer::new(-20.0, 14.0, 0.05),
    ]
}

pub fn uturn_car(seed: u64) -> Scene {
    Scene {
        name: "uturn-car".into(),
        scatterers: car_scatterers(),
        trajectory: uturn_trajectory(),
        clutter: road_clutter(),
        noise_power: DEFAULT_NOISE_POWER,
        seed,
        reflectivity_jitter: 0.0,
        extent_m: Some((3.6, 1.6)),
    }
}

pub fn blank(seed: u64) -> Scene {
    Scene {
        name: "blank".into(),
        ..uturn_car(seed).without_target()
    }
}

/// One unit scatterer moving radially along boresight:
/// `R(t) = start_range + velocity·t` for `t` in `[0, duration]`.
pub fn single_point(start_range_m: f64, velocity_mps: f64, duration_s: f64, seed: u64) -> Result<Scene> {
    let trajectory = TrajectorySpec::new(
        vec![
            Waypoint::new(0.0, 0.0, start_range_m),
            Waypoint::new(duration_s, 0.0, start_range_m + velocity_mps * duration_s),
        ],
        // body x axis along the line of sight
        Rotation::Law(RotationLaw {
            psi0_rad: FRAC_PI_2,
            ..Default::default()
        }),
    )?;
    Ok(Scene {
        name: "single-point".into(),
        scatterers: vec![Scatterer::new(0.0, 0.0, 1.0)],
        trajectory,
        clutter: Vec::new(),
        noise_power: 0.0,
        seed,
        reflectivity_jitter: 0.0,
        extent_m: None,
    })
}

pub fn builtin_scenario(name: &str, seed: u64) -> Result<Scene> {
    match name {
        "uturn-car" => Ok(uturn_car(seed)),
        "blank" => Ok(blank(seed)),
        "single-point" => single_point(10.0, 1.0, UTURN_DURATION_S, seed),
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uturn_endpoints() {
        let s = uturn_car(0);
        let a = s.pose_at(0.0).unwrap();
        let b = s.pose_at(15.0).unwrap();
        assert!((a.position[0] + 14.3).abs() < 1e-12 && (a.position[1] - 4.9).abs() < 1e-12);
        assert!((b.position[0] + 14.0).abs() < 1e-12 && (b.position[1] - 30.3).abs() < 1e-12);
        assert_eq!(s.trajectory.duration_s(), 15.0);
    }

    #[test]
    fn pose_passes_through_waypoints() {
        let s = uturn_car(0);
        for w in s.trajectory.waypoints() {
            let p = s.pose_at(w.t_s).unwrap();
            assert!((p.position[0] - w.x_m).abs() < 1e-12);
            assert!((p.position[1] - w.y_m).abs() < 1e-12);
        }
    }

    #[test]
    fn pose_is_continuous() {
        let s = uturn_car(0);
        let mut prev = s.pose_at(0.0).unwrap();
        for i in 1..=15_000 {
            let p = s.pose_at(i as f64 * 1e-3).unwrap();
            let step = (p.position[0] - prev.position[0]).hypot(p.position[1] - prev.position[1]);
            assert!(step < 0.01);
            assert!((p.psi_rad - prev.psi_rad).abs() < 0.01);
            prev = p;
        }
    }

    #[test]
    fn out_of_range_time() {
        let s = uturn_car(0);
        assert!(matches!(s.pose_at(-0.1), Err(Error::TimeOutOfRange { .. })));
        assert!(matches!(s.pose_at(15.1), Err(Error::TimeOutOfRange { .. })));
        assert!(matches!(
            s.scatterer_range_azimuth(10, 1.0),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn constant_rotation_law() {
        let law = RotationLaw {
            psi0_rad: 0.3,
            ..Default::default()
        };
        let traj = TrajectorySpec::new(
            vec![Waypoint::new(0.0, 0.0, 5.0), Waypoint::new(2.0, 1.0, 6.0)],
            Rotation::Law(law),
        )
        .unwrap();
        for t in [0.0, 0.7, 2.0] {
            assert_eq!(traj.pose_at(t).unwrap().psi_rad, 0.3);
        }
    }

    #[test]
    fn projected_range_special_angles() {
        assert_eq!(projected_range(10.0, 1.5, 0.0, 0.0), 11.5);
        assert!((projected_range(10.0, 0.0, 0.7, FRAC_PI_2) - 9.3).abs() < 1e-15);
    }

    #[test]
    fn car_ranges_match_rigid_transform_oracle() {
        let s = uturn_car(0);
        let t = 8.4;
        // oracle: rotate by heading from a finite-difference tangent, translate, measure
        let p = s.pose_at(t).unwrap();
        let (ahead, behind) = (s.pose_at(t + 1e-6).unwrap(), s.pose_at(t - 1e-6).unwrap());
        let heading = (ahead.position[1] - behind.position[1]).atan2(ahead.position[0] - behind.position[0]);
        assert!((heading - p.psi_rad).abs() < 1e-6);
        let (sn, cs) = p.psi_rad.sin_cos();
        for (b, sc) in s.scatterers.iter().enumerate() {
            let wx = p.position[0] + cs * sc.x_m - sn * sc.y_m;
            let wy = p.position[1] + sn * sc.x_m + cs * sc.y_m;
            let expect = (wx * wx + wy * wy).sqrt();
            let (r, phi) = s.scatterer_range_azimuth(b, t).unwrap();
            assert!((r - expect).abs() < 1e-9, "scatterer {b}: {r} vs {expect}");
            assert!((phi - wx.atan2(wy)).abs() < 1e-12);
        }
    }

    #[test]
    fn projected_mode_approximates_exact_geometry() {
        let s = uturn_car(0);
        for b in 0..s.scatterers.len() {
            let (exact, _) = s.scatterer_range_azimuth(b, 8.4).unwrap();
            let (proj, _) = s.scatterer_range_azimuth_with(b, 8.4, RangeMode::Projected).unwrap();
            // second-order term is at most |offset|²/(2R)
            assert!((exact - proj).abs() < 0.2, "{exact} vs {proj}");
        }
    }

    #[test]
    fn presets() {
        assert_eq!(builtin_scenario("uturn-car", 1).unwrap().trajectory.duration_s(), 15.0);
        let b = builtin_scenario("blank", 1).unwrap();
        assert!(b.scatterers.is_empty() && b.noise_power > 0.0);
        assert!(matches!(builtin_scenario("truck", 1), Err(Error::UnknownPreset(_))));
        for name in PRESET_NAMES {
            builtin_scenario(name, 0).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn single_point_moves_linearly() {
        let s = single_point(12.0, -1.5, 4.0, 0).unwrap();
        for i in 0..=40 {
            let t = i as f64 * 0.1;
            let r = s.pose_at(t).unwrap().range();
            assert!((r - (12.0 - 1.5 * t)).abs() < 1e-12);
            let (rb, phi) = s.scatterer_range_azimuth(0, t).unwrap();
            assert!((rb - r).abs() < 1e-12 && phi.abs() < 1e-12);
        }
    }

    #[test]
    fn bad_trajectories() {
        let law = Rotation::Law(RotationLaw::default());
        assert!(TrajectorySpec::new(vec![Waypoint::new(0.0, 0.0, 1.0)], law).is_err());
        assert!(TrajectorySpec::new(vec![Waypoint::new(1.0, 0.0, 1.0), Waypoint::new(1.0, 0.0, 2.0)], law).is_err());
    }

    #[test]
    fn extent_and_reflectivity_validation() {
        let mut s = uturn_car(0);
        s.scatterers.push(Scatterer::new(2.5, 0.0, 1.0));
        assert!(s.validate().is_err());
        let mut s = uturn_car(0);
        s.scatterers[0].reflectivity = -1.0;
        assert!(s.validate().is_err());
    }

    proptest! {
        #[test]
        fn rigid_body_distances_constant(t in 0.0f64..15.0) {
            let s = uturn_car(0);
            let p0 = s.pose_at(0.0).unwrap();
            let p = s.pose_at(t).unwrap();
            for i in 0..s.scatterers.len() {
                for j in i + 1..s.scatterers.len() {
                    let (a, b) = (s.scatterers[i], s.scatterers[j]);
                    let d0 = {
                        let (u, v) = (p0.to_world(a.x_m, a.y_m), p0.to_world(b.x_m, b.y_m));
                        (u[0] - v[0]).hypot(u[1] - v[1])
                    };
                    let d = {
                        let (u, v) = (p.to_world(a.x_m, a.y_m), p.to_world(b.x_m, b.y_m));
                        (u[0] - v[0]).hypot(u[1] - v[1])
                    };
                    prop_assert!((d - d0).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn projected_offset_independent_of_speed(
            x in -2.0f64..2.0, y in -1.0f64..1.0, psi in -3.2f64..3.2, r1 in 1.0f64..30.0, r2 in 1.0f64..30.0
        ) {
            let a = projected_range(r1, x, y, psi) - r1;
            let b = projected_range(r2, x, y, psi) - r2;
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
