//! Network geometry: access points, UEs, region of interest, targets.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridConfig, C64};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Bearing of `other` seen from `self`, measured from +x.
    pub fn bearing_to(&self, other: &Point) -> f64 {
        (other.y - self.y).atan2(other.x - self.x)
    }
}

pub fn wavelength(f0: f64) -> f64 {
    SPEED_OF_LIGHT / f0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessPoint {
    pub position: Point,
    /// Broadside direction of the ULA, radians from +x.
    pub orientation: f64,
    pub antennas: usize,
    /// Element spacing in meters.
    pub spacing: f64,
}

impl AccessPoint {
    /// Half-wavelength ULA.
    pub fn new(position: Point, orientation: f64, antennas: usize, f0: f64) -> Self {
        Self {
            position,
            orientation,
            antennas,
            spacing: wavelength(f0) / 2.0,
        }
    }

    /// `sin` of the local angle towards `point` (bearing minus orientation).
    pub fn sin_angle(&self, point: &Point) -> Result<f64> {
        let dx = point.x - self.position.x;
        let dy = point.y - self.position.y;
        let r = dx.hypot(dy);
        if r == 0.0 {
            return Err(Error::Geometry(format!(
                "point ({}, {}) coincides with AP position",
                point.x, point.y
            )));
        }
        let (s, c) = self.orientation.sin_cos();
        Ok((dy * c - dx * s) / r)
    }

    pub fn local_angle(&self, point: &Point) -> Result<f64> {
        if self.position == *point {
            return Err(Error::Geometry("direction point coincides with AP position".into()));
        }
        Ok(self.position.bearing_to(point) - self.orientation)
    }

    /// `[a]_u = exp(-j 2 pi d u sin(theta) / lambda0)` towards `point`.
    pub fn steering_vector(&self, point: &Point, f0: f64) -> Result<Vec<C64>> {
        let s = self.sin_angle(point)?;
        Ok(self.steering_from_sin(s, f0))
    }

    pub fn steering_at_angle(&self, theta: f64, f0: f64) -> Vec<C64> {
        self.steering_from_sin(theta.sin(), f0)
    }

    pub fn steering_from_sin(&self, sin_theta: f64, f0: f64) -> Vec<C64> {
        let phase = -2.0 * PI * self.spacing * sin_theta / wavelength(f0);
        (0..self.antennas)
            .map(|u| C64::from_polar(1.0, phase * u as f64))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserEquipment {
    pub position: Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionOfInterest {
    pub center: Point,
    /// Extent along x, meters.
    pub width: f64,
    /// Extent along y, meters.
    pub height: f64,
    /// Nominal pixel pitch, meters. The actual pitch is adjusted so an
    /// integer number of pixels tiles the rectangle exactly.
    pub pitch: f64,
}

impl RegionOfInterest {
    pub fn new(center: Point, width: f64, height: f64, pitch: f64) -> Result<Self> {
        if !(width > 0.0 && height > 0.0) {
            return Err(Error::Config(format!(
                "ROI size must be positive (got {width} x {height})"
            )));
        }
        if !(pitch > 0.0) {
            return Err(Error::Config(format!("pixel pitch must be positive (got {pitch})")));
        }
        Ok(Self {
            center,
            width,
            height,
            pitch,
        })
    }

    /// Pixel counts `(nx, ny)`.
    pub fn shape(&self) -> (usize, usize) {
        let n = |extent: f64| ((extent / self.pitch).round() as usize).max(1);
        (n(self.width), n(self.height))
    }

    pub fn len(&self) -> usize {
        let (nx, ny) = self.shape();
        nx * ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Effective pitch `(px, py)` after tiling.
    pub fn actual_pitch(&self) -> (f64, f64) {
        let (nx, ny) = self.shape();
        (self.width / nx as f64, self.height / ny as f64)
    }

    pub fn x_min(&self) -> f64 {
        self.center.x - self.width / 2.0
    }

    pub fn y_min(&self) -> f64 {
        self.center.y - self.height / 2.0
    }

    pub fn contains(&self, p: &Point) -> bool {
        (p.x - self.center.x).abs() <= self.width / 2.0 && (p.y - self.center.y).abs() <= self.height / 2.0
    }

    pub fn corners(&self) -> [Point; 4] {
        let (x0, y0) = (self.x_min(), self.y_min());
        let (x1, y1) = (x0 + self.width, y0 + self.height);
        [
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
        ]
    }

    /// Center of pixel `(ix, iy)`.
    pub fn pixel(&self, ix: usize, iy: usize) -> Point {
        let (px, py) = self.actual_pitch();
        Point::new(
            self.x_min() + (ix as f64 + 0.5) * px,
            self.y_min() + (iy as f64 + 0.5) * py,
        )
    }

    /// Pixel centers, row-major (x fastest).
    pub fn pixels(&self) -> Vec<Point> {
        let (nx, ny) = self.shape();
        let mut out = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                out.push(self.pixel(ix, iy));
            }
        }
        out
    }

    /// Row-major index of the pixel containing `p`, if inside.
    pub fn pixel_index(&self, p: &Point) -> Option<usize> {
        let (nx, ny) = self.shape();
        let (px, py) = self.actual_pitch();
        let fx = ((p.x - self.x_min()) / px).floor();
        let fy = ((p.y - self.y_min()) / py).floor();
        if fx < 0.0 || fy < 0.0 {
            return None;
        }
        let (ix, iy) = (fx as usize, fy as usize);
        (ix < nx && iy < ny).then_some(iy * nx + ix)
    }

    pub fn with_pitch(&self, pitch: f64) -> Self {
        Self { pitch, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub position: Point,
    /// Radar cross section, m^2.
    pub rcs: f64,
    /// Scattering phase shared by every AP pair, radians.
    pub phase: f64,
}

impl Target {
    /// Amplitude factor `sqrt(4 pi rcs) / lambda0` such that
    /// `|beta| = reflectivity * (lambda0 / 4 pi)^2 / (R_tx R_rx)`.
    pub fn reflectivity(&self, f0: f64) -> f64 {
        (4.0 * PI * self.rcs).sqrt() / wavelength(f0)
    }
}

/// Axis-aligned deployment area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Area {
    pub min: Point,
    pub max: Point,
}

impl Area {
    pub fn square(half_side: f64) -> Self {
        Self {
            min: Point::new(-half_side, -half_side),
            max: Point::new(half_side, half_side),
        }
    }

    pub fn center(&self) -> Point {
        Point::new((self.min.x + self.max.x) / 2.0, (self.min.y + self.max.y) / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub aps: Vec<AccessPoint>,
    pub ues: Vec<UserEquipment>,
    pub roi: RegionOfInterest,
    pub targets: Vec<Target>,
    pub area: Area,
    /// Carrier frequency, Hz.
    pub f0: f64,
    /// Noise power spectral density, dBm/Hz.
    pub noise_psd: f64,
    /// Per-subcarrier transmit power, W.
    pub power: f64,
    pub grid: GridConfig,
    pub eta: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.aps.is_empty() {
            return Err(Error::Config("scenario has no access points".into()));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::Config(format!("eta must lie in [0, 1] (got {})", self.eta)));
        }
        if self.aps.iter().any(|ap| ap.antennas == 0) {
            return Err(Error::Config("every AP needs at least one antenna".into()));
        }
        let total_antennas: usize = self.aps.iter().map(|ap| ap.antennas).sum();
        if self.ues.len() > total_antennas {
            return Err(Error::Config(format!(
                "Q = {} exceeds N L = {total_antennas}",
                self.ues.len()
            )));
        }
        if !(self.f0 > 0.0) || !(self.power >= 0.0) {
            return Err(Error::Config(
                "carrier frequency must be positive and power non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        wavelength(self.f0)
    }

    pub fn noise_variance(&self) -> f64 {
        self.grid.noise_variance(self.noise_psd)
    }

    pub fn with_targets(&self, targets: Vec<Target>) -> Self {
        Self {
            targets,
            ..self.clone()
        }
    }
}

/// `(||x - p_tx|| + ||p_rx - x||) / c`.
pub fn bistatic_delay(tx: &AccessPoint, rx: &AccessPoint, point: &Point) -> f64 {
    (point.distance(&tx.position) + rx.position.distance(point)) / SPEED_OF_LIGHT
}

/// Minimum and maximum bistatic delay over the ROI rectangle.
///
/// The range sum is convex in `x`, so the maximum sits on a corner. The
/// minimum is the inter-AP distance when the AP baseline crosses the
/// rectangle, otherwise it lies on an edge and is found by ternary search.
pub fn roi_delay_extrema(tx: &AccessPoint, other: &AccessPoint, roi: &RegionOfInterest) -> (f64, f64) {
    let (a, b) = (tx.position, other.position);
    let f = |p: &Point| p.distance(&a) + b.distance(p);
    let corners = roi.corners();
    let max = corners.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    let min = if segment_hits_rect(&a, &b, roi) {
        a.distance(&b)
    } else {
        (0..4)
            .map(|i| edge_minimum(&corners[i], &corners[(i + 1) % 4], &f))
            .fold(f64::INFINITY, f64::min)
    };
    (min / SPEED_OF_LIGHT, max / SPEED_OF_LIGHT)
}

fn edge_minimum(p0: &Point, p1: &Point, f: &impl Fn(&Point) -> f64) -> f64 {
    let at = |t: f64| Point::new(p0.x + t * (p1.x - p0.x), p0.y + t * (p1.y - p0.y));
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(&at(m1)) <= f(&at(m2)) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    f(&at(0.5 * (lo + hi))).min(f(p0)).min(f(p1))
}

fn segment_hits_rect(a: &Point, b: &Point, roi: &RegionOfInterest) -> bool {
    // Liang-Barsky clipping
    let (x0, y0) = (roi.x_min(), roi.y_min());
    let (x1, y1) = (x0 + roi.width, y0 + roi.height);
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    for (p, q) in [(-dx, a.x - x0), (dx, x1 - a.x), (-dy, a.y - y0), (dy, y1 - a.y)] {
        if p == 0.0 {
            if q < 0.0 {
                return false;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    t0 <= t1
}

pub fn roi_pixels(roi: &RegionOfInterest) -> Vec<Point> {
    roi.pixels()
}

/// `sqrt(n) x sqrt(n)` lattice spanning `area`, each ULA pointing at the area center.
pub fn lattice_aps(n: usize, antennas: usize, area: &Area, f0: f64) -> Result<Vec<AccessPoint>> {
    let side = (n as f64).sqrt().round() as usize;
    if side * side != n || n == 0 {
        return Err(Error::Config(format!(
            "lattice deployment needs a square AP count (got {n})"
        )));
    }
    let coord = |lo: f64, hi: f64, i: usize| {
        if side == 1 {
            (lo + hi) / 2.0
        } else {
            lo + (hi - lo) * i as f64 / (side - 1) as f64
        }
    };
    let center = area.center();
    let mut aps = Vec::with_capacity(n);
    for iy in 0..side {
        for ix in 0..side {
            let p = Point::new(coord(area.min.x, area.max.x, ix), coord(area.min.y, area.max.y, iy));
            // an AP at the exact center has no preferred direction; face +x
            let psi = if p == center { 0.0 } else { p.bearing_to(&center) };
            aps.push(AccessPoint::new(p, psi, antennas, f0));
        }
    }
    Ok(aps)
}
