//! Back-projection imaging over the ROI pixel grid and multistatic fusion.

use std::f64::consts::PI;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridConfig, C64};
use crate::receive::ExtractedCir;
use crate::scenario::{bistatic_delay, AccessPoint, RegionOfInterest};

/// CIR lookup at the pixel's bistatic delay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    /// Rounded delay bin (half away from zero), as in the waveform design.
    #[default]
    Nearest,
    Linear,
}

/// Complex image over the ROI, `ny x nx` (row `iy`, column `ix`).
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub roi: RegionOfInterest,
    pub pixels: Array2<C64>,
    /// `(tx, rx)` pairs summed into this image, in summation order.
    pub pairs: Vec<(usize, usize)>,
    /// Pixels whose delay bin fell outside `[0, M-1]`.
    pub out_of_support: usize,
}

impl Image {
    pub fn zeros(roi: &RegionOfInterest) -> Self {
        let (nx, ny) = roi.shape();
        Self {
            roi: *roi,
            pixels: Array2::zeros((ny, nx)),
            pairs: Vec::new(),
            out_of_support: 0,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        let (ny, nx) = self.pixels.dim();
        (nx, ny)
    }

    pub fn intensity(&self) -> Array2<f64> {
        self.pixels.mapv(|v| v.norm_sqr())
    }

    /// `(ix, iy)` of the largest magnitude (first one on ties).
    pub fn peak(&self) -> (usize, usize) {
        let mut best = (0, 0);
        let mut val = -1.0;
        for ((iy, ix), v) in self.pixels.indexed_iter() {
            let p = v.norm_sqr();
            if p > val {
                val = p;
                best = (ix, iy);
            }
        }
        best
    }

    /// Up to `count` strongest local maxima (8-neighbourhood), strongest first,
    /// with peaks closer than `exclusion` meters to a stronger one suppressed.
    pub fn local_maxima(&self, count: usize, exclusion: f64) -> Vec<(usize, usize)> {
        let p = self.intensity();
        let (ny, nx) = p.dim();
        let mut cand = Vec::new();
        for iy in 0..ny {
            for ix in 0..nx {
                let v = p[[iy, ix]];
                if v <= 0.0 {
                    continue;
                }
                let mut is_max = true;
                'n: for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let (jx, jy) = (ix as i64 + dx, iy as i64 + dy);
                        if (dx, dy) == (0, 0) || jx < 0 || jy < 0 || jx >= nx as i64 || jy >= ny as i64 {
                            continue;
                        }
                        if p[[jy as usize, jx as usize]] > v {
                            is_max = false;
                            break 'n;
                        }
                    }
                }
                if is_max {
                    cand.push((v, ix, iy));
                }
            }
        }
        cand.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut out: Vec<(usize, usize)> = Vec::new();
        for (_, ix, iy) in cand {
            if out.len() == count {
                break;
            }
            let x = self.roi.pixel(ix, iy);
            if out.iter().all(|&(a, b)| self.roi.pixel(a, b).distance(&x) >= exclusion) {
                out.push((ix, iy));
            }
        }
        out
    }

    pub fn scale(&mut self, c: C64) {
        self.pixels.mapv_inplace(|v| v * c);
    }

    pub fn header(&self) -> ImageHeader {
        let (nx, ny) = self.shape();
        let (px, py) = self.roi.actual_pitch();
        ImageHeader {
            x_min: self.roi.x_min(),
            y_min: self.roi.y_min(),
            width: self.roi.width,
            height: self.roi.height,
            nx,
            ny,
            pitch_x: px,
            pitch_y: py,
            pairs: self.pairs.clone(),
            out_of_support: self.out_of_support,
        }
    }

    /// JSON header line, then one `re im` line per pixel, row-major (x fastest).
    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        serde_json::to_writer(&mut w, &self.header())?;
        writeln!(w)?;
        for v in self.pixels.iter() {
            writeln!(w, "{:e} {:e}", v.re, v.im)?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        self.write(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let parse = |message: String| Error::Parse {
            path: path.to_path_buf(),
            message,
        };
        let mut lines = BufReader::new(f).lines();
        let head = lines
            .next()
            .ok_or_else(|| parse("empty file".into()))?
            .map_err(|e| Error::io(path, e))?;
        let h: ImageHeader = serde_json::from_str(&head).map_err(|e| parse(format!("header: {e}")))?;
        let roi = RegionOfInterest::new(
            crate::scenario::Point::new(h.x_min + h.width / 2.0, h.y_min + h.height / 2.0),
            h.width,
            h.height,
            h.pitch_x,
        )?;
        let mut data = Vec::with_capacity(h.nx * h.ny);
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let mut it = line.split_whitespace().map(str::parse::<f64>);
            match (it.next(), it.next()) {
                (Some(Ok(re)), Some(Ok(im))) => data.push(C64::new(re, im)),
                _ => return Err(parse(format!("bad pixel on line {}", i + 2))),
            }
        }
        let pixels = Array2::from_shape_vec((h.ny, h.nx), data).map_err(|e| parse(e.to_string()))?;
        Ok(Self {
            roi,
            pixels,
            pairs: h.pairs,
            out_of_support: h.out_of_support,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageHeader {
    pub x_min: f64,
    pub y_min: f64,
    pub width: f64,
    pub height: f64,
    pub nx: usize,
    pub ny: usize,
    pub pitch_x: f64,
    pub pitch_y: f64,
    pub pairs: Vec<(usize, usize)>,
    pub out_of_support: usize,
}

/// `I_nr(x) = a_r^H(x) h~_nr[round(tau_nr(x)/dtau), p=0] e^{+j 2 pi f0 tau_nr(x)}`.
///
/// `zero_doppler` is the `M x L` zero-Doppler slice of the extracted CIR.
pub fn backproject(
    zero_doppler: ArrayView2<C64>,
    tx: &AccessPoint,
    rx: &AccessPoint,
    roi: &RegionOfInterest,
    grid: &GridConfig,
    f0: f64,
    interp: Interpolation,
) -> Result<Image> {
    let (m, l) = zero_doppler.dim();
    if m != grid.subcarriers || l != rx.antennas {
        return Err(Error::dims(
            format!("{} x {}", grid.subcarriers, rx.antennas),
            format!("{m} x {l}"),
        ));
    }
    let (nx, ny) = roi.shape();
    let rows: Vec<(Vec<C64>, usize)> = (0..ny)
        .into_par_iter()
        .map(|iy| {
            let mut out = vec![C64::default(); nx];
            let mut missing = 0;
            for (ix, o) in out.iter_mut().enumerate() {
                let x = roi.pixel(ix, iy);
                let Ok(sin) = rx.sin_angle(&x) else {
                    continue;
                };
                let tau = bistatic_delay(tx, rx, &x);
                let h = match lookup(zero_doppler, tau / grid.delay_resolution, interp) {
                    Some(h) => h,
                    None => {
                        missing += 1;
                        continue;
                    }
                };
                let a = rx.steering_from_sin(sin, f0);
                let v: C64 = a.iter().zip(&h).map(|(a, h)| a.conj() * h).sum();
                *o = v * C64::from_polar(1.0, 2.0 * PI * (f0 * tau).rem_euclid(1.0));
            }
            (out, missing)
        })
        .collect();
    let mut pixels = Array2::zeros((ny, nx));
    let mut out_of_support = 0;
    for (iy, (row, missing)) in rows.into_iter().enumerate() {
        for (ix, v) in row.into_iter().enumerate() {
            pixels[(iy, ix)] = v;
        }
        out_of_support += missing;
    }
    if out_of_support > 0 {
        log::warn!("{out_of_support} pixel(s) map outside the delay grid and were set to zero");
    }
    Ok(Image {
        roi: *roi,
        pixels,
        pairs: Vec::new(),
        out_of_support,
    })
}

fn lookup(h: ArrayView2<C64>, bin: f64, interp: Interpolation) -> Option<Vec<C64>> {
    let m = h.nrows() as f64;
    match interp {
        Interpolation::Nearest => {
            let l = bin.round();
            (l >= 0.0 && l < m).then(|| h.row(l as usize).to_vec())
        }
        Interpolation::Linear => {
            let l0 = bin.floor();
            if l0 < 0.0 || l0 + 1.0 >= m {
                return lookup(h, bin, Interpolation::Nearest);
            }
            let w = bin - l0;
            let (a, b) = (h.row(l0 as usize), h.row(l0 as usize + 1));
            Some(a.iter().zip(b.iter()).map(|(a, b)| a * (1.0 - w) + b * w).collect())
        }
    }
}

/// Back-projection of one extracted CIR (zero-Doppler slice of its total).
pub fn backproject_pair(
    cir: &ExtractedCir,
    tx: &AccessPoint,
    rx: &AccessPoint,
    roi: &RegionOfInterest,
    grid: &GridConfig,
    f0: f64,
    interp: Interpolation,
) -> Result<Image> {
    let h = cir.zero_doppler();
    let mut img = backproject(h.view(), tx, rx, roi, grid, f0, interp)?;
    img.pairs.push((cir.tx, cir.rx));
    Ok(img)
}

/// `I(x) = sum_nr I_nr(x)`, summed sequentially in the given order.
pub fn fuse(images: &[Image]) -> Result<Image> {
    let first = images
        .first()
        .ok_or_else(|| Error::Config("cannot fuse an empty image list".into()))?;
    let mut out = Image::zeros(&first.roi);
    for img in images {
        if img.pixels.dim() != out.pixels.dim() || img.roi != out.roi {
            return Err(Error::dims(
                format!("{:?} pixel grid", out.shape()),
                format!("{:?}", img.shape()),
            ));
        }
        out.pixels += &img.pixels;
        out.pairs.extend_from_slice(&img.pairs);
        out.out_of_support += img.out_of_support;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridFft;
    use crate::scenario::{Point, SPEED_OF_LIGHT};
    use ndarray::Array2;

    const F0: f64 = 10e9;

    fn roi() -> RegionOfInterest {
        RegionOfInterest::new(Point::new(0.0, 0.0), 2.0, 2.0, 0.05).unwrap()
    }

    fn aps() -> (AccessPoint, AccessPoint) {
        (
            AccessPoint::new(Point::new(-8.0, -6.0), 0.6, 4, F0),
            AccessPoint::new(Point::new(7.0, -7.0), 2.4, 4, F0),
        )
    }

    /// Noiseless zero-Doppler CIR of a point target: `beta a_r M sinc-kernel`.
    fn synthetic_cir(tx: &AccessPoint, rx: &AccessPoint, target: &Point, beta: C64, grid: &GridConfig) -> Array2<C64> {
        let m = grid.subcarriers;
        let tau = bistatic_delay(tx, rx, target);
        let ramp = crate::channel::delay_ramp(grid, F0, tau);
        let mut col = Array2::from_shape_fn((m, 1), |(r, _)| ramp[r]);
        let fft = GridFft::new(m, 1);
        fft.transform(
            &mut col,
            crate::grid::Direction::Inverse,
            crate::grid::Direction::Forward,
        );
        let a = rx.steering_vector(target, F0).unwrap();
        Array2::from_shape_fn((m, rx.antennas), |(l, u)| beta * col[(l, 0)] * a[u])
    }

    #[test]
    fn zero_cir_gives_zero_image() {
        let grid = GridConfig::new(256, 1, 1e9, 0.0).unwrap();
        let (tx, rx) = aps();
        let h = Array2::zeros((256, 4));
        let img = backproject(h.view(), &tx, &rx, &roi(), &grid, F0, Interpolation::Nearest).unwrap();
        assert!(img.pixels.iter().all(|v| *v == C64::default()));
        assert_eq!(img.out_of_support, 0);
    }

    #[test]
    fn peak_at_target_pixel() {
        let grid = GridConfig::new(256, 1, 1e9, 0.0).unwrap();
        let (tx, rx) = aps();
        let r = roi();
        let target = r.pixel(23, 11);
        let h = synthetic_cir(&tx, &rx, &target, C64::new(1.0, 0.0), &grid);
        let img = backproject(h.view(), &tx, &rx, &r, &grid, F0, Interpolation::Nearest).unwrap();
        // exhaustive pixel scan
        let mut best = (0, 0, 0.0);
        for iy in 0..r.shape().1 {
            for ix in 0..r.shape().0 {
                let v = img.pixels[(iy, ix)].norm();
                if v > best.2 {
                    best = (ix, iy, v);
                }
            }
        }
        let d = (best.0 as i64 - 23).abs().max((best.1 as i64 - 11).abs());
        assert!(d <= 1, "{best:?}");
    }

    #[test]
    fn on_grid_target_phase_is_compensated() {
        let grid = GridConfig::new(128, 1, 1e9, 0.0).unwrap();
        let (tx, rx) = aps();
        let r = roi();
        // move the target along the bistatic gradient until its delay is on the grid
        let mut target = r.pixel(20, 20);
        for _ in 0..50 {
            let tau = bistatic_delay(&tx, &rx, &target);
            let err = (tau / grid.delay_resolution).round() * grid.delay_resolution - tau;
            let g = {
                let ut = Point::new(target.x - tx.position.x, target.y - tx.position.y);
                let ur = Point::new(target.x - rx.position.x, target.y - rx.position.y);
                let nt = ut.x.hypot(ut.y);
                let nr = ur.x.hypot(ur.y);
                (ut.x / nt + ur.x / nr, ut.y / nt + ur.y / nr)
            };
            let gn = g.0 * g.0 + g.1 * g.1;
            let step = err * SPEED_OF_LIGHT / gn;
            target = Point::new(target.x + step * g.0, target.y + step * g.1);
        }
        let beta = C64::from_polar(1.0, 0.9);
        let h = synthetic_cir(&tx, &rx, &target, beta, &grid);
        let roi_t = RegionOfInterest::new(target, 0.05, 0.05, 0.05).unwrap();
        let img = backproject(h.view(), &tx, &rx, &roi_t, &grid, F0, Interpolation::Nearest).unwrap();
        let v = img.pixels[(0, 0)];
        // M * L * beta
        let want = beta * 128.0 * 4.0;
        assert!((v - want).norm() < 1e-6 * want.norm(), "{v} vs {want}");
    }

    #[test]
    fn out_of_support_pixels_are_zeroed_and_counted() {
        let grid = GridConfig::new(16, 1, 1e9, 0.0).unwrap();
        let (tx, rx) = aps();
        let h = Array2::from_elem((16, 4), C64::new(1.0, 0.0));
        let img = backproject(h.view(), &tx, &rx, &roi(), &grid, F0, Interpolation::Nearest).unwrap();
        // every bistatic delay here exceeds 16 ns
        assert_eq!(img.out_of_support, roi().len());
        assert!(img.pixels.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn backprojection_is_linear() {
        let grid = GridConfig::new(128, 1, 1e9, 0.0).unwrap();
        let (tx, rx) = aps();
        let r = roi().with_pitch(0.2);
        let a = synthetic_cir(&tx, &rx, &Point::new(0.3, 0.1), C64::new(1.0, 0.0), &grid);
        let b = synthetic_cir(&tx, &rx, &Point::new(-0.4, 0.6), C64::new(0.0, 2.0), &grid);
        let c = C64::new(0.3, -1.1);
        let sum = &a + &(&b * c);
        for interp in [Interpolation::Nearest, Interpolation::Linear] {
            let ia = backproject(a.view(), &tx, &rx, &r, &grid, F0, interp).unwrap();
            let ib = backproject(b.view(), &tx, &rx, &r, &grid, F0, interp).unwrap();
            let is = backproject(sum.view(), &tx, &rx, &r, &grid, F0, interp).unwrap();
            for ((x, y), z) in ia.pixels.iter().zip(&ib.pixels).zip(&is.pixels) {
                assert!((x + y * c - z).norm() < 1e-9 * (1.0 + z.norm()));
            }
        }
    }

    #[test]
    fn fuse_rules() {
        let r = roi().with_pitch(0.5);
        let mut a = Image::zeros(&r);
        a.pixels.mapv_inplace(|_| C64::new(1.0, 0.5));
        a.pairs = vec![(0, 1)];
        let mut b = Image::zeros(&r);
        b.pixels[(1, 2)] = C64::new(-3.0, 0.25);
        b.pairs = vec![(2, 1)];
        assert_eq!(fuse(std::slice::from_ref(&a)).unwrap().pixels, a.pixels);
        let f = fuse(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(f.pixels[(1, 2)], C64::new(-2.0, 0.75));
        assert_eq!(f.pairs, vec![(0, 1), (2, 1)]);
        assert_eq!(f.pixels, fuse(&[a.clone(), b.clone()]).unwrap().pixels);
        let c = Image::zeros(&roi().with_pitch(0.25));
        assert!(matches!(fuse(&[a, c]), Err(Error::Dimension { .. })));
        assert!(fuse(&[]).is_err());
    }

    #[test]
    fn dump_round_trip() {
        let r = roi().with_pitch(0.4);
        let mut img = Image::zeros(&r);
        for (i, v) in img.pixels.iter_mut().enumerate() {
            *v = C64::new(i as f64 * 0.1, -(i as f64).sqrt());
        }
        img.pairs = vec![(0, 3), (1, 3)];
        img.out_of_support = 2;
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("img.txt");
        img.save(&p).unwrap();
        let back = Image::load(&p).unwrap();
        assert_eq!(back.pixels, img.pixels);
        assert_eq!(back.pairs, img.pairs);
        assert_eq!(back.shape(), img.shape());
        assert_eq!(back.out_of_support, 2);
    }
}
