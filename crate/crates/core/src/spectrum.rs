//! Spectrum containers and the equirectangular pixel mapping.

use std::f64::consts::PI;

use crate::pose::{angles_to_direction, direction_to_angles};
use crate::{Error, Result, RxPose, Vec3, NUM_CHANNELS};

/// How a spectrum's pixels map to directions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Projection {
    /// Full-sphere equirectangular panorama, `W = 2H`.
    Equirect,
    /// Equirectangular panorama rendered at a RIS pose with the transmitter
    /// as source (incident side only).
    RisIncident,
    /// Square pinhole view. The field of view is kept in hundredths of a
    /// degree so it survives the on-disk tag; `face` is a cube face index
    /// (0..6) or [`Projection::FREE_CAMERA`].
    Pinhole { fov_centideg: u16, face: u8 },
}

impl Projection {
    pub const FREE_CAMERA: u8 = 255;

    pub fn pinhole(fov: f64, face: Option<u8>) -> Self {
        let centideg = (fov.to_degrees() * 100.0).round().clamp(1.0, 17_999.0) as u16;
        Projection::Pinhole {
            fov_centideg: centideg,
            face: face.unwrap_or(Self::FREE_CAMERA),
        }
    }

    pub fn is_equirect(&self) -> bool {
        matches!(self, Projection::Equirect | Projection::RisIncident)
    }

    /// Field of view in radians for pinhole projections.
    pub fn fov(&self) -> Option<f64> {
        match self {
            Projection::Pinhole { fov_centideg, .. } => Some((*fov_centideg as f64 / 100.0).to_radians()),
            _ => None,
        }
    }

    /// Header tag: bits 0..8 kind, 8..16 face, 16..32 fov in centidegrees.
    pub fn tag(&self) -> u32 {
        match *self {
            Projection::Equirect => 0,
            Projection::Pinhole { fov_centideg, face } => {
                1 | (face as u32) << 8 | (fov_centideg as u32) << 16
            }
            Projection::RisIncident => 2,
        }
    }

    pub fn from_tag(tag: u32) -> Result<Self> {
        match tag & 0xff {
            0 => Ok(Projection::Equirect),
            1 => Ok(Projection::Pinhole {
                face: ((tag >> 8) & 0xff) as u8,
                fov_centideg: (tag >> 16) as u16,
            }),
            2 => Ok(Projection::RisIncident),
            k => Err(Error::Format(format!("unknown projection kind {k}"))),
        }
    }
}

/// Dense multi-channel image in double precision, planar channel-major.
///
/// This is the working representation for rendering, losses and gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelImage {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl ChannelImage {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.height * self.width;
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, c: usize, row: usize, col: usize) -> f64 {
        self.data[(c * self.height + row) * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, c: usize, row: usize, col: usize, v: f64) {
        self.data[(c * self.height + row) * self.width + col] = v;
    }

    pub fn same_shape(&self, other: &ChannelImage) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }

    /// Box-filter downsampling by an integer factor (partial blocks averaged).
    pub fn downsample(&self, factor: usize) -> ChannelImage {
        if factor <= 1 {
            return self.clone();
        }
        let h = self.height.div_ceil(factor);
        let w = self.width.div_ceil(factor);
        let mut out = ChannelImage::zeros(h, w, self.channels);
        for c in 0..self.channels {
            for r in 0..h {
                for q in 0..w {
                    let (mut sum, mut n) = (0.0, 0);
                    for rr in r * factor..((r + 1) * factor).min(self.height) {
                        for qq in q * factor..((q + 1) * factor).min(self.width) {
                            sum += self.get(c, rr, qq);
                            n += 1;
                        }
                    }
                    out.set(c, r, q, sum / n as f64);
                }
            }
        }
        out
    }
}

/// Radio spatial spectrum: per-direction channel values at a receiver pose.
///
/// Values are single precision, matching the `.rrfs` file layout.
#[derive(Clone, Debug, PartialEq)]
pub struct RadioSpatialSpectrum {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    /// `channels` planes of `height * width`, row-major.
    pub data: Vec<f32>,
    pub pose: RxPose,
    pub projection: Projection,
}

impl RadioSpatialSpectrum {
    pub fn zeros(height: usize, width: usize, pose: RxPose, projection: Projection) -> Self {
        Self {
            height,
            width,
            channels: NUM_CHANNELS,
            data: vec![0.0; height * width * NUM_CHANNELS],
            pose: pose.snapped(),
            projection,
        }
    }

    pub fn from_image(image: &ChannelImage, pose: RxPose, projection: Projection) -> Self {
        Self {
            height: image.height,
            width: image.width,
            channels: image.channels,
            data: image.data.iter().map(|&v| v as f32).collect(),
            pose: pose.snapped(),
            projection,
        }
    }

    pub fn to_image(&self) -> ChannelImage {
        ChannelImage {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data.iter().map(|&v| v as f64).collect(),
        }
    }

    #[inline]
    pub fn get(&self, c: usize, row: usize, col: usize) -> f32 {
        self.data[(c * self.height + row) * self.width + col]
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    /// Angular size of one pixel in radians (equirectangular rows).
    pub fn pixel_pitch(&self) -> f64 {
        PI / self.height as f64
    }
}

/// Row and column of the equirectangular bin containing a local direction.
///
/// Azimuth `[-pi, pi)` maps left to right starting at column 0; elevation
/// `+pi/2` is row 0. Azimuth 0 / elevation 0 lands on `(H/2, W/2)`.
pub fn equirect_pixel(dir_local: &Vec3, height: usize, width: usize) -> (usize, usize) {
    let (az, el) = direction_to_angles(dir_local);
    let d_el = PI / height as f64;
    let d_az = 2.0 * PI / width as f64;
    let row = (((0.5 * PI - el) / d_el).floor().max(0.0) as usize).min(height - 1);
    let col = ((az + PI) / d_az).floor().max(0.0) as usize % width;
    (row, col)
}

/// Local-frame unit direction through the centre of an equirectangular pixel.
pub fn equirect_direction(row: f64, col: f64, height: usize, width: usize) -> Vec3 {
    let d_el = PI / height as f64;
    let d_az = 2.0 * PI / width as f64;
    let el = 0.5 * PI - (row + 0.5) * d_el;
    let az = -PI + (col + 0.5) * d_az;
    angles_to_direction(az, el)
}
