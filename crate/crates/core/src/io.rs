//! Binary model (`.rrfg`) and spectrum (`.rrfs`) files plus PNG export.
//!
//! All numbers are little-endian. A model file holds the magic `RRFG`, a
//! version, the primitive count, SH degree and channel count as `u32`, the
//! scene metadata as six `f64` (tau_max, g_ref, carrier frequency, Tx x, y,
//! z), then one `f32` record per primitive: position (3), log-scale (3),
//! rotation quaternion w, x, y, z (4), opacity logit (1) and the SH
//! coefficients channel-major. A spectrum file holds the magic `RRFS`, a
//! version, H, W, C and the projection tag as `u32`, the pose as seven `f32`
//! (position, then quaternion w, x, y, z), then C row-major planes of `f32`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{GaussianPrimitive, RrfModel, SceneMeta};
use crate::sh::{num_coeffs, MAX_DEGREE};
use crate::spectrum::{Projection, RadioSpatialSpectrum};
use crate::{RxPose, NUM_CHANNELS};

const MODEL_MAGIC: &[u8; 4] = b"RRFG";
const SPECTRUM_MAGIC: &[u8; 4] = b"RRFS";
const VERSION: u32 = 1;

struct Reader<R: Read> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.inner
            .read_exact(&mut b)
            .map_err(|_| Error::Format("unexpected end of file".into()))?;
        Ok(b)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.bytes()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    fn header(&mut self, magic: &[u8; 4]) -> Result<()> {
        let m: [u8; 4] = self.bytes()?;
        if &m != magic {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&m),
                String::from_utf8_lossy(magic)
            )));
        }
        let v = self.u32()?;
        if v != VERSION {
            return Err(Error::Format(format!("unsupported version {v}")));
        }
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        let mut rest = [0u8; 1];
        match self.inner.read(&mut rest) {
            Ok(0) => Ok(()),
            _ => Err(Error::Format("trailing bytes after payload".into())),
        }
    }
}

/// Serializes a model to `.rrfg` bytes. Values are stored as `f32`.
pub fn model_to_bytes(model: &RrfModel) -> Result<Vec<u8>> {
    model.validate()?;
    let k = model.coeffs_per_channel();
    let mut out = Vec::with_capacity(56 + model.len() * 4 * (11 + NUM_CHANNELS * k));
    out.extend_from_slice(MODEL_MAGIC);
    for v in [VERSION, model.len() as u32, model.sh_degree as u32, NUM_CHANNELS as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let m = &model.meta;
    for v in [m.tau_max, m.g_ref, m.carrier_freq, m.tx_position[0], m.tx_position[1], m.tx_position[2]] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let mut params = vec![0.0; model.params_per_primitive()];
    for g in &model.gaussians {
        g.write_params(&mut params);
        for v in &params {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<RrfModel> {
    let mut r = Reader { inner: bytes };
    r.header(MODEL_MAGIC)?;
    let n = r.u32()? as usize;
    let degree = r.u32()? as usize;
    let channels = r.u32()? as usize;
    if degree > MAX_DEGREE {
        return Err(Error::Format(format!("SH degree {degree} > {MAX_DEGREE}")));
    }
    if channels != NUM_CHANNELS {
        return Err(Error::Format(format!("{channels} channels, expected {NUM_CHANNELS}")));
    }
    let mut f = [0.0; 6];
    for v in f.iter_mut() {
        *v = r.f64()?;
    }
    let meta = SceneMeta {
        tau_max: f[0],
        g_ref: f[1],
        carrier_freq: f[2],
        tx_position: [f[3], f[4], f[5]],
    };
    let k = num_coeffs(degree);
    let pp = 11 + channels * k;
    let expected = 4 + 16 + 48 + n * pp * 4;
    if bytes.len() != expected {
        return Err(Error::Format(format!("file has {} bytes, header implies {expected}", bytes.len())));
    }
    let mut model = RrfModel::empty(degree, meta);
    let mut params = vec![0.0; pp];
    for _ in 0..n {
        for v in params.iter_mut() {
            *v = r.f32()? as f64;
        }
        let mut g = GaussianPrimitive {
            position: [0.0; 3],
            log_scale: [0.0; 3],
            rotation: [1.0, 0.0, 0.0, 0.0],
            opacity_logit: 0.0,
            sh: vec![0.0; channels * k],
        };
        g.read_params(&params);
        model.gaussians.push(g);
    }
    r.finish()?;
    Ok(model)
}

pub fn write_model(path: &Path, model: &RrfModel) -> Result<()> {
    let bytes = model_to_bytes(model)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_model(path: &Path) -> Result<RrfModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    model_from_bytes(&bytes)
}

pub fn spectrum_to_bytes(s: &RadioSpatialSpectrum) -> Result<Vec<u8>> {
    if s.data.len() != s.height * s.width * s.channels {
        return Err(Error::ShapeMismatch("spectrum data length".into()));
    }
    let mut out = Vec::with_capacity(52 + 4 * s.data.len());
    out.extend_from_slice(SPECTRUM_MAGIC);
    for v in [VERSION, s.height as u32, s.width as u32, s.channels as u32, s.projection.tag()] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in s.pose.to_f32_array() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in &s.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn spectrum_from_bytes(bytes: &[u8]) -> Result<RadioSpatialSpectrum> {
    let mut r = Reader { inner: bytes };
    r.header(SPECTRUM_MAGIC)?;
    let h = r.u32()? as usize;
    let w = r.u32()? as usize;
    let c = r.u32()? as usize;
    let projection = Projection::from_tag(r.u32()?)?;
    let mut pose = [0f32; 7];
    for v in pose.iter_mut() {
        *v = r.f32()?;
    }
    let expected = 52 + 4 * h * w * c;
    if bytes.len() != expected {
        return Err(Error::Format(format!("file has {} bytes, header implies {expected}", bytes.len())));
    }
    let mut data = Vec::with_capacity(h * w * c);
    for _ in 0..h * w * c {
        data.push(r.f32()?);
    }
    r.finish()?;
    Ok(RadioSpatialSpectrum {
        height: h,
        width: w,
        channels: c,
        data,
        pose: RxPose::from_f32_array(pose),
        projection,
    })
}

pub fn write_spectrum(path: &Path, s: &RadioSpatialSpectrum) -> Result<()> {
    let bytes = spectrum_to_bytes(s)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_spectrum(path: &Path) -> Result<RadioSpatialSpectrum> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    spectrum_from_bytes(&bytes)
}

/// Value range mapped onto 0..=255 when exporting `channel` as PNG: visual
/// and ToF use [0, 1], gain uses [0, max gain of the spectrum].
pub fn png_range(s: &RadioSpatialSpectrum, channel: usize) -> (f32, f32) {
    if channel == crate::CH_GAIN {
        let hi = s.plane(channel).iter().copied().fold(0.0f32, f32::max);
        (0.0, if hi > 0.0 { hi } else { 1.0 })
    } else {
        (0.0, 1.0)
    }
}

/// Writes one channel as an 8-bit grayscale PNG with
/// `byte = round(255 * (v - lo) / (hi - lo))`, clamped.
pub fn write_png(path: &Path, s: &RadioSpatialSpectrum, channel: usize) -> Result<()> {
    if channel >= s.channels {
        return Err(Error::InvalidArgument(format!("channel {channel} out of range")));
    }
    let (lo, hi) = png_range(s, channel);
    let pixels: Vec<u8> = s
        .plane(channel)
        .iter()
        .map(|v| (255.0 * (v - lo) / (hi - lo)).round().clamp(0.0, 255.0) as u8)
        .collect();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), s.width as u32, s.height as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header().map_err(|e| Error::Format(e.to_string()))?;
    writer.write_image_data(&pixels).map_err(|e| Error::Format(e.to_string()))?;
    writer.finish().map_err(|e| Error::Format(e.to_string()))?;
    Ok(())
}

/// Reads an 8-bit grayscale PNG back as raw bytes, row-major.
pub fn read_png_gray(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let dec = png::Decoder::new(BufReader::new(file));
    let mut reader = dec.read_info().map_err(|e| Error::Format(e.to_string()))?;
    let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
    let info = reader.next_frame(&mut buf).map_err(|e| Error::Format(e.to_string()))?;
    buf.truncate(info.buffer_size());
    Ok((info.height as usize, info.width as usize, buf))
}

/// Writes JSON with a trailing newline.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    f.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Vec3;

    fn model() -> RrfModel {
        let meta = SceneMeta {
            tau_max: 5.3e-8,
            g_ref: 0.00995,
            carrier_freq: 2.4e9,
            tx_position: [1.4, 1.1, 1.9],
        };
        let mut m = RrfModel::empty(2, meta);
        for i in 0..4 {
            let mut g = m.primitive(Vec3::new(i as f64 * 0.1, 0.3, 1.0 / 3.0), [-1.1, -2.0, -0.7], [0.8, 0.1, -0.3, 0.2], 0.4, [0.5, 0.2, 0.1]);
            g.sh[4] = 0.123;
            m.gaussians.push(g);
        }
        m.snap_to_f32();
        m
    }

    #[test]
    fn model_round_trip_bit_exact() {
        let m = model();
        let back = model_from_bytes(&model_to_bytes(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn truncated_model_rejected() {
        let bytes = model_to_bytes(&model()).unwrap();
        assert!(model_from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(model_from_bytes(&bad).is_err());
        let mut long = bytes;
        long.push(0);
        assert!(model_from_bytes(&long).is_err());
    }

    #[test]
    fn spectrum_round_trip_bit_exact() {
        let pose = RxPose::from_yaw(Vec3::new(1.0, 2.0, 0.5), 0.7);
        let mut s = RadioSpatialSpectrum::zeros(4, 8, pose, Projection::pinhole(1.2, Some(3)));
        for (i, v) in s.data.iter_mut().enumerate() {
            *v = i as f32 / 7.0;
        }
        let back = spectrum_from_bytes(&spectrum_to_bytes(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn png_mapping() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = RadioSpatialSpectrum::zeros(2, 4, RxPose::identity_at(Vec3::zeros()), Projection::Equirect);
        let n = 8;
        s.data[n] = 0.5;
        s.data[n + 1] = 2.0;
        let path = dir.path().join("gain.png");
        write_png(&path, &s, crate::CH_GAIN).unwrap();
        let (h, w, px) = read_png_gray(&path).unwrap();
        assert_eq!((h, w), (2, 4));
        assert_eq!(&px[..3], &[64, 255, 0]);
    }
}
