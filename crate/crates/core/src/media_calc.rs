//! Bandwidth and latency arithmetic for XR displays.
//!
//! Everything here is a pure function of its inputs. Bitrates are carried as
//! `f64` bits per second; with integral inputs every intermediate product in
//! the realistic range stays below 2^53, so the results are exact integers.

use std::fmt;

use crate::error::{Error, Result};

/// Colour channels per pixel (R, G, B).
pub const RGB_CHANNELS: u32 = 3;

/// Ideal motion-to-photon delay set by the vestibulo-ocular reflex.
pub const VOR_TARGET_MS: f64 = 7.0;

/// Typical headset/controller sensing time (400 us).
pub const TYPICAL_SENSING_MS: f64 = 0.4;

/// Pixels per degree the human eye can distinguish.
pub const PPD_HUMAN_ACUITY: f64 = 60.0;
/// PPD commonly used for 360-degree panoramic VR.
pub const PPD_PANORAMIC: f64 = 64.0;
/// Legacy PPD values.
pub const PPD_LEGACY: [f64; 3] = [11.0, 21.0, 32.0];

/// Typical XR refresh rates.
pub const FPS_XR: [f64; 2] = [90.0, 120.0];
/// Legacy refresh rates.
pub const FPS_LEGACY: [f64; 2] = [30.0, 60.0];
/// Motion resolution ceiling of human vision.
pub const FPS_MOTION_LIMIT: f64 = 150.0;

/// Panoramic field of view, width x height in degrees.
pub const FOV_PANORAMIC: (f64, f64) = (360.0, 180.0);
/// Partial field of view, width x height in degrees.
pub const FOV_PARTIAL: (f64, f64) = (120.0, 120.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Codec {
    None,
    H264,
    H265,
    H266,
}

impl Codec {
    pub const ALL: [Codec; 4] = [Codec::None, Codec::H264, Codec::H265, Codec::H266];

    /// Fixed compression ratio (raw : compressed).
    pub fn ratio(self) -> CodecRatio {
        let ratio = match self {
            Codec::None => 1,
            Codec::H264 => 102,
            Codec::H265 => 215,
            Codec::H266 => 350,
        };
        CodecRatio { codec: self, ratio }
    }

    pub fn name(self) -> &'static str {
        match self {
            Codec::None => "none",
            Codec::H264 => "h264",
            Codec::H265 => "h265",
            Codec::H266 => "h266",
        }
    }
}

impl std::str::FromStr for Codec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('.', "").as_str() {
            "none" | "raw" => Ok(Codec::None),
            "h264" | "avc" => Ok(Codec::H264),
            "h265" | "hevc" => Ok(Codec::H265),
            "h266" | "vvc" => Ok(Codec::H266),
            other => Err(Error::domain(
                "codec",
                format!("unknown codec '{other}' (expected none, h264, h265 or h266)"),
            )),
        }
    }
}

impl fmt::Display for Codec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CodecRatio {
    pub codec: Codec,
    pub ratio: u32,
}

/// How the per-eye pixel grid is defined.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PixelGrid {
    /// Field of view in degrees times angular resolution.
    Angular {
        fov_width_deg: f64,
        fov_height_deg: f64,
        ppd: f64,
    },
    /// Explicit display resolution.
    Explicit { width_px: u64, height_px: u64 },
}

impl PixelGrid {
    /// (width, height) in pixels.
    pub fn dimensions(&self) -> (f64, f64) {
        match *self {
            PixelGrid::Angular {
                fov_width_deg,
                fov_height_deg,
                ppd,
            } => (fov_width_deg * ppd, fov_height_deg * ppd),
            PixelGrid::Explicit {
                width_px,
                height_px,
            } => (width_px as f64, height_px as f64),
        }
    }

    pub fn pixel_count(&self) -> f64 {
        let (w, h) = self.dimensions();
        w * h
    }
}

/// Display and codec parameters from which bitrates derive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MediaSpec {
    pub grid: PixelGrid,
    pub bits_per_channel: u32,
    pub channels: u32,
    pub refresh_rate_fps: f64,
    pub eyes: u32,
    pub codec: Codec,
}

impl MediaSpec {
    pub fn explicit(width_px: u64, height_px: u64, bits: u32, fps: f64, eyes: u32) -> Self {
        MediaSpec {
            grid: PixelGrid::Explicit {
                width_px,
                height_px,
            },
            bits_per_channel: bits,
            channels: RGB_CHANNELS,
            refresh_rate_fps: fps,
            eyes,
            codec: Codec::None,
        }
    }

    pub fn angular(fov_w: f64, fov_h: f64, ppd: f64, bits: u32, fps: f64, eyes: u32) -> Self {
        MediaSpec {
            grid: PixelGrid::Angular {
                fov_width_deg: fov_w,
                fov_height_deg: fov_h,
                ppd,
            },
            bits_per_channel: bits,
            channels: RGB_CHANNELS,
            refresh_rate_fps: fps,
            eyes,
            codec: Codec::None,
        }
    }

    pub fn with_codec(mut self, codec: Codec) -> Self {
        self.codec = codec;
        self
    }

    /// Checks every field constraint and reports the first violation.
    pub fn validate(&self) -> Result<()> {
        self.violations().into_iter().next().map_or(Ok(()), Err)
    }

    /// All constraint violations, in field order.
    pub fn violations(&self) -> Vec<Error> {
        let mut errs = Vec::new();
        match self.grid {
            PixelGrid::Angular {
                fov_width_deg,
                fov_height_deg,
                ppd,
            } => {
                for (name, v) in [
                    ("fov_width_deg", fov_width_deg),
                    ("fov_height_deg", fov_height_deg),
                    ("ppd", ppd),
                ] {
                    if !(v.is_finite() && v > 0.0) {
                        errs.push(Error::domain(name, format!("must be > 0, got {v}")));
                    }
                }
            }
            PixelGrid::Explicit {
                width_px,
                height_px,
            } => {
                if width_px == 0 {
                    errs.push(Error::domain("width_px", "must be > 0"));
                }
                if height_px == 0 {
                    errs.push(Error::domain("height_px", "must be > 0"));
                }
            }
        }
        if !(1..=16).contains(&self.bits_per_channel) {
            errs.push(Error::domain(
                "bits_per_channel",
                format!("must be in [1, 16], got {}", self.bits_per_channel),
            ));
        }
        if self.channels != RGB_CHANNELS {
            errs.push(Error::domain(
                "channels",
                format!("must be {RGB_CHANNELS}, got {}", self.channels),
            ));
        }
        if !(self.refresh_rate_fps.is_finite() && self.refresh_rate_fps > 0.0) {
            errs.push(Error::domain(
                "refresh_rate_fps",
                format!("must be > 0, got {}", self.refresh_rate_fps),
            ));
        }
        if !matches!(self.eyes, 1 | 2) {
            errs.push(Error::domain(
                "eyes",
                format!("must be one of {{1, 2}}, got {}", self.eyes),
            ));
        }
        errs
    }

    /// Per-eye pixel count.
    pub fn pixels_per_eye(&self) -> f64 {
        self.grid.pixel_count()
    }
}

/// Pixel count of one eye's display: `(fov_h * ppd) * (fov_w * ppd)`.
pub fn monocular_pixel_count(fov_w: f64, fov_h: f64, ppd: f64) -> Result<f64> {
    for (name, v) in [("fov_w", fov_w), ("fov_h", fov_h), ("ppd", ppd)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::domain(name, format!("must be > 0, got {v}")));
        }
    }
    Ok((fov_h * ppd) * (fov_w * ppd))
}

/// `channels * bits_per_channel * fps * pixels * eyes` with no validation.
///
/// Linear in every argument; a zero anywhere gives zero.
pub fn raw_bitrate_of(
    channels: u32,
    bits_per_channel: u32,
    fps: f64,
    pixels: f64,
    eyes: u32,
) -> f64 {
    channels as f64 * bits_per_channel as f64 * fps * pixels * eyes as f64
}

/// Uncompressed bit rate of a validated spec, in bits per second.
pub fn raw_bitrate(spec: &MediaSpec) -> Result<f64> {
    spec.validate()?;
    Ok(raw_bitrate_of(
        spec.channels,
        spec.bits_per_channel,
        spec.refresh_rate_fps,
        spec.pixels_per_eye(),
        spec.eyes,
    ))
}

/// `raw / ratio(codec)`.
pub fn compressed_bitrate(raw: f64, codec: Codec) -> Result<f64> {
    if !(raw.is_finite() && raw >= 0.0) {
        return Err(Error::domain("raw", format!("must be >= 0, got {raw}")));
    }
    Ok(raw / codec.ratio().ratio as f64)
}

/// Bit rate after the spec's own codec.
pub fn encoded_bitrate(spec: &MediaSpec) -> Result<f64> {
    compressed_bitrate(raw_bitrate(spec)?, spec.codec)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatencyBudget {
    pub frame_deadline_ms: f64,
    pub vor_target_ms: f64,
    pub sensing_ms: f64,
    pub rendering_ms: f64,
    pub display_ms: f64,
    /// Deadline minus the non-network components. May be negative.
    pub streaming_budget_ms: f64,
}

impl LatencyBudget {
    pub fn is_feasible(&self) -> bool {
        self.streaming_budget_ms > 0.0
    }

    /// Whether the whole frame deadline fits inside the VOR target.
    pub fn meets_vor(&self) -> bool {
        self.frame_deadline_ms <= self.vor_target_ms
    }
}

/// End-to-end latency split for a given refresh rate.
///
/// An infeasible budget (non-positive streaming time) is returned, not rejected.
pub fn latency_budget(
    fps: f64,
    sensing_ms: f64,
    rendering_ms: f64,
    display_ms: f64,
) -> Result<LatencyBudget> {
    if !(fps.is_finite() && fps > 0.0) {
        return Err(Error::domain("fps", format!("must be > 0, got {fps}")));
    }
    for (name, v) in [
        ("sensing_ms", sensing_ms),
        ("rendering_ms", rendering_ms),
        ("display_ms", display_ms),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::domain(name, format!("must be >= 0, got {v}")));
        }
    }
    let frame_deadline_ms = 1_000.0 / fps;
    Ok(LatencyBudget {
        frame_deadline_ms,
        vor_target_ms: VOR_TARGET_MS,
        sensing_ms,
        rendering_ms,
        display_ms,
        streaming_budget_ms: frame_deadline_ms - sensing_ms - rendering_ms - display_ms,
    })
}

/// Rounds to `digits` significant figures.
pub fn round_sig(x: f64, digits: u32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let magnitude = x.abs().log10().floor() as i32;
    let scale = 10f64.powi(digits as i32 - 1 - magnitude);
    (x * scale).round() / scale
}

/// Human-readable bit rate with three significant figures, e.g. `54.9 Mb/s`.
pub fn format_bitrate(bps: f64) -> String {
    const UNITS: [(f64, &str); 5] = [
        (1e12, "Tb/s"),
        (1e9, "Gb/s"),
        (1e6, "Mb/s"),
        (1e3, "kb/s"),
        (1.0, "b/s"),
    ];
    let rounded = round_sig(bps, 3);
    let (scale, unit) = UNITS
        .iter()
        .copied()
        .find(|(s, _)| rounded.abs() >= *s)
        .unwrap_or((1.0, "b/s"));
    let v = rounded / scale;
    let decimals = if v >= 100.0 {
        0
    } else if v >= 10.0 {
        1
    } else {
        2
    };
    format!("{v:.decimals$} {unit}")
}
