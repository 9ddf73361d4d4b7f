//! The `calc` subcommand: display bandwidth and latency arithmetic.

use xrsim_core::media_calc::{
    compressed_bitrate, format_bitrate, latency_budget, raw_bitrate, round_sig, Codec,
    LatencyBudget, MediaSpec, FOV_PANORAMIC, PPD_LEGACY, TYPICAL_SENSING_MS, VOR_TARGET_MS,
};
use xrsim_core::Result;

/// Raw and encoded rate of a display.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateResult {
    pub raw_bps: f64,
    pub encoded_bps: f64,
    pub codec: Codec,
}

pub fn rate(spec: &MediaSpec) -> Result<RateResult> {
    let raw_bps = raw_bitrate(spec)?;
    Ok(RateResult {
        raw_bps,
        encoded_bps: compressed_bitrate(raw_bps, spec.codec)?,
        codec: spec.codec,
    })
}

pub fn format_rate(r: &RateResult) -> String {
    format!(
        "raw: {} ({} b/s)\n{}: {} ({} b/s)\n",
        format_bitrate(r.raw_bps),
        r.raw_bps,
        r.codec,
        format_bitrate(r.encoded_bps),
        r.encoded_bps
    )
}

pub fn format_latency(b: &LatencyBudget) -> String {
    format!(
        "frame deadline: {:.1} ms\nVOR target: {} ms\nsensing {} ms, rendering {} ms, display {} ms\nstreaming budget: {:.2} ms{}\n",
        b.frame_deadline_ms,
        b.vor_target_ms,
        b.sensing_ms,
        b.rendering_ms,
        b.display_ms,
        b.streaming_budget_ms,
        if b.is_feasible() { "" } else { " (infeasible)" }
    )
}

/// One published worked example beside the computed value.
#[derive(Clone, Debug, PartialEq)]
pub struct PublishedCheck {
    pub label: &'static str,
    pub computed: f64,
    /// Computed value at the published precision.
    pub shown: String,
    pub published: &'static str,
    pub matches: bool,
    pub note: &'static str,
}

/// Rounds to `decimals` places and prints without trailing noise.
fn at_precision(x: f64, decimals: usize) -> String {
    format!("{x:.decimals$}")
}

/// The published bandwidth and latency figures, recomputed.
pub fn published_checks() -> Result<Vec<PublishedCheck>> {
    let headset = MediaSpec::explicit(2160, 1200, 8, 90.0, 1).with_codec(Codec::H264);
    let raw = raw_bitrate(&headset)?;
    let h264 = compressed_bitrate(raw, Codec::H264)?;
    let (fov_w, fov_h) = FOV_PANORAMIC;
    let pano = raw_bitrate(&MediaSpec::angular(fov_w, fov_h, PPD_LEGACY[0], 8, 30.0, 1))?;
    let pano2 = raw_bitrate(&MediaSpec::angular(fov_w, fov_h, PPD_LEGACY[0], 8, 30.0, 2))?;
    let d90 = latency_budget(90.0, TYPICAL_SENSING_MS, 0.0, 0.0)?.frame_deadline_ms;
    let d120 = latency_budget(120.0, TYPICAL_SENSING_MS, 0.0, 0.0)?.frame_deadline_ms;

    let mb = |x: f64| x / 1e6;
    let gb = |x: f64| x / 1e9;
    Ok(vec![
        PublishedCheck {
            label: "raw 2160x1200, 8 bit, 90 fps (b/s)",
            computed: raw,
            shown: format!("{raw}"),
            published: "5598720000",
            matches: raw == 5_598_720_000.0,
            note: "",
        },
        PublishedCheck {
            label: "H.264 compressed (Mb/s)",
            computed: h264,
            shown: at_precision(mb(h264), 0),
            published: "55",
            matches: at_precision(mb(h264), 0) == "55",
            note: "",
        },
        PublishedCheck {
            label: "H.264 compressed, binocular (Mb/s)",
            computed: 2.0 * h264,
            shown: at_precision(mb(2.0 * h264), 0),
            published: "110",
            matches: at_precision(mb(2.0 * h264), 0) == "110",
            note: "",
        },
        PublishedCheck {
            label: "panoramic 360x180, 11 PPD, 8 bit, 30 fps (Gb/s)",
            computed: pano,
            shown: at_precision(gb(pano), 1),
            published: "5.6",
            matches: at_precision(gb(pano), 1) == "5.6",
            note: "",
        },
        PublishedCheck {
            label: "panoramic, binocular (Gb/s)",
            computed: pano2,
            shown: at_precision(gb(pano2), 1),
            published: "11.2",
            matches: pano2 == 2.0 * pano && (gb(pano2) - 11.2).abs() <= 0.1 + 1e-12,
            note: "exact value rounds to 11.3; the published figure doubles the rounded 5.6",
        },
        PublishedCheck {
            label: "frame deadline at 90 fps (ms)",
            computed: d90,
            shown: at_precision(d90, 1),
            published: "11.1",
            matches: at_precision(d90, 1) == "11.1",
            note: "",
        },
        PublishedCheck {
            label: "frame deadline at 120 fps (ms)",
            computed: d120,
            shown: at_precision(d120, 1),
            published: "8.3",
            matches: at_precision(d120, 1) == "8.3",
            note: "",
        },
        PublishedCheck {
            label: "VOR latency target (ms)",
            computed: VOR_TARGET_MS,
            shown: format!("{}", round_sig(VOR_TARGET_MS, 1)),
            published: "7",
            matches: VOR_TARGET_MS == 7.0,
            note: "",
        },
    ])
}

pub fn format_published_checks(checks: &[PublishedCheck]) -> String {
    let mut out = String::from("example | computed | published | match\n");
    for c in checks {
        out.push_str(&format!(
            "{} | {} | {} | {}",
            c.label,
            c.shown,
            c.published,
            if c.matches { "yes" } else { "no" }
        ));
        if !c.note.is_empty() {
            out.push_str(&format!(" ({})", c.note));
        }
        out.push('\n');
    }
    out
}
