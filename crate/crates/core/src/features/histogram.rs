use std::fmt;
use std::io::{BufRead, Read, Seek, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Frame, FrameSource, RgbFrame};

pub const DEFAULT_BINS: usize = 256;

/// Additive constant in the weighted-χ² denominator.
pub const CHI2_EPSILON: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayHistogram {
    counts: Vec<u64>,
}

impl GrayHistogram {
    pub fn from_counts(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InvalidBins(0));
        }
        Ok(GrayHistogram { counts })
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn check_same_bins(&self, other: &GrayHistogram) -> Result<()> {
        if self.n_bins() != other.n_bins() {
            return Err(Error::Shape {
                expected: self.n_bins(),
                got: other.n_bins(),
            });
        }
        Ok(())
    }
}

fn bin_lut(n_bins: usize) -> Result<[u16; 256]> {
    if n_bins == 0 {
        return Err(Error::InvalidBins(0));
    }
    let mut lut = [0u16; 256];
    for (v, slot) in lut.iter_mut().enumerate() {
        *slot = (v * n_bins / 256) as u16;
    }
    Ok(lut)
}

fn histogram_of<I: Iterator<Item = u8>>(values: I, n_bins: usize) -> Result<GrayHistogram> {
    let lut = bin_lut(n_bins)?;
    let mut counts = vec![0u64; n_bins];
    for v in values {
        counts[lut[v as usize] as usize] += 1;
    }
    Ok(GrayHistogram { counts })
}

/// Value `v` lands in bin `floor(v * n_bins / 256)`.
pub fn gray_histogram(frame: &Frame, n_bins: usize) -> Result<GrayHistogram> {
    histogram_of(frame.pixels().iter().copied(), n_bins)
}

/// One histogram per channel, in R, G, B order.
pub fn rgb_histograms(frame: &RgbFrame, n_bins: usize) -> Result<[GrayHistogram; 3]> {
    let channel = |c: usize| histogram_of(frame.data().iter().skip(c).step_by(3).copied(), n_bins);
    Ok([channel(0)?, channel(1)?, channel(2)?])
}

/// `D(i, i+1) = Σ_n |H_i(n) − H_{i+1}(n)|`.
pub fn sum_abs_hist_diff(h1: &GrayHistogram, h2: &GrayHistogram) -> Result<f64> {
    h1.check_same_bins(h2)?;
    let d: u64 = h1.counts.iter().zip(&h2.counts).map(|(&a, &b)| a.abs_diff(b)).sum();
    Ok(d as f64)
}

/// Symmetric χ²: `Σ_n (H_i(n) − H_{i+1}(n))² / (H_i(n) + H_{i+1}(n) + 1)`.
pub fn weighted_chi2_diff(h1: &GrayHistogram, h2: &GrayHistogram) -> Result<f64> {
    h1.check_same_bins(h2)?;
    Ok(h1
        .counts
        .iter()
        .zip(&h2.counts)
        .map(|(&a, &b)| {
            let d = a.abs_diff(b) as f64;
            d * d / (a as f64 + b as f64 + CHI2_EPSILON)
        })
        .sum())
}

/// Per-channel absolute differences summed over R, G and B.
pub fn sum_abs_rgb_diff(h1: &[GrayHistogram; 3], h2: &[GrayHistogram; 3]) -> Result<f64> {
    let mut total = 0.0;
    for (a, b) in h1.iter().zip(h2) {
        total += sum_abs_hist_diff(a, b)?;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffKind {
    GrayHist,
    RgbHist,
    WeightedChi2,
}

impl DiffKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DiffKind::GrayHist => "gray_hist",
            DiffKind::RgbHist => "rgb_hist",
            DiffKind::WeightedChi2 => "weighted_chi2",
        }
    }
}

impl fmt::Display for DiffKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DiffKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gray_hist" => Ok(DiffKind::GrayHist),
            "rgb_hist" => Ok(DiffKind::RgbHist),
            "weighted_chi2" => Ok(DiffKind::WeightedChi2),
            other => Err(Error::Parse(format!("unknown difference kind {other:?}"))),
        }
    }
}

/// `values[i]` is the difference between frames `i` and `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffSeries {
    pub video_id: String,
    pub kind: DiffKind,
    pub n_bins: usize,
    pub values: Vec<f64>,
}

impl DiffSeries {
    /// Text layout: one header line, then one value per line printed in the
    /// shortest form that parses back to the same `f64`.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.header_line())?;
        for v in &self.values {
            writeln!(w, "{v}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_text(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("ascii")
    }

    pub fn header_line(&self) -> String {
        format!("# video_id={} kind={} n_bins={}", self.video_id, self.kind, self.n_bins)
    }

    /// Parses a header line into `(video_id, kind, n_bins)`.
    pub fn parse_header(line: &str) -> Result<(String, DiffKind, usize)> {
        let rest = line
            .trim_end()
            .strip_prefix("# ")
            .ok_or_else(|| Error::Parse("difference series header must start with '# '".into()))?;
        let (mut id, mut kind, mut bins) = (None, None, None);
        for token in rest.split_whitespace() {
            let (key, value) = token
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad header token {token:?}")))?;
            match key {
                "video_id" => id = Some(value.to_owned()),
                "kind" => kind = Some(value.parse()?),
                "n_bins" => {
                    bins = Some(
                        value
                            .parse()
                            .map_err(|_| Error::Parse(format!("bad n_bins {value:?}")))?,
                    )
                }
                _ => return Err(Error::Parse(format!("unknown header key {key:?}"))),
            }
        }
        match (id, kind, bins) {
            (Some(id), Some(kind), Some(bins)) => Ok((id, kind, bins)),
            _ => Err(Error::Parse("difference series header is incomplete".into())),
        }
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty difference series file".into()))??;
        let (video_id, kind, n_bins) = Self::parse_header(&header)?;
        let mut values = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            let v: f64 = line
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad value {line:?}", i + 2)))?;
            if !(v >= 0.0) {
                return Err(Error::Parse(format!("line {}: negative or NaN difference", i + 2)));
            }
            values.push(v);
        }
        Ok(DiffSeries {
            video_id,
            kind,
            n_bins,
            values,
        })
    }
}

enum FrameHist {
    Gray(GrayHistogram),
    Rgb([GrayHistogram; 3]),
}

/// Streams the source once, keeping only the previous frame's histogram.
///
/// `.gry` sources are grayscale, so [`DiffKind::RgbHist`] sees three
/// identical channels here; use [`rgb_diff_series`] for true colour input.
pub fn diff_series<R: Read + Seek>(source: &mut FrameSource<R>, kind: DiffKind, n_bins: usize) -> Result<DiffSeries> {
    bin_lut(n_bins)?;
    source.seek(0)?;
    let hist = |frame: &Frame| -> Result<FrameHist> {
        let h = gray_histogram(frame, n_bins)?;
        Ok(match kind {
            DiffKind::RgbHist => FrameHist::Rgb([h.clone(), h.clone(), h]),
            _ => FrameHist::Gray(h),
        })
    };
    let mut values = Vec::with_capacity(source.n_frames().saturating_sub(1) as usize);
    if let Some(first) = source.next_frame()? {
        let mut prev = hist(&first)?;
        while let Some(frame) = source.next_frame()? {
            let cur = hist(&frame)?;
            values.push(pair_diff(kind, &prev, &cur)?);
            prev = cur;
        }
    }
    Ok(DiffSeries {
        video_id: source.meta().video_id.clone(),
        kind,
        n_bins,
        values,
    })
}

fn pair_diff(kind: DiffKind, a: &FrameHist, b: &FrameHist) -> Result<f64> {
    match (kind, a, b) {
        (DiffKind::GrayHist, FrameHist::Gray(a), FrameHist::Gray(b)) => sum_abs_hist_diff(a, b),
        (DiffKind::WeightedChi2, FrameHist::Gray(a), FrameHist::Gray(b)) => weighted_chi2_diff(a, b),
        (DiffKind::RgbHist, FrameHist::Rgb(a), FrameHist::Rgb(b)) => sum_abs_rgb_diff(a, b),
        _ => unreachable!("histogram variant always follows the series kind"),
    }
}

/// Per-channel RGB difference series over an in-memory colour frame sequence.
pub fn rgb_diff_series<I>(video_id: &str, frames: I, n_bins: usize) -> Result<DiffSeries>
where
    I: IntoIterator<Item = RgbFrame>,
{
    let mut values = Vec::new();
    let mut prev: Option<[GrayHistogram; 3]> = None;
    for frame in frames {
        let cur = rgb_histograms(&frame, n_bins)?;
        if let Some(p) = &prev {
            values.push(sum_abs_rgb_diff(p, &cur)?);
        }
        prev = Some(cur);
    }
    Ok(DiffSeries {
        video_id: video_id.to_owned(),
        kind: DiffKind::RgbHist,
        n_bins,
        values,
    })
}
