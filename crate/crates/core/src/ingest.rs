//! Frame acquisition: the raw `.gry` grayscale stream, grayscale conversion,
//! and the external-decoder preprocessing plan.
//!
//! A `.gry` stream is a 24-byte little-endian header followed by
//! `n_frames` rasters of `width * height` bytes each, row-major with the
//! origin at the top-left:
//!
//! ```text
//! offset  size  field
//!      0     4  magic "GRY1"
//!      4     4  width     (u32)
//!      8     4  height    (u32)
//!     12     4  fps       (u32)
//!     16     8  n_frames  (u64)
//!     24     .  frame data
//! ```

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GRY_MAGIC: &[u8; 4] = b"GRY1";
pub const GRY_HEADER_LEN: u64 = 24;

pub const DEFAULT_WIDTH: u32 = 640;
pub const DEFAULT_HEIGHT: u32 = 360;
pub const DEFAULT_FPS: u32 = 25;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub video_id: String,
    pub width: u32,
    pub height: u32,
    pub fps: u32,
    pub n_frames: u64,
}

impl VideoMeta {
    pub fn new(video_id: impl Into<String>, width: u32, height: u32, fps: u32, n_frames: u64) -> Result<Self> {
        let meta = VideoMeta {
            video_id: video_id.into(),
            width,
            height,
            fps,
            n_frames,
        };
        meta.validate()?;
        Ok(meta)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Format(format!(
                "frame dimensions must be positive, got {}x{}",
                self.width, self.height
            )));
        }
        if self.fps == 0 {
            return Err(Error::Format("fps must be positive".into()));
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn frame_bytes(&self) -> u64 {
        self.width as u64 * self.height as u64
    }
}

/// An 8-bit grayscale raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl Frame {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width as usize * height as usize {
            return Err(Error::Shape {
                expected: width as usize * height as usize,
                got: pixels.len(),
            });
        }
        Ok(Frame { width, height, pixels })
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        Frame {
            width,
            height,
            pixels: vec![value; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> u8) -> Self {
        let mut pixels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Frame { width, height, pixels }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }
}

/// An 8-bit interleaved RGB raster. Only used by the per-channel histogram path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbFrame {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl RgbFrame {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        let expected = width as usize * height as usize * 3;
        if data.len() != expected {
            return Err(Error::Shape {
                expected,
                got: data.len(),
            });
        }
        Ok(RgbFrame { width, height, data })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn to_gray(&self) -> Frame {
        let pixels = self
            .data
            .chunks_exact(3)
            .map(|p| to_gray(p[0], p[1], p[2]))
            .collect();
        Frame {
            width: self.width,
            height: self.height,
            pixels,
        }
    }
}

/// BT.601 luma, `round(0.299 r + 0.587 g + 0.114 b)`, evaluated in exact
/// integer arithmetic (half rounds up).
#[inline]
pub fn to_gray(r: u8, g: u8, b: u8) -> u8 {
    let y = (299 * r as u32 + 587 * g as u32 + 114 * b as u32 + 500) / 1000;
    y.min(255) as u8
}

/// Target geometry for the external decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeTarget {
    pub width: u32,
    pub height: u32,
    pub fps: u32,
}

impl Default for DecodeTarget {
    fn default() -> Self {
        DecodeTarget {
            width: DEFAULT_WIDTH,
            height: DEFAULT_HEIGHT,
            fps: DEFAULT_FPS,
        }
    }
}

/// An argument vector for an external decoder process.
///
/// The decoder writes headerless gray rasters to stdout; [`run_decode`] wraps
/// them into a `.gry` stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeCommand {
    pub program: String,
    pub args: Vec<String>,
}

impl DecodeCommand {
    pub fn argv(&self) -> Vec<String> {
        std::iter::once(self.program.clone())
            .chain(self.args.iter().cloned())
            .collect()
    }
}

impl std::fmt::Display for DecodeCommand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let quoted: Vec<String> = self
            .argv()
            .into_iter()
            .map(|a| {
                if a.is_empty() || a.contains(|c: char| c.is_whitespace() || c == '\'' || c == '"') {
                    format!("'{}'", a.replace('\'', r"'\''"))
                } else {
                    a
                }
            })
            .collect();
        f.write_str(&quoted.join(" "))
    }
}

/// Plans an ffmpeg invocation that resamples `src_path` to a constant frame
/// rate, stretches it to the target size and emits raw 8-bit gray frames.
pub fn plan_decode(src_path: &str, target: &DecodeTarget) -> Result<DecodeCommand> {
    if target.width == 0 || target.height == 0 {
        return Err(Error::InvalidTarget(format!(
            "dimensions must be positive, got {}x{}",
            target.width, target.height
        )));
    }
    if target.fps == 0 {
        return Err(Error::InvalidTarget("fps must be positive".into()));
    }
    let args = [
        "-nostdin",
        "-hide_banner",
        "-loglevel",
        "error",
        "-i",
        src_path,
        "-an",
        "-vf",
        &format!("fps={},scale={}:{}", target.fps, target.width, target.height),
        "-pix_fmt",
        "gray",
        "-f",
        "rawvideo",
        "pipe:1",
    ];
    Ok(DecodeCommand {
        program: "ffmpeg".into(),
        args: args.iter().map(|s| s.to_string()).collect(),
    })
}

/// Executes a decode plan and writes its output as a `.gry` stream.
///
/// The frame count is only known once the decoder exits, so a placeholder
/// header is written first and patched afterwards.
pub fn run_decode(cmd: &DecodeCommand, target: &DecodeTarget, out_path: &Path) -> Result<VideoMeta> {
    let video_id = video_id_from_path(out_path)?;
    let mut child = Command::new(&cmd.program)
        .args(&cmd.args)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()
        .map_err(Error::io_at(&cmd.program))?;
    let mut stdout = child.stdout.take().expect("stdout is piped");

    let tmp = out_path.with_extension("gry.part");
    let mut file = BufWriter::new(File::create(&tmp).map_err(Error::io_at(&tmp))?);
    let mut meta = VideoMeta::new(video_id, target.width, target.height, target.fps, 0)?;
    write_header(&mut file, &meta)?;
    let body_len = io::copy(&mut stdout, &mut file)?;
    let status = child.wait()?;
    if !status.success() {
        let _ = std::fs::remove_file(&tmp);
        return Err(Error::Format(format!("decoder exited with {status}")));
    }
    if body_len % meta.frame_bytes() != 0 {
        let _ = std::fs::remove_file(&tmp);
        return Err(Error::Truncated {
            offset: GRY_HEADER_LEN + body_len,
            what: "decoder output is not a whole number of frames".into(),
        });
    }
    meta.n_frames = body_len / meta.frame_bytes();
    let mut file = file.into_inner().map_err(|e| e.into_error())?;
    file.seek(SeekFrom::Start(0))?;
    write_header(&mut file, &meta)?;
    file.sync_all()?;
    drop(file);
    std::fs::rename(&tmp, out_path).map_err(Error::io_at(out_path))?;
    Ok(meta)
}

pub fn video_id_from_path(path: &Path) -> Result<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_owned)
        .ok_or_else(|| Error::InvalidParam(format!("cannot derive a video id from {}", path.display())))
}

fn write_header<W: Write>(w: &mut W, meta: &VideoMeta) -> io::Result<()> {
    w.write_all(GRY_MAGIC)?;
    w.write_all(&meta.width.to_le_bytes())?;
    w.write_all(&meta.height.to_le_bytes())?;
    w.write_all(&meta.fps.to_le_bytes())?;
    w.write_all(&meta.n_frames.to_le_bytes())
}

/// Random-access reader over a `.gry` stream.
pub struct FrameSource<R> {
    meta: VideoMeta,
    reader: R,
    position: u64,
}

impl FrameSource<BufReader<File>> {
    pub fn open_path(path: &Path) -> Result<Self> {
        let video_id = video_id_from_path(path)?;
        let file = File::open(path).map_err(Error::io_at(path))?;
        FrameSource::open(BufReader::new(file), video_id)
    }
}

impl<R: Read + Seek> FrameSource<R> {
    /// Parses the header and checks that the body holds every promised frame.
    /// Frame data is read lazily.
    pub fn open(mut reader: R, video_id: impl Into<String>) -> Result<Self> {
        let len = reader.seek(SeekFrom::End(0))?;
        reader.seek(SeekFrom::Start(0))?;
        if len < 4 {
            return Err(Error::Truncated {
                offset: len,
                what: "missing magic".into(),
            });
        }
        let mut header = [0u8; GRY_HEADER_LEN as usize];
        reader.read_exact(&mut header[..4])?;
        if &header[..4] != GRY_MAGIC {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&header[..4]),
                "GRY1"
            )));
        }
        if len < GRY_HEADER_LEN {
            return Err(Error::Truncated {
                offset: len,
                what: "header".into(),
            });
        }
        reader.read_exact(&mut header[4..])?;
        let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap());
        let meta = VideoMeta {
            video_id: video_id.into(),
            width: u32_at(4),
            height: u32_at(8),
            fps: u32_at(12),
            n_frames: u64::from_le_bytes(header[16..24].try_into().unwrap()),
        };
        meta.validate()?;
        let body = meta
            .n_frames
            .checked_mul(meta.frame_bytes())
            .ok_or_else(|| Error::Format("frame count overflows the stream size".into()))?;
        let available = len - GRY_HEADER_LEN;
        if available < body {
            return Err(Error::Truncated {
                offset: len,
                what: format!(
                    "header promises {} frames, body holds {}",
                    meta.n_frames,
                    available / meta.frame_bytes()
                ),
            });
        }
        Ok(FrameSource {
            meta,
            reader,
            position: 0,
        })
    }

    pub fn meta(&self) -> &VideoMeta {
        &self.meta
    }

    pub fn n_frames(&self) -> u64 {
        self.meta.n_frames
    }

    pub fn position(&self) -> u64 {
        self.position
    }

    /// Moves the read cursor; `index == n_frames` is the end-of-stream position.
    pub fn seek(&mut self, index: u64) -> Result<()> {
        if index > self.meta.n_frames {
            return Err(Error::FrameOutOfRange {
                index,
                n_frames: self.meta.n_frames,
            });
        }
        self.position = index;
        Ok(())
    }

    /// Reads the frame at the cursor and advances it. `None` at end of stream.
    pub fn next_frame(&mut self) -> Result<Option<Frame>> {
        if self.position >= self.meta.n_frames {
            return Ok(None);
        }
        let offset = GRY_HEADER_LEN + self.position * self.meta.frame_bytes();
        self.reader.seek(SeekFrom::Start(offset))?;
        let mut pixels = vec![0u8; self.meta.pixel_count()];
        self.reader.read_exact(&mut pixels).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => Error::Truncated {
                offset,
                what: format!("frame {}", self.position),
            },
            _ => Error::Io(e),
        })?;
        self.position += 1;
        Ok(Some(Frame {
            width: self.meta.width,
            height: self.meta.height,
            pixels,
        }))
    }

    pub fn frame_at(&mut self, index: u64) -> Result<Frame> {
        if index >= self.meta.n_frames {
            return Err(Error::FrameOutOfRange {
                index,
                n_frames: self.meta.n_frames,
            });
        }
        self.seek(index)?;
        Ok(self.next_frame()?.expect("index checked above"))
    }

    pub fn into_inner(self) -> R {
        self.reader
    }
}

/// Sequential `.gry` writer. The frame count is fixed up front by `meta`.
pub struct GryWriter<W: Write> {
    writer: W,
    meta: VideoMeta,
    written: u64,
}

impl<W: Write> GryWriter<W> {
    pub fn new(mut writer: W, meta: VideoMeta) -> Result<Self> {
        meta.validate()?;
        write_header(&mut writer, &meta)?;
        Ok(GryWriter {
            writer,
            meta,
            written: 0,
        })
    }

    pub fn write_frame(&mut self, frame: &Frame) -> Result<()> {
        if frame.width != self.meta.width || frame.height != self.meta.height {
            return Err(Error::Format(format!(
                "frame is {}x{}, stream is {}x{}",
                frame.width, frame.height, self.meta.width, self.meta.height
            )));
        }
        if self.written >= self.meta.n_frames {
            return Err(Error::Format(format!(
                "stream declares {} frames; refusing to write more",
                self.meta.n_frames
            )));
        }
        self.writer.write_all(&frame.pixels)?;
        self.written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        if self.written != self.meta.n_frames {
            return Err(Error::Format(format!(
                "stream declares {} frames but {} were written",
                self.meta.n_frames, self.written
            )));
        }
        self.writer.flush()?;
        Ok(self.writer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Cursor;

    fn stream(meta: &VideoMeta, frames: &[Frame]) -> Vec<u8> {
        let mut w = GryWriter::new(Vec::new(), meta.clone()).unwrap();
        for f in frames {
            w.write_frame(f).unwrap();
        }
        w.finish().unwrap()
    }

    #[test]
    fn gray_conversion_fixed_points() {
        assert_eq!(to_gray(255, 255, 255), 255);
        assert_eq!(to_gray(0, 0, 0), 0);
        assert_eq!(to_gray(255, 0, 0), (0.299f64 * 255.0).round() as u8);
        assert_eq!(to_gray(255, 0, 0), 76);
    }

    #[test]
    fn gray_conversion_is_exact_on_equal_channels_and_monotone() {
        for v in 0..=255u8 {
            assert_eq!(to_gray(v, v, v), v);
        }
        for a in (0..=255u8).step_by(5) {
            for b in (0..=255u8).step_by(7) {
                for v in 0..255u8 {
                    assert!(to_gray(v, a, b) <= to_gray(v + 1, a, b));
                    assert!(to_gray(a, v, b) <= to_gray(a, v + 1, b));
                    assert!(to_gray(a, b, v) <= to_gray(a, b, v + 1));
                }
            }
        }
    }

    #[test]
    fn gray_conversion_matches_float_rounding() {
        for r in (0..=255u32).step_by(3) {
            for g in (0..=255u32).step_by(5) {
                for b in (0..=255u32).step_by(11) {
                    let f = 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
                    let got = to_gray(r as u8, g as u8, b as u8) as f64;
                    assert!((got - f).abs() <= 0.5 + 1e-9, "{r},{g},{b}");
                }
            }
        }
    }

    #[test]
    fn default_decode_plan() {
        let cmd = plan_decode("in.mp4", &DecodeTarget::default()).unwrap();
        assert_eq!(cmd.program, "ffmpeg");
        assert!(cmd.args.iter().any(|a| a.contains("scale=640:360")));
        assert!(cmd.args.iter().any(|a| a.contains("fps=25")));
        assert!(cmd.args.windows(2).any(|w| w == ["-pix_fmt", "gray"]));
        assert!(cmd.args.windows(2).any(|w| w == ["-f", "rawvideo"]));
        assert_eq!(cmd.args.last().unwrap(), "pipe:1");
    }

    #[test]
    fn decode_plan_is_source_agnostic() {
        let t = DecodeTarget {
            width: 320,
            height: 180,
            fps: 30,
        };
        assert_eq!(plan_decode("a.mkv", &t).unwrap(), plan_decode("a.mkv", &t).unwrap());
    }

    #[test]
    fn decode_plan_rejects_bad_targets() {
        let zero_fps = DecodeTarget {
            fps: 0,
            ..DecodeTarget::default()
        };
        assert!(matches!(plan_decode("x", &zero_fps), Err(Error::InvalidTarget(_))));
        let zero_w = DecodeTarget {
            width: 0,
            ..DecodeTarget::default()
        };
        assert!(matches!(plan_decode("x", &zero_w), Err(Error::InvalidTarget(_))));
    }

    #[test]
    fn open_full_size_stream() {
        let meta = VideoMeta::new("v", 640, 360, 25, 100).unwrap();
        let frames: Vec<Frame> = (0..100).map(|i| Frame::filled(640, 360, i as u8)).collect();
        let bytes = stream(&meta, &frames);
        assert_eq!(bytes.len() as u64, GRY_HEADER_LEN + 100 * 230_400);
        let mut src = FrameSource::open(Cursor::new(bytes), "v").unwrap();
        assert_eq!(src.n_frames(), 100);
        assert_eq!(src.meta(), &meta);
        assert_eq!(src.frame_at(42).unwrap().pixels()[0], 42);
    }

    #[test]
    fn bad_magic_is_a_format_error() {
        let mut bytes = stream(&VideoMeta::new("v", 2, 2, 25, 1).unwrap(), &[Frame::filled(2, 2, 0)]);
        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(FrameSource::open(Cursor::new(bytes), "v"), Err(Error::Format(_))));
    }

    #[test]
    fn short_body_is_a_truncation_error() {
        let meta = VideoMeta::new("v", 4, 3, 25, 10).unwrap();
        let frames: Vec<Frame> = (0..10).map(|_| Frame::filled(4, 3, 7)).collect();
        let mut bytes = stream(&meta, &frames);
        bytes.truncate(bytes.len() - 12);
        match FrameSource::open(Cursor::new(bytes), "v") {
            Err(Error::Truncated { offset, what }) => {
                assert_eq!(offset, GRY_HEADER_LEN + 9 * 12);
                assert!(what.contains("body holds 9"), "{what}");
            }
            other => panic!("expected truncation, got {:?}", other.map(|s| s.meta().clone())),
        }
    }

    #[test]
    fn short_header_is_a_truncation_error() {
        let bytes = b"GRY1\x02\x00".to_vec();
        assert!(matches!(
            FrameSource::open(Cursor::new(bytes), "v"),
            Err(Error::Truncated { offset: 6, .. })
        ));
    }

    #[test]
    fn writer_enforces_declared_count() {
        let meta = VideoMeta::new("v", 2, 2, 25, 2).unwrap();
        let mut w = GryWriter::new(Vec::new(), meta).unwrap();
        w.write_frame(&Frame::filled(2, 2, 1)).unwrap();
        assert!(w.finish().is_err());
    }

    #[test]
    fn frame_index_past_end_is_rejected() {
        let meta = VideoMeta::new("v", 2, 2, 25, 1).unwrap();
        let mut src = FrameSource::open(Cursor::new(stream(&meta, &[Frame::filled(2, 2, 3)])), "v").unwrap();
        assert!(matches!(src.frame_at(1), Err(Error::FrameOutOfRange { .. })));
        assert!(src.seek(1).is_ok());
        assert!(src.next_frame().unwrap().is_none());
    }

    proptest! {
        #[test]
        fn round_trip_and_seek(
            w in 1u32..9, h in 1u32..9, n in 0usize..12, seed in any::<u64>(), probes in prop::collection::vec(any::<prop::sample::Index>(), 1..8)
        ) {
            let frames: Vec<Frame> = (0..n)
                .map(|i| Frame::from_fn(w, h, |x, y| (seed as u32).wrapping_mul(31).wrapping_add(i as u32 * 7 + x * 3 + y * 5) as u8))
                .collect();
            let meta = VideoMeta::new("p", w, h, 25, n as u64).unwrap();
            let bytes = stream(&meta, &frames);
            let mut src = FrameSource::open(Cursor::new(bytes.clone()), "p").unwrap();

            let mut sequential = Vec::new();
            while let Some(f) = src.next_frame().unwrap() {
                sequential.push(f);
            }
            prop_assert_eq!(&sequential, &frames);
            prop_assert_eq!(stream(&meta, &sequential), bytes);

            if n > 0 {
                for p in probes {
                    let i = p.index(n);
                    prop_assert_eq!(&src.frame_at(i as u64).unwrap(), &frames[i]);
                }
            }
        }
    }
}
