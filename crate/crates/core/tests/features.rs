mod support;

use std::io::Cursor;

use proptest::prelude::*;
use strokeloc::features::{diff_series, gray_histogram, hog, sum_abs_hist_diff, DiffKind, HogParams};
use strokeloc::ingest::{Frame, FrameSource, GryWriter, VideoMeta};
use strokeloc::synthcorpus::{generate_video, CorpusSpec};

use support::{naive_abs_hist_diff, naive_hog};

fn frame_strategy(max_w: u32, max_h: u32, min: u32) -> impl Strategy<Value = (u32, u32, Vec<u8>)> {
    (min..=max_w, min..=max_h).prop_flat_map(|(w, h)| (Just(w), Just(h), proptest::collection::vec(any::<u8>(), (w * h) as usize)))
}

proptest! {
    #[test]
    fn abs_diff_matches_integer_oracle((w, h, a) in frame_strategy(40, 30, 1), seed in any::<u64>(), bins in prop::sample::select(vec![1usize, 2, 7, 64, 128, 256])) {
        let b: Vec<u8> = a.iter().enumerate().map(|(i, &p)| p.wrapping_add((seed >> (i % 64)) as u8 & 3)).collect();
        let ha = gray_histogram(&Frame::new(w, h, a.clone()).unwrap(), bins).unwrap();
        let hb = gray_histogram(&Frame::new(w, h, b.clone()).unwrap(), bins).unwrap();
        prop_assert_eq!(sum_abs_hist_diff(&ha, &hb).unwrap(), naive_abs_hist_diff(&a, &b, bins) as f64);
    }

    #[test]
    fn hog_matches_naive_oracle((w, h, px) in frame_strategy(64, 64, 16)) {
        let got = hog(&Frame::new(w, h, px.clone()).unwrap(), &HogParams::default()).unwrap().values;
        let want = naive_hog(&px, w as usize, h as usize);
        prop_assert_eq!(got.len(), want.len());
        for (g, e) in got.iter().zip(&want) {
            prop_assert!((g - e).abs() <= 1e-9);
        }
    }

    #[test]
    fn hog_entries_are_bounded((w, h, px) in frame_strategy(48, 48, 16)) {
        let d = hog(&Frame::new(w, h, px).unwrap(), &HogParams::default()).unwrap();
        prop_assert!(d.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}

#[test]
fn vertical_step_edge_puts_all_energy_in_bin_zero() {
    let f = Frame::from_fn(64, 64, |x, _| if x < 32 { 0 } else { 255 });
    let d = hog(&f, &HogParams::default()).unwrap();
    assert_eq!(d.values, naive_hog(f.pixels(), 64, 64));
    for (k, v) in d.values.iter().enumerate() {
        if k % 9 != 0 {
            assert_eq!(*v, 0.0);
        }
    }
    assert!(d.values.iter().step_by(9).any(|&v| v > 0.0));
}

fn diff_of(spec: &CorpusSpec, index: usize) -> (Vec<f64>, Vec<u64>) {
    let mut bytes = Vec::new();
    let v = generate_video(spec, index, &mut bytes).unwrap();
    let mut src = FrameSource::open(Cursor::new(bytes), "v").unwrap();
    let s = diff_series(&mut src, DiffKind::GrayHist, 256).unwrap();
    (s.values, v.cuts.cuts().to_vec())
}

#[test]
fn two_shot_video_peaks_at_the_boundary() {
    let spec = CorpusSpec {
        frames_per_video: 100,
        shot_len_range: (40, 60),
        seed: 7,
        ..CorpusSpec::default()
    };
    let (values, cuts) = diff_of(&spec, 0);
    assert_eq!(cuts.len(), 1);
    let peak = values.iter().cloned().fold(f64::MIN, f64::max);
    let at: Vec<usize> = (0..values.len()).filter(|&i| values[i] == peak).collect();
    assert_eq!(at, vec![cuts[0] as usize - 1]);
}

#[test]
fn cut_differences_dominate_intra_shot_differences() {
    let spec = CorpusSpec {
        frames_per_video: 800,
        ..CorpusSpec::default()
    };
    for index in 0..3 {
        let (values, cuts) = diff_of(&spec, index);
        let is_cut = |i: usize| cuts.contains(&(i as u64 + 1));
        let min_cut = (0..values.len()).filter(|&i| is_cut(i)).map(|i| values[i]).fold(f64::MAX, f64::min);
        let max_intra = (0..values.len()).filter(|&i| !is_cut(i)).map(|i| values[i]).fold(0.0, f64::max);
        assert!(min_cut >= 5.0 * max_intra, "video {index}: {min_cut} vs {max_intra}");
    }
}

#[test]
fn series_from_disk_matches_in_memory() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("clip.gry");
    let meta = VideoMeta::new("clip", 16, 8, 25, 5).unwrap();
    let mut w = GryWriter::new(std::fs::File::create(&path).unwrap(), meta).unwrap();
    for k in 0..5u8 {
        w.write_frame(&Frame::from_fn(16, 8, |x, y| (x as u8 * 7 + y as u8 * k) % 255)).unwrap();
    }
    w.finish().unwrap();
    let mut src = FrameSource::open_path(&path).unwrap();
    assert_eq!(src.meta().video_id, "clip");
    let s = diff_series(&mut src, DiffKind::GrayHist, 256).unwrap();
    let frames: Vec<Frame> = (0..5).map(|i| src.frame_at(i).unwrap()).collect();
    let want: Vec<f64> = frames
        .windows(2)
        .map(|p| naive_abs_hist_diff(p[0].pixels(), p[1].pixels(), 256) as f64)
        .collect();
    assert_eq!(s.values, want);
}
