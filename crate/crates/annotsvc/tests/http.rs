use reqwest::StatusCode;
use serde_json::{json, Value};
use strokeloc::pipeline::{Segment, SegmentSet};
use strokeloc::synthcorpus::{generate_corpus, CorpusSpec};
use strokeloc::workspace::{Predictions, Workspace};

struct Server {
    base: String,
    ws: Workspace,
    _dir: tempfile::TempDir,
}

impl Server {
    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }
}

async fn start() -> Server {
    let dir = tempfile::tempdir().unwrap();
    let ws = Workspace::new(dir.path());
    let spec = CorpusSpec { n_videos: 2, frames_per_video: 200, ..CorpusSpec::default() };
    generate_corpus(&spec, &ws).unwrap();
    // Start from an empty annotation record, as a fresh corpus would.
    std::fs::remove_file(ws.gt_segments_path("synth_001")).unwrap();
    let mut buf = Vec::new();
    SegmentSet::new("synth_000", vec![Segment::new(40, 99).unwrap()]).write_json(&mut buf).unwrap();
    std::fs::write(ws.pred_segments_path("synth_000"), buf).unwrap();

    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    tokio::spawn(annotsvc::serve_on(listener, Workspace::new(dir.path())));
    Server { base, ws, _dir: dir }
}

async fn put(client: &reqwest::Client, url: &str, body: Value) -> (StatusCode, Value) {
    let r = client.put(url).json(&body).send().await.unwrap();
    (r.status(), r.json().await.unwrap())
}

#[tokio::test]
async fn lists_videos_with_meta() {
    let s = start().await;
    let v: Value = reqwest::get(s.url("/api/videos")).await.unwrap().json().await.unwrap();
    let list = v.as_array().unwrap();
    assert_eq!(list.len(), 2);
    assert_eq!(list[0]["video_id"], "synth_000");
    assert_eq!(list[0]["n_frames"], 200);
    assert_eq!(list[0]["width"], 64);
}

#[tokio::test]
async fn frame_png_is_lossless() {
    let s = start().await;
    let r = reqwest::get(s.url("/api/videos/synth_000/frame/123")).await.unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    assert_eq!(r.headers()["content-type"], "image/png");
    let png = r.bytes().await.unwrap();
    let img = image::load_from_memory_with_format(&png, image::ImageFormat::Png).unwrap().into_luma8();
    let frame = s.ws.open_video("synth_000").unwrap().frame_at(123).unwrap();
    assert_eq!((img.width(), img.height()), (frame.width(), frame.height()));
    assert_eq!(img.as_raw().as_slice(), frame.pixels());

    let past = reqwest::get(s.url("/api/videos/synth_000/frame/200")).await.unwrap();
    assert_eq!(past.status(), StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn predictions_are_the_segments_file() {
    let s = start().await;
    let r = reqwest::get(s.url("/api/videos/synth_000/predictions")).await.unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    let body = r.bytes().await.unwrap();
    assert_eq!(body.as_ref(), std::fs::read(s.ws.pred_segments_path("synth_000")).unwrap());
    assert_eq!(
        SegmentSet::read_json(body.as_ref()).unwrap(),
        s.ws.read_segments("synth_000", Predictions::Raw).unwrap()
    );
    let missing = reqwest::get(s.url("/api/videos/synth_001/predictions")).await.unwrap();
    assert_eq!(missing.status(), StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn unknown_ids_are_404() {
    let s = start().await;
    let client = reqwest::Client::new();
    for path in [
        "/api/videos/nope/frame/0",
        "/api/videos/nope/predictions",
        "/api/videos/nope/annotations",
        "/api/videos/..%2Fcorpus/annotations",
    ] {
        assert_eq!(client.get(s.url(path)).send().await.unwrap().status(), StatusCode::NOT_FOUND, "{path}");
    }
    let (status, _) = put(&client, &s.url("/api/videos/nope/annotations"), json!({"segments": [], "revision": 0})).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn round_trip_bumps_revision() {
    let s = start().await;
    let client = reqwest::Client::new();
    let url = s.url("/api/videos/synth_001/annotations");

    let empty: Value = client.get(&url).send().await.unwrap().json().await.unwrap();
    assert_eq!(empty["revision"], 0);
    assert_eq!(empty["segments"], json!([]));

    let (status, written) = put(&client, &url, json!({"segments": [[10, 89]], "revision": 0})).await;
    assert_eq!(status, StatusCode::OK);
    let read: Value = client.get(&url).send().await.unwrap().json().await.unwrap();
    assert_eq!(read, written);
    assert_eq!(read["segments"], json!([[10, 89]]));
    assert_eq!(read["revision"], 1);
    assert!(read["updated_at"].is_string());

    // The stored file is an ordinary segments file.
    let gt = s.ws.read_gt_segments("synth_001").unwrap();
    assert_eq!(gt.segments, vec![Segment::new(10, 89).unwrap()]);

    // Echoing the record back with new segments is accepted.
    let mut next = read.clone();
    next["segments"] = json!([[120, 150], [10, 30]]);
    let (status, rec) = put(&client, &url, next).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(rec["revision"], 2);
    assert_eq!(rec["segments"], json!([[10, 30], [120, 150]]));
}

#[tokio::test]
async fn stale_revision_is_409_with_current_record() {
    let s = start().await;
    let client = reqwest::Client::new();
    let url = s.url("/api/videos/synth_001/annotations");
    let (_, first) = put(&client, &url, json!({"segments": [[10, 89]], "revision": 0})).await;
    let (status, body) = put(&client, &url, json!({"segments": [[0, 5]], "revision": 0})).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body, first);
}

#[tokio::test]
async fn invalid_bodies_are_400_with_field() {
    let s = start().await;
    let client = reqwest::Client::new();
    let url = s.url("/api/videos/synth_001/annotations");
    for (body, field) in [
        (json!({"segments": [[50, 40]], "revision": 0}), "segments[0]"),
        (json!({"segments": [[0, 50], [40, 60]], "revision": 0}), "segments[1]"),
        (json!({"segments": [[0, 500]], "revision": 0}), "segments[0]"),
        (json!({"segments": [[0, 5]]}), "revision"),
        (json!({"segments": "x", "revision": 0}), "segments"),
    ] {
        let (status, err) = put(&client, &url, body).await;
        assert_eq!(status, StatusCode::BAD_REQUEST);
        assert_eq!(err["field"], field);
    }
    let r = client.put(&url).body("{not json").send().await.unwrap();
    assert_eq!(r.status(), StatusCode::BAD_REQUEST);

    let rec: Value = client.get(&url).send().await.unwrap().json().await.unwrap();
    assert_eq!(rec["revision"], 0);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_writers_one_wins() {
    let s = start().await;
    let client = reqwest::Client::new();
    let url = s.url("/api/videos/synth_001/annotations");
    for round in 0..10u64 {
        let a = put(&client, &url, json!({"segments": [[10, 20]], "revision": round}));
        let b = put(&client, &url, json!({"segments": [[30, 40]], "revision": round}));
        let ((sa, _), (sb, _)) = tokio::join!(a, b);
        let mut got = [sa, sb];
        got.sort();
        assert_eq!(got, [StatusCode::OK, StatusCode::CONFLICT], "round {round}");
    }
    let rec: Value = client.get(&url).send().await.unwrap().json().await.unwrap();
    assert_eq!(rec["revision"], 10);
    let leftovers: Vec<_> = std::fs::read_dir(s.ws.root().join("annotations"))
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().ends_with(".tmp"))
        .collect();
    assert!(leftovers.is_empty());
}
