use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::{json, Value};
use troubleshoot::http::{ClientOptions, HttpEmbedder, HttpGenerator};
use troubleshoot_core::{Adapter, BackendError, ChatMessage, Embedder, GenerationParams, GenerationRequest, Generator};

#[derive(Clone, Default)]
struct Fake {
    calls: Arc<AtomicUsize>,
    /// Calls answered with `fail_status` before the server starts behaving.
    failures: usize,
    fail_status: u16,
    dimension: usize,
    /// Dimension actually returned by /embed.
    served_dimension: usize,
    last_body: Arc<Mutex<Value>>,
}

impl Fake {
    fn new(dimension: usize) -> Self {
        Fake {
            dimension,
            served_dimension: dimension,
            fail_status: 503,
            ..Default::default()
        }
    }

    fn gate(&self, body: &Value) -> Result<(), (StatusCode, Json<Value>)> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        *self.last_body.lock().unwrap() = body.clone();
        if n < self.failures {
            let status = StatusCode::from_u16(self.fail_status).unwrap();
            return Err((status, Json(json!({"error": "go away"}))));
        }
        Ok(())
    }
}

type Reply = Result<Json<Value>, (StatusCode, Json<Value>)>;

async fn info(State(f): State<Fake>) -> Json<Value> {
    Json(json!({"dimension": f.dimension}))
}

async fn embed(State(f): State<Fake>, Json(body): Json<Value>) -> Reply {
    f.gate(&body)?;
    let texts = body["texts"].as_array().unwrap();
    let embeddings: Vec<Vec<f32>> = texts
        .iter()
        .map(|t| {
            let len = t.as_str().unwrap().len() as f32;
            (0..f.served_dimension).map(|i| len + i as f32).collect()
        })
        .collect();
    Ok(Json(json!({"embeddings": embeddings})))
}

async fn generate(State(f): State<Fake>, Json(body): Json<Value>) -> Reply {
    f.gate(&body)?;
    let last = body["messages"].as_array().unwrap().last().unwrap()["content"].clone();
    Ok(Json(json!({"text": format!("echo: {}", last.as_str().unwrap())})))
}

fn serve(fake: Fake) -> String {
    let app = Router::new()
        .route("/info", get(info))
        .route("/embed", post(embed))
        .route("/generate", post(generate))
        .with_state(fake);
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    format!("http://{}", rx.recv().unwrap())
}

fn fast(retries: u32) -> ClientOptions {
    ClientOptions {
        timeout_ms: 5_000,
        retries,
        backoff_ms: 1,
        max_concurrency: 4,
    }
}

fn request() -> GenerationRequest {
    GenerationRequest::new(
        Some(Adapter::Routing),
        vec![ChatMessage::system("sys"), ChatMessage::user("which team?")],
        GenerationParams::default().with_temperature(0.5).with_seed(9),
    )
    .unwrap()
}

#[test]
fn embedder_reads_dimension_from_info_and_embeds_in_order() {
    let fake = Fake::new(3);
    let url = serve(fake.clone());
    let e = HttpEmbedder::connect(&url, "m1", None, fast(0)).unwrap();
    assert_eq!(e.dimension(), 3);
    assert!(e.id().contains("m1"));
    let out = e.embed(&["a", "abcd"]).unwrap();
    assert_eq!(out[0].values(), &[1.0, 2.0, 3.0]);
    assert_eq!(out[1].values(), &[4.0, 5.0, 6.0]);
    assert_eq!(*fake.last_body.lock().unwrap(), json!({"model": "m1", "texts": ["a", "abcd"]}));
    assert!(e.embed(&[]).unwrap().is_empty());
}

#[test]
fn embedder_rejects_wrong_dimension() {
    let fake = Fake {
        served_dimension: 2,
        ..Fake::new(3)
    };
    let e = HttpEmbedder::connect(&serve(fake), "m", None, fast(0)).unwrap();
    match e.embed(&["x"]) {
        Err(BackendError::Contract(msg)) => assert!(msg.contains("dimension 2"), "{msg}"),
        other => panic!("expected contract error, got {other:?}"),
    }
}

#[test]
fn zero_dimension_is_a_contract_error() {
    let err = HttpEmbedder::connect(&serve(Fake::new(0)), "m", None, fast(0)).unwrap_err();
    assert!(matches!(err, BackendError::Contract(_)));
}

#[test]
fn transient_failures_are_retried() {
    for status in [503, 429] {
        let fake = Fake {
            failures: 2,
            fail_status: status,
            ..Fake::new(4)
        };
        let url = serve(fake.clone());
        let g = HttpGenerator::new(&url, "gen", true, fast(2));
        assert_eq!(g.generate(&request()).unwrap(), "echo: which team?");
        assert_eq!(fake.calls.load(Ordering::SeqCst), 3);
    }
}

#[test]
fn retries_are_bounded() {
    let fake = Fake {
        failures: 10,
        ..Fake::new(4)
    };
    let url = serve(fake.clone());
    let g = HttpGenerator::new(&url, "gen", false, fast(2));
    assert!(matches!(g.generate(&request()), Err(BackendError::Transport(_))));
    assert_eq!(fake.calls.load(Ordering::SeqCst), 3);
    assert!(!g.supports_prefill());
}

#[test]
fn client_errors_are_refusals_and_not_retried() {
    let fake = Fake {
        failures: 10,
        fail_status: 400,
        ..Fake::new(4)
    };
    let url = serve(fake.clone());
    let e = HttpEmbedder::connect(&url, "m", Some(4), fast(3)).unwrap();
    match e.embed(&["x"]) {
        Err(BackendError::Refused(msg)) => assert_eq!(msg, "HTTP 400: go away"),
        other => panic!("expected refusal, got {other:?}"),
    }
    assert_eq!(fake.calls.load(Ordering::SeqCst), 1);
}

#[test]
fn generator_sends_adapter_params_and_messages() {
    let fake = Fake::new(4);
    let url = serve(fake.clone());
    let g = HttpGenerator::new(&format!("{url}/"), "gen", true, fast(0));
    g.generate(&request()).unwrap();
    let body = fake.last_body.lock().unwrap().clone();
    assert_eq!(body["model"], "gen");
    assert_eq!(body["adapter"], "routing");
    assert_eq!(body["temperature"], 0.5);
    assert_eq!(body["seed"], 9);
    assert_eq!(body["messages"][0], json!({"role": "system", "content": "sys"}));
}

#[test]
fn invalid_requests_never_reach_the_wire() {
    let fake = Fake::new(4);
    let g = HttpGenerator::new(&serve(fake.clone()), "gen", true, fast(0));
    let mut req = request();
    req.params.top_k = 0;
    assert!(matches!(g.generate(&req), Err(BackendError::Precondition(_))));
    assert_eq!(fake.calls.load(Ordering::SeqCst), 0);
}

#[test]
fn unreachable_server_is_a_transport_error() {
    let g = HttpGenerator::new("http://127.0.0.1:9", "gen", true, fast(1));
    assert!(matches!(g.generate(&request()), Err(BackendError::Transport(_))));
}
