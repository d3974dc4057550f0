use std::collections::BTreeMap;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use rand::{rngs::StdRng, SeedableRng};
use serde_json::Value;
use spiar_core::demo::{demo_app, form_ids};
use spiar_core::testkit::{random_app, random_event};
use spiar_core::traffic::replay;
use spiar_core::{
    decode_server, encode_client, ApplicationDefinition, DeltaClientMessage, DeltaServerMessage,
    Engine, Runtime, StateWrite, UserEvent,
};
use spiar_http::{extract_bootstrap, router, Server, ServerConfig};
use tower::ServiceExt;

struct Harness {
    server: Server,
    http: reqwest::Client,
    base: String,
    _assets: tempfile::TempDir,
}

fn assets_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("engine.js"), "console.log('engine');\n").unwrap();
    dir
}

impl Harness {
    async fn start(runtime: Runtime, tweak: impl FnOnce(&mut ServerConfig)) -> Self {
        let assets = assets_dir();
        let mut config = ServerConfig::new("127.0.0.1:0".parse().unwrap(), assets.path());
        tweak(&mut config);
        let server = Server::start(config, runtime).await.unwrap();
        let base = format!("http://{}", server.local_addr());
        Harness {
            server,
            http: reqwest::Client::new(),
            base,
            _assets: assets,
        }
    }

    async fn demo() -> Self {
        Self::start(Runtime::new(demo_app()), |_| {}).await
    }

    async fn get(&self, path: &str) -> (StatusCode, String) {
        let r = self
            .http
            .get(format!("{}{path}", self.base))
            .send()
            .await
            .unwrap();
        (r.status(), r.text().await.unwrap())
    }

    async fn open(&self, view: Option<&str>) -> Engine {
        let path = match view {
            Some(v) => format!("/app?view={v}"),
            None => "/app".into(),
        };
        let (status, html) = self.get(&path).await;
        assert_eq!(status, StatusCode::OK);
        Engine::bootstrap(&extract_bootstrap(&html).unwrap(), view).unwrap()
    }

    async fn post_raw(&self, body: Vec<u8>) -> (StatusCode, Vec<u8>) {
        let r = self
            .http
            .post(format!("{}/app/delta", self.base))
            .header("content-type", "application/json")
            .body(body)
            .send()
            .await
            .unwrap();
        (r.status(), r.bytes().await.unwrap().to_vec())
    }

    async fn post(&self, msg: &DeltaClientMessage) -> (StatusCode, Vec<u8>) {
        self.post_raw(encode_client(msg).unwrap()).await
    }

    async fn exchange(&self, engine: &mut Engine, msg: &DeltaClientMessage) -> DeltaServerMessage {
        let (status, body) = self.post(msg).await;
        assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
        let response = decode_server(&body).unwrap();
        engine.apply_server_delta(&response).unwrap();
        response
    }
}

fn json(body: &[u8]) -> Value {
    serde_json::from_slice(body).unwrap()
}

fn validate_click(engine: &mut Engine) -> DeltaClientMessage {
    let content = &engine.model().root().unwrap().children[1];
    let ids = form_ids(&content.children.iter().map(|n| n.id).collect::<Vec<_>>()).unwrap();
    engine
        .simulate_event(UserEvent::action(ids.validate))
        .unwrap()
        .unwrap()
}

#[tokio::test]
async fn bootstrap_page_embeds_the_initial_message() {
    let h = Harness::demo().await;
    let (status, html) = h.get("/app").await;
    assert_eq!(status, StatusCode::OK);
    assert!(html.contains(r#"<script src="/assets/engine.js"></script>"#));
    let boot = extract_bootstrap(&html).unwrap();
    assert_eq!(boot.ack, 0);
    assert_eq!(boot.directives.len(), 1);
    assert!(!boot.session.is_empty());
    let engine = Engine::bootstrap(&boot, None).unwrap();
    assert_eq!(
        engine.model(),
        &h.server.runtime().render(&boot.session).unwrap()
    );
}

#[tokio::test]
async fn view_query_selects_the_fragment_tree() {
    let h = Harness::demo().await;
    let engine = h.open(Some("list")).await;
    assert_eq!(engine.fragment(), Some("list"));
    let direct = Runtime::new(demo_app());
    let (_, boot) = direct.create_session(Some("list")).unwrap();
    assert_eq!(
        engine.model(),
        Engine::bootstrap(&boot, Some("list")).unwrap().model()
    );

    let (status, body) = h.get("/app?view=nope").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body, r#"{"error":"unknown_view","view":"nope"}"#);
    assert_eq!(h.server.runtime().session_count(), 1);
}

#[tokio::test]
async fn delta_exchange_and_retry() {
    let h = Harness::demo().await;
    let mut engine = h.open(None).await;
    let msg = validate_click(&mut engine);
    let (status, first) = h.post(&msg).await;
    assert_eq!(status, StatusCode::OK);
    let response = decode_server(&first).unwrap();
    assert_eq!(response.ack, msg.seq);
    assert!(!response.directives.is_empty());

    let (status, again) = h.post(&msg).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(again, first, "retry is answered from the cache");

    engine.apply_server_delta(&response).unwrap();
    assert_eq!(
        engine.model(),
        &h.server.runtime().render(engine.session()).unwrap()
    );
}

#[tokio::test]
async fn error_statuses() {
    let h = Harness::demo().await;
    let mut engine = h.open(None).await;

    let mut stranger = validate_click(&mut engine);
    stranger.session = "0123".into();
    let (status, body) = h.post(&stranger).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body, br#"{"error":"unknown_session"}"#);

    let (status, body) = h.post_raw(b"{not json".to_vec()).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(json(&body)["error"], "malformed_message");

    let mut ahead = validate_click_fresh(&h).await;
    ahead.seq = 5;
    let (status, body) = h.post(&ahead).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body, br#"{"error":"out_of_order","expected":1,"got":5}"#);

    let mut bad_write = validate_click_fresh(&h).await;
    bad_write.state_changes.push(StateWrite {
        id: spiar_core::ComponentId::new(1).unwrap(),
        name: "title".into(),
        value: "hijack".into(),
    });
    let (status, body) = h.post(&bad_write).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(json(&body)["error"], "rejected");

    let (status, _) = h.get("/app/delta").await;
    assert_eq!(status, StatusCode::METHOD_NOT_ALLOWED);
}

async fn validate_click_fresh(h: &Harness) -> DeltaClientMessage {
    let mut engine = h.open(None).await;
    validate_click(&mut engine)
}

#[tokio::test]
async fn assets_are_served_without_escape() {
    let h = Harness::demo().await;
    let (status, body) = h.get("/assets/engine.js").await;
    assert_eq!(status, StatusCode::OK);
    assert!(body.contains("engine"));
    let r = h
        .http
        .get(format!("{}/assets/engine.js", h.base))
        .send()
        .await
        .unwrap();
    assert_eq!(
        r.headers()["content-type"],
        "text/javascript; charset=utf-8"
    );
    assert_eq!(h.get("/assets/missing").await.0, StatusCode::NOT_FOUND);

    // Clients normalize dot segments, so send raw paths to the router.
    let app = router(
        h.server.runtime().clone(),
        h._assets.path().to_path_buf(),
        None,
    );
    for uri in [
        "/assets/../secret",
        "/assets/a/../../secret",
        "/assets/%2e%2e/secret",
        "/assets/..%2fsecret",
    ] {
        let response = app
            .clone()
            .oneshot(Request::builder().uri(uri).body(Body::empty()).unwrap())
            .await
            .unwrap();
        assert_eq!(response.status(), StatusCode::FORBIDDEN, "{uri}");
    }
}

#[tokio::test]
async fn distinct_sessions_run_concurrently() {
    let h = std::sync::Arc::new(Harness::demo().await);
    let mut tasks = Vec::new();
    for _ in 0..16 {
        let h = h.clone();
        tasks.push(tokio::spawn(async move {
            let mut engine = h.open(None).await;
            for _ in 0..5 {
                let msg = validate_click(&mut engine);
                h.exchange(&mut engine, &msg).await;
            }
            assert_eq!(
                engine.model(),
                &h.server.runtime().render(engine.session()).unwrap()
            );
            engine.next_seq()
        }));
    }
    for task in tasks {
        assert_eq!(task.await.unwrap(), 6);
    }
    assert_eq!(h.server.runtime().session_count(), 16);
}

#[tokio::test]
async fn concurrent_requests_to_one_session_are_serialized() {
    for trial in 0..10u64 {
        let h = std::sync::Arc::new(
            Harness::start(Runtime::with_seed(demo_app(), trial), |_| {}).await,
        );
        let reference = Runtime::with_seed(demo_app(), trial);
        let engine = h.open(None).await;
        let (session, _) = reference.create_session(None).unwrap();
        assert_eq!(session.as_str(), engine.session());

        let content = &engine.model().root().unwrap().children[1];
        let ids = form_ids(&content.children.iter().map(|n| n.id).collect::<Vec<_>>()).unwrap();
        let candidates: Vec<DeltaClientMessage> = (0..8)
            .map(|k| {
                let mut e = Engine::bootstrap(&reference_boot(&h, engine.session()), None).unwrap();
                e.simulate_event(UserEvent::value_change(ids.input, format!("name {k}")))
                    .unwrap();
                e.simulate_event(UserEvent::action(ids.validate))
                    .unwrap()
                    .unwrap()
            })
            .collect();

        let tasks: Vec<_> = candidates
            .iter()
            .cloned()
            .map(|msg| {
                let h = h.clone();
                tokio::spawn(async move { (h.post(&msg).await, msg) })
            })
            .collect();
        let mut accepted = Vec::new();
        let mut conflicts = 0;
        for task in tasks {
            let ((status, body), msg) = task.await.unwrap();
            match status {
                StatusCode::OK => accepted.push(msg),
                StatusCode::CONFLICT => {
                    assert_eq!(
                        json(&body),
                        serde_json::json!({"error": "out_of_order", "expected": 2, "got": 1})
                    );
                    conflicts += 1;
                }
                other => panic!("unexpected {other}"),
            }
        }
        assert_eq!(accepted.len(), 1, "trial {trial}");
        assert_eq!(conflicts, 7);
        reference.process(session.as_str(), &accepted[0]).unwrap();
        assert_eq!(
            h.server.runtime().render(engine.session()).unwrap(),
            reference.render(session.as_str()).unwrap()
        );
    }
}

/// The bootstrap a client of `session` would have received.
fn reference_boot(h: &Harness, session: &str) -> DeltaServerMessage {
    let model = h.server.runtime().render(session).unwrap();
    DeltaServerMessage {
        session: session.to_owned(),
        ack: 0,
        directives: vec![spiar_core::DeltaDirective::Create {
            parent: None,
            index: 0,
            node: model.root().unwrap().clone(),
        }],
        fragment: None,
    }
}

#[tokio::test]
async fn idle_sessions_expire() {
    let h = Harness::start(Runtime::new(demo_app()), |c| {
        c.idle_timeout = Duration::from_millis(150);
    })
    .await;
    let mut engine = h.open(None).await;
    let msg = validate_click(&mut engine);
    tokio::time::sleep(Duration::from_millis(500)).await;
    assert_eq!(h.server.runtime().session_count(), 0, "sweeper ran");
    let (status, body) = h.post(&msg).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body, br#"{"error":"unknown_session"}"#);
}

#[tokio::test]
async fn zero_timeout_is_a_config_error() {
    let assets = assets_dir();
    let mut config = ServerConfig::new("127.0.0.1:0".parse().unwrap(), assets.path());
    config.idle_timeout = Duration::ZERO;
    assert!(Server::bind(config, demo_app()).await.is_err());
}

#[tokio::test]
async fn recording_writes_two_records_per_exchange() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("traffic.log");
    let path = log.clone();
    let h = Harness::start(Runtime::new(demo_app()), move |c| c.record = Some(path)).await;
    let mut engine = h.open(None).await;
    let lines = || std::fs::read_to_string(&log).unwrap();
    assert_eq!(lines().lines().count(), 2);
    assert!(lines().starts_with("C2S "));
    let msg = validate_click(&mut engine);
    h.exchange(&mut engine, &msg).await;
    assert_eq!(lines().lines().count(), 4);

    // Failed requests are not recorded.
    let mut stale = msg.clone();
    stale.seq = 9;
    assert_eq!(h.post(&stale).await.0, StatusCode::CONFLICT);
    assert_eq!(lines().lines().count(), 4);

    let models: BTreeMap<_, _> = replay(&lines()).unwrap();
    assert_eq!(&models[engine.session()], engine.model());
    h.server.shutdown().await.unwrap();
}

async fn run_script(h: &Harness, direct: &Runtime, app_seed: u64, exchanges: usize) -> usize {
    let mut engine = h.open(None).await;
    let (session, _) = direct.create_session(None).unwrap();
    assert_eq!(session.as_str(), engine.session());
    let mut rng = StdRng::seed_from_u64(app_seed);
    let mut done = 0;
    let mut steps = 0;
    while done < exchanges && steps < exchanges * 20 {
        steps += 1;
        let msg = match random_event(&mut rng, engine.model()) {
            Some(ev) => match engine.simulate_event(ev) {
                Ok(Some(msg)) => msg,
                Ok(None) => continue,
                Err(e) => panic!("{e}"),
            },
            None => engine.navigate("v0").unwrap(),
        };
        let over_http = h.exchange(&mut engine, &msg).await;
        let direct_response = direct.process(session.as_str(), &msg).unwrap();
        assert_eq!(over_http, direct_response);
        done += 1;
    }
    assert_eq!(
        h.server.runtime().render(engine.session()).unwrap(),
        direct.render(session.as_str()).unwrap()
    );
    assert_eq!(engine.model(), &direct.render(session.as_str()).unwrap());
    done
}

fn app(seed: u64) -> ApplicationDefinition {
    random_app(seed, 60, 2)
}

#[tokio::test]
async fn transport_adds_and_removes_nothing() {
    let mut total = 0;
    for seed in 0..10 {
        let h = Harness::start(Runtime::with_seed(app(seed), seed), |_| {}).await;
        let direct = Runtime::with_seed(app(seed), seed);
        total += run_script(&h, &direct, seed, 20).await;
    }
    assert!(total >= 150, "{total}");
}
