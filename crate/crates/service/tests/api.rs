use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use talkchart::pipeline::Interpreter;
use talkchart_service::api::{router, AppState};
use talkchart_service::suggest::SuggestionIndex;
use tower::ServiceExt;

const CARS: &str = include_str!("../../core/data/carsales.csv");

fn state() -> Arc<AppState> {
    Arc::new(AppState::new(Interpreter::builtin(), SuggestionIndex::builtin()))
}

struct Reply {
    status: StatusCode,
    text: String,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_str(&self.text).unwrap_or_else(|e| panic!("{e}: {}", self.text))
    }

    fn code(&self) -> String {
        self.json()["error"]["code"].as_str().unwrap().to_string()
    }
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<&str>) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    if body.is_some() {
        req = req.header(header::CONTENT_TYPE, "application/json");
    }
    let req = req.body(Body::from(body.unwrap_or("").to_string())).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    Reply {
        status,
        text: String::from_utf8(bytes.to_vec()).unwrap(),
    }
}

async fn upload(app: &Router, csv: &str) -> Reply {
    let req = Request::post("/datasets?name=carsales").body(Body::from(csv.to_string())).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    Reply {
        status,
        text: String::from_utf8(bytes.to_vec()).unwrap(),
    }
}

async fn open(app: &Router) -> String {
    let d = upload(app, CARS).await;
    assert_eq!(d.status, StatusCode::CREATED, "{}", d.text);
    let id = d.json()["dataset_id"].as_str().unwrap().to_string();
    let s = call(app, Method::POST, "/sessions", Some(&json!({ "dataset_id": id }).to_string())).await;
    assert_eq!(s.status, StatusCode::CREATED, "{}", s.text);
    s.json()["session_id"].as_str().unwrap().to_string()
}

async fn say(app: &Router, session: &str, text: &str) -> Reply {
    let body = json!({ "text": text }).to_string();
    call(app, Method::POST, &format!("/sessions/{session}/utterances"), Some(&body)).await
}

#[tokio::test]
async fn upload_reports_columns() {
    let app = router(state());
    let r = upload(&app, CARS).await;
    let v = r.json();
    assert_eq!(v["name"], "carsales");
    assert_eq!(v["rows"], 18);
    assert_eq!(v["columns"][3], json!({ "name": "Sales", "type": "quantitative" }));
}

#[tokio::test]
async fn bad_csv() {
    let app = router(state());
    for body in ["", "a,b\n1,2,3\n", "a,A\n1,2\n"] {
        let r = upload(&app, body).await;
        assert_eq!(r.status, StatusCode::BAD_REQUEST, "{body:?}");
        assert_eq!(r.code(), "BAD_CSV");
    }
}

#[tokio::test]
async fn session_errors() {
    let app = router(state());
    let r = call(&app, Method::POST, "/sessions", Some(r#"{"dataset_id":"d99"}"#)).await;
    assert_eq!((r.status, r.code().as_str()), (StatusCode::NOT_FOUND, "UNKNOWN_DATASET"));
    for bad in ["{", r#"{"dataset":"d1"}"#, "[]"] {
        let r = call(&app, Method::POST, "/sessions", Some(bad)).await;
        assert_eq!((r.status, r.code().as_str()), (StatusCode::BAD_REQUEST, "BAD_REQUEST"), "{bad}");
    }
    let r = say(&app, "s42", "sort").await;
    assert_eq!((r.status, r.code().as_str()), (StatusCode::NOT_FOUND, "UNKNOWN_SESSION"));
    let r = call(&app, Method::GET, "/sessions/s42/history", None).await;
    assert_eq!(r.code(), "UNKNOWN_SESSION");
}

#[tokio::test]
async fn sales_by_year_recommends_bar() {
    let app = router(state());
    let s = open(&app).await;
    let v = say(&app, &s, "Sales by year").await.json();
    assert_eq!(v["actions"], json!(["{bindY, yAxis, field=Sales}", "{bindX, xAxis, field=Year}"]));
    assert_eq!(v["statuses"][1], json!({ "status": "recommended", "defaults": ["chartType=bar"] }));
    assert_eq!(v["spec"]["chartType"], "bar");
    assert_eq!(v["trace"]["labels"], json!(["B-yField", "O", "B-xField"]));
}

#[tokio::test]
async fn turn_the_red_line_blue() {
    let app = router(state());
    let s = open(&app).await;
    for text in ["sales by year", "change to line chart", "make the line red"] {
        let r = say(&app, &s, text).await;
        assert_eq!(r.status, StatusCode::OK, "{text}: {}", r.text);
    }
    let r = say(&app, &s, "turn the red line blue").await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text);
    let v = r.json();
    assert_eq!(v["actions"], json!(["{setColor, [shape=line, color=red], color=blue}"]));
    assert_eq!(v["statuses"], json!([{ "status": "applied" }]));
    assert_eq!(v["version"], 5);
    assert_eq!(v["spec"]["version"], 5);

    let spec = call(&app, Method::GET, &format!("/sessions/{s}/charts/chart1/spec"), None).await;
    assert_eq!(spec.status, StatusCode::OK);
    assert_eq!(spec.json(), v["spec"]);
}

#[tokio::test]
async fn utterance_errors() {
    let app = router(state());
    let s = open(&app).await;
    for text in ["", "   "] {
        let r = say(&app, &s, text).await;
        assert_eq!((r.status, r.code().as_str()), (StatusCode::UNPROCESSABLE_ENTITY, "PARSE_EMPTY"));
    }
    let r = say(&app, &s, "hello there").await;
    assert_eq!((r.status, r.code().as_str()), (StatusCode::UNPROCESSABLE_ENTITY, "UNSUPPORTED_OP"));
    let r = call(&app, Method::POST, &format!("/sessions/{s}/utterances"), Some(r#"{"txt":"sort"}"#)).await;
    assert_eq!(r.code(), "BAD_REQUEST");
    let r = call(&app, Method::GET, &format!("/sessions/{s}/charts/chart9/spec"), None).await;
    assert_eq!((r.status, r.code().as_str()), (StatusCode::NOT_FOUND, "UNKNOWN_CHART"));
}

#[tokio::test]
async fn clarification_is_not_an_error() {
    let app = router(state());
    let s = open(&app).await;
    let r = say(&app, &s, "make it bigger").await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json()["statuses"][0]["status"], "clarificationNeeded");
}

const SCRIPT: &[&str] = &[
    "sales by year",
    "make the bars red",
    "sort descending",
    "add a trend line in green",
    "make the title bold",
    "hide the legend",
    "make it bigger",
];

#[tokio::test]
async fn history_replay_reproduces_spec_bytes() {
    let app = router(state());
    let s = open(&app).await;
    for text in SCRIPT {
        say(&app, &s, text).await;
    }
    let spec = call(&app, Method::GET, &format!("/sessions/{s}/charts/chart1/spec"), None).await.text;
    let log = call(&app, Method::GET, &format!("/sessions/{s}/history"), None).await.text;
    assert_eq!(log.lines().count(), SCRIPT.len());

    let body = json!({ "dataset_id": "d1", "history": log }).to_string();
    let r = call(&app, Method::POST, "/sessions", Some(&body)).await;
    assert_eq!(r.json()["history_length"], SCRIPT.len());
    let copy = r.json()["session_id"].as_str().unwrap().to_string();
    let replayed = call(&app, Method::GET, &format!("/sessions/{copy}/charts/chart1/spec"), None).await.text;
    assert_eq!(replayed, spec);

    let bad = json!({ "dataset_id": "d1", "history": "not json\n" }).to_string();
    let r = call(&app, Method::POST, "/sessions", Some(&bad)).await;
    assert_eq!(r.code(), "BAD_REQUEST");
}

#[tokio::test]
async fn submission_is_deterministic() {
    let (a, b) = (router(state()), router(state()));
    let (sa, sb) = (open(&a).await, open(&b).await);
    for text in SCRIPT {
        assert_eq!(say(&a, &sa, text).await.text, say(&b, &sb, text).await.text, "{text}");
    }
}

#[tokio::test]
async fn concurrent_requests_on_one_session_all_land() {
    let app = router(state());
    let s = open(&app).await;
    say(&app, &s, "sales by year").await;
    let mut tasks = Vec::new();
    for i in 0..24 {
        let (app, s) = (app.clone(), s.clone());
        let text = if i % 2 == 0 { "make the bars red" } else { "make the bars blue" };
        tasks.push(tokio::spawn(async move { say(&app, &s, text).await.status }));
    }
    for t in tasks {
        assert_eq!(t.await.unwrap(), StatusCode::OK);
    }
    let log = call(&app, Method::GET, &format!("/sessions/{s}/history"), None).await.text;
    assert_eq!(log.lines().count(), 25);
    let info = call(&app, Method::GET, &format!("/sessions/{s}"), None).await.json();
    assert_eq!(info["history_length"], 25);
}

#[tokio::test]
async fn suggest_endpoint() {
    let app = router(state());
    let r = call(&app, Method::GET, "/suggest?prefix=add%20tr", None).await.json();
    let texts: Vec<&str> = r["suggestions"].as_array().unwrap().iter().map(|p| p["phrase"].as_str().unwrap()).collect();
    assert!(texts.contains(&"add trend line"), "{texts:?}");

    let r = call(&app, Method::GET, "/suggest?prefix=sort&k=1", None).await.json();
    assert_eq!(r["suggestions"], json!([{ "phrase": "sort", "frequency": 120 }]));
    let r = call(&app, Method::GET, "/suggest?prefix=zzz", None).await.json();
    assert_eq!(r["suggestions"], json!([]));
    let r = call(&app, Method::GET, "/suggest?prefix=sort&k=0", None).await;
    assert_eq!((r.status, r.code().as_str()), (StatusCode::BAD_REQUEST, "BAD_REQUEST"));
    let r = call(&app, Method::GET, "/suggest?k=lots", None).await;
    assert_eq!(r.code(), "BAD_REQUEST");
}

#[tokio::test]
async fn snapshot_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let first = state();
    let app = router(Arc::clone(&first));
    let s = open(&app).await;
    for text in SCRIPT {
        say(&app, &s, text).await;
    }
    let spec = call(&app, Method::GET, &format!("/sessions/{s}/charts/chart1/spec"), None).await.text;
    first.snapshot(dir.path()).await.unwrap();

    let second = state();
    second.restore(dir.path()).unwrap();
    let app = router(second);
    let restored = call(&app, Method::GET, &format!("/sessions/{s}/charts/chart1/spec"), None).await.text;
    assert_eq!(restored, spec);
    // fresh ids do not collide with restored ones
    let s2 = open(&app).await;
    assert_ne!(s2, s);
}

#[test]
fn restore_of_missing_dir_is_empty() {
    state().restore(std::path::Path::new("/nonexistent/snapshot")).unwrap();
}
