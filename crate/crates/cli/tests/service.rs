use std::sync::{Arc, OnceLock};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use http_body_util::BodyExt;
use serde::de::DeserializeOwned;
use serde_json::json;
use tower::ServiceExt;

use bpl_cli::service::{
    image_payload, router, AppState, ErrorBody, LoggedResponse, Prediction, ResponseResult, TrialDetail, TrialSummary,
};
use bpl_core::config::RunConfig;
use bpl_core::files::Suite;
use bpl_core::harness::{evaluate_generation, Condition};
use bpl_core::render::decode_pbm;

fn suite() -> &'static Suite {
    static SUITE: OnceLock<Suite> = OnceLock::new();
    SUITE.get_or_init(|| {
        let mut cfg = RunConfig::default();
        cfg.suite.generation = 3;
        cfg.suite.classification = 1;
        Suite::sample(&cfg, &Condition::ALL).unwrap()
    })
}

fn app() -> Router {
    let s = suite();
    let cfg = RunConfig::default();
    router(Arc::new(AppState::new(s.generation.clone(), cfg.grammar().unwrap(), s.render.clone(), 40, 20, 7)))
}

async fn send<T: DeserializeOwned>(app: &Router, req: Request<Body>) -> (StatusCode, T) {
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&bytes))))
}

fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

fn post(uri: &str, body: serde_json::Value) -> Request<Body> {
    Request::post(uri).header("content-type", "application/json").body(Body::from(body.to_string())).unwrap()
}

#[tokio::test]
async fn lists_every_generation_trial() {
    let (status, list): (_, Vec<TrialSummary>) = send(&app(), get("/v1/trials")).await;
    assert_eq!(status, StatusCode::OK);
    let s = suite();
    assert_eq!(list.len(), s.generation.len());
    for (row, t) in list.iter().zip(&s.generation) {
        assert_eq!((&row.id, row.condition, row.segments), (&t.id, t.condition, t.m()));
    }
}

#[tokio::test]
async fn trial_detail_carries_images_and_segments() {
    let t = &suite().generation[0];
    let (status, d): (_, TrialDetail) = send(&app(), get(&format!("/v1/trials/{}", t.id))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(d.segments.len(), t.m());
    assert_eq!(d.observed.len(), t.observed.len());
    for (img, (depth, expected)) in d.observed.iter().zip(&t.observed) {
        assert_eq!(img.depth, *depth);
        assert_eq!(decode_pbm(&STANDARD.decode(&img.pbm).unwrap()).unwrap(), *expected);
    }
    let display = decode_pbm(&STANDARD.decode(&d.display).unwrap()).unwrap();
    assert_eq!(display, t.interface.image(&vec![false; t.m()]).unwrap());
    assert_eq!((d.width, d.height), (display.resolution().width, display.resolution().height));
}

#[tokio::test]
async fn truth_is_an_exact_match_and_all_off_matches_the_harness() {
    let app = app();
    let t = &suite().generation[1];
    let uri = format!("/v1/trials/{}/response", t.id);
    let truth = t.interface.truth_assignment();
    let (status, r): (_, ResponseResult) = send(&app, post(&uri, json!({ "assignment": truth }))).await;
    assert_eq!(status, StatusCode::OK);
    assert!(r.exact_match);
    assert_eq!(r.segment_accuracy, 1.0);
    assert_eq!(r.image, image_payload(&t.truth_image));

    let off = vec![false; t.m()];
    let (_, r2): (_, ResponseResult) =
        send(&app, post(&uri, json!({ "assignment": off, "session": r.session }))).await;
    let expected = evaluate_generation(&off, t).unwrap();
    assert_eq!(r2.segment_accuracy, expected.segment_accuracy);
    assert_eq!(r2.exact_match, expected.exact_visual_match);
    assert_eq!(r2.session, r.session);

    let (status, log): (_, Vec<LoggedResponse>) = send(&app, get(&format!("/v1/sessions/{}", r.session))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(log.len(), 2);
    assert_eq!(log[0].assignment, truth);
    assert_eq!(log[1].segment_accuracy, expected.segment_accuracy);
}

#[tokio::test]
async fn rejects_bad_requests() {
    let app = app();
    let t = &suite().generation[0];
    let (status, e): (_, ErrorBody) =
        send(&app, post(&format!("/v1/trials/{}/response", t.id), json!({ "assignment": [true] }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(e.error.contains("segments"));
    let (status, _): (_, ErrorBody) = send(&app, get("/v1/trials/nope")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let body = json!({ "assignment": vec![false; t.m()], "session": "s999999" });
    let (status, _): (_, ErrorBody) = send(&app, post(&format!("/v1/trials/{}/response", t.id), body)).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _): (_, ErrorBody) = send(&app, get("/v1/sessions/s000042")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn predictions_are_deterministic_per_seed() {
    let app = app();
    let t = suite().generation.iter().find(|t| t.condition == Condition::Block).unwrap();
    let uri = format!("/v1/trials/{}/prediction?seed=3", t.id);
    let (status, a): (_, Prediction) = send(&app, get(&uri)).await;
    assert_eq!(status, StatusCode::OK);
    let (_, b): (_, Prediction) = send(&app, get(&uri)).await;
    assert_eq!(a, b);
    assert_eq!(a.steps, 20);
    assert_eq!(a.assignment.len(), t.m());
    let score = evaluate_generation(&a.assignment, t).unwrap();
    assert_eq!((a.segment_accuracy, a.exact_match), (score.segment_accuracy, score.exact_visual_match));
    let (_, default_seed): (_, Prediction) = send(&app, get(&format!("/v1/trials/{}/prediction", t.id))).await;
    assert_eq!(default_seed.seed, 7);
}
