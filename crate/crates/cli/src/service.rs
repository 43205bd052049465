//! HTTP interface to the generation trials under `/v1`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use bpl_core::exec::Exec;
use bpl_core::grammar::MetaGrammar;
use bpl_core::harness::{evaluate_generation, simulate_generation_responses, Condition, GenerationTrial, SegmentView};
use bpl_core::render::{encode_pbm, BinaryImage, RenderSettings};
use bpl_core::seed;

/// Immutable service data plus the response log.
pub struct AppState {
    trials: Vec<GenerationTrial>,
    grammar: MetaGrammar,
    render: RenderSettings,
    steps_incremental: usize,
    steps_block: usize,
    seed: u64,
    sessions: Mutex<Sessions>,
}

#[derive(Default)]
struct Sessions {
    next: u64,
    logs: HashMap<String, Vec<LoggedResponse>>,
}

impl AppState {
    pub fn new(
        trials: Vec<GenerationTrial>,
        grammar: MetaGrammar,
        render: RenderSettings,
        steps_incremental: usize,
        steps_block: usize,
        seed: u64,
    ) -> Self {
        AppState {
            trials,
            grammar,
            render,
            steps_incremental,
            steps_block,
            seed,
            sessions: Mutex::new(Sessions::default()),
        }
    }

    fn find(&self, id: &str) -> Result<(usize, &GenerationTrial), ApiError> {
        self.trials
            .iter()
            .enumerate()
            .find(|(_, t)| t.id == id)
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown trial {id:?}")))
    }

    fn steps_for(&self, condition: Condition) -> usize {
        match condition {
            Condition::Incremental => self.steps_incremental,
            Condition::Block => self.steps_block,
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/trials", get(list_trials))
        .route("/v1/trials/{id}", get(get_trial))
        .route("/v1/trials/{id}/response", post(post_response))
        .route("/v1/trials/{id}/prediction", get(get_prediction))
        .route("/v1/sessions/{token}", get(get_session))
        .with_state(state)
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError { status, message: message.into() }
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

#[derive(Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorBody { error: self.message })).into_response()
    }
}

/// Base64 of the P4 (binary PBM) encoding.
pub fn image_payload(img: &BinaryImage) -> String {
    STANDARD.encode(encode_pbm(img))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub id: String,
    pub condition: Condition,
    pub segments: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepImage {
    pub depth: u8,
    pub pbm: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialDetail {
    pub id: String,
    pub condition: Condition,
    pub width: usize,
    pub height: usize,
    pub observed: Vec<StepImage>,
    /// Render of the editable display with every segment deactivated.
    pub display: String,
    /// Segments in assignment order; coordinates in the unit square, y up.
    pub segments: Vec<SegmentView>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseRequest {
    pub assignment: Vec<bool>,
    #[serde(default)]
    pub session: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseResult {
    pub trial: String,
    pub session: String,
    pub image: String,
    pub segment_accuracy: f64,
    pub exact_match: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoggedResponse {
    pub trial: String,
    pub assignment: Vec<bool>,
    pub segment_accuracy: f64,
    pub exact_match: bool,
}

#[derive(Clone, Debug, Default, Deserialize)]
pub struct PredictionQuery {
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub trial: String,
    pub seed: u64,
    pub steps: usize,
    pub assignment: Vec<bool>,
    pub image: String,
    pub segment_accuracy: f64,
    pub exact_match: bool,
}

async fn list_trials(State(state): State<Arc<AppState>>) -> Json<Vec<TrialSummary>> {
    Json(
        state
            .trials
            .iter()
            .map(|t| TrialSummary { id: t.id.clone(), condition: t.condition, segments: t.m() })
            .collect(),
    )
}

async fn get_trial(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<TrialDetail>, ApiError> {
    let (_, t) = state.find(&id)?;
    let display = t.interface.image(&t.interface.initial_assignment()).map_err(ApiError::internal)?;
    Ok(Json(TrialDetail {
        id: t.id.clone(),
        condition: t.condition,
        width: state.render.resolution.width,
        height: state.render.resolution.height,
        observed: t.observed.iter().map(|(d, img)| StepImage { depth: *d, pbm: image_payload(img) }).collect(),
        display: image_payload(&display),
        segments: t.interface.segments(),
    }))
}

async fn post_response(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<ResponseRequest>,
) -> Result<Json<ResponseResult>, ApiError> {
    let (_, t) = state.find(&id)?;
    if req.assignment.len() != t.m() {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            format!("assignment has {} entries, trial has {} segments", req.assignment.len(), t.m()),
        ));
    }
    let score = evaluate_generation(&req.assignment, t).map_err(ApiError::internal)?;
    let image = t.interface.image(&req.assignment).map_err(ApiError::internal)?;
    let mut sessions = state.sessions.lock().expect("session store lock");
    let token = match req.session {
        Some(token) if sessions.logs.contains_key(&token) => token,
        Some(token) => return Err(ApiError::new(StatusCode::NOT_FOUND, format!("unknown session {token:?}"))),
        None => {
            sessions.next += 1;
            let token = format!("s{:06}", sessions.next);
            sessions.logs.insert(token.clone(), Vec::new());
            token
        }
    };
    sessions.logs.get_mut(&token).expect("session exists").push(LoggedResponse {
        trial: t.id.clone(),
        assignment: req.assignment,
        segment_accuracy: score.segment_accuracy,
        exact_match: score.exact_visual_match,
    });
    Ok(Json(ResponseResult {
        trial: t.id.clone(),
        session: token,
        image: image_payload(&image),
        segment_accuracy: score.segment_accuracy,
        exact_match: score.exact_visual_match,
    }))
}

/// One simulated participant's response: a chain of the configured length
/// for the trial's condition, then the greedy toggle policy.
pub fn predict(state: &AppState, index: usize, seed: u64) -> Result<Prediction, ApiError> {
    let t = &state.trials[index];
    let steps = state.steps_for(t.condition);
    let p_seed = seed::derive(seed, &[index as u64]);
    let mut responses =
        simulate_generation_responses(t, &state.grammar, &state.render, &[steps], 1, p_seed, Exec::Sequential)
            .map_err(ApiError::internal)?;
    let assignment = responses.swap_remove(0).swap_remove(0);
    let score = evaluate_generation(&assignment, t).map_err(ApiError::internal)?;
    let image = t.interface.image(&assignment).map_err(ApiError::internal)?;
    Ok(Prediction {
        trial: t.id.clone(),
        seed,
        steps,
        assignment,
        image: image_payload(&image),
        segment_accuracy: score.segment_accuracy,
        exact_match: score.exact_visual_match,
    })
}

async fn get_prediction(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<PredictionQuery>,
) -> Result<Json<Prediction>, ApiError> {
    let (index, _) = state.find(&id)?;
    let seed = q.seed.unwrap_or(state.seed);
    let worker = state.clone();
    tokio::task::spawn_blocking(move || predict(&worker, index, seed))
        .await
        .map_err(ApiError::internal)?
        .map(Json)
}

async fn get_session(
    State(state): State<Arc<AppState>>,
    Path(token): Path<String>,
) -> Result<Json<Vec<LoggedResponse>>, ApiError> {
    let sessions = state.sessions.lock().expect("session store lock");
    sessions
        .logs
        .get(&token)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session {token:?}")))
}
