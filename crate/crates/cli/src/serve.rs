//! JSON-over-HTTP inference on an immutable model snapshot.

use std::sync::{Arc, OnceLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::{HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::{AllowOrigin, CorsLayer};

use selftrip_core::corpus::{PoiTable, Query};
use selftrip_core::selftrain::Model;
use selftrip_core::{Error, ErrorKind};

pub struct Snapshot {
    pub model: Model,
    pub version: String,
}

/// POI table plus a model that is set once, after loading finishes.
pub struct ServiceState {
    pub pois: PoiTable,
    snapshot: OnceLock<Snapshot>,
}

impl ServiceState {
    pub fn new(pois: PoiTable) -> Self {
        ServiceState { pois, snapshot: OnceLock::new() }
    }

    pub fn with_model(pois: PoiTable, model: Model) -> Self {
        let s = ServiceState::new(pois);
        s.install(model);
        s
    }

    /// First call wins; later calls are ignored.
    pub fn install(&self, model: Model) {
        let version = model.version();
        let _ = self.snapshot.set(Snapshot { model, version });
    }

    pub fn snapshot(&self) -> Option<&Snapshot> {
        self.snapshot.get()
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecommendRequest {
    pub start_poi: String,
    pub end_poi: String,
    pub start_hour: u8,
    pub end_hour: u8,
    pub n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PoiDetail {
    pub id: String,
    pub lon: f64,
    pub lat: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RecommendResponse {
    pub trip: Vec<String>,
    pub poi_details: Vec<PoiDetail>,
    pub model_version: String,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

fn status_of(e: &Error) -> StatusCode {
    match e {
        Error::Infeasible(_) => StatusCode::UNPROCESSABLE_ENTITY,
        e if e.kind() == ErrorKind::Numeric => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::BAD_REQUEST,
    }
}

fn detail(pois: &PoiTable, id: &str) -> PoiDetail {
    let p = pois.get(id).expect("model vocabulary is the POI table");
    PoiDetail { id: p.id.clone(), lon: p.lon, lat: p.lat }
}

async fn health(State(state): State<Arc<ServiceState>>) -> Response {
    match state.snapshot() {
        Some(s) => Json(json!({ "status": "ok", "model_version": s.version })).into_response(),
        None => (StatusCode::SERVICE_UNAVAILABLE, Json(json!({ "status": "loading", "model_version": null }))).into_response(),
    }
}

async fn pois(State(state): State<Arc<ServiceState>>) -> Json<Vec<PoiDetail>> {
    Json(state.pois.iter().map(|p| PoiDetail { id: p.id.clone(), lon: p.lon, lat: p.lat }).collect())
}

async fn recommend(State(state): State<Arc<ServiceState>>, body: Result<Json<RecommendRequest>, JsonRejection>) -> Response {
    let Json(req) = match body {
        Ok(b) => b,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.body_text()),
    };
    let Some(snap) = state.snapshot() else {
        return error(StatusCode::SERVICE_UNAVAILABLE, "model is still loading");
    };
    let query = Query {
        start_poi: req.start_poi,
        start_hour: req.start_hour,
        end_poi: req.end_poi,
        end_hour: req.end_hour,
        n: req.n,
    };
    match snap.model.recommend(&query) {
        Ok(trip) => {
            let poi_details = trip.iter().map(|id| detail(&state.pois, id)).collect();
            Json(RecommendResponse { trip, poi_details, model_version: snap.version.clone() }).into_response()
        }
        Err(e) => error(status_of(&e), e.to_string()),
    }
}

/// `None` allows any origin.
pub fn router(state: Arc<ServiceState>, cors_origin: Option<&str>) -> Router {
    let origin = match cors_origin {
        Some(o) => AllowOrigin::exact(HeaderValue::from_str(o).unwrap_or(HeaderValue::from_static("null"))),
        None => AllowOrigin::any(),
    };
    let cors = CorsLayer::new()
        .allow_origin(origin)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([axum::http::header::CONTENT_TYPE]);
    Router::new()
        .route("/health", get(health))
        .route("/pois", get(pois))
        .route("/recommend", post(recommend))
        .layer(cors)
        .with_state(state)
}
