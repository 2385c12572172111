//! JSON-over-HTTP routes.

use std::future::Future;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use serde_json::{json, Map, Value};
use tokio::net::TcpListener;

use slasel_core::config::ModelConfig;

use crate::{Gateway, GatewayError, InferRequest};

impl GatewayError {
    pub fn status(&self) -> StatusCode {
        match self {
            GatewayError::MissingField(_)
            | GatewayError::InvalidField { .. }
            | GatewayError::MalformedBody(_)
            | GatewayError::Budget(_)
            | GatewayError::Registry(_) => StatusCode::BAD_REQUEST,
            GatewayError::EmptyRegistry | GatewayError::NotWarmedUp => StatusCode::SERVICE_UNAVAILABLE,
            GatewayError::Duplicate(_) => StatusCode::CONFLICT,
            GatewayError::UnknownModel(_) => StatusCode::NOT_FOUND,
            GatewayError::Policy(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for GatewayError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "code": self.code(), "message": self.to_string() } });
        (self.status(), Json(body)).into_response()
    }
}

pub fn router(gateway: Arc<Gateway>) -> Router {
    Router::new()
        .route("/v1/infer", post(infer))
        .route("/v1/models", get(list_models).post(register_model))
        .route("/v1/metrics", get(metrics))
        .route("/v1/profiles/reset", post(reset))
        .with_state(gateway)
}

/// Serves until `shutdown` resolves. Also runs the stale-profile probe loop.
pub async fn serve<F>(listener: TcpListener, gateway: Arc<Gateway>, shutdown: F) -> std::io::Result<()>
where
    F: Future<Output = ()> + Send + 'static,
{
    let probes = gateway.spawn_probe_loop();
    let result = axum::serve(listener, router(gateway))
        .with_graceful_shutdown(shutdown)
        .await;
    if let Some(p) = probes {
        p.abort();
    }
    result
}

// Bodies are parsed by hand so each failure maps to a stable error code.
fn parse_object(body: &[u8]) -> Result<Map<String, Value>, GatewayError> {
    match serde_json::from_slice::<Value>(body) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(GatewayError::MalformedBody("expected a JSON object".into())),
        Err(e) => Err(GatewayError::MalformedBody(e.to_string())),
    }
}

fn number(obj: &Map<String, Value>, field: &'static str) -> Result<Option<f64>, GatewayError> {
    match obj.get(field) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v.as_f64().map(Some).ok_or(GatewayError::InvalidField {
            field,
            reason: "expected a number".into(),
        }),
    }
}

fn required_number(obj: &Map<String, Value>, field: &'static str) -> Result<f64, GatewayError> {
    number(obj, field)?.ok_or(GatewayError::MissingField(field))
}

fn string(obj: &Map<String, Value>, field: &'static str) -> Result<Option<String>, GatewayError> {
    match obj.get(field) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(GatewayError::InvalidField {
            field,
            reason: "expected a string".into(),
        }),
    }
}

pub fn parse_infer(body: &[u8]) -> Result<InferRequest, GatewayError> {
    let obj = parse_object(body)?;
    let sla_ms = required_number(&obj, "sla_ms")?;
    let client_start_ts_ms = required_number(&obj, "client_start_ts_ms")?;
    let payload_bytes = match string(&obj, "payload_b64")? {
        None => 0,
        Some(p) => base64::engine::general_purpose::STANDARD
            .decode(p.as_bytes())
            .map_err(|e| GatewayError::InvalidField {
                field: "payload_b64",
                reason: e.to_string(),
            })?
            .len(),
    };
    Ok(InferRequest {
        sla_ms,
        client_start_ts_ms,
        payload_bytes,
        request_id: string(&obj, "request_id")?,
        truth_label: string(&obj, "truth_label")?,
    })
}

pub fn parse_model(body: &[u8]) -> Result<ModelConfig, GatewayError> {
    let obj = parse_object(body)?;
    let id = string(&obj, "id")?.ok_or(GatewayError::MissingField("id"))?;
    let mut m = ModelConfig::new(
        &id,
        required_number(&obj, "accuracy")?,
        required_number(&obj, "true_mean_ms")?,
        required_number(&obj, "true_std_ms")?,
    );
    m.seed_mean_ms = number(&obj, "seed_mean_ms")?;
    m.seed_std_ms = number(&obj, "seed_std_ms")?;
    if m.seed_std_ms.is_some() && m.seed_mean_ms.is_none() {
        return Err(GatewayError::MissingField("seed_mean_ms"));
    }
    Ok(m)
}

async fn infer(State(gw): State<Arc<Gateway>>, body: Bytes) -> Result<Response, GatewayError> {
    let req = parse_infer(&body)?;
    let resp = gw.handle_infer(req).await?;
    Ok(Json(resp).into_response())
}

async fn list_models(State(gw): State<Arc<Gateway>>) -> Response {
    Json(gw.list_models()).into_response()
}

async fn register_model(State(gw): State<Arc<Gateway>>, body: Bytes) -> Result<Response, GatewayError> {
    let model = parse_model(&body)?;
    let view = gw.register_model(&model)?;
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn metrics(State(gw): State<Arc<Gateway>>) -> Response {
    Json(gw.metrics()).into_response()
}

async fn reset(State(gw): State<Arc<Gateway>>) -> StatusCode {
    gw.reset_profiles();
    StatusCode::NO_CONTENT
}
