use axum::body::Bytes;
use axum::extract::{FromRequest, Request};
use pmresched::disruption::Event;
use pmresched::{Task, Technician};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

use crate::error::ApiError;

/// JSON body extractor whose errors name the offending field.
///
/// An empty body is read as `{}` so endpoints with all-optional payloads can
/// be called without one.
#[derive(Debug, Clone)]
pub struct Json<T>(pub T);

impl<T, S> FromRequest<S> for Json<T>
where
    T: DeserializeOwned,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        let bytes = Bytes::from_request(req, state)
            .await
            .map_err(|e| ApiError::validation("body", e.body_text()))?;
        parse(&bytes).map(Json)
    }
}

pub(crate) fn parse<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, ApiError> {
    let bytes: &[u8] = if bytes.iter().all(u8::is_ascii_whitespace) {
        b"{}"
    } else {
        bytes
    };
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(de).map_err(|err| {
        let path = err.path().to_string();
        let field = if path == "." || path == "?" {
            "body".to_string()
        } else {
            path
        };
        ApiError::validation(field, err.into_inner().to_string())
    })
}

/// Disruption event body.
///
/// Internally tagged enums lose the field path when they fail, so the payload
/// is first checked against the shape of its `kind`.
#[derive(Debug, Clone)]
pub struct EventBody(pub Event);

impl<S: Send + Sync> FromRequest<S> for EventBody {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        let Json(value) = Json::<Value>::from_request(req, state).await?;
        parse_event(value).map(EventBody)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
enum Shape {
    E1 {
        technician: Technician,
    },
    E2 {
        technician_id: String,
        #[serde(default)]
        effective_from: Option<u32>,
    },
    E3 {
        tasks: Vec<Task>,
    },
    E4 {
        task_ids: Vec<String>,
    },
}

pub(crate) fn parse_event(mut value: Value) -> Result<Event, ApiError> {
    let kind = match value.as_object_mut().and_then(|o| o.remove("kind")) {
        Some(Value::String(kind)) => kind,
        _ => return Err(ApiError::validation("kind", "expected one of `E1`, `E2`, `E3`, `E4`")),
    };
    let shaped = Value::Object([(kind.clone(), value.clone())].into_iter().collect());
    serde_path_to_error::deserialize::<_, Shape>(shaped).map_err(|err| {
        let path = err.path().to_string();
        let field = match path.split_once('.') {
            Some((_, rest)) if !rest.is_empty() => rest.to_string(),
            _ => "kind".to_string(),
        };
        ApiError::validation(field, err.into_inner().to_string())
    })?;
    if let Some(object) = value.as_object_mut() {
        object.insert("kind".into(), Value::String(kind));
    }
    serde_json::from_value(value).map_err(|e| ApiError::validation("body", e.to_string()))
}
