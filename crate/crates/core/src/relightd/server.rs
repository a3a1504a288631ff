//! HTTP preview service. Resources (stacks, environments) are uploaded once
//! and addressed by content-derived ids; every render endpoint is a pure
//! function of its query.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, OnceLock, RwLock};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::Semaphore;

use super::{content_hash, encode_image, parse_direction, ImageFormat};
use crate::compositor::{area_light_target, composite_values, relight_hdri, sg_panel_weights, OlatStack, RelightOptions, StackManifest};
use crate::envmap::{fit_sgs, hdri_to_olat_weights, EnvironmentMap, FitOptions, SgFit, SgSet, WeightMode};
use crate::lightmodel::{build_stage, LightSample, PanelLayout, SphericalGaussian, StageGeometry};
use crate::radiometry::{apply_scale, read_pfm, LinearImage, ScaleFactor3};
use crate::Error;

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_MAX_BODY: usize = 256 * 1024 * 1024;

#[derive(Clone, Debug)]
pub struct ServerConfig {
    pub port: u16,
    pub workers: usize,
    pub max_body: usize,
    pub calibration: Option<ScaleFactor3>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            port: DEFAULT_PORT,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            max_body: DEFAULT_MAX_BODY,
            calibration: None,
        }
    }
}

impl ServerConfig {
    /// Defaults overridden by `RELIGHTD_PORT` and `RELIGHTD_WORKERS`.
    pub fn from_env() -> Result<Self, String> {
        let mut cfg = Self::default();
        if let Ok(p) = std::env::var("RELIGHTD_PORT") {
            cfg.port = p.parse().map_err(|_| format!("RELIGHTD_PORT={p} is not a port"))?;
        }
        if let Ok(w) = std::env::var("RELIGHTD_WORKERS") {
            cfg.workers = w
                .parse()
                .ok()
                .filter(|n| *n > 0)
                .ok_or_else(|| format!("RELIGHTD_WORKERS={w} is not a positive integer"))?;
        }
        Ok(cfg)
    }
}

enum StackSlot {
    Loading,
    Ready(Arc<OlatStack>),
    Failed(String),
}

type Lazy<T> = Arc<OnceLock<T>>;

struct Inner {
    stacks: RwLock<HashMap<String, StackSlot>>,
    previews: Mutex<HashMap<(String, usize), Lazy<Arc<OlatStack>>>>,
    envs: RwLock<HashMap<String, Arc<EnvironmentMap>>>,
    fits: Mutex<HashMap<(String, usize), Lazy<Result<Arc<SgFit>, String>>>>,
    calibration: RwLock<Option<ScaleFactor3>>,
    workers: Arc<Semaphore>,
    default_layout: PanelLayout,
}

/// Shared resource cache. Cloning is cheap.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl AppState {
    pub fn new(cfg: &ServerConfig) -> Self {
        Self {
            inner: Arc::new(Inner {
                stacks: RwLock::new(HashMap::new()),
                previews: Mutex::new(HashMap::new()),
                envs: RwLock::new(HashMap::new()),
                fits: Mutex::new(HashMap::new()),
                calibration: RwLock::new(cfg.calibration),
                workers: Arc::new(Semaphore::new(cfg.workers.max(1))),
                default_layout: build_stage(&StageGeometry::default()).expect("default stage"),
            }),
        }
    }

    /// Registers an in-memory stack under `id`, replacing any previous one.
    pub fn insert_stack(&self, id: &str, stack: OlatStack) {
        self.inner.previews.lock().unwrap().retain(|(sid, _), _| sid != id);
        self.inner
            .stacks
            .write()
            .unwrap()
            .insert(id.to_string(), StackSlot::Ready(Arc::new(stack)));
    }

    pub fn insert_env(&self, id: &str, env: EnvironmentMap) {
        self.inner.fits.lock().unwrap().retain(|(eid, _), _| eid != id);
        self.inner.envs.write().unwrap().insert(id.to_string(), Arc::new(env));
    }

    pub fn set_calibration(&self, s: Option<ScaleFactor3>) {
        *self.inner.calibration.write().unwrap() = s;
    }

    fn calibrate(&self, img: LinearImage) -> LinearImage {
        match *self.inner.calibration.read().unwrap() {
            Some(s) => apply_scale(&img, s),
            None => img,
        }
    }

    fn stack(&self, id: &str) -> Result<Arc<OlatStack>, ApiError> {
        match self.inner.stacks.read().unwrap().get(id) {
            Some(StackSlot::Ready(s)) => Ok(s.clone()),
            Some(StackSlot::Loading) => Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, format!("stack {id} is loading"))),
            Some(StackSlot::Failed(msg)) => Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                format!("stack {id} failed to load: {msg}"),
            )),
            None => Err(ApiError::new(StatusCode::NOT_FOUND, format!("unknown stack {id}"))),
        }
    }

    /// The stack downscaled to `max_dim`, built once per (id, max_dim).
    fn preview(&self, id: &str, max_dim: Option<usize>) -> Result<Arc<OlatStack>, ApiError> {
        let full = self.stack(id)?;
        let Some(max_dim) = max_dim else {
            return Ok(full);
        };
        let (w, h) = full.dims();
        if w.max(h) <= max_dim {
            return Ok(full);
        }
        let cell = self
            .inner
            .previews
            .lock()
            .unwrap()
            .entry((id.to_string(), max_dim))
            .or_default()
            .clone();
        Ok(cell.get_or_init(|| Arc::new(full.downscaled(max_dim))).clone())
    }

    fn env(&self, id: &str) -> Result<Arc<EnvironmentMap>, ApiError> {
        self.inner
            .envs
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown env {id}")))
    }

    fn fit(&self, env_id: &str, env: &EnvironmentMap, k: usize) -> Result<Arc<SgFit>, ApiError> {
        let cell = self
            .inner
            .fits
            .lock()
            .unwrap()
            .entry((env_id.to_string(), k))
            .or_default()
            .clone();
        let opts = FitOptions { k, ..FitOptions::default() };
        cell.get_or_init(|| match fit_sgs(env, &opts) {
            Ok(f) => Ok(Arc::new(f)),
            Err(crate::envmap::EnvError::NonConvergence { fit }) => Ok(Arc::new(*fit)),
            Err(e) => Err(e.to_string()),
        })
        .clone()
        .map_err(|m| ApiError::new(StatusCode::BAD_REQUEST, m))
    }

    fn stack_count(&self) -> usize {
        self.inner
            .stacks
            .read()
            .unwrap()
            .values()
            .filter(|s| matches!(s, StackSlot::Ready(_)))
            .count()
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: u32,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            code: 0,
            message: message.into(),
        }
    }

    fn bad(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = if e.is_invalid_input() {
            StatusCode::BAD_REQUEST
        } else {
            StatusCode::INTERNAL_SERVER_ERROR
        };
        Self {
            status,
            code: e.code(),
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut r = (self.status, Json(json!({"error": {"code": self.code, "message": self.message}}))).into_response();
        if self.status == StatusCode::SERVICE_UNAVAILABLE {
            r.headers_mut().insert(header::RETRY_AFTER, HeaderValue::from_static("1"));
        }
        r
    }
}

type Params = Query<HashMap<String, String>>;

fn required<'a>(q: &'a HashMap<String, String>, key: &str) -> Result<&'a str, ApiError> {
    q.get(key).map(String::as_str).ok_or_else(|| ApiError::bad(format!("missing `{key}`")))
}

fn parsed<T: std::str::FromStr>(q: &HashMap<String, String>, key: &str, default: T) -> Result<T, ApiError> {
    match q.get(key) {
        None => Ok(default),
        Some(v) => v.parse().map_err(|_| ApiError::bad(format!("bad `{key}`: {v}"))),
    }
}

fn image_params(q: &HashMap<String, String>) -> Result<(Option<usize>, ImageFormat), ApiError> {
    let max_dim = match q.get("max_dim") {
        None => None,
        Some(v) => Some(v.parse::<usize>().ok().filter(|n| *n > 0).ok_or_else(|| ApiError::bad(format!("bad `max_dim`: {v}")))?),
    };
    let format = match q.get("format") {
        None => ImageFormat::Png,
        Some(f) => ImageFormat::parse(f).ok_or_else(|| ApiError::bad(format!("bad `format`: {f}")))?,
    };
    Ok((max_dim, format))
}

fn with_hash(status: StatusCode, content_type: &'static str, body: Vec<u8>) -> Response {
    let hash = content_hash(&body);
    let mut r = (status, body).into_response();
    let h = r.headers_mut();
    h.insert(header::CONTENT_TYPE, HeaderValue::from_static(content_type));
    h.insert("x-content-hash", HeaderValue::from_str(&hash).expect("hex is a valid header"));
    r
}

fn json_response(status: StatusCode, v: &Value) -> Response {
    with_hash(status, "application/json", serde_json::to_vec(v).expect("serialisable"))
}

/// Runs CPU-bound work on the blocking pool, bounded by the worker count.
async fn on_worker<T: Send + 'static>(
    st: &AppState,
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    let _permit = st.inner.workers.clone().acquire_owned().await.expect("semaphore open");
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

fn require_type(headers: &HeaderMap, allowed: &[&str]) -> Result<(), ApiError> {
    let ct = headers.get(header::CONTENT_TYPE).and_then(|v| v.to_str().ok()).unwrap_or("");
    let essence = ct.split(';').next().unwrap_or("").trim().to_ascii_lowercase();
    if allowed.contains(&essence.as_str()) {
        Ok(())
    } else {
        Err(ApiError::new(
            StatusCode::UNSUPPORTED_MEDIA_TYPE,
            format!("content type `{ct}` not accepted; use {}", allowed.join(" or ")),
        ))
    }
}

async fn health(State(st): State<AppState>) -> Response {
    let envs = st.inner.envs.read().unwrap().len();
    json_response(
        StatusCode::OK,
        &json!({
            "status": "ok",
            "panels": st.inner.default_layout.len(),
            "stacks": st.stack_count(),
            "envs": envs,
        }),
    )
}

#[derive(Deserialize)]
struct StackUpload {
    #[serde(flatten)]
    manifest: StackManifest,
    /// Directory that relative frame paths resolve against.
    #[serde(default)]
    base_dir: Option<PathBuf>,
}

async fn post_stack(State(st): State<AppState>, Query(q): Params, headers: HeaderMap, body: Bytes) -> Result<Response, ApiError> {
    require_type(&headers, &["application/json"])?;
    let upload: StackUpload = serde_json::from_slice(&body).map_err(|e| ApiError::bad(format!("manifest: {e}")))?;
    let wait = matches!(q.get("wait").map(String::as_str), Some("1" | "true"));
    let id = format!("stk-{}", &content_hash(&body)[..16]);
    {
        let mut stacks = st.inner.stacks.write().unwrap();
        match stacks.get(&id) {
            Some(StackSlot::Ready(_)) => return Ok(json_response(StatusCode::OK, &json!({"id": id, "status": "ready"}))),
            Some(StackSlot::Loading) if !wait => {
                return Ok(json_response(StatusCode::ACCEPTED, &json!({"id": id, "status": "loading"})))
            }
            Some(StackSlot::Loading) => {}
            _ => {
                stacks.insert(id.clone(), StackSlot::Loading);
                let (st2, id2) = (st.clone(), id.clone());
                let base = upload.base_dir.unwrap_or_else(|| PathBuf::from("."));
                let manifest = upload.manifest;
                tokio::task::spawn_blocking(move || {
                    let slot = match manifest.load(&base) {
                        Ok(s) => StackSlot::Ready(Arc::new(s)),
                        Err(e) => StackSlot::Failed(e.to_string()),
                    };
                    st2.inner.stacks.write().unwrap().insert(id2, slot);
                });
            }
        }
    }
    if !wait {
        return Ok(json_response(StatusCode::ACCEPTED, &json!({"id": id, "status": "loading"})));
    }
    loop {
        match st.stack(&id) {
            Ok(s) => {
                let (w, h) = s.dims();
                return Ok(json_response(
                    StatusCode::CREATED,
                    &json!({"id": id, "status": "ready", "frames": s.len(), "width": w, "height": h}),
                ));
            }
            Err(e) if e.status == StatusCode::SERVICE_UNAVAILABLE => {
                tokio::time::sleep(std::time::Duration::from_millis(5)).await
            }
            Err(e) => {
                st.inner.stacks.write().unwrap().remove(&id);
                return Err(ApiError::bad(e.message));
            }
        }
    }
}

async fn post_env(State(st): State<AppState>, headers: HeaderMap, body: Bytes) -> Result<Response, ApiError> {
    require_type(&headers, &["application/octet-stream", "image/x-portable-floatmap"])?;
    let id = format!("env-{}", &content_hash(&body)[..16]);
    let env = on_worker(&st, move || {
        let img = read_pfm(&body).map_err(|e| ApiError::from(Error::from(e)))?;
        EnvironmentMap::new(img).map_err(|e| ApiError::from(Error::from(e)))
    })
    .await?;
    let (w, h) = (env.width(), env.height());
    st.insert_env(&id, env);
    Ok(json_response(StatusCode::CREATED, &json!({"id": id, "width": w, "height": h})))
}

fn image_response(img: &LinearImage, format: ImageFormat) -> Result<Response, ApiError> {
    let bytes = encode_image(img, format).map_err(|e| ApiError::from(Error::from(e)))?;
    Ok(with_hash(StatusCode::OK, format.content_type(), bytes))
}

async fn render(State(st): State<AppState>, Query(q): Params) -> Result<Response, ApiError> {
    let id = required(&q, "stack")?.to_string();
    let dir = parse_direction(required(&q, "dir")?).map_err(|e| ApiError::bad(format!("bad `dir`: {e}")))?;
    let size: f64 = parsed(&q, "size", 0.0)?;
    let light = LightSample::new(dir, size).map_err(|e| ApiError::bad(e.to_string()))?;
    let (max_dim, format) = image_params(&q)?;
    let stack = st.preview(&id, max_dim)?;
    let st2 = st.clone();
    on_worker(&st, move || image_response(&st2.calibrate(area_light_target(&stack, &light)), format)).await
}

/// Lobes of `set` rotated by `angle` about +z.
fn rotate_set(set: &SgSet, angle: f64) -> SgSet {
    let r = nalgebra::Rotation3::from_axis_angle(&nalgebra::Vector3::z_axis(), angle);
    SgSet {
        gaussians: set
            .gaussians
            .iter()
            .map(|g| SphericalGaussian {
                axis: g.axis.rotated(r.matrix()),
                ..*g
            })
            .collect(),
    }
}

async fn render_env(State(st): State<AppState>, Query(q): Params) -> Result<Response, ApiError> {
    let stack_id = required(&q, "stack")?.to_string();
    let env_id = required(&q, "env")?.to_string();
    let rot: f64 = parsed(&q, "rot", 0.0)?;
    if !rot.is_finite() {
        return Err(ApiError::bad("`rot` must be finite"));
    }
    let k: usize = parsed(&q, "k", 15)?;
    let mode = q.get("mode").map_or("olat", String::as_str).to_string();
    if mode != "olat" && mode != "sg" {
        return Err(ApiError::bad(format!("bad `mode`: {mode}")));
    }
    let (max_dim, format) = image_params(&q)?;
    let stack = st.preview(&stack_id, max_dim)?;
    let env = st.env(&env_id)?;
    let st2 = st.clone();
    on_worker(&st, move || {
        let (img, warnings) = if mode == "olat" {
            let out = relight_hdri(&stack, &env.rotate(rot), &RelightOptions::default())?;
            (out.image, out.warnings)
        } else {
            let fit = st2.fit(&env_id, &env, k)?;
            let w = sg_panel_weights(&stack.layout(), &rotate_set(&fit.set, rot));
            let mut warnings = Vec::new();
            if !fit.converged {
                warnings.push(format!("SG fit stopped at relative residual {:.4}", fit.relative_residual));
            }
            (composite_values(&stack, &w).map_err(Error::from)?, warnings)
        };
        let mut r = image_response(&st2.calibrate(img), format)?;
        if !warnings.is_empty() {
            if let Ok(v) = HeaderValue::from_str(&warnings.join("; ")) {
                r.headers_mut().insert("x-relight-warnings", v);
            }
        }
        Ok(r)
    })
    .await
}

async fn weights(State(st): State<AppState>, Query(q): Params) -> Result<Response, ApiError> {
    let env = st.env(required(&q, "env")?)?;
    let rot: f64 = parsed(&q, "rot", 0.0)?;
    let mode = match q.get("mode").map(String::as_str) {
        None | Some("energy-preserving") => WeightMode::EnergyPreserving,
        Some("region-mean") => WeightMode::RegionMean,
        Some(m) => return Err(ApiError::bad(format!("bad `mode`: {m}"))),
    };
    let layout = match q.get("layout").map(String::as_str) {
        None | Some("default") => st.inner.default_layout.clone(),
        Some("refined") => build_stage(&StageGeometry::default().refined()).map_err(Error::from)?,
        Some(id) => st.stack(id)?.layout(),
    };
    on_worker(&st, move || {
        let w = hdri_to_olat_weights(&env.rotate(rot), &layout, mode).map_err(Error::from)?;
        Ok(json_response(StatusCode::OK, &serde_json::to_value(&w).expect("serialisable")))
    })
    .await
}

impl From<crate::compositor::CompositeError> for ApiError {
    fn from(e: crate::compositor::CompositeError) -> Self {
        Error::from(e).into()
    }
}

pub fn router(state: AppState, max_body: usize) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/stacks", post(post_stack))
        .route("/envs", post(post_env))
        .route("/render", get(render))
        .route("/render-env", get(render_env))
        .route("/weights", get(weights))
        .layer(DefaultBodyLimit::max(max_body))
        .with_state(state)
}

/// Serves on an already bound listener until the task is dropped.
pub async fn serve_listener(listener: tokio::net::TcpListener, state: AppState, max_body: usize) -> std::io::Result<()> {
    axum::serve(listener, router(state, max_body)).await
}

pub async fn serve(cfg: ServerConfig) -> std::io::Result<()> {
    let addr = SocketAddr::from(([0, 0, 0, 0], cfg.port));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    serve_listener(listener, AppState::new(&cfg), cfg.max_body).await
}
