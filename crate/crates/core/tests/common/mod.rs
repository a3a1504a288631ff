#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use relight::compositor::OlatStack;
use relight::envmap::EnvironmentMap;
use relight::lightmodel::{build_stage, Direction, SphericalGaussian, StageGeometry};
use relight::radiometry::{write_pfm, Endian};
use relight::relightd::server::serve_listener;
use relight::relightd::{AppState, ServerConfig};
use relight::synthoracle::{make_olat_stack, Scene};

pub fn small_stack(size: usize) -> OlatStack {
    let layout = build_stage(&StageGeometry::default()).unwrap();
    make_olat_stack(&Scene::default().with_resolution(size, size), &layout).unwrap()
}

/// Saves `stack` under `dir` and returns the manifest path.
pub fn saved_stack(dir: &Path, size: usize) -> (OlatStack, PathBuf) {
    let stack = small_stack(size);
    let path = stack.save(dir).unwrap();
    (stack, path)
}

pub fn sg_env(height: usize) -> EnvironmentMap {
    let sgs = [
        SphericalGaussian::new(Direction::from_spherical(0.7, 0.4), 20.0, [3.0, 2.5, 2.0]).unwrap(),
        SphericalGaussian::new(Direction::from_spherical(1.4, 2.6), 5.0, [0.4, 0.6, 1.0]).unwrap(),
    ];
    EnvironmentMap::from_sgs(height, &sgs)
}

pub fn pfm_bytes(env: &EnvironmentMap) -> Vec<u8> {
    write_pfm(env.image(), Endian::Little)
}

pub struct TestServer {
    pub addr: SocketAddr,
    pub state: AppState,
    _rt: tokio::runtime::Runtime,
}

impl TestServer {
    pub fn start(cfg: ServerConfig) -> Self {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .unwrap();
        let state = AppState::new(&cfg);
        let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
        let addr = listener.local_addr().unwrap();
        rt.spawn(serve_listener(listener, state.clone(), cfg.max_body));
        Self { addr, state, _rt: rt }
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }
}

pub fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .build()
        .into()
}

pub struct Reply {
    pub status: u16,
    pub hash: Option<String>,
    pub content_type: Option<String>,
    pub retry_after: Option<String>,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> serde_json::Value {
        serde_json::from_slice(&self.body).unwrap()
    }
}

fn reply(mut r: ureq::http::Response<ureq::Body>) -> Reply {
    let header = |k: &str| r.headers().get(k).map(|v| v.to_str().unwrap().to_string());
    let (hash, content_type, retry_after) = (header("x-content-hash"), header("content-type"), header("retry-after"));
    let body = r.body_mut().with_config().limit(1 << 31).read_to_vec().unwrap();
    Reply {
        status: r.status().as_u16(),
        hash,
        content_type,
        retry_after,
        body,
    }
}

pub fn get(agent: &ureq::Agent, url: &str) -> Reply {
    reply(agent.get(url).call().unwrap())
}

pub fn post(agent: &ureq::Agent, url: &str, content_type: &str, body: &[u8]) -> Reply {
    reply(agent.post(url).header("content-type", content_type).send(body).unwrap())
}
