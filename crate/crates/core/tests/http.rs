mod common;

use common::*;
use relight::compositor::{area_light_target, relight_hdri, RelightOptions};
use relight::envmap::{hdri_to_olat_weights, WeightMode};
use relight::lightmodel::{build_stage, LightSample, StageGeometry};
use relight::radiometry::{read_pfm, read_png, write_png, BitDepth};
use relight::relightd::{content_hash, ServerConfig};

fn upload_stack(srv: &TestServer, agent: &ureq::Agent, manifest: &std::path::Path) -> String {
    let mut m: serde_json::Value = serde_json::from_slice(&std::fs::read(manifest).unwrap()).unwrap();
    m["base_dir"] = manifest.parent().unwrap().to_str().unwrap().into();
    let r = post(agent, &srv.url("/stacks?wait=1"), "application/json", m.to_string().as_bytes());
    assert_eq!(r.status, 201, "{}", String::from_utf8_lossy(&r.body));
    r.json()["id"].as_str().unwrap().to_string()
}

#[test]
fn health_and_resource_lifecycle() {
    let srv = TestServer::start(ServerConfig::default());
    let a = agent();
    let h = get(&a, &srv.url("/health")).json();
    assert_eq!(h["status"], "ok");
    assert_eq!(h["stacks"], 0);
    assert_eq!(h["panels"], 120);

    let dir = tempfile::tempdir().unwrap();
    let (stack, manifest) = saved_stack(dir.path(), 24);
    let id = upload_stack(&srv, &a, &manifest);
    assert!(id.starts_with("stk-"));
    assert_eq!(get(&a, &srv.url("/health")).json()["stacks"], 1);

    // Same manifest again resolves to the same id without reloading.
    let mut m: serde_json::Value = serde_json::from_slice(&std::fs::read(&manifest).unwrap()).unwrap();
    m["base_dir"] = dir.path().to_str().unwrap().into();
    let again = post(&a, &srv.url("/stacks"), "application/json", m.to_string().as_bytes());
    assert_eq!(again.status, 200);
    assert_eq!(again.json()["id"], id.as_str());

    // Render at a panel direction with size 0 reproduces that frame.
    let f = &stack.frames()[37];
    let d = f.direction;
    let r = get(&a, &srv.url(&format!("/render?stack={id}&dir={},{},{}&size=0", d.x(), d.y(), d.z())));
    assert_eq!(r.status, 200);
    assert_eq!(r.content_type.as_deref(), Some("image/png"));
    let want = write_png(&f.image, BitDepth::Eight).unwrap();
    assert_eq!(r.hash.as_deref(), Some(content_hash(&want).as_str()));
    let lin = read_png(&r.body).unwrap();
    assert_eq!(lin.dims(), f.image.dims());
    for (got, want) in lin.data().iter().zip(f.image.data()) {
        let want = want.clamp(0.0, 1.0);
        // Half an 8-bit code times the steepest slope of the sRGB decode curve.
        assert!((got - want).abs() <= 0.5 / 255.0 * 2.4 / 1.055 + 1e-6, "{got} vs {want}");
    }
}

#[test]
fn render_matches_library_and_is_deterministic() {
    let srv = TestServer::start(ServerConfig::default());
    let a = agent();
    let dir = tempfile::tempdir().unwrap();
    let (stack, manifest) = saved_stack(dir.path(), 24);
    let id = upload_stack(&srv, &a, &manifest);

    for (dir, size) in [("0.3,-0.4,0.8", 0.25), ("-1,0.2,0.1", 0.8), ("0,0,1", 1.0)] {
        let url = srv.url(&format!("/render?stack={id}&dir={dir}&size={size}&format=pfm"));
        let r = get(&a, &url);
        assert_eq!(r.status, 200);
        let light = LightSample::new(relight::relightd::parse_direction(dir).unwrap(), size).unwrap();
        let lib = area_light_target(&stack, &light);
        assert_eq!(read_pfm(&r.body).unwrap(), lib);
        let r2 = get(&a, &url);
        assert_eq!(r.hash, r2.hash);
        assert_eq!(r.hash.unwrap(), content_hash(&r.body));
    }
}

#[test]
fn environment_endpoints() {
    let srv = TestServer::start(ServerConfig::default());
    let a = agent();
    let dir = tempfile::tempdir().unwrap();
    let (stack, manifest) = saved_stack(dir.path(), 16);
    let id = upload_stack(&srv, &a, &manifest);
    let env = sg_env(64);

    let r = post(&a, &srv.url("/envs"), "image/x-portable-floatmap", &pfm_bytes(&env));
    assert_eq!(r.status, 201);
    let env_id = r.json()["id"].as_str().unwrap().to_string();

    let rot = 0.7;
    let r = get(&a, &srv.url(&format!("/render-env?stack={id}&env={env_id}&mode=olat&rot={rot}&format=pfm")));
    assert_eq!(r.status, 200);
    let lib = relight_hdri(&stack, &env.rotate(rot), &RelightOptions::default()).unwrap().image;
    assert_eq!(read_pfm(&r.body).unwrap(), lib);

    let r = get(&a, &srv.url(&format!("/render-env?stack={id}&env={env_id}&mode=sg&k=2")));
    assert_eq!(r.status, 200);
    assert_eq!(read_png(&r.body).unwrap().dims(), (16, 16));

    let r = get(&a, &srv.url(&format!("/weights?env={env_id}&layout=default")));
    assert_eq!(r.status, 200);
    let layout = build_stage(&StageGeometry::default()).unwrap();
    let lib = hdri_to_olat_weights(&env, &layout, WeightMode::EnergyPreserving).unwrap();
    assert_eq!(r.json(), serde_json::to_value(&lib).unwrap());
    let r = get(&a, &srv.url(&format!("/weights?env={env_id}&layout=refined")));
    assert_eq!(r.status, 200, "{}", String::from_utf8_lossy(&r.body));
    assert_eq!(r.json().as_array().unwrap().len(), 480);
    let r = get(&a, &srv.url(&format!("/weights?env={env_id}&layout={id}&mode=region-mean")));
    assert_eq!(r.json().as_array().unwrap().len(), 120);
}

#[test]
fn error_statuses() {
    let srv = TestServer::start(ServerConfig {
        max_body: 64 * 1024,
        ..ServerConfig::default()
    });
    let a = agent();
    let dir = tempfile::tempdir().unwrap();
    let (_, manifest) = saved_stack(dir.path(), 8);
    let id = upload_stack(&srv, &a, &manifest);

    let cases = [
        ("/render?stack=stk-nope&dir=0,0,1&size=0", 404),
        ("/render?dir=0,0,1&size=0", 400),
        ("/render-env?stack=STACK&env=env-nope", 404),
        ("/weights?env=env-nope", 404),
        ("/nope", 404),
    ];
    for (path, status) in cases {
        let r = get(&a, &srv.url(&path.replace("STACK", &id)));
        assert_eq!(r.status, status, "{path}");
    }
    for q in ["dir=0,0,0&size=0", "dir=a,b,c&size=0", "dir=0,0,1&size=1.5", "dir=0,0,1&size=x", "dir=0,0,1&format=gif", "dir=0,0,1&max_dim=0"] {
        let r = get(&a, &srv.url(&format!("/render?stack={id}&{q}")));
        assert_eq!(r.status, 400, "{q}");
        assert!(r.json()["error"]["message"].is_string());
    }

    let r = post(&a, &srv.url("/stacks"), "text/plain", b"{}");
    assert_eq!(r.status, 415);
    let r = post(&a, &srv.url("/stacks"), "application/json", b"{not json");
    assert_eq!(r.status, 400);
    let r = post(&a, &srv.url("/envs"), "application/json", b"PF");
    assert_eq!(r.status, 415);
    let r = post(&a, &srv.url("/envs"), "application/octet-stream", b"PF\n1 1\n-1\n");
    assert_eq!(r.status, 400);
    let r = post(&a, &srv.url("/envs"), "application/octet-stream", &vec![0u8; 128 * 1024]);
    assert_eq!(r.status, 413);

    // A manifest naming missing frames fails to load.
    let bad = serde_json::json!({
        "frames": [{"path": "missing.pfm", "direction": [0.0, 0.0, 1.0], "label": "x"}],
        "color_space": "linear-pfm",
        "base_dir": dir.path(),
    });
    let r = post(&a, &srv.url("/stacks?wait=1"), "application/json", bad.to_string().as_bytes());
    assert_eq!(r.status, 400);
}

#[test]
fn downscaled_preview() {
    let srv = TestServer::start(ServerConfig::default());
    let a = agent();
    let dir = tempfile::tempdir().unwrap();
    let (stack, manifest) = saved_stack(dir.path(), 32);
    let id = upload_stack(&srv, &a, &manifest);
    let r = get(&a, &srv.url(&format!("/render?stack={id}&dir=0,-1,1&size=0.5&max_dim=16&format=pfm")));
    let img = read_pfm(&r.body).unwrap();
    assert_eq!(img.dims(), (16, 16));
    let light = LightSample::new(relight::relightd::parse_direction("0,-1,1").unwrap(), 0.5).unwrap();
    assert_eq!(img, area_light_target(&stack.downscaled(16), &light));
}
