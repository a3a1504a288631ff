//! Deterministic ray-traced test scene: a glossy sphere over a ground plane.
//! Produces OLAT stacks and brute-force environment renders that serve as
//! the reference for compositing.

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compositor::{OlatFrame, OlatStack};
use crate::envmap::{texel_solid_angle, EnvironmentMap, Filter};
use crate::lightmodel::{Direction, PanelLayout};
use crate::radiometry::LinearImage;

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error("invalid scene: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sphere {
    pub center: [f64; 3],
    pub radius: f64,
    pub albedo: [f64; 3],
    /// Blinn-Phong weight (white highlight).
    pub specular: f64,
    pub exponent: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ground {
    /// The plane is `z = height`, facing +z.
    pub height: f64,
    pub albedo: [f64; 3],
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub position: [f64; 3],
    pub look_at: [f64; 3],
    /// Vertical field of view in degrees.
    pub fov_y: f64,
    pub width: usize,
    pub height: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub sphere: Sphere,
    pub ground: Option<Ground>,
    pub camera: Camera,
}

impl Default for Scene {
    fn default() -> Self {
        Self {
            sphere: Sphere {
                center: [0.0, 0.0, 1.0],
                radius: 1.0,
                albedo: [0.8, 0.6, 0.4],
                specular: 0.2,
                exponent: 16.0,
            },
            ground: Some(Ground {
                height: 0.0,
                albedo: [0.5, 0.5, 0.5],
            }),
            camera: Camera {
                position: [0.0, -5.0, 2.5],
                look_at: [0.0, 0.0, 0.7],
                fov_y: 40.0,
                width: 256,
                height: 256,
            },
        }
    }
}

impl Scene {
    pub fn with_resolution(mut self, width: usize, height: usize) -> Self {
        self.camera.width = width;
        self.camera.height = height;
        self
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let s = &self.sphere;
        let unit = |a: &[f64; 3]| a.iter().all(|v| (0.0..=1.0).contains(v));
        if !(s.radius > 0.0 && s.radius.is_finite()) {
            return Err(SceneError::Invalid(format!("sphere radius {}", s.radius)));
        }
        if !unit(&s.albedo) || self.ground.is_some_and(|g| !unit(&g.albedo)) {
            return Err(SceneError::Invalid("albedo outside [0, 1]".into()));
        }
        if !(s.exponent >= 1.0) || !(s.specular >= 0.0) {
            return Err(SceneError::Invalid(format!(
                "specular {} exponent {}",
                s.specular, s.exponent
            )));
        }
        let c = &self.camera;
        if c.width == 0 || c.height == 0 || !(c.fov_y > 0.0 && c.fov_y < 180.0) {
            return Err(SceneError::Invalid(format!(
                "camera {}x{} fov {}",
                c.width, c.height, c.fov_y
            )));
        }
        let fwd = Vector3::from(c.look_at) - Vector3::from(c.position);
        if fwd.norm() == 0.0 || fwd.normalize().cross(&Vector3::z()).norm() < 1e-9 {
            return Err(SceneError::Invalid("camera must not look straight up or down".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
struct Hit {
    pos: Vector3<f64>,
    normal: Vector3<f64>,
    view: Vector3<f64>,
    albedo: [f64; 3],
    specular: f64,
    exponent: f64,
    on_sphere: bool,
}

/// Scene with its primary-ray hits cached.
#[derive(Clone, Debug)]
pub struct Renderer {
    scene: Scene,
    hits: Vec<Option<Hit>>,
}

fn ray_sphere(o: &Vector3<f64>, d: &Vector3<f64>, c: &Vector3<f64>, r: f64) -> Option<f64> {
    let oc = o - c;
    let b = oc.dot(d);
    let disc = b * b - (oc.norm_squared() - r * r);
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    [-b - s, -b + s].into_iter().find(|t| *t > 1e-9)
}

impl Renderer {
    pub fn new(scene: &Scene) -> Result<Self, SceneError> {
        scene.validate()?;
        let cam = &scene.camera;
        let (w, h) = (cam.width, cam.height);
        let eye = Vector3::from(cam.position);
        let fwd = (Vector3::from(cam.look_at) - eye).normalize();
        let right = fwd.cross(&Vector3::z()).normalize();
        let up = right.cross(&fwd);
        let tan = (cam.fov_y.to_radians() / 2.0).tan();
        let aspect = w as f64 / h as f64;
        let centre = Vector3::from(scene.sphere.center);
        let hits = (0..w * h)
            .into_par_iter()
            .map(|i| {
                let (x, y) = ((i % w) as f64, (i / w) as f64);
                let sx = (2.0 * (x + 0.5) / w as f64 - 1.0) * tan * aspect;
                let sy = (1.0 - 2.0 * (y + 0.5) / h as f64) * tan;
                let dir = (fwd + right * sx + up * sy).normalize();
                let t_sphere = ray_sphere(&eye, &dir, &centre, scene.sphere.radius);
                let t_ground = scene.ground.and_then(|g| {
                    let t = (g.height - eye.z) / dir.z;
                    (t > 1e-9 && eye.z > g.height).then_some(t)
                });
                match (t_sphere, t_ground) {
                    (Some(ts), tg) if tg.is_none_or(|tg| ts <= tg) => {
                        let pos = eye + dir * ts;
                        Some(Hit {
                            pos,
                            normal: (pos - centre).normalize(),
                            view: -dir,
                            albedo: scene.sphere.albedo,
                            specular: scene.sphere.specular,
                            exponent: scene.sphere.exponent,
                            on_sphere: true,
                        })
                    }
                    (_, Some(tg)) => Some(Hit {
                        pos: eye + dir * tg,
                        normal: Vector3::z(),
                        view: -dir,
                        albedo: scene.ground.expect("ground hit").albedo,
                        specular: 0.0,
                        exponent: 1.0,
                        on_sphere: false,
                    }),
                    _ => None,
                }
            })
            .collect();
        Ok(Self { scene: *scene, hits })
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.scene.camera.width, self.scene.camera.height)
    }

    fn occluded(&self, hit: &Hit, d: &Vector3<f64>) -> bool {
        // Only the sphere casts shadows; the plane is a receiver.
        if hit.on_sphere {
            false
        } else {
            let s = &self.scene.sphere;
            ray_sphere(&hit.pos, d, &Vector3::from(s.center), s.radius).is_some()
        }
    }

    /// Outgoing radiance at pixel `(x, y)` under a directional light of
    /// unit radiance from `d`, per channel before tinting by the light.
    fn response(&self, hit: &Hit, d: &Vector3<f64>) -> [f64; 3] {
        let ndl = hit.normal.dot(d);
        if ndl <= 0.0 || self.occluded(hit, d) {
            return [0.0; 3];
        }
        let spec = if hit.specular > 0.0 {
            let hv = (d + hit.view).normalize();
            hit.specular * hit.normal.dot(&hv).max(0.0).powf(hit.exponent)
        } else {
            0.0
        };
        hit.albedo.map(|a| a * ndl + spec)
    }

    /// f64 shading of one pixel; `None` for background pixels.
    pub fn shade(&self, x: usize, y: usize, d: &Direction, radiance: [f64; 3]) -> Option<[f64; 3]> {
        let (w, _) = self.dims();
        let hit = self.hits[y * w + x]?;
        let r = self.response(&hit, d.vector());
        Some([r[0] * radiance[0], r[1] * radiance[1], r[2] * radiance[2]])
    }

    /// Surface normal seen through pixel `(x, y)`.
    pub fn normal(&self, x: usize, y: usize) -> Option<Direction> {
        let (w, _) = self.dims();
        self.hits[y * w + x].map(|h| Direction::normalize(h.normal).expect("unit normal"))
    }

    pub fn is_sphere(&self, x: usize, y: usize) -> bool {
        let (w, _) = self.dims();
        self.hits[y * w + x].is_some_and(|h| h.on_sphere)
    }

    pub fn render_directional(&self, d: &Direction, radiance: [f64; 3]) -> LinearImage {
        let (w, h) = self.dims();
        LinearImage::from_fn(w, h, |x, y| {
            self.shade(x, y, d, radiance).unwrap_or([0.0; 3]).map(|v| v as f32)
        })
    }

    /// `Σ_t Ω_t · shade(d_t, L_t)` over the texels of `env`, in world space.
    pub fn render_env(&self, env: &EnvironmentMap) -> LinearImage {
        let (ew, eh) = (env.width(), env.height());
        let mut lights = Vec::new();
        for row in 0..eh {
            let omega = texel_solid_angle(row, ew, eh).expect("row in range");
            for col in 0..ew {
                let l = env.texel(row, col);
                if l != [0.0; 3] {
                    let d = env.world_texel_direction(row, col);
                    lights.push((*d.vector(), l.map(|v| v * omega)));
                }
            }
        }
        let (w, h) = self.dims();
        LinearImage::from_fn(w, h, |x, y| {
            let Some(hit) = self.hits[y * w + x] else {
                return [0.0; 3];
            };
            let mut acc = [0.0f64; 3];
            for (d, l) in &lights {
                let r = self.response(&hit, d);
                for c in 0..3 {
                    acc[c] += r[c] * l[c];
                }
            }
            acc.map(|v| v as f32)
        })
    }

    /// One unit-radiance render per panel, tagged with the panel.
    pub fn make_olat_stack(&self, layout: &PanelLayout) -> OlatStack {
        let frames = layout
            .panels()
            .iter()
            .map(|p| OlatFrame {
                image: self.render_directional(&p.direction, [1.0; 3]),
                direction: p.direction,
                label: p.label.clone(),
                solid_angle: p.solid_angle,
            })
            .collect();
        OlatStack::new(frames).expect("layout is non-empty")
    }
}

pub fn render_directional(scene: &Scene, d: &Direction, radiance: [f64; 3]) -> Result<LinearImage, SceneError> {
    Ok(Renderer::new(scene)?.render_directional(d, radiance))
}

/// Brute-force environment render. The map is resampled to
/// `quadrature_height` rows first unless it already has that height.
pub fn render_env(scene: &Scene, env: &EnvironmentMap, quadrature_height: usize) -> Result<LinearImage, SceneError> {
    if quadrature_height < 32 {
        return Err(SceneError::Invalid(format!(
            "quadrature of {quadrature_height} rows is below 32x64"
        )));
    }
    let r = Renderer::new(scene)?;
    if env.height() == quadrature_height {
        Ok(r.render_env(env))
    } else {
        Ok(r.render_env(&env.resampled(quadrature_height, Filter::Bilinear)))
    }
}

pub fn make_olat_stack(scene: &Scene, layout: &PanelLayout) -> Result<OlatStack, SceneError> {
    Ok(Renderer::new(scene)?.make_olat_stack(layout))
}
