//! K-lobe Spherical Gaussian approximation of an environment map.
//!
//! The weighted objective `Σ_t Ω_t ‖L(t) − Σ_k A_k G_k(t)‖²` is minimised by
//! alternating two steps:
//!
//! 1. amplitudes by non-negative least squares with the lobes fixed;
//! 2. a damped Gauss–Newton step on each lobe's axis (tangent-plane update,
//!    reprojected to unit length) and log-sharpness, with backtracking.
//!
//! Both steps never increase the objective, so the residual history is
//! monotone.

use nalgebra::{DMatrix, DVector, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::latlong::{solid_angle_unchecked, texel_dir_unchecked};
use super::{nnls, EnvError, EnvironmentMap};
use crate::lightmodel::{Direction, SphericalGaussian};

const LOG_SHARPNESS_MIN: f64 = -6.9; // ≈ 1e-3
const LOG_SHARPNESS_MAX: f64 = 9.2; // ≈ 1e4

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SgSet {
    pub gaussians: Vec<SphericalGaussian>,
}

impl SgSet {
    pub fn new(gaussians: Vec<SphericalGaussian>) -> Result<Self, EnvError> {
        if gaussians.is_empty() {
            return Err(EnvError::InvalidFit("an SG set needs at least one lobe".into()));
        }
        Ok(Self { gaussians })
    }

    pub fn len(&self) -> usize {
        self.gaussians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaussians.is_empty()
    }

    pub fn eval(&self, d: &Direction) -> [f64; 3] {
        let mut acc = [0.0; 3];
        for sg in &self.gaussians {
            let g = sg.lobe(d);
            for c in 0..3 {
                acc[c] += sg.amplitude[c] * g;
            }
        }
        acc
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitOptions {
    pub k: usize,
    pub max_iters: usize,
    /// Stop once an outer iteration lowers the objective by less than this
    /// relative amount.
    pub tol: f64,
    /// Maps taller than this are box-filtered down before fitting.
    pub fit_height: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            k: 15,
            max_iters: 200,
            tol: 1e-7,
            fit_height: 64,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SgFit {
    pub set: SgSet,
    /// Weighted sum of squared residuals.
    pub residual: f64,
    /// `sqrt(residual / Σ Ω ‖L‖²)`; 0 for a black map.
    pub relative_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after initialisation and after every outer iteration.
    pub history: Vec<f64>,
}

struct Samples {
    dirs: Vec<Vector3<f64>>,
    omega: Vec<f64>,
    radiance: Vec<[f64; 3]>,
}

impl Samples {
    fn from_env(env: &EnvironmentMap, fit_height: usize) -> Self {
        let img = if env.height() > fit_height {
            env.image().downscaled(2 * fit_height)
        } else {
            env.image().clone()
        };
        let (w, h) = img.dims();
        let mut s = Samples {
            dirs: Vec::with_capacity(w * h),
            omega: Vec::with_capacity(w * h),
            radiance: Vec::with_capacity(w * h),
        };
        let rot = env.rotation();
        for row in 0..h {
            let omega = solid_angle_unchecked(row, w, h);
            for col in 0..w {
                s.dirs.push(rot * texel_dir_unchecked(row, col, w, h).vector());
                s.omega.push(omega);
                s.radiance.push(img.pixel(col, row).map(|v| v as f64));
            }
        }
        s
    }

    fn len(&self) -> usize {
        self.dirs.len()
    }

    fn energy(&self) -> f64 {
        self.omega
            .iter()
            .zip(&self.radiance)
            .map(|(o, l)| o * (l[0] * l[0] + l[1] * l[1] + l[2] * l[2]))
            .sum()
    }
}

#[derive(Clone, Debug)]
struct Lobes {
    axes: Vec<Vector3<f64>>,
    log_sharpness: Vec<f64>,
}

impl Lobes {
    fn k(&self) -> usize {
        self.axes.len()
    }

    /// Row-major T×K lobe values.
    fn eval(&self, s: &Samples) -> Vec<f64> {
        let k = self.k();
        let lambdas: Vec<f64> = self.log_sharpness.iter().map(|l| l.exp()).collect();
        let mut g = vec![0.0; s.len() * k];
        g.par_chunks_mut(k).zip(&s.dirs).for_each(|(row, d)| {
            for j in 0..k {
                row[j] = (lambdas[j] * (d.dot(&self.axes[j]) - 1.0)).exp();
            }
        });
        g
    }
}

fn objective(s: &Samples, g: &[f64], amps: &[[f64; 3]]) -> f64 {
    let k = amps.len();
    (0..s.len())
        .map(|t| {
            let row = &g[t * k..(t + 1) * k];
            let mut r2 = 0.0;
            for c in 0..3 {
                let model: f64 = row.iter().zip(amps).map(|(gv, a)| gv * a[c]).sum();
                let r = model - s.radiance[t][c];
                r2 += r * r;
            }
            s.omega[t] * r2
        })
        .sum()
}

fn solve_amplitudes(s: &Samples, g: &[f64], k: usize) -> Vec<[f64; 3]> {
    let mut m = DMatrix::<f64>::zeros(k, k);
    let mut b = [DVector::<f64>::zeros(k), DVector::<f64>::zeros(k), DVector::<f64>::zeros(k)];
    for t in 0..s.len() {
        let row = &g[t * k..(t + 1) * k];
        let o = s.omega[t];
        for i in 0..k {
            let oi = o * row[i];
            for j in i..k {
                m[(i, j)] += oi * row[j];
            }
            for c in 0..3 {
                b[c][i] += oi * s.radiance[t][c];
            }
        }
    }
    for i in 0..k {
        for j in 0..i {
            m[(i, j)] = m[(j, i)];
        }
    }
    let sol: Vec<DVector<f64>> = b.iter().map(|bc| nnls(&m, bc)).collect();
    (0..k).map(|i| [sol[0][i], sol[1][i], sol[2][i]]).collect()
}

fn tangent_basis(axis: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if axis.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let t1 = axis.cross(&helper).normalize();
    let t2 = axis.cross(&t1);
    (t1, t2)
}

/// Normal equations `(JᵀJ, Jᵀr)` for the 3K lobe parameters
/// (tangent u, tangent v, log-sharpness) with amplitudes held fixed.
fn normal_equations(s: &Samples, lobes: &Lobes, g: &[f64], amps: &[[f64; 3]]) -> (DMatrix<f64>, DVector<f64>) {
    let k = lobes.k();
    let n = 3 * k;
    let bases: Vec<_> = lobes.axes.iter().map(tangent_basis).collect();
    let lambdas: Vec<f64> = lobes.log_sharpness.iter().map(|l| l.exp()).collect();
    let mut aa = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            aa[i * k + j] = (0..3).map(|c| amps[i][c] * amps[j][c]).sum();
        }
    }
    let chunk = 256;
    let partials: Vec<(Vec<f64>, Vec<f64>)> = (0..s.len())
        .collect::<Vec<_>>()
        .par_chunks(chunk)
        .map(|ts| {
            let mut h = vec![0.0; n * n];
            let mut grad = vec![0.0; n];
            let mut dg = vec![0.0; n];
            for &t in ts {
                let d = &s.dirs[t];
                let row = &g[t * k..(t + 1) * k];
                let o = s.omega[t];
                for j in 0..k {
                    let gl = row[j] * lambdas[j];
                    dg[3 * j] = gl * d.dot(&bases[j].0);
                    dg[3 * j + 1] = gl * d.dot(&bases[j].1);
                    dg[3 * j + 2] = gl * (d.dot(&lobes.axes[j]) - 1.0);
                }
                let mut r = [0.0; 3];
                for c in 0..3 {
                    let model: f64 = row.iter().zip(amps).map(|(gv, a)| gv * a[c]).sum();
                    r[c] = model - s.radiance[t][c];
                }
                for p in 0..n {
                    let kp = p / 3;
                    let ra: f64 = (0..3).map(|c| r[c] * amps[kp][c]).sum();
                    grad[p] += o * ra * dg[p];
                    if dg[p] == 0.0 {
                        continue;
                    }
                    for q in p..n {
                        h[p * n + q] += o * aa[kp * k + q / 3] * dg[p] * dg[q];
                    }
                }
            }
            (h, grad)
        })
        .collect();
    let mut h = DMatrix::<f64>::zeros(n, n);
    let mut grad = DVector::<f64>::zeros(n);
    for (ph, pg) in &partials {
        for p in 0..n {
            grad[p] += pg[p];
            for q in p..n {
                h[(p, q)] += ph[p * n + q];
            }
        }
    }
    for p in 0..n {
        for q in 0..p {
            h[(p, q)] = h[(q, p)];
        }
    }
    (h, grad)
}

fn apply_step(lobes: &Lobes, step: &DVector<f64>, scale: f64) -> Lobes {
    let mut out = lobes.clone();
    for j in 0..lobes.k() {
        let (t1, t2) = tangent_basis(&lobes.axes[j]);
        let moved = lobes.axes[j] + t1 * (scale * step[3 * j]) + t2 * (scale * step[3 * j + 1]);
        out.axes[j] = moved.normalize();
        out.log_sharpness[j] =
            (lobes.log_sharpness[j] + scale * step[3 * j + 2]).clamp(LOG_SHARPNESS_MIN, LOG_SHARPNESS_MAX);
    }
    out
}

/// Fibonacci-sphere direction `i` of `n`, used to park unused lobes.
fn fibonacci_direction(i: usize, n: usize) -> Vector3<f64> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
    let r = (1.0 - z * z).sqrt();
    let phi = golden * i as f64;
    Vector3::new(r * phi.cos(), r * phi.sin(), z)
}

/// Greedy initialisation: each lobe is centred on the brightest texel of the
/// remaining residual, with the sharpness picked from a log grid.
fn initialise(s: &Samples, k: usize) -> Lobes {
    let mut residual: Vec<f64> = s.radiance.iter().map(|l| (l[0] + l[1] + l[2]) / 3.0).collect();
    let mut lobes = Lobes {
        axes: Vec::with_capacity(k),
        log_sharpness: Vec::with_capacity(k),
    };
    for j in 0..k {
        let (t_max, peak) = residual
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (t, v)| if *v > best.1 { (t, *v) } else { best });
        if !(peak > 0.0) {
            lobes.axes.push(fibonacci_direction(j, k));
            lobes.log_sharpness.push(2f64.ln());
            continue;
        }
        let axis = s.dirs[t_max];
        let mut best = (f64::INFINITY, 0.0);
        for e in 0..14 {
            let lambda = 2f64.powi(e - 1);
            let err: f64 = (0..s.len())
                .map(|t| {
                    let r = residual[t] - peak * (lambda * (s.dirs[t].dot(&axis) - 1.0)).exp();
                    s.omega[t] * r * r
                })
                .sum();
            if err < best.0 {
                best = (err, lambda);
            }
        }
        let lambda = best.1;
        for t in 0..s.len() {
            residual[t] -= peak * (lambda * (s.dirs[t].dot(&axis) - 1.0)).exp();
        }
        lobes.axes.push(axis);
        lobes.log_sharpness.push(lambda.ln());
    }
    lobes
}

fn finish(lobes: &Lobes, amps: &[[f64; 3]], residual: f64, energy: f64, iterations: usize, converged: bool, history: Vec<f64>) -> SgFit {
    let gaussians = lobes
        .axes
        .iter()
        .zip(&lobes.log_sharpness)
        .zip(amps)
        .map(|((axis, ls), a)| SphericalGaussian {
            axis: Direction::normalize(*axis).expect("axes stay unit length"),
            sharpness: ls.exp(),
            amplitude: a.map(|v| v.max(0.0)),
        })
        .collect();
    SgFit {
        set: SgSet { gaussians },
        residual,
        relative_residual: if energy > 0.0 { (residual / energy).sqrt() } else { 0.0 },
        iterations,
        converged,
        history,
    }
}

/// Fits `opts.k` Spherical Gaussians to `env` in world space (the map's
/// rotation is applied). Hitting `max_iters` yields
/// [`EnvError::NonConvergence`] carrying the best fit found.
pub fn fit_sgs(env: &EnvironmentMap, opts: &FitOptions) -> Result<SgFit, EnvError> {
    if opts.k == 0 {
        return Err(EnvError::InvalidFit("k must be at least 1".into()));
    }
    if opts.fit_height < 2 || !(opts.tol >= 0.0) {
        return Err(EnvError::InvalidFit(format!(
            "fit_height {} / tol {}",
            opts.fit_height, opts.tol
        )));
    }
    let s = Samples::from_env(env, opts.fit_height);
    let energy = s.energy();
    let k = opts.k;
    let mut lobes = initialise(&s, k);
    if energy == 0.0 {
        return Ok(finish(&lobes, &vec![[0.0; 3]; k], 0.0, 0.0, 0, true, vec![0.0]));
    }
    let mut g = lobes.eval(&s);
    let mut amps = solve_amplitudes(&s, &g, k);
    let mut f = objective(&s, &g, &amps);
    let mut history = vec![f];
    let mut damping = 1e-3;

    for iter in 1..=opts.max_iters {
        let (h, grad) = normal_equations(&s, &lobes, &g, &amps);
        let mut accepted = None;
        for _ in 0..6 {
            let mut sys = h.clone();
            let diag_max = h.diagonal().amax().max(f64::MIN_POSITIVE);
            for p in 0..sys.nrows() {
                sys[(p, p)] += damping * (h[(p, p)] + 1e-9 * diag_max);
            }
            let Some(step) = sys.cholesky().map(|c| c.solve(&(-&grad))) else {
                damping *= 10.0;
                continue;
            };
            // Cap the move: 0.5 rad on the axis, a factor e² on sharpness.
            let mut cap: f64 = 1.0;
            for j in 0..k {
                let ang = (step[3 * j].powi(2) + step[3 * j + 1].powi(2)).sqrt();
                if ang > 0.5 {
                    cap = cap.min(0.5 / ang);
                }
                if step[3 * j + 2].abs() > 2.0 {
                    cap = cap.min(2.0 / step[3 * j + 2].abs());
                }
            }
            let mut scale = cap;
            for _ in 0..12 {
                let cand = apply_step(&lobes, &step, scale);
                let cg = cand.eval(&s);
                let cf = objective(&s, &cg, &amps);
                if cf < f {
                    accepted = Some((cand, cg, cf));
                    break;
                }
                scale *= 0.5;
            }
            if accepted.is_some() {
                damping = (damping * 0.3).max(1e-9);
                break;
            }
            damping *= 10.0;
        }

        let Some((cand, cg, cf)) = accepted else {
            // No descent direction left: stationary point.
            return Ok(finish(&lobes, &amps, f, energy, iter, true, history));
        };
        lobes = cand;
        g = cg;
        let new_amps = solve_amplitudes(&s, &g, k);
        let af = objective(&s, &g, &new_amps);
        let f_new = if af <= cf {
            amps = new_amps;
            af
        } else {
            cf
        };
        let decrease = (f - f_new) / f;
        f = f_new;
        history.push(f);
        if decrease < opts.tol || f <= 1e-28 * energy {
            return Ok(finish(&lobes, &amps, f, energy, iter, true, history));
        }
    }
    Err(EnvError::NonConvergence {
        fit: Box::new(finish(&lobes, &amps, f, energy, opts.max_iters, false, history)),
    })
}
