//! Reproducible Brownian paths and numerical integration of stochastic
//! operators: Euler-Maruyama for Ito input, Heun (midpoint
//! predictor-corrector) for Stratonovich input, plus strong-convergence
//! estimation against closed-form oracles.
//!
//! Determinism contract: every normal draw comes from a counter-based
//! generator keyed by `(seed, source index, step index)` — a splitmix64
//! finalizer chain feeding a Box-Muller transform — so a path regenerates
//! bit-identically from its key on any platform with IEEE-754 doubles and
//! never depends on thread scheduling.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{map_indexed, ExecMode};
use crate::poly::{rational_to_f64, RationalFunction, TimePoly};
use crate::stratonovich::{Interpretation, StochOperator, TimeWeightedField};

// ---------------------------------------------------------------------------
// counter-based normal draws
// ---------------------------------------------------------------------------

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 finalizer: the documented mixing function behind all draws.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for a derived stream (ensemble path, trial, Newton start).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    mix64(base ^ GOLDEN.wrapping_mul(index.wrapping_add(1)))
}

#[inline]
fn uniform_open(bits: u64) -> f64 {
    // (0, 1]: never zero, so the Box-Muller log is finite
    ((bits >> 11) as f64 + 1.0) * (1.0 / 9007199254740992.0)
}

/// Standard normal draw keyed by `(seed, source, step)`.
fn normal_draw(seed: u64, source: u64, step: u64) -> f64 {
    let a = mix64(seed ^ GOLDEN.wrapping_mul(source.wrapping_add(1)));
    let b = mix64(a ^ 0xD1B5_4A32_D192_ED03u64.wrapping_mul(step.wrapping_add(1)));
    let c = mix64(b.wrapping_add(0x2545_F491_4F6C_DD1D));
    let u1 = uniform_open(b);
    let u2 = uniform_open(c);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

// ---------------------------------------------------------------------------
// paths and trajectories
// ---------------------------------------------------------------------------

/// Discrete Brownian driving data on a uniform grid.
#[derive(Clone, Debug)]
pub struct BrownianPath {
    pub seed: u64,
    pub t_end: f64,
    pub dt: f64,
    /// `increments[source][step]`, each N(0, dt).
    pub increments: Vec<Vec<f64>>,
}

impl BrownianPath {
    /// Deterministic sampling; identical arguments give bit-identical paths.
    pub fn sample(seed: u64, t_end: f64, steps: usize, dims: usize) -> Result<BrownianPath> {
        if steps == 0 {
            return Err(Error::Shape("path needs at least one step".into()));
        }
        if !(t_end > 0.0) {
            return Err(Error::Shape("horizon must be positive".into()));
        }
        let dt = t_end / steps as f64;
        let sqrt_dt = dt.sqrt();
        let increments = (0..dims)
            .map(|src| {
                (0..steps)
                    .map(|k| sqrt_dt * normal_draw(seed, src as u64, k as u64))
                    .collect()
            })
            .collect();
        Ok(BrownianPath {
            seed,
            t_end,
            dt,
            increments,
        })
    }

    pub fn steps(&self) -> usize {
        self.increments
            .first()
            .map(Vec::len)
            .unwrap_or_else(|| (self.t_end / self.dt).round() as usize)
    }

    pub fn dims(&self) -> usize {
        self.increments.len()
    }

    /// Aggregate groups of `factor` increments into one coarse step. The sum
    /// over each coarse cell equals the coarse increment exactly, which is
    /// the refinement consistency that strong-order sweeps rely on.
    pub fn coarsen(&self, factor: usize) -> Result<BrownianPath> {
        let steps = self.steps();
        if factor == 0 || steps % factor != 0 {
            return Err(Error::Shape(format!(
                "cannot coarsen {steps} steps by factor {factor}"
            )));
        }
        let increments = self
            .increments
            .iter()
            .map(|src| {
                src.chunks(factor)
                    .map(|chunk| chunk.iter().sum())
                    .collect()
            })
            .collect();
        Ok(BrownianPath {
            seed: self.seed,
            t_end: self.t_end,
            dt: self.dt * factor as f64,
            increments,
        })
    }

    /// Terminal value `B_T` of one source.
    pub fn terminal(&self, source: usize) -> f64 {
        self.increments[source].iter().sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    EulerMaruyama,
    Heun,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub scheme: Scheme,
    pub times: Vec<f64>,
    /// `states[k][i]`: state vector at grid point `k`.
    pub states: Vec<Vec<f64>>,
    pub var_names: Vec<String>,
}

impl Trajectory {
    pub fn terminal(&self) -> &[f64] {
        self.states.last().expect("non-empty trajectory")
    }

    /// CSV export: header `t,<var names>`, one row per grid point, full
    /// double precision (17 significant digits).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for name in &self.var_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (t, x) in self.times.iter().zip(&self.states) {
            out.push_str(&format!("{t:.16e}"));
            for v in x {
                out.push_str(&format!(",{v:.16e}"));
            }
            out.push('\n');
        }
        out
    }
}

// ---------------------------------------------------------------------------
// compiled evaluation
// ---------------------------------------------------------------------------

/// One rational coefficient lowered to f64 term lists for the hot loop.
#[derive(Clone, Debug)]
struct CompiledRat {
    num: Vec<(f64, Vec<(usize, i32)>)>,
    den: Vec<(f64, Vec<(usize, i32)>)>,
    den_is_one: bool,
}

const POLE_GUARD: f64 = 1e-12;

impl CompiledRat {
    fn compile(f: &RationalFunction) -> CompiledRat {
        let lower = |p: &crate::poly::Polynomial| {
            p.terms()
                .map(|(m, c)| {
                    let powers: Vec<(usize, i32)> = m
                        .0
                        .iter()
                        .enumerate()
                        .filter(|(_, &e)| e > 0)
                        .map(|(i, &e)| (i, e as i32))
                        .collect();
                    (rational_to_f64(c), powers)
                })
                .collect::<Vec<_>>()
        };
        CompiledRat {
            num: lower(f.numer()),
            den: lower(f.denom()),
            den_is_one: f.denom().is_one(),
        }
    }

    fn eval(&self, x: &[f64]) -> std::result::Result<f64, ()> {
        let eval_terms = |terms: &[(f64, Vec<(usize, i32)>)]| {
            terms
                .iter()
                .map(|(c, powers)| {
                    let mut t = *c;
                    for &(i, e) in powers {
                        t *= x[i].powi(e);
                    }
                    t
                })
                .sum::<f64>()
        };
        let n = eval_terms(&self.num);
        if self.den_is_one {
            return Ok(n);
        }
        let d = eval_terms(&self.den);
        if d.abs() < POLE_GUARD {
            return Err(());
        }
        Ok(n / d)
    }
}

#[derive(Clone, Debug)]
struct CompiledComponent {
    terms: Vec<(TimePoly, Vec<CompiledRat>)>,
}

impl CompiledComponent {
    fn compile(c: &TimeWeightedField) -> CompiledComponent {
        CompiledComponent {
            terms: c
                .terms()
                .iter()
                .map(|(w, f)| {
                    (
                        w.clone(),
                        f.coeffs().iter().map(CompiledRat::compile).collect(),
                    )
                })
                .collect(),
        }
    }

    fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) -> std::result::Result<(), usize> {
        out.fill(0.0);
        for (w, coeffs) in &self.terms {
            let wt = w.eval_f64(t);
            if wt == 0.0 {
                continue;
            }
            for (i, c) in coeffs.iter().enumerate() {
                match c.eval(x) {
                    Ok(v) => out[i] += wt * v,
                    Err(()) => return Err(i),
                }
            }
        }
        Ok(())
    }
}

/// Operator lowered once before the integration loop; evaluation cost
/// dominates, exact arithmetic in the loop buys nothing.
#[derive(Clone, Debug)]
pub struct CompiledOperator {
    dim: usize,
    drift: CompiledComponent,
    noises: Vec<CompiledComponent>,
    var_names: Vec<String>,
}

impl CompiledOperator {
    pub fn compile(op: &StochOperator) -> CompiledOperator {
        CompiledOperator {
            dim: op.dim(),
            drift: CompiledComponent::compile(op.drift()),
            noises: op.noises().iter().map(CompiledComponent::compile).collect(),
            var_names: op.chart().names().to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_noises(&self) -> usize {
        self.noises.len()
    }
}

fn pole_abort(step: usize, component: usize) -> Error {
    Error::Pole(format!(
        "denominator magnitude below {POLE_GUARD} at step {step} (component {component}); integration aborted"
    ))
}

// ---------------------------------------------------------------------------
// schemes
// ---------------------------------------------------------------------------

fn check_dims(op: &CompiledOperator, x0: &[f64], path: &BrownianPath) -> Result<()> {
    if x0.len() != op.dim {
        return Err(Error::Shape(format!(
            "initial state has dimension {}, operator has {}",
            x0.len(),
            op.dim
        )));
    }
    if path.dims() != op.noises.len() {
        return Err(Error::Shape(format!(
            "path drives {} noise sources, operator has {}",
            path.dims(),
            op.noises.len()
        )));
    }
    Ok(())
}

/// Euler-Maruyama on the Ito form:
/// `x_{k+1} = x_k + drift(t_k, x_k) dt + sum_b noise_b(t_k, x_k) dB^b_k`.
pub fn integrate_em(op: &StochOperator, x0: &[f64], path: &BrownianPath) -> Result<Trajectory> {
    if op.interpretation() != Interpretation::Ito {
        return Err(Error::Unsupported(
            "Euler-Maruyama integrates the Ito form; convert first".into(),
        ));
    }
    integrate_em_compiled(&CompiledOperator::compile(op), x0, path)
}

pub fn integrate_em_compiled(
    op: &CompiledOperator,
    x0: &[f64],
    path: &BrownianPath,
) -> Result<Trajectory> {
    check_dims(op, x0, path)?;
    let n = op.dim;
    let steps = path.steps();
    let dt = path.dt;
    let mut states = Vec::with_capacity(steps + 1);
    let mut times = Vec::with_capacity(steps + 1);
    states.push(x0.to_vec());
    times.push(0.0);
    let mut x = x0.to_vec();
    let mut buf = vec![0.0; n];
    for k in 0..steps {
        let t = k as f64 * dt;
        let mut next = x.clone();
        op.drift
            .eval_into(t, &x, &mut buf)
            .map_err(|i| pole_abort(k, i))?;
        for i in 0..n {
            next[i] += buf[i] * dt;
        }
        for (b, noise) in op.noises.iter().enumerate() {
            noise
                .eval_into(t, &x, &mut buf)
                .map_err(|i| pole_abort(k, i))?;
            let db = path.increments[b][k];
            for i in 0..n {
                next[i] += buf[i] * db;
            }
        }
        x = next;
        times.push((k + 1) as f64 * dt);
        states.push(x.clone());
    }
    Ok(Trajectory {
        scheme: Scheme::EulerMaruyama,
        times,
        states,
        var_names: op.var_names.clone(),
    })
}

/// Heun on the Stratonovich form: predictor
/// `xb = x + S(t, x) D`, corrector `x' = x + (S(t, x) + S(t + dt, xb)) D / 2`,
/// with `S(t, x) D = drift dt + sum_b noise_b dB^b` treated jointly.
pub fn integrate_heun(op: &StochOperator, x0: &[f64], path: &BrownianPath) -> Result<Trajectory> {
    if op.interpretation() != Interpretation::Stratonovich {
        return Err(Error::Unsupported(
            "Heun integrates the Stratonovich form; convert first".into(),
        ));
    }
    integrate_heun_compiled(&CompiledOperator::compile(op), x0, path)
}

pub fn integrate_heun_compiled(
    op: &CompiledOperator,
    x0: &[f64],
    path: &BrownianPath,
) -> Result<Trajectory> {
    check_dims(op, x0, path)?;
    let n = op.dim;
    let steps = path.steps();
    let dt = path.dt;
    let mut states = Vec::with_capacity(steps + 1);
    let mut times = Vec::with_capacity(steps + 1);
    states.push(x0.to_vec());
    times.push(0.0);
    let mut x = x0.to_vec();
    let mut buf = vec![0.0; n];
    let mut incr = vec![0.0; n];
    let mut incr_pred = vec![0.0; n];
    for k in 0..steps {
        let t = k as f64 * dt;
        let eval_increment =
            |tt: f64, state: &[f64], out: &mut [f64], buf: &mut [f64]| -> Result<()> {
                out.fill(0.0);
                op.drift
                    .eval_into(tt, state, buf)
                    .map_err(|i| pole_abort(k, i))?;
                for i in 0..n {
                    out[i] += buf[i] * dt;
                }
                for (b, noise) in op.noises.iter().enumerate() {
                    noise
                        .eval_into(tt, state, buf)
                        .map_err(|i| pole_abort(k, i))?;
                    let db = path.increments[b][k];
                    for i in 0..n {
                        out[i] += buf[i] * db;
                    }
                }
                Ok(())
            };
        eval_increment(t, &x, &mut incr, &mut buf)?;
        let predictor: Vec<f64> = (0..n).map(|i| x[i] + incr[i]).collect();
        eval_increment(t + dt, &predictor, &mut incr_pred, &mut buf)?;
        for i in 0..n {
            x[i] += 0.5 * (incr[i] + incr_pred[i]);
        }
        times.push((k + 1) as f64 * dt);
        states.push(x.clone());
    }
    Ok(Trajectory {
        scheme: Scheme::Heun,
        times,
        states,
        var_names: op.var_names.clone(),
    })
}

/// Pick the scheme matching the operator's interpretation.
pub fn integrate(op: &StochOperator, x0: &[f64], path: &BrownianPath) -> Result<Trajectory> {
    match op.interpretation() {
        Interpretation::Ito => integrate_em(op, x0, path),
        Interpretation::Stratonovich => integrate_heun(op, x0, path),
    }
}

// ---------------------------------------------------------------------------
// ensembles
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct EnsembleConfig {
    pub seed: u64,
    pub paths: usize,
    pub t_end: f64,
    pub steps: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct EnsembleSummary {
    pub paths: usize,
    pub t_end: f64,
    pub steps: usize,
    pub seed: u64,
    /// Per-variable sample mean of the terminal state.
    pub terminal_mean: Vec<f64>,
    /// Per-variable unbiased sample variance of the terminal state.
    pub terminal_variance: Vec<f64>,
}

/// Integrate `paths` trajectories with per-path seeds derived as
/// `derive_seed(seed, index)`; aggregation is in index order, so the result
/// is identical under any scheduling.
pub fn simulate_ensemble(
    op: &StochOperator,
    x0: &[f64],
    cfg: &EnsembleConfig,
) -> Result<(Vec<Trajectory>, EnsembleSummary)> {
    simulate_ensemble_mode(op, x0, cfg, ExecMode::Auto)
}

/// Sequential reference implementation of [`simulate_ensemble`].
pub fn simulate_ensemble_serial(
    op: &StochOperator,
    x0: &[f64],
    cfg: &EnsembleConfig,
) -> Result<(Vec<Trajectory>, EnsembleSummary)> {
    simulate_ensemble_mode(op, x0, cfg, ExecMode::Serial)
}

pub fn simulate_ensemble_mode(
    op: &StochOperator,
    x0: &[f64],
    cfg: &EnsembleConfig,
    mode: ExecMode,
) -> Result<(Vec<Trajectory>, EnsembleSummary)> {
    let compiled = CompiledOperator::compile(op);
    let scheme_is_ito = op.interpretation() == Interpretation::Ito;
    let dims = compiled.num_noises();
    let runs = map_indexed(mode, cfg.paths, |idx| {
        let seed = derive_seed(cfg.seed, idx as u64);
        let path = BrownianPath::sample(seed, cfg.t_end, cfg.steps, dims)?;
        if scheme_is_ito {
            integrate_em_compiled(&compiled, x0, &path)
        } else {
            integrate_heun_compiled(&compiled, x0, &path)
        }
    });
    let trajectories = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let n = compiled.dim();
    let mut mean = vec![0.0; n];
    for t in &trajectories {
        for (m, v) in mean.iter_mut().zip(t.terminal()) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= cfg.paths as f64;
    }
    let mut var = vec![0.0; n];
    if cfg.paths > 1 {
        for t in &trajectories {
            for i in 0..n {
                let d = t.terminal()[i] - mean[i];
                var[i] += d * d;
            }
        }
        for v in &mut var {
            *v /= (cfg.paths - 1) as f64;
        }
    }
    let summary = EnsembleSummary {
        paths: cfg.paths,
        t_end: cfg.t_end,
        steps: cfg.steps,
        seed: cfg.seed,
        terminal_mean: mean,
        terminal_variance: var,
    };
    Ok((trajectories, summary))
}

// ---------------------------------------------------------------------------
// strong convergence
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct StrongOrderReport {
    /// `(dt, mean terminal abs error)` per step count, finest first.
    pub errors: Vec<(f64, f64)>,
    /// Least-squares slope of `log2(err)` against `log2(dt)`, when measurable.
    pub slope: Option<f64>,
    /// Errors at machine scale; slope estimation skipped.
    pub exact: bool,
}

/// Strong error sweep against a closed-form terminal oracle. Every coarse
/// grid reuses the finest path through exact increment aggregation.
///
/// `steps` must be divisors of its maximum. The oracle maps the driving path
/// to the exact terminal state.
pub fn strong_order_estimate<F>(
    op: &StochOperator,
    x0: &[f64],
    steps: &[usize],
    n_paths: usize,
    base_seed: u64,
    oracle: F,
) -> Result<StrongOrderReport>
where
    F: Fn(&BrownianPath) -> Vec<f64> + Sync,
{
    let finest = *steps.iter().max().ok_or_else(|| {
        Error::Shape("strong order sweep needs at least one step count".into())
    })?;
    for &s in steps {
        if s == 0 || finest % s != 0 {
            return Err(Error::Shape(format!(
                "step count {s} does not divide the finest grid {finest}"
            )));
        }
    }
    let compiled = CompiledOperator::compile(op);
    let is_ito = op.interpretation() == Interpretation::Ito;
    let dims = compiled.num_noises();
    let t_end = 1.0;
    let per_path = map_indexed(ExecMode::Auto, n_paths, |idx| -> Result<Vec<f64>> {
        let seed = derive_seed(base_seed, idx as u64);
        let fine = BrownianPath::sample(seed, t_end, finest, dims)?;
        let exact = oracle(&fine);
        steps
            .iter()
            .map(|&s| {
                let path = fine.coarsen(finest / s)?;
                let traj = if is_ito {
                    integrate_em_compiled(&compiled, x0, &path)?
                } else {
                    integrate_heun_compiled(&compiled, x0, &path)?
                };
                let err = traj
                    .terminal()
                    .iter()
                    .zip(&exact)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                Ok(err)
            })
            .collect()
    });
    let per_path = per_path.into_iter().collect::<Result<Vec<_>>>()?;
    let mut errors = Vec::with_capacity(steps.len());
    for (j, &s) in steps.iter().enumerate() {
        let mean = per_path.iter().map(|e| e[j]).sum::<f64>() / n_paths as f64;
        errors.push((t_end / s as f64, mean));
    }
    let exact = errors.iter().all(|&(_, e)| e < 1e-12);
    let slope = if exact {
        None
    } else {
        Some(log_log_slope(&errors))
    };
    Ok(StrongOrderReport {
        errors,
        slope,
        exact,
    })
}

/// Least-squares slope of `log2 y` versus `log2 x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|&(x, _)| x.log2()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, y)| y.max(1e-300).log2()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

/// Closed-form oracles for models with known solutions.
pub mod oracles {
    use super::BrownianPath;

    /// Ito geometric Brownian motion `dX = aX dt + bX dB`:
    /// `X_T = x0 exp((a - b^2/2) T + b B_T)`.
    pub fn gbm_terminal(a: f64, b: f64, x0: f64) -> impl Fn(&BrownianPath) -> Vec<f64> {
        move |path| {
            let bt = if path.dims() > 0 { path.terminal(0) } else { 0.0 };
            vec![x0 * ((a - 0.5 * b * b) * path.t_end + b * bt).exp()]
        }
    }
}
