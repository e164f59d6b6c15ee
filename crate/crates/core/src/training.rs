//! Parameter optimization: multi-start projected BFGS, the optimized linear
//! schedule, and rescaling-factor selection.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixers::MixerSpec;
use crate::model::{complete_graph, PortfolioInstance};
use crate::qaoa::{Circuit, CircuitConfig, InitialStateSpec, QaoaParams};

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 50;
/// Largest step (infinity norm) a single line search may try.
const MAX_STEP: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub starts: usize,
    pub gamma_bounds: (f64, f64),
    pub beta_bounds: (f64, f64),
    /// Relative step for central differences.
    pub gradient_step: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub master_seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            starts: default_starts(1),
            gamma_bounds: (0.0, 2.0 * PI),
            beta_bounds: (0.0, PI),
            gradient_step: 1e-6,
            tol: 1e-8,
            max_iters: 200,
            master_seed: 0,
        }
    }
}

/// 50, 150, 250 starts for p = 1, 2, 3 and 250 beyond.
pub fn default_starts(p: usize) -> usize {
    match p {
        0 | 1 => 50,
        2 => 150,
        _ => 250,
    }
}

impl OptimizerConfig {
    pub fn for_depth(p: usize, master_seed: u64) -> Self {
        Self { starts: default_starts(p), master_seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |(lo, hi): (f64, f64)| !(lo.is_finite() && hi.is_finite() && lo <= hi);
        if self.starts == 0 {
            return Err(Error::InvalidParams("starts must be at least 1".into()));
        }
        if bad(self.gamma_bounds) || bad(self.beta_bounds) {
            return Err(Error::InvalidParams("empty or non-finite bounds".into()));
        }
        if !(self.tol > 0.0) || !(self.gradient_step > 0.0) {
            return Err(Error::InvalidParams("tol and gradient_step must be positive".into()));
        }
        Ok(())
    }

    fn bounds(&self, p: usize) -> (Vec<f64>, Vec<f64>) {
        let lo = (0..2 * p).map(|i| if i < p { self.gamma_bounds.0 } else { self.beta_bounds.0 }).collect();
        let hi = (0..2 * p).map(|i| if i < p { self.gamma_bounds.1 } else { self.beta_bounds.1 }).collect();
        (lo, hi)
    }

    /// Uniform start for start index `idx`, independent of every other start.
    pub fn start_point(&self, p: usize, idx: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(idx as u64);
        let (lo, hi) = self.bounds(p);
        lo.iter().zip(&hi).map(|(&l, &h)| if h > l { rng.random_range(l..=h) } else { l }).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartRecord {
    pub index: usize,
    pub start: Vec<f64>,
    pub start_energy: f64,
    pub point: Vec<f64>,
    pub energy: f64,
    pub iterations: usize,
    pub converged: bool,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResult {
    pub best_params: QaoaParams,
    /// Slope of the linear schedule, for OLS results only.
    pub delta: Option<f64>,
    pub best_energy: f64,
    pub best_ar: f64,
    pub records: Vec<StartRecord>,
    /// `(delta, energy)` coarse grid, for OLS results only.
    pub ols_grid: Vec<(f64, f64)>,
}

pub fn linear_schedule(p: usize, delta: f64) -> Result<QaoaParams> {
    if p == 0 {
        return Err(Error::InvalidParams("depth must be at least 1".into()));
    }
    let l = |i: usize| i as f64 / (p + 1) as f64;
    QaoaParams::new((1..=p).map(|i| delta * l(i)).collect(), (1..=p).map(|i| delta * (1.0 - l(i))).collect())
}

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, &l), &h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(l, h);
    }
}

fn gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64], rel_step: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = rel_step * x[i].abs().max(1.0);
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn is_active(x: f64, g: f64, lo: f64, hi: f64) -> bool {
    (x <= lo && g > 0.0) || (x >= hi && g < 0.0)
}

struct LocalResult {
    point: Vec<f64>,
    energy: f64,
    iterations: usize,
    converged: bool,
}

/// Projected BFGS with central-difference gradients. Variables pinned at a
/// bound with the gradient pushing outward are frozen for the step.
fn projected_bfgs(
    f: &dyn Fn(&[f64]) -> f64,
    start: &[f64],
    lo: &[f64],
    hi: &[f64],
    cfg: &OptimizerConfig,
) -> std::result::Result<LocalResult, String> {
    let n = start.len();
    let mut x = start.to_vec();
    project(&mut x, lo, hi);
    let mut fx = f(&x);
    if !fx.is_finite() {
        return Err(format!("non-finite energy at start: {fx}"));
    }
    let mut g = gradient(f, &x, cfg.gradient_step);
    let mut hinv = vec![vec![0.0; n]; n];
    let reset = |h: &mut Vec<Vec<f64>>| {
        for (i, row) in h.iter_mut().enumerate() {
            row.iter_mut().enumerate().for_each(|(j, v)| *v = if i == j { 1.0 } else { 0.0 });
        }
    };
    reset(&mut hinv);

    for iter in 0..cfg.max_iters {
        let pg = (0..n).map(|i| ((x[i] - g[i]).clamp(lo[i], hi[i]) - x[i]).abs()).fold(0.0, f64::max);
        if pg <= cfg.tol {
            return Ok(LocalResult { point: x, energy: fx, iterations: iter, converged: true });
        }
        let active: Vec<bool> = (0..n).map(|i| is_active(x[i], g[i], lo[i], hi[i])).collect();
        let mut d: Vec<f64> = (0..n)
            .map(|i| {
                if active[i] {
                    return 0.0;
                }
                -(0..n).filter(|&j| !active[j]).map(|j| hinv[i][j] * g[j]).sum::<f64>()
            })
            .collect();
        let slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            reset(&mut hinv);
            d = (0..n).map(|i| if active[i] { 0.0 } else { -g[i] }).collect();
        }
        let dmax = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if dmax > MAX_STEP {
            d.iter_mut().for_each(|v| *v *= MAX_STEP / dmax);
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let mut trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            project(&mut trial, lo, hi);
            let decrease: f64 = trial.iter().zip(&x).zip(&g).map(|((a, b), gi)| (a - b) * gi).sum();
            let ft = f(&trial);
            if ft.is_finite() && ft <= fx + ARMIJO_C1 * decrease && ft <= fx {
                accepted = Some((trial, ft));
                break;
            }
            t *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            // no representable descent left along the projected path
            return Ok(LocalResult { point: x, energy: fx, iterations: iter, converged: true });
        };
        let g_new = gradient(f, &x_new, cfg.gradient_step);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-12 * s.iter().map(|v| v * v).sum::<f64>().sqrt() * y.iter().map(|v| v * v).sum::<f64>().sqrt()
            && sy > 0.0
        {
            let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| hinv[i][j] * y[j]).sum()).collect();
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            let rho = 1.0 / sy;
            for i in 0..n {
                for j in 0..n {
                    hinv[i][j] += (1.0 + rho * yhy) * rho * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        }
        let improvement = fx - f_new;
        x = x_new;
        g = g_new;
        fx = f_new;
        if improvement <= 1e-15 * fx.abs().max(1e-300) && improvement >= 0.0 && iter > 0 {
            return Ok(LocalResult { point: x, energy: fx, iterations: iter + 1, converged: true });
        }
    }
    Ok(LocalResult { point: x, energy: fx, iterations: cfg.max_iters, converged: false })
}

fn run_start(circuit: &Circuit, idx: usize, start: Vec<f64>, lo: &[f64], hi: &[f64], cfg: &OptimizerConfig) -> StartRecord {
    let f = |x: &[f64]| circuit.energy_flat(x);
    let mut clipped = start;
    project(&mut clipped, lo, hi);
    let start_energy = f(&clipped);
    match projected_bfgs(&f, &clipped, lo, hi, cfg) {
        Ok(r) => StartRecord {
            index: idx,
            start: clipped,
            start_energy,
            point: r.point,
            energy: r.energy,
            iterations: r.iterations,
            converged: r.converged,
            failure: None,
        },
        Err(msg) => StartRecord {
            index: idx,
            start: clipped.clone(),
            start_energy,
            point: clipped,
            energy: f64::NAN,
            iterations: 0,
            converged: false,
            failure: Some(msg),
        },
    }
}

/// Multi-start optimization of all `2p` angles. `extra_starts` (flat
/// `[gammas..., betas...]`) run after the random starts and are clipped to
/// the bounds.
pub fn optimize_with_starts(
    circuit: &Circuit,
    p: usize,
    cfg: &OptimizerConfig,
    extra_starts: &[Vec<f64>],
) -> Result<TrainResult> {
    cfg.validate()?;
    if p == 0 {
        return Err(Error::InvalidParams("depth must be at least 1".into()));
    }
    if let Some(bad) = extra_starts.iter().find(|s| s.len() != 2 * p) {
        return Err(Error::DimensionMismatch { expected: 2 * p, got: bad.len() });
    }
    let (lo, hi) = cfg.bounds(p);
    let starts: Vec<Vec<f64>> = (0..cfg.starts)
        .map(|i| cfg.start_point(p, i))
        .chain(extra_starts.iter().cloned())
        .collect();
    let records: Vec<StartRecord> = starts
        .into_par_iter()
        .enumerate()
        .map(|(i, s)| run_start(circuit, i, s, &lo, &hi, cfg))
        .collect();
    let best = records
        .iter()
        .filter(|r| r.failure.is_none())
        .fold(None::<&StartRecord>, |acc, r| match acc {
            Some(b) if b.energy <= r.energy => Some(b),
            _ => Some(r),
        })
        .ok_or(Error::AllStartsFailed)?;
    let best_params = QaoaParams::from_slice(&best.point)?;
    let best_energy = best.energy;
    log::debug!("p={p}: best energy {best_energy} from start {}", best.index);
    Ok(TrainResult {
        best_params,
        delta: None,
        best_energy,
        best_ar: circuit.ratio(best_energy),
        records,
        ols_grid: Vec::new(),
    })
}

pub fn optimize_unrestricted(circuit: &Circuit, p: usize, cfg: &OptimizerConfig) -> Result<TrainResult> {
    optimize_with_starts(circuit, p, cfg, &[])
}

/// Level `p` optimum padded with a zero layer; it prepares the same state.
pub fn pad_params(params: &QaoaParams) -> Vec<f64> {
    let mut g = params.gammas.clone();
    let mut b = params.betas.clone();
    g.push(0.0);
    b.push(0.0);
    g.into_iter().chain(b).collect()
}

/// Optimizes depths `1..=p_max`, feeding each optimum (zero-padded) to the
/// next depth as an extra start. `cfg_for(p)` supplies the per-depth config.
pub fn optimize_nested(
    circuit: &Circuit,
    p_max: usize,
    cfg_for: impl Fn(usize) -> OptimizerConfig,
) -> Result<Vec<TrainResult>> {
    let mut out: Vec<TrainResult> = Vec::with_capacity(p_max);
    for p in 1..=p_max {
        let extra: Vec<Vec<f64>> = out.last().map(|r| vec![pad_params(&r.best_params)]).unwrap_or_default();
        out.push(optimize_with_starts(circuit, p, &cfg_for(p), &extra)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsConfig {
    pub delta_max: f64,
    pub grid_points: usize,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for OlsConfig {
    fn default() -> Self {
        Self { delta_max: 2.0, grid_points: 21, tol: 1e-6, max_iters: 100 }
    }
}

/// Best slope of the linear schedule at depth `p`: coarse grid over
/// `(0, delta_max]` then golden-section refinement around the best node.
pub fn optimize_ols(circuit: &Circuit, p: usize, cfg: &OlsConfig) -> Result<TrainResult> {
    if p == 0 || cfg.grid_points == 0 || !(cfg.delta_max > 0.0) || !(cfg.tol > 0.0) {
        return Err(Error::InvalidParams("invalid OLS configuration".into()));
    }
    let energy = |delta: f64| -> Result<f64> {
        let params = linear_schedule(p, delta)?;
        Ok(circuit.energy(&params.gammas, &params.betas))
    };
    let step = cfg.delta_max / cfg.grid_points as f64;
    let grid: Vec<(f64, f64)> = (1..=cfg.grid_points)
        .into_par_iter()
        .map(|i| {
            let d = step * i as f64;
            energy(d).map(|e| (d, e))
        })
        .collect::<Result<_>>()?;
    let best_i = (0..grid.len()).fold(0, |b, i| if grid[i].1 < grid[b].1 { i } else { b });
    let (mut best_d, mut best_e) = grid[best_i];

    // golden-section search on the bracket around the best node
    let (mut a, mut b) = (step * best_i as f64, (step * (best_i + 2) as f64).min(cfg.delta_max));
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (energy(c)?, energy(d)?);
    let mut iters = 0;
    while b - a > cfg.tol && iters < cfg.max_iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = energy(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = energy(d)?;
        }
        iters += 1;
    }
    for (dd, ee) in [(c, fc), (d, fd)] {
        if ee < best_e && dd > 0.0 {
            best_d = dd;
            best_e = ee;
        }
    }
    if iters >= cfg.max_iters {
        log::warn!("OLS refinement stalled at depth {p}; keeping best of grid and bracket");
    }
    Ok(TrainResult {
        best_params: linear_schedule(p, best_d)?,
        delta: Some(best_d),
        best_energy: best_e,
        best_ar: circuit.ratio(best_e),
        records: Vec::new(),
        ols_grid: grid,
    })
}

/// Depth-1 landscape on a regular grid, gamma-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub factor: f64,
    pub gammas: Vec<f64>,
    pub betas: Vec<f64>,
    pub ar: Vec<Vec<f64>>,
}

impl Heatmap {
    pub fn best(&self) -> (usize, usize, f64) {
        let mut best = (0, 0, f64::NEG_INFINITY);
        for (i, row) in self.ar.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v > best.2 {
                    best = (i, j, v);
                }
            }
        }
        best
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Depth-1 expected AR on an inclusive `ng x nb` grid over the given ranges.
pub fn p1_heatmap(circuit: &Circuit, gamma_range: (f64, f64), beta_range: (f64, f64), ng: usize, nb: usize) -> Result<Heatmap> {
    if ng == 0 || nb == 0 {
        return Err(Error::InvalidParams("grid must have at least one point per axis".into()));
    }
    let gammas = linspace(gamma_range.0, gamma_range.1, ng);
    let betas = linspace(beta_range.0, beta_range.1, nb);
    let ar = gammas
        .par_iter()
        .map(|&g| betas.iter().map(|&b| circuit.ratio(circuit.energy(&[g], &[b]))).collect())
        .collect();
    Ok(Heatmap { factor: 1.0, gammas, betas, ar })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescaleGrid {
    pub candidates: Vec<f64>,
    pub gamma_points: usize,
    pub beta_points: usize,
    pub beta_bounds: (f64, f64),
    pub tolerance: f64,
}

/// `1, 2, 5 x 10^k` for `k = 0..=5`.
pub fn default_rescale_candidates() -> Vec<f64> {
    (0..=5).flat_map(|e| [1.0, 2.0, 5.0].map(|m| m * 10f64.powi(e))).collect()
}

impl Default for RescaleGrid {
    fn default() -> Self {
        Self {
            candidates: default_rescale_candidates(),
            gamma_points: 101,
            beta_points: 101,
            beta_bounds: (0.0, PI),
            tolerance: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescaleSelection {
    /// Chosen multiplier `Lambda` relative to the instance's current lambda.
    pub factor: f64,
    /// `inst.lambda * factor`.
    pub lambda: f64,
    pub heatmaps: Vec<Heatmap>,
}

/// Scans `gamma in [0, 2 pi Lambda]` for each candidate `Lambda` with a Dicke
/// initial state and the exact complete mixer at depth 1; returns the
/// smallest `Lambda` whose best cell is within `tolerance` of the best AR over
/// all candidates.
pub fn select_rescaling_factor(inst: &PortfolioInstance, grid: &RescaleGrid) -> Result<RescaleSelection> {
    let config = CircuitConfig::new(complete_graph(inst.n)?, MixerSpec::exact(), InitialStateSpec::Dicke);
    select_rescaling_factor_with(inst, &config, grid)
}

pub fn select_rescaling_factor_with(
    inst: &PortfolioInstance,
    config: &CircuitConfig,
    grid: &RescaleGrid,
) -> Result<RescaleSelection> {
    if grid.candidates.is_empty() {
        return Err(Error::InvalidParams("empty rescaling candidate list".into()));
    }
    if let Some(c) = grid.candidates.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
        return Err(Error::InvalidParams(format!("rescaling candidate {c} is not positive")));
    }
    let mut sorted = grid.candidates.clone();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let circuit = Circuit::new(inst, config)?;
    let heatmaps = sorted
        .iter()
        .map(|&c| {
            let mut h = p1_heatmap(&circuit, (0.0, 2.0 * PI * c), grid.beta_bounds, grid.gamma_points, grid.beta_points)?;
            h.factor = c;
            Ok(h)
        })
        .collect::<Result<Vec<_>>>()?;
    let overall = heatmaps.iter().map(|h| h.best().2).fold(f64::NEG_INFINITY, f64::max);
    let chosen = heatmaps
        .iter()
        .find(|h| h.best().2 >= overall - grid.tolerance)
        .map(|h| h.factor)
        .unwrap_or(sorted[0]);
    Ok(RescaleSelection { factor: chosen, lambda: inst.lambda * chosen, heatmaps })
}

/// Optimizes each Trotter setting in order, seeding every setting after the
/// first with the previous optimum.
pub fn warm_start_across_trotter(
    inst: &PortfolioInstance,
    base: &CircuitConfig,
    trotters: &[MixerSpec],
    p: usize,
    cfg: &OptimizerConfig,
) -> Result<Vec<TrainResult>> {
    if trotters.is_empty() {
        return Err(Error::InvalidParams("empty Trotter list".into()));
    }
    let mut out: Vec<TrainResult> = Vec::with_capacity(trotters.len());
    for &spec in trotters {
        let config = CircuitConfig { mixer: spec, ..base.clone() };
        let circuit = Circuit::new(inst, &config)?;
        let extra: Vec<Vec<f64>> = out.last().map(|r| vec![r.best_params.to_vec()]).unwrap_or_default();
        out.push(optimize_with_starts(&circuit, p, cfg, &extra)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{chain_decomposition, ring_graph};
    use proptest::prelude::*;
    use rand::Rng;

    fn instance(n: usize, k: usize, seed: u64) -> PortfolioInstance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mu = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut w = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let v = rng.random_range(-0.5..0.5);
                w[i][j] = v;
                w[j][i] = v;
            }
        }
        PortfolioInstance { n, k, q: 0.5, lambda: 1.0, mu, w, seed, provenance: String::new() }
    }

    fn ring_circuit(inst: &PortfolioInstance, spec: MixerSpec) -> Circuit {
        let ring = ring_graph(inst.n).unwrap();
        Circuit::new(inst, &CircuitConfig::new(ring.clone(), spec, InitialStateSpec::AlignedTo(ring))).unwrap()
    }

    #[test]
    fn linear_schedule_examples() {
        let s = linear_schedule(3, 1.0).unwrap();
        assert_eq!(s.gammas, vec![0.25, 0.5, 0.75]);
        assert_eq!(s.betas, vec![0.75, 0.5, 0.25]);
        let z = linear_schedule(4, 0.0).unwrap();
        assert!(z.to_vec().iter().all(|&v| v == 0.0));
        let one = linear_schedule(1, 2.0).unwrap();
        assert_eq!((one.gammas[0], one.betas[0]), (1.0, 1.0));
        assert!(linear_schedule(0, 1.0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::default().validate().is_ok());
        assert!(OptimizerConfig { starts: 0, ..Default::default() }.validate().is_err());
        assert!(OptimizerConfig { tol: 0.0, ..Default::default() }.validate().is_err());
        assert!(OptimizerConfig { beta_bounds: (1.0, 0.0), ..Default::default() }.validate().is_err());
        assert_eq!(OptimizerConfig::for_depth(2, 0).starts, 150);
        assert_eq!(OptimizerConfig::for_depth(3, 0).starts, 250);
    }

    #[test]
    fn start_points_are_per_index() {
        let cfg = OptimizerConfig { master_seed: 9, ..Default::default() };
        assert_eq!(cfg.start_point(2, 5), cfg.start_point(2, 5));
        assert_ne!(cfg.start_point(2, 5), cfg.start_point(2, 6));
        let other = OptimizerConfig { master_seed: 10, ..Default::default() };
        assert_ne!(cfg.start_point(2, 5), other.start_point(2, 5));
    }

    #[test]
    fn bfgs_on_quadratic() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + 10.0 * (x[1] + 0.5).powi(2) + x[0] * x[1];
        let cfg = OptimizerConfig::default();
        let r = projected_bfgs(&f, &[3.0, 3.0], &[-5.0, -5.0], &[5.0, 5.0], &cfg).unwrap();
        // stationary point of the quadratic
        let xa = 2.5 / 1.95;
        let xb = -0.5 - xa / 20.0;
        assert!((r.point[0] - xa).abs() < 1e-5 && (r.point[1] - xb).abs() < 1e-5);
        // minimizer outside the box lands on the boundary
        let r = projected_bfgs(&f, &[0.5, 0.5], &[0.0, 0.0], &[0.5, 0.5], &cfg).unwrap();
        assert!(r.point[1] == 0.0 && (r.point[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn p1_matches_grid_oracle() {
        for seed in [1, 2] {
            let inst = instance(5, 2, seed);
            let circuit = ring_circuit(&inst, MixerSpec::exact());
            let cfg = OptimizerConfig { starts: 30, master_seed: seed, ..Default::default() };
            let r = optimize_unrestricted(&circuit, 1, &cfg).unwrap();
            let mut grid_best = f64::NEG_INFINITY;
            for i in 0..200 {
                for j in 0..200 {
                    let g = 2.0 * PI * i as f64 / 199.0;
                    let b = PI * j as f64 / 199.0;
                    grid_best = grid_best.max(circuit.ratio(circuit.energy(&[g], &[b])));
                }
            }
            assert!(r.best_ar >= grid_best - 0.005, "{} vs grid {}", r.best_ar, grid_best);
        }
    }

    #[test]
    fn flat_landscape() {
        let mut inst = instance(4, 2, 3);
        inst.mu = vec![0.0; 4];
        inst.w = vec![vec![0.0; 4]; 4];
        let circuit = ring_circuit(&inst, MixerSpec::exact());
        let cfg = OptimizerConfig { starts: 3, ..Default::default() };
        let r = optimize_unrestricted(&circuit, 2, &cfg).unwrap();
        assert_eq!(r.best_ar, 1.0);
        for rec in &r.records {
            assert_eq!(rec.point, rec.start);
            assert_eq!(rec.energy, rec.start_energy);
        }
    }

    #[test]
    fn deterministic_and_never_worse_than_starts() {
        let inst = instance(6, 3, 4);
        let circuit = ring_circuit(&inst, MixerSpec::trotter(1, 1));
        let cfg = OptimizerConfig { starts: 8, master_seed: 77, ..Default::default() };
        let a = optimize_unrestricted(&circuit, 2, &cfg).unwrap();
        let b = optimize_unrestricted(&circuit, 2, &cfg).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = pool.install(|| optimize_unrestricted(&circuit, 2, &cfg)).unwrap();
        assert_eq!(a, c);
        for r in &a.records {
            assert!(r.energy <= r.start_energy);
            assert!(a.best_energy <= r.energy);
        }
    }

    #[test]
    fn nested_mode_is_monotone() {
        let inst = instance(6, 3, 5);
        let dec = chain_decomposition(6).unwrap();
        let config = CircuitConfig::new(complete_graph(6).unwrap(), MixerSpec::trotter(1, 1), InitialStateSpec::Dicke)
            .with_chains(dec);
        let circuit = Circuit::new(&inst, &config).unwrap();
        let levels =
            optimize_nested(&circuit, 3, |p| OptimizerConfig { starts: 4, master_seed: p as u64, ..Default::default() })
                .unwrap();
        for w in levels.windows(2) {
            assert!(w[1].best_ar >= w[0].best_ar - 1e-9);
        }
        let padded = pad_params(&levels[0].best_params);
        assert!((circuit.energy_flat(&padded) - levels[0].best_energy).abs() < 1e-12);
    }

    #[test]
    fn ols_properties() {
        let inst = instance(6, 3, 6);
        let circuit = ring_circuit(&inst, MixerSpec::exact());
        let cfg = OlsConfig::default();
        let r = optimize_ols(&circuit, 5, &cfg).unwrap();
        assert_eq!(r.ols_grid.len(), 21);
        let grid_best = r.ols_grid.iter().map(|g| g.1).fold(f64::INFINITY, f64::min);
        assert!(r.best_energy <= grid_best);
        let d = r.delta.unwrap();
        assert!(d > 0.0 && d <= 2.0);

        // p = 1 is the unrestricted energy on the line gamma = beta = delta / 2
        let one = optimize_ols(&circuit, 1, &cfg).unwrap();
        let d = one.delta.unwrap();
        assert_eq!(circuit.energy(&[d / 2.0], &[d / 2.0]), one.best_energy);
        for &(dd, e) in &one.ols_grid {
            assert_eq!(circuit.energy(&[dd / 2.0], &[dd / 2.0]), e);
        }
    }

    #[test]
    fn ols_depth_convergence() {
        let inst = instance(6, 3, 7);
        let ex = crate::model::brute_force_extrema(&inst).unwrap();
        assert_eq!(ex.minimizers.len(), 1);
        let circuit = ring_circuit(&inst, MixerSpec::exact());
        let cfg = OlsConfig::default();
        let a = optimize_ols(&circuit, 100, &cfg).unwrap();
        let b = optimize_ols(&circuit, 400, &cfg).unwrap();
        assert!(b.best_ar >= a.best_ar - 0.01, "{} vs {}", b.best_ar, a.best_ar);
    }

    #[test]
    fn rescaling_selection() {
        let inst = instance(6, 3, 8);
        let grid = RescaleGrid { gamma_points: 21, beta_points: 21, ..Default::default() };
        let sel = select_rescaling_factor(&inst, &grid).unwrap();
        assert_eq!(sel.heatmaps.len(), grid.candidates.len());
        for h in &sel.heatmaps {
            assert_eq!(h.ar.len(), 21);
            assert!(h.ar.iter().all(|row| row.len() == 21));
        }
        let overall = sel.heatmaps.iter().map(|h| h.best().2).fold(f64::NEG_INFINITY, f64::max);
        let chosen = sel.heatmaps.iter().find(|h| h.factor == sel.factor).unwrap();
        assert!(chosen.best().2 >= overall - 0.02);
        for h in sel.heatmaps.iter().filter(|h| h.factor < sel.factor) {
            assert!(h.best().2 < overall - 0.02);
        }

        // a single candidate is returned as is
        let one = RescaleGrid { candidates: vec![1.0], gamma_points: 5, beta_points: 5, ..Default::default() };
        assert_eq!(select_rescaling_factor(&inst, &one).unwrap().factor, 1.0);
        let none = RescaleGrid { candidates: vec![], ..Default::default() };
        assert!(select_rescaling_factor(&inst, &none).is_err());
    }

    #[test]
    fn rescaling_tracks_instance_scale() {
        let inst = instance(6, 3, 8);
        let mut small = inst.clone();
        small.mu.iter_mut().for_each(|v| *v /= 1000.0);
        small.w.iter_mut().flatten().for_each(|v| *v /= 1000.0);
        let grid = RescaleGrid { gamma_points: 31, beta_points: 31, ..Default::default() };
        let a = select_rescaling_factor(&inst, &grid).unwrap().factor;
        let b = select_rescaling_factor(&small, &grid).unwrap().factor;
        let ratio = b / a;
        assert!((200.0..=5000.0).contains(&ratio), "{a} -> {b}");
    }

    #[test]
    fn warm_start() {
        let inst = instance(6, 3, 9);
        let dec = chain_decomposition(6).unwrap();
        let base = CircuitConfig::new(complete_graph(6).unwrap(), MixerSpec::trotter(1, 1), InitialStateSpec::Dicke)
            .with_chains(dec);
        let cfg = OptimizerConfig { starts: 5, master_seed: 3, ..Default::default() };
        let single = warm_start_across_trotter(&inst, &base, &[MixerSpec::trotter(1, 1)], 1, &cfg).unwrap();
        let direct = optimize_unrestricted(&Circuit::new(&inst, &base).unwrap(), 1, &cfg).unwrap();
        assert_eq!(single[0], direct);

        let both =
            warm_start_across_trotter(&inst, &base, &[MixerSpec::trotter(1, 1), MixerSpec::trotter(2, 1)], 1, &cfg)
                .unwrap();
        let warm = both[1].records.last().unwrap();
        assert_eq!(warm.index, cfg.starts);
        assert!(warm.energy <= warm.start_energy);
        assert!(warm_start_across_trotter(&inst, &base, &[], 1, &cfg).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn converged_points_respect_bounds(seed in 0u64..1000, glo in 0.0f64..1.0, gw in 0.1f64..2.0, blo in -1.0f64..0.5, bw in 0.1f64..1.0) {
            let inst = instance(4, 2, seed);
            let circuit = ring_circuit(&inst, MixerSpec::trotter(1, 1));
            let cfg = OptimizerConfig {
                starts: 3,
                gamma_bounds: (glo, glo + gw),
                beta_bounds: (blo, blo + bw),
                master_seed: seed,
                ..Default::default()
            };
            let r = optimize_unrestricted(&circuit, 2, &cfg).unwrap();
            for rec in &r.records {
                for (i, &v) in rec.point.iter().enumerate() {
                    let (lo, hi) = if i < 2 { cfg.gamma_bounds } else { cfg.beta_bounds };
                    prop_assert!(v >= lo && v <= hi);
                }
                prop_assert!(rec.energy <= rec.start_energy);
            }
        }
    }
}
