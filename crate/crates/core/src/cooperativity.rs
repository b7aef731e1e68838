//! Cooperative fraction: the shared-cavity output compared against the same
//! emitters each placed in their own cavity, plus parameter sweeps.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Liouvillian, SystemParams};
use crate::observables::{
    emission_spectrum, observe, CorrelationOptions, HorizonOptions, ObservableRecord,
    SpectrumOptions, SpectrumTrace,
};
use crate::steady_state::{
    check_truncation, solve_steady, SteadyStateOptions, SteadyStateResult,
    DEFAULT_TRUNCATION_THRESHOLD,
};

/// Below this shared-cavity population the cooperative fraction is undefined.
pub const CF_THRESHOLD: f64 = 1e-8;

/// `(shared − Σ independent) / shared`.
pub fn cooperative_fraction_value(shared_n: f64, independent_n: &[f64]) -> Option<f64> {
    (shared_n >= CF_THRESHOLD).then(|| (shared_n - independent_n.iter().sum::<f64>()) / shared_n)
}

/// `(n_J − Z)/n_J`, undefined when `n_J = 0`.
pub fn reference_measure(record: &ObservableRecord) -> Option<f64> {
    (record.nj > 0.0).then(|| (record.nj - record.z) / record.nj)
}

/// Solver health of one steady state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub residual: f64,
    pub truncation_tail: f64,
    pub spectral_gap: Option<f64>,
    pub truncation_adequate: bool,
    pub n_max: usize,
}

impl SolveDiagnostics {
    fn new(result: &SteadyStateResult, threshold: f64) -> Self {
        Self {
            residual: result.residual,
            truncation_tail: result.truncation_tail,
            spectral_gap: result.spectral_gap_estimate,
            truncation_adequate: check_truncation(result, threshold).adequate,
            n_max: result.rho.layout().n_max(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CooperativityPoint {
    pub cf: Option<f64>,
    pub shared_n: f64,
    /// One entry per emitter, each alone in an identical cavity.
    pub independent_n: Vec<f64>,
    pub reference: Option<f64>,
    pub record: ObservableRecord,
    pub diagnostics: SolveDiagnostics,
    /// Whether every single-emitter solve passed its truncation check.
    pub independent_adequate: bool,
}

impl CooperativityPoint {
    pub fn independent_total(&self) -> f64 {
        self.independent_n.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    pub steady: SteadyStateOptions,
    pub truncation_threshold: f64,
    /// Largest photon truncation the doubling rule may reach. `None` keeps
    /// the requested truncation.
    pub max_n_max: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            steady: SteadyStateOptions::default(),
            truncation_threshold: DEFAULT_TRUNCATION_THRESHOLD,
            max_n_max: None,
        }
    }
}

/// The shared system alone, with its truncation grown when allowed.
pub fn solve_shared(
    params: &SystemParams,
    opts: &SolveOptions,
) -> Result<(SystemParams, Liouvillian, SteadyStateResult)> {
    let mut p = params.clone();
    loop {
        let l = Liouvillian::new(&p)?;
        let result = solve_steady(&l, &opts.steady)
            .map_err(|e| e.within(format!("shared system (N = {})", p.n_emitters)))?;
        let verdict = check_truncation(&result, opts.truncation_threshold);
        match (verdict.recommended_n_max, opts.max_n_max) {
            (Some(next), Some(cap)) if next <= cap => p.n_max = next,
            _ => return Ok((p, l, result)),
        }
    }
}

/// Shared system plus one single-emitter system per distinct detuning, all on
/// the same photon truncation.
pub fn cooperative_fraction(
    params: &SystemParams,
    opts: &SolveOptions,
) -> Result<CooperativityPoint> {
    cooperative_fraction_full(params, opts).map(|(point, _, _)| point)
}

fn cooperative_fraction_full(
    params: &SystemParams,
    opts: &SolveOptions,
) -> Result<(CooperativityPoint, Liouvillian, SteadyStateResult)> {
    params.validate()?;
    let mut start = params.clone();
    loop {
        let (used, l, shared) = solve_shared(&start, opts)?;
        let record = observe(&shared.rho, &used)?;
        let mut cache: Vec<(f64, f64, bool)> = Vec::new();
        let mut independent_n = Vec::with_capacity(used.n_emitters);
        let mut independent_adequate = true;
        for i in 0..used.n_emitters {
            let delta = used.detunings[i];
            let (n, ok) = match cache.iter().find(|c| c.0 == delta) {
                Some(&(_, n, ok)) => (n, ok),
                None => {
                    let single = used.single_emitter(i);
                    let l1 = Liouvillian::new(&single)?;
                    let r = solve_steady(&l1, &opts.steady).map_err(|e| {
                        e.within(format!(
                            "single-emitter system {} (detuning {delta})",
                            i + 1
                        ))
                    })?;
                    let ok = check_truncation(&r, opts.truncation_threshold).adequate;
                    let n = observe(&r.rho, &single)?.n;
                    cache.push((delta, n, ok));
                    (n, ok)
                }
            };
            independent_n.push(n);
            independent_adequate &= ok;
        }
        let next = 2 * used.n_max;
        if !independent_adequate && opts.max_n_max.is_some_and(|cap| next <= cap) {
            start = used;
            start.n_max = next;
            continue;
        }
        let diagnostics = SolveDiagnostics::new(&shared, opts.truncation_threshold);
        let point = CooperativityPoint {
            cf: cooperative_fraction_value(record.n, &independent_n),
            shared_n: record.n,
            independent_n,
            reference: reference_measure(&record),
            record,
            diagnostics,
            independent_adequate,
        };
        return Ok((point, l, shared));
    }
}

/// The parameter a sweep varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Pump,
    Coupling,
    /// Detunings spread evenly over `[−δ, +δ]`; for two emitters `±δ`.
    DetuningSymmetric,
    Dephasing,
    NEmitters,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Pump => "pump",
            SweepAxis::Coupling => "coupling",
            SweepAxis::DetuningSymmetric => "detuning_symmetric",
            SweepAxis::Dephasing => "dephasing",
            SweepAxis::NEmitters => "n_emitters",
        }
    }

    /// `base` with the axis set to `value`.
    pub fn apply(self, base: &SystemParams, value: f64) -> Result<SystemParams> {
        let mut p = base.clone();
        if p.detunings.is_empty() {
            p.detunings = vec![0.0; p.n_emitters];
        }
        match self {
            SweepAxis::Pump => p.pump = value,
            SweepAxis::Coupling => p.g = value,
            SweepAxis::Dephasing => p.dephasing = value,
            SweepAxis::DetuningSymmetric => {
                let n = p.n_emitters;
                p.detunings = (0..n)
                    .map(|i| {
                        if n == 1 {
                            0.0
                        } else {
                            -value + 2.0 * value * i as f64 / (n - 1) as f64
                        }
                    })
                    .collect();
            }
            SweepAxis::NEmitters => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::param(
                        "n_emitters",
                        format!("must be a positive integer, got {value}"),
                    ));
                }
                let uniform = p.detunings.first().copied().unwrap_or(0.0);
                if p.detunings.iter().any(|&d| d != uniform) {
                    return Err(Error::param(
                        "detunings",
                        "an emitter-number sweep needs identical detunings",
                    ));
                }
                p.n_emitters = value as usize;
                p.detunings = vec![uniform; p.n_emitters];
            }
        }
        p.validate()?;
        Ok(p)
    }
}

/// Sweep values: explicit, or `points` samples from `start` to `stop`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Grid {
    List {
        values: Vec<f64>,
    },
    Log {
        start: f64,
        stop: f64,
        points: usize,
    },
    Linear {
        start: f64,
        stop: f64,
        points: usize,
    },
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>> {
        let v = match self {
            Grid::List { values } => values.clone(),
            Grid::Log {
                start,
                stop,
                points,
            } => {
                if !(*start > 0.0 && *stop > 0.0) {
                    return Err(Error::param("grid", "log grid bounds must be > 0"));
                }
                spaced(start.ln(), stop.ln(), *points)?
                    .into_iter()
                    .map(f64::exp)
                    .collect()
            }
            Grid::Linear {
                start,
                stop,
                points,
            } => spaced(*start, *stop, *points)?,
        };
        if v.is_empty() {
            return Err(Error::param("grid", "must not be empty"));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::param("grid", "values must be finite"));
        }
        let increasing = v.windows(2).all(|w| w[1] > w[0]);
        let decreasing = v.windows(2).all(|w| w[1] < w[0]);
        if !(increasing || decreasing) {
            return Err(Error::param("grid", "values must be strictly monotone"));
        }
        Ok(v)
    }
}

fn spaced(a: f64, b: f64, points: usize) -> Result<Vec<f64>> {
    match points {
        0 => Err(Error::param("grid", "points must be >= 1")),
        1 => Ok(vec![a]),
        _ => Ok((0..points)
            .map(|k| a + (b - a) * k as f64 / (points - 1) as f64)
            .collect()),
    }
}

/// Which quantities a sweep computes beyond the shared-system observables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepOutputs {
    #[serde(default = "yes")]
    pub cooperativity: bool,
    #[serde(default)]
    pub spectrum: bool,
}

fn yes() -> bool {
    true
}

impl Default for SweepOutputs {
    fn default() -> Self {
        Self {
            cooperativity: true,
            spectrum: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub name: String,
    pub base: SystemParams,
    pub axis: SweepAxis,
    pub grid: Grid,
    #[serde(default)]
    pub outputs: SweepOutputs,
}

/// Numerical settings shared by every point of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSettings {
    pub solve: SolveOptions,
    pub horizon: HorizonOptions,
    pub correlation: CorrelationOptions,
    pub spectrum: SpectrumOptions,
    pub workers: usize,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            solve: SolveOptions::default(),
            horizon: HorizonOptions::default(),
            correlation: CorrelationOptions::default(),
            spectrum: SpectrumOptions::default(),
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PointResult {
    pub point: CooperativityPoint,
    pub spectrum: Option<SpectrumTrace>,
}

impl PointResult {
    /// `ok`, or the reason the point is not fully trustworthy.
    pub fn status(&self) -> &'static str {
        if !self.point.diagnostics.truncation_adequate || !self.point.independent_adequate {
            "truncation"
        } else {
            "ok"
        }
    }
}

/// One grid point; failures are kept with their message.
#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub index: usize,
    pub value: f64,
    pub outcome: std::result::Result<PointResult, String>,
}

impl SweepPoint {
    pub fn status(&self) -> String {
        match &self.outcome {
            Ok(r) => r.status().to_string(),
            Err(e) => format!("error: {e}"),
        }
    }
}

pub fn evaluate_point(
    params: &SystemParams,
    outputs: &SweepOutputs,
    settings: &SweepSettings,
) -> Result<PointResult> {
    evaluate_point_with_state(params, outputs, settings).map(|(r, _, _)| r)
}

/// [`evaluate_point`] that also hands back the shared generator and steady state.
pub fn evaluate_point_with_state(
    params: &SystemParams,
    outputs: &SweepOutputs,
    settings: &SweepSettings,
) -> Result<(PointResult, Liouvillian, SteadyStateResult)> {
    let (point, l, shared) = if outputs.cooperativity {
        cooperative_fraction_full(params, &settings.solve)?
    } else {
        params.validate()?;
        let (used, l, shared) = solve_shared(params, &settings.solve)?;
        let record = observe(&shared.rho, &used)?;
        let point = CooperativityPoint {
            cf: None,
            shared_n: record.n,
            independent_n: Vec::new(),
            reference: reference_measure(&record),
            diagnostics: SolveDiagnostics::new(&shared, settings.solve.truncation_threshold),
            record,
            independent_adequate: true,
        };
        (point, l, shared)
    };
    let spectrum = if outputs.spectrum && point.shared_n >= CF_THRESHOLD {
        Some(
            emission_spectrum(
                &shared.rho,
                &l,
                &settings.horizon,
                &settings.correlation,
                &settings.spectrum,
            )
            .map_err(|e| e.within("emission spectrum"))?,
        )
    } else {
        None
    };
    Ok((PointResult { point, spectrum }, l, shared))
}

/// Evaluate every grid point, passing results to `sink` in grid order as soon
/// as all earlier points are done.
pub fn run_sweep_with<F>(spec: &SweepSpec, settings: &SweepSettings, mut sink: F) -> Result<()>
where
    F: FnMut(SweepPoint),
{
    let values = spec.grid.values()?;
    let workers = settings.workers.clamp(1, values.len());
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<SweepPoint>();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, values) = (&next, &values);
            scope.spawn(move || loop {
                let index = next.fetch_add(1, Ordering::Relaxed);
                let Some(&value) = values.get(index) else {
                    break;
                };
                let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
                    spec.axis
                        .apply(&spec.base, value)
                        .and_then(|p| evaluate_point(&p, &spec.outputs, settings))
                }))
                .unwrap_or_else(|_| Err(Error::Config("worker panicked".into())))
                .map_err(|e| e.to_string());
                if tx
                    .send(SweepPoint {
                        index,
                        value,
                        outcome,
                    })
                    .is_err()
                {
                    break;
                }
            });
        }
        drop(tx);
        let mut pending = BTreeMap::new();
        let mut emitted = 0;
        for point in rx {
            pending.insert(point.index, point);
            while let Some(p) = pending.remove(&emitted) {
                sink(p);
                emitted += 1;
            }
        }
    });
    Ok(())
}

pub fn run_sweep(spec: &SweepSpec, settings: &SweepSettings) -> Result<Vec<SweepPoint>> {
    let mut out = Vec::new();
    run_sweep_with(spec, settings, |p| out.push(p))?;
    Ok(out)
}
