//! Photon statistics, emitter observables, the stationary first-order
//! correlation `G(t) = tr{a† e^{Lt} aρ_s}` and the emission spectrum.

use std::collections::BTreeSet;

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DensityMatrix, Liouvillian, SystemParams};
use crate::operator_algebra::{
    embed, fock_annihilation, two_level_lowering, HilbertLayout, Site, SparseOperator, C64, ZERO,
};
use crate::propagator::{dot, evolve, PropagatorOptions};

/// Below this cavity population `g²(0)` is reported as undefined.
pub const G2_THRESHOLD: f64 = 1e-8;

/// `tr(op ρ)`.
pub fn expectation(rho: &DensityMatrix, op: &SparseOperator) -> Result<C64> {
    let d = rho.dim();
    if op.rows() != d || op.cols() != d {
        return Err(Error::ShapeMismatch(format!(
            "operator is {}x{}, density matrix has dimension {d}",
            op.rows(),
            op.cols()
        )));
    }
    let mut acc = ZERO;
    for i in 0..d {
        for (j, v) in op.row(i) {
            acc += v * rho.get(j, i);
        }
    }
    Ok(acc)
}

/// `⟨h⟩` for Hermitian `h`, discarding the rounding-level imaginary part.
fn real_expectation(rho: &DensityMatrix, h: &SparseOperator) -> Result<f64> {
    Ok(expectation(rho, h)?.re)
}

/// Cavity and collective emitter operators on one layout.
#[derive(Clone, Debug)]
pub struct StandardOperators {
    pub a: SparseOperator,
    pub number: SparseOperator,
    /// `a†a†aa`.
    pub pair: SparseOperator,
    /// `Σ_i σ_i†σ_i`.
    pub inversion: SparseOperator,
    /// `J = Σ_i σ_i`.
    pub collective: SparseOperator,
}

impl StandardOperators {
    pub fn new(layout: &HilbertLayout) -> Result<Self> {
        let a = embed(
            &fock_annihilation(layout.fock_levels())?,
            Site::Cavity,
            layout,
        )?;
        let ad = a.dagger();
        let number = ad.matmul(&a)?;
        let pair = ad.matmul(&ad)?.matmul(&a)?.matmul(&a)?;
        let d = layout.dim();
        let mut inversion = SparseOperator::zeros(d, d)?;
        let mut collective = SparseOperator::zeros(d, d)?;
        for i in 0..layout.n_emitters() {
            let s = embed(&two_level_lowering(), Site::Emitter(i), layout)?;
            inversion = inversion.add(&s.dagger().matmul(&s)?)?;
            collective = collective.add(&s)?;
        }
        Ok(Self {
            a,
            number,
            pair,
            inversion,
            collective,
        })
    }
}

/// Scalar observables of one steady state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableRecord {
    /// `⟨a†a⟩`.
    pub n: f64,
    /// `Σ_i ⟨σ_i†σ_i⟩`.
    pub z: f64,
    /// `⟨J†J⟩`.
    pub nj: f64,
    pub g2: Option<f64>,
    pub params: SystemParams,
}

impl ObservableRecord {
    /// Cavity photons per emitter.
    pub fn n_per_emitter(&self) -> f64 {
        self.n / self.params.n_emitters as f64
    }

    /// Cavity photons per unit inversion, undefined without inversion.
    pub fn n_per_inversion(&self) -> Option<f64> {
        (self.z > 0.0).then(|| self.n / self.z)
    }
}

pub fn observe(rho: &DensityMatrix, params: &SystemParams) -> Result<ObservableRecord> {
    let ops = StandardOperators::new(rho.layout())?;
    observe_with(rho, params, &ops)
}

pub fn observe_with(
    rho: &DensityMatrix,
    params: &SystemParams,
    ops: &StandardOperators,
) -> Result<ObservableRecord> {
    let n = real_expectation(rho, &ops.number)?;
    let pair = real_expectation(rho, &ops.pair)?;
    let jd_j = ops.collective.dagger().matmul(&ops.collective)?;
    Ok(ObservableRecord {
        n,
        z: real_expectation(rho, &ops.inversion)?,
        nj: real_expectation(rho, &jd_j)?,
        g2: g2_ratio(pair, n),
        params: params.clone(),
    })
}

fn g2_ratio(pair: f64, n: f64) -> Option<f64> {
    (n >= G2_THRESHOLD).then(|| pair / (n * n))
}

/// `⟨a†a†aa⟩/⟨a†a⟩²`, or `None` when the cavity is essentially empty.
pub fn g2_zero(rho: &DensityMatrix) -> Option<f64> {
    // Both moments only need the photon-number distribution.
    let p = rho.photon_distribution();
    let n: f64 = p.iter().enumerate().map(|(m, pm)| m as f64 * pm).sum();
    let pair: f64 = p
        .iter()
        .enumerate()
        .map(|(m, pm)| (m as f64) * (m as f64 - 1.0) * pm)
        .sum();
    g2_ratio(pair, n)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationOptions {
    pub propagator: PropagatorOptions,
    /// Bound on `‖L vec(ρ_s)‖₂` accepted as stationary.
    pub stationarity_tol: f64,
}

impl Default for CorrelationOptions {
    fn default() -> Self {
        Self {
            propagator: PropagatorOptions::default(),
            stationarity_tol: 1e-8,
        }
    }
}

/// `G(t) = ⟨a†(t) a(0)⟩` in the stationary state on an ascending grid.
pub fn first_order_correlation(
    rho_s: &DensityMatrix,
    l: &Liouvillian,
    t_grid: &[f64],
) -> Result<Vec<C64>> {
    first_order_correlation_with(rho_s, l, t_grid, &CorrelationOptions::default())
}

pub fn first_order_correlation_with(
    rho_s: &DensityMatrix,
    l: &Liouvillian,
    t_grid: &[f64],
    opts: &CorrelationOptions,
) -> Result<Vec<C64>> {
    let mut run = CorrelationRun::start(rho_s, l, opts)?;
    run.advance(t_grid)
}

/// Propagation of `aρ_s`, split by excitation sector, that can be continued
/// to later times.
struct CorrelationRun<'a> {
    parts: Vec<SectorPart>,
    opts: &'a CorrelationOptions,
    t_now: f64,
}

struct SectorPart {
    matrix: SparseOperator,
    /// `vec(a)` restricted to the sector.
    probe: Vec<C64>,
    state: Vec<C64>,
}

impl<'a> CorrelationRun<'a> {
    fn start(rho_s: &DensityMatrix, l: &Liouvillian, opts: &'a CorrelationOptions) -> Result<Self> {
        if rho_s.layout() != l.layout() {
            return Err(Error::ShapeMismatch(
                "density matrix layout differs from generator".into(),
            ));
        }
        let residual = crate::propagator::norm(&l.apply_unassembled(rho_s.as_slice())?);
        if !(residual <= opts.stationarity_tol) {
            return Err(Error::NonStationary {
                residual,
                tol: opts.stationarity_tol,
            });
        }
        let d = l.hilbert_dim();
        let layout = l.layout();
        let ops = StandardOperators::new(layout)?;
        // vec(aρ): apply a to every column.
        let mut seed = vec![ZERO; d * d];
        for (src, dst) in rho_s
            .as_slice()
            .chunks_exact(d)
            .zip(seed.chunks_exact_mut(d))
        {
            ops.a.mul_vec_into(src, dst);
        }
        let mut a_vec = vec![ZERO; d * d];
        for (i, j, v) in ops.a.triplets() {
            a_vec[i + d * j] = v;
        }
        let charge = |k: usize| layout.excitation(k % d) as i64 - layout.excitation(k / d) as i64;
        let mut occupied = BTreeSet::new();
        for (k, v) in seed.iter().enumerate() {
            if *v != ZERO {
                occupied.insert(charge(k));
            }
        }
        let mut parts = Vec::new();
        for &q in &occupied {
            let sector = l.sector(q)?;
            parts.push(SectorPart {
                probe: sector.gather(&a_vec),
                state: sector.gather(&seed),
                matrix: sector.matrix,
            });
        }
        Ok(Self {
            parts,
            opts,
            t_now: 0.0,
        })
    }

    /// `G` at absolute times `>= t_now`, leaving the run at the last time.
    fn advance(&mut self, times: &[f64]) -> Result<Vec<C64>> {
        if times.first().is_some_and(|&t| t < self.t_now) {
            return Err(Error::InvalidTime(
                "correlation times must not go backwards".into(),
            ));
        }
        let rel: Vec<f64> = times.iter().map(|t| t - self.t_now).collect();
        let mut g = vec![ZERO; times.len()];
        for part in &mut self.parts {
            let mut cached: Option<(usize, Vec<C64>)> = None;
            let probe = &part.probe;
            part.state = evolve(
                &part.matrix,
                &part.state,
                &rel,
                &self.opts.propagator,
                |k, step, basis, y| {
                    if basis.is_empty() {
                        return;
                    }
                    if cached.as_ref().map(|c| c.0) != Some(step) {
                        cached = Some((step, basis.iter().map(|v| dot(probe, v)).collect()));
                    }
                    let proj = &cached.as_ref().expect("just filled").1;
                    g[k] += proj.iter().zip(y).map(|(p, c)| p * c).sum::<C64>();
                },
            )?;
        }
        if let Some(&t) = times.last() {
            self.t_now = t;
        }
        Ok(g)
    }
}

/// Settings for the automatically sized correlation grid.
#[derive(Clone, Debug, PartialEq)]
pub struct HorizonOptions {
    /// Grid step; by default resolved from the rates and couplings.
    pub dt: Option<f64>,
    pub initial_t_max: f64,
    /// Stop once `max |G|` over the final tenth of the grid is below this
    /// fraction of `|G(0)|`.
    pub tail_ratio: f64,
    pub max_points: usize,
}

impl Default for HorizonOptions {
    fn default() -> Self {
        Self {
            dt: None,
            initial_t_max: 20.0,
            tail_ratio: 1e-5,
            max_points: 1 << 20,
        }
    }
}

/// Time step resolving the fastest coherent and dissipative scale.
pub fn default_time_step(params: &SystemParams) -> f64 {
    let detuning = params.detunings.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let rabi = 2.0 * params.g * (params.n_emitters as f64).sqrt();
    let omega = (detuning + rabi)
        .max(params.kappa)
        .max(params.pump + params.dephasing);
    (0.1 / params.kappa).min(std::f64::consts::PI / (8.0 * omega))
}

/// `G(t)` on a uniform grid long enough for it to have decayed.
#[derive(Clone, Debug)]
pub struct CorrelationTrace {
    pub dt: f64,
    pub values: Vec<C64>,
    /// `max |G|` over the final tenth of the grid, relative to `|G(0)|`.
    pub tail_ratio: f64,
}

impl CorrelationTrace {
    pub fn times(&self) -> Vec<f64> {
        (0..self.values.len()).map(|k| k as f64 * self.dt).collect()
    }

    pub fn t_max(&self) -> f64 {
        (self.values.len().saturating_sub(1)) as f64 * self.dt
    }
}

fn tail_ratio(values: &[C64]) -> f64 {
    let g0 = values.first().map_or(0.0, |g| g.norm());
    if g0 == 0.0 {
        return 0.0;
    }
    let start = values.len() - values.len().div_ceil(10);
    values[start..].iter().fold(0.0f64, |m, g| m.max(g.norm())) / g0
}

/// Stationary correlation with the horizon doubled until the tail has decayed.
pub fn stationary_correlation(
    rho_s: &DensityMatrix,
    l: &Liouvillian,
    horizon: &HorizonOptions,
    opts: &CorrelationOptions,
) -> Result<CorrelationTrace> {
    let dt = horizon.dt.unwrap_or_else(|| default_time_step(l.params()));
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::param("dt", "must be finite and > 0"));
    }
    let mut run = CorrelationRun::start(rho_s, l, opts)?;
    let mut points = ((horizon.initial_t_max / dt).ceil() as usize + 1).max(16);
    let mut values = run.advance(&[0.0])?;
    loop {
        let times: Vec<f64> = (values.len()..points).map(|k| k as f64 * dt).collect();
        values.extend(run.advance(&times)?);
        let ratio = tail_ratio(&values);
        if ratio < horizon.tail_ratio {
            return Ok(CorrelationTrace {
                dt,
                values,
                tail_ratio: ratio,
            });
        }
        if points >= horizon.max_points {
            return Err(Error::HorizonTooShort { ratio });
        }
        points = (2 * points).min(horizon.max_points);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumOptions {
    /// Required `|G(t_max)|/|G(0)|`.
    pub horizon_ratio: f64,
    /// Zero padding: transform length is the next power of two at least this
    /// many times the number of samples.
    pub padding: usize,
    /// Optional `e^{−η t}` apodization. Adds `2η` to every Lorentzian width.
    pub apodization: Option<f64>,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            horizon_ratio: 1e-4,
            padding: 4,
            apodization: None,
        }
    }
}

/// Emission spectrum of one parameter point.
#[derive(Clone, Debug)]
pub struct SpectrumTrace {
    /// Frequencies relative to the cavity, ascending.
    pub omega: Vec<f64>,
    pub s: Vec<f64>,
    pub correlation: Vec<C64>,
    pub dt: f64,
    pub t_max: f64,
    pub fwhm: Option<f64>,
    /// `(position, height)` of resolved peaks, ascending in position.
    pub peaks: Vec<(f64, f64)>,
    /// Largest imaginary part of the transform relative to `max S`.
    pub imaginary_residue: f64,
    /// `max(0, −min S) / max S`.
    pub negative_excursion: f64,
}

impl SpectrumTrace {
    pub fn d_omega(&self) -> f64 {
        if self.omega.len() < 2 {
            0.0
        } else {
            self.omega[1] - self.omega[0]
        }
    }

    /// `Σ S Δω / 2π`, which should reproduce `G(0) = n`.
    pub fn integral(&self) -> f64 {
        self.s.iter().sum::<f64>() * self.d_omega() / (2.0 * std::f64::consts::PI)
    }

    pub fn max(&self) -> f64 {
        self.s.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `S(ω) = ∫ G(t) e^{−iωt} dt` over the Hermitian extension `G(−t) = G(t)*`.
///
/// With this sign a line at emitter detuning `+δ` appears at `ω = +δ`.
pub fn spectrum(g: &[C64], t_grid: &[f64], opts: &SpectrumOptions) -> Result<SpectrumTrace> {
    let dt = check_uniform(t_grid)?;
    if g.len() != t_grid.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} correlation samples for {} times",
            g.len(),
            t_grid.len()
        )));
    }
    let g0 = g[0].norm();
    let last = g[g.len() - 1].norm();
    if g0 > 0.0 && last > opts.horizon_ratio * g0 {
        return Err(Error::HorizonTooShort { ratio: last / g0 });
    }
    let n = g.len();
    let m = (opts.padding.max(2) * n).next_power_of_two();
    let weight = |t: f64| opts.apodization.map_or(1.0, |eta| (-eta * t).exp());
    let mut buf = vec![ZERO; m];
    buf[0] = C64::new(g[0].re, 0.0);
    for j in 1..n {
        let v = g[j] * weight(t_grid[j]);
        buf[j] = v;
        buf[m - j] = v.conj();
    }
    FftPlanner::<f64>::new()
        .plan_fft_forward(m)
        .process(&mut buf);

    let d_omega = 2.0 * std::f64::consts::PI / (m as f64 * dt);
    let half = m / 2;
    let mut omega = Vec::with_capacity(m);
    let mut s = Vec::with_capacity(m);
    let mut imag: f64 = 0.0;
    for k in (half..m).chain(0..half) {
        let freq = if k >= half {
            k as f64 - m as f64
        } else {
            k as f64
        };
        omega.push(freq * d_omega);
        s.push(dt * buf[k].re);
        imag = imag.max((dt * buf[k].im).abs());
    }
    let s_max = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let s_min = s.iter().cloned().fold(f64::INFINITY, f64::min);
    let scale = if s_max > 0.0 { s_max } else { 1.0 };
    Ok(SpectrumTrace {
        fwhm: fwhm(&omega, &s),
        peaks: find_peaks(&omega, &s),
        omega,
        s,
        correlation: g.to_vec(),
        dt,
        t_max: t_grid[n - 1],
        imaginary_residue: imag / scale,
        negative_excursion: (-s_min).max(0.0) / scale,
    })
}

/// Spectrum of the stationary state with an automatically sized horizon.
pub fn emission_spectrum(
    rho_s: &DensityMatrix,
    l: &Liouvillian,
    horizon: &HorizonOptions,
    corr: &CorrelationOptions,
    opts: &SpectrumOptions,
) -> Result<SpectrumTrace> {
    let trace = stationary_correlation(rho_s, l, horizon, corr)?;
    spectrum(&trace.values, &trace.times(), opts)
}

fn check_uniform(t: &[f64]) -> Result<f64> {
    if t.len() < 2 {
        return Err(Error::NonUniformGrid);
    }
    if t[0] != 0.0 {
        return Err(Error::InvalidTime(
            "correlation grid must start at t = 0".into(),
        ));
    }
    let dt = t[1] - t[0];
    if !(dt > 0.0) {
        return Err(Error::NonUniformGrid);
    }
    for (k, &tk) in t.iter().enumerate() {
        if (tk - k as f64 * dt).abs() > 1e-9 * dt.max(tk.abs()) {
            return Err(Error::NonUniformGrid);
        }
    }
    Ok(dt)
}

/// Full width at half maximum of the tallest peak, by linear interpolation.
pub fn fwhm(omega: &[f64], s: &[f64]) -> Option<f64> {
    let (top, &peak) = s.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
    if !(peak > 0.0) {
        return None;
    }
    let half = 0.5 * peak;
    let crossing = |i: usize, j: usize| {
        // s[i] >= half > s[j]
        omega[i] + (omega[j] - omega[i]) * (s[i] - half) / (s[i] - s[j])
    };
    let mut left = None;
    for i in (0..top).rev() {
        if s[i] < half {
            left = Some(crossing(i + 1, i));
            break;
        }
    }
    let mut right = None;
    for i in top + 1..s.len() {
        if s[i] < half {
            right = Some(crossing(i - 1, i));
            break;
        }
    }
    Some(right? - left?)
}

/// Peaks at least 1% of the maximum. Neighbours whose separating dip stays
/// above 95% of the lower peak are merged into the higher one.
pub fn find_peaks(omega: &[f64], s: &[f64]) -> Vec<(f64, f64)> {
    let s_max = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(s_max > 0.0) || s.len() < 3 {
        return Vec::new();
    }
    let mut idx: Vec<usize> = (1..s.len() - 1)
        .filter(|&k| s[k] >= s[k - 1] && s[k] > s[k + 1] && s[k] >= 0.01 * s_max)
        .collect();
    loop {
        let mut merged = false;
        let mut out: Vec<usize> = Vec::with_capacity(idx.len());
        for &k in &idx {
            if let Some(&prev) = out.last() {
                let dip = s[prev..=k].iter().cloned().fold(f64::INFINITY, f64::min);
                if dip >= 0.95 * s[prev].min(s[k]) {
                    if s[k] > s[prev] {
                        *out.last_mut().expect("nonempty") = k;
                    }
                    merged = true;
                    continue;
                }
            }
            out.push(k);
        }
        idx = out;
        if !merged {
            break;
        }
    }
    idx.into_iter().map(|k| (omega[k], s[k])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator_algebra::ONE;
    use crate::steady_state::{solve_steady, SteadyStateOptions};

    fn cavity_state(p: &[f64], n_emitters: usize) -> DensityMatrix {
        let layout = HilbertLayout::new(p.len() - 1, n_emitters).unwrap();
        let d = layout.dim();
        let mut v = vec![ZERO; d * d];
        let ground = vec![false; n_emitters];
        for (m, &pm) in p.iter().enumerate() {
            let i = layout.basis_index(m, &ground);
            v[i + d * i] = C64::new(pm, 0.0);
        }
        DensityMatrix::from_vec(v, layout).unwrap()
    }

    #[test]
    fn expectation_basics() {
        let p = SystemParams::resonant(2, 0.0, 0.5, 2);
        let l = Liouvillian::new(&p).unwrap();
        let rho = solve_steady(&l, &SteadyStateOptions::default())
            .unwrap()
            .rho;
        let id = SparseOperator::identity(l.hilbert_dim()).unwrap();
        assert!((expectation(&rho, &id).unwrap() - ONE).norm() < 1e-12);
        let rec = observe(&rho, &p).unwrap();
        assert!(rec.n.abs() < 1e-12);
        assert!((rec.z - 2.0).abs() < 1e-10);
        assert!(rec.g2.is_none());
        assert!(expectation(&rho, &SparseOperator::identity(3).unwrap()).is_err());
    }

    #[test]
    fn g2_reference_states() {
        // Thermal with a mean of 0.5, truncated far out.
        let nbar: f64 = 0.5;
        let thermal: Vec<f64> = (0..60)
            .map(|m| nbar.powi(m) / (1.0 + nbar).powi(m + 1))
            .collect();
        assert!((g2_zero(&cavity_state(&thermal, 1)).unwrap() - 2.0).abs() < 1e-8);

        let fock1 = [0.0, 1.0, 0.0];
        assert_eq!(g2_zero(&cavity_state(&fock1, 1)), Some(0.0));

        // Coherent |α|² = 2 on 21 levels, renormalized.
        let mut coh: Vec<f64> = Vec::new();
        let mut term = (-2.0f64).exp();
        for m in 0..21 {
            if m > 0 {
                term *= 2.0 / m as f64;
            }
            coh.push(term);
        }
        let total: f64 = coh.iter().sum();
        coh.iter_mut().for_each(|x| *x /= total);
        assert!((g2_zero(&cavity_state(&coh, 1)).unwrap() - 1.0).abs() < 1e-4);

        assert_eq!(g2_zero(&cavity_state(&[1.0, 0.0], 1)), None);
    }

    #[test]
    fn g2_from_operators_matches_distribution() {
        let p = SystemParams::resonant(2, 0.4, 0.6, 6);
        let l = Liouvillian::new(&p).unwrap();
        let rho = solve_steady(&l, &SteadyStateOptions::default())
            .unwrap()
            .rho;
        let rec = observe(&rho, &p).unwrap();
        assert!((rec.g2.unwrap() - g2_zero(&rho).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn lorentzian_transform_pair() {
        let n = 0.7;
        let dt = 0.05;
        let t: Vec<f64> = (0..8000).map(|k| k as f64 * dt).collect();
        let g: Vec<C64> = t
            .iter()
            .map(|&tk| C64::new(n * (-0.5 * tk).exp(), 0.0))
            .collect();
        let s = spectrum(&g, &t, &SpectrumOptions::default()).unwrap();
        assert!((s.integral() - n).abs() < 0.01 * n);
        assert!((s.fwhm.unwrap() - 1.0).abs() < 0.01);
        assert_eq!(s.peaks.len(), 1);
        assert!(s.peaks[0].0.abs() < s.d_omega());
        assert!(s.imaginary_residue < 1e-10);
    }

    #[test]
    fn shifted_line_sits_at_positive_frequency() {
        let dt = 0.02;
        let t: Vec<f64> = (0..20000).map(|k| k as f64 * dt).collect();
        // a(t) ~ e^{−i·2t} gives ⟨a†(t)a⟩ ~ e^{+i·2t}.
        let g: Vec<C64> = t
            .iter()
            .map(|&tk| C64::from_polar((-0.5 * tk).exp(), 2.0 * tk))
            .collect();
        let s = spectrum(&g, &t, &SpectrumOptions::default()).unwrap();
        assert_eq!(s.peaks.len(), 1);
        assert!(
            (s.peaks[0].0 - 2.0).abs() < 2.0 * s.d_omega(),
            "{:?}",
            s.peaks
        );
    }

    #[test]
    fn spectrum_rejects_bad_grids() {
        let t = [0.0, 0.1, 0.25];
        let g = [ONE, ZERO, ZERO];
        assert!(matches!(
            spectrum(&g, &t, &SpectrumOptions::default()),
            Err(Error::NonUniformGrid)
        ));
        let t = [0.0, 0.1, 0.2];
        let g = [ONE, ONE, ONE];
        assert!(matches!(
            spectrum(&g, &t, &SpectrumOptions::default()),
            Err(Error::HorizonTooShort { .. })
        ));
    }

    #[test]
    fn peak_merging() {
        let omega: Vec<f64> = (0..200).map(|k| -5.0 + 0.05 * k as f64).collect();
        let two = |w: f64, sep: f64| {
            let l = |c: f64| 1.0 / (1.0 + 4.0 * (w - c) * (w - c));
            l(-sep) + l(sep)
        };
        let resolved: Vec<f64> = omega.iter().map(|&w| two(w, 1.5)).collect();
        assert_eq!(find_peaks(&omega, &resolved).len(), 2);
        let blended: Vec<f64> = omega.iter().map(|&w| two(w, 0.2)).collect();
        assert_eq!(find_peaks(&omega, &blended).len(), 1);
    }

    #[test]
    fn correlation_starts_at_photon_number() {
        let mut p = SystemParams::resonant(2, 0.5, 0.3, 4);
        p.detunings = vec![0.4, -0.4];
        let l = Liouvillian::new(&p).unwrap();
        let rho = solve_steady(&l, &SteadyStateOptions::default())
            .unwrap()
            .rho;
        let n = observe(&rho, &p).unwrap().n;
        let g = first_order_correlation(&rho, &l, &[0.0, 0.5, 1.0]).unwrap();
        assert!((g[0] - C64::new(n, 0.0)).norm() < 1e-12);
        assert!(g[2].norm() < g[0].norm());
    }

    #[test]
    fn detuned_emitter_line_appears_at_its_detuning() {
        // Weakly coupled emitter at +3: the emission concentrates near ω = +3.
        let mut p = SystemParams::resonant(1, 0.2, 0.05, 3);
        p.detunings = vec![3.0];
        let l = Liouvillian::new(&p).unwrap();
        let rho = solve_steady(&l, &SteadyStateOptions::default())
            .unwrap()
            .rho;
        let s = emission_spectrum(
            &rho,
            &l,
            &HorizonOptions::default(),
            &CorrelationOptions::default(),
            &SpectrumOptions::default(),
        )
        .unwrap();
        let top = s
            .peaks
            .iter()
            .cloned()
            .fold((0.0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
        assert!((top.0 - 3.0).abs() < 0.1, "{:?}", s.peaks);
        assert!((s.integral() - s.correlation[0].re).abs() < 1e-3 * s.correlation[0].re);
    }

    #[test]
    fn empty_cavity_has_no_correlation() {
        let p = SystemParams::resonant(1, 0.0, 0.4, 3);
        let l = Liouvillian::new(&p).unwrap();
        let rho = solve_steady(&l, &SteadyStateOptions::default())
            .unwrap()
            .rho;
        let g = first_order_correlation(&rho, &l, &[0.0, 1.0, 2.0]).unwrap();
        assert!(g.iter().all(|x| x.norm() < 1e-14));
    }

    #[test]
    fn non_stationary_input_is_rejected() {
        let p = SystemParams::resonant(1, 0.5, 0.4, 2);
        let l = Liouvillian::new(&p).unwrap();
        let layout = *l.layout();
        let rho = DensityMatrix::basis_projector(layout.basis_index(1, &[false]), layout);
        assert!(matches!(
            first_order_correlation(&rho, &l, &[0.0]),
            Err(Error::NonStationary { .. })
        ));
    }

    #[test]
    fn continued_horizon_matches_single_run() {
        let p = SystemParams::resonant(1, 0.8, 0.3, 5);
        let l = Liouvillian::new(&p).unwrap();
        let rho = solve_steady(&l, &SteadyStateOptions::default())
            .unwrap()
            .rho;
        let trace = stationary_correlation(
            &rho,
            &l,
            &HorizonOptions {
                initial_t_max: 2.0,
                ..HorizonOptions::default()
            },
            &CorrelationOptions::default(),
        )
        .unwrap();
        assert!(trace.tail_ratio < 1e-5);
        let times = trace.times();
        let direct = first_order_correlation(&rho, &l, &times).unwrap();
        let worst = direct
            .iter()
            .zip(&trace.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-9 * trace.values[0].norm(), "{worst}");
    }
}
