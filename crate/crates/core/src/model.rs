//! Tavis-Cummings Hamiltonian and the Lindblad generator of the pumped,
//! dephased, lossy cavity system.
//!
//! Rates are measured in units of the cavity loss rate. Density operators are
//! vectorized by column stacking, `vec(ρ)[i + D·j] = ρ[i, j]`, so that
//! `vec(AρB) = (Bᵀ ⊗ A) vec(ρ)`.

use std::collections::HashMap;
use std::sync::OnceLock;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator_algebra::{
    embed, fock_annihilation, two_level_lowering, HilbertLayout, LinearOperator, Site,
    SparseOperator, C64, ONE, ZERO,
};

/// Physical parameters. All rates are in units of `kappa`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    pub n_emitters: usize,
    pub g: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default)]
    pub pump: f64,
    #[serde(default)]
    pub dephasing: f64,
    /// One detuning per emitter. An empty list means all emitters resonant.
    #[serde(default)]
    pub detunings: Vec<f64>,
    pub n_max: usize,
}

fn default_kappa() -> f64 {
    1.0
}

impl SystemParams {
    /// Identical, resonant, undephased emitters with `kappa = 1`.
    pub fn resonant(n_emitters: usize, g: f64, pump: f64, n_max: usize) -> Self {
        Self {
            n_emitters,
            g,
            kappa: 1.0,
            pump,
            dephasing: 0.0,
            detunings: vec![0.0; n_emitters],
            n_max,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_emitters == 0 {
            return Err(Error::param("n_emitters", "must be at least 1"));
        }
        let finite_nonneg = |name: &str, v: f64| {
            if !v.is_finite() || v < 0.0 {
                Err(Error::param(
                    name,
                    format!("must be finite and >= 0, got {v}"),
                ))
            } else {
                Ok(())
            }
        };
        finite_nonneg("g", self.g)?;
        finite_nonneg("pump", self.pump)?;
        finite_nonneg("dephasing", self.dephasing)?;
        finite_nonneg("kappa", self.kappa)?;
        if self.kappa == 0.0 {
            return Err(Error::param("kappa", "must be > 0"));
        }
        if self.detunings.len() != self.n_emitters {
            return Err(Error::param(
                "detunings",
                format!(
                    "expected {} entries, got {}",
                    self.n_emitters,
                    self.detunings.len()
                ),
            ));
        }
        if self.detunings.iter().any(|d| !d.is_finite()) {
            return Err(Error::param("detunings", "must be finite"));
        }
        Ok(())
    }

    pub fn layout(&self) -> Result<HilbertLayout> {
        HilbertLayout::new(self.n_max, self.n_emitters)
    }

    /// Purcell-enhanced single-emitter relaxation rate `4g²/κ`.
    pub fn purcell_rate(&self) -> f64 {
        4.0 * self.g * self.g / self.kappa
    }

    /// The same cavity and rates holding only emitter `i`.
    pub fn single_emitter(&self, i: usize) -> Self {
        Self {
            n_emitters: 1,
            detunings: vec![self.detunings[i]],
            ..self.clone()
        }
    }
}

/// `H = Σ_i δ_i σ_i†σ_i + g (σ_i† a + σ_i a†)` in the frame of the cavity.
pub fn build_hamiltonian(params: &SystemParams, layout: &HilbertLayout) -> Result<SparseOperator> {
    check_layout(params, layout)?;
    let d = layout.dim();
    let a = embed(
        &fock_annihilation(layout.fock_levels())?,
        Site::Cavity,
        layout,
    )?;
    let ad = a.dagger();
    let mut h = SparseOperator::zeros(d, d)?;
    for i in 0..params.n_emitters {
        let s = embed(&two_level_lowering(), Site::Emitter(i), layout)?;
        let sd = s.dagger();
        let z = sd.matmul(&s)?;
        h = h.add(&z.scale(C64::new(params.detunings[i], 0.0)))?.add(
            &sd.matmul(&a)?
                .add(&s.matmul(&ad)?)?
                .scale(C64::new(params.g, 0.0)),
        )?;
    }
    Ok(h.normalize(0.0))
}

fn check_layout(params: &SystemParams, layout: &HilbertLayout) -> Result<()> {
    params.validate()?;
    if layout.n_emitters() != params.n_emitters || layout.n_max() != params.n_max {
        return Err(Error::InvalidEmbedding(format!(
            "layout (n_max={}, N={}) does not match parameters (n_max={}, N={})",
            layout.n_max(),
            layout.n_emitters(),
            params.n_max,
            params.n_emitters
        )));
    }
    Ok(())
}

/// Vectorized `rate·(xρx† − ½{x†x, ρ})`:
/// `rate·[conj(x)⊗x − ½ I⊗x†x − ½ (x†x)ᵀ⊗I]`.
pub fn build_dissipator(x: &SparseOperator, rate: f64) -> Result<SparseOperator> {
    if !x.is_square() {
        return Err(Error::ShapeMismatch("jump operator must be square".into()));
    }
    let d = x.rows();
    if rate == 0.0 {
        return SparseOperator::zeros(d * d, d * d);
    }
    let id = SparseOperator::identity(d)?;
    let xdx = x.dagger().matmul(x)?;
    let half = C64::new(-0.5, 0.0);
    let sup = x
        .conj()
        .kron(x)
        .add(&id.kron(&xdx).scale(half))?
        .add(&xdx.transpose().kron(&id).scale(half))?;
    Ok(sup.scale(C64::new(rate, 0.0)))
}

/// Full generator `−i(I⊗H − Hᵀ⊗I) + Σ rate·𝒟_x` for arbitrary jump operators.
pub fn lindblad_superoperator(
    hamiltonian: &SparseOperator,
    jumps: &[(SparseOperator, f64)],
) -> Result<SparseOperator> {
    if !hamiltonian.is_square() {
        return Err(Error::ShapeMismatch("Hamiltonian must be square".into()));
    }
    let d = hamiltonian.rows();
    let id = SparseOperator::identity(d)?;
    let minus_i = C64::new(0.0, -1.0);
    let mut l = id
        .kron(hamiltonian)
        .sub(&hamiltonian.transpose().kron(&id))?
        .scale(minus_i);
    for (x, rate) in jumps {
        if x.rows() != d || x.cols() != d {
            return Err(Error::ShapeMismatch(format!(
                "jump operator {}x{} on a {d}-dimensional space",
                x.rows(),
                x.cols()
            )));
        }
        l = l.add(&build_dissipator(x, *rate)?)?;
    }
    Ok(l.normalize(0.0))
}

/// The Lindblad generator of one parameter point.
///
/// The full `D² × D²` matrix is assembled lazily. Because every term
/// conserves or shifts the total excitation number uniformly, the generator
/// is block diagonal in the excitation difference `q = exc(i) − exc(j)` of
/// `ρ[i, j]`; [`Liouvillian::sector`] builds one block directly.
#[derive(Debug)]
pub struct Liouvillian {
    layout: HilbertLayout,
    params: SystemParams,
    hamiltonian: SparseOperator,
    jumps: Vec<(SparseOperator, f64)>,
    charges: Vec<i64>,
    full: OnceLock<SparseOperator>,
    effective: OnceLock<SparseOperator>,
}

pub fn build_liouvillian(params: &SystemParams, layout: &HilbertLayout) -> Result<Liouvillian> {
    check_layout(params, layout)?;
    let hamiltonian = build_hamiltonian(params, layout)?;
    let a = embed(
        &fock_annihilation(layout.fock_levels())?,
        Site::Cavity,
        layout,
    )?;
    let mut jumps = vec![(a, params.kappa)];
    for i in 0..params.n_emitters {
        let s = embed(&two_level_lowering(), Site::Emitter(i), layout)?;
        let sd = s.dagger();
        let z = sd.matmul(&s)?;
        if params.pump > 0.0 {
            jumps.push((sd, params.pump));
        }
        if params.dephasing > 0.0 {
            jumps.push((z, params.dephasing));
        }
    }
    let charges = (0..layout.dim())
        .map(|i| layout.excitation(i) as i64)
        .collect();
    Ok(Liouvillian {
        layout: *layout,
        params: params.clone(),
        hamiltonian,
        jumps,
        charges,
        full: OnceLock::new(),
        effective: OnceLock::new(),
    })
}

impl Liouvillian {
    /// Convenience: validate, lay out and build in one step.
    pub fn new(params: &SystemParams) -> Result<Self> {
        build_liouvillian(params, &params.layout()?)
    }

    pub fn layout(&self) -> &HilbertLayout {
        &self.layout
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn hamiltonian(&self) -> &SparseOperator {
        &self.hamiltonian
    }

    pub fn jumps(&self) -> &[(SparseOperator, f64)] {
        &self.jumps
    }

    pub fn hilbert_dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn liouville_dim(&self) -> usize {
        self.layout.dim() * self.layout.dim()
    }

    /// The full `D² × D²` matrix, assembled from Kronecker products on first use.
    pub fn matrix(&self) -> &SparseOperator {
        self.full.get_or_init(|| {
            lindblad_superoperator(&self.hamiltonian, &self.jumps)
                .expect("terms share the Hilbert dimension")
        })
    }

    /// `K = −iH − ½ Σ rate·x†x`.
    fn effective_hamiltonian(&self) -> &SparseOperator {
        self.effective.get_or_init(|| {
            let mut k = self.hamiltonian.scale(C64::new(0.0, -1.0));
            for (x, rate) in &self.jumps {
                let xdx = x.dagger().matmul(x).expect("square jump operator");
                k = k
                    .add(&xdx.scale(C64::new(-0.5 * rate, 0.0)))
                    .expect("same dimension");
            }
            k
        })
    }

    /// `L vec(ρ)` evaluated as `Kρ + ρK† + Σ rate·xρx†` without assembling
    /// the superoperator.
    pub fn apply_unassembled(&self, x: &[C64]) -> Result<Vec<C64>> {
        let d = self.hilbert_dim();
        if x.len() != d * d {
            return Err(Error::ShapeMismatch(format!(
                "vector of length {} for Hilbert dimension {d}",
                x.len()
            )));
        }
        let k = self.effective_hamiltonian();
        let mut out = left_multiply(k, x, d);
        let kr_adj = left_multiply(k, &adjoint(x, d), d);
        add_adjoint(&mut out, &kr_adj, d, ONE);
        for (op, rate) in &self.jumps {
            // x (x ρ)† = x ρ† x†, whose adjoint is x ρ x†.
            let xr = left_multiply(op, x, d);
            let b = left_multiply(op, &adjoint(&xr, d), d);
            add_adjoint(&mut out, &b, d, C64::new(*rate, 0.0));
        }
        Ok(out)
    }

    /// Liouville indices `i + D·j` with `exc(i) − exc(j) = charge`, ascending.
    pub fn sector_indices(&self, charge: i64) -> Vec<usize> {
        let d = self.hilbert_dim();
        let mut idx = Vec::new();
        for j in 0..d {
            for i in 0..d {
                if self.charges[i] - self.charges[j] == charge {
                    idx.push(i + d * j);
                }
            }
        }
        idx
    }

    /// The block of the generator acting on excitation-difference `charge`,
    /// built column by column from `Kρ + ρK† + Σ rate·xρx†` with
    /// `K = −iH − ½ Σ rate·x†x`.
    pub fn sector(&self, charge: i64) -> Result<Sector> {
        let d = self.hilbert_dim();
        let indices = self.sector_indices(charge);
        if indices.is_empty() {
            return Err(Error::InvalidDimension(format!("sector {charge} is empty")));
        }
        let position: HashMap<usize, usize> =
            indices.iter().enumerate().map(|(p, &k)| (k, p)).collect();

        let k_op = self.effective_hamiltonian();
        // Column access of K and x, row access of K and conj(x).
        let k_cols = k_op.transpose();
        let jump_cols: Vec<_> = self
            .jumps
            .iter()
            .map(|(x, r)| (x.transpose(), *r))
            .collect();

        let mut triplets = Vec::new();
        let mut push = |row: usize, col: usize, v: C64| -> Result<()> {
            match position.get(&row) {
                Some(&p) => {
                    triplets.push((p, col, v));
                    Ok(())
                }
                None if v == ZERO => Ok(()),
                None => Err(Error::ShapeMismatch(
                    "generator mixes excitation sectors".into(),
                )),
            }
        };
        for (col, &kidx) in indices.iter().enumerate() {
            let (i, j) = (kidx % d, kidx / d);
            // K E_ij = Σ_k K[k,i] E_kj
            for (k, v) in k_cols.row(i) {
                push(k + d * j, col, v)?;
            }
            // E_ij K† = Σ_l conj(K[l,j]) E_il
            for (l, v) in k_cols.row(j) {
                push(i + d * l, col, v.conj())?;
            }
            // x E_ij x† = Σ_{k,l} x[k,i] conj(x[l,j]) E_kl
            for (xc, rate) in &jump_cols {
                for (k, xv) in xc.row(i) {
                    for (l, yv) in xc.row(j) {
                        push(k + d * l, col, xv * yv.conj() * *rate)?;
                    }
                }
            }
        }
        let n = indices.len();
        Ok(Sector {
            charge,
            liouville_dim: d * d,
            indices,
            matrix: SparseOperator::from_triplets(n, n, triplets)?.normalize(0.0),
        })
    }
}

impl LinearOperator for Liouvillian {
    fn dim(&self) -> usize {
        self.liouville_dim()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.matrix().mul_vec_into(x, y)
    }
}

fn left_multiply(op: &SparseOperator, x: &[C64], d: usize) -> Vec<C64> {
    let mut out = vec![ZERO; d * d];
    for (src, dst) in x.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
        op.mul_vec_into(src, dst);
    }
    out
}

fn adjoint(x: &[C64], d: usize) -> Vec<C64> {
    let mut out = vec![ZERO; d * d];
    for j in 0..d {
        for i in 0..d {
            out[j + d * i] = x[i + d * j].conj();
        }
    }
    out
}

fn add_adjoint(out: &mut [C64], m: &[C64], d: usize, scale: C64) {
    for j in 0..d {
        for i in 0..d {
            out[i + d * j] += scale * m[j + d * i].conj();
        }
    }
}

/// One excitation-difference block of a Liouvillian.
#[derive(Clone, Debug)]
pub struct Sector {
    pub charge: i64,
    pub liouville_dim: usize,
    pub indices: Vec<usize>,
    pub matrix: SparseOperator,
}

impl Sector {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn gather(&self, full: &[C64]) -> Vec<C64> {
        self.indices.iter().map(|&k| full[k]).collect()
    }

    pub fn scatter(&self, part: &[C64]) -> Vec<C64> {
        let mut full = vec![ZERO; self.liouville_dim];
        for (&k, &v) in self.indices.iter().zip(part) {
            full[k] = v;
        }
        full
    }
}

/// Column-stacking vectorization of a square matrix.
pub fn vec(m: &Mat<C64>) -> Result<Vec<C64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::ShapeMismatch("vec expects a square matrix".into()));
    }
    let d = m.nrows();
    let mut v = Vec::with_capacity(d * d);
    for j in 0..d {
        for i in 0..d {
            v.push(m[(i, j)]);
        }
    }
    Ok(v)
}

pub fn unvec(v: &[C64]) -> Result<Mat<C64>> {
    let d = square_side(v.len())?;
    Ok(Mat::from_fn(d, d, |i, j| v[i + d * j]))
}

fn square_side(len: usize) -> Result<usize> {
    let d = (len as f64).sqrt().round() as usize;
    if d == 0 || d * d != len {
        return Err(Error::InvalidDimension(format!(
            "length {len} is not a positive perfect square"
        )));
    }
    Ok(d)
}

/// A vectorized density operator on a [`HilbertLayout`].
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    vec: Vec<C64>,
    layout: HilbertLayout,
}

impl DensityMatrix {
    pub fn from_vec(vec: Vec<C64>, layout: HilbertLayout) -> Result<Self> {
        if vec.len() != layout.dim() * layout.dim() {
            return Err(Error::ShapeMismatch(format!(
                "vector of length {} for Hilbert dimension {}",
                vec.len(),
                layout.dim()
            )));
        }
        Ok(Self { vec, layout })
    }

    pub fn from_matrix(m: &Mat<C64>, layout: HilbertLayout) -> Result<Self> {
        Self::from_vec(vec(m)?, layout)
    }

    /// `|ψ⟩⟨ψ|` for a basis state.
    pub fn basis_projector(index: usize, layout: HilbertLayout) -> Self {
        let d = layout.dim();
        let mut v = vec![ZERO; d * d];
        v[index + d * index] = ONE;
        Self { vec: v, layout }
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.vec
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.vec
    }

    pub fn layout(&self) -> &HilbertLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.vec[i + self.dim() * j]
    }

    pub fn to_matrix(&self) -> Mat<C64> {
        unvec(&self.vec).expect("length is D²")
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    /// Largest elementwise deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for j in 0..d {
            for i in 0..=j {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// `(ρ + ρ†)/2` followed by trace normalization.
    pub fn symmetrize_and_normalize(&mut self) -> Result<()> {
        let d = self.dim();
        for j in 0..d {
            for i in 0..=j {
                let a = self.vec[i + d * j];
                let b = self.vec[j + d * i];
                let m = (a + b.conj()) * 0.5;
                self.vec[i + d * j] = m;
                self.vec[j + d * i] = m.conj();
            }
        }
        let tr = self.trace();
        if tr.norm() < 1e-300 {
            return Err(Error::InvalidDimension(
                "density matrix has zero trace".into(),
            ));
        }
        let inv = 1.0 / tr.re;
        self.vec.iter_mut().for_each(|v| *v *= inv);
        Ok(())
    }

    /// Photon-number distribution of the cavity, tracing out the emitters.
    pub fn photon_distribution(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.layout.fock_levels()];
        for i in 0..self.dim() {
            p[self.layout.photon_number(i)] += self.get(i, i).re;
        }
        p
    }

    /// Smallest eigenvalue of the Hermitian part; dense, intended for small systems.
    pub fn min_eigenvalue(&self) -> f64 {
        let m = self.to_matrix();
        let h = Mat::from_fn(m.nrows(), m.ncols(), |i, j| {
            (m[(i, j)] + m[(j, i)].conj()) * 0.5
        });
        h.self_adjoint_eigenvalues(faer::Side::Lower)
            .expect("Hermitian eigenvalues")
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest diagonal entry, the large-scale positivity spot check.
    pub fn min_diagonal(&self) -> f64 {
        (0..self.dim())
            .map(|i| self.get(i, i).re)
            .fold(f64::INFINITY, f64::min)
    }
}
