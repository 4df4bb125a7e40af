//! Truncated Fock-space representation of two optical qubits and two axial modes.
//!
//! Amplitudes are stored in the fixed order `(spin_1, spin_2, n_cm, n_bm)` with the
//! motional indices fastest. Spin index 0 is `|down>` (the bright S-state) and the
//! convention `sigma_z |down> = +|down>` holds throughout, so the `down-down` block
//! carries the two-bright population `P0` directly.

pub mod displacement;
pub mod integrator;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use integrator::{Dop853Options, IntegrationStats};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Truncation of the c.m. and breathing-mode Fock ladders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FockSpace {
    pub n_cm: usize,
    pub n_bm: usize,
}

impl FockSpace {
    pub fn new(n_cm: usize, n_bm: usize) -> Result<Self> {
        if n_cm < 2 || n_bm < 2 {
            return Err(Error::invalid("truncation", "each mode needs at least two levels"));
        }
        Ok(Self { n_cm, n_bm })
    }

    pub fn square(n: usize) -> Result<Self> {
        Self::new(n, n)
    }

    /// Size of one spin block (`n_cm * n_bm`).
    pub fn motional_dim(&self) -> usize {
        self.n_cm * self.n_bm
    }

    pub fn dim(&self) -> usize {
        4 * self.motional_dim()
    }

    pub fn index(&self, spin: SpinConfig, n_cm: usize, n_bm: usize) -> usize {
        (spin.index() * self.n_cm + n_cm) * self.n_bm + n_bm
    }
}

impl Default for FockSpace {
    fn default() -> Self {
        Self { n_cm: 15, n_bm: 15 }
    }
}

/// Two-spin computational basis state; ion 1 is the most significant spin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpinConfig {
    DownDown,
    DownUp,
    UpDown,
    UpUp,
}

impl SpinConfig {
    pub const ALL: [SpinConfig; 4] = [
        SpinConfig::DownDown,
        SpinConfig::DownUp,
        SpinConfig::UpDown,
        SpinConfig::UpUp,
    ];

    pub fn index(self) -> usize {
        match self {
            SpinConfig::DownDown => 0,
            SpinConfig::DownUp => 1,
            SpinConfig::UpDown => 2,
            SpinConfig::UpUp => 3,
        }
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i & 3]
    }

    /// `sigma_z` eigenvalues of (ion 1, ion 2).
    pub fn sigma_z(self) -> [f64; 2] {
        match self {
            SpinConfig::DownDown => [1.0, 1.0],
            SpinConfig::DownUp => [1.0, -1.0],
            SpinConfig::UpDown => [-1.0, 1.0],
            SpinConfig::UpUp => [-1.0, -1.0],
        }
    }

    /// Both spins flipped, as after a global pi pulse.
    pub fn flipped(self) -> Self {
        Self::from_index(3 - self.index())
    }

    pub fn is_even(self) -> bool {
        matches!(self, SpinConfig::DownDown | SpinConfig::UpUp)
    }

    /// Number of ions in `|up>` (dark): 0, 1 or 2.
    pub fn dark_count(self) -> usize {
        match self {
            SpinConfig::DownDown => 0,
            SpinConfig::DownUp | SpinConfig::UpDown => 1,
            SpinConfig::UpUp => 2,
        }
    }
}

/// One axial normal mode of the two-ion crystal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeSpec {
    /// Angular frequency (rad/s).
    pub omega: f64,
    /// Lamb-Dicke parameter.
    pub eta: f64,
    /// Participation sign of (ion 1, ion 2).
    pub signs: [f64; 2],
    /// Thermal mean occupation.
    pub nbar: f64,
    /// Heating rate (quanta/s).
    pub heat_rate: f64,
}

impl ModeSpec {
    pub fn validate(&self, name: &'static str) -> Result<()> {
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return Err(Error::invalid(name, "mode frequency must be positive"));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::invalid(name, "Lamb-Dicke parameter must lie in (0, 1)"));
        }
        if !(self.nbar >= 0.0) {
            return Err(Error::invalid(name, "thermal occupation must be non-negative"));
        }
        if !(self.heat_rate >= 0.0) {
            return Err(Error::invalid(name, "heating rate must be non-negative"));
        }
        if self.signs.iter().any(|s| *s != 1.0 && *s != -1.0) {
            return Err(Error::invalid(name, "participation signs must be +1 or -1"));
        }
        Ok(())
    }
}

/// Pure state of spins and motion in the interaction picture.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeState {
    pub amplitudes: Vec<Complex64>,
    pub space: FockSpace,
    /// Time (s) at which the amplitudes are valid.
    pub time: f64,
}

impl CompositeState {
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Amplitudes of one spin block as an `n_cm x n_bm` row-major slice.
    pub fn block(&self, spin: SpinConfig) -> &[Complex64] {
        let m = self.space.motional_dim();
        &self.amplitudes[spin.index() * m..(spin.index() + 1) * m]
    }

    pub fn inner(&self, other: &CompositeState) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &CompositeState) -> f64 {
        self.inner(other).norm_sqr()
    }
}

/// Basis state `|spin> |n_cm, n_bm>` at time zero.
pub fn make_initial_state(
    spin: SpinConfig,
    fock: (usize, usize),
    space: FockSpace,
) -> Result<CompositeState> {
    if fock.0 >= space.n_cm {
        return Err(Error::Truncation {
            mode: "c.m.",
            index: fock.0,
            dim: space.n_cm,
        });
    }
    if fock.1 >= space.n_bm {
        return Err(Error::Truncation {
            mode: "BM",
            index: fock.1,
            dim: space.n_bm,
        });
    }
    let mut amplitudes = vec![ZERO; space.dim()];
    amplitudes[space.index(spin, fock.0, fock.1)] = Complex64::new(1.0, 0.0);
    Ok(CompositeState {
        amplitudes,
        space,
        time: 0.0,
    })
}

/// Geometric occupation distribution `nbar^n / (nbar+1)^(n+1)`, cut once the retained
/// weight reaches `1 - weight_cutoff`, then renormalized.
pub fn thermal_weights(nbar: f64, weight_cutoff: f64) -> Vec<(usize, f64)> {
    if nbar <= 0.0 {
        return vec![(0, 1.0)];
    }
    let cutoff = weight_cutoff.clamp(1e-15, 1.0 - 1e-15);
    let ratio = nbar / (nbar + 1.0);
    let mut weights = Vec::new();
    let mut p = 1.0 / (nbar + 1.0);
    let mut total = 0.0;
    let mut n = 0;
    while total < 1.0 - cutoff {
        weights.push((n, p));
        total += p;
        p *= ratio;
        n += 1;
        if n > 10_000 {
            break;
        }
    }
    for w in weights.iter_mut() {
        w.1 /= total;
    }
    weights
}

/// Single-qubit rotation `exp(-i theta/2 (cos(phi) X + sin(phi) Y))` in the `(down, up)` basis.
pub fn rotation_matrix(theta: f64, phi: f64) -> [[Complex64; 2]; 2] {
    let c = (theta / 2.0).cos();
    let s = (theta / 2.0).sin();
    let minus_i = Complex64::new(0.0, -1.0);
    [
        [Complex64::new(c, 0.0), minus_i * s * Complex64::from_polar(1.0, -phi)],
        [minus_i * s * Complex64::from_polar(1.0, phi), Complex64::new(c, 0.0)],
    ]
}

/// Identical rotation of both spins, identity on the motion.
pub fn apply_global_rotation(state: &CompositeState, theta: f64, phi: f64) -> CompositeState {
    let r = rotation_matrix(theta, phi);
    let mut out = state.clone();
    apply_two_spin(&mut out.amplitudes, state.space.motional_dim(), &r, &r);
    out
}

/// Applies `r1 (x) r2` to the spin indices of a stacked state with blocks of size `block`.
pub(crate) fn apply_two_spin(
    amps: &mut [Complex64],
    block: usize,
    r1: &[[Complex64; 2]; 2],
    r2: &[[Complex64; 2]; 2],
) {
    let mut kron = [[ZERO; 4]; 4];
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                for d in 0..2 {
                    kron[2 * a + b][2 * c + d] = r1[a][c] * r2[b][d];
                }
            }
        }
    }
    for m in 0..block {
        let v = [amps[m], amps[block + m], amps[2 * block + m], amps[3 * block + m]];
        for (row, coeffs) in kron.iter().enumerate() {
            amps[row * block + m] = coeffs[0] * v[0] + coeffs[1] * v[1] + coeffs[2] * v[2] + coeffs[3] * v[3];
        }
    }
}

/// Spin-subspace populations and single-mode moments, motion traced out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observables {
    /// Two bright ions (`down-down`).
    pub p0: f64,
    /// One bright ion.
    pub p1: f64,
    /// Two dark ions (`up-up`).
    pub p2: f64,
    /// `<n>` of (c.m., BM).
    pub mean_n: [f64; 2],
    /// `<a>` of (c.m., BM).
    pub mean_a: [Complex64; 2],
}

impl Observables {
    /// `P0 + P2 - P1`.
    pub fn parity(&self) -> f64 {
        self.p0 + self.p2 - self.p1
    }
}

pub fn reduce_observables(state: &CompositeState) -> Observables {
    let space = state.space;
    let mut pops = [0.0; 4];
    let mut mean_n = [0.0; 2];
    let mut mean_a = [ZERO; 2];
    for spin in SpinConfig::ALL {
        let blk = state.block(spin);
        for c in 0..space.n_cm {
            for b in 0..space.n_bm {
                let amp = blk[c * space.n_bm + b];
                let w = amp.norm_sqr();
                pops[spin.index()] += w;
                mean_n[0] += c as f64 * w;
                mean_n[1] += b as f64 * w;
                if c + 1 < space.n_cm {
                    mean_a[0] += amp.conj() * blk[(c + 1) * space.n_bm + b] * ((c + 1) as f64).sqrt();
                }
                if b + 1 < space.n_bm {
                    mean_a[1] += amp.conj() * blk[c * space.n_bm + b + 1] * ((b + 1) as f64).sqrt();
                }
            }
        }
    }
    let total: f64 = pops.iter().sum();
    let scale = if total > 0.0 { 1.0 / total } else { 1.0 };
    Observables {
        p0: pops[0] * scale,
        p1: (pops[1] + pops[2]) * scale,
        p2: pops[3] * scale,
        mean_n: [mean_n[0] * scale, mean_n[1] * scale],
        mean_a: [mean_a[0] * scale, mean_a[1] * scale],
    }
}

/// A (possibly time-dependent) Hamiltonian on the composite space, in rad/s.
pub trait Hamiltonian: Sync {
    /// Writes `H(t) psi` into `out`.
    fn apply(&self, t: f64, psi: &[Complex64], out: &mut [Complex64]);

    /// Times inside which `H` is smooth; the integrator restarts at each.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// `H = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroHamiltonian;

impl Hamiltonian for ZeroHamiltonian {
    fn apply(&self, _t: f64, _psi: &[Complex64], out: &mut [Complex64]) {
        out.fill(ZERO);
    }
}

/// Time-independent Hamiltonian diagonal in the stored basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalHamiltonian {
    pub energies: Vec<f64>,
}

impl Hamiltonian for DiagonalHamiltonian {
    fn apply(&self, _t: f64, psi: &[Complex64], out: &mut [Complex64]) {
        for ((o, p), e) in out.iter_mut().zip(psi).zip(&self.energies) {
            *o = p * e;
        }
    }
}

/// Solves `i dpsi/dt = H(t) psi` across `t_span` with adaptive DOP853 stepping.
///
/// The norm is not renormalized; a final drift beyond `10 * rel_tol` is reported as an
/// integrator failure.
pub fn evolve<H: Hamiltonian + ?Sized>(
    state: &CompositeState,
    hamiltonian: &H,
    t_span: (f64, f64),
    rel_tol: f64,
) -> Result<CompositeState> {
    evolve_with_stats(state, hamiltonian, t_span, rel_tol).map(|(s, _)| s)
}

pub fn evolve_with_stats<H: Hamiltonian + ?Sized>(
    state: &CompositeState,
    hamiltonian: &H,
    t_span: (f64, f64),
    rel_tol: f64,
) -> Result<(CompositeState, IntegrationStats)> {
    if !(rel_tol > 0.0) {
        return Err(Error::invalid("rel_tol", "must be positive"));
    }
    let (t0, t1) = t_span;
    let mut cuts: Vec<f64> = hamiltonian
        .breakpoints()
        .into_iter()
        .filter(|&b| (b - t0) * (t1 - b) > 0.0)
        .collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if t1 < t0 {
        cuts.reverse();
    }
    let mut nodes = vec![t0];
    nodes.extend(cuts);
    nodes.push(t1);

    let norm0 = state.norm_sqr();
    let mut out = state.clone();
    let mut stats = IntegrationStats::default();
    // tighter internal tolerance keeps the accumulated drift inside the 10 * rel_tol contract
    let opts = Dop853Options::with_tol(rel_tol * 1e-3);
    let minus_i = Complex64::new(0.0, -1.0);
    for w in nodes.windows(2) {
        stats += integrator::integrate(
            |t, y, dy| {
                hamiltonian.apply(t, y, dy);
                for v in dy.iter_mut() {
                    *v *= minus_i;
                }
            },
            w[0],
            w[1],
            &mut out.amplitudes,
            &opts,
        )?;
    }
    out.time = t1;
    let drift = (out.norm_sqr() - norm0).abs();
    if drift > 10.0 * rel_tol * norm0.max(f64::MIN_POSITIVE) {
        return Err(Error::IntegratorFailure(format!(
            "norm drift {drift:e} exceeds bound {:e}",
            10.0 * rel_tol
        )));
    }
    Ok((out, stats))
}
