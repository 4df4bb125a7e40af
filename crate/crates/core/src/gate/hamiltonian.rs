//! Moving-lattice light-shift Hamiltonian with the full position dependence of the
//! lattice cosine retained.
//!
//! In the interaction picture with respect to the qubits and both modes,
//!
//! `H(t) = Omega(t) sum_j r_j sigma_z,j cos(theta_j - mu t - phi + psi + X_j(t))`,
//! `X_j(t) = sum_m b_jm eta_m (a_m e^{-i w_m t} + h.c.)`,
//!
//! so `exp(i X_j)` is a product of displacements `D(i b_jm eta_m e^{i w_m t})`.

use num_complex::Complex64;

use super::config::GateConfig;
use super::pulse::OdfPulse;
use crate::quantum::displacement::displacement_magnitudes;
use crate::quantum::{FockSpace, Hamiltonian, SpinConfig};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Force pulse starting at `t_start` with lattice phase offset `phase_offset`.
#[derive(Debug, Clone)]
pub struct OdfHamiltonian {
    space: FockSpace,
    pulse: OdfPulse,
    t_start: f64,
    mu: f64,
    omega: [f64; 2],
    /// `[mode][ion]`
    signs: [[f64; 2]; 2],
    /// `theta_j - phi + psi`
    base_phase: [f64; 2],
    balance: [f64; 2],
    mag_cm: Vec<f64>,
    mag_bm: Vec<f64>,
}

impl OdfHamiltonian {
    pub fn new(config: &GateConfig, pulse: OdfPulse, space: FockSpace, t_start: f64, phase_offset: f64) -> Self {
        let l = &config.lattice;
        Self {
            space,
            pulse,
            t_start,
            mu: config.mu(),
            omega: [config.cm.omega, config.bm.omega],
            signs: [config.cm.signs, config.bm.signs],
            base_phase: [
                l.theta_ion[0] - l.phi_lattice + phase_offset,
                l.theta_ion[1] - l.phi_lattice + phase_offset,
            ],
            balance: l.balance,
            mag_cm: displacement_magnitudes(config.cm.eta, space.n_cm),
            mag_bm: displacement_magnitudes(config.bm.eta, space.n_bm),
        }
    }

    /// `D(i s eta e^{i w t})` on one mode as a dense row-major matrix.
    fn displacement(mag: &[f64], dim: usize, angle: f64) -> Vec<Complex64> {
        let phases: Vec<Complex64> = (0..dim).map(|m| Complex64::from_polar(1.0, m as f64 * angle)).collect();
        let mut d = vec![ZERO; dim * dim];
        for m in 0..dim {
            for n in 0..dim {
                d[m * dim + n] = phases[m] * phases[n].conj() * mag[m * dim + n];
            }
        }
        d
    }

    fn mode_angle(&self, mode: usize, ion: usize, t: f64) -> f64 {
        let flip = if self.signs[mode][ion] < 0.0 { std::f64::consts::PI } else { 0.0 };
        std::f64::consts::FRAC_PI_2 + self.omega[mode] * t + flip
    }

    /// Dense `H(t)` (row major), built column by column from [`Hamiltonian::apply`].
    pub fn to_dense(&self, t: f64) -> Vec<Complex64> {
        let dim = self.space.dim();
        let mut dense = vec![ZERO; dim * dim];
        let mut e = vec![ZERO; dim];
        let mut col = vec![ZERO; dim];
        for j in 0..dim {
            e.fill(ZERO);
            e[j] = Complex64::new(1.0, 0.0);
            self.apply(t, &e, &mut col);
            for i in 0..dim {
                dense[i * dim + j] = col[i];
            }
        }
        dense
    }
}

impl Hamiltonian for OdfHamiltonian {
    fn apply(&self, t: f64, psi: &[Complex64], out: &mut [Complex64]) {
        let envelope = self.pulse.envelope(t - self.t_start);
        if envelope == 0.0 {
            out.fill(ZERO);
            return;
        }
        let nc = self.space.n_cm;
        let nb = self.space.n_bm;
        let block = nc * nb;

        // ions sharing a c.m. displacement are grouped so each group needs one left product
        let groups: Vec<Vec<usize>> = if self.signs[0][0] == self.signs[0][1] {
            vec![vec![0, 1]]
        } else {
            vec![vec![0], vec![1]]
        };
        let dc: Vec<Vec<Complex64>> = groups
            .iter()
            .map(|g| Self::displacement(&self.mag_cm, nc, self.mode_angle(0, g[0], t)))
            .collect();
        let db: [Vec<Complex64>; 2] =
            [0, 1].map(|j| Self::displacement(&self.mag_bm, nb, self.mode_angle(1, j, t)));
        let lattice: [Complex64; 2] =
            [0, 1].map(|j| Complex64::from_polar(self.balance[j], self.base_phase[j] - self.mu * t));

        let mut left = vec![ZERO; block];
        let mut left_adj = vec![ZERO; block];
        let mut m = vec![ZERO; nb * nb];
        let mut m_adj = vec![ZERO; nb * nb];
        for spin in SpinConfig::ALL {
            let s = spin.index();
            let psi_s = &psi[s * block..(s + 1) * block];
            let out_s = &mut out[s * block..(s + 1) * block];
            out_s.fill(ZERO);
            if psi_s.iter().all(|a| a.re == 0.0 && a.im == 0.0) {
                continue;
            }
            let sz = spin.sigma_z();
            for (g, ions) in groups.iter().enumerate() {
                m.fill(ZERO);
                for &j in ions {
                    let c = lattice[j] * sz[j];
                    for (mv, dv) in m.iter_mut().zip(&db[j]) {
                        *mv += c * dv;
                    }
                }
                for b in 0..nb {
                    for k in 0..nb {
                        m_adj[b * nb + k] = m[k * nb + b].conj();
                    }
                }
                let d = &dc[g];
                // left = D Psi, left_adj = D^dagger Psi
                left.fill(ZERO);
                left_adj.fill(ZERO);
                for a in 0..nc {
                    for k in 0..nc {
                        let x = d[a * nc + k];
                        let y = d[k * nc + a].conj();
                        let row = &psi_s[k * nb..(k + 1) * nb];
                        let la = &mut left[a * nb..(a + 1) * nb];
                        for (l, p) in la.iter_mut().zip(row) {
                            *l += x * p;
                        }
                        let lb = &mut left_adj[a * nb..(a + 1) * nb];
                        for (l, p) in lb.iter_mut().zip(row) {
                            *l += y * p;
                        }
                    }
                }
                // out += left M^T + left_adj conj(M)
                for a in 0..nc {
                    let la = &left[a * nb..(a + 1) * nb];
                    let lb = &left_adj[a * nb..(a + 1) * nb];
                    for b in 0..nb {
                        let mrow = &m[b * nb..(b + 1) * nb];
                        let arow = &m_adj[b * nb..(b + 1) * nb];
                        let mut acc = ZERO;
                        for k in 0..nb {
                            acc += la[k] * mrow[k] + lb[k] * arow[k];
                        }
                        out_s[a * nb + b] += acc;
                    }
                }
            }
            let half = 0.5 * envelope;
            for o in out_s.iter_mut() {
                *o *= half;
            }
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.pulse.breakpoints().into_iter().map(|b| b + self.t_start).collect()
    }
}

/// Time-independent spin-diagonal shift `H = sum_j (w_j / 2) sigma_z,j`.
#[derive(Debug, Clone, Copy)]
pub struct LightShiftHamiltonian {
    pub rates: [f64; 2],
    pub block: usize,
}

impl Hamiltonian for LightShiftHamiltonian {
    fn apply(&self, _t: f64, psi: &[Complex64], out: &mut [Complex64]) {
        for spin in SpinConfig::ALL {
            let sz = spin.sigma_z();
            let e = 0.5 * (self.rates[0] * sz[0] + self.rates[1] * sz[1]);
            let r = spin.index() * self.block..(spin.index() + 1) * self.block;
            for (o, p) in out[r.clone()].iter_mut().zip(&psi[r]) {
                *o = p * e;
            }
        }
    }
}
