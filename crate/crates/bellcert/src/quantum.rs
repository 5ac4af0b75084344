//! Named quantum strategies (states + POVMs), Born-rule evaluation, and
//! exact negativity/fidelity oracles on explicit density matrices.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::scenario::{Behavior, Scenario};

pub type CMat = DMatrix<Complex64>;

/// Eigenvalue cutoff for "negative" in the negativity oracle.
const NEG_EIG_CUT: f64 = -1e-12;

#[derive(Debug, Error)]
pub enum QuantumError {
    #[error("dimension mismatch between state and measurement operators")]
    DimensionMismatch,
    #[error("input matrix is not Hermitian")]
    NonHermitian,
    #[error("parameter out of range: {0}")]
    BadParameter(String),
}

/// A quantum strategy: shared state plus per-party, per-setting POVMs.
#[derive(Debug, Clone)]
pub struct QuantumStrategy {
    /// Density matrix on the tensor product of the party spaces.
    pub state: CMat,
    /// Local dimension of each party.
    pub dims: Vec<usize>,
    /// `povms[party][setting][outcome]`.
    pub povms: Vec<Vec<Vec<CMat>>>,
}

impl QuantumStrategy {
    pub fn scenario(&self) -> Scenario {
        let settings = self.povms.iter().map(|p| p.len()).collect();
        let outcomes = self.povms.iter().map(|p| p[0].len()).collect();
        Scenario::new(settings, outcomes).expect("strategy defines a valid scenario")
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn sigma_x() -> CMat {
    CMat::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
}

pub fn sigma_y() -> CMat {
    CMat::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)])
}

pub fn sigma_z() -> CMat {
    CMat::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
}

fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Projective two-outcome POVM from a ±1-eigenvalue observable.
fn dichotomic_povm(obs: &CMat) -> Vec<CMat> {
    let n = obs.nrows();
    let one = identity(n);
    vec![
        (&one + obs).map(|v| v * 0.5),
        (&one - obs).map(|v| v * 0.5),
    ]
}

fn projector(ket: &CMat) -> CMat {
    ket * ket.adjoint()
}

fn kron_all(mats: &[&CMat]) -> CMat {
    let mut acc = mats[0].clone();
    for m in &mats[1..] {
        acc = acc.kronecker(m);
    }
    acc
}

/// Born rule: `P(outcomes|settings) = tr(rho (M x M x ...))`.
pub fn born_behavior(strat: &QuantumStrategy) -> Result<Behavior, QuantumError> {
    let sc = strat.scenario();
    let total_dim: usize = strat.dims.iter().product();
    if strat.state.nrows() != total_dim || strat.state.ncols() != total_dim {
        return Err(QuantumError::DimensionMismatch);
    }
    for (p, party) in strat.povms.iter().enumerate() {
        for setting in party {
            for m in setting {
                if m.nrows() != strat.dims[p] {
                    return Err(QuantumError::DimensionMismatch);
                }
            }
        }
    }
    let no = sc.n_outcome_combos();
    let mut table = vec![0.0; sc.table_len()];
    for si in 0..sc.n_setting_combos() {
        let s = sc.settings_tuple(si);
        for oi in 0..no {
            let o = sc.outcomes_tuple(oi);
            let ops: Vec<&CMat> = (0..sc.parties())
                .map(|p| &strat.povms[p][s[p]][o[p]])
                .collect();
            let joint = kron_all(&ops);
            let val: Complex64 = (&strat.state * joint).trace();
            table[si * no + oi] = val.re;
        }
    }
    Ok(Behavior::new(sc, table).expect("table sized from scenario"))
}

/// The CHSH self-testing strategy for `|psi(theta)> = cos t|00> + sin t|11>`,
/// with `A_0 = sz, A_1 = sx` and `B_y = cos(mu) sz + (-1)^y sin(mu) sx`,
/// `tan(mu) = sin(2 theta)`.
pub fn chsh_strategy(theta: f64) -> Result<QuantumStrategy, QuantumError> {
    if !(theta > 0.0 && theta <= std::f64::consts::FRAC_PI_4 + 1e-12) {
        return Err(QuantumError::BadParameter(format!(
            "theta = {theta} outside (0, pi/4]"
        )));
    }
    let ket = CMat::from_column_slice(
        4,
        1,
        &[
            c(theta.cos(), 0.),
            c(0., 0.),
            c(0., 0.),
            c(theta.sin(), 0.),
        ],
    );
    let state = projector(&ket);
    let mu = (2.0 * theta).sin().atan();
    let a_obs = [sigma_z(), sigma_x()];
    let b_obs: Vec<CMat> = (0..2)
        .map(|y| {
            let sign = if y == 0 { 1.0 } else { -1.0 };
            sigma_z().map(|v| v * mu.cos()) + sigma_x().map(|v| v * (sign * mu.sin()))
        })
        .collect();
    Ok(QuantumStrategy {
        state,
        dims: vec![2, 2],
        povms: vec![
            a_obs.iter().map(dichotomic_povm).collect(),
            b_obs.iter().map(dichotomic_povm).collect(),
        ],
    })
}

/// Optimal zeta for the maximal CGLMP3 violation, `(sqrt(11)-sqrt(3))/2`.
pub fn cglmp_optimal_zeta() -> f64 {
    (11f64.sqrt() - 3f64.sqrt()) / 2.0
}

///// The two-qutrit CGLMP strategy: state `(|00> + zeta|11> + |22>)/norm` with
/// Fourier-type measurement bases. Default phases are
/// `phi_A(x) = x/2`, `phi_B(y) = (-1)^y / 4`.
pub fn cglmp_strategy(
    zeta: f64,
    phases: Option<([f64; 2], [f64; 2])>,
) -> Result<QuantumStrategy, QuantumError> {
    if zeta < 0.0 {
        return Err(QuantumError::BadParameter(format!("zeta = {zeta} < 0")));
    }
    let norm = (2.0 + zeta * zeta).sqrt();
    let mut ket = CMat::zeros(9, 1);
    ket[(0, 0)] = c(1.0 / norm, 0.);
    ket[(4, 0)] = c(zeta / norm, 0.);
    ket[(8, 0)] = c(1.0 / norm, 0.);
    let state = projector(&ket);

    let (phi_a, phi_b) = phases.unwrap_or(([0.0, 0.5], [0.25, -0.25]));
    let omega_pow = |e: f64| -> Complex64 {
        let arg = 2.0 * std::f64::consts::PI * e / 3.0;
        c(arg.cos(), arg.sin())
    };
    let basis_ket = |phi: f64, outcome: i64, sign: f64| -> CMat {
        let mut k = CMat::zeros(3, 1);
        for j in 0..3i64 {
            k[(j as usize, 0)] =
                omega_pow(j as f64 * (phi + sign * outcome as f64)) / c(3f64.sqrt(), 0.);
        }
        k
    };
    let povm_for = |phi: f64, sign: f64| -> Vec<CMat> {
        (0..3).map(|o| projector(&basis_ket(phi, o, sign))).collect()
    };
    Ok(QuantumStrategy {
        state,
        dims: vec![3, 3],
        povms: vec![
            vec![povm_for(phi_a[0], 1.0), povm_for(phi_a[1], 1.0)],
            vec![povm_for(phi_b[0], -1.0), povm_for(phi_b[1], -1.0)],
        ],
    })
}

/// GHZ state with `A_0 = B_0 = C_0 = sy` and `A_1 = B_1 = C_1 = -sx`.
pub fn ghz_strategy() -> QuantumStrategy {
    let mut ket = CMat::zeros(8, 1);
    ket[(0, 0)] = c(1.0 / 2f64.sqrt(), 0.);
    ket[(7, 0)] = c(1.0 / 2f64.sqrt(), 0.);
    let state = projector(&ket);
    let obs = [sigma_y(), sigma_x().map(|v| -v)];
    let party: Vec<Vec<CMat>> = obs.iter().map(dichotomic_povm).collect();
    QuantumStrategy {
        state,
        dims: vec![2, 2, 2],
        povms: vec![party.clone(), party.clone(), party],
    }
}

/// Deterministic `|00>` preparation measured with the ideal CHSH observables.
pub fn product_00_strategy() -> QuantumStrategy {
    let mut strat = chsh_strategy(std::f64::consts::FRAC_PI_4).unwrap();
    let mut ket = CMat::zeros(4, 1);
    ket[(0, 0)] = c(1., 0.);
    strat.state = projector(&ket);
    strat
}

/// Partial transpose over the tensor factors selected by `mask`.
pub fn partial_transpose(rho: &CMat, dims: &[usize], mask: &[bool]) -> CMat {
    let total: usize = dims.iter().product();
    assert_eq!(rho.nrows(), total);
    assert_eq!(dims.len(), mask.len());
    let mut out = CMat::zeros(total, total);
    let unpack = |mut idx: usize| -> Vec<usize> {
        let mut t = vec![0; dims.len()];
        for (slot, &d) in t.iter_mut().rev().zip(dims.iter().rev()) {
            *slot = idx % d;
            idx /= d;
        }
        t
    };
    let pack = |t: &[usize]| -> usize { t.iter().zip(dims).fold(0, |acc, (&v, &d)| acc * d + v) };
    for r in 0..total {
        for col in 0..total {
            let mut rt = unpack(r);
            let mut ct = unpack(col);
            for (p, &swap) in mask.iter().enumerate() {
                if swap {
                    std::mem::swap(&mut rt[p], &mut ct[p]);
                }
            }
            out[(pack(&rt), pack(&ct))] = rho[(r, col)];
        }
    }
    out
}

/// Eigenvalues of a Hermitian matrix via the doubled real symmetric embedding.
pub fn hermitian_eigenvalues(m: &CMat) -> Result<Vec<f64>, QuantumError> {
    let n = m.nrows();
    if (m - m.adjoint()).iter().any(|v| v.norm() > 1e-9) {
        return Err(QuantumError::NonHermitian);
    }
    let mut embed = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let v = m[(i, j)];
            embed[(i, j)] = v.re;
            embed[(n + i, n + j)] = v.re;
            embed[(i, n + j)] = -v.im;
            embed[(n + i, j)] = v.im;
        }
    }
    // Each eigenvalue of the Hermitian matrix appears twice in the embedding.
    let mut eigs: Vec<f64> = embed.symmetric_eigen().eigenvalues.iter().copied().collect();
    eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(eigs.iter().step_by(2).copied().collect())
}

/// Negativity `N(rho)`: sum of |negative eigenvalues| of the partial
/// transpose over the parties flagged in `mask`.
pub fn negativity_exact(rho: &CMat, dims: &[usize], mask: &[bool]) -> Result<f64, QuantumError> {
    let pt = partial_transpose(rho, dims, mask);
    let eigs = hermitian_eigenvalues(&pt)?;
    Ok(eigs
        .iter()
        .filter(|&&l| l < NEG_EIG_CUT)
        .map(|l| -l)
        .sum())
}

/// `<psi| rho |psi>` for a pure target state given as a column vector.
pub fn fidelity_exact(rho: &CMat, psi: &CMat) -> Result<f64, QuantumError> {
    if psi.nrows() != rho.nrows() || psi.ncols() != 1 {
        return Err(QuantumError::DimensionMismatch);
    }
    let v = (psi.adjoint() * rho * psi)[(0, 0)];
    Ok(v.re)
}
