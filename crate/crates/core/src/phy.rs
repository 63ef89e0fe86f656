//! Array-processing math: UPA steering vectors, geometric channel assembly,
//! azimuth codebooks, link evaluation, and exhaustive optimal beam-pair
//! labeling.
//!
//! Angle convention (global): elevation is measured from the +z axis, so a
//! horizontal direction has elevation pi/2; azimuth is measured from +y
//! (boresight toward the receiver corridor), positive toward +x, in
//! (-pi, pi]. The per-element phase of a direction (theta, phi) is
//! `pi * (w cos(theta) + h sin(theta) sin(phi))` for vertical index w and
//! horizontal index h, i.e. half-wavelength spacing on both axes.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raytrace::Path;
use crate::scalar::Scalar;

/// Uniform planar array: `n_vert` rows stacked along z, `n_horiz` columns
/// along the horizontal axis. Element `(w, h)` lives at flat index
/// `w * n_horiz + h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpaConfig {
    pub n_vert: usize,
    pub n_horiz: usize,
}

impl UpaConfig {
    pub fn new(n_vert: usize, n_horiz: usize) -> Self {
        Self { n_vert, n_horiz }
    }

    pub fn len(&self) -> usize {
        self.n_vert * self.n_horiz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Default for UpaConfig {
    /// 8 x 72 elements, the simulation default for both link ends.
    fn default() -> Self {
        Self::new(8, 72)
    }
}

/// Unit-norm steering vector of the array toward (elevation, azimuth).
pub fn steering_vector<T: Scalar>(
    cfg: UpaConfig,
    elevation: T,
    azimuth: T,
) -> Vec<Complex<T>> {
    let scale = T::one() / T::of_usize(cfg.len()).sqrt();
    let pi = T::PI();
    let vert = pi * elevation.cos();
    let horiz = pi * elevation.sin() * azimuth.sin();
    let mut out = Vec::with_capacity(cfg.len());
    for w in 0..cfg.n_vert {
        let wv = T::of_usize(w) * vert;
        for h in 0..cfg.n_horiz {
            let phase = wv + T::of_usize(h) * horiz;
            out.push(Complex::from_polar(scale, phase));
        }
    }
    out
}

/// `sum conj(a_k) b_k`.
pub fn dot_conj<T: Scalar>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = Complex::new(T::zero(), T::zero());
    for (x, y) in a.iter().zip(b) {
        acc += x.conj() * *y;
    }
    acc
}

/// Dense narrowband channel matrix, shape (rx elements, tx elements).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix<T> {
    pub n_rx: usize,
    pub n_tx: usize,
    entries: Vec<Complex<T>>,
}

impl<T: Scalar> ChannelMatrix<T> {
    pub fn entries(&self) -> &[Complex<T>] {
        &self.entries
    }

    pub fn at(&self, rx: usize, tx: usize) -> Complex<T> {
        self.entries[rx * self.n_tx + tx]
    }

    /// `H f_tx`.
    pub fn apply(&self, f_tx: &[Complex<T>]) -> Vec<Complex<T>> {
        debug_assert_eq!(f_tx.len(), self.n_tx);
        self.entries
            .chunks(self.n_tx)
            .map(|row| {
                let mut acc = Complex::new(T::zero(), T::zero());
                for (h, f) in row.iter().zip(f_tx) {
                    acc += *h * *f;
                }
                acc
            })
            .collect()
    }

    /// `f_rx^H H f_tx`.
    pub fn bilinear(&self, f_rx: &[Complex<T>], f_tx: &[Complex<T>]) -> Complex<T> {
        debug_assert_eq!(f_rx.len(), self.n_rx);
        debug_assert_eq!(f_tx.len(), self.n_tx);
        let mut acc = Complex::new(T::zero(), T::zero());
        for (r, fr) in f_rx.iter().enumerate() {
            let row = &self.entries[r * self.n_tx..(r + 1) * self.n_tx];
            let mut row_acc = Complex::new(T::zero(), T::zero());
            for (h, ft) in row.iter().zip(f_tx) {
                row_acc += *h * *ft;
            }
            acc += fr.conj() * row_acc;
        }
        acc
    }

    pub fn frobenius_norm(&self) -> T {
        self.entries
            .iter()
            .map(|c| c.norm_sqr())
            .fold(T::zero(), |a, b| a + b)
            .sqrt()
    }
}

/// Sum of per-path rank-1 terms `alpha_l a_rx(aoa_l) a_tx(aod_l)^H`.
pub fn channel_matrix<T: Scalar>(
    paths: &[Path<T>],
    tx_cfg: UpaConfig,
    rx_cfg: UpaConfig,
) -> Result<ChannelMatrix<T>> {
    if paths.is_empty() {
        return Err(Error::NoLink);
    }
    let n_rx = rx_cfg.len();
    let n_tx = tx_cfg.len();
    let mut entries = vec![Complex::new(T::zero(), T::zero()); n_rx * n_tx];
    for path in paths {
        let a_rx = steering_vector(rx_cfg, path.aoa.elevation, path.aoa.azimuth);
        let a_tx = steering_vector(tx_cfg, path.aod.elevation, path.aod.azimuth);
        for (r, ar) in a_rx.iter().enumerate() {
            let row = &mut entries[r * n_tx..(r + 1) * n_tx];
            let lead = path.gain * *ar;
            for (e, at) in row.iter_mut().zip(&a_tx) {
                *e += lead * at.conj();
            }
        }
    }
    Ok(ChannelMatrix {
        n_rx,
        n_tx,
        entries,
    })
}

/// Finite set of candidate beamforming vectors at equally spaced azimuths
/// and a fixed elevation.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook<T> {
    pub array: UpaConfig,
    pub elevation: T,
    pub azimuths: Vec<T>,
    beams: Vec<Vec<Complex<T>>>,
}

impl<T: Scalar> Codebook<T> {
    pub fn len(&self) -> usize {
        self.beams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beams.is_empty()
    }

    pub fn beam(&self, idx: usize) -> &[Complex<T>] {
        &self.beams[idx]
    }

    pub fn beams(&self) -> &[Vec<Complex<T>>] {
        &self.beams
    }
}

/// Beam `k` (0-based) points at azimuth `(2k - N) / (2N) * pi`, i.e. the N
/// beams sweep [-pi/2, pi/2) in steps of pi/N at the fixed elevation.
pub fn build_codebook<T: Scalar>(
    cfg: UpaConfig,
    n_beams: usize,
    elevation: T,
) -> Result<Codebook<T>> {
    if n_beams == 0 {
        return Err(Error::Config("codebook needs at least one beam".into()));
    }
    let denom = T::of_usize(2 * n_beams);
    let mut azimuths = Vec::with_capacity(n_beams);
    let mut beams = Vec::with_capacity(n_beams);
    for k in 0..n_beams {
        let numer = T::of_usize(2 * k) - T::of_usize(n_beams);
        let azimuth = numer / denom * T::PI();
        azimuths.push(azimuth);
        beams.push(steering_vector(cfg, elevation, azimuth));
    }
    Ok(Codebook {
        array: cfg,
        elevation,
        azimuths,
        beams,
    })
}

/// Real matrix of `|f_rx^H H f_tx|^2 / ||f_rx||^2` over all codebook pairs,
/// shape (rx beams, tx beams).
#[derive(Debug, Clone, PartialEq)]
pub struct BeamPairObjective<T> {
    pub n_rx: usize,
    pub n_tx: usize,
    values: Vec<T>,
}

impl<T: Scalar> BeamPairObjective<T> {
    pub fn at(&self, rx: usize, tx: usize) -> T {
        self.values[rx * self.n_tx + tx]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            n_rx: self.n_rx,
            n_tx: self.n_tx,
            values: self.values.iter().map(|v| *v * factor).collect(),
        }
    }
}

/// Evaluates the pair objective in factored per-path form: with
/// `u_l(j) = f_rx_j^H a_rx(l)` and `v_l(i) = a_tx(l)^H f_tx_i`, entry (j, i)
/// is `|sum_l alpha_l u_l(j) v_l(i)|^2 / ||f_rx_j||^2`. This never builds the
/// dense channel, so the cost scales with paths x beams rather than with the
/// product of array sizes.
pub fn beam_pair_objective<T: Scalar>(
    paths: &[Path<T>],
    cb_tx: &Codebook<T>,
    cb_rx: &Codebook<T>,
) -> Result<BeamPairObjective<T>> {
    if cb_tx.is_empty() || cb_rx.is_empty() {
        return Err(Error::Config("empty codebook".into()));
    }
    let m = cb_rx.len();
    let n = cb_tx.len();
    let n_paths = paths.len();

    // u[l * m + j], v[l * n + i]
    let mut u = vec![Complex::new(T::zero(), T::zero()); n_paths * m];
    let mut v = vec![Complex::new(T::zero(), T::zero()); n_paths * n];
    for (l, path) in paths.iter().enumerate() {
        let a_rx = steering_vector(cb_rx.array, path.aoa.elevation, path.aoa.azimuth);
        let a_tx = steering_vector(cb_tx.array, path.aod.elevation, path.aod.azimuth);
        for j in 0..m {
            u[l * m + j] = dot_conj(cb_rx.beam(j), &a_rx);
        }
        for i in 0..n {
            v[l * n + i] = dot_conj(&a_tx, cb_tx.beam(i));
        }
    }

    let rx_norm_sq: Vec<T> = (0..m)
        .map(|j| {
            cb_rx
                .beam(j)
                .iter()
                .map(|c| c.norm_sqr())
                .fold(T::zero(), |a, b| a + b)
        })
        .collect();

    let mut values = vec![T::zero(); m * n];
    for j in 0..m {
        for i in 0..n {
            let mut acc = Complex::new(T::zero(), T::zero());
            for (l, path) in paths.iter().enumerate() {
                acc += path.gain * u[l * m + j] * v[l * n + i];
            }
            values[j * n + i] = acc.norm_sqr() / rx_norm_sq[j];
        }
    }
    Ok(BeamPairObjective {
        n_rx: m,
        n_tx: n,
        values,
    })
}

/// Optimal transmit/receive beam indices and the objective value they attain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamPairLabel<T> {
    /// Transmit codebook index (0-based).
    pub t_opt: usize,
    /// Receive codebook index (0-based).
    pub r_opt: usize,
    /// Maximized objective value.
    pub gain: T,
}

/// Argmax over all beam pairs. Ties resolve to the smallest transmit index,
/// then the smallest receive index, so labels are reproducible in symmetric
/// scenes.
pub fn optimal_pair<T: Scalar>(objective: &BeamPairObjective<T>) -> Result<BeamPairLabel<T>> {
    if objective.values.is_empty() {
        return Err(Error::Config("empty objective matrix".into()));
    }
    if objective.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("objective matrix has non-finite entries".into()));
    }
    let mut best = BeamPairLabel {
        t_opt: 0,
        r_opt: 0,
        gain: T::neg_infinity(),
    };
    for i in 0..objective.n_tx {
        for j in 0..objective.n_rx {
            let v = objective.at(j, i);
            if v > best.gain {
                best = BeamPairLabel {
                    t_opt: i,
                    r_opt: j,
                    gain: v,
                };
            }
        }
    }
    if best.gain <= T::zero() {
        return Err(Error::NoLink);
    }
    Ok(best)
}

/// Received power and SNR of one beam pair under the narrowband signal model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkResult<T> {
    /// `tx_power * |f_rx^H H f_tx|^2` in watts.
    pub rx_power: T,
    /// Noise power in watts.
    pub noise_power: T,
    /// `rx_power / noise_power`.
    pub snr: T,
}

/// Default transmit power, watts.
pub const DEFAULT_TX_POWER_W: f64 = 1.0;
/// Default noise power: thermal noise at 290 K over a nominal 100 MHz
/// bandwidth. Absolute SNR values are not calibrated against any hardware;
/// beam labels depend only on the pair objective.
pub const DEFAULT_NOISE_POWER_W: f64 = 4.003_882_1e-13;

/// Evaluates one beam pair over the factored channel.
pub fn receive_snr<T: Scalar>(
    paths: &[Path<T>],
    f_tx: &[Complex<T>],
    f_rx: &[Complex<T>],
    tx_power: T,
    noise_power: T,
) -> Result<LinkResult<T>> {
    if noise_power <= T::zero() {
        return Err(Error::Config("noise power must be positive".into()));
    }
    let tx_cfg = infer_upa(f_tx.len())?;
    let rx_cfg = infer_upa(f_rx.len())?;
    let mut acc = Complex::new(T::zero(), T::zero());
    for path in paths {
        let a_rx = steering_vector(rx_cfg, path.aoa.elevation, path.aoa.azimuth);
        let a_tx = steering_vector(tx_cfg, path.aod.elevation, path.aod.azimuth);
        acc += path.gain * dot_conj(f_rx, &a_rx) * dot_conj(&a_tx, f_tx);
    }
    let rx_power = tx_power * acc.norm_sqr();
    Ok(LinkResult {
        rx_power,
        noise_power,
        snr: rx_power / noise_power,
    })
}

// Beamforming vectors carry no array geometry of their own; treat them as a
// single-row UPA, which reproduces the same element ordering for any
// steering-vector-derived beam of matching length.
fn infer_upa(len: usize) -> Result<UpaConfig> {
    if len == 0 {
        return Err(Error::Config("empty beamforming vector".into()));
    }
    Ok(UpaConfig::new(1, len))
}
