//! Gaussian fluctuations of the two interaction times and the averaged
//! density operators they induce.
//!
//! Each duration is drawn independently from `N(t̄_j, Δ_j²)` with
//! `Δ_j = γ·t̄_j`. The average over the product density is evaluated either
//! with a tensor Gauss-Hermite rule or by seeded Monte Carlo.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{CMatrix, CVector, DensityMatrix, StateVector, TRACE_TOL};

/// Default nodes per axis of the tensor Gauss-Hermite rule.
pub const DEFAULT_NODES: usize = 32;
/// Number of batches used for batch-means error estimates.
pub const MC_BATCHES: usize = 32;
/// Name of the Monte Carlo generator, reported in outputs.
pub const MC_GENERATOR: &str = "ChaCha8 (rand_chacha), one stream per batch";

/// Normal density `N(t̄, Δ²)` evaluated at `t`.
pub fn gaussian_pdf(t: f64, t_bar: f64, delta: f64) -> Result<f64> {
    if delta.is_nan() || delta <= 0.0 {
        return Err(Error::invalid(
            "delta",
            "spread must be positive; use the sharp (gamma = 0) path instead",
        ));
    }
    let z = (t - t_bar) / delta;
    Ok((-0.5 * z * z).exp() / (delta * (2.0 * std::f64::consts::PI).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JitterModel {
    gamma: f64,
    t_bar_1: f64,
    t_bar_2: f64,
}

impl JitterModel {
    pub fn new(gamma: f64, t_bar_1: f64, t_bar_2: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::invalid("gamma", format!("must be finite and non-negative, got {gamma}")));
        }
        for (name, t) in [("t_bar_1", t_bar_1), ("t_bar_2", t_bar_2)] {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::invalid(name, format!("must be positive and finite, got {t}")));
            }
        }
        Ok(Self {
            gamma,
            t_bar_1,
            t_bar_2,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn t_bar_1(&self) -> f64 {
        self.t_bar_1
    }

    pub fn t_bar_2(&self) -> f64 {
        self.t_bar_2
    }

    pub fn delta_1(&self) -> f64 {
        self.gamma * self.t_bar_1
    }

    pub fn delta_2(&self) -> f64 {
        self.gamma * self.t_bar_2
    }

    /// `γ = 0`: both densities collapse to deltas at the mean times.
    pub fn is_sharp(&self) -> bool {
        self.gamma == 0.0
    }
}

/// Gauss-Hermite rule rescaled to expectations over a standard normal:
/// `E[f(Z)] ≈ Σ wᵢ f(zᵢ)` with `Σ wᵢ = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("nodes_per_axis", "must be at least 1"));
        }
        let (x, w) = hermite_nodes(n);
        let norm = std::f64::consts::PI.sqrt();
        let nodes = x.iter().map(|x| std::f64::consts::SQRT_2 * x).collect();
        let weights = w.iter().map(|w| w / norm).collect();
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Standard-normal abscissae, ascending.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn expectation(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&z, &w)| w * f(z)).sum()
    }
}

/// Nodes and weights for `∫ e^{−x²} f(x) dx`, by Newton iteration on the
/// orthonormal Hermite recurrence.
fn hermite_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = 0.0f64;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let jf = j as f64;
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        // Odd n: the middle root is exactly zero.
        if n % 2 == 1 && i == n / 2 {
            z = 0.0;
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    x.reverse();
    w.reverse();
    (x, w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureScheme {
    pub nodes_per_axis: usize,
}

impl Default for QuadratureScheme {
    fn default() -> Self {
        Self {
            nodes_per_axis: DEFAULT_NODES,
        }
    }
}

impl QuadratureScheme {
    pub fn new(nodes_per_axis: usize) -> Result<Self> {
        if nodes_per_axis == 0 {
            return Err(Error::invalid("nodes_per_axis", "must be at least 1"));
        }
        Ok(Self { nodes_per_axis })
    }

    pub fn rule(&self) -> Result<GaussHermite> {
        GaussHermite::new(self.nodes_per_axis)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MCConfig {
    pub samples: usize,
    pub seed: u64,
}

impl MCConfig {
    pub fn new(samples: usize, seed: u64) -> Result<Self> {
        if samples == 0 {
            return Err(Error::invalid("samples", "must be at least 1"));
        }
        Ok(Self { samples, seed })
    }
}

/// How the jitter average is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Averaging {
    Quadrature(QuadratureScheme),
    MonteCarlo(MCConfig),
}

impl Default for Averaging {
    fn default() -> Self {
        Averaging::Quadrature(QuadratureScheme::default())
    }
}

/// `acc += w |ψ⟩⟨ψ|`, touching only the non-zero amplitudes.
fn add_projector(acc: &mut CMatrix, amps: &CVector, weight: f64) {
    let support: Vec<(usize, Complex64)> = amps
        .iter()
        .enumerate()
        .filter(|(_, a)| a.re != 0.0 || a.im != 0.0)
        .map(|(i, &a)| (i, a))
        .collect();
    for &(i, ai) in &support {
        let wi = ai * weight;
        for &(j, aj) in &support {
            acc[(i, j)] += wi * aj.conj();
        }
    }
}

/// Pairwise sum in a fixed tree shape, independent of thread scheduling.
fn tree_sum(mut parts: Vec<CMatrix>) -> CMatrix {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                a += b;
            }
            next.push(a);
        }
        parts = next;
    }
    parts.pop().expect("tree_sum of an empty list")
}

fn finish(space_source: &StateVector, acc: CMatrix) -> Result<DensityMatrix> {
    let rho = DensityMatrix::new(space_source.space().clone(), acc)?.symmetrized();
    let tr = rho.trace();
    if (tr - Complex64::new(1.0, 0.0)).norm() > TRACE_TOL {
        return Err(Error::NumericalConsistency(format!(
            "averaged density matrix has trace {tr}; builder states must be normalized"
        )));
    }
    Ok(rho)
}

/// `Σ w₁w₂ |ψ(t₁,t₂)⟩⟨ψ(t₁,t₂)|` over the tensor Gauss-Hermite grid,
/// with `t_j = t̄_j + Δ_j·z` at the standard-normal nodes `z`.
///
/// At `γ = 0` this is the single projector at the mean times.
pub fn average_density<F>(builder: F, jitter: &JitterModel, scheme: &QuadratureScheme) -> Result<DensityMatrix>
where
    F: Fn(f64, f64) -> Result<StateVector> + Sync,
{
    if jitter.is_sharp() {
        let psi = builder(jitter.t_bar_1(), jitter.t_bar_2())?;
        return finish(&psi, psi.projector().into_matrix());
    }
    let rule = scheme.rule()?;
    let probe = builder(jitter.t_bar_1(), jitter.t_bar_2())?;
    let dim = probe.amplitudes().len();
    let rows: Vec<CMatrix> = (0..rule.len())
        .into_par_iter()
        .map(|i| {
            let t1 = jitter.t_bar_1() + jitter.delta_1() * rule.nodes()[i];
            let mut acc = DMatrix::zeros(dim, dim);
            for (&z2, &w2) in rule.nodes().iter().zip(rule.weights()) {
                let t2 = jitter.t_bar_2() + jitter.delta_2() * z2;
                let psi = builder(t1, t2)?;
                if psi.amplitudes().len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: psi.amplitudes().len(),
                    });
                }
                add_projector(&mut acc, psi.amplitudes(), rule.weights()[i] * w2);
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    finish(&probe, tree_sum(rows))
}

/// Monte Carlo estimate of the jitter average together with the per-batch
/// estimates needed for batch-means error bars.
#[derive(Debug, Clone)]
pub struct McAverage {
    pub rho: DensityMatrix,
    pub batches: Vec<DensityMatrix>,
    pub samples: usize,
}

impl McAverage {
    /// Standard error of a scalar functional of the averaged state,
    /// estimated from its spread over batches.
    pub fn standard_error<O>(&self, observable: O) -> Result<f64>
    where
        O: Fn(&DensityMatrix) -> Result<f64>,
    {
        let b = self.batches.len();
        if b < 2 {
            return Err(Error::invalid("samples", "at least 2 samples are needed for an error estimate"));
        }
        let values = self.batches.iter().map(&observable).collect::<Result<Vec<f64>>>()?;
        let mean = values.iter().sum::<f64>() / b as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (b - 1) as f64;
        Ok((var / b as f64).sqrt())
    }
}

/// Sample mean of projectors with `t_j ~ N(t̄_j, Δ_j²)`.
///
/// Samples are split into up to [`MC_BATCHES`] batches; batch `b` draws from
/// ChaCha8 seeded with `mc.seed` on stream `b`, so results are reproducible
/// and independent of thread count.
pub fn mc_average_density<F>(builder: F, jitter: &JitterModel, mc: &MCConfig) -> Result<McAverage>
where
    F: Fn(f64, f64) -> Result<StateVector> + Sync,
{
    if mc.samples == 0 {
        return Err(Error::invalid("samples", "must be at least 1"));
    }
    let probe = builder(jitter.t_bar_1(), jitter.t_bar_2())?;
    let dim = probe.amplitudes().len();
    let n_batches = MC_BATCHES.min(mc.samples);

    let sums: Vec<(CMatrix, usize)> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let mut acc = DMatrix::zeros(dim, dim);
            let mut count = 0;
            for (t1, t2) in mc_batch_times(jitter, mc, b) {
                let psi = builder(t1, t2)?;
                add_projector(&mut acc, psi.amplitudes(), 1.0);
                count += 1;
            }
            Ok((acc, count))
        })
        .collect::<Result<_>>()?;

    let batches = sums
        .iter()
        .map(|(acc, count)| finish(&probe, acc.unscale(*count as f64)))
        .collect::<Result<Vec<_>>>()?;
    let total = tree_sum(sums.into_iter().map(|(acc, _)| acc).collect());
    let rho = finish(&probe, total.unscale(mc.samples as f64))?;
    Ok(McAverage {
        rho,
        batches,
        samples: mc.samples,
    })
}

/// The `(t₁, t₂, weight)` points an [`Averaging`] scheme evaluates, in
/// the order the averaging routines visit them. Weights sum to one.
pub fn sample_points(jitter: &JitterModel, scheme: &Averaging) -> Result<Vec<(f64, f64, f64)>> {
    if jitter.is_sharp() {
        if let Averaging::Quadrature(_) = scheme {
            return Ok(vec![(jitter.t_bar_1(), jitter.t_bar_2(), 1.0)]);
        }
    }
    match scheme {
        Averaging::Quadrature(q) => {
            let rule = q.rule()?;
            let mut out = Vec::with_capacity(rule.len() * rule.len());
            for (&z1, &w1) in rule.nodes().iter().zip(rule.weights()) {
                let t1 = jitter.t_bar_1() + jitter.delta_1() * z1;
                for (&z2, &w2) in rule.nodes().iter().zip(rule.weights()) {
                    out.push((t1, jitter.t_bar_2() + jitter.delta_2() * z2, w1 * w2));
                }
            }
            Ok(out)
        }
        Averaging::MonteCarlo(mc) => {
            if mc.samples == 0 {
                return Err(Error::invalid("samples", "must be at least 1"));
            }
            let w = 1.0 / mc.samples as f64;
            Ok((0..MC_BATCHES.min(mc.samples))
                .flat_map(|b| mc_batch_times(jitter, mc, b))
                .map(|(t1, t2)| (t1, t2, w))
                .collect())
        }
    }
}

fn mc_batch_len(mc: &MCConfig, batch: usize) -> usize {
    let n_batches = MC_BATCHES.min(mc.samples);
    mc.samples / n_batches + usize::from(batch < mc.samples % n_batches)
}

/// The sample times drawn by batch `batch`.
fn mc_batch_times(jitter: &JitterModel, mc: &MCConfig, batch: usize) -> impl Iterator<Item = (f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
    rng.set_stream(batch as u64);
    let jitter = *jitter;
    (0..mc_batch_len(mc, batch)).map(move |_| {
        let z1: f64 = StandardNormal.sample(&mut rng);
        let z2: f64 = StandardNormal.sample(&mut rng);
        (
            jitter.t_bar_1() + jitter.delta_1() * z1,
            jitter.t_bar_2() + jitter.delta_2() * z2,
        )
    })
}

/// Result of [`average`]: the averaged state plus, for Monte Carlo, the
/// batch estimates.
#[derive(Debug, Clone)]
pub struct Averaged {
    pub rho: DensityMatrix,
    pub mc: Option<McAverage>,
}

pub fn average<F>(builder: F, jitter: &JitterModel, scheme: &Averaging) -> Result<Averaged>
where
    F: Fn(f64, f64) -> Result<StateVector> + Sync,
{
    match scheme {
        Averaging::Quadrature(q) => Ok(Averaged {
            rho: average_density(builder, jitter, q)?,
            mc: None,
        }),
        Averaging::MonteCarlo(mc) => {
            let out = mc_average_density(builder, jitter, mc)?;
            Ok(Averaged {
                rho: out.rho.clone(),
                mc: Some(out),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{AtomLevel, HilbertLayout, MaxAbs};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn pdf_peak_and_symmetry() {
        let (t_bar, delta) = (3.0e-6, 2.0e-7);
        let peak = gaussian_pdf(t_bar, t_bar, delta).unwrap();
        assert_abs_diff_eq!(peak, 1.0 / (delta * (2.0 * PI).sqrt()), epsilon = 1e-6 * peak);
        for x in [1e-8, 3.3e-7, 1e-6] {
            assert_eq!(gaussian_pdf(t_bar + x, t_bar, delta).unwrap(), gaussian_pdf(t_bar - x, t_bar, delta).unwrap());
        }
        assert!(gaussian_pdf(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn pdf_integrates_to_one() {
        // Composite Simpson over t̄ ± 8Δ.
        let (t_bar, delta) = (1.5, 0.15);
        let n = 4000;
        let (a, b) = (t_bar - 8.0 * delta, t_bar + 8.0 * delta);
        let h = (b - a) / n as f64;
        let mut s = 0.0;
        for k in 0..=n {
            let w = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            s += w * gaussian_pdf(a + k as f64 * h, t_bar, delta).unwrap();
        }
        assert_abs_diff_eq!(s * h / 3.0, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn hermite_small_rules() {
        let one = GaussHermite::new(1).unwrap();
        assert_eq!(one.nodes(), &[0.0]);
        assert_abs_diff_eq!(one.weights()[0], 1.0, epsilon = 1e-15);
        let two = GaussHermite::new(2).unwrap();
        assert_abs_diff_eq!(two.nodes()[0], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(two.nodes()[1], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(two.weights()[0], 0.5, epsilon = 1e-15);
        assert!(GaussHermite::new(0).is_err());
    }

    #[test]
    fn hermite_moments_are_exact() {
        for n in [3usize, 8, 24, 32, 64] {
            let rule = GaussHermite::new(n).unwrap();
            assert_abs_diff_eq!(rule.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-13);
            assert!(rule.nodes().windows(2).all(|w| w[0] < w[1]));
            // E[Z^{2k}] = (2k-1)!! for 2k ≤ 2n-1.
            let mut double_fact = 1.0;
            for k in 1..=n.min(8) {
                double_fact *= (2 * k - 1) as f64;
                if 2 * k < 2 * n {
                    let m = rule.expectation(|z| z.powi(2 * k as i32));
                    assert_abs_diff_eq!(m / double_fact, 1.0, epsilon = 1e-11);
                }
            }
            assert_abs_diff_eq!(rule.expectation(|z| z.powi(3)), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn hermite_matches_characteristic_function() {
        // E[cos(aZ)] = exp(-a²/2).
        let rule = GaussHermite::new(32).unwrap();
        for a in [0.1, 0.5, 1.0, 2.0] {
            assert_abs_diff_eq!(rule.expectation(|z| (a * z).cos()), (-a * a / 2.0).exp(), epsilon = 1e-14);
        }
    }

    fn two_level_builder(layout: HilbertLayout) -> impl Fn(f64, f64) -> Result<StateVector> + Sync {
        move |t1: f64, t2: f64| {
            let mut psi = StateVector::zeros(layout.full_space());
            let a = layout.basis_index(AtomLevel::L2, 0, 0).unwrap();
            let b = layout.basis_index(AtomLevel::L0, 1, 1).unwrap();
            psi.amplitudes_mut()[a] = Complex64::new(t1.cos(), 0.0);
            psi.amplitudes_mut()[b] = Complex64::new(t1.sin() * t2.cos(), t1.sin() * t2.sin());
            Ok(psi)
        }
    }

    #[test]
    fn sharp_limit_is_single_projector() {
        let layout = HilbertLayout::new(1, 1).unwrap();
        let builder = two_level_builder(layout);
        let jitter = JitterModel::new(0.0, 0.3, 0.9).unwrap();
        let rho = average_density(&builder, &jitter, &QuadratureScheme::default()).unwrap();
        let expected = builder(0.3, 0.9).unwrap().projector();
        assert_eq!(rho.matrix(), expected.matrix());

        let mc = mc_average_density(&builder, &jitter, &MCConfig::new(100, 7).unwrap()).unwrap();
        assert!((mc.rho.matrix() - expected.matrix()).max_abs() < 1e-15);
        assert_eq!(mc.standard_error(|r| Ok(r.matrix()[(0, 0)].re)).unwrap(), 0.0);
    }

    #[test]
    fn quadrature_matches_analytic_gaussian_average() {
        // ⟨cos² t1⟩ with t1 ~ N(a, s²) = (1 + cos(2a) e^{-2s²}) / 2.
        let layout = HilbertLayout::new(1, 1).unwrap();
        let jitter = JitterModel::new(0.2, 0.8, 1.5).unwrap();
        let rho = average_density(two_level_builder(layout), &jitter, &QuadratureScheme::default()).unwrap();
        let a = jitter.t_bar_1();
        let s = jitter.delta_1();
        let i = layout.basis_index(AtomLevel::L2, 0, 0).unwrap();
        assert_abs_diff_eq!(rho.matrix()[(i, i)].re, 0.5 * (1.0 + (2.0 * a).cos() * (-2.0 * s * s).exp()), epsilon = 1e-14);
        assert_abs_diff_eq!(rho.trace().re, 1.0, epsilon = 1e-12);
        assert!(rho.purity() < 1.0);
    }

    #[test]
    fn mc_is_deterministic_for_fixed_seed() {
        let layout = HilbertLayout::new(1, 1).unwrap();
        let jitter = JitterModel::new(0.1, 0.8, 1.5).unwrap();
        let mc = MCConfig::new(5000, 42).unwrap();
        let a = mc_average_density(two_level_builder(layout), &jitter, &mc).unwrap();
        let b = mc_average_density(two_level_builder(layout), &jitter, &mc).unwrap();
        assert_eq!(a.rho.matrix(), b.rho.matrix());
        let c = mc_average_density(two_level_builder(layout), &jitter, &MCConfig::new(5000, 43).unwrap()).unwrap();
        assert_ne!(a.rho.matrix(), c.rho.matrix());
    }

    #[test]
    fn mc_agrees_with_quadrature_statistically() {
        let layout = HilbertLayout::new(1, 1).unwrap();
        let jitter = JitterModel::new(0.3, 0.8, 1.5).unwrap();
        let q = average_density(two_level_builder(layout), &jitter, &QuadratureScheme::default()).unwrap();
        let mc = mc_average_density(two_level_builder(layout), &jitter, &MCConfig::new(40_000, 9).unwrap()).unwrap();
        let i = layout.basis_index(AtomLevel::L2, 0, 0).unwrap();
        let obs = |r: &DensityMatrix| Ok(r.matrix()[(i, i)].re);
        let se = mc.standard_error(obs).unwrap();
        assert!(se > 0.0);
        assert!((obs(&mc.rho).unwrap() - obs(&q).unwrap()).abs() < 4.0 * se);
    }

    #[test]
    fn non_normalized_builder_is_rejected() {
        let layout = HilbertLayout::new(1, 1).unwrap();
        let jitter = JitterModel::new(0.1, 1.0, 1.0).unwrap();
        let builder = |_: f64, _: f64| Ok(StateVector::zeros(layout.full_space()));
        assert!(average_density(builder, &jitter, &QuadratureScheme::default()).is_err());
    }

    #[test]
    fn builder_errors_propagate() {
        let jitter = JitterModel::new(0.1, 1.0, 1.0).unwrap();
        let builder = |_: f64, _: f64| -> Result<StateVector> { Err(Error::invalid("x", "boom")) };
        assert!(average_density(builder, &jitter, &QuadratureScheme::default()).is_err());
        assert!(mc_average_density(builder, &jitter, &MCConfig::new(10, 1).unwrap()).is_err());
    }

    #[test]
    fn jitter_model_validation() {
        assert!(JitterModel::new(-0.1, 1.0, 1.0).is_err());
        assert!(JitterModel::new(0.1, 0.0, 1.0).is_err());
        let j = JitterModel::new(0.1, 2.0, 4.0).unwrap();
        assert_eq!(j.delta_1(), 0.1 * 2.0);
        assert_eq!(j.delta_2(), 0.1 * 4.0);
    }
}
