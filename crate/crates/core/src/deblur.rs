//! Random-mask image deblurring: `y_l = D·H·M_l·x0 + ε_l` with `H` the
//! centered low-frequency block of the 2-D DFT and `D` the unknown filter
//! response on that block.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lls::{solve_lls, LlsConfig, SolveReport};
use crate::metrics::aligned_rel_error;
use crate::numerics::{is_power_of_two, Direction, FullTransform, IndexSet, PartialTransform, RandomStream, C64, ONE};
use crate::pgm::GrayImage;
use crate::sensing::{low_frequency_bins, signed_frequency, Selection, SensingKind, SensingSpec};
use crate::system::{
    synthesize_problem, GainDist, ModelKind, ProblemConfig, ProblemInstance, SignalDist, StackedSystem,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeblurConfig {
    /// Side `s` of the `s×s` frequency support.
    pub support: usize,
    pub p: usize,
    /// `f64::INFINITY` for noiseless.
    pub snr_db: f64,
    /// Width of the Gaussian frequency response in frequency bins; `s/2` if unset.
    pub sigma: Option<f64>,
    pub seed: u64,
    pub lls: LlsConfig,
}

impl Default for DeblurConfig {
    fn default() -> Self {
        Self { support: 12, p: 16, snr_db: f64::INFINITY, sigma: None, seed: 0, lls: LlsConfig::default() }
    }
}

#[derive(Debug, Clone)]
pub struct DeblurOutcome {
    pub blurred: GrayImage,
    pub uncalibrated: GrayImage,
    /// Aligned to the original by the least-squares scalar before quantizing.
    pub recovered: GrayImage,
    pub rel_error: f64,
    pub uncalibrated_rel_error: f64,
    pub report: SolveReport,
}

fn low_frequency_rows(side: usize, support: usize) -> Vec<usize> {
    let bins = low_frequency_bins(support, side);
    bins.iter().flat_map(|&r| bins.iter().map(move |&c| r * side + c)).collect()
}

/// Gaussian response `exp(−(f₁² + f₂²)/(2σ²))` in the row order of the sensing operator.
pub fn gaussian_response(side: usize, support: usize, sigma: f64) -> Vec<C64> {
    let bins = low_frequency_bins(support, side);
    let mut d = Vec::with_capacity(support * support);
    for &r in &bins {
        for &c in &bins {
            let (f1, f2) = (signed_frequency(r, side) as f64, signed_frequency(c, side) as f64);
            d.push(C64::new((-(f1 * f1 + f2 * f2) / (2.0 * sigma * sigma)).exp(), 0.0));
        }
    }
    d
}

/// `Re(H*·diag(d)·H·x / n)`: the low-pass filtered image.
pub fn blur(image: &GrayImage, support: usize, d: &[C64]) -> Result<Vec<f64>> {
    let side = image.width;
    let n = side * side;
    let h = PartialTransform::new(
        FullTransform::dft2d(side, side)?,
        IndexSet::new(low_frequency_rows(side, support), n)?,
        IndexSet::full(n)?,
    )?;
    let x: Vec<C64> = image.pixels.iter().map(|&v| C64::new(v, 0.0)).collect();
    let hx = h.apply(&x, Direction::Forward)?;
    let filtered: Vec<C64> = hx.iter().zip(d).map(|(a, b)| a * b).collect();
    Ok(h.apply(&filtered, Direction::Adjoint)?.iter().map(|z| z.re / n as f64).collect())
}

/// `(1/p)·Σ_l M_l·H*·y_l / n`: per-mask inversion ignoring the filter.
pub fn uncalibrated_estimate(problem: &ProblemInstance) -> Result<Vec<C64>> {
    let mut acc = vec![C64::from(0.0); problem.n];
    for (l, y) in problem.y.iter().enumerate() {
        for (a, b) in acc.iter_mut().zip(problem.operator(l).adjoint(y)?) {
            *a += b;
        }
    }
    let k = (problem.p * problem.n) as f64;
    Ok(acc.into_iter().map(|z| z / k).collect())
}

fn aligned_image(v: &[C64], x0: &[C64], side: usize) -> Result<(GrayImage, f64)> {
    let (err, alpha) = aligned_rel_error(v, x0)?;
    let pixels = v.iter().map(|z| (alpha * z).re).collect();
    Ok((GrayImage::new(side, side, pixels)?, err))
}

pub fn deblur_problem(image: &GrayImage, cfg: &DeblurConfig) -> Result<ProblemInstance> {
    let side = image.width;
    if image.height != side || !is_power_of_two(side) {
        return Err(Error::InvalidDimension(format!(
            "image must be N×N with N a power of two (got {}×{})",
            image.width, image.height
        )));
    }
    if cfg.support == 0 || cfg.support > side {
        return Err(Error::InvalidInput(format!("support {} must be in 1..={side}", cfg.support)));
    }
    if cfg.p == 0 {
        return Err(Error::InvalidInput("p must be at least 1".into()));
    }
    let sigma = cfg.sigma.unwrap_or(cfg.support as f64 / 2.0);
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidInput(format!("filter width must be positive (got {sigma})")));
    }
    let (m, n) = (cfg.support * cfg.support, side * side);
    let spec = SensingSpec::new(SensingKind::FatDft2d, m, n).with_selection(Selection::LowFrequency);
    let x0: Vec<C64> = image.pixels.iter().map(|&v| C64::new(v, 0.0)).collect();
    let pc = ProblemConfig::new(ModelKind::RepeatedMeasurements, spec, cfg.p)
        .with_gains(GainDist::Custom(gaussian_response(side, cfg.support, sigma)))
        .with_signals(SignalDist::Custom(vec![x0]))
        .with_snr_db(cfg.snr_db);
    synthesize_problem(&pc, &mut RandomStream::new(cfg.seed))
}

/// Solves with `w = 1`, `c = 1` and measures the error on the image only.
pub fn run_deblur(image: &GrayImage, cfg: &DeblurConfig) -> Result<DeblurOutcome> {
    let problem = deblur_problem(image, cfg)?;
    let side = image.width;
    let x0 = &problem.signals[0];
    if x0.iter().all(|z| *z == C64::from(0.0)) {
        return Err(Error::InvalidInput("image is all black".into()));
    }
    let w = vec![ONE; problem.dim()];
    let report = solve_lls(&StackedSystem::new(&problem, w, ONE)?, &cfg.lls)?;
    let (recovered, rel_error) = aligned_image(&report.z_hat[problem.m..], x0, side)?;
    let (uncalibrated, uncalibrated_rel_error) = aligned_image(&uncalibrated_estimate(&problem)?, x0, side)?;
    let blurred = GrayImage::new(side, side, blur(image, cfg.support, &problem.d0)?)?;
    Ok(DeblurOutcome { blurred, uncalibrated, recovered, rel_error, uncalibrated_rel_error, report })
}

/// Smooth synthetic scene: a shaded disc, a bar and a soft background gradient.
pub fn test_pattern(side: usize) -> GrayImage {
    let s = side as f64;
    let pixels = (0..side * side)
        .map(|k| {
            let (r, c) = ((k / side) as f64 / s, (k % side) as f64 / s);
            let mut v = 0.15 + 0.2 * c;
            let dist = ((r - 0.4).powi(2) + (c - 0.35).powi(2)).sqrt();
            if dist < 0.25 {
                v += 0.6 * (1.0 - dist / 0.25).sqrt();
            }
            if (0.7..0.85).contains(&r) && (0.2..0.8).contains(&c) {
                v = 0.9;
            }
            v.min(1.0)
        })
        .collect();
    GrayImage { width: side, height: side, pixels }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn response_is_one_at_dc_and_symmetric() {
        let d = gaussian_response(8, 3, 1.5);
        // bins for support 3 on 8: [0, 7, 1] → frequencies 0, −1, 1
        assert_eq!(d[0], ONE);
        assert!((d[1].re - (-1.0 / 4.5f64).exp()).abs() < 1e-15);
        assert_eq!(d[1], d[2]);
        assert_eq!(d[4], d[8]);
    }

    #[test]
    fn full_support_flat_response_is_identity() {
        let img = test_pattern(8);
        let flat = vec![ONE; 64];
        let out = blur(&img, 8, &flat).unwrap();
        for (a, b) in out.iter().zip(&img.pixels) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn blur_matches_direct_sum() {
        let side = 4;
        let img = GrayImage::new(side, side, (0..16).map(|k| (k as f64 * 0.37).sin().abs()).collect()).unwrap();
        let d = gaussian_response(side, 2, 0.8);
        let out = blur(&img, 2, &d).unwrap();
        let bins = low_frequency_bins(2, side);
        let tau = std::f64::consts::TAU;
        for (p, got) in out.iter().enumerate() {
            let (pr, pc) = (p / side, p % side);
            let mut acc = C64::from(0.0);
            for (i, &kr) in bins.iter().enumerate() {
                for (j, &kc) in bins.iter().enumerate() {
                    let mut coef = C64::from(0.0);
                    for q in 0..16 {
                        let (qr, qc) = (q / side, q % side);
                        let ph = -tau * ((kr * qr + kc * qc) as f64) / side as f64;
                        coef += C64::from_polar(img.pixels[q], ph);
                    }
                    let ph = tau * ((kr * pr + kc * pc) as f64) / side as f64;
                    acc += d[i * 2 + j] * coef * C64::from_polar(1.0, ph);
                }
            }
            assert!((acc.re / 16.0 - got).abs() < 1e-12);
        }
    }

    #[test]
    fn noiseless_small_recovery() {
        let img = test_pattern(8);
        let cfg = DeblurConfig { support: 4, p: 8, ..Default::default() };
        let out = run_deblur(&img, &cfg).unwrap();
        assert!(out.rel_error < 1e-6, "{}", out.rel_error);
        assert!(out.uncalibrated_rel_error > out.rel_error);
        for (a, b) in out.recovered.pixels.iter().zip(&img.pixels) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let cfg = DeblurConfig::default();
        let rect = GrayImage::new(4, 2, vec![0.5; 8]).unwrap();
        assert!(run_deblur(&rect, &cfg).is_err());
        let odd = GrayImage::new(6, 6, vec![0.5; 36]).unwrap();
        assert!(run_deblur(&odd, &cfg).is_err());
        let small = test_pattern(8);
        assert!(run_deblur(&small, &DeblurConfig { support: 9, ..cfg.clone() }).is_err());
        assert!(run_deblur(&small, &DeblurConfig { support: 4, sigma: Some(0.0), ..cfg }).is_err());
    }
}
