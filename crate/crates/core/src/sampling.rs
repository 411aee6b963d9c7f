//! Seedable uniform samplers.
//!
//! Every random draw in the crate comes from a [`SampleStream`]: a ChaCha8
//! generator whose key is derived from the run seed and whose stream number
//! is derived from `(epoch, index, purpose)`. A stream is a value, so any
//! stream can be regenerated independently of every other one; loops that
//! give each sample index its own stream are therefore reproducible under
//! any degree of parallelism.

use std::io::{self, Write};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AxisBox, FittedSet, NasSet, Norm, PasSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed(pub u64);

/// What a stream is used for. Distinct purposes never share draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Purpose {
    State = 1,
    Noise = 2,
    MeasurementNoise = 3,
    Validation = 4,
    Truth = 5,
    Generic = 6,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SampleStream {
    seed: Seed,
    epoch: u64,
    index: u64,
    purpose: Purpose,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Seed {
    pub fn stream(self, epoch: u64, index: u64, purpose: Purpose) -> SampleStream {
        SampleStream {
            seed: self,
            epoch,
            index,
            purpose,
        }
    }

    /// A derived seed, for sub-experiments that need a full seed space
    /// of their own.
    pub fn derive(self, tag: u64) -> Seed {
        Seed(splitmix64(self.0 ^ splitmix64(tag.wrapping_add(0xA5A5))))
    }
}

impl SampleStream {
    pub fn seed(&self) -> Seed {
        self.seed
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn purpose(&self) -> Purpose {
        self.purpose
    }

    /// The same key with another index.
    pub fn at(&self, index: u64) -> SampleStream {
        SampleStream { index, ..*self }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        let mut s = self.seed.0;
        for chunk in key.chunks_mut(8) {
            s = splitmix64(s);
            chunk.copy_from_slice(&s.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        let id = splitmix64(
            splitmix64(self.epoch ^ 0x6A09_E667_F3BC_C908)
                ^ splitmix64(self.index ^ 0xBB67_AE85_84CA_A73B).rotate_left(17)
                ^ (self.purpose as u64).wrapping_mul(0x3C6E_F372_FE94_F82B),
        );
        rng.set_stream(id);
        rng
    }
}

/// A set that can produce uniform draws. Implement this for a custom
/// distribution to plug it in wherever the crate samples states or noise.
pub trait SetSampler: Sync {
    fn dim(&self) -> usize;
    fn draw_into(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) -> Result<()>;

    fn draw(&self, rng: &mut ChaCha8Rng) -> Result<DVector<f64>> {
        let mut v = DVector::zeros(self.dim());
        self.draw_into(rng, v.as_mut_slice())?;
        Ok(v)
    }
}

impl SetSampler for AxisBox {
    fn dim(&self) -> usize {
        AxisBox::dim(self)
    }

    #[inline]
    fn draw_into(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) -> Result<()> {
        for (j, o) in out.iter_mut().enumerate() {
            let u: f64 = rng.gen();
            *o = self.lower()[j] + u * (self.upper()[j] - self.lower()[j]);
        }
        Ok(())
    }
}

/// Uniform point of the unit `p`-ball.
pub fn draw_unit_ball(norm: Norm, rng: &mut ChaCha8Rng, z: &mut [f64]) {
    let n = z.len();
    match norm {
        Norm::Inf => {
            for v in z.iter_mut() {
                *v = 2.0 * rng.gen::<f64>() - 1.0;
            }
        }
        Norm::L2 => loop {
            let mut r2 = 0.0;
            for v in z.iter_mut() {
                *v = rng.sample(StandardNormal);
                r2 += *v * *v;
            }
            if r2 == 0.0 {
                continue;
            }
            let radius = rng.gen::<f64>().powf(1.0 / n as f64);
            let scale = radius / r2.sqrt();
            for v in z.iter_mut() {
                *v *= scale;
            }
            break;
        },
        Norm::L1 => loop {
            let mut s = 0.0;
            for v in z.iter_mut() {
                *v = 2.0 * rng.gen::<f64>() - 1.0;
                s += v.abs();
            }
            if s <= 1.0 {
                break;
            }
        },
    }
}

impl SetSampler for NasSet {
    fn dim(&self) -> usize {
        NasSet::dim(self)
    }

    fn draw_into(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) -> Result<()> {
        let n = NasSet::dim(self);
        let mut z = vec![0.0; n];
        draw_unit_ball(self.norm(), rng, &mut z);
        let inv = self.inverse_shape();
        for i in 0..n {
            let mut acc = self.center()[i];
            for j in 0..n {
                acc += inv[(i, j)] * z[j];
            }
            out[i] = acc;
        }
        Ok(())
    }
}

/// Attempts per single draw before a PAS rejection sampler gives up.
pub const PAS_DRAW_ATTEMPTS: usize = 1_000_000;

impl SetSampler for PasSet {
    fn dim(&self) -> usize {
        PasSet::dim(self)
    }

    fn draw_into(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) -> Result<()> {
        for _ in 0..PAS_DRAW_ATTEMPTS {
            self.domain().draw_into(rng, out)?;
            if self.eval(out) >= 1.0 {
                return Ok(());
            }
        }
        Err(Error::AcceptanceRate {
            requested: 1,
            accepted: 0,
            attempts: PAS_DRAW_ATTEMPTS,
        })
    }
}

impl SetSampler for FittedSet {
    fn dim(&self) -> usize {
        FittedSet::dim(self)
    }

    fn draw_into(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) -> Result<()> {
        match self {
            FittedSet::Nas(a) => a.draw_into(rng, out),
            FittedSet::Pas(u) => u.draw_into(rng, out),
        }
    }
}

fn check_count(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidParameter("sample count must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// `count` uniform points of `b`, drawn sequentially from one stream.
pub fn sample_box(b: &AxisBox, stream: &SampleStream, count: usize) -> Result<Vec<DVector<f64>>> {
    check_count(count)?;
    let mut rng = stream.rng();
    (0..count).map(|_| b.draw(&mut rng)).collect()
}

/// `count` uniform points of the set, as `c + P⁻¹z` with `z` uniform in the
/// unit ball.
pub fn sample_nas(a: &NasSet, stream: &SampleStream, count: usize) -> Result<Vec<DVector<f64>>> {
    check_count(count)?;
    let mut rng = stream.rng();
    (0..count).map(|_| a.draw(&mut rng)).collect()
}

/// Rejection sampling from the domain box, keeping points with `q ≥ 1`.
pub fn sample_pas(
    u: &PasSet,
    stream: &SampleStream,
    count: usize,
    max_attempts: usize,
) -> Result<Vec<DVector<f64>>> {
    let (points, _) = sample_pas_with_stats(u, stream, count, max_attempts)?;
    Ok(points)
}

/// As [`sample_pas`], also returning the number of draws made.
pub fn sample_pas_with_stats(
    u: &PasSet,
    stream: &SampleStream,
    count: usize,
    max_attempts: usize,
) -> Result<(Vec<DVector<f64>>, usize)> {
    check_count(count)?;
    let mut rng = stream.rng();
    let mut out = Vec::with_capacity(count);
    let mut x = vec![0.0; u.dim()];
    let mut attempts = 0;
    while out.len() < count && attempts < max_attempts {
        attempts += 1;
        u.domain().draw_into(&mut rng, &mut x)?;
        if u.eval(&x) >= 1.0 {
            out.push(DVector::from_column_slice(&x));
        }
    }
    if out.len() < count {
        return Err(Error::AcceptanceRate {
            requested: count,
            accepted: out.len(),
            attempts,
        });
    }
    Ok((out, attempts))
}

/// Writes one row per point with 17 significant digits.
pub fn write_csv<W: Write>(mut w: W, header: &[&str], points: &[DVector<f64>]) -> io::Result<()> {
    if !header.is_empty() {
        writeln!(w, "{}", header.join(","))?;
    }
    for p in points {
        let row: Vec<String> = p.iter().map(|v| format_f64(*v)).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    const SEED: Seed = Seed(20240607);

    fn chi_square(counts: &[usize], expected: f64) -> f64 {
        counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum()
    }

    fn critical_7dof() -> f64 {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        ChiSquared::new(7.0).unwrap().inverse_cdf(1.0 - 1e-3)
    }

    #[test]
    fn box_mean_and_determinism() {
        let b = AxisBox::cube(2, 0.0, 1.0).unwrap();
        let s = SEED.stream(0, 0, Purpose::State);
        let pts = sample_box(&b, &s, 100_000).unwrap();
        for j in 0..2 {
            let mean = pts.iter().map(|p| p[j]).sum::<f64>() / pts.len() as f64;
            assert!((mean - 0.5).abs() < 0.01);
        }
        assert_eq!(pts, sample_box(&b, &s, 100_000).unwrap());
        assert!(sample_box(&b, &s, 0).is_err());
    }

    #[test]
    fn streams_differ_by_key() {
        let b = AxisBox::cube(1, 0.0, 1.0).unwrap();
        let a = sample_box(&b, &SEED.stream(0, 0, Purpose::State), 4).unwrap();
        let c = sample_box(&b, &SEED.stream(0, 0, Purpose::Noise), 4).unwrap();
        let d = sample_box(&b, &SEED.stream(0, 1, Purpose::State), 4).unwrap();
        let e = sample_box(&b, &SEED.stream(1, 0, Purpose::State), 4).unwrap();
        assert_ne!(a, c);
        assert_ne!(a, d);
        assert_ne!(a, e);
    }

    #[test]
    fn ellipsoid_moments() {
        let shifted = NasSet::ball(DVector::from_vec(vec![1.0, 1.0]), 1.0, Norm::L2).unwrap();
        let pts = sample_nas(&shifted, &SEED.stream(0, 0, Purpose::State), 100_000).unwrap();
        for j in 0..2 {
            let mean = pts.iter().map(|p| p[j]).sum::<f64>() / pts.len() as f64;
            assert!((mean - 1.0).abs() < 0.01);
        }
        let disc = NasSet::ball(DVector::zeros(2), 1.0, Norm::L2).unwrap();
        let pts = sample_nas(&disc, &SEED.stream(0, 0, Purpose::State), 100_000).unwrap();
        let m = pts.len() as f64;
        for (i, j) in [(0, 0), (0, 1), (1, 1)] {
            let cov = pts.iter().map(|p| p[i] * p[j]).sum::<f64>() / m;
            let want = if i == j { 0.25 } else { 0.0 };
            assert!((cov - want).abs() < 0.01, "cov[{i}{j}] = {cov}");
        }
    }

    #[test]
    fn nas_samples_are_members() {
        let shape = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 0.7]);
        for norm in [Norm::L1, Norm::L2, Norm::Inf] {
            let a = NasSet::new(DVector::from_vec(vec![-1.0, 3.0]), shape.clone(), norm).unwrap();
            for p in sample_nas(&a, &SEED.stream(0, 0, Purpose::State), 5_000).unwrap() {
                assert!(a.membership(p.as_slice(), 1e-12).unwrap());
            }
        }
    }

    #[test]
    fn pas_rejection() {
        let s = AxisBox::cube(1, -2.0, 2.0).unwrap();
        let constant = PasSet::from_polynomial_in_x(s.clone(), 0, &[2.0]).unwrap();
        let stream = SEED.stream(0, 0, Purpose::State);
        let (pts, attempts) = sample_pas_with_stats(&constant, &stream, 1000, 1000).unwrap();
        assert_eq!(attempts, 1000);
        assert_eq!(pts, sample_box(&s, &stream, 1000).unwrap());

        let square = PasSet::from_polynomial_in_x(s, 2, &[0.0, 0.0, 1.0]).unwrap();
        let (pts, attempts) = sample_pas_with_stats(&square, &stream, 100_000, 10_000_000).unwrap();
        assert!(pts.iter().all(|p| p[0].abs() >= 1.0 - 1e-12));
        assert!(pts.iter().all(|p| square.membership(p.as_slice(), 1e-12).unwrap()));
        let rate = 100_000.0 / attempts as f64;
        assert!((rate - 0.5).abs() < 0.01, "acceptance {rate}");

        assert!(matches!(
            sample_pas(&square, &stream, 10, 5),
            Err(Error::AcceptanceRate { .. })
        ));
    }

    #[test]
    fn uniformity_chi_square() {
        let crit = critical_7dof();
        let m = 100_000;
        let stream = SEED.stream(3, 0, Purpose::Validation);

        // box: 4 × 2 grid
        let b = AxisBox::new(vec![-1.0, 2.0], vec![3.0, 3.0]).unwrap();
        let mut counts = [0usize; 8];
        for p in sample_box(&b, &stream, m).unwrap() {
            let i = (((p[0] + 1.0) / 4.0 * 4.0) as usize).min(3);
            let j = ((p[1] - 2.0) * 2.0) as usize;
            counts[i * 2 + j.min(1)] += 1;
        }
        assert!(chi_square(&counts, m as f64 / 8.0) < crit, "box {counts:?}");

        // balls: eight equal-angle sectors (all have measure 1/8 for p = 2, 1, ∞
        // after mapping to the unit ball, by the dihedral symmetry of the ball)
        for norm in [Norm::L2, Norm::L1, Norm::Inf] {
            let a = NasSet::new(
                DVector::from_vec(vec![0.5, -0.5]),
                DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.5])),
                norm,
            )
            .unwrap();
            let mut counts = [0usize; 8];
            for p in sample_nas(&a, &stream, m).unwrap() {
                let z = a.shape() * (p - a.center());
                let ang = z[1].atan2(z[0]) + std::f64::consts::PI;
                let k = ((ang / (2.0 * std::f64::consts::PI) * 8.0) as usize).min(7);
                counts[k] += 1;
            }
            assert!(chi_square(&counts, m as f64 / 8.0) < crit, "{norm:?} {counts:?}");
        }

        // polynomial set {|x| ≥ 1} in [-2, 2]: eight intervals of length 1/4
        let s = AxisBox::cube(1, -2.0, 2.0).unwrap();
        let square = PasSet::from_polynomial_in_x(s, 2, &[0.0, 0.0, 1.0]).unwrap();
        let mut counts = [0usize; 8];
        for p in sample_pas(&square, &stream, m, 10 * m).unwrap() {
            let x = p[0];
            let k = if x < 0.0 {
                ((x + 2.0) * 4.0) as usize
            } else {
                4 + ((x - 1.0) * 4.0) as usize
            };
            counts[k.min(7)] += 1;
        }
        assert!(chi_square(&counts, m as f64 / 8.0) < crit, "pas {counts:?}");
    }

    #[test]
    fn csv_has_full_precision() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &["x1", "x2"], &[DVector::from_vec(vec![0.1, 1.0 / 3.0])]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let row = text.lines().nth(1).unwrap();
        let parsed: Vec<f64> = row.split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(parsed, vec![0.1, 1.0 / 3.0]);
    }
}
