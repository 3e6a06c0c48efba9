use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Matrix;
use crate::error::{Error, Result};

/// Seeded random stream backed by a counter-based ChaCha generator.
///
/// Streams with the same `(seed, stream)` pair replay the same sequence;
/// different stream indices under one seed are independent, which is how
/// Monte Carlo replications and bootstrap draws get their own generators.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        RngStream { seed, stream, inner, spare_normal: None }
    }

    /// Independent child stream; `index` selects among siblings.
    pub fn substream(&self, index: u64) -> RngStream {
        let child_seed = self.seed ^ self.stream.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
        RngStream::with_stream(child_seed.wrapping_add(0xD1B5_4A32_D192_ED03), index)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Number of 32-bit words consumed so far.
    pub fn word_position(&self) -> u128 {
        self.inner.get_word_pos()
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.random::<u64>()
    }

    pub fn below(&mut self, bound: usize) -> usize {
        self.inner.random_range(0..bound)
    }

    /// Standard normal via the Box–Muller transform; the second variate of
    /// each pair is kept for the next call.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare_normal = Some(r * angle.sin());
        r * angle.cos()
    }

    pub fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        mean + sd * self.standard_normal()
    }
}

/// `cov_root · z` with `z` a vector of `dim` independent standard normals.
pub fn mvn_draw(rng: &mut RngStream, dim: usize, cov_root: &Matrix) -> Result<Vec<f64>> {
    if cov_root.rows() != dim || cov_root.cols() != dim {
        return Err(Error::Dimension(format!(
            "covariance root is {}x{}, expected {dim}x{dim}",
            cov_root.rows(),
            cov_root.cols()
        )));
    }
    let z: Vec<f64> = (0..dim).map(|_| rng.standard_normal()).collect();
    cov_root.mul_vec(&z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_sequence() {
        let mut a = RngStream::new(42);
        let mut b = RngStream::new(42);
        for _ in 0..100 {
            assert_eq!(a.standard_normal().to_bits(), b.standard_normal().to_bits());
        }
    }

    #[test]
    fn streams_differ() {
        let mut a = RngStream::with_stream(42, 0);
        let mut b = RngStream::with_stream(42, 1);
        let xa: Vec<f64> = (0..8).map(|_| a.uniform()).collect();
        let xb: Vec<f64> = (0..8).map(|_| b.uniform()).collect();
        assert_ne!(xa, xb);
        let s = RngStream::new(42);
        assert_ne!(s.substream(0).uniform(), s.substream(1).uniform());
    }

    #[test]
    fn zero_root_gives_zero_vector() {
        let mut rng = RngStream::new(1);
        assert_eq!(mvn_draw(&mut rng, 3, &Matrix::zeros(3, 3)).unwrap(), vec![0.0; 3]);
        assert!(mvn_draw(&mut rng, 2, &Matrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let root = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.5, 2.0]]).unwrap();
        let a = mvn_draw(&mut RngStream::new(9), 2, &root).unwrap();
        let b = mvn_draw(&mut RngStream::new(9), 2, &root).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn identity_root_sample_covariance() {
        let mut rng = RngStream::new(2024);
        let id = Matrix::identity(3);
        let draws = 100_000;
        let mut s = [[0.0; 3]; 3];
        for _ in 0..draws {
            let z = mvn_draw(&mut rng, 3, &id).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    s[i][j] += z[i] * z[j];
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((s[i][j] / draws as f64 - target).abs() < 0.05);
            }
        }
    }
}
