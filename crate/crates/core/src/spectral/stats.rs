use nalgebra::DMatrix;

use super::{Block, ObservationGrid};
use crate::error::{Error, Result};

/// Spectral statistics `S̃_1, …, S̃_J` of one block.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralStats {
    pub block: Block,
    pub j: usize,
    /// Row `j − 1` is `S̃_j ∈ ℝ^d`.
    pub s: DMatrix<f64>,
}

impl SpectralStats {
    pub fn d(&self) -> usize {
        self.s.ncols()
    }

    pub fn row(&self, j: usize) -> Vec<f64> {
        self.s.row(j - 1).iter().copied().collect()
    }
}

/// Sampled sine functions `Φ_j((i − ½)/n) = √(2/h) sin(jπ((i − ½)/n − t)/h)`
/// for the increments of one block, `j = 1..=J`.
///
/// Blocks of a regular partition share one basis.
#[derive(Debug, Clone)]
pub struct SineBasis {
    j: usize,
    h: f64,
    /// `t·n − (start_index − 1)`: where the block starts relative to its first increment.
    offset: f64,
    /// `J × N`.
    phi: DMatrix<f64>,
}

impl SineBasis {
    pub fn new(n: usize, block: &Block, j: usize) -> Result<Self> {
        let have = block.increments();
        if j == 0 {
            return Err(Error::InvalidInput("J must be >= 1".into()));
        }
        if have < j {
            return Err(Error::BlockTooSmall {
                t: block.t,
                t_end: block.t + block.h,
                have,
                need: j,
            });
        }
        let nf = n as f64;
        let scale = (2.0 / block.h).sqrt();
        let phi = DMatrix::from_fn(j, have, |row, col| {
            let i = block.start_index + col;
            let u = ((i as f64 - 0.5) / nf - block.t) / block.h;
            scale * ((row + 1) as f64 * std::f64::consts::PI * u).sin()
        });
        Ok(SineBasis {
            j,
            h: block.h,
            offset: block.t * nf - (block.start_index - 1) as f64,
            phi,
        })
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn len(&self) -> usize {
        self.phi.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.ncols() == 0
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.phi
    }

    /// Whether `block` samples the sine functions at the same points.
    pub fn fits(&self, n: usize, block: &Block) -> bool {
        block.increments() == self.len()
            && block.h.to_bits() == self.h.to_bits()
            && (block.t * n as f64 - (block.start_index - 1) as f64 - self.offset).abs() < 1e-9
    }

    /// `S̃ = Φ · ΔY` over the block's increments.
    pub fn project(&self, grid: &ObservationGrid, block: &Block) -> SpectralStats {
        let d = grid.d();
        let dy = DMatrix::from_fn(self.len(), d, |m, k| {
            grid.increment(block.start_index + m, k)
        });
        SpectralStats {
            block: *block,
            j: self.j,
            s: &self.phi * dy,
        }
    }
}

/// `S̃_j = Σ_{i : (i−½)/n ∈ I} Φ_j((i − ½)/n) (Y_i − Y_{i−1})`, `j = 1..=J`.
pub fn spectral_stats(grid: &ObservationGrid, block: &Block, j: usize) -> Result<SpectralStats> {
    let basis = SineBasis::new(grid.n(), block, j)?;
    Ok(basis.project(grid, block))
}

/// Ratio between the noise variance of the discrete `S̃_j` on `N` increments
/// and its continuous-time value `j²ε²`: `(sin x / x)²` with `x = jπ/(2N)`.
///
/// Reported only; the estimator does not correct for it.
pub fn riemann_noise_factor(j: usize, n_increments: usize) -> f64 {
    let x = j as f64 * std::f64::consts::PI / (2.0 * n_increments as f64);
    (x.sin() / x).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_from(d: usize, rows: Vec<f64>) -> ObservationGrid {
        ObservationGrid::new(d, rows, 0.0, None, "test").unwrap()
    }

    #[test]
    fn constant_path_gives_zero() {
        let g = grid_from(2, vec![1.5; 2 * 101]);
        let s = spectral_stats(&g, &Block::new(0.0, 1.0, 100).unwrap(), 5).unwrap();
        assert!(s.s.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_increment_picks_sine_value() {
        // unit step in coordinate 1 at increment i = 26 on block [0.2, 0.5], n = 100
        let n = 100;
        let mut rows = vec![0.0; 2 * (n + 1)];
        for i in 26..=n {
            rows[2 * i + 1] = 1.0;
        }
        let g = grid_from(2, rows);
        let block = Block::new(0.2, 0.3, n).unwrap();
        let s = spectral_stats(&g, &block, 4).unwrap();
        let mid = (26.0 - 0.5) / n as f64;
        for j in 1..=4 {
            let phi = (2.0 / 0.3f64).sqrt() * (j as f64 * std::f64::consts::PI * (mid - 0.2) / 0.3).sin();
            assert!((s.s[(j - 1, 1)] - phi).abs() < 1e-12);
            assert_eq!(s.s[(j - 1, 0)], 0.0);
        }
    }

    #[test]
    fn too_small_block() {
        let g = grid_from(1, vec![0.0; 101]);
        let block = Block::new(0.0, 0.05, 100).unwrap();
        match spectral_stats(&g, &block, 6) {
            Err(Error::BlockTooSmall { have: 5, need: 6, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn discrete_gram_is_near_identity() {
        // nh >= 20 J: Gram of {Φ_j} with 1/n quadrature weights ≈ I_J
        let n = 3_000;
        for (nh, j) in [(300, 15), (600, 30)] {
            let block = Block::partition(n, nh).unwrap()[1];
            let b = SineBasis::new(n, &block, j).unwrap();
            let gram = b.values() * b.values().transpose() / n as f64;
            let err = (gram - DMatrix::identity(j, j)).abs().max();
            assert!(err < 1e-2, "gram error {err}");
        }
    }

    #[test]
    fn partition_blocks_share_basis() {
        let n = 1_000;
        let blocks = Block::partition(n, 50).unwrap();
        let b = SineBasis::new(n, &blocks[0], 10).unwrap();
        assert!(blocks.iter().all(|blk| b.fits(n, blk)));
        let shifted = Block::new(0.0123, 0.05, n).unwrap();
        assert!(!b.fits(n, &shifted));
    }
}
