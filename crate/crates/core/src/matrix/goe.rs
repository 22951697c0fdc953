use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::SymMatrix;

/// Draws from GOE(d): independent `N(0, 2)` diagonal and `N(0, 1)` upper
/// entries, mirrored below the diagonal.
pub fn sample_goe<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> SymMatrix {
    assert!(dim >= 1, "GOE dimension must be at least 1");
    SymMatrix::from_upper_fn(dim, |i, j| {
        let z: f64 = StandardNormal.sample(rng);
        if i == j {
            std::f64::consts::SQRT_2 * z
        } else {
            z
        }
    })
}

/// Index of entry `(i, j)` in the column-stacked `vec` of a `d×d` matrix.
#[inline]
pub fn vec_index(d: usize, i: usize, j: usize) -> usize {
    i + j * d
}

/// Covariance of `vec(Z)` for `Z ~ GOE(d)`: entry `((i,j),(k,l))` is
/// `δ_ik δ_jl + δ_il δ_jk`.
pub fn z_d_tensor(dim: usize) -> DMatrix<f64> {
    assert!(dim >= 1, "dimension must be at least 1");
    let d2 = dim * dim;
    let mut z = DMatrix::zeros(d2, d2);
    for i in 0..dim {
        for j in 0..dim {
            let row = vec_index(dim, i, j);
            z[(row, vec_index(dim, i, j))] += 1.0;
            z[(row, vec_index(dim, j, i))] += 1.0;
        }
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn z1_is_two() {
        assert_eq!(z_d_tensor(1)[(0, 0)], 2.0);
    }

    #[test]
    fn z_tensor_symmetric_psd() {
        for d in 1..5 {
            let z = z_d_tensor(d);
            assert_eq!(z, z.transpose());
            let ev = z.symmetric_eigen().eigenvalues;
            // I + K has eigenvalues 2 (symmetric part) and 0 (antisymmetric part)
            assert!(ev.iter().all(|&x| x.abs() < 1e-12 || (x - 2.0).abs() < 1e-12));
        }
    }

    #[test]
    fn goe_deterministic_replay() {
        let a = sample_goe(3, &mut rng::seeded(11));
        let b = sample_goe(3, &mut rng::seeded(11));
        assert_eq!(a, b);
        assert_eq!(a.get(0, 1).to_bits(), a.get(1, 0).to_bits());
    }

    #[test]
    fn goe1_variance_is_two() {
        let mut r = rng::seeded(5);
        let n = 100_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let x = sample_goe(1, &mut r).get(0, 0);
            s += x;
            s2 += x * x;
        }
        let mean = s / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!((1.95..=2.05).contains(&var), "var {var}");
    }
}
