//! Subspace distance and series-agreement measures.

use crate::error::{Error, Result};
use crate::numerics::{self, Matrix};

/// Rank tolerance for basis inputs (relative, on singular values squared).
const BASIS_TOL: f64 = 1e-20;

/// D-distance `√(1 − tr(Π₁Π₂)/l₁)` between the column spans of two bases,
/// with `l₁ ≥ l₂` (arguments are swapped when needed).
///
/// Evaluated as `√((l₁ − l₂ + ‖(I − Π₁)Q₂‖²_F)/l₁)` from orthonormal bases,
/// which keeps full relative accuracy for nearly identical spans.
pub fn d_distance(p1: &Matrix, p2: &Matrix) -> Result<f64> {
    if p1.nrows() != p2.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "bases live in R^{} and R^{}",
            p1.nrows(),
            p2.nrows()
        )));
    }
    let (a, b) = if p1.ncols() >= p2.ncols() { (p1, p2) } else { (p2, p1) };
    if b.ncols() == 0 {
        return Err(Error::RankDeficientBasis { rank: 0, cols: 0 });
    }
    let q1 = numerics::orthonormalize(a, BASIS_TOL)?;
    let q2 = numerics::orthonormalize(b, BASIS_TOL)?;
    let (l1, l2) = (q1.ncols() as f64, q2.ncols() as f64);
    let resid = &q2 - &q1 * (q1.transpose() * &q2);
    let d2 = (l1 - l2 + resid.norm_squared()) / l1;
    Ok(d2.clamp(0.0, 1.0).sqrt())
}

/// Sines of the principal angles between two spans, ascending.
pub fn principal_angle_sines(p1: &Matrix, p2: &Matrix) -> Result<Vec<f64>> {
    let q1 = numerics::orthonormalize(p1, BASIS_TOL)?;
    let q2 = numerics::orthonormalize(p2, BASIS_TOL)?;
    let cos = (q1.transpose() * q2).singular_values();
    let mut sines: Vec<f64> = cos.iter().map(|c| (1.0 - c.min(1.0).powi(2)).sqrt()).collect();
    sines.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(sines)
}

/// Pearson correlation of two equal-length columns; `None` if either is constant.
pub fn correlation(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Mean over columns of `|corr(a_i, b_i)|`. Constant columns contribute 0.
pub fn avg_correlation(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch(format!(
            "avg_correlation: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let p = a.ncols();
    if p == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for i in 0..p {
        let ca: Vec<f64> = a.column(i).iter().copied().collect();
        let cb: Vec<f64> = b.column(i).iter().copied().collect();
        match correlation(&ca, &cb) {
            Some(c) => total += c.abs(),
            None => log::warn!("avg_correlation: column {} is constant, counted as 0", i + 1),
        }
    }
    Ok(total / p as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn axes(p: usize, idx: &[usize]) -> Matrix {
        let mut m = Matrix::zeros(p, idx.len());
        for (j, &i) in idx.iter().enumerate() {
            m[(i, j)] = 1.0;
        }
        m
    }

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn identical_spans() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random(6, 3, &mut rng);
        let mix = random(3, 3, &mut rng) + Matrix::identity(3, 3) * 2.0;
        assert!(d_distance(&p, &(&p * mix)).unwrap() < 1e-12);
    }

    #[test]
    fn orthogonal_spans() {
        let d = d_distance(&axes(6, &[0, 1, 2]), &axes(6, &[3, 4, 5])).unwrap();
        assert!((d - 1.0).abs() < 1e-15);
        // a 6-dim estimate against a 3-dim truth
        let d = d_distance(&Matrix::identity(6, 6), &axes(6, &[0, 1, 2])).unwrap();
        assert!((d - 0.5_f64.sqrt()).abs() < 1e-12);
        assert!((d - 0.7071).abs() < 1e-4);
    }

    #[test]
    fn nested_spans() {
        let d = d_distance(&axes(3, &[0, 1]), &axes(3, &[0])).unwrap();
        assert!((d - 0.5_f64.sqrt()).abs() < 1e-12);
        // argument order does not matter when l1 != l2
        let d2 = d_distance(&axes(3, &[0]), &axes(3, &[0, 1])).unwrap();
        assert_eq!(d, d2);
    }

    #[test]
    fn distance_errors() {
        assert!(matches!(
            d_distance(&axes(3, &[0]), &axes(4, &[0])),
            Err(Error::DimensionMismatch(_))
        ));
        let rank1 = Matrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 0.0, 0.0]);
        assert!(matches!(
            d_distance(&rank1, &axes(3, &[0])),
            Err(Error::RankDeficientBasis { .. })
        ));
    }

    #[test]
    fn angle_sines_agree_with_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random(7, 3, &mut rng);
        let b = random(7, 3, &mut rng);
        let sines = principal_angle_sines(&a, &b).unwrap();
        let from_angles = (sines.iter().map(|s| s * s).sum::<f64>() / 3.0).sqrt();
        assert!((from_angles - d_distance(&a, &b).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn correlation_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random(100, 4, &mut rng);
        assert!((avg_correlation(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert!((avg_correlation(&a, &(-&a)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_column_counts_zero() {
        let a = Matrix::from_row_slice(3, 2, &[1.0, 5.0, 2.0, 5.0, 3.0, 5.0]);
        assert!((avg_correlation(&a, &a).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn independent_noise_has_low_correlation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = Matrix::from_fn(10_000, 6, |_, _| StandardNormal.sample(&mut rng));
        let b = Matrix::from_fn(10_000, 6, |_, _| StandardNormal.sample(&mut rng));
        assert!(avg_correlation(&a, &b).unwrap() <= 0.05);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn span_invariance(seed in any::<u64>(), l in 1usize..4) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let a = random(7, l, &mut rng);
                let b = random(7, l, &mut rng);
                let mix = random(l, l, &mut rng) + Matrix::identity(l, l) * 3.0;
                let d = d_distance(&a, &b).unwrap();
                prop_assert!((d - d_distance(&(&a * &mix), &b).unwrap()).abs() <= 1e-10);
                prop_assert!((d - d_distance(&a, &(&b * &mix)).unwrap()).abs() <= 1e-10);
                prop_assert!((d - d_distance(&b, &a).unwrap()).abs() <= 1e-10);
                prop_assert!((0.0..=1.0).contains(&d));
            }

            #[test]
            fn correlation_scale_invariance(seed in any::<u64>(), scale in 0.01f64..100.0) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let a = random(50, 3, &mut rng);
                let b = random(50, 3, &mut rng);
                let mut b2 = b.clone();
                b2.column_mut(1).scale_mut(scale);
                let c1 = avg_correlation(&a, &b).unwrap();
                let c2 = avg_correlation(&(&a * scale), &b2).unwrap();
                prop_assert!((c1 - c2).abs() <= 1e-10);
                prop_assert!((0.0..=1.0).contains(&c1));
            }
        }
    }
}
