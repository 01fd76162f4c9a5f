//! Minimum-norm least squares and orthogonal complements on small dense
//! systems, via a rank-revealing SVD.

pub use faer::Mat;

/// Singular values below `RANK_TOL * sigma_max` are treated as zero.
pub const RANK_TOL: f64 = 1e-11;

#[derive(Debug, Clone)]
pub struct LstsqSolution {
    pub x: Vec<f64>,
    pub rank: usize,
}

struct Factors {
    u: Mat<f64>,
    s: Vec<f64>,
    v: Mat<f64>,
    rank: usize,
}

fn factor(a: &Mat<f64>, full: bool, rank_tol: f64) -> Factors {
    let svd = if full { a.svd() } else { a.thin_svd() }.expect("SVD of a finite dense matrix converges");
    let sv = svd.S().column_vector();
    let s: Vec<f64> = (0..sv.nrows()).map(|i| sv[i]).collect();
    let smax = s.iter().fold(0.0f64, |m, &x| m.max(x));
    let rank = if smax == 0.0 { 0 } else { s.iter().filter(|&&x| x > rank_tol * smax).count() };
    Factors { u: svd.U().to_owned(), s, v: svd.V().to_owned(), rank }
}

/// Minimum-norm solution of `min |A x - b|`, dropping singular values below
/// `rank_tol * sigma_max`.
pub fn min_norm_lstsq_with(a: &Mat<f64>, b: &[f64], rank_tol: f64) -> LstsqSolution {
    assert_eq!(a.nrows(), b.len());
    if a.nrows() == 0 || a.ncols() == 0 {
        return LstsqSolution { x: vec![0.0; a.ncols()], rank: 0 };
    }
    let f = factor(a, false, rank_tol);
    let mut x = vec![0.0; a.ncols()];
    for k in 0..f.rank {
        let ub: f64 = (0..a.nrows()).map(|r| f.u[(r, k)] * b[r]).sum();
        let c = ub / f.s[k];
        for (j, xj) in x.iter_mut().enumerate() {
            *xj += c * f.v[(j, k)];
        }
    }
    LstsqSolution { x, rank: f.rank }
}

/// Minimum-norm solution of `min |A x - b|` at the default rank threshold.
pub fn min_norm_lstsq(a: &Mat<f64>, b: &[f64]) -> LstsqSolution {
    min_norm_lstsq_with(a, b, RANK_TOL)
}

/// Minimum-norm weighted least squares `min sum_r w_r (row_r . x - t_r)^2`
/// with non-negative weights.
pub fn weighted_min_norm_lstsq(design: &Mat<f64>, target: &[f64], weights: &[f64]) -> LstsqSolution {
    assert_eq!(design.nrows(), target.len());
    assert_eq!(design.nrows(), weights.len());
    let sw: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let a = Mat::from_fn(design.nrows(), design.ncols(), |r, c| sw[r] * design[(r, c)]);
    let b: Vec<f64> = target.iter().zip(&sw).map(|(t, s)| t * s).collect();
    min_norm_lstsq(&a, &b)
}

/// Numerical rank of `A`.
pub fn rank(a: &Mat<f64>) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    factor(a, false, RANK_TOL).rank
}

/// Orthonormal basis (as columns) of the orthogonal complement of the
/// column space of `A` in `R^nrows`.
pub fn column_space_complement(a: &Mat<f64>) -> Vec<Vec<f64>> {
    let n = a.nrows();
    if a.ncols() == 0 {
        return (0..n).map(|k| (0..n).map(|r| if r == k { 1.0 } else { 0.0 }).collect()).collect();
    }
    let f = factor(a, true, RANK_TOL);
    (f.rank..n).map(|k| (0..n).map(|r| f.u[(r, k)]).collect()).collect()
}

/// `A x` for a dense matrix and a slice.
pub fn mat_vec(a: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    assert_eq!(a.ncols(), x.len());
    (0..a.nrows()).map(|r| (0..a.ncols()).map(|c| a[(r, c)] * x[c]).sum()).collect()
}
