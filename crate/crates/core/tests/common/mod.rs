#![allow(dead_code)]

use jackson_core::linalg::Matrix;
use jackson_core::model::NetworkModel;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `sum_{k < 2^doublings} A^k` by repeated doubling:
/// `S_{2n} = S_n + A^n S_n`, `A^{2n} = A^n A^n`.
pub fn neumann_sum(a: &Matrix, doublings: u32) -> Matrix {
    let n = a.rows();
    let mut sum = Matrix::identity(n).add(a);
    let mut power = a.matmul(a);
    for _ in 1..doublings {
        sum = sum.add(&power.matmul(&sum));
        power = power.matmul(&power);
    }
    sum
}

/// Contribution matrix from the truncated series, with enough terms that the
/// remainder is below `1e-13` given the routing's largest row sum.
pub fn neumann_alpha(model: &NetworkModel) -> Matrix {
    let r = model.routing().as_matrix();
    let q = r.row_sums().into_iter().fold(0.0f64, f64::max);
    let mut doublings = 1;
    while q.powf(2f64.powi(doublings)) / (1.0 - q) > 1e-13 && doublings < 40 {
        doublings += 1;
    }
    neumann_sum(&r.transpose(), doublings as u32)
}
