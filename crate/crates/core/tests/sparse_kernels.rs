mod common;

use common::*;
use frobprec::random::NormalStream;
use frobprec::{
    assemble_fvm, frob_norm_sq, gaussian_random_field, CoefficientField, CsrMatrix, Factor32,
    GridSpec, LowerFactor,
};
use proptest::prelude::*;

#[test]
fn laplacian_spmv_matches_dense_product() {
    let g = GridSpec::square(3).unwrap();
    let a = assemble_fvm(g, &CoefficientField::constant(g, 1.0)).unwrap();
    let ones = vec![1.0; 9];
    let d = dense_of(&a);
    let expected: Vec<f64> = (0..9).map(|i| (0..9).map(|j| d[(i, j)]).sum()).collect();
    assert_eq!(a.spmv(&ones).unwrap(), expected);
}

#[test]
fn lower_solve_residual_on_random_factor() {
    let mut s = NormalStream::new(11);
    let l = random_lower(50, 0.2, &mut s);
    let b = s.vector(50);
    let y = l.lower_solve(&b).unwrap();
    let ly = l.mul_vec(&y).unwrap();
    let res: Vec<f64> = ly.iter().zip(&b).map(|(p, q)| p - q).collect();
    assert!(inf_norm(&res) <= 1e-12 * inf_norm(&b), "{}", inf_norm(&res));

    let y = l.upper_solve(&b).unwrap();
    let lty = l.mul_transpose_vec(&y).unwrap();
    let res: Vec<f64> = lty.iter().zip(&b).map(|(p, q)| p - q).collect();
    assert!(inf_norm(&res) <= 1e-12 * inf_norm(&b), "{}", inf_norm(&res));
}

#[test]
fn forward_then_backward_inverts_the_product() {
    let mut s = NormalStream::new(12);
    let l = random_lower(50, 0.2, &mut s);
    let x = s.vector(50);
    let px = l.mul_vec(&l.mul_transpose_vec(&x).unwrap()).unwrap();
    let back = l.upper_solve(&l.lower_solve(&px).unwrap()).unwrap();
    let err: f64 = back
        .iter()
        .zip(&x)
        .map(|(p, q)| (p - q).powi(2))
        .sum::<f64>()
        .sqrt();
    let xn: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(err <= 1e-10 * xn, "{err}");
}

#[test]
fn factor_product_matches_dense_oracle() {
    let mut s = NormalStream::new(13);
    let l = random_lower(30, 0.25, &mut s);
    let ld = l.to_dense();
    let oracle = naive_matmul(&ld, &ld.transpose());
    let p = l.product();
    assert!(max_abs_diff(&dense_of(&p), &oracle) <= 1e-12);
    // exact symmetry of stored values
    assert!(p.is_symmetric());
}

#[test]
fn frobenius_of_sparse_and_dense_agree() {
    let g = GridSpec::square(5).unwrap();
    let k = gaussian_random_field(g, 3, 0.2, 10.0).unwrap();
    let a = assemble_fvm(g, &k).unwrap();
    let direct: f64 = a.values().iter().map(|v| v * v).sum();
    assert_eq!(frob_norm_sq(&a), direct);
    assert!(rel_diff(frob_norm_sq(&dense_of(&a)), direct) < 1e-15);
}

#[test]
fn single_precision_kernels() {
    let l = Factor32::new(2, vec![0, 1, 3], vec![0, 0, 1], vec![2.0, 1.0, 2f32.sqrt()]).unwrap();
    let y = l.lower_solve(&[2.0, 1.0 + 2f32.sqrt()]).unwrap();
    assert!((y[0] - 1.0).abs() < 1e-6 && (y[1] - 1.0).abs() < 1e-6);
    let p = l.product();
    assert_eq!(p.spmv(&[1.0, 1.0]).unwrap().len(), 2);
    let i: CsrMatrix<f32> = CsrMatrix::identity(3);
    assert_eq!(i.spmv(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
}

#[test]
fn identity_factor_product_is_identity() {
    assert_eq!(
        LowerFactor::<f64>::identity(4).product(),
        CsrMatrix::identity(4)
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn symmetric_matrices_are_bilinear_symmetric(m in 2usize..9, seed in 0u64..1000) {
        let g = GridSpec::square(m).unwrap();
        let k = gaussian_random_field(g, seed, 0.3, 10.0).unwrap();
        let a = assemble_fvm(g, &k).unwrap();
        prop_assert!(a.is_symmetric());
        let mut s = NormalStream::new(seed ^ 0xabcd);
        let x = s.vector(a.n());
        let y = s.vector(a.n());
        let ay = a.spmv(&y).unwrap();
        let ax = a.spmv(&x).unwrap();
        let xay: f64 = x.iter().zip(&ay).map(|(p, q)| p * q).sum();
        let yax: f64 = y.iter().zip(&ax).map(|(p, q)| p * q).sum();
        let scale: f64 = x.iter().zip(&ay).map(|(p, q)| (p * q).abs()).sum();
        prop_assert!((xay - yax).abs() <= 1e-10 * scale);
    }

    #[test]
    fn solves_are_accurate_on_well_scaled_factors(n in 1usize..60, density in 0.0f64..0.5, seed in 0u64..1000) {
        let mut s = NormalStream::new(seed);
        let l = random_lower(n, density, &mut s);
        let b = s.vector(n);
        let y = l.lower_solve(&b).unwrap();
        let ly = l.mul_vec(&y).unwrap();
        let res = ly.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        prop_assert!(res <= 1e-12 * inf_norm(&b).max(1e-300));
    }

    #[test]
    fn csr_triplet_round_trip(n in 1usize..12, seed in 0u64..500) {
        let mut s = NormalStream::new(seed);
        let mut triplets = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if s.uniform(0.0, 1.0) < 0.3 {
                    triplets.push((i, j, s.next_normal()));
                }
            }
        }
        let a = CsrMatrix::from_triplets(n, &triplets).unwrap();
        prop_assert_eq!(CsrMatrix::from_dense(&a.to_dense()).unwrap(), a);
    }
}
