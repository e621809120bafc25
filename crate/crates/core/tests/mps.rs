use faer::Mat;
use kz_phi4::linalg::{self, C64};
use kz_phi4::mps::{Direction, MatrixProductState, TruncationPolicy};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn wide() -> TruncationPolicy {
    TruncationPolicy::new(4096, 1e-15).unwrap()
}

fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> Mat<C64> {
    let a = Mat::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
    let h = &a + a.transpose();
    linalg::expm_symmetric(h.as_ref(), C64::new(0.0, -1.0)).unwrap()
}

fn random_matrix(n: usize, rng: &mut ChaCha8Rng) -> Mat<C64> {
    Mat::from_fn(n, n, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
}

fn dense_apply_two(v: &[C64], gate: &Mat<C64>, bond: usize, length: usize, d: usize) -> Vec<C64> {
    let right = d.pow((length - bond - 2) as u32);
    let mut out = vec![C64::new(0.0, 0.0); v.len()];
    for (idx, o) in out.iter_mut().enumerate() {
        let r = idx % right;
        let pair = (idx / right) % (d * d);
        let l = idx / right / (d * d);
        for p in 0..d * d {
            *o += gate[(pair, p)] * v[(l * d * d + p) * right + r];
        }
    }
    out
}

fn dense_apply_one(v: &[C64], op: &Mat<C64>, site: usize, length: usize, d: usize) -> Vec<C64> {
    let right = d.pow((length - site - 1) as u32);
    let mut out = vec![C64::new(0.0, 0.0); v.len()];
    for (idx, o) in out.iter_mut().enumerate() {
        let r = idx % right;
        let s = (idx / right) % d;
        let l = idx / right / d;
        for t in 0..d {
            *o += op[(s, t)] * v[(l * d + t) * right + r];
        }
    }
    out
}

fn norm_sq(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum()
}

#[derive(Clone, Debug)]
enum Op {
    Gate { bond: usize, right: bool },
    Site { site: usize },
    Center { site: usize },
}

fn ops(length: usize) -> impl Strategy<Value = Vec<Op>> {
    prop::collection::vec(
        prop_oneof![
            (0..length - 1, any::<bool>()).prop_map(|(bond, right)| Op::Gate { bond, right }),
            (0..length).prop_map(|site| Op::Site { site }),
            (0..length).prop_map(|site| Op::Center { site }),
        ],
        1..12,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn isometries_and_ledger_survive_any_sequence(seed in any::<u64>(), seq in ops(5)) {
        let (length, d) = (5, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut psi = MatrixProductState::random(length, d, 4, wide(), &mut rng).unwrap();
        let mut dense = psi.to_dense().unwrap();
        let start = norm_sq(&dense);
        for op in &seq {
            match *op {
                Op::Gate { bond, right } => {
                    let g = random_unitary(d * d, &mut rng);
                    let dir = if right { Direction::Right } else { Direction::Left };
                    psi.apply_two_site_gate(g.as_ref(), bond, dir).unwrap();
                    dense = dense_apply_two(&dense, &g, bond, length, d);
                }
                Op::Site { site } => {
                    let m = random_matrix(d, &mut rng);
                    psi.apply_single_site(m.as_ref(), site).unwrap();
                    dense = dense_apply_one(&dense, &m, site, length, d);
                }
                Op::Center { site } => psi.move_center(site).unwrap(),
            }
            prop_assert!(psi.canonical_defect() < 1e-10);
        }
        let ratio = norm_sq(&dense) / start;
        prop_assert!((psi.norm_ledger / ratio - 1.0).abs() < 1e-12 * seq.len() as f64 + 1e-13);
        let mps = psi.to_dense().unwrap();
        let n = norm_sq(&dense).sqrt();
        let overlap: C64 = mps.iter().zip(&dense).map(|(a, b)| a.conj() * b).sum();
        prop_assert!((overlap.norm() / n - 1.0).abs() < 1e-10);
    }

    #[test]
    fn larger_bond_never_discards_more(seed in any::<u64>(), bond in 0usize..5) {
        let (length, d) = (6, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = MatrixProductState::random(length, d, 9, wide(), &mut rng).unwrap();
        let g = random_unitary(d * d, &mut rng);
        let mut last = f64::INFINITY;
        for m in [2, 3, 5, 8, 13, 27] {
            let mut psi = base.clone();
            psi.policy = TruncationPolicy::new(m, 1e-15).unwrap();
            let info = psi.apply_two_site_gate(g.as_ref(), bond, Direction::Right).unwrap();
            prop_assert!(info.discarded_weight <= last + 1e-15);
            last = info.discarded_weight;
        }
    }

    #[test]
    fn expectations_do_not_depend_on_the_center(seed in any::<u64>(), a in 0usize..6, b in 0usize..6) {
        let (length, d) = (6, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut psi = MatrixProductState::random(length, d, 6, wide(), &mut rng).unwrap();
        let x = random_matrix(d, &mut rng);
        let y = random_matrix(d, &mut rng);
        let reference = psi.expect_two(x.as_ref(), a, y.as_ref(), b).unwrap();
        for c in 0..length {
            psi.move_center(c).unwrap();
            let v = psi.expect_two(x.as_ref(), a, y.as_ref(), b).unwrap();
            prop_assert!((v - reference).norm() < 1e-12);
        }
    }
}
