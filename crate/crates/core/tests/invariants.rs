//! Property tests over seeded random instances. Each case draws a seed and
//! small dimensions; the structures themselves come from the crate's own
//! deterministic generators.

use choiforge::channel::{
    adjust_kraus, adjust_tp, apply_kraus, kraus_to_choi, numerical_rank, swap_io, ConstraintKind, RankRule,
};
use choiforge::datagen::{
    canonical_frame, classical_transform, random_orthogonal, random_pair_sample, random_s_matrix, random_tp_channel,
    toy_channel, channel_maxeig_sample, Rng,
};
use choiforge::fidelity::{build_q, build_s, fidelity_kraus, fidelity_ratio, State};
use choiforge::linalg::sym_eig;
use choiforge::lowrank::{self, LowRankConfig, LowRankStatus};
use choiforge::{DensityMatrix, FidelityTensor, Matrix, SymMatrix};
use proptest::prelude::*;

const TP: ConstraintKind = ConstraintKind::TracePreserving;
const UNIT: ConstraintKind = ConstraintKind::UnitPreserving;

fn dims() -> impl Strategy<Value = (usize, usize)> {
    (1usize..=4, 1usize..=4)
}

fn random_sym(dim: usize, rng: &mut Rng) -> SymMatrix<f64> {
    let a = Matrix::from_fn(dim, dim, |_, _| rng.uniform_sym());
    SymMatrix::from_matrix(&a.add(&a.transpose())).unwrap()
}

/// Channel with enough Kraus operators for the TP constraint to be reachable.
fn tp_channel(n: usize, d: usize, extra: usize, rng: &mut Rng) -> choiforge::KrausSet<f64> {
    let n_s = (n.div_ceil(d) + extra).min(d * n);
    random_tp_channel(n, d, n_s, rng).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn eigendecomposition_is_consistent(dim in 1usize..=12, seed in any::<u64>()) {
        let a = random_sym(dim, &mut Rng::new(seed));
        let eig = sym_eig(&a).unwrap();
        let norm = a.frobenius_norm().max(1.0);
        let sum: f64 = eig.values.iter().sum();
        prop_assert!((sum - a.trace()).abs() <= 1e-9 * (1.0 + a.trace().abs()));
        for i in 0..dim {
            let v = eig.vector(i);
            let av = a.as_matrix().matvec(&v);
            for (x, y) in av.iter().zip(&v) {
                prop_assert!((x - eig.values[i] * y).abs() <= 1e-9 * norm);
            }
        }
    }

    #[test]
    fn choi_of_any_kraus_set_is_psd((n, d) in dims(), n_s in 1usize..=5, seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let ops = (0..n_s).map(|_| Matrix::from_fn(d, n, |_, _| rng.uniform_sym())).collect();
        let choi = kraus_to_choi(&choiforge::KrausSet::new(ops).unwrap());
        let min = sym_eig(choi.matrix()).unwrap().min_value();
        prop_assert!(min >= -1e-10, "min eigenvalue {min}");
    }

    #[test]
    fn adjust_tp_is_idempotent((n, d) in dims(), extra in 0usize..3, seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let ch = tp_channel(n, d, extra, &mut rng);
        let ops = ch.operators().iter().map(|b| b.scale(1.0 + 0.3 * rng.uniform01())).collect();
        let once = adjust_tp(&choiforge::KrausSet::new(ops).unwrap()).unwrap();
        let twice = adjust_tp(&once).unwrap();
        for (a, b) in once.operators().iter().zip(twice.operators()) {
            prop_assert!(a.max_abs_diff(b) <= 1e-10);
        }
    }

    #[test]
    fn swap_io_is_an_involution((n, d) in dims(), seed in any::<u64>()) {
        let choi = kraus_to_choi(&tp_channel(n, d, 1, &mut Rng::new(seed)));
        prop_assert_eq!(swap_io(&swap_io(&choi)), choi);
    }

    #[test]
    fn rank_ignores_values_below_the_cut(
        values in proptest::collection::vec(0.0f64..10.0, 0..12),
        tiny in 0.0f64..1e-5,
    ) {
        let before = numerical_rank(&values);
        let mut more = values.clone();
        more.push(tiny * (1.0 - 1e-9));
        prop_assert!(tiny < RankRule::default().abs_cut);
        prop_assert_eq!(numerical_rank(&more), before);
    }

    #[test]
    fn fidelity_tensor_is_exactly_symmetric((n, d) in dims(), m in 1usize..40, seed in any::<u64>()) {
        let sample = random_pair_sample::<f64>(n, d, m, &mut Rng::new(seed)).unwrap();
        let s = build_s(&sample).unwrap();
        let dim = s.dim();
        for i in 0..dim {
            for j in 0..dim {
                prop_assert_eq!(s.matrix().get(i, j).to_bits(), s.matrix().get(j, i).to_bits());
            }
        }
    }

    #[test]
    fn tp_fidelity_lies_between_zero_and_total_weight((n, d) in dims(), m in 1usize..40, seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let sample = random_pair_sample::<f64>(n, d, m, &mut rng).unwrap();
        let s = build_s(&sample).unwrap();
        let ch = tp_channel(n, d, 1, &mut rng);
        let f = fidelity_kraus(&ch, &s).unwrap();
        let total = sample.total_omega();
        prop_assert!(f >= -1e-9 && f <= total + 1e-9, "F = {f}, Σω = {total}");
    }

    #[test]
    fn ratio_is_scale_invariant_and_bounded((n, d) in dims(), m in 1usize..40, c in 0.1f64..10.0, seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let sample = random_pair_sample::<f64>(n, d, m, &mut rng).unwrap();
        let (s, q) = (build_s(&sample).unwrap(), build_q(&sample).unwrap());
        let ch = match adjust_kraus(&random_tp_channel::<f64>(n, d, d * n, &mut rng).unwrap(), UNIT) {
            Ok(ch) => ch,
            Err(_) => return Ok(()),
        };
        let Ok(r) = fidelity_ratio(&ch, &s, &q) else { return Ok(()) };
        let scaled = fidelity_ratio(&ch.scale(-c), &s, &q).unwrap();
        prop_assert!((r - scaled).abs() <= 1e-12 * r.abs().max(1.0));
        prop_assert!(r >= -1e-9 && r <= 1.0 + 1e-9, "ratio {r}");
    }

    #[test]
    fn generators_are_deterministic_and_normalized((n, d) in dims(), seed in any::<u64>()) {
        let a = random_pair_sample::<f64>(n, d, 20, &mut Rng::new(seed)).unwrap();
        let b = random_pair_sample::<f64>(n, d, 20, &mut Rng::new(seed)).unwrap();
        prop_assert_eq!(&a, &b);
        for r in a.records() {
            for st in [&r.input, &r.output] {
                let p = st.as_pure().unwrap();
                let norm: f64 = p.amplitudes().iter().map(|v| v * v).sum::<f64>().sqrt();
                prop_assert!((norm - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn classical_transform_is_gauge_invariant(n in 1usize..=4, d in 1usize..=4, m in 8usize..20, seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let xs: Vec<Vec<f64>> = (0..m).map(|_| rng.uniform_vec(n)).collect();
        let fs: Vec<Vec<f64>> = (0..m).map(|_| rng.uniform_vec(d)).collect();
        // well-conditioned nondegenerate maps: orthogonal times a positive diagonal
        let map = |k: usize, rng: &mut Rng| {
            let o = random_orthogonal::<f64>(k, rng);
            let diag: Vec<f64> = (0..k).map(|_| 0.5 + rng.uniform01()).collect();
            o.matmul(&Matrix::from_diag(&diag))
        };
        let (a, c) = (map(n, &mut rng), map(d, &mut rng));
        let xs2: Vec<Vec<f64>> = xs.iter().map(|x| a.matvec(x)).collect();
        let fs2: Vec<Vec<f64>> = fs.iter().map(|f| c.matvec(f)).collect();
        let (Ok(p), Ok(q)) = (classical_transform(&xs, &fs), classical_transform(&xs2, &fs2)) else {
            return Ok(());
        };
        let (p, q) = (canonical_frame(&p).unwrap(), canonical_frame(&q).unwrap());
        for (r1, r2) in p.records().iter().zip(q.records()) {
            for (s1, s2) in [(&r1.input, &r2.input), (&r1.output, &r2.output)] {
                let (u, v) = (s1.as_pure().unwrap().amplitudes(), s2.as_pure().unwrap().amplitudes());
                let same = u.iter().zip(v).all(|(x, y)| (x - y).abs() <= 1e-9);
                let flipped = u.iter().zip(v).all(|(x, y)| (x + y).abs() <= 1e-9);
                prop_assert!(same || flipped, "{u:?} vs {v:?}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lowrank_keeps_stencil_and_improves_monotonically(
        (n, d) in dims(),
        n_s_pick in 0usize..16,
        unit in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let kind = if unit { UNIT } else { TP };
        let need = if unit { d.div_ceil(n) } else { n.div_ceil(d) };
        let n_s = need + n_s_pick % (d * n - need + 1);
        let s = random_s_matrix::<f64>(n, d, &mut Rng::new(seed));
        let cfg = LowRankConfig { seed, trace: true, max_iter: 200, ..Default::default() };
        let res = lowrank::run(&s, n_s, kind, &cfg).unwrap();

        let b = res.state.b.unpack();
        for i in 0..d * n {
            for col in (i + 1)..n_s {
                prop_assert_eq!(b[(i, col)], 0.0);
            }
        }
        let tr = &res.trace;
        for w in tr.windows(2) {
            prop_assert!(w[1].best_fidelity >= w[0].best_fidelity);
            // escape steps may descend; so may the first step after a restart
            if w[1].pick_offset == 0 && w[0].pick_offset == 0 && res.restarts == 0 {
                let slack = 1e-9 * w[0].fidelity.abs().max(1.0);
                prop_assert!(w[1].fidelity >= w[0].fidelity - slack, "{:?} -> {:?}", w[0], w[1]);
            }
        }
        let best = tr.iter().map(|r| r.best_fidelity).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(tr.is_empty() || (res.fidelity() - best).abs() <= 1e-9 * best.abs().max(1.0));
    }

    #[test]
    fn rank_one_fixed_point_is_stationary(n in 1usize..=3, extra in 1usize..=2, seed in any::<u64>()) {
        let d = n + extra;
        let mut rng = Rng::new(seed);
        let ch = toy_channel::<f64>(n, d, &mut rng).unwrap();
        let (sample, _) = channel_maxeig_sample(&ch, 200, &mut rng).unwrap();
        let s = build_s(&sample).unwrap();
        let res = lowrank::run(&s, 1, TP, &LowRankConfig { seed, ..Default::default() }).unwrap();
        prop_assume!(res.status == LowRankStatus::Converged);
        prop_assert!(stationarity_residual(&s, &res.state.b.unpack(), &res.state.lambda) <= 1e-7);
    }
}

/// `max |(S u)_{jk} − Σ_{k'} λ_{kk'} u_{jk'}|` relative to `max(1, ‖S‖_F)`
/// for a single Kraus column `u` under the TP constraint.
fn stationarity_residual(s: &FidelityTensor<f64>, b: &Matrix<f64>, lambda: &SymMatrix<f64>) -> f64 {
    let (n, d) = (s.n(), s.d());
    let u = b.col(0);
    let su = s.matrix().as_matrix().matvec(&u);
    let mut worst = 0.0f64;
    for j in 0..d {
        for k in 0..n {
            let lu: f64 = (0..n).map(|kp| lambda.get(k, kp) * u[j * n + kp]).sum();
            worst = worst.max((su[j * n + k] - lu).abs());
        }
    }
    worst / s.matrix().frobenius_norm().max(1.0)
}

#[test]
fn random_signs_cancel_exactly() {
    for seed in 0..20 {
        let mut rng = Rng::new(seed);
        let sample = random_pair_sample::<f64>(3, 2, 25, &mut rng).unwrap();
        let flip = |st: &State<f64>, rng: &mut Rng| match st.as_pure() {
            Some(p) if rng.sign() < 0.0 => State::Pure(p.negated()),
            _ => st.clone(),
        };
        let records = sample
            .records()
            .iter()
            .map(|r| {
                let mut r2 = r.clone();
                r2.input = flip(&r.input, &mut rng);
                r2.output = flip(&r.output, &mut rng);
                r2
            })
            .collect();
        let flipped = choiforge::MappingSample::new(records, None).unwrap();
        assert_eq!(build_s(&flipped).unwrap(), build_s(&sample).unwrap());
    }
}

#[test]
fn maximally_mixed_input_through_tp_channel_keeps_unit_trace() {
    let mut rng = Rng::new(3);
    for (n, d) in [(2, 3), (4, 2), (3, 3)] {
        let ch = tp_channel(n, d, 2, &mut rng);
        let out = apply_kraus(&ch, &DensityMatrix::maximally_mixed(n)).unwrap();
        assert!((out.trace() - 1.0).abs() < 1e-12);
    }
}
