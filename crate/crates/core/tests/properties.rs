use proptest::prelude::*;

use tvhom::measure::AtomicMeasure;
use tvhom::score::{
    d_rho, delta_eps, enumerate_psi, laplace_v, remainder_l2, score_laws, signal_stats,
    sqrt_quadratic_mean, sum_abs_mean, ScoreLaw,
};
use tvhom::tv::{
    encode_pair, lift, tv_homogenized_multinomial, tv_pmf, tv_product_bruteforce, tv_product_exact,
    Pmf, ProductInstance,
};
use tvhom::verify::atomwise_distance;

const C_LOWER: f64 = 0.1489;
const C_UPPER: f64 = 6.7129;

fn pmf_strategy(m: usize) -> impl Strategy<Value = Pmf> {
    prop::collection::vec(0.02f64..1.0, m).prop_map(|w| Pmf::from_weights(&w).unwrap())
}

fn instance_strategy(max_n: usize, max_m: usize) -> impl Strategy<Value = ProductInstance> {
    (1..=max_n, 2..=max_m).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec(pmf_strategy(m), n),
            prop::collection::vec(pmf_strategy(m), n),
        )
            .prop_map(|(ps, qs)| ProductInstance::new(ps, qs).unwrap())
    })
}

fn measure_strategy() -> impl Strategy<Value = AtomicMeasure> {
    prop::collection::vec((-3.0f64..3.0, 0.01f64..1.0), 1..6)
        .prop_map(|raw| AtomicMeasure::new(raw).unwrap())
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn admissibility_is_closed(inst in instance_strategy(4, 3)) {
        let etas = inst.encodings().unwrap();
        for e in &etas {
            prop_assert!(e.is_admissible(1e-12));
        }
        let conv = AtomicMeasure::convolve_family(&etas).unwrap();
        prop_assert!(conv.is_admissible(1e-10));
        let mix = AtomicMeasure::uniform_mixture(&etas).unwrap();
        prop_assert!(mix.is_admissible(1e-12));
    }

    #[test]
    fn mass_is_multiplicative(a in measure_strategy(), b in measure_strategy()) {
        let c = a.convolve(&b).unwrap();
        let want = a.total_mass() * b.total_mass();
        prop_assert!(close(c.total_mass(), want, 1e-12 * want.max(1.0)));
    }

    #[test]
    fn canonical_form_is_idempotent(a in measure_strategy()) {
        let again = AtomicMeasure::new(a.atoms().iter().map(|x| (x.position, x.weight))).unwrap();
        prop_assert_eq!(&again, &a);
        for w in a.atoms().windows(2) {
            prop_assert!(w[1].position - w[0].position > 1e-12);
        }
    }

    #[test]
    fn convolution_commutes_and_associates(
        a in measure_strategy(),
        b in measure_strategy(),
        c in measure_strategy(),
    ) {
        let ab = a.convolve(&b).unwrap();
        prop_assert!(atomwise_distance(&ab, &b.convolve(&a).unwrap()) <= 1e-12);
        let left = ab.convolve(&c).unwrap();
        let right = a.convolve(&b.convolve(&c).unwrap()).unwrap();
        prop_assert!(atomwise_distance(&left, &right) <= 1e-11);
    }

    #[test]
    fn power_matches_fold(a in measure_strategy(), n in 2usize..=5) {
        let fold = AtomicMeasure::convolve_family(&vec![a.clone(); n]).unwrap();
        prop_assert!(atomwise_distance(&a.power(n).unwrap(), &fold) <= 1e-12);
    }

    #[test]
    fn mass_controls_tv(inst in instance_strategy(4, 3)) {
        let etas = inst.encodings().unwrap();
        let conv = AtomicMeasure::convolve_family(&etas).unwrap();
        for mu in etas.iter().chain(std::iter::once(&conv)) {
            let m = mu.total_mass();
            let t = mu.t_functional();
            prop_assert!(1.0 - m <= t + 1e-12);
            prop_assert!(t <= (1.0 - m * m).max(0.0).sqrt() + 1e-12);
        }
    }

    #[test]
    fn encoding_matches_enumeration(inst in instance_strategy(5, 3)) {
        for (p, q) in inst.ps().iter().zip(inst.qs()) {
            let eta = encode_pair(p, q).unwrap();
            prop_assert!(close(eta.t_functional(), tv_pmf(p, q).unwrap(), 1e-12));
        }
        let exact = tv_product_exact(&inst).unwrap();
        let brute = tv_product_bruteforce(&inst).unwrap();
        prop_assert!(close(exact, brute, 1e-10));
    }

    #[test]
    fn lift_encodes_the_mixture(inst in instance_strategy(4, 3)) {
        let lifted = lift(&inst).unwrap();
        prop_assert_eq!(lifted.lambda_p.len(), inst.n() * inst.m());
        for flat in 0..lifted.lambda_p.len() {
            let (i, w) = lifted.unflatten(flat);
            prop_assert_eq!(lifted.flat_index(i, w), flat);
        }
        let mix = AtomicMeasure::uniform_mixture(&inst.encodings().unwrap()).unwrap();
        prop_assert!(atomwise_distance(&lifted.encode().unwrap(), &mix) <= 1e-12);
    }

    #[test]
    fn homogeneous_paths_agree(
        (p, q, n) in (2usize..=3).prop_flat_map(|m| (pmf_strategy(m), pmf_strategy(m), 1usize..=5))
    ) {
        let eta = encode_pair(&p, &q).unwrap();
        let conv = eta.power(n).unwrap().t_functional();
        let multi = tv_homogenized_multinomial(&p, &q, n).unwrap();
        let inst = ProductInstance::homogeneous(p, q, n).unwrap();
        let brute = tv_product_bruteforce(&inst).unwrap();
        prop_assert!(close(conv, multi, 1e-10));
        prop_assert!(close(multi, brute, 1e-10));
    }

    #[test]
    fn homogenization_sandwich(inst in instance_strategy(5, 3)) {
        let n = inst.n();
        let tv_vec = tv_product_exact(&inst).unwrap();
        let (pbar, qbar) = inst.homogenized().unwrap();
        let tv_hom = tv_homogenized_multinomial(&pbar, &qbar, n).unwrap();
        prop_assert!(C_LOWER * tv_hom <= tv_vec + 1e-12);
        prop_assert!(tv_hom <= C_UPPER * tv_vec + 1e-12);

        // The homogenized multinomial is a coarsening of the lifted product.
        let mix = AtomicMeasure::uniform_mixture(&inst.encodings().unwrap()).unwrap();
        let t_conv = mix.power(n).unwrap().t_functional();
        prop_assert!(tv_hom <= t_conv + 1e-10);
        prop_assert!(t_conv <= C_UPPER * tv_vec + 1e-9);
    }

    #[test]
    fn score_representation(inst in instance_strategy(4, 3)) {
        let etas = inst.encodings().unwrap();
        let laws = score_laws(&etas).unwrap();
        for law in &laws {
            prop_assert!(law.mean().abs() <= 1e-12);
        }
        let psi = enumerate_psi(&laws, 1_000_000).unwrap();
        let tv_vec = tv_product_exact(&inst).unwrap();
        prop_assert!(close(psi.abs_psi, tv_vec, 1e-10));

        let seconds: Vec<f64> = laws.iter().map(ScoreLaw::second_moment).collect();
        let nu: f64 = seconds.iter().sum();
        let rem = remainder_l2(&seconds);
        prop_assert!(close(psi.remainder_sq, rem, 1e-10));
        prop_assert!(rem <= nu.sinh() - nu + 1e-12);
        prop_assert!(psi.abs_remainder.powi(2) <= rem + 1e-10);
    }

    #[test]
    fn signal_and_linearization(inst in instance_strategy(4, 3)) {
        let etas = inst.encodings().unwrap();
        let s = signal_stats(&etas).unwrap();
        prop_assert!(s.alpha <= s.nu + 1e-12);
        prop_assert!(s.nu <= 2.0 * s.alpha + 1e-12);

        let laws = score_laws(&etas).unwrap();
        let abs_s = sum_abs_mean(&laws).unwrap();
        let tv_vec = tv_product_exact(&inst).unwrap();
        prop_assert!(s.nu / (1.0 + 3.0 * s.nu).sqrt() <= abs_s + 1e-10);
        prop_assert!((tv_vec - abs_s).abs() <= d_rho(s.nu) * abs_s + 1e-10);

        let v = sqrt_quadratic_mean(&laws).unwrap();
        prop_assert!(v / (2.0 * std::f64::consts::SQRT_2) <= abs_s + 1e-10);
        prop_assert!(abs_s <= 2.0 * v + 1e-10);
    }

    #[test]
    fn laplace_ordering(inst in instance_strategy(4, 3), lambda in 0.01f64..100.0) {
        let laws = score_laws(&inst.encodings().unwrap()).unwrap();
        let bar = ScoreLaw::uniform_mixture(&laws).unwrap();
        let copies = vec![bar; laws.len()];
        prop_assert!(laplace_v(&laws, lambda) <= laplace_v(&copies, lambda) + 1e-12);
        let v = sqrt_quadratic_mean(&laws).unwrap();
        let v_bar = sqrt_quadratic_mean(&copies).unwrap();
        prop_assert!(v_bar <= v + 1e-10);
    }

    #[test]
    fn delta_is_d_at_twice_eps(eps in 1e-6f64..0.5) {
        prop_assert!(close(delta_eps(eps), d_rho(2.0 * eps), 1e-14));
    }
}
