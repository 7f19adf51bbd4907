use lcanet::gradcheck::{self, GradcheckConfig, Target};
use lcanet::layers::{avgpool2, upsample2};
use lcanet::Tensor;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn adjoint_identities_hold(seed in any::<u64>()) {
        for t in Target::LINEAR {
            let r = gradcheck::adjoint_residual(t, seed).unwrap();
            prop_assert!(r < 1e-9, "{t}: residual {r:e}");
        }
    }

    #[test]
    fn avgpool_inverts_upsample(h in 1usize..6, w in 1usize..6, c in 1usize..5, data in prop::collection::vec(-1e3f64..1e3, 150)) {
        let x = Tensor::from_vec(&[h, w, c], data[..h * w * c].to_vec()).unwrap();
        prop_assert_eq!(avgpool2(&upsample2(&x).unwrap()).unwrap(), x);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn finite_differences_agree(seed in any::<u64>()) {
        let cfg = GradcheckConfig { seed, ..Default::default() };
        for t in Target::ALL {
            let r = gradcheck::gradcheck(t, &cfg).unwrap();
            prop_assert!(r.checked >= 200);
            prop_assert!(r.passed(), "{t}: max rel err {:e} at {:?}", r.max_rel_error, r.worst);
        }
    }
}
