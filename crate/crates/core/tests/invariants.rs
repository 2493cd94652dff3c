use ecx_core::{
    compress, run, AlphaSchedule, CompressorKind, CompressorSpec, EstimatorKind, ProblemKind, ProblemSpec, RunConfig,
    SchemeKind,
};
use proptest::prelude::*;

fn vector(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3f64..1e3, d)
}

proptest! {
    #[test]
    fn selection_compressors_split_exactly(x in vector(16), k in 1usize..16, seed in any::<u64>(), step in 0u64..100) {
        for kind in [CompressorKind::TopK { k }, CompressorKind::RandK { k, rescale: false }, CompressorKind::Identity] {
            let r = compress(&x, &CompressorSpec::new(kind).with_seed(seed), step, 0).unwrap();
            for j in 0..x.len() {
                prop_assert_eq!(r.compressed[j] + r.residual[j], x[j]);
                prop_assert!(r.compressed[j] == 0.0 || r.residual[j] == 0.0);
            }
        }
    }

    #[test]
    fn top_k_keeps_the_largest(x in vector(12), k in 1usize..12) {
        let r = compress(&x, &CompressorSpec::new(CompressorKind::TopK { k }), 0, 0).unwrap();
        let kept: Vec<usize> = (0..x.len()).filter(|&j| r.residual[j] == 0.0).collect();
        prop_assert!(kept.len() >= k);
        let smallest_kept = kept.iter().map(|&j| x[j].abs()).fold(f64::INFINITY, f64::min);
        let largest_dropped = (0..x.len())
            .filter(|&j| r.residual[j] != 0.0)
            .map(|j| x[j].abs())
            .fold(0.0, f64::max);
        prop_assert!(smallest_kept >= largest_dropped);
    }

    #[test]
    fn one_bit_preserves_l1_mass_and_signs(x in vector(9)) {
        let r = compress(&x, &CompressorSpec::one_bit(), 0, 0).unwrap();
        let l1: f64 = x.iter().map(|v| v.abs()).sum();
        let out: f64 = r.compressed.iter().map(|v| v.abs()).sum();
        prop_assert!((l1 - out).abs() <= 1e-12 * l1.max(1.0));
        for (c, v) in r.compressed.iter().zip(&x) {
            prop_assert_eq!(c.is_sign_negative(), *v < 0.0);
        }
    }

    #[test]
    fn compression_is_a_pure_function_of_its_key(x in vector(10), seed in any::<u64>(), step in 0u64..1000, node in 0u64..8) {
        for kind in [CompressorKind::RandK { k: 3, rescale: true }, CompressorKind::StochQuant { levels: 3 }] {
            let spec = CompressorSpec::new(kind).with_seed(seed);
            prop_assert_eq!(compress(&x, &spec, step, node).unwrap(), compress(&x, &spec, step, node).unwrap());
        }
    }

    #[test]
    fn stoch_quant_stays_on_the_grid(x in vector(8), levels in 1u32..6, seed in any::<u64>()) {
        let r = compress(&x, &CompressorSpec::new(CompressorKind::StochQuant { levels }).with_seed(seed), 0, 0).unwrap();
        let max = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (c, v) in r.compressed.iter().zip(&x) {
            prop_assert!(c.abs() <= max * (1.0 + 1e-12));
            prop_assert!(*c == 0.0 || c.signum() == v.signum());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// Bit accounting is linear in the number of steps and workers.
    #[test]
    fn bits_accumulate_linearly(workers in 1usize..5, steps in 2u64..20) {
        let cfg = RunConfig::new(
            ProblemSpec::new(ProblemKind::LinReg { d: 6, samples: 40, label_noise: 0.1, condition_number: 4.0 }),
            EstimatorKind::Momentum,
            AlphaSchedule::constant(0.3),
            0.01,
            steps,
        )
        .with_compressor(CompressorSpec::one_bit())
        .with_scheme(SchemeKind::ErrorCompensatedX, 0.3)
        .with_workers(workers);
        let trace = run(&cfg).unwrap();
        let per_step = trace.records[1].cum_bits;
        prop_assert!(per_step > 0);
        for (t, r) in trace.records.iter().enumerate() {
            prop_assert_eq!(r.cum_bits, t as u64 * per_step);
        }
    }
}
