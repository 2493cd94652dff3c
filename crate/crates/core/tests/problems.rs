use ecx_core::{Problem, ProblemKind, ProblemSpec, SampleHandle, Shard};
use nalgebra::DMatrix;

#[test]
fn stochastic_gradients_average_to_the_full_gradient() {
    let specs = [
        ProblemSpec::default_linreg(),
        ProblemSpec::new(ProblemKind::LogReg {
            d: 5,
            samples: 64,
            lambda: 0.1,
        }),
        ProblemSpec::new(ProblemKind::Quadratic {
            spectrum: vec![1.0, 2.0, 3.0],
            noise_std: 2.0,
        }),
    ];
    for spec in specs {
        let p = Problem::build(&spec).unwrap();
        let d = p.dim();
        let x: Vec<f64> = (0..d).map(|j| 0.3 - 0.1 * j as f64).collect();
        let full = p.full_grad(&x);
        let draws = 40_000u64;
        let (mut sum, mut sum_sq) = (vec![0.0; d], vec![0.0; d]);
        for s in 0..draws {
            let g = p.stoch_grad(&Shard::Population, &x, &SampleHandle::new(11, s, 0, 0)).unwrap();
            for j in 0..d {
                sum[j] += g[j];
                sum_sq[j] += g[j] * g[j];
            }
        }
        let n = draws as f64;
        for j in 0..d {
            let mean = sum[j] / n;
            let se = ((sum_sq[j] / n - mean * mean) / n).sqrt();
            assert!(
                (mean - full[j]).abs() <= 4.0 * se + 1e-12,
                "{:?} coordinate {j}: mean {mean}, full {}, se {se}",
                spec.kind,
                full[j]
            );
        }
    }
}

#[test]
fn power_iteration_matches_eigendecomposition() {
    for (d, samples) in [(20, 512), (6, 30)] {
        let spec = ProblemSpec::new(ProblemKind::LinReg {
            d,
            samples,
            label_noise: 0.1,
            condition_number: 25.0,
        });
        let p = Problem::build(&spec).unwrap();
        let data = p.dataset().unwrap();
        let rows: Vec<f64> = (0..data.len()).flat_map(|i| data.row(i).to_vec()).collect();
        let a = DMatrix::from_row_slice(data.len(), d, &rows);
        let hessian = a.transpose() * &a / data.len() as f64;
        let top = hessian.symmetric_eigenvalues().max();
        let l = p.smoothness_l();
        assert!((l - top).abs() <= 1e-8 * top, "power iteration {l}, eigen {top}");
    }
}

#[test]
fn quadratic_smoothness_is_the_largest_eigenvalue() {
    let p = Problem::build(&ProblemSpec::new(ProblemKind::Quadratic {
        spectrum: vec![0.5, 7.0, 2.0],
        noise_std: 0.0,
    }))
    .unwrap();
    assert_eq!(p.smoothness_l(), 7.0);
    assert_eq!(p.minimizer().unwrap().1, 0.0);
}
