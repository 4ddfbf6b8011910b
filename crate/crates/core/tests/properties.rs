use gswalk::enumeration::{enumerate_walk_default, verify_subgaussian};
use gswalk::instance::{format_instance, parse_instance};
use gswalk::linalg::{dot, min_norm_least_squares, norm};
use gswalk::ortho::{compute_z, coordinate_z, project_pivot, verify_direction_expansion};
use gswalk::rng::{stream, unit_vector};
use gswalk::smoothed::{
    build_augmented, inner_hit_probability, tilt_distribution, trial_perturbation, verify_comparison,
};
use gswalk::{generate_instance, run_walk, Instance, InstanceKind, OrthoTrace};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn kind_strategy() -> impl Strategy<Value = InstanceKind> {
    prop_oneof![
        Just(InstanceKind::RandomUnitSphere),
        Just(InstanceKind::RandomInBall),
        Just(InstanceKind::DuplicatedColumn),
        Just(InstanceKind::SignColumns),
    ]
}

fn instance_strategy(max_d: usize, max_n: usize) -> impl Strategy<Value = Instance> {
    (kind_strategy(), 1..=max_d, 1..=max_n, any::<u64>())
        .prop_map(|(kind, d, n, seed)| generate_instance(kind, d, n, seed).unwrap())
}

fn walked(inst: &Instance, seed: u64) -> (gswalk::WalkTrace, OrthoTrace) {
    let trace = run_walk(inst, &mut stream(seed, 0)).unwrap();
    let ortho = OrthoTrace::build(inst, &trace).unwrap();
    (trace, ortho)
}

/// Orthogonal projection of `v` onto the column span of `m`.
fn span_projection(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    let c = min_norm_least_squares(m, &DVector::from_column_slice(v), 1e-10);
    (m * c).as_slice().to_vec()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 96, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn format_parse_round_trip(inst in instance_strategy(6, 10)) {
        let back = parse_instance(&format_instance(&inst)).unwrap();
        prop_assert_eq!(back.matrix().shape(), inst.matrix().shape());
        for (a, b) in back.matrix().iter().zip(inst.matrix().iter()) {
            prop_assert!((a - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn generation_is_pure(kind in kind_strategy(), d in 1usize..6, n in 1usize..9, seed in any::<u64>()) {
        let a = generate_instance(kind, d, n, seed).unwrap();
        let b = generate_instance(kind, d, n, seed).unwrap();
        prop_assert!(a.matrix().iter().zip(b.matrix().iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn walk_steps_are_well_formed(inst in instance_strategy(5, 9), seed in any::<u64>()) {
        let (trace, _) = walked(&inst, seed);
        prop_assert!(trace.validate().is_ok());
        prop_assert!(trace.len() <= inst.n());
        let mut seen = vec![false; inst.n()];
        let mut active: Vec<usize> = (0..inst.n()).collect();
        for step in &trace.steps {
            prop_assert_eq!(Some(&step.pivot), active.iter().max());
            prop_assert_eq!(step.u[step.pivot], 1.0);
            for (i, &ui) in step.u.iter().enumerate() {
                if !active.contains(&i) {
                    prop_assert_eq!(ui, 0.0);
                }
            }
            let mu = norm(&inst.apply(&step.u));
            prop_assert!(mu <= norm(inst.column(step.pivot)) + 1e-9);
            // Both lengths are stored as magnitudes.
            prop_assert!(step.delta_minus > 0.0 && step.delta_plus > 0.0);
            let total = step.delta_plus + step.delta_minus;
            let mean = step.delta_plus * (step.delta_minus / total) - step.delta_minus * (step.delta_plus / total);
            prop_assert!(mean.abs() <= 1e-12 * total);
            prop_assert!(step.frozen.windows(2).all(|w| w[0] > w[1]));
            for &f in &step.frozen {
                prop_assert!(!seen[f]);
                seen[f] = true;
            }
            active.retain(|i| !step.frozen.contains(i));
        }
        prop_assert!(seen.iter().all(|&s| s));
        prop_assert!(trace.final_x.iter().all(|&s| s == 1 || s == -1));
    }

    #[test]
    fn ortho_invariants(inst in instance_strategy(5, 9), seed in any::<u64>(), vseed in any::<u64>()) {
        let (trace, ortho) = walked(&inst, seed);
        let (d, n) = (inst.d(), inst.n());

        let ws: Vec<&Vec<f64>> = ortho.nonzero_w().collect();
        for (a, wa) in ws.iter().enumerate() {
            for (b, wb) in ws.iter().enumerate() {
                let expect = if a == b { 1.0 } else { 0.0 };
                prop_assert!((dot(wa, wb) - expect).abs() <= 1e-8);
            }
        }
        prop_assert!(ortho.hat_t <= d.min(n));
        prop_assert!(ortho.hat_t <= inst.rank());
        prop_assert!(verify_direction_expansion(&inst, &trace, &ortho) <= 1e-8);

        let zsum: f64 = coordinate_z(&inst, &ortho).iter().sum();
        prop_assert!(zsum <= ortho.hat_t as f64 + 1e-8);

        let mut rng = stream(vseed, 7);
        let v = unit_vector(d, &mut rng);
        let scaled: Vec<f64> = v.iter().map(|x| 3.0 * x).collect();
        prop_assert!(compute_z(&inst, &ortho, &v) <= 1.0 + 1e-9);
        prop_assert!(compute_z(&inst, &ortho, &scaled) <= 9.0 + 1e-8);

        let mut sum = vec![0.0; d];
        for p in &ortho.pivots {
            let pv = project_pivot(&ortho, p.pivot, &v).unwrap();
            let again = project_pivot(&ortho, p.pivot, &pv).unwrap();
            for (a, b) in pv.iter().zip(&again) {
                prop_assert!((a - b).abs() <= 1e-8);
            }
            for (s, x) in sum.iter_mut().zip(&pv) {
                *s += x;
            }
        }
        let target = span_projection(inst.matrix(), &v);
        let diff: Vec<f64> = sum.iter().zip(&target).map(|(a, b)| a - b).collect();
        prop_assert!(norm(&diff) <= 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn leaf_probabilities_sum_to_one(inst in instance_strategy(4, 6)) {
        let dist = enumerate_walk_default(&inst).unwrap();
        prop_assert!((dist.total_probability() - 1.0).abs() <= 1e-12);
        prop_assert!(dist.pruned_mass <= 1e-12);
        prop_assert!(dist.leaves.iter().all(|l| l.probability > 0.0));
    }

    #[test]
    fn tilted_law_invariants(inst in instance_strategy(3, 5), sigma in 1.0f64..3.0, c in 2.0f64..6.0) {
        let aug = build_augmented(&inst);
        let leaves = enumerate_walk_default(&aug).unwrap();
        let tilted = tilt_distribution(&leaves, &inst, sigma, c).unwrap();
        let total: f64 = tilted.support.iter().map(|p| p.tilted_probability).sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        prop_assert!(tilted.support.iter().all(|p| p.norm_sq <= tilted.threshold() + 1e-12));
        prop_assert!(tilted.cutoff_set_mass >= 1.0 - 1.0 / c - 1e-9);

        let e_hat_t: f64 = leaves.leaves.iter().map(|l| l.probability * l.ortho.hat_t as f64).sum();
        prop_assert!(2.0 * tilted.v <= 2.0 * e_hat_t + 1e-9);

        let mut rng = stream(inst.n() as u64, 3);
        let v = unit_vector(inst.n(), &mut rng);
        let mut padded = vec![0.0; inst.d()];
        padded.extend(&v);
        // ⟨X̄, v⟩ = √2 ⟨M̄X̄, (0, v)⟩, so λ on v becomes √2·λ on the padded vector.
        for lambda in [0.5, 1.0, 2.0] {
            let m: f64 = leaves
                .leaves
                .iter()
                .map(|l| {
                    let s: f64 = l.x.iter().zip(&v).map(|(&x, vi)| f64::from(x) * vi).sum();
                    l.probability * (lambda * s).exp()
                })
                .sum();
            prop_assert!(m <= (lambda * lambda).exp() + 1e-10, "lambda {lambda}: {m}");
            let ratio = verify_subgaussian(&leaves, &aug, &padded, lambda * std::f64::consts::SQRT_2).unwrap();
            prop_assert!(ratio <= 1.0 + 1e-10);
        }
    }

    #[test]
    fn inner_hit_is_monotone_in_epsilon(inst in instance_strategy(3, 5), sigma in 1.0f64..2.0, trial in 0u64..1000) {
        let aug = build_augmented(&inst);
        let leaves = enumerate_walk_default(&aug).unwrap();
        let tilted = tilt_distribution(&leaves, &inst, sigma, 4.0).unwrap();
        let sample = trial_perturbation(inst.d(), inst.n(), sigma, 99, trial);
        let mut last = 0.0;
        for k in 0..=40 {
            let eps = 0.1 * k as f64;
            let p = inner_hit_probability(&inst, &sample, &tilted, eps).unwrap();
            prop_assert!(p + 1e-15 >= last);
            prop_assert!(p <= 1.0 + 1e-12);
            last = p;
        }
    }

    #[test]
    fn comparison_inequality_holds(
        d in 2usize..7,
        n in 4usize..11,
        sigma in 1.0f64..3.0,
        eps in 0.05f64..2.0,
        seed in any::<u64>(),
        flips in any::<u16>(),
    ) {
        let mut rng = stream(seed, 11);
        let m_i: Vec<f64> = unit_vector(n, &mut rng);
        let x: Vec<i8> = (0..n).map(|j| if (seed >> j) & 1 == 0 { 1 } else { -1 }).collect();
        let y: Vec<i8> = x.iter().enumerate().map(|(j, &s)| if (flips >> j) & 1 == 0 { s } else { -s }).collect();
        let k = x.iter().zip(&y).filter(|(a, b)| a == b).count();
        prop_assume!(k > 0 && k < n);
        let check = verify_comparison(&m_i, &x, &y, sigma, d, n, eps).unwrap();
        prop_assert!(check.holds(1e-6), "{check:?}");
    }
}
