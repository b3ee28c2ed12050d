use gcn_ntk::analysis::alignment;
use gcn_ntk::inference::{partition_kernel, predict};
use gcn_ntk::ntk::{compute_ntk, SIGMOID_EXPANSION_LIMIT};
use gcn_ntk::{
    build_diffusion, linear_closed_form, Activation, ArchitectureSpec, DiffusionOperator, Graph,
    Matrix, NtkForm, OutputHead,
};
use proptest::prelude::*;

fn instance() -> impl Strategy<Value = (DiffusionOperator, Matrix)> {
    (2usize..10, 1usize..5).prop_flat_map(|(n, f)| {
        let edges = prop::collection::vec((0..n, 0..n), 0..2 * n);
        let feats = prop::collection::vec(-2.0f64..2.0, n * f);
        (edges, feats).prop_map(move |(edges, feats)| {
            let edges: Vec<_> = edges.into_iter().filter(|(u, v)| u != v).collect();
            let g = Graph::new(n, edges).unwrap();
            (build_diffusion(&g), Matrix::from_row_slice(n, f, &feats))
        })
    })
}

fn architecture() -> impl Strategy<Value = ArchitectureSpec> {
    let act = prop_oneof![Just(Activation::Linear), Just(Activation::Relu)];
    let head = prop_oneof![Just(OutputHead::Sigmoid), Just(OutputHead::Identity)];
    (act.clone(), act, 0usize..3, 1usize..6, 0.0f64..=1.0, head).prop_map(
        |(a, b, which, depth, alpha, head)| {
            let arch = match which {
                0 => ArchitectureSpec::vanilla(a, depth),
                1 => ArchitectureSpec::skip_pc(a, b, depth),
                _ => ArchitectureSpec::skip_alpha(a, b, alpha, depth),
            };
            arch.with_output_head(head)
        },
    )
}

fn form() -> impl Strategy<Value = NtkForm> {
    prop_oneof![Just(NtkForm::Hadamard), Just(NtkForm::Recursive)]
}

fn min_eigenvalue(m: &Matrix) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.min()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn kernel_is_symmetric_psd((s, x) in instance(), arch in architecture(), form in form()) {
        let stack = compute_ntk(&s, &x, &arch, form).unwrap();
        let report = stack.check_invariants();
        let theta = stack.theta().unwrap();
        prop_assert_eq!(theta, &theta.transpose());
        let widest = stack.sigma[arch.depth].diagonal().max();
        if arch.output_head == OutputHead::Identity || widest <= SIGMOID_EXPANSION_LIMIT {
            prop_assert!(report.ok(), "{:?}", report.violations);
            let n = theta.nrows() as f64;
            prop_assert!(min_eigenvalue(theta) >= -1e-8 * theta.trace().abs().max(1e-300) / n - stack.theta_slack);
        } else {
            prop_assert!(report.violations.iter().all(|v| v == "theta"), "{:?}", report.violations);
        }
        for (sigma, e_dot) in stack.sigma.iter().zip(&stack.e_dot) {
            prop_assert!(min_eigenvalue(sigma) >= -1e-8 * sigma.trace().abs().max(1e-300));
            prop_assert!(e_dot.iter().all(|&v| (-1e-12..=1.0 + 1e-12).contains(&v)));
        }
    }

    #[test]
    fn vanilla_linear_matches_closed_form(
        (s, x) in instance(),
        depth in 1usize..6,
        head in prop_oneof![Just(OutputHead::Sigmoid), Just(OutputHead::Identity)],
    ) {
        let arch = ArchitectureSpec::vanilla(Activation::Linear, depth).with_output_head(head);
        let theta = compute_ntk(&s, &x, &arch, NtkForm::Hadamard).unwrap().into_theta().unwrap();
        let direct = linear_closed_form(&s, &x, depth, arch.c_sigma, head).unwrap();
        let scale = direct.amax().max(1e-300);
        prop_assert!((theta - &direct).amax() / scale < 1e-10);
    }

    #[test]
    fn prediction_ignores_kernel_scale((s, x) in instance(), arch in architecture()) {
        let theta = compute_ntk(&s, &x, &arch, NtkForm::Hadamard).unwrap().into_theta().unwrap();
        let n = theta.nrows();
        prop_assume!(theta.amax() > 1e-6);
        let train: Vec<usize> = (0..n).step_by(2).collect();
        let test: Vec<usize> = (1..n).step_by(2).collect();
        let y: Vec<f64> = train.iter().map(|&i| if x[(i, 0)] >= 0.0 { 1.0 } else { -1.0 }).collect();
        let base = predict(&partition_kernel(&theta, &train, &test).unwrap(), &y);
        let scaled = predict(&partition_kernel(&(&theta * 10.0), &train, &test).unwrap(), &y);
        match (base, scaled) {
            (Ok(base), Ok(scaled)) if base.retries == scaled.retries => {
                prop_assert!((scaled.ridge - 10.0 * base.ridge).abs() <= 1e-9 * scaled.ridge);
                for (a, b) in base.scores.iter().zip(&scaled.scores) {
                    prop_assert!((a - b).abs() <= 1e-6 * (1.0 + a.abs()), "{} vs {}", a, b);
                }
            }
            // A near-singular block can need one more ridge step at one scale.
            (Ok(base), Ok(scaled)) => prop_assert!(base.retries.abs_diff(scaled.retries) <= 1),
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "{:?} vs {:?}", a.err(), b.err()),
        }
    }

    #[test]
    fn alignment_is_symmetric_and_scale_free(
        (s, x) in instance(),
        arch in architecture(),
        k in 1usize..3,
        scale in 0.01f64..100.0,
    ) {
        let a = compute_ntk(&s, &x, &arch, NtkForm::Hadamard).unwrap().into_theta().unwrap();
        let b = compute_ntk(&s, &x, &arch.with_depth(arch.depth + 2), NtkForm::Hadamard)
            .unwrap()
            .into_theta()
            .unwrap();
        let k = k.min(a.nrows());
        let ab = alignment(&a, &b, k).unwrap();
        let ba = alignment(&b, &a, k).unwrap();
        prop_assert!((ab - ba).abs() < 1e-9);
        prop_assert!((-1e-12..=1.0 + 1e-9).contains(&ab));
        prop_assert!((alignment(&a, &a, k).unwrap() - 1.0).abs() < 1e-9);
        let scaled = alignment(&(&a * scale), &b, k).unwrap();
        prop_assert!((scaled - ab).abs() < 1e-9);
    }
}

#[test]
fn wide_output_variance_is_reported() {
    let s = build_diffusion(&Graph::edgeless(2));
    let x = Matrix::from_row_slice(2, 1, &[1.75, -2.0]);
    let arch = ArchitectureSpec::vanilla(Activation::Linear, 1);
    let stack = compute_ntk(&s, &x, &arch, NtkForm::Recursive).unwrap();
    assert_eq!(stack.check_invariants().violations, ["theta"]);
    let identity = arch.with_output_head(OutputHead::Identity);
    assert!(compute_ntk(&s, &x, &identity, NtkForm::Recursive)
        .unwrap()
        .check_invariants()
        .ok());
}

#[test]
fn tiny_alpha_approaches_alpha_zero() {
    let g = Graph::new(5, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]).unwrap();
    let s = build_diffusion(&g);
    let x = Matrix::from_fn(5, 3, |i, j| ((i * 3 + j) as f64 * 0.7).sin());
    for act in [Activation::Linear, Activation::Relu] {
        let at = |alpha: f64| {
            let arch = ArchitectureSpec::skip_alpha(act, act, alpha, 4);
            compute_ntk(&s, &x, &arch, NtkForm::Hadamard)
                .unwrap()
                .into_theta()
                .unwrap()
        };
        let zero = at(0.0);
        let tiny = at(1e-6);
        assert!((tiny - &zero).amax() / zero.amax() < 1e-4);
    }
}

#[test]
fn train_nodes_as_test_nodes_recover_labels() {
    let g = Graph::new(6, [(0, 1), (1, 2), (3, 4), (4, 5), (2, 3)]).unwrap();
    let s = build_diffusion(&g);
    let x = Matrix::from_fn(6, 2, |i, j| if (i < 3) == (j == 0) { 1.0 } else { 0.1 });
    let arch = ArchitectureSpec::skip_pc(Activation::Relu, Activation::Relu, 3);
    let theta = compute_ntk(&s, &x, &arch, NtkForm::Hadamard)
        .unwrap()
        .into_theta()
        .unwrap();
    let ids = [0, 2, 4, 5];
    let y = [1.0, 1.0, -1.0, -1.0];
    let part = gcn_ntk::inference::partition_kernel_overlapping(&theta, &ids, &ids).unwrap();
    let pred = predict(&part, &y).unwrap();
    for (score, target) in pred.scores.iter().zip(y) {
        assert!((score - target).abs() < 1e-4, "{score} vs {target}");
    }
}

#[test]
fn deep_skip_alignment_never_drops() {
    let (s, x) = gcn_ntk::verify::empirical_ntk_instance(7);
    for arch in gcn_ntk::verify::alignment_architectures() {
        let mut prev = 0.0;
        for d in [8, 16, 32] {
            let at = |depth: usize| {
                compute_ntk(&s, &x, &arch.with_depth(depth), NtkForm::Hadamard)
                    .unwrap()
                    .into_theta()
                    .unwrap()
            };
            let a = alignment(&at(d), &at(2 * d), 4).unwrap();
            assert!(
                a >= prev - 1e-9,
                "{:?} depth {d}: {a} < {prev}",
                arch.variant
            );
            prev = a;
        }
    }
}
