use gcn_ntk::ntk::compute_ntk;
use gcn_ntk::oracle::empirical_ntk;
use gcn_ntk::verify::empirical_ntk_instance;
use gcn_ntk::{Activation, ArchitectureSpec, Matrix, NtkForm, OutputHead};

const DRAWS: usize = 50;

fn rel(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).norm() / b.norm()
}

fn error_at(arch: &ArchitectureSpec, width: usize) -> f64 {
    let (s, x) = empirical_ntk_instance(11);
    let analytic = compute_ntk(&s, &x, arch, NtkForm::Recursive)
        .unwrap()
        .into_theta()
        .unwrap();
    let empirical = empirical_ntk(arch, &s, &x, width, DRAWS, 99).unwrap();
    rel(&empirical, &analytic)
}

#[test]
fn recursive_kernel_is_the_wide_limit() {
    let archs = [
        ArchitectureSpec::vanilla(Activation::Relu, 2).with_output_head(OutputHead::Identity),
        ArchitectureSpec::skip_alpha(Activation::Relu, Activation::Linear, 0.3, 2)
            .with_output_head(OutputHead::Identity),
    ];
    for arch in archs {
        let wide = error_at(&arch, 1024);
        let narrow = error_at(&arch, 64);
        assert!(wide <= 0.15, "{:?}: {wide}", arch.variant);
        assert!(wide < narrow, "{:?}: {wide} vs {narrow}", arch.variant);
    }
}

#[test]
fn sigmoid_head_matches_wide_net() {
    let arch = ArchitectureSpec::skip_pc(Activation::Relu, Activation::Linear, 2);
    assert!(error_at(&arch, 1024) <= 0.15);
}

#[test]
fn empirical_kernel_is_reproducible() {
    let (s, x) = empirical_ntk_instance(3);
    let arch = ArchitectureSpec::vanilla(Activation::Relu, 2);
    let a = empirical_ntk(&arch, &s, &x, 32, 4, 5).unwrap();
    let b = empirical_ntk(&arch, &s, &x, 32, 4, 5).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, empirical_ntk(&arch, &s, &x, 32, 4, 6).unwrap());
}
