//! Oracle battery: every closed-form quantity checked against an
//! independent computation (direct evaluation, Monte Carlo sampling, finite
//! differences or a finite-width network).

use std::fmt::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::analysis::{
    alignment, correlation_spread, depth_sweep, kernels_at_depths, SweepOptions,
};
use crate::dataset::{normalize_rows, DatasetPaths};
use crate::ntk::{
    activation_derivative_moment, activation_second_moment, compute_ntk, kappa0, kappa1,
    sigmoid_factor_entry, truncation_bound,
};
use crate::oracle::{empirical_ntk, mc, norm_preservation_check, FiniteWidthNet};
use crate::synthetic::{
    erdos_renyi, random_connected, two_class_dataset, EdgeModel, TwoClassConfig,
};
use crate::{
    build_diffusion, linear_closed_form, load_dataset, Activation, ArchitectureSpec,
    DiffusionOperator, Matrix, NtkForm, OutputHead, Result, Variant,
};

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub id: &'static str,
    pub name: &'static str,
    pub passed: bool,
    /// Set when the check could not run, e.g. missing optional data.
    pub skipped: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BatteryConfig {
    pub seed: u64,
    /// Width of the wide net in the empirical-kernel check.
    pub width: usize,
    pub narrow_width: usize,
    pub samples: usize,
    pub mc_samples: usize,
    pub form: NtkForm,
}

impl BatteryConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            width: 1024,
            narrow_width: 64,
            samples: 200,
            mc_samples: 1_000_000,
            form: NtkForm::Hadamard,
        }
    }

    fn rng(&self, salt: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(salt);
        rng
    }
}

fn timed(
    id: &'static str,
    name: &'static str,
    limit: Option<Duration>,
    body: impl FnOnce() -> Result<(bool, String)>,
) -> CheckOutcome {
    let start = Instant::now();
    let outcome = body();
    let elapsed = start.elapsed();
    let (mut passed, mut detail) = match outcome {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    if let Some(limit) = limit {
        if elapsed > limit {
            passed = false;
            let _ = write!(detail, "; exceeded {:.0} s budget", limit.as_secs_f64());
        }
    }
    CheckOutcome {
        id,
        name,
        passed,
        skipped: false,
        detail,
        seconds: elapsed.as_secs_f64(),
    }
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn relative_frobenius(a: &Matrix, reference: &Matrix) -> f64 {
    (a - reference).norm() / reference.norm().max(f64::MIN_POSITIVE)
}

/// Backward-recurrence kernel with linear σ versus the direct sum over
/// powers of `S`, on 30 random graphs with `n ≤ 50` and `d ≤ 8`.
pub fn check_closed_form(config: &BatteryConfig) -> CheckOutcome {
    timed(
        "AC1",
        "closed-form equivalence (linear)",
        Some(Duration::from_secs(10)),
        || {
            let mut rng = config.rng(1);
            let mut worst = 0.0_f64;
            for trial in 0..30 {
                let n = rng.random_range(2..=50);
                let d = rng.random_range(1..=8);
                let f = rng.random_range(1..=6);
                let p = rng.random_range(0.05..0.3);
                let g = erdos_renyi(n, p, &mut rng);
                let s = build_diffusion(&g);
                let x = gaussian_matrix(n, f, &mut rng);
                let c = rng.random_range(0.5..1.5);
                let head = if trial % 2 == 0 {
                    OutputHead::Identity
                } else {
                    OutputHead::Sigmoid
                };
                let arch = ArchitectureSpec::vanilla(Activation::Linear, d)
                    .with_c_sigma(c)
                    .with_output_head(head);
                let engine = compute_ntk(&s, &x, &arch, NtkForm::Hadamard)?.into_theta()?;
                let direct = linear_closed_form(&s, &x, d, c, head)?;
                let scale = crate::linalg::max_abs(&direct).max(f64::MIN_POSITIVE);
                worst = worst.max((engine - &direct).amax() / scale);
            }
            Ok((
                worst <= 1e-10,
                format!("max relative deviation {worst:.3e} (tol 1e-10)"),
            ))
        },
    )
}

/// Exact arc-cosine values plus Monte Carlo agreement of the ReLU moment
/// maps at 20 random correlations.
pub fn check_arc_cosine(config: &BatteryConfig) -> CheckOutcome {
    timed(
        "AC2",
        "arc-cosine maps",
        Some(Duration::from_secs(60)),
        || {
            let pi = std::f64::consts::PI;
            let exact = [
                (kappa0(0.0), 0.5),
                (kappa0(1.0), 1.0),
                (kappa0(-1.0), 0.0),
                (kappa1(0.0), 1.0 / pi),
                (kappa1(1.0), 1.0),
            ];
            let exact_err = exact.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let mut rng = config.rng(2);
            let mut worst_z = 0.0_f64;
            let c = 2.0;
            for _ in 0..20 {
                let a: f64 = rng.random_range(0.5..2.0);
                let b: f64 = rng.random_range(0.5..2.0);
                let rho: f64 = rng.random_range(-1.0..1.0);
                let cov = rho * (a * b).sqrt();
                let sigma = Matrix::from_row_slice(2, 2, &[a, cov, cov, b]);
                let e = activation_second_moment(&sigma, Activation::Relu, c)?;
                let ed = activation_derivative_moment(&sigma, Activation::Relu, c)?;
                let mc_e =
                    mc::second_moment(Activation::Relu, a, b, cov, c, config.mc_samples, &mut rng);
                let mc_ed = mc::derivative_moment(
                    Activation::Relu,
                    a,
                    b,
                    cov,
                    c,
                    config.mc_samples,
                    &mut rng,
                );
                worst_z = worst_z
                    .max((mc_e.mean - e[(0, 1)]).abs() / mc_e.std_err)
                    .max((mc_ed.mean - ed[(0, 1)]).abs() / mc_ed.std_err);
            }
            Ok((
            exact_err <= 1e-12 && worst_z <= 3.0,
            format!("exact error {exact_err:.1e}; worst MC deviation {worst_z:.2} std errors (tol 3)"),
        ))
        },
    )
}

/// Truncated output-factor series against Monte Carlo for 20 random
/// `2 × 2` covariances with diagonal at most 0.25.
pub fn check_sigmoid_factor(config: &BatteryConfig) -> CheckOutcome {
    timed(
        "AC3",
        "sigmoid output factor",
        Some(Duration::from_secs(60)),
        || {
            let mut rng = config.rng(3);
            let mut worst = f64::NEG_INFINITY;
            let mut worst_case = String::new();
            for _ in 0..20 {
                let a: f64 = rng.random_range(0.0..0.25);
                let b: f64 = rng.random_range(0.0..0.25);
                let rho: f64 = rng.random_range(-1.0..1.0);
                let cov = rho * (a * b).sqrt();
                let formula = sigmoid_factor_entry(a, b, cov);
                let est = mc::sigmoid_factor(a, b, cov, config.mc_samples, &mut rng);
                let allowed = truncation_bound(a, b) + 3.0 * est.std_err;
                let excess = (est.mean - formula).abs() - allowed;
                if excess > worst {
                    worst = excess;
                    worst_case = format!(
                        "a={a:.4} b={b:.4} rho={rho:.3}: |mc-formula|={:.3e} allowed {allowed:.3e}",
                        (est.mean - formula).abs()
                    );
                }
            }
            Ok((worst <= 0.0, format!("tightest case {worst_case}")))
        },
    )
}

/// Architectures probed by the empirical-kernel check: every variant with
/// linear and ReLU σ, at depth 2 with the identity head.
pub fn empirical_ntk_architectures() -> Vec<ArchitectureSpec> {
    let mut out = Vec::new();
    for activation in [Activation::Linear, Activation::Relu] {
        out.push(ArchitectureSpec::vanilla(activation, 2));
        out.push(ArchitectureSpec::skip_pc(activation, Activation::Linear, 2));
        out.push(ArchitectureSpec::skip_alpha(
            activation,
            Activation::Linear,
            0.3,
            2,
        ));
    }
    out.into_iter()
        .map(|a| a.with_output_head(OutputHead::Identity))
        .collect()
}

/// The 20-node random graph and unit-norm features used by the
/// empirical-kernel check.
pub fn empirical_ntk_instance(seed: u64) -> (DiffusionOperator, Matrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(4);
    let g = random_connected(20, 0.15, &mut rng);
    let mut x = gaussian_matrix(20, 5, &mut rng);
    normalize_rows(&mut x);
    (build_diffusion(&g), x)
}

/// Relative Frobenius errors of one architecture's empirical kernel at the
/// wide and the narrow width, against both kernel forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalErrors {
    pub arch: ArchitectureSpec,
    pub hadamard: (f64, f64),
    pub recursive: (f64, f64),
}

impl EmpiricalErrors {
    pub fn get(&self, form: NtkForm) -> (f64, f64) {
        match form {
            NtkForm::Hadamard => self.hadamard,
            NtkForm::Recursive => self.recursive,
        }
    }
}

pub fn empirical_ntk_errors(config: &BatteryConfig) -> Result<Vec<EmpiricalErrors>> {
    let (s, x) = empirical_ntk_instance(config.seed);
    empirical_ntk_architectures()
        .into_iter()
        .map(|arch| {
            let wide = empirical_ntk(&arch, &s, &x, config.width, config.samples, config.seed)?;
            let narrow = empirical_ntk(
                &arch,
                &s,
                &x,
                config.narrow_width,
                config.samples,
                config.seed,
            )?;
            let errors = |form| -> Result<(f64, f64)> {
                let analytic = compute_ntk(&s, &x, &arch, form)?.into_theta()?;
                Ok((
                    relative_frobenius(&wide, &analytic),
                    relative_frobenius(&narrow, &analytic),
                ))
            };
            Ok(EmpiricalErrors {
                arch,
                hadamard: errors(NtkForm::Hadamard)?,
                recursive: errors(NtkForm::Recursive)?,
            })
        })
        .collect()
}

fn arch_label(arch: &ArchitectureSpec) -> String {
    format!("{}/{}", arch.variant.name(), arch.activation.name())
}

/// Judged against `config.form`; the other form's errors are reported in the
/// detail for comparison.
pub fn check_empirical_ntk(config: &BatteryConfig) -> CheckOutcome {
    timed(
        "AC4",
        "empirical NTK convergence",
        Some(Duration::from_secs(600)),
        || {
            let errors = empirical_ntk_errors(config)?;
            let other = match config.form {
                NtkForm::Hadamard => NtkForm::Recursive,
                NtkForm::Recursive => NtkForm::Hadamard,
            };
            let mut passed = true;
            let mut detail = format!(
                "{} kernel (h={}, h={}); ",
                config.form.name(),
                config.width,
                config.narrow_width
            );
            let mut reference = format!("{} kernel for comparison: ", other.name());
            for e in &errors {
                let (wide, narrow) = e.get(config.form);
                let ok = wide <= 0.15 && wide < narrow;
                passed &= ok;
                let _ = write!(
                    detail,
                    "{} {wide:.3}/{narrow:.3}{}; ",
                    arch_label(&e.arch),
                    if ok { "" } else { " FAIL" }
                );
                let (w, n) = e.get(other);
                let _ = write!(reference, "{} {w:.3}/{n:.3}; ", arch_label(&e.arch));
            }
            detail.push_str(reference.trim_end_matches("; "));
            Ok((passed, detail))
        },
    )
}

fn finite_difference_error(net: &FiniteWidthNet, s: &DiffusionOperator, x: &Matrix) -> Result<f64> {
    const STEP: f64 = 1e-4;
    let trace = net.forward(s, x)?;
    let grads = net.grad(s, x, &trace)?;
    let n = s.n();
    let mut worst = 0.0_f64;
    for layer in 0..net.weights().len() {
        let shape = net.weights()[layer].shape();
        let mut numeric = vec![Matrix::zeros(shape.0, shape.1); n];
        for idx in 0..net.weights()[layer].len() {
            let mut plus = net.clone();
            plus.weights_mut()[layer].as_mut_slice()[idx] += STEP;
            let mut minus = net.clone();
            minus.weights_mut()[layer].as_mut_slice()[idx] -= STEP;
            let up = plus.forward(s, x)?.output;
            let down = minus.forward(s, x)?.output;
            for (p, m) in numeric.iter_mut().enumerate() {
                m.as_mut_slice()[idx] = (up[p] - down[p]) / (2.0 * STEP);
            }
        }
        for (p, fd) in numeric.iter().enumerate() {
            let analytic = &grads.per_node[p][layer];
            let scale = analytic.amax().max(fd.amax());
            if scale > 0.0 {
                worst = worst.max((analytic - fd).amax() / scale);
            }
        }
    }
    Ok(worst)
}

/// Analytic gradients against central differences on 10 random small nets.
pub fn check_gradients(config: &BatteryConfig) -> CheckOutcome {
    timed(
        "AC5",
        "gradient correctness",
        Some(Duration::from_secs(60)),
        || {
            let mut rng = config.rng(5);
            let variants = [Variant::Vanilla, Variant::SkipPc, Variant::SkipAlpha];
            let activations = [Activation::Linear, Activation::Relu];
            let mut worst = 0.0_f64;
            for i in 0..10 {
                let arch = ArchitectureSpec {
                    variant: variants[i % 3],
                    activation: activations[(i / 3) % 2],
                    skip_activation: activations[i % 2],
                    depth: rng.random_range(1..=3),
                    c_sigma: rng.random_range(0.5..2.0),
                    alpha: rng.random_range(0.1..0.9),
                    output_head: if i % 2 == 0 {
                        OutputHead::Sigmoid
                    } else {
                        OutputHead::Identity
                    },
                };
                let g = random_connected(5, 0.3, &mut rng);
                let s = build_diffusion(&g);
                let x = gaussian_matrix(5, 3, &mut rng);
                let net = FiniteWidthNet::sample(arch, 3, 8, rng.random())?;
                worst = worst.max(finite_difference_error(&net, &s, &x)?);
            }
            Ok((
                worst <= 1e-5,
                format!("max relative deviation {worst:.3e} (tol 1e-5)"),
            ))
        },
    )
}

/// Per-layer squared-norm ratios at initialization with `S = I`.
pub fn check_norm_preservation(config: &BatteryConfig) -> CheckOutcome {
    timed(
        "AC6",
        "c_sigma norm preservation",
        Some(Duration::from_secs(300)),
        || {
            let seed = config.seed;
            let relu2 = ArchitectureSpec::vanilla(Activation::Relu, 16);
            let good = norm_preservation_check(&relu2, 16, 256, 100, seed)?;
            let bad = norm_preservation_check(&relu2.with_c_sigma(1.0), 16, 256, 100, seed)?;
            let skip = ArchitectureSpec::skip_pc(Activation::Relu, Activation::Linear, 16);
            let skip_ratios = norm_preservation_check(&skip, 16, 256, 100, seed)?;
            let in_band = |v: &[f64], lo: f64, hi: f64| v.iter().all(|r| (lo..=hi).contains(r));
            let good_ok = in_band(&good, 0.8, 1.2);
            let bad_ok = *bad.last().expect("depth 16") < 0.01;
            let skip_ok = in_band(&skip_ratios, 0.7, 1.3);
            let fmt = |v: &[f64]| {
                v.iter()
                    .map(|r| format!("{r:.3}"))
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            Ok((
                good_ok && bad_ok && skip_ok,
                format!(
                    "vanilla c=2 [{}] {}; vanilla c=1 final {:.2e} {}; skip-pc c=2/3 [{}] {}",
                    fmt(&good),
                    if good_ok { "ok" } else { "FAIL" },
                    bad.last().expect("depth 16"),
                    if bad_ok { "ok" } else { "FAIL" },
                    fmt(&skip_ratios),
                    if skip_ok { "ok" } else { "FAIL" },
                ),
            ))
        },
    )
}

/// The 100-node two-block dataset with unit-norm features.
pub fn two_block_instance(seed: u64) -> Result<(DiffusionOperator, crate::NodeDataset)> {
    let (g, data) = two_class_dataset(&TwoClassConfig::two_block(100), seed)?;
    Ok((build_diffusion(&g), data.normalized()))
}

pub fn check_over_smoothing(config: &BatteryConfig) -> CheckOutcome {
    timed("AC7", "over-smoothing trend", None, || {
        let (s, data) = two_block_instance(config.seed)?;
        let arch = ArchitectureSpec::vanilla(Activation::Relu, 1);
        let depths = [1, 2, 4, 8, 16, 32, 64];
        let options = SweepOptions {
            form: config.form,
            ..SweepOptions::default()
        };
        let sweep = depth_sweep(&s, &data, &arch, &depths, options)?;
        let acc = |d: usize| {
            sweep
                .rows
                .iter()
                .find(|r| r.depth == d)
                .and_then(|r| r.accuracy)
                .unwrap_or(f64::NAN)
        };
        let best_shallow = [1, 2, 4].iter().map(|&d| acc(d)).fold(f64::NAN, f64::max);
        let deep = acc(64);
        let stack = crate::covariance_forward(&s, data.features(), &arch.with_depth(64))?;
        let spreads: Vec<f64> = [2, 4, 8, 16, 32, 64]
            .iter()
            .map(|&d| correlation_spread(&stack.sigma[d - 1]))
            .collect();
        let monotone = spreads.windows(2).all(|w| w[1] < w[0]);
        let acc_ok = deep <= best_shallow;
        Ok((
            acc_ok && monotone,
            format!(
                "accuracy d=64 {deep:.3} vs best shallow {best_shallow:.3}; spreads d=2..64 [{}]",
                spreads
                    .iter()
                    .map(|v| format!("{v:.2e}"))
                    .collect::<Vec<_>>()
                    .join(" ")
            ),
        ))
    })
}

/// Skip architectures probed by the depth-alignment check.
pub fn alignment_architectures() -> [ArchitectureSpec; 2] {
    [
        ArchitectureSpec::skip_pc(Activation::Relu, Activation::Relu, 1),
        ArchitectureSpec::skip_alpha(Activation::Relu, Activation::Relu, 0.3, 1),
    ]
}

pub fn check_depth_alignment(config: &BatteryConfig) -> CheckOutcome {
    timed("AC8", "kernel convergence with depth", None, || {
        let (s, data) = two_block_instance(config.seed)?;
        let mut passed = true;
        let mut detail = String::new();
        for arch in alignment_architectures() {
            let kernels =
                kernels_at_depths(&s, data.features(), &arch, &[1, 64, 128], config.form)?;
            let thetas: Vec<Matrix> = kernels
                .into_iter()
                .map(|k| k?.into_theta())
                .collect::<Result<_>>()?;
            let late = alignment(&thetas[1], &thetas[2], 8)?;
            let early = alignment(&thetas[0], &thetas[2], 8)?;
            let ok = late >= 0.95 && late >= early;
            passed &= ok;
            let _ = write!(
                detail,
                "{}: a(64,128)={late:.4} a(1,128)={early:.4}{}; ",
                arch.variant.name(),
                if ok { "" } else { " FAIL" }
            );
        }
        Ok((passed, detail.trim_end_matches("; ").to_string()))
    })
}

/// The two constructed datasets of the structure/feature probe: informative
/// features on label-independent edges, and informative blocks with pure
/// noise features.
pub fn structure_feature_instances(
    seed: u64,
) -> Result<[(DiffusionOperator, crate::NodeDataset); 2]> {
    let mut feature_config = TwoClassConfig::two_block(100);
    feature_config.edges = EdgeModel::Uniform { p: 0.085 };
    feature_config.feature_signal = 1.5;
    let mut structure_config = TwoClassConfig::two_block(100);
    structure_config.feature_signal = 0.0;
    let build = |config: &TwoClassConfig| -> Result<_> {
        let (g, data) = two_class_dataset(config, seed)?;
        Ok((build_diffusion(&g), data.normalized()))
    };
    Ok([build(&feature_config)?, build(&structure_config)?])
}

pub fn check_structure_feature(config: &BatteryConfig) -> CheckOutcome {
    timed("AC9", "skip-alpha structure/feature probe", None, || {
        let [features, structure] = structure_feature_instances(config.seed)?;
        let accuracy_at = |(s, data): &(DiffusionOperator, crate::NodeDataset),
                           alpha: f64|
         -> Result<f64> {
            let arch = ArchitectureSpec::skip_alpha(Activation::Relu, Activation::Relu, alpha, 4);
            let options = SweepOptions {
                form: config.form,
                ..SweepOptions::default()
            };
            let sweep = depth_sweep(s, data, &arch, &[4], options)?;
            Ok(sweep.rows[0].accuracy.unwrap_or(f64::NAN))
        };
        let f_hi = accuracy_at(&features, 0.5)?;
        let f_lo = accuracy_at(&features, 0.1)?;
        let s_hi = accuracy_at(&structure, 0.5)?;
        let s_lo = accuracy_at(&structure, 0.1)?;
        let ok = f_hi >= f_lo && s_lo >= s_hi;
        Ok((
            ok,
            format!(
                "informative features: acc(0.5)={f_hi:.3} acc(0.1)={f_lo:.3}; \
                 informative structure: acc(0.5)={s_hi:.3} acc(0.1)={s_lo:.3}"
            ),
        ))
    })
}

/// Environment variable naming a directory with a Cora dataset in the
/// standard file layout.
pub const CORA_ENV: &str = "GCN_NTK_CORA_DIR";

pub fn check_cora(config: &BatteryConfig, dir: Option<&Path>) -> CheckOutcome {
    let Some(dir) = dir else {
        return CheckOutcome {
            id: "AC10",
            name: "Cora accuracy floor",
            passed: true,
            skipped: true,
            detail: format!("skipped: set {CORA_ENV} to a dataset directory"),
            seconds: 0.0,
        };
    };
    timed("AC10", "Cora accuracy floor", None, || {
        let (g, data) = load_dataset(&DatasetPaths::in_dir(dir), true)?;
        let sizes = data.class_sizes();
        let s = build_diffusion(&g);
        let arch = ArchitectureSpec::vanilla(Activation::Relu, 1);
        let options = SweepOptions {
            form: config.form,
            ..SweepOptions::default()
        };
        let sweep = depth_sweep(&s, &data, &arch, &[1, 2], options)?;
        let accs: Vec<f64> = sweep
            .rows
            .iter()
            .map(|r| r.accuracy.unwrap_or(f64::NAN))
            .collect();
        let ok = accs.iter().all(|&a| a >= 0.80);
        Ok((
            ok,
            format!(
                "classes {}/{}; split {}/{}; accuracy d=1 {:.3} d=2 {:.3}",
                sizes.0,
                sizes.1,
                data.train_ids().len(),
                data.test_ids().len(),
                accs[0],
                accs[1]
            ),
        ))
    })
}

/// Runs every check in order.
pub fn run_battery(config: &BatteryConfig, cora_dir: Option<&Path>) -> Vec<CheckOutcome> {
    vec![
        check_closed_form(config),
        check_arc_cosine(config),
        check_sigmoid_factor(config),
        check_empirical_ntk(config),
        check_gradients(config),
        check_norm_preservation(config),
        check_over_smoothing(config),
        check_depth_alignment(config),
        check_structure_feature(config),
        check_cora(config, cora_dir),
    ]
}

/// One `PASS`/`FAIL`/`SKIP` line per check.
pub fn format_line(outcome: &CheckOutcome) -> String {
    let status = if outcome.skipped {
        "SKIP"
    } else if outcome.passed {
        "PASS"
    } else {
        "FAIL"
    };
    format!(
        "{status} {:<5} {:<38} {:>8.2}s  {}",
        outcome.id, outcome.name, outcome.seconds, outcome.detail
    )
}

pub fn format_table(outcomes: &[CheckOutcome]) -> String {
    let mut out = String::new();
    for o in outcomes {
        out.push_str(&format_line(o));
        out.push('\n');
    }
    let passed = outcomes.iter().filter(|o| o.passed).count();
    let _ = writeln!(out, "{passed}/{} checks passed", outcomes.len());
    out
}
