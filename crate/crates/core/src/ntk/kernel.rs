use serde::Serialize;

use super::{
    activation_derivative_moment, activation_second_moment, output_factor, truncation_bound,
    SIGMOID_EXPANSION_LIMIT,
};
use crate::linalg::{congruence, ensure_square, is_psd, is_psd_with_slack, symmetrize, PSD_TOL};
use crate::{ArchitectureSpec, DiffusionOperator, Error, Matrix, OutputHead, Result, Variant};

/// How the per-layer terms are combined into the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NtkForm {
    /// `Σ_i Σ_i ⊙ (SSᵀ)^{⊙(d+1-i)} ⊙ Ė_i ⊙ … ⊙ Ė_d`, accumulated in Horner form.
    #[default]
    Hadamard,
    /// Layerwise gradient-Gram recursion
    /// `K_1 = Σ_1`, `K_{i+1} = c² S (K_i ⊙ Ė_i) Sᵀ + Σ_{i+1}` with `c = 1 - α`
    /// for Skip-α and 1 otherwise. This is the kernel a finite network's
    /// empirical NTK converges to.
    Recursive,
}

impl NtkForm {
    pub fn name(self) -> &'static str {
        match self {
            NtkForm::Hadamard => "hadamard",
            NtkForm::Recursive => "recursive",
        }
    }
}

impl std::str::FromStr for NtkForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hadamard" => Ok(NtkForm::Hadamard),
            "recursive" => Ok(NtkForm::Recursive),
            other => Err(Error::InvalidArgument(format!(
                "unknown NTK form `{other}`"
            ))),
        }
    }
}

/// Per-layer node covariances and the assembled kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelStack {
    /// `Σ_1 … Σ_{d+1}`, covariance of the pre-activations `f_i`.
    pub sigma: Vec<Matrix>,
    /// `E_1 … E_d`.
    pub e: Vec<Matrix>,
    /// `Ė_1 … Ė_d`.
    pub e_dot: Vec<Matrix>,
    /// Second moment of the activated transformed input (skip variants).
    pub e0_tilde: Option<Matrix>,
    pub theta: Option<Matrix>,
    pub output_factor: Option<Matrix>,
    /// Spectral error the truncated output factor can introduce into `theta`,
    /// allowed as negative eigenvalue mass by the invariant check.
    pub theta_slack: f64,
}

impl KernelStack {
    pub fn depth(&self) -> usize {
        self.sigma.len().saturating_sub(1)
    }

    pub fn n(&self) -> usize {
        self.sigma.first().map_or(0, |m| m.nrows())
    }

    pub fn theta(&self) -> Result<&Matrix> {
        self.theta
            .as_ref()
            .ok_or(Error::MissingState("kernel not assembled"))
    }

    pub fn into_theta(self) -> Result<Matrix> {
        self.theta
            .ok_or(Error::MissingState("kernel not assembled"))
    }

    /// Forward state of the depth-`depth` network, which is a prefix of the
    /// state of any deeper network with the same architecture.
    pub fn truncated(&self, depth: usize) -> Result<KernelStack> {
        if depth == 0 || depth > self.depth() {
            return Err(Error::InvalidArgument(format!(
                "cannot truncate a depth-{} stack to depth {depth}",
                self.depth()
            )));
        }
        Ok(KernelStack {
            sigma: self.sigma[..=depth].to_vec(),
            e: self.e[..depth].to_vec(),
            e_dot: self.e_dot[..depth].to_vec(),
            e0_tilde: self.e0_tilde.clone(),
            theta: None,
            output_factor: None,
            theta_slack: 0.0,
        })
    }

    /// Checks symmetry and positive semidefiniteness of every stored matrix.
    pub fn check_invariants(&self) -> InvariantReport {
        let mut report = InvariantReport::default();
        let mut visit = |name: String, m: &Matrix, psd: bool, slack: f64| {
            report.checked += 1;
            let asym = crate::linalg::asymmetry(m);
            report.max_asymmetry = report.max_asymmetry.max(asym);
            if asym > crate::linalg::SYMMETRY_TOL || (psd && !is_psd_with_slack(m, PSD_TOL, slack))
            {
                report.violations.push(name);
            }
        };
        for (i, m) in self.sigma.iter().enumerate() {
            visit(format!("sigma[{}]", i + 1), m, true, 0.0);
        }
        for (i, m) in self.e.iter().enumerate() {
            visit(format!("e[{}]", i + 1), m, true, 0.0);
        }
        for (i, m) in self.e_dot.iter().enumerate() {
            visit(format!("e_dot[{}]", i + 1), m, false, 0.0);
        }
        if let Some(theta) = &self.theta {
            visit("theta".into(), theta, true, self.theta_slack);
        }
        report
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct InvariantReport {
    pub checked: usize,
    pub max_asymmetry: f64,
    pub violations: Vec<String>,
}

impl InvariantReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

fn ensure_psd(m: &Matrix, what: &str, layer: usize) -> Result<()> {
    if is_psd(m, PSD_TOL) {
        Ok(())
    } else {
        Err(Error::NotPsd {
            what: what.to_string(),
            layer: Some(layer),
        })
    }
}

/// Runs the covariance recursion for `arch` on features `x`.
pub fn covariance_forward(
    s: &DiffusionOperator,
    x: &Matrix,
    arch: &ArchitectureSpec,
) -> Result<KernelStack> {
    arch.validate()?;
    let n = s.n();
    if x.nrows() != n {
        return Err(Error::dims("feature rows", n, x.nrows()));
    }
    let s = s.s();
    let mut gram = x * x.transpose();
    symmetrize(&mut gram);
    let c = arch.c_sigma;

    let (sigma1, e0_tilde) = match arch.variant {
        Variant::Vanilla => (congruence(s, &gram), None),
        Variant::SkipPc => {
            let e0 = activation_second_moment(&gram, arch.skip_activation, c)?;
            (congruence(s, &e0), Some(e0))
        }
        Variant::SkipAlpha => {
            let e0 = activation_second_moment(&gram, arch.skip_activation, c)?;
            let a = arch.alpha;
            let se = s * &e0;
            let mut sigma1 = congruence(s, &e0) * (1.0 - a).powi(2)
                + (&se + se.transpose()) * (a * (1.0 - a))
                + &e0 * (a * a);
            symmetrize(&mut sigma1);
            (sigma1, Some(e0))
        }
    };
    ensure_psd(&sigma1, "sigma", 1)?;

    let depth = arch.depth;
    let mut sigma = Vec::with_capacity(depth + 1);
    let mut e = Vec::with_capacity(depth);
    let mut e_dot = Vec::with_capacity(depth);
    sigma.push(sigma1);
    for layer in 1..=depth {
        let current = &sigma[layer - 1];
        let e_i = activation_second_moment(current, arch.activation, c)?;
        ensure_psd(&e_i, "e", layer)?;
        e_dot.push(activation_derivative_moment(current, arch.activation, c)?);
        let next = match arch.variant {
            Variant::Vanilla => congruence(s, &e_i),
            Variant::SkipPc => congruence(s, &e_i) + &sigma[0],
            Variant::SkipAlpha => {
                let a = arch.alpha;
                let e0 = e0_tilde.as_ref().expect("skip variants carry e0");
                congruence(s, &e_i) * (1.0 - a).powi(2) + e0 * (a * a)
            }
        };
        ensure_psd(&next, "sigma", layer + 1)?;
        e.push(e_i);
        sigma.push(next);
    }
    Ok(KernelStack {
        sigma,
        e,
        e_dot,
        e0_tilde,
        theta: None,
        output_factor: None,
        theta_slack: 0.0,
    })
}

fn check_stack(stack: &KernelStack, s: &DiffusionOperator, arch: &ArchitectureSpec) -> Result<()> {
    if stack.sigma.is_empty() {
        return Err(Error::MissingState("covariance_forward has not run"));
    }
    if stack.depth() != arch.depth || stack.e_dot.len() != arch.depth {
        return Err(Error::dims("kernel stack depth", arch.depth, stack.depth()));
    }
    if stack.n() != s.n() {
        return Err(Error::dims("kernel stack nodes", s.n(), stack.n()));
    }
    Ok(())
}

/// Folds the forward state into the kernel using the default
/// [`NtkForm::Hadamard`] combination.
pub fn assemble_ntk(
    stack: KernelStack,
    s: &DiffusionOperator,
    arch: &ArchitectureSpec,
) -> Result<KernelStack> {
    assemble_ntk_with(stack, s, arch, NtkForm::Hadamard)
}

pub fn assemble_ntk_with(
    mut stack: KernelStack,
    s: &DiffusionOperator,
    arch: &ArchitectureSpec,
    form: NtkForm,
) -> Result<KernelStack> {
    check_stack(&stack, s, arch)?;
    let d = arch.depth;
    let mut k = match form {
        NtkForm::Hadamard => {
            // Horner scheme for the sum: Σ_1 collects d factors, Σ_{d+1} none.
            let mut k = stack.sigma[0].clone();
            for i in 0..d {
                k = k.component_mul(s.sst()).component_mul(&stack.e_dot[i]) + &stack.sigma[i + 1];
            }
            k
        }
        NtkForm::Recursive => {
            let coef2 = arch.hidden_coefficient().powi(2);
            let mut k = stack.sigma[0].clone();
            for i in 0..d {
                let gated = k.component_mul(&stack.e_dot[i]);
                k = congruence(s.s(), &gated) * coef2 + &stack.sigma[i + 1];
            }
            k
        }
    };
    let factor = output_factor(&stack.sigma[d], arch.output_head)?;
    stack.theta_slack = match arch.output_head {
        OutputHead::Sigmoid => {
            let widest = stack.sigma[d].diagonal().max();
            if widest <= SIGMOID_EXPANSION_LIMIT {
                k.nrows() as f64 * k.amax() * truncation_bound(widest, widest)
            } else {
                0.0
            }
        }
        OutputHead::Identity => 0.0,
    };
    k.component_mul_assign(&factor);
    symmetrize(&mut k);
    stack.theta = Some(k);
    stack.output_factor = Some(factor);
    Ok(stack)
}

/// Forward recursion followed by assembly.
pub fn compute_ntk(
    s: &DiffusionOperator,
    x: &Matrix,
    arch: &ArchitectureSpec,
    form: NtkForm,
) -> Result<KernelStack> {
    let stack = covariance_forward(s, x, arch)?;
    assemble_ntk_with(stack, s, arch, form)
}

/// Linear-activation vanilla kernel evaluated directly:
/// `c^d [Σ_{i=1}^{d+1} (Sⁱ X Xᵀ (Sᵀ)ⁱ) ⊙ (SSᵀ)^{⊙(d+1-i)}] ⊙ output factor`.
pub fn linear_closed_form(
    s: &DiffusionOperator,
    x: &Matrix,
    depth: usize,
    c_sigma: f64,
    head: OutputHead,
) -> Result<Matrix> {
    let s = s.s();
    ensure_square(s, "diffusion operator")?;
    if x.nrows() != s.nrows() {
        return Err(Error::dims("feature rows", s.nrows(), x.nrows()));
    }
    if depth == 0 {
        return Err(Error::InvalidArchitecture(
            "depth must be at least 1".into(),
        ));
    }
    let n = s.nrows();
    let sst = s * s.transpose();
    let mut propagated = x.clone();
    let mut sum = Matrix::zeros(n, n);
    let mut last = Matrix::zeros(n, n);
    for i in 1..=depth + 1 {
        propagated = s * &propagated;
        let mut term = &propagated * propagated.transpose();
        if i == depth + 1 {
            last = term.clone();
        }
        for _ in 0..(depth + 1 - i) {
            term.component_mul_assign(&sst);
        }
        sum += term;
    }
    let scale = c_sigma.powi(depth as i32);
    let mut sigma_last = last * scale;
    symmetrize(&mut sigma_last);
    let factor = output_factor(&sigma_last, head)?;
    let mut theta = (sum * scale).component_mul(&factor);
    symmetrize(&mut theta);
    Ok(theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{build_diffusion, Activation, Graph};

    fn single() -> (DiffusionOperator, Matrix) {
        (
            DiffusionOperator::identity(1),
            Matrix::from_element(1, 1, 1.0),
        )
    }

    #[test]
    fn scalar_vanilla_linear() {
        let (s, x) = single();
        let arch = ArchitectureSpec::vanilla(Activation::Linear, 1);
        let stack = covariance_forward(&s, &x, &arch).unwrap();
        assert_eq!(stack.sigma.len(), 2);
        assert_eq!(stack.sigma[0][(0, 0)], 1.0);
        assert_eq!(stack.sigma[1][(0, 0)], 1.0);
        assert!(stack.theta.is_none());

        let sig = assemble_ntk(stack.clone(), &s, &arch).unwrap();
        assert!((sig.theta().unwrap()[(0, 0)] - 0.46875).abs() < 1e-15);
        assert!((sig.output_factor.as_ref().unwrap()[(0, 0)] - 0.234375).abs() < 1e-15);

        let id = arch.with_output_head(OutputHead::Identity);
        let theta = assemble_ntk(stack, &s, &id).unwrap();
        assert_eq!(theta.theta().unwrap()[(0, 0)], 2.0);
        let closed = linear_closed_form(&s, &x, 1, 1.0, OutputHead::Identity).unwrap();
        assert_eq!(closed[(0, 0)], 2.0);
    }

    #[test]
    fn skip_alpha_single_node() {
        let (s, x) = single();
        let arch = ArchitectureSpec::skip_alpha(Activation::Linear, Activation::Linear, 0.5, 1)
            .with_c_sigma(1.0);
        let stack = covariance_forward(&s, &x, &arch).unwrap();
        assert_eq!(stack.e0_tilde.as_ref().unwrap()[(0, 0)], 1.0);
        assert!((stack.sigma[0][(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_features_give_zero_kernel() {
        let g = Graph::new(3, [(0, 1), (1, 2)]).unwrap();
        let s = build_diffusion(&g);
        let x = Matrix::zeros(3, 2);
        for variant in [Variant::Vanilla, Variant::SkipPc, Variant::SkipAlpha] {
            let arch = ArchitectureSpec {
                variant,
                alpha: 0.3,
                ..ArchitectureSpec::vanilla(Activation::Linear, 3)
            }
            .with_output_head(OutputHead::Identity);
            let stack = compute_ntk(&s, &x, &arch, NtkForm::Hadamard).unwrap();
            assert!(stack.sigma.iter().all(|m| m.iter().all(|&v| v == 0.0)));
            assert!(stack.theta().unwrap().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn two_node_complete_graph() {
        // S = J/2 is idempotent, so every Σ_i equals J/2 and SSᵀ = J/2:
        // Θ = Σ_1 ⊙ SSᵀ + Σ_2 = J/4 + J/2.
        let s = build_diffusion(&Graph::new(2, [(0, 1)]).unwrap());
        let x = Matrix::identity(2, 2);
        let closed = linear_closed_form(&s, &x, 1, 1.0, OutputHead::Identity).unwrap();
        for v in closed.iter() {
            assert!((v - 0.75).abs() < 1e-15);
        }
        let arch =
            ArchitectureSpec::vanilla(Activation::Linear, 1).with_output_head(OutputHead::Identity);
        let theta = compute_ntk(&s, &x, &arch, NtkForm::Hadamard).unwrap();
        assert!((theta.theta().unwrap() - &closed).amax() < 1e-15);
    }

    #[test]
    fn derivative_moments_respect_bounds() {
        let g = Graph::new(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
        let s = build_diffusion(&g);
        let x = Matrix::from_row_slice(4, 2, &[1.0, 0.0, 0.5, 0.5, 0.0, 1.0, -1.0, 0.2]);
        let relu = ArchitectureSpec::vanilla(Activation::Relu, 4);
        let stack = covariance_forward(&s, &x, &relu).unwrap();
        for ed in &stack.e_dot {
            assert!(ed.iter().all(|&v| (0.0..=relu.c_sigma).contains(&v)));
        }
        let lin = ArchitectureSpec::vanilla(Activation::Linear, 4).with_c_sigma(1.5);
        let stack = covariance_forward(&s, &x, &lin).unwrap();
        for ed in &stack.e_dot {
            assert!(ed.iter().all(|&v| v == 1.5));
        }
        for m in &stack.sigma {
            assert!((0..4).all(|i| m[(i, i)] >= 0.0));
        }
    }

    #[test]
    fn assemble_requires_forward_state() {
        let s = DiffusionOperator::identity(2);
        let arch = ArchitectureSpec::vanilla(Activation::Relu, 1);
        let empty = KernelStack {
            sigma: vec![],
            e: vec![],
            e_dot: vec![],
            e0_tilde: None,
            theta: None,
            output_factor: None,
            theta_slack: 0.0,
        };
        assert!(matches!(
            assemble_ntk(empty, &s, &arch),
            Err(Error::MissingState(_))
        ));
    }

    #[test]
    fn rejects_mismatched_features() {
        let s = DiffusionOperator::identity(3);
        let x = Matrix::zeros(2, 2);
        let arch = ArchitectureSpec::vanilla(Activation::Relu, 1);
        assert!(matches!(
            covariance_forward(&s, &x, &arch),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn truncation_matches_shallower_run() {
        let g = Graph::new(4, [(0, 1), (1, 2), (1, 3)]).unwrap();
        let s = build_diffusion(&g);
        let x = Matrix::from_row_slice(4, 2, &[1.0, 0.0, 0.5, 0.5, 0.0, 1.0, -1.0, 0.2]);
        let deep = ArchitectureSpec::skip_pc(Activation::Relu, Activation::Relu, 6);
        let stack = covariance_forward(&s, &x, &deep).unwrap();
        let shallow = covariance_forward(&s, &x, &deep.with_depth(2)).unwrap();
        assert_eq!(stack.truncated(2).unwrap(), shallow);
        assert!(stack.truncated(7).is_err());
    }
}
