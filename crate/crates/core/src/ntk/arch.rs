use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Vanilla,
    /// Transformed input added to every hidden layer before diffusion.
    SkipPc,
    /// Transformed input linearly interpolated with the diffused hidden layer.
    SkipAlpha,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Linear,
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputHead {
    /// `Φ(x) = 2 / (1 + e^{-x}) - 1`.
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Linear => x,
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative, with `relu'(0) = 0`.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `E[σ(u)²]` for `u ~ N(0, 1)`.
    pub fn gaussian_second_moment(self) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Relu => 0.5,
        }
    }
}

impl OutputHead {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            OutputHead::Sigmoid => 2.0 / (1.0 + (-x).exp()) - 1.0,
            OutputHead::Identity => x,
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            OutputHead::Sigmoid => {
                let phi = self.apply(x);
                0.5 * (1.0 - phi * phi)
            }
            OutputHead::Identity => 1.0,
        }
    }
}

/// Normalization constant that keeps the forward pass norm-preserving at
/// initialization: `1 / E[σ(u)²]` without skips, `1 / (E[σ(u)²] + 1)` with.
pub fn default_c_sigma(variant: Variant, activation: Activation) -> f64 {
    let m = activation.gaussian_second_moment();
    match variant {
        Variant::Vanilla => 1.0 / m,
        Variant::SkipPc | Variant::SkipAlpha => 1.0 / (m + 1.0),
    }
}

/// Architecture of a GCN of depth `d`: `d` hidden diffusion layers followed
/// by a diffused scalar read-out, so `d + 1` weight matrices in total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArchitectureSpec {
    pub variant: Variant,
    pub activation: Activation,
    /// Applied to the transformed input `H_0`; ignored for [`Variant::Vanilla`].
    pub skip_activation: Activation,
    pub depth: usize,
    pub c_sigma: f64,
    /// Interpolation weight of the skip term; only used by [`Variant::SkipAlpha`].
    pub alpha: f64,
    pub output_head: OutputHead,
}

impl ArchitectureSpec {
    pub fn vanilla(activation: Activation, depth: usize) -> Self {
        Self {
            variant: Variant::Vanilla,
            activation,
            skip_activation: Activation::Linear,
            depth,
            c_sigma: default_c_sigma(Variant::Vanilla, activation),
            alpha: 0.0,
            output_head: OutputHead::Sigmoid,
        }
    }

    pub fn skip_pc(activation: Activation, skip_activation: Activation, depth: usize) -> Self {
        Self {
            variant: Variant::SkipPc,
            activation,
            skip_activation,
            depth,
            c_sigma: default_c_sigma(Variant::SkipPc, activation),
            alpha: 0.0,
            output_head: OutputHead::Sigmoid,
        }
    }

    pub fn skip_alpha(
        activation: Activation,
        skip_activation: Activation,
        alpha: f64,
        depth: usize,
    ) -> Self {
        Self {
            variant: Variant::SkipAlpha,
            activation,
            skip_activation,
            depth,
            c_sigma: default_c_sigma(Variant::SkipAlpha, activation),
            alpha,
            output_head: OutputHead::Sigmoid,
        }
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = depth;
        self
    }

    pub fn with_c_sigma(mut self, c_sigma: f64) -> Self {
        self.c_sigma = c_sigma;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_output_head(mut self, head: OutputHead) -> Self {
        self.output_head = head;
        self
    }

    pub fn is_skip(&self) -> bool {
        self.variant != Variant::Vanilla
    }

    /// Weight on the diffused hidden term: `1 - α` for Skip-α, else 1.
    pub(crate) fn hidden_coefficient(&self) -> f64 {
        match self.variant {
            Variant::SkipAlpha => 1.0 - self.alpha,
            _ => 1.0,
        }
    }

    /// Checks the structural invariants. `alpha` may sit on the closed
    /// interval `[0, 1]` so that the finite-width oracle can probe the limits.
    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::InvalidArchitecture(
                "depth must be at least 1".into(),
            ));
        }
        if !(self.c_sigma.is_finite() && self.c_sigma > 0.0) {
            return Err(Error::InvalidArchitecture(format!(
                "c_sigma must be positive, got {}",
                self.c_sigma
            )));
        }
        if self.variant == Variant::SkipAlpha && !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidArchitecture(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

macro_rules! string_enum {
    ($ty:ty { $($variant:path => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub fn name(self) -> &'static str {
                match self { $($variant => $name),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($variant),)+
                    other => Err(Error::InvalidArgument(format!(
                        "unknown {} `{other}`", stringify!($ty)
                    ))),
                }
            }
        }
    };
}

string_enum!(Variant {
    Variant::Vanilla => "vanilla",
    Variant::SkipPc => "skip-pc",
    Variant::SkipAlpha => "skip-alpha",
});

string_enum!(Activation {
    Activation::Linear => "linear",
    Activation::Relu => "relu",
});

string_enum!(OutputHead {
    OutputHead::Sigmoid => "sigmoid",
    OutputHead::Identity => "identity",
});

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_normalization_constants() {
        assert_eq!(default_c_sigma(Variant::Vanilla, Activation::Linear), 1.0);
        assert_eq!(default_c_sigma(Variant::Vanilla, Activation::Relu), 2.0);
        assert!((default_c_sigma(Variant::SkipPc, Activation::Relu) - 2.0 / 3.0).abs() < 1e-15);
        assert!((default_c_sigma(Variant::SkipAlpha, Activation::Relu) - 0.67).abs() < 0.01);
        assert_eq!(ArchitectureSpec::vanilla(Activation::Relu, 2).c_sigma, 2.0);
    }

    #[test]
    fn validation() {
        assert!(ArchitectureSpec::vanilla(Activation::Relu, 0)
            .validate()
            .is_err());
        assert!(ArchitectureSpec::vanilla(Activation::Relu, 1)
            .with_c_sigma(0.0)
            .validate()
            .is_err());
        let a = ArchitectureSpec::skip_alpha(Activation::Relu, Activation::Relu, 1.5, 2);
        assert!(a.validate().is_err());
        assert!(a.with_alpha(0.2).validate().is_ok());
    }

    #[test]
    fn names_round_trip() {
        for v in [Variant::Vanilla, Variant::SkipPc, Variant::SkipAlpha] {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("tanh".parse::<Activation>().is_err());
    }

    #[test]
    fn sigmoid_head() {
        let h = OutputHead::Sigmoid;
        assert_eq!(h.apply(0.0), 0.0);
        assert!((h.apply(1.0) - 0.46212).abs() < 1e-5);
        assert_eq!(h.derivative(0.0), 0.5);
        let eps = 1e-6;
        let fd = (h.apply(0.3 + eps) - h.apply(0.3 - eps)) / (2.0 * eps);
        assert!((fd - h.derivative(0.3)).abs() < 1e-9);
    }
}
