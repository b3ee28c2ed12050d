use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{ArchitectureSpec, DiffusionOperator, Error, Matrix, Result, Variant, Vector};

/// A finite-width GCN with i.i.d. standard normal weights.
///
/// Vanilla nets map `f → h → … → h → 1`. Skip variants first project the
/// input to `H_0 = X T` with a fixed, non-trainable `T ∈ R^{f×h}` and keep
/// every hidden layer at width `h`.
#[derive(Debug, Clone)]
pub struct FiniteWidthNet {
    arch: ArchitectureSpec,
    width: usize,
    in_dim: usize,
    weights: Vec<Matrix>,
    transform: Option<Matrix>,
    seed: u64,
}

/// Activations recorded by [`FiniteWidthNet::forward`].
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// `g_1 … g_{d+1}`, the inputs of each weight matrix.
    pub g: Vec<Matrix>,
    /// `f_i = g_i W_i`.
    pub f: Vec<Matrix>,
    /// `σ_s(H_0)` for skip variants.
    pub skip: Option<Matrix>,
    pub output: Vector,
}

/// `∂F_p/∂W_i` for every node `p`, indexed `[p][i]`.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub per_node: Vec<Vec<Matrix>>,
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn check_finite(m: &Matrix, layer: usize) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { layer })
    }
}

impl FiniteWidthNet {
    /// Samples a net from `seed`.
    pub fn sample(arch: ArchitectureSpec, in_dim: usize, width: usize, seed: u64) -> Result<Self> {
        Self::sample_stream(arch, in_dim, width, seed, 0)
    }

    /// Samples the `stream`-th independent net for `seed`; used to give every
    /// Monte Carlo draw its own reproducible random stream.
    pub fn sample_stream(
        arch: ArchitectureSpec,
        in_dim: usize,
        width: usize,
        seed: u64,
        stream: u64,
    ) -> Result<Self> {
        arch.validate()?;
        if width == 0 || in_dim == 0 {
            return Err(Error::InvalidArgument(
                "width and input dimension must be positive".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let transform = arch.is_skip().then(|| gaussian(in_dim, width, &mut rng));
        let shapes = Self::shapes(&arch, in_dim, width);
        let weights = shapes
            .iter()
            .map(|&(r, c)| gaussian(r, c, &mut rng))
            .collect();
        Ok(Self {
            arch,
            width,
            in_dim,
            weights,
            transform,
            seed,
        })
    }

    /// Builds a net from explicit parameters, checking every shape.
    pub fn from_parameters(
        arch: ArchitectureSpec,
        in_dim: usize,
        width: usize,
        weights: Vec<Matrix>,
        transform: Option<Matrix>,
    ) -> Result<Self> {
        arch.validate()?;
        let shapes = Self::shapes(&arch, in_dim, width);
        if weights.len() != shapes.len() {
            return Err(Error::dims("weight count", shapes.len(), weights.len()));
        }
        for (i, (w, &(r, c))) in weights.iter().zip(&shapes).enumerate() {
            if w.shape() != (r, c) {
                return Err(Error::dims(
                    format!("W_{}", i + 1),
                    format!("{r}x{c}"),
                    format!("{}x{}", w.nrows(), w.ncols()),
                ));
            }
        }
        match (&transform, arch.is_skip()) {
            (Some(t), true) if t.shape() == (in_dim, width) => {}
            (None, false) => {}
            (Some(t), true) => {
                return Err(Error::dims(
                    "input transform",
                    format!("{in_dim}x{width}"),
                    format!("{}x{}", t.nrows(), t.ncols()),
                ))
            }
            (None, true) => {
                return Err(Error::MissingState("skip variants need an input transform"))
            }
            (Some(_), false) => {
                return Err(Error::InvalidArgument(
                    "vanilla nets take no input transform".into(),
                ))
            }
        }
        Ok(Self {
            arch,
            width,
            in_dim,
            weights,
            transform,
            seed: 0,
        })
    }

    fn shapes(arch: &ArchitectureSpec, in_dim: usize, width: usize) -> Vec<(usize, usize)> {
        let first = if arch.is_skip() { width } else { in_dim };
        let mut shapes = Vec::with_capacity(arch.depth + 1);
        shapes.push((first, width));
        shapes.extend(std::iter::repeat_n((width, width), arch.depth - 1));
        shapes.push((width, 1));
        shapes
    }

    pub fn arch(&self) -> &ArchitectureSpec {
        &self.arch
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [Matrix] {
        &mut self.weights
    }

    pub fn transform(&self) -> Option<&Matrix> {
        self.transform.as_ref()
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum()
    }

    /// Sanity bound on the empirical weight mean: `|μ| ≤ 5 / √count` per matrix.
    pub fn weight_means_plausible(&self) -> bool {
        self.weights
            .iter()
            .chain(self.transform.iter())
            .all(|w| w.mean().abs() <= 5.0 / (w.len() as f64).sqrt())
    }

    /// Scale `√(c_σ / h_{i-1})` in front of `g_i` (1-based `i`).
    fn scale(&self, layer: usize) -> f64 {
        if layer == 1 && !self.arch.is_skip() {
            1.0
        } else {
            (self.arch.c_sigma / self.width as f64).sqrt()
        }
    }

    fn check_inputs(&self, s: &DiffusionOperator, x: &Matrix) -> Result<()> {
        if x.nrows() != s.n() {
            return Err(Error::dims("feature rows", s.n(), x.nrows()));
        }
        if x.ncols() != self.in_dim {
            return Err(Error::dims("feature columns", self.in_dim, x.ncols()));
        }
        Ok(())
    }

    pub fn forward(&self, s: &DiffusionOperator, x: &Matrix) -> Result<ForwardTrace> {
        self.check_inputs(s, x)?;
        let arch = &self.arch;
        let s = s.s();
        let depth = arch.depth;
        let alpha = arch.alpha;
        let skip = self.transform.as_ref().map(|t| {
            let mut h0 = x * t;
            h0.apply(|v| *v = arch.skip_activation.apply(*v));
            h0
        });
        let mut g = Vec::with_capacity(depth + 1);
        let mut f: Vec<Matrix> = Vec::with_capacity(depth + 1);
        for layer in 1..=depth + 1 {
            let scale = self.scale(layer);
            let gi = if layer == 1 {
                match (arch.variant, &skip) {
                    (Variant::Vanilla, _) => s * x,
                    (Variant::SkipPc, Some(z)) => (s * z) * scale,
                    (Variant::SkipAlpha, Some(z)) => ((s * z) * (1.0 - alpha) + z * alpha) * scale,
                    _ => unreachable!("skip variants always carry a transform"),
                }
            } else {
                let mut act = f[layer - 2].clone();
                act.apply(|v| *v = arch.activation.apply(*v));
                match (arch.variant, &skip) {
                    (Variant::Vanilla, _) => (s * act) * scale,
                    (Variant::SkipPc, Some(z)) => (s * (act + z)) * scale,
                    (Variant::SkipAlpha, Some(z)) => {
                        ((s * act) * (1.0 - alpha) + z * alpha) * scale
                    }
                    _ => unreachable!("skip variants always carry a transform"),
                }
            };
            check_finite(&gi, layer)?;
            let fi = &gi * &self.weights[layer - 1];
            check_finite(&fi, layer)?;
            g.push(gi);
            f.push(fi);
        }
        let last = &f[depth];
        let output = Vector::from_fn(last.nrows(), |p, _| arch.output_head.apply(last[(p, 0)]));
        Ok(ForwardTrace { g, f, skip, output })
    }

    fn check_trace(&self, trace: &ForwardTrace) -> Result<()> {
        let layers = self.arch.depth + 1;
        if trace.g.len() != layers || trace.f.len() != layers {
            return Err(Error::dims("trace layers", layers, trace.f.len()));
        }
        for (i, (fi, w)) in trace.f.iter().zip(&self.weights).enumerate() {
            if fi.ncols() != w.ncols() || trace.g[i].ncols() != w.nrows() {
                return Err(Error::dims(
                    format!("trace layer {}", i + 1),
                    w.ncols(),
                    fi.ncols(),
                ));
            }
        }
        Ok(())
    }

    /// Backpropagates output seeds through the net.
    ///
    /// Each seed `r ∈ R^n` weights the per-node outputs, so the returned
    /// signals `B_i` satisfy `∂(rᵀF)/∂W_i = g_iᵀ B_i`. Result is indexed
    /// `[layer][seed]`, each signal shaped like `f_i`.
    pub fn backward(
        &self,
        s: &DiffusionOperator,
        trace: &ForwardTrace,
        seeds: &[Vector],
    ) -> Result<Vec<Vec<Matrix>>> {
        self.check_trace(trace)?;
        let n = s.n();
        let depth = self.arch.depth;
        let last = &trace.f[depth];
        if last.nrows() != n {
            return Err(Error::dims("trace nodes", n, last.nrows()));
        }
        let head: Vec<f64> = (0..n)
            .map(|p| self.arch.output_head.derivative(last[(p, 0)]))
            .collect();
        let mut current: Vec<Matrix> = seeds
            .iter()
            .map(|r| {
                if r.len() != n {
                    return Err(Error::dims("backward seed", n, r.len()));
                }
                Ok(Matrix::from_fn(n, 1, |p, _| r[p] * head[p]))
            })
            .collect::<Result<_>>()?;
        let st = s.s().transpose();
        let coef = self.arch.hidden_coefficient();
        let mut signals = vec![Vec::new(); depth + 1];
        for layer in (1..=depth).rev() {
            let factor = self.scale(layer + 1) * coef;
            let w_t = self.weights[layer].transpose();
            let mut gate = trace.f[layer - 1].clone();
            gate.apply(|v| *v = self.arch.activation.derivative(*v));
            let next: Vec<Matrix> = current
                .iter()
                .map(|b| {
                    let mut prev = (&st * (b * &w_t)) * factor;
                    prev.component_mul_assign(&gate);
                    prev
                })
                .collect();
            signals[layer] = std::mem::replace(&mut current, next);
        }
        signals[0] = current;
        Ok(signals)
    }

    /// Per-node gradients of the outputs with respect to every `W_i`.
    pub fn grad(
        &self,
        s: &DiffusionOperator,
        x: &Matrix,
        trace: &ForwardTrace,
    ) -> Result<Gradients> {
        self.check_inputs(s, x)?;
        let n = s.n();
        let seeds: Vec<Vector> = (0..n)
            .map(|p| {
                let mut e = Vector::zeros(n);
                e[p] = 1.0;
                e
            })
            .collect();
        let signals = self.backward(s, trace, &seeds)?;
        let g_t: Vec<Matrix> = trace.g.iter().map(|g| g.transpose()).collect();
        let per_node = (0..n)
            .map(|p| {
                signals
                    .iter()
                    .zip(&g_t)
                    .map(|(layer, gt)| gt * &layer[p])
                    .collect()
            })
            .collect();
        Ok(Gradients { per_node })
    }

    /// `Θ_pq = Σ_i ⟨∂F_p/∂W_i, ∂F_q/∂W_i⟩` for this draw of weights.
    ///
    /// Uses `⟨g_iᵀ b_p, g_iᵀ b_q⟩ = ⟨(g_i g_iᵀ) b_p, b_q⟩`, so per-node gradients
    /// are never materialized.
    pub fn tangent_kernel(&self, s: &DiffusionOperator, x: &Matrix) -> Result<Matrix> {
        let trace = self.forward(s, x)?;
        let n = s.n();
        let seeds: Vec<Vector> = (0..n)
            .map(|p| {
                let mut e = Vector::zeros(n);
                e[p] = 1.0;
                e
            })
            .collect();
        let signals = self.backward(s, &trace, &seeds)?;
        let mut theta = Matrix::zeros(n, n);
        for (layer, g) in signals.iter().zip(&trace.g) {
            let gram = g * g.transpose();
            let len = layer[0].len();
            let flat = Matrix::from_fn(len, n, |r, p| layer[p].as_slice()[r]);
            let mut pushed = Matrix::zeros(len, n);
            for (p, b) in layer.iter().enumerate() {
                let c = &gram * b;
                pushed.column_mut(p).copy_from_slice(c.as_slice());
            }
            theta += pushed.transpose() * flat;
        }
        crate::linalg::symmetrize(&mut theta);
        Ok(theta)
    }
}

impl Gradients {
    /// All gradients of node `p` flattened into one vector.
    pub fn flattened(&self, p: usize) -> Vector {
        let parts = &self.per_node[p];
        let total = parts.iter().map(|m| m.len()).sum();
        let mut out = Vector::zeros(total);
        let mut offset = 0;
        for m in parts {
            out.rows_mut(offset, m.len()).copy_from_slice(m.as_slice());
            offset += m.len();
        }
        out
    }
}
