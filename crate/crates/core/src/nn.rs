//! Small fully connected network used as the feedforward learner.
//!
//! Hidden layers use `tanh`, the output layer is linear. Gradients are taken
//! of the scalar `⟨output, seed⟩` for an externally supplied output-space
//! seed vector, which is what feedback-error learning needs.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Dense layer, weights stored row-major as `outputs × inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.inputs + col]
    }

    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.inputs)
                .zip(&self.biases)
                .map(|(row, b)| row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b),
        );
    }
}

/// Multilayer perceptron: `tanh` hidden layers, identity output.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpNet {
    layers: Vec<Layer>,
}

/// Parameter gradients laid out like the network's own layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    layers: Vec<Layer>,
}

impl Gradients {
    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
    }

    pub fn is_zero(&self) -> bool {
        self.values().all(|g| g == 0.0)
    }
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(Error::Shape(format!(
            "layer sizes must list at least two positive widths, got {sizes:?}"
        )));
    }
    Ok(())
}

impl MlpNet {
    /// All parameters zero.
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        check_sizes(sizes)?;
        Ok(MlpNet {
            layers: sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
        })
    }

    /// Weights uniform in `[-amplitude, amplitude]` from a seeded generator, biases zero.
    pub fn random(sizes: &[usize], amplitude: f64, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if amplitude > 0.0 {
            for layer in &mut net.layers {
                for w in &mut layer.weights {
                    *w = rng.gen_range(-amplitude..=amplitude);
                }
            }
        }
        Ok(net)
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].inputs];
        sizes.extend(self.layers.iter().map(|l| l.outputs));
        sizes
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_size(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()))
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_size() {
            return Err(Error::Shape(format!(
                "network expects {} inputs, got {}",
                self.input_size(),
                x.len()
            )));
        }
        Ok(())
    }

    /// Activations of every layer, input first, output last.
    fn trace(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let last = self.layers.len() - 1;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::new();
            layer.affine(&acts[i], &mut z);
            if i != last {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(z);
        }
        acts
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.trace(x).pop().expect("at least one layer"))
    }

    /// Gradient of `⟨forward(x), seed⟩` with respect to every parameter.
    pub fn gradient(&self, x: &[f64], seed: &[f64]) -> Result<Gradients> {
        self.check_input(x)?;
        if seed.len() != self.output_size() {
            return Err(Error::Shape(format!(
                "output seed has {} entries, network has {} outputs",
                seed.len(),
                self.output_size()
            )));
        }
        let acts = self.trace(x);
        let mut grads: Vec<Layer> = Vec::with_capacity(self.layers.len());
        // delta = d<out, seed>/d(pre-activation) of the current layer
        let mut delta = seed.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &acts[i];
            let mut g = Layer::zeros(layer.inputs, layer.outputs);
            for (row, d) in delta.iter().enumerate() {
                g.biases[row] = *d;
                let gw = &mut g.weights[row * layer.inputs..(row + 1) * layer.inputs];
                for (w, xi) in gw.iter_mut().zip(input) {
                    *w = d * xi;
                }
            }
            if i > 0 {
                // back through W, then through tanh' = 1 - a^2
                delta = (0..layer.inputs)
                    .map(|col| {
                        let back: f64 = delta
                            .iter()
                            .enumerate()
                            .map(|(row, d)| d * layer.weight(row, col))
                            .sum();
                        back * (1.0 - input[col] * input[col])
                    })
                    .collect();
            }
            grads.push(g);
        }
        grads.reverse();
        Ok(Gradients { layers: grads })
    }

    /// `θ ← θ + lr·g`.
    pub fn apply_update(&mut self, grads: &Gradients, lr: f64) -> Result<()> {
        let shapes_match = grads.layers.len() == self.layers.len()
            && grads
                .layers
                .iter()
                .zip(&self.layers)
                .all(|(g, l)| g.inputs == l.inputs && g.outputs == l.outputs);
        if !shapes_match {
            return Err(Error::Shape("gradient shapes do not match the network".into()));
        }
        if lr == 0.0 {
            return Ok(());
        }
        for (l, g) in self.layers.iter_mut().zip(&grads.layers) {
            for (p, d) in l.weights.iter_mut().zip(&g.weights) {
                *p += lr * d;
            }
            for (p, d) in l.biases.iter_mut().zip(&g.biases) {
                *p += lr * d;
            }
        }
        Ok(())
    }

    /// Functional form of [`MlpNet::apply_update`].
    pub fn updated(&self, grads: &Gradients, lr: f64) -> Result<MlpNet> {
        let mut next = self.clone();
        next.apply_update(grads, lr)?;
        Ok(next)
    }

    fn param_mut(&mut self, mut index: usize) -> &mut f64 {
        for l in &mut self.layers {
            let nw = l.weights.len();
            if index < nw {
                return &mut l.weights[index];
            }
            index -= nw;
            if index < l.biases.len() {
                return &mut l.biases[index];
            }
            index -= l.biases.len();
        }
        panic!("parameter index out of range");
    }

    /// Save as CSV: a header line with the layer sizes, then for every layer
    /// one line per output neuron holding its input weights followed by its bias.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let sizes: Vec<String> = self.layer_sizes().iter().map(|s| s.to_string()).collect();
        out.push_str(&sizes.join(","));
        out.push('\n');
        for l in &self.layers {
            for (row, b) in l.weights.chunks_exact(l.inputs).zip(&l.biases) {
                for w in row {
                    let _ = write!(out, "{w:e},");
                }
                let _ = writeln!(out, "{b:e}");
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::Shape(format!("weights line {line}: {msg}"));
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| bad(1, "missing layer sizes"))?;
        let sizes = header
            .split(',')
            .map(|s| s.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| bad(1, "layer sizes must be positive integers"))?;
        let mut net = Self::zeros(&sizes)?;
        for layer in &mut net.layers {
            for row in 0..layer.outputs {
                let (n, line) = lines.next().ok_or_else(|| bad(0, "unexpected end of file"))?;
                let values = line
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| bad(n + 1, "not a number"))?;
                if values.len() != layer.inputs + 1 {
                    return Err(bad(n + 1, &format!("expected {} values", layer.inputs + 1)));
                }
                layer.weights[row * layer.inputs..(row + 1) * layer.inputs].copy_from_slice(&values[..layer.inputs]);
                layer.biases[row] = values[layer.inputs];
            }
        }
        if let Some((n, _)) = lines.next() {
            return Err(bad(n + 1, "trailing data"));
        }
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }
}

/// Compare [`MlpNet::gradient`] against central differences of
/// `⟨forward(x), seed⟩` with step `eps`.
///
/// Returns `max_i |g_i − fd_i| / max(max_i |g_i|, max_i |fd_i|)`, or 0 when
/// both gradients vanish.
pub fn grad_check(net: &MlpNet, x: &[f64], seed: &[f64], eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("finite-difference step must be > 0, got {eps}")));
    }
    let analytic: Vec<f64> = net.gradient(x, seed)?.values().collect();
    let objective = |n: &MlpNet| -> Result<f64> { Ok(n.forward(x)?.iter().zip(seed).map(|(o, s)| o * s).sum()) };
    let mut probe = net.clone();
    let mut numeric = Vec::with_capacity(analytic.len());
    for i in 0..analytic.len() {
        let orig = *probe.param_mut(i);
        *probe.param_mut(i) = orig + eps;
        let plus = objective(&probe)?;
        *probe.param_mut(i) = orig - eps;
        let minus = objective(&probe)?;
        *probe.param_mut(i) = orig;
        numeric.push((plus - minus) / (2.0 * eps));
    }
    let scale = analytic.iter().chain(&numeric).fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Ok(0.0);
    }
    let worst = analytic
        .iter()
        .zip(&numeric)
        .fold(0.0f64, |m, (a, n)| m.max((a - n).abs()));
    Ok(worst / scale)
}

/// Outcome of [`grad_check_suite`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckSummary {
    pub trials: usize,
    pub max_deviation: f64,
    /// Layer sizes of the worst trial.
    pub worst_sizes: Vec<usize>,
}

/// Grad-check `trials` random networks (1–2 hidden layers, random widths and
/// weights) at random inputs and output seeds, all drawn from `seed`.
pub fn grad_check_suite(seed: u64, trials: usize, eps: f64) -> Result<GradCheckSummary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut summary = GradCheckSummary {
        trials,
        max_deviation: 0.0,
        worst_sizes: Vec::new(),
    };
    for _ in 0..trials {
        let hidden = rng.gen_range(1..=2);
        let mut sizes = vec![rng.gen_range(1..=8)];
        sizes.extend((0..hidden).map(|_| rng.gen_range(1..=12)));
        sizes.push(rng.gen_range(1..=4));
        let net = MlpNet::random(&sizes, 1.0, rng.gen())?;
        let x: Vec<f64> = (0..sizes[0]).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let s: Vec<f64> = (0..sizes[sizes.len() - 1]).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let dev = grad_check(&net, &x, &s, eps)?;
        if dev > summary.max_deviation || summary.worst_sizes.is_empty() {
            summary.max_deviation = summary.max_deviation.max(dev);
            summary.worst_sizes = sizes;
        }
    }
    Ok(summary)
}
