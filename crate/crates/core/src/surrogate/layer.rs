use rand::Rng;

/// Affine map `y = W x + b` with `W` stored row-major as `rows × cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            weights: vec![0.0; rows * cols],
            bias: vec![0.0; rows],
        }
    }

    /// Weights and biases uniform in `[-1/sqrt(cols), 1/sqrt(cols)]`.
    pub fn init_uniform<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (cols as f64).sqrt();
        let mut draw = |len: usize| -> Vec<f64> { (0..len).map(|_| rng.gen_range(-bound..=bound)).collect() };
        let weights = draw(rows * cols);
        let bias = draw(rows);
        Self {
            rows,
            cols,
            weights,
            bias,
        }
    }

    /// Returns `None` when buffer lengths disagree with the shape.
    pub fn from_parts(rows: usize, cols: usize, weights: Vec<f64>, bias: Vec<f64>) -> Option<Self> {
        (weights.len() == rows * cols && bias.len() == rows).then_some(Self {
            rows,
            cols,
            weights,
            bias,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }

    pub fn fill_zero(&mut self) {
        self.weights.fill(0.0);
        self.bias.fill(0.0);
    }

    pub(crate) fn forward(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.weights[r * self.cols..(r + 1) * self.cols];
            *o = self.bias[r] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }

    pub(crate) fn forward_tanh(&self, x: &[f64], out: &mut [f64]) {
        self.forward(x, out);
        out.iter_mut().for_each(|v| *v = v.tanh());
    }

    /// Accumulates `dz ⊗ x` into `grad` and, when requested, writes `Wᵀ dz`
    /// into `dx`.
    pub(crate) fn backward(&self, x: &[f64], dz: &[f64], grad: &mut Dense, dx: Option<&mut [f64]>) {
        for (r, &d) in dz.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let g = &mut grad.weights[r * self.cols..(r + 1) * self.cols];
            g.iter_mut().zip(x).for_each(|(g, v)| *g += d * v);
            grad.bias[r] += d;
        }
        if let Some(dx) = dx {
            dx.fill(0.0);
            for (r, &d) in dz.iter().enumerate() {
                let row = &self.weights[r * self.cols..(r + 1) * self.cols];
                dx.iter_mut().zip(row).for_each(|(o, w)| *o += w * d);
            }
        }
    }

    /// `self -= step * grad`.
    pub(crate) fn descend(&mut self, grad: &Dense, step: f64) {
        self.weights
            .iter_mut()
            .zip(&grad.weights)
            .for_each(|(w, g)| *w -= step * g);
        self.bias.iter_mut().zip(&grad.bias).for_each(|(b, g)| *b -= step * g);
    }
}
