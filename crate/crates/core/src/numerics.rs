//! Dense linear algebra, activations and the Adam optimizer.
//!
//! Everything here works on `f64`. Vectors are plain slices / `Vec<f64>`;
//! matrices are row-major [`Matrix`] values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vector = Vec<f64>;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.values[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if values.len() != rows * cols {
            return Err(Error::shape(
                "Matrix::from_rows",
                format!("{rows}x{cols}"),
                format!("{} values", values.len()),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite matrix entry at {i}")));
        }
        Ok(Matrix { rows, cols, values })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.values[r * self.cols + c] = v;
    }

    pub fn shape_str(&self) -> String {
        format!("{}x{}", self.rows, self.cols)
    }

    /// `out += self · x`, no shape checks.
    #[inline]
    pub(crate) fn gemv_acc(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (row, o) in self.values.chunks_exact(self.cols).zip(out.iter_mut()) {
            let mut s = 0.0;
            for (a, b) in row.iter().zip(x) {
                s += a * b;
            }
            *o += s;
        }
    }

    /// `out += selfᵀ · y`, no shape checks.
    #[inline]
    pub(crate) fn gemv_t_acc(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (row, &yi) in self.values.chunks_exact(self.cols).zip(y) {
            if yi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * yi;
            }
        }
    }

    /// `self += a · bᵀ`, no shape checks.
    #[inline]
    pub(crate) fn add_outer(&mut self, a: &[f64], b: &[f64]) {
        debug_assert_eq!(a.len(), self.rows);
        debug_assert_eq!(b.len(), self.cols);
        let cols = self.cols;
        for (row, &ai) in self.values.chunks_exact_mut(cols).zip(a) {
            if ai == 0.0 {
                continue;
            }
            for (m, bj) in row.iter_mut().zip(b) {
                *m += ai * bj;
            }
        }
    }
}

pub fn matvec(m: &Matrix, v: &[f64]) -> Result<Vector> {
    if m.cols != v.len() {
        return Err(Error::shape(
            "matvec",
            format!("matrix {}", m.shape_str()),
            format!("vector of length {}", v.len()),
        ));
    }
    let mut out = vec![0.0; m.rows];
    m.gemv_acc(v, &mut out);
    Ok(out)
}

pub fn hadamard(a: &[f64], b: &[f64]) -> Result<Vector> {
    if a.len() != b.len() {
        return Err(Error::shape(
            "hadamard",
            format!("length {}", a.len()),
            format!("length {}", b.len()),
        ));
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Sigmoid,
    Tanh,
}

impl ActivationKind {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            ActivationKind::Sigmoid => sigmoid(x),
            ActivationKind::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation's own output `y = f(x)`.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            ActivationKind::Sigmoid => y * (1.0 - y),
            ActivationKind::Tanh => 1.0 - y * y,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Tanh => "tanh",
        }
    }
}

impl std::str::FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sigmoid" => Ok(ActivationKind::Sigmoid),
            "tanh" => Ok(ActivationKind::Tanh),
            other => Err(Error::invalid(format!("unknown activation '{other}'"))),
        }
    }
}

/// Logistic sigmoid, split by sign so `exp` never overflows.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn apply_activation(kind: ActivationKind, v: &[f64]) -> Vector {
    v.iter().map(|&x| kind.apply(x)).collect()
}

/// Adam optimizer state over a flattened parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub first_moment: Vector,
    pub second_moment: Vector,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub learning_rate: f64,
}

impl AdamState {
    pub const DEFAULT_BETA1: f64 = 0.9;
    pub const DEFAULT_BETA2: f64 = 0.999;
    pub const DEFAULT_EPSILON: f64 = 1e-8;
    pub const DEFAULT_LEARNING_RATE: f64 = 0.001;

    pub fn new(len: usize, learning_rate: f64) -> Self {
        AdamState {
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            step_count: 0,
            beta1: Self::DEFAULT_BETA1,
            beta2: Self::DEFAULT_BETA2,
            epsilon: Self::DEFAULT_EPSILON,
            learning_rate,
        }
    }

    pub fn with_betas(mut self, beta1: f64, beta2: f64, epsilon: f64) -> Result<Self> {
        if !(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0) {
            return Err(Error::invalid(format!(
                "Adam betas must lie in (0,1), got {beta1}, {beta2}"
            )));
        }
        if epsilon.is_nan() || epsilon <= 0.0 {
            return Err(Error::invalid(format!(
                "Adam epsilon must be > 0, got {epsilon}"
            )));
        }
        self.beta1 = beta1;
        self.beta2 = beta2;
        self.epsilon = epsilon;
        Ok(self)
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        let n = self.first_moment.len();
        if params.len() != n || grads.len() != n || self.second_moment.len() != n {
            return Err(Error::shape(
                "adam_step",
                format!("moments of length {n}"),
                format!("params {} / grads {}", params.len(), grads.len()),
            ));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first_moment.iter_mut())
            .zip(self.second_moment.iter_mut())
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

/// Euclidean norm of a flat vector.
pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Rescale `grads` in place so its global norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = l2_norm(grads);
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= scale);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matvec_examples() {
        assert_eq!(
            matvec(&Matrix::identity(2), &[3.0, 4.0]).unwrap(),
            vec![3.0, 4.0]
        );
        assert_eq!(
            matvec(&Matrix::zeros(2, 3), &[1.0, -2.0, 9.0]).unwrap(),
            vec![0.0, 0.0]
        );
        let m = Matrix::from_rows(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(matvec(&m, &[1.0, 1.0]).unwrap(), vec![3.0, 7.0]);
    }

    #[test]
    fn matvec_shape_error_names_both_shapes() {
        let err = matvec(&Matrix::zeros(2, 3), &[1.0, 2.0])
            .unwrap_err()
            .to_string();
        assert!(err.contains("2x3"), "{err}");
        assert!(err.contains("length 2"), "{err}");
    }

    #[test]
    fn matrix_rejects_bad_construction() {
        assert!(Matrix::from_rows(2, 2, vec![1.0; 3]).is_err());
        assert!(Matrix::from_rows(1, 1, vec![f64::NAN]).is_err());
        assert!(Matrix::from_rows(0, 1, vec![]).is_err());
    }

    #[test]
    fn hadamard_examples() {
        assert_eq!(
            hadamard(&[1.0, 1.0, 1.0], &[2.5, -1.0, 7.0]).unwrap(),
            vec![2.5, -1.0, 7.0]
        );
        assert_eq!(hadamard(&[0.0, 0.0], &[5.0, 7.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(hadamard(&[2.0, 3.0], &[4.0, 5.0]).unwrap(), vec![8.0, 15.0]);
        assert!(hadamard(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn activation_examples() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(ActivationKind::Tanh.apply(0.0), 0.0);
        assert!((sigmoid(3f64.ln()) - 0.75).abs() < 1e-15);
        assert_eq!(
            apply_activation(ActivationKind::Sigmoid, &[0.0, 0.0]),
            vec![0.5, 0.5]
        );
    }

    #[test]
    fn sigmoid_saturates_without_overflow() {
        assert_eq!(sigmoid(1000.0), 1.0);
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert!(sigmoid(-745.0).is_finite());
    }

    #[test]
    fn adam_zero_gradient_fresh_state() {
        let mut st = AdamState::new(3, 0.01);
        let mut p = vec![1.0, -2.0, 3.0];
        st.step(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
        assert_eq!(st.step_count, 1);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let mut st = AdamState::new(1, 0.01);
        let mut p = vec![0.5];
        st.step(&mut p, &[1.0]).unwrap();
        // m̂ = 1, v̂ = 1 after bias correction
        let expected = 0.5 - 0.01 / (1.0 + 1e-8);
        assert!((p[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn adam_descends_quadratic() {
        // f(p) = p², f'(p) = 2p
        let mut st = AdamState::new(1, 0.1);
        let mut p = vec![2.0];
        let mut prev = p[0] * p[0];
        for _ in 0..2 {
            let g = [2.0 * p[0]];
            st.step(&mut p, &g).unwrap();
            let f = p[0] * p[0];
            assert!(f < prev);
            prev = f;
        }
        assert_eq!(st.step_count, 2);
    }

    #[test]
    fn adam_length_mismatch() {
        let mut st = AdamState::new(2, 0.01);
        assert!(st.step(&mut [0.0, 0.0], &[1.0]).is_err());
        assert!(st.step(&mut [0.0], &[1.0]).is_err());
        assert_eq!(st.step_count, 0);
    }

    #[test]
    fn adam_rejects_bad_betas() {
        assert!(AdamState::new(1, 0.1).with_betas(1.0, 0.9, 1e-8).is_err());
        assert!(AdamState::new(1, 0.1).with_betas(0.9, 0.9, 0.0).is_err());
    }

    #[test]
    fn clipping() {
        let mut g = vec![3.0, 4.0];
        assert_eq!(clip_global_norm(&mut g, 1.0), 5.0);
        assert!((l2_norm(&g) - 1.0).abs() < 1e-15);
        let mut g = vec![0.3, 0.4];
        clip_global_norm(&mut g, 1.0);
        assert_eq!(g, vec![0.3, 0.4]);
    }

    fn finite() -> impl Strategy<Value = f64> {
        -100.0..100.0f64
    }

    proptest! {
        #[test]
        fn matvec_is_linear(
            vals in prop::collection::vec(finite(), 12),
            u in prop::collection::vec(finite(), 4),
            v in prop::collection::vec(finite(), 4),
            a in finite(), b in finite(),
        ) {
            let m = Matrix::from_rows(3, 4, vals).unwrap();
            let mix: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
            let lhs = matvec(&m, &mix).unwrap();
            let mu = matvec(&m, &u).unwrap();
            let mv = matvec(&m, &v).unwrap();
            for i in 0..3 {
                let rhs = a * mu[i] + b * mv[i];
                let scale = m.values()[i * 4..i * 4 + 4]
                    .iter()
                    .zip(&u)
                    .zip(&v)
                    .map(|((w, x), y)| (w * a * x).abs() + (w * b * y).abs())
                    .sum::<f64>()
                    .max(1.0);
                prop_assert!((lhs[i] - rhs).abs() <= 1e-12 * scale);
            }
        }

        #[test]
        fn sigmoid_symmetry(x in -30.0..30.0f64) {
            prop_assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() <= 1e-15);
        }

        #[test]
        fn tanh_sigmoid_identity(x in -50.0..50.0f64) {
            prop_assert!((x.tanh() - (2.0 * sigmoid(2.0 * x) - 1.0)).abs() <= 1e-12);
        }

        #[test]
        fn activations_stay_in_codomain(x in -1e6..1e6f64) {
            let s = sigmoid(x);
            prop_assert!((0.0..=1.0).contains(&s));
            let t = x.tanh();
            prop_assert!((-1.0..=1.0).contains(&t));
        }

        #[test]
        fn adam_zero_gradient_identity_with_zero_moments(
            params in prop::collection::vec(finite(), 1..8),
            steps in 0u64..1000,
            lr in 1e-5..1.0f64,
            b1 in 0.01..0.99f64,
            b2 in 0.01..0.9999f64,
        ) {
            let n = params.len();
            let mut st = AdamState::new(n, lr).with_betas(b1, b2, 1e-8).unwrap();
            st.step_count = steps;
            let mut p = params.clone();
            st.step(&mut p, &vec![0.0; n]).unwrap();
            prop_assert_eq!(p, params);
            prop_assert_eq!(st.step_count, steps + 1);
        }

        #[test]
        fn adam_is_deterministic(
            params in prop::collection::vec(finite(), 1..8),
            seed_grads in prop::collection::vec(finite(), 8),
        ) {
            let n = params.len();
            let grads = &seed_grads[..n];
            let mut s1 = AdamState::new(n, 0.01);
            let mut s2 = s1.clone();
            let mut p1 = params.clone();
            let mut p2 = params.clone();
            for _ in 0..3 {
                s1.step(&mut p1, grads).unwrap();
                s2.step(&mut p2, grads).unwrap();
            }
            prop_assert_eq!(
                p1.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
                p2.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
            );
            prop_assert_eq!(s1, s2);
        }
    }
}
