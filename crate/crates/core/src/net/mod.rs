//! Layered ReLU networks: storage, exact forward pass, combinators and size
//! accounting.

mod circuit;
mod serde;

pub use circuit::{stack, Affine, Circuit, CircuitStats};
pub use serde::{AnyNetwork, LayerDoc, NetworkDoc};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::{Real, ScalarKind};

/// One affine map `x -> W x + v` with `W` stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer<T> {
    pub rows: usize,
    pub cols: usize,
    pub w: Vec<T>,
    pub v: Vec<T>,
}

impl<T: Real> Layer<T> {
    pub fn new(rows: usize, cols: usize, w: Vec<T>, v: Vec<T>) -> Result<Self> {
        if w.len() != rows * cols || v.len() != rows {
            return Err(Error::Schema(format!(
                "layer shape {rows}x{cols} does not match {} weights and {} biases",
                w.len(),
                v.len()
            )));
        }
        Ok(Layer { rows, cols, w, v })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Layer {
            rows,
            cols,
            w: vec![T::zero(); rows * cols],
            v: vec![T::zero(); rows],
        }
    }

    pub fn from_rows(rows: Vec<Vec<T>>, v: Vec<T>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Schema("ragged weight matrix".into()));
        }
        Layer::new(r, c, rows.into_iter().flatten().collect(), v)
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> &T {
        &self.w[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, x: T) {
        self.w[i * self.cols + j] = x;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.w[i * self.cols..(i + 1) * self.cols]
    }

    /// `W x + v`, skipping zero inputs and zero weights.
    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let nz: Vec<usize> = (0..self.cols).filter(|&j| !x[j].is_zero()).collect();
        let mut out = self.v.clone();
        for (i, o) in out.iter_mut().enumerate() {
            let row = self.row(i);
            for &j in &nz {
                let wij = &row[j];
                if !wij.is_zero() {
                    o.mul_acc(wij, &x[j]);
                }
            }
        }
        out
    }

    /// The layer `self ∘ other` as a single affine map.
    pub fn after(&self, other: &Layer<T>) -> Layer<T> {
        assert_eq!(self.cols, other.rows);
        let mut out: Layer<T> = Layer::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let mut b = self.v[i].clone();
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a.is_zero() {
                    continue;
                }
                b.mul_acc(a, &other.v[k]);
                for j in 0..other.cols {
                    let o = other.at(k, j);
                    if !o.is_zero() {
                        out.w[i * other.cols + j].mul_acc(a, o);
                    }
                }
            }
            out.v[i] = b;
        }
        out
    }

    pub fn max_abs(&self) -> T {
        let mut m = T::zero();
        for x in self.w.iter().chain(self.v.iter()) {
            let a = x.abs();
            if a > m {
                m = a;
            }
        }
        m
    }

    pub fn param_count(&self) -> usize {
        self.rows * self.cols + self.rows
    }

    pub fn map<U: Real>(&self, f: impl Fn(&T) -> U) -> Layer<U> {
        Layer {
            rows: self.rows,
            cols: self.cols,
            w: self.w.iter().map(&f).collect(),
            v: self.v.iter().map(&f).collect(),
        }
    }
}

/// Width, depth, magnitude and parameter count of a network.
#[derive(Clone, Debug, PartialEq, ::serde::Serialize, ::serde::Deserialize)]
pub struct SizeReport {
    pub width: usize,
    pub depth: usize,
    pub max_magnitude: f64,
    pub param_count: usize,
}

/// A fully connected ReLU network `v_L + W_L σ(... σ(W_0 x + v_0))`.
#[derive(Clone, Debug, PartialEq)]
pub struct Network<T> {
    dims: Vec<usize>,
    layers: Vec<Layer<T>>,
    kind: ScalarKind,
}

impl<T: Real> Network<T> {
    pub fn new(layers: Vec<Layer<T>>, kind: ScalarKind) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Schema("a network needs at least one affine layer".into()));
        }
        let mut dims = vec![layers[0].cols];
        for (i, l) in layers.iter().enumerate() {
            if l.cols != *dims.last().unwrap() {
                return Err(Error::Schema(format!(
                    "layer {i} expects {} inputs but the previous layer has {} outputs",
                    l.cols,
                    dims.last().unwrap()
                )));
            }
            if l.w.len() != l.rows * l.cols || l.v.len() != l.rows {
                return Err(Error::Schema(format!("layer {i} has inconsistent storage")));
            }
            if l.w.iter().chain(l.v.iter()).any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("layer {i} has a non-finite entry")));
            }
            dims.push(l.rows);
        }
        Ok(Network { dims, layers, kind })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn into_layers(self) -> Vec<Layer<T>> {
        self.layers
    }

    pub fn kind(&self) -> ScalarKind {
        self.kind
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    /// Number of hidden layers.
    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn width(&self) -> usize {
        *self.dims.iter().max().unwrap()
    }

    pub fn max_magnitude(&self) -> T {
        let mut m = T::zero();
        for l in &self.layers {
            let a = l.max_abs();
            if a > m {
                m = a;
            }
        }
        m
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn size_report(&self) -> SizeReport {
        SizeReport {
            width: self.width(),
            depth: self.depth(),
            max_magnitude: self.max_magnitude().to_f64(),
            param_count: self.param_count(),
        }
    }

    /// Forward pass with ReLU after every hidden affine map.
    pub fn evaluate(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let mut h = x.to_vec();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            h = l.apply(&h);
            if i < last {
                for z in h.iter_mut() {
                    *z = z.relu();
                }
            }
            if h.iter().any(|z| !z.is_finite()) {
                return Err(Error::NonFinite(format!("layer {i} produced a non-finite value")));
            }
        }
        Ok(h)
    }

    pub fn evaluate_batch(&self, xs: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
        xs.par_iter().map(|x| self.evaluate(x)).collect()
    }

    /// Converts every entry to another scalar type through exact rationals.
    pub fn cast<U: Real>(&self, kind: ScalarKind) -> Result<Network<U>> {
        let mut layers = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let conv = |x: &T| -> Result<U> { Ok(U::from_rational(&x.to_rational()?, kind)) };
            let w = l.w.iter().map(conv).collect::<Result<Vec<U>>>()?;
            let v = l.v.iter().map(conv).collect::<Result<Vec<U>>>()?;
            layers.push(Layer::new(l.rows, l.cols, w, v)?);
        }
        Network::new(layers, kind)
    }

    /// Pads with identity blocks up to `target_depth` hidden layers.
    pub fn depth_align(&self, target_depth: usize) -> Result<Self> {
        if target_depth < self.depth() {
            return Err(Error::InvalidArgument(format!(
                "cannot align depth {} down to {target_depth}",
                self.depth()
            )));
        }
        let mut net = self.clone();
        let id = identity_net::<T>(self.output_dim(), self.kind);
        while net.depth() < target_depth {
            net = compose(&id, &net)?;
        }
        Ok(net)
    }
}

/// `x = σ(x) − σ(−x)` coordinatewise: width `2D`, depth 1, magnitude 1.
pub fn identity_net<T: Real>(d: usize, kind: ScalarKind) -> Network<T> {
    let mut l0 = Layer::zeros(2 * d, d);
    let mut l1 = Layer::zeros(d, 2 * d);
    for i in 0..d {
        l0.set(i, i, T::one());
        l0.set(d + i, i, -T::one());
        l1.set(i, i, T::one());
        l1.set(i, d + i, -T::one());
    }
    Network::new(vec![l0, l1], kind).expect("identity shapes are consistent")
}

/// The depth-0 network `x -> A x + b`.
pub fn affine_net<T: Real>(a: Vec<Vec<T>>, b: Vec<T>, kind: ScalarKind) -> Result<Network<T>> {
    if a.len() != b.len() {
        return Err(Error::Schema(format!(
            "matrix has {} rows but offset has {} entries",
            a.len(),
            b.len()
        )));
    }
    Network::new(vec![Layer::from_rows(a, b)?], kind)
}

/// `f ∘ g`, merging the output map of `g` into the input map of `f`.
pub fn compose<T: Real>(f: &Network<T>, g: &Network<T>) -> Result<Network<T>> {
    if f.input_dim() != g.output_dim() {
        return Err(Error::DimMismatch {
            expected: f.input_dim(),
            got: g.output_dim(),
        });
    }
    let mut layers: Vec<Layer<T>> = Vec::with_capacity(f.layers.len() + g.layers.len() - 1);
    layers.extend(g.layers[..g.layers.len() - 1].iter().cloned());
    layers.push(f.layers[0].after(g.layers.last().unwrap()));
    layers.extend(f.layers[1..].iter().cloned());
    Network::new(layers, f.kind)
}

/// `x -> (f(x), g(x))` after aligning both to the larger depth.
pub fn parallelize<T: Real>(f: &Network<T>, g: &Network<T>) -> Result<Network<T>> {
    if f.input_dim() != g.input_dim() {
        return Err(Error::DimMismatch {
            expected: f.input_dim(),
            got: g.input_dim(),
        });
    }
    let depth = f.depth().max(g.depth());
    let fa = f.depth_align(depth)?;
    let ga = g.depth_align(depth)?;
    let mut layers = Vec::with_capacity(depth + 1);
    for (i, (lf, lg)) in fa.layers.iter().zip(ga.layers.iter()).enumerate() {
        let rows = lf.rows + lg.rows;
        let cols = if i == 0 { lf.cols } else { lf.cols + lg.cols };
        let mut l = Layer::zeros(rows, cols);
        let goff = if i == 0 { 0 } else { lf.cols };
        for r in 0..lf.rows {
            for c in 0..lf.cols {
                l.set(r, c, lf.at(r, c).clone());
            }
            l.v[r] = lf.v[r].clone();
        }
        for r in 0..lg.rows {
            for c in 0..lg.cols {
                l.set(lf.rows + r, goff + c, lg.at(r, c).clone());
            }
            l.v[lf.rows + r] = lg.v[r].clone();
        }
        layers.push(l);
    }
    Network::new(layers, f.kind)
}

/// Left fold of [`parallelize`].
pub fn parallelize_all<T: Real>(nets: &[Network<T>]) -> Result<Network<T>> {
    let (first, rest) = nets
        .split_first()
        .ok_or_else(|| Error::InvalidArgument("nothing to parallelize".into()))?;
    let mut acc = first.clone();
    for n in rest {
        acc = parallelize(&acc, n)?;
    }
    Ok(acc)
}

/// Block-diagonal parallel composition on disjoint inputs:
/// `(x_1, …, x_k) -> (f_1(x_1), …, f_k(x_k))` after depth alignment.
pub fn side_by_side<T: Real>(nets: &[Network<T>]) -> Result<Network<T>> {
    let first = nets
        .first()
        .ok_or_else(|| Error::InvalidArgument("nothing to place side by side".into()))?;
    let depth = nets.iter().map(Network::depth).max().unwrap();
    let aligned = nets
        .iter()
        .map(|n| n.depth_align(depth))
        .collect::<Result<Vec<_>>>()?;
    let mut layers = Vec::with_capacity(depth + 1);
    for j in 0..=depth {
        let parts: Vec<Layer<T>> = aligned.iter().map(|n| n.layers[j].clone()).collect();
        layers.push(circuit::block_diag(&parts));
    }
    Network::new(layers, first.kind)
}

/// `x -> x` on nonnegative inputs through `depth` ReLU layers of width `d`.
pub fn relu_pass<T: Real>(d: usize, depth: usize, kind: ScalarKind) -> Network<T> {
    let mut layers = Vec::with_capacity(depth + 1);
    for _ in 0..=depth {
        let mut l = Layer::zeros(d, d);
        for i in 0..d {
            l.set(i, i, T::one());
        }
        layers.push(l);
    }
    Network::new(layers, kind).expect("square identity layers")
}

/// Depth-0 selection `x -> (x_{idx_1}, …, x_{idx_k})`.
pub fn select<T: Real>(d_in: usize, idx: &[usize], kind: ScalarKind) -> Network<T> {
    let mut l = Layer::zeros(idx.len(), d_in);
    for (r, &i) in idx.iter().enumerate() {
        l.set(r, i, T::one());
    }
    Network::new(vec![l], kind).expect("selection shape")
}

/// Depth-`l` chain computing `x -> 2^k x` on `x ≥ 0`, each weight `2^(k/l)`.
pub fn scaling_chain<T: Real>(k: i64, l: usize, kind: ScalarKind) -> Result<Network<T>> {
    if l == 0 || k < 0 {
        return Err(Error::InvalidArgument(format!(
            "scaling chain needs k ≥ 0 and depth ≥ 1, got k={k}, depth={l}"
        )));
    }
    let rho = T::pow2_frac(k, l as u32, kind)?;
    let mut layers = Vec::with_capacity(l + 1);
    for _ in 0..l {
        layers.push(Layer::new(1, 1, vec![rho.clone()], vec![T::zero()])?);
    }
    layers.push(Layer::new(1, 1, vec![T::one()], vec![T::zero()])?);
    Network::new(layers, kind)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;
    use crate::scalar::{int, rat};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_net(rng: &mut ChaCha8Rng, dims: &[usize]) -> Network<BigRational> {
        let mut layers = Vec::new();
        for w in dims.windows(2) {
            let mut l = Layer::zeros(w[1], w[0]);
            for x in l.w.iter_mut().chain(l.v.iter_mut()) {
                *x = rat(rng.random_range(-8..=8), rng.random_range(1..=4));
            }
            layers.push(l);
        }
        Network::new(layers, ScalarKind::Rational).unwrap()
    }

    fn rand_point(rng: &mut ChaCha8Rng, d: usize) -> Vec<BigRational> {
        (0..d).map(|_| rat(rng.random_range(-16..=16), 8)).collect()
    }

    #[test]
    fn relu_kills_negative_preactivation() {
        let l0 = Layer::new(1, 1, vec![int(1)], vec![int(-1)]).unwrap();
        let l1 = Layer::new(1, 1, vec![int(1)], vec![int(0)]).unwrap();
        let net = Network::new(vec![l0, l1], ScalarKind::Rational).unwrap();
        assert_eq!(net.evaluate(&[rat(1, 2)]).unwrap(), vec![int(0)]);
    }

    #[test]
    fn identity_reproduces_input() {
        let id = identity_net::<f64>(2, ScalarKind::F64);
        assert_eq!(id.evaluate(&[-1.0, 2.0]).unwrap(), vec![-1.0, 2.0]);
        let r = id.size_report();
        assert_eq!((r.width, r.depth, r.max_magnitude), (4, 1, 1.0));
        assert_eq!(identity_net::<f64>(1, ScalarKind::F64).width(), 2);
    }

    #[test]
    fn identity_exact_in_rational() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let id = identity_net::<BigRational>(3, ScalarKind::Rational);
        for _ in 0..50 {
            let x = rand_point(&mut rng, 3);
            assert_eq!(id.evaluate(&x).unwrap(), x);
        }
    }

    #[test]
    fn compose_hand_example() {
        let double = affine_net(vec![vec![int(2)]], vec![int(0)], ScalarKind::Rational).unwrap();
        let trunc = Network::new(
            vec![
                Layer::new(1, 1, vec![int(1)], vec![int(0)]).unwrap(),
                Layer::new(1, 1, vec![int(1)], vec![int(0)]).unwrap(),
            ],
            ScalarKind::Rational,
        )
        .unwrap();
        let h = compose(&double, &trunc).unwrap();
        assert_eq!(h.evaluate(&[int(-1)]).unwrap(), vec![int(0)]);
        assert_eq!(h.evaluate(&[int(2)]).unwrap(), vec![int(4)]);
        assert_eq!(h.depth(), 1);
    }

    #[test]
    fn compose_matches_sequential_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let g = random_net(&mut rng, &[3, 5, 4, 2]);
            let f = random_net(&mut rng, &[2, 6, 3]);
            let h = compose(&f, &g).unwrap();
            assert_eq!(h.depth(), f.depth() + g.depth());
            assert!(h.width() <= f.width().max(g.width()));
            for _ in 0..10 {
                let x = rand_point(&mut rng, 3);
                let expect = f.evaluate(&g.evaluate(&x).unwrap()).unwrap();
                assert_eq!(h.evaluate(&x).unwrap(), expect);
            }
        }
    }

    #[test]
    fn depth_align_preserves_values_and_width_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = random_net(&mut rng, &[2, 3, 3]);
        let a = f.depth_align(4).unwrap();
        assert_eq!(a.depth(), 4);
        assert_eq!(a.width(), f.width().max(2 * f.output_dim()));
        for _ in 0..100 {
            let x = rand_point(&mut rng, 2);
            assert_eq!(a.evaluate(&x).unwrap(), f.evaluate(&x).unwrap());
        }
        assert_eq!(f.depth_align(1).unwrap(), f);
        assert!(f.depth_align(0).is_err());
    }

    #[test]
    fn parallelize_concatenates() {
        let id = identity_net::<f64>(1, ScalarKind::F64);
        assert_eq!(parallelize(&id, &id).unwrap().evaluate(&[0.3]).unwrap(), vec![0.3, 0.3]);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = random_net(&mut rng, &[3, 4, 4, 2]);
        let g = random_net(&mut rng, &[3, 2, 5, 5, 3, 1]);
        let p = parallelize(&f, &g).unwrap();
        assert_eq!(p.depth(), 4);
        assert!(p.width() <= f.width().max(2 * f.output_dim()) + g.width());
        for _ in 0..20 {
            let x = rand_point(&mut rng, 3);
            let mut expect = f.evaluate(&x).unwrap();
            expect.extend(g.evaluate(&x).unwrap());
            assert_eq!(p.evaluate(&x).unwrap(), expect);
        }
    }

    #[test]
    fn scaling_chain_examples() {
        let s = scaling_chain::<BigRational>(4, 2, ScalarKind::Rational).unwrap();
        assert_eq!(s.evaluate(&[int(1)]).unwrap(), vec![int(16)]);
        assert_eq!(s.max_magnitude(), int(4));
        let id = scaling_chain::<BigRational>(0, 3, ScalarKind::Rational).unwrap();
        assert_eq!(id.evaluate(&[rat(3, 7)]).unwrap(), vec![rat(3, 7)]);
        assert!(scaling_chain::<BigRational>(1, 2, ScalarKind::Rational).is_err());
    }

    #[test]
    fn affine_endpoint_rescaling() {
        // [a, b] = [2, 6] onto [0, 1]
        let net = affine_net(vec![vec![rat(1, 4)]], vec![rat(-1, 2)], ScalarKind::Rational).unwrap();
        assert_eq!(net.evaluate(&[int(2)]).unwrap(), vec![int(0)]);
        assert_eq!(net.evaluate(&[int(6)]).unwrap(), vec![int(1)]);
        assert_eq!(net.depth(), 0);
    }

    #[test]
    fn max_magnitude_matches_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let f = random_net(&mut rng, &[3, 7, 2]);
        let mut m = int(0);
        for l in f.layers() {
            for x in l.w.iter().chain(l.v.iter()) {
                let a = Real::abs(x);
                if a > m {
                    m = a;
                }
            }
        }
        assert_eq!(f.max_magnitude(), m);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let id = identity_net::<f64>(2, ScalarKind::F64);
        assert!(matches!(id.evaluate(&[1.0]), Err(Error::DimMismatch { .. })));
    }
}
