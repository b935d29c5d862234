//! Structured networks that are evaluated and measured without materializing
//! one dense weight set.
//!
//! A circuit is a tree of shared leaf networks. `Chain` applies its parts in
//! order; when materialized, consecutive parts are joined through an identity
//! bottleneck `x = σ(x) − σ(−x)` (one extra hidden layer of width twice the
//! interface) instead of multiplying the adjacent weight matrices, which keeps
//! the dense form the same size as its pieces. `Fan` feeds one input to every
//! branch, concatenates the outputs and optionally applies an affine head.
//! Depth-0 parts are always folded into a neighbouring leaf or head, so every
//! non-leaf part has at least one hidden layer.

use std::collections::HashMap;
use std::sync::Arc;

use super::{compose, identity_net, Layer, Network, SizeReport};
use crate::error::{Error, Result};
use crate::scalar::{Real, ScalarKind};

pub type Affine<T> = Layer<T>;

#[derive(Clone, Debug)]
pub enum Circuit<T> {
    Net(Arc<Network<T>>),
    Chain(Vec<Circuit<T>>),
    Fan {
        branches: Vec<Circuit<T>>,
        head: Option<Arc<Layer<T>>>,
    },
}

/// Layer widths, the largest magnitude outside the output map, and the
/// materialized output map itself.
#[derive(Clone, Debug)]
pub struct CircuitStats<T> {
    pub dims: Vec<usize>,
    pub body_max: T,
    pub last: Layer<T>,
}

impl<T: Real> CircuitStats<T> {
    pub fn depth(&self) -> usize {
        self.dims.len() - 2
    }

    pub fn size_report(&self) -> SizeReport {
        let b = if self.last.max_abs() > self.body_max {
            self.last.max_abs()
        } else {
            self.body_max.clone()
        };
        SizeReport {
            width: *self.dims.iter().max().unwrap(),
            depth: self.depth(),
            max_magnitude: b.to_f64(),
            param_count: self.dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum(),
        }
    }
}

fn max_of<T: Real>(a: T, b: T) -> T {
    if b > a {
        b
    } else {
        a
    }
}

/// `[I, −I]`, the output map of an identity block.
fn unstack<T: Real>(d: usize) -> Layer<T> {
    let mut l = Layer::zeros(d, 2 * d);
    for i in 0..d {
        l.set(i, i, T::one());
        l.set(i, d + i, -T::one());
    }
    l
}

pub(crate) fn block_diag<T: Real>(parts: &[Layer<T>]) -> Layer<T> {
    let rows = parts.iter().map(|l| l.rows).sum();
    let cols = parts.iter().map(|l| l.cols).sum();
    let mut out = Layer::zeros(rows, cols);
    let (mut r0, mut c0) = (0, 0);
    for p in parts {
        for r in 0..p.rows {
            for c in 0..p.cols {
                let x = p.at(r, c);
                if !x.is_zero() {
                    out.set(r0 + r, c0 + c, x.clone());
                }
            }
            out.v[r0 + r] = p.v[r].clone();
        }
        r0 += p.rows;
        c0 += p.cols;
    }
    out
}

/// Stacks networks of equal depth that read the same input.
pub fn stack<T: Real>(nets: &[Network<T>], kind: ScalarKind) -> Result<Network<T>> {
    let depth = nets[0].depth();
    let input = nets[0].input_dim();
    if nets.iter().any(|n| n.depth() != depth || n.input_dim() != input) {
        return Err(Error::InvalidArgument("stacked networks must share depth and input".into()));
    }
    let mut layers = Vec::with_capacity(depth + 1);
    for j in 0..=depth {
        let parts: Vec<Layer<T>> = nets.iter().map(|n| n.layers()[j].clone()).collect();
        if j == 0 {
            let rows = parts.iter().map(|l| l.rows).sum();
            let mut w = Vec::with_capacity(rows * input);
            let mut v = Vec::with_capacity(rows);
            for p in &parts {
                w.extend(p.w.iter().cloned());
                v.extend(p.v.iter().cloned());
            }
            layers.push(Layer::new(rows, input, w, v)?);
        } else {
            layers.push(block_diag(&parts));
        }
    }
    Network::new(layers, kind)
}

impl<T: Real> Circuit<T> {
    pub fn net(n: Network<T>) -> Self {
        Circuit::Net(Arc::new(n))
    }

    pub fn shared(n: Arc<Network<T>>) -> Self {
        Circuit::Net(n)
    }

    pub fn affine(a: Layer<T>, kind: ScalarKind) -> Result<Self> {
        Ok(Circuit::net(Network::new(vec![a], kind)?))
    }

    pub fn kind(&self) -> ScalarKind {
        match self {
            Circuit::Net(n) => n.kind(),
            Circuit::Chain(parts) => parts[0].kind(),
            Circuit::Fan { branches, .. } => branches[0].kind(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Circuit::Net(n) => n.input_dim(),
            Circuit::Chain(parts) => parts[0].input_dim(),
            Circuit::Fan { branches, .. } => branches[0].input_dim(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Circuit::Net(n) => n.output_dim(),
            Circuit::Chain(parts) => parts.last().unwrap().output_dim(),
            Circuit::Fan { branches, head } => match head {
                Some(h) => h.rows,
                None => branches.iter().map(Circuit::output_dim).sum(),
            },
        }
    }

    /// Hidden layers of the materialized network.
    pub fn depth(&self) -> usize {
        match self {
            Circuit::Net(n) => n.depth(),
            Circuit::Chain(parts) => {
                parts.iter().map(Circuit::depth).sum::<usize>() + parts.len() - 1
            }
            Circuit::Fan { branches, .. } => branches.iter().map(Circuit::depth).max().unwrap(),
        }
    }

    fn as_affine(&self) -> Option<&Layer<T>> {
        match self {
            Circuit::Net(n) if n.depth() == 0 => Some(&n.layers()[0]),
            _ => None,
        }
    }

    /// Runs `parts` in order. Nested chains are flattened and depth-0 parts are
    /// folded into their neighbours.
    pub fn chain(parts: Vec<Circuit<T>>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidArgument("empty chain".into()));
        }
        for w in parts.windows(2) {
            if w[0].output_dim() != w[1].input_dim() {
                return Err(Error::DimMismatch {
                    expected: w[1].input_dim(),
                    got: w[0].output_dim(),
                });
            }
        }
        let kind = parts[0].kind();
        let mut flat = Vec::new();
        for p in parts {
            match p {
                Circuit::Chain(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        let mut out: Vec<Circuit<T>> = Vec::new();
        let mut pending: Option<Layer<T>> = None;
        for p in flat {
            if let Some(a) = p.as_affine() {
                let a = a.clone();
                if let Some(prev) = out.pop() {
                    out.push(prev.then_affine(&a)?);
                } else {
                    pending = Some(match pending {
                        Some(pre) => a.after(&pre),
                        None => a,
                    });
                }
                continue;
            }
            let p = match pending.take() {
                Some(pre) => p.after_affine(&pre)?,
                None => p,
            };
            out.push(p);
        }
        if out.is_empty() {
            let a = pending.expect("a nonempty chain leaves something behind");
            return Circuit::affine(a, kind);
        }
        if out.len() == 1 {
            return Ok(out.pop().unwrap());
        }
        Ok(Circuit::Chain(out))
    }

    /// Shared input, concatenated outputs, optional affine head.
    pub fn fan(branches: Vec<Circuit<T>>, head: Option<Layer<T>>) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::InvalidArgument("empty fan".into()));
        }
        let input = branches[0].input_dim();
        if let Some(b) = branches.iter().find(|b| b.input_dim() != input) {
            return Err(Error::DimMismatch {
                expected: input,
                got: b.input_dim(),
            });
        }
        let total: usize = branches.iter().map(Circuit::output_dim).sum();
        if let Some(h) = &head {
            if h.cols != total {
                return Err(Error::DimMismatch {
                    expected: total,
                    got: h.cols,
                });
            }
        }
        let kind = branches[0].kind();
        if branches.iter().all(|b| b.as_affine().is_some()) {
            let parts: Vec<Layer<T>> = branches.iter().map(|b| b.as_affine().unwrap().clone()).collect();
            let mut w = Vec::new();
            let mut v = Vec::new();
            for p in &parts {
                w.extend(p.w.iter().cloned());
                v.extend(p.v.iter().cloned());
            }
            let stacked = Layer::new(total, input, w, v)?;
            let merged = match head {
                Some(h) => h.after(&stacked),
                None => stacked,
            };
            return Circuit::affine(merged, kind);
        }
        Ok(Circuit::Fan {
            branches,
            head: head.map(Arc::new),
        })
    }

    /// `x -> a(self(x))`.
    pub fn then_affine(&self, a: &Layer<T>) -> Result<Self> {
        if a.cols != self.output_dim() {
            return Err(Error::DimMismatch {
                expected: self.output_dim(),
                got: a.cols,
            });
        }
        Ok(match self {
            Circuit::Net(n) => {
                let kind = n.kind();
                Circuit::net(compose(&Network::new(vec![a.clone()], kind)?, n)?)
            }
            Circuit::Chain(parts) => {
                let mut parts = parts.clone();
                let last = parts.pop().unwrap();
                parts.push(last.then_affine(a)?);
                Circuit::Chain(parts)
            }
            Circuit::Fan { branches, head } => {
                let h = match head {
                    Some(h) => a.after(h),
                    None => a.clone(),
                };
                Circuit::Fan {
                    branches: branches.clone(),
                    head: Some(Arc::new(h)),
                }
            }
        })
    }

    /// `x -> self(a(x))`.
    pub fn after_affine(&self, a: &Layer<T>) -> Result<Self> {
        if a.rows != self.input_dim() {
            return Err(Error::DimMismatch {
                expected: self.input_dim(),
                got: a.rows,
            });
        }
        Ok(match self {
            Circuit::Net(n) => {
                let kind = n.kind();
                Circuit::net(compose(n, &Network::new(vec![a.clone()], kind)?)?)
            }
            Circuit::Chain(parts) => {
                let mut parts = parts.clone();
                parts[0] = parts[0].after_affine(a)?;
                Circuit::Chain(parts)
            }
            Circuit::Fan { branches, head } => Circuit::Fan {
                branches: branches
                    .iter()
                    .map(|b| b.after_affine(a))
                    .collect::<Result<Vec<_>>>()?,
                head: head.clone(),
            },
        })
    }

    pub fn evaluate(&self, x: &[T]) -> Result<Vec<T>> {
        self.evaluate_cached(x, &mut Vec::new())
    }

    /// Shared leaves at least this large remember their last few inputs
    /// within one evaluation; repeated inputs skip the forward pass.
    const MEMO_PARAMS: usize = 4096;

    fn evaluate_cached(&self, x: &[T], memo: &mut Vec<(usize, Vec<T>, Vec<T>)>) -> Result<Vec<T>> {
        match self {
            Circuit::Net(n) => {
                if n.param_count() < Self::MEMO_PARAMS {
                    return n.evaluate(x);
                }
                let key = Arc::as_ptr(n) as usize;
                // Inputs the first layer ignores do not belong in the key.
                let first = &n.layers()[0];
                let read: Vec<T> = x
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| (0..first.rows).any(|i| !first.at(i, j).is_zero()))
                    .map(|(_, v)| v.clone())
                    .collect();
                if let Some((_, _, y)) = memo.iter().find(|(k, xi, _)| *k == key && *xi == read) {
                    return Ok(y.clone());
                }
                let y = n.evaluate(x)?;
                memo.push((key, read, y.clone()));
                Ok(y)
            }
            Circuit::Chain(parts) => {
                let mut h = parts[0].evaluate_cached(x, memo)?;
                for p in &parts[1..] {
                    h = p.evaluate_cached(&h, memo)?;
                }
                Ok(h)
            }
            Circuit::Fan { branches, head } => {
                if x.len() != self.input_dim() {
                    return Err(Error::DimMismatch {
                        expected: self.input_dim(),
                        got: x.len(),
                    });
                }
                let mut out = Vec::with_capacity(branches.iter().map(Circuit::output_dim).sum());
                for b in branches {
                    out.extend(b.evaluate_cached(x, memo)?);
                }
                Ok(match head {
                    Some(h) => h.apply(&out),
                    None => out,
                })
            }
        }
    }

    /// Sizes of the materialized network, computed from the structure.
    pub fn stats(&self) -> CircuitStats<T> {
        match self {
            Circuit::Net(n) => {
                let l = n.layers();
                let mut body = T::zero();
                for layer in &l[..l.len() - 1] {
                    body = max_of(body, layer.max_abs());
                }
                CircuitStats {
                    dims: n.dims().to_vec(),
                    body_max: body,
                    last: l[l.len() - 1].clone(),
                }
            }
            Circuit::Chain(parts) => {
                let stats: Vec<CircuitStats<T>> = parts.iter().map(Circuit::stats).collect();
                let mut dims = Vec::new();
                let mut body = T::zero();
                let k = stats.len();
                for (i, st) in stats.iter().enumerate() {
                    let n = st.dims.len();
                    if i == 0 {
                        dims.extend_from_slice(&st.dims[..n - 1]);
                    } else {
                        dims.push(2 * stats[i - 1].dims.last().unwrap());
                        dims.extend_from_slice(&st.dims[1..n - 1]);
                    }
                    body = max_of(body, st.body_max.clone());
                    if i + 1 < k {
                        body = max_of(body, st.last.max_abs());
                    }
                }
                dims.push(*stats[k - 1].dims.last().unwrap());
                CircuitStats {
                    dims,
                    body_max: body,
                    last: stats[k - 1].last.clone(),
                }
            }
            Circuit::Fan { branches, head } => {
                let depth = self.depth();
                let mut hidden = vec![0usize; depth];
                let mut body = T::zero();
                let mut lasts = Vec::with_capacity(branches.len());
                for b in branches {
                    let st = b.stats();
                    let bd = st.depth();
                    let out = *st.dims.last().unwrap();
                    for (j, h) in hidden.iter_mut().enumerate() {
                        *h += if j < bd { st.dims[j + 1] } else { 2 * out };
                    }
                    body = max_of(body, st.body_max.clone());
                    if bd < depth {
                        body = max_of(body, st.last.max_abs());
                        if depth - bd >= 2 {
                            body = max_of(body, T::one());
                        }
                        lasts.push(unstack(out));
                    } else {
                        lasts.push(st.last);
                    }
                }
                let stacked = block_diag(&lasts);
                let last = match head {
                    Some(h) => h.after(&stacked),
                    None => stacked,
                };
                let mut dims = vec![self.input_dim()];
                dims.extend(hidden);
                dims.push(last.rows);
                CircuitStats {
                    dims,
                    body_max: body,
                    last,
                }
            }
        }
    }

    pub fn size_report(&self) -> SizeReport {
        self.stats().size_report()
    }

    /// Builds the dense network described by the structure.
    pub fn to_network(&self) -> Result<Network<T>> {
        match self {
            Circuit::Net(n) => Ok((**n).clone()),
            Circuit::Chain(parts) => {
                let mut acc = parts[0].to_network()?;
                for p in &parts[1..] {
                    let id = identity_net::<T>(acc.output_dim(), acc.kind());
                    let joined = compose(&id, &acc)?;
                    acc = compose(&p.to_network()?, &joined)?;
                }
                Ok(acc)
            }
            Circuit::Fan { branches, head } => {
                let depth = self.depth();
                let kind = self.kind();
                let nets = branches
                    .iter()
                    .map(|b| b.to_network().and_then(|n| n.depth_align(depth)))
                    .collect::<Result<Vec<_>>>()?;
                let stacked = stack(&nets, kind)?;
                match head {
                    Some(h) => compose(&Network::new(vec![(**h).clone()], kind)?, &stacked),
                    None => Ok(stacked),
                }
            }
        }
    }

    /// Converts every leaf, keeping shared leaves shared.
    pub fn cast<U: Real>(&self, kind: ScalarKind) -> Result<Circuit<U>> {
        let mut memo: HashMap<usize, Arc<Network<U>>> = HashMap::new();
        self.cast_memo(kind, &mut memo)
    }

    fn cast_memo<U: Real>(
        &self,
        kind: ScalarKind,
        memo: &mut HashMap<usize, Arc<Network<U>>>,
    ) -> Result<Circuit<U>> {
        Ok(match self {
            Circuit::Net(n) => {
                let key = Arc::as_ptr(n) as usize;
                if let Some(done) = memo.get(&key) {
                    Circuit::Net(done.clone())
                } else {
                    let c = Arc::new(n.cast::<U>(kind)?);
                    memo.insert(key, c.clone());
                    Circuit::Net(c)
                }
            }
            Circuit::Chain(parts) => Circuit::Chain(
                parts
                    .iter()
                    .map(|p| p.cast_memo(kind, memo))
                    .collect::<Result<Vec<_>>>()?,
            ),
            Circuit::Fan { branches, head } => {
                let conv = |x: &T| -> Result<U> { Ok(U::from_rational(&x.to_rational()?, kind)) };
                let head = match head {
                    Some(h) => {
                        let w = h.w.iter().map(conv).collect::<Result<Vec<U>>>()?;
                        let v = h.v.iter().map(conv).collect::<Result<Vec<U>>>()?;
                        Some(Arc::new(Layer::new(h.rows, h.cols, w, v)?))
                    }
                    None => None,
                };
                Circuit::Fan {
                    branches: branches
                        .iter()
                        .map(|b| b.cast_memo(kind, memo))
                        .collect::<Result<Vec<_>>>()?,
                    head,
                }
            }
        })
    }

    /// Number of distinct leaf networks and their total parameter count.
    pub fn leaf_summary(&self) -> (usize, usize) {
        let mut seen: HashMap<usize, usize> = HashMap::new();
        self.collect_leaves(&mut seen);
        (seen.len(), seen.values().sum())
    }

    fn collect_leaves(&self, seen: &mut HashMap<usize, usize>) {
        match self {
            Circuit::Net(n) => {
                seen.insert(Arc::as_ptr(n) as usize, n.param_count());
            }
            Circuit::Chain(parts) => parts.iter().for_each(|p| p.collect_leaves(seen)),
            Circuit::Fan { branches, .. } => branches.iter().for_each(|b| b.collect_leaves(seen)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, rat};
    use num_rational::BigRational;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_net(rng: &mut ChaCha8Rng, dims: &[usize]) -> Network<BigRational> {
        let mut layers = Vec::new();
        for w in dims.windows(2) {
            let mut l = Layer::zeros(w[1], w[0]);
            for x in l.w.iter_mut().chain(l.v.iter_mut()) {
                *x = rat(rng.random_range(-9..=9), rng.random_range(1..=3));
            }
            layers.push(l);
        }
        Network::new(layers, ScalarKind::Rational).unwrap()
    }

    fn random_dims(rng: &mut ChaCha8Rng, input: usize, output: usize) -> Vec<usize> {
        let depth = rng.random_range(0..=3);
        let mut d = vec![input];
        for _ in 0..depth {
            d.push(rng.random_range(1..=4));
        }
        d.push(output);
        d
    }

    fn random_circuit(rng: &mut ChaCha8Rng, input: usize, output: usize, level: u32) -> Circuit<BigRational> {
        let pick = if level == 0 { 0 } else { rng.random_range(0..3) };
        match pick {
            0 => {
                let dims = random_dims(rng, input, output);
                Circuit::net(random_net(rng, &dims))
            }
            1 => {
                let mid = rng.random_range(1..=3);
                let a = random_circuit(rng, input, mid, level - 1);
                let b = random_circuit(rng, mid, output, level - 1);
                Circuit::chain(vec![a, b]).unwrap()
            }
            _ => {
                let k = rng.random_range(1..=3);
                let branches: Vec<_> = (0..k)
                    .map(|_| {
                        let o = rng.random_range(1..=2);
                        random_circuit(rng, input, o, level - 1)
                    })
                    .collect();
                let total: usize = branches.iter().map(Circuit::output_dim).sum();
                let head = if rng.random_bool(0.5) {
                    let mut h = Layer::zeros(output, total);
                    for x in h.w.iter_mut().chain(h.v.iter_mut()) {
                        *x = rat(rng.random_range(-5..=5), 2);
                    }
                    Some(h)
                } else {
                    None
                };
                let c = Circuit::fan(branches, head.clone()).unwrap();
                if head.is_none() && c.output_dim() != output {
                    let mut h = Layer::zeros(output, c.output_dim());
                    for x in h.w.iter_mut() {
                        *x = int(rng.random_range(-2..=2));
                    }
                    c.then_affine(&h).unwrap()
                } else {
                    c
                }
            }
        }
    }

    #[test]
    fn structural_stats_match_materialized_network() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..150 {
            let input = rng.random_range(1..=3);
            let c = random_circuit(&mut rng, input, 2, 3);
            let dense = c.to_network().unwrap();
            let st = c.stats();
            assert_eq!(st.dims, dense.dims().to_vec());
            assert_eq!(c.depth(), dense.depth());
            let report = c.size_report();
            assert_eq!(report, dense.size_report());
            for _ in 0..5 {
                let x: Vec<BigRational> = (0..input).map(|_| rat(rng.random_range(-12..=12), 4)).collect();
                assert_eq!(c.evaluate(&x).unwrap(), dense.evaluate(&x).unwrap());
            }
        }
    }

    #[test]
    fn affine_parts_are_folded() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = Circuit::net(random_net(&mut rng, &[2, 3]));
        let b = Circuit::net(random_net(&mut rng, &[3, 4, 2]));
        let c = Circuit::net(random_net(&mut rng, &[2, 1]));
        let ch = Circuit::chain(vec![a, b, c]).unwrap();
        assert!(matches!(ch, Circuit::Net(_)));
        assert_eq!(ch.depth(), 1);
    }

    #[test]
    fn cast_keeps_sharing() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let leaf = Arc::new(random_net(&mut rng, &[2, 3, 1]));
        let c = Circuit::fan(vec![Circuit::shared(leaf.clone()), Circuit::shared(leaf)], None).unwrap();
        let f = c.cast::<f64>(ScalarKind::F64).unwrap();
        assert_eq!(f.leaf_summary().0, 1);
    }
}
