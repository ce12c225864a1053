use std::cell::RefCell;
use std::rc::Rc;

use super::params::{ParamId, ParamStore};
use super::tensor::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

/// Gradient contribution per parent, given the upstream gradient.
type BackFn = Box<dyn Fn(&[f64]) -> Vec<Vec<f64>>>;

struct Node {
    shape: Vec<usize>,
    value: Rc<Vec<f64>>,
    parents: Vec<usize>,
    backward: Option<BackFn>,
}

/// Recording of a forward computation.
///
/// Operations append nodes in execution order, so every node's parents have
/// smaller indices; [`Tape::backward`] walks indices in reverse, which visits
/// the graph in reverse topological order exactly once. A tape is
/// single-threaded; build one per training step.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Gradients of one scalar root with respect to tape nodes.
///
/// Interior nodes are consumed during the walk; leaves (inputs and
/// parameters) keep their accumulated gradients.
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    fn push(&self, shape: Vec<usize>, value: Vec<f64>, parents: Vec<usize>, backward: Option<BackFn>) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            shape,
            value: Rc::new(value),
            parents,
            backward,
        });
        Var(nodes.len() - 1)
    }

    /// Register a tensor as a leaf. Gradients accumulate here and survive the
    /// backward pass.
    pub fn leaf(&self, t: &Tensor) -> Var {
        self.push(t.shape().to_vec(), t.data().to_vec(), vec![], None)
    }

    /// Leaf from raw parts.
    pub fn leaf_from(&self, shape: Vec<usize>, data: Vec<f64>) -> Var {
        self.push(shape, data, vec![], None)
    }

    pub fn value(&self, v: Var) -> Tensor {
        let nodes = self.nodes.borrow();
        let n = &nodes[v.0];
        Tensor::new(n.shape.clone(), n.value.as_ref().clone())
    }

    pub fn data(&self, v: Var) -> Rc<Vec<f64>> {
        Rc::clone(&self.nodes.borrow()[v.0].value)
    }

    pub fn shape(&self, v: Var) -> Vec<usize> {
        self.nodes.borrow()[v.0].shape.clone()
    }

    /// Scalar value of a single-element node.
    pub fn scalar(&self, v: Var) -> f64 {
        let nodes = self.nodes.borrow();
        debug_assert_eq!(nodes[v.0].value.len(), 1);
        nodes[v.0].value[0]
    }

    fn dims2(&self, v: Var) -> (usize, usize) {
        let nodes = self.nodes.borrow();
        let n = &nodes[v.0];
        match n.shape.len() {
            0 | 1 => (1, n.value.len()),
            _ => {
                let cols = *n.shape.last().unwrap();
                (n.value.len() / cols, cols)
            }
        }
    }

    // ---- elementwise -------------------------------------------------------

    pub fn add(&self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.data(a), self.data(b));
        assert_eq!(av.len(), bv.len(), "add: length mismatch");
        let out: Vec<f64> = av.iter().zip(bv.iter()).map(|(x, y)| x + y).collect();
        let shape = self.shape(a);
        self.push(
            shape,
            out,
            vec![a.0, b.0],
            Some(Box::new(move |up| vec![up.to_vec(), up.to_vec()])),
        )
    }

    pub fn sub(&self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.data(a), self.data(b));
        assert_eq!(av.len(), bv.len(), "sub: length mismatch");
        let out: Vec<f64> = av.iter().zip(bv.iter()).map(|(x, y)| x - y).collect();
        let shape = self.shape(a);
        self.push(
            shape,
            out,
            vec![a.0, b.0],
            Some(Box::new(move |up| {
                vec![up.to_vec(), up.iter().map(|g| -g).collect()]
            })),
        )
    }

    pub fn mul(&self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.data(a), self.data(b));
        assert_eq!(av.len(), bv.len(), "mul: length mismatch");
        let out: Vec<f64> = av.iter().zip(bv.iter()).map(|(x, y)| x * y).collect();
        let shape = self.shape(a);
        self.push(
            shape,
            out,
            vec![a.0, b.0],
            Some(Box::new(move |up| {
                let da = up.iter().zip(bv.iter()).map(|(g, y)| g * y).collect();
                let db = up.iter().zip(av.iter()).map(|(g, x)| g * x).collect();
                vec![da, db]
            })),
        )
    }

    pub fn neg(&self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    pub fn scale(&self, a: Var, c: f64) -> Var {
        let av = self.data(a);
        let out = av.iter().map(|x| c * x).collect();
        let shape = self.shape(a);
        self.push(
            shape,
            out,
            vec![a.0],
            Some(Box::new(move |up| vec![up.iter().map(|g| c * g).collect()])),
        )
    }

    pub fn add_scalar(&self, a: Var, c: f64) -> Var {
        let av = self.data(a);
        let out = av.iter().map(|x| x + c).collect();
        let shape = self.shape(a);
        self.push(shape, out, vec![a.0], Some(Box::new(|up| vec![up.to_vec()])))
    }

    /// Elementwise power with constant exponent. For non-integer exponents the
    /// input must be positive.
    pub fn powf(&self, a: Var, p: f64) -> Var {
        let av = self.data(a);
        let out: Vec<f64> = av.iter().map(|x| x.powf(p)).collect();
        let shape = self.shape(a);
        self.push(
            shape,
            out,
            vec![a.0],
            Some(Box::new(move |up| {
                vec![up
                    .iter()
                    .zip(av.iter())
                    .map(|(g, x)| g * p * x.powf(p - 1.0))
                    .collect()]
            })),
        )
    }

    pub fn sigmoid(&self, a: Var) -> Var {
        let av = self.data(a);
        let out: Vec<f64> = av.iter().map(|x| 1.0 / (1.0 + (-x).exp())).collect();
        let shape = self.shape(a);
        let cache = Rc::new(out.clone());
        self.push(
            shape,
            out,
            vec![a.0],
            Some(Box::new(move |up| {
                vec![up
                    .iter()
                    .zip(cache.iter())
                    .map(|(g, s)| g * s * (1.0 - s))
                    .collect()]
            })),
        )
    }

    pub fn tanh(&self, a: Var) -> Var {
        let av = self.data(a);
        let out: Vec<f64> = av.iter().map(|x| x.tanh()).collect();
        let shape = self.shape(a);
        let cache = Rc::new(out.clone());
        self.push(
            shape,
            out,
            vec![a.0],
            Some(Box::new(move |up| {
                vec![up
                    .iter()
                    .zip(cache.iter())
                    .map(|(g, t)| g * (1.0 - t * t))
                    .collect()]
            })),
        )
    }

    pub fn relu(&self, a: Var) -> Var {
        self.leaky_relu(a, 0.0)
    }

    pub fn leaky_relu(&self, a: Var, slope: f64) -> Var {
        let av = self.data(a);
        let out: Vec<f64> = av.iter().map(|x| if *x > 0.0 { *x } else { slope * x }).collect();
        let shape = self.shape(a);
        self.push(
            shape,
            out,
            vec![a.0],
            Some(Box::new(move |up| {
                vec![up
                    .iter()
                    .zip(av.iter())
                    .map(|(g, x)| if *x > 0.0 { *g } else { slope * g })
                    .collect()]
            })),
        )
    }

    /// Custom unary op from a value function and its derivative. Used by the
    /// gradcheck negative-control test and available as an extension point.
    pub fn apply_unary(&self, a: Var, f: fn(f64) -> f64, df: fn(f64) -> f64) -> Var {
        let av = self.data(a);
        let out: Vec<f64> = av.iter().map(|x| f(*x)).collect();
        let shape = self.shape(a);
        self.push(
            shape,
            out,
            vec![a.0],
            Some(Box::new(move |up| {
                vec![up.iter().zip(av.iter()).map(|(g, x)| g * df(*x)).collect()]
            })),
        )
    }

    // ---- linear algebra ----------------------------------------------------

    /// Matrix product `a · b` where `a` is viewed as `[m, k]` and `b` as `[k, n]`.
    pub fn matmul(&self, a: Var, b: Var) -> Var {
        let (m, k) = self.dims2(a);
        let (kb, n) = self.dims2(b);
        assert_eq!(k, kb, "matmul: inner dimensions disagree ({k} vs {kb})");
        let (av, bv) = (self.data(a), self.data(b));
        let out = mm(m, k, n, &av, &bv);
        self.push(
            vec![m, n],
            out,
            vec![a.0, b.0],
            Some(Box::new(move |up| {
                let da = mm_abt(m, n, k, up, &bv); // up [m,n] · bᵀ [n,k]
                let db = mm_atb(m, k, n, &av, up); // aᵀ [k,m] · up [m,n]
                vec![da, db]
            })),
        )
    }

    pub fn transpose(&self, a: Var) -> Var {
        let (m, n) = self.dims2(a);
        let av = self.data(a);
        let mut out = vec![0.0; av.len()];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = av[i * n + j];
            }
        }
        self.push(
            vec![n, m],
            out,
            vec![a.0],
            Some(Box::new(move |up| {
                let mut g = vec![0.0; up.len()];
                for j in 0..n {
                    for i in 0..m {
                        g[i * n + j] = up[j * m + i];
                    }
                }
                vec![g]
            })),
        )
    }

    /// `x + b` where `b` is broadcast across the rows of `x`.
    pub fn add_row_broadcast(&self, x: Var, b: Var) -> Var {
        let (m, n) = self.dims2(x);
        let bv = self.data(b);
        assert_eq!(bv.len(), n, "add_row_broadcast: bias width mismatch");
        let xv = self.data(x);
        let mut out = xv.as_ref().clone();
        for i in 0..m {
            for j in 0..n {
                out[i * n + j] += bv[j];
            }
        }
        let shape = self.shape(x);
        self.push(
            shape,
            out,
            vec![x.0, b.0],
            Some(Box::new(move |up| {
                let mut db = vec![0.0; n];
                for i in 0..m {
                    for j in 0..n {
                        db[j] += up[i * n + j];
                    }
                }
                vec![up.to_vec(), db]
            })),
        )
    }

    /// `x ⊙ g` where `g` (shape `[n]`) is broadcast across the rows of `x`.
    pub fn mul_row_broadcast(&self, x: Var, g: Var) -> Var {
        let (m, n) = self.dims2(x);
        let gv = self.data(g);
        assert_eq!(gv.len(), n, "mul_row_broadcast: gain width mismatch");
        let xv = self.data(x);
        let mut out = vec![0.0; xv.len()];
        for i in 0..m {
            for j in 0..n {
                out[i * n + j] = xv[i * n + j] * gv[j];
            }
        }
        let shape = self.shape(x);
        self.push(
            shape,
            out,
            vec![x.0, g.0],
            Some(Box::new(move |up| {
                let mut dx = vec![0.0; up.len()];
                let mut dg = vec![0.0; n];
                for i in 0..m {
                    for j in 0..n {
                        dx[i * n + j] = up[i * n + j] * gv[j];
                        dg[j] += up[i * n + j] * xv[i * n + j];
                    }
                }
                vec![dx, dg]
            })),
        )
    }

    /// Scale each row `i` of `x` by the scalar `s[i]` (`s` has shape `[m, 1]`).
    pub fn mul_col_broadcast(&self, x: Var, s: Var) -> Var {
        let (m, n) = self.dims2(x);
        let sv = self.data(s);
        assert_eq!(sv.len(), m, "mul_col_broadcast: scale length mismatch");
        let xv = self.data(x);
        let mut out = vec![0.0; xv.len()];
        for i in 0..m {
            for j in 0..n {
                out[i * n + j] = xv[i * n + j] * sv[i];
            }
        }
        let shape = self.shape(x);
        self.push(
            shape,
            out,
            vec![x.0, s.0],
            Some(Box::new(move |up| {
                let mut dx = vec![0.0; up.len()];
                let mut ds = vec![0.0; m];
                for i in 0..m {
                    for j in 0..n {
                        dx[i * n + j] = up[i * n + j] * sv[i];
                        ds[i] += up[i * n + j] * xv[i * n + j];
                    }
                }
                vec![dx, ds]
            })),
        )
    }

    // ---- reductions --------------------------------------------------------

    pub fn sum(&self, a: Var) -> Var {
        let av = self.data(a);
        let total: f64 = av.iter().sum();
        let n = av.len();
        self.push(
            vec![1],
            vec![total],
            vec![a.0],
            Some(Box::new(move |up| vec![vec![up[0]; n]])),
        )
    }

    pub fn mean(&self, a: Var) -> Var {
        let av = self.data(a);
        let n = av.len();
        let total: f64 = av.iter().sum();
        self.push(
            vec![1],
            vec![total / n as f64],
            vec![a.0],
            Some(Box::new(move |up| vec![vec![up[0] / n as f64; n]])),
        )
    }

    /// Sum along each row: `[m, n] -> [m, 1]`.
    pub fn row_sum(&self, a: Var) -> Var {
        let (m, n) = self.dims2(a);
        let av = self.data(a);
        let out: Vec<f64> = (0..m).map(|i| av[i * n..(i + 1) * n].iter().sum()).collect();
        self.push(
            vec![m, 1],
            out,
            vec![a.0],
            Some(Box::new(move |up| {
                let mut g = vec![0.0; m * n];
                for i in 0..m {
                    for j in 0..n {
                        g[i * n + j] = up[i];
                    }
                }
                vec![g]
            })),
        )
    }

    // ---- shape ops ---------------------------------------------------------

    pub fn reshape(&self, a: Var, shape: Vec<usize>) -> Var {
        let av = self.data(a);
        assert_eq!(shape.iter().product::<usize>(), av.len(), "reshape: size mismatch");
        self.push(
            shape,
            av.as_ref().clone(),
            vec![a.0],
            Some(Box::new(|up| vec![up.to_vec()])),
        )
    }

    pub fn slice_cols(&self, a: Var, c0: usize, c1: usize) -> Var {
        let (m, n) = self.dims2(a);
        assert!(c0 < c1 && c1 <= n, "slice_cols: range out of bounds");
        let av = self.data(a);
        let w = c1 - c0;
        let mut out = Vec::with_capacity(m * w);
        for i in 0..m {
            out.extend_from_slice(&av[i * n + c0..i * n + c1]);
        }
        self.push(
            vec![m, w],
            out,
            vec![a.0],
            Some(Box::new(move |up| {
                let mut g = vec![0.0; m * n];
                for i in 0..m {
                    g[i * n + c0..i * n + c1].copy_from_slice(&up[i * w..(i + 1) * w]);
                }
                vec![g]
            })),
        )
    }

    pub fn slice_rows(&self, a: Var, r0: usize, r1: usize) -> Var {
        let (m, n) = self.dims2(a);
        assert!(r0 < r1 && r1 <= m, "slice_rows: range out of bounds");
        let av = self.data(a);
        let out = av[r0 * n..r1 * n].to_vec();
        self.push(
            vec![r1 - r0, n],
            out,
            vec![a.0],
            Some(Box::new(move |up| {
                let mut g = vec![0.0; m * n];
                g[r0 * n..r1 * n].copy_from_slice(up);
                vec![g]
            })),
        )
    }

    pub fn concat_cols(&self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let m = self.dims2(parts[0]).0;
        let widths: Vec<usize> = parts
            .iter()
            .map(|p| {
                let (mp, np) = self.dims2(*p);
                assert_eq!(mp, m, "concat_cols: row count mismatch");
                np
            })
            .collect();
        let total: usize = widths.iter().sum();
        let datas: Vec<Rc<Vec<f64>>> = parts.iter().map(|p| self.data(*p)).collect();
        let mut out = Vec::with_capacity(m * total);
        for i in 0..m {
            for (d, w) in datas.iter().zip(widths.iter()) {
                out.extend_from_slice(&d[i * w..(i + 1) * w]);
            }
        }
        let parents = parts.iter().map(|p| p.0).collect();
        self.push(
            vec![m, total],
            out,
            parents,
            Some(Box::new(move |up| {
                let mut grads: Vec<Vec<f64>> = widths.iter().map(|w| vec![0.0; m * w]).collect();
                for i in 0..m {
                    let mut off = 0;
                    for (gi, w) in grads.iter_mut().zip(widths.iter()) {
                        gi[i * w..(i + 1) * w].copy_from_slice(&up[i * total + off..i * total + off + w]);
                        off += w;
                    }
                }
                grads
            })),
        )
    }

    pub fn concat_rows(&self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let n = self.dims2(parts[0]).1;
        let heights: Vec<usize> = parts
            .iter()
            .map(|p| {
                let (mp, np) = self.dims2(*p);
                assert_eq!(np, n, "concat_rows: column count mismatch");
                mp
            })
            .collect();
        let total: usize = heights.iter().sum();
        let mut out = Vec::with_capacity(total * n);
        for p in parts {
            out.extend_from_slice(&self.data(*p));
        }
        let parents = parts.iter().map(|p| p.0).collect();
        let heights_b = heights.clone();
        self.push(
            vec![total, n],
            out,
            parents,
            Some(Box::new(move |up| {
                let mut grads = Vec::with_capacity(heights_b.len());
                let mut off = 0;
                for h in &heights_b {
                    grads.push(up[off * n..(off + h) * n].to_vec());
                    off += h;
                }
                grads
            })),
        )
    }

    // ---- softmax -----------------------------------------------------------

    /// Row-wise softmax over the full row.
    pub fn softmax_rows(&self, a: Var) -> Var {
        self.softmax_impl(a, false)
    }

    /// Row-wise softmax restricted to the causal prefix: row `i` is a
    /// distribution over columns `0..=i` and exactly zero beyond. Gradients
    /// never flow to masked entries, so outputs are invariant to any change
    /// in strictly-future columns.
    pub fn causal_softmax(&self, a: Var) -> Var {
        self.softmax_impl(a, true)
    }

    fn softmax_impl(&self, a: Var, causal: bool) -> Var {
        let (m, n) = self.dims2(a);
        if causal {
            assert_eq!(m, n, "causal_softmax: square score matrix required");
        }
        let av = self.data(a);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let hi = if causal { i + 1 } else { n };
            let row = &av[i * n..i * n + hi];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for j in 0..hi {
                let e = (row[j] - max).exp();
                out[i * n + j] = e;
                z += e;
            }
            for j in 0..hi {
                out[i * n + j] /= z;
            }
        }
        let cache = Rc::new(out.clone());
        self.push(
            vec![m, n],
            out,
            vec![a.0],
            Some(Box::new(move |up| {
                let mut g = vec![0.0; m * n];
                for i in 0..m {
                    let hi = if causal { i + 1 } else { n };
                    let arow = &cache[i * n..i * n + hi];
                    let urow = &up[i * n..i * n + hi];
                    let dot: f64 = arow.iter().zip(urow.iter()).map(|(a, u)| a * u).sum();
                    for j in 0..hi {
                        g[i * n + j] = arow[j] * (urow[j] - dot);
                    }
                }
                vec![g]
            })),
        )
    }

    // ---- backward ----------------------------------------------------------

    /// Reverse pass from a scalar root. Interior gradients are consumed as
    /// the walk proceeds; leaf gradients remain readable via
    /// [`Gradients::get`].
    pub fn backward(&self, root: Var) -> Gradients {
        let nodes = self.nodes.borrow();
        assert_eq!(nodes[root.0].value.len(), 1, "backward: root must be scalar");
        let mut grads: Vec<Option<Vec<f64>>> = (0..nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(vec![1.0]);
        for i in (0..=root.0).rev() {
            if nodes[i].backward.is_none() {
                continue; // leaf: keep accumulated gradient
            }
            let Some(up) = grads[i].take() else { continue };
            let back = nodes[i].backward.as_ref().unwrap();
            let contribs = back(&up);
            debug_assert_eq!(contribs.len(), nodes[i].parents.len());
            for (&p, contrib) in nodes[i].parents.iter().zip(contribs.into_iter()) {
                match &mut grads[p] {
                    Some(acc) => {
                        for (a, c) in acc.iter_mut().zip(contrib.iter()) {
                            *a += c;
                        }
                    }
                    slot @ None => *slot = Some(contrib),
                }
            }
        }
        Gradients { grads }
    }
}

/// Binds parameters from a [`ParamStore`] onto a tape, remembering which
/// parameter produced which leaf so optimizers and gradcheck can map
/// gradients back.
pub struct Session<'a> {
    pub tape: &'a Tape,
    store: &'a ParamStore,
    bound: RefCell<Vec<Option<Var>>>,
}

impl<'a> Session<'a> {
    pub fn new(tape: &'a Tape, store: &'a ParamStore) -> Self {
        Session {
            tape,
            store,
            bound: RefCell::new(vec![None; store.len()]),
        }
    }

    /// Leaf var for a parameter; bound at most once per session.
    pub fn param(&self, id: ParamId) -> Var {
        let mut bound = self.bound.borrow_mut();
        if let Some(v) = bound[id.index()] {
            return v;
        }
        let v = self.tape.leaf(self.store.get(id));
        bound[id.index()] = Some(v);
        v
    }

    /// All `(parameter, leaf)` pairs bound so far.
    pub fn bound(&self) -> Vec<(ParamId, Var)> {
        self.bound
            .borrow()
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|var| (ParamId::from_index(i), var)))
            .collect()
    }
}

// Raw kernels. `mm` is the classic i-k-j loop so the inner loop runs down
// contiguous rows of both `b` and `c`.

/// `c[m,n] = a[m,k] · b[k,n]`
pub(crate) fn mm(m: usize, k: usize, n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let crow = &mut c[i * n..(i + 1) * n];
        for (p, &av) in arow.iter().enumerate() {
            let brow = &b[p * n..(p + 1) * n];
            for j in 0..n {
                crow[j] += av * brow[j];
            }
        }
    }
    c
}

/// `c[m,k] = a[m,n] · b[k,n]ᵀ`
fn mm_abt(m: usize, n: usize, k: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; m * k];
    for i in 0..m {
        let arow = &a[i * n..(i + 1) * n];
        for j in 0..k {
            let brow = &b[j * n..(j + 1) * n];
            let mut acc = 0.0;
            for p in 0..n {
                acc += arow[p] * brow[p];
            }
            c[i * k + j] = acc;
        }
    }
    c
}

/// `c[k,n] = a[m,k]ᵀ · b[m,n]`
fn mm_atb(m: usize, k: usize, n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; k * n];
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let brow = &b[i * n..(i + 1) * n];
        for (p, &av) in arow.iter().enumerate() {
            let crow = &mut c[p * n..(p + 1) * n];
            for j in 0..n {
                crow[j] += av * brow[j];
            }
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: Vec<usize>, data: Vec<f64>) -> Tensor {
        Tensor::new(shape, data)
    }

    #[test]
    fn matmul_identity() {
        let tape = Tape::new();
        let x = tape.leaf(&t(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]));
        let eye = tape.leaf(&t(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]));
        let y = tape.matmul(x, eye);
        assert_eq!(tape.value(y).data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn matmul_grads_match_analytic() {
        // f = sum(a·b): df/da = 1·bᵀ, df/db = aᵀ·1
        let tape = Tape::new();
        let a = tape.leaf(&t(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]));
        let b = tape.leaf(&t(vec![2, 2], vec![5.0, 6.0, 7.0, 8.0]));
        let y = tape.matmul(a, b);
        let s = tape.sum(y);
        let g = tape.backward(s);
        assert_eq!(g.get(a).unwrap(), &[11.0, 15.0, 11.0, 15.0]);
        assert_eq!(g.get(b).unwrap(), &[4.0, 4.0, 6.0, 6.0]);
    }

    #[test]
    fn sum_and_mean_grads() {
        let tape = Tape::new();
        let x = tape.leaf(&t(vec![4], vec![1.0, 2.0, 3.0, 4.0]));
        let m = tape.mean(x);
        let g = tape.backward(m);
        assert_eq!(g.get(x).unwrap(), &[0.25; 4]);
    }

    #[test]
    fn causal_softmax_rows_are_prefix_distributions() {
        let tape = Tape::new();
        let s = tape.leaf(&t(vec![3, 3], vec![0.0; 9]));
        let a = tape.causal_softmax(s);
        let v = tape.value(a);
        let d = v.data();
        assert_eq!(d[0], 1.0);
        assert_eq!(&d[1..3], &[0.0, 0.0]);
        assert!((d[3] - 0.5).abs() < 1e-15 && (d[4] - 0.5).abs() < 1e-15);
        assert_eq!(d[5], 0.0);
        for j in 6..9 {
            assert!((d[j] - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn causal_softmax_ignores_future_columns_exactly() {
        let run = |future: f64| {
            let tape = Tape::new();
            let mut data = vec![0.3, future, future, 0.1, -0.2, future, 0.4, 0.0, 0.9];
            data[1] = future;
            let s = tape.leaf(&t(vec![3, 3], data));
            let a = tape.causal_softmax(s);
            tape.value(a).into_data()
        };
        let a = run(0.0);
        let b = run(1e9);
        // rows 0 and 1 must be bitwise identical regardless of future entries
        assert_eq!(&a[0..3], &b[0..3]);
        assert_eq!(&a[3..6], &b[3..6]);
    }

    #[test]
    fn reused_input_accumulates_gradient() {
        // f = x*x: df/dx = 2x
        let tape = Tape::new();
        let x = tape.leaf(&t(vec![1], vec![3.0]));
        let y = tape.mul(x, x);
        let s = tape.sum(y);
        let g = tape.backward(s);
        assert_eq!(g.get(x).unwrap(), &[6.0]);
    }

    #[test]
    fn slice_concat_roundtrip_gradient() {
        let tape = Tape::new();
        let x = tape.leaf(&t(vec![2, 4], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]));
        let lo = tape.slice_cols(x, 0, 2);
        let hi = tape.slice_cols(x, 2, 4);
        let back = tape.concat_cols(&[lo, hi]);
        let s = tape.sum(back);
        let g = tape.backward(s);
        assert_eq!(g.get(x).unwrap(), &[1.0; 8]);
        assert_eq!(tape.value(back).data(), tape.value(x).data());
    }
}
