use std::cell::RefCell;
use std::rc::Rc;

use crate::numerics::Matrix;

use super::{broadcast_col, broadcast_row, hcat_values, slice_cols, Tensor, Unary};

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Const,
    MatMul(usize, usize),
    MatMulT(usize, usize),
    Add(usize, usize),
    AddRow(usize, usize),
    MulRow(usize, usize),
    AddCol(usize, usize),
    MulCol(usize, usize),
    Shift(usize),
    Scale(usize, f64),
    Map(usize, Unary),
    SumRows(usize),
    SumCols(usize),
    Cols(usize, usize),
    HCat(Vec<usize>),
}

struct Node {
    op: Op,
    value: Rc<Matrix>,
    needs_grad: bool,
}

/// Records tensor operations for one reverse sweep.
///
/// A tape is single-use: build the graph from leaves, then call
/// [`Tape::gradients`] on the scalar output.
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// A tensor recorded on a [`Tape`].
#[derive(Clone)]
pub struct Var {
    tape: Rc<Tape>,
    id: usize,
    value: Rc<Matrix>,
    needs_grad: bool,
}

/// Adjoints of every recorded node.
pub struct Gradients {
    adj: Vec<Option<Matrix>>,
}

impl Gradients {
    /// Gradient of the output with respect to `v`, or `None` when `v` does not
    /// influence it.
    pub fn of(&self, v: &Var) -> Option<&Matrix> {
        self.adj.get(v.id).and_then(Option::as_ref)
    }
}

impl Tape {
    #[allow(clippy::new_ret_no_self)]
    pub fn new() -> Rc<Tape> {
        Rc::new(Tape {
            nodes: RefCell::new(Vec::new()),
        })
    }

    fn push(self: &Rc<Self>, op: Op, value: Matrix, needs_grad: bool) -> Var {
        let value = Rc::new(value);
        let mut nodes = self.nodes.borrow_mut();
        let id = nodes.len();
        nodes.push(Node {
            op,
            value: Rc::clone(&value),
            needs_grad,
        });
        Var {
            tape: Rc::clone(self),
            id,
            value,
            needs_grad,
        }
    }

    /// A trainable input.
    pub fn leaf(self: &Rc<Self>, m: Matrix) -> Var {
        self.push(Op::Leaf, m, true)
    }

    /// An input that needs no gradient.
    pub fn constant_var(self: &Rc<Self>, m: Matrix) -> Var {
        self.push(Op::Const, m, false)
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Reverse sweep from a `1×1` output.
    pub fn gradients(&self, out: &Var) -> Gradients {
        assert_eq!(out.value.shape(), (1, 1), "reverse sweep needs a scalar output");
        let nodes = self.nodes.borrow();
        let mut adj: Vec<Option<Matrix>> = vec![None; nodes.len()];
        adj[out.id] = Some(Matrix::filled(1, 1, 1.0));
        for id in (0..=out.id).rev() {
            let node = &nodes[id];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = adj[id].take() else { continue };
            backward(&nodes, &node.op, &node.value, &g, &mut adj);
            adj[id] = Some(g);
        }
        Gradients { adj }
    }
}

fn accumulate(adj: &mut [Option<Matrix>], nodes: &[Node], id: usize, g: Matrix) {
    if !nodes[id].needs_grad {
        return;
    }
    match &mut adj[id] {
        Some(a) => a.add_assign(&g),
        slot => *slot = Some(g),
    }
}

fn wants(nodes: &[Node], id: usize) -> bool {
    nodes[id].needs_grad
}

fn backward(nodes: &[Node], op: &Op, out: &Matrix, g: &Matrix, adj: &mut [Option<Matrix>]) {
    let val = |id: usize| -> &Matrix { &nodes[id].value };
    match *op {
        Op::Leaf | Op::Const => {}
        Op::MatMul(a, b) => {
            if wants(nodes, a) {
                accumulate(adj, nodes, a, g.matmul_t(val(b)));
            }
            if wants(nodes, b) {
                accumulate(adj, nodes, b, val(a).t_matmul(g));
            }
        }
        Op::MatMulT(a, b) => {
            if wants(nodes, a) {
                accumulate(adj, nodes, a, g.matmul(val(b)));
            }
            if wants(nodes, b) {
                accumulate(adj, nodes, b, g.t_matmul(val(a)));
            }
        }
        Op::Add(a, b) => {
            accumulate(adj, nodes, a, g.clone());
            accumulate(adj, nodes, b, g.clone());
        }
        Op::AddRow(x, r) => {
            accumulate(adj, nodes, x, g.clone());
            if wants(nodes, r) {
                accumulate(adj, nodes, r, Tensor::sum_cols(g));
            }
        }
        Op::AddCol(x, c) => {
            accumulate(adj, nodes, x, g.clone());
            if wants(nodes, c) {
                accumulate(adj, nodes, c, Tensor::sum_rows(g));
            }
        }
        Op::MulRow(x, r) => {
            if wants(nodes, x) {
                let mut gx = g.clone();
                broadcast_row(&mut gx, val(r), |a, b| *a *= b);
                accumulate(adj, nodes, x, gx);
            }
            if wants(nodes, r) {
                let gr = Tensor::sum_cols(&hadamard(g, val(x)));
                accumulate(adj, nodes, r, gr);
            }
        }
        Op::MulCol(x, c) => {
            if wants(nodes, x) {
                let mut gx = g.clone();
                broadcast_col(&mut gx, val(c), |a, b| *a *= b);
                accumulate(adj, nodes, x, gx);
            }
            if wants(nodes, c) {
                let gc = Tensor::sum_rows(&hadamard(g, val(x)));
                accumulate(adj, nodes, c, gc);
            }
        }
        Op::Shift(x) => accumulate(adj, nodes, x, g.clone()),
        Op::Scale(x, c) => accumulate(adj, nodes, x, g.scaled(c)),
        Op::Map(x, f) => {
            let gx = match f {
                // reuse the forward output where the derivative is expressible through it
                Unary::Exp => hadamard(g, out),
                _ => {
                    let d = val(x).map(|v| f.d1(v));
                    hadamard(g, &d)
                }
            };
            accumulate(adj, nodes, x, gx);
        }
        Op::SumRows(x) => {
            let (r, c) = val(x).shape();
            let mut gx = Matrix::zeros(r, c);
            broadcast_col(&mut gx, g, |a, b| *a = b);
            accumulate(adj, nodes, x, gx);
        }
        Op::SumCols(x) => {
            let (r, c) = val(x).shape();
            let mut gx = Matrix::zeros(r, c);
            broadcast_row(&mut gx, g, |a, b| *a = b);
            accumulate(adj, nodes, x, gx);
        }
        Op::Cols(x, start) => {
            let (r, c) = val(x).shape();
            let len = g.cols();
            let mut gx = Matrix::zeros(r, c);
            for i in 0..r {
                gx.row_mut(i)[start..start + len].copy_from_slice(g.row(i));
            }
            accumulate(adj, nodes, x, gx);
        }
        Op::HCat(ref parts) => {
            let mut start = 0;
            for &p in parts {
                let len = val(p).cols();
                if wants(nodes, p) {
                    accumulate(adj, nodes, p, slice_cols(g.data(), g.rows(), g.cols(), start, len));
                }
                start += len;
            }
        }
    }
}

fn hadamard(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.shape(), b.shape());
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect();
    Matrix::from_vec(a.rows(), a.cols(), data)
}

impl Var {
    fn unary(&self, op: Op, value: Matrix) -> Var {
        self.tape.push(op, value, self.needs_grad)
    }

    fn binary(&self, rhs: &Var, op: Op, value: Matrix) -> Var {
        debug_assert!(Rc::ptr_eq(&self.tape, &rhs.tape), "operands live on different tapes");
        self.tape.push(op, value, self.needs_grad || rhs.needs_grad)
    }

    pub fn id(&self) -> usize {
        self.id
    }
}

impl Tensor for Var {
    fn value(&self) -> &Matrix {
        &self.value
    }

    fn constant(&self, m: Matrix) -> Self {
        self.tape.constant_var(m)
    }

    fn matmul(&self, rhs: &Self) -> Self {
        let v = self.value.matmul(&rhs.value);
        self.binary(rhs, Op::MatMul(self.id, rhs.id), v)
    }

    fn matmul_t(&self, rhs: &Self) -> Self {
        let v = self.value.matmul_t(&rhs.value);
        self.binary(rhs, Op::MatMulT(self.id, rhs.id), v)
    }

    fn add(&self, rhs: &Self) -> Self {
        let v = Tensor::add(&*self.value, &*rhs.value);
        self.binary(rhs, Op::Add(self.id, rhs.id), v)
    }

    fn add_row(&self, row: &Self) -> Self {
        let v = Tensor::add_row(&*self.value, &*row.value);
        self.binary(row, Op::AddRow(self.id, row.id), v)
    }

    fn mul_row(&self, row: &Self) -> Self {
        let v = Tensor::mul_row(&*self.value, &*row.value);
        self.binary(row, Op::MulRow(self.id, row.id), v)
    }

    fn add_col(&self, col: &Self) -> Self {
        let v = Tensor::add_col(&*self.value, &*col.value);
        self.binary(col, Op::AddCol(self.id, col.id), v)
    }

    fn mul_col(&self, col: &Self) -> Self {
        let v = Tensor::mul_col(&*self.value, &*col.value);
        self.binary(col, Op::MulCol(self.id, col.id), v)
    }

    fn add_const(&self, m: &Matrix) -> Self {
        let v = Tensor::add(&*self.value, m);
        self.unary(Op::Shift(self.id), v)
    }

    fn add_scalar(&self, c: f64) -> Self {
        let v = self.value.map(|x| x + c);
        self.unary(Op::Shift(self.id), v)
    }

    fn scale(&self, c: f64) -> Self {
        let v = self.value.scaled(c);
        self.unary(Op::Scale(self.id, c), v)
    }

    fn map(&self, f: Unary) -> Self {
        let v = Tensor::map(&*self.value, f);
        self.unary(Op::Map(self.id, f), v)
    }

    fn sum_rows(&self) -> Self {
        let v = Tensor::sum_rows(&*self.value);
        self.unary(Op::SumRows(self.id), v)
    }

    fn sum_cols(&self) -> Self {
        let v = Tensor::sum_cols(&*self.value);
        self.unary(Op::SumCols(self.id), v)
    }

    fn cols(&self, start: usize, len: usize) -> Self {
        let v = Tensor::cols(&*self.value, start, len);
        self.unary(Op::Cols(self.id, start), v)
    }

    fn hcat(parts: &[Self]) -> Self {
        let first = parts.first().expect("hcat of no parts");
        let v = hcat_values(parts.iter().map(|p| &*p.value));
        let needs = parts.iter().any(|p| p.needs_grad);
        first
            .tape
            .push(Op::HCat(parts.iter().map(|p| p.id).collect()), v, needs)
    }
}
