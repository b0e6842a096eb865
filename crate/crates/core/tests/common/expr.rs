//! Random op compositions evaluated both on the tape and by an f64
//! interpreter, for finite-difference checks of backward.

use dehaze_adv::{Shape, Tape, Tensor, Var};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{central_diff, concat_channels, conv2d_brute, max_rel_err, random_tensor, to_f64};

pub const FD_STEP: f64 = 1e-3;
/// Compositions whose relu/clamp inputs come closer than this to a kink are
/// redrawn: a finite difference straddling a kink measures neither side.
pub const KINK_MARGIN: f64 = 2e-2;

/// A random differentiable expression over fresh leaf tensors.
#[derive(Debug, Clone)]
pub enum Expr {
    Leaf(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    /// `a / (b² + 1)`, which keeps the denominator away from zero.
    Div(Box<Expr>, Box<Expr>),
    Relu(Box<Expr>),
    Clamp01(Box<Expr>),
    Scale(Box<Expr>, f32),
    Offset(Box<Expr>, f32),
    Square(Box<Expr>),
    Concat(Box<Expr>, Box<Expr>),
    Conv { input: Box<Expr>, weight: usize, bias: usize, stride: usize, pad: usize },
}

struct Builder<'a> {
    rng: &'a mut ChaCha8Rng,
    leaves: Vec<Tensor>,
}

impl Builder<'_> {
    fn leaf(&mut self, s: Shape, lo: f32, hi: f32) -> usize {
        self.leaves.push(random_tensor(self.rng, s, lo, hi));
        self.leaves.len() - 1
    }

    fn gen(&mut self, depth: usize, s: Shape) -> Expr {
        if depth == 0 {
            return Expr::Leaf(self.leaf(s, -1.0, 1.0));
        }
        let d = depth - 1;
        let b = |e: Expr| Box::new(e);
        match self.rng.gen_range(0..12) {
            0 => Expr::Add(b(self.gen(d, s)), b(self.gen(d, s))),
            1 => Expr::Sub(b(self.gen(d, s)), b(self.gen(d, s))),
            2 => Expr::Mul(b(self.gen(d, s)), b(self.gen(d, s))),
            3 => Expr::Div(b(self.gen(d, s)), b(self.gen(d, s))),
            4 => Expr::Relu(b(self.gen(d, s))),
            5 => Expr::Clamp01(b(self.gen(d, s))),
            6 => {
                let f = self.rng.gen_range(-2.0..2.0);
                Expr::Scale(b(self.gen(d, s)), f)
            }
            7 => {
                let o = self.rng.gen_range(-1.0..1.0);
                Expr::Offset(b(self.gen(d, s)), o)
            }
            8 => Expr::Square(b(self.gen(d, s))),
            9 if s.c >= 2 => {
                let c1 = self.rng.gen_range(1..s.c);
                let first = self.gen(d, Shape { c: c1, ..s });
                let second = self.gen(d, Shape { c: s.c - c1, ..s });
                Expr::Concat(b(first), b(second))
            }
            _ => {
                // Pick geometry so that the output has exactly shape `s`.
                let stride = self.rng.gen_range(1..=2);
                let k = self.rng.gen_range(1..=3);
                let pad = self.rng.gen_range(0..=1);
                let ih = ((s.h - 1) * stride + k).saturating_sub(2 * pad).max(1);
                let iw = ((s.w - 1) * stride + k).saturating_sub(2 * pad).max(1);
                let ic = self.rng.gen_range(1..=3);
                let input_shape = Shape::new(s.n, ic, ih, iw);
                if (ih + 2 * pad - k) / stride + 1 != s.h || (iw + 2 * pad - k) / stride + 1 != s.w || ih > 6 || iw > 6 {
                    return Expr::Relu(b(self.gen(d, s)));
                }
                let input = self.gen(d, input_shape);
                let weight = self.leaf(Shape::new(s.c, ic, k, k), -0.7, 0.7);
                let bias = self.leaf(Shape::new(s.c, 1, 1, 1), -0.5, 0.5);
                Expr::Conv { input: b(input), weight, bias, stride, pad }
            }
        }
    }
}

fn record(tape: &mut Tape, leaves: &[Var], e: &Expr) -> Var {
    match e {
        Expr::Leaf(i) => leaves[*i],
        Expr::Add(a, b) => {
            let (a, b) = (record(tape, leaves, a), record(tape, leaves, b));
            tape.add(a, b).unwrap()
        }
        Expr::Sub(a, b) => {
            let (a, b) = (record(tape, leaves, a), record(tape, leaves, b));
            tape.sub(a, b).unwrap()
        }
        Expr::Mul(a, b) => {
            let (a, b) = (record(tape, leaves, a), record(tape, leaves, b));
            tape.mul(a, b).unwrap()
        }
        Expr::Div(a, b) => {
            let a = record(tape, leaves, a);
            let b = record(tape, leaves, b);
            let b2 = tape.square(b);
            let den = tape.offset(b2, 1.0);
            tape.div(a, den).unwrap()
        }
        Expr::Relu(a) => {
            let a = record(tape, leaves, a);
            tape.relu(a)
        }
        Expr::Clamp01(a) => {
            let a = record(tape, leaves, a);
            tape.clamp01(a)
        }
        Expr::Scale(a, f) => {
            let a = record(tape, leaves, a);
            tape.scale(a, *f)
        }
        Expr::Offset(a, o) => {
            let a = record(tape, leaves, a);
            tape.offset(a, *o)
        }
        Expr::Square(a) => {
            let a = record(tape, leaves, a);
            tape.square(a)
        }
        Expr::Concat(a, b) => {
            let (a, b) = (record(tape, leaves, a), record(tape, leaves, b));
            tape.concat(&[a, b]).unwrap()
        }
        Expr::Conv { input, weight, bias, stride, pad } => {
            let x = record(tape, leaves, input);
            tape.conv2d(x, leaves[*weight], Some(leaves[*bias]), *stride, *pad).unwrap()
        }
    }
}

/// Evaluate in `f64`; `margin` tracks the closest approach to a kink.
fn eval(e: &Expr, vals: &[(Vec<f64>, Shape)], margin: &mut f64) -> (Vec<f64>, Shape) {
    let zip = |a: (Vec<f64>, Shape), b: (Vec<f64>, Shape), f: fn(f64, f64) -> f64| {
        assert_eq!(a.1, b.1);
        (a.0.iter().zip(&b.0).map(|(&x, &y)| f(x, y)).collect(), a.1)
    };
    let map = |a: (Vec<f64>, Shape), f: &dyn Fn(f64) -> f64| (a.0.into_iter().map(f).collect(), a.1);
    match e {
        Expr::Leaf(i) => vals[*i].clone(),
        Expr::Add(a, b) => zip(eval(a, vals, margin), eval(b, vals, margin), |x, y| x + y),
        Expr::Sub(a, b) => zip(eval(a, vals, margin), eval(b, vals, margin), |x, y| x - y),
        Expr::Mul(a, b) => zip(eval(a, vals, margin), eval(b, vals, margin), |x, y| x * y),
        Expr::Div(a, b) => zip(eval(a, vals, margin), eval(b, vals, margin), |x, y| x / (y * y + 1.0)),
        Expr::Relu(a) => {
            let v = eval(a, vals, margin);
            for x in &v.0 {
                *margin = margin.min(x.abs());
            }
            map(v, &|x| x.max(0.0))
        }
        Expr::Clamp01(a) => {
            let v = eval(a, vals, margin);
            for x in &v.0 {
                *margin = margin.min(x.abs()).min((x - 1.0).abs());
            }
            map(v, &|x| x.clamp(0.0, 1.0))
        }
        Expr::Scale(a, f) => {
            let f = *f as f64;
            map(eval(a, vals, margin), &|x| x * f)
        }
        Expr::Offset(a, o) => {
            let o = *o as f64;
            map(eval(a, vals, margin), &|x| x + o)
        }
        Expr::Square(a) => map(eval(a, vals, margin), &|x| x * x),
        Expr::Concat(a, b) => {
            let (a, b) = (eval(a, vals, margin), eval(b, vals, margin));
            concat_channels(&[(&a.0, a.1), (&b.0, b.1)])
        }
        Expr::Conv { input, weight, bias, stride, pad } => {
            let x = eval(input, vals, margin);
            let (w, ws) = &vals[*weight];
            let (b, _) = &vals[*bias];
            conv2d_brute(&x.0, x.1, w, *ws, Some(b), *stride, *pad)
        }
    }
}

/// Build a composition whose kinks are comfortably away from every probe.
pub fn safe_composition(rng: &mut ChaCha8Rng) -> (Expr, Vec<Tensor>, Tensor) {
    loop {
        let depth = rng.gen_range(1..=4);
        let s = Shape::new(rng.gen_range(1..=2), rng.gen_range(1..=4), rng.gen_range(1..=6), rng.gen_range(1..=6));
        let mut builder = Builder { rng: &mut *rng, leaves: Vec::new() };
        let expr = builder.gen(depth, s);
        let leaves = builder.leaves;
        let weights = random_tensor(rng, s, -1.0, 1.0);
        let vals: Vec<_> = leaves.iter().map(|t| (to_f64(t), t.shape())).collect();
        let mut margin = f64::INFINITY;
        eval(&expr, &vals, &mut margin);
        if margin > KINK_MARGIN {
            return (expr, leaves, weights);
        }
    }
}

/// Draw one composition (depth ≤ 4, dims ≤ 6) and return the worst
/// relative error of backward against central differences, with a
/// description of the expression.
pub fn composition_error(rng: &mut ChaCha8Rng) -> (f64, String) {
    let (expr, leaves, weights) = safe_composition(rng);

    let mut tape = Tape::new();
    let vars: Vec<Var> = leaves.iter().map(|t| tape.param(t.clone())).collect();
    let out = record(&mut tape, &vars, &expr);
    let r = tape.constant(weights.clone());
    let weighted = tape.mul(out, r).unwrap();
    let loss = tape.sum(weighted);
    let grads = tape.backward(loss).unwrap();

    let shapes: Vec<Shape> = leaves.iter().map(Tensor::shape).collect();
    let flat: Vec<f64> = leaves.iter().flat_map(to_f64).collect();
    let rw = to_f64(&weights);
    let f = |x: &[f64]| {
        let mut vals = Vec::new();
        let mut off = 0;
        for s in &shapes {
            vals.push((x[off..off + s.numel()].to_vec(), *s));
            off += s.numel();
        }
        let mut margin = f64::INFINITY;
        let (y, _) = eval(&expr, &vals, &mut margin);
        y.iter().zip(&rw).map(|(a, b)| a * b).sum()
    };
    let fd = central_diff(f, &flat, FD_STEP);

    let got: Vec<f32> = vars
        .iter()
        .zip(&shapes)
        .flat_map(|(&v, s)| grads.get(v).map_or_else(|| vec![0.0; s.numel()], |g| g.data().to_vec()))
        .collect();
    (max_rel_err(&got, &fd), format!("{expr:?}"))
}
