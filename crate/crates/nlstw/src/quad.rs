//! Adaptive Gauss–Kronrod (7/15) quadrature with a global error heap.

use std::collections::BinaryHeap;

const XK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let dx = h * XK[j];
        let s = f(c - dx) + f(c + dx);
        rk += WK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * h, ((rk - rg) * h).abs())
}

struct Seg {
    a: f64,
    b: f64,
    v: f64,
    e: f64,
}

impl PartialEq for Seg {
    fn eq(&self, o: &Self) -> bool {
        self.e == o.e
    }
}
impl Eq for Seg {}
impl PartialOrd for Seg {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Seg {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.e.total_cmp(&o.e)
    }
}

/// Integrate `f` over `[a, b]` until the error estimate is below
/// `max(abs, rel·|I|)`. Endpoints are never evaluated.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, abs: f64, rel: f64) -> QuadResult {
    if a == b {
        return QuadResult { value: 0.0, error: 0.0, evals: 0 };
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Seg { a, b, v, e });
    let mut total = v;
    let mut err = e;
    let mut evals = 15;
    while err > abs.max(rel * total.abs()) && evals < 200_000 {
        let s = heap.pop().unwrap();
        let m = 0.5 * (s.a + s.b);
        if m <= s.a || m >= s.b {
            heap.push(s);
            break;
        }
        let (v1, e1) = gk15(&mut f, s.a, m);
        let (v2, e2) = gk15(&mut f, m, s.b);
        evals += 30;
        total += v1 + v2 - s.v;
        err += e1 + e2 - s.e;
        heap.push(Seg { a: s.a, b: m, v: v1, e: e1 });
        heap.push(Seg { a: m, b: s.b, v: v2, e: e2 });
    }
    let value: f64 = heap.iter().map(|s| s.v).sum();
    let error: f64 = heap.iter().map(|s| s.e).sum();
    QuadResult { value, error, evals }
}

/// One 15-point Kronrod panel.
pub fn gk<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64) -> f64 {
    gk15(&mut f, a, b).0
}

/// Integral of `f` over `[a, b]` with default tolerances.
pub fn quad<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    integrate(f, a, b, 1e-13, 1e-12).value
}
