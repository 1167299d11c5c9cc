//! Gauss rules and nodal Lagrange bases on the reference interval `[0, 1]`.

use std::f64::consts::PI;

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = if (x * x - 1.0).abs() < 1e-300 {
        0.5 * nf * (nf + 1.0) * x.powi(n as i32 + 1)
    } else {
        nf * (x * p1 - p0) / (x * x - 1.0)
    };
    (p1, dp)
}

/// Gauss–Legendre rule with `n` points mapped to `[0, 1]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss rule needs at least one point");
        let mut points = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre(n, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            points.push(0.5 * (1.0 - x));
            weights.push(0.5 * w);
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| points[a].total_cmp(&points[b]));
        Self {
            points: idx.iter().map(|&i| points[i]).collect(),
            weights: idx.iter().map(|&i| weights[i]).collect(),
        }
    }

    /// Rule exact for polynomials of degree `deg`.
    pub fn exact_for(deg: usize) -> Self {
        Self::new(deg / 2 + 1)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points and weights on `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let len = b - a;
        self.points
            .iter()
            .zip(&self.weights)
            .map(move |(&p, &w)| (a + len * p, len * w))
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// Gauss–Lobatto nodes on `[0, 1]` (`n >= 2` points, endpoints included).
pub fn gauss_lobatto_nodes(n: usize) -> Vec<f64> {
    assert!(n >= 2);
    let deg = n - 1;
    let mut nodes = vec![-1.0];
    // interior nodes are the roots of P'_{deg}
    for i in 1..deg {
        let mut x = -(PI * i as f64 / deg as f64).cos();
        for _ in 0..100 {
            // Newton on P'_deg using (1 - x^2) P'' = 2x P' - deg(deg+1) P
            let (p, dp) = legendre(deg, x);
            let d2p = (2.0 * x * dp - (deg * (deg + 1)) as f64 * p) / (1.0 - x * x);
            let dx = dp / d2p;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes.push(x);
    }
    nodes.push(1.0);
    nodes.iter().map(|&x| 0.5 * (x + 1.0)).collect()
}

/// Nodal points used for a polynomial space of degree `p` on `[0, 1]`.
/// Degree zero uses the midpoint.
pub fn nodal_points(p: usize) -> Vec<f64> {
    if p == 0 {
        vec![0.5]
    } else {
        gauss_lobatto_nodes(p + 1)
    }
}

/// Nodal Lagrange basis on `[0, 1]`; each basis polynomial is stored by its
/// monomial coefficients (degrees are small).
#[derive(Debug, Clone)]
pub struct LagrangeBasis {
    pub nodes: Vec<f64>,
    coeffs: Vec<Vec<f64>>,
}

impl LagrangeBasis {
    pub fn new(nodes: Vec<f64>) -> Self {
        let n = nodes.len();
        let coeffs = (0..n)
            .map(|i| {
                let mut c = vec![1.0];
                for m in (0..n).filter(|&m| m != i) {
                    let denom = nodes[i] - nodes[m];
                    let mut next = vec![0.0; c.len() + 1];
                    for (d, &cd) in c.iter().enumerate() {
                        next[d + 1] += cd / denom;
                        next[d] -= cd * nodes[m] / denom;
                    }
                    c = next;
                }
                c
            })
            .collect();
        Self { nodes, coeffs }
    }

    pub fn of_degree(p: usize) -> Self {
        Self::new(nodal_points(p))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Derivative of order `der` (0, 1 or 2) of basis function `i` at reference point `s`.
    pub fn eval(&self, i: usize, s: f64, der: usize) -> f64 {
        let c = &self.coeffs[i];
        let mut acc = 0.0;
        for d in (der..c.len()).rev() {
            let factor = match der {
                0 => 1.0,
                1 => d as f64,
                2 => (d * (d - 1)) as f64,
                _ => unimplemented!("derivative order {der}"),
            };
            acc = acc * s + factor * c[d];
        }
        acc
    }

    /// All basis values (or derivatives) at `s`.
    pub fn eval_all(&self, s: f64, der: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.eval(i, s, der)).collect()
    }
}
