use std::f64::consts::PI;

use crate::error::{HdgError, Result};

/// Highest exactness degree offered by [`QuadratureRule::new`].
pub const MAX_EXACTNESS: usize = 60;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    /// Reference triangle {x, y >= 0, x + y <= 1}.
    Triangle,
    /// Reference segment [0, 1].
    Segment,
}

/// Points and positive weights on a reference shape. Segment rules store
/// their abscissa in `points[i][0]`.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub shape: Shape,
    pub exactness: usize,
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on the
/// three-term recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, z);
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// a! b! / (a + b + 2)!, computed as a product to stay finite for large a, b.
fn monomial_triangle_integral(a: usize, b: usize) -> f64 {
    let mut v = 1.0 / ((a + b + 2) * (a + b + 1)) as f64;
    for i in 1..=b {
        v *= i as f64 / (a + i) as f64;
    }
    v
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

impl QuadratureRule {
    /// Rule integrating every polynomial of total degree `exactness` exactly.
    /// Triangle rules are collapsed (Duffy) tensor products of Gauss-Legendre
    /// rules.
    pub fn new(shape: Shape, exactness: usize) -> Result<Self> {
        if exactness > MAX_EXACTNESS {
            return Err(HdgError::QuadratureUnavailable {
                requested: exactness,
                max: MAX_EXACTNESS,
            });
        }
        let rule = match shape {
            Shape::Segment => {
                let n = exactness / 2 + 1;
                let (x, w) = gauss_legendre(n);
                Self {
                    shape,
                    exactness,
                    points: x.iter().map(|&xi| [0.5 * (xi + 1.0), 0.0]).collect(),
                    weights: w.iter().map(|wi| 0.5 * wi).collect(),
                }
            }
            Shape::Triangle => {
                // x^a y^b maps to xi^a (1-eta)^(a+1) eta^b: degree <= exactness + 1 in eta
                let n = (exactness + 2).div_ceil(2).max(1);
                let (x, w) = gauss_legendre(n);
                let mut points = Vec::with_capacity(n * n);
                let mut weights = Vec::with_capacity(n * n);
                for (eta, weta) in x.iter().zip(&w) {
                    let eta = 0.5 * (eta + 1.0);
                    for (xi, wxi) in x.iter().zip(&w) {
                        let xi = 0.5 * (xi + 1.0);
                        points.push([xi * (1.0 - eta), eta]);
                        weights.push(0.25 * wxi * weta * (1.0 - eta));
                    }
                }
                Self {
                    shape,
                    exactness,
                    points,
                    weights,
                }
            }
        };
        rule.verify()?;
        Ok(rule)
    }

    /// Checks every monomial up to the declared exactness against its exact
    /// integral.
    fn verify(&self) -> Result<()> {
        let d = self.exactness;
        let mut sums = vec![0.0; (d + 1) * (d + 1)];
        let mut px = vec![1.0; d + 1];
        let mut py = vec![1.0; d + 1];
        for (p, w) in self.points.iter().zip(&self.weights) {
            for a in 1..=d {
                px[a] = px[a - 1] * p[0];
                py[a] = py[a - 1] * p[1];
            }
            for a in 0..=d {
                for b in 0..=(d - a) {
                    sums[a * (d + 1) + b] += w * px[a] * py[b];
                }
            }
        }
        for a in 0..=d {
            let bmax = if self.shape == Shape::Segment { 0 } else { d - a };
            for b in 0..=bmax {
                let exact = match self.shape {
                    Shape::Segment => 1.0 / (a + 1) as f64,
                    Shape::Triangle => monomial_triangle_integral(a, b),
                };
                let got = sums[a * (d + 1) + b];
                if ((got - exact) / exact).abs() > 1e-13 {
                    return Err(HdgError::InvalidInput(format!(
                        "quadrature of exactness {d} fails on x^{a} y^{b}: {got} vs {exact}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn integrate(&self, f: impl Fn([f64; 2]) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(*p)).sum()
    }
}
