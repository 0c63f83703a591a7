use crate::error::{HdgError, Result};

use super::quadrature::{QuadratureRule, Shape};

/// Number of polynomials of total degree <= m in two variables.
pub const fn dim_p(m: usize) -> usize {
    (m + 1) * (m + 2) / 2
}

/// L2-orthonormal Dubiner basis of P_m on the reference triangle.
///
/// Functions are ordered by total degree, so the first `dim_p(j)` functions
/// span P_j for every j <= m.
#[derive(Clone, Debug)]
pub struct VolumeBasis {
    degree: usize,
    indices: Vec<(usize, usize)>,
    scale: Vec<f64>,
}

/// Orthonormal Legendre basis of P_m on the reference segment [0, 1].
#[derive(Clone, Copy, Debug)]
pub struct FaceBasis {
    degree: usize,
}

/// Basis values (and gradients, for volume bases) tabulated at the points of a
/// quadrature rule, point-major.
#[derive(Clone, Debug)]
pub struct BasisTable {
    pub size: usize,
    pub values: Vec<f64>,
    pub grads: Vec<[f64; 2]>,
}

impl BasisTable {
    pub fn row(&self, q: usize) -> &[f64] {
        &self.values[q * self.size..(q + 1) * self.size]
    }

    pub fn grad_row(&self, q: usize) -> &[[f64; 2]] {
        &self.grads[q * self.size..(q + 1) * self.size]
    }
}

impl VolumeBasis {
    /// Builds the basis and checks its Gram matrix against the identity.
    pub fn new(degree: usize) -> Result<Self> {
        let mut indices = Vec::with_capacity(dim_p(degree));
        for total in 0..=degree {
            for q in 0..=total {
                indices.push((total - q, q));
            }
        }
        let mut basis = Self {
            degree,
            scale: vec![1.0; indices.len()],
            indices,
        };
        let rule = QuadratureRule::new(Shape::Triangle, 2 * degree)?;
        let n = basis.size();
        let mut gram = vec![0.0; n * n];
        let mut vals = vec![0.0; n];
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            basis.eval_into(*p, &mut vals, None);
            for i in 0..n {
                for j in 0..n {
                    gram[i * n + j] += w * vals[i] * vals[j];
                }
            }
        }
        for i in 0..n {
            if !(gram[i * n + i] > 0.0) {
                return Err(HdgError::Singular(format!("volume basis Gram matrix, degree {degree}")));
            }
            basis.scale[i] = 1.0 / gram[i * n + i].sqrt();
        }
        for i in 0..n {
            for j in 0..n {
                let g = gram[i * n + j] * basis.scale[i] * basis.scale[j];
                let target = if i == j { 1.0 } else { 0.0 };
                if (g - target).abs() > 1e-11 {
                    return Err(HdgError::Singular(format!(
                        "volume basis of degree {degree} is not orthonormal (entry {i},{j} = {g})"
                    )));
                }
            }
        }
        Ok(basis)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn size(&self) -> usize {
        self.indices.len()
    }

    /// Values (and optionally gradients) of all basis functions at reference
    /// point `xi`.
    pub fn eval_into(&self, xi: [f64; 2], vals: &mut [f64], mut grads: Option<&mut [[f64; 2]]>) {
        let m = self.degree;
        let (x, y) = (xi[0], xi[1]);
        // scaled Legendre L_p = (1-y)^p P_p((2x-1+y)/(1-y)) and gradients
        let t = 2.0 * x - 1.0 + y;
        let s = 1.0 - y;
        let mut lp = vec![0.0; m + 1];
        let mut dlp = vec![[0.0; 2]; m + 1];
        lp[0] = 1.0;
        if m >= 1 {
            lp[1] = t;
            dlp[1] = [2.0, 1.0];
        }
        for p in 1..m {
            let pf = p as f64;
            let a = (2.0 * pf + 1.0) / (pf + 1.0);
            let b = pf / (pf + 1.0);
            lp[p + 1] = a * t * lp[p] - b * s * s * lp[p - 1];
            dlp[p + 1] = [
                a * (2.0 * lp[p] + t * dlp[p][0]) - b * s * s * dlp[p - 1][0],
                a * (lp[p] + t * dlp[p][1]) - b * (-2.0 * s * lp[p - 1] + s * s * dlp[p - 1][1]),
            ];
        }
        let z = 2.0 * y - 1.0;
        let w = m + 1;
        let mut jac = vec![0.0; w * w];
        let mut djac = vec![0.0; w * w];
        for p in 0..=m {
            jacobi_into((2 * p + 1) as f64, z, m - p, &mut jac[p * w..(p + 1) * w], &mut djac[p * w..(p + 1) * w]);
        }
        for (i, &(p, q)) in self.indices.iter().enumerate() {
            let (j, dj) = (jac[p * w + q], djac[p * w + q]);
            vals[i] = self.scale[i] * lp[p] * j;
            if let Some(g) = grads.as_deref_mut() {
                g[i] = [
                    self.scale[i] * dlp[p][0] * j,
                    self.scale[i] * (dlp[p][1] * j + lp[p] * 2.0 * dj),
                ];
            }
        }
    }

    pub fn eval(&self, xi: [f64; 2]) -> Vec<f64> {
        let mut v = vec![0.0; self.size()];
        self.eval_into(xi, &mut v, None);
        v
    }

    pub fn tabulate(&self, rule: &QuadratureRule) -> BasisTable {
        let n = self.size();
        let mut values = vec![0.0; n * rule.len()];
        let mut grads = vec![[0.0; 2]; n * rule.len()];
        for (q, p) in rule.points.iter().enumerate() {
            self.eval_into(*p, &mut values[q * n..(q + 1) * n], Some(&mut grads[q * n..(q + 1) * n]));
        }
        BasisTable { size: n, values, grads }
    }
}

/// Jacobi polynomials P_n^(a,0)(z), n = 0..=nmax, with derivatives.
fn jacobi_into(a: f64, z: f64, nmax: usize, p: &mut [f64], dp: &mut [f64]) {
    p[0] = 1.0;
    dp[0] = 0.0;
    if nmax == 0 {
        return;
    }
    p[1] = 0.5 * ((a + 2.0) * z + a);
    dp[1] = 0.5 * (a + 2.0);
    for n in 2..=nmax {
        let nf = n as f64;
        let s = 2.0 * nf + a;
        let denom = 2.0 * nf * (nf + a) * (s - 2.0);
        let c1 = (s - 1.0) * s * (s - 2.0);
        let c0 = (s - 1.0) * a * a;
        let c2 = 2.0 * (nf + a - 1.0) * (nf - 1.0) * s;
        p[n] = ((c1 * z + c0) * p[n - 1] - c2 * p[n - 2]) / denom;
        dp[n] = (c1 * p[n - 1] + (c1 * z + c0) * dp[n - 1] - c2 * dp[n - 2]) / denom;
    }
}

impl FaceBasis {
    pub fn new(degree: usize) -> Self {
        Self { degree }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn size(&self) -> usize {
        self.degree + 1
    }

    pub fn eval_into(&self, s: f64, vals: &mut [f64]) {
        let z = 2.0 * s - 1.0;
        let (mut p0, mut p1) = (1.0, z);
        vals[0] = 1.0;
        if self.degree >= 1 {
            vals[1] = 3f64.sqrt() * z;
        }
        for j in 2..=self.degree {
            let jf = j as f64;
            let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
            p0 = p1;
            p1 = p2;
            vals[j] = (2.0 * jf + 1.0).sqrt() * p2;
        }
    }

    pub fn eval(&self, s: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.size()];
        self.eval_into(s, &mut v);
        v
    }

    pub fn tabulate(&self, rule: &QuadratureRule) -> BasisTable {
        let n = self.size();
        let mut values = vec![0.0; n * rule.len()];
        for (q, p) in rule.points.iter().enumerate() {
            self.eval_into(p[0], &mut values[q * n..(q + 1) * n]);
        }
        BasisTable {
            size: n,
            values,
            grads: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_is_identity() {
        for m in 0..=9 {
            let b = VolumeBasis::new(m).unwrap();
            assert_eq!(b.size(), dim_p(m));
            let rule = QuadratureRule::new(Shape::Triangle, 2 * m + 2).unwrap();
            let t = b.tabulate(&rule);
            for i in 0..b.size() {
                for j in 0..b.size() {
                    let g: f64 = (0..rule.len()).map(|q| rule.weights[q] * t.row(q)[i] * t.row(q)[j]).sum();
                    let target = if i == j { 1.0 } else { 0.0 };
                    assert!((g - target).abs() < 1e-12, "m={m} ({i},{j}) -> {g}");
                }
            }
        }
    }

    #[test]
    fn hierarchical_prefix_is_lower_degree_basis() {
        let hi = VolumeBasis::new(6).unwrap();
        let lo = VolumeBasis::new(3).unwrap();
        let p = [0.21, 0.37];
        let (a, b) = (hi.eval(p), lo.eval(p));
        for i in 0..lo.size() {
            assert!((a[i] - b[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let b = VolumeBasis::new(7).unwrap();
        let n = b.size();
        let p = [0.23, 0.41];
        let mut v = vec![0.0; n];
        let mut g = vec![[0.0; 2]; n];
        b.eval_into(p, &mut v, Some(&mut g));
        let h = 1e-6;
        let (xp, xm) = (b.eval([p[0] + h, p[1]]), b.eval([p[0] - h, p[1]]));
        let (yp, ym) = (b.eval([p[0], p[1] + h]), b.eval([p[0], p[1] - h]));
        for i in 0..n {
            let gx = (xp[i] - xm[i]) / (2.0 * h);
            let gy = (yp[i] - ym[i]) / (2.0 * h);
            let scale = 1.0 + g[i][0].abs() + g[i][1].abs();
            assert!((gx - g[i][0]).abs() < 1e-6 * scale, "dx {i}");
            assert!((gy - g[i][1]).abs() < 1e-6 * scale, "dy {i}");
        }
    }

    #[test]
    fn evaluates_at_top_vertex() {
        // collapsed coordinates are singular at (0, 1); the recurrences are not
        let v = VolumeBasis::new(4).unwrap().eval([0.0, 1.0]);
        assert!(v.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn face_basis_is_orthonormal() {
        let f = FaceBasis::new(8);
        let rule = QuadratureRule::new(Shape::Segment, 18).unwrap();
        let t = f.tabulate(&rule);
        for i in 0..f.size() {
            for j in 0..f.size() {
                let g: f64 = (0..rule.len()).map(|q| rule.weights[q] * t.row(q)[i] * t.row(q)[j]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((g - target).abs() < 1e-13);
            }
        }
    }
}
