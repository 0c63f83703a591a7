//! Piecewise-constant material coefficients and the isotropic stiffness maps.
//!
//! Symmetric 2x2 tensors are handled either as [`SymTensor`] values or as
//! coordinates `[t_xx, t_yy, sqrt(2) t_xy]` in the orthonormal basis of
//! symmetric matrices under the Frobenius product. In those coordinates every
//! isotropic map becomes a symmetric 3x3 matrix.

use std::f64::consts::SQRT_2;

use crate::error::{HdgError, Result};
use crate::mesh::{Mesh, Point};

pub type Mat3 = [[f64; 3]; 3];

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SymTensor {
    pub xx: f64,
    pub yy: f64,
    pub xy: f64,
}

impl SymTensor {
    pub const fn new(xx: f64, yy: f64, xy: f64) -> Self {
        Self { xx, yy, xy }
    }

    pub const fn identity() -> Self {
        Self::new(1.0, 1.0, 0.0)
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    /// Frobenius product.
    pub fn dot(&self, o: &Self) -> f64 {
        self.xx * o.xx + self.yy * o.yy + 2.0 * self.xy * o.xy
    }

    pub fn scale(&self, a: f64) -> Self {
        Self::new(a * self.xx, a * self.yy, a * self.xy)
    }

    pub fn add(&self, o: &Self) -> Self {
        Self::new(self.xx + o.xx, self.yy + o.yy, self.xy + o.xy)
    }

    /// Tensor times vector.
    pub fn mul_vec(&self, n: [f64; 2]) -> [f64; 2] {
        [self.xx * n[0] + self.xy * n[1], self.xy * n[0] + self.yy * n[1]]
    }

    pub fn to_frame(&self) -> [f64; 3] {
        [self.xx, self.yy, SQRT_2 * self.xy]
    }

    pub fn from_frame(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2] / SQRT_2)
    }

    /// Symmetric gradient of a vector field from its Jacobian `g[i][j] = d_j v_i`.
    pub fn sym_grad(g: [[f64; 2]; 2]) -> Self {
        Self::new(g[0][0], g[1][1], 0.5 * (g[0][1] + g[1][0]))
    }
}

/// Frame basis tensors E1, E2, E3 as full 2x2 matrices.
pub const FRAME: [[[f64; 2]; 2]; 3] = [
    [[1.0, 0.0], [0.0, 0.0]],
    [[0.0, 0.0], [0.0, 1.0]],
    [[0.0, std::f64::consts::FRAC_1_SQRT_2], [std::f64::consts::FRAC_1_SQRT_2, 0.0]],
];

/// Lamé pair of an isotropic stiffness tensor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lame {
    pub mu: f64,
    pub lambda: f64,
}

impl Lame {
    pub const fn new(mu: f64, lambda: f64) -> Self {
        Self { mu, lambda }
    }

    /// 2 mu t + lambda tr(t) I.
    pub fn apply(&self, t: &SymTensor) -> SymTensor {
        let l = self.lambda * t.trace();
        SymTensor::new(2.0 * self.mu * t.xx + l, 2.0 * self.mu * t.yy + l, 2.0 * self.mu * t.xy)
    }

    /// Closed-form inverse of [`Lame::apply`] in two dimensions.
    pub fn apply_inverse(&self, t: &SymTensor) -> SymTensor {
        let (a, b) = self.inverse_coefficients();
        let l = b * t.trace();
        SymTensor::new(a * t.xx + l, a * t.yy + l, a * t.xy)
    }

    fn inverse_coefficients(&self) -> (f64, f64) {
        let two_mu = 2.0 * self.mu;
        (1.0 / two_mu, -self.lambda / (two_mu * (two_mu + 2.0 * self.lambda)))
    }

    pub fn frame_matrix(&self) -> Mat3 {
        isotropic_matrix(2.0 * self.mu, self.lambda)
    }

    pub fn inverse_frame_matrix(&self) -> Mat3 {
        let (a, b) = self.inverse_coefficients();
        isotropic_matrix(a, b)
    }

    pub fn difference(&self, o: &Self) -> Self {
        Self::new(self.mu - o.mu, self.lambda - o.lambda)
    }

    /// Compressional wave speed for density `rho`.
    pub fn p_speed(&self, rho: f64) -> f64 {
        ((self.lambda + 2.0 * self.mu) / rho).sqrt()
    }
}

fn isotropic_matrix(a: f64, b: f64) -> Mat3 {
    [[a + b, b, 0.0], [b, a + b, 0.0], [0.0, 0.0, a]]
}

/// (mu, lambda) from Young's modulus and Poisson's ratio.
pub fn lame_from_young_poisson(e: f64, nu: f64) -> Result<Lame> {
    if !(e > 0.0) || !(nu > -1.0 && nu < 0.5) {
        return Err(HdgError::InvalidMaterial(format!(
            "Young/Poisson pair ({e}, {nu}) outside E > 0, -1 < nu < 1/2"
        )));
    }
    Ok(Lame::new(e / (2.0 * (1.0 + nu)), e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))))
}

/// Coefficients of one homogeneous material.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Material {
    pub rho: f64,
    pub chi: f64,
    pub s: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Relaxation time; zero means purely elastic (no viscous stress).
    pub omega: f64,
    pub c: Lame,
    /// Unrelaxed stiffness, ignored when `omega == 0`.
    pub d: Lame,
}

impl Material {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rho", self.rho),
            ("chi", self.chi),
            ("s", self.s),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("mu_c", self.c.mu),
            ("lambda_c", self.c.lambda),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(HdgError::InvalidMaterial(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.omega >= 0.0 && self.omega.is_finite()) {
            return Err(HdgError::InvalidMaterial(format!("omega must be >= 0, got {}", self.omega)));
        }
        if self.viscous() && !(self.d.mu > self.c.mu && self.d.lambda > self.c.lambda) {
            return Err(HdgError::InvalidMaterial(format!(
                "omega > 0 requires mu_d > mu_c and lambda_d > lambda_c, got D = ({}, {}), C = ({}, {})",
                self.d.mu, self.d.lambda, self.c.mu, self.c.lambda
            )));
        }
        Ok(())
    }

    pub fn viscous(&self) -> bool {
        self.omega > 0.0
    }

    pub fn apply_c(&self, t: &SymTensor) -> SymTensor {
        self.c.apply(t)
    }

    pub fn apply_d(&self, t: &SymTensor) -> SymTensor {
        self.d.apply(t)
    }

    pub fn apply_a(&self, t: &SymTensor) -> SymTensor {
        self.c.apply_inverse(t)
    }

    /// (D - C)^-1, defined only on viscous materials.
    pub fn apply_g(&self, t: &SymTensor) -> Result<SymTensor> {
        Ok(self.viscous_pair()?.apply_inverse(t))
    }

    /// The pair of D - C.
    pub fn viscous_pair(&self) -> Result<Lame> {
        if !self.viscous() {
            return Err(HdgError::InvalidMaterial("G = (D - C)^-1 is undefined for omega = 0".into()));
        }
        Ok(self.d.difference(&self.c))
    }

    /// Frame matrix of A = C^-1.
    pub fn a_matrix(&self) -> Mat3 {
        self.c.inverse_frame_matrix()
    }

    /// Frame matrix of G = (D - C)^-1.
    pub fn g_matrix(&self) -> Result<Mat3> {
        Ok(self.viscous_pair()?.inverse_frame_matrix())
    }

    /// Fastest compressional speed: unrelaxed (D) on viscous materials.
    pub fn max_p_speed(&self) -> f64 {
        if self.viscous() {
            self.d.p_speed(self.rho)
        } else {
            self.c.p_speed(self.rho)
        }
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }
}

/// Per-element materials, stored as a small table of distinct materials plus
/// an index per element.
#[derive(Clone, Debug)]
pub struct MaterialField {
    materials: Vec<Material>,
    ids: Vec<usize>,
}

impl MaterialField {
    pub fn uniform(material: Material, num_elements: usize) -> Result<Self> {
        material.validate()?;
        Ok(Self {
            materials: vec![material],
            ids: vec![0; num_elements],
        })
    }

    /// Assigns each element the material returned for its centroid.
    pub fn from_fn(mesh: &Mesh, rule: impl Fn(Point) -> Material) -> Result<Self> {
        let mut materials: Vec<Material> = Vec::new();
        let mut ids = Vec::with_capacity(mesh.num_elements());
        for e in 0..mesh.num_elements() {
            let m = rule(mesh.centroid(e));
            let id = match materials.iter().position(|x| *x == m) {
                Some(i) => i,
                None => {
                    m.validate()?;
                    materials.push(m);
                    materials.len() - 1
                }
            };
            ids.push(id);
        }
        Ok(Self { materials, ids })
    }

    pub fn num_elements(&self) -> usize {
        self.ids.len()
    }

    pub fn get(&self, e: usize) -> &Material {
        &self.materials[self.ids[e]]
    }

    pub fn id(&self, e: usize) -> usize {
        self.ids[e]
    }

    pub fn materials(&self) -> &[Material] {
        &self.materials
    }

    pub fn is_uniform(&self) -> bool {
        self.materials.len() == 1
    }

    /// The single material of a uniform field.
    pub fn uniform_material(&self) -> Result<&Material> {
        if self.is_uniform() {
            Ok(&self.materials[0])
        } else {
            Err(HdgError::InvalidMaterial("coefficient field is not uniform".into()))
        }
    }

    pub fn max_p_speed(&self) -> f64 {
        self.materials.iter().map(Material::max_p_speed).fold(0.0, f64::max)
    }
}

/// The named parameter sets, in order l1, l2, l3, l4.
pub fn builtin_parameter_sets() -> Vec<(&'static str, Material)> {
    ["l1", "l2", "l3", "l4"]
        .into_iter()
        .map(|n| (n, preset(n).expect("builtin preset")))
        .collect()
}

/// Looks up a parameter set by name (case-insensitive).
pub fn preset(name: &str) -> Result<Material> {
    let m = match name.to_ascii_lowercase().as_str() {
        "l1" => Material {
            rho: 1.0,
            chi: 1.0,
            s: 1.0,
            alpha: 1.0,
            beta: 1.0,
            omega: 1.0,
            c: Lame::new(10.0, 30.0),
            d: Lame::new(20.0, 40.0),
        },
        "l2" => Material {
            rho: 1.0,
            chi: 1.0,
            s: 1e-6,
            alpha: 1.0,
            beta: 1.0,
            omega: 1.0,
            c: lame_from_young_poisson(100.0, 0.49)?,
            d: lame_from_young_poisson(1000.0, 0.4999)?,
        },
        "l3" => {
            let theta = 10.5;
            let c = Lame::new(6e9, 4e9);
            Material {
                rho: 2650.0,
                chi: 1.49e-8 / theta,
                s: 117.0,
                alpha: 79200.0,
                beta: 1.0 / theta,
                omega: 0.0,
                c,
                d: c,
            }
        }
        "l4" => {
            let (phi, rho_f, rho_s) = (0.1, 1025.0, 2650.0);
            let (kappa, viscosity) = (1e-14, 1e-3);
            Material {
                rho: phi * rho_f + (1.0 - phi) * rho_s,
                chi: rho_f / phi,
                s: 1e-9,
                alpha: 1.0,
                beta: viscosity / kappa,
                omega: 0.0,
                c: Lame::new(1e9, 4e8),
                d: Lame::new(4e9, 7e9),
            }
        }
        other => return Err(HdgError::InvalidInput(format!("unknown parameter preset '{other}'"))),
    };
    Ok(m)
}
