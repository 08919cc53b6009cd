//! Quaternions and the flat hypercomplex structure on `H^n`.
//!
//! Tangent vectors of `H^n = R^{4n}` are row vectors and the structures
//! `I`, `J`, `K` act by right multiplication with `i`, `j`, `k`. A right
//! action is realised as `v * M`, so applying `I` and then `J` is the
//! matrix product `M_I * M_J`, and the quaternionic relation reads
//! `M_I * M_J * M_K = -Id`.
//!
//! Real coordinates are grouped per quaternionic slot `a` (0-based here)
//! as `q_a = x_{4a} + i x_{4a+1} + j x_{4a+2} + k x_{4a+3}`. Under right
//! multiplication by `i` the holomorphic coordinates are
//!
//! ```text
//! z_{2a}   = x_{4a}   + i x_{4a+1}
//! z_{2a+1} = x_{4a+2} - i x_{4a+3}
//! ```
//!
//! so that `q_a = z_{2a} + conj(z_{2a+1}) j`. In these coordinates `J` acts
//! on a real vector by `(z_{2a}, z_{2a+1}) -> (-conj z_{2a+1}, conj z_{2a})`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// A real quaternion `w + x i + y j + z k`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const ONE: Quaternion = Quaternion::new(1.0, 0.0, 0.0, 0.0);
    pub const I: Quaternion = Quaternion::new(0.0, 1.0, 0.0, 0.0);
    pub const J: Quaternion = Quaternion::new(0.0, 0.0, 1.0, 0.0);
    pub const K: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 1.0);

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub fn conj(self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn norm_sqr(self) -> f64 {
        self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn norm(self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn from_array(c: [f64; 4]) -> Self {
        Self::new(c[0], c[1], c[2], c[3])
    }
}

/// Hamilton product.
pub fn quat_mul(a: Quaternion, b: Quaternion) -> Quaternion {
    Quaternion {
        w: a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
        x: a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
        y: a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
        z: a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;
    fn mul(self, rhs: Quaternion) -> Quaternion {
        quat_mul(self, rhs)
    }
}

impl Add for Quaternion {
    type Output = Quaternion;
    fn add(self, rhs: Quaternion) -> Quaternion {
        Quaternion::new(
            self.w + rhs.w,
            self.x + rhs.x,
            self.y + rhs.y,
            self.z + rhs.z,
        )
    }
}

impl Sub for Quaternion {
    type Output = Quaternion;
    fn sub(self, rhs: Quaternion) -> Quaternion {
        Quaternion::new(
            self.w - rhs.w,
            self.x - rhs.x,
            self.y - rhs.y,
            self.z - rhs.z,
        )
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;
    fn neg(self) -> Quaternion {
        Quaternion::new(-self.w, -self.x, -self.y, -self.z)
    }
}

impl fmt::Display for Quaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + {}i + {}j + {}k", self.w, self.x, self.y, self.z)
    }
}

/// Integer-valued right-action matrices of `I`, `J`, `K` on `R^{4n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HypercomplexFrame {
    n: usize,
    i: DMatrix<i32>,
    j: DMatrix<i32>,
    k: DMatrix<i32>,
}

/// The standard flat hypercomplex structure of `H^n`.
///
/// # Panics
/// If `n == 0`.
pub fn standard_frame(n: usize) -> HypercomplexFrame {
    assert!(n >= 1, "quaternionic dimension must be positive");
    let build = |unit: Quaternion| {
        let dim = 4 * n;
        let mut m = DMatrix::<i32>::zeros(dim, dim);
        for slot in 0..n {
            for r in 0..4 {
                let mut basis = [0.0; 4];
                basis[r] = 1.0;
                let image = quat_mul(Quaternion::from_array(basis), unit).to_array();
                for (c, v) in image.iter().enumerate() {
                    m[(4 * slot + r, 4 * slot + c)] = *v as i32;
                }
            }
        }
        m
    };
    HypercomplexFrame {
        n,
        i: build(Quaternion::I),
        j: build(Quaternion::J),
        k: build(Quaternion::K),
    }
}

impl HypercomplexFrame {
    /// Quaternionic dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Complex dimension of `T^{1,0}`.
    pub fn complex_dim(&self) -> usize {
        2 * self.n
    }

    pub fn real_dim(&self) -> usize {
        4 * self.n
    }

    pub fn i(&self) -> &DMatrix<i32> {
        &self.i
    }

    pub fn j(&self) -> &DMatrix<i32> {
        &self.j
    }

    pub fn k(&self) -> &DMatrix<i32> {
        &self.k
    }

    /// The real matrix of a structure, for floating point work.
    pub fn real_matrix(m: &DMatrix<i32>) -> DMatrix<f64> {
        m.map(f64::from)
    }

    /// Holomorphic coordinates `z(x)` of a real row vector.
    pub fn complex_coordinates(&self, x: &[f64]) -> DVector<Complex64> {
        assert_eq!(x.len(), self.real_dim());
        DVector::from_fn(self.complex_dim(), |c, _| {
            let slot = c / 2;
            if c % 2 == 0 {
                Complex64::new(x[4 * slot], x[4 * slot + 1])
            } else {
                Complex64::new(x[4 * slot + 2], -x[4 * slot + 3])
            }
        })
    }

    /// The real vector whose holomorphic coordinates are `z`.
    pub fn real_from_complex(&self, z: &DVector<Complex64>) -> Vec<f64> {
        assert_eq!(z.len(), self.complex_dim());
        let mut x = vec![0.0; self.real_dim()];
        for slot in 0..self.n {
            let (a, b) = (z[2 * slot], z[2 * slot + 1]);
            x[4 * slot] = a.re;
            x[4 * slot + 1] = a.im;
            x[4 * slot + 2] = b.re;
            x[4 * slot + 3] = -b.im;
        }
        x
    }

    /// Row `c` of the projection `P` with `dz_c = sum_k P[c][k] dx_k`.
    pub fn coordinate_differential(&self, c: usize) -> Vec<(usize, Complex64)> {
        let slot = c / 2;
        if c.is_multiple_of(2) {
            vec![
                (4 * slot, Complex64::new(1.0, 0.0)),
                (4 * slot + 1, Complex64::new(0.0, 1.0)),
            ]
        } else {
            vec![
                (4 * slot + 2, Complex64::new(1.0, 0.0)),
                (4 * slot + 3, Complex64::new(0.0, -1.0)),
            ]
        }
    }

    /// Row `c` of the matrix `W` with `d/dz_c = sum_k W[c][k] d/dx_k`.
    pub fn wirtinger(&self, c: usize) -> Vec<(usize, Complex64)> {
        let slot = c / 2;
        if c.is_multiple_of(2) {
            vec![
                (4 * slot, Complex64::new(0.5, 0.0)),
                (4 * slot + 1, Complex64::new(0.0, -0.5)),
            ]
        } else {
            vec![
                (4 * slot + 2, Complex64::new(0.5, 0.0)),
                (4 * slot + 3, Complex64::new(0.0, 0.5)),
            ]
        }
    }

    /// The real block matrix `S` of `J` in coordinates: for a `(1,0)` vector
    /// with components `zeta`, the `(1,0)` vector `conj(zeta) J` has
    /// components `S * conj(zeta)`.
    pub fn j_block(&self) -> DMatrix<f64> {
        let d = self.complex_dim();
        let mut s = DMatrix::zeros(d, d);
        for slot in 0..self.n {
            s[(2 * slot, 2 * slot + 1)] = -1.0;
            s[(2 * slot + 1, 2 * slot)] = 1.0;
        }
        s
    }
}

/// Which half of the complexified tangent space a vector lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VectorType {
    /// Components against `d/dz_c`.
    Holomorphic,
    /// Components against `d/dzbar_c`.
    AntiHolomorphic,
}

/// A complex tangent vector of pure type with respect to `I`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexTangentVector {
    pub kind: VectorType,
    pub components: DVector<Complex64>,
}

impl ComplexTangentVector {
    pub fn holomorphic(components: DVector<Complex64>) -> Self {
        Self {
            kind: VectorType::Holomorphic,
            components,
        }
    }

    pub fn anti_holomorphic(components: DVector<Complex64>) -> Self {
        Self {
            kind: VectorType::AntiHolomorphic,
            components,
        }
    }

    /// Complex conjugation swaps the two types.
    pub fn conj(&self) -> Self {
        let kind = match self.kind {
            VectorType::Holomorphic => VectorType::AntiHolomorphic,
            VectorType::AntiHolomorphic => VectorType::Holomorphic,
        };
        Self {
            kind,
            components: self.components.map(|c| c.conj()),
        }
    }

    /// Action of `I`: multiplication by `i` on `(1,0)` and `-i` on `(0,1)`.
    pub fn apply_i(&self) -> Self {
        let f = match self.kind {
            VectorType::Holomorphic => Complex64::i(),
            VectorType::AntiHolomorphic => -Complex64::i(),
        };
        Self {
            kind: self.kind,
            components: self.components.map(|c| c * f),
        }
    }

    /// The real vector `v + conj(v)`.
    pub fn real_part(&self, frame: &HypercomplexFrame) -> Vec<f64> {
        match self.kind {
            VectorType::Holomorphic => frame.real_from_complex(&self.components),
            VectorType::AntiHolomorphic => frame.real_from_complex(&self.conj().components),
        }
    }

    pub fn norm(&self) -> f64 {
        self.components.norm()
    }
}

/// The vector `v J`, extended complex-linearly; swaps `(1,0)` and `(0,1)`.
pub fn j_on_vector(frame: &HypercomplexFrame, v: &ComplexTangentVector) -> ComplexTangentVector {
    assert_eq!(v.components.len(), frame.complex_dim());
    let mut out = DVector::zeros(frame.complex_dim());
    for slot in 0..frame.n() {
        out[2 * slot] = -v.components[2 * slot + 1];
        out[2 * slot + 1] = v.components[2 * slot];
    }
    let kind = match v.kind {
        VectorType::Holomorphic => VectorType::AntiHolomorphic,
        VectorType::AntiHolomorphic => VectorType::Holomorphic,
    };
    ComplexTangentVector {
        kind,
        components: out,
    }
}

/// The `(1,0)` vector `conj(z) J` for a `(1,0)` vector `z`, as raw components.
pub fn conj_j(z: &DVector<Complex64>) -> DVector<Complex64> {
    let mut out = DVector::zeros(z.len());
    for slot in 0..z.len() / 2 {
        out[2 * slot] = -z[2 * slot + 1].conj();
        out[2 * slot + 1] = z[2 * slot].conj();
    }
    out
}
