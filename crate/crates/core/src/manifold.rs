//! Model closed 4-manifolds and their discretizations.
//!
//! Two geometries are supported:
//!
//! * `Torus4`: the flat torus R^4 / (L1 Z x ... x L4 Z) on a uniform grid,
//!   with the Laplacian applied spectrally (FFT symbol sum_j (2 pi k_j / L_j)^2).
//! * `Sphere4Radial`: the round sphere S^4(rho) restricted to radial profiles
//!   u(r) of the geodesic distance r from the north pole. The operator
//!   -u'' - (3/rho) cot(r/rho) u' is discretized in conservative form on a
//!   uniform r-grid: fluxes sin^3(t) u'(t) at cell faces, divided by exact
//!   cell integrals of sin^3. The pole rows are the zero-flux (ghost-node
//!   Neumann) closure and reduce to the coordinate-limit value -4 u''(0)
//!   at second order.
//!
//! Sign convention: Delta_g = -div_g grad, a nonnegative operator, so
//! Delta (cos(2 pi x1 / L1)) = (2 pi / L1)^2 cos(...) on the torus and
//! Delta (cos r) = 4 cos r on the unit sphere.
//!
//! The conservative form is chosen so that the discrete operator is
//! exactly self-adjoint with respect to the quadrature weights and
//! positive semidefinite, for arbitrary (also rough) grid fields; these
//! identities hold to rounding, not just to discretization order.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::elliptic::ScalarField;
use crate::{Error, Result};

/// Unit-3-sphere volume, the area constant in the radial volume element
/// dv = omega3 rho^3 sin^3(r/rho) dr.
pub const OMEGA3: f64 = 2.0 * PI * PI;

/// Model manifold descriptions.
#[derive(Debug, Clone, PartialEq)]
pub enum ManifoldSpec {
    /// Flat 4-torus with side lengths `lengths` and even node counts `nodes`.
    Torus4 { lengths: [f64; 4], nodes: [usize; 4] },
    /// Round 4-sphere of radius `radius`, radial profiles on `radial_nodes`
    /// uniformly spaced colatitude nodes (both poles included).
    Sphere4Radial { radius: f64, radial_nodes: usize },
}

impl ManifoldSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ManifoldSpec::Torus4 { lengths, nodes } => {
                for (j, &l) in lengths.iter().enumerate() {
                    if !(l.is_finite() && l > 0.0) {
                        return Err(Error::InvalidSpec(format!(
                            "torus length L{} must be positive and finite, got {l}",
                            j + 1
                        )));
                    }
                }
                for (j, &n) in nodes.iter().enumerate() {
                    if n < 8 {
                        return Err(Error::InvalidSpec(format!(
                            "torus node count N{} must be at least 8, got {n}",
                            j + 1
                        )));
                    }
                    if n % 2 != 0 {
                        return Err(Error::InvalidSpec(format!(
                            "torus node count N{} must be even, got {n}",
                            j + 1
                        )));
                    }
                }
                Ok(())
            }
            ManifoldSpec::Sphere4Radial {
                radius,
                radial_nodes,
            } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::InvalidSpec(format!(
                        "sphere radius must be positive and finite, got {radius}"
                    )));
                }
                if *radial_nodes < 8 {
                    return Err(Error::InvalidSpec(format!(
                        "sphere radial node count must be at least 8, got {radial_nodes}"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            ManifoldSpec::Torus4 { nodes, .. } => nodes.iter().product(),
            ManifoldSpec::Sphere4Radial { radial_nodes, .. } => *radial_nodes,
        }
    }

    /// Injectivity radius: min_j L_j / 2 on the torus, pi * rho on the sphere.
    pub fn injectivity_radius(&self) -> f64 {
        match self {
            ManifoldSpec::Torus4 { lengths, .. } => {
                0.5 * lengths.iter().cloned().fold(f64::INFINITY, f64::min)
            }
            ManifoldSpec::Sphere4Radial { radius, .. } => PI * radius,
        }
    }

    pub fn build(self) -> Result<Discretization> {
        Discretization::build(self)
    }
}

static NEXT_GRID_ID: AtomicU64 = AtomicU64::new(1);

/// Identity token tying a [`ScalarField`] to the discretization it lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridId(u64);

enum Backend {
    Torus(TorusSpectral),
    Sphere(SphereRadial),
}

/// A built grid: quadrature weights, curvature samples, coordinates,
/// geodesic distances from the base point, and the Laplacian backend.
pub struct Discretization {
    spec: ManifoldSpec,
    id: GridId,
    volume: f64,
    weights: Vec<f64>,
    curvature: Vec<f64>,
    coords: Vec<[f64; 4]>,
    base_distance: Vec<f64>,
    backend: Backend,
}

impl Discretization {
    fn build(spec: ManifoldSpec) -> Result<Self> {
        spec.validate()?;
        let id = GridId(NEXT_GRID_ID.fetch_add(1, Ordering::Relaxed));
        match spec {
            ManifoldSpec::Torus4 { lengths, nodes } => {
                let total: usize = nodes.iter().product();
                let volume: f64 = lengths.iter().product();
                let w = volume / total as f64;
                let weights = vec![w; total];
                let curvature = vec![0.0; total];
                let h: Vec<f64> = (0..4).map(|j| lengths[j] / nodes[j] as f64).collect();

                let mut coords = Vec::with_capacity(total);
                let mut base_distance = Vec::with_capacity(total);
                for idx in 0..total {
                    let mi = multi_index(idx, &nodes);
                    let x = [
                        mi[0] as f64 * h[0],
                        mi[1] as f64 * h[1],
                        mi[2] as f64 * h[2],
                        mi[3] as f64 * h[3],
                    ];
                    let mut d2 = 0.0;
                    for j in 0..4 {
                        let dj = x[j].min(lengths[j] - x[j]);
                        d2 += dj * dj;
                    }
                    coords.push(x);
                    base_distance.push(d2.sqrt());
                }

                let backend = Backend::Torus(TorusSpectral::new(lengths, nodes));
                Ok(Discretization {
                    spec: ManifoldSpec::Torus4 { lengths, nodes },
                    id,
                    volume,
                    weights,
                    curvature,
                    coords,
                    base_distance,
                    backend,
                })
            }
            ManifoldSpec::Sphere4Radial {
                radius,
                radial_nodes,
            } => {
                let n = radial_nodes;
                let rho = radius;
                let dt = PI / (n - 1) as f64;
                let volume = (8.0 * PI * PI / 3.0) * rho.powi(4);

                // Exact cell integrals of sin^3 in product form. The naive
                // antiderivative difference A(b) - A(a) with
                // A(t) = cos^3(t)/3 - cos(t) cancels catastrophically in the
                // ~h^4 pole cells; the factored identity
                //   int_a^b sin^3 = 2 sin((a+b)/2) sin((b-a)/2)
                //     * [sin^2 a + sin^2 b + sin^2((a-b)/2) + sin^2((a+b)/2)] / 3
                // only multiplies small quantities and keeps the pole rows
                // accurate at any resolution.
                let cell = |a: f64, b: f64| {
                    let s = 2.0 * (0.5 * (a + b)).sin() * (0.5 * (b - a)).sin();
                    let bracket = a.sin().powi(2)
                        + b.sin().powi(2)
                        + (0.5 * (a - b)).sin().powi(2)
                        + (0.5 * (a + b)).sin().powi(2);
                    s * bracket / 3.0
                };
                // Cell bounds: [0, dt/2], [t_i - dt/2, t_i + dt/2], [pi - dt/2, pi].
                let mut bounds = Vec::with_capacity(n + 1);
                bounds.push(0.0);
                for i in 1..n {
                    bounds.push((i as f64 - 0.5) * dt);
                }
                bounds.push(PI);
                let mass: Vec<f64> = (0..n).map(|i| cell(bounds[i], bounds[i + 1])).collect();
                let face: Vec<f64> = (0..n - 1)
                    .map(|i| ((i as f64 + 0.5) * dt).sin().powi(3))
                    .collect();

                let mut weights: Vec<f64> =
                    mass.iter().map(|m| OMEGA3 * rho.powi(4) * m).collect();
                // Pin the weight total to the exact volume (the cell masses
                // already telescope to 4/3 up to rounding).
                let total_w: f64 = weights.iter().sum();
                let scale = volume / total_w;
                for w in &mut weights {
                    *w *= scale;
                }

                let curvature = vec![12.0 / (rho * rho); n];
                let coords: Vec<[f64; 4]> = (0..n)
                    .map(|i| [rho * i as f64 * dt, 0.0, 0.0, 0.0])
                    .collect();
                let base_distance: Vec<f64> = coords.iter().map(|c| c[0]).collect();

                let backend = Backend::Sphere(SphereRadial {
                    radius: rho,
                    dt,
                    face,
                    mass,
                });
                Ok(Discretization {
                    spec: ManifoldSpec::Sphere4Radial {
                        radius,
                        radial_nodes,
                    },
                    id,
                    volume,
                    weights,
                    curvature,
                    coords,
                    base_distance,
                    backend,
                })
            }
        }
    }

    pub fn spec(&self) -> &ManifoldSpec {
        &self.spec
    }

    pub fn grid_id(&self) -> GridId {
        self.id
    }

    pub fn node_count(&self) -> usize {
        self.weights.len()
    }

    /// Total volume of the manifold: prod L_j, or (8 pi^2 / 3) rho^4.
    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// Quadrature weights; they sum to `volume()`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Scalar curvature sampled at the nodes (0 on the torus, 12 / rho^2 on the sphere).
    pub fn curvature(&self) -> &[f64] {
        &self.curvature
    }

    pub fn coords(&self) -> &[[f64; 4]] {
        &self.coords
    }

    /// Geodesic distance d_g(x0, x_i) from the base point (torus origin node,
    /// sphere north pole).
    pub fn base_distance(&self) -> &[f64] {
        &self.base_distance
    }

    pub fn injectivity_radius(&self) -> f64 {
        self.spec.injectivity_radius()
    }

    /// Geodesic distances from an arbitrary node. On the torus this is the
    /// periodic flat distance; on the radial sphere it is the distance along
    /// the meridian, |r_i - r_center|.
    pub fn distance_from(&self, center: usize) -> Vec<f64> {
        assert!(center < self.node_count(), "node index out of range");
        match &self.spec {
            ManifoldSpec::Torus4 { lengths, .. } => {
                let c = self.coords[center];
                self.coords
                    .iter()
                    .map(|x| {
                        let mut d2 = 0.0;
                        for j in 0..4 {
                            let raw = (x[j] - c[j]).abs();
                            let dj = raw.min(lengths[j] - raw);
                            d2 += dj * dj;
                        }
                        d2.sqrt()
                    })
                    .collect()
            }
            ManifoldSpec::Sphere4Radial { .. } => {
                let rc = self.coords[center][0];
                self.coords.iter().map(|x| (x[0] - rc).abs()).collect()
            }
        }
    }

    pub fn scalar_field(&self, values: Vec<f64>) -> ScalarField {
        assert_eq!(
            values.len(),
            self.node_count(),
            "field length {} does not match node count {}",
            values.len(),
            self.node_count()
        );
        ScalarField::new(values, self.id)
    }

    pub fn constant(&self, c: f64) -> ScalarField {
        ScalarField::new(vec![c; self.node_count()], self.id)
    }

    pub fn zeros(&self) -> ScalarField {
        self.constant(0.0)
    }

    pub(crate) fn check_field(&self, u: &ScalarField) {
        assert!(
            u.grid_id() == self.id && u.len() == self.node_count(),
            "field is attached to a different discretization"
        );
    }

    /// Apply Delta_g = -div_g grad.
    pub fn laplacian(&self, u: &ScalarField) -> ScalarField {
        self.check_field(u);
        let out = match &self.backend {
            Backend::Torus(t) => t.spectral_filter(u.values(), |lam| lam),
            Backend::Sphere(s) => s.apply(u.values()),
        };
        ScalarField::new(out, self.id)
    }

    /// Solve (Delta_g + shift) w = f exactly for a constant shift > 0
    /// (spectral division on the torus, tridiagonal factorization on the
    /// sphere). This is the constant-coefficient preconditioner used by the
    /// screened solver and by the path deformation.
    pub fn solve_shifted(&self, f: &ScalarField, shift: f64) -> ScalarField {
        self.check_field(f);
        assert!(
            shift > 0.0 && shift.is_finite(),
            "shift must be positive, got {shift}"
        );
        let out = match &self.backend {
            Backend::Torus(t) => t.spectral_filter(f.values(), |lam| 1.0 / (lam + shift)),
            Backend::Sphere(s) => s.solve_shifted(f.values(), shift),
        };
        ScalarField::new(out, self.id)
    }

    /// Quadrature: integral of u over the manifold.
    pub fn integrate(&self, u: &ScalarField) -> f64 {
        self.check_field(u);
        self.integrate_values(u.values())
    }

    pub(crate) fn integrate_values(&self, vals: &[f64]) -> f64 {
        debug_assert_eq!(vals.len(), self.weights.len());
        self.weights
            .iter()
            .zip(vals)
            .map(|(w, v)| w * v)
            .sum()
    }
}

fn multi_index(mut idx: usize, nodes: &[usize; 4]) -> [usize; 4] {
    let mut mi = [0usize; 4];
    for j in (0..4).rev() {
        mi[j] = idx % nodes[j];
        idx /= nodes[j];
    }
    mi
}

struct TorusSpectral {
    nodes: [usize; 4],
    total: usize,
    symbol: Vec<f64>,
    fwd: [Arc<dyn Fft<f64>>; 4],
    inv: [Arc<dyn Fft<f64>>; 4],
}

impl TorusSpectral {
    fn new(lengths: [f64; 4], nodes: [usize; 4]) -> Self {
        let total: usize = nodes.iter().product();
        let mut symbol = vec![0.0; total];
        for idx in 0..total {
            let mi = multi_index(idx, &nodes);
            let mut lam = 0.0;
            for j in 0..4 {
                let n = nodes[j];
                let k = if mi[j] <= n / 2 {
                    mi[j] as f64
                } else {
                    mi[j] as f64 - n as f64
                };
                let xi = 2.0 * PI * k / lengths[j];
                lam += xi * xi;
            }
            symbol[idx] = lam;
        }
        let mut planner = FftPlanner::new();
        let fwd = [
            planner.plan_fft_forward(nodes[0]),
            planner.plan_fft_forward(nodes[1]),
            planner.plan_fft_forward(nodes[2]),
            planner.plan_fft_forward(nodes[3]),
        ];
        let inv = [
            planner.plan_fft_inverse(nodes[0]),
            planner.plan_fft_inverse(nodes[1]),
            planner.plan_fft_inverse(nodes[2]),
            planner.plan_fft_inverse(nodes[3]),
        ];
        TorusSpectral {
            nodes,
            total,
            symbol,
            fwd,
            inv,
        }
    }

    /// Forward FFT, multiply the spectrum by `filter(symbol)`, inverse FFT.
    fn spectral_filter(&self, values: &[f64], filter: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut buf: Vec<Complex<f64>> =
            values.iter().map(|&v| Complex::new(v, 0.0)).collect();
        for axis in 0..4 {
            self.fft_axis(&mut buf, axis, true);
        }
        for (b, &lam) in buf.iter_mut().zip(&self.symbol) {
            *b *= filter(lam);
        }
        for axis in 0..4 {
            self.fft_axis(&mut buf, axis, false);
        }
        let scale = 1.0 / self.total as f64;
        buf.iter().map(|c| c.re * scale).collect()
    }

    fn fft_axis(&self, buf: &mut [Complex<f64>], axis: usize, forward: bool) {
        let n = self.nodes[axis];
        let stride: usize = self.nodes[axis + 1..].iter().product();
        let plan = if forward {
            &self.fwd[axis]
        } else {
            &self.inv[axis]
        };

        // Gather all lines along `axis` into a contiguous buffer, transform
        // them in one batched call, scatter back.
        let mut lines = vec![Complex::new(0.0, 0.0); self.total];
        let block = n * stride;
        let mut line = 0;
        for outer in (0..self.total).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                let dst = line * n;
                for k in 0..n {
                    lines[dst + k] = buf[base + k * stride];
                }
                line += 1;
            }
        }
        let mut scratch =
            vec![Complex::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(&mut lines, &mut scratch);
        let mut line = 0;
        for outer in (0..self.total).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                let src = line * n;
                for k in 0..n {
                    buf[base + k * stride] = lines[src + k];
                }
                line += 1;
            }
        }
    }
}

struct SphereRadial {
    radius: f64,
    dt: f64,
    /// sin^3 at the cell faces t_{i+1/2}, i = 0..n-2.
    face: Vec<f64>,
    /// Exact cell integrals of sin^3 dt.
    mass: Vec<f64>,
}

impl SphereRadial {
    fn apply(&self, u: &[f64]) -> Vec<f64> {
        let n = u.len();
        let r2 = self.radius * self.radius;
        let mut out = vec![0.0; n];
        for i in 0..n {
            let flux_r = if i + 1 < n {
                self.face[i] * (u[i + 1] - u[i]) / self.dt
            } else {
                0.0
            };
            let flux_l = if i > 0 {
                self.face[i - 1] * (u[i] - u[i - 1]) / self.dt
            } else {
                0.0
            };
            out[i] = -(flux_r - flux_l) / (r2 * self.mass[i]);
        }
        out
    }

    /// Thomas solve of the shifted operator; the matrix is irreducibly
    /// diagonally dominant for shift > 0.
    fn solve_shifted(&self, f: &[f64], shift: f64) -> Vec<f64> {
        let n = f.len();
        let r2 = self.radius * self.radius;
        let coef = |i: usize| -> (f64, f64, f64) {
            let denom = r2 * self.mass[i] * self.dt;
            let lo = if i > 0 { self.face[i - 1] / denom } else { 0.0 };
            let hi = if i + 1 < n { self.face[i] / denom } else { 0.0 };
            (-lo, lo + hi + shift, -hi)
        };
        let mut c_prime = vec![0.0; n];
        let mut d_prime = vec![0.0; n];
        {
            let (_, b0, c0) = coef(0);
            c_prime[0] = c0 / b0;
            d_prime[0] = f[0] / b0;
        }
        for i in 1..n {
            let (a, b, c) = coef(i);
            let m = b - a * c_prime[i - 1];
            c_prime[i] = c / m;
            d_prime[i] = (f[i] - a * d_prime[i - 1]) / m;
        }
        let mut x = vec![0.0; n];
        x[n - 1] = d_prime[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = d_prime[i] - c_prime[i] * x[i + 1];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn torus(n: usize) -> Discretization {
        let l = 2.0 * PI;
        ManifoldSpec::Torus4 {
            lengths: [l; 4],
            nodes: [n; 4],
        }
        .build()
        .unwrap()
    }

    fn sphere(n: usize) -> Discretization {
        ManifoldSpec::Sphere4Radial {
            radius: 1.0,
            radial_nodes: n,
        }
        .build()
        .unwrap()
    }

    fn rough(d: &Discretization, seed: u64) -> ScalarField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..d.node_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        d.scalar_field(v)
    }

    fn l2(d: &Discretization, u: &ScalarField) -> f64 {
        d.weights()
            .iter()
            .zip(u.values())
            .map(|(w, v)| w * v * v)
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn torus_volume_is_product_of_lengths() {
        let d = torus(8);
        let v = (2.0 * PI).powi(4);
        assert!((d.volume() - v).abs() <= 1e-10 * v);
        let sum: f64 = d.weights().iter().sum();
        assert!((sum - v).abs() <= 1e-10 * v);
        assert!(d.curvature().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn sphere_volume_matches_independent_quadrature() {
        // Oracle: V = 2 pi^2 rho^4 int_0^pi sin^3 t dt by composite Simpson,
        // computed independently of the weight construction.
        let m = 20_001;
        let h = PI / (m - 1) as f64;
        let mut acc = 0.0;
        for i in 0..m {
            let t = i as f64 * h;
            let c = if i == 0 || i == m - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += c * t.sin().powi(3);
        }
        let oracle = OMEGA3 * acc * h / 3.0;

        let d = sphere(512);
        let v = 8.0 * PI * PI / 3.0;
        assert!((d.volume() - v).abs() <= 1e-8 * v);
        assert!((d.volume() - oracle).abs() <= 1e-8 * v);
        let sum: f64 = d.weights().iter().sum();
        assert!((sum - v).abs() <= 1e-10 * v);
        assert!(d.weights().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn sphere_volume_scales_like_rho_fourth() {
        let d = ManifoldSpec::Sphere4Radial {
            radius: 2.0,
            radial_nodes: 128,
        }
        .build()
        .unwrap();
        let v = 8.0 * PI * PI / 3.0 * 16.0;
        assert!((d.volume() - v).abs() <= 1e-10 * v);
        assert!(d.curvature().iter().all(|&s| (s - 3.0).abs() < 1e-14));
    }

    #[test]
    fn torus_laplacian_diagonalizes_fourier_modes() {
        let d = torus(8);
        let l = 2.0 * PI;
        let u = d.scalar_field(
            d.coords()
                .iter()
                .map(|x| (2.0 * PI * x[0] / l).cos())
                .collect(),
        );
        let lam = (2.0 * PI / l).powi(2);
        let du = d.laplacian(&u);
        for (a, b) in du.values().iter().zip(u.values()) {
            assert!((a - lam * b).abs() < 1e-11);
        }

        // Mixed mode (1, 2, 0, 0).
        let u2 = d.scalar_field(
            d.coords()
                .iter()
                .map(|x| (2.0 * PI * x[0] / l).cos() * (4.0 * PI * x[1] / l).sin())
                .collect(),
        );
        let lam2 = (2.0 * PI / l).powi(2) + (4.0 * PI / l).powi(2);
        let du2 = d.laplacian(&u2);
        for (a, b) in du2.values().iter().zip(u2.values()) {
            assert!((a - lam2 * b).abs() < 1e-10);
        }
    }

    #[test]
    fn laplacian_of_constants_vanishes() {
        for d in [torus(8), sphere(64)] {
            let u = d.constant(3.7);
            let du = d.laplacian(&u);
            for &v in du.values() {
                assert!(v.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn sphere_laplacian_first_eigenfunction() {
        // cos r is the first radial spherical harmonic on S^4(1): Delta cos r = 4 cos r.
        let d = sphere(512);
        let u = d.scalar_field(d.base_distance().iter().map(|&r| r.cos()).collect());
        let du = d.laplacian(&u);
        let mut sup = 0.0f64;
        for (a, b) in du.values().iter().zip(u.values()) {
            sup = sup.max((a - 4.0 * b).abs());
        }
        // Second-order scheme; measured sup residual at N = 512 is ~6e-6.
        assert!(sup < 1e-4, "sup residual {sup}");

        // Refinement halves h and should cut the residual by about 4.
        let d2 = sphere(1024);
        let u2 = d2.scalar_field(d2.base_distance().iter().map(|&r| r.cos()).collect());
        let du2 = d2.laplacian(&u2);
        let mut sup2 = 0.0f64;
        for (a, b) in du2.values().iter().zip(u2.values()) {
            sup2 = sup2.max((a - 4.0 * b).abs());
        }
        let order = (sup / sup2).log2();
        assert!(order > 1.8, "observed order {order}");
    }

    #[test]
    fn quadrature_is_exact_on_constants_and_single_modes() {
        let d = torus(8);
        let v = (2.0 * PI).powi(4);
        assert!((d.integrate(&d.constant(1.0)) - v).abs() <= 1e-8 * v);

        let l = 2.0 * PI;
        for k in [[1, 0, 0, 0], [0, 2, 0, 0], [1, 1, 0, 3]] {
            let u = d.scalar_field(
                d.coords()
                    .iter()
                    .map(|x| {
                        (2.0 * PI * (k[0] as f64 * x[0] + k[1] as f64 * x[1]
                            + k[2] as f64 * x[2]
                            + k[3] as f64 * x[3])
                            / l)
                            .cos()
                    })
                    .collect(),
            );
            assert!(d.integrate(&u).abs() < 1e-8);
        }

        let s = sphere(512);
        let vs = 8.0 * PI * PI / 3.0;
        assert!((s.integrate(&s.constant(1.0)) - vs).abs() <= 1e-8 * vs);
        // First Legendre mode integrates to zero by antisymmetry about the equator.
        let u = s.scalar_field(s.base_distance().iter().map(|&r| r.cos()).collect());
        assert!(s.integrate(&u).abs() < 1e-8);
    }

    #[test]
    fn laplacian_is_self_adjoint_for_random_fields() {
        for (d, seed) in [(torus(8), 7u64), (sphere(512), 8u64)] {
            let u = rough(&d, seed);
            let w = rough(&d, seed + 100);
            let lhs = d.integrate_values(
                &d.laplacian(&u)
                    .values()
                    .iter()
                    .zip(w.values())
                    .map(|(a, b)| a * b)
                    .collect::<Vec<_>>(),
            );
            let rhs = d.integrate_values(
                &d.laplacian(&w)
                    .values()
                    .iter()
                    .zip(u.values())
                    .map(|(a, b)| a * b)
                    .collect::<Vec<_>>(),
            );
            let bound = 1e-8 * l2(&d, &u) * l2(&d, &w);
            assert!(
                (lhs - rhs).abs() <= bound,
                "asymmetry {} vs bound {}",
                (lhs - rhs).abs(),
                bound
            );
        }
    }

    #[test]
    fn dirichlet_form_is_nonnegative() {
        for (d, seed) in [(torus(8), 17u64), (sphere(512), 18u64)] {
            for k in 0..5 {
                let u = rough(&d, seed + k);
                let du = d.laplacian(&u);
                let q = d.integrate_values(
                    &u.values()
                        .iter()
                        .zip(du.values())
                        .map(|(a, b)| a * b)
                        .collect::<Vec<_>>(),
                );
                assert!(q >= -1e-10, "Dirichlet form {q}");
            }
        }
    }

    #[test]
    fn shifted_solve_inverts_the_operator() {
        for (d, seed) in [(torus(8), 3u64), (sphere(256), 4u64)] {
            let f = rough(&d, seed);
            let w = d.solve_shifted(&f, 1.5);
            let back = d.laplacian(&w);
            for ((bv, wv), fv) in back.values().iter().zip(w.values()).zip(f.values()) {
                assert!((bv + 1.5 * wv - fv).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn base_distance_and_injectivity() {
        let d = torus(8);
        let h = 2.0 * PI / 8.0;
        assert_eq!(d.base_distance()[0], 0.0);
        // Node (7,0,0,0) wraps around to distance h.
        let idx_last = 7 * 8 * 8 * 8;
        assert!((d.base_distance()[idx_last] - h).abs() < 1e-12);
        assert!((d.injectivity_radius() - PI).abs() < 1e-12);

        let s = sphere(64);
        assert!((s.injectivity_radius() - PI).abs() < 1e-12);
        let dist = s.distance_from(10);
        assert_eq!(dist[10], 0.0);
        assert!((dist[12] - 2.0 * PI / 63.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(ManifoldSpec::Torus4 {
            lengths: [1.0; 4],
            nodes: [8, 8, 8, 7],
        }
        .build()
        .is_err());
        assert!(ManifoldSpec::Torus4 {
            lengths: [1.0; 4],
            nodes: [8, 8, 8, 6],
        }
        .build()
        .is_err());
        assert!(ManifoldSpec::Torus4 {
            lengths: [1.0, -1.0, 1.0, 1.0],
            nodes: [8; 4],
        }
        .build()
        .is_err());
        assert!(ManifoldSpec::Sphere4Radial {
            radius: 0.0,
            radial_nodes: 512,
        }
        .build()
        .is_err());
        assert!(ManifoldSpec::Sphere4Radial {
            radius: 1.0,
            radial_nodes: 4,
        }
        .build()
        .is_err());
    }

    #[test]
    #[should_panic(expected = "different discretization")]
    fn fields_from_other_grids_panic() {
        let d1 = torus(8);
        let d2 = torus(8);
        let u = d1.constant(1.0);
        let _ = d2.laplacian(&u);
    }
}
