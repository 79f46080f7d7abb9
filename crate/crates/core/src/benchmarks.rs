//! Benchmark problem definitions: the manufactured solution on the circle
//! and the wavy-channel traction problem, with their geometry and meshes.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix2, Point2, Vector2};

use crate::error::{Error, Result};
use crate::mesh::{BoundaryEdgeSpec, BoundaryTag, TriMesh};
use crate::nurbs::{NurbsCurve, ParamInterval};
use crate::solver::{BoundaryPoint, ProblemSpec};

/// Analytic reference fields of a benchmark.
#[derive(Clone)]
pub struct ExactSolution {
    pub velocity: Arc<dyn Fn(Point2<f64>) -> Vector2<f64> + Send + Sync>,
    /// (grad u)_{ab} = d u_a / d x_b
    pub velocity_gradient: Arc<dyn Fn(Point2<f64>) -> Matrix2<f64> + Send + Sync>,
    pub velocity_laplacian: Arc<dyn Fn(Point2<f64>) -> Vector2<f64> + Send + Sync>,
    pub pressure: Arc<dyn Fn(Point2<f64>) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for ExactSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("ExactSolution")
    }
}

impl ExactSolution {
    /// Pseudo-traction (nu grad u - p I) n of the exact fields.
    pub fn traction(&self, nu: f64, x: Point2<f64>, n: Vector2<f64>) -> Vector2<f64> {
        let g = (self.velocity_gradient)(x);
        let p = (self.pressure)(x);
        nu * g * n - p * n
    }
}

/// The closed-form velocity/pressure pair driving both benchmarks: a
/// divergence-free polynomial velocity from the stream function
/// x^2 (1-x)^2 y^2 (1-y)^2 and the pressure x (1-x).
pub fn reference_fields() -> ExactSolution {
    fn f(x: f64) -> f64 {
        x * x * (1.0 - x) * (1.0 - x)
    }
    fn df(x: f64) -> f64 {
        2.0 * x - 6.0 * x * x + 4.0 * x * x * x
    }
    fn d2f(x: f64) -> f64 {
        2.0 - 12.0 * x + 12.0 * x * x
    }
    fn d3f(x: f64) -> f64 {
        24.0 * x - 12.0
    }
    ExactSolution {
        velocity: Arc::new(|p: Point2<f64>| {
            Vector2::new(f(p.x) * df(p.y), -df(p.x) * f(p.y))
        }),
        velocity_gradient: Arc::new(|p: Point2<f64>| {
            Matrix2::new(
                df(p.x) * df(p.y),
                f(p.x) * d2f(p.y),
                -d2f(p.x) * f(p.y),
                -df(p.x) * df(p.y),
            )
        }),
        velocity_laplacian: Arc::new(|p: Point2<f64>| {
            Vector2::new(
                d2f(p.x) * df(p.y) + f(p.x) * d3f(p.y),
                -d3f(p.x) * f(p.y) - df(p.x) * d2f(p.y),
            )
        }),
        pressure: Arc::new(|p: Point2<f64>| p.x * (1.0 - p.x)),
    }
}

fn reference_pressure_gradient(p: Point2<f64>) -> Vector2<f64> {
    Vector2::new(1.0 - 2.0 * p.x, 0.0)
}

/// A benchmark: geometry, mesh, problem data and reference fields.
#[derive(Debug)]
pub struct Benchmark {
    pub name: String,
    pub curves: Vec<Arc<NurbsCurve>>,
    pub mesh: TriMesh,
    pub spec: ProblemSpec,
    pub exact: Option<ExactSolution>,
    /// max deviation of the fitted boundary from its defining function
    pub geometry_fit_residual: f64,
}

impl Benchmark {
    /// Verify that the registered exact solution satisfies the strong form
    /// at sampled points and that the geometry fit met its tolerance.
    pub fn validate(&self) -> Result<()> {
        if self.geometry_fit_residual > 1e-10 {
            return Err(Error::Benchmark(format!(
                "geometry fit residual {:.3e} above 1e-10",
                self.geometry_fit_residual
            )));
        }
        let Some(exact) = &self.exact else {
            return Ok(());
        };
        let nu = self.spec.viscosity;
        // deterministic sample points in the unit square
        for i in 0..100 {
            let a = ((i as f64) * 0.618033988749895).fract();
            let b = ((i as f64) * 0.324717957244746).fract();
            let x = Point2::new(a, b);
            // divergence-free
            let g = (exact.velocity_gradient)(x);
            if (g[(0, 0)] + g[(1, 1)]).abs() > 1e-10 {
                return Err(Error::Benchmark(format!(
                    "registered velocity is not divergence-free at {x:?}"
                )));
            }
            // momentum residual: -nu lap u + grad p = s
            let s = (self.spec.body_force)(x);
            let resid =
                -nu * (exact.velocity_laplacian)(x) + reference_pressure_gradient(x) - s;
            if resid.norm() > 1e-10 {
                return Err(Error::Benchmark(format!(
                    "strong-form residual {:.3e} at {x:?}",
                    resid.norm()
                )));
            }
            // finite-difference cross-check of the registered gradient
            let h = 1e-6;
            let dudx = ((exact.velocity)(Point2::new(x.x + h, x.y))
                - (exact.velocity)(Point2::new(x.x - h, x.y)))
                / (2.0 * h);
            if (dudx - Vector2::new(g[(0, 0)], g[(1, 0)])).norm() > 1e-6 {
                return Err(Error::Benchmark("gradient closure mismatch".into()));
            }
        }
        Ok(())
    }
}

/// Stokes problem on the circle of radius 0.5 centred at (0.5, 0.5):
/// pure Dirichlet with data and body force from the reference fields.
pub fn benchmark_circle() -> Result<Benchmark> {
    let exact = reference_fields();
    let curve = Arc::new(NurbsCurve::circle(Point2::new(0.5, 0.5), 0.5));
    let mesh = circle_mesh(&curve, 8)?;
    let nu = 1.0;
    let lap = exact.velocity_laplacian.clone();
    let vel = exact.velocity.clone();
    let spec = ProblemSpec {
        viscosity: nu,
        body_force: Arc::new(move |x| -nu * lap(x) + reference_pressure_gradient(x)),
        dirichlet: Arc::new(move |bp: &BoundaryPoint| vel(bp.x)),
        neumann: Arc::new(|_: &BoundaryPoint| Vector2::zeros()),
        pure_dirichlet: true,
    };
    let b = Benchmark {
        name: "circle".into(),
        curves: vec![curve],
        mesh,
        spec,
        exact: Some(exact),
        geometry_fit_residual: 0.0,
    };
    b.validate()?;
    Ok(b)
}

/// Fan + ring triangulation of the circle with `n` boundary arcs; every
/// boundary edge carries its parametric interval.
pub fn circle_mesh(curve: &Arc<NurbsCurve>, n: usize) -> Result<TriMesh> {
    if n < 4 || n % 2 != 0 {
        return Err(Error::Argument("circle mesh needs an even sector count >= 4".into()));
    }
    let center = Point2::new(0.5, 0.5);
    let mut vertices = vec![center];
    // inner ring at half radius
    for i in 0..n {
        let boundary = curve.evaluate(i as f64 / n as f64)?;
        vertices.push(Point2::from(center.coords + 0.5 * (boundary - center)));
    }
    // boundary ring on the curve
    for i in 0..n {
        vertices.push(curve.evaluate(i as f64 / n as f64)?);
    }
    let ring = |i: usize| 1 + (i % n);
    let bnd = |i: usize| 1 + n + (i % n);

    let mut elements = Vec::new();
    for i in 0..n {
        elements.push([0, ring(i), ring(i + 1)]);
    }
    for i in 0..n {
        elements.push([ring(i), bnd(i), bnd(i + 1)]);
        elements.push([ring(i), bnd(i + 1), ring(i + 1)]);
    }

    let mut boundary = Vec::new();
    for i in 0..n {
        boundary.push(BoundaryEdgeSpec {
            v: [bnd(i), bnd(i + 1)],
            tag: BoundaryTag::Dirichlet,
            interval: Some(ParamInterval::new(
                0,
                i as f64 / n as f64,
                (i + 1) as f64 / n as f64,
            )?),
        });
    }
    TriMesh::new(vertices, elements, boundary)
}

/// The oscillatory channel wall height.
pub fn wavy_wall(x: f64) -> f64 {
    (1.0 + (5.0 * std::f64::consts::PI * x).cos()) / 10.0
}

/// Least-squares B-spline fit of the wavy wall as a planar curve
/// (x(lambda), y(lambda)) with x(lambda) = lambda exact by construction.
pub fn fit_wavy_wall(degree: usize, spans: usize, samples: usize) -> Result<(NurbsCurve, f64)> {
    let n_ctrl = spans + degree;
    let mut knots = vec![0.0; degree + 1];
    for i in 1..spans {
        knots.push(i as f64 / spans as f64);
    }
    knots.extend(vec![1.0; degree + 1]);

    // Greville abscissae reproduce x(lambda) = lambda exactly
    let greville: Vec<f64> = (0..n_ctrl)
        .map(|i| knots[i + 1..i + 1 + degree].iter().sum::<f64>() / degree as f64)
        .collect();

    // probe curve for basis evaluation
    let probe = NurbsCurve::new(
        degree,
        knots.clone(),
        greville.iter().map(|&x| Point2::new(x, 0.0)).collect(),
        vec![1.0; n_ctrl],
    )?;

    // endpoints interpolate; fit the interior control ordinates
    let n_free = n_ctrl - 2;
    let mut a = DMatrix::<f64>::zeros(samples, n_free);
    let mut b = DVector::<f64>::zeros(samples);
    for r in 0..samples {
        let lam = (r as f64 + 0.5) / samples as f64;
        let (first, vals) = probe.basis_span_values(lam)?;
        let mut rhs = wavy_wall(lam);
        for (j, v) in vals.iter().enumerate() {
            let col = first + j;
            if col == 0 {
                rhs -= v * wavy_wall(0.0);
            } else if col == n_ctrl - 1 {
                rhs -= v * wavy_wall(1.0);
            } else {
                a[(r, col - 1)] = *v;
            }
        }
        b[r] = rhs;
    }
    let qr = a.qr();
    let y_free = qr
        .solve(&b)
        .ok_or_else(|| Error::Benchmark("wall fit least-squares failed".into()))?;

    let mut ctrl = Vec::with_capacity(n_ctrl);
    for i in 0..n_ctrl {
        let y = if i == 0 {
            wavy_wall(0.0)
        } else if i == n_ctrl - 1 {
            wavy_wall(1.0)
        } else {
            y_free[i - 1]
        };
        ctrl.push(Point2::new(greville[i], y));
    }
    let curve = NurbsCurve::new(degree, knots, ctrl, vec![1.0; n_ctrl])?;

    // dense residual check
    let mut max_dev = 0.0f64;
    for i in 0..=1000 {
        let lam = i as f64 / 1000.0;
        let p = curve.evaluate(lam)?;
        max_dev = max_dev.max((p.y - wavy_wall(lam)).abs());
        max_dev = max_dev.max((p.x - lam).abs());
    }
    Ok((curve, max_dev))
}

/// Channel over the oscillatory wall: Dirichlet data from the reference
/// velocity on the three straight sides, the exact pseudo-traction of the
/// reference fields imposed on the wavy Neumann wall. The traction is
/// prescribed on the true geometry (position and normal from the curve), so
/// polynomial boundary approximations commit a modelling error there.
pub fn benchmark_wavy_channel(nx: usize, ny: usize) -> Result<Benchmark> {
    let exact = reference_fields();
    let (curve, fit_residual) = fit_wavy_wall(9, 40, 2000)?;
    if fit_residual > 1e-10 {
        return Err(Error::Benchmark(format!(
            "wavy wall fit residual {fit_residual:.3e} above 1e-10"
        )));
    }
    let curve = Arc::new(curve);
    let mesh = wavy_channel_mesh(&curve, nx, ny)?;

    let nu = 1.0;
    let lap = exact.velocity_laplacian.clone();
    let vel = exact.velocity.clone();
    let exact_for_traction = exact.clone();
    let curve_for_traction = curve.clone();
    let spec = ProblemSpec {
        viscosity: nu,
        body_force: Arc::new(move |x| -nu * lap(x) + reference_pressure_gradient(x)),
        dirichlet: Arc::new(move |bp: &BoundaryPoint| vel(bp.x)),
        neumann: Arc::new(move |bp: &BoundaryPoint| {
            match bp.curve {
                Some((_, lambda)) => {
                    // true wall point and true outward normal (domain above:
                    // rightward tangent, outward points down-right)
                    let x = curve_for_traction
                        .evaluate(lambda)
                        .expect("lambda inside the wall parameter range");
                    let d = curve_for_traction
                        .derivative(lambda, 1)
                        .expect("wall tangent");
                    let n = Vector2::new(d.y, -d.x) / d.norm();
                    exact_for_traction.traction(nu, x, n)
                }
                None => exact_for_traction.traction(nu, bp.x, bp.normal),
            }
        }),
        pure_dirichlet: false,
    };

    let b = Benchmark {
        name: "wavy-channel".into(),
        curves: vec![curve],
        mesh,
        spec,
        exact: Some(exact),
        geometry_fit_residual: fit_residual,
    };
    b.validate()?;
    Ok(b)
}

/// Structured triangulation of { (x, y) : 0 <= x <= 1, wall(x) <= y <= 1 };
/// the bottom edges ride on the fitted curve and carry Neumann tags.
pub fn wavy_channel_mesh(curve: &Arc<NurbsCurve>, nx: usize, ny: usize) -> Result<TriMesh> {
    if nx < 2 || ny < 2 {
        return Err(Error::Argument("wavy mesh needs nx, ny >= 2".into()));
    }
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let xi = i as f64 / nx as f64;
            if j == 0 {
                vertices.push(curve.evaluate(xi)?);
            } else {
                let bottom = curve.evaluate(xi)?.y;
                let y = bottom + (1.0 - bottom) * j as f64 / ny as f64;
                vertices.push(Point2::new(xi, y));
            }
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;

    let mut elements = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10, v11, v01) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            if (i + j) % 2 == 0 {
                elements.push([v00, v10, v11]);
                elements.push([v00, v11, v01]);
            } else {
                elements.push([v00, v10, v01]);
                elements.push([v10, v11, v01]);
            }
        }
    }

    let mut boundary = Vec::new();
    for i in 0..nx {
        boundary.push(BoundaryEdgeSpec {
            v: [id(i, 0), id(i + 1, 0)],
            tag: BoundaryTag::Neumann,
            interval: Some(ParamInterval::new(
                0,
                i as f64 / nx as f64,
                (i + 1) as f64 / nx as f64,
            )?),
        });
    }
    for j in 0..ny {
        boundary.push(BoundaryEdgeSpec {
            v: [id(nx, j), id(nx, j + 1)],
            tag: BoundaryTag::Dirichlet,
            interval: None,
        });
        boundary.push(BoundaryEdgeSpec {
            v: [id(0, j + 1), id(0, j)],
            tag: BoundaryTag::Dirichlet,
            interval: None,
        });
    }
    for i in 0..nx {
        boundary.push(BoundaryEdgeSpec {
            v: [id(i + 1, ny), id(i, ny)],
            tag: BoundaryTag::Dirichlet,
            interval: None,
        });
    }
    TriMesh::new(vertices, elements, boundary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_velocity_values() {
        let exact = reference_fields();
        // x^2 (1-x)^2 = 1/16 and (2y - 6y^2 + 4y^3) = 0 at 1/2
        let u = (exact.velocity)(Point2::new(0.5, 0.5));
        assert!(u.norm() < 1e-15);
        // p at x = 0.5
        assert!(((exact.pressure)(Point2::new(0.5, 0.7)) - 0.25).abs() < 1e-15);
        // divergence-free at quasi-random points + symbolic-gradient check
        for i in 0..100 {
            let x = Point2::new(
                ((i as f64) * 0.618033988749895).fract(),
                ((i as f64) * 0.324717957244746).fract(),
            );
            let g = (exact.velocity_gradient)(x);
            assert!((g[(0, 0)] + g[(1, 1)]).abs() < 1e-14);
        }
    }

    #[test]
    fn circle_benchmark_registers() {
        let b = benchmark_circle().unwrap();
        assert_eq!(b.mesh.n_elements(), 24);
        assert_eq!(b.mesh.euler_characteristic(), 1);
        // all boundary edges curved and Dirichlet
        for f in b.mesh.faces.iter().filter(|f| f.boundary.is_some()) {
            assert!(f.is_dirichlet());
            assert!(f.boundary.as_ref().unwrap().interval.is_some());
        }
    }

    #[test]
    fn wavy_wall_values() {
        assert!((wavy_wall(0.0) - 0.2).abs() < 1e-15);
        assert!(wavy_wall(0.2).abs() < 1e-15);
    }

    #[test]
    fn wavy_wall_fit_tolerance() {
        let (_, residual) = fit_wavy_wall(9, 40, 2000).unwrap();
        assert!(residual <= 1e-10, "fit residual {residual:.3e}");
    }

    #[test]
    fn wavy_benchmark_registers() {
        let b = benchmark_wavy_channel(10, 4).unwrap();
        assert_eq!(b.mesh.n_elements(), 80);
        assert_eq!(b.mesh.euler_characteristic(), 1);
        let neumann = b.mesh.faces.iter().filter(|f| f.is_neumann()).count();
        assert_eq!(neumann, 10);
    }
}
