use nalgebra::{DMatrix, DVector};

use super::SolverError;
use crate::constitutive::PPotential;
use crate::domain::{leray_project_with, Admissibility, VelocityField};
use crate::expr::ExprField;
use crate::fem::Q1;
use crate::stokes_basis::StokesBasis;
use crate::tensor::{nsym, MAX_SYM};

/// Relative change allowed when projecting the supplied transport field.
pub const TRANSPORT_SOLENOIDAL_TOL: f64 = 0.05;

#[derive(Debug, Clone)]
enum Forcing {
    Zero,
    Steady(DVector<f64>),
    Unsteady(ExprField),
}

#[derive(Debug, Clone)]
enum Transport {
    None,
    Steady { skew: DMatrix<f64>, raw: DMatrix<f64> },
    Unsteady(ExprField),
    Picard,
}

/// Stress evaluation at a coefficient vector.
#[derive(Debug, Clone)]
pub struct StressEval {
    /// `(S(D u_m), D a_k)` for each k.
    pub force: DVector<f64>,
    /// `(S(D u_m), D u_m)`.
    pub dissipation: f64,
}

/// The Galerkin ODE system `c' = F − A(c) + T c` in a fixed eigenbasis.
#[derive(Debug, Clone)]
pub struct GalerkinSystem<'a> {
    basis: &'a StokesBasis,
    pp: PPotential,
    q1: Q1,
    ns: usize,
    /// Kelvin-coordinate strain of each mode at every quadrature point.
    dall: DMatrix<f64>,
    /// Mode values and `V`-independent gradients at quadrature points, built
    /// only when transport is active.
    qp_values: Option<DMatrix<f64>>,
    qp_grads: Option<Vec<DMatrix<f64>>>,
    mass_modes: DMatrix<f64>,
    forcing: Forcing,
    transport: Transport,
    newtonian_jacobian: Option<DMatrix<f64>>,
}

impl<'a> GalerkinSystem<'a> {
    /// `f` and `v` of `None` mean zero; a steady `v` is validated and
    /// projected once.
    pub fn new(
        basis: &'a StokesBasis,
        pp: PPotential,
        f: Option<&ExprField>,
        v: Option<&ExprField>,
        picard: bool,
    ) -> Result<Self, SolverError> {
        let mut sys = Self::bare(basis, pp);
        let grid = basis.grid();
        sys.forcing = match f {
            None => Forcing::Zero,
            Some(f) if f.is_identically_zero() => Forcing::Zero,
            Some(f) if f.depends_on_time() => Forcing::Unsteady(f.clone()),
            Some(f) => Forcing::Steady(sys.load_vector(&f.sample(grid, 0.0)?)),
        };

        let active_v = v.filter(|v| !v.is_identically_zero());
        if picard || active_v.is_some() {
            sys.build_qp_tables();
        }
        sys.transport = if picard {
            Transport::Picard
        } else {
            match active_v {
                None => Transport::None,
                Some(v) if v.depends_on_time() => {
                    sys.validated_transport_field(v, 0.0)?;
                    Transport::Unsteady(v.clone())
                }
                Some(v) => {
                    let field = sys.validated_transport_field(v, 0.0)?;
                    sys.steady_transport(&field)
                }
            }
        };
        Ok(sys)
    }

    /// Steady data given as nodal fields (e.g. reflected half-space data).
    pub fn with_nodal_data(
        basis: &'a StokesBasis,
        pp: PPotential,
        f: Option<&VelocityField>,
        v: Option<&VelocityField>,
    ) -> Result<Self, SolverError> {
        let mut sys = Self::bare(basis, pp);
        for field in f.iter().chain(v.iter()) {
            if field.grid() != basis.grid() {
                return Err(SolverError::GridMismatch);
            }
        }
        if let Some(f) = f {
            sys.forcing = Forcing::Steady(sys.load_vector(f));
        }
        if let Some(v) = v.filter(|v| v.max_abs() > 0.0) {
            sys.build_qp_tables();
            let field = sys.validate_nodal(v)?;
            sys.transport = sys.steady_transport(&field);
        }
        Ok(sys)
    }

    fn bare(basis: &'a StokesBasis, pp: PPotential) -> Self {
        let grid = basis.grid();
        let q1 = Q1::new(grid);
        let m = basis.len();
        let ns = nsym(grid.dim());
        let rows = q1.num_points(grid) * ns;
        let mut dall = DMatrix::<f64>::zeros(rows, m);
        for k in 0..m {
            q1.sym_grad(grid, basis.mode(k).velocity.data(), dall.column_mut(k).as_mut_slice());
        }
        let w = grid.weights();
        let nn = grid.num_nodes();
        let mass_modes = DMatrix::from_fn(grid.num_dofs(), m, |i, k| w[i % nn] * basis.mode(k).velocity.data()[i]);
        let newtonian_jacobian = (pp.p() == 2.0).then(|| {
            let lam = DVector::from_iterator(m, basis.modes().iter().map(|md| md.lambda));
            DMatrix::from_diagonal(&(lam * pp.mu()))
        });
        GalerkinSystem {
            basis,
            pp,
            q1,
            ns,
            dall,
            qp_values: None,
            qp_grads: None,
            mass_modes,
            forcing: Forcing::Zero,
            transport: Transport::None,
            newtonian_jacobian,
        }
    }

    fn steady_transport(&self, field: &VelocityField) -> Transport {
        let raw = self.transport_matrix(&self.q1.values(self.basis.grid(), field.data()));
        Transport::Steady { skew: skew(&raw), raw }
    }

    pub fn basis(&self) -> &StokesBasis {
        self.basis
    }

    pub fn potential(&self) -> &PPotential {
        &self.pp
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    /// `(g, a_k)` in the nodal rule.
    pub fn load_vector(&self, g: &VelocityField) -> DVector<f64> {
        self.mass_modes.tr_mul(&DVector::from_column_slice(g.data()))
    }

    pub fn forcing(&self, t: f64) -> Result<DVector<f64>, SolverError> {
        Ok(match &self.forcing {
            Forcing::Zero => DVector::zeros(self.len()),
            Forcing::Steady(v) => v.clone(),
            Forcing::Unsteady(f) => self.load_vector(&f.sample(self.basis.grid(), t)?),
        })
    }

    pub fn has_forcing(&self) -> bool {
        !matches!(self.forcing, Forcing::Zero)
    }

    /// Samples `v`, checks it is close to solenoidal and tangential to the
    /// plane, and returns its projection.
    fn validated_transport_field(&self, v: &ExprField, t: f64) -> Result<VelocityField, SolverError> {
        self.validate_nodal(&v.sample(self.basis.grid(), t)?)
    }

    fn validate_nodal(&self, raw: &VelocityField) -> Result<VelocityField, SolverError> {
        let (proj, rep) = leray_project_with(raw, Admissibility::SlipPlane)?;
        let change = proj.sub(raw).norm_l2() / raw.norm_l2().max(f64::MIN_POSITIVE);
        if rep.residual > 1e-8 || change > TRANSPORT_SOLENOIDAL_TOL {
            return Err(SolverError::BadTransport(format!(
                "projection changes the field by {:.2}% (residual {:.1e})",
                100.0 * change,
                rep.residual
            )));
        }
        Ok(proj)
    }

    fn build_qp_tables(&mut self) {
        let grid = self.basis.grid();
        let d = grid.dim();
        let nq = self.q1.num_points(grid);
        let m = self.len();
        let mut vals = DMatrix::<f64>::zeros(nq * d, m);
        let mut grads = vec![DMatrix::<f64>::zeros(nq * d, m); d];
        for k in 0..m {
            let data = self.basis.mode(k).velocity.data();
            for (q, v) in self.q1.values(grid, data).iter().enumerate() {
                for i in 0..d {
                    vals[(q * d + i, k)] = v[i];
                }
            }
            for (q, g) in self.q1.gradients(grid, data).iter().enumerate() {
                for (l, gl) in grads.iter_mut().enumerate() {
                    for i in 0..d {
                        gl[(q * d + i, k)] = g[i][l];
                    }
                }
            }
        }
        self.qp_values = Some(vals);
        self.qp_grads = Some(grads);
    }

    /// `T_kj = Σ_q w V_l a_{j,i} ∂_l a_{k,i}`, the literal transport pairing
    /// `(V ⊗ a_j, ∇a_k)`.
    fn transport_matrix(&self, vq: &[[f64; 3]]) -> DMatrix<f64> {
        let d = self.basis.grid().dim();
        let vals = self.qp_values.as_ref().expect("transport tables built");
        let grads = self.qp_grads.as_ref().expect("transport tables built");
        let mut g = DMatrix::<f64>::zeros(vals.nrows(), vals.ncols());
        for (l, gl) in grads.iter().enumerate() {
            for k in 0..g.ncols() {
                for (q, v) in vq.iter().enumerate() {
                    for i in 0..d {
                        g[(q * d + i, k)] += v[l] * gl[(q * d + i, k)];
                    }
                }
            }
        }
        g.tr_mul(vals) * self.q1.weight()
    }

    /// Transport matrices `(skew, literal)` at time `t` given the previous
    /// coefficients (used by the lagged option).
    pub fn transport(
        &self,
        t: f64,
        lagged: &DVector<f64>,
    ) -> Result<Option<(DMatrix<f64>, DMatrix<f64>)>, SolverError> {
        let grid = self.basis.grid();
        Ok(match &self.transport {
            Transport::None => None,
            Transport::Steady { skew, raw } => Some((skew.clone(), raw.clone())),
            Transport::Unsteady(v) => {
                let field = self.validated_transport_field(v, t)?;
                let raw = self.transport_matrix(&self.q1.values(grid, field.data()));
                Some((skew(&raw), raw))
            }
            Transport::Picard => {
                let d = grid.dim();
                let vals = self.qp_values.as_ref().expect("transport tables built");
                let flat = vals * lagged;
                let vq: Vec<[f64; 3]> = (0..flat.len() / d)
                    .map(|q| {
                        let mut v = [0.0; 3];
                        v[..d].copy_from_slice(&flat.as_slice()[q * d..(q + 1) * d]);
                        v
                    })
                    .collect();
                let raw = self.transport_matrix(&vq);
                Some((skew(&raw), raw))
            }
        })
    }

    /// `A(c)_k = (S(D u_m), D a_k)` and the dissipation `(S(D u_m), D u_m)`.
    pub fn stress(&self, c: &DVector<f64>, t: f64) -> Result<StressEval, SolverError> {
        let e = &self.dall * c;
        let ns = self.ns;
        let mut s = DVector::<f64>::zeros(e.len());
        let mut diss = 0.0;
        for (eb, sb) in e.as_slice().chunks(ns).zip(s.as_mut_slice().chunks_mut(ns)) {
            let g = self.pp.secant_from_kelvin(eb);
            if !g.is_finite() {
                return Err(SolverError::NonFinite { t });
            }
            for (x, y) in eb.iter().zip(sb.iter_mut()) {
                *y = g * x;
                diss += g * x * x;
            }
        }
        let wq = self.q1.weight();
        Ok(StressEval { force: self.dall.tr_mul(&s) * wq, dissipation: diss * wq })
    }

    /// `∂A/∂c = Σ_q w D_qᵀ H(D u_m(q)) D_q`.
    pub fn stress_jacobian(&self, c: &DVector<f64>) -> Result<DMatrix<f64>, SolverError> {
        if let Some(j) = &self.newtonian_jacobian {
            return Ok(j.clone());
        }
        let e = &self.dall * c;
        let ns = self.ns;
        let m = self.len();
        let mut hd = DMatrix::<f64>::zeros(self.dall.nrows(), m);
        let mut h = [0.0; MAX_SYM * MAX_SYM];
        for (q, eb) in e.as_slice().chunks(ns).enumerate() {
            self.pp.hessian_kelvin_into(eb, &mut h[..ns * ns])?;
            for k in 0..m {
                for a in 0..ns {
                    let mut acc = 0.0;
                    for b in 0..ns {
                        acc += h[a * ns + b] * self.dall[(q * ns + b, k)];
                    }
                    hd[(q * ns + a, k)] = acc;
                }
            }
        }
        Ok(self.dall.tr_mul(&hd) * self.q1.weight())
    }

    /// Right-hand side `F(t) − A(c) + T_s c`.
    pub fn rhs(&self, c: &DVector<f64>, t: f64) -> Result<DVector<f64>, SolverError> {
        let mut r = self.forcing(t)? - self.stress(c, t)?.force;
        if let Some((ts, _)) = self.transport(t, c)? {
            r += ts * c;
        }
        Ok(r)
    }

    /// `Σ c_k a_k`.
    pub fn reconstruct(&self, c: &DVector<f64>) -> VelocityField {
        self.basis.reconstruct(c)
    }
}

fn skew(t: &DMatrix<f64>) -> DMatrix<f64> {
    (t - t.transpose()) * 0.5
}
