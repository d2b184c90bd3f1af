use serde::{Deserialize, Serialize};

use super::{gradient_field, partial, sym_gradient_field, BoundaryClass, DomainError, Grid, VelocityField};
use crate::constitutive::PPotential;
use crate::tensor::{nsym, SymTensor};

/// Axis-aligned box of nodes (inclusive index bounds) with its own
/// trapezoid weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl Region {
    pub fn whole(grid: &Grid) -> Self {
        let mut hi = [0; 3];
        for (a, h) in hi.iter_mut().enumerate().take(grid.dim()) {
            *h = grid.shape()[a] - 1;
        }
        Region { lo: [0; 3], hi }
    }

    /// Nodes at distance at least `margin` from every face except the plane
    /// `x_n = 0` of a half-space grid.
    pub fn with_margin(grid: &Grid, margin: f64) -> Result<Self, DomainError> {
        let m = (margin / grid.h() - 1e-9).ceil().max(0.0) as usize;
        let mut r = Region::whole(grid);
        for a in 0..grid.dim() {
            let plane = a == grid.normal_axis() && grid.half_space();
            if !plane {
                r.lo[a] = m;
            }
            r.hi[a] = r.hi[a].saturating_sub(m);
            if r.hi[a] <= r.lo[a] {
                return Err(DomainError::InvalidGrid(format!("margin {margin} leaves an empty region")));
            }
        }
        Ok(r)
    }

    pub fn contains(&self, grid: &Grid, node: usize) -> bool {
        let idx = grid.multi_index(node);
        (0..grid.dim()).all(|a| idx[a] >= self.lo[a] && idx[a] <= self.hi[a])
    }

    /// Trapezoid weights of the sub-box; zero outside.
    pub fn weights(&self, grid: &Grid) -> Vec<f64> {
        let h = grid.h();
        (0..grid.num_nodes())
            .map(|node| {
                let idx = grid.multi_index(node);
                let mut w = 1.0;
                for a in 0..grid.dim() {
                    if idx[a] < self.lo[a] || idx[a] > self.hi[a] {
                        return 0.0;
                    }
                    w *= if idx[a] == self.lo[a] || idx[a] == self.hi[a] { 0.5 * h } else { h };
                }
                w
            })
            .collect()
    }
}

/// `(Σ w |f|^p)^{1/p}` with trapezoid weights over `region` (whole grid if
/// `None`).
pub fn lp_norm(grid: &Grid, f: &[f64], p: f64, region: Option<&Region>) -> f64 {
    let w = region.map(|r| r.weights(grid)).unwrap_or_else(|| grid.weights());
    w.iter().zip(f).map(|(w, v)| w * v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
}

/// `g(x + λ e_k) − g(x)` on `region`, zero elsewhere.
pub fn difference_quotient(
    grid: &Grid,
    g: &[f64],
    lambda: f64,
    axis: usize,
    region: &Region,
) -> Result<Vec<f64>, DomainError> {
    let s = shift_steps(grid, lambda)?;
    let n = grid.shape()[axis] as isize;
    if region.lo[axis] as isize + s < 0 || region.hi[axis] as isize + s >= n {
        return Err(DomainError::ShiftTooLarge { lambda, axis });
    }
    let stride = grid.stride(axis) as isize;
    Ok((0..grid.num_nodes())
        .map(|node| if region.contains(grid, node) { g[(node as isize + s * stride) as usize] - g[node] } else { 0.0 })
        .collect())
}

fn shift_steps(grid: &Grid, lambda: f64) -> Result<isize, DomainError> {
    let s = lambda / grid.h();
    let r = s.round();
    if r == 0.0 || (s - r).abs() > 1e-9 * s.abs().max(1.0) {
        return Err(DomainError::ShiftNotOnGrid(lambda));
    }
    Ok(r as isize)
}

/// Weighted second-derivative integral and scaled difference-quotient
/// energy over a region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularityValues {
    /// `∫ (1+|D|)^{p−2} |∇D|²`.
    pub weighted_hessian: f64,
    /// `λ⁻² ∫ (1+|D(x+λe_k)|+|D(x)|)^{p−2} |Δ_{λ,k} D|²`.
    pub i_lambda_scaled: f64,
}

pub fn regularity_functionals(
    u: &VelocityField,
    pp: &PPotential,
    lambda: f64,
    axis: usize,
    region: &Region,
) -> Result<RegularityValues, DomainError> {
    let grid = u.grid();
    let d = grid.dim();
    let ns = nsym(d);
    let p = pp.p();
    let dfield = sym_gradient_field(u);
    let kel: Vec<Vec<f64>> = (0..ns).map(|s| dfield.values.iter().map(|t| t.to_kelvin()[s]).collect()).collect();
    let norms = dfield.norms();
    let w = region.weights(grid);

    let mut grad_sq = vec![0.0; grid.num_nodes()];
    for comp in &kel {
        for a in 0..d {
            for (g, v) in grad_sq.iter_mut().zip(partial(grid, comp, a)) {
                *g += v * v;
            }
        }
    }
    let weighted_hessian = (0..grid.num_nodes()).map(|n| w[n] * (1.0 + norms[n]).powf(p - 2.0) * grad_sq[n]).sum();

    let mut diff_sq = vec![0.0; grid.num_nodes()];
    for comp in &kel {
        for (g, v) in diff_sq.iter_mut().zip(difference_quotient(grid, comp, lambda, axis, region)?) {
            *g += v * v;
        }
    }
    let shifted = difference_quotient(grid, &norms, lambda, axis, region)?;
    let i_lambda: f64 = (0..grid.num_nodes())
        .filter(|&n| w[n] > 0.0)
        .map(|n| {
            let dn_shift = norms[n] + shifted[n];
            w[n] * (1.0 + dn_shift + norms[n]).powf(p - 2.0) * diff_sq[n]
        })
        .sum();
    Ok(RegularityValues { weighted_hessian, i_lambda_scaled: i_lambda / (lambda * lambda) })
}

/// `‖∇u‖_p / ‖D(u)‖_p` with nodal differences and trapezoid weights.
pub fn korn_ratio(u: &VelocityField, p: f64) -> Result<f64, DomainError> {
    let grid = u.grid();
    let d = grid.dim();
    let grads = gradient_field(u);
    let gn: Vec<f64> = grads.iter().map(|g| crate::tensor::matrix_norm(d, g)).collect();
    let dn: Vec<f64> = grads.iter().map(|g| SymTensor::symmetrize(d, g).norm()).collect();
    let den = lp_norm(grid, &dn, p, None);
    if den == 0.0 || !den.is_finite() {
        return Err(DomainError::ZeroStrain);
    }
    Ok(lp_norm(grid, &gn, p, None) / den)
}

/// Maximum of `|u|` over eight concentric shells of width `R/8` in `|x|`;
/// nodes beyond `7R/8` count towards the last shell.
pub fn shell_maxima(u: &VelocityField) -> Vec<f64> {
    const SHELLS: usize = 8;
    let grid = u.grid();
    let width = grid.radius() / SHELLS as f64;
    let mag = u.magnitude();
    let mut out = vec![0.0f64; SHELLS];
    for (node, m) in mag.iter().enumerate() {
        let x = grid.coords(node);
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let s = ((r / width) as usize).min(SHELLS - 1);
        out[s] = out[s].max(*m);
    }
    out
}

/// `(max |u_n|, max_{i<n} |∂u_i/∂x_n|)` over the slip plane; the derivative
/// is the one-sided second-order difference.
pub fn slip_trace_residual(u: &VelocityField) -> Result<(f64, f64), DomainError> {
    let grid = u.grid();
    if !grid.half_space() {
        return Err(DomainError::NotHalfSpace);
    }
    let n = grid.normal_axis();
    let derivs: Vec<Vec<f64>> = (0..n).map(|i| partial(grid, u.component(i), n)).collect();
    let mut normal = 0.0f64;
    let mut tangential = 0.0f64;
    for node in 0..grid.num_nodes() {
        if grid.boundary_class(node) == BoundaryClass::Plane {
            normal = normal.max(u.get(n, node).abs());
            for d in &derivs {
                tangential = tangential.max(d[node].abs());
            }
        }
    }
    Ok((normal, tangential))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::discrete_curl;

    #[test]
    fn norms_of_simple_fields() {
        let g = Grid::new(3, 1.0, 8, true).unwrap();
        // region [0,1]³ inside the half box
        let mut r = Region::whole(&g);
        r.lo[0] = 8;
        r.lo[1] = 8;
        let ones = vec![1.0; g.num_nodes()];
        assert!((lp_norm(&g, &ones, 2.5, Some(&r)) - 1.0).abs() < 1e-12);
        let x1: Vec<f64> = (0..g.num_nodes()).map(|n| g.coords(n)[0]).collect();
        let l2 = lp_norm(&g, &x1, 2.0, Some(&r));
        assert!((l2 - (1.0f64 / 3.0).sqrt()).abs() < 2.0 * g.h() * g.h());
    }

    #[test]
    fn difference_quotient_basics() {
        let g = Grid::new(2, 1.0, 8, true).unwrap();
        let r = Region::with_margin(&g, 0.25).unwrap();
        let lin: Vec<f64> = (0..g.num_nodes()).map(|n| 3.0 * g.coords(n)[0]).collect();
        let dq = difference_quotient(&g, &lin, 0.25, 0, &r).unwrap();
        for n in 0..g.num_nodes() {
            if r.contains(&g, n) {
                assert!((dq[n] - 0.75).abs() < 1e-13);
            }
        }
        assert!(matches!(difference_quotient(&g, &lin, 0.5, 0, &r), Err(DomainError::ShiftTooLarge { .. })));
        assert!(matches!(difference_quotient(&g, &lin, 0.1, 0, &r), Err(DomainError::ShiftNotOnGrid(_))));
    }

    #[test]
    fn trace_residuals() {
        let g = Grid::new(3, 1.0, 8, true).unwrap();
        let (a, b) = slip_trace_residual(&VelocityField::from_fn(&g, |x| [x[2], 0.0, 0.0])).unwrap();
        assert_eq!(a, 0.0);
        assert!((b - 1.0).abs() < 1e-12);
        let errs: Vec<f64> = [8, 16]
            .iter()
            .map(|&k| {
                let g = Grid::new(3, 1.0, k, true).unwrap();
                let u = VelocityField::from_fn(&g, |x| [x[2].cos(), 0.0, x[2].sin()]);
                let (a, b) = slip_trace_residual(&u).unwrap();
                assert!(a < 1e-15);
                b
            })
            .collect();
        assert!(errs[0] / errs[1] > 3.5, "{errs:?}");
        assert_eq!(slip_trace_residual(&VelocityField::zeros(&g)).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn korn_ratio_div_free_compact() {
        let g = Grid::new(2, 1.0, 16, true).unwrap();
        let psi: Vec<f64> = (0..g.num_nodes())
            .map(|n| {
                let x = g.coords(n);
                let r2 = x[0] * x[0] + (x[1] - 0.5).powi(2);
                if r2 < 0.09 {
                    (0.09 - r2).powi(3)
                } else {
                    0.0
                }
            })
            .collect();
        let u = discrete_curl(&g, &[psi]).unwrap();
        let k = korn_ratio(&u, 2.0).unwrap();
        assert!((k - 2f64.sqrt()).abs() < 1e-12, "{k}");
        assert!(matches!(korn_ratio(&VelocityField::zeros(&g), 2.0), Err(DomainError::ZeroStrain)));
    }

    #[test]
    fn shells_of_gaussian_decrease() {
        let g = Grid::new(2, 1.0, 16, true).unwrap();
        let u = VelocityField::from_fn(&g, |x| [(-8.0 * (x[0] * x[0] + x[1] * x[1])).exp(), 0.0, 0.0]);
        let s = shell_maxima(&u);
        assert!(s.windows(2).all(|w| w[1] < w[0]), "{s:?}");
    }

    #[test]
    fn sine_field_regularity_oracle() {
        // plane-normal shear u = (sin x_n, 0); the region ends near x_n = π so
        // the forward shift of the quotient costs almost nothing at the ends
        let g = Grid::new(2, 4.0, 64, true).unwrap();
        let pp = PPotential::power_b(2.0).unwrap();
        let u = VelocityField::from_fn(&g, |x| [x[1].sin(), 0.0, 0.0]);
        let r = Region::with_margin(&g, 0.875).unwrap();
        let v = regularity_functionals(&u, &pp, 2.0 * g.h(), 1, &r).unwrap();
        // |∇D|² = ½ sin²x₂ integrated over [−z₁,z₁]×[0,z₁]
        let z1 = 3.125f64;
        let exact = 0.5 * 2.0 * z1 * (z1 / 2.0 - (2.0 * z1).sin() / 4.0);
        assert!((v.weighted_hessian / exact - 1.0).abs() < 0.05, "{} {exact}", v.weighted_hessian);
        assert!((v.i_lambda_scaled / v.weighted_hessian - 1.0).abs() < 0.05);
        let z = regularity_functionals(&u.scaled(0.0), &pp, g.h(), 0, &r).unwrap();
        assert_eq!((z.weighted_hessian, z.i_lambda_scaled), (0.0, 0.0));
    }
}
