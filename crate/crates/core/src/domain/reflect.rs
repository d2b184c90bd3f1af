use super::{DomainError, Grid, PressureField, PressureLocation, VelocityField};

/// Half-grid node matching a full-grid node, and whether it was mirrored.
fn source_node(half: &Grid, full: &Grid, node: usize) -> (usize, bool) {
    let n = full.normal_axis();
    let k = full.cells();
    let mut idx = full.multi_index(node);
    let mirrored = idx[n] < k;
    idx[n] = if mirrored { k - idx[n] } else { idx[n] - k };
    (half.index(&idx[..full.dim()]), mirrored)
}

/// Extension to the full box: tangential components even in `x_n`, the
/// normal component odd.
pub fn reflect(u: &VelocityField) -> Result<VelocityField, DomainError> {
    let half = u.grid();
    if !half.half_space() {
        return Err(DomainError::NotHalfSpace);
    }
    let full = half.full();
    let n = half.normal_axis();
    let mut out = VelocityField::zeros(&full);
    for node in 0..full.num_nodes() {
        let (src, mirrored) = source_node(half, &full, node);
        for c in 0..half.dim() {
            let v = u.get(c, src);
            out.set(c, node, if mirrored && c == n { -v } else { v });
        }
    }
    Ok(out)
}

/// Restriction of a full-box field to `x_n ≥ 0`.
pub fn restrict(u: &VelocityField) -> Result<VelocityField, DomainError> {
    let full = u.grid();
    if full.half_space() {
        return Err(DomainError::GridMismatch);
    }
    let half = full.half();
    let n = full.normal_axis();
    let mut out = VelocityField::zeros(&half);
    for node in 0..half.num_nodes() {
        let mut idx = half.multi_index(node);
        idx[n] += full.cells();
        let src = full.index(&idx[..full.dim()]);
        for c in 0..full.dim() {
            out.set(c, node, u.get(c, src));
        }
    }
    Ok(out)
}

/// Mirror image `(Pu)(x′, x_n) = (u_t, −u_n)(x′, −x_n)` of a full-box field.
pub fn mirror(u: &VelocityField) -> Result<VelocityField, DomainError> {
    let full = u.grid();
    if full.half_space() {
        return Err(DomainError::GridMismatch);
    }
    let n = full.normal_axis();
    let last = full.shape()[n] - 1;
    let mut out = VelocityField::zeros(full);
    for node in 0..full.num_nodes() {
        let mut idx = full.multi_index(node);
        idx[n] = last - idx[n];
        let src = full.index(&idx[..full.dim()]);
        for c in 0..full.dim() {
            let v = u.get(c, src);
            out.set(c, node, if c == n { -v } else { v });
        }
    }
    Ok(out)
}

/// Even extension of a pressure.
pub fn reflect_pressure(p: &PressureField) -> Result<PressureField, DomainError> {
    let half = &p.grid;
    if !half.half_space() {
        return Err(DomainError::NotHalfSpace);
    }
    let full = half.full();
    let values = match p.location {
        PressureLocation::Nodes => {
            (0..full.num_nodes()).map(|node| p.values[source_node(half, &full, node).0]).collect()
        }
        PressureLocation::Cells => {
            let (hc, fc) = (half.cell_shape(), full.cell_shape());
            let n = half.normal_axis();
            let k = half.cells();
            (0..full.num_cells())
                .map(|cell| {
                    let mut idx = unflatten(cell, &fc, half.dim());
                    idx[n] = if idx[n] < k { k - 1 - idx[n] } else { idx[n] - k };
                    p.values[flatten(&idx, &hc, half.dim())]
                })
                .collect()
        }
    };
    Ok(PressureField { grid: full, location: p.location, values })
}

/// Restriction of a full-box pressure to `x_n ≥ 0`.
pub fn restrict_pressure(p: &PressureField) -> Result<PressureField, DomainError> {
    let full = &p.grid;
    if full.half_space() {
        return Err(DomainError::GridMismatch);
    }
    let half = full.half();
    let n = full.normal_axis();
    let k = full.cells();
    let values = match p.location {
        PressureLocation::Nodes => (0..half.num_nodes())
            .map(|node| {
                let mut idx = half.multi_index(node);
                idx[n] += k;
                p.values[full.index(&idx[..full.dim()])]
            })
            .collect(),
        PressureLocation::Cells => {
            let (hc, fc) = (half.cell_shape(), full.cell_shape());
            (0..half.num_cells())
                .map(|cell| {
                    let mut idx = unflatten(cell, &hc, half.dim());
                    idx[n] += k;
                    p.values[flatten(&idx, &fc, half.dim())]
                })
                .collect()
        }
    };
    Ok(PressureField { grid: half, location: p.location, values })
}

fn unflatten(mut i: usize, shape: &[usize; 3], dim: usize) -> [usize; 3] {
    let mut idx = [0; 3];
    for a in (0..dim).rev() {
        idx[a] = i % shape[a];
        i /= shape[a];
    }
    idx
}

fn flatten(idx: &[usize; 3], shape: &[usize; 3], dim: usize) -> usize {
    (0..dim).fold(0, |acc, a| acc * shape[a] + idx[a])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{divergence, leray_project};

    #[test]
    fn mirror_example() {
        let g = Grid::new(3, 2.0, 2, true).unwrap();
        let u = VelocityField::from_fn(&g, |x| {
            if (x[0] - 1.0).abs() < 1e-12 && x[1].abs() < 1e-12 && (x[2] - 2.0).abs() < 1e-12 {
                [3.0, 4.0, 5.0]
            } else {
                [0.0; 3]
            }
        });
        let r = reflect(&u).unwrap();
        let f = r.grid();
        let node = f.index(&[f.locate(0, 1.0), f.locate(1, 0.0), f.locate(2, -2.0)]);
        assert_eq!(r.at(node), [3.0, 4.0, -5.0]);
        assert_eq!(restrict(&r).unwrap(), u);
        assert_eq!(mirror(&r).unwrap(), r);
    }

    #[test]
    fn reflection_keeps_divergence_free() {
        let g = Grid::new(2, 1.0, 6, true).unwrap();
        let u = leray_project(&VelocityField::from_fn(&g, |x| [x[1].sin() + x[0], x[0] * x[1], 0.0])).unwrap();
        let r = reflect(&u).unwrap();
        assert!(divergence(&r).norm_l2() <= 1e-10 * r.norm_l2());
    }

    #[test]
    fn pressure_even_extension() {
        let g = Grid::new(2, 1.0, 4, true).unwrap();
        let p = PressureField::nodes(&g, (0..g.num_nodes()).map(|n| g.coords(n)[1]).collect());
        let r = reflect_pressure(&p).unwrap();
        for node in 0..r.grid.num_nodes() {
            assert!((r.values[node] - r.grid.coords(node)[1].abs()).abs() < 1e-14);
        }
        assert_eq!(restrict_pressure(&r).unwrap(), p);
        let c = PressureField::cells(&g, (0..g.num_cells()).map(|i| i as f64 - 15.5).collect());
        let rc = reflect_pressure(&c).unwrap();
        assert!(rc.mean().abs() < 1e-12);
        assert_eq!(restrict_pressure(&rc).unwrap(), c);
    }
}
