//! The geometric potential along the center-unstable direction.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::solenoid::{SkewProduct, SolenoidPoint};

/// Steps of the cone iteration.
pub const CONE_STEPS: usize = 40;
/// Largest principal-angle gap allowed between frames started one step apart.
pub const CONE_TOL: f64 = 1e-8;

/// Orthonormal basis of the column span, via thin QR.
fn orthonormal(a: &DMatrix<f64>) -> DMatrix<f64> {
    let k = a.ncols();
    a.clone().qr().q().columns(0, k).into_owned()
}

/// Largest sine of a principal angle between two orthonormal frames.
fn angle_change(u: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
    let resid = v - u * (u.transpose() * v);
    resid.column_iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Base points of the past of `p`, most recent first. The fiber encodes
/// only a limited depth; beyond it the chain continues through branch 0,
/// whose influence the cone contraction removes.
fn past_bases(f: &SkewProduct, p: &SolenoidPoint) -> Result<Vec<crate::torus::TorusPoint>> {
    let mut bases = match f.recover_history(p, CONE_STEPS) {
        Ok(h) => h.bases,
        Err(Error::InsufficientBurnIn { depth }) if depth > 0 => f.recover_history(p, depth)?.bases,
        Err(Error::InsufficientBurnIn { .. }) => Vec::new(),
        Err(e) => return Err(e),
    };
    let mut x = bases.last().copied().unwrap_or(p.base);
    while bases.len() < CONE_STEPS {
        x = f.base().preimage(&x, 0)?;
        bases.push(x);
    }
    Ok(bases)
}

/// Orthonormal frame of `E^cu(p)`: the base directions pushed forward from
/// `CONE_STEPS` steps in the past of `p`, which should lie on the attractor.
pub fn cu_frame(f: &SkewProduct, p: &SolenoidPoint) -> Result<DMatrix<f64>> {
    let m = f.dim();
    let n = 3 * m;
    let bases = past_bases(f, p)?;
    let push = |depth: usize| {
        let mut v = DMatrix::<f64>::zeros(n, m);
        for i in 0..m {
            v[(i, i)] = 1.0;
        }
        for b in bases[..depth].iter().rev() {
            v = orthonormal(&(f.jacobian(&SolenoidPoint::on_zero_section(*b)) * &v));
        }
        v
    };
    let v = push(CONE_STEPS);
    let angle = angle_change(&push(CONE_STEPS - 1), &v);
    if angle > CONE_TOL {
        return Err(Error::ConeIteration { angle });
    }
    Ok(v)
}

/// `-log` of the volume expansion of `Df(p)` on `E^cu(p)`, with volumes on
/// `E^cu` measured through the projection to the base. The projection
/// conjugates `Df|E^cu` to `Dg`, so this is `-log |det Dg(x)|`.
pub fn geometric_potential(f: &SkewProduct, p: &SolenoidPoint) -> Result<f64> {
    let m = f.dim();
    let v = cu_frame(f, p)?;
    let image = f.jacobian(p) * &v;
    let before = v.rows(0, m).into_owned().determinant().abs();
    let after = image.rows(0, m).into_owned().determinant().abs();
    Ok(-(after / before).ln())
}

/// The same expansion measured in the Euclidean metric of the tangent
/// space. It differs from [`geometric_potential`] by a coboundary, so the
/// Birkhoff averages agree.
pub fn geometric_potential_euclidean(f: &SkewProduct, p: &SolenoidPoint) -> Result<f64> {
    let m = f.dim();
    let v = cu_frame(f, p)?;
    let r = (f.jacobian(p) * &v).qr().r();
    Ok(-(0..m).map(|i| r[(i, i)].abs().ln()).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use crate::system::{System, SystemConfig};

    #[test]
    fn doubling_birkhoff_average_is_minus_log_two() {
        let s = System::build(SystemConfig::linear_preset()).unwrap();
        let sample = s.f.attractor_sample(100, 1, 9);
        let mut rng = stream_rng(9, 99, 0);
        let mut p = sample.points[0];
        let n = 20_000;
        let mut sum = 0.0;
        for _ in 0..n {
            assert!((geometric_potential(&s.f, &p).unwrap() + 2f64.ln()).abs() < 1e-6);
            sum += geometric_potential_euclidean(&s.f, &p).unwrap();
            p = s.f.eval_dithered(&p, &mut rng);
        }
        assert!((sum / n as f64 + 2f64.ln()).abs() < 1e-3);
    }

    #[test]
    fn fixed_point_value_is_the_base_determinant() {
        let s = System::build(SystemConfig::pitchfork_preset()).unwrap();
        let m = s.f.dim();
        let z = s.f.fiber_scale() / (1.0 - s.f.lambda_s());
        let mut p = SolenoidPoint::on_zero_section(crate::torus::TorusPoint::origin(m));
        for w in p.fiber_mut() {
            *w = num_complex::Complex64::new(z, 0.0);
        }
        let want = -s.base().jacobian_det(&p.base).abs().ln();
        assert!((geometric_potential(&s.f, &p).unwrap() - want).abs() < 1e-9);
        assert!((geometric_potential_euclidean(&s.f, &p).unwrap() - want).abs() < 1e-9);
        assert!((want + (0.95f64 * 3.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn adapted_value_matches_the_base_potential() {
        let s = System::build(SystemConfig::pitchfork_preset()).unwrap();
        let phi = crate::thermo::Potential::geometric();
        for p in s.f.attractor_sample(60, 40, 2).points {
            let cone = geometric_potential(&s.f, &p).unwrap();
            assert!((cone - phi.eval(&s.f, &p)).abs() < 1e-9);
        }
    }
}
