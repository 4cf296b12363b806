use std::f64::consts::PI;

use crate::geometry::Vec3;

/// Unit viewing direction (from the shape toward the camera).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewDirection(Vec3);

impl ViewDirection {
    /// Normalizes `v`; `None` for zero or non-finite input.
    pub fn new(v: Vec3) -> Option<Self> {
        let n = v.norm();
        (n > 0.0 && n.is_finite()).then(|| Self(v / n))
    }

    pub fn from_spherical(theta: f64, phi: f64) -> Self {
        Self(Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()))
    }

    pub fn vector(&self) -> Vec3 {
        self.0
    }

    /// Polar angle in `[0, π]`.
    pub fn theta(&self) -> f64 {
        self.0.z.clamp(-1.0, 1.0).acos()
    }

    /// Azimuth in `[0, 2π)`.
    pub fn phi(&self) -> f64 {
        let p = self.0.y.atan2(self.0.x);
        if p < 0.0 {
            (p + 2.0 * PI).min(2.0 * PI - f64::EPSILON)
        } else {
            p
        }
    }

    /// Great-circle angle to `other`.
    pub fn angle(&self, other: &Self) -> f64 {
        // atan2 form stays accurate for nearly equal or opposite vectors
        self.0.cross(&other.0).norm().atan2(self.0.dot(&other.0))
    }
}

/// Spherical Fibonacci lattice of `n` directions.
pub fn sample_directions(n: usize) -> Vec<ViewDirection> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2 * i + 1) as f64 / n as f64;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            ViewDirection::new(Vec3::new(rho * phi.cos(), rho * phi.sin(), z)).expect("unit")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_direction() {
        let d = sample_directions(1);
        assert_eq!(d.len(), 1);
        assert!((d[0].vector().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lattice_is_balanced_and_even() {
        let dirs = sample_directions(150);
        let mean: Vec3 = dirs.iter().map(|d| d.vector()).sum::<Vec3>() / 150.0;
        assert!(mean.norm() < 0.05, "mean norm {}", mean.norm());

        let nn: Vec<f64> = dirs
            .iter()
            .enumerate()
            .map(|(i, a)| {
                dirs.iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, b)| a.angle(b))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let mu = nn.iter().sum::<f64>() / nn.len() as f64;
        let var = nn.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / nn.len() as f64;
        assert!(var.sqrt() / mu < 0.3, "cv {}", var.sqrt() / mu);
        for d in &dirs {
            assert!((d.vector().norm() - 1.0).abs() < 1e-9);
            assert!((0.0..=PI).contains(&d.theta()));
            assert!((0.0..2.0 * PI).contains(&d.phi()));
            let back = ViewDirection::from_spherical(d.theta(), d.phi());
            assert!((back.vector() - d.vector()).norm() < 1e-9);
        }
    }
}
