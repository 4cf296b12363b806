use crate::geometry::Vec3;

use super::RenderError;

/// Perspective pinhole camera producing square images.
///
/// Image coordinates are continuous `(col, row)` with row 0 at the top; the
/// center of pixel `(r, c)` sits at `(c + 0.5, r + 0.5)`, so the target always
/// projects to `(res / 2, res / 2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub eye: Vec3,
    pub target: Vec3,
    pub up: Vec3,
    /// Radians.
    pub vertical_fov: f64,
    pub resolution: usize,
    pub near: f64,
    pub far: f64,
}

/// A point in image space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub col: f64,
    pub row: f64,
    /// Distance along the viewing axis.
    pub depth: f64,
}

impl Projection {
    /// Pixel containing the projection, if inside the image.
    pub fn pixel(&self, resolution: usize) -> Option<(usize, usize)> {
        let (r, c) = (self.row.floor(), self.col.floor());
        let res = resolution as f64;
        (r >= 0.0 && c >= 0.0 && r < res && c < res).then(|| (r as usize, c as usize))
    }
}

impl Camera {
    pub fn new(
        eye: Vec3,
        target: Vec3,
        up: Vec3,
        vertical_fov: f64,
        resolution: usize,
        near: f64,
        far: f64,
    ) -> Result<Self, RenderError> {
        let cam = Self {
            eye,
            target,
            up,
            vertical_fov,
            resolution,
            near,
            far,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<(), RenderError> {
        let view = self.target - self.eye;
        if view.norm() <= 0.0 || !view.iter().all(|c| c.is_finite()) {
            return Err(RenderError::InvalidCamera("eye coincides with target".into()));
        }
        if !(0.0 < self.near && self.near < self.far) {
            return Err(RenderError::InvalidCamera(format!(
                "need 0 < near < far, got near={} far={}",
                self.near, self.far
            )));
        }
        if self.up.norm() <= 0.0 || view.normalize().cross(&self.up.normalize()).norm() < 1e-6 {
            return Err(RenderError::InvalidCamera("up is parallel to the view direction".into()));
        }
        if !(self.vertical_fov > 0.0 && self.vertical_fov < std::f64::consts::PI) {
            return Err(RenderError::InvalidCamera("field of view outside (0, pi)".into()));
        }
        if self.resolution == 0 {
            return Err(RenderError::InvalidCamera("zero resolution".into()));
        }
        Ok(())
    }

    /// Unit viewing direction (eye toward target).
    pub fn forward(&self) -> Vec3 {
        (self.target - self.eye).normalize()
    }

    /// Orthonormal `(right, up, forward)` basis.
    pub fn basis(&self) -> (Vec3, Vec3, Vec3) {
        let f = self.forward();
        let r = f.cross(&self.up).normalize();
        let u = r.cross(&f);
        (r, u, f)
    }

    pub(crate) fn tan_half_fov(&self) -> f64 {
        (self.vertical_fov * 0.5).tan()
    }

    /// Camera-space coordinates `(x right, y up, z forward)`.
    pub fn to_view(&self, p: &Vec3) -> Vec3 {
        let (r, u, f) = self.basis();
        let d = p - self.eye;
        Vec3::new(d.dot(&r), d.dot(&u), d.dot(&f))
    }

    /// Projects a camera-space point; `None` behind the eye.
    pub fn project_view(&self, v: &Vec3) -> Option<Projection> {
        if v.z <= 0.0 {
            return None;
        }
        let t = self.tan_half_fov();
        let half = self.resolution as f64 * 0.5;
        Some(Projection {
            col: (v.x / (v.z * t) + 1.0) * half,
            row: (1.0 - v.y / (v.z * t)) * half,
            depth: v.z,
        })
    }

    pub fn project(&self, p: &Vec3) -> Option<Projection> {
        self.project_view(&self.to_view(p))
    }

    /// World-space ray direction through image point `(col, row)`, scaled so
    /// its forward component is 1 (so `eye + ray * depth` lands at `depth`).
    pub fn ray(&self, col: f64, row: f64) -> Vec3 {
        let (r, u, f) = self.basis();
        let t = self.tan_half_fov();
        let half = self.resolution as f64 * 0.5;
        let x = (col / half - 1.0) * t;
        let y = (1.0 - row / half) * t;
        f + r * x + u * y
    }

    pub fn pixel_ray(&self, row: usize, col: usize) -> Vec3 {
        self.ray(col as f64 + 0.5, row as f64 + 0.5)
    }

    /// Depth tolerance for visibility tests on surface samples.
    pub fn depth_epsilon(&self) -> f64 {
        1e-3 * (self.far - self.near)
    }

    /// Same camera rotated about its viewing axis by `quarter_turns * 90°`.
    ///
    /// Rendering the rotated camera reproduces `in_plane_rotate(image,
    /// quarter_turns)` of the original render (up to rasterization).
    pub fn rolled(&self, quarter_turns: u8) -> Self {
        let (r, u, _) = self.basis();
        let up = match quarter_turns % 4 {
            0 => u,
            1 => -r,
            2 => -u,
            _ => r,
        };
        Self { up, ..*self }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;

    fn cam(res: usize) -> Camera {
        Camera::new(
            Vec3::new(0.0, 0.0, 5.0),
            Vec3::zeros(),
            Vec3::new(0.0, 1.0, 0.0),
            50f64.to_radians(),
            res,
            0.1,
            100.0,
        )
        .unwrap()
    }

    #[test]
    fn target_projects_to_center() {
        let c = cam(227);
        let p = c.project(&Vec3::zeros()).unwrap();
        assert_eq!((p.col, p.row), (113.5, 113.5));
        assert_eq!(p.pixel(227), Some((113, 113)));
        assert!((p.depth - 5.0).abs() < 1e-12);
    }

    #[test]
    fn up_is_up() {
        let c = cam(100);
        let p = c.project(&Vec3::new(0.0, 1.0, 0.0)).unwrap();
        assert!(p.row < 50.0);
        let p = c.project(&Vec3::new(1.0, 0.0, 0.0)).unwrap();
        assert!(p.col > 50.0);
    }

    #[test]
    fn ray_inverts_projection() {
        let c = cam(64);
        let q = Vec3::new(0.3, -0.7, 1.2);
        let p = c.project(&q).unwrap();
        let back = c.eye + c.ray(p.col, p.row) * p.depth;
        assert!((back - q).norm() < 1e-12);
    }

    #[test]
    fn invalid_cameras() {
        let bad = Camera::new(Vec3::zeros(), Vec3::zeros(), Vec3::y(), 1.0, 8, 0.1, 1.0);
        assert!(bad.is_err());
        let bad = Camera::new(Vec3::z(), Vec3::zeros(), Vec3::z(), 1.0, 8, 0.1, 1.0);
        assert!(bad.is_err());
        let bad = Camera::new(Vec3::z(), Vec3::zeros(), Vec3::y(), 1.0, 8, 1.0, 0.5);
        assert!(bad.is_err());
    }
}
