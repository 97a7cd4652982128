//! Synthetic rear-facing depth camera.
//!
//! Renders the follower's torso as an ellipse on a low-resolution frame:
//! the horizontal center encodes relative bearing, the size encodes inverse
//! distance, and the fill intensity encodes depth. A real depth image is far
//! richer; this keeps only the cues the latent needs to carry.

use rand::Rng;

use crate::geometry::{Pose2, Vec2};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug)]
pub struct DepthConfig<T> {
    pub width: usize,
    pub height: usize,
    /// Rear field of view in radians.
    pub fov: T,
    /// Additive pixel noise standard deviation.
    pub noise_sigma: T,
    /// Range beyond which the follower disappears.
    pub max_range: T,
    /// Minimum sensing range.
    pub min_range: T,
    /// Torso half-width in meters, sets the silhouette size.
    pub torso_half_width: T,
}

impl<T: Scalar> Default for DepthConfig<T> {
    fn default() -> Self {
        DepthConfig {
            width: 32,
            height: 24,
            fov: T::FRAC_PI_2(),
            noise_sigma: T::c(0.02),
            max_range: T::c(3.0),
            min_range: T::c(0.15),
            torso_half_width: T::c(0.2),
        }
    }
}

impl<T: Scalar> DepthConfig<T> {
    pub fn pixels(&self) -> usize {
        self.width * self.height
    }
}

/// Renders one frame. Pixel values are in [0, 1]; the background is zero
/// plus noise. The camera looks along the robot's -x axis.
pub fn render_depth<T: Scalar, R: Rng>(
    robot: &Pose2<T>,
    human_position: Vec2<T>,
    cfg: &DepthConfig<T>,
    rng: &mut R,
) -> Vec<T> {
    let mut img = vec![T::zero(); cfg.pixels()];
    let rel = robot.to_local(human_position);
    let behind = -rel.x;
    let dist = rel.norm();

    if behind > cfg.min_range && dist < cfg.max_range {
        let bearing = rel.y.atan2(behind);
        let half_fov = cfg.fov * T::c(0.5);
        if bearing.abs() <= half_fov {
            let w = T::c(cfg.width as f64);
            let h = T::c(cfg.height as f64);
            let u_c = (T::c(0.5) - bearing / cfg.fov) * w;
            let v_c = h * T::c(0.5);
            let half_angle = (cfg.torso_half_width / dist).atan();
            let a = (half_angle / cfg.fov * w).max(T::one());
            let b = (a * T::c(1.5)).min(h * T::c(0.5));
            let intensity = (T::one() - dist / cfg.max_range).max(T::c(0.05)).min(T::one());

            for v in 0..cfg.height {
                for u in 0..cfg.width {
                    let du = (T::c(u as f64) + T::c(0.5) - u_c) / a;
                    let dv = (T::c(v as f64) + T::c(0.5) - v_c) / b;
                    if du * du + dv * dv <= T::one() {
                        img[v * cfg.width + u] = intensity;
                    }
                }
            }
        }
    }

    if cfg.noise_sigma > T::zero() {
        for px in img.iter_mut() {
            *px = (*px + cfg.noise_sigma * T::standard_normal(rng))
                .max(T::zero())
                .min(T::one());
        }
    }
    img
}

/// Centroid of above-threshold pixels in pixel coordinates, or `None` for a
/// blank frame.
pub fn silhouette_centroid<T: Scalar>(img: &[T], width: usize, threshold: T) -> Option<(T, T)> {
    let mut sum_u = T::zero();
    let mut sum_v = T::zero();
    let mut mass = T::zero();
    for (k, &p) in img.iter().enumerate() {
        if p > threshold {
            let u = T::c((k % width) as f64) + T::c(0.5);
            let v = T::c((k / width) as f64) + T::c(0.5);
            sum_u += u * p;
            sum_v += v * p;
            mass += p;
        }
    }
    if mass > T::zero() {
        Some((sum_u / mass, sum_v / mass))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noiseless() -> DepthConfig<f64> {
        DepthConfig { noise_sigma: 0.0, ..DepthConfig::default() }
    }

    fn area(img: &[f64]) -> usize {
        img.iter().filter(|&&p| p > 0.01).count()
    }

    #[test]
    fn centered_follower_renders_at_image_center() {
        let cfg = noiseless();
        let robot = Pose2::new(0.0, 0.0, 0.0);
        let mut rng = crate::SeedStream::root(0).rng();
        let img = render_depth(&robot, Vec2::new(-0.6, 0.0), &cfg, &mut rng);
        let (cu, cv) = silhouette_centroid(&img, cfg.width, 0.01).unwrap();
        assert!((cu - 16.0).abs() < 1.0, "cu = {cu}");
        assert!((cv - 12.0).abs() < 1.0, "cv = {cv}");
    }

    #[test]
    fn closer_follower_is_larger() {
        let cfg = noiseless();
        let robot = Pose2::new(0.0, 0.0, 0.0);
        let mut rng = crate::SeedStream::root(0).rng();
        let near = render_depth(&robot, Vec2::new(-0.3, 0.0), &cfg, &mut rng);
        let far = render_depth(&robot, Vec2::new(-0.6, 0.0), &cfg, &mut rng);
        assert!(area(&near) > area(&far));
    }

    #[test]
    fn out_of_view_is_blank() {
        let cfg = noiseless();
        let robot = Pose2::new(0.0, 0.0, 0.0);
        let mut rng = crate::SeedStream::root(0).rng();
        // In front of the robot.
        let front = render_depth(&robot, Vec2::new(0.6, 0.0), &cfg, &mut rng);
        assert_eq!(area(&front), 0);
        // Behind but outside the 90 degree cone.
        let side = render_depth(&robot, Vec2::new(-0.2, 0.5), &cfg, &mut rng);
        assert_eq!(area(&side), 0);
        // Beyond max range.
        let far = render_depth(&robot, Vec2::new(-4.0, 0.0), &cfg, &mut rng);
        assert_eq!(area(&far), 0);
    }

    #[test]
    fn bearing_shifts_silhouette_horizontally() {
        let cfg = noiseless();
        let robot = Pose2::new(0.0, 0.0, 0.0);
        let mut rng = crate::SeedStream::root(0).rng();
        let left = render_depth(&robot, Vec2::new(-0.6, 0.2), &cfg, &mut rng);
        let right = render_depth(&robot, Vec2::new(-0.6, -0.2), &cfg, &mut rng);
        let (cu_l, _) = silhouette_centroid(&left, cfg.width, 0.01).unwrap();
        let (cu_r, _) = silhouette_centroid(&right, cfg.width, 0.01).unwrap();
        assert!(cu_l != cu_r);
    }

    #[test]
    fn noise_stays_in_unit_range() {
        let cfg = DepthConfig::<f64>::default();
        let robot = Pose2::new(0.0, 0.0, 0.0);
        let mut rng = crate::SeedStream::root(3).rng();
        let img = render_depth(&robot, Vec2::new(-0.6, 0.0), &cfg, &mut rng);
        assert!(img.iter().all(|&p| (0.0..=1.0).contains(&p)));
        assert!(img.iter().any(|&p| p > 0.0));
    }
}
