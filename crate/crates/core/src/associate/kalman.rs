//! Constant-velocity Kalman filter over `(u, v, aspect, h)` and their rates.
//!
//! Aspect is `h / w`. Noise standard deviations scale with the box height.

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};
use crate::geom::BBox;

pub type Mean = SVector<f64, 8>;
pub type Covariance = SMatrix<f64, 8, 8>;
pub type Measurement = SVector<f64, 4>;
pub type MeasurementCov = SMatrix<f64, 4, 4>;

/// Noise parameterization; position terms are multiplied by the box height.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanNoise {
    pub position_weight: f64,
    pub velocity_weight: f64,
    pub aspect_position_std: f64,
    pub aspect_velocity_std: f64,
    pub measurement_weight: f64,
    pub aspect_measurement_std: f64,
}

impl Default for KalmanNoise {
    fn default() -> Self {
        KalmanNoise {
            position_weight: 1.0 / 20.0,
            velocity_weight: 1.0 / 160.0,
            aspect_position_std: 1e-2,
            aspect_velocity_std: 1e-5,
            measurement_weight: 1.0 / 20.0,
            aspect_measurement_std: 1e-1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub mean: Mean,
    pub covariance: Covariance,
}

/// Measurement vector of a box.
pub fn measure(b: &BBox) -> Measurement {
    Measurement::new(b.u, b.v, b.aspect(), b.h)
}

impl KalmanState {
    /// Box at the current mean. Height and aspect are floored at tiny
    /// positive values so a diverged state still yields a valid box.
    pub fn to_box(&self) -> BBox {
        let h = self.mean[3].max(1e-6);
        let aspect = self.mean[2].max(1e-6);
        BBox {
            u: self.mean[0],
            v: self.mean[1],
            w: h / aspect,
            h,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KalmanFilter {
    pub noise: KalmanNoise,
}

impl KalmanFilter {
    pub fn new(noise: KalmanNoise) -> Self {
        KalmanFilter { noise }
    }

    /// New track state at `z` with zero velocity and a broad prior.
    pub fn initiate(&self, z: &Measurement) -> KalmanState {
        let n = &self.noise;
        let h = z[3];
        let mut mean = Mean::zeros();
        mean.fixed_rows_mut::<4>(0).copy_from(z);
        let std = [
            2.0 * n.position_weight * h,
            2.0 * n.position_weight * h,
            n.aspect_position_std,
            2.0 * n.position_weight * h,
            10.0 * n.velocity_weight * h,
            10.0 * n.velocity_weight * h,
            n.aspect_velocity_std,
            10.0 * n.velocity_weight * h,
        ];
        KalmanState {
            mean,
            covariance: Covariance::from_diagonal(&SVector::from_fn(|i, _| std[i] * std[i])),
        }
    }

    fn transition() -> Covariance {
        let mut f = Covariance::identity();
        for i in 0..4 {
            f[(i, i + 4)] = 1.0;
        }
        f
    }

    /// One-frame prediction.
    pub fn predict(&self, s: &KalmanState) -> KalmanState {
        let n = &self.noise;
        let h = s.mean[3];
        let std = [
            n.position_weight * h,
            n.position_weight * h,
            n.aspect_position_std,
            n.position_weight * h,
            n.velocity_weight * h,
            n.velocity_weight * h,
            n.aspect_velocity_std,
            n.velocity_weight * h,
        ];
        let q = Covariance::from_diagonal(&SVector::from_fn(|i, _| std[i] * std[i]));
        let f = Self::transition();
        let covariance = f * s.covariance * f.transpose() + q;
        KalmanState {
            mean: f * s.mean,
            covariance: symmetrize(covariance),
        }
    }

    /// Mean and covariance of the state projected into measurement space,
    /// measurement noise included.
    pub fn project(&self, s: &KalmanState) -> (Measurement, MeasurementCov) {
        let n = &self.noise;
        let h = s.mean[3];
        let std = [
            n.measurement_weight * h,
            n.measurement_weight * h,
            n.aspect_measurement_std,
            n.measurement_weight * h,
        ];
        let r = MeasurementCov::from_diagonal(&SVector::from_fn(|i, _| std[i] * std[i]));
        let mean = s.mean.fixed_rows::<4>(0).into_owned();
        let cov = s.covariance.fixed_view::<4, 4>(0, 0).into_owned() + r;
        (mean, cov)
    }

    pub fn update(&self, s: &KalmanState, z: &Measurement) -> Result<KalmanState> {
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite measurement"));
        }
        let (projected, innovation_cov) = self.project(s);
        let chol = innovation_cov
            .cholesky()
            .ok_or(Error::Numerical("innovation covariance is not positive definite"))?;
        // K = P H^T S^-1, with P H^T the first four columns of P
        let pht: SMatrix<f64, 8, 4> = s.covariance.fixed_view::<8, 4>(0, 0).into_owned();
        let gain = chol.solve(&pht.transpose()).transpose();
        let innovation = z - projected;
        let mean = s.mean + gain * innovation;
        let covariance = s.covariance - gain * innovation_cov * gain.transpose();
        Ok(KalmanState {
            mean,
            covariance: symmetrize(covariance),
        })
    }

    /// Squared Mahalanobis distance of `z` from the projected state.
    pub fn mahalanobis(&self, s: &KalmanState, z: &Measurement) -> Result<f64> {
        let (mean, cov) = self.project(s);
        let chol = cov
            .cholesky()
            .ok_or(Error::Numerical("projected covariance is not positive definite"))?;
        let d = z - mean;
        // |L^-1 d|^2
        let y = chol
            .l()
            .solve_lower_triangular(&d)
            .ok_or(Error::Numerical("singular Cholesky factor"))?;
        Ok(y.norm_squared())
    }
}

fn symmetrize(m: Covariance) -> Covariance {
    (m + m.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn start() -> KalmanState {
        KalmanFilter::default().initiate(&Measurement::new(100.0, 50.0, 2.0, 80.0))
    }

    #[test]
    fn predict_moves_by_velocity() {
        let kf = KalmanFilter::default();
        let s = start();
        let p = kf.predict(&s);
        assert_eq!(p.mean.fixed_rows::<4>(0), s.mean.fixed_rows::<4>(0));
        let mut moving = s.clone();
        moving.mean[4] = 1.0;
        let mut m = moving;
        for step in 1..=3 {
            m = kf.predict(&m);
            assert!((m.mean[0] - (100.0 + step as f64)).abs() < 1e-12);
        }
        assert!(p.covariance.trace() > s.covariance.trace());
    }

    #[test]
    fn update_at_mean_shrinks_covariance() {
        let kf = KalmanFilter::default();
        let s = kf.predict(&start());
        let z = s.mean.fixed_rows::<4>(0).into_owned();
        let u = kf.update(&s, &z).unwrap();
        assert!((u.mean - s.mean).norm() < 1e-12);
        assert!(u.covariance.trace() < s.covariance.trace());
        let eig = SymmetricEigen::new(u.covariance).eigenvalues;
        assert!(eig.iter().all(|e| *e > 0.0));
        assert!((u.covariance - u.covariance.transpose()).amax() < 1e-9);
    }

    #[test]
    fn tiny_measurement_noise_trusts_the_observation() {
        let kf = KalmanFilter::new(KalmanNoise {
            measurement_weight: 1e-9,
            aspect_measurement_std: 1e-9,
            ..KalmanNoise::default()
        });
        let s = kf.predict(&start());
        let z = Measurement::new(110.0, 45.0, 2.2, 82.0);
        let u = kf.update(&s, &z).unwrap();
        for i in 0..4 {
            assert!((u.mean[i] - z[i]).abs() < 1e-3);
        }
    }

    #[test]
    fn repeated_observation_converges() {
        let kf = KalmanFilter::default();
        let z = Measurement::new(120.0, 60.0, 2.1, 85.0);
        let mut s = start();
        let mut prev = s.mean;
        for _ in 0..50 {
            s = kf.update(&kf.predict(&s), &z).unwrap();
            let delta = (s.mean - prev).norm();
            prev = s.mean;
            if delta < 1e-3 {
                break;
            }
        }
        let next = kf.update(&kf.predict(&s), &z).unwrap();
        assert!((next.mean - s.mean).norm() < 1e-3);
        assert!((s.mean[0] - 120.0).abs() < 0.5);
    }

    #[test]
    fn mahalanobis_basics() {
        let kf = KalmanFilter::default();
        let s = kf.predict(&start());
        let (mean, _) = kf.project(&s);
        assert!(kf.mahalanobis(&s, &mean).unwrap().abs() < 1e-12);

        // projected covariance of exactly the identity
        let kf = KalmanFilter::new(KalmanNoise {
            measurement_weight: 1.0,
            aspect_measurement_std: 1.0,
            ..KalmanNoise::default()
        });
        let s = KalmanState {
            mean: Mean::from_column_slice(&[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]),
            covariance: Covariance::zeros(),
        };
        let z = Measurement::new(1.0, 1.0, 2.0, 2.0);
        assert!((kf.mahalanobis(&s, &z).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn gate_has_ninety_five_percent_coverage() {
        let kf = KalmanFilter::default();
        let s = kf.predict(&start());
        let (mean, cov) = kf.project(&s);
        let l = cov.cholesky().unwrap().l();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let draws = 100_000;
        let inside = (0..draws)
            .filter(|_| {
                let e = Measurement::from_fn(|_, _| StandardNormal.sample(&mut rng));
                kf.mahalanobis(&s, &(mean + l * e)).unwrap() <= 9.4877
            })
            .count();
        let rate = inside as f64 / draws as f64;
        assert!((0.93..=0.97).contains(&rate), "rate {rate}");
    }

    #[test]
    fn constant_velocity_prediction_error_shrinks() {
        let kf = KalmanFilter::default();
        let truth = |t: f64| Measurement::new(50.0 + 3.0 * t, 40.0 - 1.5 * t, 2.0, 60.0);
        let mut s = kf.initiate(&truth(0.0));
        let mut errors = Vec::new();
        for t in 1..=30 {
            let p = kf.predict(&s);
            let z = truth(f64::from(t));
            errors.push(((p.mean[0] - z[0]).powi(2) + (p.mean[1] - z[1]).powi(2)).sqrt());
            s = kf.update(&p, &z).unwrap();
        }
        assert!(errors.iter().all(|e| *e <= 3.5));
        for w in errors[10..].windows(2) {
            assert!(w[1] <= w[0] + 1e-9);
        }
        assert!(errors[29] < 0.1);
    }

    #[test]
    fn box_round_trip() {
        let b = BBox::new(30.0, 40.0, 20.0, 50.0).unwrap();
        let s = KalmanFilter::default().initiate(&measure(&b));
        let back = s.to_box();
        assert!((back.w - 20.0).abs() < 1e-12 && (back.h - 50.0).abs() < 1e-12);
    }
}
