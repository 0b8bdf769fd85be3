//! Leapfrog (velocity Verlet) integration of Hamiltonian dynamics with a
//! diagonal inverse metric.

/// Position, momentum and the cached log density / gradient at the position.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub theta: Vec<f64>,
    pub momentum: Vec<f64>,
    pub log_density: f64,
    pub grad: Vec<f64>,
}

impl PhasePoint {
    /// Evaluates the log density at `theta` to seed the cache.
    pub fn new<F>(theta: Vec<f64>, momentum: Vec<f64>, log_density_grad: &F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) -> f64,
    {
        let mut grad = vec![0.0; theta.len()];
        let log_density = log_density_grad(&theta, &mut grad);
        PhasePoint {
            theta,
            momentum,
            log_density,
            grad,
        }
    }

    pub fn kinetic_energy(&self, inv_metric: &[f64]) -> f64 {
        0.5 * self
            .momentum
            .iter()
            .zip(inv_metric)
            .map(|(p, w)| p * p * w)
            .sum::<f64>()
    }

    /// `-log density + kinetic energy`.
    pub fn hamiltonian(&self, inv_metric: &[f64]) -> f64 {
        -self.log_density + self.kinetic_energy(inv_metric)
    }

    pub fn is_finite(&self) -> bool {
        self.log_density.is_finite()
            && self.grad.iter().all(|g| g.is_finite())
            && self.theta.iter().all(|t| t.is_finite())
    }
}

/// Advances `point` by `n_steps` leapfrog steps of size `step_size`.
///
/// `log_density_grad` writes the gradient into its second argument and
/// returns the log density. Returns `false` as soon as a non-finite state
/// appears; the trajectory is then divergent and `point` holds the state
/// reached so far.
pub fn leapfrog<F>(
    point: &mut PhasePoint,
    step_size: f64,
    n_steps: usize,
    inv_metric: &[f64],
    log_density_grad: &F,
) -> bool
where
    F: Fn(&[f64], &mut [f64]) -> f64,
{
    let half = 0.5 * step_size;
    for _ in 0..n_steps {
        for (p, g) in point.momentum.iter_mut().zip(&point.grad) {
            *p += half * g;
        }
        for ((t, p), w) in point.theta.iter_mut().zip(&point.momentum).zip(inv_metric) {
            *t += step_size * w * p;
        }
        point.log_density = log_density_grad(&point.theta, &mut point.grad);
        if !point.is_finite() {
            return false;
        }
        for (p, g) in point.momentum.iter_mut().zip(&point.grad) {
            *p += half * g;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    // log density of a standard normal in d dimensions (up to a constant).
    fn gaussian(theta: &[f64], grad: &mut [f64]) -> f64 {
        for (g, t) in grad.iter_mut().zip(theta) {
            *g = -t;
        }
        -0.5 * theta.iter().map(|t| t * t).sum::<f64>()
    }

    fn flat(_: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        0.0
    }

    #[test]
    fn free_particle_moves_in_a_straight_line() {
        let mut pt = PhasePoint::new(vec![1.0, -2.0], vec![0.5, 0.25], &flat);
        assert!(leapfrog(&mut pt, 0.1, 40, &[1.0, 1.0], &flat));
        assert_abs_diff_eq!(pt.theta[0], 1.0 + 40.0 * 0.1 * 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(pt.theta[1], -2.0 + 40.0 * 0.1 * 0.25, epsilon = 1e-12);
        assert_eq!(pt.momentum, vec![0.5, 0.25]);
    }

    #[test]
    fn reversible() {
        let start = PhasePoint::new(vec![0.3, -1.2, 2.0], vec![1.1, 0.4, -0.7], &gaussian);
        let mut pt = start.clone();
        let w = [1.0, 0.5, 2.0];
        leapfrog(&mut pt, 0.13, 57, &w, &gaussian);
        pt.momentum.iter_mut().for_each(|p| *p = -*p);
        leapfrog(&mut pt, 0.13, 57, &w, &gaussian);
        for i in 0..3 {
            assert_abs_diff_eq!(pt.theta[i], start.theta[i], epsilon = 1e-8);
            assert_abs_diff_eq!(-pt.momentum[i], start.momentum[i], epsilon = 1e-8);
        }
    }

    #[test]
    fn matches_harmonic_oscillator_and_energy_error_is_second_order() {
        // H = q²/2 + p²/2; exact flow is a rotation in phase space.
        let energy_error = |eps: f64| {
            let t_end = 2.0;
            let n = (t_end / eps).round() as usize;
            let mut pt = PhasePoint::new(vec![1.0], vec![0.0], &gaussian);
            let h0 = pt.hamiltonian(&[1.0]);
            leapfrog(&mut pt, eps, n, &[1.0], &gaussian);
            let t = eps * n as f64;
            assert_abs_diff_eq!(pt.theta[0], t.cos(), epsilon = eps);
            assert_abs_diff_eq!(pt.momentum[0], -t.sin(), epsilon = eps);
            (pt.hamiltonian(&[1.0]) - h0).abs()
        };
        let e1 = energy_error(0.1);
        let e2 = energy_error(0.05);
        let order = (e1 / e2).log2();
        assert!((1.7..2.3).contains(&order), "observed order {order}");
    }

    #[test]
    fn one_step_preserves_volume() {
        // Jacobian determinant of the one-step map on a non-quadratic 2-D
        // potential, by central finite differences.
        fn banana(t: &[f64], g: &mut [f64]) -> f64 {
            let a = t[1] - t[0] * t[0];
            g[0] = -t[0] + 4.0 * a * t[0] * 0.5;
            g[1] = -a;
            -0.5 * t[0] * t[0] - 0.5 * a * a
        }
        let step = |z: [f64; 4]| -> [f64; 4] {
            let mut pt = PhasePoint::new(vec![z[0], z[1]], vec![z[2], z[3]], &banana);
            leapfrog(&mut pt, 0.2, 1, &[1.0, 0.7], &banana);
            [pt.theta[0], pt.theta[1], pt.momentum[0], pt.momentum[1]]
        };
        let z0 = [0.4, -0.3, 0.8, 0.1];
        let h = 1e-6;
        let mut jac = [[0.0; 4]; 4];
        for j in 0..4 {
            let (mut zp, mut zm) = (z0, z0);
            zp[j] += h;
            zm[j] -= h;
            let (fp, fm) = (step(zp), step(zm));
            for i in 0..4 {
                jac[i][j] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        assert_abs_diff_eq!(det4(jac), 1.0, epsilon = 1e-6);
    }

    fn det4(m: [[f64; 4]; 4]) -> f64 {
        let mut a = m;
        let mut det = 1.0;
        for c in 0..4 {
            let p = (c..4).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
            if p != c {
                a.swap(p, c);
                det = -det;
            }
            det *= a[c][c];
            for r in c + 1..4 {
                let f = a[r][c] / a[c][c];
                for k in c..4 {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
        det
    }

    #[test]
    fn non_finite_gradient_stops_the_trajectory() {
        let cliff = |t: &[f64], g: &mut [f64]| {
            g[0] = if t[0] > 1.0 { f64::NAN } else { 0.0 };
            0.0
        };
        let mut pt = PhasePoint::new(vec![0.0], vec![1.0], &cliff);
        assert!(!leapfrog(&mut pt, 0.3, 10, &[1.0], &cliff));
    }
}
