/// Adam optimizer over a flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Parameter deltas for one descent step on `grad`.
    pub fn delta(&mut self, grad: &[f64]) -> Vec<f64> {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t.min(i32::MAX as u64) as i32);
        let c2 = 1.0 - self.beta2.powi(self.t.min(i32::MAX as u64) as i32);
        grad.iter()
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
            .map(|(&g, (m, v))| {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let mh = *m / c1;
                let vh = *v / c2;
                -self.lr * mh / (vh.sqrt() + self.eps)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_no_op() {
        let mut a = Adam::new(3, 0.1);
        assert_eq!(a.delta(&[0.0; 3]), vec![0.0; 3]);
    }

    #[test]
    fn first_step_is_lr_times_sign() {
        let mut a = Adam::new(2, 0.01);
        let d = a.delta(&[5.0, -0.2]);
        assert!((d[0] + 0.01).abs() < 1e-9);
        assert!((d[1] - 0.01).abs() < 1e-9);
    }

    #[test]
    fn minimizes_quadratic() {
        let mut a = Adam::new(1, 0.05);
        let mut x = 3.0;
        for _ in 0..2_000 {
            x += a.delta(&[2.0 * (x - 1.0)])[0];
        }
        assert!((x - 1.0).abs() < 1e-3);
    }
}
