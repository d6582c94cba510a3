//! AdamW with decoupled weight decay, and the cosine warm-restart schedule.

/// Learning rate of a single cosine cycle spanning `total_steps`, `η_min = 0`.
pub fn cosine_warm_restart_lr(step: usize, total_steps: usize, base_lr: f64) -> f64 {
    if total_steps == 0 {
        return base_lr;
    }
    let t = (step % total_steps) as f64 / total_steps as f64;
    base_lr * 0.5 * (1.0 + (std::f64::consts::PI * t).cos())
}

#[derive(Clone, Debug)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamW {
    pub fn new(beta1: f64, beta2: f64, eps: f64, weight_decay: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            weight_decay,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// One update. `params` and `grads` are visited buffer by buffer in the
    /// same order on every call; the flag says whether the buffer decays.
    pub fn step<'g>(&mut self, lr: f64, params: Vec<(&mut [f64], bool)>, grads: Vec<&'g [f64]>) {
        assert_eq!(params.len(), grads.len());
        if self.first.is_empty() {
            self.first = grads.iter().map(|g| vec![0.0; g.len()]).collect();
            self.second = self.first.clone();
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for (i, ((p, decay), g)) in params.into_iter().zip(grads).enumerate() {
            let m = &mut self.first[i];
            let v = &mut self.second[i];
            assert_eq!(p.len(), g.len());
            if decay && self.weight_decay > 0.0 {
                let f = 1.0 - lr * self.weight_decay;
                p.iter_mut().for_each(|x| *x *= f);
            }
            for j in 0..p.len() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g[j];
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g[j] * g[j];
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                p[j] -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_endpoints() {
        assert_eq!(cosine_warm_restart_lr(0, 100, 0.1), 0.1);
        assert!((cosine_warm_restart_lr(50, 100, 0.1) - 0.05).abs() < 1e-15);
        assert!(cosine_warm_restart_lr(99, 100, 0.1) < 1e-4);
        // a restart begins a new cycle
        assert_eq!(cosine_warm_restart_lr(100, 100, 0.1), 0.1);
    }

    #[test]
    fn adamw_first_step_moves_by_lr() {
        let mut opt = AdamW::new(0.9, 0.999, 1e-8, 0.0);
        let mut p = vec![1.0, -2.0];
        let g = vec![0.5, -3.0];
        opt.step(0.1, vec![(&mut p[..], false)], vec![&g[..]]);
        assert!((p[0] - 0.9).abs() < 1e-6);
        assert!((p[1] + 1.9).abs() < 1e-6);
    }

    #[test]
    fn decay_only_where_flagged() {
        let mut opt = AdamW::new(0.9, 0.999, 1e-8, 0.5);
        let mut w = vec![2.0];
        let mut b = vec![2.0];
        let z = vec![0.0];
        opt.step(0.1, vec![(&mut w[..], true), (&mut b[..], false)], vec![&z[..], &z[..]]);
        assert!((w[0] - 2.0 * 0.95).abs() < 1e-15);
        assert_eq!(b[0], 2.0);
    }

    #[test]
    fn minimizes_quadratic() {
        let mut opt = AdamW::new(0.9, 0.999, 1e-8, 0.0);
        let mut x = vec![5.0];
        for _ in 0..2000 {
            let g = vec![2.0 * (x[0] - 1.0)];
            opt.step(0.05, vec![(&mut x[..], false)], vec![&g[..]]);
        }
        assert!((x[0] - 1.0).abs() < 1e-2);
    }
}
