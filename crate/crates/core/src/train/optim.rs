use crate::error::{Error, Result};
use crate::numeric::{Gradients, ParamSet, Real, Tensor};

/// Adam with lazy updates: an element whose gradient is exactly zero keeps
/// its value and its moments for that step.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(params: &ParamSet<T>, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        let zeros: Vec<Tensor<T>> = params.iter().map(|(_, t)| Tensor::zeros(t.shape())).collect();
        Adam {
            lr,
            beta1,
            beta2,
            eps,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step(&mut self, params: &mut ParamSet<T>, grads: &Gradients<T>) {
        self.t += 1;
        let (b1, b2) = (T::lit(self.beta1), T::lit(self.beta2));
        let (one, eps, lr) = (T::one(), T::lit(self.eps), T::lit(self.lr));
        let c1 = one - T::lit(self.beta1.powi(self.t.min(i32::MAX as u64) as i32));
        let c2 = one - T::lit(self.beta2.powi(self.t.min(i32::MAX as u64) as i32));
        let ids: Vec<_> = params.ids().collect();
        for (k, id) in ids.into_iter().enumerate() {
            let g = grads.get(id).data();
            let p = params.get_mut(id).data_mut();
            let m = self.m[k].data_mut();
            let v = self.v[k].data_mut();
            for i in 0..g.len() {
                if g[i] == T::zero() {
                    continue;
                }
                m[i] = b1 * m[i] + (one - b1) * g[i];
                v[i] = b2 * v[i] + (one - b2) * g[i] * g[i];
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                p[i] = p[i] - lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }

    /// Moments as named tensors `adam.m/<param>` and `adam.v/<param>`.
    pub fn export(&self, params: &ParamSet<T>) -> Vec<(String, Tensor<T>)> {
        let mut out = Vec::with_capacity(2 * self.m.len());
        for ((name, _), (m, v)) in params.iter().zip(self.m.iter().zip(&self.v)) {
            out.push((format!("adam.m/{name}"), m.clone()));
            out.push((format!("adam.v/{name}"), v.clone()));
        }
        out
    }

    pub fn import(&mut self, params: &ParamSet<T>, side: &[(String, Tensor<T>)], t: u64) -> Result<()> {
        for (k, (name, p)) in params.iter().enumerate() {
            for (prefix, slot) in [("adam.m/", &mut self.m[k]), ("adam.v/", &mut self.v[k])] {
                let key = format!("{prefix}{name}");
                let found = side
                    .iter()
                    .find(|(n, _)| *n == key)
                    .ok_or_else(|| Error::Format(format!("checkpoint lacks optimizer tensor `{key}`")))?;
                if found.1.shape() != p.shape() {
                    return Err(Error::Shape {
                        op: "Adam::import",
                        detail: format!("`{key}` has shape {:?}, expected {:?}", found.1.shape(), p.shape()),
                    });
                }
                *slot = found.1.clone();
            }
        }
        self.t = t;
        Ok(())
    }
}
