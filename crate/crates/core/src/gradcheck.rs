//! Central finite-difference comparison against an analytic gradient.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::params::Parameters;

#[derive(Debug, Clone)]
pub struct GradCheck {
    /// (tensor name, ‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖)) over the probed entries
    pub tensors: Vec<(String, f64)>,
}

impl GradCheck {
    pub fn worst(&self) -> f64 {
        self.tensors.iter().map(|t| t.1).fold(0.0, f64::max)
    }

    pub fn worst_tensor(&self) -> Option<&(String, f64)> {
        self.tensors.iter().max_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// Probes up to `per_tensor` entries of every tensor (all of them when the
/// tensor is smaller) with step `h`. Tensors whose probed gradient norm is
/// below 1e-10 report 0.
pub fn finite_difference_check(
    params: &Parameters<f64>,
    analytic: &Parameters<f64>,
    loss: impl Fn(&Parameters<f64>) -> f64,
    per_tensor: usize,
    h: f64,
    seed: u64,
) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe = params.clone();
    let mut tensors = Vec::with_capacity(params.tensors.len());
    for (ti, t) in params.tensors.iter().enumerate() {
        let idx: Vec<usize> = if t.len() <= per_tensor {
            (0..t.len()).collect()
        } else {
            sample(&mut rng, t.len(), per_tensor).into_vec()
        };
        let (mut diff, mut na, mut nn) = (0.0f64, 0.0f64, 0.0f64);
        for i in idx {
            let x = t.data[i];
            probe.tensors[ti].data[i] = x + h;
            let up = loss(&probe);
            probe.tensors[ti].data[i] = x - h;
            let down = loss(&probe);
            probe.tensors[ti].data[i] = x;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic.tensors[ti].data[i];
            diff += (a - numeric).powi(2);
            na += a * a;
            nn += numeric * numeric;
        }
        let scale = na.sqrt().max(nn.sqrt());
        let rel = if scale > 1e-10 { diff.sqrt() / scale } else { 0.0 };
        tensors.push((t.name.clone(), rel));
    }
    GradCheck { tensors }
}
