//! Central finite-difference gradient verification.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers::Layer;
use super::tensor::Tensor;

pub const FD_STEP: f64 = 1e-5;

/// Something with a scalar objective over a flat list of adjustable slots.
pub trait Checkable {
    fn slot_count(&self) -> usize;
    fn slot_mut(&mut self, index: usize) -> &mut f64;
    fn objective(&self) -> f64;
    /// Analytic gradient of `objective` for every slot, in slot order.
    fn analytic_gradient(&mut self) -> Vec<f64>;
    fn excluded(&self, _index: usize) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    pub skipped: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

pub fn grad_check(target: &mut impl Checkable, h: f64) -> GradCheckReport {
    let analytic = target.analytic_gradient();
    assert_eq!(analytic.len(), target.slot_count());
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        skipped: 0,
    };
    for (i, &ga) in analytic.iter().enumerate() {
        if target.excluded(i) {
            report.skipped += 1;
            continue;
        }
        let x0 = *target.slot_mut(i);
        *target.slot_mut(i) = x0 + h;
        let up = target.objective();
        *target.slot_mut(i) = x0 - h;
        let down = target.objective();
        *target.slot_mut(i) = x0;
        let gn = (up - down) / (2.0 * h);
        report.max_rel_error = report.max_rel_error.max(relative_error(ga, gn));
        report.checked += 1;
    }
    report
}

/// Checks one layer under the objective `sum(r * layer(x))` for a fixed
/// random projection `r`. Slots are the input elements followed by every
/// parameter element.
pub struct LayerProbe<'a, L: Layer> {
    pub layer: &'a mut L,
    pub input: Tensor,
    projection: Vec<f64>,
}

impl<'a, L: Layer> LayerProbe<'a, L> {
    pub fn new(layer: &'a mut L, input: Tensor, seed: u64) -> Self {
        let dims = layer.output_dims(input.dims()).expect("probe input fits layer");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let projection = (0..dims.iter().product::<usize>())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        LayerProbe {
            layer,
            input,
            projection,
        }
    }
}

impl<L: Layer> Checkable for LayerProbe<'_, L> {
    fn slot_count(&self) -> usize {
        self.input.len() + self.layer.params().iter().map(|p| p.len()).sum::<usize>()
    }

    fn slot_mut(&mut self, mut index: usize) -> &mut f64 {
        if index < self.input.len() {
            return &mut self.input.data_mut()[index];
        }
        index -= self.input.len();
        for p in self.layer.params_mut() {
            if index < p.len() {
                return &mut p.value[index];
            }
            index -= p.len();
        }
        panic!("slot out of range")
    }

    fn objective(&self) -> f64 {
        let out = self.layer.forward(&self.input).expect("forward");
        out.data().iter().zip(&self.projection).map(|(a, b)| a * b).sum()
    }

    fn analytic_gradient(&mut self) -> Vec<f64> {
        for p in self.layer.params_mut() {
            p.zero_grad();
        }
        let dims = self.layer.output_dims(self.input.dims()).expect("dims");
        let r = Tensor::from_vec(dims, self.projection.clone()).expect("dims");
        let gi = self
            .layer
            .backward(&self.input, &r, true)
            .expect("backward")
            .expect("input gradient");
        let mut g = gi.into_data();
        for p in self.layer.params() {
            g.extend_from_slice(&p.grad);
        }
        g
    }

    fn excluded(&self, index: usize) -> bool {
        index < self.input.len() && self.layer.is_kink(&self.input, index)
    }
}
