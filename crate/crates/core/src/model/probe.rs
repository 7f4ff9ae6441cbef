use super::network::{Model, ModelInput};
use crate::nn::{batch_cross_entropy, Checkable};

/// Finite-difference target for a whole network: mean cross-entropy of a
/// fixed batch as a function of every parameter.
pub struct ModelProbe<'a> {
    pub model: &'a mut Model,
    pub input: ModelInput,
    pub labels: Vec<usize>,
    offsets: Vec<(usize, usize)>,
}

impl<'a> ModelProbe<'a> {
    pub fn new(model: &'a mut Model, input: ModelInput, labels: Vec<usize>) -> Self {
        let mut offsets = Vec::new();
        for (k, p) in model.params().iter().enumerate() {
            offsets.extend((0..p.len()).map(|i| (k, i)));
        }
        ModelProbe {
            model,
            input,
            labels,
            offsets,
        }
    }
}

impl Checkable for ModelProbe<'_> {
    fn slot_count(&self) -> usize {
        self.offsets.len()
    }

    fn slot_mut(&mut self, index: usize) -> &mut f64 {
        let (k, i) = self.offsets[index];
        let p = self.model.params_mut().swap_remove(k);
        &mut p.value[i]
    }

    fn objective(&self) -> f64 {
        let logits = self.model.logits(&self.input).expect("forward");
        batch_cross_entropy(&logits, &self.labels).expect("loss").loss
    }

    fn analytic_gradient(&mut self) -> Vec<f64> {
        self.model.zero_grad();
        let trace = self.model.forward_trace(&self.input).expect("forward");
        let loss = batch_cross_entropy(trace.logits(), &self.labels).expect("loss");
        self.model.backward(&trace, loss.grad).expect("backward");
        self.model.params().iter().flat_map(|p| p.grad.clone()).collect()
    }
}
