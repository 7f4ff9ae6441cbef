use serde::{Deserialize, Serialize};

use super::layers::{Layer, Param};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// One row of an architecture description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub kind: String,
    pub input: [usize; 4],
    pub output: [usize; 4],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<[usize; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stride: Option<[usize; 2]>,
    pub params: usize,
}

/// A named chain of layers.
#[derive(Debug)]
pub struct Sequential {
    pub name: String,
    layers: Vec<(String, Box<dyn Layer>)>,
}

pub fn check_finite(t: &Tensor, layer: &str) -> Result<()> {
    if t.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite {
            layer: layer.to_string(),
        })
    }
}

impl Sequential {
    pub fn new(name: impl Into<String>) -> Self {
        Sequential {
            name: name.into(),
            layers: Vec::new(),
        }
    }

    pub fn push(&mut self, name: &str, layer: impl Layer + 'static) -> &mut Self {
        self.layers.push((format!("{}.{name}", self.name), Box::new(layer)));
        self
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn layers(&self) -> impl Iterator<Item = (&str, &dyn Layer)> {
        self.layers.iter().map(|(n, l)| (n.as_str(), l.as_ref()))
    }

    pub fn forward(&self, x: &Tensor, checked: bool) -> Result<Tensor> {
        let mut cur = x.clone();
        for (name, layer) in &self.layers {
            cur = layer.forward(&cur)?;
            if checked {
                check_finite(&cur, name)?;
            }
        }
        Ok(cur)
    }

    /// All activations, starting with the input.
    pub fn forward_trace(&self, x: Tensor, checked: bool) -> Result<Vec<Tensor>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x);
        for (name, layer) in &self.layers {
            let next = layer.forward(acts.last().expect("input"))?;
            if checked {
                check_finite(&next, name)?;
            }
            acts.push(next);
        }
        Ok(acts)
    }

    pub fn backward(
        &mut self,
        acts: &[Tensor],
        grad: Tensor,
        need_input_grad: bool,
        checked: bool,
    ) -> Result<Option<Tensor>> {
        if acts.len() != self.layers.len() + 1 {
            return Err(Error::Shape(format!(
                "{}: trace has {} activations for {} layers",
                self.name,
                acts.len(),
                self.layers.len()
            )));
        }
        let mut grad = Some(grad);
        for (k, (name, layer)) in self.layers.iter_mut().enumerate().rev() {
            let g = grad.take().expect("gradient flows through interior layers");
            let need = k > 0 || need_input_grad;
            grad = layer.backward(&acts[k], &g, need)?;
            if checked {
                if let Some(g) = &grad {
                    check_finite(g, name)?;
                }
            }
        }
        Ok(grad)
    }

    pub fn params(&self) -> Vec<&Param> {
        self.layers.iter().flat_map(|(_, l)| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers.iter_mut().flat_map(|(_, l)| l.params_mut()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn output_dims(&self, input: [usize; 4]) -> Result<[usize; 4]> {
        self.layers
            .iter()
            .try_fold(input, |dims, (_, l)| l.output_dims(dims))
    }

    pub fn describe(&self, input: [usize; 4]) -> Result<Vec<LayerSpec>> {
        let mut dims = input;
        let mut out = Vec::with_capacity(self.layers.len());
        for (name, layer) in &self.layers {
            let next = layer.output_dims(dims)?;
            let geometry = layer.geometry();
            out.push(LayerSpec {
                name: name.clone(),
                kind: layer.kind().to_string(),
                input: dims,
                output: next,
                kernel: geometry.map(|g| g.0),
                stride: geometry.map(|g| g.1),
                params: layer.params().iter().map(|p| p.len()).sum(),
            });
            dims = next;
        }
        Ok(out)
    }
}
