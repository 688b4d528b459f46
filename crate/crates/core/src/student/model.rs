use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::dot;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "arch", rename_all = "lowercase")]
pub enum Architecture {
    /// `θ_w · x + θ_b`.
    Linear,
    /// One tanh hidden layer with `hidden` units and a linear readout.
    Mlp1 { hidden: usize },
}

impl Architecture {
    pub fn parameter_count(&self, d: usize) -> usize {
        match *self {
            Architecture::Linear => d + 1,
            Architecture::Mlp1 { hidden } => d * hidden + hidden + hidden + 1,
        }
    }
}

/// A differentiable binary scorer with a flat parameter vector.
///
/// Linear layout: `[w_1..w_d, b]`. Mlp1 layout: hidden weights row-major
/// (`h × d`), hidden biases (`h`), readout weights (`h`), readout bias.
#[derive(Clone, Debug, PartialEq)]
pub struct StudentModel {
    pub architecture: Architecture,
    pub d: usize,
    pub theta: Vec<f64>,
}

impl StudentModel {
    pub fn zeros(architecture: Architecture, d: usize) -> Self {
        StudentModel {
            architecture,
            d,
            theta: vec![0.0; architecture.parameter_count(d)],
        }
    }

    /// Zero for the linear model; small Gaussian weights for mlp1 so the
    /// hidden units are not symmetric. Readout bias starts at zero.
    pub fn init(architecture: Architecture, d: usize, seed: u64) -> Self {
        let mut model = Self::zeros(architecture, d);
        if let Architecture::Mlp1 { hidden } = architecture {
            let mut rng = rng::scoped(seed, "init", "mlp1");
            let in_scale = 1.0 / (d as f64).sqrt();
            let out_scale = 1.0 / (hidden as f64).sqrt();
            for v in &mut model.theta[..d * hidden] {
                *v = in_scale * rng::normal(&mut rng);
            }
            let readout = d * hidden + hidden;
            for v in &mut model.theta[readout..readout + hidden] {
                *v = out_scale * rng::normal(&mut rng);
            }
        }
        model
    }

    pub fn from_parts(architecture: Architecture, d: usize, theta: Vec<f64>) -> Result<Self> {
        let expected = architecture.parameter_count(d);
        if theta.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: theta.len(),
            });
        }
        if let Some(i) = theta.iter().position(|v| !v.is_finite()) {
            return Err(Error::param("theta", format!("parameter {i} is not finite")));
        }
        Ok(StudentModel { architecture, d, theta })
    }

    pub fn parameter_count(&self) -> usize {
        self.theta.len()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Pre-sigmoid score.
    pub fn predict_logit(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.logit(x))
    }

    pub(crate) fn logit(&self, x: &[f64]) -> f64 {
        match self.architecture {
            Architecture::Linear => dot(&self.theta[..self.d], x) + self.theta[self.d],
            Architecture::Mlp1 { hidden } => {
                let d = self.d;
                let (w1, rest) = self.theta.split_at(d * hidden);
                let (b1, rest) = rest.split_at(hidden);
                let (w2, b2) = rest.split_at(hidden);
                let mut z = b2[0];
                for k in 0..hidden {
                    let a = (dot(&w1[k * d..(k + 1) * d], x) + b1[k]).tanh();
                    z += w2[k] * a;
                }
                z
            }
        }
    }

    /// Add `scale · ∇θ logit(x)` into `grad`; returns the logit.
    pub(crate) fn accumulate_logit_grad(&self, x: &[f64], scale: f64, grad: &mut [f64]) -> f64 {
        match self.architecture {
            Architecture::Linear => {
                for (g, xi) in grad[..self.d].iter_mut().zip(x) {
                    *g += scale * xi;
                }
                grad[self.d] += scale;
                self.logit(x)
            }
            Architecture::Mlp1 { hidden } => {
                let d = self.d;
                let w1 = &self.theta[..d * hidden];
                let b1 = &self.theta[d * hidden..d * hidden + hidden];
                let w2_at = d * hidden + hidden;
                let w2 = &self.theta[w2_at..w2_at + hidden];
                let mut z = self.theta[w2_at + hidden];
                for k in 0..hidden {
                    let a = (dot(&w1[k * d..(k + 1) * d], x) + b1[k]).tanh();
                    z += w2[k] * a;
                    let back = scale * w2[k] * (1.0 - a * a);
                    for (g, xi) in grad[k * d..(k + 1) * d].iter_mut().zip(x) {
                        *g += back * xi;
                    }
                    grad[d * hidden + k] += back;
                    grad[w2_at + k] += scale * a;
                }
                grad[w2_at + hidden] += scale;
                z
            }
        }
    }

    /// `∇θ logit(x)`.
    pub fn logit_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut grad = vec![0.0; self.theta.len()];
        self.accumulate_logit_grad(x, 1.0, &mut grad);
        Ok(grad)
    }

    pub fn to_json(&self) -> Result<String> {
        let (arch, h) = match self.architecture {
            Architecture::Linear => ("linear", None),
            Architecture::Mlp1 { hidden } => ("mlp1", Some(hidden)),
        };
        let file = ModelFile {
            arch: arch.to_string(),
            d: self.d,
            h,
            theta: self.theta.clone(),
        };
        serde_json::to_string(&file).map_err(|e| Error::Serialize(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::MalformedLine {
            line: 1,
            message: e.to_string(),
        })?;
        let architecture = match (file.arch.as_str(), file.h) {
            ("linear", _) => Architecture::Linear,
            ("mlp1", Some(hidden)) if hidden > 0 => Architecture::Mlp1 { hidden },
            ("mlp1", _) => return Err(Error::param("h", "mlp1 needs a positive hidden width")),
            (other, _) => return Err(Error::param("arch", format!("unknown architecture {other:?}"))),
        };
        Self::from_parts(architecture, file.d, file.theta)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    arch: String,
    d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    h: Option<usize>,
    theta: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_counts() {
        assert_eq!(Architecture::Linear.parameter_count(4), 5);
        assert_eq!(Architecture::Mlp1 { hidden: 3 }.parameter_count(4), 12 + 3 + 3 + 1);
    }

    #[test]
    fn linear_logits() {
        let zero = StudentModel::zeros(Architecture::Linear, 2);
        assert_eq!(zero.predict_logit(&[3.0, -7.0]).unwrap(), 0.0);
        let m = StudentModel::from_parts(Architecture::Linear, 2, vec![1.0, -1.0, 0.5]).unwrap();
        assert_eq!(m.predict_logit(&[2.0, 1.0]).unwrap(), 1.5);
        assert!(matches!(
            m.predict_logit(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn zero_mlp_returns_readout_bias() {
        let arch = Architecture::Mlp1 { hidden: 4 };
        let mut theta = vec![0.0; arch.parameter_count(3)];
        *theta.last_mut().unwrap() = -0.75;
        let m = StudentModel::from_parts(arch, 3, theta).unwrap();
        assert_eq!(m.predict_logit(&[1.0, 2.0, 3.0]).unwrap(), -0.75);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(StudentModel::from_parts(Architecture::Linear, 2, vec![0.0; 2]).is_err());
        assert!(StudentModel::from_parts(Architecture::Linear, 1, vec![f64::NAN, 0.0]).is_err());
        assert!(StudentModel::from_json(r#"{"arch":"mlp1","d":2,"theta":[]}"#).is_err());
        assert!(StudentModel::from_json(r#"{"arch":"cnn","d":2,"theta":[]}"#).is_err());
    }

    #[test]
    fn model_file_round_trip() {
        let m = StudentModel::init(Architecture::Mlp1 { hidden: 2 }, 3, 11);
        let json = m.to_json().unwrap();
        assert!(json.starts_with(r#"{"arch":"mlp1","d":3,"h":2,"theta":["#));
        assert_eq!(StudentModel::from_json(&json).unwrap(), m);
        let lin = StudentModel::from_parts(Architecture::Linear, 1, vec![0.1, 1e-300]).unwrap();
        assert_eq!(
            lin.to_json().unwrap(),
            r#"{"arch":"linear","d":1,"theta":[0.1,1e-300]}"#
        );
        assert_eq!(StudentModel::from_json(&lin.to_json().unwrap()).unwrap(), lin);
    }
}
