//! Training checkpoints stored as CKP1 containers.

use std::path::Path;

use super::adamw::OptimizerState;
use super::config::{Dtype, TrainConfig};
use crate::error::{Error, Result};
use crate::features::{Affine, StudentParams};
use crate::format::{Container, Tensor, TensorData};

/// Loss values recorded after one optimizer step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub l1: f64,
    pub intra: f64,
    pub cross: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: StudentParams,
    pub config: TrainConfig,
    pub optimizer: OptimizerState,
    pub history: Vec<StepRecord>,
}

fn u64_tensor(v: u64) -> Tensor {
    Tensor {
        dims: vec![2],
        data: TensorData::F64(vec![(v >> 32) as f64, (v & 0xffff_ffff) as f64]),
    }
}

fn u64_from(c: &Container, name: &str) -> Result<u64> {
    let v = c.require(name)?.to_f64();
    match v[..] {
        [hi, lo] if hi >= 0.0 && lo >= 0.0 && hi < 4294967296.0 && lo < 4294967296.0 => {
            Ok(((hi as u64) << 32) | lo as u64)
        }
        _ => Err(Error::format("checkpoint", format!("`{name}` is not a 64-bit integer pair"))),
    }
}

fn scalar_from(c: &Container, name: &str) -> Result<f64> {
    let v = c.require(name)?.to_f64();
    match v[..] {
        [x] => Ok(x),
        _ => Err(Error::format("checkpoint", format!("`{name}` is not a scalar"))),
    }
}

fn count_from(c: &Container, name: &str) -> Result<usize> {
    let x = scalar_from(c, name)?;
    if x < 0.0 || x.fract() != 0.0 || x > 1e15 {
        return Err(Error::format("checkpoint", format!("`{name}` is not a count")));
    }
    Ok(x as usize)
}

fn store(dtype: Dtype, dims: Vec<usize>, data: &[f64]) -> Tensor {
    let data = match dtype {
        Dtype::F64 => TensorData::F64(data.to_vec()),
        Dtype::F32 => TensorData::F32(data.iter().map(|&v| v as f32).collect()),
    };
    Tensor { dims, data }
}

impl Checkpoint {
    pub fn to_container(&self) -> Container {
        let cfg = &self.config;
        let p = &self.params;
        let mut c = Container::default();
        for (k, v) in [("patch", p.patch), ("bins", p.bins), ("hidden", p.hidden), ("dim", p.dim)] {
            c.push(format!("student.{k}"), Tensor::scalar(v as f64));
        }
        c.push("student.seed", u64_tensor(p.seed));
        for (i, l) in p.layers.iter().enumerate() {
            c.push(format!("student.layer{i}.weight"), store(cfg.dtype, vec![l.out, l.inp], &l.weight));
            c.push(format!("student.layer{i}.bias"), store(cfg.dtype, vec![l.out], &l.bias));
        }

        let floats = [
            ("lr", cfg.lr),
            ("beta1", cfg.beta1),
            ("beta2", cfg.beta2),
            ("eps_adam", cfg.eps_adam),
            ("weight_decay", cfg.weight_decay),
            ("tau", cfg.tau),
            ("event_scale", cfg.event_scale),
            ("lambda_is", cfg.lambda_is),
            ("lambda_cs", cfg.lambda_cs),
        ];
        for (k, v) in floats {
            c.push(format!("config.{k}"), Tensor::scalar(v));
        }
        let counts = [
            ("batch_size", cfg.batch_size),
            ("bins", cfg.bins),
            ("patch", cfg.patch),
            ("width", cfg.width),
            ("height", cfg.height),
            ("hidden", cfg.hidden),
            ("dim", cfg.dim),
            ("teacher_radius", cfg.teacher_radius),
        ];
        for (k, v) in counts {
            c.push(format!("config.{k}"), Tensor::scalar(v as f64));
        }
        c.push("config.epochs", u64_tensor(cfg.epochs));
        // a zero-length tensor encodes "auto"
        let steps = match cfg.steps {
            Some(n) => u64_tensor(n),
            None => Tensor { dims: vec![0], data: TensorData::F64(Vec::new()) },
        };
        c.push("config.steps", steps);
        c.push("config.seed", u64_tensor(cfg.seed));
        c.push("config.teacher_seed", u64_tensor(cfg.teacher_seed));
        c.push("config.dtype", Tensor::scalar(cfg.dtype.code() as f64));

        let names = p.named_tensors();
        for (((name, t), m), v) in names.iter().zip(&self.optimizer.m).zip(&self.optimizer.v) {
            c.push(format!("adam.m.{name}"), Tensor { dims: vec![t.len()], data: TensorData::F64(m.clone()) });
            c.push(format!("adam.v.{name}"), Tensor { dims: vec![t.len()], data: TensorData::F64(v.clone()) });
        }
        c.push("adam.step", u64_tensor(self.optimizer.step));

        let flat: Vec<f64> = self
            .history
            .iter()
            .flat_map(|r| [r.l1, r.intra, r.cross, r.total])
            .collect();
        c.push("train.history", Tensor { dims: vec![self.history.len(), 4], data: TensorData::F64(flat) });
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        let patch = count_from(c, "student.patch")?;
        let bins = count_from(c, "student.bins")?;
        let hidden = count_from(c, "student.hidden")?;
        let dim = count_from(c, "student.dim")?;
        let seed = u64_from(c, "student.seed")?;
        let n_layers = if hidden == 0 { 1 } else { 2 };
        let mut layers = Vec::with_capacity(n_layers);
        for i in 0..n_layers {
            let w = c.require(&format!("student.layer{i}.weight"))?;
            let b = c.require(&format!("student.layer{i}.bias"))?;
            let [out, inp] = w.dims[..] else {
                return Err(Error::format("checkpoint", format!("layer{i}.weight is not 2-d")));
            };
            layers.push(Affine {
                out,
                inp,
                weight: w.to_f64(),
                bias: b.to_f64(),
            });
        }
        let params = StudentParams {
            patch,
            bins,
            hidden,
            dim,
            seed,
            layers,
        };
        params
            .validate()
            .map_err(|e| Error::format("checkpoint", e.to_string()))?;

        let steps_t = c.require("config.steps")?;
        let steps = if steps_t.dims == [0] {
            None
        } else {
            Some(u64_from(c, "config.steps")?)
        };
        let code = scalar_from(c, "config.dtype")?;
        let config = TrainConfig {
            lr: scalar_from(c, "config.lr")?,
            beta1: scalar_from(c, "config.beta1")?,
            beta2: scalar_from(c, "config.beta2")?,
            eps_adam: scalar_from(c, "config.eps_adam")?,
            weight_decay: scalar_from(c, "config.weight_decay")?,
            epochs: u64_from(c, "config.epochs")?,
            steps,
            batch_size: count_from(c, "config.batch_size")?,
            bins: count_from(c, "config.bins")?,
            patch: count_from(c, "config.patch")?,
            tau: scalar_from(c, "config.tau")?,
            event_scale: scalar_from(c, "config.event_scale")?,
            lambda_is: scalar_from(c, "config.lambda_is")?,
            lambda_cs: scalar_from(c, "config.lambda_cs")?,
            seed: u64_from(c, "config.seed")?,
            dtype: Dtype::from_code(code as u8)?,
            width: count_from(c, "config.width")?,
            height: count_from(c, "config.height")?,
            hidden: count_from(c, "config.hidden")?,
            dim: count_from(c, "config.dim")?,
            teacher_seed: u64_from(c, "config.teacher_seed")?,
            teacher_radius: count_from(c, "config.teacher_radius")?,
        };

        let mut m = Vec::new();
        let mut v = Vec::new();
        for (name, t) in params.named_tensors() {
            let mi = c.require(&format!("adam.m.{name}"))?.to_f64();
            let vi = c.require(&format!("adam.v.{name}"))?.to_f64();
            if mi.len() != t.len() || vi.len() != t.len() {
                return Err(Error::format("checkpoint", format!("optimizer state for {name} has wrong size")));
            }
            m.push(mi);
            v.push(vi);
        }
        let optimizer = OptimizerState {
            m,
            v,
            step: u64_from(c, "adam.step")?,
        };

        let h = c.require("train.history")?;
        if h.dims.len() != 2 || h.dims[1] != 4 {
            return Err(Error::format("checkpoint", "history must be n x 4"));
        }
        let history = h
            .to_f64()
            .chunks_exact(4)
            .map(|r| StepRecord {
                l1: r[0],
                intra: r[1],
                cross: r[2],
                total: r[3],
            })
            .collect();
        Ok(Checkpoint {
            params,
            config,
            optimizer,
            history,
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.to_container().to_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::from_container(&Container::from_bytes(bytes)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_container().save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_container(&Container::load(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(dtype: Dtype, hidden: usize) -> Checkpoint {
        let mut config = TrainConfig::desk();
        config.dtype = dtype;
        config.hidden = hidden;
        config.seed = u64::MAX - 5;
        let params = StudentParams::init(4, 3, hidden, 5, 0xdead_beef_cafe).unwrap();
        let mut optimizer = OptimizerState::for_student(&params);
        optimizer.step = 7;
        optimizer.m[0][1] = 0.25;
        optimizer.v[0][1] = 1e-9;
        Checkpoint {
            params,
            config,
            optimizer,
            history: vec![
                StepRecord { l1: 1.0, intra: 2.0, cross: 3.0, total: 4.0 },
                StepRecord { l1: 0.5, intra: 0.1, cross: 0.2, total: 0.3 },
            ],
        }
    }

    #[test]
    fn f64_round_trip_is_exact() {
        for hidden in [0, 6] {
            let ck = sample(Dtype::F64, hidden);
            let back = Checkpoint::from_bytes(&ck.to_bytes().unwrap()).unwrap();
            assert_eq!(back, ck);
        }
    }

    #[test]
    fn auto_steps_round_trip() {
        let mut ck = sample(Dtype::F64, 0);
        ck.config.steps = None;
        ck.history.clear();
        let back = Checkpoint::from_bytes(&ck.to_bytes().unwrap()).unwrap();
        assert_eq!(back, ck);
    }

    #[test]
    fn f32_storage_rounds_parameters() {
        let ck = sample(Dtype::F32, 3);
        let back = Checkpoint::from_bytes(&ck.to_bytes().unwrap()).unwrap();
        assert_eq!(back.config, ck.config);
        assert_eq!(back.optimizer, ck.optimizer);
        for (a, b) in back.params.layers.iter().zip(&ck.params.layers) {
            for (x, y) in a.weight.iter().zip(&b.weight) {
                assert_eq!(*x, *y as f32 as f64);
            }
        }
    }

    #[test]
    fn missing_entry_is_an_error() {
        let mut c = sample(Dtype::F64, 0).to_container();
        c.entries.retain(|(n, _)| n != "adam.step");
        assert!(Checkpoint::from_container(&c).is_err());
    }
}
