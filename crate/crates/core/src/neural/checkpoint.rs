//! Checkpoint format: one JSON document
//! `{"version": "gridee-ckpt-1", "params": {name: {"shape": [..], "data": [..]}}, "meta": {..}}`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ParamRegistry, Tensor};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: &str = "gridee-ckpt-1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorRecord {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: String,
    pub params: BTreeMap<String, TensorRecord>,
    /// Model description needed to rebuild the parameter layout.
    #[serde(default)]
    pub meta: serde_json::Value,
}

impl Checkpoint {
    pub fn from_registry(reg: &ParamRegistry, meta: serde_json::Value) -> Self {
        let params = reg
            .ids()
            .map(|id| {
                let t = reg.get(id);
                (
                    reg.name(id).to_string(),
                    TensorRecord {
                        shape: t.shape().to_vec(),
                        data: t.data().to_vec(),
                    },
                )
            })
            .collect();
        Checkpoint {
            version: CHECKPOINT_VERSION.to_string(),
            params,
            meta,
        }
    }

    /// Parses and validates version, shapes and finiteness.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text)?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {:?}, expected {CHECKPOINT_VERSION:?}",
                ckpt.version
            )));
        }
        for (name, rec) in &ckpt.params {
            let expected = rec
                .shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| Error::Checkpoint(format!("{name}: shape overflows")))?;
            if expected != rec.data.len() {
                return Err(Error::Checkpoint(format!(
                    "{name}: shape {:?} needs {expected} values, found {}",
                    rec.shape,
                    rec.data.len()
                )));
            }
            if rec.data.iter().any(|x| !x.is_finite()) {
                return Err(Error::Checkpoint(format!("{name}: non-finite value")));
            }
        }
        Ok(ckpt)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    /// Copies every stored tensor into `reg`. The name sets must match.
    pub fn apply_to(&self, reg: &mut ParamRegistry) -> Result<()> {
        if self.params.len() != reg.len() {
            return Err(Error::Checkpoint(format!(
                "checkpoint has {} parameters, model has {}",
                self.params.len(),
                reg.len()
            )));
        }
        for (name, rec) in &self.params {
            reg.load(name, Tensor::from_vec(&rec.shape, rec.data.clone())?)?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::ParamGroup;

    fn registry() -> ParamRegistry {
        let mut reg = ParamRegistry::new();
        reg.register(
            "w",
            ParamGroup::Other,
            Tensor::from_vec(&[2, 2], vec![0.1, -2.5e-7, 3.0, 1.0 / 3.0]).unwrap(),
        )
        .unwrap();
        reg.register("b", ParamGroup::Encoder, Tensor::zeros(&[2]))
            .unwrap();
        reg
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let reg = registry();
        let ckpt = Checkpoint::from_registry(&reg, serde_json::json!({"k": 1}));
        let back = Checkpoint::from_json_str(&ckpt.to_json_string()).unwrap();
        assert_eq!(back, ckpt);
        let mut other = registry();
        other.get_mut(other.id("w").unwrap()).fill(0.0);
        back.apply_to(&mut other).unwrap();
        assert_eq!(
            other.get(other.id("w").unwrap()),
            reg.get(reg.id("w").unwrap())
        );
    }

    #[test]
    fn rejects_bad_documents() {
        let wrong_version = r#"{"version": "v0", "params": {}}"#;
        assert!(Checkpoint::from_json_str(wrong_version).is_err());
        let bad_shape =
            r#"{"version": "gridee-ckpt-1", "params": {"w": {"shape": [2, 2], "data": [1.0]}}}"#;
        assert!(Checkpoint::from_json_str(bad_shape).is_err());
        let huge = r#"{"version": "gridee-ckpt-1", "params": {"w": {"shape": [18446744073709551615, 2], "data": []}}}"#;
        assert!(Checkpoint::from_json_str(huge).is_err());
    }

    #[test]
    fn apply_rejects_missing_params() {
        let mut reg = registry();
        let mut ckpt = Checkpoint::from_registry(&reg, serde_json::Value::Null);
        ckpt.params.remove("b");
        assert!(ckpt.apply_to(&mut reg).is_err());
    }
}
