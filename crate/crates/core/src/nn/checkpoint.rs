use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Mlp, NnError};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

/// Named networks and auxiliary parameter vectors, stored as JSON.
///
/// ```json
/// {"format_version": 1,
///  "networks": {"q": {"sizes": [33, 64, 64, 27], "params": [...]}},
///  "vectors": {"log_std": [-0.69, -0.69, -0.69]}}
/// ```
///
/// `params` is each layer's row-major `out × in` weights followed by its
/// biases, layers in order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub networks: BTreeMap<String, Mlp>,
    #[serde(default)]
    pub vectors: BTreeMap<String, Vec<f64>>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self {
            format_version: CHECKPOINT_FORMAT_VERSION,
            ..Self::default()
        }
    }

    pub fn with_network(mut self, name: &str, net: &Mlp) -> Self {
        self.networks.insert(name.to_owned(), net.clone());
        self
    }

    pub fn with_vector(mut self, name: &str, v: &[f64]) -> Self {
        self.vectors.insert(name.to_owned(), v.to_vec());
        self
    }

    pub fn network(&self, name: &str) -> Result<&Mlp, NnError> {
        self.networks
            .get(name)
            .ok_or_else(|| NnError::Checkpoint(format!("no network named `{name}`")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serialisation cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, NnError> {
        let ck: Checkpoint =
            serde_json::from_str(text).map_err(|e| NnError::Checkpoint(e.to_string()))?;
        if ck.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(NnError::Checkpoint(format!(
                "unsupported format_version {} (expected {CHECKPOINT_FORMAT_VERSION})",
                ck.format_version
            )));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        fs::write(path, self.to_json())
            .map_err(|e| NnError::Checkpoint(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        let text = fs::read_to_string(path)
            .map_err(|e| NnError::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init_mlp;

    #[test]
    fn round_trip_preserves_bits() {
        let net = init_mlp(33, 27, 2).unwrap();
        let ck = Checkpoint::new()
            .with_network("q", &net)
            .with_vector("log_std", &[-0.5, 0.25]);
        let back = Checkpoint::from_json(&ck.to_json()).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.network("q").unwrap(), &net);
    }

    #[test]
    fn rejects_bad_shapes_and_versions() {
        let bad = r#"{"format_version":1,"networks":{"q":{"sizes":[2,1],"params":[1.0]}}}"#;
        assert!(Checkpoint::from_json(bad).is_err());
        let bad = r#"{"format_version":9,"networks":{}}"#;
        assert!(Checkpoint::from_json(bad).is_err());
    }
}
