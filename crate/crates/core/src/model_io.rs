//! One JSON file convention for every fitted model, tagged by kind.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::{KnnModel, OlsModel, TreeModel};
use crate::error::{Error, Result};
use crate::gbt::BoostedEnsemble;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SavedModel {
    Boosted(BoostedEnsemble),
    Ols(OlsModel),
    Knn(KnnModel),
    Tree(TreeModel),
}

impl SavedModel {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)
            .map_err(|e| Error::Config(format!("model encode: {e}")))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("model decode: {e}")))
    }
}
