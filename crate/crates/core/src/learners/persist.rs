use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{ForestConfig, LinearSvmModel, RandomForestModel, SvmConfig};
use crate::error::{Error, Result};
use crate::FORMAT_VERSION;

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    RandomForest(RandomForestModel),
    LinearSvm(LinearSvmModel),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::RandomForest(_) => "random_forest",
            Model::LinearSvm(_) => "linear_svm",
        }
    }

    pub fn into_forest(self) -> Result<RandomForestModel> {
        match self {
            Model::RandomForest(m) => Ok(m),
            other => Err(Error::Parse(format!("expected random_forest, found {}", other.kind()))),
        }
    }

    pub fn into_svm(self) -> Result<LinearSvmModel> {
        match self {
            Model::LinearSvm(m) => Ok(m),
            other => Err(Error::Parse(format!("expected linear_svm, found {}", other.kind()))),
        }
    }
}

impl From<RandomForestModel> for Model {
    fn from(m: RandomForestModel) -> Self {
        Model::RandomForest(m)
    }
}

impl From<LinearSvmModel> for Model {
    fn from(m: LinearSvmModel) -> Self {
        Model::LinearSvm(m)
    }
}

#[derive(Serialize, Deserialize)]
struct Record<C, P> {
    format_version: String,
    model_kind: String,
    config: C,
    parameters: P,
}

#[derive(Serialize, Deserialize)]
struct ForestParameters<T> {
    n_features: usize,
    trees: T,
}

#[derive(Serialize, Deserialize)]
struct SvmParameters<W> {
    weights: W,
}

/// Writes `{format_version, model_kind, config, parameters}` as JSON.
/// Floats use the shortest representation that parses back bit-exactly.
pub fn save_model<W: Write>(model: &Model, mut sink: W) -> Result<()> {
    let kind = model.kind().to_owned();
    let version = FORMAT_VERSION.to_owned();
    match model {
        Model::RandomForest(m) => serde_json::to_writer(
            &mut sink,
            &Record {
                format_version: version,
                model_kind: kind,
                config: &m.config,
                parameters: ForestParameters {
                    n_features: m.n_features,
                    trees: &m.trees,
                },
            },
        )?,
        Model::LinearSvm(m) => serde_json::to_writer(
            &mut sink,
            &Record {
                format_version: version,
                model_kind: kind,
                config: &m.config,
                parameters: SvmParameters { weights: &m.weights },
            },
        )?,
    }
    sink.write_all(b"\n")?;
    sink.flush()?;
    Ok(())
}

pub fn load_model<R: Read>(source: R) -> Result<Model> {
    let record: Record<Value, Value> = serde_json::from_reader(source)?;
    if record.format_version != FORMAT_VERSION {
        return Err(Error::Version(record.format_version));
    }
    let model = match record.model_kind.as_str() {
        "random_forest" => {
            let config: ForestConfig = serde_json::from_value(record.config)?;
            let p: ForestParameters<_> = serde_json::from_value(record.parameters)?;
            let m = RandomForestModel {
                n_features: p.n_features,
                config,
                trees: p.trees,
            };
            m.validate()?;
            Model::RandomForest(m)
        }
        "linear_svm" => {
            let config: SvmConfig = serde_json::from_value(record.config)?;
            let p: SvmParameters<Vec<f64>> = serde_json::from_value(record.parameters)?;
            let m = LinearSvmModel {
                weights: p.weights,
                config,
            };
            m.validate()?;
            Model::LinearSvm(m)
        }
        other => return Err(Error::Parse(format!("unknown model kind {other:?}"))),
    };
    Ok(model)
}
