use std::path::Path;
use std::sync::Arc;

use kanrd::eval::{detector_from_id, Detector};
use kanrd::kan::KanModel;
use kanrd::pipeline::PipelineConfig;
use kanrd::symbolic::DecisionRule;
use kanrd::{Error, Result, SegmentClassifier};

/// Resolves one roster entry. Besides the built-in ids this accepts
/// `kan:<model.json>` and `rule:<rule.json>`.
pub fn resolve(id: &str, pipeline: &PipelineConfig) -> Result<Detector> {
    let classifier: Arc<dyn SegmentClassifier> = if let Some(path) = id.strip_prefix("kan:") {
        Arc::new(KanModel::load(Path::new(path)).map_err(|e| missing(id, e))?)
    } else if let Some(path) = id.strip_prefix("rule:") {
        let text = std::fs::read_to_string(path).map_err(|e| missing(id, e.into()))?;
        Arc::new(DecisionRule::from_json(&text)?)
    } else {
        return match detector_from_id(id)? {
            Detector::Segment { id, classifier, .. } => Ok(Detector::Segment {
                id,
                classifier,
                pipeline: *pipeline,
            }),
            other => Ok(other),
        };
    };
    Ok(Detector::Segment {
        id: id.to_string(),
        classifier,
        pipeline: *pipeline,
    })
}

fn missing(id: &str, e: Error) -> Error {
    match e {
        Error::Io(io) => Error::UnknownDetector(format!("{id}: {io}")),
        other => other,
    }
}

pub fn resolve_all(ids: &[String], pipeline: &PipelineConfig) -> Result<Vec<Detector>> {
    if ids.is_empty() {
        return Err(Error::InvalidConfig("detector roster is empty".into()));
    }
    pipeline.validate()?;
    ids.iter().map(|id| resolve(id, pipeline)).collect()
}
