use serde::{Deserialize, Serialize};

use super::{FittedModel, ModelError, ModelSpec};
use crate::features::{FeatureRow, FeatureTransform};
use crate::ids::{CaseId, VesselId};
use crate::scalar::Real;
use crate::trace::{cycle_period, uniform_times, VelocityTrace};

pub const ARTIFACT_FORMAT: &str = "coarcta-model";
pub const ARTIFACT_VERSION: u32 = 1;

/// RMSE in m/s on the held-out splits.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics<T> {
    pub validation_rmse: Option<T>,
    pub test_rmse: Option<T>,
}

/// A trained regressor bundled with the transforms that feed it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact<T> {
    pub format: String,
    pub version: u32,
    pub name: String,
    pub spec: ModelSpec,
    pub transform: FeatureTransform<T>,
    pub model: FittedModel<T>,
    pub metrics: Metrics<T>,
}

impl<T: Real> ModelArtifact<T> {
    pub fn new(
        name: impl Into<String>,
        spec: ModelSpec,
        transform: FeatureTransform<T>,
        model: FittedModel<T>,
    ) -> Self {
        Self {
            format: ARTIFACT_FORMAT.to_string(),
            version: ARTIFACT_VERSION,
            name: name.into(),
            spec,
            transform,
            model,
            metrics: Metrics {
                validation_rmse: None,
                test_rmse: None,
            },
        }
    }

    pub fn with_metrics(mut self, metrics: Metrics<T>) -> Self {
        self.metrics = metrics;
        self
    }

    /// Velocities in m/s: encode, scale, predict in model space, invert the
    /// target transform and clamp at zero.
    pub fn predict(&self, rows: &[FeatureRow<T>]) -> Result<Vec<T>, ModelError> {
        Ok(self.transform.inverse_target(&self.predict_model_space(rows)?))
    }

    /// Raw model outputs before the inverse target transform.
    pub fn predict_model_space(&self, rows: &[FeatureRow<T>]) -> Result<Vec<T>, ModelError> {
        let x = self.transform.encode(rows)?;
        Ok(self.model.predict(&x))
    }

    pub fn to_json(&self) -> Result<String, ModelError> {
        serde_json::to_string_pretty(self).map_err(|e| ModelError::Artifact(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let artifact: Self = serde_json::from_str(text).map_err(|e| ModelError::Artifact(e.to_string()))?;
        if artifact.format != ARTIFACT_FORMAT {
            return Err(ModelError::Artifact(format!("unexpected format `{}`", artifact.format)));
        }
        if artifact.version != ARTIFACT_VERSION {
            return Err(ModelError::Artifact(format!(
                "unsupported version {}",
                artifact.version
            )));
        }
        Ok(artifact)
    }
}

/// Uniform-mean ensemble of artifacts that share identical transforms.
pub fn make_voting_ensemble<T: Real>(
    name: impl Into<String>,
    members: Vec<ModelArtifact<T>>,
) -> Result<ModelArtifact<T>, ModelError> {
    if members.len() < 2 {
        return Err(ModelError::Voting(format!(
            "needs at least 2 members, got {}",
            members.len()
        )));
    }
    let transform = members[0].transform.clone();
    if let Some(m) = members.iter().find(|m| m.transform != transform) {
        return Err(ModelError::Voting(format!(
            "member `{}` uses different transforms",
            m.name
        )));
    }
    let spec = ModelSpec::voting(members.iter().map(|m| m.spec.clone()).collect());
    let model = FittedModel::Voting(members.into_iter().map(|m| m.model).collect());
    Ok(ModelArtifact::new(name, spec, transform, model))
}

/// Queries the model over one cardiac cycle at `n` uniform times with the
/// vessel, case and heart rate held fixed.
pub fn predict_velocity_profile<T: Real>(
    model: &ModelArtifact<T>,
    vessel: VesselId,
    case: CaseId,
    heart_rate: T,
    n: usize,
) -> Result<VelocityTrace<T>, ModelError> {
    if !(heart_rate > T::zero() && heart_rate.is_finite()) {
        return Err(crate::trace::TraceError::InvalidHeartRate(heart_rate.to_f64_lossy()).into());
    }
    if !crate::trace::STEP_COUNTS.contains(&n) {
        return Err(crate::trace::TraceError::InvalidStepCount(n).into());
    }
    let times = uniform_times(cycle_period(heart_rate), n);
    let rows: Vec<FeatureRow<T>> = times
        .iter()
        .map(|&time| FeatureRow {
            time,
            vessel,
            case,
            heart_rate,
        })
        .collect();
    let velocities = model.predict(&rows)?;
    Ok(VelocityTrace::new(times, velocities, vessel, case, heart_rate)?)
}
