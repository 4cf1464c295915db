use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{BlackBoxClassifier, ClassifierError};

pub const REMOTE_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Serialize, Deserialize)]
pub struct PredictRequest {
    pub texts: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PredictResponse {
    pub probs_positive: Vec<f64>,
}

/// Client for an external model served as `POST {base}/predict`.
///
/// One request per batch, no retries. Anything but a 200 with one finite
/// probability per input text is an error.
pub struct RemoteClassifier {
    endpoint: String,
    client: reqwest::blocking::Client,
}

impl RemoteClassifier {
    pub fn new(base_url: &str) -> Result<RemoteClassifier, ClassifierError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(REMOTE_TIMEOUT)
            .build()
            .map_err(|e| ClassifierError::Remote(e.to_string()))?;
        Ok(RemoteClassifier {
            endpoint: format!("{}/predict", base_url.trim_end_matches('/')),
            client,
        })
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

impl BlackBoxClassifier for RemoteClassifier {
    fn predict_proba(&self, texts: &[String]) -> Result<Vec<f64>, ClassifierError> {
        let response = self
            .client
            .post(&self.endpoint)
            .json(&PredictRequest { texts: texts.to_vec() })
            .send()
            .map_err(|e| ClassifierError::Remote(e.to_string()))?;
        if response.status() != reqwest::StatusCode::OK {
            return Err(ClassifierError::Remote(format!("{} returned {}", self.endpoint, response.status())));
        }
        let body: PredictResponse = response.json().map_err(|e| ClassifierError::Remote(e.to_string()))?;
        if body.probs_positive.len() != texts.len() {
            return Err(ClassifierError::Remote(format!(
                "expected {} probabilities, got {}",
                texts.len(),
                body.probs_positive.len()
            )));
        }
        if let Some(bad) = body.probs_positive.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(ClassifierError::Remote(format!("probability {bad} out of range")));
        }
        Ok(body.probs_positive)
    }
}
