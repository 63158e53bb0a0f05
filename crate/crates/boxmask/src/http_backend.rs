//! Blocking HTTP client for external mask backends.

use std::time::Duration;

use boxmask_core::backend::{check_response, BackendErrorKind, ImageView};
use boxmask_core::{BackendError, MaskBackend, MaskProposal, Prompt};

use crate::protocol::{decode_response, encode_request, PredictResponse, PREDICT_PATH};

pub struct HttpBackend {
    agent: ureq::Agent,
    url: String,
    needs_pixels: bool,
}

impl HttpBackend {
    pub fn new(endpoint: &str, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        HttpBackend {
            agent,
            url: format!("{}{PREDICT_PATH}", endpoint.trim_end_matches('/')),
            needs_pixels: true,
        }
    }

    /// Sends dimensions only, for backends that synthesize masks from boxes.
    pub fn without_pixels(mut self) -> Self {
        self.needs_pixels = false;
        self
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

fn transport(e: ureq::Error) -> BackendError {
    let kind = match e {
        ureq::Error::Timeout(_) => BackendErrorKind::Timeout,
        ureq::Error::Json(_) => BackendErrorKind::Malformed,
        _ => BackendErrorKind::Transport,
    };
    BackendError::new(kind, e.to_string())
}

impl MaskBackend for HttpBackend {
    fn predict(&self, image: &ImageView<'_>, prompts: &[Prompt]) -> Result<Vec<MaskProposal>, BackendError> {
        let request = encode_request(image, prompts);
        let mut response = self.agent.post(&self.url).send_json(&request).map_err(transport)?;
        let body: PredictResponse = response.body_mut().read_json().map_err(transport)?;
        check_response(image, prompts.len(), decode_response(&body)?)
    }

    fn needs_pixels(&self) -> bool {
        self.needs_pixels
    }
}
