//! Issue-filing webhook client.
//!
//! One HTTP POST with a JSON body `{title, body, labels, culprit}`; any 2xx
//! response counts as filed. The auth token, when configured, comes from an
//! environment variable and travels as a bearer token.

use serde::{Deserialize, Serialize};

use benchwatch_core::bisect::{BisectionResult, BisectionSession};
use benchwatch_core::regression::DetectionReport;

use crate::error::HarnessError;
use crate::report::{bisection_markdown, detection_markdown};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IssuePayload {
    pub title: String,
    pub body: String,
    pub labels: Vec<String>,
    pub culprit: Option<String>,
}

/// Builds the issue for a nightly with findings: the full findings table
/// plus the probe log of every bisection that ran.
pub fn build_issue(
    nightly_label: &str,
    detection: &DetectionReport,
    sessions: &[BisectionSession],
) -> IssuePayload {
    let culprit = sessions.iter().find_map(|s| match &s.result {
        BisectionResult::Culprit { commit, .. } => Some(commit.clone()),
        BisectionResult::Inconclusive { .. } => None,
    });
    let mut body = format!("# Performance regression report: {nightly_label}\n\n");
    body.push_str(&detection_markdown(detection));
    for session in sessions {
        body.push('\n');
        body.push_str(&bisection_markdown(session));
    }
    let title = match &culprit {
        Some(commit) => format!(
            "[perf] {} regression(s) in {nightly_label}, culprit {commit}",
            detection.findings.len()
        ),
        None => format!(
            "[perf] {} regression(s) in {nightly_label}",
            detection.findings.len()
        ),
    };
    IssuePayload {
        title,
        body,
        labels: vec!["performance".to_string(), "regression".to_string()],
        culprit,
    }
}

/// POSTs the payload. 2xx means filed; anything else (including transport
/// failures) is a webhook error — the caller keeps its local reports either
/// way.
pub fn post_issue(
    url: &str,
    auth_token: Option<&str>,
    payload: &IssuePayload,
) -> Result<(), HarnessError> {
    let agent = ureq::AgentBuilder::new()
        .timeout(std::time::Duration::from_secs(30))
        .build();
    let mut request = agent.post(url).set("content-type", "application/json");
    if let Some(token) = auth_token {
        request = request.set("authorization", &format!("Bearer {token}"));
    }
    let body = serde_json::to_string(payload).expect("serializable");
    match request.send_string(&body) {
        Ok(response) if (200..300).contains(&response.status()) => Ok(()),
        Ok(response) => Err(HarnessError::Webhook(format!(
            "{url}: unexpected status {}",
            response.status()
        ))),
        Err(ureq::Error::Status(status, _)) => {
            Err(HarnessError::Webhook(format!("{url}: status {status}")))
        }
        Err(e) => Err(HarnessError::Webhook(format!("{url}: {e}"))),
    }
}
