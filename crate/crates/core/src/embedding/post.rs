//! Optional plain-text POST of a rendered query.

use crate::error::{Error, Result};

/// Sends `query` as the request body and returns the response text
/// verbatim. Refuses unless `enabled`; no retries.
pub fn post_query(endpoint: &str, query: &str, enabled: bool) -> Result<String> {
    if !enabled {
        return Err(Error::Config {
            key: "network".into(),
            message: "network access is disabled".into(),
        });
    }
    if endpoint.trim().is_empty() {
        return Err(Error::invalid("endpoint", "empty URL"));
    }
    send(endpoint, query)
}

#[cfg(feature = "http")]
fn send(endpoint: &str, query: &str) -> Result<String> {
    let resp = ureq::post(endpoint)
        .header("Content-Type", "text/plain; charset=utf-8")
        .send(query)
        .map_err(|e| Error::Network(e.to_string()))?;
    resp.into_body()
        .read_to_string()
        .map_err(|e| Error::Network(e.to_string()))
}

#[cfg(not(feature = "http"))]
fn send(_endpoint: &str, _query: &str) -> Result<String> {
    Err(Error::Network("built without the `http` feature".into()))
}
