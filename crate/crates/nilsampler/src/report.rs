//! Self-contained machine-readable run reports.
//!
//! A report echoes the exact parameters (including seeds) needed to
//! reproduce it: exact-mode results reproduce bit for bit, float-mode
//! results to the stated tolerances with deterministic reductions.

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub report_version: u32,
    pub command: String,
    /// sha256 of the input spec (file bytes, or the canonical JSON of a
    /// built-in corpus entry).
    pub input_digest: String,
    pub parameters: serde_json::Value,
    pub results: serde_json::Value,
    pub timing_seconds: f64,
}

impl RunReport {
    pub fn new(
        command: impl Into<String>,
        input_digest: String,
        parameters: serde_json::Value,
        results: serde_json::Value,
        timing_seconds: f64,
    ) -> Self {
        RunReport {
            report_version: REPORT_VERSION,
            command: command.into(),
            input_digest,
            parameters,
            results,
            timing_seconds,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

pub fn digest_bytes(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex_string(&hasher.finalize())
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_is_valid_json_with_version() {
        let r = RunReport::new(
            "verify",
            digest_bytes(b"x"),
            serde_json::json!({"seed": 1}),
            serde_json::json!({"ok": true}),
            0.5,
        );
        let parsed: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(parsed["report_version"], 1);
        assert_eq!(parsed["results"]["ok"], true);
    }

    #[test]
    fn digest_is_stable() {
        assert_eq!(digest_bytes(b"abc"), digest_bytes(b"abc"));
        assert_ne!(digest_bytes(b"abc"), digest_bytes(b"abd"));
        assert_eq!(digest_bytes(b"abc").len(), 64);
    }
}
