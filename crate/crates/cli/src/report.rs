use serde::Serialize;
use sha2::{Digest, Sha256};

/// `sha256:<hex>` of the compact JSON encoding of `config`.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let bytes = serde_json::to_vec(config).expect("configs serialize");
    format!("sha256:{}", hex::encode(Sha256::digest(&bytes)))
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

/// Fields every report starts with.
#[derive(Serialize)]
pub struct Header<'a> {
    pub schema_version: u32,
    pub command: &'a str,
    pub seed: u64,
    pub config_hash: String,
    pub precision: &'static str,
}

impl<'a> Header<'a> {
    pub fn new<T: Serialize>(command: &'a str, seed: u64, config: &T) -> Self {
        Self {
            schema_version: faframe::audit::SCHEMA_VERSION,
            command,
            seed,
            config_hash: config_hash(config),
            precision: "f64",
        }
    }
}
