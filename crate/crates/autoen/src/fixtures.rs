//! Locates the bundled fixture directory (reference score tables, the default
//! portfolio and the example datasets).

use std::path::PathBuf;

/// Environment variable overriding the fixture directory.
pub const FIXTURES_ENV: &str = "AUTOEN_FIXTURES";

/// Fixture directory: `$AUTOEN_FIXTURES` if set, otherwise the `fixtures/`
/// directory bundled with this crate's sources.
pub fn dir() -> PathBuf {
    if let Ok(dir) = std::env::var(FIXTURES_ENV) {
        return PathBuf::from(dir);
    }
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}
