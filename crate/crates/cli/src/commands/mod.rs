use std::path::PathBuf;

use crate::config::RunConfig;
use crate::output::Format;

pub mod converge;
pub mod extract;
pub mod fit;
pub mod solve;
pub mod sweep;

/// Settings shared by every subcommand after flag overrides.
pub struct Context {
    pub config: RunConfig,
    pub out: PathBuf,
    pub seed: u64,
    pub format: Format,
}

impl Context {
    pub fn ensure_out(&self) -> squidnoise::Result<()> {
        std::fs::create_dir_all(&self.out).map_err(|e| {
            squidnoise::Error::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", self.out.display()),
            ))
        })
    }
}
