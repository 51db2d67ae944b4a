mod dataset;
mod eval;
mod identify;
mod index;
mod lcq2f;
mod lexicon;

use std::path::Path;

use framescout::embedding::Embedder;
use framescout::vector_index::{load_index, VectorIndex};

use crate::args::Command;
use crate::config::Settings;
use crate::error::{CliError, CliResult};
use crate::manifest::ManifestBuilder;

pub struct Ctx {
    pub settings: Settings,
}

impl Ctx {
    pub fn manifest(&self) -> ManifestBuilder {
        ManifestBuilder::start(
            self.settings.config_sha256.clone(),
            self.settings.seed,
            self.settings.workers,
        )
    }

    /// Loads an index and the embedder, refusing a pair whose fingerprints differ.
    pub fn index_and_embedder(&self, path: &Path) -> CliResult<(VectorIndex, Box<dyn Embedder>)> {
        let index = load_index(path)?;
        let embedder = self.settings.embedder()?;
        if !index.is_compatible_with(embedder.as_ref()) {
            return Err(CliError::Incompatible(format!(
                "{} was built with a different embedder or settings than {:?} (dim {} vs {})",
                path.display(),
                embedder.fingerprint(),
                index.dim(),
                embedder.dim()
            )));
        }
        Ok((index, embedder))
    }
}

pub fn run(ctx: &Ctx, command: Command) -> CliResult<()> {
    match command {
        Command::Lexicon(cmd) => lexicon::run(ctx, cmd),
        Command::Embed(args) => index::embed(ctx, args),
        Command::Index(cmd) => index::run(ctx, cmd),
        Command::Retrieve(args) => index::retrieve(ctx, args),
        Command::Identify(args) => identify::run(ctx, args),
        Command::Dataset(cmd) => dataset::run(ctx, cmd),
        Command::Eval(cmd) => eval::run(ctx, cmd),
        Command::Lcq2f(cmd) => lcq2f::run(ctx, cmd),
    }
}
