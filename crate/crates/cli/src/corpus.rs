//! Writes generated programs, their IO tests and a batch manifest to disk.

use std::path::{Path, PathBuf};

use anyhow::Context;
use legoc_core::suite::{materialize, SeedManifest};
use legoc_core::Harness;

use crate::batch::{CorpusManifest, ManifestCase};

pub fn generate(seeds: &SeedManifest, out: &Path, harness: &Harness) -> anyhow::Result<PathBuf> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    std::fs::write(out.join("seeds.toml"), seeds.to_toml())?;
    let mut manifest = CorpusManifest::default();
    for entry in &seeds.programs {
        let case = materialize(*entry, harness).with_context(|| format!("seed {}", entry.seed))?;
        let name = format!("seed{}_b{}", entry.seed, entry.budget);
        let source = PathBuf::from(format!("{name}.c"));
        let tests = PathBuf::from(format!("{name}.tests.toml"));
        std::fs::write(out.join(&source), &case.source)?;
        std::fs::write(out.join(&tests), toml::to_string(&case.tests)?)?;
        manifest.cases.push(ManifestCase {
            name: Some(name),
            source,
            tests: Some(tests),
            function: None,
        });
    }
    let path = out.join("manifest.toml");
    std::fs::write(&path, toml::to_string(&manifest)?)?;
    Ok(path)
}
