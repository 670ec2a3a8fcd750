use std::path::Path;

use fim_core::scene::{generate_scene, ScenarioKind};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliResult;
use crate::formats::{to_json_bytes, write_bytes, write_json, SceneFile, FORMAT_VERSION};
use crate::runtime::create_dir;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ManifestEntry {
    pub file: String,
    pub kind: String,
    pub seed: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub version: u32,
    pub seed: u64,
    pub n_per_kind: usize,
    pub scenes: Vec<ManifestEntry>,
}

/// Writes `n_per_kind` scenes of every kind plus `manifest.json`. Scene `i`
/// of each kind uses seed `seed + i`.
pub fn run(n_per_kind: usize, seed: u64, out: &Path) -> CliResult<Manifest> {
    create_dir(out)?;
    let mut scenes = Vec::with_capacity(n_per_kind * ScenarioKind::ALL.len());
    for kind in ScenarioKind::ALL {
        for i in 0..n_per_kind {
            let scene_seed = seed.wrapping_add(i as u64);
            let scene = generate_scene(kind, scene_seed);
            let bytes = to_json_bytes(&SceneFile::from_scene(&scene));
            let file = format!("{}_{i:04}.json", kind.as_str());
            write_bytes(&out.join(&file), &bytes)?;
            scenes.push(ManifestEntry {
                file,
                kind: kind.as_str().to_string(),
                seed: scene_seed,
                sha256: hex::encode(Sha256::digest(&bytes)),
            });
        }
    }
    let manifest = Manifest {
        version: FORMAT_VERSION,
        seed,
        n_per_kind,
        scenes,
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    log::info!(
        "wrote {} scenes to {}",
        manifest.scenes.len(),
        out.display()
    );
    Ok(manifest)
}
