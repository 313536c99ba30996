//! Run manifests: the resolved configuration, seeds, tool version, and
//! content hashes of every emitted artifact. A manifest plus the tool
//! version is enough to reproduce a run bit-exactly.

use std::fs;
use std::path::Path;

use pcmsim::config::KvMap;

/// FNV-1a over a byte stream; stable and dependency-free.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100_0000_01b3);
    }
    hash
}

pub struct Manifest {
    kv: KvMap,
    artifacts: Vec<String>,
}

impl Manifest {
    pub fn new(kind: &str) -> Self {
        let mut kv = KvMap::new();
        kv.set("tool", "pcmsim");
        kv.set("tool_version", env!("CARGO_PKG_VERSION"));
        kv.set("kind", kind);
        Self {
            kv,
            artifacts: Vec::new(),
        }
    }

    pub fn set_f64(&mut self, key: &str, value: f64) {
        self.kv.set(key, &value.to_string());
    }

    pub fn set_usize(&mut self, key: &str, value: usize) {
        self.kv.set(key, &value.to_string());
    }

    /// Echo a configuration map under a key prefix.
    pub fn embed(&mut self, prefix: &str, kv: &KvMap) {
        for (k, v) in kv.entries() {
            self.kv.set(&format!("{prefix}{k}"), v);
        }
    }

    /// Record an artifact's content hash (call after writing the file).
    pub fn record_artifact(&mut self, dir: &Path, name: &str) -> anyhow::Result<()> {
        let bytes = fs::read(dir.join(name))?;
        self.artifacts
            .push(format!("artifact.{name} = {:016x}", fnv1a64(&bytes)));
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> anyhow::Result<()> {
        let mut text = self.kv.to_text();
        for line in &self.artifacts {
            text.push_str(line);
            text.push('\n');
        }
        fs::write(dir.join("manifest.kv"), text)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_matches_reference_values() {
        // Published FNV-1a test vectors.
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }
}
