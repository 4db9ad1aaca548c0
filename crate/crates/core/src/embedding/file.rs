use std::path::PathBuf;

use super::{cemb, Embedded, EmbedderBackend};
use crate::error::{Error, Result};

/// Reads pre-exported `.cemb` files from a directory, keyed by content hash.
#[derive(Debug, Clone)]
pub struct FileEmbedder {
    pub dir: PathBuf,
}

impl FileEmbedder {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FileEmbedder { dir: dir.into() }
    }

    pub fn path_for(&self, code: &str) -> PathBuf {
        self.dir.join(cemb::file_name(code))
    }
}

impl EmbedderBackend for FileEmbedder {
    fn identity(&self) -> String {
        format!("file:{}", self.dir.display())
    }

    fn embed(&self, code: &str, _language: &str) -> Result<Embedded> {
        let path = self.path_for(code);
        let bytes = std::fs::read(&path)
            .map_err(|e| Error::Backend(format!("{}: {e}", path.display())))?;
        cemb::decode(&bytes).map_err(|e| Error::Backend(format!("{}: {e}", path.display())))
    }

    fn check(&self) -> Result<()> {
        if self.dir.is_dir() {
            Ok(())
        } else {
            Err(Error::Backend(format!(
                "embedding directory {} does not exist",
                self.dir.display()
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{score_code_pair, HashEmbedder};

    #[test]
    fn reads_exported_files() {
        let dir = std::env::temp_dir().join(format!("codeval-file-backend-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let hash = HashEmbedder::default();
        let files = FileEmbedder::new(&dir);
        for code in ["def f(x):\n    return x", "def g(y):\n    return y + 1"] {
            let e = hash.embed(code, "python").unwrap();
            std::fs::write(files.path_for(code), cemb::encode(&e)).unwrap();
            assert_eq!(files.embed(code, "python").unwrap(), e);
        }
        let a = "def f(x):\n    return x";
        let b = "def g(y):\n    return y + 1";
        assert_eq!(
            score_code_pair(&files, a, b, "python", None).unwrap(),
            score_code_pair(&hash, a, b, "python", None).unwrap()
        );
        assert!(matches!(files.embed("missing", "python"), Err(Error::Backend(_))));
        assert!(files.check().is_ok());
        std::fs::remove_dir_all(&dir).unwrap();
        assert!(files.check().is_err());
    }
}
