//! Line-delimited JSON frame manifests.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use boxmask_core::FrameRecord;

use crate::fsio::write_atomic;
use crate::{Error, Result};

/// Parsed manifest plus the directory its relative paths resolve against.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub frames: Vec<FrameRecord>,
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn new(frames: Vec<FrameRecord>, base_dir: impl Into<PathBuf>) -> Self {
        Manifest {
            frames,
            base_dir: base_dir.into(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let frames = parse_manifest(&text, path)?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Manifest { frames, base_dir })
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        let p = Path::new(rel);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn get(&self, frame_id: &str) -> Option<&FrameRecord> {
        self.frames.iter().find(|f| f.frame_id == frame_id)
    }
}

/// Frame ids double as file stems, so they must be plain names.
pub fn check_frame_id(id: &str) -> std::result::Result<(), String> {
    if id.is_empty() || id == "." || id == ".." {
        return Err(format!("invalid frame_id `{id}`"));
    }
    if id.chars().any(|c| matches!(c, '/' | '\\' | '\0') || c.is_control()) {
        return Err(format!("frame_id `{id}` must not contain path separators or control characters"));
    }
    Ok(())
}

/// Parses manifest text. `origin` only labels errors.
pub fn parse_manifest(text: &str, origin: &Path) -> Result<Vec<FrameRecord>> {
    let mut frames = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            line: i + 1,
            message,
        };
        let frame: FrameRecord = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        check_frame_id(&frame.frame_id).map_err(err)?;
        if frame.width == 0 || frame.height == 0 {
            return Err(err(format!("frame `{}` has zero image dimensions", frame.frame_id)));
        }
        if !seen.insert(frame.frame_id.clone()) {
            return Err(err(format!("duplicate frame_id `{}`", frame.frame_id)));
        }
        frames.push(frame);
    }
    Ok(frames)
}

pub fn to_jsonl(frames: &[FrameRecord]) -> String {
    let mut out = String::new();
    for f in frames {
        out.push_str(&serde_json::to_string(f).expect("frame records serialize"));
        out.push('\n');
    }
    out
}

pub fn write_manifest(path: &Path, frames: &[FrameRecord]) -> Result<()> {
    write_atomic(path, to_jsonl(frames).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINE: &str = r#"{"frame_id":"a","image":"a.png","width":10,"height":8,"weather":"snow"}"#;

    #[test]
    fn minimal_record() {
        let frames = parse_manifest(&format!("{LINE}\n\n"), Path::new("m")).unwrap();
        assert_eq!(frames.len(), 1);
        assert!(frames[0].boxes.is_empty());
        let text = to_jsonl(&frames);
        assert!(text.ends_with(",\"boxes\":[]}\n"));
        assert_eq!(parse_manifest(&text, Path::new("m")).unwrap(), frames);
    }

    #[test]
    fn rejects_bad_records() {
        let dup = format!("{LINE}\n{LINE}\n");
        let e = parse_manifest(&dup, Path::new("m")).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e}");
        for bad in [
            LINE.replace("snow", "fog"),
            LINE.replace("\"a\"", "\"../a\""),
            LINE.replace("\"width\":10", "\"width\":0"),
            LINE.replace("}", ",\"extra\":1}"),
            LINE.replace("}", r#","boxes":[{"x_min":0,"y_min":0,"x_max":1,"y_max":1,"class":"truck"}]}"#),
        ] {
            assert!(parse_manifest(&bad, Path::new("m")).is_err(), "{bad}");
        }
    }

    #[test]
    fn relative_paths_follow_manifest() {
        let m = Manifest::new(vec![], "/data/set");
        assert_eq!(m.resolve("img/a.png"), PathBuf::from("/data/set/img/a.png"));
        assert_eq!(m.resolve("/abs/a.png"), PathBuf::from("/abs/a.png"));
    }
}
