use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::Skeleton;

/// One recorded clip.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSequence {
    pub id: String,
    /// 0-based class index; absent for unlabeled records.
    pub label: Option<usize>,
    pub fps: Option<f64>,
    /// Where the clip came from (file name, generator tag). Not serialized.
    pub source: String,
    pub skeleton: Skeleton,
}

#[derive(Serialize, Deserialize)]
struct Record {
    id: String,
    #[serde(default)]
    label: Option<usize>,
    #[serde(default)]
    fps: Option<f64>,
    frames: Vec<Vec<Vec<f64>>>,
}

/// Writes one JSON object per line. Coordinates use the shortest decimal
/// form that parses back to the same `f64`, so a round trip is exact.
pub fn write_jsonl<W: Write>(mut w: W, seqs: &[SkeletonSequence]) -> Result<()> {
    for s in seqs {
        let rec = Record {
            id: s.id.clone(),
            label: s.label,
            fps: s.fps,
            frames: s.skeleton.to_nested(),
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_jsonl(path: impl AsRef<Path>, seqs: &[SkeletonSequence]) -> Result<()> {
    write_jsonl(BufWriter::new(File::create(path)?), seqs)
}

/// Parses JSONL; errors carry the 1-based line number. Blank lines are skipped.
pub fn read_jsonl<R: Read>(r: R, source: &str) -> Result<Vec<SkeletonSequence>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: n,
            message: e.to_string(),
        })?;
        let skeleton = Skeleton::from_nested(&rec.frames).map_err(|e| Error::Parse {
            line: n,
            message: format!("record {:?}: {e}", rec.id),
        })?;
        out.push(SkeletonSequence {
            id: rec.id,
            label: rec.label,
            fps: rec.fps,
            source: source.to_string(),
            skeleton,
        });
    }
    Ok(out)
}

pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Vec<SkeletonSequence>> {
    let path = path.as_ref();
    read_jsonl(File::open(path)?, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(id: &str, label: Option<usize>) -> SkeletonSequence {
        let data = (0..2 * 3 * 3).map(|i| (i as f64 * 0.1).sin() / 3.0).collect();
        SkeletonSequence {
            id: id.into(),
            label,
            fps: Some(30.0),
            source: String::new(),
            skeleton: Skeleton::new(2, 3, 3, data).unwrap(),
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let seqs = vec![seq("a", Some(1)), seq("b", None)];
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &seqs).unwrap();
        let back = read_jsonl(buf.as_slice(), "").unwrap();
        assert_eq!(back, seqs);
    }

    #[test]
    fn missing_label_loads_as_none() {
        let text = r#"{"id":"t","frames":[[[0,0,0]],[[1,1,1]]]}"#;
        let s = read_jsonl(text.as_bytes(), "").unwrap();
        assert_eq!(s[0].label, None);
        assert_eq!(s[0].fps, None);
    }

    #[test]
    fn ragged_record_reports_line() {
        let text = "{\"id\":\"ok\",\"frames\":[[[0,0]],[[1,1]]]}\n\n{\"id\":\"bad\",\"frames\":[[[0,0]],[[1]]]}\n";
        match read_jsonl(text.as_bytes(), "") {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("bad"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(matches!(
            read_jsonl("{oops\n".as_bytes(), ""),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
