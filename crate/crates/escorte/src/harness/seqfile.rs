use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::action::ActionState;
use crate::simworld::{Corpus, Detection, FrameRecord, Sequence, Split};

pub const MANIFEST_NAME: &str = "corpus.manifest";
const SEQ_HEADER: &str = "escorte-seq";
const MANIFEST_HEADER: &str = "escorte-corpus";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("{path}: schema version {found} unsupported (expected {FORMAT_VERSION})")]
    Version { path: String, found: u32 },
}

/// Serialize a float with 17 significant digits — enough for a lossless f64
/// round-trip through text.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FormatError + '_ {
    move |source| FormatError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Write one sequence as line-delimited text.
///
/// Header: `escorte-seq <version> <fps> <dim>`. Then one record per frame:
/// `<seq_id> <frame> <t> <action> <gap_m> <ndets>` followed by ` | ` and
/// `x y w h f0 .. f{d-1} subject` for each detection. All floats carry 17
/// significant digits, so save → load is lossless.
pub fn save_sequence(seq: &Sequence, path: &Path) -> Result<(), FormatError> {
    let mut out = String::new();
    out.push_str(&format!(
        "{SEQ_HEADER} {FORMAT_VERSION} {} {}\n",
        fmt_f64(seq.fps),
        seq.dim
    ));
    for f in &seq.frames {
        out.push_str(&format!(
            "{} {} {} {} {} {}",
            seq.seq_id,
            f.frame,
            fmt_f64(f.t),
            f.action.name(),
            fmt_f64(f.gap_m),
            f.detections.len()
        ));
        for d in &f.detections {
            out.push_str(" |");
            for v in d.bbox {
                out.push(' ');
                out.push_str(&fmt_f64(v));
            }
            for v in &d.feature {
                out.push(' ');
                out.push_str(&fmt_f64(*v));
            }
            out.push_str(if d.is_subject { " 1" } else { " 0" });
        }
        out.push('\n');
    }
    let mut file = fs::File::create(path).map_err(io_err(path))?;
    file.write_all(out.as_bytes()).map_err(io_err(path))?;
    Ok(())
}

/// A sequence read back from disk; the split assignment lives in the
/// manifest, not the sequence file.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedSequence {
    pub seq_id: usize,
    pub fps: f64,
    pub dim: usize,
    pub frames: Vec<FrameRecord>,
}

impl LoadedSequence {
    pub fn into_sequence(self, split: Split) -> Sequence {
        Sequence {
            seq_id: self.seq_id,
            fps: self.fps,
            dim: self.dim,
            split,
            frames: self.frames,
        }
    }
}

/// Parse a sequence file. A completely empty file is a valid empty sequence
/// (the CLI warns about it); anything else must carry the versioned header.
pub fn load_sequence(path: &Path) -> Result<LoadedSequence, FormatError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let path_s = path.display().to_string();
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());

    let Some((_, header)) = lines.next() else {
        return Ok(LoadedSequence {
            seq_id: 0,
            fps: 30.0,
            dim: 0,
            frames: Vec::new(),
        });
    };
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != SEQ_HEADER {
        return Err(FormatError::Parse {
            path: path_s,
            line: 1,
            msg: "expected header `escorte-seq <version> <fps> <dim>`".into(),
        });
    }
    let version: u32 = parts[1].parse().map_err(|_| FormatError::Parse {
        path: path_s.clone(),
        line: 1,
        msg: "unreadable version".into(),
    })?;
    if version != FORMAT_VERSION {
        return Err(FormatError::Version {
            path: path_s,
            found: version,
        });
    }
    let parse_f = |s: &str, line: usize, what: &str| -> Result<f64, FormatError> {
        s.parse().map_err(|_| FormatError::Parse {
            path: path.display().to_string(),
            line,
            msg: format!("cannot parse {what} `{s}`"),
        })
    };
    let parse_u = |s: &str, line: usize, what: &str| -> Result<usize, FormatError> {
        s.parse().map_err(|_| FormatError::Parse {
            path: path.display().to_string(),
            line,
            msg: format!("cannot parse {what} `{s}`"),
        })
    };
    let fps = parse_f(parts[2], 1, "fps")?;
    let dim = parse_u(parts[3], 1, "dim")?;

    let mut seq_id = 0usize;
    let mut frames = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let mut groups = line.split(" | ");
        let head = groups.next().unwrap_or("");
        let h: Vec<&str> = head.split_whitespace().collect();
        if h.len() != 6 {
            return Err(FormatError::Parse {
                path: path_s.clone(),
                line: lineno,
                msg: format!("expected 6 record fields, got {}", h.len()),
            });
        }
        seq_id = parse_u(h[0], lineno, "seq_id")?;
        let frame = parse_u(h[1], lineno, "frame")?;
        let t = parse_f(h[2], lineno, "t")?;
        let action = ActionState::from_name(h[3]).ok_or_else(|| FormatError::Parse {
            path: path_s.clone(),
            line: lineno,
            msg: format!("unknown action `{}`", h[3]),
        })?;
        let gap_m = parse_f(h[4], lineno, "gap_m")?;
        let ndets = parse_u(h[5], lineno, "detection count")?;

        let mut detections = Vec::with_capacity(ndets);
        for group in groups {
            let fields: Vec<&str> = group.split_whitespace().collect();
            if fields.len() != 4 + dim + 1 {
                return Err(FormatError::Parse {
                    path: path_s.clone(),
                    line: lineno,
                    msg: format!(
                        "detection needs {} fields (x y w h feat[{dim}] subject), got {}",
                        4 + dim + 1,
                        fields.len()
                    ),
                });
            }
            let mut bbox = [0.0; 4];
            for (b, s) in bbox.iter_mut().zip(&fields[..4]) {
                *b = parse_f(s, lineno, "bbox")?;
            }
            let mut feature = Vec::with_capacity(dim);
            for s in &fields[4..4 + dim] {
                feature.push(parse_f(s, lineno, "feature")?);
            }
            let is_subject = match fields[4 + dim] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(FormatError::Parse {
                        path: path_s.clone(),
                        line: lineno,
                        msg: format!("subject flag must be 0 or 1, got `{other}`"),
                    })
                }
            };
            detections.push(Detection {
                bbox,
                feature,
                is_subject,
            });
        }
        if detections.len() != ndets {
            return Err(FormatError::Parse {
                path: path_s.clone(),
                line: lineno,
                msg: format!("record declares {ndets} detections, found {}", detections.len()),
            });
        }
        frames.push(FrameRecord {
            frame,
            t,
            action,
            gap_m,
            detections,
        });
    }
    Ok(LoadedSequence {
        seq_id,
        fps,
        dim,
        frames,
    })
}

fn seq_file_name(seq_id: usize) -> String {
    format!("seq_{seq_id:04}.esq")
}

/// Write a corpus directory: one `.esq` file per sequence plus a manifest
/// (`escorte-corpus <version>` header, then `<file> <split>` lines).
pub fn save_corpus(corpus: &Corpus, dir: &Path) -> Result<(), FormatError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut manifest = format!("{MANIFEST_HEADER} {FORMAT_VERSION}\n");
    for seq in &corpus.sequences {
        let name = seq_file_name(seq.seq_id);
        save_sequence(seq, &dir.join(&name))?;
        manifest.push_str(&format!("{name} {}\n", seq.split.name()));
    }
    fs::write(dir.join(MANIFEST_NAME), manifest).map_err(io_err(dir))?;
    Ok(())
}

/// Read a corpus directory written by [`save_corpus`].
pub fn load_corpus(dir: &Path) -> Result<Corpus, FormatError> {
    let manifest_path = dir.join(MANIFEST_NAME);
    let text = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
    let path_s = manifest_path.display().to_string();
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let Some((_, header)) = lines.next() else {
        return Err(FormatError::Parse {
            path: path_s,
            line: 1,
            msg: "empty manifest".into(),
        });
    };
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 2 || parts[0] != MANIFEST_HEADER {
        return Err(FormatError::Parse {
            path: path_s,
            line: 1,
            msg: "expected header `escorte-corpus <version>`".into(),
        });
    }
    let version: u32 = parts[1].parse().unwrap_or(0);
    if version != FORMAT_VERSION {
        return Err(FormatError::Version {
            path: path_s,
            found: version,
        });
    }
    let mut sequences = Vec::new();
    for (idx, line) in lines {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(FormatError::Parse {
                path: path_s.clone(),
                line: idx + 1,
                msg: "expected `<file> <split>`".into(),
            });
        }
        let split = Split::from_name(fields[1]).ok_or_else(|| FormatError::Parse {
            path: path_s.clone(),
            line: idx + 1,
            msg: format!("unknown split `{}`", fields[1]),
        })?;
        let loaded = load_sequence(&dir.join(fields[0]))?;
        sequences.push(loaded.into_sequence(split));
    }
    Ok(Corpus { sequences })
}
