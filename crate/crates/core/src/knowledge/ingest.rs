//! Source ingestion. UI source records look like
//!
//! ```json
//! {"id": "rico-123", "canvas_w": 1440, "canvas_h": 2560,
//!  "components": [{"type": "Text", "bounds": [x1, y1, x2, y2]}],
//!  "content_descriptions": ["..."], "high_level": "..."}
//! ```
//!
//! with pixel `bounds` corners. Icon sources are `{name, svg, description}`
//! objects. Either may be given as a `.json` file (one object or an array),
//! a `.jsonl` file, or a directory of such files read in name order.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::Value;

use super::{validate_svg, CompositionEntry, IconRecord, IconStore, KbError, KnowledgeRecord, SemanticKnowledge, ThemeAttrs, UiStore};
use crate::model::{BBox, NORM};

const DEFAULT_CANVAS: (u32, u32) = (1440, 2560);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedRecord {
    pub origin: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub accepted: usize,
    pub captioned: usize,
    pub skipped: Vec<SkippedRecord>,
}

impl std::fmt::Display for IngestReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "accepted={} captioned={} skipped={}", self.accepted, self.captioned, self.skipped.len())?;
        for s in &self.skipped {
            writeln!(f, "  skipped {}: {}", s.origin, s.reason)?;
        }
        Ok(())
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> KbError + '_ {
    move |source| KbError::Io { path: path.to_path_buf(), source }
}

/// Reads every JSON value under `source`. Unparseable entries come back as
/// `Err(reason)` so callers can report them without aborting.
/// One source line: its `file:line` origin and the parsed value or parse error.
pub type SourceLine = (String, Result<Value, String>);

fn read_values(source: &Path) -> Result<Vec<SourceLine>, KbError> {
    let meta = fs::metadata(source).map_err(io_err(source))?;
    let files: Vec<PathBuf> = if meta.is_dir() {
        let mut v: Vec<PathBuf> = fs::read_dir(source)
            .map_err(io_err(source))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("json" | "jsonl")))
            .collect();
        v.sort();
        v
    } else {
        vec![source.to_path_buf()]
    };

    let mut out = Vec::new();
    for file in files {
        let text = fs::read_to_string(&file).map_err(io_err(&file))?;
        let name = file.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        if file.extension().and_then(|e| e.to_str()) == Some("jsonl") {
            for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                out.push((format!("{name}:{}", i + 1), serde_json::from_str(line).map_err(|e| e.to_string())));
            }
        } else {
            match serde_json::from_str::<Value>(&text) {
                Ok(Value::Array(items)) => {
                    out.extend(items.into_iter().enumerate().map(|(i, v)| (format!("{name}[{i}]"), Ok(v))))
                }
                Ok(v) => out.push((name, Ok(v))),
                Err(e) => out.push((name, Err(e.to_string()))),
            }
        }
    }
    Ok(out)
}

#[derive(Deserialize)]
struct SourceComponent {
    #[serde(rename = "type", alias = "class")]
    ctype: String,
    bounds: Option<[i64; 4]>,
}

#[derive(Deserialize)]
struct SourceRecord {
    id: String,
    #[serde(default)]
    canvas_w: Option<u32>,
    #[serde(default)]
    canvas_h: Option<u32>,
    components: Vec<SourceComponent>,
    #[serde(default)]
    content_descriptions: Vec<String>,
    #[serde(default)]
    high_level: String,
}

/// Normalizes pixel corners to the 0-1000 space, clamping to the canvas.
/// Returns `None` for boxes with no area on the canvas.
fn normalize_bounds(b: [i64; 4], cw: u32, ch: u32) -> Option<BBox> {
    let axis = |lo: i64, hi: i64, dim: u32| -> Option<(u32, u32)> {
        let dim = i64::from(dim);
        let (lo, hi) = (lo.clamp(0, dim), hi.clamp(0, dim));
        if hi <= lo {
            return None;
        }
        let n = i64::from(NORM);
        let round = |v: i64| (2 * n * v + dim) / (2 * dim);
        let start = round(lo).min(n - 1);
        let end = round(hi).clamp(start + 1, n);
        Some((start as u32, (end - start) as u32))
    };
    let (x, w) = axis(b[0], b[2], cw)?;
    let (y, h) = axis(b[1], b[3], ch)?;
    Some(BBox { x, y, w, h })
}

fn to_record(v: Value) -> Result<KnowledgeRecord, String> {
    let src: SourceRecord = serde_json::from_value(v).map_err(|e| e.to_string())?;
    if src.id.trim().is_empty() {
        return Err("empty id".into());
    }
    let (cw, ch) = (src.canvas_w.unwrap_or(DEFAULT_CANVAS.0), src.canvas_h.unwrap_or(DEFAULT_CANVAS.1));
    if cw == 0 || ch == 0 {
        return Err("canvas dimensions must be positive".into());
    }
    let mut composition = Vec::new();
    for (i, c) in src.components.into_iter().enumerate() {
        let bounds = c.bounds.ok_or_else(|| format!("component {i} ({}) has no bounds", c.ctype))?;
        if let Some(bbox) = normalize_bounds(bounds, cw, ch) {
            composition.push(CompositionEntry { ctype: c.ctype, bbox });
        }
    }
    if composition.is_empty() {
        return Err("no components with on-canvas bounds".into());
    }
    Ok(KnowledgeRecord {
        id: src.id,
        composition,
        semantic: SemanticKnowledge {
            content_descriptions: src.content_descriptions,
            high_level: src.high_level,
            theme_attrs: ThemeAttrs::default(),
        },
        embedding: None,
    })
}

/// Builds a UI store from already-read source values. Malformed records are
/// skipped and reported; an empty result is an error. Records are ordered by
/// id so repeated ingests produce identical stores.
pub fn ingest_ui_values(
    values: Vec<SourceLine>,
    captions: Option<&BTreeMap<String, ThemeAttrs>>,
) -> Result<(UiStore, IngestReport), KbError> {
    let mut report = IngestReport::default();
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (origin, value) in values {
        match value.and_then(to_record) {
            Ok(mut rec) => {
                if !seen.insert(rec.id.clone()) {
                    report.skipped.push(SkippedRecord { origin, reason: format!("duplicate id {:?}", rec.id) });
                    continue;
                }
                if let Some(attrs) = captions.and_then(|c| c.get(&rec.id)) {
                    rec.semantic.theme_attrs = attrs.clone();
                    report.captioned += 1;
                }
                records.push(rec);
            }
            Err(reason) => report.skipped.push(SkippedRecord { origin, reason }),
        }
    }
    if records.is_empty() {
        return Err(KbError::Empty);
    }
    records.sort_by(|a, b| a.id.cmp(&b.id));
    report.accepted = records.len();
    Ok((UiStore::new(records)?, report))
}

pub fn ingest_ui_records(source: &Path, captions: Option<&Path>) -> Result<(UiStore, IngestReport), KbError> {
    let captions = captions
        .map(|p| -> Result<BTreeMap<String, ThemeAttrs>, KbError> {
            let text = fs::read_to_string(p).map_err(io_err(p))?;
            serde_json::from_str(&text).map_err(|e| KbError::Corrupt { path: p.to_path_buf(), line: e.line(), message: e.to_string() })
        })
        .transpose()?;
    ingest_ui_values(read_values(source)?, captions.as_ref())
}

pub fn ingest_icon_values(values: Vec<SourceLine>) -> Result<(IconStore, IngestReport), KbError> {
    #[derive(Deserialize)]
    struct SourceIcon {
        name: String,
        svg: String,
        description: String,
    }
    let mut report = IngestReport::default();
    let mut seen = HashSet::new();
    let mut icons = Vec::new();
    for (origin, value) in values {
        let parsed = value.and_then(|v| serde_json::from_value::<SourceIcon>(v).map_err(|e| e.to_string())).and_then(|s| {
            validate_svg(&s.svg).map_err(|e| format!("icon {:?}: malformed svg: {e}", s.name))?;
            if s.name.trim().is_empty() {
                return Err("empty icon name".to_string());
            }
            Ok(s)
        });
        match parsed {
            Ok(s) if !seen.insert(s.name.clone()) => {
                report.skipped.push(SkippedRecord { origin, reason: format!("duplicate icon {:?}", s.name) })
            }
            Ok(s) => icons.push(IconRecord { name: s.name, svg: s.svg, description: s.description, embedding: None }),
            Err(reason) => report.skipped.push(SkippedRecord { origin, reason }),
        }
    }
    if icons.is_empty() {
        return Err(KbError::Empty);
    }
    icons.sort_by(|a, b| a.name.cmp(&b.name));
    report.accepted = icons.len();
    Ok((IconStore::new(icons)?, report))
}

pub fn ingest_icons(source: &Path) -> Result<(IconStore, IngestReport), KbError> {
    ingest_icon_values(read_values(source)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn rec(id: &str) -> Value {
        json!({"id": id, "canvas_w": 1000, "canvas_h": 1000,
               "components": [{"type": "Text", "bounds": [0, 0, 500, 100]}],
               "content_descriptions": ["hello"], "high_level": "a screen"})
    }

    fn vals(v: Vec<Value>) -> Vec<SourceLine> {
        v.into_iter().enumerate().map(|(i, v)| (format!("#{i}"), Ok(v))).collect()
    }

    #[test]
    fn missing_bounds_are_skipped() {
        let mut bad = rec("d");
        bad["components"][0].as_object_mut().unwrap().remove("bounds");
        let (store, report) = ingest_ui_values(vals(vec![rec("a"), rec("b"), bad, rec("c")]), None).unwrap();
        assert_eq!(store.len(), 3);
        assert_eq!((report.accepted, report.skipped.len()), (3, 1));
        assert!(report.skipped[0].reason.contains("no bounds"));
    }

    #[test]
    fn empty_source_is_fatal() {
        assert!(matches!(ingest_ui_values(vec![], None), Err(KbError::Empty)));
    }

    #[test]
    fn captions_fill_theme_attrs() {
        let mut caps = BTreeMap::new();
        caps.insert(
            "a".to_string(),
            ThemeAttrs {
                theme_color: "white".into(),
                primary_color: "blue".into(),
                theme_description: "a shopping list".into(),
                app_category: "shopping".into(),
            },
        );
        let (store, report) = ingest_ui_values(vals(vec![rec("a"), rec("b")]), Some(&caps)).unwrap();
        assert_eq!(report.captioned, 1);
        assert_eq!(store.get("a").unwrap().semantic.theme_attrs.primary_color, "blue");
        assert_eq!(store.get("b").unwrap().semantic.theme_attrs, ThemeAttrs::default());
    }

    #[test]
    fn ingest_is_idempotent() {
        let input = vec![rec("z"), rec("a"), rec("m")];
        let (s1, _) = ingest_ui_values(vals(input.clone()), None).unwrap();
        let (s2, _) = ingest_ui_values(vals(input), None).unwrap();
        assert_eq!(s1.to_jsonl(), s2.to_jsonl());
        assert_eq!(s1.records().iter().map(|r| r.id.as_str()).collect::<Vec<_>>(), ["a", "m", "z"]);
    }

    #[test]
    fn bounds_normalize_and_clamp() {
        assert_eq!(normalize_bounds([720, 640, 1080, 768], 1440, 2560), Some(BBox { x: 500, y: 250, w: 250, h: 50 }));
        assert_eq!(normalize_bounds([-10, 0, 2000, 2560], 1440, 2560), Some(BBox { x: 0, y: 0, w: 1000, h: 1000 }));
        assert_eq!(normalize_bounds([1500, 0, 1600, 10], 1440, 2560), None);
    }

    #[test]
    fn malformed_svg_is_skipped() {
        let (store, report) = ingest_icon_values(vals(vec![
            json!({"name": "home", "svg": "<svg xmlns=\"http://www.w3.org/2000/svg\"><path d=\"M0 0\"/></svg>", "description": "home"}),
            json!({"name": "bad", "svg": "<svg><path></svg>", "description": "broken"}),
        ]))
        .unwrap();
        assert_eq!(store.len(), 1);
        assert_eq!(report.skipped.len(), 1);
    }

    #[test]
    fn directory_sources_read_in_name_order() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("b.json"), rec("b").to_string()).unwrap();
        fs::write(dir.path().join("a.jsonl"), format!("{}\n{}\n", rec("a1"), "{not json")).unwrap();
        fs::write(dir.path().join("ignored.txt"), "x").unwrap();
        let (store, report) = ingest_ui_records(dir.path(), None).unwrap();
        assert_eq!(store.len(), 2);
        assert_eq!(report.skipped[0].origin, "a.jsonl:2");
        assert!(matches!(ingest_ui_records(&dir.path().join("missing"), None), Err(KbError::Io { .. })));
    }
}
