//! Global theme generation: retrieval, prompt composition, reply parsing and
//! the layout-conditioned theme image.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::templates::PromptTemplate;
use crate::knowledge::RetrievedReference;
use crate::model::GenerationRequest;

/// Per-component guidance extracted from the theme reply.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentHint {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text_hint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_prompt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub icon_hint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThemeDescription {
    pub theme_color: String,
    pub primary_color: String,
    pub app_category: String,
    pub narrative: String,
    #[serde(default)]
    pub component_hints: BTreeMap<String, ComponentHint>,
}

impl ThemeDescription {
    /// One-line summary pinned at the head of the cache pool.
    pub fn summary(&self) -> String {
        format!(
            "[theme] category={}; theme_color={}; primary_color={}; narrative: {}",
            self.app_category, self.theme_color, self.primary_color, self.narrative
        )
    }

    /// Prompt for the layout-conditioned theme image.
    pub fn image_prompt(&self) -> String {
        format!(
            "{} app UI screen, {} background, {} accents. {}",
            self.app_category, self.theme_color, self.primary_color, self.narrative
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("theme reply is missing {}", .missing.join(", "))]
pub struct ThemeParseError {
    pub missing: Vec<&'static str>,
}

pub const THEME_FIELDS: [&str; 4] = ["THEME_COLOR", "PRIMARY_COLOR", "CATEGORY", "NARRATIVE"];

pub const FORMAT_REMINDER: &str = "FORMAT REMINDER: your previous reply could not be parsed. Reply with exactly these labeled lines, each on its own line:\n\
THEME_COLOR: ...\nPRIMARY_COLOR: ...\nCATEGORY: ...\nNARRATIVE: ...";

fn merge_hint_body(h: &mut ComponentHint, body: &str) {
    let mut unkeyed = Vec::new();
    for seg in body.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let (key, val) = match seg.split_once('=') {
            Some((k, v)) => (k.trim().to_ascii_lowercase(), v.trim()),
            None => (String::new(), seg),
        };
        let slot = match key.as_str() {
            "text" => &mut h.text_hint,
            "image" => &mut h.image_prompt,
            "icon" => &mut h.icon_hint,
            _ => {
                unkeyed.push(seg);
                continue;
            }
        };
        if !val.is_empty() && slot.is_none() {
            *slot = Some(val.to_string());
        }
    }
    if !unkeyed.is_empty() {
        let joined = unkeyed.join("; ");
        for slot in [&mut h.text_hint, &mut h.image_prompt, &mut h.icon_hint] {
            if slot.is_none() {
                *slot = Some(joined.clone());
            }
        }
    }
}

/// Tolerant extraction of the labeled theme fields. Labels are matched
/// case-insensitively, may use a space instead of `_`, and may carry
/// markdown bullets or emphasis. The first occurrence of a field wins.
pub fn parse_theme_description(reply: &str) -> Result<ThemeDescription, ThemeParseError> {
    let mut fields: [Option<String>; 4] = Default::default();
    let mut hints: BTreeMap<String, ComponentHint> = BTreeMap::new();
    for line in reply.lines() {
        let t = line.trim_start_matches(|c: char| !c.is_alphanumeric());
        let Some((label, value)) = t.split_once(':') else { continue };
        let label = label.trim().trim_end_matches('*').trim();
        let value = value.trim().trim_matches('*').trim();
        if value.is_empty() {
            continue;
        }
        if label.get(..5).is_some_and(|p| p.eq_ignore_ascii_case("hint ")) {
            let id = label[5..].trim();
            if !id.is_empty() {
                merge_hint_body(hints.entry(id.to_string()).or_default(), value);
            }
            continue;
        }
        let norm = label.to_ascii_uppercase().replace(' ', "_");
        let idx = match norm.as_str() {
            "THEME_COLOR" => 0,
            "PRIMARY_COLOR" => 1,
            "CATEGORY" | "APP_CATEGORY" => 2,
            "NARRATIVE" => 3,
            _ => continue,
        };
        if fields[idx].is_none() {
            fields[idx] = Some(value.to_string());
        }
    }
    let missing: Vec<&'static str> =
        THEME_FIELDS.iter().zip(&fields).filter(|(_, v)| v.is_none()).map(|(n, _)| *n).collect();
    if !missing.is_empty() {
        return Err(ThemeParseError { missing });
    }
    let [Some(theme_color), Some(primary_color), Some(app_category), Some(narrative)] = fields else {
        unreachable!("all fields checked above")
    };
    Ok(ThemeDescription { theme_color, primary_color, app_category, narrative, component_hints: hints })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("theme prompt needs {needed} chars even without references; the chat backend accepts {max}")]
pub struct PromptBudgetError {
    pub needed: usize,
    pub max: usize,
}

fn render_references(refs: &[RetrievedReference]) -> String {
    if refs.is_empty() {
        return "(no references)".to_string();
    }
    refs.iter()
        .enumerate()
        .map(|(i, r)| format!("Reference {} ({}, score {:.4}):\n{}", i + 1, r.record_id, r.score, r.rendered))
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Fills the theme template. References are dropped from the lowest rank
/// upward until the prompt fits `max_chars`.
pub fn compose_theme_prompt(
    req: &GenerationRequest,
    refs: &[RetrievedReference],
    template: &PromptTemplate,
    max_chars: usize,
) -> Result<(String, usize), ComposeError> {
    let layout = req.wireframe.render_for_prompt();
    let mut needed = 0;
    for n in (0..=refs.len()).rev() {
        let references = render_references(&refs[..n]);
        let p = template.render(&[
            ("prompt", req.prompt.trim()),
            ("layout", &layout),
            ("references", &references),
        ])?;
        needed = p.chars().count();
        if needed <= max_chars {
            return Ok((p, n));
        }
    }
    Err(PromptBudgetError { needed, max: max_chars }.into())
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ComposeError {
    #[error(transparent)]
    Template(#[from] super::templates::TemplateError),
    #[error(transparent)]
    Budget(#[from] PromptBudgetError),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::Templates;
    use crate::model::{parse_wireframe, GenerationRequest};

    #[test]
    fn parses_labeled_reply_with_noise() {
        let reply = "Sure!\n**THEME_COLOR:** #FFFFFF\n- Primary color: #1976D2\nCategory: Shopping\n\
                     NARRATIVE: Bright and airy.\nHINT hero: image=sunset beach; text=Welcome\nHINT cta: Buy now";
        let t = parse_theme_description(reply).unwrap();
        assert_eq!(t.theme_color, "#FFFFFF");
        assert_eq!(t.primary_color, "#1976D2");
        assert_eq!(t.app_category, "Shopping");
        assert_eq!(t.narrative, "Bright and airy.");
        assert_eq!(t.component_hints["hero"].image_prompt.as_deref(), Some("sunset beach"));
        assert_eq!(t.component_hints["hero"].text_hint.as_deref(), Some("Welcome"));
        assert_eq!(t.component_hints["hero"].icon_hint, None);
        let cta = &t.component_hints["cta"];
        assert_eq!((cta.text_hint.as_deref(), cta.icon_hint.as_deref()), (Some("Buy now"), Some("Buy now")));
    }

    #[test]
    fn missing_narrative_named() {
        let err = parse_theme_description("THEME_COLOR: a\nPRIMARY_COLOR: b\nCATEGORY: c").unwrap_err();
        assert_eq!(err.missing, vec!["NARRATIVE"]);
        assert!(err.to_string().contains("NARRATIVE"));
        let err = parse_theme_description("NARRATIVE:   \n").unwrap_err();
        assert_eq!(err.missing.len(), 4);
    }

    fn request() -> GenerationRequest {
        let wf = parse_wireframe(
            r#"{"canvas_w":100,"canvas_h":100,"components":[{"id":"t","type":"Text","x":0,"y":0,"w":50,"h":10}]}"#,
        )
        .unwrap();
        GenerationRequest::new("a shopping app", wf, None).unwrap()
    }

    fn refs(n: usize) -> Vec<RetrievedReference> {
        (0..n)
            .map(|i| RetrievedReference { record_id: format!("r{i}"), score: 0.5, rendered: "x".repeat(200) })
            .collect()
    }

    #[test]
    fn no_references_marker() {
        let (p, n) = compose_theme_prompt(&request(), &[], &Templates::default().theme, 100_000).unwrap();
        assert_eq!(n, 0);
        assert!(p.contains("(no references)"));
        assert!(p.starts_with("TASK: theme\n"));
        let up = p.find("USER PROMPT").unwrap();
        let lay = p.find("- t: Text").unwrap();
        let rf = p.find("(no references)").unwrap();
        assert!(up < lay && lay < rf);
    }

    #[test]
    fn budget_drops_lowest_ranked_first() {
        let tmpl = Templates::default().theme;
        let (full, _) = compose_theme_prompt(&request(), &refs(2), &tmpl, 100_000).unwrap();
        let max = full.chars().count() - 1;
        let (p, n) = compose_theme_prompt(&request(), &refs(2), &tmpl, max).unwrap();
        assert_eq!(n, 1);
        assert!(p.contains("(r0,") && !p.contains("(r1,"));
        let err = compose_theme_prompt(&request(), &refs(2), &tmpl, 50).unwrap_err();
        assert!(matches!(err, ComposeError::Budget(PromptBudgetError { max: 50, .. })));
    }
}
