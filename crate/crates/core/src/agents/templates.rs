//! Prompt templates with `{slot}` placeholders.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

/// Marker line every agent prompt starts with.
pub const TASK_PREFIX: &str = "TASK:";

pub const DEFAULT_TEMPLATES_TOML: &str = include_str!("../../config/templates.toml");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("template {template}: unknown slot {{{slot}}}")]
    UnknownSlot { template: String, slot: String },
    #[error("template {template}: slot {{{slot}}} was not filled")]
    UnfilledSlot { template: String, slot: String },
    #[error("template {template}: unbalanced brace at byte {offset}")]
    Syntax { template: String, offset: usize },
    #[error("cannot read templates from {path}: {message}")]
    Load { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Lit(String),
    Slot(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    name: String,
    pieces: Vec<Piece>,
}

impl PromptTemplate {
    /// Parses `body`, rejecting any slot outside `allowed`.
    pub fn parse(name: &str, body: &str, allowed: &[&str]) -> Result<Self, TemplateError> {
        let syntax = |offset| TemplateError::Syntax { template: name.to_string(), offset };
        let mut pieces = Vec::new();
        let mut lit = String::new();
        let mut rest = body.char_indices().peekable();
        while let Some((i, c)) = rest.next() {
            match c {
                '{' if rest.peek().map(|p| p.1) == Some('{') => {
                    rest.next();
                    lit.push('{');
                }
                '}' if rest.peek().map(|p| p.1) == Some('}') => {
                    rest.next();
                    lit.push('}');
                }
                '{' => {
                    let mut slot = String::new();
                    loop {
                        match rest.next() {
                            Some((_, '}')) => break,
                            Some((_, ch)) if ch.is_ascii_alphanumeric() || ch == '_' => slot.push(ch),
                            _ => return Err(syntax(i)),
                        }
                    }
                    if !allowed.contains(&slot.as_str()) {
                        return Err(TemplateError::UnknownSlot { template: name.to_string(), slot });
                    }
                    if !lit.is_empty() {
                        pieces.push(Piece::Lit(std::mem::take(&mut lit)));
                    }
                    pieces.push(Piece::Slot(slot));
                }
                '}' => return Err(syntax(i)),
                _ => lit.push(c),
            }
        }
        if !lit.is_empty() {
            pieces.push(Piece::Lit(lit));
        }
        Ok(Self { name: name.to_string(), pieces })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn slots(&self) -> impl Iterator<Item = &str> {
        self.pieces.iter().filter_map(|p| match p {
            Piece::Slot(s) => Some(s.as_str()),
            Piece::Lit(_) => None,
        })
    }

    /// Renders the `TASK:` line followed by the filled body. Every slot the
    /// template uses must have a value.
    pub fn render(&self, values: &[(&str, &str)]) -> Result<String, TemplateError> {
        let mut out = format!("{TASK_PREFIX} {}\n", self.name);
        for p in &self.pieces {
            match p {
                Piece::Lit(s) => out.push_str(s),
                Piece::Slot(s) => {
                    let v = values.iter().find(|(k, _)| k == s).ok_or_else(|| TemplateError::UnfilledSlot {
                        template: self.name.clone(),
                        slot: s.clone(),
                    })?;
                    out.push_str(v.1);
                }
            }
        }
        Ok(out)
    }
}

pub const THEME_SLOTS: [&str; 3] = ["prompt", "layout", "references"];
pub const SUB_AGENT_SLOTS: [&str; 3] = ["bbox", "component", "hint"];

/// The theme, text and icon templates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Templates {
    pub theme: PromptTemplate,
    pub text: PromptTemplate,
    pub icon: PromptTemplate,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplateFile {
    theme: Option<String>,
    text: Option<String>,
    icon: Option<String>,
}

impl Default for Templates {
    fn default() -> Self {
        Self::from_toml(DEFAULT_TEMPLATES_TOML).expect("bundled templates are valid")
    }
}

impl Templates {
    /// Parses a template file. Templates missing from the file keep their
    /// bundled defaults.
    pub fn from_toml(text: &str) -> Result<Self, TemplateError> {
        let file: TemplateFile =
            toml::from_str(text).map_err(|e| TemplateError::Load { path: "<inline>".into(), message: e.to_string() })?;
        let defaults: BTreeMap<&str, String> = if text == DEFAULT_TEMPLATES_TOML {
            BTreeMap::new()
        } else {
            let d: TemplateFile = toml::from_str(DEFAULT_TEMPLATES_TOML).expect("bundled templates parse");
            [("theme", d.theme), ("text", d.text), ("icon", d.icon)]
                .into_iter()
                .filter_map(|(k, v)| v.map(|v| (k, v)))
                .collect()
        };
        let pick = |name: &str, v: Option<String>| -> Result<String, TemplateError> {
            v.or_else(|| defaults.get(name).cloned()).ok_or_else(|| TemplateError::Load {
                path: "<inline>".into(),
                message: format!("missing template {name:?}"),
            })
        };
        Ok(Self {
            theme: PromptTemplate::parse("theme", pick("theme", file.theme)?.trim(), &THEME_SLOTS)?,
            text: PromptTemplate::parse("text", pick("text", file.text)?.trim(), &SUB_AGENT_SLOTS)?,
            icon: PromptTemplate::parse("icon", pick("icon", file.icon)?.trim(), &SUB_AGENT_SLOTS)?,
        })
    }

    pub fn load(path: &Path) -> Result<Self, TemplateError> {
        let text = fs::read_to_string(path)
            .map_err(|e| TemplateError::Load { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_toml(&text).map_err(|e| match e {
            TemplateError::Load { message, .. } => TemplateError::Load { path: path.display().to_string(), message },
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_load_and_render() {
        let t = Templates::default();
        let out = t.text.render(&[("bbox", "[0,0,10,10]"), ("component", "c (Text)"), ("hint", "")]).unwrap();
        assert!(out.starts_with("TASK: text\n"));
        assert!(out.contains("designated position at [0,0,10,10]"));
        assert!(t.icon.render(&[("bbox", "b"), ("component", "c"), ("hint", "h")]).unwrap().contains("\"msg\""));
    }

    #[test]
    fn unfilled_slot_is_an_error() {
        let t = Templates::default();
        let err = t.text.render(&[("bbox", "b")]).unwrap_err();
        assert!(matches!(err, TemplateError::UnfilledSlot { ref slot, .. } if slot == "component"));
    }

    #[test]
    fn unknown_slot_rejected_at_load() {
        let err = Templates::from_toml("text = \"hello {nope}\"").unwrap_err();
        assert!(matches!(err, TemplateError::UnknownSlot { ref slot, .. } if slot == "nope"));
    }

    #[test]
    fn escaped_braces_and_partial_override() {
        let t = Templates::from_toml("icon = \"{{literal}} at {bbox}\"").unwrap();
        assert_eq!(t.icon.render(&[("bbox", "X")]).unwrap(), "TASK: icon\n{literal} at X");
        assert_eq!(t.text, Templates::default().text);
    }

    #[test]
    fn stray_brace_is_syntax_error() {
        assert!(matches!(
            PromptTemplate::parse("t", "a } b", &[]),
            Err(TemplateError::Syntax { offset: 2, .. })
        ));
        assert!(PromptTemplate::parse("t", "a {b", &["b"]).is_err());
    }
}
