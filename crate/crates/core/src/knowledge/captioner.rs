use serde::{Deserialize, Serialize};

pub const CAPTIONER_QUESTIONS_TOML: &str = include_str!("../../config/captioner.toml");

/// Questions an external captioner asks of each screenshot. Answers are
/// delivered to ingestion through a caption file keyed by record id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionerQuestions {
    pub theme_color: String,
    pub primary_color: String,
    pub theme_description: String,
    pub app_category: String,
}

impl Default for CaptionerQuestions {
    fn default() -> Self {
        toml::from_str(CAPTIONER_QUESTIONS_TOML).expect("bundled captioner questions parse")
    }
}
