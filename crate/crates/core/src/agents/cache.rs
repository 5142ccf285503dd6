//! Cache pool shared by the sub-agents.
//!
//! The theme summary stays pinned at the head of the pool; component
//! entries follow, most recent first. When the rendered pool exceeds its
//! character budget the oldest entries are elided. The theme is never
//! elided.

use serde::{Deserialize, Serialize};

use crate::model::ComponentResult;

pub const DEFAULT_CACHE_CHAR_BUDGET: usize = 6000;
pub const ENTRY_SUMMARY_MAX_CHARS: usize = 120;

pub const CACHE_BEGIN: &str = "=== CACHE BEGIN ===";
pub const CACHE_END: &str = "=== CACHE END ===";
pub const CACHE_EMPTY: &str = "(empty)";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CachePool {
    theme_summary: Option<String>,
    entries: Vec<String>,
    char_budget: usize,
}

impl CachePool {
    pub fn new(char_budget: usize) -> Self {
        Self { theme_summary: None, entries: Vec::new(), char_budget }
    }

    pub fn with_theme(summary: impl Into<String>, char_budget: usize) -> Self {
        Self { theme_summary: Some(summary.into()), entries: Vec::new(), char_budget }
    }

    pub fn theme_summary(&self) -> Option<&str> {
        self.theme_summary.as_deref()
    }

    /// Component entries, most recent first.
    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    pub fn char_budget(&self) -> usize {
        self.char_budget
    }

    fn parts(&self) -> impl Iterator<Item = &str> {
        self.theme_summary.as_deref().into_iter().chain(self.entries.iter().map(String::as_str))
    }

    /// Length in chars of [`CachePool::render`].
    pub fn rendered_len(&self) -> usize {
        let n = self.parts().count();
        self.parts().map(|p| p.chars().count()).sum::<usize>() + n.saturating_sub(1)
    }

    pub fn render(&self) -> String {
        self.parts().collect::<Vec<_>>().join("\n")
    }

    /// New pool with `entry` at the front, elided to fit the budget.
    pub fn prepend(&self, entry: String) -> CachePool {
        let mut next = self.clone();
        next.entries.insert(0, entry);
        while next.rendered_len() > next.char_budget && !next.entries.is_empty() {
            next.entries.pop();
        }
        next
    }
}

/// `[<idx>] <type> @ (x,y,w,h): <summary>` with the summary cut to
/// [`ENTRY_SUMMARY_MAX_CHARS`].
pub fn render_cache_entry(res: &ComponentResult, idx: usize) -> String {
    let b = res.bbox;
    let summary: String = res.payload.summary().chars().take(ENTRY_SUMMARY_MAX_CHARS).collect();
    format!("[{idx}] {} @ ({},{},{},{}): {summary}", res.ctype, b.x, b.y, b.w, b.h)
}

pub fn cache_append(cache: &CachePool, res: &ComponentResult, idx: usize) -> CachePool {
    cache.prepend(render_cache_entry(res, idx))
}

/// Sub-prompt followed by the delimited cache block.
pub fn compose_sub_prompt(p_sub: &str, cache: &CachePool) -> String {
    let body = cache.render();
    let body = if body.is_empty() { CACHE_EMPTY.to_string() } else { body };
    format!("{p_sub}\n\n{CACHE_BEGIN}\n{body}\n{CACHE_END}")
}
