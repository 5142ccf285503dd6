use maxproto_core::agents::{AgentError, EngineError, OrchestrationError};
use maxproto_core::knowledge::KbError;
use thiserror::Error;

/// Failure with its process exit code: 1 input, 2 backend, 3 generation.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Backend(String),
    #[error("{0}")]
    Generation(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Backend(_) => 2,
            CliError::Generation(_) => 3,
        }
    }

    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn kb(e: KbError) -> Self {
        match e {
            KbError::Backend(_) | KbError::PartialEmbedding { .. } => CliError::Backend(e.to_string()),
            KbError::Similarity(_) => CliError::Generation(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }

    pub fn agent(e: &AgentError) -> Self {
        let msg = e.to_string();
        match e {
            AgentError::Backend(_) => CliError::Backend(msg),
            AgentError::Knowledge(KbError::Backend(_) | KbError::PartialEmbedding { .. }) => CliError::Backend(msg),
            AgentError::PromptBudget(_) | AgentError::Template(_) => CliError::Input(msg),
            _ => CliError::Generation(msg),
        }
    }

    pub fn orchestration(e: OrchestrationError) -> Self {
        match &e {
            OrchestrationError::Theme(a) => Self::agent(a).prefixed("theme generation failed"),
            OrchestrationError::Partial(p) => {
                let done: Vec<&str> = p.completed.iter().map(|r| r.component_id.as_str()).collect();
                Self::agent(&p.source).prefixed(&format!(
                    "component {:?} failed (completed: [{}])",
                    p.failed_component,
                    done.join(", ")
                ))
            }
        }
    }

    pub fn engine(e: EngineError) -> Self {
        CliError::Input(format!("cannot assemble engine: {e}"))
    }

    fn prefixed(self, prefix: &str) -> Self {
        match self {
            CliError::Input(m) => CliError::Input(format!("{prefix}: {m}")),
            CliError::Backend(m) => CliError::Backend(format!("{prefix}: {m}")),
            CliError::Generation(m) => CliError::Generation(format!("{prefix}: {m}")),
        }
    }
}
