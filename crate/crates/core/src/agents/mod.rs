//! Theme agent, cache pool, dispatch and the sub-agent pass.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{render_layout_condition, BackendError, Backends, ImageRequest};
use crate::hash::derive_seed;
use crate::knowledge::{retrieve, IconStore, KbError, RetrievalConfig, RetrievedReference, StoreKind, UiStore};
use crate::model::{
    ComponentProvenance, ComponentResult, GenerationRequest, Provenance, Prototype, Raster, ThemeProvenance,
    WireframeComponent,
};

mod cache;
mod dispatch;
mod sub;
pub mod templates;
mod theme;

pub use cache::{
    cache_append, compose_sub_prompt, render_cache_entry, CachePool, CACHE_BEGIN, CACHE_EMPTY, CACHE_END,
    DEFAULT_CACHE_CHAR_BUDGET, ENTRY_SUMMARY_MAX_CHARS,
};
pub use dispatch::{DispatchError, DispatchTable, Handler};
pub use sub::{
    build_image_request, dominant_color, icon_phrase, image_prompt_for, normalize_text_reply, run_color_fallback,
    run_icon_agent, run_image_agent, run_text_agent, sub_prompt, AgentOutput, SubAgentContext,
    COLOR_FALLBACK_BACKEND, ICON_PHRASE_MAX_CHARS, TEXT_MAX_CHARS,
};
pub use templates::{PromptTemplate, TemplateError, Templates};
pub use theme::{
    compose_theme_prompt, parse_theme_description, ComponentHint, ComposeError, PromptBudgetError,
    ThemeDescription, ThemeParseError, FORMAT_REMINDER, THEME_FIELDS,
};

/// Seed key for the theme chat and theme image calls.
pub const THEME_SEED_KEY: &str = "__theme__";

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Knowledge(#[from] KbError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    PromptBudget(#[from] PromptBudgetError),
    #[error(transparent)]
    Dispatch(#[from] DispatchError),
    #[error("theme reply still unparseable after one repair round: {0}")]
    ThemeUnparseable(ThemeParseError),
    #[error("component {component:?}: chat returned empty content")]
    EmptyContent { component: String },
    #[error("component {component:?}: chat returned no usable icon phrase")]
    EmptyPhrase { component: String },
    #[error("component {component:?}: theme image crop is empty")]
    Crop { component: String },
    #[error("cannot take the dominant color of an empty region")]
    EmptyRegion,
    #[error("image backend returned {}x{}, expected {}x{}", .got.0, .got.1, .expected.0, .expected.1)]
    ImageDims { expected: (u32, u32), got: (u32, u32) },
}

impl From<ComposeError> for AgentError {
    fn from(e: ComposeError) -> Self {
        match e {
            ComposeError::Template(t) => AgentError::Template(t),
            ComposeError::Budget(b) => AgentError::PromptBudget(b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub retrieval_k: usize,
    pub cache_char_budget: usize,
    pub image_width: u32,
    pub image_height: u32,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self { retrieval_k: 2, cache_char_budget: DEFAULT_CACHE_CHAR_BUDGET, image_width: 512, image_height: 512 }
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Dispatch(#[from] DispatchError),
    #[error("{0:?} store is empty")]
    EmptyStore(StoreKind),
    #[error("{0:?} store is not fully embedded; run the embedding step first")]
    NotEmbedded(StoreKind),
    #[error("{kind:?} store has dimension {store}, embedder produces {backend}")]
    DimensionMismatch { kind: StoreKind, store: usize, backend: usize },
    #[error("invalid engine configuration: {0}")]
    Config(String),
}

/// Theme-agent output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThemeOutcome {
    pub theme: ThemeDescription,
    pub theme_image: Raster,
    pub provenance: ThemeProvenance,
}

/// Results of a pass that stopped at `failed_component`.
#[derive(Debug)]
pub struct PartialPrototype {
    pub theme: ThemeOutcome,
    pub completed: Vec<ComponentResult>,
    pub provenance: Vec<ComponentProvenance>,
    pub failed_component: String,
    pub source: AgentError,
}

#[derive(Debug, Error)]
pub enum OrchestrationError {
    #[error("theme generation failed: {0}")]
    Theme(#[source] AgentError),
    #[error("component {:?} failed after {} completed: {}", .0.failed_component, .0.completed.len(), .0.source)]
    Partial(Box<PartialPrototype>),
}

#[derive(Debug, Error)]
pub enum RegenerateError {
    #[error("unknown component id {0:?}")]
    UnknownComponent(String),
    #[error("prototype does not match the request wireframe")]
    Mismatch,
    #[error(transparent)]
    Agent(#[from] AgentError),
}

/// Backends, knowledge stores and templates wired together.
#[derive(Clone)]
pub struct Engine {
    backends: Backends,
    ui_store: Arc<UiStore>,
    icon_store: Arc<IconStore>,
    templates: Templates,
    dispatch: DispatchTable,
    config: EngineConfig,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("backends", &self.backends)
            .field("ui_records", &self.ui_store.len())
            .field("icons", &self.icon_store.len())
            .field("config", &self.config)
            .finish()
    }
}

fn check_store<R: crate::knowledge::StoreRecord>(
    store: &crate::knowledge::KnowledgeStore<R>,
    backend_dim: usize,
) -> Result<(), EngineError> {
    if store.is_empty() {
        return Err(EngineError::EmptyStore(R::KIND));
    }
    if !store.is_fully_embedded() {
        return Err(EngineError::NotEmbedded(R::KIND));
    }
    match store.dim() {
        Some(d) if d != backend_dim => Err(EngineError::DimensionMismatch { kind: R::KIND, store: d, backend: backend_dim }),
        _ => Ok(()),
    }
}

impl Engine {
    pub fn new(
        backends: Backends,
        ui_store: Arc<UiStore>,
        icon_store: Arc<IconStore>,
        templates: Templates,
        config: EngineConfig,
    ) -> Result<Self, EngineError> {
        Self::with_dispatch(backends, ui_store, icon_store, templates, config, DispatchTable::standard())
    }

    pub fn with_dispatch(
        backends: Backends,
        ui_store: Arc<UiStore>,
        icon_store: Arc<IconStore>,
        templates: Templates,
        config: EngineConfig,
        dispatch: DispatchTable,
    ) -> Result<Self, EngineError> {
        dispatch.validate()?;
        if config.image_width == 0 || config.image_height == 0 {
            return Err(EngineError::Config("image dimensions must be positive".into()));
        }
        if config.retrieval_k == 0 {
            return Err(EngineError::Config("retrieval_k must be at least 1".into()));
        }
        let dim = backends.embedder.capability().dim;
        check_store(&ui_store, dim)?;
        check_store(&icon_store, dim)?;
        Ok(Self { backends, ui_store, icon_store, templates, dispatch, config })
    }

    pub fn backends(&self) -> &Backends {
        &self.backends
    }

    pub fn templates(&self) -> &Templates {
        &self.templates
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn dispatch(&self) -> &DispatchTable {
        &self.dispatch
    }

    pub fn ui_store(&self) -> &UiStore {
        &self.ui_store
    }

    pub fn icon_store(&self) -> &IconStore {
        &self.icon_store
    }

    pub fn retrieve_references(&self, req: &GenerationRequest) -> Result<Vec<RetrievedReference>, AgentError> {
        Ok(retrieve(
            &self.ui_store,
            &req.query_text(),
            self.backends.embedder.as_ref(),
            RetrievalConfig { k: self.config.retrieval_k },
        )?)
    }

    /// Retrieval, theme chat (with one repair round) and the
    /// layout-conditioned theme image.
    pub fn generate_theme(&self, req: &GenerationRequest) -> Result<ThemeOutcome, AgentError> {
        let refs = self.retrieve_references(req)?;
        let chat = self.backends.chat.as_ref();
        let max = chat.capability().max_input_chars;
        let (prompt, used) = compose_theme_prompt(req, &refs, &self.templates.theme, max)?;
        let seed = derive_seed(req.master_seed(), THEME_SEED_KEY, 0);
        let mut repair_prompt = None;
        let mut theme = match parse_theme_description(&chat.complete(&prompt, seed)?) {
            Ok(t) => t,
            Err(first) => {
                tracing::warn!(error = %first, "theme reply unparseable, issuing repair round");
                let repair = format!("{prompt}\n\n{FORMAT_REMINDER}");
                let reply = chat.complete(&repair, seed)?;
                repair_prompt = Some(repair);
                parse_theme_description(&reply).map_err(AgentError::ThemeUnparseable)?
            }
        };
        theme.component_hints.retain(|id, _| req.wireframe.component(id).is_some());

        let (w, h) = (self.config.image_width, self.config.image_height);
        let image_req = ImageRequest {
            prompt: theme.image_prompt(),
            width: w,
            height: h,
            seed,
            layout_condition: Some(render_layout_condition(&req.wireframe, w, h)),
            init_image: None,
        };
        let theme_image = self.backends.image.generate(&image_req)?;
        if (theme_image.width(), theme_image.height()) != (w, h) {
            return Err(AgentError::ImageDims { expected: (w, h), got: (theme_image.width(), theme_image.height()) });
        }
        let provenance = ThemeProvenance {
            prompt,
            repair_prompt,
            image_prompt: image_req.prompt,
            references: refs[..used].iter().map(|r| r.record_id.clone()).collect(),
            chat_backend: chat.capability().name.clone(),
            image_backend: self.backends.image.capability().name.clone(),
            seed,
        };
        Ok(ThemeOutcome { theme, theme_image, provenance })
    }

    /// Runs the handler the dispatch table assigns to `comp`.
    pub fn run_handler(&self, comp: &WireframeComponent, ctx: SubAgentContext<'_>) -> Result<(Handler, AgentOutput), AgentError> {
        let handler = self.dispatch.handler(comp.ctype)?;
        let b = &self.backends;
        let out = match handler {
            Handler::TextAgent => run_text_agent(comp, ctx, &self.templates, b.chat.as_ref()),
            Handler::ImageAgent => run_image_agent(comp, ctx, &self.templates, b.image.as_ref()),
            Handler::IconAgent => {
                run_icon_agent(comp, ctx, &self.templates, b.chat.as_ref(), &self.icon_store, b.embedder.as_ref())
            }
            Handler::ColorFallback => run_color_fallback(comp, ctx, &self.templates),
        }?;
        Ok((handler, out))
    }

    /// Theme summary plus `results` (in wireframe order), most recent first.
    pub fn rebuild_cache<'a>(
        &self,
        theme: &ThemeDescription,
        results: impl IntoIterator<Item = (usize, &'a ComponentResult)>,
    ) -> CachePool {
        results
            .into_iter()
            .fold(CachePool::with_theme(theme.summary(), self.config.cache_char_budget), |c, (i, r)| {
                cache_append(&c, r, i)
            })
    }

    pub fn orchestrate(&self, req: &GenerationRequest) -> Result<Prototype, OrchestrationError> {
        let theme = self.generate_theme(req).map_err(OrchestrationError::Theme)?;
        self.generate_components(req, theme)
    }

    /// Sequential sub-agent pass over every component.
    pub fn generate_components(&self, req: &GenerationRequest, theme: ThemeOutcome) -> Result<Prototype, OrchestrationError> {
        self.continue_pass(req, theme, Vec::new(), Vec::new())
    }

    /// Continues a pass that failed part-way, keeping completed results.
    pub fn resume(&self, req: &GenerationRequest, partial: PartialPrototype) -> Result<Prototype, OrchestrationError> {
        self.continue_pass(req, partial.theme, partial.completed, partial.provenance)
    }

    fn continue_pass(
        &self,
        req: &GenerationRequest,
        theme: ThemeOutcome,
        mut results: Vec<ComponentResult>,
        mut provenance: Vec<ComponentProvenance>,
    ) -> Result<Prototype, OrchestrationError> {
        let master = req.master_seed();
        let mut cache = self.rebuild_cache(&theme.theme, results.iter().enumerate());
        for (t, comp) in req.wireframe.components.iter().enumerate().skip(results.len()) {
            let seed = derive_seed(master, &comp.id, 0);
            let ctx = SubAgentContext {
                theme: &theme.theme,
                theme_raster: &theme.theme_image,
                cache: &cache,
                user_override: None,
                seed,
            };
            match self.run_handler(comp, ctx) {
                Ok((handler, out)) => {
                    cache = cache_append(&cache, &out.result, t);
                    provenance.push(ComponentProvenance {
                        component_id: comp.id.clone(),
                        handler,
                        prompt: out.prompt,
                        request_prompt: out.request_prompt,
                        backend: out.backend,
                        seed,
                        attempt: 0,
                    });
                    results.push(out.result);
                }
                Err(source) => {
                    return Err(OrchestrationError::Partial(Box::new(PartialPrototype {
                        theme,
                        completed: results,
                        provenance,
                        failed_component: comp.id.clone(),
                        source,
                    })))
                }
            }
        }
        Ok(Prototype {
            provenance: Provenance { session: None, master_seed: master, theme: theme.provenance, components: provenance },
            theme: theme.theme,
            theme_image: theme.theme_image,
            results,
        })
    }

    /// Reruns one component's handler against a cache built from every other
    /// current result. All other results are left untouched.
    pub fn regenerate_component(
        &self,
        req: &GenerationRequest,
        proto: &Prototype,
        component_id: &str,
        user_override: Option<&str>,
        attempt: u32,
    ) -> Result<Prototype, RegenerateError> {
        let idx = req
            .wireframe
            .components
            .iter()
            .position(|c| c.id == component_id)
            .ok_or_else(|| RegenerateError::UnknownComponent(component_id.to_string()))?;
        let aligned = proto.results.len() == req.wireframe.components.len()
            && proto.results.iter().zip(&req.wireframe.components).all(|(r, c)| r.component_id == c.id)
            && proto.provenance.components.len() == proto.results.len();
        if !aligned {
            return Err(RegenerateError::Mismatch);
        }
        let comp = &req.wireframe.components[idx];
        let cache = self.rebuild_cache(&proto.theme, proto.results.iter().enumerate().filter(|(i, _)| *i != idx));
        let seed = derive_seed(req.master_seed(), component_id, attempt);
        let ctx = SubAgentContext {
            theme: &proto.theme,
            theme_raster: &proto.theme_image,
            cache: &cache,
            user_override,
            seed,
        };
        let (handler, out) = self.run_handler(comp, ctx)?;
        let mut next = proto.clone();
        next.results[idx] = out.result;
        next.provenance.components[idx] = ComponentProvenance {
            component_id: comp.id.clone(),
            handler,
            prompt: out.prompt,
            request_prompt: out.request_prompt,
            backend: out.backend,
            seed,
            attempt,
        };
        Ok(next)
    }
}

#[cfg(test)]
mod tests;
