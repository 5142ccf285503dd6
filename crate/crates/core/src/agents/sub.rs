//! The three sub-agents and the dominant-color fallback.

use std::collections::HashMap;

use super::cache::{compose_sub_prompt, CachePool};
use super::dispatch::Handler;
use super::templates::{Templates, TASK_PREFIX};
use super::theme::ThemeDescription;
use super::AgentError;
use crate::backends::{ChatBackend, EmbeddingBackend, ImageBackend, ImageRequest};
use crate::knowledge::{lookup_icon, IconStore};
use crate::model::{scale_bbox_to_pixels, ComponentResult, Payload, Raster, WireframeComponent};

pub const TEXT_MAX_CHARS: usize = 80;
pub const ICON_PHRASE_MAX_CHARS: usize = 24;
pub const COLOR_FALLBACK_BACKEND: &str = "theme-image-histogram";

/// Everything a handler reads besides its backends.
#[derive(Debug, Clone, Copy)]
pub struct SubAgentContext<'a> {
    pub theme: &'a ThemeDescription,
    pub theme_raster: &'a Raster,
    pub cache: &'a CachePool,
    pub user_override: Option<&'a str>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentOutput {
    pub result: ComponentResult,
    /// Composed prompt: `p_sub` followed by the cache block.
    pub prompt: String,
    /// What the generative backend received, when that is not `prompt`.
    pub request_prompt: Option<String>,
    pub backend: String,
}

fn component_label(comp: &WireframeComponent) -> String {
    format!("{} ({})", comp.id, comp.ctype)
}

fn hint_for(comp: &WireframeComponent, theme_hint: Option<&str>) -> String {
    comp.user_hint
        .as_deref()
        .into_iter()
        .chain(theme_hint)
        .map(str::trim)
        .filter(|h| !h.is_empty())
        .collect::<Vec<_>>()
        .join("; ")
}

fn with_override(p: String, user_override: Option<&str>) -> String {
    match user_override {
        Some(o) => format!("{p}\nUSER OVERRIDE: {o}"),
        None => p,
    }
}

/// Image prompt for an image component: the theme hint, else the theme
/// narrative, with any user override appended.
pub fn image_prompt_for(comp: &WireframeComponent, theme: &ThemeDescription, user_override: Option<&str>) -> String {
    let base = theme
        .component_hints
        .get(&comp.id)
        .and_then(|h| h.image_prompt.clone())
        .unwrap_or_else(|| theme.narrative.clone());
    match user_override {
        Some(o) => format!("{base}. {o}"),
        None => base,
    }
}

/// The component-specific prompt `p_sub` each handler starts from.
pub fn sub_prompt(
    handler: Handler,
    comp: &WireframeComponent,
    theme: &ThemeDescription,
    templates: &Templates,
    user_override: Option<&str>,
) -> Result<String, AgentError> {
    let hints = theme.component_hints.get(&comp.id);
    let bbox = comp.bbox.to_string();
    let label = component_label(comp);
    let p = match handler {
        Handler::TextAgent | Handler::IconAgent => {
            let (tmpl, theme_hint) = if handler == Handler::TextAgent {
                (&templates.text, hints.and_then(|h| h.text_hint.as_deref()))
            } else {
                (&templates.icon, hints.and_then(|h| h.icon_hint.as_deref()))
            };
            let hint = hint_for(comp, theme_hint);
            tmpl.render(&[("bbox", &bbox), ("component", &label), ("hint", &hint)])?
        }
        Handler::ImageAgent => format!(
            "{TASK_PREFIX} image\nImage content for {label} at {bbox}.\nPROMPT: {}",
            image_prompt_for(comp, theme, None)
        ),
        Handler::ColorFallback => format!("{TASK_PREFIX} color\nDominant theme-image color for {label} at {bbox}."),
    };
    Ok(with_override(p, user_override))
}

/// First non-empty line, trimmed, wrapping quotes removed, cut to
/// [`TEXT_MAX_CHARS`]. Returns the text and whether it was truncated.
pub fn normalize_text_reply(reply: &str) -> Option<(String, bool)> {
    let line = reply.lines().map(str::trim).find(|l| !l.is_empty())?;
    let mut s = line;
    for (open, close) in [('"', '"'), ('\'', '\''), ('“', '”'), ('‘', '’'), ('`', '`')] {
        if s.chars().count() >= 2 && s.starts_with(open) && s.ends_with(close) {
            s = s[open.len_utf8()..s.len() - close.len_utf8()].trim();
            break;
        }
    }
    if s.is_empty() {
        return None;
    }
    let n = s.chars().count();
    Some((s.chars().take(TEXT_MAX_CHARS).collect(), n > TEXT_MAX_CHARS))
}

/// Leading run of letters, digits, spaces, `-` and `_`, skipping any
/// leading punctuation, cut to [`ICON_PHRASE_MAX_CHARS`].
pub fn icon_phrase(reply: &str) -> Option<String> {
    let ok = |c: char| c.is_alphanumeric() || c == ' ' || c == '-' || c == '_';
    let phrase: String = reply
        .trim_start_matches(|c: char| !c.is_alphanumeric())
        .chars()
        .take_while(|c| ok(*c))
        .take(ICON_PHRASE_MAX_CHARS)
        .collect();
    let phrase = phrase.trim();
    (!phrase.is_empty()).then(|| phrase.to_string())
}

fn result(comp: &WireframeComponent, payload: Payload) -> ComponentResult {
    ComponentResult { component_id: comp.id.clone(), ctype: comp.ctype, bbox: comp.bbox, payload }
}

pub fn run_text_agent(
    comp: &WireframeComponent,
    ctx: SubAgentContext<'_>,
    templates: &Templates,
    chat: &dyn ChatBackend,
) -> Result<AgentOutput, AgentError> {
    let p_sub = sub_prompt(Handler::TextAgent, comp, ctx.theme, templates, ctx.user_override)?;
    let prompt = compose_sub_prompt(&p_sub, ctx.cache);
    let reply = chat.complete(&prompt, ctx.seed)?;
    let (text, truncated) =
        normalize_text_reply(&reply).ok_or_else(|| AgentError::EmptyContent { component: comp.id.clone() })?;
    if truncated {
        tracing::warn!(component = %comp.id, "text reply truncated to {TEXT_MAX_CHARS} chars");
    }
    Ok(AgentOutput {
        result: result(comp, Payload::Text { text, truncated }),
        prompt,
        request_prompt: None,
        backend: chat.capability().name.clone(),
    })
}

fn theme_crop(comp: &WireframeComponent, theme_raster: &Raster) -> Result<Raster, AgentError> {
    let rect = scale_bbox_to_pixels(comp.bbox, theme_raster.width(), theme_raster.height());
    theme_raster.crop(rect).ok_or_else(|| AgentError::Crop { component: comp.id.clone() })
}

/// Image-to-image refinement of the theme-image crop; no layout condition.
pub fn build_image_request(comp: &WireframeComponent, ctx: SubAgentContext<'_>) -> Result<ImageRequest, AgentError> {
    let init = theme_crop(comp, ctx.theme_raster)?;
    Ok(ImageRequest {
        prompt: image_prompt_for(comp, ctx.theme, ctx.user_override),
        width: init.width(),
        height: init.height(),
        seed: ctx.seed,
        layout_condition: None,
        init_image: Some(init),
    })
}

pub fn run_image_agent(
    comp: &WireframeComponent,
    ctx: SubAgentContext<'_>,
    templates: &Templates,
    image: &dyn ImageBackend,
) -> Result<AgentOutput, AgentError> {
    let p_sub = sub_prompt(Handler::ImageAgent, comp, ctx.theme, templates, ctx.user_override)?;
    let prompt = compose_sub_prompt(&p_sub, ctx.cache);
    let req = build_image_request(comp, ctx)?;
    let raster = image.generate(&req)?;
    if (raster.width(), raster.height()) != (req.width, req.height) {
        return Err(AgentError::ImageDims {
            expected: (req.width, req.height),
            got: (raster.width(), raster.height()),
        });
    }
    Ok(AgentOutput {
        result: result(comp, Payload::Image { raster, prompt: req.prompt.clone() }),
        prompt,
        request_prompt: Some(req.prompt),
        backend: image.capability().name.clone(),
    })
}

pub fn run_icon_agent(
    comp: &WireframeComponent,
    ctx: SubAgentContext<'_>,
    templates: &Templates,
    chat: &dyn ChatBackend,
    icons: &IconStore,
    embedder: &dyn EmbeddingBackend,
) -> Result<AgentOutput, AgentError> {
    let p_sub = sub_prompt(Handler::IconAgent, comp, ctx.theme, templates, ctx.user_override)?;
    let prompt = compose_sub_prompt(&p_sub, ctx.cache);
    let reply = chat.complete(&prompt, ctx.seed)?;
    let phrase = icon_phrase(&reply).ok_or_else(|| AgentError::EmptyPhrase { component: comp.id.clone() })?;
    let icon = lookup_icon(icons, &phrase, embedder)?;
    Ok(AgentOutput {
        result: result(
            comp,
            Payload::Icon { phrase, icon_name: icon.name.clone(), svg: icon.svg.clone() },
        ),
        prompt,
        request_prompt: None,
        backend: chat.capability().name.clone(),
    })
}

pub fn run_color_fallback(
    comp: &WireframeComponent,
    ctx: SubAgentContext<'_>,
    templates: &Templates,
) -> Result<AgentOutput, AgentError> {
    let p_sub = sub_prompt(Handler::ColorFallback, comp, ctx.theme, templates, ctx.user_override)?;
    let prompt = compose_sub_prompt(&p_sub, ctx.cache);
    let hex = dominant_color(&theme_crop(comp, ctx.theme_raster)?)?;
    Ok(AgentOutput {
        result: result(comp, Payload::Color { hex }),
        prompt,
        request_prompt: None,
        backend: COLOR_FALLBACK_BACKEND.to_string(),
    })
}

/// Exact 24-bit mode of the region's pixels as `#RRGGBB`; ties go to the
/// numerically smallest color.
pub fn dominant_color(region: &Raster) -> Result<String, AgentError> {
    let mut counts: HashMap<u32, u64> = HashMap::new();
    for p in region.image().pixels() {
        let v = (u32::from(p[0]) << 16) | (u32::from(p[1]) << 8) | u32::from(p[2]);
        *counts.entry(v).or_default() += 1;
    }
    let (v, _) = counts
        .into_iter()
        .max_by(|(va, ca), (vb, cb)| ca.cmp(cb).then_with(|| vb.cmp(va)))
        .ok_or(AgentError::EmptyRegion)?;
    Ok(format!("#{v:06X}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{MockChat, MockImage};
    use crate::model::{BBox, ComponentType};
    use image::{Rgb, RgbImage};
    use std::collections::BTreeMap;

    fn theme() -> ThemeDescription {
        ThemeDescription {
            theme_color: "#FFFFFF".into(),
            primary_color: "#1976D2".into(),
            app_category: "Shopping".into(),
            narrative: "Clean and bright.".into(),
            component_hints: BTreeMap::new(),
        }
    }

    fn comp(ctype: ComponentType, bbox: BBox, hint: Option<&str>) -> WireframeComponent {
        WireframeComponent { id: "c1".into(), ctype, bbox, user_hint: hint.map(Into::into) }
    }

    fn raster_from(pixels: &[[u8; 3]], w: u32) -> Raster {
        let h = pixels.len() as u32 / w;
        Raster::from_image(RgbImage::from_fn(w, h, |x, y| Rgb(pixels[(y * w + x) as usize])))
    }

    #[test]
    fn dominant_color_examples() {
        assert_eq!(dominant_color(&Raster::filled(3, 3, [255, 0, 0])).unwrap(), "#FF0000");
        let r = raster_from(&[[255, 0, 0], [0, 0, 255], [255, 0, 0], [255, 0, 0]], 2);
        assert_eq!(dominant_color(&r).unwrap(), "#FF0000");
        let r = raster_from(&[[255, 255, 255], [0, 0, 0], [0, 0, 0], [255, 255, 255]], 2);
        assert_eq!(dominant_color(&r).unwrap(), "#000000");
        let empty = Raster::from_image(RgbImage::new(0, 0));
        assert!(matches!(dominant_color(&empty), Err(AgentError::EmptyRegion)));
    }

    #[test]
    fn text_normalization() {
        assert_eq!(normalize_text_reply("  \"Sign in\"  "), Some(("Sign in".into(), false)));
        assert_eq!(normalize_text_reply("\n\n“Hello”\nsecond"), Some(("Hello".into(), false)));
        let (t, trunc) = normalize_text_reply(&"z".repeat(200)).unwrap();
        assert_eq!((t.chars().count(), trunc), (80, true));
        assert_eq!(normalize_text_reply("   \n  \"\" "), None);
    }

    #[test]
    fn icon_phrase_rules() {
        assert_eq!(icon_phrase("\"msg\""), Some("msg".into()));
        assert_eq!(icon_phrase("shopping-cart. because"), Some("shopping-cart".into()));
        assert_eq!(icon_phrase(&"a".repeat(40)).unwrap().len(), ICON_PHRASE_MAX_CHARS);
        assert_eq!(icon_phrase("  ...  "), None);
    }

    #[test]
    fn text_agent_under_mock() {
        let c = comp(ComponentType::TextButton, BBox { x: 0, y: 0, w: 500, h: 100 }, Some("login"));
        let raster = Raster::filled(8, 8, [0, 0, 0]);
        let t = theme();
        let cache = CachePool::with_theme(t.summary(), 6000);
        let ctx = SubAgentContext { theme: &t, theme_raster: &raster, cache: &cache, user_override: None, seed: 1 };
        let out = run_text_agent(&c, ctx, &Templates::default(), &MockChat::new()).unwrap();
        let Payload::Text { text, truncated } = &out.result.payload else { panic!() };
        assert!(text.starts_with("Label-") && !truncated);
        assert!(out.prompt.contains("HINT: login"));
        assert!(out.prompt.ends_with(&format!("{}\n=== CACHE END ===", t.summary())));
    }

    #[test]
    fn full_canvas_crop_is_whole_theme() {
        let c = comp(ComponentType::BackgroundImage, BBox::full(), None);
        let raster = Raster::from_image(RgbImage::from_fn(16, 12, |x, y| Rgb([x as u8, y as u8, 7])));
        let t = theme();
        let cache = CachePool::new(100);
        let ctx = SubAgentContext { theme: &t, theme_raster: &raster, cache: &cache, user_override: None, seed: 9 };
        let req = build_image_request(&c, ctx).unwrap();
        assert_eq!(req.init_image.as_ref(), Some(&raster));
        assert!(req.layout_condition.is_none());
        assert_eq!(req.prompt, t.narrative);
        let a = run_image_agent(&c, ctx, &Templates::default(), &MockImage::new()).unwrap();
        let b = run_image_agent(&c, ctx, &Templates::default(), &MockImage::new()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.request_prompt.as_deref(), Some("Clean and bright."));
    }

    #[test]
    fn color_fallback_reads_theme_crop() {
        let mut img = RgbImage::from_pixel(10, 10, Rgb([1, 2, 3]));
        for x in 0..5 {
            for y in 0..10 {
                img.put_pixel(x, y, Rgb([200, 100, 50]));
            }
        }
        let raster = Raster::from_image(img);
        let c = comp(ComponentType::Toolbar, BBox { x: 0, y: 0, w: 400, h: 1000 }, None);
        let t = theme();
        let cache = CachePool::new(100);
        let ctx = SubAgentContext { theme: &t, theme_raster: &raster, cache: &cache, user_override: None, seed: 0 };
        let out = run_color_fallback(&c, ctx, &Templates::default()).unwrap();
        assert_eq!(out.result.payload, Payload::Color { hex: "#C86432".into() });
    }
}
