//! Deterministic test doubles for every backend contract.
//!
//! The chat mock keys its reply off the `TASK:` marker line that the agents
//! put at the top of each prompt:
//!
//! * `TASK: theme` - a labeled theme description whose colors and category
//!   are picked from fixed palettes by `fnv1a(prompt || seed)`; Image and
//!   BackgroundImage components listed in the layout get an `image=` hint.
//! * `TASK: text` - `Label-<hash4>`, the top 16 bits of the same hash in
//!   lowercase hex.
//! * `TASK: icon` - the first run of 3+ ASCII letters in the prompt's
//!   `HINT:` line, lowercased and cut to 12 chars; `msg` when none.
//!
//! The embedding mock hashes character trigrams of the lowercased,
//! whitespace-collapsed, space-padded text into 64 signed buckets and
//! L2-normalizes the result.

use std::str::FromStr;

use image::Rgb;

use super::{
    BackendError, ChatBackend, ChatCapability, EmbeddingBackend, EmbeddingCapability, ImageBackend,
    ImageCapability, ImageRequest,
};
use crate::agents::templates::TASK_PREFIX;
use crate::hash::Fnv64;
use crate::model::{ComponentType, Raster};

pub const MOCK_EMBED_DIM: usize = 64;
pub const MOCK_EMBED_SEED: u64 = 0x6d61_7870_726f_746f;

const THEME_COLORS: [&str; 6] = ["#FFFFFF", "#F5F5F5", "#FAF3E0", "#1E1E2E", "#E8F5E9", "#E3F2FD"];
const PRIMARY_COLORS: [&str; 6] = ["#1976D2", "#E91E63", "#4CAF50", "#FF9800", "#673AB7", "#009688"];
const CATEGORIES: [&str; 6] = ["Shopping", "Social", "Productivity", "Travel", "Finance", "Education"];

#[derive(Debug, Clone)]
pub struct MockChat {
    cap: ChatCapability,
}

impl Default for MockChat {
    fn default() -> Self {
        Self::new()
    }
}

impl MockChat {
    pub fn new() -> Self {
        Self { cap: ChatCapability { name: "mock-chat".into(), max_input_chars: 32_000 } }
    }

    pub fn with_max_input_chars(max_input_chars: usize) -> Self {
        Self { cap: ChatCapability { name: "mock-chat".into(), max_input_chars } }
    }
}

fn prompt_hash(prompt: &str, seed: u64) -> u64 {
    Fnv64::new().write(prompt.as_bytes()).write_u64(seed).finish()
}

fn task_of(prompt: &str) -> Option<&str> {
    prompt
        .lines()
        .find_map(|l| l.strip_prefix(TASK_PREFIX))
        .map(str::trim)
}

/// First run of at least three ASCII letters, lowercased, at most 12 chars.
pub fn noun_like_token(text: &str) -> Option<String> {
    text.split(|c: char| !c.is_ascii_alphabetic())
        .find(|t| t.len() >= 3)
        .map(|t| t.to_ascii_lowercase().chars().take(12).collect())
}

fn theme_reply(prompt: &str, h: u64) -> String {
    let pick = |shift: u32, n: usize| ((h >> shift) % n as u64) as usize;
    let theme = THEME_COLORS[pick(0, THEME_COLORS.len())];
    let primary = PRIMARY_COLORS[pick(16, PRIMARY_COLORS.len())];
    let category = CATEGORIES[pick(32, CATEGORIES.len())];
    let mut out = format!(
        "Here is the theme.\nTHEME_COLOR: {theme}\nPRIMARY_COLOR: {primary}\nCATEGORY: {category}\n\
         NARRATIVE: A clean {} screen on a {theme} background with {primary} accents and generous spacing.\n",
        category.to_lowercase()
    );
    for line in prompt.lines() {
        let Some(rest) = line.strip_prefix("- ") else { continue };
        let Some((id, tail)) = rest.split_once(": ") else { continue };
        let Some(ty) = tail.split_whitespace().next() else { continue };
        if let Ok(ComponentType::Image | ComponentType::BackgroundImage) = ComponentType::from_str(ty) {
            out.push_str(&format!(
                "HINT {id}: image={} illustration in {primary} tones\n",
                category.to_lowercase()
            ));
        }
    }
    out
}

impl ChatBackend for MockChat {
    fn capability(&self) -> &ChatCapability {
        &self.cap
    }

    fn complete(&self, prompt: &str, seed: u64) -> Result<String, BackendError> {
        let h = prompt_hash(prompt, seed);
        Ok(match task_of(prompt) {
            Some("theme") => theme_reply(prompt, h),
            Some("text") => format!("Label-{:04x}", h >> 48),
            Some("icon") => prompt
                .lines()
                .find_map(|l| l.strip_prefix("HINT:"))
                .and_then(noun_like_token)
                .unwrap_or_else(|| "msg".to_string()),
            _ => format!("Mock reply {:08x}", h >> 32),
        })
    }
}

#[derive(Debug, Clone)]
pub struct MockEmbedding {
    cap: EmbeddingCapability,
}

impl Default for MockEmbedding {
    fn default() -> Self {
        Self::new()
    }
}

impl MockEmbedding {
    pub fn new() -> Self {
        Self { cap: EmbeddingCapability { name: "mock-embedding".into(), dim: MOCK_EMBED_DIM } }
    }

    pub fn vector(text: &str) -> Vec<f64> {
        let normalized = text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
        let chars: Vec<char> = format!(" {normalized} ").chars().collect();
        let mut acc = [0f64; MOCK_EMBED_DIM];
        for tri in chars.windows(3) {
            let s: String = tri.iter().collect();
            let h = Fnv64::new().write_u64(MOCK_EMBED_SEED).write(s.as_bytes()).finish();
            let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
            acc[(h % MOCK_EMBED_DIM as u64) as usize] += sign;
        }
        let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            let mut v = vec![0.0; MOCK_EMBED_DIM];
            v[0] = 1.0;
            return v;
        }
        acc.iter().map(|v| v / norm).collect()
    }
}

impl EmbeddingBackend for MockEmbedding {
    fn capability(&self) -> &EmbeddingCapability {
        &self.cap
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        Ok(Self::vector(text))
    }
}

/// Flat-color raster from `hash(prompt, seed, init)`; dark pixels of a
/// layout condition are traced in the complementary color.
#[derive(Debug, Clone)]
pub struct MockImage {
    cap: ImageCapability,
}

impl Default for MockImage {
    fn default() -> Self {
        Self::new()
    }
}

impl MockImage {
    pub fn new() -> Self {
        Self {
            cap: ImageCapability {
                name: "mock-image".into(),
                width: 512,
                height: 512,
                supports_layout_condition: true,
                supports_init_image: true,
            },
        }
    }
}

impl ImageBackend for MockImage {
    fn capability(&self) -> &ImageCapability {
        &self.cap
    }

    fn generate(&self, req: &ImageRequest) -> Result<Raster, BackendError> {
        req.validate()?;
        let mut h = Fnv64::new();
        h.write(req.prompt.as_bytes()).write_u64(req.seed);
        for (tag, r) in [(b'c', &req.layout_condition), (b'i', &req.init_image)] {
            if let Some(r) = r {
                if (r.width(), r.height()) != (req.width, req.height) {
                    return Err(BackendError::Unsupported(format!(
                        "auxiliary raster is {}x{}, request is {}x{}",
                        r.width(),
                        r.height(),
                        req.width,
                        req.height
                    )));
                }
                h.write(&[tag]).write(r.image().as_raw());
            }
        }
        let v = h.finish().to_le_bytes();
        let fill = [v[0], v[1], v[2]];
        let contrast = Rgb([255 - fill[0], 255 - fill[1], 255 - fill[2]]);
        let mut img = Raster::filled(req.width, req.height, fill).into_image();
        if let Some(cond) = &req.layout_condition {
            for (x, y, p) in cond.image().enumerate_pixels() {
                let luma = (u32::from(p[0]) * 299 + u32::from(p[1]) * 587 + u32::from(p[2]) * 114) / 1000;
                if luma < 128 {
                    img.put_pixel(x, y, contrast);
                }
            }
        }
        Ok(Raster::from_image(img))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::parse_theme_description;
    use crate::knowledge::cosine_similarity;
    use crate::model::{scale_bbox_to_pixels, BBox};

    #[test]
    fn chat_is_deterministic() {
        let c = MockChat::new();
        let p = "TASK: text\nwhatever";
        assert_eq!(c.complete(p, 3).unwrap(), c.complete(p, 3).unwrap());
        assert_ne!(c.complete(p, 3).unwrap(), c.complete(p, 4).unwrap());
    }

    #[test]
    fn theme_reply_parses() {
        let reply = MockChat::new()
            .complete("TASK: theme\nLAYOUT:\n- hero: Image [0,0,1000,300]\n- t: Text [0,300,1000,50]", 1)
            .unwrap();
        let theme = parse_theme_description(&reply).unwrap();
        assert!(!theme.narrative.is_empty());
        assert!(theme.component_hints["hero"].image_prompt.is_some());
        assert!(!theme.component_hints.contains_key("t"));
    }

    // Independent restatement of the icon rule: scan bytes by hand.
    fn icon_oracle(hint: &str) -> String {
        let mut run = String::new();
        for ch in hint.chars().chain(std::iter::once(' ')) {
            if ch.is_ascii_alphabetic() {
                run.push(ch.to_ascii_lowercase());
            } else {
                if run.len() >= 3 {
                    return run[..run.len().min(12)].to_string();
                }
                run.clear();
            }
        }
        "msg".into()
    }

    #[test]
    fn icon_phrase_follows_hint_rule() {
        let c = MockChat::new();
        for hint in ["messages", "  my Shopping-cart!", "a b", "", "internationalization page"] {
            let reply = c.complete(&format!("TASK: icon\nHINT: {hint}\n"), 9).unwrap();
            assert_eq!(reply, icon_oracle(hint), "hint {hint:?}");
            assert!(reply.len() <= 12);
        }
        assert_eq!(c.complete("TASK: icon\nHINT: messages\n", 0).unwrap(), "messages");
    }

    #[test]
    fn embedding_is_normalized_and_stable() {
        let e = MockEmbedding::new();
        for t in ["abc", "", "message icon", "A much longer sentence, with punctuation!"] {
            let v = e.embed(t).unwrap();
            assert_eq!(v.len(), MOCK_EMBED_DIM);
            let n: f64 = v.iter().map(|x| x.powi(2)).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-6, "{t}: {n}");
            assert_eq!(v, e.embed(t).unwrap());
        }
    }

    #[test]
    fn shared_trigrams_are_closer() {
        let q = MockEmbedding::vector("message icon");
        let near = cosine_similarity(&q, &MockEmbedding::vector("message")).unwrap();
        let far = cosine_similarity(&q, &MockEmbedding::vector("zebra")).unwrap();
        assert!(near > far, "{near} vs {far}");
    }

    #[test]
    fn image_honors_dims_and_is_deterministic() {
        let m = MockImage::new();
        let req = ImageRequest { prompt: "p".into(), width: 512, height: 512, seed: 1, layout_condition: None, init_image: None };
        let a = m.generate(&req).unwrap();
        assert_eq!((a.width(), a.height()), (512, 512));
        assert_eq!(a.to_png().unwrap(), m.generate(&req).unwrap().to_png().unwrap());
        let small = ImageRequest { width: 33, height: 7, ..req };
        let b = m.generate(&small).unwrap();
        assert_eq!((b.width(), b.height()), (33, 7));
    }

    #[test]
    fn layout_condition_marks_boxes() {
        use crate::model::{ComponentType, Wireframe, WireframeComponent};
        let bbox = BBox { x: 200, y: 200, w: 400, h: 400 };
        let wf = Wireframe {
            canvas_w: 10,
            canvas_h: 10,
            components: vec![WireframeComponent { id: "a".into(), ctype: ComponentType::Card, bbox, user_hint: None }],
        };
        let cond = crate::backends::render_layout_condition(&wf, 128, 128);
        let out = MockImage::new()
            .generate(&ImageRequest {
                prompt: "p".into(),
                width: 128,
                height: 128,
                seed: 0,
                layout_condition: Some(cond),
                init_image: None,
            })
            .unwrap();
        let inside = out.crop(scale_bbox_to_pixels(bbox, 128, 128)).unwrap();
        let outside = out.crop(scale_bbox_to_pixels(BBox { x: 700, y: 700, w: 200, h: 200 }, 128, 128)).unwrap();
        let outside_same_size = out.crop(crate::model::PixelRect { x: 0, y: 0, w: inside.width(), h: inside.height() }).unwrap();
        assert_ne!(inside, outside_same_size);
        assert!(outside.image().pixels().all(|p| p == outside.image().get_pixel(0, 0)));
    }

    #[test]
    fn both_conditions_rejected() {
        let r = Raster::filled(4, 4, [0, 0, 0]);
        let err = MockImage::new()
            .generate(&ImageRequest {
                prompt: "p".into(),
                width: 4,
                height: 4,
                seed: 0,
                layout_condition: Some(r.clone()),
                init_image: Some(r),
            })
            .unwrap_err();
        assert!(matches!(err, BackendError::Unsupported(_)));
    }
}
