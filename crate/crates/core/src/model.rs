//! Shared domain vocabulary: wireframe input, normalized geometry, component
//! results and the assembled prototype.

use std::collections::HashSet;
use std::fmt;
use std::io::Cursor;
use std::str::FromStr;

use image::{ImageFormat, Rgb, RgbImage};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::agents::{Handler, ThemeDescription};

/// Side length of the normalized coordinate space.
pub const NORM: u32 = 1000;

/// Box in normalized 0..=1000 coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl BBox {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Result<Self, String> {
        let b = Self { x, y, w, h };
        b.validate()?;
        Ok(b)
    }

    pub fn full() -> Self {
        Self { x: 0, y: 0, w: NORM, h: NORM }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.w == 0 || self.h == 0 {
            return Err(format!("empty box {self}"));
        }
        if self.x + self.w > NORM || self.y + self.h > NORM {
            return Err(format!("box {self} exceeds the 0-1000 canvas"));
        }
        Ok(())
    }
}

impl fmt::Display for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{},{},{}]", self.x, self.y, self.w, self.h)
    }
}

/// Pixel rectangle inside a concrete raster.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelRect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

/// Maps a normalized box onto a `target_w` x `target_h` raster. Origins are
/// floored, extents ceiled, and the result is clamped to a non-empty
/// rectangle inside the target.
pub fn scale_bbox_to_pixels(b: BBox, target_w: u32, target_h: u32) -> PixelRect {
    assert!(target_w > 0 && target_h > 0, "target dimensions must be positive");
    let (x, w) = scale_axis(b.x, b.w, target_w);
    let (y, h) = scale_axis(b.y, b.h, target_h);
    PixelRect { x, y, w, h }
}

fn scale_axis(origin: u32, extent: u32, target: u32) -> (u32, u32) {
    let t = u64::from(target);
    let n = u64::from(NORM);
    let start = (u64::from(origin) * t / n).min(t - 1);
    let len = (u64::from(extent) * t).div_ceil(n).clamp(1, t - start);
    (start as u32, len as u32)
}

/// The thirteen component kinds the engine understands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ComponentType {
    Text,
    TextButton,
    Image,
    BackgroundImage,
    Icon,
    Toolbar,
    ListItem,
    Input,
    Card,
    Checkbox,
    RadioButton,
    Drawer,
    Modal,
}

impl ComponentType {
    pub const ALL: [ComponentType; 13] = [
        ComponentType::Text,
        ComponentType::TextButton,
        ComponentType::Image,
        ComponentType::BackgroundImage,
        ComponentType::Icon,
        ComponentType::Toolbar,
        ComponentType::ListItem,
        ComponentType::Input,
        ComponentType::Card,
        ComponentType::Checkbox,
        ComponentType::RadioButton,
        ComponentType::Drawer,
        ComponentType::Modal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ComponentType::Text => "Text",
            ComponentType::TextButton => "TextButton",
            ComponentType::Image => "Image",
            ComponentType::BackgroundImage => "BackgroundImage",
            ComponentType::Icon => "Icon",
            ComponentType::Toolbar => "Toolbar",
            ComponentType::ListItem => "ListItem",
            ComponentType::Input => "Input",
            ComponentType::Card => "Card",
            ComponentType::Checkbox => "Checkbox",
            ComponentType::RadioButton => "RadioButton",
            ComponentType::Drawer => "Drawer",
            ComponentType::Modal => "Modal",
        }
    }
}

impl fmt::Display for ComponentType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown component type {0:?}")]
pub struct UnknownComponentType(pub String);

impl FromStr for ComponentType {
    type Err = UnknownComponentType;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ComponentType::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownComponentType(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireframeComponent {
    pub id: String,
    pub ctype: ComponentType,
    pub bbox: BBox,
    pub user_hint: Option<String>,
}

/// User layout. Component order is generation order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Wireframe {
    pub canvas_w: u32,
    pub canvas_h: u32,
    pub components: Vec<WireframeComponent>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireframeError {
    #[error("malformed wireframe document: {0}")]
    Syntax(String),
    #[error("schema violation{}: {message}", component_suffix(.component))]
    Schema { component: Option<String>, message: String },
    #[error("component {component:?}: unknown component type {name:?}")]
    UnknownType { component: String, name: String },
    #[error("duplicate component id {0:?}")]
    DuplicateId(String),
    #[error("component {component:?}: bbox out of range: {message}")]
    BBoxOutOfRange { component: String, message: String },
    #[error("wireframe has no components")]
    Empty,
}

fn component_suffix(c: &Option<String>) -> String {
    c.as_ref().map(|c| format!(" in component {c:?}")).unwrap_or_default()
}

impl WireframeError {
    /// Offending component id, when the error is attributable to one.
    pub fn component(&self) -> Option<&str> {
        match self {
            WireframeError::Schema { component, .. } => component.as_deref(),
            WireframeError::UnknownType { component, .. }
            | WireframeError::BBoxOutOfRange { component, .. } => Some(component),
            WireframeError::DuplicateId(id) => Some(id),
            WireframeError::Syntax(_) | WireframeError::Empty => None,
        }
    }
}

#[derive(Debug, Deserialize)]
struct RawWireframe {
    canvas_w: u32,
    canvas_h: u32,
    components: Vec<Value>,
    #[serde(default)]
    units: Units,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Units {
    #[default]
    Px,
    Norm,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawComponent {
    id: String,
    #[serde(rename = "type")]
    ctype: String,
    x: i64,
    y: i64,
    w: i64,
    h: i64,
    #[serde(default)]
    hint: Option<String>,
}

#[derive(Serialize)]
struct OutWireframe<'a> {
    canvas_w: u32,
    canvas_h: u32,
    units: Units,
    components: Vec<OutComponent<'a>>,
}

#[derive(Serialize)]
struct OutComponent<'a> {
    id: &'a str,
    #[serde(rename = "type")]
    ctype: &'static str,
    x: u32,
    y: u32,
    w: u32,
    h: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    hint: Option<&'a str>,
}

/// Parses a wireframe document given as JSON text.
pub fn parse_wireframe(document: &str) -> Result<Wireframe, WireframeError> {
    let value: Value =
        serde_json::from_str(document).map_err(|e| WireframeError::Syntax(e.to_string()))?;
    parse_wireframe_value(value)
}

/// Parses an already-decoded wireframe document. Pixel coordinates are
/// normalized with `round(1000 * v / canvas_dim)`; documents tagged
/// `"units": "norm"` (as written by [`Wireframe::to_document`]) are taken
/// as-is.
pub fn parse_wireframe_value(value: Value) -> Result<Wireframe, WireframeError> {
    let raw: RawWireframe = serde_json::from_value(value).map_err(|e| WireframeError::Schema {
        component: None,
        message: e.to_string(),
    })?;
    if raw.canvas_w == 0 || raw.canvas_h == 0 {
        return Err(WireframeError::Schema {
            component: None,
            message: "canvas dimensions must be positive".into(),
        });
    }
    if raw.components.is_empty() {
        return Err(WireframeError::Empty);
    }

    let mut seen = HashSet::new();
    let mut components = Vec::with_capacity(raw.components.len());
    for (idx, v) in raw.components.into_iter().enumerate() {
        let label = v
            .get("id")
            .and_then(Value::as_str)
            .map(str::to_string)
            .unwrap_or_else(|| format!("#{idx}"));
        let rc: RawComponent = serde_json::from_value(v).map_err(|e| WireframeError::Schema {
            component: Some(label.clone()),
            message: e.to_string(),
        })?;
        if rc.id.trim().is_empty() {
            return Err(WireframeError::Schema {
                component: Some(label),
                message: "id must be non-empty".into(),
            });
        }
        let ctype = rc.ctype.parse::<ComponentType>().map_err(|_| WireframeError::UnknownType {
            component: rc.id.clone(),
            name: rc.ctype.clone(),
        })?;
        if !seen.insert(rc.id.clone()) {
            return Err(WireframeError::DuplicateId(rc.id));
        }
        let bbox = match raw.units {
            Units::Px => normalize_box(&rc, raw.canvas_w, raw.canvas_h),
            Units::Norm => norm_box(&rc),
        }?;
        let user_hint = rc.hint.filter(|h| !h.trim().is_empty());
        components.push(WireframeComponent { id: rc.id, ctype, bbox, user_hint });
    }

    Ok(Wireframe { canvas_w: raw.canvas_w, canvas_h: raw.canvas_h, components })
}

fn out_of_range(rc: &RawComponent, message: String) -> WireframeError {
    WireframeError::BBoxOutOfRange { component: rc.id.clone(), message }
}

fn normalize_box(rc: &RawComponent, cw: u32, ch: u32) -> Result<BBox, WireframeError> {
    let (cw, ch) = (i64::from(cw), i64::from(ch));
    if rc.x < 0 || rc.y < 0 || rc.w <= 0 || rc.h <= 0 {
        return Err(out_of_range(rc, format!("negative origin or empty extent ({},{},{},{})", rc.x, rc.y, rc.w, rc.h)));
    }
    if rc.x + rc.w > cw || rc.y + rc.h > ch {
        return Err(out_of_range(rc, format!("box exceeds canvas {cw}x{ch}")));
    }
    let (x, w) = normalize_axis(rc.x, rc.w, cw);
    let (y, h) = normalize_axis(rc.y, rc.h, ch);
    Ok(BBox { x, y, w, h })
}

/// `round(1000 * v / dim)` per field, then nudged so rounding never produces
/// an empty or overflowing box.
fn normalize_axis(origin: i64, extent: i64, dim: i64) -> (u32, u32) {
    let round = |v: i64| -> i64 { (2 * 1000 * v + dim) / (2 * dim) };
    let n = i64::from(NORM);
    let start = round(origin).min(n - 1);
    let len = round(extent).clamp(1, n - start);
    (start as u32, len as u32)
}

fn norm_box(rc: &RawComponent) -> Result<BBox, WireframeError> {
    let conv = |v: i64| u32::try_from(v).map_err(|_| out_of_range(rc, format!("negative coordinate {v}")));
    let b = BBox { x: conv(rc.x)?, y: conv(rc.y)?, w: conv(rc.w)?, h: conv(rc.h)? };
    b.validate().map_err(|m| out_of_range(rc, m))?;
    Ok(b)
}

impl Wireframe {
    /// Serializes to a wireframe document in normalized units; parsing the
    /// result yields an identical `Wireframe`.
    pub fn to_document(&self) -> Value {
        let out = OutWireframe {
            canvas_w: self.canvas_w,
            canvas_h: self.canvas_h,
            units: Units::Norm,
            components: self
                .components
                .iter()
                .map(|c| OutComponent {
                    id: &c.id,
                    ctype: c.ctype.name(),
                    x: c.bbox.x,
                    y: c.bbox.y,
                    w: c.bbox.w,
                    h: c.bbox.h,
                    hint: c.user_hint.as_deref(),
                })
                .collect(),
        };
        serde_json::to_value(out).expect("wireframe serializes")
    }

    pub fn component(&self, id: &str) -> Option<&WireframeComponent> {
        self.components.iter().find(|c| c.id == id)
    }

    /// `<type> [x,y,w,h]` per component; shares the composition line format of
    /// knowledge records so queries and records embed comparably.
    pub fn render_composition(&self) -> String {
        self.components
            .iter()
            .map(|c| format!("{} {}", c.ctype, c.bbox))
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Layout listing for prompts: ids, types, boxes and user hints.
    pub fn render_for_prompt(&self) -> String {
        self.components
            .iter()
            .map(|c| match &c.user_hint {
                Some(h) => format!("- {}: {} {} hint: {}", c.id, c.ctype, c.bbox, h),
                None => format!("- {}: {} {}", c.id, c.ctype, c.bbox),
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RequestError {
    #[error("field \"prompt\" must be non-empty")]
    EmptyPrompt,
}

/// User prompt plus layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: String,
    pub wireframe: Wireframe,
    pub seed: Option<u64>,
}

impl GenerationRequest {
    pub fn new(prompt: impl Into<String>, wireframe: Wireframe, seed: Option<u64>) -> Result<Self, RequestError> {
        let prompt = prompt.into();
        if prompt.trim().is_empty() {
            return Err(RequestError::EmptyPrompt);
        }
        Ok(Self { prompt, wireframe, seed })
    }

    pub fn master_seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    /// Retrieval query: prompt followed by the layout composition.
    pub fn query_text(&self) -> String {
        format!("{}\n{}", self.prompt.trim(), self.wireframe.render_composition())
    }
}

/// RGB raster. Compared pixel-for-pixel.
#[derive(Clone, PartialEq, Eq)]
pub struct Raster(RgbImage);

impl Raster {
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        Self(RgbImage::from_pixel(width, height, Rgb(rgb)))
    }

    pub fn from_image(img: RgbImage) -> Self {
        Self(img)
    }

    pub fn image(&self) -> &RgbImage {
        &self.0
    }

    pub fn into_image(self) -> RgbImage {
        self.0
    }

    pub fn width(&self) -> u32 {
        self.0.width()
    }

    pub fn height(&self) -> u32 {
        self.0.height()
    }

    pub fn crop(&self, r: PixelRect) -> Option<Raster> {
        if r.w == 0 || r.h == 0 || r.x + r.w > self.width() || r.y + r.h > self.height() {
            return None;
        }
        Some(Raster(image::imageops::crop_imm(&self.0, r.x, r.y, r.w, r.h).to_image()))
    }

    pub fn to_png(&self) -> Result<Vec<u8>, image::ImageError> {
        let mut buf = Cursor::new(Vec::new());
        self.0.write_to(&mut buf, ImageFormat::Png)?;
        Ok(buf.into_inner())
    }

    pub fn from_png(bytes: &[u8]) -> Result<Self, image::ImageError> {
        Self::decode(bytes)
    }

    /// Decodes any supported raster format.
    pub fn decode(bytes: &[u8]) -> Result<Self, image::ImageError> {
        Ok(Self(image::load_from_memory(bytes)?.to_rgb8()))
    }
}

impl fmt::Debug for Raster {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Raster({}x{})", self.width(), self.height())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PayloadKind {
    Text,
    Image,
    Icon,
    Color,
}

impl fmt::Display for PayloadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PayloadKind::Text => "text",
            PayloadKind::Image => "image",
            PayloadKind::Icon => "icon",
            PayloadKind::Color => "color",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    Text { text: String, truncated: bool },
    Image { raster: Raster, prompt: String },
    Icon { phrase: String, icon_name: String, svg: String },
    Color { hex: String },
}

impl Payload {
    pub fn kind(&self) -> PayloadKind {
        match self {
            Payload::Text { .. } => PayloadKind::Text,
            Payload::Image { .. } => PayloadKind::Image,
            Payload::Icon { .. } => PayloadKind::Icon,
            Payload::Color { .. } => PayloadKind::Color,
        }
    }

    /// Short human-readable description used in cache entries and API
    /// summaries.
    pub fn summary(&self) -> String {
        match self {
            Payload::Text { text, .. } => format!("text \"{text}\""),
            Payload::Image { raster, prompt } => {
                format!("image {}x{} \"{}\"", raster.width(), raster.height(), prompt)
            }
            Payload::Icon { phrase, icon_name, .. } => format!("icon {icon_name} (\"{phrase}\")"),
            Payload::Color { hex } => format!("color {hex}"),
        }
    }
}

/// One sub-agent output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentResult {
    pub component_id: String,
    pub ctype: ComponentType,
    pub bbox: BBox,
    pub payload: Payload,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThemeProvenance {
    pub prompt: String,
    pub repair_prompt: Option<String>,
    pub image_prompt: String,
    pub references: Vec<String>,
    pub chat_backend: String,
    pub image_backend: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentProvenance {
    pub component_id: String,
    pub handler: Handler,
    /// Composed sub-agent prompt (`p_sub` followed by the cache block).
    pub prompt: String,
    /// Prompt actually sent to a generative backend when it differs from
    /// `prompt` (image generation).
    pub request_prompt: Option<String>,
    pub backend: String,
    pub seed: u64,
    pub attempt: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub session: Option<String>,
    pub master_seed: u64,
    pub theme: ThemeProvenance,
    pub components: Vec<ComponentProvenance>,
}

impl Provenance {
    pub fn component(&self, id: &str) -> Option<&ComponentProvenance> {
        self.components.iter().find(|p| p.component_id == id)
    }
}

/// Final component tree with resolved content.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prototype {
    pub theme: ThemeDescription,
    pub theme_image: Raster,
    pub results: Vec<ComponentResult>,
    pub provenance: Provenance,
}

impl Prototype {
    pub fn result(&self, id: &str) -> Option<&ComponentResult> {
        self.results.iter().find(|r| r.component_id == id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn doc(components: Value) -> String {
        json!({"canvas_w": 1440, "canvas_h": 2560, "components": components}).to_string()
    }

    #[test]
    fn full_canvas_normalizes_to_identity() {
        let d = json!({"canvas_w": 375, "canvas_h": 812, "components": [
            {"id": "bg", "type": "BackgroundImage", "x": 0, "y": 0, "w": 375, "h": 812}
        ]});
        let wf = parse_wireframe(&d.to_string()).unwrap();
        assert_eq!(wf.components[0].bbox, BBox { x: 0, y: 0, w: 1000, h: 1000 });
    }

    #[test]
    fn pixel_boxes_scale_by_rounding() {
        let wf = parse_wireframe(&doc(json!([
            {"id": "a", "type": "text", "x": 720, "y": 640, "w": 360, "h": 128}
        ])))
        .unwrap();
        assert_eq!(wf.components[0].bbox, BBox { x: 500, y: 250, w: 250, h: 50 });
        assert_eq!(wf.components[0].ctype, ComponentType::Text);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = parse_wireframe(&doc(json!([
            {"id": "btn1", "type": "TextButton", "x": 0, "y": 0, "w": 10, "h": 10},
            {"id": "btn1", "type": "TextButton", "x": 20, "y": 0, "w": 10, "h": 10}
        ])))
        .unwrap_err();
        assert_eq!(err, WireframeError::DuplicateId("btn1".into()));
    }

    #[test]
    fn unknown_type_names_component() {
        let err = parse_wireframe(&doc(json!([
            {"id": "s", "type": "Slider2", "x": 0, "y": 0, "w": 10, "h": 10}
        ])))
        .unwrap_err();
        assert_eq!(err.component(), Some("s"));
        assert!(matches!(err, WireframeError::UnknownType { .. }));
    }

    #[test]
    fn type_names_are_case_insensitive_but_exact() {
        assert_eq!("textbutton".parse::<ComponentType>().unwrap(), ComponentType::TextButton);
        assert_eq!("MODAL".parse::<ComponentType>().unwrap(), ComponentType::Modal);
        assert!("Text Button".parse::<ComponentType>().is_err());
        assert!("Texts".parse::<ComponentType>().is_err());
    }

    #[test]
    fn out_of_canvas_box_names_component() {
        let err = parse_wireframe(&doc(json!([
            {"id": "wide", "type": "Card", "x": 1000, "y": 0, "w": 500, "h": 10}
        ])))
        .unwrap_err();
        assert!(matches!(err, WireframeError::BBoxOutOfRange { ref component, .. } if component == "wide"));
    }

    #[test]
    fn missing_field_is_schema_violation_with_id() {
        let err = parse_wireframe(&doc(json!([{"id": "t", "type": "Text", "x": 0, "y": 0, "w": 10}]))).unwrap_err();
        assert!(matches!(err, WireframeError::Schema { component: Some(ref c), .. } if c == "t"));
    }

    #[test]
    fn empty_components_rejected() {
        assert_eq!(parse_wireframe(&doc(json!([]))).unwrap_err(), WireframeError::Empty);
    }

    #[test]
    fn rounding_never_overflows_canvas() {
        // 0.5 rounds up on both fields: 1 + 1000 would overflow.
        let d = json!({"canvas_w": 2000, "canvas_h": 10, "components": [
            {"id": "a", "type": "Card", "x": 1, "y": 0, "w": 1999, "h": 10}
        ]});
        let b = parse_wireframe(&d.to_string()).unwrap().components[0].bbox;
        assert!(b.validate().is_ok(), "{b}");
    }

    #[test]
    fn scale_examples() {
        assert_eq!(scale_bbox_to_pixels(BBox::full(), 512, 512), PixelRect { x: 0, y: 0, w: 512, h: 512 });
        // floor(500*512/1000)=256, floor(250*512/1000)=128,
        // ceil(250*512/1000)=128, ceil(50*512/1000)=ceil(25.6)=26
        assert_eq!(
            scale_bbox_to_pixels(BBox { x: 500, y: 250, w: 250, h: 50 }, 512, 512),
            PixelRect { x: 256, y: 128, w: 128, h: 26 }
        );
        assert_eq!(
            scale_bbox_to_pixels(BBox { x: 999, y: 999, w: 1, h: 1 }, 512, 512),
            PixelRect { x: 511, y: 511, w: 1, h: 1 }
        );
    }

    #[test]
    fn empty_prompt_rejected() {
        let wf = parse_wireframe(&doc(json!([{"id": "t", "type": "Text", "x": 0, "y": 0, "w": 10, "h": 10}]))).unwrap();
        assert_eq!(GenerationRequest::new("   ", wf, None).unwrap_err(), RequestError::EmptyPrompt);
    }

    #[test]
    fn raster_png_round_trip() {
        let r = Raster::filled(7, 3, [1, 2, 3]);
        assert_eq!(Raster::from_png(&r.to_png().unwrap()).unwrap(), r);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_wireframe_doc() -> impl Strategy<Value = Value> {
            (1u32..4000, 1u32..4000).prop_flat_map(|(cw, ch)| {
                let comp = (0..cw, 0..ch, 0usize..13, proptest::option::of("[a-z ]{1,12}"))
                    .prop_flat_map(move |(x, y, t, hint)| {
                        (Just(x), Just(y), 1..=(cw - x), 1..=(ch - y), Just(t), Just(hint))
                    });
                (Just(cw), Just(ch), prop::collection::vec(comp, 1..8))
            })
            .prop_map(|(cw, ch, comps)| {
                let components: Vec<Value> = comps
                    .into_iter()
                    .enumerate()
                    .map(|(i, (x, y, w, h, t, hint))| {
                        let mut c = json!({"id": format!("c{i}"), "type": ComponentType::ALL[t].name(),
                            "x": x, "y": y, "w": w, "h": h});
                        if let Some(hint) = hint {
                            c["hint"] = json!(hint);
                        }
                        c
                    })
                    .collect();
                json!({"canvas_w": cw, "canvas_h": ch, "components": components})
            })
        }

        proptest! {
            #[test]
            fn serialize_parse_round_trip(d in arb_wireframe_doc()) {
                let wf = parse_wireframe_value(d).unwrap();
                let again = parse_wireframe_value(wf.to_document()).unwrap();
                prop_assert_eq!(again, wf);
            }

            #[test]
            fn scaled_rects_stay_inside(x in 0u32..1000, y in 0u32..1000, w in 1u32..1000, h in 1u32..1000,
                                        tw in 1u32..2048, th in 1u32..2048) {
                let b = BBox { x, y, w: w.min(1000 - x).max(1), h: h.min(1000 - y).max(1) };
                prop_assume!(b.validate().is_ok());
                let r = scale_bbox_to_pixels(b, tw, th);
                prop_assert!(r.w >= 1 && r.h >= 1);
                prop_assert!(r.x + r.w <= tw && r.y + r.h <= th);
            }
        }
    }
}
