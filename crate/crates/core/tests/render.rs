use std::fs;
use std::path::PathBuf;

use maxproto_core::demo;
use maxproto_core::model::{scale_bbox_to_pixels, ComponentType, GenerationRequest, Payload, Prototype};
use maxproto_core::render::{parse_document, render_document, render_svg, RenderOptions};

fn demo_prototype() -> Prototype {
    let req = GenerationRequest::new(demo::PROMPT, demo::wireframe(), Some(7)).unwrap();
    demo::mock_engine().orchestrate(&req).unwrap()
}

#[test]
fn svg_matches_golden_file() {
    let svg = render_svg(&demo_prototype(), &RenderOptions::default()).unwrap().text;
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/demo_prototype.svg");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(&path, &svg).unwrap();
    }
    let golden = fs::read_to_string(&path).expect("golden file present; regenerate with UPDATE_GOLDEN=1");
    assert!(svg == golden, "rendered SVG differs from {}", path.display());
}

#[test]
fn svg_structure() {
    let proto = demo_prototype();
    let opts = RenderOptions { out_w: 360, out_h: 640, ..RenderOptions::default() };
    let svg = render_svg(&proto, &opts).unwrap().text;
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let groups: Vec<_> = doc.root_element().children().filter(|n| n.has_tag_name("g")).collect();
    assert_eq!(groups.len(), proto.results.len());
    for r in &proto.results {
        let g: Vec<_> = groups.iter().filter(|g| g.attribute("id") == Some(r.component_id.as_str())).collect();
        assert_eq!(g.len(), 1, "{}", r.component_id);
        let px = scale_bbox_to_pixels(r.bbox, 360, 640);
        let attr = |a: &str| g[0].attribute(a).unwrap().parse::<u32>().unwrap();
        assert_eq!((attr("data-x"), attr("data-y"), attr("data-w"), attr("data-h")), (px.x, px.y, px.w, px.h));
        let child = g[0].children().find(|n| n.is_element()).unwrap();
        match &r.payload {
            Payload::Text { text, .. } => {
                assert_eq!(child.tag_name().name(), "text");
                assert_eq!(child.text(), Some(text.as_str()));
                assert_eq!(child.attribute("fill"), Some(proto.theme.primary_color.as_str()));
            }
            Payload::Image { .. } => assert_eq!(child.tag_name().name(), "image"),
            Payload::Icon { .. } => {
                assert_eq!(child.tag_name().name(), "svg");
                assert_eq!(child.attribute("fill"), Some(proto.theme.primary_color.as_str()));
            }
            Payload::Color { hex } => {
                assert_eq!(child.tag_name().name(), "rect");
                assert_eq!(child.attribute("fill"), Some(hex.as_str()));
            }
        }
    }
}

#[test]
fn background_images_render_first() {
    let mut proto = demo_prototype();
    let last = proto.results.len() - 1;
    let hero = proto.results.iter().position(|r| r.ctype == ComponentType::Image).unwrap();
    proto.results[hero].ctype = ComponentType::BackgroundImage;
    proto.results.swap(hero, last);
    let svg = render_svg(&proto, &RenderOptions::default()).unwrap().text;
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let first = doc.root_element().children().find(|n| n.has_tag_name("g")).unwrap();
    assert_eq!(first.attribute("id"), Some(proto.results[last].component_id.as_str()));
}

#[test]
fn color_rect_carries_exact_fill() {
    let mut proto = demo_prototype();
    let i = proto.results.iter().position(|r| matches!(r.payload, Payload::Color { .. })).unwrap();
    proto.results[i].payload = Payload::Color { hex: "#FF0000".into() };
    let svg = render_svg(&proto, &RenderOptions::default()).unwrap().text;
    assert!(svg.contains("fill=\"#FF0000\""));
}

#[test]
fn document_round_trip_inline() {
    let proto = demo_prototype();
    let doc = render_document(&proto, true).unwrap();
    assert!(doc.sidecars.is_empty());
    assert_eq!(parse_document(&doc.text, None).unwrap(), proto);
    for p in &proto.provenance.components {
        let escaped = serde_json::to_string(&p.prompt).unwrap();
        assert!(doc.text.contains(&escaped));
    }
}

#[test]
fn document_round_trip_sidecar() {
    let proto = demo_prototype();
    let doc = render_document(&proto, false).unwrap();
    assert!(!doc.text.contains("png-base64"));
    assert!(doc.text.contains("\"path\": \"rasters/theme.png\""));
    let dir = tempfile::tempdir().unwrap();
    doc.write_to(dir.path(), "prototype.json").unwrap();
    assert!(dir.path().join("rasters/theme.png").exists());
    let text = fs::read_to_string(dir.path().join("prototype.json")).unwrap();
    assert_eq!(parse_document(&text, Some(dir.path())).unwrap(), proto);
    assert!(parse_document(&text, None).is_err());
}

#[test]
fn sidecar_svg_references_files() {
    let r = render_svg(&demo_prototype(), &RenderOptions { embed_rasters: false, ..RenderOptions::default() }).unwrap();
    assert!(!r.text.contains("data:image/png"));
    for s in &r.sidecars {
        assert!(r.text.contains(&format!("xlink:href=\"{}\"", s.path)));
    }
    assert!(!r.sidecars.is_empty());
}
