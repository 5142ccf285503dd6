use std::fmt::Write;

use base64::Engine as _;

use super::{component_sidecar_path, RenderError, RenderOptions, Rendered, Sidecar};
use crate::model::{scale_bbox_to_pixels, ComponentType, Payload, PixelRect, Prototype};

fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

pub(crate) fn font_size(rect: PixelRect) -> f64 {
    (0.6 * f64::from(rect.h)).clamp(8.0, 96.0)
}

/// Inner markup and viewBox of an icon's root `<svg>`.
fn icon_parts(name: &str, src: &str) -> Result<(String, String), RenderError> {
    let doc = roxmltree::Document::parse(src)
        .map_err(|e| RenderError::Icon { icon: name.to_string(), message: e.to_string() })?;
    let root = doc.root_element();
    let view_box = match root.attribute("viewBox") {
        Some(v) => v.to_string(),
        None => {
            let dim = |a| root.attribute(a).and_then(|v: &str| v.trim_end_matches("px").parse::<f64>().ok());
            match (dim("width"), dim("height")) {
                (Some(w), Some(h)) => format!("0 0 {w} {h}"),
                _ => "0 0 24 24".to_string(),
            }
        }
    };
    let inner = match (root.first_child(), root.last_child()) {
        (Some(first), Some(last)) => src[first.range().start..last.range().end].to_string(),
        _ => String::new(),
    };
    Ok((view_box, inner))
}

/// Background images first, everything else in wireframe order.
fn z_order(proto: &Prototype) -> Vec<usize> {
    let is_bg = |i: &usize| proto.results[*i].ctype == ComponentType::BackgroundImage;
    let (mut bg, rest): (Vec<usize>, Vec<usize>) = (0..proto.results.len()).partition(is_bg);
    bg.extend(rest);
    bg
}

pub fn render_svg(proto: &Prototype, opts: &RenderOptions) -> Result<Rendered, RenderError> {
    opts.validate()?;
    let (w, h) = (opts.out_w, opts.out_h);
    let primary = esc(&proto.theme.primary_color);
    let mut sidecars = Vec::new();
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" xmlns:xlink=\"http://www.w3.org/1999/xlink\" version=\"1.1\" \
         width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">"
    );
    let _ = writeln!(
        s,
        "  <rect class=\"theme-background\" x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"{}\"/>",
        esc(&proto.theme.theme_color)
    );
    for idx in z_order(proto) {
        let r = &proto.results[idx];
        let px = scale_bbox_to_pixels(r.bbox, w, h);
        let _ = writeln!(
            s,
            "  <g id=\"{}\" data-type=\"{}\" data-x=\"{}\" data-y=\"{}\" data-w=\"{}\" data-h=\"{}\">",
            esc(&r.component_id),
            r.ctype,
            px.x,
            px.y,
            px.w,
            px.h
        );
        match &r.payload {
            Payload::Text { text, .. } => {
                let _ = writeln!(
                    s,
                    "    <text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"{:.1}\" fill=\"{primary}\" \
                     text-anchor=\"middle\" dominant-baseline=\"central\">{}</text>",
                    f64::from(px.x) + f64::from(px.w) / 2.0,
                    f64::from(px.y) + f64::from(px.h) / 2.0,
                    font_size(px),
                    esc(text)
                );
            }
            Payload::Image { raster, .. } => {
                let png = raster.to_png()?;
                let href = if opts.embed_rasters {
                    format!("data:image/png;base64,{}", base64::engine::general_purpose::STANDARD.encode(&png))
                } else {
                    let path = component_sidecar_path(idx);
                    sidecars.push(Sidecar { path: path.clone(), bytes: png });
                    path
                };
                let _ = writeln!(
                    s,
                    "    <image x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" preserveAspectRatio=\"none\" xlink:href=\"{}\"/>",
                    px.x,
                    px.y,
                    px.w,
                    px.h,
                    esc(&href)
                );
            }
            Payload::Icon { icon_name, svg, .. } => {
                let (view_box, inner) = icon_parts(icon_name, svg)?;
                let _ = writeln!(
                    s,
                    "    <svg x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" viewBox=\"{}\" fill=\"{primary}\" data-icon=\"{}\">{inner}</svg>",
                    px.x,
                    px.y,
                    px.w,
                    px.h,
                    esc(&view_box),
                    esc(icon_name)
                );
            }
            Payload::Color { hex } => {
                let rx = (f64::from(px.w.min(px.h)) * 0.1).min(16.0);
                let _ = writeln!(
                    s,
                    "    <rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" rx=\"{rx:.1}\" fill=\"{}\"/>",
                    px.x,
                    px.y,
                    px.w,
                    px.h,
                    esc(hex)
                );
            }
        }
        if opts.show_ids {
            let _ = writeln!(
                s,
                "    <text class=\"debug-id\" x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"10\" fill=\"#FF0000\">{}</text>",
                px.x + 2,
                px.y + 10,
                esc(&r.component_id)
            );
        }
        s.push_str("  </g>\n");
    }
    s.push_str("</svg>\n");
    Ok(Rendered { text: s, sidecars })
}
