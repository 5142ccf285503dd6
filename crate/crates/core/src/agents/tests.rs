use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use super::*;
use crate::backends::{ChatBackend, ChatCapability, MockChat};
use crate::demo;
use crate::model::{parse_wireframe, Payload, PayloadKind};

fn five_component_request() -> GenerationRequest {
    let wf = parse_wireframe(
        r#"{"canvas_w":1000,"canvas_h":1000,"components":[
            {"id":"t","type":"Text","x":50,"y":50,"w":900,"h":80},
            {"id":"b","type":"TextButton","x":50,"y":850,"w":900,"h":100,"hint":"login"},
            {"id":"img","type":"Image","x":0,"y":150,"w":1000,"h":500},
            {"id":"ic","type":"Icon","x":900,"y":20,"w":80,"h":80,"hint":"messages"},
            {"id":"bar","type":"Toolbar","x":0,"y":0,"w":1000,"h":40}]}"#,
    )
    .unwrap();
    GenerationRequest::new("a messaging app login", wf, Some(42)).unwrap()
}

#[test]
fn five_components_get_expected_payload_kinds() {
    let engine = demo::mock_engine();
    let proto = engine.orchestrate(&five_component_request()).unwrap();
    let kinds: Vec<PayloadKind> = proto.results.iter().map(|r| r.payload.kind()).collect();
    assert_eq!(
        kinds,
        vec![PayloadKind::Text, PayloadKind::Text, PayloadKind::Image, PayloadKind::Icon, PayloadKind::Color]
    );
    let Payload::Icon { icon_name, .. } = &proto.result("ic").unwrap().payload else { panic!() };
    assert_eq!(icon_name, "message");
    assert_eq!((proto.theme_image.width(), proto.theme_image.height()), (512, 512));
}

#[test]
fn logged_prompts_follow_the_cache_recurrence() {
    let engine = demo::mock_engine();
    let req = five_component_request();
    let proto = engine.orchestrate(&req).unwrap();
    let mut cache = CachePool::with_theme(proto.theme.summary(), engine.config().cache_char_budget);
    for (t, comp) in req.wireframe.components.iter().enumerate() {
        let p = &proto.provenance.components[t];
        let p_sub = sub_prompt(p.handler, comp, &proto.theme, engine.templates(), None).unwrap();
        assert_eq!(p.prompt, compose_sub_prompt(&p_sub, &cache));
        for earlier in &proto.results[..t] {
            assert!(p.prompt.contains(&earlier.payload.summary()), "component {t} misses {}", earlier.component_id);
        }
        cache = cache_append(&cache, &proto.results[t], t);
    }
}

#[test]
fn orchestration_is_deterministic() {
    let engine = demo::mock_engine();
    let req = five_component_request();
    assert_eq!(engine.orchestrate(&req).unwrap(), engine.orchestrate(&req).unwrap());
}

#[test]
fn theme_hints_limited_to_wireframe_ids() {
    let engine = demo::mock_engine();
    let theme = engine.generate_theme(&five_component_request()).unwrap();
    let ids: BTreeSet<&str> = ["t", "b", "img", "ic", "bar"].into();
    assert!(theme.theme.component_hints.keys().all(|k| ids.contains(k.as_str())));
    assert!(theme.theme.component_hints.contains_key("img"));
    assert_eq!(theme.provenance.references.len(), 2);
    assert!(theme.provenance.repair_prompt.is_none());
}

/// Replies without a narrative until it sees the format reminder.
struct Forgetful {
    cap: ChatCapability,
    calls: AtomicUsize,
    recover: bool,
}

impl ChatBackend for Forgetful {
    fn capability(&self) -> &ChatCapability {
        &self.cap
    }

    fn complete(&self, prompt: &str, seed: u64) -> Result<String, crate::backends::BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        if prompt.contains("TASK: theme") && !(self.recover && prompt.contains(FORMAT_REMINDER)) {
            return Ok("THEME_COLOR: #FFFFFF\nPRIMARY_COLOR: #000000\nCATEGORY: Tools".into());
        }
        MockChat::new().complete(prompt, seed)
    }
}

fn forgetful_engine(recover: bool) -> (Engine, Arc<Forgetful>) {
    let chat = Arc::new(Forgetful {
        cap: ChatCapability { name: "forgetful".into(), max_input_chars: 32_000 },
        calls: AtomicUsize::new(0),
        recover,
    });
    let mut backends = Backends::mock();
    backends.chat = chat.clone();
    (demo::engine_with(backends), chat)
}

#[test]
fn one_repair_round_then_success() {
    let (engine, chat) = forgetful_engine(true);
    let out = engine.generate_theme(&five_component_request()).unwrap();
    assert_eq!(chat.calls.load(Ordering::SeqCst), 2);
    assert!(out.provenance.repair_prompt.unwrap().ends_with(FORMAT_REMINDER));
}

#[test]
fn unrepairable_theme_is_typed_error() {
    let (engine, chat) = forgetful_engine(false);
    let err = engine.generate_theme(&five_component_request()).unwrap_err();
    assert!(matches!(err, AgentError::ThemeUnparseable(ref e) if e.missing == vec!["NARRATIVE"]));
    assert_eq!(chat.calls.load(Ordering::SeqCst), 2);
}

#[test]
fn regeneration_changes_only_target() {
    let engine = demo::mock_engine();
    let req = five_component_request();
    let proto = engine.orchestrate(&req).unwrap();
    let next = engine.regenerate_component(&req, &proto, "b", Some("use the word Checkout"), 1).unwrap();
    for (i, (a, b)) in proto.results.iter().zip(&next.results).enumerate() {
        if a.component_id == "b" {
            assert_ne!(a, b);
        } else {
            assert_eq!(a, b, "component {i} changed");
            assert_eq!(proto.provenance.components[i], next.provenance.components[i]);
        }
    }
    let p = next.provenance.component("b").unwrap();
    assert!(p.prompt.contains("use the word Checkout"));
    assert_eq!(p.attempt, 1);
    assert_eq!(next.theme, proto.theme);
    assert_eq!(next.theme_image, proto.theme_image);
    let again = engine.regenerate_component(&req, &proto, "b", Some("use the word Checkout"), 1).unwrap();
    assert_eq!(again, next);
}

#[test]
fn regeneration_cache_excludes_target_and_keeps_others() {
    let engine = demo::mock_engine();
    let req = five_component_request();
    let proto = engine.orchestrate(&req).unwrap();
    let next = engine.regenerate_component(&req, &proto, "t", None, 2).unwrap();
    let prompt = &next.provenance.component("t").unwrap().prompt;
    for r in &proto.results[1..] {
        assert!(prompt.contains(&r.payload.summary()));
    }
    let bar = prompt.find("[4] Toolbar").unwrap();
    let b = prompt.find("[1] TextButton").unwrap();
    assert!(bar < b, "most recent first");
}

#[test]
fn unknown_component_rejected() {
    let engine = demo::mock_engine();
    let req = five_component_request();
    let proto = engine.orchestrate(&req).unwrap();
    assert!(matches!(
        engine.regenerate_component(&req, &proto, "nope", None, 1),
        Err(RegenerateError::UnknownComponent(_))
    ));
}

/// Fails every text request after `ok` successes.
struct FlakyText {
    cap: ChatCapability,
    ok: usize,
    seen: AtomicUsize,
}

impl ChatBackend for FlakyText {
    fn capability(&self) -> &ChatCapability {
        &self.cap
    }

    fn complete(&self, prompt: &str, seed: u64) -> Result<String, crate::backends::BackendError> {
        if prompt.starts_with("TASK: text") && self.seen.fetch_add(1, Ordering::SeqCst) >= self.ok {
            return Err(crate::backends::BackendError::Failed("down".into()));
        }
        MockChat::new().complete(prompt, seed)
    }
}

#[test]
fn failure_yields_partial_prototype_that_resumes() {
    let req = five_component_request();
    let mut backends = Backends::mock();
    backends.chat = Arc::new(FlakyText {
        cap: ChatCapability { name: "mock-chat".into(), max_input_chars: 32_000 },
        ok: 1,
        seen: AtomicUsize::new(0),
    });
    let flaky = demo::engine_with(backends);
    let Err(OrchestrationError::Partial(partial)) = flaky.orchestrate(&req) else { panic!("expected partial") };
    assert_eq!(partial.failed_component, "b");
    assert_eq!(partial.completed.len(), 1);
    let healthy = demo::mock_engine();
    let resumed = healthy.resume(&req, *partial).unwrap();
    assert_eq!(resumed, healthy.orchestrate(&req).unwrap());
}

#[test]
fn unembedded_store_rejected() {
    let backends = Backends::mock();
    let icons = demo::icon_store(backends.embedder.as_ref()).unwrap();
    let err = Engine::new(
        backends,
        Arc::new(demo::raw_ui_store()),
        Arc::new(icons),
        Templates::default(),
        EngineConfig::default(),
    )
    .unwrap_err();
    assert!(matches!(err, EngineError::NotEmbedded(StoreKind::Ui)));
}
