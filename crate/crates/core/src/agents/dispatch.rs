use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ComponentType, PayloadKind};

/// Sub-agent that resolves a component's content.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Handler {
    TextAgent,
    ImageAgent,
    IconAgent,
    ColorFallback,
}

impl Handler {
    pub fn payload_kind(self) -> PayloadKind {
        match self {
            Handler::TextAgent => PayloadKind::Text,
            Handler::ImageAgent => PayloadKind::Image,
            Handler::IconAgent => PayloadKind::Icon,
            Handler::ColorFallback => PayloadKind::Color,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Handler::TextAgent => "text_agent",
            Handler::ImageAgent => "image_agent",
            Handler::IconAgent => "icon_agent",
            Handler::ColorFallback => "color_fallback",
        }
    }
}

impl fmt::Display for Handler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("dispatch table has no handler for {0}")]
pub struct DispatchError(pub ComponentType);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DispatchTable {
    map: BTreeMap<ComponentType, Handler>,
}

impl Default for DispatchTable {
    fn default() -> Self {
        Self::standard()
    }
}

impl DispatchTable {
    pub fn standard() -> Self {
        use ComponentType::*;
        let map = ComponentType::ALL
            .into_iter()
            .map(|t| {
                let h = match t {
                    Text | TextButton => Handler::TextAgent,
                    Image | BackgroundImage => Handler::ImageAgent,
                    Icon => Handler::IconAgent,
                    Toolbar | ListItem | Input | Card | Checkbox | RadioButton | Drawer | Modal => {
                        Handler::ColorFallback
                    }
                };
                (t, h)
            })
            .collect();
        Self { map }
    }

    pub fn from_map(map: BTreeMap<ComponentType, Handler>) -> Result<Self, DispatchError> {
        let t = Self { map };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), DispatchError> {
        match ComponentType::ALL.into_iter().find(|t| !self.map.contains_key(t)) {
            Some(t) => Err(DispatchError(t)),
            None => Ok(()),
        }
    }

    pub fn handler(&self, t: ComponentType) -> Result<Handler, DispatchError> {
        self.map.get(&t).copied().ok_or(DispatchError(t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_is_exhaustive() {
        let t = DispatchTable::standard();
        t.validate().unwrap();
        assert_eq!(t.handler(ComponentType::TextButton).unwrap(), Handler::TextAgent);
        assert_eq!(t.handler(ComponentType::Toolbar).unwrap(), Handler::ColorFallback);
    }

    #[test]
    fn incomplete_table_rejected() {
        let mut map: BTreeMap<_, _> = ComponentType::ALL.into_iter().map(|t| (t, Handler::ColorFallback)).collect();
        map.remove(&ComponentType::Drawer);
        assert_eq!(DispatchTable::from_map(map).unwrap_err(), DispatchError(ComponentType::Drawer));
    }

    #[test]
    fn serde_names() {
        assert_eq!(serde_json::to_string(&Handler::ColorFallback).unwrap(), "\"color_fallback\"");
    }
}
