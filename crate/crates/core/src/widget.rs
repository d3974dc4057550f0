//! The built-in widget set: which properties each component type declares,
//! which events it can emit, and whether it can hold children.

use std::fmt;
use std::str::FromStr;

use crate::value::{PropertyValue, ValueKind};

/// Component type names of the built-in widget library.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum WidgetType {
    Window,
    Panel,
    Label,
    Button,
    TextField,
    CheckBox,
    ListBox,
}

/// User-initiated event categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    /// Clicking a button, pressing enter in a text field.
    Action,
    /// Editing a value: typing, checking a box, selecting a list entry.
    ValueChange,
}

/// A declared property of a widget type.
#[derive(Debug, Clone, Copy)]
pub struct PropertySpec {
    pub name: &'static str,
    pub kind: ValueKind,
    /// Whether a client may write this property in a DELTA-CLIENT message.
    pub client_writable: bool,
}

const fn prop(name: &'static str, kind: ValueKind) -> PropertySpec {
    PropertySpec {
        name,
        kind,
        client_writable: false,
    }
}

const fn writable(name: &'static str, kind: ValueKind) -> PropertySpec {
    PropertySpec {
        name,
        kind,
        client_writable: true,
    }
}

const WINDOW_PROPS: &[PropertySpec] = &[];
const PANEL_PROPS: &[PropertySpec] = &[prop("style", ValueKind::Text)];
const LABEL_PROPS: &[PropertySpec] = &[prop("text", ValueKind::Text)];
const BUTTON_PROPS: &[PropertySpec] = &[
    prop("text", ValueKind::Text),
    prop("enabled", ValueKind::Boolean),
];
const TEXTFIELD_PROPS: &[PropertySpec] = &[
    writable("value", ValueKind::Text),
    prop("enabled", ValueKind::Boolean),
    writable("style", ValueKind::Text),
];
const CHECKBOX_PROPS: &[PropertySpec] = &[
    writable("checked", ValueKind::Boolean),
    prop("text", ValueKind::Text),
];
const LISTBOX_PROPS: &[PropertySpec] = &[
    prop("items", ValueKind::TextList),
    writable("selected-index", ValueKind::Integer),
];

const NO_EVENTS: &[EventKind] = &[];
const ACTION_ONLY: &[EventKind] = &[EventKind::Action];
const VALUE_CHANGE_ONLY: &[EventKind] = &[EventKind::ValueChange];
const TEXTFIELD_EVENTS: &[EventKind] = &[EventKind::ValueChange, EventKind::Action];

impl WidgetType {
    pub const ALL: [WidgetType; 7] = [
        WidgetType::Window,
        WidgetType::Panel,
        WidgetType::Label,
        WidgetType::Button,
        WidgetType::TextField,
        WidgetType::CheckBox,
        WidgetType::ListBox,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WidgetType::Window => "window",
            WidgetType::Panel => "panel",
            WidgetType::Label => "label",
            WidgetType::Button => "button",
            WidgetType::TextField => "textfield",
            WidgetType::CheckBox => "checkbox",
            WidgetType::ListBox => "listbox",
        }
    }

    pub fn properties(self) -> &'static [PropertySpec] {
        match self {
            WidgetType::Window => WINDOW_PROPS,
            WidgetType::Panel => PANEL_PROPS,
            WidgetType::Label => LABEL_PROPS,
            WidgetType::Button => BUTTON_PROPS,
            WidgetType::TextField => TEXTFIELD_PROPS,
            WidgetType::CheckBox => CHECKBOX_PROPS,
            WidgetType::ListBox => LISTBOX_PROPS,
        }
    }

    pub fn property(self, name: &str) -> Option<&'static PropertySpec> {
        self.properties().iter().find(|p| p.name == name)
    }

    pub fn events(self) -> &'static [EventKind] {
        match self {
            WidgetType::Window | WidgetType::Panel | WidgetType::Label => NO_EVENTS,
            WidgetType::Button => ACTION_ONLY,
            WidgetType::TextField => TEXTFIELD_EVENTS,
            WidgetType::CheckBox | WidgetType::ListBox => VALUE_CHANGE_ONLY,
        }
    }

    pub fn emits(self, event: EventKind) -> bool {
        self.events().contains(&event)
    }

    pub fn is_container(self) -> bool {
        matches!(self, WidgetType::Window | WidgetType::Panel)
    }

    /// The property a value-change on this widget writes, if any.
    pub fn value_property(self) -> Option<&'static PropertySpec> {
        match self {
            WidgetType::TextField => self.property("value"),
            WidgetType::CheckBox => self.property("checked"),
            WidgetType::ListBox => self.property("selected-index"),
            _ => None,
        }
    }

    /// Default value of a declared property.
    pub fn default_value(self, name: &str) -> Option<PropertyValue> {
        let spec = self.property(name)?;
        Some(match (spec.kind, name) {
            (ValueKind::Boolean, "enabled") => PropertyValue::Boolean(true),
            (ValueKind::Boolean, _) => PropertyValue::Boolean(false),
            (ValueKind::Integer, _) => PropertyValue::Integer(-1),
            (ValueKind::Text, _) => PropertyValue::Text(String::new()),
            (ValueKind::TextList, _) => PropertyValue::TextList(Vec::new()),
            (ValueKind::Real, _) => PropertyValue::Real(0.0),
            (ValueKind::Null, _) => PropertyValue::Null,
        })
    }
}

impl fmt::Display for WidgetType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown component type `{0}`")]
pub struct UnknownWidgetType(pub String);

impl FromStr for WidgetType {
    type Err = UnknownWidgetType;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        WidgetType::ALL
            .into_iter()
            .find(|w| w.name() == s)
            .ok_or_else(|| UnknownWidgetType(s.to_owned()))
    }
}

impl EventKind {
    pub const ALL: [EventKind; 2] = [EventKind::Action, EventKind::ValueChange];

    pub fn name(self) -> &'static str {
        match self {
            EventKind::Action => "action",
            EventKind::ValueChange => "value-change",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown event type `{0}`")]
pub struct UnknownEventName(pub String);

impl FromStr for EventKind {
    type Err = UnknownEventName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventKind::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| UnknownEventName(s.to_owned()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for w in WidgetType::ALL {
            assert_eq!(w.name().parse::<WidgetType>().unwrap(), w);
        }
        for e in EventKind::ALL {
            assert_eq!(e.name().parse::<EventKind>().unwrap(), e);
        }
        assert!("slider".parse::<WidgetType>().is_err());
    }

    #[test]
    fn defaults_follow_table() {
        use PropertyValue::*;
        assert_eq!(
            WidgetType::Button.default_value("enabled"),
            Some(Boolean(true))
        );
        assert_eq!(
            WidgetType::CheckBox.default_value("checked"),
            Some(Boolean(false))
        );
        assert_eq!(
            WidgetType::ListBox.default_value("selected-index"),
            Some(Integer(-1))
        );
        assert_eq!(
            WidgetType::ListBox.default_value("items"),
            Some(TextList(vec![]))
        );
        assert_eq!(WidgetType::Label.default_value("checked"), None);
    }

    #[test]
    fn only_windows_and_panels_contain() {
        let containers: Vec<_> = WidgetType::ALL
            .into_iter()
            .filter(|w| w.is_container())
            .collect();
        assert_eq!(containers, vec![WidgetType::Window, WidgetType::Panel]);
    }

    #[test]
    fn every_value_property_is_client_writable() {
        for w in WidgetType::ALL {
            if let Some(p) = w.value_property() {
                assert!(p.client_writable, "{w}.{}", p.name);
                assert!(w.emits(EventKind::ValueChange));
            }
        }
    }
}
