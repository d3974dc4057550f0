//! Bundled two-view demo application.
//!
//! * `form`: a text field, a Validate button with a server listener that
//!   validates and echoes the input into a status label, and a "Live
//!   preview" checkbox that attaches or removes a value-change listener on
//!   the text field.
//! * `list`: a list box, an input field and an Add button appending items.
//!
//! Without a fragment the application starts on the form.

use crate::component::{ComponentError, ComponentId};
use crate::session::ApplicationDefinition;
use crate::ui::Ui;
use crate::value::PropertyValue;
use crate::widget::{EventKind, WidgetType};

const NO_PROPS: [(&str, PropertyValue); 0] = [];

pub fn demo_app() -> ApplicationDefinition {
    ApplicationDefinition::new(|ui| {
        let root = ui.root();
        ui.add(root, WidgetType::Label, [("text", "SPIAR demo".into())])?;
        let content = ui.add(root, WidgetType::Panel, [("style", "content".into())])?;
        build_form(ui, content)
    })
    .with_view("form", |ui| {
        let content = content_panel(ui)?;
        ui.clear_children(content)?;
        build_form(ui, content)
    })
    .and_then(|app| {
        app.with_view("list", |ui| {
            let content = content_panel(ui)?;
            ui.clear_children(content)?;
            build_list(ui, content)
        })
    })
    .expect("demo view names are valid")
}

fn content_panel(ui: &Ui<'_>) -> Result<ComponentId, ComponentError> {
    ui.tree()
        .children(ui.root())
        .get(1)
        .copied()
        .ok_or_else(|| ComponentError::Application("content panel missing".into()))
}

fn build_form(ui: &mut Ui<'_>, content: ComponentId) -> Result<(), ComponentError> {
    let input = ui.add(content, WidgetType::TextField, NO_PROPS)?;
    let validate = ui.add(content, WidgetType::Button, [("text", "Validate".into())])?;
    let status = ui.add(content, WidgetType::Label, NO_PROPS)?;
    let live = ui.add(
        content,
        WidgetType::CheckBox,
        [("text", "Live preview".into())],
    )?;

    ui.add_listener(validate, EventKind::Action, move |ui, _| {
        let value = ui.text(input, "value");
        if value.trim().is_empty() {
            ui.set_property(input, "style", "error")?;
            ui.set_property(status, "text", "Please enter a value")
        } else {
            ui.set_property(input, "style", "")?;
            ui.set_property(status, "text", format!("Hello, {value}!"))
        }
    })?;

    ui.add_listener(live, EventKind::ValueChange, move |ui, _| {
        let on = ui
            .property(live, "checked")
            .and_then(PropertyValue::as_bool)
            .unwrap_or(false);
        ui.clear_listeners(input, EventKind::ValueChange)?;
        if on {
            ui.add_listener(input, EventKind::ValueChange, move |ui, _| {
                let value = ui.text(input, "value");
                ui.set_property(status, "text", value)
            })?;
        }
        Ok(())
    })?;
    Ok(())
}

fn build_list(ui: &mut Ui<'_>, content: ComponentId) -> Result<(), ComponentError> {
    let list = ui.add(content, WidgetType::ListBox, NO_PROPS)?;
    let input = ui.add(content, WidgetType::TextField, NO_PROPS)?;
    let add = ui.add(content, WidgetType::Button, [("text", "Add".into())])?;
    let status = ui.add(content, WidgetType::Label, NO_PROPS)?;

    ui.add_listener(add, EventKind::Action, move |ui, _| {
        let mut items = ui
            .property(list, "items")
            .and_then(PropertyValue::as_list)
            .unwrap_or_default()
            .to_vec();
        let value = ui.text(input, "value");
        let item = if value.is_empty() {
            format!("Item {}", items.len() + 1)
        } else {
            value
        };
        items.push(item);
        ui.set_property(list, "items", items)?;
        ui.set_property(input, "value", "")
    })?;

    ui.add_listener(list, EventKind::ValueChange, move |ui, _| {
        let index = ui
            .property(list, "selected-index")
            .and_then(PropertyValue::as_integer)
            .unwrap_or(-1);
        let item = usize::try_from(index).ok().and_then(|i| {
            ui.property(list, "items")
                .and_then(PropertyValue::as_list)
                .and_then(|items| items.get(i).cloned())
        });
        let text = item.map_or_else(
            || "Nothing selected".to_owned(),
            |s| format!("Selected: {s}"),
        );
        ui.set_property(status, "text", text)
    })?;
    Ok(())
}

/// Ids of the interesting components in a freshly built demo tree.
#[derive(Debug, Clone, Copy)]
pub struct FormIds {
    pub input: ComponentId,
    pub validate: ComponentId,
    pub status: ComponentId,
    pub live: ComponentId,
}

/// Locates the form widgets inside a rendered or server tree, given the
/// content panel's children in order.
pub fn form_ids(content_children: &[ComponentId]) -> Option<FormIds> {
    match content_children {
        [input, validate, status, live] => Some(FormIds {
            input: *input,
            validate: *validate,
            status: *status,
            live: *live,
        }),
        _ => None,
    }
}
