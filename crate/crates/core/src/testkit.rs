//! Randomized applications and user events for property tests and the
//! acceptance suite. Everything here is deterministic in its seed: listener
//! and view effects depend only on their own seed and the current tree.

use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};

use crate::client::UserEvent;
use crate::component::{ComponentError, ComponentId, ComponentTree};
use crate::model::RepresentationalModel;
use crate::session::ApplicationDefinition;
use crate::ui::Ui;
use crate::value::{PropertyValue, ValueKind};
use crate::widget::{EventKind, WidgetType};

const WORDS: &[&str] = &[
    "",
    "a",
    "ok",
    "hello",
    "naïve",
    "日本",
    "x y",
    "\"q\"",
    "</b>",
    "line\nbreak",
];

fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub fn random_value(rng: &mut impl Rng, kind: ValueKind) -> PropertyValue {
    match kind {
        ValueKind::Text => PropertyValue::Text(WORDS.choose(rng).unwrap().to_string()),
        ValueKind::Integer => PropertyValue::Integer(rng.random_range(-3..20)),
        ValueKind::Real => PropertyValue::Real(rng.random_range(-1e6..1e6)),
        ValueKind::Boolean => PropertyValue::Boolean(rng.random()),
        ValueKind::Null => PropertyValue::Null,
        ValueKind::TextList => PropertyValue::TextList(
            (0..rng.random_range(0..4))
                .map(|_| WORDS.choose(rng).unwrap().to_string())
                .collect(),
        ),
    }
}

fn random_widget(rng: &mut impl Rng) -> WidgetType {
    // Skew towards containers so trees grow in depth as well as width.
    const CHOICES: &[WidgetType] = &[
        WidgetType::Panel,
        WidgetType::Panel,
        WidgetType::Label,
        WidgetType::Button,
        WidgetType::TextField,
        WidgetType::CheckBox,
        WidgetType::ListBox,
    ];
    *CHOICES.choose(rng).unwrap()
}

fn random_props(rng: &mut impl Rng, widget: WidgetType) -> Vec<(String, PropertyValue)> {
    let mut props = Vec::new();
    for p in widget.properties() {
        if rng.random_bool(0.5) {
            props.push((p.name.to_owned(), random_value(rng, p.kind)));
        }
    }
    props
}

fn attached(tree: &ComponentTree) -> Vec<ComponentId> {
    tree.subtree(tree.root())
}

/// Creates a random component below a random container and possibly gives
/// it a random listener.
fn grow(ui: &mut Ui<'_>, rng: &mut StdRng, max: usize) -> Result<(), ComponentError> {
    if ui.tree().len() >= max {
        return Ok(());
    }
    let containers: Vec<_> = attached(ui.tree())
        .into_iter()
        .filter(|c| ui.tree().widget(*c).is_some_and(WidgetType::is_container))
        .collect();
    let parent = *containers.choose(rng).expect("root is a container");
    let widget = random_widget(rng);
    let props = random_props(rng, widget);
    let id = ui.create(widget, props)?;
    let index = rng.random_range(0..=ui.tree().children(parent).len());
    ui.attach(parent, id, index)?;
    if rng.random_bool(0.6) {
        listen(ui, rng, id, max)?;
    }
    Ok(())
}

fn listen(
    ui: &mut Ui<'_>,
    rng: &mut StdRng,
    id: ComponentId,
    max: usize,
) -> Result<(), ComponentError> {
    let Some(widget) = ui.tree().widget(id) else {
        return Ok(());
    };
    let Some(&event) = widget.events().choose(rng) else {
        return Ok(());
    };
    let seed: u64 = rng.random();
    ui.add_listener(id, event, move |ui, ev| {
        let salt = ev.source.number() ^ (ui.tree().watermark() << 20);
        random_effect(ui, mix(seed ^ salt), max)
    })?;
    Ok(())
}

/// Between one and three random mutations of the attached tree.
pub fn random_effect(ui: &mut Ui<'_>, seed: u64, max: usize) -> Result<(), ComponentError> {
    let mut rng = StdRng::seed_from_u64(seed);
    for _ in 0..rng.random_range(1..=3) {
        let nodes = attached(ui.tree());
        match rng.random_range(0..10) {
            0..=4 => {
                let id = *nodes.choose(&mut rng).unwrap();
                let widget = ui.tree().widget(id).unwrap();
                if let Some(spec) = widget.properties().choose(&mut rng) {
                    let value = random_value(&mut rng, spec.kind);
                    ui.set_property(id, spec.name, value)?;
                }
            }
            5 | 6 => grow(ui, &mut rng, max)?,
            7 => {
                if nodes.len() > 1 && rng.random_bool(0.7) {
                    let id = *nodes[1..].choose(&mut rng).unwrap();
                    ui.detach(id)?;
                }
            }
            8 => {
                let id = *nodes.choose(&mut rng).unwrap();
                listen(ui, &mut rng, id, max)?;
            }
            _ => {
                let id = *nodes.choose(&mut rng).unwrap();
                let widget = ui.tree().widget(id).unwrap();
                if let Some(&event) = widget.events().choose(&mut rng) {
                    ui.clear_listeners(id, event)?;
                }
            }
        }
    }
    Ok(())
}

/// A random application with up to `max_components` components and
/// `views` views named `v0`, `v1`, ...
pub fn random_app(seed: u64, max_components: usize, views: usize) -> ApplicationDefinition {
    let mut app = ApplicationDefinition::new(move |ui| {
        let mut rng = StdRng::seed_from_u64(seed);
        let target = rng.random_range(1..=max_components);
        // Creation can be skipped when the chosen parent is full, so bound
        // the attempts rather than loop until the target is reached.
        for _ in 0..target * 2 {
            if ui.tree().len() >= target {
                break;
            }
            grow(ui, &mut rng, target)?;
        }
        for _ in 0..rng.random_range(0..3) {
            listen(ui, &mut rng, ui.root(), max_components)?;
        }
        Ok(())
    });
    for v in 0..views {
        let view_seed = mix(seed ^ ((v as u64 + 1) * 0x1000));
        app = app
            .with_view(&format!("v{v}"), move |ui| {
                random_effect(ui, mix(view_seed ^ ui.tree().watermark()), max_components)
            })
            .expect("generated view names are valid");
    }
    app
}

/// A random user event against a node of `model` that can emit events.
/// Returns `None` when no node emits anything.
pub fn random_event(rng: &mut impl Rng, model: &RepresentationalModel) -> Option<UserEvent> {
    let mut candidates = Vec::new();
    let mut stack: Vec<_> = model.root().into_iter().collect();
    while let Some(node) = stack.pop() {
        if !node.widget.events().is_empty() {
            candidates.push(node);
        }
        stack.extend(node.children.iter());
    }
    let node = candidates.choose(rng)?;
    let event = *node.widget.events().choose(rng)?;
    let payload = match event {
        EventKind::ValueChange => {
            let spec = node.widget.value_property()?;
            // Checkboxes are sometimes clicked without a value so the local
            // toggle handler runs.
            (node.widget != WidgetType::CheckBox || rng.random_bool(0.5))
                .then(|| random_value(rng, spec.kind))
        }
        EventKind::Action => None,
    };
    Some(UserEvent {
        target: node.id,
        event,
        payload,
    })
}

/// Window, one panel, a button and labels: `components` components in all.
/// Clicking the button sets the text of the first label.
pub fn wide_app(components: usize) -> ApplicationDefinition {
    assert!(components >= 4);
    ApplicationDefinition::new(move |ui| {
        let root = ui.root();
        let panel = ui.add(root, WidgetType::Panel, [("style", "grid".into())])?;
        let button = ui.add(panel, WidgetType::Button, [("text", "Change".into())])?;
        let labels = (0..components - 3)
            .map(|i| {
                ui.add(
                    panel,
                    WidgetType::Label,
                    [("text", format!("Label {i}").into())],
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        let first = labels[0];
        ui.add_listener(button, EventKind::Action, move |ui, _| {
            ui.set_property(first, "text", "changed")
        })?;
        Ok(())
    })
}

/// Number of components reachable from the root, counted by a plain
/// breadth-first walk over parent/child links.
pub fn reachable_count(tree: &ComponentTree) -> usize {
    let mut seen = std::collections::HashSet::new();
    let mut queue = std::collections::VecDeque::from([tree.root()]);
    while let Some(c) = queue.pop_front() {
        if seen.insert(c) {
            queue.extend(tree.children(c).iter().copied());
        }
    }
    seen.len()
}

fn random_id(rng: &mut impl Rng) -> ComponentId {
    ComponentId::new(rng.random_range(1..500)).unwrap()
}

fn random_text(rng: &mut impl Rng) -> String {
    if rng.random_bool(0.2) {
        // Arbitrary scalar values, including control characters.
        (0..rng.random_range(0..6))
            .map(|_| rng.random::<char>())
            .collect()
    } else {
        WORDS.choose(rng).unwrap().to_string()
    }
}

fn any_value(rng: &mut impl Rng) -> PropertyValue {
    match rng.random_range(0..6) {
        0 => PropertyValue::Text(random_text(rng)),
        1 => PropertyValue::Integer(match rng.random_range(0..3) {
            0 => rng.random(),
            1 => i64::MIN,
            _ => rng.random_range(-10..10),
        }),
        2 => PropertyValue::Real(match rng.random_range(0..3) {
            0 => Some(f64::from_bits(rng.random()))
                .filter(|r| r.is_finite())
                .unwrap_or(0.0),
            1 => rng.random_range(-1.0..1.0),
            _ => f64::from(rng.random_range(-5i32..5)),
        }),
        3 => PropertyValue::Boolean(rng.random()),
        4 => PropertyValue::Null,
        _ => PropertyValue::TextList(
            (0..rng.random_range(0..4))
                .map(|_| random_text(rng))
                .collect(),
        ),
    }
}

fn random_events(rng: &mut impl Rng, widget: WidgetType) -> std::collections::BTreeSet<EventKind> {
    widget
        .events()
        .iter()
        .copied()
        .filter(|_| rng.random_bool(0.5))
        .collect()
}

fn random_node(rng: &mut impl Rng, depth: u32) -> crate::model::RepresentationalNode {
    let widget = random_widget(rng);
    let mut properties = std::collections::BTreeMap::new();
    for p in widget.properties() {
        if rng.random_bool(0.7) {
            properties.insert(p.name.to_owned(), any_value(rng));
        }
    }
    let children = if widget.is_container() && depth > 0 {
        (0..rng.random_range(0..3))
            .map(|_| random_node(rng, depth - 1))
            .collect()
    } else {
        Vec::new()
    };
    crate::model::RepresentationalNode {
        id: random_id(rng),
        widget,
        properties,
        listened: random_events(rng, widget),
        children,
    }
}

fn random_fragment(rng: &mut impl Rng) -> Option<String> {
    rng.random_bool(0.3).then(|| random_text(rng))
}

/// A structurally valid DELTA-CLIENT message. Values are not checked
/// against any tree.
pub fn random_client_message(rng: &mut impl Rng) -> crate::codec::DeltaClientMessage {
    use crate::codec::{ActionRequest, DeltaClientMessage, StateWrite};
    loop {
        let msg = DeltaClientMessage {
            session: if rng.random_bool(0.1) {
                String::new()
            } else {
                format!("{:032x}", rng.random::<u128>())
            },
            seq: if rng.random_bool(0.1) {
                rng.random()
            } else {
                rng.random_range(0..100)
            },
            state_changes: (0..rng.random_range(0..4))
                .map(|_| StateWrite {
                    id: random_id(rng),
                    name: random_text(rng),
                    value: any_value(rng),
                })
                .collect(),
            action: rng.random_bool(0.6).then(|| ActionRequest {
                id: random_id(rng),
                event: if rng.random() {
                    EventKind::Action
                } else {
                    EventKind::ValueChange
                },
                payload: rng.random_bool(0.3).then(|| any_value(rng)),
            }),
            fragment: random_fragment(rng),
        };
        if msg.seq == 0 || msg.has_content() {
            return msg;
        }
    }
}

/// A structurally valid DELTA-SERVER message with every directive kind.
pub fn random_server_message(rng: &mut impl Rng) -> crate::codec::DeltaServerMessage {
    use crate::update::DeltaDirective;
    crate::codec::DeltaServerMessage {
        session: format!("{:032x}", rng.random::<u128>()),
        ack: rng.random_range(0..100),
        directives: (0..rng.random_range(0..5))
            .map(|_| match rng.random_range(0..4) {
                0 => DeltaDirective::Create {
                    parent: rng.random_bool(0.8).then(|| random_id(rng)),
                    index: rng.random_range(0..10),
                    node: random_node(rng, 3),
                },
                1 => DeltaDirective::Remove { id: random_id(rng) },
                2 => DeltaDirective::SetProperty {
                    id: random_id(rng),
                    name: random_text(rng),
                    value: any_value(rng),
                },
                _ => {
                    let widget = random_widget(rng);
                    DeltaDirective::SetListeners {
                        id: random_id(rng),
                        listened: random_events(rng, widget),
                    }
                }
            })
            .collect(),
        fragment: random_fragment(rng),
    }
}

/// Outcome of [`drive_random_session`].
#[derive(Debug, Clone)]
pub struct DriveReport {
    pub session: String,
    pub events: usize,
    pub round_trips: usize,
    /// Every message sent, in order.
    pub messages: Vec<crate::codec::DeltaClientMessage>,
    pub engine: crate::client::Engine,
}

/// Bootstraps a headless engine against `runtime` and feeds it up to
/// `max_events` random user events and navigations. After every round-trip
/// the engine model is compared with the full render of the server tree.
pub fn drive_random_session(
    runtime: &crate::session::Runtime,
    seed: u64,
    max_events: usize,
) -> Result<DriveReport, String> {
    use crate::client::Engine;
    let mut rng = StdRng::seed_from_u64(seed);
    let views: Vec<String> = runtime.app().view_names().map(str::to_owned).collect();
    let start = (!views.is_empty() && rng.random_bool(0.3))
        .then(|| views.choose(&mut rng).unwrap().clone());
    let (session, bootstrap) = runtime
        .create_session(start.as_deref())
        .map_err(|e| format!("create_session: {e}"))?;
    let mut engine = Engine::bootstrap(&bootstrap, None).map_err(|e| format!("bootstrap: {e}"))?;
    let check = |engine: &Engine, step: usize| -> Result<(), String> {
        let server = runtime
            .render(session.as_str())
            .map_err(|e| e.to_string())?;
        if engine.model() != &server {
            return Err(format!(
                "seed {seed} step {step}: client model diverged from server"
            ));
        }
        Ok(())
    };
    check(&engine, 0)?;
    let mut report = DriveReport {
        session: session.to_string(),
        events: 0,
        round_trips: 0,
        messages: Vec::new(),
        engine: engine.clone(),
    };
    let events = rng.random_range(1..=max_events);
    for step in 1..=events {
        let msg = if !views.is_empty() && rng.random_bool(0.1) {
            Some(
                engine
                    .navigate(views.choose(&mut rng).unwrap())
                    .map_err(|e| e.to_string())?,
            )
        } else {
            let Some(ev) = random_event(&mut rng, engine.model()) else {
                break;
            };
            engine
                .simulate_event(ev)
                .map_err(|e| format!("seed {seed} step {step}: {e}"))?
        };
        report.events += 1;
        if let Some(msg) = msg {
            let response = runtime
                .process(session.as_str(), &msg)
                .map_err(|e| format!("seed {seed} step {step}: process: {e}"))?;
            engine
                .apply_server_delta(&response)
                .map_err(|e| format!("seed {seed} step {step}: apply: {e}"))?;
            report.messages.push(msg);
            report.round_trips += 1;
            check(&engine, step)?;
        }
    }
    report.engine = engine;
    Ok(report)
}
