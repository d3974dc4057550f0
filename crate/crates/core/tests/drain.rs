use std::collections::HashSet;

use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use spiar_core::testkit::{random_app, random_effect};
use spiar_core::update::UpdateError;
use spiar_core::{
    ComponentId, ComponentTree, DeltaDirective, DirtyLog, Event, EventKind, PropertyValue,
    RepresentationalModel, StateChange, Ui, WidgetType,
};

const NONE: [(&str, PropertyValue); 0] = [];

fn ids_in(node: &spiar_core::RepresentationalNode, out: &mut Vec<ComponentId>) {
    out.push(node.id);
    for c in &node.children {
        ids_in(c, out);
    }
}

fn touched(changes: &[StateChange]) -> HashSet<ComponentId> {
    let mut out = HashSet::new();
    for c in changes {
        match c {
            StateChange::PropertySet { id, .. }
            | StateChange::ChildDetached { id }
            | StateChange::ListenersChanged { id, .. } => {
                out.insert(*id);
            }
            StateChange::ChildAttached { parent, child, .. } => {
                out.insert(*parent);
                out.insert(*child);
            }
        }
    }
    out
}

/// Runs one random cycle and checks completeness, minimality and the
/// closed-log behaviour.
fn check_cycle(seed: u64) -> Vec<&'static str> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut tree = random_app(seed, 100, 0).build(None).unwrap();
    let before = tree.render_full();
    let watermark = tree.watermark();
    let mut log = DirtyLog::new();
    log.open(&tree);
    {
        let mut ui = Ui::new(&mut tree, &mut log);
        for _ in 0..rng.random_range(1..6) {
            if rng.random_bool(0.3) {
                // Fire whatever listeners the app registered.
                let nodes = ui.tree().subtree(ui.root());
                let source = nodes[rng.random_range(0..nodes.len())];
                for kind in [EventKind::Action, EventKind::ValueChange] {
                    ui.fire(&Event {
                        source,
                        kind,
                        payload: None,
                    })
                    .unwrap();
                }
            } else {
                random_effect(&mut ui, rng.random(), 100).unwrap();
            }
        }
    }
    let changes = log.changes().to_vec();
    let directives = log.drain(&tree);
    tree.collect_floating();
    tree.check_invariants().unwrap();

    let mut model = before.clone();
    model.apply_all(&directives).unwrap();
    assert_eq!(model, tree.render_full(), "seed {seed}: {directives:#?}");

    let touched = touched(&changes);
    for d in &directives {
        assert!(
            touched.contains(&d.target()),
            "seed {seed}: untouched {}",
            d.target()
        );
        if let DeltaDirective::Create { node, .. } = d {
            let mut nested = Vec::new();
            ids_in(node, &mut nested);
            for id in nested {
                assert!(id.number() >= watermark || touched.contains(&id));
            }
        }
    }
    assert!(log.drain(&tree).is_empty());
    assert!(matches!(
        log.record(StateChange::ChildDetached { id: tree.root() }),
        Err(UpdateError::CycleClosed)
    ));
    directives.iter().map(DeltaDirective::kind).collect()
}

#[test]
fn five_hundred_random_cycles_converge_on_the_full_render() {
    let mut kinds = std::collections::BTreeMap::new();
    for seed in 0..500 {
        for kind in check_cycle(seed) {
            *kinds.entry(kind).or_insert(0) += 1;
        }
    }
    // The generator must exercise every directive kind.
    assert_eq!(kinds.len(), 4, "{kinds:?}");
}

proptest! {
    #[test]
    fn any_cycle_converges(seed in any::<u64>()) {
        check_cycle(seed);
    }
}

fn label_tree() -> (ComponentTree, ComponentId, ComponentId) {
    let mut tree = ComponentTree::new();
    let panel = tree.create(WidgetType::Panel, NONE).unwrap();
    tree.attach(tree.root(), panel, 0).unwrap();
    let label = tree.create(WidgetType::Label, NONE).unwrap();
    tree.attach(panel, label, 0).unwrap();
    (tree, panel, label)
}

#[test]
fn last_property_write_wins() {
    let (mut tree, _, label) = label_tree();
    let mut log = DirtyLog::new();
    log.open(&tree);
    let mut ui = Ui::new(&mut tree, &mut log);
    ui.set_property(label, "text", "A").unwrap();
    ui.set_property(label, "text", "B").unwrap();
    assert_eq!(
        log.drain(&tree),
        [DeltaDirective::SetProperty {
            id: label,
            name: "text".into(),
            value: "B".into()
        }]
    );
}

#[test]
fn attach_then_detach_is_silent() {
    let (mut tree, panel, _) = label_tree();
    let mut log = DirtyLog::new();
    log.open(&tree);
    let mut ui = Ui::new(&mut tree, &mut log);
    let field = ui.create(WidgetType::TextField, NONE).unwrap();
    ui.attach(panel, field, 0).unwrap();
    ui.set_property(field, "value", "x").unwrap();
    ui.detach(field).unwrap();
    assert_eq!(log.changes().len(), 3);
    assert!(log.drain(&tree).is_empty());
}

#[test]
fn changes_under_a_removed_component_are_dropped() {
    let (mut tree, panel, label) = label_tree();
    let mut log = DirtyLog::new();
    log.open(&tree);
    let mut ui = Ui::new(&mut tree, &mut log);
    ui.set_property(label, "text", "gone").unwrap();
    ui.detach(panel).unwrap();
    assert_eq!(log.drain(&tree), [DeltaDirective::Remove { id: panel }]);
}

#[test]
fn removes_then_creates_then_updates() {
    let (mut tree, panel, label) = label_tree();
    let button = tree.create(WidgetType::Button, NONE).unwrap();
    tree.attach(tree.root(), button, 1).unwrap();
    let before = tree.render_full();
    let mut log = DirtyLog::new();
    log.open(&tree);
    let mut ui = Ui::new(&mut tree, &mut log);
    ui.set_property(button, "text", "Go").unwrap();
    ui.add_listener(button, EventKind::Action, |_, _| Ok(()))
        .unwrap();
    let inner = ui.add(panel, WidgetType::Panel, NONE).unwrap();
    let nested = ui
        .add(inner, WidgetType::Label, [("text", "n".into())])
        .unwrap();
    ui.set_property(nested, "text", "folded").unwrap();
    let extra = ui.add(ui.root(), WidgetType::Label, NONE).unwrap();
    ui.detach(label).unwrap();
    let directives = log.drain(&tree);
    let kinds: Vec<_> = directives.iter().map(DeltaDirective::kind).collect();
    assert_eq!(
        kinds,
        [
            "remove",
            "create",
            "create",
            "set_property",
            "set_listeners"
        ]
    );
    assert_eq!(directives[1].target(), inner);
    assert_eq!(directives[2].target(), extra);
    let mut model: RepresentationalModel = before;
    model.apply_all(&directives).unwrap();
    assert_eq!(model, tree.render_full());
    assert_eq!(
        model.find(nested).unwrap().properties["text"],
        PropertyValue::from("folded")
    );
}
