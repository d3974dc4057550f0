use std::collections::HashSet;
use std::sync::Arc;

use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;
use spiar_core::component::Listener;
use spiar_core::testkit::{random_app, reachable_count};
use spiar_core::{
    ComponentError, ComponentId, ComponentTree, EventKind, PropertyValue, RepresentationalNode,
    WidgetType,
};

fn noop() -> Listener {
    Arc::new(|_, _| Ok(()))
}

const NONE: [(&str, PropertyValue); 0] = [];

#[test]
fn button_gets_defaults_and_a_fresh_id() {
    let mut tree = ComponentTree::new();
    for _ in 0..5 {
        tree.create(WidgetType::Label, NONE).unwrap();
    }
    let id = tree
        .create(WidgetType::Button, [("text", PropertyValue::from("OK"))])
        .unwrap();
    assert_eq!(id.to_string(), "c7");
    let props = tree.properties(id).unwrap();
    assert_eq!(props.len(), 2);
    assert_eq!(props["text"], PropertyValue::from("OK"));
    assert_eq!(props["enabled"], PropertyValue::Boolean(true));
}

#[test]
fn label_with_all_defaults() {
    let mut tree = ComponentTree::new();
    let id = tree.create(WidgetType::Label, NONE).unwrap();
    assert_eq!(tree.property(id, "text"), Some(&PropertyValue::from("")));
}

#[test]
fn checked_is_not_a_button_property() {
    let mut tree = ComponentTree::new();
    let err = tree
        .create(
            WidgetType::Button,
            [("checked", PropertyValue::Boolean(true))],
        )
        .unwrap_err();
    assert!(
        matches!(err, ComponentError::UnknownProperty { ref property, .. } if property == "checked")
    );
}

#[test]
fn attach_examples() {
    let mut tree = ComponentTree::new();
    let panel = tree.create(WidgetType::Panel, NONE).unwrap();
    tree.attach(tree.root(), panel, 0).unwrap();
    let label = tree.create(WidgetType::Label, NONE).unwrap();
    tree.attach(panel, label, 0).unwrap();
    let button = tree.create(WidgetType::Button, NONE).unwrap();
    assert!(matches!(
        tree.attach(panel, button, 5),
        Err(ComponentError::IndexOutOfRange { index: 5, len: 1 })
    ));
    assert!(matches!(
        tree.attach(label, button, 0),
        Err(ComponentError::NotAContainer(_))
    ));
    tree.attach(panel, button, 0).unwrap();
    assert_eq!(tree.children(panel), &[button, label]);
    assert!(matches!(
        tree.attach(panel, button, 0),
        Err(ComponentError::NotDetached(_))
    ));
}

#[test]
fn detaching_a_panel_drops_its_descendants() {
    let mut tree = ComponentTree::new();
    let panel = tree.create(WidgetType::Panel, NONE).unwrap();
    tree.attach(tree.root(), panel, 0).unwrap();
    let inner = tree.create(WidgetType::Panel, NONE).unwrap();
    tree.attach(panel, inner, 0).unwrap();
    for _ in 0..2 {
        let l = tree.create(WidgetType::Label, NONE).unwrap();
        tree.attach(inner, l, 0).unwrap();
    }
    let before = reachable_count(&tree);
    tree.detach(panel).unwrap();
    assert_eq!(before - reachable_count(&tree), 4);
    assert_eq!(tree.len(), reachable_count(&tree));
    assert!(matches!(
        tree.detach(tree.root()),
        Err(ComponentError::CannotDetachRoot)
    ));
}

#[test]
fn set_property_examples() {
    let mut tree = ComponentTree::new();
    let button = tree.create(WidgetType::Button, NONE).unwrap();
    tree.set_property(button, "text", "Cancel".into()).unwrap();
    let once = tree.render_subtree(button);
    tree.set_property(button, "text", "Cancel".into()).unwrap();
    assert_eq!(tree.render_subtree(button), once);
    let field = tree.create(WidgetType::TextField, NONE).unwrap();
    assert!(matches!(
        tree.set_property(field, "value", PropertyValue::Integer(42)),
        Err(ComponentError::PropertyTypeMismatch { .. })
    ));
}

#[test]
fn listener_vocabulary() {
    let mut tree = ComponentTree::new();
    let button = tree.create(WidgetType::Button, NONE).unwrap();
    tree.add_listener(button, EventKind::Action, noop())
        .unwrap();
    assert_eq!(
        tree.listened_events(button).into_iter().collect::<Vec<_>>(),
        [EventKind::Action]
    );
    let field = tree.create(WidgetType::TextField, NONE).unwrap();
    tree.add_listener(field, EventKind::ValueChange, noop())
        .unwrap();
    assert_eq!(
        tree.listened_events(field).into_iter().collect::<Vec<_>>(),
        [EventKind::ValueChange]
    );
    let label = tree.create(WidgetType::Label, NONE).unwrap();
    assert!(matches!(
        tree.add_listener(label, EventKind::Action, noop()),
        Err(ComponentError::UnknownEventType { .. })
    ));
}

/// Independent structural check of a rendered node against the tree.
fn assert_mirrors(tree: &ComponentTree, node: &RepresentationalNode) {
    assert_eq!(tree.widget(node.id), Some(node.widget));
    assert_eq!(tree.properties(node.id), Some(&node.properties));
    assert_eq!(tree.listened_events(node.id), node.listened);
    let ids: Vec<_> = node.children.iter().map(|c| c.id).collect();
    assert_eq!(tree.children(node.id), ids.as_slice());
    for c in &node.children {
        assert_mirrors(tree, c);
    }
}

#[test]
fn render_full_counts_match_brute_force_reachability() {
    for seed in 0..200 {
        let tree = random_app(seed, 100, 0).build(None).unwrap();
        let model = tree.render_full();
        assert_eq!(model.node_count(), reachable_count(&tree), "seed {seed}");
        assert_eq!(tree.len(), reachable_count(&tree));
        assert!(reachable_count(&tree) <= 100);
        assert_mirrors(&tree, model.root().unwrap());
        assert_eq!(tree.render_full(), model, "render_full is deterministic");
    }
}

#[test]
fn render_full_is_pure() {
    let mut tree = random_app(3, 40, 0).build(None).unwrap();
    let first = tree.render_full();
    let copy = first.clone();
    let child = tree.create(WidgetType::Label, NONE).unwrap();
    tree.attach(tree.root(), child, 0).unwrap();
    assert_eq!(first, copy);
    assert_ne!(tree.render_full(), first);
}

#[derive(Debug, Clone)]
enum Op {
    Create(usize, u8),
    Attach(usize, usize, usize),
    Detach(usize),
    Set(usize, usize, u8),
    Listen(usize, bool),
    Collect,
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (any::<usize>(), any::<u8>()).prop_map(|(w, p)| Op::Create(w, p)),
        (any::<usize>(), any::<usize>(), any::<usize>()).prop_map(|(p, c, i)| Op::Attach(p, c, i)),
        any::<usize>().prop_map(Op::Detach),
        (any::<usize>(), any::<usize>(), any::<u8>()).prop_map(|(c, p, v)| Op::Set(c, p, v)),
        (any::<usize>(), any::<bool>()).prop_map(|(c, e)| Op::Listen(c, e)),
        Just(Op::Collect),
    ]
}

const WIDGETS: [WidgetType; 6] = [
    WidgetType::Panel,
    WidgetType::Label,
    WidgetType::Button,
    WidgetType::TextField,
    WidgetType::CheckBox,
    WidgetType::ListBox,
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn every_operation_sequence_keeps_the_tree_valid(ops in proptest::collection::vec(op(), 0..80)) {
        let mut tree = ComponentTree::new();
        // Every id ever handed out, including the root.
        let mut issued: Vec<ComponentId> = vec![tree.root()];
        let mut seen: HashSet<ComponentId> = issued.iter().copied().collect();
        let mut rng = StdRng::seed_from_u64(ops.len() as u64);
        for op in ops {
            let pick = |i: usize| issued[i % issued.len()];
            match op {
                Op::Create(w, p) => {
                    let widget = WIDGETS[w % WIDGETS.len()];
                    let props: Vec<(String, PropertyValue)> = widget
                        .properties()
                        .iter()
                        .filter(|_| p & 1 == 1)
                        .map(|s| (s.name.to_owned(), spiar_core::testkit::random_value(&mut rng, s.kind)))
                        .collect();
                    let id = tree.create(widget, props).unwrap();
                    prop_assert!(seen.insert(id), "id {} issued twice", id);
                    issued.push(id);
                }
                Op::Attach(p, c, i) => {
                    let (parent, child) = (pick(p), pick(c));
                    let len = tree.children(parent).len();
                    let _ = tree.attach(parent, child, i % (len + 2));
                }
                Op::Detach(c) => {
                    let _ = tree.detach(pick(c));
                }
                Op::Set(c, p, v) => {
                    let id = pick(c);
                    if let Some(widget) = tree.widget(id) {
                        let props = widget.properties();
                        if !props.is_empty() {
                            let spec = &props[p % props.len()];
                            let value = if v % 5 == 0 {
                                PropertyValue::Null
                            } else {
                                spiar_core::testkit::random_value(&mut rng, spec.kind)
                            };
                            let _ = tree.set_property(id, spec.name, value);
                        }
                    }
                }
                Op::Listen(c, action) => {
                    let event = if action { EventKind::Action } else { EventKind::ValueChange };
                    let _ = tree.add_listener(pick(c), event, noop());
                }
                Op::Collect => {
                    tree.collect_floating();
                }
            }
            prop_assert_eq!(tree.check_invariants(), Ok(()));
            prop_assert_eq!(tree.len(), reachable_count(&tree));
            prop_assert!(tree.watermark() > issued.iter().map(|i| i.number()).max().unwrap());
            // Schema closure: everything stored belongs to the widget table.
            for id in tree.subtree(tree.root()) {
                let widget = tree.widget(id).unwrap();
                for (name, value) in tree.properties(id).unwrap() {
                    let spec = widget.property(name);
                    prop_assert!(spec.is_some_and(|s| s.kind == value.kind()));
                }
                for e in tree.listened_events(id) {
                    prop_assert!(widget.emits(e));
                }
            }
        }
        let a = tree.render_full();
        prop_assert_eq!(a.clone(), tree.render_full());
        prop_assert_eq!(a.node_count(), tree.len());
    }
}
