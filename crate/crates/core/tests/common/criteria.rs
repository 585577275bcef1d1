//! Acceptance criteria as reusable checks. Each returns a one-line summary on
//! success and a description of the first discrepancy on failure.

use std::collections::HashSet;
use std::sync::Arc;
use std::time::{Duration, Instant};

use imgkg_core::constraints::{compile_constraint, validate_output, PropertyAssignment, PropertyValue, ValidationError};
use imgkg_core::eval::{
    accuracy_at, categorical_accuracy, default_columns, error_ratio, load_annotations, run_benchmark, score_categorical,
    score_numeric, EvalPair, MetricsTable, Truth,
};
use imgkg_core::graph::{merge_subgraph, normalize_label, subgraph_from_assignment, InventoryGraph, ProductSubgraph, IS_A};
use imgkg_core::model_client::{FixtureStore, ModelBackend, RecordingBackend, ReplayBackend};
use imgkg_core::persist::{self, ExporterRegistry};
use imgkg_core::pipeline::{
    enroll, expand_hierarchy, prepare, Backends, EnrollmentConfig, EnrollmentMode, ProductInput, StrategyRegistry,
};
use imgkg_core::schema::{default_schema, DataType, PropertySchema, TypeKind};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex_syntax::hir::Hir;

use super::fixtures_dir;
use super::products::{enroll_fixture_set, open_replay, replay_backends, LLM_MODEL, VLM_MODEL};
use super::sampler::{parse, sample_string};
use super::synthetic::{self, SyntheticBackend};

pub type Outcome = Result<String, String>;

fn ensure(cond: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(message())
    }
}

fn within(elapsed: Duration, budget: Duration, what: &str) -> Result<(), String> {
    ensure(elapsed < budget, || format!("{what} took {elapsed:?}, budget {budget:?}"))
}

/// `v / 10^scale` written as a plain decimal.
fn decimal_text(v: i128, scale: u32) -> String {
    let base = 10i128.pow(scale);
    let sign = if v < 0 { "-" } else { "" };
    let v = v.abs();
    format!("{sign}{}.{:0width$}", v / base, v % base, width = scale as usize)
}

/// Hundredths of a percent, rounded half up, by remainder inspection.
fn oracle_hundredths(correct: usize, total: usize) -> u32 {
    let scaled = correct as u64 * 10_000;
    let (q, r) = (scaled / total as u64, scaled % total as u64);
    (q + u64::from(2 * r >= total as u64)) as u32
}

/// Randomized recount of numeric and categorical accuracy against integer
/// arithmetic, including predictions exactly on the threshold.
pub fn metric_oracle(seed: u64, cases: usize) -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Thresholds in basis points.
    let thresholds: [(i128, f64); 4] = [(100, 0.01), (500, 0.05), (1000, 0.1), (2000, 0.2)];
    let mut boundary_cases = 0;
    for case in 0..cases {
        let (tb, t) = thresholds[rng.gen_range(0..thresholds.len())];
        let n = rng.gen_range(1..=25);
        let mut pairs = Vec::with_capacity(n);
        let mut correct = 0;
        for _ in 0..n {
            // Ground truth g / 10^4, prediction p / 10^8.
            let g: i128 = rng.gen_range(1..=50_000);
            let g8 = g * 10_000;
            let sign = if rng.gen_bool(0.5) { 1 } else { -1 };
            let p8 = match rng.gen_range(0..20) {
                0..=4 => {
                    boundary_cases += 1;
                    Some(g8 + sign * g * tb)
                }
                5..=6 => Some(g8 + sign * (g * tb - 1)),
                7 | 8 => None,
                _ => Some(rng.gen_range(0..=2 * g8)),
            };
            // |p - gt| / gt < tb / 10^4  <=>  |p8 - g8| < tb * g
            let is_correct = p8.is_some_and(|p| (p - g8).abs() < tb * g);
            correct += usize::from(is_correct);
            let predicted = match p8 {
                Some(p) => PropertyValue::Float(decimal_text(p, 8).parse().unwrap()),
                None if rng.gen_bool(0.5) => PropertyValue::Absent,
                None => PropertyValue::Unparsed("about half a kilo".into()),
            };
            pairs.push(EvalPair {
                property: "Weight".into(),
                predicted,
                truth: Truth::Number(decimal_text(g, 4).parse().unwrap()),
            });
        }
        let got = accuracy_at(t, &pairs).map_err(|e| format!("numeric case {case}: {e}"))?;
        let stats = score_numeric(t, &pairs).map_err(|e| format!("numeric case {case}: {e}"))?;
        ensure(got.hundredths() == oracle_hundredths(correct, n) && stats.correct == correct && stats.total() == n, || {
            format!("numeric case {case}: got {got} ({stats:?}), oracle {correct}/{n}")
        })?;
    }

    let labels = ["Red", "Blue", "Light Blue", "Baby Blue", "Others"];
    for case in 0..cases {
        let n = rng.gen_range(1..=25);
        let mut pairs = Vec::with_capacity(n);
        let mut correct = 0;
        for _ in 0..n {
            let truth = labels[rng.gen_range(0..labels.len())];
            let pick = labels[rng.gen_range(0..labels.len())];
            let shown = match rng.gen_range(0..3) {
                0 => pick.to_string(),
                1 => pick.to_lowercase(),
                _ => pick.to_uppercase(),
            };
            let predicted = match rng.gen_range(0..10) {
                0 => PropertyValue::Absent,
                1 => PropertyValue::Unparsed(shown),
                _ => PropertyValue::Choice(shown),
            };
            correct += usize::from(predicted.as_label().is_some_and(|p| p.to_lowercase() == truth.to_lowercase()));
            pairs.push(EvalPair {
                property: "Primary Package Color".into(),
                predicted,
                truth: Truth::Label(truth.into()),
            });
        }
        let got = categorical_accuracy(&pairs).map_err(|e| format!("categorical case {case}: {e}"))?;
        let stats = score_categorical(&pairs).map_err(|e| format!("categorical case {case}: {e}"))?;
        ensure(got.hundredths() == oracle_hundredths(correct, n) && stats.correct == correct, || {
            format!("categorical case {case}: got {got}, oracle {correct}/{n}")
        })?;
    }

    let on_threshold = EvalPair {
        property: "Weight".into(),
        predicted: PropertyValue::Float(1.05),
        truth: Truth::Number(1.0),
    };
    let strict = accuracy_at(0.05, &[on_threshold]).map_err(|e| e.to_string())?;
    ensure(strict.hundredths() == 0, || format!("e = threshold scored {strict}, expected 0.00"))?;
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(1), "metric oracle")?;
    Ok(format!(
        "{cases} numeric + {cases} categorical cases agree exactly ({boundary_cases} on-threshold predictions); {elapsed:.1?}"
    ))
}

pub fn error_ratio_examples() -> Outcome {
    for (pred, gt, expected) in [(1.05, 1.0, 0.05), (1.0, 1.0, 0.0), (0.0, 2.0, 1.0)] {
        let got = error_ratio(pred, gt).map_err(|e| e.to_string())?;
        ensure(got == expected, || format!("error_ratio({pred}, {gt}) = {got}, expected {expected}"))?;
    }
    Ok("(1.05,1.0)→0.05, (1.0,1.0)→0.0, (0.0,2.0)→1.0".into())
}

/// The expected rejection of one corrupted output.
#[derive(Debug)]
enum Expect {
    Missing(String),
    Extra(String),
    Type(String),
    Choice(String),
    Malformed,
}

impl Expect {
    fn matches(&self, err: &ValidationError) -> bool {
        match (self, err) {
            (Expect::Missing(f), ValidationError::MissingField(g))
            | (Expect::Extra(f), ValidationError::ExtraField(g))
            | (Expect::Type(f), ValidationError::TypeMismatch { field: g, .. })
            | (Expect::Choice(f), ValidationError::UnknownChoice { field: g, .. }) => f == g,
            (Expect::Malformed, ValidationError::MalformedObject(_)) => true,
            _ => false,
        }
    }
}

fn ws(rng: &mut impl Rng) -> &'static str {
    [" ", "", "\n", "\t", "  ", "\r\n"][rng.gen_range(0..6)]
}

fn render(entries: &[(String, String)], rng: &mut impl Rng) -> String {
    let mut out = format!("{}{{", ws(rng));
    for (i, (key, value)) in entries.iter().enumerate() {
        if i > 0 {
            out.push_str(&format!("{},", ws(rng)));
        }
        out.push_str(&format!("{}{}{}:{}{}", ws(rng), serde_json::to_string(key).unwrap(), ws(rng), ws(rng), value));
    }
    out.push_str(&format!("{}}}{}", ws(rng), ws(rng)));
    out
}

fn names_of(schema: &PropertySchema, kinds: &[TypeKind]) -> Vec<String> {
    schema
        .all_properties()
        .filter(|p| kinds.contains(&p.kind()))
        .map(|p| p.name.clone())
        .collect()
}

fn mutate(
    kind: usize,
    mut entries: Vec<(String, String)>,
    schema: &PropertySchema,
    rng: &mut impl Rng,
) -> (String, Expect) {
    let pick = |names: Vec<String>, rng: &mut ChaCha8Rng| names[rng.gen_range(0..names.len())].clone();
    let mut local = ChaCha8Rng::seed_from_u64(rng.gen());
    let index_of = |entries: &[(String, String)], name: &str| entries.iter().position(|(k, _)| k == name).unwrap();
    let set = |entries: &mut Vec<(String, String)>, name: &str, value: &str| {
        let i = index_of(entries, name);
        entries[i].1 = value.to_string();
    };
    let expect = match kind {
        0 => {
            let i = local.gen_range(0..entries.len());
            Expect::Missing(entries.remove(i).0)
        }
        1 => {
            let at = local.gen_range(0..=entries.len());
            entries.insert(at, ("Shelf Life".into(), "\"2 years\"".into()));
            Expect::Extra("Shelf Life".into())
        }
        2 => {
            let i = local.gen_range(0..entries.len());
            entries[i].0.push_str(" Label");
            Expect::Extra(entries[i].0.clone())
        }
        3 => {
            let f = pick(names_of(schema, &[TypeKind::Float, TypeKind::Int]), &mut local);
            set(&mut entries, &f, "\"twelve\"");
            Expect::Type(f)
        }
        4 => {
            let f = pick(names_of(schema, &[TypeKind::Str]), &mut local);
            set(&mut entries, &f, "42");
            Expect::Type(f)
        }
        5 => {
            let f = pick(names_of(schema, &[TypeKind::Str]), &mut local);
            set(&mut entries, &f, "\"\"");
            Expect::Type(f)
        }
        6 => {
            let f = pick(names_of(schema, &[TypeKind::Str]), &mut local);
            set(&mut entries, &f, &format!("\"{}\"", "x".repeat(513)));
            Expect::Type(f)
        }
        7 => {
            let f = pick(names_of(schema, &[TypeKind::Choices]), &mut local);
            set(&mut entries, &f, "\"Plaid\"");
            Expect::Choice(f)
        }
        8 => {
            let f = pick(names_of(schema, &[TypeKind::Choices]), &mut local);
            set(&mut entries, &f, "null");
            Expect::Type(f)
        }
        9 => {
            let f = pick(names_of(schema, &[TypeKind::Float, TypeKind::Int]), &mut local);
            set(&mut entries, &f, "[1.5]");
            Expect::Type(f)
        }
        10 => {
            let i = local.gen_range(0..entries.len());
            let dup = entries[i].clone();
            entries.insert(i + 1, dup);
            Expect::Malformed
        }
        _ => {
            let text = render(&entries, rng);
            let text = match local.gen_range(0..3) {
                0 => text.trim_end().trim_end_matches('}').to_string(),
                1 => format!("{} trailing", text.trim_end()),
                _ => format!("[{text}]"),
            };
            return (text, Expect::Malformed);
        }
    };
    (render(&entries, rng), expect)
}

const MUTATION_KINDS: usize = 12;

/// Pattern-directed samples must validate; single corruptions must be
/// rejected by both the pattern and the validator, with the right error.
pub fn constraint_soundness(seed: u64, samples: usize) -> Outcome {
    let start = Instant::now();
    let schema = default_schema();
    let constraint = compile_constraint(&schema);
    let whole = parse(constraint.rendered_pattern());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..samples {
        let text = sample_string(&whole, &mut rng);
        ensure(constraint.matches(&text), || format!("sample {i} does not match its own pattern: {text:?}"))?;
        let assignment = validate_output(&text, &schema).map_err(|e| format!("sample {i} rejected: {e}: {text:?}"))?;
        ensure(assignment.values.len() == schema.len(), || format!("sample {i}: wrong value count"))?;
    }

    let fields: Vec<(String, Hir)> = constraint
        .field_patterns()
        .iter()
        .map(|(name, pattern)| (name.clone(), parse(&format!("^{pattern}$"))))
        .collect();
    for i in 0..samples {
        let entries: Vec<(String, String)> = fields.iter().map(|(n, h)| (n.clone(), sample_string(h, &mut rng))).collect();
        let intact = render(&entries, &mut rng);
        ensure(constraint.matches(&intact) && validate_output(&intact, &schema).is_ok(), || {
            format!("unmutated sample {i} rejected: {intact:?}")
        })?;
        let kind = i % MUTATION_KINDS;
        let (text, expect) = mutate(kind, entries, &schema, &mut rng);
        ensure(!constraint.matches(&text), || format!("mutation {kind} accepted by the pattern: {text:?}"))?;
        match validate_output(&text, &schema) {
            Ok(_) => return Err(format!("mutation {kind} accepted by the validator: {text:?}")),
            Err(e) if expect.matches(&e) => {}
            Err(e) => return Err(format!("mutation {kind}: expected {expect:?}, got {e:?} for {text:?}")),
        }
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(10), "constraint soundness")?;
    Ok(format!("{samples}/{samples} samples accepted, {samples}/{samples} mutations rejected with the expected error; {elapsed:.1?}"))
}

pub fn default_schema_fidelity() -> Outcome {
    let s = default_schema();
    let names: Vec<&str> = s.all_properties().map(|p| p.name.as_str()).collect();
    let expected = [
        "Product Name",
        "Category",
        "Brand",
        "Price",
        "Primary Package Color",
        "Package Material",
        "Package Shape",
        "Weight",
    ];
    ensure(names == expected, || format!("properties {names:?}"))?;
    let count = |n: &str| s.property(n).and_then(|p| p.data_type.choices()).map_or(0, <[String]>::len);
    let counts = [count("Category"), count("Primary Package Color"), count("Package Material"), count("Package Shape")];
    ensure(counts == [16, 21, 13, 11], || format!("choice counts {counts:?}"))?;
    let unit = |n: &str| s.property(n).and_then(|p| p.unit.clone());
    ensure(unit("Price").as_deref() == Some("USD") && unit("Weight").as_deref() == Some("kg"), || "units".into())?;
    ensure(s.property("Price").is_some_and(|p| p.data_type == DataType::Float), || "Price is not float".into())?;
    ensure(s.root().name == "Product Name" && s.root().kind() == TypeKind::Str, || "root".into())?;
    Ok("8 properties, choices 16/21/13/11, units USD/kg, root \"Product Name\"".into())
}

const NAMES: [&str; 12] = [
    "Choco Crunch", "Berry Blast", "Oat Delight", "Sea Salt Crisps", "Lemon Fizz", "Mint Drops",
    "Paw Treats", "Glow Serum", "Desk Buddy", "Trail Mix", "Honey Loops", "Night Tea",
];
const BRANDS: [&str; 5] = ["Acme", "Northwind", "Globex", "Initech", "Umbrella"];
const CATEGORIES: [&str; 4] = ["Food and Beverages", "Pet Products", "Beauty and Personal Care", "Office and School Supplies"];
const INTERIOR: [&str; 6] = ["Snacks", "Sweets", "Bars", "Drinks", "Treats", "Skin Care"];

fn vary_case(s: &str, rng: &mut impl Rng) -> String {
    match rng.gen_range(0..4) {
        0 => s.to_lowercase(),
        1 => s.to_uppercase(),
        _ => s.to_string(),
    }
}

fn random_subgraph(schema: &PropertySchema, rng: &mut impl Rng) -> ProductSubgraph {
    let name = vary_case(NAMES[rng.gen_range(0..NAMES.len())], rng);
    let category = CATEGORIES[rng.gen_range(0..CATEGORIES.len())];
    let price = [1.99, 2.5, 3.49][rng.gen_range(0..3)];
    let color = ["Red", "Blue", "White"][rng.gen_range(0..3)];
    let material = ["Plastic", "Paper"][rng.gen_range(0..2)];
    let shape = ["Rectangular", "Oval", "Flat"][rng.gen_range(0..3)];
    let weight = [0.1, 0.25, 0.5, 1.0][rng.gen_range(0..4)];
    let json = serde_json::json!({
        "Product Name": name,
        "Category": vary_case(category, rng),
        "Brand": vary_case(BRANDS[rng.gen_range(0..BRANDS.len())], rng),
        "Price": price,
        "Primary Package Color": color,
        "Package Material": material,
        "Package Shape": shape,
        "Weight": weight,
    });
    let assignment: PropertyAssignment = validate_output(&json.to_string(), schema).expect("synthetic outputs are valid");
    let chains: Vec<Vec<String>> = (0..rng.gen_range(0..=3))
        .map(|_| {
            let depth = rng.gen_range(0..=2);
            let mut chain = vec![vary_case(&name, rng)];
            chain.extend(INTERIOR.choose_multiple(rng, depth).map(|l| vary_case(l, rng)));
            chain.push(vary_case(category, rng));
            chain
        })
        .collect();
    subgraph_from_assignment(&assignment, &chains, schema).expect("synthetic subgraphs build")
}

fn merge_all(subgraphs: &[&ProductSubgraph]) -> InventoryGraph {
    let mut inv = InventoryGraph::new();
    for s in subgraphs {
        merge_subgraph(&mut inv, s).expect("merge succeeds");
    }
    inv
}

/// Duplicate-free index, normalized keys that match display labels, and
/// degree counters consistent with the edge set.
fn index_sound(inv: &InventoryGraph) -> Result<(), String> {
    let mut seen = HashSet::new();
    for (id, record) in inv.nodes() {
        let key = normalize_label(&record.display).map_err(|e| e.to_string())?;
        ensure(key == id.normalized, || format!("{id} displays as {:?}", record.display))?;
        ensure(seen.insert((id.kind, key)), || format!("duplicate node {id}"))?;
        let out = inv.edges().filter(|(e, _)| e.from == *id).count();
        let inc = inv.edges().filter(|(e, _)| e.to == *id).count();
        ensure((out, inc) == (record.out_degree, record.in_degree), || format!("degree counters of {id}"))?;
    }
    for (edge, _) in inv.edges() {
        ensure(inv.node(&edge.from).is_some() && inv.node(&edge.to).is_some(), || format!("dangling edge {edge:?}"))?;
    }
    Ok(())
}

pub fn merge_properties(seed: u64, sets: usize, products: usize) -> Outcome {
    let start = Instant::now();
    let schema = default_schema();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut conflicts_seen = 0;
    for set in 0..sets {
        let subgraphs: Vec<ProductSubgraph> = (0..products).map(|_| random_subgraph(&schema, &mut rng)).collect();
        let order: Vec<&ProductSubgraph> = subgraphs.iter().collect();
        let mut inv = merge_all(&order);
        index_sound(&inv).map_err(|e| format!("set {set}: {e}"))?;
        let (nodes, edges) = (inv.node_ids(), inv.edge_ids());

        let snapshot = inv.clone();
        for s in &order {
            let report = merge_subgraph(&mut inv, s).map_err(|e| e.to_string())?;
            ensure(report.nodes_added == 0 && report.edges_added == 0, || format!("set {set}: re-merge added items"))?;
            conflicts_seen += report.conflicts.len();
        }
        ensure(inv == snapshot, || format!("set {set}: re-merge changed the inventory"))?;

        for round in 0..5 {
            let mut shuffled = order.clone();
            shuffled.shuffle(&mut rng);
            let other = merge_all(&shuffled);
            index_sound(&other).map_err(|e| format!("set {set} order {round}: {e}"))?;
            ensure(other.node_ids() == nodes && other.edge_ids() == edges, || {
                format!("set {set}: key sets depend on merge order (round {round})")
            })?;
        }
        let is_a = edges.iter().filter(|e| e.label == IS_A).count();
        ensure(is_a > 0, || format!("set {set} has no hierarchy edges"))?;
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(30), "merge properties")?;
    Ok(format!(
        "{sets} sets × {products} products: idempotent, order-insensitive over 5 shuffles, 0 duplicate keys ({conflicts_seen} kind conflicts recorded); {elapsed:.1?}"
    ))
}

pub fn hierarchy_example() -> Outcome {
    let store = open_replay(&fixtures_dir().join("enroll").join("replay"));
    let llm = ReplayBackend::new(LLM_MODEL, store);
    let mut log = Vec::new();
    let chains = expand_hierarchy("Dark Chocolate Bar", "Food and Beverages", &llm, 2, 3, 0.8, &mut log).map_err(|e| e.to_string())?;
    let expected = vec![vec!["Dark Chocolate Bar", "Dark Chocolate", "Chocolate", "Food and Beverages"]];
    ensure(chains == expected, || format!("chains {chains:?}"))?;
    Ok(chains[0].join(" → "))
}

pub fn end_to_end_replay(expected_nodes: usize, expected_edges: usize) -> Outcome {
    let mut first = InventoryGraph::new();
    enroll_fixture_set(&mut first, EnrollmentMode::Full);
    let mut second = InventoryGraph::new();
    enroll_fixture_set(&mut second, EnrollmentMode::Full);
    let counts = (first.node_count(), first.edge_count());
    ensure(counts == (expected_nodes, expected_edges), || {
        format!("{counts:?} nodes/edges, expected ({expected_nodes}, {expected_edges})")
    })?;
    let doc = persist::save(&first);
    ensure(doc == persist::save(&second), || "canonical documents differ between runs".into())?;
    let mut added = (0, 0);
    for (_, report) in enroll_fixture_set(&mut first, EnrollmentMode::Full) {
        added.0 += report.nodes_added;
        added.1 += report.edges_added;
    }
    ensure(added == (0, 0) && persist::save(&first) == doc, || format!("re-enrollment added {added:?}"))?;
    Ok(format!(
        "{} nodes, {} edges, byte-identical across runs ({} bytes), re-enrollment adds 0/0",
        counts.0,
        counts.1,
        doc.len()
    ))
}

fn mean(d: &[Duration]) -> Duration {
    d.iter().sum::<Duration>() / d.len() as u32
}

/// Enrolls `n` synthetic products one by one through replay and compares the
/// mean wall time of the last ten with the first ten. Also merges one probe
/// subgraph into the inventory at size 10 and size `n` and compares the
/// number of node and edge operations.
pub fn scaling(n: usize) -> Outcome {
    let start = Instant::now();
    let schema = default_schema();
    let strategies = StrategyRegistry::with_defaults();
    let config = EnrollmentConfig::default();
    let store = Arc::new(FixtureStore::in_memory());
    let recording = |model: &str| -> ModelBackend {
        Arc::new(RecordingBackend::new(Arc::new(SyntheticBackend::new(model)), store.clone()))
    };
    let recorder = Backends {
        vlm: recording(VLM_MODEL),
        llm: recording(LLM_MODEL),
    };
    // Index 0 warms caches, 1..=n are timed, n + 1 is the probe.
    let inputs: Vec<ProductInput> = (0..=n + 1)
        .map(|i| ProductInput::Image {
            bytes: synthetic::image(i),
            label: synthetic::label(i),
        })
        .collect();
    for input in &inputs {
        prepare(input, &schema, &recorder, &config, &strategies).map_err(|e| format!("recording {}: {e}", input.label()))?;
    }
    let replay = replay_backends(&store);
    let probe = prepare(&inputs[n + 1], &schema, &replay, &config, &strategies).map_err(|e| e.to_string())?.subgraph;
    enroll(&inputs[0], &schema, &mut InventoryGraph::new(), &replay, &config).map_err(|e| e.to_string())?;

    let mut inv = InventoryGraph::new();
    let mut times = Vec::with_capacity(n);
    let mut early_ops = None;
    for input in &inputs[1..=n] {
        let t = Instant::now();
        enroll(input, &schema, &mut inv, &replay, &config).map_err(|e| format!("{}: {e}", input.label()))?;
        times.push(t.elapsed());
        if times.len() == 10 {
            let report = merge_subgraph(&mut inv.clone(), &probe).map_err(|e| e.to_string())?;
            early_ops = Some((report.node_upserts, report.edge_upserts));
        }
    }
    let report = merge_subgraph(&mut inv.clone(), &probe).map_err(|e| e.to_string())?;
    let late_ops = (report.node_upserts, report.edge_upserts);
    let early_ops = early_ops.ok_or("fewer than 10 products")?;
    ensure(early_ops == late_ops, || format!("graph operations {early_ops:?} at 10 products vs {late_ops:?} at {n}"))?;

    let (first, last) = (mean(&times[..10]), mean(&times[n - 10..]));
    let ratio = last.as_secs_f64() / first.as_secs_f64();
    ensure(ratio <= 2.0, || format!("mean {last:?} over products {}–{n} vs {first:?} over 1–10 (ratio {ratio:.2})", n - 9))?;
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(300), "scaling")?;
    Ok(format!(
        "mean {first:.2?} (1–10) vs {last:.2?} ({}–{n}), ratio {ratio:.2}; {} node + {} edge ops at both sizes; inventory {} nodes; {elapsed:.1?}",
        n - 9,
        late_ops.0,
        late_ops.1,
        inv.node_count()
    ))
}

fn table(dir: &str) -> Result<MetricsTable, String> {
    let root = fixtures_dir();
    let schema = default_schema();
    let dataset = load_annotations(&root.join("bench").join("annotations.jsonl"), Some(&schema)).map_err(|e| e.to_string())?;
    let configs: Vec<EnrollmentConfig> = EnrollmentMode::ALL.iter().map(|&m| EnrollmentConfig::new(m)).collect();
    let backends = replay_backends(&open_replay(&root.join(dir).join("replay")));
    let run = run_benchmark(&dataset, &configs, &default_columns(), &schema, &backends, &StrategyRegistry::with_defaults())
        .map_err(|e| e.to_string())?;
    if let Some(failed) = run.predictions.iter().find(|p| p.error.is_some()) {
        return Err(format!("{} / {} failed: {:?}", failed.image, failed.mode, failed.error));
    }
    Ok(run.table)
}

pub fn benchmark_harness() -> Outcome {
    let oracle = table("bench")?;
    for row in &oracle.rows {
        for (column, cell) in oracle.columns.iter().zip(&row.cells) {
            ensure(cell.percent.map(|p| p.hundredths()) == Some(10_000) && cell.stats.total() == 5, || {
                format!("oracle {} / {}: {:?}", row.label, column.header(), cell)
            })?;
        }
    }
    let planted = table("bench_planted")?;
    for row in &planted.rows {
        for (column, cell) in planted.columns.iter().zip(&row.cells) {
            let expected = if column.header() == "Category" { (8_000, 4) } else { (10_000, 5) };
            let got = (cell.percent.map_or(0, |p| p.hundredths()), cell.stats.correct);
            ensure(got == expected && cell.stats.total() == 5, || {
                format!("planted {} / {}: {:?}, expected {expected:?}", row.label, column.header(), cell)
            })?;
        }
    }
    Ok(format!(
        "oracle: 100.00 in all {}×{} cells; planted: Category 80.00 (4/5) in every row, others 100.00",
        oracle.rows.len(),
        oracle.columns.len()
    ))
}

pub fn persistence() -> Outcome {
    let mut inv = InventoryGraph::new();
    enroll_fixture_set(&mut inv, EnrollmentMode::Full);
    let text = persist::save(&inv);
    let back = persist::load(&text).map_err(|e| e.to_string())?;
    ensure(back == inv, || "load(save(G)) differs from G".into())?;
    ensure(persist::save(&back) == text, || "re-save is not byte-identical".into())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join(format!("inventory.{}", persist::INVENTORY_EXTENSION));
    persist::save_file(&inv, &path).map_err(|e| e.to_string())?;
    ensure(persist::load_file(&path).map_err(|e| e.to_string())? == inv, || "file round trip differs".into())?;

    let registry = ExporterRegistry::with_defaults();
    let mut sizes = Vec::new();
    for name in registry.names() {
        let exporter = registry.get(name).expect("listed exporters exist");
        let a = exporter.export(&inv);
        let b = exporter.export(&back);
        ensure(a == b && a == exporter.export(&inv), || format!("{name} export is not byte-identical"))?;
        sizes.push(format!("{name} {} bytes", a.len()));
    }
    let statements = registry.get("statements").expect("registered").export(&inv);
    let count = statements.lines().filter(|l| l.trim_end().ends_with(';')).count();
    ensure(count == inv.node_count() + inv.edge_count(), || {
        format!("{count} statements for {} nodes + {} edges", inv.node_count(), inv.edge_count())
    })?;
    Ok(format!("load(save(G)) = G, re-save byte-identical; double export identical ({})", sizes.join(", ")))
}
