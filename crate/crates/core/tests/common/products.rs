//! Authored product fixtures. Every model reply used by the replay stores
//! under `tests/fixtures` is written here; the stores are recorded from
//! these tables by [`generate_all`].

use std::fs;
use std::path::Path;
use std::sync::Arc;

use imgkg_core::model_client::{FixtureStore, ModelBackend, RecordingBackend, ReplayBackend, ScriptBook, ScriptRule, ScriptedBackend};
use imgkg_core::pipeline::{predict, prepare, Backends, EnrollmentConfig, EnrollmentMode, ProductInput, StrategyRegistry};
use imgkg_core::schema::default_schema;

use super::png;

pub const VLM_MODEL: &str = "vlm";
pub const LLM_MODEL: &str = "llm";

#[derive(Debug, Clone)]
pub struct Product {
    /// Image file name, also the product label.
    pub image: &'static str,
    pub rgb: [u8; 3],
    pub name: &'static str,
    pub category: &'static str,
    pub brand: &'static str,
    pub price: f64,
    pub color: &'static str,
    pub material: &'static str,
    pub shape: &'static str,
    pub weight: f64,
    /// First and second extraction turns; the first names the product.
    pub descriptions: [&'static str; 2],
    pub reasoning: &'static str,
    /// Expansion replies keyed by the innermost category in the prompt.
    pub expansion: &'static [(&'static str, &'static [&'static str])],
    /// A first constrained reply (after reasoning) that breaks the pattern.
    pub malformed_first_format: Option<&'static str>,
}

/// Three grocery products sharing the "Food and Beverages" category.
pub fn enroll_products() -> Vec<Product> {
    vec![
        Product {
            image: "dark_chocolate.png",
            rgb: [92, 51, 23],
            name: "Dark Chocolate Bar",
            category: "Food and Beverages",
            brand: "Cocoa Ridge",
            price: 3.49,
            color: "Brown",
            material: "Paper",
            shape: "Rectangular",
            weight: 0.1,
            descriptions: [
                "The image shows a Dark Chocolate Bar by Cocoa Ridge in a brown paper wrapper. The rectangular bar is labeled 70% cocoa, net weight 3.5 oz, with a price tag of $3.49.",
                "The wrapper is matte brown paper with gold lettering. The back lists cocoa mass, sugar and cocoa butter.",
            ],
            reasoning: "Product Name: the wrapper reads Dark Chocolate Bar. Category: chocolate is food, so Food and Beverages. Brand: Cocoa Ridge. Price: 3.49 USD. Color: brown wrapper. Material: paper. Shape: rectangular. Weight: 3.5 oz is 0.0992 kg, about 0.1 kg.",
            expansion: &[
                ("Food and Beverages", &["Chocolate", "Chocolate", "Chocolate"]),
                ("Chocolate", &["Dark Chocolate"]),
            ],
            malformed_first_format: None,
        },
        Product {
            image: "orange_juice.png",
            rgb: [250, 140, 20],
            name: "Sunny Grove Orange Juice",
            category: "Food and Beverages",
            brand: "Sunny Grove",
            price: 4.99,
            color: "Orange",
            material: "Cardboard",
            shape: "Rectangular",
            weight: 1.05,
            descriptions: [
                "A carton of Sunny Grove Orange Juice, 1 liter, not from concentrate. The carton is orange with a picture of oranges; the shelf label shows $4.99.",
                "The carton is coated cardboard with a plastic screw cap and a rectangular footprint.",
            ],
            reasoning: "Product Name: Sunny Grove Orange Juice. Category: a drink, so Food and Beverages. Brand: Sunny Grove. Price: 4.99 USD. Color: orange carton. Material: cardboard. Shape: rectangular. Weight: 1 liter of juice weighs about 1.05 kg.",
            expansion: &[
                ("Food and Beverages", &["Beverages", "beverages", "Beverages."]),
                ("Beverages", &["Juice"]),
            ],
            malformed_first_format: None,
        },
        Product {
            image: "potato_chips.png",
            rgb: [30, 80, 200],
            name: "Crispy Hill Sea Salt Potato Chips",
            category: "Food and Beverages",
            brand: "Crispy Hill",
            price: 2.99,
            color: "Blue",
            material: "Plastic",
            shape: "Irregular",
            weight: 0.15,
            descriptions: [
                "A blue bag of Crispy Hill Sea Salt Potato Chips, net weight 150 g, priced at $2.99.",
                "The bag is a crinkled metallized plastic film with an irregular, puffed shape.",
            ],
            reasoning: "Product Name: Crispy Hill Sea Salt Potato Chips. Category: a snack food, so Food and Beverages. Brand: Crispy Hill. Price: 2.99 USD. Color: blue. Material: plastic film. Shape: irregular. Weight: 150 g is 0.15 kg.",
            expansion: &[
                ("Food and Beverages", &["Snacks", "Snacks", "Snacks"]),
                ("Snacks", &["Chips"]),
            ],
            malformed_first_format: Some(
                r#"{"Product Name": "Crispy Hill Sea Salt Potato Chips", "Category": "Food and Beverages", "Brand": "Crispy Hill", "Price": 2.99, "Primary Package Color": "Blue", "Package Material": "Plastic", "Package Shape": "Irregular", "Weight": "150 g"}"#,
            ),
        },
    ]
}

/// Five annotated benchmark items from different categories.
pub fn bench_products() -> Vec<Product> {
    vec![
        Product {
            image: "spring_water.png",
            rgb: [120, 190, 230],
            name: "Glacier Spring Water",
            category: "Food and Beverages",
            brand: "Glacier",
            price: 1.29,
            color: "Light Blue",
            material: "Plastic",
            shape: "Cylindrical",
            weight: 0.5,
            descriptions: [
                "A bottle of Glacier Spring Water, 500 ml, with a light blue label, priced $1.29.",
                "The bottle is clear plastic with a cylindrical body and a blue cap.",
            ],
            reasoning: "Glacier Spring Water is a drink: Food and Beverages. 500 ml of water is 0.5 kg.",
            expansion: &[],
            malformed_first_format: None,
        },
        Product {
            image: "desk_lamp.png",
            rgb: [240, 240, 235],
            name: "Lumen Desk Lamp",
            category: "Electronics",
            brand: "Lumen",
            price: 24.99,
            color: "White",
            material: "Cardboard",
            shape: "Rectangular",
            weight: 1.2,
            descriptions: [
                "A white box containing a Lumen Desk Lamp, LED, 1.2 kg, sticker price $24.99.",
                "The box is printed cardboard, rectangular, with a photo of the lamp.",
            ],
            reasoning: "Lumen Desk Lamp is an LED lamp: Electronics. The box states 1.2 kg.",
            expansion: &[],
            malformed_first_format: None,
        },
        Product {
            image: "tissues.png",
            rgb: [245, 170, 200],
            name: "Petal Soft Facial Tissues",
            category: "Health and Wellness",
            brand: "Petal Soft",
            price: 2.49,
            color: "Pink",
            material: "Cardboard",
            shape: "Rectangular",
            weight: 0.25,
            descriptions: [
                "A pink box of Petal Soft Facial Tissues, 160 sheets, $2.49.",
                "The cardboard box is rectangular with an oval opening on top; it weighs about 250 g.",
            ],
            reasoning: "Petal Soft Facial Tissues are a personal health product: Health and Wellness. 250 g is 0.25 kg.",
            expansion: &[],
            malformed_first_format: None,
        },
        Product {
            image: "lemon_soap.png",
            rgb: [250, 235, 60],
            name: "Zest Lemon Bar Soap",
            category: "Beauty and Personal Care",
            brand: "Zest",
            price: 1.99,
            color: "Yellow",
            material: "Paper",
            shape: "Rectangular",
            weight: 0.113,
            descriptions: [
                "A yellow paper-wrapped Zest Lemon Bar Soap, net weight 4 oz, $1.99.",
                "The wrapper is paper with lemon illustrations; the bar is rectangular.",
            ],
            reasoning: "Zest Lemon Bar Soap is personal care: Beauty and Personal Care. 4 oz is 0.113 kg.",
            expansion: &[],
            malformed_first_format: None,
        },
        Product {
            image: "chew_toy.png",
            rgb: [200, 30, 40],
            name: "Rover Rubber Chew Toy",
            category: "Pet Products",
            brand: "Rover",
            price: 6.5,
            color: "Red",
            material: "Plastic",
            shape: "Irregular",
            weight: 0.08,
            descriptions: [
                "A red Rover Rubber Chew Toy for dogs in a plastic blister pack, 80 g, $6.50.",
                "The blister pack is clear plastic molded around the irregular bone-shaped toy.",
            ],
            reasoning: "Rover Rubber Chew Toy is a dog toy: Pet Products. 80 g is 0.08 kg.",
            expansion: &[],
            malformed_first_format: None,
        },
    ]
}

/// The benchmark items with one wrong category prediction planted: the chew
/// toy is predicted as "Toys and Games" while annotated as "Pet Products".
pub fn planted_predictions() -> Vec<Product> {
    let mut products = bench_products();
    products[4].category = "Toys and Games";
    products
}

fn quoted(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

/// The schema-conforming constrained reply.
pub fn json_reply(p: &Product) -> String {
    format!(
        "{{\"Product Name\": {}, \"Category\": {}, \"Brand\": {}, \"Price\": {}, \"Primary Package Color\": {}, \"Package Material\": {}, \"Package Shape\": {}, \"Weight\": {}}}",
        quoted(p.name),
        quoted(p.category),
        quoted(p.brand),
        p.price,
        quoted(p.color),
        quoted(p.material),
        quoted(p.shape),
        p.weight
    )
}

/// The baseline's triple reply.
pub fn triples_reply(p: &Product) -> String {
    [
        ("Category", p.category.to_string()),
        ("Brand", p.brand.to_string()),
        ("Price", p.price.to_string()),
        ("Primary Package Color", p.color.to_string()),
        ("Package Material", p.material.to_string()),
        ("Package Shape", p.shape.to_string()),
        ("Weight", p.weight.to_string()),
    ]
    .iter()
    .map(|(predicate, object)| format!("({}, {predicate}, {object})", p.name))
    .collect::<Vec<_>>()
    .join("\n")
}

fn rule(image: Option<&str>, contains: &[&str], history: &[&str], replies: &[&str]) -> ScriptRule {
    let strings = |items: &[&str]| items.iter().map(|s| s.to_string()).collect();
    ScriptRule {
        image: image.map(str::to_string),
        contains: strings(contains),
        history_contains: strings(history),
        replies: strings(replies),
        ..Default::default()
    }
}

/// Rules answering every stage of every mode for `products`.
pub fn script_book(products: &[Product]) -> ScriptBook {
    let mut book = ScriptBook::default();
    for p in products {
        let image = Some(p.image);
        let json = json_reply(p);
        let triples = triples_reply(p);
        book.push(rule(image, &["Describe the product in the image"], &[], &[p.descriptions[0]]))
            .push(rule(image, &["Provide additional details"], &[], &[p.descriptions[1]]))
            .push(rule(image, &["Generate knowledge graph triples"], &[], &[&triples]))
            .push(rule(None, &["Analyze the descriptions", p.name], &[], &[p.reasoning]))
            .push(rule(None, &["The previous output was rejected"], &[p.name], &[&json]))
            .push(rule(
                None,
                &["Based on your analysis"],
                &[p.name],
                &[p.malformed_first_format.unwrap_or(&json)],
            ))
            .push(rule(None, &["Output the product properties", p.name], &[], &[&json]));
        for (inner, replies) in p.expansion {
            let product_line = format!("Product: \"{}\"", p.name);
            let inner_line = format!("Current most specific category: \"{inner}\"");
            book.push(rule(None, &[&product_line, &inner_line], &[], replies));
        }
    }
    book
}

/// JSON-lines annotations for `products`, with images under `../images`.
pub fn annotations_jsonl(products: &[Product]) -> String {
    products
        .iter()
        .map(|p| {
            serde_json::json!({
                "image": format!("../images/{}", p.image),
                "category": p.category,
                "primary_package_color": p.color,
                "package_material": p.material,
                "package_shape": p.shape,
                "weight_kg": p.weight,
            })
            .to_string()
                + "\n"
        })
        .collect()
}

pub fn input(images: &Path, p: &Product) -> ProductInput {
    ProductInput::Image {
        bytes: fs::read(images.join(p.image)).expect("fixture image exists"),
        label: p.image.to_string(),
    }
}

pub fn scripted_backends(book: &ScriptBook) -> Backends {
    Backends {
        vlm: Arc::new(ScriptedBackend::new(VLM_MODEL, book.clone())),
        llm: Arc::new(ScriptedBackend::new(LLM_MODEL, book.clone())),
    }
}

pub fn recording_backends(book: &ScriptBook, store: &Arc<FixtureStore>) -> Backends {
    let scripted = scripted_backends(book);
    let wrap = |inner: ModelBackend| -> ModelBackend { Arc::new(RecordingBackend::new(inner, store.clone())) };
    Backends {
        vlm: wrap(scripted.vlm),
        llm: wrap(scripted.llm),
    }
}

pub fn replay_backends(store: &Arc<FixtureStore>) -> Backends {
    Backends {
        vlm: Arc::new(ReplayBackend::new(VLM_MODEL, store.clone())),
        llm: Arc::new(ReplayBackend::new(LLM_MODEL, store.clone())),
    }
}

pub fn open_replay(dir: &Path) -> Arc<FixtureStore> {
    Arc::new(FixtureStore::open(dir).expect("fixture store opens"))
}

/// Runs every mode over `products` through recording backends. Enrollable
/// modes run the full preparation (including expansion) when `expand` is set.
pub fn record(products: &[Product], images: &Path, store: &Arc<FixtureStore>, expand: bool) {
    let backends = recording_backends(&script_book(products), store);
    let strategies = StrategyRegistry::with_defaults();
    let schema = default_schema();
    for p in products {
        let input = input(images, p);
        for mode in EnrollmentMode::ALL {
            let config = EnrollmentConfig::new(mode);
            let enrollable = strategies.get(mode.name()).expect("registered").enrollable();
            if expand && enrollable {
                prepare(&input, &schema, &backends, &config, &strategies)
                    .unwrap_or_else(|e| panic!("{} / {mode}: {e}", p.image));
            } else {
                predict(&input, &schema, &backends, &config, &strategies)
                    .unwrap_or_else(|e| panic!("{} / {mode}: {e}", p.image));
            }
        }
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) {
    fs::create_dir_all(path.parent().expect("has parent")).expect("creates directory");
    fs::write(path, contents).expect("writes fixture");
}

/// Writes every fixture under `root`:
///
/// - `images/*.png`
/// - `enroll/{script.json, replay/}`: the three enrollment products
/// - `bench/{script.json, annotations.jsonl, replay/}`: the oracle benchmark
/// - `bench_planted/{script.json, replay/}`: the same items with one planted error
pub fn generate_all(root: &Path) {
    let images = root.join("images");
    let enroll = enroll_products();
    let bench = bench_products();
    let planted = planted_predictions();
    for p in enroll.iter().chain(&bench) {
        write(&images.join(p.image), png(p.rgb));
    }
    let sets: [(&str, &[Product], bool); 3] = [("enroll", &enroll, true), ("bench", &bench, false), ("bench_planted", &planted, false)];
    for (name, products, expand) in sets {
        let dir = root.join(name);
        let replay = dir.join("replay");
        if replay.exists() {
            fs::remove_dir_all(&replay).expect("clears replay store");
        }
        let book = script_book(products);
        write(&dir.join("script.json"), serde_json::to_string_pretty(&book).expect("books serialize") + "\n");
        record(products, &images, &open_replay(&replay), expand);
    }
    write(&root.join("bench").join("annotations.jsonl"), annotations_jsonl(&bench));
}

/// Enrolls the three committed enrollment products, in order, by replay.
pub fn enroll_fixture_set(
    inventory: &mut imgkg_core::graph::InventoryGraph,
    mode: EnrollmentMode,
) -> Vec<(imgkg_core::pipeline::EnrollmentRecord, imgkg_core::graph::MergeReport)> {
    let root = super::fixtures_dir();
    let backends = replay_backends(&open_replay(&root.join("enroll").join("replay")));
    let schema = default_schema();
    enroll_products()
        .iter()
        .map(|p| {
            imgkg_core::pipeline::enroll(&input(&root.join("images"), p), &schema, inventory, &backends, &EnrollmentConfig::new(mode))
                .unwrap_or_else(|e| panic!("{}: {e}", p.image))
        })
        .collect()
}
