//! A rule-free backend that answers for any number of synthetic products,
//! used to record large replay stores.

use imgkg_core::model_client::{BackendKind, ChatBackend, ChatExchange, ClientError};

use super::png;

pub const CATEGORIES: [&str; 5] = [
    "Food and Beverages",
    "Health and Wellness",
    "Pet Products",
    "Home and Kitchen",
    "Office and School Supplies",
];
const COLORS: [&str; 7] = ["Red", "Blue", "Green", "Yellow", "White", "Black", "Brown"];
const MATERIALS: [&str; 5] = ["Plastic", "Paper", "Cardboard", "Glass", "Metal"];
const SHAPES: [&str; 4] = ["Rectangular", "Cylindrical", "Oval", "Flat"];

pub fn label(i: usize) -> String {
    format!("p{i:04}.png")
}

pub fn name(i: usize) -> String {
    format!("Item p{i:04} Multipack")
}

/// A distinct image per product index.
pub fn image(i: usize) -> Vec<u8> {
    png([(i % 251) as u8, (i / 251 % 251) as u8, 77])
}

pub fn json_reply(i: usize) -> String {
    format!(
        "{{\"Product Name\": \"{}\", \"Category\": \"{}\", \"Brand\": \"Brand {}\", \"Price\": {}.99, \"Primary Package Color\": \"{}\", \"Package Material\": \"{}\", \"Package Shape\": \"{}\", \"Weight\": 0.{}}}",
        name(i),
        CATEGORIES[i % CATEGORIES.len()],
        i % 37,
        i % 50,
        COLORS[i % COLORS.len()],
        MATERIALS[i % MATERIALS.len()],
        SHAPES[i % SHAPES.len()],
        100 + i % 900
    )
}

/// Finds the `pNNNN` product id mentioned anywhere in the exchange.
fn product_index(exchange: &ChatExchange) -> Option<usize> {
    for turn in &exchange.turns {
        if let Some(label) = turn.image.as_ref().and_then(|img| img.label()) {
            if let Some(i) = parse_id(label) {
                return Some(i);
            }
        }
        if let Some(i) = parse_id(&turn.content) {
            return Some(i);
        }
    }
    None
}

fn parse_id(text: &str) -> Option<usize> {
    text.match_indices('p').find_map(|(s, _)| {
        let digits = text.get(s + 1..s + 5)?;
        if digits.bytes().all(|b| b.is_ascii_digit()) {
            digits.parse().ok()
        } else {
            None
        }
    })
}

pub struct SyntheticBackend {
    model: String,
}

impl SyntheticBackend {
    pub fn new(model: &str) -> Self {
        Self { model: model.into() }
    }
}

impl ChatBackend for SyntheticBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Script
    }

    fn model_id(&self) -> &str {
        &self.model
    }

    fn complete(&self, exchange: &ChatExchange) -> Result<Vec<String>, ClientError> {
        let i = product_index(exchange).ok_or_else(|| ClientError::ScriptMiss("no product id".into()))?;
        let last = exchange.last_user_content();
        let n = exchange.options.n_samples as usize;
        let reply = if last.contains("Describe the product") {
            format!("Package of {} in {} {}.", name(i), COLORS[i % COLORS.len()], MATERIALS[i % MATERIALS.len()])
        } else if last.contains("additional details") {
            format!("Net weight 0.{} kg, price {}.99 USD.", 100 + i % 900, i % 50)
        } else if last.contains("Analyze the descriptions") {
            format!("All values for {} are printed on the package.", name(i))
        } else if last.contains("JSON object") {
            json_reply(i)
        } else if last.contains("intermediate category") {
            let anchor = CATEGORIES[i % CATEGORIES.len()];
            if last.contains(&format!("Current most specific category: \"{anchor}\"")) {
                format!("Group {}", i % 11)
            } else {
                format!("Subgroup {}", i % 23)
            }
        } else {
            return Err(ClientError::ScriptMiss(last.chars().take(80).collect()));
        };
        Ok(vec![reply; n])
    }
}
