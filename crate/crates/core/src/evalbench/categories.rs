//! Evaluation category conventions.
//!
//! The source dataset has 20 categories. Visually ambiguous ones are dropped
//! and food/cooking are merged, leaving 11. The mapping ships as
//! `data/msrvtt_category_merge.json`.

use std::sync::OnceLock;

use serde::Deserialize;

const MERGE_JSON: &str = include_str!("../../data/msrvtt_category_merge.json");

/// The 11 evaluation categories in reporting order.
pub const MERGED_CATEGORIES: [&str; 11] = [
    "Music",
    "Gaming",
    "Sports, Actions",
    "News, Events, Politics",
    "Vehicles, Autos",
    "How-to",
    "Travel",
    "Animals, Pets",
    "Kids, Family",
    "Food, Drink, Cooking",
    "Beauty, Fashion",
];

#[derive(Deserialize)]
struct MergeFile {
    categories: Vec<(String, Option<String>)>,
}

/// `(original, merged)` pairs; `None` marks a dropped category.
pub fn merge_table() -> &'static [(String, Option<String>)] {
    static TABLE: OnceLock<Vec<(String, Option<String>)>> = OnceLock::new();
    TABLE.get_or_init(|| {
        serde_json::from_str::<MergeFile>(MERGE_JSON).expect("bundled category map is valid JSON").categories
    })
}

/// Maps an original category label to its evaluation category.
pub fn merge_category(original: &str) -> Option<&'static str> {
    merge_table().iter().find(|(o, _)| o == original).and_then(|(_, m)| m.as_deref())
}

/// Label for the i-th synthetic category: the merged names first, then `category-NN`.
pub fn category_label(i: usize) -> String {
    MERGED_CATEGORIES.get(i).map(|s| s.to_string()).unwrap_or_else(|| format!("category-{i:02}"))
}
