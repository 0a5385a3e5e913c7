use std::path::Path;

use mim_core::scene::SceneFile;
use serde_json::Value;

fn read(rel: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join(rel)).unwrap()
}

/// Every key the serializer writes is declared in the schema, and every
/// required key is written.
fn check(value: &Value, schema: &Value, defs: &Value, at: &str) {
    let schema = match schema.get("$ref").and_then(Value::as_str) {
        Some(r) => &defs[r.trim_start_matches("#/$defs/")],
        None => schema,
    };
    if let Some(options) = schema.get("oneOf").and_then(Value::as_array) {
        let tag = &value["type"];
        let chosen = options
            .iter()
            .find(|o| o["properties"]["type"]["const"] == *tag)
            .unwrap_or_else(|| panic!("{at}: no variant for {tag}"));
        return check(value, chosen, defs, at);
    }
    match value {
        Value::Object(map) => {
            let props = &schema["properties"];
            for (k, v) in map {
                let sub = props
                    .get(k)
                    .unwrap_or_else(|| panic!("{at}.{k} is not in the schema"));
                if k != "assembly" {
                    check(v, sub, defs, &format!("{at}.{k}"));
                }
            }
            for req in schema["required"].as_array().into_iter().flatten() {
                assert!(map.contains_key(req.as_str().unwrap()), "{at} lacks {req}");
            }
        }
        Value::Array(items) => {
            if let Some(item_schema) = schema.get("items") {
                for (i, v) in items.iter().enumerate() {
                    check(v, item_schema, defs, &format!("{at}[{i}]"));
                }
            }
        }
        _ => {}
    }
}

#[test]
fn example_scene_round_trips_and_matches_schema() {
    let schema: Value = serde_json::from_str(&read("schema/scene.schema.json")).unwrap();
    let file = SceneFile::from_json(&read("scenarios/scenes/warehouse.json")).unwrap();
    let written = serde_json::to_value(&file).unwrap();
    check(&written, &schema, &schema["$defs"], "scene");
    let again = SceneFile::from_json(&written.to_string()).unwrap();
    assert_eq!(again, file);
}
