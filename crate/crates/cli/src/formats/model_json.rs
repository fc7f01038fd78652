//! Model-spec JSON documents.
//!
//! Parameter maps are keyed by `"j,k"` (observed, latent) or `"j,S"` with
//! `S` a sorted comma list of latents (just `"j"` for the empty set).

use serde_json::{json, Map, Value};
use tui_core::model::{BipartiteGraph, CardinalitySpec, FamilyParams, LatentSpec, Link, ModelSpec};
use tui_core::Matrix;

use super::{FormatError, Obj};

pub fn link_from_name(name: &str) -> Option<Link> {
    match name {
        "identity" => Some(Link::Identity),
        "logistic" => Some(Link::Logistic),
        "probit" => Some(Link::Probit),
        _ => None,
    }
}

fn matrix_value(m: &Matrix) -> Value {
    Value::Array((0..m.rows()).map(|i| json!(m.row(i))).collect())
}

fn edge_map(graph: &BipartiteGraph, per_j: &[Vec<f64>]) -> Value {
    let mut map = Map::new();
    for (j, vals) in per_j.iter().enumerate() {
        for (&k, &v) in graph.parents(j).iter().zip(vals) {
            map.insert(format!("{j},{k}"), json!(v));
        }
    }
    Value::Object(map)
}

fn node_map<T: serde::Serialize>(items: &[T]) -> Value {
    Value::Object(items.iter().enumerate().map(|(j, v)| (j.to_string(), json!(v))).collect())
}

pub fn to_value(spec: &ModelSpec, seed: Option<u64>) -> Value {
    let g = &spec.graph;
    let family = match &spec.family {
        FamilyParams::NoisyOr { weights, leak } => {
            json!({"name": "noisy-or", "weights": edge_map(g, weights), "leak": node_map(leak)})
        }
        FamilyParams::MainEffect { link, weights } => {
            json!({"name": "main-effect", "link": link.name(), "weights": edge_map(g, weights)})
        }
        FamilyParams::AllEffect { link, coefficients } => {
            let mut map = Map::new();
            for (j, coefs) in coefficients.iter().enumerate() {
                let parents = g.parents(j);
                for (mask, &c) in coefs.iter().enumerate() {
                    let mut key = j.to_string();
                    for (p, k) in parents.iter().enumerate() {
                        if mask >> p & 1 == 1 {
                            key.push_str(&format!(",{k}"));
                        }
                    }
                    map.insert(key, json!(c));
                }
            }
            json!({"name": "all-effect", "link": link.name(), "coefficients": map})
        }
        FamilyParams::MainInteraction { link, intercept, main, interaction } => json!({
            "name": "main-interaction",
            "link": link.name(),
            "intercept": node_map(intercept),
            "main": edge_map(g, main),
            "interaction": node_map(interaction),
        }),
        FamilyParams::GeneralRbm { pair, observed_bias, latent_bias } => {
            let mut map = Map::new();
            for (j, blocks) in pair.iter().enumerate() {
                for (&k, m) in g.parents(j).iter().zip(blocks) {
                    map.insert(format!("{j},{k}"), matrix_value(m));
                }
            }
            json!({
                "name": "general-rbm",
                "pair": map,
                "observed_bias": node_map(observed_bias),
                "latent_bias": node_map(latent_bias),
            })
        }
        FamilyParams::ExplicitCpts { tables } => {
            let map: Map<String, Value> = tables.iter().enumerate().map(|(j, m)| (j.to_string(), matrix_value(m))).collect();
            json!({"name": "explicit-cpts", "tables": map})
        }
    };
    let latent = match &spec.latent {
        LatentSpec::Independent(m) => json!({ "marginals": m }),
        LatentSpec::Joint(p) => json!({ "joint": p }),
        LatentSpec::RbmInduced => json!("rbm-induced"),
    };
    let mut doc = json!({
        "J": g.num_observed(),
        "K": g.num_latent(),
        "V": spec.cards.observed_levels,
        "H": spec.cards.latent_levels,
        "graph": g.rows(),
        "family": family,
        "latent": latent,
    });
    if let Some(seed) = seed {
        doc["seed"] = json!(seed);
    }
    doc
}

/// Pretty-printed document with a trailing newline.
pub fn to_string(spec: &ModelSpec, seed: Option<u64>) -> String {
    let mut s = serde_json::to_string_pretty(&to_value(spec, seed)).expect("JSON values always serialize");
    s.push('\n');
    s
}

fn parse_key(key: &str, what: &str) -> Result<Vec<usize>, FormatError> {
    key.split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|_| FormatError::new(format!("{what}: bad key {key:?}"))))
        .collect()
}

/// Reads a `"j,k"` map into per-`j` vectors aligned with `co(j)`.
fn read_edge_map<T>(
    obj: &Obj,
    field: &str,
    graph: &BipartiteGraph,
    mut read: impl FnMut(&Value, &str) -> Result<T, FormatError>,
) -> Result<Vec<Vec<T>>, FormatError> {
    let map = obj.object(field)?;
    let mut slots: Vec<Vec<Option<T>>> =
        (0..graph.num_observed()).map(|j| graph.parents(j).iter().map(|_| None).collect()).collect();
    for (key, v) in map {
        let what = format!("{}.{key}", obj.path(field));
        let idx = parse_key(key, &what)?;
        let (j, k) = match idx[..] {
            [j, k] => (j, k),
            _ => return Err(FormatError::new(format!("{what}: expected a \"j,k\" key"))),
        };
        let p = (j < graph.num_observed())
            .then(|| graph.parents(j).iter().position(|&x| x == k))
            .flatten()
            .ok_or_else(|| FormatError::new(format!("{what}: ({j},{k}) is not an edge of the graph")))?;
        slots[j][p] = Some(read(v, &what)?);
    }
    fill(slots, field, |j, p| format!("{j},{}", graph.parents(j)[p]))
}

fn fill<T>(slots: Vec<Vec<Option<T>>>, field: &str, key: impl Fn(usize, usize) -> String) -> Result<Vec<Vec<T>>, FormatError> {
    slots
        .into_iter()
        .enumerate()
        .map(|(j, row)| {
            row.into_iter()
                .enumerate()
                .map(|(p, v)| v.ok_or_else(|| FormatError::new(format!("{field}: missing entry \"{}\"", key(j, p)))))
                .collect()
        })
        .collect()
}

/// Reads a `"j"`-keyed map with exactly `len` entries.
fn read_node_map<T>(
    obj: &Obj,
    field: &str,
    len: usize,
    mut read: impl FnMut(&Value, &str) -> Result<T, FormatError>,
) -> Result<Vec<T>, FormatError> {
    let map = obj.object(field)?;
    let mut slots: Vec<Option<T>> = (0..len).map(|_| None).collect();
    for (key, v) in map {
        let what = format!("{}.{key}", obj.path(field));
        let j = match parse_key(key, &what)?[..] {
            [j] if j < len => j,
            _ => return Err(FormatError::new(format!("{what}: expected an index below {len}"))),
        };
        slots[j] = Some(read(v, &what)?);
    }
    slots
        .into_iter()
        .enumerate()
        .map(|(j, v)| v.ok_or_else(|| FormatError::new(format!("{}: missing entry \"{j}\"", obj.path(field)))))
        .collect()
}

fn number(v: &Value, what: &str) -> Result<f64, FormatError> {
    v.as_f64().ok_or_else(|| FormatError::new(format!("{what}: expected a number")))
}

fn numbers(v: &Value, what: &str) -> Result<Vec<f64>, FormatError> {
    v.as_array()
        .ok_or_else(|| FormatError::new(format!("{what}: expected an array of numbers")))?
        .iter()
        .map(|x| number(x, what))
        .collect()
}

fn matrix(v: &Value, what: &str) -> Result<Matrix, FormatError> {
    let rows = v
        .as_array()
        .ok_or_else(|| FormatError::new(format!("{what}: expected an array of rows")))?
        .iter()
        .map(|r| numbers(r, what))
        .collect::<Result<Vec<_>, _>>()?;
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(FormatError::new(format!("{what}: rows must be nonempty and of equal length")));
    }
    Ok(Matrix::from_rows(&rows))
}

pub fn from_value(doc: &Value) -> Result<(ModelSpec, Option<u64>), FormatError> {
    let root = Obj::root(doc)?;
    let jn = root.usize("J")?;
    let kn = root.usize("K")?;
    let cards = CardinalitySpec::new(root.usize("V")?, root.usize("H")?).map_err(FormatError::core)?;
    let rows: Vec<Vec<u8>> = root
        .array("graph")?
        .iter()
        .map(|r| {
            r.as_array()
                .ok_or_else(|| FormatError::new("graph: expected rows of 0/1"))?
                .iter()
                .map(|x| match x.as_u64() {
                    Some(b @ (0 | 1)) => Ok(b as u8),
                    _ => Err(FormatError::new("graph: entries must be 0 or 1")),
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    if rows.len() != jn || rows.iter().any(|r| r.len() != kn) {
        return Err(FormatError::new(format!("graph must be {jn} x {kn}")));
    }
    let graph = BipartiteGraph::from_rows(&rows).map_err(FormatError::core)?;

    let fam = root.child("family")?;
    let link = || -> Result<Link, FormatError> {
        let name = fam.str("link")?;
        link_from_name(name).ok_or_else(|| FormatError::new(format!("family.link: unknown link {name:?}")))
    };
    let family = match fam.str("name")? {
        "noisy-or" => FamilyParams::NoisyOr {
            weights: read_edge_map(&fam, "weights", &graph, number)?,
            leak: read_node_map(&fam, "leak", jn, number)?,
        },
        "main-effect" => FamilyParams::MainEffect { link: link()?, weights: read_edge_map(&fam, "weights", &graph, number)? },
        "all-effect" => {
            let map = fam.object("coefficients")?;
            let mut slots: Vec<Vec<Option<f64>>> = (0..jn).map(|j| vec![None; 1 << graph.parents(j).len()]).collect();
            for (key, v) in map {
                let what = format!("family.coefficients.{key}");
                let idx = parse_key(key, &what)?;
                let j = idx[0];
                if j >= jn {
                    return Err(FormatError::new(format!("{what}: observed index out of range")));
                }
                let parents = graph.parents(j);
                let mut mask = 0usize;
                for w in idx[1..].windows(2) {
                    if w[0] >= w[1] {
                        return Err(FormatError::new(format!("{what}: latent set must be sorted ascending")));
                    }
                }
                for &k in &idx[1..] {
                    let p = parents
                        .iter()
                        .position(|&x| x == k)
                        .ok_or_else(|| FormatError::new(format!("{what}: latent {k} is not a parent of {j}")))?;
                    mask |= 1 << p;
                }
                slots[j][mask] = Some(number(v, &what)?);
            }
            let coefficients = fill(slots, "family.coefficients", |j, mask| {
                let mut key = j.to_string();
                for (p, k) in graph.parents(j).iter().enumerate() {
                    if mask >> p & 1 == 1 {
                        key.push_str(&format!(",{k}"));
                    }
                }
                key
            })?;
            FamilyParams::AllEffect { link: link()?, coefficients }
        }
        "main-interaction" => FamilyParams::MainInteraction {
            link: link()?,
            intercept: read_node_map(&fam, "intercept", jn, number)?,
            main: read_edge_map(&fam, "main", &graph, number)?,
            interaction: read_node_map(&fam, "interaction", jn, number)?,
        },
        "general-rbm" => FamilyParams::GeneralRbm {
            pair: read_edge_map(&fam, "pair", &graph, matrix)?,
            observed_bias: read_node_map(&fam, "observed_bias", jn, numbers)?,
            latent_bias: read_node_map(&fam, "latent_bias", kn, numbers)?,
        },
        "explicit-cpts" => FamilyParams::ExplicitCpts { tables: read_node_map(&fam, "tables", jn, matrix)? },
        other => return Err(FormatError::new(format!("family.name: unknown family {other:?}"))),
    };

    let latent = match root.get("latent")? {
        Value::String(s) if s == "rbm-induced" => LatentSpec::RbmInduced,
        Value::Object(_) => {
            let lat = root.child("latent")?;
            if lat.has("marginals") {
                let m = lat.array("marginals")?.iter().map(|v| numbers(v, "latent.marginals")).collect::<Result<_, _>>()?;
                LatentSpec::Independent(m)
            } else {
                LatentSpec::Joint(numbers(lat.get("joint")?, "latent.joint")?)
            }
        }
        _ => return Err(FormatError::new("latent: expected \"rbm-induced\" or an object with marginals or joint")),
    };
    let seed = match doc.get("seed") {
        None | Some(Value::Null) => None,
        Some(v) => Some(v.as_u64().ok_or_else(|| FormatError::new("seed: expected an unsigned integer"))?),
    };
    let spec = ModelSpec { graph, cards, family, latent };
    spec.validate().map_err(FormatError::core)?;
    Ok((spec, seed))
}

pub fn from_str(text: &str) -> Result<(ModelSpec, Option<u64>), FormatError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| FormatError::new(format!("model JSON: {e}")))?;
    from_value(&doc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tui_core::model::{random_model, FamilyKind, GenerateOptions};

    #[test]
    fn every_family_round_trips() {
        let kinds = [
            (FamilyKind::NoisyOr, 2),
            (FamilyKind::MainEffect(Link::Probit), 2),
            (FamilyKind::AllEffect(Link::Identity), 2),
            (FamilyKind::MainInteraction(Link::Logistic), 2),
            (FamilyKind::GeneralRbm, 3),
            (FamilyKind::ExplicitCpts, 3),
        ];
        for (kind, v) in kinds {
            let g = random_model(7, 3, v, 2, &GenerateOptions::new(kind), 11).unwrap();
            let text = to_string(&g.spec, Some(11));
            let (back, seed) = from_str(&text).unwrap();
            assert_eq!(back, g.spec, "{}", g.spec.family.name());
            assert_eq!(seed, Some(11));
            assert_eq!(to_string(&back, Some(11)), text);
        }
    }

    #[test]
    fn all_effect_keys_use_latent_sets() {
        let g = random_model(5, 2, 2, 2, &GenerateOptions::new(FamilyKind::AllEffect(Link::Logistic)), 0).unwrap();
        let v = to_value(&g.spec, None);
        let coefs = v["family"]["coefficients"].as_object().unwrap();
        let j = (0..5).find(|&j| g.spec.graph.parents(j).len() == 2).unwrap();
        for key in [format!("{j}"), format!("{j},0"), format!("{j},1"), format!("{j},0,1")] {
            assert!(coefs.contains_key(&key), "{key}");
        }
    }

    #[test]
    fn rejects_inconsistent_documents() {
        let g = random_model(5, 2, 2, 2, &GenerateOptions::new(FamilyKind::NoisyOr), 0).unwrap();
        let good = to_value(&g.spec, None);
        let mut missing = good.clone();
        missing["family"]["weights"].as_object_mut().unwrap().remove("0,0").or_else(|| {
            missing["family"]["weights"].as_object_mut().unwrap().remove("0,1")
        });
        assert!(from_value(&missing).is_err());
        let mut non_edge = good.clone();
        let absent = (0..2).find(|&k| !g.spec.graph.has_edge(0, k)).unwrap();
        non_edge["family"]["weights"][format!("0,{absent}")] = json!(1.0);
        assert!(from_value(&non_edge).is_err());
        let mut bad_graph = good.clone();
        bad_graph["graph"][0] = json!([2, 0]);
        assert!(from_value(&bad_graph).is_err());
        let mut bad_latent = good;
        bad_latent["latent"] = json!({"marginals": [[0.5, 0.6], [0.5, 0.5]]});
        assert!(from_value(&bad_latent).is_err());
    }
}
