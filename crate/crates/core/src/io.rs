//! JSON framework files.
//!
//! ```json
//! {
//!   "dimension": 2,
//!   "vertices": [{"name": "a", "position": [0.0, 0.0]}],
//!   "lattice": [[1.0, 0.0], [0.0, 1.0]],
//!   "edges": [{"tail": "a", "head": "a", "gain": [1, 0], "type": "cable", "weight": 1.0}],
//!   "lambda": 0.5
//! }
//! ```
//!
//! `lattice` lists the columns of `L`. Positions, lattice, weights and
//! `lambda` are optional; gains must be JSON integers.

use nalgebra::DMatrix;
use serde_json::{json, Map, Value};

use crate::construct::{FiniteFramework, Fixture};
use crate::error::{Error, Result};
use crate::framework::Realization;
use crate::gain_graph::{GainGraph, Marking};

/// Contents of a framework file.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameworkFile {
    pub graph: GainGraph,
    pub realization: Option<Realization>,
    pub stress: Option<Vec<f64>>,
    pub lambda: Option<f64>,
}

impl FrameworkFile {
    pub fn require_realization(&self) -> Result<&Realization> {
        self.realization.as_ref().ok_or(Error::Missing("vertex positions and lattice"))
    }

    pub fn require_stress(&self) -> Result<&[f64]> {
        self.stress.as_deref().ok_or(Error::Missing("edge weights"))
    }
}

impl From<Fixture> for FrameworkFile {
    fn from(f: Fixture) -> Self {
        Self {
            graph: f.graph,
            realization: Some(f.realization),
            stress: Some(f.stress),
            lambda: None,
        }
    }
}

fn err(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.into(),
        message: message.into(),
    }
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| err(path, format!("missing field `{key}`")))
}

fn as_object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| err(path, "expected an object"))
}

fn as_array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| err(path, "expected an array"))
}

fn as_real(v: &Value, path: &str) -> Result<f64> {
    v.as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| err(path, "expected a finite number"))
}

fn reals(v: &Value, len: usize, path: &str) -> Result<Vec<f64>> {
    let a = as_array(v, path)?;
    if a.len() != len {
        return Err(err(path, format!("expected {len} numbers, got {}", a.len())));
    }
    a.iter()
        .enumerate()
        .map(|(i, x)| as_real(x, &format!("{path}[{i}]")))
        .collect()
}

fn parse_root(text: &str) -> Result<Map<String, Value>> {
    let root: Value = serde_json::from_str(text)
        .map_err(|e| err(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
    Ok(as_object(&root, "$")?.clone())
}

fn parse_dimension(root: &Map<String, Value>) -> Result<usize> {
    let d = field(root, "dimension", "$")?
        .as_u64()
        .ok_or_else(|| err("$.dimension", "expected a positive integer"))?;
    if d == 0 {
        return Err(Error::ZeroDimension);
    }
    Ok(d as usize)
}

/// Vertex names and, when every vertex has one, the positions.
fn parse_vertices(root: &Map<String, Value>, d: usize) -> Result<(Vec<String>, Option<Vec<Vec<f64>>>)> {
    let list = as_array(field(root, "vertices", "$")?, "$.vertices")?;
    let mut names = Vec::with_capacity(list.len());
    let mut positions = Vec::new();
    for (i, v) in list.iter().enumerate() {
        let path = format!("$.vertices[{i}]");
        let obj = as_object(v, &path)?;
        let name = field(obj, "name", &path)?
            .as_str()
            .ok_or_else(|| err(format!("{path}.name"), "expected a string"))?;
        names.push(name.to_string());
        if let Some(p) = obj.get("position") {
            positions.push(reals(p, d, &format!("{path}.position"))?);
        }
    }
    match positions.len() {
        0 => Ok((names, None)),
        k if k == names.len() => Ok((names, Some(positions))),
        _ => Err(err("$.vertices", "either every vertex or no vertex has a position")),
    }
}

fn parse_marking(obj: &Map<String, Value>, path: &str) -> Result<Marking> {
    match obj.get("type") {
        None => Ok(Marking::Bar),
        Some(Value::String(s)) => match s.as_str() {
            "bar" => Ok(Marking::Bar),
            "cable" => Ok(Marking::Cable),
            "strut" => Ok(Marking::Strut),
            other => Err(err(format!("{path}.type"), format!("unknown edge type `{other}`"))),
        },
        Some(_) => Err(err(format!("{path}.type"), "expected a string")),
    }
}

fn parse_weights(weights: Vec<Option<f64>>) -> Result<Option<Vec<f64>>> {
    let given = weights.iter().filter(|w| w.is_some()).count();
    if given == 0 {
        Ok(None)
    } else if given == weights.len() {
        Ok(Some(weights.into_iter().map(|w| w.unwrap_or_default()).collect()))
    } else {
        Err(err("$.edges", "either every edge or no edge has a weight"))
    }
}

/// Parses a framework file.
pub fn parse(text: &str) -> Result<FrameworkFile> {
    let root = parse_root(text)?;
    let d = parse_dimension(&root)?;
    let (names, positions) = parse_vertices(&root, d)?;
    let mut graph = GainGraph::new(d, names)?;

    let edges = as_array(field(&root, "edges", "$")?, "$.edges")?;
    let mut weights = Vec::with_capacity(edges.len());
    for (i, e) in edges.iter().enumerate() {
        let path = format!("$.edges[{i}]");
        let obj = as_object(e, &path)?;
        let endpoint = |key: &str| -> Result<&str> {
            field(obj, key, &path)?
                .as_str()
                .ok_or_else(|| err(format!("{path}.{key}"), "expected a vertex name"))
        };
        let (tail, head) = (endpoint("tail")?, endpoint("head")?);
        let gain_path = format!("{path}.gain");
        let gain = as_array(field(obj, "gain", &path)?, &gain_path)?
            .iter()
            .enumerate()
            .map(|(k, x)| {
                x.as_i64()
                    .ok_or_else(|| err(format!("{gain_path}[{k}]"), "gains must be integers"))
            })
            .collect::<Result<Vec<i64>>>()?;
        let marking = parse_marking(obj, &path)?;
        graph
            .add_named_edge(tail, head, gain, marking)
            .map_err(|e| match e {
                Error::UnknownVertex(v) => err(&path, format!("unknown vertex `{v}`")),
                other => other,
            })?;
        weights.push(match obj.get("weight") {
            None => None,
            Some(w) => Some(as_real(w, &format!("{path}.weight"))?),
        });
    }

    let lattice = match root.get("lattice") {
        None => None,
        Some(v) => {
            let cols = as_array(v, "$.lattice")?;
            if cols.len() != d {
                return Err(err("$.lattice", format!("expected {d} columns")));
            }
            Some(
                cols.iter()
                    .enumerate()
                    .map(|(j, c)| reals(c, d, &format!("$.lattice[{j}]")))
                    .collect::<Result<Vec<_>>>()?,
            )
        }
    };
    let realization = match (positions, lattice) {
        (Some(p), Some(l)) => Some(Realization::from_points(&p, &l)?),
        (None, None) => None,
        (Some(_), None) => return Err(err("$", "positions given without a lattice")),
        (None, Some(_)) => return Err(err("$", "lattice given without vertex positions")),
    };
    let lambda = match root.get("lambda") {
        None => None,
        Some(v) => Some(as_real(v, "$.lambda")?),
    };
    Ok(FrameworkFile {
        graph,
        realization,
        stress: parse_weights(weights)?,
        lambda,
    })
}

pub fn to_value(file: &FrameworkFile) -> Value {
    let g = &file.graph;
    let vertices: Vec<Value> = g
        .vertices()
        .iter()
        .enumerate()
        .map(|(v, name)| match &file.realization {
            Some(r) => json!({ "name": name, "position": r.p.column(v).iter().collect::<Vec<_>>() }),
            None => json!({ "name": name }),
        })
        .collect();
    let edges: Vec<Value> = g
        .edges()
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let mut m = Map::new();
            m.insert("tail".into(), json!(g.vertices()[e.tail]));
            m.insert("head".into(), json!(g.vertices()[e.head]));
            m.insert("gain".into(), json!(e.gain));
            m.insert("type".into(), json!(e.marking.as_str()));
            if let Some(w) = &file.stress {
                m.insert("weight".into(), json!(w[i]));
            }
            Value::Object(m)
        })
        .collect();
    let mut root = Map::new();
    root.insert("dimension".into(), json!(g.dim()));
    root.insert("vertices".into(), Value::Array(vertices));
    if let Some(r) = &file.realization {
        let cols: Vec<Vec<f64>> = r.l.column_iter().map(|c| c.iter().copied().collect()).collect();
        root.insert("lattice".into(), json!(cols));
    }
    root.insert("edges".into(), Value::Array(edges));
    if let Some(l) = file.lambda {
        root.insert("lambda".into(), json!(l));
    }
    Value::Object(root)
}

/// Deterministic pretty-printed JSON with a trailing newline.
pub fn emit(file: &FrameworkFile) -> String {
    let mut s = serde_json::to_string_pretty(&to_value(file)).expect("finite values serialize");
    s.push('\n');
    s
}

/// Parses a finite framework: same layout, no gains, no lattice, positions required.
pub fn parse_finite(text: &str) -> Result<(FiniteFramework, Option<Vec<f64>>)> {
    let root = parse_root(text)?;
    let d = parse_dimension(&root)?;
    let (names, positions) = parse_vertices(&root, d)?;
    let positions = positions.ok_or_else(|| err("$.vertices", "finite frameworks need positions"))?;
    let index = |name: &str, path: &str| -> Result<usize> {
        names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| err(path, format!("unknown vertex `{name}`")))
    };
    let list = as_array(field(&root, "edges", "$")?, "$.edges")?;
    let mut edges = Vec::with_capacity(list.len());
    let mut weights = Vec::with_capacity(list.len());
    for (i, e) in list.iter().enumerate() {
        let path = format!("$.edges[{i}]");
        let obj = as_object(e, &path)?;
        let mut ends = [0usize; 2];
        for (k, key) in ["tail", "head"].iter().enumerate() {
            let p = format!("{path}.{key}");
            let name = field(obj, key, &path)?
                .as_str()
                .ok_or_else(|| err(&p, "expected a vertex name"))?;
            ends[k] = index(name, &p)?;
        }
        edges.push((ends[0], ends[1], parse_marking(obj, &path)?));
        weights.push(match obj.get("weight") {
            None => None,
            Some(w) => Some(as_real(w, &format!("{path}.weight"))?),
        });
    }
    let p = DMatrix::from_fn(d, names.len(), |k, v| positions[v][k]);
    Ok((FiniteFramework::new(names, edges, p)?, parse_weights(weights)?))
}

pub fn emit_finite(f: &FiniteFramework, omega: Option<&[f64]>) -> String {
    let vertices: Vec<Value> = f
        .vertices
        .iter()
        .enumerate()
        .map(|(v, name)| json!({ "name": name, "position": f.p.column(v).iter().collect::<Vec<_>>() }))
        .collect();
    let edges: Vec<Value> = f
        .edges
        .iter()
        .enumerate()
        .map(|(i, &(a, b, m))| {
            let mut e = json!({ "tail": f.vertices[a], "head": f.vertices[b], "type": m.as_str() });
            if let Some(w) = omega {
                e["weight"] = json!(w[i]);
            }
            e
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&json!({
        "dimension": f.dim(),
        "vertices": vertices,
        "edges": edges,
    }))
    .expect("finite values serialize");
    s.push('\n');
    s
}

/// Row-major nested arrays.
pub fn matrix_json(m: &DMatrix<f64>) -> Value {
    json!(crate::linalg::to_rows(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::{flex2, octagon_finite};

    #[test]
    fn flex2_round_trip() {
        let file = FrameworkFile::from(flex2());
        let text = emit(&file);
        let back = parse(&text).unwrap();
        assert_eq!(back.graph.num_edges(), 5);
        assert_eq!(back.graph.num_vertices(), 2);
        assert_eq!(back, file);
        assert_eq!(emit(&back), text);
    }

    #[test]
    fn rejects_zero_loop_and_duplicates() {
        let zero = r#"{"dimension":2,"vertices":[{"name":"u"}],"edges":[{"tail":"u","head":"u","gain":[0,0]}]}"#;
        assert!(matches!(parse(zero), Err(Error::ZeroLoop { .. })));
        let dup = r#"{"dimension":2,"vertices":[{"name":"u"},{"name":"v"}],"edges":[
            {"tail":"u","head":"v","gain":[1,0]},{"tail":"v","head":"u","gain":[-1,0]}]}"#;
        assert!(matches!(parse(dup), Err(Error::DuplicateEdge { .. })));
    }

    #[test]
    fn rejects_float_gains_and_bad_dimension() {
        let f = r#"{"dimension":2,"vertices":[{"name":"u"}],"edges":[{"tail":"u","head":"u","gain":[1.0,0]}]}"#;
        match parse(f) {
            Err(Error::Parse { path, .. }) => assert_eq!(path, "$.edges[0].gain[0]"),
            other => panic!("{other:?}"),
        }
        let g = r#"{"dimension":2,"vertices":[{"name":"u"}],"edges":[{"tail":"u","head":"u","gain":[1]}]}"#;
        assert!(matches!(parse(g), Err(Error::GainDimensionMismatch { .. })));
    }

    #[test]
    fn syntax_errors_report_line() {
        match parse("{\n\"dimension\": 2,,\n}") {
            Err(Error::Parse { path, .. }) => assert!(path.starts_with("line 2")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn combinatorial_only_file() {
        let f = r#"{"dimension":2,"vertices":[{"name":"u"}],"edges":[{"tail":"u","head":"u","gain":[1,0],"type":"cable"}]}"#;
        let file = parse(f).unwrap();
        assert!(file.realization.is_none());
        assert!(file.stress.is_none());
        assert_eq!(file.graph.edges()[0].marking, Marking::Cable);
        assert!(file.require_realization().is_err());
    }

    #[test]
    fn partial_weights_rejected() {
        let f = r#"{"dimension":1,"vertices":[{"name":"u"}],"edges":[
            {"tail":"u","head":"u","gain":[1],"weight":1},{"tail":"u","head":"u","gain":[2]}]}"#;
        assert!(matches!(parse(f), Err(Error::Parse { .. })));
    }

    #[test]
    fn finite_round_trip() {
        let (f, w) = octagon_finite();
        let text = emit_finite(&f, Some(&w));
        let (back, bw) = parse_finite(&text).unwrap();
        assert_eq!(back, f);
        assert_eq!(bw.unwrap(), w);
    }
}
