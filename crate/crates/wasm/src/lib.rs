//! Browser bindings. Every export takes and returns JSON text so the page can
//! stay framework-free; the plain functions are also usable natively.

use perigid::certify::{certify_fixed_lattice, certify_super_stable, generic_global_rigidity_test};
use perigid::construct::{fixture, fixtures};
use perigid::io::{self, FrameworkFile};
use perigid::optimize::standard_realization;
use perigid::stress::{canonical_scaling, covering_force_residual, fixed_stress_space, stress_space};
use perigid::svg::{render_covering, SvgStyle};
use perigid::Tolerances;
use serde_json::json;
use wasm_bindgen::prelude::*;

fn tol(seed: u64) -> Tolerances {
    Tolerances::default().with_seed(seed)
}

fn load(text: &str) -> Result<FrameworkFile, String> {
    io::parse(text).map_err(|e| e.to_string())
}

pub fn list_fixtures() -> String {
    let list: Vec<_> = fixtures()
        .iter()
        .map(|f| json!({ "name": f.name, "summary": f.summary }))
        .collect();
    json!(list).to_string()
}

pub fn fixture_text(name: &str) -> Result<String, String> {
    let f = fixture(name).ok_or_else(|| format!("no fixture named `{name}`"))?;
    Ok(io::emit(&FrameworkFile::from(f)))
}

/// SVG of the covering window plus the force-balance residual when the file has a stress.
pub fn cover(text: &str, window: u32) -> Result<String, String> {
    let file = load(text)?;
    let r = file.require_realization().map_err(|e| e.to_string())?;
    let t = tol(0);
    let svg = render_covering(&file.graph, r, window, &SvgStyle::default(), &t).map_err(|e| e.to_string())?;
    let residual = match &file.stress {
        Some(w) => Some(covering_force_residual(&file.graph, r, w, window).map_err(|e| e.to_string())?.0),
        None => None,
    };
    Ok(json!({ "svg": svg, "force_residual": residual }).to_string())
}

/// Certificate report; `mode` is `flexible` or `fixed`. Without weights in the
/// file a stress is computed when the stress space is 1-dimensional.
pub fn certify(text: &str, mode: &str) -> Result<String, String> {
    let file = load(text)?;
    let g = &file.graph;
    let r = file.require_realization().map_err(|e| e.to_string())?;
    let t = tol(0);
    let omega = match &file.stress {
        Some(w) => w.clone(),
        None => {
            let basis = match mode {
                "fixed" => fixed_stress_space(g, r, &t),
                _ => stress_space(g, r, &t),
            }
            .map_err(|e| e.to_string())?;
            if basis.ncols() != 1 {
                return Err(format!("stress space has dimension {}; add weights to the file", basis.ncols()));
            }
            canonical_scaling(&basis.column(0).iter().copied().collect::<Vec<_>>())
        }
    };
    let cert = match mode {
        "flexible" => certify_super_stable(g, r, &omega, &t),
        "fixed" => certify_fixed_lattice(g, r, &omega, &t),
        other => return Err(format!("unknown mode `{other}`")),
    }
    .map_err(|e| e.to_string())?;
    serde_json::to_string(&cert).map_err(|e| e.to_string())
}

pub fn generic_test(text: &str, seed: u64) -> Result<String, String> {
    let file = load(text)?;
    let cert = generic_global_rigidity_test(&file.graph, &tol(seed)).map_err(|e| e.to_string())?;
    serde_json::to_string(&cert).map_err(|e| e.to_string())
}

/// The unit-volume minimizer as a framework file, with `lambda` and the KKT report.
pub fn minimize(text: &str, seed: u64) -> Result<String, String> {
    let file = load(text)?;
    let omega = file.require_stress().map_err(|e| e.to_string())?.to_vec();
    let (r, kkt) = standard_realization(&file.graph, &omega, &tol(seed)).map_err(|e| e.to_string())?;
    let out = FrameworkFile {
        graph: file.graph,
        realization: Some(r),
        stress: Some(omega),
        lambda: Some(kkt.lambda),
    };
    Ok(json!({ "framework": io::emit(&out), "kkt": kkt }).to_string())
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = listFixtures)]
pub fn list_fixtures_js() -> String {
    list_fixtures()
}

#[wasm_bindgen(js_name = fixtureText)]
pub fn fixture_text_js(name: &str) -> Result<String, JsError> {
    js(fixture_text(name))
}

#[wasm_bindgen(js_name = cover)]
pub fn cover_js(text: &str, window: u32) -> Result<String, JsError> {
    js(cover(text, window))
}

#[wasm_bindgen(js_name = certify)]
pub fn certify_js(text: &str, mode: &str) -> Result<String, JsError> {
    js(certify(text, mode))
}

#[wasm_bindgen(js_name = genericTest)]
pub fn generic_test_js(text: &str, seed: u32) -> Result<String, JsError> {
    js(generic_test(text, seed as u64))
}

#[wasm_bindgen(js_name = minimize)]
pub fn minimize_js(text: &str, seed: u32) -> Result<String, JsError> {
    js(minimize(text, seed as u64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn fixtures_certify() {
        let v: Value = serde_json::from_str(&list_fixtures()).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 5);
        let flex2 = fixture_text("flex2").unwrap();
        let c: Value = serde_json::from_str(&certify(&flex2, "flexible").unwrap()).unwrap();
        assert_eq!(c["verdict"], "SuperStable");
        let hex = fixture_text("hex").unwrap();
        let c: Value = serde_json::from_str(&certify(&hex, "fixed").unwrap()).unwrap();
        assert_eq!(c["verdict"], "FixedLatticeSuperStable");
        assert!(certify(&hex, "sideways").is_err());
    }

    #[test]
    fn cover_and_minimize() {
        let hex = fixture_text("hex").unwrap();
        let c: Value = serde_json::from_str(&cover(&hex, 1).unwrap()).unwrap();
        assert!(c["svg"].as_str().unwrap().starts_with("<svg"));
        let m: Value = serde_json::from_str(&minimize(&hex, 1).unwrap()).unwrap();
        assert_eq!(m["kkt"]["pass"], true);
        let again = m["framework"].as_str().unwrap();
        let c: Value = serde_json::from_str(&cover(again, 2).unwrap()).unwrap();
        assert!(c["force_residual"].as_f64().is_some());
    }

    #[test]
    fn errors_are_strings() {
        assert!(fixture_text("nope").is_err());
        assert!(cover("{", 1).unwrap_err().contains("line"));
    }
}
