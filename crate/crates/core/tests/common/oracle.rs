//! Reference implementations written straight from the documented rules,
//! sharing no code with the library's evaluation paths.

use std::collections::{BTreeSet, HashMap};

use nalgebra::{DMatrix, DVector};

/// One condition as read from the raw YAML.
#[derive(Debug, Clone)]
pub struct RawCondition {
    pub feature: String,
    pub operator: String,
    pub threshold: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub compare_to: Option<String>,
}

/// Intentions in file order, parsed from the generic YAML tree.
pub fn raw_expressions(yaml: &str) -> Vec<(String, Vec<RawCondition>)> {
    let doc: serde_yaml::Value = serde_yaml::from_str(yaml).unwrap();
    let exprs = doc["expression_evaluator_config"]["expressions"].as_mapping().unwrap();
    exprs
        .iter()
        .map(|(name, body)| {
            let conds = body["conditions"]
                .as_sequence()
                .unwrap()
                .iter()
                .map(|c| RawCondition {
                    feature: c["feature"].as_str().unwrap().to_string(),
                    operator: c["operator"].as_str().unwrap().to_string(),
                    threshold: c.get("threshold").and_then(|v| v.as_f64()),
                    min: c.get("min").and_then(|v| v.as_f64()),
                    max: c.get("max").and_then(|v| v.as_f64()),
                    compare_to: c.get("compare_to").and_then(|v| v.as_str()).map(String::from),
                })
                .collect();
            (name.as_str().unwrap().to_string(), conds)
        })
        .collect()
}

/// Brute-force evaluation: every condition of an intention must hold.
pub fn naive_active(exprs: &[(String, Vec<RawCondition>)], values: &HashMap<&str, f64>) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    'outer: for (name, conds) in exprs {
        for c in conds {
            let v = values[c.feature.as_str()];
            let ok = match c.operator.as_str() {
                ">" => v > c.threshold.unwrap(),
                "<" => v < c.threshold.unwrap(),
                "BETWEEN" => c.min.unwrap() <= v && v <= c.max.unwrap(),
                "DIFF>" => v - values[c.compare_to.as_deref().unwrap()] > c.threshold.unwrap(),
                "DIFF<" => (v - values[c.compare_to.as_deref().unwrap()]).abs() < c.threshold.unwrap(),
                other => panic!("operator {other}"),
            };
            if !ok {
                continue 'outer;
            }
        }
        out.insert(name.clone());
    }
    out
}

/// The wukong profile rules in closed form: num7 suppresses num2; any other
/// surviving intention suppresses left_click.
pub fn wukong_priority(active: &BTreeSet<String>) -> BTreeSet<String> {
    let mut out = active.clone();
    if out.contains("num7") {
        out.remove("num2");
    }
    if out.iter().any(|n| n != "left_click") {
        out.remove("left_click");
    }
    out
}

/// Least squares with intercept via the normal equations. Returns (w, b).
pub fn ols(rows: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, f64) {
    let n = rows.len();
    let p = rows[0].len();
    let x = DMatrix::from_fn(n, p + 1, |i, j| if j == p { 1.0 } else { rows[i][j] });
    let yv = DVector::from_column_slice(y);
    let xtx = x.transpose() * &x;
    let xty = x.transpose() * yv;
    let sol = xtx.cholesky().expect("well-conditioned design").solve(&xty);
    (sol.as_slice()[..p].to_vec(), sol[p])
}
