//! Tabular output: CSV with a `#` metadata preamble, or JSON.

use serde_json::{json, Map, Value as Json};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Bool(bool),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) if v.is_nan() => "nan".into(),
            Cell::Num(v) if v.is_infinite() => if *v > 0.0 { "inf".into() } else { "-inf".into() },
            Cell::Num(v) => format!("{v:.11e}"),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(b) => (*b as u8).to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Json {
        match self {
            // 12 significant digits, same as CSV; non-finite becomes null
            Cell::Num(v) if v.is_finite() => format!("{v:.11e}").parse::<f64>().map(Json::from).unwrap_or(Json::Null),
            Cell::Num(_) => Json::Null,
            Cell::Int(v) => json!(v),
            Cell::Bool(b) => json!(b),
            Cell::Text(s) => json!(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub metadata: Vec<(String, String)>,
}

impl Dataset {
    pub fn new(columns: &[&str]) -> Dataset {
        Dataset { columns: columns.iter().map(|c| c.to_string()).collect(), ..Dataset::default() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn meta(&mut self, key: &str, value: impl Into<String>) {
        self.metadata.push((key.to_string(), value.into()));
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.metadata {
            s.push_str(&format!("# {k}: {v}\n"));
        }
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(Cell::csv).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn to_json(&self) -> String {
        let mut meta = Map::new();
        for (k, v) in &self.metadata {
            meta.insert(k.clone(), json!(v));
        }
        let rows: Vec<Json> = self.rows.iter().map(|r| Json::Array(r.iter().map(Cell::json).collect())).collect();
        let doc = json!({ "metadata": meta, "columns": self.columns, "rows": rows });
        serde_json::to_string_pretty(&doc).expect("dataset serialises") + "\n"
    }
}
