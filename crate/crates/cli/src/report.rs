use std::path::Path;

use serde_json::{Map, Value};

/// One self-check result.
pub struct CheckLine {
    pub name: &'static str,
    pub property: &'static str,
    pub hard: bool,
    pub passed: bool,
    pub detail: String,
}

/// Collects the output of one command and prints it either as
/// `key = value` lines or as one JSON object with the same keys.
pub struct Report {
    json: bool,
    fields: Map<String, Value>,
    lines: Vec<String>,
    checks: Vec<CheckLine>,
}

impl Report {
    pub fn new(json: bool) -> Self {
        Report {
            json,
            fields: Map::new(),
            lines: Vec::new(),
            checks: Vec::new(),
        }
    }

    fn put(&mut self, key: &str, shown: String, value: Value) {
        self.lines.push(format!("{key} = {shown}"));
        self.fields.insert(key.to_string(), value);
    }

    pub fn num(&mut self, key: &str, v: f64) {
        let value = serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number);
        self.put(key, format!("{v:?}"), value);
    }

    pub fn int(&mut self, key: &str, v: usize) {
        self.put(key, v.to_string(), Value::from(v));
    }

    pub fn text(&mut self, key: &str, v: &str) {
        self.put(key, v.to_string(), Value::from(v));
    }

    pub fn flag(&mut self, key: &str, v: bool) {
        self.put(key, v.to_string(), Value::from(v));
    }

    pub fn path(&mut self, key: &str, p: &Path) {
        let s = p.display().to_string();
        self.put(key, s.clone(), Value::from(s));
    }

    pub fn check(&mut self, line: CheckLine) {
        self.checks.push(line);
    }

    fn checks_table(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        let mut out = String::new();
        for c in &self.checks {
            let status = match (c.passed, c.hard) {
                (true, _) => "PASS",
                (false, true) => "FAIL",
                (false, false) => "WARN",
            };
            let kind = if c.hard { "hard" } else { "soft" };
            out.push_str(&format!(
                "{status}  {kind}  {:<width$}  {}\n      {}\n",
                c.name, c.property, c.detail
            ));
        }
        out
    }

    pub fn render(&self) -> String {
        if self.json {
            let mut obj = self.fields.clone();
            if !self.checks.is_empty() {
                let arr = self
                    .checks
                    .iter()
                    .map(|c| {
                        serde_json::json!({
                            "name": c.name,
                            "property": c.property,
                            "hard": c.hard,
                            "passed": c.passed,
                            "detail": c.detail,
                        })
                    })
                    .collect();
                obj.insert("checks".into(), Value::Array(arr));
            }
            Value::Object(obj).to_string() + "\n"
        } else {
            let mut out = self.checks_table();
            for l in &self.lines {
                out.push_str(l);
                out.push('\n');
            }
            out
        }
    }

    pub fn print(&self) {
        print!("{}", self.render());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_and_json_share_keys() {
        let mut r = Report::new(false);
        r.num("tau1", 0.04);
        r.text("state", "S");
        r.flag("boundary", false);
        assert_eq!(r.render(), "tau1 = 0.04\nstate = S\nboundary = false\n");
        let mut j = Report::new(true);
        j.num("tau1", 0.04);
        j.text("state", "S");
        j.num("bad", f64::NAN);
        let v: Value = serde_json::from_str(&j.render()).unwrap();
        assert_eq!(v["tau1"], 0.04);
        assert_eq!(v["state"], "S");
        assert!(v["bad"].is_null());
    }

    #[test]
    fn json_keeps_insertion_order() {
        let mut j = Report::new(true);
        j.num("z", 1.0);
        j.num("a", 2.0);
        assert_eq!(j.render(), "{\"z\":1.0,\"a\":2.0}\n");
    }
}
