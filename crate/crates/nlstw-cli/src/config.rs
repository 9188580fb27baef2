//! Experiment configs.
//!
//! A config is a list of `key = value` lines, optionally grouped under
//! `[section]` headers. `#` starts a comment outside of quoted strings.
//! Values are numbers (`1.5`, `-2e-3`), integers, booleans (`true`,
//! `false`), strings (bare `gp` or quoted `"a b"`), number lists
//! (`[-1, 1.5, -1.5]`) and parameter maps (`{rho0 = 0.4, nu = 2}`).
//!
//! Every key has a fixed type; unknown sections and keys are rejected.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use nlstw::nonlinearity::PARAM_NAMES;
use nlstw::{builtin, Kind, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ty {
    Num,
    Int,
    Bool,
    Str,
    List,
    Map,
}

use Ty::*;

/// Sections in canonical order; `""` holds the top-level keys.
pub const SCHEMA: &[(&str, &[(&str, Ty)])] = &[
    ("", &[("model", Str), ("kind", Str), ("r0", Num), ("coeffs", List), ("params", Map), ("seed", Int), ("out", Str)]),
    ("grid", &[("points", Int), ("step", Num), ("half_length", Num)]),
    ("profile", &[("c", Num)]),
    ("diagram", &[("c_min", Num), ("c_max", Num), ("n", Int)]),
    ("classify", &[("c", Num)]),
    ("spectrum", &[("c", Num), ("points", Int), ("half_length", Num), ("mode_csv", Bool)]),
    (
        "evolve",
        &[
            ("c", Num),
            ("initial", Str),
            ("delta", Num),
            ("t_final", Num),
            ("dt", Num),
            ("output_every", Num),
            ("clamp_fraction", Num),
            ("frame", Str),
            ("distances", Bool),
            ("snapshots", Bool),
            ("points", Int),
            ("half_length", Num),
        ],
    ),
    ("distances", &[("c", Num), ("draws", Int), ("amplitude", Num), ("phase_pairs", List)]),
];

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Int(u64),
    Bool(bool),
    Str(String),
    List(Vec<f64>),
    Map(BTreeMap<String, f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: usize,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        match &self.key {
            Some(k) => write!(f, "line {}: {}: {}", self.line, k, self.message),
            None => write!(f, "line {}: {}", self.line, self.message),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<(String, String), Value>,
}

fn lookup(section: &str, key: &str) -> Option<Ty> {
    SCHEMA.iter().find(|s| s.0 == section)?.1.iter().find(|k| k.0 == key).map(|k| k.1)
}

struct Cursor<'a> {
    s: &'a [u8],
    i: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        while self.i < self.s.len() && (self.s[self.i] == b' ' || self.s[self.i] == b'\t') {
            self.i += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.s.get(self.i).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    /// End of line or a comment.
    fn at_end(&mut self) -> bool {
        self.skip_ws();
        matches!(self.peek(), None | Some(b'#'))
    }

    fn token(&mut self) -> &'a str {
        self.skip_ws();
        let start = self.i;
        while self.i < self.s.len() && is_bare(self.s[self.i]) {
            self.i += 1;
        }
        std::str::from_utf8(&self.s[start..self.i]).unwrap()
    }

    fn quoted(&mut self) -> Result<String, String> {
        let mut out = Vec::new();
        self.i += 1;
        loop {
            match self.peek() {
                None => return Err("unterminated string".into()),
                Some(b'"') => {
                    self.i += 1;
                    return String::from_utf8(out).map_err(|e| e.to_string());
                }
                Some(b'\\') => {
                    match self.s.get(self.i + 1) {
                        Some(&c @ (b'"' | b'\\')) => out.push(c),
                        _ => return Err("unknown escape".into()),
                    }
                    self.i += 2;
                }
                Some(c) => {
                    out.push(c);
                    self.i += 1;
                }
            }
        }
    }

    fn number(&mut self) -> Result<f64, String> {
        let t = self.token();
        let v: f64 = t.parse().map_err(|_| format!("expected a number, found {t:?}"))?;
        if !v.is_finite() {
            return Err(format!("{t} is not finite"));
        }
        Ok(v)
    }
}

fn is_bare(c: u8) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, b'_' | b'.' | b'-' | b'+' | b':' | b'/')
}

fn parse_value(cur: &mut Cursor, ty: Ty) -> Result<Value, String> {
    cur.skip_ws();
    Ok(match ty {
        Num => Value::Num(cur.number()?),
        Int => {
            let t = cur.token();
            Value::Int(t.parse().map_err(|_| format!("expected a non-negative integer, found {t:?}"))?)
        }
        Bool => match cur.token() {
            "true" => Value::Bool(true),
            "false" => Value::Bool(false),
            t => return Err(format!("expected true or false, found {t:?}")),
        },
        Str => {
            if cur.peek() == Some(b'"') {
                Value::Str(cur.quoted()?)
            } else {
                let t = cur.token();
                if t.is_empty() {
                    return Err("expected a string".into());
                }
                Value::Str(t.to_string())
            }
        }
        List => {
            if !cur.eat(b'[') {
                return Err("expected [".into());
            }
            let mut v = vec![];
            if !cur.eat(b']') {
                loop {
                    v.push(cur.number()?);
                    if cur.eat(b']') {
                        break;
                    }
                    if !cur.eat(b',') {
                        return Err("expected , or ]".into());
                    }
                }
            }
            Value::List(v)
        }
        Map => {
            if !cur.eat(b'{') {
                return Err("expected {".into());
            }
            let mut m = BTreeMap::new();
            if !cur.eat(b'}') {
                loop {
                    let k = cur.token().to_string();
                    if !PARAM_NAMES.contains(&k.as_str()) {
                        return Err(format!("unknown parameter {k:?}"));
                    }
                    if !cur.eat(b'=') {
                        return Err("expected =".into());
                    }
                    let v = cur.number()?;
                    if m.insert(k.clone(), v).is_some() {
                        return Err(format!("parameter {k} given twice"));
                    }
                    if cur.eat(b'}') {
                        break;
                    }
                    if !cur.eat(b',') {
                        return Err("expected , or }".into());
                    }
                }
            }
            Value::Map(m)
        }
    })
}

impl Config {
    pub fn parse(text: &str) -> Result<Config, ConfigError> {
        let mut cfg = Config::default();
        let mut section = String::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let err = |key: Option<&str>, message: String| ConfigError { line, key: key.map(String::from), message };
            let mut cur = Cursor { s: raw.as_bytes(), i: 0 };
            if cur.at_end() {
                continue;
            }
            if cur.eat(b'[') {
                let name = cur.token();
                if !cur.eat(b']') || !cur.at_end() {
                    return Err(err(None, "malformed section header".into()));
                }
                if name.is_empty() || !SCHEMA.iter().any(|s| s.0 == name) {
                    return Err(err(None, format!("unknown section [{name}]")));
                }
                section = name.to_string();
                continue;
            }
            let key = cur.token();
            if key.is_empty() {
                return Err(err(None, "expected key = value".into()));
            }
            let full = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
            let ty = lookup(&section, key).ok_or_else(|| err(Some(&full), "unknown key".into()))?;
            if !cur.eat(b'=') {
                return Err(err(Some(&full), "expected =".into()));
            }
            let v = parse_value(&mut cur, ty).map_err(|m| err(Some(&full), m))?;
            if !cur.at_end() {
                return Err(err(Some(&full), "trailing characters after value".into()));
            }
            if cfg.values.insert((section.clone(), key.to_string()), v).is_some() {
                return Err(err(Some(&full), "given twice".into()));
            }
        }
        Ok(cfg)
    }

    /// Set a value; the type must match the schema.
    #[cfg_attr(not(test), allow(dead_code))]
    pub fn set(&mut self, section: &str, key: &str, v: Value) -> Result<(), String> {
        let ty = lookup(section, key).ok_or_else(|| format!("unknown key {section}.{key}"))?;
        let ok = matches!(
            (ty, &v),
            (Num, Value::Num(_)) | (Int, Value::Int(_)) | (Bool, Value::Bool(_)) | (Str, Value::Str(_)) | (List, Value::List(_)) | (Map, Value::Map(_))
        );
        if !ok {
            return Err(format!("{section}.{key} has type {ty:?}"));
        }
        self.values.insert((section.to_string(), key.to_string()), v);
        Ok(())
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&Value> {
        self.values.get(&(section.to_string(), key.to_string()))
    }

    pub fn num(&self, section: &str, key: &str) -> Option<f64> {
        match self.get(section, key)? {
            Value::Num(v) => Some(*v),
            _ => None,
        }
    }

    pub fn int(&self, section: &str, key: &str) -> Option<u64> {
        match self.get(section, key)? {
            Value::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn flag(&self, section: &str, key: &str) -> Option<bool> {
        match self.get(section, key)? {
            Value::Bool(v) => Some(*v),
            _ => None,
        }
    }

    pub fn str(&self, section: &str, key: &str) -> Option<&str> {
        match self.get(section, key)? {
            Value::Str(v) => Some(v),
            _ => None,
        }
    }

    pub fn list(&self, section: &str, key: &str) -> Option<&[f64]> {
        match self.get(section, key)? {
            Value::List(v) => Some(v),
            _ => None,
        }
    }

    /// The model block: a builtin name or an explicit description.
    pub fn model_spec(&self) -> Result<ModelSpec, ConfigError> {
        let err = |key: &str, message: String| ConfigError { line: 0, key: Some(key.into()), message };
        if let Some(name) = self.str("", "model") {
            if let Some(k) = ["kind", "r0", "coeffs", "params"].iter().find(|k| self.get("", k).is_some()) {
                return Err(err(k, "not allowed together with model".into()));
            }
            return builtin(name).ok_or_else(|| err("model", format!("unknown builtin model {name:?}")));
        }
        let kind = self.str("", "kind").ok_or_else(|| err("kind", "either model or kind is required".into()))?;
        let kind = Kind::parse(kind).ok_or_else(|| err("kind", format!("unknown kind {kind:?}")))?;
        let params = match self.get("", "params") {
            Some(Value::Map(m)) => m.clone(),
            _ => BTreeMap::new(),
        };
        Ok(ModelSpec {
            kind,
            r0: self.num("", "r0"),
            coeffs: self.list("", "coeffs").map(|c| c.to_vec()).unwrap_or_default(),
            params,
        })
    }

    /// Canonical text: schema order, one key per line, shortest round-trip numbers.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for (section, keys) in SCHEMA {
            let present: Vec<_> = keys.iter().filter_map(|(k, _)| self.get(section, k).map(|v| (k, v))).collect();
            if present.is_empty() {
                continue;
            }
            if !section.is_empty() {
                if !out.is_empty() {
                    out.push('\n');
                }
                writeln!(out, "[{section}]").unwrap();
            }
            for (k, v) in present {
                writeln!(out, "{k} = {}", format_value(v)).unwrap();
            }
        }
        out
    }
}

fn format_value(v: &Value) -> String {
    match v {
        Value::Num(x) => format!("{x:?}"),
        Value::Int(n) => n.to_string(),
        Value::Bool(b) => b.to_string(),
        Value::Str(s) => {
            if !s.is_empty() && s.bytes().all(is_bare) && s != "true" && s != "false" {
                s.clone()
            } else {
                format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
            }
        }
        Value::List(l) => format!("[{}]", l.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")),
        Value::Map(m) => format!("{{{}}}", m.iter().map(|(k, x)| format!("{k} = {x:?}")).collect::<Vec<_>>().join(", ")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_sections_comments_and_types() {
        let text = r#"
# GP at c = 1
kind = polynomial   # shifted basis
r0 = 1
coeffs = [-1, 1.5, -1.5]
params = {rho0 = 0.4, nu = 2}
seed = 7

[evolve]
initial = mode
snapshots = true
out_note_free = 1
"#;
        let e = Config::parse(text).unwrap_err();
        assert_eq!((e.line, e.key.as_deref()), (12, Some("evolve.out_note_free")));
        let cfg = Config::parse(&text.replace("out_note_free = 1\n", "")).unwrap();
        assert_eq!(cfg.list("", "coeffs"), Some(&[-1.0, 1.5, -1.5][..]));
        assert_eq!(cfg.int("", "seed"), Some(7));
        assert_eq!(cfg.str("evolve", "initial"), Some("mode"));
        assert_eq!(cfg.flag("evolve", "snapshots"), Some(true));
        let spec = cfg.model_spec().unwrap();
        assert_eq!(spec.params["nu"], 2.0);
    }

    #[test]
    fn rejects_bad_input_with_line_and_key() {
        let cases = [
            ("[nowhere]\n", 1, None),
            ("r0 = 1\nr0 = 2\n", 2, Some("r0")),
            ("\n\nr0 = abc\n", 3, Some("r0")),
            ("params = {zeta = 1}\n", 1, Some("params")),
            ("[grid]\npoints = -3\n", 2, Some("grid.points")),
            ("r0 = 1 2\n", 1, Some("r0")),
            ("out = \"open\n", 1, Some("out")),
        ];
        for (text, line, key) in cases {
            let e = Config::parse(text).unwrap_err();
            assert_eq!((e.line, e.key.as_deref()), (line, key), "{text:?}: {e}");
        }
    }

    #[test]
    fn model_and_kind_are_exclusive() {
        let cfg = Config::parse("model = gp\nr0 = 2\n").unwrap();
        assert_eq!(cfg.model_spec().unwrap_err().key.as_deref(), Some("r0"));
        assert!(Config::parse("model = nope\n").unwrap().model_spec().is_err());
        assert!(Config::parse("seed = 1\n").unwrap().model_spec().is_err());
    }

    fn value(ty: Ty) -> BoxedStrategy<Value> {
        let num = prop_oneof![any::<f64>().prop_filter("finite", |x| x.is_finite()), -10.0..10.0f64];
        match ty {
            Num => num.prop_map(Value::Num).boxed(),
            Int => any::<u64>().prop_map(Value::Int).boxed(),
            Bool => any::<bool>().prop_map(Value::Bool).boxed(),
            Str => prop_oneof!["[a-z_][a-z0-9_./:-]{0,10}", "[ -~]{0,12}"].prop_map(Value::Str).boxed(),
            List => prop::collection::vec(num, 0..6).prop_map(Value::List).boxed(),
            Map => prop::collection::btree_map(prop::sample::select(&PARAM_NAMES[..]).prop_map(String::from), num, 0..4)
                .prop_map(Value::Map)
                .boxed(),
        }
    }

    fn config() -> impl Strategy<Value = Config> {
        let slots: Vec<(&str, &str, Ty)> =
            SCHEMA.iter().flat_map(|(s, ks)| ks.iter().map(move |(k, t)| (*s, *k, *t))).collect();
        let parts: Vec<_> = slots.into_iter().map(|(s, k, t)| prop::option::of(value(t)).prop_map(move |v| (s, k, v))).collect();
        parts.prop_map(|ps| {
            let mut c = Config::default();
            for (s, k, v) in ps.into_iter().filter_map(|(s, k, v)| v.map(|v| (s, k, v))) {
                c.set(s, k, v).unwrap();
            }
            c
        })
    }

    proptest! {
        #[test]
        fn serialize_then_parse_is_identity(c in config()) {
            let text = c.serialize();
            let back = Config::parse(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
            prop_assert_eq!(&back, &c);
            prop_assert_eq!(back.serialize(), text);
        }
    }
}
