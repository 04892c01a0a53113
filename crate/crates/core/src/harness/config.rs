//! Sweep-config parsing and grid expansion.
//!
//! Accepted grammar (a small indentation-based subset, enough to express the
//! standard sweep files verbatim):
//!
//! ```text
//! program: src/fit_gaussians/fit_gaussians.py   # optional, names the task
//! project: some-project-name                    # optional, ignored
//! method: grid                                  # optional, must be "grid"
//! task: gaussians                               # optional, explicit task
//! parameters:
//!   key:
//!     values: [ 1, 3.5, "text",
//!               4 ]                             # lists may span lines
//!   nested:
//!     parameters:
//!       inner:
//!         values: [2]
//! ```
//!
//! `#` starts a comment. The task comes from `task:` when present, else it
//! is inferred from the `program:`/`project:` strings. Unknown parameter
//! keys are rejected; `setting` values must use the canonical spellings
//! "Accumulate", "Accumulate-Subsample", "Replace".

use std::collections::BTreeMap;
use std::fmt;

use crate::data::Workflow;
use crate::error::{Error, Result};

/// A scalar grid value.
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Str(String),
}

impl Value {
    fn parse(token: &str) -> Value {
        let t = token.trim();
        if (t.starts_with('"') && t.ends_with('"') && t.len() >= 2)
            || (t.starts_with('\'') && t.ends_with('\'') && t.len() >= 2)
        {
            return Value::Str(t[1..t.len() - 1].to_string());
        }
        if let Ok(i) = t.parse::<i64>() {
            return Value::Int(i);
        }
        if let Ok(f) = t.parse::<f64>() {
            return Value::Float(f);
        }
        Value::Str(t.to_string())
    }

    pub fn as_u64(&self) -> Option<u64> {
        match self {
            Value::Int(i) if *i >= 0 => Some(*i as u64),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(f) => Some(*f),
            Value::Str(_) => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(v) => {
                if v.is_infinite() {
                    write!(f, "{}", if *v > 0.0 { "inf" } else { "-inf" })
                } else {
                    write!(f, "{v}")
                }
            }
            Value::Str(s) => write!(f, "{s}"),
        }
    }
}

/// The task a sweep drives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    Gaussians,
    Kdes,
    LinearRegressions,
    Mixture,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Gaussians => "gaussians",
            Task::Kdes => "kdes",
            Task::LinearRegressions => "linear_regressions",
            Task::Mixture => "mixture",
        }
    }

    fn from_name(name: &str) -> Option<Task> {
        match name {
            "gaussians" => Some(Task::Gaussians),
            "kdes" => Some(Task::Kdes),
            "linear_regressions" => Some(Task::LinearRegressions),
            "mixture" => Some(Task::Mixture),
            _ => None,
        }
    }

    /// Grid keys this task accepts (after flattening `data_config`).
    fn allowed_keys(&self) -> &'static [&'static str] {
        match self {
            Task::Gaussians => &[
                "data_dim",
                "num_samples_per_iteration",
                "num_iterations",
                "seed",
                "setting",
                "sigma_squared",
            ],
            Task::Kdes => &[
                "dataset_name",
                "noise",
                "n_features",
                "kernel",
                "kernel_bandwidth",
                "num_samples_per_iteration",
                "num_iterations",
                "seed",
                "setting",
            ],
            Task::LinearRegressions => &[
                "data_dim",
                "num_samples_per_iteration",
                "num_iterations",
                "seed",
                "setting",
                "sigma_squared",
            ],
            Task::Mixture => &[
                "mixture_setting",
                "n_real",
                "n_syn",
                "seed",
                "sigma_squared",
                "data_dim",
                "source_size",
                "test_size",
            ],
        }
    }
}

/// One fully-instantiated grid cell: a flat key → value map.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    values: BTreeMap<String, Value>,
}

impl Cell {
    pub fn get(&self, key: &str) -> Option<&Value> {
        self.values.get(key)
    }

    pub fn u64(&self, key: &str) -> Result<u64> {
        self.get(key)
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::UnknownValue {
                key: key.into(),
                got: self.get(key).map(|v| v.to_string()).unwrap_or_default(),
                allowed: "a non-negative integer".into(),
            })
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        self.get(key)
            .and_then(Value::as_f64)
            .ok_or_else(|| Error::UnknownValue {
                key: key.into(),
                got: self.get(key).map(|v| v.to_string()).unwrap_or_default(),
                allowed: "a number".into(),
            })
    }

    pub fn str(&self, key: &str) -> Result<&str> {
        self.get(key)
            .and_then(Value::as_str)
            .ok_or_else(|| Error::UnknownValue {
                key: key.into(),
                got: self.get(key).map(|v| v.to_string()).unwrap_or_default(),
                allowed: "a string".into(),
            })
    }

    /// Canonical `key=value;` string, keys sorted. Stream derivation and
    /// file naming hash this string, so its format must stay stable.
    pub fn canonical(&self, task: Task) -> String {
        let mut s = format!("task={};", task.name());
        for (k, v) in &self.values {
            s.push_str(k);
            s.push('=');
            s.push_str(&v.to_string());
            s.push(';');
        }
        s
    }

    /// Canonical params string excluding `seed` and `setting` (which have
    /// their own output columns).
    pub fn params_string(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.values {
            if k == "seed" || k == "setting" {
                continue;
            }
            s.push_str(k);
            s.push('=');
            s.push_str(&v.to_string());
            s.push(';');
        }
        s
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Value)> {
        self.values.iter()
    }
}

/// A parsed sweep: task plus the (sorted) parameter grids.
#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub task: Task,
    grids: BTreeMap<String, Vec<Value>>,
}

impl SweepConfig {
    pub fn parse(text: &str) -> Result<SweepConfig> {
        let root = parse_tree(text)?;
        let mut task: Option<Task> = None;
        let mut hint = String::new();
        let mut parameters: Option<&Node> = None;

        for (key, node, line) in &root.children {
            match key.as_str() {
                "program" | "project" => {
                    if let Node::Scalar(s) = node {
                        hint.push_str(s);
                        hint.push(' ');
                    }
                }
                "method" => {
                    if let Node::Scalar(s) = node {
                        if s != "grid" {
                            return Err(Error::UnknownValue {
                                key: "method".into(),
                                got: s.clone(),
                                allowed: "grid".into(),
                            });
                        }
                    }
                }
                "task" => {
                    if let Node::Scalar(s) = node {
                        task = Some(Task::from_name(s).ok_or_else(|| Error::UnknownValue {
                            key: "task".into(),
                            got: s.clone(),
                            allowed: "gaussians, kdes, linear_regressions, mixture".into(),
                        })?);
                    }
                }
                "parameters" => parameters = Some(node),
                other => {
                    return Err(Error::Parse {
                        line: *line,
                        col: 1,
                        msg: format!("unknown top-level key `{other}`"),
                    })
                }
            }
        }

        let task = match task {
            Some(t) => t,
            None => infer_task(&hint).ok_or_else(|| Error::Parse {
                line: 1,
                col: 1,
                msg: "cannot determine task: provide `task:` or a recognizable `program:`".into(),
            })?,
        };

        let params = match parameters {
            Some(Node::Map(_)) => parameters.unwrap(),
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    col: 1,
                    msg: "missing `parameters:` block".into(),
                })
            }
        };

        let mut grids = BTreeMap::new();
        flatten_parameters(params, &mut grids)?;

        // Key vocabulary and value checks.
        let allowed = task.allowed_keys();
        for (key, values) in &grids {
            if !allowed.contains(&key.as_str()) {
                return Err(Error::UnknownKey {
                    key: key.clone(),
                    allowed: allowed.join(", "),
                });
            }
            if values.is_empty() {
                return Err(Error::EmptyGrid(key.clone()));
            }
        }
        if let Some(settings) = grids.get("setting") {
            for v in settings {
                let name = v.as_str().unwrap_or("");
                if !Workflow::ALLOWED_NAMES.contains(&name) {
                    return Err(Error::UnknownValue {
                        key: "setting".into(),
                        got: v.to_string(),
                        allowed: Workflow::ALLOWED_NAMES.join(", "),
                    });
                }
            }
        }
        if let Some(kernels) = grids.get("kernel") {
            for v in kernels {
                if v.as_str() != Some("gaussian") {
                    return Err(Error::UnknownValue {
                        key: "kernel".into(),
                        got: v.to_string(),
                        allowed: "gaussian".into(),
                    });
                }
            }
        }
        if let Some(names) = grids.get("dataset_name") {
            for v in names {
                let ok = matches!(v.as_str(), Some("blobs" | "circles" | "moons" | "swiss_roll"));
                if !ok {
                    return Err(Error::UnknownValue {
                        key: "dataset_name".into(),
                        got: v.to_string(),
                        allowed: "blobs, circles, moons, swiss_roll".into(),
                    });
                }
            }
        }

        Ok(SweepConfig { task, grids })
    }

    pub fn grid(&self, key: &str) -> Option<&[Value]> {
        self.grids.get(key).map(Vec::as_slice)
    }

    pub fn cell_count(&self) -> usize {
        self.grids.values().map(Vec::len).product()
    }

    /// Materialize the cartesian grid, in canonical (sorted-key) order.
    pub fn cells(&self) -> Vec<Cell> {
        let keys: Vec<&String> = self.grids.keys().collect();
        let mut out = Vec::with_capacity(self.cell_count());
        let mut idx = vec![0usize; keys.len()];
        loop {
            let mut values = BTreeMap::new();
            for (k, &i) in keys.iter().zip(&idx) {
                values.insert((*k).clone(), self.grids[*k][i].clone());
            }
            out.push(Cell { values });
            // Odometer increment from the last key.
            let mut pos = keys.len();
            loop {
                if pos == 0 {
                    return out;
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < self.grids[keys[pos]].len() {
                    break;
                }
                idx[pos] = 0;
            }
        }
    }
}

fn infer_task(hint: &str) -> Option<Task> {
    if hint.contains("gaussians") || hint.contains("fit-gaussians") {
        Some(Task::Gaussians)
    } else if hint.contains("kdes") || hint.contains("fit-kdes") {
        Some(Task::Kdes)
    } else if hint.contains("linear_regressions") || hint.contains("lin-regr") {
        Some(Task::LinearRegressions)
    } else if hint.contains("mixture") {
        Some(Task::Mixture)
    } else {
        None
    }
}

/// Parse tree for the indentation format.
enum Node {
    Scalar(String),
    List(Vec<Value>),
    Map(Vec<(String, Node, usize)>),
}

impl Node {
    fn children(&self) -> &[(String, Node, usize)] {
        match self {
            Node::Map(c) => c,
            _ => &[],
        }
    }
}

struct NodeMap {
    children: Vec<(String, Node, usize)>,
}

/// Strip comments and join multi-line bracket lists; returns
/// (indent, key, rest, line_number) tuples.
fn logical_lines(text: &str) -> Result<Vec<(usize, String, String, usize)>> {
    let mut out = Vec::new();
    let mut lines = text.lines().enumerate().peekable();
    while let Some((ln, raw)) = lines.next() {
        let line_no = ln + 1;
        let no_comment = strip_comment(raw);
        if no_comment.trim().is_empty() {
            continue;
        }
        let indent = no_comment.len() - no_comment.trim_start().len();
        let body = no_comment.trim();
        let Some(colon) = find_key_colon(body) else {
            return Err(Error::Parse {
                line: line_no,
                col: indent + 1,
                msg: format!("expected `key:` but found `{body}`"),
            });
        };
        let key = body[..colon].trim().to_string();
        let mut rest = body[colon + 1..].trim().to_string();
        // Multi-line list: keep consuming lines until brackets balance.
        if rest.starts_with('[') {
            let mut depth = bracket_depth(&rest);
            while depth > 0 {
                let Some((_, cont)) = lines.next() else {
                    return Err(Error::Parse {
                        line: line_no,
                        col: indent + 1,
                        msg: "unterminated `[` list".into(),
                    });
                };
                let cont = strip_comment(cont);
                rest.push(' ');
                rest.push_str(cont.trim());
                depth = bracket_depth(&rest);
            }
        }
        out.push((indent, key, rest, line_no));
    }
    Ok(out)
}

fn strip_comment(line: &str) -> String {
    let mut out = String::with_capacity(line.len());
    let mut in_str: Option<char> = None;
    for ch in line.chars() {
        match in_str {
            Some(q) => {
                out.push(ch);
                if ch == q {
                    in_str = None;
                }
            }
            None => {
                if ch == '#' {
                    break;
                }
                if ch == '"' || ch == '\'' {
                    in_str = Some(ch);
                }
                out.push(ch);
            }
        }
    }
    out
}

/// Position of the key/value colon: the first `:` outside quotes that is at
/// end-of-line or followed by whitespace/`[` (so URLs in strings survive).
fn find_key_colon(body: &str) -> Option<usize> {
    let bytes = body.as_bytes();
    let mut in_str: Option<u8> = None;
    for (i, &b) in bytes.iter().enumerate() {
        match in_str {
            Some(q) => {
                if b == q {
                    in_str = None;
                }
            }
            None => {
                if b == b'"' || b == b'\'' {
                    in_str = Some(b);
                } else if b == b':' {
                    let next = bytes.get(i + 1);
                    if next.is_none() || next == Some(&b' ') || next == Some(&b'\t') {
                        return Some(i);
                    }
                }
            }
        }
    }
    None
}

fn bracket_depth(s: &str) -> i32 {
    let mut depth = 0;
    let mut in_str: Option<char> = None;
    for ch in s.chars() {
        match in_str {
            Some(q) => {
                if ch == q {
                    in_str = None;
                }
            }
            None => match ch {
                '"' | '\'' => in_str = Some(ch),
                '[' => depth += 1,
                ']' => depth -= 1,
                _ => {}
            },
        }
    }
    depth
}

fn split_list(rest: &str, line: usize) -> Result<Vec<Value>> {
    let inner = rest
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or(Error::Parse {
            line,
            col: 1,
            msg: "malformed list".into(),
        })?;
    let mut items = Vec::new();
    let mut current = String::new();
    let mut in_str: Option<char> = None;
    for ch in inner.chars() {
        match in_str {
            Some(q) => {
                current.push(ch);
                if ch == q {
                    in_str = None;
                }
            }
            None => match ch {
                '"' | '\'' => {
                    in_str = Some(ch);
                    current.push(ch);
                }
                ',' => {
                    if !current.trim().is_empty() {
                        items.push(Value::parse(&current));
                    }
                    current.clear();
                }
                _ => current.push(ch),
            },
        }
    }
    if !current.trim().is_empty() {
        items.push(Value::parse(&current));
    }
    Ok(items)
}

fn parse_tree(text: &str) -> Result<NodeMap> {
    let lines = logical_lines(text)?;
    let (children, consumed) = parse_block(&lines, 0, 0)?;
    if consumed != lines.len() {
        let (indent, key, _, line) = &lines[consumed];
        return Err(Error::Parse {
            line: *line,
            col: indent + 1,
            msg: format!("unexpected indentation at key `{key}`"),
        });
    }
    Ok(NodeMap { children })
}

/// Parse entries at exactly `indent`, starting from `pos`.
fn parse_block(
    lines: &[(usize, String, String, usize)],
    pos: usize,
    indent: usize,
) -> Result<(Vec<(String, Node, usize)>, usize)> {
    let mut children = Vec::new();
    let mut i = pos;
    while i < lines.len() {
        let (ind, key, rest, line) = &lines[i];
        if *ind < indent {
            break;
        }
        if *ind > indent {
            return Err(Error::Parse {
                line: *line,
                col: ind + 1,
                msg: format!("unexpected indentation at key `{key}`"),
            });
        }
        if rest.is_empty() {
            // Block: children are the following deeper-indented lines.
            let child_indent = lines.get(i + 1).map(|(ci, ..)| *ci).unwrap_or(indent);
            if child_indent <= indent {
                return Err(Error::Parse {
                    line: *line,
                    col: ind + 1,
                    msg: format!("key `{key}` has no value and no indented block"),
                });
            }
            let (sub, next) = parse_block(lines, i + 1, child_indent)?;
            children.push((key.clone(), Node::Map(sub), *line));
            i = next;
        } else if rest.starts_with('[') {
            children.push((key.clone(), Node::List(split_list(rest, *line)?), *line));
            i += 1;
        } else {
            let v = match Value::parse(rest) {
                Value::Str(s) => s,
                other => other.to_string(),
            };
            children.push((key.clone(), Node::Scalar(v), *line));
            i += 1;
        }
    }
    Ok((children, i))
}

/// Flatten a `parameters:` block into key → values grids. Nested
/// `parameters:` blocks (data_config, dataset_kwargs) contribute their inner
/// keys directly.
fn flatten_parameters(node: &Node, grids: &mut BTreeMap<String, Vec<Value>>) -> Result<()> {
    for (key, child, line) in node.children() {
        match child {
            Node::Map(entries) => {
                // Either `values: [...]`, or a nested `parameters:` wrapper.
                let mut handled = false;
                for (k2, c2, l2) in entries {
                    match k2.as_str() {
                        "values" => {
                            let Node::List(vals) = c2 else {
                                return Err(Error::Parse {
                                    line: *l2,
                                    col: 1,
                                    msg: format!("`values` under `{key}` must be a list"),
                                });
                            };
                            if grids.insert(key.clone(), vals.clone()).is_some() {
                                return Err(Error::Parse {
                                    line: *l2,
                                    col: 1,
                                    msg: format!("duplicate grid key `{key}`"),
                                });
                            }
                            handled = true;
                        }
                        "parameters" => {
                            flatten_parameters(c2, grids)?;
                            handled = true;
                        }
                        other => {
                            return Err(Error::Parse {
                                line: *l2,
                                col: 1,
                                msg: format!("expected `values` or `parameters` under `{key}`, found `{other}`"),
                            })
                        }
                    }
                }
                if !handled {
                    return Err(Error::Parse {
                        line: *line,
                        col: 1,
                        msg: format!("grid key `{key}` has no `values`"),
                    });
                }
            }
            Node::List(vals) => {
                // Allow the shorthand `key: [a, b]`.
                grids.insert(key.clone(), vals.clone());
            }
            Node::Scalar(s) => {
                // Shorthand `key: scalar` is a singleton grid.
                grids.insert(key.clone(), vec![Value::parse(s)]);
            }
        }
    }
    Ok(())
}
