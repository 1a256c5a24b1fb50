//! Deterministic fixture corpora: templated MiniPy description/code pairs,
//! FlowDSL trigger/action programs, and a copy-stress set whose target
//! identifiers each appear exactly once corpus-wide (so any terminal
//! frequency threshold above one makes them out-of-vocabulary and forces the
//! pointer network to copy them from the input).

use std::fs;
use std::io;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::DatasetLine;
use crate::minilang::{flow_channels, flow_functions, Language};

pub const DEFAULT_SEED: u64 = 2024;
pub const MINIPY_TRAIN_COUNT: usize = 200;
pub const MINIPY_DEV_COUNT: usize = 40;
pub const FLOWDSL_TRAIN_COUNT: usize = 100;
pub const FLOWDSL_DEV_COUNT: usize = 30;
pub const COPY_SET_COUNT: usize = 24;
/// The overfit subset is the first `OVERFIT_COUNT` lines of the training set.
pub const OVERFIT_COUNT: usize = 30;

const VARS: &[&str] = &[
    "result", "value", "items", "total", "count", "name", "text", "parts", "line", "entry",
    "key", "user", "data", "output", "flag",
];

const FUNCS: &[&str] = &[
    "process", "compute", "format", "filter_items", "update", "merge", "split", "join_parts",
    "render_page", "fetch", "parse_int", "clean", "load", "save", "notify", "blankout",
    "lookup", "select",
];

const OBJS: &[&str] = &["self", "obj", "app", "request", "response", "config", "session"];

const ATTRS: &[&str] = &["path", "status", "cache", "index", "size", "owner", "label", "mode"];

const STRINGS: &[&str] = &[
    "cache entry", "hello world", "locale", "created at", "B", "utf 8", "note saved", "done",
];

const COPY_LEFT: &[&str] = &[
    "aqua", "bold", "cold", "dim", "echo", "flax", "grim", "husk", "iris", "jade", "kelp", "lush",
];
const COPY_RIGHT: &[&str] = &["widget", "beacon", "ledger", "marble", "nugget", "pylon"];

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &'a [&'a str]) -> &'a str {
    pool[rng.gen_range(0..pool.len())]
}

fn pick2<'a>(rng: &mut ChaCha8Rng, pool: &'a [&'a str]) -> (&'a str, &'a str) {
    let a = rng.gen_range(0..pool.len());
    let mut b = rng.gen_range(0..pool.len() - 1);
    if b >= a {
        b += 1;
    }
    (pool[a], pool[b])
}

fn minipy_pair(rng: &mut ChaCha8Rng) -> (String, String) {
    match rng.gen_range(0..16) {
        0 => {
            let v = pick(rng, VARS);
            let n = rng.gen_range(0..20);
            (format!("substitute {n} for {v}"), format!("{v} = {n}"))
        }
        1 => {
            let (a, b) = pick2(rng, VARS);
            (format!("substitute {a} for {b}"), format!("{b} = {a}"))
        }
        2 => {
            let v = pick(rng, VARS);
            let s = pick(rng, STRINGS);
            (format!("{v} is a string '{s}'"), format!("{v} = '{s}'"))
        }
        3 => {
            let f = pick(rng, FUNCS);
            let x = pick(rng, VARS);
            (format!("call the function {f} with an argument {x}"), format!("{f}({x})"))
        }
        4 => {
            let f = pick(rng, FUNCS);
            let (x, y) = pick2(rng, VARS);
            (
                format!("call the function {f} with arguments {x} and {y}"),
                format!("{f}({x}, {y})"),
            )
        }
        5 => {
            let f = pick(rng, FUNCS);
            let x = pick(rng, VARS);
            let v = pick(rng, VARS);
            (
                format!("call the function {f} with an argument {x} , substitute the result for {v}"),
                format!("{v} = {f}({x})"),
            )
        }
        6 => {
            let o = pick(rng, OBJS);
            let m = pick(rng, FUNCS);
            let x = pick(rng, VARS);
            (
                format!("call the method {o}.{m} with an argument {x}"),
                format!("{o}.{m}({x})"),
            )
        }
        7 => {
            let f = pick(rng, FUNCS);
            let x = pick(rng, VARS);
            let k = pick(rng, ATTRS);
            let val = if rng.gen_bool(0.5) { "True" } else { "False" };
            (
                format!("call the function {f} with {x} and {k} set to {val}"),
                format!("{f}({x}, {k}={val})"),
            )
        }
        8 => {
            let o = pick(rng, OBJS);
            let a = pick(rng, ATTRS);
            let v = pick(rng, VARS);
            (format!("substitute {o}.{a} for {v}"), format!("{v} = {o}.{a}"))
        }
        9 => {
            let (a, b) = pick2(rng, VARS);
            let c = pick(rng, VARS);
            let (word, op) = match rng.gen_range(0..4) {
                0 => ("add", "+"),
                1 => ("subtract", "-"),
                2 => ("multiply", "*"),
                _ => ("divide", "/"),
            };
            (
                format!("{word} {a} and {b} , substitute the result for {c}"),
                format!("{c} = {a} {op} {b}"),
            )
        }
        10 => {
            let a = pick(rng, VARS);
            let n = rng.gen_range(0..20);
            let f = pick(rng, FUNCS);
            let (word, op) = if rng.gen_bool(0.5) { ("less", "<") } else { ("greater", ">") };
            (
                format!("if {a} is {word} than {n} , call the function {f} with an argument {a}"),
                format!("if {a} {op} {n}: {f}({a}) end"),
            )
        }
        11 => {
            let i = pick(rng, VARS);
            let items = pick(rng, VARS);
            let f = pick(rng, FUNCS);
            (
                format!("for every {i} in {items} , call the function {f} with an argument {i}"),
                format!("for {i} in {items}: {f}({i}) end"),
            )
        }
        12 => {
            let v = pick(rng, VARS);
            let p = pick(rng, VARS);
            (
                format!("{v} is a lambda function with an argument {p} which returns {p}"),
                format!("{v} = lambda {p}: {p}"),
            )
        }
        13 => {
            let a = pick(rng, VARS);
            let n = rng.gen_range(0..20);
            let (f, g) = pick2(rng, FUNCS);
            (
                format!("if {a} equals {n} , call the function {f} , otherwise call the function {g}"),
                format!("if {a} == {n}: {f}() else: {g}() end"),
            )
        }
        14 => {
            let f = pick(rng, FUNCS);
            let s = pick(rng, STRINGS);
            (format!("call the function {f} with the string '{s}'"), format!("{f}('{s}')"))
        }
        _ => {
            let f = pick(rng, FUNCS);
            let o = pick(rng, OBJS);
            let a = pick(rng, ATTRS);
            (format!("call the function {f} with {o}.{a}"), format!("{f}({o}.{a})"))
        }
    }
}

fn unique_lines(
    prefix: &str,
    n: usize,
    rng: &mut ChaCha8Rng,
    mut gen: impl FnMut(&mut ChaCha8Rng) -> (String, String),
) -> Vec<DatasetLine> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let (nl, code) = gen(rng);
        if seen.insert(code.clone()) {
            out.push(DatasetLine { id: format!("{prefix}{:04}", out.len()), nl, code });
        }
    }
    out
}

pub fn generate_minipy(n: usize, seed: u64) -> Vec<DatasetLine> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    unique_lines("mp", n, &mut rng, minipy_pair)
}

/// Camel-case names spelled out as lowercase words, the learnable signal
/// connecting descriptions to channels and functions.
fn spelled(name: &str) -> String {
    crate::transition::tokenize_terminal(name)
        .iter()
        .map(|w| w.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn generate_flowdsl(n: usize, seed: u64) -> Vec<DatasetLine> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    unique_lines("fl", n, &mut rng, |rng| {
        let tc = pick(rng, flow_channels());
        let tf = pick(rng, flow_functions());
        let ac = pick(rng, flow_channels());
        let af = pick(rng, flow_functions());
        let nl = format!(
            "when {} {} then {} {}",
            spelled(tc),
            spelled(tf),
            spelled(ac),
            spelled(af)
        );
        let code = format!("IF {tc}.{tf} THEN {ac}.{af}");
        (nl, code)
    })
}

/// Every target contains one identifier that occurs exactly once in the
/// whole set and is present in the description.
pub fn generate_copy_set(n: usize, seed: u64) -> Vec<DatasetLine> {
    assert!(n <= COPY_LEFT.len() * COPY_RIGHT.len(), "not enough unique identifiers");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut combos: Vec<String> = COPY_LEFT
        .iter()
        .flat_map(|l| COPY_RIGHT.iter().map(move |r| format!("{l}_{r}")))
        .collect();
    // Deterministic shuffle.
    for i in (1..combos.len()).rev() {
        let j = rng.gen_range(0..=i);
        combos.swap(i, j);
    }
    combos
        .into_iter()
        .take(n)
        .enumerate()
        .map(|(i, unique)| {
            let f = FUNCS[i % 4];
            DatasetLine {
                id: format!("cp{i:04}"),
                nl: format!("call the function {f} with an argument {unique}"),
                code: format!("{f}({unique})"),
            }
        })
        .collect()
}

pub fn to_jsonl(lines: &[DatasetLine]) -> String {
    let mut out = String::new();
    for line in lines {
        out.push_str(&serde_json::to_string(line).expect("dataset lines serialize"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub count: usize,
    pub language: String,
    pub grammar_file: String,
    pub grammar_hash: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub minipy_productions: usize,
    pub minipy_node_types: usize,
    pub flowdsl_productions: usize,
    pub flowdsl_node_types: usize,
    pub datasets: Vec<ManifestEntry>,
}

/// Writes the grammar files, the corpora and the manifest into `dir`.
pub fn write_fixtures(dir: &Path, seed: u64) -> io::Result<Manifest> {
    fs::create_dir_all(dir)?;
    let minipy = Language::MiniPy.grammar();
    let flowdsl = Language::FlowDsl.grammar();
    fs::write(dir.join("minipy.grammar"), Language::MiniPy.grammar_text())?;
    fs::write(dir.join("flowdsl.grammar"), Language::FlowDsl.grammar_text())?;

    let sets: Vec<(&str, Language, Vec<DatasetLine>)> = vec![
        ("minipy_train.jsonl", Language::MiniPy, generate_minipy(MINIPY_TRAIN_COUNT, seed)),
        ("minipy_dev.jsonl", Language::MiniPy, generate_minipy(MINIPY_DEV_COUNT, seed ^ 0x5eed)),
        ("minipy_copy.jsonl", Language::MiniPy, generate_copy_set(COPY_SET_COUNT, seed)),
        ("flowdsl_train.jsonl", Language::FlowDsl, generate_flowdsl(FLOWDSL_TRAIN_COUNT, seed)),
        ("flowdsl_dev.jsonl", Language::FlowDsl, generate_flowdsl(FLOWDSL_DEV_COUNT, seed ^ 0xf10d)),
    ];
    let mut datasets = Vec::new();
    for (name, language, lines) in &sets {
        fs::write(dir.join(name), to_jsonl(lines))?;
        let (grammar_file, hash) = match language {
            Language::MiniPy => ("minipy.grammar", minipy.hash()),
            Language::FlowDsl => ("flowdsl.grammar", flowdsl.hash()),
        };
        datasets.push(ManifestEntry {
            file: name.to_string(),
            count: lines.len(),
            language: language.name().to_string(),
            grammar_file: grammar_file.to_string(),
            grammar_hash: hash,
        });
    }
    let manifest = Manifest {
        seed,
        minipy_productions: minipy.productions.len(),
        minipy_node_types: minipy.node_types.len(),
        flowdsl_productions: flowdsl.productions.len(),
        flowdsl_node_types: flowdsl.node_types.len(),
        datasets,
    };
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    Ok(manifest)
}

/// Path of the fixtures bundled with the crate.
pub fn bundled_dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::load_dataset;

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(to_jsonl(&generate_minipy(50, 7)), to_jsonl(&generate_minipy(50, 7)));
        assert_eq!(to_jsonl(&generate_flowdsl(20, 7)), to_jsonl(&generate_flowdsl(20, 7)));
        assert_ne!(to_jsonl(&generate_minipy(50, 7)), to_jsonl(&generate_minipy(50, 8)));
    }

    #[test]
    fn every_generated_example_is_derivable() {
        let g = Language::MiniPy.grammar();
        let text = to_jsonl(&generate_minipy(60, DEFAULT_SEED));
        let report = load_dataset(&text, &g, Language::MiniPy).unwrap();
        assert_eq!(report.examples.len(), 60);
        assert!(report.skipped.is_empty(), "skips: {:?}", report.skipped);

        let g = Language::FlowDsl.grammar();
        let text = to_jsonl(&generate_flowdsl(40, DEFAULT_SEED));
        let report = load_dataset(&text, &g, Language::FlowDsl).unwrap();
        assert_eq!(report.examples.len(), 40);
        assert!(report.skipped.is_empty());
    }

    #[test]
    fn copy_set_identifiers_are_unique_and_in_the_description() {
        let lines = generate_copy_set(COPY_SET_COUNT, DEFAULT_SEED);
        let mut seen = std::collections::HashSet::new();
        for line in &lines {
            let unique = line
                .code
                .split(['(', ')'])
                .nth(1)
                .expect("call with one argument");
            assert!(seen.insert(unique.to_string()), "identifier reused: {unique}");
            assert!(line.nl.contains(unique), "description must contain {unique}");
        }
    }
}
