#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const LABELS: [&str; 10] = [
    "anger",
    "anticipation",
    "disgust",
    "fear",
    "joy",
    "negative",
    "positive",
    "sadness",
    "surprise",
    "trust",
];

const POSITIVE_WORDS: [(&str, &[&str]); 8] = [
    ("great", &["joy", "positive", "trust"]),
    ("lovely", &["joy", "positive", "anticipation"]),
    ("clean", &["positive", "trust"]),
    ("friendly", &["joy", "positive", "trust"]),
    ("comfortable", &["positive", "joy"]),
    ("excellent", &["joy", "positive", "trust", "anticipation"]),
    ("delightful", &["joy", "positive", "surprise"]),
    ("happy", &["joy", "positive", "anticipation", "trust"]),
];

const NEGATIVE_WORDS: [(&str, &[&str]); 8] = [
    ("dirty", &["disgust", "negative"]),
    ("rude", &["anger", "disgust", "negative"]),
    (
        "awful",
        &["anger", "disgust", "fear", "negative", "sadness"],
    ),
    (
        "terrible",
        &["anger", "disgust", "fear", "negative", "sadness"],
    ),
    ("disgusting", &["anger", "disgust", "fear", "negative"]),
    ("broken", &["anger", "fear", "negative", "sadness"]),
    ("noisy", &["anger", "negative"]),
    ("horrible", &["anger", "disgust", "fear", "negative"]),
];

const NEUTRAL_WORDS: [&str; 14] = [
    "room",
    "hotel",
    "stay",
    "staff",
    "bed",
    "breakfast",
    "location",
    "night",
    "the",
    "was",
    "and",
    "we",
    "our",
    "very",
];

fn nrc_lines(words: &[(String, Vec<&str>)]) -> String {
    let mut out = String::new();
    let mut sorted: Vec<&(String, Vec<&str>)> = words.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    for (word, labels) in sorted {
        for l in LABELS {
            let flag = u8::from(labels.contains(&l));
            out.push_str(&format!("{word}\t{l}\t{flag}\n"));
        }
    }
    out
}

/// Small NRC-format lexicon covering the fixture vocabulary.
pub fn fixture_lexicon_tsv() -> String {
    let mut words: Vec<(String, Vec<&str>)> = POSITIVE_WORDS
        .iter()
        .chain(NEGATIVE_WORDS.iter())
        .map(|(w, l)| (w.to_string(), l.to_vec()))
        .collect();
    words.push(("hotel".into(), vec![]));
    nrc_lines(&words)
}

fn letters(mut i: usize) -> String {
    let mut s = String::new();
    loop {
        s.push((b'a' + (i % 26) as u8) as char);
        i /= 26;
        if i == 0 {
            break;
        }
    }
    s
}

/// Deterministic NRC-format lexicon of `words` alphabetic entries, each
/// carrying 3 to 9 labels.
pub fn reference_lexicon_tsv(words: usize) -> (String, usize) {
    let mut associations = 0;
    let entries: Vec<(String, Vec<&str>)> = (0..words)
        .map(|i| {
            let labels: Vec<&str> = LABELS
                .iter()
                .enumerate()
                .filter(|(j, _)| (i * 7 + j * 13) % 10 < 3 + (i % 7))
                .map(|(_, l)| *l)
                .collect();
            associations += labels.len();
            (format!("ref{}", letters(i)), labels)
        })
        .collect();
    (nrc_lines(&entries), associations)
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub const RAW_COLUMNS: [&str; 18] = [
    "id",
    "dateAdded",
    "dateUpdated",
    "address",
    "categories",
    "primaryCategories",
    "city",
    "country",
    "keys",
    "name",
    "postalCode",
    "province",
    "reviews.date",
    "reviews.rating",
    "reviews.text",
    "reviews.userCity",
    "reviews.username",
    "websites",
];

/// Raw hotel-review export in the vendor schema: `country` and
/// `primaryCategories` are constant, `postalCode` is 20% missing and
/// `reviews.userCity` half missing.
pub fn raw_reviews_csv(rows: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cities = ["Austin", "Boston", "Denver", "Miami", "Seattle"];
    let mut out = RAW_COLUMNS.join(",");
    out.push('\n');
    for i in 0..rows {
        let rating: u32 = match rng.random_range(0..100) {
            0..15 => 1,
            15..22 => 2,
            22..35 => 3,
            35..58 => 4,
            _ => 5,
        };
        let tokens = rng.random_range(12..48);
        let lean = f64::from(rating - 1) / 4.0;
        let words: Vec<&str> = (0..tokens)
            .map(|_| {
                let u: f64 = rng.random();
                if u < 0.04 + 0.22 * lean {
                    POSITIVE_WORDS[rng.random_range(0..POSITIVE_WORDS.len())].0
                } else if u < 0.30 {
                    NEGATIVE_WORDS[rng.random_range(0..NEGATIVE_WORDS.len())].0
                } else {
                    NEUTRAL_WORDS[rng.random_range(0..NEUTRAL_WORDS.len())]
                }
            })
            .collect();
        let mut text = words.join(" ");
        if i % 9 == 0 {
            text.push_str(", really.");
        }
        let city = cities[i % cities.len()];
        let postal = if i % 5 == 0 {
            String::new()
        } else {
            format!("{:05}", 10000 + i * 37 % 9000)
        };
        let user_city = if i % 2 == 0 { "" } else { city };
        let cells = [
            format!("AV{i:06}"),
            format!("2018-01-{:02}T00:00:00Z", i % 28 + 1),
            format!("2019-02-{:02}T00:00:00Z", i % 28 + 1),
            format!("{} Main St", 100 + i % 50),
            "Hotels,Lodging".to_string(),
            "Accommodation & Food Services".to_string(),
            city.to_string(),
            "US".to_string(),
            format!("us/{}/hotel{}", city.to_lowercase(), i % 40),
            format!("Hotel {}", i % 40),
            postal,
            "TX".to_string(),
            format!("2017-0{}-15T00:00:00Z", i % 9 + 1),
            rating.to_string(),
            text,
            user_city.to_string(),
            format!("user{i}"),
            format!("https://hotel{}.example.com", i % 40),
        ];
        let line: Vec<String> = cells.iter().map(|c| csv_field(c)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Runs the `sentiscope` binary in `cwd` with no inherited seed override.
pub fn sentiscope(cwd: &Path, args: &[&str], seed_env: Option<&str>) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sentiscope"));
    cmd.args(args)
        .current_dir(cwd)
        .env_remove("SENTISCOPE_SEED")
        .env("RUST_LOG", "warn");
    if let Some(s) = seed_env {
        cmd.env("SENTISCOPE_SEED", s);
    }
    let out = cmd.output().expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

/// Writes the raw fixture, lexicon and a small-model config into `dir`.
pub fn pipeline_fixture(dir: &Path, rows: usize) -> PathBuf {
    std::fs::write(dir.join("raw.csv"), raw_reviews_csv(rows, 11)).unwrap();
    std::fs::write(dir.join("lexicon.tsv"), fixture_lexicon_tsv()).unwrap();
    let config = serde_json::json!({
        "seed": 5,
        "paths": {
            "input_csv": "raw.csv",
            "lexicon_tsv": "lexicon.tsv",
            "output_dir": "out"
        },
        "extract": { "holdout_size": 40 },
        "stats": { "histogram_bins": 12 },
        "resampling": { "folds": 3, "repeats": 1 },
        "models": {
            "random_forest": { "tree_count": 25 },
            "gbm": { "tree_count": 30 }
        },
        "explain": {
            "selection": { "1": 2, "5": 2 },
            "permutations": 2,
            "distribution_cap": 50,
            "grid_size": 11
        }
    });
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    path
}

/// Every file under `root` with its bytes, sorted by relative path.
pub fn snapshot(root: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(base: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(base, &path, out);
            } else {
                let rel = path
                    .strip_prefix(base)
                    .unwrap()
                    .to_string_lossy()
                    .into_owned();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

pub const PIPELINE: [&[&str]; 9] = [
    &["prepare"],
    &["extract"],
    &["stats"],
    &["benchmark", "--task", "regression"],
    &["benchmark", "--task", "classification"],
    &["train", "--algorithm", "random_forest"],
    &["explain", "--mode", "importance"],
    &["explain", "--mode", "breakdown"],
    &["explain", "--mode", "whatif"],
];

/// Runs the whole pipeline in `dir` against `config`; panics on failure.
pub fn run_pipeline(dir: &Path, config: &Path) {
    let config = config.to_str().unwrap();
    for step in PIPELINE {
        let mut args = step.to_vec();
        args.extend(["--config", config]);
        let r = sentiscope(dir, &args, None);
        assert_eq!(r.code, 0, "{step:?} failed:\n{}", r.stderr);
    }
}
