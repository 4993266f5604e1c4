#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use mole::net::seed_cache;
use mole_core::eval::GoldRecord;
use mole_core::prompt::generate_synthetic_examples;
use mole_core::value::AnswerValue;
use mole_core::{Category, MetadataRecord};

pub const README_LICENSE: &str = "CC BY 4.0";

/// One synthetic paper with its gold annotation and canned model replies.
pub struct BenchPaper {
    pub id: String,
    pub category: Category,
    pub path: PathBuf,
    pub gold: GoldRecord,
    pub readme_url: String,
}

/// A synthetic benchmark on disk: `papers/<code>/<id>.txt`, `gold/<id>.json`,
/// `mock/<id>.json` and a fetch cache holding each dataset's README.
pub struct Bench {
    pub root: PathBuf,
    pub papers: Vec<BenchPaper>,
}

impl Bench {
    pub fn gold_dir(&self) -> PathBuf {
        self.root.join("gold")
    }

    pub fn mock_dir(&self) -> PathBuf {
        self.root.join("mock")
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.root.join("cache")
    }

    pub fn paper_dir(&self, c: Category) -> PathBuf {
        self.root.join("papers").join(c.code())
    }
}

fn as_github_raw(link: &str) -> String {
    let repo = link.trim_start_matches("https://github.com/");
    format!("https://raw.githubusercontent.com/{repo}/HEAD/README.md")
}

/// `per_category` papers for each category. The paper never states the
/// license: the first-pass reply says "unknown" and the browse reply, like
/// the gold record, carries the README license.
pub fn build_bench(root: &Path, per_category: usize, seed: u64) -> Bench {
    let mut papers = Vec::new();
    for (ci, &category) in Category::ALL.iter().enumerate() {
        let schema = category.builtin_schema();
        let examples = generate_synthetic_examples(&schema, per_category, seed + ci as u64).expect("synthetic examples");
        for (i, ex) in examples.into_iter().enumerate() {
            let id = format!("{}_{:02}", category.code(), i + 1);
            let mut gold_values = ex.gold.clone();
            assert!(gold_values.set("License", AnswerValue::Text(README_LICENSE.into())));
            let mut prior = ex.gold.clone();
            assert!(prior.set("License", AnswerValue::Text("unknown".into())));
            let link = match gold_values.get("Link") {
                Some(AnswerValue::Url(u)) => u.clone(),
                other => panic!("synthetic link missing: {other:?}"),
            };
            let readme_url = as_github_raw(&link);
            let readme = format!("# {id}\n\nSynthetic corpus.\n\n## License\n\nLicense: {README_LICENSE}\n");
            seed_cache(&root.join("cache"), &readme_url, &readme).expect("seed cache");

            let path = root.join("papers").join(category.code()).join(format!("{id}.txt"));
            write(&path, &ex.paper_text.replace("License", "Terms"));
            let mock = serde_json::json!({
                "extract": [format!("```json\n{}\n```", prior.to_json_string())],
                "browse": [gold_values.to_json_string()],
            });
            write(&root.join("mock").join(format!("{id}.json")), &mock.to_string());

            let gold = GoldRecord {
                category,
                paper_id: id.clone(),
                publication_year: year_of(&gold_values),
                exists: schema.names().map(|n| (n.to_owned(), n != "License")).collect(),
                values: gold_values,
            };
            write(&root.join("gold").join(format!("{id}.json")), &gold.to_json_string());
            papers.push(BenchPaper {
                id,
                category,
                path,
                gold,
                readme_url,
            });
        }
    }
    Bench {
        root: root.to_owned(),
        papers,
    }
}

fn year_of(rec: &MetadataRecord) -> Option<i32> {
    match rec.get("Year") {
        Some(AnswerValue::Year(y)) if *y != 0 => Some(*y),
        _ => None,
    }
}

pub fn write(path: &Path, body: &str) {
    fs::create_dir_all(path.parent().expect("parent")).expect("mkdir");
    fs::write(path, body).expect("write");
}
