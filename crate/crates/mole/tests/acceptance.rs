mod common;

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use common::{build_bench, README_LICENSE};
use mole::commands::{run_evaluate, run_extract, EvaluateOptions, ExtractOptions};
use mole_core::document::{truncate_context, Document, SourceFormat};
use mole_core::eval::{aggregate_report, match_values, score_paper, weighted_average, ReportFilter};
use mole_core::extract::{accept_output, extract_random, Strategy};
use mole_core::gateway::{estimate_cost, ChatReply, CostLedger, Failure, FakeClock, Gateway, GatewayError, ModelConfig, NoUsage, ScriptedBackend};
use mole_core::prompt::{generate_synthetic_examples, MessageSequence, Role};
use mole_core::repair::repair_json;
use mole_core::schema::{apply_length_profile, parse_schema, validate_schema, OptionLiteral};
use mole_core::eval::length_adherence;
use mole_core::validate::validate_record;
use mole_core::{AnswerType, AnswerValue, AttributeSpec, Category, LengthProfile, MetadataRecord, ProfileLevel, Schema};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

/// Runs one criterion, prints a PASS/FAIL line that bypasses output capture,
/// then fails the test on FAIL.
fn criterion(n: u32, title: &str, body: impl FnOnce() -> Result<String, String>) {
    let outcome = match catch_unwind(AssertUnwindSafe(body)) {
        Ok(r) => r,
        Err(p) => Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into())),
    };
    let line = match &outcome {
        Ok(detail) => format!("criterion {n:>2}: PASS  {title}: {detail}\n"),
        Err(why) => format!("criterion {n:>2}: FAIL  {title}: {why}\n"),
    };
    let _ = std::io::stderr().write_all(line.as_bytes());
    if let Err(why) = outcome {
        panic!("criterion {n} failed: {why}");
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

#[test]
fn c01_schema_fixture() {
    criterion(1, "Arabic schema fixture", || {
        let raw = fs::read_to_string(fixtures().join("schemas/ar.json")).map_err(|e| e.to_string())?;
        let start = Instant::now();
        let schema = parse_schema(&raw, Category::Ar).map_err(|e| e.to_string())?;
        let violations = validate_schema(&schema);
        let elapsed = start.elapsed();
        ensure(schema.len() == 32, || format!("{} attributes", schema.len()))?;
        let license = schema.get("License").ok_or("no License")?;
        let n_opts = license.options.as_ref().map_or(0, Vec::len);
        ensure(n_opts == 44, || format!("License has {n_opts} options"))?;
        ensure(license.answer_min == 1 && license.answer_max == Some(1), || {
            format!("License bounds {}..{:?}", license.answer_min, license.answer_max)
        })?;
        ensure(violations.is_empty(), || format!("violations: {violations:?}"))?;
        ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
        Ok(format!("32 attributes, License 44 options [1,1], no violations, {elapsed:?}"))
    });
}

#[test]
fn c02_oracle_fixed_point() {
    criterion(2, "gold scored against itself", || {
        let per_category = [4, 4, 3, 3, 3, 3];
        let mut n = 0;
        for (c, k) in Category::ALL.iter().zip(per_category) {
            let schema = c.builtin_schema();
            for ex in generate_synthetic_examples(&schema, k, 2024).map_err(|e| e.to_string())? {
                let gold = mole_core::eval::GoldRecord {
                    category: *c,
                    paper_id: format!("{}-{n}", c.code()),
                    publication_year: None,
                    exists: schema.names().map(|a| (a.to_owned(), true)).collect(),
                    values: ex.gold.clone(),
                };
                let s = score_paper(&ex.gold, &gold, &schema).map_err(|e| e.to_string())?;
                ensure((s.precision, s.recall, s.f1) == (100.0, 100.0, 100.0), || {
                    format!("{}: {} / {} / {}", gold.paper_id, s.precision, s.recall, s.f1)
                })?;
                n += 1;
            }
        }
        ensure(n == 20, || format!("{n} records"))?;
        Ok("20 records across 6 categories at 100.0/100.0/100.0".into())
    });
}

#[test]
fn c03_flexible_matching_oracle() {
    criterion(3, "list matching vs brute-force symmetric difference", || {
        const ALPHABET: [&str; 8] = ["arabic", "english", "french", "japanese", "russian", "hindi", "swahili", "urdu"];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draw = |rng: &mut ChaCha8Rng| -> (Vec<String>, u8) {
            let len = rng.random_range(0..=5);
            let mut mask = 0u8;
            let items = (0..len)
                .map(|_| {
                    let i = rng.random_range(0..ALPHABET.len());
                    mask |= 1 << i;
                    if rng.random_bool(0.3) {
                        ALPHABET[i].to_uppercase()
                    } else {
                        ALPHABET[i].to_owned()
                    }
                })
                .collect();
            (items, mask)
        };
        let mut hits = 0;
        for case in 0..10_000 {
            let (a, ma) = draw(&mut rng);
            let (b, mb) = draw(&mut rng);
            let oracle = if (ma ^ mb).count_ones() <= 1 { 1.0 } else { 0.0 };
            let got = match_values(&AnswerValue::TextList(a.clone()), &AnswerValue::TextList(b.clone()), &AnswerType::TextList);
            ensure(got == oracle, || format!("case {case}: {a:?} vs {b:?} gave {got}, oracle {oracle}"))?;
            hits += oracle as usize;
        }
        Ok(format!("10000/10000 agree ({hits} matches)"))
    });
}

#[test]
fn c04_weighted_average() {
    criterion(4, "overall F1 from category scores", || {
        // Category order: ar, en, jp, fr, ru, multi; printed average last.
        let rows: [(&str, [f64; 6], f64); 9] = [
            ("Gemini 2.5 Pro", [68.73, 80.91, 77.60, 75.06, 78.00, 71.09], 75.23),
            ("GPT 4o", [67.32, 76.14, 71.00, 72.95, 73.85, 67.00], 71.38),
            ("DeepSeek V3", [66.64, 73.78, 71.26, 72.13, 71.48, 64.88], 70.03),
            ("Claude", [65.50, 71.14, 71.63, 75.71, 75.62, 68.45], 71.34),
            ("Llama", [60.77, 73.38, 72.35, 70.01, 71.30, 68.02], 69.30),
            ("Qwen", [66.26, 67.37, 70.05, 71.94, 65.78, 65.88], 67.88),
            ("Gemma", [59.08, 69.35, 70.93, 69.29, 67.88, 60.81], 66.23),
            ("Keyword", [45.37, 43.89, 44.72, 45.81, 46.21, 37.36], 43.89),
            ("Random", [32.29, 27.86, 32.74, 30.27, 32.13, 23.18], 29.74),
        ];
        let order = ["ar", "en", "jp", "fr", "ru", "multi"];
        let papers_per_category = 21;
        let mut out = Vec::new();
        for (model, scores, printed) in rows {
            let items: Vec<(f64, usize)> = scores.iter().map(|s| (*s, papers_per_category)).collect();
            let avg = weighted_average(&items).ok_or("empty")?;
            ensure((avg - printed).abs() <= 0.01, || format!("{model}: {avg:.4} vs {printed}"))?;

            // Same figure through the report aggregation over 126 papers.
            let mut paper_scores = Vec::new();
            for (code, s) in order.iter().zip(scores) {
                let cat = Category::from_code(code).ok_or("bad code")?;
                for i in 0..papers_per_category {
                    paper_scores.push(mole_core::eval::PaperScore {
                        paper_id: format!("{code}-{i}"),
                        category: cat,
                        publication_year: None,
                        matches: Vec::new(),
                        precision: s,
                        recall: s,
                        f1: s,
                    });
                }
            }
            let rep = aggregate_report(&paper_scores, &ReportFilter::default()).map_err(|e| e.to_string())?;
            ensure((rep.overall.f1 - printed).abs() <= 0.01, || format!("{model} report: {:.4}", rep.overall.f1))?;
            out.push(format!("{model} {avg:.2}"));
        }
        Ok(out.join(", "))
    });
}

#[test]
fn c05_cost_arithmetic() {
    criterion(5, "cost from token counts", || {
        let mut ledger = CostLedger::new();
        ledger.set_price("gemini-2.5-pro", 1.25, 10.0);
        ledger.set_price("gpt-4o", 2.5, 10.0);
        ledger.add("gemini-2.5-pro", 2_163_823, 160_811);
        ledger.add("gpt-4o", 2_163_823, 80_514);
        let rows = estimate_cost(&ledger);
        let usd = |m: &str| rows.iter().find(|r| r.model == m).and_then(|r| r.usd).ok_or(format!("no row for {m}"));
        let (gemini, gpt) = (usd("gemini-2.5-pro")?, usd("gpt-4o")?);
        ensure((gemini - 4.31).abs() <= 0.01, || format!("gemini {gemini:.4}"))?;
        ensure((gpt - 6.21).abs() <= 0.01, || format!("gpt-4o {gpt:.4}"))?;
        Ok(format!("gemini {gemini:.4} USD, gpt-4o {gpt:.4} USD"))
    });
}

fn request() -> (MessageSequence, ModelConfig) {
    let mut m = MessageSequence::new("system");
    m.push(Role::User, "Paper Text:\nnothing");
    (m, ModelConfig::new("scripted"))
}

#[test]
fn c06_retry_contract() {
    criterion(6, "retry count and delays", || {
        let (msgs, cfg) = request();
        let failures = [
            Err(Failure::Transport("reset".into())),
            Err(Failure::Status(500)),
            Ok(ChatReply {
                content: "no json here".into(),
                input_tokens: 5,
                output_tokens: 1,
            }),
            Err(Failure::Status(429)),
            Err(Failure::Malformed("bad body".into())),
        ];
        for k in 1..=6u32 {
            let mut script: Vec<Result<ChatReply, Failure>> =
                failures.iter().cycle().take(k as usize - 1).cloned().collect();
            script.push(Ok(ChatReply {
                content: "{\"Name\": \"ok\"}".into(),
                input_tokens: 10,
                output_tokens: 2,
            }));
            let (backend, clock) = (ScriptedBackend::new(script), FakeClock::default());
            let r = Gateway::new(&backend, &clock, NoUsage)
                .complete_with_retry(&msgs, &cfg, accept_output)
                .map_err(|e| format!("k={k}: {e}"))?;
            ensure(r.attempts_used == k, || format!("k={k}: attempts_used {}", r.attempts_used))?;
            ensure(backend.requests().len() == k as usize, || format!("k={k}: {} requests", backend.requests().len()))?;
            let want = Duration::from_secs(2) * (k - 1);
            ensure(clock.total() == want, || format!("k={k}: slept {:?}", clock.total()))?;
        }
        let script = vec![Err(Failure::Status(503)); 6];
        let (backend, clock) = (ScriptedBackend::new(script), FakeClock::default());
        let err = Gateway::new(&backend, &clock, NoUsage).complete_with_retry(&msgs, &cfg, accept_output);
        ensure(
            matches!(err, Err(GatewayError::Exhausted { attempts: 6, .. })),
            || format!("six failures gave {err:?}"),
        )?;
        ensure(backend.requests().len() == 6, || format!("{} requests", backend.requests().len()))?;
        ensure(clock.total() == Duration::from_secs(10), || format!("slept {:?}", clock.total()))?;
        Ok("k=1..6 used k attempts with (k-1)x2 s delay; 6 failures stop after 6 attempts, 10 s".into())
    });
}

#[test]
fn c07_repair_corpus() {
    criterion(7, "JSON repair corpus", || {
        let cases: Vec<(&str, Value)> = vec![
            ("```json\n{\"Name\": \"Aurora\"}\n```", json!({"Name": "Aurora"})),
            ("```\n{\"Year\": 2021}\n```", json!({"Year": 2021})),
            ("```JSON\n{\"a\": [1, 2, 3]}\n```\n", json!({"a": [1, 2, 3]})),
            (
                "Here is the metadata:\n```json\n{\"License\": \"MIT License\"}\n```\nLet me know if you need more.",
                json!({"License": "MIT License"}),
            ),
            ("Sure! {\"Volume\": 1200.0, \"Unit\": \"sentences\"} Hope this helps.", json!({"Volume": 1200.0, "Unit": "sentences"})),
            ("The answer is {\"Tokenized\": false}.", json!({"Tokenized": false})),
            (
                "{\"Tasks\": [\"machine translation\", \"summarization\",],}",
                json!({"Tasks": ["machine translation", "summarization"]}),
            ),
            ("{\"a\": 1,}", json!({"a": 1})),
            (
                "```json\n{\"Subsets\": [{\"Name\": \"MSA\", \"Volume\": 10,},],}\n```",
                json!({"Subsets": [{"Name": "MSA", "Volume": 10}]}),
            ),
            ("json\n{\"Host\": \"GitHub\"}", json!({"Host": "GitHub"})),
            ("Output:\n\n{\n  \"Name\": \"Basalt\",\n  \"Year\": 2020,\n}\n\nDone.", json!({"Name": "Basalt", "Year": 2020})),
            (
                "{\"Description\": \"uses {curly} braces, and commas,]\"}",
                json!({"Description": "uses {curly} braces, and commas,]"}),
            ),
            ("   \n\n{\"Access\": \"Free\"}\n\n  ", json!({"Access": "Free"})),
            ("Note {not json} first, then {\"Cost\": \"\"}", json!({"Cost": ""})),
            ("```json\n{\"Abstract\": \"Line one.\\nLine two.\"}\n```", json!({"Abstract": "Line one.\nLine two."})),
            (
                "{\"Authors\": [\"Jane Doe\", \"John Smith\"], \"Affiliations\": [\"Example University\",]}",
                json!({"Authors": ["Jane Doe", "John Smith"], "Affiliations": ["Example University"]}),
            ),
            ("I extracted: ```json {\"Ethical Risks\": \"Low\"} ```", json!({"Ethical Risks": "Low"})),
            ("{\"nested\": {\"inner\": [1, {\"x\": 2,},],},}", json!({"nested": {"inner": [1, {"x": 2}]}})),
            (
                "Result:\n```json\n{\"Name\": \"Ember\", \"HF Link\": \"https://huggingface.co/datasets/x/ember\"}\n```\n```json\n{\"Name\": \"other\"}\n```",
                json!({"Name": "Ember", "HF Link": "https://huggingface.co/datasets/x/ember"}),
            ),
            ("{\"Dialect\": \"ملخص عربي\", \"Script\": \"日本語\",}", json!({"Dialect": "ملخص عربي", "Script": "日本語"})),
        ];
        let broken = [
            "I could not find any metadata in this paper.",
            "{\"Name\": \"Aurora\"",
            "[\"a\", \"b\"]",
            "{'Name': 'Aurora'}",
            "```json\n{\"Name\": Aurora}\n```",
        ];
        ensure(cases.len() == 20, || format!("{} cases", cases.len()))?;
        for (i, (raw, want)) in cases.iter().enumerate() {
            let got = repair_json(raw).map_err(|e| format!("case {}: {e}", i + 1))?;
            ensure(&Value::Object(got.clone()) == want, || format!("case {}: got {got:?}", i + 1))?;
        }
        for raw in broken {
            ensure(repair_json(raw).is_err(), || format!("{raw:?} repaired"))?;
        }
        Ok("20/20 repaired, 5/5 rejected".into())
    });
}

fn fuzz_value(rng: &mut ChaCha8Rng, options: &[String], depth: u32) -> Value {
    const WORDS: [&str; 10] = ["corpus", "speech", "Arabic", "news", "web", "tweets", "2,000", "1.5k", "none", "N/A"];
    match rng.random_range(0..if depth > 2 { 9 } else { 12 }) {
        0 => Value::Null,
        1 => Value::Bool(rng.random_bool(0.5)),
        2 => json!(rng.random_range(-5i64..3000)),
        3 => json!(rng.random_range(-10.0f64..1e6)),
        4 if !options.is_empty() => {
            let o = &options[rng.random_range(0..options.len())];
            match rng.random_range(0..3) {
                0 => Value::String(o.clone()),
                1 => Value::String(o.to_uppercase()),
                _ => Value::String(format!("{}x", o)),
            }
        }
        5 => {
            let n = rng.random_range(0..60);
            Value::String((0..n).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect::<Vec<_>>().join(" "))
        }
        6 => Value::String(format!("https://github.com/u/r{}", rng.random_range(0..99))),
        7 => Value::String(String::new()),
        8 => Value::String(format!("{}", rng.random_range(1900..2030))),
        9 | 10 => {
            let n = rng.random_range(0..6);
            Value::Array((0..n).map(|_| fuzz_value(rng, options, depth + 1)).collect())
        }
        _ => {
            let mut m = Map::new();
            for k in ["Name", "Volume", "Unit", "Dialect", "junk"] {
                if rng.random_bool(0.6) {
                    m.insert(k.into(), fuzz_value(rng, options, depth + 1));
                }
            }
            Value::Object(m)
        }
    }
}

fn fuzz_object(rng: &mut ChaCha8Rng, schema: &Schema) -> Map<String, Value> {
    let mut raw = Map::new();
    for spec in &schema.attributes {
        if rng.random_bool(0.85) {
            let options: Vec<String> = spec.text_options().into_iter().map(str::to_owned).collect();
            let key = match rng.random_range(0..10) {
                0 => spec.name.to_lowercase(),
                1 => format!(" {} ", spec.name),
                _ => spec.name.clone(),
            };
            raw.insert(key, fuzz_value(rng, &options, 0));
        }
    }
    for i in 0..rng.random_range(0..3) {
        raw.insert(format!("extra_{i}"), fuzz_value(rng, &[], 1));
    }
    raw
}

#[test]
fn c08_validation_idempotence() {
    criterion(8, "validation is total, complete and idempotent", || {
        let schemas: Vec<Schema> = Category::ALL.iter().map(|c| c.builtin_schema()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut corrective = 0;
        for i in 0..1000 {
            let schema = &schemas[i % schemas.len()];
            let raw = fuzz_object(&mut rng, schema);
            let (rec, log) = validate_record(&raw, schema);
            ensure(rec.is_complete_for(schema), || format!("object {i}: incomplete record"))?;
            let (again, log2) = validate_record(&rec.to_json_object(), schema);
            ensure(again == rec, || format!("object {i}: second pass changed the record\n{raw:?}"))?;
            ensure(log2.is_clean(), || format!("object {i}: second pass corrected {:?}", log2.entries()))?;
            corrective += usize::from(!log.is_clean());
        }
        Ok(format!("1000 objects, {corrective} needed correction, all fixed points"))
    });
}

#[test]
fn c09_length_profiles() {
    criterion(9, "length profiles are nested", || {
        let read = |name: &str| -> Result<LengthProfile, String> {
            let raw = fs::read_to_string(fixtures().join(format!("profiles/{name}.json"))).map_err(|e| e.to_string())?;
            LengthProfile::parse(&raw).map_err(|e| e.to_string())
        };
        let files = [read("low")?, read("mid")?, read("high")?];
        for (f, level) in files.iter().zip(ProfileLevel::ALL) {
            ensure(*f == LengthProfile::builtin(level), || format!("{} differs from builtin", level.name()))?;
        }
        let mut desc = Vec::new();
        for f in &files {
            let s = apply_length_profile(&Category::Ar.builtin_schema(), f).map_err(|e| e.to_string())?;
            desc.push(s.get("Description").ok_or("no Description")?.answer_max);
        }
        ensure(desc == [Some(50), Some(25), Some(12)], || format!("Description max {desc:?}"))?;
        ensure(files[1].bounds_for("Description") == Some((0, Some(25))), || "mid override".into())?;
        ensure(files[2].bounds_for("Description") == Some((0, Some(12))), || "high override".into())?;

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut records = 0;
        for c in Category::ALL {
            let base = c.builtin_schema();
            let tightened: Vec<Schema> =
                files.iter().map(|f| apply_length_profile(&base, f)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
            let mut recs: Vec<MetadataRecord> = Vec::new();
            recs.extend(generate_synthetic_examples(&base, 5, 9).map_err(|e| e.to_string())?.into_iter().map(|e| e.gold));
            recs.extend((0..50).map(|s| extract_random("p", &base, s).record));
            recs.extend((0..100).map(|_| validate_record(&fuzz_object(&mut rng, &base), &base).0));
            for words in [0usize, 5, 12, 13, 25, 26, 50, 51, 80] {
                let mut r = MetadataRecord::defaults(&base);
                r.set("Description", AnswerValue::Text(vec!["w"; words].join(" ")));
                recs.push(r);
            }
            for r in &recs {
                let a: Vec<f64> = tightened.iter().map(|s| length_adherence(r, s)).collect();
                ensure(a[0] >= a[1] && a[1] >= a[2], || format!("{c}: adherence {a:?}"))?;
            }
            records += recs.len();
        }
        Ok(format!("Description 50/25/12; Low >= Mid >= High on {records} records"))
    });
}

fn ceil_div(n: usize, d: usize) -> usize {
    n.div_ceil(d)
}

#[test]
fn c10_truncation() {
    criterion(10, "context truncation", || {
        const CHARS: [char; 8] = ['a', 'b', ' ', '\n', 'ع', 'ب', '日', 'é'];
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for t in 0..1000 {
            let n = rng.random_range(0..400);
            let text: String = (0..n).map(|_| CHARS[rng.random_range(0..CHARS.len())]).collect();
            let (pa, pb) = (rng.random_range(1..=100usize), rng.random_range(1..=100usize));
            let (a, b) = (pa as f64 / 100.0, pb as f64 / 100.0);
            let d = Document::new("t", SourceFormat::PlainText, &text);
            let once = truncate_context(&d, a).map_err(|e| e.to_string())?;
            let keep = ceil_div(pa * n, 100);
            let want: String = text.chars().take(keep).collect();
            ensure(once.text() == want, || format!("triple {t}: prefix of {n} at {a} has {} chars", once.char_count()))?;
            let twice = truncate_context(&once, b).map_err(|e| e.to_string())?;
            let keep2 = ceil_div(pb * keep, 100);
            let want2: String = text.chars().take(keep2).collect();
            ensure(twice.text() == want2, || format!("triple {t}: composed length {} vs {keep2}", twice.char_count()))?;
        }

        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let text: String = (0..1001).map(|i| CHARS[(i * 7) % CHARS.len()]).collect();
        common::write(&dir.path().join("papers/frac.txt"), &text);
        common::write(&dir.path().join("mock/frac.json"), &json!({"extract": ["{}"]}).to_string());
        let mut opts = ExtractOptions::new(Category::Ar.builtin_schema(), vec![dir.path().join("papers")], dir.path().join("out"));
        opts.fraction = 0.25;
        opts.mock_dir = Some(dir.path().join("mock"));
        opts.record_requests = true;
        opts.model = ModelConfig::new("mock");
        let m = run_extract(&opts).map_err(|e| format!("{e:#}"))?;
        ensure(m.failed() == 0, || "extraction failed".into())?;
        let captured = fs::read_to_string(dir.path().join("out/requests/frac.jsonl")).map_err(|e| e.to_string())?;
        let body: Value = serde_json::from_str(captured.lines().next().ok_or("no request")?).map_err(|e| e.to_string())?;
        let user = body["messages"].as_array().and_then(|m| m.last()).and_then(|m| m["content"].as_str()).ok_or("no user message")?;
        let (_, paper) = user.split_once("\n\nPaper Text:\n").ok_or("no paper section")?;
        let want: String = text.chars().take(251).collect();
        ensure(paper == want, || format!("captured {} chars", paper.chars().count()))?;
        Ok("1000 triples hold prefix and ceil-composition; 0.25 of 1001 chars sends exactly 251".into())
    });
}

fn choice_schema(k: usize) -> Schema {
    let mut spec = AttributeSpec::new("Choice", "Which option?", AnswerType::Text);
    spec.options = Some((0..k).map(|i| OptionLiteral::Text(format!("option {i}"))).collect());
    spec.answer_min = 1;
    spec.answer_max = Some(1);
    Schema::new(Category::Ar, vec![spec])
}

#[test]
fn c11_random_baseline() {
    criterion(11, "random baseline statistics", || {
        let mut out = Vec::new();
        for k in [2usize, 4, 10] {
            let schema = choice_schema(k);
            let gold = AnswerValue::Text("option 1".into());
            let mut seen = BTreeSet::new();
            let hits: f64 = (0..10_000u64)
                .map(|seed| {
                    let v = extract_random("p", &schema, seed).record.get("Choice").cloned().unwrap_or(AnswerValue::Flag(false));
                    if let AnswerValue::Text(t) = &v {
                        seen.insert(t.clone());
                    }
                    match_values(&v, &gold, &AnswerType::Text)
                })
                .sum();
            let rate = hits / 10_000.0;
            ensure((rate - 1.0 / k as f64).abs() <= 0.02, || format!("k={k}: rate {rate}"))?;
            ensure(seen.len() == k, || format!("k={k}: only {} distinct answers", seen.len()))?;
            out.push(format!("k={k} {rate:.4}"));
        }
        for c in Category::ALL {
            let schema = c.builtin_schema();
            for seed in [0u64, 1, 77, u64::MAX] {
                let (a, b) = (extract_random("p", &schema, seed), extract_random("p", &schema, seed));
                ensure(a.record == b.record && a.record.to_json_string() == b.record.to_json_string(), || {
                    format!("{c} seed {seed} differs")
                })?;
            }
        }
        Ok(format!("{}; same seed gives identical records", out.join(", ")))
    });
}

fn extract_all(bench: &common::Bench, out: &Path, browse: bool) -> Result<PathBuf, String> {
    let combined = out.join("combined");
    for c in Category::ALL {
        let mut opts = ExtractOptions::new(c.builtin_schema(), vec![bench.paper_dir(c)], out.join(c.code()));
        opts.strategy = Strategy::Llm;
        opts.model = ModelConfig::new("mock-model");
        opts.mock_dir = Some(bench.mock_dir());
        opts.fetch_cache = Some(bench.cache_dir());
        opts.browse = browse;
        opts.record_requests = true;
        opts.jobs = 2;
        let m = run_extract(&opts).map_err(|e| format!("{c}: {e:#}"))?;
        ensure(m.failed() == 0, || format!("{c}: {:?}", m.papers))?;
        for p in &bench.papers {
            if p.category == c {
                fs::create_dir_all(&combined).map_err(|e| e.to_string())?;
                fs::copy(out.join(c.code()).join(format!("{}.json", p.id)), combined.join(format!("{}.json", p.id)))
                    .map_err(|e| e.to_string())?;
            }
        }
    }
    Ok(combined)
}

fn evaluate(bench: &common::Bench, preds: &Path, out: &Path) -> Result<mole_core::eval::ScoreReport, String> {
    let opts = EvaluateOptions {
        predictions: preds.to_owned(),
        gold: bench.gold_dir(),
        schemas: Vec::new(),
        profiles: ProfileLevel::ALL.iter().map(|l| (l.name().to_owned(), LengthProfile::builtin(*l))).collect(),
        year_after: None,
        out: out.to_owned(),
        prices: Vec::new(),
        label: "mock".into(),
    };
    run_evaluate(&opts).map_err(|e| format!("{e:#}"))
}

#[test]
fn c12_offline_end_to_end() {
    criterion(12, "offline extract, browse and evaluate", || {
        let start = Instant::now();
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let bench = build_bench(&dir.path().join("bench"), 1, 12);
        ensure(bench.papers.len() == 6, || format!("{} papers", bench.papers.len()))?;

        let plain = extract_all(&bench, &dir.path().join("plain"), false)?;
        let browsed = extract_all(&bench, &dir.path().join("browsed"), true)?;
        for p in &bench.papers {
            let schema = p.category.builtin_schema();
            let load = |d: &Path| -> Result<MetadataRecord, String> {
                let raw = fs::read_to_string(d.join(format!("{}.json", p.id))).map_err(|e| e.to_string())?;
                MetadataRecord::from_json_str(&raw, &schema).map_err(|e| e.to_string())
            };
            let before = load(&plain)?;
            let after = load(&browsed)?;
            ensure(before.get("License") == Some(&AnswerValue::Text("unknown".into())), || {
                format!("{}: first pass License {:?}", p.id, before.get("License"))
            })?;
            ensure(after.get("License") == Some(&AnswerValue::Text(README_LICENSE.into())), || {
                format!("{}: browsed License {:?}", p.id, after.get("License"))
            })?;
            let requests = fs::read_to_string(dir.path().join("browsed").join(p.category.code()).join(format!("requests/{}.jsonl", p.id)))
                .map_err(|e| e.to_string())?;
            let browse_req = requests.lines().last().ok_or("no browse request")?;
            ensure(browse_req.contains(&p.readme_url) && browse_req.contains(&format!("License: {README_LICENSE}")), || {
                format!("{}: README not in browse request", p.id)
            })?;
        }
        let r_plain = evaluate(&bench, &plain, &dir.path().join("report_plain"))?;
        let r_browsed = evaluate(&bench, &browsed, &dir.path().join("report_browsed"))?;
        let license = |r: &mole_core::eval::ScoreReport| r.attributes.iter().find(|a| a.attribute == "License").map(|a| a.score);
        ensure(r_plain.papers == 6 && r_browsed.papers == 6, || "paper counts".into())?;
        ensure(license(&r_plain) == Some(0.0) && license(&r_browsed) == Some(100.0), || {
            format!("License score {:?} -> {:?}", license(&r_plain), license(&r_browsed))
        })?;
        ensure(r_browsed.overall.f1 == 100.0 && r_browsed.overall.f1 > r_plain.overall.f1, || {
            format!("F1 {} -> {}", r_plain.overall.f1, r_browsed.overall.f1)
        })?;
        ensure(dir.path().join("report_browsed/report.md").exists(), || "no report.md".into())?;
        let elapsed = start.elapsed();
        ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
        Ok(format!(
            "6 papers, License unknown -> {README_LICENSE}, F1 {:.2} -> {:.2}, {elapsed:?}",
            r_plain.overall.f1, r_browsed.overall.f1
        ))
    });
}
