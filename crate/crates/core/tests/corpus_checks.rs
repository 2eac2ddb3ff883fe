//! Corpus hygiene: every bundled golden design parses, elaborates, lints
//! clean, round-trips through the printer, and simulates without X on its
//! outputs under the default suite.

use rtlmend_core::corpus::{default_corpus_dir, load_corpus, validate_corpus};
use rtlmend_core::elaborate::parse_and_elaborate;
use rtlmend_core::lint::lint;
use rtlmend_core::parser::parse_str;
use rtlmend_core::printer::print;
use rtlmend_core::sim::simulate;
use rtlmend_core::source::SourceFile;
use rtlmend_core::stimulus::{default_suite, SuiteConfig};

#[test]
fn corpus_loads_and_validates() {
    let corpus = load_corpus(default_corpus_dir()).expect("corpus loads");
    assert!(corpus.len() >= 27, "corpus has {} entries", corpus.len());
    validate_corpus(&corpus).expect("corpus validates");
    // ten families
    let mut families: Vec<&str> = corpus.iter().map(|e| e.family.as_str()).collect();
    families.sort();
    families.dedup();
    assert_eq!(families.len(), 10, "{families:?}");
}

#[test]
fn corpus_is_lint_clean() {
    let corpus = load_corpus(default_corpus_dir()).unwrap();
    for entry in &corpus {
        let (design, elab) = parse_and_elaborate(&entry.source)
            .unwrap_or_else(|d| panic!("{} does not elaborate: {d:?}", entry.name));
        let warns = lint(&design, &elab);
        assert!(warns.is_empty(), "{} has warnings: {warns:?}", entry.name);
    }
}

#[test]
fn corpus_round_trips() {
    let corpus = load_corpus(default_corpus_dir()).unwrap();
    for entry in &corpus {
        let d1 = parse_str(&entry.name, &entry.source.text);
        let printed = print(&d1);
        let d2 = parse_str(&format!("{}-printed", entry.name), &printed);
        assert!(d1.structurally_equal(&d2), "{} does not round-trip", entry.name);
        assert_eq!(printed, print(&d2), "{} printing is not idempotent", entry.name);
    }
}

#[test]
fn corpus_simulates_with_known_outputs() {
    let corpus = load_corpus(default_corpus_dir()).unwrap();
    for entry in &corpus {
        let (_, elab) = parse_and_elaborate(&entry.source).unwrap();
        let suite = default_suite(&elab, &SuiteConfig { seeds: 2, cycles_per_seed: 32, master_seed: 3 }).unwrap();
        for stim in &suite {
            let trace = simulate(&elab, stim)
                .unwrap_or_else(|e| panic!("{} fails to simulate: {e}", entry.name));
            for &out in &elab.top_outputs {
                let path = &elab.signal(out).path;
                let v = trace.query(path, trace.horizon).unwrap();
                assert!(
                    v.is_fully_known(),
                    "{}: output {} is {} at the horizon",
                    entry.name,
                    path,
                    v
                );
            }
        }
    }
}

#[test]
fn spans_cover_every_item() {
    let corpus = load_corpus(default_corpus_dir()).unwrap();
    for entry in &corpus {
        let d = parse_str(&entry.name, &entry.source.text);
        for m in &d.modules {
            assert!(m.span.end_line >= m.span.start_line && m.span.start_line >= 1);
            for item in &m.items {
                let s = item.span();
                assert!(!s.is_empty(), "{}: item with empty span", entry.name);
                assert!(s.start_line >= 1 && s.end_line >= s.start_line);
            }
        }
    }
}

#[test]
fn preprocess_never_calls_backend_on_clean_corpus() {
    use rtlmend_core::agent::{NullBackend, RepairBackend};
    use rtlmend_core::lint::preprocess;
    let corpus = load_corpus(default_corpus_dir()).unwrap();
    for entry in &corpus {
        let mut backend = NullBackend::new();
        let pre = preprocess(&entry.source, &mut backend, 5, &entry.spec)
            .unwrap_or_else(|e| panic!("{}: {e}", entry.name));
        assert_eq!(backend.calls(), 0, "{}: clean module consulted the backend", entry.name);
        assert_eq!(pre.text, entry.source.text, "{}: clean module was rewritten", entry.name);
    }
}

#[test]
fn diagnostics_identical_across_runs() {
    // determinism of the diagnostic pipeline over a deliberately broken file
    let text = "module broken(input a output wire y);\nassign y = a\nassign z = a;\nendmodule\n";
    let src = SourceFile::new("broken.v", text);
    let a = rtlmend_core::parser::parse(&src).unwrap_err();
    let b = rtlmend_core::parser::parse(&src).unwrap_err();
    assert_eq!(a, b);
}
