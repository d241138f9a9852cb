//! Regenerates the frozen oracle tables under `fixtures/oracle/`.
//!
//! Run only when the corpus or the reference semantics change on purpose;
//! the tests compare the engine against whatever is committed.

use consentry_core::{base_schema, parse_data_request, parse_policy, Preset};
use consentry_testkit::oracle::{decision_record, Table};
use consentry_testkit::{corpus, fixture_dir, read_fixture};

fn main() {
    let schema = base_schema();
    let table = Table::new(&schema);

    let mut decisions = String::from("# corpus policy x preset, reference evaluator output\n");
    for (name, text) in corpus() {
        let policy = parse_policy(&text, &schema).expect("corpus policy parses");
        for p in Preset::ALL {
            decisions.push_str(&format!("== {name} {}\n", p.name()));
            decisions.push_str(&decision_record(&table, &text, &policy, &p.ruleset()));
        }
    }

    let mut coupling = String::from("# request policy: uncovered leaves in request order\n");
    for line in read_fixture("coupling/pairs.txt").lines() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let (req, pol) = line.split_once(' ').expect("pair line");
        let request = parse_data_request(&read_fixture(&format!("coupling/{req}")), &schema)
            .expect("request parses");
        let policy = parse_policy(&read_fixture(&format!("corpus/{pol}")), &schema)
            .expect("policy parses");
        let refs: Vec<String> = request.items.iter().map(|i| i.reference.clone()).collect();
        let uncovered = table.uncovered(&refs, &policy);
        coupling.push_str(&format!("{req} {pol}:"));
        for leaf in &uncovered {
            coupling.push(' ');
            coupling.push_str(leaf);
        }
        coupling.push('\n');
    }

    let dir = fixture_dir().join("oracle");
    std::fs::create_dir_all(&dir).expect("create oracle dir");
    std::fs::write(dir.join("decisions.txt"), decisions).expect("write decisions");
    std::fs::write(dir.join("coupling.txt"), coupling).expect("write coupling");
    eprintln!("wrote {}", dir.display());
}
