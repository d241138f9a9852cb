//! Test support shared by the workspace: a naive reference evaluator,
//! proptest generators, an input mutator and the committed fixtures.

pub mod gen;
pub mod mutate;
pub mod oracle;
pub mod space;

use std::path::PathBuf;

/// Root of the committed fixture tree.
pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// `(file name, contents)` of every corpus policy, sorted by name.
pub fn corpus() -> Vec<(String, String)> {
    read_dir_sorted(&fixture_dir().join("corpus"), "ppf")
}

pub fn read_dir_sorted(dir: &std::path::Path, ext: &str) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = std::fs::read_dir(dir)
        .unwrap_or_else(|e| panic!("reading {}: {e}", dir.display()))
        .map(|e| e.expect("dir entry").path())
        .filter(|p| p.extension().is_some_and(|x| x == ext))
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            let text = std::fs::read_to_string(&p).expect("fixture is utf-8");
            (name, text)
        })
        .collect();
    out.sort();
    out
}

pub fn read_fixture(rel: &str) -> String {
    let path = fixture_dir().join(rel);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

/// The frozen decision table as `((policy, preset), record)`, in file order.
pub fn oracle_decisions() -> Vec<((String, String), String)> {
    let text = read_fixture("oracle/decisions.txt");
    let mut out: Vec<((String, String), String)> = Vec::new();
    for line in text.lines().filter(|l| !l.starts_with('#')) {
        if let Some(head) = line.strip_prefix("== ") {
            let (policy, preset) = head.split_once(' ').expect("'== POLICY PRESET'");
            out.push(((policy.to_string(), preset.to_string()), String::new()));
        } else {
            let last = out.last_mut().expect("record header");
            last.1.push_str(line);
            last.1.push('\n');
        }
    }
    out
}

/// The frozen coupling table as `(request file, policy file, uncovered leaves)`.
pub fn oracle_coupling() -> Vec<(String, String, Vec<String>)> {
    read_fixture("oracle/coupling.txt")
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| {
            let (head, leaves) = l.split_once(':').expect("'REQ POL: leaves'");
            let (req, pol) = head.split_once(' ').expect("'REQ POL'");
            (req.to_string(), pol.to_string(), leaves.split_whitespace().map(String::from).collect())
        })
        .collect()
}
