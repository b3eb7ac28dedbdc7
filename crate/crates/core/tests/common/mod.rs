#![allow(dead_code)]

//! Fixture repositories and independent oracles shared by the integration tests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{DateTime, FixedOffset, NaiveDate, NaiveDateTime, TimeZone, Utc};
use evolens::cst::Language;
use evolens::repo::{CommitRef, FileBlob, RepositoryHandle};
use git2::{Oid, Repository, Signature, Time};

/// `"2021-03-01"` (noon UTC) or a full RFC 3339 timestamp.
pub fn ts(s: &str) -> DateTime<FixedOffset> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return dt;
    }
    let date = NaiveDate::parse_from_str(s, "%Y-%m-%d").expect("date");
    Utc.from_utc_datetime(&date.and_hms_opt(12, 0, 0).unwrap())
        .fixed_offset()
}

pub fn date(s: &str) -> NaiveDate {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
}

/// A throwaway repository whose commits are written straight into the
/// object database with chosen timestamps.
pub struct FixtureRepo {
    pub dir: tempfile::TempDir,
    pub repo: Repository,
}

impl FixtureRepo {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let repo = init_repo(dir.path());
        FixtureRepo { dir, repo }
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn handle(&self) -> RepositoryHandle {
        RepositoryHandle::open_local(self.path()).unwrap()
    }

    /// Commits the complete file set `files` on top of HEAD.
    pub fn commit(&self, when: &str, files: &[(&str, &str)]) -> Oid {
        let bytes: Vec<(&str, &[u8])> = files.iter().map(|(p, c)| (*p, c.as_bytes())).collect();
        commit_files(
            &self.repo,
            Some("HEAD"),
            ts(when),
            &bytes,
            &head_parents(&self.repo),
        )
    }
}

pub fn init_repo(path: &Path) -> Repository {
    let repo = Repository::init(path).unwrap();
    repo.set_head("refs/heads/main").unwrap();
    repo
}

pub fn head_parents(repo: &Repository) -> Vec<Oid> {
    repo.head()
        .ok()
        .and_then(|h| h.target())
        .into_iter()
        .collect()
}

fn signature(when: DateTime<FixedOffset>) -> Signature<'static> {
    let offset = when.offset().local_minus_utc() / 60;
    Signature::new(
        "Fixture",
        "fixture@example.com",
        &Time::new(when.timestamp(), offset),
    )
    .unwrap()
}

type TreeEntries<'a> = Vec<(Vec<&'a str>, &'a [u8])>;

fn write_tree(repo: &Repository, files: &[(Vec<&str>, &[u8])]) -> Oid {
    let mut dirs: BTreeMap<&str, TreeEntries> = BTreeMap::new();
    let mut builder = repo.treebuilder(None).unwrap();
    for (segments, content) in files {
        if segments.len() == 1 {
            let blob = repo.blob(content).unwrap();
            builder.insert(segments[0], blob, 0o100644).unwrap();
        } else {
            dirs.entry(segments[0])
                .or_default()
                .push((segments[1..].to_vec(), content));
        }
    }
    for (name, children) in dirs {
        let sub = write_tree(repo, &children);
        builder.insert(name, sub, 0o040000).unwrap();
    }
    builder.write().unwrap()
}

/// Writes a commit whose tree is exactly `files`.
pub fn commit_files(
    repo: &Repository,
    update_ref: Option<&str>,
    when: DateTime<FixedOffset>,
    files: &[(&str, &[u8])],
    parents: &[Oid],
) -> Oid {
    let split: Vec<(Vec<&str>, &[u8])> = files
        .iter()
        .map(|(p, c)| (p.split('/').collect(), *c))
        .collect();
    let tree = repo.find_tree(write_tree(repo, &split)).unwrap();
    let parent_commits: Vec<_> = parents
        .iter()
        .map(|p| repo.find_commit(*p).unwrap())
        .collect();
    let parent_refs: Vec<_> = parent_commits.iter().collect();
    let sig = signature(when);
    repo.commit(update_ref, &sig, &sig, "fixture", &tree, &parent_refs)
        .unwrap()
}

/// Builds a repository at `path` from `(date, files)` snapshots.
pub fn build_repo_at(path: &Path, history: &[(&str, &[(&str, &str)])]) -> Repository {
    std::fs::create_dir_all(path).unwrap();
    let repo = init_repo(path);
    for (when, files) in history {
        let bytes: Vec<(&str, &[u8])> = files.iter().map(|(p, c)| (*p, c.as_bytes())).collect();
        let parents = head_parents(&repo);
        commit_files(&repo, Some("HEAD"), ts(when), &bytes, &parents);
    }
    repo
}

pub fn corpus_dir(language: Language) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/corpus")
        .join(language.id())
}

/// Corpus files of one language as blobs, sorted by path.
pub fn corpus(language: Language) -> Vec<FileBlob> {
    let mut blobs: Vec<FileBlob> = std::fs::read_dir(corpus_dir(language))
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            FileBlob {
                path: name.clone(),
                name,
                content: std::fs::read(&p).unwrap(),
            }
        })
        .collect();
    blobs.sort_by(|a, b| a.path.cmp(&b.path));
    blobs
}

pub fn dummy_commit() -> CommitRef {
    let t = ts("2024-01-01");
    CommitRef {
        hash: "1".repeat(40),
        committer_date: t,
        author_date: t,
    }
}

// ---------------------------------------------------------------------------
// Oracles. None of these go through evolens' traversal or counting code.
// ---------------------------------------------------------------------------

/// Grammar straight from the grammar crates, keyed by file extension.
pub fn oracle_grammar(path: &str) -> tree_sitter::Language {
    let ext = path.rsplit('.').next().unwrap();
    match ext {
        "py" => tree_sitter_python::LANGUAGE.into(),
        "js" | "mjs" | "cjs" => tree_sitter_javascript::LANGUAGE.into(),
        "ts" => tree_sitter_typescript::LANGUAGE_TYPESCRIPT.into(),
        "tsx" => tree_sitter_typescript::LANGUAGE_TSX.into(),
        "java" => tree_sitter_java::LANGUAGE.into(),
        other => panic!("no oracle grammar for .{other}"),
    }
}

pub fn oracle_parse(path: &str, source: &str) -> tree_sitter::Tree {
    let mut parser = tree_sitter::Parser::new();
    parser.set_language(&oracle_grammar(path)).unwrap();
    parser.parse(source, None).unwrap()
}

/// Exhaustive recursive walk by child index; counts named nodes of `kind`.
pub fn oracle_count_node(node: tree_sitter::Node<'_>, kind: &str) -> usize {
    let own = usize::from(node.is_named() && node.kind() == kind);
    own + (0..node.child_count())
        .map(|i| oracle_count_node(node.child(i).unwrap(), kind))
        .sum::<usize>()
}

pub fn oracle_count(path: &str, source: &str, kind: &str) -> usize {
    oracle_count_node(oracle_parse(path, source).root_node(), kind)
}

/// Line spans (1-based, inclusive) of every named `kind` node, collected by
/// recursion over child indices.
pub fn oracle_spans(path: &str, source: &str, kind: &str) -> Vec<usize> {
    fn walk(node: tree_sitter::Node<'_>, kind: &str, out: &mut Vec<usize>) {
        if node.is_named() && node.kind() == kind {
            let start = node.start_position().row;
            let end = node.end_position();
            let last = if end.column == 0 && end.row > start {
                end.row - 1
            } else {
                end.row
            };
            out.push(last - start + 1);
        }
        for i in 0..node.child_count() {
            walk(node.child(i).unwrap(), kind, out);
        }
    }
    let tree = oracle_parse(path, source);
    let mut out = Vec::new();
    walk(tree.root_node(), kind, &mut out);
    out
}

/// Byte scanner: a line counts once it holds a byte other than SP, HT, CR, VT, FF.
pub fn oracle_loc(bytes: &[u8]) -> usize {
    let mut count = 0;
    let mut seen_code = false;
    for &b in bytes {
        match b {
            b'\n' => {
                if seen_code {
                    count += 1;
                }
                seen_code = false;
            }
            b' ' | b'\t' | b'\r' | 0x0b | 0x0c => {}
            _ => seen_code = true,
        }
    }
    if seen_code {
        count += 1;
    }
    count
}

/// Quadratic scan: for each boundary, the commit with the greatest
/// (committer date, position) among those at or before 23:59:59 UTC.
pub fn oracle_sample(commits: &[CommitRef], boundaries: &[NaiveDate]) -> Vec<(NaiveDate, String)> {
    let mut out = Vec::new();
    for b in boundaries {
        let end_of_day: NaiveDateTime = b.and_hms_opt(23, 59, 59).unwrap();
        let mut best: Option<(DateTime<Utc>, usize)> = None;
        for (i, c) in commits.iter().enumerate() {
            let t = c.committer_date.with_timezone(&Utc);
            if t.naive_utc() <= end_of_day && best.is_none_or(|(bt, bi)| (t, i) > (bt, bi)) {
                best = Some((t, i));
            }
        }
        if let Some((_, i)) = best {
            out.push((*b, commits[i].hash.clone()));
        }
    }
    out
}

/// Random first-parent history: `n` commits with second-precision committer
/// dates in 2010..2025 and assorted UTC offsets, ascending like `list_commits`.
pub fn random_history<R: rand::Rng>(rng: &mut R, n: usize) -> Vec<CommitRef> {
    let lo = Utc
        .with_ymd_and_hms(2010, 1, 1, 0, 0, 0)
        .unwrap()
        .timestamp();
    let hi = Utc
        .with_ymd_and_hms(2025, 12, 31, 23, 59, 59)
        .unwrap()
        .timestamp();
    let mut commits: Vec<CommitRef> = (0..n)
        .map(|i| {
            // occasionally land exactly on a day edge
            let secs = match rng.random_range(0..10) {
                0 => {
                    let day = rng.random_range(lo..hi) / 86_400 * 86_400;
                    day + [0, 86_399, 86_400][rng.random_range(0..3)]
                }
                _ => rng.random_range(lo..=hi),
            };
            let offset = FixedOffset::east_opt(rng.random_range(-12..=14) * 3600).unwrap();
            let t = Utc.timestamp_opt(secs, 0).unwrap().with_timezone(&offset);
            CommitRef {
                hash: format!(
                    "{:040x}",
                    (i as u128) * 0x9e37_79b9_7f4a_7c15 + rng.random_range(0..1000u128)
                ),
                committer_date: t,
                author_date: t,
            }
        })
        .collect();
    commits.sort_by(|a, b| (a.committer_utc(), &a.hash).cmp(&(b.committer_utc(), &b.hash)));
    commits
}

/// A three-year Python history whose expected metric values are spelled out
/// in [`E2E_LOC`] and [`E2E_DATA_STRUCTURES`].
pub const E2E_HISTORY: &[(&str, &[(&str, &str)])] = &[
    (
        "2022-03-01",
        &[
            ("a.py", "x = [1, 2]\n\ny = {'a': 1}\n"),
            ("README.md", "# fixture\n"),
        ],
    ),
    (
        "2023-06-01",
        &[
            ("a.py", "x = [1, 2]\n\ny = {'a': 1}\n"),
            ("pkg/b.py", "s = {1, 2}\nt = (1, 2)\nu = [3]\n"),
            ("README.md", "# fixture\n"),
        ],
    ),
    (
        "2024-05-01",
        &[
            ("pkg/b.py", "s = {1, 2}\nt = (1, 2)\nu = [3]\n"),
            ("pkg/c.py", "def f(a, b=[]):\n    return (a, b)\n\n\n"),
        ],
    ),
];

/// CLI arguments selecting the window for [`E2E_HISTORY`].
pub const E2E_WINDOW: [&str; 4] = ["--from", "2022", "--to", "2025"];

/// (date, Lines of code). 2022-01-01 precedes the first commit.
pub const E2E_LOC: &[(&str, &str)] = &[
    ("2023-01-01", "2"),
    ("2024-01-01", "5"),
    ("2025-01-01", "5"),
];

/// (series, date, value) for "Data structures".
pub const E2E_DATA_STRUCTURES: &[(&str, &str, &str)] = &[
    ("list", "2023-01-01", "1"),
    ("list", "2024-01-01", "2"),
    ("list", "2025-01-01", "2"),
    ("dictionary", "2023-01-01", "1"),
    ("dictionary", "2024-01-01", "1"),
    ("dictionary", "2025-01-01", "0"),
    ("set", "2023-01-01", "0"),
    ("set", "2024-01-01", "1"),
    ("set", "2025-01-01", "1"),
    ("tuple", "2023-01-01", "0"),
    ("tuple", "2024-01-01", "1"),
    ("tuple", "2025-01-01", "2"),
];

/// CSV rows keyed by (metric, series, date), read with a plain line split.
pub fn csv_cells(bytes: &[u8]) -> BTreeMap<(String, String, String), String> {
    let text = std::str::from_utf8(bytes).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("metric,series,date,value"));
    lines
        .map(|line| {
            let fields = split_csv_line(line);
            assert_eq!(fields.len(), 4, "{line}");
            (
                (fields[0].clone(), fields[1].clone(), fields[2].clone()),
                fields[3].clone(),
            )
        })
        .collect()
}

fn split_csv_line(line: &str) -> Vec<String> {
    let mut fields = vec![String::new()];
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match (c, quoted) {
            ('"', true) if chars.peek() == Some(&'"') => {
                chars.next();
                fields.last_mut().unwrap().push('"');
            }
            ('"', _) => quoted = !quoted,
            (',', false) => fields.push(String::new()),
            (c, _) => fields.last_mut().unwrap().push(c),
        }
    }
    fields
}

/// Rebuilds the CSV rows from an HTML payload, walking the raw JSON.
pub fn payload_cells(payload: &str) -> Vec<(String, String, String, String)> {
    let value: serde_json::Value = serde_json::from_str(payload).unwrap();
    let dates: Vec<String> = value["boundaries"]
        .as_array()
        .unwrap()
        .iter()
        .map(|d| d.as_str().unwrap().to_string())
        .collect();
    let mut rows = Vec::new();
    for metric in value["metrics"].as_array().unwrap() {
        let name = metric["name"].as_str().unwrap();
        for series in metric["series"].as_array().unwrap() {
            let label = series["label"].as_str().unwrap();
            for (date, v) in dates.iter().zip(series["values"].as_array().unwrap()) {
                let v = v.as_f64().unwrap();
                let text = if v.fract() == 0.0 && v.abs() < 1e15 {
                    format!("{}", v as i64)
                } else {
                    v.to_string()
                };
                rows.push((name.to_string(), label.to_string(), date.clone(), text));
            }
        }
    }
    rows
}

/// Extracts the JSON payload from a report with a plain string search.
pub fn html_payload(html: &str) -> String {
    let open = "<script type=\"application/json\" id=\"report-payload\">";
    let start = html.find(open).unwrap() + open.len();
    let end = start + html[start..].find("</script>").unwrap();
    html[start..end].to_string()
}

pub fn cli_bin() -> &'static str {
    env!("CARGO_BIN_EXE_evolens")
}

/// The fixture with two lambdas, one yield, one list and one dict comprehension.
pub fn functional_fixture() -> FileBlob {
    corpus(Language::Python)
        .into_iter()
        .find(|b| b.path == "03_functional.py")
        .unwrap()
}

/// `root/{valid, corrupt, plain}`: a good repository, one whose object
/// database has been wiped, and a directory that is not a repository.
pub fn robustness_collection(root: &Path) {
    build_repo_at(&root.join("valid"), E2E_HISTORY);
    let corrupt = root.join("corrupt");
    build_repo_at(&corrupt, E2E_HISTORY);
    let objects = corrupt.join(".git/objects");
    std::fs::remove_dir_all(&objects).unwrap();
    std::fs::create_dir_all(&objects).unwrap();
    std::fs::create_dir_all(root.join("plain/src")).unwrap();
    std::fs::write(root.join("plain/src/app.py"), "x = 1\n").unwrap();
}

/// Runs the binary with a private clone workspace.
pub fn run_cli(args: &[&str], workspace: &Path) -> std::process::Output {
    std::process::Command::new(cli_bin())
        .args(args)
        .env("EVOLENS_WORKSPACE", workspace)
        .env_remove("RUST_LOG")
        .output()
        .unwrap()
}
