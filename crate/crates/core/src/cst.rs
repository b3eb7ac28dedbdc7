//! Grammar registry, snapshot parsing and the node-query surface metrics use.
//!
//! Queries only ever see *named* nodes: grammar rules such as `list` or
//! `for_statement`. Anonymous tokens (punctuation, keywords) are skipped by
//! every traversal, although [`CstNode::tokens`] still exposes them for
//! content checks such as "which keyword opened this declaration".

use std::fmt;
use std::panic::{self, AssertUnwindSafe};
use std::str::FromStr;
use std::sync::Arc;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tree_sitter::{Node, Parser, Tree, TreeCursor};

use crate::repo::{CommitRef, FileBlob};

#[derive(
    Debug,
    Clone,
    Copy,
    PartialEq,
    Eq,
    Hash,
    PartialOrd,
    Ord,
    Serialize,
    Deserialize,
    clap::ValueEnum,
)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Python,
    Javascript,
    Typescript,
    Java,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unsupported language '{0}' (expected one of: python, javascript, typescript, java)")]
pub struct UnsupportedLanguage(pub String);

impl Language {
    pub const ALL: [Language; 4] = [
        Language::Python,
        Language::Javascript,
        Language::Typescript,
        Language::Java,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Language::Python => "python",
            Language::Javascript => "javascript",
            Language::Typescript => "typescript",
            Language::Java => "java",
        }
    }

    pub fn spec(self) -> &'static LanguageSpec {
        REGISTRY
            .iter()
            .find(|spec| spec.language == self)
            .expect("every language has a registry entry")
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Language {
    type Err = UnsupportedLanguage;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Language::ALL
            .into_iter()
            .find(|l| l.id().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnsupportedLanguage(s.to_string()))
    }
}

/// Grammar crate versions, pinned in the manifest and echoed into reports.
pub const GRAMMAR_VERSIONS: [(Language, &str, &str); 4] = [
    (Language::Python, "tree-sitter-python", "0.23.6"),
    (Language::Javascript, "tree-sitter-javascript", "0.23.1"),
    (Language::Typescript, "tree-sitter-typescript", "0.23.2"),
    (Language::Java, "tree-sitter-java", "0.23.5"),
];

/// Runtime library version the grammars are loaded into.
pub const TREE_SITTER_VERSION: &str = "0.25.10";

type GrammarFn = fn() -> tree_sitter::Language;

fn python_grammar() -> tree_sitter::Language {
    tree_sitter_python::LANGUAGE.into()
}
fn javascript_grammar() -> tree_sitter::Language {
    tree_sitter_javascript::LANGUAGE.into()
}
fn typescript_grammar() -> tree_sitter::Language {
    tree_sitter_typescript::LANGUAGE_TYPESCRIPT.into()
}
fn tsx_grammar() -> tree_sitter::Language {
    tree_sitter_typescript::LANGUAGE_TSX.into()
}
fn java_grammar() -> tree_sitter::Language {
    tree_sitter_java::LANGUAGE.into()
}

/// One registry entry: the extensions a language owns and the grammar used
/// for each of them.
pub struct LanguageSpec {
    pub language: Language,
    pub file_extensions: &'static [&'static str],
    grammars: &'static [(&'static str, GrammarFn)],
}

impl fmt::Debug for LanguageSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LanguageSpec")
            .field("language", &self.language)
            .field("file_extensions", &self.file_extensions)
            .finish()
    }
}

impl LanguageSpec {
    /// Grammar for a path, by the longest matching registered extension.
    pub fn grammar_for(&self, path: &str) -> Option<tree_sitter::Language> {
        self.grammars
            .iter()
            .filter(|(ext, _)| path.ends_with(ext))
            .max_by_key(|(ext, _)| ext.len())
            .map(|(_, grammar)| grammar())
    }

    pub fn handles(&self, path: &str) -> bool {
        self.file_extensions.iter().any(|ext| path.ends_with(ext))
    }

    pub fn grammar_crate(&self) -> &'static str {
        self.grammar_version().0
    }

    /// `(crate name, version)` of the grammar backing this language.
    pub fn grammar_version(&self) -> (&'static str, &'static str) {
        GRAMMAR_VERSIONS
            .iter()
            .find(|(l, _, _)| *l == self.language)
            .map(|(_, name, version)| (*name, *version))
            .expect("every language has a pinned grammar version")
    }
}

static REGISTRY: [LanguageSpec; 4] = [
    LanguageSpec {
        language: Language::Python,
        file_extensions: &[".py"],
        grammars: &[(".py", python_grammar)],
    },
    LanguageSpec {
        language: Language::Javascript,
        file_extensions: &[".js", ".mjs", ".cjs"],
        grammars: &[
            (".js", javascript_grammar),
            (".mjs", javascript_grammar),
            (".cjs", javascript_grammar),
        ],
    },
    LanguageSpec {
        language: Language::Typescript,
        file_extensions: &[".ts", ".tsx"],
        grammars: &[(".ts", typescript_grammar), (".tsx", tsx_grammar)],
    },
    LanguageSpec {
        language: Language::Java,
        file_extensions: &[".java"],
        grammars: &[(".java", java_grammar)],
    },
];

pub fn registry() -> &'static [LanguageSpec] {
    &REGISTRY
}

/// Lines holding at least one byte other than ASCII space, tab, CR, VT or FF.
pub fn count_loc(content: &[u8]) -> usize {
    content
        .split(|&b| b == b'\n')
        .filter(|line| {
            line.iter()
                .any(|b| !matches!(b, b' ' | b'\t' | b'\r' | 0x0b | 0x0c))
        })
        .count()
}

/// How a set of node sizes is reduced to one number.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregate {
    #[default]
    Median,
    Mean,
    Sum,
}

impl Aggregate {
    /// Reduces `values`; an empty slice gives 0.
    pub fn apply(self, values: &[f64]) -> f64 {
        if values.is_empty() {
            return 0.0;
        }
        match self {
            Aggregate::Sum => values.iter().sum(),
            Aggregate::Mean => values.iter().sum::<f64>() / values.len() as f64,
            Aggregate::Median => {
                let mut sorted = values.to_vec();
                sorted.sort_by(f64::total_cmp);
                let mid = sorted.len() / 2;
                if sorted.len().is_multiple_of(2) {
                    (sorted[mid - 1] + sorted[mid]) / 2.0
                } else {
                    sorted[mid]
                }
            }
        }
    }
}

/// A view of one syntax-tree node together with the source it was parsed from.
#[derive(Clone, Copy)]
pub struct CstNode<'a> {
    node: Node<'a>,
    source: &'a str,
}

impl fmt::Debug for CstNode<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}@{}..{}",
            self.type_name(),
            self.start_line(),
            self.end_line()
        )
    }
}

impl PartialEq for CstNode<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.node == other.node
    }
}

impl<'a> CstNode<'a> {
    fn new(node: Node<'a>, source: &'a str) -> Self {
        CstNode { node, source }
    }

    /// Grammar node-type identifier, e.g. `function_definition`.
    pub fn type_name(&self) -> &'static str {
        self.node.kind()
    }

    pub fn is_named(&self) -> bool {
        self.node.is_named()
    }

    /// True for `ERROR` nodes and nodes the parser had to invent.
    pub fn is_error(&self) -> bool {
        self.node.is_error() || self.node.is_missing()
    }

    pub fn parent(&self) -> Option<CstNode<'a>> {
        self.node.parent().map(|n| CstNode::new(n, self.source))
    }

    /// Named children, in source order.
    pub fn children(&self) -> Vec<CstNode<'a>> {
        let mut cursor = self.node.walk();
        self.node
            .named_children(&mut cursor)
            .map(|n| CstNode::new(n, self.source))
            .collect()
    }

    /// All direct children including anonymous tokens such as `const`, `async`
    /// or punctuation.
    pub fn tokens(&self) -> Vec<CstNode<'a>> {
        let mut cursor = self.node.walk();
        self.node
            .children(&mut cursor)
            .map(|n| CstNode::new(n, self.source))
            .collect()
    }

    pub fn child_by_field(&self, field: &str) -> Option<CstNode<'a>> {
        self.node
            .child_by_field_name(field)
            .map(|n| CstNode::new(n, self.source))
    }

    /// 1-based first line.
    pub fn start_line(&self) -> usize {
        self.node.start_position().row + 1
    }

    /// 1-based last line. A node whose range stops right after a newline
    /// ends on the line holding that newline.
    pub fn end_line(&self) -> usize {
        let start = self.node.start_position();
        let end = self.node.end_position();
        if end.column == 0 && end.row > start.row {
            end.row
        } else {
            end.row + 1
        }
    }

    /// Number of lines the node spans.
    pub fn line_span(&self) -> usize {
        self.end_line() - self.start_line() + 1
    }

    pub fn byte_range(&self) -> std::ops::Range<usize> {
        self.node.byte_range()
    }

    pub fn text(&self) -> &'a str {
        &self.source[self.node.byte_range()]
    }

    /// This node and its named descendants in pre-order.
    pub fn descendants(&self) -> NamedPreorder<'a> {
        NamedPreorder {
            cursor: self.node.walk(),
            source: self.source,
            done: false,
        }
    }
}

/// Pre-order walk over the named nodes of a subtree.
pub struct NamedPreorder<'a> {
    cursor: TreeCursor<'a>,
    source: &'a str,
    done: bool,
}

impl<'a> Iterator for NamedPreorder<'a> {
    type Item = CstNode<'a>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            let node = self.cursor.node();
            if !self.cursor.goto_first_child() {
                loop {
                    if self.cursor.depth() == 0 {
                        self.done = true;
                        break;
                    }
                    if self.cursor.goto_next_sibling() {
                        break;
                    }
                    self.cursor.goto_parent();
                }
            }
            if node.is_named() {
                return Some(CstNode::new(node, self.source));
            }
        }
        None
    }
}

/// One successfully parsed source file.
pub struct ParsedFile {
    name: String,
    path: String,
    source: String,
    tree: Tree,
    loc: usize,
}

impl fmt::Debug for ParsedFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParsedFile")
            .field("path", &self.path)
            .field("loc", &self.loc)
            .finish()
    }
}

impl ParsedFile {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn path(&self) -> &str {
        &self.path
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Non-blank lines, see [`count_loc`].
    pub fn loc(&self) -> usize {
        self.loc
    }

    pub fn root(&self) -> CstNode<'_> {
        CstNode::new(self.tree.root_node(), &self.source)
    }

    /// Named nodes of the whole file in pre-order.
    pub fn nodes(&self) -> NamedPreorder<'_> {
        self.root().descendants()
    }

    pub fn has_errors(&self) -> bool {
        self.tree.root_node().has_error()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum SkipReason {
    DecodeFailure(String),
    GrammarFailure(String),
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SkipReason::DecodeFailure(msg) => write!(f, "decode failure: {msg}"),
            SkipReason::GrammarFailure(msg) => write!(f, "grammar failure: {msg}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedFile {
    pub path: String,
    pub reason: SkipReason,
}

/// The parsed state of a repository at one sampled boundary.
///
/// Cloning is cheap: the parsed files are shared.
#[derive(Debug, Clone)]
pub struct ParsedCommit {
    commit: CommitRef,
    boundary: NaiveDate,
    files: Arc<Vec<ParsedFile>>,
    skipped: Arc<Vec<SkippedFile>>,
    loc: usize,
}

impl ParsedCommit {
    pub fn new(
        commit: CommitRef,
        boundary: NaiveDate,
        mut files: Vec<ParsedFile>,
        skipped: Vec<SkippedFile>,
    ) -> Self {
        files.sort_by(|a, b| a.path.cmp(&b.path));
        let loc = files.iter().map(|f| f.loc).sum();
        ParsedCommit {
            commit,
            boundary,
            files: Arc::new(files),
            skipped: Arc::new(skipped),
            loc,
        }
    }

    /// The same parsed snapshot standing in for another boundary.
    pub fn with_boundary(&self, boundary: NaiveDate) -> Self {
        ParsedCommit {
            boundary,
            ..self.clone()
        }
    }

    pub fn commit(&self) -> &CommitRef {
        &self.commit
    }

    pub fn hash(&self) -> &str {
        &self.commit.hash
    }

    pub fn boundary(&self) -> NaiveDate {
        self.boundary
    }

    pub fn files(&self) -> &[ParsedFile] {
        &self.files
    }

    pub fn skipped(&self) -> &[SkippedFile] {
        &self.skipped
    }

    /// Sum of the files' non-blank line counts.
    pub fn loc(&self) -> usize {
        self.loc
    }

    /// Every named node, file by file, each file in pre-order.
    pub fn named_nodes(&self) -> impl Iterator<Item = CstNode<'_>> + '_ {
        self.files.iter().flat_map(|f| f.nodes())
    }

    /// One label per node whose type is in `type_names`, in file order then
    /// pre-order. Unknown type names simply match nothing.
    pub fn find_node_types(&self, type_names: &[&str]) -> Vec<String> {
        self.named_nodes()
            .filter(|n| type_names.contains(&n.type_name()))
            .map(|n| n.type_name().to_string())
            .collect()
    }

    pub fn count_nodes(&self, type_names: &[&str]) -> usize {
        self.named_nodes()
            .filter(|n| type_names.contains(&n.type_name()))
            .count()
    }

    /// Aggregated line span of every `type_name` node; 0 when none exist.
    pub fn loc_by_type(&self, type_name: &str, aggregate: Aggregate) -> f64 {
        let sizes: Vec<f64> = self
            .named_nodes()
            .filter(|n| n.type_name() == type_name)
            .map(|n| n.line_span() as f64)
            .collect();
        aggregate.apply(&sizes)
    }

    pub fn nodes_matching<F>(&self, predicate: F) -> Vec<CstNode<'_>>
    where
        F: Fn(&CstNode<'_>) -> bool,
    {
        self.named_nodes().filter(|n| predicate(n)).collect()
    }
}

fn parse_file(blob: &FileBlob, spec: &LanguageSpec) -> Result<ParsedFile, SkipReason> {
    let source = std::str::from_utf8(&blob.content)
        .map_err(|e| SkipReason::DecodeFailure(e.to_string()))?
        .to_string();
    let grammar = spec.grammar_for(&blob.path).ok_or_else(|| {
        SkipReason::GrammarFailure(format!("no {} grammar for this extension", spec.language))
    })?;
    let parsed = panic::catch_unwind(AssertUnwindSafe(|| {
        let mut parser = Parser::new();
        parser.set_language(&grammar).ok()?;
        parser.parse(&source, None)
    }));
    let tree = match parsed {
        Ok(Some(tree)) => tree,
        Ok(None) => {
            return Err(SkipReason::GrammarFailure(
                "parser produced no tree".to_string(),
            ))
        }
        Err(_) => return Err(SkipReason::GrammarFailure("parser panicked".to_string())),
    };
    Ok(ParsedFile {
        name: blob.name.clone(),
        path: blob.path.clone(),
        loc: count_loc(source.as_bytes()),
        source,
        tree,
    })
}

/// Parses every blob in parallel. Files that cannot be decoded or parsed are
/// left out and listed in [`ParsedCommit::skipped`]; files with syntax errors
/// are kept with their partial trees.
pub fn parse_snapshot(
    blobs: &[FileBlob],
    spec: &LanguageSpec,
    commit: CommitRef,
    boundary: NaiveDate,
) -> ParsedCommit {
    let results: Vec<(String, Result<ParsedFile, SkipReason>)> = blobs
        .par_iter()
        .map(|blob| (blob.path.clone(), parse_file(blob, spec)))
        .collect();
    let mut files = Vec::with_capacity(results.len());
    let mut skipped = Vec::new();
    for (path, result) in results {
        match result {
            Ok(file) => files.push(file),
            Err(reason) => {
                log::debug!("skipping {path}: {reason}");
                skipped.push(SkippedFile { path, reason });
            }
        }
    }
    ParsedCommit::new(commit, boundary, files, skipped)
}
