//! Repository resolution, first-parent history and snapshot extraction.
//!
//! Everything here reads from the Git object database; the working tree of a
//! repository is never checked out or modified.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, FixedOffset, TimeZone, Utc};
use git2::{
    build::RepoBuilder, Cred, FetchOptions, ObjectType, Oid, RemoteCallbacks, Repository, Sort,
    TreeWalkMode, TreeWalkResult,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Environment variable overriding the directory remote clones are kept in.
pub const WORKSPACE_ENV: &str = "EVOLENS_WORKSPACE";

const DEFAULT_WORKSPACE_DIR: &str = ".evolens-clones";

#[derive(Debug, Error)]
pub enum RepoError {
    #[error("empty repository input")]
    EmptyInput,
    #[error("path does not exist: {}", .0.display())]
    PathMissing(PathBuf),
    #[error("not a git repository (and no repositories inside): {}", .0.display())]
    NotARepository(PathBuf),
    #[error("failed to open repository {}: {message}", path.display())]
    OpenFailed { path: PathBuf, message: String },
    #[error("failed to clone {url}: {message}")]
    CloneFailed { url: String, message: String },
    #[error("repository {0} has no commits")]
    EmptyRepository(String),
    #[error("unknown commit {0}")]
    UnknownCommit(String),
    #[error(transparent)]
    Git(#[from] git2::Error),
}

/// What the user typed as the repository argument.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepoInput {
    pub raw: String,
}

/// The three accepted input forms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SourceKind {
    RemoteUrl(String),
    LocalRepo(PathBuf),
    RepoCollection(PathBuf),
}

impl RepoInput {
    pub fn new(raw: impl Into<String>) -> Self {
        RepoInput { raw: raw.into() }
    }

    pub fn classify(&self) -> Result<SourceKind, RepoError> {
        let raw = self.raw.trim();
        if raw.is_empty() {
            return Err(RepoError::EmptyInput);
        }
        if is_remote_url(raw) {
            return Ok(SourceKind::RemoteUrl(raw.to_string()));
        }
        let path = PathBuf::from(raw);
        if !path.exists() {
            return Err(RepoError::PathMissing(path));
        }
        if !path.is_dir() {
            return Err(RepoError::NotARepository(path));
        }
        if has_git_metadata(&path) {
            return Ok(SourceKind::LocalRepo(path));
        }
        let any_repo_child = child_dirs(&path)
            .map_err(|_| RepoError::NotARepository(path.clone()))?
            .iter()
            .any(|child| has_git_metadata(child));
        if any_repo_child {
            Ok(SourceKind::RepoCollection(path))
        } else {
            Err(RepoError::NotARepository(path))
        }
    }
}

fn is_remote_url(raw: &str) -> bool {
    const SCHEMES: [&str; 5] = ["http://", "https://", "ssh://", "git://", "file://"];
    if SCHEMES.iter().any(|s| raw.starts_with(s)) {
        return true;
    }
    // scp-like ssh syntax: user@host:path
    match (raw.find('@'), raw.find(':')) {
        (Some(at), Some(colon)) => {
            at < colon && !raw[..at].contains('/') && !Path::new(raw).exists()
        }
        _ => false,
    }
}

/// True when `dir` holds a `.git` entry or is itself a bare repository.
pub fn has_git_metadata(dir: &Path) -> bool {
    dir.join(".git").exists()
        || (dir.join("HEAD").is_file() && dir.join("objects").is_dir() && dir.join("refs").is_dir())
}

fn child_dirs(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut dirs = Vec::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name();
        if name.to_string_lossy().starts_with('.') {
            continue;
        }
        if entry.path().is_dir() {
            dirs.push(entry.path());
        }
    }
    dirs.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(dirs)
}

/// A repository ready for analysis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepositoryHandle {
    pub name: String,
    pub root_path: PathBuf,
    pub default_branch: String,
}

impl RepositoryHandle {
    /// Opens `path` as a repository; the handle's name is the directory name
    /// with any `.git` suffix removed.
    pub fn open_local(path: &Path) -> Result<Self, RepoError> {
        let repo = Repository::open(path).map_err(|e| RepoError::OpenFailed {
            path: path.to_path_buf(),
            message: e.message().to_string(),
        })?;
        let root = fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf());
        let dir_name = root
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "repo".to_string());
        let name = dir_name
            .strip_suffix(".git")
            .filter(|n| !n.is_empty())
            .unwrap_or(&dir_name)
            .to_string();
        Ok(RepositoryHandle {
            name,
            root_path: root,
            default_branch: head_branch(&repo),
        })
    }

    pub fn open(&self) -> Result<Repository, RepoError> {
        Repository::open(&self.root_path).map_err(|e| RepoError::OpenFailed {
            path: self.root_path.clone(),
            message: e.message().to_string(),
        })
    }
}

fn head_branch(repo: &Repository) -> String {
    match repo.find_reference("HEAD") {
        Ok(head) => match head.symbolic_target() {
            Some(target) => target
                .strip_prefix("refs/heads/")
                .unwrap_or(target)
                .to_string(),
            None => "HEAD".to_string(),
        },
        Err(_) => "HEAD".to_string(),
    }
}

/// A candidate that was looked at but not turned into a handle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedSource {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct ResolvedSources {
    pub handles: Vec<RepositoryHandle>,
    pub skipped: Vec<SkippedSource>,
}

/// The clone workspace: `$EVOLENS_WORKSPACE`, else `./.evolens-clones`.
pub fn default_workspace() -> PathBuf {
    std::env::var_os(WORKSPACE_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_WORKSPACE_DIR))
}

/// Turns the user input into repository handles.
///
/// Remote URLs are cloned (or refreshed) under `workspace`. A collection
/// directory yields one handle per immediate child repository, sorted by
/// directory name; children that are not repositories or fail to open are
/// reported in `skipped` instead of failing the whole call.
pub fn resolve_sources(input: &RepoInput, workspace: &Path) -> Result<ResolvedSources, RepoError> {
    let mut resolved = ResolvedSources::default();
    match input.classify()? {
        SourceKind::RemoteUrl(url) => resolved.handles.push(clone_remote(&url, workspace)?),
        SourceKind::LocalRepo(path) => resolved.handles.push(RepositoryHandle::open_local(&path)?),
        SourceKind::RepoCollection(dir) => {
            let children = child_dirs(&dir).map_err(|_| RepoError::NotARepository(dir.clone()))?;
            for child in children {
                if !has_git_metadata(&child) {
                    resolved.skipped.push(SkippedSource {
                        path: child,
                        reason: "not a git repository".to_string(),
                    });
                    continue;
                }
                match RepositoryHandle::open_local(&child) {
                    Ok(handle) => resolved.handles.push(handle),
                    Err(err) => resolved.skipped.push(SkippedSource {
                        path: child,
                        reason: err.to_string(),
                    }),
                }
            }
            dedupe_names(&mut resolved.handles);
        }
    }
    Ok(resolved)
}

/// Appends `-2`, `-3`, ... to repeated names, in the current order.
pub fn dedupe_names(handles: &mut [RepositoryHandle]) {
    let mut seen: HashMap<String, usize> = HashMap::new();
    let taken: Vec<String> = handles.iter().map(|h| h.name.clone()).collect();
    for handle in handles.iter_mut() {
        let count = seen.entry(handle.name.clone()).or_insert(0);
        *count += 1;
        if *count > 1 {
            let mut n = *count;
            let mut candidate = format!("{}-{}", handle.name, n);
            while taken.contains(&candidate) {
                n += 1;
                candidate = format!("{}-{}", handle.name, n);
            }
            *count = n;
            handle.name = candidate;
        }
    }
}

/// Repository name for a remote URL: the last path segment without `.git`.
pub fn name_from_url(url: &str) -> String {
    let trimmed = url.trim_end_matches('/');
    let last = trimmed.rsplit(['/', ':']).next().unwrap_or(trimmed);
    let name = last.strip_suffix(".git").unwrap_or(last);
    if name.is_empty() {
        "repo".to_string()
    } else {
        name.to_string()
    }
}

fn workspace_slug(url: &str) -> String {
    let without_scheme = url.split_once("://").map(|(_, rest)| rest).unwrap_or(url);
    let without_scheme = without_scheme.trim_end_matches('/');
    let without_scheme = without_scheme
        .strip_suffix(".git")
        .unwrap_or(without_scheme);
    without_scheme
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect::<String>()
        .trim_matches('_')
        .to_string()
}

fn fetch_options<'a>() -> FetchOptions<'a> {
    let mut callbacks = RemoteCallbacks::new();
    callbacks.credentials(|url, username, allowed| {
        if allowed.is_ssh_key() {
            if let Some(user) = username {
                return Cred::ssh_key_from_agent(user);
            }
        }
        if allowed.is_user_pass_plaintext() {
            if let Ok(config) = git2::Config::open_default() {
                return Cred::credential_helper(&config, url, username);
            }
        }
        Cred::default()
    });
    let mut options = FetchOptions::new();
    options.remote_callbacks(callbacks);
    options
}

/// Full clone of `url` into the workspace. An existing clone from an earlier
/// run is fetched and its default branch fast-forwarded to the remote's.
pub fn clone_remote(url: &str, workspace: &Path) -> Result<RepositoryHandle, RepoError> {
    let clone_failed = |message: String| RepoError::CloneFailed {
        url: url.to_string(),
        message,
    };
    let target = workspace.join(workspace_slug(url));
    if target.exists() && has_git_metadata(&target) {
        refresh_clone(&target).map_err(|e| clone_failed(e.message().to_string()))?;
    } else {
        fs::create_dir_all(workspace).map_err(|e| clone_failed(e.to_string()))?;
        let mut builder = RepoBuilder::new();
        builder.fetch_options(fetch_options());
        // Bare keeps the working tree out of the picture entirely.
        builder.bare(true);
        builder
            .clone(url, &target)
            .map_err(|e| clone_failed(e.message().to_string()))?;
    }
    let mut handle = RepositoryHandle::open_local(&target)?;
    handle.name = name_from_url(url);
    Ok(handle)
}

fn refresh_clone(path: &Path) -> Result<(), git2::Error> {
    let repo = Repository::open(path)?;
    let branch = head_branch(&repo);
    let mut remote = repo.find_remote("origin")?;
    let refspec = format!("+refs/heads/{branch}:refs/heads/{branch}");
    remote.fetch(&[refspec.as_str()], Some(&mut fetch_options()), None)?;
    Ok(())
}

/// Identity and timestamps of one commit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CommitRef {
    pub hash: String,
    pub committer_date: DateTime<FixedOffset>,
    pub author_date: DateTime<FixedOffset>,
}

impl CommitRef {
    pub fn committer_utc(&self) -> DateTime<Utc> {
        self.committer_date.with_timezone(&Utc)
    }
}

fn git_time(time: git2::Time) -> DateTime<FixedOffset> {
    let offset = FixedOffset::east_opt(time.offset_minutes() * 60)
        .unwrap_or_else(|| FixedOffset::east_opt(0).unwrap());
    offset
        .timestamp_opt(time.seconds(), 0)
        .single()
        .unwrap_or_else(|| Utc.timestamp_opt(0, 0).unwrap().fixed_offset())
}

/// A file's bytes at one commit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileBlob {
    pub path: String,
    pub name: String,
    pub content: Vec<u8>,
}

/// An opened repository; reuse it for many snapshot reads.
pub struct RepoReader {
    name: String,
    repo: Repository,
}

impl RepoReader {
    pub fn open(handle: &RepositoryHandle) -> Result<Self, RepoError> {
        Ok(RepoReader {
            name: handle.name.clone(),
            repo: handle.open()?,
        })
    }

    /// First-parent history of HEAD, ascending by committer date, ties by hash.
    pub fn list_commits(&self) -> Result<Vec<CommitRef>, RepoError> {
        let head = match self.repo.head() {
            Ok(head) => head,
            Err(e)
                if matches!(
                    e.code(),
                    git2::ErrorCode::UnbornBranch | git2::ErrorCode::NotFound
                ) =>
            {
                return Err(RepoError::EmptyRepository(self.name.clone()))
            }
            Err(e) => return Err(e.into()),
        };
        let head_oid = head.peel_to_commit()?.id();
        let mut walk = self.repo.revwalk()?;
        walk.set_sorting(Sort::NONE)?;
        walk.push(head_oid)?;
        walk.simplify_first_parent()?;
        let mut commits = Vec::new();
        for oid in walk {
            let commit = self.repo.find_commit(oid?)?;
            commits.push(CommitRef {
                hash: commit.id().to_string(),
                committer_date: git_time(commit.committer().when()),
                author_date: git_time(commit.author().when()),
            });
        }
        if commits.is_empty() {
            return Err(RepoError::EmptyRepository(self.name.clone()));
        }
        commits.sort_by(|a, b| {
            a.committer_utc()
                .cmp(&b.committer_utc())
                .then_with(|| a.hash.cmp(&b.hash))
        });
        Ok(commits)
    }

    /// Blobs in the commit's tree whose path ends with one of `extensions`,
    /// sorted by path. Symlinks and submodules are not followed.
    pub fn read_snapshot<S: AsRef<str>>(
        &self,
        commit: &CommitRef,
        extensions: &[S],
    ) -> Result<Vec<FileBlob>, RepoError> {
        let unknown = || RepoError::UnknownCommit(commit.hash.clone());
        let oid = Oid::from_str(&commit.hash).map_err(|_| unknown())?;
        let git_commit = self.repo.find_commit(oid).map_err(|_| unknown())?;
        let tree = git_commit.tree()?;

        let mut matches: Vec<(String, String, Oid)> = Vec::new();
        tree.walk(TreeWalkMode::PreOrder, |root, entry| {
            let is_blob = entry.kind() == Some(ObjectType::Blob) && entry.filemode() != 0o120000;
            if is_blob {
                let name = String::from_utf8_lossy(entry.name_bytes()).into_owned();
                let path = format!("{root}{name}");
                if extensions.iter().any(|ext| path.ends_with(ext.as_ref())) {
                    matches.push((path, name, entry.id()));
                }
            }
            TreeWalkResult::Ok
        })?;
        matches.sort_by(|a, b| a.0.cmp(&b.0));

        matches
            .into_iter()
            .map(|(path, name, id)| {
                let blob = self.repo.find_blob(id)?;
                Ok(FileBlob {
                    path,
                    name,
                    content: blob.content().to_vec(),
                })
            })
            .collect()
    }
}

pub fn list_commits(handle: &RepositoryHandle) -> Result<Vec<CommitRef>, RepoError> {
    RepoReader::open(handle)?.list_commits()
}

pub fn read_snapshot<S: AsRef<str>>(
    handle: &RepositoryHandle,
    commit: &CommitRef,
    extensions: &[S],
) -> Result<Vec<FileBlob>, RepoError> {
    RepoReader::open(handle)?.read_snapshot(commit, extensions)
}
