//! Exit codes and the one-line diagnostic printed on failure.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sociospatial::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Validation,
    Estimation,
    MissingArtifact,
}

impl Kind {
    pub fn exit_code(self) -> u8 {
        match self {
            Kind::Validation => 2,
            Kind::Estimation => 3,
            Kind::MissingArtifact => 4,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Failure {
    pub kind: Kind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spec: Option<String>,
    pub message: String,
}

pub type CliResult<T> = std::result::Result<T, Failure>;

impl Failure {
    pub fn new(kind: Kind, message: impl Into<String>) -> Self {
        Failure { kind, file: None, spec: None, message: message.into() }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self::new(Kind::Validation, message)
    }

    pub fn in_file(mut self, path: &Path) -> Self {
        self.file = Some(path.to_path_buf());
        self
    }

    pub fn in_spec(mut self, name: &str) -> Self {
        self.spec = Some(name.to_string());
        self
    }

    /// `{"status":"error","exit_code":N,...}` on a single line.
    pub fn diagnostic(&self) -> String {
        #[derive(Serialize)]
        struct Line<'a> {
            status: &'static str,
            exit_code: u8,
            #[serde(flatten)]
            failure: &'a Failure,
        }
        serde_json::to_string(&Line { status: "error", exit_code: self.kind.exit_code(), failure: self })
            .expect("diagnostic serializes")
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(p) = &self.file {
            write!(f, "{}: ", p.display())?;
        }
        if let Some(s) = &self.spec {
            write!(f, "spec {s}: ")?;
        }
        f.write_str(&self.message)
    }
}

/// Library errors raised while estimating map to exit 3, the rest to 2.
impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let kind = match e {
            Error::NoConvergence { .. }
            | Error::RankDeficient(_)
            | Error::SingleCluster
            | Error::UnknownRegressor(_)
            | Error::InvalidSpec(_)
            | Error::TooFewObservations { .. } => Kind::Estimation,
            _ => Kind::Validation,
        };
        let file = match &e {
            Error::Io { path, .. } => Some(path.clone()),
            _ => None,
        };
        Failure { kind, file, spec: None, message: e.to_string() }
    }
}

pub trait Context<T> {
    fn in_file(self, path: &Path) -> CliResult<T>;
}

impl<T> Context<T> for sociospatial::Result<T> {
    fn in_file(self, path: &Path) -> CliResult<T> {
        self.map_err(|e| {
            let mut f = Failure::from(e);
            f.file.get_or_insert_with(|| path.to_path_buf());
            f
        })
    }
}
