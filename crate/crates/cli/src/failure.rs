use std::fmt;
use std::process::ExitCode;

/// Exit status classes shared by every command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// An asserted property or bound did not hold.
    Violation,
    /// Enumeration budget exceeded or the requested problem is infeasible.
    Budget,
    /// Unreadable input, bad configuration, or a write error.
    Config,
}

impl Kind {
    pub fn code(self) -> u8 {
        match self {
            Kind::Violation => 2,
            Kind::Budget => 3,
            Kind::Config => 4,
        }
    }
}

#[derive(Debug)]
pub struct Failure {
    pub kind: Kind,
    pub message: String,
}

impl Failure {
    pub fn violation(message: impl Into<String>) -> Self {
        Failure { kind: Kind::Violation, message: message.into() }
    }

    pub fn budget(message: impl Into<String>) -> Self {
        Failure { kind: Kind::Budget, message: message.into() }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Failure { kind: Kind::Config, message: message.into() }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.kind.code())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<lqsense::Error> for Failure {
    fn from(e: lqsense::Error) -> Self {
        use lqsense::Error as E;
        let kind = match e {
            E::Budget { .. } | E::Infeasible { .. } | E::NotUniquelyDetermined(_) => Kind::Budget,
            E::Root(_) => Kind::Violation,
            _ => Kind::Config,
        };
        Failure { kind, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::config(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::config(e.to_string())
    }
}

pub type Outcome<T> = Result<T, Failure>;
