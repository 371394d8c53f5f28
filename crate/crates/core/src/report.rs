//! The `IDENTITY` report format shared by every checking operation.
//!
//! One record per line:
//!
//! ```text
//! IDENTITY <name> p=<p> [key=value ...] EXPECTED <v> GOT <v> PASS|FAIL|INFO
//! ```
//!
//! Values never contain whitespace so the line grammar stays token-based.

use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
    Info,
}

impl Status {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Info => "INFO",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentityRecord {
    pub name: String,
    pub p: u32,
    pub params: Vec<(String, String)>,
    pub expected: String,
    pub got: String,
    pub status: Status,
}

impl IdentityRecord {
    pub fn new(name: impl Into<String>, p: u32) -> Self {
        IdentityRecord {
            name: name.into(),
            p,
            params: Vec::new(),
            expected: String::new(),
            got: String::new(),
            status: Status::Info,
        }
    }

    pub fn param(mut self, key: impl Into<String>, value: impl fmt::Display) -> Self {
        self.params.push((key.into(), sanitize(&value.to_string())));
        self
    }

    /// Records an exact comparison; the status is PASS iff the strings match.
    pub fn check(mut self, expected: impl fmt::Display, got: impl fmt::Display) -> Self {
        self.expected = sanitize(&expected.to_string());
        self.got = sanitize(&got.to_string());
        self.status = Status::from_bool(self.expected == self.got);
        self
    }

    pub fn outcome(
        mut self,
        expected: impl fmt::Display,
        got: impl fmt::Display,
        status: Status,
    ) -> Self {
        self.expected = sanitize(&expected.to_string());
        self.got = sanitize(&got.to_string());
        self.status = status;
        self
    }

    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }

    /// Parses one line of the text format back into a record.
    pub fn parse_line(line: &str) -> Option<IdentityRecord> {
        let mut tokens = line.split_whitespace();
        if tokens.next()? != "IDENTITY" {
            return None;
        }
        let name = tokens.next()?.to_string();
        let p = tokens.next()?.strip_prefix("p=")?.parse().ok()?;
        let mut params = Vec::new();
        let mut tok = tokens.next()?;
        while tok != "EXPECTED" {
            let (k, v) = tok.split_once('=')?;
            params.push((k.to_string(), v.to_string()));
            tok = tokens.next()?;
        }
        let expected = tokens.next()?.to_string();
        if tokens.next()? != "GOT" {
            return None;
        }
        let got = tokens.next()?.to_string();
        let status = match tokens.next()? {
            "PASS" => Status::Pass,
            "FAIL" => Status::Fail,
            "INFO" => Status::Info,
            _ => return None,
        };
        if tokens.next().is_some() {
            return None;
        }
        Some(IdentityRecord {
            name,
            p,
            params,
            expected,
            got,
            status,
        })
    }
}

fn sanitize(s: &str) -> String {
    if s.is_empty() {
        return "-".to_string();
    }
    s.split_whitespace().collect::<Vec<_>>().join("")
}

impl fmt::Display for IdentityRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "IDENTITY {} p={}", self.name, self.p)?;
        for (k, v) in &self.params {
            write!(f, " {k}={v}")?;
        }
        write!(
            f,
            " EXPECTED {} GOT {} {}",
            self.expected, self.got, self.status
        )
    }
}

pub fn render_lines(records: &[IdentityRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.to_string());
        out.push('\n');
    }
    out
}

pub fn render_json(records: &[IdentityRecord]) -> String {
    serde_json::to_string_pretty(records).expect("records serialize")
}

pub fn count_failures(records: &[IdentityRecord]) -> usize {
    records.iter().filter(|r| r.status == Status::Fail).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_round_trip() {
        let rec = IdentityRecord::new("wilson", 5)
            .param("k", 3)
            .check("4(≡-1)", "4(≡-1)");
        let line = rec.to_string();
        assert_eq!(
            line,
            "IDENTITY wilson p=5 k=3 EXPECTED 4(≡-1) GOT 4(≡-1) PASS"
        );
        assert_eq!(IdentityRecord::parse_line(&line), Some(rec));
    }

    #[test]
    fn whitespace_is_squeezed() {
        let rec = IdentityRecord::new("x", 3).check("1 + x", "1+x");
        assert_eq!(rec.status, Status::Pass);
        assert!(IdentityRecord::parse_line("IDENTITY x p=3 EXPECTED 1 GOT").is_none());
    }
}
