//! Structured verification evidence: reports are data, not exceptions.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Witness {
    pub verdict: Verdict,
    pub what: String,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub curve: String,
    pub params: String,
    pub verdict: Verdict,
    pub witnesses: Vec<Witness>,
}

impl CheckReport {
    pub fn new(check: &str, curve: &str) -> Self {
        CheckReport {
            check: check.into(),
            curve: curve.into(),
            params: String::new(),
            verdict: Verdict::Pass,
            witnesses: Vec::new(),
        }
    }

    pub fn not_applicable(check: &str, curve: &str, why: &str) -> Self {
        let mut r = CheckReport::new(check, curve);
        r.verdict = Verdict::NotApplicable;
        r.witnesses.push(Witness {
            verdict: Verdict::NotApplicable,
            what: "precondition".into(),
            detail: why.into(),
        });
        r
    }

    pub fn pass(&mut self, what: String) {
        self.witnesses.push(Witness {
            verdict: Verdict::Pass,
            what,
            detail: String::new(),
        });
    }

    pub fn fail(&mut self, what: String, detail: String) {
        self.verdict = Verdict::Fail;
        self.witnesses.push(Witness {
            verdict: Verdict::Fail,
            what,
            detail,
        });
    }

    pub fn merge(&mut self, other: CheckReport) {
        if other.verdict == Verdict::Fail {
            self.verdict = Verdict::Fail;
        }
        self.witnesses.extend(other.witnesses);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }
}
