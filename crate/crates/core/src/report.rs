//! Serializable records emitted by the family pipelines.

use std::collections::BTreeMap;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::descent::TraceEntry;
use crate::padic::{pow_p, PadicScalar};
use crate::series::DiscSeries;
use crate::valuation::Val;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScalarRecord {
    /// `None` for zero.
    pub valuation: Option<i64>,
    pub unit: Option<String>,
}

impl ScalarRecord {
    pub fn of(x: &PadicScalar) -> Self {
        let valuation = x.valuation();
        let unit = valuation.map(|v| match x.rel_prec() {
            Some(k) => x.unit_mod(k as u32).unwrap().to_string(),
            None => scale_out(x.prime(), x.to_rational(), v).to_string(),
        });
        ScalarRecord { valuation, unit }
    }
}

fn scale_out(p: u64, r: BigRational, v: i64) -> BigRational {
    let pk = BigRational::from_integer(pow_p(p, v.unsigned_abs() as u32));
    if v >= 0 {
        r / pk
    } else {
        r * pk
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub p: u64,
    pub h: u32,
    pub ap: ScalarRecord,
    pub a_prime: String,
    #[serde(rename = "D")]
    pub degree: usize,
    /// Requested coefficient precision.
    #[serde(rename = "N")]
    pub prec: i64,
    pub working_prec: i64,
    pub stop_floor: Val,
}

/// One coefficient of `P`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoeffRecord {
    pub degree: usize,
    pub valuation: Option<i64>,
    pub unit: Option<String>,
    /// Absolute precision; `None` when exact.
    pub prec: Option<i64>,
}

impl CoeffRecord {
    pub fn of(degree: usize, x: &PadicScalar) -> Self {
        let s = ScalarRecord::of(x);
        CoeffRecord { degree, valuation: s.valuation, unit: s.unit, prec: x.abs_prec() }
    }

    pub fn poly(p: &DiscSeries, deg: usize) -> Vec<CoeffRecord> {
        (0..=deg.min(p.degree())).map(|k| CoeffRecord::of(k, p.coeff(k))).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub pass: bool,
    #[serde(rename = "certified_vR")]
    pub certified_vr: Val,
    pub threshold: Val,
}

impl CheckRecord {
    /// Passes when the certified valuation reaches the threshold.
    pub fn at_least(certified_vr: Val, threshold: Val) -> Self {
        CheckRecord { pass: certified_vr >= threshold, certified_vr, threshold }
    }

    pub fn flag(pass: bool, certified_vr: Val, threshold: Val) -> Self {
        CheckRecord { pass, certified_vr, threshold }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescentReport {
    pub command: String,
    pub instance: InstanceRecord,
    #[serde(rename = "P")]
    pub p: Vec<CoeffRecord>,
    #[serde(rename = "conjugator_offset_vR")]
    pub conjugator_offset_vr: Val,
    pub rounds: usize,
    pub attempts: usize,
    pub checks: BTreeMap<String, CheckRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modp_matrix: Option<String>,
    pub trace: Vec<TraceEntry>,
}

impl DescentReport {
    pub fn all_pass(&self) -> bool {
        self.checks.values().all(|c| c.pass)
    }

    pub fn failed_checks(&self) -> Vec<&str> {
        self.checks.iter().filter(|(_, c)| !c.pass).map(|(k, _)| k.as_str()).collect()
    }
}
