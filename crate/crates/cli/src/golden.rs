//! Golden-table files and exact comparison against computed rows.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use gkm_core::pipeline::{table_row_with, CSelector, Context, PipelineRequest, TableRow};
use gkm_core::roots::build_datum;
use gkm_core::series::{self, TPoly};
use gkm_core::{Rational, RootSystem};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Table {
    Regular,
    Weyl,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Mandatory,
    Extended,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct GoldenRow {
    pub table: Table,
    #[serde(rename = "type")]
    pub group: String,
    pub tier: Tier,
    pub c: String,
    #[serde(default = "one")]
    pub g: usize,
    pub expr: String,
    pub numerator_coefficients: Vec<Rational>,
    pub free: bool,
    #[serde(default)]
    pub truncation: Option<u32>,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldenFile {
    pub row: Vec<GoldenRow>,
}

impl GoldenRow {
    pub fn name(&self) -> String {
        let table = match self.table {
            Table::Regular => "regular",
            Table::Weyl => "weyl",
        };
        format!("{table}/{}/g{}", self.group, self.g)
    }
}

pub fn parse(text: &str) -> Result<GoldenFile, CliError> {
    toml::from_str(text).map_err(|e| CliError::usage(format!("malformed golden file: {e}")))
}

pub fn load(path: &Path) -> Result<GoldenFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Match,
    Mismatch,
    Skipped,
}

#[derive(Clone, Debug, Serialize)]
pub struct RowReport {
    pub row: String,
    pub tier: Tier,
    pub status: Status,
    pub issues: Vec<String>,
    #[serde(skip)]
    pub seconds: f64,
    #[serde(skip)]
    pub computed: Option<TableRow>,
}

/// Expands the row's expression with `P_t(name)` bound to Poincaré polynomials.
pub fn expand(expr: &str) -> Result<TPoly, String> {
    series::parse_expr(expr, |name| build_datum(name).ok().map(|d| series::from_ints(&d.poincare())))
        .map_err(|e| format!("cannot parse {expr:?}: {e}"))
}

fn coefficient(v: &[Rational], i: usize) -> Rational {
    v.get(i).cloned().unwrap_or_else(Rational::zero)
}

/// Degree-by-degree differences between two coefficient lists.
pub fn differences(expected: &[Rational], computed: &[Rational]) -> Vec<(usize, Rational, Rational)> {
    (0..expected.len().max(computed.len()))
        .filter_map(|i| {
            let (e, c) = (coefficient(expected, i), coefficient(computed, i));
            (e != c).then_some((i, e, c))
        })
        .collect()
}

pub fn request_for(row: &GoldenRow, sys: &Arc<RootSystem>) -> Result<PipelineRequest, CliError> {
    let c = match row.table {
        Table::Regular => CSelector::Regular,
        Table::Weyl => CSelector::Central(row.c.clone()),
    };
    let ctx = Context::new(sys.clone(), row.g).map_err(|e| CliError::usage(format!("{}: {e}", row.name())))?;
    let truncation = row.truncation.unwrap_or(match row.table {
        Table::Regular => ctx.default_truncation(),
        Table::Weyl => ctx.default_weyl_truncation(),
    });
    Ok(PipelineRequest::new(&row.group, row.g, c).with_truncation(truncation))
}

/// Compares one computed row against its golden entry.
pub fn compare(row: &GoldenRow, computed: &TableRow) -> Vec<String> {
    let mut issues = Vec::new();
    match expand(&row.expr) {
        Ok(p) => {
            for (d, e, c) in differences(&row.numerator_coefficients, &p) {
                issues.push(format!("golden file inconsistent at degree {d}: coefficients say {e}, expression gives {c}"));
            }
        }
        Err(e) => issues.push(e),
    }
    let got: Vec<Rational> = computed.total.coefficients.iter().map(|&x| Rational::from_int(x)).collect();
    for (d, e, c) in differences(&row.numerator_coefficients, &got) {
        issues.push(format!("degree {d}: expected {e}, computed {c}"));
    }
    let verdict = if row.free { "yes" } else { "no" };
    if computed.free != verdict {
        issues.push(format!("free: expected {verdict}, computed {}", computed.free));
    }
    if !computed.stable {
        issues.push(format!("numerator not stable at truncation {}", computed.truncation));
    }
    issues
}

/// Verifies every row of the selected tiers in file order.
pub fn verify(file: &GoldenFile, tiers: &[Tier]) -> Result<Vec<RowReport>, CliError> {
    let mut reports = Vec::new();
    for row in &file.row {
        if !tiers.contains(&row.tier) {
            reports.push(RowReport {
                row: row.name(),
                tier: row.tier,
                status: Status::Skipped,
                issues: Vec::new(),
                seconds: 0.0,
                computed: None,
            });
            continue;
        }
        let start = Instant::now();
        let sys = Arc::new(RootSystem::build(&row.group).map_err(|e| CliError::usage(format!("{}: {e}", row.name())))?);
        let req = request_for(row, &sys)?;
        let computed = table_row_with(sys, &req).map_err(|e| CliError::failure(format!("{}: {e}", row.name())))?;
        let issues = compare(row, &computed);
        reports.push(RowReport {
            row: row.name(),
            tier: row.tier,
            status: if issues.is_empty() { Status::Match } else { Status::Mismatch },
            issues,
            seconds: start.elapsed().as_secs_f64(),
            computed: Some(computed),
        });
    }
    Ok(reports)
}

pub fn render(reports: &[RowReport]) -> String {
    let w = reports.iter().map(|r| r.row.len()).max().unwrap_or(0);
    let mut s = String::new();
    for r in reports {
        let status = match r.status {
            Status::Match => "MATCH",
            Status::Mismatch => "MISMATCH",
            Status::Skipped => "SKIP",
        };
        s.push_str(&format!("{:<w$}  {status}\n", r.row, w = w));
        for i in &r.issues {
            s.push_str(&format!("{:<w$}    {i}\n", "", w = w));
        }
    }
    s
}
