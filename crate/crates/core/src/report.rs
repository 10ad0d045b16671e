//! Solver comparison tables and resilience curves.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dispatch::{objective, DispatchError, DispatchInstance, DispatchPlan};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("nothing to report")]
    Empty,
    #[error("plan of solver `{solver}` does not fit the instance: {source}")]
    Mismatch {
        solver: String,
        #[source]
        source: DispatchError,
    },
    #[error("negative wall-clock time for solver `{0}`")]
    NegativeSeconds(String),
}

/// One solver's result on one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub scenario: usize,
    pub solver: String,
    pub objective: f64,
    /// Signed relative gap to the exact solver, when it ran.
    pub gap: Option<f64>,
    pub seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
}

/// A named plan with its optional wall-clock time.
pub struct SolverPlan<'a> {
    pub solver: &'a str,
    pub plan: &'a DispatchPlan,
    pub seconds: Option<f64>,
}

/// `(value − exact) / exact`. A zero reference gives a zero gap for a zero
/// value and no gap otherwise.
pub fn signed_gap(value: f64, exact: f64) -> Option<f64> {
    if exact.abs() > 1e-12 {
        Some((value - exact) / exact)
    } else if value.abs() <= 1e-12 {
        Some(0.0)
    } else {
        None
    }
}

/// `+2.0%`, `0.0%`, `-2.3%`.
pub fn format_gap(gap: f64) -> String {
    let pct = gap * 100.0;
    if pct.abs() < 0.05 {
        "0.0%".to_string()
    } else {
        format!("{pct:+.1}%")
    }
}

/// Scores every plan on `instance`; gaps are taken against the plan named
/// `exact_solver` when present.
pub fn emit_comparison(
    scenario: usize,
    instance: &DispatchInstance,
    plans: &[SolverPlan],
    exact_solver: Option<&str>,
) -> Result<ComparisonReport, ReportError> {
    if plans.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut scored = Vec::with_capacity(plans.len());
    for p in plans {
        if p.seconds.is_some_and(|s| s < 0.0) {
            return Err(ReportError::NegativeSeconds(p.solver.to_string()));
        }
        let obj = objective(p.plan, instance).map_err(|source| ReportError::Mismatch {
            solver: p.solver.to_string(),
            source,
        })?;
        scored.push(obj.value);
    }
    let exact = exact_solver.and_then(|name| plans.iter().position(|p| p.solver == name).map(|i| scored[i]));
    Ok(ComparisonReport {
        rows: plans
            .iter()
            .zip(&scored)
            .map(|(p, &v)| ComparisonRow {
                scenario,
                solver: p.solver.to_string(),
                objective: v,
                gap: exact.and_then(|e| signed_gap(v, e)),
                seconds: p.seconds,
            })
            .collect(),
    })
}

impl ComparisonReport {
    pub fn extend(&mut self, other: ComparisonReport) {
        self.rows.extend(other.rows);
    }

    fn cells(&self, with_seconds: bool) -> (Vec<&'static str>, Vec<Vec<String>>) {
        let mut header = vec!["scenario", "solver", "objective", "gap"];
        if with_seconds {
            header.push("seconds");
        }
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut c = vec![
                    r.scenario.to_string(),
                    r.solver.clone(),
                    format!("{:.6}", r.objective),
                    r.gap.map(format_gap).unwrap_or_default(),
                ];
                if with_seconds {
                    c.push(r.seconds.map(|s| format!("{s:.3}")).unwrap_or_default());
                }
                c
            })
            .collect();
        (header, rows)
    }

    /// CSV; wall-clock seconds only when asked, so the default output is
    /// reproducible.
    pub fn to_csv(&self, with_seconds: bool) -> String {
        let (header, rows) = self.cells(with_seconds);
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&header).expect("in-memory write");
        for r in rows {
            w.write_record(&r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    /// Column-aligned plain text.
    pub fn to_text(&self, with_seconds: bool) -> String {
        let (header, rows) = self.cells(with_seconds);
        let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
        for r in &rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.len());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, cells: &[String]| {
            let parts: Vec<String> = cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, &w))| if i == 1 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            out.push_str(parts.join("  ").trim_end());
            out.push('\n');
        };
        line(&mut out, &header.iter().map(|s| s.to_string()).collect::<Vec<_>>());
        for r in &rows {
            line(&mut out, r);
        }
        out
    }
}

/// Resilience series padded to a common length; a finished timeline keeps
/// its last value.
fn aligned(series: &[(String, Vec<f64>)]) -> Result<(usize, Vec<Vec<f64>>), ReportError> {
    if series.is_empty() || series.iter().any(|(_, r)| r.is_empty()) {
        return Err(ReportError::Empty);
    }
    let len = series.iter().map(|(_, r)| r.len()).max().unwrap_or(0);
    let cols = series
        .iter()
        .map(|(_, r)| {
            let mut r = r.clone();
            let last = *r.last().expect("non-empty");
            r.resize(len, last);
            r
        })
        .collect();
    Ok((len, cols))
}

/// CSV with header `t,<solver>...` and one row per timestep. Series are
/// resilience values indexed by timestep.
pub fn resilience_csv(series: &[(String, Vec<f64>)]) -> Result<String, ReportError> {
    let (len, cols) = aligned(series)?;
    let mut out = String::from("t");
    for (name, _) in series {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for t in 0..len {
        write!(out, "{t}").expect("string write");
        for c in &cols {
            write!(out, ",{}", c[t]).expect("string write");
        }
        out.push('\n');
    }
    Ok(out)
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Step-function resilience plot, one polyline per solver.
pub fn resilience_svg(series: &[(String, Vec<f64>)], title: &str) -> Result<String, ReportError> {
    let (len, cols) = aligned(series)?;
    let (w, h) = (640.0, 400.0);
    let (left, right, top, bottom) = (60.0, 140.0, 40.0, 50.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let t_max = (len.max(2) - 1) as f64;
    let x = |t: f64| left + pw * t / t_max;
    let y = |r: f64| top + ph * (1.0 - r);

    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#).unwrap();
    writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="24" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#, left + pw / 2.0, escape(title)).unwrap();
    writeln!(
        s,
        r#"<path d="M{left} {top} V{} H{}" fill="none" stroke="black"/>"#,
        top + ph,
        left + pw
    )
    .unwrap();
    for k in 0..=4 {
        let r = k as f64 / 4.0;
        writeln!(
            s,
            r#"<text x="{}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="end">{r:.2}</text>"#,
            left - 6.0,
            y(r) + 4.0
        )
        .unwrap();
    }
    let ticks = (len - 1).clamp(1, 10);
    for k in 0..=ticks {
        let t = (t_max * k as f64 / ticks as f64).round();
        writeln!(
            s,
            r#"<text x="{:.1}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{t}</text>"#,
            x(t),
            top + ph + 16.0
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">timestep</text>"#,
        left + pw / 2.0,
        h - 12.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="16" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 16 {})">resilience index</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    )
    .unwrap();
    for (i, ((name, _), col)) in series.iter().zip(&cols).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut d = format!("M{:.2} {:.2}", x(0.0), y(col[0]));
        for t in 1..len {
            write!(d, " H{:.2} V{:.2}", x(t as f64), y(col[t])).unwrap();
        }
        writeln!(s, r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="2"/>"#).unwrap();
        let ly = top + 16.0 * i as f64 + 8.0;
        writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            left + pw + 12.0,
            left + pw + 32.0
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#,
            left + pw + 38.0,
            ly + 4.0,
            escape(name)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
