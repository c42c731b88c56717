//! Human and machine renderings of reports.

use std::fmt::Write as _;

use domi_core::kernel::fmt_f64;
use domi_core::toy::ToyReport;

use crate::error::Result;

/// `v` rounded to 4 significant digits in fixed notation.
pub fn sig4(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v:.3}");
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (3 - magnitude).max(0) as usize;
    format!("{v:.decimals$}")
}

pub fn toy_text(report: &ToyReport) -> String {
    let mut out = format!(
        "toy batches: {} draws per method, seed {}\n",
        report.n_batches, report.seed
    );
    writeln!(
        out,
        "{:<7}{:>8}{:>9}{:>9}{:>18}{:>18}",
        "method", "support", "Osc", "Dsc", "E[Osc]", "E[Dsc]"
    )
    .unwrap();
    for row in &report.rows {
        let exact = |f: domi_core::toy::Fraction| format!("{f} ({})", sig4(f.value()));
        writeln!(
            out,
            "{:<7}{:>8}{:>9}{:>9}{:>18}{:>18}",
            row.method.name(),
            row.support_size,
            sig4(row.osc_mean),
            sig4(row.dsc_mean),
            exact(row.exact_osc),
            exact(row.exact_dsc),
        )
        .unwrap();
    }
    out
}

pub fn toy_csv(report: &ToyReport) -> String {
    let mut out = String::from(
        "method,support_size,osc_mean,dsc_mean,exact_osc,exact_dsc,exact_osc_fraction,exact_dsc_fraction\n",
    );
    for row in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            row.method.name(),
            row.support_size,
            fmt_f64(row.osc_mean),
            fmt_f64(row.dsc_mean),
            fmt_f64(row.exact_osc.value()),
            fmt_f64(row.exact_dsc.value()),
            row.exact_osc,
            row.exact_dsc,
        )
        .unwrap();
    }
    out
}

pub fn toy_json(report: &ToyReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}
