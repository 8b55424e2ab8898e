//! Byte-stable CSV rendering of KPI rows.

use std::io::Write;

use cac_core::KpiRow;

pub const SIGNIFICANT_DIGITS: usize = 10;

pub const COLUMNS: [&str; 13] = [
    "scheme",
    "lambda_n",
    "source",
    "p_block",
    "p_drop",
    "utilization",
    "handover_rate",
    "forced_termination",
    "n_base",
    "s_extra",
    "l_newcall",
    "fp_iterations",
    "lambda_h",
];

pub const CI_COLUMNS: [&str; 2] = ["p_block_ci", "p_drop_ci"];

pub fn header(with_ci: bool) -> String {
    let mut cols: Vec<&str> = COLUMNS.to_vec();
    if with_ci {
        cols.extend(CI_COLUMNS);
    }
    cols.join(",")
}

/// Formats like C's `%.10g`: shortest of fixed or exponent notation with
/// ten significant digits and trailing zeros removed.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent notation");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= SIGNIFICANT_DIGITS as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    } else {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn row_line(row: &KpiRow, with_ci: bool) -> String {
    let mut fields = vec![
        row.scheme.label().to_string(),
        format_number(row.lambda_n),
        row.source.label().to_string(),
        format_number(row.p_block),
        format_number(row.p_drop),
        format_number(row.utilization),
        format_number(row.handover_rate),
        format_number(row.forced_termination),
        row.topology.n_base.to_string(),
        row.topology.s_extra.to_string(),
        row.topology.l_newcall.to_string(),
        row.fp_iterations.to_string(),
        format_number(row.lambda_h),
    ];
    if with_ci {
        for ci in [row.p_block_ci, row.p_drop_ci] {
            fields.push(ci.map(format_number).unwrap_or_default());
        }
    }
    fields.join(",")
}

pub fn write_csv(rows: &[KpiRow], with_ci: bool, out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "{}", header(with_ci))?;
    for row in rows {
        writeln!(out, "{}", row_line(row, with_ci))?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percent_g_style() {
        assert_eq!(format_number(0.05), "0.05");
        assert_eq!(format_number(1.0), "1");
        assert_eq!(format_number(0.1 + 0.2), "0.3");
        assert_eq!(format_number(1.0 / 3.0), "0.3333333333");
        assert_eq!(format_number(2.0 / 3.0), "0.6666666667");
        assert_eq!(format_number(123.456), "123.456");
        assert_eq!(format_number(4.6e-15), "4.6e-15");
        assert_eq!(format_number(0.0001), "0.0001");
        assert_eq!(format_number(0.00001234), "1.234e-05");
        assert_eq!(format_number(12345678901.0), "1.23456789e+10");
        assert_eq!(format_number(9999999999.5), "1e+10");
        assert_eq!(format_number(-0.25), "-0.25");
        assert_eq!(format_number(f64::INFINITY), "inf");
    }

    #[test]
    fn header_columns() {
        assert!(header(false).ends_with("fp_iterations,lambda_h"));
        assert!(header(true).ends_with("lambda_h,p_block_ci,p_drop_ci"));
    }
}
