//! Semicolon-separated CSV output.

use std::io::Write;

use vmetrics_core::{MeasurementRow, MetricVariant};

/// Integral values print without decimals; others use the shortest
/// representation that reads back to the same number.
pub fn format_value(value: f64) -> String {
    if value.fract() == 0.0 && value.abs() < 1e15 {
        format!("{}", value as i64)
    } else {
        format!("{value}")
    }
}

pub fn write_csv<W: Write>(rows: &[MeasurementRow], variants: &[MetricVariant], out: W) -> csv::Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .delimiter(b';')
        .terminator(csv::Terminator::Any(b'\n'))
        .quote_style(csv::QuoteStyle::Necessary)
        .from_writer(out);

    let mut header = vec!["file".to_string(), "function".to_string(), "line".to_string()];
    header.extend(variants.iter().map(|v| v.canonical_name.clone()));
    writer.write_record(&header)?;

    for row in rows {
        let mut record = vec![row.file.clone(), row.function.clone(), row.line.to_string()];
        record.extend(row.values.iter().map(|v| v.map(format_value).unwrap_or_default()));
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}
