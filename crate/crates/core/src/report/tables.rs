use crate::error::Result;
use crate::metrics::{FeatureChangeTable, MethodRow, MetricName, ScaledRow};

/// Placeholder for metrics that have no value.
pub const NA: &str = "Na";

/// Shortest round-tripping decimal form, or [`NA`].
pub fn format_value(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v}"),
        None => NA.to_string(),
    }
}

fn to_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn metric_header(extra: &[&str]) -> Vec<String> {
    std::iter::once("method")
        .chain(MetricName::ALL.iter().map(|m| m.key()))
        .chain(extra.iter().copied())
        .map(str::to_string)
        .collect()
}

/// One row per method with the unscaled means.
pub fn raw_metrics_csv(rows: &[MethodRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(metric_header(&[]))?;
    for r in rows {
        let mut rec = vec![r.method.clone()];
        rec.extend(r.values.iter().map(|&v| format_value(v)));
        w.write_record(&rec)?;
    }
    to_string(w)
}

/// One row per method with the 0–1 scores and their mean.
pub fn scaled_metrics_csv(rows: &[ScaledRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(metric_header(&["overall"]))?;
    for r in rows {
        let mut rec = vec![r.method.clone()];
        rec.extend(r.values.iter().map(|&v| format_value(Some(v))));
        rec.push(format_value(Some(r.overall)));
        w.write_record(&rec)?;
    }
    to_string(w)
}

/// Features as rows and methods as columns, closed by the mean number of
/// changes.
pub fn feature_change_csv(tables: &[(String, FeatureChangeTable)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["feature".to_string()];
    header.extend(tables.iter().map(|(m, _)| m.clone()));
    w.write_record(&header)?;
    if let Some((_, first)) = tables.first() {
        for (i, f) in first.features.iter().enumerate() {
            let mut rec = vec![f.clone()];
            rec.extend(tables.iter().map(|(_, t)| t.counts[i].to_string()));
            w.write_record(&rec)?;
        }
    }
    let mut rec = vec!["mean_changes".to_string()];
    rec.extend(tables.iter().map(|(_, t)| format_value(t.mean_changes)));
    w.write_record(&rec)?;
    to_string(w)
}

/// Co-changed feature pairs of every method, most frequent first.
pub fn feature_pairs_csv(tables: &[(String, FeatureChangeTable)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "feature_a", "feature_b", "count"])?;
    for (m, t) in tables {
        for p in &t.pairs {
            w.write_record([m.as_str(), &p.a, &p.b, &p.count.to_string()])?;
        }
    }
    to_string(w)
}
