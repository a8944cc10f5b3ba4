use std::fmt;
use std::fs;
use std::path::Path;

use serde_json::{Map, Value};

use super::{CacheCounters, DelayStats, JitterStats};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub enum MetricValue {
    Int(u64),
    Float(f64),
    Text(String),
}

impl fmt::Display for MetricValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricValue::Int(v) => write!(f, "{v}"),
            MetricValue::Float(v) => write!(f, "{v}"),
            MetricValue::Text(v) => f.write_str(v),
        }
    }
}

impl From<u64> for MetricValue {
    fn from(v: u64) -> Self {
        MetricValue::Int(v)
    }
}

impl From<f64> for MetricValue {
    fn from(v: f64) -> Self {
        MetricValue::Float(if v.is_finite() { v } else { 0.0 })
    }
}

impl From<String> for MetricValue {
    fn from(v: String) -> Self {
        MetricValue::Text(v)
    }
}

impl From<&str> for MetricValue {
    fn from(v: &str) -> Self {
        MetricValue::Text(v.to_string())
    }
}

/// Flat, ordered list of `(scope, metric, value)` rows.
///
/// CSV export is `scope,metric,value`; JSON export nests the same rows as
/// `{scope: {metric: value}}` in the same order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsReport {
    rows: Vec<(String, String, MetricValue)>,
}

impl MetricsReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, scope: &str, metric: &str, value: impl Into<MetricValue>) {
        self.rows.push((scope.to_string(), metric.to_string(), value.into()));
    }

    pub fn rows(&self) -> &[(String, String, MetricValue)] {
        &self.rows
    }

    pub fn get(&self, scope: &str, metric: &str) -> Option<&MetricValue> {
        self.rows
            .iter()
            .find(|(s, m, _)| s == scope && m == metric)
            .map(|(_, _, v)| v)
    }

    pub fn get_f64(&self, scope: &str, metric: &str) -> Option<f64> {
        match self.get(scope, metric)? {
            MetricValue::Int(v) => Some(*v as f64),
            MetricValue::Float(v) => Some(*v),
            MetricValue::Text(_) => None,
        }
    }

    pub fn push_cache(&mut self, scope: &str, c: &CacheCounters) {
        self.push(scope, "requests", c.requests);
        self.push(scope, "hits1", c.hits1);
        self.push(scope, "hits2", c.hits2);
        self.push(scope, "misses", c.misses);
        self.push(scope, "drops", c.drops);
        self.push(scope, "promotions", c.promotions);
        self.push(scope, "hit_ratio", c.hit_ratio());
        self.push(scope, "byte_hit_ratio", c.byte_hit_ratio());
    }

    pub fn push_flow_class(
        &mut self,
        scope: &str,
        created: u64,
        delivered: u64,
        lost: u64,
        d: &DelayStats,
        j: &JitterStats,
    ) {
        self.push(scope, "packets_created", created);
        self.push(scope, "packets_delivered", delivered);
        self.push(scope, "packets_lost", lost);
        self.push(scope, "delay_mean_s", d.mean);
        self.push(scope, "delay_p50_s", d.p50);
        self.push(scope, "delay_p95_s", d.p95);
        self.push(scope, "delay_p99_s", d.p99);
        self.push(scope, "ipdv_pairs", j.pairs);
        self.push(scope, "ipdv_mean_abs_s", j.mean_abs);
        self.push(scope, "ipdv_stddev_s", j.stddev);
        self.push(scope, "ipdv_p99_abs_s", j.p99_abs);
        self.push(scope, "loss_ratio", super::loss_ratio(lost, created));
    }

    pub fn to_csv(&self) -> Result<String, ReportError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["scope", "metric", "value"])?;
        for (s, m, v) in &self.rows {
            w.write_record([s.as_str(), m.as_str(), &v.to_string()])?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json_value(&self) -> Value {
        let mut root = Map::new();
        for (s, m, v) in &self.rows {
            let scope = root
                .entry(s.clone())
                .or_insert_with(|| Value::Object(Map::new()))
                .as_object_mut()
                .expect("scope is an object");
            let value = match v {
                MetricValue::Int(i) => Value::from(*i),
                MetricValue::Float(f) => Value::from(*f),
                MetricValue::Text(t) => Value::from(t.as_str()),
            };
            scope.insert(m.clone(), value);
        }
        Value::Object(root)
    }

    pub fn to_json(&self) -> Result<String, ReportError> {
        let mut s = serde_json::to_string_pretty(&self.to_json_value())?;
        s.push('\n');
        Ok(s)
    }

    pub fn export_csv(&self, path: impl AsRef<Path>) -> Result<(), ReportError> {
        fs::write(path, self.to_csv()?)?;
        Ok(())
    }

    pub fn export_json(&self, path: impl AsRef<Path>) -> Result<(), ReportError> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }
}
