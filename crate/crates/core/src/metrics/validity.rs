//! Validity records and fidelity counting.
//!
//! Properties come from external estimators as a CSV table keyed by the
//! decoded sample string: a header `sample_id,<columns...>`, where a column
//! whose every value parses as `true`/`false` is a boolean flag and any
//! other column is a real property. Criteria thresholds live in the
//! evaluation configuration, not in the table.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use super::MetricsError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct ValidityRecord<T> {
    pub id: String,
    pub flags: BTreeMap<String, bool>,
    pub props: BTreeMap<String, T>,
}

#[derive(Debug, Clone)]
pub struct PropertyTable<T> {
    flag_columns: Vec<String>,
    prop_columns: Vec<String>,
    order: Vec<String>,
    records: HashMap<String, ValidityRecord<T>>,
}

impl<T: Scalar> PropertyTable<T> {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, MetricsError> {
        let text = fs::read_to_string(path)?;
        Self::parse_csv(&text)
    }

    pub fn parse_csv(text: &str) -> Result<Self, MetricsError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(MetricsError::PropertyCsv {
            line: 1,
            msg: "empty file".into(),
        })?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.first() != Some(&"sample_id") {
            return Err(MetricsError::PropertyCsv {
                line: 1,
                msg: "first header column must be `sample_id`".into(),
            });
        }
        let names: Vec<String> = cols[1..].iter().map(|s| s.to_string()).collect();
        let mut rows: Vec<(usize, String, Vec<String>)> = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != names.len() + 1 {
                return Err(MetricsError::PropertyCsv {
                    line: i + 2,
                    msg: format!("expected {} fields, found {}", names.len() + 1, fields.len()),
                });
            }
            rows.push((
                i + 2,
                fields[0].to_owned(),
                fields[1..].iter().map(|s| s.trim().to_owned()).collect(),
            ));
        }

        // a column is boolean when every value is a true/false literal
        let is_bool = |v: &str| matches!(v.to_ascii_lowercase().as_str(), "true" | "false");
        let flag_mask: Vec<bool> = (0..names.len())
            .map(|c| !rows.is_empty() && rows.iter().all(|(_, _, vals)| is_bool(&vals[c])))
            .collect();

        let mut order = Vec::with_capacity(rows.len());
        let mut records = HashMap::with_capacity(rows.len());
        for (line, id, vals) in rows {
            let mut flags = BTreeMap::new();
            let mut props = BTreeMap::new();
            for (c, name) in names.iter().enumerate() {
                if flag_mask[c] {
                    flags.insert(name.clone(), vals[c].eq_ignore_ascii_case("true"));
                } else {
                    let v = vals[c].parse::<T>().map_err(|_| MetricsError::PropertyCsv {
                        line,
                        msg: format!("bad number {:?} in column {name}", vals[c]),
                    })?;
                    props.insert(name.clone(), v);
                }
            }
            if records
                .insert(id.clone(), ValidityRecord { id: id.clone(), flags, props })
                .is_some()
            {
                return Err(MetricsError::DuplicateSample { id });
            }
            order.push(id);
        }
        let flag_columns = names
            .iter()
            .zip(&flag_mask)
            .filter(|&(_, &f)| f)
            .map(|(n, _)| n.clone())
            .collect();
        let prop_columns = names
            .iter()
            .zip(&flag_mask)
            .filter(|&(_, &f)| !f)
            .map(|(n, _)| n.clone())
            .collect();
        Ok(PropertyTable {
            flag_columns,
            prop_columns,
            order,
            records,
        })
    }

    pub fn from_records(records: Vec<ValidityRecord<T>>) -> Result<Self, MetricsError> {
        let flag_columns: Vec<String> = records
            .first()
            .map(|r| r.flags.keys().cloned().collect())
            .unwrap_or_default();
        let prop_columns: Vec<String> = records
            .first()
            .map(|r| r.props.keys().cloned().collect())
            .unwrap_or_default();
        let mut order = Vec::with_capacity(records.len());
        let mut map = HashMap::with_capacity(records.len());
        for r in records {
            let id = r.id.clone();
            if map.insert(id.clone(), r).is_some() {
                return Err(MetricsError::DuplicateSample { id });
            }
            order.push(id);
        }
        Ok(PropertyTable {
            flag_columns,
            prop_columns,
            order,
            records: map,
        })
    }

    pub fn get(&self, id: &str) -> Option<&ValidityRecord<T>> {
        self.records.get(id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn flag_columns(&self) -> &[String] {
        &self.flag_columns
    }

    pub fn prop_columns(&self) -> &[String] {
        &self.prop_columns
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.flag_columns.iter().any(|c| c == name)
            || self.prop_columns.iter().any(|c| c == name)
    }

    /// Deterministic CSV rendering in insertion order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sample_id");
        for c in self.flag_columns.iter().chain(&self.prop_columns) {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for id in &self.order {
            let r = &self.records[id];
            out.push_str(id);
            for c in &self.flag_columns {
                out.push(',');
                out.push_str(if r.flags[c] { "true" } else { "false" });
            }
            for c in &self.prop_columns {
                out.push(',');
                out.push_str(&format!("{}", r.props[c]));
            }
            out.push('\n');
        }
        out
    }
}

/// Fidelity and rate of a sample list against a training set and a validity
/// predicate. `fidelity = |new and valid| / |new|` (undefined when nothing is
/// new); `rate = |new and valid| / |samples|`. Duplicate samples count per
/// occurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct FidelityOutcome<T> {
    pub n_samples: usize,
    pub n_new: usize,
    pub n_new_valid: usize,
    pub fidelity: Option<T>,
    pub rate: T,
}

pub fn fidelity<T: Scalar>(
    samples: &[impl AsRef<str>],
    train_set: &HashSet<String>,
    is_valid: impl Fn(&str) -> bool,
) -> FidelityOutcome<T> {
    let mut n_new = 0usize;
    let mut n_new_valid = 0usize;
    for s in samples {
        let s = s.as_ref();
        if !train_set.contains(s) {
            n_new += 1;
            if is_valid(s) {
                n_new_valid += 1;
            }
        }
    }
    let fidelity = (n_new > 0)
        .then(|| T::from_usize_lossy(n_new_valid) / T::from_usize_lossy(n_new));
    let rate = if samples.is_empty() {
        T::zero()
    } else {
        T::from_usize_lossy(n_new_valid) / T::from_usize_lossy(samples.len())
    };
    FidelityOutcome {
        n_samples: samples.len(),
        n_new,
        n_new_valid,
        fidelity,
        rate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE: &str = "\
sample_id,has_oh,bde,ip
[C][O],true,80,190
[C],false,90,170
[O],true,84.5,183
";

    #[test]
    fn parse_detects_flag_and_property_columns() {
        let t = PropertyTable::<f64>::parse_csv(TABLE).unwrap();
        assert_eq!(t.flag_columns(), &["has_oh".to_string()]);
        assert_eq!(t.prop_columns(), &["bde".to_string(), "ip".to_string()]);
        let r = t.get("[C][O]").unwrap();
        assert!(r.flags["has_oh"]);
        assert_eq!(r.props["bde"], 80.0);
        assert_eq!(t.len(), 3);
    }

    #[test]
    fn csv_round_trips() {
        let t = PropertyTable::<f64>::parse_csv(TABLE).unwrap();
        let again = PropertyTable::<f64>::parse_csv(&t.to_csv()).unwrap();
        assert_eq!(again.to_csv(), t.to_csv());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let text = "sample_id,v\n[C],1\n[C],2\n";
        assert!(matches!(
            PropertyTable::<f64>::parse_csv(text),
            Err(MetricsError::DuplicateSample { .. })
        ));
    }

    #[test]
    fn bad_numbers_are_reported_with_line() {
        let text = "sample_id,v\n[C],1\n[O],zap\n";
        match PropertyTable::<f64>::parse_csv(text) {
            Err(MetricsError::PropertyCsv { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected csv error, got {other:?}"),
        }
    }

    #[test]
    fn fidelity_all_new() {
        let train: HashSet<String> = HashSet::new();
        let samples: Vec<String> = (0..10).map(|i| format!("s{i}")).collect();
        let out = fidelity::<f64>(&samples, &train, |s| s < "s4");
        assert_eq!(out.n_new, 10);
        assert_eq!(out.n_new_valid, 4);
        assert_eq!(out.fidelity, Some(0.4));
        assert_eq!(out.rate, 0.4);
    }

    #[test]
    fn fidelity_with_seen_samples() {
        let train: HashSet<String> =
            ["s5", "s6", "s7", "s8", "s9"].iter().map(|s| s.to_string()).collect();
        let samples: Vec<String> = (0..10).map(|i| format!("s{i}")).collect();
        // 5 new (s0..s4), 2 of them valid
        let out = fidelity::<f64>(&samples, &train, |s| s == "s0" || s == "s1");
        assert_eq!(out.n_new, 5);
        assert_eq!(out.fidelity, Some(0.4));
        assert_eq!(out.rate, 0.2);
    }

    #[test]
    fn fidelity_undefined_when_nothing_is_new() {
        let train: HashSet<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        let samples = vec!["a".to_string(), "b".to_string()];
        let out = fidelity::<f64>(&samples, &train, |_| true);
        assert_eq!(out.fidelity, None);
        assert_eq!(out.rate, 0.0);
    }

    #[test]
    fn new_valid_count_is_an_integer_consistent_with_ratios() {
        let train: HashSet<String> = HashSet::new();
        let samples: Vec<String> = (0..7).map(|i| format!("x{i}")).collect();
        let out = fidelity::<f64>(&samples, &train, |s| s.ends_with('3'));
        let f = out.fidelity.unwrap();
        assert_eq!((f * out.n_new as f64).round() as usize, out.n_new_valid);
    }
}
