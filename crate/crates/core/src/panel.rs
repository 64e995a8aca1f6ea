//! Long-format panel ingestion and canonical export.
//!
//! Input rows are `date,entity,layer,value`. The cube is indexed
//! `(date, entity, layer)` with entities and layers sorted lexicographically
//! and dates in calendar order.

use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

const DATE_FORMAT: &str = "%Y-%m-%d";
const HEADER: [&str; 4] = ["date", "entity", "layer", "value"];

/// What to do with `(date, entity, layer)` cells absent from the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    #[default]
    Reject,
    /// Carry the previous date's value forward; a gap on the first date is still an error.
    ForwardFill,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelSeries {
    dates: Vec<String>,
    entities: Vec<String>,
    layers: Vec<String>,
    values: Vec<f64>,
}

impl PanelSeries {
    /// `values` is the `(T, E, L)` cube in row-major order.
    pub fn new(dates: Vec<String>, entities: Vec<String>, layers: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let expected = dates.len() * entities.len() * layers.len();
        if expected == 0 {
            return Err(Error::InvalidShape(
                "panel needs at least one date, entity and layer".into(),
            ));
        }
        if values.len() != expected {
            return Err(Error::InvalidShape(format!(
                "{} values for a ({}, {}, {}) panel",
                values.len(),
                dates.len(),
                entities.len(),
                layers.len()
            )));
        }
        let parsed: Vec<NaiveDate> = dates
            .iter()
            .map(|d| {
                NaiveDate::parse_from_str(d, DATE_FORMAT)
                    .map_err(|e| Error::InvalidArgument(format!("date {d:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        if parsed.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("dates are not strictly increasing".into()));
        }
        for labels in [&entities, &layers] {
            if labels.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidArgument(format!(
                    "labels {labels:?} are not sorted and unique"
                )));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("panel values".into()));
        }
        Ok(PanelSeries {
            dates,
            entities,
            layers,
            values,
        })
    }

    pub fn dates(&self) -> &[String] {
        &self.dates
    }

    pub fn entities(&self) -> &[String] {
        &self.entities
    }

    pub fn layers(&self) -> &[String] {
        &self.layers
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.dates.len(), self.entities.len(), self.layers.len()]
    }

    pub fn value(&self, t: usize, e: usize, l: usize) -> f64 {
        let [_, ne, nl] = self.shape();
        self.values[(t * ne + e) * nl + l]
    }

    /// Time series of one `(entity, layer)` cell.
    pub fn series(&self, e: usize, l: usize) -> Vec<f64> {
        (0..self.dates.len()).map(|t| self.value(t, e, l)).collect()
    }

    /// Every cell's series, entity-major.
    pub fn all_series(&self) -> Vec<Vec<f64>> {
        let [_, ne, nl] = self.shape();
        (0..ne)
            .flat_map(|e| (0..nl).map(move |l| (e, l)))
            .map(|(e, l)| self.series(e, l))
            .collect()
    }

    /// Inverse of [`PanelSeries::all_series`] over a possibly shorter date range.
    pub fn from_series(
        dates: Vec<String>,
        entities: Vec<String>,
        layers: Vec<String>,
        series: &[Vec<f64>],
    ) -> Result<Self> {
        let (nt, ne, nl) = (dates.len(), entities.len(), layers.len());
        if series.len() != ne * nl || series.iter().any(|s| s.len() != nt) {
            return Err(Error::DimensionMismatch(format!(
                "series do not match a ({nt}, {ne}, {nl}) panel"
            )));
        }
        let mut values = vec![0.0; nt * ne * nl];
        for (c, s) in series.iter().enumerate() {
            for (t, &v) in s.iter().enumerate() {
                values[t * ne * nl + c] = v;
            }
        }
        PanelSeries::new(dates, entities, layers, values)
    }

    pub fn to_tensor(&self) -> DenseTensor {
        DenseTensor::new(self.shape().to_vec(), self.values.clone()).expect("panel shape matches its values")
    }

    /// Natural log of every value, shifting by `epsilon` first. Nonpositive
    /// shifted values are rejected.
    pub fn log_transform(&self, epsilon: f64) -> Result<PanelSeries> {
        let [_, ne, nl] = self.shape();
        let mut values = Vec::with_capacity(self.values.len());
        for (idx, &v) in self.values.iter().enumerate() {
            let shifted = v + epsilon;
            if !(shifted > 0.0) {
                let t = idx / (ne * nl);
                let e = (idx / nl) % ne;
                let l = idx % nl;
                return Err(Error::InvalidArgument(format!(
                    "cannot log-transform value {v} at ({}, {}, {}); set log_shift to a positive epsilon",
                    self.dates[t], self.entities[e], self.layers[l]
                )));
            }
            values.push(shifted.ln());
        }
        Ok(PanelSeries { values, ..self.clone() })
    }
}

pub fn ingest_csv(path: impl AsRef<Path>, policy: MissingPolicy) -> Result<PanelSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    ingest_reader(file, &path.display().to_string(), policy)
}

/// Parses long-format CSV from any reader; `source` labels error messages.
pub fn ingest_reader(reader: impl Read, source: &str, policy: MissingPolicy) -> Result<PanelSeries> {
    let data_err = |row: usize, msg: String| Error::Data {
        path: source.to_string(),
        row,
        msg,
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| data_err(1, e.to_string()))?.clone();
    if headers.iter().ne(HEADER.iter().copied()) {
        return Err(data_err(
            1,
            format!(
                "header must be `{}`, found `{}`",
                HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }

    let mut cells: HashMap<(NaiveDate, String, String), (f64, usize)> = HashMap::new();
    let (mut dates, mut entities, mut layers) = (BTreeSet::new(), BTreeSet::new(), BTreeSet::new());
    for (i, record) in rdr.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| data_err(row, e.to_string()))?;
        if record.len() != 4 {
            return Err(data_err(row, format!("expected 4 fields, found {}", record.len())));
        }
        let date = NaiveDate::parse_from_str(&record[0], DATE_FORMAT)
            .map_err(|e| data_err(row, format!("date {:?}: {e}", &record[0])))?;
        let (entity, layer) = (record[1].to_string(), record[2].to_string());
        if entity.is_empty() || layer.is_empty() {
            return Err(data_err(row, "empty entity or layer label".into()));
        }
        let value: f64 = record[3]
            .parse()
            .map_err(|_| data_err(row, format!("non-numeric value {:?}", &record[3])))?;
        if !value.is_finite() {
            return Err(data_err(row, format!("non-finite value {:?}", &record[3])));
        }
        let key = (date, entity.clone(), layer.clone());
        if let Some((_, first)) = cells.get(&key) {
            return Err(data_err(
                row,
                format!(
                    "duplicate ({}, {entity}, {layer}), first seen at row {first}",
                    date.format(DATE_FORMAT)
                ),
            ));
        }
        cells.insert(key, (value, row));
        dates.insert(date);
        entities.insert(entity);
        layers.insert(layer);
    }
    if cells.is_empty() {
        return Err(data_err(1, "no data rows".into()));
    }

    let dates: Vec<NaiveDate> = dates.into_iter().collect();
    let entities: Vec<String> = entities.into_iter().collect();
    let layers: Vec<String> = layers.into_iter().collect();
    let (ne, nl) = (entities.len(), layers.len());
    let mut values = vec![0.0; dates.len() * ne * nl];
    let mut filled = 0usize;
    for (t, date) in dates.iter().enumerate() {
        for (e, entity) in entities.iter().enumerate() {
            for (l, layer) in layers.iter().enumerate() {
                let idx = (t * ne + e) * nl + l;
                match cells.get(&(*date, entity.clone(), layer.clone())) {
                    Some(&(v, _)) => values[idx] = v,
                    None if policy == MissingPolicy::ForwardFill && t > 0 => {
                        values[idx] = values[idx - ne * nl];
                        filled += 1;
                    }
                    None => {
                        return Err(data_err(
                            0,
                            format!(
                                "ragged panel: no value for ({}, {entity}, {layer})",
                                date.format(DATE_FORMAT)
                            ),
                        ))
                    }
                }
            }
        }
    }
    if filled > 0 {
        log::warn!("{source}: forward-filled {filled} missing cells");
    } else {
        log::info!("{source}: panel complete, no cells filled");
    }
    PanelSeries::new(
        dates.iter().map(|d| d.format(DATE_FORMAT).to_string()).collect(),
        entities,
        layers,
        values,
    )
}

pub fn export_panel(panel: &PanelSeries, path: impl AsRef<Path>) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_panel(panel, &mut file)?;
    file.flush()?;
    Ok(())
}

/// Canonical long-format rendering: rows ordered by date, entity, layer.
pub fn write_panel(panel: &PanelSeries, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(HEADER).map_err(csv_err)?;
    let [nt, ne, nl] = panel.shape();
    for t in 0..nt {
        for e in 0..ne {
            for l in 0..nl {
                w.write_record([
                    panel.dates[t].as_str(),
                    panel.entities[e].as_str(),
                    panel.layers[l].as_str(),
                    &crate::export::fmt_f64(panel.value(t, e, l)),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
