//! Realized trajectories and their CSV formats.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};

/// A `T × d` trajectory; row `r` holds the state at time `start_index + r`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Mat,
    start_index: i64,
}

impl TimeSeries {
    pub fn new(values: Mat, start_index: i64) -> Result<Self> {
        if let Some(pos) = values.iter().position(|x| !x.is_finite()) {
            let (row, col) = (pos % values.nrows().max(1), pos / values.nrows().max(1));
            return Err(Error::invalid(format!(
                "non-finite value at row {row}, component {col}"
            )));
        }
        Ok(Self {
            values,
            start_index,
        })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            values: Mat::zeros(0, dim),
            start_index: 0,
        }
    }

    pub(crate) fn from_flat(flat: Vec<f64>, dim: usize, start_index: i64) -> Self {
        let t = flat.len().checked_div(dim).unwrap_or(0);
        Self {
            values: Mat::from_row_slice(t, dim, &flat),
            start_index,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>], start_index: i64) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("ragged series rows"));
        }
        Self::new(Mat::from_fn(rows.len(), dim, |i, j| rows[i][j]), start_index)
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn start_index(&self) -> i64 {
        self.start_index
    }

    /// One past the last time index.
    pub fn end_index(&self) -> i64 {
        self.start_index + self.len() as i64
    }

    pub fn values(&self) -> &Mat {
        &self.values
    }

    /// State at row `r` (not the absolute time index).
    pub fn row(&self, r: usize) -> Vector {
        self.values.row(r).transpose()
    }

    /// State at absolute time `t`.
    pub fn at(&self, t: i64) -> Option<Vector> {
        let r = t - self.start_index;
        (r >= 0 && (r as usize) < self.len()).then(|| self.row(r as usize))
    }

    /// Rows for absolute times in `[from, to)`.
    pub fn window(&self, from: i64, to: i64) -> Result<TimeSeries> {
        if from < self.start_index || to > self.end_index() || from > to {
            return Err(Error::domain(format!(
                "window [{from}, {to}) outside series range [{}, {})",
                self.start_index,
                self.end_index()
            )));
        }
        let r0 = (from - self.start_index) as usize;
        let n = (to - from) as usize;
        Ok(TimeSeries {
            values: self.values.rows(r0, n).into_owned(),
            start_index: from,
        })
    }

    /// Last `n` rows.
    pub fn tail(&self, n: usize) -> TimeSeries {
        let n = n.min(self.len());
        let from = self.end_index() - n as i64;
        self.window(from, self.end_index()).expect("tail within range")
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.column(j).iter().copied().collect()
    }

    pub fn to_csv_string(&self, names: &[String]) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, names)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    /// Writes `t,<name0>,…` with 17 significant digits per value.
    pub fn write_csv<W: Write>(&self, out: W, names: &[String]) -> Result<()> {
        let names = column_names(names, self.dim())?;
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend(names);
        w.write_record(&header)?;
        for r in 0..self.len() {
            let mut rec = vec![(self.start_index + r as i64).to_string()];
            rec.extend(self.values.row(r).iter().map(|&x| fmt_f64(x)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<(TimeSeries, Vec<String>)> {
        let mut rdr = csv::ReaderBuilder::new().from_reader(input);
        let header = rdr.headers()?.clone();
        if header.get(0) != Some("t") {
            return Err(Error::parse(1, "series CSV must start with column `t`"));
        }
        let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let dim = names.len();
        let mut flat = Vec::new();
        let mut start = None;
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 2;
            let rec = rec?;
            if rec.len() != dim + 1 {
                return Err(Error::parse(row, format!("expected {} fields, found {}", dim + 1, rec.len())));
            }
            let t: i64 = rec[0].trim().parse().map_err(|_| Error::parse(row, format!("bad time index {:?}", &rec[0])))?;
            match start {
                None => start = Some(t),
                Some(s) if t != s + i as i64 => {
                    return Err(Error::parse(row, format!("time index {t} breaks the contiguous sequence")));
                }
                _ => {}
            }
            for field in rec.iter().skip(1) {
                flat.push(parse_cell(field, row)?);
            }
        }
        Ok((TimeSeries::from_flat(flat, dim, start.unwrap_or(0)), names))
    }
}

/// Equal-length trajectories of several entities.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelSeries {
    dim: usize,
    entities: Vec<(String, TimeSeries)>,
}

impl PanelSeries {
    pub fn new(dim: usize, entities: Vec<(String, TimeSeries)>) -> Result<Self> {
        if let Some((_, first)) = entities.first() {
            for (id, s) in &entities {
                if s.dim() != dim {
                    return Err(Error::dim("panel entity dimension", dim, s.dim()));
                }
                if s.len() != first.len() {
                    return Err(Error::invalid(format!(
                        "entity {id} has length {}, expected {}",
                        s.len(),
                        first.len()
                    )));
                }
            }
        }
        Ok(Self { dim, entities })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entities(&self) -> &[(String, TimeSeries)] {
        &self.entities
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    /// Common per-entity series length.
    pub fn series_len(&self) -> usize {
        self.entities.first().map_or(0, |(_, s)| s.len())
    }

    pub fn series(&self) -> impl Iterator<Item = &TimeSeries> {
        self.entities.iter().map(|(_, s)| s)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>, names: &[String]) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f), names)
    }

    /// Writes `entity,t,<name0>,…`, one row per entity and time step.
    pub fn write_csv<W: Write>(&self, out: W, names: &[String]) -> Result<()> {
        let names = column_names(names, self.dim)?;
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let mut header = vec!["entity".to_string(), "t".to_string()];
        header.extend(names);
        w.write_record(&header)?;
        for (id, s) in &self.entities {
            for r in 0..s.len() {
                let mut rec = vec![id.clone(), (s.start_index() + r as i64).to_string()];
                rec.extend(s.values().row(r).iter().map(|&x| fmt_f64(x)));
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load_csv(path: impl AsRef<Path>, schema: &PanelSchema) -> Result<(PanelSeries, Vec<String>)> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(f), schema)
    }

    /// Parses a wide-format panel. Rows are grouped by entity (in order of
    /// first appearance) and sorted by `t`; every entity must cover a
    /// contiguous range of the same length.
    pub fn read_csv<R: Read>(input: R, schema: &PanelSchema) -> Result<(PanelSeries, Vec<String>)> {
        let mut rdr = csv::ReaderBuilder::new().from_reader(input);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let find = |name: &str| header.iter().position(|h| h == name);
        let entity_col = find("entity").ok_or_else(|| Error::parse(1, "missing column `entity`"))?;
        let t_col = find("t").ok_or_else(|| Error::parse(1, "missing column `t`"))?;
        let (names, cols): (Vec<String>, Vec<usize>) = match &schema.columns {
            Some(wanted) => {
                let mut cols = Vec::with_capacity(wanted.len());
                for name in wanted {
                    cols.push(find(name).ok_or_else(|| Error::parse(1, format!("missing column `{name}`")))?);
                }
                (wanted.clone(), cols)
            }
            None => header
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != entity_col && i != t_col)
                .map(|(i, h)| (h.clone(), i))
                .unzip(),
        };
        let dim = names.len();

        let mut order: Vec<String> = Vec::new();
        let mut rows: HashMap<String, Vec<(i64, usize, Vec<f64>)>> = HashMap::new();
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 2;
            let rec = rec?;
            if rec.len() != header.len() {
                return Err(Error::parse(row, format!("expected {} fields, found {}", header.len(), rec.len())));
            }
            let id = rec[entity_col].to_string();
            let t: i64 = rec[t_col]
                .trim()
                .parse()
                .map_err(|_| Error::parse(row, format!("bad time index {:?}", &rec[t_col])))?;
            let vals = cols.iter().map(|&c| parse_cell(&rec[c], row)).collect::<Result<Vec<_>>>()?;
            rows.entry(id.clone())
                .or_insert_with(|| {
                    order.push(id.clone());
                    Vec::new()
                })
                .push((t, row, vals));
        }

        let mut entities = Vec::with_capacity(order.len());
        let mut expected_len = None;
        for id in order {
            let mut recs = rows.remove(&id).expect("entity recorded");
            recs.sort_by_key(|r| r.0);
            for w in recs.windows(2) {
                if w[1].0 != w[0].0 + 1 {
                    return Err(Error::parse(
                        w[1].1,
                        format!("entity {id}: time gap or duplicate between t={} and t={}", w[0].0, w[1].0),
                    ));
                }
            }
            match expected_len {
                None => expected_len = Some(recs.len()),
                Some(n) if n != recs.len() => {
                    return Err(Error::parse(
                        recs[0].1,
                        format!("entity {id} has {} rows, expected {n}", recs.len()),
                    ));
                }
                _ => {}
            }
            let start = recs[0].0;
            let flat: Vec<f64> = recs.into_iter().flat_map(|r| r.2).collect();
            entities.push((id, TimeSeries::from_flat(flat, dim, start)));
        }
        Ok((PanelSeries { dim, entities }, names))
    }
}

/// Column selection for panel loading; `None` takes every column other than
/// `entity` and `t`, in file order.
#[derive(Debug, Clone, Default)]
pub struct PanelSchema {
    pub columns: Option<Vec<String>>,
}

/// Default component names `x0, x1, …`.
pub fn default_names(dim: usize) -> Vec<String> {
    (0..dim).map(|i| format!("x{i}")).collect()
}

fn column_names(names: &[String], dim: usize) -> Result<Vec<String>> {
    if names.is_empty() {
        Ok(default_names(dim))
    } else if names.len() == dim {
        Ok(names.to_vec())
    } else {
        Err(Error::dim("column names", dim, names.len()))
    }
}

/// Fixed 17-significant-digit formatting; parses back to the same bits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_cell(field: &str, row: usize) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| Error::parse(row, format!("non-numeric cell {field:?}")))?;
    if !v.is_finite() {
        return Err(Error::parse(row, format!("non-finite cell {field:?}")));
    }
    Ok(v)
}
