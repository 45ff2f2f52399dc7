//! Long-format longitudinal data, lagged design construction and temporal splits.
//!
//! A [`LongitudinalDataset`] holds `m` subjects, each observed on the same number
//! `T` of consecutive integer time points with `d` features and one outcome.
//! [`build_lagged`] turns it into a [`LaggedDesign`]: for every subject and every
//! time `t >= tau + 1` (1-based within the subject) an example matrix
//! `X_(i;t) = [x_t, x_{t-1}, ..., x_{t-tau}]` of shape `d' x (tau + 1)`.
//!
//! There is no implicit intercept. Add a constant feature column if one is
//! wanted; it is penalized like any other feature.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// One subject's complete series.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectSeries {
    pub id: String,
    /// Integer time index of the first column.
    pub start_time: i64,
    /// `d x T`, column `t` is the feature vector at `start_time + t`.
    pub features: Array2<f64>,
    /// Length `T`.
    pub outcomes: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LongitudinalDataset {
    subjects: Vec<SubjectSeries>,
    feature_names: Vec<String>,
    n_times: usize,
}

impl LongitudinalDataset {
    pub fn new(subjects: Vec<SubjectSeries>, feature_names: Vec<String>) -> Result<Self> {
        let d = feature_names.len();
        if d == 0 {
            return Err(Error::InvalidData("at least one feature is required".into()));
        }
        let first = subjects
            .first()
            .ok_or_else(|| Error::InvalidData("no subjects".into()))?;
        let n_times = first.outcomes.len();
        if n_times < 2 {
            return Err(Error::InvalidData("at least two time points are required".into()));
        }
        let mut seen = HashSet::new();
        for s in &subjects {
            if !seen.insert(s.id.as_str()) {
                return Err(Error::InvalidData(format!("duplicate subject id {}", s.id)));
            }
            if s.outcomes.len() != n_times || s.features.ncols() != s.outcomes.len() {
                return Err(Error::UnequalSeriesLength {
                    subject: s.id.clone(),
                    found: s.outcomes.len().min(s.features.ncols()),
                    expected: n_times,
                });
            }
            if s.features.nrows() != d {
                return Err(Error::ShapeMismatch(format!(
                    "subject {} has {} feature rows, expected {d}",
                    s.id,
                    s.features.nrows()
                )));
            }
            for (t, y) in s.outcomes.iter().enumerate() {
                if !y.is_finite() {
                    return Err(missing(s, t, "y"));
                }
            }
            for ((r, t), x) in s.features.indexed_iter() {
                if !x.is_finite() {
                    return Err(missing(s, t, &feature_names[r]));
                }
            }
        }
        Ok(Self {
            subjects,
            feature_names,
            n_times,
        })
    }

    pub fn subjects(&self) -> &[SubjectSeries] {
        &self.subjects
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_subjects(&self) -> usize {
        self.subjects.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    /// Subset of subjects by position, keeping the given order.
    pub fn select_subjects(&self, indices: &[usize]) -> Result<Self> {
        let subjects = indices
            .iter()
            .map(|&i| {
                self.subjects
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::InvalidData(format!("subject index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(subjects, self.feature_names.clone())
    }

    /// Keep `len` consecutive time points starting at column `offset`.
    fn time_window(&self, offset: usize, len: usize) -> Result<Self> {
        let subjects = self
            .subjects
            .iter()
            .map(|s| SubjectSeries {
                id: s.id.clone(),
                start_time: s.start_time + offset as i64,
                features: s.features.slice(s![.., offset..offset + len]).to_owned(),
                outcomes: s.outcomes.slice(s![offset..offset + len]).to_owned(),
            })
            .collect();
        Self::new(subjects, self.feature_names.clone())
    }

    /// Write in the long CSV format accepted by [`load_csv`].
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["subject_id".to_string(), "time".into(), "y".into()];
        header.extend(self.feature_names.iter().cloned());
        w.write_record(&header)?;
        for s in &self.subjects {
            for t in 0..self.n_times {
                let mut rec = vec![
                    s.id.clone(),
                    (s.start_time + t as i64).to_string(),
                    s.outcomes[t].to_string(),
                ];
                rec.extend(s.features.column(t).iter().map(|x| x.to_string()));
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn missing(s: &SubjectSeries, t: usize, column: &str) -> Error {
    Error::MissingValue {
        subject: s.id.clone(),
        time: s.start_time + t as i64,
        column: column.to_string(),
    }
}

/// Which CSV columns hold the subject id, time index and outcome. Every other
/// column is a feature, in header order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub subject: String,
    pub time: String,
    pub outcome: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            subject: "subject_id".into(),
            time: "time".into(),
            outcome: "y".into(),
        }
    }
}

/// Orders subject ids numerically when every id is an integer, otherwise lexicographically.
fn sort_ids(ids: &mut [String]) {
    if ids.iter().all(|id| id.trim().parse::<i64>().is_ok()) {
        ids.sort_by_key(|id| id.trim().parse::<i64>().unwrap());
    } else {
        ids.sort();
    }
}

/// Parse long-format rows `subject_id,time,y,x1..xd`. Row order is irrelevant:
/// subjects come out sorted by id and times ascending.
pub fn load_csv<R: Read>(source: R, schema: &CsvSchema) -> Result<LongitudinalDataset> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let header = reader.headers()?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidData(format!("missing column '{name}'")))
    };
    let (sc, tc, yc) = (col(&schema.subject)?, col(&schema.time)?, col(&schema.outcome)?);
    let feature_cols: Vec<usize> = (0..header.len()).filter(|c| ![sc, tc, yc].contains(c)).collect();
    let feature_names: Vec<String> = feature_cols.iter().map(|&c| header[c].to_string()).collect();

    // subject -> time -> (y, features)
    let mut rows: BTreeMap<String, BTreeMap<i64, (f64, Vec<f64>)>> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let subject = record.get(sc).unwrap_or("").to_string();
        let time_raw = record.get(tc).unwrap_or("");
        let time: i64 = time_raw
            .parse()
            .map_err(|_| Error::InvalidData(format!("bad time '{time_raw}' for subject {subject}")))?;
        let cell = |c: usize, name: &str| -> Result<f64> {
            let raw = record.get(c).unwrap_or("");
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::MissingValue {
                    subject: subject.clone(),
                    time,
                    column: name.to_string(),
                }),
            }
        };
        let y = cell(yc, &schema.outcome)?;
        let x = feature_cols
            .iter()
            .zip(&feature_names)
            .map(|(&c, name)| cell(c, name))
            .collect::<Result<Vec<_>>>()?;
        if rows.entry(subject.clone()).or_default().insert(time, (y, x)).is_some() {
            return Err(Error::DuplicateObservation { subject, time });
        }
    }

    let mut ids: Vec<String> = rows.keys().cloned().collect();
    sort_ids(&mut ids);
    let expected = ids.first().map(|id| rows[id].len()).unwrap_or(0);
    let d = feature_names.len();
    let mut subjects = Vec::with_capacity(ids.len());
    for id in ids {
        let series = &rows[&id];
        if series.len() != expected {
            return Err(Error::UnequalSeriesLength {
                subject: id,
                found: series.len(),
                expected,
            });
        }
        let start_time = *series.keys().next().unwrap();
        let mut features = Array2::zeros((d, expected));
        let mut outcomes = Array1::zeros(expected);
        for (t, (&time, (y, x))) in series.iter().enumerate() {
            if time != start_time + t as i64 {
                return Err(Error::NonConsecutiveTimes { subject: id });
            }
            outcomes[t] = *y;
            features.column_mut(t).assign(&ArrayView1::from(x.as_slice()));
        }
        subjects.push(SubjectSeries {
            id,
            start_time,
            features,
            outcomes,
        });
    }
    LongitudinalDataset::new(subjects, feature_names)
}

/// Stacked lagged examples for all subjects.
///
/// Each example matrix is stored vectorized column-major (lag-major), so
/// row `k` of [`LaggedDesign::rows`] is `vect(X_(i;t))` and the linear predictor
/// is `rows . vect(W)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaggedDesign {
    tau: usize,
    n_features: usize,
    n_examples: usize,
    include_lagged_outcome: bool,
    subject_ids: Vec<String>,
    rows: Array2<f64>,
    outcomes: Array1<f64>,
    times: Vec<i64>,
}

impl LaggedDesign {
    /// Build directly from a stacked matrix; mostly useful for tests and
    /// hand-made problems. `rows` is `(m * n) x (n_features * (tau + 1))`.
    pub fn from_rows(
        rows: Array2<f64>,
        outcomes: Array1<f64>,
        n_features: usize,
        tau: usize,
        n_examples: usize,
    ) -> Result<Self> {
        let total = rows.nrows();
        if n_examples == 0 || !total.is_multiple_of(n_examples) || total == 0 {
            return Err(Error::ShapeMismatch(format!(
                "{total} rows cannot be split into subjects of {n_examples} examples"
            )));
        }
        if rows.ncols() != n_features * (tau + 1) || outcomes.len() != total {
            return Err(Error::ShapeMismatch("design rows/outcomes disagree".into()));
        }
        let m = total / n_examples;
        Ok(Self {
            tau,
            n_features,
            n_examples,
            include_lagged_outcome: false,
            subject_ids: (0..m).map(|i| i.to_string()).collect(),
            rows,
            outcomes,
            times: (0..m).flat_map(|_| (0..n_examples as i64).map(move |k| k + tau as i64 + 1)).collect(),
        })
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    /// Effective feature count `d'` (`d + 1` with lagged outcomes).
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Examples per subject, `n = T - tau`.
    pub fn n_examples(&self) -> usize {
        self.n_examples
    }

    pub fn n_subjects(&self) -> usize {
        self.subject_ids.len()
    }

    /// Total examples `N = m * n`.
    pub fn n_total(&self) -> usize {
        self.rows.nrows()
    }

    /// Parameters in `W`, `d' * (tau + 1)`.
    pub fn n_params(&self) -> usize {
        self.rows.ncols()
    }

    pub fn include_lagged_outcome(&self) -> bool {
        self.include_lagged_outcome
    }

    pub fn subject_ids(&self) -> &[String] {
        &self.subject_ids
    }

    pub fn rows(&self) -> ArrayView2<'_, f64> {
        self.rows.view()
    }

    pub fn outcomes(&self) -> ArrayView1<'_, f64> {
        self.outcomes.view()
    }

    /// Current-time index of every stacked example.
    pub fn times(&self) -> &[i64] {
        &self.times
    }

    pub fn subject_rows(&self, i: usize) -> ArrayView2<'_, f64> {
        let n = self.n_examples;
        self.rows.slice(s![i * n..(i + 1) * n, ..])
    }

    pub fn subject_outcomes(&self, i: usize) -> ArrayView1<'_, f64> {
        let n = self.n_examples;
        self.outcomes.slice(s![i * n..(i + 1) * n])
    }

    /// The `d' x (tau + 1)` example matrix of subject `i`, example `k`.
    pub fn example(&self, i: usize, k: usize) -> Array2<f64> {
        let row = self.rows.row(i * self.n_examples + k);
        let mut x = Array2::zeros((self.n_features, self.tau + 1));
        for j in 0..=self.tau {
            x.column_mut(j)
                .assign(&row.slice(s![j * self.n_features..(j + 1) * self.n_features]));
        }
        x
    }

    /// Linear predictors `tr(X^T W)` for all examples.
    pub fn linear_predictor(&self, w: &Array2<f64>) -> Result<Array1<f64>> {
        if w.dim() != (self.n_features, self.tau + 1) {
            return Err(Error::ShapeMismatch(format!(
                "coefficients are {:?}, design expects ({}, {})",
                w.dim(),
                self.n_features,
                self.tau + 1
            )));
        }
        Ok(self.rows.dot(&vectorize(w)))
    }
}

/// Column-major vectorization.
pub fn vectorize(m: &Array2<f64>) -> Array1<f64> {
    m.t().iter().copied().collect()
}

/// Inverse of [`vectorize`].
pub fn unvectorize(v: ArrayView1<f64>, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |(r, c)| v[c * rows + r])
}

/// Form lagged examples. With `include_lagged_outcome` an extra feature row
/// holds `y_{t-j}` in lag column `j >= 1` and zero in column 0.
pub fn build_lagged(ds: &LongitudinalDataset, tau: usize, include_lagged_outcome: bool) -> Result<LaggedDesign> {
    let big_t = ds.n_times();
    if tau >= big_t {
        return Err(Error::LagExhaustsSeries { tau, times: big_t });
    }
    let d = ds.n_features();
    let d_eff = d + usize::from(include_lagged_outcome);
    let n = big_t - tau;
    let m = ds.n_subjects();
    let mut rows = Array2::zeros((m * n, d_eff * (tau + 1)));
    let mut outcomes = Array1::zeros(m * n);
    let mut times = Vec::with_capacity(m * n);
    for (i, s) in ds.subjects().iter().enumerate() {
        for k in 0..n {
            let t = tau + k;
            let mut row = rows.row_mut(i * n + k);
            for j in 0..=tau {
                row.slice_mut(s![j * d_eff..j * d_eff + d])
                    .assign(&s.features.column(t - j));
                if include_lagged_outcome && j > 0 {
                    row[j * d_eff + d] = s.outcomes[t - j];
                }
            }
            outcomes[i * n + k] = s.outcomes[t];
            times.push(s.start_time + t as i64);
        }
    }
    Ok(LaggedDesign {
        tau,
        n_features: d_eff,
        n_examples: n,
        include_lagged_outcome,
        subject_ids: ds.subjects().iter().map(|s| s.id.clone()).collect(),
        rows,
        outcomes,
        times,
    })
}

/// Split off the trailing `holdout` time points. The test part carries the
/// `tau` preceding points so that its lagged examples are exactly those whose
/// current time falls in the holdout window.
pub fn split_temporal(
    ds: &LongitudinalDataset,
    holdout: usize,
    tau: usize,
) -> Result<(LongitudinalDataset, LongitudinalDataset)> {
    let big_t = ds.n_times();
    let limit = big_t.saturating_sub(tau);
    if holdout == 0 || holdout >= limit {
        return Err(Error::HoldoutOutOfRange { holdout, limit });
    }
    let train = ds.time_window(0, big_t - holdout)?;
    let test = ds.time_window(big_t - holdout - tau, holdout + tau)?;
    Ok((train, test))
}
