//! Observation matrices, preprocessing and changepoint bookkeeping.
//!
//! Time is indexed by row `0..n`. A changepoint `k` ends a segment after row
//! `k - 1`, so `k` equals the number of rows strictly before the change and
//! matches the conventional one-based "last index of the segment".

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `n x p` series stored row-major; row `i` is the observation at time `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesMatrix {
    n: usize,
    p: usize,
    values: Vec<f64>,
    column_names: Option<Vec<String>>,
}

impl SeriesMatrix {
    pub fn new(n: usize, p: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::InvalidInput("series matrix is empty".into()));
        }
        if values.len() != n * p {
            return Err(Error::InvalidInput(format!(
                "expected {} values for a {n}x{p} matrix, got {}",
                n * p,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite entry at row {}, column {}",
                pos / p,
                pos % p
            )));
        }
        Ok(SeriesMatrix {
            n,
            p,
            values,
            column_names: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidInput("rows have differing lengths".into()));
        }
        SeriesMatrix::new(rows.len(), p, rows.concat())
    }

    pub fn with_column_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p {
            return Err(Error::InvalidInput(format!(
                "{} column names for {} columns",
                names.len(),
                self.p
            )));
        }
        self.column_names = Some(names);
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_cols(&self) -> usize {
        self.p
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.column_names.as_deref()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    #[inline]
    pub fn get(&self, i: usize, d: usize) -> f64 {
        self.values[i * self.p + d]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn column(&self, d: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.get(i, d))
    }

    pub fn rows(&self) -> impl DoubleEndedIterator<Item = &[f64]> + ExactSizeIterator {
        self.values.chunks_exact(self.p)
    }

    /// Elementwise scaling, mostly useful in tests.
    pub fn scaled(&self, factor: f64) -> SeriesMatrix {
        SeriesMatrix {
            values: self.values.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }
}

/// Result of [`standardize`]: the transformed matrix and the columns that were
/// constant (centered but left unscaled).
#[derive(Debug, Clone)]
pub struct Standardized {
    pub matrix: SeriesMatrix,
    pub constant_columns: Vec<usize>,
}

/// Centers every column and scales it to unit sample standard deviation
/// (divisor `n - 1`).
pub fn standardize(x: &SeriesMatrix) -> Result<Standardized> {
    let (n, p) = (x.n, x.p);
    if n < 2 {
        return Err(Error::InvalidInput(
            "standardization needs at least two rows".into(),
        ));
    }
    let mut values = x.values.clone();
    let mut constant_columns = Vec::new();
    for d in 0..p {
        let mean = x.column(d).sum::<f64>() / n as f64;
        let ss: f64 = x.column(d).map(|v| (v - mean).powi(2)).sum();
        let sd = (ss / (n - 1) as f64).sqrt();
        let scale = if sd > 1e-12 * (1.0 + mean.abs()) {
            sd
        } else {
            constant_columns.push(d);
            1.0
        };
        for i in 0..n {
            let v = &mut values[i * p + d];
            *v = (*v - mean) / scale;
        }
        if constant_columns.last() == Some(&d) {
            for i in 0..n {
                values[i * p + d] = 0.0;
            }
        }
    }
    Ok(Standardized {
        matrix: SeriesMatrix {
            n,
            p,
            values,
            column_names: x.column_names.clone(),
        },
        constant_columns,
    })
}

/// Width of the degree-2 polynomial embedding of a `p`-dimensional input.
pub fn poly2_width(p: usize) -> usize {
    2 * p + p * p.saturating_sub(1) / 2
}

/// Degree-2 polynomial feature map: the raw coordinates, then their squares,
/// then every cross product `x_a x_b` with `a < b` in lexicographic order.
pub fn poly2_embed(x: &SeriesMatrix) -> Result<SeriesMatrix> {
    let p = x.p;
    let width = poly2_width(p);
    let mut values = Vec::with_capacity(x.n * width);
    for row in x.rows() {
        values.extend_from_slice(row);
        values.extend(row.iter().map(|v| v * v));
        for a in 0..p {
            for b in a + 1..p {
                values.push(row[a] * row[b]);
            }
        }
    }
    let out = SeriesMatrix::new(x.n, width, values)?;
    let base: Vec<String> = match &x.column_names {
        Some(names) => names.clone(),
        None => (1..=p).map(|d| format!("x{d}")).collect(),
    };
    let mut names = base.clone();
    names.extend(base.iter().map(|b| format!("{b}^2")));
    for a in 0..p {
        for b in a + 1..p {
            names.push(format!("{}*{}", base[a], base[b]));
        }
    }
    out.with_column_names(names)
}

/// Where standardization sits relative to the quadratic embedding.
///
/// `AfterEmbedding` centers every embedded column, so the model sees no
/// constant offset. `BeforeEmbedding` centers and scales the raw coordinates
/// and leaves the squares uncentered; their means then act much like
/// per-class intercepts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleOrder {
    #[default]
    AfterEmbedding,
    BeforeEmbedding,
}

impl ScaleOrder {
    pub fn name(self) -> &'static str {
        match self {
            ScaleOrder::AfterEmbedding => "after-embedding",
            ScaleOrder::BeforeEmbedding => "before-embedding",
        }
    }
}

impl std::str::FromStr for ScaleOrder {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "after-embedding" | "after" => Ok(ScaleOrder::AfterEmbedding),
            "before-embedding" | "before" => Ok(ScaleOrder::BeforeEmbedding),
            other => Err(Error::InvalidParameter(format!(
                "unknown scale order '{other}' (after-embedding, before-embedding)"
            ))),
        }
    }
}

/// Optional embedding and optional standardization in the given order.
/// Constant columns found by the standardization are returned alongside; with
/// `BeforeEmbedding` they index the raw coordinates.
pub fn preprocess(x: &SeriesMatrix, embed: bool, scale: bool, order: ScaleOrder) -> Result<Standardized> {
    let unchanged = |matrix: SeriesMatrix| Standardized { matrix, constant_columns: Vec::new() };
    match (embed, scale, order) {
        (false, false, _) => Ok(unchanged(x.clone())),
        (true, false, _) => Ok(unchanged(poly2_embed(x)?)),
        (false, true, _) => standardize(x),
        (true, true, ScaleOrder::AfterEmbedding) => standardize(&poly2_embed(x)?),
        (true, true, ScaleOrder::BeforeEmbedding) => {
            let s = standardize(x)?;
            Ok(Standardized { matrix: poly2_embed(&s.matrix)?, constant_columns: s.constant_columns })
        }
    }
}

/// Ordered changepoints `k_1 < ... < k_L` for a series of length `n`, every
/// segment (including the first and last) at least `min_seg` long.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ChangepointVector {
    kappas: Vec<usize>,
    n: usize,
    min_seg: usize,
}

impl ChangepointVector {
    pub fn new(kappas: Vec<usize>, n: usize, min_seg: usize) -> Result<Self> {
        if min_seg == 0 {
            return Err(Error::InvalidParameter("minimum segment length must be >= 1".into()));
        }
        let mut prev = 0;
        for (l, &k) in kappas.iter().chain(std::iter::once(&n)).enumerate() {
            if k < prev + min_seg {
                return Err(Error::InvalidInput(format!(
                    "segment {} has length {} (< minimum {min_seg}) for changepoints {kappas:?}, n = {n}",
                    l + 1,
                    k as isize - prev as isize
                )));
            }
            prev = k;
        }
        Ok(ChangepointVector { kappas, n, min_seg })
    }

    /// Evenly spaced changepoints `round(l n / (L + 1))`, projected onto the
    /// feasible set.
    pub fn even(n: usize, n_changepoints: usize, min_seg: usize) -> Result<Self> {
        let j = n_changepoints + 1;
        let raw = (1..j)
            .map(|l| ((l * n) as f64 / j as f64).round() as usize)
            .collect();
        ChangepointVector::project(raw, n, min_seg)
    }

    /// Sorts the given locations and moves them the minimum distance needed to
    /// satisfy the segment-length constraint.
    pub fn project(mut kappas: Vec<usize>, n: usize, min_seg: usize) -> Result<Self> {
        let l = kappas.len();
        if min_seg == 0 {
            return Err(Error::InvalidParameter("minimum segment length must be >= 1".into()));
        }
        if n < (l + 1) * min_seg {
            return Err(Error::Infeasible(format!(
                "{l} changepoints with minimum segment length {min_seg} need n >= {}, got n = {n}",
                (l + 1) * min_seg
            )));
        }
        kappas.sort_unstable();
        let mut prev = 0;
        for k in kappas.iter_mut() {
            *k = (*k).max(prev + min_seg);
            prev = *k;
        }
        let mut next = n;
        for k in kappas.iter_mut().rev() {
            *k = (*k).min(next - min_seg);
            next = *k;
        }
        ChangepointVector::new(kappas, n, min_seg)
    }

    pub fn kappas(&self) -> &[usize] {
        &self.kappas
    }

    pub fn len(&self) -> usize {
        self.kappas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappas.is_empty()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn min_seg(&self) -> usize {
        self.min_seg
    }

    pub fn n_segments(&self) -> usize {
        self.kappas.len() + 1
    }

    /// Segment boundaries with sentinels: `[0, k_1, ..., k_L, n]`.
    pub fn boundaries(&self) -> Vec<usize> {
        let mut b = Vec::with_capacity(self.kappas.len() + 2);
        b.push(0);
        b.extend_from_slice(&self.kappas);
        b.push(self.n);
        b
    }

    /// Row range `start..end` of segment `j` (zero-based).
    pub fn segment(&self, j: usize) -> std::ops::Range<usize> {
        let start = if j == 0 { 0 } else { self.kappas[j - 1] };
        let end = self.kappas.get(j).copied().unwrap_or(self.n);
        start..end
    }

    pub fn segment_lengths(&self) -> Vec<usize> {
        self.boundaries().windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub(crate) fn set(&mut self, l: usize, value: usize) {
        self.kappas[l] = value;
    }

    pub fn labels(&self) -> SegmentLabels {
        labels_from_kappa(self)
    }
}

/// Segment membership of every row: `class[i] = j` iff row `i` lies in segment `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentLabels {
    n_classes: usize,
    class: Vec<usize>,
}

impl SegmentLabels {
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn classes(&self) -> &[usize] {
        &self.class
    }

    pub fn class_of(&self, i: usize) -> usize {
        self.class[i]
    }

    /// Indicator `y_ij`.
    pub fn y(&self, i: usize, j: usize) -> bool {
        self.class[i] == j
    }

    /// The full `n x J` indicator matrix.
    pub fn indicator_matrix(&self) -> Vec<Vec<u8>> {
        self.class
            .iter()
            .map(|&c| (0..self.n_classes).map(|j| u8::from(c == j)).collect())
            .collect()
    }

    /// Recovers the changepoints: positions where the class index increases.
    pub fn changepoints(&self) -> Vec<usize> {
        (1..self.class.len())
            .filter(|&i| self.class[i] != self.class[i - 1])
            .collect()
    }
}

pub fn labels_from_kappa(kappa: &ChangepointVector) -> SegmentLabels {
    SegmentLabels {
        n_classes: kappa.n_segments(),
        class: labels_for(kappa.kappas(), kappa.n()),
    }
}

/// Class labels for arbitrary sorted locations (no segment-length check).
pub fn labels_for(kappas: &[usize], n: usize) -> Vec<usize> {
    let mut class = Vec::with_capacity(n);
    let mut j = 0;
    for i in 0..n {
        while j < kappas.len() && kappas[j] <= i {
            j += 1;
        }
        class.push(j);
    }
    class
}

/// Reads a numeric CSV: rows are time points, columns are dimensions. A
/// header row is detected when its first field does not parse as a number.
pub fn read_csv_from<R: Read>(reader: R) -> Result<SeriesMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut header: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if line == 0 && rec.get(0).map(|f| f.parse::<f64>().is_err()).unwrap_or(false) {
            header = Some(rec.iter().map(str::to_owned).collect());
            continue;
        }
        let row = rec
            .iter()
            .enumerate()
            .map(|(c, f)| {
                f.parse::<f64>()
                    .map_err(|_| Error::Format(format!("line {}, column {}: `{f}` is not a number", line + 1, c + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput("CSV contains no data rows".into()));
    }
    let x = SeriesMatrix::from_rows(&rows)?;
    match header {
        Some(h) => x.with_column_names(h),
        None => Ok(x),
    }
}

pub fn read_csv(path: &Path) -> Result<SeriesMatrix> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv_from(std::io::BufReader::new(file))
}

pub fn write_csv_to<W: Write>(x: &SeriesMatrix, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let header: Vec<String> = match &x.column_names {
        Some(names) => names.clone(),
        None => (1..=x.p).map(|d| format!("x{d}")).collect(),
    };
    w.write_record(&header).map_err(|e| Error::Format(e.to_string()))?;
    for row in x.rows() {
        w.write_record(row.iter().map(|v| format!("{v:?}")))
            .map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))?;
    Ok(())
}

pub fn write_csv(x: &SeriesMatrix, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(x, std::io::BufWriter::new(file))
}
