//! Dataset ingestion and preparation: schemas, CSV wire format, split
//! management, fitted (non-learned) statistics, and synthetic generators for
//! the test harness.
//!
//! Wire format: UTF-8 CSV with a header row, `.` decimal separator, temporal
//! lookback windows serialized as `;`-joined values inside one cell. The
//! schema travels separately as JSON: `{columns: [{name, kind, lookback?}],
//! target, task}`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::rng::Rng;

// ── Schema ──────────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnKind {
    Numerical,
    Categorical,
    /// Carries a lookback window of this length at every sample.
    Temporal { lookback: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskKind {
    Classification,
    Regression,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<ColumnSpec>,
    pub target: String,
    pub task: TaskKind,
}

/// JSON form of the schema file.
#[derive(Serialize, Deserialize)]
struct SchemaFile {
    columns: Vec<SchemaFileColumn>,
    target: String,
    task: String,
}

#[derive(Serialize, Deserialize)]
struct SchemaFileColumn {
    name: String,
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    lookback: Option<usize>,
}

impl Schema {
    pub fn new(columns: Vec<ColumnSpec>, target: impl Into<String>, task: TaskKind) -> Result<Self> {
        let schema = Schema { columns, target: target.into(), task };
        schema.validate()?;
        Ok(schema)
    }

    fn validate(&self) -> Result<()> {
        let mut seen = HashMap::new();
        for col in &self.columns {
            if seen.insert(col.name.clone(), ()).is_some() {
                return Err(Error::Schema(format!("duplicate column name '{}'", col.name)));
            }
            if col.name == self.target {
                return Err(Error::Schema(format!(
                    "target '{}' also listed as a feature column",
                    self.target
                )));
            }
            if let ColumnKind::Temporal { lookback } = col.kind {
                if lookback < 2 {
                    return Err(Error::Schema(format!(
                        "temporal column '{}' needs lookback >= 2, got {lookback}",
                        col.name
                    )));
                }
            }
        }
        if self.columns.is_empty() {
            return Err(Error::Schema("schema has no feature columns".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SchemaFile =
            serde_json::from_str(text).map_err(|e| Error::Schema(format!("bad schema JSON: {e}")))?;
        let mut columns = Vec::with_capacity(file.columns.len());
        for c in file.columns {
            let kind = match c.kind.as_str() {
                "numerical" => ColumnKind::Numerical,
                "categorical" => ColumnKind::Categorical,
                "temporal" => ColumnKind::Temporal {
                    lookback: c.lookback.ok_or_else(|| {
                        Error::Schema(format!("temporal column '{}' missing lookback", c.name))
                    })?,
                },
                other => {
                    return Err(Error::Schema(format!(
                        "column '{}': unknown kind '{other}'",
                        c.name
                    )))
                }
            };
            columns.push(ColumnSpec { name: c.name, kind });
        }
        let task = match file.task.as_str() {
            "classification" => TaskKind::Classification,
            "regression" => TaskKind::Regression,
            other => return Err(Error::Schema(format!("unknown task '{other}'"))),
        };
        Schema::new(columns, file.target, task)
    }

    pub fn to_json(&self) -> String {
        let file = SchemaFile {
            columns: self
                .columns
                .iter()
                .map(|c| match c.kind {
                    ColumnKind::Numerical => SchemaFileColumn {
                        name: c.name.clone(),
                        kind: "numerical".into(),
                        lookback: None,
                    },
                    ColumnKind::Categorical => SchemaFileColumn {
                        name: c.name.clone(),
                        kind: "categorical".into(),
                        lookback: None,
                    },
                    ColumnKind::Temporal { lookback } => SchemaFileColumn {
                        name: c.name.clone(),
                        kind: "temporal".into(),
                        lookback: Some(lookback),
                    },
                })
                .collect(),
            target: self.target.clone(),
            task: match self.task {
                TaskKind::Classification => "classification".into(),
                TaskKind::Regression => "regression".into(),
            },
        };
        serde_json::to_string_pretty(&file).expect("schema serializes")
    }

    /// FNV-1a over the canonical JSON; checkpoints refuse to load across
    /// schema changes.
    pub fn digest(&self) -> u64 {
        let mut hash: u64 = 0xcbf29ce484222325;
        for byte in self.to_json().bytes() {
            hash ^= byte as u64;
            hash = hash.wrapping_mul(0x100000001b3);
        }
        hash
    }

    pub fn numeric_names(&self) -> Vec<&str> {
        self.columns
            .iter()
            .filter(|c| c.kind == ColumnKind::Numerical)
            .map(|c| c.name.as_str())
            .collect()
    }
}

// ── Dataset ─────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Split {
    Train,
    Validation,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Labels {
    /// Dense class codes in [0, classes).
    Classes { values: Vec<usize>, classes: usize },
    Values(Vec<f64>),
}

impl Labels {
    pub fn len(&self) -> usize {
        match self {
            Labels::Classes { values, .. } => values.len(),
            Labels::Values(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Fully parsed dataset: sample-major numeric block, categorical code block,
/// one window block per temporal feature, labels, and a split tag per row.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub schema: Schema,
    /// Row-major (n, numeric column count).
    numeric: Vec<f64>,
    /// Row-major (n, categorical column count).
    cat_codes: Vec<usize>,
    /// Level names per categorical column, in code order.
    pub code_tables: Vec<Vec<String>>,
    /// Row-major (n, lookback) per temporal feature.
    windows: Vec<Vec<f64>>,
    pub labels: Labels,
    splits: Vec<Split>,
    /// Indices into `schema.columns` by kind.
    numeric_cols: Vec<usize>,
    cat_cols: Vec<usize>,
    temporal_cols: Vec<usize>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.splits.len()
    }

    pub fn numeric_width(&self) -> usize {
        self.numeric_cols.len()
    }

    pub fn categorical_width(&self) -> usize {
        self.cat_cols.len()
    }

    pub fn temporal_width(&self) -> usize {
        self.temporal_cols.len()
    }

    pub fn numeric_name(&self, j: usize) -> &str {
        &self.schema.columns[self.numeric_cols[j]].name
    }

    pub fn categorical_name(&self, j: usize) -> &str {
        &self.schema.columns[self.cat_cols[j]].name
    }

    pub fn temporal_name(&self, j: usize) -> &str {
        &self.schema.columns[self.temporal_cols[j]].name
    }

    pub fn lookback(&self, j: usize) -> usize {
        match self.schema.columns[self.temporal_cols[j]].kind {
            ColumnKind::Temporal { lookback } => lookback,
            _ => unreachable!("temporal_cols indexes temporal columns"),
        }
    }

    pub fn split_of(&self, row: usize) -> Split {
        self.splits[row]
    }

    pub fn rows_in(&self, split: Split) -> Vec<usize> {
        (0..self.n()).filter(|&r| self.splits[r] == split).collect()
    }

    pub fn all_rows(&self) -> Vec<usize> {
        (0..self.n()).collect()
    }

    pub fn numeric_at(&self, row: usize, col: usize) -> f64 {
        self.numeric[row * self.numeric_cols.len() + col]
    }

    pub fn numeric_at_mut(&mut self, row: usize, col: usize) -> &mut f64 {
        let w = self.numeric_cols.len();
        &mut self.numeric[row * w + col]
    }

    pub fn cat_code_at(&self, row: usize, col: usize) -> usize {
        self.cat_codes[row * self.cat_cols.len() + col]
    }

    pub fn window_at(&self, feature: usize, row: usize) -> &[f64] {
        let l = self.lookback(feature);
        &self.windows[feature][row * l..(row + 1) * l]
    }

    pub fn window_at_mut(&mut self, feature: usize, row: usize) -> &mut [f64] {
        let l = self.lookback(feature);
        &mut self.windows[feature][row * l..(row + 1) * l]
    }

    /// Numeric feature block for the given rows as a (rows, width) tensor.
    pub fn numeric_matrix(&self, rows: &[usize]) -> Tensor {
        let w = self.numeric_cols.len();
        let mut data = Vec::with_capacity(rows.len() * w);
        for &r in rows {
            data.extend_from_slice(&self.numeric[r * w..(r + 1) * w]);
        }
        Tensor::matrix(rows.len(), w, data).expect("consistent block")
    }

    /// Window block for one temporal feature as a (rows, lookback) tensor.
    pub fn window_matrix(&self, feature: usize, rows: &[usize]) -> Tensor {
        let l = self.lookback(feature);
        let mut data = Vec::with_capacity(rows.len() * l);
        for &r in rows {
            data.extend_from_slice(&self.windows[feature][r * l..(r + 1) * l]);
        }
        Tensor::matrix(rows.len(), l, data).expect("consistent block")
    }

    pub fn cat_codes_column(&self, col: usize, rows: &[usize]) -> Vec<usize> {
        rows.iter().map(|&r| self.cat_code_at(r, col)).collect()
    }

    pub fn labels_for(&self, rows: &[usize]) -> Labels {
        match &self.labels {
            Labels::Classes { values, classes } => Labels::Classes {
                values: rows.iter().map(|&r| values[r]).collect(),
                classes: *classes,
            },
            Labels::Values(v) => Labels::Values(rows.iter().map(|&r| v[r]).collect()),
        }
    }

    pub fn classes(&self) -> usize {
        match &self.labels {
            Labels::Classes { classes, .. } => *classes,
            Labels::Values(_) => 1,
        }
    }

    /// Deterministic seeded split, stratified by class for classification.
    /// Fractions must sum to 1; validation and test may be zero.
    pub fn split(&mut self, fractions: (f64, f64, f64), seed: u64) -> Result<()> {
        let (ft, fv, fe) = fractions;
        if ft <= 0.0 || fv < 0.0 || fe < 0.0 || (ft + fv + fe - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(
                "split",
                format!("fractions ({ft}, {fv}, {fe}) must be nonnegative with train > 0 and sum 1"),
            ));
        }
        let mut rng = Rng::new(seed);

        let groups: Vec<Vec<usize>> = match &self.labels {
            Labels::Classes { values, classes } => {
                let mut per_class = vec![Vec::new(); *classes];
                for (row, &c) in values.iter().enumerate() {
                    per_class[c].push(row);
                }
                per_class
            }
            Labels::Values(_) => vec![self.all_rows()],
        };

        for group in groups {
            if group.is_empty() {
                continue;
            }
            let mut rows = group;
            rng.shuffle(&mut rows);
            let n = rows.len();
            let n_train = ((n as f64) * ft).round() as usize;
            let n_val = ((n as f64) * fv).round() as usize;
            let n_train = n_train.min(n);
            let n_val = n_val.min(n - n_train);
            if n_train == 0 {
                return Err(Error::invalid(
                    "split",
                    "a class would be absent from the train split",
                ));
            }
            for (i, &row) in rows.iter().enumerate() {
                self.splits[row] = if i < n_train {
                    Split::Train
                } else if i < n_train + n_val {
                    Split::Validation
                } else {
                    Split::Test
                };
            }
        }
        Ok(())
    }

    /// Serialize back to the CSV wire format. Floats use the shortest
    /// round-trip representation, so reloading reproduces values exactly.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let names: Vec<&str> = self
            .schema
            .columns
            .iter()
            .map(|c| c.name.as_str())
            .chain(std::iter::once(self.schema.target.as_str()))
            .collect();
        out.push_str(&names.join(","));
        out.push('\n');

        for row in 0..self.n() {
            let mut cells: Vec<String> = Vec::with_capacity(self.schema.columns.len() + 1);
            let (mut ni, mut ci, mut ti) = (0, 0, 0);
            for col in &self.schema.columns {
                match col.kind {
                    ColumnKind::Numerical => {
                        cells.push(format!("{}", self.numeric_at(row, ni)));
                        ni += 1;
                    }
                    ColumnKind::Categorical => {
                        cells.push(self.code_tables[ci][self.cat_code_at(row, ci)].clone());
                        ci += 1;
                    }
                    ColumnKind::Temporal { .. } => {
                        let w = self.window_at(ti, row);
                        let mut cell = String::new();
                        for (i, v) in w.iter().enumerate() {
                            if i > 0 {
                                cell.push(';');
                            }
                            let _ = write!(cell, "{v}");
                        }
                        cells.push(cell);
                        ti += 1;
                    }
                }
            }
            match &self.labels {
                Labels::Classes { values, .. } => cells.push(format!("{}", values[row])),
                Labels::Values(v) => cells.push(format!("{}", v[row])),
            }
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

// ── CSV loading ─────────────────────────────────────────────────────────

pub fn load_csv(path: &Path, schema: &Schema) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::data(path.display().to_string(), format!("cannot read: {e}")))?;
    parse_csv(&text, schema, &path.display().to_string())
}

/// Parse CSV text against a schema. Categorical levels are coded by first
/// appearance in file order, so reloading the same file is stable.
pub fn parse_csv(text: &str, schema: &Schema, location: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let headers = reader
        .headers()
        .map_err(|e| Error::data(location, format!("bad header: {e}")))?
        .clone();
    let index_of = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::data(location, format!("missing column '{name}'")))
    };

    let mut col_positions = Vec::with_capacity(schema.columns.len());
    for col in &schema.columns {
        col_positions.push(index_of(&col.name)?);
    }
    let target_pos = index_of(&schema.target)?;

    let numeric_cols: Vec<usize> = schema
        .columns
        .iter()
        .enumerate()
        .filter(|(_, c)| c.kind == ColumnKind::Numerical)
        .map(|(i, _)| i)
        .collect();
    let cat_cols: Vec<usize> = schema
        .columns
        .iter()
        .enumerate()
        .filter(|(_, c)| c.kind == ColumnKind::Categorical)
        .map(|(i, _)| i)
        .collect();
    let temporal_cols: Vec<usize> = schema
        .columns
        .iter()
        .enumerate()
        .filter(|(_, c)| matches!(c.kind, ColumnKind::Temporal { .. }))
        .map(|(i, _)| i)
        .collect();

    let mut numeric = Vec::new();
    let mut cat_codes = Vec::new();
    let mut code_tables: Vec<Vec<String>> = vec![Vec::new(); cat_cols.len()];
    let mut code_lookup: Vec<HashMap<String, usize>> = vec![HashMap::new(); cat_cols.len()];
    let mut windows: Vec<Vec<f64>> = vec![Vec::new(); temporal_cols.len()];
    let mut class_values = Vec::new();
    let mut reg_values = Vec::new();

    let parse_number = |cell: &str, row: usize, name: &str| -> Result<f64> {
        let v: f64 = cell.parse().map_err(|_| {
            Error::data(
                format!("{location}, row {row}, column '{name}'"),
                format!("expected a number, got '{cell}'"),
            )
        })?;
        if !v.is_finite() {
            return Err(Error::data(
                format!("{location}, row {row}, column '{name}'"),
                "non-finite value".to_string(),
            ));
        }
        Ok(v)
    };

    for (row_idx, record) in reader.records().enumerate() {
        let row = row_idx + 1; // 1-based data rows, header excluded
        let record = record.map_err(|e| Error::data(format!("{location}, row {row}"), e.to_string()))?;

        let cell = |pos: usize| -> &str { record.get(pos).unwrap_or("") };

        let (mut ni, mut ci, mut ti) = (0, 0, 0);
        for (schema_idx, col) in schema.columns.iter().enumerate() {
            let raw = cell(col_positions[schema_idx]);
            match col.kind {
                ColumnKind::Numerical => {
                    numeric.push(parse_number(raw, row, &col.name)?);
                    ni += 1;
                }
                ColumnKind::Categorical => {
                    let next = code_tables[ci].len();
                    let code = *code_lookup[ci].entry(raw.to_string()).or_insert_with(|| {
                        code_tables[ci].push(raw.to_string());
                        next
                    });
                    cat_codes.push(code);
                    ci += 1;
                }
                ColumnKind::Temporal { lookback } => {
                    let parts: Vec<&str> = raw.split(';').collect();
                    if parts.len() != lookback {
                        return Err(Error::data(
                            format!("{location}, row {row}, column '{}'", col.name),
                            format!("window has {} values, lookback is {lookback}", parts.len()),
                        ));
                    }
                    for part in parts {
                        windows[ti].push(parse_number(part, row, &col.name)?);
                    }
                    ti += 1;
                }
            }
        }
        let _ = (ni, ci, ti);

        let label_raw = cell(target_pos);
        match schema.task {
            TaskKind::Classification => {
                let v = parse_number(label_raw, row, &schema.target)?;
                if v < 0.0 || v.fract() != 0.0 {
                    return Err(Error::data(
                        format!("{location}, row {row}, column '{}'", schema.target),
                        format!("class label must be a nonnegative integer, got '{label_raw}'"),
                    ));
                }
                class_values.push(v as usize);
            }
            TaskKind::Regression => reg_values.push(parse_number(label_raw, row, &schema.target)?),
        }
    }

    let n = match schema.task {
        TaskKind::Classification => class_values.len(),
        TaskKind::Regression => reg_values.len(),
    };
    if n == 0 {
        return Err(Error::data(location, "no data rows"));
    }

    let labels = match schema.task {
        TaskKind::Classification => {
            let classes = class_values.iter().max().map(|m| m + 1).unwrap_or(0);
            Labels::Classes { values: class_values, classes }
        }
        TaskKind::Regression => Labels::Values(reg_values),
    };

    Ok(Dataset {
        schema: schema.clone(),
        numeric,
        cat_codes,
        code_tables,
        windows,
        labels,
        splits: vec![Split::Train; n],
        numeric_cols,
        cat_cols,
        temporal_cols,
    })
}

// ── Fitted statistics ───────────────────────────────────────────────────

/// Non-learned constants computed once on the training split: quantile cut
/// points per numeric column, and per-category means of every numeric column
/// grouped by every categorical column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedStats {
    /// (p25, p50, p75) per numeric column, linear-interpolation percentiles.
    pub quantile_cuts: Vec<[f64; 3]>,
    /// group_means[cat][num][category] = train mean of numeric column `num`
    /// among rows whose categorical column `cat` equals `category`.
    pub group_means: Vec<Vec<Vec<f64>>>,
    /// Train mean per numeric column; the fallback for unseen categories.
    pub global_means: Vec<f64>,
}

/// Linear-interpolation percentile of already-sorted values, q in [0, 1].
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    if sorted.len() == 1 {
        return sorted[0];
    }
    let rank = q * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let frac = rank - lo as f64;
    if lo + 1 >= sorted.len() {
        sorted[sorted.len() - 1]
    } else {
        sorted[lo] + (sorted[lo + 1] - sorted[lo]) * frac
    }
}

/// Compute all fitted statistics on the training split only.
pub fn fit_statistics(dataset: &Dataset) -> Result<FittedStats> {
    let train_rows = dataset.rows_in(Split::Train);
    if train_rows.is_empty() {
        return Err(Error::invalid("fit_statistics", "training split is empty"));
    }

    let d_num = dataset.numeric_width();
    let mut quantile_cuts = Vec::with_capacity(d_num);
    let mut global_means = Vec::with_capacity(d_num);
    for j in 0..d_num {
        let mut column: Vec<f64> = train_rows.iter().map(|&r| dataset.numeric_at(r, j)).collect();
        column.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
        quantile_cuts.push([
            percentile_sorted(&column, 0.25),
            percentile_sorted(&column, 0.50),
            percentile_sorted(&column, 0.75),
        ]);
        global_means.push(column.iter().sum::<f64>() / column.len() as f64);
    }

    let mut group_means = Vec::with_capacity(dataset.categorical_width());
    for c in 0..dataset.categorical_width() {
        let levels = dataset.code_tables[c].len();
        let mut per_num = Vec::with_capacity(d_num);
        for (j, &fallback) in global_means.iter().enumerate() {
            let mut sums = vec![0.0; levels];
            let mut counts = vec![0usize; levels];
            for &r in &train_rows {
                let code = dataset.cat_code_at(r, c);
                sums[code] += dataset.numeric_at(r, j);
                counts[code] += 1;
            }
            let means: Vec<f64> = sums
                .iter()
                .zip(&counts)
                .map(|(&s, &n)| if n > 0 { s / n as f64 } else { fallback })
                .collect();
            per_num.push(means);
        }
        group_means.push(per_num);
    }

    Ok(FittedStats { quantile_cuts, group_means, global_means })
}

/// Bucket a value against three cut points, rescaled to {0, 1/3, 2/3, 1}.
/// Equal cut points (constant training column) send everything to bucket 0.
pub fn quantile_bucket(value: f64, cuts: &[f64; 3]) -> f64 {
    let mut bucket = 0;
    for &cut in cuts {
        if value > cut {
            bucket += 1;
        }
    }
    bucket as f64 / 3.0
}

// ── Synthetic datasets ──────────────────────────────────────────────────

/// Noiseless part of the `product+log` target.
pub fn product_log_target(x1: f64, x2: f64, x3: f64) -> f64 {
    x2 * x3 + (x1.abs() + 1e-12).ln()
}

/// Deterministic synthetic datasets for the validation harness:
/// - `product+log`: y = x2*x3 + ln|x1| + noise (sigma 0.01), regression.
/// - `lag2`: one temporal feature with lookback 8, y = value two steps back,
///   noise-free, regression.
/// - `scaling`: pure Gaussian features with unrelated Gaussian targets, for
///   runtime benchmarks only.
pub fn synthesize(generator: &str, n: usize, d: usize, seed: u64) -> Result<Dataset> {
    match generator {
        "product+log" => synthesize_product_log(n, d, seed),
        "lag2" => synthesize_lag2(n, seed),
        "scaling" => synthesize_scaling(n, d, seed),
        other => Err(Error::invalid("synthesize", format!("unknown generator '{other}'"))),
    }
}

fn numeric_schema(d: usize, task: TaskKind) -> Schema {
    let columns = (0..d)
        .map(|j| ColumnSpec { name: format!("x{}", j + 1), kind: ColumnKind::Numerical })
        .collect();
    Schema::new(columns, "y", task).expect("valid synthetic schema")
}

fn synthesize_product_log(n: usize, d: usize, seed: u64) -> Result<Dataset> {
    if d < 3 {
        return Err(Error::invalid("synthesize", "product+log needs d >= 3"));
    }
    let schema = numeric_schema(d, TaskKind::Regression);
    let mut rng = Rng::new(seed);
    let mut numeric = Vec::with_capacity(n * d);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        // Signal features x1..x3 are log-uniform on [3, 12]: the mean (~6.2)
        // keeps a softmax-weighted five-column product near unit magnitude so
        // the multiplicative pathway is trainable from the first step, and
        // the 4x spread keeps the pairwise interaction identifiable against
        // the features' linear content. Distractors sit on [5, 7]: they carry
        // no target signal, and their modest spread keeps the weighted
        // product's uninformative factors near scale one.
        let row: Vec<f64> = (0..d)
            .map(|j| {
                if j < 3 {
                    rng.range(3.0_f64.ln(), 12.0_f64.ln()).exp()
                } else {
                    rng.range(5.0, 7.0)
                }
            })
            .collect();
        let y = product_log_target(row[0], row[1], row[2]) + 0.01 * rng.normal();
        numeric.extend_from_slice(&row);
        ys.push(y);
    }
    Ok(Dataset {
        schema,
        numeric,
        cat_codes: Vec::new(),
        code_tables: Vec::new(),
        windows: Vec::new(),
        labels: Labels::Values(ys),
        splits: vec![Split::Train; n],
        numeric_cols: (0..d).collect(),
        cat_cols: Vec::new(),
        temporal_cols: Vec::new(),
    })
}

const LAG2_LOOKBACK: usize = 8;

fn synthesize_lag2(n: usize, seed: u64) -> Result<Dataset> {
    let schema = Schema::new(
        vec![ColumnSpec {
            name: "series".into(),
            kind: ColumnKind::Temporal { lookback: LAG2_LOOKBACK },
        }],
        "y",
        TaskKind::Regression,
    )?;
    let mut rng = Rng::new(seed);
    let mut windows = Vec::with_capacity(n * LAG2_LOOKBACK);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let w: Vec<f64> = (0..LAG2_LOOKBACK).map(|_| rng.normal()).collect();
        // Target: the value two steps before the window end.
        ys.push(w[LAG2_LOOKBACK - 3]);
        windows.extend_from_slice(&w);
    }
    Ok(Dataset {
        schema,
        numeric: Vec::new(),
        cat_codes: Vec::new(),
        code_tables: Vec::new(),
        windows: vec![windows],
        labels: Labels::Values(ys),
        splits: vec![Split::Train; n],
        numeric_cols: Vec::new(),
        cat_cols: Vec::new(),
        temporal_cols: vec![0],
    })
}

fn synthesize_scaling(n: usize, d: usize, seed: u64) -> Result<Dataset> {
    let schema = numeric_schema(d, TaskKind::Regression);
    let mut rng = Rng::new(seed);
    let numeric: Vec<f64> = (0..n * d).map(|_| rng.normal()).collect();
    let ys: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
    Ok(Dataset {
        schema,
        numeric,
        cat_codes: Vec::new(),
        code_tables: Vec::new(),
        windows: Vec::new(),
        labels: Labels::Values(ys),
        splits: vec![Split::Train; n],
        numeric_cols: (0..d).collect(),
        cat_cols: Vec::new(),
        temporal_cols: Vec::new(),
    })
}

/// Build a dataset directly from blocks; used by tests and the wasm demo.
#[allow(clippy::too_many_arguments)]
pub fn dataset_from_parts(
    schema: Schema,
    numeric: Vec<f64>,
    cat_codes: Vec<usize>,
    code_tables: Vec<Vec<String>>,
    windows: Vec<Vec<f64>>,
    labels: Labels,
) -> Result<Dataset> {
    let n = labels.len();
    let numeric_cols: Vec<usize> = schema
        .columns
        .iter()
        .enumerate()
        .filter(|(_, c)| c.kind == ColumnKind::Numerical)
        .map(|(i, _)| i)
        .collect();
    let cat_cols: Vec<usize> = schema
        .columns
        .iter()
        .enumerate()
        .filter(|(_, c)| c.kind == ColumnKind::Categorical)
        .map(|(i, _)| i)
        .collect();
    let temporal_cols: Vec<usize> = schema
        .columns
        .iter()
        .enumerate()
        .filter(|(_, c)| matches!(c.kind, ColumnKind::Temporal { .. }))
        .map(|(i, _)| i)
        .collect();

    if numeric.len() != n * numeric_cols.len() {
        return Err(Error::shape("dataset_from_parts", "numeric block size"));
    }
    if cat_codes.len() != n * cat_cols.len() || code_tables.len() != cat_cols.len() {
        return Err(Error::shape("dataset_from_parts", "categorical block size"));
    }
    if windows.len() != temporal_cols.len() {
        return Err(Error::shape("dataset_from_parts", "window block count"));
    }

    Ok(Dataset {
        schema,
        numeric,
        cat_codes,
        code_tables,
        windows,
        labels,
        splits: vec![Split::Train; n],
        numeric_cols,
        cat_cols,
        temporal_cols,
    })
}
