//! Regression datasets: KEEL `.dat` and CSV loading, CSV export and
//! deterministic k-fold splitting.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableMeta {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

impl VariableMeta {
    pub fn range(&self) -> f64 {
        self.max - self.min
    }
}

/// A real-valued regression dataset with `p` inputs and one output.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub inputs: Vec<VariableMeta>,
    pub output: VariableMeta,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl Dataset {
    /// Builds a dataset, widening any declared bound that does not bracket
    /// the observed values.
    pub fn new(
        name: impl Into<String>,
        mut inputs: Vec<VariableMeta>,
        mut output: VariableMeta,
        x: Vec<Vec<f64>>,
        y: Vec<f64>,
    ) -> Result<Self> {
        let name = name.into();
        if y.is_empty() {
            return Err(Error::EmptyDataset(name));
        }
        if x.len() != y.len() {
            return Err(Error::InvalidArgument(format!(
                "{} input rows but {} outputs",
                x.len(),
                y.len()
            )));
        }
        let p = inputs.len();
        if let Some(i) = x.iter().position(|row| row.len() != p) {
            return Err(Error::InvalidArgument(format!(
                "example {i} has {} inputs, expected {p}",
                x[i].len()
            )));
        }
        for (j, meta) in inputs.iter_mut().enumerate() {
            for row in &x {
                meta.min = meta.min.min(row[j]);
                meta.max = meta.max.max(row[j]);
            }
        }
        for &v in &y {
            output.min = output.min.min(v);
            output.max = output.max.max(v);
        }
        Ok(Self {
            name,
            inputs,
            output,
            x,
            y,
        })
    }

    /// Builds a dataset whose bounds are taken from the data.
    pub fn from_examples(
        name: impl Into<String>,
        input_names: &[&str],
        output_name: &str,
        x: Vec<Vec<f64>>,
        y: Vec<f64>,
    ) -> Result<Self> {
        let unbounded = |n: &str| VariableMeta {
            name: n.to_string(),
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        };
        Self::new(
            name,
            input_names.iter().map(|n| unbounded(n)).collect(),
            unbounded(output_name),
            x,
            y,
        )
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.inputs.len()
    }

    /// The examples at `indices`, keeping the variable metadata of `self`.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            inputs: self.inputs.clone(),
            output: self.output.clone(),
            x: indices.iter().map(|&i| self.x[i].clone()).collect(),
            y: indices.iter().map(|&i| self.y[i]).collect(),
        }
    }

    pub fn output_mean(&self) -> f64 {
        self.y.iter().sum::<f64>() / self.n() as f64
    }

    /// Writes the dataset as CSV (inputs, then output) with full `f64`
    /// round-trip precision.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<&str> = self.inputs.iter().map(|v| v.name.as_str()).collect();
        header.push(&self.output.name);
        w.write_record(&header)?;
        for (row, y) in self.x.iter().zip(&self.y) {
            let mut rec: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            rec.push(format!("{y:?}"));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Keel,
    Csv,
}

impl Format {
    /// `.dat` files are KEEL, everything else is treated as CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("dat") => Format::Keel,
            _ => Format::Csv,
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "keel" | "dat" => Ok(Format::Keel),
            "csv" => Ok(Format::Csv),
            other => Err(Error::InvalidArgument(format!("unknown format `{other}`"))),
        }
    }
}

pub fn load_dataset(path: impl AsRef<Path>, format: Format) -> Result<Dataset> {
    let path = path.as_ref();
    match format {
        Format::Keel => {
            let text = fs::read_to_string(path)?;
            parse_keel(&text, path)
        }
        Format::Csv => parse_csv(fs::File::open(path)?, path),
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset")
        .to_string()
}

fn parse_number(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

struct KeelAttribute {
    name: String,
    range: Option<(f64, f64)>,
}

fn parse_keel_attribute(rest: &str) -> std::result::Result<KeelAttribute, String> {
    let rest = rest.trim();
    let (name, rest) = match rest.strip_prefix('\'') {
        Some(quoted) => {
            let end = quoted.find('\'').ok_or("unterminated attribute name")?;
            (&quoted[..end], &quoted[end + 1..])
        }
        None => {
            let end = rest
                .find(|c: char| c.is_whitespace() || c == '{' || c == '[')
                .unwrap_or(rest.len());
            (&rest[..end], &rest[end..])
        }
    };
    if name.is_empty() {
        return Err("missing attribute name".into());
    }
    let rest = rest.trim();
    if rest.starts_with('{') {
        return Err(format!("attribute `{name}` is nominal; only numeric attributes are supported"));
    }
    let (ty, rest) = match rest.find('[') {
        Some(i) => (rest[..i].trim(), Some(&rest[i..])),
        None => (rest, None),
    };
    match ty.to_ascii_lowercase().as_str() {
        "real" | "integer" | "numeric" => {}
        "" => return Err(format!("attribute `{name}` has no type")),
        other => return Err(format!("attribute `{name}` has unsupported type `{other}`")),
    }
    let range = match rest {
        None => None,
        Some(r) => {
            let inner = r
                .strip_prefix('[')
                .and_then(|r| r.trim_end().strip_suffix(']'))
                .ok_or_else(|| format!("malformed range for `{name}`"))?;
            let mut parts = inner.split(',');
            let lo = parts.next().and_then(parse_number);
            let hi = parts.next().and_then(parse_number);
            match (lo, hi, parts.next()) {
                (Some(lo), Some(hi), None) if lo <= hi => Some((lo, hi)),
                _ => return Err(format!("malformed range for `{name}`")),
            }
        }
    };
    Ok(KeelAttribute {
        name: name.to_string(),
        range,
    })
}

fn split_names(list: &str) -> Vec<String> {
    list.split(',')
        .map(|s| s.trim().trim_matches('\'').to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

/// Parses the text of a KEEL `.dat` file.
pub fn parse_keel(text: &str, path: &Path) -> Result<Dataset> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut relation = None;
    let mut attributes: Vec<KeelAttribute> = Vec::new();
    let mut inputs: Option<Vec<String>> = None;
    let mut outputs: Option<Vec<String>> = None;
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut in_data = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        if in_data {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != attributes.len() {
                return Err(err(
                    line_no,
                    format!(
                        "data row {} has {} cells, expected {}",
                        rows.len() + 1,
                        cells.len(),
                        attributes.len()
                    ),
                ));
            }
            let mut values = Vec::with_capacity(cells.len());
            for cell in cells {
                let v = parse_number(cell).ok_or_else(|| {
                    err(
                        line_no,
                        format!("data row {}: non-numeric value `{}`", rows.len() + 1, cell.trim()),
                    )
                })?;
                values.push(v);
            }
            rows.push((line_no, values));
            continue;
        }
        let Some(directive) = line.strip_prefix('@') else {
            return Err(err(line_no, format!("expected a header directive, found `{line}`")));
        };
        let (keyword, rest) = directive
            .split_once(char::is_whitespace)
            .unwrap_or((directive, ""));
        match keyword.to_ascii_lowercase().as_str() {
            "relation" => relation = Some(rest.trim().to_string()),
            "attribute" => {
                attributes.push(parse_keel_attribute(rest).map_err(|m| err(line_no, m))?)
            }
            "inputs" | "input" => inputs = Some(split_names(rest)),
            "outputs" | "output" => outputs = Some(split_names(rest)),
            "data" => {
                if attributes.len() < 2 {
                    return Err(err(line_no, "@data before at least two @attribute lines".into()));
                }
                in_data = true;
            }
            other => return Err(err(line_no, format!("unknown directive `@{other}`"))),
        }
    }
    if !in_data {
        return Err(err(text.lines().count(), "missing @data section".into()));
    }

    let position = |name: &str| attributes.iter().position(|a| a.name == name);
    let output_idx = match &outputs {
        Some(o) if o.len() == 1 => position(&o[0])
            .ok_or_else(|| err(0, format!("@outputs names unknown attribute `{}`", o[0])))?,
        Some(o) => return Err(err(0, format!("expected one output, found {}", o.len()))),
        None => attributes.len() - 1,
    };
    let input_idx: Vec<usize> = match &inputs {
        Some(names) => names
            .iter()
            .map(|n| position(n).ok_or_else(|| err(0, format!("@inputs names unknown attribute `{n}`"))))
            .collect::<Result<_>>()?,
        None => (0..attributes.len()).filter(|&i| i != output_idx).collect(),
    };

    let meta = |a: &KeelAttribute| {
        let (min, max) = a.range.unwrap_or((f64::INFINITY, f64::NEG_INFINITY));
        VariableMeta {
            name: a.name.clone(),
            min,
            max,
        }
    };
    let x = rows
        .iter()
        .map(|(_, r)| input_idx.iter().map(|&i| r[i]).collect())
        .collect();
    let y = rows.iter().map(|(_, r)| r[output_idx]).collect();
    Dataset::new(
        relation.unwrap_or_else(|| stem(path)),
        input_idx.iter().map(|&i| meta(&attributes[i])).collect(),
        meta(&attributes[output_idx]),
        x,
        y,
    )
}

/// Parses CSV with a header row; the last column is the output.
pub fn parse_csv<R: std::io::Read>(reader: R, path: &Path) -> Result<Dataset> {
    let err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line: line as usize,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.len() < 2 {
        return Err(err(1, "header needs at least one input and one output column".into()));
    }
    let p = header.len() - 1;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != header.len() {
            return Err(err(line, format!("{} cells, expected {}", rec.len(), header.len())));
        }
        let mut values = Vec::with_capacity(rec.len());
        for cell in rec.iter() {
            values.push(
                parse_number(cell).ok_or_else(|| err(line, format!("non-numeric value `{cell}`")))?,
            );
        }
        y.push(values[p]);
        values.truncate(p);
        x.push(values);
    }
    let names: Vec<&str> = header.iter().map(String::as_str).collect();
    Dataset::from_examples(stem(path), &names[..p], names[p], x, y)
}

/// Shuffled assignment of examples to `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldSplit {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

pub fn kfold_split(d: &Dataset, k: usize, seed: u64) -> Result<FoldSplit> {
    let n = d.n();
    if k < 2 || k > n {
        return Err(Error::InvalidArgument(format!(
            "fold count {k} must lie in [2, {n}]"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::substream(seed, "folds"));
    let mut assignments = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        assignments[i] = pos % k;
    }
    Ok(FoldSplit {
        k,
        assignments,
        seed,
    })
}

/// Writes `contents` to `path`, creating parent directories.
pub(crate) fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::File::create(path)?.write_all(contents)?;
    Ok(())
}
