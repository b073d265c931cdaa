//! Knapsack instances, datasets and the `kpds` JSON-lines file format.
//!
//! A dataset file starts with one header object followed by one line per
//! instance:
//!
//! ```text
//! {"format":"kpds","version":1,"n_items":N,"n_instances":S,"seed":42,"split":{"train":[..],"val":[..],"test":[..]}}
//! {"id":0,"w":[..],"v":[..],"W":12.5,"x":[0,1,..],"opt":31.2}
//! {"id":1,"w":[..],"v":[..],"W":25.1,"x":null,"opt":null}
//! ```
//!
//! Floats are written in shortest round-trip form, so reading a written file
//! reproduces every field bit for bit.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::rng::{self, Stream};
use crate::{Error, Result};

pub const FORMAT_TAG: &str = "kpds";
pub const FORMAT_VERSION: u64 = 1;

/// Tolerance used when checking that a stored label fits its capacity.
const FEASIBILITY_TOL: f64 = 1e-12;
/// Tolerance on the stored optimal objective.
const OBJECTIVE_TOL: f64 = 1e-9;

/// One 0-1 knapsack problem.
#[derive(Debug, Clone, PartialEq)]
pub struct KnapsackInstance {
    pub id: u64,
    pub weights: Vec<f64>,
    pub values: Vec<f64>,
    pub capacity: f64,
}

impl KnapsackInstance {
    pub fn new(id: u64, weights: Vec<f64>, values: Vec<f64>, capacity: f64) -> Result<Self> {
        let instance = KnapsackInstance {
            id,
            weights,
            values,
            capacity,
        };
        instance.validate()?;
        Ok(instance)
    }

    pub fn n_items(&self) -> usize {
        self.weights.len()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Checks the structural invariants of a loaded instance.
    pub fn validate(&self) -> Result<()> {
        let fail = |message: String| Error::InvalidInstance {
            id: self.id,
            message,
        };
        if self.weights.len() != self.values.len() {
            return Err(fail(format!(
                "weights/values length mismatch ({} vs {})",
                self.weights.len(),
                self.values.len()
            )));
        }
        if self.weights.is_empty() {
            return Err(fail("instance has no items".into()));
        }
        if let Some(w) = self.weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(fail(format!("invalid weight {w}")));
        }
        if let Some(v) = self.values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(fail(format!("invalid value {v}")));
        }
        let total = self.total_weight();
        if !(self.capacity.is_finite() && self.capacity >= 0.0 && self.capacity <= total) {
            return Err(fail(format!(
                "capacity {} outside [0, {}]",
                self.capacity, total
            )));
        }
        Ok(())
    }

    /// Total weight of a selection, summed in item order.
    pub fn selection_weight(&self, selection: &[bool]) -> f64 {
        selection
            .iter()
            .zip(&self.weights)
            .filter(|(x, _)| **x)
            .fold(0.0, |acc, (_, w)| acc + w)
    }

    /// Total value of a selection, summed in item order.
    pub fn selection_value(&self, selection: &[bool]) -> f64 {
        selection
            .iter()
            .zip(&self.values)
            .filter(|(x, _)| **x)
            .fold(0.0, |acc, (_, v)| acc + v)
    }

    /// Network input `[w_1..w_n, v_1..v_n, W]`.
    pub fn features(&self) -> Vec<f64> {
        let mut row = Vec::with_capacity(2 * self.n_items() + 1);
        row.extend_from_slice(&self.weights);
        row.extend_from_slice(&self.values);
        row.push(self.capacity);
        row
    }
}

/// Stacks network inputs row by row; all instances must share one size.
pub fn feature_matrix(instances: &[&KnapsackInstance]) -> Result<Array2<f64>> {
    let n = instances.first().map_or(0, |i| i.n_items());
    let mut out = Array2::zeros((instances.len(), 2 * n + 1));
    for (mut row, inst) in out.rows_mut().into_iter().zip(instances) {
        if inst.n_items() != n {
            return Err(Error::Shape(format!(
                "instance {} has {} items, batch has {n}",
                inst.id,
                inst.n_items()
            )));
        }
        row.assign(&ndarray::ArrayView1::from(&inst.features()));
    }
    Ok(out)
}

/// Capacity ratio α = W / Σw.
pub fn alpha(instance: &KnapsackInstance) -> Result<f64> {
    let total = instance.total_weight();
    if total <= 0.0 {
        return Err(Error::InvalidInstance {
            id: instance.id,
            message: "alpha undefined for zero total weight".into(),
        });
    }
    Ok(instance.capacity / total)
}

/// Graded capacity of the `j`-th (1-indexed) of `s` instances.
pub fn graded_capacity(j: usize, s: usize, weight_sum: f64) -> f64 {
    (j as f64 / (s + 1) as f64) * weight_sum
}

/// Exact optimal selection attached to an instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Label {
    pub selection: Vec<bool>,
    pub optimal_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledInstance {
    pub instance: KnapsackInstance,
    pub label: Option<Label>,
}

impl LabeledInstance {
    pub fn unlabeled(instance: KnapsackInstance) -> Self {
        LabeledInstance {
            instance,
            label: None,
        }
    }

    pub fn id(&self) -> u64 {
        self.instance.id
    }

    fn validate(&self) -> Result<()> {
        self.instance.validate()?;
        let Some(label) = &self.label else {
            return Ok(());
        };
        let id = self.instance.id;
        if label.selection.len() != self.instance.n_items() {
            return Err(Error::InvalidInstance {
                id,
                message: format!(
                    "label length {} != {} items",
                    label.selection.len(),
                    self.instance.n_items()
                ),
            });
        }
        if self.instance.selection_weight(&label.selection) > self.instance.capacity + FEASIBILITY_TOL {
            return Err(Error::InfeasibleLabel { id });
        }
        let value = self.instance.selection_value(&label.selection);
        if (value - label.optimal_value).abs() > OBJECTIVE_TOL {
            return Err(Error::InvalidInstance {
                id,
                message: format!(
                    "stored objective {} != label value {}",
                    label.optimal_value, value
                ),
            });
        }
        Ok(())
    }
}

/// Ids assigned to each partition of a dataset.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<u64>,
    pub val: Vec<u64>,
    pub test: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitKind {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn ids(&self, kind: SplitKind) -> &[u64] {
        match kind {
            SplitKind::Train => &self.train,
            SplitKind::Val => &self.val,
            SplitKind::Test => &self.test,
        }
    }

    /// 80/10/10 partition of `ids` after a seeded shuffle.
    pub fn shuffled(ids: &[u64], seed: u64) -> Split {
        let mut order = ids.to_vec();
        order.shuffle(&mut rng::stream(seed, Stream::Split));
        let s = order.len();
        let n_train = s * 8 / 10;
        let n_val = s / 10;
        let test = order.split_off(n_train + n_val);
        let val = order.split_off(n_train);
        Split {
            train: order,
            val,
            test,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub n_items: usize,
    pub seed: u64,
    pub items: Vec<LabeledInstance>,
    pub split: Split,
}

impl Dataset {
    pub fn is_labeled(&self) -> bool {
        self.items.iter().all(|item| item.label.is_some())
    }

    /// Instances of one partition, in the order the split lists them.
    pub fn split_items(&self, kind: SplitKind) -> Vec<&LabeledInstance> {
        let index: HashMap<u64, usize> = self
            .items
            .iter()
            .enumerate()
            .map(|(i, item)| (item.id(), i))
            .collect();
        self.split
            .ids(kind)
            .iter()
            .filter_map(|id| index.get(id).map(|&i| &self.items[i]))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids = HashSet::with_capacity(self.items.len());
        for item in &self.items {
            item.validate()?;
            if item.instance.n_items() != self.n_items {
                return Err(Error::InvalidInstance {
                    id: item.id(),
                    message: format!(
                        "{} items, dataset declares {}",
                        item.instance.n_items(),
                        self.n_items
                    ),
                });
            }
            if !ids.insert(item.id()) {
                return Err(Error::InvalidInstance {
                    id: item.id(),
                    message: "duplicate id".into(),
                });
            }
        }
        let mut seen = HashSet::new();
        for id in self
            .split
            .train
            .iter()
            .chain(&self.split.val)
            .chain(&self.split.test)
        {
            if !ids.contains(id) {
                return Err(Error::InvalidArgument(format!("split references unknown id {id}")));
            }
            if !seen.insert(*id) {
                return Err(Error::InvalidArgument(format!("id {id} appears twice in split")));
            }
        }
        Ok(())
    }
}

/// Generates `n_instances` uniform uncorrelated instances with graded
/// capacities `W_j = j/(S+1) Σw`, then assigns a shuffled 80/10/10 split.
///
/// Items keep generation order (`id = j - 1`).
pub fn generate_dataset(n_items: usize, n_instances: usize, seed: u64) -> Result<Dataset> {
    if n_items == 0 || n_instances == 0 {
        return Err(Error::InvalidArgument(
            "n_items and n_instances must be positive".into(),
        ));
    }
    let mut rng = rng::stream(seed, Stream::Instances);
    let items = (1..=n_instances)
        .map(|j| {
            let weights: Vec<f64> = (0..n_items).map(|_| rng.gen::<f64>()).collect();
            let values: Vec<f64> = (0..n_items).map(|_| rng.gen::<f64>()).collect();
            let capacity = graded_capacity(j, n_instances, weights.iter().sum());
            LabeledInstance::unlabeled(KnapsackInstance {
                id: (j - 1) as u64,
                weights,
                values,
                capacity,
            })
        })
        .collect::<Vec<_>>();
    let ids: Vec<u64> = items.iter().map(LabeledInstance::id).collect();
    Ok(Dataset {
        n_items,
        seed,
        split: Split::shuffled(&ids, seed),
        items,
    })
}

#[derive(Serialize)]
struct Header<'a> {
    format: &'a str,
    version: u64,
    n_items: usize,
    n_instances: usize,
    seed: u64,
    split: &'a Split,
}

#[derive(Serialize)]
struct Record<'a> {
    id: u64,
    w: &'a [f64],
    v: &'a [f64],
    #[serde(rename = "W")]
    capacity: f64,
    x: Option<Vec<u8>>,
    opt: Option<f64>,
}

/// Serializes one instance as a `kpds` record line (no trailing newline).
pub fn record_line(item: &LabeledInstance) -> String {
    let record = Record {
        id: item.instance.id,
        w: &item.instance.weights,
        v: &item.instance.values,
        capacity: item.instance.capacity,
        x: item
            .label
            .as_ref()
            .map(|l| l.selection.iter().map(|&b| b as u8).collect()),
        opt: item.label.as_ref().map(|l| l.optimal_value),
    };
    serde_json::to_string(&record).expect("record serialization is infallible")
}

pub fn write_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    let header = Header {
        format: FORMAT_TAG,
        version: FORMAT_VERSION,
        n_items: dataset.n_items,
        n_instances: dataset.items.len(),
        seed: dataset.seed,
        split: &dataset.split,
    };
    let header = serde_json::to_string(&header).expect("header serialization is infallible");
    writeln!(out, "{header}").map_err(io)?;
    for item in &dataset.items {
        writeln!(out, "{}", record_line(item)).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut lines = reader.lines().enumerate();

    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        line: 1,
        field: "header".into(),
        message: "empty file".into(),
    })?;
    let header = parse_json(&header.map_err(io)?, 1)?;
    let format = field(&header, "format", 1)?
        .as_str()
        .ok_or_else(|| bad(1, "format", "expected string"))?;
    if format != FORMAT_TAG {
        return Err(bad(1, "format", &format!("expected \"{FORMAT_TAG}\", got \"{format}\"")));
    }
    let version = as_u64(field(&header, "version", 1)?, 1, "version")?;
    if version != FORMAT_VERSION {
        return Err(bad(1, "version", &format!("unsupported version {version}")));
    }
    let n_items = as_u64(field(&header, "n_items", 1)?, 1, "n_items")? as usize;
    let n_instances = as_u64(field(&header, "n_instances", 1)?, 1, "n_instances")? as usize;
    let seed = as_u64(field(&header, "seed", 1)?, 1, "seed")?;
    let split: Split = serde_json::from_value(field(&header, "split", 1)?.clone())
        .map_err(|e| bad(1, "split", &e.to_string()))?;

    let mut items = Vec::with_capacity(n_instances);
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let item = parse_record(&parse_json(&line, line_no)?, line_no)?;
        item.validate()?;
        items.push(item);
    }
    if items.len() != n_instances {
        return Err(bad(
            1,
            "n_instances",
            &format!("header declares {n_instances}, file has {}", items.len()),
        ));
    }
    let dataset = Dataset {
        n_items,
        seed,
        items,
        split,
    };
    dataset.validate()?;
    Ok(dataset)
}

/// Parses a single `kpds` record object; `x`/`opt` may be absent.
pub fn parse_record(value: &Value, line: usize) -> Result<LabeledInstance> {
    let id = as_u64(field(value, "id", line)?, line, "id")?;
    let weights = as_f64_vec(field(value, "w", line)?, line, "w")?;
    let values = as_f64_vec(field(value, "v", line)?, line, "v")?;
    let capacity = as_f64(field(value, "W", line)?, line, "W")?;
    let x = value.get("x").filter(|v| !v.is_null());
    let opt = value.get("opt").filter(|v| !v.is_null());
    let label = match (x, opt) {
        (None, None) => None,
        (Some(x), Some(opt)) => {
            let selection = x
                .as_array()
                .ok_or_else(|| bad(line, "x", "expected array or null"))?
                .iter()
                .map(|bit| match bit.as_u64() {
                    Some(0) => Ok(false),
                    Some(1) => Ok(true),
                    _ => Err(bad(line, "x", "entries must be 0 or 1")),
                })
                .collect::<Result<Vec<_>>>()?;
            Some(Label {
                selection,
                optimal_value: as_f64(opt, line, "opt")?,
            })
        }
        (Some(_), None) => return Err(bad(line, "opt", "missing while x is present")),
        (None, Some(_)) => return Err(bad(line, "x", "missing while opt is present")),
    };
    Ok(LabeledInstance {
        instance: KnapsackInstance {
            id,
            weights,
            values,
            capacity,
        },
        label,
    })
}

fn bad(line: usize, field: &str, message: &str) -> Error {
    Error::Parse {
        line,
        field: field.into(),
        message: message.into(),
    }
}

fn parse_json(text: &str, line: usize) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| bad(line, "<json>", &e.to_string()))
}

fn field<'a>(value: &'a Value, name: &str, line: usize) -> Result<&'a Value> {
    value.get(name).ok_or_else(|| bad(line, name, "missing"))
}

fn as_u64(value: &Value, line: usize, name: &str) -> Result<u64> {
    value
        .as_u64()
        .ok_or_else(|| bad(line, name, "expected non-negative integer"))
}

fn as_f64(value: &Value, line: usize, name: &str) -> Result<f64> {
    value.as_f64().ok_or_else(|| bad(line, name, "expected number"))
}

fn as_f64_vec(value: &Value, line: usize, name: &str) -> Result<Vec<f64>> {
    value
        .as_array()
        .ok_or_else(|| bad(line, name, "expected array"))?
        .iter()
        .map(|v| as_f64(v, line, name))
        .collect()
}
