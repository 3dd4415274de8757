//! Sparse evaluation matrices.
//!
//! A [`ResponseMatrix`] records, for every observed (system, item) pair, the
//! number of successes out of a number of binary trials. Pairs without a cell
//! are unobserved. Trials inside one cell are exchangeable under the 2PL model,
//! so the aggregated counts are sufficient for every likelihood computed here.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Aggregated binary outcomes for one observed (system, item) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub successes: u32,
    pub trials: u32,
}

impl Cell {
    pub fn new(successes: u32, trials: u32) -> Result<Self> {
        if trials == 0 {
            return Err(Error::InvalidMatrix("cell with zero trials".into()));
        }
        if successes > trials {
            return Err(Error::InvalidMatrix(format!(
                "successes ({successes}) exceed trials ({trials})"
            )));
        }
        Ok(Self { successes, trials })
    }

    pub fn rate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }
}

/// Which (system, item) pairs were evaluated. Row-major, systems by items.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ObservationMask {
    n_systems: usize,
    n_items: usize,
    observed: Vec<bool>,
}

impl ObservationMask {
    pub fn full(n_systems: usize, n_items: usize) -> Self {
        Self {
            n_systems,
            n_items,
            observed: vec![true; n_systems * n_items],
        }
    }

    pub fn empty(n_systems: usize, n_items: usize) -> Self {
        Self {
            n_systems,
            n_items,
            observed: vec![false; n_systems * n_items],
        }
    }

    pub fn from_pairs(n_systems: usize, n_items: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut mask = Self::empty(n_systems, n_items);
        for &(j, i) in pairs {
            if j >= n_systems || i >= n_items {
                return Err(Error::Dimension(format!(
                    "pair ({j}, {i}) outside {n_systems}x{n_items} mask"
                )));
            }
            mask.set(j, i, true);
        }
        Ok(mask)
    }

    pub fn n_systems(&self) -> usize {
        self.n_systems
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    #[inline]
    pub fn is_observed(&self, system: usize, item: usize) -> bool {
        self.observed[system * self.n_items + item]
    }

    #[inline]
    pub fn set(&mut self, system: usize, item: usize, observed: bool) {
        self.observed[system * self.n_items + item] = observed;
    }

    pub fn count(&self) -> usize {
        self.observed.iter().filter(|&&o| o).count()
    }

    /// Observed pairs in (system, item) order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        (0..self.n_systems)
            .flat_map(|j| (0..self.n_items).map(move |i| (j, i)))
            .filter(|&(j, i)| self.is_observed(j, i))
            .collect()
    }

    pub fn items_of(&self, system: usize) -> Vec<usize> {
        (0..self.n_items)
            .filter(|&i| self.is_observed(system, i))
            .collect()
    }

    pub fn coverage(&self) -> f64 {
        self.count() as f64 / (self.n_systems * self.n_items) as f64
    }

    pub fn diagnose(&self) -> MaskDiagnostics {
        let count = self.count();
        let total = self.n_systems * self.n_items;
        let min_items_per_system = (0..self.n_systems)
            .map(|j| {
                (0..self.n_items)
                    .filter(|&i| self.is_observed(j, i))
                    .count()
            })
            .min()
            .unwrap_or(0);
        let min_systems_per_item = (0..self.n_items)
            .map(|i| {
                (0..self.n_systems)
                    .filter(|&j| self.is_observed(j, i))
                    .count()
            })
            .min()
            .unwrap_or(0);
        MaskDiagnostics {
            coverage: count as f64 / total as f64,
            sparsity: (total - count) as f64 / total as f64,
            min_items_per_system,
            min_systems_per_item,
            bipartite_connected: self.is_connected(),
        }
    }

    /// Connectivity of the bipartite graph whose edges are observed cells.
    /// Systems are nodes `0..J`, items are nodes `J..J+I`.
    fn is_connected(&self) -> bool {
        let n = self.n_systems + self.n_items;
        if n == 0 {
            return true;
        }
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut components = n;
        for (j, i) in self.pairs() {
            let a = find(&mut parent, j);
            let b = find(&mut parent, self.n_systems + i);
            if a != b {
                parent[a] = b;
                components -= 1;
            }
        }
        components == 1
    }
}

/// Descriptive statistics of an observation mask. Nothing here is enforced;
/// the fitting code checks the counts and connectivity itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaskDiagnostics {
    pub coverage: f64,
    pub sparsity: f64,
    pub min_items_per_system: usize,
    pub min_systems_per_item: usize,
    pub bipartite_connected: bool,
}

impl MaskDiagnostics {
    /// Observation-design requirements for a stable 2PL fit.
    pub fn meets(&self, min_items_per_system: usize, min_systems_per_item: usize) -> Result<()> {
        if self.min_items_per_system < min_items_per_system {
            return Err(Error::Precondition(format!(
                "a system is observed on {} item(s); at least {} required",
                self.min_items_per_system, min_items_per_system
            )));
        }
        if self.min_systems_per_item < min_systems_per_item {
            return Err(Error::Precondition(format!(
                "an item is observed for {} system(s); at least {} required",
                self.min_systems_per_item, min_systems_per_item
            )));
        }
        if !self.bipartite_connected {
            return Err(Error::Precondition(
                "observation graph between systems and items is disconnected".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMatrix {
    n_systems: usize,
    n_items: usize,
    cells: Vec<Option<Cell>>,
    system_labels: Vec<String>,
    item_labels: Vec<String>,
}

impl ResponseMatrix {
    /// Builds a matrix from `(system, item, cell)` triples; repeated pairs are rejected.
    pub fn new(
        system_labels: Vec<String>,
        item_labels: Vec<String>,
        cells: impl IntoIterator<Item = (usize, usize, Cell)>,
    ) -> Result<Self> {
        let n_systems = system_labels.len();
        let n_items = item_labels.len();
        if n_systems < 2 || n_items < 2 {
            return Err(Error::InvalidMatrix(format!(
                "need at least 2 systems and 2 items, got {n_systems}x{n_items}"
            )));
        }
        let mut store = vec![None; n_systems * n_items];
        for (j, i, cell) in cells {
            if j >= n_systems || i >= n_items {
                return Err(Error::Dimension(format!(
                    "cell ({j}, {i}) outside {n_systems}x{n_items} matrix"
                )));
            }
            // Re-validate: fields are public.
            let cell = Cell::new(cell.successes, cell.trials)?;
            let slot = &mut store[j * n_items + i];
            if slot.is_some() {
                return Err(Error::InvalidMatrix(format!(
                    "duplicate cell ({}, {})",
                    system_labels[j], item_labels[i]
                )));
            }
            *slot = Some(cell);
        }
        Ok(Self {
            n_systems,
            n_items,
            cells: store,
            system_labels,
            item_labels,
        })
    }

    /// Matrix with generic labels `S0..`, `I0..`.
    pub fn unlabeled(
        n_systems: usize,
        n_items: usize,
        cells: impl IntoIterator<Item = (usize, usize, Cell)>,
    ) -> Result<Self> {
        Self::new(
            (0..n_systems).map(|j| format!("S{j}")).collect(),
            (0..n_items).map(|i| format!("I{i}")).collect(),
            cells,
        )
    }

    pub fn n_systems(&self) -> usize {
        self.n_systems
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn system_labels(&self) -> &[String] {
        &self.system_labels
    }

    pub fn item_labels(&self) -> &[String] {
        &self.item_labels
    }

    #[inline]
    pub fn get(&self, system: usize, item: usize) -> Option<Cell> {
        self.cells[system * self.n_items + item]
    }

    /// Observed cells in (system, item) order.
    pub fn observed(&self) -> impl Iterator<Item = (usize, usize, Cell)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter_map(move |(k, c)| c.map(|cell| (k / self.n_items, k % self.n_items, cell)))
    }

    pub fn n_observed(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    pub fn mask(&self) -> ObservationMask {
        ObservationMask {
            n_systems: self.n_systems,
            n_items: self.n_items,
            observed: self.cells.iter().map(Option::is_some).collect(),
        }
    }

    pub fn coverage(&self) -> f64 {
        self.n_observed() as f64 / (self.n_systems * self.n_items) as f64
    }

    pub fn diagnose(&self) -> MaskDiagnostics {
        self.mask().diagnose()
    }

    /// Same data with systems reordered: row `k` of the result is row `order[k]` here.
    pub fn permute_systems(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.n_systems {
            return Err(Error::Dimension("permutation length".into()));
        }
        let labels = order
            .iter()
            .map(|&j| self.system_labels[j].clone())
            .collect();
        let cells: Vec<_> = order
            .iter()
            .enumerate()
            .flat_map(|(k, &j)| {
                (0..self.n_items).filter_map(move |i| self.get(j, i).map(|c| (k, i, c)))
            })
            .collect();
        Self::new(labels, self.item_labels.clone(), cells)
    }

    /// Writes the long-format CSV, rows sorted by (system index, item index).
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["system", "item", "successes", "trials"])
            .map_err(csv_io)?;
        for (j, i, cell) in self.observed() {
            w.write_record([
                self.system_labels[j].as_str(),
                self.item_labels[i].as_str(),
                &cell.successes.to_string(),
                &cell.trials.to_string(),
            ])
            .map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Parses the long-format CSV (`system,item,successes,trials`). Labels are
    /// indexed in order of first appearance; unlisted pairs are unobserved.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);

        let headers = rdr.headers().map_err(csv_parse)?.clone();
        let expected = ["system", "item", "successes", "trials"];
        if headers.len() != 4 || headers.iter().zip(expected).any(|(h, e)| h != e) {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header `{}`", expected.join(",")),
            });
        }

        let mut systems: Vec<String> = Vec::new();
        let mut items: Vec<String> = Vec::new();
        let mut system_index: HashMap<String, usize> = HashMap::new();
        let mut item_index: HashMap<String, usize> = HashMap::new();
        let mut seen: HashMap<(usize, usize), u64> = HashMap::new();
        let mut cells = Vec::new();

        for record in rdr.records() {
            let record = record.map_err(csv_parse)?;
            let line = record.position().map_or(0, |p| p.line());
            let field = |k: usize| record.get(k).unwrap_or("");
            if field(0).is_empty() || field(1).is_empty() {
                return Err(Error::Parse {
                    line,
                    message: "empty system or item label".into(),
                });
            }
            let count = |k: usize, name: &str| -> Result<u32> {
                field(k).parse::<u32>().map_err(|_| Error::Parse {
                    line,
                    message: format!("`{}` is not a valid {name} count", field(k)),
                })
            };
            let successes = count(2, "successes")?;
            let trials = count(3, "trials")?;
            let cell = Cell::new(successes, trials).map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?;

            let j = *system_index.entry(field(0).to_string()).or_insert_with(|| {
                systems.push(field(0).to_string());
                systems.len() - 1
            });
            let i = *item_index.entry(field(1).to_string()).or_insert_with(|| {
                items.push(field(1).to_string());
                items.len() - 1
            });
            if let Some(first) = seen.insert((j, i), line) {
                return Err(Error::Parse {
                    line,
                    message: format!(
                        "duplicate row for ({}, {}); first seen on line {first}",
                        systems[j], items[i]
                    ),
                });
            }
            cells.push((j, i, cell));
        }
        Self::new(systems, items, cells)
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn csv_parse(e: csv::Error) -> Error {
    Error::Parse {
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    }
}

pub fn coverage(matrix: &ResponseMatrix) -> f64 {
    matrix.coverage()
}

/// Range of item difficulties, `max b - min b`.
pub fn difficulty_gap(difficulties: &[f64]) -> Result<f64> {
    if difficulties.is_empty() {
        return Err(Error::InvalidParameter(
            "difficulty gap of an empty item set".into(),
        ));
    }
    let (lo, hi) = difficulties
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &b| {
            (lo.min(b), hi.max(b))
        });
    Ok(hi - lo)
}

/// Coefficient of variation (population std / mean) of per-item pooled success rates.
pub fn estimate_difficulty_heterogeneity(matrix: &ResponseMatrix) -> Result<f64> {
    let mut totals = vec![(0u64, 0u64); matrix.n_items()];
    for (_, i, cell) in matrix.observed() {
        totals[i].0 += cell.successes as u64;
        totals[i].1 += cell.trials as u64;
    }
    let mut rates = Vec::with_capacity(totals.len());
    for (i, &(s, t)) in totals.iter().enumerate() {
        if t == 0 {
            return Err(Error::Degenerate(format!(
                "item `{}` has no observed cells",
                matrix.item_labels()[i]
            )));
        }
        rates.push(s as f64 / t as f64);
    }
    let n = rates.len() as f64;
    let mean = rates.iter().sum::<f64>() / n;
    if mean <= 0.0 {
        return Err(Error::Degenerate("every observed trial failed".into()));
    }
    let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    Ok(var.sqrt() / mean)
}

pub fn diagnose_mask(matrix: &ResponseMatrix) -> MaskDiagnostics {
    matrix.diagnose()
}

pub fn load_matrix_csv<R: Read>(reader: R) -> Result<ResponseMatrix> {
    ResponseMatrix::read_csv(reader)
}

pub fn save_matrix_csv<W: Write>(matrix: &ResponseMatrix, writer: W) -> Result<()> {
    matrix.write_csv(writer)
}
