//! Synthetic evaluation data: 2PL response sampling, the four domain designs,
//! and MCAR / difficulty-biased observation masks.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::irt::{sigmoid, ItemParameterSet};
use crate::matrix::{Cell, ObservationMask, ResponseMatrix};

pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable mixing of a master seed with work-unit coordinates.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(master), |acc, &p| {
        splitmix64(acc ^ splitmix64(p))
    })
}

/// Draws `Binomial(K, sigmoid(a (theta - b)))` successes for each observed cell.
pub fn generate_responses(
    theta: &[f64],
    items: &ItemParameterSet,
    mask: &ObservationMask,
    trials: u32,
    seed: u64,
) -> Result<ResponseMatrix> {
    if trials == 0 {
        return Err(Error::InvalidParameter(
            "trials per cell must be >= 1".into(),
        ));
    }
    if theta.len() != mask.n_systems() || items.len() != mask.n_items() {
        return Err(Error::Dimension(format!(
            "truth is {}x{} but mask is {}x{}",
            theta.len(),
            items.len(),
            mask.n_systems(),
            mask.n_items()
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut cells = Vec::with_capacity(mask.count());
    for (j, i) in mask.pairs() {
        let p = sigmoid(items.a(i) * (theta[j] - items.b(i)));
        let dist =
            Binomial::new(trials as u64, p).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let s = dist.sample(&mut rng) as u32;
        cells.push((j, i, Cell::new(s, trials)?));
    }
    ResponseMatrix::unlabeled(mask.n_systems(), mask.n_items(), cells)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskConstraints {
    pub min_items_per_system: usize,
    pub min_systems_per_item: usize,
    pub max_attempts: usize,
}

impl Default for MaskConstraints {
    fn default() -> Self {
        Self {
            min_items_per_system: 2,
            min_systems_per_item: 3,
            max_attempts: 1000,
        }
    }
}

impl MaskConstraints {
    fn accepts(&self, mask: &ObservationMask) -> bool {
        let d = mask.diagnose();
        d.min_items_per_system >= self.min_items_per_system
            && d.min_systems_per_item >= self.min_systems_per_item
            && d.bipartite_connected
    }

    fn check_feasible(&self, n_systems: usize, n_items: usize, target: usize) -> Result<()> {
        let needed =
            (self.min_items_per_system * n_systems).max(self.min_systems_per_item * n_items);
        if target < needed
            || self.min_items_per_system > n_items
            || self.min_systems_per_item > n_systems
        {
            return Err(Error::MaskGeneration {
                attempts: 0,
                reason: format!(
                    "{target} observed cells cannot give every system {} items and every item {} systems in a {n_systems}x{n_items} design",
                    self.min_items_per_system, self.min_systems_per_item
                ),
            });
        }
        Ok(())
    }
}

fn observed_target(n_systems: usize, n_items: usize, sparsity: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&sparsity) {
        return Err(Error::InvalidParameter(format!(
            "sparsity {sparsity} outside [0, 1)"
        )));
    }
    Ok(((1.0 - sparsity) * (n_systems * n_items) as f64).round() as usize)
}

/// One attempt at a constrained random fill: rows in `free` get cells, rows not
/// in `free` keep what `base` has. Each item first receives enough free systems
/// to reach its minimum, each free system enough items, then the remaining budget
/// is spread uniformly over unobserved free cells. Every step is symmetric in
/// system and item labels, so no cell is favored over another.
fn constrained_fill(
    base: &ObservationMask,
    free: &[usize],
    target: usize,
    c: &MaskConstraints,
    rng: &mut SimRng,
) -> Option<ObservationMask> {
    let (n_sys, n_items) = (base.n_systems(), base.n_items());
    let mut mask = base.clone();

    let mut items: Vec<usize> = (0..n_items).collect();
    items.shuffle(rng);
    for &i in &items {
        let have = (0..n_sys).filter(|&j| mask.is_observed(j, i)).count();
        if have >= c.min_systems_per_item {
            continue;
        }
        let mut open: Vec<usize> = free
            .iter()
            .copied()
            .filter(|&j| !mask.is_observed(j, i))
            .collect();
        if open.len() < c.min_systems_per_item - have {
            return None;
        }
        open.shuffle(rng);
        for &j in &open[..c.min_systems_per_item - have] {
            mask.set(j, i, true);
        }
    }

    let mut rows = free.to_vec();
    rows.shuffle(rng);
    for &j in &rows {
        let have = mask.items_of(j).len();
        if have >= c.min_items_per_system {
            continue;
        }
        let mut open: Vec<usize> = (0..n_items).filter(|&i| !mask.is_observed(j, i)).collect();
        open.shuffle(rng);
        for &i in &open[..c.min_items_per_system - have] {
            mask.set(j, i, true);
        }
    }

    let count = mask.count();
    if count > target {
        return None;
    }
    let mut open: Vec<(usize, usize)> = free
        .iter()
        .flat_map(|&j| (0..n_items).map(move |i| (j, i)))
        .filter(|&(j, i)| !mask.is_observed(j, i))
        .collect();
    if open.len() < target - count {
        return None;
    }
    open.shuffle(rng);
    for &(j, i) in &open[..target - count] {
        mask.set(j, i, true);
    }
    c.accepts(&mask).then_some(mask)
}

/// Uniformly placed missing cells at the requested sparsity, subject to the constraints.
pub fn make_mcar_mask(
    n_systems: usize,
    n_items: usize,
    sparsity: f64,
    constraints: &MaskConstraints,
    seed: u64,
) -> Result<ObservationMask> {
    let target = observed_target(n_systems, n_items, sparsity)?;
    constraints.check_feasible(n_systems, n_items, target)?;
    let mut rng = rng_from_seed(seed);
    let free: Vec<usize> = (0..n_systems).collect();
    let base = ObservationMask::empty(n_systems, n_items);
    for _ in 0..constraints.max_attempts {
        if let Some(mask) = constrained_fill(&base, &free, target, constraints, &mut rng) {
            return Ok(mask);
        }
    }
    Err(Error::MaskGeneration {
        attempts: constraints.max_attempts,
        reason: format!("MCAR mask at sparsity {sparsity}"),
    })
}

/// Draws `k` distinct indices with probability proportional to `weights`, sequentially.
fn weighted_sample_without_replacement(weights: &[f64], k: usize, rng: &mut SimRng) -> Vec<usize> {
    let mut w = weights.to_vec();
    let mut picked = Vec::with_capacity(k);
    for _ in 0..k.min(w.len()) {
        let total: f64 = w.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut choice = w.iter().rposition(|&x| x > 0.0).unwrap_or(0);
        for (idx, &x) in w.iter().enumerate() {
            if x <= 0.0 {
                continue;
            }
            if u < x {
                choice = idx;
                break;
            }
            u -= x;
        }
        picked.push(choice);
        w[choice] = 0.0;
    }
    picked
}

/// Missingness tied to ability and difficulty: systems in the lower half by
/// true ability tend to lose their hardest items, the upper half their easiest.
///
/// Each system drops its share of `round(S J I)` missing cells (an even split,
/// with the remainder assigned to randomly chosen systems). Drops are drawn
/// without replacement with weight equal to the item's rank counted from the favored end of the
/// difficulty order. Item minimums are then repaired by swapping a system's kept
/// item for a missing one, choosing swaps in proportion to how strongly the
/// system prefers to drop the item it gives up. Disconnected masks are redrawn.
pub fn make_biased_mask(
    abilities: &[f64],
    difficulties: &[f64],
    sparsity: f64,
    constraints: &MaskConstraints,
    seed: u64,
) -> Result<ObservationMask> {
    let n_sys = abilities.len();
    let n_items = difficulties.len();
    let target = observed_target(n_sys, n_items, sparsity)?;
    constraints.check_feasible(n_sys, n_items, target)?;
    let n_drop = n_sys * n_items - target;
    let base_drop = n_drop / n_sys;
    let extra = n_drop % n_sys;
    if base_drop + usize::from(extra > 0) + constraints.min_items_per_system > n_items {
        return Err(Error::MaskGeneration {
            attempts: 0,
            reason: format!("sparsity {sparsity} leaves a system below its item minimum"),
        });
    }

    let ability_order = order_by(abilities);
    let low_half: Vec<bool> = {
        let mut low = vec![false; n_sys];
        for &j in &ability_order[..n_sys / 2] {
            low[j] = true;
        }
        low
    };
    // Rank 1 = easiest item.
    let difficulty_rank: Vec<usize> = {
        let mut rank = vec![0; n_items];
        for (r, &i) in order_by(difficulties).iter().enumerate() {
            rank[i] = r + 1;
        }
        rank
    };
    let drop_weight = |j: usize, i: usize| -> f64 {
        let r = if low_half[j] {
            difficulty_rank[i]
        } else {
            n_items + 1 - difficulty_rank[i]
        };
        r as f64
    };

    let mut rng = rng_from_seed(seed);
    for _ in 0..constraints.max_attempts {
        let mut systems: Vec<usize> = (0..n_sys).collect();
        systems.shuffle(&mut rng);
        let mut drops = vec![base_drop; n_sys];
        for &j in &systems[..extra] {
            drops[j] += 1;
        }

        let mut mask = ObservationMask::full(n_sys, n_items);
        for (j, &n_drop) in drops.iter().enumerate() {
            let weights: Vec<f64> = (0..n_items).map(|i| drop_weight(j, i)).collect();
            for i in weighted_sample_without_replacement(&weights, n_drop, &mut rng) {
                mask.set(j, i, false);
            }
        }

        if !repair_item_minimum(
            &mut mask,
            constraints.min_systems_per_item,
            &drop_weight,
            &mut rng,
        ) {
            continue;
        }
        if constraints.accepts(&mask) {
            return Ok(mask);
        }
    }
    Err(Error::MaskGeneration {
        attempts: constraints.max_attempts,
        reason: format!("biased mask at sparsity {sparsity}"),
    })
}

fn repair_item_minimum(
    mask: &mut ObservationMask,
    min_systems: usize,
    drop_weight: &impl Fn(usize, usize) -> f64,
    rng: &mut SimRng,
) -> bool {
    let (n_sys, n_items) = (mask.n_systems(), mask.n_items());
    let column =
        |mask: &ObservationMask, i: usize| (0..n_sys).filter(|&j| mask.is_observed(j, i)).count();
    for _ in 0..n_sys * n_items {
        let Some(short) = (0..n_items).find(|&i| column(mask, i) < min_systems) else {
            return true;
        };
        let counts: Vec<usize> = (0..n_items).map(|i| column(mask, i)).collect();
        let mut candidates = Vec::new();
        let mut weights = Vec::new();
        for j in (0..n_sys).filter(|&j| !mask.is_observed(j, short)) {
            for donor in (0..n_items).filter(|&i| mask.is_observed(j, i) && counts[i] > min_systems)
            {
                candidates.push((j, donor));
                weights.push(drop_weight(j, donor) / drop_weight(j, short));
            }
        }
        if candidates.is_empty() {
            return false;
        }
        let pick = weighted_sample_without_replacement(&weights, 1, rng)[0];
        let (j, donor) = candidates[pick];
        mask.set(j, donor, false);
        mask.set(j, short, true);
    }
    false
}

/// Indices sorted by ascending value (stable).
fn order_by(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    idx
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![(lo + hi) / 2.0],
        _ => (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Discrimination used for every grid-sweep item.
pub const SWEEP_DISCRIMINATION: f64 = 1.5;

/// Grid-sweep truth: difficulties evenly spaced on `[-D/2, D/2]`, abilities on `[-2, 2]`.
pub fn sweep_truth(
    gap: f64,
    n_systems: usize,
    n_items: usize,
) -> Result<(Vec<f64>, ItemParameterSet)> {
    if !(gap > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "difficulty gap must be > 0, got {gap}"
        )));
    }
    let theta = linspace(-2.0, 2.0, n_systems);
    let b = linspace(-gap / 2.0, gap / 2.0, n_items);
    let items = ItemParameterSet::new(&vec![SWEEP_DISCRIMINATION; n_items], &b)?;
    Ok((theta, items))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Nlp,
    Clinical,
    Av,
    Cyber,
}

impl Domain {
    pub const ALL: [Domain; 4] = [Domain::Nlp, Domain::Clinical, Domain::Av, Domain::Cyber];

    pub fn key(self) -> &'static str {
        match self {
            Domain::Nlp => "nlp",
            Domain::Clinical => "clinical",
            Domain::Av => "av",
            Domain::Cyber => "cyber",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Domain::Nlp => "NLP (GLUE)",
            Domain::Clinical => "Clinical Trials",
            Domain::Av => "AV Safety",
            Domain::Cyber => "Cybersecurity",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nlp" | "glue" => Ok(Domain::Nlp),
            "clinical" => Ok(Domain::Clinical),
            "av" => Ok(Domain::Av),
            "cyber" | "cybersecurity" => Ok(Domain::Cyber),
            other => Err(Error::InvalidParameter(format!(
                "unknown domain `{other}` (expected nlp, clinical, av, cyber)"
            ))),
        }
    }
}

/// A named system whose placement the experiment tracks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecialSystem {
    pub role: SpecialRole,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecialRole {
    /// Best true ability, observed only on hard items.
    TrueBest,
    /// Mediocre true ability, observed only on easy items.
    Fake,
    Tracked,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainConfig {
    pub domain: Domain,
    pub system_labels: Vec<String>,
    pub theta_true: Vec<f64>,
    pub item_labels: Vec<String>,
    pub items: ItemParameterSet,
    pub mask: ObservationMask,
    pub trials: u32,
    pub special: Vec<SpecialSystem>,
}

impl DomainConfig {
    pub fn special(&self, role: SpecialRole) -> Option<usize> {
        self.special
            .iter()
            .find(|s| s.role == role)
            .map(|s| s.index)
    }

    pub fn system_index(&self, label: &str) -> Option<usize> {
        self.system_labels.iter().position(|l| l == label)
    }

    /// Sampled responses with this domain's labels attached.
    pub fn generate(&self, seed: u64) -> Result<ResponseMatrix> {
        let raw = generate_responses(&self.theta_true, &self.items, &self.mask, self.trials, seed)?;
        ResponseMatrix::new(
            self.system_labels.clone(),
            self.item_labels.clone(),
            raw.observed().collect::<Vec<_>>(),
        )
    }

    pub fn to_json(&self) -> DomainConfigJson {
        DomainConfigJson {
            name: self.domain.key().to_string(),
            systems: self.system_labels.clone(),
            theta_true: self.theta_true.clone(),
            items: self
                .item_labels
                .iter()
                .enumerate()
                .map(|(i, label)| ItemTruth {
                    label: label.clone(),
                    a: self.items.a(i),
                    b: self.items.b(i),
                })
                .collect(),
            mask: self.mask.pairs(),
            trials: self.trials,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemTruth {
    pub label: String,
    pub a: f64,
    pub b: f64,
}

/// Auditable JSON form of a domain design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainConfigJson {
    pub name: String,
    pub systems: Vec<String>,
    pub theta_true: Vec<f64>,
    pub items: Vec<ItemTruth>,
    pub mask: Vec<(usize, usize)>,
    pub trials: u32,
}

struct DomainSpec {
    systems: &'static [&'static str],
    theta: &'static [f64],
    items: &'static [(&'static str, f64, f64)],
    trials: u32,
    coverage: f64,
    /// (system, items observed) rows fixed by design.
    fixed_rows: &'static [(usize, &'static [usize])],
    special: &'static [(SpecialRole, usize)],
    mask_seed: u64,
}

const NLP: DomainSpec = DomainSpec {
    systems: &[
        "ELMo",
        "GPT",
        "BERT-Base",
        "BERT-Large",
        "XLNet",
        "SpanBERT",
        "RoBERTa",
        "ALBERT",
        "ELECTRA",
        "StructBERT",
        "T5",
        "DeBERTa",
    ],
    // Evenly spaced on [-1.5, 2.0] in leaderboard order.
    theta: &[
        -1.5,
        -1.181_818_181_818_181_8,
        -0.863_636_363_636_363_6,
        -0.545_454_545_454_545_4,
        -0.227_272_727_272_727_2,
        0.090_909_090_909_090_9,
        0.409_090_909_090_909_1,
        0.727_272_727_272_727_2,
        1.045_454_545_454_545_4,
        1.363_636_363_636_363_6,
        1.681_818_181_818_181_8,
        2.0,
    ],
    items: &[
        ("SST-2", 1.08, -0.72),
        ("QQP", 1.45, -0.55),
        ("MNLI", 2.10, -0.20),
        ("QNLI", 1.85, -0.10),
        ("STS-B", 1.60, 0.15),
        ("MRPC", 1.95, 0.30),
        ("RTE", 2.50, 0.65),
        ("CoLA", 3.21, 0.89),
    ],
    trials: 500,
    coverage: 1.0,
    fixed_rows: &[],
    special: &[],
    mask_seed: 0,
};

const CLINICAL: DomainSpec = DomainSpec {
    systems: &[
        "True Miracle Drug",
        "Drug 2",
        "Drug 3",
        "Drug 4",
        "Drug 5",
        "Drug 6",
        "Drug 7",
        "Drug 8",
        "Fake Miracle Drug",
        "Drug 10",
    ],
    theta: &[2.0, 1.5, 1.2, 0.9, 0.6, 0.3, 0.1, -0.05, -0.2, -1.5],
    items: &[
        ("Community Clinic A", 1.20, -1.00),
        ("Community Clinic B", 1.50, -0.50),
        ("Regional Hospital C", 2.00, 0.00),
        ("Teaching Hospital D", 2.50, 0.50),
        ("Specialty Center E", 2.80, 1.00),
        ("ICU / Severe Ward F", 3.00, 1.50),
    ],
    trials: 200,
    coverage: 0.65,
    fixed_rows: &[(8, &[0, 1, 2]), (0, &[2, 3, 4, 5])],
    special: &[(SpecialRole::TrueBest, 0), (SpecialRole::Fake, 8)],
    mask_seed: CLINICAL_MASK_SEED,
};

const AV: DomainSpec = DomainSpec {
    systems: &[
        "True Safe AV",
        "AV 2",
        "AV 3",
        "AV 4",
        "AV 5",
        "AV 6",
        "AV 7",
        "Fake Safe AV",
        "AV 9",
        "AV 10",
    ],
    theta: &[2.0, 1.4, 1.0, 0.7, 0.4, 0.1, -0.1, -0.3, -0.8, -1.5],
    items: &[
        ("Sunny Suburb", 1.56, -1.50),
        ("Clear Urban Day", 2.10, -0.50),
        ("Rainy Highway", 2.45, 0.20),
        ("Dense Urban Night", 3.69, 0.50),
        ("Fog / Construction", 2.90, 0.75),
        ("Snowy Intersection", 2.50, 1.00),
    ],
    trials: 1000,
    coverage: 0.60,
    fixed_rows: &[(7, &[0, 1, 2]), (0, &[2, 3, 4, 5])],
    special: &[(SpecialRole::TrueBest, 0), (SpecialRole::Fake, 7)],
    mask_seed: AV_MASK_SEED,
};

const CYBER: DomainSpec = DomainSpec {
    systems: &[
        "True Secure",
        "DeepScan AI",
        "Enterprise Shield",
        "Product 4",
        "Product 5",
        "Product 6",
        "Fake Secure",
        "Product 8",
    ],
    theta: &[2.0, 1.4, 1.1, 0.7, 0.4, 0.0, -0.5, -1.2],
    items: &[
        ("Port Scan", 1.00, -1.50),
        ("DDoS", 1.50, -0.80),
        ("Basic Phishing", 1.80, -0.30),
        ("Ransomware", 2.50, 0.50),
        ("Zero-Day Exploit", 3.00, 1.20),
        ("Nation-State APT", 3.50, 2.00),
    ],
    trials: 500,
    coverage: 0.67,
    fixed_rows: &[(6, &[0, 1, 2]), (0, &[2, 3, 4, 5])],
    special: &[
        (SpecialRole::TrueBest, 0),
        (SpecialRole::Fake, 6),
        (SpecialRole::Tracked, 1),
        (SpecialRole::Tracked, 2),
    ],
    mask_seed: CYBER_MASK_SEED,
};

const CLINICAL_MASK_SEED: u64 = 20;
const AV_MASK_SEED: u64 = 283;
const CYBER_MASK_SEED: u64 = 212;

fn spec(domain: Domain) -> &'static DomainSpec {
    match domain {
        Domain::Nlp => &NLP,
        Domain::Clinical => &CLINICAL,
        Domain::Av => &AV,
        Domain::Cyber => &CYBER,
    }
}

/// Builds a domain's design using its fixed mask seed.
pub fn domain_config(domain: Domain) -> DomainConfig {
    domain_config_with_mask_seed(domain, spec(domain).mask_seed)
        .expect("built-in domain designs are feasible")
}

/// Like [`domain_config`] but with the random rows drawn from `mask_seed`.
pub fn domain_config_with_mask_seed(domain: Domain, mask_seed: u64) -> Result<DomainConfig> {
    let s = spec(domain);
    let n_sys = s.systems.len();
    let n_items = s.items.len();
    let a: Vec<f64> = s.items.iter().map(|t| t.1).collect();
    let b: Vec<f64> = s.items.iter().map(|t| t.2).collect();

    let mask = if s.fixed_rows.is_empty() {
        ObservationMask::full(n_sys, n_items)
    } else {
        let mut base = ObservationMask::empty(n_sys, n_items);
        for &(j, row) in s.fixed_rows {
            for &i in row {
                base.set(j, i, true);
            }
        }
        let free: Vec<usize> = (0..n_sys)
            .filter(|j| !s.fixed_rows.iter().any(|(f, _)| f == j))
            .collect();
        let target = (s.coverage * (n_sys * n_items) as f64).round() as usize;
        let constraints = MaskConstraints::default();
        let mut rng = rng_from_seed(derive_seed(mask_seed, &[domain as u64]));
        let mut found = None;
        for _ in 0..constraints.max_attempts {
            if let Some(m) = constrained_fill(&base, &free, target, &constraints, &mut rng) {
                found = Some(m);
                break;
            }
        }
        found.ok_or_else(|| Error::MaskGeneration {
            attempts: constraints.max_attempts,
            reason: format!("{domain} domain mask"),
        })?
    };

    Ok(DomainConfig {
        domain,
        system_labels: s.systems.iter().map(|l| l.to_string()).collect(),
        theta_true: s.theta.to_vec(),
        item_labels: s.items.iter().map(|t| t.0.to_string()).collect(),
        items: ItemParameterSet::new(&a, &b)?,
        mask,
        trials: s.trials,
        special: s
            .special
            .iter()
            .map(|&(role, index)| SpecialSystem { role, index })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ_and_repeat() {
        assert_eq!(derive_seed(42, &[1, 2]), derive_seed(42, &[1, 2]));
        assert_ne!(derive_seed(42, &[1, 2]), derive_seed(42, &[2, 1]));
        assert_ne!(derive_seed(42, &[0]), derive_seed(43, &[0]));
    }

    #[test]
    fn sweep_truth_spacing() {
        let (theta, items) = sweep_truth(1.0, 10, 10).unwrap();
        assert!((items.b(0) + 0.5).abs() < 1e-12);
        assert!((items.b(9) - 0.5).abs() < 1e-12);
        assert!((items.b(1) - items.b(0) - 1.0 / 9.0).abs() < 1e-12);
        assert_eq!(theta[0], -2.0);
        assert_eq!(theta[9], 2.0);
        assert!((items.a(3) - 1.5).abs() < 1e-12);
        let (_, items) = sweep_truth(5.0, 10, 10).unwrap();
        assert!((crate::matrix::difficulty_gap(items.difficulty()).unwrap() - 5.0).abs() < 1e-12);
        assert!(sweep_truth(0.0, 10, 10).is_err());
    }

    #[test]
    fn mcar_counts() {
        let c = MaskConstraints::default();
        assert_eq!(
            make_mcar_mask(10, 10, 0.0, &c, 3).unwrap(),
            ObservationMask::full(10, 10)
        );
        let m = make_mcar_mask(10, 10, 0.5, &c, 3).unwrap();
        assert_eq!(m.count(), 50);
        assert!(c.accepts(&m));
        let m = make_mcar_mask(10, 10, 0.7, &c, 9).unwrap();
        assert_eq!(m.count(), 30);
        assert!(c.accepts(&m));
        assert!(matches!(
            make_mcar_mask(10, 10, 0.75, &c, 1),
            Err(Error::MaskGeneration { attempts: 0, .. })
        ));
    }

    #[test]
    fn biased_mask_at_zero_is_full() {
        let (theta, items) = sweep_truth(3.0, 10, 10).unwrap();
        let c = MaskConstraints::default();
        let m = make_biased_mask(&theta, items.difficulty(), 0.0, &c, 5).unwrap();
        assert_eq!(m, ObservationMask::full(10, 10));
    }

    #[test]
    fn biased_mask_hits_extreme_sparsity() {
        let (theta, items) = sweep_truth(5.0, 10, 10).unwrap();
        let c = MaskConstraints::default();
        for seed in 0..20 {
            let m = make_biased_mask(&theta, items.difficulty(), 0.7, &c, seed).unwrap();
            assert_eq!(m.count(), 30);
            assert!(c.accepts(&m));
        }
    }

    #[test]
    fn weighted_sampling_is_distinct() {
        let mut rng = rng_from_seed(0);
        let picks = weighted_sample_without_replacement(&[1.0, 4.0, 9.0, 16.0], 3, &mut rng);
        let mut sorted = picks.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 3);
    }

    #[test]
    fn domain_parse() {
        assert_eq!("NLP".parse::<Domain>().unwrap(), Domain::Nlp);
        assert!("finance".parse::<Domain>().is_err());
    }
}
