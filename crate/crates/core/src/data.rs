//! Arrival streams: the synthetic one-coin generator and replay of real
//! crowdsourcing datasets.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use thiserror::Error;

use crate::learn::{online_learn, LabelMatrix, LearnError, LearnOptions, LearnedCompetences};
use crate::model::{
    ArrivalProcess, ClassifierId, Competence, Label, ModelError, Sample, SampleId, SimConfig, Slot,
};
use crate::utility::weighted_majority;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Samples grouped by arrival slot; `per_slot[t - 1]` holds the arrivals of
/// slot `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalStream {
    per_slot: Vec<Vec<Sample>>,
    pub seed: u64,
}

impl ArrivalStream {
    pub fn new(per_slot: Vec<Vec<Sample>>, seed: u64) -> Self {
        for (i, slot) in per_slot.iter().enumerate() {
            for s in slot {
                assert_eq!(
                    s.arrival,
                    i + 1,
                    "sample {} filed under the wrong slot",
                    s.id
                );
            }
        }
        ArrivalStream { per_slot, seed }
    }

    pub fn horizon(&self) -> Slot {
        self.per_slot.len()
    }

    /// Arrivals of slot `t`; empty outside `1..=horizon`.
    pub fn slot(&self, t: Slot) -> &[Sample] {
        if t == 0 {
            return &[];
        }
        self.per_slot.get(t - 1).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn samples(&self) -> impl Iterator<Item = &Sample> {
        self.per_slot.iter().flatten()
    }

    pub fn n_samples(&self) -> usize {
        self.per_slot.iter().map(Vec::len).sum()
    }

    pub fn max_arrivals(&self) -> usize {
        self.per_slot.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn mean_arrivals(&self) -> f64 {
        if self.per_slot.is_empty() {
            return 0.0;
        }
        self.n_samples() as f64 / self.per_slot.len() as f64
    }

    pub fn mean_weight(&self) -> f64 {
        let n = self.n_samples();
        if n == 0 {
            return 0.0;
        }
        self.samples().map(|s| s.weight).sum::<f64>() / n as f64
    }

    /// Content digest (FNV-1a over every field), used to check that two runs
    /// consumed the same stream.
    pub fn digest(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        for s in self.samples() {
            eat(s.id.0 as u64);
            eat(s.arrival as u64);
            eat(s.weight.to_bits());
            eat(s.true_label.class_id() as u64);
            eat(s.item.map_or(u64::MAX, |i| i as u64));
            for l in s.drawn_labels() {
                eat(l.map_or(0, |l| l.class_id() as u64));
            }
        }
        h
    }

    /// Writes one row per sample: slot, id, item, weight, true label and the
    /// drawn labels as a string of `+`, `-` or `.` (not labelable).
    pub fn write_manifest<W: Write>(&self, out: W) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "slot",
            "sample_id",
            "item",
            "weight",
            "true_label",
            "labels",
        ])?;
        for s in self.samples() {
            let labels: String = s
                .drawn_labels()
                .iter()
                .map(|l| match l {
                    Some(Label::Pos) => '+',
                    Some(Label::Neg) => '-',
                    None => '.',
                })
                .collect();
            w.write_record([
                s.arrival.to_string(),
                s.id.0.to_string(),
                s.item.map_or(String::new(), |i| i.to_string()),
                s.weight.to_string(),
                s.true_label.sign().to_string(),
                labels,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn draw_count<R: Rng>(rng: &mut R, poisson: &Poisson<f64>, cap: Option<usize>) -> usize {
    let n = poisson.sample(rng) as usize;
    cap.map_or(n, |c| n.min(c))
}

/// Generates a Poisson arrival stream for `config`. Each sample's label from
/// every classifier is drawn at creation: correct with probability `p_m`.
pub fn generate_stream(config: &SimConfig) -> Result<ArrivalStream, DataError> {
    config.validate()?;
    let ArrivalProcess::Poisson { rate } = config.arrival else {
        return Err(DataError::Invalid(
            "generate_stream needs a Poisson arrival process".into(),
        ));
    };
    let poisson = Poisson::new(rate).map_err(|e| DataError::Invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut per_slot = Vec::with_capacity(config.horizon);
    let mut next_id = 0;
    for t in 1..=config.horizon {
        let n = draw_count(&mut rng, &poisson, config.max_arrivals_per_slot);
        let mut slot = Vec::with_capacity(n);
        for _ in 0..n {
            let weight = config.weight_support[rng.gen_range(0..config.weight_support.len())];
            let truth = if rng.gen_bool(0.5) {
                Label::Pos
            } else {
                Label::Neg
            };
            let labels = config
                .competences
                .iter()
                .map(|&p| {
                    Some(if rng.gen_bool(p) {
                        truth
                    } else {
                        truth.flipped()
                    })
                })
                .collect();
            slot.push(Sample::new(SampleId(next_id), t, weight, truth, labels)?);
            next_id += 1;
        }
        per_slot.push(slot);
    }
    Ok(ArrivalStream::new(per_slot, config.seed))
}

/// The synthetic experiment stream and its competences.
pub fn gen_synthetic(
    horizon: Slot,
    seed: u64,
) -> Result<(ArrivalStream, Vec<Competence>), DataError> {
    let config = SimConfig::synthetic(horizon, seed);
    let stream = generate_stream(&config)?;
    Ok((stream, config.competence_list()?))
}

/// Labels from a crowdsourcing dataset with dense item and worker ids.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetTable {
    /// Original item ids, indexed by dense id.
    pub items: Vec<String>,
    /// Original worker ids, indexed by dense id.
    pub workers: Vec<String>,
    /// `(item, worker, class)` with dense ids and classes in `1..=k_classes`.
    pub labels: Vec<(usize, usize, u32)>,
    pub k_classes: u32,
    /// Gold class per dense item, when known.
    pub gold: BTreeMap<usize, u32>,
    /// Repeated `(item, worker)` lines ignored while loading.
    pub duplicates: usize,
}

/// Class merge map, e.g. `{1->1, 2->1, 3->2, 4->2}`.
pub type ClassMap = BTreeMap<u32, u32>;

/// The four-to-two class merge used for the DOG data.
pub fn dog_clubbing() -> ClassMap {
    [(1, 1), (2, 1), (3, 2), (4, 2)].into_iter().collect()
}

fn intern(ids: &mut Vec<String>, index: &mut HashMap<String, usize>, key: &str) -> usize {
    if let Some(&i) = index.get(key) {
        return i;
    }
    ids.push(key.to_string());
    index.insert(key.to_string(), ids.len() - 1);
    ids.len() - 1
}

/// Loads whitespace-separated `item worker class` triples; `#` starts a
/// comment line. Ids are remapped densely in order of first appearance.
pub fn load_dataset(path: &Path, clubbing: Option<&ClassMap>) -> Result<DatasetTable, DataError> {
    let file = std::fs::File::open(path)?;
    parse_dataset(BufReader::new(file), &path.display().to_string(), clubbing)
}

pub fn parse_dataset<R: BufRead>(
    reader: R,
    name: &str,
    clubbing: Option<&ClassMap>,
) -> Result<DatasetTable, DataError> {
    let mut items = Vec::new();
    let mut workers = Vec::new();
    let mut item_index = HashMap::new();
    let mut worker_index = HashMap::new();
    let mut seen = std::collections::HashSet::new();
    let mut labels = Vec::new();
    let mut duplicates = 0;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let err = |msg: String| DataError::Parse {
            path: name.to_string(),
            line: i + 1,
            msg,
        };
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(err(format!("expected 3 fields, found {}", fields.len())));
        }
        let raw: u32 = fields[2]
            .parse()
            .map_err(|_| err(format!("bad class id {:?}", fields[2])))?;
        let class = match clubbing {
            Some(map) => *map
                .get(&raw)
                .ok_or_else(|| err(format!("class {raw} missing from the clubbing map")))?,
            None => raw,
        };
        if class == 0 {
            return Err(err("class ids start at 1".into()));
        }
        let item = intern(&mut items, &mut item_index, fields[0]);
        let worker = intern(&mut workers, &mut worker_index, fields[1]);
        if !seen.insert((item, worker)) {
            duplicates += 1;
            continue;
        }
        labels.push((item, worker, class));
    }
    if labels.is_empty() {
        return Err(DataError::Invalid(format!("{name}: no labels")));
    }
    let k_classes = labels.iter().map(|l| l.2).max().unwrap_or(0).max(2);
    Ok(DatasetTable {
        items,
        workers,
        labels,
        k_classes,
        gold: BTreeMap::new(),
        duplicates,
    })
}

impl DatasetTable {
    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn n_workers(&self) -> usize {
        self.workers.len()
    }

    /// Reads `item class` gold pairs keyed by original item id. Unknown items
    /// are skipped; classes go through the same clubbing map.
    pub fn attach_gold(
        &mut self,
        path: &Path,
        clubbing: Option<&ClassMap>,
    ) -> Result<usize, DataError> {
        let index: HashMap<&str, usize> = self
            .items
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut gold = BTreeMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let text = line.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let err = |msg: String| DataError::Parse {
                path: path.display().to_string(),
                line: i + 1,
                msg,
            };
            let fields: Vec<&str> = text.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(err(format!("expected 2 fields, found {}", fields.len())));
            }
            let raw: u32 = fields[1]
                .parse()
                .map_err(|_| err(format!("bad class {:?}", fields[1])))?;
            let class = match clubbing {
                Some(map) => *map
                    .get(&raw)
                    .ok_or_else(|| err(format!("class {raw} not in map")))?,
                None => raw,
            };
            if let Some(&item) = index.get(fields[0]) {
                gold.insert(item, class);
            }
        }
        let n = gold.len();
        self.gold = gold;
        Ok(n)
    }

    /// Keeps the `n` workers with the most labels (ties by dense id), drops
    /// items left unlabeled and re-densifies ids.
    pub fn select_top_workers(&self, n: usize) -> DatasetTable {
        let mut counts = vec![0usize; self.n_workers()];
        for &(_, w, _) in &self.labels {
            counts[w] += 1;
        }
        let mut ranked: Vec<usize> = (0..self.n_workers()).collect();
        ranked.sort_by(|a, b| counts[*b].cmp(&counts[*a]).then(a.cmp(b)));
        let mut kept: Vec<usize> = ranked.into_iter().take(n).collect();
        kept.sort_unstable();
        let worker_map: HashMap<usize, usize> = kept
            .iter()
            .enumerate()
            .map(|(new, &old)| (old, new))
            .collect();
        let mut item_map: BTreeMap<usize, usize> = BTreeMap::new();
        for &(i, w, _) in &self.labels {
            if worker_map.contains_key(&w) {
                item_map.entry(i).or_insert(0);
            }
        }
        for (new, v) in item_map.values_mut().enumerate() {
            *v = new;
        }
        let labels = self
            .labels
            .iter()
            .filter_map(|&(i, w, c)| worker_map.get(&w).map(|&nw| (item_map[&i], nw, c)))
            .collect();
        DatasetTable {
            items: item_map.keys().map(|&i| self.items[i].clone()).collect(),
            workers: kept.iter().map(|&w| self.workers[w].clone()).collect(),
            labels,
            k_classes: self.k_classes,
            gold: self
                .gold
                .iter()
                .filter_map(|(i, c)| item_map.get(i).map(|&ni| (ni, *c)))
                .collect(),
            duplicates: self.duplicates,
        }
    }

    pub fn label_matrix(&self) -> Result<LabelMatrix, DataError> {
        Ok(LabelMatrix::from_triples(
            self.n_items(),
            self.n_workers(),
            self.k_classes,
            self.labels.iter().copied(),
        )?)
    }

    /// Per item, the class each worker gave, indexed by dense worker id.
    pub fn item_rows(&self) -> Vec<Vec<Option<u32>>> {
        let mut rows = vec![vec![None; self.n_workers()]; self.n_items()];
        for &(i, w, c) in &self.labels {
            rows[i][w] = Some(c);
        }
        rows
    }

    /// Dense-to-original id tables as CSV: `kind,dense_id,original_id`.
    pub fn write_remap<W: Write>(&self, out: W) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["kind", "dense_id", "original_id"])?;
        for (i, id) in self.items.iter().enumerate() {
            w.write_record(["item", &i.to_string(), id])?;
        }
        for (i, id) in self.workers.iter().enumerate() {
            w.write_record(["worker", &i.to_string(), id])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Where replayed samples' true labels came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruthSource {
    Gold,
    WeightedMajority,
}

#[derive(Debug, Clone)]
pub struct Replay {
    pub stream: ArrivalStream,
    /// Competences learned from the whole table; the genie's input.
    pub genie: LearnedCompetences,
    pub truth: TruthSource,
}

/// Replays a binary dataset: Poisson(`rate`) arrivals per slot, each an item
/// drawn uniformly with replacement and carrying that item's dataset labels.
/// A worker can label a sample only if the dataset has that (item, worker)
/// label.
pub fn replay_stream(
    table: &DatasetTable,
    horizon: Slot,
    seed: u64,
    rate: f64,
    weight_support: &[f64],
) -> Result<Replay, DataError> {
    if table.k_classes != 2 {
        return Err(DataError::Invalid(format!(
            "replay needs 2 classes, table has {}",
            table.k_classes
        )));
    }
    if weight_support.is_empty() {
        return Err(DataError::Invalid("empty weight support".into()));
    }
    let genie = online_learn(&table.label_matrix()?, &LearnOptions::default())?;
    let rows = table.item_rows();
    let truth = if table.gold.len() == table.n_items() {
        TruthSource::Gold
    } else {
        TruthSource::WeightedMajority
    };
    let item_truth: Vec<Label> = (0..table.n_items())
        .map(|i| match truth {
            TruthSource::Gold => Ok(Label::from_class_id(table.gold[&i]).unwrap_or(Label::Neg)),
            TruthSource::WeightedMajority => {
                let votes: Vec<(ClassifierId, Label)> = rows[i]
                    .iter()
                    .enumerate()
                    .filter_map(|(w, c)| {
                        c.and_then(Label::from_class_id)
                            .map(|l| (ClassifierId(w), l))
                    })
                    .collect();
                weighted_majority(&votes, &genie.p_hat)
                    .map_err(|e| DataError::Invalid(e.to_string()))
            }
        })
        .collect::<Result<_, _>>()?;
    let item_labels: Vec<Vec<Option<Label>>> = rows
        .iter()
        .map(|r| r.iter().map(|c| c.and_then(Label::from_class_id)).collect())
        .collect();

    let poisson = Poisson::new(rate).map_err(|e| DataError::Invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut per_slot = Vec::with_capacity(horizon);
    let mut next_id = 0;
    for t in 1..=horizon {
        let n = draw_count(&mut rng, &poisson, None);
        let mut slot = Vec::with_capacity(n);
        for _ in 0..n {
            let item = rng.gen_range(0..table.n_items());
            let weight = weight_support[rng.gen_range(0..weight_support.len())];
            let s = Sample::new(
                SampleId(next_id),
                t,
                weight,
                item_truth[item],
                item_labels[item].clone(),
            )?
            .with_item(item);
            slot.push(s);
            next_id += 1;
        }
        per_slot.push(slot);
    }
    Ok(Replay {
        stream: ArrivalStream::new(per_slot, seed),
        genie,
        truth,
    })
}
