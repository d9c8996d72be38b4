//! Synthetic net generation, labeled dataset files and netlist ingestion.
//!
//! Dataset files are JSON lines. The first line is a `#` comment describing
//! the generator; every other line is one [`DatasetRecord`]. The plain net
//! format accepted by [`parse_netlist`] is the same shape with only `id` and
//! `pins` required, so dataset files double as net lists.
//!
//! The Bookshelf subset understood here:
//!
//! ```text
//! # design.nets                     # design.pl
//! NumNets : 2                       a  10 20 : N
//! NetDegree : 3 n1                  b  40 20 : N
//!   a I : 0.5 1.0                   c  40 60 : N /FIXED
//!   b O
//!   c I
//! NetDegree : 2 n2
//!   a O
//!   c I
//! ```
//!
//! A pin sits at its node's `.pl` location plus the optional offset, rounded
//! to the nearest integer. Header lines (`UCLA`, `Num...`) and `#` comments
//! are skipped.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dedupe_pins, Length, Net, Point};
use crate::oracle::{label_sample, ExactBudget, Provenance};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_EXTENT: i64 = 1000;
pub const MIN_DEGREE: usize = 3;
pub const MAX_DEGREE: usize = 64;

/// How pins are scattered over the `extent x extent` square.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum PinDistribution {
    Uniform,
    /// Pins drawn around `clusters` uniformly placed centres, each
    /// coordinate offset uniformly in `[-spread, spread]` and clamped.
    Clustered { clusters: usize, spread: i64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub degrees: RangeInclusive<usize>,
    pub extent: i64,
    pub distribution: PinDistribution,
}

impl SynthConfig {
    pub fn uniform(degrees: RangeInclusive<usize>) -> Self {
        SynthConfig { degrees, extent: DEFAULT_EXTENT, distribution: PinDistribution::Uniform }
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = (*self.degrees.start(), *self.degrees.end());
        if lo < MIN_DEGREE || hi > MAX_DEGREE || lo > hi {
            return Err(Error::Config(format!("degree range {lo}:{hi} must lie within {MIN_DEGREE}:{MAX_DEGREE}")));
        }
        if self.extent < 1 || (self.extent as u128 * self.extent as u128) < hi as u128 {
            return Err(Error::Config(format!("extent {} cannot hold {hi} distinct pins", self.extent)));
        }
        if let PinDistribution::Clustered { clusters, spread } = self.distribution {
            if clusters == 0 || spread < 0 {
                return Err(Error::Config("clustered pins need at least one cluster and spread >= 0".into()));
            }
            if (2 * spread as u128 + 1).pow(2) < hi as u128 {
                return Err(Error::Config(format!("spread {spread} cannot hold {hi} distinct pins")));
            }
        }
        Ok(())
    }
}

fn sample_with(rng: &mut ChaCha8Rng, cfg: &SynthConfig, id: String) -> Net {
    let degree = rng.gen_range(cfg.degrees.clone());
    let mut pins: Vec<Point> = Vec::with_capacity(degree);
    let centres: Vec<Point> = match cfg.distribution {
        PinDistribution::Uniform => Vec::new(),
        PinDistribution::Clustered { clusters, .. } => {
            (0..clusters).map(|_| Point::new(rng.gen_range(0..cfg.extent), rng.gen_range(0..cfg.extent))).collect()
        }
    };
    while pins.len() < degree {
        let p = match cfg.distribution {
            PinDistribution::Uniform => Point::new(rng.gen_range(0..cfg.extent), rng.gen_range(0..cfg.extent)),
            PinDistribution::Clustered { spread, .. } => {
                let c = centres[rng.gen_range(0..centres.len())];
                let x = (c.x + rng.gen_range(-spread..=spread)).clamp(0, cfg.extent - 1);
                let y = (c.y + rng.gen_range(-spread..=spread)).clamp(0, cfg.extent - 1);
                Point::new(x, y)
            }
        };
        if !pins.contains(&p) {
            pins.push(p);
        }
    }
    Net::new(id, &pins).expect("sampled pins are distinct and at least three")
}

/// Generator for sample `index` of a run seeded with `seed`: every sample
/// owns a ChaCha stream, so samples can be produced in any order.
fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// One uniform synthetic net on the default 1000 x 1000 grid.
pub fn sample_synthetic_net(seed: u64, degrees: RangeInclusive<usize>) -> Result<Net> {
    sample_net(seed, &SynthConfig::uniform(degrees))
}

pub fn sample_net(seed: u64, cfg: &SynthConfig) -> Result<Net> {
    cfg.validate()?;
    Ok(sample_with(&mut sample_rng(seed, 0), cfg, format!("s{seed}")))
}

/// Sample `index` of the run `seed`; the same call as used by [`generate_dataset`].
pub fn nth_net(seed: u64, index: u64, cfg: &SynthConfig) -> Result<Net> {
    cfg.validate()?;
    Ok(sample_with(&mut sample_rng(seed, index), cfg, format!("n{index}")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub schema: u32,
    pub id: String,
    pub pins: Vec<Point>,
    /// Hanan candidates in node order; `labels[i]` refers to `candidates[i]`.
    pub candidates: Vec<Point>,
    pub labels: Vec<u8>,
    pub wl_opt: Length,
    pub provenance: Provenance,
    pub seed: u64,
}

impl DatasetRecord {
    pub fn label(net: &Net, budget: ExactBudget, seed: u64) -> Result<Self> {
        let s = label_sample(net, budget)?;
        Ok(DatasetRecord {
            schema: SCHEMA_VERSION,
            id: net.id.clone(),
            pins: net.pins().to_vec(),
            candidates: s.graph.candidates().to_vec(),
            labels: s.labels.labels,
            wl_opt: s.labels.wl_opt,
            provenance: s.labels.provenance,
            seed,
        })
    }

    pub fn net(&self) -> Result<Net> {
        Net::new(self.id.clone(), &self.pins)
    }
}

/// A labeled net held compactly for training.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSample {
    pub net: Net,
    pub labels: Vec<u8>,
    pub wl_opt: Length,
    pub provenance: Provenance,
}

impl TryFrom<DatasetRecord> for TrainingSample {
    type Error = Error;

    fn try_from(r: DatasetRecord) -> Result<Self> {
        if r.labels.len() != r.candidates.len() {
            return Err(Error::Invalid(format!("record {}: {} labels for {} candidates", r.id, r.labels.len(), r.candidates.len())));
        }
        Ok(TrainingSample { net: r.net()?, labels: r.labels, wl_opt: r.wl_opt, provenance: r.provenance })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetSummary {
    pub count: usize,
    pub exact: usize,
    pub heuristic: usize,
    pub positives: usize,
    pub candidates: usize,
}

impl DatasetSummary {
    fn add(&mut self, r: &DatasetRecord) {
        self.count += 1;
        match r.provenance {
            Provenance::Exact => self.exact += 1,
            Provenance::Heuristic => self.heuristic += 1,
        }
        self.positives += r.labels.iter().map(|&l| l as usize).sum::<usize>();
        self.candidates += r.candidates.len();
    }
}

const CHUNK: usize = 1024;

fn header_line(cfg: &SynthConfig, count: usize, seed: u64, budget: ExactBudget) -> String {
    let dist = match cfg.distribution {
        PinDistribution::Uniform => "uniform".to_string(),
        PinDistribution::Clustered { clusters, spread } => format!("clustered:{clusters}:{spread}"),
    };
    format!(
        "# steinerwl dataset schema={SCHEMA_VERSION} count={count} degrees={}:{} extent={} pins={dist} seed={seed} exact_max_degree={}\n",
        cfg.degrees.start(),
        cfg.degrees.end(),
        cfg.extent,
        budget.max_degree
    )
}

/// Generates and labels `count` nets, writing them in index order to `out`.
/// Output is a pure function of the arguments.
pub fn write_dataset<W: Write>(out: &mut W, cfg: &SynthConfig, count: usize, seed: u64, budget: ExactBudget) -> Result<DatasetSummary> {
    cfg.validate()?;
    let io = |e| Error::io(Path::new("<dataset>"), e);
    out.write_all(header_line(cfg, count, seed, budget).as_bytes()).map_err(io)?;
    let mut summary = DatasetSummary::default();
    for start in (0..count).step_by(CHUNK) {
        let end = (start + CHUNK).min(count);
        let records: Vec<Result<DatasetRecord>> = (start..end)
            .into_par_iter()
            .map(|i| {
                let net = sample_with(&mut sample_rng(seed, i as u64), cfg, format!("n{i}"));
                DatasetRecord::label(&net, budget, seed)
            })
            .collect();
        for r in records {
            let r = r?;
            summary.add(&r);
            serde_json::to_writer(&mut *out, &r).map_err(|e| Error::Invalid(e.to_string()))?;
            out.write_all(b"\n").map_err(io)?;
        }
    }
    out.flush().map_err(io)?;
    Ok(summary)
}

pub fn generate_dataset(path: &Path, cfg: &SynthConfig, count: usize, seed: u64, budget: ExactBudget) -> Result<DatasetSummary> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_dataset(&mut w, cfg, count, seed, budget).map_err(|e| with_path(e, path))
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    }
}

fn malformed(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Malformed { path: path.to_path_buf(), line, msg: msg.into() }
}

/// Non-comment lines of a JSONL file with their 1-based line numbers.
fn jsonl_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let t = line.trim();
        if !t.is_empty() && !t.starts_with('#') {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

/// Reads every labeled record of a dataset file.
pub fn read_dataset(path: &Path) -> Result<Vec<DatasetRecord>> {
    jsonl_lines(path)?
        .into_par_iter()
        .map(|(no, line)| {
            let r: DatasetRecord = serde_json::from_str(&line).map_err(|e| malformed(path, no, e.to_string()))?;
            if r.schema != SCHEMA_VERSION {
                return Err(malformed(path, no, format!("unsupported schema {}", r.schema)));
            }
            Ok(r)
        })
        .collect()
}

pub fn read_training_samples(path: &Path) -> Result<Vec<TrainingSample>> {
    read_dataset(path)?.into_iter().map(TrainingSample::try_from).collect()
}

/// Re-labels a deterministic sample of `records` (at least one when
/// non-empty) and returns the ids whose stored labels or WL disagree.
pub fn revalidate(records: &[DatasetRecord], fraction: f64, seed: u64, budget: ExactBudget) -> Result<Vec<String>> {
    if records.is_empty() {
        return Ok(Vec::new());
    }
    let want = ((records.len() as f64 * fraction).ceil() as usize).clamp(1, records.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = rand::seq::index::sample(&mut rng, records.len(), want).into_vec();
    let bad: Result<Vec<Option<String>>> = picked
        .into_par_iter()
        .map(|i| {
            let r = &records[i];
            let fresh = DatasetRecord::label(&r.net()?, budget, r.seed)?;
            let same = fresh.candidates == r.candidates && fresh.labels == r.labels && fresh.wl_opt == r.wl_opt;
            Ok((!same).then(|| r.id.clone()))
        })
        .collect();
    Ok(bad?.into_iter().flatten().collect())
}

/// Labels every net (in parallel, output in input order).
pub fn label_nets(nets: &[Net], budget: ExactBudget, seed: u64) -> Result<Vec<DatasetRecord>> {
    nets.par_iter().map(|n| DatasetRecord::label(n, budget, seed)).collect()
}

/// Writes `records` as a dataset file whose first line is `# <comment>`.
pub fn save_dataset(path: &Path, comment: &str, records: &[DatasetRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "# {}", comment.replace('\n', " ")).map_err(io)?;
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| Error::Invalid(e.to_string()))?;
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

#[derive(Serialize, Deserialize)]
struct NetLine {
    id: String,
    pins: Vec<Point>,
}

/// Writes nets in the plain JSONL net format.
pub fn write_nets<W: Write>(out: &mut W, nets: &[Net]) -> Result<()> {
    let io = |e| Error::io(Path::new("<nets>"), e);
    for n in nets {
        let line = NetLine { id: n.id.clone(), pins: n.pins().to_vec() };
        serde_json::to_writer(&mut *out, &line).map_err(|e| Error::Invalid(e.to_string()))?;
        out.write_all(b"\n").map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn save_nets(path: &Path, nets: &[Net]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_nets(&mut BufWriter::new(file), nets).map_err(|e| with_path(e, path))
}

/// Why a net was left out of a parsed netlist.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Exclusion {
    pub net: String,
    /// Degree after removing duplicate pin positions.
    pub degree: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Netlist {
    /// Name of the netlist (file stem), used to group report rows.
    pub name: String,
    pub nets: Vec<Net>,
    pub excluded: Vec<Exclusion>,
}

/// Degree window applied after de-duplication.
pub const DEGREE_FILTER: RangeInclusive<usize> = MIN_DEGREE..=MAX_DEGREE;

fn admit(name: &str, raw: &[Point], filter: &RangeInclusive<usize>, out: &mut Netlist) -> Result<()> {
    let pins = dedupe_pins(raw)?;
    if filter.contains(&pins.len()) {
        out.nets.push(Net::new(name, &pins)?);
    } else {
        out.excluded.push(Exclusion { net: name.to_string(), degree: pins.len() });
    }
    Ok(())
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn parse_jsonl_nets(path: &Path, filter: &RangeInclusive<usize>) -> Result<Netlist> {
    let mut out = Netlist { name: stem(path), ..Default::default() };
    for (no, line) in jsonl_lines(path)? {
        let n: NetLine = serde_json::from_str(&line).map_err(|e| malformed(path, no, e.to_string()))?;
        admit(&n.id, &n.pins, filter, &mut out)?;
    }
    Ok(out)
}

fn parse_pl(path: &Path) -> Result<HashMap<String, (f64, f64)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.split('#').next().unwrap_or("").trim();
        if t.is_empty() || t.starts_with("UCLA") {
            continue;
        }
        let mut f = t.split_whitespace();
        let (Some(name), Some(x), Some(y)) = (f.next(), f.next(), f.next()) else {
            return Err(malformed(path, i + 1, "expected `name x y`"));
        };
        let x: f64 = x.parse().map_err(|_| malformed(path, i + 1, format!("bad x coordinate {x:?}")))?;
        let y: f64 = y.parse().map_err(|_| malformed(path, i + 1, format!("bad y coordinate {y:?}")))?;
        out.insert(name.to_string(), (x, y));
    }
    Ok(out)
}

fn parse_bookshelf(nets_path: &Path, pl_path: &Path, filter: &RangeInclusive<usize>) -> Result<Netlist> {
    let places = parse_pl(pl_path)?;
    let text = std::fs::read_to_string(nets_path).map_err(|e| Error::io(nets_path, e))?;
    let mut out = Netlist { name: stem(nets_path), ..Default::default() };
    // (name, declared degree, pins so far)
    let mut current: Option<(String, usize, Vec<Point>)> = None;
    let finish = |cur: Option<(String, usize, Vec<Point>)>, line: usize, out: &mut Netlist| -> Result<()> {
        if let Some((name, declared, pins)) = cur {
            if pins.len() != declared {
                return Err(malformed(nets_path, line, format!("net {name} declares {declared} pins, lists {}", pins.len())));
            }
            admit(&name, &pins, filter, out)?;
        }
        Ok(())
    };
    let lines: Vec<&str> = text.lines().collect();
    for (i, line) in lines.iter().enumerate() {
        let no = i + 1;
        let t = line.split('#').next().unwrap_or("").trim();
        if t.is_empty() || t.starts_with("UCLA") || t.starts_with("NumNets") || t.starts_with("NumPins") {
            continue;
        }
        if let Some(rest) = t.strip_prefix("NetDegree") {
            finish(current.take(), no, &mut out)?;
            let rest = rest.trim_start().strip_prefix(':').ok_or_else(|| malformed(nets_path, no, "expected `NetDegree : k name`"))?;
            let mut f = rest.split_whitespace();
            let k: usize = f
                .next()
                .and_then(|k| k.parse().ok())
                .ok_or_else(|| malformed(nets_path, no, "expected a pin count after `NetDegree :`"))?;
            let name = f.next().map_or_else(|| format!("net{}", out.nets.len() + out.excluded.len()), str::to_string);
            current = Some((name, k, Vec::with_capacity(k)));
            continue;
        }
        let Some((name, _, pins)) = current.as_mut() else {
            return Err(malformed(nets_path, no, "pin line before any NetDegree"));
        };
        let (head, offset) = match t.split_once(':') {
            Some((h, o)) => (h, Some(o)),
            None => (t, None),
        };
        let node = head.split_whitespace().next().ok_or_else(|| malformed(nets_path, no, "empty pin line"))?;
        let (dx, dy) = match offset {
            None => (0.0, 0.0),
            Some(o) => {
                let v: Vec<f64> = o
                    .split_whitespace()
                    .map(|s| s.parse().map_err(|_| malformed(nets_path, no, format!("bad pin offset {s:?}"))))
                    .collect::<Result<_>>()?;
                match v[..] {
                    [dx, dy] => (dx, dy),
                    _ => return Err(malformed(nets_path, no, "pin offset needs two numbers")),
                }
            }
        };
        let &(x, y) = places.get(node).ok_or_else(|| Error::UnknownNode { net: name.clone(), node: node.to_string() })?;
        pins.push(Point::new((x + dx).round() as i64, (y + dy).round() as i64));
    }
    finish(current.take(), lines.len(), &mut out)?;
    Ok(out)
}

/// Loads nets from either a JSONL file or a Bookshelf `.nets`/`.pl` pair
/// (in either order), applying the degree filter after de-duplication.
pub fn parse_netlist(paths: &[PathBuf]) -> Result<Netlist> {
    parse_netlist_filtered(paths, &DEGREE_FILTER)
}

pub fn parse_netlist_filtered(paths: &[PathBuf], filter: &RangeInclusive<usize>) -> Result<Netlist> {
    let ext = |p: &PathBuf| p.extension().map(|e| e.to_string_lossy().to_ascii_lowercase()).unwrap_or_default();
    match paths {
        [one] if ext(one) != "nets" && ext(one) != "pl" => parse_jsonl_nets(one, filter),
        [a, b] => {
            let (nets, pl) = match (ext(a).as_str(), ext(b).as_str()) {
                ("nets", "pl") => (a, b),
                ("pl", "nets") => (b, a),
                _ => return Err(Error::Config("a Bookshelf netlist needs one .nets and one .pl file".into())),
            };
            parse_bookshelf(nets, pl, filter)
        }
        _ => Err(Error::Config("expected one JSONL file or a .nets/.pl pair".into())),
    }
}
