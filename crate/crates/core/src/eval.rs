//! Wirelength estimation with a trained model, and the evaluation reports
//! comparing it against the classical methods.
//!
//! The model route is: classify Hanan candidates, connect pins plus the
//! selected points with a rectilinear MST, then prune. Pruning runs the
//! leaf/degree-2 fixpoint, then drops any surviving Steiner point whose
//! removal does not lengthen the tree, and finally falls back to the plain
//! MST if that is still shorter. Every Steiner point left in the returned
//! tree therefore has degree >= 3 and strictly shortens it.
//!
//! Model runtime covers the forward pass (its share of the batch) plus MST
//! and pruning; building the Hanan graph and features is not counted.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::data::Netlist;
use crate::error::{Error, Result};
use crate::geometry::{bbox_half_perimeter, Length, Net, Point, RectTree};
use crate::hanan::{build_hanan_graph, HananGraph};
use crate::model::{infer, sigmoid, GraphBatch, ModelParams};
use crate::oracle::{exact_rsmt, iterated_one_steiner, ExactBudget};
use crate::tree::{mst_unchecked, pruned_steiner_tree, steiner_points};

pub const DEFAULT_THRESHOLD: f32 = 0.3;
pub const DEFAULT_BATCH_SIZE: usize = 16;
pub const DEFAULT_GROUPS: usize = 5;

/// Degree buckets of the per-degree report, inclusive.
pub const DEGREE_BUCKETS: [(usize, usize); 7] = [(3, 9), (10, 19), (20, 29), (30, 39), (40, 49), (50, 59), (60, 64)];

pub fn degree_bucket(degree: usize) -> Option<usize> {
    DEGREE_BUCKETS.iter().position(|&(lo, hi)| (lo..=hi).contains(&degree))
}

/// Candidate probabilities for each graph, from one batched forward pass.
pub fn candidate_probabilities(params: &ModelParams<f32>, graphs: &[&HananGraph]) -> Vec<Vec<f32>> {
    let batch = GraphBatch::from_graphs(graphs.iter().copied());
    let logits = infer(params, &batch);
    graphs
        .iter()
        .zip(&batch.segments)
        .map(|(g, seg)| logits[seg.start + g.n_pins..seg.end].iter().map(|&z| sigmoid(z)).collect())
        .collect()
}

fn select(graph: &HananGraph, probs: &[f32], threshold: f32) -> Vec<Point> {
    graph.candidates().iter().zip(probs).filter(|(_, &p)| p > threshold).map(|(&c, _)| c).collect()
}

/// Candidates whose predicted probability exceeds `threshold`, in node
/// order. Two-pin nets never need Steiner points and skip the model.
pub fn predict_steiner(net: &Net, params: &ModelParams<f32>, threshold: f32) -> Result<Vec<Point>> {
    if net.degree() < 3 {
        return Ok(Vec::new());
    }
    let g = build_hanan_graph(net)?;
    let probs = candidate_probabilities(params, &[&g]);
    Ok(select(&g, &probs[0], threshold))
}

#[derive(Clone, Debug, PartialEq)]
pub struct WlEstimate {
    pub wl: Length,
    pub tree: RectTree,
    /// Length of the MST over pins and every predicted point, before pruning.
    pub wl_unpruned: Length,
}

impl WlEstimate {
    pub fn steiner_points(&self, net: &Net) -> Vec<Point> {
        let pins: HashSet<Point> = net.pins().iter().copied().collect();
        steiner_points(&self.tree, &pins)
    }
}

/// Tree over the pins of `net` and the `predicted` points, pruned as
/// described in the module docs.
pub fn tree_from_steiner(net: &Net, predicted: &[Point]) -> WlEstimate {
    let pins = net.pins();
    let pin_set: HashSet<Point> = pins.iter().copied().collect();
    let mut extra: Vec<Point> = predicted.iter().copied().filter(|p| !pin_set.contains(p)).collect();
    extra.sort_unstable_by_key(Point::row_major);
    extra.dedup();
    let mst = mst_unchecked(pins);
    if extra.is_empty() {
        let wl = mst.total_length;
        return WlEstimate { wl, tree: mst, wl_unpruned: wl };
    }
    let mut all = pins.to_vec();
    all.extend_from_slice(&extra);
    let wl_unpruned = mst_unchecked(&all).total_length;

    let mut tree = pruned_steiner_tree(pins, &extra, &pin_set);
    'filter: loop {
        let steiner = steiner_points(&tree, &pin_set);
        for i in 0..steiner.len() {
            let rest: Vec<Point> = steiner.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &p)| p).collect();
            let candidate = pruned_steiner_tree(pins, &rest, &pin_set);
            if candidate.total_length <= tree.total_length {
                tree = candidate;
                continue 'filter;
            }
        }
        break;
    }
    if mst.total_length <= tree.total_length {
        tree = mst;
    }
    WlEstimate { wl: tree.total_length, tree, wl_unpruned }
}

pub fn estimate_wl(net: &Net, params: &ModelParams<f32>, threshold: f32) -> Result<WlEstimate> {
    if net.degree() < 3 {
        let pins = net.pins();
        return Ok(WlEstimate { wl: bbox_half_perimeter(pins), tree: mst_unchecked(pins), wl_unpruned: bbox_half_perimeter(pins) });
    }
    let predicted = predict_steiner(net, params, threshold)?;
    Ok(tree_from_steiner(net, &predicted))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InferenceOptions {
    pub threshold: f32,
    /// Nets per forward pass.
    pub batch_size: usize,
    /// Nets are sorted by degree and split into this many groups; batches
    /// never mix groups.
    pub groups: usize,
}

impl Default for InferenceOptions {
    fn default() -> Self {
        InferenceOptions { threshold: DEFAULT_THRESHOLD, batch_size: DEFAULT_BATCH_SIZE, groups: DEFAULT_GROUPS }
    }
}

/// Model output for one net.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelEstimate {
    pub estimate: WlEstimate,
    pub predicted: Vec<Point>,
    /// Candidate probabilities in node order.
    pub probabilities: Vec<f32>,
    pub runtime_us: f64,
}

/// Net indices ordered by degree, split into at most `groups` runs of
/// near-equal size, then into batches of `batch_size`.
pub fn plan_batches(degrees: &[usize], batch_size: usize, groups: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..degrees.len()).collect();
    order.sort_by_key(|&i| (degrees[i], i));
    let groups = groups.clamp(1, order.len().max(1));
    let mut out = Vec::new();
    for g in 0..groups {
        let part = &order[g * order.len() / groups..(g + 1) * order.len() / groups];
        out.extend(part.chunks(batch_size.max(1)).map(<[usize]>::to_vec));
    }
    out
}

/// Runs the model route over `nets`, returning results in input order.
pub fn model_estimates(params: &ModelParams<f32>, nets: &[&Net], opts: &InferenceOptions) -> Result<Vec<ModelEstimate>> {
    let mut out: Vec<Option<ModelEstimate>> = vec![None; nets.len()];
    let mut graphs: Vec<Option<HananGraph>> = Vec::with_capacity(nets.len());
    for n in nets {
        graphs.push(if n.degree() < 3 { None } else { Some(build_hanan_graph(n)?) });
    }
    for (i, n) in nets.iter().enumerate() {
        if graphs[i].is_none() {
            let t = Instant::now();
            let estimate = estimate_wl(n, params, opts.threshold)?;
            let runtime_us = t.elapsed().as_secs_f64() * 1e6;
            out[i] = Some(ModelEstimate { estimate, predicted: Vec::new(), probabilities: Vec::new(), runtime_us });
        }
    }
    let modeled: Vec<usize> = (0..nets.len()).filter(|&i| graphs[i].is_some()).collect();
    let degrees: Vec<usize> = modeled.iter().map(|&i| nets[i].degree()).collect();
    for batch in plan_batches(&degrees, opts.batch_size, opts.groups) {
        let idx: Vec<usize> = batch.iter().map(|&b| modeled[b]).collect();
        let gs: Vec<&HananGraph> = idx.iter().map(|&i| graphs[i].as_ref().unwrap()).collect();
        let batch = GraphBatch::from_graphs(gs.iter().copied());
        let t = Instant::now();
        let logits = infer(params, &batch);
        let share = t.elapsed().as_secs_f64() * 1e6 / idx.len() as f64;
        for ((&i, g), seg) in idx.iter().zip(&gs).zip(&batch.segments) {
            let t = Instant::now();
            let probabilities: Vec<f32> = logits[seg.start + g.n_pins..seg.end].iter().map(|&z| sigmoid(z)).collect();
            let predicted = select(g, &probabilities, opts.threshold);
            let estimate = tree_from_steiner(nets[i], &predicted);
            let runtime_us = share + t.elapsed().as_secs_f64() * 1e6;
            out[i] = Some(ModelEstimate { estimate, predicted, probabilities, runtime_us });
        }
    }
    Ok(out.into_iter().map(Option::unwrap).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Mst,
    I1s,
    Exact,
    Model,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Mst, Method::I1s, Method::Exact, Method::Model];

    pub fn name(self) -> &'static str {
        match self {
            Method::Mst => "mst",
            Method::I1s => "i1s",
            Method::Exact => "exact",
            Method::Model => "model",
        }
    }

    /// Parses a comma separated list such as `mst,exact`.
    pub fn parse_list(s: &str) -> Result<Vec<Method>> {
        let mut out: Vec<Method> = s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(str::parse).collect::<Result<_>>()?;
        out.sort_unstable();
        out.dedup();
        if out.is_empty() {
            return Err(Error::Config("no evaluation methods given".into()));
        }
        Ok(out)
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method {s:?} (expected mst, i1s, exact, model)")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reference {
    Exact,
    /// Degree beyond the exact budget; errors are relative to the heuristic.
    Heuristic,
}

/// One evaluated net. Method columns are `None` when not requested.
#[derive(Clone, Debug, PartialEq)]
pub struct NetReport {
    pub netlist: String,
    pub net: String,
    pub degree: usize,
    pub reference: Reference,
    pub wl_ref: Length,
    pub wl: [Option<Length>; 4],
    pub wl_model_unpruned: Option<Length>,
    pub runtime_us: [Option<f64>; 4],
}

impl NetReport {
    pub fn wl_of(&self, m: Method) -> Option<Length> {
        self.wl[m as usize]
    }

    pub fn runtime_of(&self, m: Method) -> Option<f64> {
        self.runtime_us[m as usize]
    }

    /// `100 (wl - wl_ref) / wl_ref`.
    pub fn error_pct(&self, m: Method) -> Option<f64> {
        self.wl_of(m).map(|wl| error_pct(wl, self.wl_ref))
    }
}

pub fn error_pct(wl: Length, reference: Length) -> f64 {
    if reference == 0 {
        return 0.0;
    }
    100.0 * (wl - reference) as f64 / reference as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOptions {
    pub methods: Vec<Method>,
    pub budget: ExactBudget,
    pub inference: InferenceOptions,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { methods: vec![Method::Mst, Method::Exact], budget: ExactBudget::default(), inference: InferenceOptions::default() }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct WlReport {
    pub methods: Vec<Method>,
    pub rows: Vec<NetReport>,
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed().as_secs_f64() * 1e6)
}

/// Evaluates every requested method on every net. The reference WL is the
/// exact optimum when the degree fits `budget`, the iterated 1-Steiner WL
/// otherwise.
pub fn evaluate(netlists: &[Netlist], params: Option<&ModelParams<f32>>, opts: &EvalOptions) -> Result<WlReport> {
    let wants = |m| opts.methods.contains(&m);
    if wants(Method::Model) && params.is_none() {
        return Err(Error::Config("model evaluation needs a checkpoint".into()));
    }
    let nets: Vec<(&str, &Net)> = netlists.iter().flat_map(|nl| nl.nets.iter().map(move |n| (nl.name.as_str(), n))).collect();
    let mut rows: Vec<NetReport> = nets
        .par_iter()
        .map(|&(netlist, net)| -> Result<NetReport> {
            let mut wl = [None; 4];
            let mut runtime_us = [None; 4];
            let (mst, us) = timed(|| mst_unchecked(net.pins()).total_length);
            if wants(Method::Mst) {
                wl[Method::Mst as usize] = Some(mst);
                runtime_us[Method::Mst as usize] = Some(us);
            }
            let exact_ok = opts.budget.allows(net.degree());
            let need_i1s = wants(Method::I1s) || !exact_ok;
            let i1s = if need_i1s {
                let (s, us) = timed(|| iterated_one_steiner(net));
                let s = s?;
                if wants(Method::I1s) {
                    wl[Method::I1s as usize] = Some(s.wl);
                    runtime_us[Method::I1s as usize] = Some(us);
                }
                Some(s.wl)
            } else {
                None
            };
            let (reference, wl_ref) = if exact_ok {
                let (s, us) = timed(|| exact_rsmt(net, opts.budget));
                let s = s?;
                if wants(Method::Exact) {
                    wl[Method::Exact as usize] = Some(s.wl);
                    runtime_us[Method::Exact as usize] = Some(us);
                }
                (Reference::Exact, s.wl)
            } else {
                (Reference::Heuristic, i1s.expect("heuristic reference computed"))
            };
            Ok(NetReport {
                netlist: netlist.to_string(),
                net: net.id.clone(),
                degree: net.degree(),
                reference,
                wl_ref,
                wl,
                wl_model_unpruned: None,
                runtime_us,
            })
        })
        .collect::<Result<_>>()?;
    if let Some(params) = params.filter(|_| wants(Method::Model)) {
        let refs: Vec<&Net> = nets.iter().map(|&(_, n)| n).collect();
        for (row, m) in rows.iter_mut().zip(model_estimates(params, &refs, &opts.inference)?) {
            row.wl[Method::Model as usize] = Some(m.estimate.wl);
            row.wl_model_unpruned = Some(m.estimate.wl_unpruned);
            row.runtime_us[Method::Model as usize] = Some(m.runtime_us);
        }
    }
    let mut methods = opts.methods.clone();
    methods.sort_unstable();
    methods.dedup();
    Ok(WlReport { methods, rows })
}

/// Mean error and runtime of one method over one group of nets.
#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    /// `overall`, `netlist` or `degree`.
    pub scope: &'static str,
    /// Netlist name or bucket such as `10-19`; empty for `overall`.
    pub group: String,
    pub method: Method,
    pub nets: usize,
    /// Nets in the group whose reference is heuristic, not exact.
    pub heuristic_refs: usize,
    pub mean_error_pct: Option<f64>,
    pub max_error_pct: Option<f64>,
    pub mean_runtime_us: Option<f64>,
}

fn aggregate(scope: &'static str, group: String, method: Method, rows: &[&NetReport]) -> Aggregate {
    let errs: Vec<f64> = rows.iter().filter_map(|r| r.error_pct(method)).collect();
    let times: Vec<f64> = rows.iter().filter_map(|r| r.runtime_of(method)).collect();
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    Aggregate {
        scope,
        group,
        method,
        nets: rows.len(),
        heuristic_refs: rows.iter().filter(|r| r.reference == Reference::Heuristic).count(),
        mean_error_pct: mean(&errs),
        max_error_pct: errs.iter().copied().reduce(f64::max),
        mean_runtime_us: mean(&times),
    }
}

fn fmt_opt(v: Option<impl std::fmt::Display>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

fn fmt_pct(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| format!("{v:.6}"))
}

fn fmt_us(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| format!("{v:.3}"))
}

fn to_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(&r).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv is utf-8")
}

impl WlReport {
    /// Aggregates per method: overall, per netlist (in first-seen order), and
    /// one row for each of the seven degree buckets, empty or not.
    pub fn aggregates(&self) -> Vec<Aggregate> {
        let all: Vec<&NetReport> = self.rows.iter().collect();
        let mut netlists: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !netlists.contains(&r.netlist.as_str()) {
                netlists.push(&r.netlist);
            }
        }
        let mut out = Vec::new();
        for &m in &self.methods {
            out.push(aggregate("overall", String::new(), m, &all));
            for nl in &netlists {
                let rows: Vec<&NetReport> = all.iter().copied().filter(|r| r.netlist == *nl).collect();
                out.push(aggregate("netlist", nl.to_string(), m, &rows));
            }
            for (b, &(lo, hi)) in DEGREE_BUCKETS.iter().enumerate() {
                let rows: Vec<&NetReport> = all.iter().copied().filter(|r| degree_bucket(r.degree) == Some(b)).collect();
                out.push(aggregate("degree", format!("{lo}-{hi}"), m, &rows));
            }
        }
        out
    }

    pub fn mean_error_pct(&self, m: Method) -> Option<f64> {
        aggregate("overall", String::new(), m, &self.rows.iter().collect::<Vec<_>>()).mean_error_pct
    }

    pub fn mean_runtime_us(&self, m: Method) -> Option<f64> {
        aggregate("overall", String::new(), m, &self.rows.iter().collect::<Vec<_>>()).mean_runtime_us
    }

    /// Per-net wirelengths and errors. Contains no timings, so it is a pure
    /// function of the nets, checkpoint and options.
    pub fn nets_csv(&self) -> String {
        let header = [
            "netlist", "net", "degree", "reference", "wl_ref", "wl_mst", "wl_i1s", "wl_exact", "wl_model", "wl_model_unpruned",
            "err_mst_pct", "err_i1s_pct", "err_exact_pct", "err_model_pct",
        ];
        to_csv(
            &header,
            self.rows.iter().map(|r| {
                let mut v = vec![
                    r.netlist.clone(),
                    r.net.clone(),
                    r.degree.to_string(),
                    reference_name(r.reference).into(),
                    r.wl_ref.to_string(),
                ];
                v.extend(Method::ALL.iter().map(|&m| fmt_opt(r.wl_of(m))));
                v.push(fmt_opt(r.wl_model_unpruned));
                v.extend(Method::ALL.iter().map(|&m| fmt_pct(r.error_pct(m))));
                v
            }),
        )
    }

    /// Error aggregates; deterministic like [`WlReport::nets_csv`].
    pub fn summary_csv(&self) -> String {
        to_csv(
            &["scope", "group", "method", "nets", "heuristic_refs", "mean_error_pct", "max_error_pct"],
            self.aggregates().into_iter().map(|a| {
                vec![
                    a.scope.into(),
                    a.group,
                    a.method.name().into(),
                    a.nets.to_string(),
                    a.heuristic_refs.to_string(),
                    fmt_pct(a.mean_error_pct),
                    fmt_pct(a.max_error_pct),
                ]
            }),
        )
    }

    /// Wall-clock figures in microseconds: per-method means per group, then
    /// one row per net.
    pub fn timing_csv(&self) -> String {
        let mut rows: Vec<Vec<String>> = self
            .aggregates()
            .into_iter()
            .map(|a| vec![a.scope.into(), a.group, String::new(), a.method.name().into(), a.nets.to_string(), fmt_us(a.mean_runtime_us)])
            .collect();
        for r in &self.rows {
            for &m in &self.methods {
                rows.push(vec!["net".into(), r.netlist.clone(), r.net.clone(), m.name().into(), "1".into(), fmt_us(r.runtime_of(m))]);
            }
        }
        to_csv(&["scope", "group", "net", "method", "nets", "mean_us"], rows)
    }
}

impl WlReport {
    /// Reads back the output of [`WlReport::nets_csv`]. Runtimes are not part
    /// of that file and come back empty.
    pub fn from_nets_csv(text: &str) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        let header = rd.headers().map_err(|e| Error::Invalid(e.to_string()))?.clone();
        let col = |name: &str| header.iter().position(|h| h == name).ok_or_else(|| Error::Invalid(format!("missing column {name}")));
        let (c_netlist, c_net, c_degree, c_ref, c_wl_ref, c_unpruned) =
            (col("netlist")?, col("net")?, col("degree")?, col("reference")?, col("wl_ref")?, col("wl_model_unpruned")?);
        let c_wl: Vec<usize> = Method::ALL.iter().map(|m| col(&format!("wl_{}", m.name()))).collect::<Result<_>>()?;
        let mut present = [false; 4];
        let mut rows = Vec::new();
        for (i, rec) in rd.records().enumerate() {
            let rec = rec.map_err(|e| Error::Invalid(e.to_string()))?;
            let bad = |what: &str| Error::Invalid(format!("row {}: bad {what}", i + 2));
            let opt = |c: usize| -> Result<Option<Length>> {
                let v = &rec[c];
                if v.is_empty() { Ok(None) } else { v.parse().map(Some).map_err(|_| bad("wirelength")) }
            };
            let mut wl = [None; 4];
            for (k, &c) in c_wl.iter().enumerate() {
                wl[k] = opt(c)?;
                present[k] |= wl[k].is_some();
            }
            rows.push(NetReport {
                netlist: rec[c_netlist].to_string(),
                net: rec[c_net].to_string(),
                degree: rec[c_degree].parse().map_err(|_| bad("degree"))?,
                reference: match &rec[c_ref] {
                    "exact" => Reference::Exact,
                    "i1s" => Reference::Heuristic,
                    _ => return Err(bad("reference")),
                },
                wl_ref: rec[c_wl_ref].parse().map_err(|_| bad("wl_ref"))?,
                wl,
                wl_model_unpruned: opt(c_unpruned)?,
                runtime_us: [None; 4],
            });
        }
        let methods = Method::ALL.into_iter().filter(|&m| present[m as usize]).collect();
        Ok(WlReport { methods, rows })
    }
}

fn reference_name(r: Reference) -> &'static str {
    match r {
        Reference::Exact => "exact",
        Reference::Heuristic => "i1s",
    }
}

/// Candidate-level classification quality and WL error of the model route.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ValidationMetrics {
    pub precision: f64,
    pub recall: f64,
    /// Mean `100 (wl_model - wl_opt) / wl_opt`.
    pub wl_error_pct: f64,
    pub nets: usize,
}

/// Scores the model on labeled nets (`(net, labels, wl_opt)`), through the
/// same [`model_estimates`] path as [`evaluate`].
pub fn validate(params: &ModelParams<f32>, nets: &[(&Net, &[u8], Length)], opts: &InferenceOptions) -> Result<ValidationMetrics> {
    let refs: Vec<&Net> = nets.iter().map(|t| t.0).collect();
    let est = model_estimates(params, &refs, opts)?;
    let (mut tp, mut fp, mut fnn) = (0usize, 0usize, 0usize);
    let mut err = 0.0;
    for ((_, labels, wl_opt), e) in nets.iter().zip(&est) {
        for (&l, &p) in labels.iter().zip(&e.probabilities) {
            match (l == 1, p > opts.threshold) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fnn += 1,
                _ => {}
            }
        }
        err += error_pct(e.estimate.wl, *wl_opt);
    }
    let ratio = |a: usize, b: usize| if b == 0 { 1.0 } else { a as f64 / b as f64 };
    Ok(ValidationMetrics {
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fnn),
        wl_error_pct: if nets.is_empty() { 0.0 } else { err / nets.len() as f64 },
        nets: nets.len(),
    })
}

/// One configuration of a sweep.
#[derive(Clone, Debug)]
pub struct SweepPoint<'a> {
    pub label: String,
    pub params: &'a ModelParams<f32>,
    pub inference: InferenceOptions,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub label: String,
    pub layers: usize,
    pub param_count: usize,
    pub threshold: f32,
    pub batch_size: usize,
    pub nets: usize,
    pub mean_error_pct: f64,
    /// Total model wall-clock over all nets.
    pub total_ms: f64,
    pub per_net_us: f64,
}

/// Evaluates each configuration on `nets` against the reference lengths
/// `wl_ref` (same order).
pub fn sweep(points: &[SweepPoint<'_>], nets: &[&Net], wl_ref: &[Length]) -> Result<Vec<SweepRow>> {
    if nets.len() != wl_ref.len() {
        return Err(Error::Shape(format!("{} nets but {} reference lengths", nets.len(), wl_ref.len())));
    }
    let mut rows = Vec::with_capacity(points.len());
    for p in points {
        let t = Instant::now();
        let est = model_estimates(p.params, nets, &p.inference)?;
        let total_ms = t.elapsed().as_secs_f64() * 1e3;
        let err: f64 = est.iter().zip(wl_ref).map(|(e, &r)| error_pct(e.estimate.wl, r)).sum();
        let n = nets.len().max(1) as f64;
        rows.push(SweepRow {
            label: p.label.clone(),
            layers: p.params.config.layers,
            param_count: p.params.param_count(),
            threshold: p.inference.threshold,
            batch_size: p.inference.batch_size,
            nets: nets.len(),
            mean_error_pct: err / n,
            total_ms,
            per_net_us: est.iter().map(|e| e.runtime_us).sum::<f64>() / n,
        });
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::new();
    s.push_str("label,layers,param_count,threshold,batch_size,nets,mean_error_pct,total_ms,per_net_us\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{:.6},{:.3},{:.3}",
            r.label, r.layers, r.param_count, r.threshold, r.batch_size, r.nets, r.mean_error_pct, r.total_ms, r.per_net_us
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use crate::oracle::label_sample;

    fn net(v: &[(i64, i64)]) -> Net {
        let pts: Vec<Point> = v.iter().map(|&p| p.into()).collect();
        Net::new("t", &pts).unwrap()
    }

    fn zero_model() -> ModelParams<f32> {
        ModelParams::zeros(&ModelConfig { layers: 2, hidden: 8, mlp_hidden: 8, ..Default::default() }).unwrap()
    }

    #[test]
    fn zero_model_selects_every_candidate_at_default_threshold() {
        let n = net(&[(0, 0), (4, 1), (2, 5), (7, 3)]);
        let g = build_hanan_graph(&n).unwrap();
        assert_eq!(predict_steiner(&n, &zero_model(), 0.3).unwrap(), g.candidates().to_vec());
        assert!(predict_steiner(&n, &zero_model(), 1.0).unwrap().is_empty());
    }

    #[test]
    fn two_pin_nets_bypass_the_model() {
        let n = net(&[(0, 0), (3, 4)]);
        let e = estimate_wl(&n, &zero_model(), 0.3).unwrap();
        assert_eq!(e.wl, 7);
        assert!(predict_steiner(&n, &zero_model(), 0.0).unwrap().is_empty());
    }

    #[test]
    fn empty_prediction_is_the_mst() {
        let n = net(&[(0, 0), (4, 1), (2, 5), (7, 3), (9, 9)]);
        assert_eq!(tree_from_steiner(&n, &[]).wl, mst_unchecked(n.pins()).total_length);
    }

    #[test]
    fn oracle_labels_reproduce_the_optimum() {
        for seed in 0..40u64 {
            let n = crate::data::sample_synthetic_net(seed, 3..=8).unwrap();
            let s = label_sample(&n, ExactBudget::default()).unwrap();
            let picked: Vec<Point> =
                s.graph.candidates().iter().zip(&s.labels.labels).filter(|(_, &l)| l == 1).map(|(&c, _)| c).collect();
            assert_eq!(tree_from_steiner(&n, &picked).wl, s.labels.wl_opt, "seed {seed}");
        }
    }

    #[test]
    fn every_surviving_steiner_point_helps() {
        for seed in 0..40u64 {
            let n = crate::data::sample_synthetic_net(seed, 4..=8).unwrap();
            let g = build_hanan_graph(&n).unwrap();
            // Take every other candidate: mostly harmful picks.
            let picked: Vec<Point> = g.candidates().iter().step_by(2).copied().collect();
            let e = tree_from_steiner(&n, &picked);
            assert!(e.wl <= mst_unchecked(n.pins()).total_length);
            assert!(e.tree.is_spanning_tree());
            let pins: HashSet<Point> = n.pins().iter().copied().collect();
            let degrees = e.tree.degrees();
            let steiner = e.steiner_points(&n);
            for (i, p) in e.tree.points.iter().enumerate() {
                if !pins.contains(p) {
                    assert!(degrees[i] >= 3);
                }
            }
            for s in &steiner {
                let rest: Vec<Point> = steiner.iter().copied().filter(|q| q != s).collect();
                let mut pts = n.pins().to_vec();
                pts.extend(rest);
                assert!(mst_unchecked(&pts).total_length > e.wl);
            }
        }
    }

    #[test]
    fn exact_against_itself_has_zero_error() {
        let nets: Vec<Net> = (0..30).map(|s| crate::data::sample_synthetic_net(s, 5..=5).unwrap()).collect();
        let nl = Netlist { name: "syn".into(), nets, excluded: vec![] };
        let opts = EvalOptions { methods: vec![Method::Exact], ..Default::default() };
        let r = evaluate(&[nl], None, &opts).unwrap();
        assert_eq!(r.mean_error_pct(Method::Exact), Some(0.0));
        let degree_rows = r.aggregates().into_iter().filter(|a| a.scope == "degree").count();
        assert_eq!(degree_rows, 7);
    }

    #[test]
    fn model_requires_parameters() {
        let nl = Netlist { name: "x".into(), nets: vec![net(&[(0, 0), (1, 5), (4, 2)])], excluded: vec![] };
        let opts = EvalOptions { methods: vec![Method::Model], ..Default::default() };
        assert!(matches!(evaluate(&[nl], None, &opts), Err(Error::Config(_))));
    }

    #[test]
    fn large_nets_fall_back_to_the_heuristic_reference() {
        let n = crate::data::sample_synthetic_net(3, 12..=12).unwrap();
        let nl = Netlist { name: "x".into(), nets: vec![n], excluded: vec![] };
        let opts = EvalOptions { methods: vec![Method::Mst, Method::Exact], budget: ExactBudget { max_degree: 8 }, ..Default::default() };
        let r = evaluate(&[nl], None, &opts).unwrap();
        assert_eq!(r.rows[0].reference, Reference::Heuristic);
        assert_eq!(r.rows[0].wl_of(Method::Exact), None);
        assert!(r.nets_csv().lines().nth(1).unwrap().contains(",i1s,"));
    }

    #[test]
    fn nets_csv_round_trips() {
        let nets: Vec<Net> = (0..8).map(|s| crate::data::sample_synthetic_net(s, 3..=7).unwrap()).collect();
        let nl = Netlist { name: "syn".into(), nets, excluded: vec![] };
        let opts = EvalOptions { methods: vec![Method::Mst, Method::I1s, Method::Exact], ..Default::default() };
        let r = evaluate(&[nl], None, &opts).unwrap();
        let back = WlReport::from_nets_csv(&r.nets_csv()).unwrap();
        assert_eq!(back.nets_csv(), r.nets_csv());
        assert_eq!(back.summary_csv(), r.summary_csv());
    }

    #[test]
    fn batched_model_route_matches_single_net_route() {
        let nets: Vec<Net> = (0..25).map(|s| crate::data::sample_synthetic_net(s, 3..=9).unwrap()).collect();
        let refs: Vec<&Net> = nets.iter().collect();
        let mut p = ModelParams::<f32>::init(&ModelConfig { layers: 2, hidden: 8, mlp_hidden: 8, seed: 4, ..Default::default() }).unwrap();
        crate::model::randomize(&mut p, 0.5, 3);
        let batched = model_estimates(&p, &refs, &InferenceOptions { batch_size: 4, groups: 3, threshold: 0.5 }).unwrap();
        for (n, b) in nets.iter().zip(&batched) {
            let single = predict_steiner(n, &p, 0.5).unwrap();
            assert_eq!(single, b.predicted);
        }
    }

    #[test]
    fn batch_plan_covers_every_net_once_and_sorts_by_degree() {
        let degrees = [9, 3, 5, 3, 12, 7, 5, 4];
        let plan = plan_batches(&degrees, 2, 3);
        let mut seen: Vec<usize> = plan.iter().flatten().copied().collect();
        let flat_degrees: Vec<usize> = seen.iter().map(|&i| degrees[i]).collect();
        assert!(flat_degrees.windows(2).all(|w| w[0] <= w[1]));
        seen.sort_unstable();
        assert_eq!(seen, (0..degrees.len()).collect::<Vec<_>>());
        assert!(plan.iter().all(|b| b.len() <= 2));
    }

    #[test]
    fn method_lists_parse() {
        assert_eq!(Method::parse_list("exact, mst").unwrap(), vec![Method::Mst, Method::Exact]);
        assert!(Method::parse_list("mst,rest").is_err());
        assert!(Method::parse_list("").is_err());
    }

    #[test]
    fn buckets_partition_three_to_sixty_four() {
        for d in 3..=64 {
            assert!(degree_bucket(d).is_some());
        }
        assert_eq!(degree_bucket(2), None);
        assert_eq!(degree_bucket(65), None);
        assert_eq!(degree_bucket(9), Some(0));
        assert_eq!(degree_bucket(10), Some(1));
    }

    #[test]
    fn sweep_emits_one_row_per_point() {
        let nets: Vec<Net> = (0..5).map(|s| crate::data::sample_synthetic_net(s, 4..=6).unwrap()).collect();
        let refs: Vec<&Net> = nets.iter().collect();
        let wl: Vec<Length> = nets.iter().map(|n| exact_rsmt(n, ExactBudget::default()).unwrap().wl).collect();
        let p = zero_model();
        let rows = sweep(&[SweepPoint { label: "a".into(), params: &p, inference: InferenceOptions::default() }], &refs, &wl).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].mean_error_pct >= 0.0);
        assert_eq!(sweep_csv(&rows).lines().count(), 2);
    }
}
