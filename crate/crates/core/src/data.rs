//! Datasets on disk, labeled-normal splits, contamination and the synthetic
//! mixed-homophily generator.
//!
//! Directory layout:
//!
//! ```text
//! edges.csv      src,dst per line (header optional)
//! features.csv   one comma-separated row per node (header optional)
//! features.bin   alternative to features.csv, see `read_features_bin`
//! labels.csv     one 0/1 per line (header `label` optional)
//! split.json     optional {"labeled": [...], "seed": ..., "R": ...}
//! ```

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RhoError};
use crate::graph::{node_homophily, Graph};
use crate::seed;

pub const FEATURES_BIN_MAGIC: &[u8; 8] = b"RHOFEAT1";

/// Labeled-normal training nodes and the unlabeled test nodes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Split {
    pub labeled: Vec<usize>,
    pub test: Vec<usize>,
    /// Anomalies moved into `labeled` by contamination.
    pub contaminated: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub graph: Graph,
    pub features: Array2<f64>,
    /// 0 normal, 1 anomaly.
    pub labels: Vec<u8>,
    pub split: Option<Split>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SplitFile {
    labeled: Vec<usize>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(rename = "R", default)]
    r: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    contaminated: Vec<usize>,
}

impl Dataset {
    pub fn new(graph: Graph, features: Array2<f64>, labels: Vec<u8>) -> Result<Self> {
        let n = graph.num_nodes();
        if features.nrows() != n || labels.len() != n {
            return Err(RhoError::RowCountMismatch(format!(
                "graph has {n} nodes, features {} rows, labels {} rows",
                features.nrows(),
                labels.len()
            )));
        }
        if let Some(pos) = labels.iter().position(|&l| l > 1) {
            return Err(RhoError::InvalidInput(format!("label of node {pos} is not 0 or 1")));
        }
        if !features.iter().all(|v| v.is_finite()) {
            return Err(RhoError::NonFinite("features".into()));
        }
        Ok(Dataset {
            graph,
            features,
            labels,
            split: None,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn num_anomalies(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    pub fn split(&self) -> Result<&Split> {
        self.split
            .as_ref()
            .ok_or_else(|| RhoError::InvalidInput("dataset has no labeled/test split".into()))
    }

    pub fn with_split(mut self, split: Split) -> Result<Self> {
        validate_split(&split, self.num_nodes(), &self.labels)?;
        self.split = Some(split);
        Ok(self)
    }

    /// Writes the dataset in the directory layout (split included when present).
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| RhoError::io(dir, e))?;
        self.graph.write_edge_csv(&dir.join("edges.csv"))?;
        write_features_csv(&dir.join("features.csv"), &self.features)?;
        let mut labels = String::from("label\n");
        for l in &self.labels {
            labels.push_str(&format!("{l}\n"));
        }
        let path = dir.join("labels.csv");
        fs::write(&path, labels).map_err(|e| RhoError::io(&path, e))?;
        Ok(())
    }

    pub fn save_split(&self, path: &Path, seed: Option<u64>, r: Option<f64>) -> Result<()> {
        let split = self.split()?;
        let file = SplitFile {
            labeled: split.labeled.clone(),
            seed,
            r,
            contaminated: split.contaminated.clone(),
        };
        let text = serde_json::to_string_pretty(&file)?;
        fs::write(path, text).map_err(|e| RhoError::io(path, e))
    }
}

fn validate_split(split: &Split, n: usize, labels: &[u8]) -> Result<()> {
    let mut seen = vec![false; n];
    for &v in split.labeled.iter().chain(&split.test) {
        if v >= n {
            return Err(RhoError::InvalidInput(format!("split node {v} outside graph of {n} nodes")));
        }
        if seen[v] {
            return Err(RhoError::InvalidInput(format!("node {v} appears twice in the split")));
        }
        seen[v] = true;
    }
    if let Some(v) = seen.iter().position(|s| !s) {
        return Err(RhoError::InvalidInput(format!("node {v} missing from the split")));
    }
    let contaminated: HashSet<usize> = split.contaminated.iter().copied().collect();
    if let Some(&v) = split
        .labeled
        .iter()
        .find(|&&v| labels[v] == 1 && !contaminated.contains(&v))
    {
        return Err(RhoError::InvalidInput(format!(
            "anomalous node {v} in the labeled set without contamination"
        )));
    }
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| RhoError::io(path, e))
}

fn parse_error(path: &Path, line: usize, message: String) -> RhoError {
    RhoError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    }
}

/// Reads a dense feature CSV. A non-numeric first line is treated as a header.
pub fn read_features_csv(path: &Path) -> Result<Array2<f64>> {
    let text = read_text(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        match parsed {
            Ok(row) => {
                if let Some(first) = rows.first() {
                    if first.len() != row.len() {
                        return Err(parse_error(
                            path,
                            idx + 1,
                            format!("expected {} columns, got {}", first.len(), row.len()),
                        ));
                    }
                }
                rows.push(row);
            }
            Err(_) if idx == 0 => continue,
            Err(e) => return Err(parse_error(path, idx + 1, format!("bad number: {e}"))),
        }
    }
    let cols = rows.first().map_or(0, Vec::len);
    let n = rows.len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((n, cols), flat).map_err(|e| parse_error(path, 0, e.to_string()))
}

pub fn write_features_csv(path: &Path, features: &Array2<f64>) -> Result<()> {
    let mut out = String::new();
    let header: Vec<String> = (0..features.ncols()).map(|j| format!("f{j}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in features.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| RhoError::io(path, e))
}

/// Binary feature matrix: magic `RHOFEAT1`, `u64` rows, `u64` cols, then
/// row-major `f64` values, all little-endian.
pub fn read_features_bin(path: &Path) -> Result<Array2<f64>> {
    let bytes = fs::read(path).map_err(|e| RhoError::io(path, e))?;
    let bad = |msg: &str| parse_error(path, 0, msg.to_string());
    if bytes.len() < 24 || &bytes[..8] != FEATURES_BIN_MAGIC {
        return Err(bad("missing RHOFEAT1 header"));
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let cols = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes")) as usize;
    let body = &bytes[24..];
    if body.len() != rows * cols * 8 {
        return Err(bad("payload size does not match header"));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Array2::from_shape_vec((rows, cols), data).map_err(|e| bad(&e.to_string()))
}

pub fn write_features_bin(path: &Path, features: &Array2<f64>) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| RhoError::io(path, e))?;
    let mut buf = Vec::with_capacity(24 + features.len() * 8);
    buf.extend_from_slice(FEATURES_BIN_MAGIC);
    buf.extend_from_slice(&(features.nrows() as u64).to_le_bytes());
    buf.extend_from_slice(&(features.ncols() as u64).to_le_bytes());
    for v in features.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    file.write_all(&buf).map_err(|e| RhoError::io(path, e))
}

pub fn read_labels_csv(path: &Path) -> Result<Vec<u8>> {
    let text = read_text(path)?;
    let mut labels = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || (idx == 0 && line.eq_ignore_ascii_case("label")) {
            continue;
        }
        match line {
            "0" => labels.push(0),
            "1" => labels.push(1),
            other => return Err(parse_error(path, idx + 1, format!("label must be 0 or 1, got `{other}`"))),
        }
    }
    Ok(labels)
}

/// Loads `edges.csv`, `features.csv` (or `features.bin`) and `labels.csv`,
/// plus `split.json` when present.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let labels_path = dir.join("labels.csv");
    let labels = read_labels_csv(&labels_path)?;
    let csv_path = dir.join("features.csv");
    let bin_path = dir.join("features.bin");
    let features = if csv_path.exists() || !bin_path.exists() {
        read_features_csv(&csv_path)?
    } else {
        read_features_bin(&bin_path)?
    };
    if features.nrows() != labels.len() {
        return Err(RhoError::RowCountMismatch(format!(
            "features have {} rows but labels have {}",
            features.nrows(),
            labels.len()
        )));
    }
    let edges = Graph::read_edge_csv(&dir.join("edges.csv"))?;
    let graph = Graph::from_edges(&edges, labels.len())?;
    let mut dataset = Dataset::new(graph, features, labels)?;

    let split_path = dir.join("split.json");
    if split_path.exists() {
        let file: SplitFile = serde_json::from_str(&read_text(&split_path)?)?;
        let labeled_set: HashSet<usize> = file.labeled.iter().copied().collect();
        let test = (0..dataset.num_nodes()).filter(|v| !labeled_set.contains(v)).collect();
        dataset = dataset.with_split(Split {
            labeled: file.labeled,
            test,
            contaminated: file.contaminated,
        })?;
    }
    Ok(dataset)
}

/// Samples `floor(R% * |normals|)` normal nodes as labeled; everything else is test.
pub fn sample_split(labels: &[u8], r_percent: f64, seed: u64) -> Result<Split> {
    if !(r_percent > 0.0 && r_percent < 100.0) {
        return Err(RhoError::InvalidInput(format!("R must lie in (0, 100), got {r_percent}")));
    }
    let mut normals: Vec<usize> = (0..labels.len()).filter(|&v| labels[v] == 0).collect();
    if normals.is_empty() {
        return Err(RhoError::InvalidInput("no normal nodes to label".into()));
    }
    let count = (r_percent * normals.len() as f64 / 100.0 + 1e-9).floor() as usize;
    if count == 0 {
        return Err(RhoError::InvalidInput(format!(
            "R = {r_percent}% of {} normal nodes labels nothing",
            normals.len()
        )));
    }
    let mut rng = seed::rng_for(seed, "split");
    let (chosen, _) = normals.partial_shuffle(&mut rng, count);
    let mut labeled = chosen.to_vec();
    labeled.sort_unstable();
    let mut is_labeled = vec![false; labels.len()];
    for &v in &labeled {
        is_labeled[v] = true;
    }
    let test = (0..labels.len()).filter(|&v| !is_labeled[v]).collect();
    Ok(Split {
        labeled,
        test,
        contaminated: Vec::new(),
    })
}

/// Moves `floor(rate * |V_l|)` anomalies from the test set into the labeled set.
pub fn inject_contamination(dataset: &Dataset, rate: f64, seed: u64) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(RhoError::InvalidInput(format!("contamination rate must lie in [0, 1], got {rate}")));
    }
    let split = dataset.split()?;
    let count = (rate * split.labeled.len() as f64 + 1e-9).floor() as usize;
    if count == 0 {
        return Ok(dataset.clone());
    }
    let mut candidates: Vec<usize> = split.test.iter().copied().filter(|&v| dataset.labels[v] == 1).collect();
    if candidates.len() < count {
        return Err(RhoError::InvalidInput(format!(
            "contamination needs {count} anomalies but only {} are unlabeled",
            candidates.len()
        )));
    }
    let mut rng = seed::rng_for(seed, "contamination");
    let (picked, _) = candidates.partial_shuffle(&mut rng, count);
    let mut moved = picked.to_vec();
    moved.sort_unstable();
    let moved_set: HashSet<usize> = moved.iter().copied().collect();

    let mut next = split.clone();
    next.test.retain(|v| !moved_set.contains(v));
    next.labeled.extend_from_slice(&moved);
    next.contaminated.extend_from_slice(&moved);
    let mut out = dataset.clone();
    out.split = Some(next);
    Ok(out)
}

/// Latent group of a synthetic node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeGroup {
    HighHomophily,
    LowHomophily,
    Anomaly,
}

/// Parameters of the mixed-homophily generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n: usize,
    pub anomaly_rate: f64,
    /// Fraction of normal nodes in the low-homophily group.
    pub low_homophily_fraction: f64,
    pub h_high: f64,
    pub h_low: f64,
    /// Target fraction of anomalous neighbors for anomalies.
    pub anomaly_homophily: f64,
    /// Mean degree of normal nodes.
    pub mean_degree: f64,
    pub feature_dim: usize,
    /// Distance between the normal and anomaly feature means.
    pub separation: f64,
    /// Standard deviation of normal features.
    pub noise: f64,
    /// Anomaly noise as a multiple of `noise`.
    pub anomaly_noise_factor: f64,
    pub max_attempts: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n: 1000,
            anomaly_rate: 0.2,
            low_homophily_fraction: 0.5,
            h_high: 0.9,
            h_low: 0.5,
            anomaly_homophily: 0.1,
            mean_degree: 10.0,
            feature_dim: 16,
            separation: 2.0,
            noise: 1.0,
            anomaly_noise_factor: 2.5,
            max_attempts: 20,
            seed: 0,
        }
    }
}

impl SynthSpec {
    /// `"80-20"`, `"50-50"` or `"20-80"`: percent of labeled-class normals in
    /// the low- and high-homophily groups.
    pub fn preset(name: &str) -> Result<Self> {
        let rho = match name {
            "80-20" => 0.8,
            "50-50" => 0.5,
            "20-80" => 0.2,
            other => {
                return Err(RhoError::InvalidConfig(format!(
                    "unknown regime preset `{other}` (expected 80-20, 50-50 or 20-80)"
                )))
            }
        };
        Ok(SynthSpec {
            low_homophily_fraction: rho,
            ..SynthSpec::default()
        })
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(RhoError::InvalidConfig(msg));
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if self.n < 2 {
            return fail(format!("n must be at least 2, got {}", self.n));
        }
        for (name, v) in [
            ("anomaly_rate", self.anomaly_rate),
            ("low_homophily_fraction", self.low_homophily_fraction),
            ("h_high", self.h_high),
            ("h_low", self.h_low),
            ("anomaly_homophily", self.anomaly_homophily),
        ] {
            if !unit(v) {
                return fail(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if self.anomaly_homophily >= 1.0 {
            return fail("anomaly_homophily must be below 1".into());
        }
        if self.h_low >= self.h_high {
            return fail(format!("h_low ({}) must be below h_high ({})", self.h_low, self.h_high));
        }
        if !(self.mean_degree >= 1.0 && self.mean_degree.is_finite()) {
            return fail(format!("mean_degree must be at least 1, got {}", self.mean_degree));
        }
        if self.feature_dim == 0 {
            return fail("feature_dim must be at least 1".into());
        }
        if !(self.noise > 0.0 && self.anomaly_noise_factor > 0.0 && self.separation >= 0.0) {
            return fail("noise and anomaly_noise_factor must be positive, separation non-negative".into());
        }
        if self.max_attempts == 0 {
            return fail("max_attempts must be at least 1".into());
        }
        Ok(())
    }
}

/// Realized statistics of a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthReport {
    pub n: usize,
    pub num_edges: usize,
    pub num_anomalies: usize,
    pub num_high: usize,
    pub num_low: usize,
    /// Low-homophily share of normal nodes.
    pub low_fraction: f64,
    pub high_fraction: f64,
    pub high_mean_homophily: f64,
    pub low_mean_homophily: f64,
    pub anomaly_mean_homophily: f64,
    pub attempts: usize,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub dataset: Dataset,
    pub groups: Vec<NodeGroup>,
    pub report: SynthReport,
}

const HOMOPHILY_TOLERANCE: f64 = 0.05;

/// Pairs stubs at random, rejecting self loops and duplicate edges. Leftover
/// stubs after a few reshuffles are dropped.
fn pair_stubs(mut stubs: Vec<usize>, edges: &mut HashSet<(usize, usize)>, rng: &mut impl Rng) {
    for _ in 0..8 {
        if stubs.len() < 2 {
            return;
        }
        stubs.shuffle(rng);
        let mut leftover = Vec::new();
        let mut iter = stubs.chunks_exact(2);
        for pair in &mut iter {
            let (a, b) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            if a == b || !edges.insert((a, b)) {
                leftover.extend_from_slice(pair);
            }
        }
        leftover.extend_from_slice(iter.remainder());
        stubs = leftover;
    }
}

/// `floor(x)` plus one with probability `frac(x)`, so the mean is `x`.
fn stochastic_round(x: f64, rng: &mut impl Rng) -> usize {
    let base = x.floor();
    base as usize + usize::from(rng.random::<f64>() < x - base)
}

fn random_unit(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Generates a graph whose normal nodes split into a high- and a
/// low-homophily group, with anomalies wired mostly to normal nodes.
pub fn synth_dataset(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let mut rng = seed::rng_for(spec.seed, "synth");
    let n = spec.n;
    let num_anomalies = (spec.anomaly_rate * n as f64).round() as usize;
    let num_normals = n - num_anomalies;
    let num_low = (spec.low_homophily_fraction * num_normals as f64).round() as usize;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut groups = vec![NodeGroup::HighHomophily; n];
    for &v in &order[..num_anomalies] {
        groups[v] = NodeGroup::Anomaly;
    }
    for &v in &order[num_anomalies..num_anomalies + num_low] {
        groups[v] = NodeGroup::LowHomophily;
    }
    let anomalies: Vec<usize> = (0..n).filter(|&v| groups[v] == NodeGroup::Anomaly).collect();
    let labels: Vec<u8> = groups.iter().map(|&g| u8::from(g == NodeGroup::Anomaly)).collect();

    let target = |g: NodeGroup| match g {
        NodeGroup::HighHomophily => spec.h_high,
        NodeGroup::LowHomophily => spec.h_low,
        NodeGroup::Anomaly => spec.anomaly_homophily,
    };

    let low_degree = (spec.mean_degree * 0.5).round().max(1.0) as usize;
    let high_degree = (spec.mean_degree * 1.5).round().max(low_degree as f64) as usize;

    let mut last_report = None;
    for attempt in 1..=spec.max_attempts {
        let mut edges: HashSet<(usize, usize)> = HashSet::new();
        let mut normal_stubs = Vec::new();
        let mut cross_degree = vec![0usize; n];
        for (v, &group) in groups.iter().enumerate() {
            if group == NodeGroup::Anomaly {
                continue;
            }
            let d = rng.random_range(low_degree..=high_degree);
            let same = stochastic_round(target(group) * d as f64, &mut rng);
            normal_stubs.extend(std::iter::repeat_n(v, same));
            let cross = (d - same).min(anomalies.len());
            for &a in anomalies.choose_multiple(&mut rng, cross) {
                edges.insert((v.min(a), v.max(a)));
                cross_degree[a] += 1;
            }
        }
        pair_stubs(normal_stubs, &mut edges, &mut rng);

        let h_a = spec.anomaly_homophily;
        let mut anomaly_stubs = Vec::new();
        for &a in &anomalies {
            let want = stochastic_round(h_a / (1.0 - h_a) * cross_degree[a] as f64, &mut rng);
            anomaly_stubs.extend(std::iter::repeat_n(a, want.min(anomalies.len().saturating_sub(1))));
        }
        pair_stubs(anomaly_stubs, &mut edges, &mut rng);

        let mut edge_list: Vec<(usize, usize)> = edges.into_iter().collect();
        edge_list.sort_unstable();
        let graph = Graph::from_edges(&edge_list, n)?;
        let report = node_homophily(&graph, &labels)?;
        let mean_of = |g: NodeGroup| report.mean_over((0..n).filter(|&v| groups[v] == g)).unwrap_or(f64::NAN);
        let high_mean = mean_of(NodeGroup::HighHomophily);
        let low_mean = mean_of(NodeGroup::LowHomophily);
        let anomaly_mean = mean_of(NodeGroup::Anomaly);
        let within = |m: f64, t: f64, count: usize| count == 0 || (m - t).abs() <= HOMOPHILY_TOLERANCE;
        let synth_report = SynthReport {
            n,
            num_edges: graph.num_edges(),
            num_anomalies,
            num_high: num_normals - num_low,
            num_low,
            low_fraction: if num_normals > 0 { num_low as f64 / num_normals as f64 } else { 0.0 },
            high_fraction: if num_normals > 0 {
                (num_normals - num_low) as f64 / num_normals as f64
            } else {
                0.0
            },
            high_mean_homophily: high_mean,
            low_mean_homophily: low_mean,
            anomaly_mean_homophily: anomaly_mean,
            attempts: attempt,
        };
        if within(high_mean, spec.h_high, num_normals - num_low) && within(low_mean, spec.h_low, num_low) {
            let features = synth_features(spec, &groups, &mut rng);
            let dataset = Dataset::new(graph, features, labels)?;
            return Ok(SynthOutput {
                dataset,
                groups,
                report: synth_report,
            });
        }
        last_report = Some(synth_report);
    }
    let r = last_report.expect("at least one attempt");
    Err(RhoError::Generation(format!(
        "homophily targets not reached after {} attempts (high {:.3} vs {}, low {:.3} vs {}, {} anomalies)",
        spec.max_attempts, r.high_mean_homophily, spec.h_high, r.low_mean_homophily, spec.h_low, num_anomalies
    )))
}

/// Two normal components a quarter of `separation` either side of the
/// origin along one direction, anomalies shifted by `separation` along an
/// independent direction with inflated noise.
fn synth_features(spec: &SynthSpec, groups: &[NodeGroup], rng: &mut impl Rng) -> Array2<f64> {
    let m = spec.feature_dim;
    let normal_axis = random_unit(m, rng);
    let anomaly_axis = random_unit(m, rng);
    let mean = |g: NodeGroup| -> Vec<f64> {
        match g {
            NodeGroup::HighHomophily => normal_axis.iter().map(|a| 0.25 * spec.separation * a).collect(),
            NodeGroup::LowHomophily => normal_axis.iter().map(|a| -0.25 * spec.separation * a).collect(),
            NodeGroup::Anomaly => anomaly_axis.iter().map(|a| spec.separation * a).collect(),
        }
    };
    let means = [
        mean(NodeGroup::HighHomophily),
        mean(NodeGroup::LowHomophily),
        mean(NodeGroup::Anomaly),
    ];
    let mut features = Array2::zeros((groups.len(), m));
    for (v, &g) in groups.iter().enumerate() {
        let (mu, sigma) = match g {
            NodeGroup::HighHomophily => (&means[0], spec.noise),
            NodeGroup::LowHomophily => (&means[1], spec.noise),
            NodeGroup::Anomaly => (&means[2], spec.noise * spec.anomaly_noise_factor),
        };
        for j in 0..m {
            let z: f64 = StandardNormal.sample(rng);
            features[[v, j]] = mu[j] + sigma * z;
        }
    }
    features
}
