//! Domain types for the labeled stochastic block model: parameters,
//! observed graphs, ground-truth assignments, and assumption diagnostics.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::{self, BufRead, Write};

use thiserror::Error;

/// Tolerance for stochasticity / symmetry checks on input parameters.
/// Inputs within this tolerance are renormalized exactly by the loader;
/// anything worse is rejected rather than silently fixed.
pub const PROB_TOL: f64 = 1e-12;

/// Raw LSBM parameters: `K` clusters, labels `0..=L`, cluster proportions
/// `alpha`, and the label-probability tensor `p(i, j, l)`.
///
/// Label `0` is the implicit "no observation" label; by convention it should
/// be the most frequent label under `(alpha, p)`, which the loader checks as
/// a warning.
#[derive(Clone, Debug, PartialEq)]
pub struct LsbmParams {
    k: usize,
    l: usize,
    alpha: Vec<f64>,
    /// Flattened `K x K x (L+1)`, index `(i * K + j) * (L+1) + label`.
    p: Vec<f64>,
}

impl LsbmParams {
    pub fn new(k: usize, l: usize, alpha: Vec<f64>, p: Vec<f64>) -> Result<Self, ParamError> {
        if k == 0 {
            return Err(ParamError::BadShape("K must be at least 1".into()));
        }
        if alpha.len() != k {
            return Err(ParamError::BadShape(format!(
                "alpha has {} entries, expected K={}",
                alpha.len(),
                k
            )));
        }
        if p.len() != k * k * (l + 1) {
            return Err(ParamError::BadShape(format!(
                "p has {} entries, expected K*K*(L+1)={}",
                p.len(),
                k * k * (l + 1)
            )));
        }
        Ok(LsbmParams { k, l, alpha, p })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of nonzero labels; observed labels are `1..=L`.
    pub fn l(&self) -> usize {
        self.l
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    #[inline]
    pub fn p(&self, i: usize, j: usize, label: usize) -> f64 {
        self.p[(i * self.k + j) * (self.l + 1) + label]
    }

    /// The label distribution of a pair of nodes in clusters `(i, j)`.
    #[inline]
    pub fn p_row(&self, i: usize, j: usize) -> &[f64] {
        let w = self.l + 1;
        let base = (i * self.k + j) * w;
        &self.p[base..base + w]
    }

    /// Rows `p(i, 1..K)` as a `K x (L+1)` profile for cluster `i`.
    pub fn cluster_profile(&self, i: usize) -> Vec<&[f64]> {
        (0..self.k).map(|j| self.p_row(i, j)).collect()
    }

    /// Maximum probability of observing a nonzero label.
    pub fn p_bar(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.k {
            for j in 0..self.k {
                for label in 1..=self.l {
                    m = m.max(self.p(i, j, label));
                }
            }
        }
        m
    }

    /// Apply a relabeling `perm` of the clusters: cluster `i` becomes
    /// `perm[i]`. Used by invariance tests.
    pub fn relabeled(&self, perm: &[usize]) -> LsbmParams {
        let w = self.l + 1;
        let mut alpha = vec![0.0; self.k];
        let mut p = vec![0.0; self.p.len()];
        for i in 0..self.k {
            alpha[perm[i]] = self.alpha[i];
            for j in 0..self.k {
                for label in 0..w {
                    p[(perm[i] * self.k + perm[j]) * w + label] = self.p(i, j, label);
                }
            }
        }
        LsbmParams {
            k: self.k,
            l: self.l,
            alpha,
            p,
        }
    }
}

/// A violated parameter invariant, with the offending indices.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("alpha is not a positive probability vector: {0}")]
    BadAlpha(String),
    #[error("p({i},{j},.) is not a probability distribution (sum {sum})")]
    NonStochasticRow { i: usize, j: usize, sum: f64 },
    #[error("p({i},{j},{label}) != p({j},{i},{label})")]
    AsymmetricTensor { i: usize, j: usize, label: usize },
    #[error("bad shape: {0}")]
    BadShape(String),
}

/// All invariant violations found in one validation pass.
#[derive(Debug, Clone, Error)]
pub struct ValidationErrors(pub Vec<ParamError>);

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} parameter error(s):", self.0.len())?;
        for e in &self.0 {
            writeln!(f, "  - {e}")?;
        }
        Ok(())
    }
}

/// Parameters that passed validation. Construction is the only way to get
/// one, so downstream code can rely on the invariants.
#[derive(Clone, Debug)]
pub struct ValidatedParams(LsbmParams);

impl std::ops::Deref for ValidatedParams {
    type Target = LsbmParams;
    fn deref(&self) -> &LsbmParams {
        &self.0
    }
}

/// Check every model invariant, reporting all violations.
pub fn validate_params(params: &LsbmParams) -> Result<ValidatedParams, ValidationErrors> {
    let mut errors = Vec::new();
    let k = params.k;
    let w = params.l + 1;

    let alpha_sum: f64 = params.alpha.iter().sum();
    if params.alpha.iter().any(|&a| a <= 0.0 || a > 1.0) {
        errors.push(ParamError::BadAlpha(format!(
            "entries must lie in (0, 1], got {:?}",
            params.alpha
        )));
    } else if (alpha_sum - 1.0).abs() > PROB_TOL {
        errors.push(ParamError::BadAlpha(format!("sum is {alpha_sum}")));
    }

    for i in 0..k {
        for j in 0..k {
            let row = params.p_row(i, j);
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&x| !(0.0..=1.0).contains(&x)) || (sum - 1.0).abs() > PROB_TOL {
                errors.push(ParamError::NonStochasticRow { i, j, sum });
            }
        }
        for j in (i + 1)..k {
            for label in 0..w {
                if (params.p(i, j, label) - params.p(j, i, label)).abs() > PROB_TOL {
                    errors.push(ParamError::AsymmetricTensor { i, j, label });
                }
            }
        }
    }

    if errors.is_empty() {
        Ok(ValidatedParams(params.clone()))
    } else {
        Err(ValidationErrors(errors))
    }
}

impl ValidatedParams {
    /// Validate and then renormalize exactly: probability rows are divided
    /// by their sums, the tensor is symmetrized by averaging, and alpha is
    /// rescaled to sum to 1. The adjustments are all within `PROB_TOL`.
    pub fn new_normalized(params: LsbmParams) -> Result<Self, ValidationErrors> {
        validate_params(&params)?;
        let mut params = params;
        let k = params.k;
        let w = params.l + 1;
        let alpha_sum: f64 = params.alpha.iter().sum();
        for a in &mut params.alpha {
            *a /= alpha_sum;
        }
        for i in 0..k {
            for j in i..k {
                for label in 0..w {
                    let m = 0.5 * (params.p(i, j, label) + params.p(j, i, label));
                    params.p[(i * k + j) * w + label] = m;
                    params.p[(j * k + i) * w + label] = m;
                }
            }
        }
        for i in 0..k {
            for j in 0..k {
                let base = (i * k + j) * w;
                let sum: f64 = params.p[base..base + w].iter().sum();
                for x in &mut params.p[base..base + w] {
                    *x /= sum;
                }
            }
        }
        Ok(ValidatedParams(params))
    }

    /// Warnings that do not invalidate the parameters. Currently: label 0 is
    /// expected to be the globally most frequent label.
    pub fn warnings(&self) -> Vec<String> {
        let p = &self.0;
        let mut freq = vec![0.0; p.l + 1];
        for i in 0..p.k {
            for j in 0..p.k {
                for (label, f) in freq.iter_mut().enumerate() {
                    *f += p.alpha[i] * p.alpha[j] * p.p(i, j, label);
                }
            }
        }
        let argmax = freq
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        if argmax != 0 {
            vec![format!(
                "label {argmax} is more frequent than label 0 (expected label 0 to mean \"no observation\")"
            )]
        } else {
            Vec::new()
        }
    }
}

#[derive(Deserialize, Serialize)]
struct ParamsFile {
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "L")]
    l: usize,
    alpha: Vec<f64>,
    p: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Error)]
pub enum ParamsIoError {
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Shape(#[from] ParamError),
    #[error(transparent)]
    Invalid(#[from] ValidationErrors),
}

/// Parse, validate and normalize a parameter JSON document
/// `{"K":..,"L":..,"alpha":[..],"p":[[[..]]]}` with `p` indexed `[i][j][l]`.
/// Returns the params together with non-fatal warnings.
pub fn params_from_json(text: &str) -> Result<(ValidatedParams, Vec<String>), ParamsIoError> {
    let file: ParamsFile = serde_json::from_str(text)?;
    let w = file.l + 1;
    let mut p = Vec::with_capacity(file.k * file.k * w);
    if file.p.len() != file.k {
        return Err(ParamError::BadShape(format!(
            "p has {} outer entries, expected K={}",
            file.p.len(),
            file.k
        ))
        .into());
    }
    for (i, pi) in file.p.iter().enumerate() {
        if pi.len() != file.k {
            return Err(ParamError::BadShape(format!("p[{i}] has {} rows", pi.len())).into());
        }
        for (j, pij) in pi.iter().enumerate() {
            if pij.len() != w {
                return Err(ParamError::BadShape(format!(
                    "p[{i}][{j}] has {} labels, expected L+1={w}",
                    pij.len()
                ))
                .into());
            }
            p.extend_from_slice(pij);
        }
    }
    let params = LsbmParams::new(file.k, file.l, file.alpha, p)?;
    let validated = ValidatedParams::new_normalized(params)?;
    let warnings = validated.warnings();
    Ok((validated, warnings))
}

/// Serialize parameters to the JSON document format accepted by
/// [`params_from_json`].
pub fn params_to_json(params: &LsbmParams) -> String {
    let w = params.l + 1;
    let p = (0..params.k)
        .map(|i| {
            (0..params.k)
                .map(|j| params.p_row(i, j).to_vec())
                .collect()
        })
        .collect::<Vec<Vec<Vec<f64>>>>();
    let _ = w;
    serde_json::to_string_pretty(&ParamsFile {
        k: params.k,
        l: params.l,
        alpha: params.alpha.clone(),
        p,
    })
    .expect("params serialize")
}

/// A ground-truth cluster assignment: `sigma[v]` is the 0-based cluster of
/// node `v`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub k: usize,
    pub sigma: Vec<usize>,
}

impl Assignment {
    pub fn n(&self) -> usize {
        self.sigma.len()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.k];
        for &c in &self.sigma {
            sizes[c] += 1;
        }
        sizes
    }
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("node {0} out of range (n = {1})")]
    NodeOutOfRange(usize, usize),
    #[error("label {0} out of range (L = {1})")]
    LabelOutOfRange(u16, usize),
    #[error("self pair ({0},{0})")]
    SelfPair(usize),
    #[error("duplicate pair ({0},{1})")]
    DuplicatePair(usize, usize),
    #[error("line {0}: {1}")]
    Parse(usize, String),
    #[error("io: {0}")]
    Io(#[from] io::Error),
}

/// One observed nonzero label on an unordered node pair, stored with `u < v`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub u: u32,
    pub v: u32,
    pub label: u16,
}

/// An observed labeled graph: for each unordered pair at most one label in
/// `1..=L`; label 0 ("nothing observed") is implicit and never stored.
#[derive(Clone, Debug)]
pub struct LabeledGraph {
    n: usize,
    l: usize,
    edges: Vec<Edge>,
    adj_off: Vec<usize>,
    adj: Vec<(u32, u16)>,
}

impl LabeledGraph {
    /// Build from an edge list; edges are sorted by `(u, v)` and checked for
    /// range, orientation and duplicates.
    pub fn new(n: usize, l: usize, mut edges: Vec<Edge>) -> Result<Self, GraphError> {
        for e in &edges {
            let (u, v) = (e.u as usize, e.v as usize);
            if u >= n || v >= n {
                return Err(GraphError::NodeOutOfRange(u.max(v), n));
            }
            if u == v {
                return Err(GraphError::SelfPair(u));
            }
            if e.u > e.v {
                return Err(GraphError::Parse(
                    0,
                    format!("pair ({u},{v}) not stored with u < v"),
                ));
            }
            if e.label == 0 || e.label as usize > l {
                return Err(GraphError::LabelOutOfRange(e.label, l));
            }
        }
        edges.sort_unstable_by_key(|e| (e.u, e.v));
        for w in edges.windows(2) {
            if w[0].u == w[1].u && w[0].v == w[1].v {
                return Err(GraphError::DuplicatePair(w[0].u as usize, w[0].v as usize));
            }
        }
        let mut deg = vec![0usize; n];
        for e in &edges {
            deg[e.u as usize] += 1;
            deg[e.v as usize] += 1;
        }
        let mut adj_off = vec![0usize; n + 1];
        for v in 0..n {
            adj_off[v + 1] = adj_off[v] + deg[v];
        }
        let mut cursor = adj_off.clone();
        let mut adj = vec![(0u32, 0u16); 2 * edges.len()];
        for e in &edges {
            adj[cursor[e.u as usize]] = (e.v, e.label);
            cursor[e.u as usize] += 1;
            adj[cursor[e.v as usize]] = (e.u, e.label);
            cursor[e.v as usize] += 1;
        }
        Ok(LabeledGraph {
            n,
            l,
            edges,
            adj_off,
            adj,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l(&self) -> usize {
        self.l
    }

    /// Stored (nonzero-label) edges, sorted by `(u, v)`.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Neighbors of `v` with their labels.
    #[inline]
    pub fn neighbors(&self, v: usize) -> &[(u32, u16)] {
        &self.adj[self.adj_off[v]..self.adj_off[v + 1]]
    }

    /// Number of observed labels incident to `v`.
    #[inline]
    pub fn label_degree(&self, v: usize) -> usize {
        self.adj_off[v + 1] - self.adj_off[v]
    }

    /// Write the text format: first line `n L`, then one `u v label` line per
    /// stored edge in `(u, v)` order. Byte-exact round trip with
    /// [`read_graph`].
    pub fn write<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{} {}", self.n, self.l)?;
        for e in &self.edges {
            writeln!(out, "{} {} {}", e.u, e.v, e.label)?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("write to vec");
        String::from_utf8(buf).expect("utf8")
    }
}

/// Parse the graph text format produced by [`LabeledGraph::write`].
pub fn read_graph<R: BufRead>(reader: R) -> Result<LabeledGraph, GraphError> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| GraphError::Parse(1, "empty file".into()))??;
    let mut it = header.split_whitespace();
    let n: usize = it
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| GraphError::Parse(1, "expected `n L`".into()))?;
    let l: usize = it
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| GraphError::Parse(1, "expected `n L`".into()))?;
    if it.next().is_some() {
        return Err(GraphError::Parse(1, "trailing tokens after `n L`".into()));
    }
    let mut edges = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let parse = |s: Option<&str>| -> Option<u64> { s.and_then(|t| t.parse().ok()) };
        let (u, v, label) = match (parse(it.next()), parse(it.next()), parse(it.next())) {
            (Some(u), Some(v), Some(l)) if it.next().is_none() => (u, v, l),
            _ => return Err(GraphError::Parse(idx + 2, format!("bad edge line {line:?}"))),
        };
        edges.push(Edge {
            u: u as u32,
            v: v as u32,
            label: label as u16,
        });
    }
    LabeledGraph::new(n, l, edges)
}

pub fn read_graph_str(text: &str) -> Result<LabeledGraph, GraphError> {
    read_graph(io::BufReader::new(text.as_bytes()))
}

/// Diagnostics for the model assumptions: label-probability homogeneity
/// (`eta`), normalized cluster separation (`eps`), and the sparsity-floor
/// check for a supplied `kappa`.
#[derive(Clone, Debug, Serialize)]
pub struct AssumptionReport {
    /// Max of `p(i,j,l) / p(i,k,l)`; `f64::INFINITY` when a zero denominator
    /// pairs with a positive numerator (diagnostic, not an error).
    pub eta: f64,
    /// Min over cluster pairs of the normalized squared separation; infinite
    /// when K = 1 (no pair exists).
    pub eps: f64,
    pub kappa: f64,
    pub kappa_ok: bool,
    pub p_bar: f64,
}

#[derive(Debug, Error)]
pub enum AssumptionError {
    #[error("all nonzero-label probabilities are zero")]
    DegenerateP,
}

/// Evaluate the assumption diagnostics at instance size `n`.
pub fn assumption_report(
    params: &ValidatedParams,
    n: usize,
    kappa: f64,
) -> Result<AssumptionReport, AssumptionError> {
    let k = params.k();
    let l = params.l();
    let p_bar = params.p_bar();
    if p_bar == 0.0 {
        return Err(AssumptionError::DegenerateP);
    }

    let mut eta: f64 = 1.0;
    for i in 0..k {
        for j in 0..k {
            for kk in 0..k {
                for label in 0..=l {
                    let num = params.p(i, j, label);
                    let den = params.p(i, kk, label);
                    if den > 0.0 {
                        eta = eta.max(num / den);
                    } else if num > 0.0 {
                        eta = f64::INFINITY;
                    }
                }
            }
        }
    }

    let mut eps = f64::INFINITY;
    for i in 0..k {
        for j in (i + 1)..k {
            let mut sq = 0.0;
            for kk in 0..k {
                for label in 1..=l {
                    let d = params.p(i, kk, label) - params.p(j, kk, label);
                    sq += d * d;
                }
            }
            eps = eps.min(sq / (p_bar * p_bar));
        }
    }

    let nf = n as f64;
    let mut min_np = f64::INFINITY;
    for i in 0..k {
        for j in 0..k {
            for label in 1..=l {
                min_np = min_np.min(nf * params.p(j, i, label));
            }
        }
    }
    let kappa_ok = min_np >= (nf * p_bar).powf(kappa);

    Ok(AssumptionReport {
        eta,
        eps,
        kappa,
        kappa_ok,
        p_bar,
    })
}
