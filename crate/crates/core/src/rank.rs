//! Candidate scoring: a bidirectional gated recurrent encoder over the
//! rendered token sequence, a linear emission projection, and a tag
//! transition matrix.
//!
//! A candidate's score is the sum over positions of its tag's emission plus
//! the transition from the previous tag (a start row handles position 0).
//! Ranking is an argmax over the explicit candidate list, so no dynamic
//! program is needed. Training requires gradients of scores with respect to
//! every parameter; these are hand-derived and verified against finite
//! differences in the test suite.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::anonymize::{RenderedItem, SymbolKind};
use crate::segment::{Tag, TAG_COUNT};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("checkpoint {path}: {reason}")]
    BadCheckpoint { path: String, reason: String },
    #[error("pretrained vectors {path}: {reason}")]
    BadVectors { path: String, reason: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub const UNK: &str = "<unk>";
/// Checkpoint format version.
pub const CHECKPOINT_VERSION: u32 = 1;

/// Token-to-index map. Index 0 is the unknown word; indices 1..=8 are the
/// symbol pseudo-tokens; real words follow in first-seen order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    fn pseudo(kind: SymbolKind) -> String {
        format!("<{}>", kind.as_str().to_lowercase())
    }

    fn reserved() -> Vec<String> {
        let mut words = vec![UNK.to_string()];
        words.extend(SymbolKind::ALL.iter().map(|k| Self::pseudo(*k)));
        words
    }

    /// Build from lowercased word tokens in first-seen order.
    pub fn build<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Vocab {
        let mut words = Self::reserved();
        let mut index: HashMap<String, usize> =
            words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        for t in tokens {
            if !index.contains_key(t) {
                index.insert(t.to_string(), words.len());
                words.push(t.to_string());
            }
        }
        Vocab { words, index }
    }

    fn from_words(words: Vec<String>) -> Vocab {
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Vocab { words, index }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn lookup(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(0)
    }

    pub fn kind_index(&self, kind: SymbolKind) -> usize {
        1 + kind.ordinal()
    }

    /// Index for one rendered item: pseudo-token for spans, word otherwise.
    pub fn item_index(&self, item: &RenderedItem) -> usize {
        match item.kind {
            Some(k) => self.kind_index(k),
            None => self.lookup(&item.text),
        }
    }

    pub fn indices(&self, items: &[RenderedItem]) -> Vec<usize> {
        items.iter().map(|i| self.item_index(i)).collect()
    }
}

/// One direction's gated recurrent cell parameters. Gate layout along the
/// first axis is [input, forget, candidate, output], each `hidden` wide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellParams {
    /// `(4*hidden) x embed`, row-major.
    pub w_x: Vec<f64>,
    /// `(4*hidden) x hidden`, row-major.
    pub w_h: Vec<f64>,
    /// `4*hidden`.
    pub b: Vec<f64>,
}

impl CellParams {
    fn zeros(embed: usize, hidden: usize) -> CellParams {
        CellParams {
            w_x: vec![0.0; 4 * hidden * embed],
            w_h: vec![0.0; 4 * hidden * hidden],
            b: vec![0.0; 4 * hidden],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { embed_dim: 100, hidden_dim: 128, seed: 1 }
    }
}

/// All learned parameters plus the vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub vocab: Vocab,
    /// `|V| x embed`, row-major.
    pub embeddings: Vec<f64>,
    pub forward: CellParams,
    pub backward: CellParams,
    /// `(2*hidden) x TAG_COUNT`, row-major.
    pub emission: Vec<f64>,
    /// `(TAG_COUNT+1) x TAG_COUNT`; the extra last row is the start state.
    pub transitions: Vec<f64>,
}

/// Start-state row index within the transition matrix.
pub const START: usize = TAG_COUNT;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Model {
    /// Fresh model with uniform [-0.1, 0.1] weights from a seeded generator.
    /// Biases start at zero except the forget gate's, which starts at one.
    pub fn init(config: ModelConfig, vocab: Vocab) -> Model {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut uniform = |n: usize| -> Vec<f64> {
            (0..n).map(|_| rng.gen_range(-0.1..0.1)).collect()
        };
        let (d, h) = (config.embed_dim, config.hidden_dim);
        let embeddings = uniform(vocab.len() * d);
        let cell = |uniform: &mut dyn FnMut(usize) -> Vec<f64>| {
            let mut p = CellParams {
                w_x: uniform(4 * h * d),
                w_h: uniform(4 * h * h),
                b: vec![0.0; 4 * h],
            };
            for i in h..2 * h {
                p.b[i] = 1.0;
            }
            p
        };
        let forward = cell(&mut uniform);
        let backward = cell(&mut uniform);
        let emission = uniform(2 * h * TAG_COUNT);
        let transitions = uniform((TAG_COUNT + 1) * TAG_COUNT);
        Model {
            config,
            vocab,
            embeddings,
            forward,
            backward,
            emission,
            transitions,
        }
    }

    /// Overwrite embedding rows for vocabulary words found in a text vector
    /// file (one line per word: `word v1 .. vd`).
    pub fn load_pretrained_vectors(&mut self, path: &Path) -> Result<usize, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let d = self.config.embed_dim;
        let mut loaded = 0;
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let word = parts.next().unwrap();
            let Some(&idx) = self.vocab.index.get(word) else {
                continue;
            };
            let values: Result<Vec<f64>, _> = parts.map(str::parse::<f64>).collect();
            let values = values.map_err(|e| ModelError::BadVectors {
                path: path.display().to_string(),
                reason: format!("line {}: {e}", lineno + 1),
            })?;
            if values.len() != d {
                return Err(ModelError::BadVectors {
                    path: path.display().to_string(),
                    reason: format!(
                        "line {}: {} values, expected {d}",
                        lineno + 1,
                        values.len()
                    ),
                });
            }
            self.embeddings[idx * d..(idx + 1) * d].copy_from_slice(&values);
            loaded += 1;
        }
        Ok(loaded)
    }

    pub fn transition(&self, from: usize, to: usize) -> f64 {
        self.transitions[from * TAG_COUNT + to]
    }

    fn embedding(&self, idx: usize) -> &[f64] {
        let d = self.config.embed_dim;
        &self.embeddings[idx * d..(idx + 1) * d]
    }

    /// Run both directions over the input indices, caching everything needed
    /// for backpropagation, and project to per-tag emissions.
    pub fn encode(&self, inputs: &[usize]) -> Encoding {
        let h = self.config.hidden_dim;
        let n = inputs.len();
        let fw = run_direction(self, &self.forward, inputs.iter().copied());
        let bw = run_direction(self, &self.backward, inputs.iter().rev().copied());
        let mut hidden = vec![0.0; n * 2 * h];
        for t in 0..n {
            hidden[t * 2 * h..t * 2 * h + h].copy_from_slice(&fw.h[t]);
            hidden[t * 2 * h + h..(t + 1) * 2 * h].copy_from_slice(&bw.h[n - 1 - t]);
        }
        let mut emissions = vec![0.0; n * TAG_COUNT];
        for t in 0..n {
            let hrow = &hidden[t * 2 * h..(t + 1) * 2 * h];
            let erow = &mut emissions[t * TAG_COUNT..(t + 1) * TAG_COUNT];
            for (k, hk) in hrow.iter().enumerate() {
                let wrow = &self.emission[k * TAG_COUNT..(k + 1) * TAG_COUNT];
                for (e, w) in erow.iter_mut().zip(wrow) {
                    *e += hk * w;
                }
            }
        }
        Encoding {
            inputs: inputs.to_vec(),
            fw,
            bw,
            hidden,
            emissions,
        }
    }

    /// Candidate score: transition from the previous tag (start for the
    /// first) plus the tag's emission, summed over positions.
    pub fn score(&self, tags: &[Tag], enc: &Encoding) -> f64 {
        debug_assert_eq!(tags.len() * TAG_COUNT, enc.emissions.len());
        sequence_score(tags, &enc.emissions, &self.transitions)
    }

    /// Accumulate gradients of a scalar objective into `grads`, given the
    /// objective's gradient with respect to the emission matrix and the
    /// cached encoding. Transition gradients are the caller's job (they do
    /// not flow through the encoder).
    pub fn backprop(&self, enc: &Encoding, d_emissions: &[f64], grads: &mut Gradients) {
        let h = self.config.hidden_dim;
        let n = enc.inputs.len();
        debug_assert_eq!(d_emissions.len(), n * TAG_COUNT);
        // Emission projection: e = hidden . W.
        let mut d_hidden = vec![0.0; n * 2 * h];
        for t in 0..n {
            let hrow = &enc.hidden[t * 2 * h..(t + 1) * 2 * h];
            let drow = &d_emissions[t * TAG_COUNT..(t + 1) * TAG_COUNT];
            let dhrow = &mut d_hidden[t * 2 * h..(t + 1) * 2 * h];
            for k in 0..2 * h {
                let wrow = &self.emission[k * TAG_COUNT..(k + 1) * TAG_COUNT];
                let grow = &mut grads.emission[k * TAG_COUNT..(k + 1) * TAG_COUNT];
                let mut acc = 0.0;
                for j in 0..TAG_COUNT {
                    acc += wrow[j] * drow[j];
                    grow[j] += hrow[k] * drow[j];
                }
                dhrow[k] += acc;
            }
        }
        // Split the hidden gradient into the two directions (backward runs
        // over reversed steps).
        let mut d_fw = vec![vec![0.0; h]; n];
        let mut d_bw = vec![vec![0.0; h]; n];
        for t in 0..n {
            d_fw[t].copy_from_slice(&d_hidden[t * 2 * h..t * 2 * h + h]);
            d_bw[n - 1 - t].copy_from_slice(&d_hidden[t * 2 * h + h..(t + 1) * 2 * h]);
        }
        backprop_direction(self, &self.forward, &enc.fw, &d_fw, &mut grads.forward, &mut grads.embeddings);
        backprop_direction(self, &self.backward, &enc.bw, &d_bw, &mut grads.backward, &mut grads.embeddings);
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let ck = Checkpoint {
            version: CHECKPOINT_VERSION,
            config: self.config,
            vocab: self.vocab.words.clone(),
            embeddings: self.embeddings.clone(),
            forward: self.forward.clone(),
            backward: self.backward.clone(),
            emission: self.emission.clone(),
            transitions: self.transitions.clone(),
        };
        let json = serde_json::to_string(&ck).expect("checkpoint serializes");
        std::fs::write(path, json).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Model, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let ck: Checkpoint =
            serde_json::from_str(&text).map_err(|e| ModelError::BadCheckpoint {
                path: path.display().to_string(),
                reason: e.to_string(),
            })?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(ModelError::BadCheckpoint {
                path: path.display().to_string(),
                reason: format!(
                    "version {} unsupported (expected {CHECKPOINT_VERSION})",
                    ck.version
                ),
            });
        }
        let (d, h) = (ck.config.embed_dim, ck.config.hidden_dim);
        let checks = [
            (ck.embeddings.len(), ck.vocab.len() * d, "embeddings"),
            (ck.forward.w_x.len(), 4 * h * d, "forward.w_x"),
            (ck.backward.w_x.len(), 4 * h * d, "backward.w_x"),
            (ck.forward.w_h.len(), 4 * h * h, "forward.w_h"),
            (ck.backward.w_h.len(), 4 * h * h, "backward.w_h"),
            (ck.forward.b.len(), 4 * h, "forward.b"),
            (ck.backward.b.len(), 4 * h, "backward.b"),
            (ck.emission.len(), 2 * h * TAG_COUNT, "emission"),
            (ck.transitions.len(), (TAG_COUNT + 1) * TAG_COUNT, "transitions"),
        ];
        for (got, want, name) in checks {
            if got != want {
                return Err(ModelError::BadCheckpoint {
                    path: path.display().to_string(),
                    reason: format!("{name} has {got} values, expected {want}"),
                });
            }
        }
        Ok(Model {
            config: ck.config,
            vocab: Vocab::from_words(ck.vocab),
            embeddings: ck.embeddings,
            forward: ck.forward,
            backward: ck.backward,
            emission: ck.emission,
            transitions: ck.transitions,
        })
    }

    /// Named views over every parameter group, for optimizer state and
    /// gradient checking.
    pub fn group_names() -> [&'static str; 9] {
        [
            "embeddings",
            "forward.w_x",
            "forward.w_h",
            "forward.b",
            "backward.w_x",
            "backward.w_h",
            "backward.b",
            "emission",
            "transitions",
        ]
    }

    pub fn group_mut(&mut self, name: &str) -> &mut Vec<f64> {
        match name {
            "embeddings" => &mut self.embeddings,
            "forward.w_x" => &mut self.forward.w_x,
            "forward.w_h" => &mut self.forward.w_h,
            "forward.b" => &mut self.forward.b,
            "backward.w_x" => &mut self.backward.w_x,
            "backward.w_h" => &mut self.backward.w_h,
            "backward.b" => &mut self.backward.b,
            "emission" => &mut self.emission,
            "transitions" => &mut self.transitions,
            other => panic!("unknown parameter group {other}"),
        }
    }
}

/// Raw score computation shared with tests: one emission row per tag plus
/// the transition chain starting from the start row.
pub fn sequence_score(tags: &[Tag], emissions: &[f64], transitions: &[f64]) -> f64 {
    let mut prev = START;
    let mut total = 0.0;
    for (i, tag) in tags.iter().enumerate() {
        let t = tag.index();
        total += transitions[prev * TAG_COUNT + t] + emissions[i * TAG_COUNT + t];
        prev = t;
    }
    total
}

/// Per-direction forward cache.
#[derive(Debug, Clone)]
pub struct DirectionCache {
    /// Input indices in processing order.
    idx: Vec<usize>,
    /// Gate activations per step.
    i: Vec<Vec<f64>>,
    f: Vec<Vec<f64>>,
    g: Vec<Vec<f64>>,
    o: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    /// Hidden states per step, processing order.
    h: Vec<Vec<f64>>,
}

/// Cached encoder pass over one input sequence.
#[derive(Debug, Clone)]
pub struct Encoding {
    pub inputs: Vec<usize>,
    fw: DirectionCache,
    bw: DirectionCache,
    /// `n x (2*hidden)`, row-major, original positions.
    pub hidden: Vec<f64>,
    /// `n x TAG_COUNT`, row-major.
    pub emissions: Vec<f64>,
}

impl Encoding {
    pub fn emission_row(&self, t: usize) -> &[f64] {
        &self.emissions[t * TAG_COUNT..(t + 1) * TAG_COUNT]
    }
}

fn run_direction(
    model: &Model,
    params: &CellParams,
    inputs: impl Iterator<Item = usize>,
) -> DirectionCache {
    let h = model.config.hidden_dim;
    let d = model.config.embed_dim;
    let mut cache = DirectionCache {
        idx: Vec::new(),
        i: Vec::new(),
        f: Vec::new(),
        g: Vec::new(),
        o: Vec::new(),
        c: Vec::new(),
        h: Vec::new(),
    };
    let mut h_prev = vec![0.0; h];
    let mut c_prev = vec![0.0; h];
    for idx in inputs {
        let x = model.embedding(idx);
        let mut z = params.b.clone();
        for (r, zr) in z.iter_mut().enumerate() {
            let wrow = &params.w_x[r * d..(r + 1) * d];
            let hrow = &params.w_h[r * h..(r + 1) * h];
            let mut acc = 0.0;
            for (a, b) in wrow.iter().zip(x) {
                acc += a * b;
            }
            for (a, b) in hrow.iter().zip(&h_prev) {
                acc += a * b;
            }
            *zr += acc;
        }
        let mut gi = vec![0.0; h];
        let mut gf = vec![0.0; h];
        let mut gg = vec![0.0; h];
        let mut go = vec![0.0; h];
        let mut c = vec![0.0; h];
        let mut hv = vec![0.0; h];
        for k in 0..h {
            gi[k] = sigmoid(z[k]);
            gf[k] = sigmoid(z[h + k]);
            gg[k] = z[2 * h + k].tanh();
            go[k] = sigmoid(z[3 * h + k]);
            c[k] = gf[k] * c_prev[k] + gi[k] * gg[k];
            hv[k] = go[k] * c[k].tanh();
        }
        cache.idx.push(idx);
        cache.i.push(gi);
        cache.f.push(gf);
        cache.g.push(gg);
        cache.o.push(go);
        cache.c.push(c.clone());
        cache.h.push(hv.clone());
        h_prev = hv;
        c_prev = c;
    }
    cache
}

/// Backpropagation through one direction. `d_h_ext[step]` is the objective
/// gradient on that step's hidden state (processing order).
fn backprop_direction(
    model: &Model,
    params: &CellParams,
    cache: &DirectionCache,
    d_h_ext: &[Vec<f64>],
    grads: &mut CellParams,
    d_embeddings: &mut [f64],
) {
    let h = model.config.hidden_dim;
    let d = model.config.embed_dim;
    let n = cache.idx.len();
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    for step in (0..n).rev() {
        let (gi, gf, gg, go, c) = (
            &cache.i[step],
            &cache.f[step],
            &cache.g[step],
            &cache.o[step],
            &cache.c[step],
        );
        let c_prev: &[f64] = if step == 0 { &vec![0.0; h] } else { &cache.c[step - 1] };
        let h_prev: Vec<f64> = if step == 0 { vec![0.0; h] } else { cache.h[step - 1].clone() };
        let mut dz = vec![0.0; 4 * h];
        let mut dc_prev = vec![0.0; h];
        for k in 0..h {
            let dh = d_h_ext[step][k] + dh_next[k];
            let tc = c[k].tanh();
            let d_o = dh * tc;
            let dc = dc_next[k] + dh * go[k] * (1.0 - tc * tc);
            let d_i = dc * gg[k];
            let d_f = dc * c_prev[k];
            let d_g = dc * gi[k];
            dz[k] = d_i * gi[k] * (1.0 - gi[k]);
            dz[h + k] = d_f * gf[k] * (1.0 - gf[k]);
            dz[2 * h + k] = d_g * (1.0 - gg[k] * gg[k]);
            dz[3 * h + k] = d_o * go[k] * (1.0 - go[k]);
            dc_prev[k] = dc * gf[k];
        }
        let x = model.embedding(cache.idx[step]);
        let dx_slice = &mut d_embeddings[cache.idx[step] * d..(cache.idx[step] + 1) * d];
        let mut dh_prev = vec![0.0; h];
        for (r, &dzr) in dz.iter().enumerate() {
            grads.b[r] += dzr;
            let gw = &mut grads.w_x[r * d..(r + 1) * d];
            for (gwc, xc) in gw.iter_mut().zip(x) {
                *gwc += dzr * xc;
            }
            let wrow = &params.w_x[r * d..(r + 1) * d];
            for (dxc, wc) in dx_slice.iter_mut().zip(wrow) {
                *dxc += dzr * wc;
            }
            let gh = &mut grads.w_h[r * h..(r + 1) * h];
            for (ghc, hc) in gh.iter_mut().zip(&h_prev) {
                *ghc += dzr * hc;
            }
            let hrow = &params.w_h[r * h..(r + 1) * h];
            for (dhc, wc) in dh_prev.iter_mut().zip(hrow) {
                *dhc += dzr * wc;
            }
        }
        dh_next = dh_prev;
        dc_next = dc_prev;
    }
}

/// Gradient accumulator with the model's shapes.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub embeddings: Vec<f64>,
    pub forward: CellParams,
    pub backward: CellParams,
    pub emission: Vec<f64>,
    pub transitions: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(model: &Model) -> Gradients {
        let (d, h) = (model.config.embed_dim, model.config.hidden_dim);
        Gradients {
            embeddings: vec![0.0; model.embeddings.len()],
            forward: CellParams::zeros(d, h),
            backward: CellParams::zeros(d, h),
            emission: vec![0.0; model.emission.len()],
            transitions: vec![0.0; model.transitions.len()],
        }
    }

    pub fn add_transition(&mut self, from: usize, to: usize, value: f64) {
        self.transitions[from * TAG_COUNT + to] += value;
    }

    pub fn group(&self, name: &str) -> &Vec<f64> {
        match name {
            "embeddings" => &self.embeddings,
            "forward.w_x" => &self.forward.w_x,
            "forward.w_h" => &self.forward.w_h,
            "forward.b" => &self.forward.b,
            "backward.w_x" => &self.backward.w_x,
            "backward.w_h" => &self.backward.w_h,
            "backward.b" => &self.backward.b,
            "emission" => &self.emission,
            "transitions" => &self.transitions,
            other => panic!("unknown parameter group {other}"),
        }
    }

    fn group_mut(&mut self, name: &str) -> &mut Vec<f64> {
        match name {
            "embeddings" => &mut self.embeddings,
            "forward.w_x" => &mut self.forward.w_x,
            "forward.w_h" => &mut self.forward.w_h,
            "forward.b" => &mut self.forward.b,
            "backward.w_x" => &mut self.backward.w_x,
            "backward.w_h" => &mut self.backward.w_h,
            "backward.b" => &mut self.backward.b,
            "emission" => &mut self.emission,
            "transitions" => &mut self.transitions,
            other => panic!("unknown parameter group {other}"),
        }
    }

    /// Global L2 norm over every group.
    pub fn l2_norm(&self) -> f64 {
        Model::group_names()
            .iter()
            .map(|n| self.group(n).iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    /// Scale all gradients so the global L2 norm is at most `max_norm`.
    pub fn clip(&mut self, max_norm: f64) {
        let norm = self.l2_norm();
        if norm > max_norm && norm > 0.0 {
            let scale = max_norm / norm;
            for name in Model::group_names() {
                for v in self.group_mut(name).iter_mut() {
                    *v *= scale;
                }
            }
        }
    }
}

/// Per-parameter adaptive step-size state (Adam with bias correction).
#[derive(Debug, Clone)]
pub struct Optimizer {
    pub learning_rate: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
    m: HashMap<&'static str, Vec<f64>>,
    v: HashMap<&'static str, Vec<f64>>,
}

impl Optimizer {
    pub fn new(learning_rate: f64, model: &Model) -> Optimizer {
        let mut m = HashMap::new();
        let mut v = HashMap::new();
        let probe = Gradients::zeros_like(model);
        for name in Model::group_names() {
            m.insert(name, vec![0.0; probe.group(name).len()]);
            v.insert(name, vec![0.0; probe.group(name).len()]);
        }
        Optimizer {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m,
            v,
        }
    }

    /// Apply one update in the descent direction of `grads`.
    pub fn apply(&mut self, model: &mut Model, grads: &Gradients) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for name in Model::group_names() {
            let g = grads.group(name);
            let m = self.m.get_mut(name).unwrap();
            let v = self.v.get_mut(name).unwrap();
            let p = model.group_mut(name);
            for k in 0..g.len() {
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * g[k];
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * g[k] * g[k];
                let mhat = m[k] / bc1;
                let vhat = v[k] / bc2;
                p[k] -= self.learning_rate * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    config: ModelConfig,
    vocab: Vec<String>,
    embeddings: Vec<f64>,
    forward: CellParams,
    backward: CellParams,
    emission: Vec<f64>,
    transitions: Vec<f64>,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "model(vocab={}, embed={}, hidden={}, tags={})",
            self.vocab.len(),
            self.config.embed_dim,
            self.config.hidden_dim,
            TAG_COUNT
        )
    }
}

/// Argmax over candidate scores; ties keep the first.
pub fn argmax(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.is_none_or(|b| s > scores[b]) {
            best = Some(i);
        }
    }
    best
}
