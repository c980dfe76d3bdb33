//! Katz back-off n-gram language model with Good-Turing discounting, ARPA
//! text import/export and exact Viterbi decoding of word-graphs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write;

use crate::corpus::WordGraph;
use crate::decoder::DecodeResult;
use crate::error::{Error, Result};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

pub const DEFAULT_ORDER: usize = 3;
/// Counts up to this value are Good-Turing discounted.
pub const DEFAULT_K_GT: u64 = 5;

const BOS_ID: u32 = 0;
const EOS_ID: u32 = 1;
const UNK_ID: u32 = 2;

/// ARPA files write log10(0) as this value.
const ARPA_ZERO: f64 = -99.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KatzConfig {
    pub order: usize,
    pub k_gt: u64,
    /// Map words seen once in training to the unknown token.
    pub singletons_to_unk: bool,
}

impl Default for KatzConfig {
    fn default() -> Self {
        KatzConfig {
            order: DEFAULT_ORDER,
            k_gt: DEFAULT_K_GT,
            singletons_to_unk: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NgramModel {
    order: usize,
    vocab: HashMap<String, u32>,
    words: Vec<String>,
    /// Raw k-gram counts per order (empty for models read from ARPA).
    counts: Vec<HashMap<Vec<u32>, u64>>,
    /// Discount ratio d_r for r = 1..=k_GT, per order.
    discounts: Vec<Vec<f64>>,
    /// ln P(w | h) of every explicitly stored k-gram, per order.
    probs: Vec<HashMap<Vec<u32>, f64>>,
    /// ln of the back-off weight of every stored context, by context length.
    backoff: Vec<HashMap<Vec<u32>, f64>>,
}

/// Good-Turing ratios d_r = (r*/r − A)/(1 − A), A = (k+1)·n_{k+1}/n_1, for
/// r = 1..=k. When these are unusable (a missing count-of-count, or a ratio
/// outside (0, 1]) a constant discount D = n_1/(n_1 + 2·n_2) is used instead,
/// d_r = (r − D)/r, with D = 1/2 if that estimate is not in (0, 1).
pub fn good_turing_discounts(count_of_counts: &BTreeMap<u64, u64>, k: u64) -> Vec<f64> {
    let n = |r: u64| count_of_counts.get(&r).copied().unwrap_or(0) as f64;
    if k == 0 {
        return Vec::new();
    }
    let a = (k + 1) as f64 * n(k + 1) / n(1);
    let gt: Vec<f64> = (1..=k)
        .map(|r| {
            let rstar = (r + 1) as f64 * n(r + 1) / n(r);
            (rstar / r as f64 - a) / (1.0 - a)
        })
        .collect();
    if gt.iter().all(|d| d.is_finite() && *d > 0.0 && *d <= 1.0) {
        return gt;
    }
    let mut d = n(1) / (n(1) + 2.0 * n(2));
    if !(d > 0.0 && d < 1.0) {
        d = 0.5;
    }
    (1..=k).map(|r| (r as f64 - d) / r as f64).collect()
}

/// Trains with the default Katz configuration except for `order` and `k_gt`.
pub fn train_katz<S: AsRef<str>>(corpus: &[Vec<S>], order: usize, k_gt: u64) -> Result<NgramModel> {
    train_katz_with(
        corpus,
        KatzConfig {
            order,
            k_gt,
            ..KatzConfig::default()
        },
    )
}

pub fn train_katz_with<S: AsRef<str>>(corpus: &[Vec<S>], config: KatzConfig) -> Result<NgramModel> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if config.order == 0 {
        return Err(Error::Config("n-gram order must be at least 1".into()));
    }
    let n = config.order;
    let mut freq: BTreeMap<&str, u64> = BTreeMap::new();
    for s in corpus {
        for w in s {
            let w = w.as_ref();
            if w == BOS || w == EOS || w == UNK {
                return Err(Error::Config(format!("reserved token `{w}` in training data")));
            }
            *freq.entry(w).or_insert(0) += 1;
        }
    }
    let mut model = NgramModel::empty(n);
    for (w, c) in &freq {
        if !(config.singletons_to_unk && *c == 1) {
            model.intern(w);
        }
    }
    for s in corpus {
        let mut seq = vec![BOS_ID; n - 1];
        seq.extend(s.iter().map(|w| model.id(w.as_ref())));
        seq.push(EOS_ID);
        for i in n - 1..seq.len() {
            for k in 1..=n {
                *model.counts[k - 1].entry(seq[i + 1 - k..=i].to_vec()).or_insert(0) += 1;
            }
        }
    }
    model.estimate(config.k_gt);
    Ok(model)
}

impl NgramModel {
    fn empty(order: usize) -> Self {
        let mut m = NgramModel {
            order,
            vocab: HashMap::new(),
            words: Vec::new(),
            counts: vec![HashMap::new(); order],
            discounts: vec![Vec::new(); order],
            probs: vec![HashMap::new(); order],
            backoff: vec![HashMap::new(); order.saturating_sub(1)],
        };
        for w in [BOS, EOS, UNK] {
            m.intern(w);
        }
        m
    }

    fn intern(&mut self, w: &str) -> u32 {
        if let Some(&id) = self.vocab.get(w) {
            return id;
        }
        let id = self.words.len() as u32;
        self.vocab.insert(w.to_string(), id);
        self.words.push(w.to_string());
        id
    }

    /// Id of `w`, or of the unknown token.
    fn id(&self, w: &str) -> u32 {
        match self.vocab.get(w) {
            Some(&id) if id != BOS_ID => id,
            _ => UNK_ID,
        }
    }

    fn estimate(&mut self, k_gt: u64) {
        for k in 1..=self.order {
            let mut coc: BTreeMap<u64, u64> = BTreeMap::new();
            for &c in self.counts[k - 1].values() {
                *coc.entry(c).or_insert(0) += 1;
            }
            self.discounts[k - 1] = good_turing_discounts(&coc, k_gt);
        }
        let d = |disc: &[f64], c: u64| if c as usize <= disc.len() { disc[c as usize - 1] } else { 1.0 };

        // unigrams: leftover mass goes to the unknown token
        let total: u64 = self.counts[0].values().sum();
        let mut uni: HashMap<u32, f64> = HashMap::new();
        for (g, &c) in &self.counts[0] {
            uni.insert(g[0], d(&self.discounts[0], c) * c as f64 / total as f64);
        }
        let left = 1.0 - uni.values().sum::<f64>();
        if left > 1e-12 {
            *uni.entry(UNK_ID).or_insert(0.0) += left;
        } else if !uni.contains_key(&UNK_ID) {
            let scale = total as f64 / (total + 1) as f64;
            for p in uni.values_mut() {
                *p *= scale;
            }
            uni.insert(UNK_ID, 1.0 / (total + 1) as f64);
        }
        self.probs[0] = uni.into_iter().map(|(w, p)| (vec![w], p.ln())).collect();

        for k in 2..=self.order {
            let mut ctx_total: HashMap<&[u32], u64> = HashMap::new();
            for (g, &c) in &self.counts[k - 1] {
                *ctx_total.entry(&g[..k - 1]).or_insert(0) += c;
            }
            let mut probs = HashMap::new();
            let mut seen: HashMap<&[u32], Vec<u32>> = HashMap::new();
            for (g, &c) in &self.counts[k - 1] {
                let h = &g[..k - 1];
                let p = d(&self.discounts[k - 1], c) * c as f64 / ctx_total[h] as f64;
                probs.insert(g.clone(), p.ln());
                seen.entry(h).or_default().push(g[k - 1]);
            }
            let mut bo = HashMap::new();
            for (h, ws) in &seen {
                let mut here = 0.0;
                let mut lower = 0.0;
                for &w in ws {
                    let mut g = h.to_vec();
                    g.push(w);
                    here += probs[&g].exp();
                    lower += self.logprob_ids(&h[1..], w).exp();
                }
                let num = 1.0 - here;
                let den = 1.0 - lower;
                let alpha = if num > 1e-15 && den > 1e-15 { num / den } else { 0.0 };
                bo.insert(h.to_vec(), alpha.ln());
            }
            self.probs[k - 1] = probs;
            self.backoff[k - 2] = bo;
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Predictable tokens: training words, the end token and the unknown token.
    pub fn vocabulary(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.words[1..].iter().map(String::as_str).collect();
        v.sort_unstable();
        v
    }

    /// Raw count of a k-gram given as tokens (0 for models read from ARPA).
    pub fn count(&self, gram: &[&str]) -> u64 {
        if gram.is_empty() || gram.len() > self.order {
            return 0;
        }
        let ids: Option<Vec<u32>> = gram.iter().map(|w| self.vocab.get(*w).copied()).collect();
        ids.and_then(|ids| self.counts[gram.len() - 1].get(&ids).copied()).unwrap_or(0)
    }

    /// Good-Turing discount ratios d_1..d_k of order `k` (1-based).
    pub fn discounts(&self, k: usize) -> &[f64] {
        &self.discounts[k - 1]
    }

    /// Natural-log back-off weight of a context, if stored.
    pub fn backoff_weight(&self, context: &[&str]) -> Option<f64> {
        if context.is_empty() || context.len() >= self.order {
            return None;
        }
        let ids: Vec<u32> = context.iter().map(|w| self.vocab.get(*w).copied()).collect::<Option<_>>()?;
        self.backoff[context.len() - 1].get(&ids).copied()
    }

    /// Contexts with at least one stored continuation, as token lists.
    pub fn observed_contexts(&self) -> Vec<Vec<&str>> {
        let mut out: BTreeSet<Vec<&str>> = BTreeSet::new();
        for k in 2..=self.order {
            for g in self.probs[k - 1].keys() {
                out.insert(g[..k - 1].iter().map(|&i| self.words[i as usize].as_str()).collect());
            }
        }
        out.into_iter().collect()
    }

    fn logprob_ids(&self, h: &[u32], w: u32) -> f64 {
        let mut h = h;
        let mut acc = 0.0;
        let mut key = Vec::with_capacity(h.len() + 1);
        loop {
            key.clear();
            key.extend_from_slice(h);
            key.push(w);
            if let Some(p) = self.probs[h.len()].get(&key) {
                return acc + p;
            }
            if h.is_empty() {
                return f64::NEG_INFINITY;
            }
            acc += self.backoff[h.len() - 1].get(h).copied().unwrap_or(0.0);
            if acc == f64::NEG_INFINITY {
                return acc;
            }
            h = &h[1..];
        }
    }

    /// ln P(w | context); only the last order−1 context tokens are used and
    /// unknown tokens map to the unknown token.
    pub fn logprob(&self, context: &[&str], w: &str) -> f64 {
        let h: Vec<u32> = context.iter().map(|t| self.context_id(t)).collect();
        let h = &h[h.len().saturating_sub(self.order - 1)..];
        self.logprob_ids(h, self.id(w))
    }

    fn context_id(&self, w: &str) -> u32 {
        if w == BOS {
            BOS_ID
        } else {
            self.id(w)
        }
    }

    /// Natural-log probability of a sentence, including the end token.
    pub fn logprob_sentence<S: AsRef<str>>(&self, words: &[S]) -> f64 {
        let mut h = vec![BOS_ID; self.order - 1];
        let mut total = 0.0;
        for w in words.iter().map(|w| self.id(w.as_ref())).chain(std::iter::once(EOS_ID)) {
            total += self.logprob_ids(&h, w);
            if !h.is_empty() {
                h.remove(0);
                h.push(w);
            }
        }
        total
    }

    /// ARPA text: log10 probabilities and back-off weights. Contexts that
    /// never occur as predicted k-grams (such as `<s>`) are listed with
    /// probability -99.
    pub fn to_arpa(&self) -> String {
        let lines: Vec<Vec<(Vec<u32>, f64, Option<f64>)>> = (1..=self.order)
            .map(|k| {
                let mut keys: BTreeSet<&Vec<u32>> = self.probs[k - 1].keys().collect();
                if k < self.order {
                    keys.extend(self.backoff[k - 1].keys());
                }
                let mut rows: Vec<(Vec<u32>, f64, Option<f64>)> = keys
                    .into_iter()
                    .map(|g| {
                        let p = self.probs[k - 1].get(g).copied().unwrap_or(f64::NEG_INFINITY);
                        let bo = if k < self.order { self.backoff[k - 1].get(g).copied() } else { None };
                        (g.clone(), p, bo)
                    })
                    .collect();
                rows.sort_by(|a, b| self.tokens(&a.0).cmp(&self.tokens(&b.0)));
                rows
            })
            .collect();
        let mut out = String::from("\n\\data\\\n");
        for (k, rows) in lines.iter().enumerate() {
            let _ = writeln!(out, "ngram {}={}", k + 1, rows.len());
        }
        for (k, rows) in lines.iter().enumerate() {
            let _ = writeln!(out, "\n\\{}-grams:", k + 1);
            for (g, p, bo) in rows {
                let _ = write!(out, "{}\t{}", log10_text(*p), self.tokens(g).join(" "));
                if let Some(bo) = bo {
                    let _ = write!(out, "\t{}", log10_text(*bo));
                }
                out.push('\n');
            }
        }
        out.push_str("\n\\end\\\n");
        out
    }

    fn tokens(&self, g: &[u32]) -> Vec<&str> {
        g.iter().map(|&i| self.words[i as usize].as_str()).collect()
    }

    pub fn from_arpa(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::Arpa {
            line,
            msg: msg.to_string(),
        };
        let mut declared: Vec<usize> = Vec::new();
        let mut section: Option<usize> = None;
        let mut in_data = false;
        let mut rows: Vec<Vec<(Vec<String>, f64, Option<f64>)>> = Vec::new();
        let mut ended = false;
        for (i, raw) in text.lines().enumerate() {
            let ln = i + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if line == "\\data\\" {
                in_data = true;
                continue;
            }
            if line == "\\end\\" {
                ended = true;
                break;
            }
            if let Some(k) = line.strip_prefix('\\').and_then(|l| l.strip_suffix("-grams:")) {
                let k: usize = k.parse().map_err(|_| bad(ln, "bad section header"))?;
                if k != rows.len() + 1 || k > declared.len() {
                    return Err(bad(ln, "unexpected section"));
                }
                rows.push(Vec::new());
                section = Some(k);
                in_data = false;
                continue;
            }
            if in_data {
                let spec = line.strip_prefix("ngram ").ok_or_else(|| bad(ln, "expected `ngram k=count`"))?;
                let (k, c) = spec.split_once('=').ok_or_else(|| bad(ln, "expected `ngram k=count`"))?;
                let k: usize = k.trim().parse().map_err(|_| bad(ln, "bad order"))?;
                let c: usize = c.trim().parse().map_err(|_| bad(ln, "bad count"))?;
                if k != declared.len() + 1 {
                    return Err(bad(ln, "orders must be listed 1, 2, ..."));
                }
                declared.push(c);
                continue;
            }
            let k = section.ok_or_else(|| bad(ln, "entry outside any section"))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != k + 1 && fields.len() != k + 2 {
                return Err(bad(ln, "wrong number of fields"));
            }
            let p = parse_log10(fields[0]).ok_or_else(|| bad(ln, "bad probability"))?;
            let words = fields[1..=k].iter().map(|s| s.to_string()).collect();
            let bo = match fields.get(k + 1) {
                Some(s) => Some(parse_log10(s).ok_or_else(|| bad(ln, "bad back-off weight"))?),
                None => None,
            };
            rows[k - 1].push((words, p, bo));
        }
        if !ended {
            return Err(bad(text.lines().count(), "missing \\end\\"));
        }
        if declared.is_empty() || rows.len() != declared.len() {
            return Err(bad(0, "missing sections"));
        }
        for (k, r) in rows.iter().enumerate() {
            if r.len() != declared[k] {
                return Err(bad(0, &format!("{}-gram count does not match header", k + 1)));
            }
        }
        let mut m = NgramModel::empty(declared.len());
        for r in &rows[0] {
            m.intern(&r.0[0]);
        }
        for (k, list) in rows.iter().enumerate() {
            for (words, p, bo) in list {
                let ids: Vec<u32> = words
                    .iter()
                    .map(|w| m.vocab.get(w).copied().ok_or_else(|| bad(0, &format!("`{w}` missing from unigrams"))))
                    .collect::<Result<_>>()?;
                if *p > f64::NEG_INFINITY {
                    m.probs[k].insert(ids.clone(), *p);
                }
                if let Some(bo) = bo {
                    if k + 1 >= m.order {
                        return Err(bad(0, "back-off weight on a highest-order entry"));
                    }
                    m.backoff[k].insert(ids, *bo);
                }
            }
        }
        Ok(m)
    }
}

fn log10_text(ln: f64) -> String {
    if ln == f64::NEG_INFINITY {
        format!("{ARPA_ZERO}")
    } else {
        format!("{}", ln / std::f64::consts::LN_10)
    }
}

fn parse_log10(s: &str) -> Option<f64> {
    let v: f64 = s.parse().ok()?;
    if v <= ARPA_ZERO {
        Some(f64::NEG_INFINITY)
    } else {
        Some(v * std::f64::consts::LN_10)
    }
}

/// Highest-scoring full path of `graph` under LM log-probability plus
/// `acoustic_weight` times the path's acoustic score, by Viterbi search over
/// (lattice node, last order−1 tokens) states.
pub fn ngram_best_string(graph: &WordGraph, model: &NgramModel, acoustic_weight: f64) -> DecodeResult {
    #[derive(Clone)]
    struct Entry {
        score: f64,
        lm: f64,
        back: Option<(usize, Vec<u32>, usize)>,
    }
    let n = model.order;
    let useful = graph.useful_arcs();
    let mut out_arcs: Vec<Vec<usize>> = vec![Vec::new(); graph.node_count()];
    for &a in &useful {
        out_arcs[graph.arcs()[a].from].push(a);
    }
    let mut states: Vec<BTreeMap<Vec<u32>, Entry>> = vec![BTreeMap::new(); graph.node_count()];
    states[graph.start()].insert(
        vec![BOS_ID; n - 1],
        Entry {
            score: 0.0,
            lm: 0.0,
            back: None,
        },
    );
    for &v in graph.topological() {
        if v == graph.end() {
            continue;
        }
        let here = std::mem::take(&mut states[v]);
        for (ctx, e) in &here {
            for &a in &out_arcs[v] {
                let arc = &graph.arcs()[a];
                let w = model.id(&arc.word);
                let lp = model.logprob_ids(ctx, w);
                let ac = if acoustic_weight == 0.0 { 0.0 } else { acoustic_weight * arc.acoustic.unwrap_or(0.0) };
                let mut next = ctx.clone();
                if n > 1 {
                    next.remove(0);
                    next.push(w);
                }
                let cand = Entry {
                    score: e.score + lp + ac,
                    lm: e.lm + lp,
                    back: Some((v, ctx.clone(), a)),
                };
                let slot = states[arc.to].entry(next);
                match slot {
                    std::collections::btree_map::Entry::Vacant(s) => {
                        s.insert(cand);
                    }
                    std::collections::btree_map::Entry::Occupied(mut s) => {
                        if cand.score > s.get().score {
                            s.insert(cand);
                        }
                    }
                }
            }
        }
        states[v] = here;
    }
    let mut best: Option<(Vec<u32>, f64, f64)> = None;
    for (ctx, e) in &states[graph.end()] {
        let lp = model.logprob_ids(ctx, EOS_ID);
        let score = e.score + lp;
        if best.as_ref().is_none_or(|b| score > b.1) {
            best = Some((ctx.clone(), score, e.lm + lp));
        }
    }
    let (mut ctx, score, lm) = best.expect("the end node is reachable");
    let mut node = graph.end();
    let mut arcs = Vec::new();
    while let Some((prev, pctx, a)) = states[node][&ctx].back.clone() {
        arcs.push(a);
        node = prev;
        ctx = pctx;
    }
    arcs.reverse();
    DecodeResult {
        best_string: graph.path_words(&arcs),
        string_logprob: lm,
        score,
        derivations_used: 1,
        fallback_used: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::WordArc;

    fn corpus(lines: &[&str]) -> Vec<Vec<String>> {
        lines
            .iter()
            .map(|l| l.split_whitespace().map(str::to_string).collect())
            .collect()
    }

    fn context_sums(m: &NgramModel) -> Vec<f64> {
        let vocab = m.vocabulary();
        m.observed_contexts()
            .iter()
            .map(|h| vocab.iter().map(|w| m.logprob(h, w).exp()).sum())
            .collect()
    }

    #[test]
    fn toy_bigram_by_hand() {
        let m = train_katz(&corpus(&["a b"]), 2, DEFAULT_K_GT).unwrap();
        // n_1 = 3, n_2 = 0 at both orders: constant discount 1/2
        assert_eq!(m.discounts(2)[0], 0.5);
        let p = |h: &str, w: &str| m.logprob(&[h], w).exp();
        assert!((p("a", "b") - 0.5).abs() < 1e-12);
        // α(a) = 0.5 / (1 - 1/6)
        assert!((p("a", "a") - 0.6 / 6.0).abs() < 1e-12);
        assert!((p("a", EOS) - 0.1).abs() < 1e-12);
        assert!((p("a", "zzz") - 0.3).abs() < 1e-12);
        for s in context_sums(&m) {
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert!(train_katz::<String>(&[], 2, 5).is_err());
    }

    #[test]
    fn undiscounted_counts_give_relative_frequencies() {
        let c = corpus(&["a b", "a c", "a b", "a b"]);
        let m = train_katz(&c, 3, 0).unwrap();
        assert!((m.logprob(&[BOS, "a"], "b").exp() - 0.75).abs() < 1e-12);
        assert!((m.logprob(&[BOS, "a"], "c").exp() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn contexts_normalize() {
        let c = corpus(&[
            "ik wil naar amsterdam",
            "ik wil morgen naar utrecht",
            "nee ik wil naar amsterdam",
            "naar utrecht",
            "ik wil niet naar utrecht maar naar amsterdam",
            "morgen",
        ]);
        for order in 1..=4 {
            let m = train_katz(&c, order, DEFAULT_K_GT).unwrap();
            for s in context_sums(&m) {
                assert!((s - 1.0).abs() < 1e-9, "order {order}: {s}");
            }
            let uni: f64 = m.vocabulary().iter().map(|w| m.logprob(&[], w).exp()).sum();
            assert!((uni - 1.0).abs() < 1e-12);
            assert!(m.logprob_sentence(&["onbekend", "woord"]).is_finite());
        }
    }

    #[test]
    fn sentence_scores() {
        let m = train_katz(&corpus(&["a b c"]), 3, DEFAULT_K_GT).unwrap();
        let empty: [&str; 0] = [];
        assert_eq!(m.logprob_sentence(&empty), m.logprob(&[BOS, BOS], EOS));
        let own = m.logprob_sentence(&["a", "b", "c"]);
        for s in [["a", "c", "b"], ["c", "b", "a"], ["a", "a", "a"], ["b", "b", "c"]] {
            assert!(m.logprob_sentence(&s) < own);
        }
    }

    #[test]
    fn singletons_to_unk() {
        let c = corpus(&["a b", "a c"]);
        let m = train_katz_with(
            &c,
            KatzConfig {
                order: 2,
                singletons_to_unk: true,
                ..KatzConfig::default()
            },
        )
        .unwrap();
        assert_eq!(m.count(&[UNK]), 2);
        assert_eq!(m.logprob(&["a"], "b"), m.logprob(&["a"], "never-seen"));
    }

    #[test]
    fn arpa_round_trip() {
        let c = corpus(&["a b c", "a b", "b c a", "c"]);
        let m = train_katz(&c, 3, DEFAULT_K_GT).unwrap();
        let text = m.to_arpa();
        assert!(text.contains("-99\t<s>\t"));
        let back = NgramModel::from_arpa(&text).unwrap();
        for s in [vec!["a", "b", "c"], vec!["c", "c", "x"], vec![], vec!["b"]] {
            assert!((m.logprob_sentence(&s) - back.logprob_sentence(&s)).abs() < 1e-9);
        }
        assert_eq!(back.to_arpa(), text);
        assert!(NgramModel::from_arpa("\\data\\\nngram 1=2\n\n\\1-grams:\n-1\ta\n\\end\\\n").is_err());
    }

    fn arc(from: usize, to: usize, w: &str, ac: f64) -> WordArc {
        WordArc {
            from,
            to,
            word: w.into(),
            acoustic: Some(ac),
        }
    }

    #[test]
    fn viterbi_matches_path_enumeration() {
        let m = train_katz(&corpus(&["ik wil naar amsterdam", "ik wil naar utrecht", "ik naar huis"]), 3, 5).unwrap();
        let g = WordGraph::new(
            5,
            0,
            4,
            vec![
                arc(0, 1, "ik", -0.1),
                arc(0, 1, "dik", -0.05),
                arc(1, 2, "wil", -0.3),
                arc(1, 2, "wel", -0.2),
                arc(2, 3, "naar", -0.1),
                arc(1, 3, "naar", -0.9),
                arc(3, 4, "amsterdam", -0.4),
                arc(3, 4, "utrecht", -0.3),
                arc(3, 4, "huis", -0.2),
            ],
        )
        .unwrap();
        for aw in [0.0, 1.0, 5.0] {
            let r = ngram_best_string(&g, &m, aw);
            let paths = g.paths(1000).unwrap();
            let scored: Vec<(f64, Vec<String>)> = paths
                .iter()
                .map(|p| {
                    let w = g.path_words(p);
                    (m.logprob_sentence(&w) + aw * g.path_acoustic(p), w)
                })
                .collect();
            let best = scored.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
            assert!((r.score - best).abs() < 1e-9);
            // the returned string attains the maximum (ties are possible)
            let own = scored.iter().find(|s| s.1 == r.best_string).unwrap();
            assert!((own.0 - best).abs() < 1e-9);
        }
    }

    #[test]
    fn trained_bigram_beats_unknown_path() {
        let m = train_katz(&corpus(&["a b"]), 2, DEFAULT_K_GT).unwrap();
        let g = WordGraph::new(
            3,
            0,
            2,
            vec![arc(0, 1, "a", 0.0), arc(1, 2, "b", 0.0), arc(0, 1, "x", 0.0), arc(1, 2, "y", 0.0)],
        )
        .unwrap();
        assert_eq!(ngram_best_string(&g, &m, 1.0).best_string, ["a", "b"]);
        let line = WordGraph::from_words(&["y", "x"]).unwrap();
        assert_eq!(ngram_best_string(&line, &m, 1.0).best_string, ["y", "x"]);
    }
}
