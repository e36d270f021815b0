//! Multi-view node encoder.
//!
//! For a node `v`, matched instances are split by category (SAP, WAP, SIP,
//! WIP) and by view (sum, max, mean). Each instance is mean-pooled and
//! mapped by a per-category linear layer. Multi-head attention over
//! `[x_v || h_inst]` summarises each (view, category) slice, then category
//! attention gives one vector per view and view attention gives `h_v`.

mod views;

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CgflError, Result};
use crate::metapattern::{Category, PatternInstance};
use crate::numerics::{ParamId, ParamStore, Tape, Tensor, Var, LEAKY_SLOPE};

pub use views::{build_views, prepare_node, CategoryInputs, NodeInputs, PreparedGraph, ViewBundle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    Sum,
    Max,
    Mean,
}

impl View {
    pub const ALL: [View; 3] = [View::Sum, View::Max, View::Mean];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            View::Sum => "sum",
            View::Max => "max",
            View::Mean => "mean",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|w| w.name().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for View {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    #[serde(default = "d_d_in")]
    pub d_in: usize,
    #[serde(default = "d_d_head")]
    pub d_head: usize,
    #[serde(default = "d_k_att")]
    pub k_att: usize,
    #[serde(default = "d_d_att")]
    pub d_att: usize,
    #[serde(default = "d_n_mean")]
    pub n_mean: usize,
    /// Instances kept per (node, pattern).
    #[serde(default = "d_cap")]
    pub instance_cap: usize,
    #[serde(default)]
    pub drop_categories: Vec<Category>,
    #[serde(default)]
    pub drop_views: Vec<View>,
}

fn d_d_in() -> usize {
    64
}
fn d_d_head() -> usize {
    16
}
fn d_k_att() -> usize {
    4
}
fn d_d_att() -> usize {
    32
}
fn d_n_mean() -> usize {
    5
}
fn d_cap() -> usize {
    20
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            d_in: d_d_in(),
            d_head: d_d_head(),
            k_att: d_k_att(),
            d_att: d_d_att(),
            n_mean: d_n_mean(),
            instance_cap: d_cap(),
            drop_categories: Vec::new(),
            drop_views: Vec::new(),
        }
    }
}

impl EncoderConfig {
    /// Embedding width, `k_att * d_head`.
    pub fn d(&self) -> usize {
        self.k_att * self.d_head
    }

    pub fn category_active(&self, c: Category) -> bool {
        !self.drop_categories.contains(&c)
    }

    pub fn view_active(&self, w: View) -> bool {
        !self.drop_views.contains(&w)
    }

    pub fn active_categories(&self) -> Vec<Category> {
        Category::ALL
            .into_iter()
            .filter(|&c| self.category_active(c))
            .collect()
    }

    pub fn active_views(&self) -> Vec<View> {
        View::ALL.into_iter().filter(|&w| self.view_active(w)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(CgflError::Config(format!("encoder: {m}")));
        if self.d_in == 0 || self.d_head == 0 || self.k_att == 0 || self.d_att == 0 {
            return fail("dimensions must be positive");
        }
        if self.n_mean < 1 {
            return fail("n_mean must be >= 1");
        }
        if self.instance_cap < 1 {
            return fail("instance_cap must be >= 1");
        }
        if self.active_categories().is_empty() {
            return fail("every category is dropped");
        }
        if self.active_views().is_empty() {
            return fail("every view is dropped");
        }
        Ok(())
    }
}

/// Parameter handles of the encoder. The instance-attention vector of head
/// `k` for slice `(w, c)` is the concatenation of column `k` of
/// `att_x[w][c]` (the `x_v` half) and column `k` of `att_h[w][c]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub enc_w: [ParamId; 4],
    pub enc_b: [ParamId; 4],
    pub att_x: [[ParamId; 4]; 3],
    pub att_h: [[ParamId; 4]; 3],
    pub null: [[ParamId; 4]; 3],
    pub cat_w: [ParamId; 3],
    pub cat_b: [ParamId; 3],
    pub cat_a: [ParamId; 3],
    pub view_w: ParamId,
    pub view_b: ParamId,
    pub view_a: ParamId,
    pub d_in: usize,
    pub d_head: usize,
    pub k_att: usize,
    pub d_att: usize,
}

impl EncoderParams {
    pub fn new(store: &mut ParamStore, cfg: &EncoderConfig, rng: &mut impl Rng) -> Self {
        let (d_in, dh, k, da) = (cfg.d_in, cfg.d_head, cfg.k_att, cfg.d_att);
        let d = cfg.d();
        assert_eq!(d, k * dh, "embedding width must equal k_att * d_head");
        let mut add = |name: String, t: Tensor| store.add(name, t);
        let mut enc_w = [ParamId(0); 4];
        let mut enc_b = [ParamId(0); 4];
        for c in Category::ALL {
            enc_w[c.index()] = add(format!("enc.w.{c}"), Tensor::glorot(d_in, dh, 1.0, rng));
            enc_b[c.index()] = add(format!("enc.b.{c}"), Tensor::zeros(vec![1, dh]));
        }
        let mut att_x = [[ParamId(0); 4]; 3];
        let mut att_h = [[ParamId(0); 4]; 3];
        let mut null = [[ParamId(0); 4]; 3];
        for w in View::ALL {
            for c in Category::ALL {
                let (i, j) = (w.index(), c.index());
                att_x[i][j] = add(format!("att.x.{w}.{c}"), Tensor::glorot(d_in, k, 1.0, rng));
                att_h[i][j] = add(format!("att.h.{w}.{c}"), Tensor::glorot(dh, k, 1.0, rng));
                null[i][j] = add(format!("null.{w}.{c}"), Tensor::glorot(1, d, 1.0, rng));
            }
        }
        let mut cat_w = [ParamId(0); 3];
        let mut cat_b = [ParamId(0); 3];
        let mut cat_a = [ParamId(0); 3];
        for w in View::ALL {
            cat_w[w.index()] = add(format!("cat.w.{w}"), Tensor::glorot(d, da, 1.0, rng));
            // small non-zero attention biases: with a zero bias an all-zero
            // input sits exactly on the rectifier kink of the attention logit
            cat_b[w.index()] = add(format!("cat.b.{w}"), Tensor::glorot(1, da, 0.1, rng));
            cat_a[w.index()] = add(format!("cat.a.{w}"), Tensor::glorot(da, 1, 1.0, rng));
        }
        let view_w = add("view.w".into(), Tensor::glorot(d, da, 1.0, rng));
        let view_b = add("view.b".into(), Tensor::glorot(1, da, 0.1, rng));
        let view_a = add("view.a".into(), Tensor::glorot(da, 1, 1.0, rng));
        Self {
            enc_w,
            enc_b,
            att_x,
            att_h,
            null,
            cat_w,
            cat_b,
            cat_a,
            view_w,
            view_b,
            view_a,
            d_in,
            d_head: dh,
            k_att: k,
            d_att: da,
        }
    }

    pub fn d(&self) -> usize {
        self.k_att * self.d_head
    }

    pub fn all(&self) -> Vec<ParamId> {
        let mut ids: Vec<ParamId> = self.enc_w.iter().chain(&self.enc_b).copied().collect();
        for w in 0..3 {
            ids.extend(self.att_x[w]);
            ids.extend(self.att_h[w]);
            ids.extend(self.null[w]);
        }
        ids.extend(self.cat_w);
        ids.extend(self.cat_b);
        ids.extend(self.cat_a);
        ids.extend([self.view_w, self.view_b, self.view_a]);
        ids
    }
}

/// An aggregated vector together with the attention weights that produced
/// it (`None` when no attention ran, e.g. for a null vector).
#[derive(Debug, Clone, Copy)]
pub struct Attended {
    pub out: Var,
    pub weights: Option<Var>,
}

#[derive(Debug, Clone, Copy)]
pub struct NodeEmbedding {
    pub h: Var,
    pub h_sum: Var,
    pub h_mean: Var,
}

/// Category linear map applied to a `rows x d_in` block of pooled features.
pub fn encode_pooled(
    tape: &mut Tape,
    store: &ParamStore,
    params: &EncoderParams,
    c: Category,
    pooled: &[f64],
    rows: usize,
) -> Var {
    let p = tape.constant(rows, params.d_in, pooled.to_vec());
    let w = tape.param(store, params.enc_w[c.index()]);
    let b = tape.param(store, params.enc_b[c.index()]);
    let h = tape.matmul(p, w);
    tape.add_row(h, b)
}

/// Mean-pools the instance's node features and applies the category map.
pub fn encode_instance(
    tape: &mut Tape,
    store: &ParamStore,
    params: &EncoderParams,
    c: Category,
    features: &[Vec<f64>],
    inst: &PatternInstance,
) -> Result<Var> {
    if inst.nodes.is_empty() {
        return Err(CgflError::invalid("cannot encode an empty instance"));
    }
    let mut pooled = vec![0.0; params.d_in];
    for &u in &inst.nodes {
        for (p, x) in pooled.iter_mut().zip(&features[u]) {
            *p += x;
        }
    }
    pooled.iter_mut().for_each(|p| *p /= inst.nodes.len() as f64);
    Ok(encode_pooled(tape, store, params, c, &pooled, 1))
}

/// Multi-head attention over the instance encodings `h` (`n x d_head`) of
/// one (view, category) slice. `None` selects the learned null vector.
pub fn aggregate_instances(
    tape: &mut Tape,
    store: &ParamStore,
    params: &EncoderParams,
    w: View,
    c: Category,
    x_v: Var,
    h: Option<Var>,
) -> Attended {
    let (i, j) = (w.index(), c.index());
    let Some(h) = h else {
        return Attended {
            out: tape.param(store, params.null[i][j]),
            weights: None,
        };
    };
    let ax = tape.param(store, params.att_x[i][j]);
    let ah = tape.param(store, params.att_h[i][j]);
    // a_k . [x_v || h_i] = x_v . ax_k + h_i . ah_k
    let from_x = tape.matmul(x_v, ax);
    let from_h = tape.matmul(h, ah);
    let logits = tape.add_row(from_h, from_x);
    let logits = tape.leaky_relu(logits, LEAKY_SLOPE);
    let alpha = tape.softmax_cols(logits);
    let alpha_t = tape.transpose(alpha);
    let heads = tape.matmul(alpha_t, h);
    let heads = tape.relu(heads);
    let out = tape.reshape(heads, 1, params.d());
    Attended {
        out,
        weights: Some(alpha),
    }
}

/// `z_i = relu((h_i W + b) . a)`, weights = softmax(z), output = sum_i w_i h_i.
fn attend_set(tape: &mut Tape, w: Var, b: Var, a: Var, parts: &[Var]) -> Attended {
    let stacked = tape.concat_rows(parts);
    let proj = tape.matmul(stacked, w);
    let proj = tape.add_row(proj, b);
    let z = tape.matmul(proj, a);
    let z = tape.relu(z);
    let weights = tape.softmax_cols(z);
    let wt = tape.transpose(weights);
    let out = tape.matmul(wt, stacked);
    Attended {
        out,
        weights: Some(weights),
    }
}

/// Category attention within view `w` over the active categories;
/// `hs` is indexed by [`Category::index`].
pub fn aggregate_categories(
    tape: &mut Tape,
    store: &ParamStore,
    params: &EncoderParams,
    cfg: &EncoderConfig,
    w: View,
    hs: &[Var; 4],
) -> Attended {
    let parts: Vec<Var> = cfg.active_categories().iter().map(|c| hs[c.index()]).collect();
    let wi = w.index();
    let (pw, pb, pa) = (
        tape.param(store, params.cat_w[wi]),
        tape.param(store, params.cat_b[wi]),
        tape.param(store, params.cat_a[wi]),
    );
    attend_set(tape, pw, pb, pa, &parts)
}

/// View attention over the active views; `hs` is indexed by [`View::index`].
pub fn aggregate_views(
    tape: &mut Tape,
    store: &ParamStore,
    params: &EncoderParams,
    cfg: &EncoderConfig,
    hs: &[Var; 3],
) -> Attended {
    let parts: Vec<Var> = cfg.active_views().iter().map(|w| hs[w.index()]).collect();
    let (pw, pb, pa) = (
        tape.param(store, params.view_w),
        tape.param(store, params.view_b),
        tape.param(store, params.view_a),
    );
    attend_set(tape, pw, pb, pa, &parts)
}

/// Full encoder pass for one node. Returns `h_v` plus the sum- and
/// mean-view vectors consumed by the task and graph scores. Those two are
/// always computed, even when their view is dropped from view attention.
pub fn embed_node(
    tape: &mut Tape,
    store: &ParamStore,
    params: &EncoderParams,
    cfg: &EncoderConfig,
    inputs: &NodeInputs,
) -> NodeEmbedding {
    let x_v = tape.row(&inputs.x);
    let active = cfg.active_categories();
    let mut encoded: [Option<Var>; 4] = [None; 4];
    for &c in &active {
        let ci = inputs.category(c);
        if ci.count > 0 {
            encoded[c.index()] = Some(encode_pooled(tape, store, params, c, &ci.pooled, ci.count));
        }
    }

    let mut view_out = [None; 3];
    for w in View::ALL {
        if w == View::Max && !cfg.view_active(w) {
            continue;
        }
        let mut hs = [x_v; 4];
        for &c in &active {
            let slice = inputs.views.slice(w, c);
            let h = match encoded[c.index()] {
                Some(all) if !slice.is_empty() => {
                    if slice.len() == inputs.category(c).count {
                        Some(all)
                    } else {
                        Some(tape.gather_rows(all, slice))
                    }
                }
                _ => None,
            };
            hs[c.index()] = aggregate_instances(tape, store, params, w, c, x_v, h).out;
        }
        view_out[w.index()] = Some(aggregate_categories(tape, store, params, cfg, w, &hs).out);
    }
    let h_sum = view_out[0].expect("sum view is always computed");
    let h_mean = view_out[2].expect("mean view is always computed");
    // a dropped max view never enters view attention, so any placeholder works
    let h_max = view_out[1].unwrap_or(h_sum);
    let h = aggregate_views(tape, store, params, cfg, &[h_sum, h_max, h_mean]).out;
    NodeEmbedding { h, h_sum, h_mean }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_for;

    fn small_cfg() -> EncoderConfig {
        EncoderConfig {
            d_in: 3,
            d_head: 2,
            k_att: 2,
            d_att: 3,
            ..Default::default()
        }
    }

    fn setup(cfg: &EncoderConfig) -> (ParamStore, EncoderParams) {
        let mut store = ParamStore::new();
        let p = EncoderParams::new(&mut store, cfg, &mut rng_for(1, "init", 0));
        (store, p)
    }

    fn set(store: &mut ParamStore, id: ParamId, vals: &[f64]) {
        store.get_mut(id).data_mut().copy_from_slice(vals);
    }

    #[test]
    fn dimension_law() {
        let cfg = EncoderConfig::default();
        let (store, p) = setup(&cfg);
        assert_eq!(p.d(), 64);
        assert_eq!(store.get(p.null[0][0]).dims2(), (1, 64));
        assert_eq!(store.get(p.att_x[1][2]).dims2(), (64, 4));
        assert_eq!(store.get(p.att_h[1][2]).dims2(), (16, 4));
        assert_eq!(p.all().len(), store.len());
    }

    #[test]
    fn mean_pooling_with_identity_map() {
        let cfg = EncoderConfig {
            d_in: 2,
            d_head: 2,
            k_att: 1,
            ..Default::default()
        };
        let (mut store, p) = setup(&cfg);
        set(&mut store, p.enc_w[0], &[1.0, 0.0, 0.0, 1.0]);
        let feats = vec![vec![1.0, 3.0], vec![3.0, 1.0]];
        let inst = PatternInstance {
            nodes: vec![0, 1],
            pattern: 0,
        };
        let mut t = Tape::new();
        let h = encode_instance(&mut t, &store, &p, Category::Sap, &feats, &inst).unwrap();
        assert_eq!(t.value(h), &[2.0, 2.0]);
        let single = PatternInstance {
            nodes: vec![1],
            pattern: 0,
        };
        let h = encode_instance(&mut t, &store, &p, Category::Sap, &feats, &single).unwrap();
        assert_eq!(t.value(h), &[3.0, 1.0]);
        let empty = PatternInstance {
            nodes: vec![],
            pattern: 0,
        };
        assert!(encode_instance(&mut t, &store, &p, Category::Sap, &feats, &empty).is_err());
    }

    #[test]
    fn zero_features_give_bias() {
        let cfg = small_cfg();
        let (mut store, p) = setup(&cfg);
        set(&mut store, p.enc_b[1], &[0.5, -0.25]);
        let mut t = Tape::new();
        let h = encode_pooled(&mut t, &store, &p, Category::Wap, &[0.0; 3], 1);
        assert_eq!(t.value(h), &[0.5, -0.25]);
    }

    #[test]
    fn singleton_and_duplicate_instances() {
        let cfg = small_cfg();
        let (store, p) = setup(&cfg);
        let mut t = Tape::new();
        let x = t.row(&[0.3, -0.2, 0.9]);
        let one = t.row(&[0.7, -0.4]);
        let r = aggregate_instances(&mut t, &store, &p, View::Sum, Category::Sip, x, Some(one));
        // each head averages a single instance: relu(h) repeated per head
        assert_eq!(t.value(r.out), &[0.7, 0.0, 0.7, 0.0]);
        let two = t.constant(2, 2, vec![0.7, -0.4, 0.7, -0.4]);
        let r2 = aggregate_instances(&mut t, &store, &p, View::Sum, Category::Sip, x, Some(two));
        for (a, b) in t.value(r.out).iter().zip(t.value(r2.out)) {
            assert!((a - b).abs() < 1e-15);
        }
        let alpha = t.value(r2.weights.unwrap()).to_vec();
        for k in 0..2 {
            assert!((alpha[k] + alpha[2 + k] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_slice_uses_null_vector() {
        let cfg = small_cfg();
        let (store, p) = setup(&cfg);
        let mut t = Tape::new();
        let x = t.row(&[0.0; 3]);
        let r = aggregate_instances(&mut t, &store, &p, View::Max, Category::Wip, x, None);
        assert_eq!(t.value(r.out), store.get(p.null[1][3]).data());
        assert!(r.weights.is_none());
    }

    #[test]
    fn identical_category_vectors_pass_through() {
        let cfg = small_cfg();
        let (store, p) = setup(&cfg);
        let mut t = Tape::new();
        let h = t.row(&[0.1, 0.2, -0.3, 0.4]);
        let r = aggregate_categories(&mut t, &store, &p, &cfg, View::Sum, &[h; 4]);
        for (a, b) in t.value(r.out).iter().zip(t.value(h)) {
            assert!((a - b).abs() < 1e-15);
        }
        let r = aggregate_views(&mut t, &store, &p, &cfg, &[h; 3]);
        for (a, b) in t.value(r.out).iter().zip(t.value(h)) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn dominant_category_saturates() {
        let cfg = small_cfg();
        let (mut store, p) = setup(&cfg);
        // W = [I_3 padded], b = 0, a = e_0: the logit is h[0]
        let mut w = vec![0.0; 4 * 3];
        w[0] = 1.0;
        set(&mut store, p.cat_w[0], &w);
        set(&mut store, p.cat_a[0], &[1.0, 0.0, 0.0]);
        let mut t = Tape::new();
        let big = t.row(&[1000.0, 1.0, 2.0, 3.0]);
        let small = t.row(&[0.0, -1.0, -2.0, -3.0]);
        let r = aggregate_categories(&mut t, &store, &p, &cfg, View::Sum, &[small, big, small, small]);
        for (a, b) in t.value(r.out).iter().zip(t.value(big)) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn ablation_shrinks_the_softmax() {
        let cfg = EncoderConfig {
            drop_categories: vec![Category::Sap],
            drop_views: vec![View::Max],
            ..small_cfg()
        };
        let (store, p) = setup(&cfg);
        let mut t = Tape::new();
        let hs: Vec<Var> = (0..4).map(|i| t.row(&[i as f64, 0.5, -0.5, 1.0])).collect();
        let r = aggregate_categories(&mut t, &store, &p, &cfg, View::Mean, &[hs[0], hs[1], hs[2], hs[3]]);
        let beta = t.value(r.weights.unwrap());
        assert_eq!(beta.len(), 3);
        assert!((beta.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let r = aggregate_views(&mut t, &store, &p, &cfg, &[hs[0], hs[1], hs[2]]);
        assert_eq!(t.value(r.weights.unwrap()).len(), 2);
    }

    #[test]
    fn config_validation() {
        assert!(EncoderConfig::default().validate().is_ok());
        let bad = EncoderConfig {
            n_mean: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = EncoderConfig {
            drop_views: View::ALL.to_vec(),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let parsed: EncoderConfig =
            toml::from_str("drop_categories = [\"SAP\"]\ndrop_views = [\"max\"]").unwrap();
        assert_eq!(parsed.drop_categories, vec![Category::Sap]);
        assert_eq!(parsed.drop_views, vec![View::Max]);
    }
}
