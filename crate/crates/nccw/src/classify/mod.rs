//! Decision procedures for diagonals of 1-dimensional NCCW complexes:
//! reduced form, direct-sum decomposition, conjugacy via twisted-graph
//! isomorphism certificates, rigidity, and the congruence counterexample.

pub mod appbr;
pub mod center;
pub mod congruence;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{IIdx, PIdx, XIdx, YIdx};
use crate::model::{
    dualize, validate_nccw, DualData, NccwData, TwistPerm, R0, R1,
};
use crate::perm::Perm;

/// Effective twisted boundary data of a pair `(data, sigma)`: the target
/// map already carries the twist.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TwistedDual {
    pub p_sizes: Vec<u32>,
    pub i_sizes: Vec<u32>,
    pub p_start: Vec<u32>,
    pub i_start: Vec<u32>,
    pub y_p: Vec<PIdx>,
    pub x_i: Vec<IIdx>,
    pub b0: Vec<Option<XIdx>>,
    pub b1: Vec<Option<XIdx>>,
}

impl TwistedDual {
    pub fn from_pair(dual: &DualData, sigma: &TwistPerm) -> TwistedDual {
        let b1 = (0..dual.num_y())
            .map(|y| crate::model::twisted_target(dual, sigma, YIdx(y as u32)))
            .collect();
        TwistedDual {
            p_sizes: dual.p_sizes.clone(),
            i_sizes: dual.i_sizes.clone(),
            p_start: dual.p_start.clone(),
            i_start: dual.i_start.clone(),
            y_p: dual.y_p.clone(),
            x_i: dual.x_i.clone(),
            b0: dual.b[R0].clone(),
            b1,
        }
    }

    pub fn num_y(&self) -> usize {
        self.y_p.len()
    }

    pub fn num_x(&self) -> usize {
        self.x_i.len()
    }

    pub fn y_block(&self, p: usize) -> std::ops::Range<usize> {
        let s = self.p_start[p] as usize;
        s..s + self.p_sizes[p] as usize
    }

    pub fn x_block(&self, i: usize) -> std::ops::Range<usize> {
        let s = self.i_start[i] as usize;
        s..s + self.i_sizes[i] as usize
    }
}

/// Which reduction lemma case fired.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RewriteCase {
    /// `r = s` (the same boundary side carries both isomorphisms).
    SameSide,
    /// `r != s`.
    MixedSides,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RewriteStep {
    pub removed_q: u32,
    pub partner: u32,
    pub j: u32,
    pub r: usize,
    pub s: usize,
    pub case: RewriteCase,
}

pub type RewriteLog = Vec<RewriteStep>;

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("input data invalid: {0:?}")]
    Invalid(Vec<String>),
    #[error("twist invalid: {0}")]
    Twist(String),
    #[error("matrix size mismatch: {0}")]
    SizeMismatch(String),
    #[error("theorem inapplicable: {0}")]
    Inapplicable(String),
}

/// Finds a redundant index: `q` with a partner `q_bar != q` and a summand
/// `j` such that `beta_r^{q_bar,j}` and `beta_s^{q,j}` are isomorphisms and
/// `j` meets no other block.
fn find_redundant(data: &NccwData) -> Option<RewriteStep> {
    let np = data.num_p();
    let is_iso = |r: usize, p: usize, j: usize| {
        data.mult[r][p][j] == 1 && data.i_sizes[j] == data.p_sizes[p]
    };
    let j_confined = |j: usize, q: usize, qb: usize| {
        (0..np).all(|p| p == q || p == qb || (data.mult[0][p][j] == 0 && data.mult[1][p][j] == 0))
    };
    for q in 0..np {
        for qb in 0..np {
            if qb == q {
                continue;
            }
            for j in 0..data.num_i() {
                for r in 0..2 {
                    for s in 0..2 {
                        if is_iso(r, qb, j) && is_iso(s, q, j) && j_confined(j, q, qb) {
                            return Some(RewriteStep {
                                removed_q: q as u32,
                                partner: qb as u32,
                                j: j as u32,
                                r,
                                s,
                                case: if r == s {
                                    RewriteCase::SameSide
                                } else {
                                    RewriteCase::MixedSides
                                },
                            });
                        }
                    }
                }
            }
        }
    }
    None
}

/// Rewrites a twisted pair along one redundancy, merging block `q` into its
/// partner. Returns the new twisted data with block `q` removed; the caller
/// re-normalizes to `(NccwData, TwistPerm)` form.
fn apply_rewrite(td: &TwistedDual, step: &RewriteStep) -> TwistedDual {
    let q = step.removed_q as usize;
    let qb = step.partner as usize;
    let b_of = |r: usize, y: usize| -> Option<XIdx> {
        if r == 0 {
            td.b0[y]
        } else {
            td.b1[y]
        }
    };
    let e_qb: Vec<usize> = td.y_block(qb).collect();
    // x -> edge of Y^q glued to x on side s
    let mut q_at: BTreeMap<XIdx, usize> = BTreeMap::new();
    for y in td.y_block(q) {
        if let Some(x) = b_of(step.s, y) {
            q_at.insert(x, y);
        }
    }
    // Merged edge for each y in Y^{q_bar}: the r*-end of y and the s*-end of
    // its partner edge, oriented so a genuine 0-end stays the source.
    let rs = 1 - step.r;
    let ss = 1 - step.s;
    let merged: Vec<(Option<XIdx>, Option<XIdx>)> = e_qb
        .iter()
        .map(|&y| {
            let x = b_of(step.r, y).expect("iso side must be total");
            let y2 = *q_at.get(&x).expect("partner fiber");
            let end_qb = b_of(rs, y);
            let end_q = b_of(ss, y2);
            match (step.r, step.s) {
                (0, 1) => (end_q, end_qb),
                _ => (end_qb, end_q),
            }
        })
        .collect();

    // Rebuild with block q dropped and q_bar's maps replaced.
    let keep: Vec<usize> = (0..td.p_sizes.len()).filter(|&p| p != q).collect();
    let mut out = TwistedDual {
        p_sizes: Vec::new(),
        i_sizes: td.i_sizes.clone(),
        p_start: Vec::new(),
        i_start: td.i_start.clone(),
        y_p: Vec::new(),
        x_i: td.x_i.clone(),
        b0: Vec::new(),
        b1: Vec::new(),
    };
    for (new_p, &old_p) in keep.iter().enumerate() {
        out.p_start.push(out.y_p.len() as u32);
        out.p_sizes.push(td.p_sizes[old_p]);
        for (k, y) in td.y_block(old_p).enumerate() {
            out.y_p.push(PIdx(new_p as u32));
            if old_p == qb {
                out.b0.push(merged[k].0);
                out.b1.push(merged[k].1);
            } else {
                out.b0.push(td.b0[y]);
                out.b1.push(td.b1[y]);
            }
        }
    }
    out
}

/// Re-expresses twisted data in model form: canonical-layout data plus a
/// block twist. The source map is normalized to the canonical one by an
/// edge relabelling, the twist absorbs the rest.
fn normalize_to_model(td: &TwistedDual) -> (NccwData, TwistPerm) {
    let np = td.p_sizes.len();
    let ni = td.i_sizes.len();
    let mut mult = [vec![vec![0u32; ni]; np], vec![vec![0u32; ni]; np]];
    for p in 0..np {
        for y in td.y_block(p) {
            if let Some(x) = td.b0[y] {
                mult[0][p][td.x_i[x.idx()].idx()] += 1;
            }
            if let Some(x) = td.b1[y] {
                mult[1][p][td.x_i[x.idx()].idx()] += 1;
            }
        }
    }
    for r in 0..2 {
        for row in mult[r].iter_mut() {
            for (i, m) in row.iter_mut().enumerate() {
                let sz = td.i_sizes[i].max(1);
                debug_assert_eq!(*m % sz, 0);
                *m /= sz;
            }
        }
    }
    let data = NccwData::with_canonical_layout(td.p_sizes.clone(), td.i_sizes.clone(), mult);
    let dual = dualize(&data);

    // Relabel edges per block so that b0 agrees with the canonical b0, then
    // read off the twist from b1.
    let mut per_block = Vec::with_capacity(np);
    for p in 0..np {
        let size = td.p_sizes[p] as usize;
        let ys: Vec<usize> = td.y_block(p).collect();
        let canon: Vec<usize> = dual.y_block(PIdx(p as u32)).collect();
        let mut buckets: BTreeMap<Option<XIdx>, Vec<usize>> = BTreeMap::new();
        for (k, &y) in canon.iter().enumerate() {
            buckets.entry(dual.b[R0][y]).or_default().push(k);
        }
        let mut relabel = vec![0usize; size]; // old position -> canonical position
        for (k, &y) in ys.iter().enumerate() {
            let bucket = buckets
                .get_mut(&td.b0[y])
                .expect("b0 fibers must agree with canonical layout");
            relabel[k] = bucket.remove(0);
        }
        let mut want: Vec<Option<XIdx>> = vec![None; size];
        for (k, &y) in ys.iter().enumerate() {
            want[relabel[k]] = td.b1[y];
        }
        let mut b1_buckets: BTreeMap<Option<XIdx>, Vec<usize>> = BTreeMap::new();
        for (k, &y) in canon.iter().enumerate() {
            b1_buckets.entry(dual.b[R1][y]).or_default().push(k);
        }
        let mut images = vec![0u32; size];
        for (pos, target) in want.iter().enumerate() {
            let bucket = b1_buckets
                .get_mut(target)
                .expect("b1 fibers must agree with canonical layout");
            images[pos] = bucket.remove(0) as u32;
        }
        per_block.push(Perm::from_images(images).expect("relabelling is a bijection"));
    }
    (data, TwistPerm { per_block })
}

/// Eliminates redundant indices; the conjugacy class of the modelled pair
/// is preserved step by step. Idempotent on already-reduced data.
pub fn to_reduced_form(
    data: &NccwData,
    sigma: &TwistPerm,
) -> Result<(NccwData, TwistPerm, RewriteLog), ClassifyError> {
    let report = validate_nccw(data);
    if !report.is_valid() {
        return Err(ClassifyError::Invalid(report.errors));
    }
    let dual = dualize(data);
    sigma
        .validate(&dual)
        .map_err(|e| ClassifyError::Twist(e.to_string()))?;
    let mut cur_data = data.clone();
    let mut cur_sigma = sigma.clone();
    let mut log = Vec::new();
    while let Some(step) = find_redundant(&cur_data) {
        let td = TwistedDual::from_pair(&dualize(&cur_data), &cur_sigma);
        let reduced = apply_rewrite(&td, &step);
        let (d, s) = normalize_to_model(&reduced);
        log.push(step);
        cur_data = d;
        cur_sigma = s;
    }
    Ok((cur_data, cur_sigma, log))
}

/// Partition of `P` into direct summands, with the induced partition of `I`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Decomposition {
    pub p_classes: Vec<Vec<u32>>,
    pub i_classes: Vec<Vec<u32>>,
}

pub fn decompose(data: &NccwData) -> (Vec<NccwData>, Decomposition) {
    let np = data.num_p();
    let ni = data.num_i();
    let mut parent: Vec<usize> = (0..np).collect();
    fn find(parent: &mut Vec<usize>, a: usize) -> usize {
        if parent[a] != a {
            let r = find(parent, parent[a]);
            parent[a] = r;
        }
        parent[a]
    }
    for i in 0..ni {
        let touching: Vec<usize> = (0..np)
            .filter(|&p| data.mult[0][p][i] > 0 || data.mult[1][p][i] > 0)
            .collect();
        for w in touching.windows(2) {
            let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            if a != b {
                parent[a] = b;
            }
        }
    }
    let mut classes: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
    for p in 0..np {
        let root = find(&mut parent, p);
        classes.entry(root).or_default().push(p as u32);
    }
    let p_classes: Vec<Vec<u32>> = classes.into_values().collect();
    let mut i_classes = Vec::new();
    let mut summands = Vec::new();
    for members in &p_classes {
        let is: Vec<u32> = (0..ni as u32)
            .filter(|&i| {
                members.iter().any(|&p| {
                    data.mult[0][p as usize][i as usize] > 0
                        || data.mult[1][p as usize][i as usize] > 0
                })
            })
            .collect();
        let mut mult = [Vec::new(), Vec::new()];
        for r in 0..2 {
            for &p in members {
                mult[r].push(
                    is.iter()
                        .map(|&i| data.mult[r][p as usize][i as usize])
                        .collect::<Vec<u32>>(),
                );
            }
        }
        summands.push(NccwData::with_canonical_layout(
            members.iter().map(|&p| data.p_sizes[p as usize]).collect(),
            is.iter().map(|&i| data.i_sizes[i as usize]).collect(),
            mult,
        ));
        i_classes.push(is);
    }
    (
        summands,
        Decomposition {
            p_classes,
            i_classes,
        },
    )
}

/// Certificate for conjugacy of two twisted pairs, mapping the `from` side
/// onto the `to` side. Re-checkable by [`verify_certificate`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConjugacyCertificate {
    pub rho: Vec<u32>,
    pub kappa: Vec<u32>,
    pub o: Vec<i8>,
    /// Per `p`-block of the `from` side: position-wise images inside
    /// `Y^{rho(p)}` of the `to` side.
    pub theta: Vec<Vec<u32>>,
    /// Per `i`-block: position-wise images inside `X^{kappa(i)}`.
    pub xi: Vec<Vec<u32>>,
}

impl ConjugacyCertificate {
    pub fn identity(td: &TwistedDual) -> ConjugacyCertificate {
        ConjugacyCertificate {
            rho: (0..td.p_sizes.len() as u32).collect(),
            kappa: (0..td.i_sizes.len() as u32).collect(),
            o: vec![1; td.p_sizes.len()],
            theta: td.p_sizes.iter().map(|&s| (0..s).collect()).collect(),
            xi: td.i_sizes.iter().map(|&s| (0..s).collect()).collect(),
        }
    }

    pub fn invert(&self) -> ConjugacyCertificate {
        let np = self.rho.len();
        let ni = self.kappa.len();
        let mut rho = vec![0u32; np];
        let mut o = vec![0i8; np];
        let mut theta = vec![Vec::new(); np];
        for p in 0..np {
            let tp = self.rho[p] as usize;
            rho[tp] = p as u32;
            o[tp] = self.o[p];
            let mut inv = vec![0u32; self.theta[p].len()];
            for (k, &v) in self.theta[p].iter().enumerate() {
                inv[v as usize] = k as u32;
            }
            theta[tp] = inv;
        }
        let mut kappa = vec![0u32; ni];
        let mut xi = vec![Vec::new(); ni];
        for i in 0..ni {
            let ti = self.kappa[i] as usize;
            kappa[ti] = i as u32;
            let mut inv = vec![0u32; self.xi[i].len()];
            for (k, &v) in self.xi[i].iter().enumerate() {
                inv[v as usize] = k as u32;
            }
            xi[ti] = inv;
        }
        ConjugacyCertificate {
            rho,
            kappa,
            o,
            theta,
            xi,
        }
    }

    /// `other` after `self`.
    pub fn compose(&self, other: &ConjugacyCertificate) -> ConjugacyCertificate {
        let np = self.rho.len();
        let ni = self.kappa.len();
        let mut rho = vec![0u32; np];
        let mut o = vec![0i8; np];
        let mut theta = vec![Vec::new(); np];
        for p in 0..np {
            let mid = self.rho[p] as usize;
            rho[p] = other.rho[mid];
            o[p] = self.o[p] * other.o[mid];
            theta[p] = self.theta[p]
                .iter()
                .map(|&v| other.theta[mid][v as usize])
                .collect();
        }
        let mut kappa = vec![0u32; ni];
        let mut xi = vec![Vec::new(); ni];
        for i in 0..ni {
            let mid = self.kappa[i] as usize;
            kappa[i] = other.kappa[mid];
            xi[i] = self.xi[i]
                .iter()
                .map(|&v| other.xi[mid][v as usize])
                .collect();
        }
        ConjugacyCertificate {
            rho,
            kappa,
            o,
            theta,
            xi,
        }
    }
}

/// Edge-by-edge re-verification of the commuting squares, from the
/// certificate alone.
pub fn verify_certificate(
    from: &TwistedDual,
    to: &TwistedDual,
    cert: &ConjugacyCertificate,
) -> Result<(), String> {
    let np = from.p_sizes.len();
    let ni = from.i_sizes.len();
    if cert.rho.len() != np || to.p_sizes.len() != np {
        return Err("rho shape".into());
    }
    if cert.kappa.len() != ni || to.i_sizes.len() != ni {
        return Err("kappa shape".into());
    }
    let mut seen = vec![false; np];
    for p in 0..np {
        let tp = cert.rho[p] as usize;
        if tp >= np || seen[tp] {
            return Err("rho not a permutation".into());
        }
        seen[tp] = true;
        if from.p_sizes[p] != to.p_sizes[tp] {
            return Err(format!("rho maps p{p} to a block of different size"));
        }
    }
    let mut seen = vec![false; ni];
    for i in 0..ni {
        let ti = cert.kappa[i] as usize;
        if ti >= ni || seen[ti] {
            return Err("kappa not a permutation".into());
        }
        seen[ti] = true;
        if from.i_sizes[i] != to.i_sizes[ti] {
            return Err(format!("kappa maps i{i} to a block of different size"));
        }
    }
    let mut xi_global = vec![u32::MAX; from.num_x()];
    for i in 0..ni {
        let ti = cert.kappa[i] as usize;
        if cert.xi[i].len() != from.i_sizes[i] as usize {
            return Err(format!("xi block {i} has wrong length"));
        }
        let mut seen = vec![false; from.i_sizes[i] as usize];
        for (pos, &img) in cert.xi[i].iter().enumerate() {
            if img as usize >= to.i_sizes[ti] as usize || seen[img as usize] {
                return Err(format!("xi block {i} not bijective"));
            }
            seen[img as usize] = true;
            xi_global[from.i_start[i] as usize + pos] = to.i_start[ti] + img;
        }
    }
    let xi = |x: Option<XIdx>| x.map(|x| XIdx(xi_global[x.idx()]));
    for p in 0..np {
        let tp = cert.rho[p] as usize;
        if cert.theta[p].len() != from.p_sizes[p] as usize {
            return Err(format!("theta block {p} has wrong length"));
        }
        let mut seen = vec![false; from.p_sizes[p] as usize];
        for (pos, &img) in cert.theta[p].iter().enumerate() {
            if img as usize >= to.p_sizes[tp] as usize || seen[img as usize] {
                return Err(format!("theta block {p} not bijective"));
            }
            seen[img as usize] = true;
            let y = from.p_start[p] as usize + pos;
            let ty = to.p_start[tp] as usize + img as usize;
            let (want0, want1) = match cert.o[p] {
                1 => (to.b0[ty], to.b1[ty]),
                -1 => (to.b1[ty], to.b0[ty]),
                _ => return Err("o must be +1 or -1".into()),
            };
            if xi(from.b0[y]) != want0 {
                return Err(format!("square fails at p{p}, edge {pos}, source side"));
            }
            if xi(from.b1[y]) != want1 {
                return Err(format!("square fails at p{p}, edge {pos}, target side"));
            }
        }
    }
    Ok(())
}

/// Reason a conjugacy search came back negative; the discriminating
/// invariant when one was found.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum Obstruction {
    BlockSizeMismatch(String),
    SummandStructure(String),
    VertexInvariants(String),
    SearchExhausted(String),
}

impl Obstruction {
    pub fn describe(&self) -> &str {
        match self {
            Obstruction::BlockSizeMismatch(s)
            | Obstruction::SummandStructure(s)
            | Obstruction::VertexInvariants(s)
            | Obstruction::SearchExhausted(s) => s,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum ConjugacyOutcome {
    Conjugate(ConjugacyCertificate),
    NotConjugate(Obstruction),
}

impl ConjugacyOutcome {
    pub fn is_conjugate(&self) -> bool {
        matches!(self, ConjugacyOutcome::Conjugate(_))
    }
}

// ---------------------------------------------------------------------------
// Search over (rho, kappa, o, Theta, Xi): backtracking with degree-sequence
// pruning.
// ---------------------------------------------------------------------------

fn vertex_signature(
    td: &TwistedDual,
    x: usize,
    orient: &[i8],
    rho: Option<&[u32]>,
) -> Vec<(u32, u32, u32)> {
    let mut per_p: BTreeMap<u32, (u32, u32)> = BTreeMap::new();
    for y in 0..td.num_y() {
        let p = td.y_p[y].0;
        let lbl = rho.map_or(p, |r| r[p as usize]);
        let (src, tgt) = if orient[p as usize] == 1 {
            (td.b0[y], td.b1[y])
        } else {
            (td.b1[y], td.b0[y])
        };
        let hit_src = src == Some(XIdx(x as u32));
        let hit_tgt = tgt == Some(XIdx(x as u32));
        if hit_src || hit_tgt {
            let e = per_p.entry(lbl).or_insert((0, 0));
            if hit_src {
                e.0 += 1;
            }
            if hit_tgt {
                e.1 += 1;
            }
        }
    }
    per_p.into_iter().map(|(p, (a, b))| (p, a, b)).collect()
}

struct XiSearch<'a> {
    from: &'a TwistedDual,
    to: &'a TwistedDual,
    kappa: Vec<u32>,
    /// Oriented adjacency of the from side: per (x_src, x_tgt) and p: mult.
    from_adj: BTreeMap<(u32, u32, u32), u32>,
    to_adj: BTreeMap<(u32, u32, u32), u32>,
    /// Free-end profiles: (x, p) -> (out-frees, in-frees), oriented.
    from_free: BTreeMap<(u32, u32), (u32, u32)>,
    to_free: BTreeMap<(u32, u32), (u32, u32)>,
    map: Vec<u32>,
    used: Vec<bool>,
    /// Assignment order: alternating over i-blocks so bipartite structure
    /// prunes early.
    order: Vec<u32>,
    budget: u64,
}

impl<'a> XiSearch<'a> {
    fn new(
        from: &'a TwistedDual,
        to: &'a TwistedDual,
        rho: Vec<u32>,
        o: Vec<i8>,
        kappa: Vec<u32>,
    ) -> XiSearch<'a> {
        let mut from_adj = BTreeMap::new();
        let mut from_free = BTreeMap::new();
        for y in 0..from.num_y() {
            let p = from.y_p[y].0;
            let lbl = rho[p as usize];
            let (src, tgt) = if o[p as usize] == 1 {
                (from.b0[y], from.b1[y])
            } else {
                (from.b1[y], from.b0[y])
            };
            match (src, tgt) {
                (Some(s), Some(t)) => {
                    *from_adj.entry((s.0, t.0, lbl)).or_insert(0) += 1;
                }
                (Some(s), None) => {
                    from_free.entry((s.0, lbl)).or_insert((0, 0)).0 += 1;
                }
                (None, Some(t)) => {
                    from_free.entry((t.0, lbl)).or_insert((0, 0)).1 += 1;
                }
                (None, None) => {}
            }
        }
        let mut to_adj = BTreeMap::new();
        let mut to_free = BTreeMap::new();
        for y in 0..to.num_y() {
            let p = to.y_p[y].0;
            match (to.b0[y], to.b1[y]) {
                (Some(s), Some(t)) => {
                    *to_adj.entry((s.0, t.0, p)).or_insert(0) += 1;
                }
                (Some(s), None) => {
                    to_free.entry((s.0, p)).or_insert((0, 0)).0 += 1;
                }
                (None, Some(t)) => {
                    to_free.entry((t.0, p)).or_insert((0, 0)).1 += 1;
                }
                (None, None) => {}
            }
        }
        // Round-robin across i-blocks.
        let mut cursors: Vec<std::ops::Range<usize>> =
            (0..from.i_sizes.len()).map(|i| from.x_block(i)).collect();
        let mut order = Vec::with_capacity(from.num_x());
        let mut progressed = true;
        while progressed {
            progressed = false;
            for c in cursors.iter_mut() {
                if let Some(x) = c.next() {
                    order.push(x as u32);
                    progressed = true;
                }
            }
        }
        XiSearch {
            from,
            to,
            kappa,
            from_adj,
            to_adj,
            from_free,
            to_free,
            map: vec![u32::MAX; from.num_x()],
            used: vec![false; to.num_x()],
            order,
            budget: 50_000_000,
        }
    }

    fn consistent(&self, x: u32, t: u32) -> bool {
        let np = self.from.p_sizes.len() as u32;
        for p in 0..np {
            if self.from_free.get(&(x, p)).copied().unwrap_or((0, 0))
                != self.to_free.get(&(t, p)).copied().unwrap_or((0, 0))
            {
                return false;
            }
        }
        // Multiplicities against mapped vertices (including x itself for
        // loops).
        for other in 0..self.from.num_x() as u32 {
            let mo = if other == x {
                t
            } else {
                let m = self.map[other as usize];
                if m == u32::MAX {
                    continue;
                }
                m
            };
            for p in 0..np {
                if self.from_adj.get(&(x, other, p)).copied().unwrap_or(0)
                    != self.to_adj.get(&(t, mo, p)).copied().unwrap_or(0)
                {
                    return false;
                }
                if other != x
                    && self.from_adj.get(&(other, x, p)).copied().unwrap_or(0)
                        != self.to_adj.get(&(mo, t, p)).copied().unwrap_or(0)
                {
                    return false;
                }
            }
        }
        true
    }

    fn run(&mut self, k: usize) -> bool {
        if k == self.order.len() {
            return true;
        }
        if self.budget == 0 {
            return false;
        }
        self.budget -= 1;
        let x = self.order[k] as usize;
        let i = self.from.x_i[x].idx();
        let ti = self.kappa[i] as usize;
        for t in self.to.x_block(ti) {
            if self.used[t] {
                continue;
            }
            if self.consistent(x as u32, t as u32) {
                self.map[x] = t as u32;
                self.used[t] = true;
                if self.run(k + 1) {
                    return true;
                }
                self.map[x] = u32::MAX;
                self.used[t] = false;
            }
        }
        false
    }
}

/// Counts, per i-block, the unordered pairs of vertices with identical
/// oriented edge profiles ("twins"). Twin counts are invariant under any
/// certificate, so they screen candidate profiles cheaply.
fn twin_counts(td: &TwistedDual, orient: &[i8]) -> Vec<usize> {
    let nx = td.num_x();
    // full profile of x: for every other vertex u and p: (out-mult, in-mult),
    // plus free-end counts
    let mut profile: Vec<Vec<u32>> = vec![Vec::new(); nx];
    let np = td.p_sizes.len();
    for x in 0..nx {
        let mut row = vec![0u32; 2 * np * (nx + 1)];
        for y in 0..td.num_y() {
            let p = td.y_p[y].idx();
            let (src, tgt) = if orient[p] == 1 {
                (td.b0[y], td.b1[y])
            } else {
                (td.b1[y], td.b0[y])
            };
            if src == Some(XIdx(x as u32)) {
                let u = tgt.map_or(nx, |t| t.idx());
                row[2 * (p * (nx + 1) + u)] += 1;
            }
            if tgt == Some(XIdx(x as u32)) {
                let u = src.map_or(nx, |t| t.idx());
                row[2 * (p * (nx + 1) + u) + 1] += 1;
            }
        }
        profile[x] = row;
    }
    (0..td.i_sizes.len())
        .map(|i| {
            let block: Vec<usize> = td.x_block(i).collect();
            let mut pairs = 0;
            for a in 0..block.len() {
                for b in a + 1..block.len() {
                    if profile[block[a]] == profile[block[b]] {
                        pairs += 1;
                    }
                }
            }
            pairs
        })
        .collect()
}

/// Builds theta per block once xi is fixed, matching edges with equal
/// transported endpoint pairs.
fn build_theta(
    from: &TwistedDual,
    to: &TwistedDual,
    rho: &[u32],
    o: &[i8],
    xmap: &[u32],
) -> Option<Vec<Vec<u32>>> {
    let mut theta = Vec::with_capacity(from.p_sizes.len());
    for p in 0..from.p_sizes.len() {
        let tp = rho[p] as usize;
        let mut buckets: BTreeMap<(Option<u32>, Option<u32>), Vec<u32>> = BTreeMap::new();
        for (k, y) in to.y_block(tp).enumerate() {
            buckets
                .entry((to.b0[y].map(|x| x.0), to.b1[y].map(|x| x.0)))
                .or_default()
                .push(k as u32);
        }
        let mut block = Vec::with_capacity(from.p_sizes[p] as usize);
        for y in from.y_block(p) {
            let (src, tgt) = if o[p] == 1 {
                (from.b0[y], from.b1[y])
            } else {
                (from.b1[y], from.b0[y])
            };
            let key = (src.map(|x| xmap[x.idx()]), tgt.map(|x| xmap[x.idx()]));
            let slot = buckets.get_mut(&key)?.pop()?;
            block.push(slot);
        }
        theta.push(block);
    }
    Some(theta)
}

/// Decides whether two twisted duals are isomorphic as collections of
/// twisted graphs with per-block orientation choice. Certificates are
/// re-verified before being returned.
pub fn decide_twisted(from: &TwistedDual, to: &TwistedDual) -> ConjugacyOutcome {
    if from.p_sizes.len() != to.p_sizes.len() || from.i_sizes.len() != to.i_sizes.len() {
        return ConjugacyOutcome::NotConjugate(Obstruction::BlockSizeMismatch(format!(
            "block counts ({}, {}) vs ({}, {})",
            from.p_sizes.len(),
            from.i_sizes.len(),
            to.p_sizes.len(),
            to.i_sizes.len()
        )));
    }
    {
        let sorted = |v: &Vec<u32>| {
            let mut s = v.clone();
            s.sort_unstable();
            s
        };
        if sorted(&from.p_sizes) != sorted(&to.p_sizes) {
            return ConjugacyOutcome::NotConjugate(Obstruction::BlockSizeMismatch(
                "E-block size multisets differ".into(),
            ));
        }
        if sorted(&from.i_sizes) != sorted(&to.i_sizes) {
            return ConjugacyOutcome::NotConjugate(Obstruction::BlockSizeMismatch(
                "F-block size multisets differ".into(),
            ));
        }
    }

    struct Ctx<'a> {
        from: &'a TwistedDual,
        to: &'a TwistedDual,
        rho: Vec<u32>,
        o: Vec<i8>,
        kappa: Vec<u32>,
        used_p: Vec<bool>,
        used_i: Vec<bool>,
        best_reason: Obstruction,
    }

    impl<'a> Ctx<'a> {
        fn rec_rho(&mut self, p: usize) -> Option<ConjugacyCertificate> {
            let np = self.from.p_sizes.len();
            if p == np {
                return self.rec_kappa(0);
            }
            let prof = |td: &TwistedDual, p: usize| {
                let n0 = td.y_block(p).filter(|&y| td.b0[y].is_some()).count();
                let n1 = td.y_block(p).filter(|&y| td.b1[y].is_some()).count();
                (td.p_sizes[p], n0, n1)
            };
            let (sz, n0, n1) = prof(self.from, p);
            for tp in 0..np {
                if self.used_p[tp] {
                    continue;
                }
                let (tsz, tn0, tn1) = prof(self.to, tp);
                if sz != tsz {
                    continue;
                }
                for orient in [1i8, -1] {
                    let ok = if orient == 1 {
                        n0 == tn0 && n1 == tn1
                    } else {
                        n0 == tn1 && n1 == tn0
                    };
                    if !ok {
                        continue;
                    }
                    self.rho[p] = tp as u32;
                    self.o[p] = orient;
                    self.used_p[tp] = true;
                    if let Some(c) = self.rec_rho(p + 1) {
                        return Some(c);
                    }
                    self.used_p[tp] = false;
                    self.rho[p] = u32::MAX;
                }
            }
            None
        }

        fn rec_kappa(&mut self, i: usize) -> Option<ConjugacyCertificate> {
            let ni = self.from.i_sizes.len();
            if i == ni {
                return self.try_profile();
            }
            for ti in 0..ni {
                if self.used_i[ti] || self.from.i_sizes[i] != self.to.i_sizes[ti] {
                    continue;
                }
                self.kappa[i] = ti as u32;
                self.used_i[ti] = true;
                if let Some(c) = self.rec_kappa(i + 1) {
                    return Some(c);
                }
                self.used_i[ti] = false;
                self.kappa[i] = u32::MAX;
            }
            None
        }

        fn try_profile(&mut self) -> Option<ConjugacyCertificate> {
            let ident = vec![1i8; self.to.p_sizes.len()];
            // Twin-pair screen: identical-profile vertex pairs survive any
            // certificate, so per-block counts must agree.
            let from_twins = twin_counts(self.from, &self.o);
            let to_twins = twin_counts(self.to, &ident);
            for i in 0..self.from.i_sizes.len() {
                let ti = self.kappa[i] as usize;
                if from_twins[i] != to_twins[ti] {
                    self.best_reason = Obstruction::VertexInvariants(format!(
                        "twin-pair counts differ over i{i} ({} vs {})",
                        from_twins[i], to_twins[ti]
                    ));
                    return None;
                }
            }
            for i in 0..self.from.i_sizes.len() {
                let ti = self.kappa[i] as usize;
                let mut sf: Vec<Vec<(u32, u32, u32)>> = self
                    .from
                    .x_block(i)
                    .map(|x| vertex_signature(self.from, x, &self.o, Some(&self.rho)))
                    .collect();
                let mut st: Vec<Vec<(u32, u32, u32)>> = self
                    .to
                    .x_block(ti)
                    .map(|x| vertex_signature(self.to, x, &ident, None))
                    .collect();
                sf.sort();
                st.sort();
                if sf != st {
                    self.best_reason = Obstruction::VertexInvariants(format!(
                        "degree multisets over i{i} differ under the candidate profile"
                    ));
                    return None;
                }
            }
            let mut search = XiSearch::new(
                self.from,
                self.to,
                self.rho.clone(),
                self.o.clone(),
                self.kappa.clone(),
            );
            if !search.run(0) {
                return None;
            }
            let theta = build_theta(self.from, self.to, &self.rho, &self.o, &search.map)?;
            let mut xi = Vec::with_capacity(self.from.i_sizes.len());
            for i in 0..self.from.i_sizes.len() {
                let ti = self.kappa[i] as usize;
                let base = self.to.i_start[ti];
                xi.push(
                    self.from
                        .x_block(i)
                        .map(|x| search.map[x] - base)
                        .collect::<Vec<u32>>(),
                );
            }
            let cert = ConjugacyCertificate {
                rho: self.rho.clone(),
                kappa: self.kappa.clone(),
                o: self.o.clone(),
                theta,
                xi,
            };
            match verify_certificate(self.from, self.to, &cert) {
                Ok(()) => Some(cert),
                Err(_) => None,
            }
        }
    }

    let np = from.p_sizes.len();
    let ni = from.i_sizes.len();
    let mut ctx = Ctx {
        from,
        to,
        rho: vec![u32::MAX; np],
        o: vec![0; np],
        kappa: vec![u32::MAX; ni],
        used_p: vec![false; np],
        used_i: vec![false; ni],
        best_reason: Obstruction::SearchExhausted(
            "no (rho, kappa, o, Theta, Xi) tuple satisfies the commuting squares".into(),
        ),
    };
    match ctx.rec_rho(0) {
        Some(cert) => ConjugacyOutcome::Conjugate(cert),
        None => ConjugacyOutcome::NotConjugate(ctx.best_reason),
    }
}

/// Full decision procedure: reduce both pairs, decompose, match summands,
/// and search certificates per summand pair. The certificate maps the
/// tau side onto the sigma side.
pub fn decide_conjugacy(
    data: &NccwData,
    sigma: &TwistPerm,
    tau: &TwistPerm,
) -> Result<ConjugacyOutcome, ClassifyError> {
    let (data_s, sigma_r, _) = to_reduced_form(data, sigma)?;
    let (data_t, tau_r, _) = to_reduced_form(data, tau)?;
    debug_assert_eq!(data_s, data_t, "reduction is twist-independent");

    let (_, dec) = decompose(&data_s);
    let dual_s = dualize(&data_s);
    let td_sigma = TwistedDual::from_pair(&dual_s, &sigma_r);
    let td_tau = TwistedDual::from_pair(&dual_s, &tau_r);

    let restrict = |td: &TwistedDual, l: usize| -> TwistedDual {
        let ps = &dec.p_classes[l];
        let is = &dec.i_classes[l];
        let mut x_new = BTreeMap::new();
        let mut i_start = Vec::new();
        let mut x_i = Vec::new();
        for (new_i, &i) in is.iter().enumerate() {
            i_start.push(x_i.len() as u32);
            for x in td.x_block(i as usize) {
                x_new.insert(x as u32, x_i.len() as u32);
                x_i.push(IIdx(new_i as u32));
            }
        }
        let mut p_start = Vec::new();
        let mut y_p = Vec::new();
        let mut b0 = Vec::new();
        let mut b1 = Vec::new();
        for (new_p, &p) in ps.iter().enumerate() {
            p_start.push(y_p.len() as u32);
            for y in td.y_block(p as usize) {
                y_p.push(PIdx(new_p as u32));
                b0.push(td.b0[y].map(|x| XIdx(x_new[&x.0])));
                b1.push(td.b1[y].map(|x| XIdx(x_new[&x.0])));
            }
        }
        TwistedDual {
            p_sizes: ps.iter().map(|&p| td.p_sizes[p as usize]).collect(),
            i_sizes: is.iter().map(|&i| td.i_sizes[i as usize]).collect(),
            p_start,
            i_start,
            y_p,
            x_i,
            b0,
            b1,
        }
    };

    let nl = dec.p_classes.len();
    let tau_parts: Vec<TwistedDual> = (0..nl).map(|l| restrict(&td_tau, l)).collect();
    let sigma_parts: Vec<TwistedDual> = (0..nl).map(|l| restrict(&td_sigma, l)).collect();

    let mut matching = vec![usize::MAX; nl];
    let mut used = vec![false; nl];
    let mut per_pair: Vec<Option<ConjugacyCertificate>> = vec![None; nl];
    fn match_rec(
        l: usize,
        nl: usize,
        tau_parts: &[TwistedDual],
        sigma_parts: &[TwistedDual],
        matching: &mut Vec<usize>,
        used: &mut Vec<bool>,
        per_pair: &mut Vec<Option<ConjugacyCertificate>>,
    ) -> bool {
        if l == nl {
            return true;
        }
        for m in 0..nl {
            if used[m] {
                continue;
            }
            if let ConjugacyOutcome::Conjugate(c) = decide_twisted(&tau_parts[l], &sigma_parts[m])
            {
                matching[l] = m;
                used[m] = true;
                per_pair[l] = Some(c);
                if match_rec(l + 1, nl, tau_parts, sigma_parts, matching, used, per_pair) {
                    return true;
                }
                used[m] = false;
                matching[l] = usize::MAX;
                per_pair[l] = None;
            }
        }
        false
    }
    if !match_rec(
        0,
        nl,
        &tau_parts,
        &sigma_parts,
        &mut matching,
        &mut used,
        &mut per_pair,
    ) {
        let reason = if nl > 1 {
            Obstruction::SummandStructure(format!(
                "no matching of the {nl} indecomposable summands admits certificates"
            ))
        } else {
            match decide_twisted(&tau_parts[0], &sigma_parts[0]) {
                ConjugacyOutcome::NotConjugate(o) => o,
                _ => unreachable!(),
            }
        };
        return Ok(ConjugacyOutcome::NotConjugate(reason));
    }

    // Assemble the global certificate from the per-summand ones.
    let np = data_s.num_p();
    let ni = data_s.num_i();
    let mut cert = ConjugacyCertificate {
        rho: vec![0; np],
        kappa: vec![0; ni],
        o: vec![1; np],
        theta: vec![Vec::new(); np],
        xi: vec![Vec::new(); ni],
    };
    for l in 0..nl {
        let m = matching[l];
        let part = per_pair[l].as_ref().unwrap();
        for (k, &p) in dec.p_classes[l].iter().enumerate() {
            let tp = dec.p_classes[m][part.rho[k] as usize];
            cert.rho[p as usize] = tp;
            cert.o[p as usize] = part.o[k];
            cert.theta[p as usize] = part.theta[k].clone();
        }
        for (k, &i) in dec.i_classes[l].iter().enumerate() {
            let ti = dec.i_classes[m][part.kappa[k] as usize];
            cert.kappa[i as usize] = ti;
            cert.xi[i as usize] = part.xi[k].clone();
        }
    }
    verify_certificate(&td_tau, &td_sigma, &cert).map_err(ClassifyError::SizeMismatch)?;
    Ok(ConjugacyOutcome::Conjugate(cert))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::example_r1;

    #[test]
    fn r1_identity_pair_conjugate() {
        let data = example_r1();
        let dual = dualize(&data);
        let id = TwistPerm::identity(&dual);
        let out = decide_conjugacy(&data, &id, &id).unwrap();
        assert!(out.is_conjugate());
    }

    #[test]
    fn r1_id_vs_swap_not_conjugate() {
        // Two loops vs one 2-cycle: component structure differs, no
        // certificate can exist.
        let data = example_r1();
        let dual = dualize(&data);
        let id = TwistPerm::identity(&dual);
        let swap = TwistPerm {
            per_block: vec![Perm::parse_cycles(2, "(1 2)").unwrap()],
        };
        let out = decide_conjugacy(&data, &id, &swap).unwrap();
        assert!(!out.is_conjugate());
    }

    #[test]
    fn r1_has_no_redundant_index() {
        // redundancy needs a partner block
        let data = example_r1();
        let dual = dualize(&data);
        let id = TwistPerm::identity(&dual);
        let (reduced, _, log) = to_reduced_form(&data, &id).unwrap();
        assert!(log.is_empty());
        assert_eq!(reduced, data);
    }

    #[test]
    fn single_step_reduction() {
        // Two pass-through blocks over the same [j] = 2 summand: the merge
        // produces one block whose boundary maps are both unital of
        // multiplicity 1 (two arcs fuse into a circle block).
        let data = NccwData::with_canonical_layout(
            vec![2, 2],
            vec![2],
            [vec![vec![1], vec![1]], vec![vec![1], vec![1]]],
        );
        let report = validate_nccw(&data);
        assert!(report.errors.is_empty());
        let dual = dualize(&data);
        let id = TwistPerm::identity(&dual);
        let (reduced, _, log) = to_reduced_form(&data, &id).unwrap();
        assert_eq!(log.len(), 1);
        assert_eq!(log[0].case, RewriteCase::SameSide);
        assert_eq!(reduced.num_p(), 1);
        assert_eq!(reduced.mult[0][0], vec![1]);
        assert_eq!(reduced.mult[1][0], vec![1]);
        // idempotent
        let dual2 = dualize(&reduced);
        let (again, _, log2) = to_reduced_form(&reduced, &TwistPerm::identity(&dual2)).unwrap();
        assert!(log2.is_empty());
        assert_eq!(again, reduced);
    }

    #[test]
    fn reduction_of_dangling_pair() {
        // P = {q, q_bar}, I = {j} with [j] = 2, beta_0^{q_bar,j} and
        // beta_1^{q,j} isomorphisms, beta_1^{q_bar,j} = beta_0^{q,j} = 0.
        // The merge runs each q_bar-edge through its partner: what remains
        // is a block of fully open arcs (the glued interior point is no
        // longer marked), and the summand j ends up untouched.
        let data = NccwData::with_canonical_layout(
            vec![2, 2],
            vec![2],
            [vec![vec![0], vec![1]], vec![vec![1], vec![0]]],
        );
        let dual = dualize(&data);
        let id = TwistPerm::identity(&dual);
        let (reduced, _, log) = to_reduced_form(&data, &id).unwrap();
        assert_eq!(log.len(), 1);
        assert_eq!(log[0].case, RewriteCase::MixedSides);
        assert_eq!(reduced.num_p(), 1);
        assert_eq!(reduced.mult[0][0], vec![0]);
        assert_eq!(reduced.mult[1][0], vec![0]);
    }

    #[test]
    fn chain_of_two_reductions() {
        // Three blocks chained by two redundancy patterns: j0 gives isos
        // between q0 and q1, j1 between q1 and q2; j2 keeps the surviving
        // block attached to something afterwards.
        let data = NccwData::with_canonical_layout(
            vec![2, 2, 2],
            vec![2, 2, 2],
            [
                vec![vec![0, 0, 1], vec![1, 0, 0], vec![0, 1, 0]],
                vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]],
            ],
        );
        let report = validate_nccw(&data);
        assert!(report.errors.is_empty(), "{:?}", report.errors);
        let dual = dualize(&data);
        let id = TwistPerm::identity(&dual);
        let (reduced, _, log) = to_reduced_form(&data, &id).unwrap();
        assert_eq!(log.len(), 2);
        assert_eq!(reduced.num_p(), 1);
    }

    #[test]
    fn decompose_examples() {
        let (parts, _) = decompose(&example_r1());
        assert_eq!(parts.len(), 1);

        // two p-blocks sharing no i
        let data = NccwData::with_canonical_layout(
            vec![1, 1],
            vec![1, 1],
            [vec![vec![1, 0], vec![0, 1]], vec![vec![1, 0], vec![0, 1]]],
        );
        let (parts, dec) = decompose(&data);
        assert_eq!(parts.len(), 2);
        assert_eq!(dec.p_classes, vec![vec![0], vec![1]]);

        // both hitting i = 0
        let data = NccwData::with_canonical_layout(
            vec![1, 1],
            vec![1],
            [vec![vec![1], vec![1]], vec![vec![1], vec![1]]],
        );
        let (parts, _) = decompose(&data);
        assert_eq!(parts.len(), 1);
    }

    #[test]
    fn certificate_algebra() {
        let data = example_r1();
        let dual = dualize(&data);
        let td = TwistedDual::from_pair(&dual, &TwistPerm::identity(&dual));
        let id = ConjugacyCertificate::identity(&td);
        verify_certificate(&td, &td, &id).unwrap();
        let inv = id.invert();
        verify_certificate(&td, &td, &inv).unwrap();
        let comp = id.compose(&inv);
        verify_certificate(&td, &td, &comp).unwrap();
    }
}
