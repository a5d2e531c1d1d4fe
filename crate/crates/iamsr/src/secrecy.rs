//! The secrecy layer: pads a short secret with uniformly random symbols and
//! places both into the message vector so that an eavesdropper who reads l1
//! whole nodes and the repair downloads of l2 systematic nodes learns nothing
//! about the secret.
//!
//! Placement is tap-aware: secret symbols go into systematic blocks the
//! intruder never stores and into symbol positions no tapped repair touches.
//! Two independent verifiers decide perfect secrecy: a rank criterion on the
//! observation matrix, and (for small instances) brute-force enumeration of
//! the observation distribution.

use crate::code::{CodeError, CodeParams, GeneratorSet, NodeContent};
use crate::gf::{FieldElement, GfError, Matrix};
use rand::Rng;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum SecrecyError {
    #[error("node id {id} is out of range 1..={n}")]
    NodeIdRange { id: usize, n: usize },
    #[error("node {0} appears in both tap sets")]
    OverlappingTaps(usize),
    #[error("repair taps apply to systematic nodes only, node {0} is parity")]
    ParityRepairTap(usize),
    #[error("too many taps: l1 + l2 = {total} must stay below k = {k}")]
    TooManyTaps { total: usize, k: usize },
    #[error("eavesdropper model was built for k = {model_k}, code has k = {code_k}")]
    ModelMismatch { model_k: usize, code_k: usize },
    #[error("secret must have {expected} symbols, got {got}")]
    SecretLength { expected: usize, got: usize },
    #[error("randomness must have {expected} symbols, got {got}")]
    RandomnessLength { expected: usize, got: usize },
    #[error("cluster snapshot must hold all {expected} nodes exactly once")]
    IncompleteCluster { expected: usize },
    #[error("enumeration needs {states} states, over the limit {limit}")]
    StateSpaceTooLarge { states: u128, limit: u128 },
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    Gf(#[from] GfError),
}

/// Which taps the intruder holds: e1 nodes leak everything they store, e2
/// systematic nodes leak every symbol downloaded while repairing them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EveModel {
    k: usize,
    n: usize,
    e1: BTreeSet<usize>,
    e2: BTreeSet<usize>,
}

impl EveModel {
    pub fn new(
        params: &CodeParams,
        e1: impl IntoIterator<Item = usize>,
        e2: impl IntoIterator<Item = usize>,
    ) -> Result<Self, SecrecyError> {
        let (k, n) = (params.k(), params.n());
        let e1: BTreeSet<usize> = e1.into_iter().collect();
        let e2: BTreeSet<usize> = e2.into_iter().collect();
        for &id in e1.iter().chain(e2.iter()) {
            if id == 0 || id > n {
                return Err(SecrecyError::NodeIdRange { id, n });
            }
        }
        if let Some(&id) = e1.intersection(&e2).next() {
            return Err(SecrecyError::OverlappingTaps(id));
        }
        if let Some(&id) = e2.iter().find(|&&id| id > k) {
            return Err(SecrecyError::ParityRepairTap(id));
        }
        let total = e1.len() + e2.len();
        if total >= k {
            return Err(SecrecyError::TooManyTaps { total, k });
        }
        Ok(Self { k, n, e1, e2 })
    }

    /// The conventional tap set for bare counts: storage taps on the first
    /// l1 nodes, repair taps on the last l2 systematic nodes.
    pub fn from_counts(params: &CodeParams, l1: usize, l2: usize) -> Result<Self, SecrecyError> {
        check_tap_counts(params, l1, l2)?;
        let k = params.k();
        Self::new(params, 1..=l1, k - l2 + 1..=k)
    }

    pub fn e1(&self) -> &BTreeSet<usize> {
        &self.e1
    }

    pub fn e2(&self) -> &BTreeSet<usize> {
        &self.e2
    }

    pub fn l1(&self) -> usize {
        self.e1.len()
    }

    pub fn l2(&self) -> usize {
        self.e2.len()
    }

    fn check_against(&self, params: &CodeParams) -> Result<(), SecrecyError> {
        if self.k != params.k() || self.n != params.n() {
            return Err(SecrecyError::ModelMismatch { model_k: self.k, code_k: params.k() });
        }
        Ok(())
    }
}

fn check_tap_counts(params: &CodeParams, l1: usize, l2: usize) -> Result<(), SecrecyError> {
    if l1 + l2 >= params.k() {
        return Err(SecrecyError::TooManyTaps { total: l1 + l2, k: params.k() });
    }
    Ok(())
}

/// How many symbols can be kept secret from an (l1, l2) eavesdropper:
/// (k - l1 - l2) * (alpha - l2).
pub fn secrecy_capacity(params: &CodeParams, l1: usize, l2: usize) -> Result<usize, SecrecyError> {
    check_tap_counts(params, l1, l2)?;
    Ok((params.k() - l1 - l2) * (params.alpha() - l2))
}

/// Number of random padding symbols, R = B - B^(s). Also evaluated as
/// (l1 + l2) * alpha + (k - l1 - l2) * l2; the two must agree.
pub fn random_symbol_count(params: &CodeParams, l1: usize, l2: usize) -> Result<usize, SecrecyError> {
    let by_difference = params.message_len() - secrecy_capacity(params, l1, l2)?;
    let by_formula = (l1 + l2) * params.alpha() + (params.k() - l1 - l2) * l2;
    assert_eq!(by_difference, by_formula, "random symbol count identity must hold");
    Ok(by_formula)
}

/// Distinct symbols the eavesdropper can observe:
/// l1 * alpha + (n - l2) * beta * l2 - beta * l1 * l2.
pub fn observed_symbol_count(params: &CodeParams, l1: usize, l2: usize) -> Result<usize, SecrecyError> {
    check_tap_counts(params, l1, l2)?;
    let raw = l1 * params.alpha() + (params.n() - l2) * params.beta() * l2;
    Ok(raw - params.beta() * l1 * l2)
}

/// True iff B - observed_symbol_count equals the secrecy capacity, i.e. the
/// capacity is exactly what the observations leave untouched.
pub fn capacity_identity_check(params: &CodeParams, l1: usize, l2: usize) -> Result<bool, SecrecyError> {
    let observed = observed_symbol_count(params, l1, l2)?;
    let capacity = secrecy_capacity(params, l1, l2)?;
    Ok(params.alpha() * params.k() - observed == capacity)
}

/// Secrecy upper bounds against l compromised nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SecrecyBounds {
    /// sum_{i=l}^{k-1} min(alpha, (d - i) * beta), any regenerating code.
    pub general: usize,
    /// (k - l) * alpha, the minimum-storage point.
    pub msr: usize,
}

pub fn upper_bounds(params: &CodeParams, l: usize) -> Result<SecrecyBounds, SecrecyError> {
    if l >= params.k() {
        return Err(SecrecyError::TooManyTaps { total: l, k: params.k() });
    }
    let general = (l..params.k())
        .map(|i| params.alpha().min((params.d() - i) * params.beta()))
        .sum();
    Ok(SecrecyBounds { general, msr: (params.k() - l) * params.alpha() })
}

/// Where the secret and the random padding sit inside the B-symbol message.
///
/// Secret slots are chosen against the tap sets: only blocks outside
/// e1 and e2, and only symbol positions no tapped repair downloads. The
/// combined vector is always (rand, secret); this layout maps each combined
/// index to its message position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SecureLayout {
    rand_positions: Vec<usize>,
    secret_positions: Vec<usize>,
    message_len: usize,
}

impl SecureLayout {
    /// The tap-aware placement for an eavesdropper model.
    pub fn for_eve(params: &CodeParams, eve: &EveModel) -> Result<Self, SecrecyError> {
        eve.check_against(params)?;
        let (k, alpha) = (params.k(), params.alpha());
        let capacity = secrecy_capacity(params, eve.l1(), eve.l2())?;
        let block_count = k - eve.l1() - eve.l2();

        let available: Vec<usize> = (1..=k)
            .filter(|b| !eve.e1.contains(b) && !eve.e2.contains(b))
            .collect();
        debug_assert!(available.len() >= block_count);
        let blocks = &available[available.len() - block_count..];
        let positions: Vec<usize> = (1..=alpha).filter(|p| !eve.e2.contains(p)).collect();

        let secret_positions: Vec<usize> = blocks
            .iter()
            .flat_map(|&b| positions.iter().map(move |&p| (b - 1) * alpha + (p - 1)))
            .collect();
        debug_assert_eq!(secret_positions.len(), capacity);
        let secret_set: BTreeSet<usize> = secret_positions.iter().copied().collect();
        let rand_positions: Vec<usize> =
            (0..params.message_len()).filter(|i| !secret_set.contains(i)).collect();
        Ok(Self { rand_positions, secret_positions, message_len: params.message_len() })
    }

    /// A deliberately unprotected layout: every symbol is secret, no padding.
    /// Exists so the verifiers can demonstrate a failing scheme.
    pub fn all_secret(message_len: usize) -> Self {
        Self {
            rand_positions: Vec::new(),
            secret_positions: (0..message_len).collect(),
            message_len,
        }
    }

    pub fn rand_count(&self) -> usize {
        self.rand_positions.len()
    }

    pub fn secret_count(&self) -> usize {
        self.secret_positions.len()
    }

    pub fn message_len(&self) -> usize {
        self.message_len
    }

    /// 0-based message positions of the secret symbols, in combined order.
    pub fn secret_positions(&self) -> &[usize] {
        &self.secret_positions
    }

    /// 0-based message positions of the random symbols, in combined order.
    pub fn rand_positions(&self) -> &[usize] {
        &self.rand_positions
    }

    pub(crate) fn assemble_raw(&self, rand: &[u16], secret: &[u16], out: &mut [u16]) {
        debug_assert_eq!(rand.len(), self.rand_positions.len());
        debug_assert_eq!(secret.len(), self.secret_positions.len());
        debug_assert_eq!(out.len(), self.message_len);
        for (&pos, &v) in self.rand_positions.iter().zip(rand) {
            out[pos] = v;
        }
        for (&pos, &v) in self.secret_positions.iter().zip(secret) {
            out[pos] = v;
        }
    }

    pub(crate) fn extract_secret_raw(&self, message: &[u16], out: &mut [u16]) {
        debug_assert_eq!(message.len(), self.message_len);
        debug_assert_eq!(out.len(), self.secret_positions.len());
        for (o, &pos) in out.iter_mut().zip(&self.secret_positions) {
            *o = message[pos];
        }
    }
}

/// A secret with its padding. The combined vector is (rand, secret).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SecureMessage {
    rand: Vec<FieldElement>,
    secret: Vec<FieldElement>,
}

impl SecureMessage {
    pub fn rand(&self) -> &[FieldElement] {
        &self.rand
    }

    pub fn secret(&self) -> &[FieldElement] {
        &self.secret
    }

    /// (rand, secret) concatenated, length B.
    pub fn combined(&self) -> Vec<FieldElement> {
        self.rand.iter().chain(self.secret.iter()).copied().collect()
    }
}

fn assemble_message(
    gens: &GeneratorSet,
    layout: &SecureLayout,
    msg: &SecureMessage,
) -> Vec<FieldElement> {
    let f = gens.params().field();
    let mut raw = vec![0u16; layout.message_len()];
    let rand: Vec<u16> = msg.rand.iter().map(|e| e.value()).collect();
    let secret: Vec<u16> = msg.secret.iter().map(|e| e.value()).collect();
    layout.assemble_raw(&rand, &secret, &mut raw);
    raw.into_iter().map(|v| f.element(u64::from(v))).collect()
}

/// Encodes a secret with explicit padding symbols. The padding must be
/// uniform and fresh for the secrecy guarantee to mean anything; this entry
/// point exists for deterministic tests and for replaying recorded padding.
pub fn secure_encode_with_randomness(
    gens: &GeneratorSet,
    eve: &EveModel,
    secret: &[FieldElement],
    rand: &[FieldElement],
) -> Result<(Vec<NodeContent>, SecureMessage), SecrecyError> {
    let params = gens.params();
    eve.check_against(params)?;
    let layout = SecureLayout::for_eve(params, eve)?;
    if secret.len() != layout.secret_count() {
        return Err(SecrecyError::SecretLength { expected: layout.secret_count(), got: secret.len() });
    }
    if rand.len() != layout.rand_count() {
        return Err(SecrecyError::RandomnessLength { expected: layout.rand_count(), got: rand.len() });
    }
    let f = params.field();
    for e in secret.iter().chain(rand.iter()) {
        if e.field() != f {
            return Err(GfError::FieldMismatch(f.modulus(), e.field().modulus()).into());
        }
    }
    let msg = SecureMessage { rand: rand.to_vec(), secret: secret.to_vec() };
    let message = assemble_message(gens, &layout, &msg);
    let nodes = gens.encode(&message)?;
    Ok((nodes, msg))
}

/// Encodes a secret of secrecy_capacity symbols, drawing the padding
/// uniformly from the caller's randomness source.
pub fn secure_encode<R: Rng + ?Sized>(
    gens: &GeneratorSet,
    eve: &EveModel,
    secret: &[FieldElement],
    rng: &mut R,
) -> Result<(Vec<NodeContent>, SecureMessage), SecrecyError> {
    let params = gens.params();
    eve.check_against(params)?;
    let layout = SecureLayout::for_eve(params, eve)?;
    let f = params.field();
    let q = u64::from(f.modulus());
    let rand: Vec<FieldElement> =
        (0..layout.rand_count()).map(|_| f.element(rng.gen_range(0..q))).collect();
    secure_encode_with_randomness(gens, eve, secret, &rand)
}

/// Recovers the secret from any k nodes: reconstruct everything, keep the
/// secret slots.
pub fn secure_decode(
    gens: &GeneratorSet,
    eve: &EveModel,
    nodes: &[NodeContent],
) -> Result<Vec<FieldElement>, SecrecyError> {
    let params = gens.params();
    eve.check_against(params)?;
    let layout = SecureLayout::for_eve(params, eve)?;
    let message = gens.reconstruct(nodes)?;
    Ok(layout.secret_positions.iter().map(|&pos| message[pos]).collect())
}

fn cluster_by_id<'a>(
    gens: &GeneratorSet,
    nodes: &'a [NodeContent],
) -> Result<Vec<&'a NodeContent>, SecrecyError> {
    let p = gens.params();
    if nodes.len() != p.n() {
        return Err(SecrecyError::IncompleteCluster { expected: p.n() });
    }
    let mut by_id: Vec<Option<&NodeContent>> = vec![None; p.n()];
    for nc in nodes {
        if nc.node_id() == 0 || nc.node_id() > p.n() {
            return Err(SecrecyError::NodeIdRange { id: nc.node_id(), n: p.n() });
        }
        if nc.symbols().len() != p.alpha() {
            return Err(CodeError::BadNodeContent { node: nc.node_id(), reason: "wrong symbol count" }.into());
        }
        if by_id[nc.node_id() - 1].replace(nc).is_some() {
            return Err(CodeError::DuplicateNode(nc.node_id()).into());
        }
    }
    Ok(by_id.into_iter().map(|o| o.expect("n slots, n nodes, no duplicates")).collect())
}

/// Everything the modeled intruder records, as values: the full contents of
/// each e1 node, then for each e2 node the symbols every helper outside e2
/// sends while repairing it. Helpers per repair: n - l2.
pub fn eavesdrop(
    gens: &GeneratorSet,
    eve: &EveModel,
    nodes: &[NodeContent],
) -> Result<Vec<FieldElement>, SecrecyError> {
    eve.check_against(gens.params())?;
    let by_id = cluster_by_id(gens, nodes)?;
    let mut seen = Vec::new();
    for &m in &eve.e1 {
        seen.extend_from_slice(by_id[m - 1].symbols());
    }
    for &failed in &eve.e2 {
        for helper in 1..=gens.params().n() {
            if eve.e2.contains(&helper) {
                continue;
            }
            seen.push(by_id[helper - 1].symbols()[failed - 1]);
        }
    }
    Ok(seen)
}

/// The linear functionals behind `eavesdrop`, one row per observed symbol,
/// over the message in its stored order. Not deduplicated.
fn observation_rows(gens: &GeneratorSet, eve: &EveModel) -> Vec<Vec<u16>> {
    let p = gens.params();
    let mut rows = Vec::new();
    let push_column = |node: usize, j: usize, rows: &mut Vec<Vec<u16>>| {
        let g = gens.generator(node);
        rows.push((0..p.message_len()).map(|r| g.get_raw(r, j)).collect());
    };
    for &m in &eve.e1 {
        for j in 0..p.alpha() {
            push_column(m, j, &mut rows);
        }
    }
    for &failed in &eve.e2 {
        for helper in 1..=p.n() {
            if eve.e2.contains(&helper) {
                continue;
            }
            push_column(helper, failed - 1, &mut rows);
        }
    }
    rows
}

/// The observation matrix in combined-message coordinates: observed values =
/// H * (rand, secret). The first rand_cols columns form the padding block,
/// the rest the secret block.
#[derive(Clone, Debug)]
pub struct ObservationMatrix {
    h: Matrix,
    rand_cols: usize,
    raw_row_count: usize,
}

impl ObservationMatrix {
    pub fn h(&self) -> &Matrix {
        &self.h
    }

    pub fn rand_cols(&self) -> usize {
        self.rand_cols
    }

    pub fn secret_cols(&self) -> usize {
        self.h.cols() - self.rand_cols
    }

    /// Row count after removing repeated functionals.
    pub fn row_count(&self) -> usize {
        self.h.rows()
    }

    /// Row count before deduplication: l1 * alpha + (n - l2) * l2.
    pub fn raw_row_count(&self) -> usize {
        self.raw_row_count
    }

    /// The padding block H_r (first rand_cols columns).
    pub fn h_rand(&self) -> Matrix {
        self.sub_columns(0, self.rand_cols)
    }

    /// The secret block H_u (remaining columns).
    pub fn h_secret(&self) -> Matrix {
        self.sub_columns(self.rand_cols, self.h.cols())
    }

    fn sub_columns(&self, from: usize, to: usize) -> Matrix {
        let mut m = Matrix::zero(self.h.field(), self.h.rows(), to - from);
        for r in 0..self.h.rows() {
            for c in from..to {
                m.set_raw(r, c - from, self.h.get_raw(r, c));
            }
        }
        m
    }
}

/// Observation matrix under an explicit layout (for probing broken schemes).
pub fn observation_matrix_with_layout(
    gens: &GeneratorSet,
    eve: &EveModel,
    layout: &SecureLayout,
) -> Result<ObservationMatrix, SecrecyError> {
    eve.check_against(gens.params())?;
    let raw = observation_rows(gens, eve);
    let raw_row_count = raw.len();
    let mut deduped: Vec<Vec<u16>> = Vec::new();
    let mut seen: BTreeSet<Vec<u16>> = BTreeSet::new();
    for row in raw {
        if seen.insert(row.clone()) {
            deduped.push(row);
        }
    }
    let b = gens.params().message_len();
    let mut h = Matrix::zero(gens.params().field(), deduped.len(), b);
    for (r, row) in deduped.iter().enumerate() {
        for (combined, &pos) in
            layout.rand_positions.iter().chain(layout.secret_positions.iter()).enumerate()
        {
            h.set_raw(r, combined, row[pos]);
        }
    }
    Ok(ObservationMatrix { h, rand_cols: layout.rand_count(), raw_row_count })
}

/// Observation matrix under the tap-aware layout for this model.
pub fn observation_matrix(gens: &GeneratorSet, eve: &EveModel) -> Result<ObservationMatrix, SecrecyError> {
    let layout = SecureLayout::for_eve(gens.params(), eve)?;
    observation_matrix_with_layout(gens, eve, &layout)
}

/// Outcome of the rank-based secrecy check.
///
/// The observations equal H_r * rand + H_u * secret. With uniform padding the
/// conditional observation distribution given a secret s is uniform over the
/// coset H_u * s + Im(H_r), so all secrets are indistinguishable exactly when
/// every column of H_u lies in the column space of H_r; `leakage_dims` counts
/// the secret directions that escape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SecrecyReport {
    /// Number of padding symbols R.
    pub rand_count: usize,
    /// rank(H) over the whole combined message.
    pub rank_full: usize,
    /// rank(H_r), the padding block alone.
    pub rank_rand: usize,
    /// Padding is fully determined by the observations once the secret is
    /// known: rank(H_r) = R.
    pub step1: bool,
    /// Observations carry no more entropy than the padding: rank(H) <= R.
    pub step2: bool,
    /// dim(column space of H_u modulo column space of H_r).
    pub leakage_dims: usize,
    pub perfect: bool,
}

/// Rank-based secrecy check under an explicit layout.
pub fn verify_secrecy_rank_with_layout(
    gens: &GeneratorSet,
    eve: &EveModel,
    layout: &SecureLayout,
) -> Result<SecrecyReport, SecrecyError> {
    let obs = observation_matrix_with_layout(gens, eve, layout)?;
    let rank_full = obs.h().rank();
    let rank_rand = obs.h_rand().rank();
    let rand_count = layout.rand_count();
    let leakage_dims = rank_full - rank_rand;
    Ok(SecrecyReport {
        rand_count,
        rank_full,
        rank_rand,
        step1: rank_rand == rand_count,
        step2: rank_full <= rand_count,
        leakage_dims,
        perfect: leakage_dims == 0,
    })
}

/// Rank-based secrecy check under the tap-aware layout.
pub fn verify_secrecy_rank(gens: &GeneratorSet, eve: &EveModel) -> Result<SecrecyReport, SecrecyError> {
    let layout = SecureLayout::for_eve(gens.params(), eve)?;
    verify_secrecy_rank_with_layout(gens, eve, &layout)
}

fn for_each_tuple(q: u16, len: usize, f: &mut impl FnMut(&[u16])) {
    let mut v = vec![0u16; len];
    loop {
        f(&v);
        let mut i = 0;
        loop {
            if i == len {
                return;
            }
            v[i] += 1;
            if v[i] < q {
                break;
            }
            v[i] = 0;
            i += 1;
        }
    }
}

/// Definitional perfect-secrecy check by enumeration, under an explicit
/// layout: for every secret, enumerate all q^R paddings, encode, record the
/// multiset of observation tuples; true iff every secret induces the same
/// multiset. Independent of the rank criterion.
pub fn verify_secrecy_exhaustive_with_layout(
    gens: &GeneratorSet,
    eve: &EveModel,
    layout: &SecureLayout,
    max_states: u128,
) -> Result<bool, SecrecyError> {
    eve.check_against(gens.params())?;
    let q = gens.params().field().modulus();
    let states = u128::from(q)
        .checked_pow(layout.rand_count() as u32)
        .and_then(|r| r.checked_mul(u128::from(q).checked_pow(layout.secret_count() as u32)?))
        .unwrap_or(u128::MAX);
    if states > max_states {
        return Err(SecrecyError::StateSpaceTooLarge { states, limit: max_states });
    }

    let f = gens.params().field();
    let to_elements =
        |vals: &[u16]| vals.iter().map(|&v| f.element(u64::from(v))).collect::<Vec<_>>();
    let mut reference: Option<BTreeMap<Vec<u16>, u64>> = None;
    let mut all_match = true;
    for_each_tuple(q, layout.secret_count(), &mut |secret| {
        if !all_match {
            return;
        }
        let secret = to_elements(secret);
        let mut multiset: BTreeMap<Vec<u16>, u64> = BTreeMap::new();
        for_each_tuple(q, layout.rand_count(), &mut |rand| {
            let msg = SecureMessage { rand: to_elements(rand), secret: secret.clone() };
            let message = assemble_message(gens, layout, &msg);
            let nodes = gens.encode(&message).expect("message has length B");
            let seen = eavesdrop(gens, eve, &nodes).expect("full cluster");
            let key: Vec<u16> = seen.iter().map(|e| e.value()).collect();
            *multiset.entry(key).or_insert(0) += 1;
        });
        match &reference {
            None => reference = Some(multiset),
            Some(first) => {
                if first != &multiset {
                    all_match = false;
                }
            }
        }
    });
    Ok(all_match)
}

/// Definitional perfect-secrecy check under the tap-aware layout.
pub fn verify_secrecy_exhaustive(
    gens: &GeneratorSet,
    eve: &EveModel,
    max_states: u128,
) -> Result<bool, SecrecyError> {
    let layout = SecureLayout::for_eve(gens.params(), eve)?;
    verify_secrecy_exhaustive_with_layout(gens, eve, &layout, max_states)
}
