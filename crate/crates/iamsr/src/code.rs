//! The regenerating code itself: an [n = 2k, k, d = n-1] MSR code that
//! stores alpha = k symbols per node and repairs a lost systematic node by
//! downloading exactly one symbol from each of the d survivors.
//!
//! Parity generator matrices interleave a Cauchy column on the diagonal
//! block with rank-one off-diagonal blocks; during repair the off-diagonal
//! interference from every intact block collapses onto a single vector and
//! cancels against the survivors' own symbols.

use crate::cauchy::{self, CauchyError};
use crate::gf::{FieldElement, GfError, Matrix, PrimeField};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum CodeError {
    #[error("k must be at least 2, got {0}")]
    KTooSmall(usize),
    #[error("field modulus {q} is too small: need a prime of at least {min}")]
    FieldTooSmall { q: u16, min: u16 },
    #[error("epsilon = {0} is invalid: need epsilon != 0 and epsilon^2 != 1")]
    EpsilonInvalid(u16),
    #[error("encoding matrix must be {expected_rows}x{expected_cols}, got {rows}x{cols}")]
    PsiShape { expected_rows: usize, expected_cols: usize, rows: usize, cols: usize },
    #[error("encoding matrix has a singular square submatrix")]
    PsiNotTotallyNonsingular,
    #[error("message must have {expected} symbols, got {got}")]
    MessageLength { expected: usize, got: usize },
    #[error("node id {id} is out of range 1..={n}")]
    NodeIdRange { id: usize, n: usize },
    #[error("need exactly {expected} distinct nodes, got {got}")]
    NodeCount { expected: usize, got: usize },
    #[error("node id {0} appears more than once")]
    DuplicateNode(usize),
    #[error("node {node} content is inconsistent: {reason}")]
    BadNodeContent { node: usize, reason: &'static str },
    #[error("node {0} is parity; systematic repair does not apply")]
    NotSystematic(usize),
    #[error("node {0} is systematic; the parity fallback does not apply")]
    NotParity(usize),
    #[error("repair download from node {node} does not follow the plan: {reason}")]
    PlanMismatch { node: usize, reason: &'static str },
    #[error(transparent)]
    Gf(#[from] GfError),
    #[error(transparent)]
    Cauchy(#[from] CauchyError),
}

/// Code family parameters. Fixing n = 2k and d = n - 1 forces
/// alpha = d - k + 1 = k, beta = 1, and message length B = k * alpha = k^2.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CodeParams {
    k: usize,
    n: usize,
    d: usize,
    alpha: usize,
    beta: usize,
    b: usize,
    field: PrimeField,
    epsilon: FieldElement,
}

fn smallest_prime_at_least(mut m: u16) -> u16 {
    loop {
        if PrimeField::new(m).is_ok() {
            return m;
        }
        m = m.checked_add(1).expect("prime below u16::MAX exists");
    }
}

impl CodeParams {
    /// Derives all parameters from k. The field defaults to the smallest
    /// prime q >= max(2k, 5); pass `q_override` for a larger field (symbols
    /// per byte need q >= 257, for example). Epsilon defaults to 2, which is
    /// valid for every prime q >= 5.
    pub fn new(k: usize, q_override: Option<u16>) -> Result<Self, CodeError> {
        if k < 2 {
            return Err(CodeError::KTooSmall(k));
        }
        let n = 2 * k;
        let d = n - 1;
        let alpha = d - k + 1;
        debug_assert_eq!(alpha, k);
        let min_q = (alpha + n - k).max(4) as u16;
        let q = match q_override {
            Some(q) => q,
            None => smallest_prime_at_least(min_q.max(5)),
        };
        let field = PrimeField::new(q).map_err(|_| CodeError::FieldTooSmall { q, min: min_q })?;
        if q < min_q {
            return Err(CodeError::FieldTooSmall { q, min: min_q });
        }
        let params = Self {
            k,
            n,
            d,
            alpha,
            beta: 1,
            b: k * alpha,
            field,
            epsilon: field.element(2),
        };
        check_epsilon(params.epsilon)?;
        Ok(params)
    }

    /// Replaces epsilon (reduced mod q). Validity is enforced when the
    /// generator set is built, so tests can probe invalid choices.
    pub fn with_epsilon(mut self, epsilon: u64) -> Self {
        self.epsilon = self.field.element(epsilon);
        self
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn alpha(&self) -> usize {
        self.alpha
    }

    pub fn beta(&self) -> usize {
        self.beta
    }

    /// Message length B = k * alpha.
    pub fn message_len(&self) -> usize {
        self.b
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn epsilon(&self) -> FieldElement {
        self.epsilon
    }

    /// The default alpha x (n - k) Cauchy encoding matrix, built from the
    /// canonical point sequence 0, 1, ..., alpha + n - k - 1.
    pub fn canonical_psi(&self) -> Result<Matrix, CauchyError> {
        cauchy::cauchy_canonical(self.field, self.alpha, self.n - self.k)
    }

    pub fn role_of(&self, node_id: usize) -> Result<NodeRole, CodeError> {
        if node_id == 0 || node_id > self.n {
            return Err(CodeError::NodeIdRange { id: node_id, n: self.n });
        }
        Ok(if node_id <= self.k { NodeRole::Systematic } else { NodeRole::Parity })
    }

    /// The repair download plan for a failed systematic node: every survivor
    /// passes its symbol with the failed node's index. d entries.
    pub fn repair_plan(&self, failed: usize) -> Result<BTreeMap<usize, usize>, CodeError> {
        if self.role_of(failed)? != NodeRole::Systematic {
            return Err(CodeError::NotSystematic(failed));
        }
        Ok((1..=self.n).filter(|&id| id != failed).map(|id| (id, failed)).collect())
    }

    /// Checks the storage-bandwidth cut-set bound
    /// B <= sum_{i=0}^{k-1} min(alpha, (d - i) * beta). This family meets it
    /// with equality.
    pub fn satisfies_cutset_bound(&self) -> bool {
        let total: usize = (0..self.k).map(|i| self.alpha.min((self.d - i) * self.beta)).sum();
        self.b <= total
    }
}

fn check_epsilon(epsilon: FieldElement) -> Result<(), CodeError> {
    let sq = epsilon.mul(&epsilon).expect("same field");
    if epsilon.is_zero() || sq == epsilon.field().one() {
        return Err(CodeError::EpsilonInvalid(epsilon.value()));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeRole {
    Systematic,
    Parity,
}

/// The alpha symbols one node stores.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeContent {
    node_id: usize,
    role: NodeRole,
    symbols: Vec<FieldElement>,
}

impl NodeContent {
    pub fn new(node_id: usize, role: NodeRole, symbols: Vec<FieldElement>) -> Self {
        Self { node_id, role, symbols }
    }

    pub fn node_id(&self) -> usize {
        self.node_id
    }

    pub fn role(&self) -> NodeRole {
        self.role
    }

    pub fn symbols(&self) -> &[FieldElement] {
        &self.symbols
    }
}

/// One symbol passed to a newcomer during repair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RepairDownload {
    pub source_id: usize,
    /// 1-based index of the stored symbol the survivor passed.
    pub symbol_index: usize,
    pub value: FieldElement,
}

/// A repaired or regenerated node together with what the operation cost.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RepairOutcome {
    pub content: NodeContent,
    pub symbols_downloaded: usize,
}

/// All n generator matrices of one code instance, materialized as dense
/// B x alpha matrices. Node m stores message * G^(m).
#[derive(Clone, Debug)]
pub struct GeneratorSet {
    params: CodeParams,
    psi: Matrix,
    generators: Vec<Matrix>,
}

impl GeneratorSet {
    /// Builds the generator set from a totally nonsingular alpha x (n - k)
    /// matrix psi.
    ///
    /// Systematic node m <= k: G^(m) is the identity on block m, zero
    /// elsewhere. Parity node m > k with column psi^(m): block (i, j) entries
    /// are epsilon * psi^(m) down column j when i = j, and psi_i^(m) * e_j
    /// when i != j.
    pub fn build(params: CodeParams, psi: Matrix) -> Result<Self, CodeError> {
        check_epsilon(params.epsilon)?;
        let (alpha, parity) = (params.alpha, params.n - params.k);
        if psi.rows() != alpha || psi.cols() != parity {
            return Err(CodeError::PsiShape {
                expected_rows: alpha,
                expected_cols: parity,
                rows: psi.rows(),
                cols: psi.cols(),
            });
        }
        if psi.field() != params.field {
            return Err(GfError::FieldMismatch(params.field.modulus(), psi.field().modulus()).into());
        }
        if !cauchy::verify_total_nonsingularity(&psi, alpha.min(parity)) {
            return Err(CodeError::PsiNotTotallyNonsingular);
        }

        let f = params.field;
        let eps = params.epsilon.value();
        let (k, b) = (params.k, params.b);
        let mut generators = Vec::with_capacity(params.n);
        for m in 1..=params.n {
            let mut g = Matrix::zero(f, b, alpha);
            if m <= k {
                let base = (m - 1) * alpha;
                for j in 0..alpha {
                    g.set_raw(base + j, j, 1);
                }
            } else {
                let mc = m - k - 1;
                for block in 0..k {
                    let base = block * alpha;
                    for j in 0..alpha {
                        if block == j {
                            for r in 0..alpha {
                                g.set_raw(base + r, j, f.rmul(eps, psi.get_raw(r, mc)));
                            }
                        } else {
                            g.set_raw(base + j, j, psi.get_raw(block, mc));
                        }
                    }
                }
            }
            generators.push(g);
        }
        Ok(Self { params, psi, generators })
    }

    pub fn params(&self) -> &CodeParams {
        &self.params
    }

    pub fn psi(&self) -> &Matrix {
        &self.psi
    }

    /// Generator matrix of node `node_id` (1-based).
    pub fn generator(&self, node_id: usize) -> &Matrix {
        assert!(node_id >= 1 && node_id <= self.params.n, "node id {node_id} out of range");
        &self.generators[node_id - 1]
    }

    /// Encodes a B-symbol message onto all n nodes.
    pub fn encode(&self, message: &[FieldElement]) -> Result<Vec<NodeContent>, CodeError> {
        let p = &self.params;
        if message.len() != p.b {
            return Err(CodeError::MessageLength { expected: p.b, got: message.len() });
        }
        let mut raw = Vec::with_capacity(p.b);
        for e in message {
            if e.field() != p.field {
                return Err(GfError::FieldMismatch(p.field.modulus(), e.field().modulus()).into());
            }
            raw.push(e.value());
        }
        let mut out = vec![0u16; p.n * p.alpha];
        self.encode_raw(&raw, &mut out);
        Ok((1..=p.n)
            .map(|m| {
                let symbols = out[(m - 1) * p.alpha..m * p.alpha]
                    .iter()
                    .map(|&v| p.field.element(u64::from(v)))
                    .collect();
                NodeContent::new(m, p.role_of(m).expect("id in range"), symbols)
            })
            .collect())
    }

    /// Hot path: encodes one stripe of B raw symbols into n * alpha raw
    /// symbols, node-major. Inputs must already be reduced mod q.
    pub(crate) fn encode_raw(&self, message: &[u16], out: &mut [u16]) {
        let p = &self.params;
        debug_assert_eq!(message.len(), p.b);
        debug_assert_eq!(out.len(), p.n * p.alpha);
        let q = u64::from(p.field.modulus());
        for m in 0..p.n {
            let g = &self.generators[m];
            let mut acc = [0u64; 64];
            let acc = &mut acc[..p.alpha];
            for (r, &uv) in message.iter().enumerate() {
                if uv == 0 {
                    continue;
                }
                let row = g.raw_row(r);
                for (j, &gv) in row.iter().enumerate() {
                    acc[j] += u64::from(uv) * u64::from(gv);
                }
            }
            for (j, &a) in acc.iter().enumerate() {
                out[m * p.alpha + j] = (a % q) as u16;
            }
        }
    }

    fn validate_contact_set(&self, nodes: &[NodeContent]) -> Result<(), CodeError> {
        let p = &self.params;
        if nodes.len() != p.k {
            return Err(CodeError::NodeCount { expected: p.k, got: nodes.len() });
        }
        let mut seen = vec![false; p.n + 1];
        for nc in nodes {
            let role = p.role_of(nc.node_id)?;
            if seen[nc.node_id] {
                return Err(CodeError::DuplicateNode(nc.node_id));
            }
            seen[nc.node_id] = true;
            if nc.role != role {
                return Err(CodeError::BadNodeContent { node: nc.node_id, reason: "role does not match id" });
            }
            if nc.symbols.len() != p.alpha {
                return Err(CodeError::BadNodeContent { node: nc.node_id, reason: "wrong symbol count" });
            }
            for s in &nc.symbols {
                if s.field() != p.field {
                    return Err(GfError::FieldMismatch(p.field.modulus(), s.field().modulus()).into());
                }
            }
        }
        Ok(())
    }

    /// Recovers the message from any k nodes' contents.
    ///
    /// When systematic nodes are present their blocks are read off directly
    /// and only the remaining blocks are solved for; an all-parity contact
    /// set falls back to the full stacked B x B system.
    pub fn reconstruct(&self, nodes: &[NodeContent]) -> Result<Vec<FieldElement>, CodeError> {
        self.validate_contact_set(nodes)?;
        let p = &self.params;
        let has_systematic = nodes.iter().any(|nc| nc.role == NodeRole::Systematic);
        if !has_systematic {
            return self.solve_stacked(nodes);
        }

        let f = p.field;
        let eps = p.epsilon.value();
        let mut blocks: Vec<Option<Vec<u16>>> = vec![None; p.k];
        let mut parity: Vec<&NodeContent> = Vec::new();
        for nc in nodes {
            match nc.role {
                NodeRole::Systematic => {
                    blocks[nc.node_id - 1] = Some(nc.symbols.iter().map(|e| e.value()).collect());
                }
                NodeRole::Parity => parity.push(nc),
            }
        }
        parity.sort_by_key(|nc| nc.node_id);
        let unknown: Vec<usize> = (0..p.k).filter(|&i| blocks[i].is_none()).collect();
        debug_assert_eq!(unknown.len(), parity.len());

        if !unknown.is_empty() {
            let dim = unknown.len() * p.alpha;
            let pos = |block: usize| unknown.iter().position(|&u| u == block).expect("unknown block");
            let mut system = Matrix::zero(f, dim, dim);
            let mut rhs = Vec::with_capacity(dim);
            for (pi, nc) in parity.iter().enumerate() {
                let mc = nc.node_id - p.k - 1;
                for j in 0..p.alpha {
                    let row = pi * p.alpha + j;
                    let mut r = nc.symbols[j].value();
                    for i in 0..p.k {
                        let psi_i = self.psi.get_raw(i, mc);
                        match &blocks[i] {
                            Some(known) => {
                                // subtract this block's contribution to symbol j
                                if i == j {
                                    for (t, &uv) in known.iter().enumerate() {
                                        let coef = f.rmul(eps, self.psi.get_raw(t, mc));
                                        r = f.rsub(r, f.rmul(coef, uv));
                                    }
                                } else {
                                    r = f.rsub(r, f.rmul(psi_i, known[j]));
                                }
                            }
                            None => {
                                let bp = pos(i);
                                if i == j {
                                    for t in 0..p.alpha {
                                        let coef = f.rmul(eps, self.psi.get_raw(t, mc));
                                        system.set_raw(row, bp * p.alpha + t, coef);
                                    }
                                } else {
                                    let cur = system.get_raw(row, bp * p.alpha + j);
                                    system.set_raw(row, bp * p.alpha + j, f.radd(cur, psi_i));
                                }
                            }
                        }
                    }
                    rhs.push(f.element(u64::from(r)));
                }
            }
            let solution = system.solve(&rhs)?;
            for (bp, &block) in unknown.iter().enumerate() {
                blocks[block] = Some(
                    solution[bp * p.alpha..(bp + 1) * p.alpha].iter().map(|e| e.value()).collect(),
                );
            }
        }

        Ok(blocks
            .into_iter()
            .flat_map(|b| b.expect("all blocks resolved"))
            .map(|v| f.element(u64::from(v)))
            .collect())
    }

    /// The direct route: stack every downloaded symbol's generator column
    /// into one B x B system and solve it.
    fn solve_stacked(&self, nodes: &[NodeContent]) -> Result<Vec<FieldElement>, CodeError> {
        let p = &self.params;
        let mut system = Matrix::zero(p.field, p.b, p.b);
        let mut rhs = Vec::with_capacity(p.b);
        let mut ordered: Vec<&NodeContent> = nodes.iter().collect();
        ordered.sort_by_key(|nc| nc.node_id);
        for (ni, nc) in ordered.iter().enumerate() {
            let g = self.generator(nc.node_id);
            for j in 0..p.alpha {
                let row = ni * p.alpha + j;
                for r in 0..p.b {
                    system.set_raw(row, r, g.get_raw(r, j));
                }
                rhs.push(nc.symbols[j]);
            }
        }
        Ok(system.solve(&rhs)?)
    }

    /// Exact repair of a failed systematic node from one symbol per survivor.
    ///
    /// Each parity symbol, after the survivors' systematic symbols cancel the
    /// interference terms, is the epsilon-scaled inner product of its psi
    /// column with the lost block; inverting epsilon * psi^T restores it.
    pub fn repair_systematic(
        &self,
        failed: usize,
        downloads: &[RepairDownload],
    ) -> Result<NodeContent, CodeError> {
        let p = &self.params;
        let plan = p.repair_plan(failed)?;
        if downloads.len() != p.d {
            return Err(CodeError::NodeCount { expected: p.d, got: downloads.len() });
        }
        let mut by_source: BTreeMap<usize, FieldElement> = BTreeMap::new();
        for dl in downloads {
            let Some(&want_index) = plan.get(&dl.source_id) else {
                return Err(CodeError::PlanMismatch {
                    node: dl.source_id,
                    reason: "not a surviving node for this repair",
                });
            };
            if dl.symbol_index != want_index {
                return Err(CodeError::PlanMismatch {
                    node: dl.source_id,
                    reason: "wrong symbol index passed",
                });
            }
            if dl.value.field() != p.field {
                return Err(GfError::FieldMismatch(p.field.modulus(), dl.value.field().modulus()).into());
            }
            if by_source.insert(dl.source_id, dl.value).is_some() {
                return Err(CodeError::DuplicateNode(dl.source_id));
            }
        }
        debug_assert_eq!(by_source.len(), p.d);

        let f = p.field;
        let eps = p.epsilon.value();
        let mut rhs = Vec::with_capacity(p.n - p.k);
        for m in p.k + 1..=p.n {
            let mc = m - p.k - 1;
            let mut residual = by_source[&m].value();
            for i in 1..=p.k {
                if i == failed {
                    continue;
                }
                let interference = f.rmul(self.psi.get_raw(i - 1, mc), by_source[&i].value());
                residual = f.rsub(residual, interference);
            }
            rhs.push(f.element(u64::from(residual)));
        }

        let mut system = Matrix::zero(f, p.n - p.k, p.alpha);
        for (row, m) in (p.k + 1..=p.n).enumerate() {
            let mc = m - p.k - 1;
            for r in 0..p.alpha {
                system.set_raw(row, r, f.rmul(eps, self.psi.get_raw(r, mc)));
            }
        }
        let symbols = system.solve(&rhs)?;
        Ok(NodeContent::new(failed, NodeRole::Systematic, symbols))
    }

    /// Regenerates a parity node by full reconstruction and re-encoding.
    /// Costs k * alpha downloaded symbols, not the cut-set-optimal d * beta;
    /// the outcome records the actual count.
    pub fn repair_parity(
        &self,
        failed: usize,
        survivors: &[NodeContent],
    ) -> Result<RepairOutcome, CodeError> {
        let p = &self.params;
        if p.role_of(failed)? != NodeRole::Parity {
            return Err(CodeError::NotParity(failed));
        }
        if survivors.iter().any(|nc| nc.node_id == failed) {
            return Err(CodeError::BadNodeContent { node: failed, reason: "failed node among survivors" });
        }
        let message = self.reconstruct(survivors)?;
        let content = self
            .encode(&message)?
            .into_iter()
            .find(|nc| nc.node_id == failed)
            .expect("encode yields every node");
        Ok(RepairOutcome { content, symbols_downloaded: p.k * p.alpha })
    }
}

/// Message decoder for one fixed contact set, with the stacked system
/// inverted once up front. `decode_raw` then costs one B x B mat-vec per
/// stripe.
pub struct Decoder {
    ids: Vec<usize>,
    inverse: Matrix,
    b: usize,
    alpha: usize,
    q: u64,
}

impl Decoder {
    pub fn new(gens: &GeneratorSet, ids: &[usize]) -> Result<Self, CodeError> {
        let p = gens.params();
        if ids.len() != p.k {
            return Err(CodeError::NodeCount { expected: p.k, got: ids.len() });
        }
        let mut ids: Vec<usize> = ids.to_vec();
        ids.sort_unstable();
        for w in ids.windows(2) {
            if w[0] == w[1] {
                return Err(CodeError::DuplicateNode(w[0]));
            }
        }
        let mut system = Matrix::zero(p.field(), p.message_len(), p.message_len());
        for (ni, &id) in ids.iter().enumerate() {
            p.role_of(id)?;
            let g = gens.generator(id);
            for j in 0..p.alpha() {
                let row = ni * p.alpha() + j;
                for r in 0..p.message_len() {
                    system.set_raw(row, r, g.get_raw(r, j));
                }
            }
        }
        let inverse = system.inverse()?;
        Ok(Self {
            ids,
            inverse,
            b: p.message_len(),
            alpha: p.alpha(),
            q: u64::from(p.field().modulus()),
        })
    }

    /// The contact set, ascending; `decode_raw` expects symbols in this order.
    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    /// Decodes one stripe: `symbols` holds alpha raw symbols per contacted
    /// node, concatenated in `ids` order; `out` receives the B message
    /// symbols.
    pub(crate) fn decode_raw(&self, symbols: &[u16], out: &mut [u16]) {
        debug_assert_eq!(symbols.len(), self.ids.len() * self.alpha);
        debug_assert_eq!(out.len(), self.b);
        for r in 0..self.b {
            let row = self.inverse.raw_row(r);
            let mut acc = 0u64;
            for (c, &s) in symbols.iter().enumerate() {
                acc += u64::from(row[c]) * u64::from(s);
            }
            out[r] = (acc % self.q) as u16;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cauchy::InjectiveSequence;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn reference_params() -> CodeParams {
        CodeParams::new(3, None).unwrap()
    }

    /// The F7 reference instance: explicit point sequence, not the canonical
    /// one, so psi = [[5,4,1],[2,5,4],[3,2,5]].
    fn reference_gens() -> GeneratorSet {
        let p = reference_params();
        let seq = InjectiveSequence::from_values(p.field(), &[0, 1, 2], &[4, 5, 6]).unwrap();
        GeneratorSet::build(p, cauchy::cauchy_build(&seq)).unwrap()
    }

    /// Coefficient vectors (over u1..u9) of the nine parity symbols in the
    /// reference instance, one row per stored symbol.
    const PARITY_COEFFS: [[u64; 9]; 9] = [
        // node 4
        [3, 4, 6, 2, 0, 0, 3, 0, 0],
        [0, 5, 0, 3, 4, 6, 0, 3, 0],
        [0, 0, 5, 0, 0, 2, 3, 4, 6],
        // node 5
        [1, 3, 4, 5, 0, 0, 2, 0, 0],
        [0, 4, 0, 1, 3, 4, 0, 2, 0],
        [0, 0, 4, 0, 0, 5, 1, 3, 4],
        // node 6
        [2, 1, 3, 4, 0, 0, 5, 0, 0],
        [0, 1, 0, 2, 1, 3, 0, 5, 0],
        [0, 0, 1, 0, 0, 4, 2, 1, 3],
    ];

    fn random_message(rng: &mut ChaCha8Rng, p: &CodeParams) -> Vec<FieldElement> {
        (0..p.message_len())
            .map(|_| p.field().element(rng.gen_range(0..u64::from(p.field().modulus()))))
            .collect()
    }

    #[test]
    fn parameter_derivation() {
        let p = reference_params();
        assert_eq!(
            (p.k(), p.n(), p.d(), p.alpha(), p.beta(), p.message_len(), p.field().modulus()),
            (3, 6, 5, 3, 1, 9, 7)
        );
        assert_eq!(p.epsilon().value(), 2);

        let p2 = CodeParams::new(2, None).unwrap();
        assert_eq!(
            (p2.k(), p2.n(), p2.d(), p2.alpha(), p2.message_len(), p2.field().modulus()),
            (2, 4, 3, 2, 4, 5)
        );

        let p11 = CodeParams::new(3, Some(11)).unwrap();
        assert_eq!((p11.k(), p11.field().modulus()), (3, 11));
    }

    #[test]
    fn parameter_validation() {
        assert_eq!(CodeParams::new(1, None), Err(CodeError::KTooSmall(1)));
        assert_eq!(CodeParams::new(0, None), Err(CodeError::KTooSmall(0)));
        assert!(matches!(CodeParams::new(3, Some(6)), Err(CodeError::FieldTooSmall { q: 6, .. })));
        assert_eq!(CodeParams::new(3, Some(5)), Err(CodeError::FieldTooSmall { q: 5, min: 6 }));
        assert!(CodeParams::new(4, Some(11)).is_ok());
    }

    #[test]
    fn epsilon_must_not_square_to_one() {
        let p = reference_params();
        let psi = p.canonical_psi().unwrap();
        for bad in [0u64, 1, 6] {
            let r = GeneratorSet::build(p.with_epsilon(bad), psi.clone());
            assert_eq!(r.unwrap_err(), CodeError::EpsilonInvalid(bad as u16));
        }
        // 3^2 = 2 mod 7, fine
        assert!(GeneratorSet::build(p.with_epsilon(3), psi).is_ok());
    }

    #[test]
    fn builder_rejects_bad_psi() {
        let p = reference_params();
        let wrong = Matrix::from_values(p.field(), 2, 3, &[1; 6]).unwrap();
        assert!(matches!(GeneratorSet::build(p, wrong), Err(CodeError::PsiShape { .. })));

        let ones = Matrix::from_values(p.field(), 3, 3, &[1; 9]).unwrap();
        assert_eq!(GeneratorSet::build(p, ones).unwrap_err(), CodeError::PsiNotTotallyNonsingular);

        let zero_entry = Matrix::from_values(p.field(), 3, 3, &[5, 4, 1, 2, 0, 4, 3, 2, 5]).unwrap();
        assert_eq!(
            GeneratorSet::build(p, zero_entry).unwrap_err(),
            CodeError::PsiNotTotallyNonsingular
        );
    }

    #[test]
    fn systematic_generators_are_identity_blocks() {
        let gens = reference_gens();
        let g1 = gens.generator(1);
        for r in 0..9 {
            for c in 0..3 {
                let expect = u16::from(r < 3 && r == c);
                assert_eq!(g1.get_raw(r, c), expect, "G1 at ({r},{c})");
            }
        }
        let g3 = gens.generator(3);
        for r in 0..9 {
            for c in 0..3 {
                let expect = u16::from(r >= 6 && r - 6 == c);
                assert_eq!(g3.get_raw(r, c), expect, "G3 at ({r},{c})");
            }
        }
    }

    #[test]
    fn parity_generator_columns_frozen() {
        let gens = reference_gens();
        for (row_idx, coeffs) in PARITY_COEFFS.iter().enumerate() {
            let node = 4 + row_idx / 3;
            let j = row_idx % 3;
            let g = gens.generator(node);
            let column: Vec<u64> = (0..9).map(|r| u64::from(g.get_raw(r, j))).collect();
            assert_eq!(&column[..], &coeffs[..], "node {node} symbol {}", j + 1);
        }
        // first block of G4 spelled out
        let g4 = gens.generator(4);
        let block1: Vec<u16> = (0..3).flat_map(|r| (0..3).map(move |c| (r, c))).map(|(r, c)| g4.get_raw(r, c)).collect();
        assert_eq!(block1, vec![3, 0, 0, 4, 5, 0, 6, 0, 5]);
    }

    #[test]
    fn encode_matches_frozen_linear_forms() {
        let gens = reference_gens();
        let p = gens.params();
        let f = p.field();
        let mut rng = ChaCha8Rng::seed_from_u64(0x1a_c0de);
        for _ in 0..25 {
            let u = random_message(&mut rng, p);
            let nodes = gens.encode(&u).unwrap();
            for (i, nc) in nodes.iter().enumerate() {
                assert_eq!(nc.node_id(), i + 1);
            }
            // systematic blocks verbatim
            for m in 1..=3 {
                assert_eq!(nodes[m - 1].symbols(), &u[(m - 1) * 3..m * 3]);
                assert_eq!(nodes[m - 1].role(), NodeRole::Systematic);
            }
            // parity symbols against the frozen coefficient grid
            for (row_idx, coeffs) in PARITY_COEFFS.iter().enumerate() {
                let node = 4 + row_idx / 3;
                let j = row_idx % 3;
                let expect = coeffs
                    .iter()
                    .zip(&u)
                    .fold(f.zero(), |acc, (&c, uv)| {
                        acc.add(&f.element(c).mul(uv).unwrap()).unwrap()
                    });
                assert_eq!(nodes[node - 1].symbols()[j], expect, "node {node} symbol {}", j + 1);
            }
        }
    }

    #[test]
    fn encode_edge_cases() {
        let gens = reference_gens();
        let p = gens.params();
        let f = p.field();

        let zeros = vec![f.zero(); 9];
        for nc in gens.encode(&zeros).unwrap() {
            assert!(nc.symbols().iter().all(|s| s.is_zero()));
        }

        // unit-vector probe: node contents equal row 1 of each generator
        let mut e1 = vec![f.zero(); 9];
        e1[0] = f.one();
        let nodes = gens.encode(&e1).unwrap();
        for nc in &nodes {
            let g = gens.generator(nc.node_id());
            let row: Vec<u16> = (0..3).map(|c| g.get_raw(0, c)).collect();
            let got: Vec<u16> = nc.symbols().iter().map(|s| s.value()).collect();
            assert_eq!(got, row, "node {}", nc.node_id());
        }

        assert_eq!(
            gens.encode(&vec![f.zero(); 8]).unwrap_err(),
            CodeError::MessageLength { expected: 9, got: 8 }
        );
    }

    #[test]
    fn reconstruct_from_every_contact_set() {
        for k in [2usize, 3, 4] {
            let p = CodeParams::new(k, None).unwrap();
            let gens = GeneratorSet::build(p, p.canonical_psi().unwrap()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
            let mut ids: Vec<usize> = Vec::new();
            crate::cauchy::for_each_combination(p.n(), p.k(), &mut |c| {
                ids.extend(c.iter().map(|&i| i + 1).chain(std::iter::once(0)));
            });
            for _ in 0..8 {
                let u = random_message(&mut rng, &p);
                let nodes = gens.encode(&u).unwrap();
                for subset in ids.split(|&v| v == 0).filter(|s| !s.is_empty()) {
                    let contact: Vec<NodeContent> =
                        subset.iter().map(|&id| nodes[id - 1].clone()).collect();
                    assert_eq!(gens.reconstruct(&contact).unwrap(), u, "k={k} subset {subset:?}");
                }
            }
        }
    }

    #[test]
    fn reconstruct_orderings_and_direct_read() {
        let gens = reference_gens();
        let p = gens.params();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = random_message(&mut rng, p);
        let nodes = gens.encode(&u).unwrap();

        // all-systematic contact set reads the message off uncoded
        let direct: Vec<NodeContent> = (1..=3).map(|id| nodes[id - 1].clone()).collect();
        assert_eq!(gens.reconstruct(&direct).unwrap(), u);

        // contact order must not matter
        let shuffled: Vec<NodeContent> = [5, 2, 4].iter().map(|&id| nodes[id - 1].clone()).collect();
        assert_eq!(gens.reconstruct(&shuffled).unwrap(), u);
    }

    #[test]
    fn shortcut_and_stacked_paths_agree() {
        let gens = reference_gens();
        let p = gens.params();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let u = random_message(&mut rng, p);
            let nodes = gens.encode(&u).unwrap();
            for subset in [[1usize, 4, 5], [2, 3, 6], [3, 4, 6], [1, 2, 5]] {
                let contact: Vec<NodeContent> =
                    subset.iter().map(|&id| nodes[id - 1].clone()).collect();
                let fast = gens.reconstruct(&contact).unwrap();
                let stacked = gens.solve_stacked(&contact).unwrap();
                assert_eq!(fast, stacked);
                assert_eq!(fast, u);
            }
        }
    }

    #[test]
    fn reconstruct_validation_errors() {
        let gens = reference_gens();
        let p = gens.params();
        let f = p.field();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let u = random_message(&mut rng, p);
        let nodes = gens.encode(&u).unwrap();

        let two: Vec<NodeContent> = nodes[..2].to_vec();
        assert_eq!(gens.reconstruct(&two).unwrap_err(), CodeError::NodeCount { expected: 3, got: 2 });

        let dup = vec![nodes[0].clone(), nodes[0].clone(), nodes[1].clone()];
        assert_eq!(gens.reconstruct(&dup).unwrap_err(), CodeError::DuplicateNode(1));

        let bad_id = vec![
            nodes[0].clone(),
            nodes[1].clone(),
            NodeContent::new(9, NodeRole::Parity, nodes[2].symbols().to_vec()),
        ];
        assert_eq!(gens.reconstruct(&bad_id).unwrap_err(), CodeError::NodeIdRange { id: 9, n: 6 });

        let bad_role = vec![
            nodes[0].clone(),
            nodes[1].clone(),
            NodeContent::new(4, NodeRole::Systematic, nodes[3].symbols().to_vec()),
        ];
        assert_eq!(
            gens.reconstruct(&bad_role).unwrap_err(),
            CodeError::BadNodeContent { node: 4, reason: "role does not match id" }
        );

        let short = vec![
            nodes[0].clone(),
            nodes[1].clone(),
            NodeContent::new(4, NodeRole::Parity, vec![f.zero()]),
        ];
        assert_eq!(
            gens.reconstruct(&short).unwrap_err(),
            CodeError::BadNodeContent { node: 4, reason: "wrong symbol count" }
        );
    }

    #[test]
    fn repair_plan_shape() {
        let p = reference_params();
        let plan = p.repair_plan(3).unwrap();
        assert_eq!(plan.len(), 5);
        assert_eq!(plan.keys().copied().collect::<Vec<_>>(), vec![1, 2, 4, 5, 6]);
        assert!(plan.values().all(|&idx| idx == 3));

        let plan1 = p.repair_plan(1).unwrap();
        assert!(plan1.values().all(|&idx| idx == 1));

        let p2 = CodeParams::new(2, None).unwrap();
        assert_eq!(p2.repair_plan(2).unwrap().len(), 3);

        assert_eq!(p.repair_plan(4).unwrap_err(), CodeError::NotSystematic(4));
        assert!(matches!(p.repair_plan(0), Err(CodeError::NodeIdRange { id: 0, .. })));
    }

    fn downloads_for(
        gens: &GeneratorSet,
        nodes: &[NodeContent],
        failed: usize,
    ) -> Vec<RepairDownload> {
        gens.params()
            .repair_plan(failed)
            .unwrap()
            .into_iter()
            .map(|(source, idx)| RepairDownload {
                source_id: source,
                symbol_index: idx,
                value: nodes[source - 1].symbols()[idx - 1],
            })
            .collect()
    }

    #[test]
    fn repair_restores_exact_content() {
        for k in [2usize, 3, 4] {
            let p = CodeParams::new(k, None).unwrap();
            let gens = GeneratorSet::build(p, p.canonical_psi().unwrap()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(100 + k as u64);
            for _ in 0..10 {
                let u = random_message(&mut rng, &p);
                let nodes = gens.encode(&u).unwrap();
                for failed in 1..=k {
                    let downloads = downloads_for(&gens, &nodes, failed);
                    assert_eq!(downloads.len(), 2 * k - 1);
                    let repaired = gens.repair_systematic(failed, &downloads).unwrap();
                    assert_eq!(&repaired, &nodes[failed - 1], "k={k} failed={failed}");
                }
            }
        }
    }

    #[test]
    fn repair_residuals_isolate_failed_block() {
        // With node 3 failed in the reference instance, cancelling the other
        // systematic blocks must leave epsilon * <psi^(m), block 3> exactly:
        // 2*(5u7+2u8+3u9), 2*(4u7+5u8+2u9), 2*(1u7+4u8+5u9) mod 7.
        let gens = reference_gens();
        let p = gens.params();
        let f = p.field();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let u = random_message(&mut rng, p);
        let nodes = gens.encode(&u).unwrap();
        let downloads = downloads_for(&gens, &nodes, 3);

        let frozen: [[u64; 3]; 3] = [[5, 2, 3], [4, 5, 2], [1, 4, 5]];
        for (mi, coeffs) in frozen.iter().enumerate() {
            let parity_value = downloads.iter().find(|d| d.source_id == 4 + mi).unwrap().value;
            let mut residual = parity_value;
            for sys in 1..=2usize {
                let passed = downloads.iter().find(|d| d.source_id == sys).unwrap().value;
                let psi_i = gens.psi().get(sys - 1, mi);
                residual = residual.sub(&psi_i.mul(&passed).unwrap()).unwrap();
            }
            let expect = coeffs
                .iter()
                .zip(&u[6..9])
                .fold(f.zero(), |acc, (&c, uv)| {
                    acc.add(&f.element(2 * c).mul(uv).unwrap()).unwrap()
                });
            assert_eq!(residual, expect, "parity node {}", 4 + mi);
        }
    }

    #[test]
    fn repair_zero_message_gives_zero_node() {
        let gens = reference_gens();
        let f = gens.params().field();
        let nodes = gens.encode(&vec![f.zero(); 9]).unwrap();
        let repaired = gens.repair_systematic(2, &downloads_for(&gens, &nodes, 2)).unwrap();
        assert!(repaired.symbols().iter().all(|s| s.is_zero()));
    }

    #[test]
    fn repair_rejects_plan_violations() {
        let gens = reference_gens();
        let p = gens.params();
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let u = random_message(&mut rng, p);
        let nodes = gens.encode(&u).unwrap();
        let good = downloads_for(&gens, &nodes, 3);

        assert_eq!(
            gens.repair_systematic(3, &good[..4]).unwrap_err(),
            CodeError::NodeCount { expected: 5, got: 4 }
        );

        let mut wrong_index = good.clone();
        wrong_index[0].symbol_index = 1;
        assert_eq!(
            gens.repair_systematic(3, &wrong_index).unwrap_err(),
            CodeError::PlanMismatch { node: wrong_index[0].source_id, reason: "wrong symbol index passed" }
        );

        let mut from_failed = good.clone();
        from_failed[0].source_id = 3;
        from_failed[0].symbol_index = 3;
        assert_eq!(
            gens.repair_systematic(3, &from_failed).unwrap_err(),
            CodeError::PlanMismatch { node: 3, reason: "not a surviving node for this repair" }
        );

        let mut dup = good.clone();
        dup[1] = dup[0];
        assert_eq!(gens.repair_systematic(3, &dup).unwrap_err(), CodeError::DuplicateNode(dup[0].source_id));

        assert_eq!(gens.repair_systematic(5, &good).unwrap_err(), CodeError::NotSystematic(5));
    }

    #[test]
    fn interference_blocks_have_rank_one() {
        // Stack the d downloaded kernels (one generator column per survivor)
        // and restrict to each intact block: the interference must be
        // confined to a single direction before cancellation.
        for k in [2usize, 3, 4] {
            let p = CodeParams::new(k, None).unwrap();
            let gens = GeneratorSet::build(p, p.canonical_psi().unwrap()).unwrap();
            for failed in 1..=k {
                let mut kernels = Matrix::zero(p.field(), p.d(), p.message_len());
                for (row, survivor) in (1..=p.n()).filter(|&id| id != failed).enumerate() {
                    let g = gens.generator(survivor);
                    for r in 0..p.message_len() {
                        kernels.set_raw(row, r, g.get_raw(r, failed - 1));
                    }
                }
                for block in (1..=k).filter(|&b| b != failed) {
                    let mut restricted = Matrix::zero(p.field(), p.d(), p.alpha());
                    for row in 0..p.d() {
                        for c in 0..p.alpha() {
                            restricted.set_raw(row, c, kernels.get_raw(row, (block - 1) * p.alpha() + c));
                        }
                    }
                    assert_eq!(restricted.rank(), 1, "k={k} failed={failed} block={block}");
                }
            }
        }
    }

    #[test]
    fn parity_fallback_regenerates_and_reports_cost() {
        let gens = reference_gens();
        let p = gens.params();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let u = random_message(&mut rng, p);
        let nodes = gens.encode(&u).unwrap();

        let survivors: Vec<NodeContent> = (1..=3).map(|id| nodes[id - 1].clone()).collect();
        let outcome = gens.repair_parity(5, &survivors).unwrap();
        assert_eq!(&outcome.content, &nodes[4]);
        assert_eq!(outcome.symbols_downloaded, 9);

        assert_eq!(gens.repair_parity(2, &survivors).unwrap_err(), CodeError::NotParity(2));
        let with_failed: Vec<NodeContent> = [1, 2, 5].iter().map(|&id| nodes[id - 1].clone()).collect();
        assert_eq!(
            gens.repair_parity(5, &with_failed).unwrap_err(),
            CodeError::BadNodeContent { node: 5, reason: "failed node among survivors" }
        );
    }

    #[test]
    fn parity_fallback_exhaustive_small_code() {
        let p = CodeParams::new(2, None).unwrap();
        let gens = GeneratorSet::build(p, p.canonical_psi().unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..5 {
            let u = random_message(&mut rng, &p);
            let nodes = gens.encode(&u).unwrap();
            for failed in [3usize, 4] {
                let survivor_ids: Vec<usize> = (1..=4).filter(|&id| id != failed).collect();
                crate::cauchy::for_each_combination(3, 2, &mut |c| {
                    let survivors: Vec<NodeContent> =
                        c.iter().map(|&i| nodes[survivor_ids[i] - 1].clone()).collect();
                    let outcome = gens.repair_parity(failed, &survivors).unwrap();
                    assert_eq!(&outcome.content, &nodes[failed - 1]);
                    assert_eq!(outcome.symbols_downloaded, 4);
                });
            }
        }
    }

    #[test]
    fn cutset_bound_checks() {
        assert!(reference_params().satisfies_cutset_bound());
        assert!(CodeParams::new(2, None).unwrap().satisfies_cutset_bound());
        assert!(CodeParams::new(5, None).unwrap().satisfies_cutset_bound());

        let mut corrupted = reference_params();
        corrupted.b = 10;
        assert!(!corrupted.satisfies_cutset_bound());
    }

    #[test]
    fn decoder_matches_reconstruct() {
        let gens = reference_gens();
        let p = gens.params();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for ids in [[1usize, 2, 3], [2, 3, 4], [4, 5, 6], [1, 4, 6]] {
            let decoder = Decoder::new(&gens, &ids).unwrap();
            for _ in 0..5 {
                let u = random_message(&mut rng, p);
                let nodes = gens.encode(&u).unwrap();
                let mut symbols = Vec::new();
                for &id in decoder.ids() {
                    symbols.extend(nodes[id - 1].symbols().iter().map(|s| s.value()));
                }
                let mut out = vec![0u16; p.message_len()];
                decoder.decode_raw(&symbols, &mut out);
                let got: Vec<FieldElement> =
                    out.iter().map(|&v| p.field().element(u64::from(v))).collect();
                assert_eq!(got, u);
            }
        }
        assert!(matches!(Decoder::new(&gens, &[1, 2]), Err(CodeError::NodeCount { .. })));
        assert!(matches!(Decoder::new(&gens, &[1, 1, 2]), Err(CodeError::DuplicateNode(1))));
    }
}
