//! File-backed node cluster: byte payload ingestion, per-node shard files
//! with a fixed binary format, a plain-text manifest, and the repair and
//! reconstruction pipelines over whole files.
//!
//! Every stripe of B message symbols is an independent codeword. Secure
//! clusters draw the random padding fresh per stripe; reusing padding
//! across stripes would void the secrecy guarantee.

use crate::cauchy::{cauchy_build, CauchyError, InjectiveSequence};
use crate::code::{CodeError, CodeParams, Decoder, GeneratorSet, NodeContent, NodeRole};
use crate::gf::{GfError, Matrix};
use crate::secrecy::{secrecy_capacity, EveModel, SecrecyError, SecureLayout};
use rand::Rng;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use thiserror::Error;

const NODE_MAGIC: &[u8; 6] = b"IAMSR1";
const FORMAT_VERSION: u8 = 1;
const NODE_HEADER_LEN: usize = 14;
/// Manifest file name inside a cluster directory.
pub const MANIFEST_FILE: &str = "manifest.txt";

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("i/o failure: {0}")]
    Io(#[from] io::Error),
    #[error("not a node file (bad magic bytes)")]
    BadMagic,
    #[error("unsupported format version {0}")]
    BadVersion(u8),
    #[error("unknown role byte {0}")]
    BadRole(u8),
    #[error("node file is {got} bytes, header promises {expected}")]
    NodeLength { expected: u64, got: u64 },
    #[error("symbol {value} at offset {offset} is not a residue mod {q}")]
    SymbolOutOfRange { offset: usize, value: u16, q: u16 },
    #[error("byte ingestion needs q >= 257, field has q = {0}")]
    QTooSmall(u16),
    #[error("manifest line {0:?} is not key=value")]
    ManifestLine(String),
    #[error("manifest key {0} is missing")]
    MissingKey(&'static str),
    #[error("manifest key {0} is not recognized")]
    UnknownKey(String),
    #[error("manifest value {value:?} for {key} does not parse")]
    BadValue { key: &'static str, value: String },
    #[error("manifest is inconsistent: {0}")]
    ManifestMismatch(&'static str),
    #[error("node {node} file does not match the manifest: {reason}")]
    NodeMismatch { node: usize, reason: &'static str },
    #[error("node {0} content does not match its manifest checksum")]
    ChecksumMismatch(usize),
    #[error("node {0} file is missing")]
    MissingNode(usize),
    #[error("stripe {stripe} out of range, cluster has {stripes}")]
    StripeOutOfRange { stripe: usize, stripes: usize },
    #[error("symbol {value} at position {offset} does not fit in one byte")]
    NotAByte { offset: usize, value: u16 },
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    Secrecy(#[from] SecrecyError),
    #[error(transparent)]
    Cauchy(#[from] CauchyError),
    #[error(transparent)]
    Gf(#[from] GfError),
}

/// Whether stripes carry raw message symbols or coset-coded secrets behind
/// random padding sized for an (l1, l2) eavesdropper.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StorageMode {
    Plain,
    Secure { l1: usize, l2: usize },
}

/// Everything needed to reopen a cluster: the code instance, the storage
/// mode, stripe bookkeeping, and a checksum per node file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterManifest {
    pub version: u8,
    pub k: usize,
    pub n: usize,
    pub d: usize,
    pub alpha: usize,
    pub beta: usize,
    pub q: u16,
    pub epsilon: u16,
    pub psi_xs: Vec<u16>,
    pub psi_ys: Vec<u16>,
    pub mode: StorageMode,
    pub stripes: u32,
    pub payload_len: u64,
    pub checksums: BTreeMap<usize, String>,
}

fn join_list(values: &[u16]) -> String {
    values.iter().map(u16::to_string).collect::<Vec<_>>().join(",")
}

fn take_value(
    map: &mut BTreeMap<String, String>,
    key: &'static str,
) -> Result<String, ClusterError> {
    map.remove(key).ok_or(ClusterError::MissingKey(key))
}

fn parse_value<T: std::str::FromStr>(key: &'static str, value: &str) -> Result<T, ClusterError> {
    value.parse().map_err(|_| ClusterError::BadValue { key, value: value.to_string() })
}

fn parse_list(key: &'static str, value: &str) -> Result<Vec<u16>, ClusterError> {
    value.split(',').map(|tok| parse_value(key, tok)).collect()
}

impl ClusterManifest {
    /// Payload symbols per stripe: B in plain mode, B^(s) in secure mode.
    pub fn stripe_symbols(&self) -> usize {
        match self.mode {
            StorageMode::Plain => self.k * self.alpha,
            StorageMode::Secure { l1, l2 } => {
                self.k.saturating_sub(l1 + l2) * self.alpha.saturating_sub(l2)
            }
        }
    }

    /// Rebuilds the code parameters, rejecting any manifest whose recorded
    /// values could not have come from a valid instance.
    pub fn validate(&self) -> Result<CodeParams, ClusterError> {
        if self.version != FORMAT_VERSION {
            return Err(ClusterError::BadVersion(self.version));
        }
        let params = CodeParams::new(self.k, Some(self.q))?.with_epsilon(u64::from(self.epsilon));
        if (self.n, self.d, self.alpha, self.beta)
            != (params.n(), params.d(), params.alpha(), params.beta())
        {
            return Err(ClusterError::ManifestMismatch("derived parameters disagree with k"));
        }
        if let StorageMode::Secure { l1, l2 } = self.mode {
            if l1 + l2 >= self.k {
                return Err(ClusterError::ManifestMismatch("tap counts meet or exceed k"));
            }
        }
        if u64::from(self.stripes) * (self.stripe_symbols() as u64) < self.payload_len {
            return Err(ClusterError::ManifestMismatch(
                "stripes cannot hold the recorded payload length",
            ));
        }
        if self.checksums.len() != self.n
            || !self.checksums.keys().copied().eq(1..=self.n)
        {
            return Err(ClusterError::ManifestMismatch("checksum entries do not cover the nodes"));
        }
        Ok(params)
    }

    /// Flat key=value lines, keys sorted, one per line.
    pub fn to_text(&self) -> String {
        let mut kv: BTreeMap<String, String> = BTreeMap::new();
        kv.insert("version".into(), self.version.to_string());
        kv.insert("k".into(), self.k.to_string());
        kv.insert("n".into(), self.n.to_string());
        kv.insert("d".into(), self.d.to_string());
        kv.insert("alpha".into(), self.alpha.to_string());
        kv.insert("beta".into(), self.beta.to_string());
        kv.insert("q".into(), self.q.to_string());
        kv.insert("epsilon".into(), self.epsilon.to_string());
        kv.insert("psi_xs".into(), join_list(&self.psi_xs));
        kv.insert("psi_ys".into(), join_list(&self.psi_ys));
        let (mode, l1, l2) = match self.mode {
            StorageMode::Plain => ("plain", 0, 0),
            StorageMode::Secure { l1, l2 } => ("secure", l1, l2),
        };
        kv.insert("mode".into(), mode.to_string());
        kv.insert("l1".into(), l1.to_string());
        kv.insert("l2".into(), l2.to_string());
        kv.insert("stripes".into(), self.stripes.to_string());
        kv.insert("payload_len".into(), self.payload_len.to_string());
        for (&id, sum) in &self.checksums {
            kv.insert(format!("checksum_{id}"), sum.clone());
        }
        let mut out = String::new();
        for (key, value) in kv {
            out.push_str(&key);
            out.push('=');
            out.push_str(&value);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, ClusterError> {
        let mut map: BTreeMap<String, String> = BTreeMap::new();
        for line in text.lines() {
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ClusterError::ManifestLine(line.to_string()));
            };
            if map.insert(key.to_string(), value.to_string()).is_some() {
                return Err(ClusterError::ManifestLine(line.to_string()));
            }
        }
        let version = parse_value("version", &take_value(&mut map, "version")?)?;
        let k = parse_value("k", &take_value(&mut map, "k")?)?;
        let n = parse_value("n", &take_value(&mut map, "n")?)?;
        let d = parse_value("d", &take_value(&mut map, "d")?)?;
        let alpha = parse_value("alpha", &take_value(&mut map, "alpha")?)?;
        let beta = parse_value("beta", &take_value(&mut map, "beta")?)?;
        let q = parse_value("q", &take_value(&mut map, "q")?)?;
        let epsilon = parse_value("epsilon", &take_value(&mut map, "epsilon")?)?;
        let psi_xs = parse_list("psi_xs", &take_value(&mut map, "psi_xs")?)?;
        let psi_ys = parse_list("psi_ys", &take_value(&mut map, "psi_ys")?)?;
        let l1: usize = parse_value("l1", &take_value(&mut map, "l1")?)?;
        let l2: usize = parse_value("l2", &take_value(&mut map, "l2")?)?;
        let mode = match take_value(&mut map, "mode")?.as_str() {
            "plain" => {
                if l1 != 0 || l2 != 0 {
                    return Err(ClusterError::ManifestMismatch(
                        "plain mode with nonzero tap counts",
                    ));
                }
                StorageMode::Plain
            }
            "secure" => StorageMode::Secure { l1, l2 },
            other => {
                return Err(ClusterError::BadValue { key: "mode", value: other.to_string() })
            }
        };
        let stripes = parse_value("stripes", &take_value(&mut map, "stripes")?)?;
        let payload_len = parse_value("payload_len", &take_value(&mut map, "payload_len")?)?;
        let mut checksums = BTreeMap::new();
        for (key, value) in map {
            let Some(id) = key.strip_prefix("checksum_") else {
                return Err(ClusterError::UnknownKey(key));
            };
            let id: usize =
                id.parse().map_err(|_| ClusterError::BadValue { key: "checksum", value: key.clone() })?;
            checksums.insert(id, value);
        }
        Ok(Self {
            version,
            k,
            n,
            d,
            alpha,
            beta,
            q,
            epsilon,
            psi_xs,
            psi_ys,
            mode,
            stripes,
            payload_len,
            checksums,
        })
    }
}

/// One node's shard: its id, role, and stripe_count * alpha stored symbols.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeFile {
    pub node_id: usize,
    pub role: NodeRole,
    pub stripe_count: u32,
    pub symbols: Vec<u16>,
}

/// Serializes a node record: magic, version, id (u16 LE), role byte,
/// stripe count (u32 LE), then 2-byte LE symbols.
pub fn node_file_bytes(node: &NodeFile, q: u16, alpha: usize) -> Result<Vec<u8>, ClusterError> {
    if node.symbols.len() != node.stripe_count as usize * alpha {
        return Err(ClusterError::NodeMismatch {
            node: node.node_id,
            reason: "payload length is not stripe count times alpha",
        });
    }
    let Ok(id) = u16::try_from(node.node_id) else {
        return Err(ClusterError::NodeMismatch {
            node: node.node_id,
            reason: "node id does not fit the on-disk format",
        });
    };
    for (offset, &value) in node.symbols.iter().enumerate() {
        if value >= q {
            return Err(ClusterError::SymbolOutOfRange { offset, value, q });
        }
    }
    let mut out = Vec::with_capacity(NODE_HEADER_LEN + 2 * node.symbols.len());
    out.extend_from_slice(NODE_MAGIC);
    out.push(FORMAT_VERSION);
    out.extend_from_slice(&id.to_le_bytes());
    out.push(match node.role {
        NodeRole::Systematic => 0,
        NodeRole::Parity => 1,
    });
    out.extend_from_slice(&node.stripe_count.to_le_bytes());
    for &value in &node.symbols {
        out.extend_from_slice(&value.to_le_bytes());
    }
    Ok(out)
}

pub fn parse_node_bytes(bytes: &[u8], q: u16, alpha: usize) -> Result<NodeFile, ClusterError> {
    if bytes.len() < NODE_HEADER_LEN {
        return Err(ClusterError::NodeLength {
            expected: NODE_HEADER_LEN as u64,
            got: bytes.len() as u64,
        });
    }
    if &bytes[..6] != NODE_MAGIC {
        return Err(ClusterError::BadMagic);
    }
    if bytes[6] != FORMAT_VERSION {
        return Err(ClusterError::BadVersion(bytes[6]));
    }
    let node_id = usize::from(u16::from_le_bytes([bytes[7], bytes[8]]));
    let role = match bytes[9] {
        0 => NodeRole::Systematic,
        1 => NodeRole::Parity,
        other => return Err(ClusterError::BadRole(other)),
    };
    let stripe_count = u32::from_le_bytes([bytes[10], bytes[11], bytes[12], bytes[13]]);
    let expected = NODE_HEADER_LEN as u64 + stripe_count as u64 * alpha as u64 * 2;
    if bytes.len() as u64 != expected {
        return Err(ClusterError::NodeLength { expected, got: bytes.len() as u64 });
    }
    let mut symbols = Vec::with_capacity(stripe_count as usize * alpha);
    for (offset, pair) in bytes[NODE_HEADER_LEN..].chunks_exact(2).enumerate() {
        let value = u16::from_le_bytes([pair[0], pair[1]]);
        if value >= q {
            return Err(ClusterError::SymbolOutOfRange { offset, value, q });
        }
        symbols.push(value);
    }
    Ok(NodeFile { node_id, role, stripe_count, symbols })
}

/// Writes the record atomically (temp file, then rename) and returns the
/// hex sha256 of the bytes written.
pub fn write_node(
    path: &Path,
    node: &NodeFile,
    q: u16,
    alpha: usize,
) -> Result<String, ClusterError> {
    let bytes = node_file_bytes(node, q, alpha)?;
    atomic_write(path, &bytes)?;
    Ok(hex_sha256(&bytes))
}

pub fn read_node(path: &Path, q: u16, alpha: usize) -> Result<NodeFile, ClusterError> {
    parse_node_bytes(&fs::read(path)?, q, alpha)
}

fn atomic_write(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

fn hex_sha256(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn stripe_payload_symbols(params: &CodeParams, mode: StorageMode) -> Result<usize, ClusterError> {
    match mode {
        StorageMode::Plain => Ok(params.message_len()),
        StorageMode::Secure { l1, l2 } => Ok(secrecy_capacity(params, l1, l2)?),
    }
}

fn chunk_stripes(bytes: &[u8], size: usize) -> Vec<Vec<u16>> {
    bytes
        .chunks(size)
        .map(|chunk| {
            let mut stripe: Vec<u16> = chunk.iter().map(|&b| u16::from(b)).collect();
            stripe.resize(size, 0);
            stripe
        })
        .collect()
}

/// Maps a byte payload onto message stripes, one byte per symbol. The final
/// stripe is zero padded; callers record the true length in the manifest.
pub fn ingest(
    bytes: &[u8],
    params: &CodeParams,
    mode: StorageMode,
) -> Result<Vec<Vec<u16>>, ClusterError> {
    let q = params.field().modulus();
    if q < 257 {
        return Err(ClusterError::QTooSmall(q));
    }
    let size = stripe_payload_symbols(params, mode)?;
    Ok(chunk_stripes(bytes, size))
}

/// Inverse of ingest: flattens the stripes and strips the padding using the
/// payload length recorded in the manifest.
pub fn egest(stripes: &[Vec<u16>], manifest: &ClusterManifest) -> Result<Vec<u8>, ClusterError> {
    let size = manifest.stripe_symbols();
    if stripes.len() as u64 != u64::from(manifest.stripes) {
        return Err(ClusterError::ManifestMismatch("stripe count disagrees with the manifest"));
    }
    if (stripes.len() as u64) * (size as u64) < manifest.payload_len {
        return Err(ClusterError::ManifestMismatch(
            "stripes cannot hold the recorded payload length",
        ));
    }
    if stripes.iter().any(|s| s.len() != size) {
        return Err(ClusterError::ManifestMismatch("stripe has the wrong symbol count"));
    }
    let mut out = Vec::with_capacity(manifest.payload_len as usize);
    'stripes: for (si, stripe) in stripes.iter().enumerate() {
        for (j, &value) in stripe.iter().enumerate() {
            if out.len() as u64 == manifest.payload_len {
                break 'stripes;
            }
            if value > 255 {
                return Err(ClusterError::NotAByte { offset: si * size + j, value });
            }
            out.push(value as u8);
        }
    }
    Ok(out)
}

/// What a repair cost and produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RepairSummary {
    pub node_id: usize,
    pub role: NodeRole,
    /// Symbols pulled from survivors per stripe: d for a systematic node,
    /// k * alpha for the parity fallback.
    pub downloaded_per_stripe: usize,
}

/// An on-disk cluster: one directory holding the manifest and one shard
/// file per node.
pub struct Cluster {
    dir: PathBuf,
    manifest: ClusterManifest,
    gens: GeneratorSet,
}

fn node_file_name(id: usize) -> String {
    format!("node_{id}.bin")
}

impl Cluster {
    /// Encodes a byte payload into a fresh cluster directory, one symbol per
    /// byte (q >= 257). Secure mode draws the per-stripe padding from the
    /// caller's randomness source.
    pub fn create<R: Rng + ?Sized>(
        dir: &Path,
        params: CodeParams,
        seq: &InjectiveSequence,
        mode: StorageMode,
        payload: &[u8],
        rng: &mut R,
    ) -> Result<Self, ClusterError> {
        let stripes = ingest(payload, &params, mode)?;
        Self::create_from_stripes(dir, params, seq, mode, &stripes, payload.len() as u64, rng)
    }

    /// Demo entry for fields too small for byte ingestion: every payload
    /// byte must already be a residue mod q. Round trips return the same
    /// bytes.
    pub fn create_symbolic<R: Rng + ?Sized>(
        dir: &Path,
        params: CodeParams,
        seq: &InjectiveSequence,
        mode: StorageMode,
        payload: &[u8],
        rng: &mut R,
    ) -> Result<Self, ClusterError> {
        let q = params.field().modulus();
        for (offset, &b) in payload.iter().enumerate() {
            if u16::from(b) >= q {
                return Err(ClusterError::SymbolOutOfRange { offset, value: u16::from(b), q });
            }
        }
        let size = stripe_payload_symbols(&params, mode)?;
        let stripes = chunk_stripes(payload, size);
        Self::create_from_stripes(dir, params, seq, mode, &stripes, payload.len() as u64, rng)
    }

    fn create_from_stripes<R: Rng + ?Sized>(
        dir: &Path,
        params: CodeParams,
        seq: &InjectiveSequence,
        mode: StorageMode,
        stripes: &[Vec<u16>],
        payload_len: u64,
        rng: &mut R,
    ) -> Result<Self, ClusterError> {
        let gens = GeneratorSet::build(params, cauchy_build(seq))?;
        let stripe_count = u32::try_from(stripes.len())
            .map_err(|_| ClusterError::ManifestMismatch("payload needs too many stripes"))?;
        let (n, alpha, b) = (params.n(), params.alpha(), params.message_len());
        let q = params.field().modulus();

        let layout = match mode {
            StorageMode::Plain => None,
            StorageMode::Secure { l1, l2 } => {
                let eve = EveModel::from_counts(&params, l1, l2)?;
                Some(SecureLayout::for_eve(&params, &eve)?)
            }
        };
        let mut node_symbols: Vec<Vec<u16>> =
            vec![Vec::with_capacity(stripes.len() * alpha); n];
        let mut message = vec![0u16; b];
        let mut coded = vec![0u16; n * alpha];
        let mut padding = vec![0u16; layout.as_ref().map_or(0, SecureLayout::rand_count)];
        for stripe in stripes {
            match &layout {
                None => message.copy_from_slice(stripe),
                Some(layout) => {
                    for r in padding.iter_mut() {
                        *r = rng.gen_range(0..q);
                    }
                    layout.assemble_raw(&padding, stripe, &mut message);
                }
            }
            gens.encode_raw(&message, &mut coded);
            for m in 0..n {
                node_symbols[m].extend_from_slice(&coded[m * alpha..(m + 1) * alpha]);
            }
        }

        fs::create_dir_all(dir)?;
        let mut checksums = BTreeMap::new();
        for (m, symbols) in node_symbols.into_iter().enumerate() {
            let id = m + 1;
            let node = NodeFile {
                node_id: id,
                role: params.role_of(id)?,
                stripe_count,
                symbols,
            };
            let digest = write_node(&dir.join(node_file_name(id)), &node, q, alpha)?;
            checksums.insert(id, digest);
        }
        let manifest = ClusterManifest {
            version: FORMAT_VERSION,
            k: params.k(),
            n,
            d: params.d(),
            alpha,
            beta: params.beta(),
            q,
            epsilon: params.epsilon().value(),
            psi_xs: seq.xs().iter().map(|e| e.value()).collect(),
            psi_ys: seq.ys().iter().map(|e| e.value()).collect(),
            mode,
            stripes: stripe_count,
            payload_len,
            checksums,
        };
        atomic_write(&dir.join(MANIFEST_FILE), manifest.to_text().as_bytes())?;
        Ok(Self { dir: dir.to_path_buf(), manifest, gens })
    }

    /// Opens an existing cluster, validating the manifest and rebuilding the
    /// generators. Node files are checked lazily, on read.
    pub fn open(dir: &Path) -> Result<Self, ClusterError> {
        let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
        let manifest = ClusterManifest::from_text(&text)?;
        let params = manifest.validate()?;
        let field = params.field();
        let xs: Vec<u64> = manifest.psi_xs.iter().map(|&v| u64::from(v)).collect();
        let ys: Vec<u64> = manifest.psi_ys.iter().map(|&v| u64::from(v)).collect();
        let seq = InjectiveSequence::from_values(field, &xs, &ys)?;
        let gens = GeneratorSet::build(params, cauchy_build(&seq))?;
        Ok(Self { dir: dir.to_path_buf(), manifest, gens })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &ClusterManifest {
        &self.manifest
    }

    pub fn generators(&self) -> &GeneratorSet {
        &self.gens
    }

    /// The secure-mode coset layout recorded by the manifest's tap counts,
    /// or None for a plain cluster.
    pub fn encoding_layout(&self) -> Result<Option<SecureLayout>, ClusterError> {
        match self.manifest.mode {
            StorageMode::Plain => Ok(None),
            StorageMode::Secure { l1, l2 } => {
                let params = self.gens.params();
                let eve = EveModel::from_counts(params, l1, l2)?;
                Ok(Some(SecureLayout::for_eve(params, &eve)?))
            }
        }
    }

    pub fn node_path(&self, id: usize) -> PathBuf {
        self.dir.join(node_file_name(id))
    }

    pub fn surviving_nodes(&self) -> Vec<usize> {
        (1..=self.gens.params().n()).filter(|&id| self.node_path(id).exists()).collect()
    }

    /// Deletes a node's shard file.
    pub fn fail_node(&self, id: usize) -> Result<(), ClusterError> {
        self.gens.params().role_of(id)?;
        match fs::remove_file(self.node_path(id)) {
            Err(e) if e.kind() == io::ErrorKind::NotFound => Err(ClusterError::MissingNode(id)),
            other => Ok(other?),
        }
    }

    /// Reads one shard and verifies it against the manifest: checksum first,
    /// then format, then id, role and stripe count.
    pub fn read_node_checked(&self, id: usize) -> Result<NodeFile, ClusterError> {
        let params = self.gens.params();
        let role = params.role_of(id)?;
        let bytes = match fs::read(self.node_path(id)) {
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(ClusterError::MissingNode(id))
            }
            other => other?,
        };
        match self.manifest.checksums.get(&id) {
            Some(want) if *want == hex_sha256(&bytes) => {}
            Some(_) => return Err(ClusterError::ChecksumMismatch(id)),
            None => return Err(ClusterError::ManifestMismatch("checksum entry missing")),
        }
        let node = parse_node_bytes(&bytes, params.field().modulus(), params.alpha())?;
        if node.node_id != id {
            return Err(ClusterError::NodeMismatch {
                node: id,
                reason: "stored node id disagrees with the file name",
            });
        }
        if node.role != role {
            return Err(ClusterError::NodeMismatch {
                node: id,
                reason: "stored role disagrees with the node id",
            });
        }
        if node.stripe_count != self.manifest.stripes {
            return Err(ClusterError::NodeMismatch {
                node: id,
                reason: "stripe count disagrees with the manifest",
            });
        }
        Ok(node)
    }

    /// Regenerates a lost node from the survivors and rewrites its shard,
    /// which must come back checksum-identical to the original.
    ///
    /// A systematic node costs one symbol per stripe from each of the d
    /// survivors; a parity node falls back to reconstruct and re-encode.
    pub fn repair(&self, failed: usize) -> Result<RepairSummary, ClusterError> {
        let params = *self.gens.params();
        let role = params.role_of(failed)?;
        let field = params.field();
        let q = u64::from(field.modulus());
        let (k, alpha) = (params.k(), params.alpha());
        let stripes = self.manifest.stripes as usize;

        let (symbols, downloaded_per_stripe) = match role {
            NodeRole::Systematic => {
                let plan = params.repair_plan(failed)?;
                let mut sources = Vec::with_capacity(plan.len());
                for (&id, &index) in &plan {
                    sources.push((id, index, self.read_node_checked(id)?));
                }
                // The newcomer solves eps * psi^T restricted to its block;
                // that matrix is stripe independent, so invert it once.
                let psi = self.gens.psi();
                let eps = params.epsilon().value();
                let mut system = Matrix::zero(field, params.n() - k, alpha);
                for mc in 0..params.n() - k {
                    for r in 0..alpha {
                        system.set_raw(mc, r, field.rmul(eps, psi.get_raw(r, mc)));
                    }
                }
                let inverse = system.inverse()?;

                let mut out = Vec::with_capacity(stripes * alpha);
                let mut residual = vec![0u16; params.n() - k];
                for s in 0..stripes {
                    let at = |nf: &NodeFile| nf.symbols[s * alpha + (failed - 1)];
                    for mc in 0..params.n() - k {
                        let mut interference = 0u64;
                        let mut parity_value = 0;
                        for (id, _, nf) in &sources {
                            if *id > k {
                                if *id == k + 1 + mc {
                                    parity_value = at(nf);
                                }
                            } else {
                                interference +=
                                    u64::from(psi.get_raw(id - 1, mc)) * u64::from(at(nf));
                            }
                        }
                        residual[mc] =
                            field.rsub(parity_value, (interference % q) as u16);
                    }
                    for r in 0..alpha {
                        let row = inverse.raw_row(r);
                        let mut acc = 0u64;
                        for (mc, &res) in residual.iter().enumerate() {
                            acc += u64::from(row[mc]) * u64::from(res);
                        }
                        out.push((acc % q) as u16);
                    }
                }
                (out, sources.len())
            }
            NodeRole::Parity => {
                let survivors: Vec<usize> = self
                    .surviving_nodes()
                    .into_iter()
                    .filter(|&id| id != failed)
                    .take(k)
                    .collect();
                let decoder = Decoder::new(&self.gens, &survivors)?;
                let files: Vec<NodeFile> = decoder
                    .ids()
                    .iter()
                    .map(|&id| self.read_node_checked(id))
                    .collect::<Result<_, _>>()?;
                let mut gathered = vec![0u16; k * alpha];
                let mut message = vec![0u16; params.message_len()];
                let mut coded = vec![0u16; params.n() * alpha];
                let mut out = Vec::with_capacity(stripes * alpha);
                for s in 0..stripes {
                    for (ni, nf) in files.iter().enumerate() {
                        gathered[ni * alpha..(ni + 1) * alpha]
                            .copy_from_slice(&nf.symbols[s * alpha..(s + 1) * alpha]);
                    }
                    decoder.decode_raw(&gathered, &mut message);
                    self.gens.encode_raw(&message, &mut coded);
                    out.extend_from_slice(&coded[(failed - 1) * alpha..failed * alpha]);
                }
                (out, k * alpha)
            }
        };

        let node = NodeFile {
            node_id: failed,
            role,
            stripe_count: self.manifest.stripes,
            symbols,
        };
        let bytes = node_file_bytes(&node, field.modulus(), alpha)?;
        if self.manifest.checksums.get(&failed) != Some(&hex_sha256(&bytes)) {
            return Err(ClusterError::ChecksumMismatch(failed));
        }
        atomic_write(&self.node_path(failed), &bytes)?;
        Ok(RepairSummary { node_id: failed, role, downloaded_per_stripe })
    }

    /// Recovers the payload bytes from exactly k named nodes.
    pub fn reconstruct(&self, ids: &[usize]) -> Result<Vec<u8>, ClusterError> {
        let params = *self.gens.params();
        let decoder = Decoder::new(&self.gens, ids)?;
        let files: Vec<NodeFile> = decoder
            .ids()
            .iter()
            .map(|&id| self.read_node_checked(id))
            .collect::<Result<_, _>>()?;
        let alpha = params.alpha();
        let stripes = self.manifest.stripes as usize;
        let layout = self.encoding_layout()?;
        let size = self.manifest.stripe_symbols();
        let mut gathered = vec![0u16; params.k() * alpha];
        let mut message = vec![0u16; params.message_len()];
        let mut payloads = Vec::with_capacity(stripes);
        for s in 0..stripes {
            for (ni, nf) in files.iter().enumerate() {
                gathered[ni * alpha..(ni + 1) * alpha]
                    .copy_from_slice(&nf.symbols[s * alpha..(s + 1) * alpha]);
            }
            decoder.decode_raw(&gathered, &mut message);
            match &layout {
                None => payloads.push(message.clone()),
                Some(layout) => {
                    let mut secret = vec![0u16; size];
                    layout.extract_secret_raw(&message, &mut secret);
                    payloads.push(secret);
                }
            }
        }
        egest(&payloads, &self.manifest)
    }

    /// One stripe's codeword across all n nodes, for eavesdropper analysis.
    pub fn stripe_contents(&self, stripe: usize) -> Result<Vec<NodeContent>, ClusterError> {
        let params = self.gens.params();
        let stripes = self.manifest.stripes as usize;
        if stripe >= stripes {
            return Err(ClusterError::StripeOutOfRange { stripe, stripes });
        }
        let field = params.field();
        let alpha = params.alpha();
        (1..=params.n())
            .map(|id| {
                let nf = self.read_node_checked(id)?;
                let symbols = nf.symbols[stripe * alpha..(stripe + 1) * alpha]
                    .iter()
                    .map(|&v| field.element(u64::from(v)))
                    .collect();
                Ok(NodeContent::new(id, nf.role, symbols))
            })
            .collect()
    }
}
