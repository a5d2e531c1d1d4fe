//! Command line for the secure regenerating-code storage tools: encode a
//! file into an n-node cluster, inject failures, repair, reconstruct, play
//! eavesdropper, and tabulate the bandwidth and secrecy trade-offs.

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use iamsr::analysis;
use iamsr::cauchy::{cauchy_build, cauchy_canonical, InjectiveSequence};
use iamsr::cluster::{Cluster, StorageMode};
use iamsr::code::{CodeParams, GeneratorSet, NodeRole};
use iamsr::secrecy::{
    eavesdrop, observation_matrix_with_layout, observed_symbol_count, random_symbol_count,
    secrecy_capacity, verify_secrecy_exhaustive, verify_secrecy_rank,
    verify_secrecy_rank_with_layout, verify_secrecy_exhaustive_with_layout, EveModel,
    SecureLayout,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "iamsr", version, about = "secure minimum-storage regenerating code tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a payload file into an n = 2k node cluster directory.
    Encode(EncodeArgs),
    /// Recover the payload from exactly k named nodes.
    Reconstruct(ReconstructArgs),
    /// Delete a node's shard file (failure injection).
    Fail(NodeArgs),
    /// Regenerate a failed node from the survivors.
    Repair(NodeArgs),
    /// Record what an (e1, e2) eavesdropper sees on one stripe.
    Eavesdrop(EavesdropArgs),
    /// Check perfect secrecy against an (e1, e2) eavesdropper.
    VerifySecrecy(VerifySecrecyArgs),
    /// Emit trade-off tables as CSV.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Run the built-in golden vectors and the small-field secrecy oracle.
    Selftest,
}

#[derive(Args)]
struct EncodeArgs {
    /// Systematic node count; the cluster gets n = 2k nodes.
    #[arg(long)]
    k: usize,
    /// Field modulus override (prime; defaults to the smallest valid one).
    #[arg(long)]
    q: Option<u16>,
    /// Coset-code the payload behind random padding.
    #[arg(long)]
    secure: bool,
    /// Storage taps the padding must defeat (needs --secure).
    #[arg(long)]
    l1: Option<usize>,
    /// Repair taps the padding must defeat (needs --secure).
    #[arg(long)]
    l2: Option<usize>,
    /// Use the published k = 3, q = 7 demo matrix from xs 0,1,2 and
    /// ys 4,5,6. Payloads are then integer text, not bytes.
    #[arg(long)]
    paper_psi: bool,
    /// Payload file: raw bytes, or whitespace-separated integers when
    /// q < 257.
    #[arg(long)]
    input: PathBuf,
    /// Cluster directory to create.
    #[arg(long)]
    cluster: PathBuf,
    /// Pin the padding randomness for reproducible output.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ReconstructArgs {
    #[arg(long)]
    cluster: PathBuf,
    /// Exactly k node ids, comma separated (e.g. 2,3,4).
    #[arg(long, value_delimiter = ',')]
    nodes: Vec<usize>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct NodeArgs {
    #[arg(long)]
    cluster: PathBuf,
    #[arg(long)]
    node: usize,
}

#[derive(Args)]
struct EavesdropArgs {
    #[arg(long)]
    cluster: PathBuf,
    /// Nodes whose stored symbols leak, comma separated.
    #[arg(long)]
    e1: Option<String>,
    /// Systematic nodes whose repair downloads leak, comma separated.
    #[arg(long)]
    e2: Option<String>,
    /// Stripe to tap.
    #[arg(long, default_value_t = 0)]
    stripe: usize,
    /// Where to write the observed values and the observation matrix.
    #[arg(long)]
    dump: PathBuf,
}

#[derive(Args)]
struct VerifySecrecyArgs {
    #[arg(long)]
    cluster: PathBuf,
    #[arg(long)]
    e1: Option<String>,
    #[arg(long)]
    e2: Option<String>,
    /// Also enumerate every message and compare observation distributions.
    #[arg(long)]
    exhaustive: bool,
    /// State budget for --exhaustive.
    #[arg(long, default_value_t = 1_000_000)]
    max_states: u128,
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// Repair bandwidth comparison for k = 2..kmax.
    Bandwidth {
        #[arg(long)]
        kmax: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Achieved secrecy capacity against the uncoded-repair bound.
    Secrecy {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        l1: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Encode(a) => run_encode(a),
        Command::Reconstruct(a) => run_reconstruct(a),
        Command::Fail(a) => run_fail(a),
        Command::Repair(a) => run_repair(a),
        Command::Eavesdrop(a) => run_eavesdrop(a),
        Command::VerifySecrecy(a) => run_verify_secrecy(a),
        Command::Analyze(a) => run_analyze(a),
        Command::Selftest => run_selftest(),
    }
}

fn parse_ids(arg: Option<&str>) -> Result<Vec<usize>> {
    let Some(s) = arg else { return Ok(Vec::new()) };
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<usize>().with_context(|| format!("bad node id {t:?}")))
        .collect()
}

fn join<T: ToString>(values: impl IntoIterator<Item = T>, sep: &str) -> String {
    values.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(sep)
}

/// The layout the cluster actually encoded with; plain clusters have no
/// padding, so every message symbol counts as secret.
fn effective_layout(cluster: &Cluster) -> Result<SecureLayout> {
    Ok(match cluster.encoding_layout()? {
        Some(layout) => layout,
        None => SecureLayout::all_secret(cluster.generators().params().message_len()),
    })
}

fn run_encode(a: EncodeArgs) -> Result<()> {
    if (a.l1.is_some() || a.l2.is_some()) && !a.secure {
        bail!("--l1/--l2 only make sense with --secure");
    }
    let mode = if a.secure {
        StorageMode::Secure { l1: a.l1.unwrap_or(0), l2: a.l2.unwrap_or(0) }
    } else {
        StorageMode::Plain
    };
    let params = CodeParams::new(a.k, a.q)?;
    let field = params.field();
    let seq = if a.paper_psi {
        if params.k() != 3 || field.modulus() != 7 {
            bail!("--paper-psi is the k = 3, q = 7 demo only");
        }
        InjectiveSequence::from_values(field, &[0, 1, 2], &[4, 5, 6])?
    } else {
        InjectiveSequence::canonical(field, params.k(), params.n() - params.k())?
    };
    let raw = fs::read(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let symbolic = field.modulus() < 257;
    let mut rng = match a.seed {
        Some(seed) => ChaCha8Rng::seed_from_u64(seed),
        None => ChaCha8Rng::from_entropy(),
    };
    let cluster = if symbolic {
        let symbols = parse_symbolic(&raw, field.modulus())?;
        Cluster::create_symbolic(&a.cluster, params, &seq, mode, &symbols, &mut rng)?
    } else {
        Cluster::create(&a.cluster, params, &seq, mode, &raw, &mut rng)?
    };
    let m = cluster.manifest();
    println!(
        "encoded {} {} into {} stripes across {} nodes at {}",
        m.payload_len,
        if symbolic { "symbols" } else { "bytes" },
        m.stripes,
        m.n,
        a.cluster.display()
    );
    Ok(())
}

fn parse_symbolic(raw: &[u8], q: u16) -> Result<Vec<u8>> {
    let text =
        std::str::from_utf8(raw).context("small-field payloads must be integer text")?;
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            let v: u16 = t.parse().with_context(|| format!("bad symbol {t:?}"))?;
            ensure!(v < q, "symbol {v} is not a residue mod {q}");
            Ok(v as u8)
        })
        .collect()
}

fn run_reconstruct(a: ReconstructArgs) -> Result<()> {
    let cluster = Cluster::open(&a.cluster)?;
    let payload = cluster.reconstruct(&a.nodes)?;
    let nodes = join(&a.nodes, ",");
    if cluster.manifest().q < 257 {
        let mut text = join(&payload, " ");
        text.push('\n');
        fs::write(&a.output, text)?;
        println!(
            "recovered {} symbols from nodes {} into {}",
            payload.len(),
            nodes,
            a.output.display()
        );
    } else {
        fs::write(&a.output, &payload)?;
        println!(
            "recovered {} bytes from nodes {} into {}",
            payload.len(),
            nodes,
            a.output.display()
        );
    }
    Ok(())
}

fn run_fail(a: NodeArgs) -> Result<()> {
    let cluster = Cluster::open(&a.cluster)?;
    cluster.fail_node(a.node)?;
    println!("removed node {} shard {}", a.node, cluster.node_path(a.node).display());
    Ok(())
}

fn run_repair(a: NodeArgs) -> Result<()> {
    let cluster = Cluster::open(&a.cluster)?;
    let summary = cluster.repair(a.node)?;
    match summary.role {
        NodeRole::Systematic => println!(
            "repaired systematic node {}: downloaded {} symbols/stripe",
            summary.node_id, summary.downloaded_per_stripe
        ),
        NodeRole::Parity => println!(
            "repaired parity node {}: downloaded {} symbols/stripe (suboptimal fallback)",
            summary.node_id, summary.downloaded_per_stripe
        ),
    }
    Ok(())
}

fn run_eavesdrop(a: EavesdropArgs) -> Result<()> {
    let cluster = Cluster::open(&a.cluster)?;
    let gens = cluster.generators();
    let eve = EveModel::new(gens.params(), parse_ids(a.e1.as_deref())?, parse_ids(a.e2.as_deref())?)?;
    let contents = cluster.stripe_contents(a.stripe)?;
    let values = eavesdrop(gens, &eve, &contents)?;
    let layout = effective_layout(&cluster)?;
    let obs = observation_matrix_with_layout(gens, &eve, &layout)?;

    let mut text = String::new();
    writeln!(text, "stripe={}", a.stripe)?;
    writeln!(text, "e1={}", join(eve.e1(), ","))?;
    writeln!(text, "e2={}", join(eve.e2(), ","))?;
    writeln!(text, "values={}", join(values.iter().map(|v| v.value()), ","))?;
    writeln!(text, "raw_rows={}", obs.raw_row_count())?;
    writeln!(text, "rows={}", obs.row_count())?;
    writeln!(text, "cols={}", obs.h().cols())?;
    writeln!(text, "rand_cols={}", obs.rand_cols())?;
    for r in 0..obs.row_count() {
        let row = join((0..obs.h().cols()).map(|c| obs.h().get(r, c).value()), ",");
        writeln!(text, "row_{r}={row}")?;
    }
    fs::write(&a.dump, text)?;
    println!(
        "eavesdropper saw {} symbols ({} distinct observation rows), dump at {}",
        values.len(),
        obs.row_count(),
        a.dump.display()
    );
    Ok(())
}

fn run_verify_secrecy(a: VerifySecrecyArgs) -> Result<()> {
    let cluster = Cluster::open(&a.cluster)?;
    let gens = cluster.generators();
    let eve = EveModel::new(gens.params(), parse_ids(a.e1.as_deref())?, parse_ids(a.e2.as_deref())?)?;
    let layout = effective_layout(&cluster)?;
    let report = verify_secrecy_rank_with_layout(gens, &eve, &layout)?;
    println!("padding symbols (R) = {}", report.rand_count);
    println!("rank(H) = {}", report.rank_full);
    println!("rank(H_r) = {}", report.rank_rand);
    println!("padding spans its columns (step 1) = {}", report.step1);
    println!("no dimensions beyond the padding (step 2) = {}", report.step2);
    println!("leaked dimensions = {}", report.leakage_dims);
    println!("perfect = {}", report.perfect);
    let mut ok = report.perfect;
    if a.exhaustive {
        let same = verify_secrecy_exhaustive_with_layout(gens, &eve, &layout, a.max_states)?;
        println!("exhaustive: identical observation distribution for every secret = {same}");
        ok &= same;
    }
    if !ok {
        bail!("secrecy does not hold for these taps");
    }
    Ok(())
}

fn run_analyze(cmd: AnalyzeCommand) -> Result<()> {
    let (table, out) = match cmd {
        AnalyzeCommand::Bandwidth { kmax, out } => (analysis::bandwidth_table(kmax)?, out),
        AnalyzeCommand::Secrecy { k, l1, out } => (analysis::secrecy_table(k, l1)?, out),
    };
    fs::write(&out, table.to_csv())?;
    println!("wrote {} rows to {}", table.rows.len(), out.display());
    Ok(())
}

fn run_selftest() -> Result<()> {
    demo_vectors().context("demo golden vectors")?;
    println!("demo vectors verified: psi, generator grid, 100 random encodings");
    let checked = exhaustive_oracle().context("small-field exhaustive oracle")?;
    println!("exhaustive secrecy oracle agreed with the rank check on {checked} tap sets");
    println!("selftest passed");
    Ok(())
}

/// The published k = 3, q = 7 instance: the exact psi, the full parity
/// coefficient grid, and numeric encode agreement at random messages.
fn demo_vectors() -> Result<()> {
    let params = CodeParams::new(3, None)?;
    let field = params.field();
    ensure!(field.modulus() == 7, "default field for k = 3 is F_7");
    let seq = InjectiveSequence::from_values(field, &[0, 1, 2], &[4, 5, 6])?;
    let gens = GeneratorSet::build(params, cauchy_build(&seq))?;

    let want_psi = [[5, 4, 1], [2, 5, 4], [3, 2, 5]];
    for (i, row) in want_psi.iter().enumerate() {
        for (j, &want) in row.iter().enumerate() {
            ensure!(gens.psi().get(i, j).value() == want, "psi[{i}][{j}]");
        }
    }

    // coefficient of message symbol r in stored symbol j of parity node m
    const PARITY_COEFFS: [[[u16; 9]; 3]; 3] = [
        [
            [3, 4, 6, 2, 0, 0, 3, 0, 0],
            [0, 5, 0, 3, 4, 6, 0, 3, 0],
            [0, 0, 5, 0, 0, 2, 3, 4, 6],
        ],
        [
            [1, 3, 4, 5, 0, 0, 2, 0, 0],
            [0, 4, 0, 1, 3, 4, 0, 2, 0],
            [0, 0, 4, 0, 0, 5, 1, 3, 4],
        ],
        [
            [2, 1, 3, 4, 0, 0, 5, 0, 0],
            [0, 1, 0, 2, 1, 3, 0, 5, 0],
            [0, 0, 1, 0, 0, 4, 2, 1, 3],
        ],
    ];
    for node in 1..=3usize {
        let g = gens.generator(node);
        for j in 0..3 {
            for r in 0..9 {
                let want = u16::from(r == (node - 1) * 3 + j);
                ensure!(g.get(r, j).value() == want, "systematic node {node} is the identity");
            }
        }
    }
    for (mi, grid) in PARITY_COEFFS.iter().enumerate() {
        let g = gens.generator(4 + mi);
        for (j, coeffs) in grid.iter().enumerate() {
            for (r, &want) in coeffs.iter().enumerate() {
                ensure!(
                    g.get(r, j).value() == want,
                    "parity node {} symbol {} coefficient {}",
                    4 + mi,
                    j + 1,
                    r + 1
                );
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0x5e1f);
    for _ in 0..100 {
        let message: Vec<_> = (0..9)
            .map(|_| field.element(rand::Rng::gen_range(&mut rng, 0..7u64)))
            .collect();
        let nodes = gens.encode(&message)?;
        for (m, node) in nodes.iter().enumerate() {
            let g = gens.generator(m + 1);
            for (j, symbol) in node.symbols().iter().enumerate() {
                let mut acc = field.zero();
                for (r, u) in message.iter().enumerate() {
                    acc = acc.add(&u.mul(&g.get(r, j))?)?;
                }
                ensure!(acc == *symbol, "encoding disagrees with the coefficient grid");
            }
        }
    }

    let eve = EveModel::from_counts(&params, 1, 1)?;
    ensure!(secrecy_capacity(&params, 1, 1)? == 2, "secrecy capacity");
    ensure!(random_symbol_count(&params, 1, 1)? == 7, "padding count");
    ensure!(observed_symbol_count(&params, 1, 1)? == 7, "observation count");
    let report = verify_secrecy_rank(&gens, &eve)?;
    ensure!(report.rank_rand == 7 && report.perfect, "rank report");
    Ok(())
}

/// Every valid tap set of the k = 2, q = 5 instance, where brute force over
/// all messages is feasible, checked against the rank criterion.
fn exhaustive_oracle() -> Result<usize> {
    let params = CodeParams::new(2, None)?;
    ensure!(params.field().modulus() == 5, "default field for k = 2 is F_5");
    let psi = cauchy_canonical(params.field(), 2, 2)?;
    let gens = GeneratorSet::build(params, psi)?;
    let mut checked = 0;
    for e1 in [vec![], vec![1], vec![2], vec![3], vec![4]] {
        for e2 in [vec![], vec![1], vec![2]] {
            let Ok(eve) = EveModel::new(&params, e1.clone(), e2.clone()) else {
                continue;
            };
            let report = verify_secrecy_rank(&gens, &eve)?;
            let same = verify_secrecy_exhaustive(&gens, &eve, 1_000_000)?;
            ensure!(
                report.perfect && same,
                "tap set e1={e1:?} e2={e2:?} must be perfectly secret"
            );
            checked += 1;
        }
    }
    ensure!(checked == 7, "expected 7 valid tap sets, checked {checked}");
    Ok(checked)
}
