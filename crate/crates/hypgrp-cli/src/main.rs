//! Command-line front door for the hypgrp library.
//!
//! Exit codes: 0 on success (including negative query answers), 1 on domain
//! errors and failed certifications, 2 on usage errors.

mod descriptor;
mod table;

use std::fmt;
use std::fs;
use std::io::{self, Read as _};
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use num_bigint::BigUint;

use hypgrp::cayley::{
    build_ball_capped, default_cap, estimate_delta, gromov_product, jklo_probe, mitra_table,
    Ball, DistanceVerdict, ProductVerdict, WordFamily, WordOracle,
};
use hypgrp::distortion::{
    ascending_witnesses, baker_riley_witnesses, distortion_table_exhaustive, replay_ascending,
    replay_baker_riley, witness_lower_bound_table, DistortionTable, InnerLength, Method,
    WitnessCertificate, EXPANSION_BUDGET,
};
use hypgrp::families::{
    ascending_demo, ascending_demo_g1, baker_riley, find_example, registry, thm_endo_pipeline,
};
use hypgrp::gog::{
    landing_verdict, restrict_to, AscendingHnnSpec, ComponentFlags, FreeProdSpec, Landing,
    RayClass, RayDescriptor, Syllable,
};
use hypgrp::smallcanc::Presentation;
use hypgrp::stallings::{ExpressedSubgroup, SubgroupGraph};
use hypgrp::substitution::{log10_biguint, Endomorphism};
use hypgrp::word::{Alphabet, Word};

use descriptor::{CertificateDto, RayDescriptorDto};
use table::{render_svg, ChartSpec, Table};

#[derive(Parser)]
#[command(name = "hypgrp", version, about = "Presentations, normal forms, metric balls, and distortion witnesses")]
struct Cli {
    /// Worker threads for parallel kernels (0 = library default).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the C'(λ) small-cancellation condition of a presentation file.
    CheckSc {
        /// Metric bound as a fraction, e.g. 1/6.
        #[arg(long, default_value = "1/6")]
        lambda: String,
        /// Presentation file (gens:/rel: lines).
        file: String,
    },
    /// Word problem queries against a presentation.
    Word {
        #[command(subcommand)]
        cmd: WordCmd,
    },
    /// Finitely generated subgroups of free groups.
    Subgroup {
        #[command(subcommand)]
        cmd: SubgroupCmd,
    },
    /// Normal forms in HNN extensions and free products.
    Nf {
        #[command(subcommand)]
        cmd: NfCmd,
    },
    /// Classify boundary-ray descriptors.
    Ray {
        #[command(subcommand)]
        cmd: RayCmd,
    },
    /// Test a ray descriptor for membership in Ω (stable-power tails).
    Omega {
        #[command(flatten)]
        ctx: ExtArgs,
        #[command(flatten)]
        ray: RayArgs,
    },
    /// Compose ascending extensions into the two-level presentation.
    Compose {
        /// Base alphabet, comma separated (e.g. a,b).
        #[arg(long)]
        base: String,
        /// Stable-letter rule sets, repeated: "t1:a->ab,b->ba".
        #[arg(long = "endo", required = true)]
        endos: Vec<String>,
        /// Name of the top stable letter.
        #[arg(long, default_value = "s")]
        top: String,
        /// Substitution of the top letter on the stable alphabet.
        #[arg(long)]
        phi_top: String,
        /// Write the inner presentation here.
        #[arg(long)]
        out_h: Option<String>,
        /// Write the composed presentation here.
        #[arg(long)]
        out_g: Option<String>,
    },
    /// Breadth-first metric ball of a context.
    Ball {
        #[command(flatten)]
        ctx: ContextArgs,
        #[arg(long)]
        radius: usize,
        /// Element cap (default from HYPGRP_CAP or built-in).
        #[arg(long)]
        cap: Option<usize>,
        /// Write sphere/ball counts as CSV ("-" for stdout).
        #[arg(long)]
        csv: Option<String>,
        /// Also print a four-point hyperbolicity estimate.
        #[arg(long)]
        delta: bool,
    },
    /// Distance from the identity (or from --from) inside a ball.
    Dist {
        #[command(flatten)]
        ctx: ContextArgs,
        #[arg(long)]
        radius: usize,
        #[arg(long)]
        cap: Option<usize>,
        #[arg(long)]
        from: Option<String>,
        word: String,
    },
    /// Gromov product of two elements at the identity.
    Gromov {
        #[command(flatten)]
        ctx: ContextArgs,
        #[arg(long)]
        radius: usize,
        #[arg(long)]
        cap: Option<usize>,
        u: String,
        v: String,
    },
    /// Proximity profile of a ray: inner separation vs outer products.
    Mitra {
        /// Context label: ascending-demo or ascending-demo-g1.
        #[arg(long, default_value = "ascending-demo")]
        example: String,
        #[command(flatten)]
        ray: RayArgs,
        /// Number of ray truncations to compare.
        #[arg(long, default_value_t = 4)]
        depth: usize,
        /// Outer metric ball radius.
        #[arg(long, default_value_t = 6)]
        radius: usize,
        #[arg(long)]
        cap: Option<usize>,
        #[arg(long)]
        csv: Option<String>,
        #[arg(long)]
        svg: Option<String>,
    },
    /// Boundary-separation evidence for a witness family pair.
    ProbeJklo {
        /// Only baker-riley is wired as a built-in probe.
        #[arg(long, default_value = "baker-riley")]
        example: String,
        #[arg(long, default_value_t = 17)]
        r: usize,
        #[arg(long, default_value_t = 2)]
        l: usize,
        /// Largest family index.
        #[arg(long, default_value_t = 6)]
        n_max: usize,
        /// Dehn-ball radius for quasigeodesic sampling.
        #[arg(long, default_value_t = 3)]
        radius: usize,
        #[arg(long)]
        cap: Option<usize>,
        /// Extra declared hypotheses to record in the report.
        #[arg(long)]
        declare: Vec<String>,
        /// Write the (n, m, bound) grid as CSV.
        #[arg(long)]
        csv: Option<String>,
    },
    /// Exact iterated-substitution lengths.
    Growth {
        /// Alphabet, comma separated.
        #[arg(long)]
        base: String,
        /// Substitution rules, e.g. "a->ab,b->ba".
        #[arg(long)]
        endo: String,
        /// Start word.
        #[arg(long)]
        word: String,
        #[arg(long, default_value_t = 20)]
        n_max: u64,
        #[arg(long)]
        csv: Option<String>,
        #[arg(long)]
        svg: Option<String>,
    },
    /// Distortion tables: exhaustive over a ball, or witness lower bounds.
    Distortion {
        /// Exact profile over a metric ball.
        #[arg(long)]
        exhaustive: bool,
        /// Certified witness-family lower bounds.
        #[arg(long)]
        witness: bool,
        #[command(flatten)]
        ctx: ContextArgs,
        /// Largest witness index.
        #[arg(long, default_value_t = 3)]
        n: usize,
        /// Seed word for ascending-demo witnesses.
        #[arg(long, default_value = "a")]
        seed_word: String,
        /// Subgroup generators (comma separated) for exhaustive mode in a
        /// free context; omitted = the whole group.
        #[arg(long)]
        gens: Option<String>,
        /// Ball radius for exhaustive mode.
        #[arg(long, default_value_t = 5)]
        radius: usize,
        #[arg(long)]
        cap: Option<usize>,
        #[arg(long)]
        csv: Option<String>,
        #[arg(long)]
        svg: Option<String>,
    },
    /// Witness certificates with replayable traces, as JSON.
    Witness {
        /// baker-riley or ascending-demo.
        #[arg(long, default_value = "baker-riley")]
        example: String,
        #[arg(long, default_value_t = 17)]
        r: usize,
        #[arg(long, default_value_t = 2)]
        l: usize,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value = "a")]
        seed_word: String,
        /// Emit JSON (the default and only format).
        #[arg(long)]
        json: bool,
        /// Output path (stdout when omitted).
        #[arg(long)]
        out: Option<String>,
        /// Replay each trace within the expansion budget and record the result.
        #[arg(long)]
        replay: bool,
    },
    /// Built-in presentation registry.
    Example {
        #[command(subcommand)]
        cmd: ExampleCmd,
    },
}

#[derive(Subcommand)]
enum WordCmd {
    /// Decide triviality by Dehn's algorithm (requires C'(1/6)).
    Solve {
        file: String,
        word: String,
        /// Print each replacement step.
        #[arg(long)]
        trace: bool,
    },
}

#[derive(Subcommand)]
enum SubgroupCmd {
    /// Membership, with an expression over the subgroup basis on success.
    Member {
        #[arg(long)]
        alphabet: String,
        /// Generators, comma separated.
        #[arg(long)]
        gens: String,
        word: String,
    },
    /// Intersection of two subgroups: rank and a basis.
    Intersect {
        #[arg(long)]
        alphabet: String,
        #[arg(long)]
        gens: String,
        #[arg(long)]
        other: String,
    },
    /// Malnormality, with a violating pair on failure.
    Malnormal {
        #[arg(long)]
        alphabet: String,
        #[arg(long)]
        gens: String,
    },
}

#[derive(Subcommand)]
enum NfCmd {
    /// Britton normal form t^-p · w · t^q in an ascending extension.
    Britton {
        #[command(flatten)]
        ctx: ExtArgs,
        word: String,
    },
    /// Syllable decomposition in a free product with a stable letter.
    Freeprod {
        #[command(flatten)]
        ctx: ExtArgs,
        word: String,
    },
}

#[derive(Subcommand)]
enum RayCmd {
    /// T-finite / T-infinite classification of a descriptor.
    Classify {
        #[command(flatten)]
        ctx: ExtArgs,
        #[command(flatten)]
        ray: RayArgs,
    },
    /// Landing verdict under explicitly granted component hypotheses.
    Landing {
        #[command(flatten)]
        ctx: ExtArgs,
        #[command(flatten)]
        ray: RayArgs,
        /// Grant a ray CT map on the base component.
        #[arg(long)]
        assume_base_ray_ct: bool,
        /// Grant a ray CT map on the stable component.
        #[arg(long)]
        assume_stable_ray_ct: bool,
    },
}

#[derive(Subcommand)]
enum ExampleCmd {
    /// List the registry.
    List,
    /// Write a registry presentation in the file format.
    Emit {
        label: String,
        #[arg(long, default_value_t = 17)]
        r: usize,
        #[arg(long, default_value_t = 2)]
        l: usize,
        /// Output path (stdout when omitted).
        #[arg(long)]
        out: Option<String>,
    },
}

/// Selects a group context by registry label or presentation file.
#[derive(Args)]
struct ContextArgs {
    /// Built-in label: free2, genus2, baker-riley-{cd,bcd,g},
    /// ascending-demo, ascending-demo-g1.
    #[arg(long, conflicts_with = "file")]
    example: Option<String>,
    /// Presentation file, used as a Dehn context (must be C'(1/6)).
    #[arg(long)]
    file: Option<String>,
    #[arg(long, default_value_t = 17)]
    r: usize,
    #[arg(long, default_value_t = 2)]
    l: usize,
}

impl ContextArgs {
    fn oracle(&self) -> Result<WordOracle, CliError> {
        if let Some(path) = &self.file {
            return Ok(WordOracle::Dehn(Arc::new(load_presentation(path)?)));
        }
        let label = self.example.as_deref().ok_or_else(|| {
            CliError::Usage("a context is required: pass --example or --file".into())
        })?;
        oracle_for(label, self.r, self.l)
    }
}

fn oracle_for(label: &str, r: usize, l: usize) -> Result<WordOracle, CliError> {
    match label {
        "free2" => Ok(WordOracle::Free(Alphabet::new(&["a", "b"])?)),
        "ascending-demo" => Ok(WordOracle::Britton(Arc::new(ascending_demo()))),
        "ascending-demo-g1" => Ok(WordOracle::FreeProd(Arc::new(ascending_demo_g1()))),
        other => match find_example(other) {
            Some(e) => Ok(WordOracle::Dehn(Arc::new((e.build)(r, l)?))),
            None => Err(CliError::Usage(format!(
                "unknown context `{other}`; see `hypgrp example list`"
            ))),
        },
    }
}

/// Selects an extension context (ascending HNN or free product).
#[derive(Args)]
struct ExtArgs {
    /// ascending-demo (britton) or ascending-demo-g1 (free product).
    #[arg(long, conflicts_with_all = ["base", "endo"])]
    example: Option<String>,
    /// Base alphabet for a custom context, comma separated.
    #[arg(long)]
    base: Option<String>,
    /// Substitution rules for the stable letter, e.g. "a->ab,b->ba".
    #[arg(long)]
    endo: Option<String>,
    /// Stable letter name for a custom context.
    #[arg(long, default_value = "t")]
    stable: String,
    /// Treat a custom context as a free product instead of an ascending
    /// extension (the endomorphism becomes optional).
    #[arg(long)]
    freeprod: bool,
}

enum ExtContext {
    Britton(Arc<AscendingHnnSpec>),
    FreeProd(Arc<FreeProdSpec>),
}

impl ExtContext {
    fn full_alphabet(&self) -> &Arc<Alphabet> {
        match self {
            ExtContext::Britton(s) => s.full_alphabet(),
            ExtContext::FreeProd(s) => s.full_alphabet(),
        }
    }

    fn classify(&self, rd: &RayDescriptor) -> hypgrp::Result<RayClass> {
        match self {
            ExtContext::Britton(s) => s.classify_ray(rd),
            ExtContext::FreeProd(s) => s.classify_ray(rd),
        }
    }
}

impl ExtArgs {
    fn resolve(&self) -> Result<ExtContext, CliError> {
        if let Some(label) = &self.example {
            return match label.as_str() {
                "ascending-demo" => Ok(ExtContext::Britton(Arc::new(ascending_demo()))),
                "ascending-demo-g1" => Ok(ExtContext::FreeProd(Arc::new(ascending_demo_g1()))),
                other => Err(CliError::Usage(format!(
                    "unknown extension context `{other}` (expected ascending-demo or ascending-demo-g1)"
                ))),
            };
        }
        let base = self.base.as_deref().ok_or_else(|| {
            CliError::Usage("a context is required: pass --example or --base".into())
        })?;
        let alpha = parse_alphabet(base)?;
        let endo = self
            .endo
            .as_deref()
            .map(|rules| Endomorphism::parse(&alpha, rules))
            .transpose()?;
        if self.freeprod {
            Ok(ExtContext::FreeProd(Arc::new(FreeProdSpec::new(&alpha, &self.stable, endo)?)))
        } else {
            let endo = endo.ok_or_else(|| {
                CliError::Usage("an ascending context needs --endo".into())
            })?;
            Ok(ExtContext::Britton(Arc::new(AscendingHnnSpec::new(endo, &self.stable)?)))
        }
    }
}

/// A ray descriptor: JSON file, or inline tail/prefix flags.
#[derive(Args)]
struct RayArgs {
    /// Descriptor JSON file ("-" for stdin).
    #[arg(long, conflicts_with_all = ["tail", "prefix"])]
    descriptor: Option<String>,
    /// Normal-form prefix word ("1" = empty).
    #[arg(long, default_value = "1")]
    prefix: String,
    /// stable+ | stable- | base-endo:SEED | periodic:PATTERN
    #[arg(long)]
    tail: Option<String>,
}

impl RayArgs {
    fn parse(&self, full: &Arc<Alphabet>) -> Result<RayDescriptor, CliError> {
        let dto = if let Some(path) = &self.descriptor {
            let text = if path == "-" {
                let mut buf = String::new();
                io::stdin().read_to_string(&mut buf)?;
                buf
            } else {
                fs::read_to_string(path)?
            };
            serde_json::from_str::<RayDescriptorDto>(&text)?
        } else {
            let tail = self.tail.as_deref().ok_or_else(|| {
                CliError::Usage("a ray needs --descriptor or --tail".into())
            })?;
            let tail = match tail {
                "stable+" => descriptor::TailDto::StablePlus,
                "stable-" => descriptor::TailDto::StableMinus,
                other => match other.split_once(':') {
                    Some(("base-endo", seed)) => {
                        descriptor::TailDto::BaseEndo { seed: seed.to_string() }
                    }
                    Some(("periodic", pattern)) => {
                        descriptor::TailDto::Periodic { pattern: pattern.to_string() }
                    }
                    _ => {
                        return Err(CliError::Usage(format!(
                            "unrecognized tail `{other}` (stable+, stable-, base-endo:SEED, periodic:PATTERN)"
                        )))
                    }
                },
            };
            RayDescriptorDto { prefix: self.prefix.clone(), tail }
        };
        Ok(dto.to_ray(full)?)
    }
}

enum CliError {
    Lib(hypgrp::Error),
    Io(io::Error),
    Json(serde_json::Error),
    Msg(String),
    Usage(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
            CliError::Json(e) => write!(f, "{e}"),
            CliError::Msg(m) | CliError::Usage(m) => write!(f, "{m}"),
        }
    }
}

impl From<hypgrp::Error> for CliError {
    fn from(e: hypgrp::Error) -> CliError {
        CliError::Lib(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> CliError {
        CliError::Io(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> CliError {
        CliError::Json(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads(cli.threads);
    match run(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

#[cfg(feature = "parallel")]
fn init_threads(n: usize) {
    if n > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

#[cfg(not(feature = "parallel"))]
fn init_threads(n: usize) {
    if n > 1 {
        eprintln!("note: built without the parallel feature; --threads has no effect");
    }
}

fn run(cmd: Cmd) -> Result<u8, CliError> {
    match cmd {
        Cmd::CheckSc { lambda, file } => check_sc(&lambda, &file),
        Cmd::Word { cmd } => match cmd {
            WordCmd::Solve { file, word, trace } => word_solve(&file, &word, trace),
        },
        Cmd::Subgroup { cmd } => subgroup(cmd),
        Cmd::Nf { cmd } => normal_form(cmd),
        Cmd::Ray { cmd } => ray(cmd),
        Cmd::Omega { ctx, ray } => omega(&ctx, &ray),
        Cmd::Compose { base, endos, top, phi_top, out_h, out_g } => {
            compose(&base, &endos, &top, &phi_top, out_h.as_deref(), out_g.as_deref())
        }
        Cmd::Ball { ctx, radius, cap, csv, delta } => {
            ball_cmd(&ctx, radius, cap, csv.as_deref(), delta)
        }
        Cmd::Dist { ctx, radius, cap, from, word } => {
            dist_cmd(&ctx, radius, cap, from.as_deref(), &word)
        }
        Cmd::Gromov { ctx, radius, cap, u, v } => gromov_cmd(&ctx, radius, cap, &u, &v),
        Cmd::Mitra { example, ray, depth, radius, cap, csv, svg } => {
            mitra_cmd(&example, &ray, depth, radius, cap, csv.as_deref(), svg.as_deref())
        }
        Cmd::ProbeJklo { example, r, l, n_max, radius, cap, declare, csv } => {
            probe_jklo(&example, r, l, n_max, radius, cap, &declare, csv.as_deref())
        }
        Cmd::Growth { base, endo, word, n_max, csv, svg } => {
            growth(&base, &endo, &word, n_max, csv.as_deref(), svg.as_deref())
        }
        Cmd::Distortion {
            exhaustive,
            witness,
            ctx,
            n,
            seed_word,
            gens,
            radius,
            cap,
            csv,
            svg,
        } => distortion_cmd(
            exhaustive,
            witness,
            &ctx,
            n,
            &seed_word,
            gens.as_deref(),
            radius,
            cap,
            csv.as_deref(),
            svg.as_deref(),
        ),
        Cmd::Witness { example, r, l, n, seed_word, json: _, out, replay } => {
            witness_cmd(&example, r, l, n, &seed_word, out.as_deref(), replay)
        }
        Cmd::Example { cmd } => example_cmd(cmd),
    }
}

fn load_presentation(path: &str) -> Result<Presentation, CliError> {
    let text = fs::read_to_string(path)?;
    let name = Path::new(path)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("input");
    Ok(Presentation::parse_text(&text, name)?)
}

fn parse_alphabet(spec: &str) -> Result<Arc<Alphabet>, CliError> {
    let names: Vec<&str> = spec.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    Ok(Alphabet::new(&names)?)
}

fn parse_words(alpha: &Arc<Alphabet>, spec: &str) -> Result<Vec<Word>, CliError> {
    spec.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| Word::parse(alpha, s).map_err(CliError::from))
        .collect()
}

fn write_out(path: Option<&str>, content: &str) -> Result<(), CliError> {
    match path {
        Some("-") | None => {
            print!("{content}");
            Ok(())
        }
        Some(p) => Ok(fs::write(p, content)?),
    }
}

fn standard_gens(alpha: &Arc<Alphabet>) -> Vec<Word> {
    (0..alpha.len()).map(|g| Word::letter(alpha, g, true)).collect()
}

fn build_context_ball(oracle: &WordOracle, radius: usize, cap: Option<usize>) -> Result<Ball, CliError> {
    let cap = cap.unwrap_or_else(default_cap);
    Ok(build_ball_capped(oracle, &standard_gens(oracle.alphabet()), radius, cap)?)
}

fn check_sc(lambda: &str, file: &str) -> Result<u8, CliError> {
    let (num, den) = lambda
        .split_once('/')
        .and_then(|(p, q)| Some((p.trim().parse::<u64>().ok()?, q.trim().parse::<u64>().ok()?)))
        .filter(|&(p, q)| p > 0 && q > 0)
        .ok_or_else(|| CliError::Usage(format!("--lambda expects a fraction like 1/6, got `{lambda}`")))?;
    let pres = load_presentation(file)?;
    let report = pres.check_metric(num, den)?;
    if report.holds {
        let ratio = match report.max_ratio {
            Some((p, q)) => format!("max piece ratio {p}/{q}"),
            None => "no pieces".to_string(),
        };
        println!("OK: C'({num}/{den}); {ratio}");
        Ok(0)
    } else {
        let (ridx, witness) = report.violation.expect("violation recorded when not holding");
        println!(
            "FAIL: C'({num}/{den}) violated: piece \"{}\" of length {} in relator {} of length {}",
            witness.piece.format(),
            witness.piece.len(),
            ridx,
            pres.relators()[ridx].len()
        );
        Ok(1)
    }
}

fn word_solve(file: &str, word: &str, trace: bool) -> Result<u8, CliError> {
    let pres = load_presentation(file)?;
    let w = Word::parse(pres.alphabet(), word)?;
    let (reduced, steps) = pres.dehn_reduce(&w)?;
    if trace {
        for s in &steps {
            println!(
                "  at {}: matched {} letters of relator {}{}, inserted {}",
                s.position,
                s.matched_len,
                s.occurrence.relator,
                if s.occurrence.inverted { " (inverted)" } else { "" },
                s.inserted.format()
            );
        }
    }
    if reduced.is_empty() {
        println!("trivial");
    } else {
        println!("nontrivial: {}", reduced.format());
    }
    Ok(0)
}

fn subgroup(cmd: SubgroupCmd) -> Result<u8, CliError> {
    match cmd {
        SubgroupCmd::Member { alphabet, gens, word } => {
            let alpha = parse_alphabet(&alphabet)?;
            let graph = SubgroupGraph::build(&alpha, &parse_words(&alpha, &gens)?)?;
            let w = Word::parse(&alpha, &word)?;
            let witness = graph.contains(&w)?;
            if witness.in_subgroup {
                let expr = witness.expression.expect("expression for members");
                println!("member: {}", expr.format());
            } else {
                println!("not a member");
            }
            Ok(0)
        }
        SubgroupCmd::Intersect { alphabet, gens, other } => {
            let alpha = parse_alphabet(&alphabet)?;
            let g1 = SubgroupGraph::build(&alpha, &parse_words(&alpha, &gens)?)?;
            let g2 = SubgroupGraph::build(&alpha, &parse_words(&alpha, &other)?)?;
            let meet = g1.intersect(&g2)?;
            println!("rank {}", meet.rank());
            for b in meet.basis() {
                println!("  {}", b.format());
            }
            Ok(0)
        }
        SubgroupCmd::Malnormal { alphabet, gens } => {
            let alpha = parse_alphabet(&alphabet)?;
            let graph = SubgroupGraph::build(&alpha, &parse_words(&alpha, &gens)?)?;
            let report = graph.is_malnormal()?;
            if report.malnormal {
                println!("malnormal");
            } else {
                let (h, u) = report.violation.expect("violation for failures");
                println!("not malnormal: h = {}, u = {}", h.format(), u.format());
            }
            Ok(0)
        }
    }
}

fn normal_form(cmd: NfCmd) -> Result<u8, CliError> {
    match cmd {
        NfCmd::Britton { ctx, word } => {
            let spec = match ctx.resolve()? {
                ExtContext::Britton(s) => s,
                ExtContext::FreeProd(_) => {
                    return Err(CliError::Usage(
                        "nf britton needs an ascending context, not a free product".into(),
                    ))
                }
            };
            let w = Word::parse(spec.full_alphabet(), &word)?;
            let el = spec.element(&w)?;
            println!("{}", el.to_word(&spec).format());
            Ok(0)
        }
        NfCmd::Freeprod { ctx, word } => {
            let spec = match ctx.resolve()? {
                ExtContext::FreeProd(s) => s,
                ExtContext::Britton(_) => {
                    return Err(CliError::Usage(
                        "nf freeprod needs a free-product context (--freeprod or ascending-demo-g1)".into(),
                    ))
                }
            };
            let w = Word::parse(spec.full_alphabet(), &word)?;
            let nf = spec.normal_form(&w)?;
            if nf.is_trivial() {
                println!("1");
            } else {
                let stable = spec.full_alphabet().name(spec.stable_gen()).to_string();
                let parts: Vec<String> = nf
                    .syllables()
                    .iter()
                    .map(|s| match s {
                        Syllable::Base(w) => format!("[{}]", w.format()),
                        Syllable::Stable(k) => format!("{stable}^{k}"),
                    })
                    .collect();
                println!("{}", parts.join(" . "));
            }
            Ok(0)
        }
    }
}

fn class_name(class: RayClass) -> &'static str {
    match class {
        RayClass::TFiniteBase => "t-finite (base tail)",
        RayClass::TFiniteStable { positive: true } => "t-finite (stable tail, +)",
        RayClass::TFiniteStable { positive: false } => "t-finite (stable tail, -)",
        RayClass::TInfinite => "t-infinite",
    }
}

fn ray(cmd: RayCmd) -> Result<u8, CliError> {
    match cmd {
        RayCmd::Classify { ctx, ray } => {
            let ext = ctx.resolve()?;
            let rd = ray.parse(ext.full_alphabet())?;
            println!("{}", class_name(ext.classify(&rd)?));
            Ok(0)
        }
        RayCmd::Landing { ctx, ray, assume_base_ray_ct, assume_stable_ray_ct } => {
            let ext = ctx.resolve()?;
            let rd = ray.parse(ext.full_alphabet())?;
            let class = ext.classify(&rd)?;
            let flags = ComponentFlags {
                base_pair_has_ray_ct: assume_base_ray_ct,
                stable_pair_has_ray_ct: assume_stable_ray_ct,
            };
            let verdict = match landing_verdict(class, flags) {
                Landing::Lands => "lands",
                Landing::LandsByHypothesis => "lands-by-hypothesis",
                Landing::Unknown => "unknown",
            };
            println!("{}: {verdict}", class_name(class));
            Ok(0)
        }
    }
}

fn omega(ctx: &ExtArgs, ray: &RayArgs) -> Result<u8, CliError> {
    let spec = match ctx.resolve()? {
        ExtContext::FreeProd(s) => s,
        ExtContext::Britton(_) => {
            return Err(CliError::Usage(
                "omega is defined in the free-product context (ascending-demo-g1 or --freeprod)".into(),
            ))
        }
    };
    let rd = ray.parse(spec.full_alphabet())?;
    if spec.omega_membership(&rd)? {
        println!("in Omega");
    } else {
        println!("not in Omega");
    }
    Ok(0)
}

fn compose(
    base: &str,
    endo_specs: &[String],
    top: &str,
    phi_top: &str,
    out_h: Option<&str>,
    out_g: Option<&str>,
) -> Result<u8, CliError> {
    let alpha = parse_alphabet(base)?;
    let mut endos = Vec::new();
    for spec in endo_specs {
        let (name, rules) = spec.split_once(':').ok_or_else(|| {
            CliError::Usage(format!("--endo expects \"name:rules\", got `{spec}`"))
        })?;
        endos.push((name.trim().to_string(), Endomorphism::parse(&alpha, rules)?));
    }
    let stable_names: Vec<String> = endos.iter().map(|(n, _)| n.clone()).collect();
    let stable_alpha = Alphabet::new(&stable_names)?;
    let phi = Endomorphism::parse(&stable_alpha, phi_top)?;
    let out = thm_endo_pipeline(alpha.len(), endos, top, phi)?;
    println!(
        "H: {} generators, {} relators",
        out.h.alphabet().len(),
        out.h.relators().len()
    );
    println!(
        "G: {} generators, {} relators",
        out.g.alphabet().len(),
        out.g.relators().len()
    );
    println!(
        "G1: free product of [{}] with {top}",
        stable_names.join(" ")
    );
    for v in &out.verified {
        println!("verified: {v}");
    }
    for a in &out.assumed {
        println!("assumed: {a}");
    }
    if let Some(p) = out_h {
        write_out(Some(p), &out.h.to_text())?;
    }
    if let Some(p) = out_g {
        write_out(Some(p), &out.g.to_text())?;
    }
    Ok(0)
}

fn ball_cmd(
    ctx: &ContextArgs,
    radius: usize,
    cap: Option<usize>,
    csv: Option<&str>,
    delta: bool,
) -> Result<u8, CliError> {
    let oracle = ctx.oracle()?;
    let ball = build_context_ball(&oracle, radius, cap)?;
    println!(
        "radius requested {}, achieved {}{}",
        ball.requested_radius(),
        ball.achieved_radius(),
        if ball.is_complete() { "" } else { " (cap hit)" }
    );
    println!("elements {}", ball.len());
    let spheres = ball.sphere_sizes();
    println!(
        "spheres: {}",
        spheres.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" ")
    );
    if delta {
        println!("delta estimate: {}", estimate_delta(&ball)?);
    }
    if let Some(path) = csv {
        let mut t = Table::new(vec!["n", "sphere", "ball"]);
        let mut total = 0usize;
        for (n, s) in spheres.iter().enumerate() {
            total += s;
            t.push(vec![n.to_string(), s.to_string(), total.to_string()]);
        }
        t.write_csv(path)?;
    }
    Ok(0)
}

fn dist_cmd(
    ctx: &ContextArgs,
    radius: usize,
    cap: Option<usize>,
    from: Option<&str>,
    word: &str,
) -> Result<u8, CliError> {
    let oracle = ctx.oracle()?;
    let ball = build_context_ball(&oracle, radius, cap)?;
    let w = Word::parse(oracle.alphabet(), word)?;
    let target = match from {
        Some(u) => Word::parse(oracle.alphabet(), u)?.invert().concat(&w)?,
        None => w,
    };
    match ball.distance(&target)? {
        DistanceVerdict::Exact(d) => println!("distance: {d}"),
        DistanceVerdict::Beyond(r) => println!("distance: > {r}"),
    }
    Ok(0)
}

fn gromov_cmd(
    ctx: &ContextArgs,
    radius: usize,
    cap: Option<usize>,
    u: &str,
    v: &str,
) -> Result<u8, CliError> {
    let oracle = ctx.oracle()?;
    let ball = build_context_ball(&oracle, radius, cap)?;
    let uw = Word::parse(oracle.alphabet(), u)?;
    let vw = Word::parse(oracle.alphabet(), v)?;
    match gromov_product(&ball, &uw, &vw)? {
        ProductVerdict::Exact(h) => println!("gromov product: {h}"),
        ProductVerdict::Unknown(r) => println!("gromov product: unknown (separation beyond {r})"),
    }
    Ok(0)
}

fn mitra_cmd(
    example: &str,
    ray: &RayArgs,
    depth: usize,
    radius: usize,
    cap: Option<usize>,
    csv: Option<&str>,
    svg: Option<&str>,
) -> Result<u8, CliError> {
    let (inner, outer) = match example {
        "ascending-demo" => {
            let spec = Arc::new(ascending_demo());
            (WordOracle::Free(spec.base_alphabet().clone()), WordOracle::Britton(spec))
        }
        "ascending-demo-g1" => {
            let spec = Arc::new(ascending_demo_g1());
            (WordOracle::Free(spec.base_alphabet().clone()), WordOracle::FreeProd(spec))
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown mitra context `{other}` (ascending-demo or ascending-demo-g1)"
            )))
        }
    };
    let rd = ray.parse(outer.alphabet())?;
    let cap = cap.unwrap_or_else(default_cap);
    let t = mitra_table(&inner, &outer, &rd, depth, radius, cap)?;
    println!("points {}, inner pairs out of reach {}", t.points, t.inner_capped);
    for row in &t.rows {
        let eta = row.eta.map(|h| h.to_string()).unwrap_or_else(|| "-".into());
        println!("n={} eta={} pairs={} capped={}", row.n, eta, row.pairs, row.capped);
    }
    println!("monotone: {}", t.is_monotone());
    if let Some(path) = csv {
        let mut table = Table::new(vec!["n", "eta", "pairs", "capped"]);
        for row in &t.rows {
            table.push(vec![
                row.n.to_string(),
                row.eta.map(|h| format!("{:.1}", h.as_f64())).unwrap_or_default(),
                row.pairs.to_string(),
                row.capped.to_string(),
            ]);
        }
        table.write_csv(path)?;
    }
    if let Some(path) = svg {
        let points: Vec<(f64, f64)> = t
            .rows
            .iter()
            .filter_map(|r| r.eta.map(|h| (r.n as f64, h.as_f64())))
            .collect();
        let chart = render_svg(
            &ChartSpec {
                title: "outer proximity vs inner separation",
                x_label: "inner product threshold n",
                y_label: "least outer product",
            },
            &points,
        )
        .map_err(CliError::Msg)?;
        write_out(Some(path), &chart)?;
    }
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn probe_jklo(
    example: &str,
    r: usize,
    l: usize,
    n_max: usize,
    radius: usize,
    cap: Option<usize>,
    declare: &[String],
    csv: Option<&str>,
) -> Result<u8, CliError> {
    if example != "baker-riley" {
        return Err(CliError::Usage(format!(
            "unknown probe `{example}` (only baker-riley is built in)"
        )));
    }
    let fam = baker_riley(r, l)?;
    let outer = Arc::new(fam.g_bcd().clone());
    let alpha = outer.alphabet().clone();
    let g1 = FreeProdSpec::new(fam.g_cd().alphabet(), "b", None)?;

    let words_a: Vec<Word> = (0..=n_max)
        .map(|n| restrict_to(&fam.w_outer(n), &alpha))
        .collect::<hypgrp::Result<_>>()?;
    let logs_a: Vec<f64> = (0..=n_max)
        .map(|n| fam.w_log10_length(n))
        .collect::<hypgrp::Result<_>>()?;
    let seq_a = WordFamily::new("w", words_a, logs_a)?;

    let b = Word::letter(&alpha, alpha.index_of("b").expect("generator b"), true);
    let words_b: Vec<Word> = (0..=n_max).map(|m| b.pow(m as i64)).collect();
    let logs_b: Vec<f64> = (0..=n_max).map(|m| (m as f64).log10()).collect();
    let seq_b = WordFamily::new("b-powers", words_b, logs_b)?;

    let cap = cap.unwrap_or_else(default_cap);
    let report = jklo_probe(&g1, &outer, &seq_a, &seq_b, radius, cap, declare)?;
    print!("{report}");
    if let Some(path) = csv {
        let mut table = Table::new(vec!["n", "m", "bound"]);
        for row in &report.rows {
            table.push(vec![row.n.to_string(), row.m.to_string(), row.bound.to_string()]);
        }
        table.write_csv(path)?;
    }
    Ok(if report.evidence { 0 } else { 1 })
}

fn growth(
    base: &str,
    endo: &str,
    word: &str,
    n_max: u64,
    csv: Option<&str>,
    svg: Option<&str>,
) -> Result<u8, CliError> {
    let alpha = parse_alphabet(base)?;
    let e = Endomorphism::parse(&alpha, endo)?;
    let w = Word::parse(&alpha, word)?;
    if !e.is_positive() || !w.is_positive() {
        return Err(CliError::Msg(
            "growth requires positive data; mixed signs admit cancellation and the \
             matrix count is only an upper bound"
                .into(),
        ));
    }
    let mut table = Table::new(vec!["k", "exact_length", "log10_length"]);
    let mut points = Vec::new();
    for k in 0..=n_max {
        let est = e.length_of_iterate(&w, k);
        debug_assert!(est.exact);
        let lg = log10_biguint(&est.value);
        let lg_cell = if lg.is_finite() { format!("{lg:.6}") } else { String::new() };
        table.push(vec![k.to_string(), est.value.to_string(), lg_cell]);
        if lg.is_finite() {
            points.push((k as f64, lg));
        }
    }
    match csv {
        Some(path) => table.write_csv(path)?,
        None => print!("{}", table.to_csv()),
    }
    if let Some(path) = svg {
        let chart = render_svg(
            &ChartSpec {
                title: "iterated substitution growth",
                x_label: "iterations k",
                y_label: "log10 length",
            },
            &points,
        )
        .map_err(CliError::Msg)?;
        write_out(Some(path), &chart)?;
    }
    Ok(0)
}

fn distortion_rows_csv(rows: &[(usize, usize, InnerLength)]) -> Table {
    let mut table = Table::new(vec!["n", "outer_len", "inner_len_decimal", "log10_inner"]);
    for (n, outer_len, inner) in rows {
        let decimal = inner.exact().map(BigUint::to_string).unwrap_or_default();
        let lg = inner.log10();
        let lg_cell = if lg.is_finite() { format!("{lg:.6}") } else { String::new() };
        table.push(vec![n.to_string(), outer_len.to_string(), decimal, lg_cell]);
    }
    table
}

#[allow(clippy::too_many_arguments)]
fn distortion_cmd(
    exhaustive: bool,
    witness: bool,
    ctx: &ContextArgs,
    n: usize,
    seed_word: &str,
    gens: Option<&str>,
    radius: usize,
    cap: Option<usize>,
    csv: Option<&str>,
    svg: Option<&str>,
) -> Result<u8, CliError> {
    if exhaustive == witness {
        return Err(CliError::Usage("pass exactly one of --exhaustive or --witness".into()));
    }
    let rows: Vec<(usize, usize, InnerLength)>;
    let table: DistortionTable;
    if witness {
        let certs = witness_certs(ctx, n, seed_word)?;
        rows = certs.iter().map(|c| (c.index, c.outer_len, c.inner.clone())).collect();
        table = witness_lower_bound_table(&certs);
    } else {
        let oracle = ctx.oracle()?;
        let ball = build_context_ball(&oracle, radius, cap)?;
        let depth = ball.achieved_radius();
        if depth < radius {
            println!("note: cap reached, table truncated at radius {depth}");
        }
        table = match (&oracle, gens) {
            (WordOracle::Free(alpha), Some(gens_spec)) => {
                let gens = parse_words(alpha, gens_spec)?;
                let names: Vec<String> = (1..=gens.len()).map(|i| format!("x{i}")).collect();
                let target = Alphabet::new(&names)?;
                let sub = ExpressedSubgroup::new(alpha, &gens, &target)?;
                distortion_table_exhaustive(&ball, |w| Ok(sub.express(w)?.map(|e| e.len())), depth)?
            }
            (WordOracle::Britton(spec), None) => {
                let stable = spec.stable_gen();
                let spec = spec.clone();
                distortion_table_exhaustive(
                    &ball,
                    move |w| {
                        let nf = spec.element(w)?.to_word(&spec);
                        if nf.letters().iter().any(|l| l.generator() == stable) {
                            Ok(None)
                        } else {
                            Ok(Some(nf.len()))
                        }
                    },
                    depth,
                )?
            }
            (_, None) => distortion_table_exhaustive(&ball, |w| Ok(Some(w.len())), depth)?,
            (_, Some(_)) => {
                return Err(CliError::Usage(
                    "--gens needs a free context; other contexts use their built-in subgroup".into(),
                ))
            }
        };
        rows = table
            .rows
            .iter()
            .map(|r| (r.outer, r.outer, r.inner.clone()))
            .collect();
    }
    println!(
        "method: {}",
        match table.method {
            Method::Exhaustive => "exhaustive",
            Method::WitnessLowerBound => "witness-lower-bound",
        }
    );
    println!("rows: {}", rows.len());
    println!("monotone: {}", table.is_monotone());
    if let Some((n, outer_len, inner)) = rows.last() {
        println!("last row: n={n} outer={outer_len} inner={inner}");
    }
    if let Some(path) = csv {
        distortion_rows_csv(&rows).write_csv(path)?;
    }
    if let Some(path) = svg {
        let points: Vec<(f64, f64)> = rows
            .iter()
            .map(|(n, _, inner)| (*n as f64, inner.log10()))
            .filter(|(_, y)| y.is_finite())
            .collect();
        let chart = render_svg(
            &ChartSpec {
                title: "distortion profile",
                x_label: "n",
                y_label: "log10 inner length",
            },
            &points,
        )
        .map_err(CliError::Msg)?;
        write_out(Some(path), &chart)?;
    }
    Ok(0)
}

fn witness_certs(
    ctx: &ContextArgs,
    n: usize,
    seed_word: &str,
) -> Result<Vec<WitnessCertificate>, CliError> {
    match ctx.example.as_deref() {
        Some("baker-riley") | Some("baker-riley-g") => {
            Ok(baker_riley_witnesses(ctx.r, ctx.l, n)?)
        }
        Some("ascending-demo") => {
            let spec = ascending_demo();
            let seed = Word::parse(spec.base_alphabet(), seed_word)?;
            Ok(ascending_witnesses(&spec, &seed, n)?)
        }
        other => Err(CliError::Usage(format!(
            "witness families exist for baker-riley and ascending-demo, got `{}`",
            other.unwrap_or("nothing")
        ))),
    }
}

fn witness_cmd(
    example: &str,
    r: usize,
    l: usize,
    n: usize,
    seed_word: &str,
    out: Option<&str>,
    replay: bool,
) -> Result<u8, CliError> {
    let ctx = ContextArgs { example: Some(example.to_string()), file: None, r, l };
    let certs = witness_certs(&ctx, n, seed_word)?;
    let mut dtos: Vec<CertificateDto> = certs.iter().map(CertificateDto::from_cert).collect();
    if replay {
        for (cert, dto) in certs.iter().zip(&mut dtos) {
            let replayed = match example {
                "baker-riley" | "baker-riley-g" => {
                    let fam = baker_riley(r, l)?;
                    replay_baker_riley(cert, &fam, EXPANSION_BUDGET)?
                }
                _ => {
                    let spec = ascending_demo();
                    replay_ascending(cert, &spec, EXPANSION_BUDGET)?
                }
            };
            dto.replay = Some(match replayed {
                Some(w) => {
                    let agrees = cert
                        .inner
                        .exact()
                        .map(|v| *v == BigUint::from(w.len()))
                        .unwrap_or(false);
                    if !agrees {
                        return Err(CliError::Msg(format!(
                            "replay of witness {} disagrees with its certified length",
                            cert.index
                        )));
                    }
                    format!("verified: inner length {}", w.len())
                }
                None => "over-budget".to_string(),
            });
        }
    }
    let json = serde_json::to_string_pretty(&dtos)?;
    write_out(out, &format!("{json}\n"))?;
    Ok(0)
}

fn example_cmd(cmd: ExampleCmd) -> Result<u8, CliError> {
    match cmd {
        ExampleCmd::List => {
            for e in registry() {
                println!("{:<18} {}", e.label, e.summary);
            }
            Ok(0)
        }
        ExampleCmd::Emit { label, r, l, out } => {
            let entry = find_example(&label).ok_or_else(|| {
                CliError::Usage(format!("unknown example `{label}`; see `hypgrp example list`"))
            })?;
            let pres = (entry.build)(r, l)?;
            write_out(out.as_deref(), &pres.to_text())?;
            Ok(0)
        }
    }
}
