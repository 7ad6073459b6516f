mod args;

use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::Parser;
use motifstore::channel::ReadRecord;
use motifstore::config::RunConfig;
use motifstore::decode::{demux_reads, Grouping};
use motifstore::io::{read_pool, read_reads, write_pool, write_reads};
use motifstore::layout::{LayoutMode, PoolManifest};
use motifstore::metrics::{
    error_profile, min_coverage_search, pool_write_costs, population_fraction_change, read_cost, write_cost, CostInputs,
};
use motifstore::motif::count_valid;
use motifstore::pipeline::{encode_input, run_trial, Pool};
use motifstore::prng::SplitMix64;
use serde::Serialize;

use args::*;

/// Failure classes mapped to exit codes.
enum Failure {
    /// Bad flags, files or configuration.
    Usage(anyhow::Error),
    /// The run completed but the data could not be fully recovered.
    Data(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

impl From<motifstore::Error> for Failure {
    fn from(e: motifstore::Error) -> Self {
        Failure::Usage(e.into())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("data error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(anyhow!("--threads must be at least 1").into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("thread pool")?;
    }
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_toml(&read_text(p)?)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    match cli.command {
        Command::Dict { command: DictCommand::Stats(f) } => dict_stats(cfg, &f),
        Command::Encode(a) => encode(cfg, &a),
        Command::Simulate(a) => simulate(cfg, &a),
        Command::RandomAccess(a) => random_access(cfg, &a),
        Command::Decode(a) => decode(cfg, &a),
        Command::Eval { command: EvalCommand::MinCoverage(a) } => min_coverage(cfg, &a),
        Command::Metrics { command } => match command {
            MetricsCommand::FracChange(a) => frac_change(cfg, &a),
            MetricsCommand::Costs(a) => costs(cfg, &a),
            MetricsCommand::ErrorProfile(a) => profile(cfg, &a),
        },
    }
}

fn read_text(p: &Path) -> anyhow::Result<String> {
    fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))
}

#[derive(Serialize)]
struct Sidecar<'a> {
    command: &'a str,
    options: BTreeMap<&'a str, String>,
    config: &'a RunConfig,
}

fn sidecar_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().unwrap_or_default().to_os_string();
    name.push(".config.toml");
    artifact.with_file_name(name)
}

/// Writes `bytes` to `path` and the effective configuration next to it.
fn write_artifact(path: &Path, bytes: &[u8], sidecar: &Sidecar) -> anyhow::Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    let text = toml::to_string(sidecar).context("serializing sidecar")?;
    let side = sidecar_path(path);
    fs::write(&side, text).with_context(|| format!("writing {}", side.display()))
}

/// Writes to `path` with a sidecar, or to stdout.
fn emit(path: Option<&Path>, text: &str, sidecar: &Sidecar) -> anyhow::Result<()> {
    match path {
        Some(p) => write_artifact(p, text.as_bytes(), sidecar),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_manifest(p: &Path) -> anyhow::Result<PoolManifest> {
    PoolManifest::from_toml(&read_text(p)?).with_context(|| format!("parsing manifest {}", p.display()))
}

fn load_pool(manifest: &Path, pool: &Path) -> anyhow::Result<Pool> {
    let manifest = load_manifest(manifest)?;
    let file = fs::File::open(pool).with_context(|| format!("opening {}", pool.display()))?;
    let oligos = read_pool(BufReader::new(file), &manifest).with_context(|| format!("parsing pool {}", pool.display()))?;
    Ok(Pool::from_parts(manifest, oligos)?)
}

fn load_reads(p: &Path) -> anyhow::Result<Vec<ReadRecord>> {
    let file = fs::File::open(p).with_context(|| format!("opening {}", p.display()))?;
    read_reads(BufReader::new(file)).with_context(|| format!("parsing reads {}", p.display()))
}

/// Takes the stored pool settings from the manifest so the sidecar reflects them.
fn adopt_manifest(cfg: &mut RunConfig, m: &PoolManifest) {
    cfg.motif.constraints = m.constraints.clone();
    cfg.motif.bits_per_motif = m.bits_per_motif;
    cfg.ecc = m.ecc.clone();
    cfg.layout = m.layout.clone();
}

fn finalize(mut cfg: RunConfig) -> anyhow::Result<RunConfig> {
    cfg = cfg.effective();
    cfg.validate()?;
    Ok(cfg)
}

fn dict_stats(mut cfg: RunConfig, f: &MotifFlags) -> Outcome {
    f.apply(&mut cfg);
    let c = &cfg.motif.constraints;
    c.validate()?;
    let count = count_valid(c)?;
    let bits = cfg.motif.bits_per_motif;
    let usable = count >= 1u128 << bits;
    println!("motif_len = {}", c.motif_len);
    println!("max_run = {}", c.max_run);
    println!("gc = [{}, {}]", c.gc_min, c.gc_max);
    if let Some(d) = c.max_doublets {
        println!("max_doublets = {d}");
    }
    println!("valid_motifs = {count}");
    println!("capacity_bits = {:.4}", (count as f64).log2());
    println!("bits_per_motif = {bits}");
    println!("density = {:.4}", bits as f64 / c.motif_len as f64);
    println!("fits = {usable}");
    if !usable {
        return Err(anyhow!("{count} valid motifs cannot carry {bits} bits").into());
    }
    Ok(())
}

fn encode(mut cfg: RunConfig, a: &EncodeArgs) -> Outcome {
    a.flags.apply(&mut cfg);
    let cfg = finalize(cfg)?;
    let input = fs::read(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let pool = encode_input(&input, &cfg)?;
    let side = Sidecar { command: "encode", options: BTreeMap::new(), config: &cfg };
    let mut fasta = Vec::new();
    write_pool(&mut fasta, &pool.oligos, &pool.manifest)?;
    write_artifact(&a.pool, &fasta, &side)?;
    write_artifact(&a.manifest, pool.manifest.to_toml()?.as_bytes(), &side)?;
    let g = &pool.manifest.geometry;
    eprintln!(
        "encoded {} bytes into {} oligos of {} nt ({} OBs, {} extents)",
        input.len(),
        g.total_oligo_count,
        g.oligo_len_nt,
        g.ob_count,
        g.oe_count
    );
    Ok(())
}

fn simulate(mut cfg: RunConfig, a: &SimulateArgs) -> Outcome {
    let pool = load_pool(&a.manifest, &a.pool)?;
    adopt_manifest(&mut cfg, &pool.manifest);
    a.channel.apply(&mut cfg);
    let cfg = finalize(cfg)?;
    let reads = pool.sample(&cfg.channel)?;
    let mut out = Vec::new();
    write_reads(&mut out, &reads, !a.no_provenance)?;
    let options = BTreeMap::from([("provenance", (!a.no_provenance).to_string())]);
    write_artifact(&a.out, &out, &Sidecar { command: "simulate", options, config: &cfg })?;
    eprintln!("wrote {} reads", reads.len());
    Ok(())
}

fn random_access(mut cfg: RunConfig, a: &RandomAccessArgs) -> Outcome {
    let pool = load_pool(&a.manifest, &a.pool)?;
    adopt_manifest(&mut cfg, &pool.manifest);
    a.channel.apply(&mut cfg);
    if let Some(r) = a.improper_binding_rate {
        cfg.channel.improper_binding_rate = r;
    }
    let cfg = finalize(cfg)?;
    let reads = pool.amplify(a.extent, &cfg.channel)?;
    let mut out = Vec::new();
    write_reads(&mut out, &reads, !a.no_provenance)?;
    let options = BTreeMap::from([("extent", a.extent.to_string()), ("provenance", (!a.no_provenance).to_string())]);
    write_artifact(&a.out, &out, &Sidecar { command: "random-access", options, config: &cfg })?;
    eprintln!("wrote {} reads for extent {}", reads.len(), a.extent);
    Ok(())
}

fn grouping(cfg: &RunConfig, oracle: bool) -> Grouping {
    if oracle {
        Grouping::Oracle
    } else {
        Grouping::Lsh(cfg.cluster.clone())
    }
}

fn decode(mut cfg: RunConfig, a: &DecodeArgs) -> Outcome {
    let manifest = load_manifest(&a.manifest)?;
    if a.row_based && manifest.layout.mode != LayoutMode::RowBased {
        return Err(anyhow!("mode mismatch: --row-based given but the manifest describes a columnar pool").into());
    }
    adopt_manifest(&mut cfg, &manifest);
    a.flags.apply(&mut cfg);
    let cfg = finalize(cfg)?;
    let pool = Pool::from_parts(manifest, Vec::new())?;
    let reads = load_reads(&a.reads)?;
    let extents = (!a.extent.is_empty()).then_some(a.extent.as_slice());
    let out = pool.decode(&reads, &cfg, &grouping(&cfg, a.flags.oracle_clusters), extents)?;
    let mut options = BTreeMap::from([("oracle_clusters", a.flags.oracle_clusters.to_string())]);
    if let Some(e) = extents {
        options.insert("extents", format!("{e:?}"));
    }
    let side = Sidecar { command: "decode", options, config: &cfg };
    write_artifact(&a.out, &out.bytes, &side)?;
    let report_path = a.report.clone().unwrap_or_else(|| {
        let mut name = a.out.file_name().unwrap_or_default().to_os_string();
        name.push(".report.toml");
        a.out.with_file_name(name)
    });
    write_artifact(&report_path, out.report.to_toml()?.as_bytes(), &side)?;
    let r = &out.report;
    eprintln!(
        "{} reads ({} unassigned, {} ambiguous), {} clusters, {}/{} blocks recovered, crc {}",
        r.reads_total,
        r.reads_unassigned,
        r.reads_ambiguous,
        r.clusters,
        r.blocks_total - r.blocks_failed,
        r.blocks_total,
        if r.crc_match { "ok" } else { "MISMATCH" }
    );
    if !r.success() {
        return Err(Failure::Data(format!(
            "{} of {} blocks unrecoverable, crc {:08x} expected {:08x}",
            r.blocks_failed, r.blocks_total, r.crc_actual, r.crc_expected
        )));
    }
    Ok(())
}

fn min_coverage(mut cfg: RunConfig, a: &MinCoverageArgs) -> Outcome {
    a.encode.apply(&mut cfg);
    a.decode.apply(&mut cfg);
    if let Some(s) = a.copy_bias_sigma {
        cfg.channel.copy_bias_sigma = s;
    }
    let cfg = finalize(cfg)?;
    if a.min_coverage == 0 || a.min_coverage > a.max_coverage {
        return Err(anyhow!("coverage range {}..={} is empty or starts at zero", a.min_coverage, a.max_coverage).into());
    }
    if a.error_rates.is_empty() || a.trials == 0 {
        return Err(anyhow!("need at least one error rate and one trial").into());
    }
    let input = match &a.input {
        Some(p) => fs::read(p).with_context(|| format!("reading {}", p.display()))?,
        None => {
            let mut g = SplitMix64::new(cfg.seed);
            (0..a.random_bytes).map(|_| g.next_u64() as u8).collect()
        }
    };
    let pool = encode_input(&input, &cfg)?;
    let grouping = grouping(&cfg, a.decode.oracle_clusters);
    let result = min_coverage_search(&a.error_rates, a.min_coverage..=a.max_coverage, a.trials, |e, c, t| {
        run_trial(&pool, &cfg, &grouping, e, c, t)
    })?;
    let mut options = BTreeMap::from([
        ("coverages", format!("{}..={}", a.min_coverage, a.max_coverage)),
        ("error_rates", format!("{:?}", a.error_rates)),
        ("trials", a.trials.to_string()),
        ("oracle_clusters", a.decode.oracle_clusters.to_string()),
    ]);
    match &a.input {
        Some(p) => options.insert("input_len", fs::metadata(p).map(|m| m.len()).unwrap_or(0).to_string()),
        None => options.insert("random_bytes", a.random_bytes.to_string()),
    };
    let side = Sidecar { command: "eval min-coverage", options, config: &cfg };
    if let Some(g) = &a.grid {
        write_artifact(g, result.grid_csv().as_bytes(), &side)?;
    }
    emit(a.out.as_deref(), &result.minima_csv(), &side)?;
    if !result.is_monotone() {
        eprintln!("warning: minimum coverage decreases with a higher error rate");
    }
    Ok(())
}

fn parse_counts(text: &str) -> anyhow::Result<(Vec<u64>, Vec<u64>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| anyhow!("empty counts file"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let find = |name: &str| cols.iter().position(|c| *c == name).ok_or_else(|| anyhow!("counts file lacks a {name} column"));
    let (ri, si) = (find("raw_count")?, find("read_count")?);
    let (mut raw, mut reads) = (Vec::new(), Vec::new());
    for (n, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let get = |i: usize| -> anyhow::Result<u64> {
            f.get(i).and_then(|v| v.parse().ok()).ok_or_else(|| anyhow!("line {}: bad count", n + 2))
        };
        raw.push(get(ri)?);
        reads.push(get(si)?);
    }
    Ok((raw, reads))
}

fn frac_change(cfg: RunConfig, a: &FracChangeArgs) -> Outcome {
    let (raw, reads, mut options) = match (&a.counts, &a.manifest, &a.reads) {
        (Some(p), _, _) => {
            let (raw, reads) = parse_counts(&read_text(p)?)?;
            (raw, reads, BTreeMap::from([("objects", "counts file".to_string())]))
        }
        (None, Some(m), Some(r)) => {
            let manifest = load_manifest(m)?;
            let reads = load_reads(r)?;
            let seqs: Vec<&[u8]> = reads.iter().map(|r| r.sequence.as_slice()).collect();
            let demuxed = demux_reads(&seqs, &manifest, &cfg.decode);
            let raw = manifest.extents.iter().map(|e| e.ob_count as u64 * manifest.geometry.oligos_per_ob as u64).collect();
            let counts = demuxed.extents.iter().map(|v| v.len() as u64).collect();
            (raw, counts, BTreeMap::from([("objects", "extents".to_string())]))
        }
        _ => return Err(anyhow!("give --counts, or --manifest with --reads").into()),
    };
    let report = population_fraction_change(&raw, &reads)?;
    options.insert("std", format!("{}", report.std));
    options.insert("mean", format!("{}", report.mean));
    emit(a.out.as_deref(), &report.to_csv(), &Sidecar { command: "metrics frac-change", options, config: &cfg })?;
    eprintln!("fraction change: min {:.3} max {:.3} mean {:.3} std {:.3}", report.min, report.max, report.mean, report.std);
    Ok(())
}

fn costs(cfg: RunConfig, a: &CostsArgs) -> Outcome {
    let mut lines = Vec::new();
    match (&a.manifest, a.oligo_count) {
        (Some(m), _) => {
            let manifest = load_manifest(m)?;
            let (payload, full) = pool_write_costs(&manifest);
            lines.push(format!("write_cost_payload = {payload}"));
            lines.push(format!("write_cost_full = {full}"));
            let bits = (manifest.input_byte_len * 8) as f64;
            if let Some(r) = &a.reads {
                let nt: usize = load_reads(r)?.iter().map(|r| r.sequence.len()).sum();
                lines.push(format!("read_cost = {}", nt as f64 / bits));
            } else if let Some(c) = a.coverage {
                lines.push(format!("read_cost = {}", c * full));
            }
        }
        (None, Some(n)) => {
            let inputs = CostInputs { coverage: a.coverage, ..CostInputs::new(n, a.oligo_len.unwrap_or(0.0), a.input_bits.unwrap_or(0.0)) };
            lines.push(format!("write_cost = {}", write_cost(&inputs)?));
            if a.coverage.is_some() {
                lines.push(format!("read_cost = {}", read_cost(&inputs)?));
            }
        }
        (None, None) => return Err(anyhow!("give --manifest, or --oligo-count with --oligo-len and --input-bits").into()),
    }
    let text = lines.join("\n") + "\n";
    emit(a.out.as_deref(), &text, &Sidecar { command: "metrics costs", options: BTreeMap::new(), config: &cfg })?;
    Ok(())
}

fn profile(mut cfg: RunConfig, a: &ErrorProfileArgs) -> Outcome {
    let pool = load_pool(&a.manifest, &a.pool)?;
    adopt_manifest(&mut cfg, &pool.manifest);
    let reads = load_reads(&a.reads)?;
    let p = error_profile(&reads, |r| pool.source_sequence(r))?;
    let options = BTreeMap::from([
        ("reads", p.reads.to_string()),
        ("sub_rate", p.sub_rate.to_string()),
        ("ins_rate", p.ins_rate.to_string()),
        ("del_rate", p.del_rate.to_string()),
    ]);
    emit(a.out.as_deref(), &p.to_csv(), &Sidecar { command: "metrics error-profile", options, config: &cfg })?;
    eprintln!(
        "{} reads: sub {:.5} ins {:.5} del {:.5} (aligned edits {}, injected {})",
        p.reads, p.sub_rate, p.ins_rate, p.del_rate, p.aligned_edits, p.injected_edits
    );
    Ok(())
}
