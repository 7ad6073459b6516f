use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use motifstore::config::RunConfig;
use motifstore::ecc::Scheme;
use motifstore::layout::LayoutMode;

#[derive(Debug, Parser)]
#[command(name = "motifstore", version, about = "Motif-based columnar DNA storage: encode, simulate, decode, evaluate")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Global seed (decimal or 0x-prefixed hex).
    #[arg(long, global = true, value_parser = parse_seed)]
    pub seed: Option<u64>,
    /// Worker threads; never changes output bytes.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Motif dictionary queries.
    Dict {
        #[command(subcommand)]
        command: DictCommand,
    },
    /// Encode a file into an oligo pool and manifest.
    Encode(EncodeArgs),
    /// Sequence the whole pool through the noisy channel.
    Simulate(SimulateArgs),
    /// PCR-select one extent and sequence it.
    RandomAccess(RandomAccessArgs),
    /// Recover data from reads.
    Decode(DecodeArgs),
    /// Evaluation sweeps.
    Eval {
        #[command(subcommand)]
        command: EvalCommand,
    },
    /// Cost, bias and error metrics.
    Metrics {
        #[command(subcommand)]
        command: MetricsCommand,
    },
}

#[derive(Debug, Subcommand)]
pub enum DictCommand {
    /// Print capacity and density for the configured constraints.
    Stats(MotifFlags),
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Smallest coverage at which every trial recovers the input.
    MinCoverage(MinCoverageArgs),
}

#[derive(Debug, Subcommand)]
pub enum MetricsCommand {
    /// Population fraction change per object.
    FracChange(FracChangeArgs),
    /// Write and read cost in nucleotides per bit.
    Costs(CostsArgs),
    /// Per-position substitution, insertion and deletion rates.
    ErrorProfile(ErrorProfileArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SchemeArg {
    Rs,
    Ldpc,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LayoutArg {
    Columnar,
    RowBased,
}

#[derive(Debug, Clone, Default, Args)]
pub struct MotifFlags {
    #[arg(long)]
    pub motif_len: Option<usize>,
    #[arg(long)]
    pub max_run: Option<usize>,
    #[arg(long)]
    pub gc_min: Option<f64>,
    #[arg(long)]
    pub gc_max: Option<f64>,
    #[arg(long)]
    pub max_doublets: Option<usize>,
    #[arg(long)]
    pub bits_per_motif: Option<u32>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct EncodeFlags {
    #[command(flatten)]
    pub motif: MotifFlags,
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    /// Parity overhead relative to the data, e.g. 0.1.
    #[arg(long)]
    pub redundancy: Option<f64>,
    #[arg(long)]
    pub data_bits: Option<usize>,
    #[arg(long)]
    pub columns: Option<usize>,
    #[arg(long)]
    pub obs_per_oe: Option<usize>,
    #[arg(long)]
    pub primer_len: Option<usize>,
    #[arg(long, value_enum)]
    pub layout: Option<LayoutArg>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ChannelFlags {
    #[arg(long)]
    pub coverage: Option<f64>,
    #[arg(long)]
    pub error_rate: Option<f64>,
    #[arg(long)]
    pub error_sd_factor: Option<f64>,
    #[arg(long)]
    pub copy_bias_sigma: Option<f64>,
    #[arg(long)]
    pub reverse_complement: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct DecodeFlags {
    /// Group reads by simulator provenance instead of clustering.
    #[arg(long)]
    pub oracle_clusters: bool,
    /// Advance by the motif length instead of realigning after each column.
    #[arg(long)]
    pub no_realign: bool,
    #[arg(long)]
    pub slack: Option<usize>,
    /// Retry unmatched reads as reverse complements.
    #[arg(long)]
    pub orientation_check: bool,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub pool: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub flags: EncodeFlags,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub pool: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Leave provenance out of the read headers.
    #[arg(long)]
    pub no_provenance: bool,
    #[command(flatten)]
    pub channel: ChannelFlags,
}

#[derive(Debug, Args)]
pub struct RandomAccessArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub pool: PathBuf,
    #[arg(long)]
    pub extent: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub improper_binding_rate: Option<f64>,
    #[arg(long)]
    pub no_provenance: bool,
    #[command(flatten)]
    pub channel: ChannelFlags,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub reads: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Defaults to `<out>.report.toml`.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Decode only these extents (repeatable).
    #[arg(long)]
    pub extent: Vec<usize>,
    /// Require a row-based manifest.
    #[arg(long)]
    pub row_based: bool,
    #[command(flatten)]
    pub flags: DecodeFlags,
}

#[derive(Debug, Args)]
pub struct MinCoverageArgs {
    /// Input file; random bytes from the seed when absent.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 65536)]
    pub random_bytes: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.05,0.12")]
    pub error_rates: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    pub min_coverage: u32,
    #[arg(long, default_value_t = 40)]
    pub max_coverage: u32,
    #[arg(long, default_value_t = 3)]
    pub trials: u32,
    /// Full grid CSV.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Minimum coverage per error rate; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub encode: EncodeFlags,
    #[command(flatten)]
    pub decode: DecodeFlags,
    #[arg(long)]
    pub copy_bias_sigma: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FracChangeArgs {
    /// CSV with `object,raw_count,read_count`.
    #[arg(long, conflicts_with_all = ["manifest", "reads"])]
    pub counts: Option<PathBuf>,
    /// With `--reads`: extents are the objects, counted after demultiplexing.
    #[arg(long, requires = "reads")]
    pub manifest: Option<PathBuf>,
    #[arg(long, requires = "manifest")]
    pub reads: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CostsArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Reads file; read cost uses its total length.
    #[arg(long, requires = "manifest")]
    pub reads: Option<PathBuf>,
    #[arg(long, conflicts_with = "manifest", requires_all = ["oligo_len", "input_bits"])]
    pub oligo_count: Option<f64>,
    #[arg(long)]
    pub oligo_len: Option<f64>,
    #[arg(long)]
    pub input_bits: Option<f64>,
    #[arg(long)]
    pub coverage: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ErrorProfileArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub pool: PathBuf,
    #[arg(long)]
    pub reads: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_seed(s: &str) -> Result<u64, String> {
    match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(h) => u64::from_str_radix(h, 16),
        None => s.parse(),
    }
    .map_err(|e| format!("bad seed {s:?}: {e}"))
}

impl MotifFlags {
    pub fn apply(&self, cfg: &mut RunConfig) {
        let c = &mut cfg.motif.constraints;
        set(&mut c.motif_len, self.motif_len);
        set(&mut c.max_run, self.max_run);
        set(&mut c.gc_min, self.gc_min);
        set(&mut c.gc_max, self.gc_max);
        if self.max_doublets.is_some() {
            c.max_doublets = self.max_doublets;
        }
        if let Some(b) = self.bits_per_motif {
            cfg.motif.bits_per_motif = b;
            cfg.ecc.symbol_bits = b;
        }
    }
}

impl EncodeFlags {
    pub fn apply(&self, cfg: &mut RunConfig) {
        self.motif.apply(cfg);
        if let Some(s) = self.scheme {
            cfg.ecc.scheme = match s {
                SchemeArg::Rs => Scheme::Rs,
                SchemeArg::Ldpc => Scheme::Ldpc,
            };
        }
        set(&mut cfg.ecc.redundancy, self.redundancy);
        set(&mut cfg.ecc.data_bits, self.data_bits);
        set(&mut cfg.layout.data_columns_per_oligo, self.columns);
        set(&mut cfg.layout.obs_per_oe, self.obs_per_oe);
        set(&mut cfg.layout.primer_len, self.primer_len);
        if let Some(l) = self.layout {
            cfg.layout.mode = match l {
                LayoutArg::Columnar => LayoutMode::Columnar,
                LayoutArg::RowBased => LayoutMode::RowBased,
            };
        }
    }
}

impl ChannelFlags {
    pub fn apply(&self, cfg: &mut RunConfig) {
        let c = &mut cfg.channel;
        set(&mut c.coverage, self.coverage);
        set(&mut c.error_rate, self.error_rate);
        set(&mut c.error_sd_factor, self.error_sd_factor);
        set(&mut c.copy_bias_sigma, self.copy_bias_sigma);
        c.reverse_complement |= self.reverse_complement;
    }
}

impl DecodeFlags {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if self.no_realign {
            cfg.decode.realign = false;
        }
        set(&mut cfg.decode.slack, self.slack);
        cfg.decode.orientation_check |= self.orientation_check;
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}
