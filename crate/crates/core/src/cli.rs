//! Command-line front end. Every stage reads and writes files so the
//! pipeline can be run, inspected and tested one step at a time.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{ArgAction, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

use crate::compression::{fit_itq, fit_pca, stack_representations, ItqModel, PcaModel};
use crate::descriptors::{read_ofpf, write_ofpf, DescriptorSource};
use crate::eval::{mean_average_precision, ukb_score, GroundTruth};
use crate::exec::{with_jobs, Execution};
use crate::index::{read_results, write_results, Metric, RetrievalIndex};
use crate::pipeline::{build_index, describe, pool, propose, Encoder, PipelineConfig};
use crate::pooling::{
    proposal_extent, read_representation, write_representation, PooledRepresentation,
};
use crate::proposals::{read_proposals, validate_image_id, write_proposals, ProposalSet};
use crate::raster::decode_ppm;

#[derive(Debug, Parser)]
#[command(
    name = "objpool",
    version,
    about = "Object-level pooled descriptors for compact image retrieval"
)]
pub struct Cli {
    /// Flat `key = value` file supplying defaults for any flag; explicit flags win
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads for per-image stages (0 = all cores); output does not depend on it
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DescriptorKind {
    Builtin,
    External,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    L2,
    Hamming,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::L2 => Metric::L2,
            MetricArg::Hamming => Metric::Hamming,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProtocolArg {
    /// Mean average precision
    Map,
    /// 4 × precision@4
    Ukb,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Exclusion {
    /// On for map, off for ukb
    Auto,
    On,
    Off,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate scored object proposals for PPM images
    Propose {
        /// Input images (P6 PPM); repeat or pass directories
        #[arg(long, required = true, action = ArgAction::Append)]
        input: Vec<PathBuf>,
        /// Image id to use instead of the file stem (single input only)
        #[arg(long)]
        image_id: Option<String>,
        /// Proposal file to write (default: stdout)
        #[arg(long)]
        output: Option<PathBuf>,
        /// Segmentation scale parameter
        #[arg(long, default_value_t = 100.0)]
        k: f64,
        /// Minimum segment size in pixels
        #[arg(long, default_value_t = 50)]
        min_size: usize,
        /// IoU above which lower-scoring proposals are rejected
        #[arg(long, default_value_t = 0.9)]
        nms_iou: f64,
        /// Maximum proposals kept per image
        #[arg(long, default_value_t = 500)]
        top_n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Describe every proposal region, writing one OFPF file per image
    Describe {
        /// Input images (P6 PPM); repeat or pass directories
        #[arg(long, required = true, action = ArgAction::Append)]
        input: Vec<PathBuf>,
        /// Proposal file covering the input images
        #[arg(long)]
        proposals: PathBuf,
        #[arg(long, value_enum, default_value_t = DescriptorKind::Builtin)]
        descriptor: DescriptorKind,
        /// Externally computed OFPF feature files, matched to images by file stem
        #[arg(long, action = ArgAction::Append)]
        features: Vec<PathBuf>,
        /// Scale each region descriptor to unit l2 norm
        #[arg(long, default_value_t = false)]
        normalize_rows: bool,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Max-pool region descriptors into one representation per image
    Pool {
        /// Region feature files (OFPF); repeat or pass directories
        #[arg(long, required = true, action = ArgAction::Append)]
        input: Vec<PathBuf>,
        /// Scale pooled vectors to unit l2 norm
        #[arg(long, default_value_t = false)]
        normalize: bool,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Fit a PCA model on pooled representations
    FitPca {
        /// Representation files used for fitting; repeat or pass directories
        #[arg(long, required = true, action = ArgAction::Append)]
        input: Vec<PathBuf>,
        /// Output dimension
        #[arg(long, default_value_t = 32)]
        dim: usize,
        #[arg(long)]
        output: PathBuf,
    },
    /// Fit an ITQ binary-code model on pooled representations
    FitItq {
        /// Representation files used for fitting; repeat or pass directories
        #[arg(long, required = true, action = ArgAction::Append)]
        input: Vec<PathBuf>,
        /// Code length in bits
        #[arg(long, default_value_t = 64)]
        bits: usize,
        /// Alternating-minimisation iterations
        #[arg(long, default_value_t = 50)]
        iters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Build a search index from pooled representations
    Index {
        /// Representation files to index; repeat or pass directories
        #[arg(long, required = true, action = ArgAction::Append)]
        input: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = MetricArg::L2)]
        metric: MetricArg,
        /// PCA model applied before l2 indexing
        #[arg(long)]
        pca: Option<PathBuf>,
        /// ITQ model, required for hamming indexing
        #[arg(long)]
        itq: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Rank indexed images for each query representation
    Search {
        #[arg(long)]
        index: PathBuf,
        /// Query representation files; repeat or pass directories
        #[arg(long, required = true, action = ArgAction::Append)]
        query: Vec<PathBuf>,
        /// Expected index metric (checked against the index file)
        #[arg(long, value_enum)]
        metric: Option<MetricArg>,
        /// PCA model the index was built with
        #[arg(long)]
        pca: Option<PathBuf>,
        /// ITQ model the index was built with
        #[arg(long)]
        itq: Option<PathBuf>,
        /// Results per query
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// Results file to write (default: stdout)
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Score search results against ground truth
    Evaluate {
        /// Results written by `search`
        #[arg(long)]
        results: PathBuf,
        /// Lines of `query_id<TAB>relevant_id[,relevant_id...]`
        #[arg(long)]
        ground_truth: PathBuf,
        #[arg(long, value_enum, default_value_t = ProtocolArg::Map)]
        protocol: ProtocolArg,
        /// Drop the query from its own ranking before scoring
        #[arg(long, value_enum, default_value_t = Exclusion::Auto)]
        exclude_query: Exclusion,
        /// Report file to write (default: stdout)
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

/// Parses a flat `key = value` file. `#` starts a comment line.
pub fn parse_config(text: &str) -> anyhow::Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("config line {}: expected `key = value`", lineno + 1))?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            bail!("config line {}: empty key", lineno + 1);
        }
        map.insert(key, v.trim().trim_matches('"').to_owned());
    }
    Ok(map)
}

fn find_config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(rest) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(rest));
        }
    }
    None
}

/// Inserts config-file values as flags right after the subcommand name so
/// that explicit flags, which come later, override them.
fn merge_config_args(
    args: Vec<OsString>,
    config: &BTreeMap<String, String>,
) -> anyhow::Result<Vec<OsString>> {
    let cmd = Cli::command();
    let Some(pos) = args
        .iter()
        .position(|a| cmd.find_subcommand(a.to_string_lossy().as_ref()).is_some())
    else {
        return Ok(args);
    };
    let sub = cmd
        .find_subcommand(args[pos].to_string_lossy().as_ref())
        .expect("position found above");
    let mut injected = Vec::new();
    for (key, value) in config {
        if key == "config" {
            continue;
        }
        let Some(arg) = sub
            .get_arguments()
            .chain(cmd.get_arguments())
            .find(|a| a.get_long() == Some(key.as_str()))
        else {
            continue;
        };
        match arg.get_action() {
            ArgAction::SetTrue => match value.as_str() {
                "true" | "1" | "yes" | "on" => injected.push(OsString::from(format!("--{key}"))),
                "false" | "0" | "no" | "off" => {}
                other => bail!("config key {key}: expected a boolean, got {other:?}"),
            },
            // lists come from the command line only
            ArgAction::Append => {}
            _ => {
                injected.push(OsString::from(format!("--{key}")));
                injected.push(OsString::from(value));
            }
        }
    }
    let mut out = args[..=pos].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[pos + 1..]);
    Ok(out)
}

/// Expands directories into their files with the given extension, sorted by name.
fn expand_inputs(paths: &[PathBuf], ext: &str) -> anyhow::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .with_context(|| format!("reading directory {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|e| e == ext))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        bail!("no .{ext} inputs found");
    }
    Ok(out)
}

fn stem_id(path: &Path) -> anyhow::Result<String> {
    let id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| anyhow!("cannot derive an image id from {}", path.display()))?
        .to_owned();
    validate_image_id(&id)?;
    Ok(id)
}

fn read_file(path: &Path) -> anyhow::Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn emit(output: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match output {
        Some(p) => write_file(p, text.as_bytes()),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn load_representations(
    paths: &[PathBuf],
    exec: Execution,
) -> anyhow::Result<Vec<PooledRepresentation>> {
    let files = expand_inputs(paths, "ofpf")?;
    exec.try_map(&files, |p| -> anyhow::Result<PooledRepresentation> {
        let id = stem_id(p)?;
        read_representation(&read_file(p)?, &id)
            .with_context(|| format!("reading representation {}", p.display()))
    })
}

fn load_encoder(pca: Option<&PathBuf>, itq: Option<&PathBuf>) -> anyhow::Result<Encoder> {
    match (pca, itq) {
        (Some(_), Some(_)) => {
            bail!("--pca and --itq are mutually exclusive (an ITQ model embeds its PCA)")
        }
        (Some(p), None) => Ok(Encoder::Pca(
            PcaModel::from_bytes(&read_file(p)?)
                .with_context(|| format!("reading PCA model {}", p.display()))?,
        )),
        (None, Some(p)) => Ok(Encoder::Itq(
            ItqModel::from_bytes(&read_file(p)?)
                .with_context(|| format!("reading ITQ model {}", p.display()))?,
        )),
        (None, None) => Ok(Encoder::Raw),
    }
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    let exec = Execution::Parallel;
    match cli.command {
        Command::Propose {
            input,
            image_id,
            output,
            k,
            min_size,
            nms_iou,
            top_n,
            seed,
        } => {
            let cfg = PipelineConfig {
                seed,
                k,
                min_size,
                nms_iou,
                top_n,
                ..Default::default()
            };
            cfg.validate()?;
            let files = expand_inputs(&input, "ppm")?;
            if image_id.is_some() && files.len() != 1 {
                bail!("--image-id requires exactly one input");
            }
            let sets = exec.try_map(&files, |p| -> anyhow::Result<ProposalSet> {
                let id = match &image_id {
                    Some(id) => {
                        validate_image_id(id)?;
                        id.clone()
                    }
                    None => stem_id(p)?,
                };
                let img = decode_ppm(&read_file(p)?)
                    .with_context(|| format!("decoding {}", p.display()))?;
                Ok(propose(&img, &id, &cfg)?)
            })?;
            emit(output.as_deref(), &write_proposals(&sets))
        }
        Command::Describe {
            input,
            proposals,
            descriptor,
            features,
            normalize_rows,
            out_dir,
        } => {
            let files = expand_inputs(&input, "ppm")?;
            let text =
                String::from_utf8(read_file(&proposals)?).context("proposal file is not UTF-8")?;
            let sets: BTreeMap<String, ProposalSet> = read_proposals(&text)?
                .into_iter()
                .map(|s| (s.image_id.clone(), s))
                .collect();
            let external: BTreeMap<String, PathBuf> = if features.is_empty() {
                BTreeMap::new()
            } else {
                expand_inputs(&features, "ofpf")?
                    .into_iter()
                    .map(|p| Ok((stem_id(&p)?, p)))
                    .collect::<anyhow::Result<_>>()?
            };
            exec.try_map(&files, |p| -> anyhow::Result<()> {
                let id = stem_id(p)?;
                let img = decode_ppm(&read_file(p)?)
                    .with_context(|| format!("decoding {}", p.display()))?;
                let set = sets
                    .get(&id)
                    .cloned()
                    .unwrap_or_else(|| ProposalSet::new(id.clone(), Vec::new()));
                let source = match descriptor {
                    DescriptorKind::Builtin => DescriptorSource::Builtin,
                    DescriptorKind::External => match external.get(&id) {
                        None => DescriptorSource::External(None),
                        Some(f) => {
                            let (ext_set, feats) = read_ofpf(&read_file(f)?)
                                .with_context(|| format!("reading features {}", f.display()))?;
                            if ext_set.boxes().ne(set.boxes()) {
                                bail!(
                                    "feature file {} does not match the proposals of {id}",
                                    f.display()
                                );
                            }
                            DescriptorSource::External(Some(feats))
                        }
                    },
                };
                let feats = describe(&img, &set, &source, normalize_rows, Execution::Sequential)
                    .with_context(|| format!("describing {id}"))?;
                write_file(
                    &out_dir.join(format!("{id}.ofpf")),
                    &write_ofpf(&set, &feats)?,
                )
            })?;
            Ok(())
        }
        Command::Pool {
            input,
            normalize,
            out_dir,
        } => {
            let files = expand_inputs(&input, "ofpf")?;
            exec.try_map(&files, |p| -> anyhow::Result<()> {
                let id = stem_id(p)?;
                let (mut set, mut feats) = read_ofpf(&read_file(p)?)
                    .with_context(|| format!("reading features {}", p.display()))?;
                set.image_id = id.clone();
                feats.image_id = id.clone();
                let rep = pool(&feats, normalize).with_context(|| format!("pooling {id}"))?;
                write_file(
                    &out_dir.join(format!("{id}.ofpf")),
                    &write_representation(&rep, proposal_extent(&set))?,
                )
            })?;
            Ok(())
        }
        Command::FitPca { input, dim, output } => {
            let reps = load_representations(&input, exec)?;
            let model = fit_pca(&stack_representations(&reps)?, dim)?;
            write_file(&output, &model.to_bytes()?)
        }
        Command::FitItq {
            input,
            bits,
            iters,
            seed,
            output,
        } => {
            let reps = load_representations(&input, exec)?;
            let model = fit_itq(&stack_representations(&reps)?, bits, iters, seed)?;
            write_file(&output, &model.to_bytes()?)
        }
        Command::Index {
            input,
            metric,
            pca,
            itq,
            output,
        } => {
            let encoder = load_encoder(pca.as_ref(), itq.as_ref())?;
            let metric = Metric::from(metric);
            if encoder.metric() != metric {
                bail!(
                    "metric {} needs {}",
                    metric.name(),
                    if metric == Metric::Hamming {
                        "an --itq model"
                    } else {
                        "float payloads (no --itq)"
                    }
                );
            }
            let reps = load_representations(&input, exec)?;
            let index = build_index(&reps, &encoder, exec)?;
            write_file(&output, &index.to_bytes()?)
        }
        Command::Search {
            index,
            query,
            metric,
            pca,
            itq,
            k,
            output,
        } => {
            let index = RetrievalIndex::from_bytes(&read_file(&index)?)
                .with_context(|| format!("reading index {}", index.display()))?;
            if let Some(m) = metric {
                if Metric::from(m) != index.metric() {
                    bail!(
                        "index uses metric {}, not {}",
                        index.metric().name(),
                        Metric::from(m).name()
                    );
                }
            }
            let encoder = load_encoder(pca.as_ref(), itq.as_ref())?;
            let reps = load_representations(&query, exec)?;
            let queries = exec.try_map(&reps, |r| {
                encoder.encode(&r.vector).map(|p| (r.image_id.clone(), p))
            })?;
            let lists = index.search_batch(&queries, k, exec)?;
            emit(output.as_deref(), &write_results(&lists))
        }
        Command::Evaluate {
            results,
            ground_truth,
            protocol,
            exclude_query,
            output,
        } => {
            let lists = read_results(
                &String::from_utf8(read_file(&results)?).context("results file is not UTF-8")?,
            )?;
            let gt = GroundTruth::parse(
                &String::from_utf8(read_file(&ground_truth)?)
                    .context("ground truth is not UTF-8")?,
            )?;
            let report = match protocol {
                ProtocolArg::Map => {
                    mean_average_precision(&lists, &gt, exclude_query != Exclusion::Off)?
                }
                ProtocolArg::Ukb => {
                    if exclude_query == Exclusion::On {
                        bail!("the ukb protocol keeps the query in its ranking");
                    }
                    ukb_score(&lists, &gt)?
                }
            };
            emit(output.as_deref(), &report.render())
        }
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match find_config_path(&args) {
        None => args,
        Some(path) => {
            let merged = std::fs::read_to_string(&path)
                .with_context(|| format!("reading config {}", path.display()))
                .and_then(|text| parse_config(&text))
                .and_then(|cfg| merge_config_args(args, &cfg));
            match merged {
                Ok(a) => a,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    return 2;
                }
            }
        }
    };
    let matches = Cli::command()
        .args_override_self(true)
        .try_get_matches_from(args);
    let cli = match matches.and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(
                e.kind(),
                ErrorKind::DisplayHelp
                    | ErrorKind::DisplayVersion
                    | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            ) {
                let _ = e.print();
                return if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                    2
                } else {
                    0
                };
            }
            let msg = e.to_string();
            let first = msg
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments");
            eprintln!("{}", first.trim());
            return 2;
        }
    };
    let jobs = cli.jobs;
    match with_jobs(jobs, || execute(cli)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing() {
        let cfg = parse_config("# comment\ntop_n = 100\nnms-iou=0.5\n\nseed = \"7\"\n").unwrap();
        assert_eq!(cfg["top-n"], "100");
        assert_eq!(cfg["nms-iou"], "0.5");
        assert_eq!(cfg["seed"], "7");
        assert!(parse_config("novalue\n").is_err());
    }

    #[test]
    fn config_values_are_overridden_by_flags() {
        let cfg =
            parse_config("top-n = 100\nseed = 3\nnormalize = true\ninput = ignored.ppm\n").unwrap();
        let args: Vec<OsString> = ["objpool", "propose", "--input", "a.ppm", "--seed", "9"]
            .iter()
            .map(OsString::from)
            .collect();
        let merged = merge_config_args(args, &cfg).unwrap();
        let cli = Cli::from_arg_matches(
            &Cli::command()
                .args_override_self(true)
                .get_matches_from(merged),
        )
        .unwrap();
        match cli.command {
            Command::Propose {
                top_n, seed, input, ..
            } => {
                assert_eq!(top_n, 100);
                assert_eq!(seed, 9);
                assert_eq!(input, vec![PathBuf::from("a.ppm")]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
