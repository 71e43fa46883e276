use std::fs::{self, File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use dataref_core::detector::find_references;
use dataref_core::dictionary::{
    build_dictionary, pattern_stats, FeatureDictionary, Title, Wordlists,
};
use dataref_core::evaluator::{
    evaluate_all, evaluate_combined, evaluate_detection, evaluate_matching_detected, format_table,
    GoldStandard, Phase,
};
use dataref_core::exporter::{build_linkset, export, import_json, ArticleMetadata, ExportFormat};
use dataref_core::ranker::{aggregate_per_feature, rank_article};
use dataref_core::registry::{load_snapshot, write_records, RegistryIndex};
use dataref_core::registry::{
    DirectoryTransport, Harvester, HttpTransport, OaiTransport, ResumeState,
};
use dataref_core::{DefaultRankerConfig, EvaluationReport};
use dataref_service::AppState;
use url::Url;

mod records;

use records::{
    detected_features, read_articles, read_jsonl, suggestions, write_jsonl, DetectedLine,
    RankedLine,
};

#[derive(Parser)]
#[command(
    name = "dataref",
    version,
    about = "Detect dataset references in articles and link them to registry records"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Harvest dataset records over OAI-PMH into a snapshot.
    Harvest {
        #[arg(long)]
        endpoint: Url,
        #[arg(long = "set")]
        set_spec: Option<String>,
        #[arg(long)]
        out: PathBuf,
        /// Serve responses from recorded `<Verb>.xml` / `<token>.xml` files.
        #[arg(long)]
        from_dir: Option<PathBuf>,
        /// Continue an interrupted harvest from `<out>.resume.json`.
        #[arg(long)]
        resume: bool,
    },
    /// Record count and title-pattern statistics of a snapshot.
    SnapshotInfo {
        snapshot: PathBuf,
        /// Dictionary to measure with; built from the snapshot when absent.
        #[arg(long)]
        dict: Option<PathBuf>,
    },
    /// Extract abbreviations and phrases from snapshot titles.
    BuildDict {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Existing dictionary directory whose base terms and false positives
        /// are kept.
        #[arg(long)]
        seed: Option<PathBuf>,
    },
    /// Dictionary sizes and title coverage.
    DictStats {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        dict: PathBuf,
    },
    /// Find dataset references in plain-text articles.
    Detect {
        #[arg(long)]
        dict: PathBuf,
        /// An article file or a directory of `.txt` files.
        #[arg(long)]
        articles: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank registry candidates for the references of articles.
    Rank {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        dict: PathBuf,
        /// An article file or a directory of `.txt` files.
        #[arg(long)]
        article: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::PerReference)]
        mode: Mode,
        /// TOML ranker configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score detection and matching output against a gold standard.
    Evaluate {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        detected: PathBuf,
        #[arg(long)]
        ranked: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = PhaseArg::All)]
        phase: PhaseArg,
        /// Also write the reports as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Build a link set of per-feature candidates for one article.
    Linkset {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        dict: PathBuf,
        #[arg(long)]
        article: PathBuf,
        /// Article DOI or URN.
        #[arg(long)]
        pid: String,
        #[arg(long)]
        title: Option<String>,
        #[arg(long)]
        journal: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serialize a link set as N-Triples, Turtle or JSON.
    Export {
        #[arg(long)]
        linkset: PathBuf,
        #[arg(long, default_value = "nt")]
        format: ExportFormat,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the review service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        dict: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    PerReference,
    PerFeature,
}

#[derive(Clone, Copy, ValueEnum)]
enum PhaseArg {
    Detection,
    Matching,
    Combined,
    All,
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(io::stderr)
        .init();
    match Cli::parse().command {
        Command::Harvest {
            endpoint,
            set_spec,
            out,
            from_dir,
            resume,
        } => harvest(endpoint, set_spec, &out, from_dir, resume),
        Command::SnapshotInfo { snapshot, dict } => snapshot_info(&snapshot, dict.as_deref()),
        Command::BuildDict {
            snapshot,
            out_dir,
            seed,
        } => {
            let index = open_snapshot(&snapshot)?;
            let seed = match seed {
                Some(dir) => read_dict(&dir)?,
                None => FeatureDictionary::with_bundled_base_terms(),
            };
            let dict = dictionary_from(&index, seed);
            dict.write_dir(&out_dir)
                .with_context(|| format!("writing {}", out_dir.display()))?;
            println!(
                "{} abbreviations, {} phrases from {} titles",
                dict.abbreviations().count(),
                dict.phrases().count(),
                index.len()
            );
            Ok(())
        }
        Command::DictStats { snapshot, dict } => {
            let index = open_snapshot(&snapshot)?;
            print_stats(&index, &read_dict(&dict)?);
            Ok(())
        }
        Command::Detect {
            dict,
            articles,
            out,
        } => detect(&dict, &articles, &out),
        Command::Rank {
            snapshot,
            dict,
            article,
            mode,
            config,
            out,
        } => rank(&snapshot, &dict, &article, mode, config.as_deref(), &out),
        Command::Evaluate {
            gold,
            detected,
            ranked,
            phase,
            json,
        } => evaluate(&gold, &detected, ranked.as_deref(), phase, json.as_deref()),
        Command::Linkset {
            snapshot,
            dict,
            article,
            pid,
            title,
            journal,
            config,
            out,
        } => {
            let index = open_snapshot(&snapshot)?;
            let dictionary = read_dict(&dict)?;
            let config = read_config(config.as_deref())?;
            let article = dataref_core::ArticleText::read(&article)
                .with_context(|| format!("reading {}", article.display()))?;
            let refs = find_references(&article, &dictionary);
            let ranked = rank_article(&refs, &index, &article, &config);
            let groups = aggregate_per_feature(
                refs.iter().zip(ranked.iter().map(Vec::as_slice)),
                config.top_k_feature,
            );
            let mut metadata = ArticleMetadata::new(&article.article_id, pid);
            metadata.title = title;
            metadata.journal = journal;
            let linkset = build_linkset(metadata, &groups, &[]);
            linkset.validate()?;
            fs::write(&out, export(&linkset, ExportFormat::Json)?)?;
            println!("{} candidate links", linkset.links.len());
            Ok(())
        }
        Command::Export {
            linkset,
            format,
            out,
        } => {
            let text = fs::read_to_string(&linkset)
                .with_context(|| format!("reading {}", linkset.display()))?;
            let linkset = import_json(&text)?;
            fs::write(&out, export(&linkset, format)?)?;
            Ok(())
        }
        Command::Serve {
            port,
            host,
            data_dir,
            snapshot,
            dict,
            config,
        } => {
            let state = AppState::open(
                data_dir,
                open_snapshot(&snapshot)?,
                read_dict(&dict)?,
                read_config(config.as_deref())?,
            )?;
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(dataref_service::serve(
                SocketAddr::new(host, port),
                Arc::new(state),
            ))?;
            Ok(())
        }
    }
}

fn open_snapshot(path: &Path) -> Result<RegistryIndex> {
    load_snapshot(path).with_context(|| format!("loading snapshot {}", path.display()))
}

fn read_dict(dir: &Path) -> Result<FeatureDictionary> {
    FeatureDictionary::read_dir(dir)
        .with_context(|| format!("reading dictionary {}", dir.display()))
}

fn read_config(path: Option<&Path>) -> Result<DefaultRankerConfig> {
    let config: DefaultRankerConfig = match path {
        Some(p) => toml::from_str(
            &fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        )
        .with_context(|| format!("parsing {}", p.display()))?,
        None => DefaultRankerConfig::default(),
    };
    config.validate()?;
    Ok(config)
}

fn dictionary_from(index: &RegistryIndex, seed: FeatureDictionary) -> FeatureDictionary {
    build_dictionary(
        index.records().iter().map(Title::from),
        Wordlists::bundled(),
        seed,
    )
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn resume_file(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_owned();
    name.push(".resume.json");
    out.with_file_name(name)
}

fn harvest(
    endpoint: Url,
    set_spec: Option<String>,
    out: &Path,
    from_dir: Option<PathBuf>,
    resume: bool,
) -> Result<()> {
    let transport: Box<dyn OaiTransport> = match from_dir {
        Some(dir) => Box::new(DirectoryTransport::new(dir)),
        None => Box::new(HttpTransport::new()?),
    };
    let state_path = resume_file(out);
    let start: Option<ResumeState> = if resume && state_path.exists() {
        Some(serde_json::from_str(&fs::read_to_string(&state_path)?)?)
    } else {
        None
    };
    let file = if start.is_some() {
        OpenOptions::new().append(true).open(out)?
    } else {
        File::create(out)?
    };
    let mut writer = BufWriter::new(file);
    let mut stream = Harvester::new(transport, endpoint, set_spec).records(start);
    let mut count = 0usize;
    while let Some(item) = stream.next() {
        match item {
            Ok(record) => {
                write_records(&mut writer, [&record])?;
                count += 1;
            }
            Err(e) => {
                writer.flush()?;
                if let Some(state) = stream.resume_state() {
                    fs::write(&state_path, serde_json::to_string(state)?)?;
                    bail!(
                        "harvest stopped after {count} records: {e}; rerun with --resume to continue from {}",
                        state_path.display()
                    );
                }
                bail!("harvest stopped after {count} records: {e}");
            }
        }
    }
    writer.flush()?;
    if state_path.exists() {
        fs::remove_file(&state_path)?;
    }
    println!(
        "{count} records written, {} broken records skipped, {} non-dataset records skipped",
        stream.record_errors().len(),
        stream.skipped_non_dataset()
    );
    Ok(())
}

fn print_stats(index: &RegistryIndex, dict: &FeatureDictionary) {
    let stats = pattern_stats(index.records().iter().map(|r| r.title.as_str()), dict);
    println!("records             {}", index.len());
    println!("duplicate DOIs      {}", index.duplicate_warnings());
    println!("abbreviations       {}", dict.abbreviations().count());
    println!("phrases             {}", dict.phrases().count());
    println!("with abbreviation   {:.2}%", 100.0 * stats.abbrev_pct);
    println!("with phrase         {:.2}%", 100.0 * stats.phrase_pct);
    println!("with both           {:.2}%", 100.0 * stats.intersection_pct);
    println!("file-name titles    {:.2}%", 100.0 * stats.filename_pct);
}

fn snapshot_info(snapshot: &Path, dict: Option<&Path>) -> Result<()> {
    let index = open_snapshot(snapshot)?;
    let dict = match dict {
        Some(dir) => read_dict(dir)?,
        None => dictionary_from(&index, FeatureDictionary::with_bundled_base_terms()),
    };
    print_stats(&index, &dict);
    Ok(())
}

fn detect(dict: &Path, articles: &Path, out: &Path) -> Result<()> {
    let dictionary = read_dict(dict)?;
    let mut writer = create(out)?;
    let mut total = 0;
    for article in read_articles(articles)? {
        let refs = find_references(&article, &dictionary);
        total += refs.len();
        write_jsonl(
            &mut writer,
            refs.iter()
                .enumerate()
                .map(|(i, r)| DetectedLine::new(i, r)),
        )?;
    }
    writer.flush()?;
    println!("{total} references");
    Ok(())
}

fn rank(
    snapshot: &Path,
    dict: &Path,
    article: &Path,
    mode: Mode,
    config: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let index = open_snapshot(snapshot)?;
    let dictionary = read_dict(dict)?;
    let config = read_config(config)?;
    let mut writer = create(out)?;
    let mut lines = 0;
    for article in read_articles(article)? {
        let refs = find_references(&article, &dictionary);
        let ranked = rank_article(&refs, &index, &article, &config);
        let batch: Vec<RankedLine> = match mode {
            Mode::PerReference => refs
                .iter()
                .zip(&ranked)
                .enumerate()
                .flat_map(|(i, (r, ms))| ms.iter().map(move |m| RankedLine::for_reference(i, r, m)))
                .collect(),
            Mode::PerFeature => aggregate_per_feature(
                refs.iter().zip(ranked.iter().map(Vec::as_slice)),
                config.top_k_feature,
            )
            .iter()
            .flat_map(|g| {
                g.matches
                    .iter()
                    .map(|m| RankedLine::for_group(&article.article_id, g, m))
            })
            .collect(),
        };
        lines += batch.len();
        write_jsonl(&mut writer, batch)?;
    }
    writer.flush()?;
    println!("{lines} ranked candidates");
    Ok(())
}

fn evaluate(
    gold: &Path,
    detected: &Path,
    ranked: Option<&Path>,
    phase: PhaseArg,
    json: Option<&Path>,
) -> Result<()> {
    let gold = GoldStandard::read(gold)
        .with_context(|| format!("reading gold standard {}", gold.display()))?;
    let detected_lines: Vec<DetectedLine> = read_jsonl(detected)?;
    let detected = detected_features(&detected_lines);
    let needs_ranked = !matches!(phase, PhaseArg::Detection);
    let ranked_lines: Vec<RankedLine> = match ranked {
        Some(p) => read_jsonl(p)?,
        None if needs_ranked => bail!("--ranked is required for the {} phase", phase_name(phase)),
        None => Vec::new(),
    };
    let items = suggestions(&detected_lines, &ranked_lines);
    let reports: Vec<EvaluationReport> = match phase {
        PhaseArg::Detection => vec![evaluate_detection(&detected, &gold)?],
        PhaseArg::Matching => vec![evaluate_matching_detected(&detected, &items, &gold)?],
        PhaseArg::Combined => vec![evaluate_combined(&detected, &items, &gold)?],
        PhaseArg::All => evaluate_all(&detected, &items, &gold)?,
    };
    print!("{}", format_table(&reports));
    if let Some(path) = json {
        fs::write(path, serde_json::to_string_pretty(&reports)?)?;
    }
    Ok(())
}

fn phase_name(phase: PhaseArg) -> &'static str {
    match phase {
        PhaseArg::Detection => Phase::Detection.as_str(),
        PhaseArg::Matching => Phase::Matching.as_str(),
        PhaseArg::Combined => Phase::Combined.as_str(),
        PhaseArg::All => "all",
    }
}
