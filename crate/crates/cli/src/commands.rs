use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{anyhow, Context};
use imgkg_core::eval::{default_columns, load_annotations, run_benchmark};
use imgkg_core::persist::{self, ExporterRegistry};
use imgkg_core::pipeline::{
    commit, load_manifest, prepare, EnrollmentConfig, EnrollmentMode, ManifestEntry, PreparedEnrollment, StrategyRegistry,
};
use imgkg_core::schema::induction::{identify_properties, induce_schema, PropertyMode};
use imgkg_core::schema::{default_schema, parse_schema, serialize_schema, PropertySchema};

use crate::config::{self, CliConfig, Role};
use crate::{BenchmarkArgs, EnrollArgs, ExportArgs, Failure, SchemaInitArgs};

fn required(flag: Option<&PathBuf>, file: Option<&PathBuf>, name: &str) -> Result<PathBuf, Failure> {
    flag.or(file)
        .cloned()
        .ok_or_else(|| Failure::Usage(format!("--{name} is required (or set `{}` in the config file)", name.replace('-', "_"))))
}

fn read_schema(path: &Path) -> Result<PropertySchema, Failure> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading schema {}", path.display()))?;
    Ok(parse_schema(&text).with_context(|| format!("schema {}", path.display()))?)
}

pub fn schema_init(args: &SchemaInitArgs, file: &CliConfig) -> Result<(), Failure> {
    let schema = if args.source.default {
        default_schema()
    } else {
        let llm_cfg = args.backend.resolve(Role::Llm, file.llm.as_ref())?;
        let llm = config::build(&imgkg_core::model_client::BackendRegistry::with_defaults(), &llm_cfg)?;
        let names = match &args.source.manual {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let seed: Vec<String> = text.lines().map(str::to_string).collect();
                identify_properties(PropertyMode::Manual, Some(&seed), None).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
            }
            None => identify_properties(PropertyMode::Auto, None, Some(llm.as_ref())).context("identifying properties")?,
        };
        tracing::info!(properties = names.len(), "typing properties");
        induce_schema(&names, llm.as_ref()).context("inducing schema")?
    };
    persist::write_atomic(&args.out, &serialize_schema(&schema)).context("writing schema")?;
    tracing::info!(path = %args.out.display(), properties = schema.len(), "schema written");
    Ok(())
}

fn enrollment_config(file: &CliConfig, mode: Option<EnrollmentMode>, depth: Option<u32>, parallel: Option<u32>) -> EnrollmentConfig {
    let mut cfg = file.enrollment.unwrap_or_default();
    if let Some(mode) = mode {
        cfg.mode = mode;
    }
    if let Some(depth) = depth {
        cfg.expansion_depth = depth;
    }
    if let Some(parallel) = parallel {
        cfg.expansion_parallel = parallel;
    }
    cfg
}

/// File-system-safe record name for a product label.
fn record_name(label: &str, taken: &mut HashSet<String>) -> String {
    let stem: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') { c } else { '_' })
        .collect();
    let stem = if stem.is_empty() { "product".to_string() } else { stem };
    let mut name = stem.clone();
    let mut n = 2;
    while !taken.insert(name.clone()) {
        name = format!("{stem}-{n}");
        n += 1;
    }
    format!("{name}.record.json")
}

/// Applies `f` to every item on up to `jobs` threads; results keep input order.
fn parallel_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, items.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = items.get(i) else { break };
                *slots[i].lock().expect("slot lock") = Some(f(item));
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().expect("slot lock").expect("every slot filled"))
        .collect()
}

pub fn enroll(args: &EnrollArgs, file: &CliConfig) -> Result<(), Failure> {
    let schema_path = required(args.schema.as_ref(), file.schema.as_ref(), "schema")?;
    let inventory_path = required(args.inventory.as_ref(), file.inventory.as_ref(), "inventory")?;
    let mut entries: Vec<ManifestEntry> = args
        .inputs
        .iter()
        .map(|p| ManifestEntry { image: p.clone(), id: None })
        .collect();
    if let Some(manifest) = &args.manifest {
        entries.extend(load_manifest(manifest).map_err(Failure::Usage)?);
    }
    if entries.is_empty() {
        return Err(Failure::Usage("no inputs; pass image paths or --manifest".into()));
    }
    let cfg = enrollment_config(file, args.mode, args.depth, args.parallel);
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let strategies = StrategyRegistry::with_defaults();
    if !strategies.get(cfg.mode.name()).is_some_and(|s| s.enrollable()) {
        return Err(Failure::Usage(format!("mode {} scores predictions only and cannot enroll", cfg.mode)));
    }
    let jobs = args.jobs.or(file.jobs).unwrap_or(1);
    if jobs == 0 {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }
    let schema = read_schema(&schema_path)?;
    let backends = config::backends(&args.backend, file)?;
    let mut inventory = persist::load_file(&inventory_path).with_context(|| format!("loading inventory {}", inventory_path.display()))?;
    let records_dir = args
        .records_dir
        .clone()
        .or_else(|| file.records_dir.clone())
        .unwrap_or_else(|| inventory_path.with_extension("records"));

    tracing::info!(products = entries.len(), jobs, mode = %cfg.mode, "enrolling");
    let prepared: Vec<Result<PreparedEnrollment, String>> = parallel_map(&entries, jobs, |entry| {
        let input = entry.read().map_err(|e| format!("{}: {e}", entry.image.display()))?;
        prepare(&input, &schema, &backends, &cfg, &strategies).map_err(|e| e.to_string())
    });

    let mut failures = Vec::new();
    let mut taken = HashSet::new();
    for (entry, outcome) in entries.iter().zip(prepared) {
        let label = entry.label();
        match outcome {
            Ok(prepared) => {
                let report = commit(&mut inventory, &prepared);
                let path = records_dir.join(record_name(&label, &mut taken));
                persist::write_atomic(&path, &prepared.record.to_json()).context("writing enrollment record")?;
                tracing::info!(
                    product = %label,
                    nodes_added = report.nodes_added,
                    edges_added = report.edges_added,
                    conflicts = report.conflicts.len(),
                    "enrolled"
                );
            }
            Err(error) => {
                tracing::error!(product = %label, %error, "enrollment failed");
                failures.push((label, error));
            }
        }
    }
    persist::save_file(&inventory, &inventory_path).context("saving inventory")?;
    println!(
        "enrolled {}/{} products; inventory has {} nodes, {} edges, {} products",
        entries.len() - failures.len(),
        entries.len(),
        inventory.node_count(),
        inventory.edge_count(),
        inventory.product_count()
    );
    if failures.is_empty() {
        return Ok(());
    }
    println!("failed:");
    for (label, error) in &failures {
        println!("  {label}: {error}");
    }
    Err(Failure::Runtime(anyhow!("{} of {} products failed", failures.len(), entries.len())))
}

pub fn benchmark(args: &BenchmarkArgs, file: &CliConfig) -> Result<(), Failure> {
    let schema_path = required(args.schema.as_ref(), file.schema.as_ref(), "schema")?;
    let modes: Vec<EnrollmentMode> = if args.modes.is_empty() { EnrollmentMode::ALL.to_vec() } else { args.modes.clone() };
    let base = enrollment_config(file, None, None, None);
    let configs: Vec<EnrollmentConfig> = modes.iter().map(|&mode| EnrollmentConfig { mode, ..base }).collect();
    for cfg in &configs {
        cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    }
    let schema = read_schema(&schema_path)?;
    let dataset = load_annotations(&args.annotations, Some(&schema)).context("loading annotations")?;
    let backends = config::backends(&args.backend, file)?;
    tracing::info!(images = dataset.len(), modes = configs.len(), "benchmarking");
    let run = run_benchmark(&dataset, &configs, &default_columns(), &schema, &backends, &StrategyRegistry::with_defaults())
        .map_err(|e| Failure::Usage(e.to_string()))?;

    let text = run.table.render_text();
    persist::write_atomic(&args.out_dir.join("metrics.json"), &run.table.to_json()).context("writing metrics")?;
    persist::write_atomic(&args.out_dir.join("metrics.txt"), &text).context("writing metrics table")?;
    let predictions: String = run
        .predictions
        .iter()
        .map(|p| serde_json::to_string(p).expect("predictions serialize") + "\n")
        .collect();
    persist::write_atomic(&args.out_dir.join("predictions.jsonl"), &predictions).context("writing predictions")?;
    print!("{text}");
    Ok(())
}

pub fn export(args: &ExportArgs, file: &CliConfig) -> Result<(), Failure> {
    let inventory_path = required(args.inventory.as_ref(), file.inventory.as_ref(), "inventory")?;
    let registry = ExporterRegistry::with_defaults();
    let exporter = registry.get(&args.format).ok_or_else(|| {
        Failure::Usage(format!("unknown format {:?}; expected one of {}", args.format, registry.names().join(", ")))
    })?;
    if !inventory_path.exists() {
        return Err(Failure::Runtime(anyhow!("inventory {} does not exist", inventory_path.display())));
    }
    let graph = persist::load_file(&inventory_path).with_context(|| format!("loading inventory {}", inventory_path.display()))?;
    let text = exporter.export(&graph);
    match &args.out {
        Some(path) => {
            persist::write_atomic(path, &text).context("writing export")?;
            tracing::info!(path = %path.display(), format = exporter.name(), "exported");
        }
        None => print!("{text}"),
    }
    Ok(())
}
