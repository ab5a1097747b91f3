use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anamorph::io::write_image;
use anamorph::pyramid::default_depth;
use anamorph::sync::protocol::HelloInfo;
use anamorph::sync::{run_sync, StepEvent, View, ViewBundle};
use anamorph::uvmap::read_uvm;
use anamorph::{Error, SyncConfig, UvMap};
use anyhow::Context;
use serde::{Deserialize, Serialize};

use super::file_sha256;
use crate::backends::{
    build_stub, connect, load_targets, parse_targets, target_channels, BackendSpec, Connected,
    VaeChoice,
};
use crate::Log;

pub const MANIFEST_FORMAT: &str = "anamorph-run/1";

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Sampler settings (key = value lines).
    #[arg(long, required_unless_present = "replay")]
    config: Option<PathBuf>,
    /// `MAP:PROMPT` per view; MAP is a UVM1 file or `identity`.
    #[arg(long, num_args = 1.., required_unless_present = "replay")]
    views: Vec<String>,
    /// stub:target|blur|noise, bridge:tcp://HOST:PORT or bridge:stdio:CMD
    #[arg(long, required_unless_present = "replay")]
    backend: Option<String>,
    /// `PROMPT=IMAGE` targets for the target stub.
    #[arg(long = "target")]
    targets: Vec<String>,
    /// Stub autoencoder: identity, lossy:K or pool:F.
    #[arg(long, default_value = "identity")]
    vae: VaeChoice,
    /// Stub latent channels when no target images fix them.
    #[arg(long, default_value_t = 3)]
    channels: usize,
    /// Canonical image side; defaults to the larger side of the view maps.
    #[arg(long)]
    canonical: Option<usize>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Rerun everything recorded in a previous run's manifest.
    #[arg(long, conflicts_with_all = ["config", "views", "backend", "targets", "seed"])]
    replay: Option<PathBuf>,
}

/// Everything needed to repeat a run.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RunSpec {
    pub config: SyncConfig,
    pub views: Vec<ViewSpec>,
    pub backend: String,
    pub targets: BTreeMap<String, String>,
    pub vae: String,
    pub channels: usize,
    pub canonical: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ViewSpec {
    pub map: String,
    pub prompt: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub seed: u64,
    pub spec: RunSpec,
    pub canonical_size: usize,
    pub depth: usize,
    pub backend_hello: Option<HelloInfo>,
    pub steps: Vec<StepEvent>,
    pub total_ms: f64,
    pub outputs: Vec<OutputRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct OutputRecord {
    pub view: usize,
    pub prompt: String,
    pub file: String,
    pub sha256: String,
}

fn bad(message: String) -> Error {
    Error::Parse { line: 0, message }
}

/// Absolute form of a path so manifests replay from any directory.
fn absolute(path: &str) -> String {
    std::path::absolute(path)
        .map(|p| p.display().to_string())
        .unwrap_or_else(|_| path.to_string())
}

fn spec_from_args(args: &Args) -> anyhow::Result<RunSpec> {
    let config_path = args.config.as_ref().expect("clap requires --config");
    let text = std::fs::read_to_string(config_path)
        .with_context(|| format!("reading {}", config_path.display()))?;
    let mut config = SyncConfig::parse(&text)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let views = args
        .views
        .iter()
        .map(|v| {
            let (map, prompt) = v
                .split_once(':')
                .ok_or_else(|| bad(format!("view `{v}` is not MAP:PROMPT")))?;
            let map = if map == "identity" { map.to_string() } else { absolute(map) };
            Ok(ViewSpec { map, prompt: prompt.to_string() })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let targets = parse_targets(&args.targets)?
        .into_iter()
        .map(|(p, path)| (p, absolute(&path)))
        .collect();
    Ok(RunSpec {
        config,
        views,
        backend: args.backend.clone().expect("clap requires --backend"),
        targets,
        vae: args.vae.to_string(),
        channels: args.channels,
        canonical: args.canonical,
    })
}

/// View maps plus the canonical side: `--canonical`, else the largest map,
/// else `fallback`.
fn load_maps(spec: &RunSpec, fallback: Option<usize>) -> anyhow::Result<(Vec<UvMap>, usize)> {
    let files: Vec<Option<UvMap>> = spec
        .views
        .iter()
        .map(|v| {
            if v.map == "identity" {
                Ok(None)
            } else {
                read_uvm(&v.map)
                    .map(Some)
                    .map_err(|e| anyhow::Error::new(e).context(format!("reading {}", v.map)))
            }
        })
        .collect::<anyhow::Result<_>>()?;
    let from_files = files.iter().flatten().map(|m| m.width().max(m.height())).max();
    let canonical = spec.canonical.or(from_files).or(fallback).ok_or_else(|| {
        bad("all views are `identity`; pass --canonical to fix the image size".into())
    })?;
    let maps = files
        .into_iter()
        .map(|m| m.unwrap_or_else(|| UvMap::identity(canonical)))
        .collect();
    Ok((maps, canonical))
}

pub fn run(args: Args, log: Log) -> anyhow::Result<()> {
    let spec = match &args.replay {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let manifest: Manifest = serde_json::from_str(&text)
                .map_err(|e| bad(format!("manifest {}: {e}", path.display())))?;
            if manifest.format != MANIFEST_FORMAT {
                return Err(bad(format!("unsupported manifest format `{}`", manifest.format)).into());
            }
            manifest.spec
        }
        None => spec_from_args(&args)?,
    };
    execute(spec, &args.out_dir, log)
}

fn execute(mut spec: RunSpec, out_dir: &Path, log: Log) -> anyhow::Result<()> {
    let backend: BackendSpec = spec.backend.parse()?;
    let vae_choice: VaeChoice = spec.vae.parse()?;
    let targets = match backend {
        BackendSpec::Stub(_) => load_targets(&spec.targets)?,
        _ => Vec::new(),
    };
    let target_side = targets.first().map(|(_, t)| t.width().max(t.height()));
    let (maps, canonical) = load_maps(&spec, target_side)?;

    let Connected { denoiser, vae, hello } = match &backend {
        BackendSpec::Stub(kind) => {
            let channels = target_channels(&targets, spec.channels)?;
            spec.channels = channels;
            let vae = vae_choice.build(channels);
            let denoiser = build_stub(*kind, &targets, vae.as_ref(), spec.config.seed)?;
            Connected { denoiser, vae, hello: None }
        }
        bridge => {
            let connected = connect(bridge)?;
            if let Some(info) = &connected.hello {
                log.say(format_args!(
                    "backend: scale factor {}, {} latent channels",
                    info.scale_factor, info.latent_channels
                ));
                if spec.config.schedule.is_none() {
                    spec.config.schedule = info.schedule.clone();
                }
            }
            connected
        }
    };

    let depth = spec.config.depth.unwrap_or_else(|| default_depth(canonical, canonical));
    let views = maps
        .into_iter()
        .zip(&spec.views)
        .map(|(map, v)| View::new(map, v.prompt.clone()))
        .collect();
    let bundle = ViewBundle::new(views, canonical, depth, vae.scale_factor())?;
    log.say(format_args!(
        "{} views, canonical {canonical}x{canonical}, depth {depth}, seed {}",
        bundle.len(),
        spec.config.seed
    ));

    let start = Instant::now();
    let mut on_step = |e: &StepEvent| {
        log.say(format_args!(
            "step {:>3} pass {} t {:.3} -> {:.3} {:.1} ms{}",
            e.step,
            e.repeat,
            e.t,
            e.t_next,
            e.elapsed_ms,
            if e.prioritized { " (priority view)" } else { "" }
        ))
    };
    let output = run_sync(&bundle, denoiser.as_ref(), vae.as_ref(), &spec.config, &mut on_step)?;
    let total_ms = start.elapsed().as_secs_f64() * 1e3;

    std::fs::create_dir_all(out_dir)?;
    let mut outputs = Vec::new();
    for (i, img) in output.images.iter().enumerate() {
        let file = format!("view{i}.png");
        let path = out_dir.join(&file);
        write_image(&path, img)?;
        outputs.push(OutputRecord {
            view: i,
            prompt: spec.views[i].prompt.clone(),
            sha256: file_sha256(&path)?,
            file,
        });
    }
    let manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        seed: spec.config.seed,
        spec,
        canonical_size: canonical,
        depth,
        backend_hello: hello,
        steps: output.events,
        total_ms,
        outputs,
    };
    let manifest_path = out_dir.join("manifest.json");
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;
    log.say(format_args!("done in {total_ms:.0} ms"));
    println!("{}", manifest_path.display());
    Ok(())
}
