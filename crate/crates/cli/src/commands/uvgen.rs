use std::path::PathBuf;

use anamorph::io::{read_image, write_image};
use anamorph::uvmap::write_uvm;
use anamorph::views::{render_validation, trace_view};
use anamorph::{Error, ViewScene};
use anyhow::Context;
use serde_json::json;

use super::file_sha256;
use crate::Log;

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Scene description (key = value lines).
    #[arg(long)]
    scene: PathBuf,
    /// Side of the square view map; defaults to the scene's `resolution`.
    #[arg(long)]
    size: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    /// Canonical image to render through the view.
    #[arg(long, requires = "render_out")]
    render: Option<PathBuf>,
    #[arg(long, requires = "render")]
    render_out: Option<PathBuf>,
}

pub fn run(args: Args, log: Log) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&args.scene)
        .with_context(|| format!("reading {}", args.scene.display()))?;
    let scene = ViewScene::parse(&text)?;
    let size = args.size.or(scene.resolution).ok_or_else(|| Error::Parse {
        line: 0,
        message: "no --size given and the scene sets no resolution".into(),
    })?;
    let map = trace_view(&scene, size)?;
    write_uvm(&map, &args.out)?;
    log.say(format_args!(
        "{} view {size}x{size}: {} of {} pixels valid",
        scene.kind.name(),
        map.valid_count(),
        size * size
    ));
    if let (Some(canonical), Some(out)) = (&args.render, &args.render_out) {
        let img = read_image(canonical)?;
        write_image(out, &render_validation(&scene, &img, size)?)?;
        log.say(format_args!("rendered {}", out.display()));
    }
    println!(
        "{}",
        json!({
            "map": args.out,
            "kind": scene.kind.name(),
            "size": size,
            "valid_pixels": map.valid_count(),
            "sha256": file_sha256(&args.out)?,
        })
    );
    Ok(())
}
