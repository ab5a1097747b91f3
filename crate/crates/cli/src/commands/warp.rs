use std::path::PathBuf;

use anamorph::io::{read_image, write_image, write_png};
use anamorph::pyramid::{build_gaussian, default_depth};
use anamorph::uvmap::{compute_lod, read_uvm};
use anamorph::warp::{forward_warp, inverse_warp};
use anamorph::{Error, Image, SampleMode};
use serde_json::json;

use crate::Log;

#[derive(clap::Args, Debug)]
pub struct Args {
    #[arg(long)]
    map: PathBuf,
    /// Input image: the canonical image, or a view image with `--inverse`.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "nearest")]
    mode: SampleMode,
    /// Pull a view image back into the canonical frame.
    #[arg(long)]
    inverse: bool,
    /// Pyramid depth; picked from the canonical size when omitted.
    #[arg(long)]
    depth: Option<usize>,
    /// Canonical side for `--inverse`; defaults to the map width.
    #[arg(long)]
    size: Option<usize>,
    /// Directory receiving one mask PNG per level (inverse only).
    #[arg(long, requires = "inverse")]
    masks: Option<PathBuf>,
}

pub fn run(args: Args, log: Log) -> anyhow::Result<()> {
    let map = read_uvm(&args.map)?;
    let img = read_image(&args.input)?;
    if args.inverse {
        inverse(args, &map, &img, log)
    } else {
        let (w, h) = img.dims();
        if w != h {
            return Err(Error::Size(format!("canonical image must be square, got {w}x{h}")).into());
        }
        let depth = args.depth.unwrap_or_else(|| default_depth(w, h));
        let lod = compute_lod(&map, w)?;
        let out = forward_warp(&build_gaussian(&img, depth)?, &map, &lod, args.mode)?;
        write_image(&args.out, &out)?;
        log.say(format_args!("forward warp at depth {depth} ({})", args.mode.name()));
        println!("{}", json!({ "out": args.out, "depth": depth, "mode": args.mode.name() }));
        Ok(())
    }
}

fn inverse(args: Args, map: &anamorph::UvMap, img: &Image, log: Log) -> anyhow::Result<()> {
    let size = args.size.unwrap_or(map.width());
    let depth = args.depth.unwrap_or_else(|| default_depth(size, size));
    let lod = compute_lod(map, size)?;
    let pyr = inverse_warp(img, map, &lod, depth)?;
    write_image(&args.out, &pyr.preview()?)?;
    let coverage: Vec<usize> = pyr.masks().iter().map(|m| m.count()).collect();
    if let Some(dir) = &args.masks {
        std::fs::create_dir_all(dir)?;
        for (l, mask) in pyr.masks().iter().enumerate() {
            let (w, h) = mask.dims();
            let values = mask.data().iter().map(|&d| if d { 1.0 } else { -1.0 }).collect();
            write_png(dir.join(format!("mask_{l}.png")), &Image::from_vec(w, h, 1, values)?, false)?;
        }
    }
    log.say(format_args!("inverse warp at depth {depth}; defined pixels per level {coverage:?}"));
    println!(
        "{}",
        json!({ "out": args.out, "depth": depth, "size": size, "defined_per_level": coverage })
    );
    Ok(())
}
