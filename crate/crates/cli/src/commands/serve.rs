use std::io::{BufReader, BufWriter, Read, Write};
use std::net::TcpListener;

use anamorph::sync::protocol::{serve, HelloInfo};
use anamorph::Error;

use crate::backends::{build_stub, load_targets, parse_targets, target_channels, StubKind, VaeChoice};
use crate::Log;

#[derive(clap::Args, Debug)]
pub struct Args {
    /// `stdio` or `tcp://HOST:PORT` (port 0 picks a free one).
    #[arg(long, default_value = "stdio")]
    listen: String,
    #[arg(long, default_value = "target")]
    denoiser: StubKind,
    /// `PROMPT=IMAGE` targets, encoded with the stub autoencoder.
    #[arg(long = "target")]
    targets: Vec<String>,
    #[arg(long, default_value = "identity")]
    vae: VaeChoice,
    #[arg(long, default_value_t = 3)]
    channels: usize,
    /// Seed of the noise stub.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stop after the first TCP connection closes.
    #[arg(long)]
    once: bool,
}

/// Joins a read half and a write half into one stream.
struct Duplex<R, W>(R, W);

impl<R: Read, W> Read for Duplex<R, W> {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        self.0.read(buf)
    }
}

impl<R, W: Write> Write for Duplex<R, W> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.1.write(buf)
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.1.flush()
    }
}

pub fn run(args: Args, log: Log) -> anyhow::Result<()> {
    let targets = load_targets(&parse_targets(&args.targets)?)?;
    let channels = target_channels(&targets, args.channels)?;
    let vae = args.vae.build(channels);
    let denoiser = build_stub(args.denoiser, &targets, vae.as_ref(), args.seed)?;
    let info = HelloInfo {
        scale_factor: vae.scale_factor(),
        latent_channels: channels,
        schedule: None,
        serial: true,
    };

    if args.listen == "stdio" {
        log.say("serving on stdio");
        let mut stream = Duplex(BufReader::new(std::io::stdin().lock()), std::io::stdout().lock());
        return Ok(serve(&mut stream, denoiser.as_ref(), vae.as_ref(), &info)?);
    }
    let addr = args.listen.strip_prefix("tcp://").ok_or_else(|| Error::Parse {
        line: 0,
        message: format!("--listen `{}` is neither stdio nor tcp://HOST:PORT", args.listen),
    })?;
    let listener = TcpListener::bind(addr)?;
    println!("tcp://{}", listener.local_addr()?);
    std::io::stdout().flush()?;
    for conn in listener.incoming() {
        let conn = conn?;
        log.say(format_args!("connection from {}", conn.peer_addr()?));
        conn.set_nodelay(true).ok();
        let mut stream = Duplex(BufReader::new(conn.try_clone()?), BufWriter::new(conn));
        if let Err(e) = serve(&mut stream, denoiser.as_ref(), vae.as_ref(), &info) {
            log.say(format_args!("connection ended: {e}"));
        }
        if args.once {
            break;
        }
    }
    Ok(())
}
