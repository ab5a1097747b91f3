//! Backend selection shared by `sync` and `serve-stub`.

use std::collections::BTreeMap;
use std::str::FromStr;

use anamorph::io::read_image;
use anamorph::sync::protocol::{BridgeClient, HelloInfo};
use anamorph::sync::{
    BlurDenoiser, Denoiser, IdentityVae, LossyVae, NoiseDenoiser, PoolVae, TargetDenoiser, Vae,
};
use anamorph::{Error, Image};

fn bad(message: String) -> Error {
    Error::Parse { line: 0, message }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VaeChoice {
    Identity,
    Lossy(usize),
    Pool(usize),
}

impl FromStr for VaeChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let factor = |v: &str| {
            v.parse::<usize>()
                .ok()
                .filter(|k| *k > 0)
                .ok_or_else(|| bad(format!("bad autoencoder factor in `{s}`")))
        };
        match s.split_once(':') {
            None if s == "identity" => Ok(Self::Identity),
            Some(("lossy", k)) => Ok(Self::Lossy(factor(k)?)),
            Some(("pool", k)) => Ok(Self::Pool(factor(k)?)),
            _ => Err(bad(format!("unknown autoencoder `{s}` (identity, lossy:K, pool:F)"))),
        }
    }
}

impl std::fmt::Display for VaeChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Identity => write!(f, "identity"),
            Self::Lossy(k) => write!(f, "lossy:{k}"),
            Self::Pool(k) => write!(f, "pool:{k}"),
        }
    }
}

impl VaeChoice {
    pub fn build(self, channels: usize) -> Box<dyn Vae> {
        match self {
            Self::Identity => Box::new(IdentityVae { channels }),
            Self::Lossy(k) => Box::new(LossyVae { k, channels }),
            Self::Pool(factor) => Box::new(PoolVae { factor, channels }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StubKind {
    Target,
    Blur,
    Noise,
}

impl FromStr for StubKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "target" => Ok(Self::Target),
            "blur" => Ok(Self::Blur),
            "noise" => Ok(Self::Noise),
            other => Err(bad(format!("unknown stub denoiser `{other}` (target, blur, noise)"))),
        }
    }
}

/// Where velocities come from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BackendSpec {
    Stub(StubKind),
    Tcp(String),
    /// Program and arguments of a child speaking the protocol on stdio.
    Stdio(Vec<String>),
}

impl FromStr for BackendSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        if let Some(kind) = s.strip_prefix("stub:") {
            return Ok(Self::Stub(kind.parse()?));
        }
        if let Some(addr) = s.strip_prefix("bridge:tcp://") {
            return Ok(Self::Tcp(addr.to_string()));
        }
        if let Some(cmd) = s.strip_prefix("bridge:stdio:") {
            let argv: Vec<String> = cmd.split_whitespace().map(str::to_string).collect();
            if argv.is_empty() {
                return Err(bad("bridge:stdio: needs a command".into()));
            }
            return Ok(Self::Stdio(argv));
        }
        Err(bad(format!(
            "unknown backend `{s}` (stub:target|blur|noise, bridge:tcp://HOST:PORT, bridge:stdio:CMD)"
        )))
    }
}

/// `PROMPT=FILE` pairs.
pub fn parse_targets(pairs: &[String]) -> Result<BTreeMap<String, String>, Error> {
    let mut out = BTreeMap::new();
    for pair in pairs {
        let (prompt, path) = pair
            .split_once('=')
            .ok_or_else(|| bad(format!("target `{pair}` is not PROMPT=FILE")))?;
        if out.insert(prompt.to_string(), path.to_string()).is_some() {
            return Err(bad(format!("target for `{prompt}` given twice")));
        }
    }
    Ok(out)
}

pub fn load_targets(targets: &BTreeMap<String, String>) -> anyhow::Result<Vec<(String, Image)>> {
    targets
        .iter()
        .map(|(prompt, path)| {
            let img = read_image(path)
                .map_err(|e| anyhow::Error::new(e).context(format!("reading target {path}")))?;
            Ok((prompt.clone(), img))
        })
        .collect()
}

/// Latent channel count implied by the targets, or `fallback`.
pub fn target_channels(targets: &[(String, Image)], fallback: usize) -> anyhow::Result<usize> {
    match targets.first() {
        None => Ok(fallback),
        Some((_, first)) => {
            if targets.iter().any(|(_, t)| t.channels() != first.channels()) {
                return Err(bad("target images differ in channel count".into()).into());
            }
            Ok(first.channels())
        }
    }
}

pub fn build_stub(
    kind: StubKind,
    targets: &[(String, Image)],
    vae: &dyn Vae,
    seed: u64,
) -> anyhow::Result<Box<dyn Denoiser>> {
    Ok(match kind {
        StubKind::Target => {
            let mut d = TargetDenoiser::new();
            for (prompt, img) in targets {
                d.insert(prompt, vae.encode(img)?);
            }
            Box::new(d)
        }
        StubKind::Blur => Box::new(BlurDenoiser),
        StubKind::Noise => Box::new(NoiseDenoiser { seed }),
    })
}

/// A connected backend with its capabilities.
pub struct Connected {
    pub denoiser: Box<dyn Denoiser>,
    pub vae: Box<dyn Vae>,
    pub hello: Option<HelloInfo>,
}

pub fn connect(spec: &BackendSpec) -> anyhow::Result<Connected> {
    match spec {
        BackendSpec::Tcp(addr) => {
            let client = std::sync::Arc::new(BridgeClient::connect_tcp(addr)?);
            Ok(shared(client))
        }
        BackendSpec::Stdio(argv) => {
            let client = std::sync::Arc::new(BridgeClient::spawn(&argv[0], &argv[1..])?);
            Ok(shared(client))
        }
        BackendSpec::Stub(_) => unreachable!("stubs are built in-process"),
    }
}

fn shared<S>(client: std::sync::Arc<BridgeClient<S>>) -> Connected
where
    S: std::io::Read + std::io::Write + Send + 'static,
{
    let hello = client.info().clone();
    Connected {
        denoiser: Box::new(Shared(client.clone())),
        vae: Box::new(Shared(client)),
        hello: Some(hello),
    }
}

/// One client serving as both denoiser and autoencoder.
struct Shared<S>(std::sync::Arc<BridgeClient<S>>);

impl<S: std::io::Read + std::io::Write + Send> Denoiser for Shared<S> {
    fn velocity(
        &self,
        z: &anamorph::LatentTensor,
        t: f32,
        prompt_id: &str,
    ) -> anamorph::Result<anamorph::LatentTensor> {
        self.0.velocity(z, t, prompt_id)
    }

    fn is_serial(&self) -> bool {
        Denoiser::is_serial(self.0.as_ref())
    }
}

impl<S: std::io::Read + std::io::Write + Send> Vae for Shared<S> {
    fn encode(&self, x: &Image) -> anamorph::Result<anamorph::LatentTensor> {
        self.0.encode(x)
    }

    fn decode(&self, z: &anamorph::LatentTensor) -> anamorph::Result<Image> {
        self.0.decode(z)
    }

    fn scale_factor(&self) -> usize {
        self.0.scale_factor()
    }

    fn latent_channels(&self) -> usize {
        self.0.latent_channels()
    }

    fn is_serial(&self) -> bool {
        Vae::is_serial(self.0.as_ref())
    }
}
