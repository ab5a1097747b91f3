use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

use anamorph::io::{read_image, write_png};
use anamorph::uvmap::read_uvm;
use anamorph::Image;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_anamorph"))
}

fn run(args: &[&str]) -> Output {
    bin().arg("-q").args(args).output().expect("spawn anamorph")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn smooth(n: usize, phase: f32) -> Image {
    Image::from_fn(n, n, 3, |x, y, c| {
        let (u, v) = (x as f32 / n as f32, y as f32 / n as f32);
        0.8 * (3.0 * u + 2.0 * v + phase + c as f32).sin()
    })
}

fn save(dir: &Path, name: &str, img: &Image) -> PathBuf {
    let p = dir.join(name);
    write_png(&p, img, true).unwrap();
    p
}

fn mean_abs(a: &Image, b: &Image, keep: impl Fn(usize, usize) -> bool) -> f32 {
    let (mut sum, mut n) = (0.0f64, 0usize);
    for y in 0..a.height() {
        for x in 0..a.width() {
            if keep(x, y) {
                for c in 0..a.channels() {
                    sum += (a.get(x, y, c) - b.get(x, y, c)).abs() as f64;
                    n += 1;
                }
            }
        }
    }
    (sum / n as f64) as f32
}

const QUANT: f32 = 2.0 / 65535.0;

#[test]
fn flip_warp_is_an_involution() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let scene = write(d, "flip.scene", "kind = flip\n");
    let map = d.join("flip.uvm");
    ok(&["uvgen", "--scene", s(&scene), "--size", "32", "--out", s(&map)]);
    let a = save(d, "a.png", &smooth(32, 0.0));
    let (once, twice) = (d.join("once.png"), d.join("twice.png"));
    ok(&["warp", "--map", s(&map), "--in", s(&a), "--out", s(&once)]);
    ok(&["warp", "--map", s(&map), "--in", s(&once), "--out", s(&twice)]);
    let (orig, flipped) = (read_image(&a).unwrap(), read_image(&once).unwrap());
    assert_eq!(read_image(&twice).unwrap().data(), orig.data());
    assert_eq!(flipped.get(3, 0, 1), orig.get(3, 31, 1));
}

#[test]
fn cone_map_is_identity_outside_the_mirror() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write(dir.path(), "cone.scene", "kind = cone\n");
    let map_path = dir.path().join("cone.uvm");
    let n = 64;
    ok(&["uvgen", "--scene", s(&scene), "--size", "64", "--out", s(&map_path)]);
    let map = read_uvm(&map_path).unwrap();
    let mut checked = 0;
    for y in 0..n {
        for x in 0..n {
            let (px, py) = ((x as f32 + 0.5) / n as f32, (y as f32 + 0.5) / n as f32);
            if ((px - 0.5).powi(2) + (py - 0.5).powi(2)).sqrt() > 0.3 + 2.0 / n as f32 {
                let (u, v) = map.get(x, y).expect("exterior pixel is valid");
                assert!((u - px).abs() <= 1e-6 && (v - py).abs() <= 1e-6);
                checked += 1;
            }
        }
    }
    assert!(checked > 1000);
}

#[test]
fn uvm_bytes_are_stable() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let scene = write(d, "lens.scene", "kind = lens\nresolution = 48\n");
    let (a, b) = (d.join("a.uvm"), d.join("b.uvm"));
    let out_a = ok(&["uvgen", "--scene", s(&scene), "--out", s(&a)]);
    let out_b = ok(&["uvgen", "--scene", s(&scene), "--out", s(&b)]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let hash = |o: &str| serde_json::from_str::<serde_json::Value>(o).unwrap()["sha256"].clone();
    assert_eq!(hash(&out_a), hash(&out_b));
}

#[test]
fn uvgen_render_writes_an_image() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let scene = write(d, "cyl.scene", "kind = cylinder\n");
    let canon = save(d, "c.png", &smooth(64, 1.0));
    let (map, render) = (d.join("c.uvm"), d.join("r.png"));
    ok(&[
        "uvgen", "--scene", s(&scene), "--size", "32", "--out", s(&map),
        "--render", s(&canon), "--render-out", s(&render),
    ]);
    assert_eq!(read_image(&render).unwrap().dims(), (32, 32));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = d.join("x.uvm");
    let unknown = write(d, "u.scene", "kind = hyperboloid\n");
    let bad_key = write(d, "k.scene", "kind = cone\nradius = 3\n");
    let steep = write(d, "g.scene", "kind = cone\napex_half_angle = 60\n");
    let thin = write(d, "t.scene", "kind = lens\nrefractive_index = 0.5\n");
    assert_eq!(code(&["uvgen", "--scene", s(&unknown), "--size", "8", "--out", s(&out)]), 2);
    assert_eq!(code(&["uvgen", "--scene", s(&bad_key), "--size", "8", "--out", s(&out)]), 2);
    assert_eq!(code(&["uvgen", "--scene", s(&steep), "--size", "8", "--out", s(&out)]), 3);
    assert_eq!(code(&["uvgen", "--scene", s(&thin), "--size", "8", "--out", s(&out)]), 3);

    let junk = write(d, "junk.uvm", "UVM1 but not really");
    let img = save(d, "i.png", &smooth(8, 0.0));
    let y = d.join("y.png");
    assert_eq!(code(&["warp", "--map", s(&junk), "--in", s(&img), "--out", s(&y)]), 2);
    let not_png = write(d, "n.png", "nope");
    let flip = write(d, "f.scene", "kind = flip\n");
    let fmap = d.join("f.uvm");
    ok(&["uvgen", "--scene", s(&flip), "--size", "8", "--out", s(&fmap)]);
    assert_eq!(code(&["warp", "--map", s(&fmap), "--in", s(&not_png), "--out", s(&y)]), 2);

    let cfg = write(d, "cfg.txt", "steps = 4\n");
    let bad_cfg = write(d, "bad.txt", "steps = many\n");
    let sync = |cfg: &Path, backend: &str, view: &str| {
        code(&[
            "sync", "--config", s(cfg), "--views", view, "--backend", backend,
            "--canonical", "8", "--channels", "1", "--out-dir", s(&d.join("o")),
        ])
    };
    assert_eq!(sync(&bad_cfg, "stub:blur", "identity:p"), 2);

    // nothing listens on a port we just released
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    assert_eq!(sync(&cfg, &format!("bridge:tcp://127.0.0.1:{port}"), "identity:p"), 4);
    assert_eq!(sync(&cfg, "bridge:stdio:true", "identity:p"), 4);

    // a stub bridge with no target for prompt `p` fails on the first velocity
    let stub = format!("bridge:stdio:{} -q serve-stub --channels 1", env!("CARGO_BIN_EXE_anamorph"));
    assert_eq!(sync(&cfg, &stub, "identity:p"), 5);
    assert_eq!(sync(&cfg, &stub, "identity:"), 0);
}

fn sync_run(dir: &Path, out: &str, extra: &[&str]) -> (PathBuf, serde_json::Value) {
    let out_dir = dir.join(out);
    let mut args = vec!["sync", "--out-dir", s(&out_dir)];
    args.extend_from_slice(extra);
    let stdout = ok(&args);
    let manifest_path = PathBuf::from(stdout.trim());
    assert_eq!(manifest_path, out_dir.join("manifest.json"));
    let manifest = serde_json::from_str(&std::fs::read_to_string(&manifest_path).unwrap()).unwrap();
    (out_dir, manifest)
}

fn hashes(manifest: &serde_json::Value) -> Vec<String> {
    manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| o["sha256"].as_str().unwrap().to_string())
        .collect()
}

#[test]
fn identity_view_reproduces_its_target() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let target_img = smooth(32, 0.4);
    let target = save(d, "t.png", &target_img);
    let cfg = write(d, "cfg.txt", "steps = 30\ntravel_repeats = 1\n");
    let targ = format!("cat={}", s(&target));
    let (out, manifest) = sync_run(d, "o", &[
        "--config", s(&cfg), "--views", "identity:cat", "--backend", "stub:target",
        "--target", &targ,
    ]);
    let got = read_image(out.join("view0.png")).unwrap();
    assert!(got.max_abs_diff(&target_img) <= 1e-3);
    assert_eq!(manifest["steps"].as_array().unwrap().len(), 30);
    assert_eq!(manifest["seed"], 0);
}

#[test]
fn seeds_fix_outputs_and_manifests_replay() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let flip = write(d, "f.scene", "kind = flip\n");
    let map = d.join("f.uvm");
    ok(&["uvgen", "--scene", s(&flip), "--size", "16", "--out", s(&map)]);
    let cfg = write(d, "cfg.txt", "steps = 6\nseed = 3\n");
    let fview = format!("{}:up", s(&map));
    let base = [
        "--config", s(&cfg), "--views", "identity:down", fview.as_str(),
        "--backend", "stub:noise", "--channels", "2",
    ];
    let (_, m1) = sync_run(d, "a", &base);
    let (_, m2) = sync_run(d, "b", &base);
    assert_eq!(hashes(&m1), hashes(&m2));
    assert_eq!(hashes(&m1).len(), 2);

    let mut other = base.to_vec();
    other.extend(["--seed", "4"]);
    let (_, m3) = sync_run(d, "c", &other);
    assert_ne!(hashes(&m1), hashes(&m3));
    assert_eq!(m3["spec"]["config"]["seed"], 4);

    let manifest = d.join("a").join("manifest.json");
    let (_, replayed) = sync_run(d, "r", &["--replay", s(&manifest)]);
    assert_eq!(hashes(&replayed), hashes(&m1));
    assert_eq!(replayed["spec"], m1["spec"]);
}

#[test]
fn two_identity_views_meet_at_the_mean() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (a_img, b_img) = (smooth(16, 0.0), smooth(16, 2.0));
    let a = format!("a={}", s(&save(d, "a.png", &a_img)));
    let b = format!("b={}", s(&save(d, "b.png", &b_img)));
    let cfg = write(d, "cfg.txt", "steps = 30\nalpha = 0\ntravel_repeats = 1\n");
    let (out, _) = sync_run(d, "o", &[
        "--config", s(&cfg), "--views", "identity:a", "identity:b", "--backend", "stub:target",
        "--target", &a, "--target", &b,
    ]);
    let mean = a_img.add(&b_img).scale(0.5);
    for i in 0..2 {
        let got = read_image(out.join(format!("view{i}.png"))).unwrap();
        assert!(got.max_abs_diff(&mean) <= 1e-3 + QUANT);
    }
}

struct Server(Child, String);

impl Drop for Server {
    fn drop(&mut self) {
        self.0.kill().ok();
        self.0.wait().ok();
    }
}

fn tcp_stub(args: &[&str]) -> Server {
    let mut child = bin()
        .args(["-q", "serve-stub", "--listen", "tcp://127.0.0.1:0", "--once"])
        .args(args)
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    Server(child, line.trim().to_string())
}

#[test]
fn tcp_bridge_matches_in_process_stub() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let rot = write(d, "r.scene", "kind = rotate\ndegrees = 90\n");
    let map = d.join("r.uvm");
    ok(&["uvgen", "--scene", s(&rot), "--size", "16", "--out", s(&map)]);
    let a = format!("a={}", s(&save(d, "a.png", &smooth(16, 0.0))));
    let b = format!("b={}", s(&save(d, "b.png", &smooth(16, 1.5))));
    let rview = format!("{}:b", s(&map));
    let cfg = write(d, "cfg.txt", "steps = 8\nseed = 11\n");
    let common = ["--config", s(&cfg), "--views", "identity:a", rview.as_str()];

    let mut local = common.to_vec();
    local.extend(["--backend", "stub:target", "--target", &a, "--target", &b, "--vae", "lossy:2"]);
    let (_, m_local) = sync_run(d, "local", &local);

    let server = tcp_stub(&["--target", &a, "--target", &b, "--vae", "lossy:2"]);
    let backend = format!("bridge:{}", server.1);
    let mut remote = common.to_vec();
    remote.extend(["--backend", backend.as_str()]);
    let (_, m_remote) = sync_run(d, "remote", &remote);
    assert_eq!(hashes(&m_local), hashes(&m_remote));
    assert_eq!(m_remote["backend_hello"]["latent_channels"], 3);
}

#[test]
fn inverse_warp_of_identity_round_trips_and_writes_masks() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let scene = write(d, "i.scene", "kind = identity\n");
    let map = d.join("i.uvm");
    ok(&["uvgen", "--scene", s(&scene), "--size", "32", "--out", s(&map)]);
    let img = smooth(32, 0.7);
    let x = save(d, "x.png", &img);
    let (y, masks) = (d.join("y.png"), d.join("masks"));
    let stdout = ok(&[
        "warp", "--map", s(&map), "--in", s(&x), "--out", s(&y), "--inverse", "--depth", "3",
        "--masks", s(&masks),
    ]);
    let info: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(info["defined_per_level"], serde_json::json!([1024, 256, 64]));
    assert!(read_image(&y).unwrap().max_abs_diff(&read_image(&x).unwrap()) <= 1e-5);
    for l in 0..3 {
        let m = read_image(masks.join(format!("mask_{l}.png"))).unwrap();
        assert!(m.data().iter().all(|&v| v == 1.0));
    }
}

#[test]
fn cone_forward_then_inverse_keeps_the_ring() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let scene = write(d, "cone.scene", "kind = cone\n");
    let map_path = d.join("cone.uvm");
    ok(&["uvgen", "--scene", s(&scene), "--size", "64", "--out", s(&map_path)]);
    let canon_img = smooth(64, 0.3);
    let canon = save(d, "c.png", &canon_img);
    let (view, back) = (d.join("v.bin"), d.join("back.bin"));
    ok(&["warp", "--map", s(&map_path), "--in", s(&canon), "--out", s(&view), "--depth", "4"]);
    ok(&[
        "warp", "--map", s(&map_path), "--in", s(&view), "--out", s(&back), "--inverse",
        "--depth", "4",
    ]);
    let map = read_uvm(&map_path).unwrap();
    let mut hit = vec![false; 64 * 64];
    for y in 0..64 {
        for x in 0..64 {
            if let Some((u, v)) = map.get(x, y) {
                let (i, j) = ((u * 64.0) as usize, (v * 64.0) as usize);
                hit[j.min(63) * 64 + i.min(63)] = true;
            }
        }
    }
    let back_img = read_image(&back).unwrap();
    let err = mean_abs(&back_img, &canon_img, |x, y| hit[y * 64 + x]);
    assert!(err < 0.05, "mean abs {err}");
}
