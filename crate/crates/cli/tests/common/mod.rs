#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hamflow::landscape::{write_field_binary, write_pgm};
use hamflow::ScalarField;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hamflow"))
}

pub fn hamflow(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn blob(x: f64, y: f64, cx: f64, cy: f64, sx: f64, sy: f64) -> f64 {
    (-((x - cx) / sx).powi(2) / 2.0 - ((y - cy) / sy).powi(2) / 2.0).exp()
}

/// Bright oval with two dark eyes and a dark mouth, jittered and lightly noised.
pub fn face(w: usize, h: usize, rng: &mut ChaCha8Rng) -> ScalarField<f64> {
    let (fw, fh) = (w as f64, h as f64);
    let dx = rng.gen_range(-0.5..0.5);
    let dy = rng.gen_range(-0.5..0.5);
    let gain = rng.gen_range(0.9..1.1);
    let noise: Vec<f64> = (0..w * h).map(|_| rng.gen_range(-3.0..3.0)).collect();
    ScalarField::from_fn(w, h, |c, r| {
        let (x, y) = (c as f64 - dx, r as f64 - dy);
        let head = blob(x, y, fw / 2.0, fh / 2.0, fw / 4.0, fh / 3.5);
        let eyes = blob(x, y, fw * 0.33, fh * 0.4, fw / 14.0, fh / 14.0) + blob(x, y, fw * 0.67, fh * 0.4, fw / 14.0, fh / 14.0);
        let mouth = blob(x, y, fw / 2.0, fh * 0.72, fw / 7.0, fh / 18.0);
        let v = 40.0 + gain * (170.0 * head - 90.0 * eyes - 70.0 * mouth) + noise[r * w + c];
        v.round().clamp(0.0, 255.0)
    })
    .unwrap()
}

/// A few random blobs on a tilted ramp.
pub fn clutter(w: usize, h: usize, rng: &mut ChaCha8Rng) -> ScalarField<f64> {
    let (fw, fh) = (w as f64, h as f64);
    let blobs: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| (rng.gen_range(0.0..fw), rng.gen_range(0.0..fh), rng.gen_range(2.0..fw / 3.0), rng.gen_range(-120.0..120.0)))
        .collect();
    let (gx, gy) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
    let base = rng.gen_range(60.0..180.0);
    ScalarField::from_fn(w, h, |c, r| {
        let (x, y) = (c as f64, r as f64);
        let mut v = base + gx * (x - fw / 2.0) + gy * (y - fh / 2.0);
        for &(cx, cy, s, a) in &blobs {
            v += a * blob(x, y, cx, cy, s, s);
        }
        v.round().clamp(0.0, 255.0)
    })
    .unwrap()
}

pub struct Dataset {
    pub manifest: PathBuf,
    pub width: usize,
    pub height: usize,
}

/// Writes PGMs and a manifest with the given per-(label, split) counts.
pub fn synthetic_dataset(dir: &Path, w: usize, h: usize, train: (usize, usize), test: (usize, usize), seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut csv = String::from("path,label,split\n");
    let mut emit = |name: String, img: &ScalarField<f64>, label: &str, split: &str| {
        write_pgm(img, dir.join(&name)).unwrap();
        csv.push_str(&format!("{name},{label},{split}\n"));
    };
    for (split, (faces, others)) in [("train", train), ("test", test)] {
        for i in 0..faces {
            emit(format!("{split}_face_{i}.pgm"), &face(w, h, &mut rng), "face", split);
        }
        for i in 0..others {
            emit(format!("{split}_clutter_{i}.pgm"), &clutter(w, h, &mut rng), "nonface", split);
        }
    }
    let manifest = dir.join("manifest.csv");
    std::fs::write(&manifest, csv).unwrap();
    Dataset { manifest, width: w, height: h }
}

/// Manifest over exact field caches, for images that are not integer valued.
pub fn field_manifest(dir: &Path, items: &[(ScalarField<f64>, &str, &str)]) -> PathBuf {
    let mut csv = String::from("path,label,split\n");
    for (i, (img, label, split)) in items.iter().enumerate() {
        let name = format!("item_{i:04}.bin");
        write_field_binary(img, dir.join(&name)).unwrap();
        csv.push_str(&format!("{name},{label},{split}\n"));
    }
    let p = dir.join("fields.csv");
    std::fs::write(&p, csv).unwrap();
    p
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}
