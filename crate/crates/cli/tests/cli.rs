mod common;

use common::*;
use hamflow::landscape::{load_scalar_field, write_pgm};
use hamflow::streamline::orbits_from_json;
use hamflow::ScalarField;

fn bowl(n: usize) -> ScalarField<f64> {
    let c = (n / 2) as f64;
    ScalarField::from_fn(n, n, |x, y| ((x as f64 - c).powi(2) + (y as f64 - c).powi(2)) / 4.0).unwrap()
}

fn read(path: &std::path::Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(hamflow(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(hamflow(&[]).status.code(), Some(1));
    let o = hamflow(&["train", "--manifest", "m.csv", "--out", "x.json", "--rounds", "0"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert_eq!(hamflow(&["--version"]).status.code(), Some(0));
}

#[test]
fn canon_writes_deterministic_cache() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synthetic_dataset(dir.path(), 20, 24, (4, 3), (1, 1), 5);
    let out = dir.path().join("canon.bin");
    let o = hamflow(&["canon", "--manifest", p(&ds.manifest), "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("canon.png").exists());
    let first = std::fs::read(&out).unwrap();
    assert!(hamflow(&["canon", "--manifest", p(&ds.manifest), "--out", p(&out)]).status.success());
    assert_eq!(first, std::fs::read(&out).unwrap());
    let canon: ScalarField<f64> = load_scalar_field(&out).unwrap();
    assert_eq!(canon.dims(), (20, 24));

    let nofaces = dir.path().join("nofaces.csv");
    std::fs::write(&nofaces, "path,label,split\ntrain_clutter_0.pgm,nonface,train\n").unwrap();
    let o = hamflow(&["canon", "--manifest", p(&nofaces), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no face images"));

    let o = hamflow(&["canon", "--manifest", p(&dir.path().join("missing.csv")), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn orbits_and_indices_on_bowls() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("bowl.pgm");
    write_pgm(&bowl(41), &img).unwrap();
    let prefix = dir.path().join("out/bowl");
    let o = hamflow(&["orbits", "--canonical", p(&img), "--out-prefix", p(&prefix)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let json = read(&dir.path().join("out/bowl.json"));
    assert!(json.contains("config_hash"));
    let orbits = orbits_from_json(&json).unwrap();
    assert!(orbits.iter().filter(|o| o.is_closed()).count() >= 3);
    let svg = read(&dir.path().join("out/bowl.svg"));
    assert!(svg.starts_with("<svg") && svg.contains("config_hash=") && svg.contains("<polygon"));

    let idx = read(&dir.path().join("out/bowl_indices.csv"));
    let mut lines = idx.lines();
    assert!(lines.next().unwrap().starts_with("# hamflow"));
    assert_eq!(lines.next().unwrap(), "orbit,length,poincare,conley_ratio,conley_type");

    // one closed orbit of the bowl, on the bowl and on its inversion
    let closed = orbits.iter().find(|o| o.is_closed() && o.len() >= 16).unwrap().clone();
    let one = dir.path().join("one.json");
    std::fs::write(&one, hamflow::streamline::orbits_to_json(std::slice::from_ref(&closed), None, None).unwrap()).unwrap();
    let csv = dir.path().join("idx.csv");
    let o = hamflow(&["indices", "--image", p(&img), "--orbits", p(&one), "--out", p(&csv)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let row: Vec<String> = read(&csv).lines().nth(2).unwrap().split(',').map(str::to_owned).collect();
    assert!((row[2].parse::<f64>().unwrap() - 1.0).abs() < 0.15);
    assert_eq!(row[3].parse::<f64>().unwrap(), 0.0);
    assert_eq!(row[4], "S0");

    let inv = dir.path().join("inv.pgm");
    write_pgm(&bowl(41).inverted().unwrap(), &inv).unwrap();
    assert!(hamflow(&["indices", "--image", p(&inv), "--orbits", p(&one), "--out", p(&csv)]).status.success());
    let row: Vec<String> = read(&csv).lines().nth(2).unwrap().split(',').map(str::to_owned).collect();
    assert!((row[2].parse::<f64>().unwrap() - 1.0).abs() < 0.15);
    assert_eq!(row[3].parse::<f64>().unwrap(), 1.0);
    assert_eq!(row[4], "S2");

    // open orbits are skipped with a warning
    let open = orbits.iter().find(|o| !o.is_closed());
    let with_open: Vec<_> = open.into_iter().cloned().chain([closed]).collect();
    std::fs::write(&one, hamflow::streamline::orbits_to_json(&with_open, None, None).unwrap()).unwrap();
    let o = hamflow(&["indices", "--image", p(&img), "--orbits", p(&one), "--out", p(&csv)]);
    assert!(o.status.success());
    if with_open.len() == 2 {
        assert!(stderr(&o).contains("warning"));
    }
    assert_eq!(read(&csv).lines().count(), 3);
}

#[test]
fn constant_canonical_has_no_orbits() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("flat.pgm");
    write_pgm(&ScalarField::constant(16, 16, 90.0).unwrap(), &img).unwrap();
    let o = hamflow(&["orbits", "--canonical", p(&img), "--out-prefix", p(&dir.path().join("flat"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn train_and_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synthetic_dataset(dir.path(), 20, 24, (10, 14), (6, 8), 11);
    let model = dir.path().join("model.json");
    let o = hamflow(&["train", "--manifest", p(&ds.manifest), "--rounds", "6", "--out", p(&model)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("round   1"));
    let text = read(&model);
    for key in ["\"rounds\"", "\"decision_threshold\"", "\"bank_reference\"", "\"config_hash\"", "\"alpha\"", "\"polarity\""] {
        assert!(text.contains(key), "{key}");
    }
    assert!(dir.path().join("model.bank.json").exists());
    let report = read(&dir.path().join("model.report.json"));
    assert!(report.contains("wall_seconds") && report.contains("kind_sequence"));

    let prefix = dir.path().join("train_eval");
    let o = hamflow(&["eval", "--model", p(&model), "--manifest", p(&ds.manifest), "--split", "train", "--out-prefix", p(&prefix)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("fn=0 fp=0"), "{out}");
    let roc = read(&dir.path().join("train_eval_roc.csv"));
    let rows: Vec<&str> = roc.lines().skip(2).collect();
    assert!(rows.first().unwrap().ends_with(",0,0"));
    assert!(rows.last().unwrap().ends_with(",1,1"));

    let o = hamflow(&["eval", "--model", p(&model), "--manifest", p(&ds.manifest), "--out-prefix", p(&prefix)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(read(&dir.path().join("train_eval_confusion.csv")).contains("fn,fp,tp,tn"));
}

#[test]
fn train_modes_and_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synthetic_dataset(dir.path(), 16, 16, (5, 6), (0, 0), 2);
    let cfg = dir.path().join("small.toml");
    std::fs::write(&cfg, "haar_target = 300\nrounds = 3\n").unwrap();
    for mode in ["haar", "both"] {
        let model = dir.path().join(format!("{mode}.json"));
        let o = hamflow(&["--config", p(&cfg), "train", "--manifest", p(&ds.manifest), "--features", mode, "--out", p(&model)]);
        assert!(o.status.success(), "{mode}: {}", stderr(&o));
        let bank = read(&dir.path().join(format!("{mode}.bank.json")));
        assert!(bank.contains("\"haar\":{"));
        assert_eq!(bank.contains("\"hamiltonian\":{"), mode == "both");
    }

    let one_class = dir.path().join("faces.csv");
    std::fs::write(&one_class, "path,label,split\ntrain_face_0.pgm,face,train\ntrain_face_1.pgm,face,train\n").unwrap();
    let o = hamflow(&["train", "--manifest", p(&one_class), "--out", p(&dir.path().join("m.json"))]);
    assert_eq!(o.status.code(), Some(2));

    let bad_cfg = dir.path().join("bad.toml");
    std::fs::write(&bad_cfg, "no_such_key = 1\n").unwrap();
    let o = hamflow(&["--config", p(&bad_cfg), "train", "--manifest", p(&ds.manifest), "--out", p(&dir.path().join("m.json"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn patches_feed_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("clutter.pgm");
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(4);
    write_pgm(&clutter(60, 50, &mut rng), &src).unwrap();
    let out = dir.path().join("neg");
    let args = ["--seed", "7", "patches", "--sources", p(&src), "--width", "16", "--height", "20", "--count", "5", "--out-dir", p(&out)];
    assert!(hamflow(&args).status.success());
    let first = std::fs::read(out.join("patch_00004.pgm")).unwrap();
    assert!(hamflow(&args).status.success());
    assert_eq!(first, std::fs::read(out.join("patch_00004.pgm")).unwrap());
    let m = hamflow::Manifest::load(out.join("patches.csv")).unwrap();
    assert_eq!(m.len(), 5);
    let img: ScalarField<f64> = load_scalar_field(&m.entries[0].path).unwrap();
    assert_eq!(img.dims(), (16, 20));

    let o = hamflow(&["patches", "--sources", p(&src), "--width", "80", "--height", "20", "--count", "5", "--out-dir", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
}
