//! Criterion 12: two full pipeline runs (prepare -> train -> transfer ->
//! evaluate -> report) with the same config and seed produce byte-identical
//! output trees. Each run lives in its own root with identical relative
//! layout and drives the real binary.

mod common;

use common::{blob_image, texture_image};
use sonogen_core::imageio::{gif_oracle, save_pnm, Image};
use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

const CONFIG: &str = "\
[paths]
content_dir = data/content
style_dir = data/style
trimap_dir = data/trimaps
output_dir = out
pairs_csv = pairs.csv
dbcnn_csv = dbcnn.csv

[preprocess]
sigma = 0.8

[train]
iterations = 40
seed = 5
checkpoint_every = 16

[evaluate]
niqe_patch = 16
niqe_quantile = 0.25
";

fn trimap_for_blob(img: &Image) -> Image {
    let px = img
        .pixels()
        .iter()
        .map(|&v| {
            if v > 0.25 {
                1.0
            } else if v == 0.0 {
                0.0
            } else {
                128.0 / 255.0
            }
        })
        .collect();
    Image::new(img.width(), img.height(), 1, px).unwrap()
}

fn build_fixture(root: &Path) {
    std::fs::create_dir_all(root.join("data/content")).unwrap();
    std::fs::create_dir_all(root.join("data/trimaps")).unwrap();
    std::fs::create_dir_all(root.join("data/style")).unwrap();

    for k in 0..6u64 {
        let img = blob_image(48, 9_000 + k);
        save_pnm(&img, root.join(format!("data/content/fish{k}.pgm"))).unwrap();
        save_pnm(
            &trimap_for_blob(&img),
            root.join(format!("data/trimaps/fish{k}.pgm")),
        )
        .unwrap();
    }

    // 16-frame style gallery as one animated GIF (grayscale ramps + noise
    // quantized onto an 8-entry palette).
    let palette: Vec<[u8; 3]> = (0..8).map(|i| [i * 36, i * 36, i * 36]).collect();
    let frames: Vec<gif_oracle::OracleFrame> = (0..16u64)
        .map(|k| {
            let tex = texture_image(40, 9_500 + k);
            let indices: Vec<u8> = tex
                .pixels()
                .iter()
                .map(|&v| ((v * 7.0).round() as u8).min(7))
                .collect();
            gif_oracle::OracleFrame::full(40, 40, indices)
        })
        .collect();
    std::fs::write(
        root.join("data/style/gallery.gif"),
        gif_oracle::encode_gif(40, 40, &palette, 0, &frames),
    )
    .unwrap();

    // Pairs: first three generated images against their style frames, plus
    // one identity pair (a file against itself).
    let mut pairs = String::from("pseudo_path,real_path,pair_id\n");
    for k in 0..3 {
        pairs.push_str(&format!(
            "out/generated/c000{k}_fish{k}__s00{k:02}_gallery_f0{k:02}.pgm,out/prepared/style/s00{k:02}_gallery_f0{k:02}.pgm,pair{k}\n"
        ));
    }
    pairs.push_str(
        "out/prepared/style/s0000_gallery_f000.pgm,out/prepared/style/s0000_gallery_f000.pgm,identity\n",
    );
    std::fs::write(root.join("pairs.csv"), pairs).unwrap();

    let mut dbcnn = String::from("path,score\n");
    dbcnn.push_str("c0000_fish0__s0000_gallery_f000.pgm,25.1034\n");
    dbcnn.push_str("c0001_fish1__s0001_gallery_f001.pgm,22.9797\n");
    std::fs::write(root.join("dbcnn.csv"), dbcnn).unwrap();

    std::fs::write(root.join("pipeline.cfg"), CONFIG).unwrap();
}

fn run(root: &Path, subcommand: &str) {
    let out = Command::new(env!("CARGO_BIN_EXE_sonogen"))
        .args([subcommand, "--config", "pipeline.cfg"])
        .current_dir(root)
        .env("SONO_LOG", "error")
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "{subcommand} failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn collect_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(dir: &Path, base: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(&path, base, out);
            } else {
                let rel = path.strip_prefix(base).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

#[test]
fn criterion_12_end_to_end_reproducibility() {
    let start = std::time::Instant::now();
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    for root in [dir_a.path(), dir_b.path()] {
        build_fixture(root);
        for sub in ["ingest", "prepare", "train", "transfer", "evaluate", "report"] {
            run(root, sub);
        }
    }

    let tree_a = collect_tree(&dir_a.path().join("out"));
    let tree_b = collect_tree(&dir_b.path().join("out"));
    let names_a: Vec<&String> = tree_a.keys().collect();
    let names_b: Vec<&String> = tree_b.keys().collect();
    assert_eq!(names_a, names_b, "output trees list different files");
    assert!(
        tree_a.len() > 30,
        "expected a full pipeline tree, found {} files",
        tree_a.len()
    );
    for (name, bytes) in &tree_a {
        assert_eq!(
            Some(bytes),
            tree_b.get(name),
            "file {name} differs between runs"
        );
    }

    // Spot-check the pipeline actually produced what the criteria expect.
    assert!(tree_a.keys().any(|k| k.starts_with("generated/")));
    assert!(tree_a.contains_key("eval/quality.csv"));
    assert!(tree_a.keys().any(|k| k.starts_with("report-") && k.ends_with("similarity.md")));
    // The pseudo==real pair scores (1.0, 1.0, 1.0) in the rendered report.
    let sim_csv = tree_a
        .iter()
        .find(|(k, _)| k.starts_with("report-") && k.ends_with("similarity.csv"))
        .map(|(_, v)| String::from_utf8_lossy(v).into_owned())
        .expect("similarity report present");
    assert!(
        sim_csv.contains("identity,1.0000,1.0000,1.0000"),
        "identity pair row missing or wrong:\n{sim_csv}"
    );
    println!(
        "PASS criterion 12: two pipeline runs produced byte-identical trees ({} files) in {:.0}s",
        tree_a.len(),
        start.elapsed().as_secs_f64()
    );
}
