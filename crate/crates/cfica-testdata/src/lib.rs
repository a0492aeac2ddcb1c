//! Deterministic synthetic datasets shaped like the UCI benchmarks used in
//! the acceptance protocol: labeled Gaussian blobs with the same row counts,
//! dimensions, and chunk splits, generated from fixed seeds so every run
//! sees byte-identical data.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// One labeled row: feature vector plus class name.
#[derive(Debug, Clone)]
pub struct Row {
    pub features: Vec<f64>,
    pub label: String,
}

/// Blob parameters for one class: per-dimension means and a common spread.
struct ClassSpec {
    label: &'static str,
    count: usize,
    means: Vec<f64>,
    spread: f64,
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; two uniforms per normal keeps the stream simple
    let u1: f64 = rng.random::<f64>().max(1e-12);
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn generate(classes: &[ClassSpec], seed: u64) -> Vec<Row> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for c in classes {
        for _ in 0..c.count {
            let features: Vec<f64> = c
                .means
                .iter()
                .map(|m| {
                    // round to 3 decimals: desk-scale measurement precision
                    let v = m + c.spread * gaussian(&mut rng);
                    (v * 1000.0).round() / 1000.0
                })
                .collect();
            rows.push(Row {
                features,
                label: c.label.to_string(),
            });
        }
    }
    rows.shuffle(&mut rng);
    rows
}

/// 150 rows, 4 features, 3 classes, on measurement scales where the
/// lambda = 10 / theta = 4 defaults are meaningful. Chunked 75/25/25/25.
pub fn iris_like() -> Vec<Row> {
    generate(
        &[
            ClassSpec {
                label: "setosa",
                count: 50,
                means: vec![5.0, 3.4, 1.5, 0.3],
                spread: 0.25,
            },
            ClassSpec {
                label: "versicolor",
                count: 50,
                means: vec![5.9, 2.8, 4.3, 1.3],
                spread: 0.35,
            },
            ClassSpec {
                label: "virginica",
                count: 50,
                means: vec![6.6, 3.0, 5.6, 2.0],
                spread: 0.4,
            },
        ],
        1001,
    )
}

/// 178 rows, 13 features, 3 classes. Chunked 100/25/25/28; the protocol uses
/// feature columns 0, 6, and 9 to mirror a 13 -> 3 reduction.
pub fn wine_like() -> Vec<Row> {
    let base = |shift: f64| -> Vec<f64> {
        (0..13).map(|d| 2.0 + d as f64 * 0.7 + shift).collect()
    };
    generate(
        &[
            ClassSpec {
                label: "class1",
                count: 59,
                means: base(0.0),
                spread: 0.5,
            },
            ClassSpec {
                label: "class2",
                count: 71,
                means: base(3.5),
                spread: 0.6,
            },
            ClassSpec {
                label: "class3",
                count: 48,
                means: base(7.0),
                spread: 0.5,
            },
        ],
        2002,
    )
}

/// 1418 rows, 8 features, 6 classes. Chunked 700/350/200/168; the protocol
/// uses feature columns 0..5 to mirror an 8 -> 5 reduction.
pub fn yeast_like() -> Vec<Row> {
    let mut classes = Vec::new();
    let labels = ["cyt", "nuc", "mit", "me3", "me2", "exc"];
    let counts = [430, 380, 240, 160, 120, 88];
    for (i, (label, count)) in labels.iter().zip(counts).enumerate() {
        let means: Vec<f64> = (0..8)
            .map(|d| 3.0 * ((i + d) % 6) as f64 + 0.5 * d as f64)
            .collect();
        classes.push(ClassSpec {
            label,
            count,
            means,
            spread: 0.8,
        });
    }
    generate(&classes, 3003)
}

/// Splits rows into chunks of the given sizes. Sizes must sum to the row
/// count.
pub fn chunked(rows: &[Row], sizes: &[usize]) -> Vec<Vec<Row>> {
    assert_eq!(sizes.iter().sum::<usize>(), rows.len());
    let mut out = Vec::new();
    let mut start = 0;
    for s in sizes {
        out.push(rows[start..start + s].to_vec());
        start += s;
    }
    out
}

/// Writes one chunk as a headered CSV file: feature columns then a final
/// `class` column.
pub fn write_chunk_csv(path: &Path, rows: &[Row]) {
    let dim = rows.first().map(|r| r.features.len()).unwrap_or(0);
    let mut f = fs::File::create(path).unwrap();
    let header: Vec<String> = (0..dim).map(|d| format!("f{d}")).collect();
    writeln!(f, "{},class", header.join(",")).unwrap();
    for r in rows {
        let feats: Vec<String> = r.features.iter().map(|v| v.to_string()).collect();
        writeln!(f, "{},{}", feats.join(","), r.label).unwrap();
    }
}
