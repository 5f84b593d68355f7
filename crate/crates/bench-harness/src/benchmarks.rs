use std::path::{Path, PathBuf};

use nn_ir::{canonicalize, load_model, NNGraph};

use crate::error::{HarnessError, Result};

/// A shipped benchmark with its published base-layer count and `PE_min`
/// (256×256 PEs).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Benchmark {
    pub name: &'static str,
    pub input: [usize; 3],
    pub base_layers: usize,
    pub pe_min: usize,
}

pub const BENCHMARKS: [Benchmark; 7] = [
    // Darknet yolov4-tiny has 21 convolutions; 117 PEs requires all of them.
    Benchmark {
        name: "tinyyolov4",
        input: [416, 416, 3],
        base_layers: 21,
        pe_min: 117,
    },
    Benchmark {
        name: "tinyyolov3",
        input: [416, 416, 3],
        base_layers: 13,
        pe_min: 142,
    },
    Benchmark {
        name: "vgg16",
        input: [224, 224, 3],
        base_layers: 13,
        pe_min: 233,
    },
    Benchmark {
        name: "vgg19",
        input: [224, 224, 3],
        base_layers: 16,
        pe_min: 314,
    },
    Benchmark {
        name: "resnet50",
        input: [224, 224, 3],
        base_layers: 53,
        pe_min: 390,
    },
    Benchmark {
        name: "resnet101",
        input: [224, 224, 3],
        base_layers: 104,
        pe_min: 679,
    },
    Benchmark {
        name: "resnet152",
        input: [224, 224, 3],
        base_layers: 155,
        pe_min: 936,
    },
];

pub fn benchmark(name: &str) -> Result<&'static Benchmark> {
    BENCHMARKS
        .iter()
        .find(|b| b.name == name)
        .ok_or_else(|| HarnessError::UnknownBenchmark(name.to_string()))
}

/// One row of the TinyYOLOv4 layer table: IFM (after explicit padding), OFM,
/// PE count and intra-layer cycles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerRow {
    pub layer: &'static str,
    pub ifm: [usize; 3],
    pub ofm: [usize; 3],
    pub pe_count: usize,
    pub t_init: u64,
}

pub const TINYYOLOV4_LAYERS: [LayerRow; 6] = [
    LayerRow {
        layer: "conv2d",
        ifm: [417, 417, 3],
        ofm: [208, 208, 32],
        pe_count: 1,
        t_init: 43264,
    },
    LayerRow {
        layer: "conv2d_1",
        ifm: [209, 209, 32],
        ofm: [104, 104, 64],
        pe_count: 2,
        t_init: 10816,
    },
    LayerRow {
        layer: "conv2d_2",
        ifm: [106, 106, 64],
        ofm: [104, 104, 64],
        pe_count: 3,
        t_init: 10816,
    },
    LayerRow {
        layer: "conv2d_16",
        ifm: [15, 15, 256],
        ofm: [13, 13, 512],
        pe_count: 18,
        t_init: 169,
    },
    LayerRow {
        layer: "conv2d_20",
        ifm: [26, 26, 256],
        ofm: [26, 26, 255],
        pe_count: 1,
        t_init: 676,
    },
    LayerRow {
        layer: "conv2d_17",
        ifm: [13, 13, 512],
        ofm: [13, 13, 255],
        pe_count: 2,
        t_init: 169,
    },
];

/// Directory of the shipped model files.
pub fn models_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("models")
}

pub fn model_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.json"))
}

/// Loads and canonicalizes a model file.
pub fn load_canonical(path: &Path) -> Result<NNGraph> {
    Ok(canonicalize(load_model(path)?)?)
}

/// Loads a shipped benchmark by name from `dir`.
pub fn load_benchmark(dir: &Path, name: &str) -> Result<NNGraph> {
    benchmark(name)?;
    load_canonical(&model_path(dir, name))
}
