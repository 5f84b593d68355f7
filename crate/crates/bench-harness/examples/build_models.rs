//! Regenerates the benchmark model files under `models/`.
//!
//! ```text
//! cargo run -p bench-harness --example build_models
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::{json, Value};

#[derive(Default)]
struct Builder {
    layers: Vec<Value>,
    shapes: BTreeMap<String, [usize; 3]>,
    counters: BTreeMap<&'static str, usize>,
}

fn window(i: usize, k: usize, s: usize) -> usize {
    (i - k) / s + 1
}

impl Builder {
    /// Keras-style automatic names: `conv2d`, `conv2d_1`, ...
    fn auto(&mut self, base: &'static str) -> String {
        let n = self.counters.entry(base).or_default();
        let name = if *n == 0 {
            base.to_string()
        } else {
            format!("{base}_{n}")
        };
        *n += 1;
        name
    }

    fn push(
        &mut self,
        name: String,
        op: &str,
        inputs: &[&str],
        attrs: Value,
        shape: [usize; 3],
    ) -> String {
        let mut layer = json!({"name": name, "op": op, "inputs": inputs});
        if attrs.as_object().is_some_and(|m| !m.is_empty()) {
            layer["attrs"] = attrs;
        }
        self.layers.push(layer);
        self.shapes.insert(name.clone(), shape);
        name
    }

    fn shape(&self, x: &str) -> [usize; 3] {
        self.shapes[x]
    }

    fn input(&mut self, h: usize, w: usize, c: usize) -> String {
        let name = self.auto("input");
        self.push(name, "input", &[], json!({"shape": [h, w, c]}), [h, w, c])
    }

    #[allow(clippy::too_many_arguments)]
    fn conv_named(
        &mut self,
        name: String,
        x: &str,
        k: usize,
        k_out: usize,
        stride: usize,
        same: bool,
        bias: bool,
    ) -> String {
        let [h, w, c] = self.shape(x);
        let (oh, ow) = if same {
            (h.div_ceil(stride), w.div_ceil(stride))
        } else {
            (window(h, k, stride), window(w, k, stride))
        };
        self.push(
            name,
            "conv2d",
            &[x],
            json!({
                "kernel": [k, k, c, k_out],
                "stride": [stride, stride],
                "padding": if same { "same" } else { "valid" },
                "bias": bias,
            }),
            [oh, ow, k_out],
        )
    }

    fn conv(
        &mut self,
        x: &str,
        k: usize,
        k_out: usize,
        stride: usize,
        same: bool,
        bias: bool,
    ) -> String {
        let name = self.auto("conv2d");
        self.conv_named(name, x, k, k_out, stride, same, bias)
    }

    fn bn_named(&mut self, name: String, x: &str) -> String {
        let s = self.shape(x);
        self.push(name, "batchnorm", &[x], json!({"epsilon": 0.001}), s)
    }

    fn bn(&mut self, x: &str) -> String {
        let name = self.auto("batch_normalization");
        self.bn_named(name, x)
    }

    fn act_named(&mut self, name: String, x: &str, f: &str) -> String {
        let s = self.shape(x);
        let attrs = if f == "leaky_relu" {
            json!({"function": f, "alpha": 0.1})
        } else {
            json!({"function": f})
        };
        self.push(name, "activation", &[x], attrs, s)
    }

    fn leaky(&mut self, x: &str) -> String {
        let name = self.auto("leaky_re_lu");
        self.act_named(name, x, "leaky_relu")
    }

    fn relu_named(&mut self, name: String, x: &str) -> String {
        self.act_named(name, x, "relu")
    }

    fn pad_named(
        &mut self,
        name: String,
        x: &str,
        t: usize,
        b: usize,
        l: usize,
        r: usize,
    ) -> String {
        let [h, w, c] = self.shape(x);
        self.push(
            name,
            "pad",
            &[x],
            json!({"pads": [t, b, l, r]}),
            [h + t + b, w + l + r, c],
        )
    }

    fn pad(&mut self, x: &str, t: usize, b: usize, l: usize, r: usize) -> String {
        let name = self.auto("zero_padding2d");
        self.pad_named(name, x, t, b, l, r)
    }

    fn maxpool_named(&mut self, name: String, x: &str, size: usize, stride: usize) -> String {
        let [h, w, c] = self.shape(x);
        self.push(
            name,
            "maxpool2d",
            &[x],
            json!({"size": [size, size], "stride": [stride, stride]}),
            [window(h, size, stride), window(w, size, stride), c],
        )
    }

    fn maxpool(&mut self, x: &str, size: usize, stride: usize) -> String {
        let name = self.auto("max_pooling2d");
        self.maxpool_named(name, x, size, stride)
    }

    fn concat(&mut self, xs: &[&str]) -> String {
        let name = self.auto("concatenate");
        let [h, w, _] = self.shape(xs[0]);
        let c = xs.iter().map(|x| self.shape(x)[2]).sum();
        self.push(name, "concat", xs, json!({"axis": "c"}), [h, w, c])
    }

    fn add_named(&mut self, name: String, xs: &[&str]) -> String {
        let s = self.shape(xs[0]);
        self.push(name, "add", xs, json!({}), s)
    }

    fn upsample(&mut self, x: &str, f: usize) -> String {
        let name = self.auto("up_sampling2d");
        let [h, w, c] = self.shape(x);
        self.push(
            name,
            "upsample2d",
            &[x],
            json!({"factor": f}),
            [h * f, w * f, c],
        )
    }

    /// Second half of the channels (darknet `route groups=2 group_id=1`).
    fn split_upper(&mut self, x: &str) -> String {
        let name = self.auto("tf.split");
        let [h, w, c] = self.shape(x);
        self.push(
            name,
            "slice",
            &[x],
            json!({"begin": [0, 0, c / 2], "size": [h, w, c / 2]}),
            [h, w, c / 2],
        )
    }

    fn output(&mut self, x: &str) -> String {
        let name = self.auto("output");
        let s = self.shape(x);
        self.push(name, "output", &[x], json!({}), s)
    }

    fn finish(self, name: &str) -> Value {
        json!({"name": name, "layers": self.layers})
    }
}

/// Darknet convolutional block: conv, batchnorm, leaky ReLU.
fn dn_conv(b: &mut Builder, x: &str, k: usize, k_out: usize, stride: usize) -> String {
    let c = b.conv(x, k, k_out, stride, true, false);
    let n = b.bn(&c);
    b.leaky(&n)
}

/// Detection head: 1×1 linear conv with bias.
fn dn_head(b: &mut Builder, x: &str) -> String {
    let c = b.conv(x, 1, 255, 1, true, true);
    b.output(&c)
}

fn tiny_yolo_v4() -> Value {
    let mut b = Builder::default();
    let x = b.input(416, 416, 3);
    let x = dn_conv(&mut b, &x, 3, 32, 2);
    let mut x = dn_conv(&mut b, &x, 3, 64, 2);
    let mut route = String::new();
    for (i, filters) in [64, 128, 256].into_iter().enumerate() {
        let full = dn_conv(&mut b, &x, 3, filters, 1);
        let half = b.split_upper(&full);
        let a = dn_conv(&mut b, &half, 3, filters / 2, 1);
        let c = dn_conv(&mut b, &a, 3, filters / 2, 1);
        let cat = b.concat(&[&c, &a]);
        let tail = dn_conv(&mut b, &cat, 1, filters, 1);
        if i == 2 {
            route = tail.clone();
        }
        let cat = b.concat(&[&full, &tail]);
        x = b.maxpool(&cat, 2, 2);
    }
    let x = dn_conv(&mut b, &x, 3, 512, 1);
    let neck = dn_conv(&mut b, &x, 1, 256, 1);
    let y = dn_conv(&mut b, &neck, 3, 512, 1);
    dn_head(&mut b, &y);
    let u = dn_conv(&mut b, &neck, 1, 128, 1);
    let u = b.upsample(&u, 2);
    let cat = b.concat(&[&u, &route]);
    let y = dn_conv(&mut b, &cat, 3, 256, 1);
    dn_head(&mut b, &y);
    b.finish("tinyyolov4")
}

fn tiny_yolo_v3() -> Value {
    let mut b = Builder::default();
    let mut x = b.input(416, 416, 3);
    let mut route = String::new();
    for (i, filters) in [16, 32, 64, 128, 256, 512].into_iter().enumerate() {
        let c = dn_conv(&mut b, &x, 3, filters, 1);
        if i == 4 {
            route = c.clone();
        }
        x = if i == 5 {
            // 2×2 stride-1 pooling that keeps 13×13.
            let p = b.pad(&c, 0, 1, 0, 1);
            b.maxpool(&p, 2, 1)
        } else {
            b.maxpool(&c, 2, 2)
        };
    }
    let x = dn_conv(&mut b, &x, 3, 1024, 1);
    let neck = dn_conv(&mut b, &x, 1, 256, 1);
    let y = dn_conv(&mut b, &neck, 3, 512, 1);
    dn_head(&mut b, &y);
    let u = dn_conv(&mut b, &neck, 1, 128, 1);
    let u = b.upsample(&u, 2);
    let cat = b.concat(&[&u, &route]);
    let y = dn_conv(&mut b, &cat, 3, 256, 1);
    dn_head(&mut b, &y);
    b.finish("tinyyolov3")
}

fn vgg(name: &str, convs_per_block: [usize; 5]) -> Value {
    let mut b = Builder::default();
    let mut x = b.input(224, 224, 3);
    for (blk, (n, filters)) in convs_per_block
        .into_iter()
        .zip([64, 128, 256, 512, 512])
        .enumerate()
    {
        for i in 1..=n {
            let c = b.conv_named(
                format!("block{}_conv{i}", blk + 1),
                &x,
                3,
                filters,
                1,
                true,
                true,
            );
            x = b.relu_named(format!("block{}_conv{i}_relu", blk + 1), &c);
        }
        x = b.maxpool_named(format!("block{}_pool", blk + 1), &x, 2, 2);
    }
    b.output(&x);
    b.finish(name)
}

fn block_label(i: usize, many: bool) -> String {
    if !many || i == 0 {
        ((b'a' + i as u8) as char).to_string()
    } else {
        format!("b{i}")
    }
}

fn resnet(name: &str, blocks: [usize; 4]) -> Value {
    let mut b = Builder::default();
    let x = b.input(224, 224, 3);
    let x = b.pad_named("conv1_pad".into(), &x, 3, 3, 3, 3);
    let x = b.conv_named("conv1".into(), &x, 7, 64, 2, false, true);
    let x = b.bn_named("bn_conv1".into(), &x);
    let x = b.relu_named("conv1_relu".into(), &x);
    let x = b.pad_named("pool1_pad".into(), &x, 1, 1, 1, 1);
    let mut x = b.maxpool_named("pool1".into(), &x, 3, 2);
    for (s, (n, width)) in blocks.into_iter().zip([64, 128, 256, 512]).enumerate() {
        let stage = s + 2;
        // Deep variants number their blocks a, b1, b2, ... like the reference
        // Caffe models.
        let many = n > 6;
        for i in 0..n {
            let label = block_label(i, many);
            let stride = if i == 0 && stage > 2 { 2 } else { 1 };
            let filters = [width, width, width * 4];
            x = res_block(&mut b, &x, stage, &label, filters, stride, i == 0);
        }
    }
    b.output(&x);
    b.finish(name)
}

/// Bottleneck block, Keras ResNet v1 naming. Convs carry a bias and are
/// followed by batchnorm; the stride sits on the first 1×1 conv.
fn res_block(
    b: &mut Builder,
    x: &str,
    stage: usize,
    label: &str,
    filters: [usize; 3],
    stride: usize,
    project: bool,
) -> String {
    let [f1, f2, f3] = filters;
    let conv = |b: &mut Builder, x: &str, branch: &str, k: usize, f: usize, s: usize| {
        let c = b.conv_named(
            format!("res{stage}{label}_branch{branch}"),
            x,
            k,
            f,
            s,
            k > 1,
            true,
        );
        b.bn_named(format!("bn{stage}{label}_branch{branch}"), &c)
    };
    let y = conv(b, x, "2a", 1, f1, stride);
    let y = b.relu_named(format!("res{stage}{label}_branch2a_relu"), &y);
    let y = conv(b, &y, "2b", 3, f2, 1);
    let y = b.relu_named(format!("res{stage}{label}_branch2b_relu"), &y);
    let y = conv(b, &y, "2c", 1, f3, 1);
    let shortcut = if project {
        conv(b, x, "1", 1, f3, stride)
    } else {
        x.to_string()
    };
    let s = b.add_named(format!("res{stage}{label}"), &[&y, &shortcut]);
    b.relu_named(format!("res{stage}{label}_relu"), &s)
}

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("models");
    std::fs::create_dir_all(&dir).expect("create models/");
    let models = [
        tiny_yolo_v4(),
        tiny_yolo_v3(),
        vgg("vgg16", [2, 2, 3, 3, 3]),
        vgg("vgg19", [2, 2, 4, 4, 4]),
        resnet("resnet50", [3, 4, 6, 3]),
        resnet("resnet101", [3, 4, 23, 3]),
        resnet("resnet152", [3, 8, 36, 3]),
    ];
    for model in models {
        let name = model["name"].as_str().unwrap().to_string();
        let path = dir.join(format!("{name}.json"));
        let text = serde_json::to_string_pretty(&model).unwrap() + "\n";
        std::fs::write(&path, text).expect("write model file");
        println!("{}", path.display());
    }
}
