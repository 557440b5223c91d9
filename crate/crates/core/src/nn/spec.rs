use std::fmt;

use crate::error::{Error, Result};

/// One entry of the fixed layer menu.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    Linear { inputs: usize, outputs: usize },
    /// 3×3 convolution, stride 1, zero padding 1.
    Conv3x3 { in_channels: usize, out_channels: usize },
    Relu,
    /// Non-overlapping 2×2 mean pooling; odd trailing rows/columns are dropped.
    AvgPool2,
    Flatten,
}

impl Layer {
    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let mismatch = |what: &str| {
            Error::invalid(format!("layer {self} cannot take per-sample input {input:?}: {what}"))
        };
        match *self {
            Layer::Linear { inputs, outputs } => {
                if input != [inputs] {
                    return Err(mismatch("linear needs a flat vector of matching width"));
                }
                Ok(vec![outputs])
            }
            Layer::Conv3x3 {
                in_channels,
                out_channels,
            } => match *input {
                [c, h, w] if c == in_channels => Ok(vec![out_channels, h, w]),
                _ => Err(mismatch("conv3x3 needs (channels, h, w) with matching channels")),
            },
            Layer::Relu => Ok(input.to_vec()),
            Layer::AvgPool2 => match *input {
                [c, h, w] if h >= 2 && w >= 2 => Ok(vec![c, h / 2, w / 2]),
                _ => Err(mismatch("avgpool2 needs (channels, h, w) with h, w >= 2")),
            },
            Layer::Flatten => Ok(vec![input.iter().product()]),
        }
    }

    /// Shapes of this layer's parameters (weight then bias), if any.
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        match *self {
            Layer::Linear { inputs, outputs } => vec![vec![outputs, inputs], vec![outputs]],
            Layer::Conv3x3 {
                in_channels,
                out_channels,
            } => vec![vec![out_channels, in_channels, 3, 3], vec![out_channels]],
            _ => Vec::new(),
        }
    }

    pub(crate) fn fan_in(&self) -> usize {
        match *self {
            Layer::Linear { inputs, .. } => inputs,
            Layer::Conv3x3 { in_channels, .. } => in_channels * 9,
            _ => 0,
        }
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Layer::Linear { inputs, outputs } => write!(f, "linear {inputs} {outputs}"),
            Layer::Conv3x3 {
                in_channels,
                out_channels,
            } => write!(f, "conv3x3 {in_channels} {out_channels}"),
            Layer::Relu => write!(f, "relu"),
            Layer::AvgPool2 => write!(f, "avgpool2"),
            Layer::Flatten => write!(f, "flatten"),
        }
    }
}

impl std::str::FromStr for Layer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split_whitespace().collect();
        let num = |i: usize| -> Result<usize> {
            parts
                .get(i)
                .and_then(|p| p.parse().ok())
                .ok_or_else(|| Error::invalid(format!("bad layer description `{s}`")))
        };
        match parts.first().copied() {
            Some("linear") if parts.len() == 3 => Ok(Layer::Linear {
                inputs: num(1)?,
                outputs: num(2)?,
            }),
            Some("conv3x3") if parts.len() == 3 => Ok(Layer::Conv3x3 {
                in_channels: num(1)?,
                out_channels: num(2)?,
            }),
            Some("relu") if parts.len() == 1 => Ok(Layer::Relu),
            Some("avgpool2") if parts.len() == 1 => Ok(Layer::AvgPool2),
            Some("flatten") if parts.len() == 1 => Ok(Layer::Flatten),
            _ => Err(Error::invalid(format!("bad layer description `{s}`"))),
        }
    }
}

/// Architecture of a classifier built from the layer menu.
///
/// The last layer is always the linear classification head; everything
/// before it is the feature extractor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    input_shape: Vec<usize>,
    layers: Vec<Layer>,
    class_count: usize,
    /// Per-sample shapes: `shapes[i]` enters layer `i`, the last is the logits.
    shapes: Vec<Vec<usize>>,
}

impl ModelSpec {
    pub fn new(input_shape: &[usize], layers: Vec<Layer>, class_count: usize) -> Result<Self> {
        if input_shape.is_empty() || input_shape.contains(&0) {
            return Err(Error::invalid(format!("bad input shape {input_shape:?}")));
        }
        match layers.last() {
            Some(Layer::Linear { outputs, .. }) if *outputs == class_count && class_count > 0 => {}
            _ => {
                return Err(Error::invalid(format!(
                    "last layer must be linear with {class_count} outputs"
                )))
            }
        }
        let mut shapes = vec![input_shape.to_vec()];
        for layer in &layers {
            let next = layer.output_shape(shapes.last().unwrap())?;
            shapes.push(next);
        }
        Ok(Self {
            input_shape: input_shape.to_vec(),
            layers,
            class_count,
            shapes,
        })
    }

    /// Two conv blocks of the given width followed by a linear head.
    pub fn convnet(channels: usize, side: usize, class_count: usize, width: usize) -> Result<Self> {
        let pooled = side / 4;
        Self::new(
            &[channels, side, side],
            vec![
                Layer::Conv3x3 {
                    in_channels: channels,
                    out_channels: width,
                },
                Layer::Relu,
                Layer::AvgPool2,
                Layer::Conv3x3 {
                    in_channels: width,
                    out_channels: width,
                },
                Layer::Relu,
                Layer::AvgPool2,
                Layer::Flatten,
                Layer::Linear {
                    inputs: width * pooled * pooled,
                    outputs: class_count,
                },
            ],
            class_count,
        )
    }

    /// The default desk-scale architecture: [`ModelSpec::convnet`] with width 16.
    pub fn convnet_mini(channels: usize, side: usize, class_count: usize) -> Result<Self> {
        Self::convnet(channels, side, class_count, 16)
    }

    /// Flatten followed by a single linear layer.
    pub fn linear(input_shape: &[usize], class_count: usize) -> Result<Self> {
        let inputs = input_shape.iter().product();
        let mut layers = Vec::new();
        if input_shape.len() > 1 {
            layers.push(Layer::Flatten);
        }
        layers.push(Layer::Linear {
            inputs,
            outputs: class_count,
        });
        Self::new(input_shape, layers, class_count)
    }

    /// Flatten, linear, relu, linear.
    pub fn mlp(input_shape: &[usize], hidden: usize, class_count: usize) -> Result<Self> {
        let inputs = input_shape.iter().product();
        let mut layers = Vec::new();
        if input_shape.len() > 1 {
            layers.push(Layer::Flatten);
        }
        layers.extend([
            Layer::Linear {
                inputs,
                outputs: hidden,
            },
            Layer::Relu,
            Layer::Linear {
                inputs: hidden,
                outputs: class_count,
            },
        ]);
        Self::new(input_shape, layers, class_count)
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    /// Per-sample shape entering layer `i` (index `layers.len()` is the logits).
    pub fn shape_at(&self, i: usize) -> &[usize] {
        &self.shapes[i]
    }

    /// Width of the flat feature vector fed to the classification head.
    pub fn feature_len(&self) -> usize {
        self.shapes[self.layers.len() - 1].iter().product()
    }

    /// `(channels, h, w)` of the feature maps when the extractor ends in
    /// `flatten` over a square spatial map.
    pub fn feature_map_shape(&self) -> Option<[usize; 3]> {
        let n = self.layers.len();
        if n >= 2 && self.layers[n - 2] == Layer::Flatten {
            if let [c, h, w] = self.shapes[n - 2][..] {
                return Some([c, h, w]);
            }
        }
        None
    }

    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        self.layers.iter().flat_map(|l| l.param_shapes()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.param_shapes()
            .iter()
            .map(|s| s.iter().product::<usize>())
            .sum()
    }

    /// Line-oriented text form used by checkpoints.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let dims: Vec<String> = self.input_shape.iter().map(|d| d.to_string()).collect();
        out.push_str(&format!("input {}\n", dims.join(" ")));
        out.push_str(&format!("classes {}\n", self.class_count));
        for layer in &self.layers {
            out.push_str(&format!("layer {layer}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut input = None;
        let mut classes = None;
        let mut layers = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
            match key {
                "input" => {
                    let dims: std::result::Result<Vec<usize>, _> =
                        rest.split_whitespace().map(str::parse).collect();
                    input = Some(dims.map_err(|_| Error::invalid(format!("bad input line `{line}`")))?);
                }
                "classes" => {
                    classes = Some(
                        rest.trim()
                            .parse()
                            .map_err(|_| Error::invalid(format!("bad classes line `{line}`")))?,
                    );
                }
                "layer" => layers.push(rest.parse()?),
                _ => return Err(Error::invalid(format!("unknown spec line `{line}`"))),
            }
        }
        let input = input.ok_or_else(|| Error::invalid("spec text has no input line"))?;
        let classes = classes.ok_or_else(|| Error::invalid("spec text has no classes line"))?;
        Self::new(&input, layers, classes)
    }
}
