use super::{ConvLayer, Initializer, LayerGrads};
use crate::error::{Error, Result};
use crate::nn::{
    bilinear_kernel, conv2d, conv2d_backward, relu, relu_backward, transposed_conv2d,
    transposed_conv2d_backward, ConvParams, Tensor4,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AtrousMiniConfig {
    pub input_size: usize,
    pub base_channels: usize,
    pub blocks_per_stage: usize,
    pub num_classes: usize,
    /// Dilation rates of the two stride-8 stages.
    pub dilations: [usize; 2],
}

impl Default for AtrousMiniConfig {
    fn default() -> Self {
        Self {
            input_size: 64,
            base_channels: 8,
            blocks_per_stage: 2,
            num_classes: 2,
            dilations: [2, 4],
        }
    }
}

impl AtrousMiniConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_size == 0 || self.input_size % 8 != 0 {
            return Err(Error::invalid(format!(
                "atrous input size must be a positive multiple of 8, got {}",
                self.input_size
            )));
        }
        if self.base_channels == 0 || self.blocks_per_stage == 0 {
            return Err(Error::invalid("base_channels and blocks_per_stage must be at least 1"));
        }
        if self.num_classes < 2 {
            return Err(Error::invalid("num_classes must be at least 2"));
        }
        if self.dilations.contains(&0) {
            return Err(Error::invalid("dilation rates must be at least 1"));
        }
        Ok(())
    }
}

/// Stage layout: (channel multiplier, stride of first block, dilation).
fn stage_plan(cfg: &AtrousMiniConfig) -> [(usize, usize, usize); 5] {
    [
        (1, 1, 1), // stride 2 (after stem)
        (2, 2, 1), // stride 4
        (4, 2, 1), // stride 8
        (4, 1, cfg.dilations[0]),
        (4, 1, cfg.dilations[1]),
    ]
}

/// Residual block: `out = shortcut(x) + conv2(relu(conv1(x)))`, where the
/// shortcut is the identity or a strided 1x1 projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Block {
    conv1: usize,
    conv2: usize,
    proj: Option<usize>,
}

#[derive(Debug, Clone)]
struct BlockCache {
    input: Tensor4,
    pre1: Tensor4,
    act1: Tensor4,
}

#[derive(Debug, Clone)]
pub struct AtrousCache {
    image: Tensor4,
    stem_pre: Tensor4,
    blocks: Vec<BlockCache>,
    /// Output of the last residual block (stride 8).
    pub features: Tensor4,
    pub scores: Tensor4,
}

/// Residual network with output stride 8, dilated deep stages and a fixed
/// bilinear x8 upsampling head.
#[derive(Debug, Clone, PartialEq)]
pub struct AtrousMini {
    config: AtrousMiniConfig,
    layers: Vec<ConvLayer>,
    blocks: Vec<Block>,
    up8: ConvParams,
}

const STEM: usize = 0;

impl AtrousMini {
    pub fn new(config: AtrousMiniConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut init = Initializer::new(seed);
        let base = config.base_channels;
        let mut layers = vec![init.conv("atrous.stem", base, 1, 3, 2, 1)];
        let mut blocks = Vec::new();
        let mut in_c = base;
        for (s, &(mult, first_stride, dil)) in stage_plan(&config).iter().enumerate() {
            let c = base * mult;
            for b in 0..config.blocks_per_stage {
                let stride = if b == 0 { first_stride } else { 1 };
                let prefix = format!("atrous.s{}b{}", s + 1, b + 1);
                let conv1 = layers.len();
                layers.push(init.conv(&format!("{prefix}.conv1"), c, in_c, 3, stride, dil));
                layers.push(init.conv(&format!("{prefix}.conv2"), c, c, 3, 1, dil));
                let proj = (stride != 1 || in_c != c).then(|| {
                    layers.push(init.conv(&format!("{prefix}.proj"), c, in_c, 1, stride, 1));
                    layers.len() - 1
                });
                blocks.push(Block {
                    conv1,
                    conv2: conv1 + 1,
                    proj,
                });
                in_c = c;
            }
        }
        layers.push(Initializer::zero_conv("atrous.score", config.num_classes, in_c));
        Ok(Self {
            up8: bilinear_kernel(8, config.num_classes)?,
            config,
            layers,
            blocks,
        })
    }

    pub fn config(&self) -> &AtrousMiniConfig {
        &self.config
    }

    pub fn layers(&self) -> &[ConvLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [ConvLayer] {
        &mut self.layers
    }

    fn score_index(&self) -> usize {
        self.layers.len() - 1
    }

    /// Indices of the conv1/conv2 layers of every residual branch.
    pub fn branch_layer_indices(&self) -> Vec<usize> {
        self.blocks.iter().flat_map(|b| [b.conv1, b.conv2]).collect()
    }

    /// Indices of the 1x1 projection shortcuts, in block order.
    pub fn projection_layer_indices(&self) -> Vec<usize> {
        self.blocks.iter().filter_map(|b| b.proj).collect()
    }

    pub fn stem_layer(&self) -> &ConvLayer {
        &self.layers[STEM]
    }

    pub fn score_layer(&self) -> &ConvLayer {
        &self.layers[self.score_index()]
    }

    pub fn upsampling_kernel(&self) -> &ConvParams {
        &self.up8
    }

    pub fn forward(&self, x: &Tensor4) -> Result<(Tensor4, AtrousCache)> {
        let [_, c, h, w] = x.dims();
        if c != 1 || h % 8 != 0 || w % 8 != 0 {
            return Err(Error::shape(format!(
                "atrous input must be 1 channel with sides divisible by 8, got {:?}",
                x.dims()
            )));
        }
        let stem_pre = conv2d(x, &self.layers[STEM].params)?;
        let mut cur = relu(&stem_pre);
        let mut caches = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let pre1 = conv2d(&cur, &self.layers[b.conv1].params)?;
            let act1 = relu(&pre1);
            let branch = conv2d(&act1, &self.layers[b.conv2].params)?;
            let out = match b.proj {
                Some(p) => conv2d(&cur, &self.layers[p].params)?.add(&branch)?,
                None => cur.add(&branch)?,
            };
            caches.push(BlockCache {
                input: cur,
                pre1,
                act1,
            });
            cur = out;
        }
        let scores = conv2d(&cur, &self.layers[self.score_index()].params)?;
        let logits = transposed_conv2d(&scores, &self.up8)?;
        Ok((
            logits,
            AtrousCache {
                image: x.clone(),
                stem_pre,
                blocks: caches,
                features: cur,
                scores,
            },
        ))
    }

    pub fn backward(&self, cache: &AtrousCache, grad_logits: &Tensor4) -> Result<Vec<LayerGrads>> {
        let mut grads: Vec<Option<LayerGrads>> = vec![None; self.layers.len()];
        let mut put = |i: usize, g: &crate::nn::ConvGrads| {
            grads[i] = Some(LayerGrads {
                grad_w: g.grad_w.clone(),
                grad_b: g.grad_b.clone(),
            });
        };

        let g_scores = transposed_conv2d_backward(&cache.scores, &self.up8, grad_logits)?.grad_x;
        let score = conv2d_backward(&cache.features, &self.layers[self.score_index()].params, &g_scores)?;
        put(self.score_index(), &score);
        let mut g = score.grad_x;

        for (b, bc) in self.blocks.iter().zip(&cache.blocks).rev() {
            let c2 = conv2d_backward(&bc.act1, &self.layers[b.conv2].params, &g)?;
            let g_pre1 = relu_backward(&bc.pre1, &c2.grad_x)?;
            let c1 = conv2d_backward(&bc.input, &self.layers[b.conv1].params, &g_pre1)?;
            let mut g_in = c1.grad_x.clone();
            match b.proj {
                Some(p) => {
                    let pg = conv2d_backward(&bc.input, &self.layers[p].params, &g)?;
                    g_in.add_assign(&pg.grad_x)?;
                    put(p, &pg);
                }
                None => g_in.add_assign(&g)?,
            }
            put(b.conv2, &c2);
            put(b.conv1, &c1);
            g = g_in;
        }

        let g_stem = relu_backward(&cache.stem_pre, &g)?;
        let stem = conv2d_backward(&cache.image, &self.layers[STEM].params, &g_stem)?;
        put(STEM, &stem);
        Ok(grads.into_iter().map(|g| g.expect("every layer visited")).collect())
    }
}
