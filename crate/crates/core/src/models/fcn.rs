use super::{ConvLayer, Initializer, LayerGrads};
use crate::error::{Error, Result};
use crate::nn::{
    bilinear_kernel, conv2d, conv2d_backward, maxpool2, maxpool2_backward, relu, relu_backward,
    transposed_conv2d, transposed_conv2d_backward, ConvParams, PoolIndices, Tensor4,
};

/// Channel multiplier of each encoder stage relative to `base_channels`.
const STAGE_WIDTH: [usize; 5] = [1, 2, 4, 4, 4];
const STAGES: usize = 5;
// layer indices: 2 convs per stage, then the three score convs
const SCORE32: usize = 2 * STAGES;
const SCORE16: usize = SCORE32 + 1;
const SCORE8: usize = SCORE32 + 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FcnMiniConfig {
    pub input_size: usize,
    pub base_channels: usize,
    pub num_classes: usize,
}

impl Default for FcnMiniConfig {
    fn default() -> Self {
        Self {
            input_size: 64,
            base_channels: 8,
            num_classes: 2,
        }
    }
}

impl FcnMiniConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_size == 0 || self.input_size % 32 != 0 {
            return Err(Error::invalid(format!(
                "FCN input size must be a positive multiple of 32, got {}",
                self.input_size
            )));
        }
        if self.base_channels == 0 {
            return Err(Error::invalid("base_channels must be at least 1"));
        }
        if self.num_classes < 2 {
            return Err(Error::invalid("num_classes must be at least 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct StageCache {
    input: Tensor4,
    pre_a: Tensor4,
    act_a: Tensor4,
    pre_b: Tensor4,
    pool: PoolIndices,
}

/// Activations of one forward pass.
#[derive(Debug, Clone)]
pub struct FcnCache {
    stages: Vec<StageCache>,
    /// Pooled outputs at strides 2, 4, 8, 16, 32.
    pooled: Vec<Tensor4>,
    pub score32: Tensor4,
    pub score16: Tensor4,
    pub score8: Tensor4,
    up32: Tensor4,
    fused16: Tensor4,
    up16: Tensor4,
    fused8: Tensor4,
}

/// FCN-8s style network: VGG-like encoder, skip fusion from pool4 and pool3.
#[derive(Debug, Clone, PartialEq)]
pub struct FcnMini {
    config: FcnMiniConfig,
    layers: Vec<ConvLayer>,
    up2: ConvParams,
    up8: ConvParams,
}

impl FcnMini {
    pub fn new(config: FcnMiniConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut init = Initializer::new(seed);
        let mut layers = Vec::with_capacity(2 * STAGES + 3);
        let mut in_c = 1;
        for (s, &mult) in STAGE_WIDTH.iter().enumerate() {
            let c = config.base_channels * mult;
            layers.push(init.conv(&format!("fcn.enc{}a", s + 1), c, in_c, 3, 1, 1));
            layers.push(init.conv(&format!("fcn.enc{}b", s + 1), c, c, 3, 1, 1));
            in_c = c;
        }
        let nc = config.num_classes;
        let width = |s: usize| config.base_channels * STAGE_WIDTH[s];
        layers.push(Initializer::zero_conv("fcn.score_pool5", nc, width(4)));
        layers.push(Initializer::zero_conv("fcn.score_pool4", nc, width(3)));
        layers.push(Initializer::zero_conv("fcn.score_pool3", nc, width(2)));
        Ok(Self {
            config,
            layers,
            up2: bilinear_kernel(2, nc)?,
            up8: bilinear_kernel(8, nc)?,
        })
    }

    pub fn config(&self) -> &FcnMiniConfig {
        &self.config
    }

    pub fn layers(&self) -> &[ConvLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [ConvLayer] {
        &mut self.layers
    }

    /// Indices into [`layers`](Self::layers) of the three 1x1 score convs
    /// (stride 32, 16, 8).
    pub fn score_layer_indices() -> [usize; 3] {
        [SCORE32, SCORE16, SCORE8]
    }

    pub fn forward(&self, x: &Tensor4) -> Result<(Tensor4, FcnCache)> {
        let [_, c, h, w] = x.dims();
        if c != 1 || h % 32 != 0 || w % 32 != 0 {
            return Err(Error::shape(format!(
                "FCN input must be 1 channel with sides divisible by 32, got {:?}",
                x.dims()
            )));
        }
        let mut stages = Vec::with_capacity(STAGES);
        let mut pooled = Vec::with_capacity(STAGES);
        let mut cur = x.clone();
        for s in 0..STAGES {
            let pre_a = conv2d(&cur, &self.layers[2 * s].params)?;
            let act_a = relu(&pre_a);
            let pre_b = conv2d(&act_a, &self.layers[2 * s + 1].params)?;
            let (out, pool) = maxpool2(&relu(&pre_b))?;
            stages.push(StageCache {
                input: cur,
                pre_a,
                act_a,
                pre_b,
                pool,
            });
            pooled.push(out.clone());
            cur = out;
        }
        let score32 = conv2d(&pooled[4], &self.layers[SCORE32].params)?;
        let score16 = conv2d(&pooled[3], &self.layers[SCORE16].params)?;
        let score8 = conv2d(&pooled[2], &self.layers[SCORE8].params)?;
        let up32 = transposed_conv2d(&score32, &self.up2)?;
        let fused16 = up32.add(&score16)?;
        let up16 = transposed_conv2d(&fused16, &self.up2)?;
        let fused8 = up16.add(&score8)?;
        let logits = transposed_conv2d(&fused8, &self.up8)?;
        Ok((
            logits,
            FcnCache {
                stages,
                pooled,
                score32,
                score16,
                score8,
                up32,
                fused16,
                up16,
                fused8,
            },
        ))
    }

    pub fn backward(&self, cache: &FcnCache, grad_logits: &Tensor4) -> Result<Vec<LayerGrads>> {
        let mut grads: Vec<Option<LayerGrads>> = vec![None; self.layers.len()];
        let keep = |g: crate::nn::ConvGrads| LayerGrads {
            grad_w: g.grad_w,
            grad_b: g.grad_b,
        };

        // fixed upsampling: only the input gradient flows
        let g_fused8 = transposed_conv2d_backward(&cache.fused8, &self.up8, grad_logits)?.grad_x;
        let g_fused16 = transposed_conv2d_backward(&cache.fused16, &self.up2, &g_fused8)?.grad_x;
        let g_score32 = transposed_conv2d_backward(&cache.score32, &self.up2, &g_fused16)?.grad_x;

        let s8 = conv2d_backward(&cache.pooled[2], &self.layers[SCORE8].params, &g_fused8)?;
        let s16 = conv2d_backward(&cache.pooled[3], &self.layers[SCORE16].params, &g_fused16)?;
        let s32 = conv2d_backward(&cache.pooled[4], &self.layers[SCORE32].params, &g_score32)?;

        // gradient arriving at each pooled output from the score branches
        let mut g_pool: Vec<Option<Tensor4>> = vec![None, None, Some(s8.grad_x.clone()), Some(s16.grad_x.clone()), Some(s32.grad_x.clone())];
        grads[SCORE8] = Some(keep(s8));
        grads[SCORE16] = Some(keep(s16));
        grads[SCORE32] = Some(keep(s32));

        for s in (0..STAGES).rev() {
            let st = &cache.stages[s];
            let g_out = g_pool[s]
                .take()
                .unwrap_or_else(|| Tensor4::zeros(cache.pooled[s].dims()));
            let g_act_b = maxpool2_backward(&st.pool, &g_out)?;
            let g_pre_b = relu_backward(&st.pre_b, &g_act_b)?;
            let b = conv2d_backward(&st.act_a, &self.layers[2 * s + 1].params, &g_pre_b)?;
            let g_pre_a = relu_backward(&st.pre_a, &b.grad_x)?;
            let a = conv2d_backward(&st.input, &self.layers[2 * s].params, &g_pre_a)?;
            if s > 0 {
                let prev = g_pool[s - 1].get_or_insert_with(|| Tensor4::zeros(cache.pooled[s - 1].dims()));
                prev.add_assign(&a.grad_x)?;
            }
            grads[2 * s + 1] = Some(keep(b));
            grads[2 * s] = Some(keep(a));
        }
        Ok(grads.into_iter().map(|g| g.expect("every layer visited")).collect())
    }

    /// The fixed x2 and x8 bilinear upsampling kernels.
    pub fn upsampling_kernels(&self) -> (&ConvParams, &ConvParams) {
        (&self.up2, &self.up8)
    }
}

impl FcnCache {
    /// Spatial sizes of the pooled feature maps at strides 2..32.
    pub fn pooled_sizes(&self) -> Vec<(usize, usize)> {
        self.pooled.iter().map(|t| (t.dims()[2], t.dims()[3])).collect()
    }

    pub fn intermediate(&self) -> [&Tensor4; 4] {
        [&self.up32, &self.fused16, &self.up16, &self.fused8]
    }
}
