use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::audio::{MusicFeatureSequence, FEATURE_DIM};
use crate::dbn::TrajectorySequence;
use crate::motion::{GroupMotionSequence, Skeleton, CONTACT_DIM, FRAME_DIM, ROOT_DIM};
use crate::nn::{
    sinusoidal_embedding, sinusoidal_table, Activation, Attention, ConcatSquash, Dense, Mlp,
    ParamStore, RmsNorm, Session, Tape, Tensor, Var,
};

use super::noising::TrajectoryOffsets;
use super::TcdiffError;

/// Denoiser hyperparameters. The model is built for a fixed dancer count:
/// the fusion projection consumes all dancers of a frame at once.
#[derive(Debug, Clone, Copy)]
pub struct TcdiffConfig {
    pub dancers: usize,
    pub width: usize,
    /// Stacked decoder blocks (N).
    pub blocks: usize,
    pub heads: usize,
    pub ffn_mult: usize,
    /// Hidden width of the 3-layer fusion projection MLP.
    pub fusion_hidden: usize,
    /// Concat-squash stack: layer count (W) and hidden width.
    pub csl_layers: usize,
    pub csl_width: usize,
    /// Width of the adaptor context (timestep ‖ music ‖ offset).
    pub ctx_width: usize,
    pub time_dim: usize,
    pub max_frames: usize,
    /// Disable to ablate the footwork adaptor: the raw decoder output is
    /// used directly (roots stay pinned either way).
    pub footwork_adaptor: bool,
}

impl TcdiffConfig {
    /// Desk-scale defaults for a given dancer count.
    pub fn desk(dancers: usize) -> Self {
        TcdiffConfig {
            dancers,
            width: 64,
            blocks: 2,
            heads: 4,
            ffn_mult: 2,
            fusion_hidden: 64 * dancers,
            csl_layers: 3,
            csl_width: 64,
            ctx_width: 64,
            time_dim: 32,
            max_frames: 64,
            footwork_adaptor: true,
        }
    }

    /// Published configuration: width 512, N = 8 blocks, 8 heads, W = 3
    /// concat-squash layers with hidden 128 and context 512, 120 frames.
    pub fn paper(dancers: usize) -> Self {
        TcdiffConfig {
            dancers,
            width: 512,
            blocks: 8,
            heads: 8,
            ffn_mult: 4,
            fusion_hidden: 512 * dancers,
            csl_layers: 3,
            csl_width: 128,
            ctx_width: 512,
            time_dim: 256,
            max_frames: 120,
            footwork_adaptor: true,
        }
    }
}

struct DecoderBlock {
    norm_self: RmsNorm,
    self_attn: Attention,
    norm_cross: RmsNorm,
    cross_attn: Attention,
    norm_ffn: RmsNorm,
    ffn: Mlp,
    time_proj: Dense,
}

struct FootworkAdaptor {
    input: Dense,
    layers: Vec<ConcatSquash>,
    time_proj: Dense,
    music_proj: Dense,
    time_part: usize,
    music_part: usize,
}

/// Trajectory-conditioned motion denoiser.
pub struct TcdiffModel {
    pub store: ParamStore,
    pub config: TcdiffConfig,
    skeleton: Skeleton,
    fusion: Mlp,
    input_linear: Dense,
    music_in: Dense,
    time_mlp: Mlp,
    blocks: Vec<DecoderBlock>,
    output_linear: Dense,
    adaptor: Option<FootworkAdaptor>,
    pe: Tensor,
}

impl TcdiffModel {
    pub fn new(config: TcdiffConfig, skeleton: Skeleton, seed: u64) -> Self {
        assert!(config.dancers >= 1, "model needs at least one dancer slot");
        assert!(config.width > 0 && config.width % config.heads == 0);
        assert!(
            config.ctx_width > config.time_dim / 2 + ROOT_DIM,
            "context width too small for its parts"
        );
        let mut store = ParamStore::new();
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let (c, w) = (config.dancers, config.width);

        let fusion = Mlp::new(
            &mut store,
            "tcdiff.fusion",
            &[c * FRAME_DIM, config.fusion_hidden, config.fusion_hidden, c * w],
            Activation::Relu,
            true,
            &mut rng,
        );
        let input_linear = Dense::new(&mut store, "tcdiff.input", w, w, &mut rng);
        let music_in = Dense::new(&mut store, "tcdiff.music_in", FEATURE_DIM, w, &mut rng);
        let time_mlp = Mlp::new(
            &mut store,
            "tcdiff.time_mlp",
            &[config.time_dim, w, w],
            Activation::LeakyRelu,
            false,
            &mut rng,
        );
        let blocks = (0..config.blocks)
            .map(|b| {
                let name = format!("tcdiff.block{b}");
                DecoderBlock {
                    norm_self: RmsNorm::new(&mut store, &format!("{name}.norm_self"), w),
                    self_attn: Attention::new(&mut store, &format!("{name}.self"), w, config.heads, false, None, &mut rng),
                    norm_cross: RmsNorm::new(&mut store, &format!("{name}.norm_cross"), w),
                    cross_attn: Attention::new(&mut store, &format!("{name}.cross"), w, config.heads, false, None, &mut rng),
                    norm_ffn: RmsNorm::new(&mut store, &format!("{name}.norm_ffn"), w),
                    ffn: Mlp::new(
                        &mut store,
                        &format!("{name}.ffn"),
                        &[w, config.ffn_mult * w, w],
                        Activation::Relu,
                        false,
                        &mut rng,
                    ),
                    time_proj: Dense::new(&mut store, &format!("{name}.time"), w, w, &mut rng),
                }
            })
            .collect();
        let output_linear = Dense::new(&mut store, "tcdiff.output", w, FRAME_DIM, &mut rng);

        let adaptor = config.footwork_adaptor.then(|| {
            let time_part = config.time_dim.min(config.ctx_width / 2);
            let music_part = config.ctx_width - time_part - ROOT_DIM;
            let mut layers = Vec::with_capacity(config.csl_layers);
            for i in 0..config.csl_layers {
                let output = if i + 1 == config.csl_layers { FRAME_DIM } else { config.csl_width };
                layers.push(ConcatSquash::new(
                    &mut store,
                    &format!("tcdiff.fa.csl{i}"),
                    config.csl_width,
                    config.ctx_width,
                    output,
                    &mut rng,
                ));
            }
            FootworkAdaptor {
                input: Dense::new(&mut store, "tcdiff.fa.input", FRAME_DIM, config.csl_width, &mut rng),
                layers,
                time_proj: Dense::new(&mut store, "tcdiff.fa.time", config.time_dim, time_part, &mut rng),
                music_proj: Dense::new(&mut store, "tcdiff.fa.music", FEATURE_DIM, music_part, &mut rng),
                time_part,
                music_part,
            }
        });

        let pe = sinusoidal_table(config.max_frames, w);
        TcdiffModel {
            store,
            config,
            skeleton,
            fusion,
            input_linear,
            music_in,
            time_mlp,
            blocks,
            output_linear,
            adaptor,
            pe,
        }
    }

    pub fn skeleton(&self) -> &Skeleton {
        &self.skeleton
    }

    fn check(&self, dancers: usize, frames: usize) -> Result<(), TcdiffError> {
        if dancers != self.config.dancers {
            return Err(TcdiffError::DancerMismatch {
                got: dancers,
                expected: self.config.dancers,
            });
        }
        if frames > self.config.max_frames {
            return Err(TcdiffError::Shape(format!(
                "{frames} frames exceed the model maximum {}",
                self.config.max_frames
            )));
        }
        Ok(())
    }

    fn timestep_feature(&self, s: &Session, t: usize) -> Var {
        let emb = sinusoidal_embedding(t as f64, self.config.time_dim);
        let leaf = s.tape.leaf(&emb);
        self.time_mlp.forward(s, leaf)
    }

    fn timestep_embedding(&self, s: &Session, t: usize) -> Var {
        s.tape.leaf(&sinusoidal_embedding(t as f64, self.config.time_dim))
    }

    /// Group-agent projection: per frame, every dancer's 151 channels are
    /// concatenated, passed through the fusion MLP, and split back into one
    /// width-sized token per dancer. Each output token therefore depends on
    /// every dancer's input.
    pub fn fusion_projection(&self, s: &Session, x_t: &[Var]) -> Result<Vec<Var>, TcdiffError> {
        let t = s.tape;
        self.check(x_t.len(), t.shape(x_t[0])[0])?;
        let group = if x_t.len() == 1 { x_t[0] } else { t.concat_cols(x_t) };
        let fused = self.fusion.forward(s, group);
        let w = self.config.width;
        Ok((0..self.config.dancers)
            .map(|c| t.slice_cols(fused, c * w, (c + 1) * w))
            .collect())
    }

    /// Decoder path: per-dancer temporal self-attention, cross-attention to
    /// the projected music frames, feed-forward, with the timestep feature
    /// injected in every block; a final linear maps back to 151 channels.
    pub fn decoder_forward(
        &self,
        s: &Session,
        tokens: &[Var],
        music: Var,
        t_step: usize,
    ) -> Result<Vec<Var>, TcdiffError> {
        let t = s.tape;
        let frames = t.shape(tokens[0])[0];
        if t.shape(music)[0] != frames {
            return Err(TcdiffError::Shape(format!(
                "music has {} frames, motion has {frames}",
                t.shape(music)[0]
            )));
        }
        let w = self.config.width;
        let pe = t.leaf_from(vec![frames, w], self.pe.data()[..frames * w].to_vec());
        let music_kv = t.add(self.music_in.forward(s, music), pe);
        let time_feat = self.timestep_feature(s, t_step);

        let mut out = Vec::with_capacity(tokens.len());
        for &tok in tokens {
            let mut x = t.add(self.input_linear.forward(s, tok), pe);
            for block in &self.blocks {
                let t_row = t.reshape(block.time_proj.forward(s, time_feat), vec![w]);
                x = t.add_row_broadcast(x, t_row);
                let normed = block.norm_self.forward(s, x);
                x = t.add(x, block.self_attn.forward(s, normed, normed));
                let normed = block.norm_cross.forward(s, x);
                x = t.add(x, block.cross_attn.forward(s, normed, music_kv));
                let normed = block.norm_ffn.forward(s, x);
                x = t.add(x, block.ffn.forward(s, normed));
            }
            out.push(self.output_linear.forward(s, x));
        }
        Ok(out)
    }

    /// Footwork correction: every dancer/frame gets a context vector
    /// `[timestep ‖ projected music ‖ trajectory offset]` that gates a
    /// concat-squash stack over the raw motion.
    pub fn footwork_adaptor(
        &self,
        s: &Session,
        raw: &[Var],
        t_step: usize,
        music: Var,
        offsets: &[Var],
    ) -> Result<Vec<Var>, TcdiffError> {
        let adaptor = self
            .adaptor
            .as_ref()
            .ok_or_else(|| TcdiffError::Config("footwork adaptor is disabled".into()))?;
        let t = s.tape;
        let frames = t.shape(raw[0])[0];
        let t_emb = self.timestep_embedding(s, t_step);
        let t_row = t.reshape(adaptor.time_proj.forward(s, t_emb), vec![adaptor.time_part]);
        let zeros = t.leaf_from(vec![frames, adaptor.time_part], vec![0.0; frames * adaptor.time_part]);
        let time_rows = t.add_row_broadcast(zeros, t_row);
        let music_rows = adaptor.music_proj.forward(s, music);
        debug_assert_eq!(t.shape(music_rows)[1], adaptor.music_part);

        let mut out = Vec::with_capacity(raw.len());
        for (c, &r) in raw.iter().enumerate() {
            let ctx = t.concat_cols(&[time_rows, music_rows, offsets[c]]);
            let mut x = adaptor.input.forward(s, r);
            for layer in &adaptor.layers {
                x = layer.forward(s, x, ctx);
            }
            out.push(x);
        }
        Ok(out)
    }

    /// Column ranges of the final motion: contact and lower-body pose come
    /// from the adapted motion, remaining pose from the raw motion, root
    /// from the conditioning trajectory.
    fn merge_channels(&self, s: &Session, raw: Var, adapted: Var, root: Var) -> Var {
        let t = s.tape;
        let mut parts: Vec<Var> = Vec::new();
        parts.push(t.slice_cols(adapted, 0, CONTACT_DIM)); // contact labels
        parts.push(root);
        let pose0 = CONTACT_DIM + ROOT_DIM;
        // walk joints, grouping contiguous runs with the same source
        let joints = self.skeleton.joints();
        let mut j = 0;
        while j < joints {
            let lower = self.skeleton.is_lower_body(j);
            let start = j;
            while j < joints && self.skeleton.is_lower_body(j) == lower {
                j += 1;
            }
            let (c0, c1) = (pose0 + 6 * start, pose0 + 6 * j);
            let src = if lower { adapted } else { raw };
            parts.push(t.slice_cols(src, c0, c1));
        }
        t.concat_cols(&parts)
    }

    /// Full denoiser on a tape: raw motion from the decoder path, adapted
    /// footwork from the offsets, lower body merged in, roots pinned to the
    /// conditioning trajectory. Returns one `[L, 151]` var per dancer.
    pub fn denoise_tape(
        &self,
        s: &Session,
        x_t: &[Var],
        t_step: usize,
        music: Var,
        roots: &[Var],
        offsets: &[Var],
    ) -> Result<Vec<Var>, TcdiffError> {
        let tokens = self.fusion_projection(s, x_t)?;
        let raw = self.decoder_forward(s, &tokens, music, t_step)?;
        let t = s.tape;
        if self.adaptor.is_some() {
            let adapted = self.footwork_adaptor(s, &raw, t_step, music, offsets)?;
            Ok((0..raw.len())
                .map(|c| self.merge_channels(s, raw[c], adapted[c], roots[c]))
                .collect())
        } else {
            // ablation: keep the raw prediction, still pin the roots
            Ok(raw
                .iter()
                .enumerate()
                .map(|(c, &r)| {
                    let contact = t.slice_cols(r, 0, CONTACT_DIM);
                    let pose = t.slice_cols(r, CONTACT_DIM + ROOT_DIM, FRAME_DIM);
                    t.concat_cols(&[contact, roots[c], pose])
                })
                .collect())
        }
    }

    /// Plain (non-recording) denoiser for sampling and evaluation.
    pub fn denoise(
        &self,
        x_t: &GroupMotionSequence,
        t_step: usize,
        music: &MusicFeatureSequence,
        trajectory: &TrajectorySequence,
    ) -> Result<GroupMotionSequence, TcdiffError> {
        let dancers = x_t.dancers();
        let frames = x_t.frames();
        self.check(dancers, frames)?;
        if music.frames() != frames || trajectory.frames() != frames {
            return Err(TcdiffError::Shape(format!(
                "lengths disagree: motion {frames}, music {}, trajectory {}",
                music.frames(),
                trajectory.frames()
            )));
        }
        let tape = Tape::new();
        let session = Session::new(&tape, &self.store);
        let (x_vars, music_var, root_vars, offset_vars) =
            bind_denoiser_inputs(&tape, x_t, music, trajectory);
        let out = self.denoise_tape(&session, &x_vars, t_step, music_var, &root_vars, &offset_vars)?;
        let mut channels = Vec::with_capacity(dancers * frames * FRAME_DIM);
        for v in out {
            channels.extend_from_slice(&tape.data(v));
        }
        GroupMotionSequence::from_channels(dancers, frames, x_t.fps, &channels)
            .map_err(|e| TcdiffError::Shape(e.to_string()))
    }
}

/// Bind a denoiser input set as tape leaves: per-dancer motion channels,
/// music rows, per-dancer root rows and trajectory offsets.
pub(crate) fn bind_denoiser_inputs(
    tape: &Tape,
    x_t: &GroupMotionSequence,
    music: &MusicFeatureSequence,
    trajectory: &TrajectorySequence,
) -> (Vec<Var>, Var, Vec<Var>, Vec<Var>) {
    let frames = x_t.frames();
    let x_vars: Vec<Var> = (0..x_t.dancers())
        .map(|c| {
            let mut data = Vec::with_capacity(frames * FRAME_DIM);
            for l in 0..frames {
                data.extend_from_slice(&x_t.frame(c, l).pack());
            }
            tape.leaf_from(vec![frames, FRAME_DIM], data)
        })
        .collect();
    let music_var = tape.leaf_from(vec![frames, FEATURE_DIM], music.data().to_vec());
    let offsets = TrajectoryOffsets::from_trajectory(trajectory);
    let root_vars: Vec<Var> = (0..trajectory.dancers())
        .map(|c| {
            let data: Vec<f64> = trajectory.dancer(c).iter().flatten().copied().collect();
            tape.leaf_from(vec![frames, 3], data)
        })
        .collect();
    let offset_vars: Vec<Var> = (0..trajectory.dancers())
        .map(|c| {
            let data: Vec<f64> = offsets.dancer(c).iter().flatten().copied().collect();
            tape.leaf_from(vec![frames, 3], data)
        })
        .collect();
    (x_vars, music_var, root_vars, offset_vars)
}
