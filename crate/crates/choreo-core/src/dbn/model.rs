use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::audio::{MusicFeatureSequence, FEATURE_DIM};
use crate::nn::{sinusoidal_table, Attention, Lstm, Mlp, ParamId, ParamStore, Session, Tape, Tensor, Var};
use crate::nn::Activation;

use super::savgol::savgol_smooth;
use super::{DbnError, TrajectorySequence};

/// Navigator hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct DbnConfig {
    pub hidden: usize,
    /// Stacked trajectory-attention blocks (M).
    pub attention_blocks: usize,
    pub heads: usize,
    pub lstm_layers: usize,
    pub music_mlp_layers: usize,
    pub decoder_layers: usize,
    pub max_dancers: usize,
    pub max_frames: usize,
}

impl DbnConfig {
    /// Desk-scale defaults: everything trains in minutes on one CPU core.
    pub fn desk() -> Self {
        DbnConfig {
            hidden: 32,
            attention_blocks: 2,
            heads: 4,
            lstm_layers: 3,
            music_mlp_layers: 3,
            decoder_layers: 4,
            max_dancers: 6,
            max_frames: 64,
        }
    }

    /// Published configuration: hidden 64, M = 6 blocks, 8 heads, 3-layer
    /// LSTM and music MLP, 4-layer decoder, 120-frame windows.
    pub fn paper() -> Self {
        DbnConfig {
            hidden: 64,
            attention_blocks: 6,
            heads: 8,
            lstm_layers: 3,
            music_mlp_layers: 3,
            decoder_layers: 4,
            max_dancers: 8,
            max_frames: 120,
        }
    }
}

struct TrajectoryAttentionBlock {
    attention: Attention,
    mlp: Mlp,
}

/// The dance-beat navigator.
pub struct DbnModel {
    pub store: ParamStore,
    pub config: DbnConfig,
    music_mlp: Mlp,
    lstm: Lstm,
    identity: ParamId,
    tpe: Tensor,
    blocks: Vec<TrajectoryAttentionBlock>,
    decoder: Mlp,
}

impl DbnModel {
    pub fn new(config: DbnConfig, seed: u64) -> Self {
        assert!(config.hidden > 0, "hidden width must be positive");
        let mut store = ParamStore::new();
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let h = config.hidden;

        let mut music_dims = vec![FEATURE_DIM];
        music_dims.extend(std::iter::repeat(h).take(config.music_mlp_layers));
        let music_mlp = Mlp::new(&mut store, "dbn.music_mlp", &music_dims, Activation::Relu, false, &mut rng);

        let lstm = Lstm::new(&mut store, "dbn.lstm", 3, h, config.lstm_layers, &mut rng);

        let identity = store.add(
            "dbn.identity",
            Tensor::init_uniform(vec![config.max_dancers, h], h, &mut rng),
        );
        let tpe = sinusoidal_table(config.max_frames, h);

        let blocks = (0..config.attention_blocks)
            .map(|b| TrajectoryAttentionBlock {
                attention: Attention::new(
                    &mut store,
                    &format!("dbn.block{b}.attn"),
                    h,
                    config.heads,
                    true,
                    Some(config.max_frames),
                    &mut rng,
                ),
                mlp: Mlp::new(
                    &mut store,
                    &format!("dbn.block{b}.mlp"),
                    &[h, 2 * h, h],
                    Activation::Relu,
                    false,
                    &mut rng,
                ),
            })
            .collect();

        let mut dec_dims = vec![h; config.decoder_layers];
        dec_dims.push(3);
        let decoder = Mlp::new(&mut store, "dbn.decoder", &dec_dims, Activation::LeakyRelu, false, &mut rng);

        DbnModel {
            store,
            config,
            music_mlp,
            lstm,
            identity,
            tpe,
            blocks,
            decoder,
        }
    }

    fn check_limits(&self, dancers: usize, frames: usize) -> Result<(), DbnError> {
        if dancers == 0 || dancers > self.config.max_dancers {
            return Err(DbnError::TooManyDancers {
                got: dancers,
                max: self.config.max_dancers,
            });
        }
        if frames > self.config.max_frames {
            return Err(DbnError::TooLong {
                got: frames,
                max: self.config.max_frames,
            });
        }
        Ok(())
    }

    /// Encode a music/position history into per-dancer hidden sequences.
    ///
    /// `music` is `[L', 35]`, `positions` is `[L', C·3]` (dancer-major per
    /// row). Causal attention guarantees row `i` of the result depends on
    /// rows `0..=i` only.
    pub fn encode(
        &self,
        s: &Session,
        music: Var,
        positions: Var,
        dancers: usize,
    ) -> Result<Vec<Var>, DbnError> {
        let t = s.tape;
        let frames = t.shape(music)[0];
        self.check_limits(dancers, frames)?;

        let tpe = t.leaf_from(vec![frames, self.config.hidden], self.tpe.data()[..frames * self.config.hidden].to_vec());

        // music side: per-frame MLP + temporal encoding
        let m_feat = self.music_mlp.forward(s, music);
        let queries = t.add(m_feat, tpe);

        // position side: stacked LSTM over [C, 3] rows per step
        let per_step: Vec<Var> = (0..frames)
            .map(|i| t.reshape(t.slice_rows(positions, i, i + 1), vec![dancers, 3]))
            .collect();
        let lstm_out = self.lstm.forward_sequence(s, &per_step, dancers);

        let identity = s.param(self.identity);
        let mut hidden = Vec::with_capacity(dancers);
        for c in 0..dancers {
            // gather dancer c's sequence and add identity + temporal codes
            let rows: Vec<Var> = lstm_out.iter().map(|&step| t.slice_rows(step, c, c + 1)).collect();
            let seq = t.concat_rows(&rows);
            let ie = t.slice_rows(identity, c, c + 1);
            let keyed = t.add(t.add_row_broadcast(seq, t.reshape(ie, vec![self.config.hidden])), tpe);

            let mut x = queries;
            for block in &self.blocks {
                x = t.add(x, block.attention.forward(s, x, keyed));
                x = t.add(x, block.mlp.forward(s, x));
            }
            hidden.push(x);
        }
        Ok(hidden)
    }

    /// Decode hidden rows into one coordinate triple per row.
    pub fn decode(&self, s: &Session, hidden: Var) -> Var {
        self.decoder.forward(s, hidden)
    }

    /// Teacher-forced predictions: feeds ground-truth history `[L', C·3]`
    /// and returns per-dancer predictions for frames `1..=L'` as `[L', 3]`.
    pub fn predict_teacher_forced(
        &self,
        s: &Session,
        music: Var,
        positions: Var,
        dancers: usize,
    ) -> Result<Vec<Var>, DbnError> {
        let hidden = self.encode(s, music, positions, dancers)?;
        Ok(hidden.into_iter().map(|h| self.decode(s, h)).collect())
    }

    /// Free-running rollout: frame 0 of the result is the seed formation,
    /// frames `1..L` are generated autoregressively from the music. With
    /// `smooth`, every coordinate channel is Savitzky–Golay filtered
    /// (window 5, order 3).
    pub fn rollout(
        &self,
        music: &MusicFeatureSequence,
        seed: &[[f64; 3]],
        smooth: bool,
    ) -> Result<TrajectorySequence, DbnError> {
        let frames = music.frames();
        let dancers = seed.len();
        if frames < 2 {
            return Err(DbnError::TooShort(2));
        }
        self.check_limits(dancers, frames)?;

        let mut positions: Vec<Vec<[f64; 3]>> = vec![Vec::with_capacity(frames); dancers];
        for (c, p) in seed.iter().enumerate() {
            positions[c].push(*p);
        }
        for step in 1..frames {
            // re-encode the prefix of length `step`
            let tape = Tape::new();
            let s = Session::new(&tape, &self.store);
            let music_var = tape.leaf_from(
                vec![step, FEATURE_DIM],
                music.data()[..step * FEATURE_DIM].to_vec(),
            );
            let mut pos_data = Vec::with_capacity(step * dancers * 3);
            for f in 0..step {
                for d in positions.iter() {
                    pos_data.extend_from_slice(&d[f]);
                }
            }
            let pos_var = tape.leaf_from(vec![step, dancers * 3], pos_data);
            let hidden = self.encode(&s, music_var, pos_var, dancers)?;
            for (c, h) in hidden.into_iter().enumerate() {
                let pred = self.decode(&s, h);
                let value = tape.value(pred);
                let row = &value.data()[(step - 1) * 3..step * 3];
                positions[c].push([row[0], row[1], row[2]]);
            }
        }

        if smooth {
            for dancer in positions.iter_mut() {
                for axis in 0..3 {
                    let series: Vec<f64> = dancer.iter().map(|p| p[axis]).collect();
                    let smoothed = savgol_smooth(&series, 5, 3)?;
                    for (p, v) in dancer.iter_mut().zip(smoothed) {
                        p[axis] = v;
                    }
                }
            }
        }
        TrajectorySequence::new(positions, music.fps)
    }
}
