//! Embedding-parametrized similarity matrices and the target-to-source
//! translation of summary vectors.
//!
//! For target item `i` and source item `j` the logit is `e_i . e_j`. The
//! target-to-source matrix normalizes each row over source items; the
//! source-to-target matrix reuses the same logits transposed and normalizes
//! over target items.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::mat::{softmax_rows, Mat};
use crate::dialog::{joint_input, SummaryLayout, N_BUCKETS};
use crate::error::{Error, Result};
use crate::gp::{GpModel, QFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    T2s,
    S2t,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingParams {
    pub dim: usize,
    pub act_target: Mat,
    pub act_source: Mat,
    pub slot_target: Mat,
    pub slot_source: Mat,
}

impl MappingParams {
    /// Entries drawn from `N(0, 1/d)`.
    pub fn random(
        target: &SummaryLayout,
        source: &SummaryLayout,
        dim: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding dimension must be at least 1".into()));
        }
        let normal = Normal::new(0.0, 1.0 / (dim as f64).sqrt()).expect("valid std");
        let mut draw = |rows| Mat::from_fn(rows, dim, |_, _| normal.sample(&mut *rng));
        Ok(MappingParams {
            dim,
            act_target: draw(target.n_acts),
            act_source: draw(source.n_acts),
            slot_target: draw(target.n_slots),
            slot_source: draw(source.n_slots),
        })
    }

    pub fn n_params(&self) -> usize {
        self.act_target.data.len()
            + self.act_source.data.len()
            + self.slot_target.data.len()
            + self.slot_source.data.len()
    }

    /// All entries in the order act target, act source, slot target, slot source.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        for m in [&self.act_target, &self.act_source, &self.slot_target, &self.slot_source] {
            v.extend_from_slice(&m.data);
        }
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::Dimension {
                expected: self.n_params(),
                actual: flat.len(),
            });
        }
        let mut off = 0;
        for m in [
            &mut self.act_target,
            &mut self.act_source,
            &mut self.slot_target,
            &mut self.slot_source,
        ] {
            let n = m.data.len();
            m.data.copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        [&self.act_target, &self.act_source, &self.slot_target, &self.slot_source]
            .iter()
            .all(|m| m.is_finite())
    }
}

fn similarity(target: &Mat, source: &Mat, direction: Direction) -> Result<Mat> {
    let logits = target.mul_transpose(source);
    if !logits.is_finite() {
        return Err(Error::NonFinite("similarity logits"));
    }
    Ok(match direction {
        Direction::T2s => softmax_rows(&logits),
        Direction::S2t => softmax_rows(&logits.transpose()),
    })
}

pub fn act_similarity_matrix(params: &MappingParams, direction: Direction) -> Result<Mat> {
    similarity(&params.act_target, &params.act_source, direction)
}

pub fn slot_similarity_matrix(params: &MappingParams, direction: Direction) -> Result<Mat> {
    similarity(&params.slot_target, &params.slot_source, direction)
}

/// `a * M`.
pub fn translate_act(a: &[f64], m: &Mat) -> Result<Vec<f64>> {
    m.left_mul(a)
}

/// How one block (acts or slots) is mapped across domains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Block {
    /// Softmax of embedding dot products; trainable.
    Learned,
    /// Pinned matrices that bypass the embeddings.
    Fixed { t2s: Mat, s2t: Mat },
}

impl Block {
    /// Pin a target-to-source matrix; the reverse direction is its transpose
    /// with non-zero rows renormalized.
    pub fn fixed(t2s: Mat) -> Self {
        let mut s2t = t2s.transpose();
        for i in 0..s2t.rows {
            let row = s2t.row_mut(i);
            let sum: f64 = row.iter().sum();
            if sum > 0.0 {
                row.iter_mut().for_each(|v| *v /= sum);
            }
        }
        Block::Fixed { t2s, s2t }
    }

    pub fn is_learned(&self) -> bool {
        matches!(self, Block::Learned)
    }
}

/// Embeddings plus the act and slot block modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferMapping {
    pub params: MappingParams,
    pub acts: Block,
    pub slots: Block,
}

impl TransferMapping {
    pub fn learned(params: MappingParams) -> Self {
        TransferMapping {
            params,
            acts: Block::Learned,
            slots: Block::Learned,
        }
    }

    pub fn matrices(&self) -> Result<Matrices> {
        let (act_t2s, act_s2t) = match &self.acts {
            Block::Learned => (
                act_similarity_matrix(&self.params, Direction::T2s)?,
                act_similarity_matrix(&self.params, Direction::S2t)?,
            ),
            Block::Fixed { t2s, s2t } => (t2s.clone(), s2t.clone()),
        };
        let (slot_t2s, slot_s2t) = match &self.slots {
            Block::Learned => (
                slot_similarity_matrix(&self.params, Direction::T2s)?,
                slot_similarity_matrix(&self.params, Direction::S2t)?,
            ),
            Block::Fixed { t2s, s2t } => (t2s.clone(), s2t.clone()),
        };
        Ok(Matrices {
            act_t2s,
            act_s2t,
            slot_t2s,
            slot_s2t,
        })
    }
}

/// The four materialized similarity matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrices {
    pub act_t2s: Mat,
    pub act_s2t: Mat,
    pub slot_t2s: Mat,
    pub slot_s2t: Mat,
}

impl Matrices {
    pub fn zeros_like(&self) -> Matrices {
        let z = |m: &Mat| Mat::zeros(m.rows, m.cols);
        Matrices {
            act_t2s: z(&self.act_t2s),
            act_s2t: z(&self.act_s2t),
            slot_t2s: z(&self.slot_t2s),
            slot_s2t: z(&self.slot_s2t),
        }
    }

    pub fn add_scaled(&mut self, scale: f64, other: &Matrices) {
        self.act_t2s.add_scaled(scale, &other.act_t2s);
        self.act_s2t.add_scaled(scale, &other.act_s2t);
        self.slot_t2s.add_scaled(scale, &other.slot_t2s);
        self.slot_s2t.add_scaled(scale, &other.slot_s2t);
    }

    fn check(&self, target: &SummaryLayout, source: &SummaryLayout) -> Result<()> {
        let want = [
            (self.act_t2s.rows, target.n_acts),
            (self.act_t2s.cols, source.n_acts),
            (self.slot_t2s.rows, target.n_slots),
            (self.slot_t2s.cols, source.n_slots),
        ];
        for (got, expected) in want {
            if got != expected {
                return Err(Error::Dimension {
                    expected,
                    actual: got,
                });
            }
        }
        Ok(())
    }
}

fn check_len(v: &[f64], expected: usize) -> Result<()> {
    if v.len() != expected {
        return Err(Error::Dimension {
            expected,
            actual: v.len(),
        });
    }
    Ok(())
}

/// `[act * M_a ; slot * M_s]`.
pub fn translate_sentence(
    y: &[f64],
    mats: &Matrices,
    target: &SummaryLayout,
    source: &SummaryLayout,
) -> Result<Vec<f64>> {
    check_len(y, target.action_dim())?;
    mats.check(target, source)?;
    let mut out = vec![0.0; source.action_dim()];
    mats.act_t2s
        .left_mul_into(&y[target.act_range()], &mut out[source.act_range()]);
    mats.slot_t2s
        .left_mul_into(&y[target.slot_range()], &mut out[source.slot_range()]);
    Ok(out)
}

/// `[l ; a * M_a ; constraints * M_s ; requests * M_s]`; the match-count
/// bucket block is shared by both domains and copied.
pub fn translate_state(
    h: &[f64],
    mats: &Matrices,
    target: &SummaryLayout,
    source: &SummaryLayout,
) -> Result<Vec<f64>> {
    check_len(h, target.state_dim())?;
    mats.check(target, source)?;
    let mut out = vec![0.0; source.state_dim()];
    out[..N_BUCKETS].copy_from_slice(&h[..N_BUCKETS]);
    mats.act_t2s
        .left_mul_into(&h[target.user_act_range()], &mut out[source.user_act_range()]);
    mats.slot_t2s.left_mul_into(
        &h[target.constraint_range()],
        &mut out[source.constraint_range()],
    );
    mats.slot_t2s
        .left_mul_into(&h[target.request_range()], &mut out[source.request_range()]);
    Ok(out)
}

/// Target Q-function read off the source GP at translated coordinates.
#[derive(Debug, Clone)]
pub struct TransferQ<'a> {
    pub source: &'a GpModel,
    pub mats: Matrices,
    pub target: SummaryLayout,
    pub source_layout: SummaryLayout,
}

impl<'a> TransferQ<'a> {
    pub fn new(
        source: &'a GpModel,
        mapping: &TransferMapping,
        target: SummaryLayout,
        source_layout: SummaryLayout,
    ) -> Result<Self> {
        Self::from_matrices(source, mapping.matrices()?, target, source_layout)
    }

    pub fn from_matrices(
        source: &'a GpModel,
        mats: Matrices,
        target: SummaryLayout,
        source_layout: SummaryLayout,
    ) -> Result<Self> {
        mats.check(&target, &source_layout)?;
        if source.dim() != source_layout.input_dim() {
            return Err(Error::Dimension {
                expected: source_layout.input_dim(),
                actual: source.dim(),
            });
        }
        Ok(TransferQ {
            source,
            mats,
            target,
            source_layout,
        })
    }

    pub fn translate(&self, h: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        let hs = translate_state(h, &self.mats, &self.target, &self.source_layout)?;
        let ys = translate_sentence(y, &self.mats, &self.target, &self.source_layout)?;
        Ok(joint_input(&hs, &ys))
    }
}

impl QFunction for TransferQ<'_> {
    fn q_mean_var(&self, state: &[f64], action: &[f64]) -> Result<(f64, f64)> {
        self.source.mean_var(&self.translate(state, action)?)
    }

    fn q_mean(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        self.source.mean(&self.translate(state, action)?)
    }
}

/// `Q^t(h, y) = Q^s(f_h(h), f_y(y))`, posterior mean.
pub fn q_transfer(
    mapping: &TransferMapping,
    source: &GpModel,
    target: SummaryLayout,
    source_layout: SummaryLayout,
    h: &[f64],
    y: &[f64],
) -> Result<f64> {
    TransferQ::new(source, mapping, target, source_layout)?.q_mean(h, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::user_sim::rng_for;

    fn params_2x2() -> MappingParams {
        MappingParams {
            dim: 2,
            act_target: Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]),
            act_source: Mat::from_rows(&[vec![2.0, 0.0], vec![0.0, 2.0]]),
            slot_target: Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]),
            slot_source: Mat::from_rows(&[vec![2.0, 0.0], vec![0.0, 2.0]]),
        }
    }

    #[test]
    fn hand_softmax_example() {
        let p = params_2x2();
        let e2 = 2.0f64.exp();
        let want = e2 / (e2 + 1.0);
        for m in [
            act_similarity_matrix(&p, Direction::T2s).unwrap(),
            act_similarity_matrix(&p, Direction::S2t).unwrap(),
            slot_similarity_matrix(&p, Direction::T2s).unwrap(),
        ] {
            assert!((m[(0, 0)] - want).abs() < 1e-15);
            assert!((m[(0, 0)] - 0.8808).abs() < 1e-4);
        }
    }

    #[test]
    fn equal_embeddings_give_uniform_rows() {
        let mut p = params_2x2();
        p.act_target = Mat::from_fn(3, 2, |_, _| 0.7);
        p.act_source = Mat::from_fn(4, 2, |_, _| 0.7);
        let m = act_similarity_matrix(&p, Direction::T2s).unwrap();
        assert!(m.data.iter().all(|&v| (v - 0.25).abs() < 1e-15));
        let m = act_similarity_matrix(&p, Direction::S2t).unwrap();
        assert_eq!((m.rows, m.cols), (4, 3));
        assert!(m.data.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn non_finite_logits_error() {
        let mut p = params_2x2();
        p.act_target[(0, 0)] = f64::NAN;
        assert!(matches!(
            act_similarity_matrix(&p, Direction::T2s),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn translate_act_examples() {
        let m = Mat::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8]]);
        assert_eq!(translate_act(&[1.0, 0.0], &m).unwrap(), vec![0.9, 0.1]);
        let u = Mat::from_fn(3, 3, |_, _| 1.0 / 3.0);
        let out = translate_act(&[1.0 / 3.0; 3], &u).unwrap();
        assert!(out.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        assert!(translate_act(&[1.0], &m).is_err());
    }

    #[test]
    fn fixed_block_reverse_is_normalized_transpose() {
        let t2s = Mat::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0], vec![0.0, 0.0]]);
        let Block::Fixed { s2t, .. } = Block::fixed(t2s) else { unreachable!() };
        assert_eq!(s2t, Mat::from_rows(&[vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0]]));
    }

    #[test]
    fn random_init_is_seeded() {
        let t = SummaryLayout { n_acts: 3, n_slots: 4 };
        let s = SummaryLayout { n_acts: 2, n_slots: 5 };
        let a = MappingParams::random(&t, &s, 8, &mut rng_for(1, 0)).unwrap();
        let b = MappingParams::random(&t, &s, 8, &mut rng_for(1, 0)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_params(), (3 + 2 + 4 + 5) * 8);
        let mut c = a.clone();
        c.set_flat(&vec![0.0; a.n_params()]).unwrap();
        assert!(c.flatten().iter().all(|&v| v == 0.0));
        assert!(MappingParams::random(&t, &s, 0, &mut rng_for(1, 0)).is_err());
    }
}
