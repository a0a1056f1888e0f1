//! Composite operations built from tape primitives.

use super::tape::{Tape, Var};
use crate::error::{Error, Result};

/// out[n,d] = Σ_k W[d,k]·x[n,k] (+ bias[d]); x: N×K, w: D×K.
pub fn linear(tape: &mut Tape, x: Var, w: Var, bias: Option<Var>) -> Result<Var> {
    let y = tape.matmul_nt(x, w)?;
    match bias {
        Some(b) => tape.add_bias(y, b),
        None => Ok(y),
    }
}

/// Scaled dot-product attention: softmax(QKᵀ/√d_k)·V.
/// Q: N×d_k, K: M×d_k, V: M×d_v with M ≥ 1.
pub fn softmax_attention(tape: &mut Tape, q: Var, k: Var, v: Var) -> Result<Var> {
    let (dq, dk) = (tape.value(q).cols(), tape.value(k).cols());
    let m = tape.value(k).rows();
    if dq != dk {
        return Err(Error::Shape {
            op: "softmax_attention",
            detail: format!("Q has d_k={dq} but K has d_k={dk}"),
        });
    }
    if m == 0 || tape.value(k).numel() == 0 {
        return Err(Error::State(
            "softmax_attention over empty memory (M = 0); bootstrap the first frame first".into(),
        ));
    }
    if tape.value(v).rows() != m {
        return Err(Error::Shape {
            op: "softmax_attention",
            detail: format!("K has {m} rows but V has {}", tape.value(v).rows()),
        });
    }
    let scores = tape.matmul_nt(q, k)?;
    let scaled = tape.scale(scores, 1.0 / (dk as f64).sqrt());
    let probs = tape.softmax_rows(scaled);
    tape.matmul_nn(probs, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::tensor::Tensor;

    #[test]
    fn linear_identity() {
        let mut tape = Tape::new();
        let eye = Tensor::new(vec![3, 3], vec![1., 0., 0., 0., 1., 0., 0., 0., 1.]);
        let x = tape.constant(eye.clone());
        let w = tape.constant(eye.clone());
        let y = linear(&mut tape, x, w, None).unwrap();
        assert_eq!(tape.value(y).data, eye.data);
    }

    #[test]
    fn linear_zero_weight_annihilates() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(vec![2, 3], vec![1., -2., 3., 4., 5., -6.]));
        let w = tape.constant(Tensor::zeros(&[4, 3]));
        let y = linear(&mut tape, x, w, None).unwrap();
        assert!(tape.value(y).data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_shape_mismatch_names_shapes() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::zeros(&[2, 3]));
        let w = tape.constant(Tensor::zeros(&[4, 5]));
        let err = linear(&mut tape, x, w, None).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3]") && msg.contains("[4, 5]"), "got: {msg}");
    }

    #[test]
    fn attention_single_memory_row_returns_v() {
        let mut tape = Tape::new();
        let q = tape.constant(Tensor::new(vec![2, 3], vec![5., -1., 2., 0.3, 0., 9.]));
        let k = tape.constant(Tensor::new(vec![1, 3], vec![1., 2., 3.]));
        let v = tape.constant(Tensor::new(vec![1, 4], vec![7., 8., 9., 10.]));
        let out = softmax_attention(&mut tape, q, k, v).unwrap();
        let o = tape.value(out);
        assert_eq!(o.shape, vec![2, 4]);
        for r in 0..2 {
            for c in 0..4 {
                assert!((o.at2(r, c) - [7., 8., 9., 10.][c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn attention_zero_query_is_uniform_average() {
        let mut tape = Tape::new();
        let q = tape.constant(Tensor::zeros(&[1, 2]));
        let k = tape.constant(Tensor::new(vec![3, 2], vec![1., 0., 0., 1., 1., 1.]));
        let v = tape.constant(Tensor::new(vec![3, 2], vec![3., 0., 0., 6., 3., 3.]));
        let out = softmax_attention(&mut tape, q, k, v).unwrap();
        let o = tape.value(out);
        assert!((o.data[0] - 2.0).abs() < 1e-12);
        assert!((o.data[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn attention_empty_memory_is_an_error() {
        let mut tape = Tape::new();
        let q = tape.constant(Tensor::zeros(&[1, 2]));
        let k = tape.constant(Tensor::zeros(&[0, 2]));
        let v = tape.constant(Tensor::zeros(&[0, 2]));
        let err = softmax_attention(&mut tape, q, k, v).unwrap_err();
        assert!(err.to_string().contains("empty memory"));
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(vec![2, 3], vec![1., 2., 3., -5., 0., 5.]));
        let p = tape.softmax_rows(x);
        for row in tape.value(p).data.chunks(3) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
