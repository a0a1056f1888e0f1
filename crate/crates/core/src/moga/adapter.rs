//! Gated rank-1 adapter bank.
//!
//! A frozen base weight W₀ ∈ ℝ^{D×K} is augmented by R rank-1 components
//! {aᵢ ∈ ℝ^K, bᵢ ∈ ℝ^D}. Stacked as A (R×K, rows aᵢ) and B (D×R, columns
//! bᵢ) they are exactly the dense low-rank delta ΔW = B·A. Each tracked
//! object contributes its own gated subset of components, and the object
//! deltas are averaged:
//!
//! ```text
//! h = W₀x + (1/O)·Σ_o (Σᵢ z_{o,i}·bᵢaᵢᵀ)·x
//! ```
//!
//! The forward path is always factored — per object y_o = B·(z_o ⊙ (A·x))
//! — so no D×K delta is ever materialized.

use crate::error::{Error, Result};
use crate::numkit::tensor::matmul_nn;
use crate::numkit::{Tape, Tensor, Var};
use crate::rng::{normal, Stream};

#[derive(Clone, Debug)]
pub struct Rank1AdapterBank {
    /// Frozen base weight, D×K.
    pub w0: Tensor,
    /// Component input vectors, stacked R×K (row i is aᵢ).
    pub a: Tensor,
    /// Component output vectors, stacked D×R (column i is bᵢ).
    pub b: Tensor,
}

impl Rank1AdapterBank {
    /// Fresh bank around an existing base weight: aᵢ ~ N(0, 0.02²) and
    /// bᵢ = 0, so the adapted forward initially equals the frozen one.
    pub fn init(w0: Tensor, rank: usize, rng: &mut Stream) -> Result<Self> {
        if w0.ndim() != 2 || w0.shape[0] == 0 || w0.shape[1] == 0 || rank == 0 {
            return Err(Error::Config(format!(
                "adapter bank needs a 2-D base weight and rank >= 1, got {:?} rank {rank}",
                w0.shape
            )));
        }
        let k = w0.shape[1];
        let d = w0.shape[0];
        let a = Tensor::new(vec![rank, k], (0..rank * k).map(|_| 0.02 * normal(rng)).collect());
        let b = Tensor::zeros(&[d, rank]);
        Ok(Rank1AdapterBank { w0, a, b })
    }

    pub fn rank(&self) -> usize {
        self.a.shape[0]
    }

    pub fn d_out(&self) -> usize {
        self.w0.shape[0]
    }

    pub fn d_in(&self) -> usize {
        self.w0.shape[1]
    }

    /// Dense ΔW = B·A, for oracles and inspection only.
    pub fn dense_delta(&self) -> Tensor {
        let (d, r, k) = (self.d_out(), self.rank(), self.d_in());
        Tensor::new(vec![d, k], matmul_nn(&self.b.data, &self.a.data, d, r, k))
    }

    /// Σᵢ bᵢaᵢᵀ accumulated component by component; must reconstruct
    /// `dense_delta` exactly.
    pub fn sum_of_outer_products(&self) -> Tensor {
        let (d, r, k) = (self.d_out(), self.rank(), self.d_in());
        let mut out = vec![0.0; d * k];
        for i in 0..r {
            for row in 0..d {
                let bi = self.b.data[row * r + i];
                let orow = &mut out[row * k..(row + 1) * k];
                let arow = &self.a.data[i * k..(i + 1) * k];
                for c in 0..k {
                    orow[c] += bi * arow[c];
                }
            }
        }
        Tensor::new(vec![d, k], out)
    }
}

/// Tape handles for one bank's weights within a forward pass.
#[derive(Clone, Copy, Debug)]
pub struct BankVars {
    pub w0: Var,
    pub a: Var,
    pub b: Var,
}

/// The object-averaged adapted forward pass. `gates` holds one length-R
/// gate vector per tracked object (O ≥ 1); pass binary constants at
/// inference and STE outputs during training.
pub fn moga_forward(tape: &mut Tape, x: Var, bank: BankVars, gates: &[Var]) -> Result<Var> {
    if gates.is_empty() {
        return Err(Error::State(
            "moga_forward needs at least one object gate vector (O >= 1)".into(),
        ));
    }
    let r = tape.value(bank.a).shape[0];
    for (o, &z) in gates.iter().enumerate() {
        if tape.value(z).numel() != r {
            return Err(Error::Shape {
                op: "moga_forward",
                detail: format!(
                    "gate vector for object {o} has {} components, bank rank is {r}",
                    tape.value(z).numel()
                ),
            });
        }
    }

    let base = tape.matmul_nt(x, bank.w0)?;
    // component activations aᵢᵀx are shared across objects
    let t = tape.matmul_nt(x, bank.a)?; // N×R
    let mut delta_sum: Option<Var> = None;
    for &z in gates {
        let gated = tape.mul_row(t, z)?;
        let y_o = tape.matmul_nt(gated, bank.b)?; // (N×R)·(D×R)ᵀ = N×D
        delta_sum = Some(match delta_sum {
            Some(acc) => tape.add(acc, y_o)?,
            None => y_o,
        });
    }
    let avg = tape.scale(delta_sum.unwrap(), 1.0 / gates.len() as f64);
    tape.add(base, avg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::tensor::matmul_nt;
    use crate::rng::stream;

    fn randn(rng: &mut Stream, shape: &[usize]) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| normal(rng)).collect())
    }

    fn rand_bank(rng: &mut Stream, d: usize, k: usize, r: usize) -> Rank1AdapterBank {
        let mut bank = Rank1AdapterBank::init(randn(rng, &[d, k]), r, rng).unwrap();
        bank.b = randn(rng, &[d, r]);
        bank
    }

    #[test]
    fn outer_product_sum_reconstructs_dense_delta() {
        let mut rng = stream(11);
        let bank = rand_bank(&mut rng, 6, 5, 4);
        let dense = bank.dense_delta();
        let outer = bank.sum_of_outer_products();
        assert!(dense.max_abs_diff(&outer) < 1e-12);
    }

    #[test]
    fn fresh_bank_is_inert_for_any_gates() {
        let mut rng = stream(12);
        let bank = Rank1AdapterBank::init(randn(&mut rng, &[4, 3]), 5, &mut rng).unwrap();
        let x0 = randn(&mut rng, &[2, 3]);

        let mut tape = Tape::new();
        let x = tape.constant(x0.clone());
        let vars = BankVars {
            w0: tape.constant(bank.w0.clone()),
            a: tape.constant(bank.a.clone()),
            b: tape.constant(bank.b.clone()),
        };
        let ones = tape.constant(Tensor::filled(&[5], 1.0));
        let out = moga_forward(&mut tape, x, vars, &[ones]).unwrap();

        let base = matmul_nt(&x0.data, &bank.w0.data, 2, 3, 4);
        for (y, b) in tape.value(out).data.iter().zip(&base) {
            assert_eq!(y, b);
        }
    }

    #[test]
    fn all_gates_off_is_bitwise_base() {
        let mut rng = stream(13);
        let bank = rand_bank(&mut rng, 5, 4, 3);
        let x0 = randn(&mut rng, &[3, 4]);

        let mut tape = Tape::new();
        let x = tape.constant(x0.clone());
        let vars = BankVars {
            w0: tape.constant(bank.w0.clone()),
            a: tape.constant(bank.a.clone()),
            b: tape.constant(bank.b.clone()),
        };
        let z0 = tape.constant(Tensor::zeros(&[3]));
        let z1 = tape.constant(Tensor::zeros(&[3]));
        let out = moga_forward(&mut tape, x, vars, &[z0, z1]).unwrap();

        let base = matmul_nt(&x0.data, &bank.w0.data, 3, 4, 5);
        for (y, b) in tape.value(out).data.iter().zip(&base) {
            assert_eq!(y, b);
        }
    }

    #[test]
    fn single_object_all_on_reduces_to_dense_lora() {
        let mut rng = stream(14);
        let bank = rand_bank(&mut rng, 6, 4, 3);
        let x0 = randn(&mut rng, &[2, 4]);

        let mut tape = Tape::new();
        let x = tape.constant(x0.clone());
        let vars = BankVars {
            w0: tape.constant(bank.w0.clone()),
            a: tape.constant(bank.a.clone()),
            b: tape.constant(bank.b.clone()),
        };
        let ones = tape.constant(Tensor::filled(&[3], 1.0));
        let out = moga_forward(&mut tape, x, vars, &[ones]).unwrap();

        // dense oracle: (W0 + B·A)·x
        let delta = bank.dense_delta();
        let mut w = bank.w0.clone();
        for (wv, dv) in w.data.iter_mut().zip(&delta.data) {
            *wv += dv;
        }
        let oracle = matmul_nt(&x0.data, &w.data, 2, 4, 6);
        for (y, o) in tape.value(out).data.iter().zip(&oracle) {
            assert!((y - o).abs() < 1e-10);
        }
    }

    #[test]
    fn mixed_gates_match_explicit_per_object_delta_oracle() {
        let mut rng = stream(15);
        let bank = rand_bank(&mut rng, 5, 6, 4);
        let x0 = randn(&mut rng, &[3, 6]);
        use rand::Rng;
        let z1: Vec<f64> = (0..4).map(|_| f64::from(rng.gen_bool(0.5))).collect();
        let z2: Vec<f64> = (0..4).map(|_| f64::from(rng.gen_bool(0.5))).collect();

        let mut tape = Tape::new();
        let x = tape.constant(x0.clone());
        let vars = BankVars {
            w0: tape.constant(bank.w0.clone()),
            a: tape.constant(bank.a.clone()),
            b: tape.constant(bank.b.clone()),
        };
        let g1 = tape.constant(Tensor::new(vec![4], z1.clone()));
        let g2 = tape.constant(Tensor::new(vec![4], z2.clone()));
        let out = moga_forward(&mut tape, x, vars, &[g1, g2]).unwrap();

        // oracle: materialize ΔW_o = Σᵢ z_{o,i}·bᵢaᵢᵀ per object
        let (d, k, r) = (5, 6, 4);
        let delta_of = |z: &[f64]| {
            let mut dw = vec![0.0; d * k];
            for i in 0..r {
                if z[i] == 0.0 {
                    continue;
                }
                for row in 0..d {
                    let bi = bank.b.data[row * r + i];
                    for c in 0..k {
                        dw[row * k + c] += bi * bank.a.data[i * k + c];
                    }
                }
            }
            dw
        };
        let d1 = delta_of(&z1);
        let d2 = delta_of(&z2);
        let mut w_eff = bank.w0.data.clone();
        for i in 0..d * k {
            w_eff[i] += 0.5 * (d1[i] + d2[i]);
        }
        let oracle = matmul_nt(&x0.data, &w_eff, 3, 6, 5);
        for (y, o) in tape.value(out).data.iter().zip(&oracle) {
            assert!((y - o).abs() < 1e-10);
        }
    }

    #[test]
    fn gate_flip_changes_output_by_one_component() {
        let mut rng = stream(16);
        let bank = rand_bank(&mut rng, 4, 5, 6);
        let x0 = randn(&mut rng, &[2, 5]);
        let o_count = 3usize;

        let forward = |z_first: &[f64]| {
            let mut tape = Tape::new();
            let x = tape.constant(x0.clone());
            let vars = BankVars {
                w0: tape.constant(bank.w0.clone()),
                a: tape.constant(bank.a.clone()),
                b: tape.constant(bank.b.clone()),
            };
            let mut gates = vec![tape.constant(Tensor::new(vec![6], z_first.to_vec()))];
            for _ in 1..o_count {
                gates.push(tape.constant(Tensor::filled(&[6], 1.0)));
            }
            let out = moga_forward(&mut tape, x, vars, &gates).unwrap();
            tape.value(out).clone()
        };

        let mut z = vec![0.0; 6];
        let off = forward(&z);
        z[2] = 1.0;
        let on = forward(&z);

        // expected change: (1/O)·b₂·(a₂ᵀ x_n) on every row
        for n in 0..2 {
            let xrow = &x0.data[n * 5..(n + 1) * 5];
            let dot: f64 = (0..5).map(|c| bank.a.data[2 * 5 + c] * xrow[c]).sum();
            for dcol in 0..4 {
                let expected = bank.b.data[dcol * 6 + 2] * dot / o_count as f64;
                let got = on.at2(n, dcol) - off.at2(n, dcol);
                assert!((got - expected).abs() < 1e-10, "row {n} col {dcol}");
            }
        }
    }

    #[test]
    fn init_is_seed_deterministic() {
        let mk = || {
            let mut rng = stream(77);
            Rank1AdapterBank::init(Tensor::zeros(&[4, 4]), 3, &mut rng).unwrap()
        };
        let b1 = mk();
        let b2 = mk();
        assert_eq!(b1.a.data, b2.a.data);
        assert!(b1.b.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_objects_is_an_error() {
        let mut rng = stream(18);
        let bank = rand_bank(&mut rng, 3, 3, 2);
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::zeros(&[1, 3]));
        let vars = BankVars {
            w0: tape.constant(bank.w0.clone()),
            a: tape.constant(bank.a.clone()),
            b: tape.constant(bank.b.clone()),
        };
        assert!(moga_forward(&mut tape, x, vars, &[]).is_err());
    }
}
