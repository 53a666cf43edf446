//! Single-level orthogonal discrete wavelet transform.
//!
//! The signal is extended by half-sample mirroring (`x ++ reverse(x)`) and the
//! extended sequence is transformed with periodic wrap-around, so a slow trend
//! leaves only a small kink at each end instead of a wrap-around jump. Only
//! the coefficients covering the original samples are returned.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Wavelet {
    Haar,
    Db4,
    Sym8,
    #[default]
    Sym16,
}

const HAAR: [f64; 2] = [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2];

const DB4: [f64; 8] = [
    -0.010597401785069032,
    0.0328830116668852,
    0.030841381835560764,
    -0.18703481171909309,
    -0.027983769416859854,
    0.6308807679298589,
    0.7148465705529157,
    0.2303778133088965,
];

const SYM8: [f64; 16] = [
    -0.0033824159510061256,
    -0.0005421323317911481,
    0.03169508781149298,
    0.007607487324917605,
    -0.1432942383508097,
    -0.061273359067658524,
    0.4813596512583722,
    0.7771857517005235,
    0.3644418948353314,
    -0.05194583810770904,
    -0.027219029917056003,
    0.049137179673607506,
    0.003808752013890615,
    -0.01495225833704823,
    -0.0003029205147213668,
    0.0018899503327594609,
];

const SYM16: [f64; 32] = [
    6.230006701220761e-06,
    -3.113556407621969e-06,
    -0.00010943147929529757,
    2.8078582128442894e-05,
    0.0008523547108047095,
    -0.0001084456223089688,
    -0.0038809122526038786,
    0.0007182119788317892,
    0.012666731659857348,
    -0.0031265171722710075,
    -0.031051202843553064,
    0.004869274404904607,
    0.032333091610663785,
    -0.06698304907021778,
    -0.034574228416972504,
    0.39712293362064416,
    0.7565249878756971,
    0.47534280601152273,
    -0.054040601387606135,
    -0.15959219218520598,
    0.03072113906330156,
    0.07803785290341991,
    -0.003510275068374009,
    -0.024952758046290123,
    0.001359844742484172,
    0.0069377611308027096,
    -0.00022211647621176323,
    -0.0013387206066921965,
    3.656592483348223e-05,
    0.00016545679579108483,
    -5.396483179315242e-06,
    -1.0797982104319795e-05,
];

impl Wavelet {
    /// Decomposition low-pass filter.
    pub fn low_pass(self) -> &'static [f64] {
        match self {
            Wavelet::Haar => &HAAR,
            Wavelet::Db4 => &DB4,
            Wavelet::Sym8 => &SYM8,
            Wavelet::Sym16 => &SYM16,
        }
    }

    /// Decomposition high-pass filter (quadrature mirror of the low-pass).
    pub fn high_pass(self) -> Vec<f64> {
        let lo = self.low_pass();
        let n = lo.len();
        (0..n).map(|k| if k % 2 == 0 { -lo[n - 1 - k] } else { lo[n - 1 - k] }).collect()
    }
}

/// One-level detail coefficients of `x`, `x.len() / 2` of them.
pub fn detail_coefficients(x: &[f64], wavelet: Wavelet) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return Vec::new();
    }
    let hi = wavelet.high_pass();
    let len = hi.len();
    let ext_len = 2 * n;
    let ext = |i: usize| if i < n { x[i] } else { x[ext_len - 1 - i] };
    (0..n / 2)
        .map(|j| {
            let centre = 2 * j + len / 2;
            hi.iter()
                .enumerate()
                .map(|(k, h)| {
                    // (centre - k) mod ext_len without going negative
                    let idx = (centre + ext_len * (1 + len / ext_len) - k) % ext_len;
                    h * ext(idx)
                })
                .sum()
        })
        .collect()
}
