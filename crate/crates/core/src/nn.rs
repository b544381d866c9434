//! Affine layers and two-layer perceptrons registered in a [`ParamSet`] and
//! evaluated on a [`Tape`].

use rand::Rng;

use crate::params::{Init, ParamId, ParamSet};
use crate::tape::{Tape, Var};

#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub input: usize,
    pub output: usize,
}

impl Linear {
    /// Weights ~ N(0, 1/input), zero bias.
    pub fn register<R: Rng + ?Sized>(set: &mut ParamSet, name: &str, input: usize, output: usize, rng: &mut R) -> Self {
        Self::register_with(set, name, input, output, Init::Normal(1.0 / (input as f64).sqrt()), rng)
    }

    pub fn register_zeroed<R: Rng + ?Sized>(set: &mut ParamSet, name: &str, input: usize, output: usize, rng: &mut R) -> Self {
        Self::register_with(set, name, input, output, Init::Zeros, rng)
    }

    fn register_with<R: Rng + ?Sized>(
        set: &mut ParamSet,
        name: &str,
        input: usize,
        output: usize,
        init: Init,
        rng: &mut R,
    ) -> Self {
        let weight = set.add(&format!("{name}.weight"), input * output, init, rng);
        let bias = set.add(&format!("{name}.bias"), output, Init::Zeros, rng);
        Self { weight, bias, input, output }
    }

    pub fn forward(&self, tape: &mut Tape, vars: &[Var], x: Var) -> Var {
        debug_assert_eq!(tape.dim(x), self.input);
        tape.affine(vars[self.weight.0], x, vars[self.bias.0])
    }
}

/// `second(gelu(first(x)))`
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub first: Linear,
    pub second: Linear,
}

impl Mlp {
    pub fn register<R: Rng + ?Sized>(
        set: &mut ParamSet,
        name: &str,
        input: usize,
        hidden: usize,
        output: usize,
        zero_last: bool,
        rng: &mut R,
    ) -> Self {
        let first = Linear::register(set, &format!("{name}.0"), input, hidden, rng);
        let second = if zero_last {
            Linear::register_zeroed(set, &format!("{name}.1"), hidden, output, rng)
        } else {
            Linear::register(set, &format!("{name}.1"), hidden, output, rng)
        };
        Self { first, second }
    }

    pub fn forward(&self, tape: &mut Tape, vars: &[Var], x: Var) -> Var {
        let h = self.first.forward(tape, vars, x);
        let a = tape.gelu(h);
        self.second.forward(tape, vars, a)
    }
}
